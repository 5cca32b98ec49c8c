//! Rectifying homography from two vanishing points, image warping and the
//! d1 / d2 quad metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HomogeneousPoint, ImagePoint};
use crate::image::GrayImage;

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

pub fn det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse via the adjugate; `None` for a singular matrix.
pub fn invert(m: &Mat3) -> Option<Mat3> {
    let d = det(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    Some(adj.map(|row| row.map(|v| v / d)))
}

fn frobenius(m: &Mat3) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Invertible 3x3 map acting on homogeneous column vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    pub m: Mat3,
}

impl Homography {
    pub fn identity() -> Self {
        Self { m: IDENTITY }
    }

    /// Rejects matrices whose determinant is below `1e-12` of the cubed Frobenius norm.
    pub fn new(m: Mat3) -> Result<Self> {
        let f = frobenius(&m);
        if !f.is_finite() || f == 0.0 || det(&m).abs() <= 1e-12 * f * f * f {
            return Err(Error::Degenerate("singular homography".into()));
        }
        Ok(Self { m }.normalized())
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self { m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]] }
    }

    pub fn scaling(s: f64) -> Self {
        Self { m: [[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, 1.0]] }
    }

    /// Scaled so that `m[2][2] == 1`, or to unit Frobenius norm when that entry vanishes.
    pub fn normalized(&self) -> Self {
        let k = if self.m[2][2].abs() > 1e-12 * frobenius(&self.m) { self.m[2][2] } else { frobenius(&self.m) };
        Self { m: self.m.map(|r| r.map(|v| v / k)) }
    }

    pub fn inverse(&self) -> Result<Self> {
        invert(&self.m).map(|m| Self { m }.normalized()).ok_or_else(|| Error::Degenerate("singular homography".into()))
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Homography) -> Self {
        Self { m: mat_mul(&self.m, &first.m) }.normalized()
    }

    pub fn apply(&self, p: HomogeneousPoint) -> HomogeneousPoint {
        HomogeneousPoint::from_array(mat_vec(&self.m, p.as_array()))
    }

    /// Euclidean image of a point; `None` when it lands at infinity.
    pub fn apply_point(&self, p: ImagePoint) -> Option<ImagePoint> {
        let [x, y, w] = mat_vec(&self.m, [p.x, p.y, 1.0]);
        (w.abs() > 1e-12 * (x.abs() + y.abs()).max(1.0)).then(|| ImagePoint::new(x / w, y / w))
    }
}

/// Homography sending `horizontal` to the x direction and `vertical` to the
/// y direction, keeping the image center fixed with unit scale along both
/// axes there.
pub fn homography_from_vps(horizontal: HomogeneousPoint, vertical: HomogeneousPoint, width: f64, height: f64) -> Result<Homography> {
    if !horizontal.is_valid() || !vertical.is_valid() {
        return Err(Error::InvalidArgument("vanishing points must be finite and non-zero".into()));
    }
    let unit = |p: HomogeneousPoint| {
        let a = p.as_array();
        let n = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        a.map(|v| v / n)
    };
    let (cx, cy) = (width / 2.0, height / 2.0);
    let vh = unit(horizontal);
    let vv = unit(vertical);
    let cn = (cx * cx + cy * cy + 1.0).sqrt();
    let c = [cx / cn, cy / cn, 1.0 / cn];
    let m = [[vh[0], vv[0], c[0]], [vh[1], vv[1], c[1]], [vh[2], vv[2], c[2]]];
    if det(&m).abs() < 1e-12 {
        return Err(Error::Degenerate("vanishing points are collinear with the image center or coincide".into()));
    }
    let g = invert(&m).ok_or_else(|| Error::Degenerate("singular vanishing-point frame".into()))?;

    // g sends the center to (0, 0, cn); with the last row divided by cn the
    // Jacobian there is the upper-left block of g.
    let row_scale = |r: usize| {
        let n = (g[r][0] * g[r][0] + g[r][1] * g[r][1]).sqrt();
        let sign = if g[r][r] < 0.0 { -1.0 } else { 1.0 };
        sign / n
    };
    let (a, b) = (row_scale(0), row_scale(1));
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Degenerate("zero scale at the image center".into()));
    }
    let scaled = [g[0].map(|v| v * a), g[1].map(|v| v * b), g[2].map(|v| v / cn)];
    let h = mat_mul(&Homography::translation(cx, cy).m, &scaled);
    Homography::new(h)
}

/// Document corners: top-left, top-right, bottom-right, bottom-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub corners: [ImagePoint; 4],
}

impl Quad {
    pub fn new(corners: [ImagePoint; 4]) -> Self {
        Self { corners }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new([ImagePoint::new(x0, y0), ImagePoint::new(x1, y0), ImagePoint::new(x1, y1), ImagePoint::new(x0, y1)])
    }

    /// Shoelace area, positive for the corner order above in image (y-down) coordinates.
    pub fn signed_area(&self) -> f64 {
        let c = &self.corners;
        0.5 * (0..4).map(|i| c[i].x * c[(i + 1) % 4].y - c[(i + 1) % 4].x * c[i].y).sum::<f64>()
    }

    /// Finite corners, non-zero edges, no crossing edges and positive orientation.
    pub fn is_valid(&self) -> bool {
        let c = &self.corners;
        if c.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return false;
        }
        if (0..4).any(|i| c[i] == c[(i + 1) % 4]) {
            return false;
        }
        !segments_cross(c[0], c[1], c[2], c[3]) && !segments_cross(c[1], c[2], c[3], c[0]) && self.signed_area() > 0.0
    }
}

fn segments_cross(a: ImagePoint, b: ImagePoint, c: ImagePoint, d: ImagePoint) -> bool {
    let orient = |p: ImagePoint, q: ImagePoint, r: ImagePoint| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

pub fn transform_quad(q: &Quad, h: &Homography) -> Result<Quad> {
    let mut out = q.corners;
    for (dst, src) in out.iter_mut().zip(q.corners.iter()) {
        *dst = h.apply_point(*src).ok_or_else(|| Error::Degenerate("quad corner maps to infinity".into()))?;
    }
    Ok(Quad::new(out))
}

/// Angles of one document, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleStats {
    /// `|90 - interior angle|` at each corner.
    pub corner_deviations: [f64; 4],
    /// Mean signed orientation of the left and right edges against the y axis.
    pub alpha_v: f64,
    /// Mean signed orientation of the top and bottom edges against the x axis.
    pub alpha_h: f64,
}

/// Folds an orientation into `(-45, 45]`.
fn fold_quarter(deg: f64) -> f64 {
    let r = deg.rem_euclid(90.0);
    if r > 45.0 {
        r - 90.0
    } else {
        r
    }
}

pub fn quad_angles(q: &Quad) -> Result<AngleStats> {
    if !q.is_valid() {
        return Err(Error::Degenerate("quad is not a simple positively oriented polygon".into()));
    }
    let c = &q.corners;
    let mut corner_deviations = [0.0; 4];
    for (i, dev) in corner_deviations.iter_mut().enumerate() {
        let p = c[(i + 3) % 4];
        let n = c[(i + 1) % 4];
        let (ax, ay) = (p.x - c[i].x, p.y - c[i].y);
        let (bx, by) = (n.x - c[i].x, n.y - c[i].y);
        let angle = (ax * by - ay * bx).abs().atan2(ax * bx + ay * by).to_degrees();
        *dev = (90.0 - angle).abs();
    }
    let horiz = |a: ImagePoint, b: ImagePoint| fold_quarter((b.y - a.y).atan2(b.x - a.x).to_degrees());
    let vert = |a: ImagePoint, b: ImagePoint| fold_quarter((a.x - b.x).atan2(b.y - a.y).to_degrees());
    Ok(AngleStats {
        corner_deviations,
        alpha_h: 0.5 * (horiz(c[0], c[1]) + horiz(c[3], c[2])),
        alpha_v: 0.5 * (vert(c[0], c[3]) + vert(c[1], c[2])),
    })
}

/// Aggregate metric over a set of quads; degenerate quads are excluded and counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub d1: f64,
    pub d2: f64,
    pub used: usize,
    pub excluded: usize,
    pub per_document: Vec<Option<AngleStats>>,
}

pub fn quad_metrics(quads: &[Quad]) -> Result<MetricReport> {
    if quads.is_empty() {
        return Err(Error::InvalidArgument("no quads to score".into()));
    }
    let per_document: Vec<Option<AngleStats>> = quads.iter().map(|q| quad_angles(q).ok()).collect();
    let used: Vec<&AngleStats> = per_document.iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::Degenerate(format!("all {} quads are degenerate", quads.len())));
    }
    let n = used.len() as f64;
    let d1 = used.iter().map(|s| s.corner_deviations.iter().sum::<f64>()).sum::<f64>() / (4.0 * n);
    let d2 = used.iter().map(|s| s.alpha_v.abs() + s.alpha_h.abs()).sum::<f64>() / (2.0 * n);
    Ok(MetricReport { d1, d2, used: used.len(), excluded: quads.len() - used.len(), per_document })
}

/// Mean absolute deviation of corner angles from 90 degrees.
pub fn metric_d1(quads: &[Quad]) -> Result<f64> {
    quad_metrics(quads).map(|r| r.d1)
}

/// Mean absolute edge-orientation error.
pub fn metric_d2(quads: &[Quad]) -> Result<f64> {
    quad_metrics(quads).map(|r| r.d2)
}

/// Output of [`warp`]: the image plus the map from source pixels to its pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub image: GrayImage,
    pub homography: Homography,
}

/// Inverse-mapping bilinear warp. The output covers the bounding box of the
/// mapped source pixel grid; if that exceeds `max_side` on either axis the
/// result is scaled down uniformly.
pub fn warp(img: &GrayImage, h: &Homography, max_side: usize) -> Result<Warped> {
    let (w, hgt) = (img.width() as f64, img.height() as f64);
    let corners = [(0.0, 0.0), (w - 1.0, 0.0), (w - 1.0, hgt - 1.0), (0.0, hgt - 1.0)];
    let mut min = (f64::INFINITY, f64::INFINITY);
    let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (x, y) in corners {
        let [px, py, pw] = mat_vec(&h.m, [x, y, 1.0]);
        if pw <= 0.0 {
            return Err(Error::Degenerate("image corner maps to or beyond infinity".into()));
        }
        let (u, v) = (px / pw, py / pw);
        min = (min.0.min(u), min.1.min(v));
        max = (max.0.max(u), max.1.max(v));
    }
    let x0 = (min.0 + 1e-9).floor();
    let y0 = (min.1 + 1e-9).floor();
    let mut full = Homography::translation(-x0, -y0).compose(h);
    let mut bw = (max.0 - 1e-9).ceil() - x0 + 1.0;
    let mut bh = (max.1 - 1e-9).ceil() - y0 + 1.0;
    if !bw.is_finite() || !bh.is_finite() || bw < 1.0 || bh < 1.0 {
        return Err(Error::Degenerate("empty output frame".into()));
    }
    let limit = max_side as f64;
    if bw > limit || bh > limit {
        let s = limit / bw.max(bh);
        full = Homography::scaling(s).compose(&full);
        bw = (bw * s).floor().max(1.0);
        bh = (bh * s).floor().max(1.0);
    }
    let inv = full.inverse()?;
    let (ow, oh) = (bw as usize, bh as usize);
    let mut out = GrayImage::new(ow, oh)?;
    for y in 0..oh {
        for x in 0..ow {
            let [sx, sy, sw] = mat_vec(&inv.m, [x as f64, y as f64, 1.0]);
            if sw > 0.0 {
                out.set(x, y, img.sample_bilinear(sx / sw, sy / sw));
            }
        }
    }
    Ok(Warped { image: out, homography: full })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotated_rect(deg: f64) -> Quad {
        let (s, c) = deg.to_radians().sin_cos();
        let rot = |x: f64, y: f64| ImagePoint::new(c * x - s * y, s * x + c * y);
        Quad::new([rot(0.0, 0.0), rot(10.0, 0.0), rot(10.0, 6.0), rot(0.0, 6.0)])
    }

    #[test]
    fn inverse_and_det() {
        let m = [[2.0, 1.0, 0.5], [0.0, 1.5, -1.0], [0.1, 0.2, 1.0]];
        let inv = invert(&m).unwrap();
        let p = mat_mul(&m, &inv);
        for (i, row) in p.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(invert(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]]).is_none());
    }

    #[test]
    fn axis_vps_give_identity() {
        let h = homography_from_vps(HomogeneousPoint::direction(1.0, 0.0), HomogeneousPoint::direction(0.0, 1.0), 80.0, 60.0)
            .unwrap();
        for (i, row) in h.m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((v - IDENTITY[i][j]).abs() < 1e-12, "{:?}", h.m);
            }
        }
    }

    #[test]
    fn vps_go_to_axis_directions() {
        let vh = HomogeneousPoint::new(900.0, 40.0, 1.0);
        let vv = HomogeneousPoint::new(-30.0, -1200.0, 1.0);
        let h = homography_from_vps(vh, vv, 200.0, 300.0).unwrap();
        let a = h.apply(vh);
        let b = h.apply(vv);
        assert!(a.hy.abs() < 1e-9 * a.hx.abs() && a.hw.abs() < 1e-9 * a.hx.abs());
        assert!(b.hx.abs() < 1e-9 * b.hy.abs() && b.hw.abs() < 1e-9 * b.hy.abs());
        let c = h.apply_point(ImagePoint::new(100.0, 150.0)).unwrap();
        assert!((c.x - 100.0).abs() < 1e-9 && (c.y - 150.0).abs() < 1e-9);
    }

    #[test]
    fn collinear_vps_are_degenerate() {
        let v = HomogeneousPoint::direction(1.0, 0.0);
        assert!(matches!(homography_from_vps(v, v, 10.0, 10.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn d1_examples() {
        assert_eq!(metric_d1(&[Quad::rect(0.0, 0.0, 4.0, 3.0)]).unwrap(), 0.0);
        let t = 80f64.to_radians();
        let para = Quad::new([
            ImagePoint::new(0.0, 0.0),
            ImagePoint::new(10.0, 0.0),
            ImagePoint::new(10.0 + 5.0 * t.cos(), 5.0 * t.sin()),
            ImagePoint::new(5.0 * t.cos(), 5.0 * t.sin()),
        ]);
        assert!((metric_d1(&[para]).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn d2_rotation() {
        assert_eq!(metric_d2(&[Quad::rect(1.0, 1.0, 4.0, 3.0)]).unwrap(), 0.0);
        assert!((metric_d2(&[rotated_rect(5.0)]).unwrap() - 5.0).abs() < 1e-9);
        assert!((metric_d2(&[rotated_rect(-5.0)]).unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_quads_are_counted() {
        let bowtie = Quad::new([
            ImagePoint::new(0.0, 0.0),
            ImagePoint::new(1.0, 1.0),
            ImagePoint::new(1.0, 0.0),
            ImagePoint::new(0.0, 1.0),
        ]);
        let r = quad_metrics(&[bowtie, Quad::rect(0.0, 0.0, 1.0, 1.0)]).unwrap();
        assert_eq!((r.used, r.excluded), (1, 1));
        assert!(quad_metrics(&[bowtie]).is_err());
        assert!(quad_metrics(&[]).is_err());
    }

    #[test]
    fn metrics_ignore_scale_and_shift() {
        let q = rotated_rect(7.0);
        let moved = Quad::new(q.corners.map(|p| ImagePoint::new(3.0 * p.x + 11.0, 3.0 * p.y - 4.0)));
        let a = quad_metrics(&[q]).unwrap();
        let b = quad_metrics(&[moved]).unwrap();
        assert!((a.d1 - b.d1).abs() < 1e-9 && (a.d2 - b.d2).abs() < 1e-9);
    }

    fn test_image() -> GrayImage {
        GrayImage::from_fn(23, 17, |x, y| ((x * 7 + y * 13) % 11) as f64 / 10.0).unwrap()
    }

    #[test]
    fn identity_and_translation_warps_are_exact() {
        let img = test_image();
        let out = warp(&img, &Homography::identity(), 4096).unwrap();
        assert_eq!(out.image, img);
        let out = warp(&img, &Homography::translation(5.0, -3.0), 4096).unwrap();
        assert_eq!(out.image, img);
    }

    #[test]
    fn warp_round_trip() {
        let img = GrayImage::from_fn(64, 48, |x, y| {
            0.5 + 0.25 * ((x as f64) * 0.2).sin() + 0.25 * ((y as f64) * 0.15).cos()
        })
        .unwrap();
        let h = Homography::new([[1.05, 0.04, 2.0], [-0.03, 0.97, 1.0], [1e-4, -2e-4, 1.0]]).unwrap();
        let fwd = warp(&img, &h, 4096).unwrap();
        let back = warp(&fwd.image, &fwd.homography.inverse().unwrap(), 4096).unwrap();
        // Both frames are integer translates of each other.
        let total = back.homography.compose(&fwd.homography);
        let (tx, ty) = (total.m[0][2].round() as isize, total.m[1][2].round() as isize);
        let mut se = 0.0;
        let mut n = 0;
        for y in 4..44isize {
            for x in 4..60isize {
                let v = back.image.get_or_zero(x + tx, y + ty);
                se += (v - img.get(x as usize, y as usize)).powi(2);
                n += 1;
            }
        }
        let psnr = 10.0 * (1.0 / (se / n as f64)).log10();
        assert!(psnr > 30.0, "psnr {psnr}");
    }

    #[test]
    fn unit_scale_at_center() {
        let vh = HomogeneousPoint::new(700.0, -90.0, 1.0);
        let vv = HomogeneousPoint::new(150.0, 2500.0, 1.0);
        let h = homography_from_vps(vh, vv, 300.0, 400.0).unwrap();
        let e = 1e-4;
        let c = h.apply_point(ImagePoint::new(150.0, 200.0)).unwrap();
        let dx = h.apply_point(ImagePoint::new(150.0 + e, 200.0)).unwrap();
        let dy = h.apply_point(ImagePoint::new(150.0, 200.0 + e)).unwrap();
        let row0 = ((dx.x - c.x) / e).hypot((dy.x - c.x) / e);
        let row1 = ((dx.y - c.y) / e).hypot((dy.y - c.y) / e);
        assert!((row0 - 1.0).abs() < 1e-5 && (row1 - 1.0).abs() < 1e-5, "{row0} {row1}");
        assert!((dx.x - c.x) > 0.0 && (dy.y - c.y) > 0.0);
    }

    #[test]
    fn oversized_output_is_scaled_down() {
        let img = test_image();
        let out = warp(&img, &Homography::scaling(10.0), 50).unwrap();
        assert!(out.image.width() <= 50 && out.image.height() <= 50);
    }

    #[test]
    fn transform_quad_identity() {
        let q = rotated_rect(3.0);
        assert_eq!(transform_quad(&q, &Homography::identity()).unwrap(), q);
    }
}
