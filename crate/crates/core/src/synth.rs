//! Synthetic images with exact vanishing points: line bundles and
//! projectively distorted text pages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Branch, HomogeneousPoint, ImagePoint};
use crate::image::GrayImage;
use crate::rectify::{mat_vec, Mat3, Quad};

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Whether a homogeneous point lies in the closed image rectangle.
pub fn inside_image(p: &HomogeneousPoint, w: f64, h: f64) -> bool {
    p.to_point().is_some_and(|q| q.x >= 0.0 && q.y >= 0.0 && q.x <= w && q.y <= h)
}

/// Random VP for one branch: log-uniform distance in `[min_diag, max_diag]`
/// image diagonals from the center, direction within `max_tilt_deg` of the
/// branch axis, on either side.
pub fn sample_vp(rng: &mut impl Rng, branch: Branch, w: f64, h: f64, min_diag: f64, max_diag: f64, max_tilt_deg: f64) -> HomogeneousPoint {
    let diag = w.hypot(h);
    let d = diag * (min_diag.ln() + rng.random::<f64>() * (max_diag.ln() - min_diag.ln())).exp();
    let tilt = (rng.random::<f64>() * 2.0 - 1.0) * max_tilt_deg.to_radians();
    let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let (dx, dy) = match branch {
        Branch::Horizontal => (side * tilt.cos(), tilt.sin()),
        Branch::Vertical => (tilt.sin(), side * tilt.cos()),
    };
    HomogeneousPoint::new(w / 2.0 + d * dx, h / 2.0 + d * dy, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BundleParams {
    pub n_lines: usize,
    /// Half-width of the tent profile in pixels.
    pub line_width: f64,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    /// Number of random short clutter segments.
    pub clutter: usize,
    /// Distance kept between line ends and the image border, in pixels.
    pub margin: f64,
}

impl Default for BundleParams {
    fn default() -> Self {
        Self { n_lines: 6, line_width: 1.0, noise: 0.0, clutter: 0, margin: 2.0 }
    }
}

/// Draws `n_lines` anti-aliased lines through `vp`. The lines cross the
/// image between opposite borders, spread evenly over the range where both
/// crossings stay inside the image.
pub fn gen_line_bundle(vp: HomogeneousPoint, w: usize, h: usize, params: &BundleParams, seed: u64) -> Result<GrayImage> {
    if params.n_lines < 2 {
        return Err(Error::InvalidArgument("a bundle needs at least two lines".into()));
    }
    if !vp.is_valid() {
        return Err(Error::InvalidArgument("vanishing point is not a valid homogeneous point".into()));
    }
    if inside_image(&vp, w as f64, h as f64) {
        return Err(Error::Regime("vanishing point inside the image".into()));
    }
    let (dx, dy) = vp.direction_from(ImagePoint::new(w as f64 / 2.0, h as f64 / 2.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if dy.abs() >= dx.abs() {
        render_bundle(vp, w, h, params, &mut rng)
    } else {
        let t = render_bundle(HomogeneousPoint::new(vp.hy, vp.hx, vp.hw), h, w, params, &mut rng)?;
        GrayImage::from_fn(w, h, |x, y| t.get(y, x))
    }
}

/// Bundle whose lines run from the top border to the bottom border.
fn render_bundle(vp: HomogeneousPoint, w: usize, h: usize, params: &BundleParams, rng: &mut ChaCha8Rng) -> Result<GrayImage> {
    let (wf, hf) = (w as f64, h as f64);
    let yc = hf / 2.0;
    let dy = vp.hy - vp.hw * yc;
    // x(y) = xc (1 - hw k) + hx k with k = (y - yc) / dy.
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for y in [0.0, hf - 1.0] {
        let k = (y - yc) / dy;
        let a = 1.0 - vp.hw * k;
        let b = vp.hx * k;
        if a <= 0.0 {
            return Err(Error::Regime("vanishing point too close to the image".into()));
        }
        lo = lo.max((params.margin - b) / a);
        hi = hi.min((wf - 1.0 - params.margin - b) / a);
    }
    if !(hi > lo) {
        return Err(Error::Regime("no line through the vanishing point spans the image".into()));
    }
    let n = params.n_lines;
    let lines: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let xc = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
            let l = cross(vp.as_array(), [xc, yc, 1.0]);
            let s = l[0].hypot(l[1]);
            l.map(|v| v / s)
        })
        .collect();
    let mut img = GrayImage::from_fn(w, h, |x, y| {
        let (x, y) = (x as f64, y as f64);
        lines.iter().map(|l| tent((l[0] * x + l[1] * y + l[2]).abs(), params.line_width)).fold(0.0, f64::max)
    })?;
    add_clutter(&mut img, params.clutter, params.line_width, rng);
    add_noise(&mut img, params.noise, rng);
    Ok(img)
}

/// Two bundles in one image, one through each VP; pixelwise maximum.
pub fn gen_bundle_pair(
    horizontal: HomogeneousPoint,
    vertical: HomogeneousPoint,
    w: usize,
    h: usize,
    params: &BundleParams,
    seed: u64,
) -> Result<GrayImage> {
    let a = gen_line_bundle(horizontal, w, h, params, seed)?;
    let b = gen_line_bundle(vertical, w, h, params, seed.wrapping_add(1))?;
    GrayImage::from_vec(w, h, a.data().iter().zip(b.data()).map(|(x, y)| x.max(*y)).collect())
}

fn tent(dist: f64, width: f64) -> f64 {
    (1.0 - dist / width).max(0.0)
}

fn add_clutter(img: &mut GrayImage, count: usize, width: f64, rng: &mut ChaCha8Rng) {
    let (w, h) = (img.width() as f64, img.height() as f64);
    for _ in 0..count {
        let a = (rng.random::<f64>() * w, rng.random::<f64>() * h);
        let len = (0.05 + 0.15 * rng.random::<f64>()) * w.min(h);
        let ang = rng.random::<f64>() * std::f64::consts::PI;
        let b = (a.0 + len * ang.cos(), a.1 + len * ang.sin());
        let (x0, x1) = ((a.0.min(b.0) - width).floor().max(0.0), (a.0.max(b.0) + width).ceil().min(w - 1.0));
        let (y0, y1) = ((a.1.min(b.1) - width).floor().max(0.0), (a.1.max(b.1) + width).ceil().min(h - 1.0));
        for y in y0 as usize..=y1 as usize {
            for x in x0 as usize..=x1 as usize {
                let d = segment_distance((x as f64, y as f64), a, b);
                let v = tent(d, width);
                if v > img.get(x, y) {
                    img.set(x, y, v);
                }
            }
        }
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / (vx * vx + vy * vy)).clamp(0.0, 1.0);
    (p.0 - a.0 - t * vx).hypot(p.1 - a.1 - t * vy)
}

fn add_noise(img: &mut GrayImage, sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    for v in img.data_mut() {
        *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
    }
}

/// Replaces a fraction of the pixels by 0 or 1.
pub fn add_salt_pepper(img: &mut GrayImage, fraction: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in img.data_mut() {
        if rng.random::<f64>() < fraction {
            *v = if rng.random::<bool>() { 1.0 } else { 0.0 };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DocParams {
    /// VP distances are divided by this; 0 gives a fronto-parallel page.
    pub distortion: f64,
    /// Fraction of text rows that carry words.
    pub stroke_density: f64,
    pub min_diag: f64,
    pub max_diag: f64,
    pub max_tilt_deg: f64,
    /// Random clutter segments drawn on the background.
    pub clutter: usize,
}

impl Default for DocParams {
    fn default() -> Self {
        Self { distortion: 1.0, stroke_density: 0.8, min_diag: 1.5, max_diag: 20.0, max_tilt_deg: 20.0, clutter: 0 }
    }
}

/// Ground truth of one synthetic page, also used as the dataset sidecar record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub quad: Quad,
    pub horizontal_vp: HomogeneousPoint,
    pub vertical_vp: HomogeneousPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub image: GrayImage,
    pub truth: GroundTruth,
    /// Page coordinates (origin at the page center) to image coordinates.
    pub page_to_image: Mat3,
    pub seed: u64,
    pub params: DocParams,
}

/// Text layout in page coordinates: rows of glyph boxes.
struct Page {
    half_w: f64,
    half_h: f64,
    top: f64,
    pitch: f64,
    rows: Vec<Vec<(f64, f64, f64)>>, // (u0, u1, height) sorted by u0
    baseline: f64,
    /// Printed frame: inset from the page edge and stroke width.
    frame_inset: f64,
    frame_width: f64,
}

impl Page {
    fn random(rng: &mut ChaCha8Rng, half_w: f64, half_h: f64, density: f64) -> Self {
        let pitch = half_w * rng.random_range(0.045..0.07);
        let margin = 0.1 * half_w;
        let frame_inset = 0.4 * margin;
        let frame_width = (0.012 * half_w).max(0.6);
        let top = -half_h + margin;
        let n_rows = ((2.0 * half_h - 2.0 * margin) / pitch).floor().max(0.0) as usize;
        let x_height = 0.45 * pitch;
        let rows = (0..n_rows)
            .map(|_| {
                let mut glyphs = Vec::new();
                if rng.random::<f64>() >= density {
                    return glyphs;
                }
                let mut u = -half_w + margin;
                let end = half_w - margin - rng.random::<f64>() * 0.4 * half_w;
                while u < end {
                    let letters = rng.random_range(2..9);
                    for _ in 0..letters {
                        let gw = pitch * rng.random_range(0.15..0.45);
                        if u + gw > end {
                            break;
                        }
                        let tall = rng.random::<f64>() < 0.3;
                        glyphs.push((u, u + gw, if tall { 1.6 * x_height } else { x_height }));
                        u += gw + pitch * rng.random_range(0.12..0.25);
                    }
                    u += pitch * rng.random_range(0.5..0.9);
                }
                glyphs
            })
            .collect();
        Self { half_w, half_h, top, pitch, rows, baseline: 0.75 * pitch, frame_inset, frame_width }
    }

    fn ink(&self, u: f64, v: f64) -> f64 {
        if u.abs() > self.half_w || v.abs() > self.half_h {
            return -1.0;
        }
        let du = self.half_w - self.frame_inset - u.abs();
        let dv = self.half_h - self.frame_inset - v.abs();
        if (0.0..self.frame_width).contains(&du.min(dv)) {
            return 1.0;
        }
        let rel = v - self.top;
        if rel < 0.0 {
            return 0.0;
        }
        let idx = (rel / self.pitch) as usize;
        let Some(row) = self.rows.get(idx) else { return 0.0 };
        let above = self.baseline - (rel - idx as f64 * self.pitch);
        if above < 0.0 {
            return 0.0;
        }
        let k = row.partition_point(|g| g.0 <= u);
        if k > 0 {
            let (_, u1, gh) = row[k - 1];
            if u <= u1 && above <= gh {
                return 1.0;
            }
        }
        0.0
    }
}

const PAGE: f64 = 0.92;
const INK: f64 = 0.12;

/// Projective page map `[a v_h | b v_v | c]` with unit scale at the center.
fn page_map(vh: [f64; 3], vv: [f64; 3], c: (f64, f64)) -> Mat3 {
    let dir = |v: [f64; 3]| (v[0] - c.0 * v[2], v[1] - c.1 * v[2]);
    let (hx, hy) = dir(vh);
    let (vx, vy) = dir(vv);
    let a = 1.0 / hx.hypot(hy);
    let b = 1.0 / vx.hypot(vy);
    [[a * vh[0], b * vv[0], c.0], [a * vh[1], b * vv[1], c.1], [a * vh[2], b * vv[2], 1.0]]
}

/// Sign-normalizes a VP so its direction from `c` points along `+axis`.
fn orient(v: HomogeneousPoint, c: (f64, f64), branch: Branch) -> [f64; 3] {
    let (dx, dy) = v.direction_from(ImagePoint::new(c.0, c.1));
    let along = match branch {
        Branch::Horizontal => dx,
        Branch::Vertical => dy,
    };
    let a = v.as_array();
    if along < 0.0 {
        a.map(|x| -x)
    } else {
        a
    }
}

/// Renders a text page under a random projective distortion.
pub fn gen_document(seed: u64, w: usize, h: usize, params: &DocParams) -> Result<SynthSample> {
    const RETRIES: usize = 100;
    if w < 16 || h < 16 {
        return Err(Error::Dimension(format!("{w}x{h} is too small for a page")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (wf, hf) = (w as f64, h as f64);
    let c = (wf / 2.0, hf / 2.0);
    for _ in 0..RETRIES {
        let (vh, vv) = if params.distortion == 0.0 {
            (HomogeneousPoint::direction(1.0, 0.0), HomogeneousPoint::direction(0.0, 1.0))
        } else {
            let pull = |p: HomogeneousPoint| HomogeneousPoint::new(c.0 + (p.hx - c.0) / params.distortion, c.1 + (p.hy - c.1) / params.distortion, 1.0);
            (
                pull(sample_vp(&mut rng, Branch::Horizontal, wf, hf, params.min_diag, params.max_diag, params.max_tilt_deg)),
                pull(sample_vp(&mut rng, Branch::Vertical, wf, hf, params.min_diag, params.max_diag, params.max_tilt_deg)),
            )
        };
        let half_w = wf * rng.random_range(0.28..0.38);
        let half_h = hf * rng.random_range(0.3..0.4);
        if inside_image(&vh, wf, hf) || inside_image(&vv, wf, hf) {
            continue;
        }
        let m = page_map(orient(vh, c, Branch::Horizontal), orient(vv, c, Branch::Vertical), c);
        let page_corners = [(-half_w, -half_h), (half_w, -half_h), (half_w, half_h), (-half_w, half_h)];
        let mut corners = [ImagePoint::new(0.0, 0.0); 4];
        let mut ok = true;
        for (dst, &(u, v)) in corners.iter_mut().zip(page_corners.iter()) {
            let [x, y, z] = mat_vec(&m, [u, v, 1.0]);
            if z <= 0.05 {
                ok = false;
                break;
            }
            *dst = ImagePoint::new(x / z, y / z);
            if dst.x < 2.0 || dst.y < 2.0 || dst.x > wf - 3.0 || dst.y > hf - 3.0 {
                ok = false;
            }
        }
        let quad = Quad::new(corners);
        if !ok || !quad.is_valid() {
            continue;
        }
        let page = Page::random(&mut rng, half_w, half_h, params.stroke_density);
        let image = render_page(&page, &m, w, h, &mut rng, params.clutter)?;
        return Ok(SynthSample {
            image,
            truth: GroundTruth { quad, horizontal_vp: vh, vertical_vp: vv },
            page_to_image: m,
            seed,
            params: *params,
        });
    }
    Err(Error::Degenerate(format!("no admissible distortion after {RETRIES} draws")))
}

fn render_page(page: &Page, m: &Mat3, w: usize, h: usize, rng: &mut ChaCha8Rng, clutter: usize) -> Result<GrayImage> {
    const SS: usize = 3;
    let inv = crate::rectify::invert(m).ok_or_else(|| Error::Degenerate("singular page map".into()))?;
    let base = rng.random_range(0.25..0.45);
    let (f1, f2) = (rng.random_range(0.02..0.08), rng.random_range(0.02..0.08));
    let (p1, p2) = (rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0);
    let mut img = GrayImage::from_fn(w, h, |x, y| {
        let mut acc = 0.0;
        for sy in 0..SS {
            for sx in 0..SS {
                let px = x as f64 + (sx as f64 + 0.5) / SS as f64 - 0.5;
                let py = y as f64 + (sy as f64 + 0.5) / SS as f64 - 0.5;
                let [u, v, z] = mat_vec(&inv, [px, py, 1.0]);
                let ink = if z > 0.0 { page.ink(u / z, v / z) } else { -1.0 };
                acc += if ink < 0.0 {
                    base + 0.06 * (f1 * px + p1).sin() * (f2 * py + p2).cos()
                } else {
                    PAGE + ink * (INK - PAGE)
                };
            }
        }
        acc / (SS * SS) as f64
    })?;
    add_clutter(&mut img, clutter, 1.0, rng);
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rectify::{homography_from_vps, quad_metrics, transform_quad};

    fn line_through(a: ImagePoint, b: ImagePoint) -> [f64; 3] {
        cross([a.x, a.y, 1.0], [b.x, b.y, 1.0])
    }

    #[test]
    fn bundle_is_deterministic_and_bounded() {
        let vp = HomogeneousPoint::new(30.0, -200.0, 1.0);
        let p = BundleParams { noise: 0.05, clutter: 3, ..Default::default() };
        let a = gen_line_bundle(vp, 64, 48, &p, 5).unwrap();
        let b = gen_line_bundle(vp, 64, 48, &p, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(a.max() > 0.9);
    }

    #[test]
    fn bundle_pixels_lie_near_lines_through_vp() {
        let vp = HomogeneousPoint::new(-300.0, 20.0, 1.0);
        let img = gen_line_bundle(vp, 50, 40, &BundleParams { n_lines: 2, ..Default::default() }, 0).unwrap();
        // Lines run left to right: every column has exactly two bright runs.
        for x in [0usize, 25, 49] {
            let bright: Vec<usize> = (0..40).filter(|&y| img.get(x, y) > 0.5).collect();
            assert!(!bright.is_empty() && bright.len() <= 4, "column {x}: {bright:?}");
        }
    }

    #[test]
    fn bundle_rejects_inside_vp() {
        let vp = HomogeneousPoint::new(10.0, 10.0, 1.0);
        assert!(matches!(gen_line_bundle(vp, 32, 32, &BundleParams::default(), 0), Err(Error::Regime(_))));
        assert!(gen_line_bundle(HomogeneousPoint::new(0.0, -90.0, 1.0), 32, 32, &BundleParams { n_lines: 1, ..Default::default() }, 0).is_err());
    }

    #[test]
    fn document_edges_meet_at_the_vps() {
        for seed in 0..10 {
            let s = gen_document(seed, 120, 160, &DocParams::default()).unwrap();
            let c = s.truth.quad.corners;
            let top = line_through(c[0], c[1]);
            let bottom = line_through(c[3], c[2]);
            let x = HomogeneousPoint::from_array(cross(top, bottom)).normalized();
            let vh = s.truth.horizontal_vp.normalized();
            let d = (x.hx - vh.hx).abs() + (x.hy - vh.hy).abs() + (x.hw - vh.hw).abs();
            let d2 = (x.hx + vh.hx).abs() + (x.hy + vh.hy).abs() + (x.hw + vh.hw).abs();
            assert!(d.min(d2) < 1e-9, "seed {seed}: {x:?} vs {vh:?}");
            assert!(!inside_image(&s.truth.horizontal_vp, 120.0, 160.0));
            assert!(!inside_image(&s.truth.vertical_vp, 120.0, 160.0));
        }
    }

    #[test]
    fn truth_rectifies_exactly() {
        for seed in 0..10 {
            let s = gen_document(seed, 120, 160, &DocParams::default()).unwrap();
            let h = homography_from_vps(s.truth.horizontal_vp, s.truth.vertical_vp, 120.0, 160.0).unwrap();
            let q = transform_quad(&s.truth.quad, &h).unwrap();
            let r = quad_metrics(&[q]).unwrap();
            assert!(r.d1 < 1e-6 && r.d2 < 1e-6, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn zero_distortion_is_fronto_parallel() {
        let s = gen_document(3, 100, 140, &DocParams { distortion: 0.0, ..Default::default() }).unwrap();
        assert_eq!(s.truth.horizontal_vp.hw, 0.0);
        assert_eq!(s.truth.vertical_vp.hw, 0.0);
        let r = quad_metrics(&[s.truth.quad]).unwrap();
        assert!(r.d1 < 1e-12 && r.d2 < 1e-12);
    }

    #[test]
    fn document_is_deterministic() {
        let a = gen_document(9, 80, 100, &DocParams::default()).unwrap();
        let b = gen_document(9, 80, 100, &DocParams::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.image.data().iter().any(|&v| v < 0.5) && a.image.data().iter().any(|&v| v > 0.85));
    }
}
