//! Closed-form coordinate algebra between the image, the joined Hough maps
//! and the double-Hough maps `H34(H12)` / `H34(H34)`.
//!
//! Everything here is continuous. A segment `(x0, 0) - (x1, h)` lands in
//! `H12` at `alpha = h - (x1 - x0)`, `s = x0 + d_v(alpha)`; a segment
//! `(0, y0) - (w, y1)` lands in `H34` at `alpha = w - (y0 - y1)`,
//! `s = y0 + d_h(alpha)`, with `d_v = h - alpha / 2` and `d_h = alpha / 2`.
//! Applying `H34` to either joined map (of width `w + h`) turns a pencil of
//! image lines through a point into a single point `(s', alpha')`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fht::HoughSpace;

/// Continuous dimensions of the source image as seen by the algebra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub w: f64,
    pub h: f64,
}

impl Dims {
    pub fn new(w: f64, h: f64) -> Self {
        Self { w, h }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub x: f64,
    pub y: f64,
}

impl ImagePoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Point of the projective plane; `hw == 0` is a point at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousPoint {
    pub hx: f64,
    pub hy: f64,
    pub hw: f64,
}

impl HomogeneousPoint {
    pub fn new(hx: f64, hy: f64, hw: f64) -> Self {
        Self { hx, hy, hw }
    }

    pub fn from_point(p: ImagePoint) -> Self {
        Self { hx: p.x, hy: p.y, hw: 1.0 }
    }

    /// Point at infinity in direction `(dx, dy)`.
    pub fn direction(dx: f64, dy: f64) -> Self {
        Self { hx: dx, hy: dy, hw: 0.0 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.hx, self.hy, self.hw]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self { hx: a[0], hy: a[1], hw: a[2] }
    }

    pub fn is_valid(&self) -> bool {
        self.hx.is_finite()
            && self.hy.is_finite()
            && self.hw.is_finite()
            && (self.hx != 0.0 || self.hy != 0.0 || self.hw != 0.0)
    }

    /// Euclidean point, or `None` exactly when `hw == 0`.
    pub fn to_point(&self) -> Option<ImagePoint> {
        (self.hw != 0.0).then(|| ImagePoint::new(self.hx / self.hw, self.hy / self.hw))
    }

    /// Numerical at-infinity test: `|hw| < rel * max(|hx|, |hy|)`.
    pub fn is_at_infinity(&self, rel: f64) -> bool {
        self.hw.abs() < rel * self.hx.abs().max(self.hy.abs())
    }

    /// Scaled to unit Euclidean norm with a non-negative last non-zero entry.
    pub fn normalized(&self) -> Self {
        let n = (self.hx * self.hx + self.hy * self.hy + self.hw * self.hw).sqrt();
        let sign = if self.hw < 0.0 || (self.hw == 0.0 && (self.hy < 0.0 || (self.hy == 0.0 && self.hx < 0.0))) {
            -1.0
        } else {
            1.0
        };
        Self { hx: sign * self.hx / n, hy: sign * self.hy / n, hw: sign * self.hw / n }
    }

    /// Direction from `center` towards this point, up to sign for points at infinity.
    pub fn direction_from(&self, center: ImagePoint) -> (f64, f64) {
        (self.hx - center.x * self.hw, self.hy - center.y * self.hw)
    }

    /// Undirected angle in degrees between the lines joining `center` to `self` and to `other`.
    pub fn angle_from(&self, other: &HomogeneousPoint, center: ImagePoint) -> f64 {
        let (ax, ay) = self.direction_from(center);
        let (bx, by) = other.direction_from(center);
        if (ax == 0.0 && ay == 0.0) || (bx == 0.0 && by == 0.0) {
            return 90.0;
        }
        (ax * by - ay * bx).abs().atan2((ax * bx + ay * by).abs()).to_degrees()
    }

    /// Affine change of coordinates `p -> offset + scale * p` per axis.
    pub fn map_affine(&self, scale: (f64, f64), offset: (f64, f64)) -> Self {
        Self {
            hx: scale.0 * self.hx + offset.0 * self.hw,
            hy: scale.1 * self.hy + offset.1 * self.hw,
            hw: self.hw,
        }
    }
}

/// Line segment spanning the image between opposite borders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BorderSegment {
    /// `(x0, 0) - (x1, h)`.
    Vertical { x0: f64, x1: f64 },
    /// `(0, y0) - (w, y1)`.
    Horizontal { y0: f64, y1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughCoord {
    pub s: f64,
    pub alpha: f64,
    pub space: HoughSpace,
    pub dims: Dims,
}

/// Which vanishing point a detector branch looks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Vertical vanishing point (mostly vertical lines), `H34(H12)`.
    Vertical,
    /// Horizontal vanishing point (mostly horizontal lines), `H34(H34)`.
    Horizontal,
}

impl Branch {
    /// Space of the first transform.
    pub fn first_space(self) -> HoughSpace {
        match self {
            Branch::Vertical => HoughSpace::H12,
            Branch::Horizontal => HoughSpace::H34,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::Vertical => "vertical",
            Branch::Horizontal => "horizontal",
        }
    }
}

pub fn skew_v(alpha: f64, h: f64) -> f64 {
    h - alpha / 2.0
}

pub fn skew_h(alpha: f64, _w: f64) -> f64 {
    alpha / 2.0
}

/// Hough point of a border-to-border segment.
pub fn seg_to_point(seg: BorderSegment, dims: Dims) -> Result<HoughCoord> {
    match seg {
        BorderSegment::Vertical { x0, x1 } => {
            if (x1 - x0).abs() > dims.h {
                return Err(Error::OutOfQuadrant(format!(
                    "|x1 - x0| = {} exceeds h = {}",
                    (x1 - x0).abs(),
                    dims.h
                )));
            }
            let alpha = dims.h - (x1 - x0);
            Ok(HoughCoord { s: x0 + skew_v(alpha, dims.h), alpha, space: HoughSpace::H12, dims })
        }
        BorderSegment::Horizontal { y0, y1 } => {
            if (y1 - y0).abs() > dims.w {
                return Err(Error::OutOfQuadrant(format!(
                    "|y1 - y0| = {} exceeds w = {}",
                    (y1 - y0).abs(),
                    dims.w
                )));
            }
            let alpha = dims.w - (y0 - y1);
            Ok(HoughCoord { s: y0 + skew_h(alpha, dims.w), alpha, space: HoughSpace::H34, dims })
        }
    }
}

/// Straight line `s(alpha) = intercept + slope * alpha` in a joined Hough map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughLine {
    pub intercept: f64,
    pub slope: f64,
    pub space: HoughSpace,
}

impl HoughLine {
    pub fn s_at(&self, alpha: f64) -> f64 {
        self.intercept + self.slope * alpha
    }

    /// Intersection with another line of the same space, as `(s, alpha)`.
    pub fn intersect(&self, other: &HoughLine) -> Option<(f64, f64)> {
        let ds = self.slope - other.slope;
        if ds == 0.0 {
            return None;
        }
        let alpha = (other.intercept - self.intercept) / ds;
        Some((self.s_at(alpha), alpha))
    }
}

/// The Hough-map line traced by all image lines through `p`.
pub fn point_to_line(p: ImagePoint, space: HoughSpace, dims: Dims) -> HoughLine {
    match space {
        // s = x + (alpha - h) y / h + h - alpha / 2
        HoughSpace::H12 => HoughLine {
            intercept: p.x - p.y + dims.h,
            slope: p.y / dims.h - 0.5,
            space,
        },
        // s = y - (alpha - w) x / w + alpha / 2
        HoughSpace::H34 => HoughLine {
            intercept: p.y + p.x,
            slope: 0.5 - p.x / dims.w,
            space,
        },
    }
}

/// Image point to its double-Hough location (`H34(H12)` or `H34(H34)`).
pub fn double_map(p: ImagePoint, branch: Branch, dims: Dims) -> Result<HoughCoord> {
    double_map_homogeneous(HomogeneousPoint::from_point(p), branch, dims)
}

/// [`double_map`] for homogeneous input, so points at infinity map to `alpha' = w + h`.
pub fn double_map_homogeneous(p: HomogeneousPoint, branch: Branch, dims: Dims) -> Result<HoughCoord> {
    let Dims { w, h } = dims;
    let wh = w + h;
    let (hx, hy, hw) = (p.hx, p.hy, p.hw);
    let (s, alpha) = match branch {
        Branch::Vertical => {
            let den = 2.0 * hy - h * hw;
            if den == 0.0 {
                return Err(Error::Singular("2y = h".into()));
            }
            let alpha = wh * (2.0 * hy + h * hw) / den;
            let s = 1.5 * h + (4.0 * h * hx - w * (2.0 * hy + h * hw)) / (-2.0 * den);
            (s, alpha)
        }
        Branch::Horizontal => {
            let den = 2.0 * hx - w * hw;
            if den == 0.0 {
                return Err(Error::Singular("2x = w".into()));
            }
            let alpha = wh * (2.0 * hx - 3.0 * w * hw) / den;
            let s = 1.5 * w + (4.0 * w * hy + h * (2.0 * hx - 3.0 * w * hw)) / (2.0 * den);
            (s, alpha)
        }
    };
    Ok(HoughCoord { s, alpha, space: HoughSpace::H34, dims })
}

/// Double-Hough location back to the image; `alpha' = w + h` gives a point at infinity.
pub fn back_project(s: f64, alpha: f64, branch: Branch, dims: Dims) -> HomogeneousPoint {
    let Dims { w, h } = dims;
    let wh = w + h;
    let den = 2.0 * (alpha - wh);
    match branch {
        Branch::Vertical => HomogeneousPoint {
            hx: alpha * w + (3.0 * h - 2.0 * s) * wh,
            hy: h * (alpha + wh),
            hw: den,
        },
        Branch::Horizontal => HomogeneousPoint {
            hx: w * (alpha - 3.0 * wh),
            hy: alpha * h + (3.0 * w - 2.0 * s) * wh,
            hw: den,
        },
    }
}

/// [`back_project`] taking a [`HoughCoord`].
pub fn back_project_coord(hc: &HoughCoord, branch: Branch) -> HomogeneousPoint {
    back_project(hc.s, hc.alpha, branch, hc.dims)
}

/// One valid-padding convolution seen as an index map `i -> i * stride + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisStep {
    pub stride: (usize, usize),
    pub offset: (f64, f64),
}

impl AxisStep {
    pub fn conv(kernel: (usize, usize), stride: (usize, usize)) -> Self {
        Self {
            stride,
            offset: ((kernel.0 as f64 - 1.0) / 2.0, (kernel.1 as f64 - 1.0) / 2.0),
        }
    }
}

/// Composition of per-layer index maps, in forward layer order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoordChain {
    pub steps: Vec<AxisStep>,
}

impl CoordChain {
    pub fn new(steps: Vec<AxisStep>) -> Self {
        Self { steps }
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Collapsed `(scale, offset)` per axis: `input = offset + scale * output`.
    pub fn affine(&self) -> ((f64, f64), (f64, f64)) {
        let mut scale = (1.0, 1.0);
        let mut offset = (0.0, 0.0);
        for step in self.steps.iter().rev() {
            offset = (offset.0 * step.stride.0 as f64 + step.offset.0, offset.1 * step.stride.1 as f64 + step.offset.1);
            scale = (scale.0 * step.stride.0 as f64, scale.1 * step.stride.1 as f64);
        }
        (scale, offset)
    }

    /// Inverse of [`chain_map`]: continuous output index of an input coordinate.
    pub fn inverse(&self, input: (f64, f64)) -> (f64, f64) {
        let (scale, offset) = self.affine();
        ((input.0 - offset.0) / scale.0, (input.1 - offset.1) / scale.1)
    }
}

/// Output-grid `(row, col)` to the continuous input coordinate of its receptive-field center.
pub fn chain_map(chain: &CoordChain, out_index: (f64, f64)) -> (f64, f64) {
    let mut c = out_index;
    for step in chain.steps.iter().rev() {
        c = (c.0 * step.stride.0 as f64 + step.offset.0, c.1 * step.stride.1 as f64 + step.offset.1);
    }
    c
}
