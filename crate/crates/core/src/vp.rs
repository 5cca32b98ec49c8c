//! Vanishing-point extraction from double-Hough maps.
//!
//! A [`DoubleHoughFrame`] ties a cell of the final map to a point of the
//! source image. It is built from the three coordinate chains of a network
//! (before, between and after the FHT layers) and the padded integration
//! lengths of both transforms, so the same code serves the classical
//! pipeline (empty chains) and trained networks.
//!
//! Raster conventions: in a joined map with `n` integration rows, raster
//! row `r` sits at continuous `alpha = r - 1` and raster column `c` at
//! `s = c - 1/4` (the floor in the joined layout averages to a quarter cell).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fht::HoughSpace;
use crate::geometry::{back_project, double_map_homogeneous, Branch, Dims, HomogeneousPoint, ImagePoint};
use crate::image::GrayImage;
use crate::nn::layers::{fht_layer_dims, fht_layer_forward, fht_padded_len};
use crate::nn::{Network, NetworkSpec, Tensor};

/// Relative `|hw|` threshold below which a VP is reported at infinity.
pub const INFINITY_REL: f64 = 1e-6;

/// Half-width of the square written by [`make_target`].
pub const TARGET_RADIUS: usize = 2;

const S_SHIFT: f64 = 0.25;

type Affine = ((f64, f64), (f64, f64));

const IDENTITY: Affine = ((1.0, 1.0), (0.0, 0.0));

/// Maps between cells of a double-Hough map and image points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleHoughFrame {
    pub branch: Branch,
    /// `(h, w)` of the image fed to the pipeline.
    pub src_dims: (usize, usize),
    /// Feature coordinate -> image coordinate, `(row, col)` per tuple.
    pub pre: Affine,
    /// `(h, w)` of the first FHT input.
    pub feat_dims: (usize, usize),
    pub n1: usize,
    /// Second FHT input coordinate -> first FHT output raster.
    pub mid: Affine,
    pub p2: usize,
    /// Final map cell -> second FHT output raster.
    pub post: Affine,
    /// `(rows, cols)` of the final map.
    pub out_dims: (usize, usize),
}

impl DoubleHoughFrame {
    /// Frame of the plain `H34(H12)` / `H34(H34)` pipeline on an `h x w` image.
    pub fn classical(branch: Branch, h: usize, w: usize) -> Self {
        let first = branch.first_space();
        let n1 = fht_padded_len(first, h, w);
        let (r1, c1) = fht_layer_dims(first, h, w);
        let p2 = fht_padded_len(HoughSpace::H34, r1, c1);
        let out_dims = fht_layer_dims(HoughSpace::H34, r1, c1);
        Self {
            branch,
            src_dims: (h, w),
            pre: IDENTITY,
            feat_dims: (h, w),
            n1,
            mid: IDENTITY,
            p2,
            post: IDENTITY,
            out_dims,
        }
    }

    /// Frame of a network branch applied to a single-channel `h x w` input.
    pub fn for_network(spec: &NetworkSpec, h: usize, w: usize) -> Result<Self> {
        let shapes = spec.shape_trace((1, h, w))?;
        let [(fh, fw, n1), (_, _, p2)] = spec.fht_inputs((1, h, w))?;
        let (pre, mid, post) = spec.chains()?;
        let last = shapes[shapes.len() - 1];
        Ok(Self {
            branch: spec.branch,
            src_dims: (h, w),
            pre: pre.affine(),
            feat_dims: (fh, fw),
            n1,
            mid: mid.affine(),
            p2,
            post: post.affine(),
            out_dims: (last.1, last.2),
        })
    }

    fn stage1_dims(&self) -> Dims {
        let ext = (self.n1 - 1) as f64;
        match self.branch {
            Branch::Vertical => Dims::new(self.feat_dims.1 as f64, ext),
            Branch::Horizontal => Dims::new(ext, self.feat_dims.0 as f64),
        }
    }

    fn w2(&self) -> f64 {
        (self.p2 - 1) as f64
    }

    /// Image point of a (possibly fractional) final-map cell `(row, col)`.
    pub fn cell_to_vp(&self, row: f64, col: f64) -> HomogeneousPoint {
        let ((prs, pcs), (pro, pco)) = self.post;
        let r2 = pro + prs * row;
        let c2 = pco + pcs * col;
        let a2 = r2 - 1.0;
        let s2 = c2 - S_SHIFT;
        let k = a2 / self.w2() - 1.0;
        let q = s2 - a2 / 2.0;

        // Stage-1 points on the stage-2 line satisfy s = A + B alpha with
        // B = su / (sv k); everything is kept multiplied through by k.
        let ((sv, su), (mro, mco)) = self.mid;
        let oy = mro - 1.0;
        let ox = mco - S_SHIFT;
        let dims = self.stage1_dims();
        let wh = dims.w + dims.h;
        let alpha = wh * (su + sv * k) / su;
        let s = -ox * sv * k / su + oy + sv * q + alpha / 2.0;
        let feat = back_project(s, alpha, self.branch, dims);

        let ((ys, xs), (yo, xo)) = self.pre;
        feat.map_affine((xs, ys), (xo, yo))
    }

    /// Continuous final-map cell `(row, col)` of an image point.
    pub fn vp_to_cell(&self, p: HomogeneousPoint) -> Result<(f64, f64)> {
        if !p.is_valid() {
            return Err(Error::InvalidArgument("vanishing point is not a valid homogeneous point".into()));
        }
        let ((ys, xs), (yo, xo)) = self.pre;
        let feat = HomogeneousPoint::new((p.hx - xo * p.hw) / xs, (p.hy - yo * p.hw) / ys, p.hw);
        let dims = self.stage1_dims();
        let hc = double_map_homogeneous(feat, self.branch, dims)
            .map_err(|e| Error::UnrepresentableTarget(format!("{e}")))?;
        let wh = dims.w + dims.h;
        let inv_b = hc.alpha / wh - 1.0;
        let minus_a_over_b = hc.s - hc.alpha / 2.0;

        let ((sv, su), (mro, mco)) = self.mid;
        let oy = mro - 1.0;
        let ox = mco - S_SHIFT;
        let k = su * inv_b / sv;
        let q = (ox * inv_b + minus_a_over_b - oy) / sv;
        let a2 = self.w2() * (k + 1.0);
        let s2 = q + a2 / 2.0;

        let ((prs, pcs), (pro, pco)) = self.post;
        let row = (a2 + 1.0 - pro) / prs;
        let col = (s2 + S_SHIFT - pco) / pcs;
        if !row.is_finite() || !col.is_finite() {
            return Err(Error::UnrepresentableTarget("non-finite map coordinate".into()));
        }
        Ok((row, col))
    }
}

/// Row-major argmax of a `rows x cols` map. Ties go to the smallest row,
/// then the smallest column; NaN entries are skipped.
pub fn extract_peak(data: &[f64], rows: usize, cols: usize) -> Result<(usize, usize)> {
    if data.len() != rows * cols || data.is_empty() {
        return Err(Error::Shape { expected: format!("{rows}x{cols}"), actual: format!("{} values", data.len()) });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in data.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    let (i, _) = best.ok_or_else(|| Error::InvalidMap("map contains only NaN".into()))?;
    Ok((i / cols, i % cols))
}

/// Sub-cell peak position: centroid of the cells tied with the maximum
/// (relative tolerance `1e-9`) that are reachable from `peak` in steps of
/// at most two cells. Dyadic lines of neighbouring slopes often sum exactly
/// the same pixels, which leaves a plateau rather than a single maximum.
pub fn refine_peak(data: &[f64], rows: usize, cols: usize, peak: (usize, usize)) -> (f64, f64) {
    const REACH: usize = 2;
    const MAX_CELLS: usize = 64;
    let top = data[peak.0 * cols + peak.1];
    let tol = 1e-9 * top.abs();
    let mut seen = vec![peak];
    let mut i = 0;
    while i < seen.len() && seen.len() < MAX_CELLS {
        let (r, c) = seen[i];
        for y in r.saturating_sub(REACH)..(r + REACH + 1).min(rows) {
            for x in c.saturating_sub(REACH)..(c + REACH + 1).min(cols) {
                if top - data[y * cols + x] <= tol && !seen.contains(&(y, x)) {
                    seen.push((y, x));
                }
            }
        }
        i += 1;
    }
    let n = seen.len() as f64;
    let (sr, sc) = seen.iter().fold((0.0, 0.0), |a, &(r, c)| (a.0 + r as f64, a.1 + c as f64));
    (sr / n, sc / n)
}

/// [`extract_peak`] on the single channel of a network output.
pub fn extract_peak_tensor(t: &Tensor) -> Result<(usize, usize)> {
    if t.c != 1 {
        return Err(Error::Shape { expected: "1 channel".into(), actual: format!("{}", t.c) });
    }
    extract_peak(&t.data, t.h, t.w)
}

/// Training target: ones on a `5 x 5` square (clipped at the border) around the VP cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMap {
    pub map: Tensor,
    pub center: (usize, usize),
}

pub fn make_target(frame: &DoubleHoughFrame, vp: HomogeneousPoint) -> Result<TargetMap> {
    let (rows, cols) = frame.out_dims;
    let (r, c) = frame.vp_to_cell(vp)?;
    let (r, c) = (r.round(), c.round());
    if r < 0.0 || c < 0.0 || r >= rows as f64 || c >= cols as f64 {
        return Err(Error::UnrepresentableTarget(format!("cell ({r}, {c}) outside {rows}x{cols} map")));
    }
    let (r, c) = (r as usize, c as usize);
    let mut map = Tensor::zeros(1, rows, cols);
    for y in r.saturating_sub(TARGET_RADIUS)..(r + TARGET_RADIUS + 1).min(rows) {
        for x in c.saturating_sub(TARGET_RADIUS)..(c + TARGET_RADIUS + 1).min(cols) {
            map.data[y * cols + x] = 1.0;
        }
    }
    Ok(TargetMap { map, center: (r, c) })
}

/// One branch's estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchEstimate {
    pub vp: HomogeneousPoint,
    pub peak: (usize, usize),
    /// Plateau-refined cell the VP was read from.
    pub cell: (f64, f64),
    pub peak_value: f64,
    pub at_infinity: bool,
    /// The VP lies inside the image; the double-Hough parametrization is
    /// poorly conditioned there.
    pub inside_image: bool,
}

impl BranchEstimate {
    fn from_map(frame: &DoubleHoughFrame, map: &Tensor) -> Result<Self> {
        let peak = extract_peak_tensor(map)?;
        let peak_value = map.data[peak.0 * map.w + peak.1];
        let cell = refine_peak(&map.data, map.h, map.w, peak);
        let vp = frame.cell_to_vp(cell.0, cell.1);
        let (h, w) = frame.src_dims;
        let inside_image = vp
            .to_point()
            .is_some_and(|p| p.x >= 0.0 && p.y >= 0.0 && p.x <= w as f64 && p.y <= h as f64);
        Ok(Self { vp, peak, cell, peak_value, at_infinity: vp.is_at_infinity(INFINITY_REL), inside_image })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanishingPair {
    pub width: usize,
    pub height: usize,
    pub horizontal: BranchEstimate,
    pub vertical: BranchEstimate,
}

/// Undirected angle in degrees between the directions from the image center
/// to two VPs.
pub fn angular_error_deg(est: &HomogeneousPoint, truth: &HomogeneousPoint, width: f64, height: f64) -> f64 {
    est.angle_from(truth, ImagePoint::new(width / 2.0, height / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassicalParams {
    /// Gradient magnitudes at or below this quantile are discarded.
    pub percentile: f64,
    pub edges: EdgeMode,
    /// Exponent applied to the normalized first-stage map.
    pub power: f64,
}

impl Default for ClassicalParams {
    fn default() -> Self {
        Self { percentile: 0.9, power: 2.0, edges: EdgeMode::Magnitude }
    }
}

impl ClassicalParams {
    /// Settings for text pages. Text lines put strong horizontal edges into
    /// the vertical branch's input and flatten its first-stage peaks;
    /// per-branch gradients and a sharper power keep the two apart.
    pub fn documents() -> Self {
        Self { percentile: 0.9, power: 4.0, edges: EdgeMode::Oriented }
    }
}

/// Gradient used for the edge map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Full gradient magnitude for both branches.
    Magnitude,
    /// Only the gradient component across the branch's lines: `|gx|` for
    /// near-vertical lines, `|gy|` for near-horizontal ones.
    Oriented,
}

/// Central-difference gradient magnitude, zero on the border, thresholded at a quantile.
pub fn edge_map(img: &GrayImage, percentile: f64) -> Result<GrayImage> {
    edge_map_with(img, percentile, |gx, gy| gx.hypot(gy))
}

fn edge_map_with(img: &GrayImage, percentile: f64, f: impl Fn(f64, f64) -> f64) -> Result<GrayImage> {
    if !(0.0..=1.0).contains(&percentile) {
        return Err(Error::InvalidArgument(format!("percentile {percentile} outside [0, 1]")));
    }
    let (w, h) = (img.width(), img.height());
    let mut mag = GrayImage::new(w, h)?;
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let gx = 0.5 * (img.get(x + 1, y) - img.get(x - 1, y));
            let gy = 0.5 * (img.get(x, y + 1) - img.get(x, y - 1));
            mag.set(x, y, f(gx, gy));
        }
    }
    let mut sorted = mag.data().to_vec();
    sorted.sort_by(f64::total_cmp);
    let thr = sorted[((sorted.len() - 1) as f64 * percentile).floor() as usize];
    for v in mag.data_mut() {
        if *v <= thr {
            *v = 0.0;
        }
    }
    Ok(mag)
}

/// Double-Hough map of the classical pipeline for one branch.
pub fn classical_map(img: &GrayImage, branch: Branch, params: &ClassicalParams) -> Result<(Tensor, DoubleHoughFrame)> {
    let edges = match (params.edges, branch) {
        (EdgeMode::Magnitude, _) => edge_map(img, params.percentile)?,
        (EdgeMode::Oriented, Branch::Vertical) => edge_map_with(img, params.percentile, |gx, _| gx.abs())?,
        (EdgeMode::Oriented, Branch::Horizontal) => edge_map_with(img, params.percentile, |_, gy| gy.abs())?,
    };
    if edges.max() <= 0.0 {
        return Err(Error::NoStructure("edge map is empty".into()));
    }
    let mut first = fht_layer_forward(&Tensor::from_image(&edges), branch.first_space())?;
    let peak = first.data.iter().cloned().fold(0.0, f64::max);
    for v in first.data.iter_mut() {
        *v = (*v / peak).powf(params.power);
    }
    let second = fht_layer_forward(&first, HoughSpace::H34)?;
    Ok((second, DoubleHoughFrame::classical(branch, img.height(), img.width())))
}

pub fn classical_detect_branch(img: &GrayImage, branch: Branch, params: &ClassicalParams) -> Result<BranchEstimate> {
    let (map, frame) = classical_map(img, branch, params)?;
    BranchEstimate::from_map(&frame, &map)
}

/// Classical detector: both VPs of a grayscale image.
pub fn classical_detect(img: &GrayImage, params: &ClassicalParams) -> Result<VanishingPair> {
    Ok(VanishingPair {
        width: img.width(),
        height: img.height(),
        horizontal: classical_detect_branch(img, Branch::Horizontal, params)?,
        vertical: classical_detect_branch(img, Branch::Vertical, params)?,
    })
}

/// VP estimate of one trained branch.
pub fn network_detect_branch(net: &Network, img: &GrayImage) -> Result<BranchEstimate> {
    let frame = DoubleHoughFrame::for_network(&net.spec, img.height(), img.width())?;
    let out = net.forward(&Tensor::from_image(img))?;
    if !out.is_finite() {
        return Err(Error::InvalidMap("network output is not finite".into()));
    }
    BranchEstimate::from_map(&frame, &out)
}

pub fn network_detect(horizontal: &Network, vertical: &Network, img: &GrayImage) -> Result<VanishingPair> {
    if horizontal.spec.branch != Branch::Horizontal || vertical.spec.branch != Branch::Vertical {
        return Err(Error::InvalidArgument("networks passed for the wrong branches".into()));
    }
    Ok(VanishingPair {
        width: img.width(),
        height: img.height(),
        horizontal: network_detect_branch(horizontal, img)?,
        vertical: network_detect_branch(vertical, img)?,
    })
}
