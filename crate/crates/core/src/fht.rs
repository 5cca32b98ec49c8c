//! Dyadic fast Hough transform.
//!
//! The transform sums image values along *dyadic lines*: discrete lines of
//! height `n = 2^k` whose horizontal offsets are built by halving the total
//! shift recursively (see [`dyadic_pattern`]). The butterfly evaluates all
//! `n` shifts for every start position in `O(n * m * log n)`.
//!
//! Quadrant maps are indexed `(t, j)` with `t` the total shift across the
//! integration axis and `j` a column index encoding the line start. Every line
//! that touches the image is represented, including those entering from a
//! side, so each pixel is visited by exactly one line per shift:
//!
//! | quadrant | line                          | column `j` for start |
//! |----------|-------------------------------|----------------------|
//! | `H1`     | `(x0, 0) - (x0 + t, n - 1)`   | `x0 + n - 1`         |
//! | `H2`     | `(x0, 0) - (x0 - t, n - 1)`   | `x0`                 |
//! | `H3`     | `(0, y0) - (n - 1, y0 - t)`   | `y0`                 |
//! | `H4`     | `(0, y0) - (n - 1, y0 + t)`   | `y0 + n - 1`         |
//!
//! The joined maps stack two quadrants over `2n` rows `alpha` and place each
//! line at column `s = start + d(alpha)` with the integer skew
//! `d_v = floor(n - alpha / 2)` (`H12`) or `d_h = floor(alpha / 2)` (`H34`).
//! Row `alpha = 0` would need shift `n` and stays empty.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Which of the two joined Hough maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HoughSpace {
    /// Mostly vertical lines; integration along image rows (y).
    H12,
    /// Mostly horizontal lines; integration along image columns (x).
    H34,
}

impl HoughSpace {
    /// `(alpha_size, s_size)` of the joined map for a source of `w x h`.
    pub fn output_dims(self, w: usize, h: usize) -> (usize, usize) {
        match self {
            HoughSpace::H12 => (2 * h, w + h),
            HoughSpace::H34 => (2 * w, h + w),
        }
    }

    /// Length of the axis the transform integrates over (`h` for H12, `w` for H34).
    pub fn integration_len(self, w: usize, h: usize) -> usize {
        match self {
            HoughSpace::H12 => h,
            HoughSpace::H34 => w,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HoughSpace::H12 => "H12",
            HoughSpace::H34 => "H34",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    H1,
    H2,
    H3,
    H4,
    H12,
    H34,
}

impl Quadrant {
    pub fn is_joined(self) -> bool {
        matches!(self, Quadrant::H12 | Quadrant::H34)
    }

    pub fn name(self) -> &'static str {
        match self {
            Quadrant::H1 => "H1",
            Quadrant::H2 => "H2",
            Quadrant::H3 => "H3",
            Quadrant::H4 => "H4",
            Quadrant::H12 => "H12",
            Quadrant::H34 => "H34",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().as_str() {
            "H1" => Quadrant::H1,
            "H2" => Quadrant::H2,
            "H3" => Quadrant::H3,
            "H4" => Quadrant::H4,
            "H12" => Quadrant::H12,
            "H34" => Quadrant::H34,
            _ => return None,
        })
    }

    fn integration_len(self, w: usize, h: usize) -> usize {
        match self {
            Quadrant::H1 | Quadrant::H2 | Quadrant::H12 => h,
            Quadrant::H3 | Quadrant::H4 | Quadrant::H34 => w,
        }
    }
}

impl From<HoughSpace> for Quadrant {
    fn from(s: HoughSpace) -> Self {
        match s {
            HoughSpace::H12 => Quadrant::H12,
            HoughSpace::H34 => Quadrant::H34,
        }
    }
}

/// Accumulator raster for one quadrant or a joined pair.
#[derive(Debug, Clone, PartialEq)]
pub struct HoughMap {
    pub quadrant: Quadrant,
    pub alpha_size: usize,
    pub s_size: usize,
    pub data: Vec<f64>,
    pub src_w: usize,
    pub src_h: usize,
}

impl HoughMap {
    #[inline]
    pub fn get(&self, alpha: usize, s: usize) -> f64 {
        self.data[alpha * self.s_size + s]
    }

    pub fn row(&self, alpha: usize) -> &[f64] {
        &self.data[alpha * self.s_size..(alpha + 1) * self.s_size]
    }

    /// Column holding the line that starts at `start` (x0 or y0) in a
    /// single-quadrant map, if that line touches the raster.
    pub fn start_to_column(&self, start: isize) -> Option<usize> {
        let n = self.quadrant.integration_len(self.src_w, self.src_h) as isize;
        let j = match self.quadrant {
            Quadrant::H1 | Quadrant::H4 => start + n - 1,
            Quadrant::H2 | Quadrant::H3 => start,
            Quadrant::H12 | Quadrant::H34 => return None,
        };
        (j >= 0 && (j as usize) < self.s_size).then_some(j as usize)
    }

    /// Value of the single-quadrant line with shift `t` and start `start`.
    pub fn quadrant_value(&self, t: usize, start: isize) -> f64 {
        self.start_to_column(start).map_or(0.0, |j| self.get(t, j))
    }

    /// The map as an image (`s` along x, `alpha` along y).
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_vec(self.s_size, self.alpha_size, self.data.clone())
            .expect("hough map dimensions are non-zero")
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Per-row horizontal offsets of a dyadic line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicPattern {
    offsets: Vec<usize>,
}

impl DyadicPattern {
    pub fn height(&self) -> usize {
        self.offsets.len()
    }

    pub fn shift(&self) -> usize {
        *self.offsets.last().expect("pattern is non-empty")
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}

/// Offsets of the dyadic line of height `n` and total shift `t`.
///
/// `pattern(1, 0) = [0]`, and `pattern(n, t)` is `p` followed by `p` shifted by
/// `t - t/2`, where `p = pattern(n/2, t/2)`.
pub fn dyadic_pattern(n: usize, t: usize) -> Result<DyadicPattern> {
    if !n.is_power_of_two() {
        return Err(Error::Dimension(format!("pattern height {n} is not a power of two")));
    }
    if t >= n {
        return Err(Error::InvalidArgument(format!("shift {t} outside [0, {n})")));
    }
    let mut offsets = Vec::with_capacity(n);
    build_pattern(n, t, 0, &mut offsets);
    Ok(DyadicPattern { offsets })
}

fn build_pattern(n: usize, t: usize, base: usize, out: &mut Vec<usize>) {
    if n == 1 {
        out.push(base);
        return;
    }
    let half = t / 2;
    build_pattern(n / 2, half, base, out);
    build_pattern(n / 2, half, base + t - half, out);
}

fn check_pow2(len: usize, what: &str) -> Result<()> {
    if len.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "integration axis ({what} = {len}) must be a power of two; pad the input first"
        )))
    }
}

/// Butterfly over `src` (`n` rows by `m` columns, `n` a power of two).
///
/// Returns `n` rows by `m + n - 1` columns with
/// `out[t][j] = sum_i src[i][j - (n - 1) + pattern(n, t)[i]]`, zero outside.
///
/// Levels are merged `r` at a time: output row `u * 2^r + e` of a merged
/// block only reads row `u` of each of its `2^r` sub-blocks, so each such
/// group of rows is carried through `r` levels in a small buffer that stays
/// in cache. The first level of a pass reads the stored rows directly and the
/// last one appends to the next stored array, so every array is written once
/// in order and never needs zeroing. After merging blocks of `p` rows only the
/// last `m + p - 1` columns can be non-zero; intermediate arrays keep just those.
fn dyadic_sum(src: &[f64], n: usize, m: usize) -> Vec<f64> {
    let width = m + n - 1;
    let pad = n - 1;
    let levels = n.trailing_zeros() as usize;
    if levels == 0 {
        return src.to_vec();
    }
    // First column that can be non-zero after merging blocks of `p` rows.
    let active = |p: usize| pad + 1 - p;
    let r_max = group_levels(width).max(2).min(levels);
    let mut g_cur = vec![0.0; (1 << r_max) * width];
    let mut g_next = vec![0.0; (1 << r_max) * width];
    let mut stored = Vec::new();
    let mut level = 0;
    while level < levels {
        let mut r = r_max.min(levels - level);
        if levels - level - r == 1 && r > 2 {
            r -= 1;
        }
        let sub = 1 << level;
        let group = 1 << r;
        let block = sub * group;
        let lo = active(sub);
        let hi = active(block);
        let rows: &[f64] = if level == 0 { src } else { &stored };
        let row = |i: usize| &rows[i * (width - lo)..(i + 1) * (width - lo)];
        let mut dst = Vec::with_capacity(n * (width - hi));
        for base in (0..n).step_by(block) {
            for u in 0..sub {
                let input = |k: usize| row(base + k * sub + u);
                if r == 1 {
                    for e in 0..2 {
                        merge_push(&mut dst, input(0), input(1), u + e - e / 2, hi, lo, width);
                    }
                    continue;
                }
                let start = active(sub << 1);
                for first in (0..group).step_by(2) {
                    for e in 0..2 {
                        let out = &mut g_cur[(first + e) * width..(first + e + 1) * width];
                        merge_rows(out, input(first), input(first + 1), u + e - e / 2, start, lo);
                    }
                }
                for l in 2..r {
                    let span = 1 << l;
                    let half_span = span / 2;
                    let valid = active(sub << (l - 1));
                    let start = active(sub << l);
                    for first in (0..group).step_by(span) {
                        for e in 0..span {
                            let shift = u * half_span + e - e / 2;
                            let a = &g_cur[(first + e / 2) * width + valid..(first + e / 2 + 1) * width];
                            let b = &g_cur[(first + half_span + e / 2) * width + valid..(first + half_span + e / 2 + 1) * width];
                            merge_rows(&mut g_next[(first + e) * width..(first + e + 1) * width], a, b, shift, start, valid);
                        }
                    }
                    std::mem::swap(&mut g_cur, &mut g_next);
                }
                let half_span = group / 2;
                let valid = active(sub << (r - 1));
                for e in 0..group {
                    let shift = u * half_span + e - e / 2;
                    let a = &g_cur[(e / 2) * width + valid..(e / 2 + 1) * width];
                    let b = &g_cur[(half_span + e / 2) * width + valid..(half_span + e / 2 + 1) * width];
                    merge_push(&mut dst, a, b, shift, hi, valid, width);
                }
            }
        }
        stored = dst;
        level += r;
    }
    stored
}

/// Levels merged per pass so that two group buffers take about 1 MiB.
fn group_levels(width: usize) -> usize {
    let rows = ((1usize << 20) / (16 * width)).max(2);
    rows.ilog2() as usize
}

/// `out[j] = a[j] + b[j + shift]` on `start..`, where `a` and `b` hold
/// columns `valid..` (index 0 is column `valid`) and are zero before it.
#[inline]
fn merge_rows(out: &mut [f64], a: &[f64], b: &[f64], shift: usize, start: usize, valid: usize) {
    let width = out.len();
    let b_lo = valid - shift;
    let b_hi = width.saturating_sub(shift).max(valid);
    out[start..b_lo].fill(0.0);
    out[b_lo..valid].copy_from_slice(&b[..shift]);
    for ((o, &x), &y) in out[valid..b_hi].iter_mut().zip(&a[..b_hi - valid]).zip(&b[shift..]) {
        *o = x + y;
    }
    out[b_hi..].copy_from_slice(&a[b_hi - valid..]);
}

/// Same sum as [`merge_rows`] for a row of `width` columns, appending
/// columns `start..width` to `dst`.
#[inline]
fn merge_push(dst: &mut Vec<f64>, a: &[f64], b: &[f64], shift: usize, start: usize, valid: usize, width: usize) {
    let b_lo = valid - shift;
    let b_hi = width.saturating_sub(shift).max(valid);
    dst.resize(dst.len() + (b_lo - start), 0.0);
    dst.extend_from_slice(&b[..shift]);
    dst.extend(a[..b_hi - valid].iter().zip(&b[shift..]).map(|(x, y)| x + y));
    dst.extend_from_slice(&a[b_hi - valid..]);
}

/// Transpose of [`dyadic_sum`]: maps an `n x (m + n - 1)` gradient back to `n x m`.
fn dyadic_sum_adjoint(grad: &[f64], n: usize, m: usize) -> Vec<f64> {
    let width = m + n - 1;
    let pad = n - 1;
    let mut cur = grad.to_vec();
    let mut next = vec![0.0; n * width];
    let mut strip = n / 2;
    while strip >= 1 {
        let pair = 2 * strip;
        next.iter_mut().for_each(|v| *v = 0.0);
        for block in 0..n / pair {
            let first = block * pair;
            let second = first + strip;
            for t in 0..pair {
                let half = t / 2;
                let shift = t - half;
                let g = &cur[(first + t) * width..(first + t + 1) * width];
                let split = width.saturating_sub(shift);
                {
                    let a = &mut next[(first + half) * width..(first + half + 1) * width];
                    for (o, &x) in a.iter_mut().zip(g) {
                        *o += x;
                    }
                }
                let b = &mut next[(second + half) * width..(second + half + 1) * width];
                for (o, &x) in b[shift..].iter_mut().zip(&g[..split]) {
                    *o += x;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        strip /= 2;
    }
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        out[i * m..(i + 1) * m].copy_from_slice(&cur[i * width + pad..(i + 1) * width]);
    }
    out
}

/// Rearranges the image so that the requested quadrant becomes a rightward
/// dyadic sum over rows. Returns `(src, n, m)`.
fn quadrant_source(data: &[f64], w: usize, h: usize, q: Quadrant) -> (Cow<'_, [f64]>, usize, usize) {
    match q {
        Quadrant::H1 => (Cow::Borrowed(data), h, w),
        Quadrant::H2 => {
            let mut src = vec![0.0; w * h];
            for y in 0..h {
                for x in 0..w {
                    src[y * w + x] = data[y * w + (w - 1 - x)];
                }
            }
            (Cow::Owned(src), h, w)
        }
        Quadrant::H4 => {
            let mut src = vec![0.0; w * h];
            for x in 0..w {
                for y in 0..h {
                    src[x * h + y] = data[y * w + x];
                }
            }
            (Cow::Owned(src), w, h)
        }
        Quadrant::H3 => {
            let mut src = vec![0.0; w * h];
            for x in 0..w {
                for k in 0..h {
                    src[x * h + k] = data[(h - 1 - k) * w + x];
                }
            }
            (Cow::Owned(src), w, h)
        }
        Quadrant::H12 | Quadrant::H34 => unreachable!("joined quadrants are assembled separately"),
    }
}

/// Inverse of [`quadrant_source`] (it is a permutation, so also its transpose).
fn quadrant_source_adjoint(src: &[f64], w: usize, h: usize, q: Quadrant) -> Vec<f64> {
    let mut data = vec![0.0; w * h];
    match q {
        Quadrant::H1 => data.copy_from_slice(src),
        Quadrant::H2 => {
            for y in 0..h {
                for x in 0..w {
                    data[y * w + (w - 1 - x)] = src[y * w + x];
                }
            }
        }
        Quadrant::H4 => {
            for x in 0..w {
                for y in 0..h {
                    data[y * w + x] = src[x * h + y];
                }
            }
        }
        Quadrant::H3 => {
            for x in 0..w {
                for k in 0..h {
                    data[(h - 1 - k) * w + x] = src[x * h + k];
                }
            }
        }
        Quadrant::H12 | Quadrant::H34 => unreachable!(),
    }
    data
}

/// Kernel output columns are reversed for the quadrants whose lines run
/// leftward/upward so the column index reads as in the module table.
fn reversed_columns(q: Quadrant) -> bool {
    matches!(q, Quadrant::H2 | Quadrant::H3)
}

fn reverse_columns(data: &mut [f64], cols: usize) {
    for row in data.chunks_mut(cols) {
        row.reverse();
    }
}

fn quadrant_raw(data: &[f64], w: usize, h: usize, q: Quadrant) -> Vec<f64> {
    let (src, n, m) = quadrant_source(data, w, h, q);
    let mut out = dyadic_sum(&src, n, m);
    if reversed_columns(q) {
        reverse_columns(&mut out, m + n - 1);
    }
    out
}

fn quadrant_raw_adjoint(grad: &[f64], w: usize, h: usize, q: Quadrant) -> Vec<f64> {
    let n = q.integration_len(w, h);
    let m = if n == h { w } else { h };
    let mut g = grad.to_vec();
    if reversed_columns(q) {
        reverse_columns(&mut g, m + n - 1);
    }
    let src = dyadic_sum_adjoint(&g, n, m);
    quadrant_source_adjoint(&src, w, h, q)
}

fn single_quadrant(q: Quadrant) -> Result<()> {
    if q.is_joined() {
        Err(Error::InvalidArgument(format!("{} is a joined map; use fht_join", q.name())))
    } else {
        Ok(())
    }
}

fn quadrant_map(img: &GrayImage, q: Quadrant, data: Vec<f64>) -> HoughMap {
    let (w, h) = (img.width(), img.height());
    let n = q.integration_len(w, h);
    let m = if n == h { w } else { h };
    HoughMap { quadrant: q, alpha_size: n, s_size: m + n - 1, data, src_w: w, src_h: h }
}

/// Fast Hough transform of one quadrant (`H1..H4`) via the butterfly.
pub fn fht_quadrant(img: &GrayImage, q: Quadrant) -> Result<HoughMap> {
    single_quadrant(q)?;
    let (w, h) = (img.width(), img.height());
    check_pow2(q.integration_len(w, h), if matches!(q, Quadrant::H1 | Quadrant::H2) { "height" } else { "width" })?;
    let data = quadrant_raw(img.data(), w, h, q);
    Ok(quadrant_map(img, q, data))
}

/// Direct `O(n^2 m)` evaluation of the same accumulator as [`fht_quadrant`].
pub fn brute_force_hough(img: &GrayImage, q: Quadrant) -> Result<HoughMap> {
    single_quadrant(q)?;
    let (w, h) = (img.width(), img.height());
    let n = q.integration_len(w, h);
    check_pow2(n, if n == h { "height" } else { "width" })?;
    let m = if matches!(q, Quadrant::H1 | Quadrant::H2) { w } else { h };
    let cols = m + n - 1;
    let mut data = vec![0.0; n * cols];
    for t in 0..n {
        let pattern = dyadic_pattern(n, t)?;
        for j in 0..cols {
            let mut acc = 0.0;
            for (i, &p) in pattern.offsets().iter().enumerate() {
                let p = p as isize;
                let i = i as isize;
                acc += match q {
                    Quadrant::H1 => img.get_or_zero(j as isize - (n as isize - 1) + p, i),
                    Quadrant::H2 => img.get_or_zero(j as isize - p, i),
                    Quadrant::H4 => img.get_or_zero(i, j as isize - (n as isize - 1) + p),
                    Quadrant::H3 => img.get_or_zero(i, j as isize - p),
                    Quadrant::H12 | Quadrant::H34 => unreachable!(),
                };
            }
            data[t * cols + j] = acc;
        }
    }
    Ok(quadrant_map(img, q, data))
}

/// Placement of joined row `alpha` as `(quadrant, shift, column offset)`:
/// quadrant column `j` lands at joined column `j + offset`.
fn join_rows(space: HoughSpace, n: usize) -> impl Iterator<Item = (usize, Quadrant, usize, isize)> {
    (1..2 * n).map(move |alpha| {
        let nn = n as isize;
        match space {
            HoughSpace::H12 => {
                let skew = ((2 * n - alpha) / 2) as isize;
                if alpha <= n {
                    (alpha, Quadrant::H1, n - alpha, skew - (nn - 1))
                } else {
                    (alpha, Quadrant::H2, alpha - n, skew)
                }
            }
            HoughSpace::H34 => {
                let skew = (alpha / 2) as isize;
                if alpha <= n {
                    (alpha, Quadrant::H3, n - alpha, skew)
                } else {
                    (alpha, Quadrant::H4, alpha - n, skew - (nn - 1))
                }
            }
        }
    })
}

/// Joined, skewed transform on a raw row-major buffer of `w x h`.
///
/// The integration axis must be a power of two. Output is
/// `alpha_size x s_size` as given by [`HoughSpace::output_dims`].
pub fn join_raw(data: &[f64], w: usize, h: usize, space: HoughSpace) -> Result<Vec<f64>> {
    let n = space.integration_len(w, h);
    check_pow2(n, if space == HoughSpace::H12 { "height" } else { "width" })?;
    let (first, second) = match space {
        HoughSpace::H12 => (Quadrant::H1, Quadrant::H2),
        HoughSpace::H34 => (Quadrant::H3, Quadrant::H4),
    };
    let qa = quadrant_raw(data, w, h, first);
    let qb = quadrant_raw(data, w, h, second);
    let (alpha_size, s_size) = space.output_dims(w, h);
    let qcols = s_size - 1;
    let mut out = vec![0.0; alpha_size * s_size];
    for (alpha, q, t, offset) in join_rows(space, n) {
        let src = if q == first { &qa } else { &qb };
        let src_row = &src[t * qcols..(t + 1) * qcols];
        let dst = &mut out[alpha * s_size..(alpha + 1) * s_size];
        place_row(src_row, dst, offset);
    }
    Ok(out)
}

/// Transpose of [`join_raw`].
pub fn join_adjoint_raw(grad: &[f64], w: usize, h: usize, space: HoughSpace) -> Result<Vec<f64>> {
    let n = space.integration_len(w, h);
    check_pow2(n, if space == HoughSpace::H12 { "height" } else { "width" })?;
    let (alpha_size, s_size) = space.output_dims(w, h);
    if grad.len() != alpha_size * s_size {
        return Err(Error::Shape {
            expected: format!("{alpha_size}x{s_size}"),
            actual: format!("{} values", grad.len()),
        });
    }
    let (first, second) = match space {
        HoughSpace::H12 => (Quadrant::H1, Quadrant::H2),
        HoughSpace::H34 => (Quadrant::H3, Quadrant::H4),
    };
    let qcols = s_size - 1;
    let mut ga = vec![0.0; n * qcols];
    let mut gb = vec![0.0; n * qcols];
    for (alpha, q, t, offset) in join_rows(space, n) {
        let dst = if q == first { &mut ga } else { &mut gb };
        let g_row = &grad[alpha * s_size..(alpha + 1) * s_size];
        gather_row(g_row, &mut dst[t * qcols..(t + 1) * qcols], offset);
    }
    let mut out = quadrant_raw_adjoint(&ga, w, h, first);
    for (o, v) in out.iter_mut().zip(quadrant_raw_adjoint(&gb, w, h, second)) {
        *o += v;
    }
    Ok(out)
}

fn place_row(src: &[f64], dst: &mut [f64], offset: isize) {
    for (j, &v) in src.iter().enumerate() {
        let c = j as isize + offset;
        if c >= 0 && (c as usize) < dst.len() {
            dst[c as usize] = v;
        }
    }
}

fn gather_row(g: &[f64], dst: &mut [f64], offset: isize) {
    for (j, d) in dst.iter_mut().enumerate() {
        let c = j as isize + offset;
        if c >= 0 && (c as usize) < g.len() {
            *d += g[c as usize];
        }
    }
}

/// Joined transform `H12` or `H34` with the skew placement described in the module docs.
pub fn fht_join(img: &GrayImage, space: HoughSpace) -> Result<HoughMap> {
    let (w, h) = (img.width(), img.height());
    let data = join_raw(img.data(), w, h, space)?;
    let (alpha_size, s_size) = space.output_dims(w, h);
    Ok(HoughMap { quadrant: space.into(), alpha_size, s_size, data, src_w: w, src_h: h })
}

/// Transpose of [`fht_join`]: scatters every accumulator back along its dyadic line.
pub fn fht_join_adjoint(map: &HoughMap) -> Result<GrayImage> {
    let space = match map.quadrant {
        Quadrant::H12 => HoughSpace::H12,
        Quadrant::H34 => HoughSpace::H34,
        q => return Err(Error::InvalidArgument(format!("{} is not a joined map", q.name()))),
    };
    let data = join_adjoint_raw(&map.data, map.src_w, map.src_h, space)?;
    GrayImage::from_vec(map.src_w, map.src_h, data)
}

/// Pads the integration axis of `img` with zeros up to the next power of two.
pub fn pad_for(img: &GrayImage, space: HoughSpace) -> Result<GrayImage> {
    let (w, h) = (img.width(), img.height());
    match space {
        HoughSpace::H12 => img.pad_to(w, h.next_power_of_two()),
        HoughSpace::H34 => img.pad_to(w.next_power_of_two(), h),
    }
}
