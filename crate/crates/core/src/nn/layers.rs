use crate::error::{Error, Result};
use crate::fht::{join_adjoint_raw, join_raw, HoughSpace};
use crate::nn::net::ConvSpec;
use crate::nn::tensor::Tensor;

fn conv_out_dims(x: &Tensor, spec: &ConvSpec) -> Result<(usize, usize)> {
    let (kh, kw) = spec.kernel;
    let (sh, sw) = spec.stride;
    if x.c != spec.in_channels {
        return Err(Error::Shape {
            expected: format!("{} input channels", spec.in_channels),
            actual: format!("{} channels", x.c),
        });
    }
    if x.h < kh || x.w < kw {
        return Err(Error::Shape {
            expected: format!("spatial dims >= {kh}x{kw}"),
            actual: format!("{}x{}", x.h, x.w),
        });
    }
    Ok(((x.h - kh) / sh + 1, (x.w - kw) / sw + 1))
}

fn check_weights(weights: &[f64], spec: &ConvSpec) -> Result<()> {
    if weights.len() != spec.param_count() {
        return Err(Error::Shape {
            expected: format!("{} weights", spec.param_count()),
            actual: format!("{}", weights.len()),
        });
    }
    Ok(())
}

/// Valid cross-correlation without bias. Weights are laid out `[filter][channel][ky][kx]`.
pub fn conv_forward(x: &Tensor, weights: &[f64], spec: &ConvSpec) -> Result<Tensor> {
    check_weights(weights, spec)?;
    let (ho, wo) = conv_out_dims(x, spec)?;
    let (kh, kw) = spec.kernel;
    let (sh, sw) = spec.stride;
    let mut out = Tensor::zeros(spec.filters, ho, wo);
    for f in 0..spec.filters {
        let out_f = &mut out.data[f * ho * wo..(f + 1) * ho * wo];
        for c in 0..x.c {
            let xc = x.channel(c);
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = weights[((f * x.c + c) * kh + ky) * kw + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for oy in 0..ho {
                        let row = &xc[(oy * sh + ky) * x.w + kx..];
                        let orow = &mut out_f[oy * wo..(oy + 1) * wo];
                        if sw == 1 {
                            for (o, &v) in orow.iter_mut().zip(&row[..wo]) {
                                *o += wv * v;
                            }
                        } else {
                            for (ox, o) in orow.iter_mut().enumerate() {
                                *o += wv * row[ox * sw];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv_forward`] with respect to its input and weights.
pub fn conv_backward(grad_out: &Tensor, x: &Tensor, weights: &[f64], spec: &ConvSpec) -> Result<(Tensor, Vec<f64>)> {
    check_weights(weights, spec)?;
    let (ho, wo) = conv_out_dims(x, spec)?;
    if grad_out.shape() != (spec.filters, ho, wo) {
        return Err(Error::Shape {
            expected: format!("{:?}", (spec.filters, ho, wo)),
            actual: format!("{:?}", grad_out.shape()),
        });
    }
    let (kh, kw) = spec.kernel;
    let (sh, sw) = spec.stride;
    let mut grad_x = Tensor::zeros(x.c, x.h, x.w);
    let mut grad_w = vec![0.0; weights.len()];
    let xw = x.w;
    for f in 0..spec.filters {
        let g_f = grad_out.channel(f);
        for c in 0..x.c {
            let xc = x.channel(c);
            let gx = grad_x.channel_mut(c);
            for ky in 0..kh {
                for kx in 0..kw {
                    let idx = ((f * x.c + c) * kh + ky) * kw + kx;
                    let wv = weights[idx];
                    let mut acc = 0.0;
                    for oy in 0..ho {
                        let base = (oy * sh + ky) * xw + kx;
                        let grow = &g_f[oy * wo..(oy + 1) * wo];
                        if sw == 1 {
                            let xrow = &xc[base..base + wo];
                            for (&g, &v) in grow.iter().zip(xrow) {
                                acc += g * v;
                            }
                            for (d, &g) in gx[base..base + wo].iter_mut().zip(grow) {
                                *d += wv * g;
                            }
                        } else {
                            for (ox, &g) in grow.iter().enumerate() {
                                acc += g * xc[base + ox * sw];
                                gx[base + ox * sw] += wv * g;
                            }
                        }
                    }
                    grad_w[idx] = acc;
                }
            }
        }
    }
    Ok((grad_x, grad_w))
}

pub fn relu_forward(x: &Tensor) -> Tensor {
    Tensor { data: x.data.iter().map(|&v| v.max(0.0)).collect(), ..*x }
}

pub fn relu_backward(grad_out: &Tensor, x: &Tensor) -> Tensor {
    Tensor {
        data: grad_out.data.iter().zip(&x.data).map(|(&g, &v)| if v > 0.0 { g } else { 0.0 }).collect(),
        ..*x
    }
}

/// `1 - exp(-x^2)`.
pub fn one_minus_rbf(x: f64) -> f64 {
    -(-x * x).exp_m1()
}

/// Derivative of [`one_minus_rbf`]: `2 x exp(-x^2)`.
pub fn one_minus_rbf_grad(x: f64) -> f64 {
    2.0 * x * (-x * x).exp()
}

pub fn one_minus_rbf_forward(x: &Tensor) -> Tensor {
    Tensor { data: x.data.iter().map(|&v| one_minus_rbf(v)).collect(), ..*x }
}

pub fn one_minus_rbf_backward(grad_out: &Tensor, x: &Tensor) -> Tensor {
    Tensor {
        data: grad_out.data.iter().zip(&x.data).map(|(&g, &v)| g * one_minus_rbf_grad(v)).collect(),
        ..*x
    }
}

/// Size of the padded integration axis for an FHT layer input of `h x w`.
pub fn fht_padded_len(space: HoughSpace, h: usize, w: usize) -> usize {
    space.integration_len(w, h).next_power_of_two()
}

/// Output `(rows, cols)` of the FHT layer for an input of `h x w`.
pub fn fht_layer_dims(space: HoughSpace, h: usize, w: usize) -> (usize, usize) {
    let n = fht_padded_len(space, h, w);
    match space {
        HoughSpace::H12 => space.output_dims(w, n),
        HoughSpace::H34 => space.output_dims(n, h),
    }
}

fn padded_channel(src: &[f64], h: usize, w: usize, ph: usize, pw: usize) -> Vec<f64> {
    if ph == h && pw == w {
        return src.to_vec();
    }
    let mut out = vec![0.0; ph * pw];
    for y in 0..h {
        out[y * pw..y * pw + w].copy_from_slice(&src[y * w..(y + 1) * w]);
    }
    out
}

fn padded_dims(space: HoughSpace, h: usize, w: usize) -> (usize, usize) {
    let n = fht_padded_len(space, h, w);
    match space {
        HoughSpace::H12 => (n, w),
        HoughSpace::H34 => (h, n),
    }
}

/// Joined FHT applied to every channel; the integration axis is zero-padded
/// (bottom rows for `H12`, right columns for `H34`) to a power of two.
pub fn fht_layer_forward(x: &Tensor, space: HoughSpace) -> Result<Tensor> {
    let (ph, pw) = padded_dims(space, x.h, x.w);
    let (ro, co) = fht_layer_dims(space, x.h, x.w);
    let mut out = Tensor::zeros(x.c, ro, co);
    for c in 0..x.c {
        let src = padded_channel(x.channel(c), x.h, x.w, ph, pw);
        let mapped = join_raw(&src, pw, ph, space)?;
        out.channel_mut(c).copy_from_slice(&mapped);
    }
    Ok(out)
}

/// Exact transpose of [`fht_layer_forward`] for an input of `in_h x in_w`.
pub fn fht_layer_backward(grad_out: &Tensor, space: HoughSpace, in_h: usize, in_w: usize) -> Result<Tensor> {
    let (ph, pw) = padded_dims(space, in_h, in_w);
    let (ro, co) = fht_layer_dims(space, in_h, in_w);
    if (grad_out.h, grad_out.w) != (ro, co) {
        return Err(Error::Shape {
            expected: format!("{}x{ro}x{co}", grad_out.c),
            actual: format!("{:?}", grad_out.shape()),
        });
    }
    let mut out = Tensor::zeros(grad_out.c, in_h, in_w);
    for c in 0..grad_out.c {
        let g = join_adjoint_raw(grad_out.channel(c), pw, ph, space)?;
        let dst = out.channel_mut(c);
        for y in 0..in_h {
            dst[y * in_w..(y + 1) * in_w].copy_from_slice(&g[y * pw..y * pw + in_w]);
        }
    }
    Ok(out)
}

/// Sum of squared differences, optionally divided by the element count.
/// Returns the loss and its gradient with respect to `pred`.
pub fn l2_loss(pred: &Tensor, target: &Tensor, normalize: bool) -> Result<(f64, Tensor)> {
    pred.same_shape(target)?;
    let n = if normalize { pred.data.len() as f64 } else { 1.0 };
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(pred.c, pred.h, pred.w);
    for ((g, &p), &t) in grad.data.iter_mut().zip(&pred.data).zip(&target.data) {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fht::fht_join;
    use crate::image::GrayImage;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor {
        Tensor::from_vec(c, h, w, (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn spec(in_channels: usize, filters: usize, kernel: (usize, usize), stride: (usize, usize)) -> ConvSpec {
        ConvSpec { in_channels, filters, kernel, stride }
    }

    /// Six nested loops, straight from the definition.
    fn naive_conv(x: &Tensor, w: &[f64], s: &ConvSpec) -> Tensor {
        let ho = (x.h - s.kernel.0) / s.stride.0 + 1;
        let wo = (x.w - s.kernel.1) / s.stride.1 + 1;
        let mut out = Tensor::zeros(s.filters, ho, wo);
        for f in 0..s.filters {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for c in 0..x.c {
                        for ky in 0..s.kernel.0 {
                            for kx in 0..s.kernel.1 {
                                acc += w[((f * x.c + c) * s.kernel.0 + ky) * s.kernel.1 + kx]
                                    * x.at(c, oy * s.stride.0 + ky, ox * s.stride.1 + kx);
                            }
                        }
                    }
                    out.data[(f * ho + oy) * wo + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_output_shape() {
        let x = Tensor::zeros(1, 8, 8);
        let s = spec(1, 1, (5, 5), (1, 1));
        let y = conv_forward(&x, &vec![0.0; 25], &s).unwrap();
        assert_eq!(y.shape(), (1, 4, 4));
        let s2 = spec(1, 3, (3, 9), (3, 2));
        let y2 = conv_forward(&Tensor::zeros(1, 20, 30), &vec![0.0; 81], &s2).unwrap();
        assert_eq!(y2.shape(), (3, 6, 11));
    }

    #[test]
    fn conv_rejects_undersized_input() {
        let s = spec(1, 1, (5, 5), (1, 1));
        assert!(matches!(conv_forward(&Tensor::zeros(1, 4, 8), &vec![0.0; 25], &s), Err(Error::Shape { .. })));
    }

    #[test]
    fn identity_kernel_crops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_tensor(&mut rng, 1, 9, 11);
        let mut w = vec![0.0; 25];
        w[12] = 1.0;
        let y = conv_forward(&x, &w, &spec(1, 1, (5, 5), (1, 1))).unwrap();
        for oy in 0..y.h {
            for ox in 0..y.w {
                assert_eq!(y.at(0, oy, ox), x.at(0, oy + 2, ox + 2));
            }
        }
    }

    #[test]
    fn conv_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (c, f, k, st) in [(3, 4, (5, 5), (1, 1)), (2, 3, (3, 9), (2, 3)), (1, 2, (5, 5), (3, 3))] {
            let x = rand_tensor(&mut rng, c, 23, 29);
            let s = spec(c, f, k, st);
            let w: Vec<f64> = (0..s.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = conv_forward(&x, &w, &s).unwrap();
            let slow = naive_conv(&x, &w, &s);
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_backward_zero_and_single_pixel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = spec(2, 2, (3, 3), (2, 2));
        let x = rand_tensor(&mut rng, 2, 9, 9);
        let w: Vec<f64> = (0..s.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (gx, gw) = conv_backward(&Tensor::zeros(2, 4, 4), &x, &w, &s).unwrap();
        assert!(gx.data.iter().all(|&v| v == 0.0) && gw.iter().all(|&v| v == 0.0));

        let mut g = Tensor::zeros(2, 4, 4);
        g.data[(4 + 2) * 4 + 3] = 1.0; // filter 1, row 2, col 3
        let (_, gw) = conv_backward(&g, &x, &w, &s).unwrap();
        for c in 0..2 {
            for ky in 0..3 {
                for kx in 0..3 {
                    assert_eq!(gw[((2 + c) * 3 + ky) * 3 + kx], x.at(c, 4 + ky, 6 + kx));
                    assert_eq!(gw[(c * 3 + ky) * 3 + kx], 0.0);
                }
            }
        }
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = spec(2, 3, (3, 5), (2, 1));
        let x = rand_tensor(&mut rng, 2, 11, 12);
        let w: Vec<f64> = (0..s.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let probe = rand_tensor(&mut rng, 3, 5, 8);
        let objective = |x: &Tensor, w: &[f64]| conv_forward(x, w, &s).unwrap().dot(&probe);
        let (gx, gw) = conv_backward(&probe, &x, &w, &s).unwrap();
        let eps = 1e-4;
        for i in 0..w.len() {
            let mut wp = w.clone();
            wp[i] += eps;
            let mut wm = w.clone();
            wm[i] -= eps;
            let fd = (objective(&x, &wp) - objective(&x, &wm)) / (2.0 * eps);
            assert!((fd - gw[i]).abs() <= 1e-3 * fd.abs().max(1e-3), "w[{i}] {fd} vs {}", gw[i]);
        }
        for i in (0..x.data.len()).step_by(7) {
            let mut xp = x.clone();
            xp.data[i] += eps;
            let mut xm = x.clone();
            xm.data[i] -= eps;
            let fd = (objective(&xp, &w) - objective(&xm, &w)) / (2.0 * eps);
            assert!((fd - gx.data[i]).abs() <= 1e-3 * fd.abs().max(1e-3));
        }
    }

    #[test]
    fn fht_layer_channel_matches_join() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_tensor(&mut rng, 1, 16, 12);
        let img = GrayImage::from_vec(12, 16, x.data.clone()).unwrap();
        let y = fht_layer_forward(&x, HoughSpace::H12).unwrap();
        assert_eq!(y.data, fht_join(&img, HoughSpace::H12).unwrap().data);
        let z = fht_layer_forward(&Tensor::zeros(12, 10, 10), HoughSpace::H34).unwrap();
        assert_eq!(z.shape(), (12, 32, 26));
        assert!(z.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fht_layer_adjoint_with_padding() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for space in [HoughSpace::H12, HoughSpace::H34] {
            let x = rand_tensor(&mut rng, 3, 13, 11);
            let y = fht_layer_forward(&x, space).unwrap();
            let g = rand_tensor(&mut rng, y.c, y.h, y.w);
            let back = fht_layer_backward(&g, space, x.h, x.w).unwrap();
            let lhs = y.dot(&g);
            let rhs = x.dot(&back);
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
            assert!(fht_layer_backward(&Tensor::zeros(3, y.h, y.w), space, x.h, x.w)
                .unwrap()
                .data
                .iter()
                .all(|&v| v == 0.0));
        }
    }

    #[test]
    fn fht_layer_impulse_gradient_is_a_dyadic_line() {
        let (h, w) = (16, 8);
        let (ro, co) = fht_layer_dims(HoughSpace::H12, h, w);
        let mut g = Tensor::zeros(1, ro, co);
        // alpha = 10 -> H1 shift 6, skew floor(16 - 5) = 11, column 15 -> x0 = 4.
        g.data[10 * co + 15] = 1.0;
        let back = fht_layer_backward(&g, HoughSpace::H12, h, w).unwrap();
        let pattern = crate::fht::dyadic_pattern(16, 6).unwrap();
        let mut expected = vec![0.0; h * w];
        for (y, &p) in pattern.offsets().iter().enumerate() {
            let x = 4 + p;
            if x < w {
                expected[y * w + x] = 1.0;
            }
        }
        assert_eq!(back.data, expected);
    }

    #[test]
    fn rbf_values_and_gradient() {
        assert_eq!(one_minus_rbf(0.0), 0.0);
        assert!((one_minus_rbf(40.0) - 1.0).abs() < 1e-15);
        assert!(one_minus_rbf(-1e3) <= 1.0);
        for x in [-2.0, -0.5, 0.3, 4.0] {
            let eps = 1e-6;
            let fd = (one_minus_rbf(x + eps) - one_minus_rbf(x - eps)) / (2.0 * eps);
            assert!((fd - one_minus_rbf_grad(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn l2_examples() {
        let t = Tensor::from_vec(1, 2, 2, vec![0.5, 1.0, 0.0, 2.0]).unwrap();
        assert_eq!(l2_loss(&t, &t, true).unwrap().0, 0.0);
        let mut target = Tensor::zeros(1, 9, 9);
        for y in 2..7 {
            for x in 2..7 {
                target.data[y * 9 + x] = 1.0;
            }
        }
        let (loss, _) = l2_loss(&Tensor::zeros(1, 9, 9), &target, false).unwrap();
        assert_eq!(loss, 25.0);
        assert!(l2_loss(&Tensor::zeros(1, 9, 8), &target, true).is_err());
    }

    #[test]
    fn l2_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = rand_tensor(&mut rng, 1, 4, 5);
        let t = rand_tensor(&mut rng, 1, 4, 5);
        let (_, g) = l2_loss(&p, &t, true).unwrap();
        for i in 0..p.data.len() {
            assert!((g.data[i] - 2.0 * (p.data[i] - t.data[i]) / 20.0).abs() < 1e-15);
            let eps = 1e-6;
            let mut pp = p.clone();
            pp.data[i] += eps;
            let mut pm = p.clone();
            pm.data[i] -= eps;
            let fd = (l2_loss(&pp, &t, true).unwrap().0 - l2_loss(&pm, &t, true).unwrap().0) / (2.0 * eps);
            assert!((fd - g.data[i]).abs() < 1e-8);
        }
    }
}
