//! Dense row-major kernels. Every output row is computed from the matching
//! input row only, in a fixed summation order.

use super::Real;

/// `out[m×n] += a[m×k] · b[k×n]`
pub(crate) fn matmul_acc<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &x) in a[i * k..(i + 1) * k].iter().enumerate() {
            if x == F::zero() {
                continue;
            }
            for (o, &w) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += x * w;
            }
        }
    }
}

/// `out[m×n] += a[m×k] · b[n×k]ᵀ`
pub(crate) fn matmul_bt_acc<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..n {
            out[i * n + j] += dot(ar, &b[j * k..(j + 1) * k]);
        }
    }
}

/// `out[k×n] += a[m×k]ᵀ · b[m×n]`
pub(crate) fn matmul_at_acc<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let br = &b[i * n..(i + 1) * n];
        for (p, &x) in a[i * k..(i + 1) * k].iter().enumerate() {
            if x == F::zero() {
                continue;
            }
            for (o, &g) in out[p * n..(p + 1) * n].iter_mut().zip(br) {
                *o += x * g;
            }
        }
    }
}

#[inline]
pub(crate) fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    let mut s = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// `y = x W + b` for `rows` rows.
pub(crate) fn linear<F: Real>(x: &[F], w: &[F], b: &[F], rows: usize, inp: usize, out: usize) -> Vec<F> {
    let mut y = Vec::with_capacity(rows * out);
    for _ in 0..rows {
        y.extend_from_slice(b);
    }
    matmul_acc(x, w, &mut y, rows, inp, out);
    y
}

/// Accumulates the gradients of `y = x W + b` and returns `dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward<F: Real>(
    x: &[F],
    w: &[F],
    dy: &[F],
    dw: &mut [F],
    db: &mut [F],
    rows: usize,
    inp: usize,
    out: usize,
) -> Vec<F> {
    matmul_at_acc(x, dy, dw, rows, inp, out);
    for r in 0..rows {
        for (g, &d) in db.iter_mut().zip(&dy[r * out..(r + 1) * out]) {
            *g += d;
        }
    }
    let mut dx = vec![F::zero(); rows * inp];
    matmul_bt_acc(dy, w, &mut dx, rows, out, inp);
    dx
}

pub(crate) const LN_EPS: f64 = 1e-5;

pub(crate) struct LayerNormCache<F> {
    pub xhat: Vec<F>,
    pub rstd: Vec<F>,
}

pub(crate) fn layer_norm<F: Real>(
    x: &[F],
    gain: &[F],
    bias: &[F],
    rows: usize,
    d: usize,
) -> (Vec<F>, LayerNormCache<F>) {
    let mut y = vec![F::zero(); rows * d];
    let mut xhat = vec![F::zero(); rows * d];
    let mut rstd = vec![F::zero(); rows];
    let inv_d = F::of(1.0 / d as f64);
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().copied().sum::<F>() * inv_d;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() * inv_d;
        let rs = F::one() / (var + F::of(LN_EPS)).sqrt();
        rstd[r] = rs;
        for c in 0..d {
            let h = (xr[c] - mean) * rs;
            xhat[r * d + c] = h;
            y[r * d + c] = h * gain[c] + bias[c];
        }
    }
    (y, LayerNormCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward<F: Real>(
    dy: &[F],
    cache: &LayerNormCache<F>,
    gain: &[F],
    dgain: &mut [F],
    dbias: &mut [F],
    rows: usize,
    d: usize,
) -> Vec<F> {
    let mut dx = vec![F::zero(); rows * d];
    let inv_d = F::of(1.0 / d as f64);
    let mut dxhat = vec![F::zero(); d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        for c in 0..d {
            dgain[c] += dyr[c] * xh[c];
            dbias[c] += dyr[c];
            dxhat[c] = dyr[c] * gain[c];
        }
        let mean_dxhat = dxhat.iter().copied().sum::<F>() * inv_d;
        let mean_dxhat_xhat = dot(&dxhat, xh) * inv_d;
        let rs = cache.rstd[r];
        for c in 0..d {
            dx[r * d + c] = rs * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// tanh-approximated GELU.
#[inline]
pub(crate) fn gelu<F: Real>(x: F) -> F {
    let u = F::of(GELU_C) * (x + F::of(GELU_A) * x * x * x);
    F::of(0.5) * x * (F::one() + u.tanh())
}

#[inline]
pub(crate) fn gelu_grad<F: Real>(x: F) -> F {
    let u = F::of(GELU_C) * (x + F::of(GELU_A) * x * x * x);
    let t = u.tanh();
    let du = F::of(GELU_C) * (F::one() + F::of(3.0 * GELU_A) * x * x);
    F::of(0.5) * (F::one() + t) + F::of(0.5) * x * (F::one() - t * t) * du
}

/// In-place numerically stable softmax; returns log of the normalizer
/// (`max + ln Σ exp(x - max)`).
pub(crate) fn softmax_in_place<F: Real>(xs: &mut [F]) -> F {
    let max = xs.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
    max + sum.ln()
}
