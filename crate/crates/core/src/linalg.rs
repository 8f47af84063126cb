//! Small dense helpers on row-major square matrices.

use alloc::vec;
use alloc::vec::Vec;

use faer::{MatRef, Side};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::tensor::{gemm, Scalar, C64};

pub(crate) fn identity<T: Scalar>(n: usize) -> Vec<T> {
    let mut m = vec![T::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = T::one();
    }
    m
}

/// Conjugate transpose of a row-major `rows x cols` matrix.
pub(crate) fn adjoint<T: Scalar>(rows: usize, cols: usize, a: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j].conj();
        }
    }
    out
}

pub(crate) fn matmul_sq<T: Scalar>(n: usize, a: &[T], b: &[T]) -> Vec<T> {
    gemm(n, n, n, a, b)
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues ascend; column `k`
/// of the returned row-major matrix is the `k`-th eigenvector.
pub(crate) fn herm_eigen<T: Scalar>(n: usize, a: &[T]) -> Result<(Vec<f64>, Vec<T>)> {
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("eigendecomposition input"));
    }
    let m = MatRef::from_row_major_slice(a, n, n);
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::SvdNoConvergence { rows: n, cols: n })?;
    let s = evd.S();
    let vals: Vec<f64> = s.column_vector().iter().map(|v| v.re()).collect();
    let u = evd.U();
    let mut vecs = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            vecs.push(u[(i, j)]);
        }
    }
    Ok((vals, vecs))
}

/// `f(H) = V f(E) V^H` for Hermitian `h`.
pub(crate) fn herm_fn(n: usize, h: &[C64], f: impl Fn(f64) -> C64) -> Result<Vec<C64>> {
    let (vals, vecs) = herm_eigen(n, h)?;
    let mut scaled = vecs.clone();
    for i in 0..n {
        for k in 0..n {
            scaled[i * n + k] *= f(vals[k]);
        }
    }
    Ok(gemm(n, n, n, &scaled, &adjoint(n, n, &vecs)))
}

/// `exp(-i h t)` for Hermitian `h`.
pub(crate) fn unitary_exp(n: usize, h: &[C64], t: f64) -> Result<Vec<C64>> {
    herm_fn(n, h, |e| {
        let phase = -e * t;
        C64::new(phase.cos(), phase.sin())
    })
}

fn one_norm(n: usize, a: &[C64]) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
///
/// Intended for the small generators used here (at most 16 x 16); the
/// series is run to machine precision after scaling the norm below 1/2.
pub(crate) fn expm(n: usize, a: &[C64]) -> Vec<C64> {
    let norm = one_norm(n, a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings);
    let x: Vec<C64> = a.iter().map(|v| v * scale).collect();

    let mut result = identity::<C64>(n);
    let mut term = identity::<C64>(n);
    for k in 1..=30 {
        term = matmul_sq(n, &term, &x);
        let inv = 1.0 / k as f64;
        for v in &mut term {
            *v *= inv;
        }
        let mut largest = 0.0f64;
        for (r, t) in result.iter_mut().zip(&term) {
            *r += t;
            largest = largest.max(t.norm());
        }
        if largest < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul_sq(n, &result, &result);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        // exp(t [[0, -1], [1, 0]]) is a rotation by t.
        let t = 2.7;
        let a = [
            C64::new(0.0, 0.0),
            C64::new(-t, 0.0),
            C64::new(t, 0.0),
            C64::new(0.0, 0.0),
        ];
        let e = expm(2, &a);
        let want = [t.cos(), -t.sin(), t.sin(), t.cos()];
        for (got, w) in e.iter().zip(want) {
            assert!((got - C64::new(w, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn expm_matches_eigen_route() {
        let h = [
            C64::new(0.3, 0.0),
            C64::new(0.1, -0.7),
            C64::new(0.1, 0.7),
            C64::new(-1.2, 0.0),
        ];
        let t = 3.1;
        let gen: Vec<C64> = h.iter().map(|v| v * C64::new(0.0, -t)).collect();
        let a = expm(2, &gen);
        let b = unitary_exp(2, &h, t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn eigen_reconstructs() {
        let h = [2.0, 1.0, 1.0, 2.0];
        let (vals, vecs) = herm_eigen(2, &h).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let v0 = [vecs[0], vecs[2]];
        assert!((v0[0] + v0[1]).abs() < 1e-14);
    }
}
