//! Dense tensors, pairwise contraction and truncated singular value
//! decomposition.
//!
//! Data is stored row-major: the last axis varies fastest. A tensor with
//! dims `[d0, d1, d2]` keeps element `(i, j, k)` at `(i * d1 + j) * d2 + k`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Element type of a [`DenseTensor`]: `f64` or [`C64`].
pub trait Scalar:
    faer::traits::ComplexField<Real = f64>
    + Copy
    + Debug
    + Default
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    const REAL: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    /// Real types keep only the real part.
    fn from_c64(z: C64) -> Self;
    fn to_c64(self) -> C64;
    fn conj(self) -> Self;
    fn abs2(self) -> f64;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn scale(self, x: f64) -> Self;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    const REAL: bool = true;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_c64(z: C64) -> Self {
        z.re
    }
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
    fn conj(self) -> Self {
        self
    }
    fn abs2(self) -> f64 {
        self * self
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn is_finite(self) -> bool {
        Float::is_finite(self)
    }
}

impl Scalar for C64 {
    const REAL: bool = false;

    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn from_c64(z: C64) -> Self {
        z
    }
    fn to_c64(self) -> C64 {
        self
    }
    fn conj(self) -> Self {
        C64::new(self.re, -self.im)
    }
    fn abs2(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn scale(self, x: f64) -> Self {
        C64::new(self.re * x, self.im * x)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    pub(crate) dims: Vec<usize>,
    pub(crate) data: Vec<T>,
}

impl<T: Scalar> DenseTensor<T> {
    pub fn new(dims: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("zero extent in {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![T::zero(); len],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    /// Builds a tensor by evaluating `f` on every multi-index in row-major
    /// order.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Self {
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for ax in (0..dims.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < dims[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self {
            dims: dims.to_vec(),
            data,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    pub fn reshape(mut self, dims: &[usize]) -> Result<Self> {
        let len: usize = dims.iter().product();
        if len != self.data.len() || dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {dims:?}",
                self.dims
            )));
        }
        self.dims = dims.to_vec();
        Ok(self)
    }

    /// Reorders axes: axis `k` of the result is axis `axes[k]` of `self`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if axes.len() != r || axes.iter().any(|&a| a >= r || core::mem::replace(&mut seen[a], true)) {
            return Err(Error::Shape(format!(
                "{axes:?} is not a permutation of {r} axes"
            )));
        }
        if axes.iter().enumerate().all(|(k, &a)| k == a) {
            return Ok(self.clone());
        }
        let mut in_strides = vec![1usize; r];
        for ax in (0..r.saturating_sub(1)).rev() {
            in_strides[ax] = in_strides[ax + 1] * self.dims[ax + 1];
        }
        let out_dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; r];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[src]);
            for ax in (0..r).rev() {
                idx[ax] += 1;
                src += strides[ax];
                if idx[ax] < out_dims[ax] {
                    break;
                }
                src -= strides[ax] * out_dims[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self {
            dims: out_dims,
            data,
        })
    }

    pub fn scale(&mut self, x: f64) {
        for v in &mut self.data {
            *v = v.scale(x);
        }
    }

    pub fn scaled_by(&self, alpha: T) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| v * alpha).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs2()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dims, other.dims, "shape mismatch in max_abs_diff");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs2().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest imaginary magnitude among the entries.
    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|v| v.im().abs()).fold(0.0, f64::max)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> DenseTensor<U> {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 {
            return Err(Error::Shape("matmul needs rank-2 operands".into()));
        }
        contract(self, other, &[(1, 0)])
    }

    /// Conjugate transpose of a rank-2 tensor.
    pub fn adjoint(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(Error::Shape("adjoint needs a rank-2 tensor".into()));
        }
        Ok(self.permute(&[1, 0])?.conj())
    }
}

/// Row-major `m x k` times `k x n`.
pub(crate) fn gemm<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![T::zero(); m * n];
    if m == 0 || n == 0 {
        return out;
    }
    if k == 0 {
        return out;
    }
    let lhs = MatRef::from_row_major_slice(a, m, k);
    let rhs = MatRef::from_row_major_slice(b, k, n);
    let dst = MatMut::from_row_major_slice_mut(&mut out, m, n);
    matmul(dst, Accum::Replace, lhs, rhs, T::one(), Par::Seq);
    out
}

/// How a gemm operand is read from its row-major storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Op {
    /// As stored.
    N,
    /// Transposed.
    T,
    /// Conjugated.
    C,
    /// Conjugate transpose.
    H,
}

impl Op {
    fn transposed(self) -> bool {
        matches!(self, Op::T | Op::H)
    }
    fn conjugated(self) -> bool {
        matches!(self, Op::C | Op::H)
    }
}

/// `op_a(a) · op_b(b)` where `op_a(a)` is `m x k` and `op_b(b)` is `k x n`.
pub(crate) fn gemm_op<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    op_a: Op,
    b: &[T],
    op_b: Op,
) -> Vec<T> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![T::zero(); m * n];
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    let lhs = if op_a.transposed() {
        MatRef::from_row_major_slice(a, k, m).transpose()
    } else {
        MatRef::from_row_major_slice(a, m, k)
    };
    let rhs = if op_b.transposed() {
        MatRef::from_row_major_slice(b, n, k).transpose()
    } else {
        MatRef::from_row_major_slice(b, k, n)
    };
    let dst = MatMut::from_row_major_slice_mut(&mut out, m, n);
    match (op_a.conjugated(), op_b.conjugated()) {
        (false, false) => matmul(dst, Accum::Replace, lhs, rhs, T::one(), Par::Seq),
        (true, false) => matmul(dst, Accum::Replace, lhs.conjugate(), rhs, T::one(), Par::Seq),
        (false, true) => matmul(dst, Accum::Replace, lhs, rhs.conjugate(), T::one(), Par::Seq),
        (true, true) => matmul(
            dst,
            Accum::Replace,
            lhs.conjugate(),
            rhs.conjugate(),
            T::one(),
            Par::Seq,
        ),
    }
    out
}

/// Contracts `a` with `b` over the listed `(axis of a, axis of b)` pairs.
///
/// The result carries the unpaired axes of `a` (in order) followed by the
/// unpaired axes of `b`.
pub fn contract<T: Scalar>(
    a: &DenseTensor<T>,
    b: &DenseTensor<T>,
    pairs: &[(usize, usize)],
) -> Result<DenseTensor<T>> {
    for &(ia, ib) in pairs {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(Error::Shape(format!(
                "axis pair ({ia}, {ib}) out of range for ranks {} and {}",
                a.rank(),
                b.rank()
            )));
        }
        if a.dims[ia] != b.dims[ib] {
            return Err(Error::DimensionMismatch {
                axis_a: ia,
                axis_b: ib,
                extent_a: a.dims[ia],
                extent_b: b.dims[ib],
            });
        }
    }
    let paired_a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let paired_b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    for (list, rank) in [(&paired_a, a.rank()), (&paired_b, b.rank())] {
        let mut seen = vec![false; rank];
        for &ax in list.iter() {
            if core::mem::replace(&mut seen[ax], true) {
                return Err(Error::Shape(format!("axis {ax} paired twice")));
            }
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|ax| !paired_a.contains(ax)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|ax| !paired_b.contains(ax)).collect();

    let perm_a: Vec<usize> = free_a.iter().chain(&paired_a).copied().collect();
    let perm_b: Vec<usize> = paired_b.iter().chain(&free_b).copied().collect();
    let at = a.permute(&perm_a)?;
    let bt = b.permute(&perm_b)?;

    let m: usize = free_a.iter().map(|&ax| a.dims[ax]).product();
    let k: usize = paired_a.iter().map(|&ax| a.dims[ax]).product();
    let n: usize = free_b.iter().map(|&ax| b.dims[ax]).product();
    let data = gemm(m, k, n, &at.data, &bt.data);

    let mut dims: Vec<usize> = free_a.iter().map(|&ax| a.dims[ax]).collect();
    dims.extend(free_b.iter().map(|&ax| b.dims[ax]));
    if dims.is_empty() {
        dims.push(1);
    }
    Ok(DenseTensor { dims, data })
}

/// Bond truncation rule shared by every engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Maximum number of singular values kept per bond.
    pub chi_max: usize,
    /// Values below `cutoff * s_max` are discarded.
    pub cutoff: f64,
}

impl Truncation {
    pub const DEFAULT_CUTOFF: f64 = 1e-12;

    pub fn new(chi_max: usize, cutoff: f64) -> Self {
        Self { chi_max, cutoff }
    }

    /// Keep everything above the default relative cutoff.
    pub fn exact() -> Self {
        Self::new(usize::MAX, Self::DEFAULT_CUTOFF)
    }

    pub fn chi(chi_max: usize) -> Self {
        Self::new(chi_max, Self::DEFAULT_CUTOFF)
    }
}

/// Output of [`truncated_svd`]: `m ≈ left · diag(singular_values) · right`.
#[derive(Debug, Clone)]
pub struct SvdResult<T> {
    /// `rows x k`, orthonormal columns.
    pub left: DenseTensor<T>,
    /// Descending, non-negative, at most `chi_max` long.
    pub singular_values: Vec<f64>,
    /// `k x cols`, orthonormal rows.
    pub right: DenseTensor<T>,
    /// Frobenius norm of the discarded part: `sqrt(sum of dropped s^2)`.
    pub truncation_weight: f64,
}

/// Thin SVD of a row-major `rows x cols` slice, truncated to at most
/// `chi_max` values; values below `cutoff * s_max` are dropped. At least one
/// value is always kept so downstream shapes stay valid.
pub(crate) fn svd_slice<T: Scalar>(
    rows: usize,
    cols: usize,
    data: &[T],
    chi_max: usize,
    cutoff: f64,
) -> Result<SvdResult<T>> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix);
    }
    if chi_max == 0 {
        return Err(Error::Shape("chi_max must be at least 1".into()));
    }
    if !data.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("SVD input"));
    }
    let mat = MatRef::from_row_major_slice(data, rows, cols);
    let svd = mat
        .thin_svd()
        .map_err(|_| Error::SvdNoConvergence { rows, cols })?;
    let s_all: Vec<f64> = svd
        .S()
        .column_vector()
        .iter()
        .map(|v| v.re().abs())
        .collect();
    let s_max = s_all.first().copied().unwrap_or(0.0);
    let mut keep = s_all
        .iter()
        .take(chi_max)
        .take_while(|&&s| s > 0.0 && s >= cutoff * s_max)
        .count();
    keep = keep.max(1);
    let truncation_weight = s_all[keep..].iter().map(|s| s * s).sum::<f64>().sqrt();

    let u = svd.U();
    let v = svd.V();
    let mut left = Vec::with_capacity(rows * keep);
    for i in 0..rows {
        for j in 0..keep {
            left.push(u[(i, j)]);
        }
    }
    // A = U S V^H, so the right factor is V^H.
    let mut right = Vec::with_capacity(keep * cols);
    for j in 0..keep {
        for i in 0..cols {
            right.push(Scalar::conj(v[(i, j)]));
        }
    }
    let out = SvdResult {
        left: DenseTensor {
            dims: vec![rows, keep],
            data: left,
        },
        singular_values: s_all[..keep].to_vec(),
        right: DenseTensor {
            dims: vec![keep, cols],
            data: right,
        },
        truncation_weight,
    };
    if !out.left.all_finite() || !out.right.all_finite() {
        return Err(Error::NonFinite("SVD output"));
    }
    Ok(out)
}

/// Truncated SVD of a matrix.
///
/// Keeps `min(chi_max, #{s_k >= cutoff * s_1}, rank)` singular values.
pub fn truncated_svd<T: Scalar>(
    m: &DenseTensor<T>,
    chi_max: usize,
    cutoff: f64,
) -> Result<SvdResult<T>> {
    if m.rank() != 2 {
        return Err(Error::Shape(format!(
            "truncated_svd needs a matrix, got dims {:?}",
            m.dims
        )));
    }
    svd_slice(m.dims[0], m.dims[1], &m.data, chi_max, cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat(rows: usize, cols: usize, v: &[f64]) -> DenseTensor<f64> {
        DenseTensor::new(vec![rows, cols], v.to_vec()).unwrap()
    }

    #[test]
    fn identity_contraction() {
        let id = DenseTensor::<f64>::identity(2);
        let v = DenseTensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let r = contract(&id, &v, &[(1, 0)]).unwrap();
        assert_eq!(r.dims(), &[2]);
        assert_eq!(r.data(), &[1.0, 2.0]);
    }

    #[test]
    fn diagonal_product() {
        let a = mat(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let b = mat(2, 2, &[5.0, 0.0, 0.0, 7.0]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[10.0, 0.0, 0.0, 21.0]);
    }

    #[test]
    fn mismatch_names_axis_pair() {
        let a = DenseTensor::<f64>::zeros(&[2, 3]);
        let b = DenseTensor::<f64>::zeros(&[2, 2]);
        let err = contract(&a, &b, &[(1, 0)]).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                axis_a: 1,
                axis_b: 0,
                extent_a: 3,
                extent_b: 2
            }
        );
    }

    #[test]
    fn full_contraction_gives_scalar() {
        let a = mat(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let r = contract(&a, &a, &[(0, 0), (1, 1)]).unwrap();
        assert_eq!(r.dims(), &[1]);
        assert_abs_diff_eq!(r.data()[0], 30.0);
    }

    #[test]
    fn permute_moves_axes() {
        let t = DenseTensor::<f64>::from_fn(&[2, 3, 4], |i| (100 * i[0] + 10 * i[1] + i[2]) as f64);
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.dims(), &[4, 2, 3]);
        assert_eq!(p.get(&[3, 1, 2]), 123.0);
        assert!(t.permute(&[0, 0, 1]).is_err());
    }

    #[test]
    fn svd_of_diagonal_truncates() {
        let m = mat(3, 3, &[3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
        let r = truncated_svd(&m, 2, 1e-12).unwrap();
        assert_eq!(r.singular_values.len(), 2);
        assert_abs_diff_eq!(r.singular_values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.singular_values[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.truncation_weight, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn svd_of_identity() {
        let r = truncated_svd(&DenseTensor::<f64>::identity(2), 2, 1e-12).unwrap();
        assert_eq!(r.singular_values.len(), 2);
        assert_abs_diff_eq!(r.singular_values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.singular_values[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.truncation_weight, 0.0);
    }

    #[test]
    fn svd_of_rank_one() {
        let m = mat(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let r = truncated_svd(&m, 4, 1e-14).unwrap();
        assert_eq!(r.singular_values.len(), 1);
        assert_abs_diff_eq!(r.singular_values[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn svd_rejects_degenerate_input() {
        let m = DenseTensor::<f64>::zeros(&[2, 2, 2]);
        assert!(truncated_svd(&m, 2, 0.0).is_err());
        let mut nan = DenseTensor::<f64>::identity(2);
        nan.set(&[0, 1], f64::NAN);
        assert_eq!(
            truncated_svd(&nan, 2, 0.0).unwrap_err(),
            Error::NonFinite("SVD input")
        );
        assert_eq!(svd_slice::<f64>(0, 3, &[], 2, 0.0).unwrap_err(), Error::EmptyMatrix);
    }
}
