//! Infinite-chain MPDO with a two-site unit cell.
//!
//! Site tensors are stored as `B = Γ λ` (Γ followed by the Schmidt values of
//! the bond to its right), so gate updates need no inverse Schmidt values.
//! Non-unitary gates spoil the canonical form; [`ItebdState::reorthogonalize`]
//! restores it from the dominant fixed points of the cell transfer operator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::chain::dims3;
use crate::error::{Error, Result};
use crate::linalg::herm_eigen;
use crate::models::{build_super_gate, BondWeights, ChainLength, ModelParams, OperatorBasis, SuperGate};
use crate::schmidt_entropy;
use crate::tensor::{gemm, gemm_op, svd_slice, DenseTensor, Op, Scalar, Truncation, C64};
use crate::trotter::{fused_layers, Parity, TrotterOrder};

/// Default number of steps between reorthogonalizations.
pub const REORTH_INTERVAL: usize = 10;
/// Default convergence tolerance of the transfer-operator power iteration.
pub const REORTH_TOLERANCE: f64 = 1e-10;
const MAX_POWER_ITERATIONS: usize = 20_000;
/// Relative eigenvalue floor when inverting fixed-point factors.
const PINV_FLOOR: f64 = 1e-13;

/// Which bond of the cell: `Ab` joins site A to site B, `Ba` joins B to the
/// next cell's A.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellBond {
    Ab,
    Ba,
}

impl CellBond {
    pub fn of(parity: Parity) -> Self {
        match parity {
            Parity::Odd => CellBond::Ab,
            Parity::Even => CellBond::Ba,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItebdState<T> {
    /// `[B_A, B_B]`, each `[χ_left, d, χ_right]`.
    pub(crate) b: [DenseTensor<T>; 2],
    /// Schmidt values of bond AB and bond BA.
    pub(crate) lambda: [Vec<f64>; 2],
    basis: OperatorBasis,
    trace_vec: Vec<T>,
    time: f64,
    canonical: bool,
}

fn coeffs<T: Scalar>(v: [C64; 4], what: &'static str) -> Result<Vec<T>> {
    v.iter()
        .map(|&c| {
            if T::REAL && c.im.abs() > 1e-12 {
                Err(Error::NonFinite(what))
            } else {
                Ok(T::from_c64(c))
            }
        })
        .collect()
}

/// `Σ_s v_s M[:, s, :]` for `M = [a, d, b]`.
fn contract_phys<T: Scalar>(m: &DenseTensor<T>, v: &[T]) -> Vec<T> {
    let [a, d, b] = dims3(m);
    let mut out = vec![T::zero(); a * b];
    for i in 0..a {
        for (s, &vs) in v.iter().enumerate().take(d) {
            let row = &m.data[(i * d + s) * b..(i * d + s + 1) * b];
            for (o, &x) in out[i * b..(i + 1) * b].iter_mut().zip(row) {
                *o += vs * x;
            }
        }
    }
    out
}

fn scale_rows<T: Scalar>(data: &mut [T], rows: usize, lambdas: &[f64]) {
    let cols = data.len() / rows;
    for (row, &l) in data.chunks_exact_mut(cols).zip(lambdas) {
        for v in row {
            *v = v.scale(l);
        }
    }
}

fn vec_norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.abs2()).sum::<f64>().sqrt()
}

/// Dominant eigenvector of `apply` by power iteration, normalized.
fn power_iterate<T: Scalar>(start: Vec<T>, tol: f64, mut apply: impl FnMut(&[T]) -> Vec<T>) -> Result<Vec<T>> {
    let mut x = start;
    let n0 = vec_norm(&x);
    for v in &mut x {
        *v = v.scale(1.0 / n0);
    }
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_POWER_ITERATIONS {
        let mut y = apply(&x);
        let ny = vec_norm(&y);
        if !(ny > 0.0) || !ny.is_finite() {
            return Err(Error::DegenerateTransfer {
                residual: ny,
                iterations: 0,
            });
        }
        // align the phase with the previous iterate
        let overlap: T = x.iter().zip(&y).fold(T::zero(), |acc, (a, b)| acc + a.conj() * *b);
        let ov = overlap.to_c64();
        let phase = if ov.norm() > 0.0 {
            T::from_c64(ov.conj() / ov.norm())
        } else {
            T::one()
        };
        for v in &mut y {
            *v = (*v * phase).scale(1.0 / ny);
        }
        residual = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (*a - *b).abs2())
            .sum::<f64>()
            .sqrt();
        x = y;
        if residual < tol {
            return Ok(x);
        }
    }
    Err(Error::DegenerateTransfer {
        residual,
        iterations: MAX_POWER_ITERATIONS,
    })
}

/// Makes a fixed point Hermitian with positive trace.
fn hermitize<T: Scalar>(n: usize, x: &[T]) -> Vec<T> {
    let mut h = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = (x[i * n + j] + x[j * n + i].conj()).scale(0.5);
        }
    }
    let tr: f64 = (0..n).map(|i| h[i * n + i].re()).sum();
    if tr < 0.0 {
        for v in &mut h {
            *v = v.scale(-1.0);
        }
    }
    h
}

/// Square-root factor `F` (`n x k`) with `F F^H ≈ X` and its pseudo-inverse
/// (`k x n`), dropping eigenvalues below the relative floor.
fn sqrt_factor<T: Scalar>(n: usize, x: &[T]) -> Result<(usize, Vec<T>, Vec<T>)> {
    let (vals, vecs) = herm_eigen(n, x)?;
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n).filter(|&k| vals[k] > PINV_FLOOR * top).collect();
    if keep.is_empty() {
        return Err(Error::DegenerateTransfer {
            residual: top,
            iterations: 0,
        });
    }
    let k = keep.len();
    let mut f = vec![T::zero(); n * k];
    let mut finv = vec![T::zero(); k * n];
    for (c, &e) in keep.iter().enumerate() {
        let s = vals[e].sqrt();
        for i in 0..n {
            let w = vecs[i * n + e];
            f[i * k + c] = w.scale(s);
            finv[c * n + i] = w.conj().scale(1.0 / s);
        }
    }
    Ok((k, f, finv))
}

impl<T: Scalar> ItebdState<T> {
    /// Product state with the given local operators on sites A and B.
    pub fn product(a: [C64; 4], b: [C64; 4], basis: OperatorBasis) -> Result<Self> {
        let ra = coeffs::<T>(basis.coefficients(&a), "complex coefficient in a real basis")?;
        let rb = coeffs::<T>(basis.coefficients(&b), "complex coefficient in a real basis")?;
        let trace_vec = coeffs::<T>(basis.trace_vector(), "trace vector")?;
        let mut s = Self {
            b: [DenseTensor::new(vec![1, 4, 1], ra)?, DenseTensor::new(vec![1, 4, 1], rb)?],
            lambda: [vec![1.0], vec![1.0]],
            basis,
            trace_vec,
            time: 0.0,
            canonical: true,
        };
        s.normalize_sites();
        Ok(s)
    }

    /// Néel density operator: spin up on A, down on B.
    pub fn neel(basis: OperatorBasis) -> Result<Self> {
        let up = basis.operator_from(&basis.neel_site(true));
        let down = basis.operator_from(&basis.neel_site(false));
        Self::product(up, down, basis)
    }

    fn normalize_sites(&mut self) {
        for m in &mut self.b {
            let n = m.norm();
            if n > 0.0 {
                m.scale(1.0 / n);
            }
        }
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn bond_dims(&self) -> [usize; 2] {
        [self.lambda[0].len(), self.lambda[1].len()]
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn schmidt_values(&self, bond: CellBond) -> &[f64] {
        match bond {
            CellBond::Ab => &self.lambda[0],
            CellBond::Ba => &self.lambda[1],
        }
    }

    /// Operator entanglement in bits of one cell bond. Exact only after
    /// [`Self::reorthogonalize`].
    pub fn operator_entanglement(&self, bond: CellBond) -> f64 {
        schmidt_entropy(self.schmidt_values(bond))
    }

    /// Applies a two-site superoperator on one bond of the cell. Returns the
    /// relative discarded weight.
    pub fn apply_gate(&mut self, gate: &SuperGate<T>, bond: CellBond, trunc: Truncation) -> Result<f64> {
        if gate.flavor != self.basis.flavor {
            return Err(Error::InvalidParams(format!(
                "gate built for {:?}, state uses {:?}",
                gate.flavor, self.basis.flavor
            )));
        }
        let (i, j) = match bond {
            CellBond::Ab => (0, 1),
            CellBond::Ba => (1, 0),
        };
        let d = 4;
        let [a, _, m] = dims3(&self.b[i]);
        let [_, _, e] = dims3(&self.b[j]);
        let pair = gemm(a * d, m, d * e, &self.b[i].data, &self.b[j].data);
        let phi = crate::chain::apply_pair_gate(&pair, &gate.matrix, d * d, e);
        let mut theta = phi.clone();
        scale_rows(&mut theta, a, &self.lambda[j]);
        let svd = svd_slice(a * d, d * e, &theta, trunc.chi_max, trunc.cutoff)?;
        let kept: f64 = svd.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt();
        if !(kept > 0.0) {
            return Err(Error::VanishingNorm(kept));
        }
        let k = svd.singular_values.len();
        let total = (kept * kept + svd.truncation_weight.powi(2)).sqrt();
        let right = svd.right.data;
        let mut left = gemm_op(a * d, d * e, k, &phi, Op::N, &right, Op::H);
        for v in &mut left {
            *v = v.scale(1.0 / kept);
        }
        self.lambda[i] = svd.singular_values.iter().map(|s| s / kept).collect();
        self.b[i] = DenseTensor::new(vec![a, d, k], left)?;
        self.b[j] = DenseTensor::new(vec![k, d, e], right)?;
        self.canonical = false;
        Ok(svd.truncation_weight / total)
    }

    /// Cell tensor `C = B_A B_B` as a `χ x 16 x χ` array.
    fn cell(&self) -> (usize, Vec<T>) {
        let [a, d, m] = dims3(&self.b[0]);
        let [_, _, e] = dims3(&self.b[1]);
        debug_assert_eq!(a, e);
        (a, gemm(a * d, m, d * e, &self.b[0].data, &self.b[1].data))
    }

    /// Restores the canonical form from the dominant left and right fixed
    /// points of the cell transfer operator and normalizes the cell.
    pub fn reorthogonalize(&mut self, trunc: Truncation, tol: f64) -> Result<()> {
        let (chi, c) = self.cell();
        let dd = 16;
        // right: X -> Σ_s C_s X C_s^H
        let right_fp = power_iterate(crate::linalg::identity::<T>(chi), tol, |x| {
            let t = gemm(chi * dd, chi, chi, &c, x);
            gemm_op(chi, dd * chi, chi, &t, Op::N, &c, Op::H)
        })?;
        // left: Y -> Σ_s C_s^H Y C_s; with C viewed as (χ, 16χ) this is a
        // sum over the reshaped column blocks.
        let left_fp = power_iterate(crate::linalg::identity::<T>(chi), tol, |y| {
            let t = gemm(chi, chi, dd * chi, y, &c);
            let mut out = vec![T::zero(); chi * chi];
            for s in 0..dd {
                // out += C_s^H T_s with C_s, T_s the χ x χ slices
                let cs: Vec<T> = (0..chi)
                    .flat_map(|r| c[(r * dd + s) * chi..(r * dd + s + 1) * chi].iter().cloned())
                    .collect();
                let ts: Vec<T> = (0..chi)
                    .flat_map(|r| t[(r * dd + s) * chi..(r * dd + s + 1) * chi].iter().cloned())
                    .collect();
                let prod = gemm_op(chi, chi, chi, &cs, Op::H, &ts, Op::N);
                for (o, p) in out.iter_mut().zip(prod) {
                    *o += p;
                }
            }
            out
        })?;
        let r = hermitize(chi, &right_fp);
        let l = hermitize(chi, &left_fp);
        // R = X X^H, L = Y^H Y
        let (kx, x, x_inv) = sqrt_factor(chi, &r)?;
        let (ky, f, f_inv) = sqrt_factor(chi, &l)?;
        // L = F F^H, so Y = F^H (ky x chi) and Y^{-1} = (F^{-1})^H (chi x ky)
        let y = crate::linalg::adjoint(chi, ky, &f);
        let y_inv = crate::linalg::adjoint(ky, chi, &f_inv);
        let yx = gemm(ky, chi, kx, &y, &x);
        let svd = svd_slice(ky, kx, &yx, usize::MAX, 0.0)?;
        let k = svd.singular_values.len();
        let lam_norm = svd.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt();
        let lam: Vec<f64> = svd.singular_values.iter().map(|s| s / lam_norm).collect();
        // C_new = V X^{-1} C Y^{-1} U
        let v_xinv = gemm(k, kx, chi, &svd.right.data, &x_inv);
        let yinv_u = gemm(chi, ky, k, &y_inv, &svd.left.data);
        let mut c_new = gemm(k, chi, dd * chi, &v_xinv, &c);
        // right multiply every physical slice
        c_new = gemm(k * dd, chi, k, &c_new, &yinv_u);
        // bond BA Schmidt values on the right of the cell
        let mut c_new_r = c_new;
        for row in c_new_r.chunks_exact_mut(k) {
            for (v, &l) in row.iter_mut().zip(&lam) {
                *v = v.scale(l);
            }
        }
        // θ = Λ C Λ as (k·4) x (4·k)
        let mut theta = c_new_r.clone();
        scale_rows(&mut theta, k, &lam);
        let tn = vec_norm(&theta);
        for v in theta.iter_mut().chain(c_new_r.iter_mut()) {
            *v = v.scale(1.0 / tn);
        }
        let d = 4;
        let s2 = svd_slice(k * d, d * k, &theta, trunc.chi_max, trunc.cutoff)?;
        let kept: f64 = s2.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt();
        let m = s2.singular_values.len();
        let right = s2.right.data;
        let mut left = gemm_op(k * d, d * k, m, &c_new_r, Op::N, &right, Op::H);
        for v in &mut left {
            *v = v.scale(1.0 / kept);
        }
        self.lambda = [s2.singular_values.iter().map(|s| s / kept).collect(), lam];
        self.b = [
            DenseTensor::new(vec![k, d, m], left)?,
            DenseTensor::new(vec![m, d, k], right)?,
        ];
        self.canonical = true;
        Ok(())
    }

    /// Trace transfer matrix of one cell, `(Σ t B_A)(Σ t B_B)`.
    fn trace_transfer(&self, first: &[T], second: &[T]) -> Vec<T> {
        let [a, _, m] = dims3(&self.b[0]);
        let [_, _, e] = dims3(&self.b[1]);
        let ta = contract_phys(&self.b[0], first);
        let tb = contract_phys(&self.b[1], second);
        gemm(a, m, e, &ta, &tb)
    }

    fn trace_fixed_points(&self) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
        let chi = self.lambda[1].len();
        let m = self.trace_transfer(&self.trace_vec, &self.trace_vec);
        let start = vec![T::one(); chi];
        let r = power_iterate(start.clone(), REORTH_TOLERANCE, |v| gemm(chi, chi, 1, &m, v))?;
        let l = power_iterate(start, REORTH_TOLERANCE, |v| gemm(1, chi, chi, v, &m))?;
        Ok((l, r, m))
    }

    /// `Tr(op ρ)` on site A (`site` even) or B (`site` odd), normalized by
    /// the trace per cell.
    pub fn local_expectation(&self, op: &[C64; 4], site: usize) -> Result<f64> {
        let o = coeffs::<T>(self.basis.observable_vector(op), "observable vector")?;
        let (l, r, m) = self.trace_fixed_points()?;
        let mo = if site % 2 == 0 {
            self.trace_transfer(&o, &self.trace_vec)
        } else {
            self.trace_transfer(&self.trace_vec, &o)
        };
        let chi = r.len();
        let num = gemm(1, chi, 1, &l, &gemm(chi, chi, 1, &mo, &r))[0];
        let den = gemm(1, chi, 1, &l, &gemm(chi, chi, 1, &m, &r))[0];
        Ok((num.to_c64() / den.to_c64()).re)
    }

    /// `⟨σᶻ⟩` on sites A and B.
    pub fn magnetization(&self) -> Result<[f64; 2]> {
        let z = crate::models::SIGMA_Z;
        Ok([self.local_expectation(&z, 0)?, self.local_expectation(&z, 1)?])
    }
}

/// Infinite-chain superoperator TEBD driver with periodic
/// reorthogonalization.
#[derive(Debug, Clone)]
pub struct ItebdEvolver<T> {
    params: ModelParams,
    basis: OperatorBasis,
    dt: f64,
    trunc: Truncation,
    order: TrotterOrder,
    /// Steps between reorthogonalizations.
    pub reorth_interval: usize,
    pub reorth_tolerance: f64,
    cache: Vec<(f64, SuperGate<T>)>,
}

impl<T: Scalar> ItebdEvolver<T> {
    pub fn new(params: ModelParams, basis: OperatorBasis, dt: f64, trunc: Truncation, order: TrotterOrder) -> Result<Self> {
        params.validate()?;
        if params.length != ChainLength::Infinite {
            return Err(Error::InvalidParams("iTEBD needs an infinite chain".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            params,
            basis,
            dt,
            trunc,
            order,
            reorth_interval: REORTH_INTERVAL,
            reorth_tolerance: REORTH_TOLERANCE,
            cache: Vec::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn gate(&mut self, fraction: f64) -> Result<SuperGate<T>> {
        if let Some((_, g)) = self.cache.iter().find(|(f, _)| (f - fraction).abs() < 1e-13) {
            return Ok(g.clone());
        }
        let g = build_super_gate::<T>(&self.params, &self.basis, fraction * self.dt, BondWeights::BULK)?;
        self.cache.push((fraction, g.clone()));
        Ok(g)
    }

    /// Advances by `n_steps`, reorthogonalizing every `reorth_interval` steps
    /// and at the end. Returns the summed discarded weight.
    pub fn advance(&mut self, state: &mut ItebdState<T>, n_steps: usize) -> Result<f64> {
        let mut total = 0.0;
        let mut done = 0;
        let block = self.reorth_interval.max(1);
        while done < n_steps {
            let k = block.min(n_steps - done);
            total += itebd_step(state, self, k)?;
            done += k;
            state.time += k as f64 * self.dt;
        }
        if !state.canonical {
            state.reorthogonalize(self.trunc, self.reorth_tolerance)?;
        }
        Ok(total)
    }
}

/// Applies `n_steps` fused Trotter steps to the cell and reorthogonalizes.
pub fn itebd_step<T: Scalar>(state: &mut ItebdState<T>, evolver: &mut ItebdEvolver<T>, n_steps: usize) -> Result<f64> {
    let mut total = 0.0;
    for layer in fused_layers(evolver.order, n_steps) {
        let g = evolver.gate(layer.fraction)?;
        total += state.apply_gate(&g, CellBond::of(layer.parity), evolver.trunc)?;
    }
    state.reorthogonalize(evolver.trunc, evolver.reorth_tolerance)?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SIGMA_Z;

    fn inf(gp: f64, gm: f64, gz: f64) -> ModelParams {
        ModelParams::new(1.0, 1.0, gp, gm, gz, ChainLength::Infinite).unwrap()
    }

    #[test]
    fn neel_cell() {
        let s = ItebdState::<f64>::neel(OperatorBasis::pauli()).unwrap();
        assert_eq!(s.magnetization().unwrap(), [1.0, -1.0]);
        assert_eq!(s.operator_entanglement(CellBond::Ab), 0.0);
    }

    #[test]
    fn zero_time_step_is_identity() {
        let p = inf(0.5, 0.5, 0.0);
        let mut s = ItebdState::<f64>::neel(OperatorBasis::pauli()).unwrap();
        let mut ev = ItebdEvolver::new(p, OperatorBasis::pauli(), 0.1, Truncation::chi(16), TrotterOrder::Fourth).unwrap();
        ev.advance(&mut s, 3).unwrap();
        let before = s.clone();
        let g = build_super_gate::<f64>(&p, &OperatorBasis::pauli(), 0.0, BondWeights::BULK).unwrap();
        s.apply_gate(&g, CellBond::Ab, Truncation::chi(16)).unwrap();
        s.apply_gate(&g, CellBond::Ba, Truncation::chi(16)).unwrap();
        s.reorthogonalize(Truncation::chi(16), 1e-12).unwrap();
        let a = before.magnetization().unwrap();
        let b = s.magnetization().unwrap();
        assert!((a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-10);
        for (x, y) in before.lambda[0].iter().zip(&s.lambda[0]) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn dissipation_only_decay() {
        // J = 0: each spin relaxes independently, ⟨σᶻ⟩ = ±e^{-2γt}
        let p = ModelParams::new(0.0, 0.0, 0.5, 0.5, 0.0, ChainLength::Infinite).unwrap();
        let mut s = ItebdState::<f64>::neel(OperatorBasis::pauli()).unwrap();
        let mut ev = ItebdEvolver::new(p, OperatorBasis::pauli(), 0.1, Truncation::chi(8), TrotterOrder::Fourth).unwrap();
        ev.advance(&mut s, 10).unwrap();
        let m = s.magnetization().unwrap();
        let want = (-1.0f64).exp();
        assert!((m[0] - want).abs() < 1e-10, "{m:?}");
        assert!((m[1] + want).abs() < 1e-10);
        assert!(s.local_expectation(&SIGMA_Z, 2).unwrap() > 0.0);
    }

    #[test]
    fn canonical_after_reorthogonalization() {
        let p = inf(0.0, 0.0, 1.0);
        let mut s = ItebdState::<f64>::neel(OperatorBasis::pauli()).unwrap();
        let mut ev = ItebdEvolver::new(p, OperatorBasis::pauli(), 0.1, Truncation::chi(16), TrotterOrder::Fourth).unwrap();
        ev.reorth_interval = 4;
        ev.advance(&mut s, 10).unwrap();
        assert!(s.is_canonical());
        // right canonical: Σ_s B_s B_s^H = 1 for the cell
        let (chi, c) = s.cell();
        let id = gemm_op(chi, 16 * chi, chi, &c, Op::N, &c, Op::H);
        for i in 0..chi {
            for j in 0..chi {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[i * chi + j] - want).abs() < 1e-8);
            }
        }
        for l in &s.lambda {
            let n: f64 = l.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-10);
        }
        assert!(s.operator_entanglement(CellBond::Ab) > 0.0);
    }
}
