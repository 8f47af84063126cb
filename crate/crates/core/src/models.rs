//! XXZ chain with local emission, absorption and dephasing.
//!
//! Local basis: index 0 is spin up, index 1 is spin down, so
//! `σᶻ = diag(1, -1)`, `σ⁺ = |↑⟩⟨↓|` and `σ⁻ = |↓⟩⟨↑|`. Two-site operators
//! act on `{↑↑, ↑↓, ↓↑, ↓↓}` with the left site as the major index.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, unitary_exp};
use crate::tensor::{Scalar, C64};

const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

const O: C64 = c(0.0, 0.0);
const I1: C64 = c(1.0, 0.0);

pub const IDENTITY: [C64; 4] = [I1, O, O, I1];
pub const SIGMA_X: [C64; 4] = [O, I1, I1, O];
pub const SIGMA_Y: [C64; 4] = [O, c(0.0, -1.0), c(0.0, 1.0), O];
pub const SIGMA_Z: [C64; 4] = [I1, O, O, c(-1.0, 0.0)];
pub const SIGMA_PLUS: [C64; 4] = [O, I1, O, O];
pub const SIGMA_MINUS: [C64; 4] = [O, O, I1, O];
/// Projector on spin up.
pub const PROJ_UP: [C64; 4] = [I1, O, O, O];
/// Projector on spin down.
pub const PROJ_DOWN: [C64; 4] = [O, O, O, I1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainLength {
    Finite(usize),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub j: f64,
    pub delta: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma_z: f64,
    pub length: ChainLength,
}

impl ModelParams {
    pub fn new(
        j: f64,
        delta: f64,
        gamma_plus: f64,
        gamma_minus: f64,
        gamma_z: f64,
        length: ChainLength,
    ) -> Result<Self> {
        let p = Self {
            j,
            delta,
            gamma_plus,
            gamma_minus,
            gamma_z,
            length,
        };
        p.validate()?;
        Ok(p)
    }

    /// Isotropic chain (`Δ = J = 1`) with the given rates.
    pub fn heisenberg(n_sites: usize, gamma_plus: f64, gamma_minus: f64, gamma_z: f64) -> Result<Self> {
        Self::new(1.0, 1.0, gamma_plus, gamma_minus, gamma_z, ChainLength::Finite(n_sites))
    }

    pub fn with_length(mut self, length: ChainLength) -> Result<Self> {
        self.length = length;
        self.validate()?;
        Ok(self)
    }

    /// Lists every violated constraint.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [("j", self.j), ("delta", self.delta)] {
            if !v.is_finite() {
                out.push(format!("{name} must be finite"));
            }
        }
        for (name, v) in [
            ("gamma_plus", self.gamma_plus),
            ("gamma_minus", self.gamma_minus),
            ("gamma_z", self.gamma_z),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if let ChainLength::Finite(n) = self.length {
            if n < 2 || n % 2 != 0 {
                out.push(format!("n_sites must be even and at least 2, got {n}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v.join("; ")))
        }
    }

    pub fn n_sites(&self) -> Option<usize> {
        match self.length {
            ChainLength::Finite(n) => Some(n),
            ChainLength::Infinite => None,
        }
    }

    pub fn is_dissipative(&self) -> bool {
        self.gamma_plus > 0.0 || self.gamma_minus > 0.0 || self.gamma_z > 0.0
    }

    /// Two-site Hamiltonian `-J/4 (σˣσˣ + σʸσʸ) + Δ/4 σᶻσᶻ`.
    pub fn bond_hamiltonian(&self) -> [C64; 16] {
        let mut h = [O; 16];
        let zz = self.delta / 4.0;
        h[0] = c(zz, 0.0);
        h[5] = c(-zz, 0.0);
        h[10] = c(-zz, 0.0);
        h[15] = c(zz, 0.0);
        h[6] = c(-self.j / 2.0, 0.0);
        h[9] = c(-self.j / 2.0, 0.0);
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// `√γ₊ σ⁺`
    Plus,
    /// `√γ₋ σ⁻`
    Minus,
    /// `√γ_z σᶻ`
    Dephasing,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Plus, Channel::Minus, Channel::Dephasing];

    pub fn rate(self, p: &ModelParams) -> f64 {
        match self {
            Channel::Plus => p.gamma_plus,
            Channel::Minus => p.gamma_minus,
            Channel::Dephasing => p.gamma_z,
        }
    }

    /// Bare operator without the rate.
    pub fn operator(self) -> [C64; 4] {
        match self {
            Channel::Plus => SIGMA_PLUS,
            Channel::Minus => SIGMA_MINUS,
            Channel::Dephasing => SIGMA_Z,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Channel::Plus => "plus",
            Channel::Minus => "minus",
            Channel::Dephasing => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpOp {
    pub site: usize,
    pub channel: Channel,
    pub rate: f64,
    /// `√rate` times the channel operator, row-major 2x2.
    pub matrix: [C64; 4],
}

/// Channels with nonzero rate, in the order `σ⁺, σ⁻, σᶻ`.
pub fn active_channels(p: &ModelParams) -> Vec<Channel> {
    Channel::ALL
        .into_iter()
        .filter(|ch| ch.rate(p) > 0.0)
        .collect()
}

/// Every per-site jump operator with a nonzero rate, grouped by site.
pub fn build_jump_ops(p: &ModelParams, n_sites: usize) -> Vec<JumpOp> {
    let chans = active_channels(p);
    let mut out = Vec::with_capacity(n_sites * chans.len());
    for site in 0..n_sites {
        for &ch in &chans {
            let rate = ch.rate(p);
            let s = rate.sqrt();
            let mut m = ch.operator();
            for v in &mut m {
                *v *= s;
            }
            out.push(JumpOp {
                site,
                channel: ch,
                rate,
                matrix: m,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisFlavor {
    /// `{𝟙, σˣ, σʸ, σᶻ}/√2`; coefficients of Hermitian operators are real.
    Pauli,
    /// `{|↑⟩⟨↑|, |↑⟩⟨↓|, |↓⟩⟨↑|, |↓⟩⟨↓|}`.
    Linearized,
}

/// Orthonormal basis `Tr(ê_i ê_j†) = δ_ij` of 2x2 operators.
///
/// An operator `X` is stored through its coefficients `r_i = Tr(ê_i† X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBasis {
    pub flavor: BasisFlavor,
    pub elements: [[C64; 4]; 4],
}

impl OperatorBasis {
    pub fn new(flavor: BasisFlavor) -> Self {
        let elements = match flavor {
            BasisFlavor::Pauli => {
                let s = core::f64::consts::FRAC_1_SQRT_2;
                [IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z].map(|m| m.map(|v| v * s))
            }
            BasisFlavor::Linearized => {
                let mut e = [[O; 4]; 4];
                for (k, el) in e.iter_mut().enumerate() {
                    el[k] = I1;
                }
                e
            }
        };
        Self { flavor, elements }
    }

    pub fn pauli() -> Self {
        Self::new(BasisFlavor::Pauli)
    }

    pub fn linearized() -> Self {
        Self::new(BasisFlavor::Linearized)
    }

    /// `r_i = Tr(ê_i† x)`.
    pub fn coefficients(&self, x: &[C64; 4]) -> [C64; 4] {
        self.elements.map(|e| trace_adj_prod(2, &e, x))
    }

    /// `o_i = Tr(op ê_i)`, so that `Tr(op X) = Σ o_i r_i`.
    pub fn observable_vector(&self, op: &[C64; 4]) -> [C64; 4] {
        self.elements.map(|e| trace(2, &mat_mul(2, op, &e)))
    }

    /// Coefficients of the identity; contracting with them gives the trace.
    pub fn trace_vector(&self) -> [C64; 4] {
        self.observable_vector(&IDENTITY)
    }

    pub fn operator_from(&self, r: &[C64; 4]) -> [C64; 4] {
        let mut x = [O; 4];
        for (e, &ri) in self.elements.iter().zip(r) {
            for (xv, ev) in x.iter_mut().zip(e) {
                *xv += ri * ev;
            }
        }
        x
    }

    /// Coefficients of the spin-up and spin-down projectors.
    pub fn neel_site(&self, up: bool) -> [C64; 4] {
        self.coefficients(if up { &PROJ_UP } else { &PROJ_DOWN })
    }

    /// Largest deviation of `Tr(ê_i ê_j†)` from `δ_ij`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.elements.iter().enumerate() {
            for (j, b) in self.elements.iter().enumerate() {
                let v = trace_adj_prod(2, b, a);
                let want = if i == j { I1 } else { O };
                worst = worst.max((v - want).norm());
            }
        }
        worst
    }
}

pub(crate) fn mat_mul(n: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![O; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == O {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

pub(crate) fn trace(n: usize, a: &[C64]) -> C64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

/// `Tr(a† b)`.
pub(crate) fn trace_adj_prod(n: usize, a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).take(n * n).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn dagger(n: usize, a: &[C64]) -> Vec<C64> {
    crate::linalg::adjoint(n, n, a)
}

pub(crate) fn kron2(a: &[C64; 4], b: &[C64; 4]) -> [C64; 16] {
    let mut out = [O; 16];
    for i1 in 0..2 {
        for j1 in 0..2 {
            for i2 in 0..2 {
                for j2 in 0..2 {
                    out[(2 * i1 + i2) * 4 + 2 * j1 + j2] = a[i1 * 2 + j1] * b[i2 * 2 + j2];
                }
            }
        }
    }
    out
}

/// `𝒟[L] x = L x L† - ½{L†L, x}` on `n x n` matrices.
pub(crate) fn dissipator(n: usize, l: &[C64], x: &[C64]) -> Vec<C64> {
    let ld = dagger(n, l);
    let ldl = mat_mul(n, &ld, l);
    let jump = mat_mul(n, &mat_mul(n, l, x), &ld);
    let a = mat_mul(n, &ldl, x);
    let b = mat_mul(n, x, &ldl);
    jump.iter()
        .zip(a.iter().zip(&b))
        .map(|(j, (p, q))| j - (p + q) * 0.5)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryGate {
    /// `exp(-i h₂ dt)`, row-major 4x4.
    pub matrix: [C64; 16],
    pub dt: f64,
}

pub fn build_xxz_gate(p: &ModelParams, dt: f64) -> Result<UnitaryGate> {
    let m = unitary_exp(4, &p.bond_hamiltonian(), dt)?;
    let mut matrix = [O; 16];
    matrix.copy_from_slice(&m);
    Ok(UnitaryGate { matrix, dt })
}

/// Share of each site's dissipator carried by one bond gate.
///
/// Bulk bonds split every site term evenly between the two bonds touching
/// it; the first and last bond carry the outer sites' term in full.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondWeights {
    pub left: f64,
    pub right: f64,
}

impl BondWeights {
    pub const BULK: BondWeights = BondWeights {
        left: 0.5,
        right: 0.5,
    };

    pub fn for_bond(bond: usize, n_sites: usize) -> Self {
        let last = n_sites.saturating_sub(2);
        Self {
            left: if bond == 0 { 1.0 } else { 0.5 },
            right: if bond == last { 1.0 } else { 0.5 },
        }
    }
}

/// Matrix of a linear map on two-site operators, in the product basis:
/// `M[(i1 i2), (k1 k2)] = Tr[(ê_i1 ⊗ ê_i2)† f(ê_k1 ⊗ ê_k2)]`.
pub fn superoperator_matrix(basis: &OperatorBasis, f: impl Fn(&[C64; 16]) -> Vec<C64>) -> Vec<C64> {
    let prods: Vec<[C64; 16]> = (0..16)
        .map(|k| kron2(&basis.elements[k / 4], &basis.elements[k % 4]))
        .collect();
    let mut m = vec![O; 256];
    for (k, ek) in prods.iter().enumerate() {
        let y = f(ek);
        for (i, ei) in prods.iter().enumerate() {
            m[i * 16 + k] = trace_adj_prod(4, ei, &y);
        }
    }
    m
}

/// Generator `A` of the two-site Lindblad evolution in the given basis.
pub fn super_generator(p: &ModelParams, basis: &OperatorBasis, weights: BondWeights) -> Vec<C64> {
    let h = p.bond_hamiltonian();
    let mut ops: Vec<([C64; 16], f64)> = Vec::new();
    for ch in active_channels(p) {
        let rate = ch.rate(p);
        let op = ch.operator();
        ops.push((kron2(&op, &IDENTITY), rate * weights.left));
        ops.push((kron2(&IDENTITY, &op), rate * weights.right));
    }
    superoperator_matrix(basis, |x| {
        let hx = mat_mul(4, &h, x);
        let xh = mat_mul(4, x, &h);
        let mut y: Vec<C64> = hx
            .iter()
            .zip(&xh)
            .map(|(a, b)| (a - b) * c(0.0, -1.0))
            .collect();
        for (l, w) in &ops {
            if *w == 0.0 {
                continue;
            }
            for (yv, d) in y.iter_mut().zip(dissipator(4, l, x)) {
                *yv += d * *w;
            }
        }
        y
    })
}

/// Two-site superoperator gate `exp(A dt)` acting on coefficient pairs
/// `(i_n, i_{n+1})` flattened as `4 i_n + i_{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperGate<T> {
    pub matrix: Vec<T>,
    pub dt: f64,
    pub flavor: BasisFlavor,
}

pub fn build_super_gate<T: Scalar>(
    p: &ModelParams,
    basis: &OperatorBasis,
    dt: f64,
    weights: BondWeights,
) -> Result<SuperGate<T>> {
    let gen: Vec<C64> = super_generator(p, basis, weights)
        .into_iter()
        .map(|v| v * dt)
        .collect();
    let g = expm(16, &gen);
    if T::REAL {
        let worst = g.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        if worst > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "{:?} basis gives complex gate entries (|Im| = {worst:e}); use complex storage",
                basis.flavor
            )));
        }
    }
    Ok(SuperGate {
        matrix: g.into_iter().map(T::from_c64).collect(),
        dt,
        flavor: basis.flavor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn params_validation_lists_everything() {
        let err = ModelParams::new(1.0, 1.0, -1.0, f64::NAN, 0.0, ChainLength::Finite(3)).unwrap_err();
        let Error::InvalidParams(msg) = err else {
            panic!("wrong error kind")
        };
        assert!(msg.contains("gamma_plus") && msg.contains("gamma_minus") && msg.contains("n_sites"));
        assert!(ModelParams::new(1.0, 0.5, 0.0, 0.0, 1.0, ChainLength::Infinite).is_ok());
    }

    #[test]
    fn zero_time_gate_is_identity() {
        let p = ModelParams::heisenberg(2, 0.0, 0.0, 0.0).unwrap();
        let g = build_xxz_gate(&p, 0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { I1 } else { O };
                assert!(close(g.matrix[i * 4 + j], want, 1e-14));
            }
        }
    }

    #[test]
    fn flip_flop_eigenvalues() {
        let p = ModelParams::heisenberg(2, 0.0, 0.0, 0.0).unwrap();
        let h = p.bond_hamiltonian();
        let block = [h[5], h[6], h[9], h[10]];
        let (vals, _) = crate::linalg::herm_eigen(2, &block).unwrap();
        assert!((vals[0] - (-0.25 - 0.5)).abs() < 1e-14);
        assert!((vals[1] - (-0.25 + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn gate_semigroup_and_unitarity() {
        let p = ModelParams::new(1.0, 0.7, 0.0, 0.0, 0.0, ChainLength::Finite(2)).unwrap();
        let g1 = build_xxz_gate(&p, 0.3).unwrap();
        let g2 = build_xxz_gate(&p, 0.6).unwrap();
        let sq = mat_mul(4, &g1.matrix, &g1.matrix);
        let uu = mat_mul(4, &dagger(4, &g1.matrix), &g1.matrix);
        for i in 0..16 {
            assert!(close(sq[i], g2.matrix[i], 1e-12));
            let want = if i % 5 == 0 { I1 } else { O };
            assert!(close(uu[i], want, 1e-12));
        }
    }

    #[test]
    fn jump_list_contents() {
        let none = ModelParams::heisenberg(4, 0.0, 0.0, 0.0).unwrap();
        assert!(build_jump_ops(&none, 4).is_empty());

        let p = ModelParams::heisenberg(2, 0.0, 1.0, 2.0).unwrap();
        let ops = build_jump_ops(&p, 2);
        assert_eq!(ops.len(), 4);
        let lm = &ops[0];
        assert_eq!(lm.channel, Channel::Minus);
        let ldl = mat_mul(2, &dagger(2, &lm.matrix), &lm.matrix);
        assert_eq!(ldl, PROJ_UP.to_vec());
        let lz = &ops[1];
        let zz = mat_mul(2, &dagger(2, &lz.matrix), &lz.matrix);
        for (a, b) in zz.iter().zip(IDENTITY) {
            assert!(close(*a, b * 2.0, 1e-14));
        }
    }

    #[test]
    fn bases_are_orthonormal() {
        for b in [OperatorBasis::pauli(), OperatorBasis::linearized()] {
            assert!(b.orthonormality_error() < 1e-14);
            for x in [SIGMA_X, SIGMA_Y, PROJ_UP, SIGMA_PLUS] {
                let back = b.operator_from(&b.coefficients(&x));
                for (u, v) in back.iter().zip(x) {
                    assert!(close(*u, v, 1e-14));
                }
            }
        }
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let p = OperatorBasis::pauli();
        let up = p.neel_site(true);
        let down = p.neel_site(false);
        assert!(close(up[0], c(s, 0.0), 1e-15) && close(up[3], c(s, 0.0), 1e-15));
        assert!(close(down[0], c(s, 0.0), 1e-15) && close(down[3], c(-s, 0.0), 1e-15));
        let tv = p.trace_vector();
        assert!(close(tv[0], c(2f64.sqrt(), 0.0), 1e-15));
        assert_eq!(OperatorBasis::linearized().trace_vector(), [I1, O, O, I1]);
    }

    #[test]
    fn pauli_gate_is_real() {
        let p = ModelParams::new(1.0, 1.3, 0.4, 0.9, 0.5, ChainLength::Finite(4)).unwrap();
        let g: SuperGate<f64> = build_super_gate(&p, &OperatorBasis::pauli(), 0.2, BondWeights::BULK).unwrap();
        assert_eq!(g.matrix.len(), 256);
        assert!(build_super_gate::<f64>(&p, &OperatorBasis::linearized(), 0.2, BondWeights::BULK).is_err());
        assert!(build_super_gate::<C64>(&p, &OperatorBasis::linearized(), 0.2, BondWeights::BULK).is_ok());
    }

    #[test]
    fn boundary_weights() {
        assert_eq!(BondWeights::for_bond(0, 4), BondWeights { left: 1.0, right: 0.5 });
        assert_eq!(BondWeights::for_bond(1, 4), BondWeights::BULK);
        assert_eq!(BondWeights::for_bond(2, 4), BondWeights { left: 0.5, right: 1.0 });
        assert_eq!(BondWeights::for_bond(0, 2), BondWeights { left: 1.0, right: 1.0 });
    }
}
