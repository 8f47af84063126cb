//! Brute-force reference: dense master-equation integration, dense
//! trajectories and entropies from direct Schmidt decompositions.
//!
//! A density matrix `ρ` of `n` spins is handled as a vector over `2n`
//! qubits: qubits `0..n` index the rows, qubits `n..2n` the columns. Left
//! multiplication by a local operator `O` acts on a row qubit; right
//! multiplication acts with `Oᵀ` on the matching column qubit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{herm_fn, unitary_exp};
use crate::models::{active_channels, build_xxz_gate, Channel, ModelParams, SIGMA_Z};
use crate::schmidt_entropy;
use crate::tensor::{svd_slice, C64};
use crate::trajectory::{decide_site_jump, JumpEvent, SiteDecision};
use crate::trotter::{step_layers, TrotterOrder};

/// Largest chain evolved as a density matrix.
pub const MAX_DENSITY_SITES: usize = 8;
/// Largest chain evolved as a state vector.
pub const MAX_PURE_SITES: usize = 10;

const Z: C64 = C64::new(0.0, 0.0);

fn check_n(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        Err(Error::OracleTooLarge { n, max })
    } else {
        Ok(())
    }
}

/// Applies a `2^k x 2^k` operator on qubits `first..first + k` of a vector
/// over `n_qubits` qubits (qubit 0 most significant).
pub(crate) fn apply_local(v: &[C64], n_qubits: usize, first: usize, k: usize, op: &[C64]) -> Vec<C64> {
    let m = 1usize << k;
    let right = 1usize << (n_qubits - first - k);
    let left = 1usize << first;
    let mut out = vec![Z; v.len()];
    let mut buf = vec![Z; m];
    for l in 0..left {
        for r in 0..right {
            let base = l * m * right + r;
            for (s, b) in buf.iter_mut().enumerate() {
                *b = v[base + s * right];
            }
            for so in 0..m {
                let row = &op[so * m..(so + 1) * m];
                let mut acc = Z;
                for (o, b) in row.iter().zip(&buf) {
                    acc += o * b;
                }
                out[base + so * right] = acc;
            }
        }
    }
    out
}

fn transpose(m: usize, op: &[C64]) -> Vec<C64> {
    let mut t = vec![Z; m * m];
    for i in 0..m {
        for j in 0..m {
            t[j * m + i] = op[i * m + j];
        }
    }
    t
}

fn conj(op: &[C64]) -> Vec<C64> {
    op.iter().map(|v| v.conj()).collect()
}

fn axpy(acc: &mut [C64], a: C64, x: &[C64]) {
    for (y, v) in acc.iter_mut().zip(x) {
        *y += a * v;
    }
}

/// Dense density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDensity {
    pub n_sites: usize,
    /// Row-major `2^n x 2^n`.
    pub rho: Vec<C64>,
}

/// Dense pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseKet {
    pub n_sites: usize,
    pub psi: Vec<C64>,
}

fn neel_index(n: usize) -> usize {
    // spin down (bit 1) on odd sites
    (0..n).filter(|k| k % 2 == 1).map(|k| 1usize << (n - 1 - k)).sum()
}

impl DenseKet {
    pub fn neel(n: usize) -> Result<Self> {
        check_n(n, MAX_PURE_SITES)?;
        let mut psi = vec![Z; 1 << n];
        psi[neel_index(n)] = C64::new(1.0, 0.0);
        Ok(Self { n_sites: n, psi })
    }

    /// Basis state from spins (`true` = up), site 0 first.
    pub fn product(spins: &[bool]) -> Result<Self> {
        let n = spins.len();
        check_n(n, MAX_PURE_SITES)?;
        let idx = spins
            .iter()
            .enumerate()
            .filter(|(_, &up)| !up)
            .map(|(k, _)| 1usize << (n - 1 - k))
            .sum::<usize>();
        let mut psi = vec![Z; 1 << n];
        psi[idx] = C64::new(1.0, 0.0);
        Ok(Self { n_sites: n, psi })
    }

    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if n < 1e-14 {
            return Err(Error::VanishingNorm(n));
        }
        for v in &mut self.psi {
            *v /= n;
        }
        Ok(n)
    }

    pub fn apply_site(&mut self, site: usize, op: &[C64; 4]) {
        self.psi = apply_local(&self.psi, self.n_sites, site, 1, op);
    }

    pub fn apply_bond(&mut self, bond: usize, gate: &[C64; 16]) {
        self.psi = apply_local(&self.psi, self.n_sites, bond, 2, gate);
    }

    pub fn expectation(&self, op: &[C64; 4], site: usize) -> f64 {
        let o = apply_local(&self.psi, self.n_sites, site, 1, op);
        let num: C64 = self.psi.iter().zip(&o).map(|(a, b)| a.conj() * b).sum();
        num.re / self.norm().powi(2)
    }

    /// Single-site reduced density matrix.
    pub fn reduced_density(&self, site: usize) -> [C64; 4] {
        let stride = 1usize << (self.n_sites - 1 - site);
        let mut rho = [Z; 4];
        for (idx, v) in self.psi.iter().enumerate() {
            if (idx / stride) % 2 == 0 {
                let w = self.psi[idx + stride];
                rho[0] += v * v.conj();
                rho[1] += v * w.conj();
                rho[2] += w * v.conj();
                rho[3] += w * w.conj();
            }
        }
        let tr = rho[0].re + rho[3].re;
        rho.map(|v| v / tr)
    }

    pub fn to_density(&self) -> DenseDensity {
        let dim = self.psi.len();
        let n2 = self.norm().powi(2);
        let mut rho = vec![Z; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                rho[i * dim + j] = self.psi[i] * self.psi[j].conj() / n2;
            }
        }
        DenseDensity {
            n_sites: self.n_sites,
            rho,
        }
    }
}

impl DenseDensity {
    pub fn neel(n: usize) -> Result<Self> {
        check_n(n, MAX_DENSITY_SITES)?;
        Ok(DenseKet::neel(n)?.to_density())
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_n(n, MAX_DENSITY_SITES)?;
        let dim = 1usize << n;
        let mut rho = vec![Z; dim * dim];
        for i in 0..dim {
            rho[i * dim + i] = C64::new(1.0 / dim as f64, 0.0);
        }
        Ok(Self { n_sites: n, rho })
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|i| self.rho[i * d + i]).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.rho[i * d + j] - self.rho[j * d + i].conj()).norm());
            }
        }
        worst
    }

    /// `Tr(op_site ρ)`.
    pub fn expectation(&self, op: &[C64; 4], site: usize) -> f64 {
        let n = self.n_sites;
        let o = apply_local(&self.rho, 2 * n, site, 1, op);
        let d = self.dim();
        (0..d).map(|i| o[i * d + i]).sum::<C64>().re
    }

    pub fn magnetization(&self) -> Vec<f64> {
        (0..self.n_sites).map(|k| self.expectation(&SIGMA_Z, k)).collect()
    }

    /// Frobenius distance to another density matrix.
    pub fn distance(&self, other: &Self) -> f64 {
        self.rho
            .iter()
            .zip(&other.rho)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Open-chain Hamiltonian as a dense matrix.
pub fn dense_hamiltonian(p: &ModelParams, n: usize) -> Result<Vec<C64>> {
    check_n(n, MAX_PURE_SITES)?;
    let dim = 1usize << n;
    let h2 = p.bond_hamiltonian();
    let mut h = vec![Z; dim * dim];
    for col in 0..dim {
        let mut e = vec![Z; dim];
        e[col] = C64::new(1.0, 0.0);
        let mut acc = vec![Z; dim];
        for b in 0..n.saturating_sub(1) {
            axpy(&mut acc, C64::new(1.0, 0.0), &apply_local(&e, n, b, 2, &h2));
        }
        for (row, v) in acc.into_iter().enumerate() {
            h[row * dim + col] = v;
        }
    }
    Ok(h)
}

/// Right-hand side of the master equation.
pub fn lindblad_rhs(p: &ModelParams, n: usize, rho: &[C64]) -> Vec<C64> {
    let q = 2 * n;
    let h2 = p.bond_hamiltonian();
    let h2t = transpose(4, &h2);
    let mut out = vec![Z; rho.len()];
    let mi = C64::new(0.0, -1.0);
    for b in 0..n.saturating_sub(1) {
        axpy(&mut out, mi, &apply_local(rho, q, b, 2, &h2));
        axpy(&mut out, -mi, &apply_local(rho, q, n + b, 2, &h2t));
    }
    for ch in active_channels(p) {
        let rate = ch.rate(p);
        let l = ch.operator();
        let lconj = conj(&l);
        let ld = crate::linalg::adjoint(2, 2, &l);
        let ldl = crate::models::mat_mul(2, &ld, &l);
        let ldl_t = transpose(2, &ldl);
        for k in 0..n {
            let jump = apply_local(&apply_local(rho, q, k, 1, &l), q, n + k, 1, &lconj);
            axpy(&mut out, C64::new(rate, 0.0), &jump);
            axpy(&mut out, C64::new(-0.5 * rate, 0.0), &apply_local(rho, q, k, 1, &ldl));
            axpy(&mut out, C64::new(-0.5 * rate, 0.0), &apply_local(rho, q, n + k, 1, &ldl_t));
        }
    }
    out
}

fn rk4_step(p: &ModelParams, n: usize, rho: &[C64], h: f64) -> Vec<C64> {
    let add = |a: &[C64], b: &[C64], s: f64| -> Vec<C64> { a.iter().zip(b).map(|(x, y)| x + y * s).collect() };
    let k1 = lindblad_rhs(p, n, rho);
    let k2 = lindblad_rhs(p, n, &add(rho, &k1, h / 2.0));
    let k3 = lindblad_rhs(p, n, &add(rho, &k2, h / 2.0));
    let k4 = lindblad_rhs(p, n, &add(rho, &k3, h));
    rho.iter()
        .enumerate()
        .map(|(i, r)| r + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0))
        .collect()
}

/// Step-size control of the dense integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleTolerance {
    /// Largest accepted entrywise difference between one full and two half
    /// steps.
    pub local: f64,
    /// Abort when `|Tr ρ − 1|` exceeds this.
    pub trace_drift: f64,
}

impl Default for OracleTolerance {
    fn default() -> Self {
        Self {
            local: 1e-9,
            trace_drift: 1e-7,
        }
    }
}

/// Integrates the master equation with RK4 and step-doubling control,
/// calling `observe` at `t = 0, dt, 2 dt, …` up to `t_max`.
pub fn dense_lindblad_evolve_with(
    rho0: &DenseDensity,
    p: &ModelParams,
    dt: f64,
    t_max: f64,
    tol: OracleTolerance,
    mut observe: impl FnMut(f64, &DenseDensity),
) -> Result<DenseDensity> {
    let n = rho0.n_sites;
    check_n(n, MAX_DENSITY_SITES)?;
    if !(dt > 0.0) || !(t_max >= 0.0) {
        return Err(Error::InvalidParams(format!("need dt > 0 and t_max >= 0, got {dt}, {t_max}")));
    }
    let n_out = (t_max / dt + 1e-9).floor() as usize;
    let mut state = rho0.clone();
    observe(0.0, &state);
    let mut h = dt.min(0.05);
    for k in 1..=n_out {
        let t_target = k as f64 * dt;
        let mut t = (k - 1) as f64 * dt;
        while t < t_target - 1e-14 {
            let step = h.min(t_target - t);
            let full = rk4_step(p, n, &state.rho, step);
            let half = rk4_step(p, n, &state.rho, step / 2.0);
            let two = rk4_step(p, n, &half, step / 2.0);
            let err = full
                .iter()
                .zip(&two)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            if err > tol.local && step > 1e-8 {
                h = step / 2.0;
                continue;
            }
            state.rho = two;
            t += step;
            if err < tol.local / 64.0 && step == h {
                h *= 2.0;
            }
        }
        let drift = (state.trace() - C64::new(1.0, 0.0)).norm();
        if drift > tol.trace_drift {
            return Err(Error::TraceDrift { drift, time: t_target });
        }
        observe(t_target, &state);
    }
    Ok(state)
}

/// Integrates the master equation and returns the states on the output grid.
pub fn dense_lindblad_evolve(
    rho0: &DenseDensity,
    p: &ModelParams,
    dt: f64,
    t_max: f64,
) -> Result<Vec<(f64, DenseDensity)>> {
    let mut out = Vec::new();
    dense_lindblad_evolve_with(rho0, p, dt, t_max, OracleTolerance::default(), |t, s| {
        out.push((t, s.clone()))
    })?;
    Ok(out)
}

/// Operator entanglement across the cut after `cut` sites (bits).
pub fn dense_oe(rho: &DenseDensity, cut: usize) -> Result<f64> {
    let n = rho.n_sites;
    if cut == 0 || cut >= n {
        return Err(Error::InvalidBond {
            bond: cut,
            n_bonds: n.saturating_sub(1),
        });
    }
    let dl = 1usize << cut;
    let dr = 1usize << (n - cut);
    let dim = dl * dr;
    let mut m = vec![Z; dim * dim];
    for row in 0..dim {
        let (il, ir) = (row / dr, row % dr);
        for col in 0..dim {
            let (jl, jr) = (col / dr, col % dr);
            m[(il * dl + jl) * (dr * dr) + ir * dr + jr] = rho.rho[row * dim + col];
        }
    }
    let svd = svd_slice(dl * dl, dr * dr, &m, usize::MAX, 0.0)?;
    Ok(schmidt_entropy(&svd.singular_values))
}

/// Entanglement entropy of a pure state across the cut after `cut` sites.
pub fn dense_pure_entropy(psi: &DenseKet, cut: usize) -> Result<f64> {
    let n = psi.n_sites;
    if cut == 0 || cut >= n {
        return Err(Error::InvalidBond {
            bond: cut,
            n_bonds: n.saturating_sub(1),
        });
    }
    let svd = svd_slice(1 << cut, 1 << (n - cut), &psi.psi, usize::MAX, 0.0)?;
    Ok(schmidt_entropy(&svd.singular_values))
}

/// `exp(-i H t) ψ` through a dense eigendecomposition.
pub fn exact_unitary_evolve(psi: &DenseKet, p: &ModelParams, t: f64) -> Result<DenseKet> {
    let n = psi.n_sites;
    let dim = 1usize << n;
    let h = dense_hamiltonian(p, n)?;
    let u = unitary_exp(dim, &h, t)?;
    let out = crate::tensor::gemm(dim, dim, 1, &u, &psi.psi);
    Ok(DenseKet { n_sites: n, psi: out })
}

/// Steady-state check helper: `exp(L t)`-free projection onto the
/// maximally mixed state, returns `‖ρ − 𝟙/2^N‖_F`.
pub fn distance_to_identity(rho: &DenseDensity) -> f64 {
    let d = rho.dim();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { 1.0 / d as f64 } else { 0.0 };
            acc += (rho.rho[i * d + j] - C64::new(want, 0.0)).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Strang-split Hamiltonian step on a dense state, mirroring the
/// trajectory engine's bond ordering.
pub fn dense_strang_step(psi: &mut DenseKet, p: &ModelParams, h: f64) -> Result<()> {
    let n = psi.n_sites;
    for layer in step_layers(TrotterOrder::Second) {
        let g = build_xxz_gate(p, layer.fraction * h)?;
        for b in layer.parity.bonds(n) {
            psi.apply_bond(b, &g.matrix);
        }
    }
    Ok(())
}

/// One first-order trajectory step: Strang-split Hamiltonian evolution over
/// `dt`, then one conditional jump decision per site (sites in order, one
/// uniform draw each). Returns the jumps that fired.
pub fn dense_trajectory_step<R: Rng>(
    psi: &mut DenseKet,
    p: &ModelParams,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<JumpEvent>> {
    check_n(psi.n_sites, MAX_PURE_SITES)?;
    dense_strang_step(psi, p, dt)?;
    let mut jumps = Vec::new();
    if !p.is_dissipative() {
        return Ok(jumps);
    }
    for site in 0..psi.n_sites {
        let r: f64 = 1.0 - rng.random::<f64>();
        let rho = psi.reduced_density(site);
        match decide_site_jump(p, dt, rho[0].re, rho[3].re, r) {
            SiteDecision::Jump(ch) => {
                psi.apply_site(site, &ch.operator());
                psi.normalize()?;
                jumps.push(JumpEvent {
                    time: f64::NAN,
                    site,
                    channel: ch,
                });
            }
            SiteDecision::NoJump(k) => {
                if k != [1.0, 1.0] {
                    let op = [C64::new(k[0], 0.0), Z, Z, C64::new(k[1], 0.0)];
                    psi.apply_site(site, &op);
                    psi.normalize()?;
                }
            }
        }
    }
    Ok(jumps)
}

/// Thermal-like helper used in tests: `exp(-β H)/Z` for small chains.
pub fn gibbs_state(p: &ModelParams, n: usize, beta: f64) -> Result<DenseDensity> {
    check_n(n, MAX_DENSITY_SITES)?;
    let dim = 1usize << n;
    let h = dense_hamiltonian(p, n)?;
    let mut rho = herm_fn(dim, &h, |e| C64::new((-beta * e).exp(), 0.0))?;
    let tr: C64 = (0..dim).map(|i| rho[i * dim + i]).sum();
    for v in &mut rho {
        *v /= tr;
    }
    Ok(DenseDensity { n_sites: n, rho })
}

/// `Σ_c rate_c ⟨L_c† L_c⟩` summed over channels for a single site.
pub fn site_jump_weight(p: &ModelParams, rho: &[C64; 4], ch: Channel) -> f64 {
    let (up, down) = (rho[0].re, rho[3].re);
    match ch {
        Channel::Plus => p.gamma_plus * down,
        Channel::Minus => p.gamma_minus * up,
        Channel::Dephasing => p.gamma_z,
    }
}
