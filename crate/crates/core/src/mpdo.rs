//! Density operators as matrix-product states of their operator-basis
//! coefficients, evolved with two-site superoperator gates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::chain::{Chain, Dir};
use crate::error::{Error, Result};
use crate::models::{build_super_gate, BasisFlavor, BondWeights, ModelParams, OperatorBasis, SuperGate, SIGMA_Z};
use crate::schmidt_entropy;
use crate::tensor::{DenseTensor, Scalar, Truncation, C64};
use crate::trotter::{fused_layers, TrotterOrder};

#[derive(Debug, Clone, PartialEq)]
pub struct MpdoState<T> {
    pub(crate) chain: Chain<T>,
    basis: OperatorBasis,
    trace_vec: [T; 4],
    time: f64,
}

/// Néel product `|↑⟩⟨↑| ⊗ |↓⟩⟨↓| ⊗ …` on an even number of sites.
pub fn neel_mpdo<T: Scalar>(n: usize, basis: OperatorBasis) -> Result<MpdoState<T>> {
    MpdoState::neel(n, basis)
}

fn coeffs_to<T: Scalar>(basis: &OperatorBasis, c: &[C64; 4]) -> Result<[T; 4]> {
    if T::REAL && c.iter().any(|v| v.im.abs() > 1e-12) {
        return Err(Error::InvalidParams(format!(
            "{:?} coefficients are complex; use complex storage",
            basis.flavor
        )));
    }
    Ok(c.map(T::from_c64))
}

impl<T: Scalar> MpdoState<T> {
    pub fn neel(n: usize, basis: OperatorBasis) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "Néel state needs an even number of sites, got {n}"
            )));
        }
        let up = coeffs_to::<T>(&basis, &basis.neel_site(true))?;
        let down = coeffs_to::<T>(&basis, &basis.neel_site(false))?;
        let sites: Vec<Vec<T>> = (0..n)
            .map(|i| if i % 2 == 0 { up.to_vec() } else { down.to_vec() })
            .collect();
        Self::from_product(&sites, basis)
    }

    /// Product of single-site operators given by their basis coefficients.
    pub fn from_product(sites: &[Vec<T>], basis: OperatorBasis) -> Result<Self> {
        let trace_vec = coeffs_to::<T>(&basis, &basis.trace_vector())?;
        let mut chain = Chain::product(4, sites)?;
        chain.protect = Some(trace_vec.to_vec());
        let mut s = Self {
            chain,
            basis,
            trace_vec,
            time: 0.0,
        };
        s.normalize_trace()?;
        Ok(s)
    }

    pub fn n_sites(&self) -> usize {
        self.chain.n()
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

    pub fn bond_dims(&self) -> Vec<usize> {
        (0..self.n_sites() - 1).map(|b| self.chain.bond_dim(b)).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.chain.max_bond()
    }

    /// Applies a superoperator gate on `bond`. Returns the relative
    /// discarded weight.
    pub fn apply_super_gate(&mut self, gate: &SuperGate<T>, bond: usize, trunc: Truncation) -> Result<f64> {
        if gate.flavor != self.basis.flavor {
            return Err(Error::InvalidParams(format!(
                "gate built for {:?} basis applied to {:?} state",
                gate.flavor, self.basis.flavor
            )));
        }
        let dir = if self.chain.center <= bond {
            Dir::Right
        } else {
            Dir::Left
        };
        let w = self.chain.two_site(bond, &gate.matrix, dir, trunc)?;
        self.chain.fresh = false;
        Ok(w)
    }

    /// `Tr ρ`.
    pub fn trace(&self) -> f64 {
        let vs: Vec<&[T]> = vec![&self.trace_vec[..]; self.n_sites()];
        self.chain.contract_vectors(&vs).re() * self.chain.log_norm.exp()
    }

    /// Rescales to unit trace; returns the trace found before rescaling.
    pub fn normalize_trace(&mut self) -> Result<f64> {
        let t = self.trace();
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::TraceDrift {
                drift: t - 1.0,
                time: self.time,
            });
        }
        self.chain.log_norm -= t.ln();
        Ok(t)
    }

    /// Sweeps the orthogonality center across the chain so every bond's
    /// Schmidt values are exact.
    pub fn canonicalize(&mut self, trunc: Truncation) -> Result<()> {
        self.chain.refresh(trunc)
    }

    pub fn is_canonical(&self) -> bool {
        self.chain.fresh
    }

    /// Normalized Schmidt values of the vectorized density matrix.
    pub fn schmidt_values(&self, bond: usize) -> &[f64] {
        &self.chain.lambdas[bond]
    }

    /// Operator entanglement in bits; exact after [`Self::canonicalize`].
    pub fn operator_entanglement(&self, bond: usize) -> f64 {
        schmidt_entropy(&self.chain.lambdas[bond])
    }

    pub fn operator_entanglements(&self) -> Vec<f64> {
        self.chain.lambdas.iter().map(|l| schmidt_entropy(l)).collect()
    }

    fn observable(&self, op: &[C64; 4]) -> Vec<T> {
        self.basis
            .observable_vector(op)
            .iter()
            .map(|&v| T::from_c64(v))
            .collect()
    }

    /// `Tr(op_site ρ)` for a Hermitian single-site `op`.
    pub fn local_expectation(&self, op: &[C64; 4], site: usize) -> Result<f64> {
        self.chain.check_site(site)?;
        let o = self.observable(op);
        let vs: Vec<&[T]> = (0..self.n_sites())
            .map(|k| if k == site { &o[..] } else { &self.trace_vec[..] })
            .collect();
        Ok(self.chain.contract_vectors(&vs).re() * self.chain.log_norm.exp())
    }

    pub fn local_expectations(&self, op: &[C64; 4]) -> Vec<f64> {
        let o = self.observable(op);
        let scale = self.chain.log_norm.exp();
        self.chain
            .contract_local(&self.trace_vec, &o)
            .into_iter()
            .map(|v| v.re() * scale)
            .collect()
    }

    pub fn magnetization(&self) -> Vec<f64> {
        self.local_expectations(&SIGMA_Z)
    }

    /// Two-site reduced density matrices (4x4 row-major, `{↑↑, ↑↓, ↓↑, ↓↓}`)
    /// of every bond.
    pub fn pair_densities(&self) -> Vec<[C64; 16]> {
        let scale = self.chain.log_norm.exp();
        let e = &self.basis.elements;
        self.chain
            .contract_pairs(&self.trace_vec)
            .into_iter()
            .map(|block| {
                let mut rho = [C64::new(0.0, 0.0); 16];
                for (i, &r1) in block.iter().enumerate() {
                    let (i1, i2) = (i / 4, i % 4);
                    let k = crate::models::kron2(&e[i1], &e[i2]);
                    let coeff = r1.to_c64() * scale;
                    for (dst, src) in rho.iter_mut().zip(k) {
                        *dst += coeff * src;
                    }
                }
                rho
            })
            .collect()
    }

    /// Smallest eigenvalue among all nearest-neighbour two-site reduced
    /// density matrices. Negative values flag lost positivity.
    pub fn min_pair_eigenvalue(&self) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for rho in self.pair_densities() {
            let (vals, _) = crate::linalg::herm_eigen(4, &rho)?;
            worst = worst.min(vals[0]);
        }
        Ok(worst)
    }

    /// Dense `2^N x 2^N` density matrix, site 0 most significant.
    pub fn to_dense_matrix(&self) -> Vec<C64> {
        let n = self.n_sites();
        let e = &self.basis.elements;
        // Rewrite each site over the matrix-element index (s, s').
        let sites: Vec<DenseTensor<C64>> = self
            .chain
            .sites
            .iter()
            .map(|m| {
                let [a, _, b] = crate::chain::dims3(m);
                DenseTensor::from_fn(&[a, 4, b], |idx| {
                    (0..4)
                        .map(|i| m.get(&[idx[0], i, idx[2]]).to_c64() * e[i][idx[1]])
                        .sum()
                })
            })
            .collect();
        let ch = Chain {
            lambdas: self.chain.lambdas.clone(),
            sites,
            center: self.chain.center,
            d: 4,
            log_norm: self.chain.log_norm,
            fresh: false,
            protect: None,
        };
        let v = ch.to_dense();
        let dim = 1usize << n;
        let mut rho = vec![C64::new(0.0, 0.0); dim * dim];
        for (idx, val) in v.into_iter().enumerate() {
            let (mut row, mut col) = (0usize, 0usize);
            for k in 0..n {
                let pair = (idx >> (2 * (n - 1 - k))) & 3;
                row = (row << 1) | (pair >> 1);
                col = (col << 1) | (pair & 1);
            }
            rho[row * dim + col] = val;
        }
        rho
    }

    pub fn snapshot(&self) -> ChainSnapshot {
        ChainSnapshot::from_chain(&self.chain, self.basis.flavor, self.time)
    }

    pub fn from_snapshot(snap: &ChainSnapshot) -> Result<Self> {
        let basis = OperatorBasis::new(snap.flavor);
        let trace_vec = coeffs_to::<T>(&basis, &basis.trace_vector())?;
        let mut chain = snap.to_chain()?;
        chain.protect = Some(trace_vec.to_vec());
        Ok(Self {
            chain,
            basis,
            trace_vec,
            time: snap.time,
        })
    }
}

/// Serializable image of a finite chain (tensor entries split into real and
/// imaginary parts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSnapshot {
    pub flavor: BasisFlavor,
    pub time: f64,
    pub local_dim: usize,
    pub center: usize,
    pub log_norm: f64,
    pub dims: Vec<[usize; 3]>,
    pub re: Vec<Vec<f64>>,
    /// Absent for real storage.
    pub im: Option<Vec<Vec<f64>>>,
    pub lambdas: Vec<Vec<f64>>,
    /// Whether `lambdas` are exact for every bond.
    #[serde(default)]
    pub fresh: bool,
}

impl ChainSnapshot {
    pub(crate) fn from_chain<T: Scalar>(ch: &Chain<T>, flavor: BasisFlavor, time: f64) -> Self {
        Self {
            flavor,
            time,
            local_dim: ch.d,
            center: ch.center,
            log_norm: ch.log_norm,
            dims: ch.sites.iter().map(crate::chain::dims3).collect(),
            re: ch.sites.iter().map(|m| m.data.iter().map(|v| v.re()).collect()).collect(),
            im: if T::REAL {
                None
            } else {
                Some(ch.sites.iter().map(|m| m.data.iter().map(|v| v.im()).collect()).collect())
            },
            lambdas: ch.lambdas.clone(),
            fresh: ch.fresh,
        }
    }

    pub(crate) fn to_chain<T: Scalar>(&self) -> Result<Chain<T>> {
        let n = self.dims.len();
        if self.re.len() != n || self.lambdas.len() + 1 != n || self.center >= n {
            return Err(Error::Shape("inconsistent snapshot".into()));
        }
        if T::REAL && self.im.is_some() {
            return Err(Error::Shape("complex snapshot loaded into real storage".into()));
        }
        let mut sites = Vec::with_capacity(n);
        for (k, (dims, re)) in self.dims.iter().zip(&self.re).enumerate() {
            let data: Vec<T> = match &self.im {
                Some(im) => re
                    .iter()
                    .zip(&im[k])
                    .map(|(&r, &i)| T::from_c64(C64::new(r, i)))
                    .collect(),
                None => re.iter().map(|&r| T::from_f64(r)).collect(),
            };
            if dims[1] != self.local_dim {
                return Err(Error::Shape(format!("site {k} has local dimension {}", dims[1])));
            }
            sites.push(DenseTensor::new(dims.to_vec(), data)?);
        }
        for k in 0..n - 1 {
            if sites[k].dims[2] != sites[k + 1].dims[0] {
                return Err(Error::Shape(format!("bond {k} dimensions disagree")));
            }
        }
        Ok(Chain {
            sites,
            lambdas: self.lambdas.clone(),
            center: self.center,
            d: self.local_dim,
            log_norm: self.log_norm,
            fresh: self.fresh,
            protect: None,
        })
    }
}

/// Gates of one Trotter fraction, one per distinct boundary weighting.
#[derive(Debug, Clone)]
struct GateSet<T> {
    fraction: f64,
    gates: Vec<(BondWeights, SuperGate<T>)>,
}

/// Diagnostics of one call to [`MpdoEvolver::advance`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Sum of relative discarded weights over all gates.
    pub truncation: f64,
    /// Trace before renormalization.
    pub trace_before: f64,
    pub max_bond_dim: usize,
}

/// Finite-chain superoperator TEBD driver.
#[derive(Debug, Clone)]
pub struct MpdoEvolver<T> {
    params: ModelParams,
    basis: OperatorBasis,
    dt: f64,
    trunc: Truncation,
    order: TrotterOrder,
    cache: Vec<GateSet<T>>,
}

impl<T: Scalar> MpdoEvolver<T> {
    pub fn new(
        params: ModelParams,
        basis: OperatorBasis,
        dt: f64,
        trunc: Truncation,
        order: TrotterOrder,
    ) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
        }
        if params.n_sites().is_none() {
            return Err(Error::InvalidParams("finite evolver needs a finite chain".into()));
        }
        Ok(Self {
            params,
            basis,
            dt,
            trunc,
            order,
            cache: Vec::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    fn ensure(&mut self, fraction: f64, n: usize) -> Result<usize> {
        if let Some(i) = self
            .cache
            .iter()
            .position(|g| (g.fraction - fraction).abs() < 1e-13)
        {
            return Ok(i);
        }
        let mut gates: Vec<(BondWeights, SuperGate<T>)> = Vec::new();
        for b in 0..n - 1 {
            let w = BondWeights::for_bond(b, n);
            if gates.iter().all(|(x, _)| *x != w) {
                let g = build_super_gate(&self.params, &self.basis, fraction * self.dt, w)?;
                gates.push((w, g));
            }
        }
        self.cache.push(GateSet { fraction, gates });
        Ok(self.cache.len() - 1)
    }

    /// Advances by `n_steps` time steps (layers are fused across step
    /// boundaries), then renormalizes the trace.
    pub fn advance(&mut self, state: &mut MpdoState<T>, n_steps: usize) -> Result<StepReport> {
        let n = state.n_sites();
        if Some(n) != self.params.n_sites() {
            return Err(Error::InvalidParams(format!(
                "state has {n} sites, evolver expects {:?}",
                self.params.n_sites()
            )));
        }
        if state.basis.flavor != self.basis.flavor {
            return Err(Error::InvalidParams("basis flavor mismatch".into()));
        }
        let mut report = StepReport::default();
        if n_steps == 0 {
            report.trace_before = state.trace();
            report.max_bond_dim = state.max_bond_dim();
            return Ok(report);
        }
        for layer in fused_layers(self.order, n_steps) {
            let idx = self.ensure(layer.fraction, n)?;
            let set = &self.cache[idx];
            report.truncation += state.chain.apply_layer(
                layer.parity,
                |b| {
                    let w = BondWeights::for_bond(b, n);
                    let (_, g) = set
                        .gates
                        .iter()
                        .find(|(x, _)| *x == w)
                        .expect("gate cached for every weighting");
                    &g.matrix[..]
                },
                self.trunc,
            )?;
            if !state.chain.sites.iter().all(|m| m.all_finite()) {
                return Err(Error::NonFinite("superoperator sweep"));
            }
        }
        state.chain.fresh = false;
        state.time += n_steps as f64 * self.dt;
        report.trace_before = state.normalize_trace()?;
        report.max_bond_dim = state.max_bond_dim();
        Ok(report)
    }
}

/// One fourth-order Trotter step of length `dt`.
pub fn trotter4_sweep<T: Scalar>(
    state: &mut MpdoState<T>,
    params: &ModelParams,
    dt: f64,
    trunc: Truncation,
) -> Result<StepReport> {
    let mut ev = MpdoEvolver::new(*params, state.basis.clone(), dt, trunc, TrotterOrder::Fourth)?;
    ev.advance(state, 1)
}
