//! Pure states as matrix-product states with an orthogonality center.
//!
//! Schmidt values of every bond are stored next to the tensors, which is
//! the information content of the Vidal form; entropies are read off them
//! directly.

use alloc::vec::Vec;

use crate::chain::{Chain, Dir};
use crate::error::{Error, Result};
use crate::models::{UnitaryGate, SIGMA_Z};
use crate::schmidt_entropy;
use crate::tensor::{Truncation, C64};
use crate::trotter::Parity;

#[derive(Debug, Clone, PartialEq)]
pub struct MpsState {
    pub(crate) chain: Chain<C64>,
}

/// Néel state `|↑↓↑↓…⟩` on an even number of sites.
pub fn neel_mps(n: usize) -> Result<MpsState> {
    MpsState::neel(n)
}

impl MpsState {
    pub fn neel(n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidParams(alloc::format!(
                "Néel state needs an even number of sites, got {n}"
            )));
        }
        let up = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let down = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let sites: Vec<[C64; 2]> = (0..n).map(|i| if i % 2 == 0 { up } else { down }).collect();
        Self::product(&sites)
    }

    pub fn product(sites: &[[C64; 2]]) -> Result<Self> {
        let vs: Vec<Vec<C64>> = sites.iter().map(|s| s.to_vec()).collect();
        Ok(Self {
            chain: Chain::product(2, &vs)?,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.chain.n()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        (0..self.n_sites() - 1).map(|b| self.chain.bond_dim(b)).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.chain.max_bond()
    }

    /// Orthogonality center.
    pub fn center(&self) -> usize {
        self.chain.center
    }

    /// Accumulated logarithm of the norm removed by renormalization.
    pub fn norm_log(&self) -> f64 {
        self.chain.log_norm
    }

    pub fn reset_norm_log(&mut self) {
        self.chain.log_norm = 0.0;
    }

    /// Whether the stored Schmidt values describe the current state. Only
    /// non-unitary site operations make them stale.
    pub fn is_fresh(&self) -> bool {
        self.chain.fresh
    }

    pub fn schmidt_values(&self, bond: usize) -> &[f64] {
        &self.chain.lambdas[bond]
    }

    /// Applies a two-site gate on `bond` (sites `bond`, `bond + 1`).
    /// Returns the relative discarded weight.
    pub fn apply_gate(&mut self, gate: &UnitaryGate, bond: usize, trunc: Truncation) -> Result<f64> {
        let dir = if self.chain.center <= bond {
            Dir::Right
        } else {
            Dir::Left
        };
        self.chain.two_site(bond, &gate.matrix, dir, trunc)
    }

    /// Applies `gate` on every bond of `parity`, sweeping away from the end
    /// closer to the orthogonality center. Returns the summed discarded weight.
    pub fn apply_layer(&mut self, gate: &UnitaryGate, parity: Parity, trunc: Truncation) -> Result<f64> {
        self.chain.apply_layer(parity, |_| &gate.matrix[..], trunc)
    }

    /// Applies a single-site operator and renormalizes. Returns the norm of
    /// the state after the operator (before renormalization).
    pub fn apply_site_op(&mut self, site: usize, op: &[C64; 4], unitary: bool, trunc: Truncation) -> Result<f64> {
        let n = self.chain.one_site(site, op, trunc)?;
        if !unitary {
            self.chain.fresh = false;
        }
        Ok(n)
    }

    /// Moves the orthogonality center to `site`.
    pub fn move_center(&mut self, site: usize, trunc: Truncation) -> Result<()> {
        self.chain.move_to(site, trunc)
    }

    /// Recomputes all Schmidt values by sweeping the center across the chain.
    pub fn refresh(&mut self, trunc: Truncation) -> Result<()> {
        self.chain.refresh(trunc)
    }

    /// Von Neumann entropy in bits across `bond`.
    pub fn bond_entropy(&self, bond: usize) -> f64 {
        schmidt_entropy(&self.chain.lambdas[bond])
    }

    pub fn bond_entropies(&self) -> Vec<f64> {
        self.chain.lambdas.iter().map(|l| schmidt_entropy(l)).collect()
    }

    /// Single-site reduced density matrix, row-major 2x2.
    pub fn reduced_density(&self, site: usize) -> Result<[C64; 4]> {
        let r = self.chain.reduced_density(site)?;
        Ok([r[0], r[1], r[2], r[3]])
    }

    pub fn reduced_densities(&self) -> Vec<[C64; 4]> {
        self.chain
            .reduced_densities()
            .into_iter()
            .map(|r| [r[0], r[1], r[2], r[3]])
            .collect()
    }

    /// `⟨op⟩` on `site`, real part.
    pub fn local_expectation(&self, op: &[C64; 4], site: usize) -> Result<f64> {
        Ok(expect(&self.reduced_density(site)?, op))
    }

    pub fn local_expectations(&self, op: &[C64; 4]) -> Vec<f64> {
        self.reduced_densities().iter().map(|r| expect(r, op)).collect()
    }

    pub fn magnetization(&self) -> Vec<f64> {
        self.local_expectations(&SIGMA_Z)
    }

    /// Dense state vector (including the tracked norm), site 0 most
    /// significant.
    pub fn to_dense(&self) -> Vec<C64> {
        self.chain.to_dense()
    }
}

/// `Tr(op ρ)` for 2x2 row-major matrices.
pub(crate) fn expect(rho: &[C64; 4], op: &[C64; 4]) -> f64 {
    (op[0] * rho[0] + op[1] * rho[2] + op[2] * rho[1] + op[3] * rho[3]).re
}
