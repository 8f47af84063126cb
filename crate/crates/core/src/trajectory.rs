//! Quantum-trajectory unraveling of the master equation on MPS.
//!
//! Two schemes are available. [`Scheme::ExactJumpTimes`] needs a
//! non-Hermitian part proportional to the identity (`γ₊ = γ₋`, any `γ_z`):
//! the norm then decays at the state-independent rate `N(γ + γ_z)`, so jump
//! times are drawn up front and the state is evolved with the Hermitian
//! Hamiltonian between them. [`Scheme::PerStepConditional`] works for any
//! rates: after each Strang step every site draws one uniform number and
//! either jumps or receives its no-jump factor.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{build_jump_ops, build_xxz_gate, Channel, JumpOp, ModelParams, UnitaryGate, SIGMA_Z};
use crate::mps::MpsState;
use crate::tensor::{Truncation, C64};
use crate::trotter::{fused_layers, step_layers, TrotterOrder};

/// Number of central bonds entering the bond average.
pub const AVERAGED_BONDS: usize = 11;

/// Post-jump norm below which a jump is rejected.
const JUMP_NORM_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExactJumpTimes,
    PerStepConditional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub model: ModelParams,
    pub chi: usize,
    pub cutoff: f64,
    /// Largest integration step; for the per-step scheme the step itself.
    pub dt: f64,
    /// Recording interval.
    pub dt_obs: f64,
    pub t_max: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Splitting of the Hermitian evolution in the exact-jump-times scheme.
    /// The per-step scheme always uses the symmetric second-order split.
    pub order: TrotterOrder,
}

impl TrajectoryConfig {
    pub fn new(model: ModelParams, chi: usize, dt: f64, dt_obs: f64, t_max: f64, seed: u64, scheme: Scheme) -> Self {
        Self {
            model,
            chi,
            cutoff: Truncation::DEFAULT_CUTOFF,
            dt,
            dt_obs,
            t_max,
            seed,
            scheme,
            order: TrotterOrder::Second,
        }
    }

    pub fn truncation(&self) -> Truncation {
        Truncation::new(self.chi, self.cutoff)
    }

    pub fn n_sites(&self) -> usize {
        self.model.n_sites().unwrap_or(0)
    }

    /// Number of recording intervals in `[0, t_max]`.
    pub fn n_obs(&self) -> usize {
        (self.t_max / self.dt_obs + 1e-9).floor() as usize
    }

    /// Integration steps per recording interval of the per-step scheme.
    pub fn steps_per_obs(&self) -> usize {
        (self.dt_obs / self.dt).round().max(1.0) as usize
    }

    /// Every violated constraint, empty when the config is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.model.violations();
        match self.model.n_sites() {
            None => out.push("trajectories need a finite chain".into()),
            Some(n) if n < 2 || n % 2 != 0 => out.push(format!("Néel start needs an even N >= 2, got {n}")),
            _ => {}
        }
        if self.chi == 0 {
            out.push("chi must be at least 1".into());
        }
        if !(self.cutoff >= 0.0 && self.cutoff < 1.0) {
            out.push(format!("cutoff must lie in [0, 1), got {}", self.cutoff));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.dt_obs > 0.0 && self.dt_obs.is_finite()) {
            out.push(format!("dt_obs must be positive, got {}", self.dt_obs));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            out.push(format!("t_max must be non-negative, got {}", self.t_max));
        }
        match self.scheme {
            Scheme::ExactJumpTimes => {
                if !rates_balanced(&self.model) {
                    out.push(format!(
                        "exact jump times need gamma_plus == gamma_minus, got {} and {}; use the per-step scheme",
                        self.model.gamma_plus, self.model.gamma_minus
                    ));
                }
            }
            Scheme::PerStepConditional => {
                if self.dt > 0.0 && self.dt_obs > 0.0 {
                    let k = self.steps_per_obs() as f64;
                    if (k * self.dt - self.dt_obs).abs() > 1e-9 * self.dt_obs {
                        out.push(format!(
                            "dt_obs = {} is not a multiple of dt = {}",
                            self.dt_obs, self.dt
                        ));
                    }
                }
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
}

fn rates_balanced(p: &ModelParams) -> bool {
    let scale = p.gamma_plus.abs().max(p.gamma_minus.abs()).max(1.0);
    (p.gamma_plus - p.gamma_minus).abs() <= 1e-12 * scale
}

/// Norm decay rate per site, `⟨Σ_c L_c† L_c⟩`, when it is state independent.
pub fn uniform_site_rate(p: &ModelParams) -> Option<f64> {
    rates_balanced(p).then(|| p.gamma_plus + p.gamma_z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub site: usize,
    pub channel: Channel,
}

/// Recorded history of one trajectory on the observation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrace {
    pub n_sites: usize,
    pub times: Vec<f64>,
    /// Entropy in bits of every bond, per recorded time.
    pub bond_entropies: Vec<Vec<f64>>,
    /// `⟨σᶻ_i⟩` per recorded time.
    pub magnetization: Vec<Vec<f64>>,
    /// Jumps that occurred up to each recorded time.
    pub jumps_cum: Vec<usize>,
    /// Summed discarded weight up to each recorded time.
    pub truncation_cum: Vec<f64>,
    pub max_bond_dim: Vec<usize>,
    pub jumps: Vec<JumpEvent>,
}

impl EntropyTrace {
    fn empty(n_sites: usize) -> Self {
        Self {
            n_sites,
            times: Vec::new(),
            bond_entropies: Vec::new(),
            magnetization: Vec::new(),
            jumps_cum: Vec::new(),
            truncation_cum: Vec::new(),
            max_bond_dim: Vec::new(),
            jumps: Vec::new(),
        }
    }

    /// Entropy of one bond over time.
    pub fn bond_series(&self, bond: usize) -> Vec<f64> {
        self.bond_entropies.iter().map(|s| s[bond]).collect()
    }

    /// Entropy of the central bond over time.
    pub fn center_series(&self) -> Vec<f64> {
        self.bond_series(center_bond(self.n_sites))
    }

    pub fn site_series(&self, site: usize) -> Vec<f64> {
        self.magnetization.iter().map(|m| m[site]).collect()
    }
}

/// Bond between sites `N/2 − 1` and `N/2`.
pub fn center_bond(n_sites: usize) -> usize {
    (n_sites / 2).saturating_sub(1)
}

/// The [`AVERAGED_BONDS`] bonds centered on the central bond. Chains with
/// fewer than twelve sites fall back to the central bond alone.
pub fn averaged_bonds(n_sites: usize) -> Vec<usize> {
    let c = center_bond(n_sites);
    let half = AVERAGED_BONDS / 2;
    if n_sites < AVERAGED_BONDS + 1 {
        log::warn!("chain of {n_sites} sites is too short for an {AVERAGED_BONDS}-bond average, using bond {c}");
        return vec![c];
    }
    (c - half..=c + half).collect()
}

/// Mean entropy over the central bonds at each recorded time.
pub fn bond_averaged_entropy(trace: &EntropyTrace) -> Vec<f64> {
    let bonds = averaged_bonds(trace.n_sites);
    trace
        .bond_entropies
        .iter()
        .map(|s| bonds.iter().map(|&b| s[b]).sum::<f64>() / bonds.len() as f64)
        .collect()
}

/// Next jump time `t_prev − ln(r)/(N γ)`.
pub fn sample_jump_time(t_prev: f64, r: f64, n_sites: usize, gamma: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidThreshold(r));
    }
    let rate = n_sites as f64 * gamma;
    if rate <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(t_prev - r.ln() / rate)
}

/// Jump weights `rate ⟨L†L⟩` for every operator, from single-site densities.
pub fn jump_weights(densities: &[[C64; 4]], jumps: &[JumpOp]) -> Vec<f64> {
    jumps
        .iter()
        .map(|j| {
            let rho = &densities[j.site];
            match j.channel {
                Channel::Plus => j.rate * rho[3].re,
                Channel::Minus => j.rate * rho[0].re,
                Channel::Dephasing => j.rate,
            }
            .max(0.0)
        })
        .collect()
}

/// Index into `weights` selected by `u ∈ [0, 1)` with probability
/// proportional to the weight.
pub fn pick_weighted(weights: &[f64], u: f64) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NoJumpChannel);
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if target < acc {
            return Ok(i);
        }
    }
    Ok(last)
}

/// Draws the channel of the next jump with probability proportional to
/// `⟨ψ| L†L |ψ⟩`. Returns an index into `jumps`.
pub fn select_jump_channel<R: Rng>(state: &MpsState, jumps: &[JumpOp], rng: &mut R) -> Result<usize> {
    let w = jump_weights(&state.reduced_densities(), jumps);
    let u: f64 = rng.random();
    pick_weighted(&w, u)
}

/// Applies a jump operator and renormalizes.
pub fn apply_jump(state: &mut MpsState, jump: &JumpOp, trunc: Truncation) -> Result<()> {
    let unitary = jump.channel == Channel::Dephasing;
    let norm = state
        .apply_site_op(jump.site, &jump.channel.operator(), unitary, trunc)?;
    if norm < JUMP_NORM_FLOOR {
        return Err(Error::VanishingNorm(norm));
    }
    Ok(())
}

/// Outcome of the conditional jump draw on one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SiteDecision {
    Jump(Channel),
    /// Diagonal no-jump factor `(k_↑, k_↓)`, unnormalized. `(1, 1)` means the
    /// factor is proportional to the identity.
    NoJump([f64; 2]),
}

/// Conditional jump decision of one site over a step `h`, given its spin-up
/// and spin-down populations and a uniform `r ∈ (0, 1]`.
///
/// The three channels compete within the step; a spin up decays by `σ⁻` or
/// dephases, a spin down by `σ⁺` or dephases.
pub fn decide_site_jump(p: &ModelParams, h: f64, p_up: f64, p_down: f64, r: f64) -> SiteDecision {
    let (gp, gm, gz) = (p.gamma_plus, p.gamma_minus, p.gamma_z);
    let a_up = gm + gz;
    let a_dn = gp + gz;
    let q_up = if a_up > 0.0 { p_up * (1.0 - (-h * a_up).exp()) / a_up } else { 0.0 };
    let q_dn = if a_dn > 0.0 { p_down * (1.0 - (-h * a_dn).exp()) / a_dn } else { 0.0 };
    let probs = [
        (Channel::Plus, q_dn * gp),
        (Channel::Minus, q_up * gm),
        (Channel::Dephasing, (q_up + q_dn) * gz),
    ];
    let mut acc = 0.0;
    for (ch, prob) in probs {
        if prob > 0.0 {
            acc += prob;
            if r <= acc {
                return SiteDecision::Jump(ch);
            }
        }
    }
    if rates_balanced(p) {
        SiteDecision::NoJump([1.0, 1.0])
    } else {
        SiteDecision::NoJump([(-h * gm / 2.0).exp(), (-h * gp / 2.0).exp()])
    }
}

/// Per-trajectory generator: the base seed xor the trajectory index.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index)
}

/// Uniform draw in `(0, 1]`.
fn open_uniform<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

struct Runner<'a> {
    cfg: &'a TrajectoryConfig,
    trunc: Truncation,
    state: MpsState,
    trace: EntropyTrace,
    truncation: f64,
    gates: Vec<(f64, UnitaryGate)>,
}

impl Runner<'_> {
    fn gate(&mut self, t: f64) -> Result<&UnitaryGate> {
        let pos = match self.gates.iter().position(|(k, _)| *k == t) {
            Some(i) => i,
            None => {
                let g = build_xxz_gate(&self.cfg.model, t)?;
                self.gates.push((t, g));
                self.gates.len() - 1
            }
        };
        Ok(&self.gates[pos].1)
    }

    /// Hermitian evolution over `span` in equal substeps no longer than `dt`.
    fn evolve(&mut self, span: f64, order: TrotterOrder) -> Result<()> {
        if span <= 0.0 {
            return Ok(());
        }
        let n_sub = ((span / self.cfg.dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / n_sub as f64;
        if self.gates.len() > 64 {
            self.gates.clear();
        }
        for layer in fused_layers(order, n_sub) {
            let g = self.gate(layer.fraction * h)?.clone();
            self.truncation += self.state.apply_layer(&g, layer.parity, self.trunc)?;
        }
        Ok(())
    }

    fn record(&mut self, t: f64) -> Result<()> {
        if !self.state.is_fresh() {
            self.state.refresh(self.trunc)?;
        }
        self.trace.times.push(t);
        self.trace.bond_entropies.push(self.state.bond_entropies());
        self.trace.magnetization.push(self.state.local_expectations(&SIGMA_Z));
        self.trace.jumps_cum.push(self.trace.jumps.len());
        self.trace.truncation_cum.push(self.truncation);
        self.trace.max_bond_dim.push(self.state.max_bond_dim());
        Ok(())
    }
}

/// Runs trajectory `index` of the ensemble described by `cfg` from the Néel
/// state.
pub fn run_trajectory(cfg: &TrajectoryConfig, index: u64) -> Result<EntropyTrace> {
    cfg.validate()?;
    run_trajectory_from(cfg, MpsState::neel(cfg.n_sites())?, index)
}

/// Runs trajectory `index` from a given initial state.
pub fn run_trajectory_from(cfg: &TrajectoryConfig, initial: MpsState, index: u64) -> Result<EntropyTrace> {
    cfg.validate()?;
    if initial.n_sites() != cfg.n_sites() {
        return Err(Error::InvalidParams(format!(
            "state has {} sites, model {}",
            initial.n_sites(),
            cfg.n_sites()
        )));
    }
    let mut rng = trajectory_rng(cfg.seed, index);
    let mut run = Runner {
        cfg,
        trunc: cfg.truncation(),
        trace: EntropyTrace::empty(initial.n_sites()),
        state: initial,
        truncation: 0.0,
        gates: Vec::new(),
    };
    match cfg.scheme {
        Scheme::ExactJumpTimes => run_exact(&mut run, &mut rng)?,
        Scheme::PerStepConditional => run_per_step(&mut run, &mut rng)?,
    }
    Ok(run.trace)
}

fn run_exact(run: &mut Runner<'_>, rng: &mut ChaCha8Rng) -> Result<()> {
    let cfg = run.cfg;
    let n = cfg.n_sites();
    let gamma = uniform_site_rate(&cfg.model).unwrap_or(0.0);
    let jumps = build_jump_ops(&cfg.model, n);
    let n_obs = cfg.n_obs();
    let mut t = 0.0;
    run.record(0.0)?;
    let mut next_jump = sample_jump_time(0.0, open_uniform(rng), n, gamma)?;
    for k in 1..=n_obs {
        let t_obs = k as f64 * cfg.dt_obs;
        while next_jump <= t_obs {
            run.evolve(next_jump - t, cfg.order)?;
            t = next_jump;
            let idx = select_jump_channel(&run.state, &jumps, rng)?;
            apply_jump(&mut run.state, &jumps[idx], run.trunc)?;
            run.trace.jumps.push(JumpEvent {
                time: t,
                site: jumps[idx].site,
                channel: jumps[idx].channel,
            });
            next_jump = sample_jump_time(t, open_uniform(rng), n, gamma)?;
        }
        run.evolve(t_obs - t, cfg.order)?;
        t = t_obs;
        run.record(t_obs)?;
    }
    Ok(())
}

/// One step of the per-step scheme: Strang-split Hamiltonian evolution, then
/// one conditional draw per site in ascending order.
fn per_step(run: &mut Runner<'_>, rng: &mut ChaCha8Rng, t_end: f64) -> Result<()> {
    let cfg = run.cfg;
    let h = cfg.dt;
    for layer in step_layers(TrotterOrder::Second) {
        let g = run.gate(layer.fraction * h)?.clone();
        run.truncation += run.state.apply_layer(&g, layer.parity, run.trunc)?;
    }
    let p = &cfg.model;
    if !p.is_dissipative() {
        return Ok(());
    }
    let needs_populations = p.gamma_plus > 0.0 || p.gamma_minus > 0.0;
    for site in 0..run.state.n_sites() {
        let r = open_uniform(rng);
        let (up, down) = if needs_populations {
            run.state.move_center(site, run.trunc)?;
            let rho = run.state.reduced_density(site)?;
            (rho[0].re, rho[3].re)
        } else {
            (0.5, 0.5)
        };
        match decide_site_jump(p, h, up, down, r) {
            SiteDecision::Jump(ch) => {
                let op = JumpOp {
                    site,
                    channel: ch,
                    rate: ch.rate(p),
                    matrix: ch.operator(),
                };
                apply_jump(&mut run.state, &op, run.trunc)?;
                run.trace.jumps.push(JumpEvent {
                    time: t_end,
                    site,
                    channel: ch,
                });
            }
            SiteDecision::NoJump(k) => {
                if k != [1.0, 1.0] {
                    let z = C64::new(0.0, 0.0);
                    let op = [C64::new(k[0], 0.0), z, z, C64::new(k[1], 0.0)];
                    run.state.apply_site_op(site, &op, false, run.trunc)?;
                }
            }
        }
    }
    Ok(())
}

fn run_per_step(run: &mut Runner<'_>, rng: &mut ChaCha8Rng) -> Result<()> {
    let cfg = run.cfg;
    let per_obs = cfg.steps_per_obs();
    run.record(0.0)?;
    let mut step = 0usize;
    for k in 1..=cfg.n_obs() {
        for _ in 0..per_obs {
            step += 1;
            per_step(run, rng, step as f64 * cfg.dt)?;
        }
        run.record(k as f64 * cfg.dt_obs)?;
    }
    Ok(())
}

/// Ensemble mean, sample standard deviation and standard error per time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n_traj: usize,
}

/// Statistics of aligned series, accumulated in the given order.
pub fn series_stats(times: &[f64], series: &[Vec<f64>]) -> Result<EnsembleStats> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Ensemble(format!("need at least 2 trajectories, got {n}")));
    }
    if let Some(bad) = series.iter().position(|s| s.len() != times.len()) {
        return Err(Error::Ensemble(format!(
            "trajectory {bad} has {} samples, expected {}",
            series[bad].len(),
            times.len()
        )));
    }
    let nf = n as f64;
    let mut mean = vec![0.0; times.len()];
    for s in series {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= nf;
    }
    let mut var = vec![0.0; times.len()];
    for s in series {
        for ((acc, v), m) in var.iter_mut().zip(s).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let std_dev: Vec<f64> = var.iter().map(|v| (v / (nf - 1.0)).sqrt()).collect();
    let std_err = std_dev.iter().map(|s| s / nf.sqrt()).collect();
    Ok(EnsembleStats {
        times: times.to_vec(),
        mean,
        std_dev,
        std_err,
        n_traj: n,
    })
}

fn check_grids(traces: &[EntropyTrace]) -> Result<&[f64]> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Ensemble("no trajectories".into()))?;
    if let Some(bad) = traces.iter().position(|t| t.times != first.times) {
        return Err(Error::Ensemble(format!("trajectory {bad} has a different time grid")));
    }
    Ok(&first.times)
}

/// Statistics of the bond-averaged trajectory entanglement.
pub fn ensemble_stats(traces: &[EntropyTrace]) -> Result<EnsembleStats> {
    let times = check_grids(traces)?;
    let series: Vec<Vec<f64>> = traces.iter().map(bond_averaged_entropy).collect();
    series_stats(times, &series)
}

/// Statistics of the entanglement of one bond.
pub fn bond_stats(traces: &[EntropyTrace], bond: usize) -> Result<EnsembleStats> {
    let times = check_grids(traces)?;
    let series: Vec<Vec<f64>> = traces.iter().map(|t| t.bond_series(bond)).collect();
    series_stats(times, &series)
}

/// Statistics of `⟨σᶻ⟩` on one site.
pub fn magnetization_stats(traces: &[EntropyTrace], site: usize) -> Result<EnsembleStats> {
    let times = check_grids(traces)?;
    let series: Vec<Vec<f64>> = traces.iter().map(|t| t.site_series(site)).collect();
    series_stats(times, &series)
}

/// Runs trajectories `0..n_traj` one after the other.
pub fn run_ensemble(cfg: &TrajectoryConfig, n_traj: usize) -> Result<Vec<EntropyTrace>> {
    (0..n_traj as u64).map(|i| run_trajectory(cfg, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ChainLength;

    fn model(n: usize, gp: f64, gm: f64, gz: f64) -> ModelParams {
        ModelParams::new(1.0, 1.0, gp, gm, gz, ChainLength::Finite(n)).unwrap()
    }

    #[test]
    fn jump_time_examples() {
        assert_eq!(sample_jump_time(0.7, 1.0, 4, 1.0).unwrap(), 0.7);
        let t = sample_jump_time(0.0, (-1.0f64).exp(), 40, 1.0).unwrap();
        assert!((t - 0.025).abs() < 1e-15);
        assert_eq!(sample_jump_time(0.0, 0.0, 4, 1.0), Err(Error::InvalidThreshold(0.0)));
        assert!(sample_jump_time(0.0, 1.5, 4, 1.0).is_err());
    }

    #[test]
    fn mean_waiting_time() {
        let mut rng = trajectory_rng(7, 0);
        let m = 100_000;
        let total: f64 = (0..m)
            .map(|_| sample_jump_time(0.0, open_uniform(&mut rng), 4, 0.5).unwrap())
            .sum();
        assert!((total / m as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn channel_weights_on_neel_pair() {
        let p = model(2, 1.0, 1.0, 0.0);
        let s = MpsState::neel(2).unwrap();
        let jumps = build_jump_ops(&p, 2);
        let w = jump_weights(&s.reduced_densities(), &jumps);
        // order per site: plus, minus
        assert_eq!(w, [0.0, 1.0, 1.0, 0.0]);
        let mut rng = trajectory_rng(3, 0);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[select_jump_channel(&s, &jumps, &mut rng).unwrap()] += 1;
        }
        assert_eq!(counts[0] + counts[3], 0);
        // binomial, 3σ = 150
        assert!((counts[1] as i64 - 5000).abs() < 150);
    }

    #[test]
    fn dephasing_weights_are_uniform() {
        let p = model(4, 0.0, 0.0, 0.8);
        let s = MpsState::neel(4).unwrap();
        let w = jump_weights(&s.reduced_densities(), &build_jump_ops(&p, 4));
        assert_eq!(w, [0.8; 4]);
        assert_eq!(pick_weighted(&[0.0, 0.0], 0.3), Err(Error::NoJumpChannel));
    }

    #[test]
    fn jumps_on_product_states() {
        let p = model(2, 1.0, 1.0, 1.0);
        let jumps = build_jump_ops(&p, 2);
        let mut s = MpsState::neel(2).unwrap();
        apply_jump(&mut s, &jumps[1], Truncation::chi(4)).unwrap();
        assert_eq!(s.magnetization(), [-1.0, -1.0]);
        s.refresh(Truncation::chi(4)).unwrap();
        assert_eq!(s.bond_entropy(0), 0.0);
        let before = s.magnetization();
        apply_jump(&mut s, &jumps[2], Truncation::chi(4)).unwrap();
        assert_eq!(s.magnetization(), before);
        // σ⁻ on a spin already down annihilates the state
        assert!(apply_jump(&mut s, &jumps[1], Truncation::chi(4)).is_err());
    }

    #[test]
    fn stats_examples() {
        let t = [0.0, 1.0];
        let same = series_stats(&t, &[vec![0.2, 0.4], vec![0.2, 0.4]]).unwrap();
        assert_eq!(same.std_dev, [0.0, 0.0]);
        let s = series_stats(&t, &[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(s.mean, [0.5, 0.5]);
        assert!((s.std_dev[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((s.std_err[0] - s.std_dev[0] / 2f64.sqrt()).abs() < 1e-14);
        assert!(series_stats(&t, &[vec![0.0, 0.0]]).is_err());
        assert!(series_stats(&t, &[vec![0.0], vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn averaged_bond_window() {
        assert_eq!(averaged_bonds(40), (14..=24).collect::<Vec<_>>());
        assert_eq!(averaged_bonds(12), (0..=10).collect::<Vec<_>>());
        assert_eq!(averaged_bonds(8), [3]);
        let mut tr = EntropyTrace::empty(20);
        tr.times = vec![0.0];
        tr.bond_entropies = vec![vec![0.3; 19]];
        assert!((bond_averaged_entropy(&tr)[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let p = model(4, 1.0, 0.0, 0.0);
        let cfg = TrajectoryConfig::new(p, 8, 0.05, 0.1, 1.0, 1, Scheme::ExactJumpTimes);
        assert_eq!(cfg.violations().len(), 1);
        let mut cfg = TrajectoryConfig::new(p, 0, -1.0, 0.1, 1.0, 1, Scheme::PerStepConditional);
        cfg.cutoff = 2.0;
        assert_eq!(cfg.violations().len(), 3);
        let cfg = TrajectoryConfig::new(p, 8, 0.03, 0.1, 1.0, 1, Scheme::PerStepConditional);
        assert_eq!(cfg.violations().len(), 1);
    }

    #[test]
    fn closed_system_has_no_jumps() {
        let p = model(6, 0.0, 0.0, 0.0);
        for scheme in [Scheme::ExactJumpTimes, Scheme::PerStepConditional] {
            let cfg = TrajectoryConfig::new(p, 16, 0.05, 0.1, 1.0, 5, scheme);
            let tr = run_trajectory(&cfg, 0).unwrap();
            assert!(tr.jumps.is_empty());
            assert_eq!(tr.times.len(), 11);
            assert!(tr.bond_entropies[10][2] > 0.1);
            let sum: f64 = tr.magnetization[10].iter().sum();
            assert!(sum.abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_log() {
        let p = model(6, 1.0, 1.0, 0.5);
        let cfg = TrajectoryConfig::new(p, 16, 0.05, 0.1, 1.0, 9, Scheme::ExactJumpTimes);
        let a = run_trajectory(&cfg, 2).unwrap();
        let b = run_trajectory(&cfg, 2).unwrap();
        assert_eq!(a, b);
        assert!(!a.jumps.is_empty());
        let c = run_trajectory(&cfg, 3).unwrap();
        assert_ne!(a.jumps, c.jumps);
    }
}
