use std::path::{Path, PathBuf};

use mpsim_core::models::{BasisFlavor, ChainLength, ModelParams};
use mpsim_core::trajectory::{uniform_site_rate, Scheme, TrajectoryConfig};
use mpsim_core::trotter::TrotterOrder;
use mpsim_core::Truncation;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Mpdo,
    Itebd,
    Qt,
    Oracle,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_cutoff() -> f64 {
    Truncation::DEFAULT_CUTOFF
}

fn default_reorth() -> usize {
    mpsim_core::itebd::REORTH_INTERVAL
}

fn yes() -> bool {
    true
}

fn pauli() -> BasisFlavor {
    BasisFlavor::Pauli
}

/// One experiment. Keys are flat; omitted keys take the documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub engine: Engine,
    /// Absent for the infinite chain.
    #[serde(default)]
    pub n_sites: Option<usize>,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default)]
    pub gamma_plus: f64,
    #[serde(default)]
    pub gamma_minus: f64,
    #[serde(default)]
    pub gamma_z: f64,
    pub chi: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    pub dt: f64,
    /// Recording interval; defaults to `dt`.
    #[serde(default)]
    pub dt_obs: Option<f64>,
    pub t_max: f64,
    #[serde(default = "one_usize")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to exact jump times when the flip rates are balanced.
    #[serde(default)]
    pub scheme: Option<Scheme>,
    /// 2 or 4. Defaults to 4 for density-operator engines and 2 for trajectories.
    #[serde(default)]
    pub trotter_order: Option<u8>,
    #[serde(default = "pauli")]
    pub basis: BasisFlavor,
    #[serde(default = "default_reorth")]
    pub reorth_interval: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub write_trajectories: bool,
    /// Checkpoint to continue an MPDO run from.
    #[serde(default)]
    pub resume_from: Option<PathBuf>,
}

impl RunConfig {
    /// Parses either a bare config or a manifest that embeds one.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let inner = match value.get("config") {
            Some(c) if c.is_object() => c.clone(),
            _ => value,
        };
        let cfg: Self = serde_json::from_value(inner)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn dt_obs(&self) -> f64 {
        self.dt_obs.unwrap_or(self.dt)
    }

    pub fn length(&self) -> ChainLength {
        match self.n_sites {
            Some(n) => ChainLength::Finite(n),
            None => ChainLength::Infinite,
        }
    }

    pub fn model(&self) -> ModelParams {
        ModelParams {
            j: self.j,
            delta: self.delta,
            gamma_plus: self.gamma_plus,
            gamma_minus: self.gamma_minus,
            gamma_z: self.gamma_z,
            length: self.length(),
        }
    }

    pub fn truncation(&self) -> Truncation {
        Truncation::new(self.chi, self.cutoff)
    }

    pub fn order(&self) -> TrotterOrder {
        match self.trotter_order {
            Some(2) => TrotterOrder::Second,
            Some(_) => TrotterOrder::Fourth,
            None if self.engine == Engine::Qt => TrotterOrder::Second,
            None => TrotterOrder::Fourth,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme.unwrap_or_else(|| {
            if uniform_site_rate(&self.model()).is_some() {
                Scheme::ExactJumpTimes
            } else {
                Scheme::PerStepConditional
            }
        })
    }

    /// Integration steps between recordings.
    pub fn steps_per_obs(&self) -> usize {
        (self.dt_obs() / self.dt).round().max(1.0) as usize
    }

    /// Number of recording intervals in `[0, t_max]`.
    pub fn n_obs(&self) -> usize {
        (self.t_max / self.dt_obs() + 1e-9).floor() as usize
    }

    pub fn trajectory_config(&self) -> TrajectoryConfig {
        let mut tc = TrajectoryConfig::new(
            self.model(),
            self.chi,
            self.dt,
            self.dt_obs(),
            self.t_max,
            self.seed,
            self.scheme(),
        );
        tc.cutoff = self.cutoff;
        tc.order = self.order();
        tc
    }

    /// Every violated constraint.
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.model().violations();
        match (self.engine, self.n_sites) {
            (Engine::Itebd, Some(_)) => out.push("engine itebd requires an infinite chain (omit n_sites)".into()),
            (Engine::Itebd, None) => {}
            (e, None) => out.push(format!("engine {} requires n_sites", engine_name(e))),
            (Engine::Oracle, Some(n)) if n > mpsim_core::oracle::MAX_DENSITY_SITES => out.push(format!(
                "engine oracle supports at most {} sites, got {n}",
                mpsim_core::oracle::MAX_DENSITY_SITES
            )),
            _ => {}
        }
        if self.chi == 0 {
            out.push("chi must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.cutoff) {
            out.push(format!("cutoff must lie in [0, 1), got {}", self.cutoff));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("dt must be positive, got {}", self.dt));
        }
        let obs = self.dt_obs();
        if !(obs > 0.0 && obs.is_finite()) {
            out.push(format!("dt_obs must be positive, got {obs}"));
        } else if self.dt > 0.0 && self.engine != Engine::Qt {
            let ratio = obs / self.dt;
            if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-6 {
                out.push(format!("dt_obs ({obs}) must be a whole multiple of dt ({})", self.dt));
            }
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            out.push(format!("t_max must be non-negative, got {}", self.t_max));
        }
        if let Some(o) = self.trotter_order {
            if o != 2 && o != 4 {
                out.push(format!("trotter_order must be 2 or 4, got {o}"));
            }
        }
        if self.engine == Engine::Qt {
            if self.n_traj < 2 {
                out.push(format!("n_traj must be at least 2 for ensemble statistics, got {}", self.n_traj));
            }
            if self.scheme == Some(Scheme::ExactJumpTimes) && uniform_site_rate(&self.model()).is_none() {
                out.push("scheme exact-jump-times requires gamma_plus == gamma_minus".into());
            }
        }
        if self.engine == Engine::Itebd && self.reorth_interval == 0 {
            out.push("reorth_interval must be at least 1".into());
        }
        if self.resume_from.is_some() && self.engine != Engine::Mpdo {
            out.push("resume_from is only supported by engine mpdo".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(v))
        }
    }
}

pub fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Mpdo => "mpdo",
        Engine::Itebd => "itebd",
        Engine::Qt => "qt",
        Engine::Oracle => "oracle",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"engine": "mpdo", "n_sites": 8, "chi": 16, "dt": 0.1, "t_max": 1.0}"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!((c.j, c.delta, c.gamma_z), (1.0, 1.0, 0.0));
        assert_eq!(c.order(), TrotterOrder::Fourth);
        assert_eq!(c.basis, BasisFlavor::Pauli);
        assert_eq!(c.dt_obs(), 0.1);
        c.validate().unwrap();
    }

    #[test]
    fn round_trip_is_identity() {
        let raw = r#"{"engine": "qt", "n_sites": 12, "gamma_plus": 0.0, "gamma_minus": 1.0,
            "chi": 32, "dt": 0.05, "dt_obs": 0.5, "t_max": 10, "n_traj": 20, "seed": 9,
            "scheme": "per-step-conditional", "trotter_order": 2, "output_dir": "runs/a"}"#;
        let c = RunConfig::from_json(raw).unwrap();
        let again = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.to_json(), c.to_json());
    }

    #[test]
    fn manifest_wrapper_is_accepted() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        let wrapped = format!(r#"{{"tool": "mpsim", "config": {}}}"#, c.to_json());
        assert_eq!(RunConfig::from_json(&wrapped).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let raw = r#"{"engine": "mpdo", "n_sites": 8, "chi": 16, "dt": 0.1, "t_max": 1.0, "gama_z": 1}"#;
        assert!(RunConfig::from_json(raw).is_err());
    }

    #[test]
    fn every_violation_is_listed() {
        let raw = r#"{"engine": "oracle", "n_sites": 10, "gamma_z": -1, "chi": 0, "dt": 0.1,
            "dt_obs": 0.25, "t_max": 1.0, "trotter_order": 3}"#;
        let c = RunConfig::from_json(raw).unwrap();
        let v = c.violations();
        assert_eq!(v.len(), 5, "{v:?}");
        assert!(v.iter().any(|s| s.contains("at most 8")));
        assert!(v.iter().any(|s| s.contains("gamma_z")));
    }

    #[test]
    fn engine_specific_rules() {
        let itebd = r#"{"engine": "itebd", "n_sites": 8, "chi": 16, "dt": 0.1, "t_max": 1.0}"#;
        assert_eq!(RunConfig::from_json(itebd).unwrap().violations().len(), 1);
        let qt = r#"{"engine": "qt", "n_sites": 8, "gamma_plus": 1, "chi": 16, "dt": 0.1,
            "t_max": 1.0, "n_traj": 4, "scheme": "exact-jump-times"}"#;
        let c = RunConfig::from_json(qt).unwrap();
        assert_eq!(c.violations().len(), 1);
        assert_eq!(c.order(), TrotterOrder::Second);
    }

    #[test]
    fn scheme_default_follows_rates() {
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.gamma_plus = 0.5;
        c.gamma_minus = 0.5;
        assert_eq!(c.scheme(), Scheme::ExactJumpTimes);
        c.gamma_plus = 0.0;
        assert_eq!(c.scheme(), Scheme::PerStepConditional);
    }
}
