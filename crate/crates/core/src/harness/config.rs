//! TOML-backed experiment configuration.
//!
//! One file describes the model, the scaling exponents, the grid, the time
//! discretization shared by the particle and PDE runs, the initial bumps,
//! and the sweep lists used by the convergence studies. Every experiment is
//! a pure function of (config, master seed), which is what makes reruns
//! byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::PeriodicGrid;
use crate::params::{validate_model, validate_scaling, ModelParams, ScalingParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Nodes per axis (power of two).
    pub m: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    pub dt_particles: f64,
    pub dt_pde: f64,
    /// Stored states per run including t = 0; both step counts must divide
    /// evenly so particle and PDE snapshots land on identical times.
    pub snapshots: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSweep {
    /// Particle counts per species for the particle-vs-field studies.
    pub n_list: Vec<u64>,
    pub seeds: u64,
    /// Optional per-component jump cap forwarded to the stable sampler.
    #[serde(default)]
    pub cap: Option<f64>,
}

/// One Gaussian bump of the initial condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub species: usize,
    pub center: Vec<f64>,
    pub width: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Particle numbers whose kappa_hat_n drive the regularized-vs-limit
    /// PDE comparison and the mollifier rate scan.
    pub reg_n_list: Vec<u64>,
    /// Particle numbers for the force-variance study.
    pub variance_n_list: Vec<u64>,
    pub variance_seeds: u64,
    /// Location where the force field is sampled for the variance study.
    pub probe_point: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub model: ModelParams,
    pub scaling: ScalingParams,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub particles: ParticleSweep,
    pub init: Vec<Bump>,
    pub sweeps: SweepConfig,
}

impl ExperimentConfig {
    /// The frozen default experiment: two species on a 16 pi torus with
    /// moderate cross-coupling.
    pub fn default_experiment() -> ExperimentConfig {
        ExperimentConfig {
            master_seed: 271_828_182_845,
            model: ModelParams {
                d: 1,
                n_species: 2,
                alpha: 0.85,
                beta: 0.5,
                sigma: vec![1.0, 1.0],
                a: vec![vec![0.5, -0.3], vec![0.2, 0.4]],
            },
            scaling: ScalingParams::default(),
            grid: GridConfig { m: 4096, length: 16.0 * std::f64::consts::PI },
            time: TimeConfig { t_end: 0.4, dt_particles: 2e-3, dt_pde: 1e-3, snapshots: 21 },
            particles: ParticleSweep { n_list: vec![500, 2000, 8000], seeds: 8, cap: None },
            init: vec![
                Bump { species: 0, center: vec![-2.0], width: 1.5, amplitude: 1.0 },
                Bump { species: 1, center: vec![3.0], width: 1.2, amplitude: 1.0 },
            ],
            sweeps: SweepConfig {
                reg_n_list: vec![64, 256, 1024, 4096],
                variance_n_list: vec![256, 512, 1024, 2048, 4096, 8192, 16384],
                variance_seeds: 64,
                probe_point: vec![0.3],
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let mut report = validate_model(&self.model);
        report.merge(validate_scaling(&self.scaling, self.model.d));
        report.into_result("experiment config")?;
        // the grid constructor re-checks shape constraints
        let grid = self.build_grid()?;
        let t = &self.time;
        if t.snapshots < 2 {
            return Err(Error::Config("need at least two snapshots".into()));
        }
        for (what, dt) in [("dt_particles", t.dt_particles), ("dt_pde", t.dt_pde)] {
            let steps = integer_steps(t.t_end, dt)
                .ok_or_else(|| Error::Config(format!("t_end / {what} is not an integer")))?;
            if steps % (t.snapshots - 1) != 0 {
                return Err(Error::Config(format!(
                    "snapshots - 1 = {} does not divide the {steps} {what} steps",
                    t.snapshots - 1
                )));
            }
        }
        if self.particles.n_list.is_empty()
            || self.particles.n_list.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config("n_list must be nonempty and increasing".into()));
        }
        if self.particles.seeds == 0 {
            return Err(Error::Config("need at least one seed".into()));
        }
        if self.sweeps.reg_n_list.is_empty()
            || self.sweeps.variance_n_list.len() < 2
            || self.sweeps.variance_seeds < 2
        {
            return Err(Error::Config("sweep lists are too short".into()));
        }
        if self.sweeps.probe_point.len() != self.model.d {
            return Err(Error::Config("probe_point dimension mismatch".into()));
        }
        let mut covered = vec![false; self.model.n_species];
        for b in &self.init {
            if b.species >= self.model.n_species {
                return Err(Error::Config(format!("bump species {} out of range", b.species)));
            }
            if b.center.len() != self.model.d {
                return Err(Error::Config("bump center dimension mismatch".into()));
            }
            if !(b.width > 0.0 && b.amplitude > 0.0) {
                return Err(Error::Config("bump width and amplitude must be positive".into()));
            }
            if b.width < 2.0 * grid.h() {
                return Err(Error::Config(format!(
                    "bump width {} is below two grid cells",
                    b.width
                )));
            }
            covered[b.species] = true;
        }
        if covered.iter().any(|c| !c) {
            return Err(Error::Config("every species needs at least one bump".into()));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.model.d, self.grid.m, self.grid.length)
    }

    /// Initial condition: the configured Gaussian bumps, each species
    /// normalized to unit mass.
    pub fn initial_field(&self) -> Result<Field> {
        let grid = self.build_grid()?;
        let mut field = Field::zeros(grid, self.model.n_species)?;
        let d = self.model.d;
        let mut x = vec![0.0; d];
        for b in &self.init {
            let comp = field.species_mut(b.species);
            for (p, slot) in comp.iter_mut().enumerate() {
                grid.coords(p, &mut x);
                let r_sq: f64 = x
                    .iter()
                    .zip(&b.center)
                    .map(|(xi, ci)| {
                        let dx = grid.min_image(xi - ci);
                        dx * dx
                    })
                    .sum();
                *slot += b.amplitude * (-0.5 * r_sq / (b.width * b.width)).exp();
            }
        }
        for i in 0..self.model.n_species {
            let mass = field.mass(i);
            if !(mass > 0.0) {
                return Err(Error::Config(format!("species {i} has no initial mass")));
            }
            let inv = 1.0 / mass;
            field.species_mut(i).iter_mut().for_each(|v| *v *= inv);
        }
        Ok(field)
    }
}

fn integer_steps(t_end: f64, dt: f64) -> Option<usize> {
    if !(t_end > 0.0 && dt > 0.0) {
        return None;
    }
    let f = t_end / dt;
    let steps = f.round();
    if steps >= 1.0 && (f - steps).abs() <= 1e-9 * f {
        Some(steps as usize)
    } else {
        None
    }
}

/// Computed step layout shared by the runners.
pub(crate) fn step_layout(t_end: f64, dt: f64, snapshots: usize) -> (usize, usize) {
    let steps = integer_steps(t_end, dt).expect("validated config");
    (steps, steps / (snapshots - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_experiment_validates() {
        let cfg = ExperimentConfig::default_experiment();
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_preserves_the_config() {
        let cfg = ExperimentConfig::default_experiment();
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(
            serde_json::to_string(&cfg).unwrap(),
            serde_json::to_string(&back).unwrap()
        );
    }

    #[test]
    fn misaligned_snapshot_grid_is_rejected() {
        let mut cfg = ExperimentConfig::default_experiment();
        cfg.time.snapshots = 22;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = ExperimentConfig::default_experiment();
        let mut text = cfg.to_toml_string().unwrap();
        text.push_str("\n[extra]\nfoo = 1\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn initial_field_is_normalized_per_species() {
        let cfg = ExperimentConfig::default_experiment();
        let f = cfg.initial_field().unwrap();
        for i in 0..2 {
            assert!((f.mass(i) - 1.0).abs() < 1e-12);
            assert!(f.min_value(i) >= 0.0);
        }
    }

    #[test]
    fn bump_for_missing_species_is_rejected() {
        let mut cfg = ExperimentConfig::default_experiment();
        cfg.init.pop();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
