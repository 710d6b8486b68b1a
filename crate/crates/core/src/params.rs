//! Model and scaling parameter sets with validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One violated constraint. `code` is stable and machine-readable; `message`
/// carries the offending values.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub message: String,
}

/// Outcome of a validation pass. An empty violation list means the parameter
/// set is accepted.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Informational notes (admissible intervals and the like), not failures.
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, code: &'static str, message: String) {
        self.violations.push(Violation { code, message });
    }

    pub fn codes(&self) -> Vec<&'static str> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
        self.notes.extend(other.notes);
    }

    /// Converts a failed report into an error; `Ok(())` if nothing failed.
    pub fn into_result(self, what: &str) -> Result<()> {
        if self.ok() {
            Ok(())
        } else {
            let msgs: Vec<String> =
                self.violations.iter().map(|v| format!("{} ({})", v.message, v.code)).collect();
            Err(Error::invalid_params(format!("{what}: {}", msgs.join("; ")), self.codes()))
        }
    }
}

/// Continuum model: spatial dimension, species count, fractional exponents,
/// per-species diffusivities and the species coupling matrix.
///
/// `sigma[i]` multiplies the fractional diffusion of species `i`; `a[i][j]`
/// couples species `i` to the fractional-gradient field generated by species
/// `j`. The coupling matrix may have either sign and need not be symmetric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub n_species: usize,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: Vec<f64>,
    pub a: Vec<Vec<f64>>,
}

impl ModelParams {
    /// Validated constructor; see [`validate_model`] for the rule set.
    pub fn new(
        d: usize,
        n_species: usize,
        alpha: f64,
        beta: f64,
        sigma: Vec<f64>,
        a: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let p = ModelParams { d, n_species, alpha, beta, sigma, a };
        validate_model(&p).into_result("model parameters")?;
        Ok(p)
    }
}

/// Exponent block steering how the mollifier widths and the convergence
/// threshold shrink with the particle number N.
///
/// The defaults are tuned for d = 1 and satisfy every constraint checked by
/// [`validate_scaling`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalingParams {
    pub delta: f64,
    pub rho: f64,
    pub kappa: f64,
    pub kappa_hat: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        ScalingParams { delta: 0.2, rho: 0.05, kappa: 0.23, kappa_hat: 0.03 }
    }
}

/// Scales derived from (N, scaling): kernel concentration factors and the
/// convergence threshold.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivedScales {
    /// kappa_N = N^(kappa/d); concentration of the density kernel.
    pub kappa_n: f64,
    /// kappa_hat_N = N^(kappa_hat/d); concentration of the interaction kernel.
    pub kappa_hat_n: f64,
    /// delta_N = N^(-delta); convergence threshold.
    pub delta_n: f64,
    /// delta_N^(1+rho); admissible initial sampling error.
    pub delta_n_initial: f64,
}

/// Checks the standing model assumptions:
///
/// * 1/2 < alpha < 1 and 0 < beta < 1 with beta + 1 < 2 alpha,
/// * in d = 1 additionally alpha - beta < 1/2 or alpha < 3/4,
/// * strictly positive diffusivities, shape-consistent sigma and a.
pub fn validate_model(p: &ModelParams) -> ValidationReport {
    let mut r = ValidationReport::default();
    if p.d == 0 {
        r.push("d_positive", format!("dimension must be >= 1, got {}", p.d));
    }
    if p.n_species == 0 {
        r.push("n_species_positive", "species count must be >= 1".into());
    }
    if !(p.alpha > 0.5 && p.alpha < 1.0) {
        r.push("alpha_range", format!("alpha must lie in (1/2, 1), got {}", p.alpha));
    }
    if !(p.beta > 0.0 && p.beta < 1.0) {
        r.push("beta_range", format!("beta must lie in (0, 1), got {}", p.beta));
    }
    if !(p.beta + 1.0 < 2.0 * p.alpha) {
        r.push(
            "beta_alpha_order",
            format!("beta + 1 = {} must be < 2 alpha = {}", p.beta + 1.0, 2.0 * p.alpha),
        );
    }
    if p.d == 1 && !(p.alpha - p.beta < 0.5 || p.alpha < 0.75) {
        r.push(
            "d1_alpha_beta",
            format!(
                "in d = 1 require alpha - beta < 1/2 or alpha < 3/4, got alpha = {}, beta = {}",
                p.alpha, p.beta
            ),
        );
    }
    if p.sigma.len() != p.n_species {
        r.push(
            "sigma_shape",
            format!("sigma has length {}, expected {}", p.sigma.len(), p.n_species),
        );
    }
    for (i, &s) in p.sigma.iter().enumerate() {
        if !(s > 0.0) || !s.is_finite() {
            r.push("sigma_positive", format!("sigma[{i}] = {s} must be finite and > 0"));
        }
    }
    if p.a.len() != p.n_species || p.a.iter().any(|row| row.len() != p.n_species) {
        r.push("a_shape", format!("coupling matrix must be {0} x {0}", p.n_species));
    }
    if p.a.iter().flatten().any(|v| !v.is_finite()) {
        r.push("a_finite", "coupling matrix entries must be finite".into());
    }
    r
}

/// Checks the exponent ordering required for the moderate-interaction regime:
///
/// * 0 < delta < 1, rho > 0,
/// * 0 < kappa_hat < delta d / (d + 4),
/// * delta (1 + rho) d < kappa < d / (d + 3),
/// * kappa > kappa_hat.
///
/// Also reports whether the admissible kappa interval is nonempty for the
/// given (delta, rho, d), independently of the supplied kappa.
pub fn validate_scaling(s: &ScalingParams, d: usize) -> ValidationReport {
    let mut r = ValidationReport::default();
    if d == 0 {
        r.push("d_positive", format!("dimension must be >= 1, got {d}"));
        return r;
    }
    let df = d as f64;
    if !(s.delta > 0.0 && s.delta < 1.0) {
        r.push("delta_range", format!("delta must lie in (0, 1), got {}", s.delta));
    }
    if !(s.rho > 0.0) {
        r.push("rho_positive", format!("rho must be > 0, got {}", s.rho));
    }
    let kappa_hat_max = s.delta * df / (df + 4.0);
    if !(s.kappa_hat > 0.0 && s.kappa_hat < kappa_hat_max) {
        r.push(
            "kappa_hat_range",
            format!(
                "kappa_hat must lie in (0, {kappa_hat_max}) = (0, delta d/(d+4)), got {}",
                s.kappa_hat
            ),
        );
    }
    let kappa_lo = s.delta * (1.0 + s.rho) * df;
    let kappa_hi = df / (df + 3.0);
    if kappa_lo >= kappa_hi {
        r.push(
            "kappa_interval_empty",
            format!(
                "admissible kappa interval (delta(1+rho)d, d/(d+3)) = ({kappa_lo}, {kappa_hi}) is empty"
            ),
        );
    } else {
        r.notes.push(format!("admissible kappa interval: ({kappa_lo}, {kappa_hi})"));
    }
    if !(s.kappa > kappa_lo && s.kappa < kappa_hi) {
        r.push(
            "kappa_range",
            format!("kappa must lie in ({kappa_lo}, {kappa_hi}), got {}", s.kappa),
        );
    }
    if !(s.kappa > s.kappa_hat) {
        r.push(
            "kappa_order",
            format!("kappa = {} must exceed kappa_hat = {}", s.kappa, s.kappa_hat),
        );
    }
    r
}

/// Computes the N-dependent scales, rejecting invalid scaling blocks and
/// non-positive N.
pub fn derived_scales(n: u64, s: &ScalingParams, d: usize) -> Result<DerivedScales> {
    validate_scaling(s, d).into_result("scaling parameters")?;
    if n == 0 {
        return Err(Error::InvalidArgument("particle number N must be >= 1".into()));
    }
    let nf = n as f64;
    let df = d as f64;
    let delta_n = nf.powf(-s.delta);
    Ok(DerivedScales {
        kappa_n: nf.powf(s.kappa / df),
        kappa_hat_n: nf.powf(s.kappa_hat / df),
        delta_n,
        delta_n_initial: delta_n.powf(1.0 + s.rho),
    })
}
