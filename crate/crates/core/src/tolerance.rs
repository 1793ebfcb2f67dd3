//! Maximum acceptable distance tolerance.
//!
//! Two estimators of the largest `τ_d` such that every distance perturbed by
//! up to `±τ_d` (and every focal length by up to `±τ_f*`) keeps `|g| ≤ 1`:
//!
//! * [`bmc_tolerance`]: bisection over `τ_d` where each trial draws `N` joint
//!   uniform perturbations and records the worst `|g|`.
//! * [`linear_tolerance`]: first-order worst case,
//!   `τ_d = (1 − |g| − S_f·τ_f*) / S_d`, with `S_d`, `S_f` the summed absolute
//!   sensitivities of g to the distances and focal lengths.
//!
//! Every Monte Carlo sample owns a ChaCha stream keyed by
//! `(seed, iteration, sample)`, and the per-trial reduction is a max, so the
//! result does not depend on the rayon schedule.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{CavityGeometry, Param};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    /// Fixed focal-length tolerance (mm).
    pub tau_f_star: f64,
    /// Initial bisection bounds for τ_d (mm).
    pub lower: f64,
    pub upper: f64,
    pub samples_n: usize,
    pub iterations_i: usize,
    pub seed: u64,
}

impl ToleranceSpec {
    pub const DEFAULT_SAMPLES: usize = 10_000;
    pub const DEFAULT_ITERATIONS: usize = 30;
    pub const DEFAULT_LOWER: f64 = 0.0;
    pub const DEFAULT_UPPER: f64 = 10.0;

    pub fn new(tau_f_star: f64, seed: u64) -> Self {
        ToleranceSpec {
            tau_f_star,
            lower: Self::DEFAULT_LOWER,
            upper: Self::DEFAULT_UPPER,
            samples_n: Self::DEFAULT_SAMPLES,
            iterations_i: Self::DEFAULT_ITERATIONS,
            seed,
        }
    }

    /// τ_f* as 1% of the largest focal length.
    pub fn one_percent_of_max_focal(geom: &CavityGeometry, seed: u64) -> Self {
        Self::new(0.01 * max_focal(geom), seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_f_star >= 0.0) || !self.tau_f_star.is_finite() {
            return Err(Error::invalid("tau_f_star", format!("must be non-negative, got {}", self.tau_f_star)));
        }
        if !(0.0 <= self.lower && self.lower < self.upper) || !self.upper.is_finite() {
            return Err(Error::invalid("lo/hi", format!("need 0 <= lo < hi, got [{}, {}]", self.lower, self.upper)));
        }
        if self.samples_n == 0 {
            return Err(Error::invalid("n", "need at least one sample"));
        }
        if self.iterations_i == 0 {
            return Err(Error::invalid("i", "need at least one iteration"));
        }
        Ok(())
    }
}

pub fn max_focal(geom: &CavityGeometry) -> f64 {
    Param::FOCALS.iter().map(|&p| geom.get(p).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bmc,
    Linear,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bmc => "bmc",
            Method::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceStatus {
    Ok,
    /// The focal-length tolerance alone already reaches the stability limit;
    /// no distance budget remains.
    ZeroBudget,
    /// g is insensitive to every distance to first order.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub param: Param,
    /// `|∂g/∂p|` in mm⁻¹.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceResult {
    pub tau_d_max: f64,
    /// Worst `|g|` seen at `tau_d_max` (BMC), or the first-order bound (linear).
    pub g_max_at_result: f64,
    pub method: Method,
    pub status: ToleranceStatus,
    /// Midpoint tested in the final bisection iteration (BMC only).
    pub last_tested: Option<f64>,
    /// Final bisection bracket (BMC only).
    pub bracket: Option<(f64, f64)>,
    pub sensitivities: Vec<Sensitivity>,
    pub seed: Option<u64>,
}

/// Parameter values perturbed by one Monte Carlo draw.
fn perturbed(geom: &CavityGeometry, rng: &mut ChaCha8Rng, tau_d: f64, tau_f: f64) -> CavityGeometry {
    let mut g = *geom;
    for p in Param::DISTANCES {
        let u: f64 = rng.random();
        g.set(p, geom.get(p) + tau_d * (2.0 * u - 1.0));
    }
    for p in Param::FOCALS {
        let u: f64 = rng.random();
        g.set(p, geom.get(p) + tau_f * (2.0 * u - 1.0));
    }
    g
}

fn sample_rng(seed: u64, iteration: u64, sample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((iteration << 32) | sample);
    rng
}

/// Worst `|g|` over `n` joint perturbations drawn from stream block
/// `iteration`. Non-finite g counts as unstable.
pub fn monte_carlo_g_max(geom: &CavityGeometry, tau_d: f64, tau_f: f64, n: usize, seed: u64, iteration: u64) -> f64 {
    (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(seed, iteration, k);
            let g = perturbed(geom, &mut rng, tau_d, tau_f).g_unchecked().abs();
            if g.is_nan() {
                f64::INFINITY
            } else {
                g
            }
        })
        .reduce(|| 0.0, f64::max)
}

/// Binary-search Monte Carlo estimate of the maximum distance tolerance.
///
/// Each of the `I` iterations tests `τ_d = (l + u)/2` with `N` fresh joint
/// perturbations `δd ~ U[−τ_d, τ_d]⁵`, `δf ~ U[−τ_f*, τ_f*]⁴`, moving `l` up
/// when the worst `|g|` is at most 1 and `u` down otherwise. The reported
/// `tau_d_max` is the final `l`, the largest tolerance that passed.
pub fn bmc_tolerance(geom: &CavityGeometry, spec: &ToleranceSpec) -> Result<ToleranceResult> {
    geom.validate()?;
    spec.validate()?;
    let g0 = geom.g_unchecked();
    if !(g0.abs() < 1.0) {
        return Err(Error::UnstableResonator { g: g0 });
    }
    let (mut lo, mut hi) = (spec.lower, spec.upper);
    let mut g_at_lo: Option<f64> = None;
    let mut g_smallest_failure = f64::NAN;
    let mut tau = lo;
    for iter in 0..spec.iterations_i {
        tau = 0.5 * (lo + hi);
        let g_max = monte_carlo_g_max(geom, tau, spec.tau_f_star, spec.samples_n, spec.seed, iter as u64);
        if g_max <= 1.0 {
            lo = tau;
            g_at_lo = Some(g_max);
        } else {
            hi = tau;
            g_smallest_failure = g_max;
        }
    }
    let (status, g_max_at_result) = match g_at_lo {
        Some(g) => (ToleranceStatus::Ok, g),
        None => (ToleranceStatus::ZeroBudget, g_smallest_failure),
    };
    Ok(ToleranceResult {
        tau_d_max: lo,
        g_max_at_result,
        method: Method::Bmc,
        status,
        last_tested: Some(tau),
        bracket: Some((lo, hi)),
        sensitivities: Vec::new(),
        seed: Some(spec.seed),
    })
}

/// Finite-difference step for parameter value `p`.
pub fn fd_step(p: f64) -> f64 {
    (1e-8 * p.abs()).max(1e-6)
}

/// Central-difference `|∂g/∂p|` for all nine parameters with step `h(p)`.
pub fn sensitivities_with_step(geom: &CavityGeometry, step: impl Fn(f64) -> f64) -> Vec<Sensitivity> {
    Param::ALL
        .iter()
        .map(|&p| {
            let v = geom.get(p);
            let h = step(v);
            let (vu, vd) = (v + h, v - h);
            let up = geom.with(p, vu).g_extended();
            let down = geom.with(p, vd).g_extended();
            Sensitivity { param: p, value: ((up - down) / (vu - vd)).abs() }
        })
        .collect()
}

/// `|∂g/∂p|` for every distance and focal length by central differences,
/// `h = max(1e−6 mm, 1e−8·|p|)`.
pub fn sensitivities(geom: &CavityGeometry) -> Result<Vec<Sensitivity>> {
    geom.validate()?;
    Ok(sensitivities_with_step(geom, fd_step))
}

/// First-order worst-case tolerance `τ_d = (1 − |g| − S_f·τ_f*) / S_d`.
pub fn linear_tolerance(geom: &CavityGeometry, tau_f_star: f64) -> Result<ToleranceResult> {
    if !(tau_f_star >= 0.0) {
        return Err(Error::invalid("tau_f_star", format!("must be non-negative, got {tau_f_star}")));
    }
    let sens = sensitivities(geom)?;
    let g0 = geom.g_unchecked();
    if !(g0.abs() < 1.0) {
        return Err(Error::UnstableResonator { g: g0 });
    }
    let sum = |set: &[Param]| -> f64 { sens.iter().filter(|s| set.contains(&s.param)).map(|s| s.value).sum() };
    let s_d = sum(&Param::DISTANCES);
    let s_f = sum(&Param::FOCALS);
    let budget = 1.0 - g0.abs() - s_f * tau_f_star;

    let (tau, status) = if budget <= 0.0 {
        log::warn!("focal tolerance {tau_f_star} mm exhausts the stability margin (1 − |g| − S_f·τ_f* = {budget})");
        (0.0, ToleranceStatus::ZeroBudget)
    } else if s_d == 0.0 {
        (f64::INFINITY, ToleranceStatus::Unbounded)
    } else {
        (budget / s_d, ToleranceStatus::Ok)
    };
    let bound = if tau.is_finite() { g0.abs() + s_d * tau + s_f * tau_f_star } else { g0.abs() + s_f * tau_f_star };
    Ok(ToleranceResult {
        tau_d_max: tau,
        g_max_at_result: bound,
        method: Method::Linear,
        status,
        last_tested: None,
        bracket: None,
        sensitivities: sens,
        seed: None,
    })
}
