//! Monte Carlo measurement simulation and maximum-likelihood estimation
//! against the Cramér–Rao bound.
//!
//! Sampling is multinomial by inverse CDF on a counter-based deterministic
//! generator (ChaCha12), with per-trial seeds derived from the master seed by
//! a splitmix hash, so results are reproducible regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::channel::{ParamKrausFamily, QuantumState};
use crate::error::{Error, Result};
use crate::fisher::{classical_fisher, Povm, EPS_PROB};
use crate::linalg::trace_product;

/// Scan ceiling for maximum-likelihood search on families whose parameter
/// domain is unbounded above. All builtin channels' outcome statistics
/// saturate exponentially long before this.
pub const MLE_UNBOUNDED_CAP: f64 = 50.0;

/// Absolute inset pulling the likelihood scan inside the open domain.
pub const MLE_DOMAIN_INSET: f64 = 1e-6;

const SCAN_POINTS: usize = 200;
const GOLDEN_WIDTH: f64 = 1e-9;

/// Measurement record for one batch of shots.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeSample {
    pub counts: Vec<u64>,
    pub n_total: u64,
    pub true_theta: f64,
    pub seed: u64,
}

/// Monte Carlo trial statistics versus the Cramér–Rao bound.
#[derive(Debug, Clone, Serialize)]
pub struct EstimationReport {
    pub n_shots: u64,
    pub n_trials: u64,
    pub estimates: Vec<f64>,
    pub empirical_variance: f64,
    pub crlb: f64,
    pub ratio: f64,
    pub bias: f64,
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-trial seed from the master seed and trial index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Outcome probabilities tr(E_ξ ρ(θ)), clipped at zero and renormalized when
/// the total is within 1e-9 of one.
pub fn outcome_probabilities(
    povm: &Povm,
    family: &ParamKrausFamily,
    theta: f64,
    rho0: &QuantumState,
) -> Result<Vec<f64>> {
    let rho = family.output_state(theta, rho0)?;
    let mut probs: Vec<f64> = povm
        .effects()
        .iter()
        .map(|e| trace_product(e, &rho).re.max(0.0))
        .collect();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Normalization(total));
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    Ok(probs)
}

/// Draws `n` shots from the outcome distribution at `theta`. Identical
/// inputs and seed give identical counts.
pub fn sample_outcomes(
    povm: &Povm,
    family: &ParamKrausFamily,
    theta: f64,
    rho0: &QuantumState,
    n: u64,
    seed: u64,
) -> Result<OutcomeSample> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one shot".into()));
    }
    let probs = outcome_probabilities(povm, family, theta, rho0)?;
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in &probs {
        acc += p;
        cumulative.push(acc);
    }
    // Guard the final bin against rounding of the running sum.
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..n {
        let u: f64 = rng.gen();
        let idx = cumulative.partition_point(|&edge| edge <= u);
        counts[idx.min(probs.len() - 1)] += 1;
    }
    Ok(OutcomeSample {
        counts,
        n_total: n,
        true_theta: theta,
        seed,
    })
}

fn log_likelihood(
    counts: &[u64],
    povm: &Povm,
    family: &ParamKrausFamily,
    theta: f64,
    rho0: &QuantumState,
) -> Result<f64> {
    let probs = outcome_probabilities(povm, family, theta, rho0)?;
    let mut ll = 0.0;
    for (&count, &p) in counts.iter().zip(probs.iter()) {
        if count == 0 {
            continue;
        }
        if p <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ll += count as f64 * p.ln();
    }
    Ok(ll)
}

/// Maximum-likelihood estimate of θ from observed counts: a 200-point coarse
/// scan over the (inset) domain followed by golden-section refinement down to
/// an interval width of 1e-9. Ties resolve toward the smaller θ.
pub fn mle_estimate(
    sample: &OutcomeSample,
    povm: &Povm,
    family: &ParamKrausFamily,
    rho0: &QuantumState,
) -> Result<f64> {
    if sample.counts.len() != povm.len() {
        return Err(Error::InvalidConfig(format!(
            "sample has {} outcome bins, POVM has {}",
            sample.counts.len(),
            povm.len()
        )));
    }
    let dom = family.domain();
    let lo = dom.lo + MLE_DOMAIN_INSET;
    let hi = if dom.hi.is_finite() {
        dom.hi - MLE_DOMAIN_INSET
    } else {
        MLE_UNBOUNDED_CAP
    };
    if !(hi > lo) {
        return Err(Error::InvalidConfig(format!(
            "degenerate scan interval [{lo}, {hi}]"
        )));
    }

    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let mut best_idx = 0usize;
    let mut best_ll = f64::NEG_INFINITY;
    for i in 0..SCAN_POINTS {
        let theta = lo + step * i as f64;
        let ll = log_likelihood(&sample.counts, povm, family, theta, rho0)?;
        if ll > best_ll {
            best_ll = ll;
            best_idx = i;
        }
    }
    if best_ll == f64::NEG_INFINITY {
        return Err(Error::AllZeroLikelihood);
    }

    let mut a = lo + step * best_idx.saturating_sub(1) as f64;
    let mut b = lo + step * (best_idx + 1).min(SCAN_POINTS - 1) as f64;
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = log_likelihood(&sample.counts, povm, family, x1, rho0)?;
    let mut f2 = log_likelihood(&sample.counts, povm, family, x2, rho0)?;
    while b - a > GOLDEN_WIDTH {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = log_likelihood(&sample.counts, povm, family, x1, rho0)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = log_likelihood(&sample.counts, povm, family, x2, rho0)?;
        }
    }
    let mid = 0.5 * (a + b);
    // The refined optimum can only be accepted if it actually beats the scan
    // grid; otherwise keep the grid point (flat or boundary likelihoods).
    let mid_ll = log_likelihood(&sample.counts, povm, family, mid, rho0)?;
    Ok(if mid_ll >= best_ll {
        mid
    } else {
        lo + step * best_idx as f64
    })
}

/// Runs `n_trials` independent sample-then-estimate cycles and compares the
/// empirical estimator variance with 1/(N·F) at the true θ.
pub fn crlb_experiment(
    povm: &Povm,
    family: &ParamKrausFamily,
    theta: f64,
    rho0: &QuantumState,
    n_shots: u64,
    n_trials: u64,
    seed: u64,
) -> Result<EstimationReport> {
    if n_trials < 2 {
        return Err(Error::InvalidConfig(
            "need at least two trials for a variance".into(),
        ));
    }
    let fisher = classical_fisher(povm, family, theta, rho0)?;
    if fisher <= EPS_PROB {
        return Err(Error::Numeric(format!(
            "Fisher information {fisher:.3e} too small for a Cramér-Rao reference"
        )));
    }
    let crlb = 1.0 / (n_shots as f64 * fisher);

    let mut estimates = Vec::with_capacity(n_trials as usize);
    for trial in 0..n_trials {
        let trial_seed = derive_seed(seed, trial);
        let sample = sample_outcomes(povm, family, theta, rho0, n_shots, trial_seed)?;
        estimates.push(mle_estimate(&sample, povm, family, rho0)?);
    }
    // Sorting makes the aggregation independent of trial scheduling.
    estimates.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let empirical_variance =
        estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(EstimationReport {
        n_shots,
        n_trials,
        ratio: empirical_variance / crlb,
        bias: mean - theta,
        estimates,
        empirical_variance,
        crlb,
    })
}
