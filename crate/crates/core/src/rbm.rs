//! Reflected Brownian motion: the limit object the scaled workload converges
//! to, simulated for distributional comparison.
//!
//! `reflect` applies the Skorokhod map to a discrete path,
//! out(t) = w₀ + X(t) + max(0, sup_{s≤t} −(w₀ + X(s))).
//!
//! `simulate_rbm` draws Gaussian increments per step and, before reflecting,
//! inserts each step's Brownian-bridge minimum
//! m = (a + b − sqrt((b − a)² − 2σ²h·ln U))/2 between the endpoints. Without
//! this the reflection only sees the knots and inherits an O(√h) upward bias
//! at the boundary (Asmussen, Glynn & Pitman 1995); with it the endpoint law
//! is accurate enough for Kolmogorov-Smirnov comparison at 10⁴ paths.
//!
//! `marginal_cdf` is the closed-form law of the point value started at 0:
//! P(W(t) ≤ w) = Φ((w − κt)/(σ√t)) − e^{2κw/σ²} Φ((−w − κt)/(σ√t)).
//!
//! `system_variance` maps queue primitives to the limit variance
//! σ² = λ(σₐ² + σₛ²) with λ = 1/E[v] and σₐ the interarrival standard
//! deviation at that rate.

use alloc::vec::Vec;
use core::fmt;

use crate::htseq::HeavyTrafficParams;
use crate::rng::{standard_normal, UniformSource};
use crate::special::normal_cdf;

#[derive(Debug, Clone, PartialEq)]
pub enum RbmError {
    Invalid { what: &'static str, value: f64 },
}

impl fmt::Display for RbmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let RbmError::Invalid { what, value } = self;
        write!(f, "{what}, got {value}")
    }
}

impl core::error::Error for RbmError {}

#[derive(Debug, Clone, Copy)]
pub struct RbmParams {
    pub drift: f64,
    pub variance: f64,
    pub w0: f64,
    pub step: f64,
}

impl RbmParams {
    pub fn new(drift: f64, variance: f64, w0: f64, step: f64) -> Result<Self, RbmError> {
        if !drift.is_finite() {
            return Err(RbmError::Invalid {
                what: "drift must be finite",
                value: drift,
            });
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(RbmError::Invalid {
                what: "variance must be positive and finite",
                value: variance,
            });
        }
        if !(w0 >= 0.0 && w0.is_finite()) {
            return Err(RbmError::Invalid {
                what: "w0 must be nonnegative and finite",
                value: w0,
            });
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(RbmError::Invalid {
                what: "step must be positive and finite",
                value: step,
            });
        }
        Ok(RbmParams {
            drift,
            variance,
            w0,
            step,
        })
    }
}

/// Skorokhod reflection of the free path levels X(t₀), X(t₁), … about 0,
/// started at w₀. Entry j is w₀ + X(tⱼ) pushed up by the running boundary
/// local time.
pub fn reflect(path: &[f64], w0: f64) -> Vec<f64> {
    let mut pushed = 0.0f64;
    let mut out = Vec::with_capacity(path.len());
    for &x in path {
        pushed = pushed.max(-w0 - x);
        out.push(w0 + x + pushed);
    }
    out
}

/// Simulate one reflected path on the regular grid 0, step, …, horizon and
/// return its gridpoint values (n+1 of them). Consumes exactly 3 uniforms per
/// step: two for the Gaussian increment, one for the bridge minimum.
pub fn simulate_rbm(
    p: &RbmParams,
    horizon: f64,
    src: &mut impl UniformSource,
) -> Result<Vec<f64>, RbmError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(RbmError::Invalid {
            what: "horizon must be positive and finite",
            value: horizon,
        });
    }
    let n = libm::round(horizon / p.step);
    if n < 1.0 || libm::fabs(n * p.step - horizon) > 1e-9 * horizon.max(1.0) {
        return Err(RbmError::Invalid {
            what: "step must divide the horizon",
            value: p.step,
        });
    }
    let n = n as usize;
    let sigma = libm::sqrt(p.variance);
    let sqrt_h = libm::sqrt(p.step);
    // Free-path levels with the per-step bridge minimum interleaved, so the
    // reflection sees the within-step infimum.
    let mut levels = Vec::with_capacity(2 * n + 1);
    let mut x = 0.0f64;
    levels.push(x);
    for _ in 0..n {
        let z = standard_normal(src);
        let u3 = src.next_open01();
        let a = x;
        x += p.drift * p.step + sigma * sqrt_h * z;
        let span = x - a;
        let m = 0.5 * (a + x - libm::sqrt(span * span - 2.0 * p.variance * p.step * libm::log(u3)));
        levels.push(m);
        levels.push(x);
    }
    let reflected = reflect(&levels, p.w0);
    Ok(reflected.into_iter().step_by(2).collect())
}

/// P(W(t) ≤ w) for the reflection started at 0 with drift κ and variance σ².
/// Requires t > 0; the far-tail product e^{2κw/σ²}Φ(−z) is evaluated through
/// its exponent when the Gaussian factor underflows.
pub fn marginal_cdf(drift: f64, variance: f64, t: f64, w: f64) -> Result<f64, RbmError> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(RbmError::Invalid {
            what: "variance must be positive and finite",
            value: variance,
        });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(RbmError::Invalid {
            what: "time must be positive and finite",
            value: t,
        });
    }
    if w < 0.0 {
        return Ok(0.0);
    }
    let sigma_t = libm::sqrt(variance * t);
    let term1 = normal_cdf((w - drift * t) / sigma_t);
    let z2 = (w + drift * t) / sigma_t;
    let phi2 = normal_cdf(-z2);
    let term2 = if phi2 > 1e-300 {
        libm::exp(2.0 * drift * w / variance) * phi2
    } else {
        // Mills-ratio form: the combined exponent collapses to the Gaussian
        // with reflected mean, which stays representable.
        let ex = -(w - drift * t) * (w - drift * t) / (2.0 * variance * t);
        libm::exp(ex) / (z2 * 2.5066282746310005024)
    };
    Ok((term1 - term2).clamp(0.0, 1.0))
}

/// Limit variance of the workload diffusion from the queue primitives:
/// λ(σₐ² + σₛ²) at the critical rate λ = 1/E[v].
pub fn system_variance(p: &HeavyTrafficParams) -> f64 {
    let mean = p.dist.mean();
    let lambda = 1.0 / mean;
    let sigma_a2 = p.interarrival.cv2() * mean * mean;
    lambda * (sigma_a2 + p.dist.variance())
}
