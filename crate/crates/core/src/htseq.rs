//! Heavy-traffic system sequences indexed by a scale parameter r.
//!
//! A sequence is generated from fixed primitives (an interarrival shape, a
//! processing-time law, a drift constant κ, an initial scaled workload w₀) by
//! pinning the traffic intensity of the r-th system to ρʳ = 1 + κ/r, so that
//! r(ρʳ − 1) = κ exactly for every r. The arrival rate is λʳ = ρʳ/E[v] and
//! interarrival times keep their shape while their mean is rescaled to 1/λʳ.
//!
//! Each system carries a spatial scale cʳ = S⁻¹(r) which grows without bound
//! but slower than any power of r, and a pair of cutoffs
//! lʳ(ε) = S⁻¹(r (cʳ)^{−(2+ε)}) and uʳ(ε) = S⁻¹(r (cʳ)^{2+ε}) fencing the
//! band of job sizes that carries the workload in the limit. The lower cutoff
//! can legitimately be zero when r (cʳ)^{−(2+ε)} does not exceed 1/E[v];
//! diagnostics that divide by it report that case as unavailable rather than
//! producing infinities.

use core::fmt;

use crate::dist::{DistError, ProcTimeDist, SFunction};
use crate::rng::UniformSource;
use crate::sim::{ArrivalStream, JobSet};

#[derive(Debug, Clone, PartialEq)]
pub enum HtError {
    /// An argument is outside its admissible range.
    Invalid {
        what: &'static str,
        value: f64,
    },
    /// A derived scale is zero, so the requested quantity is undefined.
    Degenerate {
        what: &'static str,
        r: f64,
    },
    Dist(DistError),
}

impl fmt::Display for HtError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HtError::Invalid { what, value } => write!(f, "{what}, got {value}"),
            HtError::Degenerate { what, r } => write!(f, "{what} at r = {r}"),
            HtError::Dist(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for HtError {}

impl From<DistError> for HtError {
    fn from(e: DistError) -> Self {
        HtError::Dist(e)
    }
}

/// Interarrival-time shape. Sampling rescales the base law to mean 1/λʳ, so
/// the squared coefficient of variation is shape-only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterarrivalKind {
    Exponential,
    /// Sum of k exponential stages; cv² = 1/k.
    Erlang {
        k: u32,
    },
    /// Exponential with rate `rate1` w.p. `p`, else rate `rate2`.
    Hyperexponential {
        p: f64,
        rate1: f64,
        rate2: f64,
    },
}

impl InterarrivalKind {
    fn validate(&self) -> Result<(), HtError> {
        match *self {
            InterarrivalKind::Exponential => Ok(()),
            InterarrivalKind::Erlang { k } => {
                if k == 0 {
                    return Err(HtError::Invalid {
                        what: "erlang stage count k must be at least 1",
                        value: 0.0,
                    });
                }
                Ok(())
            }
            InterarrivalKind::Hyperexponential { p, rate1, rate2 } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(HtError::Invalid {
                        what: "hyperexponential branch probability p must lie in [0,1]",
                        value: p,
                    });
                }
                for (name, rate) in [
                    ("hyperexponential rate1 must be positive and finite", rate1),
                    ("hyperexponential rate2 must be positive and finite", rate2),
                ] {
                    if !(rate > 0.0 && rate.is_finite()) {
                        return Err(HtError::Invalid {
                            what: name,
                            value: rate,
                        });
                    }
                }
                Ok(())
            }
        }
    }

    /// Mean of the base (unscaled) law.
    fn base_mean(&self) -> f64 {
        match *self {
            InterarrivalKind::Exponential => 1.0,
            InterarrivalKind::Erlang { .. } => 1.0,
            InterarrivalKind::Hyperexponential { p, rate1, rate2 } => p / rate1 + (1.0 - p) / rate2,
        }
    }

    /// Squared coefficient of variation, invariant under the mean rescaling.
    pub fn cv2(&self) -> f64 {
        match *self {
            InterarrivalKind::Exponential => 1.0,
            InterarrivalKind::Erlang { k } => 1.0 / k as f64,
            InterarrivalKind::Hyperexponential { p, rate1, rate2 } => {
                let m0 = p / rate1 + (1.0 - p) / rate2;
                let m2 = 2.0 * (p / (rate1 * rate1) + (1.0 - p) / (rate2 * rate2));
                m2 / (m0 * m0) - 1.0
            }
        }
    }

    /// One interarrival time with mean 1/λʳ. Draw counts are fixed per shape
    /// (1 for exponential, k for Erlang, always 2 for hyperexponential) so a
    /// replay of the same source reproduces the stream exactly.
    pub fn sample(&self, lambda_r: f64, src: &mut impl UniformSource) -> f64 {
        match *self {
            InterarrivalKind::Exponential => -libm::log1p(-src.next_open01()) / lambda_r,
            InterarrivalKind::Erlang { k } => {
                let stage_rate = k as f64 * lambda_r;
                let mut sum = 0.0;
                for _ in 0..k {
                    sum += -libm::log1p(-src.next_open01()) / stage_rate;
                }
                sum
            }
            InterarrivalKind::Hyperexponential { p, rate1, rate2 } => {
                let branch = src.next_open01();
                let u = src.next_open01();
                let rate = if branch < p { rate1 } else { rate2 };
                let raw = -libm::log1p(-u) / rate;
                raw / (lambda_r * self.base_mean())
            }
        }
    }
}

/// Fixed primitives from which the whole r-indexed sequence is built.
#[derive(Debug, Clone, Copy)]
pub struct HeavyTrafficParams {
    pub kappa: f64,
    pub interarrival: InterarrivalKind,
    pub dist: ProcTimeDist,
    pub w0: f64,
}

impl HeavyTrafficParams {
    pub fn new(
        kappa: f64,
        interarrival: InterarrivalKind,
        dist: ProcTimeDist,
        w0: f64,
    ) -> Result<Self, HtError> {
        if !kappa.is_finite() {
            return Err(HtError::Invalid {
                what: "kappa must be finite",
                value: kappa,
            });
        }
        if !(w0 >= 0.0 && w0.is_finite()) {
            return Err(HtError::Invalid {
                what: "w0 must be nonnegative and finite",
                value: w0,
            });
        }
        interarrival.validate()?;
        Ok(HeavyTrafficParams {
            kappa,
            interarrival,
            dist,
            w0,
        })
    }
}

/// The r-th system of the sequence: concrete rates and scales.
#[derive(Debug, Clone, Copy)]
pub struct SystemConfig {
    pub r: f64,
    /// Arrival rate λʳ = (1 + κ/r)/E[v].
    pub lambda_r: f64,
    /// Traffic intensity ρʳ = 1 + κ/r, held exactly so r(ρʳ − 1) = κ.
    pub rho_r: f64,
    /// Spatial scale cʳ = S⁻¹(r); zero when r ≤ S(0).
    pub c_r: f64,
    /// Interarrival standard deviation, cv/λʳ.
    pub sigma_a_r: f64,
    pub dist: ProcTimeDist,
    pub interarrival: InterarrivalKind,
}

impl SystemConfig {
    /// ρₓʳ = λʳ E[v·1{v ≤ x}], the offered load carried by jobs of size ≤ x.
    pub fn rho_below(&self, x: f64) -> f64 {
        self.lambda_r * self.dist.truncated_first_moment(x)
    }
}

/// Band cutoffs for one ε: l = S⁻¹(r (cʳ)^{−(2+ε)}), u = S⁻¹(r (cʳ)^{2+ε}).
#[derive(Debug, Clone, Copy)]
pub struct Thresholds {
    pub epsilon: f64,
    pub l: f64,
    pub u: f64,
}

/// Instantiate the r-th system. Requires r > 1 and 1 + κ/r > 0.
pub fn make_system(params: &HeavyTrafficParams, r: f64) -> Result<SystemConfig, HtError> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(HtError::Invalid {
            what: "scale parameter r must exceed 1",
            value: r,
        });
    }
    let rho_r = 1.0 + params.kappa / r;
    if rho_r <= 0.0 {
        return Err(HtError::Invalid {
            what: "traffic intensity 1 + kappa/r must be positive",
            value: rho_r,
        });
    }
    let lambda_r = rho_r / params.dist.mean();
    let sf = SFunction::new(params.dist);
    let c_r = sf.s_inverse(r)?;
    let sigma_a_r = libm::sqrt(params.interarrival.cv2()) / lambda_r;
    Ok(SystemConfig {
        r,
        lambda_r,
        rho_r,
        c_r,
        sigma_a_r,
        dist: params.dist,
        interarrival: params.interarrival,
    })
}

/// Band cutoffs for the given ε > 0. Requires cʳ > 0; the lower cutoff may
/// still come back 0 when the deflated level r (cʳ)^{−(2+ε)} is below S(0).
pub fn thresholds(cfg: &SystemConfig, epsilon: f64) -> Result<Thresholds, HtError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(HtError::Invalid {
            what: "epsilon must be positive and finite",
            value: epsilon,
        });
    }
    if cfg.c_r <= 0.0 {
        return Err(HtError::Degenerate {
            what: "band cutoffs require a positive spatial scale c_r = S_inv(r)",
            r: cfg.r,
        });
    }
    let sf = SFunction::new(cfg.dist);
    let pow = libm::pow(cfg.c_r, 2.0 + epsilon);
    let l = sf.s_inverse(cfg.r / pow)?;
    let u = sf.s_inverse(cfg.r * pow)?;
    Ok(Thresholds { epsilon, l, u })
}

/// cʳ/lʳ(ε), the contraction factor of the band below the spatial scale.
/// Unavailable while l = 0.
pub fn ratio_diagnostic(cfg: &SystemConfig, th: &Thresholds) -> Result<f64, HtError> {
    if th.l <= 0.0 {
        return Err(HtError::Degenerate {
            what: "c_r/l ratio is unavailable because the lower cutoff is zero",
            r: cfg.r,
        });
    }
    Ok(cfg.c_r / th.l)
}

/// Deterministic initial condition: ⌊w₀ r / cʳ⌋ jobs, each of size exactly
/// cʳ. The job count is chosen so the scaled initial workload converges to w₀
/// from below as r grows.
pub fn initial_condition(cfg: &SystemConfig, w0: f64) -> Result<JobSet, HtError> {
    if !(w0 >= 0.0 && w0.is_finite()) {
        return Err(HtError::Invalid {
            what: "w0 must be nonnegative and finite",
            value: w0,
        });
    }
    if w0 == 0.0 {
        return Ok(JobSet::empty());
    }
    if cfg.c_r <= 0.0 {
        return Err(HtError::Degenerate {
            what: "initial condition requires a positive spatial scale c_r = S_inv(r)",
            r: cfg.r,
        });
    }
    let count = libm::floor(w0 * cfg.r / cfg.c_r) as u64;
    Ok(JobSet::uniform(count, cfg.c_r))
}

/// Random arrival stream for one system: renewal interarrivals at rate λʳ
/// with the configured shape, i.i.d. processing times from the configured
/// law. Arrival and size draws come from separate sources so either margin
/// can be varied while the other is held fixed.
pub struct RenewalStream<A: UniformSource, S: UniformSource> {
    kind: InterarrivalKind,
    lambda_r: f64,
    dist: ProcTimeDist,
    arrivals: A,
    sizes: S,
    now: f64,
}

impl<A: UniformSource, S: UniformSource> RenewalStream<A, S> {
    pub fn new(cfg: &SystemConfig, arrivals: A, sizes: S) -> Self {
        RenewalStream {
            kind: cfg.interarrival,
            lambda_r: cfg.lambda_r,
            dist: cfg.dist,
            arrivals,
            sizes,
            now: 0.0,
        }
    }
}

impl<A: UniformSource, S: UniformSource> ArrivalStream for RenewalStream<A, S> {
    fn next_arrival(&mut self) -> Option<(f64, f64)> {
        self.now += self.kind.sample(self.lambda_r, &mut self.arrivals);
        let size = self.dist.sample_with(&mut self.sizes);
        Some((self.now, size))
    }
}
