//! Processing-time distributions and the tail first-moment function.
//!
//! The service-time family is Weibull with tail F̄(x) = exp(−(βx)^α), shape
//! α > 0 and rate β > 0; the exponential law is the α = 1 member. Closed-form
//! moments:
//!
//! | quantity                  | value                                   |
//! |---------------------------|-----------------------------------------|
//! | mean E\[v\]               | Γ(1 + 1/α) / β                          |
//! | second moment E\[v²\]     | Γ(1 + 2/α) / β²                         |
//! | E\[v·1{v>x}\]             | Γᵘ(1 + 1/α, (βx)^α) / β                 |
//! | E\[v²·1{v≤x}\]            | Γˡ(1 + 2/α, (βx)^α) / β²                |
//!
//! On top of the family sits `SFunction`: S(x) = 1 / E[v·1{v>x}], a positive,
//! nondecreasing, continuous, unbounded and rapidly varying function, and its
//! right-continuous generalized inverse S⁻¹(y) = inf{x ≥ 0 : S(x) > y},
//! evaluated by monotone bisection. S⁻¹ is slowly varying; the rate statistic
//! `svrate_statistic` quantifies how fast (S⁻¹(cy)/S⁻¹(y) − 1)·ln S⁻¹(y)
//! decays, which separates admissible inverses from slowly varying functions
//! like exp((ln y)^δ) where it does not decay.

use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::rng::UniformSource;
use crate::special::{reg_lower_gamma, reg_upper_gamma};

/// Default relative tolerance for `SFunction` inversion.
pub const DEFAULT_INVERSION_TOL: f64 = 1e-10;

const MAX_BRACKET_DOUBLINGS: u32 = 200;
const MAX_BISECT_ITER: u32 = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum DistError {
    /// A constructor argument is outside its admissible range.
    InvalidParameter { name: &'static str, value: f64 },
    /// An operation argument is outside the operation's domain.
    Domain { what: &'static str, value: f64 },
    /// Bisection failed to bracket or converge; parameters are pathological.
    InversionFailure { y: f64 },
}

impl fmt::Display for DistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistError::InvalidParameter { name, value } => {
                write!(f, "{name} must be positive and finite, got {value}")
            }
            DistError::Domain { what, value } => {
                write!(f, "{what}, got {value}")
            }
            DistError::InversionFailure { y } => {
                write!(f, "S-inversion did not converge for y = {y}")
            }
        }
    }
}

impl core::error::Error for DistError {}

/// A continuous processing-time law with closed-form tail and moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcTimeDist {
    Weibull { alpha: f64, beta: f64 },
}

impl fmt::Display for ProcTimeDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ProcTimeDist::Weibull { alpha, beta } = self;
        write!(f, "weibull(alpha={alpha}, beta={beta})")
    }
}

impl ProcTimeDist {
    /// Weibull with tail exp(−(βx)^α). Requires finite α > 0, β > 0.
    pub fn weibull(alpha: f64, beta: f64) -> Result<Self, DistError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(DistError::InvalidParameter {
                name: "alpha",
                value: alpha,
            });
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(DistError::InvalidParameter {
                name: "beta",
                value: beta,
            });
        }
        Ok(ProcTimeDist::Weibull { alpha, beta })
    }

    /// Exponential with the given rate: the Weibull α = 1 member.
    pub fn exponential(rate: f64) -> Result<Self, DistError> {
        Self::weibull(1.0, rate)
    }

    pub fn alpha(&self) -> f64 {
        let ProcTimeDist::Weibull { alpha, .. } = self;
        *alpha
    }

    pub fn beta(&self) -> f64 {
        let ProcTimeDist::Weibull { beta, .. } = self;
        *beta
    }

    /// F̄(x) = P(v > x) = exp(−(βx)^α) for x ≥ 0.
    pub fn tail(&self, x: f64) -> f64 {
        let ProcTimeDist::Weibull { alpha, beta } = self;
        debug_assert!(x >= 0.0);
        libm::exp(-libm::pow(beta * x, *alpha))
    }

    /// F(x) = 1 − F̄(x).
    pub fn cdf(&self, x: f64) -> f64 {
        let ProcTimeDist::Weibull { alpha, beta } = self;
        debug_assert!(x >= 0.0);
        -libm::expm1(-libm::pow(beta * x, *alpha))
    }

    /// E[v] = Γ(1 + 1/α)/β.
    pub fn mean(&self) -> f64 {
        let ProcTimeDist::Weibull { alpha, beta } = self;
        crate::special::gamma(1.0 + 1.0 / alpha) / beta
    }

    /// E[v²] = Γ(1 + 2/α)/β².
    pub fn second_moment(&self) -> f64 {
        let ProcTimeDist::Weibull { alpha, beta } = self;
        crate::special::gamma(1.0 + 2.0 / alpha) / (beta * beta)
    }

    /// Var(v) = E[v²] − E[v]².
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment() - m * m
    }

    /// E[v·1{v > x}], the reciprocal of S(x). Decreasing in x, mean at x = 0.
    /// For α = 1 the closed form (1 + βx)e^{−βx}/β is used directly.
    pub fn tail_first_moment(&self, x: f64) -> f64 {
        let ProcTimeDist::Weibull { alpha, beta } = self;
        debug_assert!(x >= 0.0);
        if *alpha == 1.0 {
            return (1.0 + beta * x) * libm::exp(-beta * x) / beta;
        }
        self.mean() * reg_upper_gamma(1.0 + 1.0 / alpha, libm::pow(beta * x, *alpha))
    }

    /// E[v·1{v ≤ x}] = mean − tail first moment. Nondecreasing, 0 at x = 0.
    pub fn truncated_first_moment(&self, x: f64) -> f64 {
        self.mean() - self.tail_first_moment(x)
    }

    /// E[v²·1{v ≤ x}]. Nondecreasing, tends to E[v²] as x → ∞.
    pub fn truncated_second_moment(&self, x: f64) -> f64 {
        let ProcTimeDist::Weibull { alpha, beta } = self;
        debug_assert!(x >= 0.0);
        self.second_moment() * reg_lower_gamma(1.0 + 2.0 / alpha, libm::pow(beta * x, *alpha))
    }

    /// Inverse-CDF transform of a uniform (0,1) variate:
    /// v = (−ln(1 − u))^{1/α}/β, strictly positive.
    pub fn sample(&self, u: f64) -> Result<f64, DistError> {
        let ProcTimeDist::Weibull { alpha, beta } = self;
        if !(u > 0.0 && u < 1.0) {
            return Err(DistError::Domain {
                what: "sample requires a uniform variate in (0,1)",
                value: u,
            });
        }
        let e = -libm::log1p(-u);
        Ok(if *alpha == 1.0 {
            e / beta
        } else {
            libm::pow(e, 1.0 / alpha) / beta
        })
    }

    /// `sample` fed from a variate source. Consumes exactly one uniform.
    pub fn sample_with(&self, src: &mut impl UniformSource) -> f64 {
        self.sample(src.next_open01()).expect("source in (0,1)")
    }
}

/// The tail first-moment reciprocal S(x) = 1/E[v·1{v>x}] and its generalized
/// inverse S⁻¹(y) = inf{x ∈ R₊ : S(x) > y}.
///
/// S(0) = 1/E[v]; S is nondecreasing, continuous, and unbounded. For
/// y ≤ S(0) the defining set is all of R₊ and S⁻¹(y) = 0. The inversion
/// bracket grows by doubling until S(2ᵏ) > y, then monotone bisection runs to
/// `inversion_tolerance` (relative); the returned x satisfies S(x) > y.
#[derive(Debug)]
pub struct SFunction {
    dist: ProcTimeDist,
    inversion_tolerance: f64,
    // Upper-bracket hint from the previous inversion (f64 bits). Queries at
    // nearby y then skip most of the doubling phase.
    bracket_hint: AtomicU64,
}

impl SFunction {
    pub fn new(dist: ProcTimeDist) -> Self {
        Self::with_tolerance(dist, DEFAULT_INVERSION_TOL)
    }

    pub fn with_tolerance(dist: ProcTimeDist, inversion_tolerance: f64) -> Self {
        SFunction {
            dist,
            inversion_tolerance,
            bracket_hint: AtomicU64::new(1.0f64.to_bits()),
        }
    }

    pub fn dist(&self) -> &ProcTimeDist {
        &self.dist
    }

    /// S(x) = 1/E[v·1{v>x}].
    pub fn s_value(&self, x: f64) -> f64 {
        1.0 / self.dist.tail_first_moment(x)
    }

    /// S⁻¹(y) = inf{x : S(x) > y}; 0 whenever y ≤ S(0).
    pub fn s_inverse(&self, y: f64) -> Result<f64, DistError> {
        if y <= self.s_value(0.0) {
            return Ok(0.0);
        }
        let mut hi = f64::from_bits(self.bracket_hint.load(Ordering::Relaxed)).max(1.0);
        let mut doublings = 0;
        while self.s_value(hi) <= y {
            hi *= 2.0;
            doublings += 1;
            if doublings > MAX_BRACKET_DOUBLINGS {
                return Err(DistError::InversionFailure { y });
            }
        }
        let mut lo = 0.0f64;
        let tol = self.inversion_tolerance;
        for _ in 0..MAX_BISECT_ITER {
            if hi - lo <= tol * (1.0 + hi) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.s_value(mid) > y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if hi - lo > tol * (1.0 + hi) {
            return Err(DistError::InversionFailure { y });
        }
        self.bracket_hint.store(hi.to_bits(), Ordering::Relaxed);
        Ok(hi)
    }
}

/// The slow-variation rate statistic (f(cy)/f(y) − 1)·ln f(y).
///
/// For f = S⁻¹ of a Weibull law this decays to 0 along a geometric y-grid;
/// for f(y) = exp((ln y)^δ) with δ ∈ [1/2, 1) it does not.
pub fn svrate_statistic<F: Fn(f64) -> f64>(f: F, c: f64, y: f64) -> Result<f64, DistError> {
    if !(c > 1.0) {
        return Err(DistError::Domain {
            what: "svrate_statistic requires c > 1",
            value: c,
        });
    }
    let fy = f(y);
    if !(fy > 1.0) {
        return Err(DistError::Domain {
            what: "svrate_statistic requires f(y) > 1",
            value: fy,
        });
    }
    Ok((f(c * y) / fy - 1.0) * libm::log(fy))
}
