//! Ensemble statistics over scaled paths: per-path summaries, medians across
//! replications, monotone-trend reports across the scale parameter r, and
//! distributional checks (Kolmogorov-Smirnov, load-process variance).
//!
//! The convergence claims under test are all of the form "statistic Xʳ
//! shrinks as r grows". Each ensemble (fixed r, many independent paths)
//! is reduced to a median, and a `TrendReport` records whether successive
//! medians decay by at least the margin: report i+1 must satisfy
//! median_{i+1} ≤ median_i · (1 − margin). Positive deterministic multipliers
//! such as cʳr commute with the median, so they are applied after reduction.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::htseq::{SystemConfig, Thresholds};
use crate::rbm::{marginal_cdf, RbmError};
use crate::rng::{stream_seed, ChaChaSource, StreamTag};
use crate::scaling::{ScaleError, ScaledPath};

#[derive(Debug, Clone, PartialEq)]
pub enum StatsError {
    Empty { what: &'static str },
    Invalid { what: &'static str, value: f64 },
    Mismatched { what: &'static str },
    Scale(ScaleError),
    Rbm(RbmError),
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::Empty { what } => write!(f, "{what} must not be empty"),
            StatsError::Invalid { what, value } => write!(f, "{what}, got {value}"),
            StatsError::Mismatched { what } => write!(f, "{what}"),
            StatsError::Scale(e) => write!(f, "{e}"),
            StatsError::Rbm(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for StatsError {}

impl From<ScaleError> for StatsError {
    fn from(e: ScaleError) -> Self {
        StatsError::Scale(e)
    }
}

impl From<RbmError> for StatsError {
    fn from(e: RbmError) -> Self {
        StatsError::Rbm(e)
    }
}

/// Median with the even-count average convention.
pub fn median(xs: &[f64]) -> Result<f64, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty {
            what: "median input",
        });
    }
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a − F_b|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty { what: "KS sample" });
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            i += 1;
        } else if b[j] < a[i] {
            j += 1;
        } else {
            let x = a[i];
            while i < a.len() && a[i] == x {
                i += 1;
            }
            while j < b.len() && b[j] == x {
                j += 1;
            }
        }
        d = d.max(libm::fabs(i as f64 / na - j as f64 / nb));
    }
    Ok(d)
}

/// One-sample two-sided Kolmogorov-Smirnov statistic against a CDF.
pub fn ks_vs_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty { what: "KS sample" });
    }
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Per-band (one ε) path statistics, all sups over the scaled grid.
#[derive(Debug, Clone, Copy)]
pub struct BandSummary {
    pub epsilon: f64,
    pub l: f64,
    pub u: f64,
    /// sup ⟨1∧χ·1_{[0,l]}, Z̃⟩; 0 when l = 0 (the region is empty).
    pub sup_below_one_chi_tilde: f64,
    /// sup ⟨χ1_{(u,∞)}, Ẑ⟩ = sup (Ŵ − region work below u).
    pub sup_above_work_hat: f64,
    /// sup θ̂(·, l); 0 when l = 0.
    pub sup_theta_band: f64,
}

/// One scaled path reduced to the statistics the trends consume.
#[derive(Debug, Clone)]
pub struct PathSummary {
    /// sup |Q̃ − Ŵ|.
    pub gap: f64,
    pub qtilde_end: f64,
    pub what_end: f64,
    /// sup θ̂(·, x) per fixed level, parallel to the ensemble's `fixed_xs`.
    pub sup_theta_x: Vec<f64>,
    pub bands: Vec<BandSummary>,
}

pub fn summarize_path(
    sp: &ScaledPath,
    fixed_xs: &[f64],
    bands: &[Thresholds],
) -> Result<PathSummary, StatsError> {
    if sp.is_empty() {
        return Err(StatsError::Empty {
            what: "scaled path",
        });
    }
    let sup = |col: &[f64]| col.iter().fold(0.0f64, |a, &b| a.max(b));

    let mut sup_theta_x = Vec::with_capacity(fixed_xs.len());
    for &x in fixed_xs {
        let idx = sp
            .threshold_index(x)
            .ok_or(ScaleError::UnknownThreshold { x })?;
        sup_theta_x.push(sup(&sp.per_x[idx].theta_scaled));
    }

    let mut band_summaries = Vec::with_capacity(bands.len());
    for th in bands {
        let ui = sp
            .threshold_index(th.u)
            .ok_or(ScaleError::UnknownThreshold { x: th.u })?;
        let above = sp
            .what
            .iter()
            .zip(&sp.per_x[ui].work_in_hat)
            .map(|(w, inside)| w - inside)
            .fold(0.0f64, f64::max);
        let (below, theta_band) = if th.l > 0.0 {
            let li = sp
                .threshold_index(th.l)
                .ok_or(ScaleError::UnknownThreshold { x: th.l })?;
            (
                sup(&sp.per_x[li].one_chi_in_tilde),
                sup(&sp.per_x[li].theta_scaled),
            )
        } else {
            (0.0, 0.0)
        };
        band_summaries.push(BandSummary {
            epsilon: th.epsilon,
            l: th.l,
            u: th.u,
            sup_below_one_chi_tilde: below,
            sup_above_work_hat: above,
            sup_theta_band: theta_band,
        });
    }

    Ok(PathSummary {
        gap: sp.gap_statistic(),
        qtilde_end: *sp.qtilde.last().expect("nonempty path"),
        what_end: *sp.what.last().expect("nonempty path"),
        sup_theta_x,
        bands: band_summaries,
    })
}

/// All replications of one system in the sequence.
#[derive(Debug, Clone)]
pub struct ReplicationEnsemble {
    pub r: f64,
    pub c_r: f64,
    pub lambda_r: f64,
    pub fixed_xs: Vec<f64>,
    pub bands: Vec<Thresholds>,
    pub summaries: Vec<PathSummary>,
}

impl ReplicationEnsemble {
    pub fn gaps(&self) -> Vec<f64> {
        self.summaries.iter().map(|s| s.gap).collect()
    }

    pub fn terminal_qtilde(&self) -> Vec<f64> {
        self.summaries.iter().map(|s| s.qtilde_end).collect()
    }

    pub fn median_gap(&self) -> Result<f64, StatsError> {
        median(&self.gaps())
    }

    fn band_index(&self, epsilon: f64) -> Result<usize, StatsError> {
        self.bands
            .iter()
            .position(|b| b.epsilon == epsilon)
            .ok_or(StatsError::Invalid {
                what: "epsilon is not among the ensemble's bands",
                value: epsilon,
            })
    }

    fn fixed_x_index(&self, x: f64) -> Result<usize, StatsError> {
        self.fixed_xs
            .iter()
            .position(|&v| v == x)
            .ok_or(StatsError::Invalid {
                what: "x is not among the ensemble's fixed levels",
                value: x,
            })
    }
}

/// Decay record across r. The flag is true iff every successive median is at
/// most the previous one times (1 − margin).
#[derive(Debug, Clone)]
pub struct TrendReport {
    pub statistic: String,
    pub r: Vec<f64>,
    pub median: Vec<f64>,
    pub monotone_decreasing: bool,
    pub margin: f64,
}

impl TrendReport {
    pub fn new(
        statistic: &str,
        r: Vec<f64>,
        median: Vec<f64>,
        margin: f64,
    ) -> Result<Self, StatsError> {
        if r.len() != median.len() {
            return Err(StatsError::Mismatched {
                what: "trend r and median vectors differ in length",
            });
        }
        if !(0.0..1.0).contains(&margin) {
            return Err(StatsError::Invalid {
                what: "trend margin must lie in [0, 1)",
                value: margin,
            });
        }
        let monotone_decreasing = median.windows(2).all(|w| w[1] <= w[0] * (1.0 - margin));
        Ok(TrendReport {
            statistic: String::from(statistic),
            r,
            median,
            monotone_decreasing,
            margin,
        })
    }
}

fn trend_over(
    statistic: &str,
    ensembles: &[ReplicationEnsemble],
    margin: f64,
    mut value: impl FnMut(&ReplicationEnsemble) -> Result<Option<f64>, StatsError>,
) -> Result<TrendReport, StatsError> {
    let mut rs = Vec::new();
    let mut medians = Vec::new();
    for ens in ensembles {
        if let Some(v) = value(ens)? {
            rs.push(ens.r);
            medians.push(v);
        }
    }
    TrendReport::new(statistic, rs, medians, margin)
}

/// Median over replications of sup |Q̃ − Ŵ| per r.
pub fn gap_trend(
    ensembles: &[ReplicationEnsemble],
    margin: f64,
) -> Result<TrendReport, StatsError> {
    trend_over("gap", ensembles, margin, |ens| ens.median_gap().map(Some))
}

/// Median of cʳ r · sup θ̂(·, x) per r, for a fixed level x.
pub fn theta_fixed_x_trend(
    ensembles: &[ReplicationEnsemble],
    x: f64,
    margin: f64,
) -> Result<TrendReport, StatsError> {
    let statistic = alloc::format!("theta_x={x}");
    trend_over(&statistic, ensembles, margin, |ens| {
        let xi = ens.fixed_x_index(x)?;
        let sups: Vec<f64> = ens.summaries.iter().map(|s| s.sup_theta_x[xi]).collect();
        Ok(Some(ens.c_r * ens.r * median(&sups)?))
    })
}

/// Median of (cʳ)^{2+ε} · sup θ̂(·, lʳ(ε)) per r, skipping systems whose
/// lower cutoff is zero (their region is empty and θ̂ vacuously 0).
pub fn band_theta_trend(
    ensembles: &[ReplicationEnsemble],
    epsilon: f64,
    margin: f64,
) -> Result<TrendReport, StatsError> {
    let statistic = alloc::format!("theta_band_eps={epsilon}");
    trend_over(&statistic, ensembles, margin, |ens| {
        let bi = ens.band_index(epsilon)?;
        if ens.bands[bi].l <= 0.0 {
            return Ok(None);
        }
        let mult = libm::pow(ens.c_r, 2.0 + epsilon);
        let sups: Vec<f64> = ens
            .summaries
            .iter()
            .map(|s| s.bands[bi].sup_theta_band)
            .collect();
        Ok(Some(mult * median(&sups)?))
    })
}

/// Median of sup ⟨1∧χ·1_{[0,l]}, Z̃⟩ per r, skipping systems with l = 0.
pub fn band_below_trend(
    ensembles: &[ReplicationEnsemble],
    epsilon: f64,
    margin: f64,
) -> Result<TrendReport, StatsError> {
    let statistic = alloc::format!("mass_below_band_eps={epsilon}");
    trend_over(&statistic, ensembles, margin, |ens| {
        let bi = ens.band_index(epsilon)?;
        if ens.bands[bi].l <= 0.0 {
            return Ok(None);
        }
        let sups: Vec<f64> = ens
            .summaries
            .iter()
            .map(|s| s.bands[bi].sup_below_one_chi_tilde)
            .collect();
        Ok(Some(median(&sups)?))
    })
}

/// Median of sup ⟨χ1_{(u,∞)}, Ẑ⟩ per r.
pub fn band_above_trend(
    ensembles: &[ReplicationEnsemble],
    epsilon: f64,
    margin: f64,
) -> Result<TrendReport, StatsError> {
    let statistic = alloc::format!("mass_above_band_eps={epsilon}");
    trend_over(&statistic, ensembles, margin, |ens| {
        let bi = ens.band_index(epsilon)?;
        let sups: Vec<f64> = ens
            .summaries
            .iter()
            .map(|s| s.bands[bi].sup_above_work_hat)
            .collect();
        Ok(Some(median(&sups)?))
    })
}

/// KS distance of each ensemble's terminal Q̃(T) sample against the reflected
/// Brownian marginal at time T started from 0. Returns (r, KS) pairs.
pub fn terminal_ks_vs_rbm(
    ensembles: &[ReplicationEnsemble],
    drift: f64,
    variance: f64,
    t: f64,
) -> Result<Vec<(f64, f64)>, StatsError> {
    marginal_cdf(drift, variance, t, 0.0)?;
    let mut out = Vec::with_capacity(ensembles.len());
    for ens in ensembles {
        let ks = ks_vs_cdf(&ens.terminal_qtilde(), |w| {
            marginal_cdf(drift, variance, t, w).expect("validated parameters")
        })?;
        out.push((ens.r, ks));
    }
    Ok(out)
}

/// Variance growth rate per unit scaled time of the centered arrived load
/// below x: λʳ Var(v·1{v≤x}) + (E[v·1{v≤x}])² (λʳ)³ (σₐʳ)².
pub fn load_variance_rate(cfg: &SystemConfig, x: f64) -> f64 {
    let m1 = cfg.dist.truncated_first_moment(x);
    let m2 = cfg.dist.truncated_second_moment(x);
    let var_slice = m2 - m1 * m1;
    let l = cfg.lambda_r;
    l * var_slice + m1 * m1 * l * l * l * cfg.sigma_a_r * cfg.sigma_a_r
}

#[derive(Debug, Clone, Copy)]
pub struct FcltCheck {
    pub sample_variance: f64,
    pub predicted: f64,
    pub n: usize,
}

impl FcltCheck {
    pub fn relative_error(&self) -> f64 {
        libm::fabs(self.sample_variance - self.predicted) / self.predicted
    }
}

/// Monte Carlo functional-CLT check on V̂ₓ(t): simulate the renewal arrival
/// stream directly (no queue), form the centered scaled load at one time
/// point per replication, and compare the sample variance against the
/// predicted rate times t.
pub fn fclt_variance_check(
    cfg: &SystemConfig,
    x: f64,
    t_scaled: f64,
    n: usize,
    base_seed: u64,
) -> Result<FcltCheck, StatsError> {
    if n < 2 {
        return Err(StatsError::Invalid {
            what: "variance check needs at least 2 replications",
            value: n as f64,
        });
    }
    if !(t_scaled > 0.0 && t_scaled.is_finite()) {
        return Err(StatsError::Invalid {
            what: "t must be positive and finite",
            value: t_scaled,
        });
    }
    let horizon = cfg.r * cfg.r * t_scaled;
    let centering = cfg.rho_below(x) * horizon;
    let mut vals = Vec::with_capacity(n);
    for rep in 0..n {
        let mut arr = ChaChaSource::from_seed(stream_seed(
            base_seed,
            cfg.r,
            rep as u64,
            StreamTag::Arrivals,
        ));
        let mut sizes =
            ChaChaSource::from_seed(stream_seed(base_seed, cfg.r, rep as u64, StreamTag::Sizes));
        let mut now = 0.0f64;
        let mut v = 0.0f64;
        loop {
            now += cfg.interarrival.sample(cfg.lambda_r, &mut arr);
            if now > horizon {
                break;
            }
            let size = cfg.dist.sample_with(&mut sizes);
            if size <= x {
                v += size;
            }
        }
        vals.push((v - centering) / cfg.r);
    }
    let mean = vals.iter().sum::<f64>() / n as f64;
    let sample_variance =
        vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    Ok(FcltCheck {
        sample_variance,
        predicted: t_scaled * load_variance_rate(cfg, x),
        n,
    })
}
