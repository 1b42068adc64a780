//! Diffusion-scale coordinates for raw simulation paths.
//!
//! For the r-th system the time axis contracts by r², mass by r, and queue
//! length additionally dilates by the spatial scale cʳ:
//!
//! | scaled object          | definition                                |
//! |------------------------|-------------------------------------------|
//! | Ŵ(t)                   | W(r²t)/r                                  |
//! | Q̂(t)                   | Q(r²t)/r                                  |
//! | Q̃(t)                   | cʳ Q̂(t)                                   |
//! | Ê(t)                   | (E(r²t) − λʳ r²t)/r                       |
//! | V̂ₓ(t)                  | (Vₓ(r²t) − ρₓʳ r²t)/r                     |
//! | θ̂(t,x), τ̂(t,x)         | physical θ, τ divided by r²               |
//!
//! The central claim under test downstream is that Q̃ − Ŵ vanishes in the
//! limit even though Q̂ itself collapses, which is why Q̃ and Ŵ are produced
//! in a form exact enough to subtract (the time-0 identity Q̃(0) = Ŵ(0) holds
//! bitwise for the atomic initial condition).
//!
//! Pathwise envelopes that the raw dynamics guarantee survive scaling
//! untouched; `envelope_margin` re-expresses the region work bound in hatted
//! coordinates and `squeeze` gives the mass sandwich
//! (cʳ/b)⟨χ1_{(a,b]}, Ẑ⟩ ≤ ⟨1_{(a,b]}, Z̃⟩ ≤ (cʳ/a)⟨χ1_{(a,b]}, Ẑ⟩,
//! valid for every interval (a, b] with a > 0.

use alloc::vec::Vec;
use core::fmt;

use crate::htseq::SystemConfig;
use crate::sim::{Discipline, RawPath};

#[derive(Debug, Clone, PartialEq)]
pub enum ScaleError {
    Invalid {
        what: &'static str,
        value: f64,
    },
    /// The requested level is not among the path's tracked thresholds.
    UnknownThreshold {
        x: f64,
    },
    SrptOnly {
        what: &'static str,
    },
}

impl fmt::Display for ScaleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleError::Invalid { what, value } => write!(f, "{what}, got {value}"),
            ScaleError::UnknownThreshold { x } => {
                write!(f, "level {x} is not tracked by this path")
            }
            ScaleError::SrptOnly { what } => {
                write!(f, "{what} is defined only for the SRPT discipline")
            }
        }
    }
}

impl core::error::Error for ScaleError {}

/// Scaled per-threshold columns, one entry per grid time.
#[derive(Debug, Clone)]
pub struct ScaledThreshold {
    pub x: f64,
    /// ρₓʳ = λʳ E[v·1{v ≤ x}].
    pub rho_x: f64,
    /// V̂ₓ, centered arrived load below x.
    pub vhat: Vec<f64>,
    /// ⟨χ1_{[0,x]}, Ẑ⟩, region work over r.
    pub work_in_hat: Vec<f64>,
    /// ⟨1_{[0,x]}, Ẑ⟩.
    pub count_in_hat: Vec<f64>,
    /// ⟨1_{[0,x]}, Z̃⟩.
    pub count_in_tilde: Vec<f64>,
    /// ⟨1∧χ·1_{[0,x]}, Z̃⟩.
    pub one_chi_in_tilde: Vec<f64>,
    pub theta_scaled: Vec<f64>,
    pub tau_scaled: Vec<f64>,
    pub work_at_tau_hat: Vec<f64>,
    pub vhat_at_tau: Vec<f64>,
    pub vhat_at_tau_minus: Vec<f64>,
    /// Region work at time 0 over r.
    pub work_in_0_hat: f64,
}

/// A raw path in diffusion coordinates.
#[derive(Debug, Clone)]
pub struct ScaledPath {
    pub discipline: Discipline,
    pub r: f64,
    pub c_r: f64,
    pub lambda_r: f64,
    pub rho_r: f64,
    /// Scaled grid 0, Δ, …, T.
    pub grid: Vec<f64>,
    pub qhat: Vec<f64>,
    pub what: Vec<f64>,
    pub qtilde: Vec<f64>,
    pub ehat: Vec<f64>,
    pub per_x: Vec<ScaledThreshold>,
}

/// The mass sandwich for one interval and row.
#[derive(Debug, Clone, Copy)]
pub struct SqueezeBounds {
    pub lower: f64,
    pub mid: f64,
    pub upper: f64,
}

pub fn scale_path(raw: &RawPath, cfg: &SystemConfig) -> Result<ScaledPath, ScaleError> {
    let r = cfg.r;
    if !(r > 1.0 && r.is_finite()) {
        return Err(ScaleError::Invalid {
            what: "system scale r must exceed 1",
            value: r,
        });
    }
    let r2 = r * r;
    let grid: Vec<f64> = raw.grid.iter().map(|&t| t / r2).collect();
    let qhat: Vec<f64> = raw.rows.iter().map(|row| row.q as f64 / r).collect();
    let what: Vec<f64> = raw.rows.iter().map(|row| row.w / r).collect();
    let qtilde: Vec<f64> = raw
        .rows
        .iter()
        .map(|row| cfg.c_r * row.q as f64 / r)
        .collect();
    let ehat: Vec<f64> = raw
        .rows
        .iter()
        .map(|row| (row.arrivals as f64 - cfg.lambda_r * row.time) / r)
        .collect();

    let per_x = raw
        .thresholds
        .iter()
        .enumerate()
        .map(|(xi, &x)| {
            let rho_x = cfg.rho_below(x);
            let n = raw.rows.len();
            let mut th = ScaledThreshold {
                x,
                rho_x,
                vhat: Vec::with_capacity(n),
                work_in_hat: Vec::with_capacity(n),
                count_in_hat: Vec::with_capacity(n),
                count_in_tilde: Vec::with_capacity(n),
                one_chi_in_tilde: Vec::with_capacity(n),
                theta_scaled: Vec::with_capacity(n),
                tau_scaled: Vec::with_capacity(n),
                work_at_tau_hat: Vec::with_capacity(n),
                vhat_at_tau: Vec::with_capacity(n),
                vhat_at_tau_minus: Vec::with_capacity(n),
                work_in_0_hat: raw.work_in_0[xi] / r,
            };
            for row in &raw.rows {
                let s = &row.per_x[xi];
                th.vhat.push((s.v - rho_x * row.time) / r);
                th.work_in_hat.push(s.work_in / r);
                th.count_in_hat.push(s.count_in as f64 / r);
                th.count_in_tilde.push(cfg.c_r * s.count_in as f64 / r);
                th.one_chi_in_tilde.push(cfg.c_r * s.one_chi_in / r);
                th.theta_scaled.push(s.theta / r2);
                th.tau_scaled.push(s.tau / r2);
                th.work_at_tau_hat.push(s.work_at_tau / r);
                th.vhat_at_tau.push((s.v_at_tau - rho_x * s.tau) / r);
                th.vhat_at_tau_minus
                    .push((s.v_at_tau_minus - rho_x * s.tau) / r);
            }
            th
        })
        .collect();

    Ok(ScaledPath {
        discipline: raw.discipline,
        r,
        c_r: cfg.c_r,
        lambda_r: cfg.lambda_r,
        rho_r: cfg.rho_r,
        grid,
        qhat,
        what,
        qtilde,
        ehat,
        per_x,
    })
}

impl ScaledPath {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn threshold_index(&self, x: f64) -> Option<usize> {
        self.per_x.iter().position(|th| th.x == x)
    }

    fn threshold(&self, x: f64) -> Result<&ScaledThreshold, ScaleError> {
        self.per_x
            .iter()
            .find(|th| th.x == x)
            .ok_or(ScaleError::UnknownThreshold { x })
    }

    /// sup over the grid of |Q̃ − Ŵ|, the discrepancy the limit kills.
    pub fn gap_statistic(&self) -> f64 {
        self.qtilde
            .iter()
            .zip(&self.what)
            .map(|(q, w)| libm::fabs(q - w))
            .fold(0.0, f64::max)
    }

    /// Mass sandwich over (lo, hi] at one row. Requires lo > 0 and both
    /// levels tracked; `lower ≤ mid ≤ upper` holds pathwise up to rounding.
    pub fn squeeze(&self, lo: f64, hi: f64, row: usize) -> Result<SqueezeBounds, ScaleError> {
        if !(lo > 0.0) {
            return Err(ScaleError::Invalid {
                what: "squeeze interval needs a positive lower endpoint",
                value: lo,
            });
        }
        if !(hi > lo) {
            return Err(ScaleError::Invalid {
                what: "squeeze interval needs hi > lo",
                value: hi,
            });
        }
        let tlo = self.threshold(lo)?;
        let thi = self.threshold(hi)?;
        let chi_mass = thi.work_in_hat[row] - tlo.work_in_hat[row];
        let mid = thi.count_in_tilde[row] - tlo.count_in_tilde[row];
        Ok(SqueezeBounds {
            lower: self.c_r / hi * chi_mass,
            mid,
            upper: self.c_r / lo * chi_mass,
        })
    }

    /// Scaled region work envelope slack at one row:
    /// `Ŵₓ(t) ≤ Ŵₓ(0) + V̂ₓ(t) − V̂ₓ(τ−) + (ρₓ − 1) r θ̂(t) + x/r`.
    /// Nonnegative under SRPT up to rounding; exactly the physical envelope
    /// divided by r.
    pub fn envelope_margin(&self, x: f64, row: usize) -> Result<f64, ScaleError> {
        if self.discipline != Discipline::Srpt {
            return Err(ScaleError::SrptOnly {
                what: "the scaled region work envelope",
            });
        }
        let th = self.threshold(x)?;
        let rhs = th.work_in_0_hat + th.vhat[row] - th.vhat_at_tau_minus[row]
            + (th.rho_x - 1.0) * self.r * th.theta_scaled[row]
            + th.x / self.r;
        Ok(rhs - th.work_in_hat[row])
    }
}
