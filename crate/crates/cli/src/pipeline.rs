//! Experiment pipelines: simulate → scale → summarize → aggregate → write.
//!
//! Replications are independent and run in parallel; every random draw is
//! fixed by (base_seed, r, replication index, stream tag), so the worker
//! count cannot change any output byte. Files are assembled and written
//! single-threaded in a fixed order, with the manifest last.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use srpt_lab_core::htseq::{
    initial_condition, make_system, thresholds, HtError, RenewalStream, SystemConfig, Thresholds,
};
use srpt_lab_core::rbm::{marginal_cdf, simulate_rbm, system_variance, RbmError, RbmParams};
use srpt_lab_core::rng::{stream_seed, ChaChaSource, StreamTag};
use srpt_lab_core::scaling::{scale_path, ScaleError, ScaledPath};
use srpt_lab_core::sim::{self, Discipline, EventRecord, RawPath, SimConfig, SimError};
use srpt_lab_core::stats::{
    band_above_trend, band_below_trend, band_theta_trend, gap_trend, ks_vs_cdf, summarize_path,
    terminal_ks_vs_rbm, theta_fixed_x_trend, PathSummary, ReplicationEnsemble, StatsError,
    TrendReport,
};

use crate::config::Experiment;
use crate::report::{self, Csv};

/// Margin for the workload/queue gap trend; the busy-period and region-mass
/// trends assert plain nonincrease.
pub const GAP_TREND_MARGIN: f64 = 0.05;

#[derive(Debug)]
pub enum PipelineError {
    Ht(HtError),
    Sim(SimError),
    Scale(ScaleError),
    Stats(StatsError),
    Rbm(RbmError),
    Invalid { what: &'static str },
    Io(io::Error),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Ht(e) => write!(f, "{e}"),
            PipelineError::Sim(e) => write!(f, "{e}"),
            PipelineError::Scale(e) => write!(f, "{e}"),
            PipelineError::Stats(e) => write!(f, "{e}"),
            PipelineError::Rbm(e) => write!(f, "{e}"),
            PipelineError::Invalid { what } => write!(f, "{what}"),
            PipelineError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for PipelineError {}

macro_rules! from_err {
    ($variant:ident, $ty:ty) => {
        impl From<$ty> for PipelineError {
            fn from(e: $ty) -> Self {
                PipelineError::$variant(e)
            }
        }
    };
}

from_err!(Ht, HtError);
from_err!(Sim, SimError);
from_err!(Scale, ScaleError);
from_err!(Stats, StatsError);
from_err!(Rbm, RbmError);
from_err!(Io, io::Error);

/// Everything a run produced, both in memory (for tests and callers) and on
/// disk (paths relative to `out_dir`).
pub struct RunOutput {
    pub ensembles: Vec<ReplicationEnsemble>,
    pub trends: Vec<TrendReport>,
    pub terminal_ks: Option<Vec<(f64, f64)>>,
    pub files: Vec<String>,
    pub out_dir: PathBuf,
}

struct PerR {
    ensemble: ReplicationEnsemble,
    sample: ScaledPath,
    events: Vec<EventRecord>,
}

fn run_system(exp: &Experiment, r: f64) -> Result<PerR, PipelineError> {
    let sys = make_system(&exp.params, r)?;
    let bands: Vec<Thresholds> = exp
        .epsilon
        .iter()
        .map(|&e| thresholds(&sys, e))
        .collect::<Result<_, _>>()?;

    let mut tracked: Vec<f64> = exp.fixed_x.clone();
    for b in &bands {
        if b.l > 0.0 {
            tracked.push(b.l);
        }
        tracked.push(b.u);
    }
    tracked.sort_unstable_by(f64::total_cmp);
    tracked.dedup();

    let initial = initial_condition(&sys, exp.params.w0)?;
    let discipline = exp.pipeline.discipline();

    let results: Vec<(PathSummary, Option<ScaledPath>, Vec<EventRecord>)> = (0..exp.replications)
        .into_par_iter()
        .map(|rep| -> Result<_, PipelineError> {
            let sim_cfg = SimConfig {
                discipline,
                horizon: r * r * exp.horizon,
                grid_step: r * r * exp.delta,
                thresholds: &tracked,
                log_events: exp.dump_events && rep == 0,
            };
            let mut stream = RenewalStream::new(
                &sys,
                ChaChaSource::from_seed(stream_seed(
                    exp.base_seed,
                    r,
                    rep as u64,
                    StreamTag::Arrivals,
                )),
                ChaChaSource::from_seed(stream_seed(
                    exp.base_seed,
                    r,
                    rep as u64,
                    StreamTag::Sizes,
                )),
            );
            let raw = sim::run(&sim_cfg, &initial, &mut stream)?;
            let scaled = scale_path(&raw, &sys)?;
            let summary = summarize_path(&scaled, &exp.fixed_x, &bands)?;
            let keep_path = (rep == 0).then_some(scaled);
            Ok((summary, keep_path, raw.events))
        })
        .collect::<Result<_, _>>()?;

    let mut summaries = Vec::with_capacity(results.len());
    let mut sample = None;
    let mut events = Vec::new();
    for (i, (summary, path, ev)) in results.into_iter().enumerate() {
        summaries.push(summary);
        if i == 0 {
            sample = path;
            events = ev;
        }
    }

    Ok(PerR {
        ensemble: ReplicationEnsemble {
            r,
            c_r: sys.c_r,
            lambda_r: sys.lambda_r,
            fixed_xs: exp.fixed_x.clone(),
            bands,
            summaries,
        },
        sample: sample.expect("replications >= 1"),
        events,
    })
}

fn ensemble_csv(ens: &ReplicationEnsemble) -> String {
    let mut header: Vec<String> = ["rep", "gap", "qtilde_end", "what_end"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for x in &ens.fixed_xs {
        header.push(format!("sup_theta_x{x}"));
    }
    for b in &ens.bands {
        let e = b.epsilon;
        header.push(format!("sup_below_eps{e}"));
        header.push(format!("sup_above_eps{e}"));
        header.push(format!("sup_theta_band_eps{e}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header_refs);
    for (rep, s) in ens.summaries.iter().enumerate() {
        let mut row = vec![
            rep.to_string(),
            report::fmt_f64(s.gap),
            report::fmt_f64(s.qtilde_end),
            report::fmt_f64(s.what_end),
        ];
        for v in &s.sup_theta_x {
            row.push(report::fmt_f64(*v));
        }
        for b in &s.bands {
            row.push(report::fmt_f64(b.sup_below_one_chi_tilde));
            row.push(report::fmt_f64(b.sup_above_work_hat));
            row.push(report::fmt_f64(b.sup_theta_band));
        }
        csv.row(&row);
    }
    csv.finish()
}

fn sample_path_csv(sp: &ScaledPath) -> String {
    let mut header: Vec<String> = ["t", "qhat", "what", "qtilde", "ehat"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for th in &sp.per_x {
        let x = th.x;
        header.push(format!("work_hat_x{x}"));
        header.push(format!("vhat_x{x}"));
        header.push(format!("theta_x{x}"));
        header.push(format!("one_chi_tilde_x{x}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header_refs);
    for i in 0..sp.len() {
        let mut row = vec![
            report::fmt_f64(sp.grid[i]),
            report::fmt_f64(sp.qhat[i]),
            report::fmt_f64(sp.what[i]),
            report::fmt_f64(sp.qtilde[i]),
            report::fmt_f64(sp.ehat[i]),
        ];
        for th in &sp.per_x {
            row.push(report::fmt_f64(th.work_in_hat[i]));
            row.push(report::fmt_f64(th.vhat[i]));
            row.push(report::fmt_f64(th.theta_scaled[i]));
            row.push(report::fmt_f64(th.one_chi_in_tilde[i]));
        }
        csv.row(&row);
    }
    csv.finish()
}

fn events_csv(events: &[EventRecord]) -> String {
    let mut csv = Csv::new(&["time", "kind", "job_seq", "residual_after", "q", "w"]);
    for e in events {
        csv.row(&[
            report::fmt_f64(e.time),
            e.kind.name().to_string(),
            e.job_seq.to_string(),
            report::fmt_f64(e.residual_after),
            e.q.to_string(),
            report::fmt_f64(e.w),
        ]);
    }
    csv.finish()
}

fn write_recorded(
    dir: &Path,
    name: &str,
    contents: &str,
    files: &mut Vec<(String, String)>,
) -> Result<(), PipelineError> {
    fs::write(dir.join(name), contents)?;
    files.push((name.to_string(), report::sha256_hex(contents.as_bytes())));
    Ok(())
}

/// Run the full experiment and write its artifact files. `config_bytes` is
/// the raw config file content, hashed into the manifest.
pub fn run_experiment(
    exp: &Experiment,
    out_dir: &Path,
    workers: usize,
    config_bytes: &[u8],
) -> Result<RunOutput, PipelineError> {
    if workers < 1 {
        return Err(PipelineError::Invalid {
            what: "workers must be at least 1",
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|_| PipelineError::Invalid {
            what: "failed to build the worker pool",
        })?;

    let per_r: Vec<PerR> = pool.install(|| {
        exp.r_values
            .iter()
            .map(|&r| run_system(exp, r))
            .collect::<Result<_, _>>()
    })?;

    fs::create_dir_all(out_dir)?;
    let mut files: Vec<(String, String)> = Vec::new();

    for p in &per_r {
        let r = p.ensemble.r;
        write_recorded(
            out_dir,
            &format!("ensemble_r{r}.csv"),
            &ensemble_csv(&p.ensemble),
            &mut files,
        )?;
        write_recorded(
            out_dir,
            &format!("sample_path_r{r}.csv"),
            &sample_path_csv(&p.sample),
            &mut files,
        )?;
        if exp.dump_events {
            write_recorded(
                out_dir,
                &format!("events_r{r}_rep0.csv"),
                &events_csv(&p.events),
                &mut files,
            )?;
        }
    }

    let ensembles: Vec<ReplicationEnsemble> = per_r.into_iter().map(|p| p.ensemble).collect();

    let mut trends = vec![gap_trend(&ensembles, GAP_TREND_MARGIN)?];
    for &x in &exp.fixed_x {
        trends.push(theta_fixed_x_trend(&ensembles, x, 0.0)?);
    }
    for &e in &exp.epsilon {
        trends.push(band_theta_trend(&ensembles, e, 0.0)?);
        trends.push(band_below_trend(&ensembles, e, 0.0)?);
        trends.push(band_above_trend(&ensembles, e, 0.0)?);
    }
    write_recorded(
        out_dir,
        "trend_gap.json",
        &report::trend_json(&trends[0]),
        &mut files,
    )?;
    for t in &trends[1..] {
        let name = format!("trend_{}.json", t.statistic.replace('=', ""));
        write_recorded(out_dir, &name, &report::trend_json(t), &mut files)?;
    }

    let drift = exp.params.kappa;
    let variance = system_variance(&exp.params);
    let terminal_ks = if exp.params.w0 == 0.0 {
        Some(terminal_ks_vs_rbm(
            &ensembles,
            drift,
            variance,
            exp.horizon,
        )?)
    } else {
        None
    };
    write_recorded(
        out_dir,
        "diagnostics.json",
        &report::diagnostics_json(drift, variance, exp.horizon, terminal_ks.as_deref()),
        &mut files,
    )?;

    let manifest = report::manifest_json(&report::sha256_hex(config_bytes), exp.base_seed, &files);
    fs::write(out_dir.join("manifest.json"), &manifest)?;
    let mut file_names: Vec<String> = files.into_iter().map(|(n, _)| n).collect();
    file_names.push("manifest.json".to_string());

    Ok(RunOutput {
        ensembles,
        trends,
        terminal_ks,
        files: file_names,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Inversion table row: y, S⁻¹(y), the round trip S(S⁻¹(y)), and the
/// normalized ratio β·S⁻¹(y)/(ln y)^{1/α} that tends to 1 from above.
pub struct InversionRow {
    pub y: f64,
    pub s_inv: f64,
    pub round_trip: f64,
    pub ratio: f64,
}

pub fn invert_s_table(
    dist: srpt_lab_core::dist::ProcTimeDist,
    ys: &[f64],
) -> Result<Vec<InversionRow>, PipelineError> {
    let sf = srpt_lab_core::dist::SFunction::new(dist);
    let (alpha, beta) = (dist.alpha(), dist.beta());
    let mut rows = Vec::with_capacity(ys.len());
    for &y in ys {
        if !(y > 0.0 && y.is_finite()) {
            return Err(PipelineError::Invalid {
                what: "y values must be positive and finite",
            });
        }
        let s_inv = sf.s_inverse(y).map_err(HtError::Dist)?;
        let round_trip = if s_inv > 0.0 {
            sf.s_value(s_inv)
        } else {
            f64::NAN
        };
        let lny = y.ln();
        let ratio = if lny > 0.0 {
            beta * s_inv / lny.powf(1.0 / alpha)
        } else {
            f64::NAN
        };
        rows.push(InversionRow {
            y,
            s_inv,
            round_trip,
            ratio,
        });
    }
    Ok(rows)
}

pub struct RbmComparison {
    pub drift: f64,
    pub variance: f64,
    pub t: f64,
    pub step: f64,
    pub n: usize,
    pub seed: u64,
    pub ks: f64,
}

/// Simulate n reflected paths from 0 and compare the terminal marginal
/// against the closed-form CDF.
pub fn compare_rbm(
    drift: f64,
    variance: f64,
    t: f64,
    step: f64,
    n: usize,
    seed: u64,
) -> Result<RbmComparison, PipelineError> {
    if n < 1 {
        return Err(PipelineError::Invalid {
            what: "n must be at least 1",
        });
    }
    let params = RbmParams::new(drift, variance, 0.0, step)?;
    marginal_cdf(drift, variance, t, 0.0)?;
    let mut endpoints = Vec::with_capacity(n);
    for k in 0..n {
        let mut src = ChaChaSource::from_seed(stream_seed(seed, 0.0, k as u64, StreamTag::Rbm));
        let path = simulate_rbm(&params, t, &mut src)?;
        endpoints.push(*path.last().expect("nonempty path"));
    }
    let ks = ks_vs_cdf(&endpoints, |w| {
        marginal_cdf(drift, variance, t, w).expect("validated parameters")
    })?;
    Ok(RbmComparison {
        drift,
        variance,
        t,
        step,
        n,
        seed,
        ks,
    })
}

/// One simulated system for callers that drive the engine directly (the
/// acceptance suite): build the r-th system, run one seeded replication
/// under the given discipline with explicit thresholds, and scale it. Both
/// the raw path and its scaled image are returned so physical-unit and
/// diffusion-scale identities can be checked on the same trajectory.
pub fn run_single_path(
    exp: &Experiment,
    r: f64,
    rep: u64,
    discipline: Discipline,
    extra_thresholds: &[f64],
    log_events: bool,
) -> Result<(SystemConfig, RawPath, ScaledPath), PipelineError> {
    let sys = make_system(&exp.params, r)?;
    let mut tracked = extra_thresholds.to_vec();
    tracked.sort_unstable_by(f64::total_cmp);
    tracked.dedup();
    let sim_cfg = SimConfig {
        discipline,
        horizon: r * r * exp.horizon,
        grid_step: r * r * exp.delta,
        thresholds: &tracked,
        log_events,
    };
    let initial = initial_condition(&sys, exp.params.w0)?;
    let mut stream = RenewalStream::new(
        &sys,
        ChaChaSource::from_seed(stream_seed(exp.base_seed, r, rep, StreamTag::Arrivals)),
        ChaChaSource::from_seed(stream_seed(exp.base_seed, r, rep, StreamTag::Sizes)),
    );
    let raw = sim::run(&sim_cfg, &initial, &mut stream)?;
    let scaled = scale_path(&raw, &sys)?;
    Ok((sys, raw, scaled))
}
