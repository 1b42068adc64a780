//! Acceptance suite: nine end-to-end criteria covering pathwise exactness,
//! discipline comparison, tail inversion, the slow-variation dichotomy, the
//! reflected-diffusion oracle, the arrival-load variance, the convergence
//! trends, and determinism. Each test prints one pass/fail summary line and
//! then asserts, so a red criterion still reports its measurements.

// Bound checks are written `!(x < a)` so NaN lands on the failing side, and
// the variance target keeps its full decimal expansion.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

use std::fmt::Write as _;
use std::sync::OnceLock;
use std::time::Instant;

use srpt_lab::config::{self, Experiment, Pipeline};
use srpt_lab::pipeline::{self, RunOutput};
use srpt_lab_core::dist::{svrate_statistic, ProcTimeDist, SFunction};
use srpt_lab_core::htseq::{make_system, thresholds, HeavyTrafficParams, InterarrivalKind};
use srpt_lab_core::rbm::reflect;
use srpt_lab_core::scaling::ScaledPath;
use srpt_lab_core::sim::{Discipline, RawPath};
use srpt_lab_core::stats::{fclt_variance_check, TrendReport};
use tempfile::TempDir;

fn pf(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// One seeded trajectory simulated under both disciplines with identical
/// arrival and size streams.
struct Trace {
    c_r: f64,
    srpt_raw: RawPath,
    srpt_scaled: ScaledPath,
    fifo_raw: RawPath,
}

fn trace_experiment() -> Experiment {
    Experiment {
        params: HeavyTrafficParams::new(
            0.0,
            InterarrivalKind::Exponential,
            ProcTimeDist::exponential(1.0).unwrap(),
            1.0,
        )
        .unwrap(),
        r_values: vec![5.0, 10.0],
        epsilon: vec![1.0],
        fixed_x: vec![1.0],
        delta: 0.01,
        horizon: 1.0,
        replications: 50,
        base_seed: 7,
        pipeline: Pipeline::Srpt,
        out_dir: None,
        dump_events: false,
    }
}

/// 100 traces: 50 replications at each of r = 5 and r = 10, tracked at the
/// levels x = 1 and x = cʳ.
fn traces() -> &'static [Trace] {
    static TRACES: OnceLock<Vec<Trace>> = OnceLock::new();
    TRACES.get_or_init(|| {
        let exp = trace_experiment();
        let mut out = Vec::with_capacity(100);
        for &r in &exp.r_values {
            let sys = make_system(&exp.params, r).unwrap();
            let tracked = [1.0, sys.c_r];
            for rep in 0..exp.replications as u64 {
                let (sys_s, srpt_raw, srpt_scaled) =
                    pipeline::run_single_path(&exp, r, rep, Discipline::Srpt, &tracked, false)
                        .unwrap();
                let (_, fifo_raw, _) =
                    pipeline::run_single_path(&exp, r, rep, Discipline::Fifo, &[], false).unwrap();
                assert_eq!(sys_s.c_r.to_bits(), sys.c_r.to_bits());
                out.push(Trace {
                    c_r: sys.c_r,
                    srpt_raw,
                    srpt_scaled,
                    fifo_raw,
                });
            }
        }
        out
    })
}

const PIPELINE_CONFIG: &str = r#"{
  "dist": {"kind": "exponential", "rate": 1.0},
  "heavy_traffic": {
    "kappa": 0.0,
    "w0": 0.0,
    "interarrival": {"kind": "exponential"},
    "r_values": [30.0, 100.0, 300.0]
  },
  "epsilon": [1.0],
  "fixed_x": [1.0],
  "delta": 0.01,
  "horizon": 1.0,
  "replications": 300,
  "base_seed": 42
}
"#;

struct PipelineFixture {
    out_a: RunOutput,
    out_b: RunOutput,
    dir_a: TempDir,
    dir_b: TempDir,
    /// Wall time of the first run alone.
    build_secs: f64,
    /// Band cutoff l per r at ε = 1, for reporting which r are vacuous.
    l_values: Vec<(f64, f64)>,
}

/// The trend pipeline run twice with the same seed into separate
/// directories; the second run exists for the determinism comparison.
fn pipeline_fixture() -> &'static PipelineFixture {
    static RUNS: OnceLock<PipelineFixture> = OnceLock::new();
    RUNS.get_or_init(|| {
        let cfg = config::parse(PIPELINE_CONFIG).unwrap();
        let exp = config::validate(&cfg).unwrap();
        let l_values = exp
            .r_values
            .iter()
            .map(|&r| {
                let sys = make_system(&exp.params, r).unwrap();
                (r, thresholds(&sys, 1.0).unwrap().l)
            })
            .collect();
        let dir_a = TempDir::new().unwrap();
        let dir_b = TempDir::new().unwrap();
        let t0 = Instant::now();
        let out_a =
            pipeline::run_experiment(&exp, dir_a.path(), 4, PIPELINE_CONFIG.as_bytes()).unwrap();
        let build_secs = t0.elapsed().as_secs_f64();
        let out_b =
            pipeline::run_experiment(&exp, dir_b.path(), 4, PIPELINE_CONFIG.as_bytes()).unwrap();
        PipelineFixture {
            out_a,
            out_b,
            dir_a,
            dir_b,
            build_secs,
            l_values,
        }
    })
}

fn trend<'a>(out: &'a RunOutput, statistic: &str) -> &'a TrendReport {
    out.trends
        .iter()
        .find(|t| t.statistic == statistic)
        .unwrap_or_else(|| panic!("missing trend {statistic}"))
}

#[test]
fn criterion_1_pathwise_exactness() {
    let t0 = Instant::now();
    let mut max_balance = 0.0f64;
    let mut min_margin = f64::INFINITY;
    let mut max_squeeze = f64::NEG_INFINITY;
    for tr in traces() {
        let raw = &tr.srpt_raw;
        let sp = &tr.srpt_scaled;
        for row in 0..raw.rows.len() {
            for xi in 0..raw.thresholds.len() {
                max_balance = max_balance.max(raw.balance_residual(row, xi).unwrap().abs());
                min_margin = min_margin.min(raw.tau_work_margin(row, xi).unwrap());
                min_margin = min_margin.min(raw.envelope_margin(row, xi).unwrap());
                min_margin = min_margin.min(sp.envelope_margin(raw.thresholds[xi], row).unwrap());
            }
            let b = sp.squeeze(1.0, tr.c_r, row).unwrap();
            max_squeeze = max_squeeze.max(b.lower - b.mid).max(b.mid - b.upper);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = max_balance <= 1e-9 && min_margin >= -1e-9 && max_squeeze <= 1e-12 && secs < 30.0;
    println!(
        "criterion 1 (pathwise exactness): {} max|balance|={max_balance:.3e} \
         min envelope/tau margin={min_margin:.3e} max squeeze violation={max_squeeze:.3e} \
         elapsed={secs:.1}s",
        pf(ok)
    );
    assert!(ok);
}

#[test]
fn criterion_2_discipline_comparison() {
    let mut max_w_dev = 0.0f64;
    let mut q_ordered = true;
    for tr in traces() {
        for (rs, rf) in tr.srpt_raw.rows.iter().zip(&tr.fifo_raw.rows) {
            max_w_dev = max_w_dev.max((rs.w - rf.w).abs());
            q_ordered &= rs.q <= rf.q;
        }
    }
    let ok = max_w_dev < 1e-9 && q_ordered;
    println!(
        "criterion 2 (workload invariance, queue ordering): {} \
         max|W_srpt - W_fifo|={max_w_dev:.3e} q_srpt<=q_fifo={q_ordered}",
        pf(ok)
    );
    assert!(ok);
}

#[test]
fn criterion_3_s_inversion() {
    let t0 = Instant::now();
    let ys: Vec<f64> = (2..=10).map(|k| (5.0 * k as f64).exp()).collect();
    let mut dists = vec![ProcTimeDist::exponential(1.0).unwrap()];
    for &a in &[0.5, 1.0, 2.0] {
        for &b in &[0.5, 1.0, 2.0] {
            dists.push(ProcTimeDist::weibull(a, b).unwrap());
        }
    }
    let mut round_trip_ok = true;
    let mut monotone_ok = true;
    let mut over_bound = String::new();
    for d in &dists {
        let rows = pipeline::invert_s_table(*d, &ys).unwrap();
        for w in rows.windows(2) {
            monotone_ok &= w[1].ratio < w[0].ratio;
        }
        for row in &rows {
            round_trip_ok &= row.round_trip >= row.y && row.round_trip <= row.y * (1.0 + 1e-6);
        }
        let last = rows.last().unwrap();
        if !(last.ratio < 1.3) {
            write!(
                over_bound,
                " alpha={} beta={} ratio={:.16}",
                d.alpha(),
                d.beta(),
                last.ratio
            )
            .unwrap();
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = round_trip_ok && monotone_ok && over_bound.is_empty() && secs < 5.0;
    println!(
        "criterion 3 (tail inversion): {} round_trip_in_band={round_trip_ok} \
         ratio_monotone={monotone_ok} ratios at e^50 not below 1.3:{} elapsed={secs:.1}s",
        pf(ok),
        if over_bound.is_empty() {
            " none"
        } else {
            over_bound.as_str()
        }
    );
    assert!(
        ok,
        "normalized inverse ratio still above 1.3 at y=e^50 for{over_bound}; \
         the approach to 1 is logarithmically slow for shape 0.5"
    );
}

#[test]
fn criterion_4_svrate_dichotomy() {
    let ys = [10f64.exp(), 20f64.exp(), 40f64.exp()];
    let mut weibull_ok = true;
    for &a in &[0.5, 1.0, 2.0] {
        for &b in &[0.5, 1.0, 2.0] {
            let sf = SFunction::new(ProcTimeDist::weibull(a, b).unwrap());
            let v: Vec<f64> = ys
                .iter()
                .map(|&y| svrate_statistic(|z| sf.s_inverse(z).unwrap(), 2.0, y).unwrap())
                .collect();
            weibull_ok &= v[1] < v[0] && v[2] < v[1];
        }
    }
    let slow = |y: f64| (y.ln().powf(0.75)).exp();
    let sv: Vec<f64> = ys
        .iter()
        .map(|&y| svrate_statistic(slow, 2.0, y).unwrap())
        .collect();
    let counterexample_holds = !(sv[1] < sv[0] && sv[2] < sv[1]);
    let ok = weibull_ok && counterexample_holds;
    println!(
        "criterion 4 (slow-variation dichotomy): {} weibull_decreasing={weibull_ok} \
         exp((ln y)^0.75) values=[{:.3}, {:.3}, {:.3}] not decreasing={counterexample_holds}",
        pf(ok),
        sv[0],
        sv[1],
        sv[2]
    );
    assert!(ok);
}

#[test]
fn criterion_5_rbm_oracle() {
    let cmp = pipeline::compare_rbm(0.0, 1.0, 1.0, 1e-3, 10_000, 42).unwrap();
    let ks_ok = cmp.ks < 0.02;
    let tables_ok = reflect(&[0.0, -0.5, -1.3, -0.8], 1.0) == vec![1.0, 0.5, 0.0, 0.5]
        && reflect(&[0.0, 0.25, 1.5, 2.0], 0.0) == vec![0.0, 0.25, 1.5, 2.0]
        && reflect(&[0.0, -0.5, -1.0, -1.5, -2.0], 1.0) == vec![1.0, 0.5, 0.0, 0.0, 0.0];
    let ok = ks_ok && tables_ok;
    println!(
        "criterion 5 (reflected diffusion oracle): {} ks={:.4} (< 0.02) \
         reflection_tables_exact={tables_ok}",
        pf(ok),
        cmp.ks
    );
    assert!(ok);
}

#[test]
fn criterion_6_load_variance() {
    let t0 = Instant::now();
    let params = HeavyTrafficParams::new(
        0.0,
        InterarrivalKind::Exponential,
        ProcTimeDist::exponential(1.0).unwrap(),
        0.0,
    )
    .unwrap();
    let sys = make_system(&params, 50.0).unwrap();
    let chk = fclt_variance_check(&sys, 1.0, 1.0, 2000, 42).unwrap();
    // 2 - 5/e, the centered-load variance rate at x = 1 under critical
    // Poisson arrivals of unit-mean exponential sizes.
    let target = 0.16060279414278839202;
    let rel = (chk.sample_variance - target).abs() / target;
    let secs = t0.elapsed().as_secs_f64();
    let ok = rel < 0.20 && secs < 120.0;
    println!(
        "criterion 6 (centered load variance): {} sample={:.5} target={target:.5} \
         rel_err={rel:.3} (< 0.20) elapsed={secs:.1}s",
        pf(ok),
        chk.sample_variance
    );
    assert!(ok);
}

#[test]
fn criterion_7_gap_and_mass_trends() {
    let fx = pipeline_fixture();
    let gap = trend(&fx.out_a, "gap");
    let gap_ok = gap.monotone_decreasing && gap.margin == 0.05;
    let below = trend(&fx.out_a, "mass_below_band_eps=1");
    let above = trend(&fx.out_a, "mass_above_band_eps=1");
    let mass_ok = below.monotone_decreasing && above.monotone_decreasing;
    let skipped: Vec<f64> = fx
        .l_values
        .iter()
        .filter(|(_, l)| *l <= 0.0)
        .map(|&(r, _)| r)
        .collect();
    let time_ok = fx.build_secs < 600.0;
    let ok = gap_ok && mass_ok && time_ok;
    println!(
        "criterion 7 (gap and band-mass trends): {} gap medians={:?} margin=0.05 \
         below-band skipped at r={skipped:?} (l=0) above-band medians={:?} build={:.1}s",
        pf(ok),
        gap.median,
        above.median,
        fx.build_secs
    );
    assert!(ok);
}

#[test]
fn criterion_8_busy_period_trends() {
    let fx = pipeline_fixture();
    let theta_x = trend(&fx.out_a, "theta_x=1");
    let theta_band = trend(&fx.out_a, "theta_band_eps=1");
    let band_vacuous = theta_band.median.is_empty();
    let ok = theta_x.monotone_decreasing && theta_x.margin == 0.0 && theta_band.monotone_decreasing;
    println!(
        "criterion 8 (busy-period clock trends): {} c_r*r*theta(x=1) medians={:?} \
         band clock vacuous={band_vacuous} (no r with l>0 in this range)",
        pf(ok),
        theta_x.median
    );
    assert!(ok);
}

#[test]
fn criterion_9_determinism() {
    let fx = pipeline_fixture();
    let names_match = fx.out_a.files == fx.out_b.files;
    let mut identical = true;
    for name in &fx.out_a.files {
        let a = std::fs::read(fx.dir_a.path().join(name)).unwrap();
        let b = std::fs::read(fx.dir_b.path().join(name)).unwrap();
        identical &= a == b;
    }
    let ok = names_match && identical && fx.out_a.files.len() >= 13;
    println!(
        "criterion 9 (determinism): {} reruns byte-identical over {} files",
        pf(ok),
        fx.out_a.files.len()
    );
    assert!(ok);
}
