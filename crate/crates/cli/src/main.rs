use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use srpt_lab::config;
use srpt_lab::pipeline;
use srpt_lab::replay;
use srpt_lab::report;

#[derive(Parser)]
#[command(
    name = "srpt-lab",
    about = "SRPT queue simulator and heavy-traffic scaling laboratory",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a full experiment from a JSON config.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's out_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; falls back to SRPT_LAB_WORKERS, then all cores.
        #[arg(long)]
        workers: Option<usize>,
        /// Base seed; overrides the config's base_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate S⁻¹ for a Weibull law (tail exp(−(βx)^α)).
    InvertS {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Comma-separated y values.
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<f64>,
    },
    /// Simulate reflected Brownian endpoints and compare against the
    /// closed-form marginal CDF.
    CompareRbm {
        #[arg(long, default_value_t = 0.0)]
        drift: f64,
        #[arg(long, default_value_t = 1.0)]
        variance: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the JSON report.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Re-derive Q and W from a stored event log and verify consistency.
    Replay {
        /// Path to an events CSV produced with dump_events.
        #[arg(long)]
        events: PathBuf,
        /// Absolute workload tolerance per event. Reconstruction drift grows
        /// with horizon and event count; the default suits short horizons.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        /// Initial queue length, for logs that start nonempty.
        #[arg(long, default_value_t = 0)]
        initial_q: u64,
        /// Initial workload, for logs that start nonempty.
        #[arg(long, default_value_t = 0.0)]
        initial_w: f64,
    },
}

fn resolve_workers(flag: Option<usize>) -> Result<usize, String> {
    if let Some(w) = flag {
        if w < 1 {
            return Err("workers must be at least 1".to_string());
        }
        return Ok(w);
    }
    if let Ok(s) = std::env::var("SRPT_LAB_WORKERS") {
        return match s.parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(format!(
                "SRPT_LAB_WORKERS must be a positive integer, got {s:?}"
            )),
        };
    }
    Ok(std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1))
}

fn cmd_run(
    config_path: &PathBuf,
    out: Option<PathBuf>,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<(), String> {
    let bytes = fs::read(config_path).map_err(|e| format!("{}: {e}", config_path.display()))?;
    let text =
        String::from_utf8(bytes.clone()).map_err(|_| "config is not valid UTF-8".to_string())?;
    let raw = config::parse(&text).map_err(|e| e.to_string())?;
    let mut exp = config::validate(&raw).map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        exp.base_seed = s;
    }
    let out_dir = out
        .or_else(|| exp.out_dir.as_ref().map(PathBuf::from))
        .ok_or("out_dir missing: pass --out or set out_dir in the config")?;
    let workers = resolve_workers(workers)?;

    let result =
        pipeline::run_experiment(&exp, &out_dir, workers, &bytes).map_err(|e| e.to_string())?;
    println!(
        "wrote {} files to {}",
        result.files.len(),
        result.out_dir.display()
    );
    for t in &result.trends {
        let medians: Vec<String> = t.median.iter().map(|m| format!("{m:.3e}")).collect();
        println!(
            "trend {}: decreasing={} margin={} medians=[{}]",
            t.statistic,
            t.monotone_decreasing,
            t.margin,
            medians.join(", ")
        );
    }
    if let Some(ks) = &result.terminal_ks {
        for (r, k) in ks {
            println!("terminal KS vs RBM at r={r}: {k:.4}");
        }
    }
    Ok(())
}

fn cmd_invert_s(alpha: f64, beta: f64, ys: &[f64]) -> Result<(), String> {
    let dist =
        srpt_lab_core::dist::ProcTimeDist::weibull(alpha, beta).map_err(|e| e.to_string())?;
    let rows = pipeline::invert_s_table(dist, ys).map_err(|e| e.to_string())?;
    println!(
        "{:>24} {:>24} {:>24} {:>24}",
        "y", "s_inv", "s_of_s_inv", "ratio"
    );
    for row in rows {
        println!(
            "{:>24} {:>24} {:>24} {:>24}",
            report::fmt_f64(row.y),
            report::fmt_f64(row.s_inv),
            report::fmt_f64(row.round_trip),
            report::fmt_f64(row.ratio)
        );
    }
    Ok(())
}

fn cmd_compare_rbm(
    drift: f64,
    variance: f64,
    t: f64,
    step: f64,
    n: usize,
    seed: u64,
    out: &PathBuf,
) -> Result<(), String> {
    let cmp =
        pipeline::compare_rbm(drift, variance, t, step, n, seed).map_err(|e| e.to_string())?;
    println!(
        "KS(simulated endpoints, marginal CDF) = {:.6}  (n={}, t={}, step={})",
        cmp.ks, cmp.n, cmp.t, cmp.step
    );
    let json = report::rbm_comparison_json(
        cmp.drift,
        cmp.variance,
        cmp.t,
        cmp.step,
        cmp.n,
        cmp.seed,
        cmp.ks,
    );
    fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let path = out.join("compare_rbm.json");
    fs::write(&path, json).map_err(|e| format!("{}: {e}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_replay(
    events: &PathBuf,
    tolerance: f64,
    initial_q: u64,
    initial_w: f64,
) -> Result<(), String> {
    let csv = fs::read_to_string(events).map_err(|e| format!("{}: {e}", events.display()))?;
    let s =
        replay::replay_events(&csv, tolerance, initial_q, initial_w).map_err(|e| e.to_string())?;
    println!(
        "replayed {} events, max workload deviation {:.3e}, final Q={}, W={:.6}",
        s.events, s.max_w_dev, s.final_q, s.final_w
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run {
            config,
            out,
            workers,
            seed,
        } => cmd_run(config, out.clone(), *workers, *seed),
        Cmd::InvertS { alpha, beta, y } => cmd_invert_s(*alpha, *beta, y),
        Cmd::CompareRbm {
            drift,
            variance,
            t,
            step,
            n,
            seed,
            out,
        } => cmd_compare_rbm(*drift, *variance, *t, *step, *n, *seed, out),
        Cmd::Replay {
            events,
            tolerance,
            initial_q,
            initial_w,
        } => cmd_replay(events, *tolerance, *initial_q, *initial_w),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
