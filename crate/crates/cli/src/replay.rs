//! Event-log replay: reconstruct Q and W from a stored event CSV by pure
//! integration (unit drain rate while the system is nonempty, jumps at
//! arrivals) and confirm the logged values match within tolerance.
//!
//! This is an end-to-end consistency check on the dump format: it exercises
//! the 17-digit float round trip, the event ordering, and the engine's
//! workload bookkeeping, without trusting any of the engine's internal state.

use std::fmt;

#[derive(Debug)]
pub enum ReplayError {
    Parse { line: usize, what: String },
    Mismatch { line: usize, what: String },
}

impl fmt::Display for ReplayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplayError::Parse { line, what } => write!(f, "line {line}: {what}"),
            ReplayError::Mismatch { line, what } => {
                write!(f, "replay mismatch at line {line}: {what}")
            }
        }
    }
}

impl std::error::Error for ReplayError {}

#[derive(Debug)]
pub struct ReplaySummary {
    pub events: usize,
    /// Largest |reconstructed − logged| workload deviation.
    pub max_w_dev: f64,
    pub final_q: u64,
    pub final_w: f64,
}

struct Record {
    time: f64,
    kind: Kind,
    residual_after: f64,
    q: u64,
    w: f64,
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum Kind {
    Arrival,
    Completion,
    Crossing,
    Grid,
}

fn parse_line(line_no: usize, line: &str) -> Result<Record, ReplayError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 6 {
        return Err(ReplayError::Parse {
            line: line_no,
            what: format!("expected 6 fields, got {}", fields.len()),
        });
    }
    let parse_f = |s: &str, name: &str| -> Result<f64, ReplayError> {
        s.parse().map_err(|_| ReplayError::Parse {
            line: line_no,
            what: format!("bad {name} value {s:?}"),
        })
    };
    let kind = match fields[1] {
        "arrival" => Kind::Arrival,
        "completion" => Kind::Completion,
        "crossing" => Kind::Crossing,
        "grid" => Kind::Grid,
        other => {
            return Err(ReplayError::Parse {
                line: line_no,
                what: format!("unknown event kind {other:?}"),
            })
        }
    };
    let q: u64 = fields[4].parse().map_err(|_| ReplayError::Parse {
        line: line_no,
        what: format!("bad q value {:?}", fields[4]),
    })?;
    Ok(Record {
        time: parse_f(fields[0], "time")?,
        kind,
        residual_after: parse_f(fields[3], "residual_after")?,
        q,
        w: parse_f(fields[5], "w")?,
    })
}

/// Replay an event CSV (header `time,kind,job_seq,residual_after,q,w`)
/// from an initially empty system and verify every logged (Q, W) pair.
pub fn replay_events(
    csv: &str,
    tolerance: f64,
    initial_q: u64,
    initial_w: f64,
) -> Result<ReplaySummary, ReplayError> {
    let mut q = initial_q;
    let mut w = initial_w;
    let mut now = 0.0f64;
    let mut max_dev = 0.0f64;
    let mut events = 0usize;

    for (idx, line) in csv.lines().enumerate() {
        if idx == 0 {
            if !line.starts_with("time,") {
                return Err(ReplayError::Parse {
                    line: 1,
                    what: "missing header row".to_string(),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let rec = parse_line(line_no, line)?;
        if rec.time < now - 1e-12 {
            return Err(ReplayError::Mismatch {
                line: line_no,
                what: format!("time goes backwards: {} after {now}", rec.time),
            });
        }

        // Drain at unit rate while nonempty, then apply the jump.
        let dt = rec.time - now;
        if q > 0 {
            w -= dt;
        }
        now = rec.time;
        match rec.kind {
            Kind::Arrival => {
                q += 1;
                w += rec.residual_after;
            }
            Kind::Completion => {
                if q == 0 {
                    return Err(ReplayError::Mismatch {
                        line: line_no,
                        what: "completion in an empty system".to_string(),
                    });
                }
                q -= 1;
                if q == 0 {
                    // The engine snaps the workload to zero with the last job;
                    // the drained residual is below the completion tolerance.
                    w = w.max(0.0);
                }
            }
            Kind::Crossing | Kind::Grid => {}
        }

        if q != rec.q {
            return Err(ReplayError::Mismatch {
                line: line_no,
                what: format!("queue length: reconstructed {q}, logged {}", rec.q),
            });
        }
        let dev = (w - rec.w).abs();
        if dev > tolerance {
            return Err(ReplayError::Mismatch {
                line: line_no,
                what: format!(
                    "workload: reconstructed {w}, logged {} (|Δ| = {dev})",
                    rec.w
                ),
            });
        }
        max_dev = max_dev.max(dev);
        events += 1;
    }

    Ok(ReplaySummary {
        events,
        max_w_dev: max_dev,
        final_q: q,
        final_w: w,
    })
}
