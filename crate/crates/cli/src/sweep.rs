//! Resumable sweeps: a fixed worker pool runs the pending grid points and a
//! single writer appends finished records in grid order.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use anyhow::{Context, Result};
use serde::Serialize;

use hubbard_anneal::anneal::{self, AnnealSchedule, RunOptions};
use hubbard_anneal::hamiltonian::HubbardParams;
use hubbard_anneal::records::{RecordKey, SweepRecord};

use crate::output::{self, Header};
use crate::{core_exit_code, params_for, ranges, Cli, SweepArgs};

/// Some grid points failed; the exit status is that of the first failure.
#[derive(Debug)]
pub struct SweepFailed {
    pub failed: usize,
    pub code: u8,
    pub log: PathBuf,
}

impl fmt::Display for SweepFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} run(s) failed, see {}",
            self.failed,
            self.log.display()
        )
    }
}

impl std::error::Error for SweepFailed {}

struct Job {
    params: HubbardParams,
    schedule: AnnealSchedule,
}

#[derive(Serialize)]
struct FailureLine<'a> {
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "U")]
    u: f64,
    #[serde(rename = "T_A")]
    t_a: f64,
    tau: f64,
    schedule: &'a str,
    grouping: &'a str,
    error: String,
    exit_code: u8,
}

pub fn cmd_sweep(a: &SweepArgs, cli: &Cli, header: &Header) -> Result<()> {
    let sizes = ranges::parse_sizes(&a.l, 2)?;
    let us = ranges::parse_reals(&a.u)?;
    let times = ranges::parse_time_grid(&a.t_a, a.schedule.tau)?;
    let path = a
        .output
        .clone()
        .unwrap_or_else(|| cli.out_dir.join("sweep.csv"));

    let mut grid = Vec::new();
    for &l in &sizes {
        for &u in &us {
            let params = params_for(l, a.t, u, a.n_up, a.n_down)?;
            for &t_a in &times {
                let schedule = AnnealSchedule::new(a.schedule.schedule, t_a, a.schedule.tau)?;
                grid.push(Job { params, schedule });
            }
        }
    }

    let existing = if path.exists() {
        Some(fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?)
    } else {
        None
    };
    let done: HashSet<RecordKey> = match &existing {
        Some(text) => output::parse_records(text)
            .with_context(|| format!("parsing {}", path.display()))?
            .iter()
            .map(SweepRecord::key)
            .collect(),
        None => HashSet::new(),
    };
    let key_of = |j: &Job| {
        RecordKey::new(
            j.params.l,
            j.params.u,
            j.params.t,
            j.schedule.kind(),
            a.schedule.grouping,
            j.schedule.total_time(),
            j.schedule.tau(),
        )
    };
    let pending: Vec<Job> = grid.into_iter().filter(|j| !done.contains(&key_of(j))).collect();
    if pending.is_empty() {
        eprintln!("{}: nothing to do ({} records present)", path.display(), done.len());
        return Ok(());
    }

    match &existing {
        None => output::write_text(
            Some(&path),
            &(header.comment_lines("# ") + &hubbard_anneal::records::CSV_COLUMNS.join(",") + "\n"),
        )?,
        Some(text) => {
            let line = format!("# {}", header.config_line());
            if !text.lines().any(|l| l == line) {
                append(&path, &format!("{line}\n"))?;
            }
        }
    }
    eprintln!(
        "{}: {} pending, {} already present, {} worker(s)",
        path.display(),
        pending.len(),
        done.len(),
        cli.jobs
    );

    let opts = RunOptions {
        merge: !a.schedule.no_merge,
        e0: a.schedule.e0.0,
        seed: cli.seed,
    };
    let grouping = a.schedule.grouping;
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, hubbard_anneal::Result<SweepRecord>)>();
    let failures_path = failure_log(&path);
    let mut failed = Vec::new();

    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..cli.jobs.min(pending.len()) {
            let tx = tx.clone();
            let (next, pending) = (&next, &pending);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = pending.get(i) else { break };
                let out = anneal::run_anneal(&job.params, &job.schedule, grouping, &opts)
                    .map(|o| o.record);
                if tx.send((i, out)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Results arrive in any order; emit them in grid order.
        let mut waiting = BTreeMap::new();
        let mut cursor = 0;
        for (i, res) in rx {
            waiting.insert(i, res);
            while let Some(res) = waiting.remove(&cursor) {
                let job = &pending[cursor];
                match res {
                    Ok(rec) => {
                        append(&path, &output::csv_string(&[rec], false)?)?;
                    }
                    Err(e) => {
                        let code = core_exit_code(&e);
                        let line = FailureLine {
                            l: job.params.l,
                            u: job.params.u,
                            t_a: job.schedule.total_time(),
                            tau: job.schedule.tau(),
                            schedule: job.schedule.kind().as_str(),
                            grouping: grouping.as_str(),
                            error: e.to_string(),
                            exit_code: code,
                        };
                        append(&failures_path, &(serde_json::to_string(&line)? + "\n"))?;
                        eprintln!(
                            "failed: L = {} U = {} T_A = {}: {e}",
                            line.l, line.u, line.t_a
                        );
                        failed.push(code);
                    }
                }
                cursor += 1;
            }
        }
        Ok(())
    })?;

    if let Some(&code) = failed.first() {
        return Err(SweepFailed {
            failed: failed.len(),
            code,
            log: failures_path,
        }
        .into());
    }
    Ok(())
}

fn failure_log(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".failures.jsonl");
    PathBuf::from(s)
}

fn append(path: &Path, text: &str) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
