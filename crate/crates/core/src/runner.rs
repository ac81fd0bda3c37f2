//! Batch execution of a [`RunConfig`]: one job per (cell, trial), each with
//! its own seed derived from the master seed, spread over worker threads.
//!
//! Workers append finished records to their own part files next to the
//! output (`<output>.part-<worker>`), so an interrupted batch resumes by
//! skipping every trial already present. On completion the parts are merged
//! into the output in plan order and removed.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::config::RunConfig;
use crate::engine::{
    run_static, splitmix64, FieldModel, Mode, SurvivalRecord, SurvivalTrial, SCHEMA_VERSION,
};
use crate::records::{self, RecordWriter, RecordsError, RunHeader};
use crate::rules::NoiseParams;
use crate::toom::toom_survival;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Records(#[from] RecordsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0} already holds results of a different configuration")]
    ConfigMismatch(PathBuf),
    #[error("batch interrupted after {completed} of {total} trials")]
    Interrupted { completed: usize, total: usize },
}

/// One trial of one (L, p) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub cell: usize,
    pub size: usize,
    pub p: f64,
    pub q: f64,
    pub trial: u64,
    pub seed: u64,
}

/// Identifies a finished trial independently of the order it ran in.
pub type TrialKey = (usize, u64, u64);

pub fn trial_key(size: usize, p: f64, trial: u64) -> TrialKey {
    (size, p.to_bits(), trial)
}

pub fn record_key(r: &SurvivalRecord) -> TrialKey {
    trial_key(r.size, r.p, r.trial)
}

fn mix(h: u64, v: u64) -> u64 {
    splitmix64(h ^ v)
}

/// Seed of one trial. Depends on the master seed, the mode, every cell
/// parameter and the trial index, but not on scheduling.
pub fn trial_seed(cfg: &RunConfig, size: usize, p: f64, trial: u64) -> u64 {
    let mode_tag = cfg.mode.as_str().bytes().fold(0u64, |h, b| (h << 8) | b as u64);
    let mut h = splitmix64(cfg.seed);
    for v in [
        mode_tag,
        size as u64,
        p.to_bits(),
        cfg.q.resolve(p).to_bits(),
        cfg.alpha.unwrap_or(0.0).to_bits(),
        trial,
    ] {
        h = mix(h, v);
    }
    h
}

/// All jobs of a batch: sizes outermost, then `p`, then trial index.
pub fn plan(cfg: &RunConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    let mut cell = 0;
    for &size in &cfg.sizes {
        for &p in &cfg.p {
            for trial in 0..cfg.samples {
                jobs.push(Job {
                    cell,
                    size,
                    p,
                    q: cfg.q.resolve(p),
                    trial,
                    seed: trial_seed(cfg, size, p, trial),
                });
            }
            cell += 1;
        }
    }
    jobs
}

/// Runs one trial. The record carries the job's seed and trial index.
pub fn run_job(cfg: &RunConfig, job: &Job) -> SurvivalRecord {
    let mut record = match cfg.mode {
        Mode::Toom => toom_survival(job.size, job.p, cfg.cap, job.seed),
        Mode::Static => {
            let model = match cfg.alpha {
                Some(alpha) => FieldModel::Explicit { alpha },
                None => FieldModel::Automaton,
            };
            let start = std::time::Instant::now();
            let out = run_static(
                job.size,
                job.p,
                cfg.tau_max_for(job.size),
                model,
                &cfg.settings(),
                job.seed,
            );
            SurvivalRecord {
                schema_version: SCHEMA_VERSION,
                mode: Mode::Static,
                size: job.size,
                p: job.p,
                q: 0.0,
                alpha: cfg.alpha,
                seed: job.seed,
                trial: 0,
                failure_time: out.rounds as f64,
                censored: out.timed_out,
                success: Some(out.success),
                wall_time: start.elapsed().as_secs_f64(),
            }
        }
        mode => {
            let noise = NoiseParams::new(job.p, job.q).expect("validated probabilities");
            let mut trial = SurvivalTrial::new(job.size, noise, cfg.cap);
            trial.settings = cfg.settings();
            match mode {
                Mode::Synchronous => trial.run_synchronous(job.seed),
                Mode::Asynchronous => trial.run_asynchronous(&cfg.rates, cfg.clock, job.seed),
                Mode::Explicit => {
                    trial.run_explicit(cfg.alpha.expect("validated alpha"), job.seed)
                }
                Mode::Static | Mode::Toom => unreachable!(),
            }
        }
    };
    record.trial = job.trial;
    record
}

/// Runs `jobs` on `workers` threads, handing each finished record to
/// `sink` (called from the worker thread). Jobs are claimed in order.
/// Stops claiming new jobs once `stop` is set or `sink` fails.
pub fn execute<F, E>(
    cfg: &RunConfig,
    jobs: &[Job],
    workers: usize,
    stop: &AtomicBool,
    sink: F,
) -> Result<usize, E>
where
    F: Fn(usize, SurvivalRecord) -> Result<(), E> + Sync,
    E: Send,
{
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let first_error: Mutex<Option<E>> = Mutex::new(None);
    let workers = workers.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for w in 0..workers {
            let (next, done, first_error, sink) = (&next, &done, &first_error, &sink);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let record = run_job(cfg, job);
                if let Err(e) = sink(w, record) {
                    first_error.lock().unwrap().get_or_insert(e);
                    stop.store(true, Ordering::Relaxed);
                    break;
                }
                done.fetch_add(1, Ordering::Relaxed);
            });
        }
    });
    match first_error.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(done.into_inner()),
    }
}

/// Runs every job in memory and returns the records in plan order.
pub fn run_in_memory(cfg: &RunConfig, workers: usize) -> Vec<SurvivalRecord> {
    let jobs = plan(cfg);
    let slots: Vec<Mutex<Option<SurvivalRecord>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let index: HashMap<TrialKey, usize> = jobs
        .iter()
        .enumerate()
        .map(|(i, j)| (trial_key(j.size, j.p, j.trial), i))
        .collect();
    let stop = AtomicBool::new(false);
    execute::<_, std::convert::Infallible>(cfg, &jobs, workers, &stop, |_, r| {
        let slot = index[&record_key(&r)];
        *slots[slot].lock().unwrap() = Some(r);
        Ok(())
    })
    .unwrap_or_else(|e| match e {});
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every job ran"))
        .collect()
}

fn part_path(output: &Path, worker: usize) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".part-{worker}"));
    output.with_file_name(name)
}

/// Part files left next to `output` by earlier or current workers.
pub fn part_files(output: &Path) -> Result<Vec<PathBuf>, RunError> {
    let dir = match output.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut prefix = output.file_name().unwrap_or_default().to_os_string();
    prefix.push(".part-");
    let prefix = prefix.to_string_lossy().into_owned();
    let entries = match fs::read_dir(&dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => return Err(RunError::Io { path: dir, source }),
    };
    let mut parts: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .map(|n| n.to_string_lossy().starts_with(&prefix))
                .unwrap_or(false)
        })
        .collect();
    parts.sort();
    Ok(parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSummary {
    pub total: usize,
    /// Trials found in existing output or part files.
    pub resumed: usize,
    pub ran: usize,
}

/// Runs a batch to `output` with checkpointing. Existing results for the
/// same configuration are kept and their trials skipped.
pub fn run_batch<F>(
    cfg: &RunConfig,
    workers: usize,
    output: &Path,
    stop: &AtomicBool,
    progress: F,
) -> Result<BatchSummary, RunError>
where
    F: Fn(&SurvivalRecord) + Sync,
{
    let header = RunHeader::new(cfg.clone());
    let jobs = plan(cfg);
    let order: HashMap<TrialKey, usize> = jobs
        .iter()
        .enumerate()
        .map(|(i, j)| (trial_key(j.size, j.p, j.trial), i))
        .collect();

    let mut existing = Vec::new();
    let mut sources = Vec::new();
    if output.exists() {
        sources.push(output.to_path_buf());
    }
    sources.extend(part_files(output)?);
    for path in &sources {
        let set = records::read_records(path)?;
        if set.headers.iter().any(|h| h.config != header.config) {
            return Err(RunError::ConfigMismatch(path.clone()));
        }
        existing.extend(set.records);
    }
    let finished: HashSet<TrialKey> = existing
        .iter()
        .map(record_key)
        .filter(|k| order.contains_key(k))
        .collect();
    let pending: Vec<Job> = jobs
        .iter()
        .filter(|j| !finished.contains(&trial_key(j.size, j.p, j.trial)))
        .copied()
        .collect();

    let workers = workers.clamp(1, pending.len().max(1));
    let mut writers = Vec::with_capacity(workers);
    for w in 0..workers {
        let path = part_path(output, w);
        let fresh = !path.exists();
        let mut writer = RecordWriter::append(&path)?;
        if fresh {
            writer.header(&header)?;
        }
        writers.push(Mutex::new(writer));
    }
    let ran = execute(cfg, &pending, workers, stop, |w, record| {
        writers[w].lock().unwrap().record(&record)?;
        progress(&record);
        Ok::<_, RunError>(())
    })?;
    drop(writers);
    if ran < pending.len() {
        return Err(RunError::Interrupted {
            completed: finished.len() + ran,
            total: jobs.len(),
        });
    }

    let mut all = Vec::new();
    if output.exists() {
        all.extend(records::read_records(output)?.records);
    }
    for path in part_files(output)? {
        all.extend(records::read_records(&path)?.records);
    }
    let mut by_slot: Vec<Option<SurvivalRecord>> = vec![None; jobs.len()];
    for r in all {
        if let Some(&i) = order.get(&record_key(&r)) {
            by_slot[i].get_or_insert(r);
        }
    }
    let merged: Vec<SurvivalRecord> = by_slot.into_iter().flatten().collect();
    records::write_record_file(output, Some(&header), &merged)?;
    for path in part_files(output)? {
        fs::remove_file(&path).map_err(|source| RunError::Io { path, source })?;
    }
    Ok(BatchSummary {
        total: jobs.len(),
        resumed: finished.len(),
        ran,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(mode: &str, extra: &str) -> RunConfig {
        RunConfig::from_toml(&format!(
            "mode = \"{mode}\"\nL = [4, 5]\np = [0.02, 0.05]\nq = \"p\"\nsamples = 3\nseed = 5\ncap = 400\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let cfg = config("sync", "");
        let jobs = plan(&cfg);
        assert_eq!(jobs.len(), 12);
        let seeds: HashSet<u64> = jobs.iter().map(|j| j.seed).collect();
        assert_eq!(seeds.len(), jobs.len());
        assert_eq!(plan(&cfg), jobs);
        let mut other = cfg.clone();
        other.seed = 6;
        assert!(plan(&other).iter().zip(&jobs).all(|(a, b)| a.seed != b.seed));
        // seeds do not depend on which other cells are planned
        let mut subset = cfg.clone();
        subset.sizes = vec![5];
        assert_eq!(plan(&subset)[0].seed, jobs[6].seed);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = config("sync", "");
        let one = run_in_memory(&cfg, 1);
        let three = run_in_memory(&cfg, 3);
        assert_eq!(one.len(), 12);
        assert!(one.iter().zip(&three).all(|(a, b)| a.same_outcome(b)));
        for (r, j) in one.iter().zip(plan(&cfg)) {
            assert_eq!((r.size, r.trial, r.seed), (j.size, j.trial, j.seed));
        }
    }

    #[test]
    fn every_mode_runs() {
        for (mode, extra) in [
            ("static", ""),
            ("async", ""),
            ("explicit", "alpha = 1.05"),
            ("toom", ""),
        ] {
            let cfg = config(mode, extra);
            let records = run_in_memory(&cfg, 2);
            assert_eq!(records.len(), 12, "{mode}");
            assert!(records.iter().all(|r| r.mode == cfg.mode));
        }
    }

    #[test]
    fn batch_resumes_and_merges_in_plan_order() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("batch.jsonl");
        let cfg = config("sync", "");
        let reference = run_in_memory(&cfg, 1);

        // simulate an interrupted run: a stale part file with two trials
        let stale = part_path(&out, 7);
        let mut w = RecordWriter::append(&stale).unwrap();
        w.header(&RunHeader::new(cfg.clone())).unwrap();
        w.record(&reference[4]).unwrap();
        w.record(&reference[0]).unwrap();
        drop(w);

        let stop = AtomicBool::new(false);
        let summary = run_batch(&cfg, 2, &out, &stop, |_| {}).unwrap();
        assert_eq!(summary, BatchSummary { total: 12, resumed: 2, ran: 10 });
        assert!(part_files(&out).unwrap().is_empty());
        let set = records::read_records(&out).unwrap();
        assert_eq!(set.headers.len(), 1);
        assert!(set.records.iter().zip(&reference).all(|(a, b)| a.same_outcome(b)));

        // rerunning a finished batch does nothing
        let again = run_batch(&cfg, 2, &out, &stop, |_| {}).unwrap();
        assert_eq!(again.ran, 0);
        assert_eq!(records::read_records(&out).unwrap().records.len(), 12);
    }

    #[test]
    fn batch_refuses_foreign_results() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("batch.jsonl");
        let cfg = config("sync", "");
        let stop = AtomicBool::new(false);
        run_batch(&cfg, 1, &out, &stop, |_| {}).unwrap();
        let mut other = cfg.clone();
        other.seed += 1;
        assert!(matches!(
            run_batch(&other, 1, &out, &stop, |_| {}),
            Err(RunError::ConfigMismatch(_))
        ));
    }

    #[test]
    fn stop_flag_interrupts_and_keeps_parts() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("batch.jsonl");
        let cfg = config("sync", "");
        let stop = AtomicBool::new(true);
        let err = run_batch(&cfg, 1, &out, &stop, |_| {}).unwrap_err();
        assert!(matches!(err, RunError::Interrupted { completed: 0, total: 12 }));
        assert_eq!(part_files(&out).unwrap().len(), 1);
        let stop = AtomicBool::new(false);
        assert_eq!(run_batch(&cfg, 1, &out, &stop, |_| {}).unwrap().ran, 12);
    }
}
