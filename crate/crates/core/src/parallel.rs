//! Multi-chain runner with round-based joint proposal updates.
//!
//! `K` chains run independently for `T` iterations per round; at each round
//! boundary every chain's proposal vector is recomputed from the pooled
//! inclusion counts of *all* chains,
//!
//! `rbar_j(k, m) = (L_j(k) r_j(k,0) + total_count_j) / (L_j(k) + m T K)`,
//!
//! and each chain resumes with that vector and the inflated adaptation
//! weight `L_j(k) + m T K`. Outputs are deterministic functions of the
//! per-worker seeds, independent of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::kernel::PosteriorKernel;
use crate::model::ModelIndex;
use crate::sampler::{
    run_segment, segment_echo, AdaptWeight, ChainTrace, InitialProposal, ProposalState,
    SamplerConfig,
};

/// Per-worker initialization.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkerInit {
    pub r0: InitialProposal,
    pub adapt_weight: AdaptWeight,
    pub seed: u64,
    pub start: Option<ModelIndex>,
}

/// How worker rounds are executed. Both modes produce identical output;
/// `Sequential` exists for debugging and for checking exactly that.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Threads,
    Sequential,
}

/// Configuration of a parallel run.
#[derive(Clone, Debug, PartialEq)]
pub struct ParallelConfig {
    pub rounds: usize,
    pub iters_per_round: usize,
    pub epsilon: f64,
    pub workers: Vec<WorkerInit>,
    /// Share one kernel memo cache across workers (off by default; all
    /// chains target the same posterior so this only trades locking for
    /// fewer evaluations).
    pub share_kernel_cache: bool,
    pub execution: Execution,
}

impl ParallelConfig {
    /// `k` workers with identical defaults (`L = p`, `r0 = q/p`,
    /// `epsilon = min(1/p, 0.25)`) and seeds `base_seed, base_seed+1, ...`.
    pub fn uniform(k: usize, rounds: usize, iters_per_round: usize, p: usize, base_seed: u64) -> Self {
        let serial = SamplerConfig::new(p, 1, 0);
        ParallelConfig {
            rounds,
            iters_per_round,
            epsilon: serial.epsilon,
            workers: (0..k)
                .map(|i| WorkerInit {
                    r0: serial.r0.clone(),
                    adapt_weight: serial.adapt_weight.clone(),
                    seed: base_seed.wrapping_add(i as u64),
                    start: None,
                })
                .collect(),
            share_kernel_cache: false,
            execution: Execution::Threads,
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.workers.is_empty() {
            return Err(Error::Config("need at least one worker".into()));
        }
        if self.rounds == 0 || self.iters_per_round == 0 {
            return Err(Error::Config("rounds and iterations per round must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        let mut seeds: Vec<u64> = self.workers.iter().map(|w| w.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.workers.len() {
            return Err(Error::Config("worker seeds must be pairwise distinct".into()));
        }
        for w in &self.workers {
            if let Some(start) = &w.start {
                if start.p() != p {
                    return Err(Error::Config(format!(
                        "worker start model has p = {}, kernel has p = {p}",
                        start.p()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// State published at a round boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundCheckpoint {
    /// Round index `m` (1-based).
    pub round: usize,
    /// Cumulative per-worker inclusion counts over rounds `1..=m`.
    pub per_worker_counts: Vec<Vec<u64>>,
    /// Pooled counts over all workers and rounds.
    pub total_counts: Vec<u64>,
    /// Jointly updated proposal vectors, one per worker.
    pub rbar: Vec<Vec<f64>>,
}

/// The joint proposal update of worker `k` after round `m`:
/// `(L_j r0_j + total_count_j) / (L_j + m T K)`, one expression per entry.
pub fn joint_update(
    total_counts: &[u64],
    l: &[f64],
    r0: &[f64],
    round: usize,
    iters_per_round: usize,
    workers: usize,
) -> Result<Vec<f64>> {
    if total_counts.len() != l.len() || total_counts.len() != r0.len() {
        return Err(Error::Config("joint update inputs have mismatched lengths".into()));
    }
    let budget = (round * iters_per_round * workers) as u64;
    if let Some(c) = total_counts.iter().find(|&&c| c > budget) {
        return Err(Error::Config(format!(
            "inclusion count {c} exceeds the {budget} models sampled through round {round}"
        )));
    }
    let denom = budget as f64;
    Ok((0..total_counts.len())
        .map(|j| (l[j] * r0[j] + total_counts[j] as f64) / (l[j] + denom))
        .collect())
}

/// Output of a parallel run: one full trace per worker plus the round
/// checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct ParallelRun {
    pub traces: Vec<ChainTrace>,
    pub checkpoints: Vec<RoundCheckpoint>,
}

struct WorkerSlot {
    index: usize,
    kernel: PosteriorKernel,
    rng: ChaCha12Rng,
    r0: Vec<f64>,
    l: Vec<f64>,
    rbar: Vec<f64>,
    current: Option<ModelIndex>,
    cum_counts: Vec<u64>,
    segments: Vec<ChainTrace>,
    header: String,
    seed: u64,
}

impl WorkerSlot {
    fn run_round(&mut self, round: usize, iters: usize, k_total: usize, epsilon: f64) -> Result<()> {
        let offset = ((round - 1) * iters * k_total) as f64;
        let l_eff: Vec<f64> = self.l.iter().map(|l| l + offset).collect();
        let state = ProposalState::new(self.rbar.clone(), l_eff, epsilon)?;
        let segment = run_segment(
            &self.kernel,
            state,
            self.current.clone(),
            iters,
            self.seed,
            self.header.clone(),
            &mut self.rng,
        )?;
        let counts = segment.final_state.as_ref().unwrap().counts();
        for (acc, &c) in self.cum_counts.iter_mut().zip(counts) {
            *acc += c;
        }
        self.current = Some(segment.accepted.last().unwrap().clone());
        self.segments.push(segment);
        Ok(())
    }

    fn into_trace(self) -> ChainTrace {
        let mut segments = self.segments.into_iter();
        let mut trace = segments.next().expect("at least one round");
        for seg in segments {
            trace.proposed.extend(seg.proposed);
            trace.accepted.extend(seg.accepted);
            trace.accept_flags.extend(seg.accept_flags);
            trace.log_kernel.extend(seg.log_kernel);
            trace.adaptation_violations += seg.adaptation_violations;
            trace.final_state = seg.final_state;
        }
        trace
    }
}

fn worker_context(e: Error, worker: usize, round: usize) -> Error {
    let tag = format!("worker {} in round {round}", worker + 1);
    match e {
        Error::Config(m) => Error::Config(format!("{tag}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("{tag}: {m}")),
        Error::SingularFit(m) => Error::SingularFit(format!("{tag}: {m}")),
        Error::Separation(m) => Error::Separation(format!("{tag}: {m}")),
        Error::Parse(m) => Error::Parse(format!("{tag}: {m}")),
        e @ Error::Io(_) => e,
    }
}

/// Runs `K` chains for `R` rounds of `T` iterations with joint proposal
/// updates at the round boundaries.
pub fn run_parallel(kernel: &PosteriorKernel, cfg: &ParallelConfig) -> Result<ParallelRun> {
    let p = kernel.p();
    cfg.validate(p)?;
    let k_total = cfg.workers.len();
    let total_iters = cfg.rounds * cfg.iters_per_round;

    let shared_base = cfg.share_kernel_cache.then(|| kernel.fork().with_shared_cache());

    let mut slots = Vec::with_capacity(k_total);
    for (index, init) in cfg.workers.iter().enumerate() {
        let serial_view = SamplerConfig {
            iterations: total_iters,
            burn_in: 0,
            r0: init.r0.clone(),
            adapt_weight: init.adapt_weight.clone(),
            epsilon: cfg.epsilon,
            seed: init.seed,
            start: init.start.clone(),
            auto_stop: None,
        };
        serial_view.validate(p)?;
        let r0 = serial_view.resolve_r0(kernel)?;
        let l = init.adapt_weight.resolve(p)?;
        let header = segment_echo(
            kernel,
            total_iters,
            cfg.epsilon,
            &init.r0,
            &init.adapt_weight,
            init.seed,
            &init.start,
        );
        slots.push(WorkerSlot {
            index,
            kernel: shared_base.as_ref().map_or_else(|| kernel.fork(), |k| k.fork()),
            rng: ChaCha12Rng::seed_from_u64(init.seed),
            rbar: r0.clone(),
            r0,
            l,
            current: init.start.clone(),
            cum_counts: vec![0; p],
            segments: Vec::with_capacity(cfg.rounds),
            header,
            seed: init.seed,
        });
    }

    let mut checkpoints = Vec::with_capacity(cfg.rounds);
    for round in 1..=cfg.rounds {
        match cfg.execution {
            Execution::Sequential => {
                for slot in slots.iter_mut() {
                    slot.run_round(round, cfg.iters_per_round, k_total, cfg.epsilon)
                        .map_err(|e| worker_context(e, slot.index, round))?;
                }
            }
            Execution::Threads => {
                let iters = cfg.iters_per_round;
                let epsilon = cfg.epsilon;
                let results: Vec<Result<()>> = std::thread::scope(|scope| {
                    let handles: Vec<_> = slots
                        .iter_mut()
                        .map(|slot| {
                            scope.spawn(move || slot.run_round(round, iters, k_total, epsilon))
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| {
                            h.join().unwrap_or_else(|_| {
                                Err(Error::Numeric("worker thread panicked".into()))
                            })
                        })
                        .collect()
                });
                for (index, result) in results.into_iter().enumerate() {
                    result.map_err(|e| worker_context(e, index, round))?;
                }
            }
        }

        // barrier: pool counts in worker order, then update every rbar
        let mut total_counts = vec![0u64; p];
        for slot in &slots {
            for (t, &c) in total_counts.iter_mut().zip(&slot.cum_counts) {
                *t += c;
            }
        }
        let mut rbar_all = Vec::with_capacity(k_total);
        for slot in slots.iter_mut() {
            let rbar = joint_update(
                &total_counts,
                &slot.l,
                &slot.r0,
                round,
                cfg.iters_per_round,
                k_total,
            )?;
            slot.rbar = rbar.clone();
            rbar_all.push(rbar);
        }
        checkpoints.push(RoundCheckpoint {
            round,
            per_worker_counts: slots.iter().map(|s| s.cum_counts.clone()).collect(),
            total_counts,
            rbar: rbar_all,
        });
    }

    Ok(ParallelRun {
        traces: slots.into_iter().map(WorkerSlot::into_trace).collect(),
        checkpoints,
    })
}
