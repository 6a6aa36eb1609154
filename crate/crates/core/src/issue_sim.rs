//! Cycle-level model of a core built from single-issue, in-order,
//! round-robin multithreaded pipelines.
//!
//! Each pipeline issues at most one instruction per cycle, taken from the
//! next thread in rotation that has no instruction in flight. A thread's
//! instruction occupies it for `latency` cycles. There are no caches and no
//! memory back-pressure: only the issue slot and per-thread latency limit
//! throughput.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roofline::{InstructionMix, MachineSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstrKind {
    Load,
    Store,
    Fma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractInstruction {
    pub kind: InstrKind,
    pub latency_cycles: u32,
    pub flops: u32,
}

/// Cycles an instruction of each kind keeps its thread busy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Latencies {
    pub load: u32,
    pub store: u32,
    pub fma: u32,
}

impl Default for Latencies {
    fn default() -> Self {
        Latencies { load: 20, store: 1, fma: 4 }
    }
}

impl Latencies {
    pub fn uniform(cycles: u32) -> Self {
        Latencies { load: cycles, store: cycles, fma: cycles }
    }

    pub fn of(m: &MachineSpec) -> Self {
        Latencies { load: m.load_latency_cycles, store: m.store_latency_cycles, fma: m.fma_latency_cycles }
    }

    pub fn max(&self) -> u32 {
        self.load.max(self.store).max(self.fma)
    }

    fn instr(&self, kind: InstrKind) -> AbstractInstruction {
        let (latency_cycles, flops) = match kind {
            InstrKind::Load => (self.load, 0),
            InstrKind::Store => (self.store, 0),
            InstrKind::Fma => (self.fma, 2),
        };
        AbstractInstruction { kind, latency_cycles, flops }
    }
}

/// An instruction sequence executed in order by one thread.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Trace(pub Vec<AbstractInstruction>);

impl Trace {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flops(&self) -> u64 {
        self.0.iter().map(|i| i.flops as u64).sum()
    }

    pub fn mix(&self) -> InstructionMix {
        let count = |k| self.0.iter().filter(|i| i.kind == k).count() as u64;
        InstructionMix {
            loads: count(InstrKind::Load),
            stores: count(InstrKind::Store),
            fmas: count(InstrKind::Fma),
            flops: self.flops(),
        }
    }

    /// The sequence concatenated `n` times.
    pub fn repeated(&self, n: usize) -> Trace {
        Trace(self.0.repeat(n))
    }

    fn push(&mut self, lat: &Latencies, kind: InstrKind, n: usize) {
        self.0.extend(std::iter::repeat_n(lat.instr(kind), n));
    }
}

/// One output element as a dot product of a row of A with a column of B:
/// for each of the three terms, load the two complex operands (4 scalars)
/// and issue 4 FMAs; then store the real and imaginary parts.
pub fn trace_dot_product(lat: &Latencies) -> Trace {
    let mut t = Trace::default();
    for _ in 0..3 {
        t.push(lat, InstrKind::Load, 4);
        t.push(lat, InstrKind::Fma, 4);
    }
    t.push(lat, InstrKind::Store, 2);
    t
}

/// One link as two register blocks: rows 0-1 of A against B (12 + 18 loads,
/// 72 FMAs, 12 stores), then row 2 (6 + 18 loads, 36 FMAs, 6 stores).
pub fn trace_blocked_gemm(lat: &Latencies) -> Trace {
    let mut t = Trace::default();
    for rows in [2usize, 1] {
        t.push(lat, InstrKind::Load, rows * 6);
        t.push(lat, InstrKind::Load, 18);
        t.push(lat, InstrKind::Fma, rows * 36);
        t.push(lat, InstrKind::Store, rows * 6);
    }
    t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreConfig {
    pub pipelines: u32,
    pub threads_per_pipeline: u32,
    pub latencies: Latencies,
}

impl CoreConfig {
    /// Pipelines and latencies of `m`, with enough threads to cover the
    /// longest latency.
    pub fn from_machine(m: &MachineSpec) -> Self {
        let latencies = Latencies::of(m);
        CoreConfig { pipelines: m.pipelines_per_core, threads_per_pipeline: latencies.max(), latencies }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Cycles until the last instruction of every thread has completed.
    pub cycles: u64,
    pub instructions_issued: u64,
    pub flops_done: u64,
    /// Aggregate instructions per cycle over all pipelines.
    pub ipc: f64,
    pub ipc_per_pipeline: f64,
    pub flops_per_cycle: f64,
    pub flops_per_cycle_per_pipeline: f64,
}

impl SimResult {
    /// GF/s at the given pipeline clock.
    pub fn gflops(&self, pipeline_clock_ghz: f64) -> f64 {
        self.flops_per_cycle * pipeline_clock_ghz
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct PipelineStats {
    cycles: u64,
    issued: u64,
    flops: u64,
}

/// Runs every thread of every pipeline through `trace` `repeat` times.
pub fn simulate(cfg: &CoreConfig, trace: &Trace, repeat: u64) -> Result<SimResult> {
    if trace.is_empty() {
        return Err(Error::param("cannot simulate an empty trace"));
    }
    if repeat == 0 {
        return Err(Error::param("repeat must be at least 1"));
    }
    if cfg.pipelines == 0 || cfg.threads_per_pipeline == 0 {
        return Err(Error::param("need at least one pipeline and one thread"));
    }
    if trace.0.iter().any(|i| i.latency_cycles == 0) {
        return Err(Error::param("instruction latency must be at least 1 cycle"));
    }

    // Pipelines share nothing and run identical work, so they finish in
    // lockstep; one is simulated and the totals scaled.
    let one = run_pipeline(cfg.threads_per_pipeline as usize, trace, repeat);
    let p = cfg.pipelines as u64;
    let cycles = one.cycles;
    let per_pipe_ipc = one.issued as f64 / cycles as f64;
    let per_pipe_fpc = one.flops as f64 / cycles as f64;
    Ok(SimResult {
        cycles,
        instructions_issued: one.issued * p,
        flops_done: one.flops * p,
        ipc: per_pipe_ipc * p as f64,
        ipc_per_pipeline: per_pipe_ipc,
        flops_per_cycle: per_pipe_fpc * p as f64,
        flops_per_cycle_per_pipeline: per_pipe_fpc,
    })
}

fn run_pipeline(threads: usize, trace: &Trace, repeat: u64) -> PipelineStats {
    let len = trace.len();
    let mut ready_at = vec![0u64; threads];
    let mut pc = vec![0usize; threads];
    let mut reps = vec![0u64; threads];
    let mut remaining = threads as u64 * repeat * len as u64;
    let mut cycle = 0u64;
    let mut next = 0usize;
    let mut stats = PipelineStats { cycles: 0, issued: 0, flops: 0 };

    while remaining > 0 {
        let pick = (0..threads)
            .map(|o| (next + o) % threads)
            .find(|&t| reps[t] < repeat && ready_at[t] <= cycle);
        match pick {
            Some(t) => {
                let ins = trace.0[pc[t]];
                ready_at[t] = cycle + ins.latency_cycles as u64;
                stats.issued += 1;
                stats.flops += ins.flops as u64;
                pc[t] += 1;
                if pc[t] == len {
                    pc[t] = 0;
                    reps[t] += 1;
                }
                remaining -= 1;
                next = (t + 1) % threads;
                cycle += 1;
            }
            None => {
                // Nobody can issue: skip to the earliest completion.
                cycle = (0..threads)
                    .filter(|&t| reps[t] < repeat)
                    .map(|t| ready_at[t])
                    .min()
                    .expect("unfinished thread exists while work remains");
            }
        }
    }
    stats.cycles = ready_at.iter().copied().max().unwrap_or(0).max(cycle);
    stats
}
