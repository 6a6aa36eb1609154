//! Timed benchmark runs, strong-scaling sweeps and model comparison.

mod pin;
mod report;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Barrier;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::complex::Complex;
use crate::error::{Error, Result};
use crate::issue_sim::{self, CoreConfig, SimResult};
use crate::kernel::{verify, KernelPlan, PartitionShape, Variant, VariantId, VerificationReport};
use crate::lattice::{check_layout, LinkSet};
use crate::layout::{
    allocate_lattice, init_lattice, init_links, placement_report, Partition, PlacementPolicy,
    PlacementReport,
};
use crate::roofline::{
    arithmetic_intensity, attainable, scope_bandwidth, scope_issue_bound, KernelSpec, MachineSpec, MixKind,
    RooflineResult, Scope,
};
use crate::scalar::{Precision, Scalar};
pub use pin::{allowed_cpus, PinPolicy};
pub use report::{emit_report, emit_sweep, OutputFormat, CSV_HEADER};

/// Everything that defines one benchmark run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(rename = "L")]
    pub dim: usize,
    pub iterations: u32,
    pub warmups: u32,
    pub workers: usize,
    pub variant: VariantId,
    pub transpose_b: bool,
    pub precision: Precision,
    pub placement: PlacementPolicy,
    pub pin: PinPolicy,
    /// Preset name or path of a machine spec file.
    pub machine: Option<String>,
    /// Instruction mix for the issue bound; follows the variant when unset.
    pub mix: Option<MixKind>,
    pub scope: Scope,
    pub format: OutputFormat,
    /// Also time every iteration individually.
    pub per_iteration: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 16,
            iterations: 1,
            warmups: 1,
            workers: 1,
            variant: VariantId::SiteParallel,
            transpose_b: false,
            precision: Precision::F32,
            placement: PlacementPolicy::TouchByComputePartition,
            pin: PinPolicy::None,
            machine: None,
            mix: None,
            scope: Scope::Socket,
            format: OutputFormat::Text,
            per_iteration: false,
        }
    }
}

impl RunConfig {
    pub fn variant(&self) -> Variant {
        Variant::new(self.variant, self.transpose_b)
    }

    pub fn effective_mix(&self) -> MixKind {
        self.mix.unwrap_or(match self.variant {
            VariantId::BlockedGemm => MixKind::Blocked,
            _ => MixKind::Dot,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("L must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::param("workers must be at least 1"));
        }
        Ok(())
    }
}

/// Fastest and median single-iteration wall time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub min_seconds: f64,
    pub median_seconds: f64,
}

/// Placement of the input and output lattices after the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementSnapshot {
    pub a: PlacementReport,
    pub c: PlacementReport,
}

/// Measured outcome of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub variant: String,
    #[serde(rename = "L")]
    pub dim: usize,
    pub precision: Precision,
    pub workers: usize,
    pub iterations: u32,
    pub warmups: u32,
    pub seconds: f64,
    pub gflops: f64,
    pub gbytes_per_s: f64,
    pub verified: bool,
    pub flops_per_iteration: u64,
    pub arithmetic_intensity: f64,
    pub verification: VerificationReport,
    pub partition: PartitionShape,
    pub placement: PlacementSnapshot,
    pub pinned: bool,
    pub iteration_stats: Option<IterationStats>,
    pub warnings: Vec<String>,
    pub config: RunConfig,
}

/// GF/s for `flops` done in `seconds`.
pub fn gflops_of(flops: u64, seconds: f64) -> f64 {
    flops as f64 / (seconds * 1e9)
}

/// Allocates, initializes canonically (A = 1, B = 1/3), runs warmups
/// untimed, times `iterations` passes, then verifies.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchResult> {
    cfg.validate()?;
    check_layout().map_err(Error::Config)?;
    match cfg.precision {
        Precision::F32 => run_typed::<f32>(cfg),
        Precision::F64 => run_typed::<f64>(cfg),
    }
}

fn run_typed<T: Scalar>(cfg: &RunConfig) -> Result<BenchResult> {
    let variant = cfg.variant();
    let mut a = allocate_lattice::<T>(cfg.dim, cfg.placement)?;
    let mut c = allocate_lattice::<T>(cfg.dim, cfg.placement)?;
    let n = a.total_sites();
    let mut warnings = Vec::new();

    let init_partition = match cfg.placement {
        PlacementPolicy::TouchSequential => Partition::sequential(n),
        PlacementPolicy::TouchByComputePartition | PlacementPolicy::Interleaved => {
            variant.site_partition(n, cfg.workers)
        }
    };
    init_lattice(&mut a, Complex::ONE, &init_partition)?;
    if cfg.placement == PlacementPolicy::TouchSequential {
        // The zero-initializing constructor: C is touched by one thread at declaration.
        init_lattice(&mut c, Complex::ZERO, &init_partition)?;
    }
    let mut b = LinkSet::<T>::default();
    init_links(&mut b, Complex::from_f64(1.0 / 3.0, 0.0));

    let cpus = if cfg.pin == PinPolicy::Compact { allowed_cpus() } else { Vec::new() };
    let pinned_all = AtomicBool::new(cfg.pin == PinPolicy::Compact);

    let plan = KernelPlan::new(&a, &b, &mut c, variant, cfg.workers)?;
    let run = plan.report();
    let total = (cfg.warmups + cfg.iterations) as usize;
    let barrier = Barrier::new(cfg.workers + 1);
    let mut per_iter = Vec::with_capacity(cfg.iterations as usize);
    let mut elapsed = Duration::ZERO;

    std::thread::scope(|s| {
        for w in 0..cfg.workers {
            let (plan, barrier, cpus, pinned_all) = (&plan, &barrier, &cpus, &pinned_all);
            s.spawn(move || {
                if cfg.pin == PinPolicy::Compact && !pin::pin_current(w, cpus) {
                    pinned_all.store(false, Ordering::Relaxed);
                }
                for _ in 0..total {
                    barrier.wait();
                    plan.run_worker(w);
                    barrier.wait();
                }
            });
        }
        let mut start = None;
        for it in 0..total {
            let t0 = Instant::now();
            if it == cfg.warmups as usize {
                start = Some(t0);
            }
            barrier.wait();
            barrier.wait();
            if it >= cfg.warmups as usize {
                per_iter.push(t0.elapsed().as_secs_f64());
            }
        }
        elapsed = start.map(|t| t.elapsed()).unwrap_or_default();
    });

    let pinned = pinned_all.load(Ordering::Relaxed);
    if cfg.pin == PinPolicy::Compact && !pinned {
        warnings.push("worker pinning is not supported here; running unpinned".into());
    }

    let verification = verify(&c);
    let kspec = KernelSpec::su3(T::PRECISION);
    let ai = arithmetic_intensity(&kspec)?;
    let seconds = elapsed.as_secs_f64().max(1e-9);
    let flops = run.flops * cfg.iterations as u64;
    let gflops = gflops_of(flops, seconds);
    let iteration_stats = cfg.per_iteration.then(|| {
        per_iter.sort_by(f64::total_cmp);
        IterationStats { min_seconds: per_iter[0], median_seconds: per_iter[per_iter.len() / 2] }
    });

    Ok(BenchResult {
        variant: variant.to_string(),
        dim: cfg.dim,
        precision: T::PRECISION,
        workers: cfg.workers,
        iterations: cfg.iterations,
        warmups: cfg.warmups,
        seconds,
        gflops,
        gbytes_per_s: gflops / ai,
        verified: verification.ok,
        flops_per_iteration: run.flops,
        arithmetic_intensity: ai,
        verification,
        partition: run.partition,
        placement: PlacementSnapshot { a: placement_report(&a), c: placement_report(&c) },
        pinned,
        iteration_stats,
        warnings,
        config: cfg.clone(),
    })
}

/// One row of a strong-scaling sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub result: BenchResult,
    /// GF/s relative to the first (smallest) worker count of the sweep.
    pub speedup: f64,
}

/// Runs `cfg` once per worker count, re-allocating and re-initializing the
/// lattices each time under the configured placement policy.
pub fn scaling_sweep(cfg: &RunConfig, worker_counts: &[usize]) -> Result<Vec<SweepRow>> {
    if worker_counts.is_empty() {
        return Err(Error::config("worker sweep is empty"));
    }
    if worker_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(format!("worker sweep {worker_counts:?} is not ascending")));
    }
    let mut rows: Vec<SweepRow> = Vec::with_capacity(worker_counts.len());
    for &w in worker_counts {
        let result = run_benchmark(&RunConfig { workers: w, ..cfg.clone() })?;
        let base = rows.first().map_or(result.gflops, |r| r.result.gflops);
        let speedup = if base > 0.0 { result.gflops / base } else { 0.0 };
        rows.push(SweepRow { result, speedup });
    }
    Ok(rows)
}

/// A measured run next to the bounds the model predicts for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub machine: String,
    pub scope: Scope,
    pub mix: MixKind,
    pub bounds: RooflineResult,
    pub measured: BenchResult,
    pub efficiency_pct: f64,
    pub warnings: Vec<String>,
}

/// Compares an existing measurement with the model of `machine`.
pub fn compare(
    measured: BenchResult,
    machine: &MachineSpec,
    mix: MixKind,
    scope: Scope,
) -> Result<ModelComparison> {
    let kspec = KernelSpec::su3(measured.precision);
    let bounds = attainable(machine, &kspec, Some(&mix.mix()), scope)?;
    let efficiency_pct = if bounds.bound > 0.0 { measured.gflops / bounds.bound * 100.0 } else { 0.0 };
    let mut warnings = Vec::new();
    if efficiency_pct > 100.0 {
        warnings.push(format!(
            "measured {:.3} GF/s exceeds the {} bound of {:.3} GF/s ({efficiency_pct:.1}%)",
            measured.gflops, bounds.limiter, bounds.bound
        ));
    }
    let bw = scope_bandwidth(machine, scope);
    if measured.gbytes_per_s > bw {
        warnings.push(format!(
            "measured {:.3} GB/s exceeds the specified {bw:.1} GB/s; data may be cache resident",
            measured.gbytes_per_s
        ));
    }
    Ok(ModelComparison {
        machine: machine.name.clone(),
        scope,
        mix,
        bounds,
        measured,
        efficiency_pct,
        warnings,
    })
}

/// Runs the benchmark and compares it against `machine`.
pub fn model_report(cfg: &RunConfig, machine: &MachineSpec) -> Result<ModelComparison> {
    machine.validate()?;
    let measured = run_benchmark(cfg)?;
    compare(measured, machine, cfg.effective_mix(), cfg.scope)
}

/// Pipeline simulation of one core of `machine` running the chosen mix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub machine: String,
    pub mix: MixKind,
    pub config: CoreConfig,
    pub repeat: u64,
    pub result: SimResult,
    /// Simulated GF/s of one core at the pipeline clock.
    pub gflops_per_core: f64,
    /// Analytical issue bound of one core.
    pub issue_bound: f64,
}

pub fn simulate_core(
    machine: &MachineSpec,
    mix: MixKind,
    threads_per_pipeline: Option<u32>,
    repeat: u64,
) -> Result<SimulationReport> {
    machine.validate()?;
    let mut config = CoreConfig::from_machine(machine);
    if let Some(t) = threads_per_pipeline {
        config.threads_per_pipeline = t;
    }
    let trace = match mix {
        MixKind::Dot => issue_sim::trace_dot_product(&config.latencies),
        MixKind::Blocked => issue_sim::trace_blocked_gemm(&config.latencies),
    };
    let result = issue_sim::simulate(&config, &trace, repeat)?;
    Ok(SimulationReport {
        machine: machine.name.clone(),
        mix,
        config,
        repeat,
        gflops_per_core: result.gflops(machine.pipeline_clock_ghz),
        issue_bound: scope_issue_bound(machine, &trace.mix(), Scope::Core)?,
        result,
    })
}
