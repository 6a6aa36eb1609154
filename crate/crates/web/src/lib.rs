//! Browser front-end: a roofline explorer, an issue-simulator thread sweep
//! and a small single-worker kernel check. Every export returns JSON text.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use su3_lab::issue_sim::{self, CoreConfig, Latencies};
use su3_lab::kernel::{max_relative_difference, multiply_su3, run_kernel, verify, Variant, VariantId};
use su3_lab::layout::{allocate_lattice, init_lattice, init_lattice_random, random_links, Partition, PlacementPolicy};
use su3_lab::roofline::{
    arithmetic_intensity, attainable, bandwidth_bound, compute_peak, scope_bandwidth, table1, KernelSpec,
    MachineSpec, MixKind, RooflineResult, Scope, Table1,
};
use su3_lab::{Complex, Error, Lattice, LinkSet, Precision, Result, Scalar};

/// Largest lattice extent the page may request.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Serialize)]
pub struct RooflineView {
    pub machine: String,
    pub arithmetic_intensity: f64,
    pub bounds: RooflineResult,
    /// (flops per byte, attainable GF/s) along a log-spaced axis.
    pub curve: Vec<(f64, f64)>,
    pub ridge: f64,
    pub table1: Table1,
}

pub fn roofline_view(spec_toml: &str, precision: &str, mix: &str, scope: &str) -> Result<RooflineView> {
    let m = MachineSpec::from_toml_str(spec_toml)?;
    let precision: Precision = precision.parse()?;
    let mix: MixKind = mix.parse()?;
    let scope: Scope = scope.parse()?;
    let k = KernelSpec::su3(precision);
    let bounds = attainable(&m, &k, Some(&mix.mix()), scope)?;
    let peak = compute_peak(&m, scope).min(bounds.issue.unwrap_or(f64::INFINITY));
    let bw = scope_bandwidth(&m, scope);
    let curve = (0..=64)
        .map(|i| {
            let ai = 2f64.powf(-4.0 + 10.0 * i as f64 / 64.0);
            (ai, (ai * bw).min(peak))
        })
        .collect();
    Ok(RooflineView {
        machine: m.name.clone(),
        arithmetic_intensity: arithmetic_intensity(&k)?,
        ridge: if bw > 0.0 { peak / bw } else { f64::INFINITY },
        bounds,
        curve,
        table1: table1(&m, &k)?,
    })
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub threads: u32,
    pub flops_per_cycle_per_pipeline: f64,
    pub ipc_per_pipeline: f64,
    pub gflops_per_core: f64,
}

#[derive(Debug, Serialize)]
pub struct ThreadSweep {
    pub machine: String,
    pub latencies: Latencies,
    pub flops_per_instruction: f64,
    pub issue_bound: f64,
    pub points: Vec<SweepPoint>,
}

pub fn thread_sweep(spec_toml: &str, mix: &str, max_threads: u32, repeat: u64) -> Result<ThreadSweep> {
    let m = MachineSpec::from_toml_str(spec_toml)?;
    let mix: MixKind = mix.parse()?;
    if max_threads == 0 || max_threads > 256 {
        return Err(Error::Parameter(format!("threads must be in 1..=256, got {max_threads}")));
    }
    let base = CoreConfig::from_machine(&m);
    let trace = match mix {
        MixKind::Dot => issue_sim::trace_dot_product(&base.latencies),
        MixKind::Blocked => issue_sim::trace_blocked_gemm(&base.latencies),
    };
    let tm = trace.mix();
    let mut points = Vec::with_capacity(max_threads as usize);
    for t in 1..=max_threads {
        let r = issue_sim::simulate(&CoreConfig { threads_per_pipeline: t, ..base }, &trace, repeat)?;
        points.push(SweepPoint {
            threads: t,
            flops_per_cycle_per_pipeline: r.flops_per_cycle_per_pipeline,
            ipc_per_pipeline: r.ipc_per_pipeline,
            gflops_per_core: r.gflops(m.pipeline_clock_ghz),
        });
    }
    Ok(ThreadSweep {
        machine: m.name.clone(),
        latencies: base.latencies,
        flops_per_instruction: tm.flops_per_instruction()?,
        issue_bound: su3_lab::roofline::issue_bound(&tm, m.pipeline_clock_ghz, m.pipelines_per_core)?,
        points,
    })
}

#[derive(Debug, Serialize)]
pub struct KernelCheck {
    pub variant: String,
    pub dim: usize,
    pub precision: Precision,
    pub flops: u64,
    pub canonical_ok: bool,
    pub sum_real: f64,
    pub expected_sum: f64,
    pub max_deviation: f64,
    /// Largest relative difference from a site-by-site reference on random data.
    pub random_difference: f64,
}

pub fn kernel_check(dim: usize, variant: &str, transpose_b: bool, precision: &str, seed: u64) -> Result<KernelCheck> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::Parameter(format!("L must be in 1..={MAX_DIM}, got {dim}")));
    }
    let v = Variant::new(variant.parse::<VariantId>()?, transpose_b);
    match precision.parse()? {
        Precision::F32 => check::<f32>(dim, v, seed),
        Precision::F64 => check::<f64>(dim, v, seed),
    }
}

fn check<T: Scalar>(dim: usize, v: Variant, seed: u64) -> Result<KernelCheck> {
    let n = dim.pow(4);
    let mut a = allocate_lattice::<T>(dim, PlacementPolicy::TouchSequential)?;
    init_lattice(&mut a, Complex::ONE, &Partition::sequential(n))?;
    let mut c = allocate_lattice::<T>(dim, PlacementPolicy::TouchSequential)?;
    let run = run_kernel(&a, &LinkSet::splat(Complex::from_f64(1.0 / 3.0, 0.0)), &mut c, v, 1)?;
    let canon = verify(&c);

    init_lattice_random(&mut a, seed, &Partition::sequential(n))?;
    let b = random_links::<T>(seed);
    run_kernel(&a, &b, &mut c, v, 1)?;
    let reference = reference(&a, &b)?;
    Ok(KernelCheck {
        variant: v.to_string(),
        dim,
        precision: T::PRECISION,
        flops: run.flops,
        canonical_ok: canon.ok,
        sum_real: canon.sum_real,
        expected_sum: 36.0 * n as f64,
        max_deviation: canon.max_deviation,
        random_difference: max_relative_difference(&c, &reference),
    })
}

fn reference<T: Scalar>(a: &Lattice<T>, b: &LinkSet<T>) -> Result<Lattice<T>> {
    let mut r = allocate_lattice::<T>(a.dim(), PlacementPolicy::TouchSequential)?;
    for (out, s) in r.sites_mut().iter_mut().zip(a.sites()) {
        *out = *s;
        for j in 0..4 {
            out.link[j] = multiply_su3(&s.link[j], &b.b[j]);
        }
    }
    Ok(r)
}

fn to_js<T: Serialize>(r: Result<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// TOML text of a bundled machine preset.
#[wasm_bindgen(js_name = presetToml)]
pub fn preset_toml(name: &str) -> Result<String, JsError> {
    MachineSpec::preset_source(name)
        .map(str::to_owned)
        .ok_or_else(|| JsError::new(&format!("unknown preset `{name}`")))
}

#[wasm_bindgen]
pub fn roofline(spec_toml: &str, precision: &str, mix: &str, scope: &str) -> Result<String, JsError> {
    to_js(roofline_view(spec_toml, precision, mix, scope))
}

#[wasm_bindgen(js_name = simulateThreads)]
pub fn simulate_threads(spec_toml: &str, mix: &str, max_threads: u32, repeat: u32) -> Result<String, JsError> {
    to_js(thread_sweep(spec_toml, mix, max_threads, u64::from(repeat)))
}

#[wasm_bindgen(js_name = checkKernel)]
pub fn check_kernel(dim: u32, variant: &str, transpose_b: bool, precision: &str, seed: u32) -> Result<String, JsError> {
    to_js(kernel_check(dim as usize, variant, transpose_b, precision, u64::from(seed)))
}

/// Bandwidth bound of the kernel at `gbs` GB/s, for the page's slider.
#[wasm_bindgen(js_name = bandwidthBound)]
pub fn bandwidth_bound_at(precision: &str, gbs: f64) -> f64 {
    precision
        .parse::<Precision>()
        .ok()
        .and_then(|p| bandwidth_bound(&KernelSpec::su3(p), gbs).ok())
        .unwrap_or(f64::NAN)
}
