//! Analytical performance bounds: compute peak, bandwidth roof and the
//! instruction-issue limit of single-issue pipelines.

mod machine;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::FLOPS_PER_SITE;
use crate::lattice::LayoutSizes;
use crate::scalar::Precision;
pub use machine::{MachineSpec, PRESETS};

/// Flops and memory traffic of one site update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub flops_per_site: u64,
    /// Read A plus write C; B stays in cache and is not counted.
    pub bytes_per_site: u64,
    pub precision: Precision,
}

impl KernelSpec {
    pub fn su3(precision: Precision) -> Self {
        KernelSpec {
            flops_per_site: FLOPS_PER_SITE,
            bytes_per_site: 2 * LayoutSizes::expected(precision).site as u64,
            precision,
        }
    }
}

/// Flops per byte.
pub fn arithmetic_intensity(k: &KernelSpec) -> Result<f64> {
    if k.bytes_per_site == 0 {
        return Err(Error::param("kernel moves zero bytes per site"));
    }
    Ok(k.flops_per_site as f64 / k.bytes_per_site as f64)
}

/// Instruction counts of a code sequence and the flops it delivers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionMix {
    pub loads: u64,
    pub stores: u64,
    pub fmas: u64,
    pub flops: u64,
}

impl InstructionMix {
    /// One output element as a dot product: 12 loads, 12 FMAs, 2 stores.
    pub const DOT_PRODUCT: InstructionMix = InstructionMix { loads: 12, stores: 2, fmas: 12, flops: 24 };

    /// One link as a 2x3 block (12 A loads, 18 B loads, 72 FMAs, 12 stores)
    /// followed by a 1x3 block (6 + 18 loads, 36 FMAs, 6 stores).
    pub const BLOCKED_GEMM: InstructionMix = InstructionMix {
        loads: 12 + 18 + 6 + 18,
        stores: 12 + 6,
        fmas: 72 + 36,
        flops: 2 * (72 + 36),
    };

    pub fn total_instructions(&self) -> u64 {
        self.loads + self.stores + self.fmas
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_instructions() == 0 {
            return Err(Error::param("instruction mix is empty"));
        }
        if self.flops > 2 * self.fmas {
            return Err(Error::param(format!(
                "{} flops cannot come from {} FMAs",
                self.flops, self.fmas
            )));
        }
        Ok(())
    }

    pub fn flops_per_instruction(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.flops as f64 / self.total_instructions() as f64)
    }
}

/// Named instruction mixes selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixKind {
    Dot,
    Blocked,
}

impl MixKind {
    pub fn mix(self) -> InstructionMix {
        match self {
            MixKind::Dot => InstructionMix::DOT_PRODUCT,
            MixKind::Blocked => InstructionMix::BLOCKED_GEMM,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MixKind::Dot => "dot",
            MixKind::Blocked => "blocked",
        }
    }
}

impl FromStr for MixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(MixKind::Dot),
            "blocked" => Ok(MixKind::Blocked),
            other => Err(Error::config(format!("unknown instruction mix `{other}`"))),
        }
    }
}

/// Aggregation level of a bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Core,
    Socket,
    System,
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "core" => Ok(Scope::Core),
            "socket" => Ok(Scope::Socket),
            "system" => Ok(Scope::System),
            other => Err(Error::config(format!("unknown scope `{other}`"))),
        }
    }
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Core => "core",
            Scope::Socket => "socket",
            Scope::System => "system",
        }
    }

    /// Cores covered by the scope.
    pub fn cores(self, m: &MachineSpec) -> f64 {
        match self {
            Scope::Core => 1.0,
            Scope::Socket => m.cores_per_socket as f64,
            Scope::System => (m.cores_per_socket * m.sockets) as f64,
        }
    }
}

/// Peak GF/s: clock x units x lanes x (2 with FMA, else 1), times the cores in scope.
pub fn compute_peak(m: &MachineSpec, scope: Scope) -> f64 {
    let per_lane = if m.fma { 2.0 } else { 1.0 };
    m.clock_ghz * m.simd_units as f64 * m.simd_lanes as f64 * per_lane * scope.cores(m)
}

/// Memory bandwidth available to the scope, GB/s.
pub fn scope_bandwidth(m: &MachineSpec, scope: Scope) -> f64 {
    match scope {
        Scope::Core => m.bandwidth_per_core_gbs.unwrap_or(m.bandwidth_per_socket_gbs),
        Scope::Socket => m.bandwidth_per_socket_gbs,
        Scope::System => m.bandwidth_per_socket_gbs * m.sockets as f64,
    }
}

/// GF/s sustainable when every byte must come from memory: AI x bandwidth.
pub fn bandwidth_bound(k: &KernelSpec, bandwidth_gbs: f64) -> Result<f64> {
    if bandwidth_gbs.is_nan() || bandwidth_gbs < 0.0 {
        return Err(Error::param(format!("bandwidth must be non-negative, got {bandwidth_gbs}")));
    }
    Ok(arithmetic_intensity(k)? * bandwidth_gbs)
}

/// GF/s when each pipeline issues one instruction per cycle.
pub fn issue_bound(mix: &InstructionMix, pipeline_clock_ghz: f64, pipelines: u32) -> Result<f64> {
    Ok(mix.flops_per_instruction()? * pipeline_clock_ghz * pipelines as f64)
}

/// Issue bound for the pipelines in a scope.
pub fn scope_issue_bound(m: &MachineSpec, mix: &InstructionMix, scope: Scope) -> Result<f64> {
    Ok(issue_bound(mix, m.pipeline_clock_ghz, m.pipelines_per_core)? * scope.cores(m))
}

/// Which bound is the minimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Limiter {
    Compute,
    Bandwidth,
    Issue,
}

impl fmt::Display for Limiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Limiter::Compute => "compute",
            Limiter::Bandwidth => "bandwidth",
            Limiter::Issue => "issue",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RooflineResult {
    pub compute: f64,
    pub bandwidth: f64,
    pub issue: Option<f64>,
    pub bound: f64,
    pub limiter: Limiter,
}

/// The attainable GF/s: the minimum of the compute, bandwidth and (when a
/// mix is given) issue bounds.
pub fn attainable(
    m: &MachineSpec,
    k: &KernelSpec,
    mix: Option<&InstructionMix>,
    scope: Scope,
) -> Result<RooflineResult> {
    m.validate()?;
    let compute = compute_peak(m, scope);
    let bandwidth = bandwidth_bound(k, scope_bandwidth(m, scope))?;
    let issue = mix.map(|mix| scope_issue_bound(m, mix, scope)).transpose()?;

    let (mut bound, mut limiter) = (compute, Limiter::Compute);
    if bandwidth < bound {
        (bound, limiter) = (bandwidth, Limiter::Bandwidth);
    }
    if let Some(issue) = issue {
        if issue < bound {
            (bound, limiter) = (issue, Limiter::Issue);
        }
    }
    Ok(RooflineResult { compute, bandwidth, issue, bound, limiter })
}

/// One configuration row of the SIMD-width table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub label: String,
    pub simd_units: u32,
    pub fma: bool,
    pub socket: Vec<f64>,
    pub core: Vec<f64>,
}

/// Attainable GF/s per socket and per core as the number of usable SIMD
/// lanes shrinks, for three unit/FMA configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub lanes: Vec<u32>,
    pub rows: Vec<Table1Row>,
}

pub fn table1(m: &MachineSpec, k: &KernelSpec) -> Result<Table1> {
    let lanes: Vec<u32> = (1..=m.simd_lanes).rev().collect();
    let configs = [
        (format!("with {}x SIMD units", m.simd_units), m.simd_units, m.fma),
        (format!("with 1x SIMD units or {}x units w/no FMA", m.simd_units), 1, true),
        ("with 1x SIMD units & no FMA".to_string(), 1, false),
    ];
    let mut rows = Vec::with_capacity(configs.len());
    for (label, units, fma) in configs {
        let mut socket = Vec::with_capacity(lanes.len());
        let mut core = Vec::with_capacity(lanes.len());
        for &l in &lanes {
            let spec = MachineSpec { simd_units: units, simd_lanes: l, fma, ..m.clone() };
            socket.push(attainable(&spec, k, None, Scope::Socket)?.bound);
            core.push(attainable(&spec, k, None, Scope::Core)?.bound);
        }
        rows.push(Table1Row { label, simd_units: units, fma, socket, core });
    }
    Ok(Table1 { lanes, rows })
}

impl fmt::Display for Table1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            writeln!(f, "{}", row.label)?;
            write!(f, "{:>14}", "")?;
            for l in &self.lanes {
                write!(f, "{:>9}", format!("SIMD={l}"))?;
            }
            writeln!(f)?;
            for (name, cells) in [("Single socket", &row.socket), ("Single core", &row.core)] {
                write!(f, "{name:>14}")?;
                for v in cells {
                    write!(f, "{:>9}", format_gflops(*v))?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// One decimal, ties rounded away from zero (141.75 -> 141.8).
pub fn format_gflops(v: f64) -> String {
    let r = (v * 10.0).round() / 10.0;
    format!("{r:.1}")
}
