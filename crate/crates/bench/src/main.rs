//! Command-line driver for the SU(3) kernel benchmark, roofline model and
//! pipeline simulator.
//!
//! Exit codes: 0 success (all runs verified), 1 verification failure,
//! 2 configuration error, 3 resource error.

use std::process::ExitCode;

use clap::Parser;
use su3_lab::harness::{
    emit_report, emit_sweep, model_report, run_benchmark, scaling_sweep, simulate_core, ModelComparison,
    OutputFormat, PinPolicy, RunConfig, SimulationReport,
};
use su3_lab::kernel::VariantId;
use su3_lab::lattice::check_layout;
use su3_lab::layout::PlacementPolicy;
use su3_lab::roofline::{format_gflops, table1, KernelSpec, MachineSpec, MixKind, Scope};
use su3_lab::{Error, Precision};

const VERIFY_FAILED: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "su3-bench", version, about = "SU(3) lattice kernel benchmark and performance model")]
struct Cli {
    /// Lattice extent; the lattice has L^4 sites
    #[arg(short = 'L', default_value_t = 16)]
    dim: usize,

    /// Timed iterations
    #[arg(short = 'I', default_value_t = 1)]
    iterations: u32,

    /// Untimed warmup iterations
    #[arg(short = 'W', default_value_t = 1)]
    warmups: u32,

    /// Worker threads
    #[arg(short = 'T', default_value_t = 1)]
    workers: usize,

    /// collapsed-inner (v0), manual-distribution (v1), work-items (v2),
    /// collapse-all (v3), site-parallel (vx), blocked-gemm
    #[arg(long, default_value = "site-parallel")]
    variant: VariantId,

    /// Multiply by a pre-transposed copy of B
    #[arg(long)]
    transpose_b: bool,

    /// f32 or f64
    #[arg(long, default_value = "f32")]
    precision: Precision,

    /// compute, sequential or interleaved
    #[arg(long, default_value = "compute")]
    placement: PlacementPolicy,

    /// compact or none
    #[arg(long, default_value = "none")]
    pin: PinPolicy,

    /// Machine spec: a preset name (clx8280, piuma-core) or a TOML file
    #[arg(long, value_name = "SPEC")]
    machine: Option<String>,

    /// Instruction mix for the issue bound; defaults to the variant's
    #[arg(long)]
    mix: Option<MixKind>,

    /// Roofline scope: core, socket or system
    #[arg(long, default_value = "socket")]
    scope: Scope,

    /// Strong-scaling sweep over these worker counts
    #[arg(long, value_delimiter = ',', value_name = "W1,W2,...")]
    sweep: Option<Vec<usize>>,

    /// csv, json or text
    #[arg(long, default_value = "text")]
    format: OutputFormat,

    /// Also record min/median single-iteration times
    #[arg(long)]
    per_iteration: bool,

    /// Run the pipeline simulator instead of the kernel
    #[arg(long)]
    simulate: bool,

    /// Threads per pipeline for --simulate; defaults to the largest latency
    #[arg(long)]
    sim_threads: Option<u32>,

    /// Trace repetitions per thread for --simulate
    #[arg(long, default_value_t = 1000)]
    sim_repeat: u64,

    /// Print the SIMD-width roofline table and exit
    #[arg(long)]
    table1: bool,
}

impl Cli {
    fn run_config(&self) -> RunConfig {
        RunConfig {
            dim: self.dim,
            iterations: self.iterations,
            warmups: self.warmups,
            workers: self.workers,
            variant: self.variant,
            transpose_b: self.transpose_b,
            precision: self.precision,
            placement: self.placement,
            pin: self.pin,
            machine: self.machine.clone(),
            mix: self.mix,
            scope: self.scope,
            format: self.format,
            per_iteration: self.per_iteration,
        }
    }

    fn machine_or(&self, default: &str) -> Result<MachineSpec, Error> {
        MachineSpec::load(self.machine.as_deref().unwrap_or(default))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if let Err(msg) = check_layout() {
        eprintln!("error: data layout check failed: {msg}");
        return ExitCode::from(VERIFY_FAILED);
    }
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: output verification failed");
            ExitCode::from(VERIFY_FAILED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Runs the selected mode; `Ok(false)` means a run failed verification.
fn dispatch(cli: &Cli) -> Result<bool, Error> {
    if cli.table1 {
        print_table1(cli)?;
        return Ok(true);
    }
    if cli.simulate {
        let machine = cli.machine_or("piuma-core")?;
        let mix = cli.run_config().effective_mix();
        let report = simulate_core(&machine, mix, cli.sim_threads, cli.sim_repeat)?;
        print!("{}", render_simulation(&report, cli.format)?);
        return Ok(true);
    }
    let cfg = cli.run_config();
    if let Some(counts) = &cli.sweep {
        let rows = scaling_sweep(&cfg, counts)?;
        for row in &rows {
            warn(&row.result.warnings);
        }
        print!("{}", emit_sweep(&rows, cli.format)?);
        return Ok(rows.iter().all(|r| r.result.verified));
    }
    match &cli.machine {
        Some(name) => {
            let machine = MachineSpec::load(name)?;
            let cmp = model_report(&cfg, &machine)?;
            warn(&cmp.measured.warnings);
            warn(&cmp.warnings);
            print!("{}", render_comparison(&cmp, cli.format)?);
            Ok(cmp.measured.verified)
        }
        None => {
            let r = run_benchmark(&cfg)?;
            warn(&r.warnings);
            print!("{}", emit_report(std::slice::from_ref(&r), cli.format)?);
            Ok(r.verified)
        }
    }
}

fn warn(msgs: &[String]) {
    for m in msgs {
        eprintln!("warning: {m}");
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Error::Config(e.to_string()))
}

fn print_table1(cli: &Cli) -> Result<(), Error> {
    let machine = cli.machine_or("clx8280")?;
    let t = table1(&machine, &KernelSpec::su3(cli.precision))?;
    match cli.format {
        OutputFormat::Text => print!("{t}"),
        OutputFormat::Json => print!("{}", to_json(&t)?),
        OutputFormat::Csv => {
            println!("config,scope,simd_lanes,gflops");
            for row in &t.rows {
                for (scope, cells) in [("socket", &row.socket), ("core", &row.core)] {
                    for (lanes, v) in t.lanes.iter().zip(cells) {
                        println!("\"{}\",{scope},{lanes},{}", row.label, format_gflops(*v));
                    }
                }
            }
        }
    }
    Ok(())
}

fn render_simulation(r: &SimulationReport, format: OutputFormat) -> Result<String, Error> {
    let s = &r.result;
    Ok(match format {
        OutputFormat::Json => to_json(r)?,
        OutputFormat::Csv => format!(
            "machine,mix,pipelines,threads_per_pipeline,repeat,cycles,instructions,flops,ipc,flops_per_cycle,gflops_per_core,issue_bound\n\
             {},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.machine,
            r.mix.as_str(),
            r.config.pipelines,
            r.config.threads_per_pipeline,
            r.repeat,
            s.cycles,
            s.instructions_issued,
            s.flops_done,
            s.ipc,
            s.flops_per_cycle,
            r.gflops_per_core,
            r.issue_bound
        ),
        OutputFormat::Text => format!(
            "machine            {}\n\
             mix                {}\n\
             pipelines          {} x {} threads\n\
             cycles             {}\n\
             instructions       {}\n\
             flops              {}\n\
             IPC                {:.4} ({:.4} per pipeline)\n\
             flops/cycle        {:.4} ({:.4} per pipeline)\n\
             simulated GF/s     {:.3} per core\n\
             issue bound GF/s   {:.3} per core\n",
            r.machine,
            r.mix.as_str(),
            r.config.pipelines,
            r.config.threads_per_pipeline,
            s.cycles,
            s.instructions_issued,
            s.flops_done,
            s.ipc,
            s.ipc_per_pipeline,
            s.flops_per_cycle,
            s.flops_per_cycle_per_pipeline,
            r.gflops_per_core,
            r.issue_bound
        ),
    })
}

fn render_comparison(c: &ModelComparison, format: OutputFormat) -> Result<String, Error> {
    Ok(match format {
        OutputFormat::Json => to_json(c)?,
        OutputFormat::Csv => {
            let mut out = emit_report(std::slice::from_ref(&c.measured), OutputFormat::Csv)?;
            let b = &c.bounds;
            let issue = b.issue.map_or(String::new(), |v| v.to_string());
            out.push_str("machine,scope,mix,compute,bandwidth,issue,bound,limiter,efficiency_pct\n");
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                c.machine,
                c.scope.as_str(),
                c.mix.as_str(),
                b.compute,
                b.bandwidth,
                issue,
                b.bound,
                b.limiter,
                c.efficiency_pct
            ));
            out
        }
        OutputFormat::Text => {
            let mut out = emit_report(std::slice::from_ref(&c.measured), OutputFormat::Text)?;
            let b = &c.bounds;
            out.push_str(&format!("\nmodel {} ({} scope, {} mix)\n", c.machine, c.scope.as_str(), c.mix.as_str()));
            out.push_str(&format!("  compute peak    {:>10.3} GF/s\n", b.compute));
            out.push_str(&format!("  bandwidth bound {:>10.3} GF/s\n", b.bandwidth));
            if let Some(i) = b.issue {
                out.push_str(&format!("  issue bound     {i:>10.3} GF/s\n"));
            }
            out.push_str(&format!("  attainable      {:>10.3} GF/s ({}-limited)\n", b.bound, b.limiter));
            out.push_str(&format!("  efficiency      {:>10.1} %\n", c.efficiency_pct));
            out
        }
    })
}
