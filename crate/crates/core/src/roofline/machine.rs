use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CLX8280: &str = include_str!("../../presets/clx8280.toml");
const PIUMA_CORE: &str = include_str!("../../presets/piuma-core.toml");

/// Names accepted by [`MachineSpec::preset`].
pub const PRESETS: [&str; 2] = ["clx8280", "piuma-core"];

/// Hardware parameters feeding the roofline and the pipeline simulator.
///
/// Loaded from TOML; unknown keys are rejected. The latency keys are
/// optional and default to 20 (load), 1 (store) and 4 (FMA) cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    #[serde(default)]
    pub name: String,
    pub clock_ghz: f64,
    pub simd_units: u32,
    pub simd_lanes: u32,
    pub fma: bool,
    pub cores_per_socket: u32,
    pub sockets: u32,
    pub bandwidth_per_socket_gbs: f64,
    /// What a single core can draw; the socket figure when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_per_core_gbs: Option<f64>,
    pub pipelines_per_core: u32,
    pub pipeline_clock_ghz: f64,
    #[serde(default = "default_load_latency")]
    pub load_latency_cycles: u32,
    #[serde(default = "default_store_latency")]
    pub store_latency_cycles: u32,
    #[serde(default = "default_fma_latency")]
    pub fma_latency_cycles: u32,
}

fn default_load_latency() -> u32 {
    20
}

fn default_store_latency() -> u32 {
    1
}

fn default_fma_latency() -> u32 {
    4
}

impl MachineSpec {
    pub fn clx8280() -> Self {
        Self::from_toml_str(CLX8280).expect("bundled preset parses")
    }

    pub fn piuma_core() -> Self {
        Self::from_toml_str(PIUMA_CORE).expect("bundled preset parses")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "clx8280" => Some(Self::clx8280()),
            "piuma-core" | "piuma" => Some(Self::piuma_core()),
            _ => None,
        }
    }

    /// TOML source of a bundled preset.
    pub fn preset_source(name: &str) -> Option<&'static str> {
        match name {
            "clx8280" => Some(CLX8280),
            "piuma-core" | "piuma" => Some(PIUMA_CORE),
            _ => None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: MachineSpec =
            toml::from_str(s).map_err(|e| Error::config(format!("machine spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    /// A preset name or a path to a TOML file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(spec) = Self::preset(name_or_path) {
            return Ok(spec);
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("reading machine spec {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("clock_ghz", self.clock_ghz),
            ("bandwidth_per_socket_gbs", self.bandwidth_per_socket_gbs),
            ("pipeline_clock_ghz", self.pipeline_clock_ghz),
            ("bandwidth_per_core_gbs", self.bandwidth_per_core_gbs.unwrap_or(1.0)),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{key} must be positive, got {v}")));
            }
        }
        let counts = [
            ("simd_units", self.simd_units),
            ("simd_lanes", self.simd_lanes),
            ("cores_per_socket", self.cores_per_socket),
            ("sockets", self.sockets),
            ("pipelines_per_core", self.pipelines_per_core),
            ("load_latency_cycles", self.load_latency_cycles),
            ("store_latency_cycles", self.store_latency_cycles),
            ("fma_latency_cycles", self.fma_latency_cycles),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(Error::config(format!("{key} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn max_latency(&self) -> u32 {
        self.load_latency_cycles.max(self.store_latency_cycles).max(self.fma_latency_cycles)
    }
}
