//! Best-effort OS queries for page residency and memory-node placement.

use serde::{Deserialize, Serialize};

/// Bytes of one array resident on one memory domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainBytes {
    pub node: u32,
    pub bytes: usize,
}

/// Where the pages of an array currently live.
///
/// When `supported`, `domains` sum to `resident_bytes`, and
/// `resident_bytes + untouched_bytes == total_bytes`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementReport {
    pub supported: bool,
    pub total_bytes: usize,
    pub resident_bytes: usize,
    pub untouched_bytes: usize,
    pub domains: Vec<DomainBytes>,
    /// Which OS facility produced the numbers.
    pub source: String,
}

impl PlacementReport {
    pub(crate) fn unsupported(total_bytes: usize) -> Self {
        PlacementReport {
            supported: false,
            total_bytes,
            resident_bytes: 0,
            untouched_bytes: 0,
            domains: Vec::new(),
            source: "unsupported".into(),
        }
    }

    pub fn domain_sum(&self) -> usize {
        self.domains.iter().map(|d| d.bytes).sum()
    }
}

#[cfg(target_os = "linux")]
mod os {
    use super::{DomainBytes, PlacementReport};
    use crate::layout::buffer::page_size;

    const MPOL_INTERLEAVE: libc::c_long = 3;

    /// Memory nodes the kernel reports online, e.g. `0-1,3` -> [0, 1, 3].
    pub fn online_nodes() -> Vec<u32> {
        std::fs::read_to_string("/sys/devices/system/node/online")
            .map(|s| parse_node_list(s.trim()))
            .unwrap_or_default()
    }

    pub(crate) fn parse_node_list(s: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for part in s.split(',').filter(|p| !p.is_empty()) {
            match part.split_once('-') {
                Some((lo, hi)) => {
                    if let (Ok(lo), Ok(hi)) = (lo.parse::<u32>(), hi.parse::<u32>()) {
                        out.extend(lo..=hi);
                    }
                }
                None => {
                    if let Ok(n) = part.parse() {
                        out.push(n);
                    }
                }
            }
        }
        out
    }

    fn residency(base: *const u8, bytes: usize) -> Option<Vec<bool>> {
        let page = page_size();
        let pages = bytes.div_ceil(page);
        let mut vec = vec![0u8; pages];
        let rc = unsafe { libc::mincore(base as *mut libc::c_void, bytes, vec.as_mut_ptr()) };
        (rc == 0).then(|| vec.iter().map(|v| v & 1 == 1).collect())
    }

    fn page_nodes(base: *const u8, pages: usize) -> Option<Vec<i32>> {
        let page = page_size();
        let addrs: Vec<*mut libc::c_void> =
            (0..pages).map(|p| unsafe { base.add(p * page) } as *mut libc::c_void).collect();
        let mut status = vec![0i32; pages];
        let rc = unsafe {
            libc::syscall(
                libc::SYS_move_pages,
                0 as libc::c_long,
                pages as libc::c_ulong,
                addrs.as_ptr(),
                std::ptr::null::<i32>(),
                status.as_mut_ptr(),
                0 as libc::c_long,
            )
        };
        (rc == 0).then_some(status)
    }

    pub fn report(base: *const u8, bytes: usize) -> PlacementReport {
        let page = page_size();
        let Some(resident) = residency(base, bytes) else {
            return PlacementReport::unsupported(bytes);
        };
        let page_bytes = |p: usize| page.min(bytes - p * page);
        let resident_bytes: usize =
            resident.iter().enumerate().filter(|(_, r)| **r).map(|(p, _)| page_bytes(p)).sum();

        let mut per_node = std::collections::BTreeMap::<u32, usize>::new();
        let mut source = "move_pages";
        match page_nodes(base, resident.len()) {
            Some(status) => {
                for (p, &node) in status.iter().enumerate() {
                    if node >= 0 && resident[p] {
                        *per_node.entry(node as u32).or_default() += page_bytes(p);
                    }
                }
            }
            None => {
                let nodes = online_nodes();
                if nodes.len() > 1 {
                    let mut r = PlacementReport::unsupported(bytes);
                    r.resident_bytes = resident_bytes;
                    r.untouched_bytes = bytes - resident_bytes;
                    r.source = "mincore".into();
                    return r;
                }
                source = "mincore";
                if resident_bytes > 0 {
                    per_node.insert(nodes.first().copied().unwrap_or(0), resident_bytes);
                }
            }
        }
        // move_pages may disagree with mincore about pages racing in; trust
        // the node query for the per-domain split.
        let resident_bytes = if source == "move_pages" {
            per_node.values().sum()
        } else {
            resident_bytes
        };
        PlacementReport {
            supported: true,
            total_bytes: bytes,
            resident_bytes,
            untouched_bytes: bytes - resident_bytes,
            domains: per_node.into_iter().map(|(node, bytes)| DomainBytes { node, bytes }).collect(),
            source: source.into(),
        }
    }

    /// Asks the kernel to stripe future page faults across all online nodes.
    /// Returns whether the request was accepted.
    pub fn interleave(base: *mut u8, bytes: usize) -> bool {
        let nodes = online_nodes();
        if nodes.len() < 2 {
            return false;
        }
        let max = *nodes.iter().max().unwrap() as usize + 1;
        let words = max.div_ceil(64);
        let mut mask = vec![0u64; words];
        for n in nodes {
            mask[n as usize / 64] |= 1 << (n % 64);
        }
        let len = bytes.div_ceil(page_size()) * page_size();
        let rc = unsafe {
            libc::syscall(
                libc::SYS_mbind,
                base as libc::c_long,
                len as libc::c_ulong,
                MPOL_INTERLEAVE,
                mask.as_ptr(),
                (words * 64 + 1) as libc::c_ulong,
                0 as libc::c_ulong,
            )
        };
        rc == 0
    }
}

#[cfg(not(target_os = "linux"))]
mod os {
    use super::PlacementReport;

    pub fn online_nodes() -> Vec<u32> {
        Vec::new()
    }

    pub fn report(_base: *const u8, bytes: usize) -> PlacementReport {
        PlacementReport::unsupported(bytes)
    }

    pub fn interleave(_base: *mut u8, _bytes: usize) -> bool {
        false
    }
}

pub use os::online_nodes;
pub(crate) use os::{interleave, report};
