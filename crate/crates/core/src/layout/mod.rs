//! Allocation and first-touch initialization.
//!
//! Allocation reserves memory without writing it. Pages are placed by the
//! first worker that stores to them, so initialization walks the same
//! partition the kernel will later compute over.

pub(crate) mod buffer;
pub mod probe;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::complex::Complex;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, LinkSet, Site};
use crate::scalar::Scalar;
use buffer::{SharedMut, SiteBuffer};
pub use probe::{DomainBytes, PlacementReport};

/// Who first touches the lattice memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementPolicy {
    /// Each worker initializes exactly the sites it will compute.
    #[serde(rename = "compute")]
    TouchByComputePartition,
    /// One worker initializes everything up front.
    #[serde(rename = "sequential")]
    TouchSequential,
    /// Pages striped round-robin across memory nodes where the OS allows it.
    Interleaved,
}

impl PlacementPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            PlacementPolicy::TouchByComputePartition => "compute",
            PlacementPolicy::TouchSequential => "sequential",
            PlacementPolicy::Interleaved => "interleaved",
        }
    }
}

impl fmt::Display for PlacementPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlacementPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compute" => Ok(PlacementPolicy::TouchByComputePartition),
            "sequential" => Ok(PlacementPolicy::TouchSequential),
            "interleaved" => Ok(PlacementPolicy::Interleaved),
            other => Err(Error::config(format!("unknown placement policy `{other}`"))),
        }
    }
}

/// A run of consecutive sites owned by one worker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Span {
    pub worker: usize,
    pub sites: Range<usize>,
}

/// Assignment of sites to workers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    workers: usize,
    spans: Vec<Span>,
}

impl Partition {
    /// Builds a partition from spans; adjacent spans of the same worker are merged.
    pub fn new(workers: usize, mut spans: Vec<Span>) -> Self {
        spans.retain(|s| !s.sites.is_empty());
        spans.sort_by_key(|s| s.sites.start);
        let mut merged: Vec<Span> = Vec::with_capacity(spans.len());
        for s in spans {
            match merged.last_mut() {
                Some(last) if last.worker == s.worker && last.sites.end == s.sites.start => {
                    last.sites.end = s.sites.end;
                }
                _ => merged.push(s),
            }
        }
        Partition { workers, spans: merged }
    }

    /// Balanced contiguous blocks: the first `total % workers` workers get
    /// one extra site.
    pub fn balanced(total: usize, workers: usize) -> Self {
        let workers = workers.max(1);
        let spans = (0..workers)
            .map(|w| Span { worker: w, sites: balanced_range(total, workers, w) })
            .collect();
        Partition::new(workers, spans)
    }

    /// Everything owned by worker 0.
    pub fn sequential(total: usize) -> Self {
        Partition::new(1, vec![Span { worker: 0, sites: 0..total }])
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn owner_of(&self, site: usize) -> Option<usize> {
        let idx = self.spans.partition_point(|s| s.sites.end <= site);
        self.spans.get(idx).filter(|s| s.sites.contains(&site)).map(|s| s.worker)
    }

    /// Checks the spans cover `[0, total)` exactly once with valid worker ids.
    pub fn validate(&self, total: usize) -> Result<()> {
        let mut next = 0;
        for s in &self.spans {
            if s.worker >= self.workers {
                return Err(Error::config(format!(
                    "span {:?} names worker {} of {}",
                    s.sites, s.worker, self.workers
                )));
            }
            if s.sites.start < next {
                return Err(Error::config(format!("partition overlaps at site {}", s.sites.start)));
            }
            if s.sites.start > next {
                return Err(Error::config(format!("partition misses sites {}..{}", next, s.sites.start)));
            }
            next = s.sites.end;
        }
        if next != total {
            return Err(Error::config(format!("partition covers {next} of {total} sites")));
        }
        Ok(())
    }
}

/// Range of worker `w` when `total` items are split into `workers` balanced blocks.
pub fn balanced_range(total: usize, workers: usize, w: usize) -> Range<usize> {
    let base = total / workers;
    let extra = total % workers;
    let start = w * base + w.min(extra);
    let len = base + usize::from(w < extra);
    start..start + len
}

/// Reserves an `dim`^4 lattice without writing any of it.
pub fn allocate_lattice<T: Scalar>(dim: usize, policy: PlacementPolicy) -> Result<Lattice<T>> {
    if dim == 0 {
        return Err(Error::param("lattice dimension must be at least 1"));
    }
    let sites = dim
        .checked_pow(4)
        .ok_or_else(|| Error::param(format!("lattice dimension {dim} overflows")))?;
    // SAFETY: Scalar guarantees all-zero Site bits are valid.
    let mut buf = unsafe { SiteBuffer::<Site<T>>::reserve(sites)? };
    if policy == PlacementPolicy::Interleaved {
        let bytes = buf.byte_len();
        probe::interleave(buf.as_mut_ptr().cast(), bytes);
    }
    Ok(Lattice { dim, buf, placement: policy })
}

/// Fills every link element with `value` and sets coordinates, with each
/// worker of `partition` writing its own spans.
pub fn init_lattice<T: Scalar>(
    lattice: &mut Lattice<T>,
    value: Complex<T>,
    partition: &Partition,
) -> Result<()> {
    init_lattice_observed(lattice, value, partition, &|_, _| {})
}

/// As [`init_lattice`], calling `observer(worker, span)` from the writing
/// worker right before it stores the span.
pub fn init_lattice_observed<T: Scalar>(
    lattice: &mut Lattice<T>,
    value: Complex<T>,
    partition: &Partition,
    observer: &(dyn Fn(usize, Range<usize>) + Sync),
) -> Result<()> {
    let dim = lattice.dim;
    fill_partitioned(lattice, partition, observer, |i| Site::at(i, dim, value))
}

/// Fills A with uniform values in [-1, 1] drawn from a seeded generator.
/// Each site's values depend only on `seed` and its index, so the result is
/// independent of the partition.
pub fn init_lattice_random<T: Scalar>(
    lattice: &mut Lattice<T>,
    seed: u64,
    partition: &Partition,
) -> Result<()> {
    let dim = lattice.dim;
    fill_partitioned(lattice, partition, &|_, _| {}, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(i as u128 * 4 * 9 * 2 * 2);
        let mut site = Site::at(i, dim, Complex::ZERO);
        for m in site.link.iter_mut() {
            fill_random(&mut m.e, &mut rng);
        }
        site
    })
}

fn fill_partitioned<T: Scalar>(
    lattice: &mut Lattice<T>,
    partition: &Partition,
    observer: &(dyn Fn(usize, Range<usize>) + Sync),
    make: impl Fn(usize) -> Site<T> + Sync,
) -> Result<()> {
    let total = lattice.total_sites();
    partition.validate(total)?;
    let out = SharedMut::new(lattice.as_mut_ptr(), total);
    let run = |worker: usize| {
        for span in partition.spans().iter().filter(|s| s.worker == worker) {
            observer(worker, span.sites.clone());
            for i in span.sites.clone() {
                // SAFETY: validated spans are disjoint and in bounds.
                unsafe { out.at(i).write(make(i)) };
            }
        }
    };
    if partition.workers() == 1 {
        run(0);
    } else {
        std::thread::scope(|s| {
            for w in 0..partition.workers() {
                let run = &run;
                s.spawn(move || run(w));
            }
        });
    }
    Ok(())
}

/// Sets all 4x9 elements of the shared operand.
pub fn init_links<T: Scalar>(b: &mut LinkSet<T>, value: Complex<T>) {
    *b = LinkSet::splat(value);
}

/// Seeded uniform [-1, 1] link set, drawn from a stream disjoint from the lattice's.
pub fn random_links<T: Scalar>(seed: u64) -> LinkSet<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut b = LinkSet::splat(Complex::ZERO);
    for m in b.b.iter_mut() {
        fill_random(&mut m.e, &mut rng);
    }
    b
}

fn fill_random<T: Scalar>(e: &mut [[Complex<T>; 3]; 3], rng: &mut ChaCha8Rng) {
    for z in e.iter_mut().flatten() {
        *z = Complex::from_f64(uniform(rng), uniform(rng));
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    unit * 2.0 - 1.0
}

/// Per-memory-domain residency of the lattice. Never fails.
pub fn placement_report<T: Scalar>(lattice: &Lattice<T>) -> PlacementReport {
    probe::report(lattice.buf.as_ptr().cast(), lattice.bytes())
}
