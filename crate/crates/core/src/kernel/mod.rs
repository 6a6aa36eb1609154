//! The SU(3) site kernel: `C[i].link[j] = A[i].link[j] * B[j]` over every
//! site, in several parallel decompositions.

mod verify;

use std::fmt;
use std::ptr::addr_of_mut;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::complex::Complex;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, LinkSet, Site, Su3Matrix};
use crate::layout::buffer::SharedMut;
use crate::layout::{balanced_range, Partition, Span};
use crate::scalar::Scalar;

pub use verify::{max_relative_difference, verify, VerificationReport};

/// Scalar operations in one 3x3 complex matrix product: 27 complex
/// multiply-accumulates of 4 multiplies and 4 adds each.
pub const FLOPS_PER_MATRIX: u64 = 216;
/// Four links per site.
pub const FLOPS_PER_SITE: u64 = 4 * FLOPS_PER_MATRIX;
/// Output elements per site (4 links x 3 rows x 3 columns); one work item each.
pub const ITEMS_PER_SITE: usize = 36;

/// How the site loop and the per-link element loops are split across workers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantId {
    /// Balanced contiguous site chunks; per site, the j/k/l loops run as
    /// one collapsed loop of 36 elements.
    CollapsedInner,
    /// Sites split into `ceil(n / workers)` blocks computed by hand.
    ManualDistribution,
    /// `sites * 36` flat work items dealt round-robin (grid-stride); each
    /// item decodes its (i, j, k, l) and produces one element.
    WorkItems,
    /// The full four-deep loop nest collapsed and split into balanced
    /// contiguous item blocks.
    CollapseAll,
    /// A plain parallel loop over sites with balanced contiguous chunks.
    SiteParallel,
    /// Site-parallel with the 3x3x3 product replaced by a 2x3 block and a
    /// 1x3 block of fused multiply-adds.
    BlockedGemm,
}

impl VariantId {
    pub const ALL: [VariantId; 6] = [
        VariantId::CollapsedInner,
        VariantId::ManualDistribution,
        VariantId::WorkItems,
        VariantId::CollapseAll,
        VariantId::SiteParallel,
        VariantId::BlockedGemm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantId::CollapsedInner => "collapsed-inner",
            VariantId::ManualDistribution => "manual-distribution",
            VariantId::WorkItems => "work-items",
            VariantId::CollapseAll => "collapse-all",
            VariantId::SiteParallel => "site-parallel",
            VariantId::BlockedGemm => "blocked-gemm",
        }
    }

    pub fn partition_shape(self) -> PartitionShape {
        match self {
            VariantId::ManualDistribution => PartitionShape::CeilBlockSites,
            VariantId::WorkItems => PartitionShape::StridedItems,
            VariantId::CollapseAll => PartitionShape::BalancedItems,
            VariantId::CollapsedInner | VariantId::SiteParallel | VariantId::BlockedGemm => {
                PartitionShape::BalancedSites
            }
        }
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let id = match s.to_ascii_lowercase().as_str() {
            "collapsed-inner" | "v0" | "version0" => VariantId::CollapsedInner,
            "manual-distribution" | "v1" | "version1" => VariantId::ManualDistribution,
            "work-items" | "v2" | "version2" => VariantId::WorkItems,
            "collapse-all" | "v3" | "version3" => VariantId::CollapseAll,
            "site-parallel" | "vx" | "versionx" => VariantId::SiteParallel,
            "blocked-gemm" | "gemm" => VariantId::BlockedGemm,
            other => return Err(Error::config(format!("unknown kernel variant `{other}`"))),
        };
        Ok(id)
    }
}

/// Shape of the work assignment, recorded in run reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionShape {
    BalancedSites,
    CeilBlockSites,
    StridedItems,
    BalancedItems,
}

/// A kernel variant plus the B-transpose option.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub id: VariantId,
    pub transpose_b: bool,
}

impl Variant {
    pub fn new(id: VariantId, transpose_b: bool) -> Self {
        Variant { id, transpose_b }
    }

    /// Every variant with and without the transposed B copy.
    pub fn all() -> impl Iterator<Item = Variant> {
        VariantId::ALL.into_iter().flat_map(|id| [Variant::new(id, false), Variant::new(id, true)])
    }

    /// The site each worker writes first, as a partition suitable for
    /// first-touch initialization. Item-level variants assign a site to the
    /// worker that owns its first item.
    pub fn site_partition(&self, sites: usize, workers: usize) -> Partition {
        let workers = workers.max(1);
        let spans = match self.id {
            VariantId::CollapsedInner | VariantId::SiteParallel | VariantId::BlockedGemm => {
                return Partition::balanced(sites, workers);
            }
            VariantId::ManualDistribution => (0..workers)
                .map(|w| Span { worker: w, sites: ceil_block(sites, workers, w) })
                .collect(),
            VariantId::WorkItems => (0..sites)
                .map(|i| Span { worker: (i * ITEMS_PER_SITE) % workers, sites: i..i + 1 })
                .collect(),
            VariantId::CollapseAll => (0..workers)
                .map(|w| {
                    let items = balanced_range(sites * ITEMS_PER_SITE, workers, w);
                    let first = items.start.div_ceil(ITEMS_PER_SITE);
                    let last = items.end.div_ceil(ITEMS_PER_SITE);
                    Span { worker: w, sites: first..last }
                })
                .collect(),
        };
        Partition::new(workers, spans)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.transpose_b {
            write!(f, "{}+bt", self.id)
        } else {
            write!(f, "{}", self.id)
        }
    }
}

fn ceil_block(total: usize, workers: usize, w: usize) -> std::ops::Range<usize> {
    let chunk = total.div_ceil(workers);
    let start = (w * chunk).min(total);
    start..(start + chunk).min(total)
}

/// `c = a * b`, accumulating `m = 0, 1, 2` in order for each element.
#[inline]
pub fn multiply_su3<T: Scalar>(a: &Su3Matrix<T>, b: &Su3Matrix<T>) -> Su3Matrix<T> {
    let mut c = Su3Matrix::splat(Complex::ZERO);
    for k in 0..3 {
        for l in 0..3 {
            c.e[k][l] = element(a, b, k, l);
        }
    }
    c
}

/// `c = a * b` where `bt` holds `b` transposed, so the inner loop walks
/// both operands with unit stride.
#[inline]
pub fn multiply_su3_bt<T: Scalar>(a: &Su3Matrix<T>, bt: &Su3Matrix<T>) -> Su3Matrix<T> {
    let mut c = Su3Matrix::splat(Complex::ZERO);
    for k in 0..3 {
        for l in 0..3 {
            c.e[k][l] = element_bt(a, bt, k, l);
        }
    }
    c
}

#[inline(always)]
fn element<T: Scalar>(a: &Su3Matrix<T>, b: &Su3Matrix<T>, k: usize, l: usize) -> Complex<T> {
    let mut acc = Complex::ZERO;
    for m in 0..3 {
        acc += a.e[k][m] * b.e[m][l];
    }
    acc
}

#[inline(always)]
fn element_bt<T: Scalar>(a: &Su3Matrix<T>, bt: &Su3Matrix<T>, k: usize, l: usize) -> Complex<T> {
    let mut acc = Complex::ZERO;
    for m in 0..3 {
        acc += a.e[k][m] * bt.e[l][m];
    }
    acc
}

/// Register-blocked product: rows 0-1 of `a` against all of `b`, then row 2.
/// `bt` selects whether `b` is given transposed.
#[inline]
pub fn multiply_su3_blocked<T: Scalar>(a: &Su3Matrix<T>, b: &Su3Matrix<T>, bt: bool) -> Su3Matrix<T> {
    // B block, indexed [m][l] regardless of storage order.
    let mut bb = [[Complex::ZERO; 3]; 3];
    for m in 0..3 {
        for l in 0..3 {
            bb[m][l] = if bt { b.e[l][m] } else { b.e[m][l] };
        }
    }
    let mut c = Su3Matrix::splat(Complex::ZERO);

    // 2x3 block of A.
    let (a0, a1) = (a.e[0], a.e[1]);
    for l in 0..3 {
        let mut c0 = Complex::ZERO;
        let mut c1 = Complex::ZERO;
        c0 = c0.fma(a0[0], bb[0][l]);
        c1 = c1.fma(a1[0], bb[0][l]);
        c0 = c0.fma(a0[1], bb[1][l]);
        c1 = c1.fma(a1[1], bb[1][l]);
        c0 = c0.fma(a0[2], bb[2][l]);
        c1 = c1.fma(a1[2], bb[2][l]);
        c.e[0][l] = c0;
        c.e[1][l] = c1;
    }

    // 1x3 block.
    let a2 = a.e[2];
    for l in 0..3 {
        let mut c2 = Complex::ZERO;
        c2 = c2.fma(a2[0], bb[0][l]);
        c2 = c2.fma(a2[1], bb[1][l]);
        c2 = c2.fma(a2[2], bb[2][l]);
        c.e[2][l] = c2;
    }
    c
}

/// `out.b[j] = b.b[j]` transposed.
pub fn transpose_links<T: Scalar>(b: &LinkSet<T>) -> LinkSet<T> {
    LinkSet { b: b.b.map(|m| m.transpose()) }
}

/// Decodes a flat work-item id into `(site, link, row, col)`, where
/// `id = ((i * 4 + j) * 3 + k) * 3 + l`.
pub fn work_item_index(item_id: usize, dim: usize) -> Result<(usize, usize, usize, usize)> {
    let total = dim
        .checked_pow(4)
        .and_then(|s| s.checked_mul(ITEMS_PER_SITE))
        .ok_or_else(|| Error::param("lattice dimension overflows"))?;
    if item_id >= total {
        return Err(Error::param(format!("work item {item_id} out of range 0..{total}")));
    }
    Ok(decode_item(item_id))
}

#[inline(always)]
fn decode_item(q: usize) -> (usize, usize, usize, usize) {
    let l = q % 3;
    let k = (q / 3) % 3;
    let j = (q / 9) % 4;
    let i = q / ITEMS_PER_SITE;
    (i, j, k, l)
}

/// Result of one kernel pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelRun {
    pub flops: u64,
    pub sites: usize,
    pub workers: usize,
    pub partition: PartitionShape,
}

/// A kernel pass bound to its operands, runnable one worker share at a time.
///
/// The harness drives `run_worker` from a persistent pool; [`run_kernel`]
/// is the one-shot form.
pub struct KernelPlan<'a, T: Scalar> {
    a: &'a [Site<T>],
    b: &'a LinkSet<T>,
    out: SharedMut<Site<T>>,
    variant: Variant,
    workers: usize,
    _out: std::marker::PhantomData<&'a mut Lattice<T>>,
}

impl<'a, T: Scalar> KernelPlan<'a, T> {
    pub fn new(
        a: &'a Lattice<T>,
        b: &'a LinkSet<T>,
        c: &'a mut Lattice<T>,
        variant: Variant,
        workers: usize,
    ) -> Result<Self> {
        if workers == 0 {
            return Err(Error::param("at least one worker is required"));
        }
        if a.total_sites() != c.total_sites() {
            return Err(Error::config(format!(
                "output lattice has {} sites, input has {}",
                c.total_sites(),
                a.total_sites()
            )));
        }
        let n = c.total_sites();
        Ok(KernelPlan {
            a: a.sites(),
            b,
            out: SharedMut::new(c.as_mut_ptr(), n),
            variant,
            workers,
            _out: std::marker::PhantomData,
        })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn report(&self) -> KernelRun {
        KernelRun {
            flops: self.a.len() as u64 * FLOPS_PER_SITE,
            sites: self.a.len(),
            workers: self.workers,
            partition: self.variant.id.partition_shape(),
        }
    }

    /// Computes worker `w`'s share. Distinct workers write disjoint outputs,
    /// so all shares may run concurrently.
    pub fn run_worker(&self, w: usize) {
        assert!(w < self.workers, "worker {w} of {}", self.workers);
        let n = self.a.len();
        let wn = self.workers;
        let local;
        let b = if self.variant.transpose_b {
            local = transpose_links(self.b);
            &local
        } else {
            self.b
        };
        let bt = self.variant.transpose_b;
        match self.variant.id {
            VariantId::SiteParallel => {
                for i in balanced_range(n, wn, w) {
                    self.site(i, b, bt);
                }
            }
            VariantId::BlockedGemm => {
                for i in balanced_range(n, wn, w) {
                    let a = &self.a[i];
                    let links = [0, 1, 2, 3].map(|j| multiply_su3_blocked(&a.link[j], &b.b[j], bt));
                    self.store_site(i, links);
                }
            }
            VariantId::ManualDistribution => {
                for i in ceil_block(n, wn, w) {
                    self.site(i, b, bt);
                }
            }
            VariantId::CollapsedInner => {
                for i in balanced_range(n, wn, w) {
                    let a = &self.a[i];
                    let mut links = [Su3Matrix::splat(Complex::ZERO); 4];
                    for jkl in 0..ITEMS_PER_SITE {
                        let (_, j, k, l) = decode_item(jkl);
                        links[j].e[k][l] = self.elem(&a.link[j], &b.b[j], k, l, bt);
                    }
                    self.store_site(i, links);
                }
            }
            VariantId::WorkItems => {
                for q in (w..n * ITEMS_PER_SITE).step_by(wn) {
                    self.item(q, b, bt);
                }
            }
            VariantId::CollapseAll => {
                for q in balanced_range(n * ITEMS_PER_SITE, wn, w) {
                    self.item(q, b, bt);
                }
            }
        }
    }

    #[inline(always)]
    fn elem(&self, a: &Su3Matrix<T>, b: &Su3Matrix<T>, k: usize, l: usize, bt: bool) -> Complex<T> {
        if bt {
            element_bt(a, b, k, l)
        } else {
            element(a, b, k, l)
        }
    }

    #[inline(always)]
    fn site(&self, i: usize, b: &LinkSet<T>, bt: bool) {
        let a = &self.a[i];
        let links = if bt {
            [0, 1, 2, 3].map(|j| multiply_su3_bt(&a.link[j], &b.b[j]))
        } else {
            [0, 1, 2, 3].map(|j| multiply_su3(&a.link[j], &b.b[j]))
        };
        self.store_site(i, links);
    }

    #[inline(always)]
    fn store_site(&self, i: usize, link: [Su3Matrix<T>; 4]) {
        let src = &self.a[i];
        // SAFETY: every decomposition assigns site i to exactly one worker.
        unsafe { self.out.at(i).write(Site { link, ..*src }) };
    }

    #[inline(always)]
    fn item(&self, q: usize, b: &LinkSet<T>, bt: bool) {
        let (i, j, k, l) = decode_item(q);
        let a = &self.a[i];
        let v = self.elem(&a.link[j], &b.b[j], k, l, bt);
        // SAFETY: item q is owned by exactly one worker and maps to a unique
        // element; the metadata is written only by the owner of item 0 of
        // the site. No references to the shared site are formed.
        unsafe {
            let p = self.out.at(i);
            addr_of_mut!((*p).link[j].e[k][l]).write(v);
            if j == 0 && k == 0 && l == 0 {
                addr_of_mut!((*p).x).write(a.x);
                addr_of_mut!((*p).y).write(a.y);
                addr_of_mut!((*p).z).write(a.z);
                addr_of_mut!((*p).t).write(a.t);
                addr_of_mut!((*p).index).write(a.index);
                addr_of_mut!((*p).parity).write(a.parity);
                addr_of_mut!((*p).pad).write(a.pad);
            }
        }
    }
}

/// One kernel pass: for every site `i` and link `j`,
/// `c[i].link[j] = a[i].link[j] * b[j]`. Surplus workers stay idle.
pub fn run_kernel<T: Scalar>(
    a: &Lattice<T>,
    b: &LinkSet<T>,
    c: &mut Lattice<T>,
    variant: Variant,
    workers: usize,
) -> Result<KernelRun> {
    let plan = KernelPlan::new(a, b, c, variant, workers)?;
    if workers == 1 {
        plan.run_worker(0);
    } else {
        std::thread::scope(|s| {
            for w in 0..workers {
                let plan = &plan;
                s.spawn(move || plan.run_worker(w));
            }
        });
    }
    Ok(plan.report())
}
