//! Liouvillian spectra: analytic subset sums of the rapid spectrum for the
//! quadratic class, sector-generator eigenvalues for the closed quartic
//! class, and optimal-assignment comparison of eigenvalue multisets.

use std::collections::BTreeMap;

use pathfinding::prelude::{kuhn_munkres_min, Matrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, r, C64, ZERO};
use crate::quartic_dynamics::{build_sector_generators, QuarticCore};
use crate::structure::RapidSpectrum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParityFilter {
    Even,
    Odd,
    All,
}

impl ParityFilter {
    fn admits(self, p: Parity) -> bool {
        matches!(
            (self, p),
            (ParityFilter::All, _) | (ParityFilter::Even, Parity::Even) | (ParityFilter::Odd, Parity::Odd)
        )
    }
}

impl std::str::FromStr for ParityFilter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Self::Even),
            "odd" => Ok(Self::Odd),
            "all" => Ok(Self::All),
            _ => Err(Error::InvalidArgument(format!("unknown parity '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Source {
    /// Occupation bit vector ν of the lowest-index representative.
    Analytic(u64),
    Sector(usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumEntry {
    pub value: [f64; 2],
    pub parity: Parity,
    pub source: Source,
    pub multiplicity: usize,
    pub conjectured: bool,
}

impl SpectrumEntry {
    pub fn eigenvalue(&self) -> C64 {
        C64::new(self.value[0], self.value[1])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    pub entries: Vec<SpectrumEntry>,
    /// True when the analytic enumeration was cut to the slowest modes.
    pub truncated: bool,
}

impl SpectrumResult {
    /// Eigenvalues with multiplicities expanded.
    pub fn values(&self) -> Vec<C64> {
        self.entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.eigenvalue(), e.multiplicity))
            .collect()
    }

    pub fn total_count(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }
}

const MERGE_TOL: f64 = 1e-9;
pub const MAX_ENUMERATED_MODES: usize = 24;

fn merge_key(z: C64) -> (i64, i64) {
    ((z.re / MERGE_TOL).round() as i64, (z.im / MERGE_TOL).round() as i64)
}

/// Merges values that agree to `MERGE_TOL`, keeping the first occurrence's
/// labels, and orders by (Re desc, Im asc).
fn collect_entries(raw: Vec<(C64, Parity, Source, bool)>) -> Vec<SpectrumEntry> {
    let mut groups: BTreeMap<(i64, i64, bool, usize), SpectrumEntry> = BTreeMap::new();
    for (z, parity, source, conj) in raw {
        let (kr, ki) = merge_key(z);
        let sector_key = match source {
            Source::Analytic(_) => usize::MAX,
            Source::Sector(n) => n,
        };
        let key = (kr, ki, parity == Parity::Even, sector_key);
        groups
            .entry(key)
            .and_modify(|e| e.multiplicity += 1)
            .or_insert(SpectrumEntry {
                value: [z.re, z.im],
                parity,
                source,
                multiplicity: 1,
                conjectured: conj,
            });
    }
    let mut entries: Vec<SpectrumEntry> = groups.into_values().collect();
    entries.sort_by(|a, b| {
        b.value[0]
            .total_cmp(&a.value[0])
            .then(a.value[1].total_cmp(&b.value[1]))
            .then(parity_rank(a.parity).cmp(&parity_rank(b.parity)))
    });
    entries
}

fn parity_rank(p: Parity) -> u8 {
    match p {
        Parity::Even => 0,
        Parity::Odd => 1,
    }
}

/// η_ν = −2Σ_s ν_s α_s over all ν ∈ {0,1}^{2L}; parity (−1)^{|ν|}.
/// With `keep` set, only the `keep` slowest-decaying values survive.
pub fn quadratic_spectrum(rs: &RapidSpectrum, parity: ParityFilter, keep: Option<usize>) -> Result<SpectrumResult> {
    let n = rs.alphas.len();
    if n > MAX_ENUMERATED_MODES && keep.is_none() {
        return Err(Error::SizeGuard(format!(
            "2^{n} subset sums exceed the enumeration budget; pass a truncation count"
        )));
    }
    if n > 63 {
        return Err(Error::SizeGuard("more than 63 modes cannot be enumerated".into()));
    }
    let mut raw: Vec<(C64, Parity, Source, bool)> = Vec::new();
    if n <= MAX_ENUMERATED_MODES {
        for nu in 0u64..(1u64 << n) {
            let p = if nu.count_ones() % 2 == 0 { Parity::Even } else { Parity::Odd };
            if !parity.admits(p) {
                continue;
            }
            let mut eta = ZERO;
            for (s, &a) in rs.alphas.iter().enumerate() {
                if nu >> s & 1 == 1 {
                    eta += a;
                }
            }
            raw.push((eta * r(-2.0), p, Source::Analytic(nu), false));
        }
    } else {
        raw = slowest_subsets(rs, parity, keep.unwrap_or(0));
    }
    let truncated = keep.is_some_and(|k| raw.len() > k) || n > MAX_ENUMERATED_MODES;
    if let Some(k) = keep {
        raw.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(a.0.im.total_cmp(&b.0.im)));
        raw.truncate(k);
    }
    Ok(SpectrumResult {
        entries: collect_entries(raw),
        truncated,
    })
}

/// Best-first enumeration of subsets by total decay rate 2Σ Re α.
fn slowest_subsets(rs: &RapidSpectrum, parity: ParityFilter, keep: usize) -> Vec<(C64, Parity, Source, bool)> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut order: Vec<usize> = (0..rs.alphas.len()).collect();
    order.sort_by(|&a, &b| rs.alphas[a].re.total_cmp(&rs.alphas[b].re));
    let key = |x: f64| Reverse(ordered(x));
    let mut heap: BinaryHeap<(Reverse<i64>, u64, usize)> = BinaryHeap::new();
    heap.push((key(0.0), 0, 0));
    let mut out = Vec::new();
    let mut guard = 0usize;
    while let Some((_, nu, next)) = heap.pop() {
        guard += 1;
        if out.len() >= keep || guard > 64 * keep + 1024 {
            break;
        }
        let p = if nu.count_ones() % 2 == 0 { Parity::Even } else { Parity::Odd };
        let eta: C64 = (0..rs.alphas.len())
            .filter(|s| nu >> s & 1 == 1)
            .map(|s| rs.alphas[s])
            .sum::<C64>()
            * r(-2.0);
        if parity.admits(p) {
            out.push((eta, p, Source::Analytic(nu), false));
        }
        // Children: extend with the next mode, or swap the last mode for the next one.
        if next < order.len() {
            let add = nu | 1 << order[next];
            heap.push((key(-(eta.re) + 2.0 * rs.alphas[order[next]].re), add, next + 1));
            if next > 0 && nu >> order[next - 1] & 1 == 1 {
                let swap = (nu & !(1 << order[next - 1])) | 1 << order[next];
                let rate = -(eta.re) - 2.0 * rs.alphas[order[next - 1]].re + 2.0 * rs.alphas[order[next]].re;
                heap.push((key(rate), swap, next + 1));
            }
        }
    }
    out
}

fn ordered(x: f64) -> i64 {
    (x * 1e12).round() as i64
}

/// Union of eig(F̄_n) over the requested orders; odd orders are flagged
/// as conjectured.
pub fn quartic_spectrum(core: &QuarticCore, orders: &[usize]) -> Result<SpectrumResult> {
    let gens = build_sector_generators(core, orders)?;
    let per_sector: Vec<Result<Vec<(C64, Parity, Source, bool)>>> = gens
        .par_iter()
        .map(|g| {
            let vals = if g.dim() == 0 { Vec::new() } else { eigenvalues(&g.fbar.to_dense())? };
            let odd = g.n % 2 == 1;
            let p = if odd { Parity::Odd } else { Parity::Even };
            Ok(vals.into_iter().map(|z| (z, p, Source::Sector(g.n), odd)).collect())
        })
        .collect();
    let mut raw = Vec::new();
    for s in per_sector {
        raw.extend(s?);
    }
    Ok(SpectrumResult {
        entries: collect_entries(raw),
        truncated: false,
    })
}

/// Result of matching two eigenvalue multisets.
#[derive(Clone, Debug, Serialize)]
pub struct MatchReport {
    pub count: usize,
    pub max_distance: f64,
    pub mean_distance: f64,
    pub hausdorff: f64,
    /// Index into `b` assigned to each element of `a`.
    #[serde(skip)]
    pub assignment: Vec<usize>,
}

const MATCH_SCALE: f64 = 1e12;

/// Minimum-cost bipartite assignment on |λ − μ|; both sides must have
/// equal size.
pub fn match_spectra(a: &[C64], b: &[C64]) -> Result<MatchReport> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "spectra differ in size: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(MatchReport {
            count: 0,
            max_distance: 0.0,
            mean_distance: 0.0,
            hausdorff: 0.0,
            assignment: Vec::new(),
        });
    }
    let n = a.len();
    let weights = Matrix::from_fn(n, n, |(i, j)| ((a[i] - b[j]).norm() * MATCH_SCALE).round().min(4e18) as i64);
    let (_, assign) = kuhn_munkres_min(&weights);
    let dists: Vec<f64> = assign.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).norm()).collect();
    let max_distance = dists.iter().copied().fold(0.0, f64::max);
    let mean_distance = dists.iter().sum::<f64>() / n as f64;
    Ok(MatchReport {
        count: n,
        max_distance,
        mean_distance,
        hausdorff: hausdorff(a, b),
        assignment: assign,
    })
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    let one_way = |x: &[C64], y: &[C64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}
