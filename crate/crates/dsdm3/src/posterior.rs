//! Post-hoc summarization of posterior draws: pairwise co-clustering, point
//! partition search under the variation-of-information lower bound, the
//! adjusted Rand index, cluster abundance estimates and alpha-diversity.
//!
//! The reported search objective is the Jensen lower bound of the posterior
//! expected variation of information, in bits,
//!
//! ```text
//! VI_lb(p) = (1/N) Σ_i [ log₂ s_i + log₂ q_i − 2 log₂ t_i ]
//! ```
//!
//! with s_i the size of p's block containing i, q_i = Σ_i' P[i,i'] and
//! t_i = Σ_{i': p_i = p_i'} P[i,i']. The middle term does not depend on p
//! and is dropped while searching (argmin-invariant) but included in every
//! reported value so objectives compare across runs.

use crate::math::quantile_sorted;
use crate::model::cluster_relative_abundance;
use crate::sampler::PosteriorDraws;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// A hard clustering of N items, canonicalized so labels are 0-based and
/// appear in first-appearance order (externally rendered 1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    k_plus: usize,
}

impl Partition {
    /// Canonicalize arbitrary labels by order of first appearance.
    pub fn from_labels<T: Eq + std::hash::Hash + Copy>(raw: &[T]) -> Partition {
        let mut map = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &r in raw {
            let next = map.len();
            labels.push(*map.entry(r).or_insert(next));
        }
        Partition {
            labels,
            k_plus: map.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| l + 1).collect()
    }

    pub fn n_items(&self) -> usize {
        self.labels.len()
    }

    pub fn k_plus(&self) -> usize {
        self.k_plus
    }

    /// Item indices per block.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.k_plus];
        for (i, &l) in self.labels.iter().enumerate() {
            blocks[l].push(i);
        }
        blocks
    }
}

/// Posterior pairwise co-clustering probabilities: symmetric, unit
/// diagonal, entries in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CoClusterMatrix {
    n: usize,
    p: Vec<f64>,
}

impl CoClusterMatrix {
    pub fn n_items(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut p = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::Dimension("co-clustering matrix not square".into()));
            }
            p.extend_from_slice(row);
        }
        let m = CoClusterMatrix { n, p };
        for i in 0..n {
            if (m.get(i, i) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument("diagonal must be 1".into()));
            }
            for j in 0..n {
                let v = m.get(i, j);
                if !(0.0..=1.0).contains(&v) || (v - m.get(j, i)).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(
                        "entries must be symmetric probabilities".into(),
                    ));
                }
            }
        }
        Ok(m)
    }
}

/// Posterior frequency of c_i = c_i' over the retained draws of one or more
/// chains. Errors if no draws are available.
pub fn coclustering_pooled<'a, I>(chains: I) -> Result<CoClusterMatrix>
where
    I: IntoIterator<Item = &'a PosteriorDraws>,
{
    let mut n = 0usize;
    let mut m = 0usize;
    let mut p: Vec<f64> = Vec::new();
    for draws in chains {
        if p.is_empty() {
            n = draws.n_samples;
            p = vec![0.0; n * n];
        } else if draws.n_samples != n {
            return Err(Error::Dimension("chains disagree on N".into()));
        }
        for rec in &draws.records {
            m += 1;
            for i in 0..n {
                let ci = rec.allocations[i];
                let row = i * n;
                for i2 in i..n {
                    if rec.allocations[i2] == ci {
                        p[row + i2] += 1.0;
                    }
                }
            }
        }
    }
    if m == 0 {
        return Err(Error::NoDraws);
    }
    for i in 0..n {
        for i2 in i..n {
            let v = p[i * n + i2] / m as f64;
            p[i * n + i2] = v;
            p[i2 * n + i] = v;
        }
    }
    Ok(CoClusterMatrix { n, p })
}

/// Co-clustering matrix of a single chain's draws.
pub fn coclustering(draws: &PosteriorDraws) -> Result<CoClusterMatrix> {
    coclustering_pooled(std::iter::once(draws))
}

/// Constant part of the reported bound: (1/N) Σ_i log₂ Σ_i' P[i,i'].
fn vi_constant(pm: &CoClusterMatrix) -> f64 {
    let n = pm.n_items();
    (0..n)
        .map(|i| (0..n).map(|j| pm.get(i, j)).sum::<f64>().log2())
        .sum::<f64>()
        / n as f64
}

/// Partition-dependent part, unscaled: Σ_i [log₂ s_i − 2 log₂ t_i].
fn vi_kernel(labels: &[usize], pm: &CoClusterMatrix) -> f64 {
    let n = labels.len();
    let mut sizes = std::collections::HashMap::new();
    for &l in labels {
        *sizes.entry(l).or_insert(0usize) += 1;
    }
    let mut out = 0.0;
    for i in 0..n {
        let t: f64 = (0..n)
            .filter(|&j| labels[j] == labels[i])
            .map(|j| pm.get(i, j))
            .sum();
        out += (sizes[&labels[i]] as f64).log2() - 2.0 * t.log2();
    }
    out
}

/// Reported lower bound of the posterior expected variation of information
/// (base-2 logs), including the partition-independent term. Smaller is
/// better; relabeling-invariant; 0 for a single item.
pub fn vi_lower_bound(p: &Partition, pm: &CoClusterMatrix) -> Result<f64> {
    if p.n_items() != pm.n_items() {
        return Err(Error::Dimension(format!(
            "partition over {} items, matrix over {}",
            p.n_items(),
            pm.n_items()
        )));
    }
    Ok((vi_kernel(p.labels(), pm) / p.n_items() as f64) + vi_constant(pm))
}

/// Incremental state for the greedy search: block memberships plus, for
/// every placed item, t_i = Σ_{i' in own block} P[i,i'].
struct Working<'a> {
    pm: &'a CoClusterMatrix,
    label: Vec<usize>,
    blocks: Vec<Vec<usize>>,
    t: Vec<f64>,
    kernel: f64,
}

const UNPLACED: usize = usize::MAX;

impl<'a> Working<'a> {
    fn new(pm: &'a CoClusterMatrix) -> Self {
        Working {
            pm,
            label: vec![UNPLACED; pm.n_items()],
            blocks: Vec::new(),
            t: vec![0.0; pm.n_items()],
            kernel: 0.0,
        }
    }

    /// Kernel change from placing unassigned item i into block b (or a new
    /// singleton when b == blocks.len()).
    fn place_delta(&self, i: usize, b: usize) -> f64 {
        if b == self.blocks.len() {
            return 0.0; // 1·log₂1 − 2 log₂ P_ii = 0
        }
        let members = &self.blocks[b];
        let s = members.len() as f64;
        let mut delta = (s + 1.0) * (s + 1.0).log2() - s * s.log2();
        let mut t_new = 1.0; // P_ii
        for &m in members {
            let pim = self.pm.get(i, m);
            t_new += pim;
            delta += -2.0 * ((self.t[m] + pim).log2() - self.t[m].log2());
        }
        delta - 2.0 * t_new.log2()
    }

    fn place(&mut self, i: usize, b: usize) {
        self.kernel += self.place_delta(i, b);
        if b == self.blocks.len() {
            self.blocks.push(vec![i]);
            self.label[i] = b;
            self.t[i] = 1.0;
            return;
        }
        let mut t_new = 1.0;
        for &m in &self.blocks[b] {
            let pim = self.pm.get(i, m);
            t_new += pim;
            self.t[m] += pim;
        }
        self.t[i] = t_new;
        self.label[i] = b;
        self.blocks[b].push(i);
    }

    /// Kernel change from moving placed item i to block b (b may be
    /// blocks.len() for a fresh singleton). Returns None for no-ops.
    fn move_delta(&self, i: usize, b: usize) -> Option<f64> {
        let a = self.label[i];
        if b == a {
            return None;
        }
        let sa = self.blocks[a].len() as f64;
        let new_block = b == self.blocks.len();
        if new_block && sa == 1.0 {
            return None; // singleton to singleton is structurally identical
        }
        let mut delta = 0.0;
        // Leaving a: sizes and the t of remaining members shrink.
        delta += if sa > 1.0 {
            (sa - 1.0) * (sa - 1.0).log2() - sa * sa.log2()
        } else {
            0.0
        };
        for &m in &self.blocks[a] {
            if m == i {
                continue;
            }
            let pim = self.pm.get(i, m);
            delta += -2.0 * ((self.t[m] - pim).log2() - self.t[m].log2());
        }
        delta += 2.0 * self.t[i].log2();
        // Joining b.
        let mut t_new = 1.0;
        if !new_block {
            let sb = self.blocks[b].len() as f64;
            delta += (sb + 1.0) * (sb + 1.0).log2() - sb * sb.log2();
            for &m in &self.blocks[b] {
                let pim = self.pm.get(i, m);
                t_new += pim;
                delta += -2.0 * ((self.t[m] + pim).log2() - self.t[m].log2());
            }
        }
        Some(delta - 2.0 * t_new.log2())
    }

    fn apply_move(&mut self, i: usize, b: usize) {
        let delta = self.move_delta(i, b).expect("valid move");
        self.kernel += delta;
        let a = self.label[i];
        let new_block = b == self.blocks.len();
        let pos = self.blocks[a].iter().position(|&m| m == i).unwrap();
        self.blocks[a].swap_remove(pos);
        for &m in &self.blocks[a] {
            self.t[m] -= self.pm.get(i, m);
        }
        let mut t_new = 1.0;
        if new_block {
            self.blocks.push(vec![i]);
            self.label[i] = self.blocks.len() - 1;
        } else {
            for &m in &self.blocks[b] {
                let pim = self.pm.get(i, m);
                t_new += pim;
                self.t[m] += pim;
            }
            self.blocks[b].push(i);
            self.label[i] = b;
        }
        self.t[i] = t_new;
        if self.blocks[a].is_empty() {
            // Preserve the order of the remaining blocks.
            self.blocks.remove(a);
            for l in self.label.iter_mut() {
                if *l != UNPLACED && *l > a {
                    *l -= 1;
                }
            }
        }
    }
}

fn salso_one_run<R: Rng>(
    pm: &CoClusterMatrix,
    max_blocks: usize,
    rng: &mut R,
) -> (Vec<usize>, f64) {
    let n = pm.n_items();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut w = Working::new(pm);
    // Sequential allocation in random order; lowest block index wins ties,
    // with the fresh block considered last.
    for &i in &order {
        let mut best_b = 0usize;
        let mut best_delta = f64::INFINITY;
        let upper = if w.blocks.len() < max_blocks {
            w.blocks.len() + 1
        } else {
            w.blocks.len()
        };
        for b in 0..upper {
            let d = w.place_delta(i, b);
            if d < best_delta {
                best_delta = d;
                best_b = b;
            }
        }
        w.place(i, best_b);
    }
    // Full reallocation sweeps until no single-item move improves.
    loop {
        let mut improved = false;
        for i in 0..n {
            let upper = if w.blocks.len() < max_blocks {
                w.blocks.len() + 1
            } else {
                w.blocks.len()
            };
            let mut best: Option<(usize, f64)> = None;
            for b in 0..upper {
                if let Some(d) = w.move_delta(i, b) {
                    if best.map_or(true, |(_, bd)| d < bd) {
                        best = Some((b, d));
                    }
                }
            }
            if let Some((b, d)) = best {
                if d < -1e-10 {
                    let before = w.kernel;
                    w.apply_move(i, b);
                    debug_assert!(w.kernel < before);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (w.label.clone(), w.kernel)
}

/// Randomized multi-start greedy search minimizing the VI lower bound over
/// partitions of at most `max_blocks` blocks (N when unset). Deterministic
/// given the seed: restart r runs on RNG stream r and the best objective
/// wins, ties by restart index. Returns the canonicalized partition and the
/// reported objective (constant included).
pub fn salso_search(
    pm: &CoClusterMatrix,
    runs: usize,
    seed: u64,
    max_blocks: Option<usize>,
) -> Result<(Partition, f64)> {
    salso_finish(pm, max_blocks, run_all_starts(pm, runs, seed, cap_for(pm, max_blocks)?)?)
}

/// Sequential fallback of [`salso_search`]; identical output.
pub fn salso_search_seq(
    pm: &CoClusterMatrix,
    runs: usize,
    seed: u64,
    max_blocks: Option<usize>,
) -> Result<(Partition, f64)> {
    let cap = cap_for(pm, max_blocks)?;
    let results: Vec<(Vec<usize>, f64)> = (0..runs)
        .map(|r| salso_one_run(pm, cap, &mut crate::sampler::chain_rng(seed, r as u64)))
        .collect();
    salso_finish(pm, max_blocks, results)
}

fn cap_for(pm: &CoClusterMatrix, max_blocks: Option<usize>) -> Result<usize> {
    Ok(max_blocks.unwrap_or(pm.n_items()).clamp(1, pm.n_items()))
}

fn salso_finish(
    pm: &CoClusterMatrix,
    _max_blocks: Option<usize>,
    results: Vec<(Vec<usize>, f64)>,
) -> Result<(Partition, f64)> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("salso needs at least one run".into()));
    }
    let n = pm.n_items();
    let (_, labels, kernel) = results
        .into_iter()
        .enumerate()
        .map(|(r, (labels, kernel))| (r, labels, kernel))
        .min_by(|a, b| {
            a.2.partial_cmp(&b.2)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        })
        .expect("at least one run");
    let partition = Partition::from_labels(&labels);
    Ok((partition, kernel / n as f64 + vi_constant(pm)))
}

#[cfg(feature = "parallel")]
fn run_all_starts(
    pm: &CoClusterMatrix,
    runs: usize,
    seed: u64,
    cap: usize,
) -> Result<Vec<(Vec<usize>, f64)>> {
    use rayon::prelude::*;
    Ok((0..runs)
        .into_par_iter()
        .map(|r| salso_one_run(pm, cap, &mut crate::sampler::chain_rng(seed, r as u64)))
        .collect())
}

#[cfg(not(feature = "parallel"))]
fn run_all_starts(
    pm: &CoClusterMatrix,
    runs: usize,
    seed: u64,
    cap: usize,
) -> Result<Vec<(Vec<usize>, f64)>> {
    Ok((0..runs)
        .map(|r| salso_one_run(pm, cap, &mut crate::sampler::chain_rng(seed, r as u64)))
        .collect())
}

/// Hubert-Arabie adjusted Rand index between two partitions of the same
/// items: 1 iff identical up to relabeling, 0 in expectation under the
/// permutation model.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    if a.n_items() != b.n_items() {
        return Err(Error::Dimension(format!(
            "partitions over {} and {} items",
            a.n_items(),
            b.n_items()
        )));
    }
    let n = a.n_items();
    let mut contingency = std::collections::HashMap::new();
    let mut row = vec![0u64; a.k_plus()];
    let mut col = vec![0u64; b.k_plus()];
    for i in 0..n {
        *contingency.entry((a.labels[i], b.labels[i])).or_insert(0u64) += 1;
        row[a.labels[i]] += 1;
        col[b.labels[i]] += 1;
    }
    let choose2 = |x: u64| (x * (x - 1)) as f64 / 2.0;
    let index: f64 = contingency.values().map(|&v| choose2(v)).sum();
    let sum_row: f64 = row.iter().map(|&v| choose2(v)).sum();
    let sum_col: f64 = col.iter().map(|&v| choose2(v)).sum();
    let total = choose2(n as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_row * sum_col / total;
    let max_index = 0.5 * (sum_row + sum_col);
    if (max_index - expected).abs() < f64::EPSILON * total {
        // Both trivial partitions (all-singletons or one block): identical.
        return Ok(1.0);
    }
    Ok((index - expected) / (max_index - expected))
}

/// Posterior mean relative abundances with central 95% intervals for every
/// block of a reference partition. Each retained draw's block is matched to
/// the component holding the majority of its members (ties by larger
/// component weight, then lower index), and that component's abundance
/// vector contributes one sample. Requires recorded ξ traces.
#[derive(Debug, Clone)]
pub struct ClusterAbundance {
    pub mean: Vec<f64>,
    pub lo95: Vec<f64>,
    pub hi95: Vec<f64>,
}

pub fn posterior_cluster_abundances(
    draws: &PosteriorDraws,
    p: &Partition,
) -> Result<Vec<ClusterAbundance>> {
    if draws.n_samples != p.n_items() {
        return Err(Error::Dimension(format!(
            "draws over {} samples, partition over {}",
            draws.n_samples,
            p.n_items()
        )));
    }
    if draws.records.is_empty() {
        return Err(Error::NoDraws);
    }
    if draws.records.iter().any(|r| r.xi.is_none()) {
        return Err(Error::NoXiTraces);
    }
    let jc = draws.n_taxa;
    let blocks = p.blocks();
    let mut samples: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); jc]; blocks.len()];
    for rec in &draws.records {
        let xi = rec.xi.as_ref().expect("checked above");
        for (g, members) in blocks.iter().enumerate() {
            let mut overlap = vec![0usize; rec.k_plus as usize];
            for &i in members {
                overlap[(rec.allocations[i] - 1) as usize] += 1;
            }
            let best = (0..overlap.len())
                .max_by(|&x, &y| {
                    overlap[x]
                        .cmp(&overlap[y])
                        .then(
                            rec.weights[x]
                                .partial_cmp(&rec.weights[y])
                                .unwrap_or(std::cmp::Ordering::Equal),
                        )
                        .then(y.cmp(&x))
                })
                .expect("k_plus >= 1");
            let ra = cluster_relative_abundance(&xi[best * jc..(best + 1) * jc]);
            for (j, &v) in ra.iter().enumerate() {
                samples[g][j].push(v);
            }
        }
    }
    Ok(samples
        .into_iter()
        .map(|per_taxon| {
            let mut mean = Vec::with_capacity(jc);
            let mut lo = Vec::with_capacity(jc);
            let mut hi = Vec::with_capacity(jc);
            for mut vals in per_taxon {
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                mean.push(vals.iter().sum::<f64>() / vals.len() as f64);
                lo.push(quantile_sorted(&vals, 0.025));
                hi.push(quantile_sorted(&vals, 0.975));
            }
            ClusterAbundance {
                mean,
                lo95: lo,
                hi95: hi,
            }
        })
        .collect())
}

/// Sum an abundance vector into coarser groups (a taxon→group map), e.g.
/// genus-level estimates aggregated to phylum level.
pub fn aggregate_abundance(values: &[f64], groups: &[usize], n_groups: usize) -> Vec<f64> {
    assert_eq!(values.len(), groups.len());
    let mut out = vec![0.0; n_groups];
    for (&v, &g) in values.iter().zip(groups) {
        out[g] += v;
    }
    out
}

/// Per-sample alpha diversity: richness (observed taxa) and the Shannon
/// index −Σ p ln p over observed taxa. A zero-depth row has richness 0 and
/// no defined Shannon index.
pub fn diversity(z: &[u32]) -> (usize, Option<f64>) {
    let depth: u64 = z.iter().map(|&v| v as u64).sum();
    let richness = z.iter().filter(|&&v| v > 0).count();
    if depth == 0 {
        return (0, None);
    }
    let shannon = -z
        .iter()
        .filter(|&&v| v > 0)
        .map(|&v| {
            let p = v as f64 / depth as f64;
            p * p.ln()
        })
        .sum::<f64>();
    (richness, Some(shannon.max(0.0)))
}
