//! Synthetic compositional count generators.
//!
//! [`generate_scenario`] draws block-structured data. Noise taxa share one
//! mean composition across clusters; signal taxa are split into
//! per-cluster blocks (elevated in their own cluster, with a small shared
//! leakage baseline keeping cross-block counts positive). Per-sample
//! at-risk indicators impose structural zeros by zeroing the Dirichlet
//! weights before any draw (reads redistribute among the at-risk taxa, so
//! depth is preserved unless the sample's entire support is structurally
//! absent). Each sample then draws its own composition from a Dirichlet
//! centered on its cluster's masked composition with total concentration
//! `dirichlet_scale`, and places its reads multinomially — i.e., counts
//! are zero-inflated Dirichlet-multinomial within cluster, overdispersed
//! like real sequencing data. [`generate_dtm`] draws
//! each sample from a Dirichlet-tree multinomial over a Newick-parsed tree
//! with cluster-specific node concentrations, with the same zero-inflation
//! mechanism at the leaves.
//!
//! Every generator is a pure function of its seed: replicate r runs on RNG
//! stream r of the spec's seed, so replicate sets are reproducible and safe
//! to generate concurrently.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::newick::PhyloTree;
use crate::posterior::Partition;
use crate::sampler::{chain_rng, log_gamma_draw};
use crate::{CountMatrix, Error, Result};

const MAX_INDICATOR_RETRIES: usize = 1000;

/// A generated data set: counts, true labels, realized zero fraction.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub counts: CountMatrix,
    pub truth: Partition,
    pub zero_fraction: f64,
}

/// Block-structured scenario: K = n_per_cluster.len() true clusters,
/// `j_noise` undifferentiated taxa at total depth `depth_noise` per sample,
/// `j_signal` cluster-specific taxa at total depth `depth_signal`, and a
/// per-cell at-risk probability controlling structural zeros.
///
/// Cluster k's signal composition places mass 1−`signal_leakage` on its own
/// block and spreads `signal_leakage` over every signal taxon via a shared
/// baseline composition. A strictly positive leakage keeps cross-block
/// counts positive in expectation, so the cluster signal lives in count
/// magnitudes that at-risk indicators cannot explain away; leakage 0 makes
/// blocks support-exclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub n_per_cluster: Vec<usize>,
    pub j_noise: usize,
    pub j_signal: usize,
    pub depth_noise: u32,
    pub depth_signal: u32,
    pub at_risk_prob: f64,
    pub signal_leakage: f64,
    /// Dirichlet concentration of the shared noise composition. Values
    /// below 1 give the skewed rank-abundance profile typical of
    /// sequencing data (a few dominant taxa, a long tail).
    pub noise_concentration: f64,
    /// Dirichlet concentration of each cluster's own-block composition.
    /// Values below 1 concentrate a cluster's signal mass on a few
    /// dominant taxa (enterotype-like contrast).
    pub block_concentration: f64,
    /// Total Dirichlet concentration of the per-sample composition around
    /// its cluster's composition (split between the noise and signal parts
    /// by their depth shares). Smaller values mean heavier within-cluster
    /// overdispersion.
    pub dirichlet_scale: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn k(&self) -> usize {
        self.n_per_cluster.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_per_cluster.iter().sum()
    }

    pub fn n_taxa(&self) -> usize {
        self.j_noise + self.j_signal
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_cluster.is_empty() || self.n_per_cluster.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(
                "each cluster needs at least one sample".into(),
            ));
        }
        if self.n_taxa() < 2 {
            return Err(Error::InvalidArgument("need at least two taxa".into()));
        }
        if self.j_signal == 0 && self.depth_signal > 0 {
            return Err(Error::InvalidArgument(
                "depth_signal > 0 requires signal taxa".into(),
            ));
        }
        if self.j_signal > 0 && self.j_signal < self.k() {
            return Err(Error::InvalidArgument(
                "need at least one signal taxon per cluster".into(),
            ));
        }
        if !(self.at_risk_prob > 0.0 && self.at_risk_prob <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "at_risk_prob must lie in (0, 1], got {}",
                self.at_risk_prob
            )));
        }
        if !(0.0..1.0).contains(&self.signal_leakage) {
            return Err(Error::InvalidArgument(format!(
                "signal_leakage must lie in [0, 1), got {}",
                self.signal_leakage
            )));
        }
        if !(self.noise_concentration > 0.0) {
            return Err(Error::InvalidArgument(
                "noise_concentration must be positive".into(),
            ));
        }
        if !(self.block_concentration > 0.0) {
            return Err(Error::InvalidArgument(
                "block_concentration must be positive".into(),
            ));
        }
        if !(self.dirichlet_scale > 0.0) {
            return Err(Error::InvalidArgument(
                "dirichlet_scale must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Signal block (taxon index range) of each cluster: as even as
    /// possible, remainder to the lowest-index clusters. Offsets are
    /// relative to the full taxon axis (noise taxa come first).
    pub fn signal_blocks(&self) -> Vec<std::ops::Range<usize>> {
        let k = self.k();
        let base = self.j_signal / k;
        let rem = self.j_signal % k;
        let mut start = self.j_noise;
        (0..k)
            .map(|kk| {
                let size = base + usize::from(kk < rem);
                let r = start..start + size;
                start += size;
                r
            })
            .collect()
    }
}

/// Dirichlet draw via normalized Gamma variates, sampled in log space so
/// tiny concentration parameters cannot underflow.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, alphas: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = alphas
        .iter()
        .map(|&a| log_gamma_draw(rng, a))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Multinomial draw by conditional binomials over the positive-probability
/// entries; zero-probability entries receive exactly zero.
pub fn sample_multinomial<R: Rng + ?Sized>(rng: &mut R, n: u32, probs: &[f64]) -> Vec<u32> {
    let mut out = vec![0u32; probs.len()];
    let positive: Vec<usize> = (0..probs.len()).filter(|&j| probs[j] > 0.0).collect();
    if positive.is_empty() || n == 0 {
        return out;
    }
    let mut remaining = n as u64;
    let mut rest: f64 = positive.iter().map(|&j| probs[j]).sum();
    for (pos, &j) in positive.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if pos + 1 == positive.len() {
            out[j] = remaining as u32;
            break;
        }
        let frac = (probs[j] / rest).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, frac)
            .expect("valid binomial")
            .sample(rng);
        out[j] = draw as u32;
        remaining -= draw;
        rest -= probs[j];
        if rest <= 0.0 {
            break;
        }
    }
    out
}

/// One marginal Dirichlet-multinomial row: composition ~ Dirichlet(a) over
/// the positive-concentration entries, then a multinomial of the given
/// depth. Entries with a_j = 0 stay zero.
pub fn sample_dm_row<R: Rng + ?Sized>(rng: &mut R, depth: u32, a: &[f64]) -> Vec<u32> {
    let mut probs = vec![0.0; a.len()];
    let logs: Vec<(usize, f64)> = a
        .iter()
        .enumerate()
        .filter(|(_, &aj)| aj > 0.0)
        .map(|(j, &aj)| (j, log_gamma_draw(rng, aj)))
        .collect();
    let max = logs
        .iter()
        .map(|&(_, l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for &(j, l) in &logs {
        probs[j] = (l - max).exp();
        sum += probs[j];
    }
    for p in &mut probs {
        *p /= sum;
    }
    sample_multinomial(rng, depth, &probs)
}

/// Masked-composition Dirichlet-multinomial draw: renormalize the positive
/// weights, scale them to total concentration `scale`, draw the sample's
/// composition, then place `depth` reads multinomially. All-zero weights
/// yield an all-zero row segment.
fn sample_dm_part<R: Rng + ?Sized>(
    rng: &mut R,
    depth: u32,
    weights: &[f64],
    scale: f64,
) -> Vec<u32> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || depth == 0 {
        return vec![0; weights.len()];
    }
    let mut a = vec![0.0; weights.len()];
    for (slot, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            a[slot] = scale * w / total;
        }
    }
    sample_dm_row(rng, depth, &a)
}

/// Generate one data set on RNG stream `stream` of the spec's seed.
pub fn generate_scenario_on_stream(spec: &ScenarioSpec, stream: u64) -> Result<GeneratedData> {
    spec.validate()?;
    let mut rng = chain_rng(spec.seed, stream);
    let j_total = spec.n_taxa();
    let blocks = spec.signal_blocks();

    // One shared noise composition and one shared signal baseline, then a
    // per-cluster composition over its own block, symmetric Dirichlet(1)
    // each. Cluster k's full signal composition mixes its block composition
    // (mass 1−leakage) with the baseline (mass leakage).
    let noise_comp = if spec.j_noise > 0 {
        sample_dirichlet(&mut rng, &vec![spec.noise_concentration; spec.j_noise])
    } else {
        Vec::new()
    };
    let baseline = if spec.j_signal > 0 && spec.signal_leakage > 0.0 {
        sample_dirichlet(&mut rng, &vec![1.0; spec.j_signal])
    } else {
        vec![0.0; spec.j_signal]
    };
    let signal_comp: Vec<Vec<f64>> = blocks
        .iter()
        .map(|block| {
            if block.is_empty() {
                return Vec::new();
            }
            let own = sample_dirichlet(&mut rng, &vec![spec.block_concentration; block.len()]);
            let mut full: Vec<f64> = baseline
                .iter()
                .map(|&b| spec.signal_leakage * b)
                .collect();
            for (off, j) in block.clone().enumerate() {
                full[j - spec.j_noise] += (1.0 - spec.signal_leakage) * own[off];
            }
            full
        })
        .collect();

    let mut rows = Vec::with_capacity(spec.n_samples());
    let mut labels = Vec::with_capacity(spec.n_samples());
    for (cluster, &n_k) in spec.n_per_cluster.iter().enumerate() {
        let comp = &signal_comp[cluster];
        for _ in 0..n_k {
            // Per-sample at-risk indicators over every taxon; a sample whose
            // whole support is structurally zero cannot receive reads, so
            // its indicators are redrawn.
            let mut at_risk = vec![false; j_total];
            let mut ok = false;
            for _ in 0..MAX_INDICATOR_RETRIES {
                for r in at_risk.iter_mut() {
                    *r = rng.gen::<f64>() < spec.at_risk_prob;
                }
                let noise_alive = (0..spec.j_noise).any(|j| at_risk[j] && noise_comp[j] > 0.0);
                let signal_alive = (spec.j_noise..j_total)
                    .any(|j| at_risk[j] && comp[j - spec.j_noise] > 0.0);
                if noise_alive || signal_alive || (spec.depth_noise == 0 && spec.depth_signal == 0)
                {
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Err(Error::Generation(format!(
                    "no at-risk support after {MAX_INDICATOR_RETRIES} retries \
                     (at_risk_prob = {})",
                    spec.at_risk_prob
                )));
            }

            let mut row = vec![0u32; j_total];
            let depth_total = (spec.depth_noise + spec.depth_signal) as f64;
            if spec.j_noise > 0 && spec.depth_noise > 0 {
                let w: Vec<f64> = (0..spec.j_noise)
                    .map(|j| if at_risk[j] { noise_comp[j] } else { 0.0 })
                    .collect();
                let scale = spec.dirichlet_scale * spec.depth_noise as f64 / depth_total;
                let draws = sample_dm_part(&mut rng, spec.depth_noise, &w, scale);
                row[..spec.j_noise].copy_from_slice(&draws);
            }
            if spec.j_signal > 0 && spec.depth_signal > 0 {
                let w: Vec<f64> = (0..spec.j_signal)
                    .map(|t| {
                        if at_risk[spec.j_noise + t] {
                            comp[t]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let scale = spec.dirichlet_scale * spec.depth_signal as f64 / depth_total;
                let draws = sample_dm_part(&mut rng, spec.depth_signal, &w, scale);
                row[spec.j_noise..].copy_from_slice(&draws);
            }
            rows.push(row);
            labels.push(cluster);
        }
    }

    let sample_ids = (1..=rows.len()).map(|i| format!("s{i:03}")).collect();
    let mut taxon_ids: Vec<String> = (1..=spec.j_noise).map(|j| format!("noise{j:03}")).collect();
    taxon_ids.extend((1..=spec.j_signal).map(|j| format!("signal{j:03}")));
    let counts = CountMatrix::new(rows, sample_ids, taxon_ids)?;
    let zero_fraction = counts.zero_fraction();
    Ok(GeneratedData {
        counts,
        truth: Partition::from_labels(&labels),
        zero_fraction,
    })
}

/// Generate one data set (stream 0 of the spec's seed).
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<GeneratedData> {
    generate_scenario_on_stream(spec, 0)
}

/// Independent replicates on streams 0..n, concurrently when the `parallel`
/// feature is active.
#[cfg(feature = "parallel")]
pub fn generate_replicates(spec: &ScenarioSpec, n: usize) -> Result<Vec<GeneratedData>> {
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .map(|r| generate_scenario_on_stream(spec, r as u64))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn generate_replicates(spec: &ScenarioSpec, n: usize) -> Result<Vec<GeneratedData>> {
    generate_replicates_seq(spec, n)
}

/// Sequential fallback of [`generate_replicates`]; identical output.
pub fn generate_replicates_seq(spec: &ScenarioSpec, n: usize) -> Result<Vec<GeneratedData>> {
    (0..n)
        .map(|r| generate_scenario_on_stream(spec, r as u64))
        .collect()
}

/// Calibrated at-risk probability and the zero fraction it achieves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub at_risk_prob: f64,
    pub achieved: f64,
}

const CALIBRATION_TOL: f64 = 0.02;

/// Bisection on the at-risk probability so the Monte Carlo mean zero
/// fraction over `replicates` data sets hits `target` within 0.02. The
/// zero fraction is strictly decreasing in the at-risk probability; targets
/// below the fully-at-risk floor (sampling zeros alone) or above what heavy
/// structural zeroing can reach are errors.
pub fn calibrate_at_risk(
    spec: &ScenarioSpec,
    target: f64,
    replicates: usize,
) -> Result<Calibration> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    if !(0.0..1.0).contains(&target) {
        return Err(Error::Calibration(format!(
            "target zero fraction {target} outside [0, 1): structural zeros \
             cannot silence positively-forced reads"
        )));
    }
    let eval = |q: f64| -> Result<f64> {
        let probe = ScenarioSpec {
            at_risk_prob: q,
            ..spec.clone()
        };
        let mut total = 0.0;
        for r in 0..replicates {
            total += generate_scenario_on_stream(&probe, r as u64)?.zero_fraction;
        }
        Ok(total / replicates as f64)
    };
    let floor = eval(1.0)?;
    if target < floor - CALIBRATION_TOL {
        return Err(Error::CalibrationFloor { target, floor });
    }
    let mut lo = 0.02; // high zero fraction
    let mut hi = 1.0; // low zero fraction (the floor)
    let ceiling = eval(lo)?;
    if target > ceiling + CALIBRATION_TOL {
        return Err(Error::Calibration(format!(
            "target zero fraction {target} above the achievable ceiling {ceiling:.4}"
        )));
    }
    let mut best = Calibration {
        at_risk_prob: 1.0,
        achieved: floor,
    };
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let f = eval(mid)?;
        if (f - target).abs() < (best.achieved - target).abs() {
            best = Calibration {
                at_risk_prob: mid,
                achieved: f,
            };
        }
        if (f - target).abs() <= CALIBRATION_TOL {
            return Ok(best);
        }
        if f > target {
            // Too many zeros: raise the at-risk probability.
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (best.achieved - target).abs() <= CALIBRATION_TOL {
        Ok(best)
    } else {
        Err(Error::Calibration(format!(
            "bisection did not reach {target} within {CALIBRATION_TOL} \
             (closest {:.4})",
            best.achieved
        )))
    }
}

/// Signal leakage used by the scenario presets.
pub const DEFAULT_SIGNAL_LEAKAGE: f64 = 0.1;

/// Noise-composition Dirichlet concentration used by the scenario presets.
pub const DEFAULT_NOISE_CONCENTRATION: f64 = 0.3;

/// Within-block Dirichlet concentration used by the scenario presets.
pub const DEFAULT_BLOCK_CONCENTRATION: f64 = 0.5;

/// Per-sample Dirichlet concentration used by the scenario presets.
pub const DEFAULT_DIRICHLET_SCALE: f64 = 200.0;

/// The five block-structured benchmark scenarios (5,000 reads per sample:
/// 4,000 noise + 1,000 signal). At-risk probabilities were calibrated with
/// [`calibrate_at_risk`] (20 replicates) against the target zero fractions
/// in [`scenario_target_zero_fraction`].
pub fn scenario_preset(id: usize, seed: u64) -> Result<ScenarioSpec> {
    let (n_per_cluster, j_noise, j_signal, at_risk_prob) = match id {
        1 => (vec![50, 50], 80, 20, SCENARIO_AT_RISK[0]),
        2 => (vec![50, 50], 80, 20, SCENARIO_AT_RISK[1]),
        3 => (vec![50, 50], 80, 20, SCENARIO_AT_RISK[2]),
        4 => (vec![50, 50], 200, 50, SCENARIO_AT_RISK[3]),
        5 => (vec![30, 30, 20, 20, 25, 25], 80, 20, SCENARIO_AT_RISK[4]),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown scenario {other}; expected 1..=5 or dtm"
            )))
        }
    };
    Ok(ScenarioSpec {
        n_per_cluster,
        j_noise,
        j_signal,
        depth_noise: 4000,
        depth_signal: 1000,
        at_risk_prob,
        signal_leakage: DEFAULT_SIGNAL_LEAKAGE,
        noise_concentration: DEFAULT_NOISE_CONCENTRATION,
        block_concentration: DEFAULT_BLOCK_CONCENTRATION,
        dirichlet_scale: DEFAULT_DIRICHLET_SCALE,
        seed,
    })
}

/// Target average zero-count proportions of the five scenario presets.
pub fn scenario_target_zero_fraction(id: usize) -> Option<f64> {
    [0.28, 0.51, 0.73, 0.54, 0.50].get(id - 1).copied()
}

/// Calibrated at-risk probabilities for presets 1..=5 (see
/// [`scenario_preset`]).
pub const SCENARIO_AT_RISK: [f64; 5] = [0.7550, 0.5100, 0.2650, 0.4794, 0.5100];

/// Dirichlet-tree scenario: per cluster and internal node, concentrations
/// are `precision` times a Dirichlet draw over the tree's base
/// concentrations; each sample then draws its own splits from its cluster's
/// concentrations and descends the tree multinomially. Structural zeros are
/// injected at the leaves exactly as in [`generate_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct DtmSpec {
    pub n_per_cluster: Vec<usize>,
    pub depth: u32,
    pub at_risk_prob: f64,
    pub precision: f64,
    pub seed: u64,
}

impl DtmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_cluster.is_empty() || self.n_per_cluster.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(
                "each cluster needs at least one sample".into(),
            ));
        }
        if !(self.at_risk_prob > 0.0 && self.at_risk_prob <= 1.0) {
            return Err(Error::InvalidArgument(
                "at_risk_prob must lie in (0, 1]".into(),
            ));
        }
        if !(self.precision > 0.0) {
            return Err(Error::InvalidArgument("precision must be positive".into()));
        }
        Ok(())
    }
}

/// Per-sample Dirichlet-tree leaf composition: draw a Dirichlet split from
/// every internal node's concentrations and multiply down the paths.
/// Returns probabilities in leaf order.
pub fn sample_dtm_composition<R: Rng + ?Sized>(tree: &PhyloTree, rng: &mut R) -> Vec<f64> {
    let mut mass = vec![0.0f64; tree.nodes().len()];
    mass[tree.root()] = 1.0;
    // Nodes are arena-ordered parent-before-child, so one forward pass works.
    for idx in 0..tree.nodes().len() {
        let node = tree.node(idx);
        if node.is_leaf() {
            continue;
        }
        let split = sample_dirichlet(rng, &node.concentrations);
        for (child, &p) in node.children.iter().zip(&split) {
            mass[*child] = mass[idx] * p;
        }
    }
    tree.leaves().into_iter().map(|idx| mass[idx]).collect()
}

/// One Dirichlet-tree multinomial draw of the given depth (no
/// zero-inflation), in leaf order.
pub fn sample_dtm_row<R: Rng + ?Sized>(tree: &PhyloTree, depth: u32, rng: &mut R) -> Vec<u32> {
    let probs = sample_dtm_composition(tree, rng);
    sample_multinomial(rng, depth, &probs)
}

/// Low-level generator taking one concentration-bearing tree per cluster
/// (identical trees make the labels unrecoverable by design).
pub fn generate_dtm_from_cluster_trees(
    cluster_trees: &[PhyloTree],
    spec: &DtmSpec,
) -> Result<GeneratedData> {
    spec.validate()?;
    if cluster_trees.len() != spec.n_per_cluster.len() {
        return Err(Error::Dimension(format!(
            "{} cluster trees for {} clusters",
            cluster_trees.len(),
            spec.n_per_cluster.len()
        )));
    }
    let leaf_labels = cluster_trees[0].leaf_labels();
    let j_total = leaf_labels.len();
    let mut rng = chain_rng(spec.seed, 1);
    let mut rows = Vec::with_capacity(spec.n_per_cluster.iter().sum());
    let mut labels = Vec::new();
    for (cluster, &n_k) in spec.n_per_cluster.iter().enumerate() {
        let tree = &cluster_trees[cluster];
        for _ in 0..n_k {
            let mut at_risk = vec![false; j_total];
            let mut ok = false;
            for _ in 0..MAX_INDICATOR_RETRIES {
                for r in at_risk.iter_mut() {
                    *r = rng.gen::<f64>() < spec.at_risk_prob;
                }
                if at_risk.iter().any(|&r| r) {
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Err(Error::Generation(format!(
                    "no at-risk leaves after {MAX_INDICATOR_RETRIES} retries \
                     (at_risk_prob = {})",
                    spec.at_risk_prob
                )));
            }
            let mut probs = sample_dtm_composition(tree, &mut rng);
            for (p, &r) in probs.iter_mut().zip(&at_risk) {
                if !r {
                    *p = 0.0;
                }
            }
            let total: f64 = probs.iter().sum();
            let row = if total > 0.0 {
                for p in &mut probs {
                    *p /= total;
                }
                sample_multinomial(&mut rng, spec.depth, &probs)
            } else {
                vec![0; j_total]
            };
            rows.push(row);
            labels.push(cluster);
        }
    }
    let sample_ids = (1..=rows.len()).map(|i| format!("s{i:03}")).collect();
    let counts = CountMatrix::new(rows, sample_ids, leaf_labels)?;
    let zero_fraction = counts.zero_fraction();
    Ok(GeneratedData {
        counts,
        truth: Partition::from_labels(&labels),
        zero_fraction,
    })
}

/// Cluster-specific concentration trees: at every internal node of the base
/// tree, cluster k's concentrations are `precision · m` with
/// m ~ Dirichlet(base concentrations). Drawn on RNG stream 0 of the seed.
pub fn derive_cluster_trees(
    tree: &PhyloTree,
    k: usize,
    precision: f64,
    seed: u64,
) -> Vec<PhyloTree> {
    let mut rng = chain_rng(seed, 0);
    (0..k)
        .map(|_| {
            let mut t = tree.clone();
            for idx in t.internal_nodes() {
                let base = t.node(idx).concentrations.clone();
                let mean = sample_dirichlet(&mut rng, &base);
                t.node_mut(idx).concentrations =
                    mean.into_iter().map(|m| (precision * m).max(1e-9)).collect();
            }
            t
        })
        .collect()
}

/// Dirichlet-tree multinomial generator with zero-inflation at the leaves.
pub fn generate_dtm(tree: &PhyloTree, spec: &DtmSpec) -> Result<GeneratedData> {
    spec.validate()?;
    if tree.n_leaves() < 2 {
        return Err(Error::InvalidArgument("tree needs at least 2 leaves".into()));
    }
    let cluster_trees =
        derive_cluster_trees(tree, spec.n_per_cluster.len(), spec.precision, spec.seed);
    generate_dtm_from_cluster_trees(&cluster_trees, spec)
}

/// Bundled 79-leaf synthetic tree for the Dirichlet-tree scenario preset
/// (stand-in for a real taxonomy; any Newick file can substitute).
pub fn bundled_tree() -> PhyloTree {
    crate::newick::parse_newick(include_str!("../data/tree79.nwk"))
        .expect("bundled tree parses")
}

/// Preset for the Dirichlet-tree scenario: 4 clusters of 75 samples over
/// the bundled 79-leaf tree at 2,500 reads per sample, at-risk probability
/// calibrated to a 0.58 zero fraction.
pub fn dtm_preset(seed: u64) -> DtmSpec {
    DtmSpec {
        n_per_cluster: vec![75, 75, 75, 75],
        depth: 2500,
        at_risk_prob: DTM_AT_RISK,
        precision: 30.0,
        seed,
    }
}

/// Calibrated at-risk probability of the Dirichlet-tree preset.
pub const DTM_AT_RISK: f64 = 0.7244;

/// Target zero fraction of the Dirichlet-tree preset.
pub const DTM_TARGET_ZERO_FRACTION: f64 = 0.58;

/// Gaussian perturbation helper used in tests and benches: a fresh vector
/// μ + σ·z with z standard normal.
pub fn normal_vector<R: Rng + ?Sized>(rng: &mut R, mu: &[f64], sigma: f64) -> Vec<f64> {
    mu.iter()
        .map(|&m| m + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}
