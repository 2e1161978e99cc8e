//! Metropolis-Hastings-within-Gibbs chain with a telescoping update for the
//! number of components.
//!
//! One sweep updates, in this fixed order:
//!
//! 1. at-risk indicators γ (ZIDM mode only, row-major over zero cells),
//! 2. allocations c given weights and all K component parameter rows,
//! 3. relabeling so non-empty components occupy indices 1..K₊,
//! 4. weights of the filled components,
//! 5. coordinate-wise random-walk MH on the filled ξ rows,
//! 6. K given the partition, refreshing empty-component ξ and ψ from their
//!    priors,
//! 7. weights of all K components.
//!
//! Steps 2 and 6 are the telescoping pair: the conditional for K depends on
//! the partition only, and freshly drawn empty components give the next
//! allocation sweep a route to new clusters. Empty-component parameters are
//! refreshed every sweep, never carried over.
//!
//! A chain is strictly sequential; [`run_chains`] runs replicate chains
//! concurrently on independent RNG streams (ChaCha8, one stream id per
//! chain), so multi-chain output is reproducible regardless of scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::math::{ln_beta, ln_gamma, ln_gamma_pdf_from_log, log_sum_exp, sigmoid};
use crate::model::{log_prior_xi, Hyperparams, ZeroInflation};
use crate::{CountMatrix, Error, Result};

/// One MCMC state. Components are indexed 0-based internally; rows
/// `0..k_plus` of `xi`/`log_psi` are the non-empty components (maintained by
/// [`ChainState::relabel_filled_first`]), rows `k_plus..k` are fresh
/// prior draws for empty components. Weights are stored on the log scale so
/// that tiny spike-and-slab shapes (θ ≪ 1) cannot underflow; `ψ_k > 0`
/// corresponds to `log_psi[k]` finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    /// Cluster allocation per sample, in `0..k()`.
    pub c: Vec<usize>,
    /// At-risk indicators, N×J row-major. `true` wherever counts are
    /// positive.
    pub gamma: Vec<bool>,
    /// Component log-concentrations, `k()` rows of length J.
    pub xi: Vec<Vec<f64>>,
    /// Log of the unnormalized component weights, length `k()`.
    pub log_psi: Vec<f64>,
    /// Number of non-empty components.
    pub k_plus: usize,
    /// Number of taxa (gamma row stride).
    pub n_taxa: usize,
}

impl ChainState {
    /// Number of active components K (= Σ λ).
    pub fn k(&self) -> usize {
        self.log_psi.len()
    }

    pub fn n_samples(&self) -> usize {
        self.c.len()
    }

    #[inline]
    pub fn gamma(&self, i: usize, j: usize) -> bool {
        self.gamma[i * self.n_taxa + j]
    }

    #[inline]
    pub fn set_gamma(&mut self, i: usize, j: usize, v: bool) {
        self.gamma[i * self.n_taxa + j] = v;
    }

    /// Normalized weights w_k = ψ_k / Σ ψ.
    pub fn weights(&self) -> Vec<f64> {
        let norm = log_sum_exp(&self.log_psi);
        self.log_psi.iter().map(|&lp| (lp - norm).exp()).collect()
    }

    /// Occupancy N_k per component.
    pub fn component_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k()];
        for &ci in &self.c {
            counts[ci] += 1;
        }
        counts
    }

    /// Permute components so the non-empty ones occupy indices 0..K₊ (in
    /// order of their old indices), relabel allocations accordingly, and
    /// return K₊. Empty components follow, also in old-index order.
    pub fn relabel_filled_first(&mut self) -> usize {
        let k = self.k();
        let counts = self.component_counts();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&kk| (counts[kk] == 0, kk));
        let mut new_of_old = vec![0usize; k];
        for (new, &old) in order.iter().enumerate() {
            new_of_old[old] = new;
        }
        let mut xi_rows: Vec<Vec<f64>> = Vec::with_capacity(k);
        for &old in &order {
            xi_rows.push(std::mem::take(&mut self.xi[old]));
        }
        self.xi = xi_rows;
        self.log_psi = order.iter().map(|&old| self.log_psi[old]).collect();
        for ci in &mut self.c {
            *ci = new_of_old[*ci];
        }
        self.k_plus = counts.iter().filter(|&&n| n > 0).count();
        self.k_plus
    }

    /// Check every structural invariant against the data. Debug builds run
    /// this after every sweep.
    pub fn validate(&self, data: &CountMatrix, k_max: usize) -> Result<()> {
        let n = data.n_samples();
        let j = data.n_taxa();
        if self.c.len() != n || self.n_taxa != j || self.gamma.len() != n * j {
            return Err(Error::Dimension("state/data shape mismatch".into()));
        }
        let k = self.k();
        if k == 0 || k > k_max || self.xi.len() != k {
            return Err(Error::InvalidArgument(format!(
                "k = {k} outside 1..={k_max}"
            )));
        }
        if self.k_plus == 0 || self.k_plus > k {
            return Err(Error::InvalidArgument(format!(
                "k_plus = {} outside 1..={k}",
                self.k_plus
            )));
        }
        for row in &self.xi {
            if row.len() != j || row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite xi row".into()));
            }
        }
        if self.log_psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite log weight".into()));
        }
        let counts = self.component_counts();
        for (kk, &nk) in counts.iter().enumerate() {
            let filled = kk < self.k_plus;
            if filled != (nk > 0) {
                return Err(Error::InvalidArgument(
                    "components not in filled-first order".into(),
                ));
            }
        }
        for i in 0..n {
            for (jj, &z) in data.row(i).iter().enumerate() {
                if z > 0 && !self.gamma(i, jj) {
                    return Err(Error::StructuralZeroConflict { taxon: jj });
                }
            }
        }
        Ok(())
    }
}

/// Chain length, burn-in, thinning, seed, and whether ξ rows are retained.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub record_xi: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_iter: 15_000,
            burn_in: 5_000,
            thin: 1,
            seed: 1,
            record_xi: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::InvalidArgument("n_iter must be positive".into()));
        }
        if self.burn_in >= self.n_iter {
            return Err(Error::InvalidArgument(format!(
                "burn_in {} must be smaller than n_iter {}",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of draws a run will retain.
    pub fn n_retained(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }
}

/// One retained draw. Allocation labels are 1-based and contiguous in
/// 1..=k_plus; `weights` are the normalized weights of the filled
/// components; `xi` (if recorded) is row-major k_plus×J.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawRecord {
    pub iteration: u64,
    pub k: u32,
    pub k_plus: u32,
    pub log_density: f64,
    pub allocations: Vec<u16>,
    pub weights: Vec<f64>,
    pub xi: Option<Vec<f64>>,
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PosteriorDraws {
    pub n_samples: usize,
    pub n_taxa: usize,
    pub records: Vec<DrawRecord>,
}

impl PosteriorDraws {
    /// Posterior frequencies of K₊, as (k_plus, count) sorted by k_plus.
    pub fn k_plus_frequencies(&self) -> Vec<(u32, usize)> {
        let mut freq = std::collections::BTreeMap::new();
        for rec in &self.records {
            *freq.entry(rec.k_plus).or_insert(0usize) += 1;
        }
        freq.into_iter().collect()
    }

    /// Posterior mode of K₊ (smallest value on ties).
    pub fn k_plus_mode(&self) -> Option<u32> {
        self.k_plus_frequencies()
            .into_iter()
            .max_by_key(|&(k, n)| (n, std::cmp::Reverse(k)))
            .map(|(k, _)| k)
    }
}

/// Per-coordinate MH acceptance tallies for the ξ updates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct XiAcceptance {
    pub proposed: u64,
    pub accepted: u64,
}

impl XiAcceptance {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

impl std::ops::AddAssign for XiAcceptance {
    fn add_assign(&mut self, rhs: Self) {
        self.proposed += rhs.proposed;
        self.accepted += rhs.accepted;
    }
}

/// RNG for one chain: a fixed seed picks the generator, the stream id
/// separates chains/replicates so concurrent fits stay reproducible.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw log X with X ~ Gamma(shape, 1), exact in log space. For shape < 1
/// uses X = Y·U^(1/shape) with Y ~ Gamma(shape+1), so tiny draws keep full
/// precision instead of underflowing.
pub fn log_gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    debug_assert!(shape > 0.0);
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("valid gamma shape");
        g.sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("valid gamma shape");
        let y: f64 = g.sample(rng);
        let u = loop {
            let u: f64 = rng.gen();
            if u > 0.0 {
                break u;
            }
        };
        y.ln() + u.ln() / shape
    }
}

/// Sample an index from unnormalized log weights.
fn sample_categorical_log<R: Rng + ?Sized>(rng: &mut R, log_w: &[f64]) -> Result<usize> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Numerical(
            "all categorical weights are zero".into(),
        ));
    }
    let mut total = 0.0;
    for &lw in log_w {
        total += (lw - max).exp();
    }
    let target = rng.gen::<f64>() * total;
    let mut cum = 0.0;
    for (idx, &lw) in log_w.iter().enumerate() {
        cum += (lw - max).exp();
        if target < cum {
            return Ok(idx);
        }
    }
    Ok(log_w.len() - 1)
}

/// Singleton-cluster initialization: K = K₊ = 1, every allocation in the
/// single component, ξ_1 = μ, all indicators at risk (the chain discovers
/// structural zeros itself), ψ_1 ~ Gamma(θ + N, 1).
pub fn initialize<R: Rng + ?Sized>(
    data: &CountMatrix,
    hyper: &Hyperparams,
    rng: &mut R,
) -> ChainState {
    let n = data.n_samples();
    let j = data.n_taxa();
    ChainState {
        c: vec![0; n],
        gamma: vec![true; n * j],
        xi: vec![hyper.mu().to_vec()],
        log_psi: vec![log_gamma_draw(rng, hyper.theta() + n as f64)],
        k_plus: 1,
        n_taxa: j,
    }
}

/// exp(ξ) and lnΓ(exp(ξ)) tables for the current component rows.
struct ConcTables {
    a: Vec<Vec<f64>>,
    ln_gamma_a: Vec<Vec<f64>>,
    row_sum: Vec<f64>,
}

fn conc_tables(xi: &[Vec<f64>]) -> ConcTables {
    let a: Vec<Vec<f64>> = xi
        .iter()
        .map(|row| row.iter().map(|&x| x.exp()).collect())
        .collect();
    let ln_gamma_a = a
        .iter()
        .map(|row| row.iter().map(|&v| ln_gamma(v)).collect())
        .collect();
    let row_sum = a.iter().map(|row| row.iter().sum()).collect();
    ConcTables {
        a,
        ln_gamma_a,
        row_sum,
    }
}

/// Gibbs sweep over the at-risk indicators of zero-count cells, row-major.
/// Positive cells stay at risk; in DM ablation mode the caller skips this
/// entirely.
pub fn update_gamma<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &CountMatrix,
    hyper: &Hyperparams,
    rng: &mut R,
) {
    let n = data.n_samples();
    let jc = data.n_taxa();
    let alpha = hyper.alpha_gamma();
    let beta = hyper.beta_gamma();
    let tables = conc_tables(&state.xi);
    // Column at-risk totals, maintained incrementally across the sweep.
    let mut col_at_risk = vec![0usize; jc];
    for i in 0..n {
        for j in 0..jc {
            if state.gamma(i, j) {
                col_at_risk[j] += 1;
            }
        }
    }
    for i in 0..n {
        let a_row = &tables.a[state.c[i]];
        let depth = data.depth(i) as f64;
        // At-risk concentration total for this row under its component.
        let mut a_sum = 0.0;
        for j in 0..jc {
            if state.gamma(i, j) {
                a_sum += a_row[j];
            }
        }
        for (j, &z) in data.row(i).iter().enumerate() {
            if z > 0 {
                continue;
            }
            let old = state.gamma(i, j);
            let n_minus = (col_at_risk[j] - old as usize) as f64;
            let mut log_odds =
                ((alpha + n_minus) / (beta + (n - 1) as f64 - n_minus)).ln();
            if depth > 0.0 {
                let a_j = a_row[j];
                let a_without = if old { a_sum - a_j } else { a_sum };
                let a_with = a_without + a_j;
                log_odds += ln_gamma(a_with) - ln_gamma(a_with + depth)
                    - ln_gamma(a_without)
                    + ln_gamma(a_without + depth);
            }
            let new = rng.gen::<f64>() < sigmoid(log_odds);
            if new != old {
                state.set_gamma(i, j, new);
                if new {
                    col_at_risk[j] += 1;
                    a_sum += a_row[j];
                } else {
                    col_at_risk[j] -= 1;
                    a_sum -= a_row[j];
                }
            }
        }
    }
}

/// Positive cells of each row, precomputed once per fit.
pub(crate) fn positive_cells(data: &CountMatrix) -> Vec<Vec<(usize, u32)>> {
    (0..data.n_samples())
        .map(|i| {
            data.row(i)
                .iter()
                .enumerate()
                .filter(|(_, &z)| z > 0)
                .map(|(j, &z)| (j, z))
                .collect()
        })
        .collect()
}

/// Unnormalized allocation log probabilities for sample `i` over all K
/// components: log ψ_k plus the marginal DM log likelihood of row i under
/// component k (multinomial coefficient omitted; it is constant in k).
pub fn allocation_log_probs(state: &ChainState, data: &CountMatrix, i: usize) -> Vec<f64> {
    let tables = conc_tables(&state.xi);
    let positives: Vec<(usize, u32)> = data
        .row(i)
        .iter()
        .enumerate()
        .filter(|(_, &z)| z > 0)
        .map(|(j, &z)| (j, z))
        .collect();
    let mut out = vec![0.0; state.k()];
    allocation_log_probs_into(state, &tables, data, i, &positives, &mut out);
    out
}

fn allocation_log_probs_into(
    state: &ChainState,
    tables: &ConcTables,
    data: &CountMatrix,
    i: usize,
    positives: &[(usize, u32)],
    out: &mut [f64],
) {
    let jc = state.n_taxa;
    let depth = data.depth(i) as f64;
    for k in 0..state.k() {
        let a_row = &tables.a[k];
        let lga_row = &tables.ln_gamma_a[k];
        let mut a_sum = tables.row_sum[k];
        for j in 0..jc {
            if !state.gamma(i, j) {
                a_sum -= a_row[j];
            }
        }
        let mut ll = 0.0;
        if depth > 0.0 {
            ll += ln_gamma(a_sum) - ln_gamma(a_sum + depth);
            for &(j, z) in positives {
                ll += ln_gamma(a_row[j] + z as f64) - lga_row[j];
            }
        }
        out[k] = state.log_psi[k] + ll;
    }
}

/// Multinomial draw of every allocation from its full conditional
/// p(c_i = k) ∝ w_k · f(z_i | γ_i, ξ_k).
pub fn update_allocations<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &CountMatrix,
    rng: &mut R,
) -> Result<()> {
    let tables = conc_tables(&state.xi);
    let positives = positive_cells(data);
    let mut log_p = vec![0.0; state.k()];
    for i in 0..data.n_samples() {
        allocation_log_probs_into(state, &tables, data, i, &positives[i], &mut log_p);
        state.c[i] = sample_categorical_log(rng, &log_p)?;
    }
    Ok(())
}

/// Redraw the unnormalized weights: ψ_k ~ Gamma(θ + N_k, 1), so the
/// normalized weights are Dirichlet(θ+N_1, …, θ+N_{K₊}, θ, …, θ). With
/// `filled_only` the empty components keep their current ψ.
pub fn update_weights<R: Rng + ?Sized>(
    state: &mut ChainState,
    hyper: &Hyperparams,
    rng: &mut R,
    filled_only: bool,
) {
    let counts = state.component_counts();
    let upto = if filled_only { state.k_plus } else { state.k() };
    for k in 0..upto {
        state.log_psi[k] = log_gamma_draw(rng, hyper.theta() + counts[k] as f64);
    }
}

/// Normalized conditional log pmf of K given the partition, on the support
/// K₊..=K_max:
///
/// ```text
/// p(K | partition) ∝ p(K) · K!/(K−K₊)! · Γ(θK) / Γ(θK + N)
/// ```
///
/// (the partition-dependent factors do not involve K and cancel).
pub fn k_conditional_log_pmf(k_plus: usize, n: usize, hyper: &Hyperparams) -> Vec<f64> {
    let theta = hyper.theta();
    let mut log_w: Vec<f64> = (k_plus..=hyper.k_max())
        .map(|k| {
            hyper.log_k_pmf(k) + ln_gamma(k as f64 + 1.0)
                - ln_gamma((k - k_plus) as f64 + 1.0)
                + ln_gamma(theta * k as f64)
                - ln_gamma(theta * k as f64 + n as f64)
        })
        .collect();
    let norm = log_sum_exp(&log_w);
    for v in &mut log_w {
        *v -= norm;
    }
    log_w
}

/// Telescoping update of K: sample K | partition on {K₊, …, K_max}, then
/// refresh the empty components (ξ rows from Normal(μ, σ²), ψ from
/// Gamma(θ, 1)). Requires a relabeled state.
pub fn update_k<R: Rng + ?Sized>(state: &mut ChainState, hyper: &Hyperparams, rng: &mut R) {
    let k_plus = state.k_plus;
    let log_w = k_conditional_log_pmf(k_plus, state.n_samples(), hyper);
    let new_k = k_plus + sample_categorical_log(rng, &log_w).expect("finite pmf");
    state.xi.truncate(k_plus);
    state.log_psi.truncate(k_plus);
    let sigma = hyper.sigma2().sqrt();
    for _ in k_plus..new_k {
        let row: Vec<f64> = hyper
            .mu()
            .iter()
            .map(|&m| m + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        state.xi.push(row);
        state.log_psi.push(log_gamma_draw(rng, hyper.theta()));
    }
}

/// Coordinate-wise random-walk MH over the filled ξ rows. Each coordinate
/// (k, j) gets one Normal(0, σ²_MH) proposal; the acceptance ratio sums the
/// marginal DM likelihood change over the members of component k plus the
/// Normal prior change. Empty rows are untouched (they are prior draws,
/// refreshed in [`update_k`]).
pub fn update_xi<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &CountMatrix,
    hyper: &Hyperparams,
    rng: &mut R,
) -> XiAcceptance {
    let jc = data.n_taxa();
    let sd = hyper.sigma2_mh().sqrt();
    let sigma2 = hyper.sigma2();
    let mu = hyper.mu();
    let mut acc = XiAcceptance::default();

    let mut members_of: Vec<Vec<usize>> = vec![Vec::new(); state.k_plus];
    for (i, &ci) in state.c.iter().enumerate() {
        members_of[ci].push(i);
    }

    for k in 0..state.k_plus {
        let members = &members_of[k];
        let mut a_row: Vec<f64> = state.xi[k].iter().map(|&x| x.exp()).collect();
        let mut lga_row: Vec<f64> = a_row.iter().map(|&a| ln_gamma(a)).collect();
        // Per-member at-risk totals and their cached lnΓ values.
        let mut a_sum: Vec<f64> = members
            .iter()
            .map(|&i| {
                (0..jc)
                    .filter(|&j| state.gamma(i, j))
                    .map(|j| a_row[j])
                    .sum()
            })
            .collect();
        let mut lg_a: Vec<f64> = a_sum.iter().map(|&a| ln_gamma(a)).collect();
        let mut lg_an: Vec<f64> = members
            .iter()
            .zip(&a_sum)
            .map(|(&i, &a)| ln_gamma(a + data.depth(i) as f64))
            .collect();

        let mut touched: Vec<(usize, f64, f64, f64)> = Vec::with_capacity(members.len());
        for j in 0..jc {
            acc.proposed += 1;
            let x_old = state.xi[k][j];
            let x_new = x_old + sd * rng.sample::<f64, _>(StandardNormal);
            let a_old = a_row[j];
            let a_new = x_new.exp();
            let lga_new = ln_gamma(a_new);
            let mut delta = crate::math::ln_normal_pdf(x_new, mu[j], sigma2)
                - crate::math::ln_normal_pdf(x_old, mu[j], sigma2);
            touched.clear();
            for (idx, &i) in members.iter().enumerate() {
                if !state.gamma(i, j) {
                    continue;
                }
                let depth = data.depth(i) as f64;
                let a_total_new = a_sum[idx] - a_old + a_new;
                let lg_new = ln_gamma(a_total_new);
                let lg_n_new = ln_gamma(a_total_new + depth);
                delta += lg_new - lg_n_new - lg_a[idx] + lg_an[idx];
                let z = data.count(i, j);
                if z > 0 {
                    let zf = z as f64;
                    delta += ln_gamma(a_new + zf) - lga_new - ln_gamma(a_old + zf)
                        + lga_row[j];
                }
                touched.push((idx, a_total_new, lg_new, lg_n_new));
            }
            let u: f64 = rng.gen();
            if u.ln() < delta {
                acc.accepted += 1;
                state.xi[k][j] = x_new;
                a_row[j] = a_new;
                lga_row[j] = lga_new;
                for &(idx, a_total, lg, lg_n) in &touched {
                    a_sum[idx] = a_total;
                    lg_a[idx] = lg;
                    lg_an[idx] = lg_n;
                }
            }
        }
    }
    acc
}

/// Log density of the full marginalized state: the DM likelihood of every
/// row (with multinomial coefficients), the ξ priors over all K rows, the
/// marginalized Beta-Bernoulli prior of γ, the allocation probabilities,
/// the Gamma(θ, 1) weight priors and the K prior. In DM ablation mode the
/// γ term is a constant offset (all indicators are 1); it is included so
/// both modes report on the same scale.
pub fn joint_log_density(state: &ChainState, data: &CountMatrix, hyper: &Hyperparams) -> f64 {
    let n = data.n_samples();
    let jc = data.n_taxa();
    let tables = conc_tables(&state.xi);
    let mut out = 0.0;
    for i in 0..n {
        let k = state.c[i];
        let depth = data.depth(i) as f64;
        if depth > 0.0 {
            let mut a_sum = tables.row_sum[k];
            for j in 0..jc {
                if !state.gamma(i, j) {
                    a_sum -= tables.a[k][j];
                }
            }
            out += ln_gamma(a_sum) - ln_gamma(a_sum + depth) + ln_gamma(depth + 1.0);
            for (j, &z) in data.row(i).iter().enumerate() {
                if z > 0 {
                    let zf = z as f64;
                    out += ln_gamma(tables.a[k][j] + zf) - tables.ln_gamma_a[k][j]
                        - ln_gamma(zf + 1.0);
                }
            }
        }
    }
    for row in &state.xi {
        out += log_prior_xi(row, hyper.mu(), hyper.sigma2());
    }
    let (alpha, beta) = (hyper.alpha_gamma(), hyper.beta_gamma());
    for j in 0..jc {
        let n_j = (0..n).filter(|&i| state.gamma(i, j)).count() as f64;
        out += ln_beta(alpha + n_j, beta + n as f64 - n_j) - ln_beta(alpha, beta);
    }
    let log_norm = log_sum_exp(&state.log_psi);
    for &ci in &state.c {
        out += state.log_psi[ci] - log_norm;
    }
    for &lp in &state.log_psi {
        out += ln_gamma_pdf_from_log(lp, hyper.theta());
    }
    out + hyper.log_k_pmf(state.k())
}

fn record_draw(
    state: &ChainState,
    data: &CountMatrix,
    hyper: &Hyperparams,
    iteration: u64,
    record_xi: bool,
) -> DrawRecord {
    let log_norm = log_sum_exp(&state.log_psi);
    let weights: Vec<f64> = state.log_psi[..state.k_plus]
        .iter()
        .map(|&lp| (lp - log_norm).exp())
        .collect();
    let xi = record_xi.then(|| {
        let mut flat = Vec::with_capacity(state.k_plus * state.n_taxa);
        for row in &state.xi[..state.k_plus] {
            flat.extend_from_slice(row);
        }
        flat
    });
    DrawRecord {
        iteration,
        k: state.k() as u32,
        k_plus: state.k_plus as u32,
        log_density: joint_log_density(state, data, hyper),
        allocations: state.c.iter().map(|&ci| ci as u16 + 1).collect(),
        weights,
        xi,
    }
}

/// Run one chain, invoking `on_record` for every retained draw (burn-in and
/// thinning are applied at recording time only; the chain itself never
/// skips an update). Returns the accumulated ξ-proposal acceptance tallies.
pub fn run_chain_with<F>(
    data: &CountMatrix,
    hyper: &Hyperparams,
    config: &SamplerConfig,
    stream: u64,
    mut on_record: F,
) -> Result<XiAcceptance>
where
    F: FnMut(DrawRecord) -> Result<()>,
{
    config.validate()?;
    let mut rng = chain_rng(config.seed, stream);
    let mut state = initialize(data, hyper, &mut rng);
    let zidm = hyper.zero_inflation() == ZeroInflation::Zidm;
    let mut acceptance = XiAcceptance::default();
    for t in 1..=config.n_iter as u64 {
        if zidm {
            update_gamma(&mut state, data, hyper, &mut rng);
        }
        update_allocations(&mut state, data, &mut rng)?;
        state.relabel_filled_first();
        update_weights(&mut state, hyper, &mut rng, true);
        acceptance += update_xi(&mut state, data, hyper, &mut rng);
        update_k(&mut state, hyper, &mut rng);
        update_weights(&mut state, hyper, &mut rng, false);
        debug_assert!(state.validate(data, hyper.k_max()).is_ok());
        if t > config.burn_in as u64 && (t - config.burn_in as u64) % config.thin as u64 == 0 {
            on_record(record_draw(&state, data, hyper, t, config.record_xi))?;
        }
    }
    Ok(acceptance)
}

/// Run one chain and collect its retained draws.
pub fn run_chain(
    data: &CountMatrix,
    hyper: &Hyperparams,
    config: &SamplerConfig,
) -> Result<PosteriorDraws> {
    let mut draws = PosteriorDraws {
        n_samples: data.n_samples(),
        n_taxa: data.n_taxa(),
        records: Vec::with_capacity(config.n_retained()),
    };
    run_chain_with(data, hyper, config, 0, |rec| {
        draws.records.push(rec);
        Ok(())
    })?;
    Ok(draws)
}

/// Run `n_chains` independent chains on RNG streams 0..n_chains,
/// sequentially.
pub fn run_chains_seq(
    data: &CountMatrix,
    hyper: &Hyperparams,
    config: &SamplerConfig,
    n_chains: usize,
) -> Result<Vec<PosteriorDraws>> {
    (0..n_chains)
        .map(|m| run_one_stream(data, hyper, config, m as u64))
        .collect()
}

fn run_one_stream(
    data: &CountMatrix,
    hyper: &Hyperparams,
    config: &SamplerConfig,
    stream: u64,
) -> Result<PosteriorDraws> {
    let mut draws = PosteriorDraws {
        n_samples: data.n_samples(),
        n_taxa: data.n_taxa(),
        records: Vec::with_capacity(config.n_retained()),
    };
    run_chain_with(data, hyper, config, stream, |rec| {
        draws.records.push(rec);
        Ok(())
    })?;
    Ok(draws)
}

/// Run `n_chains` independent chains concurrently. Chain m owns RNG stream
/// m, so the output is identical to [`run_chains_seq`].
#[cfg(feature = "parallel")]
pub fn run_chains(
    data: &CountMatrix,
    hyper: &Hyperparams,
    config: &SamplerConfig,
    n_chains: usize,
) -> Result<Vec<PosteriorDraws>> {
    use rayon::prelude::*;
    (0..n_chains)
        .into_par_iter()
        .map(|m| run_one_stream(data, hyper, config, m as u64))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_chains(
    data: &CountMatrix,
    hyper: &Hyperparams,
    config: &SamplerConfig,
    n_chains: usize,
) -> Result<Vec<PosteriorDraws>> {
    run_chains_seq(data, hyper, config, n_chains)
}
