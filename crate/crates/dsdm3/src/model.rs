//! Domain types and pure log-density kernels.
//!
//! The observation model for a sample with counts z, at-risk indicators γ
//! and component log-concentrations ξ is a Dirichlet-multinomial restricted
//! to the at-risk taxa: with a_j = exp(ξ_j), A = Σ_{γ_j=1} a_j and
//! n = Σ_j z_j,
//!
//! ```text
//! log p(z | γ, ξ) = log C(n; z) + lnΓ(A) − lnΓ(A + n)
//!                 + Σ_{γ_j=1} [lnΓ(a_j + z_j) − lnΓ(a_j)]
//! ```
//!
//! where the individual relative abundances have been integrated out. The
//! per-taxon at-risk probabilities are likewise integrated out, leaving a
//! Pólya-urn full conditional for each indicator. The number of components
//! carries one of four priors, each renormalized to support {1, …, K_max}.
//!
//! All kernels are pure functions of their inputs and safe to call
//! concurrently.

use crate::math::{ln_beta, ln_choose, ln_gamma, ln_normal_pdf, log_sum_exp};
use crate::sampler::ChainState;
use crate::{CountMatrix, Error, Result};

/// Likelihood mode: the full zero-inflated model, or the ablation that
/// forces every taxon at-risk (plain Dirichlet-multinomial).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroInflation {
    Zidm,
    Dm,
}

/// Prior on the number of mixture components, evaluated on {1, …, K_max}
/// after truncation and renormalization.
#[derive(Debug, Clone, PartialEq)]
pub enum KPrior {
    /// Induced by independent Bernoulli(π) component-inclusion indicators
    /// conditioned on at least one inclusion; the binomial size is K_max.
    ZeroTruncBinomial { inclusion_prob: f64 },
    /// Zero-truncated Poisson with the given rate.
    TruncatedPoisson { rate: f64 },
    /// Geometric number of trials: pmf ∝ (1−p)^(k−1) p.
    Geometric { success_prob: f64 },
    /// Beta-negative-binomial on K−1 with parameters (a, b, r).
    BetaNegBinomial { a: f64, b: f64, r: f64 },
}

impl KPrior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            KPrior::ZeroTruncBinomial { inclusion_prob } => {
                inclusion_prob > 0.0 && inclusion_prob < 1.0
            }
            KPrior::TruncatedPoisson { rate } => rate > 0.0 && rate.is_finite(),
            KPrior::Geometric { success_prob } => success_prob > 0.0 && success_prob < 1.0,
            KPrior::BetaNegBinomial { a, b, r } => a > 0.0 && b > 0.0 && r > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "prior parameters out of range: {self:?}"
            )))
        }
    }

    /// Normalized log pmf over k = 1..=k_max, indexed by k−1.
    pub fn log_pmf_table(&self, k_max: usize) -> Vec<f64> {
        match *self {
            KPrior::ZeroTruncBinomial { inclusion_prob } => {
                // Closed form: the truncation constant is 1 − (1−π)^K_max.
                let lp = inclusion_prob.ln();
                let lq = (-inclusion_prob).ln_1p();
                let log_norm = (-(k_max as f64 * lq).exp()).ln_1p();
                (1..=k_max)
                    .map(|k| {
                        ln_choose(k_max as u64, k as u64) + k as f64 * lp
                            + (k_max - k) as f64 * lq
                            - log_norm
                    })
                    .collect()
            }
            KPrior::TruncatedPoisson { rate } => normalize(
                (1..=k_max)
                    .map(|k| k as f64 * rate.ln() - ln_gamma(k as f64 + 1.0))
                    .collect(),
            ),
            KPrior::Geometric { success_prob } => normalize(
                (1..=k_max)
                    .map(|k| (k - 1) as f64 * (-success_prob).ln_1p() + success_prob.ln())
                    .collect(),
            ),
            KPrior::BetaNegBinomial { a, b, r } => normalize(
                (1..=k_max)
                    .map(|k| {
                        let x = (k - 1) as f64;
                        ln_gamma(r + x) - ln_gamma(x + 1.0) - ln_gamma(r) + ln_beta(a + r, b + x)
                            - ln_beta(a, b)
                    })
                    .collect(),
            ),
        }
    }
}

fn normalize(mut raw: Vec<f64>) -> Vec<f64> {
    let norm = log_sum_exp(&raw);
    for v in &mut raw {
        *v -= norm;
    }
    raw
}

/// Log pmf of the component-count prior at k, support {1, …, k_max}.
pub fn log_k_prior(k: usize, prior: &KPrior, k_max: usize) -> Result<f64> {
    if k < 1 || k > k_max {
        return Err(Error::KOutOfSupport { k, k_max });
    }
    Ok(prior.log_pmf_table(k_max)[k - 1])
}

/// Fixed model constants, independent of any particular data set.
///
/// `Hyperparams` couples these with the data-derived prior means μ.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperSettings {
    /// Maximum number of potential components K_max.
    pub k_max: usize,
    /// Gamma shape for active-component weights (the symmetric Dirichlet
    /// concentration of the normalized weights).
    pub theta: f64,
    /// Prior on the number of components.
    pub k_prior: KPrior,
    /// Beta prior for the per-taxon at-risk probabilities.
    pub alpha_gamma: f64,
    pub beta_gamma: f64,
    /// Prior-mean scaling: the hypothetical total read count behind μ_j.
    pub scale_s: f64,
    /// Prior variance of the component log-concentrations ξ.
    pub sigma2: f64,
    /// Random-walk proposal variance for the ξ updates.
    pub sigma2_mh: f64,
    pub zero_inflation: ZeroInflation,
}

impl Default for HyperSettings {
    /// Defaults mirror the application study: K_max = 10, θ = 0.1,
    /// π_λ = 0.5, α_γ = β_γ = 1, s = 200, σ² = 10, σ²_MH = 1, ZIDM.
    fn default() -> Self {
        HyperSettings {
            k_max: 10,
            theta: 0.1,
            k_prior: KPrior::ZeroTruncBinomial {
                inclusion_prob: 0.5,
            },
            alpha_gamma: 1.0,
            beta_gamma: 1.0,
            scale_s: 200.0,
            sigma2: 10.0,
            sigma2_mh: 1.0,
            zero_inflation: ZeroInflation::Zidm,
        }
    }
}

impl HyperSettings {
    pub fn validate(&self) -> Result<()> {
        if self.k_max < 1 {
            return Err(Error::InvalidArgument("k_max must be at least 1".into()));
        }
        for (name, v) in [
            ("theta", self.theta),
            ("alpha_gamma", self.alpha_gamma),
            ("beta_gamma", self.beta_gamma),
            ("scale_s", self.scale_s),
            ("sigma2", self.sigma2),
            ("sigma2_mh", self.sigma2_mh),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        self.k_prior.validate()
    }

    /// Bind these settings to a data set, deriving the prior means μ.
    pub fn with_data(&self, data: &CountMatrix) -> Result<Hyperparams> {
        self.validate()?;
        let (mu, fallback) = derive_mu(data, self.scale_s, data.n_taxa());
        Ok(Hyperparams {
            settings: self.clone(),
            mu,
            mu_fallback_taxa: fallback,
            log_k_pmf: self.k_prior.log_pmf_table(self.k_max),
        })
    }
}

/// μ_j = log(s · mean observed relative abundance of taxon j). All-zero
/// taxa would give μ_j = −∞; they get a half-read pseudo-abundance
/// log(s · 0.5 / Σ_i depth_i) instead and are reported so callers can warn.
/// A matrix with zero total depth (prior-only runs) falls back to the
/// uniform composition log(s / J).
fn derive_mu(data: &CountMatrix, scale_s: f64, n_taxa: usize) -> (Vec<f64>, Vec<usize>) {
    let ra = data.mean_relative_abundance();
    let total = data.total_depth();
    let mut fallback_taxa = Vec::new();
    let mu = ra
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            if r > 0.0 {
                (scale_s * r).ln()
            } else {
                fallback_taxa.push(j);
                if total > 0 {
                    (scale_s * 0.5 / total as f64).ln()
                } else {
                    (scale_s / n_taxa as f64).ln()
                }
            }
        })
        .collect();
    (mu, fallback_taxa)
}

/// All fixed model constants plus the data-derived prior means μ_j.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    settings: HyperSettings,
    mu: Vec<f64>,
    mu_fallback_taxa: Vec<usize>,
    log_k_pmf: Vec<f64>,
}

impl Hyperparams {
    pub fn settings(&self) -> &HyperSettings {
        &self.settings
    }

    pub fn k_max(&self) -> usize {
        self.settings.k_max
    }

    pub fn theta(&self) -> f64 {
        self.settings.theta
    }

    pub fn alpha_gamma(&self) -> f64 {
        self.settings.alpha_gamma
    }

    pub fn beta_gamma(&self) -> f64 {
        self.settings.beta_gamma
    }

    pub fn sigma2(&self) -> f64 {
        self.settings.sigma2
    }

    pub fn sigma2_mh(&self) -> f64 {
        self.settings.sigma2_mh
    }

    pub fn zero_inflation(&self) -> ZeroInflation {
        self.settings.zero_inflation
    }

    pub fn k_prior(&self) -> &KPrior {
        &self.settings.k_prior
    }

    /// Prior means of the component log-concentrations.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Taxa whose μ_j came from the half-read pseudo-abundance fallback.
    pub fn mu_fallback_taxa(&self) -> &[usize] {
        &self.mu_fallback_taxa
    }

    /// Cached log pmf of the component-count prior at k ∈ {1, …, K_max}.
    pub fn log_k_pmf(&self, k: usize) -> f64 {
        self.log_k_pmf[k - 1]
    }
}

/// Marginal Dirichlet-multinomial log likelihood of one count row given its
/// at-risk pattern and component log-concentrations.
///
/// The multinomial coefficient cancels in every ratio the sampler forms, so
/// `include_coef` lets hot paths omit it; normalization checks need it on.
pub fn log_dm_marginal(z: &[u32], gamma: &[bool], xi: &[f64], include_coef: bool) -> Result<f64> {
    if z.len() != gamma.len() || z.len() != xi.len() {
        return Err(Error::Dimension(format!(
            "log_dm_marginal: z {}, gamma {}, xi {}",
            z.len(),
            gamma.len(),
            xi.len()
        )));
    }
    let mut n: u64 = 0;
    for (j, &zj) in z.iter().enumerate() {
        if zj > 0 && !gamma[j] {
            return Err(Error::StructuralZeroConflict { taxon: j });
        }
        n += zj as u64;
    }
    if n == 0 {
        // A depth-zero row has likelihood one regardless of γ.
        return Ok(0.0);
    }
    if !gamma.iter().any(|&g| g) {
        return Err(Error::NoAtRiskTaxa);
    }
    let mut a_sum = 0.0;
    let mut term = 0.0;
    for j in 0..z.len() {
        if gamma[j] {
            let a = xi[j].exp();
            a_sum += a;
            if z[j] > 0 {
                term += ln_gamma(a + z[j] as f64) - ln_gamma(a);
            }
        }
    }
    let nf = n as f64;
    let mut out = ln_gamma(a_sum) - ln_gamma(a_sum + nf) + term;
    if include_coef {
        out += ln_gamma(nf + 1.0);
        for &zj in z {
            if zj > 1 {
                out -= ln_gamma(zj as f64 + 1.0);
            }
        }
    }
    Ok(out)
}

/// Component-level relative abundances exp(ξ_j) / Σ exp(ξ_j'), computed with
/// max-shifted exponentiation.
pub fn cluster_relative_abundance(xi: &[f64]) -> Vec<f64> {
    let max = xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = xi.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Log density of one ξ row under its independent Normal(μ_j, σ²) priors.
pub fn log_prior_xi(xi: &[f64], mu: &[f64], sigma2: f64) -> f64 {
    xi.iter()
        .zip(mu)
        .map(|(&x, &m)| ln_normal_pdf(x, m, sigma2))
        .sum()
}

/// Full-conditional log odds of γ_ij = 1 versus 0 for a zero-count cell,
/// with the at-risk probabilities integrated out:
///
/// ```text
/// log [(α_γ + n_{·j,−i}) / (β_γ + (N−1) − n_{·j,−i})] + Δ log-likelihood,
/// ```
///
/// where n_{·j,−i} counts the other samples currently at risk for taxon j
/// and the likelihood difference compares the sample's marginal DM under
/// γ_ij = 1 versus 0 (only the concentration total changes; z_ij = 0).
pub fn log_gamma_conditional_ratio(
    i: usize,
    j: usize,
    state: &ChainState,
    data: &CountMatrix,
    hyper: &Hyperparams,
) -> Result<f64> {
    if data.count(i, j) > 0 {
        return Err(Error::GammaForcedPositive { row: i, col: j });
    }
    let n = data.n_samples();
    let n_minus: usize = (0..n).filter(|&i2| i2 != i && state.gamma(i2, j)).count();
    let prior = ((hyper.alpha_gamma() + n_minus as f64)
        / (hyper.beta_gamma() + (n - 1) as f64 - n_minus as f64))
        .ln();
    let depth = data.depth(i);
    if depth == 0 {
        return Ok(prior);
    }
    let xi_row = &state.xi[state.c[i]];
    let a_j = xi_row[j].exp();
    let mut a_without = 0.0;
    for j2 in 0..data.n_taxa() {
        if j2 != j && state.gamma(i, j2) {
            a_without += xi_row[j2].exp();
        }
    }
    let a_with = a_without + a_j;
    let nf = depth as f64;
    let delta_ll = ln_gamma(a_with) - ln_gamma(a_with + nf) - ln_gamma(a_without)
        + ln_gamma(a_without + nf);
    Ok(prior + delta_ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::ChainState;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b}");
    }

    #[test]
    fn dm_uniform_pair_is_one_third() {
        let ll = log_dm_marginal(&[1, 1], &[true, true], &[0.0, 0.0], true).unwrap();
        close(ll, (1f64 / 3.0).ln(), 1e-12);
    }

    #[test]
    fn dm_single_active_category_is_certain() {
        for xi in [-2.0, 0.0, 3.7] {
            let ll = log_dm_marginal(&[5, 0], &[true, false], &[xi, 0.0], true).unwrap();
            close(ll, 0.0, 1e-12);
        }
    }

    #[test]
    fn dm_structural_zero_conflict_errors() {
        let err = log_dm_marginal(&[3, 0], &[false, true], &[0.0, 0.0], true).unwrap_err();
        assert!(matches!(err, Error::StructuralZeroConflict { taxon: 0 }));
    }

    #[test]
    fn dm_zero_depth_is_certain() {
        let ll = log_dm_marginal(&[0, 0], &[false, false], &[0.0, 0.0], true).unwrap();
        close(ll, 0.0, 1e-15);
    }

    /// All z compositions with fixed depth and support, recursively.
    fn compositions(depth: u32, slots: usize) -> Vec<Vec<u32>> {
        if slots == 1 {
            return vec![vec![depth]];
        }
        let mut out = Vec::new();
        for first in 0..=depth {
            for mut rest in compositions(depth - first, slots - 1) {
                let mut v = vec![first];
                v.append(&mut rest);
                out.push(v);
            }
        }
        out
    }

    #[test]
    fn dm_normalizes_by_enumeration() {
        let xi_pool = [[0.3, -0.8, 1.1], [0.0, 0.0, 0.0], [-1.5, 2.0, 0.4]];
        let gammas: [[bool; 3]; 3] = [
            [true, true, true],
            [true, false, true],
            [false, true, false],
        ];
        for xi in &xi_pool {
            for gamma in &gammas {
                let active: Vec<usize> = (0..3).filter(|&j| gamma[j]).collect();
                for depth in 1..=4u32 {
                    let mut total = 0.0;
                    for comp in compositions(depth, active.len()) {
                        let mut z = [0u32; 3];
                        for (slot, &j) in active.iter().enumerate() {
                            z[j] = comp[slot];
                        }
                        total += log_dm_marginal(&z, gamma, xi, true).unwrap().exp();
                    }
                    close(total, 1.0, 1e-10);
                }
            }
        }
    }

    #[test]
    fn dm_invariant_under_joint_permutation() {
        let z = [4, 0, 7, 1];
        let gamma = [true, false, true, true];
        let xi = [0.2, 1.0, -0.5, 0.9];
        let base = log_dm_marginal(&z, &gamma, &xi, true).unwrap();
        let perm = [2usize, 0, 3, 1];
        let zp: Vec<u32> = perm.iter().map(|&p| z[p]).collect();
        let gp: Vec<bool> = perm.iter().map(|&p| gamma[p]).collect();
        let xp: Vec<f64> = perm.iter().map(|&p| xi[p]).collect();
        close(
            log_dm_marginal(&zp, &gp, &xp, true).unwrap(),
            base,
            1e-12,
        );
    }

    #[test]
    fn ztb_matches_direct_evaluation() {
        let prior = KPrior::ZeroTruncBinomial {
            inclusion_prob: 0.5,
        };
        close(
            log_k_prior(10, &prior, 10).unwrap(),
            (1f64 / 1023.0).ln(),
            1e-12,
        );
        close(log_k_prior(1, &prior, 1).unwrap(), 0.0, 1e-12);
        assert!(matches!(
            log_k_prior(11, &prior, 10),
            Err(Error::KOutOfSupport { .. })
        ));
        assert!(matches!(
            log_k_prior(0, &prior, 10),
            Err(Error::KOutOfSupport { .. })
        ));
    }

    #[test]
    fn k_priors_normalize() {
        let priors = [
            KPrior::ZeroTruncBinomial {
                inclusion_prob: 0.2,
            },
            KPrior::ZeroTruncBinomial {
                inclusion_prob: 0.9,
            },
            KPrior::TruncatedPoisson { rate: 3.0 },
            KPrior::Geometric { success_prob: 0.25 },
            KPrior::BetaNegBinomial {
                a: 1.0,
                b: 4.0,
                r: 3.0,
            },
        ];
        for prior in &priors {
            for k_max in [1usize, 2, 7, 10] {
                let total: f64 = (1..=k_max)
                    .map(|k| log_k_prior(k, prior, k_max).unwrap().exp())
                    .sum();
                close(total, 1.0, 1e-12);
            }
        }
    }

    #[test]
    fn relative_abundance_examples() {
        let u = cluster_relative_abundance(&[0.0; 4]);
        for v in &u {
            close(*v, 0.25, 1e-12);
        }
        let two = cluster_relative_abundance(&[2f64.ln(), 0.0]);
        close(two[0], 2.0 / 3.0, 1e-12);
        close(two[1], 1.0 / 3.0, 1e-12);
        let big = cluster_relative_abundance(&[1000.0, 0.0]);
        assert!(big[0].is_finite() && big[1].is_finite());
        close(big[0], 1.0, 1e-12);
        assert!(big[1] < 1e-300);
    }

    #[test]
    fn relative_abundance_shift_invariant() {
        let xi = [0.4, -1.2, 2.2, 0.0];
        let shifted: Vec<f64> = xi.iter().map(|x| x + 37.5).collect();
        let a = cluster_relative_abundance(&xi);
        let b = cluster_relative_abundance(&shifted);
        for (x, y) in a.iter().zip(&b) {
            close(*x, *y, 1e-12);
        }
        close(a.iter().sum::<f64>(), 1.0, 1e-12);
    }

    #[test]
    fn xi_prior_standard_normal_values() {
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        close(log_prior_xi(&[0.0], &[0.0], 1.0), -half_log_2pi, 1e-12);
        close(
            log_prior_xi(&[1.0], &[0.0], 1.0),
            -half_log_2pi - 0.5,
            1e-12,
        );
    }

    #[test]
    fn xi_prior_sums_per_coordinate() {
        let xi = [0.3, -0.2, 1.9, 0.0, -4.0, 2.2, 0.1, 0.7, -1.1, 5.0];
        let mu = [0.0, 1.0, -1.0, 0.5, 0.2, -0.3, 2.0, 0.0, 0.9, 4.0];
        let s2 = 2.5;
        let direct: f64 = (0..10)
            .map(|j| log_prior_xi(&xi[j..=j], &mu[j..=j], s2))
            .sum();
        close(log_prior_xi(&xi, &mu, s2), direct, 1e-12);
    }

    fn tiny_state(c: Vec<usize>, gamma: Vec<bool>, xi: Vec<Vec<f64>>) -> ChainState {
        let k = xi.len();
        let k_plus = {
            let mut seen: Vec<usize> = c.clone();
            seen.sort_unstable();
            seen.dedup();
            seen.len()
        };
        ChainState {
            c,
            gamma,
            xi,
            log_psi: vec![0.0; k],
            k_plus,
            n_taxa: 2,
        }
    }

    #[test]
    fn gamma_ratio_zero_depth_is_prior_odds() {
        let data = CountMatrix::from_rows(vec![vec![0, 0], vec![0, 3]]).unwrap();
        let hyper = HyperSettings {
            alpha_gamma: 2.0,
            beta_gamma: 5.0,
            ..Default::default()
        }
        .with_data(&data)
        .unwrap();
        let state = tiny_state(
            vec![0, 0],
            vec![true, true, true, true],
            vec![vec![0.4, -0.3]],
        );
        let got = log_gamma_conditional_ratio(0, 0, &state, &data, &hyper).unwrap();
        // n_{·j,−i} = 1 (the other sample is at risk for taxon 0).
        close(got, (3.0f64 / 5.0).ln(), 1e-12);
    }

    #[test]
    fn gamma_ratio_rejects_positive_count() {
        let data = CountMatrix::from_rows(vec![vec![1, 0], vec![0, 3]]).unwrap();
        let hyper = HyperSettings::default().with_data(&data).unwrap();
        let state = tiny_state(
            vec![0, 0],
            vec![true, true, true, true],
            vec![vec![0.0, 0.0]],
        );
        assert!(matches!(
            log_gamma_conditional_ratio(0, 0, &state, &data, &hyper),
            Err(Error::GammaForcedPositive { row: 0, col: 0 })
        ));
    }

    /// Brute-force check: the conditional odds must equal the ratio of the
    /// full joint density (per-column Beta-Bernoulli marginal times the DM
    /// likelihood of every row) evaluated at γ_ij = 1 versus 0.
    fn joint_log_density(
        gammas: &[bool],
        data: &CountMatrix,
        state: &ChainState,
        hyper: &Hyperparams,
    ) -> f64 {
        let n = data.n_samples();
        let j_cols = data.n_taxa();
        let mut out = 0.0;
        for j in 0..j_cols {
            let n_j = (0..n).filter(|&i| gammas[i * j_cols + j]).count() as f64;
            out += ln_beta(
                hyper.alpha_gamma() + n_j,
                hyper.beta_gamma() + n as f64 - n_j,
            ) - ln_beta(hyper.alpha_gamma(), hyper.beta_gamma());
        }
        for i in 0..n {
            let row_gamma: Vec<bool> = (0..j_cols).map(|j| gammas[i * j_cols + j]).collect();
            out += log_dm_marginal(data.row(i), &row_gamma, &state.xi[state.c[i]], true).unwrap();
        }
        out
    }

    #[test]
    fn gamma_ratio_matches_joint_ratio_oracle() {
        // Several small instances with N ≤ 3, J ≤ 3.
        let cases: Vec<(Vec<Vec<u32>>, Vec<usize>)> = vec![
            (vec![vec![0, 3], vec![2, 1]], vec![0, 0]),
            (vec![vec![0, 2], vec![1, 0]], vec![0, 1]),
            (
                vec![vec![0, 1, 4], vec![2, 0, 0], vec![0, 0, 3]],
                vec![0, 1, 0],
            ),
        ];
        for (rows, c) in cases {
            let data = CountMatrix::from_rows(rows).unwrap();
            let n = data.n_samples();
            let jc = data.n_taxa();
            let k = c.iter().max().unwrap() + 1;
            let xi: Vec<Vec<f64>> = (0..k)
                .map(|kk| (0..jc).map(|j| 0.3 * (kk + 1) as f64 - 0.2 * j as f64).collect())
                .collect();
            let hyper = HyperSettings {
                alpha_gamma: 1.5,
                beta_gamma: 2.5,
                ..Default::default()
            }
            .with_data(&data)
            .unwrap();
            let mut gamma = vec![true; n * jc];
            // Flip one other zero cell off so both at-risk counts appear.
            if data.count(n - 1, 0) == 0 {
                gamma[(n - 1) * jc] = false;
            }
            let mut state = ChainState {
                c: c.clone(),
                gamma: gamma.clone(),
                xi,
                log_psi: vec![0.0; k],
                k_plus: k,
                n_taxa: jc,
            };
            for i in 0..n {
                for j in 0..jc {
                    if data.count(i, j) > 0 {
                        continue;
                    }
                    state.gamma = gamma.clone();
                    let got = log_gamma_conditional_ratio(i, j, &state, &data, &hyper).unwrap();
                    let mut g1 = gamma.clone();
                    g1[i * jc + j] = true;
                    let mut g0 = gamma.clone();
                    g0[i * jc + j] = false;
                    let want = joint_log_density(&g1, &data, &state, &hyper)
                        - joint_log_density(&g0, &data, &state, &hyper);
                    close(got, want, 1e-10);
                }
            }
        }
    }
}
