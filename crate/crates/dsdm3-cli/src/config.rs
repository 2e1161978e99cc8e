//! Flat key-value run configuration.
//!
//! A config is a single flat JSON object; every key has a default, unknown
//! keys are rejected, and `--set KEY=VALUE` overrides individual entries
//! (values parse as JSON scalars, falling back to strings). Dedicated
//! flags (`--seed`, `--chains`, `--scenario`, paths) override last.

use dsdm3::{Error, HyperSettings, KPrior, Result, SamplerConfig, ZeroInflation};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    // Model constants (defaults mirror the application study).
    pub k_max: usize,
    pub theta: f64,
    pub pi_lambda: f64,
    pub alpha_gamma: f64,
    pub beta_gamma: f64,
    pub scale_s: f64,
    pub sigma2: f64,
    pub sigma2_mh: f64,
    /// "ztb" | "poisson:RATE" | "geometric:P" | "bnb:A,B,R"
    pub k_prior: String,
    /// "zidm" | "dm"
    pub zero_inflation: String,
    // Chain configuration.
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub record_xi: bool,
    pub chains: usize,
    // Post-processing.
    pub salso_runs: usize,
    /// Retained draws to drop at summarize time (on top of the fit's own
    /// burn-in).
    pub summarize_burn_in: usize,
    // Simulation.
    pub scenario: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k_max: 10,
            theta: 0.1,
            pi_lambda: 0.5,
            alpha_gamma: 1.0,
            beta_gamma: 1.0,
            scale_s: 200.0,
            sigma2: 10.0,
            sigma2_mh: 1.0,
            k_prior: "ztb".into(),
            zero_inflation: "zidm".into(),
            n_iter: 15_000,
            burn_in: 5_000,
            thin: 1,
            seed: 1,
            record_xi: false,
            chains: 1,
            salso_runs: 16,
            summarize_burn_in: 0,
            scenario: None,
        }
    }
}

impl RunConfig {
    /// Defaults, then the config file (if any), then `--set` overrides.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<RunConfig> {
        let mut value = serde_json::to_value(RunConfig::default()).expect("serializable");
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            let file_value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Json {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
            let obj = file_value.as_object().ok_or_else(|| Error::Json {
                path: path.display().to_string(),
                message: "config must be a flat JSON object".into(),
            })?;
            for (k, v) in obj {
                value
                    .as_object_mut()
                    .expect("object")
                    .insert(k.clone(), v.clone());
            }
        }
        for set in sets {
            let (key, raw) = set.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("--set expects KEY=VALUE, got '{set}'"))
            })?;
            let parsed: serde_json::Value = serde_json::from_str(raw)
                .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            value
                .as_object_mut()
                .expect("object")
                .insert(key.to_string(), parsed);
        }
        let config: RunConfig =
            serde_json::from_value(value).map_err(|e| Error::InvalidArgument(format!(
                "invalid configuration: {e}"
            )))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper_settings()?.validate()?;
        self.sampler_config().validate()?;
        if self.chains == 0 {
            return Err(Error::InvalidArgument("chains must be at least 1".into()));
        }
        if self.salso_runs == 0 {
            return Err(Error::InvalidArgument(
                "salso_runs must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn parsed_k_prior(&self) -> Result<KPrior> {
        let s = self.k_prior.trim();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let floats = |a: Option<&str>, n: usize| -> Result<Vec<f64>> {
            let raw = a.ok_or_else(|| {
                Error::InvalidArgument(format!("k_prior '{s}' needs {n} parameter(s)"))
            })?;
            let vals: Vec<f64> = raw
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidArgument(format!("invalid k_prior parameters '{raw}'")))?;
            if vals.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "k_prior '{name}' needs {n} parameter(s), got {}",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        match name {
            "ztb" => Ok(KPrior::ZeroTruncBinomial {
                inclusion_prob: self.pi_lambda,
            }),
            "poisson" => Ok(KPrior::TruncatedPoisson {
                rate: floats(args, 1)?[0],
            }),
            "geometric" => Ok(KPrior::Geometric {
                success_prob: floats(args, 1)?[0],
            }),
            "bnb" => {
                let v = floats(args, 3)?;
                Ok(KPrior::BetaNegBinomial {
                    a: v[0],
                    b: v[1],
                    r: v[2],
                })
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown k_prior '{other}' (expected ztb, poisson:RATE, geometric:P or bnb:A,B,R)"
            ))),
        }
    }

    pub fn hyper_settings(&self) -> Result<HyperSettings> {
        let zero_inflation = match self.zero_inflation.as_str() {
            "zidm" => ZeroInflation::Zidm,
            "dm" => ZeroInflation::Dm,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown zero_inflation '{other}' (expected zidm or dm)"
                )))
            }
        };
        Ok(HyperSettings {
            k_max: self.k_max,
            theta: self.theta,
            k_prior: self.parsed_k_prior()?,
            alpha_gamma: self.alpha_gamma,
            beta_gamma: self.beta_gamma,
            scale_s: self.scale_s,
            sigma2: self.sigma2,
            sigma2_mh: self.sigma2_mh,
            zero_inflation,
        })
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            record_xi: self.record_xi,
        }
    }
}
