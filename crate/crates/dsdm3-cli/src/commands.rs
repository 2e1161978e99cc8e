//! The five subcommands: simulate → fit → summarize, plus the ari and
//! diversity utilities. Every command writes a manifest.json carrying the
//! tool version, the seed and the effective configuration; manifests hold
//! no timestamps, so identical invocations are byte-identical (wall times
//! go to stderr).

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use dsdm3::io::{
    attach_xi_sidecar, read_counts_csv, read_draws_csv, read_labels_csv, write_counts_csv,
    write_labels_csv, DrawsCsvWriter, XiSidecarWriter,
};
use dsdm3::posterior::{
    adjusted_rand_index, coclustering_pooled, diversity, posterior_cluster_abundances,
    salso_search, Partition,
};
use dsdm3::sampler::{run_chain_with, PosteriorDraws};
use dsdm3::simgen::{
    bundled_tree, dtm_preset, generate_dtm, generate_scenario, scenario_preset,
    scenario_target_zero_fraction, DtmSpec, DTM_TARGET_ZERO_FRACTION,
};
use dsdm3::{CountMatrix, Error, Result};

use crate::config::RunConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("manifest serialization: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulateManifest {
    pub tool_version: String,
    pub command: String,
    pub scenario: String,
    pub seed: u64,
    pub n_samples: usize,
    pub n_taxa: usize,
    pub n_per_cluster: Vec<usize>,
    pub at_risk_prob: f64,
    pub target_zero_fraction: Option<f64>,
    pub realized_zero_fraction: f64,
    pub config: RunConfig,
}

pub fn cmd_simulate(config: &RunConfig, out: &Path) -> Result<()> {
    let scenario = config
        .scenario
        .clone()
        .ok_or_else(|| Error::InvalidArgument("simulate needs --scenario {1..5|dtm}".into()))?;
    ensure_dir(out)?;
    let (data, n_per_cluster, at_risk_prob, target) = if scenario == "dtm" {
        let spec = DtmSpec {
            seed: config.seed,
            ..dtm_preset(config.seed)
        };
        let tree = bundled_tree();
        let generated = generate_dtm(&tree, &spec)?;
        (
            generated,
            spec.n_per_cluster.clone(),
            spec.at_risk_prob,
            Some(DTM_TARGET_ZERO_FRACTION),
        )
    } else {
        let id: usize = scenario.parse().map_err(|_| {
            Error::InvalidArgument(format!(
                "unknown scenario '{scenario}'; expected 1..=5 or dtm"
            ))
        })?;
        let spec = scenario_preset(id, config.seed)?;
        let generated = generate_scenario(&spec)?;
        (
            generated,
            spec.n_per_cluster.clone(),
            spec.at_risk_prob,
            scenario_target_zero_fraction(id),
        )
    };
    write_counts_csv(&out.join("counts.csv"), &data.counts)?;
    write_labels_csv(
        &out.join("labels.csv"),
        data.counts.sample_ids(),
        &data.truth.one_based(),
    )?;
    let manifest = SimulateManifest {
        tool_version: TOOL_VERSION.into(),
        command: "simulate".into(),
        scenario,
        seed: config.seed,
        n_samples: data.counts.n_samples(),
        n_taxa: data.counts.n_taxa(),
        n_per_cluster,
        at_risk_prob,
        target_zero_fraction: target,
        realized_zero_fraction: data.zero_fraction,
        config: config.clone(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    eprintln!(
        "simulate: {}x{} counts, zero fraction {:.4} -> {}",
        manifest.n_samples,
        manifest.n_taxa,
        manifest.realized_zero_fraction,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub chains: usize,
    pub counts_path: String,
    pub n_samples: usize,
    pub n_taxa: usize,
    pub draws_files: Vec<String>,
    pub xi_files: Vec<String>,
    pub xi_acceptance_rates: Vec<f64>,
    pub mu_fallback_taxa: Vec<String>,
    pub config: RunConfig,
}

pub fn cmd_fit(config: &RunConfig, counts_path: &Path, out: &Path) -> Result<()> {
    let data = read_counts_csv(counts_path)?;
    let hyper = config.hyper_settings()?.with_data(&data)?;
    for &j in hyper.mu_fallback_taxa() {
        eprintln!(
            "fit: warning: taxon '{}' has no observed reads; prior mean uses a half-read pseudo-abundance",
            data.taxon_ids()[j]
        );
    }
    ensure_dir(out)?;
    let sampler_config = config.sampler_config();
    let mut draws_files = Vec::new();
    let mut xi_files = Vec::new();
    let mut rates = Vec::new();
    for chain in 0..config.chains {
        let t0 = Instant::now();
        let draws_name = format!("draws_chain{chain}.csv");
        let draws_path = out.join(&draws_name);
        let mut csv = DrawsCsvWriter::create(&draws_path)?;
        let mut sidecar = if config.record_xi {
            let name = format!("xi_chain{chain}.bin");
            let writer = XiSidecarWriter::create(&out.join(&name), data.n_taxa())?;
            xi_files.push(name);
            Some(writer)
        } else {
            None
        };
        let acceptance = run_chain_with(&data, &hyper, &sampler_config, chain as u64, |rec| {
            if let Some(sidecar) = sidecar.as_mut() {
                sidecar.append(&rec)?;
            }
            csv.append(&rec)
        })?;
        csv.finish()?;
        if let Some(sidecar) = sidecar {
            sidecar.finish()?;
        }
        draws_files.push(draws_name);
        rates.push(acceptance.rate());
        eprintln!(
            "fit: chain {chain} finished in {:.1}s (xi acceptance {:.3})",
            t0.elapsed().as_secs_f64(),
            acceptance.rate()
        );
    }
    let manifest = FitManifest {
        tool_version: TOOL_VERSION.into(),
        command: "fit".into(),
        seed: config.seed,
        chains: config.chains,
        counts_path: counts_path.display().to_string(),
        n_samples: data.n_samples(),
        n_taxa: data.n_taxa(),
        draws_files,
        xi_files,
        xi_acceptance_rates: rates,
        mu_fallback_taxa: hyper
            .mu_fallback_taxa()
            .iter()
            .map(|&j| data.taxon_ids()[j].clone())
            .collect(),
        config: config.clone(),
    };
    write_json(&out.join("manifest.json"), &manifest)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SummarizeManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub fit_dir: String,
    pub counts_path: String,
    pub pooled_records: usize,
    pub dropped_records_per_chain: usize,
    pub salso_runs: usize,
    pub salso_max_blocks: usize,
    pub vi_lower_bound: f64,
    pub k_plus_mode: u32,
    pub n_clusters: usize,
    pub abundance_included: bool,
    pub config: RunConfig,
}

pub fn cmd_summarize(
    config: &RunConfig,
    fit_dir: &Path,
    out: &Path,
    counts_override: Option<&Path>,
) -> Result<()> {
    let fit_manifest: FitManifest = read_json(&fit_dir.join("manifest.json"))?;
    let counts_path = counts_override
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from(&fit_manifest.counts_path));
    let data = read_counts_csv(&counts_path)?;

    // Load every chain, merging sidecars when present.
    let mut chains: Vec<PosteriorDraws> = Vec::new();
    let mut have_xi = !fit_manifest.xi_files.is_empty();
    for (idx, name) in fit_manifest.draws_files.iter().enumerate() {
        let mut draws = read_draws_csv(&fit_dir.join(name))?;
        if let Some(xi_name) = fit_manifest.xi_files.get(idx) {
            attach_xi_sidecar(&mut draws, &fit_dir.join(xi_name))?;
        } else {
            have_xi = false;
        }
        draws.n_taxa = data.n_taxa();
        if draws.n_samples != data.n_samples() {
            return Err(Error::Dimension(format!(
                "{name}: draws over {} samples, counts over {}",
                draws.n_samples,
                data.n_samples()
            )));
        }
        chains.push(draws);
    }

    // Optional extra burn-in on the retained records of each chain.
    let drop = config.summarize_burn_in;
    for draws in &mut chains {
        if drop >= draws.records.len() {
            return Err(Error::InvalidArgument(format!(
                "summarize burn-in {drop} >= {} available draws",
                draws.records.len()
            )));
        }
        draws.records.drain(..drop);
    }
    let pooled = PosteriorDraws {
        n_samples: data.n_samples(),
        n_taxa: data.n_taxa(),
        records: chains.into_iter().flat_map(|c| c.records).collect(),
    };

    ensure_dir(out)?;
    let pm = coclustering_pooled(std::iter::once(&pooled))?;
    let max_k_plus = pooled
        .records
        .iter()
        .map(|r| r.k_plus)
        .max()
        .expect("nonempty") as usize;
    let (partition, objective) =
        salso_search(&pm, config.salso_runs, config.seed, Some(max_k_plus + 1))?;

    write_labels_csv(
        &out.join("partition.csv"),
        data.sample_ids(),
        &partition.one_based(),
    )?;

    // Co-clustering matrix with a sample-id header and row labels.
    {
        let path = out.join("coclustering.csv");
        let file = std::fs::File::create(&path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = std::io::BufWriter::new(file);
        use std::io::Write;
        let io_err = |e| Error::io(path.display().to_string(), e);
        write!(w, "sample_id").map_err(io_err)?;
        for id in data.sample_ids() {
            write!(w, ",{id}").map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
        for i in 0..data.n_samples() {
            write!(w, "{}", data.sample_ids()[i]).map_err(io_err)?;
            for j in 0..data.n_samples() {
                write!(w, ",{}", pm.get(i, j)).map_err(io_err)?;
            }
            writeln!(w).map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
    }

    // K₊ posterior frequencies.
    {
        let path = out.join("kplus.csv");
        let mut text = String::from("k_plus,count,proportion\n");
        let total = pooled.records.len() as f64;
        for (k, count) in pooled.k_plus_frequencies() {
            text.push_str(&format!("{k},{count},{}\n", count as f64 / total));
        }
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    }

    // Per-sample diversity.
    {
        let path = out.join("diversity.csv");
        let mut text = String::from("sample_id,richness,shannon\n");
        for i in 0..data.n_samples() {
            let (richness, shannon) = diversity(data.row(i));
            match shannon {
                Some(s) => text.push_str(&format!("{},{richness},{s}\n", data.sample_ids()[i])),
                None => text.push_str(&format!("{},{richness},\n", data.sample_ids()[i])),
            }
        }
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    }

    // Cluster abundance table when ξ traces were recorded.
    if have_xi {
        let abundances = posterior_cluster_abundances(&pooled, &partition)?;
        let path = out.join("abundance.csv");
        let mut text = String::from("cluster,taxon,mean,lo95,hi95\n");
        for (g, cluster) in abundances.iter().enumerate() {
            for j in 0..data.n_taxa() {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    g + 1,
                    data.taxon_ids()[j],
                    cluster.mean[j],
                    cluster.lo95[j],
                    cluster.hi95[j]
                ));
            }
        }
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    }

    let manifest = SummarizeManifest {
        tool_version: TOOL_VERSION.into(),
        command: "summarize".into(),
        seed: config.seed,
        fit_dir: fit_dir.display().to_string(),
        counts_path: counts_path.display().to_string(),
        pooled_records: pooled.records.len(),
        dropped_records_per_chain: drop,
        salso_runs: config.salso_runs,
        salso_max_blocks: max_k_plus + 1,
        vi_lower_bound: objective,
        k_plus_mode: pooled.k_plus_mode().expect("nonempty"),
        n_clusters: partition.k_plus(),
        abundance_included: have_xi,
        config: config.clone(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    eprintln!(
        "summarize: {} clusters (VI bound {:.4}), K+ mode {} -> {}",
        manifest.n_clusters,
        manifest.vi_lower_bound,
        manifest.k_plus_mode,
        out.display()
    );
    Ok(())
}

/// Order-insensitive join on sample id, then the adjusted Rand index to
/// four decimals on stdout.
pub fn cmd_ari(labels_a: &Path, labels_b: &Path) -> Result<f64> {
    let a = read_labels_csv(labels_a)?;
    let b = read_labels_csv(labels_b)?;
    let b_map: std::collections::HashMap<&str, &str> = b
        .iter()
        .map(|(id, label)| (id.as_str(), label.as_str()))
        .collect();
    let mut missing: Vec<String> = a
        .iter()
        .filter(|(id, _)| !b_map.contains_key(id.as_str()))
        .map(|(id, _)| id.clone())
        .collect();
    let a_ids: std::collections::HashSet<&str> = a.iter().map(|(id, _)| id.as_str()).collect();
    missing.extend(
        b.iter()
            .filter(|(id, _)| !a_ids.contains(id.as_str()))
            .map(|(id, _)| id.clone()),
    );
    if !missing.is_empty() {
        missing.sort();
        return Err(Error::IdMismatch(missing));
    }
    let labels_a: Vec<&str> = a.iter().map(|(_, l)| l.as_str()).collect();
    let labels_b: Vec<&str> = a.iter().map(|(id, _)| b_map[id.as_str()]).collect();
    let pa = Partition::from_labels(&labels_a);
    let pb = Partition::from_labels(&labels_b);
    let ari = adjusted_rand_index(&pa, &pb)?;
    println!("{ari:.4}");
    Ok(ari)
}

/// Per-sample diversity table, to a file or stdout.
pub fn cmd_diversity(counts_path: &Path, out: Option<&Path>) -> Result<()> {
    let data = read_counts_csv(counts_path)?;
    let mut text = String::from("sample_id,richness,shannon\n");
    for i in 0..data.n_samples() {
        let (richness, shannon) = diversity(data.row(i));
        match shannon {
            Some(s) => text.push_str(&format!("{},{richness},{s}\n", data.sample_ids()[i])),
            None => text.push_str(&format!("{},{richness},\n", data.sample_ids()[i])),
        }
    }
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    ensure_dir(parent)?;
                }
            }
            std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Validate a counts matrix for fitting (exposed for tests).
pub fn load_counts(path: &Path) -> Result<CountMatrix> {
    read_counts_csv(path)
}
