//! Runs a configured experiment and writes its outputs.
//!
//! Every data file is deterministic in `(config, seed)`. `summary.json` also
//! carries the wall time, and `manifest.json` lists every other file with
//! its SHA-256.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bdenet::components::decompose_components;
use bdenet::engine::{run, run_with_traces, write_transitions_csv, CycleOutcome, Period, Variant};
use bdenet::observables::{
    ensemble_average, log_binned_histogram, write_histogram_csv, EnsembleOptions, EnsembleStats,
};
use bdenet::rng::replica_seed;
use bdenet::theory::solve_v;
use bdenet::topology::Network;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, TopologyKind};
use crate::overlay::write_curve;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Ensemble,
    Components,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variant: String,
    pub topology: String,
    #[serde(rename = "N")]
    pub nodes: usize,
    pub n_or_z: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_c: f64,
    #[serde(rename = "N_s")]
    pub replicas: usize,
    pub seed: u64,
    /// Mean over replicas with a detected cycle.
    #[serde(rename = "T_trans_days")]
    pub t_trans_days: Option<f64>,
    /// 0 for a fixed point.
    pub period_days: Option<f64>,
    pub rho_inf: Option<f64>,
    /// Replicas whose cycle search hit the detection horizon.
    pub exhausted: usize,
    pub wall_time_s: f64,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn checksums(&self) -> BTreeMap<String, String> {
        self.files.iter().map(|e| (e.path.clone(), e.sha256.clone())).collect()
    }
}

struct Outputs {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    fn write<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let path = self.dir.join(name);
        fs::write(&path, &buf).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            sha256: format!("{:x}", Sha256::digest(&buf)),
            bytes: buf.len() as u64,
        });
        Ok(())
    }

    fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.path.clone()).collect()
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Free => "free",
        Variant::Forced => "forced",
    }
}

fn summary_for(config: &ExperimentConfig, net: Option<&Network>) -> Summary {
    Summary {
        variant: variant_name(config.variant).to_string(),
        topology: config.topology.name().to_string(),
        nodes: config.nodes,
        n_or_z: config.n_or_z(net),
        tau_min: config.tau_min,
        tau_max: if config.delay_mode.is_random() {
            config.tau_max
        } else {
            config.tau_min
        },
        tau_c: config.tau_c,
        replicas: config.replicas,
        seed: config.seed,
        t_trans_days: None,
        period_days: None,
        rho_inf: None,
        exhausted: 0,
        wall_time_s: 0.0,
        files: Vec::new(),
    }
}

fn period_days(info: &bdenet::engine::CycleInfo) -> f64 {
    match info.period() {
        Period::Constant => 0.0,
        Period::Days(d) => d,
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn fill_cycle_summary(summary: &mut Summary, cycles: &[Option<CycleOutcome>]) {
    let found: Vec<_> = cycles.iter().flatten().filter_map(|c| c.found()).collect();
    summary.t_trans_days = mean(found.iter().map(|c| c.transient_days()));
    summary.period_days = mean(found.iter().map(|c| period_days(c)));
    summary.rho_inf = mean(found.iter().map(|c| c.rho_inf));
    summary.exhausted = cycles
        .iter()
        .filter(|c| matches!(c, Some(CycleOutcome::Exhausted { .. })))
        .count();
}

fn write_overlays(config: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    for overlay in &config.overlays {
        let curve = overlay.curve(config)?;
        out.write(&format!("overlay_{}.csv", overlay.name()), |b| {
            write_curve(&curve, b).map_err(io)
        })?;
    }
    Ok(())
}

/// Runs `config` in `mode`, writing into `config.out`.
pub fn run_experiment(config: &ExperimentConfig, mode: Mode) -> Result<Manifest, CliError> {
    let started = Instant::now();
    let template = config.template()?;
    let mut out = Outputs::new(&config.out)?;
    let mut summary;

    match mode {
        Mode::Simulate => {
            let spec = template.instantiate(replica_seed(config.seed, 0))?;
            let record = if config.traces {
                let (record, transitions) = run_with_traces(&spec)?;
                out.write("traces.csv", |b| {
                    Ok(write_transitions_csv(&transitions, &spec.grid, b)?)
                })?;
                record
            } else {
                run(&spec)?
            };
            let cycle = if config.detect_cycles {
                Some(spec.compile()?.detect_cycle(config.detection_horizon))
            } else {
                None
            };
            out.write("trajectory.csv", |b| Ok(record.write_csv(b)?))?;
            out.write("network.edges", |b| Ok(spec.net.write_edge_list(b)?))?;
            out.write("delays.txt", |b| Ok(spec.delays.write_text(&spec.net, b)?))?;
            write_overlays(config, &mut out)?;
            summary = summary_for(config, Some(&spec.net));
            fill_cycle_summary(&mut summary, &[cycle]);
        }
        Mode::Ensemble => {
            let options = EnsembleOptions {
                workers: config.workers,
                detection_horizon: config.detect_cycles.then_some(config.detection_horizon),
            };
            let stats = ensemble_average(&template, config.replicas, config.seed, options)?;
            out.write("ensemble.csv", |b| Ok(stats.write_csv(b)?))?;
            if config.detect_cycles {
                write_distributions(&stats, &mut out)?;
            }
            write_overlays(config, &mut out)?;
            summary = summary_for(config, None);
            fill_cycle_summary(&mut summary, &stats.cycles);
        }
        Mode::Components => {
            let spec = template.instantiate(replica_seed(config.seed, 0))?;
            write_components(config, &spec.net, &mut out)?;
            out.write("network.edges", |b| Ok(spec.net.write_edge_list(b)?))?;
            summary = summary_for(config, Some(&spec.net));
        }
    }

    summary.files = out.names();
    summary.wall_time_s = started.elapsed().as_secs_f64();
    out.write("summary.json", |b| {
        serde_json::to_writer_pretty(&mut *b, &summary).map_err(|e| CliError::Runtime(e.to_string()))?;
        b.push(b'\n');
        Ok(())
    })?;
    let manifest = Manifest { files: out.entries };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(config.out.join("manifest.json"), text + "\n").map_err(io)?;
    Ok(manifest)
}

fn write_distributions(stats: &EnsembleStats, out: &mut Outputs) -> Result<(), CliError> {
    out.write("distribution.csv", |b| Ok(stats.write_distribution_csv(b)?))?;
    let series = [
        ("hist_T_trans.csv", stats.transients_days()),
        ("hist_period.csv", stats.periods_days()),
        ("hist_rho_inf.csv", stats.rho_infs()),
    ];
    for (name, values) in series {
        let bins = log_binned_histogram(&values, 5);
        out.write(name, |b| Ok(write_histogram_csv(&bins, b)?))?;
    }
    Ok(())
}

fn write_components(config: &ExperimentConfig, net: &Network, out: &mut Outputs) -> Result<(), CliError> {
    let d = decompose_components(net);
    let n = net.len() as f64;
    let mut rows: Vec<(&str, f64)> = vec![
        ("N", n),
        ("edges", net.edge_count() as f64),
        ("mean_in_degree", net.edge_count() as f64 / n.max(1.0)),
        ("scc_count", d.scc_count() as f64),
        ("wcc_count", d.wcc_count() as f64),
        ("giant_strong", d.giant.strong as f64),
        ("giant_in", d.giant.in_component as f64),
        ("giant_out", d.giant.out_component as f64),
        ("giant_weak", d.giant.weak as f64),
        ("giant_tendrils", d.giant.tendrils as f64),
        ("mean_out_size", d.mean_out_size()),
    ];
    if config.topology == TopologyKind::Drg {
        let g = solve_v(config.z.unwrap_or(0.0))?;
        rows.extend([
            ("predicted_strong", g.s_sc * n),
            ("predicted_in", g.s_in * n),
            ("predicted_out", g.s_out * n),
            ("predicted_weak", g.s_w * n),
        ]);
    }
    out.write("components.csv", |b| {
        use std::io::Write;
        writeln!(b, "key,value").map_err(io)?;
        for (k, v) in &rows {
            writeln!(b, "{k},{v}").map_err(io)?;
        }
        Ok(())
    })?;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &s in &d.scc_sizes {
        *counts.entry(s).or_default() += 1;
    }
    out.write("scc_sizes.csv", |b| {
        use std::io::Write;
        writeln!(b, "size,count").map_err(io)?;
        for (s, c) in &counts {
            writeln!(b, "{s},{c}").map_err(io)?;
        }
        Ok(())
    })
}
