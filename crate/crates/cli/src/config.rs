//! Experiment configuration: flat UTF-8 `key = value` lines, `#` starts a
//! comment. One experiment per document.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `variant` | `free` or `forced` | required |
//! | `topology` | `braid`, `drg`, `rg` or `file` | required |
//! | `N` | number of firms | required unless `topology = file` |
//! | `n` | braid in-degree | required for `braid` |
//! | `z` / `p` | mean degree `(N−1)p` or link probability | one required for `drg`/`rg` |
//! | `edge_list` | edge-list path for `topology = file` | |
//! | `delay_mode` | `constant`, `per_edge`, `per_customer`, `per_supplier` | `constant` |
//! | `tau_0` | shorthand for `tau_min = tau_max = tau_0` | |
//! | `tau_min`, `tau_max` | delay bounds in days | 1, 10 |
//! | `damaged_node`, `tau_c` | initial damage | 0, `tau_min` |
//! | `R` | ticks per day | 2 |
//! | `horizon` | simulated days | 1000 |
//! | `N_s` | replicas | 1 |
//! | `seed` | base seed | 0 |
//! | `workers` | worker threads | all cores |
//! | `out` | output directory | `out` |
//! | `overlay` | comma-separated theory curves | none |
//! | `detect_cycles` | detect transient and period | `true` |
//! | `detection_horizon` | cycle search limit in ticks | 10⁷ |
//! | `traces` | write per-node transitions (`simulate`) | `false` |
//! | `tau_star` | minimum delay for the `min_delay` prediction | 2 |

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use bdenet::delays::DelayMode;
use bdenet::engine::{ForcingSchedule, ModelTemplate, TopologySpec, Variant, DEFAULT_DETECTION_HORIZON};
use bdenet::rng::replica_seed;
use bdenet::time::TimeGrid;
use bdenet::topology::Network;

use crate::overlay::Overlay;
use crate::CliError;

const KEYS: &[&str] = &[
    "variant",
    "topology",
    "N",
    "n",
    "z",
    "p",
    "edge_list",
    "delay_mode",
    "tau_0",
    "tau_min",
    "tau_max",
    "damaged_node",
    "tau_c",
    "R",
    "horizon",
    "N_s",
    "seed",
    "workers",
    "out",
    "overlay",
    "detect_cycles",
    "detection_horizon",
    "traces",
    "tau_star",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    Braid,
    Drg,
    Rg,
    File,
}

impl TopologyKind {
    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Braid => "braid",
            TopologyKind::Drg => "drg",
            TopologyKind::Rg => "rg",
            TopologyKind::File => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub topology: TopologyKind,
    pub nodes: usize,
    /// Braid in-degree.
    pub in_degree: Option<usize>,
    /// Mean degree `(N−1)p` of the random graphs.
    pub z: Option<f64>,
    pub edge_list: Option<PathBuf>,
    pub delay_mode: DelayMode,
    pub tau_min: f64,
    pub tau_max: f64,
    pub damaged_node: usize,
    pub tau_c: f64,
    pub resolution: u32,
    pub horizon_days: f64,
    pub replicas: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub overlays: Vec<Overlay>,
    pub detect_cycles: bool,
    pub detection_horizon: u64,
    pub traces: bool,
    pub tau_star: u32,
}

/// Raw `key → (line, value)` pairs; later entries override via [`set`].
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(document: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (k, line) in document.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(
                    format!("line {}", k + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(CliError::config(key, "unknown key"));
            }
            if raw
                .entries
                .insert(key.to_string(), (k + 1, value.to_string()))
                .is_some()
            {
                return Err(CliError::config(key, "given more than once"));
            }
        }
        Ok(raw)
    }

    /// Overrides or adds a key, as done for command-line flags.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(CliError::config(key, "unknown key"));
        }
        self.entries.insert(key.to_string(), (0, value.into()));
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::config(key, format!("expected {what}, got `{v}`"))),
        }
    }
}

pub fn parse_config(document: &str) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::from_raw(&RawConfig::parse(document)?)
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::config(key, format!("expected true or false, got `{v}`"))),
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let variant = match raw.get("variant") {
            Some("free") => Variant::Free,
            Some("forced") => Variant::Forced,
            Some(v) => {
                return Err(CliError::config(
                    "variant",
                    format!("expected free or forced, got `{v}`"),
                ))
            }
            None => return Err(CliError::config("variant", "missing")),
        };
        let topology = match raw.get("topology") {
            Some("braid") => TopologyKind::Braid,
            Some("drg") => TopologyKind::Drg,
            Some("rg") => TopologyKind::Rg,
            Some("file") => TopologyKind::File,
            Some(v) => {
                return Err(CliError::config(
                    "topology",
                    format!("expected braid, drg, rg or file, got `{v}`"),
                ))
            }
            None => return Err(CliError::config("topology", "missing")),
        };
        let edge_list = raw.get("edge_list").map(PathBuf::from);
        let nodes = match (raw.parsed::<usize>("N", "a positive integer")?, topology) {
            (Some(n), _) => n,
            (None, TopologyKind::File) => {
                let path = edge_list
                    .as_ref()
                    .ok_or_else(|| CliError::config("edge_list", "required for topology = file"))?;
                read_network(path)?.len()
            }
            (None, _) => return Err(CliError::config("N", "missing")),
        };
        if nodes == 0 {
            return Err(CliError::config("N", "must be at least 1"));
        }

        let in_degree = raw.parsed::<usize>("n", "a positive integer")?;
        let mut z = raw.parsed::<f64>("z", "a number")?;
        if let Some(p) = raw.parsed::<f64>("p", "a number")? {
            if z.is_some() {
                return Err(CliError::config("p", "give either z or p, not both"));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::config("p", format!("must lie in [0, 1], got {p}")));
            }
            z = Some(p * (nodes as f64 - 1.0));
        }
        match topology {
            TopologyKind::Braid => match in_degree {
                None => return Err(CliError::config("n", "required for topology = braid")),
                Some(n) if n == 0 || n >= nodes => {
                    return Err(CliError::config(
                        "n",
                        format!("must lie in 1..N-1, got {n} with N = {nodes}"),
                    ))
                }
                _ => {}
            },
            TopologyKind::Drg | TopologyKind::Rg => match z {
                None => return Err(CliError::config("z", "z or p is required for random graphs")),
                Some(z) if !(z >= 0.0) || (nodes > 1 && z > nodes as f64 - 1.0) => {
                    return Err(CliError::config("z", format!("must lie in [0, N-1], got {z}")))
                }
                _ => {}
            },
            TopologyKind::File => {
                if edge_list.is_none() {
                    return Err(CliError::config("edge_list", "required for topology = file"));
                }
            }
        }

        let delay_mode = match raw.get("delay_mode").unwrap_or("constant") {
            "constant" => DelayMode::Constant,
            "per_edge" => DelayMode::PerEdge,
            "per_customer" => DelayMode::PerCustomer,
            "per_supplier" => DelayMode::PerSupplier,
            v => {
                return Err(CliError::config(
                    "delay_mode",
                    format!("expected constant, per_edge, per_customer or per_supplier, got `{v}`"),
                ))
            }
        };
        let tau_0 = raw.parsed::<f64>("tau_0", "a number of days")?;
        let (tau_min, tau_max) = match tau_0 {
            Some(t) => {
                if raw.get("tau_min").is_some() || raw.get("tau_max").is_some() {
                    return Err(CliError::config("tau_0", "cannot be combined with tau_min or tau_max"));
                }
                (t, t)
            }
            None => (
                raw.parsed("tau_min", "a number of days")?.unwrap_or(1.0),
                raw.parsed("tau_max", "a number of days")?.unwrap_or(10.0),
            ),
        };
        let delay_key = if tau_0.is_some() { "tau_0" } else { "tau_min" };
        if !(tau_min > 0.0) || !tau_min.is_finite() {
            return Err(CliError::config(delay_key, format!("must be positive, got {tau_min}")));
        }
        if tau_max < tau_min {
            return Err(CliError::config(
                "tau_max, tau_min",
                format!("tau_max ({tau_max}) is smaller than tau_min ({tau_min})"),
            ));
        }
        let ratio = tau_max / tau_min;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(CliError::config(
                "tau_max",
                format!("must be a whole multiple of tau_min ({tau_min}), got {tau_max}"),
            ));
        }

        let damaged_node = raw.parsed::<usize>("damaged_node", "a node index")?.unwrap_or(0);
        if damaged_node >= nodes {
            return Err(CliError::config(
                "damaged_node",
                format!("node {damaged_node} is not among the {nodes} firms"),
            ));
        }
        let tau_c = raw.parsed::<f64>("tau_c", "a number of days")?.unwrap_or(tau_min);
        if !(tau_c >= 0.0) {
            return Err(CliError::config("tau_c", format!("must be non-negative, got {tau_c}")));
        }
        let resolution = raw.parsed::<u32>("R", "a positive integer")?.unwrap_or(2);
        let grid = TimeGrid::new(resolution).map_err(|e| CliError::config("R", e.to_string()))?;
        for (key, value) in [(delay_key, tau_min), ("tau_max", tau_max), ("tau_c", tau_c)] {
            grid.ticks(value).map_err(|e| CliError::config(key, e.to_string()))?;
        }
        let horizon_days = raw.parsed::<f64>("horizon", "a number of days")?.unwrap_or(1000.0);
        let horizon_ticks = grid
            .ticks(horizon_days)
            .map_err(|e| CliError::config("horizon", e.to_string()))?;
        if horizon_ticks < grid.ticks(tau_max).unwrap_or(0) || horizon_ticks == 0 {
            return Err(CliError::config(
                "horizon",
                format!("{horizon_days} days is shorter than tau_max ({tau_max})"),
            ));
        }

        let replicas = raw.parsed::<usize>("N_s", "a positive integer")?.unwrap_or(1);
        if replicas == 0 {
            return Err(CliError::config("N_s", "must be at least 1"));
        }
        let workers = raw.parsed::<usize>("workers", "a positive integer")?;
        if workers == Some(0) {
            return Err(CliError::config("workers", "must be at least 1"));
        }
        let overlays = match raw.get("overlay") {
            None | Some("") => Vec::new(),
            Some(list) => list
                .split(',')
                .map(|name| Overlay::from_name(name.trim()))
                .collect::<Result<_, _>>()?,
        };
        let tau_star = raw.parsed::<u32>("tau_star", "a whole number of days")?.unwrap_or(2);

        let config = ExperimentConfig {
            variant,
            topology,
            nodes,
            in_degree,
            z,
            edge_list,
            delay_mode,
            tau_min,
            tau_max,
            damaged_node,
            tau_c,
            resolution,
            horizon_days,
            replicas,
            seed: raw.parsed::<u64>("seed", "an unsigned 64-bit integer")?.unwrap_or(0),
            workers,
            out: raw
                .get("out")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out")),
            overlays,
            detect_cycles: raw
                .get("detect_cycles")
                .map(|v| parse_bool("detect_cycles", v))
                .transpose()?
                .unwrap_or(true),
            detection_horizon: raw
                .parsed::<u64>("detection_horizon", "a number of ticks")?
                .unwrap_or(DEFAULT_DETECTION_HORIZON),
            traces: raw
                .get("traces")
                .map(|v| parse_bool("traces", v))
                .transpose()?
                .unwrap_or(false),
            tau_star,
        };
        for overlay in &config.overlays {
            overlay.check(&config)?;
        }
        Ok(config)
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.resolution).expect("resolution validated at parse time")
    }

    pub fn horizon_ticks(&self) -> u64 {
        self.grid()
            .ticks(self.horizon_days)
            .expect("horizon validated at parse time")
    }

    /// Link probability of the random graphs, from the exact `z = (N−1)p`.
    pub fn link_probability(&self) -> Option<f64> {
        self.z.map(|z| {
            if self.nodes > 1 {
                z / (self.nodes as f64 - 1.0)
            } else {
                0.0
            }
        })
    }

    /// `n` for braids, `z` for random graphs, the mean in-degree for files.
    pub fn n_or_z(&self, net: Option<&Network>) -> f64 {
        match self.topology {
            TopologyKind::Braid => self.in_degree.unwrap_or(0) as f64,
            TopologyKind::Drg | TopologyKind::Rg => self.z.unwrap_or(0.0),
            TopologyKind::File => net
                .map(|n| n.edge_count() as f64 / n.len().max(1) as f64)
                .unwrap_or(0.0),
        }
    }

    /// Builds the replica template and draws replica 0 as a dry run, so that
    /// every downstream precondition fails here rather than mid-run.
    pub fn template(&self) -> Result<ModelTemplate, CliError> {
        let topology = match self.topology {
            TopologyKind::Braid => TopologySpec::Braid {
                in_degree: self.in_degree.unwrap_or(1),
            },
            TopologyKind::Drg => TopologySpec::DirectedRandom {
                p: self.link_probability().unwrap_or(0.0),
            },
            TopologyKind::Rg => TopologySpec::UndirectedRandom {
                p: self.link_probability().unwrap_or(0.0),
            },
            TopologyKind::File => {
                let path = self.edge_list.as_ref().expect("checked at parse time");
                let net = read_network(path)?;
                if net.len() != self.nodes {
                    return Err(CliError::config(
                        "N",
                        format!("edge list has {} nodes, config says {}", net.len(), self.nodes),
                    ));
                }
                TopologySpec::Fixed(Arc::new(net))
            }
        };
        let template = ModelTemplate {
            variant: self.variant,
            nodes: self.nodes,
            topology,
            delay_mode: self.delay_mode,
            tau_min: self.tau_min,
            tau_max: self.tau_max,
            forcing: ForcingSchedule::new(self.damaged_node, self.tau_c),
            grid: self.grid(),
            horizon: self.horizon_ticks(),
        };
        template
            .instantiate(replica_seed(self.seed, 0))
            .and_then(|spec| spec.compile().map(|_| ()))
            .map_err(|e| match e {
                bdenet::Error::InvalidParameter { name, reason } => CliError::config(name, reason),
                other => CliError::config("topology", other.to_string()),
            })?;
        Ok(template)
    }
}

pub fn read_network(path: &std::path::Path) -> Result<Network, CliError> {
    let file =
        std::fs::File::open(path).map_err(|e| CliError::config("edge_list", format!("{}: {e}", path.display())))?;
    Network::read_edge_list(std::io::BufReader::new(file))
        .map_err(|e| CliError::config("edge_list", format!("{}: {e}", path.display())))
}
