//! Evolution of the Boolean delay system on a tick grid.
//!
//! Node `i` is active at tick `t` iff it is not forced off and every input
//! stock is available:
//!
//! ```text
//! x_i(t) = μ_i(t) ∧ ⋀_{j ∈ in(i)} S_ji(t)
//! free:   S_ji(t) = x_j(t − τ_ij)
//! forced: S_ji(t) = ¬x_i(t − τ_ij) ∨ x_j(t − τ_ij)
//! ```
//!
//! Every node is active before tick 0. All reads are at strictly earlier
//! ticks, so nodes can be updated in any order.

mod cycle;
mod reference;

use std::sync::Arc;

use rand::Rng;

pub use cycle::{detect_cycle, CycleInfo, CycleOutcome, Period, DEFAULT_DETECTION_HORIZON};
pub use reference::{brute_force_reference, ORACLE_MAX_HORIZON, ORACLE_MAX_NODES};

use crate::delays::{assign_delays, DelayAssignment, DelayMode};
use crate::error::{invalid, Error, Result};
use crate::observables::TrajectoryRecord;
use crate::rng::{stream, Purpose};
use crate::time::{HistoryBank, TimeGrid};
use crate::topology::{make_braid_chain, sample_directed_rg, sample_undirected_rg, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Free,
    Forced,
}

/// One node is switched off on `[0, τ_c)`; every other node is never forced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingSchedule {
    pub damaged_node: usize,
    pub tau_c: f64,
}

impl ForcingSchedule {
    pub fn new(damaged_node: usize, tau_c: f64) -> Self {
        ForcingSchedule { damaged_node, tau_c }
    }

    /// No damage at all.
    pub fn none() -> Self {
        ForcingSchedule::new(0, 0.0)
    }
}

impl Default for ForcingSchedule {
    fn default() -> Self {
        ForcingSchedule::new(0, 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub variant: Variant,
    pub net: Network,
    pub delays: DelayAssignment,
    pub forcing: ForcingSchedule,
    pub grid: TimeGrid,
    /// Number of ticks to simulate, starting at tick 0.
    pub horizon: u64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.delays.len() != self.net.edge_count() {
            return Err(Error::Mismatch(format!(
                "{} delays for {} edges",
                self.delays.len(),
                self.net.edge_count()
            )));
        }
        if self.forcing.tau_c < 0.0 {
            return Err(invalid(
                "tau_c",
                format!("must be non-negative, got {}", self.forcing.tau_c),
            ));
        }
        self.grid.ticks(self.forcing.tau_c)?;
        if self.forcing.tau_c > 0.0 && self.forcing.damaged_node >= self.net.len() {
            return Err(invalid(
                "damaged_node",
                format!(
                    "node {} not in a network of {}",
                    self.forcing.damaged_node,
                    self.net.len()
                ),
            ));
        }
        let window = self.grid.ticks(self.delays.tau_max())?;
        if self.horizon < window {
            return Err(invalid(
                "horizon",
                format!("{} ticks is shorter than tau_max ({window} ticks)", self.horizon),
            ));
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<CompiledModel> {
        self.validate()?;
        let lags: Vec<u32> = self
            .delays
            .ticks(&self.grid)?
            .into_iter()
            .map(|l| u32::try_from(l).map_err(|_| invalid("tau_max", "delay too long")))
            .collect::<Result<_>>()?;
        assert!(lags.iter().all(|&l| l >= 1), "every delay must span at least one tick");
        let n = self.net.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut suppliers = Vec::with_capacity(self.net.edge_count());
        offsets.push(0u32);
        for i in 0..n {
            suppliers.extend(self.net.in_neighbors(i).iter().map(|&j| j as u32));
            offsets.push(suppliers.len() as u32);
        }
        let window = lags.iter().copied().max().unwrap_or(1) as usize;
        let forcing_ticks = self.grid.ticks(self.forcing.tau_c)? as i64;
        Ok(CompiledModel {
            variant: self.variant,
            offsets,
            suppliers,
            lags,
            damaged: self.forcing.damaged_node,
            forcing_ticks,
            window,
            depth: window + forcing_ticks as usize + 1,
            resolution: self.grid.resolution(),
            horizon: self.horizon,
            delay_checksum: self.delays.checksum(),
        })
    }
}

/// A model flattened for fast evaluation: compressed supplier lists with
/// per-edge lags in ticks.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    variant: Variant,
    offsets: Vec<u32>,
    suppliers: Vec<u32>,
    lags: Vec<u32>,
    damaged: usize,
    forcing_ticks: i64,
    window: usize,
    depth: usize,
    resolution: u32,
    horizon: u64,
    delay_checksum: u64,
}

impl CompiledModel {
    pub fn nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Longest lag in ticks; the state over this many ticks determines the future.
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn forcing_ticks(&self) -> i64 {
        self.forcing_ticks
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn delay_checksum(&self) -> u64 {
        self.delay_checksum
    }

    fn initial_bank(&self, with_trace: bool) -> HistoryBank {
        HistoryBank::new(self.nodes(), self.depth, true, with_trace)
    }

    /// Fills `out` with the values at the tick following `bank.current()`
    /// and returns how many are zero.
    fn evaluate(&self, bank: &HistoryBank, out: &mut [bool]) -> usize {
        match self.variant {
            Variant::Free => self.evaluate_with::<false>(bank, out),
            Variant::Forced => self.evaluate_with::<true>(bank, out),
        }
    }

    fn evaluate_with<const FORCED: bool>(&self, bank: &HistoryBank, out: &mut [bool]) -> usize {
        let tick = bank.current() + 1;
        let mut zeros = 0;
        for (i, slot) in out.iter_mut().enumerate() {
            let mut value = !(i == self.damaged && tick < self.forcing_ticks);
            if value {
                let (lo, hi) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
                for e in lo..hi {
                    // bit `lag` of the bank is tick `current - lag`
                    let lag = self.lags[e] as usize - 1;
                    let supplied = bank.bit(self.suppliers[e] as usize, lag);
                    let stock = if FORCED {
                        supplied || !bank.bit(i, lag)
                    } else {
                        supplied
                    };
                    if !stock {
                        value = false;
                        break;
                    }
                }
            }
            zeros += !value as usize;
            *slot = value;
        }
        zeros
    }
}

/// Histories of all nodes plus the scratch buffer used for synchronous updates.
#[derive(Debug, Clone)]
pub struct SimulationState {
    bank: HistoryBank,
    next: Vec<bool>,
    impaired: usize,
    unchanged_run: usize,
}

impl SimulationState {
    pub fn new(model: &CompiledModel) -> Self {
        Self::with_traces(model, false)
    }

    pub fn with_traces(model: &CompiledModel, traces: bool) -> Self {
        SimulationState {
            bank: model.initial_bank(traces),
            next: vec![true; model.nodes()],
            impaired: 0,
            unchanged_run: 0,
        }
    }

    /// Last computed tick (-1 before the first step).
    pub fn tick(&self) -> i64 {
        self.bank.current()
    }

    /// Impaired firms at the last computed tick.
    pub fn impaired(&self) -> usize {
        self.impaired
    }

    pub fn value(&self, node: usize) -> bool {
        self.bank.bit(node, 0)
    }

    pub fn history(&self) -> &HistoryBank {
        &self.bank
    }

    /// Advances one tick without the horizon check.
    pub(crate) fn advance(&mut self, model: &CompiledModel) -> usize {
        self.impaired = model.evaluate(&self.bank, &mut self.next);
        let changed = self.bank.push_all(&self.next);
        self.unchanged_run = if changed == 0 { self.unchanged_run + 1 } else { 0 };
        self.impaired
    }

    /// Advances one tick and returns the number of impaired firms.
    pub fn step(&mut self, model: &CompiledModel) -> Result<usize> {
        if self.tick() + 1 >= model.horizon as i64 {
            return Err(Error::HorizonExceeded { horizon: model.horizon });
        }
        Ok(self.advance(model))
    }

    /// True once the state can no longer change: nothing moved over a full
    /// window and the last tick was already unforced.
    pub fn is_fixed(&self, model: &CompiledModel) -> bool {
        self.unchanged_run >= model.window && self.tick() >= model.forcing_ticks
    }
}

fn simulate(model: &CompiledModel, traces: bool) -> (TrajectoryRecord, SimulationState) {
    let mut state = SimulationState::with_traces(model, traces);
    let mut theta = Vec::with_capacity(model.horizon as usize);
    while (theta.len() as u64) < model.horizon {
        theta.push(state.advance(model) as u32);
        if state.is_fixed(model) {
            let last = *theta.last().expect("at least one tick");
            theta.resize(model.horizon as usize, last);
        }
    }
    (TrajectoryRecord::new(model.nodes(), model.resolution, theta), state)
}

/// Simulates `spec.horizon` ticks from tick 0, stopping early once a fixed
/// point is reached and padding with its value.
pub fn run(spec: &ModelSpec) -> Result<TrajectoryRecord> {
    let model = spec.compile()?;
    let before = spec.delays.checksum();
    let (record, _) = simulate(&model, false);
    debug_assert_eq!(before, spec.delays.checksum());
    Ok(record)
}

pub fn run_compiled(model: &CompiledModel) -> TrajectoryRecord {
    simulate(model, false).0
}

/// A transition of one node: at `tick` the node took `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub tick: i64,
    pub node: usize,
    pub value: bool,
}

/// Like [`run`], also returning every transition sorted by tick and node.
pub fn run_with_traces(spec: &ModelSpec) -> Result<(TrajectoryRecord, Vec<Transition>)> {
    let model = spec.compile()?;
    let (record, state) = simulate(&model, true);
    let mut transitions: Vec<Transition> = (0..model.nodes())
        .flat_map(|node| {
            state
                .bank
                .transitions(node)
                .unwrap_or(&[])
                .iter()
                .map(move |&(tick, value)| Transition { tick, node, value })
        })
        .collect();
    transitions.sort_by_key(|t| (t.tick, t.node));
    Ok((record, transitions))
}

/// Writes transitions as CSV `t_days,node,value`.
pub fn write_transitions_csv<W: std::io::Write>(transitions: &[Transition], grid: &TimeGrid, mut out: W) -> Result<()> {
    writeln!(out, "t_days,node,value")?;
    for t in transitions {
        writeln!(out, "{},{},{}", grid.days(t.tick), t.node, t.value as u8)?;
    }
    Ok(())
}

/// How the network of each replica is obtained.
#[derive(Debug, Clone)]
pub enum TopologySpec {
    Braid { in_degree: usize },
    DirectedRandom { p: f64 },
    UndirectedRandom { p: f64 },
    Fixed(Arc<Network>),
}

impl TopologySpec {
    pub fn is_random(&self) -> bool {
        matches!(
            self,
            TopologySpec::DirectedRandom { .. } | TopologySpec::UndirectedRandom { .. }
        )
    }

    pub fn build<R: Rng + ?Sized>(&self, nodes: usize, rng: &mut R) -> Result<Network> {
        match self {
            TopologySpec::Braid { in_degree } => make_braid_chain(nodes, *in_degree),
            TopologySpec::DirectedRandom { p } => sample_directed_rg(nodes, *p, rng),
            TopologySpec::UndirectedRandom { p } => sample_undirected_rg(nodes, *p, rng),
            TopologySpec::Fixed(net) => {
                if net.len() != nodes {
                    return Err(Error::Mismatch(format!(
                        "fixed network has {} nodes, template asks for {nodes}",
                        net.len()
                    )));
                }
                Ok((**net).clone())
            }
        }
    }
}

/// Everything needed to draw one replica: quenched links and delays are
/// sampled from streams derived from the replica seed.
#[derive(Debug, Clone)]
pub struct ModelTemplate {
    pub variant: Variant,
    pub nodes: usize,
    pub topology: TopologySpec,
    pub delay_mode: DelayMode,
    pub tau_min: f64,
    pub tau_max: f64,
    pub forcing: ForcingSchedule,
    pub grid: TimeGrid,
    pub horizon: u64,
}

impl ModelTemplate {
    pub fn instantiate(&self, seed: u64) -> Result<ModelSpec> {
        let net = self.topology.build(self.nodes, &mut stream(seed, Purpose::Links))?;
        let delays = assign_delays(
            &net,
            self.delay_mode,
            self.tau_min,
            self.tau_max,
            &mut stream(seed, Purpose::Delays),
        )?;
        let spec = ModelSpec {
            variant: self.variant,
            net,
            delays,
            forcing: self.forcing,
            grid: self.grid,
            horizon: self.horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Whether replicas differ at all.
    pub fn is_random(&self) -> bool {
        self.topology.is_random() || (self.delay_mode.is_random() && self.tau_max > self.tau_min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delays::DelayMode;
    use crate::rng::{stream, Purpose};
    use crate::topology::NetworkKind;

    pub(crate) fn braid_spec(variant: Variant, nodes: usize, n: usize, tau_c: f64, horizon: u64) -> ModelSpec {
        let net = make_braid_chain(nodes, n).unwrap();
        let delays = assign_delays(&net, DelayMode::Constant, 1.0, 1.0, &mut stream(0, Purpose::Delays)).unwrap();
        ModelSpec {
            variant,
            net,
            delays,
            forcing: ForcingSchedule::new(0, tau_c),
            grid: TimeGrid::new(1).unwrap(),
            horizon,
        }
    }

    fn two_node_spec(variant: Variant, tau_c: f64) -> ModelSpec {
        // node 1 is supplied by node 0 with delay 1; node 0 has no suppliers
        let net = Network::from_in_neighbors(vec![vec![], vec![0]], NetworkKind::Custom).unwrap();
        let delays = DelayAssignment::from_multiples(DelayMode::Constant, 1.0, 1.0, vec![1]).unwrap();
        ModelSpec {
            variant,
            net,
            delays,
            forcing: ForcingSchedule::new(0, tau_c),
            grid: TimeGrid::new(1).unwrap(),
            horizon: 6,
        }
    }

    #[test]
    fn stock_truth_tables() {
        let mut spec = two_node_spec(Variant::Free, 3.0);
        let free = run(&spec).unwrap();
        // tick 2: both down at tick 1, the stock cannot be rebuilt
        assert_eq!(free.theta(), &[1, 2, 2, 1, 0, 0]);
        spec.variant = Variant::Forced;
        let forced = run(&spec).unwrap();
        // tick 2: both down at tick 1, the stock is supplied from outside
        assert_eq!(forced.theta(), &[1, 2, 1, 1, 0, 0]);
    }

    #[test]
    fn isolated_node_stays_active() {
        let net = Network::from_in_neighbors(vec![vec![]; 3], NetworkKind::Custom).unwrap();
        let delays = DelayAssignment::from_multiples(DelayMode::Constant, 1.0, 1.0, vec![]).unwrap();
        let spec = ModelSpec {
            variant: Variant::Free,
            net,
            delays,
            forcing: ForcingSchedule::new(0, 2.0),
            grid: TimeGrid::new(1).unwrap(),
            horizon: 10,
        };
        let r = run(&spec).unwrap();
        assert_eq!(r.theta(), &[1, 1, 0, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn single_chain_circulates_damage() {
        let r = run(&braid_spec(Variant::Free, 10, 1, 1.0, 100)).unwrap();
        assert!(r.theta().iter().all(|&t| t == 1));
        assert!(r.rho().iter().all(|&p| (p - 0.9).abs() < 1e-15));
    }

    #[test]
    fn double_chain_grows_linearly_then_dies() {
        let r = run(&braid_spec(Variant::Free, 10, 2, 1.0, 40)).unwrap();
        for t in 0..9 {
            assert_eq!(r.theta()[t], t as u32 + 1);
        }
        assert!(r.theta()[9..].iter().all(|&t| t == 10));
    }

    #[test]
    fn forced_double_chain_keeps_two_down() {
        let r = run(&braid_spec(Variant::Forced, 10, 2, 1.0, 200)).unwrap();
        assert!(r.theta()[100..].iter().all(|&t| t == 2));
    }

    #[test]
    fn step_respects_horizon() {
        let spec = braid_spec(Variant::Free, 5, 1, 1.0, 3);
        let model = spec.compile().unwrap();
        let mut s = SimulationState::new(&model);
        for _ in 0..3 {
            s.step(&model).unwrap();
        }
        assert_eq!(s.step(&model), Err(Error::HorizonExceeded { horizon: 3 }));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = braid_spec(Variant::Free, 5, 1, 1.0, 10);
        spec.forcing.damaged_node = 7;
        assert!(spec.compile().is_err());
        let mut spec = braid_spec(Variant::Free, 5, 1, 0.5, 10);
        assert!(matches!(spec.compile(), Err(Error::NotTickRepresentable { .. })));
        spec.grid = TimeGrid::new(2).unwrap();
        assert!(spec.compile().is_ok());
        spec.horizon = 1;
        assert!(spec.compile().is_err());
    }

    #[test]
    fn traces_reconstruct_the_trajectory() {
        let spec = braid_spec(Variant::Free, 6, 2, 1.0, 20);
        let (record, transitions) = run_with_traces(&spec).unwrap();
        let mut values = [true; 6];
        let mut k = 0;
        for t in 0..20i64 {
            while k < transitions.len() && transitions[k].tick == t {
                values[transitions[k].node] = transitions[k].value;
                k += 1;
            }
            let zeros = values.iter().filter(|v| !**v).count() as u32;
            assert_eq!(zeros, record.theta()[t as usize]);
        }
        let mut csv = Vec::new();
        write_transitions_csv(&transitions, &spec.grid, &mut csv).unwrap();
        assert!(String::from_utf8(csv)
            .unwrap()
            .starts_with("t_days,node,value\n0,0,0\n"));
    }

    #[test]
    fn templates_are_reproducible() {
        let t = ModelTemplate {
            variant: Variant::Free,
            nodes: 50,
            topology: TopologySpec::DirectedRandom { p: 0.04 },
            delay_mode: DelayMode::PerEdge,
            tau_min: 1.0,
            tau_max: 10.0,
            forcing: ForcingSchedule::default(),
            grid: TimeGrid::default(),
            horizon: 100,
        };
        let a = t.instantiate(3).unwrap();
        let b = t.instantiate(3).unwrap();
        assert_eq!(a.net, b.net);
        assert_eq!(a.delays, b.delays);
        assert_ne!(t.instantiate(4).unwrap().net, a.net);
        assert!(t.is_random());
    }
}
