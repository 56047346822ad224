//! Propagation delays on network edges.

use std::io::Write;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::time::{fnv1a_words, TimeGrid};
use crate::topology::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayMode {
    /// Every edge carries `τ_0 = τ_min`.
    Constant,
    /// One independent delay per directed edge.
    PerEdge,
    /// One delay per customer, shared by all of its input edges.
    PerCustomer,
    /// One delay per supplier, shared by all of its output edges.
    PerSupplier,
}

impl DelayMode {
    pub fn is_random(self) -> bool {
        !matches!(self, DelayMode::Constant)
    }
}

/// Delays stored per edge as multiples `k ∈ {1, …, τ_max/τ_min}` of `τ_min`,
/// in the edge order of the network they were drawn for.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayAssignment {
    mode: DelayMode,
    tau_min: f64,
    tau_max: f64,
    multiples: Vec<u32>,
}

impl DelayAssignment {
    /// Builds an assignment from explicit multiples of `tau_min`.
    pub fn from_multiples(mode: DelayMode, tau_min: f64, tau_max: f64, multiples: Vec<u32>) -> Result<Self> {
        let levels = levels(tau_min, tau_max)?;
        if let Some(&k) = multiples.iter().find(|&&k| k == 0 || k > levels) {
            return Err(invalid("delay", format!("multiple {k} outside 1..={levels}")));
        }
        Ok(DelayAssignment {
            mode,
            tau_min,
            tau_max,
            multiples,
        })
    }

    pub fn mode(&self) -> DelayMode {
        self.mode
    }

    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn len(&self) -> usize {
        self.multiples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multiples.is_empty()
    }

    pub fn multiples(&self) -> &[u32] {
        &self.multiples
    }

    pub fn days(&self, edge: usize) -> f64 {
        self.multiples[edge] as f64 * self.tau_min
    }

    /// Edge delays converted to ticks of `grid`.
    pub fn ticks(&self, grid: &TimeGrid) -> Result<Vec<u64>> {
        let unit = grid.ticks(self.tau_min)?;
        Ok(self.multiples.iter().map(|&k| k as u64 * unit).collect())
    }

    /// Fingerprint of the drawn values, used to check that delays stay
    /// frozen during a run.
    pub fn checksum(&self) -> u64 {
        fnv1a_words(
            [self.tau_min.to_bits(), self.tau_max.to_bits()]
                .into_iter()
                .chain(self.multiples.iter().map(|&k| k as u64)),
        )
    }

    /// Writes one `i j tau_days` line per edge.
    pub fn write_text<W: Write>(&self, net: &Network, mut out: W) -> Result<()> {
        if net.edge_count() != self.len() {
            return Err(Error::Mismatch(format!(
                "{} delays for {} edges",
                self.len(),
                net.edge_count()
            )));
        }
        for (i, j, e) in net.edges() {
            writeln!(out, "{i} {j} {}", self.days(e))?;
        }
        Ok(())
    }
}

fn levels(tau_min: f64, tau_max: f64) -> Result<u32> {
    if !(tau_min.is_finite() && tau_min > 0.0) {
        return Err(invalid("tau_min", format!("must be positive, got {tau_min}")));
    }
    if !tau_max.is_finite() || tau_max < tau_min {
        return Err(invalid(
            "tau_max",
            format!("tau_max ({tau_max}) must not be below tau_min ({tau_min})"),
        ));
    }
    let ratio = tau_max / tau_min;
    let k = ratio.round();
    if (ratio - k).abs() > 1e-9 {
        return Err(invalid(
            "tau_max",
            format!("tau_max/tau_min = {ratio} is not an integer"),
        ));
    }
    Ok(k as u32)
}

/// Draws delays for every edge of `net`. Stochastic modes sample each
/// independent variable uniformly from `{τ_min, 2τ_min, …, τ_max}`;
/// `Constant` ignores `tau_max` and uses `τ_min` everywhere.
pub fn assign_delays<R: Rng + ?Sized>(
    net: &Network,
    mode: DelayMode,
    tau_min: f64,
    tau_max: f64,
    rng: &mut R,
) -> Result<DelayAssignment> {
    let levels = levels(tau_min, tau_max)?;
    let mut draw = || rng.random_range(1..=levels);
    let multiples = match mode {
        DelayMode::Constant => vec![1; net.edge_count()],
        DelayMode::PerEdge => (0..net.edge_count()).map(|_| draw()).collect(),
        DelayMode::PerCustomer => {
            let per_node: Vec<u32> = (0..net.len()).map(|_| draw()).collect();
            net.edges().map(|(i, _, _)| per_node[i]).collect()
        }
        DelayMode::PerSupplier => {
            let per_node: Vec<u32> = (0..net.len()).map(|_| draw()).collect();
            net.edges().map(|(_, j, _)| per_node[j]).collect()
        }
    };
    let tau_max = if mode == DelayMode::Constant { tau_min } else { tau_max };
    Ok(DelayAssignment {
        mode,
        tau_min,
        tau_max,
        multiples,
    })
}

/// Smallest delay `τ*` over all edges, in days.
pub fn min_delay(assignment: &DelayAssignment) -> Result<f64> {
    assignment
        .multiples
        .iter()
        .min()
        .map(|&k| k as f64 * assignment.tau_min)
        .ok_or(Error::NoEdges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::topology::{make_braid_chain, sample_directed_rg, NetworkKind};

    #[test]
    fn constant_mode_is_tau_min_everywhere() {
        let net = make_braid_chain(20, 3).unwrap();
        let d = assign_delays(&net, DelayMode::Constant, 1.0, 10.0, &mut stream(0, Purpose::Delays)).unwrap();
        assert!((0..d.len()).all(|e| d.days(e) == 1.0));
        assert_eq!(min_delay(&d).unwrap(), 1.0);
        assert_eq!(d.tau_max(), 1.0);
    }

    #[test]
    fn degenerate_interval_matches_constant() {
        let net = make_braid_chain(20, 3).unwrap();
        let a = assign_delays(&net, DelayMode::PerEdge, 1.0, 1.0, &mut stream(4, Purpose::Delays)).unwrap();
        let b = assign_delays(&net, DelayMode::Constant, 1.0, 1.0, &mut stream(4, Purpose::Delays)).unwrap();
        assert_eq!(a.multiples(), b.multiples());
    }

    #[test]
    fn per_edge_mean_is_five_and_a_half() {
        let net = make_braid_chain(1000, 100).unwrap();
        let d = assign_delays(&net, DelayMode::PerEdge, 1.0, 10.0, &mut stream(5, Purpose::Delays)).unwrap();
        let mean = (0..d.len()).map(|e| d.days(e)).sum::<f64>() / d.len() as f64;
        assert!((mean - 5.5).abs() < 0.03, "mean {mean}");
        let min = min_delay(&d).unwrap();
        assert!((1.0..=10.0).contains(&min));
    }

    #[test]
    fn values_are_uniform() {
        let net = make_braid_chain(2000, 50).unwrap();
        let d = assign_delays(&net, DelayMode::PerEdge, 1.0, 10.0, &mut stream(6, Purpose::Delays)).unwrap();
        let mut counts = [0usize; 11];
        for &k in d.multiples() {
            counts[k as usize] += 1;
        }
        let n = d.len() as f64;
        let sigma = (n * 0.1 * 0.9).sqrt();
        for &c in &counts[1..] {
            assert!((c as f64 - 0.1 * n).abs() < 3.0 * sigma, "count {c}");
        }
        assert_eq!(counts[0], 0);
    }

    #[test]
    fn node_indexed_modes_share_values() {
        let net = sample_directed_rg(300, 0.02, &mut stream(1, Purpose::Links)).unwrap();
        let c = assign_delays(&net, DelayMode::PerCustomer, 1.0, 10.0, &mut stream(2, Purpose::Delays)).unwrap();
        for i in 0..net.len() {
            let r = net.edge_range(i);
            assert!(r.clone().all(|e| c.days(e) == c.days(r.start)));
        }
        let s = assign_delays(&net, DelayMode::PerSupplier, 1.0, 10.0, &mut stream(2, Purpose::Delays)).unwrap();
        let mut by_supplier = vec![None; net.len()];
        for (_, j, e) in net.edges() {
            let prev = by_supplier[j].get_or_insert(s.days(e));
            assert_eq!(*prev, s.days(e));
        }
    }

    #[test]
    fn rejects_inverted_bounds_and_edgeless_minimum() {
        let net = make_braid_chain(5, 1).unwrap();
        let err = assign_delays(&net, DelayMode::PerEdge, 10.0, 1.0, &mut stream(0, Purpose::Delays));
        assert!(matches!(err, Err(Error::InvalidParameter { name: "tau_max", .. })));
        assert!(assign_delays(&net, DelayMode::PerEdge, 1.0, 2.5, &mut stream(0, Purpose::Delays)).is_err());
        let empty = Network::from_in_neighbors(vec![vec![]; 3], NetworkKind::Custom).unwrap();
        let d = assign_delays(&empty, DelayMode::PerEdge, 1.0, 10.0, &mut stream(0, Purpose::Delays)).unwrap();
        assert_eq!(min_delay(&d), Err(Error::NoEdges));
    }

    #[test]
    fn minimum_of_three_edges_distribution() {
        // direct probability: three independent uniform draws all >= 2
        let net = make_braid_chain(3, 1).unwrap();
        let trials = 10_000;
        let hits = (0..trials)
            .filter(|&k| {
                let d = assign_delays(&net, DelayMode::PerEdge, 1.0, 10.0, &mut stream(k, Purpose::Delays)).unwrap();
                min_delay(&d).unwrap() >= 2.0
            })
            .count();
        let p = 0.9f64.powi(3);
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let frac = hits as f64 / trials as f64;
        assert!((frac - p).abs() < 3.0 * sigma, "fraction {frac} vs {p}");
    }

    #[test]
    fn text_export_and_checksum() {
        let net = make_braid_chain(4, 1).unwrap();
        let d = DelayAssignment::from_multiples(DelayMode::PerEdge, 1.0, 10.0, vec![1, 2, 3, 10]).unwrap();
        let mut buf = Vec::new();
        d.write_text(&net, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 3 1\n1 0 2\n2 1 3\n3 2 10\n");
        let e = DelayAssignment::from_multiples(DelayMode::PerEdge, 1.0, 10.0, vec![1, 2, 3, 9]).unwrap();
        assert_ne!(d.checksum(), e.checksum());
        assert!(DelayAssignment::from_multiples(DelayMode::PerEdge, 1.0, 10.0, vec![11]).is_err());
    }
}
