//! Direct evaluation of the delay system from its definition, kept
//! deliberately naive as an independent check of the fast engine.

use super::{ModelSpec, Variant};
use crate::error::{Error, Result};
use crate::observables::TrajectoryRecord;

pub const ORACLE_MAX_NODES: usize = 16;
pub const ORACLE_MAX_HORIZON: u64 = 1000;

/// Recomputes every tick from the full stored past. Limited to
/// [`ORACLE_MAX_NODES`] nodes and [`ORACLE_MAX_HORIZON`] ticks.
pub fn brute_force_reference(spec: &ModelSpec) -> Result<TrajectoryRecord> {
    let n = spec.net.len();
    if n > ORACLE_MAX_NODES {
        return Err(Error::OracleCap(format!("{n} nodes (limit {ORACLE_MAX_NODES})")));
    }
    if spec.horizon > ORACLE_MAX_HORIZON {
        return Err(Error::OracleCap(format!(
            "{} ticks (limit {ORACLE_MAX_HORIZON})",
            spec.horizon
        )));
    }
    spec.validate()?;
    let resolution = spec.grid.resolution();
    let forcing_end = spec.forcing.tau_c * resolution as f64;

    // past[t][i] for t >= 0; anything earlier is active
    let mut past: Vec<Vec<bool>> = Vec::new();
    let x = |past: &Vec<Vec<bool>>, i: usize, t: i64| -> bool { t < 0 || past[t as usize][i] };

    let mut theta = Vec::new();
    for t in 0..spec.horizon as i64 {
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            let mu = !(i == spec.forcing.damaged_node && (t as f64) < forcing_end);
            let mut all_stocks = true;
            for (k, &j) in spec.net.in_neighbors(i).iter().enumerate() {
                let edge = spec.net.edge_range(i).start + k;
                let lag = (spec.delays.days(edge) * resolution as f64).round() as i64;
                let s = match spec.variant {
                    Variant::Free => x(&past, j, t - lag),
                    Variant::Forced => !x(&past, i, t - lag) || x(&past, j, t - lag),
                };
                all_stocks = all_stocks && s;
            }
            row.push(mu && all_stocks);
        }
        theta.push(row.iter().filter(|&&v| !v).count() as u32);
        past.push(row);
    }
    Ok(TrajectoryRecord::new(n, resolution, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delays::{assign_delays, DelayMode};
    use crate::engine::{run, ForcingSchedule};
    use crate::rng::{stream, Purpose};
    use crate::time::TimeGrid;
    use crate::topology::{make_braid_chain, sample_directed_rg};

    #[test]
    fn matches_engine_on_random_braid() {
        let net = make_braid_chain(10, 2).unwrap();
        let delays = assign_delays(&net, DelayMode::PerEdge, 1.0, 10.0, &mut stream(17, Purpose::Delays)).unwrap();
        let spec = ModelSpec {
            variant: Variant::Free,
            net,
            delays,
            forcing: ForcingSchedule::new(0, 1.0),
            grid: TimeGrid::new(2).unwrap(),
            horizon: 500,
        };
        assert_eq!(run(&spec).unwrap(), brute_force_reference(&spec).unwrap());
    }

    #[test]
    fn matches_engine_on_forced_random_graph() {
        let net = sample_directed_rg(12, 1.0 / 11.0, &mut stream(5, Purpose::Links)).unwrap();
        let delays = assign_delays(&net, DelayMode::PerEdge, 1.0, 5.0, &mut stream(5, Purpose::Delays)).unwrap();
        let spec = ModelSpec {
            variant: Variant::Forced,
            net,
            delays,
            forcing: ForcingSchedule::new(0, 3.0),
            grid: TimeGrid::new(1).unwrap(),
            horizon: 300,
        };
        assert_eq!(run(&spec).unwrap(), brute_force_reference(&spec).unwrap());
    }

    #[test]
    fn caps_are_enforced() {
        let net = make_braid_chain(17, 1).unwrap();
        let delays = assign_delays(&net, DelayMode::Constant, 1.0, 1.0, &mut stream(0, Purpose::Delays)).unwrap();
        let mut spec = ModelSpec {
            variant: Variant::Free,
            net,
            delays,
            forcing: ForcingSchedule::default(),
            grid: TimeGrid::new(1).unwrap(),
            horizon: 10,
        };
        assert!(matches!(brute_force_reference(&spec), Err(Error::OracleCap(_))));
        spec.net = make_braid_chain(5, 1).unwrap();
        spec.delays = assign_delays(
            &spec.net,
            DelayMode::Constant,
            1.0,
            1.0,
            &mut stream(0, Purpose::Delays),
        )
        .unwrap();
        spec.horizon = 1001;
        assert!(matches!(brute_force_reference(&spec), Err(Error::OracleCap(_))));
    }
}
