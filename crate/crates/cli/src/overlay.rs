//! Named analytic predictions: time curves written next to simulated data,
//! and scalar predictions printed as `key=value` lines.

use std::io::Write;

use bdenet::engine::Variant;
use bdenet::theory::{
    appendix_b_prediction, clt_theta_prediction, hare_velocity, mean_component_size, min_delay_probability,
    random_delay_spreading_bounds, short_time_spreading, solve_v, transient_estimate, DelayMoments, GraphKind,
    TransientModel,
};

use crate::config::{ExperimentConfig, TopologyKind};
use crate::CliError;

/// A prediction of `θ_tot(t)` (or `ρ(t)` for `rho_asym`) on the tick grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overlay {
    /// Free single chain with random delays, central-limit estimate.
    Clt,
    /// Free chain of in-degree n with random delays.
    PathGaussian,
    /// Free chain of in-degree n with equal delays: `[t](n−1)+1`.
    FreeBraid,
    /// `z^t` on directed graphs, `Σ z^{t−2l}` on undirected ones.
    ShortTime,
    BoundLower,
    BoundUpper,
    /// `2v − v²`, as a density.
    RhoAsym,
}

/// Single-number predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scalar {
    Giant,
    Hare,
    Transient,
    Moments,
    ComponentSize,
    MinDelay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoryName {
    Curve(Overlay),
    Scalar(Scalar),
}

impl TheoryName {
    pub fn from_name(name: &str) -> Result<Self, CliError> {
        let scalar = match name {
            "giant" => Scalar::Giant,
            "hare" => Scalar::Hare,
            "transient" => Scalar::Transient,
            "moments" => Scalar::Moments,
            "component_size" => Scalar::ComponentSize,
            "min_delay" => Scalar::MinDelay,
            _ => return Overlay::from_name(name).map(TheoryName::Curve),
        };
        Ok(TheoryName::Scalar(scalar))
    }
}

fn integral_days(key: &str, value: f64) -> Result<u32, CliError> {
    if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as u32)
    } else {
        Err(CliError::config(
            key,
            format!("this prediction needs a whole number of days, got {value}"),
        ))
    }
}

fn unit_tau_min(c: &ExperimentConfig) -> Result<(), CliError> {
    if c.tau_min != 1.0 {
        return Err(CliError::config(
            "tau_min",
            "predictions are expressed for tau_min = 1 day",
        ));
    }
    Ok(())
}

fn need(c: &ExperimentConfig, kinds: &[TopologyKind], what: &str) -> Result<(), CliError> {
    if kinds.contains(&c.topology) {
        Ok(())
    } else {
        Err(CliError::config(
            "overlay",
            format!("{what} applies to {kinds:?} topologies only"),
        ))
    }
}

impl Overlay {
    pub fn from_name(name: &str) -> Result<Self, CliError> {
        Ok(match name {
            "clt" => Overlay::Clt,
            "path_gaussian" => Overlay::PathGaussian,
            "free_braid" => Overlay::FreeBraid,
            "short_time" => Overlay::ShortTime,
            "bound_lower" => Overlay::BoundLower,
            "bound_upper" => Overlay::BoundUpper,
            "rho_asym" => Overlay::RhoAsym,
            other => {
                return Err(CliError::config(
                    "overlay",
                    format!(
                        "unknown theory `{other}`; expected clt, path_gaussian, free_braid, short_time, \
                         bound_lower, bound_upper or rho_asym"
                    ),
                ))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Overlay::Clt => "clt",
            Overlay::PathGaussian => "path_gaussian",
            Overlay::FreeBraid => "free_braid",
            Overlay::ShortTime => "short_time",
            Overlay::BoundLower => "bound_lower",
            Overlay::BoundUpper => "bound_upper",
            Overlay::RhoAsym => "rho_asym",
        }
    }

    /// Rejects configurations the prediction does not describe.
    pub fn check(self, c: &ExperimentConfig) -> Result<(), CliError> {
        let label = self.name();
        match self {
            Overlay::Clt => {
                need(c, &[TopologyKind::Braid], label)?;
                if c.in_degree != Some(1) {
                    return Err(CliError::config(
                        "n",
                        "the clt overlay describes the single chain, n = 1",
                    ));
                }
                unit_tau_min(c)?;
                integral_days("tau_max", c.tau_max)?;
                integral_days("tau_c", c.tau_c)?;
            }
            Overlay::PathGaussian => {
                need(c, &[TopologyKind::Braid], label)?;
                unit_tau_min(c)?;
                integral_days("tau_max", c.tau_max)?;
            }
            Overlay::FreeBraid => need(c, &[TopologyKind::Braid], label)?,
            Overlay::ShortTime | Overlay::RhoAsym => need(c, &[TopologyKind::Drg, TopologyKind::Rg], label)?,
            Overlay::BoundLower | Overlay::BoundUpper => {
                need(c, &[TopologyKind::Drg], label)?;
                unit_tau_min(c)?;
                let tau_max = integral_days("tau_max", c.tau_max)?;
                random_delay_spreading_bounds(c.z.unwrap_or(0.0), 0.0, tau_max)
                    .map_err(|e| CliError::config("z", e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Values at every tick `0..horizon`, as `(t_days, value)`. θ-valued
    /// curves are capped at N.
    pub fn curve(self, c: &ExperimentConfig) -> Result<Vec<(f64, f64)>, CliError> {
        self.check(c)?;
        let grid = c.grid();
        let cap = c.nodes as f64;
        let n = c.in_degree.unwrap_or(1);
        let z = c.z.unwrap_or(0.0);
        let kind = if c.topology == TopologyKind::Rg {
            GraphKind::Undirected
        } else {
            GraphKind::Directed
        };
        let giant = if self == Overlay::RhoAsym {
            Some(solve_v(z)?)
        } else {
            None
        };
        (0..c.horizon_ticks() as i64)
            .map(|tick| {
                let t = grid.days(tick);
                let whole = t.floor() as u32;
                let value = match self {
                    Overlay::Clt => clt_theta_prediction(t, c.tau_max as u32, c.tau_c)?,
                    Overlay::PathGaussian => appendix_b_prediction(t, n as u32, c.tau_max as u32, c.nodes)?,
                    Overlay::FreeBraid => (whole as f64 * (n as f64 - 1.0) + 1.0).min(cap),
                    Overlay::ShortTime => short_time_spreading(z, whole, kind).min(cap),
                    Overlay::BoundLower => random_delay_spreading_bounds(z, t, c.tau_max as u32)?.lower.min(cap),
                    Overlay::BoundUpper => random_delay_spreading_bounds(z, t, c.tau_max as u32)?.upper.min(cap),
                    Overlay::RhoAsym => giant.expect("solved above").rho_asym,
                };
                Ok((t, value))
            })
            .collect()
    }
}

/// Writes a curve as CSV `t_days,value`.
pub fn write_curve<W: Write>(points: &[(f64, f64)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t_days,value")?;
    for (t, v) in points {
        writeln!(out, "{t},{v}")?;
    }
    Ok(())
}

/// Scalar predictions as `(key, value)` pairs.
pub fn scalar(which: Scalar, c: &ExperimentConfig) -> Result<Vec<(String, String)>, CliError> {
    let kv = |k: &str, v: f64| (k.to_string(), v.to_string());
    Ok(match which {
        Scalar::Giant => {
            let z =
                c.z.ok_or_else(|| CliError::config("z", "required for the giant prediction"))?;
            let g = solve_v(z)?;
            vec![
                kv("z", g.z),
                kv("v", g.v),
                kv("s_in", g.s_in),
                kv("s_out", g.s_out),
                kv("s_sc", g.s_sc),
                kv("s_w", g.s_w),
                kv("rho_asym", g.rho_asym),
            ]
        }
        Scalar::Hare => {
            let n = c
                .in_degree
                .ok_or_else(|| CliError::config("n", "required for the hare prediction"))?;
            let h = hare_velocity(n as u32, integral_days("tau_max", c.tau_max)?);
            vec![kv("alpha", h.alpha), ("valid".to_string(), h.valid.to_string())]
        }
        Scalar::Transient => {
            let n = c
                .in_degree
                .ok_or_else(|| CliError::config("n", "required for the transient prediction"))?;
            let model = match c.variant {
                Variant::Free => TransientModel::FreeEqual { tau_0: c.tau_min },
                Variant::Forced => TransientModel::ForcedRandom {
                    tau_max: integral_days("tau_max", c.tau_max)?,
                },
            };
            vec![kv("t_trans_days", transient_estimate(c.nodes, n as u32, model)?)]
        }
        Scalar::Moments => {
            let m = DelayMoments::new(integral_days("tau_max", c.tau_max)?)?;
            vec![kv("mean", m.mean), kv("variance", m.variance)]
        }
        Scalar::ComponentSize => {
            let z =
                c.z.ok_or_else(|| CliError::config("z", "required for the component size"))?;
            vec![kv("mean_component_size", mean_component_size(z)?)]
        }
        Scalar::MinDelay => {
            let tau_max = integral_days("tau_max", c.tau_max)?;
            vec![
                kv("tau_star", c.tau_star as f64),
                kv("probability", min_delay_probability(c.tau_star, tau_max, c.nodes)?),
            ]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn free_braid_curve_is_linear_then_capped() {
        let c = parse_config("variant=free\ntopology=braid\nN=10\nn=3\nR=1\nhorizon=20\ntau_0=1\n").unwrap();
        let curve = Overlay::FreeBraid.curve(&c).unwrap();
        let values: Vec<f64> = curve.iter().map(|p| p.1).take(7).collect();
        assert_eq!(values, vec![1.0, 3.0, 5.0, 7.0, 9.0, 10.0, 10.0]);
    }

    #[test]
    fn clt_curve_starts_with_the_unit_step() {
        let c =
            parse_config("variant=free\ntopology=braid\nN=100\nn=1\nR=2\nhorizon=50\ndelay_mode=per_edge\n").unwrap();
        let curve = Overlay::Clt.curve(&c).unwrap();
        assert_eq!(curve[0], (0.0, 1.0));
        assert_eq!(curve[1], (0.5, 1.0));
        assert!((curve[2].1 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn short_time_uses_the_graph_kind() {
        let d = parse_config("variant=free\ntopology=drg\nN=10000\nz=1.5\nR=1\ntau_0=1\nhorizon=10\n").unwrap();
        let u = parse_config("variant=free\ntopology=rg\nN=10000\nz=1.5\nR=1\ntau_0=1\nhorizon=10\n").unwrap();
        assert!((Overlay::ShortTime.curve(&d).unwrap()[3].1 - 3.375).abs() < 1e-12);
        assert!((Overlay::ShortTime.curve(&u).unwrap()[3].1 - 4.875).abs() < 1e-12);
    }

    #[test]
    fn mismatched_overlay_is_a_config_error() {
        let err = parse_config("variant=free\ntopology=braid\nN=10\nn=2\noverlay=short_time\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = parse_config("variant=free\ntopology=drg\nN=100\nz=12\noverlay=bound_upper\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn scalar_giant_at_two() {
        let c = parse_config("variant=free\ntopology=drg\nN=100\nz=2\n").unwrap();
        let kv = scalar(Scalar::Giant, &c).unwrap();
        let v: f64 = kv.iter().find(|(k, _)| k == "v").unwrap().1.parse().unwrap();
        assert!((v - 0.203187869979980).abs() < 1e-12);
    }
}
