//! Closed-form and semi-analytic predictions used as oracles for the
//! simulator. Times are in units of `τ_min` (days).

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Mean and variance of a delay uniform on `{1, …, τ_max}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayMoments {
    pub tau_max: u32,
    pub mean: f64,
    pub variance: f64,
}

impl DelayMoments {
    pub fn new(tau_max: u32) -> Result<Self> {
        if tau_max == 0 {
            return Err(invalid("tau_max", "must be at least 1"));
        }
        let m = tau_max as f64;
        Ok(DelayMoments {
            tau_max,
            mean: (m + 1.0) / 2.0,
            variance: (m + 1.0) * (2.0 * m + 1.0) / 6.0 - (m + 1.0).powi(2) / 4.0,
        })
    }

    /// Gaussian approximation of the probability that `k` delays sum to `total`.
    /// With zero variance (`k = 0` or `τ_max = 1`) the sum is certain.
    pub fn gaussian(&self, total: f64, k: u64) -> f64 {
        let var = k as f64 * self.variance;
        let centre = k as f64 * self.mean;
        if var == 0.0 {
            return if (total - centre).abs() < 1e-9 { 1.0 } else { 0.0 };
        }
        (-(total - centre).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }
}

/// Expected impaired firms on a single chain with random delays, damaged
/// for one day, at time `t`.
fn clt_unit(t: f64, m: &DelayMoments) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    if t < 1.0 {
        return 1.0;
    }
    let tau_max = m.tau_max as f64;
    if t < 2.0 {
        return 1.0 / tau_max;
    }
    let whole = t.floor();
    let top = whole as u64 * m.tau_max as u64;
    if t <= tau_max {
        1.0 / tau_max + (2..=top).map(|k| m.gaussian(whole, k)).sum::<f64>()
    } else {
        let bottom = (t / tau_max).floor() as u64 + 1;
        (bottom..=top).map(|k| m.gaussian(whole, k)).sum()
    }
}

/// `⟨θ_tot(t)⟩` for the free single chain with random delays. A damage of
/// `τ_c` whole days is the superposition of `τ_c` one-day damages started on
/// consecutive days.
pub fn clt_theta_prediction(t: f64, tau_max: u32, tau_c: f64) -> Result<f64> {
    let m = DelayMoments::new(tau_max)?;
    if !(tau_c >= 1.0) || tau_c.fract() != 0.0 {
        return Err(invalid(
            "tau_c",
            format!("must be a positive whole number of days, got {tau_c}"),
        ));
    }
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be non-negative, got {t}")));
    }
    Ok((0..tau_c as u64).map(|s| clt_unit(t - s as f64, &m)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HareVelocity {
    /// Firms per day.
    pub alpha: f64,
    /// Whether `(n, τ_max)` lies where the estimate applies.
    pub valid: bool,
}

/// Average speed of the damage front on a chain of in-degree `n` with
/// delays up to `τ_max`.
pub fn hare_velocity(n: u32, tau_max: u32) -> HareVelocity {
    let alpha = n as f64 - (tau_max as f64 - 1.0);
    let clock = (n as f64 - 1.0) * 2.0 / (tau_max as f64 + 1.0);
    HareVelocity {
        alpha,
        valid: alpha > 0.0 && alpha > clock,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransientModel {
    /// Free chain with all delays equal to `tau_0`.
    FreeEqual { tau_0: f64 },
    /// Forced chain with delays uniform up to `tau_max`.
    ForcedRandom { tau_max: u32 },
}

/// Transient length in days for a chain of `nodes` firms with in-degree `n`.
pub fn transient_estimate(nodes: usize, n: u32, model: TransientModel) -> Result<f64> {
    match model {
        TransientModel::FreeEqual { tau_0 } => {
            if n < 2 {
                return Err(Error::InvalidRegime(format!("free transient needs n >= 2, got {n}")));
            }
            Ok((nodes as f64 - 1.0) / (n as f64 - 1.0) * tau_0)
        }
        TransientModel::ForcedRandom { tau_max } => {
            let h = hare_velocity(n, tau_max);
            if h.alpha <= 0.0 {
                return Err(Error::InvalidRegime(format!(
                    "front velocity {} is not positive",
                    h.alpha
                )));
            }
            Ok(nodes as f64 / h.alpha)
        }
    }
}

/// `(1 − (τ* − 1)/τ_max)^(N²)`.
pub fn min_delay_probability(tau_star: u32, tau_max: u32, nodes: usize) -> Result<f64> {
    if tau_star < 1 || tau_star > tau_max {
        return Err(invalid("tau_star", format!("{tau_star} outside 1..={tau_max}")));
    }
    let base = 1.0 - (tau_star as f64 - 1.0) / tau_max as f64;
    Ok(base.powf((nodes as f64).powi(2)))
}

/// Normalized propagation probabilities `C(t) P_G(t, k)` for
/// `k = t/τ_max, …, t` at a multiple `t` of `τ_max`, with `C(t)`.
pub fn propagation_probabilities(t: u64, tau_max: u32) -> Result<(Vec<f64>, f64)> {
    let m = DelayMoments::new(tau_max)?;
    if !t.is_multiple_of(tau_max as u64) {
        return Err(invalid("t", format!("{t} is not a multiple of tau_max = {tau_max}")));
    }
    let raw: Vec<f64> = (t / tau_max as u64..=t).map(|k| m.gaussian(t as f64, k)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical(format!("propagation probabilities vanish at t = {t}")));
    }
    let c = 1.0 / total;
    Ok((raw.into_iter().map(|p| p * c).collect(), c))
}

fn appendix_b_at_multiple(t: u64, n: u32, tau_max: u32, nodes: usize) -> Result<f64> {
    let (probs, _) = propagation_probabilities(t, tau_max)?;
    let first = t / tau_max as u64;
    let value: f64 = probs
        .iter()
        .enumerate()
        .map(|(i, p)| ((n as f64 - 1.0) * (first + i as u64) as f64 + 1.0) * p)
        .sum();
    Ok(value.min(nodes as f64))
}

/// `⟨θ_tot(t)⟩` for the free chain with in-degree `n` and random delays.
/// Exact at multiples of `τ_max`, linear in between.
pub fn appendix_b_prediction(t: f64, n: u32, tau_max: u32, nodes: usize) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be non-negative, got {t}")));
    }
    DelayMoments::new(tau_max)?;
    let step = tau_max as f64;
    let lo = (t / step).floor() as u64 * tau_max as u64;
    let hi = lo + tau_max as u64;
    let a = appendix_b_at_multiple(lo, n, tau_max, nodes)?;
    if (t - lo as f64).abs() < 1e-12 {
        return Ok(a);
    }
    let b = appendix_b_at_multiple(hi, n, tau_max, nodes)?;
    let frac = (t - lo as f64) / step;
    Ok(a + (b - a) * frac)
}

/// Sizes of the giant components of a directed random graph with mean
/// degree `z`, as fractions of `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GiantComponentSolution {
    pub z: f64,
    /// Probability that a node lies in a finite component.
    pub v: f64,
    pub s_in: f64,
    pub s_out: f64,
    pub s_sc: f64,
    pub s_w: f64,
    /// Asymptotic density of active firms after a single damage.
    pub rho_asym: f64,
}

impl GiantComponentSolution {
    fn from_v(z: f64, v: f64) -> Self {
        GiantComponentSolution {
            z,
            v,
            s_in: 1.0 - v,
            s_out: 1.0 - v,
            s_sc: (1.0 - v).powi(2),
            s_w: 1.0 - v * v,
            rho_asym: 2.0 * v - v * v,
        }
    }

    pub fn residual(&self) -> f64 {
        (self.v - (self.z * (self.v - 1.0)).exp()).abs()
    }
}

/// Root of `v = e^{z(v−1)}` in `(0, 1)` for `z > 1`; `v = 1` otherwise.
pub fn solve_v(z: f64) -> Result<GiantComponentSolution> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(invalid("z", format!("must be a finite non-negative degree, got {z}")));
    }
    if z <= 1.0 {
        return Ok(GiantComponentSolution::from_v(z, 1.0));
    }
    let f = |v: f64| v - (z * (v - 1.0)).exp();
    let (mut lo, mut hi) = (0.0f64, 1.0 - 1e-15);
    if f(lo) >= 0.0 || f(hi) <= 0.0 {
        return Err(Error::Numerical(format!("no sign change bracketing v for z = {z}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..5 {
        let slope = 1.0 - z * (z * (v - 1.0)).exp();
        if slope == 0.0 {
            break;
        }
        let next = v - f(v) / slope;
        if !(next > 0.0 && next < 1.0) {
            break;
        }
        v = next;
    }
    let sol = GiantComponentSolution::from_v(z, v);
    if sol.residual() >= 1e-12 {
        return Err(Error::Numerical(format!(
            "v(z = {z}) did not converge, residual {}",
            sol.residual()
        )));
    }
    Ok(sol)
}

/// `|v(2z) − v(z)²|`.
pub fn doubling_gap(z: f64) -> Result<f64> {
    Ok((solve_v(2.0 * z)?.v - solve_v(z)?.v.powi(2)).abs())
}

/// Mean number of nodes reached from a random node below the transition.
pub fn mean_component_size(z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(invalid("z", format!("must be non-negative, got {z}")));
    }
    if z >= 1.0 {
        return Err(Error::Divergent(format!(
            "mean component size is infinite for z = {z} >= 1"
        )));
    }
    Ok(1.0 / (1.0 - z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Directed,
    Undirected,
}

/// Early growth of `⟨θ_tot⟩` at whole day `t` with unit delays.
pub fn short_time_spreading(z: f64, t: u32, kind: GraphKind) -> f64 {
    match kind {
        GraphKind::Directed => z.powi(t as i32),
        GraphKind::Undirected => (0..=t / 2).map(|l| z.powi((t - 2 * l) as i32)).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadingBounds {
    pub lower: f64,
    pub upper: f64,
    pub z_eff_lower: f64,
    pub z_eff_upper: f64,
}

/// Envelope of `⟨θ_tot(t)⟩` on a directed random graph with delays uniform
/// up to `τ_max`: `(z/τ_max) z_eff^{t/τ_av}` with `z_eff ∈ {z, z/(1 − z/τ_max)}`.
pub fn random_delay_spreading_bounds(z: f64, t: f64, tau_max: u32) -> Result<SpreadingBounds> {
    if !(z > 1.0) {
        return Err(Error::InvalidRegime(format!("spreading bounds need z > 1, got {z}")));
    }
    let tm = tau_max as f64;
    if z >= tm {
        return Err(Error::Divergent(format!(
            "upper bound needs z < tau_max, got z = {z}, tau_max = {tm}"
        )));
    }
    let tau_av = (tm + 1.0) / 2.0;
    let upper_z = z / (1.0 - z / tm);
    let f = |ze: f64| z / tm * ze.powf(t / tau_av);
    Ok(SpreadingBounds {
        lower: f(z),
        upper: f(upper_z),
        z_eff_lower: z,
        z_eff_upper: upper_z,
    })
}

/// Poisson degree generating functions `G₀ = G₁ = e^{z(y−1)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratingFunctions {
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfResidual {
    /// `|v − G₁(v)|`.
    pub fixed_point: f64,
    /// `|s − (1 − G₀(v))|`.
    pub giant_size: f64,
}

impl GeneratingFunctions {
    pub fn new(z: f64) -> Result<Self> {
        if !(z >= 0.0) {
            return Err(invalid("z", format!("must be non-negative, got {z}")));
        }
        Ok(GeneratingFunctions { z })
    }

    pub fn g0(&self, y: f64) -> f64 {
        (self.z * (y - 1.0)).exp()
    }

    pub fn g1(&self, y: f64) -> f64 {
        self.g0(y)
    }

    pub fn g0_prime(&self, y: f64) -> f64 {
        self.z * self.g0(y)
    }

    pub fn g1_prime(&self, y: f64) -> f64 {
        self.g0_prime(y)
    }

    /// Mean component size from `1 + G₀'(1)/(1 − G₁'(1))`.
    pub fn mean_component_size(&self) -> Result<f64> {
        let d = 1.0 - self.g1_prime(1.0);
        if d <= 0.0 {
            return Err(Error::Divergent(format!(
                "mean component size is infinite for z = {}",
                self.z
            )));
        }
        Ok(1.0 + self.g0_prime(1.0) / d)
    }

    pub fn residual(&self, v: f64, giant: f64) -> GfResidual {
        GfResidual {
            fixed_point: (v - self.g1(v)).abs(),
            giant_size: (giant - (1.0 - self.g0(v))).abs(),
        }
    }
}
