//! Transient and period detection.
//!
//! Once the forcing has ended, the state over the last `window` ticks
//! determines the future, so the trajectory is a walk on a finite state
//! space. Brent's algorithm finds the cycle length with O(1) stored
//! states; two copies one period apart then locate the first recurrence.

use super::{CompiledModel, ModelSpec, SimulationState};
use crate::error::Result;

pub const DEFAULT_DETECTION_HORIZON: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Period {
    /// Fixed point.
    Constant,
    Days(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleInfo {
    /// First tick from which the trajectory repeats.
    pub transient_ticks: u64,
    pub period_ticks: u64,
    pub resolution: u32,
    /// Density of active firms averaged over one period.
    pub rho_inf: f64,
}

impl CycleInfo {
    pub fn transient_days(&self) -> f64 {
        self.transient_ticks as f64 / self.resolution as f64
    }

    pub fn period(&self) -> Period {
        if self.period_ticks == 1 {
            Period::Constant
        } else {
            Period::Days(self.period_ticks as f64 / self.resolution as f64)
        }
    }

    pub fn period_days(&self) -> f64 {
        self.period_ticks as f64 / self.resolution as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CycleOutcome {
    Found(CycleInfo),
    /// No recurrence before the detection horizon.
    Exhausted {
        horizon: u64,
    },
}

impl CycleOutcome {
    pub fn found(&self) -> Option<&CycleInfo> {
        match self {
            CycleOutcome::Found(info) => Some(info),
            CycleOutcome::Exhausted { .. } => None,
        }
    }
}

pub fn detect_cycle(spec: &ModelSpec, detection_horizon: u64) -> Result<CycleOutcome> {
    Ok(spec.compile()?.detect_cycle(detection_horizon))
}

impl CompiledModel {
    /// Finds transient and period, searching up to `detection_horizon` ticks.
    pub fn detect_cycle(&self, detection_horizon: u64) -> CycleOutcome {
        let w = self.window;
        let exhausted = CycleOutcome::Exhausted {
            horizon: detection_horizon,
        };
        // the first state whose successors are all unforced
        let mut start = SimulationState::new(self);
        while start.tick() < self.forcing_ticks - 1 {
            start.advance(self);
        }
        let k_min = start.tick();

        let mut tortoise = start.clone();
        let mut hare = start.clone();
        hare.advance(self);
        let (mut power, mut lambda) = (1u64, 1u64);
        while !tortoise.bank.window_equals(&hare.bank, w) {
            if hare.tick() >= detection_horizon as i64 {
                return exhausted;
            }
            if power == lambda {
                tortoise = hare.clone();
                power *= 2;
                lambda = 0;
            }
            hare.advance(self);
            lambda += 1;
        }
        drop(tortoise);
        drop(hare);

        let mut a = start;
        let mut b = a.clone();
        for _ in 0..lambda {
            b.advance(self);
        }
        while !a.bank.window_equals(&b.bank, w) {
            a.advance(self);
            b.advance(self);
        }
        let k0 = a.tick();
        let transient = if k0 > k_min {
            (k0 - w as i64 + 1).max(0)
        } else {
            // already periodic at the first unforced state; the retained
            // history reaches back to tick 0
            let mut s = k_min - w as i64;
            while s >= 0 {
                let lag = (k_min - s) as usize;
                let same = (0..self.nodes()).all(|n| a.bank.bit(n, lag) == b.bank.bit(n, lag));
                if !same {
                    break;
                }
                s -= 1;
            }
            (s + 1).max(0)
        };

        let mut impaired = 0u64;
        for _ in 0..lambda {
            impaired += a.advance(self) as u64;
        }
        let nodes = self.nodes().max(1) as f64;
        CycleOutcome::Found(CycleInfo {
            transient_ticks: transient as u64,
            period_ticks: lambda,
            resolution: self.resolution,
            rho_inf: 1.0 - impaired as f64 / (lambda as f64 * nodes),
        })
    }
}
