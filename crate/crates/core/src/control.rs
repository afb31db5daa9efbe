//! Lyapunov control: virtual queues, the per-slot drift weight and the
//! local power allocation, plus surrogate baseline policies.

use std::f64::consts::LN_2;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Virtual queues of one pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct VirtualQueues {
    /// Conditional excess mean constraint (packets).
    pub excess: f64,
    /// Conditional excess second moment constraint (packets squared).
    pub second_moment: f64,
    /// Queue stability constraint, average rate above the arrival rate.
    pub rate: f64,
    /// Rate-weighted queue event frequency constraint.
    pub event: f64,
}

/// Inputs of one virtual-queue update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualUpdate {
    /// Conditional excess `X` when the queue event occurred.
    pub excess: Option<f64>,
    pub rate: f64,
    pub arrivals: f64,
    pub tolerance: f64,
    pub mean_bound: f64,
    pub second_moment_bound: f64,
}

pub fn update_virtual(j: &VirtualQueues, u: &VirtualUpdate) -> VirtualQueues {
    let (ind, x) = match u.excess {
        Some(x) => (1.0, x),
        None => (0.0, 0.0),
    };
    VirtualQueues {
        excess: (j.excess + (x - u.mean_bound) * ind).max(0.0),
        second_moment: (j.second_moment + (x * x - u.second_moment_bound) * ind).max(0.0),
        rate: (j.rate - u.rate + u.arrivals).max(0.0),
        event: (j.event + u.rate * ind - u.rate * u.tolerance).max(0.0),
    }
}

/// Inputs of the drift weight of one pair in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftInputs {
    pub queue: f64,
    /// Rate the queue event is tested against; `None` means no event.
    pub reference_rate: Option<f64>,
    pub arrivals: f64,
    pub tolerance: f64,
    pub psi: f64,
    /// `tau * omega / Z`.
    pub scale: f64,
}

/// Weight multiplying `log2(1 + SINR)` in the per-slot power problem:
///
/// ```text
/// (tau omega / Z) [ J_R + A + Q + J_Q eps
///     + (-J_Q + J_X + (2 J_Y + 1)(Q + psi) + 2 (Q + psi)^3) 1{Q > R - psi} ]
/// ```
///
/// A negative weight (large `J_Q` during an event) is clamped to zero: the
/// power problem then has the all-zero solution either way.
pub fn drift_weight(j: &VirtualQueues, d: &DriftInputs) -> f64 {
    let q = d.queue;
    let mut bracket = j.rate + d.arrivals + q + j.event * d.tolerance;
    if d.reference_rate.is_some_and(|r| q > r - d.psi) {
        let qp = q + d.psi;
        bracket += -j.event + j.excess + (2.0 * j.second_moment + 1.0) * qp + 2.0 * qp.powi(3);
    }
    (d.scale * bracket).max(0.0)
}

/// Power split over a pair's own RBs with the multiplier of the budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerDecision {
    pub powers: Vec<f64>,
    pub zeta: f64,
}

impl PowerDecision {
    pub fn zeros(n: usize) -> PowerDecision {
        PowerDecision {
            powers: vec![0.0; n],
            zeta: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// Solves `min sum_n V P_n - w log2(1 + P_n h_n / (N0 omega + I_n))`
/// subject to `sum_n P_n <= P_max`, `P_n >= 0`.
///
/// KKT gives `P_n = max(0, w / ((V + zeta) ln 2) - (N0 omega + I_n) / h_n)`
/// with `zeta = 0` when the budget is slack. When it binds, the common
/// water level is found exactly by sorting the floors `(N0 omega + I_n) / h_n`.
/// With `V = 0` and `w > 0` the budget always binds; with `w = 0` every
/// power is zero.
pub fn waterfill(
    weight: f64,
    gains: &[f64],
    interference: &[f64],
    tradeoff: f64,
    max_power: f64,
    noise: f64,
) -> PowerDecision {
    let n = gains.len();
    debug_assert_eq!(n, interference.len());
    if n == 0 || weight <= 0.0 || max_power <= 0.0 {
        return PowerDecision::zeros(n);
    }
    let floors: Vec<f64> = gains.iter().zip(interference).map(|(&h, &i)| (noise + i) / h).collect();
    if tradeoff > 0.0 {
        let level = weight / (tradeoff * LN_2);
        let powers: Vec<f64> = floors.iter().map(|f| (level - f).max(0.0)).collect();
        if powers.iter().sum::<f64>() < max_power {
            return PowerDecision { powers, zeta: 0.0 };
        }
    }
    let level = water_level(&floors, max_power);
    let powers: Vec<f64> = floors.iter().map(|f| (level - f).max(0.0)).collect();
    let zeta = (weight / (level * LN_2) - tradeoff).max(0.0);
    PowerDecision { powers, zeta }
}

/// Level `mu` with `sum_n max(0, mu - floor_n) = budget`.
fn water_level(floors: &[f64], budget: f64) -> f64 {
    let mut sorted = floors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut prefix = 0.0;
    for (m, &f) in sorted.iter().enumerate() {
        prefix += f;
        let level = (budget + prefix) / (m + 1) as f64;
        if m + 1 == sorted.len() || level <= sorted[m + 1] {
            return level;
        }
    }
    unreachable!("non-empty floors always yield a level")
}

/// Power-allocation policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Policy {
    /// Drift-plus-penalty water-filling.
    Proposed,
    /// Full budget split evenly over the allocated RBs.
    UniformFullPower,
    /// A fixed total power in watts, capped at the budget, split evenly.
    FixedPower(f64),
}

impl Policy {
    pub fn label(&self) -> String {
        match self {
            Policy::Proposed => "proposed".into(),
            Policy::UniformFullPower => "uniform".into(),
            Policy::FixedPower(p) => format!("fixed:{p}"),
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Policy> {
        match s {
            "proposed" => Ok(Policy::Proposed),
            "uniform" | "uniform-full-power" => Ok(Policy::UniformFullPower),
            _ => match s.strip_prefix("fixed:") {
                Some(p) => p
                    .parse::<f64>()
                    .ok()
                    .filter(|p| *p >= 0.0 && p.is_finite())
                    .map(Policy::FixedPower)
                    .ok_or_else(|| Error::Config(format!("bad fixed power in policy `{s}`"))),
                None => Err(Error::Config(format!(
                    "unknown policy `{s}` (expected proposed, uniform or fixed:P)"
                ))),
            },
        }
    }
}

/// Even power split used by the baseline policies.
pub fn baseline_policy(policy: Policy, rbs: usize, max_power: f64) -> Result<PowerDecision> {
    let total = match policy {
        Policy::UniformFullPower => max_power,
        Policy::FixedPower(p) => p.min(max_power),
        Policy::Proposed => return Err(Error::Config("the proposed policy is not a baseline".into())),
    };
    if rbs == 0 {
        return Ok(PowerDecision::zeros(0));
    }
    Ok(PowerDecision {
        powers: vec![total / rbs as f64; rbs],
        zeta: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::dbm_to_watts;
    use proptest::prelude::*;

    fn upd(excess: Option<f64>, rate: f64) -> VirtualUpdate {
        VirtualUpdate {
            excess,
            rate,
            arrivals: 0.375,
            tolerance: 1e-3,
            mean_bound: 0.8334,
            second_moment_bound: 0.7576,
        }
    }

    #[test]
    fn virtual_queue_examples() {
        let j = VirtualQueues {
            excess: 1.0,
            second_moment: 2.0,
            rate: 3.0,
            event: 4.0,
        };
        let n = update_virtual(&j, &upd(None, 0.375));
        assert_eq!((n.excess, n.second_moment, n.rate), (1.0, 2.0, 3.0));
        assert!((n.event - (4.0 - 0.375e-3)).abs() < 1e-15);

        let j = VirtualQueues {
            event: 10.0,
            ..Default::default()
        };
        let n = update_virtual(&j, &upd(Some(1.0), 2.0));
        assert!((n.event - 11.998).abs() < 1e-12);

        let n = update_virtual(&VirtualQueues::default(), &upd(Some(0.5), 2.0));
        assert_eq!(n.excess, 0.0);
    }

    #[test]
    fn drift_weight_examples() {
        let scale = 3e-3 * 180e3 / 4000.0;
        let base = DriftInputs {
            queue: 0.0,
            reference_rate: None,
            arrivals: 0.375,
            tolerance: 1e-3,
            psi: -5.125,
            scale,
        };
        let w = drift_weight(&VirtualQueues::default(), &base);
        assert!((w - scale * 0.375).abs() < 1e-15);

        let j = VirtualQueues {
            rate: 1.0,
            event: 100.0,
            ..Default::default()
        };
        let w = drift_weight(
            &j,
            &DriftInputs {
                queue: 2.0,
                reference_rate: Some(10.0),
                ..base
            },
        );
        assert!((w - scale * 3.475).abs() < 1e-12);

        // Q + psi = 1 with the event on: bracket gains 1 + 2 = 3
        let d = DriftInputs {
            queue: 6.125,
            reference_rate: Some(0.0),
            ..base
        };
        let w = drift_weight(&VirtualQueues::default(), &d);
        assert!((w - scale * (0.375 + 6.125 + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn drift_weight_clamps_negative() {
        let j = VirtualQueues {
            event: 1e6,
            ..Default::default()
        };
        let d = DriftInputs {
            queue: 6.0,
            reference_rate: Some(0.0),
            arrivals: 0.375,
            tolerance: 1e-3,
            psi: -5.125,
            scale: 1.0,
        };
        assert_eq!(drift_weight(&j, &d), 0.0);
    }

    #[test]
    fn waterfill_examples() {
        let d = waterfill(1.0, &[1e-9], &[0.0], 0.0, 0.2, 1e-15);
        assert!((d.powers[0] - 0.2).abs() < 1e-15);
        let d = waterfill(1.0, &[1e-9, 1e-9], &[1e-12, 1e-12], 0.0, 0.2, 1e-15);
        assert!((d.powers[0] - 0.1).abs() < 1e-15 && (d.powers[1] - 0.1).abs() < 1e-15);
        // V above w h / (N0 omega ln 2) on every RB: all off
        let (w, h, n0) = (0.5, 1e-9, 1e-15);
        let v = w * h / (n0 * LN_2) * 1.01;
        let d = waterfill(w, &[h, h / 2.0], &[0.0, 0.0], v, 0.2, n0);
        assert_eq!(d.powers, vec![0.0, 0.0]);
        assert_eq!(d.zeta, 0.0);
        assert_eq!(waterfill(0.0, &[1.0], &[0.0], 0.0, 0.2, 1.0).total(), 0.0);
    }

    #[test]
    fn baseline_examples() {
        let pmax = dbm_to_watts(23.0);
        assert!((pmax - 0.19953).abs() < 1e-5);
        let d = baseline_policy(Policy::UniformFullPower, 2, pmax).unwrap();
        assert!((d.powers[0] - 0.099763).abs() < 1e-6);
        assert_eq!(baseline_policy(Policy::FixedPower(0.0), 3, pmax).unwrap().total(), 0.0);
        let d = baseline_policy(Policy::FixedPower(2.0 * pmax), 4, pmax).unwrap();
        assert!((d.total() - pmax).abs() < 1e-15);
        assert!(baseline_policy(Policy::Proposed, 2, pmax).is_err());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("proposed".parse::<Policy>().unwrap(), Policy::Proposed);
        assert_eq!("uniform".parse::<Policy>().unwrap(), Policy::UniformFullPower);
        assert_eq!("fixed:0.1".parse::<Policy>().unwrap(), Policy::FixedPower(0.1));
        assert!("fixed:x".parse::<Policy>().is_err());
        assert!("greedy".parse::<Policy>().is_err());
    }

    proptest! {
        #[test]
        fn kkt_residuals_and_budget(
            w in 1e-3f64..10.0,
            gains in proptest::collection::vec(1e-11f64..1e-8, 1..6),
            interf in proptest::collection::vec(0.0f64..1e-10, 6),
            v_exp in -3.0f64..3.0,
            v_zero in any::<bool>(),
        ) {
            let noise = 7e-16;
            let pmax = 0.2;
            let n = gains.len();
            let interf = &interf[..n];
            // scale V to the weight so both slack and binding regimes occur
            let v = if v_zero { 0.0 } else { w * 1e-8 / (1e-12 * LN_2) * 10f64.powf(v_exp) * 1e-4 };
            let d = waterfill(w, &gains, interf, v, pmax, noise);
            let total = d.total();
            prop_assert!(total <= pmax * (1.0 + 1e-12));
            let lam = v + d.zeta;
            if d.zeta > 0.0 {
                prop_assert!((total - pmax).abs() <= 1e-9 * pmax);
            }
            for k in 0..n {
                let c = noise + interf[k];
                if d.powers[k] > 0.0 {
                    let marginal = w * gains[k] / ((c + d.powers[k] * gains[k]) * LN_2);
                    prop_assert!((marginal - lam).abs() <= 1e-6 * lam, "{marginal} {lam}");
                } else {
                    prop_assert!(w * gains[k] / (c * LN_2) <= lam * (1.0 + 1e-6));
                }
            }
        }
    }
}
