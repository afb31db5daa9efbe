//! Link gains and rates.
//!
//! Path loss follows three regimes on the street grid: LOS along a shared
//! (or parallel) street with the Euclidean distance, WLOS around a corner
//! near an intersection with the Manhattan distance, and NLOS around a
//! corner far from the intersection with the product of the coordinate
//! offsets. Small-scale fading is Rayleigh block fading, i.e. a unit-mean
//! exponential power gain drawn per link, RB and slot.

use rand::Rng;
use rand_distr::Exp1;

use crate::mobility::{Point, RoadGrid};
use crate::params::SimParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkClass {
    Los,
    Wlos,
    Nlos,
}

/// Path-loss model coefficients, all linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub los_coeff: f64,
    pub nlos_coeff: f64,
    pub exponent: f64,
    pub intersection_range: f64,
    pub min_distance: f64,
}

impl PathLoss {
    pub fn from_params(p: &SimParams) -> PathLoss {
        PathLoss {
            los_coeff: p.los_coeff,
            nlos_coeff: p.nlos_coeff,
            exponent: p.pathloss_exponent,
            intersection_range: p.intersection_range,
            min_distance: p.min_link_distance,
        }
    }

    /// Classifies and evaluates the path gain between two on-lane points.
    pub fn gain(&self, x: Point, y: Point, grid: &RoadGrid) -> f64 {
        let class = classify(x, y, grid, self.intersection_range);
        pathloss(class, x, y, self)
    }
}

/// Total link classification over two on-lane positions.
///
/// A shared street gives LOS. Perpendicular streets give WLOS when at least
/// one endpoint is within `range` of the crossing, NLOS otherwise. Distinct
/// parallel streets are treated as LOS. Points off every street (which the
/// mobility model never produces) are treated as LOS.
pub fn classify(x: Point, y: Point, grid: &RoadGrid, range: f64) -> LinkClass {
    let (xh, xv) = grid.lanes_of(x);
    let (yh, yv) = grid.lanes_of(y);
    if (xh.is_some() && xh == yh) || (xv.is_some() && xv == yv) {
        return LinkClass::Los;
    }
    // x on a horizontal street, y on a vertical one, or the other way round
    let corner = match ((xh, yv), (xv, yh)) {
        ((Some(_), Some(_)), _) => Some(([y[0], x[1]], x, y)),
        (_, (Some(_), Some(_))) => Some(([x[0], y[1]], x, y)),
        _ => None,
    };
    match corner {
        Some((c, a, b)) => {
            let da = (a[0] - c[0]).abs() + (a[1] - c[1]).abs();
            let db = (b[0] - c[0]).abs() + (b[1] - c[1]).abs();
            if da <= range || db <= range {
                LinkClass::Wlos
            } else {
                LinkClass::Nlos
            }
        }
        None => LinkClass::Los,
    }
}

/// Linear path gain for a classified link.
///
/// A degenerate NLOS geometry with a zero coordinate offset is evaluated as
/// WLOS. Every distance measure is clamped below at `min_distance`.
pub fn pathloss(class: LinkClass, x: Point, y: Point, m: &PathLoss) -> f64 {
    let dx = (x[0] - y[0]).abs();
    let dy = (x[1] - y[1]).abs();
    let (coeff, dist) = match class {
        LinkClass::Los => (m.los_coeff, (dx * dx + dy * dy).sqrt()),
        LinkClass::Nlos if dx > 0.0 && dy > 0.0 => (m.nlos_coeff, dx * dy),
        LinkClass::Wlos | LinkClass::Nlos => (m.los_coeff, dx + dy),
    };
    coeff * dist.max(m.min_distance).powf(-m.exponent)
}

/// One unit-mean exponential fading draw.
pub fn fade<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Exp1)
}

/// Packets per slot delivered over a set of RBs:
/// `(tau / Z) sum_n omega log2(1 + P_n h_n / (N0 omega + I_n))`.
///
/// `scale` is `tau * omega / Z` and `noise` is `N0 * omega`.
pub fn rate(powers: &[f64], gains: &[f64], interference: &[f64], noise: f64, scale: f64) -> f64 {
    debug_assert_eq!(powers.len(), gains.len());
    debug_assert_eq!(powers.len(), interference.len());
    let bits: f64 = powers
        .iter()
        .zip(gains)
        .zip(interference)
        .map(|((&p, &h), &i)| (p * h / (noise + i)).ln_1p())
        .sum();
    scale * bits / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{db_to_linear, linear_to_db};
    use crate::rng::{stream, Stream};

    fn grid() -> RoadGrid {
        RoadGrid::new(250.0, 62.5).unwrap()
    }

    fn model() -> PathLoss {
        PathLoss::from_params(&SimParams::default())
    }

    #[test]
    fn classification_cases() {
        let g = grid();
        assert_eq!(classify([10.0, 62.5], [25.0, 62.5], &g, 15.0), LinkClass::Los);
        // perpendicular, tx 10 m from the crossing at (62.5, 125)
        assert_eq!(classify([52.5, 125.0], [62.5, 175.0], &g, 15.0), LinkClass::Wlos);
        assert_eq!(classify([62.5, 175.0], [52.5, 125.0], &g, 15.0), LinkClass::Wlos);
        // both 50 m from the crossing
        assert_eq!(classify([12.5, 125.0], [62.5, 175.0], &g, 15.0), LinkClass::Nlos);
        // parallel distinct streets
        assert_eq!(classify([10.0, 62.5], [10.0, 125.0], &g, 15.0), LinkClass::Los);
        // a point at an intersection shares the vertical street
        assert_eq!(classify([62.5, 62.5], [62.5, 100.0], &g, 15.0), LinkClass::Los);
    }

    #[test]
    fn los_at_fifteen_metres() {
        let g = pathloss(LinkClass::Los, [0.0, 0.0], [15.0, 0.0], &model());
        let expected = -68.5 - 16.1 * 15f64.log10();
        assert!((linear_to_db(g) - expected).abs() < 1e-9);
        assert!((expected + 87.435).abs() < 0.01);
    }

    #[test]
    fn wlos_equals_los_at_same_norm_value() {
        let m = model();
        let los = pathloss(LinkClass::Los, [0.0, 0.0], [20.0, 0.0], &m);
        let wlos = pathloss(LinkClass::Wlos, [0.0, 0.0], [12.0, 8.0], &m);
        assert!((los - wlos).abs() <= 1e-15 * los);
    }

    #[test]
    fn nlos_never_exceeds_wlos_at_boundary() {
        let m = model();
        // both endpoints exactly at the intersection range: the NLOS product
        // D*D against the WLOS sum 2D
        let r = m.intersection_range;
        let x = [0.0, r];
        let y = [r, 0.0];
        assert!(pathloss(LinkClass::Nlos, x, y, &m) < pathloss(LinkClass::Wlos, x, y, &m));
        // consistency condition at table values
        let rhs = -68.5 + 16.1 * 7.5f64.log10();
        assert!((rhs + 54.41).abs() < 0.01);
        assert!(linear_to_db(m.nlos_coeff) < rhs);
    }

    #[test]
    fn degenerate_nlos_falls_back_to_wlos() {
        let m = model();
        let a = pathloss(LinkClass::Nlos, [0.0, 0.0], [0.0, 30.0], &m);
        let b = pathloss(LinkClass::Wlos, [0.0, 0.0], [0.0, 30.0], &m);
        assert_eq!(a, b);
    }

    #[test]
    fn rate_one_bit_per_hz() {
        let noise = 1e-15;
        let r = rate(&[1.0], &[noise], &[0.0], noise, 3e-3 * 180e3 / 4000.0);
        assert!((r - 0.135).abs() < 1e-12);
        assert_eq!(rate(&[0.0, 0.0], &[1.0, 2.0], &[0.0, 1.0], noise, 1.0), 0.0);
    }

    #[test]
    fn rate_monotone() {
        let base = rate(&[0.1, 0.2], &[1e-9, 2e-9], &[1e-12, 1e-12], 1e-15, 0.135);
        assert!(rate(&[0.11, 0.2], &[1e-9, 2e-9], &[1e-12, 1e-12], 1e-15, 0.135) > base);
        assert!(rate(&[0.1, 0.2], &[1e-9, 2e-9], &[2e-12, 1e-12], 1e-15, 0.135) < base);
    }

    #[test]
    fn fading_unit_mean() {
        let mut rng = stream(4, Stream::Fading);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| fade(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn gain_dispatches_on_class() {
        let g = grid();
        let m = model();
        let x = [12.5, 125.0];
        let y = [62.5, 175.0];
        let direct = pathloss(LinkClass::Nlos, x, y, &m);
        assert_eq!(m.gain(x, y, &g), direct);
        assert!(m.gain(x, y, &g) < db_to_linear(-100.0));
    }
}
