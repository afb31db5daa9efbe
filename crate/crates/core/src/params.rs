//! Simulation parameters and the constants derived from them.
//!
//! Units are fixed by convention: seconds, metres, hertz, watts, bits and
//! packets. Quantities specified in dB or dBm are converted to linear scale
//! when a [`SimParams`] is built, so everything downstream is linear.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

/// AoI violation tolerance, either shared by all pairs or one per pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tolerance {
    Uniform(f64),
    PerPair(Vec<f64>),
}

impl Tolerance {
    pub fn for_pair(&self, k: usize) -> f64 {
        match self {
            Tolerance::Uniform(e) => *e,
            Tolerance::PerPair(v) => v[k],
        }
    }
}

/// How the constant interference term of the local rate model is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterferenceModel {
    /// Per-pair, per-RB exponential moving average of measured interference.
    Ema { smoothing: f64 },
    /// A fixed interference power in watts.
    Fixed(f64),
}

/// Which rate the queue-event indicator inside the drift weight compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorTiming {
    /// The rate realized in the previous slot (indicator false in slot 0).
    PreviousRate,
    /// A tentative rate with the full budget spread uniformly over the own RBs.
    FullPower,
}

/// Every model and experiment parameter, in linear SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Number of transmitter-receiver pairs (K).
    pub pairs: usize,
    /// Number of resource blocks (N).
    pub rbs: usize,
    /// Bandwidth per RB in Hz (omega).
    pub rb_bandwidth: f64,
    /// Slot duration in seconds (tau).
    pub slot: f64,
    /// Per-pair power budget in watts.
    pub max_power: f64,
    /// Packet length in bits (Z).
    pub packet_bits: f64,
    /// Noise power spectral density in W/Hz (N0).
    pub noise_psd: f64,
    /// Status-update arrival bit rate in bits/s (lambda).
    pub arrival_bps: f64,
    /// Age limit in seconds (d).
    pub age_limit: f64,
    pub tolerance: Tolerance,
    pub sigma_th: f64,
    pub xi_th: f64,
    /// Power/stability trade-off weight (V).
    pub tradeoff: f64,
    /// Number of spectral clustering groups (g).
    pub groups: usize,
    /// Gaussian kernel scale in metres (gamma).
    pub kernel_scale: f64,
    /// Similarity cutoff distance in metres (phi).
    pub neighborhood: f64,
    /// Reclustering period in slots (T0).
    pub recluster_period: u64,
    pub pathloss_exponent: f64,
    /// LOS/WLOS path-loss coefficient, linear.
    pub los_coeff: f64,
    /// NLOS path-loss coefficient, linear.
    pub nlos_coeff: f64,
    /// Distance from an intersection within which perpendicular links are WLOS.
    pub intersection_range: f64,
    /// Vehicle speed in m/s.
    pub speed: f64,
    /// Transmitter-receiver separation along the lane, metres.
    pub pair_gap: f64,
    pub area_side: f64,
    pub street_spacing: f64,
    /// Link distances below this are clamped before path loss is evaluated.
    pub min_link_distance: f64,
    pub slots: u64,
    pub seed: u64,
    /// Overrides the queue-event offset psi instead of deriving it.
    pub psi_override: Option<f64>,
    /// Fraction of leading slots excluded from every statistic.
    pub warmup_fraction: f64,
    pub interference: InterferenceModel,
    pub indicator: IndicatorTiming,
    /// Maximum number of raw excess samples retained for fitting.
    pub excess_cap: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            pairs: 80,
            rbs: 20,
            rb_bandwidth: 180e3,
            slot: 3e-3,
            max_power: dbm_to_watts(23.0),
            packet_bits: 4000.0,
            noise_psd: dbm_to_watts(-174.0),
            arrival_bps: 0.5e6,
            age_limit: 60e-3,
            tolerance: Tolerance::Uniform(1e-3),
            sigma_th: 5.0,
            xi_th: -5.0,
            tradeoff: 0.0,
            groups: 10,
            kernel_scale: 30.0,
            neighborhood: 150.0,
            recluster_period: 100,
            pathloss_exponent: 1.61,
            los_coeff: db_to_linear(-68.5),
            nlos_coeff: db_to_linear(-54.5),
            intersection_range: 15.0,
            speed: 60.0 / 3.6,
            pair_gap: 15.0,
            area_side: 250.0,
            street_spacing: 62.5,
            min_link_distance: 1.0,
            slots: 200_000,
            seed: 1,
            psi_override: None,
            warmup_fraction: 0.1,
            interference: InterferenceModel::Ema { smoothing: 0.01 },
            indicator: IndicatorTiming::PreviousRate,
            excess_cap: 1_000_000,
        }
    }
}

/// Constants derived once from a [`SimParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    /// Packets arriving per slot (A).
    pub arrivals_per_slot: f64,
    /// Packets arriving per second (A / tau).
    pub arrivals_per_sec: f64,
    /// Offset of the queue event `Q > R - psi`.
    pub psi: f64,
    /// Bound on the time-averaged conditional excess mean (H).
    pub excess_mean_bound: f64,
    /// Bound on the time-averaged conditional excess second moment (B).
    pub excess_second_moment_bound: f64,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be > 0, got {v}")))
            }
        }
        positive("tau", self.slot)?;
        positive("omega", self.rb_bandwidth)?;
        positive("Z", self.packet_bits)?;
        positive("P_max", self.max_power)?;
        positive("d", self.age_limit)?;
        positive("N0", self.noise_psd)?;
        positive("lambda", self.arrival_bps)?;
        positive("sigma_th", self.sigma_th)?;
        positive("gamma", self.kernel_scale)?;
        positive("phi", self.neighborhood)?;
        positive("alpha", self.pathloss_exponent)?;
        positive("l0", self.los_coeff)?;
        positive("l0_prime", self.nlos_coeff)?;
        positive("speed", self.speed)?;
        positive("pair_gap", self.pair_gap)?;
        positive("area", self.area_side)?;
        positive("street_spacing", self.street_spacing)?;
        positive("min_link_distance", self.min_link_distance)?;
        if !(self.tradeoff >= 0.0 && self.tradeoff.is_finite()) {
            return Err(Error::param("V", format!("must be >= 0, got {}", self.tradeoff)));
        }
        if self.pairs == 0 {
            return Err(Error::param("K", "need at least one pair"));
        }
        if self.rbs == 0 {
            return Err(Error::param("N", "need at least one RB"));
        }
        if self.groups < 2 {
            return Err(Error::param("g", format!("need g >= 2, got {}", self.groups)));
        }
        if self.recluster_period == 0 {
            return Err(Error::param("T0", "must be >= 1"));
        }
        if self.slots == 0 {
            return Err(Error::param("slots", "must be >= 1"));
        }
        if !(self.xi_th < 0.5) {
            return Err(Error::param("xi_th", format!("need xi_th < 1/2, got {}", self.xi_th)));
        }
        match &self.tolerance {
            Tolerance::Uniform(e) => check_tolerance(*e)?,
            Tolerance::PerPair(v) => {
                if v.len() != self.pairs {
                    return Err(Error::param(
                        "epsilon",
                        format!("{} per-pair values for K = {}", v.len(), self.pairs),
                    ));
                }
                v.iter().try_for_each(|e| check_tolerance(*e))?;
            }
        }
        let limit = self.los_coeff * (self.intersection_range / 2.0).powf(self.pathloss_exponent);
        if !(self.nlos_coeff < limit) {
            return Err(Error::param(
                "l0_prime",
                format!(
                    "need l0' < l0 (D/2)^alpha, i.e. {:.3} dB < {:.3} dB",
                    linear_to_db(self.nlos_coeff),
                    linear_to_db(limit)
                ),
            ));
        }
        let streets = self.area_side / self.street_spacing;
        if (streets - streets.round()).abs() > 1e-9 {
            return Err(Error::param(
                "street_spacing",
                format!("{} does not divide area side {}", self.street_spacing, self.area_side),
            ));
        }
        if self.pair_gap >= self.street_spacing {
            return Err(Error::param(
                "pair_gap",
                format!("must be shorter than the street spacing {}", self.street_spacing),
            ));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::param("warmup_fraction", "must lie in [0, 1)"));
        }
        match self.interference {
            InterferenceModel::Ema { smoothing } if !(smoothing > 0.0 && smoothing <= 1.0) => {
                return Err(Error::param("interference_smoothing", "must lie in (0, 1]"));
            }
            InterferenceModel::Fixed(i) if !(i >= 0.0 && i.is_finite()) => {
                return Err(Error::param("interference", "must be >= 0"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Effective number of groups: the configured `g`, capped by the pair count.
    pub fn effective_groups(&self) -> usize {
        self.groups.min(self.pairs)
    }

    pub fn warmup_slots(&self) -> u64 {
        (self.slots as f64 * self.warmup_fraction).floor() as u64
    }

    /// Converts a bit rate into packets per slot, `tau / Z` times the rate.
    pub fn packets_per_slot(&self, bits_per_sec: f64) -> f64 {
        bits_per_sec * self.slot / self.packet_bits
    }

    /// Rate weight `tau * omega / Z`: packets per slot per bit/s/Hz on one RB.
    pub fn rate_scale(&self) -> f64 {
        self.slot * self.rb_bandwidth / self.packet_bits
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_psd * self.rb_bandwidth
    }

    /// Mobility displacement per slot in metres.
    pub fn step_length(&self) -> f64 {
        self.speed * self.slot
    }

    pub fn from_toml_str(s: &str) -> Result<SimParams> {
        let file: ConfigFile = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        let p = file.into_params();
        p.validate()?;
        Ok(p)
    }

    pub fn from_toml_file(path: &std::path::Path) -> Result<SimParams> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s)
    }
}

fn check_tolerance(e: f64) -> Result<()> {
    if e > 0.0 && e < 0.5 {
        Ok(())
    } else {
        Err(Error::param("epsilon", format!("need 0 < epsilon << 1, got {e}")))
    }
}

pub fn derive_params(p: &SimParams) -> Result<DerivedParams> {
    p.validate()?;
    let a = p.packets_per_slot(p.arrival_bps);
    let per_sec = a / p.slot;
    if per_sec < 1.0 / p.age_limit {
        return Err(Error::param(
            "lambda",
            format!(
                "need A/tau >= 1/d, got A/tau = {per_sec} packets/s < {} /s",
                1.0 / p.age_limit
            ),
        ));
    }
    let psi = p.psi_override.unwrap_or_else(|| 2.0 - (p.age_limit / p.slot - 1.0) * a);
    let (h, b) = excess_bounds(p.sigma_th, p.xi_th);
    Ok(DerivedParams {
        arrivals_per_slot: a,
        arrivals_per_sec: per_sec,
        psi,
        excess_mean_bound: h,
        excess_second_moment_bound: b,
    })
}

/// Mean and second-moment bounds `(H, B)` implied by GPD thresholds.
pub fn excess_bounds(sigma_th: f64, xi_th: f64) -> (f64, f64) {
    let h = sigma_th / (1.0 - xi_th);
    let b = 2.0 * sigma_th * sigma_th / ((1.0 - xi_th) * (1.0 - 2.0 * xi_th));
    (h, b)
}

/// Inverts [`excess_bounds`]: the `(sigma_th, xi_th)` reproducing given `(H, B)`.
pub fn thresholds_from_bounds(h: f64, b: f64) -> Result<(f64, f64)> {
    if !(h > 0.0 && b > 0.0) {
        return Err(Error::param("H/B", "bounds must be positive"));
    }
    // B / 2H^2 = (1 - xi) / (1 - 2 xi)
    let r = b / (2.0 * h * h);
    if (2.0 * r - 1.0).abs() < 1e-15 {
        return Err(Error::param("H/B", "B = H^2 has no finite shape"));
    }
    let xi = (r - 1.0) / (2.0 * r - 1.0);
    if !(xi < 0.5) {
        return Err(Error::param("H/B", format!("implied shape {xi} >= 1/2")));
    }
    Ok((h * (1.0 - xi), xi))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct ConfigFile {
    K: Option<usize>,
    N: Option<usize>,
    omega: Option<f64>,
    tau: Option<f64>,
    P_max: Option<f64>,
    Z: Option<f64>,
    N0: Option<f64>,
    lambda: Option<f64>,
    d: Option<f64>,
    epsilon: Option<Tolerance>,
    sigma_th: Option<f64>,
    xi_th: Option<f64>,
    V: Option<f64>,
    g: Option<usize>,
    gamma: Option<f64>,
    phi: Option<f64>,
    T0: Option<u64>,
    alpha: Option<f64>,
    l0_db: Option<f64>,
    l0_prime_db: Option<f64>,
    D: Option<f64>,
    speed: Option<f64>,
    pair_gap: Option<f64>,
    area: Option<f64>,
    street_spacing: Option<f64>,
    min_link_distance: Option<f64>,
    slots: Option<u64>,
    seed: Option<u64>,
    psi: Option<f64>,
    warmup_fraction: Option<f64>,
    interference_smoothing: Option<f64>,
    interference: Option<f64>,
    indicator: Option<IndicatorTiming>,
    excess_cap: Option<usize>,
}

impl ConfigFile {
    fn into_params(self) -> SimParams {
        let mut p = SimParams::default();
        macro_rules! set {
            ($($key:ident => $field:ident),* $(,)?) => {
                $( if let Some(v) = self.$key { p.$field = v; } )*
            };
        }
        set! {
            K => pairs, N => rbs, omega => rb_bandwidth, tau => slot, P_max => max_power,
            Z => packet_bits, N0 => noise_psd, lambda => arrival_bps, d => age_limit,
            epsilon => tolerance, sigma_th => sigma_th, xi_th => xi_th, V => tradeoff,
            g => groups, gamma => kernel_scale, phi => neighborhood, T0 => recluster_period,
            alpha => pathloss_exponent, D => intersection_range, speed => speed,
            pair_gap => pair_gap, area => area_side, street_spacing => street_spacing,
            min_link_distance => min_link_distance, slots => slots, seed => seed,
            warmup_fraction => warmup_fraction, indicator => indicator, excess_cap => excess_cap,
        }
        if let Some(db) = self.l0_db {
            p.los_coeff = db_to_linear(db);
        }
        if let Some(db) = self.l0_prime_db {
            p.nlos_coeff = db_to_linear(db);
        }
        p.psi_override = self.psi;
        if let Some(s) = self.interference_smoothing {
            p.interference = InterferenceModel::Ema { smoothing: s };
        }
        if let Some(i) = self.interference {
            p.interference = InterferenceModel::Fixed(i);
        }
        p
    }
}
