//! Generalized Pareto tail modeling of conditional queue excesses.
//!
//! ```text
//! G(x; sigma, xi) = 1 - (max(1 + xi x / sigma, 0))^(-1/xi)   xi != 0
//!                 = 1 - exp(-x / sigma)                     xi == 0
//! ```
//!
//! Mean `sigma / (1 - xi)` exists for `xi < 1`, variance
//! `sigma^2 / ((1 - xi)^2 (1 - 2 xi))` for `xi < 1/2`. For `xi < 0` the
//! support ends at `-sigma / xi`.
//!
//! Fitting is by the method of moments, which inverts the two moment
//! formulas exactly; an optional Newton maximum-likelihood refinement
//! starts from the moment estimate.

use serde::Serialize;

use crate::error::{Error, Result};

/// Shapes closer to zero than this use the exponential branch.
pub const XI_ZERO: f64 = 1e-8;

/// Minimum sample count before a fit is reported.
pub const DEFAULT_SAMPLE_FLOOR: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GpdParams {
    pub sigma: f64,
    pub xi: f64,
}

impl GpdParams {
    pub fn new(sigma: f64, xi: f64) -> Result<GpdParams> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("scale must be > 0, got {sigma}")));
        }
        if !(xi < 0.5) {
            return Err(Error::Domain {
                what: "shape must be < 1/2",
                xi,
            });
        }
        Ok(GpdParams { sigma, xi })
    }

    /// Right end of the support, `-sigma / xi` for negative shapes.
    pub fn support_end(&self) -> f64 {
        if self.xi < -XI_ZERO {
            -self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        gpd_cdf(x, self)
    }

    /// Inverse CDF, for sampling by inverse transform.
    pub fn quantile(&self, u: f64) -> f64 {
        if self.xi.abs() < XI_ZERO {
            -self.sigma * (-u).ln_1p()
        } else {
            self.sigma / self.xi * ((1.0 - u).powf(-self.xi) - 1.0)
        }
    }

    pub fn moments(&self) -> (f64, f64) {
        // the constructor already enforces xi < 1/2
        (
            self.sigma / (1.0 - self.xi),
            self.sigma * self.sigma / ((1.0 - self.xi).powi(2) * (1.0 - 2.0 * self.xi)),
        )
    }
}

pub fn gpd_cdf(x: f64, p: &GpdParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if p.xi.abs() < XI_ZERO {
        return -(-x / p.sigma).exp_m1();
    }
    let base = (1.0 + p.xi * x / p.sigma).max(0.0);
    1.0 - base.powf(-1.0 / p.xi)
}

/// Mean and variance for raw `(sigma, xi)`, with domain checks.
pub fn gpd_moments(sigma: f64, xi: f64) -> Result<(f64, f64)> {
    if !(xi < 1.0) {
        return Err(Error::Domain {
            what: "mean requires xi < 1",
            xi,
        });
    }
    if !(xi < 0.5) {
        return Err(Error::Domain {
            what: "variance requires xi < 1/2",
            xi,
        });
    }
    Ok(GpdParams { sigma, xi }.moments())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Moments,
    Mle,
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitMethod::Moments => "moments",
            FitMethod::Mle => "mle",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport {
    pub params: GpdParams,
    pub n: usize,
    pub ks: f64,
    pub method: FitMethod,
}

fn check_samples(samples: &[f64], floor: usize) -> Result<()> {
    if samples.len() < floor.max(1) {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            need: floor.max(1),
        });
    }
    if let Some(bad) = samples.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::DegenerateSample(format!(
            "excess samples must be positive, found {bad}"
        )));
    }
    Ok(())
}

fn mean_var(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Method-of-moments fit with the default sample floor.
pub fn fit_moments(samples: &[f64]) -> Result<FitReport> {
    fit_moments_with_floor(samples, DEFAULT_SAMPLE_FLOOR)
}

/// Method-of-moments fit. Uses the population variance, so the fitted
/// parameters reproduce the sample mean and variance exactly.
pub fn fit_moments_with_floor(samples: &[f64], floor: usize) -> Result<FitReport> {
    check_samples(samples, floor)?;
    let (mean, var) = mean_var(samples);
    if var <= 0.0 {
        return Err(Error::DegenerateSample("zero sample variance".into()));
    }
    let xi = 0.5 * (1.0 - mean * mean / var);
    let sigma = mean * (1.0 - xi);
    if !(sigma > 0.0) {
        return Err(Error::FitFailed(format!("moment scale estimate {sigma} <= 0")));
    }
    let params = GpdParams { sigma, xi };
    Ok(FitReport {
        params,
        n: samples.len(),
        ks: ks_distance(samples, &params)?,
        method: FitMethod::Moments,
    })
}

/// Kolmogorov-Smirnov distance between the samples and a fitted GPD.
pub fn ks_distance(samples: &[f64], p: &GpdParams) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { got: 0, need: 1 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = gpd_cdf(x, p);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    Ok(d)
}

fn log_likelihood(samples: &[f64], sigma: f64, xi: f64) -> f64 {
    if sigma <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let n = samples.len() as f64;
    if xi.abs() < XI_ZERO {
        return -n * sigma.ln() - samples.iter().sum::<f64>() / sigma;
    }
    let mut acc = 0.0;
    for &x in samples {
        let z = 1.0 + xi * x / sigma;
        if z <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += z.ln();
    }
    -n * sigma.ln() - (1.0 + 1.0 / xi) * acc
}

fn gradient(samples: &[f64], sigma: f64, xi: f64) -> [f64; 2] {
    let n = samples.len() as f64;
    let xi = if xi.abs() < 1e-6 { 1e-6f64.copysign(xi) } else { xi };
    let (mut s_xz, mut s_lnz) = (0.0, 0.0);
    for &x in samples {
        let z = 1.0 + xi * x / sigma;
        s_xz += x / z;
        s_lnz += z.ln();
    }
    [
        -n / sigma + (1.0 + xi) / (sigma * sigma) * s_xz,
        s_lnz / (xi * xi) - (1.0 + 1.0 / xi) * s_xz / sigma,
    ]
}

/// Maximum-likelihood refinement by damped Newton iterations from the
/// moment estimate. The Hessian is a central difference of the analytic
/// gradient. Tolerance `1e-8` on the relative step, at most 100 iterations.
pub fn fit_mle(samples: &[f64]) -> Result<FitReport> {
    let start = fit_moments(samples)?;
    let (mut sigma, mut xi) = (start.params.sigma, start.params.xi);
    if xi <= -1.0 {
        return Err(Error::FitFailed(format!(
            "likelihood unbounded for moment shape {xi} <= -1"
        )));
    }
    let mut ll = log_likelihood(samples, sigma, xi);
    let mut converged = false;
    for _ in 0..100 {
        let g = gradient(samples, sigma, xi);
        let hs = 1e-5 * sigma;
        let hx = 1e-5;
        let gs_p = gradient(samples, sigma + hs, xi);
        let gs_m = gradient(samples, sigma - hs, xi);
        let gx_p = gradient(samples, sigma, xi + hx);
        let gx_m = gradient(samples, sigma, xi - hx);
        let h00 = (gs_p[0] - gs_m[0]) / (2.0 * hs);
        let h11 = (gx_p[1] - gx_m[1]) / (2.0 * hx);
        let h01 = 0.5 * ((gs_p[1] - gs_m[1]) / (2.0 * hs) + (gx_p[0] - gx_m[0]) / (2.0 * hx));
        let det = h00 * h11 - h01 * h01;
        let (mut ds, mut dx) = if det > 0.0 && h00 < 0.0 {
            ((-h11 * g[0] + h01 * g[1]) / det, (h01 * g[0] - h00 * g[1]) / det)
        } else {
            // not locally concave: fall back to a small gradient step
            (1e-3 * sigma * g[0].signum(), 1e-3 * g[1].signum())
        };
        let mut accepted = false;
        for _ in 0..50 {
            let (s2, x2) = (sigma + ds, xi + dx);
            let ll2 = if x2 < 0.5 {
                log_likelihood(samples, s2, x2)
            } else {
                f64::NEG_INFINITY
            };
            if ll2.is_finite() && ll2 >= ll - 1e-12 * ll.abs() {
                sigma = s2;
                xi = x2;
                ll = ll2;
                accepted = true;
                break;
            }
            ds *= 0.5;
            dx *= 0.5;
        }
        if !accepted || (ds.abs() / sigma < 1e-8 && dx.abs() < 1e-8) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailed("Newton iterations did not converge".into()));
    }
    let params = GpdParams::new(sigma, xi)?;
    Ok(FitReport {
        params,
        n: samples.len(),
        ks: ks_distance(samples, &params)?,
        method: FitMethod::Mle,
    })
}
