//! Streaming histograms, CCDF tables and rank correlation.

use serde::Serialize;

/// Histogram with fixed-width buckets below `lin_max` and geometric buckets
/// of ratio `1 + log_step` above it. Buckets are allocated on demand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    width: f64,
    lin_max: f64,
    log_step: f64,
    lin: Vec<u64>,
    log: Vec<u64>,
    count: u64,
    sum: f64,
    max: f64,
}

impl Histogram {
    pub fn new(width: f64, lin_max: f64, log_step: f64) -> Histogram {
        assert!(width > 0.0 && lin_max > 0.0 && log_step > 0.0);
        Histogram {
            width,
            lin_max,
            log_step,
            lin: Vec::new(),
            log: Vec::new(),
            count: 0,
            sum: 0.0,
            max: f64::NEG_INFINITY,
        }
    }

    /// Layout for queue lengths in packets.
    pub fn for_queue() -> Histogram {
        Histogram::new(1e-2, 200.0, 1e-3)
    }

    /// Layout for AoI in seconds.
    pub fn for_aoi(slot: f64) -> Histogram {
        Histogram::new(slot / 30.0, 2000.0 * slot, 1e-3)
    }

    fn lin_buckets(&self) -> usize {
        (self.lin_max / self.width).ceil() as usize
    }

    fn bucket(&self, x: f64) -> usize {
        if x < self.lin_max {
            (x.max(0.0) / self.width) as usize
        } else {
            self.lin_buckets() + ((x / self.lin_max).ln() / self.log_step.ln_1p()) as usize
        }
    }

    fn lower_edge(&self, b: usize) -> f64 {
        let nl = self.lin_buckets();
        if b < nl {
            b as f64 * self.width
        } else {
            self.lin_max * (1.0 + self.log_step).powi((b - nl) as i32)
        }
    }

    fn upper_edge(&self, b: usize) -> f64 {
        let nl = self.lin_buckets();
        if b + 1 < nl {
            (b + 1) as f64 * self.width
        } else if b + 1 == nl {
            self.lin_max
        } else {
            self.lower_edge(b + 1)
        }
    }

    fn slot_mut(&mut self, b: usize) -> &mut u64 {
        let nl = self.lin_buckets();
        let (v, i) = if b < nl {
            (&mut self.lin, b)
        } else {
            (&mut self.log, b - nl)
        };
        if v.len() <= i {
            v.resize(i + 1, 0);
        }
        &mut v[i]
    }

    fn counts(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        let nl = self.lin_buckets();
        self.lin
            .iter()
            .copied()
            .enumerate()
            .chain(self.log.iter().enumerate().map(move |(i, &c)| (nl + i, c)))
    }

    pub fn record(&mut self, x: f64) {
        let b = self.bucket(x);
        *self.slot_mut(b) += 1;
        self.count += 1;
        self.sum += x;
        self.max = self.max.max(x);
    }

    /// Adds another histogram with the same layout.
    pub fn merge(&mut self, other: &Histogram) {
        assert!(
            self.width == other.width && self.lin_max == other.lin_max && self.log_step == other.log_step,
            "histogram layouts differ"
        );
        for (b, c) in other.counts() {
            if c > 0 {
                *self.slot_mut(b) += c;
            }
        }
        self.count += other.count;
        self.sum += other.sum;
        self.max = self.max.max(other.max);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    pub fn max(&self) -> Option<f64> {
        (self.count > 0).then_some(self.max)
    }

    /// Upper edge of the bucket holding the `ceil(p n)`-th smallest sample,
    /// capped at the exact maximum.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        if self.count == 0 {
            return None;
        }
        let rank = ((p.clamp(0.0, 1.0) * self.count as f64).ceil() as u64).max(1);
        let mut seen = 0;
        for (b, c) in self.counts() {
            seen += c;
            if seen >= rank {
                return Some(self.upper_edge(b).min(self.max));
            }
        }
        Some(self.max)
    }

    /// Estimate of `Pr{X > x}`: the fraction of samples in buckets above the
    /// one holding `x`. When `x` is a bucket's lower edge that bucket counts
    /// too, so the value is exact for `Pr{X >= x}` on edges.
    pub fn ccdf(&self, x: f64) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let b = self.bucket(x);
        let own_above = x <= self.lower_edge(b);
        let above: u64 = self
            .counts()
            .filter(|&(i, _)| i > b || (own_above && i == b))
            .map(|(_, c)| c)
            .sum();
        above as f64 / self.count as f64
    }
}

/// One CCDF row: `Pr{X > value} = level`, with the histogram's own
/// estimate of the CCDF at `value` for reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CcdfPoint {
    pub level: f64,
    pub value: f64,
    pub ccdf: f64,
}

/// Quantiles at tail probabilities `10^(-j/10)`, `j = 1, 2, ...`, down to
/// `10 / n`.
pub fn ccdf_table(h: &Histogram) -> Vec<CcdfPoint> {
    let n = h.count();
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let floor = 10.0 / n as f64;
    for j in 1.. {
        let level = 10f64.powf(-(j as f64) / 10.0);
        if level < floor * (1.0 - 1e-9) {
            break;
        }
        let value = h.quantile(1.0 - level).unwrap();
        out.push(CcdfPoint {
            level,
            value,
            ccdf: h.ccdf(value),
        });
    }
    out
}

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let m = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b) = (rx[i] - m, ry[i] - m);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_quantiles_and_ccdf() {
        let mut h = Histogram::new(1.0, 100.0, 1e-3);
        for i in 0..100 {
            h.record(i as f64 + 0.5);
        }
        assert_eq!(h.count(), 100);
        assert_eq!(h.mean(), Some(50.0));
        assert_eq!(h.max(), Some(99.5));
        assert_eq!(h.quantile(0.5), Some(50.0));
        assert_eq!(h.quantile(0.9), Some(90.0));
        assert_eq!(h.quantile(1.0), Some(99.5));
        assert_eq!(h.ccdf(90.0), 0.1);
        assert_eq!(h.ccdf(0.0), 1.0);
    }

    #[test]
    fn log_region_relative_resolution() {
        let mut h = Histogram::new(0.1, 10.0, 1e-3);
        for x in [12.0, 150.0, 3000.0] {
            h.record(x);
        }
        let q = h.quantile(0.5).unwrap();
        assert!((150.0..=150.0 * 1.001 + 1e-9).contains(&q), "{q}");
        assert!((h.ccdf(149.0) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_histogram() {
        let h = Histogram::for_queue();
        assert_eq!(h.quantile(0.5), None);
        assert_eq!(h.ccdf(1.0), 0.0);
        assert!(ccdf_table(&h).is_empty());
    }

    #[test]
    fn ccdf_table_floor() {
        let mut h = Histogram::new(1.0, 1000.0, 1e-3);
        for i in 0..1000 {
            h.record(i as f64);
        }
        let t = ccdf_table(&h);
        // levels 10^-0.1 ... 10^-2 inclusive
        assert_eq!(t.len(), 20);
        assert!((t.last().unwrap().level - 0.01).abs() < 1e-12);
        assert!(t.windows(2).all(|w| w[0].value <= w[1].value));
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = Histogram::new(1.0, 10.0, 0.01);
        let mut b = a.clone();
        a.record(1.5);
        b.record(50.0);
        a.merge(&b);
        assert_eq!(a.count(), 2);
        assert_eq!(a.max(), Some(50.0));
        assert_eq!(a.ccdf(5.0), 0.5);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 40.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        let r = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!(r > 0.9 && r < 1.0);
    }

    proptest! {
        #[test]
        fn quantile_brackets_exact(xs in proptest::collection::vec(0.0f64..500.0, 1..300), p in 0.0f64..1.0) {
            let mut h = Histogram::new(0.5, 100.0, 1e-3);
            xs.iter().for_each(|&x| h.record(x));
            let mut s = xs.clone();
            s.sort_by(f64::total_cmp);
            let rank = ((p * s.len() as f64).ceil() as usize).max(1);
            let exact = s[rank - 1];
            let q = h.quantile(p).unwrap();
            prop_assert!(q >= exact - 1e-12);
            prop_assert!(q <= exact + 0.5 + 1e-9 || q <= exact * 1.001 + 1e-9);
        }
    }
}
