//! CSV artifacts of runs and sweeps.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use csv::Writer;

use crate::clustering::{GroupAssignment, RbMap};
use crate::error::{Error, Result};
use crate::evt::FitReport;
use crate::metrics::CcdfPoint;
use crate::mobility::PairState;
use crate::sim::{Observer, RunSummary, SlotRecord, SweepAxis, SweepPoint};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `summary.csv`, `ccdf_queue.csv`, `ccdf_aoi.csv`, `gpd_fit.csv`,
/// `gpd_ccdf.csv` and `excess.csv` into `dir`.
pub fn write_run(dir: &Path, s: &RunSummary) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_summary(&mut Writer::from_path(dir.join("summary.csv"))?, s)?;
    write_ccdf(&mut Writer::from_path(dir.join("ccdf_queue.csv"))?, &s.queue_ccdf)?;
    write_ccdf(&mut Writer::from_path(dir.join("ccdf_aoi.csv"))?, &s.aoi_ccdf)?;
    let mut w = Writer::from_path(dir.join("gpd_fit.csv"))?;
    write_fit_header(&mut w)?;
    if let Some(f) = &s.fit {
        write_fit_row(&mut w, f)?;
        write_fit_ccdf(&mut Writer::from_path(dir.join("gpd_ccdf.csv"))?, &s.excess, f)?;
    }
    w.flush()?;
    write_excess(&mut Writer::from_path(dir.join("excess.csv"))?, &s.excess)?;
    Ok(())
}

pub fn write_summary<W: Write>(w: &mut Writer<W>, s: &RunSummary) -> Result<()> {
    w.write_record([
        "pair",
        "mean_power",
        "mean_aoi",
        "worst_aoi",
        "violation_prob",
        "event_prob",
        "mean_queue",
        "queue_q999",
        "aoi_q999",
        "j_x",
        "j_y",
        "j_r",
        "j_q",
    ])?;
    for p in &s.per_pair {
        let j = p.virtual_queues;
        w.write_record([
            p.pair.to_string(),
            p.mean_power.to_string(),
            opt(p.mean_aoi),
            opt(p.worst_aoi),
            p.violation_prob.to_string(),
            p.event_prob.to_string(),
            p.mean_queue.to_string(),
            opt(p.queue_q999),
            opt(p.aoi_q999),
            j.excess.to_string(),
            j.second_moment.to_string(),
            j.rate.to_string(),
            j.event.to_string(),
        ])?;
    }
    let mean_queue = s.per_pair.iter().map(|p| p.mean_queue).sum::<f64>() / s.per_pair.len().max(1) as f64;
    let g = s.virtual_growth;
    let e = s.slots.max(1) as f64;
    w.write_record([
        "all".to_string(),
        s.mean_power.to_string(),
        opt(s.mean_aoi),
        opt(s.worst_aoi),
        s.violation_prob.to_string(),
        s.event_prob.to_string(),
        mean_queue.to_string(),
        opt(s.queue_quantile(0.999)),
        opt(s.aoi_quantile(0.999)),
        (g.excess * e).to_string(),
        (g.second_moment * e).to_string(),
        (g.rate * e).to_string(),
        (g.event * e).to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_ccdf<W: Write>(w: &mut Writer<W>, table: &[CcdfPoint]) -> Result<()> {
    w.write_record(["value", "ccdf", "level"])?;
    for c in table {
        w.write_record([c.value.to_string(), c.ccdf.to_string(), c.level.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fit_header<W: Write>(w: &mut Writer<W>) -> Result<()> {
    w.write_record(["sigma", "xi", "n", "ks", "method"])?;
    Ok(())
}

pub fn write_fit_row<W: Write>(w: &mut Writer<W>, f: &FitReport) -> Result<()> {
    w.write_record([
        f.params.sigma.to_string(),
        f.params.xi.to_string(),
        f.n.to_string(),
        f.ks.to_string(),
        f.method.to_string(),
    ])?;
    Ok(())
}

/// Empirical and fitted CCDF of the excesses at 200 evenly spaced points
/// up to the sample maximum.
pub fn write_fit_ccdf<W: Write>(w: &mut Writer<W>, samples: &[f64], f: &FitReport) -> Result<()> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let max = sorted.last().copied().unwrap_or(0.0);
    w.write_record(["x", "empirical", "fitted"])?;
    for i in 0..=200 {
        let x = max * i as f64 / 200.0;
        let above = sorted.len() - sorted.partition_point(|&s| s <= x);
        w.write_record([
            x.to_string(),
            (above as f64 / n).to_string(),
            (1.0 - f.params.cdf(x)).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_excess<W: Write>(w: &mut Writer<W>, samples: &[f64]) -> Result<()> {
    w.write_record(["excess"])?;
    for x in samples {
        w.write_record([x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an excess dump: the first column of a CSV with a header row.
pub fn read_excess(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("").trim();
        let x = field.parse::<f64>().map_err(|_| {
            Error::Config(format!(
                "{}: row {}: `{field}` is not a number",
                path.display(),
                line + 2
            ))
        })?;
        out.push(x);
    }
    Ok(out)
}

/// Sweep table, one row per point; failed points carry their error.
pub fn write_sweep<W: Write>(w: &mut Writer<W>, axis: SweepAxis, points: &[SweepPoint], age_limit: f64) -> Result<()> {
    w.write_record([
        axis.label(),
        "status",
        "mean_power",
        "mean_aoi",
        "worst_aoi",
        "violation_prob",
        "event_prob",
        "queue_q9999",
        "aoi_q9999",
        "aoi_ccdf_2d",
        "gpd_sigma",
        "gpd_xi",
        "gpd_n",
        "gpd_ks",
        "error",
    ])?;
    for pt in points {
        match &pt.outcome {
            Ok(s) => {
                let f = s.fit.as_ref();
                w.write_record([
                    pt.value.to_string(),
                    "ok".into(),
                    s.mean_power.to_string(),
                    opt(s.mean_aoi),
                    opt(s.worst_aoi),
                    s.violation_prob.to_string(),
                    s.event_prob.to_string(),
                    opt(s.queue_quantile(0.9999)),
                    opt(s.aoi_quantile(0.9999)),
                    s.aoi_ccdf_at(2.0 * age_limit).to_string(),
                    opt(f.map(|f| f.params.sigma)),
                    opt(f.map(|f| f.params.xi)),
                    f.map(|f| f.n.to_string()).unwrap_or_default(),
                    opt(f.map(|f| f.ks)),
                    String::new(),
                ])?;
            }
            Err(e) => {
                let mut row = vec![pt.value.to_string(), e.kind().to_string()];
                row.extend(std::iter::repeat_n(String::new(), 12));
                row.push(e.to_string());
                w.write_record(row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Streams `trace.csv`, `positions.csv` and `assignments.csv` while a run
/// progresses.
pub struct TraceWriter {
    trace: Writer<File>,
    positions: Writer<File>,
    assignments: Writer<File>,
}

impl TraceWriter {
    pub fn create(dir: &Path) -> Result<TraceWriter> {
        std::fs::create_dir_all(dir)?;
        let mut trace = Writer::from_path(dir.join("trace.csv"))?;
        trace.write_record([
            "slot",
            "pair",
            "power",
            "rate",
            "queue",
            "aoi",
            "indicator",
            "excess",
            "weight",
            "zeta",
            "j_x",
            "j_y",
            "j_r",
            "j_q",
        ])?;
        let mut positions = Writer::from_path(dir.join("positions.csv"))?;
        positions.write_record(["slot", "pair", "tx_x", "tx_y", "rx_x", "rx_y"])?;
        let mut assignments = Writer::from_path(dir.join("assignments.csv"))?;
        assignments.write_record(["slot", "pair", "group", "rbs"])?;
        Ok(TraceWriter {
            trace,
            positions,
            assignments,
        })
    }

    pub fn finish(mut self) -> Result<()> {
        self.trace.flush()?;
        self.positions.flush()?;
        self.assignments.flush()?;
        Ok(())
    }
}

impl Observer for TraceWriter {
    fn wants_records(&self) -> bool {
        true
    }

    fn wants_positions(&self) -> bool {
        true
    }

    fn records(&mut self, records: &[SlotRecord]) -> Result<()> {
        for r in records {
            let j = r.virtual_queues;
            self.trace.write_record([
                r.slot.to_string(),
                r.pair.to_string(),
                r.power.to_string(),
                r.rate.to_string(),
                r.queue.to_string(),
                opt(r.aoi),
                (r.indicator as u8).to_string(),
                opt(r.excess),
                r.weight.to_string(),
                r.zeta.to_string(),
                j.excess.to_string(),
                j.second_moment.to_string(),
                j.rate.to_string(),
                j.event.to_string(),
            ])?;
        }
        Ok(())
    }

    fn positions(&mut self, slot: u64, pairs: &[PairState]) -> Result<()> {
        for (k, p) in pairs.iter().enumerate() {
            self.positions.write_record([
                slot.to_string(),
                k.to_string(),
                p.tx.pos[0].to_string(),
                p.tx.pos[1].to_string(),
                p.rx.pos[0].to_string(),
                p.rx.pos[1].to_string(),
            ])?;
        }
        Ok(())
    }

    fn epoch(&mut self, slot: u64, groups: &GroupAssignment, rbs: &RbMap) -> Result<()> {
        for (k, set) in rbs.per_pair.iter().enumerate() {
            let list: Vec<String> = set.iter().map(usize::to_string).collect();
            self.assignments.write_record([
                slot.to_string(),
                k.to_string(),
                groups.labels[k].to_string(),
                list.join(" "),
            ])?;
        }
        Ok(())
    }
}
