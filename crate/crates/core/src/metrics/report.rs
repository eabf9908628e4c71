use std::collections::BTreeMap;
use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::*;
use crate::midi::{quantize, QuantizedScore, Score};

/// Scalar column names, in report order.
pub const METRIC_NAMES: [&str; 14] = [
    "pc",
    "pr",
    "pi",
    "pe",
    "pce",
    "psr",
    "polyphony",
    "polyphony_rate",
    "ioi",
    "nltm",
    "ebr",
    "gc",
    "pcs",
    "ctnctr",
];

const EVAL_RESOLUTION: u32 = 4;

/// Every metric for one piece. A metric that cannot be computed (too few
/// notes, no bar pairs, ...) is `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pc: Option<f64>,
    pub pr: Option<f64>,
    pub pi: Option<f64>,
    pub pe: Option<f64>,
    pub pce: Option<f64>,
    pub psr: Option<f64>,
    pub polyphony: Option<f64>,
    pub polyphony_rate: Option<f64>,
    pub ioi: Option<f64>,
    pub nltm_scalar: Option<f64>,
    pub ebr: Option<f64>,
    pub gc: Option<f64>,
    pub pcs: Option<f64>,
    pub ctnctr: Option<f64>,
    pub nltm: Option<[[f64; 8]; 8]>,
    pub nltm_counts: Option<[[usize; 8]; 8]>,
    /// Harmony metrics used inferred rather than annotated chords.
    pub chords_inferred: bool,
}

impl MetricReport {
    pub fn values(&self) -> [Option<f64>; 14] {
        [
            self.pc,
            self.pr,
            self.pi,
            self.pe,
            self.pce,
            self.psr,
            self.polyphony,
            self.polyphony_rate,
            self.ioi,
            self.nltm_scalar,
            self.ebr,
            self.gc,
            self.pcs,
            self.ctnctr,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        METRIC_NAMES.iter().position(|n| *n == name).and_then(|i| self.values()[i])
    }
}

fn chords_for(q: &mut QuantizedScore) -> bool {
    if q.chords.as_ref().is_some_and(|c| !c.is_empty()) {
        return false;
    }
    // One-bar windows; bars are a whole number of cells but not always of beats.
    let out = harmony::infer_chords_cells(q, q.cells_per_bar);
    q.chords = Some(out);
    true
}

/// Runs every metric on a grid of 4 cells per beat; chords come from the
/// score's annotations or are inferred per bar.
pub fn evaluate_all(score: &Score) -> MetricReport {
    let mut r = MetricReport {
        pc: pitch_count(score).ok().map(|v| v as f64),
        pr: pitch_range(score).ok().map(f64::from),
        pe: pitch_entropy(score).ok(),
        pce: pitch_class_entropy(score).ok(),
        psr: pitch_in_scale_rate(score, None).ok(),
        ioi: avg_ioi(score).ok(),
        ..MetricReport::default()
    };
    let Ok(mut q) = quantize(score, EVAL_RESOLUTION) else {
        return r;
    };
    r.pi = avg_pitch_interval(&q).ok();
    if let Ok((avg, rate)) = polyphony(&q) {
        r.polyphony = Some(avg);
        r.polyphony_rate = Some(rate);
    }
    if let Ok(m) = nltm(&q) {
        r.nltm_scalar = Some(m.scalar);
        r.nltm = Some(m.matrix);
        r.nltm_counts = Some(m.counts);
    }
    r.ebr = empty_beat_rate(&q).ok();
    r.gc = groove_consistency(&q).ok();
    r.chords_inferred = chords_for(&mut q);
    r.pcs = pitch_consonance_score(&q).ok();
    r.ctnctr = ctnctr(&q).ok();
    r
}

/// Evaluates pieces in parallel; output order follows input order.
pub fn evaluate_corpus(scores: &[Score]) -> Vec<MetricReport> {
    scores.par_iter().map(evaluate_all).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledReport {
    pub dataset: String,
    pub source: String,
    pub piece: String,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub source: String,
    pub metric: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub rows: Vec<AggregateRow>,
}

impl AggregateTable {
    pub fn get(&self, dataset: &str, source: &str, metric: &str) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.dataset == dataset && r.source == source && r.metric == metric)
    }
}

/// Mean and population std per (dataset, source, metric) over the
/// reports where the metric is present. Groups with no value are omitted.
pub fn aggregate(reports: &[LabeledReport]) -> AggregateTable {
    let mut groups: BTreeMap<(&str, &str), Vec<&MetricReport>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.dataset.as_str(), r.source.as_str())).or_default().push(&r.report);
    }
    let mut rows = Vec::new();
    for ((dataset, source), reps) in groups {
        for (i, name) in METRIC_NAMES.iter().enumerate() {
            let xs: Vec<f64> = reps.iter().filter_map(|r| r.values()[i]).collect();
            if xs.is_empty() {
                continue;
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            rows.push(AggregateRow {
                dataset: dataset.to_string(),
                source: source.to_string(),
                metric: name.to_string(),
                mean,
                std: var.sqrt(),
                n: xs.len(),
            });
        }
    }
    AggregateTable { rows }
}

/// Column groups of the pitch, rhythm and harmony summary tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricTable {
    Pitch,
    Rhythm,
    Harmony,
}

impl MetricTable {
    pub const ALL: [MetricTable; 3] = [MetricTable::Pitch, MetricTable::Rhythm, MetricTable::Harmony];

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            MetricTable::Pitch => &["pi", "pr", "pc", "polyphony_rate", "pe", "pce", "psr", "polyphony"],
            MetricTable::Rhythm => &["ioi", "nltm", "ebr", "gc"],
            MetricTable::Harmony => &["ctnctr", "pcs"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricTable::Pitch => "pitch",
            MetricTable::Rhythm => "rhythm",
            MetricTable::Harmony => "harmony",
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// One row per (dataset, source) with `<metric>_mean,_std,_n` columns.
pub fn aggregate_csv(table: &AggregateTable, which: MetricTable) -> String {
    let cols = which.columns();
    let mut out = String::from("dataset,source");
    for c in cols {
        let _ = write!(out, ",{c}_mean,{c}_std,{c}_n");
    }
    out.push('\n');
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in &table.rows {
        if !keys.contains(&(r.dataset.as_str(), r.source.as_str())) {
            keys.push((&r.dataset, &r.source));
        }
    }
    for (d, s) in keys {
        out.push_str(&format!("{d},{s}"));
        for c in cols {
            match table.get(d, s, c) {
                Some(r) => {
                    let _ = write!(out, ",{},{},{}", r.mean, r.std, r.n);
                }
                None => out.push_str(",,,0"),
            }
        }
        out.push('\n');
    }
    out
}

/// Reads back one or more [`aggregate_csv`] tables. Cells with `n = 0` are
/// absent metrics. Rows come out in [`aggregate`] order.
pub fn parse_aggregate_csv(texts: &[&str]) -> Result<AggregateTable, MetricError> {
    let bad = |m: String| MetricError::InvalidArgument(m);
    let mut rows = Vec::new();
    for text in texts {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.len() < 2 || &header[0] != "dataset" || &header[1] != "source" || (header.len() - 2) % 3 != 0 {
            return Err(bad(format!("unexpected aggregate header {:?}", header.as_slice())));
        }
        let metrics: Vec<String> = (2..header.len())
            .step_by(3)
            .map(|i| header[i].strip_suffix("_mean").map(str::to_string).ok_or_else(|| bad(format!("column {}", &header[i]))))
            .collect::<Result<_, _>>()?;
        if let Some(m) = metrics.iter().find(|m| !METRIC_NAMES.contains(&m.as_str())) {
            return Err(bad(format!("unknown metric {m}")));
        }
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            for (j, m) in metrics.iter().enumerate() {
                let cell = |k: usize| rec.get(2 + 3 * j + k).unwrap_or("");
                let n: usize = cell(2).parse().map_err(|_| bad(format!("{m}_n: {:?}", cell(2))))?;
                if n == 0 {
                    continue;
                }
                let num = |k: usize| cell(k).parse::<f64>().map_err(|_| bad(format!("{m}: {:?}", cell(k))));
                rows.push(AggregateRow {
                    dataset: rec[0].to_string(),
                    source: rec[1].to_string(),
                    metric: m.clone(),
                    mean: num(0)?,
                    std: num(1)?,
                    n,
                });
            }
        }
    }
    let order = |m: &str| METRIC_NAMES.iter().position(|x| *x == m);
    rows.sort_by(|a, b| (&a.dataset, &a.source, order(&a.metric)).cmp(&(&b.dataset, &b.source, order(&b.metric))));
    Ok(AggregateTable { rows })
}

pub fn reports_csv(reports: &[LabeledReport]) -> String {
    let mut out = format!("dataset,source,piece,{}\n", METRIC_NAMES.join(","));
    for r in reports {
        let vals: Vec<String> = r.report.values().iter().map(|v| fmt_opt(*v)).collect();
        let _ = writeln!(out, "{},{},{},{}", r.dataset, r.source, r.piece, vals.join(","));
    }
    out
}

pub fn nltm_csv(matrix: &[[f64; 8]; 8]) -> String {
    matrix.iter().map(|row| row.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",") + "\n").collect()
}

/// Plain (P2) grayscale image, `cell_px` pixels per matrix entry, white = 1.
pub fn nltm_pgm(matrix: &[[f64; 8]; 8], cell_px: usize) -> String {
    let px = cell_px.max(1);
    let side = 8 * px;
    let mut out = format!("P2\n{side} {side}\n255\n");
    for row in matrix {
        let line: Vec<String> = row
            .iter()
            .flat_map(|v| std::iter::repeat((v.clamp(0.0, 1.0) * 255.0).round() as u8).take(px))
            .map(|v| v.to_string())
            .collect();
        let line = line.join(" ");
        for _ in 0..px {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::Note;

    fn labeled(source: &str, pc: f64) -> LabeledReport {
        LabeledReport {
            dataset: "d".into(),
            source: source.into(),
            piece: "p".into(),
            report: MetricReport { pc: Some(pc), ..MetricReport::default() },
        }
    }

    #[test]
    fn population_std() {
        let t = aggregate(&[labeled("a", 5.0)]);
        let r = t.get("d", "a", "pc").unwrap();
        assert_eq!((r.mean, r.std, r.n), (5.0, 0.0, 1));
        let t = aggregate(&[labeled("a", 1.0), labeled("a", 3.0)]);
        let r = t.get("d", "a", "pc").unwrap();
        assert_eq!((r.mean, r.std, r.n), (2.0, 1.0, 2));
        assert!(t.get("d", "a", "pr").is_none());
    }

    #[test]
    fn evaluate_records_missing_values() {
        let s = Score::with_notes(vec![Note::new(60, 0.0, 0.5, 80)], 120.0);
        let r = evaluate_all(&s);
        assert_eq!(r.pc, Some(1.0));
        assert_eq!(r.pi, None);
        assert_eq!(r.gc, None);
        assert!(r.chords_inferred);
        assert_eq!(evaluate_all(&Score::default()), MetricReport::default());
    }

    #[test]
    fn exports() {
        let reports = [labeled("a", 1.0), labeled("b", 3.0)];
        let csv = reports_csv(&reports);
        assert!(csv.starts_with("dataset,source,piece,pc,pr,pi"));
        assert_eq!(csv.lines().count(), 3);
        let agg = aggregate_csv(&aggregate(&reports), MetricTable::Pitch);
        assert!(agg.lines().next().unwrap().starts_with("dataset,source,pi_mean,pi_std,pi_n"));
        assert!(agg.contains("d,a,,,0,,,0,1,0,1"));
        let mut m = [[0.0; 8]; 8];
        m[3][3] = 1.0;
        let pgm = nltm_pgm(&m, 2);
        let mut lines = pgm.lines();
        assert_eq!(lines.next(), Some("P2"));
        assert_eq!(lines.next(), Some("16 16"));
        assert_eq!(pgm.lines().count(), 3 + 16);
        assert_eq!(nltm_csv(&m).lines().count(), 8);
    }
}
