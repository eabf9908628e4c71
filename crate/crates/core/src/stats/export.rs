//! Reading the study response export and summarizing it per question.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{anova_oneway, describe, RatingSample, StatsError, TuringAnswer, TuringResponse};
use crate::study::{ListenerGroup, EXPORT_HEADER, HUMAN_SOURCE};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyExport {
    pub ratings: Vec<RatingSample>,
    pub turing: Vec<TuringResponse>,
}

fn malformed(line: u64, reason: impl Into<String>) -> StatsError {
    StatsError::MalformedExport { line, reason: reason.into() }
}

/// Parses the study export. Composer rows become [`TuringResponse`]s,
/// every other row a [`RatingSample`].
pub fn read_export(text: &str) -> Result<StudyExport, StatsError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| malformed(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != EXPORT_HEADER {
        return Err(malformed(1, format!("expected header {EXPORT_HEADER}")));
    }
    let mut out = StudyExport::default();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let group = ListenerGroup::parse(&rec[1]).ok_or_else(|| malformed(line, format!("group {:?}", &rec[1])))?;
        let source = rec[4].to_string();
        let question: u8 = rec[5]
            .strip_prefix('Q')
            .and_then(|q| q.parse().ok())
            .filter(|q| (1..=14).contains(q))
            .ok_or_else(|| malformed(line, format!("question {:?}", &rec[5])))?;
        if question == 14 {
            let answer = match &rec[7] {
                "Human" => TuringAnswer::Human,
                "AI" => TuringAnswer::Ai,
                "Uncertain" => TuringAnswer::Uncertain,
                other => return Err(malformed(line, format!("turing answer {other:?}"))),
            };
            out.turing.push(TuringResponse { group, human_composed: source == HUMAN_SOURCE, source, answer });
        } else {
            let value: u8 = rec[6]
                .parse()
                .ok()
                .filter(|v| (1..=5).contains(v))
                .ok_or_else(|| malformed(line, format!("value {:?}", &rec[6])))?;
            out.ratings.push(RatingSample {
                participant: rec[0].to_string(),
                group,
                piece: rec[2].to_string(),
                source,
                question,
                value,
            });
        }
    }
    Ok(out)
}

fn by_cell(samples: &[RatingSample]) -> BTreeMap<(ListenerGroup, u8, &str), Vec<f64>> {
    let mut cells: BTreeMap<(ListenerGroup, u8, &str), Vec<f64>> = BTreeMap::new();
    for s in samples {
        cells.entry((s.group, s.question, &s.source)).or_default().push(f64::from(s.value));
    }
    cells
}

/// `group,question,source,mean,std,n` with population std.
pub fn means_csv(samples: &[RatingSample]) -> String {
    let mut out = String::from("group,question,source,mean,std,n\n");
    for ((g, q, src), xs) in by_cell(samples) {
        if let Ok((m, sd)) = describe(&xs) {
            let _ = writeln!(out, "{},Q{q},{src},{m},{sd},{}", g.code(), xs.len());
        }
    }
    out
}

/// One-way ANOVA across sources per (group, question):
/// `group,question,f,p,df_between,df_within`. Degenerate cells are skipped.
pub fn anova_csv(samples: &[RatingSample]) -> String {
    let mut per: BTreeMap<(ListenerGroup, u8), Vec<Vec<f64>>> = BTreeMap::new();
    for ((g, q, _), xs) in by_cell(samples) {
        per.entry((g, q)).or_default().push(xs);
    }
    let mut out = String::from("group,question,f,p,df_between,df_within\n");
    for ((g, q), groups) in per {
        if let Ok(a) = anova_oneway(&groups) {
            let _ = writeln!(out, "{},Q{q},{},{},{},{}", g.code(), a.f, a.p, a.df_between, a.df_within);
        }
    }
    out
}
