//! Descriptive statistics, one-way ANOVA, Tukey HSD and Turing-test scoring.

mod export;
mod ptukey;

pub use export::{anova_csv, means_csv, read_export, StudyExport};
pub use ptukey::ptukey;

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::study::ListenerGroup;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("EmptySample")]
    EmptySample,
    #[error("TooFewGroups: need at least 2, got {0}")]
    TooFewGroups(usize),
    #[error("GroupTooSmall: group {0} has fewer than 2 values")]
    GroupTooSmall(usize),
    #[error("DegenerateGroups: zero within-group variance")]
    DegenerateGroups,
    #[error("EmptyResponses")]
    EmptyResponses,
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
    #[error("MalformedExport: line {line}: {reason}")]
    MalformedExport { line: u64, reason: String },
}

/// Arithmetic mean and population standard deviation.
pub fn describe(xs: &[f64]) -> Result<(f64, f64), StatsError> {
    if xs.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anova {
    pub f: f64,
    pub p: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub ms_within: f64,
}

fn check_groups(groups: &[Vec<f64>]) -> Result<(), StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(StatsError::GroupTooSmall(i));
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Upper tail of the F distribution via the regularized incomplete beta.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
}

pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<Anova, StatsError> {
    check_groups(groups)?;
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = mean(g);
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let df_between = (groups.len() - 1) as f64;
    let df_within = (n - groups.len()) as f64;
    let ms_within = ssw / df_within;
    // Relative guard: values that only differ by rounding count as constant.
    let scale = groups.iter().flatten().map(|x| x.abs()).fold(1.0, f64::max);
    if ms_within <= 1e-24 * scale * scale {
        return Err(StatsError::DegenerateGroups);
    }
    let f = (ssb / df_between) / ms_within;
    Ok(Anova { f, p: f_sf(f, df_between, df_within), df_between, df_within, ms_within })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub a: usize,
    pub b: usize,
    /// `mean(b) − mean(a)`.
    pub mean_diff: f64,
    pub q: f64,
    pub p: f64,
    pub significant: bool,
}

/// All pairwise comparisons `(a, b)` with `a < b`, using the pooled
/// within-group variance of every group.
pub fn tukey_hsd(groups: &[Vec<f64>], alpha: f64) -> Result<Vec<TukeyResult>, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidArgument(format!("alpha {alpha}")));
    }
    let anova = anova_oneway(groups)?;
    let k = groups.len();
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            out.push(tukey_pair(groups, &means, &anova, a, b, alpha));
        }
    }
    Ok(out)
}

fn tukey_pair(groups: &[Vec<f64>], means: &[f64], anova: &Anova, a: usize, b: usize, alpha: f64) -> TukeyResult {
    let mean_diff = means[b] - means[a];
    let se = (anova.ms_within * (1.0 / groups[a].len() as f64 + 1.0 / groups[b].len() as f64) / 2.0).sqrt();
    let q = mean_diff.abs() / se;
    let p = (1.0 - ptukey(q, groups.len(), anova.df_within)).clamp(0.0, 1.0);
    TukeyResult { a, b, mean_diff, q, p, significant: p < alpha }
}

/// One Likert rating from the study export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSample {
    pub participant: String,
    pub group: ListenerGroup,
    pub piece: String,
    /// `Reference` for human-composed pieces, otherwise the model name.
    pub source: String,
    /// 1..=13.
    pub question: u8,
    pub value: u8,
}

/// How ratings enter the tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Aggregation {
    /// Every response is one observation.
    #[default]
    Pooled,
    /// Each participant contributes their mean rating per source.
    PerParticipant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyRow {
    pub question: u8,
    pub mean_diff: f64,
    pub q: f64,
    pub p: f64,
    pub significant: bool,
}

/// Per question: Tukey HSD over all sources present, reporting the pair
/// `(reference, other)` as `mean(other) − mean(reference)`. Questions where
/// either source is missing or the test is degenerate are skipped.
pub fn tukey_table(
    samples: &[RatingSample],
    group: Option<ListenerGroup>,
    reference: &str,
    other: &str,
    alpha: f64,
    mode: Aggregation,
) -> Result<Vec<TukeyRow>, StatsError> {
    let mut rows = Vec::new();
    for question in 1..=13u8 {
        let mut by_source: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        match mode {
            Aggregation::Pooled => {
                for s in samples.iter().filter(|s| s.question == question && group.map_or(true, |g| g == s.group)) {
                    by_source.entry(&s.source).or_default().push(f64::from(s.value));
                }
            }
            Aggregation::PerParticipant => {
                let mut acc: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
                for s in samples.iter().filter(|s| s.question == question && group.map_or(true, |g| g == s.group)) {
                    let e = acc.entry((&s.source, &s.participant)).or_default();
                    e.0 += f64::from(s.value);
                    e.1 += 1;
                }
                for ((source, _), (sum, n)) in acc {
                    by_source.entry(source).or_default().push(sum / n as f64);
                }
            }
        }
        let names: Vec<&str> = by_source.keys().copied().collect();
        let (Some(a), Some(b)) =
            (names.iter().position(|n| *n == reference), names.iter().position(|n| *n == other))
        else {
            continue;
        };
        let groups: Vec<Vec<f64>> = by_source.into_values().collect();
        let Ok(anova) = anova_oneway(&groups) else {
            continue;
        };
        let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
        let r = tukey_pair(&groups, &means, &anova, a, b, alpha);
        rows.push(TukeyRow { question, mean_diff: r.mean_diff, q: r.q, p: r.p, significant: r.significant });
    }
    Ok(rows)
}

/// `question,text,mean_diff,q,p,significant`.
pub fn tukey_csv(rows: &[TukeyRow]) -> String {
    let mut out = String::from("question,text,mean_diff,q,p,significant\n");
    for r in rows {
        let text = crate::study::question_text(r.question).unwrap_or("");
        let _ = writeln!(out, "Q{},\"{}\",{},{},{},{}", r.question, text, r.mean_diff, r.q, r.p, r.significant);
    }
    out
}

/// Listener's answer to the composer question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TuringAnswer {
    Human,
    Ai,
    Uncertain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuringResponse {
    pub group: ListenerGroup,
    /// `Reference` or a model name.
    pub source: String,
    pub human_composed: bool,
    pub answer: TuringAnswer,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl Accuracy {
    fn add(&mut self, ok: bool) {
        self.correct += usize::from(ok);
        self.total += 1;
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TuringSummary {
    pub overall: Accuracy,
    pub by_group: BTreeMap<ListenerGroup, Accuracy>,
    pub by_source: BTreeMap<String, Accuracy>,
}

/// Correct iff the answer names the true composer; Uncertain is incorrect.
pub fn turing_accuracy(responses: &[TuringResponse]) -> Result<TuringSummary, StatsError> {
    if responses.is_empty() {
        return Err(StatsError::EmptyResponses);
    }
    let mut s = TuringSummary::default();
    for r in responses {
        let ok = matches!(
            (r.human_composed, r.answer),
            (true, TuringAnswer::Human) | (false, TuringAnswer::Ai)
        );
        s.overall.add(ok);
        s.by_group.entry(r.group).or_default().add(ok);
        s.by_source.entry(r.source.clone()).or_default().add(ok);
    }
    Ok(s)
}

pub fn turing_csv(summary: &TuringSummary) -> String {
    let mut out = String::from("scope,label,correct,total,accuracy\n");
    let o = summary.overall;
    let _ = writeln!(out, "overall,all,{},{},{}", o.correct, o.total, o.accuracy);
    for (g, a) in &summary.by_group {
        let _ = writeln!(out, "group,{},{},{},{}", g.code(), a.correct, a.total, a.accuracy);
    }
    for (src, a) in &summary.by_source {
        let _ = writeln!(out, "source,{},{},{},{}", src, a.correct, a.total, a.accuracy);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn describe_examples() {
        assert_eq!(describe(&[3.0, 3.0, 3.0]).unwrap(), (3.0, 0.0));
        assert_eq!(describe(&[1.0, 5.0]).unwrap(), (3.0, 2.0));
        assert_eq!(describe(&[]), Err(StatsError::EmptySample));
    }

    #[test]
    fn anova_hand_decomposition() {
        let a = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]]).unwrap();
        assert!((a.f - 1.5).abs() < 1e-12);
        assert_eq!((a.df_between, a.df_within), (1.0, 4.0));
        let same = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(same.f, 0.0);
        assert_eq!(same.p, 1.0);
        assert_eq!(anova_oneway(&[vec![2.0, 2.0], vec![2.0, 2.0]]), Err(StatsError::DegenerateGroups));
        assert_eq!(anova_oneway(&[vec![2.0, 2.0]]), Err(StatsError::TooFewGroups(1)));
        assert_eq!(anova_oneway(&[vec![2.0, 2.0], vec![1.0]]), Err(StatsError::GroupTooSmall(1)));
    }

    #[test]
    fn tukey_hand_example() {
        let r = tukey_hsd(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]], 0.05).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].mean_diff - 1.0).abs() < 1e-12);
        assert!((r[0].q - 3f64.sqrt()).abs() < 1e-9);
        assert!(!r[0].significant);
        let same = tukey_hsd(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]], 0.05).unwrap();
        assert_eq!(same[0].mean_diff, 0.0);
        assert!(!same[0].significant);
    }

    #[test]
    fn turing_examples() {
        let r = |human, answer| TuringResponse { group: ListenerGroup::Normal, source: "x".into(), human_composed: human, answer };
        let s = turing_accuracy(&[r(true, TuringAnswer::Human), r(false, TuringAnswer::Ai), r(false, TuringAnswer::Human)]).unwrap();
        assert!((s.overall.accuracy - 2.0 / 3.0).abs() < 1e-12);
        let s = turing_accuracy(&[r(true, TuringAnswer::Uncertain), r(false, TuringAnswer::Uncertain)]).unwrap();
        assert_eq!(s.overall.accuracy, 0.0);
        assert_eq!(turing_accuracy(&[]), Err(StatsError::EmptyResponses));
    }
}
