use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use spikebench_core::stats::{
    anova_csv, means_csv, read_export, tukey_table, turing_accuracy, turing_csv, Aggregation, RatingSample, TukeyRow,
};
use spikebench_core::study::{question_text, ListenerGroup, HUMAN_SOURCE};

use crate::{domain, write_or_stdout, CliError};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Study export CSV.
    #[arg(long)]
    pub responses: PathBuf,
    /// Output directory for the result tables.
    #[arg(long, default_value = "analysis")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Average each participant's ratings per source before testing.
    #[arg(long)]
    pub per_participant: bool,
    /// Source every other source is compared against.
    #[arg(long, default_value = HUMAN_SOURCE)]
    pub reference: String,
}

/// `model,question,text,mean_diff,q,p,significant` for every non-reference
/// source in one listener group.
pub fn group_tukey_csv(samples: &[RatingSample], group: ListenerGroup, reference: &str, alpha: f64, mode: Aggregation) -> Result<String, CliError> {
    let mut sources: Vec<&str> = samples.iter().filter(|s| s.group == group).map(|s| s.source.as_str()).collect();
    sources.sort();
    sources.dedup();
    let mut out = String::from("model,question,text,mean_diff,q,p,significant\n");
    for other in sources.into_iter().filter(|s| *s != reference) {
        let rows: Vec<TukeyRow> = tukey_table(samples, Some(group), reference, other, alpha, mode).map_err(domain)?;
        for r in rows {
            let text = question_text(r.question).unwrap_or("");
            let _ = writeln!(out, "{other},Q{},\"{text}\",{},{},{},{}", r.question, r.mean_diff, r.q, r.p, r.significant);
        }
    }
    Ok(out)
}

pub fn run(a: AnalyzeArgs) -> Result<(), CliError> {
    let export = read_export(&fs::read_to_string(&a.responses)?).map_err(domain)?;
    let mode = if a.per_participant { Aggregation::PerParticipant } else { Aggregation::Pooled };
    fs::create_dir_all(&a.out)?;
    write_or_stdout(Some(&a.out.join("means.csv")), &means_csv(&export.ratings))?;
    write_or_stdout(Some(&a.out.join("anova.csv")), &anova_csv(&export.ratings))?;
    for g in ListenerGroup::ALL {
        let csv = group_tukey_csv(&export.ratings, g, &a.reference, a.alpha, mode)?;
        write_or_stdout(Some(&a.out.join(format!("tukey_{}.csv", g.to_string().to_lowercase()))), &csv)?;
    }
    if !export.turing.is_empty() {
        let summary = turing_accuracy(&export.turing).map_err(domain)?;
        write_or_stdout(Some(&a.out.join("turing.csv")), &turing_csv(&summary))?;
        eprintln!("composer identification accuracy {:.4} over {} answers", summary.overall.accuracy, summary.overall.total);
    }
    eprintln!("analyzed {} ratings; tables in {}", export.ratings.len(), a.out.display());
    Ok(())
}
