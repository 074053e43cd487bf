//! Markdown and CSV renderings of importance reports, grid maps and
//! reproduction experiments.

use std::fmt::Write as _;
use std::path::Path;

use cartsel_core::harness::ExperimentReport;
use cartsel_core::selection::{subset_names, GridMapEntry, SelectionResult};
use cartsel_core::{ImportanceReport, VariableSubset};

/// Variable labels of the simulated benchmark.
pub fn breiman_names() -> Vec<String> {
    (1..=cartsel_core::data::BREIMAN_P)
        .map(|j| format!("X{j}"))
        .collect()
}

fn subset_words(subset: &VariableSubset, names: &[String]) -> String {
    subset
        .members()
        .iter()
        .map(|&j| names[j].as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Two-row table in the style of the benchmark's importance ranking:
/// variables ordered from most to least important, with their ranks.
pub fn importance_markdown(report: &ImportanceReport, names: &[String]) -> String {
    let mut vars = String::from("| Variable |");
    let mut ranks = String::from("| Rank |");
    let mut sep = String::from("|---|");
    for (rank, &j) in report.ranking.iter().enumerate() {
        write!(vars, " {} |", names[j]).unwrap();
        write!(ranks, " {} |", rank + 1).unwrap();
        sep.push_str("---|");
    }
    format!("{vars}\n{sep}\n{ranks}\n")
}

pub fn importance_csv(report: &ImportanceReport, names: &[String]) -> String {
    let mut out = String::from("variable,score,rank\n");
    for (rank, &j) in report.ranking.iter().enumerate() {
        writeln!(out, "{},{},{}", names[j], report.scores[j], rank + 1).unwrap();
    }
    out
}

/// The grid map as a beta-by-alpha matrix of selected subsets.
pub fn grid_matrix_markdown(
    entries: &[GridMapEntry],
    alpha_grid: &[f64],
    beta_grid: &[f64],
    names: &[String],
    label: impl Fn(&GridMapEntry) -> String,
) -> String {
    let mut out = String::from("| beta \\ alpha |");
    for a in alpha_grid {
        write!(out, " {a} |").unwrap();
    }
    out.push('\n');
    out.push_str("|---|");
    for _ in alpha_grid {
        out.push_str("---|");
    }
    out.push('\n');
    for (bi, b) in beta_grid.iter().enumerate() {
        write!(out, "| {b} |").unwrap();
        for (ai, _) in alpha_grid.iter().enumerate() {
            let cell = &entries[ai * beta_grid.len() + bi];
            write!(out, " {} |", label(cell)).unwrap();
        }
        out.push('\n');
    }
    let _ = names;
    out
}

/// Markdown summary of one selection run: the chosen model plus the full
/// grid matrix.
pub fn selection_markdown(result: &SelectionResult, names: &[String]) -> String {
    let mut out = String::new();
    writeln!(out, "# Selection result\n").unwrap();
    writeln!(
        out,
        "- chosen subset: {}",
        subset_names(&result.chosen.subset, names)
    )
    .unwrap();
    writeln!(out, "- alpha: {}", result.chosen.alpha).unwrap();
    writeln!(out, "- beta: {}", result.chosen.beta).unwrap();
    writeln!(out, "- leaves: {}", result.chosen.tree.n_leaves()).unwrap();
    writeln!(out, "- hold-out risk: {}", result.holdout_risk).unwrap();
    writeln!(out, "- distinct models K: {}\n", result.k_distinct).unwrap();
    writeln!(out, "## Selected subset per (alpha, beta)\n").unwrap();
    let alphas = dedup_sorted(result.grid_map.iter().map(|e| e.alpha));
    let betas = dedup_sorted(result.grid_map.iter().map(|e| e.beta));
    out.push_str(&grid_matrix_markdown(
        &result.grid_map,
        &alphas,
        &betas,
        names,
        |e| subset_names(&e.subset, names),
    ));
    out
}

pub fn selection_csv(result: &SelectionResult, names: &[String]) -> String {
    let mut out = String::from("alpha,beta,subset,n_leaves\n");
    for e in &result.grid_map {
        writeln!(
            out,
            "{},{},{},{}",
            e.alpha,
            e.beta,
            subset_words(&e.subset, names),
            e.n_leaves
        )
        .unwrap();
    }
    out
}

fn dedup_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn vi_table_csv(report: &ExperimentReport, names: &[String]) -> String {
    let p = names.len();
    let mut out = String::from("seed");
    for r in 1..=p {
        write!(out, ",rank{r}").unwrap();
    }
    out.push('\n');
    for row in &report.vi_rows {
        write!(out, "{}", row.seed).unwrap();
        for &j in &row.ranking {
            write!(out, ",{}", names[j]).unwrap();
        }
        out.push('\n');
    }
    out
}

fn vi_table_markdown(report: &ExperimentReport, names: &[String]) -> String {
    let modal = ImportanceReport {
        scores: vec![0.0; names.len()],
        ranking: report.modal_ranking.clone(),
    };
    let mut out = format!(
        "# Variable importance ranking (modal over {} seeds)\n\n",
        report.vi_rows.len()
    );
    out.push_str(&importance_markdown(&modal, names));
    out.push_str("\nPer-seed rankings: vi_table.csv\n");
    out
}

fn grid_table_csv(report: &ExperimentReport, names: &[String]) -> String {
    let mut out = String::from("seed,alpha,beta,subset\n");
    let alphas = &report.config.base.alpha_grid;
    let betas = &report.config.base.beta_grid;
    for row in &report.grid_rows {
        for (ai, a) in alphas.iter().enumerate() {
            for (bi, b) in betas.iter().enumerate() {
                let subset = &row.subsets[ai * betas.len() + bi];
                writeln!(out, "{},{},{},{}", row.seed, a, b, subset_words(subset, names))
                    .unwrap();
            }
        }
    }
    out
}

fn grid_table_markdown(report: &ExperimentReport, names: &[String]) -> String {
    let alphas = &report.config.base.alpha_grid;
    let betas = &report.config.base.beta_grid;
    let mut out = format!(
        "# Modal selected subset per (alpha, beta) over {} seeds\n\n",
        report.grid_rows.len()
    );
    out.push_str("| beta \\ alpha |");
    for a in alphas {
        write!(out, " {a} |").unwrap();
    }
    out.push_str("\n|---|");
    for _ in alphas {
        out.push_str("---|");
    }
    out.push('\n');
    for (bi, b) in betas.iter().enumerate() {
        write!(out, "| {b} |").unwrap();
        for (ai, _) in alphas.iter().enumerate() {
            let cell = &report.grid_cells[ai * betas.len() + bi];
            write!(
                out,
                " {} ({:.2}) |",
                cartsel_core::selection::subset_names(&cell.modal_subset, names),
                cell.frequency
            )
            .unwrap();
        }
        out.push('\n');
    }
    out
}

fn final_table_csv(report: &ExperimentReport, names: &[String]) -> String {
    let mut out = String::from("seed,alpha,beta,subset,holdout_risk,n_subsets\n");
    for row in &report.final_rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.seed,
            row.alpha,
            row.beta,
            subset_words(&row.subset, names),
            row.holdout_risk,
            row.n_subsets
        )
        .unwrap();
    }
    out
}

fn final_table_markdown(report: &ExperimentReport, names: &[String]) -> String {
    let mut out = String::from("# Final selection per seed\n\n");
    out.push_str("| seed | alpha | beta | selected set | hold-out risk |\n");
    out.push_str("|---|---|---|---|---|\n");
    for row in &report.final_rows {
        writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            row.seed,
            row.alpha,
            row.beta,
            subset_names(&row.subset, names),
            row.holdout_risk
        )
        .unwrap();
    }
    writeln!(
        out,
        "\nModal final set: {} (frequency {:.2})",
        subset_names(&report.modal_final, names),
        report.modal_final_frequency
    )
    .unwrap();
    out
}

/// Writes `report.json` plus the three tables in CSV and markdown into
/// `dir` (created if needed).
pub fn write_report_files(report: &ExperimentReport, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let names = breiman_names();
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(dir.join("report.json"), json + "\n")?;
    std::fs::write(dir.join("vi_table.csv"), vi_table_csv(report, &names))?;
    std::fs::write(dir.join("vi_table.md"), vi_table_markdown(report, &names))?;
    std::fs::write(dir.join("grid_table.csv"), grid_table_csv(report, &names))?;
    std::fs::write(dir.join("grid_table.md"), grid_table_markdown(report, &names))?;
    std::fs::write(dir.join("final_table.csv"), final_table_csv(report, &names))?;
    std::fs::write(dir.join("final_table.md"), final_table_markdown(report, &names))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn importance_table_has_two_rows() {
        let report = ImportanceReport {
            scores: vec![100.0, 40.0, 0.0],
            ranking: vec![0, 1, 2],
        };
        let names = vec!["X1".to_string(), "X2".to_string(), "X3".to_string()];
        let md = importance_markdown(&report, &names);
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("| Variable | X1 | X2 | X3 |"));
        assert!(lines[2].starts_with("| Rank | 1 | 2 | 3 |"));
    }
}
