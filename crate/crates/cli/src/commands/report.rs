//! `capo report`: summarize a simulation output directory.

use std::path::Path;

use crate::error::CliError;

pub fn run(dir: &Path) -> Result<(), CliError> {
    let summary_path = dir.join("summary.csv");
    let text = std::fs::read_to_string(&summary_path).map_err(|e| {
        CliError::validation(format!("cannot read {}: {e}", summary_path.display()))
    })?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::validation("summary.csv is empty"))?;
    let columns: Vec<&str> = header.split(',').collect();
    let acc_col = columns
        .iter()
        .position(|c| *c == "mean_final_accuracy")
        .ok_or_else(|| CliError::validation("summary.csv lacks mean_final_accuracy"))?;

    let mut rows: Vec<(String, f64)> = Vec::new();
    for (number, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(CliError::validation(format!(
                "summary.csv line {}: expected {} fields, got {}",
                number + 2,
                columns.len(),
                fields.len()
            )));
        }
        let accuracy: f64 = fields[acc_col]
            .parse()
            .map_err(|e| CliError::validation(format!("summary.csv line {}: {e}", number + 2)))?;
        rows.push((fields[0].to_string(), accuracy));
    }
    if rows.is_empty() {
        return Err(CliError::validation("summary.csv has no data rows"));
    }

    let best = rows
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .expect("non-empty");

    println!("{:<36} {:>16}", "run", "final accuracy");
    for (i, (tag, accuracy)) in rows.iter().enumerate() {
        let marker = if i == best { "  <- best" } else { "" };
        println!("{tag:<36} {accuracy:>16.4}{marker}");
    }
    Ok(())
}
