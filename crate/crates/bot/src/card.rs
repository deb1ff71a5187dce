//! Markdown comment card.

/// Hidden marker used to find the bot's own card on later runs.
pub const CARD_MARKER: &str = "<!-- drs-card -->";

#[derive(Debug, Clone, PartialEq)]
pub enum RowOutcome {
    Scored { label: String, confidence: f64 },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CardRow {
    pub sha: String,
    pub outcome: RowOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CardFooter {
    pub scorer_id: String,
    pub threshold: f64,
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace(['\n', '\r'], " ")
}

/// Deterministic card: one table row per commit in PR order.
pub fn render_card(rows: &[CardRow], footer: Option<&CardFooter>, note: Option<&str>) -> String {
    let mut out = format!("{CARD_MARKER}\n### Diff risk scoring\n\n");
    if rows.is_empty() {
        out.push_str("No commits to score.\n");
    } else {
        out.push_str("| commit | label | confidence |\n|---|---|---|\n");
        for row in rows {
            let short: String = row.sha.chars().take(7).collect();
            match &row.outcome {
                RowOutcome::Scored { label, confidence } => {
                    out.push_str(&format!("| `{short}` | {} | {confidence:.2} |\n", cell(label)));
                }
                RowOutcome::Failed(reason) => {
                    out.push_str(&format!("| `{short}` | error | {} |\n", cell(reason)));
                }
            }
        }
    }
    if let Some(note) = note {
        out.push_str(&format!("\n> {}\n", cell(note)));
    }
    match footer {
        Some(f) => out.push_str(&format!(
            "\n<sub>scorer `{}`, threshold {:.2}</sub>\n",
            cell(&f.scorer_id),
            f.threshold
        )),
        None => out.push_str("\n<sub>scorer unavailable</sub>\n"),
    }
    out
}
