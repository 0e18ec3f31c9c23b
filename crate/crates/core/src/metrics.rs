//! Success rate, SPL and report tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::context_tokens_for;

/// Published GOAT-Bench Val-Unseen figures, shown beside simulated results
/// for orientation only.
pub const REFERENCE_GOAT_VAL_UNSEEN_SR: f64 = 62.7;
pub const REFERENCE_GOAT_VAL_UNSEEN_SPL: f64 = 56.9;

/// Published per-category success rates (percent) of the compressed-memory
/// model, keyed by target category.
pub const REFERENCE_CATEGORY_SR: [(&str, f64); 8] = [
    ("island", 76.3),
    ("microwave", 75.0),
    ("carpet", 56.0),
    ("freezer", 88.0),
    ("piano", 79.0),
    ("book", 73.0),
    ("hanging clothes", 80.0),
    ("shower glass", 92.0),
];

pub fn reference_category_sr(category: &str) -> Option<f64> {
    REFERENCE_CATEGORY_SR.iter().find(|(c, _)| *c == category).map(|&(_, v)| v)
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no outcomes to aggregate")]
    Empty,
    #[error("episode {index} has non-positive shortest length {value}")]
    NonPositiveShortest { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub success: bool,
    /// Realized path length `L_i`, meters.
    pub path_length: f64,
    /// Geodesic start-to-goal length `L_i*`, meters.
    pub shortest_length: f64,
    pub category: String,
    pub steps: usize,
    pub context_tokens_final: u64,
}

pub fn success_rate(outcomes: &[EpisodeOutcome]) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(outcomes.iter().filter(|o| o.success).count() as f64 / outcomes.len() as f64)
}

/// `(1/N) * sum_i S_i * L_i* / max(L_i, L_i*)`.
pub fn spl(outcomes: &[EpisodeOutcome]) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut total = 0.0;
    for (index, o) in outcomes.iter().enumerate() {
        if !(o.shortest_length > 0.0) {
            return Err(MetricsError::NonPositiveShortest { index, value: o.shortest_length });
        }
        if o.success {
            total += o.shortest_length / o.path_length.max(o.shortest_length);
        }
    }
    Ok(total / outcomes.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryStats {
    pub episodes: usize,
    pub success_rate: f64,
}

pub fn per_category(outcomes: &[EpisodeOutcome]) -> BTreeMap<String, CategoryStats> {
    let mut groups: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for o in outcomes {
        let e = groups.entry(o.category.clone()).or_default();
        e.0 += 1;
        e.1 += usize::from(o.success);
    }
    groups
        .into_iter()
        .map(|(c, (n, s))| (c, CategoryStats { episodes: n, success_rate: s as f64 / n as f64 }))
        .collect()
}

/// A header plus rows of already-formatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

pub fn fmt_ratio(v: f64) -> String {
    format!("{v:.4}")
}

/// How a configuration's frames were tokenized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tokenization {
    /// The uncompressed native vision tower.
    Native,
    /// `N` compression blocks.
    Blocks(usize),
}

impl Tokenization {
    pub fn label(self, frames: usize) -> String {
        match self {
            Tokenization::Native => format!("{frames} (origin)"),
            Tokenization::Blocks(n) => format!("{frames} ({}\u{d7})", 4u64.pow(n as u32)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub frames: usize,
    pub tokenization: Tokenization,
    pub tokens_per_frame: usize,
    pub pose_text_tokens: usize,
    pub fixed_overhead: usize,
    pub success_rate: Option<f64>,
    pub spl: Option<f64>,
    pub wall_clock_s_per_episode: Option<f64>,
}

/// One row per configuration: stored frames, tokenization, SR, context
/// size, quadratic attention cost and wall-clock time.
pub fn efficiency_report(stats: &[RunStats]) -> Table {
    let mut table = Table::new(&[
        "config",
        "frames",
        "tokens_per_frame",
        "sr",
        "spl",
        "context_tokens",
        "attention_cost_proxy",
        "wall_clock_s_per_episode",
    ]);
    let opt = |v: Option<f64>, f: fn(f64) -> String| v.map_or_else(|| "-".to_string(), f);
    for s in stats {
        let ctx = context_tokens_for(s.frames as u64, s.tokens_per_frame as u64, s.pose_text_tokens as u64, s.fixed_overhead as u64);
        table.push(vec![
            s.tokenization.label(s.frames),
            s.frames.to_string(),
            s.tokens_per_frame.to_string(),
            opt(s.success_rate, fmt_ratio),
            opt(s.spl, fmt_ratio),
            ctx.to_string(),
            (u128::from(ctx) * u128::from(ctx)).to_string(),
            opt(s.wall_clock_s_per_episode, |v| format!("{v:.3}")),
        ]);
    }
    table
}
