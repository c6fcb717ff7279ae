use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Whether larger or smaller metric values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

/// One scored method in one comparison cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub cell: String,
    pub method: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    /// Mean rank per method over the complete cells, 1 = best.
    pub mean_rank: BTreeMap<String, f64>,
    pub cells_used: usize,
    /// Cells skipped because a method was absent or scored non-finite.
    pub excluded_cells: Vec<String>,
}

/// Ranks of `scores` (1 = best); ties share the average of their ranks.
pub fn average_ranks(scores: &[f64], direction: Direction) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = scores[a].total_cmp(&scores[b]);
        match direction {
            Direction::HigherIsBetter => ord.reverse(),
            Direction::LowerIsBetter => ord,
        }
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Ranks methods within every cell and averages the ranks per method. Only
/// cells in which every method has a finite score take part.
pub fn rank_aggregate(scores: &[Scored], direction: Direction) -> RankSummary {
    let methods: BTreeSet<&str> = scores.iter().map(|s| s.method.as_str()).collect();
    let mut cells: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for s in scores {
        cells.entry(s.cell.as_str()).or_default().insert(s.method.as_str(), s.score);
    }
    let mut totals: BTreeMap<String, f64> = methods.iter().map(|m| (m.to_string(), 0.0)).collect();
    let mut used = 0;
    let mut excluded = Vec::new();
    for (cell, by_method) in &cells {
        let complete = methods.iter().all(|m| by_method.get(m).is_some_and(|v| v.is_finite()));
        if !complete {
            excluded.push(cell.to_string());
            continue;
        }
        let values: Vec<f64> = methods.iter().map(|m| by_method[m]).collect();
        for (m, r) in methods.iter().zip(average_ranks(&values, direction)) {
            *totals.get_mut(*m).expect("method registered") += r;
        }
        used += 1;
    }
    let mean_rank = totals
        .into_iter()
        .map(|(m, t)| (m, if used > 0 { t / used as f64 } else { f64::NAN }))
        .collect();
    RankSummary {
        mean_rank,
        cells_used: used,
        excluded_cells: excluded,
    }
}
