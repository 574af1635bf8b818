use std::collections::BTreeSet;

use crate::geometry::BoundaryId;
use crate::truth::{BcKind, Equation};

use super::{Protocol, ResultRecord};

/// Seed-mean MSE per (boundary, n) in units of 1e-3.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub equation: Equation,
    pub bc_kind: BcKind,
    pub protocol: Protocol,
    pub boundaries: Vec<BoundaryId>,
    pub counts: Vec<usize>,
    /// `cells[row][col]`, `None` when no record matches.
    pub cells: Vec<Vec<Option<f64>>>,
}

/// Mean MSE × 1e3, rounded half-to-even at three decimals; `—` if missing.
pub fn format_cell(mean_mse: Option<f64>) -> String {
    match mean_mse {
        Some(v) => {
            // Thousandths of the 1e-3 unit; snap away binary noise first so
            // decimal ties such as 1.7225 round to even.
            let thousandths = v * 1e6;
            let snapped = (thousandths * 1e6).round() / 1e6;
            format!("{:.3}", snapped.round_ties_even() / 1e3)
        }
        None => "—".to_string(),
    }
}

/// Builds the table for one equation, BC kind and protocol. Rows are B1–B4
/// followed by any other boundary present; columns are 50, 100, 200 plus any
/// other count present.
pub fn emit_table(records: &[ResultRecord], equation: Equation, bc_kind: BcKind, protocol: Protocol) -> Table {
    let slice: Vec<&ResultRecord> = records
        .iter()
        .filter(|r| r.equation == equation && r.bc_kind == bc_kind && r.protocol == protocol)
        .collect();
    let mut boundaries = BoundaryId::TEST.to_vec();
    let extra: BTreeSet<BoundaryId> = slice.iter().map(|r| r.boundary_id).filter(|b| !boundaries.contains(b)).collect();
    boundaries.extend(extra);
    let counts: Vec<usize> = [50, 100, 200]
        .into_iter()
        .chain(slice.iter().map(|r| r.n_interior))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let cells = boundaries
        .iter()
        .map(|b| {
            counts
                .iter()
                .map(|n| {
                    let v: Vec<f64> = slice
                        .iter()
                        .filter(|r| r.boundary_id == *b && r.n_interior == *n)
                        .map(|r| r.mse)
                        .collect();
                    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect()
        })
        .collect();
    Table {
        equation,
        bc_kind,
        protocol,
        boundaries,
        counts,
        cells,
    }
}

impl Table {
    pub fn title(&self) -> String {
        format!(
            "{} / {} ({}), MSE in units of 1e-3",
            self.equation, self.bc_kind, self.protocol
        )
    }

    /// Aligned plain-text rendering.
    pub fn render_text(&self) -> String {
        let head: Vec<String> = std::iter::once("boundary".to_string())
            .chain(self.counts.iter().map(|n| n.to_string()))
            .collect();
        let rows: Vec<Vec<String>> = self
            .boundaries
            .iter()
            .zip(&self.cells)
            .map(|(b, row)| {
                std::iter::once(b.to_string())
                    .chain(row.iter().map(|c| format_cell(*c)))
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = (0..head.len())
            .map(|j| {
                std::iter::once(&head)
                    .chain(&rows)
                    .map(|r| r[j].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |r: &[String]| {
            r.iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (s, w))| {
                    let pad = w - s.chars().count();
                    if j == 0 {
                        format!("{s}{}", " ".repeat(pad))
                    } else {
                        format!("{}{s}", " ".repeat(pad))
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = format!("{}\n{}\n", self.title(), line(&head));
        for r in &rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("boundary");
        for n in &self.counts {
            out.push_str(&format!(",{n}"));
        }
        out.push('\n');
        for (b, row) in self.boundaries.iter().zip(&self.cells) {
            out.push_str(b.as_str());
            for c in row {
                out.push(',');
                out.push_str(&format_cell(*c));
            }
            out.push('\n');
        }
        out
    }

    /// Number of cells with at least one record.
    pub fn filled(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_some()).count()
    }
}
