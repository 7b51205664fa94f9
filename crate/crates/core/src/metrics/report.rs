use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{kendall_tau, mape, r_squared, spearman_rho};
use crate::error::{Error, Result};
use crate::fusion::{NUM_TARGETS, TARGET_NAMES};

/// One evaluated cell: its type and raw-unit prediction and truth.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub cell_type: String,
    pub pred: [f64; NUM_TARGETS],
    pub truth: [f64; NUM_TARGETS],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Unweighted mean over cell types.
    #[default]
    Macro,
    /// Mean over cell types weighted by their entry counts.
    Micro,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeRanking {
    pub cell_type: String,
    pub count: usize,
    pub spearman: [Option<f64>; NUM_TARGETS],
    pub kendall: [Option<f64>; NUM_TARGETS],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyRanking {
    pub averaging: Averaging,
    pub per_type: Vec<TypeRanking>,
    /// Averaged over types, per target; `None` when no type was defined.
    pub spearman: [Option<f64>; NUM_TARGETS],
    pub kendall: [Option<f64>; NUM_TARGETS],
    /// Types with a single entry.
    pub skipped_types: usize,
}

fn weighted_mean(vals: impl Iterator<Item = (Option<f64>, f64)>) -> Option<f64> {
    let (mut s, mut w) = (0.0, 0.0);
    for (v, wt) in vals {
        if let Some(v) = v {
            s += v * wt;
            w += wt;
        }
    }
    (w > 0.0).then(|| s / w)
}

/// ρ and τ within each cell type, averaged over types.
pub fn per_family_ranking(rows: &[EvalRow], averaging: Averaging) -> Result<FamilyRanking> {
    let mut groups: BTreeMap<&str, Vec<&EvalRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(&r.cell_type).or_default().push(r);
    }
    let mut per_type = Vec::new();
    let mut skipped_types = 0;
    for (ty, g) in groups {
        if g.len() < 2 {
            skipped_types += 1;
            continue;
        }
        let mut spearman = [None; NUM_TARGETS];
        let mut kendall = [None; NUM_TARGETS];
        for t in 0..NUM_TARGETS {
            let p: Vec<f64> = g.iter().map(|r| r.pred[t]).collect();
            let y: Vec<f64> = g.iter().map(|r| r.truth[t]).collect();
            spearman[t] = spearman_rho(&p, &y)?;
            kendall[t] = kendall_tau(&p, &y)?;
        }
        per_type.push(TypeRanking {
            cell_type: ty.to_string(),
            count: g.len(),
            spearman,
            kendall,
        });
    }
    let weight = |r: &TypeRanking| match averaging {
        Averaging::Macro => 1.0,
        Averaging::Micro => r.count as f64,
    };
    let spearman =
        std::array::from_fn(|t| weighted_mean(per_type.iter().map(|r| (r.spearman[t], weight(r)))));
    let kendall =
        std::array::from_fn(|t| weighted_mean(per_type.iter().map(|r| (r.kendall[t], weight(r)))));
    Ok(FamilyRanking {
        averaging,
        per_type,
        spearman,
        kendall,
        skipped_types,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub target: String,
    pub mape_pct: Option<f64>,
    pub mape_excluded: usize,
    pub r2: Option<f64>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub count: usize,
    pub num_types: usize,
    pub targets: Vec<TargetMetrics>,
    pub average: TargetMetrics,
    pub ranking: FamilyRanking,
}

fn mean_of(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    weighted_mean(xs.map(|x| (x, 1.0)))
}

pub fn evaluate(label: &str, rows: &[EvalRow], averaging: Averaging) -> Result<MetricsReport> {
    if rows.is_empty() {
        return Err(Error::Metrics("nothing to evaluate".into()));
    }
    let ranking = per_family_ranking(rows, averaging)?;
    let mut targets = Vec::with_capacity(NUM_TARGETS);
    for t in 0..NUM_TARGETS {
        let p: Vec<f64> = rows.iter().map(|r| r.pred[t]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.truth[t]).collect();
        let m = mape(&p, &y)?;
        targets.push(TargetMetrics {
            target: TARGET_NAMES[t].to_string(),
            mape_pct: m.value,
            mape_excluded: m.excluded,
            r2: r_squared(&p, &y)?,
            spearman: ranking.spearman[t],
            kendall: ranking.kendall[t],
        });
    }
    let average = TargetMetrics {
        target: "average".into(),
        mape_pct: mean_of(targets.iter().map(|t| t.mape_pct)),
        mape_excluded: targets.iter().map(|t| t.mape_excluded).sum(),
        r2: mean_of(targets.iter().map(|t| t.r2)),
        spearman: mean_of(targets.iter().map(|t| t.spearman)),
        kendall: mean_of(targets.iter().map(|t| t.kendall)),
    };
    let num_types = rows
        .iter()
        .map(|r| r.cell_type.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    Ok(MetricsReport {
        label: label.to_string(),
        count: rows.len(),
        num_types,
        targets,
        average,
        ranking,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned table: one row per target plus the average.
    pub fn to_table(&self) -> String {
        let cell = |v: Option<f64>, digits: usize| {
            v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
        };
        let mut s = format!(
            "{} ({} cells, {} types)\n",
            self.label, self.count, self.num_types
        );
        writeln!(
            s,
            "{:<16} {:>9} {:>8} {:>8} {:>8}",
            "target", "MAPE(%)", "R2", "rho", "tau"
        )
        .expect("write");
        for t in self.targets.iter().chain(std::iter::once(&self.average)) {
            writeln!(
                s,
                "{:<16} {:>9} {:>8} {:>8} {:>8}",
                t.target,
                cell(t.mape_pct, 2),
                cell(t.r2, 3),
                cell(t.spearman, 3),
                cell(t.kendall, 3)
            )
            .expect("write");
        }
        s
    }
}
