use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::binning::{BinnedTable, Binning};
use crate::error::{check_len, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub feature: usize,
    pub feature_name: String,
    pub bin: usize,
    pub bin_label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapColumn {
    pub cluster: usize,
    /// Share of the cluster's snapshots whose series ends in the outcome class.
    pub outcome_fraction: f64,
    pub count: usize,
    pub empty: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: usize,
    pub feature_name: String,
    pub max_row_difference: f64,
}

/// `cells[r][c]` is P(row's feature in row's bin | snapshot in column c).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapTable {
    pub outcome_class: usize,
    pub rows: Vec<HeatmapRow>,
    pub columns: Vec<HeatmapColumn>,
    pub cells: Vec<Vec<f64>>,
    pub ranking: Vec<FeatureScore>,
}

/// Builds the conditional-probability table. `outcome[i]` says whether
/// snapshot `i` belongs to a series whose final label is `outcome_class`.
pub fn heatmap(
    clusters: &[usize],
    num_clusters: usize,
    binned: &BinnedTable,
    binning: &Binning,
    outcome: &[bool],
    outcome_class: usize,
) -> Result<HeatmapTable> {
    check_len("heatmap binned rows", clusters.len(), binned.rows.len())?;
    check_len("heatmap outcomes", clusters.len(), outcome.len())?;
    if let Some(&c) = clusters.iter().find(|&&c| c >= num_clusters) {
        return Err(Error::InvalidArgument(format!("cluster id {c} outside 0..{num_clusters}")));
    }
    let mut count = vec![0usize; num_clusters];
    let mut positive = vec![0usize; num_clusters];
    for (&c, &o) in clusters.iter().zip(outcome) {
        count[c] += 1;
        positive[c] += o as usize;
    }
    let mut columns: Vec<HeatmapColumn> = (0..num_clusters)
        .map(|c| HeatmapColumn {
            cluster: c,
            outcome_fraction: if count[c] == 0 { 0.0 } else { positive[c] as f64 / count[c] as f64 },
            count: count[c],
            empty: count[c] == 0,
        })
        .collect();
    columns.sort_by(|a, b| a.outcome_fraction.total_cmp(&b.outcome_fraction).then(a.cluster.cmp(&b.cluster)));
    let position: Vec<usize> = {
        let mut p = vec![0; num_clusters];
        for (k, col) in columns.iter().enumerate() {
            p[col.cluster] = k;
        }
        p
    };

    let mut rows = Vec::new();
    let mut offsets = Vec::new();
    for (f, bins) in binning.features.iter().enumerate() {
        offsets.push(rows.len());
        for (b, label) in bins.labels().into_iter().enumerate() {
            rows.push(HeatmapRow {
                feature: f,
                feature_name: binning.feature_names[f].clone(),
                bin: b,
                bin_label: label,
            });
        }
    }
    let mut cells = vec![vec![0.0; num_clusters]; rows.len()];
    for (row, &c) in binned.rows.iter().zip(clusters) {
        for (f, &b) in row.iter().enumerate() {
            cells[offsets[f] + b][position[c]] += 1.0;
        }
    }
    for (k, col) in columns.iter().enumerate() {
        if col.count > 0 {
            for r in cells.iter_mut() {
                r[k] /= col.count as f64;
            }
        }
    }
    let mut table = HeatmapTable {
        outcome_class,
        rows,
        columns,
        cells,
        ranking: Vec::new(),
    };
    table.ranking = rank_features(&table);
    Ok(table)
}

/// Features ordered by their largest across-cluster spread of any bin,
/// ignoring empty clusters; ties keep feature order.
pub fn rank_features(table: &HeatmapTable) -> Vec<FeatureScore> {
    let mut scores: Vec<FeatureScore> = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        let vals = table.cells[r].iter().zip(&table.columns).filter(|(_, c)| !c.empty).map(|(v, _)| *v);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let diff = if hi >= lo { hi - lo } else { 0.0 };
        match scores.last_mut() {
            Some(s) if s.feature == row.feature => s.max_row_difference = s.max_row_difference.max(diff),
            _ => scores.push(FeatureScore {
                feature: row.feature,
                feature_name: row.feature_name.clone(),
                max_row_difference: diff,
            }),
        }
    }
    scores.sort_by(|a, b| b.max_row_difference.total_cmp(&a.max_row_difference).then(a.feature.cmp(&b.feature)));
    scores
}

impl HeatmapTable {
    /// Rows of the `k` top-ranked features, grouped by feature in rank order.
    pub fn top_features(&self, k: usize) -> HeatmapTable {
        let keep: Vec<usize> = self.ranking.iter().take(k).map(|s| s.feature).collect();
        let mut rows = Vec::new();
        let mut cells = Vec::new();
        for f in &keep {
            for (r, row) in self.rows.iter().enumerate() {
                if row.feature == *f {
                    rows.push(row.clone());
                    cells.push(self.cells[r].clone());
                }
            }
        }
        HeatmapTable {
            outcome_class: self.outcome_class,
            rows,
            columns: self.columns.clone(),
            cells,
            ranking: self.ranking.iter().take(k).cloned().collect(),
        }
    }

    /// CSV layout: a header of cluster ids, then `outcome_fraction` and
    /// `count` rows, then one row per (feature, bin).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["feature".to_string(), "bin".to_string()];
        header.extend(self.columns.iter().map(|c| format!("cluster_{}", c.cluster)));
        w.write_record(&header)?;
        let mut frac = vec!["outcome_fraction".to_string(), String::new()];
        frac.extend(self.columns.iter().map(|c| format!("{}", c.outcome_fraction)));
        w.write_record(&frac)?;
        let mut count = vec!["count".to_string(), String::new()];
        count.extend(self.columns.iter().map(|c| c.count.to_string()));
        w.write_record(&count)?;
        for (row, cells) in self.rows.iter().zip(&self.cells) {
            let mut rec = vec![row.feature_name.clone(), row.bin_label.clone()];
            rec.extend(cells.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_svg(&self) -> String {
        let cell = 28.0;
        let left = 260.0;
        let top = 60.0;
        let width = left + cell * self.columns.len() as f64 + 20.0;
        let height = top + cell * self.rows.len() as f64 + 20.0;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
        );
        for (k, col) in self.columns.iter().enumerate() {
            let x = left + cell * k as f64 + cell / 2.0;
            let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, top - 24.0, col.cluster);
            let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="8">{:.2}</text>"#, top - 8.0, col.outcome_fraction);
        }
        for (r, row) in self.rows.iter().enumerate() {
            let y = top + cell * r as f64;
            let label = xml_escape(&format!("{} {}", row.feature_name, row.bin_label));
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{label}</text>"#, left - 6.0, y + cell * 0.65);
            for (k, v) in self.cells[r].iter().enumerate() {
                let shade = (255.0 * (1.0 - v)).round() as u8;
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="white"/>"#,
                    left + cell * k as f64
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
