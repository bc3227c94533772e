use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::IndexedLabelImage;
use crate::metrics::confusion::ConfusionMatrix;
use crate::num::Scalar;

/// The five evaluation scores, each scaled to percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<F: Scalar> {
    pub pixel_accuracy: F,
    pub mean_accuracy: F,
    pub mean_iu: F,
    pub fw_iu: F,
    pub mcc: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    PixelAccuracy,
    MeanAccuracy,
    MeanIu,
    FwIu,
    Mcc,
}

impl MetricName {
    pub const ALL: [MetricName; 5] = [
        MetricName::PixelAccuracy,
        MetricName::MeanAccuracy,
        MetricName::MeanIu,
        MetricName::FwIu,
        MetricName::Mcc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::PixelAccuracy => "pixel_accuracy",
            MetricName::MeanAccuracy => "mean_accuracy",
            MetricName::MeanIu => "mean_iu",
            MetricName::FwIu => "fw_iu",
            MetricName::Mcc => "mcc",
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

/// How per-page confusion is combined into one report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// One confusion matrix over all pixels of all pages.
    #[default]
    Pixels,
    /// Scores computed per page, then averaged.
    PageMean,
}

/// Rounds a percent value to hundredths.
pub fn centi(v: f64) -> i64 {
    (v * 100.0).round() as i64
}

/// Two-decimal rendering consistent with [`centi`].
pub fn format_percent(v: f64) -> String {
    let c = centi(v);
    let sign = if c < 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", c.abs() / 100, c.abs() % 100)
}

impl<F: Scalar> MetricReport<F> {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        let pct = F::from_f64_lossy(100.0);
        Ok(MetricReport {
            pixel_accuracy: cm.pixel_accuracy::<F>()? * pct,
            mean_accuracy: cm.mean_accuracy::<F>()? * pct,
            mean_iu: cm.mean_iu::<F>()? * pct,
            fw_iu: cm.fw_iu::<F>()? * pct,
            mcc: cm.mcc::<F>()? * pct,
        })
    }

    /// Scores over `(truth, prediction)` page pairs.
    pub fn evaluate(
        pairs: &[(IndexedLabelImage, IndexedLabelImage)],
        pooling: Pooling,
    ) -> Result<Self> {
        let (first, _) = pairs.first().ok_or(Error::EmptyMatrix)?;
        let k = first.schema().len();
        match pooling {
            Pooling::Pixels => {
                let mut cm = ConfusionMatrix::new(k);
                for (t, p) in pairs {
                    cm.accumulate(t, p)?;
                }
                Self::from_confusion(&cm)
            }
            Pooling::PageMean => {
                let reports = pairs
                    .iter()
                    .map(|(t, p)| {
                        let mut cm = ConfusionMatrix::new(k);
                        cm.accumulate(t, p)?;
                        Self::from_confusion(&cm)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::mean(&reports).expect("non-empty"))
            }
        }
    }

    pub fn mean(reports: &[Self]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let n = F::from_usize(reports.len()).unwrap();
        let avg = |f: fn(&Self) -> F| reports.iter().map(f).fold(F::zero(), |a, b| a + b) / n;
        Some(MetricReport {
            pixel_accuracy: avg(|r| r.pixel_accuracy),
            mean_accuracy: avg(|r| r.mean_accuracy),
            mean_iu: avg(|r| r.mean_iu),
            fw_iu: avg(|r| r.fw_iu),
            mcc: avg(|r| r.mcc),
        })
    }

    pub fn get(&self, metric: MetricName) -> F {
        match metric {
            MetricName::PixelAccuracy => self.pixel_accuracy,
            MetricName::MeanAccuracy => self.mean_accuracy,
            MetricName::MeanIu => self.mean_iu,
            MetricName::FwIu => self.fw_iu,
            MetricName::Mcc => self.mcc,
        }
    }

    pub fn values(&self) -> [F; 5] {
        MetricName::ALL.map(|m| self.get(m))
    }

    pub fn cast<G: Scalar>(&self) -> MetricReport<G> {
        let c = |v: F| G::from_f64_lossy(v.to_f64_lossy());
        MetricReport {
            pixel_accuracy: c(self.pixel_accuracy),
            mean_accuracy: c(self.mean_accuracy),
            mean_iu: c(self.mean_iu),
            fw_iu: c(self.fw_iu),
            mcc: c(self.mcc),
        }
    }
}

impl<F: Scalar> fmt::Display for MetricReport<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = MetricName::ALL
            .iter()
            .map(|m| format!("{m}={}", format_percent(self.get(*m).to_f64_lossy())))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// Content of one ranking cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Value(f64),
    /// The run failed; the message is kept for the report.
    Failed(String),
    /// No run for this (row, column).
    Missing,
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(*v),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Value(v) => format_percent(*v),
            Cell::Failed(_) => "FAILED".into(),
            Cell::Missing => "n/a".into(),
        }
    }
}

/// Predictor × configuration table with per-column best flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub metric: MetricName,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<Cell>>,
    pub best: Vec<Vec<bool>>,
}

impl RankingTable {
    /// Lays out cells with rows and columns in first-appearance order.
    pub fn from_cells(metric: MetricName, entries: Vec<(String, String, Cell)>) -> Self {
        let mut rows: Vec<String> = Vec::new();
        let mut columns: Vec<String> = Vec::new();
        for (r, c, _) in &entries {
            if !rows.contains(r) {
                rows.push(r.clone());
            }
            if !columns.contains(c) {
                columns.push(c.clone());
            }
        }
        let mut cells = vec![vec![Cell::Missing; columns.len()]; rows.len()];
        for (r, c, cell) in entries {
            let ri = rows.iter().position(|x| *x == r).unwrap();
            let ci = columns.iter().position(|x| *x == c).unwrap();
            cells[ri][ci] = cell;
        }
        let mut best = vec![vec![false; columns.len()]; rows.len()];
        for ci in 0..columns.len() {
            let top = cells.iter().filter_map(|row| row[ci].value()).map(centi).max();
            if let Some(top) = top {
                for ri in 0..rows.len() {
                    best[ri][ci] = cells[ri][ci].value().map(centi) == Some(top);
                }
            }
        }
        RankingTable {
            metric,
            rows,
            columns,
            cells,
            best,
        }
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<&Cell> {
        let ri = self.rows.iter().position(|r| r == row)?;
        let ci = self.columns.iter().position(|c| c == column)?;
        Some(&self.cells[ri][ci])
    }

    pub fn is_best(&self, row: &str, column: &str) -> bool {
        let ri = self.rows.iter().position(|r| r == row);
        let ci = self.columns.iter().position(|c| c == column);
        matches!((ri, ci), (Some(r), Some(c)) if self.best[r][c])
    }

    /// Markdown table; best values per column in bold.
    pub fn to_markdown(&self, title: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(t) = title {
            writeln!(out, "results for {t} ({}):\n", self.metric).unwrap();
        }
        write!(out, "| configuration |").unwrap();
        for c in &self.columns {
            write!(out, " {c} |").unwrap();
        }
        out.push('\n');
        out.push_str("|---|");
        for _ in &self.columns {
            out.push_str("---:|");
        }
        out.push('\n');
        for (ri, r) in self.rows.iter().enumerate() {
            write!(out, "| {r} |").unwrap();
            for (ci, cell) in self.cells[ri].iter().enumerate() {
                let text = cell.render();
                if self.best[ri][ci] {
                    write!(out, " **{text}** |").unwrap();
                } else {
                    write!(out, " {text} |").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Ranks reports keyed by `(predictor, config)` on one metric.
pub fn rank<F: Scalar>(
    reports: &[((String, String), MetricReport<F>)],
    by: MetricName,
) -> RankingTable {
    RankingTable::from_cells(
        by,
        reports
            .iter()
            .map(|((p, c), r)| (p.clone(), c.clone(), Cell::Value(r.get(by).to_f64_lossy())))
            .collect(),
    )
}

/// One line of the CSV report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub predictor: String,
    pub config: String,
    pub task: String,
    pub fold: usize,
    pub report: Option<MetricReport<f64>>,
}

pub const CSV_HEADER: &str = "predictor,config,task,fold,pixel_accuracy,mean_accuracy,mean_iu,fw_iu,mcc";

/// One CSV line per row; scores of failed runs are left empty.
pub fn write_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    for r in rows {
        let mut record = vec![r.predictor.clone(), r.config.clone(), r.task.clone(), r.fold.to_string()];
        match &r.report {
            Some(rep) => record.extend(rep.values().map(format_percent)),
            None => record.extend(std::iter::repeat_n(String::new(), 5)),
        }
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

#[derive(Deserialize)]
struct CsvRecord {
    predictor: String,
    config: String,
    task: String,
    fold: usize,
    pixel_accuracy: Option<f64>,
    mean_accuracy: Option<f64>,
    mean_iu: Option<f64>,
    fw_iu: Option<f64>,
    mcc: Option<f64>,
}

/// Reads rows written by [`write_csv`]; rows with any empty score have no report.
pub fn read_csv(text: &str, origin: &std::path::Path) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize::<CsvRecord>()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: e.position().map_or(0, |p| p.line() as usize),
                reason: e.to_string(),
            })?;
            let report = match (rec.pixel_accuracy, rec.mean_accuracy, rec.mean_iu, rec.fw_iu, rec.mcc) {
                (Some(pixel_accuracy), Some(mean_accuracy), Some(mean_iu), Some(fw_iu), Some(mcc)) => {
                    Some(MetricReport {
                        pixel_accuracy,
                        mean_accuracy,
                        mean_iu,
                        fw_iu,
                        mcc,
                    })
                }
                _ => None,
            };
            Ok(ReportRow {
                predictor: rec.predictor,
                config: rec.config,
                task: rec.task,
                fold: rec.fold,
                report,
            })
        })
        .collect()
}

/// One ranking table per task, in first-appearance order. Rows without a
/// report become failed cells.
pub fn tables_by_task(rows: &[ReportRow], metric: MetricName) -> Vec<(String, RankingTable)> {
    let mut tasks: Vec<&str> = Vec::new();
    for r in rows {
        if !tasks.contains(&r.task.as_str()) {
            tasks.push(&r.task);
        }
    }
    tasks
        .into_iter()
        .map(|task| {
            let entries = rows
                .iter()
                .filter(|r| r.task == task)
                .map(|r| {
                    let cell = match &r.report {
                        Some(rep) => Cell::Value(rep.get(metric)),
                        None => Cell::Failed("no scores".into()),
                    };
                    (r.predictor.clone(), r.config.clone(), cell)
                })
                .collect();
            (task.to_string(), RankingTable::from_cells(metric, entries))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(mcc: f64) -> MetricReport<f64> {
        MetricReport {
            pixel_accuracy: 99.0,
            mean_accuracy: 90.0,
            mean_iu: 80.0,
            fw_iu: 98.0,
            mcc,
        }
    }

    fn key(p: &str, c: &str) -> (String, String) {
        (p.to_string(), c.to_string())
    }

    #[test]
    fn single_entry_is_best() {
        let t = rank(&[(key("a", "0.3/-"), report(50.0))], MetricName::Mcc);
        assert!(t.is_best("a", "0.3/-"));
    }

    #[test]
    fn higher_value_flagged_per_column() {
        let t = rank(
            &[
                (key("EfficientNet-B2", "0.3/-"), report(91.63)),
                (key("EfficientNet-B1", "0.3/-"), report(91.36)),
            ],
            MetricName::Mcc,
        );
        assert!(t.is_best("EfficientNet-B2", "0.3/-"));
        assert!(!t.is_best("EfficientNet-B1", "0.3/-"));
        assert_eq!(t.rows, vec!["EfficientNet-B2", "EfficientNet-B1"]);
    }

    #[test]
    fn ties_are_all_flagged() {
        let t = rank(
            &[(key("a", "c"), report(70.001)), (key("b", "c"), report(69.999))],
            MetricName::Mcc,
        );
        assert!(t.is_best("a", "c") && t.is_best("b", "c"));
    }

    #[test]
    fn markdown_marks_best_and_missing() {
        let t = RankingTable::from_cells(
            MetricName::Mcc,
            vec![
                ("a".into(), "x".into(), Cell::Value(91.0)),
                ("b".into(), "x".into(), Cell::Failed("boom".into())),
                ("b".into(), "y".into(), Cell::Value(12.345)),
            ],
        );
        let md = t.to_markdown(Some("sep"));
        assert!(md.contains("| a | **91.00** | n/a |"), "{md}");
        assert!(md.contains("| b | FAILED | **12.35** |"), "{md}");
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(format_percent(100.0), "100.00");
        assert_eq!(format_percent(200.0 / 3.0), "66.67");
        assert_eq!(format_percent(-33.333), "-33.33");
        assert_eq!(format_percent(0.0), "0.00");
    }

    #[test]
    fn csv_has_one_row_per_run() {
        let rows = vec![
            ReportRow {
                predictor: "oracle".into(),
                config: "0.9/v".into(),
                task: "sep".into(),
                fold: 0,
                report: Some(report(100.0)),
            },
            ReportRow {
                predictor: "x,y".into(),
                config: "0.9/v".into(),
                task: "sep".into(),
                fold: 0,
                report: None,
            },
        ];
        let csv = write_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "oracle,0.9/v,sep,0,99.00,90.00,80.00,98.00,100.00");
        assert_eq!(lines[2], "\"x,y\",0.9/v,sep,0,,,,,");
        let back = read_csv(&csv, std::path::Path::new("r.csv")).unwrap();
        assert_eq!(back, rows);
        let tables = tables_by_task(&back, MetricName::Mcc);
        assert_eq!(tables.len(), 1);
        assert!(tables[0].1.is_best("oracle", "0.9/v"));
        assert!(matches!(tables[0].1.cell("x,y", "0.9/v"), Some(Cell::Failed(_))));
    }
}
