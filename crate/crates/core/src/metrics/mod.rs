//! Confusion matrices, the five segmentation scores, and ranking tables.

mod confusion;
mod report;

pub use confusion::ConfusionMatrix;
pub use report::{
    centi, format_percent, rank, read_csv, tables_by_task, write_csv, Cell, MetricName, MetricReport, Pooling, RankingTable,
    ReportRow, CSV_HEADER,
};
