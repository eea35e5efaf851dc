//! CSV tables extracted from suite reports.

use serde_json::Value;

use crate::error::{CliError, CliResult};

/// A plot table that some suite report can carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Rellich,
    H1Embedding,
    Constants,
    CalliasMargins,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [PlotKind::Rellich, PlotKind::H1Embedding, PlotKind::Constants, PlotKind::CalliasMargins];

    pub fn parse(s: &str) -> CliResult<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.key() == s)
            .ok_or_else(|| CliError::Config(format!("unknown plot kind `{s}`")))
    }

    /// Key under the report's `data` map, also the CLI name.
    pub fn key(self) -> &'static str {
        match self {
            PlotKind::Rellich => "rellich",
            PlotKind::H1Embedding => "h1_embedding",
            PlotKind::Constants => "constants",
            PlotKind::CalliasMargins => "callias_margins",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            PlotKind::Rellich => &["j", "singular_value"],
            PlotKind::H1Embedding => &["index", "singular_value"],
            PlotKind::Constants => &["n_modes", "nt", "extension_constant", "trace_constant"],
            PlotKind::CalliasMargins => &["x", "min_eigenvalue"],
        }
    }
}

fn cell(v: &Value) -> CliResult<String> {
    match v {
        Value::Null => Ok(String::new()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(CliError::Config(format!("non-numeric plot cell {other}"))),
    }
}

/// Renders the `kind` table of a report as CSV. A report without that table
/// yields the header alone; an unknown kind or malformed rows are
/// configuration errors.
pub fn emit_plot_data(report_json: &str, kind: &str) -> CliResult<String> {
    let kind = PlotKind::parse(kind)?;
    let report: Value =
        serde_json::from_str(report_json).map_err(|e| CliError::Config(format!("report is not JSON: {e}")))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = kind.header();
    w.write_record(header).map_err(|e| CliError::Io(e.into()))?;
    let rows = report.get("data").and_then(|d| d.get(kind.key()));
    if let Some(rows) = rows {
        let rows = rows
            .as_array()
            .ok_or_else(|| CliError::Config(format!("`{}` is not a table", kind.key())))?;
        for row in rows {
            let cells = row
                .as_array()
                .filter(|r| r.len() == header.len())
                .ok_or_else(|| CliError::Config(format!("`{}` row has the wrong width", kind.key())))?;
            let rec = cells.iter().map(cell).collect::<CliResult<Vec<_>>>()?;
            w.write_record(&rec).map_err(|e| CliError::Io(e.into()))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_without_data() {
        let s = emit_plot_data(r#"{"data":{}}"#, "constants").unwrap();
        assert_eq!(s, "n_modes,nt,extension_constant,trace_constant\n");
    }

    #[test]
    fn rows_are_written_in_order() {
        let s = emit_plot_data(r#"{"data":{"rellich":[[1,0.5],[2,0.25]]}}"#, "rellich").unwrap();
        assert_eq!(s, "j,singular_value\n1,0.5\n2,0.25\n");
    }

    #[test]
    fn unknown_kind_is_a_config_error() {
        let e = emit_plot_data("{}", "spectrum").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(emit_plot_data(r#"{"data":{"callias_margins":[[1.0]]}}"#, "callias_margins").is_err());
    }
}
