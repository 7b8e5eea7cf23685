//! Report assembly: CSV with a provenance comment header, plus JSON dumps.
//!
//! CSV output is the determinism surface — identical command and seed must
//! produce byte-identical text — so no timing information lands there.
//! Wall-clock times ride along in the JSON dumps only.

/// One metric row of an experiment report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub metric: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub seed: u64,
    /// Emitted in JSON only; CSV stays bit-identical across reruns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

/// A table with free-form columns and a `# key=value` provenance header.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(columns: &[&str]) -> Self {
        Report {
            header: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.header.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, cells: Vec<String>) -> &mut Self {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// JSON dump of the same table, with the wall-clock time and any metric
    /// rows that only belong in the non-deterministic surface.
    pub fn to_json(&self, wall_time_ms: f64, metrics: &[ReportRow]) -> String {
        let header: std::collections::BTreeMap<&str, &str> =
            self.header.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        // rows mirror the CSV cells verbatim; typed values live in `metrics`
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.clone(), serde_json::json!(v)))
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        let doc = serde_json::json!({
            "header": header,
            "rows": rows,
            "metrics": metrics,
            "wall_time_ms": wall_time_ms,
        });
        format!("{}\n", serde_json::to_string_pretty(&doc).expect("report serializes"))
    }
}

/// Shortest-roundtrip float formatting; stable across runs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Element sets in CSV cells: pipe-separated ids (commas would split cells).
pub fn fmt_set(set: &crate::constraints::ElementSet) -> String {
    if set.is_empty() {
        return "-".into();
    }
    set.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("|")
}
