//! JSON/CSV document assembly and atomic emission.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Map, Value};

use qwork::analysis::ThermoSummary;
use qwork::params::PhysicalParams;
use qwork::truncation::Truncation;
use qwork::{Error, Result};

use crate::args::FormatFlag;

pub const UNITS: &str =
    "energies and work in hbar*omega_m; u in 1/omega_m; beta in 1/(hbar*omega_m)";

/// One output document: the common header plus a payload key.
pub struct Document {
    header: Map<String, Value>,
    payload_key: &'static str,
    payload: Value,
    csv: String,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

impl Document {
    pub fn new(
        params: &PhysicalParams<f64>,
        trunc: Option<&Truncation<f64>>,
        deficit: Option<f64>,
    ) -> Result<Self> {
        let mut header = Map::new();
        let mut params_v = to_value(params);
        if let Value::Object(ref mut m) = params_v {
            m.insert("n_c".into(), json!(params.n_c()?.value()));
            m.insert("n_m".into(), json!(params.n_m()?.value()));
        }
        header.insert("params".into(), params_v);
        header.insert(
            "truncation".into(),
            trunc.map(to_value).unwrap_or(Value::Null),
        );
        header.insert("deficit".into(), deficit.map(|d| json!(d)).unwrap_or(Value::Null));
        header.insert("units".into(), json!(UNITS));
        Ok(Self {
            header,
            payload_key: "payload",
            payload: Value::Null,
            csv: String::new(),
        })
    }

    /// Samples `[[u, re, im], ...]`.
    pub fn with_chi(mut self, u: &[f64], values: &[qwork::Complex64]) -> Self {
        let rows: Vec<Value> = u
            .iter()
            .zip(values)
            .map(|(u, v)| json!([u, v.re, v.im]))
            .collect();
        self.payload_key = "chi";
        self.payload = Value::Array(rows);
        self.csv = String::from("u,re,im\n");
        for (u, v) in u.iter().zip(values) {
            self.csv.push_str(&format!("{},{},{}\n", fmt_f64(*u), fmt_f64(v.re), fmt_f64(v.im)));
        }
        self
    }

    /// Atoms `[[W, p], ...]`.
    pub fn with_atoms(mut self, dist: &qwork::WorkDistribution) -> Self {
        let rows: Vec<Value> = dist
            .atoms()
            .iter()
            .map(|a| json!([a.work, a.prob]))
            .collect();
        self.payload_key = "atoms";
        self.payload = Value::Array(rows);
        self.csv = String::from("work,probability\n");
        for a in dist.atoms() {
            self.csv.push_str(&format!("{},{}\n", fmt_f64(a.work), fmt_f64(a.prob)));
        }
        self
    }

    /// Density samples `[[W, density], ...]` plus kernel metadata.
    pub fn with_density(mut self, cg: &qwork::CoarseGrainedDensity) -> Self {
        let rows: Vec<Value> = cg
            .grid
            .iter()
            .zip(&cg.density)
            .map(|(w, d)| json!([w, d]))
            .collect();
        self.header.insert(
            "kernel".into(),
            json!({
                "kind": to_value(&cg.kernel),
                "width": cg.width,
                "kernel_mass": cg.kernel_mass,
                "clipped_mass": cg.clipped_mass,
            }),
        );
        self.payload_key = "density";
        self.payload = Value::Array(rows);
        self.csv = String::from("work,density\n");
        for (w, d) in cg.grid.iter().zip(&cg.density) {
            self.csv.push_str(&format!("{},{}\n", fmt_f64(*w), fmt_f64(*d)));
        }
        self
    }

    /// Generic summary object.
    pub fn with_summary<T: Serialize>(mut self, summary: &T, fields: &[&str]) -> Self {
        let v = to_value(summary);
        self.payload_key = "summary";
        self.csv = format!("{}\n{}\n", fields.join(","), csv_row(&v, fields));
        self.payload = v;
        self
    }

    /// Sweep rows.
    pub fn with_rows(mut self, flag: &str, rows: &[SweepRow]) -> Self {
        self.header.insert("sweep_flag".into(), json!(flag));
        self.payload_key = "rows";
        self.payload = to_value(&rows);
        let fields = [
            "value",
            "mean",
            "variance",
            "skewness",
            "delta_f",
            "w_irr",
            "jarzynski_residual",
            "crooks_residual_max",
            "deficit",
        ];
        self.csv = format!("{}\n", fields.join(","));
        for row in rows {
            let mut flat = Map::new();
            flat.insert("value".into(), json!(row.value));
            if let Value::Object(m) = to_value(&row.summary) {
                flat.extend(m);
            }
            flat.insert(
                "deficit".into(),
                row.deficit.map(|d| json!(d)).unwrap_or(Value::Null),
            );
            self.csv
                .push_str(&format!("{}\n", csv_row(&Value::Object(flat), &fields)));
        }
        self
    }

    /// Render and emit; a file target is written in one call only after
    /// the full document is built (no partial files).
    pub fn emit(self, output: Option<&PathBuf>, format: FormatFlag) -> Result<()> {
        let text = match format {
            FormatFlag::Json => {
                let mut doc = self.header;
                doc.insert(self.payload_key.to_string(), self.payload);
                let mut s = serde_json::to_string_pretty(&Value::Object(doc))
                    .map_err(|e| Error::InvalidSpec(format!("serialization failed: {e}")))?;
                s.push('\n');
                s
            }
            FormatFlag::Csv => self.csv,
        };
        match output {
            None => {
                std::io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| Error::InvalidSpec(format!("write failed: {e}")))?;
            }
            Some(path) => {
                std::fs::write(path, text)
                    .map_err(|e| Error::InvalidSpec(format!("cannot write {path:?}: {e}")))?;
            }
        }
        Ok(())
    }
}


/// Shortest-roundtrip float text (same renderer as the JSON side).
fn fmt_f64(x: f64) -> String {
    serde_json::to_string(&x).unwrap_or_else(|_| x.to_string())
}

fn csv_field(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_row(obj: &Value, fields: &[&str]) -> String {
    fields
        .iter()
        .map(|f| obj.get(*f).map(csv_field).unwrap_or_default())
        .collect::<Vec<_>>()
        .join(",")
}

/// One sweep result row.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    #[serde(flatten)]
    pub summary: ThermoSummary<f64>,
    pub deficit: Option<f64>,
}
