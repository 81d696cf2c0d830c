use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::embeddings::PoolingSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    #[serde(with = "spec_string")]
    pub spec: PoolingSpec,
    pub emosyn: bool,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub dataset: String,
    pub seed: u64,
    pub train_records: usize,
    pub test_records: usize,
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableStyle {
    Text,
    Json,
    Csv,
}

impl std::str::FromStr for TableStyle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "txt" => Ok(TableStyle::Text),
            "json" => Ok(TableStyle::Json),
            "csv" => Ok(TableStyle::Csv),
            other => Err(format!("unknown table style {other:?}")),
        }
    }
}

impl ResultTable {
    /// Copy with timings removed; everything left is a pure function of
    /// the inputs and the seed.
    pub fn without_timing(&self) -> Self {
        let mut t = self.clone();
        t.rows.iter_mut().for_each(|r| r.wall_time_ms = None);
        t
    }

    pub fn row(&self, spec: &PoolingSpec, emosyn: bool) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.spec == *spec && r.emosyn == emosyn)
    }

    /// Highest-accuracy row; ties keep the earlier row.
    pub fn best(&self) -> Option<&ResultRow> {
        self.rows.iter().fold(None, |best: Option<&ResultRow>, r| match best {
            Some(b) if b.accuracy >= r.accuracy => Some(b),
            _ => Some(r),
        })
    }

    pub fn render(&self, style: TableStyle) -> String {
        match style {
            TableStyle::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("table serializes");
                s.push('\n');
                s
            }
            TableStyle::Csv => {
                let mut s = String::from("spec,emosyn,accuracy,macro_f1,feature_dim,wall_time_ms\n");
                for r in &self.rows {
                    let time = r.wall_time_ms.map(|t| format!("{t:.1}")).unwrap_or_default();
                    writeln!(
                        s,
                        "{},{},{:.6},{:.6},{},{}",
                        r.spec, r.emosyn, r.accuracy, r.macro_f1, r.feature_dim, time
                    )
                    .unwrap();
                }
                s
            }
            TableStyle::Text => {
                let mut s = format!(
                    "dataset {}  seed {}  train {}  test {}\n",
                    self.dataset, self.seed, self.train_records, self.test_records
                );
                let width = self
                    .rows
                    .iter()
                    .map(|r| r.spec.to_string().len())
                    .max()
                    .unwrap_or(4)
                    .max(4);
                writeln!(
                    s,
                    "{:<width$}  {:<6}  {:>8}  {:>8}  {:>6}  {:>9}",
                    "spec", "emosyn", "acc", "macro-f1", "dim", "time(ms)"
                )
                .unwrap();
                for r in &self.rows {
                    let time = r.wall_time_ms.map(|t| format!("{t:.0}")).unwrap_or_else(|| "-".into());
                    writeln!(
                        s,
                        "{:<width$}  {:<6}  {:>8.4}  {:>8.4}  {:>6}  {:>9}",
                        r.spec.to_string(),
                        if r.emosyn { "on" } else { "off" },
                        r.accuracy,
                        r.macro_f1,
                        r.feature_dim,
                        time
                    )
                    .unwrap();
                }
                s
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

mod spec_string {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::embeddings::PoolingSpec;

    pub fn serialize<S: Serializer>(spec: &PoolingSpec, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(spec)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<PoolingSpec, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}
