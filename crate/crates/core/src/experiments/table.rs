//! Long-format result tables and their on-disk layout.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::stats::mean_se;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One aggregated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    /// Response and loss cell, e.g. `y_SI/hinge/zero_one`.
    pub group: String,
    pub model: String,
    pub x_name: String,
    pub x: f64,
    pub y_name: String,
    pub y: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub se: Option<f64>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<Row>,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl ResultTable {
    pub fn new(config: &ExperimentConfig) -> Self {
        ResultTable {
            rows: Vec::new(),
            config_hash: config.hash(),
            seed: config.master_seed,
            version: VERSION.into(),
        }
    }

    /// Rows matching every given filter.
    pub fn select<'a>(
        &'a self,
        group: Option<&'a str>,
        model: Option<&'a str>,
        metric: Option<&'a str>,
    ) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| {
            group.is_none_or(|g| r.group == g)
                && model.is_none_or(|m| r.model == m)
                && metric.is_none_or(|m| r.metric == m)
        })
    }

    pub fn find(&self, group: &str, model: &str, metric: &str, x: f64) -> Option<&Row> {
        self.rows.iter().find(|r| {
            r.group == group && r.model == model && r.metric == metric && r.x == x
        })
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "experiment", "group", "model", "x_name", "x", "y_name", "y", "metric", "value", "se",
            "trials", "config_hash", "seed", "version",
        ])?;
        for row in &self.rows {
            w.write_record([
                row.experiment.clone(),
                row.group.clone(),
                row.model.clone(),
                row.x_name.clone(),
                row.x.to_string(),
                row.y_name.clone(),
                row.y.map(|v| v.to_string()).unwrap_or_default(),
                row.metric.clone(),
                row.value.to_string(),
                row.se.map(|v| v.to_string()).unwrap_or_default(),
                row.trials.to_string(),
                self.config_hash.clone(),
                self.seed.to_string(),
                self.version.clone(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Write `results.csv`, `config.resolved.json` and `diagnostics.json`.
    pub fn write_dir(
        &self,
        dir: &Path,
        config: &ExperimentConfig,
        diagnostics: &serde_json::Value,
    ) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("results.csv"), self.to_csv_string()?)?;
        fs::write(
            dir.join("config.resolved.json"),
            serde_json::to_string_pretty(config)?,
        )?;
        fs::write(
            dir.join("diagnostics.json"),
            serde_json::to_string_pretty(diagnostics)?,
        )?;
        Ok(())
    }
}

/// Key of one aggregation cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub group: String,
    pub model: String,
    pub x_name: &'static str,
    pub x: f64,
    pub y_name: &'static str,
    pub y: Option<f64>,
    pub metric: &'static str,
}

/// One per-trial observation; `se` is used only when a cell has a single
/// observation.
#[derive(Debug, Clone)]
pub struct Obs {
    pub key: CellKey,
    pub value: f64,
    pub se: Option<f64>,
}

impl Obs {
    pub fn new(key: CellKey, value: f64) -> Self {
        Obs {
            key,
            value,
            se: None,
        }
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.se = Some(se);
        self
    }
}

/// Mean and across-trial standard error per cell, in first-seen order.
pub fn aggregate(experiment: &str, table: &mut ResultTable, obs: impl IntoIterator<Item = Obs>) {
    let mut order: Vec<(CellKey, Vec<f64>, Option<f64>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for o in obs {
        let k = &o.key;
        let id = format!(
            "{}\u{1}{}\u{1}{}\u{1}{:?}\u{1}{:?}\u{1}{}",
            k.group,
            k.model,
            k.x_name,
            k.x.to_bits(),
            k.y.map(f64::to_bits),
            k.metric
        );
        match index.get(&id) {
            Some(&i) => order[i].1.push(o.value),
            None => {
                index.insert(id, order.len());
                order.push((o.key, vec![o.value], o.se));
            }
        }
    }
    for (key, values, single_se) in order {
        let est = mean_se(&values);
        let se = if values.len() >= 2 {
            Some(est.se)
        } else {
            single_se
        };
        table.rows.push(Row {
            experiment: experiment.into(),
            group: key.group,
            model: key.model,
            x_name: key.x_name.into(),
            x: key.x,
            y_name: key.y_name.into(),
            y: key.y,
            metric: key.metric.into(),
            value: est.value,
            se,
            trials: values.len(),
        });
    }
}

/// `|a − b| ≤ k·√(se_a² + se_b²)`; missing standard errors never agree.
pub fn agree(a: &Row, b: &Row, k: f64) -> bool {
    match (a.se, b.se) {
        (Some(sa), Some(sb)) => (a.value - b.value).abs() <= k * (sa * sa + sb * sb).sqrt(),
        _ => false,
    }
}

/// Combined standard error `√(se_a² + se_b²)`.
pub fn combined_se(a: &Row, b: &Row) -> Option<f64> {
    Some((a.se? * a.se? + b.se? * b.se?).sqrt())
}
