//! CSV schemas. Raw traces use the fixed row schema
//! `algo,d,N,T,hyper_name,hyper_value,rep,t,cum_regret`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::AggregateCurve;
use crate::environment::RegretTrace;
use crate::error::{BanditError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub algo: String,
    pub d: usize,
    #[serde(rename = "N")]
    pub n_arms: usize,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub hyper_name: String,
    pub hyper_value: f64,
    pub rep: usize,
    pub t: u64,
    pub cum_regret: f64,
}

#[derive(Debug, Serialize)]
struct AggregateRow<'a> {
    algo: &'a str,
    d: usize,
    #[serde(rename = "N")]
    n_arms: usize,
    #[serde(rename = "T")]
    horizon: u64,
    hyper_name: &'a str,
    hyper_value: f64,
    reps: usize,
    t: u64,
    mean_cum_regret: f64,
    std_cum_regret: f64,
}

#[derive(Debug, Serialize)]
struct BestRow<'a> {
    algo: &'a str,
    hyper_name: &'a str,
    hyper_value: f64,
    reps: usize,
    final_mean: f64,
    final_std: f64,
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| BanditError::io(parent, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| BanditError::csv(path, e))
}

fn write_rows<S: Serialize>(path: &Path, rows: impl IntoIterator<Item = S>) -> Result<()> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| BanditError::csv(path, e))?;
    }
    w.flush().map_err(|e| BanditError::io(path, e))
}

/// Rows sorted by `(algo, hyper_value, rep, t)` regardless of input order.
pub fn write_trace_csv(path: &Path, traces: &[&RegretTrace]) -> Result<()> {
    let mut sorted: Vec<&RegretTrace> = traces.to_vec();
    sorted.sort_by(|a, b| {
        a.meta
            .algo
            .cmp(&b.meta.algo)
            .then(a.meta.hyper_value.total_cmp(&b.meta.hyper_value))
            .then(a.meta.rep.cmp(&b.meta.rep))
    });
    let rows = sorted.into_iter().flat_map(|tr| {
        tr.records.iter().map(move |r| TraceRow {
            algo: tr.meta.algo.clone(),
            d: tr.meta.d,
            n_arms: tr.meta.n_arms,
            horizon: tr.meta.horizon,
            hyper_name: tr.meta.hyper_name.clone(),
            hyper_value: tr.meta.hyper_value,
            rep: tr.meta.rep,
            t: r.t,
            cum_regret: r.cum_regret,
        })
    });
    write_rows(path, rows)
}

pub fn read_trace_rows(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BanditError::csv(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<TraceRow>, _>>()
        .map_err(|e| BanditError::csv(path, e))
}

pub fn write_aggregate_csv(path: &Path, curves: &[&AggregateCurve]) -> Result<()> {
    let rows = curves.iter().flat_map(|c| {
        c.mean
            .iter()
            .zip(&c.std)
            .enumerate()
            .map(move |(k, (&m, &s))| AggregateRow {
                algo: &c.algo,
                d: c.d,
                n_arms: c.n_arms,
                horizon: c.horizon,
                hyper_name: &c.hyper_name,
                hyper_value: c.hyper_value,
                reps: c.reps,
                t: k as u64 + 1,
                mean_cum_regret: m,
                std_cum_regret: s,
            })
    });
    write_rows(path, rows)
}

pub fn write_best_csv(path: &Path, curves: &[&AggregateCurve]) -> Result<()> {
    write_rows(
        path,
        curves.iter().map(|c| BestRow {
            algo: &c.algo,
            hyper_name: &c.hyper_name,
            hyper_value: c.hyper_value,
            reps: c.reps,
            final_mean: c.final_mean(),
            final_std: c.final_std(),
        }),
    )
}
