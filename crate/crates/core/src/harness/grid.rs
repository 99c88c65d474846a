use std::path::Path;

use super::csv_io::{write_aggregate_csv, write_best_csv, write_trace_csv, TraceRow};
use super::plot::{emit_plot, PlotCurve};
use super::{run_trajectory, CellSpec, ExperimentConfig};
use crate::environment::RegretTrace;
use crate::error::{BanditError, Result};

/// Mean and standard deviation of cumulative regret across repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub algo: String,
    pub hyper_name: String,
    pub hyper_value: f64,
    pub d: usize,
    pub n_arms: usize,
    pub horizon: u64,
    pub reps: usize,
    pub mean: Vec<f64>,
    /// Sample standard deviation (`n - 1` denominator; zero for one repetition).
    pub std: Vec<f64>,
}

impl AggregateCurve {
    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }

    pub fn final_std(&self) -> f64 {
        self.std.last().copied().unwrap_or(0.0)
    }

    pub fn label(&self) -> String {
        format!("{} ({}={})", self.algo, self.hyper_name, self.hyper_value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub curves: Vec<AggregateCurve>,
    /// Index into `curves` of the best configuration of each algorithm.
    pub best: Vec<(String, usize)>,
}

impl AggregateResult {
    pub fn best_curve(&self, algo: &str) -> Option<&AggregateCurve> {
        self.best
            .iter()
            .find(|(a, _)| a == algo)
            .map(|(_, i)| &self.curves[*i])
    }
}

pub struct GridOutcome {
    pub traces: Vec<RegretTrace>,
    pub aggregate: AggregateResult,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-round mean/std over traces sharing one configuration.
pub fn aggregate(traces: &[&RegretTrace]) -> Result<AggregateCurve> {
    let first = traces
        .first()
        .ok_or_else(|| BanditError::InvalidArgument("nothing to aggregate".into()))?;
    let len = first.records.len();
    if traces.iter().any(|t| t.records.len() != len) {
        return Err(BanditError::InvalidArgument(
            "traces of one configuration have different lengths".into(),
        ));
    }
    let mut mean = Vec::with_capacity(len);
    let mut std = Vec::with_capacity(len);
    let mut column = vec![0.0; traces.len()];
    for k in 0..len {
        for (c, t) in column.iter_mut().zip(traces) {
            *c = t.records[k].cum_regret;
        }
        let (m, s) = mean_std(&column);
        mean.push(m);
        std.push(s);
    }
    Ok(AggregateCurve {
        algo: first.meta.algo.clone(),
        hyper_name: first.meta.hyper_name.clone(),
        hyper_value: first.meta.hyper_value,
        d: first.meta.d,
        n_arms: first.meta.n_arms,
        horizon: first.meta.horizon,
        reps: traces.len(),
        mean,
        std,
    })
}

/// Aggregate raw CSV rows grouped by `(algo, hyper_name, hyper_value)`.
pub fn aggregate_rows(rows: &[TraceRow]) -> Result<Vec<AggregateCurve>> {
    use std::collections::BTreeMap;
    type Key = (String, String, u64);
    let mut groups: BTreeMap<Key, BTreeMap<usize, Vec<(u64, f64)>>> = BTreeMap::new();
    let mut shape: BTreeMap<Key, (usize, usize, u64, f64)> = BTreeMap::new();
    for r in rows {
        let key = (r.algo.clone(), r.hyper_name.clone(), r.hyper_value.to_bits());
        groups
            .entry(key.clone())
            .or_default()
            .entry(r.rep)
            .or_default()
            .push((r.t, r.cum_regret));
        shape.insert(key, (r.d, r.n_arms, r.horizon, r.hyper_value));
    }
    let mut curves = Vec::new();
    for (key, reps) in groups {
        let (d, n_arms, horizon, hyper_value) = shape[&key];
        let mut series: Vec<Vec<f64>> = reps
            .into_values()
            .map(|mut v| {
                v.sort_by_key(|(t, _)| *t);
                v.into_iter().map(|(_, c)| c).collect()
            })
            .collect();
        let len = series[0].len();
        if series.iter().any(|s| s.len() != len) {
            return Err(BanditError::InvalidArgument(format!(
                "repetitions of {} {}={} have different lengths",
                key.0, key.1, hyper_value
            )));
        }
        let mut mean = Vec::with_capacity(len);
        let mut std = Vec::with_capacity(len);
        let mut column = vec![0.0; series.len()];
        for k in 0..len {
            for (c, s) in column.iter_mut().zip(series.iter_mut()) {
                *c = s[k];
            }
            let (m, sd) = mean_std(&column);
            mean.push(m);
            std.push(sd);
        }
        curves.push(AggregateCurve {
            algo: key.0,
            hyper_name: key.1,
            hyper_value,
            d,
            n_arms,
            horizon,
            reps: series.len(),
            mean,
            std,
        });
    }
    Ok(curves)
}

/// Lowest mean final cumulative regret; ties go to the smaller hyperparameter.
pub fn select_best(curves: &[&AggregateCurve]) -> Option<usize> {
    (0..curves.len()).min_by(|&a, &b| {
        curves[a]
            .final_mean()
            .total_cmp(&curves[b].final_mean())
            .then(curves[a].hyper_value.total_cmp(&curves[b].hyper_value))
    })
}

fn best_per_algorithm(curves: &[AggregateCurve]) -> Vec<(String, usize)> {
    let mut algos: Vec<&str> = Vec::new();
    for c in curves {
        if !algos.contains(&c.algo.as_str()) {
            algos.push(&c.algo);
        }
    }
    algos
        .into_iter()
        .map(|a| {
            let idx: Vec<usize> = (0..curves.len()).filter(|&i| curves[i].algo == a).collect();
            let refs: Vec<&AggregateCurve> = idx.iter().map(|&i| &curves[i]).collect();
            (a.to_string(), idx[select_best(&refs).expect("non-empty group")])
        })
        .collect()
}

/// Run every `(configuration, repetition)` cell and aggregate.
pub fn run_grid(config: &ExperimentConfig) -> Result<GridOutcome> {
    config.validate()?;
    let cells: Vec<CellSpec> = config.cells();
    let reps = config.reps;
    let traces = config.execution.try_map_indexed(cells.len() * reps, |k| {
        run_trajectory(&cells[k / reps], k % reps)
    })?;
    let curves = if reps == 0 {
        Vec::new()
    } else {
        traces
            .chunks(reps)
            .map(|chunk| aggregate(&chunk.iter().collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?
    };
    let best = best_per_algorithm(&curves);
    Ok(GridOutcome {
        traces,
        aggregate: AggregateResult { curves, best },
    })
}

impl GridOutcome {
    /// Write `<algo>_runs.csv`, `<algo>_aggregate.csv`, `best.csv` and
    /// `regret.svg` (best configuration of each algorithm) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| BanditError::io(dir, e))?;
        let mut written = Vec::new();
        let mut algos: Vec<&str> = Vec::new();
        for t in &self.traces {
            if !algos.contains(&t.meta.algo.as_str()) {
                algos.push(&t.meta.algo);
            }
        }
        for algo in &algos {
            let traces: Vec<&RegretTrace> =
                self.traces.iter().filter(|t| t.meta.algo == *algo).collect();
            let path = dir.join(format!("{algo}_runs.csv"));
            write_trace_csv(&path, &traces)?;
            written.push(path);
            let curves: Vec<&AggregateCurve> = self
                .aggregate
                .curves
                .iter()
                .filter(|c| c.algo == *algo)
                .collect();
            let path = dir.join(format!("{algo}_aggregate.csv"));
            write_aggregate_csv(&path, &curves)?;
            written.push(path);
        }
        let best: Vec<&AggregateCurve> = self
            .aggregate
            .best
            .iter()
            .map(|(_, i)| &self.aggregate.curves[*i])
            .collect();
        let path = dir.join("best.csv");
        write_best_csv(&path, &best)?;
        written.push(path);
        if !best.is_empty() && best.iter().any(|c| !c.mean.is_empty()) {
            let curves: Vec<PlotCurve> = best.iter().map(|c| PlotCurve::from_aggregate(c)).collect();
            let path = dir.join("regret.svg");
            emit_plot(&curves, &path)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{TraceMeta, TraceRecord};

    fn synthetic(hyper: f64, rep: usize, cum: &[f64]) -> RegretTrace {
        RegretTrace {
            meta: TraceMeta {
                algo: "linucb".into(),
                hyper_name: "alpha".into(),
                hyper_value: hyper,
                seed: 0,
                d: 2,
                n_arms: 2,
                horizon: cum.len() as u64,
                rep,
            },
            records: cum
                .iter()
                .enumerate()
                .map(|(k, &c)| TraceRecord {
                    t: k as u64 + 1,
                    arm: 0,
                    h: None,
                    reward: 0.0,
                    regret: 0.0,
                    cum_regret: c,
                })
                .collect(),
        }
    }

    #[test]
    fn best_is_minimum_final_regret() {
        let traces = [
            synthetic(0.001, 0, &[1.0, 10.0]),
            synthetic(0.01, 0, &[1.0, 5.0]),
            synthetic(0.1, 0, &[1.0, 7.0]),
        ];
        let curves: Vec<AggregateCurve> = traces.iter().map(|t| aggregate(&[t]).unwrap()).collect();
        let refs: Vec<&AggregateCurve> = curves.iter().collect();
        assert_eq!(select_best(&refs), Some(1));
    }

    #[test]
    fn ties_prefer_smaller_hyperparameter() {
        let traces = [synthetic(0.1, 0, &[3.0]), synthetic(0.01, 0, &[3.0])];
        let curves: Vec<AggregateCurve> = traces.iter().map(|t| aggregate(&[t]).unwrap()).collect();
        let refs: Vec<&AggregateCurve> = curves.iter().collect();
        assert_eq!(select_best(&refs), Some(1));
    }

    #[test]
    fn mean_and_sample_std() {
        let a = synthetic(0.1, 0, &[1.0, 2.0]);
        let b = synthetic(0.1, 1, &[3.0, 6.0]);
        let c = aggregate(&[&a, &b]).unwrap();
        assert_eq!(c.mean, vec![2.0, 4.0]);
        assert!((c.std[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((c.std[1] - 8f64.sqrt()).abs() < 1e-15);
    }
}
