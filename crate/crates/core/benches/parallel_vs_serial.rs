use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use hyran::bandit::{HyRanConfig, RegularizationSchedule};
use hyran::diagnostics::{check_psi_size, cloud_seeds, estimator_cloud, record_trajectory, PsiConfig};
use hyran::environment::EnvironmentSpec;
use hyran::exec::Execution;
use hyran::harness::{run_grid, ExperimentConfig};

const MODES: [(&str, Execution); 2] = [("serial", Execution::Serial), ("parallel", Execution::Parallel)];

fn grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_grid");
    group.sample_size(10);
    for (name, execution) in MODES {
        let mut cfg = ExperimentConfig::benchmark_preset(EnvironmentSpec::correlated_gaussian(5, 10), 500, 4, 1);
        cfg.execution = execution;
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| black_box(run_grid(cfg).unwrap()))
        });
    }
    group.finish();
}

fn psi(c: &mut Criterion) {
    let mut group = c.benchmark_group("check_psi_size");
    group.sample_size(10);
    for (name, execution) in MODES {
        let cfg = PsiConfig {
            execution,
            ..PsiConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| black_box(check_psi_size(cfg).unwrap()))
        });
    }
    group.finish();
}

fn cloud(c: &mut Criterion) {
    let env = EnvironmentSpec::correlated_gaussian(2, 10);
    let schedule = RegularizationSchedule::practical(2);
    let config = HyRanConfig::new(0.5);
    let (log, _) = record_trajectory(&env, config, schedule, 500, 3).unwrap();
    let seeds = cloud_seeds(9, 200);
    let mut group = c.benchmark_group("estimator_cloud");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(estimator_cloud(&log, config, &schedule, &seeds, execution).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, grid, psi, cloud);
criterion_main!(benches);
