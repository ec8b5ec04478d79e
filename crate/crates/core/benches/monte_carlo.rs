use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;

use sure_edf::bootstrap::{bootstrap_estimates, BootstrapConfig, Sampler};
use sure_edf::montecarlo::{mc_edf, MonteCarlo};
use sure_edf::shrinkage::ShrinkMeans;
use sure_edf::sim::{run_simulation, FamilyId, MeanSetting, SimSpec};
use sure_edf::soft_threshold::SoftThreshold;
use sure_edf::{Execution, GaussianModel};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn edf_loops(c: &mut Criterion) {
    let mut group = c.benchmark_group("mc_edf");
    group.sample_size(10);
    for n in [50usize, 500] {
        let model = GaussianModel::homoskedastic(DVector::zeros(n), 1.0).unwrap();
        let shrink = ShrinkMeans::new(n, 1.0).unwrap();
        let soft = SoftThreshold::new(n, 1.0).unwrap();
        for (label, exec) in MODES {
            let mc = MonteCarlo::new(2000, 1).with_exec(exec);
            group.bench_with_input(BenchmarkId::new(format!("shrinkage/{label}"), n), &n, |b, _| {
                b.iter(|| black_box(mc_edf(&shrink, &model, mc).unwrap()))
            });
            group.bench_with_input(BenchmarkId::new(format!("soft-threshold/{label}"), n), &n, |b, _| {
                b.iter(|| black_box(mc_edf(&soft, &model, mc).unwrap()))
            });
        }
    }
    group.finish();
}

fn bootstrap(c: &mut Criterion) {
    let mut group = c.benchmark_group("bootstrap");
    group.sample_size(10);
    let n = 200;
    let soft = SoftThreshold::new(n, 1.0).unwrap();
    let y = DVector::from_fn(n, |i, _| if i < 5 { 4.0 } else { ((i * 37 % 11) as f64 - 5.0) / 5.0 });
    for (label, exec) in MODES {
        let cfg = BootstrapConfig::new(1000, Sampler::Parametric, 3).with_exec(exec);
        group.bench_function(BenchmarkId::new("soft-threshold", label), |b| {
            b.iter(|| black_box(bootstrap_estimates(&soft, &y, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn simulation_cell(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    let spec = SimSpec {
        sample_sizes: vec![100],
        settings: vec![MeanSetting::WeakSparsity],
        outer_reps: 200,
        bootstrap_b: 50,
        ..SimSpec::desk(FamilyId::Shrinkage)
    };
    for (label, exec) in MODES {
        group.bench_function(BenchmarkId::new("shrinkage-cell", label), |b| {
            b.iter(|| black_box(run_simulation(&spec, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, edf_loops, bootstrap, simulation_cell);
criterion_main!(benches);
