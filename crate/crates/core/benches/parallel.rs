//! Parallel vs sequential execution of the data-parallel hot paths.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cspace_core::classifiers::{composite_train, CoalescingMap};
use cspace_core::cspace::{build_dataset_with, sample_batch};
use cspace_core::experiments::{bench_hyperparams, standard_scene};
use cspace_core::{ElementaryKind, Exec, Label, RobotModel, SvmModel};

const MODES: [(&str, Exec); 2] = [("auto", Exec::Auto), ("sequential", Exec::Sequential)];

fn labeling(c: &mut Criterion) {
    let model = RobotModel::ur5();
    let scene = standard_scene(4, 1).unwrap();
    let mut g = c.benchmark_group("label-10k");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| build_dataset_with(&model, &scene, 10_000, 1, exec)));
    }
    g.finish();
}

fn batch_predict(c: &mut Criterion) {
    let model = RobotModel::ur5();
    let scene = standard_scene(4, 1).unwrap();
    let train = build_dataset_with(&model, &scene, 3000, 1, Exec::Auto);
    let map = CoalescingMap::from_model(&model).unwrap();
    let composite = composite_train(&train, &map, ElementaryKind::Knn, &bench_hyperparams()).unwrap();
    let queries = sample_batch(model.limits(), 10_000, 2);
    let mut g = c.benchmark_group("composite-knn-predict-10k");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.map(&queries, |q| composite.predict_label(q).unwrap()))
        });
    }
    g.finish();
}

fn svm_training(c: &mut Criterion) {
    let model = RobotModel::ur5();
    let scene = standard_scene(4, 1).unwrap();
    // Large enough that kernel rows are filled in parallel.
    let train = build_dataset_with(&model, &scene, 3000, 1, Exec::Auto);
    let points: Vec<f64> = train.samples.iter().flat_map(|s| s.q.iter().copied()).collect();
    let labels: Vec<Label> = train.samples.iter().map(|s| Label::from_collision(s.label.in_collision())).collect();
    let params = bench_hyperparams().svm;
    let mut g = c.benchmark_group("svm-train-3k");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| SvmModel::train_with(&points, model.dof(), &labels, &params, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, labeling, batch_predict, svm_training);
criterion_main!(benches);
