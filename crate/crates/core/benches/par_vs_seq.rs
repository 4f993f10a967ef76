//! Parallel against sequential execution of the data-parallel kernels.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use disloc_core::complex::default_domain;
use disloc_core::dislocation::DislocationState;
use disloc_core::force::{ForceMesh, ForceModel, MeshSpec, PkForce, PkForceConfig};
use disloc_core::full_lattice::{FullLatticeGreens, DEFAULT_TOL};
use disloc_core::kmc::{BarrierMode, KmcConfig, KmcEngine, RateModel};
use disloc_core::par::Exec;
use disloc_core::solver::GreensCache;
use disloc_core::{CellKey, LatticeKind};

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn kmc_ensemble(c: &mut Criterion) {
    let dom = default_domain(LatticeKind::Sq, 24).unwrap();
    let cache = Arc::new(GreensCache::new(&dom).unwrap());
    let s = DislocationState::new(24, 0.05, vec![CellKey::new(7, 11, 0), CellKey::new(16, 11, 0)], vec![1, -1]).unwrap();
    let cfg = KmcConfig { rates: RateModel::Dimensionless { a: 1.0, b: 1.0 }, t_horizon: 0.07, seed: 7, barrier_mode: BarrierMode::Exact };
    let grid: Vec<f64> = (0..=10).map(|k| 0.007 * k as f64).collect();
    let mut g = c.benchmark_group("kmc_ensemble_256");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(
                || KmcEngine::new(cache.clone(), cfg.clone()).unwrap(),
                |e| black_box(e.ensemble(&s, 256, &grid, exec).unwrap()),
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn greens_columns(c: &mut Criterion) {
    let dom = default_domain(LatticeKind::Tr, 32).unwrap();
    let faces: Vec<usize> = (0..dom.faces.len()).step_by(7).take(64).collect();
    let mut g = c.benchmark_group("greens_columns_64");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(
                || GreensCache::new(&dom).unwrap(),
                |cache| {
                    cache.prefetch(&faces, exec).unwrap();
                    black_box(cache.cached())
                },
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn full_lattice_tables(c: &mut Criterion) {
    let mut g = c.benchmark_group("full_lattice_r48");
    g.sample_size(10);
    for kind in [LatticeKind::Sq, LatticeKind::Hx] {
        for (name, exec) in MODES {
            g.bench_function(BenchmarkId::new(kind.to_string(), name), |b| {
                b.iter(|| black_box(FullLatticeGreens::compute(kind, 48.0, DEFAULT_TOL, exec).unwrap()))
            });
        }
    }
    g.finish();
}

fn force_mesh(c: &mut Criterion) {
    let mut cfg = PkForceConfig::new(LatticeKind::Sq);
    cfg.n_coarse = 16;
    let pk: Arc<dyn ForceModel> = Arc::new(PkForce::new(cfg).unwrap());
    let spec = MeshSpec { lo: vec![0.35, 0.35], hi: vec![0.65, 0.65], counts: vec![6, 6] };
    let mut g = c.benchmark_group("force_mesh_36");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(
                || ForceMesh::new(pk.clone(), spec.clone(), vec![1]).unwrap(),
                |mesh| {
                    mesh.prefill(&mesh.all_nodes(), exec);
                    black_box(mesh.cached_nodes())
                },
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, kmc_ensemble, greens_columns, full_lattice_tables, force_mesh);
criterion_main!(benches);
