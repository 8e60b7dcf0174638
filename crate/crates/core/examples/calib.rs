//! Scratch calibration runs for the acceptance-scale experiments.

use splitstep::harness::{
    drift_experiment, interface_study, mfe_validation, order_study, ExperimentConfig, HorizonRule,
};
use splitstep::splitting::CflPolicy;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    if which == "drift" || which == "all" {
        for scheme in ["strang", "yoshida4"] {
            let t0 = std::time::Instant::now();
            let cfg = ExperimentConfig::new(scheme, 16, 2, &[0.1, 0.05, 0.025]);
            let report = drift_experiment(&cfg).unwrap();
            println!("drift {scheme}: {:?}", t0.elapsed());
            for p in &report.points {
                println!(
                    "  eps={} steps={} maxE={:.3e} maxH1={:.3e} mass={:.3e}",
                    p.epsilon, p.steps, p.max_e_dev_scaled, p.max_h1_dev_scaled, p.max_mass_rel_dev
                );
            }
            for f in &report.fits {
                println!(
                    "  fit {}: slope={:.3} resid={:.3}",
                    f.label, f.fit.slope, f.fit.rms_residual
                );
            }
        }
    }

    if which == "probe" {
        // Criterion-4 investigation: does the drift slope depend on the
        // richness of the initial profile, the size of eps, or the horizon?
        use splitstep::spectral::Profile;

        let dense = Profile::Explicit {
            modes: (-8i64..=8)
                .filter(|&j| j != 0)
                .map(|j| {
                    let w = 1.0 / (1.0 + (j * j) as f64);
                    (j, w * (0.3 + 0.1 * j as f64).cos(), w * (1.7 * j as f64).sin())
                })
                .collect(),
        };

        for (name, profile, eps, factor) in [
            ("dense eps{0.1,0.05,0.025} T=10/eps", dense.clone(), vec![0.1, 0.05, 0.025], 10.0),
            ("default big-eps {0.4,0.2,0.1} T=10/eps", Profile::Default, vec![0.4, 0.2, 0.1], 10.0),
            ("dense big-eps {0.4,0.2,0.1} T=10/eps", dense.clone(), vec![0.4, 0.2, 0.1], 10.0),
            ("default eps{0.1,0.05,0.025} T=1/eps", Profile::Default, vec![0.1, 0.05, 0.025], 1.0),
        ] {
            let t0 = std::time::Instant::now();
            let mut cfg = ExperimentConfig::new("strang", 16, 2, &eps);
            cfg.profile = profile;
            cfg.horizon_rule = HorizonRule::ScaledInverse { factor };
            let report = drift_experiment(&cfg).unwrap();
            println!("probe [{name}]: {:?}", t0.elapsed());
            for p in &report.points {
                println!(
                    "  eps={} steps={} maxE={:.3e} maxH1={:.3e} mass={:.3e}",
                    p.epsilon, p.steps, p.max_e_dev_scaled, p.max_h1_dev_scaled, p.max_mass_rel_dev
                );
            }
            for f in &report.fits {
                println!(
                    "  fit {}: slope={:.3} resid={:.3}",
                    f.label, f.fit.slope, f.fit.rms_residual
                );
            }
        }
    }

    if which == "roundoff" {
        // Which flow is responsible for the linear mass drift?
        use splitstep::spectral::{make_initial, Profile};
        use splitstep::splitting::{find_scheme, flow_a, flow_b, step};

        let h = 6.0 / 768.0;
        let u0 = make_initial(16, 0.025, &Profile::Default).unwrap();
        let m0 = u0.mass();

        let mut a_only = u0.clone();
        let mut b_only = u0.clone();
        let mut rt_only = u0.clone();
        let mut full = u0.clone();
        let strang = find_scheme("strang").unwrap();
        for n in 1..=51200u64 {
            flow_a(&mut a_only, 0.5 * h);
            b_only = flow_b(&b_only, h).unwrap();
            rt_only = splitstep::spectral::grid_to_modes(&rt_only.to_grid(32).unwrap(), 16).unwrap();
            full = step(&full, &strang, h).unwrap();
            if n == 10000 || n == 12800 || n == 51200 {
                println!(
                    "n={n}: A-only {:.3e}  B-only {:.3e}  roundtrip {:.3e}  strang {:.3e}",
                    (a_only.mass() - m0).abs() / m0,
                    (b_only.mass() - m0).abs() / m0,
                    (rt_only.mass() - m0).abs() / m0,
                    (full.mass() - m0).abs() / m0
                );
            }
        }
    }

    if which == "order" || which == "all" {
        let t0 = std::time::Instant::now();
        let mut cfg = ExperimentConfig::new("strang", 16, 2, &[0.1]);
        cfg.horizon_rule = HorizonRule::Fixed { t_final: 10.0 };
        cfg.cfl = CflPolicy::Warn;
        let schemes: Vec<String> = [
            "lie-trotter",
            "strang",
            "yoshida4",
            "suzuki4",
            "blanes-moan4",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let h_list = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
        let report = order_study(&cfg, &schemes, &h_list).unwrap();
        println!("order: {:?}", t0.elapsed());
        for p in &report.points {
            println!(
                "  {} h={:.5} err={:.6e} maxE={:.3e}",
                p.scheme, p.h, p.solution_err_h1, p.max_e_dev
            );
        }
        for f in &report.fits {
            println!(
                "  fit {}: slope={:.3} resid={:.3} (target {:?})",
                f.label, f.fit.slope, f.fit.rms_residual, f.target
            );
        }
    }

    if which == "mfe" || which == "all" {
        for n in [2usize, 3] {
            let t0 = std::time::Instant::now();
            let cfg = ExperimentConfig::new("strang", 8, n, &[0.2, 0.1, 0.05]);
            let report = mfe_validation(&cfg).unwrap();
            println!("mfe N={n}: {:?}", t0.elapsed());
            for p in &report.points {
                println!(
                    "  eps={} d/h={:.3e} Kd={:.3e} err={:.3e} dE/h={:.3e} gap={:.3e} rec={:.2e}",
                    p.epsilon,
                    p.defect_h1_per_h,
                    p.defect_k_h1,
                    p.solution_err_h1,
                    p.delta_e_per_h,
                    p.e_vs_h1_gap,
                    p.reconstruct_err
                );
            }
            for f in &report.fits {
                println!(
                    "  fit {}: slope={:.3} resid={:.3} (target {:?})",
                    f.label, f.fit.slope, f.fit.rms_residual, f.target
                );
            }
            for note in &report.notes {
                println!("  note: {note}");
            }
        }
    }

    if which == "interface" || which == "all" {
        let t0 = std::time::Instant::now();
        let cfg = ExperimentConfig::new("strang", 8, 2, &[0.2, 0.1, 0.05]);
        let report = interface_study(&cfg).unwrap();
        println!("interface: {:?}", t0.elapsed());
        for p in &report.points {
            println!(
                "  eps={} Ejump={:.3e} zjump={:.3e} state={:.3e} ok={}",
                p.epsilon, p.e_jump, p.z_jump_h1, p.state_h1, p.hypothesis_ok
            );
        }
        for f in &report.fits {
            println!(
                "  fit {}: slope={:.3} resid={:.3} (target {:?})",
                f.label, f.fit.slope, f.fit.rms_residual, f.target
            );
        }
    }
}
