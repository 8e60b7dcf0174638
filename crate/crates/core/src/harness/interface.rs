//! Interval-patching study: integrate one analysis interval, re-anchor the
//! expansion at the boundary, and measure the jumps the patching argument
//! bounds.

use serde::Serialize;

use super::{
    code_version, max_mass_rel_dev, note_mass_sentinel, push_fit, steps_for, ExperimentConfig,
    FitLine, HarnessError,
};
use crate::exec;
use crate::mfe::{build_modulation, restart};
use crate::spectral::make_initial;
use crate::splitting::{integrate, IntegrateOptions};

#[derive(Debug, Clone, Serialize)]
pub struct InterfacePoint {
    pub epsilon: f64,
    pub h: f64,
    pub steps: u64,
    /// Boundary time `steps * h`, the end of the first interval.
    pub t_interface: f64,
    /// `|E - E_hat|` at the boundary; expected `eps^{N+1}`.
    pub e_jump: f64,
    /// `||z - z_hat||_1` at the boundary; expected `eps^N`.
    pub z_jump_h1: f64,
    /// `||psi^n||_1` handed across the boundary.
    pub state_h1: f64,
    /// Whether the smallness hypothesis `||psi^n||_1 <= 2 eps` held.
    pub hypothesis_ok: bool,
    pub max_mass_rel_dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InterfaceReport {
    pub kind: &'static str,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub points: Vec<InterfacePoint>,
    pub fits: Vec<FitLine>,
    pub notes: Vec<String>,
}

/// For each epsilon: build the expansion at time zero, integrate to
/// `t = 1/eps`, restart from the numerical state, and compare old and new
/// expansions at the interface.
pub fn interface_study(cfg: &ExperimentConfig) -> Result<InterfaceReport, HarnessError> {
    cfg.validate()?;
    if cfg.trunc < 2 {
        return Err(HarnessError::BadConfig(
            "interface study needs N at least 2".into(),
        ));
    }
    let scheme = cfg.resolve_scheme()?;
    let params = cfg.step_params()?;
    let h = params.h;

    let jobs: Vec<f64> = cfg.epsilons.clone();
    let results = exec::map_ordered(jobs, |&eps| {
        let u0 = make_initial(cfg.k_cut, eps, &cfg.profile)?;
        let table = build_modulation(&u0, eps, &scheme, &params)?;

        let n_steps = steps_for(1.0 / eps, h).min(cfg.max_steps);
        let options = IntegrateOptions {
            record_stride: 0,
            snapshot_steps: Vec::new(),
            precision: cfg.precision,
            cfl: cfg.cfl,
        };
        let traj = integrate(&u0, &scheme, &params, n_steps, &options)?;
        let t_hat = n_steps as f64 * h;
        let outcome = restart(&traj.final_state, t_hat, eps, &scheme, &params)?;

        let tau_hat = eps * t_hat;
        let e_jump = (table.almost_invariant(tau_hat)
            - outcome.table.almost_invariant(tau_hat))
        .abs();
        let z_jump = table
            .mode_seq_at(tau_hat)
            .sub(&outcome.table.mode_seq_at(tau_hat))
            .norm_sigma(1.0);

        Ok::<InterfacePoint, HarnessError>(InterfacePoint {
            epsilon: eps,
            h,
            steps: n_steps,
            t_interface: t_hat,
            e_jump,
            z_jump_h1: z_jump,
            state_h1: outcome.state_h1,
            hypothesis_ok: outcome.within_bound,
            max_mass_rel_dev: max_mass_rel_dev(&traj.records),
        })
    });
    let mut points = Vec::new();
    let mut fits = Vec::new();
    let mut notes = Vec::new();
    for r in results {
        let point = r?;
        note_mass_sentinel(
            &mut notes,
            &format!("eps={}", point.epsilon),
            point.max_mass_rel_dev,
        );
        points.push(point);
    }

    let n = cfg.trunc as f64;
    let e_pts: Vec<(f64, f64)> = points.iter().map(|p| (p.epsilon, p.e_jump)).collect();
    let z_pts: Vec<(f64, f64)> = points.iter().map(|p| (p.epsilon, p.z_jump_h1)).collect();
    push_fit(&mut fits, &mut notes, "e_jump", Some(n + 1.0), e_pts);
    push_fit(&mut fits, &mut notes, "z_jump", Some(n), z_pts);
    for p in &points {
        notes.push(format!(
            "eps={}: ||psi||_1 = {:.6e} at the interface, smallness hypothesis {}",
            p.epsilon,
            p.state_h1,
            if p.hypothesis_ok { "held" } else { "FAILED" }
        ));
    }

    Ok(InterfaceReport {
        kind: "interface",
        code_version: code_version(),
        config: cfg.clone(),
        points,
        fits,
        notes,
    })
}
