//! Long-time drift of the conserved quantities as a scaling law in epsilon.

use serde::Serialize;

use super::{
    code_version, note_mass_sentinel, push_fit, steps_for, ExperimentConfig, FitLine,
    HarnessError, SeriesBlock, SeriesRow,
};
use crate::exec;
use crate::spectral::{make_initial, SpectralError};
use crate::splitting::{step, SplittingScheme};

/// Summary of one epsilon in the sweep.
#[derive(Debug, Clone, Serialize)]
pub struct DriftPoint {
    pub epsilon: f64,
    pub h: f64,
    pub steps: u64,
    /// Achieved final time `steps * h`.
    pub horizon: f64,
    /// Whether the step budget shortened the requested horizon.
    pub capped: bool,
    /// Step at which the state stopped being finite, if it did.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aborted_at: Option<u64>,
    /// `max_n eps^{-2} |E(psi^n) - E(psi^0)|`.
    pub max_e_dev_scaled: f64,
    /// `max_n eps^{-2} | ||psi^n||_1^2 - ||psi^0||_1^2 |`.
    pub max_h1_dev_scaled: f64,
    pub max_mass_rel_dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    pub kind: &'static str,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub points: Vec<DriftPoint>,
    pub series: Vec<SeriesBlock>,
    pub fits: Vec<FitLine>,
    pub notes: Vec<String>,
}

/// Integrates each epsilon to its horizon and fits the scaled deviation
/// maxima against epsilon. The conservation statement predicts slope 1 for
/// both the energy and the squared H^1 norm.
pub fn drift_experiment(cfg: &ExperimentConfig) -> Result<DriftReport, HarnessError> {
    cfg.validate()?;
    let scheme = cfg.resolve_scheme()?;
    let h = cfg.step_size()?;

    let jobs: Vec<f64> = cfg.epsilons.clone();
    let results = exec::map_ordered(jobs, |&eps| run_point(cfg, &scheme, h, eps));

    let mut points = Vec::new();
    let mut series = Vec::new();
    let mut notes = Vec::new();
    for r in results {
        let (point, block) = r?;
        if let Some(n) = point.aborted_at {
            notes.push(format!(
                "eps={}: aborted at step {n} (state stopped being finite)",
                point.epsilon
            ));
        }
        if point.capped {
            notes.push(format!(
                "eps={}: horizon capped at t={} by the step budget",
                point.epsilon, point.horizon
            ));
        }
        note_mass_sentinel(
            &mut notes,
            &format!("eps={}", point.epsilon),
            point.max_mass_rel_dev,
        );
        points.push(point);
        series.push(block);
    }

    let mut fits = Vec::new();
    let usable: Vec<&DriftPoint> = points.iter().filter(|p| p.aborted_at.is_none()).collect();
    let e_pts: Vec<(f64, f64)> = usable
        .iter()
        .map(|p| (p.epsilon, p.max_e_dev_scaled))
        .collect();
    let h1_pts: Vec<(f64, f64)> = usable
        .iter()
        .map(|p| (p.epsilon, p.max_h1_dev_scaled))
        .collect();
    push_fit(&mut fits, &mut notes, "energy_dev_scaled", Some(1.0), e_pts);
    push_fit(&mut fits, &mut notes, "h1_dev_scaled", Some(1.0), h1_pts);

    Ok(DriftReport {
        kind: "drift",
        code_version: code_version(),
        config: cfg.clone(),
        points,
        series,
        fits,
        notes,
    })
}

fn run_point(
    cfg: &ExperimentConfig,
    scheme: &SplittingScheme,
    h: f64,
    eps: f64,
) -> Result<(DriftPoint, SeriesBlock), HarnessError> {
    let u0 = make_initial(cfg.k_cut, eps, &cfg.profile)?;
    let wanted = steps_for(cfg.horizon(eps), h);
    let capped = wanted > cfg.max_steps;
    let n_steps = wanted.min(cfg.max_steps);

    let prec = cfg.precision;
    let e0 = u0.energy_with(prec);
    let m0 = u0.mass_with(prec);
    let h1_0 = u0.h1_norm_sq_with(prec);
    let inv_eps2 = eps.powi(-2);

    let stride = (n_steps / 512).max(1);
    let mut rows = vec![SeriesRow {
        t: 0.0,
        mass: m0,
        h1_sq: h1_0,
        energy: e0,
        e_dev_scaled: 0.0,
        h1_dev_scaled: 0.0,
    }];

    let mut u = u0;
    let mut max_e = 0.0f64;
    let mut max_h1 = 0.0f64;
    let mut max_mass = 0.0f64;
    let mut aborted_at = None;
    let mut last = 0u64;
    for n in 1..=n_steps {
        u = match step(&u, scheme, h) {
            Ok(v) => v,
            Err(SpectralError::NonFinite) => {
                aborted_at = Some(n);
                break;
            }
            Err(e) => return Err(e.into()),
        };
        last = n;
        let mass = u.mass_with(prec);
        let h1 = u.h1_norm_sq_with(prec);
        let energy = u.energy_with(prec);
        let e_dev = inv_eps2 * (energy - e0).abs();
        let h1_dev = inv_eps2 * (h1 - h1_0).abs();
        max_e = max_e.max(e_dev);
        max_h1 = max_h1.max(h1_dev);
        max_mass = max_mass.max((mass - m0).abs() / m0);
        if n % stride == 0 || n == n_steps {
            rows.push(SeriesRow {
                t: n as f64 * h,
                mass,
                h1_sq: h1,
                energy,
                e_dev_scaled: e_dev,
                h1_dev_scaled: h1_dev,
            });
        }
    }

    let point = DriftPoint {
        epsilon: eps,
        h,
        steps: if aborted_at.is_some() { last } else { n_steps },
        horizon: if aborted_at.is_some() {
            last as f64 * h
        } else {
            n_steps as f64 * h
        },
        capped,
        aborted_at,
        max_e_dev_scaled: max_e,
        max_h1_dev_scaled: max_h1,
        max_mass_rel_dev: max_mass,
    };
    let block = SeriesBlock {
        label: format!("eps={eps}"),
        rows,
    };
    Ok((point, block))
}
