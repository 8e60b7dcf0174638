//! Construction of modulation coefficient tables, order by order.
//!
//! The table holds polynomials `z_{j,p}^k(tau)` such that
//!
//! ```text
//!     psi_j(t) ~ sum_k ( sum_{p=1}^N eps^p z_{j,p}^k(eps t) ) exp(-i k t)
//! ```
//!
//! nearly satisfies the split-step recurrence. Matching powers of `eps` in
//! `Phi_step(z) = shift(z)` (with the shift Taylor-expanded in the slow time,
//! exactly, since the coefficients are polynomials) decouples the orders:
//!
//! * off-diagonal entries (`k != j^2`) are fixed algebraically by dividing by
//!   `e^{-ikh} - e^{-ij^2 h}`, which is bounded away from zero whenever the
//!   step size respects the anti-resonance restriction checked by
//!   `StepParams::validate_cfl`;
//! * diagonal entries (`k = j^2`) get their slow-time derivative from the
//!   next order's diagonal equation and their constant from the initial
//!   condition at the anchor time;
//! * at the top order the diagonal is frozen to its initial value.
//!
//! Anchoring at a general `t_init` (not just 0) is what makes interval
//! restarts possible: the same construction runs again with the current
//! numerical state as data.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::exec;
use crate::phase::unit_phase_neg;
use crate::spectral::ModeVector;
use crate::splitting::{SplittingScheme, StepParams};

use super::graded::{op_f, Graded, PolySeq};
use super::poly::TauPoly;
use super::seq::ModeSeq;
use super::MfeError;

/// Divisors below this are treated as resonant and refused.
pub const DIVISOR_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationTable {
    k_cut: usize,
    trunc: usize,
    epsilon: f64,
    t_offset: f64,
    /// `grades[p-1]` holds the tau-polynomials of order `eps^p`.
    grades: Vec<PolySeq>,
}

/// Result of re-anchoring the expansion at an interval boundary.
#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub table: ModulationTable,
    /// H^1 norm of the numerical state handed across the interface.
    pub state_h1: f64,
    /// Whether the smallness hypothesis `||psi||_{H^1} <= 2 eps` held.
    pub within_bound: bool,
}

impl ModulationTable {
    pub fn k_cut(&self) -> usize {
        self.k_cut
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Anchor time: the slow-time origin of the initial condition.
    pub fn t_offset(&self) -> f64 {
        self.t_offset
    }

    /// Order-`p` slice, 1-based.
    pub fn grade(&self, p: usize) -> &PolySeq {
        &self.grades[p - 1]
    }

    pub fn grades(&self) -> &[PolySeq] {
        &self.grades
    }

    /// The summed sequence `z_j^k(tau) = sum_p eps^p z_{j,p}^k(tau)` at an
    /// absolute slow time `tau = eps t`.
    pub fn mode_seq_at(&self, tau: f64) -> ModeSeq {
        let mut out = ModeSeq::new(self.k_cut);
        let mut epow = 1.0;
        for slice in &self.grades {
            epow *= self.epsilon;
            for (&(j, k), poly) in slice.iter() {
                out.add_entry(j, k, poly.eval(tau) * epow);
            }
        }
        out
    }

    /// Evaluates the expansion as a spectral state at an absolute time `t`.
    pub fn reconstruct(&self, t: f64) -> ModeVector {
        let seq = self.mode_seq_at(self.epsilon * t);
        let mut u = ModeVector::zero(self.k_cut).expect("table k_cut is validated");
        for ((j, k), v) in seq.iter() {
            let cur = u.coeff(j);
            u.set_coeff(j, cur + v * unit_phase_neg(k, t));
        }
        u
    }

    /// The almost-invariant `E(tau) = sum_{j,k} (k+1) |z_j^k(tau)|^2`.
    pub fn almost_invariant(&self, tau: f64) -> f64 {
        self.mode_seq_at(tau).e_invariant()
    }

    /// True when every coefficient polynomial beyond order 1 is identically
    /// zero and order 1 is constant, which happens systematically at N = 2:
    /// the almost-invariant is then exactly conserved and scaling fits
    /// against it are meaningless.
    pub fn is_stationary(&self) -> bool {
        self.grades[0].iter().all(|(_, poly)| poly.degree() == 0)
            && self.grades[1..].iter().all(|slice| slice.is_empty())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("table serialization cannot fail")
    }

    pub fn from_json_str(text: &str) -> Result<Self, MfeError> {
        let doc: TableDoc = serde_json::from_str(text).map_err(|e| MfeError::BadTable {
            reason: e.to_string(),
        })?;
        Self::from_doc(doc)
    }

    fn to_doc(&self) -> TableDoc {
        let mut entries = Vec::new();
        for (i, slice) in self.grades.iter().enumerate() {
            for (&(j, k), poly) in slice.iter() {
                entries.push(EntryDoc {
                    j,
                    k,
                    p: i + 1,
                    poly: poly.coeffs().iter().map(|c| [c.re, c.im]).collect(),
                });
            }
        }
        TableDoc {
            k: self.k_cut,
            n: self.trunc,
            epsilon: self.epsilon,
            t_offset: self.t_offset,
            entries,
        }
    }

    fn from_doc(doc: TableDoc) -> Result<Self, MfeError> {
        if doc.k < 1 {
            return Err(MfeError::BadTable {
                reason: "K must be at least 1".into(),
            });
        }
        if doc.n < 2 {
            return Err(MfeError::BadTruncation { n: doc.n });
        }
        if !(doc.epsilon > 0.0 && doc.epsilon.is_finite()) {
            return Err(MfeError::BadEpsilon { value: doc.epsilon });
        }
        let mut grades = vec![PolySeq::new(); doc.n];
        for e in &doc.entries {
            if e.p < 1 || e.p > doc.n {
                return Err(MfeError::BadTable {
                    reason: format!("entry order p = {} outside 1..={}", e.p, doc.n),
                });
            }
            if e.j < -(doc.k as i64) || e.j >= doc.k as i64 {
                return Err(MfeError::BadTable {
                    reason: format!("mode j = {} outside the cutoff set", e.j),
                });
            }
            let coeffs: Vec<Complex64> = e.poly.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
            if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(MfeError::BadTable {
                    reason: format!("non-finite polynomial at (j, k, p) = ({}, {}, {})", e.j, e.k, e.p),
                });
            }
            let poly = TauPoly::from_coeffs(coeffs);
            if !grades[e.p - 1].get(e.j, e.k).is_zero() {
                return Err(MfeError::BadTable {
                    reason: format!("duplicate entry at (j, k, p) = ({}, {}, {})", e.j, e.k, e.p),
                });
            }
            grades[e.p - 1].set_entry(e.j, e.k, poly);
        }
        Ok(Self {
            k_cut: doc.k,
            trunc: doc.n,
            epsilon: doc.epsilon,
            t_offset: doc.t_offset,
            grades,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "N")]
    n: usize,
    epsilon: f64,
    t_offset: f64,
    entries: Vec<EntryDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    j: i64,
    k: i64,
    p: usize,
    poly: Vec<[f64; 2]>,
}

/// Builds the modulation table for data given at time zero.
pub fn build_modulation(
    psi0: &ModeVector,
    epsilon: f64,
    scheme: &SplittingScheme,
    params: &StepParams,
) -> Result<ModulationTable, MfeError> {
    build_modulation_at(psi0, 0.0, epsilon, scheme, params)
}

/// Builds the modulation table for data given at an arbitrary anchor time.
pub fn build_modulation_at(
    psi: &ModeVector,
    t_init: f64,
    epsilon: f64,
    scheme: &SplittingScheme,
    params: &StepParams,
) -> Result<ModulationTable, MfeError> {
    scheme
        .validate()
        .map_err(|e| MfeError::BadState { reason: e.to_string() })?;
    params.validate_cfl()?;
    if psi.k_cut() != params.k_cut {
        return Err(MfeError::CutoffMismatch {
            state: psi.k_cut(),
            table: params.k_cut,
        });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(MfeError::BadEpsilon { value: epsilon });
    }
    if !psi.is_finite() {
        return Err(MfeError::BadState {
            reason: "non-finite coefficients".into(),
        });
    }
    if !t_init.is_finite() {
        return Err(MfeError::BadState {
            reason: format!("non-finite anchor time {t_init}"),
        });
    }

    let k_cut = params.k_cut;
    let n = params.trunc;
    if n < 2 {
        return Err(MfeError::BadTruncation { n });
    }
    let h = params.h;
    let tau0 = epsilon * t_init;
    let ksq = (k_cut * k_cut) as i64;
    let mut grades: Vec<PolySeq> = vec![PolySeq::new(); n];

    for p in 1..=n {
        // F at orders p and (for the diagonal derivative) p + 1; both depend
        // only on table orders <= p - 1, which are already final.
        let q_needed = (p + 1).min(n.max(p));
        let z_sofar = Graded::from_slices(k_cut, &grades, q_needed);
        let f = op_f(&z_sofar, scheme, h, q_needed);

        // Off-diagonal solve. Candidate keys: wherever this order's equation
        // has a source, i.e. F_p or a slow-time derivative of a lower order.
        let mut keys: BTreeSet<(i64, i64)> = BTreeSet::new();
        for (&key, _) in f.slice(p).iter() {
            keys.insert(key);
        }
        for l in 1..p {
            for (&key, poly) in grades[p - l - 1].iter() {
                if poly.degree() >= l {
                    keys.insert(key);
                }
            }
        }
        let keys: Vec<(i64, i64)> = keys
            .into_iter()
            .filter(|&(j, k)| k != j * j)
            .collect();

        let grades_ref = &grades;
        let f_p = f.slice(p);
        let solved: Vec<Result<((i64, i64), TauPoly), MfeError>> =
            exec::map_ordered(keys, |&(j, k)| {
                debug_assert!(k.unsigned_abs() <= (p as u64) * (ksq as u64));
                let shift_phase = unit_phase_neg(k, h);
                let mut num = f_p.get(j, k);
                let mut hfact = 1.0;
                for l in 1..p {
                    hfact *= h / l as f64;
                    let d = grades_ref[p - l - 1].get(j, k).derivative(l);
                    num.add_assign(&d.scale(-shift_phase * hfact));
                }
                let den = shift_phase - unit_phase_neg(j * j, h);
                if den.norm() < DIVISOR_GUARD {
                    return Err(MfeError::NearResonance {
                        j,
                        k,
                        magnitude: den.norm(),
                    });
                }
                Ok(((j, k), num.scale(den.inv())))
            });

        let mut grade_p = PolySeq::new();
        for item in solved {
            let ((j, k), poly) = item?;
            debug_assert!(poly.degree() <= p.saturating_sub(1));
            grade_p.set_entry(j, k, poly);
        }

        // Diagonal entries k = j^2: slow-time derivative from the order-(p+1)
        // diagonal equation (when there is one), constant from the data.
        let f_next = if p < n { Some(f.slice(p + 1)) } else { None };
        for j in -(k_cut as i64)..k_cut as i64 {
            let kd = j * j;
            let polynomial_part = match f_next {
                Some(f_next) => {
                    let unshift = unit_phase_neg(kd, h).conj();
                    let mut rhs = f_next.get(j, kd).scale(unshift);
                    let mut hfact = h;
                    for l in 2..=p {
                        hfact *= h / l as f64;
                        let d = grades[p + 1 - l - 1].get(j, kd).derivative(l);
                        rhs.add_assign(&d.scale(Complex64::new(-hfact, 0.0)));
                    }
                    rhs.scale(Complex64::new(1.0 / h, 0.0)).antiderivative()
                }
                None => TauPoly::zero(),
            };
            // Initial condition at the anchor: the full expansion must
            // reproduce psi_j, so the diagonal picks up whatever the
            // off-diagonal entries at this order leave over.
            let target = if p == 1 {
                psi.coeff(j) / epsilon
            } else {
                Complex64::new(0.0, 0.0)
            };
            let mut offsum = Complex64::new(0.0, 0.0);
            for (&(j2, k2), poly) in grade_p.iter() {
                if j2 == j {
                    offsum += poly.eval(tau0) * unit_phase_neg(k2, t_init);
                }
            }
            let anchor_value = (target - offsum) * unit_phase_neg(kd, t_init).conj();
            let shift = anchor_value - polynomial_part.eval(tau0);
            let diag = polynomial_part.add(&TauPoly::constant(shift));
            debug_assert!(diag.degree() <= p.saturating_sub(1));
            grade_p.set_entry(j, kd, diag);
        }

        grades[p - 1] = grade_p;
    }

    Ok(ModulationTable {
        k_cut,
        trunc: n,
        epsilon,
        t_offset: t_init,
        grades,
    })
}

/// Re-anchors the expansion at an interval boundary: builds a fresh table
/// from the numerical state at `t_interface`, reporting whether the
/// smallness hypothesis needed by the long-time argument actually held.
pub fn restart(
    psi: &ModeVector,
    t_interface: f64,
    epsilon: f64,
    scheme: &SplittingScheme,
    params: &StepParams,
) -> Result<RestartOutcome, MfeError> {
    let state_h1 = psi.h1_norm_sq().sqrt();
    let table = build_modulation_at(psi, t_interface, epsilon, scheme, params)?;
    Ok(RestartOutcome {
        table,
        state_h1,
        within_bound: state_h1 <= 2.0 * epsilon,
    })
}
