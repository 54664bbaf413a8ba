//! Plane-set registration: correspondence matching, Gauss-Newton rotation on
//! SO(3), linear least-squares translation and residual-based exclusion of
//! faulty correspondences.
//!
//! Convention: the result `(R, t)` maps source coordinates into target
//! coordinates, so a source plane `(n_s, d_s)` appears in the target frame
//! with normal `R n_s` and distance `d_s + (R n_s)ᵀ t`.

use itertools::Itertools;
use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Plane, PlaneSet, Pose, Vec3};
use crate::so3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationParams {
    /// Weight of the normal difference in the matching cost.
    pub alpha: f64,
    /// Weight of the center distance in the matching cost.
    pub beta: f64,
    /// Matches costlier than this are dropped.
    pub max_correspondence_cost: f64,
    /// Translation residual norm above which a correspondence is excluded (m).
    pub fault_thresh: f64,
    /// Initial Gauss-Newton step scale.
    pub step_scale: f64,
    pub max_step_halvings: usize,
    /// Damping added to the Gauss-Newton normal matrix.
    pub damping: f64,
    /// Convergence threshold on the rotation update norm (rad).
    pub convergence_tol: f64,
    pub max_iterations: usize,
    /// Re-match once with the source moved by the first estimate, and
    /// re-solve if the pairing changed.
    pub rematch: bool,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        RegistrationParams {
            alpha: 1.0,
            beta: 0.1,
            max_correspondence_cost: 2.0,
            fault_thresh: 0.1,
            step_scale: 1.0,
            max_step_halvings: 10,
            damping: 1e-8,
            convergence_tol: 1e-8,
            max_iterations: 50,
            rematch: true,
        }
    }
}

impl RegistrationParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("registration.{m}")));
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return bad("alpha and beta must be non-negative");
        }
        if !(self.max_correspondence_cost > 0.0 && self.fault_thresh > 0.0) {
            return bad("max_correspondence_cost and fault_thresh must be positive");
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 1.0) {
            return bad("step_scale must be in (0, 1]");
        }
        if !(self.damping >= 0.0 && self.convergence_tol > 0.0) || self.max_iterations == 0 {
            return bad("damping, convergence_tol and max_iterations out of range");
        }
        Ok(())
    }
}

/// One-to-one source/target pairing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Correspondences {
    pub pairs: Vec<(usize, usize)>,
    pub costs: Vec<f64>,
}

impl Correspondences {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs `(i, i)` for two index-aligned sets.
    pub fn identity(n: usize) -> Self {
        Correspondences { pairs: (0..n).map(|i| (i, i)).collect(), costs: vec![0.0; n] }
    }
}

pub fn correspondence_cost(ps: &Plane, pt: &Plane, alpha: f64, beta: f64) -> f64 {
    alpha * (ps.normal() - pt.normal()).norm() + beta * (ps.center() - pt.center()).norm()
}

/// Row-minimum matching over the full cost matrix. A target claimed by
/// several sources goes to the cheapest claimant (lowest source index on
/// ties); the others stay unmatched. Pairs above `max_cost` are dropped.
pub fn match_planes(source: &PlaneSet, target: &PlaneSet, alpha: f64, beta: f64, max_cost: f64) -> Result<Correspondences> {
    let (ns, nt) = (source.len(), target.len());
    if ns == 0 || nt == 0 {
        return Err(Error::NoCorrespondence);
    }
    let mut claim: Vec<Option<(usize, f64)>> = vec![None; nt];
    for (i, ps) in source.iter().enumerate() {
        let mut best = (0, f64::INFINITY);
        for (j, pt) in target.iter().enumerate() {
            let c = correspondence_cost(ps, pt, alpha, beta);
            if c < best.1 {
                best = (j, c);
            }
        }
        let (j, c) = best;
        if c > max_cost {
            continue;
        }
        if claim[j].is_none_or(|(_, prev)| c < prev) {
            claim[j] = Some((i, c));
        }
    }
    let mut pairs: Vec<(usize, usize, f64)> =
        claim.iter().enumerate().filter_map(|(j, c)| c.map(|(i, cost)| (i, j, cost))).collect();
    if pairs.is_empty() {
        return Err(Error::NoCorrespondence);
    }
    pairs.sort_by_key(|p| p.0);
    Ok(Correspondences { pairs: pairs.iter().map(|p| (p.0, p.1)).collect(), costs: pairs.iter().map(|p| p.2).collect() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationEstimate {
    pub rotation: Mat3,
    pub iterations: usize,
    pub converged: bool,
    /// Cost `Σ |R n_s - n_t|²` at the start and after every accepted step.
    pub cost_history: Vec<f64>,
}

/// `Σ |R n_s - n_t|²`.
pub fn rotation_cost(r: &Mat3, source: &[Vec3], target: &[Vec3]) -> f64 {
    source.iter().zip(target).map(|(s, t)| (r * s - t).norm_squared()).sum()
}

/// Stacked residual `R n_s - n_t` and its Jacobian with respect to a left
/// perturbation `R <- exp(ω) R`, block `-(R n_s)^` per pair.
pub fn rotation_residual_jacobian(r: &Mat3, source: &[Vec3], target: &[Vec3]) -> (Vec<Vec3>, Vec<Mat3>) {
    source
        .iter()
        .zip(target)
        .map(|(s, t)| {
            let m = r * s;
            (m - t, -so3::hat(&m))
        })
        .unzip()
}

fn rotation_observable(normals: &[Vec3]) -> bool {
    normals.iter().any(|n| n.cross(&normals[0]).norm() > 1e-6 * n.norm() * normals[0].norm())
}

/// Gauss-Newton estimate of `R` minimizing [`rotation_cost`], starting from
/// `initial` (identity when `None`).
pub fn estimate_rotation(
    source: &[Vec3],
    target: &[Vec3],
    params: &RegistrationParams,
    initial: Option<&Mat3>,
) -> Result<RotationEstimate> {
    if source.len() != target.len() {
        return Err(Error::LengthMismatch { left: source.len(), right: target.len() });
    }
    if source.len() < 2 || !rotation_observable(source) {
        return Err(Error::UnobservableRotation);
    }
    let mut r = initial.copied().unwrap_or_else(Mat3::identity);
    let mut cost = rotation_cost(&r, source, target);
    let mut history = vec![cost];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        iterations += 1;
        let (res, jac) = rotation_residual_jacobian(&r, source, target);
        let mut h = Mat3::identity() * params.damping;
        let mut g = Vec3::zeros();
        for (ri, ji) in res.iter().zip(&jac) {
            h += ji.transpose() * ji;
            g += ji.transpose() * ri;
        }
        let Some(step) = h.cholesky().map(|c| c.solve(&g)) else {
            return Err(Error::UnobservableRotation);
        };
        let mut mu = params.step_scale;
        let mut accepted = None;
        for _ in 0..=params.max_step_halvings {
            let dw = -step * mu;
            let mut cand = so3::exp(&dw) * r;
            if so3::orthonormality_error(&cand) > 1e-12 {
                cand = so3::orthonormalize(&cand);
            }
            let c = rotation_cost(&cand, source, target);
            if c <= cost {
                accepted = Some((cand, c, dw.norm()));
                break;
            }
            mu *= 0.5;
        }
        let Some((cand, c, norm)) = accepted else {
            // No descent along the Gauss-Newton direction: at a minimum to
            // working precision.
            converged = true;
            break;
        };
        r = cand;
        cost = c;
        history.push(c);
        if norm < params.convergence_tol {
            converged = true;
            break;
        }
    }
    Ok(RotationEstimate { rotation: r, iterations, converged, cost_history: history })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationEstimate {
    pub translation: Vec3,
    /// `A t - b`, one entry per pair.
    pub residual: Vec<f64>,
}

/// `AᵀA` for rows `R n_s`.
fn normal_matrix(r: &Mat3, normals: impl Iterator<Item = Vec3>) -> Mat3 {
    normals.fold(Mat3::zeros(), |acc, n| {
        let a = r * n;
        acc + a * a.transpose()
    })
}

fn min_eigenvalue(m: &Mat3) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.min()
}

/// Least-squares translation for a fixed rotation: rows `(R n_s)ᵀ`,
/// right-hand side `d_t - d_s`.
pub fn estimate_translation(
    rotation: &Mat3,
    source: &PlaneSet,
    target: &PlaneSet,
    corr: &Correspondences,
) -> Result<TranslationEstimate> {
    let rows: Vec<(Vec3, f64)> = corr
        .pairs
        .iter()
        .map(|&(i, j)| (rotation * source.normals()[i], target.distances()[j] - source.distances()[i]))
        .collect();
    let ata = rows.iter().fold(Mat3::zeros(), |acc, (a, _)| acc + a * a.transpose());
    let atb = rows.iter().fold(Vec3::zeros(), |acc, (a, b)| acc + a * *b);
    let min_eig = min_eigenvalue(&ata);
    if !(min_eig >= 1e-8) {
        return Err(Error::RankDeficient { min_eigenvalue: min_eig });
    }
    let t = ata.cholesky().ok_or(Error::RankDeficient { min_eigenvalue: min_eig })?.solve(&atb);
    let residual = rows.iter().map(|(a, b)| a.dot(&t) - b).collect();
    Ok(TranslationEstimate { translation: t, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// Maps source coordinates into target coordinates.
    pub pose: Pose,
    /// Correspondences used by the final solve.
    pub correspondences: Correspondences,
    /// Pairs removed by fault exclusion, in removal order.
    pub excluded: Vec<(usize, usize)>,
    pub rotation_iters: usize,
    pub rotation_converged: bool,
    pub rotation_cost_history: Vec<f64>,
    pub translation_residual_norm: f64,
}

/// Full registration: matching, then [`register_with_correspondences`].
pub fn register(source: &PlaneSet, target: &PlaneSet, params: &RegistrationParams) -> Result<RegistrationResult> {
    let corr = match_planes(source, target, params.alpha, params.beta, params.max_correspondence_cost)?;
    let first = register_with_correspondences(source, target, &corr, params, None)?;
    if !params.rematch {
        return Ok(first);
    }
    let moved = source.transformed(&first.pose);
    let Ok(again) = match_planes(&moved, target, params.alpha, params.beta, params.max_correspondence_cost) else {
        return Ok(first);
    };
    if again.pairs == corr.pairs {
        return Ok(first);
    }
    match register_with_correspondences(source, target, &again, params, Some(&first.pose.rotation)) {
        Ok(second) if second.correspondences.len() >= first.correspondences.len() => Ok(second),
        _ => Ok(first),
    }
}

/// Upper bound on the subsets tried per exclusion size.
const EXCLUSION_BUDGET: usize = 4096;

/// Smallest set of rows whose removal leaves a redundant (at least four
/// rows), well-conditioned translation fit under `thresh`; ties at the same
/// size go to the lowest residual. Returned indices are ascending. `None`
/// when no such set is found within the budget, in which case the greedy
/// step takes over.
fn exclusion_search(rows: &[Vec3], residual: &[f64], t: &Vec3, thresh: f64) -> Option<Vec<usize>> {
    let n = rows.len();
    // Right-hand side recovered from the current fit.
    let b: Vec<f64> = rows.iter().zip(residual).map(|(a, r)| a.dot(t) - r).collect();
    let mut size = 1;
    while n >= size + 4 && binomial(n, size) <= EXCLUSION_BUDGET {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for drop in (0..n).combinations(size) {
            let keep = || (0..n).filter(|i| !drop.contains(i));
            let ata = keep().fold(Mat3::zeros(), |acc, i| acc + rows[i] * rows[i].transpose());
            if min_eigenvalue(&ata) < 1e-8 || !rotation_observable(&keep().map(|i| rows[i]).collect::<Vec<_>>()) {
                continue;
            }
            let Some(chol) = ata.cholesky() else { continue };
            let tk = chol.solve(&keep().fold(Vec3::zeros(), |acc, i| acc + rows[i] * b[i]));
            let norm = keep().map(|i| (rows[i].dot(&tk) - b[i]).powi(2)).sum::<f64>().sqrt();
            if norm <= thresh && best.as_ref().is_none_or(|(bn, _)| norm < *bn) {
                best = Some((norm, drop));
            }
        }
        if let Some((_, drop)) = best {
            return Some(drop);
        }
        size += 1;
    }
    None
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Rotation, translation and fault exclusion for a given pairing.
///
/// While the translation residual norm exceeds `fault_thresh`, the smallest
/// set of pairs explaining the excess is removed (or, failing that, the pair
/// with the largest leverage-normalized residual) and both stages are
/// re-solved. Pairs whose removal would leave the rotation or translation unobservable
/// are not candidates; when no candidate remains the registration fails.
pub fn register_with_correspondences(
    source: &PlaneSet,
    target: &PlaneSet,
    corr: &Correspondences,
    params: &RegistrationParams,
    initial_rotation: Option<&Mat3>,
) -> Result<RegistrationResult> {
    let mut active = corr.clone();
    let mut excluded = Vec::new();
    loop {
        let ns: Vec<Vec3> = active.pairs.iter().map(|&(i, _)| source.normals()[i]).collect();
        let nt: Vec<Vec3> = active.pairs.iter().map(|&(_, j)| target.normals()[j]).collect();
        let rot = estimate_rotation(&ns, &nt, params, initial_rotation)?;
        let tr = estimate_translation(&rot.rotation, source, target, &active)?;
        let norm = tr.residual.iter().map(|r| r * r).sum::<f64>().sqrt();
        if norm <= params.fault_thresh {
            return Ok(RegistrationResult {
                pose: Pose::from_parts_unchecked(rot.rotation, tr.translation),
                correspondences: active,
                excluded,
                rotation_iters: rot.iterations,
                rotation_converged: rot.converged,
                rotation_cost_history: rot.cost_history,
                translation_residual_norm: norm,
            });
        }
        let removable = |k: usize| {
            let rest = ns.iter().enumerate().filter(|&(m, _)| m != k).map(|(_, n)| *n);
            let rest_vec: Vec<Vec3> = rest.clone().collect();
            rest_vec.len() >= 3
                && rotation_observable(&rest_vec)
                && min_eigenvalue(&normal_matrix(&rot.rotation, rest)) >= 1e-8
        };
        // Residuals normalized by leverage: a raw residual on a row the fit
        // leans on heavily understates its fault.
        let rows: Vec<Vec3> = ns.iter().map(|n| rot.rotation * n).collect();
        let ata_inv = rows
            .iter()
            .fold(Mat3::zeros(), |acc, a| acc + a * a.transpose())
            .try_inverse()
            .ok_or(Error::RankDeficient { min_eigenvalue: 0.0 })?;
        let score = |k: usize| {
            let h = rows[k].dot(&(ata_inv * rows[k]));
            tr.residual[k].abs() / (1.0 - h).max(1e-12).sqrt()
        };
        let worst = (0..active.len())
            .filter(|&k| removable(k))
            .max_by(|&a, &b| score(a).total_cmp(&score(b)).then(b.cmp(&a)));
        if let Some(set) = exclusion_search(&rows, &tr.residual, &tr.translation, params.fault_thresh) {
            for k in set.into_iter().rev() {
                excluded.push(active.pairs.remove(k));
                active.costs.remove(k);
            }
            continue;
        }
        let Some(k) = worst else {
            return Err(Error::RegistrationFailed(format!(
                "translation residual {norm:.3} m exceeds {:.3} m with {} pairs left",
                params.fault_thresh,
                active.len()
            )));
        };
        excluded.push(active.pairs.remove(k));
        active.costs.remove(k);
    }
}
