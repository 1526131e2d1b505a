//! Dense eigensystems of finite-volume operators and the spectral audits
//! built on them: level-spacing predicates, eigenvalue-residual bounds, and
//! the nearest-eigenvalue injection between a sub-box and its ambient box.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::lattice::{Region, Site};
use crate::operator::FiniteOperator;
use crate::{Error, Result};

/// Relative tolerance on eigen-residuals `||H phi - lambda phi||`.
pub const TOL_EIG: f64 = 1e-10;
/// Tolerance on orthonormality and completeness defects.
pub const TOL_ORTH: f64 = 1e-10;

/// A full orthonormal eigensystem of a finite-volume operator.
///
/// Eigenvalues are ascending; column `j` of `vectors` is the unit
/// eigenvector for `eigenvalues[j]`, with the sign fixed so that the entry
/// of largest magnitude (lowest site index on ties) is positive.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    region: Region,
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigensystem {
    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Unit eigenvector for the `j`-th eigenvalue.
    pub fn vector(&self, j: usize) -> DVector<f64> {
        self.vectors.column(j).clone_owned()
    }

    /// `|phi_j(site_index)|`.
    pub fn amplitude(&self, j: usize, site_index: usize) -> f64 {
        self.vectors[(site_index, j)].abs()
    }

    /// Smallest gap between consecutive eigenvalues (`None` if fewer than 2).
    pub fn min_gap(&self) -> Option<f64> {
        self.eigenvalues.windows(2).map(|w| w[1] - w[0]).min_by(f64::total_cmp)
    }

    /// CSV export: one row per eigenpair, eigenvalue first, then the vector
    /// entries in region site order.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let cols: Vec<String> = self
            .region
            .sites()
            .iter()
            .map(|s| {
                let coords: Vec<String> = s.iter().map(|c| c.to_string()).collect();
                format!("phi({})", coords.join(" "))
            })
            .collect();
        writeln!(out, "lambda,{}", cols.join(",")).unwrap();
        for j in 0..self.n() {
            let mut row = vec![self.eigenvalues[j].to_string()];
            row.extend((0..self.n()).map(|i| self.vectors[(i, j)].to_string()));
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }
}

/// Compute the verified eigensystem of a symmetric finite-volume operator.
///
/// The decomposition is checked before it is returned: per-column residuals
/// `||H phi - lambda phi||` at most `TOL_EIG * ||H||_F`, pairwise
/// orthonormality and per-site completeness within `TOL_ORTH`. A failed
/// check reports as a solver failure rather than a wrong answer.
pub fn eigensystem(op: &FiniteOperator) -> Result<Eigensystem> {
    let n = op.n();
    if n == 0 {
        return Err(Error::SolverFailure("cannot decompose an operator on zero sites".into()));
    }
    let se = nalgebra::SymmetricEigen::try_new(op.matrix().clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::SolverFailure("symmetric QR iteration did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        eigenvalues.push(se.eigenvalues[src]);
        let mut v = se.eigenvectors.column(src).clone_owned();
        let mut lead = 0usize;
        for i in 1..n {
            if v[i].abs() > v[lead].abs() {
                lead = i;
            }
        }
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    let es = Eigensystem { region: op.region().clone(), eigenvalues, vectors };
    verify(op, &es)?;
    Ok(es)
}

/// Test-only constructor bypassing the solver and its verification, for
/// exercising downstream code on hand-crafted (possibly invalid) systems.
#[cfg(test)]
pub(crate) fn from_parts(
    region: Region,
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
) -> Eigensystem {
    Eigensystem { region, eigenvalues, vectors }
}

fn verify(op: &FiniteOperator, es: &Eigensystem) -> Result<()> {
    let n = es.n();
    let h_frob = op.matrix().norm();
    let hq = op.matrix() * &es.vectors;
    let mut worst_residual = 0.0f64;
    for j in 0..n {
        let mut sq = 0.0;
        for i in 0..n {
            let r = hq[(i, j)] - es.eigenvalues[j] * es.vectors[(i, j)];
            sq += r * r;
        }
        worst_residual = worst_residual.max(sq.sqrt());
    }
    if worst_residual > TOL_EIG * h_frob.max(f64::MIN_POSITIVE) {
        return Err(Error::SolverFailure(format!(
            "eigen-residual {worst_residual:.3e} exceeds {TOL_EIG:.0e} * ||H||_F"
        )));
    }
    let gram = es.vectors.transpose() * &es.vectors;
    let mut worst_orth = 0.0f64;
    let mut worst_complete = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst_orth = worst_orth.max((gram[(i, j)] - target).abs());
        }
        let row_mass: f64 = (0..n).map(|j| es.vectors[(i, j)] * es.vectors[(i, j)]).sum();
        worst_complete = worst_complete.max((row_mass - 1.0).abs());
    }
    if worst_orth > TOL_ORTH {
        return Err(Error::SolverFailure(format!(
            "orthonormality defect {worst_orth:.3e} exceeds {TOL_ORTH:.0e}"
        )));
    }
    if worst_complete > TOL_ORTH {
        return Err(Error::SolverFailure(format!(
            "completeness defect {worst_complete:.3e} exceeds {TOL_ORTH:.0e}"
        )));
    }
    Ok(())
}

/// Outcome of a level-spacing test.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpacingCheck {
    /// All eigenvalues simple and every gap at least the threshold.
    pub ok: bool,
    /// Strictly increasing (no numerically repeated eigenvalue).
    pub simple: bool,
    /// Smallest consecutive gap (`None` for fewer than two values).
    pub min_gap: Option<f64>,
    pub threshold: f64,
}

fn spacing_check(values: &[f64], threshold: f64) -> SpacingCheck {
    debug_assert!(values.windows(2).all(|w| w[0] <= w[1]), "values must be sorted");
    let min_gap = values.windows(2).map(|w| w[1] - w[0]).min_by(f64::total_cmp);
    let simple = min_gap.map_or(true, |g| g > 0.0);
    let ok = simple && min_gap.map_or(true, |g| g >= threshold);
    SpacingCheck { ok, simple, min_gap, threshold }
}

/// Polynomial level spacing at scale `r`: all eigenvalues simple and all
/// consecutive gaps at least `r^-q`. `values` must be sorted ascending.
pub fn poly_level_spacing(values: &[f64], r: f64, q: f64) -> SpacingCheck {
    debug_assert!(r >= 1.0 && q > 0.0);
    spacing_check(values, r.powf(-q))
}

/// Exponential level spacing at scale `r`: gaps at least `exp(-r^beta)`.
pub fn exp_level_spacing(values: &[f64], r: f64, beta: f64) -> SpacingCheck {
    debug_assert!(r >= 1.0 && (0.0..1.0).contains(&beta));
    spacing_check(values, (-r.powf(beta)).exp())
}

/// Residual of a trial eigenpair against an ambient operator.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResidualReport {
    /// `||(H - lambda) phi||_2`.
    pub residual: f64,
    /// `dist(lambda, spectrum(H))`.
    pub distance: f64,
}

/// Evaluate `||(H - lambda) phi||` and the distance from `lambda` to the
/// spectrum. `phi` is indexed by the operator's region and must be
/// normalized; `es` must be the eigensystem of `op`.
pub fn spectral_residual(
    op: &FiniteOperator,
    es: &Eigensystem,
    phi: &DVector<f64>,
    lambda: f64,
) -> Result<ResidualReport> {
    if es.region() != op.region() {
        return Err(Error::pre("eigensystem region differs from operator region"));
    }
    if phi.len() != op.n() {
        return Err(Error::pre(format!(
            "trial vector has {} entries for {} sites",
            phi.len(),
            op.n()
        )));
    }
    let norm = phi.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::pre(format!("trial vector must be normalized, got ||phi|| = {norm}")));
    }
    let residual = (op.matrix() * phi - phi * lambda).norm();
    let distance = es
        .eigenvalues
        .iter()
        .map(|&mu| (mu - lambda).abs())
        .min_by(f64::total_cmp)
        .expect("nonempty spectrum");
    debug_assert!(distance <= residual + 1e-12 * op.matrix().norm().max(1.0));
    Ok(ResidualReport { residual, distance })
}

/// One site's row in a nearest-eigenvalue injection audit.
#[derive(Clone, Debug, Serialize)]
pub struct InjectionRow {
    pub site: Site,
    pub inner_index: usize,
    pub inner_value: f64,
    pub ambient_index: usize,
    pub ambient_value: f64,
    /// `|ambient_value - inner_value|`.
    pub distance: f64,
    /// `||(H_ambient - inner_value) phi||` for the zero-extended vector.
    pub residual: f64,
}

/// Result of mapping interior-labeled sub-box eigenvalues to their nearest
/// ambient eigenvalues.
#[derive(Clone, Debug, Serialize)]
pub struct InjectionReport {
    pub rows: Vec<InjectionRow>,
    /// No two interior sites claimed the same ambient eigenvalue.
    pub injective: bool,
    /// Ambient indices claimed more than once, with the claiming sites.
    pub collisions: Vec<(usize, Vec<Site>)>,
    pub ambient_min_gap: Option<f64>,
    /// Ambient spacing cleared the supplied threshold.
    pub spacing_ok: bool,
    /// Every distance was at most its residual (plus rounding slack).
    pub distances_within_residuals: bool,
}

/// Map each labeled interior eigenpair of a sub-box to the nearest ambient
/// eigenvalue and audit the map.
///
/// `labels` holds `(site index in the inner region, eigen index)` pairs from
/// a site labeling; only sites inside `interior` participate. A failed
/// injectivity check is reported in the result, not as an error.
pub fn nearest_eigenvalue_injection(
    inner_es: &Eigensystem,
    labels: &[(usize, usize)],
    interior: &Region,
    ambient_op: &FiniteOperator,
    ambient_es: &Eigensystem,
    gap_threshold: f64,
) -> Result<InjectionReport> {
    let ambient = ambient_op.region();
    if let Some(site) = inner_es.region().first_stray(ambient) {
        return Err(Error::NotContained { what: "nearest_eigenvalue_injection", site: site.clone() });
    }
    if ambient_es.region() != ambient {
        return Err(Error::pre("ambient eigensystem region differs from ambient operator"));
    }
    let embed: Vec<usize> = inner_es
        .region()
        .sites()
        .iter()
        .map(|s| ambient.index_of(s).expect("checked containment"))
        .collect();

    let scale = ambient_op.matrix().norm().max(1.0);
    let mut rows = Vec::new();
    let mut within = true;
    for &(site_idx, eig_idx) in labels {
        let site = &inner_es.region().sites()[site_idx];
        if !interior.contains(site) {
            continue;
        }
        let lambda = inner_es.eigenvalues[eig_idx];
        let mut phi = DVector::zeros(ambient.len());
        for (b, &amb) in embed.iter().enumerate() {
            phi[amb] = inner_es.vectors[(b, eig_idx)];
        }
        let residual = (ambient_op.matrix() * &phi - &phi * lambda).norm();
        let (ambient_index, ambient_value) = ambient_es
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| (a.1 - lambda).abs().total_cmp(&(b.1 - lambda).abs()))
            .expect("nonempty ambient spectrum");
        let distance = (ambient_value - lambda).abs();
        within &= distance <= residual + 1e-12 * scale;
        rows.push(InjectionRow {
            site: site.clone(),
            inner_index: eig_idx,
            inner_value: lambda,
            ambient_index,
            ambient_value,
            distance,
            residual,
        });
    }

    let mut claimed: std::collections::BTreeMap<usize, Vec<Site>> = std::collections::BTreeMap::new();
    for row in &rows {
        claimed.entry(row.ambient_index).or_default().push(row.site.clone());
    }
    let collisions: Vec<(usize, Vec<Site>)> =
        claimed.into_iter().filter(|(_, sites)| sites.len() > 1).collect();
    let injective = collisions.is_empty();
    let ambient_min_gap = ambient_es.min_gap();
    let spacing_ok = ambient_min_gap.map_or(true, |g| g >= gap_threshold);
    Ok(InjectionReport {
        rows,
        injective,
        collisions,
        ambient_min_gap,
        spacing_ok,
        distances_within_residuals: within,
    })
}
