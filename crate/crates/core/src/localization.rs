//! Decay predicates for eigenfunctions, site labeling of eigensystems via
//! optimal assignment, and the four box classifiers combining level spacing
//! with labeled decay.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::assignment::max_assignment;
use crate::lattice::{chebyshev, LatticeBox, Site};
use crate::operator::FiniteOperator;
use crate::parameters::{l_pow, l_prime, ParameterSet};
use crate::spectral::{eigensystem, exp_level_spacing, poly_level_spacing, Eigensystem};
use crate::{Error, Result};

fn assert_unit_vector_at(phi: &DVector<f64>, bx: &LatticeBox, x: &[i64]) {
    assert_eq!(phi.len(), bx.region().len(), "vector length must match the box");
    assert!(bx.region().contains(x), "center site must lie in the box");
    let norm = phi.norm();
    assert!((norm - 1.0).abs() <= 1e-8, "vector must be normalized, got ||phi|| = {norm}");
}

/// First site at distance `>= radius` from `x` whose amplitude exceeds
/// `threshold`, if any.
fn decay_violation(
    phi: &DVector<f64>,
    x: &[i64],
    bx: &LatticeBox,
    radius: i64,
    threshold: impl Fn(i64) -> f64,
) -> Option<Site> {
    for (i, y) in bx.region().sites().iter().enumerate() {
        let dist = chebyshev(y, x);
        if dist >= radius && phi[i].abs() > threshold(dist) {
            return Some(y.clone());
        }
    }
    None
}

/// `|phi(y)| <= L^{-theta_tilde}` for every `y` with `||y - x|| >= ⌊L/20⌋`.
pub fn is_poly_localized(phi: &DVector<f64>, x: &[i64], theta_tilde: f64, bx: &LatticeBox) -> bool {
    assert_unit_vector_at(phi, bx, x);
    let bound = bx.side().powf(-theta_tilde);
    decay_violation(phi, x, bx, l_prime(bx.side()), |_| bound).is_none()
}

/// `|phi(y)| <= exp(-L^{s_tilde})` for every `y` with `||y - x|| >= ⌊L/20⌋`.
pub fn is_subexp_localized(phi: &DVector<f64>, x: &[i64], s_tilde: f64, bx: &LatticeBox) -> bool {
    assert_unit_vector_at(phi, bx, x);
    let bound = (-bx.side().powf(s_tilde)).exp();
    decay_violation(phi, x, bx, l_prime(bx.side()), |_| bound).is_none()
}

/// `|phi(y)| <= exp(-m ||y - x||)` for every `y` with `||y - x|| >= ⌊L^tau⌋`.
pub fn is_exp_localized(phi: &DVector<f64>, x: &[i64], m: f64, bx: &LatticeBox, tau: f64) -> bool {
    assert!(m > 0.0, "decay rate must be positive");
    assert!(tau > 0.0 && tau < 1.0, "tau must lie in (0,1)");
    assert_unit_vector_at(phi, bx, x);
    decay_violation(phi, x, bx, l_pow(bx.side(), tau), |d| (-m * d as f64).exp()).is_none()
}

/// Decay summary for one labeled site, exported in the CSV audit.
#[derive(Clone, Debug, Serialize)]
pub struct DecayCertificate {
    pub site: Site,
    pub eigen_index: usize,
    pub lambda: f64,
    /// `|phi_x(x)|`.
    pub peak: f64,
    /// `max |phi_x(y)|` over `||y - x|| >= ⌊L/20⌋` (`None` if no such site).
    pub far_sup: Option<f64>,
    /// Largest exponent `t` with `far_sup <= L^{-t}` (`None` if `far_sup`
    /// is absent or zero).
    pub poly_exponent: Option<f64>,
    /// Largest `s` with `far_sup <= exp(-L^s)` (`None` as above, or when
    /// `far_sup >= 1`).
    pub subexp_exponent: Option<f64>,
}

/// An eigensystem with every eigenpair assigned to a distinct site.
#[derive(Clone, Debug)]
pub struct LabeledEigensystem {
    pub es: Eigensystem,
    /// `eigen_of_site[i]` is the eigenpair index labeled by site `i` in
    /// region order; always a permutation.
    pub eigen_of_site: Vec<usize>,
    /// True when the log-amplitude matching was infeasible (an exact zero
    /// amplitude on every optimal edge set) and plain amplitudes were used.
    pub degenerate: bool,
    pub certificates: Vec<DecayCertificate>,
}

impl LabeledEigensystem {
    /// `(site index, eigen index)` pairs, for injection audits.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.eigen_of_site.iter().copied().enumerate().collect()
    }

    pub fn lambda_of_site(&self, site_index: usize) -> f64 {
        self.es.eigenvalues[self.eigen_of_site[site_index]]
    }

    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out =
            String::from("site,eigen_index,lambda,peak,far_sup,poly_exponent,subexp_exponent\n");
        let fmt_opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for c in &self.certificates {
            let coords: Vec<String> = c.site.iter().map(|v| v.to_string()).collect();
            writeln!(
                out,
                "\"{}\",{},{},{},{},{},{}",
                coords.join(" "),
                c.eigen_index,
                c.lambda,
                c.peak,
                fmt_opt(c.far_sup),
                fmt_opt(c.poly_exponent),
                fmt_opt(c.subexp_exponent),
            )
            .unwrap();
        }
        out
    }
}

/// Assign each site the eigenpair that concentrates on it.
///
/// The labeling maximizes the total log-amplitude `sum_x log |phi_x(x)|`
/// over all bijections. Exact zero amplitudes are forbidden edges; if they
/// block every perfect matching, the labeling falls back to plain-amplitude
/// weights and is flagged degenerate.
pub fn label_sites(es: &Eigensystem, bx: &LatticeBox) -> Result<LabeledEigensystem> {
    if es.region() != bx.region() {
        return Err(Error::pre("eigensystem region differs from the box"));
    }
    let n = es.n();
    let log_weights: Vec<Vec<f64>> = (0..n)
        .map(|site| (0..n).map(|eig| es.vectors[(site, eig)].abs().ln()).collect())
        .collect();
    let (eigen_of_site, degenerate) = match max_assignment(&log_weights) {
        Some(a) => (a, false),
        None => {
            let abs_weights: Vec<Vec<f64>> = (0..n)
                .map(|site| (0..n).map(|eig| es.vectors[(site, eig)].abs()).collect())
                .collect();
            let a = max_assignment(&abs_weights)
                .expect("finite weights always admit a perfect matching");
            (a, true)
        }
    };

    let side = bx.side();
    let radius = l_prime(side);
    let certificates = bx
        .region()
        .sites()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let eig = eigen_of_site[i];
            let far_sup = bx
                .region()
                .sites()
                .iter()
                .enumerate()
                .filter(|(_, y)| chebyshev(y, x) >= radius)
                .map(|(j, _)| es.vectors[(j, eig)].abs())
                .max_by(f64::total_cmp);
            let poly_exponent = far_sup.filter(|&s| s > 0.0).map(|s| -s.ln() / side.ln());
            let subexp_exponent =
                far_sup.filter(|&s| s > 0.0 && s < 1.0).map(|s| (-s.ln()).ln() / side.ln());
            DecayCertificate {
                site: x.clone(),
                eigen_index: eig,
                lambda: es.eigenvalues[eig],
                peak: es.vectors[(i, eig)].abs(),
                far_sup,
                poly_exponent,
                subexp_exponent,
            }
        })
        .collect();
    Ok(LabeledEigensystem { es: es.clone(), eigen_of_site, degenerate, certificates })
}

/// The four localizing-box classes: polynomial spacing with polynomial or
/// exponential decay, and exponential spacing with subexponential or
/// exponential decay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxClass {
    PolyLocalizing,
    MixLocalizing,
    SubexpLocalizing,
    ExpLocalizing,
}

impl BoxClass {
    pub fn tag(self) -> &'static str {
        match self {
            BoxClass::PolyLocalizing => "PL",
            BoxClass::MixLocalizing => "ML",
            BoxClass::SubexpLocalizing => "SEL",
            BoxClass::ExpLocalizing => "LOC",
        }
    }
}

/// Outcome of checking the subexponential consequence of a mixed verdict.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SelImplication {
    /// `1 - log(40/m*) / log L`.
    pub s_tilde: f64,
    /// All four threshold conditions hold, so the implication is asserted.
    pub applicable: bool,
    /// The same labeled eigensystem passes the subexponential class at
    /// `s_tilde`.
    pub holds: bool,
}

/// Verdict of a box classification, with enough context to audit it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalizationVerdict {
    pub class: BoxClass,
    pub rate: f64,
    pub side: f64,
    pub l_prime: i64,
    pub l_tau: i64,
    pub spacing_ok: bool,
    pub min_gap: Option<f64>,
    pub spacing_threshold: f64,
    pub eigensystem_ok: bool,
    /// First `(label site, offending site)` pair failing the decay bound.
    pub witness: Option<(Site, Site)>,
    pub degenerate_labeling: bool,
    pub verdict: bool,
    /// Present on true mixed verdicts: the subexponential consequence.
    pub sel_implication: Option<SelImplication>,
}

/// Classify a box against one of the four localizing classes.
///
/// `rate` is the class exponent: decay power for the polynomial class,
/// decay rate for the mixed and exponential classes, the subexponential
/// exponent otherwise. Spacing uses `ps.q` (polynomial classes) or `ps.beta`
/// (exponential classes); exponential decay starts at radius `⌊L^tau⌋` from
/// `ps.tau`. Every failure mode is a false verdict with a witness; only a
/// solver breakdown is an error.
pub fn classify_box(
    bx: &LatticeBox,
    op: &FiniteOperator,
    class: BoxClass,
    ps: &ParameterSet,
    rate: f64,
) -> Result<LocalizationVerdict> {
    if op.region() != bx.region() {
        return Err(Error::pre("operator region differs from the box"));
    }
    let side = bx.side();
    let es = eigensystem(op)?;
    let spacing = match class {
        BoxClass::PolyLocalizing | BoxClass::MixLocalizing => {
            poly_level_spacing(&es.eigenvalues, side, ps.q)
        }
        BoxClass::SubexpLocalizing | BoxClass::ExpLocalizing => {
            exp_level_spacing(&es.eigenvalues, side, ps.beta)
        }
    };
    let labeled = label_sites(&es, bx)?;

    let passes = |eig: usize, x: &[i64], class: BoxClass, rate: f64| -> Option<Site> {
        let phi = labeled.es.vector(eig);
        match class {
            BoxClass::PolyLocalizing => {
                decay_violation(&phi, x, bx, l_prime(side), |_| side.powf(-rate))
            }
            BoxClass::SubexpLocalizing => {
                decay_violation(&phi, x, bx, l_prime(side), |_| (-side.powf(rate)).exp())
            }
            BoxClass::MixLocalizing | BoxClass::ExpLocalizing => {
                decay_violation(&phi, x, bx, l_pow(side, ps.tau), |d| (-rate * d as f64).exp())
            }
        }
    };
    let mut witness = None;
    for (i, x) in bx.region().sites().iter().enumerate() {
        if let Some(y) = passes(labeled.eigen_of_site[i], x, class, rate) {
            witness = Some((x.clone(), y));
            break;
        }
    }
    let eigensystem_ok = witness.is_none();
    let verdict = spacing.ok && eigensystem_ok;

    let sel_implication = if class == BoxClass::MixLocalizing && verdict {
        let m_star = rate;
        let s_tilde = 1.0 - (40.0 / m_star).ln() / side.ln();
        let l_tau = l_pow(side, ps.tau);
        let lp = l_prime(side);
        let applicable = (-side.powf(ps.beta)).exp() <= side.powf(-ps.q)
            && l_tau <= lp
            && s_tilde > 0.0
            && s_tilde < 1.0
            && m_star * lp as f64 >= side.powf(s_tilde);
        let holds = if applicable {
            let sub_spacing = exp_level_spacing(&es.eigenvalues, side, ps.beta);
            sub_spacing.ok
                && bx
                    .region()
                    .sites()
                    .iter()
                    .enumerate()
                    .all(|(i, x)| passes(labeled.eigen_of_site[i], x, BoxClass::SubexpLocalizing, s_tilde).is_none())
        } else {
            false
        };
        Some(SelImplication { s_tilde, applicable, holds })
    } else {
        None
    };

    Ok(LocalizationVerdict {
        class,
        rate,
        side,
        l_prime: l_prime(side),
        l_tau: l_pow(side, ps.tau),
        spacing_ok: spacing.ok,
        min_gap: spacing.min_gap,
        spacing_threshold: spacing.threshold,
        eigensystem_ok,
        witness,
        degenerate_labeling: labeled.degenerate,
        verdict,
        sel_implication,
    })
}
