//! The exponent system tying disorder regularity to localization scales:
//! a deterministic solver for the constraint chain, a full audit of every
//! inequality with margins, and the floor thresholds derived from a scale.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Strict inequalities are accepted only with a relative margin above this;
/// near-boundary sets are rejected because downstream predicates depend on
/// strictness.
pub const STRICT_TOL: f64 = 1e-12;

/// A complete, mutually consistent set of exponents.
///
/// `d` is the lattice dimension, `alpha`/`k_holder` the disorder
/// concentration exponent and constant, `theta` the decay target, and `xi`
/// the density exponent. The remaining fields are derived by
/// [`solve_parameters`]; `zeta_tilde = (zeta+beta)/2` and
/// `tau_tilde = (1+tau)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub d: u32,
    pub alpha: f64,
    #[serde(default = "default_holder")]
    pub k_holder: f64,
    pub theta: f64,
    pub xi: f64,
    pub q: f64,
    pub p: f64,
    pub gamma1: f64,
    pub zeta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub s: f64,
    pub zeta_tilde: f64,
    pub tau_tilde: f64,
}

fn default_holder() -> f64 {
    1.0
}

impl ParameterSet {
    /// A set carrying only the exponents the box classifiers read (`q`,
    /// `beta`, `tau`), with every other field zeroed. Not feasibility
    /// validated; use [`solve_parameters`] for a consistent full set.
    pub fn for_predicates(d: u32, q: f64, beta: f64, tau: f64) -> Self {
        ParameterSet {
            d,
            alpha: 1.0,
            k_holder: 1.0,
            theta: 0.0,
            xi: 0.0,
            q,
            p: 0.0,
            gamma1: 0.0,
            zeta: 0.0,
            beta,
            gamma: 0.0,
            tau,
            s: 0.0,
            zeta_tilde: 0.0,
            tau_tilde: (1.0 + tau) / 2.0,
        }
    }
}

/// One audited inequality: `name` states it in the order `lhs (<|>|≤) rhs`,
/// `margin` is the slack in the passing direction.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// Strict rows require a positive relative margin; the one non-strict
    /// row (`α ≤ 1`) passes at equality.
    pub strict: bool,
    pub pass: bool,
}

fn strict_margin_ok(margin: f64, a: f64, b: f64) -> bool {
    margin > STRICT_TOL * a.abs().max(b.abs()).max(1.0)
}

/// `lhs < rhs`, strict with relative margin.
fn lt(name: &str, lhs: f64, rhs: f64) -> InequalityCheck {
    let margin = rhs - lhs;
    let pass = strict_margin_ok(margin, lhs, rhs);
    InequalityCheck { name: name.into(), lhs, rhs, margin, strict: true, pass }
}

/// `lhs > rhs`, strict with relative margin.
fn gt(name: &str, lhs: f64, rhs: f64) -> InequalityCheck {
    let margin = lhs - rhs;
    let pass = strict_margin_ok(margin, lhs, rhs);
    InequalityCheck { name: name.into(), lhs, rhs, margin, strict: true, pass }
}

/// `lhs ≤ rhs`, exact.
fn le(name: &str, lhs: f64, rhs: f64) -> InequalityCheck {
    let margin = rhs - lhs;
    InequalityCheck { name: name.into(), lhs, rhs, margin, strict: false, pass: lhs <= rhs }
}

fn mid(lo: f64, hi: f64) -> f64 {
    (lo + hi) / 2.0
}

/// Audit every inequality the parameter system must satisfy, in a fixed
/// canonical order, reporting the margin of each.
///
/// The list always has the same length; `pass` on each row tells which
/// constraints a hand-edited set violates.
pub fn validate(ps: &ParameterSet) -> Vec<InequalityCheck> {
    let d = f64::from(ps.d);
    let a = ps.alpha;
    let (q, p, g1) = (ps.q, ps.p, ps.gamma1);
    let (zeta, beta, gamma, tau, s) = (ps.zeta, ps.beta, ps.gamma, ps.tau, ps.s);
    vec![
        lt("1/2 < α", 0.5, a),
        le("α ≤ 1", a, 1.0),
        lt("0 < ξ", 0.0, ps.xi),
        lt("ξ < 1", ps.xi, 1.0),
        gt("θ > (6/(2α−1) + 9/2)d", ps.theta, (6.0 / (2.0 * a - 1.0) + 4.5) * d),
        lt("3d/(2α−1) < q", 3.0 * d / (2.0 * a - 1.0), q),
        lt("q < (θ − 9d/2)/2", q, (ps.theta - 4.5 * d) / 2.0),
        lt("0 < p", 0.0, p),
        lt("p < (2α−1)q − 3d", p, (2.0 * a - 1.0) * q - 3.0 * d),
        lt("1 < γ₁", 1.0, g1),
        lt("γ₁ < 1 + p/(p+2d)", g1, 1.0 + p / (p + 2.0 * d)),
        lt("γ₁ < (2θ − 4d)/(5d + 4q)", g1, (2.0 * ps.theta - 4.0 * d) / (5.0 * d + 4.0 * q)),
        gt("θ > 2d + γ₁(5d/2 + 2q)", ps.theta, 2.0 * d + g1 * (2.5 * d + 2.0 * q)),
        gt("2d + γ₁(5d/2 + 2q) > 9d/2 + 2q", 2.0 * d + g1 * (2.5 * d + 2.0 * q), 4.5 * d + 2.0 * q),
        lt("γ < √(ζ/ξ)", gamma, (zeta / ps.xi).sqrt()),
        lt("1 < γ", 1.0, gamma),
        lt("ξ < ζ", ps.xi, zeta),
        lt("ζ < β", zeta, beta),
        lt("β < 1/γ", beta, 1.0 / gamma),
        lt("1/γ < 1", 1.0 / gamma, 1.0),
        lt("(1+γ₁)/(2γ₁) < τ", (1.0 + g1) / (2.0 * g1), tau),
        lt("(1+γβ)/2 < τ", (1.0 + gamma * beta) / 2.0, tau),
        lt("((γ−1)β + 1)/γ < τ", ((gamma - 1.0) * beta + 1.0) / gamma, tau),
        lt("τ < 1", tau, 1.0),
        lt("1 − τ + 1/γ₁ < τ", 1.0 - tau + 1.0 / g1, tau),
        lt("ξ < ξγ²", ps.xi, ps.xi * gamma * gamma),
        lt("ξγ² < ζ", ps.xi * gamma * gamma, zeta),
        lt("β < τ/γ", beta, tau / gamma),
        lt("τ/γ < 1/γ", tau / gamma, 1.0 / gamma),
        lt("1/γ < τ", 1.0 / gamma, tau),
        lt("1 < (1−β)/(τ−β)", 1.0, (1.0 - beta) / (tau - beta)),
        lt("(1−β)/(τ−β) < γ", (1.0 - beta) / (tau - beta), gamma),
        lt("γ < τ/β", gamma, tau / beta),
        lt("γβ < s", gamma * beta, s),
        lt("1 − 2γ(τ − (1+γβ)/2) < s", 1.0 - 2.0 * gamma * (tau - (1.0 + gamma * beta) / 2.0), s),
        lt("s < 1", s, 1.0),
        lt("β < γβ", beta, gamma * beta),
        lt("1 − τ + (1−s)/γ < τ − γβ", 1.0 - tau + (1.0 - s) / gamma, tau - gamma * beta),
        lt("ζ < ζ̃", zeta, ps.zeta_tilde),
        lt("ζ̃ < β", ps.zeta_tilde, beta),
        lt("τ < τ̃", tau, ps.tau_tilde),
        lt("τ̃ < 1", ps.tau_tilde, 1.0),
    ]
}

/// True when every audited inequality holds with margin.
pub fn is_feasible(ps: &ParameterSet) -> bool {
    validate(ps).iter().all(|c| c.pass)
}

/// CSV audit table for [`validate`].
pub fn validate_csv(ps: &ParameterSet) -> String {
    use std::fmt::Write;
    let mut out = String::from("inequality,lhs,rhs,margin,strict,pass\n");
    for c in validate(ps) {
        writeln!(out, "\"{}\",{},{},{},{},{}", c.name, c.lhs, c.rhs, c.margin, c.strict, c.pass)
            .unwrap();
    }
    out
}

/// Solve the exponent system at the canonical deterministic point.
///
/// Intervals only asserted nonempty by the theory are pinned as follows:
/// `q`, `p`, `gamma1` at the midpoints of their admissible intervals,
/// `gamma = (1 + xi^{-1/3})/2`, `zeta` and `beta` at the trisection points
/// of `(gamma^2 xi, 1/gamma)`, then `tau` and `s` at the midpoints of their
/// residual intervals. The result always passes [`validate`]; an infeasible
/// input is rejected with the first violated inequality by name.
pub fn solve_parameters(theta: f64, xi: f64, alpha: f64, d: u32) -> Result<ParameterSet> {
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    if !theta.is_finite() || !xi.is_finite() || !alpha.is_finite() {
        return Err(Error::InvalidConfig("theta, xi, alpha must be finite".into()));
    }
    let dd = f64::from(d);
    for gate in [
        lt("1/2 < α", 0.5, alpha),
        le("α ≤ 1", alpha, 1.0),
        lt("0 < ξ", 0.0, xi),
        lt("ξ < 1", xi, 1.0),
        gt("θ > (6/(2α−1) + 9/2)d", theta, (6.0 / (2.0 * alpha - 1.0) + 4.5) * dd),
    ] {
        if !gate.pass {
            return Err(Error::Infeasible { inequality: gate.name, lhs: gate.lhs, rhs: gate.rhs });
        }
    }

    let q = mid(3.0 * dd / (2.0 * alpha - 1.0), (theta - 4.5 * dd) / 2.0);
    let p = mid(0.0, (2.0 * alpha - 1.0) * q - 3.0 * dd);
    let gamma1 = mid(
        1.0,
        (1.0 + p / (p + 2.0 * dd)).min((2.0 * theta - 4.0 * dd) / (5.0 * dd + 4.0 * q)),
    );
    let gamma = (1.0 + xi.powf(-1.0 / 3.0)) / 2.0;
    let lo = gamma * gamma * xi;
    let hi = 1.0 / gamma;
    let zeta = lo + (hi - lo) / 3.0;
    let beta = lo + 2.0 * (hi - lo) / 3.0;
    let tau_floor = ((1.0 + gamma1) / (2.0 * gamma1))
        .max((1.0 + gamma * beta) / 2.0)
        .max(((gamma - 1.0) * beta + 1.0) / gamma);
    let tau = mid(tau_floor, 1.0);
    let s_floor = (gamma * beta).max(1.0 - 2.0 * gamma * (tau - (1.0 + gamma * beta) / 2.0));
    let s = mid(s_floor, 1.0);
    let ps = ParameterSet {
        d,
        alpha,
        k_holder: 1.0,
        theta,
        xi,
        q,
        p,
        gamma1,
        zeta,
        beta,
        gamma,
        tau,
        s,
        zeta_tilde: (zeta + beta) / 2.0,
        tau_tilde: (1.0 + tau) / 2.0,
    };
    if let Some(fail) = validate(&ps).into_iter().find(|c| !c.pass) {
        return Err(Error::Infeasible { inequality: fail.name, lhs: fail.lhs, rhs: fail.rhs });
    }
    Ok(ps)
}

/// `⌊L/20⌋`, the inner-decay radius at scale `L`.
pub fn l_prime(l: f64) -> i64 {
    (l / 20.0).floor() as i64
}

/// `⌊L^e⌋` for a fractional exponent `e`.
pub fn l_pow(l: f64, e: f64) -> i64 {
    l.powf(e).floor() as i64
}

/// The floor thresholds a scale induces under a parameter set.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScaleThresholds {
    pub l_prime: i64,
    pub l_tau: i64,
    pub l_tau_tilde: i64,
    /// Scales below 200 are permitted but flagged: the guarantees the
    /// thresholds feed are asymptotic.
    pub small_scale: bool,
}

pub fn scale_thresholds(l: f64, ps: &ParameterSet) -> ScaleThresholds {
    ScaleThresholds {
        l_prime: l_prime(l),
        l_tau: l_pow(l, ps.tau),
        l_tau_tilde: l_pow(l, ps.tau_tilde),
        small_scale: l < 200.0,
    }
}
