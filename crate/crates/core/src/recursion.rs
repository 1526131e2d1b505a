//! Probability recursions across scales, iterated as worst-case equalities
//! in log space, plus the explicit level-spacing and initial-scale bounds.
//!
//! Three recursions are traced: the quadratic polynomial-decay recursion,
//! the multiplicative mass-erosion bound, and the degree-`N+1`
//! subexponential recursion. Each trace records per-step values, the
//! threshold test, and (for the quadratic recursion) the doubly-exponential
//! envelope that proves the threshold is eventually met.

use serde::Serialize;

use crate::{Error, Result};

/// Upper limit on trace length; the envelopes decide far earlier.
pub const MAX_STEPS: u32 = 512;

fn logsumexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// One step of a recursion trace.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceRow {
    pub k: u32,
    /// Scale `L_k`.
    pub scale: f64,
    /// Linear value; 0 when the log-space value underflows.
    pub value: f64,
    /// `ln value`; `None` when the value is zero or negative.
    pub log_value: Option<f64>,
    /// Threshold compared against (may underflow to 0; see `log_target`).
    pub target: f64,
    pub log_target: f64,
    /// Probability traces: value at or below target. Mass trace: value at
    /// or above target.
    pub met: bool,
    /// Quadratic recursion only, for `1 <= k < K0`: the envelope
    /// `2(2Y)^{2d} P_k < (2(2Y)^{2d} P_0)^{2^k}` at this step.
    pub envelope_ok: Option<bool>,
}

/// A fully evaluated recursion, ready for audit or export.
#[derive(Clone, Debug, Serialize)]
pub struct RecursionTrace {
    pub kind: &'static str,
    pub rows: Vec<TraceRow>,
    /// First `k` whose threshold test passes.
    pub k0: Option<u32>,
    /// True when no step up to `kmax` met the threshold.
    pub capped: bool,
    /// Mass trace only: the erosion exponent `min{(1-τ)/2, γ₁τ-1, τ-κ}`.
    pub rho: Option<f64>,
    /// Mass trace only: final mass at least half the initial mass.
    pub mass_half_retained: Option<bool>,
}

impl RecursionTrace {
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("k,scale,log_value,log_target,met\n");
        for r in &self.rows {
            let lv = r.log_value.map_or(String::new(), |v| v.to_string());
            writeln!(out, "{},{},{},{},{}", r.k, r.scale, lv, r.log_target, r.met).unwrap();
        }
        out
    }

    /// Two whitespace-separated columns per row: `k` and the natural-log
    /// value for probability traces, `k` and the linear value for the mass
    /// trace. Rows without a representable ordinate are skipped.
    pub fn to_gnuplot(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for r in &self.rows {
            if self.kind == "MSA2-mass" {
                writeln!(out, "{} {}", r.k, r.value).unwrap();
            } else if let Some(lv) = r.log_value {
                writeln!(out, "{} {}", r.k, lv).unwrap();
            }
        }
        out
    }
}

fn check_kmax(kmax: u32) -> Result<()> {
    if kmax > MAX_STEPS {
        return Err(Error::pre(format!("kmax must be at most {MAX_STEPS}, got {kmax}")));
    }
    Ok(())
}

fn log_or_none(log: f64) -> (f64, Option<f64>) {
    if log == f64::NEG_INFINITY {
        (0.0, None)
    } else {
        (log.exp(), Some(log))
    }
}

/// Trace the quadratic recursion `P_{k+1} = (2Y)^{2d} P_k^2 + L_{k+1}^{-p}/2`
/// with `L_{k+1} = Y L_k`, as equalities (worst case).
///
/// The threshold test is `P_k <= L_k^{-p}`; `k0` is its first pass. For
/// `1 <= k < k0` each row also checks the envelope
/// `2(2Y)^{2d} P_k < (2(2Y)^{2d} P_0)^{2^k}`, the inequality that forces
/// `k0` to be finite.
pub fn msa1_trace(y: f64, d: u32, p: f64, p0: f64, l0: f64, kmax: u32) -> Result<RecursionTrace> {
    check_kmax(kmax)?;
    if !(y >= 400.0) {
        return Err(Error::pre(format!("scale ratio must satisfy Y >= 400, got {y}")));
    }
    if d == 0 || !(p > 0.0) || !(l0 > 1.0) {
        return Err(Error::pre("need d >= 1, p > 0, L0 > 1".to_string()));
    }
    let dd = f64::from(d);
    let log_gain = 2.0 * dd * (2.0 * y).ln();
    let p0_cap = 0.5 * (-log_gain).exp();
    if !(0.0..p0_cap).contains(&p0) {
        return Err(Error::pre(format!(
            "starting probability must satisfy 0 <= P0 < (2Y)^(-2d)/2 = {p0_cap:.6e}, got {p0}"
        )));
    }

    let mut rows = Vec::with_capacity(kmax as usize + 1);
    let mut log_p = if p0 > 0.0 { p0.ln() } else { f64::NEG_INFINITY };
    for k in 0..=kmax {
        let scale = y.powi(k as i32) * l0;
        let log_target = -p * scale.ln();
        let met = log_p <= log_target;
        let (value, log_value) = log_or_none(log_p);
        let target = log_target.exp();
        rows.push(TraceRow { k, scale, value, log_value, target, log_target, met, envelope_ok: None });
        let next_scale = y.powi(k as i32 + 1) * l0;
        log_p = logsumexp(log_gain + 2.0 * log_p, 0.5f64.ln() - p * next_scale.ln());
    }
    let k0 = rows.iter().position(|r| r.met).map(|i| i as u32);
    let envelope_base = 2f64.ln() + log_gain + if p0 > 0.0 { p0.ln() } else { f64::NEG_INFINITY };
    let limit = k0.unwrap_or(kmax + 1);
    for r in rows.iter_mut() {
        if r.k >= 1 && r.k < limit {
            if let Some(lv) = r.log_value {
                let lhs = 2f64.ln() + log_gain + lv;
                let rhs = 2f64.powi(r.k as i32) * envelope_base;
                r.envelope_ok = Some(lhs < rhs);
            }
        }
    }
    Ok(RecursionTrace {
        kind: "MSA1",
        rows,
        k0,
        capped: k0.is_none(),
        rho: None,
        mass_half_retained: None,
    })
}

/// Trace the mass lower bound `m_{k+1} = m_k (1 - C γ₁ q L_k^{-ϱ})` along
/// `L_{k+1} = L_k^{γ₁}`, with `ϱ = min{(1-τ)/2, γ₁τ-1, τ-κ}`.
///
/// The threshold is retention of half the initial mass; the trace reports
/// whether the final row clears it.
#[allow(clippy::too_many_arguments)]
pub fn msa2_mass(
    m0: f64,
    gamma1: f64,
    q: f64,
    tau: f64,
    kappa: f64,
    l0: f64,
    kmax: u32,
    c: f64,
) -> Result<RecursionTrace> {
    check_kmax(kmax)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::pre(format!("tau must lie in (0,1), got {tau}")));
    }
    if !(gamma1 * tau > 1.0) {
        return Err(Error::pre(format!("need γ₁τ > 1 for positive erosion exponent, got {}", gamma1 * tau)));
    }
    if !(kappa > 0.0 && kappa < tau) {
        return Err(Error::pre(format!("need 0 < κ < τ, got κ={kappa}, τ={tau}")));
    }
    if !(l0 > 1.0) || !(q > 0.0) || !(c >= 0.0) {
        return Err(Error::pre("need L0 > 1, q > 0, C >= 0".to_string()));
    }
    let floor = l0.powf(-kappa);
    if !(m0 >= floor) {
        return Err(Error::pre(format!(
            "initial mass must satisfy m0 >= L0^(-κ) = {floor:.6e}, got {m0}"
        )));
    }
    let rho = ((1.0 - tau) / 2.0).min(gamma1 * tau - 1.0).min(tau - kappa);
    let target = m0 / 2.0;
    let log_target = target.ln();
    let mut rows = Vec::with_capacity(kmax as usize + 1);
    let mut m = m0;
    let mut scale = l0;
    for k in 0..=kmax {
        let met = m >= target;
        let log_value = if m > 0.0 { Some(m.ln()) } else { None };
        rows.push(TraceRow { k, scale, value: m, log_value, target, log_target, met, envelope_ok: None });
        m *= 1.0 - c * gamma1 * q * scale.powf(-rho);
        scale = scale.powf(gamma1);
    }
    let retained = rows.last().map(|r| r.met);
    Ok(RecursionTrace {
        kind: "MSA2-mass",
        rows,
        k0: None,
        capped: false,
        rho: Some(rho),
        mass_half_retained: retained,
    })
}

/// Trace the degree-`N+1` recursion
/// `P_{k+1} = (2Y)^{(N+1)d} P_k^{N+1} + e^{-L_{k+1}^ζ}/2` with `N = ⌊Y^s⌋`
/// and `L_{k+1} = Y L_k`, entirely in log space.
///
/// The threshold test is `P_k <= e^{-L_k^ζ}`.
pub fn msa3_trace(
    y: f64,
    s: f64,
    d: u32,
    zeta: f64,
    p0: f64,
    l0: f64,
    kmax: u32,
) -> Result<RecursionTrace> {
    check_kmax(kmax)?;
    if !(s > 0.0 && s < 1.0) || !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::pre(format!("need s, ζ in (0,1), got s={s}, ζ={zeta}")));
    }
    let y_floor = 400f64.powf(1.0 / (1.0 - s));
    if !(y >= y_floor) {
        return Err(Error::pre(format!(
            "scale ratio must satisfy Y >= 400^(1/(1-s)) = {y_floor:.6e}, got {y}"
        )));
    }
    if d == 0 || !(l0 > 1.0) {
        return Err(Error::pre("need d >= 1, L0 > 1".to_string()));
    }
    let n = y.powf(s).floor();
    let dd = f64::from(d);
    // P0 < (2 (2Y)^{(N+1)d})^{-1/N}, compared in logs.
    let log_cap = -(2f64.ln() + (n + 1.0) * dd * (2.0 * y).ln()) / n;
    if p0 < 0.0 || (p0 > 0.0 && p0.ln() >= log_cap) {
        return Err(Error::pre(format!(
            "starting probability must satisfy P0 < (2(2Y)^((N+1)d))^(-1/N) = {:.6e} at N = {n}, got {p0}",
            log_cap.exp()
        )));
    }

    let log_gain = (n + 1.0) * dd * (2.0 * y).ln();
    let mut rows = Vec::with_capacity(kmax as usize + 1);
    let mut log_p = if p0 > 0.0 { p0.ln() } else { f64::NEG_INFINITY };
    for k in 0..=kmax {
        let scale = y.powi(k as i32) * l0;
        let log_target = -scale.powf(zeta);
        let met = log_p <= log_target;
        let (value, log_value) = log_or_none(log_p);
        rows.push(TraceRow {
            k,
            scale,
            value,
            log_value,
            target: log_target.exp(),
            log_target,
            met,
            envelope_ok: None,
        });
        let next_scale = y.powi(k as i32 + 1) * l0;
        log_p = logsumexp(log_gain + (n + 1.0) * log_p, 0.5f64.ln() - next_scale.powf(zeta));
    }
    let k0 = rows.iter().position(|r| r.met).map(|i| i as u32);
    Ok(RecursionTrace {
        kind: "MSA3",
        rows,
        k0,
        capped: k0.is_none(),
        rho: None,
        mass_half_retained: None,
    })
}

/// Gap-decay regime of the level-spacing probability bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum SpacingMode {
    Poly { q: f64 },
    Exp { beta: f64 },
}

/// The level-spacing probability bound and its constant.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpacingBound {
    /// `2^{2α-1} K̃² (diam supp μ + 2dε₀ + 1)` with `K̃ = K` at `α = 1`,
    /// `8K` otherwise.
    pub y_eps0: f64,
    /// `1 - Y_{ε₀} · decay(L) · n²`, clamped to `[0,1]`; decay is
    /// `L^{-(2α-1)q}` or `e^{-L^β}`.
    pub bound: f64,
}

/// Probability lower bound for a box spectrum to be level spaced.
#[allow(clippy::too_many_arguments)]
pub fn level_spacing_bound(
    l: f64,
    n_sites: usize,
    alpha: f64,
    k_holder: f64,
    eps0: f64,
    mu_diam: f64,
    d: u32,
    mode: SpacingMode,
) -> Result<SpacingBound> {
    if !(alpha > 0.5 && alpha <= 1.0) {
        return Err(Error::pre(format!("concentration exponent must lie in (1/2,1], got {alpha}")));
    }
    if !(l > 1.0) || !(eps0 >= 0.0) || !(mu_diam >= 0.0) || !(k_holder > 0.0) || d == 0 {
        return Err(Error::pre("need L > 1, ε₀ >= 0, diam >= 0, K > 0, d >= 1".to_string()));
    }
    let k_tilde = if alpha == 1.0 { k_holder } else { 8.0 * k_holder };
    let y_eps0 = 2f64.powf(2.0 * alpha - 1.0)
        * k_tilde
        * k_tilde
        * (mu_diam + 2.0 * f64::from(d) * eps0 + 1.0);
    let decay = match mode {
        SpacingMode::Poly { q } => l.powf(-(2.0 * alpha - 1.0) * q),
        SpacingMode::Exp { beta } => (-l.powf(beta)).exp(),
    };
    let n = n_sites as f64;
    let bound = (1.0 - y_eps0 * decay * n * n).clamp(0.0, 1.0);
    Ok(SpacingBound { y_eps0, bound })
}

/// Decay exponent and probability bound for the initial scale.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InitBound {
    /// `⌊L/20⌋ · ln(1 + L^{-q}/(2dε)) / ln L`.
    pub theta: f64,
    /// `1 - K(L+1)^{2d}(8dε + 2L^{-q})^α / 2`, clamped to `[0,1]`.
    pub prob_lower: f64,
}

/// Exponent and probability with which a single box of side `L` is
/// polynomially localizing at weak hopping `ε`.
pub fn init_bound(l: f64, d: u32, q: f64, alpha: f64, k_holder: f64, epsilon: f64) -> Result<InitBound> {
    if !(alpha > 0.5 && alpha <= 1.0) {
        return Err(Error::pre(format!("concentration exponent must lie in (1/2,1], got {alpha}")));
    }
    let dd = f64::from(d);
    if d == 0 || !(q > 2.0 * dd / alpha) {
        return Err(Error::pre(format!("need q > 2d/α = {}, got q = {q}", 2.0 * dd / alpha)));
    }
    if !(epsilon > 0.0) || !(l > 1.0) || !(k_holder > 0.0) {
        return Err(Error::pre("need ε > 0, L > 1, K > 0".to_string()));
    }
    let theta = (l / 20.0).floor() * (1.0 + l.powf(-q) / (2.0 * dd * epsilon)).ln() / l.ln();
    let prob = 1.0
        - 0.5
            * k_holder
            * (l + 1.0).powf(2.0 * dd)
            * (8.0 * dd * epsilon + 2.0 * l.powf(-q)).powf(alpha);
    Ok(InitBound { theta, prob_lower: prob.clamp(0.0, 1.0) })
}

/// `(5d/2 + q) L^{-(1-τ+1/γ₁)} ln L / 8`: the guaranteed mixed decay rate
/// at scale `L` (formula evaluator only; constants upstream of it are not
/// asserted against simulations).
pub fn mix_rate_floor(l: f64, d: u32, q: f64, tau: f64, gamma1: f64) -> f64 {
    (2.5 * f64::from(d) + q) * l.powf(-(1.0 - tau + 1.0 / gamma1)) * l.ln() / 8.0
}

/// `L^{-(1-τ+(1-s)/γ)} / 8`: the guaranteed exponential decay rate at scale
/// `L` (formula evaluator only).
pub fn exp_rate_floor(l: f64, tau: f64, s: f64, gamma: f64) -> f64 {
    l.powf(-(1.0 - tau + (1.0 - s) / gamma)) / 8.0
}
