//! Seeded Monte Carlo experiments over disorder realizations, deterministic
//! audits of the perturbative eigensystem bounds, and record persistence.
//!
//! Every experiment is a pure function of its config: realization `i` draws
//! its disorder from `subseed(seed, i)`, workers share nothing mutable, and
//! results merge by realization index, so records are identical across
//! thread counts. Frequencies come with exact binomial 95% intervals and,
//! where the run matches an explicit probability bound, the bound itself.

use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::lattice::{l1, make_box, t_interior, LatticeBox, Region, Site};
use crate::localization::{classify_box, is_poly_localized, label_sites, BoxClass};
use crate::operator::{build_hamiltonian, restrict, sample_disorder, DisorderField, Distribution};
use crate::parameters::{l_prime, ParameterSet};
use crate::recursion::init_bound;
use crate::rng;
use crate::spectral::{eigensystem, spectral_residual};
use crate::{Error, Result, MAX_DIM, MAX_OPERATOR_SITES};

/// Rounding guard for audits of exact inequalities: a computed quantity may
/// exceed its proven bound by at most this factor times the operator scale
/// before the excess counts as a violation.
const AUDIT_SLACK: f64 = 1e-12;

/// One seeded Monte Carlo run: classify a disordered box `n` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub side: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub distribution: Distribution,
    pub seed: u64,
    pub n_realizations: u64,
    /// Localizing class to test each realization against.
    pub class: BoxClass,
    /// Class exponent: decay power, decay rate, or subexponential exponent.
    pub rate: f64,
    /// Level-spacing exponent for the polynomial-spacing classes.
    #[serde(default = "default_q")]
    pub q: f64,
    /// Level-spacing exponent for the exponential-spacing classes.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Exponential decay is enforced from radius `⌊side^tau⌋` on.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Box center; empty means the origin. Each coordinate must be dyadic.
    #[serde(default)]
    pub center: Vec<f64>,
    /// Full exponent set; when present it supplies `q`, `beta`, `tau`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<ParameterSet>,
    /// Output path for the JSON record; a CSV summary goes alongside.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn default_q() -> f64 {
    3.0
}
fn default_beta() -> f64 {
    0.5
}
fn default_tau() -> f64 {
    0.5
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(Error::InvalidConfig("n_realizations must be at least 1".into()));
        }
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::UnsupportedDimension { dim: self.dim });
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!("hopping must be >= 0, got {}", self.epsilon)));
        }
        self.distribution.validate()?;
        if !self.center.is_empty() && self.center.len() != self.dim {
            return Err(Error::InvalidConfig(format!(
                "center has {} coordinates for dimension {}",
                self.center.len(),
                self.dim
            )));
        }
        let ps = self.parameter_set();
        if let Some(full) = &self.parameters {
            if !crate::parameters::is_feasible(full) {
                return Err(Error::InvalidConfig("referenced parameter set fails validation".into()));
            }
        } else {
            if !(ps.q > 0.0) {
                return Err(Error::InvalidConfig(format!("spacing exponent q must be > 0, got {}", ps.q)));
            }
            if !(ps.beta > 0.0 && ps.beta < 1.0) || !(ps.tau > 0.0 && ps.tau < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "need beta, tau in (0,1), got beta={}, tau={}",
                    ps.beta, ps.tau
                )));
            }
        }
        if matches!(self.class, BoxClass::MixLocalizing | BoxClass::ExpLocalizing) && !(self.rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "exponential decay rate must be > 0, got {}",
                self.rate
            )));
        }
        let bx = self.lattice_box()?;
        let sites = bx.region().len();
        if sites > MAX_OPERATOR_SITES {
            return Err(Error::RegionTooLarge { sites, cap: MAX_OPERATOR_SITES });
        }
        Ok(())
    }

    pub fn lattice_box(&self) -> Result<LatticeBox> {
        let center = if self.center.is_empty() { vec![0.0; self.dim] } else { self.center.clone() };
        make_box(&center, self.side)
    }

    /// Exponents seen by the classifier: the referenced full set, or an
    /// ad-hoc set carrying exactly `q`, `beta`, `tau`.
    pub fn parameter_set(&self) -> ParameterSet {
        self.parameters
            .clone()
            .unwrap_or_else(|| ParameterSet::for_predicates(self.dim as u32, self.q, self.beta, self.tau))
    }
}

/// Verdict of a single realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: u64,
    /// Sub-seed the disorder was drawn from.
    pub seed: u64,
    /// `None`: the eigensolver failed and the trial is excluded.
    pub ok: Option<bool>,
    /// First decay violation `(label site, offending site)`, if any.
    pub witness: Option<(Site, Site)>,
}

/// A completed run: per-realization verdicts plus the aggregate frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub outcomes: Vec<TrialOutcome>,
    pub successes: u64,
    /// Realizations dropped for solver failure.
    pub excluded: u64,
    /// `successes / (n_realizations - excluded)`, an exact binary division.
    pub frequency: f64,
    /// Exact binomial central 95% interval for the success probability.
    pub interval: (f64, f64),
    /// Explicit probability lower bound when the config matches one: the
    /// initial-scale bound for the polynomial class at decay exponent at
    /// most `theta(epsilon, side)`.
    pub bound: Option<f64>,
    /// Wall clock of the run; the only field not reproduced by a re-run.
    pub wall_ms: f64,
}

impl ExperimentRecord {
    /// One row per realization: `index,seed,ok,witness`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("index,seed,ok,witness\n");
        for t in &self.outcomes {
            let ok = t.ok.map_or(String::new(), |b| b.to_string());
            let witness = t.witness.as_ref().map_or(String::new(), |(x, y)| {
                let fmt = |s: &Site| s.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
                format!("\"{} -> {}\"", fmt(x), fmt(y))
            });
            writeln!(out, "{},{},{},{}", t.index, t.seed, ok, witness).unwrap();
        }
        out
    }

    /// Bitwise equality of everything a re-run reproduces (all but wall clock).
    pub fn same_outcome(&self, other: &ExperimentRecord) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.wall_ms = 0.0;
        b.wall_ms = 0.0;
        a == b
    }
}

/// Exact (Clopper-Pearson) central 95% confidence interval for a binomial
/// proportion with `successes` out of `n`.
pub fn binomial_interval(successes: u64, n: u64) -> (f64, f64) {
    assert!(n > 0 && successes <= n, "need 0 <= successes <= n, n > 0");
    let (s, nf) = (successes as f64, n as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(s, nf - s + 1.0).unwrap().inverse_cdf(0.025)
    };
    let hi = if successes == n {
        1.0
    } else {
        Beta::new(s + 1.0, nf - s).unwrap().inverse_cdf(0.975)
    };
    (lo, hi)
}

/// Explicit lower bound matching this run, if any: the polynomial class at
/// a decay exponent the initial-scale bound covers.
fn matching_bound(config: &ExperimentConfig, ps: &ParameterSet) -> Option<f64> {
    if config.class != BoxClass::PolyLocalizing || !(config.epsilon > 0.0) {
        return None;
    }
    let (alpha, k) = config.distribution.holder_pair();
    let ib = init_bound(config.side, config.dim as u32, ps.q, alpha, k, config.epsilon).ok()?;
    (config.rate <= ib.theta).then_some(ib.prob_lower)
}

fn run_with<F>(config: &ExperimentConfig, field_for: F) -> Result<ExperimentRecord>
where
    F: Fn(u64, &Region) -> Result<DisorderField> + Sync,
{
    config.validate()?;
    let start = Instant::now();
    let bx = config.lattice_box()?;
    let ps = config.parameter_set();
    let outcomes: Vec<TrialOutcome> = (0..config.n_realizations)
        .into_par_iter()
        .map(|index| {
            let seed = rng::subseed(config.seed, index);
            let trial = (|| -> Result<(bool, Option<(Site, Site)>)> {
                let field = field_for(seed, bx.region())?;
                let op = build_hamiltonian(&field, config.epsilon)?;
                let v = classify_box(&bx, &op, config.class, &ps, config.rate)?;
                Ok((v.verdict, v.witness))
            })();
            match trial {
                Ok((ok, witness)) => TrialOutcome { index, seed, ok: Some(ok), witness },
                Err(_) => TrialOutcome { index, seed, ok: None, witness: None },
            }
        })
        .collect();
    let successes = outcomes.iter().filter(|t| t.ok == Some(true)).count() as u64;
    let excluded = outcomes.iter().filter(|t| t.ok.is_none()).count() as u64;
    let valid = config.n_realizations - excluded;
    let frequency = if valid > 0 { successes as f64 / valid as f64 } else { 0.0 };
    let interval = if valid > 0 { binomial_interval(successes, valid) } else { (0.0, 1.0) };
    Ok(ExperimentRecord {
        config: config.clone(),
        outcomes,
        successes,
        excluded,
        frequency,
        interval,
        bound: matching_bound(config, &ps),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Run the config's classifier over `n_realizations` i.i.d. disorder draws.
pub fn run_trials(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    run_with(config, |seed, region| sample_disorder(region, config.distribution, seed))
}

/// Same run, but each realization uses an exactly `eta`-separated potential
/// (a seed-dependent assignment of `{0, eta, 2 eta, ...}` to sites) instead
/// of i.i.d. draws.
pub fn run_trials_separated(config: &ExperimentConfig, eta: f64) -> Result<ExperimentRecord> {
    run_with(config, |seed, region| separated_field(region, eta, seed))
}

/// Potential taking the values `{0, eta, ..., (n-1) eta}` in a seeded random
/// site order: pairwise separation is exactly `eta` by construction.
pub fn separated_field(region: &Region, eta: f64, seed: u64) -> Result<DisorderField> {
    if !(eta > 0.0) {
        return Err(Error::pre(format!("separation must be positive, got {eta}")));
    }
    let n = region.len();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let u = rng::unit_uniform(rng::subseed(seed, i as u64));
        let j = ((u * (i as f64 + 1.0)) as usize).min(i);
        order.swap(i, j);
    }
    let mut values = vec![0.0; n];
    for (rank, &site) in order.iter().enumerate() {
        values[site] = rank as f64 * eta;
    }
    DisorderField::from_values(region.clone(), values)
}

/// Empirical check of the initial-scale bound.
#[derive(Clone, Debug, Serialize)]
pub struct InitComparison {
    pub dim: usize,
    pub side: f64,
    pub q: f64,
    /// `side^-q / (4 dim)`.
    pub epsilon: f64,
    /// Decay exponent `theta(epsilon, side)` the classifier is run at.
    pub theta: f64,
    pub prob_lower: f64,
    /// `prob_lower - 3 sqrt(prob_lower (1 - prob_lower) / n)`.
    pub threshold: f64,
    /// Fractional box centers probed (all corners of `{0, 1/2}^dim`).
    pub offsets: Vec<Vec<f64>>,
    pub frequencies: Vec<f64>,
    pub min_frequency: f64,
    pub pass: bool,
}

fn offset_grid(dim: usize) -> Vec<Vec<f64>> {
    let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..dim {
        grid = grid
            .into_iter()
            .flat_map(|p| {
                [0.0, 0.5].into_iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    grid
}

fn init_comparison(
    dim: usize,
    side: f64,
    q: f64,
    n: u64,
    seed: u64,
    separated: bool,
) -> Result<InitComparison> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let d = dim as u32;
    let epsilon = side.powf(-q) / (4.0 * f64::from(d));
    let ib = init_bound(side, d, q, 1.0, 1.0, epsilon)?;
    let threshold = ib.prob_lower - 3.0 * (ib.prob_lower * (1.0 - ib.prob_lower) / n as f64).sqrt();
    let offsets = offset_grid(dim);
    let mut frequencies = Vec::with_capacity(offsets.len());
    for (i, off) in offsets.iter().enumerate() {
        let config = ExperimentConfig {
            dim,
            side,
            epsilon,
            distribution: Distribution::Uniform { lo: 0.0, hi: 1.0 },
            seed: rng::subseed(seed, i as u64),
            n_realizations: n,
            class: BoxClass::PolyLocalizing,
            rate: ib.theta,
            q,
            beta: default_beta(),
            tau: default_tau(),
            center: off.clone(),
            parameters: None,
            out: None,
        };
        let record = if separated {
            let eta = 4.0 * f64::from(d) * epsilon + side.powf(-q);
            run_trials_separated(&config, eta)?
        } else {
            run_trials(&config)?
        };
        frequencies.push(record.frequency);
    }
    let min_frequency = frequencies.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(InitComparison {
        dim,
        side,
        q,
        epsilon,
        theta: ib.theta,
        prob_lower: ib.prob_lower,
        threshold,
        offsets,
        frequencies,
        min_frequency,
        pass: min_frequency >= threshold,
    })
}

/// Verify the initial-scale bound empirically: at `epsilon = side^-q/(4 dim)`
/// and decay exponent `theta(epsilon, side)`, the polynomial-class frequency
/// over `n` uniform-disorder realizations must reach the explicit lower
/// bound minus three binomial standard deviations, at every center offset
/// in `{0, 1/2}^dim`.
pub fn verify_init_step(dim: usize, side: f64, q: f64, n: u64, seed: u64) -> Result<InitComparison> {
    init_comparison(dim, side, q, n, seed, false)
}

/// Same comparison with each realization's potential exactly
/// `4 dim epsilon + side^-q`-separated, which makes the verdict
/// deterministic: the frequency is 1 at every offset.
pub fn verify_init_step_separated(
    dim: usize,
    side: f64,
    q: f64,
    n: u64,
    seed: u64,
) -> Result<InitComparison> {
    init_comparison(dim, side, q, n, seed, true)
}

/// Audit of the perturbative eigensystem bounds for a separated potential.
#[derive(Clone, Debug, Serialize)]
pub struct SeparatedDecayAudit {
    pub eta: f64,
    pub epsilon: f64,
    /// Labeled eigenvalues must be pairwise at least `eta - 4 d epsilon`
    /// apart.
    pub gap_floor: f64,
    /// Labeled amplitudes must satisfy
    /// `|phi_x(y)| <= ratio^(l1 distance x to y)` with
    /// `ratio = 2 d epsilon / (eta - 2 d epsilon)`.
    pub decay_ratio: f64,
    /// Ordered pairs `x != y` checked against the gap floor.
    pub gap_checks: usize,
    /// Site pairs (including `x = y`) checked against the decay bound.
    pub decay_checks: usize,
    pub gap_violations: Vec<(Site, Site)>,
    pub decay_violations: Vec<(Site, Site)>,
    pub degenerate_labeling: bool,
    pub pass: bool,
}

/// Check both displayed perturbative bounds on the full labeled eigensystem
/// of a box with `eta`-separated potential and hopping below `eta/(4 dim)`.
///
/// Both are theorems, so any violation signals an eigensolver or labeling
/// defect; comparisons allow only a rounding guard of `1e-12` times the
/// operator scale.
pub fn audit_separated_decay(
    bx: &LatticeBox,
    field: &DisorderField,
    eta: f64,
    epsilon: f64,
) -> Result<SeparatedDecayAudit> {
    if field.region() != bx.region() {
        return Err(Error::pre("potential region differs from the box"));
    }
    let d = f64::from(bx.dim() as u32);
    if !(eta > 0.0) {
        return Err(Error::pre(format!("separation must be positive, got {eta}")));
    }
    if !(epsilon >= 0.0 && epsilon < eta / (4.0 * d)) {
        return Err(Error::pre(format!(
            "hopping must satisfy 0 <= epsilon < eta/(4d) = {}, got {epsilon}",
            eta / (4.0 * d)
        )));
    }
    let sites = field.region().sites();
    let values = field.values();
    let value_scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            if (values[i] - values[j]).abs() + AUDIT_SLACK * value_scale < eta {
                return Err(Error::pre(format!(
                    "potential is not {eta}-separated: sites {:?} and {:?} differ by {}",
                    sites[i],
                    sites[j],
                    (values[i] - values[j]).abs()
                )));
            }
        }
    }

    let op = build_hamiltonian(field, epsilon)?;
    let es = eigensystem(&op)?;
    let labeled = label_sites(&es, bx)?;
    let slack = AUDIT_SLACK * op.row_norm().max(1.0);
    let gap_floor = eta - 4.0 * d * epsilon;
    let decay_ratio = 2.0 * d * epsilon / (eta - 2.0 * d * epsilon);

    let n = sites.len();
    let mut gap_checks = 0;
    let mut decay_checks = 0;
    let mut gap_violations = Vec::new();
    let mut decay_violations = Vec::new();
    for x in 0..n {
        let lam_x = labeled.lambda_of_site(x);
        for y in 0..n {
            if y != x {
                gap_checks += 1;
                let gap = (lam_x - labeled.lambda_of_site(y)).abs();
                if gap + slack < gap_floor {
                    gap_violations.push((sites[x].clone(), sites[y].clone()));
                }
            }
            decay_checks += 1;
            let amp = es.amplitude(labeled.eigen_of_site[x], y);
            let bound = decay_ratio.powi(l1(&sites[x], &sites[y]) as i32);
            if amp > bound + slack {
                decay_violations.push((sites[x].clone(), sites[y].clone()));
            }
        }
    }
    let pass = gap_violations.is_empty() && decay_violations.is_empty();
    Ok(SeparatedDecayAudit {
        eta,
        epsilon,
        gap_floor,
        decay_ratio,
        gap_checks,
        decay_checks,
        gap_violations,
        decay_violations,
        degenerate_labeling: labeled.degenerate,
        pass,
    })
}

/// One failed inequality chain in an interior-transfer audit.
#[derive(Clone, Debug, Serialize)]
pub struct TransferFailure {
    pub realization: u64,
    pub site: Site,
    pub lambda: f64,
    pub residual: f64,
    pub distance: f64,
}

/// Audit that interior-localized sub-box eigenvalues transfer to the
/// ambient spectrum within the explicit boundary-coupling bound.
#[derive(Clone, Debug, Serialize)]
pub struct InteriorTransferAudit {
    pub dim: usize,
    pub ell: f64,
    pub theta_side: f64,
    pub epsilon: f64,
    pub theta_tilde: f64,
    pub realizations: u64,
    /// `epsilon sqrt(2^d d) ell^((d-1)/2) ell^(-theta_tilde)`.
    pub bound: f64,
    /// Eigenpairs that qualified (interior label, polynomial decay) and
    /// were checked.
    pub audited: u64,
    pub failures: Vec<TransferFailure>,
    /// Realizations dropped for solver failure.
    pub excluded: u64,
    pub pass: bool,
}

/// For `n` seeded uniform-disorder realizations on the box of side
/// `theta_side`: every eigenpair of the sub-box of side `ell` whose label
/// site lies in the `⌊ell/20⌋`-interior and whose vector is
/// `theta_tilde`-polynomially localized must satisfy
/// `dist(lambda, ambient spectrum) <= ||(H - lambda) phi|| <= bound` for
/// the zero-extended vector, with the explicit boundary bound above.
pub fn audit_interior_transfer(
    dim: usize,
    ell: f64,
    theta_side: f64,
    epsilon: f64,
    theta_tilde: f64,
    n: u64,
    seed: u64,
) -> Result<InteriorTransferAudit> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    if !(epsilon >= 0.0) || !(theta_tilde > 0.0) {
        return Err(Error::pre("need epsilon >= 0 and theta_tilde > 0".to_string()));
    }
    let origin = vec![0.0; dim];
    let inner_bx = make_box(&origin, ell)?;
    let ambient_bx = make_box(&origin, theta_side)?;
    let lp = l_prime(ell);
    if lp < 1 {
        return Err(Error::pre(format!("interior depth ⌊ell/20⌋ must be >= 1, got ell = {ell}")));
    }
    let interior = t_interior(inner_bx.region(), ambient_bx.region(), lp as f64)?;
    if interior.is_empty() {
        return Err(Error::pre("the interior of the sub-box is empty at this depth".to_string()));
    }
    let s_d = 2f64.powi(dim as i32) * dim as f64;
    let bound =
        epsilon * s_d.sqrt() * ell.powf((dim as f64 - 1.0) / 2.0) * ell.powf(-theta_tilde);

    struct PerRun {
        audited: u64,
        failures: Vec<TransferFailure>,
        solver_failed: bool,
    }
    let runs: Vec<PerRun> = (0..n)
        .into_par_iter()
        .map(|index| {
            let sub = rng::subseed(seed, index);
            let attempt = (|| -> Result<(u64, Vec<TransferFailure>)> {
                let field = sample_disorder(
                    ambient_bx.region(),
                    Distribution::Uniform { lo: 0.0, hi: 1.0 },
                    sub,
                )?;
                let ambient_op = build_hamiltonian(&field, epsilon)?;
                let ambient_es = eigensystem(&ambient_op)?;
                let inner_op = restrict(&ambient_op, inner_bx.region())?;
                let inner_es = eigensystem(&inner_op)?;
                let labeled = label_sites(&inner_es, &inner_bx)?;
                let slack = AUDIT_SLACK * ambient_op.matrix().norm().max(1.0);
                let embed: Vec<usize> = inner_bx
                    .region()
                    .sites()
                    .iter()
                    .map(|s| ambient_bx.region().index_of(s).expect("sub-box inside ambient box"))
                    .collect();
                let mut audited = 0;
                let mut failures = Vec::new();
                for (site_idx, site) in inner_bx.region().sites().iter().enumerate() {
                    if !interior.contains(site) {
                        continue;
                    }
                    let eig = labeled.eigen_of_site[site_idx];
                    let phi = inner_es.vector(eig);
                    if !is_poly_localized(&phi, site, theta_tilde, &inner_bx) {
                        continue;
                    }
                    audited += 1;
                    let lambda = inner_es.eigenvalues[eig];
                    let mut ext = DVector::zeros(ambient_bx.region().len());
                    for (b, &a) in embed.iter().enumerate() {
                        ext[a] = phi[b];
                    }
                    let rep = spectral_residual(&ambient_op, &ambient_es, &ext, lambda)?;
                    let ok =
                        rep.distance <= rep.residual + slack && rep.residual <= bound + slack;
                    if !ok {
                        failures.push(TransferFailure {
                            realization: index,
                            site: site.clone(),
                            lambda,
                            residual: rep.residual,
                            distance: rep.distance,
                        });
                    }
                }
                Ok((audited, failures))
            })();
            match attempt {
                Ok((audited, failures)) => PerRun { audited, failures, solver_failed: false },
                Err(_) => PerRun { audited: 0, failures: Vec::new(), solver_failed: true },
            }
        })
        .collect();

    let audited = runs.iter().map(|r| r.audited).sum();
    let excluded = runs.iter().filter(|r| r.solver_failed).count() as u64;
    let failures: Vec<TransferFailure> =
        runs.into_iter().flat_map(|r| r.failures).collect();
    let pass = failures.is_empty() && excluded == 0;
    Ok(InteriorTransferAudit {
        dim,
        ell,
        theta_side,
        epsilon,
        theta_tilde,
        realizations: n,
        bound,
        audited,
        failures,
        excluded,
        pass,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

/// Write the record as pretty JSON at `path` (parents created as needed)
/// and a per-realization CSV summary alongside with extension `csv`.
pub fn save_record(record: &ExperimentRecord, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    let json = serde_json::to_string_pretty(record)?;
    std::fs::write(path, json + "\n").map_err(io_err(path))?;
    let csv_path = path.with_extension("csv");
    std::fs::write(&csv_path, record.to_csv()).map_err(io_err(&csv_path))?;
    Ok(())
}

pub fn load_record(path: &Path) -> Result<ExperimentRecord> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}
