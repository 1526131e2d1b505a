//! Disorder fields and finite-volume Hamiltonians `H = -eps * Delta + V`.
//!
//! The potential is an i.i.d. field sampled with the counter-based generator
//! from [`crate::rng`], so the value at a site depends only on `(seed, site)`
//! and fields restrict consistently across regions. The kinetic term couples
//! nearest neighbors with amplitude `-eps`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::lattice::{is_adjacent, Region, Site};
use crate::rng;
use crate::{Error, Result};

/// Single-site disorder law.
///
/// Both laws have a concentration function bounded by `K * t^alpha`:
/// `Uniform` with `alpha = 1`, `K = 1 / (hi - lo)`; `HolderTest` is the
/// power-transformed uniform `U^(1/alpha)` on `[0, 1]`, whose concentration
/// is exactly `t^alpha` (`K = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    HolderTest { alpha: f64 },
}

impl Default for Distribution {
    fn default() -> Self {
        Distribution::Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Uniform { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "uniform law needs lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
            Distribution::HolderTest { alpha } => {
                if !(alpha > 0.5 && alpha <= 1.0) {
                    return Err(Error::pre(format!(
                        "Holder exponent must lie in (1/2, 1], got {alpha}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Support interval of the law.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Uniform { lo, hi } => (lo, hi),
            Distribution::HolderTest { .. } => (0.0, 1.0),
        }
    }

    /// Diameter of the support (enters the level-spacing constant).
    pub fn support_diameter(&self) -> f64 {
        let (lo, hi) = self.support();
        hi - lo
    }

    /// Concentration exponent and constant `(alpha, K)` with
    /// `P(V in [a, a+t]) <= K t^alpha`.
    pub fn holder_pair(&self) -> (f64, f64) {
        match *self {
            Distribution::Uniform { lo, hi } => (1.0, 1.0 / (hi - lo)),
            Distribution::HolderTest { alpha } => (alpha, 1.0),
        }
    }

    fn transform(&self, u: f64) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * u,
            Distribution::HolderTest { alpha } => u.powf(1.0 / alpha),
        }
    }
}

/// A disorder realization: one potential value per site of a region.
#[derive(Clone, Debug)]
pub struct DisorderField {
    region: Region,
    pub seed: u64,
    pub distribution: Distribution,
    values: Vec<f64>,
}

impl DisorderField {
    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, site: &[i64]) -> Option<f64> {
        self.region.index_of(site).map(|i| self.values[i])
    }

    /// Build a field with explicitly supplied values (for audits that need
    /// a hand-crafted potential, e.g. separated spectra).
    pub fn from_values(region: Region, values: Vec<f64>) -> Result<Self> {
        if values.len() != region.len() {
            return Err(Error::InvalidConfig(format!(
                "{} potential values for {} sites",
                values.len(),
                region.len()
            )));
        }
        Ok(DisorderField { region, seed: 0, distribution: Distribution::default(), values })
    }
}

/// Sample the i.i.d. disorder field on a region.
///
/// Values are pure functions of `(seed, site)`: sampling a sub-region yields
/// exactly the restriction of the ambient field.
pub fn sample_disorder(region: &Region, distribution: Distribution, seed: u64) -> Result<DisorderField> {
    distribution.validate()?;
    let values = region
        .sites()
        .iter()
        .map(|site| distribution.transform(rng::site_uniform(seed, site)))
        .collect();
    Ok(DisorderField { region: region.clone(), seed, distribution, values })
}

/// A real symmetric operator on the sites of a region.
///
/// For Hamiltonians the diagonal holds the potential and off-diagonal
/// entries are `-epsilon` on nearest-neighbor pairs; boundary couplings
/// reuse the same container with `+/-1` entries.
#[derive(Clone, Debug)]
pub struct FiniteOperator {
    region: Region,
    pub epsilon: f64,
    matrix: DMatrix<f64>,
}

impl FiniteOperator {
    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.region.len()
    }

    pub fn is_symmetric(&self) -> bool {
        let m = &self.matrix;
        (0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
    }

    /// Max absolute row sum; for Hamiltonians this is at most
    /// `2 d eps + max |V|`.
    pub fn row_norm(&self) -> f64 {
        (0..self.matrix.nrows())
            .map(|i| self.matrix.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Plain-text dense export: site coordinate header, then row-major values.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "dim {}", self.region.dim()).unwrap();
        writeln!(out, "sites {}", self.region.len()).unwrap();
        writeln!(out, "epsilon {}", self.epsilon).unwrap();
        for s in self.region.sites() {
            let coords: Vec<String> = s.iter().map(|c| c.to_string()).collect();
            writeln!(out, "site {}", coords.join(" ")).unwrap();
        }
        for i in 0..self.matrix.nrows() {
            let row: Vec<String> = (0..self.matrix.ncols()).map(|j| self.matrix[(i, j)].to_string()).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        out
    }

    /// Parse the format written by [`FiniteOperator::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidConfig(format!("operator text: {msg}"));
        let mut lines = text.lines();
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            line.strip_prefix(key)
                .map(|rest| rest.trim().to_string())
                .ok_or_else(|| bad(&format!("expected `{key}` line")))
        };
        let dim: usize = header("dim")?.parse().map_err(|_| bad("bad dim"))?;
        let n: usize = header("sites")?.parse().map_err(|_| bad("bad site count"))?;
        let epsilon: f64 = header("epsilon")?.parse().map_err(|_| bad("bad epsilon"))?;
        let mut sites = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| bad("missing site line"))?;
            let rest = line.strip_prefix("site").ok_or_else(|| bad("expected `site` line"))?;
            let coords: std::result::Result<Site, _> =
                rest.split_whitespace().map(str::parse).collect();
            sites.push(coords.map_err(|_| bad("bad site coordinates"))?);
        }
        let region = Region::from_sites(dim, sites)?;
        let mut matrix = DMatrix::zeros(n, n);
        for i in 0..n {
            let line = lines.next().ok_or_else(|| bad("missing matrix row"))?;
            let vals: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse).collect();
            let vals = vals.map_err(|_| bad("bad matrix entry"))?;
            if vals.len() != n {
                return Err(bad("matrix row has wrong length"));
            }
            for (j, v) in vals.into_iter().enumerate() {
                matrix[(i, j)] = v;
            }
        }
        Ok(FiniteOperator { region, epsilon, matrix })
    }
}

/// Assemble the Hamiltonian `-eps * Delta + V` on the field's region.
pub fn build_hamiltonian(field: &DisorderField, epsilon: f64) -> Result<FiniteOperator> {
    if !(epsilon >= 0.0) {
        return Err(Error::pre(format!("hopping strength must be >= 0, got {epsilon}")));
    }
    let region = field.region().clone();
    let n = region.len();
    if n > crate::MAX_OPERATOR_SITES {
        return Err(Error::RegionTooLarge { sites: n, cap: crate::MAX_OPERATOR_SITES });
    }
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        matrix[(i, i)] = field.values()[i];
        for j in (i + 1)..n {
            if is_adjacent(&region.sites()[i], &region.sites()[j]) {
                matrix[(i, j)] = -epsilon;
                matrix[(j, i)] = -epsilon;
            }
        }
    }
    Ok(FiniteOperator { region, epsilon, matrix })
}

/// Principal submatrix of `op` on `sub` (which must be contained in the
/// operator's region).
pub fn restrict(op: &FiniteOperator, sub: &Region) -> Result<FiniteOperator> {
    if let Some(site) = sub.first_stray(op.region()) {
        return Err(Error::NotContained { what: "restrict", site: site.clone() });
    }
    let idx: Vec<usize> =
        sub.sites().iter().map(|s| op.region().index_of(s).expect("checked containment")).collect();
    let n = idx.len();
    let mut matrix = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            matrix[(a, b)] = op.matrix()[(idx[a], idx[b])];
        }
    }
    Ok(FiniteOperator { region: sub.clone(), epsilon: op.epsilon, matrix })
}

/// Boundary coupling of `inner` inside the ambient region: the symmetric
/// matrix over the ambient sites with `-1` at every boundary pair `(u, v)`
/// and zero elsewhere. Scaling by the hopping strength recovers the defect
/// `H_ambient - (H_inner (+) H_rest)` exactly; the passed `epsilon` is
/// recorded on the result for that purpose.
pub fn boundary_coupling(inner: &Region, ambient: &Region, epsilon: f64) -> Result<FiniteOperator> {
    let bd = crate::lattice::boundary_sets(inner, ambient)?;
    let n = ambient.len();
    if n > crate::MAX_OPERATOR_SITES {
        return Err(Error::RegionTooLarge { sites: n, cap: crate::MAX_OPERATOR_SITES });
    }
    let mut matrix = DMatrix::zeros(n, n);
    for (u, v) in &bd.edge {
        let i = ambient.index_of(u).expect("edge endpoints lie in ambient");
        let j = ambient.index_of(v).expect("edge endpoints lie in ambient");
        matrix[(i, j)] = -1.0;
        matrix[(j, i)] = -1.0;
    }
    Ok(FiniteOperator { region: ambient.clone(), epsilon, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_box;

    #[test]
    fn uniform_field_is_deterministic_and_in_range() {
        let b = make_box(&[0.0], 10.0).unwrap();
        let f1 = sample_disorder(b.region(), Distribution::default(), 42).unwrap();
        let f2 = sample_disorder(b.region(), Distribution::default(), 42).unwrap();
        assert_eq!(f1.values(), f2.values());
        assert_eq!(f1.values().len(), 11);
        assert!(f1.values().iter().all(|v| (0.0..1.0).contains(v)));
        let mean = f1.values().iter().sum::<f64>() / 11.0;
        assert!((0.2..=0.8).contains(&mean), "suspicious mean {mean}");
    }

    #[test]
    fn field_restriction_is_consistent() {
        // Counter-based draws: the field on a sub-box is the restriction of
        // the ambient field, even though it is sampled separately.
        let big = make_box(&[0.0, 0.0], 8.0).unwrap();
        let small = make_box(&[1.0, 1.0], 4.0).unwrap();
        let fb = sample_disorder(big.region(), Distribution::default(), 7).unwrap();
        let fs = sample_disorder(small.region(), Distribution::default(), 7).unwrap();
        for s in small.region().sites() {
            assert_eq!(fs.value_at(s), fb.value_at(s));
        }
    }

    #[test]
    fn holder_test_law_is_a_power_of_uniform() {
        let b = make_box(&[0.0], 100.0).unwrap();
        let f = sample_disorder(b.region(), Distribution::HolderTest { alpha: 0.75 }, 3).unwrap();
        assert!(f.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let u = sample_disorder(b.region(), Distribution::default(), 3).unwrap();
        for (v, w) in f.values().iter().zip(u.values()) {
            assert!((v - w.powf(1.0 / 0.75)).abs() < 1e-15);
        }
    }

    #[test]
    fn concentration_exponent_outside_range_is_rejected() {
        let b = make_box(&[0.0], 4.0).unwrap();
        for alpha in [0.5, 0.2, 1.1] {
            assert!(sample_disorder(b.region(), Distribution::HolderTest { alpha }, 0).is_err());
        }
    }

    #[test]
    fn two_site_hamiltonian_matches_hand_matrix() {
        let region = Region::from_sites(1, vec![vec![0], vec![1]]).unwrap();
        let field = DisorderField::from_values(region, vec![0.0, 1.0]).unwrap();
        let h = build_hamiltonian(&field, 0.1).unwrap();
        let m = h.matrix();
        assert_eq!(
            [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]],
            [0.0, -0.1, -0.1, 1.0]
        );
    }

    #[test]
    fn interior_site_in_the_plane_has_four_couplings() {
        let b = make_box(&[0.0, 0.0], 2.0).unwrap();
        let f = sample_disorder(b.region(), Distribution::default(), 1).unwrap();
        let h = build_hamiltonian(&f, 0.25).unwrap();
        let center = b.region().index_of(&[0, 0]).unwrap();
        let row = h.matrix().row(center);
        let couplings = row.iter().enumerate().filter(|&(j, &v)| j != center && v != 0.0).count();
        assert_eq!(couplings, 4);
        assert!(row.iter().enumerate().all(|(j, &v)| j == center || v == 0.0 || v == -0.25));
    }

    #[test]
    fn zero_hopping_gives_a_diagonal_operator() {
        let b = make_box(&[0.0], 6.0).unwrap();
        let f = sample_disorder(b.region(), Distribution::default(), 5).unwrap();
        let h = build_hamiltonian(&f, 0.0).unwrap();
        for i in 0..h.n() {
            for j in 0..h.n() {
                if i != j {
                    assert_eq!(h.matrix()[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_is_symmetric_with_bounded_rows() {
        let b = make_box(&[0.0, 0.0], 6.0).unwrap();
        let f = sample_disorder(b.region(), Distribution::default(), 11).unwrap();
        let h = build_hamiltonian(&f, 0.3).unwrap();
        assert!(h.is_symmetric());
        let vmax = f.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(h.row_norm() <= 2.0 * 2.0 * 0.3 + vmax + 1e-15);
    }

    #[test]
    fn restriction_composes() {
        let b = make_box(&[0.0], 20.0).unwrap();
        let mid = make_box(&[1.0], 10.0).unwrap();
        let small = make_box(&[2.0], 4.0).unwrap();
        let f = sample_disorder(b.region(), Distribution::default(), 9).unwrap();
        let h = build_hamiltonian(&f, 0.5).unwrap();
        let once = restrict(&h, small.region()).unwrap();
        let twice = restrict(&restrict(&h, mid.region()).unwrap(), small.region()).unwrap();
        assert_eq!(once.matrix(), twice.matrix());
    }

    #[test]
    fn restriction_outside_the_region_fails() {
        let b = make_box(&[0.0], 4.0).unwrap();
        let f = sample_disorder(b.region(), Distribution::default(), 0).unwrap();
        let h = build_hamiltonian(&f, 0.1).unwrap();
        let outside = Region::from_sites(1, vec![vec![40]]).unwrap();
        assert!(matches!(restrict(&h, &outside), Err(Error::NotContained { .. })));
    }

    #[test]
    fn boundary_coupling_marks_exactly_the_cut_pairs() {
        let ambient = make_box(&[0.0], 8.0).unwrap();
        let inner = make_box(&[0.0], 4.0).unwrap();
        let g = boundary_coupling(inner.region(), ambient.region(), 0.1).unwrap();
        let nz: Vec<(usize, usize)> = (0..g.n())
            .flat_map(|i| (0..g.n()).map(move |j| (i, j)))
            .filter(|&(i, j)| g.matrix()[(i, j)] != 0.0)
            .collect();
        assert_eq!(nz.len(), 4); // two cut pairs, symmetric
        assert!(nz.iter().all(|&(i, j)| g.matrix()[(i, j)] == -1.0 && g.matrix()[(j, i)] == -1.0));
    }

    #[test]
    fn hamiltonian_decomposes_exactly_across_a_cut() {
        let ambient = make_box(&[0.0, 0.0], 6.0).unwrap();
        let inner = make_box(&[-1.0, 0.0], 3.0).unwrap();
        let eps = 0.37;
        let f = sample_disorder(ambient.region(), Distribution::default(), 21).unwrap();
        let h = build_hamiltonian(&f, eps).unwrap();
        let rest = ambient.region().difference(inner.region());
        let h_in = restrict(&h, inner.region()).unwrap();
        let h_out = restrict(&h, &rest).unwrap();
        let gamma = boundary_coupling(inner.region(), ambient.region(), eps).unwrap();

        let n = ambient.region().len();
        let mut block = DMatrix::zeros(n, n);
        for (part_region, part) in [(inner.region(), &h_in), (&rest, &h_out)] {
            for (a, sa) in part_region.sites().iter().enumerate() {
                let ia = ambient.region().index_of(sa).unwrap();
                for (b, sb) in part_region.sites().iter().enumerate() {
                    let ib = ambient.region().index_of(sb).unwrap();
                    block[(ia, ib)] = part.matrix()[(a, b)];
                }
            }
        }
        // H = (H_inner (+) H_rest) + eps * Gamma, entry by entry, exactly.
        for i in 0..n {
            for j in 0..n {
                assert_eq!(
                    h.matrix()[(i, j)],
                    block[(i, j)] + eps * gamma.matrix()[(i, j)],
                    "mismatch at ({i}, {j})"
                );
            }
        }
    }

    #[test]
    fn text_round_trip_preserves_the_operator() {
        let b = make_box(&[0.5], 5.0).unwrap();
        let f = sample_disorder(b.region(), Distribution::default(), 13).unwrap();
        let h = build_hamiltonian(&f, 0.125).unwrap();
        let text = h.to_text();
        let back = FiniteOperator::from_text(&text).unwrap();
        assert_eq!(back.region(), h.region());
        assert_eq!(back.epsilon, h.epsilon);
        assert_eq!(back.matrix(), h.matrix());
    }
}
