//! Lattice geometry: finite boxes, boundary sets, interiors, suitable
//! covers, and buffered neighborhoods of bad cover cells.
//!
//! All regions are finite subsets of the integer lattice in dimension 1..=3,
//! stored sorted lexicographically. Geometric constructions that involve
//! non-integer box centers or cover ratios are carried out in exact rational
//! arithmetic so that site membership never depends on floating-point
//! rounding.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, MAX_DIM, MAX_REGION_SITES};

/// A lattice site: integer coordinates, one entry per dimension.
pub type Site = Vec<i64>;

type Rat = Ratio<i128>;

/// Sup-norm distance between two sites.
pub fn chebyshev(u: &[i64], v: &[i64]) -> i64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).max().unwrap_or(0)
}

/// Path-length (l1) distance between two sites.
pub fn l1(u: &[i64], v: &[i64]) -> i64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum()
}

/// Whether two sites are nearest neighbors (Euclidean distance exactly 1).
///
/// On the integer lattice this is equivalent to l1 distance 1.
pub fn is_adjacent(u: &[i64], v: &[i64]) -> bool {
    l1(u, v) == 1
}

/// Minimum sup-norm distance from `site` to any site of `region`
/// (`None` when the region is empty).
pub fn distance_to_region(site: &[i64], region: &Region) -> Option<i64> {
    region.sites().iter().map(|y| chebyshev(site, y)).min()
}

#[derive(Deserialize)]
struct RawRegion {
    dim: usize,
    sites: Vec<Site>,
}

/// A finite set of lattice sites, sorted lexicographically and duplicate-free.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRegion")]
pub struct Region {
    dim: usize,
    sites: Vec<Site>,
}

impl TryFrom<RawRegion> for Region {
    type Error = Error;
    fn try_from(raw: RawRegion) -> Result<Self> {
        Region::from_sites(raw.dim, raw.sites)
    }
}

impl Region {
    /// Build a region from explicit sites. Sites are sorted; duplicates,
    /// dimension mismatches, unsupported dimensions, and oversized regions
    /// are rejected.
    pub fn from_sites(dim: usize, mut sites: Vec<Site>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension { dim });
        }
        if sites.len() > MAX_REGION_SITES {
            return Err(Error::RegionTooLarge { sites: sites.len(), cap: MAX_REGION_SITES });
        }
        for s in &sites {
            if s.len() != dim {
                return Err(Error::DimensionMismatch { site: s.clone(), got: s.len(), dim });
            }
        }
        sites.sort_unstable();
        if let Some(w) = sites.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateSite { site: w[0].clone() });
        }
        Ok(Region { dim, sites })
    }

    /// Set union (duplicates across operands collapse).
    pub fn union(dim: usize, parts: &[&Region]) -> Result<Self> {
        let mut sites: Vec<Site> = Vec::new();
        for p in parts {
            debug_assert_eq!(p.dim, dim);
            sites.extend(p.sites.iter().cloned());
        }
        sites.sort_unstable();
        sites.dedup();
        if sites.len() > MAX_REGION_SITES {
            return Err(Error::RegionTooLarge { sites: sites.len(), cap: MAX_REGION_SITES });
        }
        Ok(Region { dim, sites })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    /// Position of a site in the sorted site list.
    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        self.sites.binary_search_by(|s| s.as_slice().cmp(site)).ok()
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        self.index_of(site).is_some()
    }

    /// First site of `self` that is not in `other`, if any.
    pub fn first_stray(&self, other: &Region) -> Option<&Site> {
        self.sites.iter().find(|s| !other.contains(s))
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.first_stray(other).is_none()
    }

    /// Sites of `self` not in `other`.
    pub fn difference(&self, other: &Region) -> Region {
        let sites = self.sites.iter().filter(|s| !other.contains(s)).cloned().collect();
        Region { dim: self.dim, sites }
    }

    /// Sup-norm diameter: `max_{u,v} ||u - v||_inf`, or `None` when empty.
    ///
    /// Equals the largest per-coordinate range, so it is computed in O(n d).
    pub fn diameter(&self) -> Option<i64> {
        if self.sites.is_empty() {
            return None;
        }
        Some(
            (0..self.dim)
                .map(|i| {
                    let lo = self.sites.iter().map(|s| s[i]).min().unwrap();
                    let hi = self.sites.iter().map(|s| s[i]).max().unwrap();
                    hi - lo
                })
                .max()
                .unwrap(),
        )
    }

    /// Whether the region is connected under nearest-neighbor adjacency.
    pub fn is_connected(&self) -> bool {
        if self.sites.len() <= 1 {
            return true;
        }
        let mut seen = vec![false; self.sites.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            let site = self.sites[i].clone();
            for axis in 0..self.dim {
                for step in [-1i64, 1] {
                    let mut nb = site.clone();
                    nb[axis] += step;
                    if let Some(j) = self.index_of(&nb) {
                        if !seen[j] {
                            seen[j] = true;
                            count += 1;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        count == self.sites.len()
    }
}

/// Exact dyadic-rational representation of a floating point coordinate.
fn dyadic(x: f64, what: &str) -> Result<Rat> {
    if !x.is_finite() || x.abs() > 1e9 {
        return Err(Error::InvalidConfig(format!("{what} = {x} is not a usable coordinate")));
    }
    let mut num = x;
    let mut den: i128 = 1;
    while num.fract() != 0.0 {
        num *= 2.0;
        den *= 2;
        if den > 1 << 40 {
            return Err(Error::InvalidConfig(format!(
                "{what} = {x} is not a dyadic rational with denominator <= 2^40"
            )));
        }
    }
    Ok(Rat::new(num as i128, den))
}

fn rat_to_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Integer range `[ceil(center - half), floor(center + half)]`, exact.
fn coord_range(center: Rat, half: Rat) -> (i64, i64) {
    let lo = (center - half).ceil().to_integer() as i64;
    let hi = (center + half).floor().to_integer() as i64;
    (lo, hi)
}

fn cartesian_product(ranges: &[(i64, i64)]) -> Result<Vec<Site>> {
    let mut count: u128 = 1;
    for &(lo, hi) in ranges {
        if hi < lo {
            return Ok(Vec::new());
        }
        count = count.saturating_mul((hi - lo + 1) as u128);
        if count > MAX_REGION_SITES as u128 {
            return Err(Error::RegionTooLarge { sites: count as usize, cap: MAX_REGION_SITES });
        }
    }
    let mut sites = vec![Vec::new()];
    for &(lo, hi) in ranges {
        let mut next = Vec::with_capacity(sites.len() * (hi - lo + 1) as usize);
        for prefix in &sites {
            for c in lo..=hi {
                let mut s = prefix.clone();
                s.push(c);
                next.push(s);
            }
        }
        sites = next;
    }
    Ok(sites)
}

/// A box `{ y : ||y - center||_inf <= side / 2 }` intersected with the
/// lattice, together with the real center and side it came from.
#[derive(Clone, Debug, Serialize)]
pub struct LatticeBox {
    pub center: Vec<f64>,
    pub side: f64,
    region: Region,
}

impl LatticeBox {
    /// Enumerate the sites of the box around `center` with side length `side`.
    ///
    /// Coordinates are resolved in exact rational arithmetic, so boundary
    /// sites at distance exactly `side / 2` are always included.
    pub fn new(center: &[f64], side: f64) -> Result<Self> {
        if center.is_empty() || center.len() > MAX_DIM {
            return Err(Error::UnsupportedDimension { dim: center.len() });
        }
        if !(side > 0.0) {
            return Err(Error::InvalidConfig(format!("box side must be positive, got {side}")));
        }
        let half = dyadic(side, "box side")? / Rat::from_integer(2);
        let mut ranges = Vec::with_capacity(center.len());
        for (i, &c) in center.iter().enumerate() {
            let c = dyadic(c, &format!("center[{i}]"))?;
            ranges.push(coord_range(c, half));
        }
        Self::from_rational(center.to_vec(), side, &ranges)
    }

    fn from_rational(center: Vec<f64>, side: f64, ranges: &[(i64, i64)]) -> Result<Self> {
        let sites = cartesian_product(ranges)?;
        if sites.is_empty() {
            return Err(Error::EmptyBox { center, side });
        }
        let region = Region::from_sites(center.len(), sites)?;
        Ok(LatticeBox { center, side, region })
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

/// Build the lattice box `side` around `center`; see [`LatticeBox::new`].
pub fn make_box(center: &[f64], side: f64) -> Result<LatticeBox> {
    LatticeBox::new(center, side)
}

/// Boundary of `inner` relative to `ambient`.
#[derive(Clone, Debug)]
pub struct BoundarySets {
    /// Ordered pairs `(u, v)` with `u` in inner, `v` in ambient minus inner,
    /// `|u - v| = 1`.
    pub edge: Vec<(Site, Site)>,
    /// Exterior vertex set: the `v` endpoints.
    pub exterior: Region,
    /// Interior vertex set: the `u` endpoints.
    pub interior: Region,
}

/// Edge, exterior, and interior boundary of `inner` inside `ambient`.
pub fn boundary_sets(inner: &Region, ambient: &Region) -> Result<BoundarySets> {
    if let Some(site) = inner.first_stray(ambient) {
        return Err(Error::NotContained { what: "boundary_sets", site: site.clone() });
    }
    let dim = inner.dim();
    let mut edge = Vec::new();
    let mut exterior = Vec::new();
    let mut interior = Vec::new();
    for u in inner.sites() {
        let mut u_is_boundary = false;
        for axis in 0..dim {
            for step in [-1i64, 1] {
                let mut v = u.clone();
                v[axis] += step;
                if ambient.contains(&v) && !inner.contains(&v) {
                    edge.push((u.clone(), v.clone()));
                    exterior.push(v);
                    u_is_boundary = true;
                }
            }
        }
        if u_is_boundary {
            interior.push(u.clone());
        }
    }
    exterior.sort_unstable();
    exterior.dedup();
    Ok(BoundarySets {
        edge,
        exterior: Region { dim, sites: exterior },
        interior: Region { dim, sites: interior },
    })
}

/// `t`-interior of `inner` relative to `ambient`: sites of `inner` at
/// sup-norm distance greater than `floor(t)` from `ambient` minus `inner`.
pub fn t_interior(inner: &Region, ambient: &Region, t: f64) -> Result<Region> {
    if !(t >= 1.0) {
        return Err(Error::pre(format!("interior depth t must be >= 1, got {t}")));
    }
    if let Some(site) = inner.first_stray(ambient) {
        return Err(Error::NotContained { what: "t_interior", site: site.clone() });
    }
    let depth = t.floor() as i64;
    let complement = ambient.difference(inner);
    if complement.is_empty() {
        return Ok(inner.clone());
    }
    let sites = inner
        .sites()
        .iter()
        .filter(|y| {
            complement.sites().iter().all(|v| chebyshev(y, v) > depth)
        })
        .cloned()
        .collect();
    Ok(Region { dim: inner.dim(), sites })
}

/// A suitable cover of a box: cells of side `cell_side` centered on the
/// rational sub-grid `center + rho * cell_side * Z^d`, clipped to the box.
///
/// The ratio `rho = (side - cell_side) / (2 * cell_side * k)` is the largest
/// element of `[3/5, 4/5]` of that form; it is kept exact.
#[derive(Clone, Debug)]
pub struct Cover {
    pub parent: LatticeBox,
    pub cell_side: f64,
    rho: Rat,
    k: i128,
    center_rat: Vec<Rat>,
    /// Grid coordinates of the cell centers: `j` with `||j||_inf <= k`.
    grid: Vec<Site>,
}

impl Cover {
    /// Number of cells.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    /// Grid half-width: cell centers run over `{-k,...,k}` per axis.
    pub fn half_width(&self) -> i64 {
        self.k as i64
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Exact cover ratio as `(numerator, denominator)`.
    pub fn rho(&self) -> (i64, i64) {
        (*self.rho.numer() as i64, *self.rho.denom() as i64)
    }

    pub fn rho_f64(&self) -> f64 {
        rat_to_f64(self.rho)
    }

    /// Center spacing `rho * cell_side`, exact.
    fn step(&self) -> Rat {
        self.rho * dyadic(self.cell_side, "cell side").expect("validated at construction")
    }

    /// Grid coordinates (multiples of the center spacing) of each cell center.
    pub fn grid(&self) -> &[Site] {
        &self.grid
    }

    /// Cell center in real coordinates (floating point, for display).
    pub fn center_f64(&self, idx: usize) -> Vec<f64> {
        let step = self.step();
        self.center_rat
            .iter()
            .zip(&self.grid[idx])
            .map(|(c, &j)| rat_to_f64(*c + step * Rat::from_integer(j as i128)))
            .collect()
    }

    /// The cell box at grid index `idx`, built with exact coordinates.
    pub fn cell(&self, idx: usize) -> LatticeBox {
        let step = self.step();
        let half = dyadic(self.cell_side, "cell side").expect("validated") / Rat::from_integer(2);
        let ranges: Vec<(i64, i64)> = self
            .center_rat
            .iter()
            .zip(&self.grid[idx])
            .map(|(c, &j)| coord_range(*c + step * Rat::from_integer(j as i128), half))
            .collect();
        let center = self.center_f64(idx);
        LatticeBox::from_rational(center, self.cell_side, &ranges)
            .expect("cover cells are nonempty by construction")
    }

    /// Union of all cell regions (used by the covering-property check).
    pub fn union_of_cells(&self) -> Result<Region> {
        let cells: Vec<Region> = (0..self.len()).map(|i| self.cell(i).region().clone()).collect();
        let refs: Vec<&Region> = cells.iter().collect();
        Region::union(self.parent.dim(), &refs)
    }

    /// Covering property: the cell `t`-interiors with `t = cell_side / 10`
    /// already cover the parent box.
    pub fn interiors_cover_parent(&self) -> Result<bool> {
        let t = self.cell_side / 10.0;
        let parent = self.parent.region();
        let mut covered = vec![false; parent.len()];
        for idx in 0..self.len() {
            let interior = t_interior(self.cell(idx).region(), parent, t)?;
            for s in interior.sites() {
                if let Some(i) = parent.index_of(s) {
                    covered[i] = true;
                }
            }
        }
        Ok(covered.iter().all(|&c| c))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "parent": { "center": self.parent.center, "side": self.parent.side },
            "cell_side": self.cell_side,
            "rho": { "num": *self.rho.numer() as i64, "den": *self.rho.denom() as i64 },
            "cells": self.len(),
            "centers": (0..self.len()).map(|i| self.center_f64(i)).collect::<Vec<_>>(),
            "grid": self.grid,
        })
    }
}

/// Construct the suitable cover of the box `side` around `center` with cells
/// of side `cell_side`.
///
/// `side` and `cell_side` must be integer-valued. The admissible ratio set
/// `[3/5, 4/5] inter { (side - cell)/(2 cell k) : k in N }` is scanned with
/// exact rational arithmetic; if it is empty the cover is infeasible
/// (`cell_side <= side / 6` guarantees it is not).
pub fn suitable_cover(center: &[f64], side: f64, cell_side: f64) -> Result<Cover> {
    if center.is_empty() || center.len() > MAX_DIM {
        return Err(Error::UnsupportedDimension { dim: center.len() });
    }
    if side.fract() != 0.0 || cell_side.fract() != 0.0 {
        return Err(Error::InvalidConfig(format!(
            "cover sides must be integer-valued, got side = {side}, cell_side = {cell_side}"
        )));
    }
    if !(cell_side >= 1.0) || !(side > cell_side) {
        return Err(Error::InvalidConfig(format!(
            "cover needs 1 <= cell_side < side, got side = {side}, cell_side = {cell_side}"
        )));
    }
    let l = side as i128;
    let ell = cell_side as i128;
    let gap = l - ell;
    // rho = gap / (2 ell k) in [3/5, 4/5]  <=>  5 gap / (8 ell) <= k <= 5 gap / (6 ell)
    let k_lo = Rat::new(5 * gap, 8 * ell).ceil().to_integer();
    let k_hi = Rat::new(5 * gap, 6 * ell).floor().to_integer();
    let admissible = (k_lo..=k_hi).find(|&k| {
        let rho = Rat::new(gap, 2 * ell * k);
        Rat::new(3, 5) <= rho && rho <= Rat::new(4, 5)
    });
    let k = admissible.ok_or(Error::CoverInfeasible { side, cell_side })?;
    let rho = Rat::new(gap, 2 * ell * k);

    let count: u128 = (2 * k as u128 + 1).pow(center.len() as u32);
    if count > MAX_REGION_SITES as u128 {
        return Err(Error::RegionTooLarge { sites: count as usize, cap: MAX_REGION_SITES });
    }

    let mut center_rat = Vec::with_capacity(center.len());
    for (i, &c) in center.iter().enumerate() {
        center_rat.push(dyadic(c, &format!("center[{i}]"))?);
    }
    let k64 = k as i64;
    let grid = cartesian_product(&vec![(-k64, k64); center.len()])?;
    let parent = LatticeBox::new(center, side)?;
    Ok(Cover { parent, cell_side, rho, k, center_rat, grid })
}

/// Cell-center adjacency graphs of a cover.
///
/// `g1` joins centers at grid sup-distance 1 (cells overlap); `g2` joins
/// centers at grid sup-distance 2 or 3 (cells disjoint, but the
/// `(2 rho + 1)`-dilated cells overlap). Edges are `(i, j)` with `i < j`.
#[derive(Clone, Debug)]
pub struct BoxGraphs {
    pub g1: Vec<(usize, usize)>,
    pub g2: Vec<(usize, usize)>,
}

pub fn cover_graphs(cover: &Cover) -> BoxGraphs {
    let grid = cover.grid();
    let mut g1 = Vec::new();
    let mut g2 = Vec::new();
    for i in 0..grid.len() {
        for j in (i + 1)..grid.len() {
            match chebyshev(&grid[i], &grid[j]) {
                1 => g1.push((i, j)),
                2 | 3 => g2.push((i, j)),
                _ => {}
            }
        }
    }
    BoxGraphs { g1, g2 }
}

/// Buffered neighborhood of one connected cluster of bad cover cells.
///
/// `component` is the cluster itself, `phi_tilde` its 1-step dilation in the
/// cover grid, and `guard` the exterior grid boundary of the dilation. The
/// regions are unions of cover cells: `core` over `phi_tilde`, `upsilon`
/// over `phi_tilde + guard`, `checked` over `guard` alone, `checked_prime`
/// the `2 ell_sharp`-interiors of the guard cells relative to `upsilon`, and
/// `hat` / `hat_prime` the respective complements inside `upsilon`.
#[derive(Clone, Debug)]
pub struct BufferedSubset {
    pub component: Vec<usize>,
    pub phi_tilde: Vec<usize>,
    pub guard: Vec<usize>,
    pub core: Region,
    pub upsilon: Region,
    pub checked: Region,
    pub checked_prime: Region,
    pub hat: Region,
    pub hat_prime: Region,
}

impl BufferedSubset {
    /// Every interior-boundary site of `upsilon` relative to the parent box
    /// must lie in the deep interior of some guard cell; returns the first
    /// uncovered site otherwise.
    pub fn boundary_covered_by_guard(&self, parent: &Region) -> Result<(bool, Option<Site>)> {
        let bd = boundary_sets(&self.upsilon, parent)?;
        for y in bd.interior.sites() {
            if !self.checked_prime.contains(y) {
                return Ok((false, Some(y.clone())));
            }
        }
        Ok((true, None))
    }
}

/// Decompose a set of bad cover cells into buffered neighborhoods.
///
/// `bad` holds indices into the cover grid; the corresponding cells must be
/// pairwise disjoint (grid sup-distance at least 2). Clusters are the
/// connected components under the `g2` relation (grid distance 2 or 3), and
/// each yields one [`BufferedSubset`]. `ell_sharp` is the interior depth
/// parameter for the guard-cell interiors.
pub fn buffered_subsets(cover: &Cover, bad: &[usize], ell_sharp: f64) -> Result<Vec<BufferedSubset>> {
    if !(ell_sharp >= 0.5) {
        return Err(Error::pre(format!("ell_sharp must be >= 0.5, got {ell_sharp}")));
    }
    let grid = cover.grid();
    for &b in bad {
        if b >= grid.len() {
            return Err(Error::pre(format!(
                "bad cell index {b} out of range (cover has {} cells)",
                grid.len()
            )));
        }
    }
    for (i, &a) in bad.iter().enumerate() {
        for &b in &bad[i + 1..] {
            let d = chebyshev(&grid[a], &grid[b]);
            if d < 2 {
                return Err(Error::pre(format!(
                    "bad cells {a} and {b} are at grid distance {d}; cells must be pairwise disjoint"
                )));
            }
        }
    }

    // Connected components under grid distance 2 or 3.
    let mut comp_of = vec![usize::MAX; bad.len()];
    let mut n_comps = 0;
    for start in 0..bad.len() {
        if comp_of[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp_of[start] = n_comps;
        while let Some(i) = stack.pop() {
            for j in 0..bad.len() {
                if comp_of[j] == usize::MAX
                    && matches!(chebyshev(&grid[bad[i]], &grid[bad[j]]), 2 | 3)
                {
                    comp_of[j] = n_comps;
                    stack.push(j);
                }
            }
        }
        n_comps += 1;
    }

    let dim = cover.parent.dim();
    let mut out = Vec::with_capacity(n_comps);
    for c in 0..n_comps {
        let component: Vec<usize> =
            bad.iter().enumerate().filter(|&(i, _)| comp_of[i] == c).map(|(_, &b)| b).collect();
        let phi_tilde: Vec<usize> = (0..grid.len())
            .filter(|&a| component.iter().any(|&b| chebyshev(&grid[a], &grid[b]) <= 1))
            .collect();
        let guard: Vec<usize> = (0..grid.len())
            .filter(|&a| {
                !phi_tilde.contains(&a)
                    && phi_tilde.iter().any(|&b| chebyshev(&grid[a], &grid[b]) == 1)
            })
            .collect();

        let union_of = |ids: &[usize]| -> Result<Region> {
            let cells: Vec<Region> = ids.iter().map(|&i| cover.cell(i).region().clone()).collect();
            let refs: Vec<&Region> = cells.iter().collect();
            Region::union(dim, &refs)
        };
        let core = union_of(&phi_tilde)?;
        let checked = union_of(&guard)?;
        let upsilon = Region::union(dim, &[&core, &checked])?;

        let mut prime_parts = Vec::with_capacity(guard.len());
        for &g in &guard {
            prime_parts.push(t_interior(cover.cell(g).region(), &upsilon, 2.0 * ell_sharp)?);
        }
        let prime_refs: Vec<&Region> = prime_parts.iter().collect();
        let checked_prime = Region::union(dim, &prime_refs)?;

        let hat = upsilon.difference(&checked);
        let hat_prime = upsilon.difference(&checked_prime);
        out.push(BufferedSubset {
            component,
            phi_tilde,
            guard,
            core,
            upsilon,
            checked,
            checked_prime,
            hat,
            hat_prime,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sites_1d(range: std::ops::RangeInclusive<i64>) -> Vec<Site> {
        range.map(|x| vec![x]).collect()
    }

    #[test]
    fn box_enumerates_centered_interval() {
        let b = make_box(&[0.0], 4.0).unwrap();
        assert_eq!(b.region().sites(), &sites_1d(-2..=2)[..]);
    }

    #[test]
    fn box_with_half_integer_center_keeps_boundary_sites() {
        let b = make_box(&[0.5], 2.0).unwrap();
        assert_eq!(b.region().sites(), &sites_1d(0..=1)[..]);
    }

    #[test]
    fn box_cardinality_bounds_hold_at_scale_200() {
        let b = make_box(&[0.0], 200.0).unwrap();
        let n = b.region().len() as f64;
        assert_eq!(n, 201.0);
        assert!(198f64.powi(1) < n && n <= 201f64);
    }

    #[test]
    fn degenerate_box_is_an_error() {
        // [0.25, 0.75] contains no integer.
        match make_box(&[0.5], 0.5) {
            Err(Error::EmptyBox { .. }) => {}
            other => panic!("expected empty-box error, got {other:?}"),
        }
    }

    #[test]
    fn non_dyadic_geometry_is_rejected() {
        match make_box(&[0.3], 4.0) {
            Err(Error::InvalidConfig(msg)) => assert!(msg.contains("dyadic")),
            other => panic!("expected dyadic rejection, got {other:?}"),
        }
    }

    #[test]
    fn two_dim_box_is_a_product() {
        let b = make_box(&[0.0, 0.0], 2.0).unwrap();
        assert_eq!(b.region().len(), 9);
        assert!(b.region().contains(&[-1, 1]));
    }

    proptest! {
        #[test]
        fn box_cardinality_bounds(side in 2f64..60.0, c0 in -8i64..8, halves in 0u8..2) {
            let side = side.floor();
            let center = c0 as f64 + 0.5 * halves as f64;
            let b = make_box(&[center], side).unwrap();
            let n = b.region().len() as f64;
            prop_assert!((side - 2.0) < n && n <= side + 1.0);
        }

        #[test]
        fn interior_shrinks_with_depth(t1 in 1f64..6.0, dt in 0f64..6.0) {
            let ambient = make_box(&[0.0, 0.0], 16.0).unwrap();
            let inner = make_box(&[1.0, -2.0], 8.0).unwrap();
            let a = t_interior(inner.region(), ambient.region(), t1).unwrap();
            let b = t_interior(inner.region(), ambient.region(), t1 + dt).unwrap();
            prop_assert!(b.is_subset_of(&a));
        }

        #[test]
        fn box_boundary_cardinalities(l in 2i64..14, cx in -4i64..4, cy in -4i64..4) {
            let ambient = make_box(&[0.0, 0.0], 40.0).unwrap();
            let inner = make_box(&[cx as f64, cy as f64], l as f64).unwrap();
            let bd = boundary_sets(inner.region(), ambient.region()).unwrap();
            let s_d = 4.0 * 2.0; // 2^d * d, d = 2
            prop_assert_eq!(bd.exterior.len(), bd.edge.len());
            prop_assert!(bd.interior.len() <= bd.exterior.len());
            prop_assert!((bd.edge.len() as f64) <= s_d * (l as f64).powi(1));
        }
    }

    #[test]
    fn boundary_of_interval_in_interval() {
        let ambient = make_box(&[0.0], 8.0).unwrap();
        let inner = make_box(&[0.0], 4.0).unwrap();
        let bd = boundary_sets(inner.region(), ambient.region()).unwrap();
        assert_eq!(bd.edge, vec![(vec![-2], vec![-3]), (vec![2], vec![3])]);
        assert_eq!(bd.exterior.sites(), &[vec![-3], vec![3]]);
        assert_eq!(bd.interior.sites(), &[vec![-2], vec![2]]);
        // 2^d * d * side^(d-1) with d = 1: the bound is 2.
        assert!(bd.edge.len() <= 2);
    }

    #[test]
    fn boundary_requires_containment() {
        let inner = Region::from_sites(1, sites_1d(0..=5)).unwrap();
        let ambient = Region::from_sites(1, sites_1d(1..=9)).unwrap();
        assert!(matches!(
            boundary_sets(&inner, &ambient),
            Err(Error::NotContained { .. })
        ));
    }

    #[test]
    fn interior_strips_a_margin() {
        let inner = Region::from_sites(1, sites_1d(0..=9)).unwrap();
        let ambient = Region::from_sites(1, sites_1d(0..=19)).unwrap();
        let int = t_interior(&inner, &ambient, 2.0).unwrap();
        assert_eq!(int.sites(), &sites_1d(0..=7)[..]);
    }

    #[test]
    fn interior_of_whole_region_is_itself() {
        let r = Region::from_sites(1, sites_1d(-3..=3)).unwrap();
        let int = t_interior(&r, &r, 5.0).unwrap();
        assert_eq!(int, r);
    }

    #[test]
    fn interior_can_be_empty() {
        let inner = Region::from_sites(1, vec![vec![0]]).unwrap();
        let ambient = Region::from_sites(1, vec![vec![0], vec![1]]).unwrap();
        let int = t_interior(&inner, &ambient, 1.0).unwrap();
        assert!(int.is_empty());
    }

    #[test]
    fn interior_depth_below_one_is_rejected() {
        let r = Region::from_sites(1, sites_1d(0..=5)).unwrap();
        assert!(t_interior(&r, &r, 0.5).is_err());
    }

    #[test]
    fn cover_of_200_by_20_picks_three_quarters() {
        let c = suitable_cover(&[0.0], 200.0, 20.0).unwrap();
        assert_eq!(c.rho(), (3, 4));
        assert_eq!(c.len(), 13);
        // Centers are spaced by rho * ell = 15.
        assert_eq!(c.center_f64(0), vec![-90.0]);
        assert!(c.interiors_cover_parent().unwrap());
    }

    #[test]
    fn cover_of_126_by_21_picks_five_eighths() {
        let c = suitable_cover(&[0.0], 126.0, 21.0).unwrap();
        assert_eq!(c.rho(), (5, 8));
        assert_eq!(c.len(), 9);
        assert!(c.interiors_cover_parent().unwrap());
    }

    #[test]
    fn cover_count_is_a_power_in_higher_dimension() {
        let c = suitable_cover(&[0.0, 0.0], 200.0, 20.0).unwrap();
        assert_eq!(c.len(), 169);
    }

    #[test]
    fn cover_count_bounds() {
        for (l, ell, d) in [(200.0, 20.0, 1usize), (126.0, 21.0, 1), (240.0, 40.0, 1), (60.0, 10.0, 2)] {
            let c = suitable_cover(&vec![0.0; d], l, ell).unwrap();
            let n = c.len() as f64;
            assert!((l / ell).powi(d as i32) <= n && n <= (2.0 * l / ell).powi(d as i32));
        }
    }

    #[test]
    fn infeasible_ratio_set_is_an_error() {
        assert!(matches!(
            suitable_cover(&[0.0], 200.0, 70.0),
            Err(Error::CoverInfeasible { .. })
        ));
    }

    #[test]
    fn cover_cells_stay_inside_parent_and_overlap_matches_g1() {
        let c = suitable_cover(&[0.0], 200.0, 20.0).unwrap();
        let parent = c.parent.region().clone();
        for i in 0..c.len() {
            assert!(c.cell(i).region().is_subset_of(&parent));
        }
        let graphs = cover_graphs(&c);
        // Cells overlap exactly when their centers are grid-adjacent.
        for i in 0..c.len() {
            for j in (i + 1)..c.len() {
                let overlap = c
                    .cell(i)
                    .region()
                    .sites()
                    .iter()
                    .any(|s| c.cell(j).region().contains(s));
                let g1_edge = graphs.g1.contains(&(i, j));
                assert_eq!(overlap, g1_edge, "cells {i},{j}");
            }
        }
    }

    #[test]
    fn graph_edge_counts_on_the_line() {
        let c = suitable_cover(&[0.0], 200.0, 20.0).unwrap();
        let graphs = cover_graphs(&c);
        assert_eq!(graphs.g1.len(), 12);
        assert_eq!(graphs.g2.len(), 11 + 10);
    }

    #[test]
    fn cover_with_non_dyadic_spacing_is_exact() {
        // side 90, cell 12: rho = 13/20, spacing 39/5 is not a dyadic float.
        let c = suitable_cover(&[0.0], 90.0, 12.0).unwrap();
        assert_eq!(c.rho(), (13, 20));
        let parent = c.parent.region().clone();
        assert!(c.union_of_cells().unwrap().is_subset_of(&parent));
        assert!(c.interiors_cover_parent().unwrap());
    }

    #[test]
    fn single_bad_cell_buffers_to_a_five_cell_strip() {
        let c = suitable_cover(&[0.0], 200.0, 20.0).unwrap();
        // Index of grid coordinate [0] (center cell).
        let b = c.grid().iter().position(|g| g == &vec![0]).unwrap();
        let subs = buffered_subsets(&c, &[b], 1.0).unwrap();
        assert_eq!(subs.len(), 1);
        let s = &subs[0];
        let coords = |ids: &[usize]| -> Vec<i64> { ids.iter().map(|&i| c.grid()[i][0]).collect() };
        assert_eq!(coords(&s.phi_tilde), vec![-1, 0, 1]);
        assert_eq!(coords(&s.guard), vec![-2, 2]);
        // Upsilon spans [-40, 40]: diameter 80 <= 5 * 20 * |component|.
        assert_eq!(s.upsilon.diameter(), Some(80));
        assert!(s.upsilon.is_connected());
        assert_eq!(s.hat.sites(), &sites_1d(-19..=19)[..]);
        let (ok, witness) = s.boundary_covered_by_guard(c.parent.region()).unwrap();
        assert!(ok, "uncovered boundary site {witness:?}");
    }

    #[test]
    fn two_bad_cells_at_distance_two_share_a_component() {
        let c = suitable_cover(&[0.0], 200.0, 20.0).unwrap();
        let b0 = c.grid().iter().position(|g| g == &vec![0]).unwrap();
        let b2 = c.grid().iter().position(|g| g == &vec![2]).unwrap();
        let subs = buffered_subsets(&c, &[b0, b2], 1.0).unwrap();
        assert_eq!(subs.len(), 1);
        let s = &subs[0];
        assert_eq!(s.component.len(), 2);
        let d = s.upsilon.diameter().unwrap();
        assert!(d <= 5 * 20 * 2, "diameter {d} exceeds the cluster bound");
    }

    #[test]
    fn far_bad_cells_split_into_components_with_bounded_total_diameter() {
        let c = suitable_cover(&[0.0], 200.0, 20.0).unwrap();
        let pick = |j: i64| c.grid().iter().position(|g| g == &vec![j]).unwrap();
        let bad = [pick(-5), pick(0), pick(5)];
        let subs = buffered_subsets(&c, &bad, 1.0).unwrap();
        assert_eq!(subs.len(), 3);
        let total: i64 = subs.iter().map(|s| s.upsilon.diameter().unwrap()).sum();
        assert!(total <= 5 * 20 * 3);
        for s in &subs {
            let (ok, _) = s.boundary_covered_by_guard(c.parent.region()).unwrap();
            assert!(ok);
        }
    }

    #[test]
    fn overlapping_bad_cells_are_rejected() {
        let c = suitable_cover(&[0.0], 200.0, 20.0).unwrap();
        let b0 = c.grid().iter().position(|g| g == &vec![0]).unwrap();
        let b1 = c.grid().iter().position(|g| g == &vec![1]).unwrap();
        assert!(buffered_subsets(&c, &[b0, b1], 1.0).is_err());
        assert!(buffered_subsets(&c, &[usize::MAX], 1.0).is_err());
    }

    #[test]
    fn region_rejects_bad_input() {
        assert!(matches!(
            Region::from_sites(1, vec![vec![0], vec![0]]),
            Err(Error::DuplicateSite { .. })
        ));
        assert!(matches!(
            Region::from_sites(2, vec![vec![0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(Region::from_sites(4, vec![]), Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn region_json_round_trip_is_canonical() {
        let r = Region::from_sites(2, vec![vec![1, 0], vec![0, 0], vec![0, 1]]).unwrap();
        let js = serde_json::to_string(&r).unwrap();
        let back: Region = serde_json::from_str(&js).unwrap();
        assert_eq!(back, r);
        // Unsorted input is canonicalized on load.
        let shuffled: Region =
            serde_json::from_str(r#"{"dim":1,"sites":[[3],[1],[2]]}"#).unwrap();
        assert_eq!(shuffled.sites(), &[vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn diameter_matches_brute_force() {
        let r = Region::from_sites(2, vec![vec![0, 0], vec![3, -2], vec![-1, 4]]).unwrap();
        let brute = r
            .sites()
            .iter()
            .flat_map(|u| r.sites().iter().map(move |v| chebyshev(u, v)))
            .max()
            .unwrap();
        assert_eq!(r.diameter(), Some(brute));
    }
}
