//! Discretized state space: grids, one-point marginals, and N-particle
//! configurations ("columns") stored as integer site occupancies.
//!
//! Site indices are 0-based throughout the crate.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the number of columns [`enumerate_columns`] will produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Finite set of sites in `dim`-dimensional space with a nearest-neighbour structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    coords: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl Grid {
    /// Builds a grid from flattened coordinates (`dim` values per site) and
    /// neighbour lists.
    pub fn new(dim: usize, coords: Vec<f64>, neighbors: Vec<Vec<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidGrid(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        let len = coords.len() / dim;
        if len == 0 {
            return Err(Error::InvalidGrid("grid has no sites".into()));
        }
        if neighbors.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: neighbors.len() });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidGrid("non-finite coordinate".into()));
        }

        let mut seen = HashSet::with_capacity(len);
        for point in coords.chunks(dim) {
            // -0.0 and 0.0 must collide
            let key: Vec<u64> = point.iter().map(|c| (c + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::InvalidGrid(format!("duplicate site {point:?}")));
            }
        }

        for (i, list) in neighbors.iter().enumerate() {
            if len > 1 && list.is_empty() {
                return Err(Error::InvalidGrid(format!("site {i} has no neighbours")));
            }
            for &j in list {
                if j >= len {
                    return Err(Error::InvalidGrid(format!("site {i} lists unknown neighbour {j}")));
                }
                if j == i {
                    return Err(Error::InvalidGrid(format!("site {i} lists itself as a neighbour")));
                }
                if !neighbors[j].contains(&i) {
                    return Err(Error::InvalidGrid(format!(
                        "neighbour relation not symmetric: {i} -> {j} but not {j} -> {i}"
                    )));
                }
            }
        }

        Ok(Self { dim, coords, neighbors })
    }

    /// Uniform chain `spacing * {1, ..., len}` with nearest-neighbour lists and
    /// no wraparound at the endpoints.
    pub fn uniform_1d(len: usize, spacing: f64) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 sites, got {len}")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        let coords = (1..=len).map(|i| spacing * i as f64).collect();
        Self::new(1, coords, chain_neighbors(len))
    }

    /// 1D grid at the given coordinates, with neighbours taken in the given order.
    pub fn chain_1d(coords: Vec<f64>) -> Result<Self> {
        let len = coords.len();
        Self::new(1, coords, chain_neighbors(len))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of sites (ℓ).
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn site(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn sites(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.site(i).iter().zip(self.site(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

fn chain_neighbors(len: usize) -> Vec<Vec<usize>> {
    (0..len)
        .map(|i| {
            let mut v = Vec::with_capacity(2);
            if i > 0 {
                v.push(i - 1);
            }
            if i + 1 < len {
                v.push(i + 1);
            }
            v
        })
        .collect()
}

/// Prescribed one-point marginal λ*: a probability vector over the sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    weights: Vec<f64>,
}

/// Recipe for a built-in marginal.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalKind {
    Uniform,
    /// `c0 * (0.2 + sin^2(i / (len + 1)))` for 1-based site index `i`, argument in radians.
    Sine,
    /// Nonnegative weights, renormalized to sum to one.
    Explicit(Vec<f64>),
}

impl Marginal {
    /// Renormalizes nonnegative weights into a probability vector.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMarginal("no weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidMarginal(format!("weight {w} is not a nonnegative number")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidMarginal("all weights are zero".into()));
        }
        Ok(Self { weights: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn build(kind: &MarginalKind, len: usize) -> Result<Self> {
        match kind {
            MarginalKind::Uniform => {
                if len == 0 {
                    return Err(Error::InvalidMarginal("no sites".into()));
                }
                Ok(Self { weights: vec![1.0 / len as f64; len] })
            }
            MarginalKind::Sine => {
                let denom = (len + 1) as f64;
                let raw = (1..=len)
                    .map(|i| {
                        let s = (i as f64 / denom).sin();
                        0.2 + s * s
                    })
                    .collect();
                Self::from_weights(raw)
            }
            MarginalKind::Explicit(w) => {
                if w.len() != len {
                    return Err(Error::DimensionMismatch { expected: len, got: w.len() });
                }
                Self::from_weights(w.clone())
            }
        }
    }

    pub fn uniform(len: usize) -> Self {
        Self { weights: vec![1.0 / len as f64; len] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - u).abs() <= 1e-14)
    }
}

/// An N-particle configuration on the grid: `occupancy[i]` particles sit on site `i`.
///
/// Equivalently a probability measure with values in `{0, 1/N, ..., 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Column {
    occupancy: Vec<u32>,
    n_particles: u32,
}

impl Column {
    pub fn new(occupancy: Vec<u32>) -> Result<Self> {
        if occupancy.is_empty() {
            return Err(Error::InvalidColumn("empty occupancy vector".into()));
        }
        let n: u64 = occupancy.iter().map(|&k| u64::from(k)).sum();
        let n_particles = u32::try_from(n).map_err(|_| Error::InvalidColumn(format!("{n} particles overflow")))?;
        if n_particles == 0 {
            return Err(Error::InvalidColumn("column holds no particles".into()));
        }
        Ok(Self { occupancy, n_particles })
    }

    /// All `n_particles` stacked on `site`.
    pub fn stacked(len: usize, site: usize, n_particles: u32) -> Self {
        let mut occupancy = vec![0; len];
        occupancy[site] = n_particles;
        Self { occupancy, n_particles }
    }

    pub fn occupancy(&self) -> &[u32] {
        &self.occupancy
    }

    pub fn n_particles(&self) -> u32 {
        self.n_particles
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    /// Iterator over `(site, count)` for occupied sites.
    pub fn support(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.occupancy.iter().copied().enumerate().filter(|&(_, k)| k > 0)
    }

    /// The induced probability vector `occupancy / N`.
    pub fn to_probability(&self) -> Vec<f64> {
        let n = f64::from(self.n_particles);
        self.occupancy.iter().map(|&k| f64::from(k) / n).collect()
    }

    /// Site of every particle, in ascending order.
    pub fn particle_sites(&self) -> Vec<usize> {
        self.support().flat_map(|(i, k)| std::iter::repeat_n(i, k as usize)).collect()
    }

    /// Site holding the `k`-th particle (0-based, particles ordered by site).
    fn site_of_particle(&self, mut k: u32) -> usize {
        for (i, &n) in self.occupancy.iter().enumerate() {
            if k < n {
                return i;
            }
            k -= n;
        }
        unreachable!("particle index out of range")
    }

    /// Copy of `self` with one particle moved from `from` to `to`.
    pub fn moved(&self, from: usize, to: usize) -> Self {
        debug_assert!(self.occupancy[from] > 0);
        let mut occupancy = self.occupancy.clone();
        occupancy[from] -= 1;
        occupancy[to] += 1;
        Self { occupancy, n_particles: self.n_particles }
    }
}

/// Probability vector of a column.
pub fn column_to_probability(col: &Column) -> Vec<f64> {
    col.to_probability()
}

/// Binomial coefficient `C(n, k)`, or `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=u128::from(k) {
        // acc * (n - k + i) is divisible by i at every step
        acc = acc.checked_mul(u128::from(n - k) + i)? / i;
    }
    Some(acc)
}

/// Number of N-particle configurations on `len` sites: `C(N + len - 1, N)`.
pub fn column_count(len: usize, n_particles: u32) -> Option<u128> {
    if len == 0 {
        return Some(0);
    }
    binomial(u64::from(n_particles) + len as u64 - 1, u64::from(n_particles))
}

/// Every N-particle configuration on `len` sites, in descending lexicographic
/// order of occupancy vectors (`(N,0,…)` first, `(…,0,N)` last).
pub fn enumerate_columns(len: usize, n_particles: u32, cap: u128) -> Result<Vec<Column>> {
    if len == 0 {
        return Err(Error::InvalidGrid("no sites".into()));
    }
    if n_particles == 0 {
        return Err(Error::TooFewParticles(0));
    }
    let count = column_count(len, n_particles).unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut occ = vec![0u32; len];
    fill(&mut occ, 0, n_particles, n_particles, &mut out);
    Ok(out)
}

fn fill(occ: &mut [u32], site: usize, remaining: u32, n: u32, out: &mut Vec<Column>) {
    if site + 1 == occ.len() {
        occ[site] = remaining;
        out.push(Column { occupancy: occ.to_vec(), n_particles: n });
        return;
    }
    for k in (0..=remaining).rev() {
        occ[site] = k;
        fill(occ, site + 1, remaining - k, n, out);
    }
    occ[site] = 0;
}

/// A column with `n_particles` dropped independently and uniformly onto the sites.
pub fn random_column<R: Rng + ?Sized>(len: usize, n_particles: u32, rng: &mut R) -> Column {
    let mut occupancy = vec![0u32; len];
    for _ in 0..n_particles {
        occupancy[rng.random_range(0..len)] += 1;
    }
    Column { occupancy, n_particles }
}

/// Moves one uniformly chosen particle to a uniformly chosen neighbour of its site.
///
/// A site is therefore picked with probability `n_a / N`. On a single-site grid
/// the parent is returned unchanged.
pub fn mutate<R: Rng + ?Sized>(parent: &Column, grid: &Grid, rng: &mut R) -> Column {
    debug_assert_eq!(parent.len(), grid.len());
    let from = parent.site_of_particle(rng.random_range(0..parent.n_particles));
    let nbrs = grid.neighbors(from);
    if nbrs.is_empty() {
        return parent.clone();
    }
    let to = nbrs[rng.random_range(0..nbrs.len())];
    parent.moved(from, to)
}

/// All distinct single-particle nearest-neighbour moves of `parent`, as `(from, to)` pairs.
pub fn neighbor_moves<'a>(parent: &'a Column, grid: &'a Grid) -> impl Iterator<Item = (usize, usize)> + 'a {
    parent.support().flat_map(move |(from, _)| grid.neighbors(from).iter().map(move |&to| (from, to)))
}
