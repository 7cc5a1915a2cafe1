//! Pairwise interaction costs and two-point marginals of configurations.
//!
//! For a pairwise cost `c(x_1..x_N) = Σ_{i<j} w(x_i, x_j)` the cost of a column
//! only depends on its occupancy vector through the ℓ×ℓ matrix `C_ij = w(a_i, a_j)`:
//!
//! ```text
//! c_λ = (N²/2) λᵀCλ − (N/2) diag(C)ᵀλ
//! ```
//!
//! so evaluating a candidate never touches the N-fold product space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state_space::{Column, Grid};

/// Symmetric pair interaction `w(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PairPotential {
    /// `1 / sqrt(ε² + |x − y|²)`.
    RegularizedCoulomb { epsilon: f64 },
    /// Values given directly per site pair.
    Tabulated(CostMatrix),
}

impl PairPotential {
    pub fn coulomb(epsilon: f64) -> Self {
        Self::RegularizedCoulomb { epsilon }
    }
}

/// Dense symmetric ℓ×ℓ matrix `C_ij = w(a_i, a_j)`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    len: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn from_entries(len: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != len * len {
            return Err(Error::DimensionMismatch { expected: len * len, got: entries.len() });
        }
        for i in 0..len {
            for j in 0..len {
                let v = entries[i * len + j];
                if !v.is_finite() {
                    return Err(Error::NonFinitePotential(i, j));
                }
                if j > i && v != entries[j * len + i] {
                    return Err(Error::InvalidPotential(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { len, entries })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let len = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != len) {
            return Err(Error::DimensionMismatch { expected: len, got: bad.len() });
        }
        Self::from_entries(len, rows.into_iter().flatten().collect())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.len..(i + 1) * self.len]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.get(i, i)).collect()
    }

    /// Same matrix with sites relabelled: entry `(i, j)` of the result is `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.len;
        let entries = (0..n * n).map(|k| self.get(perm[k / n], perm[k % n])).collect();
        Self { len: n, entries }
    }
}

pub fn build_cost_matrix(grid: &Grid, potential: &PairPotential) -> Result<CostMatrix> {
    let len = grid.len();
    match potential {
        PairPotential::RegularizedCoulomb { epsilon } => {
            if !epsilon.is_finite() || *epsilon < 0.0 {
                return Err(Error::InvalidPotential(format!("epsilon must be nonnegative, got {epsilon}")));
            }
            let eps2 = epsilon * epsilon;
            let mut entries = vec![0.0; len * len];
            for i in 0..len {
                for j in i..len {
                    let d = grid.distance(i, j);
                    let v = 1.0 / (eps2 + d * d).sqrt();
                    if !v.is_finite() {
                        return Err(Error::NonFinitePotential(i, j));
                    }
                    entries[i * len + j] = v;
                    entries[j * len + i] = v;
                }
            }
            Ok(CostMatrix { len, entries })
        }
        PairPotential::Tabulated(c) => {
            if c.len() != len {
                return Err(Error::DimensionMismatch { expected: len, got: c.len() });
            }
            Ok(c.clone())
        }
    }
}

fn check_len(col: &Column, c: &CostMatrix) -> Result<()> {
    if col.len() != c.len() {
        return Err(Error::DimensionMismatch { expected: c.len(), got: col.len() });
    }
    Ok(())
}

/// Interaction energy of a configuration, evaluated on its occupied sites only.
///
/// Expanding the quadratic form over the support `S` with integer occupancies
/// gives `Σ_{i∈S} n_i(n_i−1)/2 · C_ii + Σ_{i<j∈S} n_i n_j C_ij`, which is
/// `O(|S|²)` and free of the cancellation in the dense expression.
pub fn column_cost(col: &Column, c: &CostMatrix) -> Result<f64> {
    check_len(col, c)?;
    Ok(column_cost_unchecked(col, c))
}

pub(crate) fn column_cost_unchecked(col: &Column, c: &CostMatrix) -> f64 {
    let support: Vec<(usize, f64)> = col.support().map(|(i, k)| (i, f64::from(k))).collect();
    let mut total = 0.0;
    for (a, &(i, ni)) in support.iter().enumerate() {
        let row = c.row(i);
        total += 0.5 * ni * (ni - 1.0) * row[i];
        for &(j, nj) in &support[a + 1..] {
            total += ni * nj * row[j];
        }
    }
    total
}

/// Dense evaluation of `(N²/2) λᵀCλ − (N/2) diag(C)ᵀλ` over all ℓ sites.
pub fn column_cost_dense(col: &Column, c: &CostMatrix) -> Result<f64> {
    check_len(col, c)?;
    let n = f64::from(col.n_particles());
    let lambda = col.to_probability();
    let len = c.len();
    let mut quad = 0.0;
    let mut lin = 0.0;
    for i in 0..len {
        let ci: f64 = (0..len).map(|j| c.get(i, j) * lambda[j]).sum();
        quad += lambda[i] * ci;
        lin += c.get(i, i) * lambda[i];
    }
    Ok(0.5 * n * n * quad - 0.5 * n * lin)
}

/// Direct sum of `C` over all unordered particle pairs, `O(N²)`.
pub fn column_cost_bruteforce(col: &Column, c: &CostMatrix) -> Result<f64> {
    check_len(col, c)?;
    let sites = col.particle_sites();
    let mut total = 0.0;
    for (a, &i) in sites.iter().enumerate() {
        for &j in &sites[a + 1..] {
            total += c.get(i, j);
        }
    }
    Ok(total)
}

/// Two-point marginal: a symmetric nonnegative ℓ×ℓ matrix summing to one whose
/// rows sum to the one-point marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDensity {
    len: usize,
    entries: Vec<f64>,
}

impl PairDensity {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.chunks(self.len).map(|r| r.iter().sum()).collect()
    }

    /// `(i, j, value)` for every entry with `|value| > threshold`, row-major.
    pub fn nonzeros(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > threshold)
            .map(|(k, &v)| (k / self.len, k % self.len, v))
            .collect()
    }

    /// `C(N,2) Σ_ij M_ij C_ij`, the cost of any symmetric plan with this pair density.
    pub fn energy(&self, c: &CostMatrix, n_particles: u32) -> f64 {
        let n = f64::from(n_particles);
        let pairs = 0.5 * n * (n - 1.0);
        pairs * self.entries.iter().zip(&c.entries).map(|(m, w)| m * w).sum::<f64>()
    }
}

/// Two-point marginal of the symmetrized configuration:
/// `N/(N−1) λ⊗λ − 1/(N−1) diag(λ)`.
pub fn pair_marginal(col: &Column) -> Result<PairDensity> {
    let n = col.n_particles();
    if n < 2 {
        return Err(Error::TooFewParticles(n));
    }
    let len = col.len();
    let mut entries = vec![0.0; len * len];
    accumulate_pair_marginal(col, 1.0, &mut entries);
    Ok(PairDensity { len, entries })
}

// N/(N−1) λ_iλ_j − δ_ij λ_i/(N−1) with λ = n/N is (n_i n_j − δ_ij n_i) / (N(N−1));
// the integer form keeps single-occupied diagonal entries exactly zero.
fn accumulate_pair_marginal(col: &Column, weight: f64, entries: &mut [f64]) {
    let len = col.len();
    let n = f64::from(col.n_particles());
    let scale = weight / (n * (n - 1.0));
    let support: Vec<(usize, f64)> = col.support().map(|(i, k)| (i, f64::from(k))).collect();
    for &(i, ni) in &support {
        for &(j, nj) in &support {
            let pairs = if i == j { ni * (ni - 1.0) } else { ni * nj };
            entries[i * len + j] += scale * pairs;
        }
    }
}

/// Two-point marginal of a convex combination of configurations.
pub fn plan_pair_marginal(plan: &[(Column, f64)]) -> Result<PairDensity> {
    let first = plan.first().ok_or(Error::UnnormalizedPlan(0.0))?;
    let len = first.0.len();
    let mut total = 0.0;
    for (col, w) in plan {
        if *w < 0.0 {
            return Err(Error::NegativeWeight(*w));
        }
        if col.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: col.len() });
        }
        if col.n_particles() < 2 {
            return Err(Error::TooFewParticles(col.n_particles()));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::UnnormalizedPlan(total));
    }
    let mut entries = vec![0.0; len * len];
    for (col, w) in plan {
        if *w > 0.0 {
            accumulate_pair_marginal(col, *w, &mut entries);
        }
    }
    Ok(PairDensity { len, entries })
}
