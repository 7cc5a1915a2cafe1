//! Reference solutions used to check GenCol: the full master problem solved by
//! enumeration, the exact uniformly spaced solution of the homogeneous 1D
//! problem, and brute-force deciders for the clique and pricing decision
//! problems together with the reduction between them.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cost::{column_cost_unchecked, CostMatrix};
use crate::error::{Error, Result};
use crate::rmp::{solve_rmp, RestrictedProblem, DEFAULT_LP_TOL};
use crate::state_space::{enumerate_columns, Column, Marginal};

/// Default cap on the number of columns [`solve_full_lp`] enumerates.
pub const DEFAULT_FULL_LP_CAP: u128 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct FullLpSolution {
    pub value: f64,
    /// All configurations, in enumeration order.
    pub columns: Vec<Column>,
    pub alpha: Vec<f64>,
}

impl FullLpSolution {
    /// Columns with positive weight.
    pub fn plan(&self) -> Vec<(Column, f64)> {
        self.columns.iter().zip(&self.alpha).filter(|(_, &a)| a > 0.0).map(|(c, &a)| (c.clone(), a)).collect()
    }
}

/// Solves the unrestricted master problem over every N-particle configuration.
pub fn solve_full_lp(n_particles: u32, costs: &CostMatrix, marginal: &Marginal, cap: u128) -> Result<FullLpSolution> {
    let len = costs.len();
    if marginal.len() != len {
        return Err(Error::DimensionMismatch { expected: len, got: marginal.len() });
    }
    let columns = enumerate_columns(len, n_particles, cap)?;
    let problem = RestrictedProblem::with_cost_matrix(columns, costs, marginal.clone())?;
    let sol = solve_rmp(&problem, DEFAULT_LP_TOL)?;
    Ok(FullLpSolution { value: sol.value, columns: problem.columns().to_vec(), alpha: sol.alpha })
}

/// Superposition of uniformly spaced configurations solving the homogeneous
/// problem on a 1D chain: for each offset `i < ℓ/N`, particles at
/// `i, i + ℓ/N, …, i + (N−1)ℓ/N`, each with weight `N/ℓ`.
pub fn homogeneous_monge_solution(len: usize, n_particles: u32) -> Result<Vec<(Column, f64)>> {
    let n = n_particles as usize;
    if n == 0 || len == 0 || !len.is_multiple_of(n) {
        return Err(Error::InvalidInstance(format!("{n_particles} particles do not evenly divide {len} sites")));
    }
    let spacing = len / n;
    let weight = n as f64 / len as f64;
    let plan = (0..spacing)
        .map(|offset| {
            let mut occ = vec![0u32; len];
            for k in 0..n {
                occ[(offset + k * spacing) % len] += 1;
            }
            (Column::new(occ).expect("nonempty"), weight)
        })
        .collect();
    Ok(plan)
}

/// `Σ weight · cost` of a weighted configuration list.
pub fn plan_cost(plan: &[(Column, f64)], costs: &CostMatrix) -> f64 {
    plan.iter().map(|(c, w)| w * column_cost_unchecked(c, costs)).sum()
}

/// One-point marginal `Σ weight · occupancy / N` of a weighted configuration list.
pub fn plan_marginal(plan: &[(Column, f64)]) -> Vec<f64> {
    let len = plan.first().map_or(0, |(c, _)| c.len());
    let mut out = vec![0.0; len];
    for (c, w) in plan {
        for (o, p) in out.iter_mut().zip(c.to_probability()) {
            *o += w * p;
        }
    }
    out
}

/// Simple undirected graph on vertices `0..n_vertices`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_vertices: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidInstance(format!("self-loop at vertex {u}")));
            }
            if u >= n_vertices || v >= n_vertices {
                return Err(Error::InvalidInstance(format!("edge ({u}, {v}) outside {n_vertices} vertices")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(Self { n_vertices, edges: set })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Self { n_vertices: n, edges }
    }

    /// Parses an edge list with one 1-based `u v` pair per line. Blank lines and
    /// `#` comments are skipped. The vertex count is the larger of `n_vertices`
    /// and the largest index mentioned.
    pub fn parse_edge_list(text: &str, n_vertices: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_v = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidInstance(format!("line {}: {e}", lineno + 1)))?;
            let [u, v] = nums[..] else {
                return Err(Error::InvalidInstance(format!("line {}: expected two vertex indices", lineno + 1)));
            };
            if u == 0 || v == 0 {
                return Err(Error::InvalidInstance(format!("line {}: vertices are 1-based", lineno + 1)));
            }
            max_v = max_v.max(u).max(v);
            edges.push((u - 1, v - 1));
        }
        Self::new(n_vertices.unwrap_or(0).max(max_v), edges)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    /// Row-major 0/1 adjacency matrix.
    pub fn adjacency(&self) -> Vec<f64> {
        let n = self.n_vertices;
        let mut a = vec![0.0; n * n];
        for &(u, v) in &self.edges {
            a[u * n + v] = 1.0;
            a[v * n + u] = 1.0;
        }
        a
    }
}

/// Pricing decision problem: is there `λ ∈ {0..N}^ℓ` with `Σλ = N` and
/// `λᵀVλ + aᵀλ ≥ K`?
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpInstance {
    pub n_particles: u32,
    pub len: usize,
    pub threshold: f64,
    pub linear: Vec<f64>,
    /// Row-major symmetric ℓ×ℓ matrix.
    pub quadratic: Vec<f64>,
}

impl PdpInstance {
    pub fn new(n_particles: u32, len: usize, threshold: f64, linear: Vec<f64>, quadratic: Vec<f64>) -> Result<Self> {
        if len == 0 || n_particles == 0 {
            return Err(Error::InvalidInstance("need N >= 1 and l >= 1".into()));
        }
        if linear.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: linear.len() });
        }
        if quadratic.len() != len * len {
            return Err(Error::DimensionMismatch { expected: len * len, got: quadratic.len() });
        }
        for i in 0..len {
            for j in i + 1..len {
                if quadratic[i * len + j] != quadratic[j * len + i] {
                    return Err(Error::InvalidInstance(format!("V not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n_particles, len, threshold, linear, quadratic })
    }

    pub fn objective(&self, lambda: &[u32]) -> f64 {
        let l = self.len;
        let mut total = 0.0;
        for i in 0..l {
            let li = f64::from(lambda[i]);
            if li == 0.0 {
                continue;
            }
            total += self.linear[i] * li;
            for (v, &lj) in self.quadratic[i * l..(i + 1) * l].iter().zip(lambda) {
                total += li * v * f64::from(lj);
            }
        }
        total
    }

    /// Plain-text form: `N`, `l`, `K` lines, an `a` line, then `V` followed by ℓ rows.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "N {}", self.n_particles);
        let _ = writeln!(s, "l {}", self.len);
        let _ = writeln!(s, "K {}", self.threshold);
        let a: Vec<String> = self.linear.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "a {}", a.join(" "));
        let _ = writeln!(s, "V");
        for row in self.quadratic.chunks(self.len) {
            let r: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", r.join(" "));
        }
        s
    }
}

/// Maps a clique instance `(G, K')` to the pricing instance with `N = K'`,
/// `ℓ = |V|`, `K = K'(K'−1)`, `a = 0` and `V` the adjacency matrix of `G`.
pub fn clique_to_pdp(g: &Graph, k: usize) -> Result<PdpInstance> {
    if k == 0 || k > g.n_vertices() {
        return Err(Error::InvalidInstance(format!("K' = {k} must lie in 1..={}", g.n_vertices())));
    }
    let n = u32::try_from(k).map_err(|_| Error::InvalidInstance("K' too large".into()))?;
    PdpInstance::new(n, g.n_vertices(), (k * (k - 1)) as f64, vec![0.0; g.n_vertices()], g.adjacency())
}

/// Some feasible `λ` meeting the threshold, found by exhaustive enumeration.
pub fn pdp_witness(inst: &PdpInstance, cap: u128) -> Result<Option<Column>> {
    let candidates = enumerate_columns(inst.len, inst.n_particles, cap)?;
    Ok(candidates.into_iter().find(|c| inst.objective(c.occupancy()) >= inst.threshold))
}

pub fn pdp_bruteforce(inst: &PdpInstance, cap: u128) -> Result<bool> {
    Ok(pdp_witness(inst, cap)?.is_some())
}

/// Largest graph [`cdp_bruteforce`] accepts.
pub const CDP_MAX_VERTICES: usize = 12;

/// Whether `g` has a clique of size at least `k`, by checking every vertex subset.
pub fn cdp_bruteforce(g: &Graph, k: usize) -> Result<bool> {
    let n = g.n_vertices();
    if n > CDP_MAX_VERTICES {
        return Err(Error::CapExceeded { count: 1u128 << n, cap: 1u128 << CDP_MAX_VERTICES });
    }
    let adj: Vec<u32> = (0..n).map(|u| (0..n).filter(|&v| g.has_edge(u, v)).fold(0u32, |m, v| m | (1 << v))).collect();
    for subset in 0u32..(1 << n) {
        if (subset.count_ones() as usize) < k {
            continue;
        }
        let is_clique = (0..n).filter(|&u| subset & (1 << u) != 0).all(|u| {
            let others = subset & !(1 << u);
            adj[u] & others == others
        });
        if is_clique {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Maximum of `λᵀEλ` over `λ ∈ ℕ₀^q` with `Σλ = q`, where `E` has zero
/// diagonal and unit off-diagonal entries, and every maximizer.
pub fn e_matrix_extremum_check(q: u32) -> Result<(u64, Vec<Vec<u32>>)> {
    if !(2..=7).contains(&q) {
        return Err(Error::InvalidInstance(format!("q = {q} outside the enumerable range 2..=7")));
    }
    let mut best = 0u64;
    let mut argmax = Vec::new();
    for col in enumerate_columns(q as usize, q, u128::MAX)? {
        let occ = col.occupancy();
        let mut value = 0u64;
        for i in 0..occ.len() {
            for j in 0..occ.len() {
                if i != j {
                    value += u64::from(occ[i]) * u64::from(occ[j]);
                }
            }
        }
        if value > best {
            best = value;
            argmax.clear();
        }
        if value == best {
            argmax.push(occ.to_vec());
        }
    }
    Ok((best, argmax))
}
