//! Spectral radius of sparse nonnegative matrices and the irreducibility /
//! primitivity structure of their positive pattern.

use rayon::prelude::*;
use serde::Serialize;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from rows of `(column, value)` pairs.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                assert!(c < dim, "column {c} out of range for dimension {dim}");
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(_, v)| **v != 0.0)
                        .map(|(c, v)| (c, *v))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |e| (self.col_idx[e], self.values[e]))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.dim]; self.dim];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        out
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }

    fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        let body = |(r, out): (usize, &mut f64)| {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        };
        if self.dim >= 4096 {
            y.par_iter_mut().enumerate().for_each(body);
        } else {
            y.iter_mut().enumerate().for_each(body);
        }
    }

    /// Principal submatrix on `nodes` (in the given order).
    fn principal(&self, nodes: &[usize]) -> SparseMatrix {
        let mut pos = vec![usize::MAX; self.dim];
        for (k, &v) in nodes.iter().enumerate() {
            pos[v] = k;
        }
        Self::from_rows(
            nodes
                .iter()
                .map(|&r| {
                    self.row(r)
                        .filter(|(c, _)| pos[*c] != usize::MAX)
                        .map(|(c, v)| (pos[c], v))
                        .collect()
                })
                .collect(),
        )
    }

    /// Adjacency lists of strictly positive entries.
    fn positive_graph(&self) -> Vec<Vec<usize>> {
        (0..self.dim)
            .map(|r| self.row(r).filter(|(_, v)| *v > 0.0).map(|(c, _)| c).collect())
            .collect()
    }
}

/// Result of a power iteration: `lower ≤ ρ ≤ upper` whenever the iterate
/// stayed strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SpectralEstimate {
    fn exact(v: f64) -> Self {
        Self {
            value: v,
            lower: v,
            upper: v,
            iterations: 0,
            converged: true,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Default iteration budget for the power iteration.
pub const POWER_BUDGET: usize = 100_000;

/// Power iteration on `A + I` from the normalized all-ones vector.
///
/// At each step the Collatz–Wielandt ratios `(Ax)_r / x_r` bracket `ρ(A)`;
/// iteration stops once the bracket is narrower than `tol·ρ`.
fn power_iteration(a: &SparseMatrix, tol: f64, budget: usize) -> SpectralEstimate {
    let n = a.dim;
    let mut x = vec![1.0 / n as f64; n];
    let mut ax = vec![0.0; n];
    let mut best = SpectralEstimate {
        value: f64::NAN,
        lower: 0.0,
        upper: f64::INFINITY,
        iterations: 0,
        converged: false,
    };
    for it in 1..=budget {
        a.mul_into(&x, &mut ax);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (axr, xr) in ax.iter().zip(&x) {
            if *xr <= 0.0 {
                lo = 0.0;
                hi = f64::INFINITY;
                break;
            }
            let q = axr / xr;
            lo = lo.min(q);
            hi = hi.max(q);
        }
        // Both ends are valid bounds on their own, so keep the tightest seen.
        best.lower = best.lower.max(lo);
        best.upper = best.upper.min(hi);
        best.iterations = it;
        best.value = 0.5 * (best.lower + best.upper);
        if best.upper - best.lower <= tol * best.value.max(f64::MIN_POSITIVE) {
            best.converged = true;
            return best;
        }
        let mut norm = 0.0;
        for (xr, axr) in x.iter_mut().zip(&ax) {
            *xr += axr;
            norm += *xr;
        }
        for xr in x.iter_mut() {
            *xr /= norm;
        }
    }
    best
}

/// Spectral radius of a nonnegative matrix to relative accuracy `tol`.
///
/// Reducible matrices are split into strongly connected components and the
/// largest component radius is returned.
pub fn spectral_radius(a: &SparseMatrix, tol: f64) -> SpectralEstimate {
    spectral_radius_with_budget(a, tol, POWER_BUDGET)
}

pub fn spectral_radius_with_budget(a: &SparseMatrix, tol: f64, budget: usize) -> SpectralEstimate {
    assert!(tol > 0.0, "tolerance must be positive");
    assert!(a.is_nonnegative(), "spectral_radius needs a nonnegative matrix");
    let comps = strongly_connected_components(&a.positive_graph());
    if comps.len() == 1 {
        return power_iteration(a, tol, budget);
    }
    let mut best = SpectralEstimate::exact(0.0);
    let mut total_iterations = 0;
    let mut converged = true;
    for comp in comps {
        let est = if comp.len() == 1 {
            let v = comp[0];
            SpectralEstimate::exact(a.row(v).filter(|(c, _)| *c == v).map(|(_, w)| w).sum())
        } else {
            power_iteration(&a.principal(&comp), tol, budget)
        };
        total_iterations += est.iterations;
        converged &= est.converged;
        if est.upper > best.upper || (est.upper == best.upper && est.lower > best.lower) {
            best = SpectralEstimate {
                lower: est.lower.max(best.lower),
                ..est
            };
        } else {
            best.lower = best.lower.max(est.lower);
        }
    }
    best.value = 0.5 * (best.lower + best.upper);
    best.iterations = total_iterations;
    best.converged = converged;
    best
}

/// Tarjan's algorithm without recursion; components in reverse topological
/// order.
pub fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            if *next == 0 && index[v] == UNSEEN {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*next) {
                *next += 1;
                if index[w] == UNSEEN {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("component root is on the stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitivity {
    Primitive,
    IrreducibleNotPrimitive { period: usize },
    Reducible { components: usize },
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Classify the pattern of strictly positive entries.
pub fn primitivity_check(a: &SparseMatrix) -> Primitivity {
    let adj = a.positive_graph();
    let n = adj.len();
    let comps = strongly_connected_components(&adj);
    let has_cycle = n > 1 || adj.first().is_some_and(|r| r.contains(&0));
    if comps.len() != 1 || !has_cycle {
        return Primitivity::Reducible {
            components: comps.len(),
        };
    }
    // Period = gcd over edges (u, v) of level(u) + 1 − level(v), with BFS
    // levels from node 0.
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0]);
    let mut period = 0;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                period = gcd(period, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    if period == 1 {
        Primitivity::Primitive
    } else {
        Primitivity::IrreducibleNotPrimitive { period }
    }
}

/// Whether the `p`-th power of the positive pattern has no zero entry.
/// Dense boolean arithmetic; meant for small matrices.
pub fn pattern_power_is_positive(a: &SparseMatrix, p: u32) -> bool {
    let n = a.dim;
    let adj = a.positive_graph();
    let mut reach: Vec<Vec<bool>> = (0..n).map(|r| (0..n).map(|c| r == c).collect()).collect();
    for _ in 0..p {
        reach = reach
            .iter()
            .map(|row| {
                let mut next = vec![false; n];
                for (u, _) in row.iter().enumerate().filter(|(_, b)| **b) {
                    for &v in &adj[u] {
                        next[v] = true;
                    }
                }
                next
            })
            .collect();
    }
    reach.iter().all(|row| row.iter().all(|b| *b))
}
