//! Box-constrained dual quadratic programming for maximal-margin separation.
//!
//! The dual problem maximizes D(α) = Σ α_i − ½ ΣΣ y_i y_j α_i α_j (x_i • x_j)
//! subject to Σ α_i y_i = 0 and 0 ≤ α_i ≤ C. [`solve_dual`] runs sequential
//! minimal optimization, always stepping on the maximal-KKT-violating pair
//! with the analytic two-variable update. [`brute_force_dual`] solves tiny
//! instances exactly by enumerating all 3^l active-set patterns and serves as
//! an independent oracle. [`kkt_violation`] reports the worst first-order
//! optimality residual of any candidate solution.

use serde::Serialize;
use thiserror::Error;

use crate::encoding::{FeatureVector, Label};

/// Largest instance [`brute_force_dual`] accepts (3^l patterns are enumerated).
pub const BRUTE_FORCE_MAX: usize = 8;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("all labels are identical; the dual problem is degenerate")]
    DegenerateProblem,
    #[error("instance of size {size} exceeds the brute-force limit {limit}")]
    InstanceTooLarge { size: usize, limit: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("gram matrix is not symmetric at ({i}, {j})")]
    AsymmetricGram { i: usize, j: usize },
    #[error("gram matrix contains a non-finite entry")]
    NonFiniteGram,
    #[error("box constant must be positive and finite, got {0}")]
    InvalidBox(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

const GRAM_SYMMETRY_TOL: f64 = 1e-9;

/// The dual program data: Gram matrix x_i • x_j, labels y_i, box constant C.
#[derive(Debug, Clone)]
pub struct QpProblem {
    gram: Vec<f64>,
    labels: Vec<Label>,
    c: f64,
    size: usize,
}

impl QpProblem {
    /// Validates and builds a problem from an explicit Gram matrix. The
    /// matrix must be square, finite, and symmetric within 1e-9.
    pub fn new(gram: Vec<Vec<f64>>, labels: Vec<Label>, c: f64) -> Result<Self, QpError> {
        let size = labels.len();
        if size == 0 {
            return Err(QpError::InvalidParameter("empty problem".into()));
        }
        if gram.len() != size || gram.iter().any(|row| row.len() != size) {
            return Err(QpError::DimensionMismatch {
                expected: size,
                found: gram.len(),
            });
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(QpError::InvalidBox(c));
        }
        let mut flat = Vec::with_capacity(size * size);
        for row in &gram {
            for &v in row {
                if !v.is_finite() {
                    return Err(QpError::NonFiniteGram);
                }
                flat.push(v);
            }
        }
        for i in 0..size {
            for j in (i + 1)..size {
                if (flat[i * size + j] - flat[j * size + i]).abs() > GRAM_SYMMETRY_TOL {
                    return Err(QpError::AsymmetricGram { i, j });
                }
            }
        }
        Ok(QpProblem {
            gram: flat,
            labels,
            c,
            size,
        })
    }

    /// Builds the problem from training vectors; the Gram matrix is the
    /// pairwise inner products, computed once and mirrored so it is exactly
    /// symmetric.
    pub fn from_vectors(
        vectors: &[FeatureVector],
        labels: &[Label],
        c: f64,
    ) -> Result<Self, QpError> {
        if vectors.len() != labels.len() {
            return Err(QpError::DimensionMismatch {
                expected: labels.len(),
                found: vectors.len(),
            });
        }
        let size = vectors.len();
        if size == 0 {
            return Err(QpError::InvalidParameter("empty problem".into()));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(QpError::InvalidBox(c));
        }
        let mut gram = vec![0.0; size * size];
        for i in 0..size {
            for j in i..size {
                let dot = dot(vectors[i].components(), vectors[j].components());
                gram[i * size + j] = dot;
                gram[j * size + i] = dot;
            }
        }
        Ok(QpProblem {
            gram,
            labels: labels.to_vec(),
            c,
            size,
        })
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.size + j]
    }

    /// Number of training points l.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn box_constant(&self) -> f64 {
        self.c
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// y_i as a sign.
    #[inline]
    fn y(&self, i: usize) -> f64 {
        self.labels[i].sign()
    }

    /// s_i = Σ_j α_j y_j (x_j • x_i) for every i.
    fn raw_decisions(&self, alphas: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.size];
        for (j, &alpha) in alphas.iter().enumerate() {
            let coef = alpha * self.y(j);
            if coef != 0.0 {
                for (i, si) in s.iter_mut().enumerate() {
                    *si += coef * self.k(j, i);
                }
            }
        }
        s
    }

    /// D(α) = Σ α_i − ½ Σ α_i y_i s_i.
    fn objective(&self, alphas: &[f64], raw: &[f64]) -> f64 {
        let linear: f64 = alphas.iter().sum();
        let quadratic: f64 = alphas
            .iter()
            .zip(raw)
            .enumerate()
            .map(|(i, (&a, &s))| a * self.y(i) * s)
            .sum();
        linear - 0.5 * quadratic
    }
}

/// Multipliers, offset, and diagnostics of one dual solve.
#[derive(Debug, Clone, Serialize)]
pub struct DualSolution {
    pub alphas: Vec<f64>,
    pub offset: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Multiplier values within this distance of a bound count as at-bound when
/// classifying KKT cases; free multipliers sit strictly inside.
fn bound_eps(c: f64) -> f64 {
    1e-9 * c.max(1.0)
}

fn snap_to_bounds(alpha: f64, c: f64, snap: f64) -> f64 {
    if alpha <= snap {
        0.0
    } else if alpha >= c - snap {
        c
    } else {
        alpha
    }
}

// Optimality certificate intervals: every i in `up` forces offset >= F_i and
// every i in `low` forces offset <= F_i, where F_i = y_i - s_i. The solution
// is optimal exactly when max-over-up <= min-over-low. Membership uses the
// same at-bound epsilon as kkt_violation, so the stopping test certifies
// exactly what the diagnostic measures.
fn in_up_set(label: Label, alpha: f64, c: f64, eps: f64) -> bool {
    match label {
        Label::Positive => alpha < c - eps,
        Label::Negative => alpha > eps,
    }
}

fn in_low_set(label: Label, alpha: f64, c: f64, eps: f64) -> bool {
    match label {
        Label::Positive => alpha > eps,
        Label::Negative => alpha < c - eps,
    }
}

/// Recovers the offset b: the mean of F_i = y_i − s_i over free support
/// vectors, or the midpoint of the feasibility interval spanned by the bound
/// points when no multiplier is free.
fn recover_offset(problem: &QpProblem, alphas: &[f64], raw: &[f64]) -> f64 {
    let c = problem.c;
    let eps = bound_eps(c);
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for i in 0..problem.size {
        if alphas[i] > eps && alphas[i] < c - eps {
            free_sum += problem.y(i) - raw[i];
            free_count += 1;
        }
    }
    if free_count > 0 {
        return free_sum / free_count as f64;
    }
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for i in 0..problem.size {
        let f = problem.y(i) - raw[i];
        if in_up_set(problem.labels[i], alphas[i], c, eps) {
            lower = lower.max(f);
        }
        if in_low_set(problem.labels[i], alphas[i], c, eps) {
            upper = upper.min(f);
        }
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}

/// Solves the dual by SMO. Stops once no pair violates optimality beyond an
/// internal threshold chosen so that the returned [`kkt_violation`] is at most
/// `tol`; if the step budget (`max_passes` sweeps of l pair updates) runs out
/// first, the best iterate is returned tagged `converged: false`.
pub fn solve_dual(
    problem: &QpProblem,
    tol: f64,
    max_passes: usize,
) -> Result<DualSolution, QpError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(QpError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if max_passes == 0 {
        return Err(QpError::InvalidParameter(
            "max_passes must be at least 1".into(),
        ));
    }
    let l = problem.size;
    let first = problem.labels[0];
    if problem.labels.iter().all(|&y| y == first) {
        return Err(QpError::DegenerateProblem);
    }
    let c = problem.c;
    // Dividing by max(1, C) keeps the duality gap of a converged run within
    // tol * l even for large C.
    let stop = tol / c.max(1.0);
    let eps = bound_eps(c);
    // Updated multipliers this close to a bound snap onto it exactly, so
    // rounding in the coupled update cannot leave dust multipliers behind.
    let snap = 1e-12 * c;

    let mut alphas = vec![0.0; l];
    let mut raw = vec![0.0; l]; // s_i maintained incrementally
    let budget = max_passes.saturating_mul(l);
    let mut steps = 0usize;
    let mut converged = false;

    loop {
        // Maximal violating pair, lowest index on ties.
        let mut up: Option<(usize, f64)> = None;
        let mut low: Option<(usize, f64)> = None;
        for i in 0..l {
            let f = problem.y(i) - raw[i];
            if in_up_set(problem.labels[i], alphas[i], c, eps)
                && up.is_none_or(|(_, best)| f > best)
            {
                up = Some((i, f));
            }
            if in_low_set(problem.labels[i], alphas[i], c, eps)
                && low.is_none_or(|(_, best)| f < best)
            {
                low = Some((i, f));
            }
        }
        let (Some((i, f_i)), Some((j, f_j))) = (up, low) else {
            converged = true;
            break;
        };
        if f_i - f_j <= stop {
            converged = true;
            break;
        }
        if steps >= budget {
            break;
        }

        let (y_i, y_j) = (problem.y(i), problem.y(j));
        let (a_i, a_j) = (alphas[i], alphas[j]);
        let (lo, hi) = if y_i != y_j {
            ((a_j - a_i).max(0.0), (c + a_j - a_i).min(c))
        } else {
            ((a_i + a_j - c).max(0.0), (a_i + a_j).min(c))
        };
        let eta = problem.k(i, i) + problem.k(j, j) - 2.0 * problem.k(i, j);
        let a_j_new = if eta > 0.0 {
            (a_j + y_j * (f_j - f_i) / eta).clamp(lo, hi)
        } else {
            // Flat direction: the objective is linear along the pair, so the
            // descent endpoint is the box edge in the step direction.
            if y_j > 0.0 {
                lo
            } else {
                hi
            }
        };
        let a_j_new = snap_to_bounds(a_j_new, c, snap);
        let a_i_new = snap_to_bounds((a_i + y_i * y_j * (a_j - a_j_new)).clamp(0.0, c), c, snap);
        let (d_i, d_j) = (a_i_new - a_i, a_j_new - a_j);
        if d_i == 0.0 && d_j == 0.0 {
            break; // stalled below floating-point resolution
        }
        for (k, r) in raw.iter_mut().enumerate() {
            *r += y_i * d_i * problem.k(i, k) + y_j * d_j * problem.k(j, k);
        }
        alphas[i] = a_i_new;
        alphas[j] = a_j_new;
        steps += 1;
    }

    // Recompute the decision sums exactly before deriving b and D(α); the
    // incremental updates accumulate rounding over long runs.
    let raw = problem.raw_decisions(&alphas);
    let offset = recover_offset(problem, &alphas, &raw);
    let objective = problem.objective(&alphas, &raw);
    Ok(DualSolution {
        alphas,
        offset,
        objective,
        iterations: steps,
        converged,
    })
}

/// Exact optimum of an l ≤ 8 instance by active-set enumeration.
///
/// Every multiplier is pinned at 0, pinned at C, or free; for each of the 3^l
/// patterns the free multipliers solve the stationarity system together with
/// the equality constraint, and the best feasible candidate wins. Singular
/// systems are skipped: an optimum with a maximal number of at-bound
/// multipliers always has a nonsingular free system, so no optimal objective
/// is lost.
pub fn brute_force_dual(problem: &QpProblem) -> Result<DualSolution, QpError> {
    let l = problem.size;
    if l > BRUTE_FORCE_MAX {
        return Err(QpError::InstanceTooLarge {
            size: l,
            limit: BRUTE_FORCE_MAX,
        });
    }
    let c = problem.c;
    let feas_eps = 1e-12 * c * l as f64;
    let box_eps = 1e-9 * c.max(1.0);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let patterns = 3usize.pow(l as u32);
    for pattern in 0..patterns {
        let mut digits = pattern;
        let mut free = Vec::new();
        let mut at_c = Vec::new();
        let mut candidate = vec![0.0; l];
        for (i, slot) in candidate.iter_mut().enumerate() {
            match digits % 3 {
                0 => {}
                1 => {
                    at_c.push(i);
                    *slot = c;
                }
                _ => free.push(i),
            }
            digits /= 3;
        }
        let pinned_y_sum: f64 = at_c.iter().map(|&i| c * problem.y(i)).sum();
        if free.is_empty() {
            if pinned_y_sum.abs() > feas_eps {
                continue;
            }
        } else {
            // Stationarity over the free set plus the equality constraint:
            //   Σ_f Q_if α_f + ν y_i = 1 − C Σ_c Q_ic   for i free
            //   Σ_f y_f α_f = −Σ_c y_c C
            let n = free.len() + 1;
            let mut a = vec![vec![0.0; n]; n];
            let mut b = vec![0.0; n];
            for (r, &i) in free.iter().enumerate() {
                for (col, &j) in free.iter().enumerate() {
                    a[r][col] = problem.y(i) * problem.y(j) * problem.k(i, j);
                }
                a[r][n - 1] = problem.y(i);
                b[r] = 1.0
                    - at_c
                        .iter()
                        .map(|&j| c * problem.y(i) * problem.y(j) * problem.k(i, j))
                        .sum::<f64>();
            }
            for (col, &j) in free.iter().enumerate() {
                a[n - 1][col] = problem.y(j);
            }
            b[n - 1] = -pinned_y_sum;
            let Some(solution) = solve_linear(a, b) else {
                continue;
            };
            let mut feasible = true;
            for (idx, &i) in free.iter().enumerate() {
                let v = solution[idx];
                if !v.is_finite() || v < -box_eps || v > c + box_eps {
                    feasible = false;
                    break;
                }
                candidate[i] = v.clamp(0.0, c);
            }
            if !feasible {
                continue;
            }
        }
        let raw = problem.raw_decisions(&candidate);
        let objective = problem.objective(&candidate, &raw);
        if best.as_ref().is_none_or(|(obj, _)| objective > *obj) {
            best = Some((objective, candidate));
        }
    }

    // The all-zero pattern is always feasible, so a candidate exists.
    let (objective, alphas) = best.expect("at least one feasible pattern");
    let raw = problem.raw_decisions(&alphas);
    let offset = recover_offset(problem, &alphas, &raw);
    Ok(DualSolution {
        alphas,
        offset,
        objective,
        iterations: patterns,
        converged: true,
    })
}

/// Gaussian elimination with partial pivoting; `None` when singular.
#[allow(clippy::needless_range_loop)] // rows are indexed in pairs
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    let pivot_eps = 1e-12 * scale;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() <= pivot_eps {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for col in (row + 1)..n {
            sum -= a[row][col] * x[col];
        }
        x[row] = sum / a[row][row];
    }
    Some(x)
}

/// Worst Kuhn–Tucker residual of a candidate solution.
///
/// With f(x_i) = Σ_j α_j y_j (x_j • x_i) + b and m_i = y_i f(x_i):
/// at α_i = 0 the residual is max(0, 1 − m_i), at α_i = C it is
/// max(0, m_i − 1), and strictly between it is |m_i − 1|. A return of 0 means
/// exact satisfaction.
pub fn kkt_violation(problem: &QpProblem, solution: &DualSolution) -> Result<f64, QpError> {
    if solution.alphas.len() != problem.size {
        return Err(QpError::DimensionMismatch {
            expected: problem.size,
            found: solution.alphas.len(),
        });
    }
    let c = problem.c;
    let eps = bound_eps(c);
    let raw = problem.raw_decisions(&solution.alphas);
    let mut worst = 0.0f64;
    for (i, (&s, &alpha)) in raw.iter().zip(&solution.alphas).enumerate() {
        let margin = problem.y(i) * (s + solution.offset);
        let residual = if alpha <= eps {
            (1.0 - margin).max(0.0)
        } else if alpha >= c - eps {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// Debug dump of a solve: multipliers, offset, objective, and residual.
pub fn diagnostics_json(problem: &QpProblem, solution: &DualSolution) -> Result<String, QpError> {
    let violation = kkt_violation(problem, solution)?;
    #[derive(Serialize)]
    struct Diagnostics<'a> {
        alphas: &'a [f64],
        offset: f64,
        objective: f64,
        iterations: usize,
        converged: bool,
        kkt_violation: f64,
    }
    Ok(serde_json::to_string_pretty(&Diagnostics {
        alphas: &solution.alphas,
        offset: solution.offset,
        objective: solution.objective,
        iterations: solution.iterations,
        converged: solution.converged,
        kkt_violation: violation,
    })
    .expect("diagnostics serialize"))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
