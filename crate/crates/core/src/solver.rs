//! Two-phase revised simplex over any [`Scalar`], with primal, dual and
//! Farkas certificates.
//!
//! Rational solves are warm-started from the final basis of a double
//! solve; the exact phase then re-derives everything from that basis and
//! keeps pivoting with Bland's rule until it is exactly optimal, so the
//! double pass only affects speed, never the answer.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{inverse, sparse_solve};
use crate::scalar::{Mode, Scalar};

/// Sparse row or column: `(index, value)` pairs.
pub type Sparse<T> = Vec<(usize, T)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint<T> {
    pub coeffs: Sparse<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// `maximize c·x` subject to linear rows and `0 ≤ x ≤ upper`.
#[derive(Debug, Clone)]
pub struct LpProblem<T> {
    num_vars: usize,
    objective: Vec<T>,
    rows: Vec<Constraint<T>>,
    upper: Vec<Option<T>>,
}

impl<T: Scalar> LpProblem<T> {
    pub fn new(num_vars: usize) -> Self {
        LpProblem {
            num_vars,
            objective: vec![T::zero(); num_vars],
            rows: Vec::new(),
            upper: vec![None; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Constraint<T>] {
        &self.rows
    }

    pub fn objective(&self) -> &[T] {
        &self.objective
    }

    pub fn upper_bounds(&self) -> &[Option<T>] {
        &self.upper
    }

    pub fn set_objective(&mut self, var: usize, value: T) {
        self.objective[var] = value;
    }

    pub fn clear_objective(&mut self) {
        self.objective = vec![T::zero(); self.num_vars];
    }

    pub fn set_upper(&mut self, var: usize, value: T) {
        self.upper[var] = Some(value);
    }

    /// Adds a variable (with zero objective) and returns its index.
    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.objective.push(T::zero());
        self.upper.push(None);
        self.num_vars - 1
    }

    /// Adds a row and returns its index. Zero coefficients are dropped and
    /// repeated indices are summed.
    pub fn add_row(&mut self, coeffs: Sparse<T>, relation: Relation, rhs: T) -> usize {
        let mut merged: Sparse<T> = Vec::with_capacity(coeffs.len());
        let mut sorted = coeffs;
        sorted.sort_by_key(|(j, _)| *j);
        for (j, v) in sorted {
            match merged.last_mut() {
                Some((k, acc)) if *k == j => *acc = acc.clone() + v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|(_, v)| !v.is_zero_tol(0.0));
        self.rows.push(Constraint { coeffs: merged, relation, rhs });
        self.rows.len() - 1
    }

    pub fn set_rhs(&mut self, row: usize, rhs: T) {
        self.rows[row].rhs = rhs;
    }

    /// Adds `coef · var` to an existing row.
    pub fn add_coefficient(&mut self, row: usize, var: usize, coef: T) {
        let r = &mut self.rows[row];
        match r.coeffs.binary_search_by_key(&var, |(j, _)| *j) {
            Ok(pos) => {
                let v = r.coeffs[pos].1.clone() + coef;
                if v.is_zero_tol(0.0) {
                    r.coeffs.remove(pos);
                } else {
                    r.coeffs[pos].1 = v;
                }
            }
            Err(pos) => {
                if !coef.is_zero_tol(0.0) {
                    r.coeffs.insert(pos, (var, coef));
                }
            }
        }
    }

    /// Same problem in another arithmetic.
    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> LpProblem<U> {
        LpProblem {
            num_vars: self.num_vars,
            objective: self.objective.iter().map(&f).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| Constraint {
                    coeffs: r.coeffs.iter().map(|(j, v)| (*j, f(v))).collect(),
                    relation: r.relation,
                    rhs: f(&r.rhs),
                })
                .collect(),
            upper: self.upper.iter().map(|u| u.as_ref().map(&f)).collect(),
        }
    }

    fn check_dimensions(&self) -> Result<()> {
        if self.objective.len() != self.num_vars || self.upper.len() != self.num_vars {
            return Err(Error::DimensionMismatch("objective or bounds length".into()));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if let Some((j, _)) = r.coeffs.iter().find(|(j, _)| *j >= self.num_vars) {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} references variable {j} of {}",
                    self.num_vars
                )));
            }
        }
        Ok(())
    }

    /// `Σ a_ij x_j` for every row.
    pub fn row_activity(&self, x: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|r| {
                let mut s = T::zero();
                for (j, v) in &r.coeffs {
                    s.add_mul_assign(v, &x[*j]);
                }
                s
            })
            .collect()
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        let mut s = T::zero();
        for (c, v) in self.objective.iter().zip(x) {
            if !c.is_zero_tol(0.0) {
                s.add_mul_assign(c, v);
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

/// Result of a solve together with the certificate for its status.
#[derive(Debug, Clone)]
pub enum LpOutcome<T> {
    /// `dual` has one entry per row, `bound_dual` one per variable (zero
    /// where no upper bound is set). They satisfy
    /// `Σ_i dual_i a_ij + bound_dual_j ≥ c_j`, sign conditions per relation
    /// and `dual·b + bound_dual·u = value`.
    Optimal { value: T, primal: Vec<T>, dual: Vec<T>, bound_dual: Vec<T> },
    /// `Σ_i f_i a_ij + g_j ≤ 0` for every variable, `f·b + g·u > 0`,
    /// `f_i ≤ 0` on `Le` rows, `f_i ≥ 0` on `Ge` rows, `g ≤ 0`.
    Infeasible { farkas: Vec<T>, bound_farkas: Vec<T> },
    /// A feasible point and a ray `d ≥ 0` with `A d = 0` on equality rows,
    /// the right sign on inequality rows and `c·d > 0`.
    Unbounded { primal: Vec<T>, ray: Vec<T> },
}

impl<T: Scalar> LpOutcome<T> {
    pub fn status(&self) -> LpStatus {
        match self {
            LpOutcome::Optimal { .. } => LpStatus::Optimal,
            LpOutcome::Infeasible { .. } => LpStatus::Infeasible,
            LpOutcome::Unbounded { .. } => LpStatus::Unbounded,
        }
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn primal(&self) -> Option<&[T]> {
        match self {
            LpOutcome::Optimal { primal, .. } | LpOutcome::Unbounded { primal, .. } => Some(primal),
            LpOutcome::Infeasible { .. } => None,
        }
    }

    /// Re-checks the certificate against the problem by re-multiplication.
    /// Exact for rationals; `tol` is used for doubles.
    pub fn verify(&self, lp: &LpProblem<T>, tol: f64) -> Result<()> {
        let fail = |msg: String| Err(Error::InvariantViolation(msg));
        match self {
            LpOutcome::Optimal { value, primal, dual, bound_dual } => {
                verify_primal(lp, primal, tol)?;
                let obj = lp.objective_value(primal);
                if !(obj.clone() - value.clone()).is_zero_tol(tol) {
                    return fail(format!("objective {obj:?} differs from value {value:?}"));
                }
                verify_dual(lp, dual, bound_dual, value, tol)
            }
            LpOutcome::Infeasible { farkas, bound_farkas } => verify_farkas(lp, farkas, bound_farkas, tol),
            LpOutcome::Unbounded { primal, ray } => {
                verify_primal(lp, primal, tol)?;
                if ray.iter().any(|v| v.is_negative_tol(tol)) {
                    return fail("ray has a negative entry".into());
                }
                let act = lp.row_activity(ray);
                for (r, a) in lp.rows.iter().zip(&act) {
                    let bad = match r.relation {
                        Relation::Eq => !a.is_zero_tol(tol),
                        Relation::Le => a.is_positive_tol(tol),
                        Relation::Ge => a.is_negative_tol(tol),
                    };
                    if bad {
                        return fail("ray leaves the feasible cone".into());
                    }
                }
                for (u, d) in lp.upper.iter().zip(ray) {
                    if u.is_some() && !d.is_zero_tol(tol) {
                        return fail("ray moves a bounded variable".into());
                    }
                }
                if !lp.objective_value(ray).is_positive_tol(tol) {
                    return fail("ray does not improve the objective".into());
                }
                Ok(())
            }
        }
    }
}

/// Checks `x` against every row and bound.
pub fn verify_primal<T: Scalar>(lp: &LpProblem<T>, x: &[T], tol: f64) -> Result<()> {
    let fail = |msg: String| Err(Error::InvariantViolation(msg));
    if x.len() != lp.num_vars {
        return fail(format!("primal has {} entries, expected {}", x.len(), lp.num_vars));
    }
    for (j, v) in x.iter().enumerate() {
        if v.is_negative_tol(tol) {
            return fail(format!("x[{j}] = {v:?} is negative"));
        }
        if let Some(u) = &lp.upper[j] {
            if (v.clone() - u.clone()).is_positive_tol(tol) {
                return fail(format!("x[{j}] = {v:?} exceeds its bound {u:?}"));
            }
        }
    }
    for (i, (r, a)) in lp.rows.iter().zip(lp.row_activity(x)).enumerate() {
        let gap = a - r.rhs.clone();
        let bad = match r.relation {
            Relation::Eq => !gap.is_zero_tol(tol),
            Relation::Le => gap.is_positive_tol(tol),
            Relation::Ge => gap.is_negative_tol(tol),
        };
        if bad {
            return fail(format!("row {i} violated by {gap:?}"));
        }
    }
    Ok(())
}

fn verify_dual<T: Scalar>(lp: &LpProblem<T>, y: &[T], z: &[T], value: &T, tol: f64) -> Result<()> {
    let fail = |msg: String| Err(Error::InvariantViolation(msg));
    if y.len() != lp.rows.len() || z.len() != lp.num_vars {
        return fail("dual has the wrong length".into());
    }
    let mut reduced = transpose_times(lp, y);
    for (j, r) in reduced.iter_mut().enumerate() {
        *r = r.clone() + z[j].clone() - lp.objective[j].clone();
        if r.is_negative_tol(tol) {
            return fail(format!("dual constraint of variable {j} violated by {r:?}"));
        }
        if z[j].is_negative_tol(tol) || (lp.upper[j].is_none() && !z[j].is_zero_tol(tol)) {
            return fail(format!("bound dual {j} has the wrong sign"));
        }
    }
    let mut obj = T::zero();
    for (i, r) in lp.rows.iter().enumerate() {
        let bad = match r.relation {
            Relation::Eq => false,
            Relation::Le => y[i].is_negative_tol(tol),
            Relation::Ge => y[i].is_positive_tol(tol),
        };
        if bad {
            return fail(format!("dual {i} has the wrong sign"));
        }
        obj.add_mul_assign(&y[i], &r.rhs);
    }
    for (j, u) in lp.upper.iter().enumerate() {
        if let Some(u) = u {
            obj.add_mul_assign(&z[j], u);
        }
    }
    if !(obj.clone() - value.clone()).is_zero_tol(tol * (1.0 + value.to_f64().abs())) {
        return fail(format!("dual objective {obj:?} differs from {value:?}"));
    }
    Ok(())
}

/// Checks a Farkas certificate of infeasibility.
pub fn verify_farkas<T: Scalar>(lp: &LpProblem<T>, f: &[T], g: &[T], tol: f64) -> Result<()> {
    let fail = |msg: String| Err(Error::InvariantViolation(msg));
    if f.len() != lp.rows.len() || g.len() != lp.num_vars {
        return fail("certificate has the wrong length".into());
    }
    let combo = transpose_times(lp, f);
    for j in 0..lp.num_vars {
        if (combo[j].clone() + g[j].clone()).is_positive_tol(tol) {
            return fail(format!("column {j} has positive combination"));
        }
        if g[j].is_positive_tol(tol) || (lp.upper[j].is_none() && !g[j].is_zero_tol(tol)) {
            return fail(format!("bound multiplier {j} has the wrong sign"));
        }
    }
    let mut rhs = T::zero();
    for (i, r) in lp.rows.iter().enumerate() {
        let bad = match r.relation {
            Relation::Eq => false,
            Relation::Le => f[i].is_positive_tol(tol),
            Relation::Ge => f[i].is_negative_tol(tol),
        };
        if bad {
            return fail(format!("multiplier {i} has the wrong sign"));
        }
        rhs.add_mul_assign(&f[i], &r.rhs);
    }
    for (j, u) in lp.upper.iter().enumerate() {
        if let Some(u) = u {
            rhs.add_mul_assign(&g[j], u);
        }
    }
    if !rhs.is_positive_tol(tol) {
        return fail(format!("combined right-hand side {rhs:?} is not positive"));
    }
    Ok(())
}

/// `Aᵀ y` over the original rows.
pub fn transpose_times<T: Scalar>(lp: &LpProblem<T>, y: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); lp.num_vars];
    for (r, yi) in lp.rows.iter().zip(y) {
        if yi.is_zero_tol(0.0) {
            continue;
        }
        for (j, v) in &r.coeffs {
            out[*j].add_mul_assign(yi, v);
        }
    }
    out
}

/// Tuning knobs of [`solve_with`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Warm-start rational solves from a double solve.
    pub warm_start: bool,
    pub max_iterations: usize,
    /// Pivot, feasibility and optimality tolerance in double mode.
    pub tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { warm_start: true, max_iterations: 200_000, tolerance: 1e-9 }
    }
}

pub fn solve<T: Scalar>(lp: &LpProblem<T>) -> Result<LpOutcome<T>> {
    solve_with(lp, &SolveOptions::default())
}

pub fn solve_with<T: Scalar>(lp: &LpProblem<T>, opts: &SolveOptions) -> Result<LpOutcome<T>> {
    lp.check_dimensions()?;
    let std = Standard::new(lp);
    let mut start = None;
    if T::MODE == Mode::Rational && opts.warm_start {
        let approx = lp.map(|v| v.to_f64());
        let approx_std = Standard::new(&approx);
        // A failed double pass only costs time; the exact pass starts cold.
        if let Ok(run) = Engine::new(&approx_std, None, opts).and_then(|e| e.run()) {
            if let Some(result) = std.certify_basis(&run.basis) {
                return Ok(std.outcome(lp, Run { result, basis: run.basis }));
            }
            start = Some(run.basis);
        }
    }
    let engine = match start {
        Some(basis) => Engine::new(&std, Some(basis), opts).or_else(|_| Engine::new(&std, None, opts))?,
        None => Engine::new(&std, None, opts)?,
    };
    let outcome = std.outcome(lp, engine.run()?);
    if T::MODE == Mode::Double {
        outcome
            .verify(lp, 1e-7)
            .map_err(|e| Error::NumericalBreakdown(e.to_string()))?;
    }
    Ok(outcome)
}

/// `Ax = b, x ≥ 0` with `b ≥ 0`: original variables, then one slack per
/// inequality row, then one slack per upper bound. Rows with negative
/// right-hand side are negated.
struct Standard<T> {
    m: usize,
    n_orig: usize,
    n_rows_orig: usize,
    cols: Vec<Sparse<T>>,
    b: Vec<T>,
    c: Vec<T>,
    negated: Vec<bool>,
    /// Upper-bound row of each variable.
    bound_row: Vec<Option<usize>>,
}

impl<T: Scalar> Standard<T> {
    fn new(lp: &LpProblem<T>) -> Self {
        let n = lp.num_vars;
        let mut cols: Vec<Sparse<T>> = vec![Vec::new(); n];
        let mut b = Vec::new();
        let mut negated = Vec::new();
        for (i, r) in lp.rows.iter().enumerate() {
            let neg = r.rhs.is_negative_tol(0.0);
            let s = |v: &T| if neg { -v.clone() } else { v.clone() };
            for (j, v) in &r.coeffs {
                cols[*j].push((i, s(v)));
            }
            match r.relation {
                Relation::Eq => {}
                Relation::Le => cols.push(vec![(i, s(&T::one()))]),
                Relation::Ge => cols.push(vec![(i, s(&-T::one()))]),
            }
            b.push(s(&r.rhs));
            negated.push(neg);
        }
        let mut bound_row = vec![None; n];
        for j in 0..n {
            if let Some(u) = &lp.upper[j] {
                let i = b.len();
                let neg = u.is_negative_tol(0.0);
                let one = if neg { -T::one() } else { T::one() };
                cols[j].push((i, one.clone()));
                cols.push(vec![(i, one)]);
                b.push(if neg { -u.clone() } else { u.clone() });
                negated.push(neg);
                bound_row[j] = Some(i);
            }
        }
        let mut c = vec![T::zero(); cols.len()];
        c[..n].clone_from_slice(&lp.objective);
        Standard { m: b.len(), n_orig: n, n_rows_orig: lp.rows.len(), cols, b, c, negated, bound_row }
    }

    fn ncols(&self) -> usize {
        self.cols.len()
    }

    fn column(&self, j: usize) -> Sparse<T> {
        if j < self.ncols() {
            self.cols[j].clone()
        } else {
            vec![(j - self.ncols(), T::one())]
        }
    }

    /// Exact check of a candidate final basis with two sparse solves.
    /// Returns the certified result when the basis is primal feasible and
    /// either phase-2 optimal, or phase-1 optimal with positive
    /// infeasibility; `None` means more pivoting is needed.
    fn certify_basis(&self, basis: &[usize]) -> Option<RunResult<T>> {
        let m = self.m;
        if basis.len() != m {
            return None;
        }
        let mut rows: Vec<Sparse<T>> = vec![Vec::new(); m];
        let mut cols_t: Vec<Sparse<T>> = Vec::with_capacity(m);
        for (pos, &j) in basis.iter().enumerate() {
            let col = self.column(j);
            for (i, v) in &col {
                rows[*i].push((pos, v.clone()));
            }
            cols_t.push(col);
        }
        let rhs: Vec<Sparse<T>> = self
            .b
            .iter()
            .map(|v| if v.is_zero_tol(0.0) { Vec::new() } else { vec![(0, v.clone())] })
            .collect();
        let xb = sparse_solve(rows, rhs, 0.0)?;
        let value = |r: &Sparse<T>| r.first().map_or_else(T::zero, |(_, v)| v.clone());
        let xb: Vec<T> = xb.iter().map(value).collect();
        if xb.iter().any(|v| v.is_negative_tol(0.0)) {
            return None;
        }
        let artificial_positive = basis
            .iter()
            .zip(&xb)
            .any(|(&j, v)| j >= self.ncols() && v.is_positive_tol(0.0));
        let phase_one = artificial_positive;
        let costs: Vec<Sparse<T>> = basis
            .iter()
            .map(|&j| {
                let c = if j >= self.ncols() {
                    if phase_one { -T::one() } else { T::zero() }
                } else if phase_one {
                    T::zero()
                } else {
                    self.c[j].clone()
                };
                if c.is_zero_tol(0.0) { Vec::new() } else { vec![(0, c)] }
            })
            .collect();
        let y = sparse_solve(cols_t, costs, 0.0)?;
        let y: Vec<T> = y.iter().map(value).collect();
        let mut is_basic = vec![false; self.ncols()];
        for &j in basis {
            if j < self.ncols() {
                is_basic[j] = true;
            }
        }
        for j in 0..self.ncols() {
            if is_basic[j] {
                continue;
            }
            let mut d = if phase_one { T::zero() } else { self.c[j].clone() };
            for (i, v) in &self.cols[j] {
                d.sub_mul_assign(&y[*i], v);
            }
            if d.is_positive_tol(0.0) {
                return None;
            }
        }
        if phase_one {
            return Some(RunResult::Infeasible { y });
        }
        let mut x = vec![T::zero(); self.ncols()];
        for (&j, v) in basis.iter().zip(xb) {
            if j < self.ncols() {
                x[j] = v;
            }
        }
        Some(RunResult::Optimal { x, y })
    }

    /// Splits a vector over standard rows into original rows and bounds,
    /// undoing row negation.
    fn split_rows(&self, y: &[T]) -> (Vec<T>, Vec<T>) {
        let unneg = |i: usize| if self.negated[i] { -y[i].clone() } else { y[i].clone() };
        let rows = (0..self.n_rows_orig).map(unneg).collect();
        let bounds = self
            .bound_row
            .iter()
            .map(|r| r.map_or_else(T::zero, unneg))
            .collect();
        (rows, bounds)
    }

    fn outcome(&self, lp: &LpProblem<T>, run: Run<T>) -> LpOutcome<T> {
        match run.result {
            RunResult::Optimal { x, y } => {
                let primal = x[..self.n_orig].to_vec();
                let (dual, bound_dual) = self.split_rows(&y);
                let value = lp.objective_value(&primal);
                LpOutcome::Optimal { value, primal, dual, bound_dual }
            }
            RunResult::Infeasible { y } => {
                let f: Vec<T> = y.iter().map(|v| -v.clone()).collect();
                let (farkas, bound_farkas) = self.split_rows(&f);
                LpOutcome::Infeasible { farkas, bound_farkas }
            }
            RunResult::Unbounded { x, ray } => LpOutcome::Unbounded {
                primal: x[..self.n_orig].to_vec(),
                ray: ray[..self.n_orig].to_vec(),
            },
        }
    }
}

enum RunResult<T> {
    /// Full standard-form point and duals over standard rows.
    Optimal { x: Vec<T>, y: Vec<T> },
    /// Phase-1 duals.
    Infeasible { y: Vec<T> },
    Unbounded { x: Vec<T>, ray: Vec<T> },
}

struct Run<T> {
    result: RunResult<T>,
    basis: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

/// Dense-inverse revised simplex state. Columns `ncols..ncols+m` are the
/// artificials.
struct Engine<'a, T> {
    std: &'a Standard<T>,
    basis: Vec<usize>,
    /// Row of each basic column, `usize::MAX` when nonbasic.
    position: Vec<usize>,
    binv: Vec<Vec<T>>,
    xb: Vec<T>,
    tol: f64,
    max_iterations: usize,
    iterations: usize,
    since_refactor: usize,
}

const REFACTOR_EVERY: usize = 100;
const DEGENERATE_SWITCH: usize = 1000;

impl<'a, T: Scalar> Engine<'a, T> {
    fn new(std: &'a Standard<T>, basis: Option<Vec<usize>>, opts: &SolveOptions) -> Result<Self> {
        let m = std.m;
        let total = std.ncols() + m;
        let tol = if T::MODE == Mode::Rational { 0.0 } else { opts.tolerance };
        let basis = basis.unwrap_or_else(|| (std.ncols()..total).collect());
        if basis.len() != m || basis.iter().any(|&j| j >= total) {
            return Err(Error::DimensionMismatch("warm-start basis".into()));
        }
        let mut position = vec![usize::MAX; total];
        for (i, &j) in basis.iter().enumerate() {
            if position[j] != usize::MAX {
                return Err(Error::DimensionMismatch("repeated basic column".into()));
            }
            position[j] = i;
        }
        let mut e = Engine {
            std,
            basis,
            position,
            binv: Vec::new(),
            xb: Vec::new(),
            tol,
            max_iterations: opts.max_iterations,
            iterations: 0,
            since_refactor: 0,
        };
        e.refactor()?;
        if e.xb.iter().any(|v| v.is_negative_tol(e.tol)) {
            return Err(Error::NumericalBreakdown("starting basis is not feasible".into()));
        }
        Ok(e)
    }

    fn column(&self, j: usize) -> Sparse<T> {
        if j < self.std.ncols() {
            self.std.cols[j].clone()
        } else {
            vec![(j - self.std.ncols(), T::one())]
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.std.ncols()
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.std.m;
        let artificial_basis = self.basis.iter().enumerate().all(|(i, &j)| j == self.std.ncols() + i);
        self.binv = if artificial_basis {
            (0..m)
                .map(|i| (0..m).map(|k| if i == k { T::one() } else { T::zero() }).collect())
                .collect()
        } else {
            // Row-major basis matrix: bmat[row][pos].
            let mut bmat = vec![vec![T::zero(); m]; m];
            for (pos, &j) in self.basis.iter().enumerate() {
                for (i, v) in self.column(j) {
                    bmat[i][pos] = v;
                }
            }
            inverse(&bmat, if T::MODE == Mode::Rational { 0.0 } else { 1e-13 })
                .ok_or_else(|| Error::NumericalBreakdown("singular basis".into()))?
        };
        self.xb = self.mat_vec(&self.std.b);
        if T::MODE == Mode::Double {
            for v in self.xb.iter_mut() {
                if v.is_negative_tol(self.tol) {
                    continue;
                }
                if v.is_zero_tol(self.tol) {
                    *v = T::zero();
                }
            }
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn mat_vec(&self, v: &[T]) -> Vec<T> {
        let nz: Vec<usize> = (0..v.len()).filter(|&k| !v[k].is_zero_tol(0.0)).collect();
        self.binv
            .iter()
            .map(|row| {
                let mut s = T::zero();
                for &k in &nz {
                    if !row[k].is_zero_tol(0.0) {
                        s.add_mul_assign(&row[k], &v[k]);
                    }
                }
                s
            })
            .collect()
    }

    /// `B⁻¹ a_j`.
    fn ftran(&self, j: usize) -> Vec<T> {
        let col = self.column(j);
        self.binv
            .iter()
            .map(|row| {
                let mut s = T::zero();
                for (k, v) in &col {
                    if !row[*k].is_zero_tol(0.0) {
                        s.add_mul_assign(&row[*k], v);
                    }
                }
                s
            })
            .collect()
    }

    fn cost(&self, j: usize, phase: Phase) -> T {
        match phase {
            Phase::One => {
                if self.is_artificial(j) {
                    -T::one()
                } else {
                    T::zero()
                }
            }
            Phase::Two => {
                if self.is_artificial(j) {
                    T::zero()
                } else {
                    self.std.c[j].clone()
                }
            }
        }
    }

    /// `c_B B⁻¹`.
    fn duals(&self, phase: Phase) -> Vec<T> {
        let m = self.std.m;
        let mut y = vec![T::zero(); m];
        for (i, &j) in self.basis.iter().enumerate() {
            let c = self.cost(j, phase);
            if c.is_zero_tol(0.0) {
                continue;
            }
            for (k, v) in self.binv[i].iter().enumerate() {
                if !v.is_zero_tol(0.0) {
                    y[k].add_mul_assign(&c, v);
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[T], phase: Phase) -> T {
        let mut d = self.cost(j, phase);
        for (i, v) in self.column(j) {
            if !y[i].is_zero_tol(0.0) {
                d.sub_mul_assign(&y[i], &v);
            }
        }
        d
    }

    fn objective(&self, phase: Phase) -> T {
        let mut s = T::zero();
        for (i, &j) in self.basis.iter().enumerate() {
            let c = self.cost(j, phase);
            if !c.is_zero_tol(0.0) {
                s.add_mul_assign(&c, &self.xb[i]);
            }
        }
        s
    }

    /// Entering column, `None` at optimality.
    fn price(&self, y: &[T], phase: Phase, bland: bool) -> Option<usize> {
        let n = self.std.ncols();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if self.position[j] != usize::MAX {
                continue;
            }
            let d = self.reduced_cost(j, y, phase);
            if !d.is_positive_tol(self.tol) {
                continue;
            }
            if bland {
                return Some(j);
            }
            let score = d.to_f64();
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Leaving row for entering direction `u`, `None` if unbounded.
    fn ratio_test(&self, u: &[T], phase: Phase, bland: bool) -> Option<usize> {
        if T::MODE == Mode::Double {
            return self.harris_ratio_test(u, phase);
        }
        let mut best: Option<(usize, T)> = None;
        for (i, ui) in u.iter().enumerate() {
            let j = self.basis[i];
            // Artificials stuck at zero in phase 2 must leave, whatever the sign.
            let pinned = phase == Phase::Two && self.is_artificial(j) && !ui.is_zero_tol(self.tol);
            if !pinned && !ui.is_positive_tol(self.tol) {
                continue;
            }
            let ratio = if pinned { T::zero() } else { self.xb[i].clone() / ui.clone() };
            let replace = match &best {
                None => true,
                Some((bi, br)) => {
                    let diff = ratio.clone() - br.clone();
                    if diff.is_negative_tol(if bland { 0.0 } else { 1e-12 }) {
                        true
                    } else if diff.is_positive_tol(if bland { 0.0 } else { 1e-12 }) {
                        false
                    } else if bland || T::MODE == Mode::Rational {
                        j < self.basis[*bi]
                    } else {
                        ui.to_f64().abs() > u[*bi].to_f64().abs()
                    }
                }
            };
            if replace {
                best = Some((i, ratio));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Two-pass ratio test for doubles: bound the step with slightly
    /// relaxed values, then take the largest pivot within that bound.
    fn harris_ratio_test(&self, u: &[T], phase: Phase) -> Option<usize> {
        const RELAX: f64 = 1e-9;
        let mut pinned: Option<(usize, f64)> = None;
        let mut bound = f64::INFINITY;
        for (i, ui) in u.iter().enumerate() {
            let uf = ui.to_f64();
            if phase == Phase::Two && self.is_artificial(self.basis[i]) && uf.abs() > self.tol {
                if pinned.is_none_or(|(_, best)| uf.abs() > best) {
                    pinned = Some((i, uf.abs()));
                }
            } else if uf > self.tol {
                bound = bound.min((self.xb[i].to_f64().max(0.0) + RELAX) / uf);
            }
        }
        if let Some((i, _)) = pinned {
            return Some(i);
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, ui) in u.iter().enumerate() {
            let uf = ui.to_f64();
            if uf > self.tol && self.xb[i].to_f64().max(0.0) / uf <= bound && best.is_none_or(|(_, b)| uf > b) {
                best = Some((i, uf));
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, r: usize, j: usize, u: &[T]) -> Result<()> {
        if T::MODE == Mode::Double && self.xb[r].is_negative_tol(0.0) {
            self.xb[r] = T::zero();
        }
        let m = self.std.m;
        let pivot = u[r].clone();
        let theta = self.xb[r].clone() / pivot.clone();
        for i in 0..m {
            if i == r || u[i].is_zero_tol(0.0) {
                continue;
            }
            let xi = self.xb[i].clone();
            self.xb[i] = xi - theta.clone() * u[i].clone();
        }
        self.xb[r] = theta;
        let inv = T::one() / pivot;
        let row_r: Vec<T> = self.binv[r]
            .iter()
            .map(|v| if v.is_zero_tol(0.0) { T::zero() } else { v.clone() * inv.clone() })
            .collect();
        let nz: Vec<usize> = (0..m).filter(|&k| !row_r[k].is_zero_tol(0.0)).collect();
        for i in 0..m {
            if i == r || u[i].is_zero_tol(0.0) {
                continue;
            }
            let factor = u[i].clone();
            let row = &mut self.binv[i];
            for &k in &nz {
                row[k].sub_mul_assign(&factor, &row_r[k]);
            }
        }
        self.binv[r] = row_r;
        let leaving = self.basis[r];
        self.position[leaving] = usize::MAX;
        self.position[j] = r;
        self.basis[r] = j;
        self.iterations += 1;
        self.since_refactor += 1;
        if T::MODE == Mode::Double {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            for v in self.xb.iter_mut() {
                if v.is_zero_tol(self.tol) {
                    *v = T::zero();
                } else if v.is_negative_tol(self.tol) {
                    return Err(Error::NumericalBreakdown("basic variable turned negative".into()));
                }
            }
        }
        Ok(())
    }

    /// Runs one phase to optimality. Returns the unbounded direction if any.
    fn optimize(&mut self, phase: Phase) -> Result<Option<(usize, Vec<T>)>> {
        let exact = T::MODE == Mode::Rational;
        let mut degenerate = 0usize;
        let mut y = self.duals(phase);
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Error::NumericalBreakdown(format!(
                    "iteration limit {} reached",
                    self.max_iterations
                )));
            }
            let bland = exact || degenerate >= DEGENERATE_SWITCH;
            let Some(j) = self.price(&y, phase, bland) else {
                return Ok(None);
            };
            let u = self.ftran(j);
            let Some(r) = self.ratio_test(&u, phase, bland) else {
                return Ok(Some((j, u)));
            };
            if self.xb[r].is_zero_tol(self.tol) {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let d = self.reduced_cost(j, &y, phase);
            self.pivot(r, j, &u)?;
            if self.since_refactor == 0 {
                y = self.duals(phase);
            } else {
                // y' = y + d_j · (row r of the new inverse).
                for (yk, v) in y.iter_mut().zip(&self.binv[r]) {
                    if !v.is_zero_tol(0.0) {
                        yk.add_mul_assign(&d, v);
                    }
                }
            }
        }
    }

    /// Replaces basic artificials at zero by structural columns where
    /// possible; the rest sit on redundant rows.
    fn drive_out_artificials(&mut self) -> Result<()> {
        for r in 0..self.std.m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let row = self.binv[r].clone();
            let candidate = (0..self.std.ncols()).find_map(|j| {
                if self.position[j] != usize::MAX {
                    return None;
                }
                let mut s = T::zero();
                for (i, v) in &self.std.cols[j] {
                    if !row[*i].is_zero_tol(0.0) {
                        s.add_mul_assign(&row[*i], v);
                    }
                }
                // Prefer a well-sized pivot in double mode.
                (!s.is_zero_tol(if T::MODE == Mode::Rational { 0.0 } else { 1e-7 })).then_some(j)
            });
            if let Some(j) = candidate {
                let u = self.ftran(j);
                self.pivot(r, j, &u)?;
            }
        }
        Ok(())
    }

    fn point(&self) -> Vec<T> {
        let mut x = vec![T::zero(); self.std.ncols()];
        for (i, &j) in self.basis.iter().enumerate() {
            if j < x.len() {
                x[j] = self.xb[i].clone();
            }
        }
        x
    }

    fn run(mut self) -> Result<Run<T>> {
        self.optimize(Phase::One)?;
        let infeasibility = self.objective(Phase::One);
        let scale = 1.0 + self.std.b.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max);
        if infeasibility.is_negative_tol(self.tol * scale) {
            let y = self.duals(Phase::One);
            return Ok(Run { result: RunResult::Infeasible { y }, basis: self.basis });
        }
        self.drive_out_artificials()?;
        if let Some((j, u)) = self.optimize(Phase::Two)? {
            let x = self.point();
            let mut ray = vec![T::zero(); self.std.ncols()];
            ray[j] = T::one();
            for (i, &bj) in self.basis.iter().enumerate() {
                if bj < ray.len() {
                    ray[bj] = -u[i].clone();
                }
            }
            return Ok(Run { result: RunResult::Unbounded { x, ray }, basis: self.basis });
        }
        if T::MODE == Mode::Double {
            // Clean the final point against accumulated drift.
            self.refactor()?;
        }
        let x = self.point();
        let y = self.duals(Phase::Two);
        Ok(Run { result: RunResult::Optimal { x, y }, basis: self.basis })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Rational};

    fn r(n: i64) -> Rational {
        ratio(n, 1)
    }

    #[test]
    fn single_equality() {
        let mut lp = LpProblem::<Rational>::new(1);
        lp.set_objective(0, r(1));
        lp.add_row(vec![(0, r(1))], Relation::Eq, r(1));
        let out = solve(&lp).unwrap();
        assert_eq!(out.value(), Some(&r(1)));
        out.verify(&lp, 0.0).unwrap();
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → 36 at (2, 6).
        for warm in [false, true] {
            let mut lp = LpProblem::<Rational>::new(2);
            lp.set_objective(0, r(3));
            lp.set_objective(1, r(5));
            lp.set_upper(0, r(4));
            lp.add_row(vec![(1, r(2))], Relation::Le, r(12));
            lp.add_row(vec![(0, r(3)), (1, r(2))], Relation::Le, r(18));
            let opts = SolveOptions { warm_start: warm, ..Default::default() };
            let out = solve_with(&lp, &opts).unwrap();
            assert_eq!(out.value(), Some(&r(36)));
            assert_eq!(out.primal().unwrap(), &[r(2), r(6)]);
            out.verify(&lp, 0.0).unwrap();
        }
        let mut lp = LpProblem::<f64>::new(2);
        lp.set_objective(0, 3.0);
        lp.set_objective(1, 5.0);
        lp.set_upper(0, 4.0);
        lp.add_row(vec![(1, 2.0)], Relation::Le, 12.0);
        lp.add_row(vec![(0, 3.0), (1, 2.0)], Relation::Le, 18.0);
        let out = solve(&lp).unwrap();
        assert!((out.value().unwrap() - 36.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_with_certificate() {
        // x + y = 1, x + y ≥ 2.
        let mut lp = LpProblem::<Rational>::new(2);
        lp.add_row(vec![(0, r(1)), (1, r(1))], Relation::Eq, r(1));
        lp.add_row(vec![(0, r(1)), (1, r(1))], Relation::Ge, r(2));
        let out = solve(&lp).unwrap();
        assert_eq!(out.status(), LpStatus::Infeasible);
        out.verify(&lp, 0.0).unwrap();
    }

    #[test]
    fn negative_rhs_and_ge_rows() {
        // max −x s.t. −x ≤ −3 (x ≥ 3), x ≤ 10.
        let mut lp = LpProblem::<Rational>::new(1);
        lp.set_objective(0, r(-1));
        lp.add_row(vec![(0, r(-1))], Relation::Le, r(-3));
        lp.set_upper(0, r(10));
        let out = solve(&lp).unwrap();
        assert_eq!(out.value(), Some(&r(-3)));
        out.verify(&lp, 0.0).unwrap();
    }

    #[test]
    fn unbounded_with_ray() {
        let mut lp = LpProblem::<Rational>::new(2);
        lp.set_objective(0, r(1));
        lp.add_row(vec![(0, r(1)), (1, r(-1))], Relation::Eq, r(0));
        let out = solve(&lp).unwrap();
        assert_eq!(out.status(), LpStatus::Unbounded);
        out.verify(&lp, 0.0).unwrap();
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let mut lp = LpProblem::<Rational>::new(2);
        lp.set_objective(0, r(1));
        lp.add_row(vec![(0, r(1)), (1, r(1))], Relation::Eq, r(1));
        lp.add_row(vec![(0, r(2)), (1, r(2))], Relation::Eq, r(2));
        let out = solve(&lp).unwrap();
        assert_eq!(out.value(), Some(&r(1)));
        out.verify(&lp, 0.0).unwrap();
    }

    #[test]
    fn dimension_errors() {
        let mut lp = LpProblem::<f64>::new(1);
        lp.rows.push(Constraint { coeffs: vec![(3, 1.0)], relation: Relation::Eq, rhs: 1.0 });
        assert!(matches!(solve(&lp), Err(Error::DimensionMismatch(_))));
    }
}
