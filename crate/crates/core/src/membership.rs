//! Class membership, maximization and noise thresholds by linear
//! programming.
//!
//! Every class is described by a [`ClassSystem`]: an LP whose first 64
//! "behavior rows" equate some linear image of the variables with the
//! queried behavior. Hull classes (LOCAL, NS₂, S₂) use one weight per
//! generator; T₂ and K₂ use one-way strategy weights for both orderings of
//! each bipartition, tied together by equality of the hybrid terms they
//! build; NS uses the entries themselves.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use num_integer::Integer;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::behavior::{no_signalling_rows, Behavior};
use crate::error::{Error, Result};
use crate::scalar::{parse_scalar, Mode, Rational, Scalar};
use crate::scenario::{entry_index, entry_parts, input_triple, Bipartition, ENTRIES};
use crate::solver::{solve, LpOutcome, LpProblem, Relation, Sparse};
use crate::vertices::{
    local_vertices, ns2_vertices, one_way_labels, s2_generators, DeterministicStrategy, OrderingDirection,
    Provenance, VertexSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalityClass {
    Local,
    Ns2,
    T2,
    K2,
    S2,
    Ns,
}

impl LocalityClass {
    pub const ALL: [LocalityClass; 6] = [
        LocalityClass::Local,
        LocalityClass::Ns2,
        LocalityClass::T2,
        LocalityClass::K2,
        LocalityClass::S2,
        LocalityClass::Ns,
    ];

    /// The inclusion chain LOCAL ⊆ NS₂ ⊆ T₂ ⊆ K₂ ⊆ S₂.
    pub const CHAIN: [LocalityClass; 5] = [
        LocalityClass::Local,
        LocalityClass::Ns2,
        LocalityClass::T2,
        LocalityClass::K2,
        LocalityClass::S2,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            LocalityClass::Local => "local",
            LocalityClass::Ns2 => "ns2",
            LocalityClass::T2 => "t2",
            LocalityClass::K2 => "k2",
            LocalityClass::S2 => "s2",
            LocalityClass::Ns => "ns",
        }
    }

    /// Generators of the hull classes.
    pub fn generators(self) -> Option<&'static VertexSet> {
        match self {
            LocalityClass::Local => Some(local_vertices()),
            LocalityClass::Ns2 => Some(ns2_vertices()),
            LocalityClass::S2 => Some(s2_generators()),
            _ => None,
        }
    }

    /// Whether every member is no-signalling.
    pub fn is_no_signalling(self) -> bool {
        self != LocalityClass::S2
    }
}

impl fmt::Display for LocalityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for LocalityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        LocalityClass::ALL
            .into_iter()
            .find(|c| c.tag() == t)
            .ok_or_else(|| Error::Parse(format!("unknown class {s:?} (expected local, ns2, t2, k2, s2 or ns)")))
    }
}

/// What an LP column stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variable {
    /// Weight of a hull generator (index into the class's vertex set).
    Generator(usize),
    /// Weight of one-way strategy `strategy` (0..256) in `direction`.
    OneWay { direction: OrderingDirection, strategy: u16 },
    /// Behavior entry (NS class).
    Entry(usize),
    /// Visibility of the target in a threshold LP.
    Visibility,
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Generator(i) => write!(f, "q[{i}]"),
            Variable::OneWay { direction, strategy } => {
                write!(f, "q[{}:{direction}][{}]", direction.bipartition, one_way_strategy(*direction, *strategy))
            }
            Variable::Entry(e) => write!(f, "p[{e}]"),
            Variable::Visibility => f.write_str("visibility"),
        }
    }
}

/// The deterministic strategy behind a one-way weight.
pub fn one_way_strategy(direction: OrderingDirection, strategy: u16) -> DeterministicStrategy {
    match one_way_labels(direction).nth(strategy as usize) {
        Some(Provenance::Deterministic(s)) => s,
        _ => unreachable!("one-way labels are deterministic"),
    }
}

/// Entry indices (one per input triple) where a deterministic strategy
/// puts probability 1.
fn support(s: &DeterministicStrategy) -> [usize; 8] {
    std::array::from_fn(|i| {
        let x = input_triple(i);
        entry_index(x, s.outcomes(x))
    })
}

/// LP template of a class over the 64-entry behavior space.
#[derive(Debug, Clone)]
pub struct ClassSystem<T> {
    pub class: LocalityClass,
    pub lp: LpProblem<T>,
    pub variables: Vec<Variable>,
    /// Row equating entry `e` of the represented behavior with its rhs.
    pub behavior_rows: Vec<usize>,
}

impl<T: Scalar> ClassSystem<T> {
    /// Sets the behavior rows' right-hand side.
    pub fn set_behavior(&mut self, b: &Behavior<T>) {
        for (e, &row) in self.behavior_rows.iter().enumerate() {
            self.lp.set_rhs(row, b.entries()[e].clone());
        }
    }

    /// Coefficient of each variable's image on behavior entry `e`.
    pub fn behavior_images(&self) -> Vec<Sparse<T>> {
        let mut images: Vec<Sparse<T>> = vec![Vec::new(); self.variables.len()];
        for (e, &row) in self.behavior_rows.iter().enumerate() {
            for (j, v) in &self.lp.rows()[row].coeffs {
                images[*j].push((e, v.clone()));
            }
        }
        images
    }

    fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> ClassSystem<U> {
        ClassSystem {
            class: self.class,
            lp: self.lp.map(f),
            variables: self.variables.clone(),
            behavior_rows: self.behavior_rows.clone(),
        }
    }
}

fn hull_system(class: LocalityClass, set: &VertexSet) -> ClassSystem<Rational> {
    let n = set.len();
    let mut lp = LpProblem::new(n);
    let mut rows: Vec<Sparse<Rational>> = vec![Vec::new(); ENTRIES];
    for (j, v) in set.points.iter().enumerate() {
        for (e, val) in v.behavior.entries().iter().enumerate() {
            if !val.is_zero() {
                rows[e].push((j, val.clone()));
            }
        }
    }
    let behavior_rows = rows
        .into_iter()
        .map(|r| lp.add_row(r, Relation::Eq, Rational::zero()))
        .collect();
    lp.add_row((0..n).map(|j| (j, Rational::one())).collect(), Relation::Eq, Rational::one());
    ClassSystem { class, lp, variables: (0..n).map(Variable::Generator).collect(), behavior_rows }
}

fn one_way_index(direction: OrderingDirection) -> usize {
    let dir = if direction == OrderingDirection::forward(direction.bipartition) { 0 } else { 1 };
    (direction.bipartition.index() * 2 + dir) * 256
}

const ONE_WAY_VARS: usize = 3 * 2 * 256;

/// One-way strategy variables for both orderings of every bipartition.
fn one_way_variables() -> Vec<(Variable, [usize; 8], u8)> {
    let mut vars = Vec::with_capacity(ONE_WAY_VARS);
    for bp in Bipartition::ALL {
        for direction in OrderingDirection::both(bp) {
            debug_assert_eq!(vars.len(), one_way_index(direction));
            for k in 0..256u16 {
                let s = one_way_strategy(direction, k);
                vars.push((Variable::OneWay { direction, strategy: k }, support(&s), s.tables[2]));
            }
        }
    }
    vars
}

/// T₂ (`coupled = true`) or K₂ system: hybrid terms `P^{k}` with one
/// decomposition per ordering; T₂ additionally equates the per-λ masses of
/// both orderings.
fn ordered_system(coupled: bool) -> ClassSystem<Rational> {
    let one_way = one_way_variables();
    let mut lp = LpProblem::new(one_way.len());
    let variables: Vec<Variable> = one_way.iter().map(|(v, _, _)| *v).collect();
    let one = Rational::one;
    let mut rows: Vec<Sparse<Rational>> = vec![Vec::new(); ENTRIES];
    for bp in Bipartition::ALL {
        let base = one_way_index(OrderingDirection::forward(bp));
        for (k, (_, supp, _)) in one_way[base..base + 256].iter().enumerate() {
            for &e in supp {
                rows[e].push((base + k, one()));
            }
        }
    }
    let behavior_rows = rows
        .into_iter()
        .map(|r| lp.add_row(r, Relation::Eq, Rational::zero()))
        .collect();
    for bp in Bipartition::ALL {
        let fwd = one_way_index(OrderingDirection::forward(bp));
        let bwd = one_way_index(OrderingDirection::backward(bp));
        // Both orderings build the same hybrid term.
        let mut rows: Vec<Sparse<Rational>> = vec![Vec::new(); ENTRIES];
        for k in 0..256 {
            for &e in &one_way[fwd + k].1 {
                rows[e].push((fwd + k, one()));
            }
            for &e in &one_way[bwd + k].1 {
                rows[e].push((bwd + k, -one()));
            }
        }
        for r in rows {
            lp.add_row(r, Relation::Eq, Rational::zero());
        }
        if coupled {
            for lambda in 0..4u8 {
                let mut row = Vec::new();
                for k in 0..256 {
                    if one_way[fwd + k].2 == lambda {
                        row.push((fwd + k, one()));
                    }
                    if one_way[bwd + k].2 == lambda {
                        row.push((bwd + k, -one()));
                    }
                }
                lp.add_row(row, Relation::Eq, Rational::zero());
            }
        }
    }
    let mass: Sparse<Rational> = Bipartition::ALL
        .into_iter()
        .flat_map(|bp| {
            let base = one_way_index(OrderingDirection::forward(bp));
            (base..base + 256).map(|j| (j, Rational::one()))
        })
        .collect();
    lp.add_row(mass, Relation::Eq, one());
    let class = if coupled { LocalityClass::T2 } else { LocalityClass::K2 };
    ClassSystem { class, lp, variables, behavior_rows }
}

fn ns_system() -> ClassSystem<Rational> {
    let mut lp = LpProblem::new(ENTRIES);
    let behavior_rows = (0..ENTRIES)
        .map(|e| lp.add_row(vec![(e, Rational::one())], Relation::Eq, Rational::zero()))
        .collect();
    for x in 0..8 {
        let row = (0..8).map(|o| (x * 8 + o, Rational::one())).collect();
        lp.add_row(row, Relation::Eq, Rational::one());
    }
    for row in no_signalling_rows() {
        let row = row.into_iter().map(|(e, v)| (e, Rational::from(BigInt::from(v)))).collect();
        lp.add_row(row, Relation::Eq, Rational::zero());
    }
    ClassSystem {
        class: LocalityClass::Ns,
        lp,
        variables: (0..ENTRIES).map(Variable::Entry).collect(),
        behavior_rows,
    }
}

/// NS₂ through one-way weights: as T₂, but each λ-conditioned bipartite
/// part must be the same in both orderings.
pub fn ns2_constraint_system<T: Scalar>() -> ClassSystem<T> {
    NS2_CONSTRAINTS.map(T::from_rational)
}

fn build_ns2_constraints() -> ClassSystem<Rational> {
    let one_way = one_way_variables();
    let mut lp = LpProblem::new(one_way.len());
    let one = Rational::one;
    let mut rows: Vec<Sparse<Rational>> = vec![Vec::new(); ENTRIES];
    for bp in Bipartition::ALL {
        let base = one_way_index(OrderingDirection::forward(bp));
        for (k, (_, supp, _)) in one_way[base..base + 256].iter().enumerate() {
            for &e in supp {
                rows[e].push((base + k, one()));
            }
        }
    }
    let behavior_rows = rows
        .into_iter()
        .map(|r| lp.add_row(r, Relation::Eq, Rational::zero()))
        .collect();
    for bp in Bipartition::ALL {
        let (i, j) = bp.pair();
        let t = bp.third().index();
        // Pair table index: 8·x_i + 4·x_j + 2·o_i + o_j, per λ.
        let pair_entry = |e: usize| {
            let (x, o) = entry_parts(e);
            let idx = 8 * x[i.index()] + 4 * x[j.index()] + 2 * o[i.index()] + o[j.index()];
            (idx as usize, x[t])
        };
        let mut eq: Vec<Sparse<Rational>> = vec![Vec::new(); 4 * 16];
        for (sign, direction) in [(1, OrderingDirection::forward(bp)), (-1, OrderingDirection::backward(bp))] {
            let base = one_way_index(direction);
            for (k, (_, supp, lambda)) in one_way[base..base + 256].iter().enumerate() {
                for &e in supp {
                    // Each pair cell appears once per third-party input; keep z = 0.
                    let (idx, z) = pair_entry(e);
                    if z == 0 {
                        eq[*lambda as usize * 16 + idx].push((base + k, Rational::from_i64(sign)));
                    }
                }
            }
        }
        for r in eq {
            lp.add_row(r, Relation::Eq, Rational::zero());
        }
    }
    let mass: Sparse<Rational> = Bipartition::ALL
        .into_iter()
        .flat_map(|bp| {
            let base = one_way_index(OrderingDirection::forward(bp));
            (base..base + 256).map(|j| (j, Rational::one()))
        })
        .collect();
    lp.add_row(mass, Relation::Eq, one());
    ClassSystem {
        class: LocalityClass::Ns2,
        lp,
        variables: one_way.iter().map(|(v, _, _)| *v).collect(),
        behavior_rows,
    }
}

static SYSTEMS: LazyLock<Vec<ClassSystem<Rational>>> = LazyLock::new(|| {
    LocalityClass::ALL
        .into_iter()
        .map(|class| match class {
            LocalityClass::Local | LocalityClass::Ns2 | LocalityClass::S2 => {
                hull_system(class, class.generators().expect("hull class"))
            }
            LocalityClass::T2 => ordered_system(true),
            LocalityClass::K2 => ordered_system(false),
            LocalityClass::Ns => ns_system(),
        })
        .collect()
});

static NS2_CONSTRAINTS: LazyLock<ClassSystem<Rational>> = LazyLock::new(build_ns2_constraints);

/// Constraint system of a class, with zero behavior right-hand side.
pub fn build_system<T: Scalar>(class: LocalityClass) -> ClassSystem<T> {
    let sys = &SYSTEMS[LocalityClass::ALL.iter().position(|&c| c == class).expect("known class")];
    sys.map(T::from_rational)
}

/// A member's decomposition.
#[derive(Debug, Clone)]
pub struct DecompositionCertificate<T> {
    pub class: LocalityClass,
    /// Nonzero variable values.
    pub weights: Vec<(Variable, T)>,
}

impl<T: Scalar> DecompositionCertificate<T> {
    /// Σ over the first ordering of each bipartition (or over generators).
    pub fn reconstruct(&self) -> Behavior<T> {
        let mut p = vec![T::zero(); ENTRIES];
        for (var, w) in &self.weights {
            add_image(&mut p, self.class, var, w, true);
        }
        Behavior::new(p).expect("64 entries")
    }

    /// Hybrid term of a bipartition as built from one ordering.
    pub fn hybrid(&self, bipartition: Bipartition, first_ordering: bool) -> Vec<T> {
        let mut p = vec![T::zero(); ENTRIES];
        for (var, w) in &self.weights {
            let belongs = match var {
                Variable::OneWay { direction, .. } => direction.bipartition == bipartition,
                Variable::Generator(i) => generator_bipartition(self.class, *i) == Some(bipartition),
                _ => false,
            };
            if belongs {
                add_image(&mut p, self.class, var, w, first_ordering);
            }
        }
        p
    }

    /// Checks weights, mass, ordering consistency and reconstruction.
    pub fn verify(&self, b: &Behavior<T>, tol: f64) -> Result<()> {
        let fail = |m: String| Err(Error::InvariantViolation(m));
        if self.weights.iter().any(|(_, w)| w.is_negative_tol(tol)) {
            return fail("negative weight".into());
        }
        let mut mass = T::zero();
        for (var, w) in &self.weights {
            match var {
                Variable::Generator(_) => mass = mass + w.clone(),
                Variable::OneWay { direction, .. } if *direction == OrderingDirection::forward(direction.bipartition) => {
                    mass = mass + w.clone()
                }
                _ => {}
            }
        }
        if self.class != LocalityClass::Ns && !(mass.clone() - T::one()).is_zero_tol(tol) {
            return fail(format!("total weight {mass:?} is not 1"));
        }
        if matches!(self.class, LocalityClass::T2 | LocalityClass::K2 | LocalityClass::Ns2)
            && self.weights.iter().any(|(v, _)| matches!(v, Variable::OneWay { .. }))
        {
            for bp in Bipartition::ALL {
                let a = self.hybrid(bp, true);
                let c = self.hybrid(bp, false);
                if a.iter().zip(&c).any(|(x, y)| !(x.clone() - y.clone()).is_zero_tol(tol)) {
                    return fail(format!("orderings of {bp} disagree"));
                }
                if self.class == LocalityClass::T2 {
                    let masses = self.lambda_masses(bp);
                    if masses.0.iter().zip(&masses.1).any(|(x, y)| !(x.clone() - y.clone()).is_zero_tol(tol)) {
                        return fail(format!("per-λ masses of {bp} disagree"));
                    }
                }
            }
        }
        let rec = self.reconstruct();
        if rec.entries().iter().zip(b.entries()).any(|(x, y)| !(x.clone() - y.clone()).is_zero_tol(tol)) {
            return fail("decomposition does not reproduce the behavior".into());
        }
        Ok(())
    }

    /// Third-party strategy masses of both orderings of a bipartition.
    pub fn lambda_masses(&self, bipartition: Bipartition) -> (Vec<T>, Vec<T>) {
        let mut fwd = vec![T::zero(); 4];
        let mut bwd = vec![T::zero(); 4];
        for (var, w) in &self.weights {
            if let Variable::OneWay { direction, strategy } = var {
                if direction.bipartition != bipartition {
                    continue;
                }
                let l = (strategy & 3) as usize;
                if *direction == OrderingDirection::forward(bipartition) {
                    fwd[l] = fwd[l].clone() + w.clone();
                } else {
                    bwd[l] = bwd[l].clone() + w.clone();
                }
            }
        }
        (fwd, bwd)
    }
}

fn generator_bipartition(class: LocalityClass, i: usize) -> Option<Bipartition> {
    class.generators().and_then(|g| g.points[i].provenance[0].bipartition())
}

fn add_image<T: Scalar>(p: &mut [T], class: LocalityClass, var: &Variable, w: &T, first_ordering: bool) {
    match var {
        Variable::Generator(i) => {
            let g = class.generators().expect("hull class");
            for (e, v) in g.points[*i].behavior.entries().iter().enumerate() {
                if !v.is_zero() {
                    p[e].add_mul_assign(w, &T::from_rational(v));
                }
            }
        }
        Variable::OneWay { direction, strategy } => {
            let forward = *direction == OrderingDirection::forward(direction.bipartition);
            if forward == first_ordering {
                for e in support(&one_way_strategy(*direction, *strategy)) {
                    p[e] = p[e].clone() + w.clone();
                }
            }
        }
        Variable::Entry(e) => p[*e] = p[*e].clone() + w.clone(),
        Variable::Visibility => {}
    }
}

/// Linear functional `F·P ≤ offset` valid on a class and violated by a
/// queried behavior.
#[derive(Debug, Clone)]
pub struct SeparatingFunctional<T> {
    pub coefficients: Vec<T>,
    pub offset: T,
    /// `F·b − offset` on the queried behavior.
    pub gap: T,
}

impl<T: Scalar> SeparatingFunctional<T> {
    pub fn value(&self, b: &Behavior<T>) -> T {
        b.dot(&self.coefficients)
    }

    /// Largest value over the class, by generator scan or by LP.
    pub fn class_maximum(&self, class: LocalityClass) -> Result<T> {
        if let Some(g) = class.generators() {
            let mut best: Option<T> = None;
            for v in g.behaviors() {
                let val = dot_rational(&self.coefficients, v);
                if best.as_ref().is_none_or(|b| val > *b) {
                    best = Some(val);
                }
            }
            return Ok(best.expect("nonempty"));
        }
        let coeffs: Vec<(usize, T)> = self.coefficients.iter().cloned().enumerate().collect();
        Ok(maximize_linear(&coeffs, class)?.value)
    }

    /// Checks `F·b > offset` and `max_class F ≤ offset`.
    pub fn verify(&self, b: &Behavior<T>, class: LocalityClass, tol: f64) -> Result<()> {
        let gap = self.value(b) - self.offset.clone();
        if !gap.is_positive_tol(tol) {
            return Err(Error::InvariantViolation(format!("functional does not separate: gap {gap:?}")));
        }
        let max = self.class_maximum(class)?;
        if (max.clone() - self.offset.clone()).is_positive_tol(tol) {
            return Err(Error::InvariantViolation(format!(
                "functional reaches {max:?} on the class, above its offset {:?}",
                self.offset
            )));
        }
        Ok(())
    }
}

fn dot_rational<T: Scalar>(coeffs: &[T], v: &Behavior<Rational>) -> T {
    let mut s = T::zero();
    for (c, p) in coeffs.iter().zip(v.entries()) {
        if !p.is_zero() {
            s.add_mul_assign(c, &T::from_rational(p));
        }
    }
    s
}

/// Rescales to coprime integers (rational) or unit max-norm (double).
fn normalize_functional<T: Scalar>(coefficients: Vec<T>, offset: T) -> (Vec<T>, T) {
    if T::MODE == Mode::Rational {
        let exact: Vec<Rational> = coefficients
            .iter()
            .chain(std::iter::once(&offset))
            .map(Scalar::to_rational)
            .collect();
        let lcm = exact.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
        let ints: Vec<BigInt> = exact.iter().map(|r| (r * Rational::from(lcm.clone())).to_integer()).collect();
        let gcd = ints.iter().fold(BigInt::zero(), |acc, v| acc.gcd(v));
        if gcd.is_zero() {
            return (coefficients, offset);
        }
        let mut scaled: Vec<T> = ints.iter().map(|v| T::from_rational(&Rational::from(v / &gcd))).collect();
        let offset = scaled.pop().expect("offset entry");
        (scaled, offset)
    } else {
        let max = coefficients.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max);
        if max == 0.0 {
            return (coefficients, offset);
        }
        let s = T::from_f64(1.0 / max);
        (coefficients.into_iter().map(|v| v * s.clone()).collect(), offset * s)
    }
}

/// Membership verdict with its certificate.
#[derive(Debug, Clone)]
pub enum Verdict<T> {
    Member(DecompositionCertificate<T>),
    Nonmember(SeparatingFunctional<T>),
}

impl<T: Scalar> Verdict<T> {
    pub fn is_member(&self) -> bool {
        matches!(self, Verdict::Member(_))
    }
}

fn certificate_from<T: Scalar>(sys: &ClassSystem<T>, x: &[T]) -> DecompositionCertificate<T> {
    let weights = sys
        .variables
        .iter()
        .zip(x)
        .filter(|(v, w)| !w.is_zero_tol(0.0) && **v != Variable::Visibility)
        .map(|(v, w)| (*v, w.clone()))
        .collect();
    DecompositionCertificate { class: sys.class, weights }
}

/// Splits a row multiplier vector into the behavior part and the offset
/// contributed by every other row (`β = −Σ f_i rhs_i`).
fn functional_from<T: Scalar>(sys: &ClassSystem<T>, f: &[T], b: &Behavior<T>) -> SeparatingFunctional<T> {
    let coefficients: Vec<T> = sys.behavior_rows.iter().map(|&r| f[r].clone()).collect();
    let mut is_behavior = vec![false; sys.lp.num_rows()];
    for &r in &sys.behavior_rows {
        is_behavior[r] = true;
    }
    let mut offset = T::zero();
    for (i, row) in sys.lp.rows().iter().enumerate() {
        if !is_behavior[i] && !row.rhs.is_zero_tol(0.0) {
            offset.sub_mul_assign(&f[i], &row.rhs);
        }
    }
    let (coefficients, offset) = normalize_functional(coefficients, offset);
    let gap = b.dot(&coefficients) - offset.clone();
    SeparatingFunctional { coefficients, offset, gap }
}

/// Decides membership of `b` in `class`.
pub fn classify<T: Scalar>(b: &Behavior<T>, class: LocalityClass) -> Result<Verdict<T>> {
    let mut sys = build_system::<T>(class);
    sys.set_behavior(b);
    match solve(&sys.lp)? {
        LpOutcome::Optimal { primal, .. } => Ok(Verdict::Member(certificate_from(&sys, &primal))),
        LpOutcome::Infeasible { farkas, .. } => Ok(Verdict::Nonmember(functional_from(&sys, &farkas, b))),
        LpOutcome::Unbounded { .. } => Err(Error::InvariantViolation("feasibility LP reported unbounded".into())),
    }
}

/// Optimum of a linear objective over a class.
#[derive(Clone)]
pub struct Maximum<T> {
    pub value: T,
    pub maximizer: Behavior<T>,
    pub certificate: DecompositionCertificate<T>,
}

/// Maximizes `Σ c_e P_e` (sparse over the 64 entries) over a class. The
/// S₂ hull is intersected with the no-signalling subspace so that values
/// of expressions written in correlators are well defined.
pub fn maximize_linear<T: Scalar>(coeffs: &[(usize, T)], class: LocalityClass) -> Result<Maximum<T>> {
    let mut sys = build_system::<T>(class);
    let images = sys.behavior_images();
    let mut dense = vec![T::zero(); ENTRIES];
    for (e, c) in coeffs {
        dense[*e] = dense[*e].clone() + c.clone();
    }
    // Same system without the behavior rows; the objective acts on their images.
    let mut lp = LpProblem::new(sys.lp.num_vars());
    let mut is_behavior = vec![false; sys.lp.num_rows()];
    for &r in &sys.behavior_rows {
        is_behavior[r] = true;
    }
    for (i, row) in sys.lp.rows().iter().enumerate() {
        if !is_behavior[i] {
            lp.add_row(row.coeffs.clone(), row.relation, row.rhs.clone());
        }
    }
    if class == LocalityClass::S2 {
        for ns in no_signalling_rows() {
            let mut row: Sparse<T> = Vec::new();
            for (j, img) in images.iter().enumerate() {
                let mut s = T::zero();
                for (e, v) in img {
                    if let Some((_, k)) = ns.iter().find(|(idx, _)| idx == e) {
                        s.add_mul_assign(v, &T::from_i64(*k));
                    }
                }
                if !s.is_zero_tol(0.0) {
                    row.push((j, s));
                }
            }
            lp.add_row(row, Relation::Eq, T::zero());
        }
    }
    for (j, img) in images.iter().enumerate() {
        let mut s = T::zero();
        for (e, v) in img {
            s.add_mul_assign(v, &dense[*e]);
        }
        lp.set_objective(j, s);
    }
    sys.lp = lp;
    match solve(&sys.lp)? {
        LpOutcome::Optimal { value, primal, .. } => {
            let certificate = certificate_from(&sys, &primal);
            let mut p = vec![T::zero(); ENTRIES];
            for (j, img) in images.iter().enumerate() {
                if primal[j].is_zero_tol(0.0) {
                    continue;
                }
                for (e, v) in img {
                    p[*e].add_mul_assign(&primal[j], v);
                }
            }
            Ok(Maximum { value, maximizer: Behavior::new(p)?, certificate })
        }
        other => Err(Error::InvariantViolation(format!("class LP is {}", other.status()))),
    }
}

/// Largest value of a linear objective over the generators of a hull
/// class, with the best generator index.
pub fn maximize_scan<T: Scalar>(coeffs: &[(usize, T)], class: LocalityClass) -> Option<(T, usize)> {
    let g = class.generators()?;
    let mut best: Option<(T, usize)> = None;
    for (i, v) in g.behaviors().enumerate() {
        let mut s = T::zero();
        for (e, c) in coeffs {
            let p = &v.entries()[*e];
            if !p.is_zero() {
                s.add_mul_assign(c, &T::from_rational(p));
            }
        }
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, i));
        }
    }
    best
}

/// Largest visibility of a target against white noise inside a class.
#[derive(Debug, Clone)]
pub struct Threshold<T> {
    pub p: T,
    /// Decomposition of the boundary behavior.
    pub certificate: DecompositionCertificate<T>,
    /// Functional supporting the class at the boundary point (absent when
    /// the target itself is a member).
    pub functional: Option<SeparatingFunctional<T>>,
}

/// Solves `max p` subject to `p·b + (1−p)·uniform ∈ class`, `0 ≤ p ≤ 1`.
pub fn threshold<T: Scalar>(b: &Behavior<T>, class: LocalityClass) -> Result<Threshold<T>> {
    let mut sys = build_system::<T>(class);
    let u = Behavior::<T>::uniform();
    sys.set_behavior(&u);
    let pv = sys.lp.add_var();
    sys.variables.push(Variable::Visibility);
    for (e, &row) in sys.behavior_rows.iter().enumerate() {
        let d = b.entries()[e].clone() - u.entries()[e].clone();
        sys.lp.add_coefficient(row, pv, -d);
    }
    sys.lp.set_upper(pv, T::one());
    sys.lp.set_objective(pv, T::one());
    match solve(&sys.lp)? {
        LpOutcome::Optimal { value, primal, dual, .. } => {
            let certificate = certificate_from(&sys, &primal);
            let functional = if value < T::one() {
                // y·A_j ≥ 0 on class columns gives −y_beh·P ≤ Σ_{others} y_i rhs_i.
                let neg: Vec<T> = dual.iter().map(|v| -v.clone()).collect();
                let boundary = b.mix(&u, &value)?;
                Some(functional_from(&sys, &neg, &boundary))
            } else {
                None
            };
            Ok(Threshold { p: value, certificate, functional })
        }
        other => Err(Error::InvariantViolation(format!("threshold LP is {}", other.status()))),
    }
}

/// Candidate visibility from a functional: where `F` crosses its offset on
/// the segment from uniform to `b`. `None` if `F(b) ≤ offset`.
pub fn visibility_from_functional<T: Scalar>(f: &SeparatingFunctional<T>, b: &Behavior<T>) -> Option<T> {
    let u = Behavior::<T>::uniform();
    let fu = f.value(&u);
    let fb = f.value(b);
    let den = fb - fu.clone();
    if !(f.offset.clone() - fu.clone()).is_positive_tol(0.0) || !den.is_positive_tol(0.0) {
        return None;
    }
    let p = (f.offset.clone() - fu) / den;
    (p < T::one()).then_some(p)
}

/// Extremality check: generator `i` of a hull class lies outside the hull
/// of the others.
pub fn is_extremal(class: LocalityClass, i: usize) -> Result<bool> {
    let g = class.generators().ok_or_else(|| Error::InvariantViolation("not a hull class".into()))?;
    let mut sys = build_system::<Rational>(class);
    sys.set_behavior(&g.points[i].behavior);
    sys.lp.set_upper(i, Rational::zero());
    Ok(solve(&sys.lp)?.status() == crate::solver::LpStatus::Infeasible)
}

/// Text form of a verdict and its certificate, one JSON object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateFile {
    pub class: LocalityClass,
    pub mode: Mode,
    pub member: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<WeightRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<FunctionalRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightRecord {
    pub variable: Variable,
    pub weight: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalRecord {
    pub coefficients: Vec<String>,
    pub offset: String,
    pub gap: String,
}

impl CertificateFile {
    pub fn new<T: Scalar>(class: LocalityClass, verdict: &Verdict<T>) -> Self {
        match verdict {
            Verdict::Member(c) => CertificateFile {
                class,
                mode: T::MODE,
                member: true,
                weights: c
                    .weights
                    .iter()
                    .map(|(variable, w)| WeightRecord { variable: *variable, weight: w.to_text() })
                    .collect(),
                functional: None,
            },
            Verdict::Nonmember(f) => CertificateFile {
                class,
                mode: T::MODE,
                member: false,
                weights: Vec::new(),
                functional: Some(FunctionalRecord {
                    coefficients: f.coefficients.iter().map(Scalar::to_text).collect(),
                    offset: f.offset.to_text(),
                    gap: f.gap.to_text(),
                }),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuilds the verdict; the mode must match `T`.
    pub fn to_verdict<T: Scalar>(&self) -> Result<Verdict<T>> {
        if self.mode != T::MODE {
            return Err(Error::Parse(format!("certificate is in {:?} mode", self.mode)));
        }
        let num = |t: &str| parse_scalar::<T>(t).ok_or_else(|| Error::Parse(format!("bad number {t:?}")));
        if self.member {
            let weights = self
                .weights
                .iter()
                .map(|w| Ok((w.variable, num(&w.weight)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Verdict::Member(DecompositionCertificate { class: self.class, weights }))
        } else {
            let f = self
                .functional
                .as_ref()
                .ok_or_else(|| Error::Parse("nonmember certificate without functional".into()))?;
            if f.coefficients.len() != ENTRIES {
                return Err(Error::DimensionMismatch(format!("functional has {} coefficients", f.coefficients.len())));
            }
            Ok(Verdict::Nonmember(SeparatingFunctional {
                coefficients: f.coefficients.iter().map(|c| num(c)).collect::<Result<_>>()?,
                offset: num(&f.offset)?,
                gap: num(&f.gap)?,
            }))
        }
    }
}

impl<T: Scalar> fmt::Display for SeparatingFunctional<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero_tol(0.0))
            .map(|(e, c)| format!("{}·p[{e}]", c.to_text()))
            .collect();
        write!(f, "{} <= {}", terms.join(" + "), self.offset.to_text())
    }
}
