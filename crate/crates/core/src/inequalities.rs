//! Bell expressions: two coefficient bases, the relabeling group, the
//! family catalog, and bound/facet checks.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::LazyLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::behavior::Behavior;
use crate::error::{Error, Result};
use crate::linalg::affine_dimension;
use crate::membership::{maximize_linear, maximize_scan, LocalityClass, Maximum};
use crate::scalar::{parse_rational, Rational, Scalar};
use crate::scenario::{all_terms, entry_index, entry_parts, Party, Term, ENTRIES, TERMS};
use crate::vertices::ns2_vertices;

/// A linear functional on behaviors, kept in two bases.
///
/// `correlators` holds one coefficient per term of
/// [`all_terms`]; the unit coefficient is the constant. `probabilities`
/// holds 64 entry coefficients plus `constant`. On no-signalling behaviors
/// both bases evaluate identically. Expressions built from probabilities may
/// carry information the correlator basis cannot see (conditional events at
/// fixed inputs), so evaluation always goes through the probability basis.
#[derive(Clone, PartialEq)]
pub struct BellExpression {
    correlators: Vec<Rational>,
    probabilities: Vec<Rational>,
    constant: Rational,
    pub bounds: Bounds,
}

/// Declared upper bounds of an expression, by class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rational")]
    pub ns2: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rational")]
    pub t2: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rational")]
    pub s2: Option<Rational>,
    /// Best known quantum value, numeric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum: Option<f64>,
    /// Upper bound when the quantum value is not known to be tight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum_upper: Option<f64>,
    /// Where the bounds come from ("catalog", "derived", ...).
    #[serde(skip)]
    pub source: Option<&'static str>,
}

impl Bounds {
    pub fn get(&self, class: LocalityClass) -> Option<&Rational> {
        match class {
            LocalityClass::Ns2 => self.ns2.as_ref(),
            LocalityClass::T2 => self.t2.as_ref(),
            LocalityClass::S2 => self.s2.as_ref(),
            _ => None,
        }
    }
}

mod opt_rational {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::scalar::{parse_rational, Rational, Scalar};

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_str(&r.to_text()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let text: Option<String> = Option::deserialize(d)?;
        text.map(|t| parse_rational(&t).ok_or_else(|| serde::de::Error::custom(format!("bad rational {t:?}"))))
            .transpose()
    }
}

/// A marginal event: for each party, `Some((input, outcome))` or `None`
/// when the party is ignored. `P(A_iB_j)` is
/// `Event::new([Some((i, 0)), Some((j, 0)), None])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event(pub [Option<(u8, u8)>; 3]);

impl Event {
    pub fn new(parts: [Option<(u8, u8)>; 3]) -> Self {
        Event(parts)
    }

    /// Outcome 0 for every listed party, the convention of `P(A_iB_jC_k)`.
    pub fn zeros(inputs: [Option<u8>; 3]) -> Self {
        Event(inputs.map(|x| x.map(|x| (x, 0))))
    }
}

fn lift(correlators: &[Rational]) -> Vec<Rational> {
    let mut p = vec![Rational::zero(); ENTRIES];
    for (t, c) in all_terms().iter().zip(correlators) {
        if t.degree() == 0 || c.is_zero() {
            continue;
        }
        let weight = c / Rational::from_i64(1 << (3 - t.degree()));
        for (e, slot) in p.iter_mut().enumerate() {
            let (x, o) = entry_parts(e);
            if t.matches(x) {
                if t.sign(o) > 0 {
                    *slot += &weight;
                } else {
                    *slot -= &weight;
                }
            }
        }
    }
    p
}

fn project(probabilities: &[Rational], constant: &Rational) -> Vec<Rational> {
    let eighth = Rational::from_ratio(1, 8);
    all_terms()
        .iter()
        .map(|t| {
            let mut s = Rational::zero();
            for (e, c) in probabilities.iter().enumerate() {
                let (x, o) = entry_parts(e);
                if !c.is_zero() && t.matches(x) {
                    if t.sign(o) > 0 {
                        s += c;
                    } else {
                        s -= c;
                    }
                }
            }
            if t.degree() == 0 {
                s * &eighth + constant
            } else {
                s * &eighth
            }
        })
        .collect()
}

impl BellExpression {
    /// From the 27 correlator coefficients in canonical term order.
    pub fn from_correlator_coefficients(correlators: Vec<Rational>) -> Result<Self> {
        if correlators.len() != TERMS {
            return Err(Error::DimensionMismatch(format!("expected {TERMS} coefficients, got {}", correlators.len())));
        }
        let probabilities = lift(&correlators);
        let constant = correlators[0].clone();
        Ok(BellExpression { correlators, probabilities, constant, bounds: Bounds::default() })
    }

    /// From `(term, coefficient)` pairs; repeated terms add up.
    pub fn from_terms<'a>(terms: impl IntoIterator<Item = (Term, &'a Rational)>) -> Self {
        let mut c = vec![Rational::zero(); TERMS];
        for (t, v) in terms {
            c[t.index()] += v;
        }
        Self::from_correlator_coefficients(c).expect("length is fixed")
    }

    /// From 64 probability coefficients and a constant.
    pub fn from_probability_coefficients(probabilities: Vec<Rational>, constant: Rational) -> Result<Self> {
        if probabilities.len() != ENTRIES {
            return Err(Error::DimensionMismatch(format!("expected {ENTRIES} coefficients, got {}", probabilities.len())));
        }
        let correlators = project(&probabilities, &constant);
        Ok(BellExpression { correlators, probabilities, constant, bounds: Bounds::default() })
    }

    /// Sum of weighted marginal events plus a constant. Parties an event
    /// ignores are summed over their outcomes and averaged over their
    /// inputs.
    pub fn from_events(events: &[(Rational, Event)], constant: Rational) -> Self {
        let mut p = vec![Rational::zero(); ENTRIES];
        for (c, ev) in events {
            let missing = ev.0.iter().filter(|s| s.is_none()).count();
            let w = c / Rational::from_i64(1 << missing);
            for (e, slot) in p.iter_mut().enumerate() {
                let (x, o) = entry_parts(e);
                let hit = ev.0.iter().enumerate().all(|(k, s)| s.is_none_or(|(xi, oi)| x[k] == xi && o[k] == oi));
                if hit {
                    *slot += &w;
                }
            }
        }
        Self::from_probability_coefficients(p, constant).expect("length is fixed")
    }

    /// Parses a map of term keys (`"1"`, `"A0"`, `"A1B0C1"`) to rationals.
    pub fn from_term_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = vec![Rational::zero(); TERMS];
        for (k, v) in map {
            let t = Term::parse(k)?;
            let r = parse_rational(v).ok_or_else(|| Error::Parse(format!("bad coefficient {v:?} for {k}")))?;
            c[t.index()] += r;
        }
        Self::from_correlator_coefficients(c)
    }

    /// Nonzero correlator coefficients keyed by term name.
    pub fn to_term_map(&self) -> BTreeMap<String, String> {
        all_terms()
            .iter()
            .zip(&self.correlators)
            .filter(|(_, c)| !c.is_zero())
            .map(|(t, c)| (t.to_string(), c.to_text()))
            .collect()
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn correlator_coefficients(&self) -> &[Rational] {
        &self.correlators
    }

    pub fn coefficient(&self, term: Term) -> &Rational {
        &self.correlators[term.index()]
    }

    pub fn probability_coefficients(&self) -> &[Rational] {
        &self.probabilities
    }

    pub fn constant(&self) -> &Rational {
        &self.constant
    }

    /// Same functional rebuilt from its correlator coefficients alone.
    pub fn to_correlator_basis(&self) -> BellExpression {
        Self::from_correlator_coefficients(self.correlators.clone())
            .expect("length is fixed")
            .with_bounds(self.bounds.clone())
    }

    /// Probability coefficients and the constant.
    pub fn to_probability_basis(&self) -> (Vec<Rational>, Rational) {
        (self.probabilities.clone(), self.constant.clone())
    }

    /// Nonzero probability coefficients as a sparse vector.
    pub fn sparse_probabilities<T: Scalar>(&self) -> Vec<(usize, T)> {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(e, c)| (e, T::from_rational(c)))
            .collect()
    }

    /// Value on any behavior, through the probability basis.
    pub fn evaluate<T: Scalar>(&self, b: &Behavior<T>) -> T {
        let mut acc = T::from_rational(&self.constant);
        for (e, c) in self.probabilities.iter().enumerate() {
            if !c.is_zero() {
                acc.add_mul_assign(&T::from_rational(c), &b.entries()[e]);
            }
        }
        acc
    }

    /// Value through the correlator basis; the behavior must be
    /// no-signalling.
    pub fn evaluate_correlators<T: Scalar>(&self, b: &Behavior<T>) -> Result<T> {
        let corr = b.to_correlators()?;
        let mut acc = T::zero();
        for (c, v) in self.correlators.iter().zip(corr.values()) {
            if !c.is_zero() {
                acc.add_mul_assign(&T::from_rational(c), v);
            }
        }
        Ok(acc)
    }

    pub fn scale(&self, factor: &Rational) -> BellExpression {
        BellExpression {
            correlators: self.correlators.iter().map(|c| c * factor).collect(),
            probabilities: self.probabilities.iter().map(|c| c * factor).collect(),
            constant: &self.constant * factor,
            bounds: Bounds::default(),
        }
    }

    pub fn add(&self, other: &BellExpression) -> BellExpression {
        BellExpression {
            correlators: self.correlators.iter().zip(&other.correlators).map(|(a, b)| a + b).collect(),
            probabilities: self.probabilities.iter().zip(&other.probabilities).map(|(a, b)| a + b).collect(),
            constant: &self.constant + &other.constant,
            bounds: Bounds::default(),
        }
    }

    /// Image under a relabeling, so that
    /// `g.apply(e).evaluate(g.apply_behavior(b)) == e.evaluate(b)`.
    pub fn relabel(&self, g: &RelabelingElement) -> BellExpression {
        let mut probabilities = vec![Rational::zero(); ENTRIES];
        for (e, c) in self.probabilities.iter().enumerate() {
            probabilities[g.map_entry(e)] = c.clone();
        }
        let mut correlators = vec![Rational::zero(); TERMS];
        for (t, c) in all_terms().iter().zip(&self.correlators) {
            let (t2, s) = g.map_term(*t);
            correlators[t2.index()] = if s > 0 { c.clone() } else { -c.clone() };
        }
        BellExpression { correlators, probabilities, constant: self.constant.clone(), bounds: self.bounds.clone() }
    }

    /// Largest value over a class (exact LP). Hull classes are cross-checked
    /// against their generator scan, except S₂ whose maximum is taken over
    /// its no-signalling part.
    pub fn maximize(&self, class: LocalityClass) -> Result<Maximum<Rational>> {
        maximize(self, class)
    }
}

impl fmt::Debug for BellExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BellExpression({self})")
    }
}

impl fmt::Display for BellExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (t, c) in all_terms().iter().zip(&self.correlators) {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            if t.degree() == 0 {
                write!(f, "{}", mag.to_text())?;
            } else if mag.is_one() {
                write!(f, "<{t}>")?;
            } else {
                write!(f, "{}<{t}>", mag.to_text())?;
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Evaluates `expr` exactly on a behavior, rational mode.
pub fn evaluate<T: Scalar>(expr: &BellExpression, b: &Behavior<T>) -> T {
    expr.evaluate(b)
}

/// Largest value of `expr` over a class, exact.
pub fn maximize(expr: &BellExpression, class: LocalityClass) -> Result<Maximum<Rational>> {
    let coeffs = expr.sparse_probabilities::<Rational>();
    let mut m = maximize_linear(&coeffs, class)?;
    if matches!(class, LocalityClass::Local | LocalityClass::Ns2) {
        let (scan, _) = maximize_scan(&coeffs, class).expect("hull class has generators");
        if scan != m.value {
            return Err(Error::InvariantViolation(format!(
                "LP maximum {} differs from generator maximum {}",
                m.value.to_text(),
                scan.to_text()
            )));
        }
    }
    m.value += expr.constant();
    Ok(m)
}

/// Relabeling of parties, inputs and outputs.
///
/// Party `p` becomes party `perm[p]`, its input `x` becomes
/// `x ^ input_flip[p]`, and its outcome at input `x` becomes
/// `o ^ output_flip[p][x]` (indexed by the original input).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RelabelingElement {
    pub perm: [u8; 3],
    pub input_flip: [u8; 3],
    pub output_flip: [[u8; 2]; 3],
}

impl RelabelingElement {
    pub const IDENTITY: RelabelingElement =
        RelabelingElement { perm: [0, 1, 2], input_flip: [0; 3], output_flip: [[0; 2]; 3] };

    /// Order of the full group.
    pub const GROUP_ORDER: usize = 3072;

    /// All 3072 elements, identity first.
    pub fn all() -> &'static [RelabelingElement] {
        &GROUP
    }

    /// Element number `k` in `0..3072`.
    pub fn from_index(k: usize) -> RelabelingElement {
        const PERMS: [[u8; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm = PERMS[k / 512];
        let s = (k / 64) % 8;
        let f = k % 64;
        RelabelingElement {
            perm,
            input_flip: [(s >> 2) as u8 & 1, (s >> 1) as u8 & 1, s as u8 & 1],
            output_flip: [0, 1, 2].map(|p| [(f >> (5 - 2 * p)) as u8 & 1, (f >> (4 - 2 * p)) as u8 & 1]),
        }
    }

    fn map_inputs_outputs(&self, x: [u8; 3], o: [u8; 3]) -> ([u8; 3], [u8; 3]) {
        let mut nx = [0; 3];
        let mut no = [0; 3];
        for p in 0..3 {
            let q = self.perm[p] as usize;
            nx[q] = x[p] ^ self.input_flip[p];
            no[q] = o[p] ^ self.output_flip[p][x[p] as usize];
        }
        (nx, no)
    }

    pub fn map_entry(&self, e: usize) -> usize {
        let (x, o) = entry_parts(e);
        let (nx, no) = self.map_inputs_outputs(x, o);
        entry_index(nx, no)
    }

    /// Image of a correlator term and the sign it picks up.
    pub fn map_term(&self, t: Term) -> (Term, i8) {
        let mut inputs = [None; 3];
        let mut sign = 1i8;
        for p in 0..3 {
            if let Some(x) = t.inputs[p] {
                inputs[self.perm[p] as usize] = Some(x ^ self.input_flip[p]);
                if self.output_flip[p][x as usize] == 1 {
                    sign = -sign;
                }
            }
        }
        (Term::new(inputs), sign)
    }

    pub fn apply_behavior<T: Scalar>(&self, b: &Behavior<T>) -> Behavior<T> {
        let mut p = vec![T::zero(); ENTRIES];
        for (e, v) in b.entries().iter().enumerate() {
            p[self.map_entry(e)] = v.clone();
        }
        Behavior::new(p).expect("a permutation keeps the behavior valid")
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RelabelingElement) -> RelabelingElement {
        let mut r = RelabelingElement::IDENTITY;
        for p in 0..3 {
            let q = other.perm[p] as usize;
            r.perm[p] = self.perm[q];
            r.input_flip[p] = other.input_flip[p] ^ self.input_flip[q];
            for x in 0..2u8 {
                let mid = (x ^ other.input_flip[p]) as usize;
                r.output_flip[p][x as usize] = other.output_flip[p][x as usize] ^ self.output_flip[q][mid];
            }
        }
        r
    }

    pub fn inverse(&self) -> RelabelingElement {
        let mut r = RelabelingElement::IDENTITY;
        for p in 0..3 {
            let q = self.perm[p] as usize;
            r.perm[q] = p as u8;
            r.input_flip[q] = self.input_flip[p];
            for x in 0..2u8 {
                r.output_flip[q][(x ^ self.input_flip[p]) as usize] = self.output_flip[p][x as usize];
            }
        }
        r
    }
}

static GROUP: LazyLock<Vec<RelabelingElement>> =
    LazyLock::new(|| (0..RelabelingElement::GROUP_ORDER).map(RelabelingElement::from_index).collect());

/// Canonical form of an expression's non-constant part under relabelings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canonical {
    /// Coprime integer coefficients of the 26 non-unit terms, lexicographically
    /// smallest over the orbit.
    pub coefficients: Vec<BigInt>,
    /// Number of group elements fixing the normalized expression.
    pub stabilizer: usize,
    /// An element mapping the input to the canonical form.
    pub element: RelabelingElement,
    /// Positive factor applied to reach integer coefficients.
    pub scale: Rational,
}

impl Canonical {
    pub fn orbit_size(&self) -> usize {
        RelabelingElement::GROUP_ORDER / self.stabilizer
    }
}

fn integer_scale(values: &[Rational]) -> Rational {
    let mut lcm = BigInt::one();
    for v in values {
        lcm = lcm.lcm(v.denom());
    }
    let mut gcd = BigInt::zero();
    for v in values {
        gcd = gcd.gcd(&(v.numer() * (&lcm / v.denom())));
    }
    if gcd.is_zero() {
        return Rational::one();
    }
    Rational::new(lcm, gcd)
}

/// Scales the non-constant part to coprime integers (positive factor only,
/// so the inequality direction is kept) and takes the lexicographic minimum
/// over the 3072-element orbit.
pub fn canonicalize(expr: &BellExpression) -> Canonical {
    let scale = integer_scale(&expr.correlators[1..]);
    let ints: Vec<BigInt> = expr.correlators.iter().map(|c| (c * &scale).to_integer()).collect();
    let mut best: Option<(Vec<BigInt>, RelabelingElement)> = None;
    let mut images = Vec::with_capacity(RelabelingElement::GROUP_ORDER);
    for g in RelabelingElement::all() {
        let mut v = vec![BigInt::zero(); TERMS];
        for (t, c) in all_terms().iter().zip(&ints) {
            let (t2, s) = g.map_term(*t);
            v[t2.index()] = if s > 0 { c.clone() } else { -c.clone() };
        }
        v.remove(0);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v.clone(), *g));
        }
        images.push(v);
    }
    let (coefficients, element) = best.expect("group is nonempty");
    let stabilizer = images.iter().filter(|v| **v == images[0]).count();
    Canonical { coefficients, stabilizer, element, scale }
}

/// The expression `I` with `I ≤ 0` on NS₂ and T₂, in probability form.
pub fn expr_i() -> BellExpression {
    let z = |x: [Option<u8>; 3]| Event::zeros(x);
    let r = |n: i64| Rational::from_i64(n);
    let events = vec![
        (r(-2), z([Some(1), Some(1), None])),
        (r(-2), z([None, Some(1), Some(1)])),
        (r(-2), z([Some(1), None, Some(1)])),
        (r(-1), z([Some(0), Some(0), Some(1)])),
        (r(-1), z([Some(0), Some(1), Some(0)])),
        (r(-1), z([Some(1), Some(0), Some(0)])),
        (r(2), z([Some(1), Some(1), Some(0)])),
        (r(2), z([Some(1), Some(0), Some(1)])),
        (r(2), z([Some(0), Some(1), Some(1)])),
        (r(2), z([Some(1), Some(1), Some(1)])),
    ];
    BellExpression::from_events(&events, Rational::zero()).with_bounds(Bounds {
        ns2: Some(Rational::zero()),
        t2: Some(Rational::zero()),
        source: Some("derived"),
        ..Bounds::default()
    })
}

/// One-way part of `I` for the ordering where `first` acts before `second`
/// (`A`/`B` in either order); `C` plays the third party.
fn expr_i_one_way(first: Party, second: Party) -> BellExpression {
    let r = |n: i64| Rational::from_i64(n);
    let ev = |f: Option<u8>, s: Option<u8>, c: Option<u8>| {
        let mut parts = [None; 3];
        parts[first.index()] = f.map(|x| (x, 0));
        parts[second.index()] = s.map(|x| (x, 0));
        parts[2] = c.map(|x| (x, 0));
        Event(parts)
    };
    // The conditional P(second_1 third_1 | first_0): first's input fixed
    // at 0, its outcome summed.
    let conditional = |out: u8| {
        let mut parts = [None; 3];
        parts[first.index()] = Some((0, out));
        parts[second.index()] = Some((1, 0));
        parts[2] = Some((1, 0));
        Event(parts)
    };
    let events = vec![
        (r(-1), ev(Some(1), Some(1), None)),
        (r(-1), conditional(0)),
        (r(-1), conditional(1)),
        (r(-1), ev(Some(1), None, Some(1))),
        (Rational::from_ratio(-1, 2), ev(Some(0), Some(0), Some(1))),
        (r(-1), ev(Some(1), Some(0), Some(0))),
        (r(1), ev(Some(1), Some(1), Some(0))),
        (r(1), ev(Some(1), Some(0), Some(1))),
        (r(1), ev(Some(0), Some(1), Some(1))),
        (r(1), ev(Some(1), Some(1), Some(1))),
    ];
    BellExpression::from_events(&events, Rational::zero())
}

/// `I_{A<B}`: bounded by 0 on behaviors where `A` may signal to `B`.
pub fn expr_i_ab() -> BellExpression {
    expr_i_one_way(Party::A, Party::B)
}

/// `I_{B<A}`, the same with `A` and `B` exchanged.
pub fn expr_i_ba() -> BellExpression {
    expr_i_one_way(Party::B, Party::A)
}

/// `<A0B0> + <A0C0> + <B0C1> - <A1B1C0> + <A1B1C1> ≤ 3` on T₂, violated by
/// GHZ correlations that are Svetlichny-local.
pub fn expr_ghz_witness() -> BellExpression {
    let t = |s: &str| Term::parse(s).expect("valid key");
    let one = Rational::one();
    let neg = -Rational::one();
    BellExpression::from_terms([
        (t("A0B0"), &one),
        (t("A0C0"), &one),
        (t("B0C1"), &one),
        (t("A1B1C0"), &neg),
        (t("A1B1C1"), &one),
    ])
    .with_bounds(Bounds { t2: Some(Rational::from_i64(3)), source: Some("derived"), ..Bounds::default() })
}

/// Values of `I`, `I_{A<B}` and `I_{B<A}` on a no-signalling behavior.
/// Fails with [`Error::InvariantViolation`] if the split identity breaks.
pub fn split_check<T: Scalar>(b: &Behavior<T>) -> Result<(T, T, T)> {
    if !b.is_no_signalling() {
        return Err(Error::SignallingInput);
    }
    let i = expr_i().evaluate(b);
    let ab = expr_i_ab().evaluate(b);
    let ba = expr_i_ba().evaluate(b);
    let gap = i.clone() - ab.clone() - ba.clone();
    if !gap.is_zero_tol(1e-9) {
        return Err(Error::InvariantViolation(format!("I - I_AB - I_BA = {}", gap.to_text())));
    }
    Ok((i, ab, ba))
}

/// One catalog record.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub family: u32,
    pub expression: BellExpression,
}

impl CatalogEntry {
    pub fn bounds(&self) -> &Bounds {
        &self.expression.bounds
    }
}

#[derive(Serialize, Deserialize)]
struct CatalogRecord {
    family: u32,
    terms: BTreeMap<String, String>,
    bounds: Bounds,
}

/// Representative inequalities of the NS₂ facet families with their class
/// bounds.
#[derive(Debug, Clone)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
}

static EMBEDDED: LazyLock<Catalog> = LazyLock::new(|| {
    Catalog::from_jsonl(include_str!("../data/catalog.jsonl")).expect("embedded catalog parses")
});

impl Catalog {
    /// The catalog compiled into the crate.
    pub fn embedded() -> &'static Catalog {
        &EMBEDDED
    }

    /// Parses one JSON record per line; blank lines are skipped.
    pub fn from_jsonl(text: &str) -> Result<Catalog> {
        let mut entries: Vec<CatalogEntry> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: CatalogRecord =
                serde_json::from_str(line).map_err(|e| Error::Parse(format!("catalog line {}: {e}", n + 1)))?;
            if entries.iter().any(|e| e.family == rec.family) {
                return Err(Error::Parse(format!("duplicate family {}", rec.family)));
            }
            let mut bounds = rec.bounds;
            bounds.source = Some("catalog");
            let expression = BellExpression::from_term_map(&rec.terms)?.with_bounds(bounds);
            entries.push(CatalogEntry { family: rec.family, expression });
        }
        entries.sort_by_key(|e| e.family);
        Ok(Catalog { entries })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let rec = CatalogRecord {
                family: e.family,
                terms: e.expression.to_term_map(),
                bounds: e.expression.bounds.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn get(&self, family: u32) -> Result<&CatalogEntry> {
        self.entries
            .binary_search_by_key(&family, |e| e.family)
            .map(|i| &self.entries[i])
            .map_err(|_| Error::CatalogMissing(family))
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Outcome of recomputing a declared class bound.
#[derive(Debug, Clone)]
pub struct BoundCheck {
    pub family: u32,
    pub class: LocalityClass,
    pub computed: Rational,
    pub declared: Option<Rational>,
}

impl BoundCheck {
    pub fn passed(&self) -> bool {
        self.declared.as_ref() == Some(&self.computed)
    }
}

/// Recomputes the bound of a catalog family over a class and compares it
/// with the declared value.
pub fn verify_bound(catalog: &Catalog, family: u32, class: LocalityClass) -> Result<BoundCheck> {
    let entry = catalog.get(family)?;
    let m = maximize(&entry.expression, class)?;
    Ok(BoundCheck { family, class, computed: m.value, declared: entry.bounds().get(class).cloned() })
}

/// Outcome of a facet check against the NS₂ generators.
#[derive(Debug, Clone)]
pub struct FacetCheck {
    /// Largest value over NS₂ generators.
    pub maximum: Rational,
    /// Generators attaining the tested bound.
    pub saturating: usize,
    /// Affine dimension of the saturating set (`None` when empty).
    pub rank: Option<usize>,
    /// Dimension of the NS₂ polytope.
    pub dimension: usize,
    pub valid: bool,
}

impl FacetCheck {
    pub fn is_facet(&self) -> bool {
        self.valid && self.rank == Some(self.dimension - 1)
    }
}

static NS2_DIMENSION: LazyLock<usize> = LazyLock::new(|| {
    let points: Vec<Vec<Rational>> = ns2_vertices().behaviors().map(|b| b.entries().to_vec()).collect();
    affine_dimension(&points, 0.0).expect("generators exist")
});

/// Dimension of the NS₂ polytope, from the affine rank of its generators.
pub fn ns2_dimension() -> usize {
    *NS2_DIMENSION
}

/// Checks `expr ≤ bound` on every NS₂ generator and computes the affine
/// rank of those attaining it.
pub fn check_facet(expr: &BellExpression, bound: &Rational) -> FacetCheck {
    let mut maximum: Option<Rational> = None;
    let mut saturating: Vec<Vec<Rational>> = Vec::new();
    for b in ns2_vertices().behaviors() {
        let v = expr.evaluate(b);
        if &v == bound {
            saturating.push(b.entries().to_vec());
        }
        if maximum.as_ref().is_none_or(|m| v > *m) {
            maximum = Some(v);
        }
    }
    let maximum = maximum.expect("generators exist");
    FacetCheck {
        valid: maximum <= *bound,
        maximum,
        saturating: saturating.len(),
        rank: affine_dimension(&saturating, 0.0),
        dimension: ns2_dimension(),
    }
}

/// Facet check of a catalog family at its declared NS₂ bound.
pub fn verify_facet(catalog: &Catalog, family: u32) -> Result<FacetCheck> {
    let entry = catalog.get(family)?;
    let bound = entry
        .bounds()
        .ns2
        .clone()
        .ok_or_else(|| Error::InvariantViolation(format!("family {family} has no NS2 bound")))?;
    Ok(check_facet(&entry.expression, &bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    fn term(s: &str) -> Term {
        Term::parse(s).unwrap()
    }

    #[test]
    fn pair_event_expands_by_inclusion_exclusion() {
        let e = BellExpression::from_events(&[(ratio(1, 1), Event::zeros([Some(0), Some(0), None]))], ratio(0, 1));
        let q = ratio(1, 4);
        for t in ["1", "A0", "B0", "A0B0"] {
            assert_eq!(e.coefficient(term(t)), &q, "{t}");
        }
        let nonzero = e.correlator_coefficients().iter().filter(|c| !c.is_zero()).count();
        assert_eq!(nonzero, 4);
        assert_eq!(e.evaluate(&Behavior::<Rational>::uniform()), q);
    }

    #[test]
    fn constant_survives_both_bases() {
        let e = BellExpression::from_terms([(Term::UNIT, &ratio(1, 1))]);
        assert_eq!(e.constant(), &ratio(1, 1));
        assert!(e.probability_coefficients().iter().all(Zero::is_zero));
        assert_eq!(e.to_correlator_basis().coefficient(Term::UNIT), &ratio(1, 1));
    }

    #[test]
    fn i_on_uniform() {
        // Pairs: -6 at 1/4. Triples: -3 + 8 at 1/8.
        assert_eq!(expr_i().evaluate(&Behavior::<Rational>::uniform()), ratio(-7, 8));
    }

    #[test]
    fn group_has_3072_distinct_actions() {
        let mut seen = std::collections::HashSet::new();
        for g in RelabelingElement::all() {
            let perm: Vec<usize> = (0..ENTRIES).map(|e| g.map_entry(e)).collect();
            seen.insert(perm);
        }
        assert_eq!(seen.len(), RelabelingElement::GROUP_ORDER);
        assert_eq!(RelabelingElement::all()[0], RelabelingElement::IDENTITY);
    }

    #[test]
    fn composition_and_inverse_match_actions() {
        let g = RelabelingElement::from_index(1234);
        let h = RelabelingElement::from_index(2900);
        let gh = g.compose(&h);
        for e in 0..ENTRIES {
            assert_eq!(gh.map_entry(e), g.map_entry(h.map_entry(e)));
            assert_eq!(g.inverse().map_entry(g.map_entry(e)), e);
        }
    }

    #[test]
    fn term_action_matches_entry_action() {
        let b = crate::vertices::ns2_vertices().behaviors().nth(100).unwrap().clone();
        let e = Catalog::embedded().get(137).unwrap().expression.clone();
        for k in [0, 7, 513, 1800, 3071] {
            let g = RelabelingElement::from_index(k);
            let e2 = e.relabel(&g);
            let rebuilt = e2.to_correlator_basis();
            assert_eq!(rebuilt.probability_coefficients(), e2.probability_coefficients());
            assert_eq!(e2.evaluate(&g.apply_behavior(&b)), e.evaluate(&b));
        }
    }

    #[test]
    fn weakened_bound_is_not_a_facet() {
        let e = &Catalog::embedded().get(185).unwrap().expression;
        let c = check_facet(e, &ratio(5, 1));
        assert!(c.valid);
        assert_eq!(c.saturating, 0);
        assert!(!c.is_facet());
    }

    #[test]
    fn missing_family_is_reported() {
        assert!(matches!(Catalog::embedded().get(999), Err(Error::CatalogMissing(999))));
    }

    #[test]
    fn display_is_readable() {
        let s = expr_ghz_witness().to_string();
        assert_eq!(s, "<A0B0> + <A0C0> + <B0C1> - <A1B1C0> + <A1B1C1>");
    }
}
