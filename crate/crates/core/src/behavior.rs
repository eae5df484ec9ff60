//! Tripartite behaviors `P(abc|XYZ)`, their marginals, no-signalling
//! structure and the correlator parametrization.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::scalar::{parse_rational, snap, Mode, Rational, Scalar, BEHAVIOR_TOL};
use crate::scenario::{
    all_terms, entry_index, entry_parts, triples, Party, Term, ENTRIES, TERMS,
};

/// Full conditional distribution over outcomes for every input triple.
#[derive(Clone, PartialEq)]
pub struct Behavior<T> {
    p: Vec<T>,
}

impl<T: Scalar> fmt::Debug for Behavior<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Behavior")
            .field("mode", &T::MODE)
            .field("p", &self.p.iter().map(Scalar::to_text).collect::<Vec<_>>())
            .finish()
    }
}

impl<T: Scalar> Behavior<T> {
    /// Wraps 64 entries in the fixed index order. Only the length is
    /// checked; use [`Behavior::normalize_check`] for the probability
    /// invariants.
    pub fn new(p: Vec<T>) -> Result<Self> {
        if p.len() != ENTRIES {
            return Err(Error::DimensionMismatch(format!(
                "behavior needs {ENTRIES} entries, got {}",
                p.len()
            )));
        }
        Ok(Behavior { p })
    }

    pub fn from_fn(mut f: impl FnMut([u8; 3], [u8; 3]) -> T) -> Self {
        let p = (0..ENTRIES)
            .map(|i| {
                let (x, o) = entry_parts(i);
                f(x, o)
            })
            .collect();
        Behavior { p }
    }

    /// `P ≡ 1/8`.
    pub fn uniform() -> Self {
        Self::from_fn(|_, _| T::from_ratio(1, 8))
    }

    /// The deterministic behavior producing `outcomes(inputs)`.
    pub fn deterministic(outcomes: impl Fn([u8; 3]) -> [u8; 3]) -> Self {
        Self::from_fn(|x, o| if outcomes(x) == o { T::one() } else { T::zero() })
    }

    pub fn mode(&self) -> Mode {
        T::MODE
    }

    pub fn entries(&self) -> &[T] {
        &self.p
    }

    pub fn into_entries(self) -> Vec<T> {
        self.p
    }

    pub fn get(&self, inputs: [u8; 3], outcomes: [u8; 3]) -> &T {
        &self.p[entry_index(inputs, outcomes)]
    }

    /// True iff every entry is non-negative and each input triple sums to 1
    /// (exactly, or within 1e-12 in double mode).
    pub fn normalize_check(&self) -> bool {
        if self.p.iter().any(|v| v.is_negative_tol(BEHAVIOR_TOL)) {
            return false;
        }
        triples().all(|x| {
            let total = triples().fold(T::zero(), |acc, o| acc + self.get(x, o).clone());
            (total - T::one()).is_zero_tol(BEHAVIOR_TOL)
        })
    }

    /// Distribution of the outcomes of `parties` (in party order) at the
    /// given full input triple, tracing out the others.
    pub fn marginal_of(&self, parties: &[Party], inputs: [u8; 3]) -> Vec<T> {
        let mut out = vec![T::zero(); 1 << parties.len()];
        for o in triples() {
            let key = parties
                .iter()
                .fold(0usize, |acc, p| (acc << 1) | o[p.index()] as usize);
            out[key] = out[key].clone() + self.get(inputs, o).clone();
        }
        out
    }

    /// Single-party outcome distribution `(P(0), P(1))` at the given inputs.
    pub fn marginal(&self, party: Party, inputs: [u8; 3]) -> [T; 2] {
        let m = self.marginal_of(&[party], inputs);
        [m[0].clone(), m[1].clone()]
    }

    /// Checks that every marginal of every proper subset of parties is
    /// independent of the remaining parties' inputs.
    pub fn no_signalling_report(&self) -> NoSignallingReport {
        let mut violations = Vec::new();
        for subset in proper_subsets() {
            let others: Vec<Party> =
                Party::ALL.into_iter().filter(|p| !subset.contains(p)).collect();
            for x in triples() {
                // Reference assignment: the other parties at input 0.
                let mut reference = x;
                for p in &others {
                    reference[p.index()] = 0;
                }
                if reference == x {
                    continue;
                }
                let here = self.marginal_of(&subset, x);
                let there = self.marginal_of(&subset, reference);
                let differs = here
                    .iter()
                    .zip(there.iter())
                    .any(|(a, b)| !(a.clone() - b.clone()).is_zero_tol(BEHAVIOR_TOL));
                if differs {
                    violations.push(SignallingViolation {
                        parties: subset.clone(),
                        depends_on: others.clone(),
                        inputs: x,
                        reference,
                    });
                }
            }
        }
        NoSignallingReport { violations }
    }

    pub fn is_no_signalling(&self) -> bool {
        self.no_signalling_report().is_no_signalling()
    }

    /// The 27 correlators. Fails on signalling behaviors, for which these
    /// numbers do not determine the behavior.
    pub fn to_correlators(&self) -> Result<CorrelatorForm<T>> {
        if !self.is_no_signalling() {
            return Err(Error::SignallingInput);
        }
        Ok(CorrelatorForm { values: self.correlators_at_zero() })
    }

    /// Correlators read at input 0 for non-participating parties, with no
    /// signalling check.
    fn correlators_at_zero(&self) -> Vec<T> {
        all_terms()
            .iter()
            .map(|t| {
                let inputs = t.inputs.map(|i| i.unwrap_or(0));
                triples().fold(T::zero(), |acc, o| {
                    let v = self.get(inputs, o).clone();
                    if t.sign(o) > 0 {
                        acc + v
                    } else {
                        acc - v
                    }
                })
            })
            .collect()
    }

    /// Entrywise `weight · self + (1 − weight) · other`.
    pub fn mix(&self, other: &Behavior<T>, weight: &T) -> Result<Behavior<T>> {
        if weight.is_negative_tol(0.0) || (weight.clone() - T::one()).is_positive_tol(0.0) {
            return Err(Error::WeightOutOfRange(weight.to_f64()));
        }
        let rest = T::one() - weight.clone();
        let p = self
            .p
            .iter()
            .zip(other.p.iter())
            .map(|(a, b)| weight.clone() * a.clone() + rest.clone() * b.clone())
            .collect();
        Ok(Behavior { p })
    }

    /// Dot product with 64 coefficients.
    pub fn dot(&self, coefficients: &[T]) -> T {
        let mut acc = T::zero();
        for (c, v) in coefficients.iter().zip(self.p.iter()) {
            acc.add_mul_assign(c, v);
        }
        acc
    }

    pub fn to_f64(&self) -> Behavior<f64> {
        Behavior { p: self.p.iter().map(Scalar::to_f64).collect() }
    }

    pub fn max_abs_diff(&self, other: &Behavior<T>) -> f64 {
        self.p
            .iter()
            .zip(other.p.iter())
            .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max)
    }

    /// File representation (see [`BehaviorFile`]).
    pub fn to_file(&self) -> BehaviorFile {
        let p = self
            .p
            .iter()
            .map(|v| match T::MODE {
                Mode::Rational => Value::String(v.to_text()),
                Mode::Double => serde_json::Number::from_f64(v.to_f64())
                    .map(Value::Number)
                    .unwrap_or(Value::Null),
            })
            .collect();
        BehaviorFile { scenario: [3, 2, 2], mode: T::MODE, p }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("behavior serializes")
    }
}

impl Behavior<f64> {
    /// Explicit double→rational conversion: each entry snapped to the best
    /// rational with denominator at most `max_den`. The result may fail
    /// [`Behavior::normalize_check`]; callers that need an exact valid
    /// behavior should snap correlators instead (see
    /// [`CorrelatorForm::snap`]).
    pub fn snap(&self, max_den: u64) -> Behavior<Rational> {
        Behavior { p: self.p.iter().map(|&v| snap(v, max_den)).collect() }
    }
}

impl Behavior<Rational> {
    pub fn to_double(&self) -> Behavior<f64> {
        self.to_f64()
    }
}

fn proper_subsets() -> Vec<Vec<Party>> {
    (1..7u8)
        .map(|mask| {
            Party::ALL
                .into_iter()
                .filter(|p| mask & (1 << p.index()) != 0)
                .collect()
        })
        .collect()
}

/// A marginal that changes with the input of parties outside the subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignallingViolation {
    pub parties: Vec<Party>,
    pub depends_on: Vec<Party>,
    pub inputs: [u8; 3],
    pub reference: [u8; 3],
}

impl fmt::Display for SignallingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = |ps: &[Party]| ps.iter().map(|p| p.letter()).collect::<String>();
        write!(
            f,
            "{}-marginal depends on input of {}: XYZ={:?} vs {:?}",
            names(&self.parties),
            names(&self.depends_on),
            self.inputs,
            self.reference
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct NoSignallingReport {
    pub violations: Vec<SignallingViolation>,
}

impl NoSignallingReport {
    pub fn is_no_signalling(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The linear no-signalling equalities as 30 integer rows over the 64
/// entries. A normalized behavior satisfies all rows with value 0 iff it
/// is no-signalling.
///
/// Each row states that a Fourier coefficient
/// `E_S = Σ (−1)^{outcomes in S} p` of a one- or two-party subset `S`
/// does not change when the other parties' inputs move away from 0.
pub fn no_signalling_rows() -> Vec<Vec<(usize, i64)>> {
    let mut rows = Vec::with_capacity(30);
    for subset in proper_subsets() {
        if subset.len() == 3 {
            continue;
        }
        let term_for = |x: [u8; 3]| {
            let mut inputs = [None; 3];
            for p in &subset {
                inputs[p.index()] = Some(x[p.index()]);
            }
            Term::new(inputs)
        };
        for x in triples() {
            let mut reference = x;
            for p in Party::ALL.iter().filter(|p| !subset.contains(p)) {
                reference[p.index()] = 0;
            }
            if reference == x {
                continue;
            }
            let term = term_for(x);
            let mut row = Vec::with_capacity(16);
            for o in triples() {
                let s = term.sign(o);
                row.push((entry_index(x, o), s));
                row.push((entry_index(reference, o), -s));
            }
            rows.push(row);
        }
    }
    rows
}

/// The 27 numbers (unit, 6 singles, 12 doubles, 8 triples) that
/// parametrize no-signalling behaviors, in [`crate::scenario::all_terms`]
/// order. The unit entry is always 1.
#[derive(Clone, PartialEq)]
pub struct CorrelatorForm<T> {
    values: Vec<T>,
}

impl<T: Scalar> fmt::Debug for CorrelatorForm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (t, v) in all_terms().iter().zip(self.values.iter()) {
            m.entry(&t.to_string(), &v.to_text());
        }
        m.finish()
    }
}

impl<T: Scalar> CorrelatorForm<T> {
    /// All correlators zero (the uniform behavior).
    pub fn zero() -> Self {
        let mut values = vec![T::zero(); TERMS];
        values[0] = T::one();
        CorrelatorForm { values }
    }

    /// Builds from the 26 non-unit values in canonical term order.
    pub fn from_values(non_unit: Vec<T>) -> Result<Self> {
        if non_unit.len() != TERMS - 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} correlators, got {}",
                TERMS - 1,
                non_unit.len()
            )));
        }
        let mut values = Vec::with_capacity(TERMS);
        values.push(T::one());
        values.extend(non_unit);
        Ok(CorrelatorForm { values })
    }

    pub fn get(&self, term: Term) -> &T {
        &self.values[term.index()]
    }

    pub fn set(&mut self, term: Term, value: T) {
        assert!(term != Term::UNIT, "the unit correlator is fixed to 1");
        self.values[term.index()] = value;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn scale(&self, factor: &T) -> Self {
        let mut values: Vec<T> = self.values.iter().map(|v| v.clone() * factor.clone()).collect();
        values[0] = T::one();
        CorrelatorForm { values }
    }

    /// Inverts the correlator transform:
    /// `p(abc|XYZ) = 1/8 Σ_t (−1)^{t·o} ⟨t⟩` over terms compatible with XYZ.
    pub fn to_behavior(&self) -> Result<Behavior<T>> {
        if !(self.values[0].clone() - T::one()).is_zero_tol(0.0) {
            return Err(Error::InvalidCorrelators("unit correlator must be 1".into()));
        }
        let eighth = T::from_ratio(1, 8);
        let b = Behavior::from_fn(|x, o| {
            let mut acc = T::zero();
            for (t, v) in all_terms().iter().zip(self.values.iter()) {
                if t.matches(x) {
                    if t.sign(o) > 0 {
                        acc = acc + v.clone();
                    } else {
                        acc = acc - v.clone();
                    }
                }
            }
            acc * eighth.clone()
        });
        if let Some(i) = b.p.iter().position(|v| v.is_negative_tol(BEHAVIOR_TOL)) {
            let (x, o) = entry_parts(i);
            return Err(Error::InvalidCorrelators(format!(
                "negative probability {} at XYZ={x:?} abc={o:?}",
                b.p[i].to_text()
            )));
        }
        Ok(b)
    }
}

impl CorrelatorForm<f64> {
    /// Snaps every correlator to a rational with denominator at most
    /// `max_den`. The result is exactly no-signalling and normalized once
    /// converted back, but may have slightly negative probabilities.
    pub fn snap(&self, max_den: u64) -> CorrelatorForm<Rational> {
        let mut values: Vec<Rational> = self.values.iter().map(|&v| snap(v, max_den)).collect();
        values[0] = Rational::from_i64(1);
        CorrelatorForm { values }
    }
}

/// Convenience: `from_correlators`.
pub fn from_correlators<T: Scalar>(c: &CorrelatorForm<T>) -> Result<Behavior<T>> {
    c.to_behavior()
}

/// Behavior file: `{"scenario":[3,2,2], "mode":..., "p":[64 entries]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BehaviorFile {
    pub scenario: [u32; 3],
    pub mode: Mode,
    pub p: Vec<Value>,
}

/// A behavior read from a file, in whichever mode the file declares.
#[derive(Debug, Clone)]
pub enum AnyBehavior {
    Rational(Behavior<Rational>),
    Double(Behavior<f64>),
}

impl AnyBehavior {
    pub fn from_json(text: &str) -> Result<AnyBehavior> {
        let file: BehaviorFile = serde_json::from_str(text)?;
        if file.scenario != [3, 2, 2] {
            return Err(Error::Parse(format!("unsupported scenario {:?}", file.scenario)));
        }
        if file.p.len() != ENTRIES {
            return Err(Error::DimensionMismatch(format!(
                "behavior file has {} entries, expected {ENTRIES}",
                file.p.len()
            )));
        }
        match file.mode {
            Mode::Rational => {
                let p = file
                    .p
                    .iter()
                    .map(value_to_rational)
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyBehavior::Rational(Behavior { p }))
            }
            Mode::Double => {
                let p = file
                    .p
                    .iter()
                    .map(|v| match v {
                        Value::Number(n) => n
                            .as_f64()
                            .ok_or_else(|| Error::Parse(format!("bad number {n}"))),
                        Value::String(s) => s
                            .trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Parse(format!("bad number {s:?}"))),
                        other => Err(Error::Parse(format!("bad entry {other}"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyBehavior::Double(Behavior { p }))
            }
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            AnyBehavior::Rational(b) => b.to_json(),
            AnyBehavior::Double(b) => b.to_json(),
        }
    }

    pub fn to_f64(&self) -> Behavior<f64> {
        match self {
            AnyBehavior::Rational(b) => b.to_f64(),
            AnyBehavior::Double(b) => b.clone(),
        }
    }
}

pub(crate) fn value_to_rational(v: &Value) -> Result<Rational> {
    match v {
        Value::String(s) => {
            parse_rational(s).ok_or_else(|| Error::Parse(format!("bad rational {s:?}")))
        }
        Value::Number(n) => parse_rational(&n.to_string())
            .ok_or_else(|| Error::Parse(format!("bad rational {n}"))),
        other => Err(Error::Parse(format!("bad rational entry {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    fn r(n: i64, d: i64) -> Rational {
        ratio(n, d)
    }

    #[test]
    fn uniform_is_normalized_and_no_signalling() {
        let u = Behavior::<Rational>::uniform();
        assert!(u.normalize_check());
        assert!(u.is_no_signalling());
        assert_eq!(u.marginal(Party::A, [1, 0, 1]), [r(1, 2), r(1, 2)]);
        let c = u.to_correlators().unwrap();
        assert_eq!(c, CorrelatorForm::zero());
    }

    #[test]
    fn negative_entry_fails_normalize_check() {
        let mut p = vec![0.125; 64];
        p[0] = -0.1;
        p[1] = 0.35;
        let b = Behavior::new(p).unwrap();
        assert!(!b.normalize_check());
    }

    #[test]
    fn deterministic_marginal() {
        let b = Behavior::<Rational>::deterministic(|_| [0, 1, 1]);
        assert_eq!(b.marginal(Party::A, [0, 1, 0]), [r(1, 1), r(0, 1)]);
        assert_eq!(b.marginal(Party::C, [0, 1, 0]), [r(0, 1), r(1, 1)]);
    }

    #[test]
    fn one_way_signalling_is_detected() {
        // b = X: Bob's outcome follows Alice's input.
        let b = Behavior::<Rational>::deterministic(|x| [0, x[0], x[2]]);
        let report = b.no_signalling_report();
        assert!(!report.is_no_signalling());
        assert!(report
            .violations
            .iter()
            .any(|v| v.parties == vec![Party::B] && v.depends_on.contains(&Party::A)));
        assert!(report.violations[0].to_string().contains("marginal depends"));
        assert!(matches!(b.to_correlators(), Err(Error::SignallingInput)));
    }

    #[test]
    fn correlators_of_zero_give_uniform() {
        let b = CorrelatorForm::<Rational>::zero().to_behavior().unwrap();
        assert_eq!(b, Behavior::uniform());
    }

    #[test]
    fn invalid_correlators_are_rejected() {
        let mut c = CorrelatorForm::<Rational>::zero();
        c.set(Term::parse("A0B0").unwrap(), r(1, 1));
        c.set(Term::parse("A0").unwrap(), r(1, 1));
        c.set(Term::parse("B0").unwrap(), r(-1, 1));
        assert!(matches!(c.to_behavior(), Err(Error::InvalidCorrelators(_))));
    }

    #[test]
    fn mix_rules() {
        let d = Behavior::<Rational>::deterministic(|x| [x[1], 0, 1]);
        let u = Behavior::uniform();
        assert_eq!(d.mix(&d, &r(3, 10)).unwrap(), d);
        assert_eq!(d.mix(&u, &r(0, 1)).unwrap(), u);
        assert!(matches!(d.mix(&u, &r(3, 2)), Err(Error::WeightOutOfRange(_))));
        assert!(matches!(d.mix(&u, &r(-1, 2)), Err(Error::WeightOutOfRange(_))));
    }

    #[test]
    fn no_signalling_rows_count_and_validity() {
        let rows = no_signalling_rows();
        assert_eq!(rows.len(), 30);
        let u = Behavior::<Rational>::uniform();
        for row in &rows {
            let v: i64 = row
                .iter()
                .map(|&(i, c)| if u.entries()[i] == r(1, 8) { c } else { 0 })
                .sum();
            assert_eq!(v, 0);
        }
        // A signalling behavior violates at least one row.
        let s = Behavior::<Rational>::deterministic(|x| [0, x[0], 0]);
        let violated = rows.iter().any(|row| {
            row.iter()
                .map(|&(i, c)| s.entries()[i].clone() * Rational::from_i64(c))
                .fold(r(0, 1), |a, b| a + b)
                != r(0, 1)
        });
        assert!(violated);
    }

    #[test]
    fn file_round_trip_and_rejections() {
        let b = CorrelatorForm::<Rational>::zero().to_behavior().unwrap();
        let text = b.to_json();
        match AnyBehavior::from_json(&text).unwrap() {
            AnyBehavior::Rational(back) => assert_eq!(back, b),
            _ => panic!("mode changed"),
        }
        let short = r#"{"scenario":[3,2,2],"mode":"double","p":[0.5,0.5]}"#;
        assert!(matches!(AnyBehavior::from_json(short), Err(Error::DimensionMismatch(_))));
        assert!(AnyBehavior::from_json("{not json").is_err());
        let wrong = text.replace("[3,2,2]", "[3,2,3]");
        assert!(AnyBehavior::from_json(&wrong).is_err());
    }
}
