//! Explicit behaviors and hidden-variable models used as ground truth.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use crate::behavior::Behavior;
use crate::error::Result;
use crate::quantum::{Measurements, Observable, QuantumScenario, QuantumState};
use crate::scalar::{Rational, Scalar};
use crate::scenario::{entry_index, triples, Party};

/// Parity constraints `Σ outcomes = rhs (mod 2)`; each lists
/// `(party, input)` pairs.
pub const CORR1_CONSTRAINTS: [(&[(Party, u8)], u8); 5] = [
    (&[(Party::A, 0), (Party::B, 1)], 0),
    (&[(Party::A, 1), (Party::C, 0)], 0),
    (&[(Party::B, 0), (Party::C, 1)], 0),
    (&[(Party::A, 0), (Party::B, 0), (Party::C, 0)], 0),
    (&[(Party::A, 1), (Party::B, 1), (Party::C, 1)], 1),
];

/// Uniform over the outcome triples that satisfy every parity constraint
/// applicable at each input triple.
pub fn corr1_target() -> Behavior<Rational> {
    let mut p = vec![Rational::from_i64(0); 64];
    for x in triples() {
        let ok: Vec<[u8; 3]> = triples()
            .filter(|o| {
                CORR1_CONSTRAINTS.iter().all(|(vars, rhs)| {
                    let applies = vars.iter().all(|(party, input)| x[party.index()] == *input);
                    !applies || vars.iter().map(|(party, _)| o[party.index()]).sum::<u8>() % 2 == *rhs
                })
            })
            .collect();
        let w = Rational::from_ratio(1, ok.len() as i64);
        for o in ok {
            p[entry_index(x, o)] = w.clone();
        }
    }
    Behavior::new(p).expect("valid by construction")
}

/// Deterministic response of all three parties to hidden bits and the
/// input triple, for one time ordering.
#[derive(Clone, Copy)]
pub struct ResponseRule {
    pub label: &'static str,
    pub outcomes: fn(&[u8], [u8; 3]) -> [u8; 3],
}

impl fmt::Debug for ResponseRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label)
    }
}

/// Shared randomness with weights plus one response rule per ordering.
#[derive(Debug, Clone)]
pub struct HiddenBitModel<T> {
    /// Hidden assignments and their probabilities.
    pub hidden: Vec<(Vec<u8>, T)>,
    pub rules: Vec<ResponseRule>,
}

impl<T: Scalar> HiddenBitModel<T> {
    /// True when the model's output depends on the ordering label.
    pub fn is_ordering_dependent(&self) -> bool {
        self.rules.len() > 1
    }

    pub fn total_weight(&self) -> T {
        self.hidden.iter().fold(T::zero(), |acc, (_, w)| acc + w.clone())
    }

    /// Averages the rule numbered `ordering` over the hidden variable.
    pub fn simulate(&self, ordering: usize) -> Behavior<T> {
        let rule = self.rules[ordering].outcomes;
        let mut p = vec![T::zero(); 64];
        for (h, w) in &self.hidden {
            for x in triples() {
                let e = entry_index(x, rule(h, x));
                p[e] = p[e].clone() + w.clone();
            }
        }
        Behavior::new(p).expect("weights sum to one")
    }

    /// Whether `party`'s outcome under rule `ordering` ever changes with
    /// `other`'s input, all else fixed.
    pub fn depends_on_input(&self, ordering: usize, party: Party, other: Party) -> bool {
        let rule = self.rules[ordering].outcomes;
        self.hidden.iter().any(|(h, _)| {
            triples().any(|x| {
                let mut y = x;
                y[other.index()] ^= 1;
                rule(h, x)[party.index()] != rule(h, y)[party.index()]
            })
        })
    }
}

fn bits2() -> Vec<Vec<u8>> {
    (0..4u8).map(|k| vec![k >> 1, k & 1]).collect()
}

/// The hidden-bit model of the parity behavior: `λ = (λ0, λ1)` uniform,
/// Alice local, Bob and Charlie with one-way signalling whose direction
/// depends on who measures first. Rule 0 is `B<C`, rule 1 is `C<B`.
pub fn corr1_t2_model() -> HiddenBitModel<Rational> {
    let hidden = bits2().into_iter().map(|h| (h, Rational::from_ratio(1, 4))).collect();
    HiddenBitModel {
        hidden,
        rules: vec![
            ResponseRule {
                label: "B<C",
                outcomes: |l, [x, y, z]| {
                    let a = if x == 0 { l[0] } else { l[1] };
                    let b = if y == 0 { l[0] ^ l[1] } else { l[0] };
                    let c = if z == 0 { l[1] } else { l[0] ^ l[1] ^ y };
                    [a, b, c]
                },
            },
            ResponseRule {
                label: "C<B",
                outcomes: |l, [x, y, z]| {
                    let a = if x == 0 { l[0] } else { l[1] };
                    let b = if y == 0 { l[0] ^ l[1] ^ z } else { l[0] };
                    let c = if z == 0 { l[1] } else { l[0] ^ l[1] ^ 1 };
                    [a, b, c]
                },
            },
        ],
    }
}

/// The four signalling strategies whose uniform mixture is no-signalling,
/// as `(a, b, c)` functions of `(X, Y, Z)`.
pub const S2_STRATEGIES: [fn([u8; 3]) -> [u8; 3]; 4] = [
    |[x, _, z]| [x | z, 0, 1],
    |[x, y, z]| [(1 ^ z) | (x & z), y, 1],
    |[_, y, z]| [0, y & (1 ^ z), 1 ^ z],
    |[x, y, z]| [1 ^ x, (1 ^ y) | (y & z), z],
];

/// Uniform mixture of [`S2_STRATEGIES`].
pub fn s2_mixture() -> Behavior<Rational> {
    let quarter = Rational::from_ratio(1, 4);
    let mut p = vec![Rational::from_i64(0); 64];
    for s in S2_STRATEGIES {
        for x in triples() {
            p[entry_index(x, s(x))] += &quarter;
        }
    }
    Behavior::new(p).expect("valid by construction")
}

/// Expectation of the product of 0/1 outcome variables of `parties` at
/// `inputs` (non-listed parties read at input 0). This is the convention of
/// `<a_X b_Y>` in the mixture's moment table, not the ±1 correlator.
pub fn outcome_moment<T: Scalar>(b: &Behavior<T>, parties: &[Party], inputs: [u8; 3]) -> T {
    triples()
        .filter(|o| parties.iter().all(|p| o[p.index()] == 1))
        .fold(T::zero(), |acc, o| acc + b.get(inputs, o).clone())
}

/// GHZ state with Alice and Bob measuring `σz, σx` and Charlie
/// `(σz − σx)/√2, (σz + σx)/√2`.
pub fn ghz_witness_scenario() -> QuantumScenario {
    let minus = Observable::from_vector([-1.0, 0.0, 1.0]).expect("nonzero");
    let plus = Observable::from_vector([1.0, 0.0, 1.0]).expect("nonzero");
    QuantumScenario {
        state: QuantumState::ghz(),
        measurements: Measurements::new([[Observable::Z, Observable::X], [Observable::Z, Observable::X], [minus, plus]]),
    }
}

/// Svetlichny-local model of [`ghz_witness_scenario`]. Hidden bits are
/// `(c, r0, r1)`: Charlie's outcome `c` is a fair coin, `r0` is 0 with
/// probability cos²(π/8), `r1` is a fair coin. Alice answers locally;
/// Bob reads Charlie's input.
pub fn ghz_svetlichny_local_model() -> HiddenBitModel<f64> {
    let p0 = (PI / 8.0).cos().powi(2);
    let mut hidden = Vec::new();
    for c in 0..2u8 {
        for r0 in 0..2u8 {
            for r1 in 0..2u8 {
                let w = 0.5 * if r0 == 0 { p0 } else { 1.0 - p0 } * 0.5;
                hidden.push((vec![c, r0, r1], w));
            }
        }
    }
    HiddenBitModel {
        hidden,
        rules: vec![ResponseRule {
            label: "C->B",
            outcomes: |h, [x, y, z]| {
                let (c, r0, r1) = (h[0], h[1], h[2]);
                let rx = if x == 0 { r0 } else { r1 };
                let a = rx ^ (c & (x ^ 1));
                let b = r0 ^ c ^ (y & (r1 ^ z ^ 1));
                [a, b, c]
            },
        }],
    }
}

/// Writes every fixture behavior as a behavior file into `dir`.
pub fn export(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let ghz = crate::quantum::born_behavior(&ghz_witness_scenario())?;
    let files = [
        ("corr1.json", corr1_target().to_json()),
        ("s2_mixture.json", s2_mixture().to_json()),
        ("ghz_witness.json", ghz.to_json()),
        ("uniform.json", Behavior::<Rational>::uniform().to_json()),
    ];
    let mut out = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn corr1_parities_and_marginals() {
        let b = corr1_target();
        assert!(b.is_no_signalling());
        let p: Rational = triples().filter(|o| o[0] == o[1]).map(|o| b.get([0, 1, 0], o).clone()).sum();
        assert_eq!(p, ratio(1, 1));
        for x in triples() {
            for party in Party::ALL {
                assert_eq!(b.marginal(party, x)[0], ratio(1, 2));
            }
        }
    }

    #[test]
    fn model_orderings_reproduce_corr1() {
        let m = corr1_t2_model();
        assert_eq!(m.total_weight(), ratio(1, 1));
        assert!(m.is_ordering_dependent());
        assert_eq!(m.simulate(0), corr1_target());
        assert_eq!(m.simulate(1), corr1_target());
    }

    #[test]
    fn model_signals_only_forward() {
        let m = corr1_t2_model();
        assert!(m.depends_on_input(0, Party::C, Party::B));
        assert!(!m.depends_on_input(0, Party::B, Party::C));
        assert!(m.depends_on_input(1, Party::B, Party::C));
        assert!(!m.depends_on_input(1, Party::C, Party::B));
        for rule in 0..2 {
            assert!(!m.depends_on_input(rule, Party::A, Party::B));
            assert!(!m.depends_on_input(rule, Party::A, Party::C));
        }
    }

    #[test]
    fn mixture_moment_table() {
        let b = s2_mixture();
        assert!(b.is_no_signalling());
        let q = |n: i64| ratio(n, 4);
        for x in triples() {
            let (xx, yy, zz) = (x[0] as i64, x[1] as i64, x[2] as i64);
            use Party::*;
            assert_eq!(outcome_moment(&b, &[A], x), ratio(1, 2));
            assert_eq!(outcome_moment(&b, &[B], x), q(1 + yy));
            assert_eq!(outcome_moment(&b, &[C], x), q(3));
            assert_eq!(outcome_moment(&b, &[A, B], x), q(1 - xx + xx * yy));
            assert_eq!(outcome_moment(&b, &[A, C], x), q(1 + xx + zz - xx * zz));
            assert_eq!(outcome_moment(&b, &[B, C], x), q(2 * yy + zz - yy * zz));
            assert_eq!(outcome_moment(&b, &[A, B, C], x), q(yy + zz - xx * zz - yy * zz + xx * yy * zz));
        }
    }

    #[test]
    fn strategies_are_signalling_individually() {
        for s in S2_STRATEGIES {
            let b = Behavior::<Rational>::deterministic(s);
            assert!(!b.is_no_signalling());
        }
    }

    #[test]
    fn ghz_model_matches_born_rule() {
        let q = crate::quantum::born_behavior(&ghz_witness_scenario()).unwrap();
        let m = ghz_svetlichny_local_model();
        assert!((m.total_weight() - 1.0).abs() < 1e-15);
        assert!(m.simulate(0).max_abs_diff(&q) < 1e-9);
        assert!(!m.depends_on_input(0, Party::A, Party::C));
        assert!(!m.depends_on_input(0, Party::C, Party::B));
    }
}
