//! Extremal and generating strategies of each locality class.
//!
//! Everything here is enumerated in exact rational arithmetic and cached;
//! the sets are immutable once built.

use std::collections::HashMap;
use std::fmt;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::behavior::Behavior;
use crate::scalar::{Rational, Scalar};
use crate::scenario::{Bipartition, Party};

/// Output of a single-input response function `k ∈ 0..4` at `input`:
/// bit `input` of `k`.
#[inline]
pub fn single_response(k: u8, input: u8) -> u8 {
    (k >> input) & 1
}

/// Output of a two-input response function `k ∈ 0..16` at
/// `(first, second)`: bit `2·first + second` of `k`.
#[inline]
pub fn pair_response(k: u8, first: u8, second: u8) -> u8 {
    (k >> (2 * first + second)) & 1
}

/// Measurement order inside a bipartite term: the leader answers from its
/// own input only, the follower may use both inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderingDirection {
    pub bipartition: Bipartition,
    pub leader: Party,
}

impl OrderingDirection {
    /// `first < second` in party order (e.g. A<B for AB|C).
    pub fn forward(bipartition: Bipartition) -> Self {
        OrderingDirection { bipartition, leader: bipartition.pair().0 }
    }

    pub fn backward(bipartition: Bipartition) -> Self {
        OrderingDirection { bipartition, leader: bipartition.pair().1 }
    }

    pub fn follower(&self) -> Party {
        let (i, j) = self.bipartition.pair();
        if self.leader == i {
            j
        } else {
            i
        }
    }

    pub fn both(bipartition: Bipartition) -> [OrderingDirection; 2] {
        [Self::forward(bipartition), Self::backward(bipartition)]
    }
}

impl fmt::Display for OrderingDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}<{}", self.leader, self.follower())
    }
}

/// Which structure a deterministic strategy has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    /// Every party answers from its own input.
    SingleParty,
    /// Pair term where the leader ignores the follower's input.
    OneWayPair(OrderingDirection),
    /// Pair term where both pair members see both pair inputs.
    UnrestrictedPair(Bipartition),
}

/// A deterministic tripartite strategy described by response tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub kind: StrategyKind,
    /// Response-table indices. `SingleParty`: one 0..4 index per party.
    /// `OneWayPair`: `[leader 0..4, follower 0..16, third 0..4]`.
    /// `UnrestrictedPair`: `[first 0..16, second 0..16, third 0..4]` where
    /// first/second follow the bipartition's party order.
    pub tables: [u8; 3],
}

impl DeterministicStrategy {
    pub fn local(a: u8, b: u8, c: u8) -> Self {
        DeterministicStrategy { kind: StrategyKind::SingleParty, tables: [a, b, c] }
    }

    /// Outcome triple for an input triple.
    pub fn outcomes(&self, inputs: [u8; 3]) -> [u8; 3] {
        let mut out = [0u8; 3];
        match self.kind {
            StrategyKind::SingleParty => {
                for p in 0..3 {
                    out[p] = single_response(self.tables[p], inputs[p]);
                }
            }
            StrategyKind::OneWayPair(dir) => {
                let (l, f, t) = (dir.leader.index(), dir.follower().index(), dir.bipartition.third().index());
                out[l] = single_response(self.tables[0], inputs[l]);
                out[f] = pair_response(self.tables[1], inputs[l], inputs[f]);
                out[t] = single_response(self.tables[2], inputs[t]);
            }
            StrategyKind::UnrestrictedPair(bp) => {
                let (i, j) = bp.pair();
                let (i, j, t) = (i.index(), j.index(), bp.third().index());
                out[i] = pair_response(self.tables[0], inputs[i], inputs[j]);
                out[j] = pair_response(self.tables[1], inputs[i], inputs[j]);
                out[t] = single_response(self.tables[2], inputs[t]);
            }
        }
        out
    }

    pub fn behavior<T: Scalar>(&self) -> Behavior<T> {
        Behavior::deterministic(|x| self.outcomes(x))
    }

    /// Outcome triple per input triple, indexed by [`input_index`].
    pub fn table(&self) -> [[u8; 3]; 8] {
        let mut t = [[0; 3]; 8];
        for (i, slot) in t.iter_mut().enumerate() {
            *slot = self.outcomes(crate::scenario::input_triple(i));
        }
        t
    }
}

impl fmt::Display for DeterministicStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [x, y, z] = self.tables;
        match self.kind {
            StrategyKind::SingleParty => write!(f, "L(a={x},b={y},c={z})"),
            StrategyKind::OneWayPair(d) => write!(f, "1W[{d}](lead={x},follow={y},third={z})"),
            StrategyKind::UnrestrictedPair(bp) => write!(f, "S2[{bp}](first={x},second={y},third={z})"),
        }
    }
}

/// One of the 8 relabelings of the box `a ⊕ b = XY`, identified by the
/// offsets of `a ⊕ b = XY ⊕ αX ⊕ βY ⊕ γ` with `variant = 4α + 2β + γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrBox {
    pub variant: u8,
}

impl PrBox {
    pub fn offsets(&self) -> (u8, u8, u8) {
        ((self.variant >> 2) & 1, (self.variant >> 1) & 1, self.variant & 1)
    }

    /// `P(ab|XY)` as 16 entries indexed `8X + 4Y + 2a + b`, in halves:
    /// entry is 1 where the box assigns probability 1/2.
    pub fn support(&self) -> [u8; 16] {
        let (alpha, beta, gamma) = self.offsets();
        let mut s = [0; 16];
        for idx in 0..16u8 {
            let (x, y, a, b) = (idx >> 3 & 1, idx >> 2 & 1, idx >> 1 & 1, idx & 1);
            if a ^ b == (x & y) ^ (alpha & x) ^ (beta & y) ^ gamma {
                s[idx as usize] = 1;
            }
        }
        s
    }

    pub fn probability<T: Scalar>(&self, x: u8, y: u8, a: u8, b: u8) -> T {
        let idx = 8 * x + 4 * y + 2 * a + b;
        if self.support()[idx as usize] == 1 {
            T::from_ratio(1, 2)
        } else {
            T::zero()
        }
    }

    /// The 8 variants generated as the orbit of the canonical box under
    /// local output flips (conditioned on the own input) and input flips.
    pub fn orbit() -> Vec<PrBox> {
        let canonical = PrBox { variant: 0 }.support();
        let mut seen: Vec<[u8; 16]> = Vec::new();
        for fa in 0..4u8 {
            for fb in 0..4u8 {
                for sx in 0..2u8 {
                    for sy in 0..2u8 {
                        let mut img = [0u8; 16];
                        for idx in 0..16u8 {
                            if canonical[idx as usize] == 0 {
                                continue;
                            }
                            let (x, y, a, b) = (idx >> 3 & 1, idx >> 2 & 1, idx >> 1 & 1, idx & 1);
                            let (x2, y2) = (x ^ sx, y ^ sy);
                            let a2 = a ^ single_response(fa, x2);
                            let b2 = b ^ single_response(fb, y2);
                            img[(8 * x2 + 4 * y2 + 2 * a2 + b2) as usize] = 1;
                        }
                        if !seen.contains(&img) {
                            seen.push(img);
                        }
                    }
                }
            }
        }
        let by_support: HashMap<[u8; 16], u8> =
            (0..8u8).map(|v| (PrBox { variant: v }.support(), v)).collect();
        let mut boxes: Vec<PrBox> = seen
            .iter()
            .map(|s| PrBox { variant: by_support[s] })
            .collect();
        boxes.sort();
        boxes
    }
}

/// Where a generator came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Deterministic(DeterministicStrategy),
    /// PR box on the pair of `bipartition`, deterministic third party.
    PrProduct { bipartition: Bipartition, pr: PrBox, third: u8 },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Deterministic(s) => write!(f, "{s}"),
            Provenance::PrProduct { bipartition, pr, third } => {
                write!(f, "PR[{bipartition}](variant={},third={third})", pr.variant)
            }
        }
    }
}

impl Provenance {
    pub fn behavior(&self) -> Behavior<Rational> {
        match *self {
            Provenance::Deterministic(s) => s.behavior(),
            Provenance::PrProduct { bipartition, pr, third } => pr_product(bipartition, pr, third),
        }
    }

    pub fn bipartition(&self) -> Option<Bipartition> {
        match self {
            Provenance::Deterministic(s) => match s.kind {
                StrategyKind::SingleParty => None,
                StrategyKind::OneWayPair(d) => Some(d.bipartition),
                StrategyKind::UnrestrictedPair(bp) => Some(bp),
            },
            Provenance::PrProduct { bipartition, .. } => Some(*bipartition),
        }
    }
}

/// `PR(o_i o_j | x_i x_j) · δ(o_t, f(x_t))`.
pub fn pr_product<T: Scalar>(bipartition: Bipartition, pr: PrBox, third: u8) -> Behavior<T> {
    let (i, j) = bipartition.pair();
    let t = bipartition.third();
    Behavior::from_fn(|x, o| {
        if o[t.index()] != single_response(third, x[t.index()]) {
            return T::zero();
        }
        pr.probability(x[i.index()], x[j.index()], o[i.index()], o[j.index()])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexClass {
    Local,
    Ns2,
    S2Generators,
    OneWay(OrderingDirection),
}

impl fmt::Display for VertexClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexClass::Local => f.write_str("local"),
            VertexClass::Ns2 => f.write_str("ns2"),
            VertexClass::S2Generators => f.write_str("s2-generators"),
            VertexClass::OneWay(d) => write!(f, "one-way[{}:{d}]", d.bipartition),
        }
    }
}

/// A distinct point and every label that produced it.
#[derive(Debug, Clone)]
pub struct Vertex {
    pub behavior: Behavior<Rational>,
    pub provenance: Vec<Provenance>,
}

/// Duplicate-free list of points of one class, with provenance.
#[derive(Debug, Clone)]
pub struct VertexSet {
    pub class: VertexClass,
    pub points: Vec<Vertex>,
}

impl VertexSet {
    fn from_labeled(class: VertexClass, labeled: impl IntoIterator<Item = Provenance>) -> Self {
        let mut points: Vec<Vertex> = Vec::new();
        let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
        for label in labeled {
            let behavior = label.behavior();
            let key = support_key(&behavior);
            match index.get(&key) {
                Some(&i) => points[i].provenance.push(label),
                None => {
                    index.insert(key, points.len());
                    points.push(Vertex { behavior, provenance: vec![label] });
                }
            }
        }
        VertexSet { class, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of labels before deduplication.
    pub fn labeled_len(&self) -> usize {
        self.points.iter().map(|v| v.provenance.len()).sum()
    }

    /// Every (label, point) pair, duplicates across labels included, in
    /// enumeration order of first appearance.
    pub fn labeled(&self) -> impl Iterator<Item = (&Provenance, &Behavior<Rational>)> {
        self.points
            .iter()
            .flat_map(|v| v.provenance.iter().map(move |p| (p, &v.behavior)))
    }

    pub fn behaviors(&self) -> impl Iterator<Item = &Behavior<Rational>> {
        self.points.iter().map(|v| &v.behavior)
    }

    pub fn contains(&self, b: &Behavior<Rational>) -> bool {
        self.points.iter().any(|v| &v.behavior == b)
    }

    /// Writes one behavior file per point plus `index.txt` listing the
    /// provenance labels of each file.
    pub fn dump(&self, dir: &std::path::Path) -> crate::error::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut index = String::new();
        for (i, v) in self.points.iter().enumerate() {
            let name = format!("point_{i:04}.json");
            std::fs::write(dir.join(&name), v.behavior.to_json())?;
            let labels: Vec<String> = v.provenance.iter().map(|p| p.to_string()).collect();
            index.push_str(&format!("{name}\t{}\n", labels.join(";")));
        }
        std::fs::write(dir.join("index.txt"), index)?;
        Ok(())
    }
}

/// Entries of these generators are in {0, 1/2, 1}; doubling gives a
/// compact exact key.
fn support_key(b: &Behavior<Rational>) -> Vec<u8> {
    let two = Rational::from_i64(2);
    b.entries()
        .iter()
        .map(|v| {
            let d = v.clone() * two.clone();
            d.to_f64() as u8
        })
        .collect()
}

fn local_labels() -> impl Iterator<Item = Provenance> {
    (0..64u8).map(|k| {
        Provenance::Deterministic(DeterministicStrategy::local(k >> 4 & 3, k >> 2 & 3, k & 3))
    })
}

/// All 64 products of deterministic single-party responses.
pub fn enumerate_local() -> VertexSet {
    VertexSet::from_labeled(VertexClass::Local, local_labels())
}

/// The 64 local points followed by the 96 PR-box ⊗ deterministic points.
pub fn enumerate_ns2() -> VertexSet {
    let pr = PrBox::orbit();
    let nonlocal = Bipartition::ALL.into_iter().flat_map(move |bp| {
        let pr = pr.clone();
        pr.into_iter().flat_map(move |b| {
            (0..4u8).map(move |third| Provenance::PrProduct { bipartition: bp, pr: b, third })
        })
    });
    VertexSet::from_labeled(VertexClass::Ns2, local_labels().chain(nonlocal))
}

/// Products of unrestricted bipartite deterministic strategies with a
/// deterministic third party, for every bipartition (3072 labels).
pub fn enumerate_s2_generators() -> VertexSet {
    VertexSet::from_labeled(VertexClass::S2Generators, s2_labels())
}

pub(crate) fn s2_labels() -> impl Iterator<Item = Provenance> {
    Bipartition::ALL.into_iter().flat_map(|bp| {
        (0..1024u16).map(move |k| {
            Provenance::Deterministic(DeterministicStrategy {
                kind: StrategyKind::UnrestrictedPair(bp),
                tables: [(k >> 6) as u8 & 15, (k >> 2) as u8 & 15, k as u8 & 3],
            })
        })
    })
}

/// The 256 one-way strategies of a pair in a given order, each with a
/// deterministic third party.
pub fn enumerate_one_way(direction: OrderingDirection) -> VertexSet {
    VertexSet::from_labeled(VertexClass::OneWay(direction), one_way_labels(direction))
}

pub(crate) fn one_way_labels(direction: OrderingDirection) -> impl Iterator<Item = Provenance> {
    (0..256u16).map(move |k| {
        Provenance::Deterministic(DeterministicStrategy {
            kind: StrategyKind::OneWayPair(direction),
            tables: [(k >> 6) as u8 & 3, (k >> 2) as u8 & 15, k as u8 & 3],
        })
    })
}

static LOCAL: LazyLock<VertexSet> = LazyLock::new(enumerate_local);
static NS2: LazyLock<VertexSet> = LazyLock::new(enumerate_ns2);
static S2: LazyLock<VertexSet> = LazyLock::new(enumerate_s2_generators);

/// Cached [`enumerate_local`].
pub fn local_vertices() -> &'static VertexSet {
    &LOCAL
}

/// Cached [`enumerate_ns2`].
pub fn ns2_vertices() -> &'static VertexSet {
    &NS2
}

/// Cached [`enumerate_s2_generators`].
pub fn s2_generators() -> &'static VertexSet {
    &S2
}

/// Sparse nonzero entries `(index, value)` of a generator.
pub fn sparse_entries(b: &Behavior<Rational>) -> Vec<(usize, Rational)> {
    b.entries()
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero_tol(0.0))
        .map(|(i, v)| (i, v.clone()))
        .collect()
}

/// Checks the one-way condition for `direction`: the leader's marginal
/// never depends on the follower's input.
pub fn satisfies_one_way(b: &Behavior<Rational>, direction: OrderingDirection) -> bool {
    let f = direction.follower().index();
    crate::scenario::triples().all(|x| {
        let mut y = x;
        y[f] ^= 1;
        b.marginal(direction.leader, x) == b.marginal(direction.leader, y)
    })
}
