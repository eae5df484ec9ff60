//! Index conventions of the (3 parties, 2 inputs, 2 outputs) scenario.
//!
//! Probabilities are stored as `p[X][Y][Z][a][b][c]` flattened in that
//! order, party order A, B, C, outcome 0 first.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of entries of a behavior tensor.
pub const ENTRIES: usize = 64;
/// Number of input triples.
pub const INPUT_TRIPLES: usize = 8;
/// Number of correlator terms, unit included.
pub const TERMS: usize = 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
    C,
}

impl Party {
    pub const ALL: [Party; 3] = [Party::A, Party::B, Party::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Party {
        Party::ALL[i]
    }

    pub fn letter(self) -> char {
        ['A', 'B', 'C'][self.index()]
    }
}

impl TryFrom<u8> for Party {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Party::A),
            1 => Ok(Party::B),
            2 => Ok(Party::C),
            other => Err(Error::InvalidParty(other)),
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// A split of the three parties into a pair and a singleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bipartition {
    /// AB|C
    AbC,
    /// AC|B
    AcB,
    /// BC|A
    BcA,
}

impl Bipartition {
    pub const ALL: [Bipartition; 3] = [Bipartition::AbC, Bipartition::AcB, Bipartition::BcA];

    /// The two parties sharing the bipartite term, in party order.
    pub fn pair(self) -> (Party, Party) {
        match self {
            Bipartition::AbC => (Party::A, Party::B),
            Bipartition::AcB => (Party::A, Party::C),
            Bipartition::BcA => (Party::B, Party::C),
        }
    }

    pub fn third(self) -> Party {
        match self {
            Bipartition::AbC => Party::C,
            Bipartition::AcB => Party::B,
            Bipartition::BcA => Party::A,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Bipartition::AbC => "AB|C",
            Bipartition::AcB => "AC|B",
            Bipartition::BcA => "BC|A",
        }
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Flat index of `p[x][y][z][a][b][c]`.
#[inline]
pub fn entry_index(inputs: [u8; 3], outcomes: [u8; 3]) -> usize {
    debug_assert!(inputs.iter().chain(outcomes.iter()).all(|&v| v < 2));
    ((inputs[0] as usize) << 5)
        | ((inputs[1] as usize) << 4)
        | ((inputs[2] as usize) << 3)
        | ((outcomes[0] as usize) << 2)
        | ((outcomes[1] as usize) << 1)
        | (outcomes[2] as usize)
}

/// Inverse of [`entry_index`].
#[inline]
pub fn entry_parts(index: usize) -> ([u8; 3], [u8; 3]) {
    let bit = |k: usize| ((index >> k) & 1) as u8;
    ([bit(5), bit(4), bit(3)], [bit(2), bit(1), bit(0)])
}

/// Index of an input triple in `0..8`, X most significant.
#[inline]
pub fn input_index(inputs: [u8; 3]) -> usize {
    ((inputs[0] as usize) << 2) | ((inputs[1] as usize) << 1) | inputs[2] as usize
}

#[inline]
pub fn input_triple(index: usize) -> [u8; 3] {
    [((index >> 2) & 1) as u8, ((index >> 1) & 1) as u8, (index & 1) as u8]
}

/// All 8 bit triples in index order.
pub fn triples() -> impl Iterator<Item = [u8; 3]> {
    (0..8).map(input_triple)
}

/// A correlator term: for each party, the input it is measured with, or
/// `None` when the party does not take part. The all-`None` term is the unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term {
    pub inputs: [Option<u8>; 3],
}

impl Term {
    pub const UNIT: Term = Term { inputs: [None, None, None] };

    pub fn new(inputs: [Option<u8>; 3]) -> Term {
        Term { inputs }
    }

    pub fn degree(&self) -> usize {
        self.inputs.iter().filter(|i| i.is_some()).count()
    }

    pub fn parties(&self) -> impl Iterator<Item = Party> + '_ {
        Party::ALL.into_iter().filter(|p| self.inputs[p.index()].is_some())
    }

    /// Position in the fixed ordering: degree, then party tuple, then input
    /// tuple.
    pub fn index(&self) -> usize {
        *TERM_INDEX
            .get(term_code(self))
            .expect("every term has an index")
    }

    pub fn from_index(i: usize) -> Term {
        all_terms()[i]
    }

    /// Sign `(-1)^{sum of participating outcomes}`.
    pub fn sign(&self, outcomes: [u8; 3]) -> i64 {
        let parity: u8 = Party::ALL
            .iter()
            .filter(|p| self.inputs[p.index()].is_some())
            .map(|p| outcomes[p.index()])
            .sum();
        if parity.is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// True when the term's inputs agree with a full input triple.
    pub fn matches(&self, inputs: [u8; 3]) -> bool {
        self.inputs
            .iter()
            .zip(inputs.iter())
            .all(|(t, i)| t.is_none_or(|t| t == *i))
    }

    /// Parses `"1"`, `"A0"`, `"A1B0"`, `"A0B1C1"` and so on.
    pub fn parse(text: &str) -> Result<Term> {
        let t = text.trim();
        if t == "1" {
            return Ok(Term::UNIT);
        }
        let bytes = t.as_bytes();
        if bytes.is_empty() || !bytes.len().is_multiple_of(2) {
            return Err(Error::Parse(format!("bad term key {text:?}")));
        }
        let mut inputs = [None; 3];
        let mut last: Option<usize> = None;
        for chunk in bytes.chunks(2) {
            let party = match chunk[0] {
                b'A' => 0,
                b'B' => 1,
                b'C' => 2,
                _ => return Err(Error::Parse(format!("bad party in term {text:?}"))),
            };
            let input = match chunk[1] {
                b'0' => 0,
                b'1' => 1,
                _ => return Err(Error::Parse(format!("bad input in term {text:?}"))),
            };
            if last.is_some_and(|l| l >= party) {
                return Err(Error::Parse(format!("parties out of order in {text:?}")));
            }
            last = Some(party);
            inputs[party] = Some(input);
        }
        Ok(Term { inputs })
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree() == 0 {
            return f.write_str("1");
        }
        for p in Party::ALL {
            if let Some(x) = self.inputs[p.index()] {
                write!(f, "{}{}", p.letter(), x)?;
            }
        }
        Ok(())
    }
}

fn term_code(t: &Term) -> usize {
    t.inputs
        .iter()
        .fold(0, |acc, i| acc * 3 + i.map_or(0, |x| x as usize + 1))
}

static TERM_LIST: std::sync::LazyLock<Vec<Term>> = std::sync::LazyLock::new(|| {
    let mut terms = Vec::with_capacity(TERMS);
    for code in 0..TERMS {
        let digits = [code / 9, (code / 3) % 3, code % 3];
        let inputs = digits.map(|d| if d == 0 { None } else { Some(d as u8 - 1) });
        terms.push(Term { inputs });
    }
    terms.sort_by_key(|t| {
        let parties: Vec<usize> = t.parties().map(Party::index).collect();
        let inputs: Vec<u8> = t.inputs.iter().flatten().copied().collect();
        (t.degree(), parties, inputs)
    });
    terms
});

static TERM_INDEX: std::sync::LazyLock<Vec<usize>> = std::sync::LazyLock::new(|| {
    let mut index = vec![0; TERMS];
    for (i, t) in TERM_LIST.iter().enumerate() {
        index[term_code(t)] = i;
    }
    index
});

/// The 27 correlator terms in canonical order.
pub fn all_terms() -> &'static [Term] {
    &TERM_LIST
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_index_round_trips() {
        for i in 0..ENTRIES {
            let (x, o) = entry_parts(i);
            assert_eq!(entry_index(x, o), i);
        }
        assert_eq!(entry_index([1, 0, 0], [0, 0, 0]), 32);
        assert_eq!(entry_index([0, 0, 0], [0, 0, 1]), 1);
    }

    #[test]
    fn term_order_is_degree_then_parties_then_inputs() {
        let names: Vec<String> = all_terms().iter().map(|t| t.to_string()).collect();
        assert_eq!(names.len(), 27);
        assert_eq!(&names[..7], ["1", "A0", "A1", "B0", "B1", "C0", "C1"]);
        assert_eq!(&names[7..11], ["A0B0", "A0B1", "A1B0", "A1B1"]);
        assert_eq!(names[11], "A0C0");
        assert_eq!(names[15], "B0C0");
        assert_eq!(names[19], "A0B0C0");
        assert_eq!(names[26], "A1B1C1");
        for (i, t) in all_terms().iter().enumerate() {
            assert_eq!(t.index(), i);
            assert_eq!(Term::parse(&t.to_string()).unwrap(), *t);
        }
    }

    #[test]
    fn bad_term_keys_are_rejected() {
        for bad in ["", "A", "A2", "B0A1", "D0", "A0A1"] {
            assert!(Term::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn party_ids() {
        assert_eq!(Party::try_from(2).unwrap(), Party::C);
        assert!(matches!(Party::try_from(3), Err(Error::InvalidParty(3))));
    }
}
