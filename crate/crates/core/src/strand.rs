//! The shared memory: a fixed-length strand of tri-state cells.
//!
//! Cells only ever move `Empty -> v` (a write) or `v -> Empty` (an erase).
//! [`Strand::try_write`] and [`Strand::try_erase`] are the only mutators, so
//! a direct `0 <-> 1` transition is unrepresentable.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A binary mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Value {
    Zero,
    One,
}

impl Value {
    pub const BOTH: [Value; 2] = [Value::Zero, Value::One];

    pub fn complement(self) -> Value {
        match self {
            Value::Zero => Value::One,
            Value::One => Value::Zero,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Value::Zero => 0,
            Value::One => 1,
        }
    }

    pub fn from_u8(bit: u8) -> Option<Value> {
        match bit {
            0 => Some(Value::Zero),
            1 => Some(Value::One),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// State of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CellState {
    #[default]
    Empty,
    Zero,
    One,
}

impl CellState {
    pub fn value(self) -> Option<Value> {
        match self {
            CellState::Empty => None,
            CellState::Zero => Some(Value::Zero),
            CellState::One => Some(Value::One),
        }
    }

    pub fn is_empty(self) -> bool {
        self == CellState::Empty
    }

    pub fn holds(self, v: Value) -> bool {
        self.value() == Some(v)
    }

    pub fn as_char(self) -> char {
        match self {
            CellState::Empty => 'V',
            CellState::Zero => '0',
            CellState::One => '1',
        }
    }

    pub fn from_char(c: char) -> Option<CellState> {
        match c {
            'V' => Some(CellState::Empty),
            '0' => Some(CellState::Zero),
            '1' => Some(CellState::One),
            _ => None,
        }
    }
}

impl From<Value> for CellState {
    fn from(v: Value) -> Self {
        match v {
            Value::Zero => CellState::Zero,
            Value::One => CellState::One,
        }
    }
}

/// Two adjacent non-empty cells with different marks.
pub fn is_collision(a: CellState, b: CellState) -> bool {
    matches!(
        (a, b),
        (CellState::Zero, CellState::One) | (CellState::One, CellState::Zero)
    )
}

/// Cell counts by state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Census {
    pub zeros: usize,
    pub ones: usize,
    pub empties: usize,
}

impl Census {
    pub fn total(&self) -> usize {
        self.zeros + self.ones + self.empties
    }

    pub fn count(&self, v: Value) -> usize {
        match v {
            Value::Zero => self.zeros,
            Value::One => self.ones,
        }
    }
}

/// The shared array. Its length is fixed at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strand {
    cells: Vec<CellState>,
    zeros: usize,
    ones: usize,
}

impl Strand {
    pub const MIN_LEN: usize = 2;

    /// An all-empty strand of `n` cells.
    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_LEN {
            return Err(Error::InvalidSize(n));
        }
        Ok(Strand {
            cells: vec![CellState::Empty; n],
            zeros: 0,
            ones: 0,
        })
    }

    /// A strand with arbitrary initial contents, for runs that do not start
    /// from the all-empty configuration.
    pub fn from_cells(cells: Vec<CellState>) -> Result<Self> {
        if cells.len() < Self::MIN_LEN {
            return Err(Error::InvalidSize(cells.len()));
        }
        let zeros = cells.iter().filter(|c| **c == CellState::Zero).count();
        let ones = cells.iter().filter(|c| **c == CellState::One).count();
        Ok(Strand { cells, zeros, ones })
    }

    /// A strand with every cell holding `v`.
    pub fn uniform(n: usize, v: Value) -> Result<Self> {
        if n < Self::MIN_LEN {
            return Err(Error::InvalidSize(n));
        }
        Self::from_cells(vec![v.into(); n])
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn get(&self, index: usize) -> Result<CellState> {
        self.cells.get(index).copied().ok_or(Error::OutOfBounds {
            index,
            len: self.cells.len(),
        })
    }

    fn check(&self, index: usize) -> Result<()> {
        if index < self.cells.len() {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                index,
                len: self.cells.len(),
            })
        }
    }

    /// Writes `v` into `index` if, and only if, the cell is empty.
    pub fn try_write(&mut self, index: usize, v: Value) -> Result<bool> {
        self.check(index)?;
        if !self.cells[index].is_empty() {
            return Ok(false);
        }
        self.cells[index] = v.into();
        match v {
            Value::Zero => self.zeros += 1,
            Value::One => self.ones += 1,
        }
        Ok(true)
    }

    /// Empties `index` if, and only if, it holds `v`.
    pub fn try_erase(&mut self, index: usize, v: Value) -> Result<bool> {
        self.check(index)?;
        if !self.cells[index].holds(v) {
            return Ok(false);
        }
        self.cells[index] = CellState::Empty;
        match v {
            Value::Zero => self.zeros -= 1,
            Value::One => self.ones -= 1,
        }
        Ok(true)
    }

    pub fn census(&self) -> Census {
        Census {
            zeros: self.zeros,
            ones: self.ones,
            empties: self.cells.len() - self.zeros - self.ones,
        }
    }

    pub fn count_collisions(&self) -> usize {
        self.cells
            .windows(2)
            .filter(|w| is_collision(w[0], w[1]))
            .count()
    }

    /// `Some(v)` when every cell holds `v`.
    pub fn consensus_value(&self) -> Option<Value> {
        let n = self.cells.len();
        if self.ones == n {
            Some(Value::One)
        } else if self.zeros == n {
            Some(Value::Zero)
        } else {
            None
        }
    }
}

impl fmt::Display for Strand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.cells.iter().map(|c| c.as_char()).collect();
        f.write_str(&s)
    }
}

impl FromStr for Strand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cells = s
            .trim()
            .chars()
            .map(|c| CellState::from_char(c).ok_or(Error::StrandParse(c)))
            .collect::<Result<Vec<_>>>()?;
        Strand::from_cells(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(text: &str) -> Strand {
        text.parse().unwrap()
    }

    #[test]
    fn new_strand_is_empty() {
        assert_eq!(Strand::new(4).unwrap().to_string(), "VVVV");
        let big = Strand::new(1000).unwrap();
        assert_eq!(big.census().empties, 1000);
        assert!(matches!(Strand::new(1), Err(Error::InvalidSize(1))));
        assert!(Strand::new(0).is_err());
    }

    #[test]
    fn write_only_into_empty() {
        let mut st = s("V0");
        assert!(st.try_write(0, Value::One).unwrap());
        assert_eq!(st.to_string(), "10");
        assert!(!st.try_write(1, Value::One).unwrap());
        assert_eq!(st.to_string(), "10");

        let mut st = s("VV");
        assert!(st.try_write(0, Value::Zero).unwrap());
        assert!(!st.try_write(0, Value::One).unwrap());
        assert_eq!(st.to_string(), "0V");
    }

    #[test]
    fn erase_only_own_mark() {
        let mut st = s("01");
        assert!(!st.try_erase(0, Value::One).unwrap());
        assert_eq!(st.to_string(), "01");
        assert!(st.try_erase(0, Value::Zero).unwrap());
        assert_eq!(st.to_string(), "V1");
        assert!(!st.try_erase(0, Value::Zero).unwrap());
        assert_eq!(st.to_string(), "V1");
    }

    #[test]
    fn out_of_range_is_an_error() {
        let mut st = Strand::new(3).unwrap();
        assert!(matches!(
            st.try_write(3, Value::One),
            Err(Error::OutOfBounds { index: 3, len: 3 })
        ));
        assert!(st.try_erase(7, Value::Zero).is_err());
        assert!(st.get(3).is_err());
    }

    #[test]
    fn collisions() {
        assert_eq!(s("101V").count_collisions(), 2);
        assert_eq!(s("1111").count_collisions(), 0);
        assert_eq!(s("1V0").count_collisions(), 0);
    }

    #[test]
    fn consensus() {
        assert_eq!(s("111").consensus_value(), Some(Value::One));
        assert_eq!(s("000").consensus_value(), Some(Value::Zero));
        assert_eq!(s("1V1").consensus_value(), None);
        assert_eq!(s("10").consensus_value(), None);
    }

    #[test]
    fn parse_rejects_junk() {
        assert!(matches!("10x".parse::<Strand>(), Err(Error::StrandParse('x'))));
        assert!("1".parse::<Strand>().is_err());
    }

    #[test]
    fn complement_is_involution() {
        for v in Value::BOTH {
            assert_eq!(v.complement().complement(), v);
            assert_ne!(v.complement(), v);
        }
    }

    fn brute_collisions(cells: &[CellState]) -> usize {
        let mut count = 0;
        for i in 0..cells.len().saturating_sub(1) {
            let (a, b) = (cells[i].value(), cells[i + 1].value());
            if let (Some(a), Some(b)) = (a, b) {
                if a != b {
                    count += 1;
                }
            }
        }
        count
    }

    fn cell() -> impl Strategy<Value = CellState> {
        prop_oneof![
            Just(CellState::Empty),
            Just(CellState::Zero),
            Just(CellState::One)
        ]
    }

    #[derive(Debug, Clone)]
    enum Op {
        Write(usize, Value),
        Erase(usize, Value),
    }

    fn op() -> impl Strategy<Value = Op> {
        (any::<bool>(), 0usize..80, any::<bool>()).prop_map(|(w, i, b)| {
            let v = if b { Value::One } else { Value::Zero };
            if w {
                Op::Write(i, v)
            } else {
                Op::Erase(i, v)
            }
        })
    }

    proptest! {
        #[test]
        fn collisions_match_brute_force(cells in prop::collection::vec(cell(), 2..=64)) {
            let st = Strand::from_cells(cells.clone()).unwrap();
            prop_assert_eq!(st.count_collisions(), brute_collisions(&cells));
        }

        #[test]
        fn consensus_implies_full_and_collision_free(cells in prop::collection::vec(cell(), 2..=16)) {
            let st = Strand::from_cells(cells).unwrap();
            if st.consensus_value().is_some() {
                prop_assert_eq!(st.count_collisions(), 0);
                prop_assert_eq!(st.census().empties, 0);
            }
        }

        #[test]
        fn mutations_are_legal_transitions(
            cells in prop::collection::vec(cell(), 2..=64),
            ops in prop::collection::vec(op(), 1..200),
        ) {
            let n = cells.len();
            let mut st = Strand::from_cells(cells).unwrap();
            for op in ops {
                let before = st.clone();
                let changed = match op {
                    Op::Write(i, v) => st.try_write(i % n, v).unwrap(),
                    Op::Erase(i, v) => st.try_erase(i % n, v).unwrap(),
                };
                let diffs: Vec<usize> = (0..n)
                    .filter(|&i| before.cells()[i] != st.cells()[i])
                    .collect();
                prop_assert_eq!(diffs.len(), usize::from(changed));
                for i in diffs {
                    let (a, b) = (before.cells()[i], st.cells()[i]);
                    prop_assert!(a.is_empty() != b.is_empty(), "illegal {:?} -> {:?}", a, b);
                }
                prop_assert_eq!(st.census().total(), n);
                let direct_zeros = st.cells().iter().filter(|c| **c == CellState::Zero).count();
                prop_assert_eq!(st.census().zeros, direct_zeros);
            }
        }

        #[test]
        fn display_parse_roundtrip(cells in prop::collection::vec(cell(), 2..=64)) {
            let st = Strand::from_cells(cells).unwrap();
            prop_assert_eq!(st.to_string().parse::<Strand>().unwrap(), st);
        }
    }
}
