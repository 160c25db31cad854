use std::fmt;

use serde::{Deserialize, Serialize};

/// Letters used to print factor bits, indexed by factor number.
pub const FACTOR_LETTERS: [char; 3] = ['p', 'q', 'r'];

/// A binary unknown.
///
/// Variants are ordered by kind first (factor bits, then carries, then
/// ancillas introduced by quadratization) and by their indices within a
/// kind, which gives the deterministic variable order used everywhere for
/// printing and basis indexing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Var {
    /// Bit `bit` of factor `factor` (0 = p, 1 = q, 2 = r). Fixed bits are
    /// never represented as variables.
    Factor { factor: u8, bit: u32 },
    /// Carry produced in column `from` and added into column `to`, weight
    /// `2^(to - from)` relative to its source column. `stage` distinguishes
    /// the second multiplication pass of a three-factor table.
    Carry { stage: u8, from: u32, to: u32 },
    /// Auxiliary variable standing for a product of two other variables.
    Ancilla(u32),
}

impl Var {
    pub fn factor(factor: u8, bit: u32) -> Self {
        assert!((factor as usize) < FACTOR_LETTERS.len(), "at most three factors");
        assert!(bit >= 1, "bit 0 of an odd factor is the constant 1");
        Var::Factor { factor, bit }
    }

    pub fn carry(from: u32, to: u32) -> Self {
        Var::staged_carry(from, to, 0)
    }

    pub fn staged_carry(from: u32, to: u32, stage: u8) -> Self {
        assert!(to > from, "carries move to a higher column");
        Var::Carry { stage, from, to }
    }

    pub fn is_factor(&self) -> bool {
        matches!(self, Var::Factor { .. })
    }

    pub fn is_carry(&self) -> bool {
        matches!(self, Var::Carry { .. })
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Var::Factor { factor, bit } => write!(f, "{}{}", FACTOR_LETTERS[factor as usize], bit),
            Var::Carry { stage, from, to } => {
                f.write_str("z")?;
                for _ in 0..stage {
                    f.write_str("'")?;
                }
                write!(f, "_{from}_{to}")
            }
            Var::Ancilla(i) => write!(f, "w{i}"),
        }
    }
}
