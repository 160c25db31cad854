//! Symbolic binary multiplication tables and their column equations.
//!
//! Each factor is an odd number whose lowest and highest bits are the
//! constant 1; the bits in between are unknowns. Summing a column of the
//! partial-product table together with the carries arriving from lower
//! columns must reproduce the matching bit of `n` plus the carries the
//! column sends upward:
//!
//! ```text
//! sum(column i) = bit_i(n) + 2 z_{i,i+1} + 4 z_{i,i+2} + ...
//! ```
//!
//! Three-factor inputs are built in two passes: the raw column sums of
//! `p * q` (entries may exceed 1) become a symbolic row that is multiplied by
//! `r`, and only that second pass introduces carries (printed `z'`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binpoly::{Assignment, Poly, Var};
use crate::{Error, Result};

/// Bit lengths of the factors, in factor order (p, q, r).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct FactorLayout {
    bits: Vec<u32>,
}

impl FactorLayout {
    pub fn new(bits: Vec<u32>) -> Result<Self> {
        if !(2..=3).contains(&bits.len()) {
            return Err(Error::InvalidLayout(format!("{} factors; only 2 or 3 are supported", bits.len())));
        }
        if let Some(&b) = bits.iter().find(|&&b| b < 2) {
            return Err(Error::InvalidLayout(format!("bit length {b} is below 2")));
        }
        if bits.iter().sum::<u32>() > 62 {
            return Err(Error::InvalidLayout("product wider than 62 bits".into()));
        }
        Ok(FactorLayout { bits })
    }

    pub fn bits(&self) -> &[u32] {
        &self.bits
    }

    pub fn factor_count(&self) -> usize {
        self.bits.len()
    }

    /// Number of columns of the full product.
    pub fn width(&self) -> u32 {
        self.bits.iter().sum()
    }

    /// Smallest product of odd factors with the given lengths.
    pub fn min_product(&self) -> u128 {
        self.bits.iter().map(|&l| (1u128 << (l - 1)) + 1).product()
    }

    pub fn max_product(&self) -> u128 {
        self.bits.iter().map(|&l| (1u128 << l) - 1).product()
    }

    pub fn admits(&self, n: u64) -> bool {
        (self.min_product()..=self.max_product()).contains(&(n as u128))
    }

    /// Bit `bit` of factor `factor`: a constant at either end, else a variable.
    pub fn factor_bit(&self, factor: usize, bit: u32) -> Poly {
        let len = self.bits[factor];
        if bit == 0 || bit == len - 1 {
            Poly::constant(1)
        } else {
            Poly::var(Var::factor(factor as u8, bit))
        }
    }

    /// All unknown factor bits, in variable order.
    pub fn factor_vars(&self) -> Vec<Var> {
        self.bits
            .iter()
            .enumerate()
            .flat_map(|(f, &len)| (1..len - 1).map(move |b| Var::factor(f as u8, b)))
            .collect()
    }

    fn spread(&self) -> u32 {
        self.bits.iter().max().unwrap() - self.bits.iter().min().unwrap()
    }
}

impl fmt::Display for FactorLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.bits.iter().map(u32::to_string).collect();
        f.write_str(&parts.join("x"))
    }
}

impl FromStr for FactorLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .split(['x', 'X'])
            .map(|t| t.trim().parse::<u32>().map_err(|_| Error::InvalidLayout(format!("cannot read {s:?}; expected e.g. 4x4"))))
            .collect::<Result<Vec<_>>>()?;
        FactorLayout::new(bits)
    }
}

impl From<FactorLayout> for String {
    fn from(l: FactorLayout) -> String {
        l.to_string()
    }
}

impl TryFrom<String> for FactorLayout {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

fn check_input(n: u64) -> Result<()> {
    if n < 9 {
        return Err(Error::TooSmall(n));
    }
    if n % 2 == 0 {
        return Err(Error::EvenInput(n));
    }
    Ok(())
}

/// Every bit-length split whose range of odd products contains `n`,
/// non-increasing within a layout, most balanced first.
pub fn plan_layouts(n: u64, factor_count: usize) -> Result<Vec<FactorLayout>> {
    check_input(n)?;
    if !(2..=3).contains(&factor_count) {
        return Err(Error::InvalidLayout(format!("{factor_count} factors; only 2 or 3 are supported")));
    }
    let nbits = 64 - n.leading_zeros();
    let mut out = Vec::new();
    let mut stack = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        if prefix.len() == factor_count {
            let layout = FactorLayout::new(prefix)?;
            if layout.admits(n) {
                out.push(layout);
            }
            continue;
        }
        let cap = prefix.last().copied().unwrap_or(nbits);
        for l in 2..=cap {
            let mut next = prefix.clone();
            next.push(l);
            stack.push(next);
        }
    }
    out.sort_by(|a, b| {
        (a.spread(), a.width())
            .cmp(&(b.spread(), b.width()))
            .then_with(|| b.bits.cmp(&a.bits))
    });
    Ok(out)
}

/// Outgoing carry count for a column with maximal sum `max_sum`.
///
/// The count covers `floor(log2(max_sum))` bits of carry and is never
/// smaller than the staircase drawn in hand-made tables, where a column at
/// distance `d` from the nearer end of the product carries
/// `floor(log2(d)) + 1` places. Carries never leave the product.
fn depth_for(max_sum: i64, column: u32, top: u32) -> u32 {
    let by_sum = if max_sum > 1 { 63 - (max_sum as u64).leading_zeros() } else { 0 };
    let reach = column.min(top - column);
    let staircase = 32 - reach.leading_zeros();
    by_sum.max(staircase).min(top - column)
}

/// One column of the table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnEquation {
    pub stage: u8,
    pub column: u32,
    /// Partial products plus incoming carries.
    pub lhs: Poly,
    pub rhs_bit: u8,
    /// Outgoing carries; the k-th one has weight `2^(k+1)`.
    pub outgoing: Vec<Var>,
}

impl ColumnEquation {
    /// `lhs - rhs_bit - sum 2^k z_k`, constrained to zero.
    pub fn residual(&self) -> Poly {
        let mut r = &self.lhs - &Poly::constant(self.rhs_bit as i64);
        for (k, &z) in self.outgoing.iter().enumerate() {
            r = &r - &Poly::var(z).scale(1 << (k + 1));
        }
        r
    }
}

/// Columns of a raw product `sum_i entries_i * 2^i` with carries added,
/// matched against the bits of `n`.
fn carry_columns(entries: Vec<Poly>, n: u64, stage: u8) -> Vec<ColumnEquation> {
    let top = entries.len() as u32 - 1;
    let mut incoming: Vec<Vec<Var>> = vec![Vec::new(); entries.len()];
    let mut out = Vec::with_capacity(entries.len());
    for (i, entry) in entries.into_iter().enumerate() {
        let column = i as u32;
        let mut lhs = entry;
        for &z in &incoming[i] {
            lhs = &lhs + &Poly::var(z);
        }
        let depth = depth_for(lhs.upper_bound(), column, top);
        let outgoing: Vec<Var> = (1..=depth).map(|k| Var::staged_carry(column, column + k, stage)).collect();
        for &z in &outgoing {
            if let Var::Carry { to, .. } = z {
                incoming[to as usize].push(z);
            }
        }
        out.push(ColumnEquation { stage, column, lhs, rhs_bit: (n >> column & 1) as u8, outgoing });
    }
    out
}

fn product_rows(a: &[Poly], b: &[Poly]) -> Vec<Poly> {
    let mut cols = vec![Poly::zero(); a.len() + b.len()];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            cols[i + j] = &cols[i + j] + &(x * y);
        }
    }
    cols
}

fn column_entries(layout: &FactorLayout) -> (Vec<Poly>, u8) {
    let rows: Vec<Vec<Poly>> = (0..layout.factor_count())
        .map(|f| (0..layout.bits[f]).map(|b| layout.factor_bit(f, b)).collect())
        .collect();
    let mut acc = product_rows(&rows[0], &rows[1]);
    let mut stage = 0;
    for row in &rows[2..] {
        acc = product_rows(&acc, row);
        stage += 1;
    }
    (acc, stage)
}

/// Number of outgoing carries of `column` in the final multiplication pass.
pub fn carry_depth(column: u32, layout: &FactorLayout) -> u32 {
    let (entries, stage) = column_entries(layout);
    carry_columns(entries, 0, stage)
        .get(column as usize)
        .map_or(0, |c| c.outgoing.len() as u32)
}

/// Residual polynomials constrained to zero, with the values already
/// resolved for eliminated variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquationSystem {
    pub n: u64,
    pub layout: FactorLayout,
    pub columns: Vec<ColumnEquation>,
    pub residuals: Vec<Poly>,
    pub resolved: Assignment,
}

/// Column equations for `n` under `layout`.
pub fn build_system(n: u64, layout: &FactorLayout) -> Result<EquationSystem> {
    check_input(n)?;
    if !layout.admits(n) {
        return Err(Error::Infeasible {
            n,
            layout: layout.to_string(),
            reason: format!("odd products range over {}..={}", layout.min_product(), layout.max_product()),
        });
    }
    let (entries, stage) = column_entries(layout);
    let columns = carry_columns(entries, n, stage);
    let residuals = columns.iter().map(ColumnEquation::residual).collect();
    Ok(EquationSystem { n, layout: layout.clone(), columns, residuals, resolved: Assignment::new() })
}

impl EquationSystem {
    pub fn vars(&self) -> Vec<Var> {
        let mut all = std::collections::BTreeSet::new();
        for r in &self.residuals {
            all.extend(r.vars());
        }
        all.into_iter().collect()
    }

    /// The assignment induced by concrete factors: their bits plus the
    /// arithmetically correct carries. `None` if the factors do not fit the
    /// layout or a column overflows its carries.
    pub fn witness(&self, factors: &[u64]) -> Option<Assignment> {
        if factors.len() != self.layout.factor_count() {
            return None;
        }
        let mut a = Assignment::new();
        for (f, (&value, &len)) in factors.iter().zip(self.layout.bits()).enumerate() {
            if value % 2 == 0 || 64 - value.leading_zeros() != len {
                return None;
            }
            for b in 1..len - 1 {
                a.insert(Var::factor(f as u8, b), value >> b & 1 == 1);
            }
        }
        for col in &self.columns {
            let sum = col.lhs.evaluate(&a).ok()?;
            let excess = sum - col.rhs_bit as i64;
            if excess < 0 || excess % 2 != 0 || excess >> 1 >= 1i64 << col.outgoing.len() {
                return None;
            }
            for (k, &z) in col.outgoing.iter().enumerate() {
                a.insert(z, excess >> (k + 1) & 1 == 1);
            }
        }
        Some(a)
    }

    /// Plain-text listing: one `residual = 0` line per equation, then the
    /// resolved block.
    pub fn to_text(&self) -> String {
        let mut s = format!("# n = {}, layout {}\n", self.n, self.layout);
        for r in &self.residuals {
            s.push_str(&format!("{r} = 0\n"));
        }
        s.push_str("# resolved\n");
        for (v, &b) in &self.resolved {
            s.push_str(&format!("{v} = {}\n", b as u8));
        }
        s
    }
}
