//! From ground states back to integers.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::binpoly::{Assignment, Var};
use crate::simplify::ReductionReport;
use crate::tablegen::FactorLayout;
use crate::{Error, Result};

/// Factors in layout order (p, q, r), rebuilt from the free-variable values
/// plus everything the reduction resolved.
pub fn decode(a: &Assignment, report: &ReductionReport, layout: &FactorLayout) -> Result<Vec<u64>> {
    let full = report.complete(a);
    layout
        .bits()
        .iter()
        .enumerate()
        .map(|(f, &len)| {
            let mut value = 1 | 1u64 << (len - 1);
            for b in 1..len - 1 {
                let v = Var::factor(f as u8, b);
                let bit = full.get(&v).ok_or_else(|| Error::Inconsistent(format!("{v} is not determined")))?;
                value |= (*bit as u64) << b;
            }
            Ok(value)
        })
        .collect()
}

/// Exact product check.
pub fn verify(n: u64, factors: &[u64]) -> bool {
    !factors.is_empty() && factors.iter().try_fold(1u128, |acc, &f| acc.checked_mul(f as u128)) == Some(n as u128)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GroundState {
    /// Basis label over the free variables, e.g. `|0110>`.
    pub ket: String,
    pub energy: i64,
    /// Decoded factors in layout order, if decoding succeeded.
    pub factors: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FactorTuple {
    pub factors: Vec<u64>,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Timings {
    pub compile_ms: f64,
    pub reduce_ms: f64,
    pub energy_ms: f64,
    pub solve_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveReport {
    pub n: u64,
    pub layout: FactorLayout,
    pub free_vars: usize,
    pub variables: Vec<String>,
    pub residuals: Vec<String>,
    pub solver: String,
    pub ground_states: Vec<GroundState>,
    /// Distinct factor tuples, each sorted ascending, with how many ground
    /// states decode to it.
    pub factors: Vec<FactorTuple>,
    pub verified: bool,
    /// Powers of two divided out of the input before factoring.
    #[serde(skip_serializing_if = "is_zero")]
    pub twos: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

fn is_zero(k: &u32) -> bool {
    *k == 0
}

impl SolveReport {
    /// Assembles the report for the given ground states. `verified` holds
    /// when at least one state decodes and every decoded tuple multiplies
    /// to `n`.
    pub fn new(
        n: u64,
        layout: &FactorLayout,
        report: &ReductionReport,
        var_order: &[Var],
        states: &[(Assignment, i64)],
        solver: &str,
    ) -> Self {
        let mut tuples: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let ground_states: Vec<GroundState> = states
            .iter()
            .map(|(a, e)| {
                let factors = decode(a, report, layout).ok();
                if let Some(f) = &factors {
                    let mut sorted = f.clone();
                    sorted.sort_unstable();
                    *tuples.entry(sorted).or_insert(0) += 1;
                }
                GroundState { ket: crate::solver::ket(var_order, a), energy: *e, factors }
            })
            .collect();
        let verified = !tuples.is_empty() && tuples.keys().all(|f| verify(n, f));
        SolveReport {
            n,
            layout: layout.clone(),
            free_vars: report.free_vars.len(),
            variables: var_order.iter().map(Var::to_string).collect(),
            residuals: report.residuals.iter().map(|r| format!("{r} = 0")).collect(),
            solver: solver.to_string(),
            ground_states,
            factors: tuples.into_iter().map(|(factors, multiplicity)| FactorTuple { factors, multiplicity }).collect(),
            verified,
            twos: 0,
            timings: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {} (layout {})", self.n, self.layout)?;
        if self.twos > 0 {
            writeln!(f, "removed factor 2^{}", self.twos)?;
        }
        writeln!(f, "free variables ({}): {}", self.free_vars, self.variables.join(" "))?;
        writeln!(f, "residuals:")?;
        for r in &self.residuals {
            writeln!(f, "  {r}")?;
        }
        writeln!(f, "solver: {}", self.solver)?;
        let energy = self.ground_states.first().map_or(0, |g| g.energy);
        writeln!(f, "ground energy {energy} at {} state(s):", self.ground_states.len())?;
        for g in &self.ground_states {
            match &g.factors {
                Some(fs) => {
                    let fs: Vec<String> = fs.iter().map(u64::to_string).collect();
                    writeln!(f, "  {} -> {}", g.ket, fs.join(" x "))?;
                }
                None => writeln!(f, "  {} -> (undecodable)", g.ket)?,
            }
        }
        for t in &self.factors {
            let fs: Vec<String> = t.factors.iter().map(u64::to_string).collect();
            writeln!(f, "factors: {} (from {} state(s))", fs.join(" x "), t.multiplicity)?;
        }
        writeln!(f, "verified: {}", if self.verified { "yes" } else { "no" })?;
        if let Some(t) = &self.timings {
            writeln!(
                f,
                "timings (ms): compile {:.2}, reduce {:.2}, energy {:.2}, solve {:.2}",
                t.compile_ms, t.reduce_ms, t.energy_ms, t.solve_ms
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplify::{reduce, ReduceOptions};
    use crate::solver::assignment_at;
    use crate::tablegen::build_system;

    fn reduced(n: u64, layout: &str) -> (FactorLayout, ReductionReport) {
        let l: FactorLayout = layout.parse().unwrap();
        let r = reduce(&build_system(n, &l).unwrap(), &ReduceOptions::default()).unwrap();
        (l, r)
    }

    #[test]
    fn decodes_printed_ground_states() {
        let (l, r) = reduced(143, "4x4");
        assert_eq!(decode(&assignment_at(&r.free_vars, 0b0110), &r, &l).unwrap(), [13, 11]);
        assert_eq!(decode(&assignment_at(&r.free_vars, 0b1001), &r, &l).unwrap(), [11, 13]);

        let (l, r) = reduced(175, "3x3x3");
        assert_eq!(decode(&assignment_at(&r.free_vars, 0b001), &r, &l).unwrap(), [5, 5, 7]);
    }

    #[test]
    fn missing_bits_are_reported() {
        let (l, r) = reduced(143, "4x4");
        assert!(matches!(decode(&Assignment::new(), &r, &l), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn verification() {
        assert!(verify(143, &[11, 13]));
        assert!(!verify(143, &[11, 11]));
        assert!(verify(291311, &[523, 557]));
        assert!(!verify(1, &[]));
        assert!(!verify(u64::MAX, &[u64::MAX, u64::MAX]));
    }

    #[test]
    fn report_lists_distinct_tuples() {
        let (l, r) = reduced(143, "4x4");
        let states: Vec<(Assignment, i64)> = [0b0110, 0b1001].iter().map(|&i| (assignment_at(&r.free_vars, i), 0)).collect();
        let rep = SolveReport::new(143, &l, &r, &r.free_vars, &states, "exhaustive");
        assert!(rep.verified);
        assert_eq!(rep.factors, [FactorTuple { factors: vec![11, 13], multiplicity: 2 }]);
        let json = rep.to_json();
        for key in ["\"n\"", "\"layout\": \"4x4\"", "\"freeVars\": 4", "\"residuals\"", "\"groundStates\"", "\"factors\"", "\"verified\": true"] {
            assert!(json.contains(key), "{key} missing from {json}");
        }
        assert!(rep.to_string().contains("|0110> -> 13 x 11"));
    }
}
