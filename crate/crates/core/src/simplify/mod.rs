//! Classical preprocessing of an equation system.
//!
//! Range pruning looks at one residual at a time: with the constant and the
//! signed coefficients it bounds the residual, and any term that would push
//! it out of reach of zero (or whose absence would) gets fixed. Probing
//! tries each open variable at both values; a value that leads to a
//! contradiction fixes the other one. Probing at depth `d` lets each branch
//! run its own probing pass at depth `d - 1` before being judged.
//!
//! When propagation stalls the surviving residuals are consolidated (see
//! [`consolidate`](self::consolidate)); the two steps alternate until
//! neither makes progress.

mod consolidate;
mod engine;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::binpoly::{Assignment, Monomial, Poly, Var};
use crate::tablegen::EquationSystem;
use crate::{Error, Result};

use engine::{Engine, Probe};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Rule {
    RangePrune,
    Probe { depth: u32 },
    Consolidate,
    Complement,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::RangePrune => f.write_str("range-prune"),
            Rule::Probe { depth } => write!(f, "probe/{depth}"),
            Rule::Consolidate => f.write_str("consolidate"),
            Rule::Complement => f.write_str("complement"),
        }
    }
}

/// One step of the reduction. `source` and `target` are indices into the
/// residual list the reduction started from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Deduction {
    FixVar { var: Var, value: bool, rule: Rule, source: Option<usize> },
    /// `monomial` vanishes on every solution. With a `target`, its
    /// multiples were removed from that residual.
    MonomialZero { monomial: Monomial, rule: Rule, source: Option<usize>, target: Option<usize> },
    /// Residual `residual` was removed: it vanished outright, was forced to
    /// zero by residual `by`, or is implied by the rest.
    Drop { residual: usize, by: Option<usize> },
    /// `var` was replaced by `1 - by`.
    Substitute { var: Var, by: Var },
    Contradiction { rule: Rule, source: Option<usize> },
}

impl fmt::Display for Deduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on = |s: &Option<usize>| s.map_or(String::new(), |i| format!(" on #{i}"));
        match self {
            Deduction::FixVar { var, value, rule, source } => {
                write!(f, "fix {var} = {} [{rule}{}]", *value as u8, on(source))
            }
            Deduction::MonomialZero { monomial, rule, source, target } => {
                write!(f, "zero {monomial} [{rule}{}]", on(source))?;
                if let Some(t) = target {
                    write!(f, " removed from #{t}")?;
                }
                Ok(())
            }
            Deduction::Drop { residual, by: Some(j) } => write!(f, "drop #{residual} [forced zero by #{j}]"),
            Deduction::Drop { residual, by: None } => write!(f, "drop #{residual} [implied]"),
            Deduction::Substitute { var, by } => write!(f, "substitute {var} = 1 - {by} [complement]"),
            Deduction::Contradiction { rule, source } => write!(f, "contradiction [{rule}{}]", on(source)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReduceOptions {
    /// Deepest probing level tried before giving up on a pass.
    pub max_depth: u32,
    /// Replace `y` by `1 - x` whenever `x + y - 1` survives.
    pub complement: bool,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions { max_depth: 2, complement: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReductionReport {
    pub free_vars: Vec<Var>,
    /// The reduced residuals, each constrained to zero.
    pub residuals: Vec<Poly>,
    /// Values of every eliminated variable.
    pub resolved: Assignment,
    /// Variables replaced by the complement of another (`var = 1 - by`).
    pub complements: Vec<(Var, Var)>,
    pub log: Vec<Deduction>,
    pub rounds: u32,
}

impl ReductionReport {
    pub fn to_text(&self) -> String {
        let names: Vec<String> = self.free_vars.iter().map(Var::to_string).collect();
        let mut s = format!("# free: {}\n", names.join(" "));
        for r in &self.residuals {
            s.push_str(&format!("{r} = 0\n"));
        }
        s.push_str("# resolved\n");
        for (v, &b) in &self.resolved {
            s.push_str(&format!("{v} = {}\n", b as u8));
        }
        for (v, by) in &self.complements {
            s.push_str(&format!("{v} = 1 - {by}\n"));
        }
        s
    }

    pub fn trace(&self) -> String {
        self.log.iter().map(|d| format!("{d}\n")).collect()
    }

    /// Full assignment from values of the free variables.
    pub fn complete(&self, free: &Assignment) -> Assignment {
        let mut a = self.resolved.clone();
        a.extend(free.iter().map(|(&v, &b)| (v, b)));
        for &(v, by) in &self.complements {
            if let Some(&b) = a.get(&by) {
                a.insert(v, !b);
            }
        }
        a
    }
}

/// Reduces `system`; a contradiction means `n` has no factorization with
/// this layout.
pub fn reduce(system: &EquationSystem, opts: &ReduceOptions) -> Result<ReductionReport> {
    reduce_residuals(&system.residuals, opts).map_err(|d| Error::Infeasible {
        n: system.n,
        layout: system.layout.to_string(),
        reason: d.to_string(),
    })
}

/// Reduces a bare residual list. On failure returns the contradiction.
pub fn reduce_residuals(residuals: &[Poly], opts: &ReduceOptions) -> std::result::Result<ReductionReport, Deduction> {
    let mut live: Vec<Option<Poly>> = residuals.iter().cloned().map(Some).collect();
    let mut resolved = Assignment::new();
    let mut complements = Vec::new();
    let mut log = Vec::new();
    let mut rounds = 0;
    loop {
        let fixed = propagate(&live, opts.max_depth, &mut log, &mut rounds)?;
        for slot in live.iter_mut().flatten() {
            *slot = slot.fix_all(&fixed);
        }
        resolved.extend(fixed.iter().map(|(&v, &b)| (v, b)));
        let before = log.len();
        consolidate::consolidate(&mut live, &mut log);
        if opts.complement {
            substitute_complements(&mut live, &mut complements, &mut log);
        }
        if fixed.is_empty() && log.len() == before {
            break;
        }
    }

    let mut out: Vec<Poly> = live.into_iter().flatten().collect();
    out.sort_by_cached_key(consolidate::presentation_key);
    let mut free: BTreeSet<Var> = out.iter().flat_map(Poly::vars).collect();
    // A factor bit that no residual mentions any more is unconstrained but
    // still needed to read off a factor.
    let linked: BTreeSet<Var> = complements.iter().map(|&(v, _)| v).collect();
    free.extend(
        residuals
            .iter()
            .flat_map(Poly::vars)
            .filter(|v| v.is_factor() && !resolved.contains_key(v) && !linked.contains(v)),
    );
    Ok(ReductionReport { free_vars: free.into_iter().collect(), residuals: out, resolved, complements, log, rounds })
}

/// Propagation to a fixpoint over the live residuals. Returns the new
/// fixes; the log receives each with its provenance.
fn propagate(
    live: &[Option<Poly>],
    max_depth: u32,
    log: &mut Vec<Deduction>,
    rounds: &mut u32,
) -> std::result::Result<Assignment, Deduction> {
    let mut e = Engine::new(live.iter().enumerate().filter_map(|(i, p)| p.as_ref().map(|p| (i, p))));
    let record = |e: &Engine, mark: usize, rule: Rule, log: &mut Vec<Deduction>| {
        for (var, value, source) in e.trail_since(mark) {
            let rule = if source.is_some() { Rule::RangePrune } else { rule };
            log.push(Deduction::FixVar { var, value, rule, source });
        }
    };
    if !e.start() {
        return Err(Deduction::Contradiction { rule: Rule::RangePrune, source: e.conflict_source() });
    }
    record(&e, 0, Rule::RangePrune, log);
    loop {
        *rounds += 1;
        let mut found = false;
        for depth in 1..=max_depth {
            for v in 0..e.num_vars() {
                if e.is_set(v) {
                    continue;
                }
                match e.probe(v, depth) {
                    Probe::Failed => return Err(Deduction::Contradiction { rule: Rule::Probe { depth }, source: None }),
                    Probe::Fixed(b) => {
                        let mark = e.trail_len();
                        let ok = e.assume(v, b);
                        record(&e, mark, Rule::Probe { depth }, log);
                        if !ok {
                            return Err(Deduction::Contradiction { rule: Rule::RangePrune, source: e.conflict_source() });
                        }
                        found = true;
                    }
                    Probe::Open => {}
                }
            }
            if found {
                break;
            }
        }
        if !found {
            break;
        }
    }
    Ok(e.trail_since(0).map(|(v, b, _)| (v, b)).collect())
}

fn as_complement_pair(p: &Poly) -> Option<(Var, Var)> {
    if p.num_terms() != 3 || p.constant_term() != -1 || p.degree() != 1 {
        return None;
    }
    let vs: Vec<Var> = p.terms().filter(|(m, c)| !m.is_one() && *c == 1).map(|(m, _)| m.vars()[0]).collect();
    match vs[..] {
        [x, y] => Some((x, y)),
        _ => None,
    }
}

fn substitute_complements(live: &mut [Option<Poly>], complements: &mut Vec<(Var, Var)>, log: &mut Vec<Deduction>) {
    while let Some((x, y)) = live.iter().flatten().find_map(as_complement_pair) {
        let by = &Poly::constant(1) - &Poly::var(x);
        for slot in live.iter_mut() {
            if let Some(p) = slot {
                let q = p.substitute(y, &by).normalized();
                *slot = (!q.is_zero()).then_some(q);
            }
        }
        complements.push((y, x));
        log.push(Deduction::Substitute { var: y, by: x });
    }
}

/// Re-applies a deduction log to the residuals it was produced from.
pub fn replay(residuals: &[Poly], log: &[Deduction]) -> Result<Vec<Poly>> {
    let mut live: Vec<Option<Poly>> = residuals.iter().cloned().map(Some).collect();
    let slot = |live: &mut Vec<Option<Poly>>, i: usize| -> Result<Poly> {
        live.get_mut(i)
            .and_then(Option::take)
            .ok_or_else(|| Error::Inconsistent(format!("log refers to missing residual #{i}")))
    };
    for d in log {
        match d {
            Deduction::FixVar { var, value, .. } => {
                for p in live.iter_mut().flatten() {
                    *p = p.fix(*var, *value);
                }
            }
            Deduction::MonomialZero { monomial, target: Some(t), .. } => {
                let p = slot(&mut live, *t)?;
                live[*t] = Some(p.drop_multiples_of(monomial));
            }
            Deduction::MonomialZero { target: None, .. } => {}
            Deduction::Drop { residual, .. } => {
                slot(&mut live, *residual)?;
            }
            Deduction::Substitute { var, by } => {
                let r = &Poly::constant(1) - &Poly::var(*by);
                for p in live.iter_mut().flatten() {
                    *p = p.substitute(*var, &r);
                }
            }
            Deduction::Contradiction { .. } => {
                return Err(Error::Inconsistent("log ends in a contradiction".into()));
            }
        }
    }
    let mut out: Vec<Poly> = live.into_iter().flatten().map(|p| p.normalized()).filter(|p| !p.is_zero()).collect();
    out.sort_by_cached_key(consolidate::presentation_key);
    Ok(out)
}

/// Answers questions like "does this monomial vanish on every solution?"
/// for one residual system, by fixing the hypothesis and probing for a
/// contradiction. A `true` answer is a proof; `false` means none was found.
pub struct VanishingTest {
    engine: Engine,
    index: std::collections::BTreeMap<Var, usize>,
    depth: u32,
    consistent: bool,
}

impl VanishingTest {
    pub fn new(residuals: &[Poly], depth: u32) -> Self {
        let mut engine = Engine::new(residuals.iter().enumerate());
        let consistent = engine.start();
        let index = (0..engine.num_vars()).map(|i| (engine.var(i), i)).collect();
        VanishingTest { engine, index, depth, consistent }
    }

    pub fn vanishes(&mut self, m: &Monomial) -> bool {
        self.refutes(m.vars(), &[])
    }

    /// True if `ones` all 1 forces every variable of `rest` to 1 as well.
    pub fn implies(&mut self, ones: &Monomial, rest: &[Var]) -> bool {
        rest.iter().all(|&x| self.refutes(ones.vars(), &[x]))
    }

    fn refutes(&mut self, ones: &[Var], zeros: &[Var]) -> bool {
        if !self.consistent {
            return true;
        }
        let mark = self.engine.trail_len();
        let fixes = ones.iter().map(|v| (v, true)).chain(zeros.iter().map(|v| (v, false)));
        let mut refuted = false;
        for (v, value) in fixes {
            // A variable no residual mentions is unconstrained.
            let Some(&i) = self.index.get(v) else { continue };
            if !self.engine.assume(i, value) {
                refuted = true;
                break;
            }
        }
        if !refuted && self.depth > 0 {
            refuted = !self.engine.closure(self.depth);
        }
        self.engine.undo(mark);
        refuted
    }
}
