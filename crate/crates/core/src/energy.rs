//! Energy functions over the reduced system, their spin form, and QUBO
//! export.
//!
//! Residuals that can go negative are squared; residuals whose coefficients
//! are all positive with no constant are already nonnegative and enter
//! linearly. Either way the energy is a sum of nonnegative parts that all
//! vanish exactly on the solutions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::binpoly::{parse_poly, Monomial, Poly, Var};
use crate::simplify::{ReductionReport, VanishingTest};
use crate::{Error, Result};

/// Probing depth used when proving that a high-degree term vanishes.
const VANISHING_DEPTH: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Squared,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnergyModel {
    pub objective: Poly,
    /// Basis order: `var_order[0]` is the most significant bit of an index.
    pub var_order: Vec<Var>,
    /// The residuals the objective was built from, with how each entered.
    pub sources: Vec<(Poly, Policy)>,
    /// Ancilla variables and the product each one stands for.
    pub ancillas: BTreeMap<Var, Monomial>,
}

impl EnergyModel {
    /// Model over an explicit objective, e.g. a polynomial read from text.
    pub fn from_objective(objective: Poly, var_order: Vec<Var>) -> Self {
        EnergyModel { objective, var_order, sources: Vec::new(), ancillas: BTreeMap::new() }
    }

    /// Constant part of the objective.
    pub fn offset(&self) -> i64 {
        self.objective.constant_term()
    }

    pub fn degree(&self) -> usize {
        self.objective.degree()
    }
}

fn nonnegative(r: &Poly) -> bool {
    r.constant_term() == 0 && r.terms().all(|(_, c)| c > 0)
}

/// Sum of the squared or linear residuals, with high-degree terms lowered.
///
/// Squaring a residual with two quadratic monomials produces degree-4
/// products. When a sub-product provably vanishes on every solution, a
/// positive term is replaced by a degree-3 multiple of that sub-product
/// (which can only raise the energy off the solution set) and a negative
/// term is dropped (likewise). A positive term may also be replaced by a
/// cubic factor that provably implies the remaining variables, since the
/// two agree on every solution and the factor is never smaller. The zero
/// set is unchanged either way.
pub fn build_energy(report: &ReductionReport) -> EnergyModel {
    let mut objective = Poly::zero();
    let mut sources = Vec::with_capacity(report.residuals.len());
    for r in &report.residuals {
        let policy = if nonnegative(r) { Policy::Linear } else { Policy::Squared };
        objective = match policy {
            Policy::Linear => &objective + r,
            Policy::Squared => &objective + &r.square(),
        };
        sources.push((r.clone(), policy));
    }
    if objective.degree() > 3 {
        objective = lower_degree(&objective, &report.residuals);
    }
    EnergyModel { objective, var_order: report.free_vars.clone(), sources, ancillas: BTreeMap::new() }
}

fn lower_degree(objective: &Poly, residuals: &[Poly]) -> Poly {
    let mut test = VanishingTest::new(residuals, VANISHING_DEPTH);
    let mut out = Poly::zero();
    for (t, c) in objective.terms() {
        if t.degree() <= 3 {
            out.add_term(t.clone(), c);
            continue;
        }
        let zero = (1..=3).find_map(|k| subsets(t.vars(), k).into_iter().find(|m| test.vanishes(m)));
        let lowered = match zero {
            Some(_) if c < 0 => None,
            Some(m) => {
                let mut vars: Vec<Var> = m.vars().to_vec();
                vars.extend(t.vars().iter().filter(|v| !m.contains(**v)).take(3 - m.degree()));
                Some(Monomial::new(vars))
            }
            // On solutions a cubic factor that implies the rest of the
            // term takes the same value as the term.
            None if c > 0 => subsets(t.vars(), 3).into_iter().find(|m| {
                let rest: Vec<Var> = t.vars().iter().copied().filter(|v| !m.contains(*v)).collect();
                test.implies(m, &rest)
            }),
            None => Some(t.clone()),
        };
        if let Some(m) = lowered {
            out.add_term(m, c);
        }
    }
    out
}

/// All `k`-element sub-monomials, in lexicographic order of positions.
fn subsets(vars: &[Var], k: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > vars.len() {
        return out;
    }
    loop {
        out.push(Monomial::new(idx.iter().map(|&i| vars[i])));
        let Some(pos) = (0..k).rev().find(|&i| idx[i] < vars.len() - k + i) else { break };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// Polynomial in spins `s = 1 - 2b`, with coefficients `numerator / 2^shift`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinPoly {
    pub var_order: Vec<Var>,
    pub terms: BTreeMap<Monomial, i64>,
    pub shift: u32,
}

impl SpinPoly {
    /// `2^shift` times the value at the given spins (each `±1`).
    pub fn evaluate_scaled(&self, spin: impl Fn(Var) -> i64) -> i64 {
        self.terms
            .iter()
            .map(|(m, &c)| c * m.vars().iter().map(|&v| spin(v)).product::<i64>())
            .sum()
    }

    pub fn evaluate(&self, spin: impl Fn(Var) -> i64) -> f64 {
        self.evaluate_scaled(spin) as f64 / (1u64 << self.shift) as f64
    }
}

impl fmt::Display for SpinPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let constant = self.terms.get(&Monomial::one()).copied();
        let ordered = self.terms.iter().filter(|(m, _)| !m.is_one()).map(|(m, &c)| (Some(m), c));
        let mut body = String::new();
        for (m, c) in ordered.chain(constant.map(|c| (None, c))) {
            let sign = if c < 0 { "-" } else { "+" };
            if body.is_empty() {
                body.push_str(if c < 0 { "-" } else { "" });
            } else {
                body.push_str(&format!(" {sign} "));
            }
            let mag = c.unsigned_abs();
            let spins = m.map(|m| m.vars().iter().map(|v| format!("s_{v}")).collect::<Vec<_>>().join(" "));
            match spins {
                None => body.push_str(&mag.to_string()),
                Some(s) if mag == 1 => body.push_str(&s),
                Some(s) => body.push_str(&format!("{mag} {s}")),
            }
        }
        if body.is_empty() {
            body.push('0');
        }
        match self.shift {
            0 => f.write_str(&body),
            k => write!(f, "({body})/{}", 1u64 << k),
        }
    }
}

/// Rewrites the objective in spins via `b = (1 - s)/2`, with `s^2 = 1`.
pub fn to_spin(m: &EnergyModel) -> SpinPoly {
    let shift = m.objective.degree() as u32;
    let mut terms: BTreeMap<Monomial, i64> = BTreeMap::new();
    for (t, c) in m.objective.terms() {
        let d = t.degree();
        let scale = c.checked_mul(1i64 << (shift as usize - d)).expect("coefficient overflow");
        for k in 0..=d {
            for s in subsets(t.vars(), k) {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                *terms.entry(s).or_insert(0) += sign * scale;
            }
        }
    }
    terms.retain(|_, c| *c != 0);
    let mut shift = shift;
    while shift > 0 && terms.values().all(|c| c % 2 == 0) {
        terms.values_mut().for_each(|c| *c /= 2);
        shift -= 1;
    }
    SpinPoly { var_order: m.var_order.clone(), terms, shift }
}

/// Rosenberg reduction to degree 2: the most frequent pair `x y` inside
/// terms of degree 3 or more is replaced by a fresh ancilla `w`, and
/// `M (x y - 2 x w - 2 y w + 3 w)` with `M = 1 + sum |c|` is added. The
/// penalty is zero when `w = x y` and at least `M` otherwise, so minimizing
/// over the ancillas recovers the original energy.
pub fn quadratize(m: &EnergyModel) -> EnergyModel {
    let mut objective = m.objective.clone();
    let mut ancillas = m.ancillas.clone();
    let mut var_order = m.var_order.clone();
    let mut next = ancillas.keys().filter_map(|v| if let Var::Ancilla(k) = v { Some(*k) } else { None }).max().unwrap_or(0);
    while objective.degree() > 2 {
        let mut counts: BTreeMap<(Var, Var), usize> = BTreeMap::new();
        for (t, _) in objective.terms().filter(|(t, _)| t.degree() >= 3) {
            let vs = t.vars();
            for i in 0..vs.len() {
                for j in i + 1..vs.len() {
                    *counts.entry((vs[i], vs[j])).or_insert(0) += 1;
                }
            }
        }
        let best = counts.values().copied().max().expect("a term of degree 3 or more");
        let (x, y) = *counts.iter().find(|(_, &c)| c == best).unwrap().0;
        next += 1;
        let w = Var::Ancilla(next);
        let weight = 1 + objective.terms().map(|(_, c)| c.unsigned_abs() as i64).sum::<i64>();

        let mut out = Poly::zero();
        for (t, c) in objective.terms() {
            if t.degree() >= 3 && t.contains(x) && t.contains(y) {
                out.add_term(Monomial::new(t.without(x).without(y).vars().iter().copied().chain([w])), c);
            } else {
                out.add_term(t.clone(), c);
            }
        }
        let (px, py, pw) = (Poly::var(x), Poly::var(y), Poly::var(w));
        let penalty = &(&(&px * &py) - &(&px * &pw).scale(2)) - &(&py * &pw).scale(2);
        let penalty = &penalty + &pw.scale(3);
        objective = &out + &penalty.scale(weight);
        ancillas.insert(w, Monomial::new([x, y]));
        var_order.push(w);
    }
    EnergyModel { objective, var_order, sources: m.sources.clone(), ancillas }
}

/// Writes the quadratic objective in the annealer text format. Nodes are
/// numbered by position in `var_order`; their names and the constant
/// offset travel in comment lines.
pub fn export_qubo(m: &EnergyModel) -> Result<String> {
    if m.degree() > 2 {
        return Err(Error::DegreeTooHigh(m.degree()));
    }
    let pos: BTreeMap<Var, usize> = m.var_order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut nodes = vec![0i64; m.var_order.len()];
    let mut couplers = Vec::new();
    for (t, c) in m.objective.terms() {
        match t.vars() {
            [] => {}
            [v] => nodes[pos[v]] += c,
            [a, b] => {
                let (i, j) = (pos[a].min(pos[b]), pos[a].max(pos[b]));
                couplers.push((i, j, c));
            }
            _ => unreachable!("degree checked"),
        }
    }
    couplers.sort_unstable();
    let mut s = String::from("c qfactor energy\n");
    for (i, v) in m.var_order.iter().enumerate() {
        s.push_str(&format!("c var {i} {v}\n"));
    }
    s.push_str(&format!("c offset {}\n", m.offset()));
    s.push_str(&format!("p qubo 0 {} {} {}\n", nodes.len(), nodes.len(), couplers.len()));
    for (i, b) in nodes.iter().enumerate() {
        s.push_str(&format!("{i} {i} {b}\n"));
    }
    for (i, j, w) in couplers {
        s.push_str(&format!("{i} {j} {w}\n"));
    }
    Ok(s)
}

/// Reads a file written by [`export_qubo`] (or any file in the same
/// format; unnamed nodes become ancillas named by index).
pub fn parse_qubo(text: &str) -> Result<EnergyModel> {
    let err = |line: usize, msg: &str| Error::Qubo { line, msg: msg.to_string() };
    let mut names: BTreeMap<usize, Var> = BTreeMap::new();
    let mut offset = 0i64;
    let mut header: Option<(usize, usize, usize)> = None;
    let mut objective = Poly::zero();
    let (mut seen_nodes, mut seen_couplers) = (0, 0);
    let mut entries = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let no = k + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => {}
            ["c", "var", i, name] => {
                let i: usize = i.parse().map_err(|_| err(no, "bad node index"))?;
                let var = parse_poly(name)
                    .ok()
                    .and_then(|p| p.vars().into_iter().next())
                    .ok_or_else(|| err(no, "bad variable name"))?;
                names.insert(i, var);
            }
            ["c", "offset", v] => offset = v.parse().map_err(|_| err(no, "bad offset"))?,
            ["c", ..] => {}
            ["p", "qubo", _, max, n, c] => {
                let parse = |s: &str| s.parse::<usize>().map_err(|_| err(no, "bad header"));
                header = Some((parse(max)?, parse(n)?, parse(c)?));
            }
            [i, j, w] => {
                let (max, ..) = header.ok_or_else(|| err(no, "entry before header"))?;
                let parse = |s: &str| s.parse::<usize>().map_err(|_| err(no, "bad node index"));
                let (i, j) = (parse(i)?, parse(j)?);
                let w: i64 = w.parse().map_err(|_| err(no, "bad weight"))?;
                if i >= max || j >= max {
                    return Err(err(no, "node index beyond header"));
                }
                if i == j {
                    seen_nodes += 1;
                } else if i < j {
                    seen_couplers += 1;
                } else {
                    return Err(err(no, "coupler must have i < j"));
                }
                entries.push((i, j, w));
            }
            _ => return Err(err(no, "unrecognized line")),
        }
    }
    let (max, n, c) = header.ok_or_else(|| err(0, "missing header"))?;
    if seen_nodes != n || seen_couplers != c {
        return Err(err(0, "entry counts disagree with header"));
    }
    let var = |i: usize| names.get(&i).copied().unwrap_or(Var::Ancilla(i as u32 + 1));
    for (i, j, w) in entries {
        let m = Monomial::new([var(i), var(j)]);
        objective.add_term(m, w);
    }
    objective.add_term(Monomial::one(), offset);
    let var_order: Vec<Var> = (0..max).map(var).collect();
    let distinct: BTreeSet<Var> = var_order.iter().copied().collect();
    if distinct.len() != var_order.len() {
        return Err(err(0, "duplicate variable names"));
    }
    Ok(EnergyModel::from_objective(objective, var_order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binpoly::Assignment;
    use crate::simplify::{reduce, ReduceOptions};
    use crate::tablegen::build_system;

    fn p(s: &str) -> Poly {
        parse_poly(s).unwrap()
    }

    fn model(n: u64, layout: &str) -> EnergyModel {
        let sys = build_system(n, &layout.parse().unwrap()).unwrap();
        build_energy(&reduce(&sys, &ReduceOptions::default()).unwrap())
    }

    fn assignments(vars: &[Var]) -> impl Iterator<Item = Assignment> + '_ {
        (0u32..1 << vars.len()).map(move |bits| {
            vars.iter().enumerate().map(|(i, &v)| (v, bits >> (vars.len() - 1 - i) & 1 == 1)).collect()
        })
    }

    fn zero_set(obj: &Poly, vars: &[Var]) -> Vec<u32> {
        assignments(vars)
            .enumerate()
            .filter(|(_, a)| obj.evaluate(a).unwrap() == 0)
            .map(|(i, _)| i as u32)
            .collect()
    }

    #[test]
    fn four_qubit_objective() {
        let m = model(143, "4x4");
        assert!(m.degree() <= 3);
        // |0110> and |1001> over (p1, p2, q1, q2).
        assert_eq!(zero_set(&m.objective, &m.var_order), [6, 9]);
        for a in assignments(&m.var_order) {
            assert!(m.objective.evaluate(&a).unwrap() >= 0);
        }
    }

    #[test]
    fn triprime_spectrum() {
        let m = model(175, "3x3x3");
        let spectrum: Vec<i64> = assignments(&m.var_order).map(|a| m.objective.evaluate(&a).unwrap()).collect();
        assert_eq!(spectrum, [1, 0, 0, 2, 0, 2, 2, 7]);
        assert_eq!(m.sources.iter().filter(|(_, p)| *p == Policy::Linear).count(), 1);
    }

    #[test]
    fn empty_system_has_zero_energy() {
        let m = build_energy(&crate::simplify::reduce_residuals(&[], &ReduceOptions::default()).unwrap());
        assert!(m.objective.is_zero());
    }

    #[test]
    fn spin_examples() {
        let v = [Var::factor(0, 1), Var::factor(1, 1)];
        let s = to_spin(&EnergyModel::from_objective(p("p1"), v[..1].to_vec()));
        assert_eq!((s.shift, s.to_string()), (1, "(-s_p1 + 1)/2".to_string()));
        let s = to_spin(&EnergyModel::from_objective(p("5"), vec![]));
        assert_eq!(s.to_string(), "5");
        let s = to_spin(&EnergyModel::from_objective(p("p1 q1"), v.to_vec()));
        assert_eq!(s.to_string(), "(-s_p1 - s_q1 + s_p1 s_q1 + 1)/4");
        for a in assignments(&v) {
            let spin = |x: Var| if a[&x] { -1 } else { 1 };
            assert_eq!(s.evaluate_scaled(spin), 4 * p("p1 q1").evaluate(&a).unwrap());
        }
    }

    #[test]
    fn quadratized_ground_states_are_preserved() {
        for (n, layout) in [(143, "4x4"), (175, "3x3x3")] {
            let m = model(n, layout);
            let q = quadratize(&m);
            assert!(q.degree() <= 2);
            let k = m.var_order.len();
            let base = zero_set(&m.objective, &m.var_order);
            let mut best: BTreeMap<u32, i64> = BTreeMap::new();
            for (i, a) in assignments(&q.var_order).enumerate() {
                let e = q.objective.evaluate(&a).unwrap();
                let b = (i >> (q.var_order.len() - k)) as u32;
                let slot = best.entry(b).or_insert(i64::MAX);
                *slot = (*slot).min(e);
            }
            let restricted: Vec<u32> = best.iter().filter(|(_, &e)| e == 0).map(|(&b, _)| b).collect();
            assert_eq!(restricted, base, "{n}");
            for (b, e) in best {
                let a = assignments(&m.var_order).nth(b as usize).unwrap();
                assert_eq!(e, m.objective.evaluate(&a).unwrap());
            }
        }
    }

    #[test]
    fn quadratic_input_is_unchanged() {
        let m = EnergyModel::from_objective(p("p1 q1 - p1 + 3"), vec![Var::factor(0, 1), Var::factor(1, 1)]);
        assert_eq!(quadratize(&m), m);
    }

    #[test]
    fn qubo_format() {
        let m = EnergyModel::from_objective(Poly::zero(), vec![Var::factor(0, 1)]);
        let text = export_qubo(&m).unwrap();
        assert!(text.contains("p qubo 0 1 1 0\n0 0 0\n"), "{text}");

        let m = EnergyModel::from_objective(p("p1 + q1 - 2 p1 q1 - 3"), vec![Var::factor(0, 1), Var::factor(1, 1)]);
        let text = export_qubo(&m).unwrap();
        assert!(text.contains("c offset -3\n"));
        assert!(text.ends_with("p qubo 0 2 2 1\n0 0 1\n1 1 1\n0 1 -2\n"), "{text}");
        assert_eq!(parse_qubo(&text).unwrap(), m);

        let cubic = EnergyModel::from_objective(p("p1 p2 q1"), vec![]);
        assert_eq!(export_qubo(&cubic), Err(Error::DegreeTooHigh(3)));
        assert!(matches!(parse_qubo("p qubo 0 1 1 0\n1 0 2\n"), Err(Error::Qubo { line: 2, .. })));
    }
}
