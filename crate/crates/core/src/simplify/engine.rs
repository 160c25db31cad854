//! Trail-based bound propagation over compiled residuals.
//!
//! Residuals are flattened to integer-indexed terms so that a tentative
//! assignment can be propagated and then undone in time proportional to the
//! work done, which is what makes nested probing affordable.

use std::collections::BTreeSet;

use crate::binpoly::{Poly, Var};

const UNSET: i8 = -1;
const DECISION: u32 = u32::MAX;

struct Term {
    coeff: i64,
    vars: Vec<u32>,
}

struct Row {
    constant: i64,
    terms: Vec<Term>,
}

#[derive(Debug, PartialEq, Eq)]
pub(super) enum Probe {
    /// Only one value survives.
    Fixed(bool),
    /// Both values lead to a contradiction.
    Failed,
    Open,
}

pub(super) struct Engine {
    vars: Vec<Var>,
    rows: Vec<Row>,
    /// Caller-side index of each row.
    sources: Vec<usize>,
    occurs: Vec<Vec<u32>>,
    value: Vec<i8>,
    cause: Vec<u32>,
    trail: Vec<u32>,
    queue: Vec<u32>,
    queued: Vec<bool>,
    open: Vec<usize>,
    conflict: Option<u32>,
}

impl Engine {
    pub fn new<'a>(residuals: impl IntoIterator<Item = (usize, &'a Poly)>) -> Self {
        let residuals: Vec<(usize, &Poly)> = residuals.into_iter().collect();
        let vars: Vec<Var> = residuals
            .iter()
            .flat_map(|(_, p)| p.vars())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index = |v: &Var| vars.binary_search(v).expect("collected above") as u32;
        let mut occurs = vec![Vec::new(); vars.len()];
        let mut rows = Vec::with_capacity(residuals.len());
        let mut sources = Vec::with_capacity(residuals.len());
        for (r, &(source, poly)) in residuals.iter().enumerate() {
            let mut row = Row { constant: 0, terms: Vec::new() };
            for (m, c) in poly.terms() {
                if m.is_one() {
                    row.constant = c;
                } else {
                    row.terms.push(Term { coeff: c, vars: m.vars().iter().map(index).collect() });
                }
            }
            for v in poly.vars() {
                occurs[index(&v) as usize].push(r as u32);
            }
            rows.push(row);
            sources.push(source);
        }
        let n = vars.len();
        let nrows = rows.len();
        Engine {
            vars,
            rows,
            sources,
            occurs,
            value: vec![UNSET; n],
            cause: vec![DECISION; n],
            trail: Vec::new(),
            queue: Vec::new(),
            queued: vec![false; nrows],
            open: Vec::new(),
            conflict: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var(&self, i: usize) -> Var {
        self.vars[i]
    }

    pub fn is_set(&self, i: usize) -> bool {
        self.value[i] != UNSET
    }

    pub fn trail_len(&self) -> usize {
        self.trail.len()
    }

    /// Assignments made since `mark`, with the caller-side index of the
    /// residual that forced each one (`None` for decisions).
    pub fn trail_since(&self, mark: usize) -> impl Iterator<Item = (Var, bool, Option<usize>)> + '_ {
        self.trail[mark..].iter().map(|&v| {
            let v = v as usize;
            let cause = self.cause[v];
            (self.vars[v], self.value[v] == 1, (cause != DECISION).then(|| self.sources[cause as usize]))
        })
    }

    /// Caller-side index of the residual that went infeasible last.
    pub fn conflict_source(&self) -> Option<usize> {
        self.conflict.map(|r| self.sources[r as usize])
    }

    /// Range-checks every row once and propagates.
    pub fn start(&mut self) -> bool {
        for r in 0..self.rows.len() {
            self.enqueue(r as u32);
        }
        self.propagate()
    }

    /// Sets `v` and propagates; on failure the partial work stays on the
    /// trail until the caller undoes it.
    pub fn assume(&mut self, v: usize, value: bool) -> bool {
        self.set(v as u32, value, DECISION) && self.propagate()
    }

    pub fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().unwrap() as usize;
            self.value[v] = UNSET;
            self.cause[v] = DECISION;
        }
    }

    /// Tries both values of `v`. At depth above one each branch also runs
    /// a full probing pass one level shallower before it is judged.
    pub fn probe(&mut self, v: usize, depth: u32) -> Probe {
        let mut ok = [false; 2];
        for (slot, value) in [false, true].into_iter().enumerate() {
            let mark = self.trail.len();
            ok[slot] = self.assume(v, value) && (depth <= 1 || self.closure(depth - 1));
            self.undo(mark);
        }
        match ok {
            [false, false] => Probe::Failed,
            [false, true] => Probe::Fixed(true),
            [true, false] => Probe::Fixed(false),
            [true, true] => Probe::Open,
        }
    }

    /// Probes every open variable at `depth` until nothing changes.
    /// Returns false if the current assignment is refuted.
    pub fn closure(&mut self, depth: u32) -> bool {
        loop {
            let mut changed = false;
            for v in 0..self.vars.len() {
                if self.is_set(v) {
                    continue;
                }
                match self.probe(v, depth) {
                    Probe::Failed => return false,
                    Probe::Fixed(b) => {
                        if !self.assume(v, b) {
                            return false;
                        }
                        changed = true;
                    }
                    Probe::Open => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn enqueue(&mut self, r: u32) {
        if !self.queued[r as usize] {
            self.queued[r as usize] = true;
            self.queue.push(r);
        }
    }

    fn set(&mut self, v: u32, value: bool, cause: u32) -> bool {
        let vi = v as usize;
        match self.value[vi] {
            UNSET => {
                self.value[vi] = value as i8;
                self.cause[vi] = cause;
                self.trail.push(v);
                for k in 0..self.occurs[vi].len() {
                    let r = self.occurs[vi][k];
                    self.enqueue(r);
                }
                true
            }
            x => x == value as i8,
        }
    }

    fn propagate(&mut self) -> bool {
        while let Some(r) = self.queue.pop() {
            self.queued[r as usize] = false;
            if !self.prune(r) {
                self.conflict = Some(r);
                for q in self.queue.drain(..) {
                    self.queued[q as usize] = false;
                }
                return false;
            }
        }
        true
    }

    /// Bound reasoning on one row under the current assignment. A term whose
    /// coefficient alone would push the row past zero must vanish; one whose
    /// absence would leave the row unable to reach zero must be present.
    fn prune(&mut self, r: u32) -> bool {
        let mut open = std::mem::take(&mut self.open);
        open.clear();
        let row = &self.rows[r as usize];
        let mut fixed = row.constant;
        let (mut neg, mut pos) = (0i64, 0i64);
        'terms: for (t, term) in row.terms.iter().enumerate() {
            let mut unset = 0;
            for &v in &term.vars {
                match self.value[v as usize] {
                    0 => continue 'terms,
                    1 => {}
                    _ => unset += 1,
                }
            }
            if unset == 0 {
                fixed += term.coeff;
            } else {
                if term.coeff < 0 {
                    neg += term.coeff;
                } else {
                    pos += term.coeff;
                }
                open.push(t);
            }
        }
        let (min, max) = (fixed + neg, fixed + pos);
        let mut ok = min <= 0 && max >= 0;
        for &t in &open {
            if !ok {
                break;
            }
            let a = self.rows[r as usize].terms[t].coeff;
            let (zero, one) = if a > 0 { (min + a > 0, max - a < 0) } else { (max + a < 0, min - a > 0) };
            if one {
                for k in 0..self.rows[r as usize].terms[t].vars.len() {
                    let v = self.rows[r as usize].terms[t].vars[k];
                    if !self.set(v, true, r) {
                        ok = false;
                        break;
                    }
                }
            } else if zero {
                let mut last = None;
                let mut unset = 0;
                for &v in &self.rows[r as usize].terms[t].vars {
                    match self.value[v as usize] {
                        0 => {
                            unset = usize::MAX;
                            break;
                        }
                        1 => {}
                        _ => {
                            unset += 1;
                            last = Some(v);
                        }
                    }
                }
                match unset {
                    0 => ok = false,
                    1 => ok = self.set(last.unwrap(), false, r),
                    _ => {}
                }
            }
        }
        self.open = open;
        ok
    }
}
