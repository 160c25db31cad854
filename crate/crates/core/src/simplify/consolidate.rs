//! Tidying of the residual set once propagation has stalled.
//!
//! Every step keeps the solution set unchanged: a monomial is removed only
//! when another residual makes it impossible, and a residual is removed only
//! when it is a rational combination of the ones that remain.

use std::cmp::Reverse;

use crate::binpoly::{Assignment, Monomial, Poly};

use super::{Deduction, Rule};

/// Index of a residual in `others` that cannot reach zero once every
/// variable of `m` is 1, i.e. a witness that `m` vanishes on all solutions.
pub(super) fn forced_zero_by<'a>(m: &Monomial, others: impl IntoIterator<Item = (usize, &'a Poly)>) -> Option<usize> {
    let ones: Assignment = m.vars().iter().map(|&v| (v, true)).collect();
    others.into_iter().find_map(|(j, s)| {
        let s = s.fix_all(&ones);
        (s.lower_bound() > 0 || s.upper_bound() < 0).then_some(j)
    })
}

fn nonnegative(p: &Poly) -> bool {
    p.constant_term() == 0 && p.terms().all(|(_, c)| c > 0)
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Fraction-free elimination of `target` against the row space of `rows`.
pub(super) fn in_span<'a>(target: &Poly, rows: impl IntoIterator<Item = &'a Poly>) -> bool {
    let rows: Vec<&Poly> = rows.into_iter().collect();
    let mut mons: Vec<&Monomial> = rows.iter().chain([&target]).flat_map(|p| p.terms().map(|(m, _)| m)).collect();
    mons.sort();
    mons.dedup();
    let dense = |p: &Poly| -> Vec<i128> { mons.iter().map(|m| p.coeff(m) as i128).collect() };
    let reduce = |mut row: Vec<i128>, pivots: &[(usize, Vec<i128>)]| -> Vec<i128> {
        for (c, piv) in pivots {
            if row[*c] != 0 {
                let (a, b) = (piv[*c], row[*c]);
                for (x, &y) in row.iter_mut().zip(piv) {
                    *x = *x * a - y * b;
                }
                let g = row.iter().fold(0, |g, &x| gcd(g, x));
                if g > 1 {
                    row.iter_mut().for_each(|x| *x /= g);
                }
            }
        }
        row
    };
    let mut pivots: Vec<(usize, Vec<i128>)> = Vec::new();
    for p in rows {
        let row = reduce(dense(p), &pivots);
        if let Some(c) = row.iter().position(|&x| x != 0) {
            pivots.push((c, row));
        }
    }
    reduce(dense(target), &pivots).iter().all(|&x| x == 0)
}

fn complexity(p: &Poly) -> (Reverse<usize>, Reverse<usize>, Vec<Monomial>) {
    (Reverse(p.num_terms()), Reverse(p.degree()), p.terms().map(|(m, _)| m.clone()).collect())
}

/// Presentation order of a finished residual list: by degree, then by the
/// monomials in order.
pub(super) fn presentation_key(p: &Poly) -> (usize, Vec<Monomial>) {
    (p.degree(), p.terms().map(|(m, _)| m.clone()).collect())
}

/// Normalizes the live residuals, then visits them from the most complex
/// down, stripping monomials other residuals rule out and dropping any
/// residual the rest already imply.
pub(super) fn consolidate(live: &mut [Option<Poly>], log: &mut Vec<Deduction>) {
    for slot in live.iter_mut() {
        if let Some(p) = slot {
            let q = p.normalized();
            *slot = (!q.is_zero()).then_some(q);
        }
    }
    let mut order: Vec<usize> = (0..live.len()).filter(|&i| live[i].is_some()).collect();
    order.sort_by_cached_key(|&i| (complexity(live[i].as_ref().unwrap()), i));

    for i in order {
        let r = live[i].take().unwrap();
        let others = || live.iter().enumerate().filter_map(|(j, p)| p.as_ref().map(|p| (j, p)));
        let rewritten = if nonnegative(&r) {
            if r.num_terms() == 1 {
                let (m, _) = r.terms().next().unwrap();
                if let Some(j) = forced_zero_by(m, others()) {
                    log.push(Deduction::Drop { residual: i, by: Some(j) });
                    continue;
                }
            }
            r
        } else {
            let mut acc = r.clone();
            for (m, _) in r.terms().filter(|(m, _)| !m.is_one()) {
                if let Some(j) = forced_zero_by(m, others()) {
                    acc = acc.drop_multiples_of(m);
                    log.push(Deduction::MonomialZero {
                        monomial: m.clone(),
                        rule: Rule::Consolidate,
                        source: Some(j),
                        target: Some(i),
                    });
                }
            }
            acc.normalized()
        };
        if rewritten.is_zero() || in_span(&rewritten, others().map(|(_, p)| p)) {
            log.push(Deduction::Drop { residual: i, by: None });
            continue;
        }
        live[i] = Some(rewritten);
    }
}
