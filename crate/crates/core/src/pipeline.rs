//! End-to-end runs: compile, reduce, build the energy, solve, decode.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::binpoly::{Assignment, Poly, Var};
use crate::decode::{SolveReport, Timings};
use crate::energy::{build_energy, EnergyModel};
use crate::simplify::{reduce, ReduceOptions, ReductionReport};
use crate::solver::{anneal, ground_states_with_cap, AnnealParams, DEFAULT_CAP};
use crate::tablegen::{build_system, plan_layouts, FactorLayout};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum SolverChoice {
    Exhaustive { cap: usize },
    Anneal(AnnealParams),
}

impl Default for SolverChoice {
    fn default() -> Self {
        SolverChoice::Exhaustive { cap: DEFAULT_CAP }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOptions {
    pub factor_count: usize,
    /// Fixed layout; otherwise every planned layout is tried in order.
    pub layout: Option<FactorLayout>,
    pub reduce: ReduceOptions,
    pub solver: SolverChoice,
    /// Include wall-clock timings (which makes reports differ run to run).
    pub timings: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            factor_count: 2,
            layout: None,
            reduce: ReduceOptions::default(),
            solver: SolverChoice::default(),
            timings: false,
        }
    }
}

/// Every artifact of one layout's run.
#[derive(Clone, Debug)]
pub struct Attempt {
    pub layout: FactorLayout,
    pub reduction: ReductionReport,
    pub model: EnergyModel,
    pub report: SolveReport,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs one layout. `Err(Infeasible)` means the layout admits no
/// factorization of `n`.
pub fn attempt(n: u64, layout: &FactorLayout, opts: &PipelineOptions) -> Result<Attempt> {
    let t = Instant::now();
    let system = build_system(n, layout)?;
    let compile_ms = ms(t);

    let t = Instant::now();
    let reduction = reduce(&system, &opts.reduce)?;
    let reduce_ms = ms(t);

    let t = Instant::now();
    let model = build_energy(&reduction);
    let energy_ms = ms(t);

    let t = Instant::now();
    let (states, solver) = match &opts.solver {
        SolverChoice::Exhaustive { cap } => {
            let (states, e) = ground_states_with_cap(&model, *cap)?;
            (states.into_iter().map(|a| (a, e)).collect::<Vec<_>>(), "exhaustive".to_string())
        }
        SolverChoice::Anneal(p) => {
            let r = anneal(&model, p)?;
            let label = format!("anneal (seed {}, restart {})", p.seed, r.restart);
            (vec![(r.assignment, r.energy)], label)
        }
    };
    let solve_ms = ms(t);

    let exhaustive = matches!(opts.solver, SolverChoice::Exhaustive { .. });
    if exhaustive && states.first().is_some_and(|(_, e)| *e > 0) {
        return Err(Error::Infeasible {
            n,
            layout: layout.to_string(),
            reason: "no zero-energy state".into(),
        });
    }
    let mut report = SolveReport::new(n, layout, &reduction, &model.var_order, &states, &solver);
    if states.iter().any(|(_, e)| *e == 0) && !report.verified {
        return Err(Error::Inconsistent(format!("zero-energy state of {n} under {layout} does not verify")));
    }
    if opts.timings {
        report.timings = Some(Timings { compile_ms, reduce_ms, energy_ms, solve_ms });
    }
    Ok(Attempt { layout: layout.clone(), reduction, model, report })
}

/// Odd part of `n` and the power of two removed.
pub fn strip_twos(n: u64) -> (u64, u32) {
    if n == 0 {
        return (0, 0);
    }
    let k = n.trailing_zeros();
    (n >> k, k)
}

/// Factors `n` under the first layout that yields a verified factorization.
/// Powers of two are divided out first and recorded in the report.
pub fn run_pipeline(n: u64, opts: &PipelineOptions) -> Result<Attempt> {
    let (odd, twos) = strip_twos(n);
    let layouts = match &opts.layout {
        Some(l) => vec![l.clone()],
        None => plan_layouts(odd, opts.factor_count)?,
    };
    let mut unverified = None;
    let mut too_wide = None;
    for layout in &layouts {
        match attempt(odd, layout, opts) {
            Ok(mut a) => {
                a.report.twos = twos;
                if a.report.verified {
                    return Ok(a);
                }
                unverified.get_or_insert(a);
            }
            Err(Error::Infeasible { .. }) if opts.layout.is_none() => {}
            // A later layout may reduce further; report this only if none does.
            Err(e @ Error::TooManyVars { .. }) if opts.layout.is_none() => {
                too_wide.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(e) = too_wide.filter(|_| unverified.is_none()) {
        return Err(e);
    }
    unverified.ok_or_else(|| Error::Infeasible {
        n: odd,
        layout: layouts.iter().map(FactorLayout::to_string).collect::<Vec<_>>().join(","),
        reason: "no factorization under hypotheses".into(),
    })
}

/// Right-hand constants of the two-bit-difference form
/// `pa + qa = x, pb + qb = y, pa qb + pb qa = z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ReducedPattern {
    pub x: u8,
    pub y: u8,
    pub z: u8,
}

impl ReducedPattern {
    /// Reads the pattern off a reduction with exactly four free variables
    /// `pa, pb, qa, qb`; `None` for any other shape.
    pub fn extract(r: &ReductionReport) -> Option<Self> {
        let [Var::Factor { factor: 0, bit: a }, Var::Factor { factor: 0, bit: b }, qa, qb] = r.free_vars[..] else {
            return None;
        };
        if qa != Var::factor(1, a) || qb != Var::factor(1, b) || r.residuals.len() != 3 {
            return None;
        }
        let pv = |i| Poly::var(Var::factor(0, i));
        let qv = |i| Poly::var(Var::factor(1, i));
        let rhs = |lhs: Poly| -> Option<u8> {
            (0..=2).find(|&c| r.residuals.contains(&(&lhs - &Poly::constant(c)).normalized())).map(|c| c as u8)
        };
        Some(ReducedPattern {
            x: rhs(&pv(a) + &qv(a))?,
            y: rhs(&pv(b) + &qv(b))?,
            z: rhs(&(&pv(a) * &qv(b)) + &(&pv(b) * &qv(a)))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub n: u64,
    pub p: u64,
    pub q: u64,
    pub free_vars: usize,
    pub variables: Vec<String>,
    /// Probing depth at which the count was reached.
    pub depth: u32,
    pub pattern: Option<ReducedPattern>,
    /// Decoded ground states multiply back to `n`.
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepOptions {
    pub bits: u32,
    pub differing: u32,
    /// Probe at this depth first...
    pub depth: u32,
    /// ...and go deeper, up to here, while the count exceeds `2 d`.
    pub max_depth: u32,
    /// Keep a seeded random subset of this many pairs.
    pub sample: Option<usize>,
    pub seed: u64,
}

impl SweepOptions {
    pub fn new(bits: u32, differing: u32) -> Self {
        SweepOptions { bits, differing, depth: 2, max_depth: 5, sample: None, seed: 0 }
    }
}

fn is_prime(x: u64) -> bool {
    x >= 2 && (x < 4 || (x % 2 != 0 && (3..).step_by(2).take_while(|d| d * d <= x).all(|d| x % d != 0)))
}

/// Pairs `p < q` of primes with exactly `bits` bits whose binary forms
/// differ in exactly `differing` positions.
pub fn sweep_pairs(bits: u32, differing: u32) -> Vec<(u64, u64)> {
    let primes: Vec<u64> = (1u64 << (bits - 1)..1u64 << bits).filter(|&x| is_prime(x)).collect();
    let mut out = Vec::new();
    for (i, &p) in primes.iter().enumerate() {
        for &q in &primes[i + 1..] {
            if (p ^ q).count_ones() == differing {
                out.push((p, q));
            }
        }
    }
    out
}

fn sweep_row(p: u64, q: u64, opts: &SweepOptions) -> Result<SweepRow> {
    let n = p * q;
    let layout = FactorLayout::new(vec![opts.bits, opts.bits])?;
    let system = build_system(n, &layout)?;
    let target = 2 * opts.differing as usize;
    let mut depth = opts.depth;
    let reduction = loop {
        let r = reduce(&system, &ReduceOptions { max_depth: depth, complement: false })?;
        if r.free_vars.len() <= target || depth >= opts.max_depth {
            break r;
        }
        depth += 1;
    };
    let verified = if reduction.free_vars.len() <= 20 {
        let model = build_energy(&reduction);
        let (states, e) = ground_states_with_cap(&model, 20)?;
        let states: Vec<(Assignment, i64)> = states.into_iter().map(|a| (a, e)).collect();
        e == 0 && SolveReport::new(n, &layout, &reduction, &model.var_order, &states, "exhaustive").verified
    } else {
        false
    };
    Ok(SweepRow {
        n,
        p,
        q,
        free_vars: reduction.free_vars.len(),
        variables: reduction.free_vars.iter().map(Var::to_string).collect(),
        depth,
        pattern: ReducedPattern::extract(&reduction),
        verified,
    })
}

/// Compiles and reduces the product of every selected prime pair. Probing
/// depth rises per instance only while the free-variable count is above
/// `2 d`; each row records the depth it needed.
pub fn run_sweep(opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    if opts.bits < 3 || opts.bits > 31 {
        return Err(Error::InvalidLayout(format!("sweep bit length {} outside 3..=31", opts.bits)));
    }
    let mut pairs = sweep_pairs(opts.bits, opts.differing);
    if let Some(k) = opts.sample {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        pairs = pairs.choose_multiple(&mut rng, k.min(pairs.len())).copied().collect();
        pairs.sort_unstable();
    }
    pairs.par_iter().map(|&(p, q)| sweep_row(p, q, opts)).collect()
}
