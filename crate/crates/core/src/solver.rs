//! Ground-state search: exhaustive enumeration of the full spectrum, or
//! seeded simulated annealing for models too wide to enumerate.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::binpoly::{Assignment, Var};
use crate::energy::EnergyModel;
use crate::{Error, Result};

/// Widest model enumerated by default (16M basis states).
pub const DEFAULT_CAP: usize = 24;

const CHUNK: usize = 1 << 14;

/// Objective terms as bitmasks over basis indices.
struct Compiled {
    terms: Vec<(i64, u64)>,
}

impl Compiled {
    fn new(m: &EnergyModel, cap: usize) -> Result<Self> {
        let k = m.var_order.len();
        if k > cap {
            return Err(Error::TooManyVars { count: k, cap });
        }
        let mut terms = Vec::with_capacity(m.objective.num_terms());
        for (t, c) in m.objective.terms() {
            let mut mask = 0u64;
            for v in t.vars() {
                let i = m.var_order.iter().position(|x| x == v).ok_or(Error::MissingVar(*v))?;
                mask |= 1 << (k - 1 - i);
            }
            terms.push((c, mask));
        }
        Ok(Compiled { terms })
    }

    fn energy(&self, index: u64) -> i64 {
        self.terms.iter().filter(|&&(_, m)| index & m == m).map(|&(c, _)| c).sum()
    }
}

/// Assignment for basis index `index`, most significant bit first.
pub fn assignment_at(var_order: &[Var], index: u64) -> Assignment {
    let k = var_order.len();
    var_order.iter().enumerate().map(|(i, &v)| (v, index >> (k - 1 - i) & 1 == 1)).collect()
}

/// Basis label such as `|0110>`.
pub fn ket(var_order: &[Var], a: &Assignment) -> String {
    let bits: String = var_order.iter().map(|v| if a[v] { '1' } else { '0' }).collect();
    format!("|{bits}>")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spectrum {
    pub var_order: Vec<Var>,
    pub energies: Vec<i64>,
    pub ground_energy: i64,
    pub ground_indices: Vec<u64>,
}

impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.var_order.iter().map(Var::to_string).collect();
        writeln!(f, "# basis order: {}", names.join(" "))?;
        let k = self.var_order.len();
        for (i, e) in self.energies.iter().enumerate() {
            let bits: String = (0..k).map(|b| if i >> (k - 1 - b) & 1 == 1 { '1' } else { '0' }).collect();
            let mark = if *e == self.ground_energy { "  *" } else { "" };
            writeln!(f, "{i:>4} |{bits}> {e}{mark}")?;
        }
        Ok(())
    }
}

pub fn spectrum(m: &EnergyModel) -> Result<Spectrum> {
    spectrum_with_cap(m, DEFAULT_CAP)
}

/// Energy of every basis state, computed in parallel over disjoint index
/// ranges.
pub fn spectrum_with_cap(m: &EnergyModel, cap: usize) -> Result<Spectrum> {
    let c = Compiled::new(m, cap)?;
    let size = 1usize << m.var_order.len();
    let mut energies = vec![0i64; size];
    energies.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, out)| {
        let base = (chunk * CHUNK) as u64;
        for (j, e) in out.iter_mut().enumerate() {
            *e = c.energy(base + j as u64);
        }
    });
    let ground_energy = *energies.iter().min().unwrap();
    let ground_indices = (0..size as u64).filter(|&i| energies[i as usize] == ground_energy).collect();
    Ok(Spectrum { var_order: m.var_order.clone(), energies, ground_energy, ground_indices })
}

/// Every minimum-energy assignment, in ascending basis index, with the
/// minimum. Unlike [`spectrum`] this keeps no per-state storage.
pub fn ground_states(m: &EnergyModel) -> Result<(Vec<Assignment>, i64)> {
    ground_states_with_cap(m, DEFAULT_CAP)
}

pub fn ground_states_with_cap(m: &EnergyModel, cap: usize) -> Result<(Vec<Assignment>, i64)> {
    let c = Compiled::new(m, cap)?;
    let size = 1u64 << m.var_order.len();
    let chunks = size.div_ceil(CHUNK as u64);
    let per_chunk: Vec<(i64, Vec<u64>)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK as u64;
            let hi = (lo + CHUNK as u64).min(size);
            let mut best = (i64::MAX, Vec::new());
            for i in lo..hi {
                let e = c.energy(i);
                if e < best.0 {
                    best = (e, vec![i]);
                } else if e == best.0 {
                    best.1.push(i);
                }
            }
            best
        })
        .collect();
    let min = per_chunk.iter().map(|(e, _)| *e).min().unwrap();
    let states = per_chunk
        .into_iter()
        .filter(|(e, _)| *e == min)
        .flat_map(|(_, idx)| idx)
        .map(|i| assignment_at(&m.var_order, i))
        .collect();
    Ok((states, min))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnealParams {
    pub seed: u64,
    pub restarts: u32,
    pub sweeps: u32,
    pub t0: f64,
    pub t_final: f64,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams { seed: 0, restarts: 8, sweeps: 500, t0: 4.0, t_final: 0.05 }
    }
}

impl AnnealParams {
    fn validate(&self) -> Result<()> {
        let ok = self.restarts >= 1 && self.sweeps >= 1 && self.t0 > self.t_final && self.t_final > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Inconsistent(format!("invalid anneal parameters {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnealResult {
    pub assignment: Assignment,
    pub energy: i64,
    pub restart: u32,
}

/// For each variable, the terms containing it with that variable removed:
/// flipping it changes the energy by `±` the sum of those that are active.
struct Deltas {
    constant: i64,
    terms: Vec<(i64, Vec<usize>)>,
    partial: Vec<Vec<(i64, Vec<usize>)>>,
}

impl Deltas {
    fn new(m: &EnergyModel) -> Result<Self> {
        let k = m.var_order.len();
        let pos = |v: &Var| m.var_order.iter().position(|x| x == v).ok_or(Error::MissingVar(*v));
        let mut constant = 0;
        let mut terms = Vec::new();
        let mut partial = vec![Vec::new(); k];
        for (t, c) in m.objective.terms() {
            if t.is_one() {
                constant = c;
                continue;
            }
            let idx = t.vars().iter().map(pos).collect::<Result<Vec<_>>>()?;
            for &i in &idx {
                partial[i].push((c, idx.iter().copied().filter(|&j| j != i).collect()));
            }
            terms.push((c, idx));
        }
        Ok(Deltas { constant, terms, partial })
    }

    fn energy(&self, x: &[bool]) -> i64 {
        self.constant + self.terms.iter().filter(|(_, v)| v.iter().all(|&i| x[i])).map(|(c, _)| c).sum::<i64>()
    }

    fn flip_delta(&self, x: &[bool], i: usize) -> i64 {
        let gain: i64 = self.partial[i].iter().filter(|(_, v)| v.iter().all(|&j| x[j])).map(|(c, _)| c).sum();
        if x[i] {
            -gain
        } else {
            gain
        }
    }
}

fn anneal_once(d: &Deltas, k: usize, p: &AnnealParams, restart: u32) -> (Vec<bool>, i64) {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(restart as u64);
    let mut x: Vec<bool> = (0..k).map(|_| rng.gen()).collect();
    let mut e = d.energy(&x);
    let (mut best, mut best_e) = (x.clone(), e);
    let ratio = p.t_final / p.t0;
    for s in 0..p.sweeps {
        let frac = if p.sweeps > 1 { s as f64 / (p.sweeps - 1) as f64 } else { 1.0 };
        let t = p.t0 * ratio.powf(frac);
        for i in 0..k {
            let delta = d.flip_delta(&x, i);
            if delta <= 0 || rng.gen::<f64>() < (-(delta as f64) / t).exp() {
                x[i] = !x[i];
                e += delta;
                if e < best_e {
                    best_e = e;
                    best.clone_from(&x);
                }
            }
        }
    }
    (best, best_e)
}

/// Single-bit-flip Metropolis annealing with geometric cooling. Restart `r`
/// draws from stream `r` of a generator seeded with `p.seed`, so results
/// do not depend on scheduling; the lowest energy wins, then the lowest
/// restart index.
pub fn anneal(m: &EnergyModel, p: &AnnealParams) -> Result<AnnealResult> {
    p.validate()?;
    let d = Deltas::new(m)?;
    let k = m.var_order.len();
    let runs: Vec<(Vec<bool>, i64)> = (0..p.restarts).into_par_iter().map(|r| anneal_once(&d, k, p, r)).collect();
    let (restart, (x, energy)) = runs
        .into_iter()
        .enumerate()
        .min_by_key(|(r, (_, e))| (*e, *r))
        .expect("at least one restart");
    let assignment = m.var_order.iter().copied().zip(x).collect();
    Ok(AnnealResult { assignment, energy, restart: restart as u32 })
}
