//! End-to-end acceptance checks, one `PASS`/`FAIL` line per criterion.
//!
//! Runs without the libtest harness so every criterion reports even when
//! an earlier one fails; the process exits non-zero if any did. All
//! comparisons are exact; only the wall-clock budgets below are limits.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use qfactor::decode::decode;
use qfactor::energy::{build_energy, export_qubo, parse_qubo, quadratize, to_spin, EnergyModel};
use qfactor::pipeline::{attempt, run_sweep, PipelineOptions, SweepOptions};
use qfactor::simplify::{reduce, ReduceOptions, ReductionReport};
use qfactor::solver::{assignment_at, ground_states, spectrum};
use qfactor::tablegen::{build_system, plan_layouts, FactorLayout};
use qfactor::{parse_poly, Assignment, Error, Poly, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Wall-clock budgets.
mod limits {
    use std::time::Duration;

    /// Compile and reduce one of the four-variable instances.
    pub const REDUCE_SMALL: Duration = Duration::from_secs(1);
    /// Compile and reduce the 20-bit instance.
    pub const REDUCE_291311: Duration = Duration::from_secs(2);
    /// Reduce, build and enumerate the three-factor instance.
    pub const TRIPRIME: Duration = Duration::from_secs(1);
    /// One `replay-poly` invocation, process start included.
    pub const REPLAY: Duration = Duration::from_millis(100);
    /// Every odd n below 256 against trial division.
    pub const ORACLE: Duration = Duration::from_secs(30);
    /// Enumerating the raw 143 and 175 systems.
    pub const PRESERVATION: Duration = Duration::from_secs(10);
    /// QUBO round trips plus the degree sample.
    pub const QUBO: Duration = Duration::from_secs(60);
    /// The whole prime-pair sweep.
    pub const SWEEP: Duration = Duration::from_secs(120);
}

/// Bit lengths swept in full.
const SWEEP_FULL_BITS: std::ops::RangeInclusive<u32> = 3..=8;
/// Bit lengths sampled for three differing positions.
const SWEEP_SAMPLED_BITS: [u32; 2] = [9, 10];
const SWEEP_SAMPLE: usize = 12;
const SWEEP_SEED: u64 = 0;
/// Deepest probing level the sweep may escalate to.
const SWEEP_MAX_DEPTH: u32 = 5;

const DEGREE_SAMPLE: usize = 100;
const DEGREE_SEED: u64 = 2018;

/// The four-qubit objective as printed for 143.
const HAMILTONIAN_143: &str =
    "5 - 3 p1 - p2 - q1 + 2 p1 q1 - 3 p2 q1 + 2 p1 p2 q1 - 3 q2 + p1 q2 + 2 p2 q2 + 2 p2 q1 q2";

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(what: &str, took: Duration, limit: Duration) -> Result<(), String> {
    ensure(took < limit, || format!("{what} took {took:.2?}, limit {limit:.2?}"))
}

fn canonical(polys: &[Poly]) -> BTreeSet<String> {
    polys.iter().map(|p| p.normalized().to_string()).collect()
}

fn canonical_text(texts: &[&str]) -> BTreeSet<String> {
    texts.iter().map(|t| parse_poly(t).unwrap().normalized().to_string()).collect()
}

fn names(vars: &[Var]) -> Vec<String> {
    vars.iter().map(Var::to_string).collect()
}

fn reduced(n: u64, layout: &str) -> Result<(FactorLayout, ReductionReport), String> {
    let layout: FactorLayout = layout.parse().map_err(|e: Error| e.to_string())?;
    let sys = build_system(n, &layout).map_err(|e| e.to_string())?;
    let r = reduce(&sys, &ReduceOptions::default()).map_err(|e| e.to_string())?;
    Ok((layout, r))
}

fn check_reduction(n: u64, layout: &str, free: &[&str], residuals: &[&str], limit: Duration) -> Result<Duration, String> {
    let t = Instant::now();
    let (_, r) = reduced(n, layout)?;
    let took = t.elapsed();
    ensure(names(&r.free_vars) == free, || format!("{n}: free variables {:?}", names(&r.free_vars)))?;
    ensure(canonical(&r.residuals) == canonical_text(residuals), || {
        format!("{n}: residuals {:?}", canonical(&r.residuals))
    })?;
    within(&n.to_string(), took, limit)?;
    Ok(took)
}

fn states(vars: &[Var]) -> impl Iterator<Item = Assignment> + '_ {
    (0..1u64 << vars.len()).map(move |i| assignment_at(vars, i))
}

/// Sorted, distinct factor tuples decoded from the model's ground states.
fn ground_factors(m: &EnergyModel, r: &ReductionReport, layout: &FactorLayout) -> Result<Vec<Vec<u64>>, String> {
    let (ground, e) = ground_states(m).map_err(|e| e.to_string())?;
    ensure(e == 0, || format!("ground energy {e}"))?;
    let mut out = BTreeSet::new();
    for a in ground {
        let original: Assignment = a.into_iter().filter(|(v, _)| !m.ancillas.contains_key(v)).collect();
        let mut f = decode(&original, r, layout).map_err(|e| e.to_string())?;
        f.sort_unstable();
        out.insert(f);
    }
    Ok(out.into_iter().collect())
}

fn qfactor(args: &[&str]) -> Result<(Vec<u8>, Duration), String> {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_qfactor")).args(args).output().map_err(|e| e.to_string())?;
    let took = t.elapsed();
    ensure(out.status.success(), || format!("qfactor {args:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
    Ok((out.stdout, took))
}

const FOUR_VARS: [&str; 3] = ["p1 + q1 - 1", "p2 + q2 - 1", "p2 q1 + p1 q2 - 1"];

fn criterion_1() -> Outcome {
    let took = check_reduction(143, "4x4", &["p1", "p2", "q1", "q2"], &FOUR_VARS, limits::REDUCE_SMALL)?;
    Ok(format!("143 -> 4 free variables, 3 residuals in {took:.2?}"))
}

fn criterion_2() -> Outcome {
    let mut slowest = Duration::ZERO;
    let took = check_reduction(
        56153,
        "8x8",
        &["p3", "p4", "q3", "q4"],
        &["p3 + q3 - 1", "p4 + q4 - 1", "p4 q3 + p3 q4 - 1"],
        limits::REDUCE_SMALL,
    )?;
    slowest = slowest.max(took);
    for (n, layout) in [(3599, "6x6"), (11663, "7x7")] {
        slowest = slowest.max(check_reduction(n, layout, &["p1", "p2", "q1", "q2"], &FOUR_VARS, limits::REDUCE_SMALL)?);
    }
    Ok(format!("56153, 3599, 11663 -> 4 free variables each, slowest {slowest:.2?}"))
}

fn criterion_3() -> Outcome {
    let took = check_reduction(
        291311,
        "10x10",
        &["p1", "p2", "p5", "q1", "q2", "q5"],
        &["p1 + q1 - 1", "p2 + q2 - 1", "p5 + q5 - 1", "p1 q2 + q1 p2 - 1", "p2 q5 + q2 p5", "p5 q1 + q5 p1 - 1"],
        limits::REDUCE_291311,
    )?;
    Ok(format!("291311 -> 6 free variables, 6 residuals in {took:.2?}"))
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let (layout, r) = reduced(175, "3x3x3")?;
    let m = build_energy(&r);
    let s = spectrum(&m).map_err(|e| e.to_string())?;
    let factors = ground_factors(&m, &r, &layout)?;
    let took = t.elapsed();
    ensure(canonical(&r.residuals) == canonical_text(&["p1 + q1 + r1 - 1", "p1 q1 + q1 r1 + p1 r1"]), || {
        format!("residuals {:?}", canonical(&r.residuals))
    })?;
    ensure(s.energies == [1, 0, 0, 2, 0, 2, 2, 7], || format!("spectrum {:?}", s.energies))?;
    ensure(factors == [vec![5, 5, 7]], || format!("decoded {factors:?}"))?;
    within("175", took, limits::TRIPRIME)?;
    Ok(format!("spectrum (1,0,0,2,0,2,2,7), ground states -> 5 x 5 x 7 in {took:.2?}"))
}

fn criterion_5() -> Outcome {
    let (out, took) = qfactor(&["replay-poly", HAMILTONIAN_143, "--order", "p1,p2,q1,q2", "--json"])?;
    let v: serde_json::Value = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
    let energies: Vec<i64> = serde_json::from_value(v["energies"].clone()).map_err(|e| e.to_string())?;
    let ground: Vec<u64> = serde_json::from_value(v["groundIndices"].clone()).map_err(|e| e.to_string())?;
    ensure(energies == [5, 2, 4, 1, 4, 3, 0, 1, 2, 0, 3, 1, 1, 1, 1, 3], || format!("diagonal {energies:?}"))?;
    ensure(ground == [6, 9], || format!("ground indices {ground:?}"))?;
    within("replay-poly", took, limits::REPLAY)?;
    Ok(format!("diagonal matches, ground |0110> |1001> in {took:.2?}"))
}

fn criterion_6() -> Outcome {
    for (n, layout, expected) in [(143, "4x4", [11, 13]), (56153, "8x8", [233, 241]), (291311, "10x10", [523, 557])] {
        let (layout, r) = reduced(n, layout)?;
        let factors = ground_factors(&build_energy(&r), &r, &layout)?;
        ensure(factors == [expected.to_vec()], || format!("{n} decoded {factors:?}"))?;
        ensure(qfactor::decode::verify(n, &expected), || format!("{n} does not verify"))?;
    }
    Ok("143 = 11 x 13, 56153 = 233 x 241, 291311 = 523 x 557".into())
}

fn bit_len(x: u64) -> u32 {
    64 - x.leading_zeros()
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let opts = PipelineOptions::default();
    let (mut composites, mut layouts) = (0, 0);
    for n in (9..256u64).step_by(2) {
        let oracle: BTreeSet<(u64, u64)> =
            (3..).take_while(|d| d * d <= n).filter(|d| n % d == 0).map(|d| (d, n / d)).collect();
        composites += !oracle.is_empty() as usize;
        let mut found = BTreeSet::new();
        for layout in plan_layouts(n, 2).map_err(|e| e.to_string())? {
            layouts += 1;
            let (lp, lq) = (layout.bits()[0], layout.bits()[1]);
            let expected: BTreeSet<Vec<u64>> = oracle
                .iter()
                .flat_map(|&(a, b)| [vec![a, b], vec![b, a]])
                .filter(|f| bit_len(f[0]) == lp && bit_len(f[1]) == lq)
                .collect();
            let got: BTreeSet<Vec<u64>> = match attempt(n, &layout, &opts) {
                Ok(a) => a.report.ground_states.iter().filter_map(|g| g.factors.clone()).collect(),
                Err(Error::Infeasible { .. }) => BTreeSet::new(),
                Err(e) => return Err(format!("{n} under {layout}: {e}")),
            };
            ensure(got == expected, || format!("{n} under {layout}: {got:?}, trial division {expected:?}"))?;
            found.extend(got.iter().map(|f| (f[0].min(f[1]), f[0].max(f[1]))));
        }
        ensure(found == oracle, || format!("{n}: {found:?}, trial division {oracle:?}"))?;
    }
    let took = t.elapsed();
    within("oracle sweep", took, limits::ORACLE)?;
    Ok(format!("{composites} composites, {layouts} layouts agree with trial division in {took:.2?}"))
}

fn solutions(residuals: &[Poly], vars: &[Var]) -> BTreeSet<Assignment> {
    states(vars).filter(|a| residuals.iter().all(|r| r.evaluate(a) == Ok(0))).collect()
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let mut detail = Vec::new();
    for (n, layout) in [(143, "4x4"), (175, "3x3x3")] {
        let sys = build_system(n, &layout.parse().unwrap()).map_err(|e| e.to_string())?;
        let vars = sys.vars();
        let raw = solutions(&sys.residuals, &vars);
        let r = reduce(&sys, &ReduceOptions::default()).map_err(|e| e.to_string())?;
        let mut expanded = BTreeSet::new();
        for free in solutions(&r.residuals, &r.free_vars) {
            let full = r.complete(&free);
            let a: Option<Assignment> = vars.iter().map(|v| full.get(v).map(|&b| (*v, b))).collect();
            expanded.insert(a.ok_or_else(|| format!("{n}: reduced solution leaves a variable open"))?);
        }
        ensure(expanded == raw, || format!("{n}: {} raw solutions, {} after reduction", raw.len(), expanded.len()))?;
        detail.push(format!("{n}: {} vars, {} solutions", vars.len(), raw.len()));
    }
    let took = t.elapsed();
    within("enumeration", took, limits::PRESERVATION)?;
    Ok(format!("{} in {took:.2?}", detail.join("; ")))
}

const WORKED_INSTANCES: [(u64, &str, &[u64]); 4] =
    [(143, "4x4", &[11, 13]), (56153, "8x8", &[233, 241]), (291311, "10x10", &[523, 557]), (175, "3x3x3", &[5, 5, 7])];

fn is_prime(x: u64) -> bool {
    x >= 2 && (2..).take_while(|d| d * d <= x).all(|d| x % d != 0)
}

fn criterion_9() -> Outcome {
    let t = Instant::now();
    for (n, layout, expected) in WORKED_INSTANCES {
        let (layout, r) = reduced(n, layout)?;
        let m = build_energy(&r);
        let q = quadratize(&m);
        let text = export_qubo(&q).map_err(|e| e.to_string())?;
        let parsed = parse_qubo(&text).map_err(|e| e.to_string())?;
        ensure(parsed.objective == q.objective && parsed.var_order == q.var_order, || format!("{n}: round trip differs"))?;
        let factors = ground_factors(&parsed, &r, &layout)?;
        ensure(factors == [expected.to_vec()], || format!("{n}: QUBO ground states decode to {factors:?}"))?;
    }

    const LIMIT: u64 = 1 << 16;
    let primes: Vec<u64> = (3..LIMIT / 3).filter(|&x| is_prime(x)).collect();
    let mut semiprimes = Vec::new();
    for (i, &p) in primes.iter().enumerate() {
        semiprimes.extend(primes[i..].iter().map(|&q| p * q).take_while(|&n| n < LIMIT));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(DEGREE_SEED);
    let mut worst = 0;
    for &n in semiprimes.choose_multiple(&mut rng, DEGREE_SAMPLE) {
        let mut built = 0;
        for layout in plan_layouts(n, 2).map_err(|e| e.to_string())? {
            let sys = build_system(n, &layout).map_err(|e| e.to_string())?;
            let Ok(r) = reduce(&sys, &ReduceOptions::default()) else { continue };
            let degree = build_energy(&r).degree();
            ensure(degree <= 3, || format!("{n} under {layout}: degree {degree}"))?;
            worst = worst.max(degree);
            built += 1;
        }
        ensure(built > 0, || format!("{n}: every layout rejected"))?;
    }
    let took = t.elapsed();
    within("round trips and degree sample", took, limits::QUBO)?;
    Ok(format!("4 QUBO round trips decode; {DEGREE_SAMPLE} sampled semiprimes, max degree {worst}, in {took:.2?}"))
}

fn criterion_10() -> Outcome {
    let mut checked = 0;
    for (n, layout, _) in WORKED_INSTANCES {
        let (_, r) = reduced(n, layout)?;
        let m = build_energy(&r);
        let spin = to_spin(&m);
        for a in states(&m.var_order) {
            let e = m.objective.evaluate(&a).map_err(|e| e.to_string())?;
            let s = spin.evaluate_scaled(|v| if a[&v] { -1 } else { 1 });
            ensure(s == e << spin.shift, || format!("{n}: spin form differs at {a:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} assignments over 4 instances agree"))
}

fn criterion_11() -> Outcome {
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut classes: Vec<(u32, u32, Option<usize>)> = Vec::new();
    classes.extend(SWEEP_FULL_BITS.map(|l| (l, 2, None)));
    classes.extend(SWEEP_FULL_BITS.map(|l| (l, 3, None)));
    classes.extend(SWEEP_SAMPLED_BITS.map(|l| (l, 3, Some(SWEEP_SAMPLE))));
    let mut by_d = std::collections::BTreeMap::new();
    for (bits, d, sample) in classes {
        let opts = SweepOptions { sample, seed: SWEEP_SEED, max_depth: SWEEP_MAX_DEPTH, ..SweepOptions::new(bits, d) };
        let rows = run_sweep(&opts).map_err(|e| e.to_string())?;
        for row in &rows {
            ensure(row.free_vars <= 2 * d as usize, || {
                format!("{} = {} x {} keeps {} free variables (limit {})", row.n, row.p, row.q, row.free_vars, 2 * d)
            })?;
            ensure(row.verified, || format!("{} = {} x {} does not decode", row.n, row.p, row.q))?;
        }
        let entry = by_d.entry(d).or_insert((0, 0));
        entry.0 += rows.len();
        entry.1 = entry.1.max(rows.iter().map(|r| r.free_vars).max().unwrap_or(0));
    }
    for (d, (count, worst)) in by_d {
        lines.push(format!("d={d}: {count} products, worst {worst}"));
    }
    let took = t.elapsed();
    within("sweep", took, limits::SWEEP)?;
    Ok(format!("{} in {took:.2?}", lines.join("; ")))
}

fn criterion_12() -> Outcome {
    let args = ["solve", "291311", "--anneal", "--seed", "7", "--json"];
    let (first, _) = qfactor(&args)?;
    let (second, _) = qfactor(&args)?;
    ensure(first == second, || "reports differ between runs".into())?;
    let v: serde_json::Value = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
    let energy = v["groundStates"][0]["energy"].as_i64();
    ensure(energy == Some(0), || format!("energy {energy:?}"))?;
    ensure(v["verified"] == true, || "report not verified".into())?;
    Ok(format!("{} identical bytes, energy 0, factors {}", first.len(), v["factors"][0]["factors"]))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("143 reduces to the four-variable system", criterion_1),
        ("56153, 3599, 11663 reduce to the same shape", criterion_2),
        ("291311 reduces to six variables", criterion_3),
        ("175 residuals, spectrum and decode", criterion_4),
        ("replay of the 143 objective", criterion_5),
        ("ground states decode and verify", criterion_6),
        ("oracle equivalence below 256", criterion_7),
        ("reduction preserves solutions", criterion_8),
        ("quadratization, QUBO round trip, degree bound", criterion_9),
        ("spin-form equivalence", criterion_10),
        ("prime-pair sweep bound", criterion_11),
        ("seeded annealing is deterministic", criterion_12),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| Err(e.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
