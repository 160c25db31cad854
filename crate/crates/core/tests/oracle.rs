use std::collections::BTreeSet;

use qfactor::pipeline::{attempt, run_pipeline, PipelineOptions};
use qfactor::tablegen::plan_layouts;
use qfactor::Error;

fn bit_len(x: u64) -> u32 {
    64 - x.leading_zeros()
}

/// Unordered factor pairs `d <= n / d` with `d >= 3`, by trial division.
fn trial_pairs(n: u64) -> BTreeSet<(u64, u64)> {
    (3..).take_while(|d| d * d <= n).filter(|d| n % d == 0).map(|d| (d, n / d)).collect()
}

/// Every layout of every odd n below 256: the ground states decode to
/// exactly the factor pairs of the layout's bit lengths, and layouts without
/// such pairs are rejected.
#[test]
fn ground_states_match_trial_division() {
    let opts = PipelineOptions::default();
    for n in (9..256u64).step_by(2) {
        let oracle = trial_pairs(n);
        let mut found = BTreeSet::new();
        for layout in plan_layouts(n, 2).unwrap() {
            let (lp, lq) = (layout.bits()[0], layout.bits()[1]);
            let expected: BTreeSet<Vec<u64>> = oracle
                .iter()
                .flat_map(|&(a, b)| [vec![a, b], vec![b, a]])
                .filter(|f| bit_len(f[0]) == lp && bit_len(f[1]) == lq)
                .collect();
            match attempt(n, &layout, &opts) {
                Ok(a) => {
                    let got: BTreeSet<Vec<u64>> =
                        a.report.ground_states.iter().map(|g| g.factors.clone().expect("decodes")).collect();
                    assert!(a.report.ground_states.iter().all(|g| g.energy == 0), "{n} under {layout}");
                    assert_eq!(got, expected, "{n} under {layout}");
                    found.extend(got.into_iter().map(|f| (f[0].min(f[1]), f[0].max(f[1]))));
                }
                Err(Error::Infeasible { .. }) => assert!(expected.is_empty(), "{n} under {layout} rejected"),
                Err(e) => panic!("{n} under {layout}: {e}"),
            }
        }
        assert_eq!(found, oracle, "{n}");
    }
}

#[test]
fn pipeline_factors_composites_and_rejects_primes() {
    let opts = PipelineOptions::default();
    for n in (9..256u64).step_by(2) {
        let oracle = trial_pairs(n);
        match run_pipeline(n, &opts) {
            Ok(a) => {
                assert!(a.report.verified, "{n}");
                for t in &a.report.factors {
                    assert!(oracle.contains(&(t.factors[0], t.factors[1])), "{n}: {:?}", t.factors);
                }
            }
            Err(Error::Infeasible { .. }) => assert!(oracle.is_empty(), "{n} is composite"),
            Err(e) => panic!("{n}: {e}"),
        }
    }
}
