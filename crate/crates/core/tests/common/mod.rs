//! Shared test infrastructure: a seeded random circuit generator and an
//! explicit-state BFS oracle for bounded breakability, independent of the
//! CNF pipeline.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aigclass::aig::{Aig, GateSpec, LatchSpec, Literal, Requirement};
use aigclass::{ComponentId, ComponentSet};

/// Random circuit with up to 3 inputs, 6 latches, and 15 gates, always with
/// at least one requirement. Deterministic per seed.
pub fn random_aig(seed: u64) -> Aig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_inputs = rng.gen_range(0..=3);
    let num_latches = rng.gen_range(1..=6);
    let num_gates = rng.gen_range(0..=15);

    let input_vars: Vec<u32> = (1..=num_inputs).collect();
    let latch_vars: Vec<u32> = (num_inputs + 1..=num_inputs + num_latches).collect();
    let first_gate = num_inputs + num_latches + 1;
    let gate_vars: Vec<u32> = (first_gate..first_gate + num_gates).collect();
    let max_var = num_inputs + num_latches + num_gates;

    let any_literal = |rng: &mut ChaCha8Rng, below: u32| -> Literal {
        // Mostly wires, occasionally a constant.
        if below == 0 || rng.gen_bool(0.05) {
            return if rng.gen_bool(0.5) {
                Literal::TRUE
            } else {
                Literal::FALSE
            };
        }
        Literal::from_var(rng.gen_range(1..=below), rng.gen_bool(0.5))
    };

    let latches: Vec<LatchSpec> = latch_vars
        .iter()
        .map(|&var| LatchSpec {
            var,
            next: any_literal(&mut rng, max_var),
            init: rng.gen_bool(0.5),
        })
        .collect();
    let gates: Vec<GateSpec> = gate_vars
        .iter()
        .map(|&var| GateSpec {
            var,
            rhs0: any_literal(&mut rng, var - 1),
            rhs1: any_literal(&mut rng, var - 1),
        })
        .collect();
    let num_reqs = rng.gen_range(1..=3);
    let requirements: Vec<Requirement> = (0..num_reqs)
        .map(|i| Requirement {
            name: format!("r{}", i + 1),
            good: any_literal(&mut rng, max_var),
        })
        .collect();
    Aig::new(input_vars, latches, gates, requirements, Default::default())
        .expect("generated circuit is structurally valid")
}

/// All subsets of the latch components of `aig`, smallest first.
pub fn all_latch_attackers(aig: &Aig) -> Vec<ComponentSet> {
    let latches: Vec<ComponentId> = (0..aig.num_latches() as u32)
        .map(ComponentId::Latch)
        .collect();
    let mut subsets: Vec<ComponentSet> = (0u32..(1 << latches.len()))
        .map(|mask| {
            latches
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &c)| c)
                .collect()
        })
        .collect();
    subsets.sort_by_key(|s| (s.len(), s.iter().copied().collect::<Vec<_>>()));
    subsets
}

/// Explicit-state bounded model checking over the compromised transition
/// system: attacked latches take arbitrary values every frame. Returns true
/// iff some input sequence of length <= bound+1 falsifies the requirement.
pub fn oracle_breaks(aig: &Aig, attacker: &ComponentSet, req: usize, bound: usize) -> bool {
    assert!(aig.num_latches() <= 16, "oracle uses dense state sets");
    assert!(attacker.iter().all(|c| matches!(c, ComponentId::Latch(_))));
    let good = aig.requirements()[req].good;
    let num_latches = aig.num_latches();
    let num_inputs = aig.num_inputs();

    let free_latches: Vec<usize> = (0..num_latches)
        .filter(|&i| attacker.contains(&ComponentId::Latch(i as u32)))
        .collect();
    let expand = |state: Vec<bool>| -> Vec<Vec<bool>> {
        let mut variants = vec![state];
        for &latch in &free_latches {
            variants = variants
                .into_iter()
                .flat_map(|s| {
                    [false, true].into_iter().map(move |b| {
                        let mut v = s.clone();
                        v[latch] = b;
                        v
                    })
                })
                .collect();
        }
        variants
    };
    let encode = |state: &[bool]| -> u32 {
        state
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | (b as u32) << i)
    };
    let decode = |mask: u32| -> Vec<bool> { (0..num_latches).map(|i| mask >> i & 1 == 1).collect() };

    let initial = aig.initial_state(&Default::default()).unwrap();
    let mut states: BTreeSet<u32> = expand(initial).iter().map(|s| encode(s)).collect();
    for _frame in 0..=bound {
        let mut next_states = BTreeSet::new();
        for &mask in &states {
            let state = decode(mask);
            for input_mask in 0u32..(1 << num_inputs) {
                let input: Vec<bool> = (0..num_inputs).map(|i| input_mask >> i & 1 == 1).collect();
                let valuation = aig.frame_valuation(&state, &input, &Default::default());
                if !aigclass::aig::eval_literal(good, &valuation) {
                    return true;
                }
                let (next, _) = aig.simulate_step(&state, &input, &Default::default()).unwrap();
                for variant in expand(next) {
                    next_states.insert(encode(&variant));
                }
            }
        }
        states = next_states;
    }
    false
}
