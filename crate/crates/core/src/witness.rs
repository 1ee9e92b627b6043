//! Extracts (inputs, attack strategy) witnesses from SAT models and
//! validates them by replaying on the simulator. Every SAT verdict in the
//! classification pipeline goes through replay; a mismatch signals an
//! encoding or solver bug and is never silently accepted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aig::{eval_literal, Aig, Attack, ComponentId, Literal};
use crate::analysis::ComponentSet;
use crate::unroll::UnrolledInstance;

/// A concrete demonstration that `attacker` breaks the requirement within
/// `step` frames: per-frame inputs and per-frame attack values up to the
/// first violating frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub requirement: usize,
    pub attacker: Vec<ComponentId>,
    /// First frame at which the requirement literal is false.
    pub step: usize,
    /// One input vector per frame 0..=step.
    pub inputs: Vec<Vec<bool>>,
    /// One attack per frame 0..=step; each map covers exactly the attacker.
    pub attacks: Vec<BTreeMap<ComponentId, bool>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WitnessError {
    #[error("model does not falsify requirement {0} at any frame within the bound")]
    NoViolation(usize),
    #[error("replay diverges at frame {frame}: requirement literal still holds")]
    Mismatch { frame: usize },
    #[error("witness is malformed: {0}")]
    Malformed(String),
}

/// Reads the witness out of a satisfying model of `inst` under the
/// attacker/requirement assumptions. The strategy is truncated at the first
/// violating frame.
pub fn extract(
    inst: &UnrolledInstance,
    model: &[bool],
    aig: &Aig,
    attacker: &ComponentSet,
    req: usize,
) -> Result<Witness, WitnessError> {
    let good = aig.requirements()[req].good;
    let model_value = |lit: i32| -> bool {
        let v = lit.unsigned_abs() as usize;
        let value = model.get(v).copied().unwrap_or(false);
        value == (lit > 0)
    };
    let step = (0..=inst.bound)
        .find(|&k| {
            inst.lit_at(good, k)
                .map(|l| !model_value(l))
                .unwrap_or(false)
        })
        .ok_or(WitnessError::NoViolation(req))?;

    let inputs = (0..=step)
        .map(|k| {
            (0..aig.num_inputs())
                .map(|i| {
                    let var = aig.input_vars()[i];
                    // Inputs outside the encoded cone are unconstrained.
                    inst.lit_at(Literal::from_var(var, false), k)
                        .map(|l| model_value(l))
                        .unwrap_or(false)
                })
                .collect()
        })
        .collect();
    let attacks = (0..=step)
        .map(|k| {
            attacker
                .iter()
                .map(|&c| {
                    let value = inst
                        .actions
                        .get(&(c, k))
                        .map(|&v| model_value(v))
                        .unwrap_or(false);
                    (c, value)
                })
                .collect()
        })
        .collect();
    Ok(Witness {
        requirement: req,
        attacker: attacker.iter().copied().collect(),
        step,
        inputs,
        attacks,
    })
}

/// Replays the witness on the simulator. Ok means the requirement literal is
/// indeed false at `witness.step`.
pub fn replay(aig: &Aig, witness: &Witness) -> Result<(), WitnessError> {
    let good = aig.requirements()[witness.requirement].good;
    if witness.inputs.len() != witness.step + 1 || witness.attacks.len() != witness.step + 1 {
        return Err(WitnessError::Malformed(format!(
            "expected {} frames of inputs and attacks",
            witness.step + 1
        )));
    }
    let attacker: ComponentSet = witness.attacker.iter().copied().collect();
    for (frame, attack) in witness.attacks.iter().enumerate() {
        if attack.keys().copied().collect::<ComponentSet>() != attacker {
            return Err(WitnessError::Malformed(format!(
                "attack domain at frame {frame} differs from the attacker"
            )));
        }
    }

    let latch_part = |attack: &BTreeMap<ComponentId, bool>| -> Attack {
        attack
            .iter()
            .filter(|(c, _)| matches!(c, ComponentId::Latch(_)))
            .map(|(&c, &b)| (c, b))
            .collect()
    };
    let gate_part = |attack: &BTreeMap<ComponentId, bool>| -> Attack {
        attack
            .iter()
            .filter(|(c, _)| matches!(c, ComponentId::Gate(_)))
            .map(|(&c, &b)| (c, b))
            .collect()
    };

    let mut state = aig
        .initial_state(&latch_part(&witness.attacks[0]))
        .map_err(|e| WitnessError::Malformed(e.to_string()))?;
    for frame in 0..=witness.step {
        let valuation =
            aig.frame_valuation(&state, &witness.inputs[frame], &gate_part(&witness.attacks[frame]));
        if frame == witness.step {
            if eval_literal(good, &valuation) {
                return Err(WitnessError::Mismatch { frame });
            }
            return Ok(());
        }
        // Latch overrides for the next frame come from the next attack.
        let mut step_attack = gate_part(&witness.attacks[frame]);
        step_attack.extend(latch_part(&witness.attacks[frame + 1]));
        let (next, _) = aig
            .simulate_step(&state, &witness.inputs[frame], &step_attack)
            .map_err(|e| WitnessError::Malformed(e.to_string()))?;
        state = next;
    }
    unreachable!("loop returns at witness.step");
}
