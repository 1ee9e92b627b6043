//! AIG data model and bit-exact simulation of the (possibly compromised)
//! system of equations.

pub mod parse;

pub use parse::{parse_ascii, parse_binary, serialize_ascii, serialize_binary, ParseOptions};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An AIGER literal: variable index `i` encoded as `2i`, its negation as
/// `2i + 1`. Code 0 is constant FALSE, code 1 is constant TRUE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal(pub u32);

impl Literal {
    pub const FALSE: Literal = Literal(0);
    pub const TRUE: Literal = Literal(1);

    pub fn from_var(var: u32, negated: bool) -> Literal {
        Literal(var * 2 + negated as u32)
    }

    pub fn var(self) -> u32 {
        self.0 / 2
    }

    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn negate(self) -> Literal {
        Literal(self.0 ^ 1)
    }

    pub fn is_constant(self) -> bool {
        self.0 < 2
    }

    pub fn code(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A component of the circuit: an input, a latch, or an and-gate. The index
/// points into the respective array of the owning [`Aig`]. The derived order
/// (kind first, then index) is the canonical component order used everywhere.
/// Serializes as the `w1` / `v1` / `g1` notation so it can key JSON maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ComponentId {
    Input(u32),
    Latch(u32),
    Gate(u32),
}

impl Serialize for ComponentId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ComponentId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl ComponentId {
    pub fn is_input(self) -> bool {
        matches!(self, ComponentId::Input(_))
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentId::Input(i) => write!(f, "w{}", i + 1),
            ComponentId::Latch(i) => write!(f, "v{}", i + 1),
            ComponentId::Gate(i) => write!(f, "g{}", i + 1),
        }
    }
}

/// Parses the `w1` / `v3` / `g2` notation produced by [`ComponentId::fmt`].
impl std::str::FromStr for ComponentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, idx) = s.split_at(1);
        let idx: u32 = idx
            .parse()
            .map_err(|_| format!("bad component id {s:?}"))?;
        if idx == 0 {
            return Err(format!("component indices are 1-based: {s:?}"));
        }
        match kind {
            "w" => Ok(ComponentId::Input(idx - 1)),
            "v" => Ok(ComponentId::Latch(idx - 1)),
            "g" => Ok(ComponentId::Gate(idx - 1)),
            _ => Err(format!("bad component id {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatchSpec {
    /// Variable holding this latch's value.
    pub var: u32,
    /// Next-state expression, evaluated in the current frame.
    pub next: Literal,
    /// Initial value.
    pub init: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateSpec {
    /// Variable defined by this gate.
    pub var: u32,
    pub rhs0: Literal,
    pub rhs1: Literal,
}

/// An invariant requirement: `good` must hold at every time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Requirement {
    pub name: String,
    pub good: Literal,
}

/// Immutable AIG circuit model. Construction goes through the AIGER parsers
/// (or [`Aig::new`] for programmatic construction), which validate the
/// structural invariants: disjoint variable spaces, acyclicity (gate operands
/// have numerically smaller variables), and well-formed literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aig {
    input_vars: Vec<u32>,
    latches: Vec<LatchSpec>,
    gates: Vec<GateSpec>,
    requirements: Vec<Requirement>,
    max_var: u32,
    /// var -> component, None for unused variables.
    var_map: Vec<Option<ComponentId>>,
    symbols: BTreeMap<ComponentId, String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AigError {
    #[error("variable {0} declared more than once")]
    DuplicateVariable(u32),
    #[error("gate variable {gate} depends on operand variable {operand} that is not smaller")]
    Acyclicity { gate: u32, operand: u32 },
    #[error("literal {0} references undeclared variable")]
    UndeclaredVariable(Literal),
    #[error("attack references input {0}; inputs are never attacker-controlled")]
    AttackOnInput(ComponentId),
    #[error("attack references component {0} not present in the circuit")]
    AttackOutOfRange(ComponentId),
}

/// Latch values at one frame.
pub type State = Vec<bool>;
/// Input values at one frame.
pub type InputVector = Vec<bool>;
/// One attack: values chosen by the attacker for its components at one frame.
pub type Attack = BTreeMap<ComponentId, bool>;

impl Aig {
    /// Builds an AIG from raw parts, validating the structural invariants.
    pub fn new(
        input_vars: Vec<u32>,
        latches: Vec<LatchSpec>,
        gates: Vec<GateSpec>,
        requirements: Vec<Requirement>,
        symbols: BTreeMap<ComponentId, String>,
    ) -> Result<Aig, AigError> {
        let max_var = input_vars
            .iter()
            .copied()
            .chain(latches.iter().map(|l| l.var))
            .chain(gates.iter().map(|g| g.var))
            .max()
            .unwrap_or(0);
        let mut var_map: Vec<Option<ComponentId>> = vec![None; max_var as usize + 1];
        let mut declare = |var: u32, id: ComponentId| -> Result<(), AigError> {
            let slot = &mut var_map[var as usize];
            if slot.is_some() || var == 0 {
                return Err(AigError::DuplicateVariable(var));
            }
            *slot = Some(id);
            Ok(())
        };
        for (i, &v) in input_vars.iter().enumerate() {
            declare(v, ComponentId::Input(i as u32))?;
        }
        for (i, l) in latches.iter().enumerate() {
            declare(l.var, ComponentId::Latch(i as u32))?;
        }
        for (i, g) in gates.iter().enumerate() {
            declare(g.var, ComponentId::Gate(i as u32))?;
        }
        let aig = Aig {
            input_vars,
            latches,
            gates,
            requirements: Vec::new(),
            max_var,
            var_map,
            symbols,
        };
        for g in &aig.gates {
            for rhs in [g.rhs0, g.rhs1] {
                aig.check_literal(rhs)?;
                if !rhs.is_constant() && rhs.var() >= g.var {
                    return Err(AigError::Acyclicity {
                        gate: g.var,
                        operand: rhs.var(),
                    });
                }
            }
        }
        for l in &aig.latches {
            aig.check_literal(l.next)?;
        }
        let mut aig = aig;
        for r in requirements {
            aig.check_literal(r.good)?;
            // Duplicate requirements (identical literals) keep the first name.
            if !aig.requirements.iter().any(|q| q.good == r.good) {
                aig.requirements.push(r);
            }
        }
        Ok(aig)
    }

    fn check_literal(&self, lit: Literal) -> Result<(), AigError> {
        if lit.is_constant() {
            return Ok(());
        }
        if self
            .var_map
            .get(lit.var() as usize)
            .copied()
            .flatten()
            .is_none()
        {
            return Err(AigError::UndeclaredVariable(lit));
        }
        Ok(())
    }

    pub fn num_inputs(&self) -> usize {
        self.input_vars.len()
    }

    pub fn num_latches(&self) -> usize {
        self.latches.len()
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn max_var(&self) -> u32 {
        self.max_var
    }

    pub fn input_vars(&self) -> &[u32] {
        &self.input_vars
    }

    pub fn latches(&self) -> &[LatchSpec] {
        &self.latches
    }

    pub fn gates(&self) -> &[GateSpec] {
        &self.gates
    }

    pub fn requirements(&self) -> &[Requirement] {
        &self.requirements
    }

    pub fn symbols(&self) -> &BTreeMap<ComponentId, String> {
        &self.symbols
    }

    /// Component owning a variable, if any.
    pub fn component_of_var(&self, var: u32) -> Option<ComponentId> {
        self.var_map.get(var as usize).copied().flatten()
    }

    /// Variable owned by a component.
    pub fn var_of_component(&self, c: ComponentId) -> u32 {
        match c {
            ComponentId::Input(i) => self.input_vars[i as usize],
            ComponentId::Latch(i) => self.latches[i as usize].var,
            ComponentId::Gate(i) => self.gates[i as usize].var,
        }
    }

    pub fn components(&self) -> impl Iterator<Item = ComponentId> + '_ {
        (0..self.input_vars.len() as u32)
            .map(ComponentId::Input)
            .chain((0..self.latches.len() as u32).map(ComponentId::Latch))
            .chain((0..self.gates.len() as u32).map(ComponentId::Gate))
    }

    fn check_attack(&self, attack: &Attack) -> Result<(), AigError> {
        for (&c, _) in attack {
            match c {
                ComponentId::Input(_) => return Err(AigError::AttackOnInput(c)),
                ComponentId::Latch(i) if (i as usize) < self.latches.len() => {}
                ComponentId::Gate(i) if (i as usize) < self.gates.len() => {}
                _ => return Err(AigError::AttackOutOfRange(c)),
            }
        }
        Ok(())
    }

    /// Initial state: init bits, except latches attacked at frame 0 take the
    /// attacker's value.
    pub fn initial_state(&self, attack0: &Attack) -> Result<State, AigError> {
        self.check_attack(attack0)?;
        Ok(self
            .latches
            .iter()
            .enumerate()
            .map(|(i, l)| {
                attack0
                    .get(&ComponentId::Latch(i as u32))
                    .copied()
                    .unwrap_or(l.init)
            })
            .collect())
    }

    /// One simulation step. Gates are evaluated in topological order; an
    /// attacked gate takes the attacker's value at this frame, an attacked
    /// latch takes the attacker's value in the *next* frame. Returns the next
    /// state and the gate values of the current frame.
    pub fn simulate_step(
        &self,
        state: &State,
        input: &InputVector,
        attack: &Attack,
    ) -> Result<(State, Vec<bool>), AigError> {
        self.check_attack(attack)?;
        let valuation = self.frame_valuation(state, input, attack);
        let next_state = self
            .latches
            .iter()
            .enumerate()
            .map(|(i, l)| {
                attack
                    .get(&ComponentId::Latch(i as u32))
                    .copied()
                    .unwrap_or_else(|| eval_literal(l.next, &valuation))
            })
            .collect();
        let gate_values = self
            .gates
            .iter()
            .map(|g| valuation[g.var as usize])
            .collect();
        Ok((next_state, gate_values))
    }

    /// Full valuation of one frame (all variables), with attacked gates
    /// overridden. Used by simulation and witness replay.
    pub fn frame_valuation(&self, state: &State, input: &InputVector, attack: &Attack) -> Vec<bool> {
        let mut valuation = vec![false; self.max_var as usize + 1];
        for (i, &v) in self.input_vars.iter().enumerate() {
            valuation[v as usize] = input[i];
        }
        for (i, l) in self.latches.iter().enumerate() {
            valuation[l.var as usize] = state[i];
        }
        // Operand variables are smaller than the gate variable, so ascending
        // variable order is a topological order.
        let mut order: Vec<usize> = (0..self.gates.len()).collect();
        order.sort_by_key(|&i| self.gates[i].var);
        for i in order {
            let g = &self.gates[i];
            let value = match attack.get(&ComponentId::Gate(i as u32)) {
                Some(&b) => b,
                None => eval_literal(g.rhs0, &valuation) && eval_literal(g.rhs1, &valuation),
            };
            valuation[g.var as usize] = value;
        }
        valuation
    }
}

/// Evaluates a literal under a frame valuation indexed by variable.
pub fn eval_literal(lit: Literal, frame_valuation: &[bool]) -> bool {
    if lit.is_constant() {
        return lit == Literal::TRUE;
    }
    frame_valuation[lit.var() as usize] ^ lit.is_negated()
}
