//! Unrolls a circuit to a bound as CNF with per-component selector
//! variables, per-component attacker-action variables, and per-requirement
//! goal selectors. Assuming a component's selector switches it into
//! attacked mode; assuming a requirement's selector turns its goal clause on.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::aig::{Aig, ComponentId, Literal};
use crate::analysis::{ComponentSet, Universe};
use crate::cnf::Cnf;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("literal {0} references a variable outside the encoded cone")]
    UnknownVariable(Literal),
    #[error("frame {frame} exceeds bound {bound}")]
    FrameOutOfRange { frame: usize, bound: usize },
    #[error("component {0} has no selector in this instance")]
    NoSelector(ComponentId),
    #[error("requirement {0} is not part of this instance")]
    UnknownRequirement(usize),
    #[error("instance would need about {vars} variables, over the {cap} cap")]
    Budget { vars: u64, cap: u64 },
}

/// Rough guard against runaway unrollings; surfaced as a budget error
/// instead of an allocation failure.
const VAR_CAP: u64 = 200_000_000;

#[derive(Debug, Clone)]
pub struct UnrolledInstance {
    pub bound: usize,
    pub cnf: Cnf,
    /// The asserted-true variable backing constant literals.
    pub true_lit: i32,
    frame_vars: BTreeMap<(u32, usize), i32>,
    /// One frame-independent selector per component of the attacker universe
    /// present in the encoding.
    pub selectors: BTreeMap<ComponentId, i32>,
    /// Attacker action variables, one per (selector component, frame).
    pub actions: BTreeMap<(ComponentId, usize), i32>,
    /// Goal-clause selectors, keyed by requirement index.
    pub req_selectors: BTreeMap<usize, i32>,
    /// Index of each requirement's goal clause in the CNF.
    pub goal_clauses: BTreeMap<usize, usize>,
    /// Latches and gates whose equations are part of the encoding.
    pub encoded: ComponentSet,
}

impl UnrolledInstance {
    /// Encodes the given requirements up to `bound`. With isolation the
    /// encoded equations are restricted to the union cone of the
    /// requirements; without it every latch and gate is encoded. Selectors
    /// are allocated only for encoded components inside the attacker
    /// universe; other components keep their original semantics unguarded.
    pub fn build(
        aig: &Aig,
        requirements: &[usize],
        bound: usize,
        isolation: bool,
        universe: Universe,
    ) -> Result<UnrolledInstance, EncodeError> {
        for &r in requirements {
            if r >= aig.requirements().len() {
                return Err(EncodeError::UnknownRequirement(r));
            }
        }
        let encoded: ComponentSet = if isolation {
            requirements
                .iter()
                .flat_map(|&r| crate::analysis::coi(aig, aig.requirements()[r].good))
                .filter(|c| !c.is_input())
                .collect()
        } else {
            aig.components().filter(|c| !c.is_input()).collect()
        };

        // Variables needed per frame: the encoded components, every variable
        // their equations mention, and the requirement literals themselves.
        let mut vars: BTreeSet<u32> = BTreeSet::new();
        for &c in &encoded {
            vars.insert(aig.var_of_component(c));
            match c {
                ComponentId::Input(_) => unreachable!(),
                ComponentId::Latch(i) => {
                    let next = aig.latches()[i as usize].next;
                    if !next.is_constant() {
                        vars.insert(next.var());
                    }
                }
                ComponentId::Gate(i) => {
                    let g = &aig.gates()[i as usize];
                    for rhs in [g.rhs0, g.rhs1] {
                        if !rhs.is_constant() {
                            vars.insert(rhs.var());
                        }
                    }
                }
            }
        }
        for &r in requirements {
            let good = aig.requirements()[r].good;
            if !good.is_constant() {
                vars.insert(good.var());
            }
        }

        let frames = bound as u64 + 1;
        let estimated = 1 + vars.len() as u64 * frames + 2 * encoded.len() as u64 * frames;
        if estimated > VAR_CAP {
            return Err(EncodeError::Budget {
                vars: estimated,
                cap: VAR_CAP,
            });
        }

        let mut cnf = Cnf::new();
        let true_lit = cnf.fresh_var();
        cnf.add_clause(vec![true_lit]);

        let mut frame_vars = BTreeMap::new();
        for &var in &vars {
            for k in 0..=bound {
                frame_vars.insert((var, k), cnf.fresh_var());
            }
        }
        let mut selectors = BTreeMap::new();
        let mut actions = BTreeMap::new();
        for &c in &encoded {
            if universe.admits(c) {
                selectors.insert(c, cnf.fresh_var());
                for k in 0..=bound {
                    actions.insert((c, k), cnf.fresh_var());
                }
            }
        }
        let mut req_selectors = BTreeMap::new();
        for &r in requirements {
            req_selectors.insert(r, cnf.fresh_var());
        }

        let mut inst = UnrolledInstance {
            bound,
            cnf,
            true_lit,
            frame_vars,
            selectors,
            actions,
            req_selectors,
            goal_clauses: BTreeMap::new(),
            encoded,
        };
        for c in inst.encoded.clone() {
            for k in 0..=bound {
                match c {
                    ComponentId::Latch(i) => inst.encode_latch(aig, i, k)?,
                    ComponentId::Gate(i) => inst.encode_gate(aig, i, k)?,
                    ComponentId::Input(_) => unreachable!(),
                }
            }
        }
        for &r in requirements {
            inst.add_goal_clause(aig, r)?;
        }
        Ok(inst)
    }

    /// CNF literal for an AIGER literal at a frame. Constants map to the
    /// asserted-true variable and its negation.
    pub fn lit_at(&self, lit: Literal, frame: usize) -> Result<i32, EncodeError> {
        if frame > self.bound {
            return Err(EncodeError::FrameOutOfRange {
                frame,
                bound: self.bound,
            });
        }
        if lit.is_constant() {
            return Ok(if lit == Literal::TRUE {
                self.true_lit
            } else {
                -self.true_lit
            });
        }
        let var = self
            .frame_vars
            .get(&(lit.var(), frame))
            .copied()
            .ok_or(EncodeError::UnknownVariable(lit))?;
        Ok(if lit.is_negated() { -var } else { var })
    }

    fn selector_for(&self, c: ComponentId) -> Option<i32> {
        self.selectors.get(&c).copied()
    }

    /// Emits a `target <=> source` pair of binary clauses, widened by `guard`
    /// when present.
    fn encode_equiv(&mut self, guard: Option<i32>, target: i32, source: i32) {
        let mut c1 = vec![-target, source];
        let mut c2 = vec![target, -source];
        if let Some(g) = guard {
            c1.push(g);
            c2.push(g);
        }
        self.cnf.add_clause(c1);
        self.cnf.add_clause(c2);
    }

    /// Frame 0 constrains the latch to its init bit (or the attacker's action
    /// when its selector is assumed); frame k >= 1 to its next-state
    /// expression evaluated at frame k - 1 (or the action at frame k).
    pub fn encode_latch(&mut self, aig: &Aig, latch: u32, k: usize) -> Result<(), EncodeError> {
        let spec = aig.latches()[latch as usize];
        let c = ComponentId::Latch(latch);
        let target = self.lit_at(Literal::from_var(spec.var, false), k)?;
        let source = if k == 0 {
            self.lit_at(if spec.init { Literal::TRUE } else { Literal::FALSE }, 0)?
        } else {
            self.lit_at(spec.next, k - 1)?
        };
        match self.selector_for(c) {
            Some(sel) => {
                self.encode_equiv(Some(sel), target, source);
                let action = self.actions[&(c, k)];
                self.encode_equiv(Some(-sel), target, action);
            }
            None => self.encode_equiv(None, target, source),
        }
        Ok(())
    }

    /// Tseitin encoding of `g(k) <=> rhs0(k) and rhs1(k)`, widened by the
    /// selector when present, plus the attacked-mode equivalence with the
    /// action variable.
    pub fn encode_gate(&mut self, aig: &Aig, gate: u32, k: usize) -> Result<(), EncodeError> {
        let spec = aig.gates()[gate as usize];
        let c = ComponentId::Gate(gate);
        let p = self.lit_at(Literal::from_var(spec.var, false), k)?;
        let q = self.lit_at(spec.rhs0, k)?;
        let r = self.lit_at(spec.rhs1, k)?;
        let sel = self.selector_for(c);
        let mut widened = |mut clause: Vec<i32>| {
            if let Some(s) = sel {
                clause.push(s);
            }
            self.cnf.add_clause(clause);
        };
        widened(vec![p, -q, -r]);
        widened(vec![-p, q]);
        widened(vec![-p, r]);
        if let Some(s) = sel {
            let action = self.actions[&(c, k)];
            self.encode_equiv(Some(-s), p, action);
        }
        Ok(())
    }

    /// One clause per requirement: the goal selector implies the requirement
    /// literal is false at some frame.
    fn add_goal_clause(&mut self, aig: &Aig, req: usize) -> Result<(), EncodeError> {
        let good = aig.requirements()[req].good;
        let mut clause = vec![-self.req_selectors[&req]];
        for k in 0..=self.bound {
            clause.push(self.lit_at(good.negate(), k)?);
        }
        if let Some(idx) = self.cnf.add_clause(clause) {
            self.goal_clauses.insert(req, idx);
        }
        Ok(())
    }

    /// Assumption set selecting attacker `attacker` and target requirement
    /// `req`: the attacker's selectors positive, every other selector
    /// negative, the target's goal selector positive, the other goal
    /// selectors negative.
    pub fn assumptions(
        &self,
        attacker: &ComponentSet,
        req: usize,
    ) -> Result<Vec<i32>, EncodeError> {
        if !self.req_selectors.contains_key(&req) {
            return Err(EncodeError::UnknownRequirement(req));
        }
        let mut assumptions = Vec::with_capacity(self.selectors.len() + self.req_selectors.len());
        for &c in attacker {
            if !self.selectors.contains_key(&c) {
                return Err(EncodeError::NoSelector(c));
            }
        }
        for (&c, &sel) in &self.selectors {
            assumptions.push(if attacker.contains(&c) { sel } else { -sel });
        }
        for (&r, &sel) in &self.req_selectors {
            assumptions.push(if r == req { sel } else { -sel });
        }
        Ok(assumptions)
    }

    /// DIMACS export with a comment map for selectors, actions, and frame
    /// variables, so external solvers can replay instances.
    pub fn to_dimacs(&self) -> Vec<u8> {
        let mut out = String::new();
        for (c, var) in &self.selectors {
            out.push_str(&format!("c selector {c} {var}\n"));
        }
        for ((c, frame), var) in &self.actions {
            out.push_str(&format!("c action {c} {frame} {var}\n"));
        }
        for ((aig_var, frame), var) in &self.frame_vars {
            out.push_str(&format!("c frame {aig_var} {frame} {var}\n"));
        }
        for (req, var) in &self.req_selectors {
            out.push_str(&format!("c requirement {req} {var}\n"));
        }
        let mut bytes = out.into_bytes();
        bytes.extend_from_slice(&self.cnf.to_dimacs());
        bytes
    }
}
