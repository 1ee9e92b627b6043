//! Incremental SAT solving under assumptions: an embedded CDCL solver with
//! two-watched-literal propagation, first-UIP clause learning, activity-based
//! decisions, phase saving, and geometric restarts. Learned clauses persist
//! across calls, which is what makes requirement clustering pay off.

mod external;
mod heap;

pub use external::{ExternalError, ExternalSolver, ExternalVerdict};

use std::time::{Duration, Instant};

use crate::cnf::Cnf;

use heap::ActivityHeap;

/// Outcome of one solve call.
#[derive(Debug, Clone, PartialEq)]
pub enum SolveResult {
    /// Model indexed by variable (slot 0 unused). Variables never assigned
    /// default to false.
    Sat(Vec<bool>),
    /// Subset of the assumptions sufficient for unsatisfiability.
    Unsat(Vec<i32>),
    /// Budget exhausted; callers must treat this as "unknown", never UNSAT.
    Indeterminate,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }
}

/// Per-call resource limits.
#[derive(Debug, Clone, Copy, Default)]
pub struct Budget {
    pub max_conflicts: Option<u64>,
    pub deadline: Option<Instant>,
}

impl Budget {
    pub const UNLIMITED: Budget = Budget {
        max_conflicts: None,
        deadline: None,
    };

    pub fn with_timeout(timeout: Duration) -> Budget {
        Budget {
            max_conflicts: None,
            deadline: Some(Instant::now() + timeout),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Statistics {
    pub decisions: u64,
    pub conflicts: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub solve_calls: u64,
}

const NO_REASON: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Watcher {
    clause: u32,
    blocker: u32, // internal literal
}

/// Internal literal encoding: variable v (1-based) as 2v for positive,
/// 2v + 1 for negative.
#[inline]
fn to_internal(lit: i32) -> u32 {
    let var = lit.unsigned_abs();
    var * 2 + (lit < 0) as u32
}

#[inline]
fn to_external(lit: u32) -> i32 {
    let var = (lit / 2) as i32;
    if lit & 1 == 1 {
        -var
    } else {
        var
    }
}

#[inline]
fn neg(lit: u32) -> u32 {
    lit ^ 1
}

#[inline]
fn var_of(lit: u32) -> u32 {
    lit / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    Unassigned,
    True,
    False,
}

pub struct Solver {
    num_vars: u32,
    clauses: Vec<Vec<u32>>,
    watches: Vec<Vec<Watcher>>, // indexed by internal literal
    assign: Vec<Value>,         // by var
    level: Vec<u32>,            // by var
    reason: Vec<u32>,           // by var, clause index or NO_REASON
    trail: Vec<u32>,            // internal literals in assignment order
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    order: ActivityHeap,
    phase: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    pub stats: Statistics,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new()
    }
}

impl Solver {
    pub fn new() -> Solver {
        Solver {
            num_vars: 0,
            clauses: Vec::new(),
            watches: vec![Vec::new(); 4],
            assign: vec![Value::Unassigned; 1],
            level: vec![0; 1],
            reason: vec![NO_REASON; 1],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: vec![0.0; 1],
            var_inc: 1.0,
            order: ActivityHeap::new(),
            phase: vec![false; 1],
            seen: vec![false; 1],
            ok: true,
            stats: Statistics::default(),
        }
    }

    /// Loads every clause of a CNF into a fresh session.
    pub fn from_cnf(cnf: &Cnf) -> Solver {
        let mut solver = Solver::new();
        solver.ensure_vars(cnf.num_vars());
        for clause in cnf.clauses() {
            solver.add_clause(clause);
        }
        solver
    }

    pub fn ensure_vars(&mut self, num_vars: u32) {
        while self.num_vars < num_vars {
            self.num_vars += 1;
            self.assign.push(Value::Unassigned);
            self.level.push(0);
            self.reason.push(NO_REASON);
            self.activity.push(0.0);
            self.phase.push(false);
            self.seen.push(false);
            self.watches.push(Vec::new());
            self.watches.push(Vec::new());
            self.order.push(self.num_vars, &self.activity);
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    fn value_lit(&self, lit: u32) -> Value {
        match self.assign[var_of(lit) as usize] {
            Value::Unassigned => Value::Unassigned,
            Value::True => {
                if lit & 1 == 0 {
                    Value::True
                } else {
                    Value::False
                }
            }
            Value::False => {
                if lit & 1 == 0 {
                    Value::False
                } else {
                    Value::True
                }
            }
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Adds a clause over external literals. Tautologies are ignored; the
    /// empty clause puts the session in a permanently-UNSAT state. Must be
    /// called at decision level 0 (any running model is already cancelled
    /// when solve returns).
    pub fn add_clause(&mut self, lits: &[i32]) {
        debug_assert_eq!(self.decision_level(), 0);
        if !self.ok {
            return;
        }
        let max_var = lits.iter().map(|l| l.unsigned_abs()).max().unwrap_or(0);
        self.ensure_vars(max_var);
        let mut clause: Vec<u32> = lits.iter().map(|&l| to_internal(l)).collect();
        clause.sort_unstable();
        clause.dedup();
        if clause.windows(2).any(|w| w[1] == neg(w[0])) {
            return; // tautology
        }
        // Drop literals already false at level 0; satisfied clauses vanish.
        clause.retain(|&l| {
            !(self.value_lit(l) == Value::False && self.level[var_of(l) as usize] == 0)
        });
        if clause
            .iter()
            .any(|&l| self.value_lit(l) == Value::True && self.level[var_of(l) as usize] == 0)
        {
            return;
        }
        match clause.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(clause[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(clause);
            }
        }
    }

    fn attach(&mut self, clause: Vec<u32>) -> u32 {
        let idx = self.clauses.len() as u32;
        self.watches[neg(clause[0]) as usize].push(Watcher {
            clause: idx,
            blocker: clause[1],
        });
        self.watches[neg(clause[1]) as usize].push(Watcher {
            clause: idx,
            blocker: clause[0],
        });
        self.clauses.push(clause);
        idx
    }

    fn enqueue(&mut self, lit: u32, reason: u32) {
        debug_assert_eq!(self.value_lit(lit), Value::Unassigned);
        let var = var_of(lit) as usize;
        self.assign[var] = if lit & 1 == 0 { Value::True } else { Value::False };
        self.level[var] = self.decision_level();
        self.reason[var] = reason;
        self.phase[var] = lit & 1 == 0;
        self.trail.push(lit);
    }

    /// Unit propagation; returns the conflicting clause index if any.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let lit = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = neg(lit);
            let mut watchers = std::mem::take(&mut self.watches[lit as usize]);
            let mut i = 0;
            while i < watchers.len() {
                let w = watchers[i];
                if self.value_lit(w.blocker) == Value::True {
                    i += 1;
                    continue;
                }
                let clause_idx = w.clause as usize;
                // Normalize so the false literal is in slot 1.
                if self.clauses[clause_idx][0] == false_lit {
                    self.clauses[clause_idx].swap(0, 1);
                }
                let first = self.clauses[clause_idx][0];
                if first != w.blocker && self.value_lit(first) == Value::True {
                    watchers[i].blocker = first;
                    i += 1;
                    continue;
                }
                // Look for a new watch.
                let mut moved = false;
                for k in 2..self.clauses[clause_idx].len() {
                    let cand = self.clauses[clause_idx][k];
                    if self.value_lit(cand) != Value::False {
                        self.clauses[clause_idx].swap(1, k);
                        self.watches[neg(cand) as usize].push(Watcher {
                            clause: w.clause,
                            blocker: first,
                        });
                        watchers.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                if self.value_lit(first) == Value::False {
                    // Conflict: restore remaining watchers.
                    self.watches[lit as usize] = watchers;
                    self.qhead = self.trail.len();
                    return Some(w.clause);
                }
                self.enqueue(first, w.clause);
                i += 1;
            }
            self.watches[lit as usize] = watchers;
        }
        None
    }

    fn bump_var(&mut self, var: u32) {
        self.activity[var as usize] += self.var_inc;
        if self.activity[var as usize] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.update(var, &self.activity);
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backtrack level.
    fn analyze(&mut self, conflict: u32) -> (Vec<u32>, u32) {
        let mut learnt: Vec<u32> = vec![0]; // slot for the asserting literal
        let mut counter = 0usize;
        let mut clause_idx = conflict;
        let mut trail_pos = self.trail.len();
        let mut asserting = 0u32;
        let current = self.decision_level();

        loop {
            for pos in 0..self.clauses[clause_idx as usize].len() {
                let q = self.clauses[clause_idx as usize][pos];
                if q == asserting && asserting != 0 {
                    continue;
                }
                let v = var_of(q) as usize;
                if self.seen[v] || self.level[v] == 0 {
                    continue;
                }
                self.seen[v] = true;
                self.bump_var(v as u32);
                if self.level[v] == current {
                    counter += 1;
                } else {
                    learnt.push(q);
                }
            }
            // Walk the trail to the next marked literal.
            loop {
                trail_pos -= 1;
                if self.seen[var_of(self.trail[trail_pos]) as usize] {
                    break;
                }
            }
            let p = self.trail[trail_pos];
            self.seen[var_of(p) as usize] = false;
            counter -= 1;
            if counter == 0 {
                asserting = neg(p);
                learnt[0] = asserting;
                break;
            }
            clause_idx = self.reason[var_of(p) as usize];
            debug_assert_ne!(clause_idx, NO_REASON);
            asserting = p;
        }

        for &l in &learnt[1..] {
            self.seen[var_of(l) as usize] = false;
        }
        let backtrack = if learnt.len() == 1 {
            0
        } else {
            // Second-highest level literal goes to slot 1 for watching.
            let mut max_pos = 1;
            for i in 2..learnt.len() {
                if self.level[var_of(learnt[i]) as usize]
                    > self.level[var_of(learnt[max_pos]) as usize]
                {
                    max_pos = i;
                }
            }
            learnt.swap(1, max_pos);
            self.level[var_of(learnt[1]) as usize]
        };
        (learnt, backtrack)
    }

    /// Computes the subset of assumptions responsible for the falsified
    /// assumption `failed` (its negation is true in the current trail).
    fn analyze_final(&mut self, failed: u32) -> Vec<i32> {
        let mut core = vec![to_external(failed)];
        if self.decision_level() == 0 {
            return core;
        }
        self.seen[var_of(failed) as usize] = true;
        for pos in (self.trail_lim[0]..self.trail.len()).rev() {
            let lit = self.trail[pos];
            let v = var_of(lit) as usize;
            if !self.seen[v] {
                continue;
            }
            let reason = self.reason[v];
            if reason == NO_REASON {
                // A decision inside the assumption prefix.
                core.push(to_external(lit));
            } else {
                for &q in &self.clauses[reason as usize] {
                    if self.level[var_of(q) as usize] > 0 {
                        self.seen[var_of(q) as usize] = true;
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[var_of(failed) as usize] = false;
        core
    }

    fn cancel_until(&mut self, target: u32) {
        while self.decision_level() > target {
            let limit = self.trail_lim.pop().unwrap();
            while self.trail.len() > limit {
                let lit = self.trail.pop().unwrap();
                let v = var_of(lit) as usize;
                self.assign[v] = Value::Unassigned;
                self.reason[v] = NO_REASON;
                self.order.push(v as u32, &self.activity);
            }
        }
        self.qhead = self.trail.len();
    }

    fn pick_branch(&mut self) -> Option<u32> {
        while let Some(var) = self.order.pop(&self.activity) {
            if self.assign[var as usize] == Value::Unassigned {
                let positive = self.phase[var as usize];
                return Some(var * 2 + (!positive) as u32);
            }
        }
        None
    }

    /// Complete decision procedure under assumptions, subject to the budget.
    pub fn solve_under(&mut self, assumptions: &[i32], budget: Budget) -> SolveResult {
        self.stats.solve_calls += 1;
        if !self.ok {
            return SolveResult::Unsat(Vec::new());
        }
        let max_var = assumptions.iter().map(|l| l.unsigned_abs()).max().unwrap_or(0);
        self.ensure_vars(max_var);
        self.cancel_until(0);
        if self.propagate().is_some() {
            self.ok = false;
            return SolveResult::Unsat(Vec::new());
        }

        let mut conflicts_this_call = 0u64;
        let mut restart_limit = 100u64;
        let mut conflicts_since_restart = 0u64;
        let var_decay = 1.0 / 0.95;

        let result = loop {
            if let Some(conflict) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts_this_call += 1;
                conflicts_since_restart += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    break SolveResult::Unsat(Vec::new());
                }
                let (learnt, backtrack) = self.analyze(conflict);
                self.cancel_until(backtrack);
                let asserting = learnt[0];
                if learnt.len() == 1 {
                    self.enqueue(asserting, NO_REASON);
                } else {
                    let idx = self.attach(learnt);
                    self.enqueue(asserting, idx);
                }
                self.var_inc *= var_decay;

                if let Some(cap) = budget.max_conflicts {
                    if conflicts_this_call >= cap {
                        break SolveResult::Indeterminate;
                    }
                }
                if conflicts_this_call % 256 == 0 {
                    if let Some(deadline) = budget.deadline {
                        if Instant::now() >= deadline {
                            break SolveResult::Indeterminate;
                        }
                    }
                }
                if conflicts_since_restart >= restart_limit {
                    conflicts_since_restart = 0;
                    restart_limit = restart_limit * 3 / 2;
                    self.stats.restarts += 1;
                    self.cancel_until(0);
                }
            } else {
                // Place assumptions as the first decisions.
                if (self.decision_level() as usize) < assumptions.len() {
                    let lit = to_internal(assumptions[self.decision_level() as usize]);
                    match self.value_lit(lit) {
                        Value::True => {
                            self.trail_lim.push(self.trail.len());
                        }
                        Value::False => {
                            let core = self.analyze_final(lit);
                            break SolveResult::Unsat(core);
                        }
                        Value::Unassigned => {
                            self.trail_lim.push(self.trail.len());
                            self.enqueue(lit, NO_REASON);
                        }
                    }
                    continue;
                }
                match self.pick_branch() {
                    Some(lit) => {
                        self.stats.decisions += 1;
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(lit, NO_REASON);
                    }
                    None => {
                        let mut model = vec![false; self.num_vars as usize + 1];
                        for (v, value) in self.assign.iter().enumerate() {
                            model[v] = *value == Value::True;
                        }
                        break SolveResult::Sat(model);
                    }
                }
            }
        };
        self.cancel_until(0);
        result
    }

    pub fn solve(&mut self, budget: Budget) -> SolveResult {
        self.solve_under(&[], budget)
    }
}
