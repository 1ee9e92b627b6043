//! Minimal CNF container shared by the encoder and the solvers. Literals are
//! DIMACS-style signed integers; variable 0 does not exist.

/// Clause database with a variable counter. Tautologies are dropped and
/// duplicate literals removed on insertion.
#[derive(Debug, Clone, Default)]
pub struct Cnf {
    clauses: Vec<Vec<i32>>,
    num_vars: u32,
}

impl Cnf {
    pub fn new() -> Cnf {
        Cnf::default()
    }

    /// Allocates a fresh variable, returned as its positive literal.
    pub fn fresh_var(&mut self) -> i32 {
        self.num_vars += 1;
        self.num_vars as i32
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Adds a clause; returns its index, or None if it was a tautology.
    pub fn add_clause(&mut self, mut lits: Vec<i32>) -> Option<usize> {
        lits.sort_unstable();
        lits.dedup();
        debug_assert!(lits.iter().all(|&l| l != 0 && l.unsigned_abs() <= self.num_vars));
        if lits.windows(2).any(|w| w[0] == -w[1]) {
            return None;
        }
        self.clauses.push(lits);
        Some(self.clauses.len() - 1)
    }

    /// Plain DIMACS rendering without any comment map.
    pub fn to_dimacs(&self) -> Vec<u8> {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause {
                out.push_str(&format!("{lit} "));
            }
            out.push_str("0\n");
        }
        out.into_bytes()
    }
}
