//! Small circuits used throughout the test suites and benchmarks.

use crate::aig::{parse_ascii, Aig};

/// The two-input, one-latch, two-gate circuit with requirements
/// r1 = always g1, r2 = always not g2, r3 = always v1:
///
/// ```text
/// v1(0) = 1        v1(t+1) = !g2(t)
/// g1(t) = !w1(t) & !w2(t)
/// g2(t) = g1(t) & !v1(t)
/// ```
///
/// The system satisfies r2 and r3 but fails r1 (w1=1, w2=0 makes g1 false).
pub const EXAMPLE1_AAG: &str = "aag 5 2 1 0 2 3\n2\n4\n6 11 1\n9\n10\n7\n8 5 3\n10 8 7\n";

pub fn example1() -> Aig {
    parse_ascii(EXAMPLE1_AAG.as_bytes()).expect("fixture parses")
}
