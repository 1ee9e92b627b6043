//! Coverage metrics: how much of the attacker power set a classification
//! decides. The breaking side is the superset closure of the found minimal
//! attackers, counted exactly with a small reduced ordered BDD, falling back
//! to Monte-Carlo estimation when the BDD grows past its node budget.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aig::ComponentId;
use crate::analysis::ComponentSet;
use crate::classify::{ClassificationMap, RequirementClassification};

const BDD_NODE_BUDGET: usize = 1_000_000;
const MC_SAMPLES: u64 = 1_000_000;
const MC_SEED: u64 = 0x5eed_c0de_cafe_f00d;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementCoverage {
    pub requirement: usize,
    /// Attackers known to break the requirement.
    pub breaking: BigUint,
    /// Attackers known to be safe within the bound.
    pub safe: BigUint,
    /// (breaking + safe) / 2^|U|.
    pub coverage: f64,
    /// True when `breaking` is a Monte-Carlo estimate.
    pub estimated: bool,
}

/// Coverage of every requirement of a classification, over the universe the
/// map was computed for.
pub fn coverage(map: &ClassificationMap) -> Vec<RequirementCoverage> {
    let universe = &map.universe_components;
    map.requirements
        .iter()
        .map(|rc| {
            let (breaking, estimated) = count_breaking(&rc.minimal_attackers, universe.len());
            let safe = count_safe(rc, universe.len(), map.options.isolation);
            if universe.len() <= 16 && !estimated {
                debug_assert!(counts_are_disjoint_and_exact(
                    rc,
                    universe,
                    map.options.isolation,
                    &breaking,
                    &safe
                ));
            }
            RequirementCoverage {
                requirement: rc.requirement,
                coverage: fraction(&(&breaking + &safe), universe.len()),
                breaking,
                safe,
                estimated,
            }
        })
        .collect()
}

/// Number of subsets of a `universe_size`-element universe that contain at
/// least one of the given sets. Returns the count and whether it is a
/// Monte-Carlo estimate rather than an exact BDD count.
pub fn count_breaking(minimal: &[ComponentSet], universe_size: usize) -> (BigUint, bool) {
    count_breaking_with(minimal, universe_size, BDD_NODE_BUDGET, MC_SAMPLES)
}

/// Forces the Monte-Carlo estimation path of [`count_breaking`].
pub fn count_breaking_sampled(minimal: &[ComponentSet], universe_size: usize) -> BigUint {
    count_breaking_with(minimal, universe_size, 0, MC_SAMPLES).0
}

fn count_breaking_with(
    minimal: &[ComponentSet],
    universe_size: usize,
    node_budget: usize,
    samples: u64,
) -> (BigUint, bool) {
    if minimal.is_empty() {
        return (BigUint::zero(), false);
    }
    if minimal.iter().any(|m| m.is_empty()) {
        return (pow2(universe_size), false);
    }
    // Count over the support only; components outside it are free.
    let support: Vec<ComponentId> = minimal
        .iter()
        .flatten()
        .copied()
        .collect::<ComponentSet>()
        .into_iter()
        .collect();
    let index: HashMap<ComponentId, u32> = support
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i as u32))
        .collect();
    let mut terms: Vec<Vec<u32>> = minimal
        .iter()
        .map(|m| m.iter().map(|c| index[c]).collect())
        .collect();
    terms.sort();
    terms.dedup();

    let free = universe_size - support.len();
    match bdd_count(&terms, support.len(), node_budget) {
        Some(count) => (count << free, false),
        None => (
            monte_carlo_count(&terms, support.len(), samples) << free,
            true,
        ),
    }
}

/// Number of attackers proven safe. An unbreakable requirement is safe
/// against the whole power set. Otherwise each explored safe set stands for
/// itself, extended by every combination of components outside the
/// requirement's cone when isolation justifies that extrapolation.
pub fn count_safe(
    rc: &RequirementClassification,
    universe_size: usize,
    isolation: bool,
) -> BigUint {
    if rc.unbreakable {
        return pow2(universe_size);
    }
    let per_set = if isolation {
        pow2(universe_size - rc.relevant.len())
    } else {
        BigUint::one()
    };
    BigUint::from(rc.safe_sets.len()) * per_set
}

/// `value / 2^bits` as f64, computed with 18 decimal digits of precision so
/// tiny coverages of huge universes survive the conversion.
pub fn fraction(value: &BigUint, bits: usize) -> f64 {
    let scaled = (value * BigUint::from(10u64).pow(18)) >> bits;
    scaled.to_f64().unwrap_or(f64::INFINITY) / 1e18
}

fn pow2(bits: usize) -> BigUint {
    BigUint::one() << bits
}

/// ROBDD over `num_vars` variables for the monotone DNF given by `terms`
/// (sorted variable indices). Returns the satisfying-assignment count, or
/// None when the node budget is exceeded.
fn bdd_count(terms: &[Vec<u32>], num_vars: usize, node_budget: usize) -> Option<BigUint> {
    let mut bdd = Bdd::new(node_budget);
    let mut root = 0u32; // FALSE
    for term in terms {
        let mut node = 1u32; // TRUE
        for &var in term.iter().rev() {
            node = bdd.mk(var, 0, node)?;
        }
        let mut memo = HashMap::new();
        root = bdd.or(root, node, &mut memo)?;
    }
    Some(bdd.count(root, num_vars as u32))
}

struct Bdd {
    /// (var, lo, hi); slots 0 and 1 are the FALSE and TRUE terminals.
    nodes: Vec<(u32, u32, u32)>,
    unique: HashMap<(u32, u32, u32), u32>,
    budget: usize,
}

impl Bdd {
    fn new(budget: usize) -> Bdd {
        Bdd {
            nodes: vec![(u32::MAX, 0, 0), (u32::MAX, 0, 0)],
            unique: HashMap::new(),
            budget,
        }
    }

    fn mk(&mut self, var: u32, lo: u32, hi: u32) -> Option<u32> {
        if lo == hi {
            return Some(lo);
        }
        if let Some(&n) = self.unique.get(&(var, lo, hi)) {
            return Some(n);
        }
        if self.nodes.len() >= self.budget {
            return None;
        }
        let n = self.nodes.len() as u32;
        self.nodes.push((var, lo, hi));
        self.unique.insert((var, lo, hi), n);
        Some(n)
    }

    fn or(&mut self, a: u32, b: u32, memo: &mut HashMap<(u32, u32), u32>) -> Option<u32> {
        if a == 1 || b == 1 {
            return Some(1);
        }
        if a == 0 || a == b {
            return Some(b);
        }
        if b == 0 {
            return Some(a);
        }
        let key = (a.min(b), a.max(b));
        if let Some(&n) = memo.get(&key) {
            return Some(n);
        }
        let (va, la, ha) = self.nodes[a as usize];
        let (vb, lb, hb) = self.nodes[b as usize];
        let top = va.min(vb);
        let (alo, ahi) = if va == top { (la, ha) } else { (a, a) };
        let (blo, bhi) = if vb == top { (lb, hb) } else { (b, b) };
        let lo = self.or(alo, blo, memo)?;
        let hi = self.or(ahi, bhi, memo)?;
        let n = self.mk(top, lo, hi)?;
        memo.insert(key, n);
        Some(n)
    }

    fn count(&self, root: u32, num_vars: u32) -> BigUint {
        // Assignments below a node, weighted by skipped decision levels.
        let mut memo: HashMap<u32, BigUint> = HashMap::new();
        memo.insert(0, BigUint::zero());
        memo.insert(1, BigUint::one());
        let var_of = |n: u32| -> u32 {
            if n <= 1 {
                num_vars
            } else {
                self.nodes[n as usize].0
            }
        };
        let mut stack = vec![root];
        while let Some(&n) = stack.last() {
            if memo.contains_key(&n) {
                stack.pop();
                continue;
            }
            let (var, lo, hi) = self.nodes[n as usize];
            match (memo.get(&lo), memo.get(&hi)) {
                (Some(clo), Some(chi)) => {
                    let total = (clo << (var_of(lo) - var - 1)) + (chi << (var_of(hi) - var - 1));
                    memo.insert(n, total);
                    stack.pop();
                }
                _ => {
                    stack.push(lo);
                    stack.push(hi);
                }
            }
        }
        &memo[&root] << var_of(root)
    }
}

/// Estimates the satisfying count of a monotone DNF over `num_vars`
/// variables by uniform sampling with a fixed seed.
fn monte_carlo_count(terms: &[Vec<u32>], num_vars: usize, samples: u64) -> BigUint {
    let mut rng = ChaCha8Rng::seed_from_u64(MC_SEED);
    let words = num_vars.div_ceil(64);
    let mut hits = 0u64;
    let mut assignment = vec![0u64; words];
    for _ in 0..samples {
        for word in &mut assignment {
            *word = rng.gen();
        }
        let covered = terms.iter().any(|term| {
            term.iter()
                .all(|&v| assignment[v as usize / 64] >> (v % 64) & 1 == 1)
        });
        if covered {
            hits += 1;
        }
    }
    // Round to the nearest count; truncation alone loses too much on small
    // universes.
    (pow2(num_vars) * hits + samples / 2) / samples
}

/// Exhaustive cross-check used on small universes: the two counted families
/// are disjoint and exactly as large as claimed.
fn counts_are_disjoint_and_exact(
    rc: &RequirementClassification,
    universe: &[ComponentId],
    isolation: bool,
    breaking: &BigUint,
    safe: &BigUint,
) -> bool {
    let n = universe.len();
    let mut breaking_seen = BigUint::zero();
    let mut safe_seen = BigUint::zero();
    for mask in 0u32..(1 << n) {
        let attacker: ComponentSet = universe
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &c)| c)
            .collect();
        let breaks = rc.minimal_attackers.iter().any(|m| m.is_subset(&attacker));
        let in_cone: ComponentSet = attacker.intersection(&rc.relevant).copied().collect();
        let is_safe = rc.unbreakable
            || rc.safe_sets.iter().any(|f| {
                if isolation {
                    in_cone == *f
                } else {
                    attacker == *f
                }
            });
        if breaks && is_safe {
            return false;
        }
        if breaks {
            breaking_seen += 1u32;
        }
        if is_safe {
            safe_seen += 1u32;
        }
    }
    breaking_seen == *breaking && safe_seen == *safe
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Universe;
    use crate::classify::{classify, Options};
    use crate::fixtures::example1;

    const V1: ComponentId = ComponentId::Latch(0);
    const G1: ComponentId = ComponentId::Gate(0);
    const G2: ComponentId = ComponentId::Gate(1);

    fn sets(items: &[&[ComponentId]]) -> Vec<ComponentSet> {
        items.iter().map(|ids| ids.iter().copied().collect()).collect()
    }

    fn explicit_closure_count(minimal: &[ComponentSet], universe: &[ComponentId]) -> BigUint {
        let mut count = BigUint::zero();
        for mask in 0u32..(1 << universe.len()) {
            let attacker: ComponentSet = universe
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

    #[test]
    fn closure_count_small_cases() {
        let u = [V1, G1, G2];
        for minimal in [
            sets(&[]),
            sets(&[&[]]),
            sets(&[&[V1]]),
            sets(&[&[V1], &[G2]]),
            sets(&[&[V1, G1], &[G2]]),
            sets(&[&[V1], &[G1], &[G2]]),
        ] {
            let (count, estimated) = count_breaking(&minimal, u.len());
            assert!(!estimated);
            assert_eq!(count, explicit_closure_count(&minimal, &u), "{minimal:?}");
        }
    }

    #[test]
    fn closure_count_random_cases() {
        use rand::Rng;
        let universe: Vec<ComponentId> = (0..10).map(ComponentId::Latch).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let num_terms = rng.gen_range(1..6);
            let minimal: Vec<ComponentSet> = (0..num_terms)
                .map(|_| {
                    universe
                        .iter()
                        .filter(|_| rng.gen_bool(0.3))
                        .copied()
                        .collect()
                })
                .collect();
            let (count, estimated) = count_breaking(&minimal, universe.len());
            assert!(!estimated);
            assert_eq!(count, explicit_closure_count(&minimal, &universe));
        }
    }

    #[test]
    fn monte_carlo_is_close_to_exact() {
        let minimal = sets(&[&[V1], &[G1, G2]]);
        let (exact, e1) = count_breaking_with(&minimal, 3, BDD_NODE_BUDGET, MC_SAMPLES);
        let (mc, e2) = count_breaking_with(&minimal, 3, 0, MC_SAMPLES);
        assert!(!e1);
        assert!(e2);
        let diff = (fraction(&exact, 3) - fraction(&mc, 3)).abs();
        assert!(diff < 0.01, "exact {exact}, estimate {mc}");
    }

    #[test]
    fn example1_coverage_is_complete() {
        let aig = example1();
        let opts = Options {
            bound: 2,
            universe: Universe::LatchesAndGates,
            ..Options::default()
        };
        let map = classify(&aig, &opts).unwrap();
        let cov = coverage(&map);
        // r1 breaks with the empty attacker: the whole power set breaks.
        assert_eq!(cov[0].breaking, BigUint::from(8u32));
        assert_eq!(cov[0].safe, BigUint::zero());
        assert_eq!(cov[0].coverage, 1.0);
        // r2: supersets of {v1} or {g2} break (6); {g1} alone is safe but its
        // cone spans the whole universe, so no extension credit.
        assert_eq!(cov[1].breaking, BigUint::from(6u32));
        assert_eq!(cov[1].safe, BigUint::from(2u32));
        assert_eq!(cov[1].coverage, 1.0);
        assert!(!cov[1].estimated);
    }

    #[test]
    fn unbreakable_covers_everything() {
        // Drop the latch attack surface: with a latches-only universe, r1
        // (inputs only) is breakable by nobody's components but the empty
        // attacker breaks it, so use r2 restricted by a tiny bound instead.
        let aig = example1();
        let opts = Options {
            bound: 2,
            ..Options::default()
        };
        let map = classify(&aig, &opts).unwrap();
        let cov = coverage(&map);
        for c in &cov {
            assert!(c.coverage <= 1.0);
            assert!(&c.breaking + &c.safe <= pow2(map.universe_components.len()));
        }
    }

    #[test]
    fn safe_count_without_isolation_has_no_extension_credit() {
        let aig = example1();
        let opts = Options {
            bound: 2,
            isolation: false,
            universe: Universe::LatchesAndGates,
            ..Options::default()
        };
        let map = classify(&aig, &opts).unwrap();
        let rc = &map.requirements[1];
        assert_eq!(
            count_safe(rc, 3, false),
            BigUint::from(rc.safe_sets.len())
        );
    }

    #[test]
    fn fraction_handles_huge_universes() {
        // 34240 * 2^71 / 2^130 lands just under 6e-14.
        let value = BigUint::from(34240u32) << 71;
        let f = fraction(&value, 130);
        assert!(f > 5.9e-14 && f < 6.0e-14, "{f}");
    }
}
