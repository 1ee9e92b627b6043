//! Attacker classification: for each requirement, the minimal attackers able
//! to break it within a bound, found by frontier search over candidate
//! attackers backed by an incremental SAT session per requirement cluster.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aig::{Aig, ComponentId};
use crate::analysis::{cluster_requirements, r_max, ComponentSet, Universe};
use crate::solver::{Budget, SolveResult, Solver};
use crate::unroll::{EncodeError, UnrolledInstance};
use crate::witness::{self, Witness, WitnessError};

/// Naive enumeration and explicit propagation refuse universes larger than
/// this; 2^20 candidates is already at the edge of usefulness.
pub const MAX_EXPLICIT_UNIVERSE: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Options {
    /// Unrolling bound t: frames 0..=t are checked.
    pub bound: usize,
    /// Largest attacker size the search enumerates.
    pub max_size: usize,
    /// Wall-clock budget per requirement.
    pub requirement_budget: Duration,
    /// Restrict encodings and expansions to requirement cones.
    pub isolation: bool,
    /// Skip candidates subsuming a known breaking attacker.
    pub monotonicity: bool,
    pub universe: Universe,
    /// Jaccard threshold for grouping requirements into shared instances.
    pub cluster_threshold: f64,
}

impl Default for Options {
    fn default() -> Options {
        Options {
            bound: 10,
            max_size: 3,
            requirement_budget: Duration::from_secs(600),
            isolation: true,
            monotonicity: true,
            universe: Universe::default(),
            cluster_threshold: 0.8,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("witness validation failed for requirement {req}: {source}")]
    BadWitness {
        req: usize,
        source: WitnessError,
    },
    #[error("universe has {size} components, explicit enumeration caps at {max}")]
    UniverseTooLarge { size: usize, max: usize },
    #[error("no requirement with index {0}")]
    UnknownRequirement(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Breaks,
    Safe,
    Unknown,
}

/// Everything learned about one requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementClassification {
    pub requirement: usize,
    pub name: String,
    /// Breaking attackers found; an antichain of minimal ones when the
    /// monotonicity pruning is on.
    pub minimal_attackers: Vec<ComponentSet>,
    /// Explored attackers proven safe within the bound.
    pub safe_sets: Vec<ComponentSet>,
    /// Universe components in the requirement's cone; components outside it
    /// never affect the verdict.
    pub relevant: ComponentSet,
    /// The most capable relevant attacker cannot break the requirement.
    pub unbreakable: bool,
    /// The empty attacker already breaks the requirement.
    pub broken_by_empty: bool,
    /// Every attacker's verdict is decided; false after budget exhaustion or
    /// when the size cap left candidates undecided.
    pub complete: bool,
    pub candidates_checked: u64,
    pub sat_calls: u64,
    pub millis: u64,
    pub witnesses: Vec<Witness>,
}

impl RequirementClassification {
    fn undecided(requirement: usize, name: String, relevant: ComponentSet) -> Self {
        RequirementClassification {
            requirement,
            name,
            minimal_attackers: Vec::new(),
            safe_sets: Vec::new(),
            relevant,
            unbreakable: false,
            broken_by_empty: false,
            complete: false,
            candidates_checked: 0,
            sat_calls: 0,
            millis: 0,
            witnesses: Vec::new(),
        }
    }
}

/// The classification of every requirement of a circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMap {
    pub options: Options,
    pub universe_components: Vec<ComponentId>,
    pub requirements: Vec<RequirementClassification>,
}

impl ClassificationMap {
    /// Verdict for an arbitrary attacker against one requirement.
    pub fn query(&self, req: usize, attacker: &ComponentSet) -> Result<Verdict, ClassifyError> {
        let rc = self
            .requirements
            .get(req)
            .ok_or(ClassifyError::UnknownRequirement(req))?;
        if rc.unbreakable {
            return Ok(Verdict::Safe);
        }
        // Components outside the cone cannot influence the requirement.
        let reduced: ComponentSet = attacker.intersection(&rc.relevant).copied().collect();
        if rc
            .minimal_attackers
            .iter()
            .any(|m| m.is_subset(&reduced))
        {
            return Ok(Verdict::Breaks);
        }
        if rc.complete {
            return Ok(Verdict::Safe);
        }
        if rc.safe_sets.iter().any(|f| reduced.is_subset(f)) {
            return Ok(Verdict::Safe);
        }
        Ok(Verdict::Unknown)
    }

    /// Requirements an attacker breaks for sure.
    pub fn broken(&self, attacker: &ComponentSet) -> Vec<usize> {
        (0..self.requirements.len())
            .filter(|&r| self.query(r, attacker) == Ok(Verdict::Breaks))
            .collect()
    }

    /// Explicitly enumerates every attacker breaking the requirement, in
    /// canonical order. Only available for small universes.
    pub fn propagate(&self, req: usize) -> Result<Vec<ComponentSet>, ClassifyError> {
        let n = self.universe_components.len();
        if n > MAX_EXPLICIT_UNIVERSE {
            return Err(ClassifyError::UniverseTooLarge {
                size: n,
                max: MAX_EXPLICIT_UNIVERSE,
            });
        }
        if req >= self.requirements.len() {
            return Err(ClassifyError::UnknownRequirement(req));
        }
        let mut breaking = Vec::new();
        for mask in 0u32..(1 << n) {
            let attacker: ComponentSet = self
                .universe_components
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &c)| c)
                .collect();
            if self.query(req, &attacker)? == Verdict::Breaks {
                breaking.push(attacker);
            }
        }
        breaking.sort_by_key(|a| (a.len(), a.iter().copied().collect::<Vec<_>>()));
        Ok(breaking)
    }
}

/// Classifies every requirement. Requirements are clustered by source
/// similarity and each cluster shares one unrolled instance and one solver
/// session, so learned clauses carry over between requirements.
pub fn classify(aig: &Aig, options: &Options) -> Result<ClassificationMap, ClassifyError> {
    let clusters = cluster_requirements(aig, options.cluster_threshold);
    let mut results: Vec<Option<RequirementClassification>> =
        vec![None; aig.requirements().len()];
    for cluster in clusters {
        let inst = UnrolledInstance::build(
            aig,
            &cluster.requirements,
            options.bound,
            options.isolation,
            options.universe,
        )?;
        let mut solver = Solver::from_cnf(&inst.cnf);
        for &r in &cluster.requirements {
            let base = if options.isolation {
                r_max(aig, r, options.universe)
            } else {
                options.universe.components(aig).into_iter().collect()
            };
            results[r] = Some(search(
                aig,
                &inst,
                &mut solver,
                r,
                &base,
                options.max_size,
                options.monotonicity,
                options.requirement_budget,
            )?);
        }
    }
    Ok(ClassificationMap {
        options: options.clone(),
        universe_components: options.universe.components(aig),
        requirements: results.into_iter().map(Option::unwrap).collect(),
    })
}

/// Reference classifier: one instance without isolation, full enumeration of
/// the universe with no size cap. Refuses universes over
/// [`MAX_EXPLICIT_UNIVERSE`] components.
pub fn naive_classify(aig: &Aig, options: &Options) -> Result<ClassificationMap, ClassifyError> {
    let universe: ComponentSet = options.universe.components(aig).into_iter().collect();
    if universe.len() > MAX_EXPLICIT_UNIVERSE {
        return Err(ClassifyError::UniverseTooLarge {
            size: universe.len(),
            max: MAX_EXPLICIT_UNIVERSE,
        });
    }
    let all: Vec<usize> = (0..aig.requirements().len()).collect();
    let inst = UnrolledInstance::build(aig, &all, options.bound, false, options.universe)?;
    let mut solver = Solver::from_cnf(&inst.cnf);
    let mut results = Vec::new();
    for r in all {
        results.push(search(
            aig,
            &inst,
            &mut solver,
            r,
            &universe,
            universe.len(),
            true,
            options.requirement_budget,
        )?);
    }
    Ok(ClassificationMap {
        options: options.clone(),
        universe_components: universe.into_iter().collect(),
        requirements: results,
    })
}

/// Frontier search for the minimal attackers of one requirement over subsets
/// of `base`, smallest candidates first, ties in lexicographic component
/// order. Safe candidates expand by one component of `base`; breaking ones
/// never expand. Every satisfiable verdict is validated by replaying the
/// extracted witness on the simulator.
#[allow(clippy::too_many_arguments)]
fn search(
    aig: &Aig,
    inst: &UnrolledInstance,
    solver: &mut Solver,
    req: usize,
    base: &ComponentSet,
    max_size: usize,
    monotonicity: bool,
    budget: Duration,
) -> Result<RequirementClassification, ClassifyError> {
    let start = Instant::now();
    let deadline = start.checked_add(budget).unwrap_or(start);
    let name = aig.requirements()[req].name.clone();
    let sat_calls_before = solver.stats.solve_calls;
    let mut rc = RequirementClassification::undecided(req, name, base.clone());

    let finish = |mut rc: RequirementClassification,
                  solver: &Solver,
                  safe: Vec<ComponentSet>,
                  start: Instant| {
        rc.safe_sets = safe;
        rc.sat_calls = solver.stats.solve_calls - sat_calls_before;
        rc.millis = start.elapsed().as_millis() as u64;
        rc
    };

    let check = |solver: &mut Solver,
                     attacker: &ComponentSet|
     -> Result<Option<SolveResult>, ClassifyError> {
        if Instant::now() >= deadline {
            return Ok(None);
        }
        let assumptions = inst.assumptions(attacker, req)?;
        let result = solver.solve_under(&assumptions, Budget { max_conflicts: None, deadline: Some(deadline) });
        if let SolveResult::Sat(model) = &result {
            let w = witness::extract(inst, model, aig, attacker, req)
                .map_err(|source| ClassifyError::BadWitness { req, source })?;
            witness::replay(aig, &w)
                .map_err(|source| ClassifyError::BadWitness { req, source })?;
            return Ok(Some(SolveResult::Sat(model.clone())));
        }
        Ok(Some(result))
    };

    // Existence pre-check against the most capable attacker.
    match check(solver, base)? {
        None | Some(SolveResult::Indeterminate) => {
            return Ok(finish(rc, solver, Vec::new(), start));
        }
        Some(SolveResult::Unsat(_)) => {
            rc.unbreakable = true;
            rc.complete = true;
            return Ok(finish(rc, solver, Vec::new(), start));
        }
        Some(SolveResult::Sat(_)) => {}
    }

    let as_key = |a: &ComponentSet| (a.len(), a.iter().copied().collect::<Vec<_>>());
    let mut frontier = std::collections::BTreeSet::new();
    frontier.insert(as_key(&ComponentSet::new()));
    let mut visited = std::collections::BTreeSet::new();
    let mut safe: Vec<ComponentSet> = Vec::new();
    let mut suppressed: Vec<ComponentSet> = Vec::new();
    let mut exhausted = false;

    while let Some(key) = frontier.pop_first() {
        let attacker: ComponentSet = key.1.iter().copied().collect();
        if !visited.insert(key) {
            continue;
        }
        if monotonicity
            && rc
                .minimal_attackers
                .iter()
                .any(|m| m.is_subset(&attacker))
        {
            continue;
        }
        rc.candidates_checked += 1;
        match check(solver, &attacker)? {
            None | Some(SolveResult::Indeterminate) => {
                exhausted = true;
                break;
            }
            Some(SolveResult::Sat(model)) => {
                let w = witness::extract(inst, &model, aig, &attacker, req)
                    .map_err(|source| ClassifyError::BadWitness { req, source })?;
                rc.witnesses.push(w);
                if attacker.is_empty() {
                    rc.broken_by_empty = true;
                }
                if monotonicity {
                    debug_assert!(rc
                        .minimal_attackers
                        .iter()
                        .all(|m| !m.is_subset(&attacker) && !attacker.is_subset(m)));
                }
                rc.minimal_attackers.push(attacker);
            }
            Some(SolveResult::Unsat(_)) => {
                for &c in base.difference(&attacker) {
                    let mut child = attacker.clone();
                    child.insert(c);
                    if child.len() > max_size {
                        suppressed.push(child);
                    } else {
                        frontier.insert(as_key(&child));
                    }
                }
                safe.push(attacker);
            }
        }
    }

    // The size cap only costs completeness when a suppressed candidate is
    // not already subsumed by a breaking attacker.
    rc.complete = !exhausted
        && suppressed.iter().all(|s| {
            rc.minimal_attackers.iter().any(|m| m.is_subset(s))
        });
    Ok(finish(rc, solver, safe, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::example1;

    const V1: ComponentId = ComponentId::Latch(0);
    const G1: ComponentId = ComponentId::Gate(0);
    const G2: ComponentId = ComponentId::Gate(1);

    fn set(ids: &[ComponentId]) -> ComponentSet {
        ids.iter().copied().collect()
    }

    fn sets(items: &[&[ComponentId]]) -> Vec<ComponentSet> {
        items.iter().map(|ids| set(ids)).collect()
    }

    fn gates_opts() -> Options {
        Options {
            bound: 2,
            universe: Universe::LatchesAndGates,
            ..Options::default()
        }
    }

    #[test]
    fn example1_minimal_attackers() {
        let aig = example1();
        let map = classify(&aig, &gates_opts()).unwrap();
        assert_eq!(map.requirements[0].minimal_attackers, sets(&[&[]]));
        assert!(map.requirements[0].broken_by_empty);
        assert_eq!(
            map.requirements[1].minimal_attackers,
            sets(&[&[V1], &[G2]])
        );
        assert_eq!(
            map.requirements[2].minimal_attackers,
            sets(&[&[V1], &[G2]])
        );
        for rc in &map.requirements {
            assert!(rc.complete, "{}", rc.name);
            assert!(!rc.unbreakable);
            assert_eq!(rc.witnesses.len(), rc.minimal_attackers.len());
        }
    }

    #[test]
    fn example1_broken_map() {
        let aig = example1();
        let map = classify(&aig, &gates_opts()).unwrap();
        assert_eq!(map.broken(&set(&[])), vec![0]);
        assert_eq!(map.broken(&set(&[G1])), vec![0]);
        assert_eq!(map.broken(&set(&[V1])), vec![0, 1, 2]);
        assert_eq!(map.broken(&set(&[G2])), vec![0, 1, 2]);
        assert_eq!(map.broken(&set(&[G1, G2])), vec![0, 1, 2]);
    }

    #[test]
    fn latches_only_default_universe() {
        let aig = example1();
        let opts = Options {
            bound: 2,
            ..Options::default()
        };
        let map = classify(&aig, &opts).unwrap();
        assert_eq!(map.universe_components, vec![V1]);
        assert_eq!(map.requirements[1].minimal_attackers, sets(&[&[V1]]));
        assert_eq!(map.requirements[1].relevant, set(&[V1]));
    }

    #[test]
    fn naive_agrees_with_search() {
        let aig = example1();
        let opts = gates_opts();
        let fast = classify(&aig, &opts).unwrap();
        let naive = naive_classify(&aig, &opts).unwrap();
        for (a, b) in fast.requirements.iter().zip(&naive.requirements) {
            assert_eq!(a.minimal_attackers, b.minimal_attackers, "{}", a.name);
            assert_eq!(a.unbreakable, b.unbreakable);
            assert_eq!(a.broken_by_empty, b.broken_by_empty);
        }
    }

    #[test]
    fn size_cap_loses_completeness_only_when_needed() {
        let aig = example1();
        let opts = Options {
            max_size: 0,
            ..gates_opts()
        };
        let map = classify(&aig, &opts).unwrap();
        // r1 breaks with the empty attacker: nothing suppressed matters.
        assert!(map.requirements[0].complete);
        // r2 needs size-1 attackers, which the cap hides.
        assert!(!map.requirements[1].complete);
        assert!(map.requirements[1].minimal_attackers.is_empty());
        assert_eq!(map.query(1, &set(&[V1])), Ok(Verdict::Unknown));
        assert_eq!(map.query(1, &set(&[])), Ok(Verdict::Safe));
    }

    #[test]
    fn without_monotonicity_supersets_reappear() {
        let aig = example1();
        let opts = Options {
            monotonicity: false,
            ..gates_opts()
        };
        let map = classify(&aig, &opts).unwrap();
        assert_eq!(
            map.requirements[1].minimal_attackers,
            sets(&[&[V1], &[G2], &[V1, G1], &[G1, G2]])
        );
        // Verdicts are unchanged.
        assert_eq!(map.broken(&set(&[V1])), vec![0, 1, 2]);
        assert_eq!(map.broken(&set(&[G1])), vec![0]);
    }

    #[test]
    fn zero_budget_yields_unknowns() {
        let aig = example1();
        let opts = Options {
            requirement_budget: Duration::ZERO,
            ..gates_opts()
        };
        let map = classify(&aig, &opts).unwrap();
        for rc in &map.requirements {
            assert!(!rc.complete);
            assert!(rc.minimal_attackers.is_empty());
        }
        assert_eq!(map.query(1, &set(&[V1])), Ok(Verdict::Unknown));
    }

    #[test]
    fn propagate_enumerates_breaking_attackers() {
        let aig = example1();
        let map = classify(&aig, &gates_opts()).unwrap();
        let breaking = map.propagate(1).unwrap();
        assert_eq!(
            breaking,
            sets(&[
                &[V1],
                &[G2],
                &[V1, G1],
                &[V1, G2],
                &[G1, G2],
                &[V1, G1, G2],
            ])
        );
        assert_eq!(map.propagate(0).unwrap().len(), 8);
        assert!(matches!(
            map.propagate(7),
            Err(ClassifyError::UnknownRequirement(7))
        ));
    }

    #[test]
    fn witnesses_respect_bound() {
        let aig = example1();
        let map = classify(&aig, &gates_opts()).unwrap();
        for rc in &map.requirements {
            for w in &rc.witnesses {
                assert!(w.step <= 2);
                assert_eq!(crate::witness::replay(&aig, w), Ok(()));
            }
        }
    }

    #[test]
    fn safe_sets_are_the_explored_unsat_candidates() {
        let aig = example1();
        let map = classify(&aig, &gates_opts()).unwrap();
        // r2: only the empty attacker and g1 alone are safe within the cap.
        let rc = &map.requirements[1];
        assert_eq!(rc.safe_sets, sets(&[&[], &[G1]]));
        for f in &rc.safe_sets {
            for m in &rc.minimal_attackers {
                assert!(!m.is_subset(f));
            }
        }
    }
}
