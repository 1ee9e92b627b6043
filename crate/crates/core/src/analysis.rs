//! Structural analysis of circuits: cone of influence, dual cone, sources,
//! Jaccard similarity, the most capable relevant attacker of a requirement,
//! and requirement clustering.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::aig::{Aig, ComponentId, Literal};

/// Canonical ordered set of components (kind, then index).
pub type ComponentSet = BTreeSet<ComponentId>;

/// The attacker universe: which component kinds attackers may control.
/// Attackers never control inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Universe {
    /// An attacker controlling a gate can be emulated by one controlling the
    /// source latches of that gate, so latches-only is the default.
    #[default]
    LatchesOnly,
    LatchesAndGates,
}

impl Universe {
    pub fn admits(self, c: ComponentId) -> bool {
        match (self, c) {
            (_, ComponentId::Input(_)) => false,
            (_, ComponentId::Latch(_)) => true,
            (Universe::LatchesOnly, ComponentId::Gate(_)) => false,
            (Universe::LatchesAndGates, ComponentId::Gate(_)) => true,
        }
    }

    /// All components attackers may be built from, in canonical order.
    pub fn components(self, aig: &Aig) -> Vec<ComponentId> {
        aig.components().filter(|&c| self.admits(c)).collect()
    }
}

/// Cone of influence of an expression: the smallest set closed under the
/// dependency rules (constants contribute nothing, an input contributes
/// itself, a latch contributes itself plus the cone of its next-state
/// expression, a gate contributes itself plus the cones of its operands).
pub fn coi(aig: &Aig, e: Literal) -> ComponentSet {
    let mut cone = ComponentSet::new();
    let mut stack = Vec::new();
    if let Some(c) = component_of(aig, e) {
        stack.push(c);
    }
    while let Some(c) = stack.pop() {
        if !cone.insert(c) {
            continue;
        }
        match c {
            ComponentId::Input(_) => {}
            ComponentId::Latch(i) => {
                if let Some(d) = component_of(aig, aig.latches()[i as usize].next) {
                    stack.push(d);
                }
            }
            ComponentId::Gate(i) => {
                let g = &aig.gates()[i as usize];
                for rhs in [g.rhs0, g.rhs1] {
                    if let Some(d) = component_of(aig, rhs) {
                        stack.push(d);
                    }
                }
            }
        }
    }
    cone
}

fn component_of(aig: &Aig, e: Literal) -> Option<ComponentId> {
    if e.is_constant() {
        None
    } else {
        aig.component_of_var(e.var())
    }
}

/// Dual cone of a component: every component whose cone contains `c`.
pub fn ioc(aig: &Aig, c: ComponentId) -> ComponentSet {
    aig.components()
        .filter(|&other| coi_of_component(aig, other).contains(&c))
        .collect()
}

fn coi_of_component(aig: &Aig, c: ComponentId) -> ComponentSet {
    coi(aig, Literal::from_var(aig.var_of_component(c), false))
}

/// Dual cone of an attacker: the union of its members' dual cones.
pub fn ioc_of_set(aig: &Aig, set: &ComponentSet) -> ComponentSet {
    set.iter().flat_map(|&c| ioc(aig, c)).collect()
}

/// Sources of an expression: the latches and inputs in its cone.
pub fn sources(aig: &Aig, e: Literal) -> ComponentSet {
    coi(aig, e)
        .into_iter()
        .filter(|c| !matches!(c, ComponentId::Gate(_)))
        .collect()
}

/// Jaccard index of the source sets of two expressions. Defined as 1 when
/// both source sets are empty.
pub fn jaccard(aig: &Aig, e1: Literal, e2: Literal) -> f64 {
    let s1 = sources(aig, e1);
    let s2 = sources(aig, e2);
    let union = s1.union(&s2).count();
    if union == 0 {
        return 1.0;
    }
    s1.intersection(&s2).count() as f64 / union as f64
}

/// The most capable attacker relevant to requirement `req_index`: its cone
/// minus the inputs, restricted to the configured universe.
pub fn r_max(aig: &Aig, req_index: usize, universe: Universe) -> ComponentSet {
    coi(aig, aig.requirements()[req_index].good)
        .into_iter()
        .filter(|&c| universe.admits(c))
        .collect()
}

/// A group of requirements solved against one unrolled instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    /// Indices into the requirement list.
    pub requirements: Vec<usize>,
    /// Union of the member cones.
    pub cone: ComponentSet,
}

/// Greedy agglomerative clustering: repeatedly seed a cluster with the
/// unassigned requirement of largest source set and absorb every unassigned
/// requirement whose Jaccard index with the seed is at least `threshold`
/// (clamped to [0, 1]). Deterministic given input order.
pub fn cluster_requirements(aig: &Aig, threshold: f64) -> Vec<Cluster> {
    let threshold = threshold.clamp(0.0, 1.0);
    let reqs = aig.requirements();
    let source_sets: Vec<ComponentSet> = reqs.iter().map(|r| sources(aig, r.good)).collect();
    let mut unassigned: Vec<usize> = (0..reqs.len()).collect();
    let mut clusters = Vec::new();
    while !unassigned.is_empty() {
        let seed_pos = unassigned
            .iter()
            .enumerate()
            .max_by_key(|&(_, &r)| source_sets[r].len())
            .map(|(pos, _)| pos)
            .unwrap();
        let seed = unassigned.remove(seed_pos);
        let mut members = vec![seed];
        unassigned.retain(|&r| {
            let union = source_sets[seed].union(&source_sets[r]).count();
            let index = if union == 0 {
                1.0
            } else {
                source_sets[seed].intersection(&source_sets[r]).count() as f64 / union as f64
            };
            if index >= threshold {
                members.push(r);
                false
            } else {
                true
            }
        });
        members.sort_unstable();
        let cone = members
            .iter()
            .flat_map(|&r| coi(aig, reqs[r].good))
            .collect();
        clusters.push(Cluster {
            requirements: members,
            cone,
        });
    }
    clusters
}
