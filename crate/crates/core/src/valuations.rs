//! Matroid-rank leaf valuations and the set-function interface shared with
//! the estimated utility proxies.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Item, ItemSet, NodeId};

/// A set function over items. Every implementor in this crate is a matroid
/// rank function.
pub trait SetFunction {
    fn value(&self, s: &ItemSet) -> usize;

    /// Δ(S, g). Callers guarantee `g ∉ S`.
    fn marginal_gain(&self, s: &ItemSet, g: Item) -> usize {
        self.value(&s.with(g)).saturating_sub(self.value(s))
    }

    /// Whether replacing `out ∈ S` by `into ∉ S` keeps the value of `S`.
    fn swap_preserves(&self, s: &ItemSet, out: Item, into: Item) -> bool {
        let mut t = s.without(out);
        t.insert(into);
        self.value(&t) == self.value(s)
    }
}

/// Δ(S, g) with the precondition checked.
pub fn marginal_gain(f: &dyn SetFunction, s: &ItemSet, g: Item) -> Result<usize> {
    if s.contains(g) {
        return Err(Error::ItemInBundle { item: g });
    }
    Ok(f.marginal_gain(s, g))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Valuation {
    BinaryAdditive { approved: ItemSet },
    CappedBinaryAdditive { approved: ItemSet, cap: usize },
    /// `min(|S|, cap)`: rank of a uniform matroid.
    UniformCap { cap: usize },
    /// Size of a maximum matching between subagents and the items they
    /// approve.
    BinaryAssignment { subagents: Vec<ItemSet> },
}

impl Valuation {
    pub fn family(&self) -> &'static str {
        match self {
            Valuation::BinaryAdditive { .. } => "binary_additive",
            Valuation::CappedBinaryAdditive { .. } => "capped_binary_additive",
            Valuation::UniformCap { .. } => "uniform_cap",
            Valuation::BinaryAssignment { .. } => "binary_assignment",
        }
    }

    pub fn evaluate(&self, s: &ItemSet) -> usize {
        match self {
            Valuation::BinaryAdditive { approved } => s.intersection_len(approved),
            Valuation::CappedBinaryAdditive { approved, cap } => s.intersection_len(approved).min(*cap),
            Valuation::UniformCap { cap } => s.len().min(*cap),
            Valuation::BinaryAssignment { subagents } => {
                let adj: Vec<Vec<usize>> =
                    subagents.iter().map(|a| a.iter().filter(|&g| s.contains(g)).collect()).collect();
                matching_size(&adj, s.universe())
            }
        }
    }

    /// Checks that every item reference fits in a universe of size `m`.
    pub fn check_universe(&self, m: usize) -> Result<()> {
        let ok = match self {
            Valuation::BinaryAdditive { approved } | Valuation::CappedBinaryAdditive { approved, .. } => {
                approved.universe() == m
            }
            Valuation::UniformCap { .. } => true,
            Valuation::BinaryAssignment { subagents } => subagents.iter().all(|a| a.universe() == m),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInstance(format!("{} valuation built for a different item count", self.family())))
        }
    }
}

impl SetFunction for Valuation {
    fn value(&self, s: &ItemSet) -> usize {
        self.evaluate(s)
    }

    fn marginal_gain(&self, s: &ItemSet, g: Item) -> usize {
        match self {
            Valuation::BinaryAdditive { approved } => usize::from(approved.contains(g) && !s.contains(g)),
            Valuation::CappedBinaryAdditive { approved, cap } => {
                usize::from(approved.contains(g) && !s.contains(g) && s.intersection_len(approved) < *cap)
            }
            Valuation::UniformCap { cap } => usize::from(!s.contains(g) && s.len() < *cap),
            Valuation::BinaryAssignment { .. } => self.evaluate(&s.with(g)).saturating_sub(self.evaluate(s)),
        }
    }
}

/// Maps leaf ids to their set functions.
#[derive(Clone, Default)]
pub struct LeafProfile<'a> {
    fns: Vec<Option<&'a dyn SetFunction>>,
}

impl<'a> LeafProfile<'a> {
    pub fn new() -> Self {
        LeafProfile { fns: Vec::new() }
    }

    /// Profile over a slice indexed by node id.
    pub fn from_valuations(vals: &'a [Option<Valuation>]) -> Self {
        let mut profile = LeafProfile::new();
        for (id, v) in vals.iter().enumerate() {
            if let Some(v) = v {
                profile.set(id, v);
            }
        }
        profile
    }

    pub fn set(&mut self, id: NodeId, f: &'a dyn SetFunction) {
        if self.fns.len() <= id {
            self.fns.resize(id + 1, None);
        }
        self.fns[id] = Some(f);
    }

    pub fn try_get(&self, id: NodeId) -> Option<&'a dyn SetFunction> {
        self.fns.get(id).copied().flatten()
    }

    /// Panics when `id` has no set function.
    pub fn get(&self, id: NodeId) -> &'a dyn SetFunction {
        self.try_get(id).unwrap_or_else(|| panic!("no valuation for node {id}"))
    }
}

/// Maximum matching by Hopcroft-Karp. `adj[l]` lists the right vertices
/// adjacent to left vertex `l`; right vertices are `0..right`. Returns the
/// partner of every left vertex.
pub fn hopcroft_karp(adj: &[Vec<usize>], right: usize) -> Vec<Option<usize>> {
    const INF: usize = usize::MAX;
    let left = adj.len();
    let mut mate_l: Vec<Option<usize>> = vec![None; left];
    let mut mate_r: Vec<Option<usize>> = vec![None; right];
    let mut dist = vec![INF; left];

    loop {
        let mut queue = VecDeque::new();
        for l in 0..left {
            if mate_l[l].is_none() {
                dist[l] = 0;
                queue.push_back(l);
            } else {
                dist[l] = INF;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in &adj[l] {
                match mate_r[r] {
                    None => found = true,
                    Some(l2) if dist[l2] == INF => {
                        dist[l2] = dist[l] + 1;
                        queue.push_back(l2);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        for l in 0..left {
            if mate_l[l].is_none() {
                augment(l, adj, &mut mate_l, &mut mate_r, &mut dist);
            }
        }
    }
    mate_l
}

fn augment(
    l: usize,
    adj: &[Vec<usize>],
    mate_l: &mut [Option<usize>],
    mate_r: &mut [Option<usize>],
    dist: &mut [usize],
) -> bool {
    for &r in &adj[l] {
        let free_or_next = match mate_r[r] {
            None => true,
            Some(l2) => dist[l2] == dist[l].wrapping_add(1) && augment(l2, adj, mate_l, mate_r, dist),
        };
        if free_or_next {
            mate_l[l] = Some(r);
            mate_r[r] = Some(l);
            return true;
        }
    }
    dist[l] = usize::MAX;
    false
}

pub fn matching_size(adj: &[Vec<usize>], right: usize) -> usize {
    hopcroft_karp(adj, right).iter().filter(|m| m.is_some()).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axiom {
    Normalization,
    Monotonicity,
    Submodularity,
    BinaryMarginal,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axiom::Normalization => "normalization",
            Axiom::Monotonicity => "monotonicity",
            Axiom::Submodularity => "submodularity",
            Axiom::BinaryMarginal => "binary-marginal",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MrfViolation {
    pub axiom: Axiom,
    pub s: ItemSet,
    pub t: ItemSet,
    pub item: Option<Item>,
}

#[derive(Clone, Debug)]
pub struct MrfReport {
    pub exhaustive: bool,
    pub checks: usize,
    pub violation: Option<MrfViolation>,
}

impl MrfReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks that `f` is a matroid rank function on a universe of `m` items.
///
/// Exhaustive over all subsets when `m <= 10`; otherwise `trials` random
/// chains `S ⊆ T` and items `g ∉ T` are sampled from `seed`.
pub fn mrf_axiom_check(f: &dyn SetFunction, m: usize, trials: usize, seed: u64) -> MrfReport {
    if m <= 10 {
        exhaustive_check(f, m)
    } else {
        sampled_check(f, m, trials.max(1), seed)
    }
}

fn mask_set(m: usize, mask: usize) -> ItemSet {
    ItemSet::from_items(m, (0..m).filter(|g| mask >> g & 1 == 1))
}

fn exhaustive_check(f: &dyn SetFunction, m: usize) -> MrfReport {
    let values: Vec<i64> = (0..1usize << m).map(|mask| f.value(&mask_set(m, mask)) as i64).collect();
    let fail = |axiom, s: usize, t: usize, item| MrfReport {
        exhaustive: true,
        checks: 0,
        violation: Some(MrfViolation { axiom, s: mask_set(m, s), t: mask_set(m, t), item }),
    };
    if values[0] != 0 {
        return fail(Axiom::Normalization, 0, 0, None);
    }
    let mut checks = 0;
    for mask in 0..1usize << m {
        for g in (0..m).filter(|g| mask >> g & 1 == 0) {
            let d = values[mask | 1 << g] - values[mask];
            checks += 1;
            if d < 0 {
                return fail(Axiom::Monotonicity, mask, mask | 1 << g, Some(g));
            }
            if d > 1 {
                return fail(Axiom::BinaryMarginal, mask, mask, Some(g));
            }
            // Local submodularity over single-item extensions implies the
            // global property.
            for h in (0..m).filter(|&h| h != g && mask >> h & 1 == 0) {
                let bigger = mask | 1 << h;
                checks += 1;
                if values[bigger | 1 << g] - values[bigger] > d {
                    return fail(Axiom::Submodularity, mask, bigger, Some(g));
                }
            }
        }
    }
    MrfReport { exhaustive: true, checks, violation: None }
}

fn sampled_check(f: &dyn SetFunction, m: usize, trials: usize, seed: u64) -> MrfReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let empty = ItemSet::empty(m);
    if f.value(&empty) != 0 {
        return MrfReport {
            exhaustive: false,
            checks: 1,
            violation: Some(MrfViolation { axiom: Axiom::Normalization, s: empty.clone(), t: empty, item: None }),
        };
    }
    for trial in 0..trials {
        let t = ItemSet::from_items(m, (0..m).filter(|_| rng.random_bool(0.5)));
        let s = ItemSet::from_items(m, t.iter().filter(|_| rng.random_bool(0.5)));
        let outside: Vec<Item> = (0..m).filter(|&g| !t.contains(g)).collect();
        let violation = |axiom, item| MrfReport {
            exhaustive: false,
            checks: trial + 1,
            violation: Some(MrfViolation { axiom, s: s.clone(), t: t.clone(), item }),
        };
        let (vs, vt) = (f.value(&s), f.value(&t));
        if vs > vt {
            return violation(Axiom::Monotonicity, None);
        }
        if outside.is_empty() {
            continue;
        }
        let g = outside[rng.random_range(0..outside.len())];
        let ds = f.value(&s.with(g)) as i64 - vs as i64;
        let dt = f.value(&t.with(g)) as i64 - vt as i64;
        if ds < 0 || dt < 0 {
            return violation(Axiom::Monotonicity, Some(g));
        }
        if ds > 1 || dt > 1 {
            return violation(Axiom::BinaryMarginal, Some(g));
        }
        if ds < dt {
            return violation(Axiom::Submodularity, Some(g));
        }
    }
    MrfReport { exhaustive: false, checks: trials, violation: None }
}
