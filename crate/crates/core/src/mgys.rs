//! Multilevel General Yankee Swap.
//!
//! A pool node 0 hangs under the root and starts with every item. Each
//! iteration walks down from the root, at every node following the child
//! with the dominating gain, until it reaches a leaf. The leaf either pulls
//! an item out of the pool along a shortest transfer path, or leaves the
//! game, taking any ancestors that run out of children with it.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fairness::{gain, select_max, GainVector};
use crate::harness::Instance;
use crate::model::{validate_with_pool, Condition, ItemSet, MultilevelAllocation, NodeId, Tree, POOL, ROOT};
use crate::valuations::LeafProfile;
use crate::welfare::{apply_path, find_path, propagate, Owner, TransferPath};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub deadline: Option<Instant>,
    /// Check non-redundancy, augmentation deltas and validity after every
    /// iteration.
    pub audit: bool,
    pub trace: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Augment,
    Prune,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub iteration: usize,
    pub leaf: NodeId,
    pub event: EventKind,
    pub path: Vec<usize>,
    pub pruned: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditViolation {
    pub iteration: usize,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct MgysOutcome {
    /// Final allocation; the pool slot holds the items nobody took.
    pub allocation: MultilevelAllocation,
    pub iterations: usize,
    pub trace: Vec<TraceEvent>,
    pub violations: Vec<AuditViolation>,
}

/// Mutable state of one run. Exposed so callers can drive it step by step.
pub struct MgysState<'a> {
    tree: &'a Tree,
    profile: &'a LeafProfile<'a>,
    items: ItemSet,
    alloc: MultilevelAllocation,
    owner: Vec<Owner>,
    live: Vec<bool>,
    /// |π(i)|, which equals v_i(π) while the allocation is non-redundant.
    sizes: Vec<usize>,
    gains: Vec<Option<(usize, GainVector)>>,
    iteration: usize,
    audit: bool,
    violations: Vec<AuditViolation>,
}

/// What a single iteration did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Augmented { leaf: NodeId, path: TransferPath },
    Removed { leaf: NodeId, pruned: Vec<NodeId> },
    Done,
}

impl<'a> MgysState<'a> {
    /// Starts with `items` in both the root and the pool.
    pub fn new(tree: &'a Tree, profile: &'a LeafProfile<'a>, items: &ItemSet) -> Self {
        let n = tree.node_count();
        let m = items.universe();
        let mut alloc = MultilevelAllocation::empty(n, m);
        alloc.set_bundle(ROOT, items.clone());
        alloc.set_bundle(POOL, items.clone());
        let owner = (0..m).map(|g| if items.contains(g) { Owner::Pool } else { Owner::Outside }).collect();
        let mut sizes = vec![0; n + 1];
        sizes[ROOT] = items.len();
        sizes[POOL] = items.len();
        MgysState {
            tree,
            profile,
            items: items.clone(),
            alloc,
            owner,
            live: vec![true; n + 1],
            sizes,
            gains: vec![None; n + 1],
            iteration: 0,
            audit: false,
            violations: Vec::new(),
        }
    }

    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit;
        self
    }

    pub fn allocation(&self) -> &MultilevelAllocation {
        &self.alloc
    }

    pub fn is_live(&self, id: NodeId) -> bool {
        self.live[id]
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn violations(&self) -> &[AuditViolation] {
        &self.violations
    }

    pub fn is_done(&self) -> bool {
        !self.tree.children(ROOT).iter().any(|&c| self.live[c])
    }

    /// The leaf reached by following dominating gains from the root, ties
    /// to the least index. `None` once every leaf is gone.
    pub fn select_leaf(&mut self) -> Option<NodeId> {
        let mut node = ROOT;
        while !self.tree.is_leaf(node) {
            let crit = self.tree.criterion(node).expect("internal nodes carry a criterion");
            let kids: Vec<NodeId> = self.tree.children(node).iter().copied().filter(|&c| self.live[c]).collect();
            let gains: Vec<GainVector> = kids
                .iter()
                .map(|&c| {
                    let v = self.sizes[c];
                    match &self.gains[c] {
                        Some((cached_v, g)) if *cached_v == v => g.clone(),
                        _ => {
                            let g = gain(crit, v, self.tree.weight(c), c);
                            self.gains[c] = Some((v, g.clone()));
                            g
                        }
                    }
                })
                .collect();
            node = kids[select_max(&gains)?];
        }
        Some(node)
    }

    /// One iteration of the main loop.
    pub fn step(&mut self) -> Step {
        let Some(x) = self.select_leaf() else { return Step::Done };
        self.iteration += 1;
        let before = if self.audit { Some(self.sizes_snapshot()) } else { None };
        let owner = &self.owner;
        let path = find_path(self.profile, owner, self.bundles(), x, |g| owner[g] == Owner::Pool);
        let step = match path {
            Some(path) => {
                self.augment(&path);
                Step::Augmented { leaf: x, path }
            }
            None => Step::Removed { leaf: x, pruned: self.remove(x) },
        };
        if self.audit {
            self.check(&step, before.unwrap_or_default());
        }
        step
    }

    fn bundles(&self) -> &[ItemSet] {
        self.alloc.bundles()
    }

    fn augment(&mut self, path: &TransferPath) {
        let transfers = apply_path(&mut self.owner, self.alloc.bundles_mut(), path);
        propagate(self.tree, &mut self.alloc, &transfers);
        self.sizes[POOL] -= 1;
        self.sizes[path.leaf] += 1;
        for &a in self.tree.ancestors(path.leaf) {
            if a != ROOT {
                self.sizes[a] += 1;
            }
        }
    }

    fn remove(&mut self, x: NodeId) -> Vec<NodeId> {
        self.live[x] = false;
        let mut pruned = Vec::new();
        let mut cur = self.tree.parent(x);
        while let Some(p) = cur {
            if p == ROOT || self.tree.children(p).iter().any(|&c| self.live[c]) {
                break;
            }
            self.live[p] = false;
            pruned.push(p);
            cur = self.tree.parent(p);
        }
        pruned
    }

    fn sizes_snapshot(&self) -> Vec<usize> {
        (0..=self.tree.node_count()).map(|i| self.alloc.bundle(i).len()).collect()
    }

    fn check(&mut self, step: &Step, before: Vec<usize>) {
        let it = self.iteration;
        let mut report = |message: String| self.violations.push(AuditViolation { iteration: it, message });
        let after = (0..=self.tree.node_count()).map(|i| self.alloc.bundle(i).len()).collect::<Vec<_>>();

        // Non-redundancy: v_i(π) = |π(i)| on every live node.
        let mut v = vec![0; self.tree.node_count() + 1];
        for i in (1..=self.tree.node_count()).rev() {
            v[i] = if self.tree.is_leaf(i) {
                self.profile.get(i).value(self.alloc.bundle(i))
            } else {
                self.tree.children(i).iter().map(|&c| v[c]).sum()
            };
        }
        for i in self.tree.nodes().filter(|&i| self.live[i] && i != ROOT) {
            if v[i] != after[i] {
                report(format!("node {i} is redundant: v = {}, |bundle| = {}", v[i], after[i]));
            }
            if self.sizes[i] != after[i] {
                report(format!("node {i} size cache {} differs from {}", self.sizes[i], after[i]));
            }
        }
        if v[ROOT] + after[POOL] != self.items.len() {
            report(format!("root utility {} plus pool {} is not {}", v[ROOT], after[POOL], self.items.len()));
        }

        // Bundle-size deltas of an augmentation ending in the pool.
        match step {
            Step::Augmented { leaf, .. } => {
                let mut gainers: Vec<NodeId> = self.tree.ancestors(*leaf).to_vec();
                gainers.push(*leaf);
                for i in 0..=self.tree.node_count() {
                    let expected: i64 = if i == POOL {
                        -1
                    } else if i != ROOT && gainers.contains(&i) {
                        1
                    } else {
                        0
                    };
                    let actual = after[i] as i64 - before[i] as i64;
                    if actual != expected {
                        report(format!("node {i} changed by {actual}, expected {expected}"));
                    }
                }
            }
            Step::Removed { .. } => {
                if before != after {
                    report("bundles changed on a removal".into());
                }
            }
            Step::Done => {}
        }

        for viol in validate_with_pool(self.tree, &self.alloc).violations {
            if viol.condition == Condition::RootOwnsAll && self.alloc.bundle(ROOT) == &self.items {
                continue;
            }
            report(format!("invalid allocation: {viol}"));
        }
    }

    /// Consumes the state once the loop has finished.
    pub fn finish(self) -> (MultilevelAllocation, Vec<AuditViolation>) {
        (self.alloc, self.violations)
    }
}

/// Runs the engine to completion on an arbitrary tree and profile.
pub fn run_on(tree: &Tree, profile: &LeafProfile<'_>, items: &ItemSet, opts: &RunOptions) -> Result<MgysOutcome> {
    for &x in tree.leaves() {
        if profile.try_get(x).is_none() {
            return Err(Error::InvalidInstance(format!("leaf {x} has no valuation")));
        }
    }
    let mut state = MgysState::new(tree, profile, items).with_audit(opts.audit);
    let mut trace = Vec::new();
    loop {
        if opts.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Error::Timeout);
        }
        let step = state.step();
        let iteration = state.iteration();
        let event = match step {
            Step::Done => break,
            Step::Augmented { leaf, path } => {
                TraceEvent { iteration, leaf, event: EventKind::Augment, path: path.items, pruned: vec![] }
            }
            Step::Removed { leaf, pruned } => {
                TraceEvent { iteration, leaf, event: EventKind::Prune, path: vec![], pruned }
            }
        };
        if opts.trace {
            trace.push(event);
        }
    }
    let iterations = state.iteration();
    let (allocation, violations) = state.finish();
    Ok(MgysOutcome { allocation, iterations, trace, violations })
}

/// MGYS on an instance, allocating every item.
pub fn run_mgys(instance: &Instance, opts: &RunOptions) -> Result<MgysOutcome> {
    let profile = instance.profile();
    run_on(&instance.tree, &profile, &ItemSet::full(instance.m), opts)
}
