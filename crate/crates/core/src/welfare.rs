//! Exchange graphs, transfer paths, the estimated utility v̂ and the
//! monolevel General Yankee Swap.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fairness::FairnessCriterion;
use crate::mgys::{self, RunOptions};
use crate::model::{Item, ItemSet, LocalAllocation, MultilevelAllocation, NodeId, Tree, Weight, POOL, ROOT};
use crate::valuations::{matching_size, LeafProfile, SetFunction, Valuation};

/// Who currently holds an item.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Owner {
    Pool,
    Leaf(NodeId),
    /// Not part of the items being allocated.
    Outside,
}

/// Items `(g₁, …, g_t)`: `g₁` goes to `leaf`, each later item moves to the
/// previous item's owner, and `g_t` leaves the target bundle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferPath {
    pub leaf: NodeId,
    pub items: Vec<Item>,
}

/// One item moving between holders during an augmentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transfer {
    pub item: Item,
    pub from: Owner,
    pub to: NodeId,
}

/// Owner of every item under `alloc`: leaves first, then the pool.
pub fn owner_map(tree: &Tree, alloc: &MultilevelAllocation) -> Vec<Owner> {
    let mut owner = vec![Owner::Outside; alloc.item_count()];
    for g in alloc.pool().iter() {
        owner[g] = Owner::Pool;
    }
    for &x in tree.leaves() {
        for g in alloc.bundle(x).iter() {
            owner[g] = Owner::Leaf(x);
        }
    }
    owner
}

/// Breadth-first search for a shortest path from `F_x` to an item
/// satisfying `is_target`.
///
/// Vertices are leaf-held items plus targets; targets have no out-edges.
/// Ties go to the lowest item id: starts are scanned in increasing order,
/// neighbours likewise, and among the targets reached in the first
/// successful layer the smallest wins.
pub fn find_path(
    profile: &LeafProfile<'_>,
    owner: &[Owner],
    bundles: &[ItemSet],
    x: NodeId,
    is_target: impl Fn(Item) -> bool,
) -> Option<TransferPath> {
    let m = owner.len();
    let fx = profile.get(x);
    let bundle_x = &bundles[x];
    let in_graph = |g: Item| matches!(owner[g], Owner::Leaf(_)) || is_target(g);

    let mut parent: Vec<Option<Item>> = vec![None; m];
    let mut seen = vec![false; m];
    let mut layer: Vec<Item> = Vec::new();
    for g in 0..m {
        if !bundle_x.contains(g) && in_graph(g) && fx.marginal_gain(bundle_x, g) == 1 {
            seen[g] = true;
            layer.push(g);
        }
    }

    let trace_back = |end: Item, parent: &[Option<Item>]| {
        let mut items = vec![end];
        let mut cur = end;
        while let Some(p) = parent[cur] {
            items.push(p);
            cur = p;
        }
        items.reverse();
        TransferPath { leaf: x, items }
    };

    while !layer.is_empty() {
        if let Some(&end) = layer.iter().filter(|&&g| is_target(g)).min() {
            return Some(trace_back(end, &parent));
        }
        let mut next = Vec::new();
        for &g in &layer {
            let Owner::Leaf(y) = owner[g] else { continue };
            let fy = profile.get(y);
            let bundle_y = &bundles[y];
            for h in 0..m {
                if seen[h] || bundle_y.contains(h) || !in_graph(h) {
                    continue;
                }
                if fy.swap_preserves(bundle_y, g, h) {
                    seen[h] = true;
                    parent[h] = Some(g);
                    next.push(h);
                }
            }
        }
        layer = next;
    }
    None
}

/// Shifts items along `path`: leaf bundles, the pool slot and the owner
/// map are updated. Returns the transfers in path order.
pub(crate) fn apply_path(
    owner: &mut [Owner],
    bundles: &mut [ItemSet],
    path: &TransferPath,
) -> Vec<Transfer> {
    let mut transfers = Vec::with_capacity(path.items.len());
    let mut receiver = path.leaf;
    for &g in &path.items {
        let from = owner[g];
        match from {
            Owner::Leaf(y) => {
                bundles[y].remove(g);
            }
            Owner::Pool => {
                bundles[POOL].remove(g);
            }
            Owner::Outside => {}
        }
        bundles[receiver].insert(g);
        owner[g] = Owner::Leaf(receiver);
        transfers.push(Transfer { item: g, from, to: receiver });
        if let Owner::Leaf(y) = from {
            receiver = y;
        }
    }
    transfers
}

/// Propagates leaf-level transfers to the internal bundles: the item is
/// added on `Anc(to) ∖ Anc(from)` and removed on `Anc(from) ∖ Anc(to)`.
/// The pool's only ancestor is the root.
pub(crate) fn propagate(tree: &Tree, alloc: &mut MultilevelAllocation, transfers: &[Transfer]) {
    for t in transfers {
        let to_anc = tree.ancestors(t.to);
        let from_anc: &[NodeId] = match t.from {
            Owner::Leaf(y) => tree.ancestors(y),
            Owner::Pool => &[ROOT],
            Owner::Outside => &[],
        };
        for &a in to_anc {
            if !from_anc.contains(&a) {
                alloc.bundle_mut(a).insert(t.item);
            }
        }
        for &a in from_anc {
            if !to_anc.contains(&a) {
                alloc.bundle_mut(a).remove(t.item);
            }
        }
    }
}

/// Shortest transfer path for leaf `x` into `target` under `alloc`.
pub fn shortest_transfer_path(
    tree: &Tree,
    profile: &LeafProfile<'_>,
    alloc: &MultilevelAllocation,
    x: NodeId,
    target: &ItemSet,
) -> Option<TransferPath> {
    let owner = owner_map(tree, alloc);
    let bundles: Vec<ItemSet> = (0..=tree.node_count()).map(|i| alloc.bundle(i).clone()).collect();
    find_path(profile, &owner, &bundles, x, |g| target.contains(g))
}

/// Applies `path` to a copy of `alloc` and returns the result.
pub fn path_augment(tree: &Tree, alloc: &MultilevelAllocation, path: &TransferPath) -> Result<MultilevelAllocation> {
    let malformed = |msg: String| Err(Error::MalformedPath(msg));
    if !tree.contains(path.leaf) || !tree.is_leaf(path.leaf) {
        return malformed(format!("{} is not a leaf", path.leaf));
    }
    if path.items.is_empty() {
        return malformed("empty path".into());
    }
    let m = alloc.item_count();
    if let Some(&g) = path.items.iter().find(|&&g| g >= m) {
        return malformed(format!("item {g} outside the universe"));
    }
    let mut sorted = path.items.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != path.items.len() {
        return malformed("repeated item".into());
    }
    let mut owner = owner_map(tree, alloc);
    if alloc.bundle(path.leaf).contains(path.items[0]) {
        return malformed(format!("leaf {} already holds the first item", path.leaf));
    }
    let (inner, last) = path.items.split_at(path.items.len() - 1);
    if let Some(&g) = inner.iter().find(|&&g| !matches!(owner[g], Owner::Leaf(_))) {
        return malformed(format!("interior item {g} is not held by a leaf"));
    }
    if owner[last[0]] == Owner::Outside {
        return malformed(format!("final item {} is neither pooled nor held", last[0]));
    }
    let mut bundles: Vec<ItemSet> = (0..=tree.node_count()).map(|i| alloc.bundle(i).clone()).collect();
    let transfers = apply_path(&mut owner, &mut bundles, path);
    let mut out = alloc.clone();
    for &x in tree.leaves() {
        out.set_bundle(x, bundles[x].clone());
    }
    out.set_bundle(POOL, bundles[POOL].clone());
    propagate(tree, &mut out, &transfers);
    Ok(out)
}

/// A non-redundant assignment of part of a bundle to the leaves of a
/// subtree, with maximum total leaf utility.
#[derive(Clone, Debug)]
struct Witness {
    owner: Vec<Owner>,
    bundles: Vec<ItemSet>,
}

impl Witness {
    fn value(&self) -> usize {
        self.owner.iter().filter(|o| matches!(o, Owner::Leaf(_))).count()
    }
}

enum Shortcut {
    Additive(ItemSet),
    Assignment(Vec<ItemSet>),
}

/// v̂: the best total leaf utility a subtree can extract from a bundle.
///
/// Memoized per `(node, bundle)`; one instance should serve one run.
pub struct HatV<'a> {
    tree: &'a Tree,
    profile: LeafProfile<'a>,
    shortcuts: Vec<Option<Shortcut>>,
    values: RefCell<HashMap<(NodeId, ItemSet), usize>>,
    witnesses: RefCell<HashMap<(NodeId, ItemSet), Witness>>,
}

impl<'a> HatV<'a> {
    /// `vals` is indexed by node id and must cover every leaf.
    pub fn new(tree: &'a Tree, vals: &'a [Option<Valuation>]) -> Self {
        let profile = LeafProfile::from_valuations(vals);
        let shortcuts = (0..=tree.node_count())
            .map(|i| {
                if i == POOL || tree.is_leaf(i) {
                    return None;
                }
                let leaves: Vec<&Valuation> =
                    tree.leaves_under(i).iter().filter_map(|&x| vals.get(x).and_then(Option::as_ref)).collect();
                if leaves.len() != tree.leaves_under(i).len() {
                    return None;
                }
                if leaves.iter().all(|v| matches!(v, Valuation::BinaryAdditive { .. })) {
                    let mut union: Option<ItemSet> = None;
                    for v in &leaves {
                        if let Valuation::BinaryAdditive { approved } = v {
                            union = Some(match union {
                                Some(u) => u.union(approved),
                                None => approved.clone(),
                            });
                        }
                    }
                    return union.map(Shortcut::Additive);
                }
                if leaves.iter().all(|v| matches!(v, Valuation::BinaryAssignment { .. })) {
                    let subagents = leaves
                        .iter()
                        .flat_map(|v| match v {
                            Valuation::BinaryAssignment { subagents } => subagents.clone(),
                            _ => Vec::new(),
                        })
                        .collect();
                    return Some(Shortcut::Assignment(subagents));
                }
                None
            })
            .collect();
        HatV {
            tree,
            profile,
            shortcuts,
            values: RefCell::new(HashMap::new()),
            witnesses: RefCell::new(HashMap::new()),
        }
    }

    pub fn tree(&self) -> &'a Tree {
        self.tree
    }

    pub fn profile(&self) -> &LeafProfile<'a> {
        &self.profile
    }

    /// v̂_i(S).
    pub fn value(&self, i: NodeId, s: &ItemSet) -> usize {
        if self.tree.is_leaf(i) {
            return self.profile.get(i).value(s);
        }
        let key = (i, s.clone());
        if let Some(&v) = self.values.borrow().get(&key) {
            return v;
        }
        let v = match &self.shortcuts[i] {
            Some(Shortcut::Additive(union)) => s.intersection_len(union),
            Some(Shortcut::Assignment(subagents)) => {
                let adj: Vec<Vec<usize>> =
                    subagents.iter().map(|a| a.iter().filter(|&g| s.contains(g)).collect()).collect();
                matching_size(&adj, s.universe())
            }
            None => self.witness_value(i, s),
        };
        self.values.borrow_mut().insert(key, v);
        v
    }

    /// A leaf assignment achieving v̂_i(S), as bundles per leaf of `i`.
    pub fn optimal_split(&self, i: NodeId, s: &ItemSet) -> Vec<(NodeId, ItemSet)> {
        if self.tree.is_leaf(i) {
            return vec![(i, s.clone())];
        }
        let w = self.witness(i, s);
        self.tree.leaves_under(i).iter().map(|&x| (x, w.bundles[x].clone())).collect()
    }

    fn witness_value(&self, i: NodeId, s: &ItemSet) -> usize {
        let key = (i, s.clone());
        if let Some(w) = self.witnesses.borrow().get(&key) {
            return w.value();
        }
        let w = self.witness(i, s);
        w.value()
    }

    fn witness(&self, i: NodeId, s: &ItemSet) -> Witness {
        let key = (i, s.clone());
        if let Some(w) = self.witnesses.borrow().get(&key) {
            return w.clone();
        }
        let m = s.universe();
        let n = self.tree.node_count();
        // Warm start from a cached maximal assignment of S minus one item.
        let warm = {
            let cache = self.witnesses.borrow();
            s.iter().find_map(|g| cache.get(&(i, s.without(g))).map(|w| (g, w.clone())))
        };
        let mut w = match warm {
            Some((g, mut w)) => {
                w.owner[g] = Owner::Pool;
                w.bundles[POOL].insert(g);
                w
            }
            None => {
                let mut owner = vec![Owner::Outside; m];
                for g in s.iter() {
                    owner[g] = Owner::Pool;
                }
                let mut bundles = vec![ItemSet::empty(m); n + 1];
                bundles[POOL] = s.clone();
                Witness { owner, bundles }
            }
        };
        loop {
            let mut progressed = false;
            for &x in self.tree.leaves_under(i) {
                if w.bundles[POOL].is_empty() {
                    break;
                }
                let owner = &w.owner;
                if let Some(path) = find_path(&self.profile, owner, &w.bundles, x, |g| owner[g] == Owner::Pool) {
                    apply_path(&mut w.owner, &mut w.bundles, &path);
                    progressed = true;
                }
            }
            if !progressed || w.bundles[POOL].is_empty() {
                break;
            }
        }
        self.witnesses.borrow_mut().insert(key, w.clone());
        w
    }

    pub fn proxy(&self, node: NodeId) -> HatVProxy<'_, 'a> {
        HatVProxy { hat: self, node }
    }
}

/// v̂ of one node, usable wherever a leaf valuation is.
pub struct HatVProxy<'h, 'a> {
    hat: &'h HatV<'a>,
    node: NodeId,
}

impl SetFunction for HatVProxy<'_, '_> {
    fn value(&self, s: &ItemSet) -> usize {
        self.hat.value(self.node, s)
    }
}

/// One-shot v̂_i(S) without keeping the memo.
pub fn hat_v(tree: &Tree, vals: &[Option<Valuation>], i: NodeId, s: &ItemSet) -> usize {
    HatV::new(tree, vals).value(i, s)
}

/// General Yankee Swap over a flat set of agents: utilitarian optimal and
/// fair under `crit` with respect to `fns`.
///
/// Runs the multilevel engine on a star whose leaves are the agents, in
/// the given order, so ties go to earlier agents.
pub fn monolevel_gys(
    agents: &[NodeId],
    weights: &[Weight],
    fns: &[&dyn SetFunction],
    s: &ItemSet,
    crit: FairnessCriterion,
) -> Result<LocalAllocation> {
    if agents.len() != weights.len() || agents.len() != fns.len() {
        return Err(Error::ArityMismatch { left: agents.len(), right: weights.len().min(fns.len()) });
    }
    if agents.is_empty() {
        return Ok(LocalAllocation { nodes: vec![], shares: vec![], source: s.clone() });
    }
    let star = Tree::star(weights, crit)?;
    let mut profile = LeafProfile::new();
    for (k, f) in fns.iter().enumerate() {
        profile.set(k + 2, *f);
    }
    let outcome = mgys::run_on(&star, &profile, s, &RunOptions::default())?;
    Ok(LocalAllocation {
        nodes: agents.to_vec(),
        shares: (0..agents.len()).map(|k| outcome.allocation.bundle(k + 2).clone()).collect(),
        source: s.clone(),
    })
}
