//! The hierarchy, item bundles, and allocations over them.
//!
//! Nodes are numbered `1..=n` in topological order (every parent has a
//! smaller id than its children), so the root is always node 1. Id 0 is
//! reserved for the pool of unallocated items that the multilevel Yankee
//! Swap attaches under the root; it is never part of a [`Tree`].

use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::fairness::FairnessCriterion;
use crate::valuations::LeafProfile;

pub type NodeId = usize;
pub type Item = usize;

/// Pseudo-node holding unallocated items during a Yankee Swap run.
pub const POOL: NodeId = 0;
pub const ROOT: NodeId = 1;

/// A subset of the item universe `{0, .., m-1}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemSet {
    bits: FixedBitSet,
}

impl ItemSet {
    pub fn empty(m: usize) -> Self {
        ItemSet { bits: FixedBitSet::with_capacity(m) }
    }

    pub fn full(m: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(m);
        bits.insert_range(..);
        ItemSet { bits }
    }

    /// Panics if an item is outside the universe.
    pub fn from_items<I: IntoIterator<Item = Item>>(m: usize, items: I) -> Self {
        let mut set = ItemSet::empty(m);
        for g in items {
            set.insert(g);
        }
        set
    }

    /// Size of the universe this set lives in.
    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn contains(&self, g: Item) -> bool {
        self.bits.contains(g)
    }

    pub fn insert(&mut self, g: Item) -> bool {
        assert!(g < self.universe(), "item {g} outside universe of size {}", self.universe());
        !self.bits.put(g)
    }

    pub fn remove(&mut self, g: Item) -> bool {
        let had = self.contains(g);
        if had {
            self.bits.set(g, false);
        }
        had
    }

    pub fn iter(&self) -> impl Iterator<Item = Item> + '_ {
        self.bits.ones()
    }

    pub fn to_vec(&self) -> Vec<Item> {
        self.iter().collect()
    }

    pub fn with(&self, g: Item) -> Self {
        let mut s = self.clone();
        s.insert(g);
        s
    }

    pub fn without(&self, g: Item) -> Self {
        let mut s = self.clone();
        s.remove(g);
        s
    }

    pub fn union(&self, other: &ItemSet) -> Self {
        let mut s = self.clone();
        s.bits.union_with(&other.bits);
        s
    }

    pub fn intersection(&self, other: &ItemSet) -> Self {
        let mut s = self.clone();
        s.bits.intersect_with(&other.bits);
        s
    }

    pub fn difference(&self, other: &ItemSet) -> Self {
        let mut s = self.clone();
        s.bits.difference_with(&other.bits);
        s
    }

    pub fn union_with(&mut self, other: &ItemSet) {
        self.bits.union_with(&other.bits);
    }

    pub fn intersection_len(&self, other: &ItemSet) -> usize {
        self.bits.intersection_count(&other.bits)
    }

    pub fn is_subset(&self, other: &ItemSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn is_disjoint(&self, other: &ItemSet) -> bool {
        self.bits.is_disjoint(&other.bits)
    }
}

impl fmt::Debug for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Positive rational entitlement of a node.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Weight(Ratio<u64>);

impl Weight {
    pub const ONE: Weight = Weight(Ratio::new_raw(1, 1));

    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 || numer == 0 {
            return Err(Error::InvalidTree(format!("weight {numer}/{denom} is not positive")));
        }
        Ok(Weight(Ratio::new(numer, denom)))
    }

    pub fn integer(w: u64) -> Result<Self> {
        Weight::new(w, 1)
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl FromStr for Weight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidTree(format!("cannot parse weight {s:?}"));
        let r = parse_ratio(s).ok_or_else(bad)?;
        if r <= Ratio::zero() {
            return Err(bad());
        }
        let numer = u64::try_from(*r.numer()).map_err(|_| bad())?;
        let denom = u64::try_from(*r.denom()).map_err(|_| bad())?;
        Weight::new(numer, denom)
    }
}

/// Parses `"3"`, `"-1/2"` or a finite decimal such as `"0.25"` exactly.
pub(crate) fn parse_ratio(s: &str) -> Option<Ratio<i64>> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Ratio::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 12 {
            return None;
        }
        let negative = int.starts_with('-');
        let int_abs: i64 = int.trim_start_matches(['-', '+']).parse().unwrap_or(0);
        let scale = 10i64.pow(frac.len() as u32);
        let frac_val: i64 = frac.parse().ok()?;
        let magnitude = int_abs.checked_mul(scale)?.checked_add(frac_val)?;
        let numer = if negative { -magnitude } else { magnitude };
        return Some(Ratio::new(numer, scale));
    }
    s.parse::<i64>().ok().map(Ratio::from_integer)
}

/// Description of one node used to build a [`Tree`].
#[derive(Clone, Debug)]
pub struct NodeSpec {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub weight: Weight,
    pub criterion: Option<FairnessCriterion>,
}

/// A rooted arborescence with per-node weights and per-internal-node
/// fairness criteria.
#[derive(Clone, Debug)]
pub struct Tree {
    parent: Vec<Option<NodeId>>,
    weight: Vec<Weight>,
    criterion: Vec<Option<FairnessCriterion>>,
    children: Vec<Vec<NodeId>>,
    leaves_under: Vec<Vec<NodeId>>,
    ancestors: Vec<Vec<NodeId>>,
    height: Vec<usize>,
}

impl Tree {
    /// Builds a tree from node specs, in any order.
    ///
    /// Rejects missing or duplicate ids, parents that do not precede their
    /// children, extra roots, non-positive weights, internal nodes without a
    /// criterion and leaves with one.
    pub fn new(mut specs: Vec<NodeSpec>) -> Result<Tree> {
        specs.sort_by_key(|s| s.id);
        let n = specs.len();
        if n < 2 {
            return Err(Error::InvalidTree("the root needs at least one child".into()));
        }
        for (k, spec) in specs.iter().enumerate() {
            if spec.id != k + 1 {
                return Err(Error::InvalidTree(format!(
                    "node ids must be exactly 1..={n}; found {} at position {}",
                    spec.id,
                    k + 1
                )));
            }
            match (spec.id, spec.parent) {
                (ROOT, None) => {}
                (ROOT, Some(p)) => {
                    return Err(Error::InvalidTree(format!("root node 1 has parent {p}")));
                }
                (id, None) => {
                    return Err(Error::InvalidTree(format!("node {id} has no parent (second root)")));
                }
                (id, Some(p)) if p == POOL || p >= id => {
                    return Err(Error::InvalidTree(format!(
                        "node {id} has parent {p}; parents must precede children"
                    )));
                }
                _ => {}
            }
        }

        let mut parent = vec![None; n + 1];
        let mut weight = vec![Weight::ONE; n + 1];
        let mut criterion = vec![None; n + 1];
        let mut children = vec![Vec::new(); n + 1];
        for spec in &specs {
            parent[spec.id] = spec.parent;
            weight[spec.id] = spec.weight;
            criterion[spec.id] = spec.criterion;
            if let Some(p) = spec.parent {
                children[p].push(spec.id);
            }
        }
        for id in 1..=n {
            match (children[id].is_empty(), criterion[id].is_some()) {
                (false, false) => {
                    return Err(Error::InvalidTree(format!("internal node {id} has no criterion")));
                }
                (true, true) => {
                    return Err(Error::InvalidTree(format!("leaf {id} carries a criterion")));
                }
                _ => {}
            }
        }

        let mut ancestors = vec![Vec::new(); n + 1];
        for id in 2..=n {
            let p = parent[id].expect("checked above");
            let mut anc = ancestors[p].clone();
            anc.push(p);
            ancestors[id] = anc;
        }
        let mut leaves_under = vec![Vec::new(); n + 1];
        let mut height = vec![0; n + 1];
        for id in (1..=n).rev() {
            if children[id].is_empty() {
                leaves_under[id].push(id);
            } else {
                let mut leaves: Vec<NodeId> =
                    children[id].iter().flat_map(|&c| leaves_under[c].iter().copied()).collect();
                leaves.sort_unstable();
                leaves_under[id] = leaves;
                height[id] = 1 + children[id].iter().map(|&c| height[c]).max().unwrap_or(0);
            }
        }

        Ok(Tree { parent, weight, criterion, children, leaves_under, ancestors, height })
    }

    /// Unit weights, one criterion for every internal node. `parents[k]` is
    /// the parent of node `k + 1`.
    pub fn uniform(parents: &[Option<NodeId>], criterion: FairnessCriterion) -> Result<Tree> {
        let has_child: Vec<bool> = (1..=parents.len())
            .map(|id| parents.contains(&Some(id)))
            .collect();
        let specs = parents
            .iter()
            .enumerate()
            .map(|(k, &parent)| NodeSpec {
                id: k + 1,
                parent,
                weight: Weight::ONE,
                criterion: has_child[k].then_some(criterion),
            })
            .collect();
        Tree::new(specs)
    }

    /// Root with `k` leaf children, numbered `2..=k+1`.
    pub fn star(weights: &[Weight], criterion: FairnessCriterion) -> Result<Tree> {
        let mut specs = vec![NodeSpec { id: ROOT, parent: None, weight: Weight::ONE, criterion: Some(criterion) }];
        specs.extend(weights.iter().enumerate().map(|(k, &weight)| NodeSpec {
            id: k + 2,
            parent: Some(ROOT),
            weight,
            criterion: None,
        }));
        Tree::new(specs)
    }

    pub fn node_count(&self) -> usize {
        self.parent.len() - 1
    }

    pub fn root(&self) -> NodeId {
        ROOT
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        1..=self.node_count()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        (1..=self.node_count()).contains(&id)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent[id]
    }

    /// Children in increasing id order.
    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id]
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.children[id].is_empty()
    }

    pub fn weight(&self, id: NodeId) -> Weight {
        self.weight[id]
    }

    pub fn criterion(&self, id: NodeId) -> Option<FairnessCriterion> {
        self.criterion[id]
    }

    /// Leaves of the subtree rooted at `id`, increasing.
    pub fn leaves_under(&self, id: NodeId) -> &[NodeId] {
        &self.leaves_under[id]
    }

    pub fn leaves(&self) -> &[NodeId] {
        self.leaves_under(ROOT)
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(|&i| !self.is_leaf(i))
    }

    /// Internal nodes of the subtree rooted at `id`.
    pub fn internal_under(&self, id: NodeId) -> Vec<NodeId> {
        self.nodes().filter(|&j| !self.is_leaf(j) && (j == id || self.is_ancestor(id, j))).collect()
    }

    /// Path from the root down to the parent of `id`.
    pub fn ancestors(&self, id: NodeId) -> &[NodeId] {
        &self.ancestors[id]
    }

    pub fn is_ancestor(&self, anc: NodeId, id: NodeId) -> bool {
        self.ancestors[id].contains(&anc)
    }

    /// Number of arrows on a longest downward path from `id`.
    pub fn height(&self, id: NodeId) -> usize {
        self.height[id]
    }
}

/// A bundle per node. Slot 0 is the pool and stays empty outside a Yankee
/// Swap run.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MultilevelAllocation {
    m: usize,
    bundles: Vec<ItemSet>,
}

impl MultilevelAllocation {
    /// Every bundle empty.
    pub fn empty(n: usize, m: usize) -> Self {
        MultilevelAllocation { m, bundles: vec![ItemSet::empty(m); n + 1] }
    }

    /// The root owns all items, everyone else nothing.
    pub fn root_only(tree: &Tree, m: usize) -> Self {
        let mut alloc = Self::empty(tree.node_count(), m);
        alloc.bundles[ROOT] = ItemSet::full(m);
        alloc
    }

    /// Internal bundles become unions of their leaves; the root gets all items.
    pub fn from_leaf_bundles(tree: &Tree, m: usize, leaf_bundles: &[(NodeId, ItemSet)]) -> Self {
        let mut alloc = Self::empty(tree.node_count(), m);
        for (leaf, bundle) in leaf_bundles {
            alloc.bundles[*leaf] = bundle.clone();
            for &a in tree.ancestors(*leaf) {
                alloc.bundles[a].union_with(bundle);
            }
        }
        alloc.bundles[ROOT] = ItemSet::full(m);
        alloc
    }

    pub fn item_count(&self) -> usize {
        self.m
    }

    pub fn node_count(&self) -> usize {
        self.bundles.len() - 1
    }

    pub fn bundle(&self, id: NodeId) -> &ItemSet {
        &self.bundles[id]
    }

    pub fn set_bundle(&mut self, id: NodeId, bundle: ItemSet) {
        assert_eq!(bundle.universe(), self.m);
        self.bundles[id] = bundle;
    }

    pub(crate) fn bundle_mut(&mut self, id: NodeId) -> &mut ItemSet {
        &mut self.bundles[id]
    }

    /// All bundles indexed by node id, pool first.
    pub fn bundles(&self) -> &[ItemSet] {
        &self.bundles
    }

    pub(crate) fn bundles_mut(&mut self) -> &mut [ItemSet] {
        &mut self.bundles
    }

    pub fn pool(&self) -> &ItemSet {
        &self.bundles[POOL]
    }

    /// Items that no leaf holds.
    pub fn discarded(&self, tree: &Tree) -> ItemSet {
        let mut held = ItemSet::empty(self.m);
        for &x in tree.leaves() {
            held.union_with(&self.bundles[x]);
        }
        ItemSet::full(self.m).difference(&held)
    }

    /// π₋g: the same allocation with `g` removed everywhere.
    pub fn without_item(&self, g: Item) -> Self {
        let mut alloc = self.clone();
        for b in &mut alloc.bundles {
            b.remove(g);
        }
        alloc
    }
}

/// Shares of a source bundle handed to a list of nodes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LocalAllocation {
    pub nodes: Vec<NodeId>,
    pub shares: Vec<ItemSet>,
    pub source: ItemSet,
}

impl LocalAllocation {
    pub fn share(&self, node: NodeId) -> Option<&ItemSet> {
        self.nodes.iter().position(|&n| n == node).map(|k| &self.shares[k])
    }

    /// Pairwise disjoint shares inside the source bundle.
    pub fn is_valid(&self) -> bool {
        self.shares.iter().all(|s| s.is_subset(&self.source))
            && self
                .shares
                .iter()
                .enumerate()
                .all(|(k, a)| self.shares[k + 1..].iter().all(|b| a.is_disjoint(b)))
    }

    pub fn unallocated(&self) -> ItemSet {
        let mut rest = self.source.clone();
        for s in &self.shares {
            rest = rest.difference(s);
        }
        rest
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    RootOwnsAll,
    ChildrenWithinParent,
    SiblingDisjointness,
    ShapeMismatch,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::RootOwnsAll => "root-owns-all",
            Condition::ChildrenWithinParent => "children-within-parent",
            Condition::SiblingDisjointness => "sibling-disjointness",
            Condition::ShapeMismatch => "shape-mismatch",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub condition: Condition,
    pub nodes: Vec<NodeId>,
    pub items: Vec<Item>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at nodes {:?} (items {:?})", self.condition, self.nodes, self.items)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, condition: Condition) -> bool {
        self.violations.iter().any(|v| v.condition == condition)
    }
}

/// Checks the three structural conditions of a multilevel allocation. The
/// pool slot is ignored.
pub fn validate_allocation(tree: &Tree, alloc: &MultilevelAllocation) -> ValidityReport {
    validate_impl(tree, alloc, false)
}

/// Same as [`validate_allocation`] with the pool treated as an extra child
/// of the root, as it is during a Yankee Swap run.
pub fn validate_with_pool(tree: &Tree, alloc: &MultilevelAllocation) -> ValidityReport {
    validate_impl(tree, alloc, true)
}

fn validate_impl(tree: &Tree, alloc: &MultilevelAllocation, with_pool: bool) -> ValidityReport {
    let mut report = ValidityReport::default();
    if alloc.node_count() != tree.node_count() {
        report.violations.push(Violation {
            condition: Condition::ShapeMismatch,
            nodes: vec![],
            items: vec![],
        });
        return report;
    }
    let m = alloc.item_count();
    let all = ItemSet::full(m);
    let root_missing = all.difference(alloc.bundle(ROOT));
    if !root_missing.is_empty() {
        report.violations.push(Violation {
            condition: Condition::RootOwnsAll,
            nodes: vec![ROOT],
            items: root_missing.to_vec(),
        });
    }
    for i in tree.internal_nodes() {
        let mut kids: Vec<NodeId> = tree.children(i).to_vec();
        if with_pool && i == ROOT {
            kids.insert(0, POOL);
        }
        for &j in &kids {
            let outside = alloc.bundle(j).difference(alloc.bundle(i));
            if !outside.is_empty() {
                report.violations.push(Violation {
                    condition: Condition::ChildrenWithinParent,
                    nodes: vec![i, j],
                    items: outside.to_vec(),
                });
            }
        }
        for (k, &a) in kids.iter().enumerate() {
            for &b in &kids[k + 1..] {
                let shared = alloc.bundle(a).intersection(alloc.bundle(b));
                if !shared.is_empty() {
                    report.violations.push(Violation {
                        condition: Condition::SiblingDisjointness,
                        nodes: vec![a, b],
                        items: shared.to_vec(),
                    });
                }
            }
        }
    }
    report
}

/// The restriction π|_N as a local allocation. The source bundle is the
/// common parent's bundle when `nodes` is exactly a sibling set, otherwise
/// the union of the listed bundles.
pub fn restrict(tree: &Tree, alloc: &MultilevelAllocation, nodes: &[NodeId]) -> Result<LocalAllocation> {
    if let Some(&bad) = nodes.iter().find(|&&id| !tree.contains(id)) {
        return Err(Error::UnknownNode(bad));
    }
    let shares: Vec<ItemSet> = nodes.iter().map(|&id| alloc.bundle(id).clone()).collect();
    let parent = nodes.first().and_then(|&id| tree.parent(id));
    let is_sibling_set = parent.is_some_and(|p| {
        let mut sorted = nodes.to_vec();
        sorted.sort_unstable();
        sorted == tree.children(p)
    });
    let source = match parent {
        Some(p) if is_sibling_set => alloc.bundle(p).clone(),
        _ => shares.iter().fold(ItemSet::empty(alloc.item_count()), |acc, s| acc.union(s)),
    };
    Ok(LocalAllocation { nodes: nodes.to_vec(), shares, source })
}

/// v_i(π): a leaf's valuation of its bundle, or the sum over children.
pub fn node_utility(tree: &Tree, profile: &LeafProfile<'_>, alloc: &MultilevelAllocation, i: NodeId) -> usize {
    if tree.is_leaf(i) {
        profile.get(i).value(alloc.bundle(i))
    } else {
        tree.children(i).iter().map(|&j| node_utility(tree, profile, alloc, j)).sum()
    }
}

/// v_i(π) for every node, indexed by id (slot 0 holds the pool size).
pub fn utilities(tree: &Tree, profile: &LeafProfile<'_>, alloc: &MultilevelAllocation) -> Vec<usize> {
    let n = tree.node_count();
    let mut v = vec![0; n + 1];
    v[POOL] = alloc.pool().len();
    for i in (1..=n).rev() {
        v[i] = if tree.is_leaf(i) {
            profile.get(i).value(alloc.bundle(i))
        } else {
            tree.children(i).iter().map(|&j| v[j]).sum()
        };
    }
    v
}
