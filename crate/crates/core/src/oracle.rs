//! Exhaustive ground truth for small instances.
//!
//! Nothing here shares code with the augmenting-path machinery: welfare is
//! maximized by plain enumeration of local allocations, recursively down
//! the tree.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fairness::{compare, UtilityVector};
use crate::harness::Instance;
use crate::model::{utilities, validate_allocation, Item, ItemSet, LocalAllocation, MultilevelAllocation, NodeId, Tree};
use crate::valuations::LeafProfile;

pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Every way to hand each item of `s` to one of `nodes` or to nobody.
pub struct LocalEnumerator {
    items: Vec<Item>,
    nodes: Vec<NodeId>,
    source: ItemSet,
    /// `digits[k]` is the holder of `items[k]`: a node index, or
    /// `nodes.len()` for unallocated.
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for LocalEnumerator {
    type Item = LocalAllocation;

    fn next(&mut self) -> Option<LocalAllocation> {
        if self.done {
            return None;
        }
        let m = self.source.universe();
        let mut shares = vec![ItemSet::empty(m); self.nodes.len()];
        for (&g, &d) in self.items.iter().zip(&self.digits) {
            if d < self.nodes.len() {
                shares[d].insert(g);
            }
        }
        let base = self.nodes.len() + 1;
        let mut k = 0;
        loop {
            if k == self.digits.len() {
                self.done = true;
                break;
            }
            self.digits[k] += 1;
            if self.digits[k] < base {
                break;
            }
            self.digits[k] = 0;
            k += 1;
        }
        Some(LocalAllocation { nodes: self.nodes.clone(), shares, source: self.source.clone() })
    }
}

/// Number of local allocations of `s` to `c` nodes.
pub fn local_count(s: &ItemSet, c: usize) -> u128 {
    (c as u128 + 1).checked_pow(s.len() as u32).unwrap_or(u128::MAX)
}

pub fn enumerate_local(s: &ItemSet, nodes: &[NodeId], budget: u64) -> Result<LocalEnumerator> {
    let needed = local_count(s, nodes.len());
    if needed > budget as u128 {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(LocalEnumerator {
        items: s.to_vec(),
        nodes: nodes.to_vec(),
        source: s.clone(),
        digits: vec![0; s.len()],
        done: false,
    })
}

/// Recursive brute-force welfare with memoization per `(node, bundle)`.
pub struct Oracle<'a> {
    tree: &'a Tree,
    profile: &'a LeafProfile<'a>,
    budget: u64,
    memo: RefCell<HashMap<(NodeId, ItemSet), usize>>,
}

impl<'a> Oracle<'a> {
    pub fn new(tree: &'a Tree, profile: &'a LeafProfile<'a>, budget: u64) -> Self {
        Oracle { tree, profile, budget, memo: RefCell::new(HashMap::new()) }
    }

    /// The best total leaf utility the subtree of `i` can get from `s`:
    /// a leaf's own valuation, or the best split among the children.
    pub fn welfare(&self, i: NodeId, s: &ItemSet) -> Result<usize> {
        if self.tree.is_leaf(i) {
            return Ok(self.profile.get(i).value(s));
        }
        if let Some(&v) = self.memo.borrow().get(&(i, s.clone())) {
            return Ok(v);
        }
        let mut best = 0;
        for local in enumerate_local(s, self.tree.children(i), self.budget)? {
            let mut total = 0;
            for (&j, share) in local.nodes.iter().zip(&local.shares) {
                total += self.welfare(j, share)?;
            }
            best = best.max(total);
        }
        self.memo.borrow_mut().insert((i, s.clone()), best);
        Ok(best)
    }

    /// Best children's vector under `i`'s criterion over all splits of `s`,
    /// each child valued at its best achievable welfare. The first split
    /// found wins ties.
    pub fn best_split(&self, i: NodeId, s: &ItemSet) -> Result<(UtilityVector, Vec<ItemSet>)> {
        let crit = self.tree.criterion(i).ok_or(Error::InvalidTree(format!("{i} is a leaf")))?;
        let children = self.tree.children(i);
        let weights: Vec<_> = children.iter().map(|&j| self.tree.weight(j)).collect();
        let mut best: Option<(UtilityVector, Vec<ItemSet>)> = None;
        for local in enumerate_local(s, children, self.budget)? {
            let values = children
                .iter()
                .zip(&local.shares)
                .map(|(&j, share)| self.welfare(j, share))
                .collect::<Result<Vec<_>>>()?;
            let vector = UtilityVector::new(values, weights.clone())?;
            let better = match &best {
                None => true,
                Some((b, _)) => compare(crit, &vector, b)? == Ordering::Greater,
            };
            if better {
                best = Some((vector, local.shares));
            }
        }
        Ok(best.expect("at least the empty split exists"))
    }

    /// Gives `s` to `i` and splits it downward so that `i` reaches
    /// [`Oracle::welfare`].
    fn realize(&self, alloc: &mut MultilevelAllocation, i: NodeId, s: &ItemSet) -> Result<()> {
        alloc.set_bundle(i, s.clone());
        if self.tree.is_leaf(i) {
            return Ok(());
        }
        let target = self.welfare(i, s)?;
        for local in enumerate_local(s, self.tree.children(i), self.budget)? {
            let mut total = 0;
            for (&j, share) in local.nodes.iter().zip(&local.shares) {
                total += self.welfare(j, share)?;
            }
            if total == target {
                for (&j, share) in local.nodes.iter().zip(&local.shares) {
                    self.realize(alloc, j, share)?;
                }
                return Ok(());
            }
        }
        unreachable!("the maximum is attained by some split")
    }
}

/// Best total leaf utility from `s` over every assignment of its items to
/// the leaves under `i` directly, without going through the children.
pub fn max_leaf_welfare(tree: &Tree, profile: &LeafProfile<'_>, i: NodeId, s: &ItemSet, budget: u64) -> Result<usize> {
    let leaves = tree.leaves_under(i);
    let mut best = 0;
    for local in enumerate_local(s, leaves, budget)? {
        let total: usize = leaves.iter().zip(&local.shares).map(|(&x, share)| profile.get(x).value(share)).sum();
        best = best.max(total);
    }
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct NodeVerdict {
    pub node: NodeId,
    /// Children's utilities under the checked allocation.
    pub actual: UtilityVector,
    /// The criterion's best children's vector over all splits of the
    /// node's bundle.
    pub best: UtilityVector,
    pub best_split: Vec<ItemSet>,
    pub max_welfare: usize,
    pub utilitarian_ok: bool,
    pub psi_ok: bool,
}

#[derive(Clone, Debug)]
pub struct OracleVerdict {
    pub utilitarian_optimal: bool,
    pub psi_maximizing: bool,
    pub nodes: Vec<NodeVerdict>,
    /// An allocation beating the checked one at the first failing node.
    pub witness: Option<MultilevelAllocation>,
}

impl OracleVerdict {
    pub fn node(&self, i: NodeId) -> Option<&NodeVerdict> {
        self.nodes.iter().find(|v| v.node == i)
    }
}

/// Exhaustive multilevel utilitarian and fairness verdicts for `alloc`.
pub fn check_allocation(instance: &Instance, alloc: &MultilevelAllocation, budget: u64) -> Result<OracleVerdict> {
    let profile = instance.profile();
    check_with(&instance.tree, &profile, alloc, budget)
}

pub fn check_with(
    tree: &Tree,
    profile: &LeafProfile<'_>,
    alloc: &MultilevelAllocation,
    budget: u64,
) -> Result<OracleVerdict> {
    let report = validate_allocation(tree, alloc);
    if let Some(v) = report.violations.first() {
        return Err(Error::InvalidAllocation(v.to_string()));
    }
    let oracle = Oracle::new(tree, profile, budget);
    let v = utilities(tree, profile, alloc);
    let mut nodes = Vec::new();
    let mut witness = None;
    for i in tree.internal_nodes() {
        let children = tree.children(i);
        let actual = UtilityVector::new(
            children.iter().map(|&j| v[j]).collect(),
            children.iter().map(|&j| tree.weight(j)).collect(),
        )?;
        let max_welfare = oracle.welfare(i, alloc.bundle(i))?;
        let (best, best_split) = oracle.best_split(i, alloc.bundle(i))?;
        let crit = tree.criterion(i).expect("internal");
        let utilitarian_ok = actual.sum() == max_welfare;
        let psi_ok = compare(crit, &actual, &best)? != Ordering::Less;
        if witness.is_none() && !(utilitarian_ok && psi_ok) {
            let mut w = alloc.clone();
            let split: Vec<ItemSet> = if psi_ok {
                // utilitarian failure only: any welfare-maximizing split
                let mut tmp = alloc.clone();
                oracle.realize(&mut tmp, i, alloc.bundle(i))?;
                children.iter().map(|&j| tmp.bundle(j).clone()).collect()
            } else {
                best_split.clone()
            };
            for (&j, share) in children.iter().zip(&split) {
                clear_subtree(tree, &mut w, j);
                oracle.realize(&mut w, j, share)?;
            }
            witness = Some(w);
        }
        nodes.push(NodeVerdict { node: i, actual, best, best_split, max_welfare, utilitarian_ok, psi_ok });
    }
    Ok(OracleVerdict {
        utilitarian_optimal: nodes.iter().all(|n| n.utilitarian_ok),
        psi_maximizing: nodes.iter().all(|n| n.psi_ok),
        nodes,
        witness,
    })
}

fn clear_subtree(tree: &Tree, alloc: &mut MultilevelAllocation, j: NodeId) {
    let m = alloc.item_count();
    alloc.set_bundle(j, ItemSet::empty(m));
    for &c in tree.children(j) {
        clear_subtree(tree, alloc, c);
    }
}
