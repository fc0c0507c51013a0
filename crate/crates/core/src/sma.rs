//! Sequential Multilevel Algorithm: a top-down pass solving one local
//! allocation problem per internal node.
//!
//! Each internal node splits its bundle among its children with the
//! General Yankee Swap, treating internal children as agents whose
//! valuation is v̂, the best their subtree could do with a bundle.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::harness::Instance;
use crate::model::{ItemSet, MultilevelAllocation, NodeId, Tree, ROOT};
use crate::valuations::{SetFunction, Valuation};
use crate::welfare::{monolevel_gys, HatV, HatVProxy};

/// Runs SMA with an optional cooperative deadline, checked between nodes.
pub fn run_sma_until(instance: &Instance, deadline: Option<Instant>) -> Result<MultilevelAllocation> {
    sma_on(&instance.tree, &instance.valuations, instance.m, deadline)
}

pub fn run_sma(instance: &Instance) -> Result<MultilevelAllocation> {
    run_sma_until(instance, None)
}

/// SMA on a bare tree and per-node valuations (indexed by node id).
pub fn sma_on(
    tree: &Tree,
    vals: &[Option<Valuation>],
    m: usize,
    deadline: Option<Instant>,
) -> Result<MultilevelAllocation> {
    for &x in tree.leaves() {
        if vals.get(x).and_then(Option::as_ref).is_none() {
            return Err(Error::InvalidInstance(format!("leaf {x} has no valuation")));
        }
    }
    let hat = HatV::new(tree, vals);
    let mut alloc = MultilevelAllocation::root_only(tree, m);
    for i in tree.internal_nodes() {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Error::Timeout);
        }
        let children = tree.children(i);
        let proxies: Vec<HatVProxy<'_, '_>> = children.iter().map(|&j| hat.proxy(j)).collect();
        let fns: Vec<&dyn SetFunction> = children
            .iter()
            .zip(&proxies)
            .map(|(&j, proxy)| -> &dyn SetFunction {
                if tree.is_leaf(j) {
                    vals[j].as_ref().expect("checked above")
                } else {
                    proxy
                }
            })
            .collect();
        let weights: Vec<_> = children.iter().map(|&j| tree.weight(j)).collect();
        let crit = tree.criterion(i).expect("internal nodes carry a criterion");
        let source: ItemSet = alloc.bundle(i).clone();
        let local = monolevel_gys(children, &weights, &fns, &source, crit)?;
        for (&j, share) in children.iter().zip(local.shares) {
            alloc.set_bundle(j, share);
        }
    }
    debug_assert_eq!(alloc.bundle(ROOT), &ItemSet::full(m));
    Ok(alloc)
}

/// v̂ of every node at its own bundle, indexed by node id.
pub fn estimated_utilities(tree: &Tree, vals: &[Option<Valuation>], alloc: &MultilevelAllocation) -> Vec<usize> {
    let hat = HatV::new(tree, vals);
    let mut out = vec![0; tree.node_count() + 1];
    for i in tree.nodes() {
        out[i] = hat.value(i, alloc.bundle(i));
    }
    out
}

/// Internal nodes other than the root that leave part of their bundle to
/// nobody.
pub fn leaky_nodes(tree: &Tree, alloc: &MultilevelAllocation) -> Vec<NodeId> {
    tree.internal_nodes()
        .filter(|&i| i != ROOT)
        .filter(|&i| {
            let covered = tree
                .children(i)
                .iter()
                .fold(ItemSet::empty(alloc.item_count()), |acc, &j| acc.union(alloc.bundle(j)));
            &covered != alloc.bundle(i)
        })
        .collect()
}
