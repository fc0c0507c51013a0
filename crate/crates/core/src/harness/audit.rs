//! Fairness error metrics of an allocation.

use std::cmp::Ordering;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::fairness::{compare, weighted_nash_product, FairnessCriterion, UtilityVector};
use crate::harness::Instance;
use crate::model::{utilities, validate_allocation, NodeId};
use crate::oracle::{Oracle, DEFAULT_BUDGET};
use crate::valuations::SetFunction;
use crate::welfare::{monolevel_gys, HatV};

#[derive(Clone, Debug)]
pub struct NodeAudit {
    pub node: NodeId,
    pub criterion: FairnessCriterion,
    /// Children's utilities under the audited allocation.
    pub actual: UtilityVector,
    /// Children's utilities under the reference fair split of the node's
    /// bundle.
    pub reference: UtilityVector,
    pub fair: bool,
    /// Σ over children of the gap to the reference.
    pub deviation: usize,
}

impl NodeAudit {
    /// Weighted Nash products of the actual and reference vectors, when
    /// weights are integers.
    pub fn nash_products(&self) -> Option<(BigUint, BigUint)> {
        Some((weighted_nash_product(&self.actual)?, weighted_nash_product(&self.reference)?))
    }
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    /// Some internal node is not fair to its children.
    pub err1: bool,
    /// Total gap to the reference, summed over unfair nodes only.
    pub err2: usize,
    /// Items no leaf holds.
    pub discarded: usize,
    pub nodes: Vec<NodeAudit>,
}

impl AuditReport {
    pub fn failing(&self) -> impl Iterator<Item = &NodeAudit> {
        self.nodes.iter().filter(|n| !n.fair)
    }

    pub fn node(&self, i: NodeId) -> Option<&NodeAudit> {
        self.nodes.iter().find(|n| n.node == i)
    }
}

/// Re-solves every internal node's local problem on its own bundle and
/// compares.
///
/// The reference is the General Yankee Swap over the children's estimated
/// utilities, or with `use_oracle`, exhaustive enumeration. GYS references
/// are compared by bundle size, oracle references by utility.
pub fn audit(
    instance: &Instance,
    alloc: &crate::model::MultilevelAllocation,
    use_oracle: bool,
) -> Result<AuditReport> {
    let tree = &instance.tree;
    if let Some(v) = validate_allocation(tree, alloc).violations.first() {
        return Err(Error::InvalidAllocation(v.to_string()));
    }
    let profile = instance.profile();
    let v = utilities(tree, &profile, alloc);
    let hat = HatV::new(tree, &instance.valuations);
    let oracle = Oracle::new(tree, &profile, DEFAULT_BUDGET);
    let mut nodes = Vec::new();
    for i in tree.internal_nodes() {
        let crit = tree.criterion(i).expect("internal");
        let children = tree.children(i);
        let weights: Vec<_> = children.iter().map(|&j| tree.weight(j)).collect();
        let actual = UtilityVector::new(children.iter().map(|&j| v[j]).collect(), weights.clone())?;
        let (reference, deviation) = if use_oracle {
            let (best, _) = oracle.best_split(i, alloc.bundle(i))?;
            let dev = actual.values.iter().zip(&best.values).map(|(a, b)| a.abs_diff(*b)).sum();
            (best, dev)
        } else {
            let proxies: Vec<_> = children.iter().map(|&j| hat.proxy(j)).collect();
            let fns: Vec<&dyn SetFunction> = proxies.iter().map(|p| p as &dyn SetFunction).collect();
            let local = monolevel_gys(children, &weights, &fns, alloc.bundle(i), crit)?;
            let values = local.shares.iter().zip(&fns).map(|(s, f)| f.value(s)).collect();
            let dev = children
                .iter()
                .zip(&local.shares)
                .map(|(&j, share)| alloc.bundle(j).len().abs_diff(share.len()))
                .sum();
            (UtilityVector::new(values, weights)?, dev)
        };
        let fair = compare(crit, &actual, &reference)? == Ordering::Equal;
        nodes.push(NodeAudit { node: i, criterion: crit, actual, reference, fair, deviation });
    }
    let err1 = nodes.iter().any(|n| !n.fair);
    let err2 = nodes.iter().filter(|n| !n.fair).map(|n| n.deviation).sum();
    Ok(AuditReport { err1, err2, discarded: alloc.discarded(tree).len(), nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::FairnessCriterion::Lorenz;
    use crate::model::{ItemSet, MultilevelAllocation, Tree, Weight};
    use crate::valuations::Valuation;

    #[test]
    fn discarded_items_are_counted() {
        let tree = Tree::star(&[Weight::ONE, Weight::ONE], Lorenz).unwrap();
        let v = Some(Valuation::BinaryAdditive { approved: ItemSet::from_items(4, [0, 1]) });
        let inst = Instance::new(tree.clone(), 4, vec![None, None, v.clone(), v]).unwrap();
        let alloc = MultilevelAllocation::from_leaf_bundles(
            &tree,
            4,
            &[(2, ItemSet::from_items(4, [0])), (3, ItemSet::from_items(4, [1]))],
        );
        let report = audit(&inst, &alloc, false).unwrap();
        assert_eq!(report.discarded, 2);
        assert!(!report.err1);
        assert_eq!(report.err2, 0);
        let oracle = audit(&inst, &alloc, true).unwrap();
        assert!(!oracle.err1);
    }

    #[test]
    fn lopsided_split_is_flagged() {
        let tree = Tree::star(&[Weight::ONE, Weight::ONE], Lorenz).unwrap();
        let v = Some(Valuation::UniformCap { cap: 4 });
        let inst = Instance::new(tree.clone(), 4, vec![None, None, v.clone(), v]).unwrap();
        let alloc = MultilevelAllocation::from_leaf_bundles(&tree, 4, &[(2, ItemSet::full(4))]);
        let report = audit(&inst, &alloc, false).unwrap();
        assert!(report.err1);
        assert_eq!(report.err2, 4);
        let oracle = audit(&inst, &alloc, true).unwrap();
        assert!(oracle.err1);
        assert_eq!(oracle.err2, 4);
    }

    #[test]
    fn invalid_allocations_are_rejected() {
        let tree = Tree::star(&[Weight::ONE], Lorenz).unwrap();
        let inst = Instance::new(tree.clone(), 2, vec![None, None, Some(Valuation::UniformCap { cap: 1 })]).unwrap();
        let alloc = MultilevelAllocation::empty(2, 2);
        assert!(matches!(audit(&inst, &alloc, false), Err(Error::InvalidAllocation(_))));
    }
}
