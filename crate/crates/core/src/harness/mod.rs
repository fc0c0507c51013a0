//! Instances, generators, baselines, audits and benchmarks.

pub mod audit;
pub mod bench;
pub mod generate;
pub mod io;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::mgys::{self, RunOptions};
use crate::model::{ItemSet, MultilevelAllocation, Tree, ROOT};
use crate::valuations::{LeafProfile, Valuation};

pub use audit::{audit, AuditReport, NodeAudit};
pub use bench::{run_bench, BenchConfig, BenchRow, SummaryRow};
pub use generate::{generate, CriteriaMode, Family, GeneratorConfig, PrefMode, TreeShape};

/// A tree, an item count, and a valuation for every leaf.
#[derive(Clone, Debug)]
pub struct Instance {
    pub tree: Tree,
    pub m: usize,
    pub item_names: Option<Vec<String>>,
    /// Indexed by node id; `Some` exactly on leaves.
    pub valuations: Vec<Option<Valuation>>,
    pub meta: serde_json::Value,
}

impl Instance {
    pub fn new(tree: Tree, m: usize, valuations: Vec<Option<Valuation>>) -> Result<Instance> {
        let n = tree.node_count();
        if valuations.len() != n + 1 {
            return Err(Error::InvalidInstance(format!(
                "expected valuations for node ids 0..={n}, got {} slots",
                valuations.len()
            )));
        }
        for id in 0..=n {
            let leaf = id != 0 && tree.is_leaf(id);
            match (&valuations[id], leaf) {
                (None, true) => return Err(Error::InvalidInstance(format!("leaf {id} has no valuation"))),
                (Some(_), false) => {
                    return Err(Error::InvalidInstance(format!("internal node {id} has a valuation")))
                }
                (Some(v), true) => v.check_universe(m)?,
                (None, false) => {}
            }
        }
        Ok(Instance { tree, m, item_names: None, valuations, meta: serde_json::Value::Null })
    }

    pub fn profile(&self) -> LeafProfile<'_> {
        LeafProfile::from_valuations(&self.valuations)
    }

    pub fn all_items(&self) -> ItemSet {
        ItemSet::full(self.m)
    }
}

/// Baseline: one General Yankee Swap over all leaves under the root's
/// criterion, with internal bundles rebuilt as unions.
pub fn gys_on_leaves(instance: &Instance) -> Result<MultilevelAllocation> {
    gys_on_leaves_until(instance, None)
}

pub fn gys_on_leaves_until(instance: &Instance, deadline: Option<Instant>) -> Result<MultilevelAllocation> {
    let tree = &instance.tree;
    let leaves = tree.leaves();
    let crit = tree.criterion(ROOT).expect("root is internal");
    let weights: Vec<_> = leaves.iter().map(|&x| tree.weight(x)).collect();
    let star = Tree::star(&weights, crit)?;
    let mut profile = LeafProfile::new();
    for (k, &x) in leaves.iter().enumerate() {
        profile.set(k + 2, instance.valuations[x].as_ref().expect("leaves have valuations"));
    }
    let opts = RunOptions { deadline, ..RunOptions::default() };
    let out = mgys::run_on(&star, &profile, &instance.all_items(), &opts)?;
    let bundles: Vec<_> =
        leaves.iter().enumerate().map(|(k, &x)| (x, out.allocation.bundle(k + 2).clone())).collect();
    Ok(MultilevelAllocation::from_leaf_bundles(tree, instance.m, &bundles))
}
