//! JSON files for instances and allocations.
//!
//! Items may be referenced by id or, when the instance lists item names, by
//! name. Names map to ids in file order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::FairnessCriterion;
use crate::harness::Instance;
use crate::model::{Item, ItemSet, MultilevelAllocation, NodeId, NodeSpec, Tree, Weight};
use crate::valuations::{LeafProfile, Valuation};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ItemRef {
    Id(usize),
    Name(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawWeight {
    Int(u64),
    Text(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawNode {
    id: NodeId,
    parent: Option<NodeId>,
    #[serde(default = "unit_weight")]
    weight: RawWeight,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    criterion: Option<String>,
}

fn unit_weight() -> RawWeight {
    RawWeight::Int(1)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum RawValuation {
    BinaryAdditive { approved: Vec<ItemRef> },
    CappedBinaryAdditive { approved: Vec<ItemRef>, cap: usize },
    UniformCap { cap: usize },
    BinaryAssignment { subagents: Vec<Vec<ItemRef>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawInstance {
    m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    items: Option<Vec<String>>,
    nodes: Vec<RawNode>,
    leaf_valuations: BTreeMap<NodeId, RawValuation>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    meta: serde_json::Value,
}

struct Items<'a> {
    m: usize,
    names: Option<&'a [String]>,
}

impl Items<'_> {
    fn resolve(&self, r: &ItemRef) -> Result<Item> {
        match r {
            ItemRef::Id(g) if *g < self.m => Ok(*g),
            ItemRef::Id(g) => Err(Error::InvalidInstance(format!("item {g} outside 0..{}", self.m))),
            ItemRef::Name(name) => self
                .names
                .and_then(|ns| ns.iter().position(|n| n == name))
                .ok_or_else(|| Error::InvalidInstance(format!("unknown item {name:?}"))),
        }
    }

    fn set(&self, refs: &[ItemRef]) -> Result<ItemSet> {
        let mut s = ItemSet::empty(self.m);
        for r in refs {
            s.insert(self.resolve(r)?);
        }
        Ok(s)
    }

    fn refs(&self, s: &ItemSet) -> Vec<ItemRef> {
        s.iter()
            .map(|g| match self.names {
                Some(ns) => ItemRef::Name(ns[g].clone()),
                None => ItemRef::Id(g),
            })
            .collect()
    }
}

pub fn instance_from_json(text: &str) -> Result<Instance> {
    let raw: RawInstance = serde_json::from_str(text)?;
    if let Some(names) = &raw.items {
        if names.len() != raw.m {
            return Err(Error::InvalidInstance(format!("{} item names for m = {}", names.len(), raw.m)));
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(Error::InvalidInstance("duplicate item names".into()));
        }
    }
    let specs = raw
        .nodes
        .iter()
        .map(|n| {
            let weight = match &n.weight {
                RawWeight::Int(w) => Weight::integer(*w)?,
                RawWeight::Text(t) => t.parse()?,
            };
            let criterion = n.criterion.as_deref().map(str::parse::<FairnessCriterion>).transpose()?;
            Ok(NodeSpec { id: n.id, parent: n.parent, weight, criterion })
        })
        .collect::<Result<Vec<_>>>()?;
    let tree = Tree::new(specs)?;
    let items = Items { m: raw.m, names: raw.items.as_deref() };
    let mut valuations = vec![None; tree.node_count() + 1];
    for (&id, v) in &raw.leaf_valuations {
        if !tree.contains(id) {
            return Err(Error::InvalidInstance(format!("valuation for unknown node {id}")));
        }
        valuations[id] = Some(match v {
            RawValuation::BinaryAdditive { approved } => Valuation::BinaryAdditive { approved: items.set(approved)? },
            RawValuation::CappedBinaryAdditive { approved, cap } => {
                Valuation::CappedBinaryAdditive { approved: items.set(approved)?, cap: *cap }
            }
            RawValuation::UniformCap { cap } => Valuation::UniformCap { cap: *cap },
            RawValuation::BinaryAssignment { subagents } => Valuation::BinaryAssignment {
                subagents: subagents.iter().map(|s| items.set(s)).collect::<Result<_>>()?,
            },
        });
    }
    let mut instance = Instance::new(tree, raw.m, valuations)?;
    instance.item_names = raw.items;
    instance.meta = raw.meta;
    Ok(instance)
}

pub fn instance_to_json(instance: &Instance) -> Result<String> {
    let tree = &instance.tree;
    let items = Items { m: instance.m, names: instance.item_names.as_deref() };
    let nodes = tree
        .nodes()
        .map(|id| {
            let w = tree.weight(id);
            RawNode {
                id,
                parent: tree.parent(id),
                weight: if w.denom() == 1 { RawWeight::Int(w.numer()) } else { RawWeight::Text(w.to_string()) },
                criterion: tree.criterion(id).map(|c| c.to_string()),
            }
        })
        .collect();
    let leaf_valuations = tree
        .leaves()
        .iter()
        .map(|&x| {
            let raw = match instance.valuations[x].as_ref().expect("leaves have valuations") {
                Valuation::BinaryAdditive { approved } => RawValuation::BinaryAdditive { approved: items.refs(approved) },
                Valuation::CappedBinaryAdditive { approved, cap } => {
                    RawValuation::CappedBinaryAdditive { approved: items.refs(approved), cap: *cap }
                }
                Valuation::UniformCap { cap } => RawValuation::UniformCap { cap: *cap },
                Valuation::BinaryAssignment { subagents } => {
                    RawValuation::BinaryAssignment { subagents: subagents.iter().map(|s| items.refs(s)).collect() }
                }
            };
            (x, raw)
        })
        .collect();
    let raw = RawInstance {
        m: instance.m,
        items: instance.item_names.clone(),
        nodes,
        leaf_valuations,
        meta: instance.meta.clone(),
    };
    Ok(serde_json::to_string_pretty(&raw)?)
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    instance_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_instance(path: &Path, instance: &Instance) -> Result<()> {
    std::fs::write(path, instance_to_json(instance)? + "\n")?;
    Ok(())
}

/// On-disk allocation: bundles per node plus derived fields for readers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AllocationFile {
    pub bundles: BTreeMap<NodeId, Vec<ItemRef>>,
    #[serde(default)]
    pub utilities: BTreeMap<NodeId, usize>,
    #[serde(default)]
    pub discarded: Vec<ItemRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

pub fn allocation_to_file(
    instance: &Instance,
    alloc: &MultilevelAllocation,
    algorithm: Option<&str>,
    iterations: Option<usize>,
) -> AllocationFile {
    let items = Items { m: instance.m, names: instance.item_names.as_deref() };
    let profile: LeafProfile<'_> = instance.profile();
    let v = crate::model::utilities(&instance.tree, &profile, alloc);
    AllocationFile {
        bundles: instance.tree.nodes().map(|i| (i, items.refs(alloc.bundle(i)))).collect(),
        utilities: instance.tree.nodes().map(|i| (i, v[i])).collect(),
        discarded: items.refs(&alloc.discarded(&instance.tree)),
        algorithm: algorithm.map(str::to_string),
        seed: instance.meta.get("seed").and_then(serde_json::Value::as_u64),
        iterations,
    }
}

/// Rebuilds the allocation; nodes missing from the file get empty bundles.
pub fn allocation_from_file(instance: &Instance, file: &AllocationFile) -> Result<MultilevelAllocation> {
    let items = Items { m: instance.m, names: instance.item_names.as_deref() };
    let mut alloc = MultilevelAllocation::empty(instance.tree.node_count(), instance.m);
    for (&id, refs) in &file.bundles {
        if !instance.tree.contains(id) {
            return Err(Error::InvalidAllocation(format!("bundle for unknown node {id}")));
        }
        let bundle = items.set(refs).map_err(|e| Error::InvalidAllocation(e.to_string()))?;
        alloc.set_bundle(id, bundle);
    }
    Ok(alloc)
}

pub fn allocation_to_json(
    instance: &Instance,
    alloc: &MultilevelAllocation,
    algorithm: Option<&str>,
    iterations: Option<usize>,
) -> Result<String> {
    Ok(serde_json::to_string_pretty(&allocation_to_file(instance, alloc, algorithm, iterations))?)
}

pub fn allocation_from_json(instance: &Instance, text: &str) -> Result<MultilevelAllocation> {
    let file: AllocationFile = serde_json::from_str(text)?;
    allocation_from_file(instance, &file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ROOT;

    const SAMPLE: &str = r#"{
        "m": 3,
        "items": ["a", "b", "c"],
        "nodes": [
            {"id": 1, "parent": null, "criterion": "wnash"},
            {"id": 2, "parent": 1, "weight": "3/2", "criterion": "lorenz"},
            {"id": 3, "parent": 1, "weight": 2},
            {"id": 4, "parent": 2},
            {"id": 5, "parent": 2}
        ],
        "leaf_valuations": {
            "3": {"type": "uniform_cap", "cap": 1},
            "4": {"type": "binary_additive", "approved": ["a", 2]},
            "5": {"type": "binary_assignment", "subagents": [["b"], ["b", "c"]]}
        },
        "meta": {"seed": 9}
    }"#;

    #[test]
    fn parses_names_ids_and_weights() {
        let inst = instance_from_json(SAMPLE).unwrap();
        assert_eq!(inst.tree.weight(2), Weight::new(3, 2).unwrap());
        assert_eq!(inst.tree.weight(1), Weight::ONE);
        assert_eq!(
            inst.valuations[4],
            Some(Valuation::BinaryAdditive { approved: ItemSet::from_items(3, [0, 2]) })
        );
        assert_eq!(inst.tree.criterion(1), Some(FairnessCriterion::WeightedNash));
    }

    #[test]
    fn instance_round_trip() {
        let inst = instance_from_json(SAMPLE).unwrap();
        let again = instance_from_json(&instance_to_json(&inst).unwrap()).unwrap();
        assert_eq!(again.valuations, inst.valuations);
        assert_eq!(again.item_names, inst.item_names);
        assert_eq!(again.meta, inst.meta);
        for id in inst.tree.nodes() {
            assert_eq!(again.tree.parent(id), inst.tree.parent(id));
            assert_eq!(again.tree.weight(id), inst.tree.weight(id));
            assert_eq!(again.tree.criterion(id), inst.tree.criterion(id));
        }
    }

    #[test]
    fn rejects_bad_instances() {
        let bad = |from: &str, to: &str| instance_from_json(&SAMPLE.replace(from, to)).is_err();
        assert!(bad(r#""approved": ["a", 2]"#, r#""approved": ["zz"]"#));
        assert!(bad(r#""approved": ["a", 2]"#, r#""approved": [7]"#));
        assert!(bad(r#""criterion": "wnash""#, r#""criterion": "envy""#));
        assert!(bad(r#""weight": 2"#, r#""weight": 0"#));
        assert!(bad(r#""id": 5, "parent": 2"#, r#""id": 5, "parent": 7"#));
        assert!(bad(r#""type": "uniform_cap""#, r#""type": "submodular""#));
        assert!(bad(r#""3": {"#, r#""9": {"#));
        assert!(instance_from_json("{").is_err());
    }

    #[test]
    fn allocation_round_trip() {
        let inst = instance_from_json(SAMPLE).unwrap();
        let alloc = MultilevelAllocation::from_leaf_bundles(
            &inst.tree,
            3,
            &[(3, ItemSet::from_items(3, [1])), (4, ItemSet::from_items(3, [0]))],
        );
        let text = allocation_to_json(&inst, &alloc, Some("sma"), None).unwrap();
        assert!(text.contains(r#""a""#));
        let back = allocation_from_json(&inst, &text).unwrap();
        assert_eq!(back, alloc);
        let file: AllocationFile = serde_json::from_str(&text).unwrap();
        assert_eq!(file.utilities[&ROOT], 2);
        assert_eq!(file.discarded, vec![ItemRef::Name("c".into())]);
        assert_eq!(file.seed, Some(9));
    }
}
