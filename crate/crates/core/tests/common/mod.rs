#![allow(dead_code)]

use hierfair::fairness::FairnessCriterion::{Lorenz, WeightedNash};
use hierfair::harness::{generate, CriteriaMode, Family, GeneratorConfig, Instance, PrefMode, TreeShape};
use hierfair::model::NodeSpec;
use hierfair::{FairnessCriterion, ItemSet, MultilevelAllocation, Tree, Valuation, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn set(m: usize, items: &[usize]) -> ItemSet {
    ItemSet::from_items(m, items.iter().copied())
}

fn additive(m: usize, items: &[usize]) -> Option<Valuation> {
    Some(Valuation::BinaryAdditive { approved: set(m, items) })
}

/// Items g1..g5 are 0..4. Root under weighted Nash, nodes 2 and 3 (weights
/// 5 and 2) under Lorenz; leaves 4, 5, 6 approve {g1, g2, g3}, leaf 7
/// approves {g3, g4, g5}.
pub fn nash_lab(root: FairnessCriterion) -> Instance {
    let w = |k| Weight::integer(k).unwrap();
    let spec = |id, parent, weight, criterion| NodeSpec { id, parent, weight, criterion };
    let tree = Tree::new(vec![
        spec(1, None, w(1), Some(root)),
        spec(2, Some(1), w(5), Some(Lorenz)),
        spec(3, Some(1), w(2), Some(Lorenz)),
        spec(4, Some(2), w(1), None),
        spec(5, Some(2), w(1), None),
        spec(6, Some(3), w(1), None),
        spec(7, Some(3), w(1), None),
    ])
    .unwrap();
    let abc = additive(5, &[0, 1, 2]);
    let vals = vec![None, None, None, None, abc.clone(), abc.clone(), abc, additive(5, &[2, 3, 4])];
    Instance::new(tree, 5, vals).unwrap()
}

pub fn nash_lab_default() -> Instance {
    nash_lab(WeightedNash)
}

/// Items a..f are 0..5. Two departments of two labs each; lab 5 does not
/// want item a.
pub fn university() -> Instance {
    let tree = Tree::uniform(&[None, Some(1), Some(1), Some(2), Some(2), Some(3), Some(3)], Lorenz).unwrap();
    let all = additive(6, &[0, 1, 2, 3, 4, 5]);
    let vals = vec![None, None, None, None, all.clone(), additive(6, &[1, 2, 3, 4, 5]), all.clone(), all];
    Instance::new(tree, 6, vals).unwrap()
}

/// A small instance with n ≤ `max_nodes`, m ≤ `max_items`, every family
/// and criterion in play.
pub fn small_random(seed: u64, max_nodes: usize, max_items: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comb = rng.random_bool(0.5);
    let (shape, lo) = if comb { (TreeShape::Comb, 3) } else { (TreeShape::Balanced, 2) };
    let nodes = rng.random_range(lo..=max_nodes);
    let items = rng.random_range(1..=max_items);
    let p = [0.3, 0.5, 0.8][rng.random_range(0..3)];
    let mut config = GeneratorConfig::new(shape, nodes, items, p);
    config.pref = if rng.random_bool(0.5) { PrefMode::Corr } else { PrefMode::Indep };
    config.families = Family::ALL.to_vec();
    config.criteria = CriteriaMode::Random;
    config.seed = seed;
    generate(&config).unwrap()
}

/// A random valid allocation: each item goes to a random leaf or is left
/// at the root.
pub fn random_allocation(instance: &Instance, seed: u64) -> MultilevelAllocation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves = instance.tree.leaves();
    let mut bundles: Vec<(usize, ItemSet)> = leaves.iter().map(|&x| (x, ItemSet::empty(instance.m))).collect();
    for g in 0..instance.m {
        let k = rng.random_range(0..=leaves.len());
        if k < leaves.len() {
            bundles[k].1.insert(g);
        }
    }
    MultilevelAllocation::from_leaf_bundles(&instance.tree, instance.m, &bundles)
}
