mod common;

use common::{random_allocation, small_random};
use hierfair::fairness::FairnessCriterion;
use hierfair::harness::io::instance_to_json;
use hierfair::harness::{audit, generate, gys_on_leaves, CriteriaMode, Family, GeneratorConfig, TreeShape};
use hierfair::mgys::{run_mgys, RunOptions};
use hierfair::model::{node_utility, utilities, validate_allocation, Condition, ROOT};
use hierfair::oracle::{max_leaf_welfare, DEFAULT_BUDGET};
use hierfair::sma::{leaky_nodes, run_sma};
use hierfair::welfare::HatV;
use hierfair::ItemSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_subset(rng: &mut ChaCha8Rng, m: usize) -> ItemSet {
    ItemSet::from_items(m, (0..m).filter(|_| rng.random_bool(0.6)))
}

#[test]
fn hat_v_matches_flat_enumeration() {
    for seed in 0..60 {
        let inst = small_random(seed, 7, 6);
        let profile = inst.profile();
        let hat = HatV::new(&inst.tree, &inst.valuations);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in inst.tree.nodes() {
            for _ in 0..4 {
                let s = random_subset(&mut rng, inst.m);
                let expected = max_leaf_welfare(&inst.tree, &profile, i, &s, DEFAULT_BUDGET).unwrap();
                assert_eq!(hat.value(i, &s), expected, "seed {seed}, node {i}, S = {s:?}");
            }
        }
    }
}

#[test]
fn optimal_split_realizes_hat_v() {
    for seed in 0..40 {
        let inst = small_random(seed, 7, 6);
        let profile = inst.profile();
        let hat = HatV::new(&inst.tree, &inst.valuations);
        let s = inst.all_items();
        for i in inst.tree.internal_nodes() {
            let split = hat.optimal_split(i, &s);
            let mut seen = ItemSet::empty(inst.m);
            let mut total = 0;
            for (x, bundle) in &split {
                assert!(bundle.is_disjoint(&seen) && bundle.is_subset(&s));
                seen.union_with(bundle);
                total += profile.get(*x).value(bundle);
            }
            assert_eq!(total, hat.value(i, &s), "seed {seed}, node {i}");
        }
    }
}

#[test]
fn sma_utilities_equal_estimates() {
    for seed in 0..60 {
        let inst = small_random(seed, 7, 6);
        let alloc = run_sma(&inst).unwrap();
        let v = utilities(&inst.tree, &inst.profile(), &alloc);
        let hat = HatV::new(&inst.tree, &inst.valuations);
        for i in inst.tree.nodes() {
            assert_eq!(hat.value(i, alloc.bundle(i)), v[i], "seed {seed}, node {i}");
        }
        assert!(leaky_nodes(&inst.tree, &alloc).is_empty());
    }
}

#[test]
fn estimates_bound_any_allocation() {
    for seed in 0..60 {
        let inst = small_random(seed, 7, 6);
        let hat = HatV::new(&inst.tree, &inst.valuations);
        let profile = inst.profile();
        for k in 0..5 {
            let alloc = random_allocation(&inst, seed * 10 + k);
            assert!(validate_allocation(&inst.tree, &alloc).is_ok());
            let v = utilities(&inst.tree, &profile, &alloc);
            for i in inst.tree.nodes() {
                assert!(hat.value(i, alloc.bundle(i)) >= v[i]);
            }
        }
    }
}

#[test]
fn node_utility_is_leaf_sum() {
    for seed in 0..30 {
        let inst = small_random(seed, 7, 6);
        let profile = inst.profile();
        let alloc = random_allocation(&inst, seed);
        for i in inst.tree.nodes() {
            let leaves: usize =
                inst.tree.leaves_under(i).iter().map(|&x| profile.get(x).value(alloc.bundle(x))).sum();
            assert_eq!(node_utility(&inst.tree, &profile, &alloc, i), leaves);
            if !inst.tree.is_leaf(i) {
                let children: usize =
                    inst.tree.children(i).iter().map(|&j| node_utility(&inst.tree, &profile, &alloc, j)).sum();
                assert_eq!(children, leaves);
            }
        }
    }
}

#[test]
fn mutated_allocations_fail_validation() {
    for seed in 0..30 {
        let inst = small_random(seed, 7, 6);
        if inst.m == 0 {
            continue;
        }
        let alloc = run_sma(&inst).unwrap();
        let tree = &inst.tree;

        let mut missing = alloc.clone();
        missing.set_bundle(ROOT, ItemSet::full(inst.m).without(0));
        assert!(validate_allocation(tree, &missing).has(Condition::RootOwnsAll));

        let leaf = tree.leaves()[0];
        let parent = tree.parent(leaf).unwrap();
        if let Some(g) = (0..inst.m).find(|&g| !alloc.bundle(parent).contains(g)) {
            let mut escaped = alloc.clone();
            escaped.set_bundle(leaf, alloc.bundle(leaf).with(g));
            assert!(validate_allocation(tree, &escaped).has(Condition::ChildrenWithinParent));
        }

        let siblings = tree.children(parent);
        if siblings.len() >= 2 {
            if let Some(g) = alloc.bundle(siblings[0]).iter().next() {
                let mut shared = alloc.clone();
                shared.set_bundle(siblings[1], alloc.bundle(siblings[1]).with(g));
                assert!(validate_allocation(tree, &shared).has(Condition::SiblingDisjointness));
            }
        }
    }
}

#[test]
fn err2_is_even_and_tracks_err1_under_lorenz() {
    let mut failures = 0;
    for seed in 0..40 {
        let mut config = GeneratorConfig::new(TreeShape::Balanced, 10, 9, 0.5);
        config.seed = seed;
        config.families = Family::ALL.to_vec();
        let inst = generate(&config).unwrap();
        for alloc in [gys_on_leaves(&inst).unwrap(), run_mgys(&inst, &RunOptions::default()).unwrap().allocation] {
            let report = audit(&inst, &alloc, false).unwrap();
            assert_eq!(report.err2 % 2, 0, "seed {seed}");
            assert_eq!(report.err2 == 0, !report.err1, "seed {seed}");
            failures += usize::from(report.err1);
        }
    }
    assert!(failures > 0);
}

#[test]
fn generator_matches_golden_file() {
    let mut config = GeneratorConfig::new(TreeShape::Comb, 7, 6, 0.5);
    config.families = Family::ALL.to_vec();
    config.criteria = CriteriaMode::Random;
    config.seed = 1;
    let text = instance_to_json(&generate(&config).unwrap()).unwrap();
    let golden = include_str!("data/golden_instance.json");
    assert_eq!(text.trim_end(), golden.trim_end());
}

#[test]
fn random_criteria_cover_all_tags() {
    let mut tags = std::collections::BTreeSet::new();
    for seed in 0..50 {
        let inst = small_random(seed, 7, 6);
        for i in inst.tree.internal_nodes() {
            tags.insert(match inst.tree.criterion(i).unwrap() {
                FairnessCriterion::Lorenz => "lorenz",
                FairnessCriterion::WeightedLeximin => "wleximin",
                FairnessCriterion::WeightedNash => "wnash",
                FairnessCriterion::WeightedPMeans(_) => "wpmeans",
            });
        }
    }
    assert_eq!(tags.len(), 4);
}

#[test]
fn gys_and_oracle_audits_agree() {
    let mut failing = 0;
    for seed in 0..150 {
        let inst = small_random(seed, 7, 6);
        for alloc in [gys_on_leaves(&inst).unwrap(), run_mgys(&inst, &RunOptions::default()).unwrap().allocation] {
            let by_gys = audit(&inst, &alloc, false).unwrap();
            let by_oracle = audit(&inst, &alloc, true).unwrap();
            assert_eq!(by_gys.err1, by_oracle.err1, "seed {seed}");
            for (a, b) in by_gys.nodes.iter().zip(&by_oracle.nodes) {
                assert_eq!(a.fair, b.fair, "seed {seed}, node {}", a.node);
            }
            failing += usize::from(by_gys.err1);
        }
    }
    assert!(failing > 0);
}
