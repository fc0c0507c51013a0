//! Random instance generation.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::FairnessCriterion;
use crate::harness::Instance;
use crate::model::{ItemSet, NodeId, NodeSpec, Tree, Weight};
use crate::valuations::Valuation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeShape {
    /// Branching factor 3, levels filled left to right.
    Balanced,
    /// A spine of internal nodes, each with one leaf child.
    Comb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrefMode {
    Indep,
    Corr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BinaryAdditive,
    CappedBinaryAdditive,
    UniformCap,
    BinaryAssignment,
}

impl Family {
    pub const ALL: [Family; 4] =
        [Family::BinaryAdditive, Family::CappedBinaryAdditive, Family::UniformCap, Family::BinaryAssignment];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::BinaryAdditive => "binary_additive",
            Family::CappedBinaryAdditive => "capped_binary_additive",
            Family::UniformCap => "uniform_cap",
            Family::BinaryAssignment => "binary_assignment",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.to_string() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown valuation family {s:?}")))
    }
}

/// How internal nodes get their criterion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriteriaMode {
    /// The same tag everywhere, e.g. `"lorenz"`.
    Fixed(String),
    /// Uniform over the four criteria; p-means draws p from a small set.
    Random,
}

impl Default for CriteriaMode {
    fn default() -> Self {
        CriteriaMode::Fixed("lorenz".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub tree: TreeShape,
    /// Total node count, root included.
    pub nodes: usize,
    pub items: usize,
    pub p: f64,
    #[serde(default = "default_pref")]
    pub pref: PrefMode,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_weights")]
    pub weight_range: (u64, u64),
    #[serde(default = "default_families")]
    pub families: Vec<Family>,
    #[serde(default)]
    pub criteria: CriteriaMode,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_pref() -> PrefMode {
    PrefMode::Indep
}
fn default_rho() -> f64 {
    0.8
}
fn default_weights() -> (u64, u64) {
    (1, 5)
}
fn default_families() -> Vec<Family> {
    Family::ALL.to_vec()
}
fn default_seed() -> u64 {
    1
}

impl GeneratorConfig {
    pub fn new(tree: TreeShape, nodes: usize, items: usize, p: f64) -> Self {
        GeneratorConfig {
            tree,
            nodes,
            items,
            p,
            pref: default_pref(),
            rho: default_rho(),
            weight_range: default_weights(),
            families: default_families(),
            criteria: CriteriaMode::default(),
            seed: default_seed(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.p > 0.0 && self.p <= 1.0) {
            return bad(format!("p = {} must lie in (0, 1]", self.p));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho = {} must lie in [0, 1]", self.rho));
        }
        let (lo, hi) = self.weight_range;
        if lo == 0 || lo > hi {
            return bad(format!("weight range [{lo}, {hi}] must be positive and ordered"));
        }
        if self.families.is_empty() {
            return bad("no valuation family enabled".into());
        }
        match self.tree {
            TreeShape::Balanced if self.nodes < 2 => bad(format!("balanced tree needs n >= 2, got {}", self.nodes)),
            TreeShape::Comb if self.nodes < 3 => bad(format!("comb tree needs n >= 3, got {}", self.nodes)),
            _ => Ok(()),
        }?;
        if let CriteriaMode::Fixed(tag) = &self.criteria {
            tag.parse::<FairnessCriterion>().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }
}

/// `parents[k]` is the parent of node `k + 1`.
pub fn tree_parents(shape: TreeShape, n: usize) -> Vec<Option<NodeId>> {
    let mut parents = vec![None; n];
    match shape {
        TreeShape::Balanced => {
            for k in 2..=n {
                parents[k - 1] = Some((k - 2) / 3 + 1);
            }
        }
        TreeShape::Comb => {
            // Spine nodes 1, 3, 5, … each get a leaf and the next spine node;
            // the last spine node takes the remaining two or three leaves.
            let spine_len = (n - 1) / 2;
            let last = 2 * spine_len - 1;
            for s in 0..spine_len - 1 {
                let node = 2 * s + 1;
                parents[node] = Some(node);
                parents[node + 1] = Some(node);
            }
            for k in last + 1..=n {
                parents[k - 1] = Some(last);
            }
        }
    }
    parents
}

const RANDOM_P: [(i64, i64); 4] = [(-2, 1), (-1, 1), (-1, 2), (1, 2)];

fn draw_criterion(rng: &mut ChaCha8Rng) -> FairnessCriterion {
    match rng.random_range(0..4) {
        0 => FairnessCriterion::Lorenz,
        1 => FairnessCriterion::WeightedLeximin,
        2 => FairnessCriterion::WeightedNash,
        _ => {
            let (a, b) = RANDOM_P[rng.random_range(0..RANDOM_P.len())];
            FairnessCriterion::WeightedPMeans(Ratio::new(a, b))
        }
    }
}

fn bernoulli_set(rng: &mut ChaCha8Rng, m: usize, p: f64) -> ItemSet {
    ItemSet::from_items(m, (0..m).filter(|_| rng.random_bool(p)))
}

/// Copies each membership of `base` with probability `rho`, redraws it
/// otherwise.
fn correlated_set(rng: &mut ChaCha8Rng, base: &ItemSet, p: f64, rho: f64) -> ItemSet {
    let m = base.universe();
    ItemSet::from_items(
        m,
        (0..m).filter(|&g| if rng.random_bool(rho) { base.contains(g) } else { rng.random_bool(p) }),
    )
}

/// A random instance, a pure function of the config.
pub fn generate(config: &GeneratorConfig) -> Result<Instance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.nodes;
    let m = config.items;
    let parents = tree_parents(config.tree, n);
    let has_child: Vec<bool> = (1..=n).map(|id| parents.contains(&Some(id))).collect();
    let fixed = match &config.criteria {
        CriteriaMode::Fixed(tag) => Some(tag.parse::<FairnessCriterion>()?),
        CriteriaMode::Random => None,
    };
    let (lo, hi) = config.weight_range;
    let mut specs = Vec::with_capacity(n);
    for id in 1..=n {
        let weight = Weight::integer(rng.random_range(lo..=hi))?;
        let criterion = if has_child[id - 1] { Some(fixed.unwrap_or_else(|| draw_criterion(&mut rng))) } else { None };
        specs.push(NodeSpec { id, parent: parents[id - 1], weight, criterion });
    }
    let tree = Tree::new(specs)?;

    let mut valuations = vec![None; n + 1];
    let mut reference: Option<ItemSet> = None;
    for &x in tree.leaves() {
        let approved = match (config.pref, &reference) {
            (PrefMode::Corr, Some(base)) => correlated_set(&mut rng, base, config.p, config.rho),
            _ => bernoulli_set(&mut rng, m, config.p),
        };
        if reference.is_none() {
            reference = Some(approved.clone());
        }
        let family = *config.families.choose(&mut rng).expect("validated non-empty");
        valuations[x] = Some(match family {
            Family::BinaryAdditive => Valuation::BinaryAdditive { approved },
            Family::CappedBinaryAdditive => {
                let cap = rng.random_range(1..=approved.len().max(1));
                Valuation::CappedBinaryAdditive { approved, cap }
            }
            Family::UniformCap => {
                let cap = rng.random_range(1..=((config.p * m as f64).round() as usize).max(1));
                Valuation::UniformCap { cap }
            }
            Family::BinaryAssignment => {
                let k = rng.random_range(2..=25);
                let subagents = (0..k)
                    .map(|_| match config.pref {
                        PrefMode::Indep => bernoulli_set(&mut rng, m, config.p),
                        PrefMode::Corr => correlated_set(&mut rng, &approved, config.p, config.rho),
                    })
                    .collect();
                Valuation::BinaryAssignment { subagents }
            }
        });
    }
    let mut instance = Instance::new(tree, m, valuations)?;
    instance.meta = serde_json::json!({ "generator": config, "seed": config.seed });
    Ok(instance)
}
