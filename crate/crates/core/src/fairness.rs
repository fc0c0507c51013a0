//! Fairness criteria as total comparators on children's utility vectors,
//! and the gain functions that drive Yankee Swap selection.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::model::{parse_ratio, NodeId, Weight};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FairnessCriterion {
    Lorenz,
    WeightedLeximin,
    WeightedNash,
    /// Weighted p-means welfare with `p <= 1`, `p != 0`.
    WeightedPMeans(Ratio<i64>),
}

impl FairnessCriterion {
    pub fn p_means(p: Ratio<i64>) -> Result<Self> {
        if p.is_zero() || p > Ratio::one() {
            return Err(Error::InvalidCriterion(format!("wpmeans:{p} (need p <= 1 and p != 0)")));
        }
        Ok(FairnessCriterion::WeightedPMeans(p))
    }
}

impl fmt::Display for FairnessCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FairnessCriterion::Lorenz => f.write_str("lorenz"),
            FairnessCriterion::WeightedLeximin => f.write_str("wleximin"),
            FairnessCriterion::WeightedNash => f.write_str("wnash"),
            FairnessCriterion::WeightedPMeans(p) => write!(f, "wpmeans:{p}"),
        }
    }
}

impl FromStr for FairnessCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lorenz" => Ok(FairnessCriterion::Lorenz),
            "wleximin" => Ok(FairnessCriterion::WeightedLeximin),
            "wnash" => Ok(FairnessCriterion::WeightedNash),
            other => {
                let p = other
                    .strip_prefix("wpmeans:")
                    .and_then(parse_ratio)
                    .ok_or_else(|| Error::InvalidCriterion(other.to_string()))?;
                FairnessCriterion::p_means(p)
            }
        }
    }
}

/// Children's utilities in increasing id order, with their weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UtilityVector {
    pub values: Vec<usize>,
    pub weights: Vec<Weight>,
}

impl UtilityVector {
    pub fn new(values: Vec<usize>, weights: Vec<Weight>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::ArityMismatch { left: values.len(), right: weights.len() });
        }
        Ok(UtilityVector { values, weights })
    }

    pub fn unweighted(values: Vec<usize>) -> Self {
        let weights = vec![Weight::ONE; values.len()];
        UtilityVector { values, weights }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> usize {
        self.values.iter().sum()
    }

    fn zeros(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0).count()
    }
}

/// `Π v_k^{w_k}` over all entries, when every weight is an integer.
pub fn weighted_nash_product(u: &UtilityVector) -> Option<BigUint> {
    let mut prod = BigUint::one();
    for (&v, w) in u.values.iter().zip(&u.weights) {
        if w.denom() != 1 {
            return None;
        }
        prod *= BigUint::from(v).pow(u32::try_from(w.numer()).ok()?);
    }
    Some(prod)
}

/// Orders `a` against `b` under `crit`; `Greater` means `a` is fairer.
///
/// Lorenz dominance is completed to a total preorder by comparing the
/// utilitarian sum first and the increasingly sorted vectors second.
pub fn compare(crit: FairnessCriterion, a: &UtilityVector, b: &UtilityVector) -> Result<Ordering> {
    if a.len() != b.len() {
        return Err(Error::ArityMismatch { left: a.len(), right: b.len() });
    }
    if a.weights != b.weights {
        return Err(Error::InvalidAllocation("compared vectors carry different weights".into()));
    }
    Ok(match crit {
        FairnessCriterion::Lorenz => {
            let (mut sa, mut sb) = (a.values.clone(), b.values.clone());
            sa.sort_unstable();
            sb.sort_unstable();
            a.sum().cmp(&b.sum()).then_with(|| sa.cmp(&sb))
        }
        FairnessCriterion::WeightedLeximin => {
            let (ea, eb) = (envy_ratios(a), envy_ratios(b));
            ea.cmp(&eb)
        }
        FairnessCriterion::WeightedNash => b.zeros().cmp(&a.zeros()).then_with(|| compare_nash_products(a, b)),
        FairnessCriterion::WeightedPMeans(p) => compare_p_means(p, a, b),
    })
}

fn envy_ratios(u: &UtilityVector) -> Vec<Ratio<u64>> {
    let mut e: Vec<Ratio<u64>> =
        u.values.iter().zip(&u.weights).map(|(&v, w)| Ratio::from_integer(v as u64) / w.ratio()).collect();
    e.sort_unstable();
    e
}

/// Compares `Π v^w` over nonzero entries: by logarithms, with an exact
/// big-integer check when the logs are too close to call.
fn compare_nash_products(a: &UtilityVector, b: &UtilityVector) -> Ordering {
    let log = |u: &UtilityVector| -> f64 {
        u.values.iter().zip(&u.weights).filter(|(&v, _)| v > 0).map(|(&v, w)| w.to_f64() * (v as f64).ln()).sum()
    };
    let (la, lb) = (log(a), log(b));
    if (la - lb).abs() > 1e-9 {
        return la.partial_cmp(&lb).unwrap_or(Ordering::Equal);
    }
    let lcm = a.weights.iter().fold(1u64, |acc, w| acc.lcm(&w.denom()));
    let exact = |u: &UtilityVector| -> BigUint {
        u.values
            .iter()
            .zip(&u.weights)
            .filter(|(&v, _)| v > 0)
            .map(|(&v, w)| BigUint::from(v).pow((w.numer() * (lcm / w.denom())) as u32))
            .product()
    };
    exact(a).cmp(&exact(b))
}

fn compare_p_means(p: Ratio<i64>, a: &UtilityVector, b: &UtilityVector) -> Ordering {
    let pf = p.to_f64().unwrap_or(1.0);
    let score = |u: &UtilityVector| -> f64 {
        let mut terms: Vec<f64> = u
            .values
            .iter()
            .zip(&u.weights)
            .filter(|(&v, _)| v > 0)
            .map(|(&v, w)| w.to_f64() * (v as f64).powf(pf))
            .collect();
        // Sum in a canonical order so permuted vectors score identically.
        terms.sort_by(f64::total_cmp);
        terms.iter().sum()
    };
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
    let (sa, sb) = (score(a), score(b));
    if p.is_positive() {
        // v^p is finite at zero, so the sum itself already accounts for
        // children left empty.
        if close(sa, sb) {
            Ordering::Equal
        } else {
            sa.total_cmp(&sb)
        }
    } else {
        // Any zero sends the sum to infinity and the mean to 0, so vectors
        // with equally many zeros only differ when they have none.
        b.zeros().cmp(&a.zeros()).then_with(|| {
            if a.zeros() > 0 || close(sa, sb) {
                Ordering::Equal
            } else {
                sb.total_cmp(&sa)
            }
        })
    }
}

/// One coordinate of a gain vector.
#[derive(Clone, Debug, PartialEq)]
pub enum GainCoord {
    Exact(Ratio<i64>),
    /// `base^exp`, compared exactly.
    Power { base: Ratio<u64>, exp: Ratio<u64> },
    Float(f64),
    /// The "large K" of the gain tables, scaled by a weight. Above every
    /// finite coordinate.
    Sentinel(Ratio<u64>),
}

impl GainCoord {
    fn approx(&self) -> f64 {
        match self {
            GainCoord::Exact(r) => r.to_f64().unwrap_or(0.0),
            GainCoord::Power { base, exp } => base.to_f64().unwrap_or(1.0).powf(exp.to_f64().unwrap_or(1.0)),
            GainCoord::Float(x) => *x,
            GainCoord::Sentinel(_) => f64::INFINITY,
        }
    }

    pub fn cmp_coord(&self, other: &GainCoord) -> Ordering {
        use GainCoord::*;
        match (self, other) {
            (Sentinel(a), Sentinel(b)) => a.cmp(b),
            (Sentinel(_), _) => Ordering::Greater,
            (_, Sentinel(_)) => Ordering::Less,
            (Exact(a), Exact(b)) => a.cmp(b),
            (Power { base: a, exp: x }, Power { base: b, exp: y }) => compare_powers(*a, *x, *b, *y),
            _ => self.approx().total_cmp(&other.approx()),
        }
    }
}

/// Compares `a^x` with `b^y` for `a, b >= 1` and positive rational exponents.
fn compare_powers(a: Ratio<u64>, x: Ratio<u64>, b: Ratio<u64>, y: Ratio<u64>) -> Ordering {
    let la = x.to_f64().unwrap_or(0.0) * a.to_f64().unwrap_or(1.0).ln();
    let lb = y.to_f64().unwrap_or(0.0) * b.to_f64().unwrap_or(1.0).ln();
    if (la - lb).abs() > 1e-9 {
        return la.total_cmp(&lb);
    }
    // a^x vs b^y  <=>  a^(xD) vs b^(yD) with D the common denominator.
    let d = x.denom().lcm(y.denom());
    let ex = (*x.numer() * (d / x.denom())) as u32;
    let ey = (*y.numer() * (d / y.denom())) as u32;
    let lhs = BigUint::from(*a.numer()).pow(ex) * BigUint::from(*b.denom()).pow(ey);
    let rhs = BigUint::from(*b.numer()).pow(ey) * BigUint::from(*a.denom()).pow(ex);
    lhs.cmp(&rhs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GainVector {
    pub coords: Vec<GainCoord>,
    pub node: NodeId,
}

impl GainVector {
    /// Lexicographic order on coordinates; equal-length vectors only.
    pub fn cmp_lex(&self, other: &GainVector) -> Ordering {
        for (a, b) in self.coords.iter().zip(&other.coords) {
            match a.cmp_coord(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

/// True iff `a` strictly lexicographically dominates `b`.
pub fn lex_dominates(a: &GainVector, b: &GainVector) -> Result<bool> {
    if a.coords.len() != b.coords.len() {
        return Err(Error::ArityMismatch { left: a.coords.len(), right: b.coords.len() });
    }
    Ok(a.cmp_lex(b) == Ordering::Greater)
}

/// φ: the priority of a node holding utility `v` under its parent's
/// criterion. Non-increasing in `v`.
pub fn gain(crit: FairnessCriterion, v: usize, w: Weight, node: NodeId) -> GainVector {
    let coords = match crit {
        FairnessCriterion::Lorenz => vec![GainCoord::Exact(Ratio::from_integer(-(v as i64)))],
        FairnessCriterion::WeightedLeximin => {
            // Equal ratios go to the lighter node: its ratio rises more.
            let r = Ratio::new(-(v as i64) * w.denom() as i64, w.numer() as i64);
            let lighter = Ratio::new(-(w.numer() as i64), w.denom() as i64);
            vec![GainCoord::Exact(r), GainCoord::Exact(lighter), GainCoord::Exact(Ratio::from_integer(-(node as i64)))]
        }
        FairnessCriterion::WeightedNash => {
            if v == 0 {
                vec![GainCoord::Sentinel(Ratio::one())]
            } else {
                vec![GainCoord::Power { base: Ratio::new(v as u64 + 1, v as u64), exp: w.ratio() }]
            }
        }
        FairnessCriterion::WeightedPMeans(p) => {
            if v == 0 && p.is_negative() {
                vec![GainCoord::Sentinel(w.ratio())]
            } else {
                let pf = p.to_f64().unwrap_or(1.0);
                let diff = ((v + 1) as f64).powf(pf) - (v as f64).powf(pf);
                vec![GainCoord::Float(p.signum().to_f64().unwrap_or(1.0) * w.to_f64() * diff)]
            }
        }
    };
    GainVector { coords, node }
}

/// Index of the dominating gain vector, ties to the first (least index)
/// entry. `None` on an empty slice.
pub fn select_max(gains: &[GainVector]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, g) in gains.iter().enumerate() {
        match best {
            Some(b) if g.cmp_lex(&gains[b]) != Ordering::Greater => {}
            _ => best = Some(k),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(k: u64) -> Weight {
        Weight::integer(k).unwrap()
    }

    fn all_criteria() -> Vec<FairnessCriterion> {
        vec![
            FairnessCriterion::Lorenz,
            FairnessCriterion::WeightedLeximin,
            FairnessCriterion::WeightedNash,
            FairnessCriterion::WeightedPMeans(Ratio::new(1, 2)),
            FairnessCriterion::WeightedPMeans(Ratio::new(-1, 1)),
            FairnessCriterion::WeightedPMeans(Ratio::new(1, 1)),
        ]
    }

    #[test]
    fn parse_tags() {
        assert_eq!("lorenz".parse::<FairnessCriterion>().unwrap(), FairnessCriterion::Lorenz);
        assert_eq!("wnash".parse::<FairnessCriterion>().unwrap(), FairnessCriterion::WeightedNash);
        assert_eq!(
            "wpmeans:-1/2".parse::<FairnessCriterion>().unwrap(),
            FairnessCriterion::WeightedPMeans(Ratio::new(-1, 2))
        );
        assert_eq!(
            "wpmeans:0.5".parse::<FairnessCriterion>().unwrap(),
            FairnessCriterion::WeightedPMeans(Ratio::new(1, 2))
        );
        assert!("wpmeans:0".parse::<FairnessCriterion>().is_err());
        assert!("wpmeans:2".parse::<FairnessCriterion>().is_err());
        assert!("envy".parse::<FairnessCriterion>().is_err());
        for c in all_criteria() {
            assert_eq!(c.to_string().parse::<FairnessCriterion>().unwrap(), c);
        }
    }

    #[test]
    fn lorenz_example() {
        let a = UtilityVector::unweighted(vec![1, 1, 2, 2]);
        let b = UtilityVector::unweighted(vec![1, 1, 4, 0]);
        assert_eq!(compare(FairnessCriterion::Lorenz, &a, &b).unwrap(), Ordering::Greater);
    }

    #[test]
    fn nash_example() {
        let weights = vec![w(5), w(2)];
        let a = UtilityVector::new(vec![3, 2], weights.clone()).unwrap();
        let b = UtilityVector::new(vec![2, 3], weights).unwrap();
        assert_eq!(compare(FairnessCriterion::WeightedNash, &a, &b).unwrap(), Ordering::Greater);
        assert_eq!(weighted_nash_product(&a).unwrap(), BigUint::from(972u32));
        assert_eq!(weighted_nash_product(&b).unwrap(), BigUint::from(288u32));
    }

    #[test]
    fn leximin_gain_favours_lighter_node_on_ratio_ties() {
        let heavy = gain(FairnessCriterion::WeightedLeximin, 0, w(2), 2);
        let light = gain(FairnessCriterion::WeightedLeximin, 0, w(1), 3);
        assert_eq!(select_max(&[heavy, light]), Some(1));
        let a = UtilityVector::new(vec![0, 1], vec![w(2), w(1)]).unwrap();
        let b = UtilityVector::new(vec![1, 0], vec![w(2), w(1)]).unwrap();
        assert_eq!(compare(FairnessCriterion::WeightedLeximin, &a, &b).unwrap(), Ordering::Greater);
    }

    #[test]
    fn negative_p_means_ties_once_zeros_remain() {
        let p = FairnessCriterion::WeightedPMeans(Ratio::new(-2, 1));
        let weights = vec![w(3), w(2), w(1)];
        let a = UtilityVector::new(vec![1, 0, 2], weights.clone()).unwrap();
        let b = UtilityVector::new(vec![0, 1, 2], weights.clone()).unwrap();
        assert_eq!(compare(p, &a, &b).unwrap(), Ordering::Equal);
        let c = UtilityVector::new(vec![0, 0, 3], weights.clone()).unwrap();
        assert_eq!(compare(p, &a, &c).unwrap(), Ordering::Greater);
        let d = UtilityVector::new(vec![2, 1, 1], weights.clone()).unwrap();
        let e = UtilityVector::new(vec![1, 2, 1], weights).unwrap();
        assert_eq!(compare(p, &d, &e).unwrap(), Ordering::Greater);
    }

    #[test]
    fn nash_prefers_fewer_zeros() {
        let a = UtilityVector::unweighted(vec![1, 1, 1]);
        let b = UtilityVector::unweighted(vec![0, 5, 9]);
        assert_eq!(compare(FairnessCriterion::WeightedNash, &a, &b).unwrap(), Ordering::Greater);
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let a = UtilityVector::unweighted(vec![1, 2]);
        let b = UtilityVector::unweighted(vec![1]);
        assert!(matches!(compare(FairnessCriterion::Lorenz, &a, &b), Err(Error::ArityMismatch { .. })));
        assert!(UtilityVector::new(vec![1], vec![]).is_err());
    }

    #[test]
    fn gain_examples() {
        assert_eq!(
            gain(FairnessCriterion::Lorenz, 3, w(1), 2).coords,
            vec![GainCoord::Exact(Ratio::from_integer(-3))]
        );
        let k = gain(FairnessCriterion::WeightedNash, 0, w(1), 2);
        let big = gain(FairnessCriterion::WeightedNash, 1, w(60), 3);
        assert!(lex_dominates(&k, &big).unwrap());
        let g = gain(FairnessCriterion::WeightedNash, 1, w(5), 2);
        assert_eq!(g.coords[0].approx(), 32.0);
        assert_eq!(g.coords[0].cmp_coord(&GainCoord::Exact(Ratio::from_integer(32))), Ordering::Equal);
    }

    #[test]
    fn lex_dominance_examples() {
        let v = |xs: &[i64]| GainVector {
            coords: xs.iter().map(|&x| GainCoord::Exact(Ratio::from_integer(x))).collect(),
            node: 0,
        };
        assert!(lex_dominates(&v(&[2, 0]), &v(&[1, 9])).unwrap());
        assert!(!lex_dominates(&v(&[1, 1]), &v(&[1, 1])).unwrap());
        assert!(!lex_dominates(&v(&[-3]), &v(&[-2])).unwrap());
        assert!(lex_dominates(&v(&[-2]), &v(&[-3])).unwrap());
        assert!(lex_dominates(&v(&[1]), &v(&[1, 2])).is_err());
    }

    #[test]
    fn exact_power_ties() {
        // (2/1)^2 == (4/1)^1
        let a = GainCoord::Power { base: Ratio::new(2, 1), exp: Ratio::new(2, 1) };
        let b = GainCoord::Power { base: Ratio::new(4, 1), exp: Ratio::new(1, 1) };
        assert_eq!(a.cmp_coord(&b), Ordering::Equal);
        let c = GainCoord::Power { base: Ratio::new(3, 2), exp: Ratio::new(7, 2) };
        let d = GainCoord::Power { base: Ratio::new(4, 3), exp: Ratio::new(9, 2) };
        // (3/2)^3.5 ~ 4.134 vs (4/3)^4.5 ~ 3.650
        assert_eq!(c.cmp_coord(&d), Ordering::Greater);
    }

    #[test]
    fn select_max_breaks_ties_by_position() {
        let gains: Vec<GainVector> = [1usize, 0, 0].iter().enumerate()
            .map(|(k, &v)| gain(FairnessCriterion::Lorenz, v, w(1), k + 2))
            .collect();
        assert_eq!(select_max(&gains), Some(1));
        assert_eq!(select_max(&[]), None);
    }

    fn vectors() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<usize>, Vec<u64>)> {
        (1usize..6).prop_flat_map(|k| {
            (
                proptest::collection::vec(0usize..8, k),
                proptest::collection::vec(0usize..8, k),
                proptest::collection::vec(0usize..8, k),
                proptest::collection::vec(1u64..6, k),
            )
        })
    }

    proptest! {
        #[test]
        fn compare_is_a_total_preorder((a, b, c, ws) in vectors()) {
            let weights: Vec<Weight> = ws.iter().map(|&x| w(x)).collect();
            let a = UtilityVector::new(a, weights.clone()).unwrap();
            let b = UtilityVector::new(b, weights.clone()).unwrap();
            let c = UtilityVector::new(c, weights).unwrap();
            for crit in all_criteria() {
                prop_assert_eq!(compare(crit, &a, &a).unwrap(), Ordering::Equal);
                let ab = compare(crit, &a, &b).unwrap();
                prop_assert_eq!(compare(crit, &b, &a).unwrap(), ab.reverse());
                let bc = compare(crit, &b, &c).unwrap();
                if ab != Ordering::Less && bc != Ordering::Less {
                    prop_assert_ne!(compare(crit, &a, &c).unwrap(), Ordering::Less);
                }
            }
        }

        #[test]
        fn gain_is_non_increasing(v in 0usize..30, dv in 1usize..30, wn in 1u64..7, wd in 1u64..4) {
            let weight = Weight::new(wn, wd).unwrap();
            for crit in all_criteria() {
                let lo = gain(crit, v, weight, 2);
                let hi = gain(crit, v + dv, weight, 2);
                prop_assert!(!lex_dominates(&hi, &lo).unwrap(), "{crit} {v} {dv}");
            }
        }

        #[test]
        fn nash_logs_agree_with_exact_products(a in proptest::collection::vec(1usize..=20, 1..=6),
                                               seed in proptest::collection::vec(1usize..=20, 6)) {
            let b: Vec<usize> = seed[..a.len()].to_vec();
            let ua = UtilityVector::unweighted(a.clone());
            let ub = UtilityVector::unweighted(b.clone());
            let pa: BigUint = a.iter().map(|&x| BigUint::from(x)).product();
            let pb: BigUint = b.iter().map(|&x| BigUint::from(x)).product();
            prop_assert_eq!(compare(FairnessCriterion::WeightedNash, &ua, &ub).unwrap(), pa.cmp(&pb));
        }

        #[test]
        fn lorenz_maximum_is_the_dominating_vector(cands in proptest::collection::vec(
            proptest::collection::vec(0usize..5, 3), 1..8)) {
            let prefix = |v: &Vec<usize>| {
                let mut s = v.clone();
                s.sort_unstable();
                s.iter().scan(0, |acc, &x| { *acc += x; Some(*acc) }).collect::<Vec<_>>()
            };
            let dominates = |a: &Vec<usize>, b: &Vec<usize>| {
                prefix(a).iter().zip(prefix(b)).all(|(x, y)| *x >= y)
            };
            let dominating = cands.iter().find(|a| cands.iter().all(|b| dominates(a, b)));
            if let Some(d) = dominating {
                let best = cands.iter().max_by(|a, b| compare(
                    FairnessCriterion::Lorenz,
                    &UtilityVector::unweighted((*a).clone()),
                    &UtilityVector::unweighted((*b).clone()),
                ).unwrap()).unwrap();
                prop_assert_eq!(prefix(best), prefix(d));
            }
        }
    }
}
