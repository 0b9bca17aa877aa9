//! Finite unions of closed rational subintervals of `[0, 1]`.
//!
//! Unions are kept in canonical form: parts sorted, pairwise separated by a
//! strict gap, and clipped to `[0, 1]`. Touching parts are merged, so
//! structural equality coincides with set equality. Endpoints are exact.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::certified::{cmp_q, eq_q};
use crate::error::{invalid, Result};

fn lt(a: &BigRational, b: &BigRational) -> bool {
    cmp_q(a, b) == Ordering::Less
}

fn le(a: &BigRational, b: &BigRational) -> bool {
    cmp_q(a, b) != Ordering::Greater
}

/// A closed interval `[lo, hi]` with `0 <= lo <= hi <= 1`.
#[derive(Clone, Debug, Eq, Hash)]
pub struct RatInterval {
    lo: BigRational,
    hi: BigRational,
}

impl PartialEq for RatInterval {
    fn eq(&self, other: &Self) -> bool {
        eq_q(&self.lo, &other.lo) && eq_q(&self.hi, &other.hi)
    }
}

impl RatInterval {
    pub fn new(lo: BigRational, hi: BigRational) -> Result<Self> {
        if lt(&hi, &lo) {
            return invalid(format!("interval with lo = {lo} > hi = {hi}"));
        }
        if lo.is_negative() || lt(&BigRational::one(), &hi) {
            return invalid(format!("interval [{lo}, {hi}] leaves [0, 1]"));
        }
        Ok(RatInterval { lo, hi })
    }

    pub fn lo(&self) -> &BigRational {
        &self.lo
    }

    pub fn hi(&self) -> &BigRational {
        &self.hi
    }

    pub fn length(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        le(&self.lo, x) && le(x, &self.hi)
    }
}

/// A finite union of closed subintervals of `[0, 1]` in canonical form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IntervalUnion {
    parts: Vec<RatInterval>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        IntervalUnion { parts: Vec::new() }
    }

    pub fn unit() -> Self {
        IntervalUnion {
            parts: vec![RatInterval { lo: BigRational::zero(), hi: BigRational::one() }],
        }
    }

    pub fn parts(&self) -> &[RatInterval] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Builds a union from intervals already sorted by `lo` with
    /// non-decreasing, in-range endpoints; touching or overlapping
    /// neighbours are merged on the fly.
    pub(crate) fn from_sorted(raw: impl IntoIterator<Item = (BigRational, BigRational)>) -> Self {
        let mut parts: Vec<RatInterval> = Vec::new();
        for (lo, hi) in raw {
            debug_assert!(le(&lo, &hi));
            push_merge(&mut parts, lo, hi);
        }
        IntervalUnion { parts }
    }

    /// Checks the canonical-form invariants.
    pub fn is_canonical(&self) -> bool {
        self.parts.iter().all(|p| {
            le(&p.lo, &p.hi) && !p.lo.is_negative() && le(&p.hi, &BigRational::one())
        }) && self.parts.windows(2).all(|w| lt(&w[0].hi, &w[1].lo))
    }

    /// Closed membership by binary search.
    pub fn contains(&self, x: &BigRational) -> bool {
        let i = self.parts.partition_point(|p| lt(&p.hi, x));
        self.parts.get(i).is_some_and(|p| p.contains(x))
    }

    /// `self` is a subset of `other`.
    pub fn is_subset(&self, other: &IntervalUnion) -> bool {
        intersect(self, other) == *self
    }
}

fn push_merge(parts: &mut Vec<RatInterval>, lo: BigRational, hi: BigRational) {
    if let Some(last) = parts.last_mut() {
        if le(&lo, &last.hi) {
            if lt(&last.hi, &hi) {
                last.hi = hi;
            }
            return;
        }
    }
    parts.push(RatInterval { lo, hi });
}

/// Sort, clip to `[0, 1]` and merge a list of raw intervals.
pub fn normalize(raw: &[(BigRational, BigRational)]) -> Result<IntervalUnion> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    let mut clipped = Vec::with_capacity(raw.len());
    for (lo, hi) in raw {
        if lt(hi, lo) {
            return invalid(format!("interval with lo = {lo} > hi = {hi}"));
        }
        if lt(hi, &zero) || lt(&one, lo) {
            continue;
        }
        let lo = if lt(lo, &zero) { zero.clone() } else { lo.clone() };
        let hi = if lt(&one, hi) { one.clone() } else { hi.clone() };
        clipped.push((lo, hi));
    }
    clipped.sort_by(|a, b| cmp_q(&a.0, &b.0).then_with(|| cmp_q(&a.1, &b.1)));
    Ok(IntervalUnion::from_sorted(clipped))
}

/// Exact Lebesgue measure.
pub fn measure(u: &IntervalUnion) -> BigRational {
    // Sum over a common denominator and reduce once.
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    let mut add = |x: &BigRational, sign: bool| {
        let (q, r) = den.div_rem(x.denom());
        let q = if r.is_zero() {
            q
        } else {
            let l = den.lcm(x.denom());
            num *= &l / &den;
            den = l;
            &den / x.denom()
        };
        let t = x.numer() * q;
        if sign {
            num += t;
        } else {
            num -= t;
        }
    };
    for p in &u.parts {
        add(&p.hi, true);
        add(&p.lo, false);
    }
    BigRational::new(num, den)
}

/// Exact set intersection by a linear sweep.
pub fn intersect(u: &IntervalUnion, v: &IntervalUnion) -> IntervalUnion {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < u.parts.len() && j < v.parts.len() {
        let a = &u.parts[i];
        let b = &v.parts[j];
        let lo = if lt(&b.lo, &a.lo) { &a.lo } else { &b.lo };
        let hi = if lt(&a.hi, &b.hi) { &a.hi } else { &b.hi };
        if le(lo, hi) {
            out.push((lo.clone(), hi.clone()));
        }
        match cmp_q(&a.hi, &b.hi) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    IntervalUnion::from_sorted(out)
}

/// Exact set union by merging two sorted part lists.
pub fn union(u: &IntervalUnion, v: &IntervalUnion) -> IntervalUnion {
    let mut parts: Vec<RatInterval> = Vec::with_capacity(u.parts.len() + v.parts.len());
    let (mut i, mut j) = (0, 0);
    loop {
        let next = match (u.parts.get(i), v.parts.get(j)) {
            (Some(a), Some(b)) => {
                if le(&a.lo, &b.lo) {
                    i += 1;
                    a
                } else {
                    j += 1;
                    b
                }
            }
            (Some(a), None) => {
                i += 1;
                a
            }
            (None, Some(b)) => {
                j += 1;
                b
            }
            (None, None) => break,
        };
        push_merge(&mut parts, next.lo.clone(), next.hi.clone());
    }
    IntervalUnion { parts }
}

/// Union of many sets by pairwise tree reduction.
pub fn union_all(mut sets: Vec<IntervalUnion>) -> IntervalUnion {
    if sets.is_empty() {
        return IntervalUnion::empty();
    }
    while sets.len() > 1 {
        let mut next = Vec::with_capacity(sets.len().div_ceil(2));
        let mut it = sets.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(union(&a, &b)),
                None => next.push(a),
            }
        }
        sets = next;
    }
    sets.pop().unwrap()
}

impl Serialize for IntervalUnion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            parts: Vec<[String; 4]>,
        }
        let parts = self
            .parts
            .iter()
            .map(|p| {
                [
                    p.lo.numer().to_string(),
                    p.lo.denom().to_string(),
                    p.hi.numer().to_string(),
                    p.hi.denom().to_string(),
                ]
            })
            .collect();
        Repr { parts }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntervalUnion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            parts: Vec<[String; 4]>,
        }
        let repr = Repr::deserialize(d)?;
        let parse = |s: &str| s.parse::<BigInt>().map_err(D::Error::custom);
        let mut raw = Vec::with_capacity(repr.parts.len());
        for [ln, ld, hn, hd] in &repr.parts {
            let (ld, hd) = (parse(ld)?, parse(hd)?);
            if ld.is_zero() || hd.is_zero() {
                return Err(D::Error::custom("zero denominator"));
            }
            raw.push((BigRational::new(parse(ln)?, ld), BigRational::new(parse(hn)?, hd)));
        }
        let u = normalize(&raw).map_err(D::Error::custom)?;
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certified::{int, rat};
    use proptest::prelude::*;

    fn iv(a: (i64, i64), b: (i64, i64)) -> (BigRational, BigRational) {
        (rat(a.0, a.1), rat(b.0, b.1))
    }

    fn u(raw: &[((i64, i64), (i64, i64))]) -> IntervalUnion {
        normalize(&raw.iter().map(|&(a, b)| iv(a, b)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let x = u(&[((0, 1), (1, 4)), ((1, 8), (1, 2))]);
        assert_eq!(x, u(&[((0, 1), (1, 2))]));
        assert_eq!(measure(&x), rat(1, 2));
        let e = normalize(&[]).unwrap();
        assert!(e.is_empty());
        assert_eq!(measure(&e), int(0));
        let c = u(&[((-1, 8), (1, 8))]);
        assert_eq!(c.parts()[0].lo(), &int(0));
        assert_eq!(measure(&c), rat(1, 8));
        assert!(normalize(&[iv((1, 2), (1, 4))]).is_err());
        // entirely outside
        assert!(u(&[((3, 2), (2, 1))]).is_empty());
    }

    #[test]
    fn measure_examples() {
        assert_eq!(measure(&IntervalUnion::unit()), int(1));
        assert_eq!(measure(&u(&[((1, 8), (1, 4)), ((3, 8), (1, 2))])), rat(1, 4));
    }

    #[test]
    fn intersect_examples() {
        let a = u(&[((0, 1), (1, 2))]);
        let b = u(&[((1, 4), (3, 4))]);
        assert_eq!(intersect(&a, &b), u(&[((1, 4), (1, 2))]));
        assert_eq!(intersect(&a, &a), a);
        assert!(intersect(&u(&[((0, 1), (1, 4))]), &u(&[((1, 2), (1, 1))])).is_empty());
        // touching closed intervals meet in a point of measure zero
        let t = intersect(&u(&[((0, 1), (1, 4))]), &u(&[((1, 4), (1, 2))]));
        assert_eq!(t.len(), 1);
        assert_eq!(measure(&t), int(0));
    }

    #[test]
    fn union_examples() {
        assert_eq!(union(&u(&[((0, 1), (1, 4))]), &u(&[((1, 4), (1, 2))])), u(&[((0, 1), (1, 2))]));
        let a = u(&[((1, 8), (1, 4)), ((1, 2), (3, 4))]);
        assert_eq!(union(&a, &IntervalUnion::empty()), a);
        let m = union(&u(&[((0, 1), (1, 4))]), &u(&[((1, 8), (3, 8))]));
        assert_eq!(m, u(&[((0, 1), (3, 8))]));
        assert_eq!(measure(&m), rat(3, 8));
    }

    #[test]
    fn json_shape() {
        let a = u(&[((1, 8), (1, 4))]);
        let js = serde_json::to_string(&a).unwrap();
        assert_eq!(js, r#"{"parts":[["1","8","1","4"]]}"#);
        assert_eq!(serde_json::from_str::<IntervalUnion>(&js).unwrap(), a);
    }

    fn arb_union() -> impl Strategy<Value = IntervalUnion> {
        prop::collection::vec((0i64..=1_000_000, 0i64..=1_000_000, 1i64..=1_000_000), 0..100).prop_map(
            |v| {
                let raw: Vec<_> = v
                    .into_iter()
                    .map(|(a, b, d)| {
                        let (a, b) = (a.min(b) % (d + 1), a.max(b) % (d + 1));
                        let (a, b) = (a.min(b), a.max(b));
                        (rat(a, d), rat(b, d))
                    })
                    .collect();
                normalize(&raw).unwrap()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inclusion_exclusion(a in arb_union(), b in arb_union()) {
            prop_assert_eq!(measure(&union(&a, &b)) + measure(&intersect(&a, &b)), measure(&a) + measure(&b));
            prop_assert!(measure(&intersect(&a, &b)) <= measure(&a).min(measure(&b)));
        }

        #[test]
        fn canonical_and_idempotent(a in arb_union()) {
            prop_assert!(a.is_canonical());
            let raw: Vec<_> = a.parts().iter().map(|p| (p.lo().clone(), p.hi().clone())).collect();
            prop_assert_eq!(normalize(&raw).unwrap(), a);
        }

        #[test]
        fn commutative_associative(a in arb_union(), b in arb_union(), c in arb_union()) {
            prop_assert_eq!(union(&a, &b), union(&b, &a));
            prop_assert_eq!(intersect(&a, &b), intersect(&b, &a));
            prop_assert_eq!(union(&union(&a, &b), &c), union(&a, &union(&b, &c)));
            prop_assert_eq!(intersect(&intersect(&a, &b), &c), intersect(&a, &intersect(&b, &c)));
            let all = union_all(vec![a.clone(), b.clone(), c.clone()]);
            prop_assert_eq!(all, union(&union(&a, &b), &c));
        }

        #[test]
        fn membership_matches_scan(a in arb_union(), n in 0i64..=1000) {
            let x = rat(n, 1000);
            let scan = a.parts().iter().any(|p| p.contains(&x));
            prop_assert_eq!(a.contains(&x), scan);
        }
    }
}
