//! Approximation sets `A_q` and `A_q*` for a radius sequence `Delta_q`:
//! exact measures, pairwise correlations, second-moment lower bounds,
//! windows, the counterexample construction, the Catlin transform and
//! Monte Carlo counting experiments.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::certified::{self, cmp_q, int, rat, Enclosure};
use crate::error::{invalid, Error, Result};
use crate::intervals::{self, IntervalUnion};
use crate::numtheory::{self, CorrelationVariant, FactoredInt, PrimeTable};
use crate::serde_util::{parse_int, rat_string};

/// Largest sieve built internally for factoring support elements.
const FACTOR_SIEVE_CAP: u64 = 1 << 22;

/// A finitely supported radius sequence `q -> Delta_q`.
///
/// Stored values are exact rationals. Entries coming from transcendental
/// formulas hold the lower end of a certified enclosure; the upper end is
/// kept alongside.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaSequence {
    qmax: u64,
    label: String,
    values: BTreeMap<u64, BigRational>,
    upper: BTreeMap<u64, BigRational>,
    clipped: BTreeSet<u64>,
}

impl DeltaSequence {
    /// Builds a sequence from `(q, Delta_q)` pairs; zero entries are dropped.
    pub fn new(
        qmax: u64,
        label: impl Into<String>,
        values: impl IntoIterator<Item = (u64, BigRational)>,
    ) -> Result<Self> {
        if qmax == 0 {
            return invalid("qmax must be positive");
        }
        let mut map = BTreeMap::new();
        for (q, v) in values {
            if q == 0 || q > qmax {
                return invalid(format!("q = {q} outside [1, {qmax}]"));
            }
            if v.is_negative() {
                return invalid(format!("negative Delta at q = {q}"));
            }
            if !v.is_zero() {
                map.insert(q, v);
            }
        }
        Ok(DeltaSequence {
            qmax,
            label: label.into(),
            values: map,
            upper: BTreeMap::new(),
            clipped: BTreeSet::new(),
        })
    }

    pub fn zero(qmax: u64, label: impl Into<String>) -> Result<Self> {
        Self::new(qmax, label, std::iter::empty())
    }

    pub fn qmax(&self) -> u64 {
        self.qmax
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `Delta_q`, zero outside the support.
    pub fn get(&self, q: u64) -> BigRational {
        self.values.get(&q).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Enclosure of the real radius at `q`.
    pub fn enclosure(&self, q: u64) -> Enclosure {
        let lo = self.get(q);
        match self.upper.get(&q) {
            Some(hi) => Enclosure::new(lo, hi.clone()),
            None => Enclosure::exact(lo),
        }
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.values.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (u64, &BigRational)> + '_ {
        self.values.iter().map(|(&q, v)| (q, v))
    }

    pub fn support_len(&self) -> usize {
        self.values.len()
    }

    /// `q` whose formula value exceeded `1/(2q)` and was clipped to it.
    pub fn clipped(&self) -> &BTreeSet<u64> {
        &self.clipped
    }

    /// `Delta_q > 1/(2q)`.
    pub fn is_saturated(&self, q: u64) -> bool {
        self.values.get(&q).is_some_and(|v| saturated(q, v))
    }

    pub fn saturated(&self) -> Vec<u64> {
        self.entries().filter(|(q, v)| saturated(*q, v)).map(|(q, _)| q).collect()
    }

    /// Errors with the first saturated `q` in `[lo, hi]`.
    pub fn check_unsaturated(&self, lo: u64, hi: u64) -> Result<()> {
        for (&q, v) in self.values.range(lo..=hi) {
            if saturated(q, v) {
                return Err(saturation_error(q, v));
            }
        }
        Ok(())
    }

    /// The sequence restricted to `lo <= q <= hi`.
    pub fn restrict(&self, lo: u64, hi: u64) -> DeltaSequence {
        let keep = |m: &BTreeMap<u64, BigRational>| -> BTreeMap<u64, BigRational> {
            m.range(lo..=hi.max(lo)).map(|(&q, v)| (q, v.clone())).collect()
        };
        DeltaSequence {
            qmax: self.qmax,
            label: format!("{}[{lo}..{hi}]", self.label),
            values: keep(&self.values),
            upper: keep(&self.upper),
            clipped: self.clipped.range(lo..=hi.max(lo)).copied().collect(),
        }
    }
}

fn saturated(q: u64, v: &BigRational) -> bool {
    v * int(2 * q) > BigRational::one()
}

fn saturation_error(q: u64, v: &BigRational) -> Error {
    Error::Saturation { q, delta: rat_string(v) }
}

#[derive(Serialize, Deserialize)]
struct DeltaRepr {
    qmax: u64,
    label: String,
    values: Vec<(u64, String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    upper: Vec<(u64, String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    clipped: Vec<u64>,
}

fn triples(m: &BTreeMap<u64, BigRational>) -> Vec<(u64, String, String)> {
    m.iter().map(|(&q, v)| (q, v.numer().to_string(), v.denom().to_string())).collect()
}

fn from_triple(q: u64, n: &str, d: &str) -> Result<(u64, BigRational)> {
    let d = parse_int(d)?;
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator at q = {q}")));
    }
    Ok((q, BigRational::new(parse_int(n)?, d)))
}

impl Serialize for DeltaSequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DeltaRepr {
            qmax: self.qmax,
            label: self.label.clone(),
            values: triples(&self.values),
            upper: triples(&self.upper),
            clipped: self.clipped.iter().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DeltaSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = DeltaRepr::deserialize(d)?;
        let values = repr
            .values
            .iter()
            .map(|(q, n, d)| from_triple(*q, n, d))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let mut seq = DeltaSequence::new(repr.qmax, repr.label, values).map_err(D::Error::custom)?;
        for (q, n, den) in &repr.upper {
            let (q, v) = from_triple(*q, n, den).map_err(D::Error::custom)?;
            if v < seq.get(q) {
                return Err(D::Error::custom(format!("upper bound below value at q = {q}")));
            }
            seq.upper.insert(q, v);
        }
        seq.clipped = repr.clipped.into_iter().collect();
        Ok(seq)
    }
}

/// Factors support elements: smallest-prime-factor lookup for small
/// values, trial division above the sieve.
struct Factorizer {
    table: PrimeTable,
}

impl Factorizer {
    fn for_qmax(qmax: u64) -> Result<Self> {
        Ok(Factorizer { table: numtheory::sieve(qmax.clamp(2, FACTOR_SIEVE_CAP))? })
    }

    fn factor(&self, q: u64) -> FactoredInt {
        if q <= self.table.limit() {
            return numtheory::factor(q, &self.table).expect("within sieve");
        }
        let mut factors = Vec::new();
        let mut m = q;
        let mut try_div = |p: u64, m: &mut u64| {
            let mut e = 0;
            while *m % p == 0 {
                *m /= p;
                e += 1;
            }
            if e > 0 {
                factors.push((p, e));
            }
        };
        for &p in self.table.primes() {
            if p * p > m {
                break;
            }
            try_div(p, &mut m);
        }
        let mut d = self.table.limit() + 1;
        while d.saturating_mul(d) <= m {
            try_div(d, &mut m);
            d += 1;
        }
        if m > 1 {
            factors.push((m, 1));
        }
        FactoredInt::from_factors(factors).expect("trial division yields ascending primes")
    }

    fn totient(&self, q: u64) -> BigUint {
        numtheory::totient(&self.factor(q))
    }
}

fn big(n: u64) -> BigRational {
    int(n)
}

/// `Delta_q = 1/(q^2 ln^c q)` for `2 <= q <= qmax`, stored as the lower end
/// of an enclosure of relative width at most `2^-64`. Values above `1/(2q)`
/// are clipped to `1/(2q)` and flagged.
pub fn delta_khinchin(c: &BigRational, qmax: u64) -> Result<DeltaSequence> {
    if !c.is_positive() {
        return invalid(format!("Khinchin exponent must be positive, got {c}"));
    }
    if qmax < 2 {
        return invalid("qmax must be at least 2");
    }
    let (cn, cd) = (
        c.numer().to_i64().ok_or_else(|| Error::InvalidArgument("exponent too large".into()))?,
        c.denom().to_u32().ok_or_else(|| Error::InvalidArgument("exponent denominator too large".into()))?,
    );
    let table = numtheory::sieve(qmax)?;
    let mut prec = 96;
    loop {
        let logs: BTreeMap<u64, Enclosure> = table
            .primes()
            .par_iter()
            .map(|&p| (p, certified::ln(&big(p), prec)))
            .collect();
        let rows: Vec<(u64, BigRational, BigRational, bool)> = (2..=qmax)
            .into_par_iter()
            .map(|q| {
                let f = numtheory::factor(q, &table).expect("q within sieve");
                let mut l = Enclosure::zero();
                for &(p, e) in f.factors() {
                    l = &l + &logs[&p].scale(&int(e));
                }
                let lc = certified::pow_enclosure(&l, cn, cd, prec);
                let d = lc.scale(&big(q * q)).recip();
                let cap = rat(1, 2 * q as i64);
                let clipped = cmp_q(d.hi(), &cap) == Ordering::Greater;
                let lo = certified::round_down(d.lo(), prec);
                let hi = certified::round_up(d.hi(), prec);
                let lo = if cmp_q(&lo, &cap) == Ordering::Greater { cap.clone() } else { lo };
                let hi = if cmp_q(&hi, &cap) == Ordering::Greater { cap } else { hi };
                (q, lo, hi, clipped)
            })
            .collect();
        let tol = BigRational::new(BigInt::one(), BigInt::one() << 64usize);
        let tight = rows.iter().all(|(_, lo, hi, _)| cmp_q(&certified::sub_q(hi, lo), &certified::mul_q(lo, &tol)) != Ordering::Greater);
        if tight {
            let mut seq = DeltaSequence::zero(qmax, format!("khinchin:{c}"))?;
            for (q, lo, hi, clipped) in rows {
                if clipped {
                    seq.clipped.insert(q);
                }
                if !certified::eq_q(&hi, &lo) {
                    seq.upper.insert(q, hi);
                }
                seq.values.insert(q, lo);
            }
            return Ok(seq);
        }
        if prec >= certified::MAX_PRECISION {
            return Err(Error::Precision("Khinchin radii did not reach 2^-64 relative width".into()));
        }
        prec *= 2;
    }
}

/// Per-level data of the counterexample sequence.
#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleLevel {
    pub j: usize,
    pub p_j: u64,
    pub q_j: u64,
    /// `#S_j = 2^(j-1)`.
    pub size: usize,
    /// `sum_{q in S_j} q / q_j`, exact.
    #[serde(serialize_with = "crate::serde_util::ser_rat")]
    pub rational_part: BigRational,
    /// `prod_{i < j} (1 + 1/p_i)`, computed independently.
    #[serde(serialize_with = "crate::serde_util::ser_rat")]
    pub product: BigRational,
    /// `1/(j ln^2 j)`.
    #[serde(serialize_with = "crate::serde_util::ser_enclosure")]
    pub weight: Enclosure,
    /// `sum_{q in S_j} q Delta_q` from the stored radii.
    #[serde(serialize_with = "crate::serde_util::ser_enclosure")]
    pub level_sum: Enclosure,
    /// `q_j Delta_{q_j}`.
    #[serde(serialize_with = "crate::serde_util::ser_enclosure")]
    pub primorial_term: Enclosure,
    /// `sum_{i <= j} q_i Delta_{q_i}`.
    #[serde(serialize_with = "crate::serde_util::ser_enclosure")]
    pub partial_sum: Enclosure,
    /// Members of `S_j` with `Delta_q > 1/(2q)`.
    pub saturated: usize,
    pub identity_holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub delta: DeltaSequence,
    pub levels: Vec<CounterexampleLevel>,
}

/// The sequence supported on `S_j = {d p_j : d | q_(j-1)}`, `2 <= j <= J`,
/// with `Delta_q = 1/(q_j j ln^2 j)` on `S_j`. Saturated radii are flagged
/// in the level data, not clipped.
pub fn delta_counterexample(levels: usize, table: &PrimeTable) -> Result<Counterexample> {
    if levels < 2 {
        return invalid(format!("counterexample needs at least 2 levels, got {levels}"));
    }
    if levels > 15 {
        return Err(Error::ResourceLimit(format!("q_{levels} does not fit in 64 bits")));
    }
    if table.primes().len() < levels {
        return invalid(format!("prime table has fewer than {levels} primes"));
    }
    let prec = 128;
    let primes = &table.primes()[..levels];
    let qj: Vec<u64> = (0..=levels).map(|j| primes[..j].iter().product()).collect();
    let mut seq = DeltaSequence::zero(qj[levels], format!("counterexample:{levels}"))?;
    let mut out = Vec::new();
    let mut partial = Enclosure::zero();
    for j in 2..=levels {
        let p = primes[j - 1];
        let q_j = qj[j];
        let lnj = certified::ln(&big(j as u64), prec);
        let weight = (&lnj * &lnj).scale(&big(j as u64)).recip().round(prec);
        let delta = weight.scale(&BigRational::new(BigInt::one(), BigInt::from(q_j)));
        let lo = certified::round_down(delta.lo(), prec);
        let hi = certified::round_up(delta.hi(), prec);
        let mut members = Vec::with_capacity(1 << (j - 1));
        for mask in 0u32..(1 << (j - 1)) {
            let d: u64 = (0..j - 1).filter(|i| mask >> i & 1 == 1).map(|i| primes[i]).product();
            members.push(d * p);
        }
        members.sort_unstable();
        let member_sum: u64 = members.iter().sum();
        let rational_part = BigRational::new(BigInt::from(member_sum), BigInt::from(q_j));
        let product: BigRational = primes[..j - 1].iter().map(|&pi| rat(pi as i64 + 1, pi as i64)).product();
        let level_sum = Enclosure::new(&lo * big(member_sum), &hi * big(member_sum));
        let primorial_term = Enclosure::new(&lo * big(q_j), &hi * big(q_j));
        partial = &partial + &primorial_term;
        let mut sat = 0;
        for &q in &members {
            seq.values.insert(q, lo.clone());
            seq.upper.insert(q, hi.clone());
            if saturated(q, &lo) {
                sat += 1;
            }
        }
        let identity_holds = rational_part == product && level_sum.overlaps(&weight.scale(&rational_part));
        out.push(CounterexampleLevel {
            j,
            p_j: p,
            q_j,
            size: members.len(),
            rational_part,
            product,
            weight,
            level_sum,
            primorial_term,
            partial_sum: partial.clone(),
            saturated: sat,
            identity_holds,
        });
    }
    Ok(Counterexample { delta: seq, levels: out })
}

/// `Delta_q = 1/(qN)` on `S`.
pub fn delta_uniform_support(support: &[u64], n: &BigRational) -> Result<DeltaSequence> {
    if support.contains(&0) {
        return invalid("support must consist of positive integers");
    }
    if !n.is_positive() {
        return invalid(format!("N must be positive, got {n}"));
    }
    if n < &int(2) {
        let q = support.iter().copied().min().unwrap_or(1);
        return Err(saturation_error(q, &(n * big(q)).recip()));
    }
    let qmax = support.iter().copied().max().unwrap_or(1);
    DeltaSequence::new(
        qmax,
        format!("uniform:N={}", rat_string(n)),
        support.iter().map(|&q| (q, (n * big(q)).recip())),
    )
}

/// `A_q` (all `0 <= a <= q`) or `A_q*` (`gcd(a, q) = 1`) as an exact union
/// of the closed intervals `[a/q - Delta, a/q + Delta]` clipped to `[0, 1]`.
pub fn build_aq(q: u64, delta: &BigRational, reduced: bool) -> Result<IntervalUnion> {
    if q == 0 {
        return invalid("q must be positive");
    }
    if delta.is_negative() {
        return invalid("Delta must be non-negative");
    }
    if saturated(q, delta) {
        return Err(saturation_error(q, delta));
    }
    if delta.is_zero() {
        return Ok(IntervalUnion::empty());
    }
    // Endpoints (a dd -+ dn q) / (q dd) for Delta = dn / dd, clipped to [0, 1].
    let (dn, dd) = (delta.numer(), delta.denom());
    let den = dd * BigInt::from(q);
    let off = dn * BigInt::from(q);
    let end = |n: BigInt| {
        if n.is_negative() {
            BigRational::zero()
        } else if n >= den {
            BigRational::one()
        } else {
            BigRational::new(n, den.clone())
        }
    };
    let parts = (0..=q).filter(|&a| !reduced || a.gcd(&q) == 1).map(|a| {
        let c = dd * BigInt::from(a);
        (end(&c - &off), end(&c + &off))
    });
    Ok(IntervalUnion::from_sorted(parts))
}

/// `meas(A_q)` or `meas(A_q*)` from the closed formulas `2 q Delta` and
/// `2 phi(q) Delta`.
fn formula_measure(q: u64, phi: &BigUint, delta: &BigRational, reduced: bool) -> BigRational {
    let count = if reduced { BigRational::from_integer(phi.clone().into()) } else { big(q) };
    count * delta * int(2)
}

fn i128_of(x: &BigInt) -> Option<i128> {
    x.to_i128()
}

/// Exact `meas(A_q* ∩ A_r*)` summing overlaps of candidate interval pairs
/// in scaled integer arithmetic.
fn pair_overlap_i128(q: u64, dq: &BigRational, r: u64, dr: &BigRational) -> Option<BigRational> {
    let (nq, eq) = (i128_of(dq.numer())?, i128_of(dq.denom())?);
    let (nr, er) = (i128_of(dr.numer())?, i128_of(dr.denom())?);
    let (qi, ri) = (q as i128, r as i128);
    let sq = ri.checked_mul(eq)?.checked_mul(er)?;
    let sr = qi.checked_mul(eq)?.checked_mul(er)?;
    let d = qi.checked_mul(sq)?;
    if d > 1i128 << 120 {
        return None;
    }
    let rq = nq.checked_mul(qi)?.checked_mul(ri)?.checked_mul(er)?;
    let rr = nr.checked_mul(qi)?.checked_mul(ri)?.checked_mul(eq)?;
    let s = rq + rr;
    let mut total: i128 = 0;
    for a in 1..q {
        if a.gcd(&q) != 1 {
            continue;
        }
        let ca = a as i128 * sq;
        let b_lo = Integer::div_ceil(&(ca - s), &sr).max(1);
        let b_hi = Integer::div_floor(&(ca + s), &sr).min(ri - 1);
        let mut b = b_lo;
        while b <= b_hi {
            if (b as u64).gcd(&r) == 1 {
                let cb = b * sr;
                let ov = (ca + rq).min(cb + rr) - (ca - rq).max(cb - rr);
                if ov > 0 {
                    total += ov;
                }
            }
            b += 1;
        }
    }
    Some(BigRational::new(BigInt::from(total), BigInt::from(d)))
}

/// Exact `meas(A_q* ∩ A_r*)` for distinct `q, r >= 2` with unsaturated radii.
pub fn pair_intersection_measure(q: u64, dq: &BigRational, r: u64, dr: &BigRational) -> Result<BigRational> {
    if q < 2 || r < 2 || q == r {
        return invalid(format!("pair ({q}, {r}) needs distinct q, r >= 2"));
    }
    for (x, d) in [(q, dq), (r, dr)] {
        if d.is_negative() {
            return invalid("Delta must be non-negative");
        }
        if saturated(x, d) {
            return Err(saturation_error(x, d));
        }
    }
    if dq.is_zero() || dr.is_zero() {
        return Ok(BigRational::zero());
    }
    match pair_overlap_i128(q, dq, r, dr) {
        Some(m) => Ok(m),
        None => pair_intersection_measure_direct(q, dq, r, dr),
    }
}

/// The same measure by building both unions and intersecting them.
pub fn pair_intersection_measure_direct(q: u64, dq: &BigRational, r: u64, dr: &BigRational) -> Result<BigRational> {
    let a = build_aq(q, dq, true)?;
    let b = build_aq(r, dr, true)?;
    Ok(intervals::measure(&intervals::intersect(&a, &b)))
}

/// `M(q, r) = 2 max(Delta_q, Delta_r) lcm(q, r)`.
pub fn overlap_parameter(q: u64, dq: &BigRational, r: u64, dr: &BigRational) -> BigRational {
    let m = if dq > dr { dq } else { dr };
    m * big(q.lcm(&r)) * int(2)
}

/// Correlation data of one pair.
#[derive(Clone, Debug, Serialize)]
pub struct PairData {
    pub q: u64,
    pub r: u64,
    #[serde(serialize_with = "crate::serde_util::ser_rat")]
    pub exact_meas: BigRational,
    #[serde(rename = "M", serialize_with = "crate::serde_util::ser_rat")]
    pub m: BigRational,
    /// `sum 1/p` over `p | lcm(q, r)`, `p > M`.
    #[serde(serialize_with = "crate::serde_util::ser_rat")]
    pub prime_sum: BigRational,
    /// `phi(q) Delta_q phi(r) Delta_r exp(prime_sum)`.
    #[serde(serialize_with = "crate::serde_util::ser_enclosure")]
    pub pv_term: Enclosure,
}

impl PairData {
    /// Enclosure of `exact_meas / pv_term`; `None` when `pv_term` vanishes.
    pub fn ratio(&self) -> Option<Enclosure> {
        if self.pv_term.lo().is_positive() {
            Some(self.pv_term.recip().scale(&self.exact_meas))
        } else {
            None
        }
    }
}

pub fn pair_data(q: u64, r: u64, delta: &DeltaSequence, table: &PrimeTable, prec: u32) -> Result<PairData> {
    let dq = delta.get(q);
    let dr = delta.get(r);
    let exact_meas = pair_intersection_measure(q, &dq, r, &dr)?;
    let m = overlap_parameter(q, &dq, r, &dr);
    if m <= BigRational::one() && !exact_meas.is_zero() {
        return Err(Error::Invariant(format!("M({q},{r}) <= 1 but the sets intersect in positive measure")));
    }
    let fq = numtheory::factor(q, table)?;
    let fr = numtheory::factor(r, table)?;
    let prime_sum = numtheory::correlation_prime_sum(&fq, &fr, &m, CorrelationVariant::Gcd);
    let weight = BigRational::from_integer(numtheory::totient(&fq).into())
        * &dq
        * BigRational::from_integer(numtheory::totient(&fr).into())
        * &dr;
    let pv_term = certified::exp(&prime_sum, prec).scale(&weight);
    Ok(PairData { q, r, exact_meas, m, prime_sum, pv_term })
}

/// `(sum P(E_i))^2 / sum_{i,j} P(E_i ∩ E_j)`, zero when every measure vanishes.
pub fn cs_lower_bound(measures: &[BigRational], pair_measures: &[Vec<BigRational>]) -> Result<BigRational> {
    let k = measures.len();
    if pair_measures.len() != k || pair_measures.iter().any(|row| row.len() != k) {
        return invalid("pair matrix must be square and match the measures");
    }
    for i in 0..k {
        if pair_measures[i][i] != measures[i] {
            return invalid(format!("diagonal entry {i} differs from the event measure"));
        }
        for j in 0..k {
            if pair_measures[i][j].is_negative() {
                return invalid("negative pair measure");
            }
            if pair_measures[i][j] != pair_measures[j][i] {
                return invalid("pair matrix is not symmetric");
            }
        }
    }
    let num: BigRational = measures.iter().sum();
    let den: BigRational = pair_measures.iter().flatten().sum();
    if den.is_zero() {
        return Ok(BigRational::zero());
    }
    Ok(&num * &num / den)
}

/// Smallest `R >= Q` with `1 <= sum_{Q <= q <= R} meas(A_q*)`; the sum then
/// also stays at most 2. `None` if the truncated sequence never gets there.
pub fn find_window(delta: &DeltaSequence, q_from: u64) -> Result<Option<(u64, u64)>> {
    let fz = Factorizer::for_qmax(delta.qmax())?;
    let mut sum = BigRational::zero();
    for (q, v) in delta.values.range(q_from..) {
        if saturated(*q, v) {
            return Err(saturation_error(*q, v));
        }
        sum += formula_measure(*q, &fz.totient(*q), v, true);
        if sum >= BigRational::one() {
            return Ok(Some((q_from, *q)));
        }
    }
    Ok(None)
}

/// Second-moment summary of the window `[Q, R]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WindowReport {
    #[serde(rename = "Q")]
    pub q_lo: u64,
    #[serde(rename = "R")]
    pub q_hi: u64,
    pub events: usize,
    #[serde(serialize_with = "crate::serde_util::ser_rat")]
    pub sum_meas: BigRational,
    /// `C = sum_{Q <= q < r <= R} meas(A_q* ∩ A_r*)`.
    #[serde(serialize_with = "crate::serde_util::ser_rat")]
    pub pair_sum: BigRational,
    #[serde(serialize_with = "crate::serde_util::ser_rat")]
    pub cs_bound: BigRational,
    #[serde(serialize_with = "crate::serde_util::ser_rat")]
    pub union_meas: BigRational,
    /// `1/(2 + 2C)` when `1 <= sum_meas <= 2`.
    #[serde(serialize_with = "crate::serde_util::ser_rat_opt")]
    pub prop_bound: Option<BigRational>,
}

pub fn window_report(delta: &DeltaSequence, q_lo: u64, q_hi: u64) -> Result<WindowReport> {
    if q_lo == 0 || q_lo > q_hi {
        return invalid(format!("bad window [{q_lo}, {q_hi}]"));
    }
    delta.check_unsaturated(q_lo, q_hi)?;
    let fz = Factorizer::for_qmax(q_hi)?;
    let events: Vec<(u64, BigRational)> = delta.values.range(q_lo..=q_hi).map(|(&q, v)| (q, v.clone())).collect();
    let measures: Vec<BigRational> =
        events.iter().map(|(q, v)| formula_measure(*q, &fz.totient(*q), v, true)).collect();
    let sum_meas: BigRational = measures.iter().sum();
    let pairs: Vec<(usize, usize)> =
        (0..events.len()).flat_map(|i| (i + 1..events.len()).map(move |j| (i, j))).collect();
    let pair_meas: Vec<BigRational> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (q, dq) = &events[i];
            let (r, dr) = &events[j];
            if *q == 1 {
                // A_1* = [0, D] ∪ [1 - D, 1]: intersect directly.
                pair_with_one(dq, *r, dr)
            } else {
                pair_intersection_measure(*q, dq, *r, dr)
            }
        })
        .collect::<Result<_>>()?;
    let pair_sum: BigRational = pair_meas.iter().sum();
    let total = &sum_meas + &pair_sum * int(2);
    let cs_bound = if total.is_zero() { BigRational::zero() } else { &sum_meas * &sum_meas / &total };
    let sets = events
        .par_iter()
        .map(|(q, v)| build_aq(*q, v, true))
        .collect::<Result<Vec<_>>>()?;
    let union_meas = intervals::measure(&intervals::union_all(sets));
    if cs_bound > union_meas || union_meas > sum_meas {
        return Err(Error::Invariant(format!(
            "window [{q_lo}, {q_hi}]: expected cs_bound <= union <= sum, got {cs_bound}, {union_meas}, {sum_meas}"
        )));
    }
    let prop_bound = (sum_meas >= BigRational::one() && sum_meas <= int(2))
        .then(|| (int(2) + &pair_sum * int(2)).recip());
    if let Some(b) = &prop_bound {
        if &union_meas < b {
            return Err(Error::Invariant(format!("window [{q_lo}, {q_hi}]: union below 1/(2+2C)")));
        }
    }
    Ok(WindowReport {
        q_lo,
        q_hi,
        events: events.len(),
        sum_meas,
        pair_sum,
        cs_bound,
        union_meas,
        prop_bound,
    })
}

fn pair_with_one(d1: &BigRational, r: u64, dr: &BigRational) -> Result<BigRational> {
    let a = build_aq(1, d1, true)?;
    let b = build_aq(r, dr, true)?;
    Ok(intervals::measure(&intervals::intersect(&a, &b)))
}

/// Union of `A_q` (or `A_q*`) over the support within `[lo, hi]`.
pub fn truncated_union(delta: &DeltaSequence, reduced: bool, lo: u64, hi: u64) -> Result<IntervalUnion> {
    let sets = delta
        .values
        .range(lo..=hi.max(lo))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(q, v)| build_aq(**q, v, reduced))
        .collect::<Result<Vec<_>>>()?;
    Ok(intervals::union_all(sets))
}

/// `Delta'_q = max_{m >= 1, qm <= qmax} Delta_(qm)`, the supremum truncated
/// at `qmax`.
pub fn catlin_transform(delta: &DeltaSequence) -> Result<DeltaSequence> {
    let fz = Factorizer::for_qmax(delta.qmax())?;
    let mut values: BTreeMap<u64, BigRational> = BTreeMap::new();
    let mut upper: BTreeMap<u64, BigRational> = BTreeMap::new();
    for (s, v) in delta.entries() {
        let hi = delta.upper.get(&s).unwrap_or(v);
        for d in divisors(&fz.factor(s)) {
            let e = values.entry(d).or_insert_with(BigRational::zero);
            if v > e {
                *e = v.clone();
            }
            let u = upper.entry(d).or_insert_with(BigRational::zero);
            if hi > u {
                *u = hi.clone();
            }
        }
    }
    upper.retain(|q, u| values.get(q) != Some(u));
    Ok(DeltaSequence {
        qmax: delta.qmax,
        label: format!("catlin({}) truncated at qmax={}", delta.label, delta.qmax),
        values,
        upper,
        clipped: BTreeSet::new(),
    })
}

fn divisors(f: &FactoredInt) -> Vec<u64> {
    let mut out = vec![1u64];
    for &(p, e) in f.factors() {
        let n = out.len();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= p;
            for i in 0..n {
                out.push(out[i] * pk);
            }
        }
    }
    out
}

/// Outcome of a Monte Carlo counting run.
#[derive(Clone, Debug, Serialize)]
pub struct MonteCarloReport {
    pub samples: u64,
    pub seed: u64,
    pub reduced: bool,
    pub support: usize,
    pub mean: f64,
    pub stddev: f64,
    /// `stddev / sqrt(samples)`.
    pub std_error: f64,
    #[serde(serialize_with = "crate::serde_util::ser_rat")]
    pub expected: BigRational,
    pub expected_f64: f64,
    pub z_score: f64,
    pub within_3_sigma: bool,
    /// `histogram[c]` = number of samples lying in exactly `c` sets.
    pub histogram: Vec<u64>,
}

/// The sample point `k / 2^64` for sample `index`.
pub fn sample_point(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

struct McEntry {
    q: u64,
    q_delta: f64,
    delta: BigRational,
}

/// Decides `|k/2^64 - a/q| <= Delta` exactly.
fn exact_within(k: u64, a: u64, e: &McEntry) -> bool {
    let lhs = (BigInt::from(k) * BigInt::from(e.q) - (BigInt::from(a) << 64usize)).abs();
    // |kq - a 2^64| <= Delta q 2^64
    lhs * e.delta.denom() <= (e.delta.numer() * BigInt::from(e.q)) << 64usize
}

fn count_hits(k: u64, entries: &[McEntry], reduced: bool) -> u32 {
    const EPS: f64 = 1e-9;
    let x = k as f64 / 18446744073709551616.0;
    let mut hits = 0;
    for e in entries {
        let xq = x * e.q as f64;
        let near = xq.round();
        let d = (xq - near).abs();
        if d > e.q_delta + EPS {
            continue;
        }
        let fl = xq.floor() as u64;
        let inside = [fl, fl + 1].into_iter().any(|a| {
            if a > e.q || (reduced && a.gcd(&e.q) != 1) {
                return false;
            }
            let da = (xq - a as f64).abs();
            if da < e.q_delta - EPS {
                true
            } else if da > e.q_delta + EPS {
                false
            } else {
                exact_within(k, a, e)
            }
        });
        if inside {
            hits += 1;
        }
    }
    hits
}

/// Samples `x = k/2^64` with `k` drawn from a per-sample stream and counts the
/// sets `A_q` (or `A_q*`) of the support containing `x`.
pub fn monte_carlo_counts(delta: &DeltaSequence, reduced: bool, samples: u64, seed: u64) -> Result<MonteCarloReport> {
    if samples == 0 {
        return invalid("at least one sample is required");
    }
    if let Some(q) = delta.saturated().first() {
        return Err(saturation_error(*q, &delta.get(*q)));
    }
    let fz = Factorizer::for_qmax(delta.qmax())?;
    let entries: Vec<McEntry> = delta
        .entries()
        .map(|(q, v)| McEntry { q, q_delta: certified::to_f64(&(v * big(q))), delta: v.clone() })
        .collect();
    let expected: BigRational = delta
        .entries()
        .map(|(q, v)| {
            let phi = if reduced { fz.totient(q) } else { BigUint::zero() };
            formula_measure(q, &phi, v, reduced)
        })
        .sum();
    let counts: Vec<u32> = (0..samples)
        .into_par_iter()
        .map(|i| count_hits(sample_point(seed, i), &entries, reduced))
        .collect();
    let n = samples as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = if samples > 1 {
        counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let stddev = var.sqrt();
    let std_error = stddev / n.sqrt();
    let expected_f64 = certified::to_f64(&expected);
    let diff = mean - expected_f64;
    let z_score = if std_error > 0.0 { diff / std_error } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut histogram = vec![0u64; max + 1];
    for &c in &counts {
        histogram[c as usize] += 1;
    }
    Ok(MonteCarloReport {
        samples,
        seed,
        reduced,
        support: entries.len(),
        mean,
        stddev,
        std_error,
        expected,
        expected_f64,
        z_score,
        within_3_sigma: diff.abs() <= 3.0 * std_error,
        histogram,
    })
}

/// One row of a `(q, Delta_q, meas)` table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasureRow {
    pub q: u64,
    pub delta: BigRational,
    pub meas: BigRational,
}

/// `meas(A_q)` or `meas(A_q*)` for every `q` in the support.
pub fn measure_table(delta: &DeltaSequence, reduced: bool) -> Result<Vec<MeasureRow>> {
    let fz = Factorizer::for_qmax(delta.qmax())?;
    delta
        .entries()
        .map(|(q, v)| {
            if saturated(q, v) {
                return Err(saturation_error(q, v));
            }
            let phi = if reduced { fz.totient(q) } else { BigUint::zero() };
            Ok(MeasureRow { q, delta: v.clone(), meas: formula_measure(q, &phi, v, reduced) })
        })
        .collect()
}

pub fn write_measure_csv(rows: &[MeasureRow], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "q,delta,delta_f64,meas,meas_f64")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:e},{},{:e}",
            r.q,
            rat_string(&r.delta),
            certified::to_f64(&r.delta),
            rat_string(&r.meas),
            certified::to_f64(&r.meas)
        )?;
    }
    Ok(())
}

pub fn write_counterexample_csv(levels: &[CounterexampleLevel], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "j,p_j,q_j,size,rational_part,product,identity_holds,level_sum_lo,level_sum_hi,partial_sum_lo,partial_sum_hi,saturated")?;
    for l in levels {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{:e},{:e},{:e},{:e},{}",
            l.j,
            l.p_j,
            l.q_j,
            l.size,
            rat_string(&l.rational_part),
            rat_string(&l.product),
            l.identity_holds,
            l.level_sum.lo_f64(),
            l.level_sum.hi_f64(),
            l.partial_sum.lo_f64(),
            l.partial_sum.hi_f64(),
            l.saturated
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        rat(n, d)
    }

    fn parts(u: &IntervalUnion) -> Vec<(BigRational, BigRational)> {
        u.parts().iter().map(|p| (p.lo().clone(), p.hi().clone())).collect()
    }

    #[test]
    fn build_aq_examples() {
        let a = build_aq(4, &r(1, 8), true).unwrap();
        assert_eq!(parts(&a), vec![(r(1, 8), r(3, 8)), (r(5, 8), r(7, 8))]);
        assert_eq!(intervals::measure(&a), r(1, 2));
        let b = build_aq(1, &r(1, 8), true).unwrap();
        assert_eq!(parts(&b), vec![(r(0, 1), r(1, 8)), (r(7, 8), r(1, 1))]);
        assert_eq!(intervals::measure(&b), r(1, 4));
        assert!(build_aq(2, &r(0, 1), true).unwrap().is_empty());
        assert!(matches!(build_aq(3, &r(1, 5), false), Err(Error::Saturation { q: 3, .. })));
    }

    #[test]
    fn nesting_of_non_reduced_sets() {
        let d = r(1, 40);
        let a3 = build_aq(3, &d, false).unwrap();
        let a15 = build_aq(15, &d, false).unwrap();
        assert!(a3.is_subset(&a15));
    }

    #[test]
    fn uniform_support_examples() {
        let s: Vec<u64> = (10..=20).collect();
        let d = delta_uniform_support(&s, &int(10)).unwrap();
        assert_eq!(d.get(10), r(1, 100));
        assert_eq!(d.get(9), r(0, 1));
        assert_eq!(delta_uniform_support(&[], &int(10)).unwrap().support_len(), 0);
        let edge = delta_uniform_support(&[7], &int(2)).unwrap();
        assert_eq!(edge.get(7), r(1, 14));
        assert!(!edge.is_saturated(7));
        assert!(matches!(delta_uniform_support(&[7], &r(3, 2)), Err(Error::Saturation { .. })));
    }

    #[test]
    fn khinchin_examples() {
        let d1 = delta_khinchin(&int(1), 200).unwrap();
        assert_eq!(d1.get(1), r(0, 1));
        assert_eq!(d1.get(2), r(1, 4));
        assert!(d1.clipped().contains(&2));
        for q in 3..200 {
            assert!(d1.get(q + 1) < d1.get(q));
            let e = d1.enclosure(q);
            let f = 1.0 / ((q * q) as f64 * (q as f64).ln());
            assert!((e.mid_f64() - f).abs() <= 1e-12 * f, "q = {q}");
        }
        let d2 = delta_khinchin(&int(2), 200).unwrap();
        assert!(d2.get(100) < d1.get(100));
        assert!(delta_khinchin(&int(0), 10).is_err());
        let half = delta_khinchin(&r(1, 2), 50).unwrap();
        let f = 1.0 / (49.0 * 49.0 * (49f64).ln().sqrt());
        assert!((half.enclosure(49).mid_f64() - f).abs() <= 1e-12 * f);
    }

    #[test]
    fn counterexample_first_level() {
        let table = numtheory::sieve(100).unwrap();
        let ce = delta_counterexample(2, &table).unwrap();
        let support: Vec<u64> = ce.delta.support().collect();
        assert_eq!(support, vec![3, 6]);
        let l = &ce.levels[0];
        assert_eq!(l.rational_part, r(3, 2));
        assert!(l.identity_holds);
        let ln2 = std::f64::consts::LN_2;
        let expect = 9.0 / (12.0 * ln2 * ln2);
        assert!((l.level_sum.mid_f64() - expect).abs() < 1e-12);
        assert!(delta_counterexample(1, &table).is_err());
    }

    #[test]
    fn counterexample_levels_are_disjoint() {
        let table = numtheory::sieve(100).unwrap();
        let ce = delta_counterexample(6, &table).unwrap();
        let total: usize = ce.levels.iter().map(|l| l.size).sum();
        assert_eq!(ce.delta.support_len(), total);
    }

    #[test]
    fn pair_examples() {
        let table = numtheory::sieve(1000).unwrap();
        let d = DeltaSequence::new(10, "t", [(2, r(1, 100)), (3, r(1, 100))]).unwrap();
        let p = pair_data(2, 3, &d, &table, 64).unwrap();
        assert_eq!(p.m, r(3, 25));
        assert!(p.exact_meas.is_zero());
        let d = DeltaSequence::new(10, "t", [(2, r(1, 16)), (4, r(1, 16))]).unwrap();
        let p = pair_data(2, 4, &d, &table, 64).unwrap();
        assert_eq!(p.m, r(1, 2));
        assert!(p.exact_meas.is_zero());
        // Delta = 1/8 saturates q = 5; the largest admissible common radius is 1/10.
        let d = DeltaSequence::new(10, "t", [(3, r(1, 8)), (5, r(1, 8))]).unwrap();
        assert!(matches!(pair_data(3, 5, &d, &table, 64), Err(Error::Saturation { q: 5, .. })));
        let d = DeltaSequence::new(10, "t", [(3, r(1, 10)), (5, r(1, 10))]).unwrap();
        let p = pair_data(3, 5, &d, &table, 64).unwrap();
        assert_eq!(p.m, r(3, 1));
        assert_eq!(p.exact_meas, pair_intersection_measure_direct(3, &r(1, 10), 5, &r(1, 10)).unwrap());
        assert!(p.exact_meas.is_positive());
        assert!(p.ratio().is_some());
    }

    #[test]
    fn fast_pair_matches_direct() {
        for q in 2..30u64 {
            for rr in q + 1..30 {
                let dq = r(1, 3 * q as i64 + 1);
                let dr = r(2, 7 * rr as i64);
                let fast = pair_intersection_measure(q, &dq, rr, &dr).unwrap();
                let slow = pair_intersection_measure_direct(q, &dq, rr, &dr).unwrap();
                assert_eq!(fast, slow, "pair ({q}, {rr})");
            }
        }
    }

    #[test]
    fn cs_examples() {
        assert_eq!(cs_lower_bound(&[r(3, 10)], &[vec![r(3, 10)]]).unwrap(), r(3, 10));
        let m = vec![r(3, 10), r(3, 10)];
        let disjoint = vec![vec![r(3, 10), r(0, 1)], vec![r(0, 1), r(3, 10)]];
        assert_eq!(cs_lower_bound(&m, &disjoint).unwrap(), r(3, 5));
        let same = vec![vec![r(3, 10), r(3, 10)], vec![r(3, 10), r(3, 10)]];
        assert_eq!(cs_lower_bound(&m, &same).unwrap(), r(3, 10));
        assert_eq!(cs_lower_bound(&[r(0, 1)], &[vec![r(0, 1)]]).unwrap(), r(0, 1));
    }

    #[test]
    fn window_examples() {
        let d = DeltaSequence::new(50, "half", (1..=50).map(|q| (q, r(1, 2 * q as i64)))).unwrap();
        assert_eq!(find_window(&d, 2).unwrap(), Some((2, 3)));
        let rep = window_report(&d, 2, 3).unwrap();
        assert_eq!(rep.sum_meas, r(7, 6));
        assert!(rep.cs_bound <= rep.union_meas);
        assert!(find_window(&DeltaSequence::zero(50, "z").unwrap(), 2).unwrap().is_none());
        let d = DeltaSequence::new(10, "t", [(2, r(1, 4)), (5, r(1, 10))]).unwrap();
        assert_eq!(find_window(&d, 2).unwrap(), Some((2, 5)));
        assert_eq!(window_report(&d, 2, 5).unwrap().sum_meas, r(13, 10));
        let single = window_report(&d, 5, 5).unwrap();
        assert_eq!(single.union_meas, single.sum_meas);
        assert_eq!(single.cs_bound, single.sum_meas);
    }

    #[test]
    fn catlin_examples() {
        let d = DeltaSequence::new(30, "sq", (1..=30).map(|q| (q, r(1, (q * q) as i64)))).unwrap();
        let c = catlin_transform(&d).unwrap();
        assert_eq!(c.values, d.values);
        let even = DeltaSequence::new(30, "even", (1..=15).map(|h| (2 * h, r(1, (4 * h * h) as i64)))).unwrap();
        assert_eq!(catlin_transform(&even).unwrap().get(3), r(1, 36));
        let z = DeltaSequence::zero(30, "z").unwrap();
        assert_eq!(catlin_transform(&z).unwrap().support_len(), 0);
    }

    #[test]
    fn monte_carlo_single_set() {
        let d = DeltaSequence::new(2, "one", [(2, r(1, 4))]).unwrap();
        let rep = monte_carlo_counts(&d, true, 4000, 7).unwrap();
        assert_eq!(rep.expected, r(1, 2));
        assert!(rep.within_3_sigma, "{rep:?}");
        let z = DeltaSequence::zero(10, "z").unwrap();
        let rep = monte_carlo_counts(&z, false, 100, 1).unwrap();
        assert_eq!(rep.histogram, vec![100]);
    }

    #[test]
    fn monte_carlo_hits_match_exact_membership() {
        let d = delta_khinchin(&int(1), 60).unwrap();
        let entries: Vec<McEntry> = d
            .entries()
            .map(|(q, v)| McEntry { q, q_delta: certified::to_f64(&(v * big(q))), delta: v.clone() })
            .collect();
        let sets: Vec<IntervalUnion> = d.entries().map(|(q, v)| build_aq(q, v, true).unwrap()).collect();
        for i in 0..300 {
            let k = sample_point(3, i);
            let x = BigRational::new(BigInt::from(k), BigInt::one() << 64usize);
            let exact = sets.iter().filter(|s| s.contains(&x)).count() as u32;
            assert_eq!(count_hits(k, &entries, true), exact);
        }
    }

    #[test]
    fn delta_json_round_trip() {
        let d = delta_khinchin(&int(1), 20).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        let back: DeltaSequence = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["values"][0][0], 2);
    }

    #[test]
    fn measure_csv_has_header() {
        let d = delta_uniform_support(&[2, 3], &int(4)).unwrap();
        let rows = measure_table(&d, true).unwrap();
        let mut buf = Vec::new();
        write_measure_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("q,delta,"));
        assert_eq!(text.lines().count(), 3);
        assert!(!text.contains('\r'));
    }
}
