//! Exact number-theoretic primitives: sieving, factorization, Euler's totient,
//! prime reciprocal sums and the statistics used in the correlation analysis.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::certified::{self, int, rat, Enclosure};
use crate::error::{invalid, Error, Result};

/// Default cap on the sieve limit (the table stores one `u32` per integer).
pub const DEFAULT_SIEVE_BUDGET: u64 = 50_000_000;

/// Primes up to `limit` together with a smallest-prime-factor table.
#[derive(Clone, Debug)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
    spf: Vec<u32>,
}

impl PrimeTable {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Primes `<= x` (clamped to the table).
    pub fn primes_up_to(&self, x: u64) -> &[u64] {
        let end = self.primes.partition_point(|&p| p <= x);
        &self.primes[..end]
    }

    /// Smallest prime factor of `n` for `2 <= n <= limit`.
    pub fn spf(&self, n: u64) -> Option<u64> {
        if n < 2 || n > self.limit {
            None
        } else {
            Some(self.spf[n as usize] as u64)
        }
    }

    pub fn is_prime(&self, n: u64) -> Option<bool> {
        self.spf(n).map(|p| p == n).or(if n < 2 { Some(false) } else { None })
    }

    /// The `i`-th prime, 1-based.
    pub fn nth_prime(&self, i: usize) -> Option<u64> {
        if i == 0 {
            None
        } else {
            self.primes.get(i - 1).copied()
        }
    }
}

/// Sieve with the default memory budget.
pub fn sieve(limit: u64) -> Result<PrimeTable> {
    sieve_with_budget(limit, DEFAULT_SIEVE_BUDGET)
}

/// Linear sieve of smallest prime factors up to `limit`.
pub fn sieve_with_budget(limit: u64, budget: u64) -> Result<PrimeTable> {
    if limit < 2 {
        return invalid(format!("sieve limit must be at least 2, got {limit}"));
    }
    if limit > budget || limit > u32::MAX as u64 {
        return Err(Error::ResourceLimit(format!(
            "sieve limit {limit} exceeds the budget of {budget}"
        )));
    }
    let n = limit as usize;
    let mut spf = vec![0u32; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if spf[i] == 0 {
            spf[i] = i as u32;
            primes.push(i as u64);
        }
        let si = spf[i] as u64;
        for &p in &primes {
            let m = p * i as u64;
            if p > si || m > limit {
                break;
            }
            spf[m as usize] = p as u32;
        }
    }
    Ok(PrimeTable { limit, primes, spf })
}

/// A positive integer together with its prime factorization.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactoredInt {
    value: BigUint,
    factors: Vec<(u64, u32)>,
}

impl fmt::Debug for FactoredInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)?;
        if !self.factors.is_empty() {
            let parts: Vec<String> = self
                .factors
                .iter()
                .map(|&(p, e)| if e == 1 { p.to_string() } else { format!("{p}^{e}") })
                .collect();
            write!(f, "={}", parts.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Display for FactoredInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl FactoredInt {
    pub fn one() -> Self {
        FactoredInt { value: BigUint::one(), factors: Vec::new() }
    }

    /// Builds the integer from `(prime, exponent)` pairs with strictly
    /// ascending primes. Primality of the listed bases is trusted.
    pub fn from_factors(factors: Vec<(u64, u32)>) -> Result<Self> {
        let mut value = BigUint::one();
        let mut prev = 1u64;
        for &(p, e) in &factors {
            if p < 2 || p <= prev {
                return invalid(format!("factor list not strictly ascending primes at {p}"));
            }
            if e == 0 {
                return invalid(format!("zero exponent for prime {p}"));
            }
            value *= BigUint::from(p).pow(e);
            prev = p;
        }
        Ok(FactoredInt { value, factors })
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.value.to_u64()
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn exponent_of(&self, p: u64) -> u32 {
        match self.factors.binary_search_by_key(&p, |&(q, _)| q) {
            Ok(i) => self.factors[i].1,
            Err(_) => 0,
        }
    }

    pub fn is_divisible_by_prime(&self, p: u64) -> bool {
        self.exponent_of(p) > 0
    }

    pub fn radical(&self) -> BigUint {
        self.factors.iter().map(|&(p, _)| BigUint::from(p)).product()
    }

    /// Greatest common divisor, computed on the factorizations.
    pub fn gcd(&self, other: &FactoredInt) -> FactoredInt {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() && j < other.factors.len() {
            let (p, e) = self.factors[i];
            let (q, f) = other.factors[j];
            match p.cmp(&q) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push((p, e.min(f)));
                    i += 1;
                    j += 1;
                }
            }
        }
        FactoredInt::from_factors(out).expect("gcd of valid factorizations")
    }

    pub fn mul(&self, other: &FactoredInt) -> FactoredInt {
        let mut map: std::collections::BTreeMap<u64, u32> = self.factors.iter().copied().collect();
        for &(p, e) in &other.factors {
            *map.entry(p).or_insert(0) += e;
        }
        FactoredInt::from_factors(map.into_iter().collect()).expect("product of valid factorizations")
    }

    /// Exact quotient when `d` divides `self`.
    pub fn div_exact(&self, d: &FactoredInt) -> Option<FactoredInt> {
        let mut out = Vec::new();
        for &(p, e) in &self.factors {
            let f = d.exponent_of(p);
            if f > e {
                return None;
            }
            if e > f {
                out.push((p, e - f));
            }
        }
        if d.factors.iter().any(|&(p, _)| self.exponent_of(p) == 0) {
            return None;
        }
        Some(FactoredInt::from_factors(out).expect("quotient of valid factorizations"))
    }
}

#[derive(Serialize, Deserialize)]
struct FactoredIntRepr {
    value: String,
    factors: Vec<(u64, u32)>,
}

impl Serialize for FactoredInt {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FactoredIntRepr { value: self.value.to_string(), factors: self.factors.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FactoredInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FactoredIntRepr::deserialize(d)?;
        let f = FactoredInt::from_factors(repr.factors).map_err(D::Error::custom)?;
        if f.value.to_string() != repr.value {
            return Err(D::Error::custom("factorization does not match value"));
        }
        Ok(f)
    }
}

/// Factor `n` using the smallest-prime-factor table (for `n <= limit`) or
/// trial division by the table's primes (for `n <= limit^2`).
pub fn factor(n: u64, table: &PrimeTable) -> Result<FactoredInt> {
    if n == 0 {
        return invalid("cannot factor 0");
    }
    let limit = table.limit as u128;
    if n as u128 > limit * limit {
        return invalid(format!("{n} exceeds the square of the sieve limit {}", table.limit));
    }
    let mut factors: Vec<(u64, u32)> = Vec::new();
    let mut push = |p: u64| match factors.last_mut() {
        Some((q, e)) if *q == p => *e += 1,
        _ => factors.push((p, 1)),
    };
    let mut m = n;
    if m <= table.limit {
        while m > 1 {
            let p = table.spf[m as usize] as u64;
            push(p);
            m /= p;
        }
    } else {
        for &p in &table.primes {
            if p * p > m {
                break;
            }
            while m % p == 0 {
                push(p);
                m /= p;
            }
        }
        if m > 1 {
            push(m);
        }
    }
    Ok(FactoredInt { value: BigUint::from(n), factors })
}

/// Largest input accepted by [`factor_u64`].
pub const TRIAL_DIVISION_MAX: u64 = 1_000_000_000_000;

/// Factor `n <= TRIAL_DIVISION_MAX` by trial division, without a sieve.
pub fn factor_u64(n: u64) -> Result<FactoredInt> {
    if n == 0 {
        return invalid("cannot factor 0");
    }
    if n > TRIAL_DIVISION_MAX {
        return Err(Error::ResourceLimit(format!("{n} exceeds the trial-division bound {TRIAL_DIVISION_MAX}")));
    }
    let mut factors: Vec<(u64, u32)> = Vec::new();
    let mut m = n;
    let mut d = 2u64;
    while d * d <= m {
        if m % d == 0 {
            let mut e = 0;
            while m % d == 0 {
                m /= d;
                e += 1;
            }
            factors.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if m > 1 {
        factors.push((m, 1));
    }
    Ok(FactoredInt { value: BigUint::from(n), factors })
}

/// Euler's totient `prod p^(e-1) (p-1)`.
pub fn totient(n: &FactoredInt) -> BigUint {
    n.factors
        .iter()
        .map(|&(p, e)| BigUint::from(p).pow(e - 1) * BigUint::from(p - 1))
        .product()
}

/// `phi(n)/n = prod_{p|n} (1 - 1/p)`.
pub fn phi_ratio(n: &FactoredInt) -> BigRational {
    let mut num = num_bigint::BigInt::one();
    let mut den = num_bigint::BigInt::one();
    for p in n.primes() {
        num *= p - 1;
        den *= p;
    }
    BigRational::new(num, den)
}

fn sum_reciprocals(primes: impl Iterator<Item = u64>) -> BigRational {
    primes.fold(BigRational::zero(), |acc, p| acc + rat(1, p as i64))
}

/// `sum_{p <= t} 1/p`.
pub fn mertens_sum(t: &BigRational, table: &PrimeTable) -> Result<BigRational> {
    if t > &int(table.limit) {
        return invalid(format!("mertens_sum: t exceeds the table limit {}", table.limit));
    }
    if t < &int(2) {
        return Ok(BigRational::zero());
    }
    let tf = t.floor().to_integer().to_u64().expect("bounded by table limit");
    Ok(sum_reciprocals(table.primes_up_to(tf).iter().copied()))
}

/// `lambda_t(q) = sum_{p | q, p > t} 1/p`.
pub fn lambda_t(q: &FactoredInt, t: &BigRational) -> BigRational {
    sum_reciprocals(q.primes().filter(|&p| &int(p) > t))
}

/// Which prime set a correlation sum ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationVariant {
    /// Primes dividing `qr/gcd(q,r)`, i.e. every prime of `lcm(q,r)`.
    Gcd,
    /// Primes dividing `qr/gcd(q,r)^2`, i.e. primes whose exponents in `q` and `r` differ.
    GcdSquared,
}

/// The primes selected by `variant` for the pair `(q, r)`, ascending.
pub fn correlation_primes(q: &FactoredInt, r: &FactoredInt, variant: CorrelationVariant) -> Vec<u64> {
    let mut all: Vec<u64> = q.primes().chain(r.primes()).collect();
    all.sort_unstable();
    all.dedup();
    match variant {
        CorrelationVariant::Gcd => all,
        CorrelationVariant::GcdSquared => all
            .into_iter()
            .filter(|&p| q.exponent_of(p) != r.exponent_of(p))
            .collect(),
    }
}

/// `sum 1/p` over primes `p > t` dividing `qr/gcd(q,r)` or `qr/gcd(q,r)^2`.
pub fn correlation_prime_sum(
    q: &FactoredInt,
    r: &FactoredInt,
    t: &BigRational,
    variant: CorrelationVariant,
) -> BigRational {
    sum_reciprocals(correlation_primes(q, r, variant).into_iter().filter(|&p| &int(p) > t))
}

/// Product of the first `j` primes.
pub fn primorial(j: usize, table: &PrimeTable) -> Result<BigUint> {
    if j > table.primes.len() {
        return invalid(format!(
            "primorial({j}) needs {j} primes but the table has {}",
            table.primes.len()
        ));
    }
    Ok(table.primes[..j].iter().map(|&p| BigUint::from(p)).product())
}

/// `sum_{n <= x} prod_{p | n} a_p` with weights in `[0, cap]`.
pub fn sieve_weight_sum(
    x: u64,
    weight: impl Fn(u64) -> BigRational,
    cap: &BigRational,
    table: &PrimeTable,
) -> Result<BigRational> {
    if x > table.limit {
        return invalid(format!("sieve_weight_sum: x = {x} exceeds the table limit"));
    }
    let mut weights: HashMap<u64, BigRational> = HashMap::new();
    for &p in table.primes_up_to(x) {
        let a = weight(p);
        if a.is_negative() || &a > cap {
            return invalid(format!("weight a_{p} outside [0, {cap}]"));
        }
        weights.insert(p, a);
    }
    // Products are grouped by value so repeated weights cost one addition each.
    let mut tally: HashMap<BigRational, u64> = HashMap::new();
    for n in 1..=x {
        let mut prod = BigRational::one();
        let mut m = n;
        while m > 1 {
            let p = table.spf[m as usize] as u64;
            prod *= &weights[&p];
            while m % p == 0 {
                m /= p;
            }
            if prod.is_zero() {
                break;
            }
        }
        *tally.entry(prod).or_insert(0) += 1;
    }
    Ok(tally.into_iter().map(|(v, c)| v * int(c)).sum())
}

/// Outcome of [`count_lambda_exceeders`].
#[derive(Clone, Debug)]
pub struct LambdaExceeders {
    pub count: u64,
    /// Enclosure of `sum_{q <= x} exp(-threshold*t + t*lambda_t(q))`.
    pub chernoff_bound: Enclosure,
}

/// Counts `q <= x` with `lambda_t(q) > threshold` alongside the exponential
/// moment bound that dominates that count.
pub fn count_lambda_exceeders(
    x: u64,
    t: &BigRational,
    threshold: &BigRational,
    table: &PrimeTable,
    prec: u32,
) -> Result<LambdaExceeders> {
    if x > table.limit {
        return invalid(format!("count_lambda_exceeders: x = {x} exceeds the table limit"));
    }
    let mut count = 0u64;
    let mut by_lambda: HashMap<BigRational, u64> = HashMap::new();
    for q in 1..=x {
        let f = factor(q, table)?;
        let l = lambda_t(&f, t);
        if &l > threshold {
            count += 1;
        }
        *by_lambda.entry(l).or_insert(0) += 1;
    }
    let mut bound = Enclosure::zero();
    for (l, c) in by_lambda {
        let arg = t * (l - threshold);
        let term = certified::exp(&arg, prec).scale(&int(c));
        bound = (&bound + &term).round(prec + 16);
    }
    Ok(LambdaExceeders { count, chernoff_bound: bound })
}

/// Number of prime divisors of `q` in each half-open band `(lo, hi]`.
pub fn prime_factor_band_counts(q: &FactoredInt, bands: &[(BigRational, BigRational)]) -> Result<Vec<usize>> {
    let mut sorted: Vec<&(BigRational, BigRational)> = bands.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    for w in sorted.windows(2) {
        if w[0].1 > w[1].0 {
            return invalid("bands overlap");
        }
    }
    if bands.iter().any(|(lo, hi)| lo > hi) {
        return invalid("band with lo > hi");
    }
    Ok(count_in_bands(q, bands))
}

fn count_in_bands(q: &FactoredInt, bands: &[(BigRational, BigRational)]) -> Vec<usize> {
    bands
        .iter()
        .map(|(lo, hi)| {
            q.primes()
                .filter(|&p| {
                    let p = int(p);
                    &p > lo && &p <= hi
                })
                .count()
        })
        .collect()
}

/// Band edges `(e^(j-1), e^j]` for `j = 1..=jmax` as certified enclosures.
pub fn exponential_bands(jmax: u32, prec: u32) -> Vec<(Enclosure, Enclosure)> {
    (1..=jmax)
        .map(|j| {
            let lo = certified::exp(&int(j as i64 - 1), prec);
            let hi = certified::exp(&int(j as i64), prec);
            (lo, hi)
        })
        .collect()
}

/// Band counts with enclosed edges: each prime is classified using both
/// endpoints of each edge enclosure and must land on the same side of both.
pub fn prime_factor_band_counts_certified(
    q: &FactoredInt,
    bands: &[(Enclosure, Enclosure)],
) -> Result<Vec<usize>> {
    let inner: Vec<(BigRational, BigRational)> =
        bands.iter().map(|(l, h)| (l.hi().clone(), h.lo().clone())).collect();
    let outer: Vec<(BigRational, BigRational)> =
        bands.iter().map(|(l, h)| (l.lo().clone(), h.hi().clone())).collect();
    let a = count_in_bands(q, &inner);
    let b = count_in_bands(q, &outer);
    if a != b {
        return Err(Error::Precision("a prime lies inside a band-edge enclosure".into()));
    }
    Ok(a)
}

/// `prod_{p | q, p > ln q} (1 - 1/p)`, the factor of `phi(q)/q` coming
/// from primes above `ln q`. The comparison `p > ln q` is certified.
pub fn large_prime_phi_factor(q: &FactoredInt, prec: u32) -> Result<BigRational> {
    let qv = BigRational::from_integer(q.value().clone().into());
    let lnq = certified::ln(&qv, prec);
    let mut out = BigRational::one();
    for p in q.primes() {
        match lnq.cmp_rat(&int(p)) {
            Some(std::cmp::Ordering::Less) => out *= rat(p as i64 - 1, p as i64),
            Some(_) => {}
            None => return Err(Error::Precision(format!("cannot decide {p} > ln q"))),
        }
    }
    Ok(out)
}

/// Per-band diagnostics of `#{p | q : e^(j-1) < p <= e^j} <= e^j/j^2 + 1000`.
#[derive(Clone, Debug, Serialize)]
pub struct BandDiagnostic {
    pub j: u32,
    pub count: usize,
    pub bound_lo: f64,
    pub holds: bool,
}

pub fn small_prime_band_diagnostics(q: &FactoredInt, jmax: u32, prec: u32) -> Result<Vec<BandDiagnostic>> {
    let bands = exponential_bands(jmax, prec);
    let counts = prime_factor_band_counts_certified(q, &bands)?;
    Ok(counts
        .into_iter()
        .zip(bands)
        .enumerate()
        .map(|(i, (count, (_, hi)))| {
            let j = i as u32 + 1;
            let bound = hi.scale(&rat(1, (j * j) as i64)).add_rat(&int(1000));
            BandDiagnostic { j, count, bound_lo: bound.lo_f64(), holds: bound.cmp_rat(&int(count as i64)) == Some(std::cmp::Ordering::Greater) }
        })
        .collect())
}
