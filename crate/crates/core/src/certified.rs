//! Certified enclosures of real numbers with exact rational endpoints.
//!
//! Every transcendental quantity in the crate (logarithms, exponentials,
//! fractional powers, the constants `e` and `pi`) is produced as an
//! [`Enclosure`] `[lo, hi]` that provably contains the true value. Kernels
//! work on exact rationals and round outward to dyadic rationals carrying
//! roughly `prec` significant bits, so widths shrink as precision grows.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Mutex;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Working precision (in bits) used when callers do not ask for more.
pub const DEFAULT_PRECISION: u32 = 128;

/// Upper bound for automatic precision escalation.
pub const MAX_PRECISION: u32 = 1 << 14;

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(n.into())
}

/// Approximate `f64` value of an exact rational (for reporting only).
pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Very large or tiny magnitudes: fall back to a log-scaled estimate.
        let sign = if x.is_negative() { -1.0 } else { 1.0 };
        let lg = log2_floor(&x.abs()) as f64;
        sign * lg.exp2()
    })
}

/// `floor(log2 |x|)` for `x != 0`.
pub fn log2_floor(x: &BigRational) -> i64 {
    debug_assert!(!x.is_zero());
    let n = x.numer().abs();
    let d = x.denom();
    let mut k = n.bits() as i64 - d.bits() as i64;
    // 2^k <= |x| < 2^(k+1) after at most one correction step.
    if ge_pow2(&n, d, k) {
        if ge_pow2(&n, d, k + 1) {
            k += 1;
        }
    } else {
        k -= 1;
    }
    k
}

/// `n / d >= 2^k`
fn ge_pow2(n: &BigInt, d: &BigInt, k: i64) -> bool {
    if k >= 0 {
        n >= &(d << k as usize)
    } else {
        (n << (-k) as usize) >= *d
    }
}

/// `floor(x * 2^k)`
fn floor_scaled(x: &BigRational, k: i64) -> BigInt {
    if k >= 0 {
        (x.numer() << k as usize).div_floor(x.denom())
    } else {
        x.numer().div_floor(&(x.denom() << (-k) as usize))
    }
}

/// `ceil(x * 2^k)`
fn ceil_scaled(x: &BigRational, k: i64) -> BigInt {
    -floor_scaled(&-x, k)
}

fn from_scaled(m: BigInt, k: i64) -> BigRational {
    if k >= 0 {
        // Cancel common factors of two directly; the result is already reduced.
        let tz = m.trailing_zeros().unwrap_or(0).min(k as u64);
        BigRational::new_raw(m >> tz as usize, BigInt::one() << (k as u64 - tz) as usize)
    } else {
        BigRational::from_integer(m << (-k) as usize)
    }
}

/// Largest dyadic rational `<= x` with about `prec` significant bits.
pub fn round_down(x: &BigRational, prec: u32) -> BigRational {
    if x.is_zero() || x.denom().is_one() && x.numer().bits() <= prec as u64 {
        return x.clone();
    }
    let k = prec as i64 - log2_floor(x);
    from_scaled(floor_scaled(x, k), k)
}

/// Smallest dyadic rational `>= x` with about `prec` significant bits.
pub fn round_up(x: &BigRational, prec: u32) -> BigRational {
    -round_down(&-x, prec)
}

/// `k` with `d = 2^k`, for a positive denominator.
fn pow2_exp(d: &BigInt) -> Option<u64> {
    let tz = d.trailing_zeros()?;
    (d.bits() == tz + 1).then_some(tz)
}

/// `n / 2^k` in lowest terms.
fn dyadic(n: BigInt, k: u64) -> BigRational {
    let tz = n.trailing_zeros().unwrap_or(k).min(k);
    BigRational::new_raw(n >> tz as usize, BigInt::one() << (k - tz) as usize)
}

/// Sum with a shift-only path for dyadic operands.
pub fn add_q(a: &BigRational, b: &BigRational) -> BigRational {
    match (pow2_exp(a.denom()), pow2_exp(b.denom())) {
        (Some(ka), Some(kb)) => {
            let k = ka.max(kb);
            dyadic((a.numer() << (k - ka) as usize) + (b.numer() << (k - kb) as usize), k)
        }
        _ => a + b,
    }
}

pub fn sub_q(a: &BigRational, b: &BigRational) -> BigRational {
    match (pow2_exp(a.denom()), pow2_exp(b.denom())) {
        (Some(ka), Some(kb)) => {
            let k = ka.max(kb);
            dyadic((a.numer() << (k - ka) as usize) - (b.numer() << (k - kb) as usize), k)
        }
        _ => a - b,
    }
}

/// Product with a gcd-free path for dyadic operands.
pub fn mul_q(a: &BigRational, b: &BigRational) -> BigRational {
    match (pow2_exp(a.denom()), pow2_exp(b.denom())) {
        (Some(ka), Some(kb)) => dyadic(a.numer() * b.numer(), ka + kb),
        _ => a * b,
    }
}

/// Ordering by cross multiplication. `Ord` on `BigRational` expands
/// continued fractions, which is slow for nearly equal arguments.
pub fn cmp_q(a: &BigRational, b: &BigRational) -> Ordering {
    if a.denom() == b.denom() {
        return a.numer().cmp(b.numer());
    }
    (a.numer() * b.denom()).cmp(&(b.numer() * a.denom()))
}

fn le(a: &BigRational, b: &BigRational) -> bool {
    cmp_q(a, b) != Ordering::Greater
}

/// Equality of reduced rationals without going through `Ord`.
pub fn eq_q(a: &BigRational, b: &BigRational) -> bool {
    a.numer() == b.numer() && a.denom() == b.denom()
}

fn lt(a: &BigRational, b: &BigRational) -> bool {
    cmp_q(a, b) == Ordering::Less
}

/// A closed interval `[lo, hi]` known to contain some real number.
#[derive(Clone, Eq, Hash)]
pub struct Enclosure {
    lo: BigRational,
    hi: BigRational,
}

impl PartialEq for Enclosure {
    fn eq(&self, other: &Self) -> bool {
        eq_q(&self.lo, &other.lo) && eq_q(&self.hi, &other.hi)
    }
}

impl fmt::Debug for Enclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", to_f64(&self.lo), to_f64(&self.hi))
    }
}

impl fmt::Display for Enclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.17e}, {:.17e}]", to_f64(&self.lo), to_f64(&self.hi))
    }
}

impl Enclosure {
    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        assert!(le(&lo, &hi), "enclosure with lo > hi");
        Enclosure { lo, hi }
    }

    pub fn exact(x: BigRational) -> Self {
        Enclosure { lo: x.clone(), hi: x }
    }

    pub fn from_int(n: i64) -> Self {
        Self::exact(int(n))
    }

    pub fn zero() -> Self {
        Self::from_int(0)
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn lo(&self) -> &BigRational {
        &self.lo
    }

    pub fn hi(&self) -> &BigRational {
        &self.hi
    }

    pub fn into_bounds(self) -> (BigRational, BigRational) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> BigRational {
        sub_q(&self.hi, &self.lo)
    }

    pub fn is_exact(&self) -> bool {
        eq_q(&self.lo, &self.hi)
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        le(&self.lo, x) && le(x, &self.hi)
    }

    pub fn overlaps(&self, other: &Enclosure) -> bool {
        le(&self.lo, &other.hi) && le(&other.lo, &self.hi)
    }

    /// Enclosure of the union (convex hull) of two enclosures.
    pub fn hull(&self, other: &Enclosure) -> Enclosure {
        Enclosure {
            lo: if le(&self.lo, &other.lo) { self.lo.clone() } else { other.lo.clone() },
            hi: if le(&other.hi, &self.hi) { self.hi.clone() } else { other.hi.clone() },
        }
    }

    pub fn mid_f64(&self) -> f64 {
        to_f64(&(add_q(&self.lo, &self.hi) / int(2)))
    }

    pub fn lo_f64(&self) -> f64 {
        to_f64(&self.lo)
    }

    pub fn hi_f64(&self) -> f64 {
        to_f64(&self.hi)
    }

    /// Outward rounding to dyadic endpoints with about `prec` bits.
    pub fn round(&self, prec: u32) -> Enclosure {
        Enclosure {
            lo: round_down(&self.lo, prec),
            hi: round_up(&self.hi, prec),
        }
    }

    pub fn abs_max(&self) -> BigRational {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn scale(&self, r: &BigRational) -> Enclosure {
        if r.is_negative() {
            Enclosure { lo: mul_q(&self.hi, r), hi: mul_q(&self.lo, r) }
        } else {
            Enclosure { lo: mul_q(&self.lo, r), hi: mul_q(&self.hi, r) }
        }
    }

    pub fn add_rat(&self, r: &BigRational) -> Enclosure {
        Enclosure { lo: add_q(&self.lo, r), hi: add_q(&self.hi, r) }
    }

    /// `1/x`; panics if the enclosure contains zero.
    pub fn recip(&self) -> Enclosure {
        assert!(
            self.lo.is_positive() || self.hi.is_negative(),
            "reciprocal of an enclosure containing zero"
        );
        Enclosure { lo: self.hi.recip(), hi: self.lo.recip() }
    }

    pub fn div(&self, other: &Enclosure) -> Enclosure {
        self * &other.recip()
    }

    /// Integer power with outward rounding after each multiplication.
    pub fn powi(&self, n: u32, prec: u32) -> Enclosure {
        let mut result = Enclosure::one();
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = (&result * &base).round(prec);
            }
            e >>= 1;
            if e > 0 {
                base = (&base * &base).round(prec);
            }
        }
        if n % 2 == 0 && self.lo.is_negative() && self.hi.is_positive() {
            // Even power of an interval straddling zero.
            let hi = result.hi.clone();
            result = Enclosure { lo: BigRational::zero(), hi };
        }
        result
    }

    /// Ordering against a rational when decidable from the enclosure alone.
    pub fn cmp_rat(&self, r: &BigRational) -> Option<Ordering> {
        if lt(&self.hi, r) {
            Some(Ordering::Less)
        } else if lt(r, &self.lo) {
            Some(Ordering::Greater)
        } else if self.is_exact() {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// Ordering against another enclosure when the intervals are disjoint
    /// (or both are the same exact point).
    pub fn cmp_enc(&self, other: &Enclosure) -> Option<Ordering> {
        if lt(&self.hi, &other.lo) {
            Some(Ordering::Less)
        } else if lt(&other.hi, &self.lo) {
            Some(Ordering::Greater)
        } else if self.is_exact() && other.is_exact() && eq_q(&self.lo, &other.lo) {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// `self >= other` is certain.
    pub fn certainly_ge(&self, other: &Enclosure) -> bool {
        le(&other.hi, &self.lo)
    }

    /// `self < other` is certain.
    pub fn certainly_lt(&self, other: &Enclosure) -> bool {
        lt(&self.hi, &other.lo)
    }
}

impl Add for &Enclosure {
    type Output = Enclosure;
    fn add(self, o: &Enclosure) -> Enclosure {
        Enclosure { lo: add_q(&self.lo, &o.lo), hi: add_q(&self.hi, &o.hi) }
    }
}

impl Sub for &Enclosure {
    type Output = Enclosure;
    fn sub(self, o: &Enclosure) -> Enclosure {
        Enclosure { lo: sub_q(&self.lo, &o.hi), hi: sub_q(&self.hi, &o.lo) }
    }
}

impl Mul for &Enclosure {
    type Output = Enclosure;
    fn mul(self, o: &Enclosure) -> Enclosure {
        if !self.lo.is_negative() && !o.lo.is_negative() {
            return Enclosure { lo: mul_q(&self.lo, &o.lo), hi: mul_q(&self.hi, &o.hi) };
        }
        let c = [mul_q(&self.lo, &o.lo), mul_q(&self.lo, &o.hi), mul_q(&self.hi, &o.lo), mul_q(&self.hi, &o.hi)];
        let lo = c.iter().min_by(|a, b| cmp_q(a, b)).unwrap().clone();
        let hi = c.iter().max_by(|a, b| cmp_q(a, b)).unwrap().clone();
        Enclosure { lo, hi }
    }
}

impl Neg for &Enclosure {
    type Output = Enclosure;
    fn neg(self) -> Enclosure {
        Enclosure { lo: -&self.hi, hi: -&self.lo }
    }
}

impl Add for Enclosure {
    type Output = Enclosure;
    fn add(self, o: Enclosure) -> Enclosure {
        &self + &o
    }
}

impl Mul for Enclosure {
    type Output = Enclosure;
    fn mul(self, o: Enclosure) -> Enclosure {
        &self * &o
    }
}

/// Guard bits added to every kernel's internal precision.
const GUARD: u32 = 24;

/// `atanh(z)` for `|z| <= 1/2` by its odd power series, summed in
/// fixed point with `2^-w` units.
fn atanh_series(z: &BigRational, prec: u32) -> Enclosure {
    if z.is_zero() {
        return Enclosure::zero();
    }
    let w = (prec + GUARD) as usize;
    let a = z.numer().abs();
    let b = z.denom();
    let (a2, b2) = (&a * &a, b * b);
    // Each power and term is truncated, so it sits at most 2 (power) or
    // 3 (term) units below its true value.
    let mut power = (&a << w) / b;
    let mut sum = BigInt::zero();
    let mut k: i64 = 0;
    while !power.is_zero() {
        sum += &power / BigInt::from(2 * k + 1);
        power = power * &a2 / &b2;
        k += 1;
    }
    // The tail after a vanishing power is below 2 units times 1/(1 - z^2) <= 4/3.
    let slack = BigInt::from(3 * k + 3);
    let lo = from_scaled(sum.clone(), w as i64);
    let hi = from_scaled(sum + slack, w as i64);
    if z.is_negative() {
        Enclosure { lo: -hi, hi: -lo }
    } else {
        Enclosure { lo, hi }
    }
}

fn cached(table: &'static Mutex<BTreeMap<u32, Enclosure>>, prec: u32, f: impl FnOnce() -> Enclosure) -> Enclosure {
    if let Some(e) = table.lock().expect("constant cache").get(&prec) {
        return e.clone();
    }
    let e = f();
    table.lock().expect("constant cache").insert(prec, e.clone());
    e
}

static LN2: Mutex<BTreeMap<u32, Enclosure>> = Mutex::new(BTreeMap::new());
static E: Mutex<BTreeMap<u32, Enclosure>> = Mutex::new(BTreeMap::new());

/// Natural logarithm of 2.
pub fn ln2(prec: u32) -> Enclosure {
    cached(&LN2, prec, || atanh_series(&rat(1, 3), prec + 2).scale(&int(2)).round(prec + GUARD))
}

/// Natural logarithm of a positive rational.
pub fn ln(x: &BigRational, prec: u32) -> Enclosure {
    assert!(x.is_positive(), "logarithm of a non-positive number");
    if x.is_one() {
        return Enclosure::zero();
    }
    let half = rat(1, 2);
    let two = int(2);
    if x >= &half && x <= &two {
        let z = (x - int(1)) / (x + int(1));
        return atanh_series(&z, prec).scale(&two).round(prec + GUARD);
    }
    let k = log2_floor(x);
    let y = x / from_scaled(BigInt::one(), -k);
    let extra = 64 - (k.unsigned_abs().leading_zeros()) + 2;
    let w = prec + extra;
    let z = (&y - int(1)) / (&y + int(1));
    let frac = atanh_series(&z, w).scale(&two);
    let whole = ln2(w).scale(&int(k));
    (&whole + &frac).round(prec + GUARD)
}

pub fn ln_enclosure(x: &Enclosure, prec: u32) -> Enclosure {
    let lo = ln(x.lo(), prec);
    if x.is_exact() {
        return lo;
    }
    let hi = ln(x.hi(), prec);
    Enclosure { lo: lo.lo, hi: hi.hi }
}

/// `exp(r)` for `0 <= r <= 1` by its Taylor series in fixed point.
fn exp_unit(r: &BigRational, prec: u32) -> Enclosure {
    let w = (prec + GUARD) as usize;
    let a = r.numer();
    let b = r.denom();
    let one = BigInt::one() << w;
    // Truncated terms fall short of r^k/k! by at most 2 units each.
    let mut term = one.clone();
    let mut sum = one;
    let mut k: u64 = 1;
    while !term.is_zero() {
        term = term * a / (b * BigInt::from(k));
        sum += &term;
        k += 1;
    }
    let slack = BigInt::from(2 * k + 8);
    Enclosure { lo: from_scaled(sum.clone(), w as i64), hi: from_scaled(sum + slack, w as i64) }
}

/// Euler's number.
pub fn e_const(prec: u32) -> Enclosure {
    cached(&E, prec, || exp_unit(&int(1), prec))
}

/// Exponential of a rational.
pub fn exp(x: &BigRational, prec: u32) -> Enclosure {
    if x.is_zero() {
        return Enclosure::one();
    }
    let n = x.floor();
    let r = x - &n;
    let n = n.to_integer();
    let n_abs = n.abs().to_u64().expect("exponent too large for exp");
    let extra = 2 * (64 - n_abs.leading_zeros()) + 4;
    let w = prec + extra;
    let frac = exp_unit(&r, w);
    if n_abs == 0 {
        return frac.round(prec + GUARD);
    }
    let e = e_const(w);
    let mut whole = e.powi(n_abs as u32, w + GUARD);
    if n.is_negative() {
        whole = whole.recip().round(w + GUARD);
    }
    (&whole * &frac).round(prec + GUARD)
}

pub fn exp_enclosure(x: &Enclosure, prec: u32) -> Enclosure {
    let lo = exp(x.lo(), prec);
    if x.is_exact() {
        return lo;
    }
    let hi = exp(x.hi(), prec);
    Enclosure { lo: lo.lo, hi: hi.hi }
}

/// `x^(num/den)` for `x >= 0`; zero raised to a negative power panics.
pub fn pow_rational(x: &BigRational, num: i64, den: u32, prec: u32) -> Enclosure {
    assert!(den > 0, "zero root index");
    assert!(!x.is_negative(), "fractional power of a negative number");
    if x.is_zero() {
        assert!(num > 0, "zero to a non-positive power");
        return Enclosure::zero();
    }
    let e = num.unsigned_abs() as usize;
    let base = if num >= 0 { x.clone() } else { x.recip() };
    let y = num_traits::pow(base, e);
    if den == 1 {
        return Enclosure::exact(y);
    }
    let d = den as i64;
    // Choose k so that y^(1/den) * 2^k carries about prec + GUARD bits.
    let k = (prec + GUARD) as i64 - Integer::div_floor(&log2_floor(&y), &d);
    let lo_n = floor_scaled(&y, k * d);
    let r = lo_n.nth_root(den);
    let hi_n = ceil_scaled(&y, k * d);
    let mut s = hi_n.nth_root(den);
    if num_traits::pow(s.clone(), den as usize) < hi_n {
        s += 1;
    }
    Enclosure { lo: from_scaled(r, k), hi: from_scaled(s, k) }
}

/// `x^(num/den)` over an enclosure with non-negative lower end.
pub fn pow_enclosure(x: &Enclosure, num: i64, den: u32, prec: u32) -> Enclosure {
    let a = pow_rational(x.lo(), num, den, prec);
    if x.is_exact() {
        return a;
    }
    let b = pow_rational(x.hi(), num, den, prec);
    if !x.lo().is_negative() {
        // Monotone on the nonnegative axis.
        return if num >= 0 {
            Enclosure { lo: a.lo, hi: b.hi }
        } else {
            Enclosure { lo: b.lo, hi: a.hi }
        };
    }
    a.hull(&b)
}

pub fn sqrt(x: &BigRational, prec: u32) -> Enclosure {
    pow_rational(x, 1, 2, prec)
}

/// `atan(1/m)` for an integer `m >= 2`, alternating series.
fn atan_inv(m: i64, prec: u32) -> Enclosure {
    let w = prec + GUARD;
    let target = from_scaled(BigInt::one(), w as i64);
    let m2 = int(m * m);
    let mut power = rat(1, m);
    let mut sum = BigRational::zero();
    let mut i: i64 = 0;
    loop {
        let term = &power / int(2 * i + 1);
        if term <= target {
            // Alternating with decreasing terms: the tail is bounded by the next term.
            return Enclosure { lo: &sum - &term, hi: &sum + &term }.round(w);
        }
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        power /= &m2;
        i += 1;
    }
}

/// `pi` via Machin's formula.
pub fn pi(prec: u32) -> Enclosure {
    let a = atan_inv(5, prec + 8).scale(&int(16));
    let b = atan_inv(239, prec + 8).scale(&int(4));
    (&a - &b).round(prec + GUARD)
}

/// Run `f` at increasing precision until it returns a verdict.
pub fn escalate<T>(start: u32, mut f: impl FnMut(u32) -> Option<T>) -> Option<T> {
    let mut prec = start.max(32);
    loop {
        if let Some(v) = f(prec) {
            return Some(v);
        }
        if prec >= MAX_PRECISION {
            return None;
        }
        prec = (prec * 2).min(MAX_PRECISION);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(e: &Enclosure, v: f64, tol: f64) -> bool {
        (e.lo_f64() - v).abs() <= tol && (e.hi_f64() - v).abs() <= tol
    }

    #[test]
    fn rounding_is_outward() {
        let x = rat(1, 3);
        let lo = round_down(&x, 20);
        let hi = round_up(&x, 20);
        assert!(lo < x && x < hi);
        assert!(&hi - &lo < rat(1, 1 << 19));
        assert_eq!(round_down(&int(5), 20), int(5));
    }

    #[test]
    fn log2_floor_exact_on_boundaries() {
        assert_eq!(log2_floor(&int(8)), 3);
        assert_eq!(log2_floor(&int(7)), 2);
        assert_eq!(log2_floor(&rat(1, 8)), -3);
        assert_eq!(log2_floor(&rat(1, 7)), -3);
        assert_eq!(log2_floor(&rat(-9, 1)), 3);
    }

    #[test]
    fn logarithms() {
        let l2 = ln2(128);
        assert!(close(&l2, std::f64::consts::LN_2, 1e-15));
        assert!(l2.width() < rat(1, 1) / int(BigInt::one() << 120usize));
        let l10 = ln(&int(10), 128);
        assert!(close(&l10, std::f64::consts::LN_10, 1e-14));
        let small = ln(&rat(3, 4), 128);
        assert!(close(&small, (0.75f64).ln(), 1e-15));
        let tiny = ln(&rat(1, 1000), 128);
        assert!(close(&tiny, (0.001f64).ln(), 1e-13));
        assert_eq!(ln(&int(1), 64), Enclosure::zero());
    }

    #[test]
    fn exponentials() {
        let e = e_const(128);
        assert!(close(&e, std::f64::consts::E, 1e-15));
        let x = exp(&rat(-7, 2), 128);
        assert!(close(&x, (-3.5f64).exp(), 1e-16));
        let big = exp(&int(50), 128);
        assert!((big.mid_f64() / 50f64.exp() - 1.0).abs() < 1e-14);
        // exp(ln 10) encloses 10
        let l = ln(&int(10), 200);
        let back = exp_enclosure(&l, 200);
        assert!(back.contains(&int(10)));
    }

    #[test]
    fn powers_and_roots() {
        let s2 = sqrt(&int(2), 128);
        assert!(close(&s2, std::f64::consts::SQRT_2, 1e-16));
        assert!(s2.lo() * s2.lo() <= int(2) && s2.hi() * s2.hi() >= int(2));
        let exact = pow_rational(&int(1), 9, 10, 64);
        assert!(exact.is_exact() && exact.lo().is_one());
        let p = pow_rational(&rat(1, 4), 9, 10, 128);
        assert!(close(&p, 0.25f64.powf(0.9), 1e-15));
        let m = pow_rational(&int(7), -3, 2, 128);
        assert!(close(&m, 7f64.powf(-1.5), 1e-16));
        assert_eq!(pow_rational(&int(0), 9, 10, 64), Enclosure::zero());
    }

    #[test]
    fn pi_enclosure() {
        let p = pi(256);
        assert!(close(&p, std::f64::consts::PI, 1e-15));
        assert!(p.width() < rat(1, 1) / int(BigInt::one() << 250usize));
    }

    #[test]
    fn escalation_stops_when_decisive() {
        // sqrt(2) vs 1.41421356237 is decided at modest precision.
        let r = rat(141421356237, 100000000000);
        let ord = escalate(8, |p| sqrt(&int(2), p).cmp_rat(&r));
        assert_eq!(ord, Some(Ordering::Greater));
    }
}
