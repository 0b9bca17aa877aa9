//! Simple continued fractions, convergents and their approximation bounds.
//!
//! Rationals expand by Euclid's algorithm and quadratic surds
//! `(p + sqrt d)/r` by the exact periodic recurrence. Named constants
//! (`e`, `pi`) expand from a certified enclosure, emitting partial quotients
//! only while both enclosure endpoints agree on them.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::certified::{self, Enclosure};
use crate::error::{Error, Result};

/// `(p + sqrt d) / r` with `d > 0` not a perfect square and `r != 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadraticSurd {
    p: BigInt,
    d: BigInt,
    r: BigInt,
}

impl QuadraticSurd {
    pub fn new(p: BigInt, d: BigInt, r: BigInt) -> Result<Self> {
        if !d.is_positive() {
            return Err(Error::InvalidArgument("surd radicand must be positive".into()));
        }
        let s = d.sqrt();
        if &s * &s == d {
            return Err(Error::InvalidArgument(format!("{d} is a perfect square")));
        }
        if r.is_zero() {
            return Err(Error::InvalidArgument("surd denominator is zero".into()));
        }
        Ok(QuadraticSurd { p, d, r })
    }

    pub fn sqrt(d: i64) -> Result<Self> {
        Self::new(BigInt::zero(), BigInt::from(d), BigInt::one())
    }

    pub fn golden_ratio() -> Self {
        Self::new(BigInt::one(), BigInt::from(5), BigInt::from(2)).expect("5 is not a square")
    }

    /// Exact comparison of the surd with a rational.
    pub fn cmp_rational(&self, c: &BigRational) -> Ordering {
        // x < c  <=>  sqrt d < c r - p  (for r > 0; reversed for r < 0)
        let y = c * BigRational::from_integer(self.r.clone()) - BigRational::from_integer(self.p.clone());
        let sqrt_vs_y = if y.is_negative() {
            Ordering::Greater
        } else {
            BigRational::from_integer(self.d.clone()).cmp(&(&y * &y))
        };
        if self.r.is_positive() {
            sqrt_vs_y
        } else {
            sqrt_vs_y.reverse()
        }
    }

    pub fn enclosure(&self, prec: u32) -> Enclosure {
        let root = certified::sqrt(&BigRational::from_integer(self.d.clone()), prec + 8);
        root.add_rat(&BigRational::from_integer(self.p.clone()))
            .scale(&BigRational::new(BigInt::one(), self.r.clone()))
            .round(prec + 8)
    }

    /// `(P, D, Q)` with `x = (P + sqrt D)/Q` and `Q | D - P^2`.
    fn reduced_form(&self) -> (BigInt, BigInt, BigInt) {
        let ra = self.r.abs();
        (&self.p * &ra, &self.d * &self.r * &self.r, &self.r * &ra)
    }

    /// `floor(m * x)` computed exactly.
    pub fn floor_times(&self, m: &BigInt) -> BigInt {
        // m x = (p m + sqrt(d m^2)) / r for m >= 0
        let scaled = QuadraticSurd { p: &self.p * m, d: &self.d * m * m, r: self.r.clone() };
        let (p, d, q) = scaled.reduced_form();
        floor_surd(&p, &d, &q)
    }

    fn partial_quotients(&self, count: usize) -> Vec<BigInt> {
        let (mut p, d, mut q) = self.reduced_form();
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let a = floor_surd(&p, &d, &q);
            let p_next = &a * &q - &p;
            let q_next = (&d - &p_next * &p_next) / &q;
            out.push(a);
            p = p_next;
            q = q_next;
        }
        out
    }
}

/// `floor((P + sqrt D)/Q)` for non-square `D`.
fn floor_surd(p: &BigInt, d: &BigInt, q: &BigInt) -> BigInt {
    let s = d.sqrt();
    if q.is_positive() {
        (p + &s).div_floor(q)
    } else {
        (-p - &s - BigInt::one()).div_floor(&-q)
    }
}

/// The real number being expanded.
#[derive(Clone, Debug)]
pub enum RealValue {
    Rational(BigRational),
    Surd(QuadraticSurd),
    /// A named constant known through an enclosure at a given precision.
    Constant { name: String, prec: u32, enclosure: Enclosure },
}

impl RealValue {
    pub fn constant(name: &str, prec: u32) -> Result<Self> {
        let enclosure = match name {
            "e" => certified::e_const(prec),
            "pi" => certified::pi(prec),
            other => return Err(Error::Parse(format!("unknown constant '{other}'"))),
        };
        Ok(RealValue::Constant { name: name.to_string(), prec, enclosure })
    }

    /// Ordering against a rational; `None` only for constants whose
    /// enclosure straddles `c`.
    pub fn cmp_rational(&self, c: &BigRational) -> Option<Ordering> {
        match self {
            RealValue::Rational(x) => Some(x.cmp(c)),
            RealValue::Surd(s) => Some(s.cmp_rational(c)),
            RealValue::Constant { enclosure, .. } => enclosure.cmp_rat(c),
        }
    }

    pub fn enclosure(&self, prec: u32) -> Enclosure {
        match self {
            RealValue::Rational(x) => Enclosure::exact(x.clone()),
            RealValue::Surd(s) => s.enclosure(prec),
            RealValue::Constant { enclosure, .. } => enclosure.clone(),
        }
    }

    /// `floor(m x)` when it can be decided.
    pub fn floor_times(&self, m: &BigInt) -> Option<BigInt> {
        match self {
            RealValue::Rational(x) => Some((x * BigRational::from_integer(m.clone())).floor().to_integer()),
            RealValue::Surd(s) => Some(s.floor_times(m)),
            RealValue::Constant { enclosure, .. } => {
                let mm = BigRational::from_integer(m.clone());
                let lo = (enclosure.lo() * &mm).floor();
                let hi = (enclosure.hi() * &mm).floor();
                (lo == hi).then(|| lo.to_integer())
            }
        }
    }

    /// Up to `count` partial quotients `[n_0; n_1, ...]`. Rationals may
    /// yield fewer (the expansion terminates); constants error out when the
    /// enclosure is too wide to certify the requested number of terms.
    pub fn partial_quotients(&self, count: usize) -> Result<Vec<BigInt>> {
        match self {
            RealValue::Rational(x) => Ok(rational_quotients(x, count)),
            RealValue::Surd(s) => Ok(s.partial_quotients(count)),
            RealValue::Constant { name, prec, enclosure } => {
                let terms = enclosure_quotients(enclosure, count);
                if terms.len() < count {
                    return Err(Error::Precision(format!(
                        "{name} at {prec} bits certifies only {} partial quotients; \
                         request more bits, e.g. {name}@{}",
                        terms.len(),
                        prec * 2
                    )));
                }
                Ok(terms)
            }
        }
    }
}

impl fmt::Display for RealValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RealValue::Rational(x) => write!(f, "{x}"),
            RealValue::Surd(s) => write!(f, "({} + sqrt {})/{}", s.p, s.d, s.r),
            RealValue::Constant { name, prec, .. } => write!(f, "{name}@{prec}"),
        }
    }
}

/// Parses `p/q`, `n`, `sqrt:d`, `surd:p,d,r`, `golden`, `e[@bits]`, `pi[@bits]`.
impl FromStr for RealValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |what: &str| Error::Parse(format!("cannot parse value spec '{s}': {what}"));
        let parse_int = |t: &str| t.trim().parse::<BigInt>().map_err(|_| bad("expected an integer"));
        if let Some(d) = s.strip_prefix("sqrt:") {
            return Ok(RealValue::Surd(QuadraticSurd::new(BigInt::zero(), parse_int(d)?, BigInt::one())?));
        }
        if let Some(rest) = s.strip_prefix("surd:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 3 {
                return Err(bad("surd needs p,d,r"));
            }
            let surd = QuadraticSurd::new(parse_int(parts[0])?, parse_int(parts[1])?, parse_int(parts[2])?)?;
            return Ok(RealValue::Surd(surd));
        }
        if s == "golden" || s == "phi" {
            return Ok(RealValue::Surd(QuadraticSurd::golden_ratio()));
        }
        let (name, prec) = match s.split_once('@') {
            Some((n, b)) => (n, b.parse::<u32>().map_err(|_| bad("precision must be an integer"))?),
            None => (s, 256),
        };
        if name == "e" || name == "pi" {
            return RealValue::constant(name, prec);
        }
        match s.split_once('/') {
            Some((n, d)) => {
                let d = parse_int(d)?;
                if d.is_zero() {
                    return Err(bad("zero denominator"));
                }
                Ok(RealValue::Rational(BigRational::new(parse_int(n)?, d)))
            }
            None => Ok(RealValue::Rational(BigRational::from_integer(parse_int(s)?))),
        }
    }
}

fn rational_quotients(x: &BigRational, count: usize) -> Vec<BigInt> {
    let mut out = Vec::new();
    let (mut n, mut d) = (x.numer().clone(), x.denom().clone());
    while out.len() < count && !d.is_zero() {
        let (a, r) = n.div_mod_floor(&d);
        out.push(a);
        n = d;
        d = r;
    }
    out
}

fn enclosure_quotients(x: &Enclosure, count: usize) -> Vec<BigInt> {
    let mut out = Vec::new();
    let (mut lo, mut hi) = (x.lo().clone(), x.hi().clone());
    while out.len() < count {
        let a = lo.floor();
        if hi.floor() != a {
            break;
        }
        out.push(a.to_integer());
        let (flo, fhi) = (&lo - &a, &hi - &a);
        if flo.is_zero() {
            // The enclosure touches an integer: the next quotient is undecidable.
            break;
        }
        lo = fhi.recip();
        hi = flo.recip();
    }
    out
}

/// A convergent `a_j / q_j` together with the partial quotient `n_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Convergent {
    pub j: usize,
    pub partial_quotient: BigInt,
    pub numer: BigInt,
    pub denom: BigInt,
}

impl Convergent {
    pub fn value(&self) -> BigRational {
        BigRational::new(self.numer.clone(), self.denom.clone())
    }
}

/// Convergents from partial quotients via `a_j = n_j a_{j-1} + a_{j-2}`,
/// `q_j = n_j q_{j-1} + q_{j-2}`.
pub fn convergents(quotients: &[BigInt]) -> Vec<Convergent> {
    let (mut a_prev, mut a_prev2) = (BigInt::one(), BigInt::zero());
    let (mut q_prev, mut q_prev2) = (BigInt::zero(), BigInt::one());
    quotients
        .iter()
        .enumerate()
        .map(|(j, n)| {
            let a = n * &a_prev + &a_prev2;
            let q = n * &q_prev + &q_prev2;
            a_prev2 = std::mem::replace(&mut a_prev, a.clone());
            q_prev2 = std::mem::replace(&mut q_prev, q.clone());
            Convergent { j, partial_quotient: n.clone(), numer: a, denom: q }
        })
        .collect()
}

/// One row of a convergent table.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergentRow {
    pub j: usize,
    #[serde(serialize_with = "crate::serde_util::ser_display")]
    pub n_j: BigInt,
    #[serde(serialize_with = "crate::serde_util::ser_display")]
    pub a_j: BigInt,
    #[serde(serialize_with = "crate::serde_util::ser_display")]
    pub q_j: BigInt,
    /// Enclosure of `|x - a_j/q_j|`.
    #[serde(serialize_with = "crate::serde_util::ser_enclosure_opt")]
    pub error: Option<Enclosure>,
    /// Whether `1/(2 q_j q_{j+1}) <= |x - a_j/q_j| <= 1/(q_j q_{j+1})` was
    /// certified; `None` when there is no next convergent or the check is
    /// undecidable at the available precision.
    pub bounds_ok: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergentTable {
    pub value: String,
    pub terminated: bool,
    pub rows: Vec<ConvergentRow>,
}

/// `lo <= |x - c| <= hi` given the side of `x` relative to `c`.
fn check_error_bounds(x: &RealValue, c: &BigRational, lo: &BigRational, hi: &BigRational) -> Option<bool> {
    match x.cmp_rational(c)? {
        Ordering::Equal => Some(lo.is_zero()),
        Ordering::Greater => {
            let a = x.cmp_rational(&(c + lo))?;
            let b = x.cmp_rational(&(c + hi))?;
            Some(a != Ordering::Less && b != Ordering::Greater)
        }
        Ordering::Less => {
            let a = x.cmp_rational(&(c - lo))?;
            let b = x.cmp_rational(&(c - hi))?;
            Some(a != Ordering::Greater && b != Ordering::Less)
        }
    }
}

/// Convergent table with `terms` rows (fewer for terminating rationals).
pub fn convergent_table(x: &RealValue, terms: usize, prec: u32) -> Result<ConvergentTable> {
    if terms == 0 {
        return Err(Error::InvalidArgument("at least one term is required".into()));
    }
    // One extra quotient lets the last requested row be bounds-checked.
    let quotients = match x.partial_quotients(terms + 1) {
        Ok(q) => q,
        Err(_) => x.partial_quotients(terms)?,
    };
    let terminated = matches!(x, RealValue::Rational(_)) && quotients.len() <= terms;
    let convs = convergents(&quotients);
    let shown = convs.len().min(terms);
    let rows = (0..shown)
        .map(|j| {
            let c = &convs[j];
            let cv = c.value();
            let error = match x {
                RealValue::Rational(v) => Some(Enclosure::exact((v - &cv).abs())),
                _ => {
                    let e = x.enclosure(prec).add_rat(&-cv.clone());
                    Some(if e.lo().is_negative() { -&e } else { e })
                }
            };
            let bounds_ok = convs.get(j + 1).and_then(|next| {
                let qq = &c.denom * &next.denom;
                let hi = BigRational::new(BigInt::one(), qq.clone());
                let lo = BigRational::new(BigInt::one(), qq * 2);
                check_error_bounds(x, &cv, &lo, &hi)
            });
            ConvergentRow {
                j,
                n_j: c.partial_quotient.clone(),
                a_j: c.numer.clone(),
                q_j: c.denom.clone(),
                error,
                bounds_ok,
            }
        })
        .collect();
    Ok(ConvergentTable { value: x.to_string(), terminated, rows })
}

/// Reduced fractions `a/q` with `q <= qmax` and `|x - a/q| < 1/(2 q^2)`.
pub fn good_approximations(x: &RealValue, qmax: u64) -> Result<Vec<BigRational>> {
    let mut out = Vec::new();
    for q in 1..=qmax {
        let qb = BigInt::from(q);
        let f = x
            .floor_times(&qb)
            .ok_or_else(|| Error::Precision(format!("cannot decide floor({q} x)")))?;
        for a in [f.clone(), f + 1] {
            if a.gcd(&qb) != BigInt::one() {
                continue;
            }
            let c = BigRational::new(a, qb.clone());
            let tol = BigRational::new(BigInt::one(), BigInt::from(2 * q * q));
            let inside = match x.cmp_rational(&c) {
                Some(Ordering::Equal) => true,
                Some(Ordering::Greater) => x.cmp_rational(&(&c + &tol)) == Some(Ordering::Less),
                Some(Ordering::Less) => x.cmp_rational(&(&c - &tol)) == Some(Ordering::Greater),
                None => return Err(Error::Precision(format!("cannot compare x with {c}"))),
            };
            if inside {
                out.push(c);
            }
        }
    }
    Ok(out)
}

/// Estimates `-ln|x - a_j/q_j| / ln q_j`, which tends to the irrationality
/// exponent along the convergents (2 for badly approximable `x`).
pub fn irrationality_exponent_estimates(table: &ConvergentTable) -> Vec<(usize, f64)> {
    table
        .rows
        .iter()
        .filter_map(|row| {
            let q = row.q_j.to_f64()?;
            let err = row.error.as_ref()?.mid_f64();
            (q > 1.0 && err > 0.0).then(|| (row.j, -err.ln() / q.ln()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certified::rat;

    fn bi(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    /// Euclid's algorithm on machine integers.
    fn euclid(mut n: i64, mut d: i64) -> Vec<i64> {
        let mut out = Vec::new();
        while d != 0 {
            out.push(n.div_euclid(d));
            let r = n.rem_euclid(d);
            n = d;
            d = r;
        }
        out
    }

    #[test]
    fn rational_expansions() {
        let x: RealValue = "22/7".parse().unwrap();
        assert_eq!(x.partial_quotients(10).unwrap(), bi(&euclid(22, 7)));
        let t = convergent_table(&x, 10, 128).unwrap();
        assert!(t.terminated);
        assert_eq!(t.rows.len(), 2);
        assert_eq!((t.rows[0].a_j.clone(), t.rows[0].q_j.clone()), (BigInt::from(3), BigInt::from(1)));
        assert_eq!((t.rows[1].a_j.clone(), t.rows[1].q_j.clone()), (BigInt::from(22), BigInt::from(7)));
        let one: RealValue = "1/1".parse().unwrap();
        let t = convergent_table(&one, 5, 128).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].n_j, BigInt::from(1));
        let neg: RealValue = "-7/3".parse().unwrap();
        assert_eq!(neg.partial_quotients(10).unwrap(), bi(&euclid(-7, 3)));
    }

    #[test]
    fn sqrt2_expansion() {
        let x: RealValue = "sqrt:2".parse().unwrap();
        let t = convergent_table(&x, 4, 128).unwrap();
        let got: Vec<(i64, i64, i64)> = t
            .rows
            .iter()
            .map(|r| (r.n_j.to_i64().unwrap(), r.a_j.to_i64().unwrap(), r.q_j.to_i64().unwrap()))
            .collect();
        assert_eq!(got, vec![(1, 1, 1), (2, 3, 2), (2, 7, 5), (2, 17, 12)]);
        assert!(t.rows.iter().all(|r| r.bounds_ok == Some(true)));
    }

    #[test]
    fn surd_expansions_match_float_oracle() {
        // (p + sqrt d)/r against a float expansion for the leading terms.
        for (p, d, r) in [(0, 3, 1), (1, 5, 2), (3, 7, -2), (-5, 13, 3), (0, 991, 1)] {
            let s = QuadraticSurd::new(p.into(), d.into(), r.into()).unwrap();
            let mut v = (p as f64 + (d as f64).sqrt()) / r as f64;
            let mut float_terms = Vec::new();
            for _ in 0..6 {
                let a = v.floor();
                float_terms.push(a as i64);
                v = 1.0 / (v - a);
            }
            assert_eq!(s.partial_quotients(6), bi(&float_terms), "surd ({p} + sqrt {d})/{r}");
        }
    }

    #[test]
    fn surd_comparison_exact() {
        let s = QuadraticSurd::sqrt(2).unwrap();
        assert_eq!(s.cmp_rational(&rat(141, 100)), Ordering::Greater);
        assert_eq!(s.cmp_rational(&rat(142, 100)), Ordering::Less);
        let neg = QuadraticSurd::new(0.into(), 2.into(), (-1).into()).unwrap();
        assert_eq!(neg.cmp_rational(&rat(-141, 100)), Ordering::Less);
        assert_eq!(neg.cmp_rational(&rat(-142, 100)), Ordering::Greater);
        assert_eq!(s.floor_times(&BigInt::from(100)), BigInt::from(141));
    }

    #[test]
    fn constants_expand_from_enclosures() {
        let e: RealValue = "e@256".parse().unwrap();
        let q = e.partial_quotients(12).unwrap();
        assert_eq!(q, bi(&[2, 1, 2, 1, 1, 4, 1, 1, 6, 1, 1, 8]));
        let pi: RealValue = "pi@256".parse().unwrap();
        assert_eq!(pi.partial_quotients(5).unwrap(), bi(&[3, 7, 15, 1, 292]));
        let coarse: RealValue = "pi@16".parse().unwrap();
        assert!(matches!(coarse.partial_quotients(40), Err(Error::Precision(_))));
        let t = convergent_table(&pi, 8, 256).unwrap();
        assert!(t.rows.iter().all(|r| r.bounds_ok == Some(true)));
    }

    #[test]
    fn parse_errors() {
        assert!("sqrt:4".parse::<RealValue>().is_err());
        assert!("1/0".parse::<RealValue>().is_err());
        assert!("foo".parse::<RealValue>().is_err());
        assert!("surd:1,2".parse::<RealValue>().is_err());
    }

    #[test]
    fn exponent_estimates_tend_to_two() {
        let x: RealValue = "sqrt:2".parse().unwrap();
        let t = convergent_table(&x, 25, 256).unwrap();
        let est = irrationality_exponent_estimates(&t);
        let last = est.last().unwrap().1;
        assert!((last - 2.0).abs() < 0.1, "{last}");
    }
}
