//! Square-free GCD graphs: weights, edge density, quality, the quality
//! increment step and the two-stage compression pipeline built on it.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::approx_sets::{self, WindowReport};
use crate::certified::{self, int, rat, Enclosure, DEFAULT_PRECISION};
use crate::error::{invalid, Error, Result};
use crate::numtheory::{self, CorrelationVariant, FactoredInt};
use crate::serde_util::{parse_int, parse_rat, rat_string, ser_enclosure, ser_rat, ser_rat_opt};

/// Numeric constants driving the quality function and the pipeline.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstantsProfile {
    #[serde(serialize_with = "crate::serde_util::ser_display")]
    pub p_threshold: BigInt,
    #[serde(serialize_with = "crate::serde_util::ser_display")]
    pub asym_coeff: BigInt,
    pub density_exp: u32,
    pub trans_exp: u32,
    #[serde(serialize_with = "ser_rat")]
    pub trans_power: BigRational,
    #[serde(rename = "L_threshold", serialize_with = "ser_rat")]
    pub l_threshold: BigRational,
    pub case1_exp: u32,
    pub good_prime_exp: u32,
    #[serde(rename = "good_L_budget", serialize_with = "ser_rat")]
    pub good_l_budget: BigRational,
    pub label: String,
}

const PROFILE_KEYS: [&str; 10] = [
    "p_threshold",
    "asym_coeff",
    "density_exp",
    "trans_exp",
    "trans_power",
    "L_threshold",
    "case1_exp",
    "good_prime_exp",
    "good_L_budget",
    "label",
];

impl ConstantsProfile {
    pub fn paper() -> Self {
        ConstantsProfile {
            p_threshold: num_traits::pow(BigInt::from(5), 100),
            asym_coeff: num_traits::pow(BigInt::from(5), 12),
            density_exp: 9,
            trans_exp: 10,
            trans_power: rat(3, 2),
            l_threshold: int(100),
            case1_exp: 30,
            good_prime_exp: 32,
            good_l_budget: int(1),
            label: "paper".into(),
        }
    }

    /// Scaled constants under which every branch of the pipeline is reachable.
    pub fn toy() -> Self {
        ConstantsProfile {
            p_threshold: BigInt::from(5),
            asym_coeff: BigInt::from(2),
            l_threshold: rat(1, 4),
            case1_exp: 3,
            good_prime_exp: 2,
            label: "toy".into(),
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.p_threshold.is_positive() || !self.asym_coeff.is_positive() {
            return invalid("p_threshold and asym_coeff must be positive");
        }
        if self.density_exp == 0 || self.trans_exp == 0 {
            return invalid("density_exp and trans_exp must be positive");
        }
        if !self.trans_power.is_positive()
            || self.trans_power.numer().to_i64().is_none()
            || self.trans_power.denom().to_u32().is_none()
        {
            return invalid("trans_power must be a positive rational with small numerator and denominator");
        }
        if self.l_threshold.is_negative() || self.good_l_budget.is_negative() {
            return invalid("L_threshold and good_L_budget must be non-negative");
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment, values may be quoted.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            if !PROFILE_KEYS.contains(&k) {
                return Err(Error::Parse(format!("line {}: unknown key {k:?}", lineno + 1)));
            }
            let v = v.trim().trim_matches('"').trim().to_string();
            if map.insert(k.to_string(), v).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate key {k:?}", lineno + 1)));
            }
        }
        let missing: Vec<&str> = PROFILE_KEYS[..9].iter().copied().filter(|k| !map.contains_key(*k)).collect();
        if !missing.is_empty() {
            return Err(Error::Parse(format!("missing keys: {}", missing.join(", "))));
        }
        let small = |k: &str| -> Result<u32> {
            map[k].parse().map_err(|_| Error::Parse(format!("{k}: expected a small non-negative integer")))
        };
        let profile = ConstantsProfile {
            p_threshold: parse_int(&map["p_threshold"])?,
            asym_coeff: parse_int(&map["asym_coeff"])?,
            density_exp: small("density_exp")?,
            trans_exp: small("trans_exp")?,
            trans_power: parse_rat(&map["trans_power"])?,
            l_threshold: parse_rat(&map["L_threshold"])?,
            case1_exp: small("case1_exp")?,
            good_prime_exp: small("good_prime_exp")?,
            good_l_budget: parse_rat(&map["good_L_budget"])?,
            label: map.get("label").cloned().unwrap_or_else(|| "custom".into()),
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn trans_parts(&self) -> (i64, u32) {
        (
            self.trans_power.numer().to_i64().expect("validated"),
            self.trans_power.denom().to_u32().expect("validated"),
        )
    }
}

impl fmt::Display for ConstantsProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "label = \"{}\"", self.label)?;
        writeln!(f, "p_threshold = {}", self.p_threshold)?;
        writeln!(f, "asym_coeff = {}", self.asym_coeff)?;
        writeln!(f, "density_exp = {}", self.density_exp)?;
        writeln!(f, "trans_exp = {}", self.trans_exp)?;
        writeln!(f, "trans_power = {}", rat_string(&self.trans_power))?;
        writeln!(f, "L_threshold = {}", rat_string(&self.l_threshold))?;
        writeln!(f, "case1_exp = {}", self.case1_exp)?;
        writeln!(f, "good_prime_exp = {}", self.good_prime_exp)?;
        writeln!(f, "good_L_budget = {}", rat_string(&self.good_l_budget))
    }
}

/// Factorization and weight `phi(n)/n` of a vertex label.
#[derive(Clone, Debug)]
struct VertexInfo {
    factors: FactoredInt,
    weight: BigRational,
}

/// A bipartite graph on square-free integers with multiplicative data `(P, a, b)`.
///
/// The structure is immutable; every operation returns a new graph. Invariants
/// are not enforced on construction so that [`GcdGraph::validate`] can report them.
#[derive(Clone)]
pub struct GcdGraph {
    v: BTreeSet<u64>,
    w: BTreeSet<u64>,
    e: BTreeSet<(u64, u64)>,
    p: BTreeSet<u64>,
    a: u64,
    b: u64,
    info: Arc<BTreeMap<u64, VertexInfo>>,
}

impl PartialEq for GcdGraph {
    fn eq(&self, o: &Self) -> bool {
        self.v == o.v && self.w == o.w && self.e == o.e && self.p == o.p && self.a == o.a && self.b == o.b
    }
}

impl Eq for GcdGraph {}

impl fmt::Debug for GcdGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GcdGraph")
            .field("V", &self.v)
            .field("W", &self.w)
            .field("E", &self.e)
            .field("P", &self.p)
            .field("a", &self.a)
            .field("b", &self.b)
            .finish()
    }
}

/// One failed definition bullet together with its witness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub bullet: u8,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.bullet, self.message)
    }
}

impl GcdGraph {
    pub fn new(
        v: impl IntoIterator<Item = u64>,
        w: impl IntoIterator<Item = u64>,
        e: impl IntoIterator<Item = (u64, u64)>,
        p: impl IntoIterator<Item = u64>,
        a: u64,
        b: u64,
    ) -> Result<Self> {
        let v: BTreeSet<u64> = v.into_iter().collect();
        let w: BTreeSet<u64> = w.into_iter().collect();
        let e: BTreeSet<(u64, u64)> = e.into_iter().collect();
        let p: BTreeSet<u64> = p.into_iter().collect();
        if a == 0 || b == 0 {
            return invalid("a and b must be positive");
        }
        let labels: BTreeSet<u64> = v.iter().chain(&w).copied().chain(e.iter().flat_map(|&(x, y)| [x, y])).collect();
        let info = labels
            .into_par_iter()
            .map(|n| {
                let factors = numtheory::factor_u64(n)?;
                let weight = numtheory::phi_ratio(&factors);
                Ok((n, VertexInfo { factors, weight }))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(GcdGraph { v, w, e, p, a, b, info: Arc::new(info) })
    }

    /// The starting graph `(S, S, edges, {}, 1, 1)`.
    pub fn from_support(s: &[u64], edges: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        Self::new(s.iter().copied(), s.iter().copied(), edges, [], 1, 1)
    }

    pub fn v(&self) -> &BTreeSet<u64> {
        &self.v
    }

    pub fn w(&self) -> &BTreeSet<u64> {
        &self.w
    }

    pub fn e(&self) -> &BTreeSet<(u64, u64)> {
        &self.e
    }

    pub fn p(&self) -> &BTreeSet<u64> {
        &self.p
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    /// Factorization of a vertex label of this graph.
    pub fn factors_of(&self, n: u64) -> Option<&FactoredInt> {
        self.info.get(&n).map(|i| &i.factors)
    }

    fn weight(&self, n: u64) -> &BigRational {
        &self.info[&n].weight
    }

    fn derive(&self, v: BTreeSet<u64>, w: BTreeSet<u64>, e: BTreeSet<(u64, u64)>, p: BTreeSet<u64>, a: u64, b: u64) -> Self {
        GcdGraph { v, w, e, p, a, b, info: Arc::clone(&self.info) }
    }

    /// The same graph with its edge set replaced by a subset.
    pub fn with_edges(&self, e: BTreeSet<(u64, u64)>) -> Result<Self> {
        if !e.is_subset(&self.e) {
            return invalid("with_edges: not a subset of the current edge set");
        }
        Ok(self.derive(self.v.clone(), self.w.clone(), e, self.p.clone(), self.a, self.b))
    }

    /// Checks the five defining conditions; an empty list means the graph is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |bullet: u8, message: String| out.push(Violation { bullet, message });
        if self.v.is_empty() {
            push(1, "V is empty".into());
        }
        if self.w.is_empty() {
            push(1, "W is empty".into());
        }
        for (side, set) in [("V", &self.v), ("W", &self.w)] {
            for &n in set {
                if !self.info[&n].factors.is_squarefree() {
                    push(1, format!("{side} member {n} is not square-free"));
                }
            }
        }
        for &(x, y) in &self.e {
            if !self.v.contains(&x) || !self.w.contains(&y) {
                push(2, format!("edge ({x},{y}) is not in V x W"));
            }
        }
        for &p in &self.p {
            let prime = numtheory::factor_u64(p).map(|f| f.factors() == [(p, 1)]).unwrap_or(false);
            if !prime {
                push(3, format!("P member {p} is not a prime"));
            }
        }
        let p_rad: BigInt = self.p.iter().map(|&p| BigInt::from(p)).product();
        for (name, x) in [("a", self.a), ("b", self.b)] {
            if !(&p_rad % BigInt::from(x)).is_zero() {
                push(3, format!("{name}={x} does not divide the product of P"));
            }
        }
        for &n in &self.v {
            if n % self.a != 0 {
                push(4, format!("a|v fails at v={n}"));
            }
        }
        for &n in &self.w {
            if n % self.b != 0 {
                push(4, format!("b|w fails at w={n}"));
            }
        }
        let gab = self.a.gcd(&self.b);
        for &(x, y) in &self.e {
            let g = x.gcd(&y);
            for &p in &self.p {
                if (g % p == 0) != (gab % p == 0) {
                    push(5, format!("edge ({x},{y}): p={p} divides exactly one of gcd(v,w)={g} and gcd(a,b)={gab}"));
                }
            }
        }
        out
    }

    fn check_valid(&self) -> Result<()> {
        let viol = self.validate();
        if viol.is_empty() {
            Ok(())
        } else {
            let text: Vec<String> = viol.iter().map(|v| v.to_string()).collect();
            invalid(format!("invalid GCD graph: {}", text.join("; ")))
        }
    }

    pub fn mu_v(&self) -> BigRational {
        self.v.iter().map(|&n| self.weight(n)).sum()
    }

    pub fn mu_w(&self) -> BigRational {
        self.w.iter().map(|&n| self.weight(n)).sum()
    }

    pub fn mu_e(&self) -> BigRational {
        self.mu_edge_set(&self.e)
    }

    fn mu_edge_set<'a>(&self, e: impl IntoIterator<Item = &'a (u64, u64)>) -> BigRational {
        e.into_iter().map(|&(x, y)| self.weight(x) * self.weight(y)).sum()
    }

    /// The structural subgraph relation: vertex and edge sets shrink, `P` grows,
    /// and the `P`-parts of the new `a`, `b` are the old `a`, `b`.
    pub fn is_subgraph_of(&self, parent: &GcdGraph) -> bool {
        let p_part = |x: u64| -> u64 { parent.p.iter().filter(|&&p| x % p == 0).product() };
        self.v.is_subset(&parent.v)
            && self.w.is_subset(&parent.w)
            && self.e.is_subset(&parent.e)
            && self.p.is_superset(&parent.p)
            && p_part(self.a) == parent.a
            && p_part(self.b) == parent.b
    }

    /// Weighted proportions of `V` and `W` divisible by `p`.
    pub fn proportions(&self, p: u64) -> (BigRational, BigRational) {
        let part = |set: &BTreeSet<u64>| -> BigRational {
            let total: BigRational = set.iter().map(|&n| self.weight(n)).sum();
            let div: BigRational = set.iter().filter(|&&n| n % p == 0).map(|&n| self.weight(n)).sum();
            if total.is_zero() {
                BigRational::zero()
            } else {
                div / total
            }
        };
        (part(&self.v), part(&self.w))
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    #[serde(rename = "V")]
    v: Vec<u64>,
    #[serde(rename = "W")]
    w: Vec<u64>,
    #[serde(rename = "E")]
    e: Vec<(u64, u64)>,
    #[serde(rename = "P")]
    p: Vec<u64>,
    a: u64,
    b: u64,
}

impl Serialize for GcdGraph {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson {
            v: self.v.iter().copied().collect(),
            w: self.w.iter().copied().collect(),
            e: self.e.iter().copied().collect(),
            p: self.p.iter().copied().collect(),
            a: self.a,
            b: self.b,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GcdGraph {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let g = GraphJson::deserialize(d)?;
        GcdGraph::new(g.v, g.w, g.e, g.p, g.a, g.b).map_err(serde::de::Error::custom)
    }
}

/// `sum phi(v)/v` over a set of integers.
pub fn mu_weight(s: &[FactoredInt]) -> BigRational {
    s.iter().map(numtheory::phi_ratio).sum()
}

/// `sum phi(v)phi(w)/(vw)` over a set of pairs.
pub fn mu_edges(e: &[(FactoredInt, FactoredInt)]) -> BigRational {
    e.iter().map(|(x, y)| numtheory::phi_ratio(x) * numtheory::phi_ratio(y)).sum()
}

/// `delta(G) = mu(E) / (mu(V) mu(W))`.
pub fn edge_density(g: &GcdGraph) -> BigRational {
    let den = g.mu_v() * g.mu_w();
    if den.is_zero() {
        BigRational::zero()
    } else {
        g.mu_e() / den
    }
}

/// Certified enclosure of `prod_p (1 - p^-tp)^-te`.
fn trans_product(primes: &[u64], consts: &ConstantsProfile, prec: u32) -> Enclosure {
    if primes.is_empty() {
        return Enclosure::one();
    }
    let (num, den) = consts.trans_parts();
    let w = prec + 16 + 2 * (64 - (primes.len() as u64).leading_zeros());
    let mut prod = Enclosure::one();
    for &p in primes {
        let x = certified::pow_rational(&int(p), -num, den, w);
        prod = (&prod * &(&Enclosure::one() - &x)).round(w);
    }
    prod.powi(consts.trans_exp, w).recip().round(prec)
}

fn scale_quality(trans: &Enclosure, r: &BigRational) -> Enclosure {
    let v = trans.scale(r);
    if v.is_exact() {
        v
    } else {
        v.round(DEFAULT_PRECISION)
    }
}

/// A quality value: an exact rational part times a certified transcendental part.
#[derive(Clone, Debug)]
pub struct QualityValue {
    rational_part: BigRational,
    primes: Vec<u64>,
    consts: Arc<ConstantsProfile>,
    trans: Enclosure,
    value: Enclosure,
}

impl QualityValue {
    pub fn new(rational_part: BigRational, primes: &BTreeSet<u64>, consts: &ConstantsProfile) -> Self {
        let primes: Vec<u64> = primes.iter().copied().collect();
        let trans = trans_product(&primes, consts, DEFAULT_PRECISION);
        let value = scale_quality(&trans, &rational_part);
        QualityValue { rational_part, primes, consts: Arc::new(consts.clone()), trans, value }
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.rational_part
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Enclosure of the transcendental product at the default precision.
    pub fn trans_part(&self) -> &Enclosure {
        &self.trans
    }

    pub fn enclosure(&self) -> &Enclosure {
        &self.value
    }

    pub fn enclosure_at(&self, prec: u32) -> Enclosure {
        trans_product(&self.primes, &self.consts, prec).scale(&self.rational_part).round(prec)
    }

    pub fn lo(&self) -> &BigRational {
        self.value.lo()
    }

    pub fn hi(&self) -> &BigRational {
        self.value.hi()
    }

    pub fn is_zero(&self) -> bool {
        self.rational_part.is_zero()
    }

    /// `r * self`.
    pub fn scaled(&self, r: &BigRational) -> QualityValue {
        let rational_part = &self.rational_part * r;
        let value = scale_quality(&self.trans, &rational_part);
        QualityValue { rational_part, value, ..self.clone() }
    }

    /// Certified ordering of `self` against `factor * other`.
    ///
    /// Common primes cancel exactly; if no primes remain the rational parts
    /// decide. Otherwise precision is escalated until the enclosures separate.
    pub fn cmp_scaled(&self, factor: &BigRational, other: &QualityValue) -> Result<Ordering> {
        let lhs = &self.rational_part;
        let rhs = factor * &other.rational_part;
        let mine: BTreeSet<u64> = self.primes.iter().copied().collect();
        let theirs: BTreeSet<u64> = other.primes.iter().copied().collect();
        let only_mine: Vec<u64> = mine.difference(&theirs).copied().collect();
        let only_theirs: Vec<u64> = theirs.difference(&mine).copied().collect();
        if (only_mine.is_empty() && only_theirs.is_empty()) || lhs.is_zero() || rhs.is_zero() {
            // Transcendental parts are positive, so signs decide when one side vanishes.
            return Ok(lhs.cmp(&rhs));
        }
        certified::escalate(DEFAULT_PRECISION, |prec| {
            let l = trans_product(&only_mine, &self.consts, prec).scale(lhs);
            let r = trans_product(&only_theirs, &other.consts, prec).scale(&rhs);
            l.cmp_enc(&r)
        })
        .ok_or_else(|| Error::Precision("quality comparison undecided at maximum precision".into()))
    }

    pub fn cmp_quality(&self, other: &QualityValue) -> Result<Ordering> {
        self.cmp_scaled(&BigRational::one(), other)
    }
}

impl Serialize for QualityValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("QualityValue", 5)?;
        st.serialize_field("rational_part", &rat_string(&self.rational_part))?;
        st.serialize_field("P", &self.primes)?;
        st.serialize_field("lo", &self.value.lo_f64())?;
        st.serialize_field("hi", &self.value.hi_f64())?;
        st.serialize_field("trans_lo", &self.trans.lo_f64())?;
        st.serialize_field("trans_hi", &self.trans.hi_f64())?;
        st.end()
    }
}

fn phi_u64(n: u64) -> u64 {
    let mut m = n;
    let mut out = n;
    let mut d = 2;
    while d * d <= m {
        if m % d == 0 {
            out = out / d * (d - 1);
            while m % d == 0 {
                m /= d;
            }
        }
        d += 1;
    }
    if m > 1 {
        out = out / m * (m - 1);
    }
    out
}

/// The rational factor `ab/gcd(a,b)^2 * ab/(phi(a)phi(b))` of the quality.
fn multiplicative_factor(a: u64, b: u64) -> BigRational {
    let g = a.gcd(&b);
    let ab = BigInt::from(a) * BigInt::from(b);
    let first = BigRational::new(ab.clone(), BigInt::from(g) * BigInt::from(g));
    let second = BigRational::new(ab, BigInt::from(phi_u64(a)) * BigInt::from(phi_u64(b)));
    first * second
}

/// `q(G) = delta^d mu(E) ab/gcd(a,b)^2 ab/(phi(a)phi(b)) prod_{p in P} (1 - p^-tp)^-te`.
pub fn quality(g: &GcdGraph, consts: &ConstantsProfile) -> QualityValue {
    let delta = edge_density(g);
    let r = num_traits::pow(delta, consts.density_exp as usize) * g.mu_e() * multiplicative_factor(g.a, g.b);
    QualityValue::new(r, &g.p, consts)
}

/// Primes outside `P`, above the threshold, dividing the gcd of some edge.
pub fn remaining_primes(g: &GcdGraph, consts: &ConstantsProfile) -> BTreeSet<u64> {
    let mut out = BTreeSet::new();
    for &(x, y) in &g.e {
        let fy = &g.info[&y].factors;
        for p in g.info[&x].factors.primes() {
            if fy.is_divisible_by_prime(p) && !g.p.contains(&p) && BigInt::from(p) > consts.p_threshold {
                out.insert(p);
            }
        }
    }
    out
}

/// `G_{k,l}`: vertices with `p^k || v` and `p^l || w`, induced edges, data `(P+p, ap^k, bp^l)`.
pub fn vertex_split(g: &GcdGraph, p: u64, k: u8, l: u8) -> Result<Option<GcdGraph>> {
    if g.p.contains(&p) {
        return invalid(format!("vertex_split: {p} is already in P"));
    }
    if k > 1 || l > 1 {
        return invalid("vertex_split: k and l must be 0 or 1");
    }
    let side = |set: &BTreeSet<u64>, want: u8| -> BTreeSet<u64> {
        set.iter().copied().filter(|n| (n % p == 0) == (want == 1)).collect()
    };
    let v = side(&g.v, k);
    let w = side(&g.w, l);
    if v.is_empty() || w.is_empty() {
        return Ok(None);
    }
    let e = g.e.iter().copied().filter(|(x, y)| v.contains(x) && w.contains(y)).collect();
    let mut pp = g.p.clone();
    pp.insert(p);
    let a = if k == 1 { g.a * p } else { g.a };
    let b = if l == 1 { g.b * p } else { g.b };
    Ok(Some(g.derive(v, w, e, pp, a, b)))
}

/// Removes the edges with `p | gcd(v, w)` and adds `p` to `P`.
pub fn drop_symmetric_edges(g: &GcdGraph, p: u64) -> Result<GcdGraph> {
    if g.p.contains(&p) {
        return invalid(format!("drop_symmetric_edges: {p} is already in P"));
    }
    let e = g.e.iter().copied().filter(|(x, y)| x % p != 0 || y % p != 0).collect();
    let mut pp = g.p.clone();
    pp.insert(p);
    Ok(g.derive(g.v.clone(), g.w.clone(), e, pp, g.a, g.b))
}

/// Which hypothesis of the increment lemma a step falls under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LemmaPart {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepCase {
    Symmetric { k: u8 },
    Asymmetric { k: u8, l: u8 },
    EdgeDrop,
    PartB { k: u8, l: u8 },
}

impl fmt::Display for StepCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepCase::Symmetric { k } => write!(f, "symmetric({k})"),
            StepCase::Asymmetric { k, l } => write!(f, "asymmetric({k},{l})"),
            StepCase::EdgeDrop => write!(f, "edge_drop"),
            StepCase::PartB { k, l } => write!(f, "part_b({k},{l})"),
        }
    }
}

/// Result of one quality increment step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub prime: u64,
    pub part: LemmaPart,
    pub case: StepCase,
    pub graph: GcdGraph,
    pub alpha: BigRational,
    pub beta: BigRational,
    pub delta_before: BigRational,
    pub delta_after: BigRational,
    pub quality_before: QualityValue,
    pub quality_after: QualityValue,
    /// Certified `delta'^m q(G') >= gain * delta^m q(G)` for `m = 0, 1`.
    pub quality_ok: [bool; 2],
    pub gain_factor: u32,
    /// The choice prescribed by the decision procedure did not certify and a
    /// later candidate in the fixed order was taken instead.
    pub fallback: bool,
}

impl StepOutcome {
    /// Part (a) promises both `m`; part (b) promises `m = 0`.
    pub fn required_ok(&self) -> bool {
        match self.part {
            LemmaPart::A => self.quality_ok[0] && self.quality_ok[1],
            LemmaPart::B => self.quality_ok[0],
        }
    }
}

impl Serialize for StepOutcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let g = &self.graph;
        let mut st = s.serialize_struct("StepOutcome", 16)?;
        st.serialize_field("prime", &self.prime)?;
        st.serialize_field("part", &self.part)?;
        st.serialize_field("case", &self.case)?;
        st.serialize_field("gain_factor", &self.gain_factor)?;
        st.serialize_field("quality_ok", &self.quality_ok)?;
        st.serialize_field("fallback", &self.fallback)?;
        st.serialize_field("alpha", &rat_string(&self.alpha))?;
        st.serialize_field("beta", &rat_string(&self.beta))?;
        st.serialize_field("delta_before", &rat_string(&self.delta_before))?;
        st.serialize_field("delta_after", &rat_string(&self.delta_after))?;
        st.serialize_field("quality_before", &self.quality_before)?;
        st.serialize_field("quality_after", &self.quality_after)?;
        st.serialize_field("V_len", &g.v.len())?;
        st.serialize_field("W_len", &g.w.len())?;
        st.serialize_field("E_len", &g.e.len())?;
        st.serialize_field("a", &g.a)?;
        st.serialize_field("b", &g.b)?;
        st.end()
    }
}

/// Closed form of `delta(G_kl)^m q(G_kl) / (delta(G)^m q(G))` in terms of
/// `x = alpha_k beta_l` and `d_kl = mu(E_kl)/mu(E)`.
pub fn quality_ratio_formula(
    x: &BigRational,
    d_kl: &BigRational,
    p: u64,
    k: u8,
    l: u8,
    m: u32,
    consts: &ConstantsProfile,
    prec: u32,
) -> Enclosure {
    let d = consts.density_exp + m;
    let mut r = num_traits::pow(d_kl.clone(), (d + 1) as usize) / num_traits::pow(x.clone(), d as usize);
    if k != l {
        r *= int(p);
    }
    r *= num_traits::pow(rat(p as i64, p as i64 - 1), (k + l) as usize);
    trans_product(&[p], consts, prec).scale(&r).round(prec)
}

struct Candidate {
    case: StepCase,
    graph: GcdGraph,
    gain: u32,
}

fn certify(
    g: &GcdGraph,
    q: &QualityValue,
    delta: &BigRational,
    cand: &GcdGraph,
    gain: u32,
    consts: &ConstantsProfile,
) -> Result<[bool; 2]> {
    let qn = quality(cand, consts);
    let dn = edge_density(cand);
    let _ = g;
    let mut ok = [false; 2];
    for m in 0..2 {
        let lhs = qn.scaled(&num_traits::pow(dn.clone(), m));
        let factor = int(gain) * num_traits::pow(delta.clone(), m);
        ok[m] = lhs.cmp_scaled(&factor, q)? != Ordering::Less;
    }
    Ok(ok)
}

/// One application of the quality increment lemma at the prime `p`.
pub fn quality_increment_step(g: &GcdGraph, p: u64, consts: &ConstantsProfile) -> Result<StepOutcome> {
    if g.e.is_empty() {
        return invalid("quality_increment_step: empty edge set");
    }
    if !remaining_primes(g, consts).contains(&p) {
        return invalid(format!("quality_increment_step: {p} is not a remaining prime"));
    }
    let (alpha, beta) = g.proportions(p);
    let mu_e = g.mu_e();
    let delta = edge_density(g);
    let q = quality(g, consts);
    let one = BigRational::one();
    let thr = &one - BigRational::from_integer(consts.asym_coeff.clone()) / int(p);
    let part = if alpha.clone().min(beta.clone()) <= thr { LemmaPart::A } else { LemmaPart::B };

    let order: [(u8, u8); 4] = [(1, 1), (0, 0), (1, 0), (0, 1)];
    let splits: Vec<Option<GcdGraph>> =
        order.iter().map(|&(k, l)| vertex_split(g, p, k, l)).collect::<Result<_>>()?;
    let share = |k: u8, l: u8| -> BigRational {
        let a = if k == 1 { alpha.clone() } else { &one - &alpha };
        let b = if l == 1 { beta.clone() } else { &one - &beta };
        a * b
    };
    let d_of = |s: &GcdGraph| s.mu_edge_set(&s.e) / &mu_e;

    let (mut chosen, mut ok, mut fallback) = (None::<Candidate>, [false; 2], false);
    match part {
        LemmaPart::A => {
            let d = consts.density_exp as usize;
            for (i, &(k, l)) in order[..2].iter().enumerate() {
                let Some(s) = &splits[i] else { continue };
                let dk = d_of(s);
                let x = share(k, l);
                if !dk.is_zero() && num_traits::pow(dk, d + 1) >= num_traits::pow(x, d) {
                    chosen = Some(Candidate { case: StepCase::Symmetric { k }, graph: s.clone(), gain: 1 });
                    break;
                }
            }
            if chosen.is_none() {
                let mixed = (&alpha * (&one - &beta) + (&one - &alpha) * &beta) / int(5);
                for (i, &(k, l)) in order.iter().enumerate().skip(2) {
                    let Some(s) = &splits[i] else { continue };
                    let dk = d_of(s);
                    if dk.is_zero() || dk < mixed {
                        continue;
                    }
                    let c = certify(g, &q, &delta, s, 2, consts)?;
                    if c[0] && c[1] {
                        chosen = Some(Candidate { case: StepCase::Asymmetric { k, l }, graph: s.clone(), gain: 2 });
                        break;
                    }
                }
            }
            let primary = match chosen.take() {
                Some(c) => c,
                None => Candidate { case: StepCase::EdgeDrop, graph: drop_symmetric_edges(g, p)?, gain: 1 },
            };
            ok = certify(g, &q, &delta, &primary.graph, primary.gain, consts)?;
            if ok[0] && ok[1] {
                chosen = Some(primary);
            } else {
                // First candidate in the fixed order that certifies.
                let mut pool: Vec<Candidate> = Vec::new();
                for (i, &(k, l)) in order.iter().enumerate() {
                    if let Some(s) = &splits[i] {
                        let case = if k == l { StepCase::Symmetric { k } } else { StepCase::Asymmetric { k, l } };
                        pool.push(Candidate { case, graph: s.clone(), gain: if k == l { 1 } else { 2 } });
                    }
                }
                pool.push(Candidate { case: StepCase::EdgeDrop, graph: drop_symmetric_edges(g, p)?, gain: 1 });
                for c in pool {
                    if c.case == primary.case || c.graph.e.is_empty() {
                        continue;
                    }
                    let o = certify(g, &q, &delta, &c.graph, c.gain, consts)?;
                    if o[0] && o[1] {
                        ok = o;
                        chosen = Some(c);
                        fallback = true;
                        break;
                    }
                }
                if chosen.is_none() {
                    chosen = Some(primary);
                }
            }
        }
        LemmaPart::B => {
            let mut best: Option<(Candidate, [bool; 2], Enclosure)> = None;
            for (i, &(k, l)) in order.iter().enumerate() {
                let Some(s) = &splits[i] else { continue };
                if s.e.is_empty() {
                    continue;
                }
                let c = Candidate { case: StepCase::PartB { k, l }, graph: s.clone(), gain: 1 };
                let o = certify(g, &q, &delta, s, 1, consts)?;
                if o[0] {
                    chosen = Some(c);
                    ok = o;
                    break;
                }
                let r = quality_ratio_formula(&share(k, l), &d_of(s), p, k, l, 0, consts, 64);
                if best.as_ref().map_or(true, |(_, _, br)| r.lo() > br.lo()) {
                    best = Some((c, o, r));
                }
            }
            if chosen.is_none() {
                let (c, o, _) = best.ok_or_else(|| Error::Invariant("part (b) without a non-empty split".into()))?;
                chosen = Some(c);
                ok = o;
            }
        }
    }
    let c = chosen.expect("a candidate is always selected");
    Ok(StepOutcome {
        prime: p,
        part,
        case: c.case,
        delta_after: edge_density(&c.graph),
        quality_after: quality(&c.graph, consts),
        graph: c.graph,
        alpha,
        beta,
        delta_before: delta,
        quality_before: q,
        quality_ok: ok,
        gain_factor: c.gain,
        fallback,
    })
}

fn part_a_applies(g: &GcdGraph, p: u64, consts: &ConstantsProfile) -> bool {
    let (alpha, beta) = g.proportions(p);
    let thr = BigRational::one() - BigRational::from_integer(consts.asym_coeff.clone()) / int(p);
    alpha.min(beta) <= thr
}

fn t_power(t: &BigRational, e: u32) -> BigRational {
    num_traits::pow(t.clone(), e as usize)
}

/// Edges whose large remaining primes dividing `vw/gcd(v,w)^2` have reciprocal sum within budget.
pub fn good_edges(g: &GcdGraph, r: &BTreeSet<u64>, t: &BigRational, consts: &ConstantsProfile) -> BTreeSet<(u64, u64)> {
    let floor = t_power(t, consts.good_prime_exp);
    g.e.iter()
        .copied()
        .filter(|&(x, y)| {
            let fx = &g.info[&x].factors;
            let fy = &g.info[&y].factors;
            let s: BigRational = numtheory::correlation_primes(fx, fy, CorrelationVariant::GcdSquared)
                .into_iter()
                .filter(|p| r.contains(p) && int(*p) > floor)
                .map(|p| rat(1, p as i64))
                .sum();
            s <= consts.good_l_budget
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTaken {
    Case1,
    Case2,
}

/// Record of a compression run.
#[derive(Clone, Debug, Serialize)]
pub struct CompressionTrace {
    #[serde(serialize_with = "ser_rat")]
    pub t: BigRational,
    pub steps: Vec<StepOutcome>,
    /// `[J1, end]`: steps before `J1` are stage 1.
    pub stage_boundaries: Vec<usize>,
    pub case_taken: Option<CaseTaken>,
    #[serde(rename = "D_set")]
    pub d_set: Vec<u64>,
    #[serde(serialize_with = "ser_rat_opt")]
    pub good_edge_fraction: Option<BigRational>,
    pub q_initial: QualityValue,
    pub q_stage1: QualityValue,
    pub q_terminal: QualityValue,
    pub empty_terminal: bool,
}

impl CompressionTrace {
    pub fn all_required_ok(&self) -> bool {
        self.steps.iter().all(StepOutcome::required_ok)
    }

    /// Indices of steps whose required certification failed.
    pub fn failed_steps(&self) -> Vec<usize> {
        self.steps.iter().enumerate().filter(|(_, s)| !s.required_ok()).map(|(i, _)| i).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Compression {
    pub terminal: GcdGraph,
    pub trace: CompressionTrace,
}

/// Runs stage 1 (part (a) steps), decides the case, optionally filters good
/// edges, then steps until no remaining prime is left.
pub fn compress(g0: &GcdGraph, t: &BigRational, consts: &ConstantsProfile) -> Result<Compression> {
    g0.check_valid()?;
    if g0.e.is_empty() {
        return invalid("compress: empty edge set");
    }
    if !t.is_positive() {
        return invalid("compress: t must be positive");
    }
    let q_initial = quality(g0, consts);
    let mut g = g0.clone();
    let mut steps: Vec<StepOutcome> = Vec::new();
    loop {
        if g.e.is_empty() {
            break;
        }
        let next = remaining_primes(&g, consts).into_iter().find(|&p| part_a_applies(&g, p, consts));
        let Some(p) = next else { break };
        let s = quality_increment_step(&g, p, consts)?;
        g = s.graph.clone();
        steps.push(s);
    }
    let j1 = steps.len();
    let d_set: Vec<u64> = steps.iter().map(|s| s.prime).filter(|&p| (g.a % p == 0) != (g.b % p == 0)).collect();
    let q_stage1 = quality(&g, consts);
    let mut case_taken = None;
    let mut good_edge_fraction = None;
    if !g.e.is_empty() {
        let case1 = q_stage1.cmp_scaled(&t_power(t, consts.case1_exp), &q_initial)? != Ordering::Less;
        if case1 {
            case_taken = Some(CaseTaken::Case1);
        } else {
            case_taken = Some(CaseTaken::Case2);
            let r = remaining_primes(&g, consts);
            let good = good_edges(&g, &r, t, consts);
            let before = g.mu_e();
            g = g.with_edges(good)?;
            good_edge_fraction = Some(g.mu_e() / before);
        }
        while !g.e.is_empty() {
            let Some(p) = remaining_primes(&g, consts).into_iter().next() else { break };
            let s = quality_increment_step(&g, p, consts)?;
            g = s.graph.clone();
            steps.push(s);
        }
    }
    let stage_boundaries = vec![j1, steps.len()];
    Ok(Compression {
        trace: CompressionTrace {
            t: t.clone(),
            stage_boundaries,
            case_taken,
            d_set,
            good_edge_fraction,
            q_initial,
            q_stage1,
            q_terminal: quality(&g, consts),
            empty_terminal: g.e.is_empty(),
            steps,
        },
        terminal: g,
    })
}

/// CSV summary: `step,prime,case,alpha,beta,delta,q_lo,q_hi`.
pub fn write_trace_csv(trace: &CompressionTrace, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "step,prime,case,alpha,beta,delta,q_lo,q_hi")?;
    for (i, s) in trace.steps.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{:e},{:e}",
            i,
            s.prime,
            s.case,
            certified::to_f64(&s.alpha),
            certified::to_f64(&s.beta),
            certified::to_f64(&s.delta_after),
            s.quality_after.enclosure().lo_f64(),
            s.quality_after.enclosure().hi_f64(),
        )?;
    }
    Ok(())
}

fn check_squarefree(s: &[u64]) -> Result<Vec<FactoredInt>> {
    s.iter()
        .map(|&q| {
            let f = numtheory::factor_u64(q)?;
            if !f.is_squarefree() {
                return invalid(format!("{q} is not square-free"));
            }
            Ok(f)
        })
        .collect()
}

/// `B_t`: ordered pairs with `gcd(q,r) > Q/(Nt)` and `L_t(q,r) > L_threshold`.
pub fn build_bt(
    s: &[u64],
    q: u64,
    n: &BigRational,
    t: &BigRational,
    consts: &ConstantsProfile,
) -> Result<Vec<(u64, u64)>> {
    if !n.is_positive() || !t.is_positive() {
        return invalid("build_Bt: N and t must be positive");
    }
    let mut s: Vec<u64> = s.to_vec();
    s.sort_unstable();
    s.dedup();
    let f = check_squarefree(&s)?;
    let floor = int(q) / (n * t);
    let out: Vec<Vec<(u64, u64)>> = (0..s.len())
        .into_par_iter()
        .map(|i| {
            (0..s.len())
                .filter(|&j| {
                    int(s[i].gcd(&s[j])) > floor
                        && numtheory::correlation_prime_sum(&f[i], &f[j], t, CorrelationVariant::GcdSquared)
                            > consts.l_threshold
                })
                .map(|j| (s[i], s[j]))
                .collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// Square-free integers of `[Q, 2Q]`, dropping the largest until the weight is at most `N`.
pub fn squarefree_support(q: u64, n: &BigRational) -> Result<Vec<u64>> {
    let mut s: Vec<u64> = (q..=2 * q)
        .filter(|&m| numtheory::factor_u64(m).map(|f| f.is_squarefree()).unwrap_or(false))
        .collect();
    let mut weight: BigRational =
        s.iter().map(|&m| numtheory::phi_ratio(&numtheory::factor_u64(m).expect("bounded"))).sum();
    while &weight > n {
        let m = s.pop().expect("positive weight");
        weight -= numtheory::phi_ratio(&numtheory::factor_u64(m)?);
    }
    Ok(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct BtRow {
    #[serde(serialize_with = "ser_rat")]
    pub t: BigRational,
    pub pairs: usize,
    #[serde(serialize_with = "ser_rat")]
    pub mu_bt: BigRational,
    /// `mu(B_t) t / N^2`.
    #[serde(serialize_with = "ser_rat")]
    pub ratio: BigRational,
}

#[derive(Clone, Debug, Serialize)]
pub struct MertensWindow {
    pub tmax: u64,
    /// `max_{2 <= t <= tmax} sum_{t < p <= t^2} 1/p`.
    #[serde(serialize_with = "ser_rat")]
    pub max_sum: BigRational,
    pub argmax: u64,
}

/// Scan of `sum_{t<p<=t^2} 1/p` over integers `2 <= t <= tmax`.
pub fn mertens_window_scan(tmax: u64) -> Result<MertensWindow> {
    if tmax < 2 {
        return invalid("mertens_window_scan: tmax must be at least 2");
    }
    let table = numtheory::sieve(tmax * tmax)?;
    let primes = table.primes();
    // Every window sum shares the denominator D = prod p, so windows compare by numerator.
    let d: BigInt = primes.iter().map(|&p| BigInt::from(p)).product();
    let mut prefix = vec![BigInt::zero()];
    for &p in primes {
        let next = prefix.last().unwrap() + &d / p;
        prefix.push(next);
    }
    let upto = |x: u64| primes.partition_point(|&p| p <= x);
    let mut best = (BigInt::zero(), 2);
    for t in 2..=tmax {
        let s = &prefix[upto(t * t)] - &prefix[upto(t)];
        if s > best.0 {
            best = (s, t);
        }
    }
    Ok(MertensWindow { tmax, max_sum: BigRational::new(best.0, d), argmax: best.1 })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpecialCaseReport {
    #[serde(rename = "Q")]
    pub q: u64,
    #[serde(rename = "N", serialize_with = "ser_rat")]
    pub n: BigRational,
    pub support_size: usize,
    #[serde(serialize_with = "ser_rat")]
    pub weight: BigRational,
    /// Enclosure of `sum phi(q)phi(r)/(qr) exp(sum 1/p)` over all ordered pairs.
    #[serde(serialize_with = "ser_enclosure")]
    pub bilinear_lhs: Enclosure,
    #[serde(serialize_with = "ser_enclosure")]
    pub bilinear_ratio: Enclosure,
    pub ladder: Vec<BtRow>,
    pub delta_link: Option<WindowReport>,
    pub mertens_window: MertensWindow,
}

/// End-to-end numbers for the square-free special case on a concrete support.
pub fn special_case_harness(
    q: u64,
    n: &BigRational,
    s: &[u64],
    ladder: &[BigRational],
    consts: &ConstantsProfile,
    delta_link: bool,
) -> Result<SpecialCaseReport> {
    if q < 2 || n < &int(2) || int(q) < *n {
        return invalid("special_case_harness: need Q >= N >= 2");
    }
    let mut s: Vec<u64> = s.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&bad) = s.iter().find(|&&m| m < q || m > 2 * q) {
        return invalid(format!("special_case_harness: {bad} is outside [Q, 2Q]"));
    }
    let f = check_squarefree(&s)?;
    let weights: Vec<BigRational> = f.iter().map(numtheory::phi_ratio).collect();
    let weight: BigRational = weights.iter().sum();
    if weight < n / int(2) || &weight > n {
        return Err(Error::Precondition(format!(
            "total weight {} is outside [N/2, N]",
            rat_string(&weight)
        )));
    }
    // Group pair weights by the exponent so each exponential is evaluated once.
    let groups: BTreeMap<BigRational, BigRational> = (0..s.len())
        .into_par_iter()
        .map(|i| {
            let mut local: BTreeMap<BigRational, BigRational> = BTreeMap::new();
            for j in 0..s.len() {
                let g = s[i].gcd(&s[j]);
                let floor = int(q) / (n * int(g));
                let x = numtheory::correlation_prime_sum(&f[i], &f[j], &floor, CorrelationVariant::GcdSquared);
                *local.entry(x).or_insert_with(BigRational::zero) += &weights[i] * &weights[j];
            }
            local
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert_with(BigRational::zero) += v;
            }
            a
        });
    let prec = DEFAULT_PRECISION;
    let mut lhs = Enclosure::zero();
    for (x, wsum) in &groups {
        lhs = (&lhs + &certified::exp(x, prec).scale(wsum)).round(prec);
    }
    let n2 = n * n;
    let bilinear_ratio = lhs.scale(&n2.recip()).round(prec);
    let mut rows = Vec::new();
    for t in ladder {
        let bt = build_bt(&s, q, n, t, consts)?;
        let idx: BTreeMap<u64, usize> = s.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        let mu_bt: BigRational = bt.iter().map(|(x, y)| &weights[idx[x]] * &weights[idx[y]]).sum();
        rows.push(BtRow { t: t.clone(), pairs: bt.len(), ratio: &mu_bt * t / &n2, mu_bt });
    }
    let delta_link = if delta_link {
        let delta = approx_sets::delta_uniform_support(&s, n)?;
        Some(approx_sets::window_report(&delta, q, 2 * q)?)
    } else {
        None
    };
    Ok(SpecialCaseReport {
        q,
        n: n.clone(),
        support_size: s.len(),
        weight,
        bilinear_lhs: lhs,
        bilinear_ratio,
        ladder: rows,
        delta_link,
        mertens_window: mertens_window_scan(100)?,
    })
}

/// Certified enclosure of `(ab)^(d/(d+1)) + ((1-a)(1-b))^(d/(d+1)) + 2/5 (a(1-b) + (1-a)b)`
/// with `d = 9`.
pub fn key_inequality_lhs(alpha: &BigRational, beta: &BigRational, prec: u32) -> Enclosure {
    let one = BigRational::one();
    let x = alpha * beta;
    let y = (&one - alpha) * (&one - beta);
    let mixed = (alpha * (&one - beta) + (&one - alpha) * beta) * rat(2, 5);
    let s = &certified::pow_rational(&x, 9, 10, prec) + &certified::pow_rational(&y, 9, 10, prec);
    s.add_rat(&mixed).round(prec)
}

/// Enclosures `(rhs, c)` of the part (b) sufficient inequality at `alpha = 1 - A/p`,
/// `beta = 1 - B/p`, with `c = (1 - p^(-3/2))^-1`.
pub fn part_b_inequality(p: &BigInt, a: &BigRational, b: &BigRational, prec: u32) -> (Enclosure, Enclosure) {
    let one = BigRational::one();
    let pr = BigRational::from_integer(p.clone());
    let pw = |x: &BigRational, num: i64, den: u32| certified::pow_rational(x, num, den, prec);
    let ra = &one - a / &pr;
    let rb = &one - b / &pr;
    let first = &(&pw(&ra, 9, 10) * &pw(&rb, 9, 10)) * &pw(&(&one - pr.recip()), 1, 5);
    let second = pw(&(a * b), 9, 10).div(&pw(&pr, 9, 5));
    let third = (&(&pw(&ra, 9, 10) * &pw(b, 9, 10)) + &(&pw(a, 9, 10) * &pw(&rb, 9, 10))).scale(&pr.recip());
    let rhs = (&(&first + &second) + &third).round(prec);
    let c = (&Enclosure::one() - &pw(&pr, -3, 2)).recip().round(prec);
    (rhs, c)
}

/// The corrected upper bound chain for the part (b) right-hand side:
/// `1 - (0.9A+0.9B+0.2)/p + (0.9A+0.9B+0.2)^2/(2p^2) + K/p^(9/5) + (A^(9/10)+B^(9/10))/p`,
/// with `K = 5^22`, which bounds `(AB)^(9/10)` for `A, B <= 5^12`.
pub fn part_b_chain_bound(p: &BigInt, a: &BigRational, b: &BigRational, prec: u32) -> Enclosure {
    let pr = BigRational::from_integer(p.clone());
    let s = (a + b) * rat(9, 10) + rat(1, 5);
    let base = BigRational::one() - &s / &pr + &s * &s / (int(2) * &pr * &pr);
    let k = BigRational::from_integer(num_traits::pow(BigInt::from(5), 22));
    let tail = certified::pow_rational(&pr, -9, 5, prec).scale(&k);
    let roots = (&certified::pow_rational(a, 9, 10, prec) + &certified::pow_rational(b, 9, 10, prec)).scale(&pr.recip());
    (&tail + &roots).add_rat(&base).round(prec)
}
