//! Serialization helpers: big numbers as decimal strings, rationals as
//! `"num/den"`.

use std::fmt::Display;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serializer};

use crate::certified::Enclosure;
use crate::error::{Error, Result};

pub fn ser_display<T: Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

pub fn ser_rat<S: Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rat_string(v))
}

pub fn ser_rat_opt<S: Serializer>(v: &Option<BigRational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(r) => s.serialize_str(&rat_string(r)),
        None => s.serialize_none(),
    }
}

pub fn ser_rat_vec<S: Serializer>(v: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(rat_string))
}

pub fn de_rat<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
    let text = String::deserialize(d)?;
    parse_rat(&text).map_err(serde::de::Error::custom)
}

pub fn ser_enclosure<S: Serializer>(e: &Enclosure, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut st = s.serialize_struct("Enclosure", 4)?;
    st.serialize_field("lo", &rat_string(e.lo()))?;
    st.serialize_field("hi", &rat_string(e.hi()))?;
    st.serialize_field("lo_f64", &e.lo_f64())?;
    st.serialize_field("hi_f64", &e.hi_f64())?;
    st.end()
}

pub fn ser_enclosure_opt<S: Serializer>(e: &Option<Enclosure>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match e {
        Some(e) => ser_enclosure(e, s),
        None => s.serialize_none(),
    }
}

/// `"num/den"`, or just `"num"` for integers.
pub fn rat_string(v: &BigRational) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// Parses `"n"`, `"n/d"` or a `^` power such as `"5^100"` in either part.
pub fn parse_rat(text: &str) -> Result<BigRational> {
    let text = text.trim();
    let (n, d) = match text.split_once('/') {
        Some((n, d)) => (parse_int(n)?, parse_int(d)?),
        None => (parse_int(text)?, BigInt::from(1)),
    };
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {text:?}")));
    }
    Ok(BigRational::new(n, d))
}

pub fn parse_int(text: &str) -> Result<BigInt> {
    let text = text.trim();
    let bad = || Error::Parse(format!("not an integer: {text:?}"));
    match text.split_once('^') {
        Some((b, e)) => {
            let b: BigInt = b.trim().parse().map_err(|_| bad())?;
            let e: u32 = e.trim().parse().map_err(|_| bad())?;
            Ok(num_traits::pow(b, e as usize))
        }
        None => text.parse().map_err(|_| bad()),
    }
}
