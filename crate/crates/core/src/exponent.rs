//! Serde adapter for Lebesgue exponents: `inf` round-trips as the string
//! `"inf"` (JSON has no infinity); `"inf"`, `"infinity"` and `null` all read
//! back as `f64::INFINITY`.

use serde::{de, Deserialize, Deserializer, Serializer};

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Num(f64),
    Text(String),
    Null(()),
}

fn decode<E: de::Error>(r: Repr) -> Result<f64, E> {
    match r {
        Repr::Num(x) => Ok(x),
        Repr::Null(()) => Ok(f64::INFINITY),
        Repr::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
            other => other.parse().map_err(|_| E::custom(format!("not an exponent: {s:?}"))),
        },
    }
}

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if *v == f64::INFINITY {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    decode(Repr::deserialize(d)?)
}

pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            if *x == f64::INFINITY {
                seq.serialize_element("inf")?;
            } else {
                seq.serialize_element(x)?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?.into_iter().map(decode).collect()
    }
}

pub mod opt_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::vec::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        Option::<Vec<Repr>>::deserialize(d)?.map(|v| v.into_iter().map(decode).collect()).transpose()
    }
}

#[cfg(test)]
mod tests {
    #[derive(serde::Serialize, serde::Deserialize, Debug, PartialEq)]
    struct P {
        #[serde(with = "super")]
        p: f64,
        #[serde(with = "super::vec")]
        ps: Vec<f64>,
    }

    #[test]
    fn round_trip() {
        let v = P { p: f64::INFINITY, ps: vec![1.0, f64::INFINITY] };
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"p":"inf","ps":[1.0,"inf"]}"#);
        assert_eq!(serde_json::from_str::<P>(&s).unwrap(), v);
        let w: P = serde_json::from_str(r#"{"p": null, "ps": [2, "Infinity"]}"#).unwrap();
        assert_eq!(w, P { p: f64::INFINITY, ps: vec![2.0, f64::INFINITY] });
        assert!(serde_json::from_str::<P>(r#"{"p": "x", "ps": []}"#).is_err());
    }
}
