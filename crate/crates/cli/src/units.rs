//! Physical quantities in config files: bare numbers are SI, strings may
//! carry a unit suffix ("1.253 mm", "600 µm", "810nm", "18 rad/mm").

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use std::fmt;

fn split_number(text: &str) -> Result<(f64, &str), String> {
    let text = text.trim();
    let end = text
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .map_or(text.len(), |(i, _)| i);
    let (number, unit) = text.split_at(end);
    let value: f64 = number
        .parse()
        .map_err(|_| format!("cannot read a number from {text:?}"))?;
    Ok((value, unit.trim()))
}

pub fn parse_length(text: &str) -> Result<f64, String> {
    let (value, unit) = split_number(text)?;
    let scale = match unit {
        "" | "m" => 1.0,
        "cm" => 1e-2,
        "mm" => 1e-3,
        "um" | "µm" | "μm" => 1e-6,
        "nm" => 1e-9,
        other => return Err(format!("unknown length unit {other:?} in {text:?} (use m, cm, mm, µm/um or nm)")),
    };
    Ok(value * scale)
}

pub fn parse_wavenumber(text: &str) -> Result<f64, String> {
    let (value, unit) = split_number(text)?;
    let per = unit
        .strip_prefix("rad/")
        .or_else(|| unit.strip_prefix("1/"))
        .or_else(|| unit.strip_prefix('/'));
    let scale = match (unit, per) {
        ("", _) => 1.0,
        (_, Some(length)) => 1.0 / parse_length(&format!("1 {length}"))?,
        _ => return Err(format!("unknown wavenumber unit {unit:?} in {text:?} (use rad/mm, rad/m, ...)")),
    };
    Ok(value * scale)
}

macro_rules! quantity {
    ($name:ident, $parse:ident, $what:literal) => {
        /// Stored in SI units.
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub f64);

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                struct V;
                impl Visitor<'_> for V {
                    type Value = $name;
                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        write!(f, "{} as a number (SI) or a string with a unit", $what)
                    }
                    fn visit_f64<E: de::Error>(self, v: f64) -> Result<$name, E> {
                        Ok($name(v))
                    }
                    fn visit_i64<E: de::Error>(self, v: i64) -> Result<$name, E> {
                        Ok($name(v as f64))
                    }
                    fn visit_u64<E: de::Error>(self, v: u64) -> Result<$name, E> {
                        Ok($name(v as f64))
                    }
                    fn visit_str<E: de::Error>(self, v: &str) -> Result<$name, E> {
                        $parse(v).map($name).map_err(E::custom)
                    }
                }
                d.deserialize_any(V)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_f64(self.0)
            }
        }
    };
}

quantity!(Length, parse_length, "a length");
quantity!(WaveNumber, parse_wavenumber, "a wavenumber");
