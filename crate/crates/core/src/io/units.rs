//! Quantities with optional units in configuration files.
//!
//! A bare JSON number is taken to be in SI units. A string carries an
//! explicit unit, e.g. `"1.2 km"`, `"90 km/h"`, `"2 min"`, `"1800 veh/h"`.

use serde::{Deserialize, Deserializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Speed,
    Time,
    Flow,
}

impl Dimension {
    fn name(self) -> &'static str {
        match self {
            Self::Length => "length",
            Self::Speed => "speed",
            Self::Time => "time",
            Self::Flow => "flow",
        }
    }

    /// Factor converting `unit` into SI, if the unit belongs to this dimension.
    fn factor(self, unit: &str) -> Option<f64> {
        let f = match (self, unit) {
            (Self::Length, "m") => 1.0,
            (Self::Length, "km") => 1000.0,
            (Self::Speed, "m/s") => 1.0,
            (Self::Speed, "km/h" | "kph") => 1000.0 / 3600.0,
            (Self::Time, "s") => 1.0,
            (Self::Time, "min") => 60.0,
            (Self::Time, "h") => 3600.0,
            (Self::Flow, "veh/s") => 1.0,
            (Self::Flow, "veh/min") => 1.0 / 60.0,
            (Self::Flow, "veh/h") => 1.0 / 3600.0,
            _ => return None,
        };
        Some(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("empty quantity")]
    Empty,
    #[error("cannot parse number in `{0}`")]
    BadNumber(String),
    #[error("unknown {dimension} unit `{unit}`")]
    UnknownUnit { dimension: &'static str, unit: String },
    #[error("quantity `{0}` is not finite")]
    NotFinite(String),
}

/// Parses `"<number> [unit]"` into SI units.
pub fn parse_quantity(text: &str, dimension: Dimension) -> Result<f64, UnitError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(UnitError::Empty);
    }
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| UnitError::BadNumber(text.to_string()))?;
    let unit = unit.trim();
    let factor = if unit.is_empty() {
        1.0
    } else {
        dimension.factor(unit).ok_or_else(|| UnitError::UnknownUnit {
            dimension: dimension.name(),
            unit: unit.to_string(),
        })?
    };
    let si = value * factor;
    if si.is_finite() {
        Ok(si)
    } else {
        Err(UnitError::NotFinite(text.to_string()))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Number(f64),
    Text(String),
}

fn quantity<'de, D: Deserializer<'de>>(de: D, dimension: Dimension) -> Result<f64, D::Error> {
    match Raw::deserialize(de)? {
        Raw::Number(x) => Ok(x),
        Raw::Text(s) => parse_quantity(&s, dimension).map_err(serde::de::Error::custom),
    }
}

pub fn length<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
    quantity(de, Dimension::Length)
}

pub fn speed<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
    quantity(de, Dimension::Speed)
}

pub fn time<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
    quantity(de, Dimension::Time)
}

pub fn flow<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
    quantity(de, Dimension::Flow)
}

pub fn optional_time<'de, D: Deserializer<'de>>(de: D) -> Result<Option<f64>, D::Error> {
    match Option::<Raw>::deserialize(de)? {
        None => Ok(None),
        Some(Raw::Number(x)) => Ok(Some(x)),
        Some(Raw::Text(s)) => parse_quantity(&s, Dimension::Time)
            .map(Some)
            .map_err(serde::de::Error::custom),
    }
}

/// A list of times, each a number or a unit string.
pub fn times<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
    Vec::<Raw>::deserialize(de)?
        .into_iter()
        .map(|r| match r {
            Raw::Number(x) => Ok(x),
            Raw::Text(s) => parse_quantity(&s, Dimension::Time).map_err(serde::de::Error::custom),
        })
        .collect()
}
