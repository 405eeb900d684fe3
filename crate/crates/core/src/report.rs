//! Run reports and their JSON form.
//!
//! Keys are sorted and every double is printed with 17 significant digits,
//! so equal runs give byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::model::ModelSpectrum;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SpectrumEntry {
    pub lambda: f64,
    pub multiplicity: usize,
    pub residual: f64,
    pub min_abs: f64,
}

impl SpectrumEntry {
    pub fn from_spectrum(s: &ModelSpectrum) -> Vec<SpectrumEntry> {
        s.entries
            .iter()
            .map(|e| SpectrumEntry {
                lambda: e.lambda,
                multiplicity: e.multiplicity,
                residual: e.residual,
                min_abs: e.min_abs.iter().copied().fold(f64::INFINITY, f64::min),
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct Report {
    pub command: String,
    pub residuals: BTreeMap<String, f64>,
    pub norms: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<SpectrumEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<Option<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign_sigma: Option<i32>,
    pub seed: u64,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Report { command: command.into(), seed, ..Default::default() }
    }

    pub fn residual(&mut self, key: &str, value: f64) -> &mut Self {
        self.residuals.insert(key.into(), value);
        self
    }

    pub fn norm(&mut self, key: &str, value: f64) -> &mut Self {
        self.norms.insert(key.into(), value);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }
}

/// Serializes any value with sorted keys and 17-digit doubles.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

/// 17 significant digits; fixed notation for `1e-5 ≤ |x| < 1e16`, `null` for non-finite values.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return "0.0".into();
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..16).contains(&exp) {
        format!("{x:.prec$}", prec = (16 - exp) as usize)
    } else {
        sci
    }
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else {
                out.push_str(&format_f64(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, item, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push_str(": ");
                write_value(out, &map[*k], depth + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}
