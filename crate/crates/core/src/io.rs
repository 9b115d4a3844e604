//! JSON formats for measures, kernels and laws, CSV array export and PGM heatmaps.
//!
//! Every object is a JSON map with a `"type"` tag. Measures list their support in
//! lexicographic configuration order; floats are written in shortest round-trip form,
//! so reading back gives bit-identical values.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{CutError, Result};
use crate::kernel::StepKernel;
use crate::law::{Atom, Law};
use crate::measure::{Config, DiscreteMeasure};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportEntry {
    pub config: Config,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomJson {
    pub weight: f64,
    /// `values[j * q + a]`
    pub values: Vec<f64>,
}

/// Serialized form of any supported object.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ObjectJson {
    Measure { q: usize, n: usize, support: Vec<SupportEntry> },
    Kernel { q: usize, row_weights: Vec<f64>, col_weights: Vec<f64>, blocks: Vec<f64> },
    Law { q: usize, col_weights: Vec<f64>, atoms: Vec<AtomJson> },
}

/// A validated object.
#[derive(Clone, Debug, PartialEq)]
pub enum Object {
    Measure(DiscreteMeasure),
    Kernel(StepKernel),
    Law(Law),
}

impl Object {
    pub fn kind(&self) -> &'static str {
        match self {
            Object::Measure(_) => "measure",
            Object::Kernel(_) => "kernel",
            Object::Law(_) => "law",
        }
    }

    /// The law of the object; measures are embedded.
    pub fn to_law(&self) -> Law {
        match self {
            Object::Measure(m) => Law::embed(m),
            Object::Kernel(k) => Law::from_kernel(k),
            Object::Law(l) => l.clone(),
        }
    }

    pub fn to_kernel(&self) -> StepKernel {
        match self {
            Object::Kernel(k) => k.clone(),
            other => other.to_law().to_kernel(),
        }
    }

    pub fn to_json(&self) -> ObjectJson {
        match self {
            Object::Measure(m) => ObjectJson::Measure {
                q: m.q(),
                n: m.n(),
                support: m.iter().map(|(c, p)| SupportEntry { config: c.clone(), p }).collect(),
            },
            Object::Kernel(k) => ObjectJson::Kernel {
                q: k.q(),
                row_weights: k.row_weights().to_vec(),
                col_weights: k.col_weights().to_vec(),
                blocks: k.blocks().to_vec(),
            },
            Object::Law(l) => ObjectJson::Law {
                q: l.q(),
                col_weights: l.col_weights().to_vec(),
                atoms: l.atoms().iter().map(|a| AtomJson { weight: a.weight, values: a.values.clone() }).collect(),
            },
        }
    }

    pub fn from_json(j: ObjectJson) -> Result<Self> {
        Ok(match j {
            ObjectJson::Measure { q, n, support } => {
                Object::Measure(DiscreteMeasure::new(q, n, support.into_iter().map(|e| (e.config, e.p)))?)
            }
            ObjectJson::Kernel { q, row_weights, col_weights, blocks } => {
                Object::Kernel(StepKernel::new(q, row_weights, col_weights, blocks)?)
            }
            ObjectJson::Law { q, col_weights, atoms } => Object::Law(Law::new(
                q,
                col_weights,
                atoms.into_iter().map(|a| Atom { weight: a.weight, values: a.values }).collect(),
            )?),
        })
    }
}

/// Parse an object, either bare or wrapped as the `"object"` field of a report.
pub fn parse_object(text: &str) -> Result<Object> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    let inner = match v.get("object") {
        Some(o) if v.get("type").is_none() => o.clone(),
        _ => v,
    };
    Object::from_json(serde_json::from_value(inner)?)
}

pub fn read_object(path: &std::path::Path) -> Result<Object> {
    parse_object(&std::fs::read_to_string(path)?)
}

/// Comma-separated rows of symbols.
pub fn write_array_csv<W: Write>(mut w: W, rows: &[Vec<u8>]) -> Result<()> {
    for r in rows {
        let line: Vec<String> = r.iter().map(|s| s.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// 8-bit binary PGM of `(s, x) ↦ κ_{s,x}(ω)`, rows indexed by `s`, sampled at pixel centres.
///
/// Grey levels are `floor(255 v + 1/2)`.
pub fn heatmap_pgm(k: &StepKernel, omega: usize, width: usize, height: usize) -> Result<Vec<u8>> {
    if omega >= k.q() {
        return Err(CutError::InvalidInput(format!("symbol {omega} outside alphabet of size {}", k.q())));
    }
    if width == 0 || height == 0 {
        return Err(CutError::InvalidInput("heatmap dimensions must be positive".into()));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    let cols: Vec<usize> = (0..width).map(|c| k.col_cell((c as f64 + 0.5) / width as f64)).collect();
    for r in 0..height {
        let i = k.row_cell((r as f64 + 0.5) / height as f64);
        out.extend(cols.iter().map(|&j| (255.0 * k.value(i, j, omega) + 0.5).floor().clamp(0.0, 255.0) as u8));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::tests::random_kernel;

    #[test]
    fn measure_round_trip_is_exact() {
        let m = DiscreteMeasure::from_unnormalized(3, 2, [(vec![0, 2], 0.1), (vec![1, 1], 0.7), (vec![2, 0], 1.0 / 3.0)]).unwrap();
        let o = Object::Measure(m);
        let text = serde_json::to_string(&o.to_json()).unwrap();
        assert_eq!(parse_object(&text).unwrap(), o);
        // configurations appear in lexicographic order
        assert!(text.find("[0,2]").unwrap() < text.find("[1,1]").unwrap());
    }

    #[test]
    fn kernel_and_law_round_trip() {
        let k = Object::Kernel(random_kernel(3, 3, 4, 2));
        assert_eq!(parse_object(&serde_json::to_string(&k.to_json()).unwrap()).unwrap(), k);
        let l = Object::Law(k.to_law());
        assert_eq!(parse_object(&serde_json::to_string(&l.to_json()).unwrap()).unwrap(), l);
    }

    #[test]
    fn wrapped_objects_parse() {
        let k = Object::Kernel(StepKernel::constant(&[0.5, 0.5]).unwrap());
        let text = serde_json::json!({ "meta": { "seed": 1 }, "object": k.to_json() }).to_string();
        assert_eq!(parse_object(&text).unwrap(), k);
    }

    #[test]
    fn invalid_objects_are_rejected() {
        assert!(parse_object(r#"{"type":"measure","q":2,"n":1,"support":[{"config":[0],"p":0.4}]}"#).is_err());
        assert!(parse_object(r#"{"type":"graph"}"#).is_err());
    }

    #[test]
    fn heatmap_values() {
        let half = StepKernel::constant(&[0.5, 0.5]).unwrap();
        let img = heatmap_pgm(&half, 1, 8, 4).unwrap();
        let header = b"P5\n8 4\n255\n";
        assert_eq!(&img[..header.len()], header);
        assert!(img[header.len()..].iter().all(|v| *v == 128));
        let sx = StepKernel::discretize(2, 64, |s, x| vec![1.0 - s * x, s * x]).unwrap();
        let img = heatmap_pgm(&sx, 1, 512, 512).unwrap();
        assert_eq!(img.len(), 15 + 512 * 512);
        assert!(*img.last().unwrap() >= 250);
        assert!(heatmap_pgm(&sx, 2, 4, 4).is_err());
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        write_array_csv(&mut buf, &[vec![0, 1], vec![1, 1]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0,1\n1,1\n");
    }
}
