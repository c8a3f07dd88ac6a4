//! Plain-text `key = value` files with `[section]` headers.

use crate::error::{invalid, Error, Result};
use crate::geometry::Aabb;
use crate::ifs::{CylinderMeasure, Ifs, SimilarityMap};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvFile {
    /// Keys before the first header live in section `""`.
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

/// Parses a decimal or an exact rational `p/q`.
pub fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        let q: f64 = q.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
        if q == 0.0 {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(p / q);
    }
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("not finite: {s:?}"));
    }
    Ok(v)
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, (usize, String)>> = BTreeMap::new();
        let mut current = String::new();
        sections.insert(current.clone(), BTreeMap::new());
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse { line: line_no, msg: "unterminated section header".into() })?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: line_no, msg: format!("expected key = value, got {line:?}") })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Parse { line: line_no, msg: "empty key".into() });
            }
            let sec = sections.get_mut(&current).unwrap();
            if sec.insert(k.to_string(), (line_no, v.trim().to_string())).is_some() {
                return Err(Error::Parse { line: line_no, msg: format!("duplicate key {k:?}") });
            }
        }
        Ok(KvFile { sections })
    }

    pub fn sections(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(|s| s.as_str())
    }

    pub fn keys(&self, section: &str) -> Vec<&str> {
        self.sections.get(section).map_or(Vec::new(), |s| s.keys().map(|k| k.as_str()).collect())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|(_, v)| v.as_str())
    }

    fn entry(&self, section: &str, key: &str) -> Result<(usize, &str)> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| invalid(format!("missing key {key:?} in section [{section}]")))
    }

    pub fn number(&self, section: &str, key: &str) -> Result<f64> {
        let (line, v) = self.entry(section, key)?;
        parse_number(v).map_err(|msg| Error::Parse { line, msg })
    }

    pub fn number_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        if self.get(section, key).is_none() {
            return Ok(default);
        }
        self.number(section, key)
    }

    pub fn integer(&self, section: &str, key: &str) -> Result<u64> {
        let (line, v) = self.entry(section, key)?;
        v.parse().map_err(|_| Error::Parse { line, msg: format!("not a non-negative integer: {v:?}") })
    }

    pub fn integer_or(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        if self.get(section, key).is_none() {
            return Ok(default);
        }
        self.integer(section, key)
    }

    /// Numbers separated by commas or whitespace.
    pub fn numbers(&self, section: &str, key: &str) -> Result<Vec<f64>> {
        let (line, v) = self.entry(section, key)?;
        split_numbers(v).map_err(|msg| Error::Parse { line, msg })
    }

    /// Vectors separated by `;`, coordinates by commas or whitespace.
    pub fn vectors(&self, section: &str, key: &str) -> Result<Vec<Vec<f64>>> {
        let (line, v) = self.entry(section, key)?;
        v.split(';').map(split_numbers).collect::<std::result::Result<_, _>>().map_err(|msg| Error::Parse { line, msg })
    }
}

fn split_numbers(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(parse_number).collect()
}

/// A self-similar measure read from an IFS file.
#[derive(Clone, Debug)]
pub struct IfsSpec {
    pub ifs: Ifs,
    pub weights: Vec<f64>,
}

impl IfsSpec {
    /// Reads `ratios`, `translations`, optional `weights` (default uniform),
    /// optional `orthogonal` and optional `hull = lo ; hi`, from `[ifs]` or the top level.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let sec = if kv.get("ifs", "ratios").is_some() { "ifs" } else { "" };
        let ratios = kv.numbers(sec, "ratios")?;
        let translations = kv.vectors(sec, "translations")?;
        if translations.len() != ratios.len() {
            return Err(Error::DimensionMismatch { expected: ratios.len(), got: translations.len() });
        }
        let orth: Vec<Option<Vec<f64>>> = if kv.get(sec, "orthogonal").is_some() {
            let o = kv.vectors(sec, "orthogonal")?;
            if o.len() != ratios.len() {
                return Err(Error::DimensionMismatch { expected: ratios.len(), got: o.len() });
            }
            o.into_iter().map(Some).collect()
        } else {
            vec![None; ratios.len()]
        };
        let maps = ratios
            .iter()
            .zip(translations)
            .zip(orth)
            .map(|((r, t), o)| SimilarityMap::with_orthogonal(*r, t, o))
            .collect::<Result<Vec<_>>>()?;
        let mut ifs = Ifs::new(maps)?;
        if kv.get(sec, "hull").is_some() {
            let h = kv.vectors(sec, "hull")?;
            if h.len() != 2 {
                return Err(invalid("hull must be `lo ; hi`"));
            }
            if h[0].len() != h[1].len() {
                return Err(Error::DimensionMismatch { expected: h[0].len(), got: h[1].len() });
            }
            ifs = ifs.normalized(&Aabb::new(h[0].clone(), h[1].clone()))?;
        }
        let weights = if kv.get(sec, "weights").is_some() {
            kv.numbers(sec, "weights")?
        } else {
            vec![1.0 / ratios.len() as f64; ratios.len()]
        };
        if weights.len() != ratios.len() {
            return Err(Error::DimensionMismatch { expected: ratios.len(), got: weights.len() });
        }
        Ok(IfsSpec { ifs, weights })
    }

    pub fn parse(text: &str) -> Result<Self> {
        IfsSpec::from_kv(&KvFile::parse(text)?)
    }

    pub fn measure(&self, depth_cap: u32) -> Result<CylinderMeasure> {
        CylinderMeasure::new(self.ifs.clone(), self.weights.clone(), depth_cap)
    }
}
