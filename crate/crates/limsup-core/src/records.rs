//! JSON-lines region records.

use crate::error::{Error, Result};
use crate::geometry::{AnisoRect, BadicCube, Ball, Region};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Record {
    Ball { center: Vec<f64>, radius: f64 },
    Rect { center: Vec<f64>, r: f64, tau: Vec<f64> },
    Cube { base: u32, level: u32, coords: Vec<u64> },
}

impl Record {
    pub fn to_region(&self) -> Result<Region> {
        Ok(match self {
            Record::Ball { center, radius } => Region::Ball(Ball::new(center.clone(), *radius)?),
            Record::Rect { center, r, tau } => Region::Rect(AnisoRect::new(center.clone(), *r, tau.clone())?),
            Record::Cube { base, level, coords } => Region::Cube(BadicCube::new(*base, *level, coords.clone())?),
        })
    }
}

impl From<&Region> for Record {
    fn from(r: &Region) -> Self {
        match r {
            Region::Ball(b) => Record::Ball { center: b.center().to_vec(), radius: b.radius() },
            Region::Rect(x) => Record::Rect { center: x.center().to_vec(), r: x.r(), tau: x.tau().to_vec() },
            Region::Cube(c) => Record::Cube { base: c.base, level: c.level, coords: c.coords.clone() },
        }
    }
}

/// Reads one record per non-blank line.
pub fn read_regions<R: BufRead>(reader: R) -> Result<Vec<Region>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        out.push(rec.to_region().map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?);
    }
    Ok(out)
}

pub fn parse_regions(text: &str) -> Result<Vec<Region>> {
    read_regions(text.as_bytes())
}

pub fn write_regions<W: Write>(mut w: W, regions: &[Region]) -> std::io::Result<()> {
    for r in regions {
        serde_json::to_writer(&mut w, &Record::from(r))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = r#"{"kind":"ball","center":[0.5,0.5],"radius":0.25}
{"kind":"rect","center":[0.5,0.5],"r":0.25,"tau":[1,2]}

{"kind":"cube","base":3,"level":2,"coords":[1,8]}
"#;
        let regions = parse_regions(text).unwrap();
        assert_eq!(regions.len(), 3);
        assert!(matches!(&regions[2], Region::Cube(c) if c.coords == vec![1, 8]));
        let mut buf = Vec::new();
        write_regions(&mut buf, &regions).unwrap();
        assert_eq!(parse_regions(std::str::from_utf8(&buf).unwrap()).unwrap(), regions);
    }

    #[test]
    fn bad_lines_are_located() {
        let text = "{\"kind\":\"ball\",\"center\":[0.5],\"radius\":0.1}\n{\"kind\":\"cube\",\"base\":2,\"level\":1,\"coords\":[2]}\n";
        assert!(matches!(parse_regions(text), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_regions("{\"kind\":\"blob\"}"), Err(Error::Parse { line: 1, .. })));
    }
}
