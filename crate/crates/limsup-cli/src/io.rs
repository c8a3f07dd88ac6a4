use anyhow::{anyhow, Context, Result};
use limsup_core::covering::BallFamily;
use limsup_core::geometry::Region;
use limsup_core::kv::{IfsSpec, KvFile};
use limsup_core::records;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

pub fn read_kv(path: &Path) -> Result<KvFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    KvFile::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_ifs(path: &Path) -> Result<IfsSpec> {
    IfsSpec::from_kv(&read_kv(path)?).with_context(|| format!("IFS file {}", path.display()))
}

pub fn read_regions(path: &Path) -> Result<Vec<Region>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let regions = records::read_regions(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
    if regions.is_empty() {
        return Err(anyhow!("{} holds no regions", path.display()));
    }
    let d = regions[0].dim();
    if regions.iter().any(|r| r.dim() != d) {
        return Err(anyhow!("{} mixes dimensions", path.display()));
    }
    Ok(regions)
}

/// Ball records only, indexed in file order.
pub fn read_balls(path: &Path) -> Result<BallFamily> {
    let balls = read_regions(path)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r {
            Region::Ball(b) => Ok(b),
            _ => Err(anyhow!("{}: record {} is not a ball", path.display(), i + 1)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BallFamily::from_balls(balls)?)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot write {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

pub fn write_regions(path: Option<&Path>, regions: &[Region]) -> Result<()> {
    let mut w = sink(path)?;
    records::write_regions(&mut w, regions)?;
    w.flush()?;
    Ok(())
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = sink(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}
