//! Generator snapshots: a commented header with the spec and the layout,
//! then one parameter per line.
//!
//! ```text
//! # wprox-snapshot v1
//! # generator {"architecture":{"kind":"location-scale"},"latent_dim":1,"output_dim":1}
//! # slice mu 0 1
//! # slice sigma 1 1
//! 0.5
//! 1.25
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{Generator, GeneratorSpec};
use crate::params::{Layout, ParamVector, Slice};

pub const SNAPSHOT_HEADER: &str = "# wprox-snapshot v1";

pub fn snapshot_to_string(gen: &Generator<f64>) -> Result<String> {
    let spec = serde_json::to_string(&gen.spec).map_err(|e| Error::Io(e.to_string()))?;
    let mut out = format!("{SNAPSHOT_HEADER}\n# generator {spec}\n");
    for s in gen.theta.layout().slices() {
        out.push_str(&format!("# slice {} {} {}\n", s.name, s.offset, s.len));
    }
    for v in gen.theta.values() {
        out.push_str(&format!("{v:?}\n"));
    }
    Ok(out)
}

pub fn snapshot_from_str(text: &str) -> Result<Generator<f64>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == SNAPSHOT_HEADER => {}
        _ => {
            return Err(Error::input(format!(
                "snapshot must start with `{SNAPSHOT_HEADER}`"
            )))
        }
    }
    let mut spec: Option<GeneratorSpec> = None;
    let mut slices = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        let bad = |what: &str| Error::input(format!("snapshot line {}: {what}", i + 1));
        if line.is_empty() {
            continue;
        }
        if let Some(json) = line.strip_prefix("# generator ") {
            spec = Some(serde_json::from_str(json).map_err(|e| bad(&e.to_string()))?);
        } else if let Some(rest) = line.strip_prefix("# slice ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let [name, offset, len] = parts[..] else {
                return Err(bad("expected `# slice name offset len`"));
            };
            slices.push(Slice {
                name: name.to_string(),
                offset: offset.parse().map_err(|_| bad("bad offset"))?,
                len: len.parse().map_err(|_| bad("bad length"))?,
            });
        } else if line.starts_with('#') {
            continue;
        } else {
            let v: f64 = line.parse().map_err(|_| bad("expected a number"))?;
            values.push(v);
        }
    }
    let spec = spec.ok_or_else(|| Error::input("snapshot has no `# generator` line"))?;
    let layout = Layout::from_slices(slices)?;
    if layout != spec.layout() {
        return Err(Error::input(
            "snapshot layout does not match the generator spec",
        ));
    }
    Generator::new(spec, ParamVector::new(values, layout)?)
}

pub fn write_snapshot(path: &Path, gen: &Generator<f64>) -> Result<()> {
    std::fs::write(path, snapshot_to_string(gen)?)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Generator<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    snapshot_from_str(&text)
}
