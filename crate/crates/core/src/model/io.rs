//! Directory layout for a stored system:
//! `M.mtx`, `K.mtx`, `F.mtx`, `Cp.mtx` (required), `D.mtx`, `Cv.mtx`
//! (optional) and `meta.txt` with `key=value` lines (`alpha`, `beta`,
//! `family`, `n`).

use super::mtx::{read_mtx, write_dense, write_sparse, MtxData};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseBlock};
use crate::system::SecondOrderSystem;
use std::collections::BTreeMap;
use std::path::Path;

pub const META_FILE: &str = "meta.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMeta {
    pub alpha: f64,
    pub beta: f64,
    pub family: Option<String>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub system: SecondOrderSystem,
    pub meta: SystemMeta,
    /// A stored `D.mtx` differs from `αM + βK` by more than `1e-10` relative.
    pub damping_warning: bool,
}

/// Parses `key=value` lines; blank lines and `#` comments are ignored.
pub fn parse_key_values(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (k, v) = t.split_once('=').ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: no + 1,
            message: "expected key=value".into(),
        })?;
        out.insert(k.trim().to_string(), v.trim().trim_matches('"').to_string());
    }
    Ok(out)
}

fn read_meta(dir: &Path) -> Result<SystemMeta> {
    let path = dir.join(META_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let kv = parse_key_values(&text, &path)?;
    let number = |key: &str| -> Result<f64> {
        kv.get(key)
            .ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: 0,
                message: format!("missing `{key}`"),
            })?
            .parse()
            .map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: 0,
                message: format!("bad `{key}`: {e}"),
            })
    };
    Ok(SystemMeta {
        alpha: number("alpha")?,
        beta: number("beta")?,
        family: kv.get("family").cloned(),
        n: kv.get("n").and_then(|v| v.parse().ok()),
    })
}

fn required(dir: &Path, name: &str) -> Result<MtxData> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::Io {
            path: path.display().to_string(),
            message: format!("missing required file {name}"),
        });
    }
    read_mtx(&path)
}

fn optional(dir: &Path, name: &str) -> Result<Option<MtxData>> {
    let path = dir.join(name);
    if path.exists() {
        read_mtx(&path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn read_system(dir: &Path) -> Result<LoadedSystem> {
    let meta = read_meta(dir)?;
    let m = required(dir, "M.mtx")?.to_csr()?;
    let k = required(dir, "K.mtx")?.to_csr()?;
    let f = required(dir, "F.mtx")?.to_dense();
    let cp = required(dir, "Cp.mtx")?.to_dense();
    let cv = match optional(dir, "Cv.mtx")? {
        Some(c) => c.to_dense(),
        None => DenseBlock::zeros(cp.n_rows(), cp.n_cols()),
    };
    let proportional = CsrMatrix::linear_combination(&[(meta.alpha, &m), (meta.beta, &k)])?;
    let (d, damping_warning) = match optional(dir, "D.mtx")? {
        Some(data) => {
            let d = data.to_csr()?;
            let diff = CsrMatrix::linear_combination(&[(1.0, &d), (-1.0, &proportional)])?;
            let warn = diff.frobenius_norm()
                > 1e-10 * d.frobenius_norm().max(proportional.frobenius_norm());
            (d, warn)
        }
        None => (proportional, false),
    };
    let system = SecondOrderSystem::new(m, d, k, f, cp, cv, meta.alpha, meta.beta)?;
    Ok(LoadedSystem {
        system,
        meta,
        damping_warning,
    })
}

pub fn write_system(sys: &SecondOrderSystem, dir: &Path, family: Option<&str>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    write_sparse(&dir.join("M.mtx"), sys.m(), true)?;
    write_sparse(&dir.join("D.mtx"), sys.d(), true)?;
    write_sparse(&dir.join("K.mtx"), sys.k(), true)?;
    write_dense(&dir.join("F.mtx"), sys.f())?;
    write_dense(&dir.join("Cp.mtx"), sys.cp())?;
    write_dense(&dir.join("Cv.mtx"), sys.cv())?;
    let mut meta = format!(
        "alpha={:e}\nbeta={:e}\nn={}\n",
        sys.alpha(),
        sys.beta(),
        sys.n()
    );
    if let Some(f) = family {
        meta.push_str(&format!("family={f}\n"));
    }
    let path = dir.join(META_FILE);
    std::fs::write(&path, meta).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
