//! On-disk cache of per-(view, window) results so long backtests can resume.
//!
//! Each entry is one file named by a SHA-256 digest of everything that determines the
//! result: the view, the window bounds and data, the sampler and bridge settings and the
//! horizon. Entries are written to a temporary file and renamed into place.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{Component, ForecastDensity, Quarter, ViewSpec};
use crate::error::{Error, Result};
use crate::forecaster::{DensityMode, ViewForecast};
use crate::sampler::{BridgeConfig, SamplerConfig};

const MAGIC: &[u8; 8] = b"VPFCAST\0";
const VERSION: u32 = 2;

/// Forecast and (optionally) evidence of one view estimated on one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub forecast: ViewForecast,
    pub log_ml: Option<f64>,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    version: u32,
    view: &'a ViewSpec,
    start: Quarter,
    end: Quarter,
    sampler: &'a SamplerConfig,
    bridge: &'a BridgeConfig,
    horizon: usize,
    density: DensityMode,
    data_bits: Vec<u64>,
}

/// Cache key for one estimation job.
pub fn cache_key(
    view: &ViewSpec,
    start: Quarter,
    end: Quarter,
    data: &[f64],
    sampler: &SamplerConfig,
    bridge: &BridgeConfig,
    horizon: usize,
    density: DensityMode,
) -> String {
    let material = KeyMaterial {
        version: VERSION,
        view,
        start,
        end,
        sampler,
        bridge,
        horizon,
        density,
        data_bits: data.iter().map(|v| v.to_bits()).collect(),
    };
    let bytes = serde_json::to_vec(&material).expect("key material serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Seed for one (view, window) sampler run, derived from the run's base seed.
pub fn window_seed(base: u64, view_id: u32, start: Quarter, end: Quarter) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(view_id.to_le_bytes());
    h.update(start.index().to_le_bytes());
    h.update(end.index().to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Serialize, Deserialize)]
struct Header {
    view_id: u32,
    origin: Quarter,
    horizon: usize,
    target: Quarter,
    /// Bit pattern of the evidence, so the cached value round-trips exactly.
    log_ml_bits: Option<u64>,
    components: usize,
}

#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(DiskCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.vpf"))
    }

    /// Returns `None` for a missing or unreadable entry; corrupt entries are recomputed.
    pub fn get(&self, key: &str) -> Option<WindowResult> {
        let bytes = fs::read(self.path(key)).ok()?;
        match decode(&bytes) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {key}: {e}");
                None
            }
        }
    }

    pub fn put(&self, key: &str, result: &WindowResult) -> Result<()> {
        let bytes = encode(result)?;
        let tmp = self.dir.join(format!(
            "{key}.{}.{:?}.tmp",
            std::process::id(),
            std::thread::current().id()
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.path(key))?;
        Ok(())
    }
}

fn encode(r: &WindowResult) -> Result<Vec<u8>> {
    let f = &r.forecast;
    let comps = f.density.components();
    let header = serde_json::to_vec(&Header {
        view_id: f.view_id,
        origin: f.origin,
        horizon: f.horizon,
        target: f.density.target(),
        log_ml_bits: r.log_ml.map(f64::to_bits),
        components: comps.len(),
    })?;
    let mut out = Vec::with_capacity(16 + header.len() + comps.len() * 24);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for c in comps {
        for v in [c.mean, c.variance, c.weight] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn decode(mut bytes: &[u8]) -> Result<WindowResult> {
    let bad = || Error::Archive("truncated cache entry".into());
    let mut magic = [0u8; 8];
    bytes.read_exact(&mut magic).map_err(|_| bad())?;
    if &magic != MAGIC {
        return Err(Error::Archive("not a cache entry".into()));
    }
    let mut u = [0u8; 4];
    bytes.read_exact(&mut u).map_err(|_| bad())?;
    if u32::from_le_bytes(u) != VERSION {
        return Err(Error::Archive("cache entry version mismatch".into()));
    }
    bytes.read_exact(&mut u).map_err(|_| bad())?;
    let len = u32::from_le_bytes(u) as usize;
    if bytes.len() < len {
        return Err(bad());
    }
    let h: Header = serde_json::from_slice(&bytes[..len])?;
    let body = &bytes[len..];
    if body.len() != h.components * 24 {
        return Err(bad());
    }
    let comps = body
        .chunks_exact(24)
        .map(|c| {
            let f = |i: usize| f64::from_le_bytes(c[i * 8..i * 8 + 8].try_into().unwrap());
            Component {
                mean: f(0),
                variance: f(1),
                weight: f(2),
            }
        })
        .collect();
    Ok(WindowResult {
        forecast: ViewForecast {
            view_id: h.view_id,
            density: ForecastDensity::new(comps, h.target)?,
            origin: h.origin,
            horizon: h.horizon,
        },
        log_ml: h.log_ml_bits.map(f64::from_bits),
    })
}
