//! Binary persistence of [`PosteriorDraws`].
//!
//! Layout: 8-byte magic, `u32` format version, `u32` header length, a JSON header, then one
//! record per draw: `beta[K] alpha[p] sigma2[K] xi[K*K] c0` as little-endian `f64`
//! followed by the regime path as `u8`. Floats are stored bit-for-bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{PosteriorDraws, SamplerConfig};
use crate::domain::{MsarDraw, Quarter, TransitionMatrix};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"VPDRAWS\0";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    view_id: u32,
    window_start: Quarter,
    window_end: Quarter,
    config: SamplerConfig,
    regimes: usize,
    lags: usize,
    draws: usize,
    path_len: usize,
}

pub fn write_archive<W: Write>(mut w: W, draws: &PosteriorDraws) -> Result<()> {
    let path_len = draws.draws.first().map_or(0, |d| d.states.len());
    let header = Header {
        view_id: draws.view_id,
        window_start: draws.window_start,
        window_end: draws.window_end,
        config: draws.config,
        regimes: draws.regimes,
        lags: draws.lags,
        draws: draws.draws.len(),
        path_len,
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::new();
    for d in &draws.draws {
        if d.beta.len() != draws.regimes || d.alpha.len() != draws.lags || d.states.len() != path_len
        {
            return Err(Error::Archive("draws have inconsistent dimensions".into()));
        }
        buf.clear();
        for v in d
            .beta
            .iter()
            .chain(&d.alpha)
            .chain(&d.sigma2)
            .chain(d.xi.as_slice())
            .chain(std::iter::once(&d.c0))
        {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&d.states);
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_archive<R: Read>(mut r: R) -> Result<PosteriorDraws> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Archive("not a draw archive".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Archive(format!("unsupported archive version {version}")));
    }
    let len = read_u32(&mut r)? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let h: Header = serde_json::from_slice(&json)?;
    let (k, p) = (h.regimes, h.lags);
    let n_f64 = 2 * k + p + k * k + 1;
    let mut rec = vec![0u8; n_f64 * 8 + h.path_len];
    let mut draws = Vec::with_capacity(h.draws);
    for _ in 0..h.draws {
        r.read_exact(&mut rec)?;
        let floats: Vec<f64> = rec[..n_f64 * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut it = floats.into_iter();
        let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
        let beta = take(k);
        let alpha = take(p);
        let sigma2 = take(k);
        let xi = TransitionMatrix::new(k, take(k * k))
            .map_err(|e| Error::Archive(format!("bad transition matrix: {e}")))?;
        let c0 = take(1)[0];
        draws.push(MsarDraw {
            beta,
            alpha,
            sigma2,
            xi,
            states: rec[n_f64 * 8..].to_vec(),
            c0,
        });
    }
    Ok(PosteriorDraws {
        view_id: h.view_id,
        window_start: h.window_start,
        window_end: h.window_end,
        config: h.config,
        regimes: k,
        lags: p,
        draws,
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
