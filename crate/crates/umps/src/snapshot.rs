//! Binary snapshot container.
//!
//! Layout, all integers little-endian `u32` and floats little-endian `f64`:
//!
//! ```text
//! magic      8 bytes  "LGTQUMPS"
//! version    u32      SNAPSHOT_VERSION
//! kind       u32      0 = z2, 1 = free_fermion, 2 = u1_qlm
//! time       f64      evolution time of the state
//! label_len  u32, then that many UTF-8 bytes (gauge / state metadata)
//! n_sites    u32
//! d          u32      physical dimension of a fused site
//! per site:  chi_l u32, chi_r u32, then d * chi_l * chi_r complex numbers
//!            (re, im), physical index slowest, then row, then column
//! per site:  n u32, then n Schmidt values
//! ```

use std::io::{Read, Write};

use faer::Mat;
use lgtquench_core::model::ModelKind;
use lgtquench_core::C64;

use crate::state::UniformMps;
use crate::UmpsError;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"LGTQUMPS";
pub const SNAPSHOT_VERSION: u32 = 1;

/// A state together with its time and a free-form label.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub label: String,
    pub state: UniformMps,
}

fn kind_code(kind: ModelKind) -> u32 {
    match kind {
        ModelKind::Z2Lgt => 0,
        ModelKind::FreeFermion => 1,
        ModelKind::U1Qlm => 2,
    }
}

fn put_u32(w: &mut impl Write, x: u32) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn put_f64(w: &mut impl Write, x: f64) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn get_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

impl Snapshot {
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), UmpsError> {
        let psi = &self.state;
        w.write_all(SNAPSHOT_MAGIC)?;
        put_u32(w, SNAPSHOT_VERSION)?;
        put_u32(w, kind_code(psi.kind))?;
        put_f64(w, self.time)?;
        put_u32(w, self.label.len() as u32)?;
        w.write_all(self.label.as_bytes())?;
        put_u32(w, psi.n_sites() as u32)?;
        put_u32(w, psi.phys_dim() as u32)?;
        for site in &psi.tensors {
            put_u32(w, site[0].nrows() as u32)?;
            put_u32(w, site[0].ncols() as u32)?;
            for m in site {
                for r in 0..m.nrows() {
                    for c in 0..m.ncols() {
                        put_f64(w, m[(r, c)].re)?;
                        put_f64(w, m[(r, c)].im)?;
                    }
                }
            }
        }
        for lam in &psi.schmidt {
            put_u32(w, lam.len() as u32)?;
            for &x in lam {
                put_f64(w, x)?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, UmpsError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(UmpsError::Snapshot("not a snapshot file".into()));
        }
        let version = get_u32(r)?;
        if version != SNAPSHOT_VERSION {
            return Err(UmpsError::Snapshot(format!("unsupported version {version}")));
        }
        let kind = match get_u32(r)? {
            0 => ModelKind::Z2Lgt,
            1 => ModelKind::FreeFermion,
            2 => ModelKind::U1Qlm,
            k => return Err(UmpsError::Snapshot(format!("unknown model code {k}"))),
        };
        let time = get_f64(r)?;
        let len = get_u32(r)? as usize;
        let mut label = vec![0u8; len];
        r.read_exact(&mut label)?;
        let label = String::from_utf8(label).map_err(|e| UmpsError::Snapshot(e.to_string()))?;
        let n = get_u32(r)? as usize;
        let d = get_u32(r)? as usize;
        if n > 64 || d > 64 {
            return Err(UmpsError::Snapshot(format!("implausible header: {n} sites, dimension {d}")));
        }
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let (rows, cols) = (get_u32(r)? as usize, get_u32(r)? as usize);
            let mut site = Vec::with_capacity(d);
            for _ in 0..d {
                let mut m = Mat::<C64>::zeros(rows, cols);
                for i in 0..rows {
                    for j in 0..cols {
                        let re = get_f64(r)?;
                        m[(i, j)] = C64::new(re, get_f64(r)?);
                    }
                }
                site.push(m);
            }
            tensors.push(site);
        }
        let mut schmidt = Vec::with_capacity(n);
        for _ in 0..n {
            let len = get_u32(r)? as usize;
            schmidt.push((0..len).map(|_| get_f64(r)).collect::<Result<Vec<_>, _>>()?);
        }
        Ok(Self { time, label, state: UniformMps::from_parts(kind, tensors, schmidt)? })
    }
}
