//! Binary snapshot files.
//!
//! Layout: the 8-byte magic `MUSKATSN`, a little-endian u32 format version, a
//! little-endian u64 header length, a JSON header of that length, then the
//! Fourier coefficients of every field as interleaved little-endian f64
//! (re, im) pairs in FFT order. Fields are rebuilt from their coefficients,
//! which reproduces the stored state bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GFormState, ModelError, State, ZFormState};
use crate::spectral::{Grid, SpectralError, SpectralField, C64};

pub const MAGIC: &[u8; 8] = b"MUSKATSN";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad snapshot header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("not a snapshot file")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("malformed snapshot: {0}")]
    Malformed(String),
    #[error(transparent)]
    Grid(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Serialize, Deserialize)]
struct Header {
    formulation: String,
    n_points: usize,
    time: f64,
    time_bits: u64,
    fields: Vec<String>,
    real: Vec<bool>,
    metadata: serde_json::Map<String, serde_json::Value>,
}

/// A state read back from disk with the metadata stored alongside it.
#[derive(Clone, Debug)]
pub struct SnapshotFile {
    pub state: State,
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

fn fields_of(state: &State) -> Vec<(&'static str, &SpectralField)> {
    match state {
        State::G(s) => vec![("g", s.g())],
        State::Z(z) => vec![("inv_zap", z.inv_zap()), ("zap", z.zap()), ("z_minus_id", z.z_minus_id())],
    }
}

pub fn write_snapshot(
    path: &Path,
    state: &State,
    metadata: &serde_json::Map<String, serde_json::Value>,
) -> Result<(), SnapshotError> {
    let fields = fields_of(state);
    let header = Header {
        formulation: state.formulation_tag().to_string(),
        n_points: state.grid().n_points(),
        time: state.time(),
        time_bits: state.time().to_bits(),
        fields: fields.iter().map(|f| f.0.to_string()).collect(),
        real: fields.iter().map(|f| f.1.is_real()).collect(),
        metadata: metadata.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for (_, f) in &fields {
        for c in f.coeffs() {
            out.write_all(&c.re.to_le_bytes())?;
            out.write_all(&c.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_f64(r: &mut impl Read) -> Result<f64, SnapshotError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotFile, SnapshotError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| SnapshotError::BadMagic)?;
    if &magic != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(SnapshotError::Version(version));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let len = u64::from_le_bytes(b8) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.fields.len() != header.real.len() {
        return Err(SnapshotError::Malformed("field and flag counts differ".into()));
    }
    let grid = Grid::new(header.n_points)?;
    let mut fields = Vec::with_capacity(header.fields.len());
    for &real in &header.real {
        let mut coeffs = Vec::with_capacity(header.n_points);
        for _ in 0..header.n_points {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            coeffs.push(C64::new(re, im));
        }
        fields.push(SpectralField::from_coeffs(&grid, coeffs, real));
    }
    let time = f64::from_bits(header.time_bits);
    let state = match (header.formulation.as_str(), fields.len()) {
        ("g", 1) => State::G(GFormState::new(fields.remove(0), time)?),
        ("z", 3) => {
            let w = fields.pop().expect("three fields");
            let zap = fields.pop().expect("three fields");
            let u = fields.pop().expect("three fields");
            State::Z(ZFormState::from_parts(u, zap, w, time))
        }
        (tag, k) => return Err(SnapshotError::Malformed(format!("formulation {tag:?} with {k} fields"))),
    };
    Ok(SnapshotFile { state, metadata: header.metadata })
}
