//! Binary sinogram/grid container.
//!
//! Layout (all little-endian): magic `HRTS`, version u16, n_s u32, n_θ u32,
//! r f64, D f64, ω f64, then n_s·n_θ (re, im) f64 pairs in s-major order
//! (index i·n_θ + j for s_i, θ_j), then a u32 byte length and that many bytes
//! of UTF-8 JSON metadata.
//!
//! Reconstructed grids reuse the container with n_s = n_θ = n_x, row-major
//! (y outer), imaginary parts zero and `"kind": "grid"` in the trailer.

use std::io::{Read, Write};
use std::path::Path;

use fdrt_core::fields::{Lattice, ScalarField};
use fdrt_core::forward::{Sinogram, SinogramMeta};
use fdrt_core::{DiskDomain, SinogramLayout};
use num_complex::Complex64;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"HRTS";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8 * 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SinogramFile {
    pub n_s: u32,
    pub n_theta: u32,
    pub r: f64,
    pub d: f64,
    pub omega: f64,
    pub data: Vec<Complex64>,
    pub trailer: Value,
}

impl SinogramFile {
    pub fn from_sinogram(s: &Sinogram) -> Self {
        SinogramFile {
            n_s: s.layout.n_s as u32,
            n_theta: s.layout.n_theta as u32,
            r: s.layout.domain.r,
            d: s.layout.domain.d,
            omega: s.omega,
            data: s.data.clone(),
            trailer: serde_json::json!({ "kind": "sinogram", "meta": s.meta }),
        }
    }

    pub fn from_grid(f: &ScalarField, d: &DiskDomain, omega: f64, trailer: Value) -> Self {
        let n = f.lattice.n as u32;
        SinogramFile {
            n_s: n,
            n_theta: n,
            r: d.r,
            d: d.d,
            omega,
            data: f.values.iter().map(|v| Complex64::new(*v, 0.0)).collect(),
            trailer,
        }
    }

    pub fn to_sinogram(&self, path: &str) -> CliResult<Sinogram> {
        let domain = DiskDomain::new(self.r, self.d).map_err(|e| fmt_err(path, e.to_string()))?;
        let layout = SinogramLayout::new(domain, self.n_s as usize, self.n_theta as usize);
        let meta: SinogramMeta = match self.trailer.get("meta") {
            Some(m) => serde_json::from_value(m.clone()).map_err(|e| fmt_err(path, format!("bad metadata: {e}")))?,
            None => SinogramMeta::default(),
        };
        Ok(Sinogram { layout, omega: self.omega, data: self.data.clone(), meta })
    }

    /// Real parts as a field on the n×n lattice over [−r, r]².
    pub fn to_grid(&self) -> ScalarField {
        let lattice = Lattice::new(self.n_s as usize, self.r);
        ScalarField { lattice, values: self.data.iter().map(|v| v.re).collect(), support_radius: self.r * 2f64.sqrt() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let trailer = serde_json::to_vec(&self.trailer).expect("json value serializes");
        let mut out = Vec::with_capacity(HEADER_LEN + 16 * self.data.len() + 4 + trailer.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.n_s.to_le_bytes());
        out.extend_from_slice(&self.n_theta.to_le_bytes());
        for v in [self.r, self.d, self.omega] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for z in &self.data {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out.extend_from_slice(&(trailer.len() as u32).to_le_bytes());
        out.extend_from_slice(&trailer);
        out
    }

    pub fn from_bytes(buf: &[u8], path: &str) -> CliResult<Self> {
        if buf.len() < HEADER_LEN || &buf[..4] != MAGIC {
            return Err(fmt_err(path, "missing HRTS magic".into()));
        }
        let mut cur = Cursor { buf, pos: 4, path };
        let version = u16::from_le_bytes(cur.take::<2>()?);
        if version != VERSION {
            return Err(fmt_err(path, format!("unsupported version {version}")));
        }
        let n_s = u32::from_le_bytes(cur.take()?);
        let n_theta = u32::from_le_bytes(cur.take()?);
        let r = f64::from_le_bytes(cur.take()?);
        let d = f64::from_le_bytes(cur.take()?);
        let omega = f64::from_le_bytes(cur.take()?);
        let n = n_s as usize * n_theta as usize;
        if buf.len() < HEADER_LEN + 16 * n + 4 {
            return Err(fmt_err(path, format!("truncated: {n} samples announced")));
        }
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let re = f64::from_le_bytes(cur.take()?);
            let im = f64::from_le_bytes(cur.take()?);
            data.push(Complex64::new(re, im));
        }
        let len = u32::from_le_bytes(cur.take()?) as usize;
        if cur.pos + len != buf.len() {
            return Err(fmt_err(path, "trailer length does not match file size".into()));
        }
        let trailer = serde_json::from_slice(&buf[cur.pos..]).map_err(|e| fmt_err(path, format!("bad trailer: {e}")))?;
        Ok(SinogramFile { n_s, n_theta, r, d, omega, data, trailer })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut buf)).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&buf, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::File::create(path).and_then(|mut f| f.write_all(&self.to_bytes())).map_err(|e| CliError::io(path, e))
    }
}

fn fmt_err(path: &str, msg: String) -> CliError {
    CliError::Format { path: path.into(), msg }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> CliResult<[u8; N]> {
        let s = self.buf.get(self.pos..self.pos + N).ok_or_else(|| fmt_err(self.path, "unexpected end of file".into()))?;
        self.pos += N;
        Ok(s.try_into().unwrap())
    }
}
