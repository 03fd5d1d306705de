//! Binary checkpoints. All integers and floats are little-endian.
//!
//! ```text
//! magic    8 bytes  "CHEMTAB\0"
//! version  u32      currently 1
//! kind     str      "network" or "chemtab-model"
//! ...      payload written by the owner of `kind`
//! ```
//!
//! A `str` is a u32 byte length followed by UTF-8 bytes. A matrix is u32
//! rows, u32 cols, then `rows * cols` f64 values in row-major order; a
//! vector is a matrix with one row. The network payload is
//!
//! ```text
//! spec     str      e.g. "sizes=5,32,8;act=relu,linear;dropout=0.05"
//! seed     u64
//! per layer, in order: W (out x in matrix), b (1 x out matrix)
//! ```

use std::path::Path;

use ndarray::{Array1, Array2};

use super::{DenseLayer, Network, NetworkSpec};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CHEMTAB\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Default)]
pub struct CheckpointWriter {
    buf: Vec<u8>,
}

impl CheckpointWriter {
    pub fn new(kind: &str) -> Self {
        let mut w = Self { buf: Vec::new() };
        w.buf.extend_from_slice(MAGIC);
        w.put_u32(VERSION);
        w.put_str(kind);
        w
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_str(&mut self, s: &str) {
        self.put_u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn put_matrix(&mut self, m: &Array2<f64>) {
        self.put_u32(m.nrows() as u32);
        self.put_u32(m.ncols() as u32);
        for v in m.iter() {
            self.put_f64(*v);
        }
    }

    pub fn put_vector(&mut self, v: &[f64]) {
        self.put_u32(1);
        self.put_u32(v.len() as u32);
        for x in v {
            self.put_f64(*x);
        }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, &self.buf)?;
        Ok(())
    }
}

#[derive(Debug)]
pub struct CheckpointReader {
    buf: Vec<u8>,
    pos: usize,
    kind: String,
}

impl CheckpointReader {
    pub fn from_bytes(buf: Vec<u8>) -> Result<Self> {
        if buf.len() < MAGIC.len() + 4 || &buf[..MAGIC.len()] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let mut r = Self { buf, pos: MAGIC.len(), kind: String::new() };
        let version = r.get_u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        r.kind = r.get_str()?;
        Ok(r)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::from_bytes(std::fs::read(path)?)
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!("truncated checkpoint at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn get_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn get_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn get_f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn get_str(&mut self) -> Result<String> {
        let n = self.get_u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn get_matrix(&mut self) -> Result<Array2<f64>> {
        let rows = self.get_u32()? as usize;
        let cols = self.get_u32()? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.get_f64()?);
        }
        Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn get_vector(&mut self) -> Result<Vec<f64>> {
        let m = self.get_matrix()?;
        if m.nrows() != 1 && !m.is_empty() {
            return Err(Error::Checkpoint(format!("expected a vector, found {}x{}", m.nrows(), m.ncols())));
        }
        Ok(m.into_iter().collect())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

/// Appends a network payload.
pub fn write_network(w: &mut CheckpointWriter, net: &Network, seed: u64) {
    w.put_str(&net.spec().describe());
    w.put_u64(seed);
    for layer in &net.layers {
        w.put_matrix(&layer.w);
        w.put_vector(layer.b.as_slice().expect("standard layout"));
    }
}

/// Reads a network payload; returns it with its recorded seed.
pub fn read_network(r: &mut CheckpointReader) -> Result<(Network, u64)> {
    let spec = NetworkSpec::parse(&r.get_str()?)?;
    spec.validate()?;
    let seed = r.get_u64()?;
    let mut layers = Vec::with_capacity(spec.activations.len());
    for (l, &activation) in spec.activations.iter().enumerate() {
        let w = r.get_matrix()?;
        let b = Array1::from(r.get_vector()?);
        if w.dim() != (spec.sizes[l + 1], spec.sizes[l]) || b.len() != spec.sizes[l + 1] {
            return Err(Error::Checkpoint(format!("layer {l} block shape disagrees with the spec")));
        }
        layers.push(DenseLayer { w, b, activation });
    }
    Network::from_layers(layers, spec.dropout)
        .map(|n| (n, seed))
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

impl Network {
    pub fn save(&self, path: impl AsRef<Path>, seed: u64) -> Result<()> {
        let mut w = CheckpointWriter::new("network");
        write_network(&mut w, self, seed);
        w.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Network, u64)> {
        let mut r = CheckpointReader::open(path)?;
        if r.kind() != "network" {
            return Err(Error::Checkpoint(format!("expected a network checkpoint, found '{}'", r.kind())));
        }
        let out = read_network(&mut r)?;
        r.finish()?;
        Ok(out)
    }
}
