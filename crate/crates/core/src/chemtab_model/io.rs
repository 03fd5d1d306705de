//! Model checkpoints extend the network container (kind `chemtab-model`):
//!
//! ```text
//! label          str
//! seed           u64
//! species        u32 count, then one str each
//! key species    u32 count, then one str each
//! constraints    str label, then f64 lambda_un, lambda_wo, lambda_ar
//! y_scale        vector
//! energy stats   vector center, vector scale, vector constant flags (0/1)
//! key stats      vector center, vector scale, vector constant flags (0/1)
//! encoder        u32 tag: 0 trainable W, 1 frozen W, 2 network
//!                then W (s x p matrix) or a network payload
//! trunk, key head, energy head   network payloads
//! ```

use std::io::Write;
use std::path::Path;

use super::{ChemTabModel, ConstraintConfig, Encoder, ModelNorm};
use crate::dataset::{fmt_f64, ColumnStats};
use crate::nn::{read_network, write_network, CheckpointReader, CheckpointWriter};
use crate::{Error, Result};

const KIND: &str = "chemtab-model";

fn put_names(w: &mut CheckpointWriter, names: &[String]) {
    w.put_u32(names.len() as u32);
    for n in names {
        w.put_str(n);
    }
}

fn get_names(r: &mut CheckpointReader) -> Result<Vec<String>> {
    let n = r.get_u32()? as usize;
    (0..n).map(|_| r.get_str()).collect()
}

fn put_stats(w: &mut CheckpointWriter, s: &ColumnStats) {
    w.put_vector(&s.center);
    w.put_vector(&s.scale);
    let flags: Vec<f64> = s.constant.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    w.put_vector(&flags);
}

fn get_stats(r: &mut CheckpointReader) -> Result<ColumnStats> {
    let center = r.get_vector()?;
    let scale = r.get_vector()?;
    let constant: Vec<bool> = r.get_vector()?.iter().map(|&f| f != 0.0).collect();
    if center.len() != scale.len() || scale.len() != constant.len() {
        return Err(Error::Checkpoint("normalization vectors differ in length".into()));
    }
    Ok(ColumnStats { center, scale, constant })
}

impl ChemTabModel {
    pub fn to_bytes(&self, seed: u64) -> Vec<u8> {
        let mut w = CheckpointWriter::new(KIND);
        w.put_str(&self.label);
        w.put_u64(seed);
        put_names(&mut w, &self.species);
        put_names(&mut w, &self.key_species);
        let c = &self.constraints;
        w.put_str(&c.label());
        w.put_f64(c.lambda_un);
        w.put_f64(c.lambda_wo);
        w.put_f64(c.lambda_ar);
        w.put_vector(&self.norm.y_scale);
        put_stats(&mut w, &self.norm.energy);
        put_stats(&mut w, &self.norm.key);
        match &self.encoder {
            Encoder::Linear { w: m, trainable } => {
                w.put_u32(if *trainable { 0 } else { 1 });
                w.put_matrix(m);
            }
            Encoder::Nonlinear(net) => {
                w.put_u32(2);
                write_network(&mut w, net, seed);
            }
        }
        for net in [&self.trunk, &self.head_key, &self.head_energy] {
            write_network(&mut w, net, seed);
        }
        w.bytes().to_vec()
    }

    pub fn save(&self, path: impl AsRef<Path>, seed: u64) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes(seed))?;
        Ok(())
    }

    /// Loads a model and the seed recorded with it.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, u64)> {
        let mut r = CheckpointReader::open(path)?;
        if r.kind() != KIND {
            return Err(Error::Checkpoint(format!("expected a {KIND} checkpoint, found '{}'", r.kind())));
        }
        let label = r.get_str()?;
        let seed = r.get_u64()?;
        let species = get_names(&mut r)?;
        let key_species = get_names(&mut r)?;
        let constraints = ConstraintConfig::parse(&r.get_str()?)?.with_lambdas(r.get_f64()?, r.get_f64()?, r.get_f64()?);
        let y_scale = r.get_vector()?;
        let energy = get_stats(&mut r)?;
        let key = get_stats(&mut r)?;
        let encoder = match r.get_u32()? {
            tag @ (0 | 1) => Encoder::Linear { w: r.get_matrix()?, trainable: tag == 0 },
            2 => Encoder::Nonlinear(read_network(&mut r)?.0),
            other => return Err(Error::Checkpoint(format!("unknown encoder tag {other}"))),
        };
        let trunk = read_network(&mut r)?.0;
        let head_key = read_network(&mut r)?.0;
        let head_energy = read_network(&mut r)?.0;
        r.finish()?;
        if y_scale.len() != species.len() || key.len() != key_species.len() || energy.len() != 1 {
            return Err(Error::Checkpoint("normalization does not match the species lists".into()));
        }
        let mut model = ChemTabModel {
            species,
            key_species,
            encoder: Encoder::Linear { w: ndarray::Array2::zeros((0, 0)), trainable: false },
            trunk,
            head_key,
            head_energy,
            constraints,
            norm: ModelNorm { y_scale, energy, key },
            label,
        };
        model.replace_encoder(encoder).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok((model, seed))
    }
}

/// Writes `W` as species rows by progress-variable columns.
pub fn write_weights_csv(model: &ChemTabModel, path: impl AsRef<Path>) -> Result<()> {
    let w = model
        .encoder
        .weights()
        .ok_or_else(|| Error::Config(format!("{} has no linear encoder to export", model.label)))?;
    let mut out = String::from("species");
    for j in 0..w.ncols() {
        out.push_str(&format!(",pv{}", j + 1));
    }
    out.push('\n');
    for (name, row) in model.species.iter().zip(w.rows()) {
        out.push_str(name);
        for v in row {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
