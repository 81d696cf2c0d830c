//! CEFM model files.
//!
//! ```text
//! "CEFM" | u32 version
//! config: u32 input_dim | u32 num_classes | u32 n_hidden | n_hidden x u32
//!         | f64 learning_rate | u32 epochs | u32 batch_size | u64 seed | f64 l2
//!         | u8 optimizer | u8 class_weights | u32 n_names | n_names x (u16 len | utf8)
//! layers: per layer u32 rows | u32 cols | rows*cols f64 (row-major) | rows f64
//! ```
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{ClassWeights, ClassifierError, Dense, MlpConfig, Model, Optimizer};

pub const CEFM_MAGIC: [u8; 4] = *b"CEFM";
pub const CEFM_VERSION: u32 = 1;

fn u32_of(v: usize) -> Result<u32, ClassifierError> {
    u32::try_from(v).map_err(|_| ClassifierError::Format(format!("{v} does not fit in u32")))
}

impl Model {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), ClassifierError> {
        let c = &self.config;
        w.write_all(&CEFM_MAGIC)?;
        w.write_u32::<LittleEndian>(CEFM_VERSION)?;
        w.write_u32::<LittleEndian>(u32_of(c.input_dim)?)?;
        w.write_u32::<LittleEndian>(u32_of(c.num_classes)?)?;
        w.write_u32::<LittleEndian>(u32_of(c.hidden_dims.len())?)?;
        for &h in &c.hidden_dims {
            w.write_u32::<LittleEndian>(u32_of(h)?)?;
        }
        w.write_f64::<LittleEndian>(c.learning_rate)?;
        w.write_u32::<LittleEndian>(u32_of(c.epochs)?)?;
        w.write_u32::<LittleEndian>(u32_of(c.batch_size)?)?;
        w.write_u64::<LittleEndian>(c.seed)?;
        w.write_f64::<LittleEndian>(c.l2)?;
        w.write_u8(match c.optimizer {
            Optimizer::Sgd => 0,
            Optimizer::Adam => 1,
        })?;
        w.write_u8(match c.class_weights {
            ClassWeights::Uniform => 0,
            ClassWeights::Balanced => 1,
        })?;
        w.write_u32::<LittleEndian>(u32_of(self.class_names.len())?)?;
        for name in &self.class_names {
            let len = u16::try_from(name.len()).map_err(|_| ClassifierError::Format("class name too long".into()))?;
            w.write_u16::<LittleEndian>(len)?;
            w.write_all(name.as_bytes())?;
        }
        for layer in &self.layers {
            w.write_u32::<LittleEndian>(u32_of(layer.rows)?)?;
            w.write_u32::<LittleEndian>(u32_of(layer.cols)?)?;
            for &v in layer.weights.iter().chain(&layer.biases) {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, ClassifierError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != CEFM_MAGIC {
            return Err(ClassifierError::Format(format!("bad magic {magic:?}")));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != CEFM_VERSION {
            return Err(ClassifierError::Format(format!("unsupported version {version}")));
        }
        let input_dim = r.read_u32::<LittleEndian>()? as usize;
        let num_classes = r.read_u32::<LittleEndian>()? as usize;
        let n_hidden = r.read_u32::<LittleEndian>()? as usize;
        let hidden_dims = (0..n_hidden)
            .map(|_| r.read_u32::<LittleEndian>().map(|h| h as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let learning_rate = r.read_f64::<LittleEndian>()?;
        let epochs = r.read_u32::<LittleEndian>()? as usize;
        let batch_size = r.read_u32::<LittleEndian>()? as usize;
        let seed = r.read_u64::<LittleEndian>()?;
        let l2 = r.read_f64::<LittleEndian>()?;
        let optimizer = match r.read_u8()? {
            0 => Optimizer::Sgd,
            1 => Optimizer::Adam,
            other => return Err(ClassifierError::Format(format!("unknown optimizer tag {other}"))),
        };
        let class_weights = match r.read_u8()? {
            0 => ClassWeights::Uniform,
            1 => ClassWeights::Balanced,
            other => return Err(ClassifierError::Format(format!("unknown class weight tag {other}"))),
        };
        let n_names = r.read_u32::<LittleEndian>()? as usize;
        let mut class_names = Vec::with_capacity(n_names.min(1024));
        for _ in 0..n_names {
            let len = r.read_u16::<LittleEndian>()? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            class_names
                .push(String::from_utf8(buf).map_err(|_| ClassifierError::Format("class name is not UTF-8".into()))?);
        }
        let config = MlpConfig {
            input_dim,
            hidden_dims,
            num_classes,
            learning_rate,
            epochs,
            batch_size,
            seed,
            l2,
            optimizer,
            class_weights,
        };
        config.validate()?;
        let mut layers = Vec::new();
        for pair in config.widths().windows(2) {
            let rows = r.read_u32::<LittleEndian>()? as usize;
            let cols = r.read_u32::<LittleEndian>()? as usize;
            if (rows, cols) != (pair[1], pair[0]) {
                return Err(ClassifierError::Format(format!(
                    "layer is {rows}x{cols}, config implies {}x{}",
                    pair[1], pair[0]
                )));
            }
            let mut weights = vec![0f64; rows * cols];
            r.read_f64_into::<LittleEndian>(&mut weights)?;
            let mut biases = vec![0f64; rows];
            r.read_f64_into::<LittleEndian>(&mut biases)?;
            layers.push(Dense {
                rows,
                cols,
                weights,
                biases,
            });
        }
        let model = Model {
            config,
            layers,
            class_names,
        };
        if !model.all_finite() {
            return Err(ClassifierError::Format("non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip() {
        let cfg = MlpConfig {
            hidden_dims: vec![3, 2],
            seed: 42,
            class_weights: ClassWeights::Balanced,
            ..MlpConfig::new(4, 3)
        };
        let mut model = Model::init(cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        model.class_names = vec!["joy".into(), "fear".into(), "anger".into()];
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CEFM");
        assert_eq!(Model::read_from(buf.as_slice()).unwrap(), model);
    }

    #[test]
    fn rejects_corruption() {
        let model = Model::zeros(MlpConfig::new(2, 2)).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Model::read_from(bad.as_slice()).is_err());
        buf.truncate(buf.len() - 3);
        assert!(Model::read_from(buf.as_slice()).is_err());
    }
}
