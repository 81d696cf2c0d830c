//! FVEC: pooled feature vectors, one per sentence.
//!
//! `"FVEC" | u32 dim | u64 count`, then per record `u16 id_len | id | dim x f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::EmbeddingError;

pub const FVEC_MAGIC: [u8; 4] = *b"FVEC";

#[derive(Debug, Clone, PartialEq)]
pub struct FvecRecord {
    pub id: String,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FvecFile {
    pub dim: usize,
    pub records: Vec<FvecRecord>,
}

/// Writes records; `f64` values are narrowed to `f32`.
pub fn write_fvec<W: Write, V: AsRef<[f64]>>(
    mut out: W,
    dim: usize,
    records: &[(String, V)],
) -> Result<(), EmbeddingError> {
    out.write_all(&FVEC_MAGIC)?;
    out.write_u32::<LittleEndian>(dim as u32)?;
    out.write_u64::<LittleEndian>(records.len() as u64)?;
    for (id, values) in records {
        let values = values.as_ref();
        if values.len() != dim {
            return Err(EmbeddingError::DimMismatch {
                expected: dim,
                found: values.len(),
            });
        }
        let len = u16::try_from(id.len())
            .map_err(|_| EmbeddingError::ShapeMismatch(format!("id of {} bytes exceeds u16 length", id.len())))?;
        out.write_u16::<LittleEndian>(len)?;
        out.write_all(id.as_bytes())?;
        for &v in values {
            out.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_fvec<R: Read>(mut input: R) -> Result<FvecFile, EmbeddingError> {
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| EmbeddingError::BadMagic { found: magic.to_vec() })?;
    if magic != FVEC_MAGIC {
        return Err(EmbeddingError::BadMagic { found: magic.to_vec() });
    }
    let dim = input
        .read_u32::<LittleEndian>()
        .map_err(|_| EmbeddingError::TruncatedHeader)? as usize;
    let count = input
        .read_u64::<LittleEndian>()
        .map_err(|_| EmbeddingError::TruncatedHeader)?;
    let mut offset = 16u64;
    let mut records = Vec::new();
    for record in 0..count {
        let truncated = |_| EmbeddingError::TruncatedRecord { record, offset };
        let len = input.read_u16::<LittleEndian>().map_err(truncated)? as usize;
        let mut id = vec![0u8; len];
        input.read_exact(&mut id).map_err(truncated)?;
        let id = String::from_utf8(id)
            .map_err(|_| EmbeddingError::ShapeMismatch(format!("record {record}: id is not UTF-8")))?;
        let mut values = vec![0f32; dim];
        input.read_f32_into::<LittleEndian>(&mut values).map_err(truncated)?;
        offset += (2 + len + 4 * dim) as u64;
        records.push(FvecRecord { id, values });
    }
    Ok(FvecFile { dim, records })
}

impl FvecFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        read_fvec(BufReader::new(File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        let rows: Vec<(String, Vec<f64>)> = self
            .records
            .iter()
            .map(|r| (r.id.clone(), r.values.iter().map(|&v| f64::from(v)).collect()))
            .collect();
        write_fvec(BufWriter::new(File::create(path)?), self.dim, &rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let rows = vec![("a".to_string(), vec![1.0, -2.5]), ("bc".to_string(), vec![0.0, 3.25])];
        let mut buf = Vec::new();
        write_fvec(&mut buf, 2, &rows).unwrap();
        assert_eq!(&buf[..4], b"FVEC");
        assert_eq!(buf.len(), 16 + (2 + 1 + 8) + (2 + 2 + 8));
        let back = read_fvec(buf.as_slice()).unwrap();
        assert_eq!(back.dim, 2);
        assert_eq!(
            back.records[1],
            FvecRecord {
                id: "bc".into(),
                values: vec![0.0, 3.25]
            }
        );
    }

    #[test]
    fn rejects_wrong_dim_and_truncation() {
        let mut buf = Vec::new();
        assert!(write_fvec(&mut buf, 3, &[("a".to_string(), vec![1.0])]).is_err());
        let mut buf = Vec::new();
        write_fvec(&mut buf, 1, &[("a".to_string(), vec![1.0])]).unwrap();
        buf.pop();
        assert!(matches!(
            read_fvec(buf.as_slice()),
            Err(EmbeddingError::TruncatedRecord { record: 0, offset: 16 })
        ));
    }
}
