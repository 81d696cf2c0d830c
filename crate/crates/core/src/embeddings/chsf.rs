//! CHSF: little-endian container for per-layer hidden states.
//!
//! ```text
//! header:  "CHSF" | u32 version | u32 layers | u32 dim | u64 record_count
//! record:  u16 id_len | id | u32 T | T x (u16 piece_len | piece | i32 word_index)
//!          | layers*T*dim f32, layer-major then token then dim
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{EmbeddingError, HiddenStateRecord, SubwordToken, MAX_TOKENS};

pub const CHSF_MAGIC: [u8; 4] = *b"CHSF";
pub const CHSF_VERSION: u32 = 1;
#[cfg(test)]
const HEADER_LEN: u64 = 4 + 4 + 4 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChsfHeader {
    pub version: u32,
    pub layers: usize,
    pub dim: usize,
    pub record_count: u64,
}

struct Counting<R> {
    inner: R,
    pos: u64,
}

impl<R: Read> Read for Counting<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.pos += n as u64;
        Ok(n)
    }
}

/// Streaming reader; yields records in file order.
pub struct ChsfReader<R> {
    input: Counting<R>,
    header: ChsfHeader,
    next: u64,
    failed: bool,
}

impl ChsfReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> ChsfReader<R> {
    pub fn new(inner: R) -> Result<Self, EmbeddingError> {
        let mut input = Counting { inner, pos: 0 };
        let mut magic = [0u8; 4];
        let mut got = 0;
        while got < 4 {
            match input.read(&mut magic[got..])? {
                0 => break,
                n => got += n,
            }
        }
        if got < 4 || magic != CHSF_MAGIC {
            return Err(EmbeddingError::BadMagic {
                found: magic[..got].to_vec(),
            });
        }
        let header = read_header(&mut input).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => EmbeddingError::TruncatedHeader,
            _ => EmbeddingError::Io(e),
        })?;
        if header.version != CHSF_VERSION {
            return Err(EmbeddingError::VersionMismatch {
                found: header.version,
                expected: CHSF_VERSION,
            });
        }
        if header.layers == 0 || header.dim == 0 {
            return Err(EmbeddingError::ShapeMismatch(format!(
                "header declares {} layers of dim {}",
                header.layers, header.dim
            )));
        }
        Ok(Self {
            input,
            header,
            next: 0,
            failed: false,
        })
    }

    pub fn header(&self) -> ChsfHeader {
        self.header
    }

    fn read_record(&mut self) -> Result<HiddenStateRecord, EmbeddingError> {
        let record = self.next;
        let offset = self.input.pos;
        let truncated = |e: io::Error| match e.kind() {
            io::ErrorKind::UnexpectedEof => EmbeddingError::TruncatedRecord { record, offset },
            _ => EmbeddingError::Io(e),
        };
        let r = &mut self.input;
        let id = read_string(r).map_err(truncated)?;
        let t = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        if t == 0 || t > MAX_TOKENS {
            return Err(EmbeddingError::ShapeMismatch(format!(
                "record {record} at byte {offset}: token count {t} outside 1..={MAX_TOKENS}"
            )));
        }
        let mut tokens = Vec::with_capacity(t);
        for _ in 0..t {
            let piece = read_string(r).map_err(truncated)?;
            let word_index = r.read_i32::<LittleEndian>().map_err(truncated)?;
            tokens.push(SubwordToken { piece, word_index });
        }
        let mut activations = vec![0f32; self.header.layers * t * self.header.dim];
        r.read_f32_into::<LittleEndian>(&mut activations).map_err(truncated)?;
        HiddenStateRecord::new(id, self.header.layers, self.header.dim, tokens, activations)
    }
}

impl<R: Read> Iterator for ChsfReader<R> {
    type Item = Result<HiddenStateRecord, EmbeddingError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next >= self.header.record_count {
            return None;
        }
        let out = self.read_record();
        self.next += 1;
        self.failed = out.is_err();
        Some(out)
    }
}

fn read_header<R: Read>(r: &mut R) -> io::Result<ChsfHeader> {
    Ok(ChsfHeader {
        version: r.read_u32::<LittleEndian>()?,
        layers: r.read_u32::<LittleEndian>()? as usize,
        dim: r.read_u32::<LittleEndian>()? as usize,
        record_count: r.read_u64::<LittleEndian>()?,
    })
}

fn read_string<R: Read>(r: &mut R) -> io::Result<String> {
    let len = r.read_u16::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

fn write_string<W: Write>(w: &mut W, s: &str) -> Result<(), EmbeddingError> {
    let len = u16::try_from(s.len())
        .map_err(|_| EmbeddingError::ShapeMismatch(format!("string of {} bytes exceeds u16 length", s.len())))?;
    w.write_u16::<LittleEndian>(len)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Writer for a file whose record count is known up front.
pub struct ChsfWriter<W: Write> {
    out: W,
    layers: usize,
    dim: usize,
    expected: u64,
    written: u64,
}

impl<W: Write> ChsfWriter<W> {
    pub fn new(mut out: W, layers: usize, dim: usize, record_count: u64) -> Result<Self, EmbeddingError> {
        let as_u32 =
            |v: usize| u32::try_from(v).map_err(|_| EmbeddingError::ShapeMismatch(format!("{v} does not fit in u32")));
        out.write_all(&CHSF_MAGIC)?;
        out.write_u32::<LittleEndian>(CHSF_VERSION)?;
        out.write_u32::<LittleEndian>(as_u32(layers)?)?;
        out.write_u32::<LittleEndian>(as_u32(dim)?)?;
        out.write_u64::<LittleEndian>(record_count)?;
        Ok(Self {
            out,
            layers,
            dim,
            expected: record_count,
            written: 0,
        })
    }

    pub fn write_record(&mut self, rec: &HiddenStateRecord) -> Result<(), EmbeddingError> {
        if rec.layer_count() != self.layers || rec.hidden_dim() != self.dim {
            return Err(EmbeddingError::ShapeMismatch(format!(
                "record {:?} is {}x{}, file is {}x{}",
                rec.sentence_id(),
                rec.layer_count(),
                rec.hidden_dim(),
                self.layers,
                self.dim
            )));
        }
        if self.written >= self.expected {
            return Err(EmbeddingError::ShapeMismatch(format!(
                "header declared {} records",
                self.expected
            )));
        }
        write_string(&mut self.out, rec.sentence_id())?;
        self.out.write_u32::<LittleEndian>(rec.token_count() as u32)?;
        for tok in rec.subword_tokens() {
            write_string(&mut self.out, &tok.piece)?;
            self.out.write_i32::<LittleEndian>(tok.word_index)?;
        }
        for &v in rec.activations() {
            self.out.write_f32::<LittleEndian>(v)?;
        }
        self.written += 1;
        Ok(())
    }

    /// Flushes and checks that the declared number of records was written.
    pub fn finish(mut self) -> Result<W, EmbeddingError> {
        if self.written != self.expected {
            return Err(EmbeddingError::ShapeMismatch(format!(
                "wrote {} of {} declared records",
                self.written, self.expected
            )));
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_chsf(
    path: impl AsRef<Path>,
    layers: usize,
    dim: usize,
    records: &[HiddenStateRecord],
) -> Result<(), EmbeddingError> {
    let file = BufWriter::new(File::create(path)?);
    let mut writer = ChsfWriter::new(file, layers, dim, records.len() as u64)?;
    for rec in records {
        writer.write_record(rec)?;
    }
    writer.finish()?;
    Ok(())
}

/// Reads every record of a file.
pub fn read_chsf(path: impl AsRef<Path>) -> Result<(ChsfHeader, Vec<HiddenStateRecord>), EmbeddingError> {
    let reader = ChsfReader::open(path)?;
    let header = reader.header();
    let records = reader.collect::<Result<Vec<_>, _>>()?;
    Ok((header, records))
}

/// Byte size of a serialized record, used by tests to locate offsets.
#[cfg(test)]
pub(crate) fn record_len(rec: &HiddenStateRecord) -> u64 {
    let pieces: usize = rec.subword_tokens().iter().map(|t| 2 + t.piece.len() + 4).sum();
    (2 + rec.sentence_id().len() + 4 + pieces + rec.activations().len() * 4) as u64
}
