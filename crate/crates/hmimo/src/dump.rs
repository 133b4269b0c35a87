//! Self-describing binary container for channel realizations.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "HCH1"
//! 4       4     u32  users (M)
//! 8       4     u32  receive elements per user (N_r)
//! 12      4     u32  transmit elements (N_s)
//! 16      4     u32  receive harmonics per user (n_r)
//! 20      4     u32  transmit harmonics (n_s)
//! 24      8     u64  record count
//! 32      8     u64  master seed
//! 40      ...   records
//! ```
//!
//! Each record stores the `M` per-user wavenumber matrices (`n_r x n_s`)
//! followed by the stacked space-domain matrix (`M·N_r x N_s`), every matrix
//! row-major, every entry a complex64 (real then imaginary, little-endian
//! `f32` each). A record is therefore `(M·n_r·n_s + M·N_r·N_s)·8` bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::channel::ChannelRealization;
use crate::{Cx, ModelError, Result};

/// File magic identifying the container.
pub const MAGIC: [u8; 4] = *b"HCH1";

/// Fixed header length in bytes.
pub const HEADER_LEN: u64 = 40;

/// Container header; fully determines every record's shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpHeader {
    pub users: u32,
    pub rx_elements: u32,
    pub tx_elements: u32,
    pub rx_harmonics: u32,
    pub tx_harmonics: u32,
    pub records: u64,
    pub seed: u64,
}

impl DumpHeader {
    /// Payload length of one record in bytes.
    pub fn record_len(&self) -> u64 {
        let m = self.users as u64;
        let wavenumber = m * self.rx_harmonics as u64 * self.tx_harmonics as u64;
        let space = m * self.rx_elements as u64 * self.tx_elements as u64;
        (wavenumber + space) * 8
    }

    /// Total file length implied by the header.
    pub fn file_len(&self) -> u64 {
        HEADER_LEN + self.records * self.record_len()
    }
}

/// One stored realization: per-user wavenumber matrices plus the stacked
/// space-domain channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRecord {
    pub wavenumber: Vec<DMatrix<Cx>>,
    pub space: DMatrix<Cx>,
}

impl DumpRecord {
    pub fn from_realization(realization: &ChannelRealization) -> Self {
        DumpRecord {
            wavenumber: realization.per_user_wavenumber.clone(),
            space: realization.stacked_space.clone(),
        }
    }

    fn matches(&self, header: &DumpHeader) -> bool {
        self.wavenumber.len() == header.users as usize
            && self.wavenumber.iter().all(|w| {
                w.nrows() == header.rx_harmonics as usize
                    && w.ncols() == header.tx_harmonics as usize
            })
            && self.space.nrows() == (header.users * header.rx_elements) as usize
            && self.space.ncols() == header.tx_elements as usize
    }
}

fn io_err(path: &Path, source: std::io::Error) -> ModelError {
    ModelError::Io { path: path.to_path_buf(), source }
}

fn malformed(path: &Path, reason: impl Into<String>) -> ModelError {
    ModelError::MalformedDump { path: path.to_path_buf(), reason: reason.into() }
}

/// Append one matrix row-major as complex64 pairs.
fn write_matrix(out: &mut Vec<u8>, matrix: &DMatrix<Cx>) {
    for r in 0..matrix.nrows() {
        for c in 0..matrix.ncols() {
            let z = matrix[(r, c)];
            out.extend_from_slice(&(z.re as f32).to_le_bytes());
            out.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
    }
}

fn read_matrix(
    input: &mut impl Read,
    rows: usize,
    cols: usize,
    path: &Path,
) -> Result<DMatrix<Cx>> {
    let mut buf = vec![0u8; rows * cols * 8];
    input.read_exact(&mut buf).map_err(|e| io_err(path, e))?;
    let mut matrix = DMatrix::zeros(rows, cols);
    for (k, chunk) in buf.chunks_exact(8).enumerate() {
        let re = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
        let im = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
        matrix[(k / cols, k % cols)] = Cx::new(re as f64, im as f64);
    }
    Ok(matrix)
}

/// Write a dump file. The header's record count must match `records`, and
/// every record must match the header's shape.
pub fn write_dump(path: &Path, header: &DumpHeader, records: &[DumpRecord]) -> Result<()> {
    if header.records != records.len() as u64 {
        return Err(ModelError::DimensionMismatch(format!(
            "header advertises {} records but {} were supplied",
            header.records,
            records.len()
        )));
    }
    if let Some(bad) = records.iter().position(|r| !r.matches(header)) {
        return Err(ModelError::DimensionMismatch(format!(
            "record {bad} does not match the header dimensions"
        )));
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    let mut head = Vec::with_capacity(HEADER_LEN as usize);
    head.extend_from_slice(&MAGIC);
    head.extend_from_slice(&header.users.to_le_bytes());
    head.extend_from_slice(&header.rx_elements.to_le_bytes());
    head.extend_from_slice(&header.tx_elements.to_le_bytes());
    head.extend_from_slice(&header.rx_harmonics.to_le_bytes());
    head.extend_from_slice(&header.tx_harmonics.to_le_bytes());
    head.extend_from_slice(&header.records.to_le_bytes());
    head.extend_from_slice(&header.seed.to_le_bytes());
    writer.write_all(&head).map_err(|e| io_err(path, e))?;
    let mut body = Vec::with_capacity(header.record_len() as usize);
    for record in records {
        body.clear();
        for w in &record.wavenumber {
            write_matrix(&mut body, w);
        }
        write_matrix(&mut body, &record.space);
        writer.write_all(&body).map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

fn read_u32(input: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b).map_err(|e| io_err(path, e))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(input: &mut impl Read, path: &Path) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b).map_err(|e| io_err(path, e))?;
    Ok(u64::from_le_bytes(b))
}

/// Parse just the header of a dump file.
pub fn read_header(path: &Path) -> Result<DumpHeader> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = BufReader::new(file);
    read_header_from(&mut reader, path)
}

fn read_header_from(reader: &mut impl Read, path: &Path) -> Result<DumpHeader> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
    if magic != MAGIC {
        return Err(malformed(path, format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let header = DumpHeader {
        users: read_u32(reader, path)?,
        rx_elements: read_u32(reader, path)?,
        tx_elements: read_u32(reader, path)?,
        rx_harmonics: read_u32(reader, path)?,
        tx_harmonics: read_u32(reader, path)?,
        records: read_u64(reader, path)?,
        seed: read_u64(reader, path)?,
    };
    if header.users == 0 || header.rx_elements == 0 || header.tx_elements == 0 {
        return Err(malformed(path, "header declares an empty system"));
    }
    Ok(header)
}

/// Read a whole dump file back.
pub fn read_dump(path: &Path) -> Result<(DumpHeader, Vec<DumpRecord>)> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let expected_len = file.metadata().map(|m| m.len()).ok();
    let mut reader = BufReader::new(file);
    let header = read_header_from(&mut reader, path)?;
    if let Some(len) = expected_len {
        if len != header.file_len() {
            return Err(malformed(
                path,
                format!("file is {len} bytes, header implies {}", header.file_len()),
            ));
        }
    }
    let mut records = Vec::with_capacity(header.records as usize);
    for _ in 0..header.records {
        let mut wavenumber = Vec::with_capacity(header.users as usize);
        for _ in 0..header.users {
            wavenumber.push(read_matrix(
                &mut reader,
                header.rx_harmonics as usize,
                header.tx_harmonics as usize,
                path,
            )?);
        }
        let space = read_matrix(
            &mut reader,
            (header.users * header.rx_elements) as usize,
            header.tx_elements as usize,
            path,
        )?;
        records.push(DumpRecord { wavenumber, space });
    }
    let mut trailing = [0u8; 1];
    match reader.read(&mut trailing) {
        Ok(0) => Ok((header, records)),
        Ok(_) => Err(malformed(path, "trailing bytes after the last record")),
        Err(e) => Err(io_err(path, e)),
    }
}

// ---------------------------------------------------------------------------
