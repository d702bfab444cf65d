//! Binary instance container.
//!
//! Layout (all integers and floats little-endian 64-bit):
//!
//! ```text
//! magic   5 bytes  "AMPU1"
//! header  version u64 | n u64 | m u64 | delta f64 | eta f64 | rho f64 | seed u64
//! blocks  f_true (m·n f64, row-major) | f_observed (m·n f64, row-major)
//!         | signal (n f64) | measurements (m f64)
//! footer  fnv1a-64 checksum of every preceding byte
//! ```
//!
//! The rescaled posterior matrix is not stored; it is recomputed on load,
//! which reproduces the generated instance bit-exactly because it is a
//! pure elementwise function of the observed matrix and η.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ramp_core::instance::{InstanceError, NoiseModel, ProblemInstance};
use ramp_core::matrix::DenseMatrix;
use ramp_core::prior::SignalPrior;

const MAGIC: &[u8; 5] = b"AMPU1";
const VERSION: u64 = 1;

#[derive(Debug)]
pub enum InstanceIoError {
    Io(std::io::Error),
    BadMagic,
    UnsupportedVersion(u64),
    BadDimensions { n: u64, m: u64 },
    /// File ended before the declared blocks (or mid-header).
    Truncated,
    TrailingData,
    ChecksumMismatch { stored: u64, computed: u64 },
    InvalidField(String),
    /// Declared dimensions exceed the in-memory budget.
    TooLarge,
}

impl std::fmt::Display for InstanceIoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InstanceIoError::Io(e) => write!(f, "instance file i/o: {e}"),
            InstanceIoError::BadMagic => write!(f, "not an instance file (bad magic)"),
            InstanceIoError::UnsupportedVersion(v) => {
                write!(f, "unsupported instance format version {v}")
            }
            InstanceIoError::BadDimensions { n, m } => {
                write!(f, "unusable dimensions in header: n={n}, m={m}")
            }
            InstanceIoError::Truncated => write!(f, "instance file truncated"),
            InstanceIoError::TrailingData => write!(f, "instance file has trailing bytes"),
            InstanceIoError::ChecksumMismatch { stored, computed } => write!(
                f,
                "checksum mismatch: stored {stored:#018x}, computed {computed:#018x}"
            ),
            InstanceIoError::InvalidField(m) => write!(f, "invalid header field: {m}"),
            InstanceIoError::TooLarge => write!(f, "instance exceeds the memory budget"),
        }
    }
}

impl std::error::Error for InstanceIoError {}

impl From<std::io::Error> for InstanceIoError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            InstanceIoError::Truncated
        } else {
            InstanceIoError::Io(e)
        }
    }
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

struct HashingWriter<W: Write> {
    inner: W,
    hash: Fnv1a,
}

impl<W: Write> HashingWriter<W> {
    fn write_all(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.hash.update(bytes);
        self.inner.write_all(bytes)
    }

    fn write_u64(&mut self, v: u64) -> std::io::Result<()> {
        self.write_all(&v.to_le_bytes())
    }

    fn write_f64(&mut self, v: f64) -> std::io::Result<()> {
        self.write_all(&v.to_le_bytes())
    }

    fn write_f64_slice(&mut self, vs: &[f64]) -> std::io::Result<()> {
        // chunked conversion keeps the write path buffered without a
        // second full-size copy
        let mut buf = [0u8; 8 * 1024];
        for chunk in vs.chunks(1024) {
            for (i, v) in chunk.iter().enumerate() {
                buf[8 * i..8 * i + 8].copy_from_slice(&v.to_le_bytes());
            }
            self.write_all(&buf[..8 * chunk.len()])?;
        }
        Ok(())
    }
}

/// Write an instance; the temp-file-plus-rename makes the write atomic.
pub fn save_instance(inst: &ProblemInstance, path: &Path) -> Result<(), InstanceIoError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    {
        let mut w = HashingWriter { inner: BufWriter::new(tmp.as_file()), hash: Fnv1a::new() };
        w.write_all(MAGIC)?;
        w.write_u64(VERSION)?;
        w.write_u64(inst.n() as u64)?;
        w.write_u64(inst.m() as u64)?;
        w.write_f64(inst.noise().delta())?;
        w.write_f64(inst.noise().eta())?;
        w.write_f64(inst.prior().rho())?;
        w.write_u64(inst.seed())?;
        w.write_f64_slice(inst.true_matrix().data())?;
        w.write_f64_slice(inst.observed_matrix().data())?;
        w.write_f64_slice(inst.signal())?;
        w.write_f64_slice(inst.measurements())?;
        let checksum = w.hash.0;
        w.inner.write_all(&checksum.to_le_bytes())?;
        w.inner.flush()?;
    }
    tmp.persist(path).map_err(|e| InstanceIoError::Io(e.error))?;
    Ok(())
}

struct HashingReader<R: Read> {
    inner: R,
    hash: Fnv1a,
}

impl<R: Read> HashingReader<R> {
    fn read_exact(&mut self, buf: &mut [u8]) -> Result<(), InstanceIoError> {
        self.inner.read_exact(buf)?;
        self.hash.update(buf);
        Ok(())
    }

    fn read_u64(&mut self) -> Result<u64, InstanceIoError> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn read_f64(&mut self) -> Result<f64, InstanceIoError> {
        Ok(f64::from_bits(self.read_u64()?))
    }

    fn read_f64_vec(&mut self, count: usize) -> Result<Vec<f64>, InstanceIoError> {
        let mut out = Vec::with_capacity(count);
        let mut buf = [0u8; 8 * 1024];
        let mut remaining = count;
        while remaining > 0 {
            let take = remaining.min(1024);
            self.read_exact(&mut buf[..8 * take])?;
            for i in 0..take {
                let mut b = [0u8; 8];
                b.copy_from_slice(&buf[8 * i..8 * i + 8]);
                out.push(f64::from_le_bytes(b));
            }
            remaining -= take;
        }
        Ok(out)
    }
}

/// Read an instance back; the posterior matrix and cached column norms
/// are rebuilt from the stored fields.
pub fn load_instance(path: &Path) -> Result<ProblemInstance, InstanceIoError> {
    let file = File::open(path)?;
    let mut r = HashingReader { inner: BufReader::new(file), hash: Fnv1a::new() };

    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(InstanceIoError::BadMagic);
    }
    let version = r.read_u64()?;
    if version != VERSION {
        return Err(InstanceIoError::UnsupportedVersion(version));
    }
    let n = r.read_u64()?;
    let m = r.read_u64()?;
    if n == 0 || m == 0 || n > u32::MAX as u64 || m > u32::MAX as u64 {
        return Err(InstanceIoError::BadDimensions { n, m });
    }
    let (n, m) = (n as usize, m as usize);
    let cells = m.checked_mul(n).ok_or(InstanceIoError::BadDimensions {
        n: n as u64,
        m: m as u64,
    })?;
    if 3u128 * cells as u128 * 8 > ramp_core::instance::DEFAULT_MEMORY_BUDGET_BYTES {
        return Err(InstanceIoError::TooLarge);
    }
    let delta = r.read_f64()?;
    let eta = r.read_f64()?;
    let rho = r.read_f64()?;
    let seed = r.read_u64()?;

    let noise = NoiseModel::new(delta, eta)
        .map_err(|e| InstanceIoError::InvalidField(e.to_string()))?;
    let prior =
        SignalPrior::new(rho).map_err(|e| InstanceIoError::InvalidField(e.to_string()))?;

    let f_true = r.read_f64_vec(cells)?;
    let f_observed = r.read_f64_vec(cells)?;
    let signal = r.read_f64_vec(n)?;
    let measurements = r.read_f64_vec(m)?;

    let computed = r.hash.0;
    let mut tail = [0u8; 8];
    r.inner.read_exact(&mut tail).map_err(InstanceIoError::from)?;
    let stored = u64::from_le_bytes(tail);
    if stored != computed {
        return Err(InstanceIoError::ChecksumMismatch { stored, computed });
    }
    let mut probe = [0u8; 1];
    match r.inner.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(InstanceIoError::TrailingData),
        Err(e) => return Err(InstanceIoError::Io(e)),
    }

    let true_matrix = DenseMatrix::from_vec(m, n, f_true).ok_or(InstanceIoError::Truncated)?;
    let observed_matrix =
        DenseMatrix::from_vec(m, n, f_observed).ok_or(InstanceIoError::Truncated)?;
    ProblemInstance::from_parts(true_matrix, observed_matrix, signal, measurements, noise, prior, seed)
        .map_err(|e: InstanceError| InstanceIoError::InvalidField(e.to_string()))
}
