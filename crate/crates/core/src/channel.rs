//! Channel realization generation and import.
//!
//! Besides the i.i.d. Rayleigh generator, realizations can be streamed from
//! `.chn` files so externally generated channels (e.g. ray-traced ones) can
//! be replayed bit-exactly. Format, all little-endian:
//!
//! ```text
//! magic "CHNL" | u16 version = 1 | u32 B | u32 U | u64 record count
//! per record: H row-major (B*U complex), then j (B complex),
//!             each complex as re f64, im f64
//! ```

use crate::error::{Error, Result};
use crate::numerics::{CMat, HpdCholesky};
use crate::rng::cn01;
use crate::scalar::{Scalar, C};
use rand::Rng;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const CHN_MAGIC: &[u8; 4] = b"CHNL";
const CHN_VERSION: u16 = 1;

/// Relative residual below which `j` counts as inside the column space of
/// `H`, violating the recovery assumptions.
const SPAN_TOL: f64 = 1e-8;

/// One block-fading channel realization.
#[derive(Clone, Debug)]
pub struct ChannelRealization<T: Scalar> {
    /// UE channel matrix, B x U, full column rank.
    pub h: CMat<T>,
    /// Jammer channel, B x 1, outside the column space of `h`.
    pub j: CMat<T>,
    /// Provenance ("rayleigh", file name, ...).
    pub label: String,
}

impl<T: Scalar> ChannelRealization<T> {
    /// Checks full column rank of `h` and that `j` is not (numerically)
    /// inside the column space of `h`.
    pub fn validate(&self) -> Result<()> {
        if self.h.rows() != self.j.rows() || self.j.cols() != 1 {
            return Err(Error::ShapeError(format!(
                "channel dims H {}x{}, j {}x{}",
                self.h.rows(),
                self.h.cols(),
                self.j.rows(),
                self.j.cols()
            )));
        }
        if !self.h.is_finite() || !self.j.is_finite() {
            return Err(Error::NonFinite("channel entries must be finite".into()));
        }
        let gram = self.h.herm().matmul(&self.h);
        let chol = HpdCholesky::factor(&gram)
            .map_err(|_| Error::RankDeficient("H does not have full column rank".into()))?;
        // Residual of projecting j onto span(H).
        let hj = self.h.herm().matmul(&self.j);
        let x = chol.solve(&hj);
        let res = (&self.j - &self.h.matmul(&x)).frob();
        let jn = self.j.frob();
        if !(res > T::spec_tol(SPAN_TOL) * jn) {
            return Err(Error::InvalidJammer(format!(
                "jammer channel lies in span(H): residual {res:e} vs norm {jn:e}"
            )));
        }
        Ok(())
    }

    pub fn b(&self) -> usize {
        self.h.rows()
    }

    pub fn u(&self) -> usize {
        self.h.cols()
    }
}

/// Draws H and j with i.i.d. CN(0,1) entries. The probability-zero validity
/// failures (rank collapse, j inside span(H)) trigger a redraw.
pub fn rayleigh<T: Scalar>(b: usize, u: usize, rng: &mut impl Rng) -> ChannelRealization<T> {
    loop {
        let real = ChannelRealization {
            h: CMat::from_fn(b, u, |_, _| cn01::<T>(rng)),
            j: CMat::from_fn(b, 1, |_, _| cn01::<T>(rng)),
            label: "rayleigh".into(),
        };
        if real.validate().is_ok() {
            return real;
        }
    }
}

/// Rescales each column of `H` so the per-UE receive power lies within
/// `+-range_db` of the median power, preserving column directions.
pub fn power_control<T: Scalar>(real: &ChannelRealization<T>, range_db: f64) -> ChannelRealization<T> {
    assert!(range_db >= 0.0, "power control range must be nonnegative");
    let u = real.u();
    let mut powers: Vec<T> = (0..u)
        .map(|c| real.h.col(c).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let mut sorted = powers.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if u % 2 == 1 {
        sorted[u / 2]
    } else {
        (sorted[u / 2 - 1] + sorted[u / 2]) * T::c(0.5)
    };
    let hi = median * T::c(10f64.powf(range_db / 10.0));
    let lo = median / T::c(10f64.powf(range_db / 10.0));
    let mut h = real.h.clone();
    for c in 0..u {
        let clamped = powers[c].min(hi).max(lo);
        let scale = (clamped / powers[c]).sqrt();
        for r in 0..h.rows() {
            h[(r, c)] = h[(r, c)] * scale;
        }
        powers[c] = clamped;
    }
    ChannelRealization { h, j: real.j.clone(), label: format!("{}+pc{range_db}dB", real.label) }
}

/// Writes a `.chn` file from an iterator of realizations.
pub fn export_channels<'a, T: Scalar + 'a>(
    path: &Path,
    b: usize,
    u: usize,
    reals: impl Iterator<Item = &'a ChannelRealization<T>>,
) -> Result<u64> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let mut body: Vec<u8> = Vec::new();
    let mut count: u64 = 0;
    for real in reals {
        if real.b() != b || real.u() != u {
            return Err(Error::ShapeError(format!(
                "record {count} is {}x{}, file is {b}x{u}",
                real.b(),
                real.u()
            )));
        }
        for z in real.h.as_slice().iter().chain(real.j.as_slice()) {
            body.extend_from_slice(&z.re.to_f64().unwrap().to_le_bytes());
            body.extend_from_slice(&z.im.to_f64().unwrap().to_le_bytes());
        }
        count += 1;
    }
    w.write_all(CHN_MAGIC)?;
    w.write_all(&CHN_VERSION.to_le_bytes())?;
    w.write_all(&(b as u32).to_le_bytes())?;
    w.write_all(&(u as u32).to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(count)
}

/// Parsed `.chn` header.
#[derive(Copy, Clone, Debug)]
pub struct ChnHeader {
    pub b: usize,
    pub u: usize,
    pub count: u64,
}

/// Streaming `.chn` reader; yields one realization per record.
pub struct ChnReader<R> {
    src: R,
    header: ChnHeader,
    next_record: u64,
}

impl ChnReader<BufReader<std::fs::File>> {
    pub fn open(path: &Path) -> Result<Self> {
        Self::from_reader(BufReader::new(std::fs::File::open(path)?))
    }
}

impl<R: Read> ChnReader<R> {
    pub fn from_reader(mut src: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        src.read_exact(&mut magic)
            .map_err(|e| Error::ChannelFile { record: None, msg: format!("header: {e}") })?;
        if &magic != CHN_MAGIC {
            return Err(Error::ChannelFile { record: None, msg: "bad magic".into() });
        }
        let version = read_u16(&mut src)?;
        if version != CHN_VERSION {
            return Err(Error::ChannelFile {
                record: None,
                msg: format!("unsupported version {version}"),
            });
        }
        let b = read_u32(&mut src)? as usize;
        let u = read_u32(&mut src)? as usize;
        let count = read_u64(&mut src)?;
        if b == 0 || u == 0 || u >= b {
            return Err(Error::ChannelFile {
                record: None,
                msg: format!("invalid dimensions B = {b}, U = {u}"),
            });
        }
        Ok(Self { src, header: ChnHeader { b, u, count }, next_record: 0 })
    }

    pub fn header(&self) -> ChnHeader {
        self.header
    }

    /// Reads the next raw record without validity checks.
    fn next_raw<T: Scalar>(&mut self) -> Option<Result<ChannelRealization<T>>> {
        if self.next_record >= self.header.count {
            return None;
        }
        let idx = self.next_record;
        self.next_record += 1;
        let (b, u) = (self.header.b, self.header.u);
        let n = b * u + b;
        let mut buf = vec![0u8; n * 16];
        if let Err(e) = self.src.read_exact(&mut buf) {
            return Some(Err(Error::ChannelFile { record: Some(idx), msg: format!("{e}") }));
        }
        let mut entries = Vec::with_capacity(n);
        for chunk in buf.chunks_exact(16) {
            let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
            let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
            entries.push(C::new(T::c(re), T::c(im)));
        }
        let h = match CMat::from_vec(b, u, entries[..b * u].to_vec()) {
            Ok(h) => h,
            Err(e) => {
                return Some(Err(Error::ChannelFile { record: Some(idx), msg: e.to_string() }))
            }
        };
        let j = match CMat::from_vec(b, 1, entries[b * u..].to_vec()) {
            Ok(j) => j,
            Err(e) => {
                return Some(Err(Error::ChannelFile { record: Some(idx), msg: e.to_string() }))
            }
        };
        Some(Ok(ChannelRealization { h, j, label: format!("chn[{idx}]") }))
    }
}

/// Result of importing a whole `.chn` file: valid realizations plus the
/// indices of records that were skipped for violating channel invariants.
#[derive(Debug)]
pub struct ChannelImport<T: Scalar> {
    pub header: ChnHeader,
    pub realizations: Vec<ChannelRealization<T>>,
    pub skipped: Vec<(u64, String)>,
}

/// Loads and validates every record of a `.chn` file. Malformed data is an
/// error naming the record; records with a jammer channel inside span(H)
/// (or rank-deficient H) are skipped with a warning entry.
pub fn import_channels<T: Scalar>(path: &Path) -> Result<ChannelImport<T>> {
    let mut reader = ChnReader::open(path)?;
    let header = reader.header();
    let mut realizations = Vec::new();
    let mut skipped = Vec::new();
    let mut idx: u64 = 0;
    while let Some(rec) = reader.next_raw::<T>() {
        let real = rec?;
        match real.validate() {
            Ok(()) => realizations.push(real),
            Err(e) => skipped.push((idx, e.to_string())),
        }
        idx += 1;
    }
    Ok(ChannelImport { header, realizations, skipped })
}

fn read_u16(src: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    src.read_exact(&mut b)
        .map_err(|e| Error::ChannelFile { record: None, msg: format!("header: {e}") })?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(src: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    src.read_exact(&mut b)
        .map_err(|e| Error::ChannelFile { record: None, msg: format!("header: {e}") })?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(src: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    src.read_exact(&mut b)
        .map_err(|e| Error::ChannelFile { record: None, msg: format!("header: {e}") })?;
    Ok(u64::from_le_bytes(b))
}
