//! SNNS1 binary instance container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size            field
//! 0       5               magic "SNNS1"
//! 5       4   u32         d
//! 9       4   u32         n            (data points; B has n+1 columns)
//! 13      4   u32         k
//! 17      8   f64         epsilon
//! 25      4   u32         nn_index     (1-based, in 1..=n)
//! 29      8·d·(n+1) f64   B, row-major
//! -- optional noisy section --
//!         8   f64         sigma
//!         8   u64         seed
//!         8·d·(n+1) f64   A, row-major
//! ```
//!
//! A file that ends right after `B` holds a latent instance only. Anything
//! else after `B` must be exactly one noisy section.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DataMatrix;
use crate::model::{LatentInstance, NoisyInstance};

pub const MAGIC: &[u8; 5] = b"SNNS1";

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub latent: LatentInstance,
    pub noisy: Option<NoisyInstance>,
}

fn to_u32(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::Format(format!("{what} = {value} does not fit in u32")))
}

pub fn write_instance<W: Write>(mut w: W, latent: &LatentInstance, noisy: Option<&NoisyInstance>) -> Result<()> {
    if let Some(noisy) = noisy {
        if noisy.a().rows() != latent.d() || noisy.a().cols() != latent.n() + 1 {
            return Err(Error::param("noisy", "observed matrix shape differs from the latent one"));
        }
    }
    w.write_all(MAGIC)?;
    w.write_all(&to_u32(latent.d(), "d")?.to_le_bytes())?;
    w.write_all(&to_u32(latent.n(), "n")?.to_le_bytes())?;
    w.write_all(&to_u32(latent.k(), "k")?.to_le_bytes())?;
    w.write_all(&latent.epsilon().to_le_bytes())?;
    w.write_all(&to_u32(latent.nn_index() + 1, "nn_index")?.to_le_bytes())?;
    write_matrix(&mut w, latent.b())?;
    if let Some(noisy) = noisy {
        w.write_all(&noisy.sigma().to_le_bytes())?;
        w.write_all(&noisy.seed().to_le_bytes())?;
        write_matrix(&mut w, noisy.a())?;
    }
    w.flush()?;
    Ok(())
}

fn write_matrix<W: Write>(w: &mut W, m: &DataMatrix) -> Result<()> {
    for x in m.to_row_major() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format(format!("truncated SNNS1 data while reading {what}")))?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take::<4>(what)?) as usize)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take::<8>(what)?))
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<DataMatrix> {
        let count = rows * cols;
        if self.bytes.len() - self.pos < count * 8 {
            return Err(Error::Format(format!("truncated SNNS1 data while reading {what}")));
        }
        let data: Vec<f64> = (0..count).map(|_| self.f64(what)).collect::<Result<_>>()?;
        DataMatrix::from_row_slice(rows, cols, &data).map_err(|e| Error::Format(format!("{what}: {e}")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn read_instance<R: Read>(mut r: R) -> Result<InstanceFile> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_instance(&bytes)
}

pub fn parse_instance(bytes: &[u8]) -> Result<InstanceFile> {
    let mut cur = Cursor { bytes, pos: 0 };
    if &cur.take::<5>("magic")? != MAGIC {
        return Err(Error::Format("not an SNNS1 file (bad magic)".into()));
    }
    let d = cur.u32("d")?;
    let n = cur.u32("n")?;
    let k = cur.u32("k")?;
    let epsilon = cur.f64("epsilon")?;
    let nn = cur.u32("nn_index")?;
    if d == 0 || n == 0 {
        return Err(Error::Format(format!("empty shape d={d} n={n}")));
    }
    if nn == 0 || nn > n {
        return Err(Error::Format(format!("nn_index {nn} outside 1..={n}")));
    }
    let b = cur.matrix(d, n + 1, "B")?;
    let latent = LatentInstance::new(b, k, epsilon, nn - 1).map_err(|e| Error::Format(e.to_string()))?;
    if cur.remaining() == 0 {
        return Ok(InstanceFile { latent, noisy: None });
    }
    let sigma = cur.f64("sigma")?;
    let seed = u64::from_le_bytes(cur.take::<8>("seed")?);
    let a = cur.matrix(d, n + 1, "A")?;
    if cur.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes after noisy section", cur.remaining())));
    }
    let noisy = NoisyInstance::new(a, sigma, seed).map_err(|e| Error::Format(e.to_string()))?;
    Ok(InstanceFile {
        latent,
        noisy: Some(noisy),
    })
}

pub fn save(path: impl AsRef<Path>, latent: &LatentInstance, noisy: Option<&NoisyInstance>) -> Result<()> {
    let path = path.as_ref();
    write_instance(BufWriter::new(File::create(path).map_err(Error::io_at(path))?), latent, noisy)
}

pub fn load(path: impl AsRef<Path>) -> Result<InstanceFile> {
    let path = path.as_ref();
    read_instance(BufReader::new(File::open(path).map_err(Error::io_at(path))?))
}
