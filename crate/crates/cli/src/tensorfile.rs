//! `.ssin` tensor container.
//!
//! Layout, little-endian:
//!
//! ```text
//! "SSIN" | u32 version | u32 count
//! per entry: u16 name_len | name (UTF-8) | u8 ndim | u32 dims[ndim] | u8 complex | f64 payload
//! ```
//!
//! Complex payloads hold the real plane followed by the imaginary plane.

use std::io::{self, Read, Write};
use std::path::Path;

use ssisar_core::{ComplexTensor, Tensor};

use crate::error::CliError;

const MAGIC: &[u8; 4] = b"SSIN";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Entry {
    Real(Tensor<f64>),
    Complex(ComplexTensor<f64>),
}

impl Entry {
    pub fn shape(&self) -> &[usize] {
        match self {
            Entry::Real(t) => t.shape(),
            Entry::Complex(c) => c.shape(),
        }
    }
}

/// Ordered named entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorFile {
    pub entries: Vec<(String, Entry)>,
}

impl TensorFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_real(&mut self, name: impl Into<String>, t: Tensor<f64>) {
        self.entries.push((name.into(), Entry::Real(t)));
    }

    pub fn push_complex(&mut self, name: impl Into<String>, t: ComplexTensor<f64>) {
        self.entries.push((name.into(), Entry::Complex(t)));
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    pub fn real(&self, name: &str) -> Result<&Tensor<f64>, CliError> {
        match self.get(name) {
            Some(Entry::Real(t)) => Ok(t),
            Some(Entry::Complex(_)) => Err(CliError::Format(format!("entry `{name}` is complex, expected real"))),
            None => Err(CliError::Format(format!("missing entry `{name}`"))),
        }
    }

    pub fn complex(&self, name: &str) -> Result<&ComplexTensor<f64>, CliError> {
        match self.get(name) {
            Some(Entry::Complex(t)) => Ok(t),
            Some(Entry::Real(_)) => Err(CliError::Format(format!("entry `{name}` is real, expected complex"))),
            None => Err(CliError::Format(format!("missing entry `{name}`"))),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, e) in &self.entries {
            let bytes = name.as_bytes();
            let len = u16::try_from(bytes.len())
                .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "entry name too long"))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(bytes)?;
            let shape = e.shape();
            w.write_all(&[shape.len() as u8])?;
            for &d in shape {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            let planes: Vec<&[f64]> = match e {
                Entry::Real(t) => {
                    w.write_all(&[0])?;
                    vec![t.data()]
                }
                Entry::Complex(c) => {
                    w.write_all(&[1])?;
                    vec![c.re.data(), c.im.data()]
                }
            };
            for plane in planes {
                for v in plane {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self, CliError> {
        Self::read_from(&mut bytes)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, CliError> {
        let bad = |m: &str| CliError::Format(format!("tensor file: {m}"));
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let count = read_u32(r)?;
        let mut entries = Vec::with_capacity(count.min(1024) as usize);
        for _ in 0..count {
            let mut len = [0u8; 2];
            read_exact(r, &mut len)?;
            let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
            read_exact(r, &mut name)?;
            let name = String::from_utf8(name).map_err(|_| bad("entry name is not UTF-8"))?;
            let mut b = [0u8; 1];
            read_exact(r, &mut b)?;
            let shape = (0..b[0]).map(|_| read_u32(r).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            read_exact(r, &mut b)?;
            let n: usize = shape.iter().product();
            let entry = match b[0] {
                0 => Entry::Real(read_tensor(r, &shape, n)?),
                1 => {
                    let re = read_tensor(r, &shape, n)?;
                    let im = read_tensor(r, &shape, n)?;
                    Entry::Complex(ComplexTensor::new(re, im).map_err(|e| bad(&e.to_string()))?)
                }
                f => return Err(bad(&format!("bad complex flag {f} for `{name}`"))),
            };
            entries.push((name, entry));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(CliError::Io)? != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            CliError::Format(m) => CliError::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<(), CliError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => CliError::Format("tensor file: truncated".into()),
        _ => CliError::Io(e),
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32, CliError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_tensor(r: &mut impl Read, shape: &[usize], n: usize) -> Result<Tensor<f64>, CliError> {
    let mut data = Vec::with_capacity(n.min(1 << 24));
    let mut b = [0u8; 8];
    for _ in 0..n {
        read_exact(r, &mut b)?;
        data.push(f64::from_le_bytes(b));
    }
    Tensor::new(shape.to_vec(), data).map_err(|e| CliError::Format(e.to_string()))
}
