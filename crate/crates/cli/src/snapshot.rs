//! Model snapshot file.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes  "DROCCMLP"
//! version  u32      1
//! act      u8       0 = relu, 1 = tanh
//! norm     u8       1 if standardization stats follow
//! n_dims   u32
//! dims     n_dims x u32
//! [mean    d x f64, std d x f64]        when norm = 1
//! per layer: weights (out x in, row-major) f64, then bias f64
//! ```

use std::io::Write;
use std::path::Path;

use drocc_core::data::NormStats;
use drocc_core::nd::{Activation, Dense, MlpModel, Tensor2};

use crate::error::{CliError, CliResult};

const MAGIC: &[u8; 8] = b"DROCCMLP";
const VERSION: u32 = 1;

/// A trained scorer plus the input transform it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub model: MlpModel,
    pub norm: Option<NormStats>,
}

impl Snapshot {
    /// Logits for raw (untransformed) rows.
    pub fn score(&self, raw: &Tensor2) -> CliResult<Vec<f64>> {
        match &self.norm {
            None => Ok(self.model.forward(raw)?),
            Some(stats) => {
                let mut x = raw.clone();
                for r in 0..x.rows() {
                    stats.apply_row(x.row_mut(r));
                }
                Ok(self.model.forward(&x)?)
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match self.model.activation() {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        });
        out.push(self.norm.is_some() as u8);
        let dims = self.model.dims();
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let put = |out: &mut Vec<u8>, vs: &[f64]| {
            for v in vs {
                out.extend_from_slice(&v.to_le_bytes());
            }
        };
        if let Some(n) = &self.norm {
            put(&mut out, &n.mean);
            put(&mut out, &n.std);
        }
        for layer in self.model.layers() {
            put(&mut out, layer.weights.as_slice());
            put(&mut out, &layer.bias);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> CliResult<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(CliError::Snapshot("not a model snapshot (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CliError::Snapshot(format!("unsupported snapshot version {version}")));
        }
        let activation = match r.take(1)?[0] {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            other => return Err(CliError::Snapshot(format!("unknown activation tag {other}"))),
        };
        let has_norm = r.take(1)?[0] == 1;
        let n_dims = r.u32()? as usize;
        if !(2..=64).contains(&n_dims) {
            return Err(CliError::Snapshot(format!("implausible layer count {n_dims}")));
        }
        let dims = (0..n_dims).map(|_| r.u32().map(|d| d as usize)).collect::<CliResult<Vec<_>>>()?;
        let norm = if has_norm {
            Some(NormStats {
                mean: r.f64s(dims[0])?,
                std: r.f64s(dims[0])?,
            })
        } else {
            None
        };
        let mut layers = Vec::with_capacity(n_dims - 1);
        for w in dims.windows(2) {
            let weights = Tensor2::from_vec(w[1], w[0], r.f64s(w[0] * w[1])?)?;
            let bias = r.f64s(w[1])?;
            layers.push(Dense { weights, bias });
        }
        if r.pos != bytes.len() {
            return Err(CliError::Snapshot(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            model: MlpModel::from_layers(activation, layers)?,
            norm,
        })
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(CliError::Snapshot("truncated file".into())),
        }
    }

    fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> CliResult<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| CliError::Snapshot("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Write-then-rename so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
