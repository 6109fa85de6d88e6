//! Binary model files.
//!
//! Layout, all integers and floats little-endian:
//! magic `TNKF`, `u32` version, kernel, `γ`, `σ_r²`, task, confidence flag,
//! test-row policy, centering record, dims, the cores of `m` and `P`, the
//! training inputs (inline or a path plus SHA-256 of that file) and finally
//! a SHA-256 of everything before it.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::data::{fmt_f64, Centering, Inputs, Task};
use crate::kernels::KernelSpec;
use crate::predict::TrainedModel;
use crate::tt::{Core, TruncationPolicy, TtMatrix, TtVector};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TNKF";
pub const FORMAT_VERSION: u32 = 1;

/// Where the training inputs live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputStorage {
    Inline,
    /// A separate CSV file, checked by hash on load. Relative paths are
    /// resolved against the model file's directory.
    Reference(PathBuf),
}

pub fn save_model(model: &TrainedModel, path: &Path, storage: &InputStorage) -> Result<()> {
    let bytes = match storage {
        InputStorage::Inline => encode(model, None)?,
        InputStorage::Reference(rel) => {
            let csv = inputs_csv(&model.x_train);
            fs::write(resolve(path, rel), &csv)?;
            encode(model, Some((rel, Sha256::digest(&csv).into())))?
        }
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = fs::read(path)?;
    decode(&bytes, |rel, hash, n, f| {
        let full = resolve(path, rel);
        let csv = fs::read(&full)?;
        let digest: [u8; 32] = Sha256::digest(&csv).into();
        if digest != hash {
            return Err(Error::StaleInputs { path: full });
        }
        parse_inputs_csv(&csv, n, f)
    })
}

/// Encodes a model with inline training inputs.
pub fn to_bytes(model: &TrainedModel) -> Result<Vec<u8>> {
    encode(model, None)
}

/// Decodes a model with inline training inputs.
pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    decode(bytes, |_, _, _, _| {
        Err(Error::Corrupt("model references external inputs; load it from a file".into()))
    })
}

fn resolve(model_path: &Path, rel: &Path) -> PathBuf {
    match model_path.parent() {
        Some(dir) if rel.is_relative() => dir.join(rel),
        _ => rel.to_path_buf(),
    }
}

fn inputs_csv(x: &Inputs) -> Vec<u8> {
    let mut out = String::new();
    for row in x.rows() {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn parse_inputs_csv(bytes: &[u8], n: usize, f: usize) -> Result<Inputs> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Corrupt("inputs file is not UTF-8".into()))?;
    let mut data = Vec::with_capacity(n * f);
    for (i, line) in text.lines().enumerate() {
        for field in line.split(',') {
            data.push(field.trim().parse::<f64>().map_err(|e| Error::Data {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
    }
    if data.len() != n * f {
        return Err(Error::Corrupt(format!("inputs file holds {} values, expected {}", data.len(), n * f)));
    }
    Inputs::new(n, f, data)
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len());
        v.iter().for_each(|x| self.f64(*x));
    }
    fn usizes(&mut self, v: &[usize]) {
        self.u64(v.len());
        v.iter().for_each(|x| self.u64(*x));
    }
    fn cores(&mut self, cores: &[Core]) {
        self.u64(cores.len());
        for c in cores {
            self.u64(c.left());
            self.u64(c.mode());
            self.u64(c.right());
            c.data().iter().for_each(|x| self.f64(*x));
        }
    }
}

fn encode(model: &TrainedModel, reference: Option<(&PathBuf, [u8; 32])>) -> Result<Vec<u8>> {
    model.validate()?;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    match model.kernel {
        KernelSpec::Rbf { sigma2 } => {
            w.u8(0);
            w.f64(sigma2);
        }
        KernelSpec::Linear => w.u8(1),
        KernelSpec::Polynomial { degree, offset } => {
            w.u8(2);
            w.u32(degree);
            w.f64(offset);
        }
    }
    w.f64(model.gamma);
    w.f64(model.sigma_r2);
    w.u8(match model.task {
        Task::Regression => 0,
        Task::Classification => 1,
    });
    w.u8(model.has_confidence as u8);
    match model.policy_yt {
        TruncationPolicy::Exact => w.u8(0),
        TruncationPolicy::RelativeError(e) => {
            w.u8(1);
            w.f64(e);
        }
        TruncationPolicy::MaxRank(r) => {
            w.u8(2);
            w.u64(r);
        }
    }
    w.f64(model.centering.y_mean);
    w.f64s(&model.centering.x_means);
    w.usizes(&model.dims);
    w.cores(model.m.cores());
    w.cores(model.p.cores());
    let x = &model.x_train;
    match reference {
        None => {
            w.u8(0);
            w.u64(x.len());
            w.u64(x.features());
            x.as_slice().iter().for_each(|v| w.f64(*v));
        }
        Some((path, hash)) => {
            w.u8(1);
            w.u64(x.len());
            w.u64(x.features());
            let s = path.to_str().ok_or_else(|| Error::invalid("inputs path is not valid UTF-8"))?;
            w.u64(s.len());
            w.0.extend_from_slice(s.as_bytes());
            w.0.extend_from_slice(&hash);
        }
    }
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    Ok(w.0)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Corrupt(format!("length {v} overflows")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    /// A count of items each at least `unit` bytes, checked against what is left.
    fn count(&mut self, unit: usize) -> Result<usize> {
        let n = self.u64()?;
        if n.saturating_mul(unit) > self.buf.len() - self.pos {
            return Err(Error::Corrupt(format!("count {n} exceeds the remaining data")));
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.u64()).collect()
    }
    fn cores(&mut self) -> Result<Vec<Core>> {
        let n = self.count(24)?;
        let mut cores = Vec::with_capacity(n);
        for _ in 0..n {
            let (l, m, r) = (self.u64()?, self.u64()?, self.u64()?);
            let len = l
                .checked_mul(m)
                .and_then(|v| v.checked_mul(r))
                .filter(|&v| v.saturating_mul(8) <= self.buf.len() - self.pos)
                .ok_or_else(|| Error::Corrupt("core size exceeds the remaining data".into()))?;
            let data = (0..len).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
            cores.push(Core::new(l, m, r, data).map_err(|e| Error::Corrupt(e.to_string()))?);
        }
        Ok(cores)
    }
}

fn decode(
    bytes: &[u8],
    load_ref: impl FnOnce(&Path, [u8; 32], usize, usize) -> Result<Inputs>,
) -> Result<TrainedModel> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Corrupt("not a model file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion { found: version, expected: FORMAT_VERSION });
    }
    if bytes.len() < 8 + 32 {
        return Err(Error::Corrupt("truncated model file".into()));
    }
    let (body, check) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != check {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let kernel = match r.u8()? {
        0 => KernelSpec::Rbf { sigma2: r.f64()? },
        1 => KernelSpec::Linear,
        2 => KernelSpec::Polynomial { degree: r.u32()?, offset: r.f64()? },
        t => return Err(Error::Corrupt(format!("unknown kernel tag {t}"))),
    };
    let gamma = r.f64()?;
    let sigma_r2 = r.f64()?;
    let task = match r.u8()? {
        0 => Task::Regression,
        1 => Task::Classification,
        t => return Err(Error::Corrupt(format!("unknown task tag {t}"))),
    };
    let has_confidence = r.u8()? != 0;
    let policy_yt = match r.u8()? {
        0 => TruncationPolicy::Exact,
        1 => TruncationPolicy::RelativeError(r.f64()?),
        2 => TruncationPolicy::MaxRank(r.u64()?),
        t => return Err(Error::Corrupt(format!("unknown policy tag {t}"))),
    };
    let y_mean = r.f64()?;
    let x_means = r.f64s()?;
    let dims = r.usizes()?;
    let corrupt = |e: Error| Error::Corrupt(e.to_string());
    let m = TtVector::from_cores(r.cores()?).map_err(corrupt)?;
    let p = TtMatrix::from_cores(dims.clone(), dims.clone(), r.cores()?).map_err(corrupt)?;
    let tag = r.u8()?;
    let (n, f) = (r.u64()?, r.u64()?);
    let x_train = match tag {
        0 => {
            let len = n
                .checked_mul(f)
                .filter(|&v| v.saturating_mul(8) <= r.buf.len() - r.pos)
                .ok_or_else(|| Error::Corrupt("inputs exceed the remaining data".into()))?;
            let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            Inputs::new(n, f, data).map_err(corrupt)?
        }
        1 => {
            let len = r.count(1)?;
            let path = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Corrupt("inputs path is not UTF-8".into()))?
                .to_owned();
            let hash: [u8; 32] = r.take(32)?.try_into().unwrap();
            load_ref(Path::new(&path), hash, n, f)?
        }
        t => return Err(Error::Corrupt(format!("unknown input storage tag {t}"))),
    };
    if r.pos != body.len() {
        return Err(Error::Corrupt("trailing bytes after model".into()));
    }
    let model = TrainedModel {
        kernel,
        x_train,
        dims,
        m,
        p,
        sigma_r2,
        gamma,
        centering: Centering { y_mean, x_means },
        policy_yt,
        task,
        has_confidence,
    };
    model.validate().map_err(corrupt)?;
    Ok(model)
}
