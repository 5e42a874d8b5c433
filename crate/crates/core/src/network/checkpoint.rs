//! Checkpoint layout, little-endian throughout:
//!
//! ```text
//! "SPCK" | version u32 | variant_tag u8
//! n_conv u32 | conv counts u32… | n_fc u32 | fc sizes u32… | channels u32 | height u32 | width u32
//! dropout_rate f64 | leaky_slope f64 | rng_seed u64 | trained_iterations u64
//! n_tensors u32 | n_tensors × (len u32 | len × f64)
//! ```

use std::fs;
use std::path::Path;

use super::arch::{Architecture, Variant};
use super::model::CnnModel;
use crate::error::{Error, Result};
use crate::numerics::{GradPair, Tensor};

pub const MAGIC: &[u8; 4] = b"SPCK";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(model: &CnnModel) -> Vec<u8> {
    let arch = &model.arch;
    let mut buf = Vec::with_capacity(64 + 8 * arch.param_count() + 4 * model.params.len());
    let u32le = |buf: &mut Vec<u8>, v: usize| buf.extend_from_slice(&(v as u32).to_le_bytes());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(arch.variant.tag());
    u32le(&mut buf, arch.conv_kernel_counts.len());
    arch.conv_kernel_counts
        .iter()
        .for_each(|&c| u32le(&mut buf, c));
    u32le(&mut buf, arch.fc_sizes.len());
    arch.fc_sizes.iter().for_each(|&c| u32le(&mut buf, c));
    let (c, h, w) = arch.input_shape;
    [c, h, w].into_iter().for_each(|v| u32le(&mut buf, v));
    buf.extend_from_slice(&arch.dropout_rate.to_le_bytes());
    buf.extend_from_slice(&arch.leaky_slope.to_le_bytes());
    buf.extend_from_slice(&model.rng_seed.to_le_bytes());
    buf.extend_from_slice(&model.trained_iterations.to_le_bytes());
    u32le(&mut buf, model.params.len());
    for p in &model.params {
        u32le(&mut buf, p.value.len());
        for v in p.value.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn save_checkpoint(model: &CnnModel, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let left = self.bytes.len() - self.pos;
        if left < n {
            return Err(Error::format(
                self.pos as u64,
                format!("truncated checkpoint reading {what}: need {n} bytes, {left} left"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    /// Reads a u32 list length, refusing counts that could not fit in the
    /// remaining bytes.
    fn count(&mut self, what: &str, elem_bytes: usize) -> Result<usize> {
        let at = self.pos as u64;
        let n = self.u32(what)?;
        if n.saturating_mul(elem_bytes) > self.bytes.len() - self.pos {
            return Err(Error::format(
                at,
                format!("{what} {n} exceeds remaining file size"),
            ));
        }
        Ok(n)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<CnnModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic, not a checkpoint"));
    }
    let version = r.u32("version")?;
    if version as u32 != VERSION {
        return Err(Error::format(
            4,
            format!("unsupported checkpoint version {version}"),
        ));
    }
    let tag = r.take(1, "variant tag")?[0];
    let variant = Variant::from_tag(tag)
        .ok_or_else(|| Error::format(8, format!("unknown variant tag {tag}")))?;
    let n_conv = r.count("conv layer count", 4)?;
    let conv = (0..n_conv)
        .map(|_| r.u32("conv kernel count"))
        .collect::<Result<Vec<_>>>()?;
    let n_fc = r.count("fc layer count", 4)?;
    let fc = (0..n_fc)
        .map(|_| r.u32("fc size"))
        .collect::<Result<Vec<_>>>()?;
    let input_shape = (r.u32("channels")?, r.u32("height")?, r.u32("width")?);
    let arch_end = r.pos as u64;
    let arch = Architecture {
        conv_kernel_counts: conv,
        fc_sizes: fc,
        dropout_rate: r.f64("dropout rate")?,
        leaky_slope: r.f64("leaky slope")?,
        input_shape,
        variant,
    };
    arch.validate()
        .map_err(|e| Error::format(arch_end, format!("architecture rejected: {e}")))?;
    let rng_seed = r.u64("rng seed")?;
    let trained_iterations = r.u64("iteration count")?;

    let shapes = arch.param_shapes();
    let at = r.pos as u64;
    let n_tensors = r.u32("tensor count")?;
    if n_tensors != shapes.len() {
        return Err(Error::format(
            at,
            format!(
                "architecture needs {} tensors, file has {n_tensors}",
                shapes.len()
            ),
        ));
    }
    let mut params = Vec::with_capacity(n_tensors);
    for (i, shape) in shapes.into_iter().enumerate() {
        let at = r.pos as u64;
        let len = r.u32("tensor length")?;
        let expected: usize = shape.iter().product();
        if len != expected {
            return Err(Error::format(
                at,
                format!("tensor {i} has {len} values, shape {shape:?} needs {expected}"),
            ));
        }
        let raw = r.take(8 * len, "tensor data")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.push(GradPair::new(Tensor::new(shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::format(
            r.pos as u64,
            "trailing bytes after last tensor",
        ));
    }
    Ok(CnnModel {
        arch,
        params,
        rng_seed,
        trained_iterations,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<CnnModel> {
    decode_checkpoint(&fs::read(path)?)
}
