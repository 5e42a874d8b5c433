//! Patch file format, all integers little-endian:
//!
//! ```text
//! "SPCN" | version u32 | height u32 | width u32 | channels u32 | count u32 | labels_present u8
//! count × ( [label u8 if labels_present] | H·W·C × f32 pixels )
//! ```
//!
//! Pixels are stored as `f32`. Values that are exactly representable in `f32`
//! (all generator output is) survive a round trip bit for bit.

use std::fs;
use std::path::Path;

use super::{LabeledPatch, Origin, UnlabeledPatch, UnlabeledPool};
use crate::error::{Error, Result};
use crate::network::PATCH_SIZE;
use crate::numerics::Tensor;
use crate::NUM_CLASSES;

pub const MAGIC: &[u8; 4] = b"SPCN";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 25;

/// Raw contents of a patch file.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFile {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub labels: Option<Vec<u8>>,
    /// One `C·H·W` pixel buffer per record.
    pub pixels: Vec<Vec<f32>>,
}

impl PatchFile {
    fn record_len(&self) -> usize {
        self.height * self.width * self.channels
    }
}

pub fn save_patches(path: &Path, file: &PatchFile) -> Result<()> {
    let rec = file.record_len();
    if let Some(labels) = &file.labels {
        if labels.len() != file.pixels.len() {
            return Err(Error::Data("label count differs from record count".into()));
        }
    }
    if let Some(bad) = file.pixels.iter().position(|p| p.len() != rec) {
        return Err(Error::Data(format!("record {bad} has wrong pixel count")));
    }
    let to_u32 = |v: usize| -> Result<u32> {
        u32::try_from(v).map_err(|_| Error::Data(format!("{v} does not fit the u32 header field")))
    };
    let label_bytes = usize::from(file.labels.is_some());
    let mut buf = Vec::with_capacity(HEADER_LEN + file.pixels.len() * (label_bytes + 4 * rec));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for v in [file.height, file.width, file.channels, file.pixels.len()] {
        buf.extend_from_slice(&to_u32(v)?.to_le_bytes());
    }
    buf.push(u8::from(file.labels.is_some()));
    for (i, px) in file.pixels.iter().enumerate() {
        if let Some(labels) = &file.labels {
            buf.push(labels[i]);
        }
        for v in px {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.pos as u64,
                format!(
                    "truncated file: need {n} bytes for {what}, {} left",
                    self.bytes.len() - self.pos
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
}

pub fn load_patches(path: &Path) -> Result<PatchFile> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<PatchFile> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic, not a patch file"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let height = r.u32("height")? as usize;
    let width = r.u32("width")? as usize;
    let channels = r.u32("channels")? as usize;
    let count = r.u32("count")? as usize;
    let flag_at = r.pos as u64;
    let labels_present = match r.u8("labels flag")? {
        0 => false,
        1 => true,
        other => {
            return Err(Error::format(
                flag_at,
                format!("labels flag must be 0 or 1, got {other}"),
            ))
        }
    };
    if height == 0 || width == 0 || channels == 0 {
        return Err(Error::format(8, "zero patch dimension"));
    }
    let rec = height * width * channels;
    let record_bytes = rec * 4 + usize::from(labels_present);
    let payload = bytes.len() - HEADER_LEN;
    if payload != count * record_bytes {
        let offset = (HEADER_LEN + (payload / record_bytes) * record_bytes) as u64;
        return Err(Error::format(
            offset,
            format!(
                "header declares {count} records ({} bytes) but payload has {payload} bytes",
                count * record_bytes
            ),
        ));
    }
    let mut labels = labels_present.then(|| Vec::with_capacity(count));
    let mut pixels = Vec::with_capacity(count);
    for i in 0..count {
        if let Some(labels) = labels.as_mut() {
            let at = r.pos as u64;
            let l = r.u8("label")?;
            if usize::from(l) >= NUM_CLASSES {
                return Err(Error::format(at, format!("record {i} has label {l}")));
            }
            labels.push(l);
        }
        let raw = r.take(rec * 4, "pixels")?;
        pixels.push(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    Ok(PatchFile {
        height,
        width,
        channels,
        labels,
        pixels,
    })
}

fn pixels_to_f32(t: &Tensor) -> Vec<f32> {
    t.data().iter().map(|&v| v as f32).collect()
}

fn pixels_to_tensor(file: &PatchFile, i: usize) -> Result<Tensor> {
    let data = file.pixels[i].iter().map(|&v| f64::from(v)).collect();
    Tensor::new(vec![file.channels, file.height, file.width], data)
}

fn check_geometry(file: &PatchFile) -> Result<()> {
    if (file.channels, file.height, file.width) != (1, PATCH_SIZE, PATCH_SIZE) {
        return Err(Error::format(
            8,
            format!(
                "expected 1x{PATCH_SIZE}x{PATCH_SIZE} patches, file has {}x{}x{}",
                file.channels, file.height, file.width
            ),
        ));
    }
    Ok(())
}

pub fn save_labeled(path: &Path, patches: &[LabeledPatch]) -> Result<()> {
    save_patches(
        path,
        &PatchFile {
            height: PATCH_SIZE,
            width: PATCH_SIZE,
            channels: 1,
            labels: Some(patches.iter().map(|p| p.label as u8).collect()),
            pixels: patches.iter().map(|p| pixels_to_f32(&p.pixels)).collect(),
        },
    )
}

/// Loads labeled patches; every record is marked [`Origin::Manual`].
pub fn load_labeled(path: &Path) -> Result<Vec<LabeledPatch>> {
    let file = load_patches(path)?;
    check_geometry(&file)?;
    let labels = file
        .labels
        .as_ref()
        .ok_or_else(|| Error::format(24, "file has no labels"))?;
    (0..file.pixels.len())
        .map(|i| {
            LabeledPatch::new(
                pixels_to_tensor(&file, i)?,
                usize::from(labels[i]),
                Origin::Manual,
            )
        })
        .collect()
}

/// Writes the pool without ids; [`load_unlabeled`] assigns ids by position.
pub fn save_unlabeled(path: &Path, pool: &UnlabeledPool) -> Result<()> {
    save_patches(
        path,
        &PatchFile {
            height: PATCH_SIZE,
            width: PATCH_SIZE,
            channels: 1,
            labels: None,
            pixels: pool
                .patches()
                .iter()
                .map(|p| pixels_to_f32(&p.pixels))
                .collect(),
        },
    )
}

pub fn load_unlabeled(path: &Path) -> Result<UnlabeledPool> {
    let file = load_patches(path)?;
    check_geometry(&file)?;
    let patches = (0..file.pixels.len())
        .map(|i| UnlabeledPatch::new(pixels_to_tensor(&file, i)?, i as u64))
        .collect::<Result<Vec<_>>>()?;
    UnlabeledPool::new(patches)
}
