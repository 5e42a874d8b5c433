//! Patch containers, deterministic splits, the on-disk patch format and the
//! synthetic three-class texture generator.

mod io;
mod synthetic;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use io::{
    load_labeled, load_patches, load_unlabeled, save_labeled, save_patches, save_unlabeled,
    PatchFile,
};
pub use synthetic::{generate_synthetic, ClassTexture, SyntheticData, SyntheticSpec};

use crate::error::{Error, Result};
use crate::network::PATCH_SIZE;
use crate::numerics::Tensor;
use crate::NUM_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Manual,
    /// Promoted from the unlabeled pool by the selection procedure.
    Virtual {
        patch_id: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPatch {
    pub pixels: Tensor,
    pub label: usize,
    pub origin: Origin,
}

impl LabeledPatch {
    pub fn new(pixels: Tensor, label: usize, origin: Origin) -> Result<Self> {
        check_pixels(&pixels)?;
        if label >= NUM_CLASSES {
            return Err(Error::Data(format!("label {label} out of range")));
        }
        Ok(LabeledPatch {
            pixels,
            label,
            origin,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledPatch {
    pub pixels: Tensor,
    pub patch_id: u64,
}

impl UnlabeledPatch {
    pub fn new(pixels: Tensor, patch_id: u64) -> Result<Self> {
        check_pixels(&pixels)?;
        Ok(UnlabeledPatch { pixels, patch_id })
    }
}

fn check_pixels(pixels: &Tensor) -> Result<()> {
    if pixels.shape() != [1, PATCH_SIZE, PATCH_SIZE] {
        return Err(Error::Data(format!(
            "patch must be [1, {PATCH_SIZE}, {PATCH_SIZE}], got {:?}",
            pixels.shape()
        )));
    }
    if let Some(v) = pixels.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Data(format!("pixel value {v} outside [0,1]")));
    }
    Ok(())
}

/// Unlabeled patches with unique ids. The pool never carries true labels;
/// those live in a separate [`HiddenLabels`] value held by the evaluator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnlabeledPool {
    patches: Vec<UnlabeledPatch>,
}

impl UnlabeledPool {
    pub fn new(patches: Vec<UnlabeledPatch>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(patches.len());
        for p in &patches {
            if !seen.insert(p.patch_id) {
                return Err(Error::Data(format!("duplicate patch id {}", p.patch_id)));
            }
        }
        Ok(UnlabeledPool { patches })
    }

    pub fn patches(&self) -> &[UnlabeledPatch] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn get(&self, patch_id: u64) -> Option<&UnlabeledPatch> {
        self.patches.iter().find(|p| p.patch_id == patch_id)
    }

    /// Removes the given ids, keeping the remaining patches in order.
    pub fn without(&self, ids: &std::collections::HashSet<u64>) -> UnlabeledPool {
        UnlabeledPool {
            patches: self
                .patches
                .iter()
                .filter(|p| !ids.contains(&p.patch_id))
                .cloned()
                .collect(),
        }
    }
}

/// True labels of an unlabeled pool, for evaluation only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HiddenLabels {
    by_id: HashMap<u64, usize>,
}

impl HiddenLabels {
    pub fn new(by_id: HashMap<u64, usize>) -> Self {
        HiddenLabels { by_id }
    }

    pub fn label(&self, patch_id: u64) -> Option<usize> {
        self.by_id.get(&patch_id).copied()
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, usize)> + '_ {
        self.by_id.iter().map(|(&k, &v)| (k, v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_per_class: usize,
    pub verify_per_class: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_per_class: 400,
            verify_per_class: 200,
            seed: 0,
        }
    }
}

/// Indices of `patches` grouped by label.
pub fn indices_by_class(patches: &[LabeledPatch]) -> [Vec<usize>; NUM_CLASSES] {
    let mut groups: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, p) in patches.iter().enumerate() {
        groups[p.label].push(i);
    }
    groups
}

pub fn class_counts(patches: &[LabeledPatch]) -> [usize; NUM_CLASSES] {
    let mut counts = [0; NUM_CLASSES];
    patches.iter().for_each(|p| counts[p.label] += 1);
    counts
}

/// Per-class random split into disjoint train and verify sets. Surplus
/// patches are left out of both.
pub fn split(
    patches: &[LabeledPatch],
    spec: &SplitSpec,
) -> Result<(Vec<LabeledPatch>, Vec<LabeledPatch>)> {
    if spec.train_per_class == 0 || spec.verify_per_class == 0 {
        return Err(Error::Config("split counts must be >= 1".into()));
    }
    let need = spec.train_per_class + spec.verify_per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(spec.train_per_class * NUM_CLASSES);
    let mut verify = Vec::with_capacity(spec.verify_per_class * NUM_CLASSES);
    for (class, mut idx) in indices_by_class(patches).into_iter().enumerate() {
        if idx.len() < need {
            return Err(Error::Data(format!(
                "class {class} has {} patches, split needs {need}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        train.extend(
            idx[..spec.train_per_class]
                .iter()
                .map(|&i| patches[i].clone()),
        );
        verify.extend(
            idx[spec.train_per_class..need]
                .iter()
                .map(|&i| patches[i].clone()),
        );
    }
    Ok((train, verify))
}
