use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::DEFAULT_LEAKY_SLOPE;
use crate::NUM_CLASSES;

pub const PATCH_SIZE: usize = 36;

const BASELINE_CONV: [usize; 4] = [45, 80, 125, 180];
const BASELINE_FC: [usize; 3] = [1080, 360, 3];
const EXTRA_FC_NEURONS: usize = 180;

/// Which of the named network layouts an [`Architecture`] was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Baseline,
    /// Conv kernels and hidden fc neurons halved (rounded up).
    Half,
    /// Conv kernels and hidden fc neurons increased by 50% (rounded up).
    Plus50,
    /// Baseline plus a 180-neuron fc layer before the output layer.
    ExtraFc,
    /// Baseline without its first conv layer.
    DropFirstConv,
    /// Arbitrary layer sizes (tests, reduced-scale experiments).
    Custom,
}

impl Variant {
    pub const NAMED: [Variant; 5] = [
        Variant::Baseline,
        Variant::Half,
        Variant::Plus50,
        Variant::ExtraFc,
        Variant::DropFirstConv,
    ];

    pub fn tag(self) -> u8 {
        match self {
            Variant::Baseline => 0,
            Variant::Half => 1,
            Variant::Plus50 => 2,
            Variant::ExtraFc => 3,
            Variant::DropFirstConv => 4,
            Variant::Custom => 255,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Variant> {
        Some(match tag {
            0 => Variant::Baseline,
            1 => Variant::Half,
            2 => Variant::Plus50,
            3 => Variant::ExtraFc,
            4 => Variant::DropFirstConv,
            255 => Variant::Custom,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Half => "half",
            Variant::Plus50 => "plus50",
            Variant::ExtraFc => "extra_fc",
            Variant::DropFirstConv => "drop_first_conv",
            Variant::Custom => "custom",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Variant::Custom]
            .into_iter()
            .chain(Variant::NAMED)
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture variant '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub conv_kernel_counts: Vec<usize>,
    /// Fully-connected layer widths; the last entry is the class count.
    pub fc_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub leaky_slope: f64,
    /// (channels, height, width)
    pub input_shape: (usize, usize, usize),
    pub variant: Variant,
}

fn scale_up(x: usize, num: usize, den: usize) -> usize {
    (x * num).div_ceil(den)
}

impl Architecture {
    pub fn baseline() -> Self {
        Self::variant(Variant::Baseline)
    }

    /// Builds one of the named layouts. `Variant::Custom` yields the baseline
    /// sizes re-tagged as custom.
    pub fn variant(variant: Variant) -> Self {
        let mut conv = BASELINE_CONV.to_vec();
        let mut fc = BASELINE_FC.to_vec();
        let last = fc.len() - 1;
        match variant {
            Variant::Baseline | Variant::Custom => {}
            Variant::Half => {
                conv.iter_mut().for_each(|c| *c = scale_up(*c, 1, 2));
                fc[..last].iter_mut().for_each(|c| *c = scale_up(*c, 1, 2));
            }
            Variant::Plus50 => {
                conv.iter_mut().for_each(|c| *c = scale_up(*c, 3, 2));
                fc[..last].iter_mut().for_each(|c| *c = scale_up(*c, 3, 2));
            }
            Variant::ExtraFc => fc.insert(last, EXTRA_FC_NEURONS),
            Variant::DropFirstConv => {
                conv.remove(0);
            }
        }
        Architecture {
            conv_kernel_counts: conv,
            fc_sizes: fc,
            dropout_rate: 0.5,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            input_shape: (1, PATCH_SIZE, PATCH_SIZE),
            variant,
        }
    }

    pub fn custom(conv_kernel_counts: Vec<usize>, fc_sizes: Vec<usize>) -> Self {
        Architecture {
            conv_kernel_counts,
            fc_sizes,
            variant: Variant::Custom,
            ..Self::baseline()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("invalid architecture: {m}")));
        if self.conv_kernel_counts.is_empty() || self.conv_kernel_counts.contains(&0) {
            return bad("conv layers must be non-empty with positive kernel counts".into());
        }
        if self.fc_sizes.is_empty() || self.fc_sizes.contains(&0) {
            return bad("fc layers must be non-empty with positive widths".into());
        }
        if *self.fc_sizes.last().unwrap() != NUM_CLASSES {
            return bad(format!("last fc layer must have {NUM_CLASSES} outputs"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} not in [0,1)", self.dropout_rate));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky slope {} not in (0,1)", self.leaky_slope));
        }
        let (c, h, w) = self.input_shape;
        if c == 0 || h == 0 || w == 0 {
            return bad("input shape must be positive".into());
        }
        let (mut h, mut w) = (h, w);
        for _ in 1..self.conv_kernel_counts.len() {
            if h < 2 || w < 2 {
                return bad("too many pooling stages for the input size".into());
            }
            h /= 2;
            w /= 2;
        }
        if self.variant != Variant::Custom {
            let reference = Self::variant(self.variant);
            if reference.conv_kernel_counts != self.conv_kernel_counts
                || reference.fc_sizes != self.fc_sizes
            {
                return bad(format!(
                    "layer sizes do not match the '{}' variant",
                    self.variant
                ));
            }
        }
        Ok(())
    }

    /// Spatial size `(h, w)` entering each conv layer.
    pub fn conv_input_sizes(&self) -> Vec<(usize, usize)> {
        let (_, mut h, mut w) = self.input_shape;
        let mut sizes = Vec::with_capacity(self.conv_kernel_counts.len());
        for i in 0..self.conv_kernel_counts.len() {
            sizes.push((h, w));
            if i + 1 < self.conv_kernel_counts.len() {
                h /= 2;
                w /= 2;
            }
        }
        sizes
    }

    /// Length of the feature vector after the global max pool.
    pub fn feature_len(&self) -> usize {
        *self.conv_kernel_counts.last().unwrap()
    }

    /// Shapes of every parameter tensor in declaration order: per conv layer
    /// `[Cout,Cin,3,3]` then `[Cout]`, per fc layer `[out,in]` then `[out]`.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        let mut cin = self.input_shape.0;
        for &cout in &self.conv_kernel_counts {
            shapes.push(vec![cout, cin, 3, 3]);
            shapes.push(vec![cout]);
            cin = cout;
        }
        let mut n_in = self.feature_len();
        for &n_out in &self.fc_sizes {
            shapes.push(vec![n_out, n_in]);
            shapes.push(vec![n_out]);
            n_in = n_out;
        }
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_layout() {
        let a = Architecture::baseline();
        assert_eq!(a.conv_kernel_counts, vec![45, 80, 125, 180]);
        assert_eq!(a.fc_sizes, vec![1080, 360, 3]);
        assert_eq!(a.feature_len(), 180);
        assert_eq!(
            a.conv_input_sizes(),
            vec![(36, 36), (18, 18), (9, 9), (4, 4)]
        );
        a.validate().unwrap();
    }

    #[test]
    fn variant_layouts() {
        let h = Architecture::variant(Variant::Half);
        assert_eq!(h.conv_kernel_counts, vec![23, 40, 63, 90]);
        assert_eq!(h.fc_sizes, vec![540, 180, 3]);
        let p = Architecture::variant(Variant::Plus50);
        assert_eq!(p.conv_kernel_counts, vec![68, 120, 188, 270]);
        assert_eq!(p.fc_sizes, vec![1620, 540, 3]);
        let e = Architecture::variant(Variant::ExtraFc);
        assert_eq!(e.fc_sizes, vec![1080, 360, 180, 3]);
        let d = Architecture::variant(Variant::DropFirstConv);
        assert_eq!(d.conv_kernel_counts, vec![80, 125, 180]);
        for v in Variant::NAMED {
            Architecture::variant(v).validate().unwrap();
            assert_eq!(Variant::from_tag(v.tag()), Some(v));
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn invalid_architectures_rejected() {
        let mut a = Architecture::baseline();
        a.fc_sizes = vec![1080, 360, 4];
        assert!(a.validate().is_err());
        let a = Architecture::custom(vec![2; 8], vec![3]);
        assert!(a.validate().is_err(), "36 cannot be pooled 7 times");
        let mut a = Architecture::variant(Variant::Half);
        a.conv_kernel_counts[0] = 24;
        assert!(a.validate().is_err());
    }
}
