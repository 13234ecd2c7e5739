use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of classes of the color head.
pub const COLOR_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InceptionVariant {
    /// Plain convolutions with ReLU.
    Original,
    /// Every convolution followed by z-normalization and ELU.
    Modified,
}

/// Branch widths of one inception module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InceptionSpec {
    pub c1: usize,
    pub c3r: usize,
    pub c3: usize,
    pub c5r: usize,
    pub c5: usize,
    pub cp: usize,
    pub variant: InceptionVariant,
}

impl InceptionSpec {
    pub fn new(widths: [usize; 6], variant: InceptionVariant) -> Self {
        let [c1, c3r, c3, c5r, c5, cp] = widths;
        Self {
            c1,
            c3r,
            c3,
            c5r,
            c5,
            cp,
            variant,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.c1 + self.c3 + self.c5 + self.cp
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [self.c1, self.c3r, self.c3, self.c5r, self.c5, self.cp];
        if widths.contains(&0) {
            return Err(Error::Spec(format!("inception widths must be ≥ 1, got {widths:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidualStage {
    pub blocks: usize,
    pub width: usize,
    /// Stride of the first block's first convolution.
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InceptionStage {
    /// 2×2 max pooling with stride 2 before the first block.
    pub downsample: bool,
    pub blocks: Vec<InceptionSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Body {
    ResidualNet { stages: Vec<ResidualStage> },
    InceptionNet { stages: Vec<InceptionStage> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum Head {
    MakeModel { classes: usize },
    Color,
}

impl Head {
    pub fn classes(&self) -> usize {
        match self {
            Head::MakeModel { classes } => *classes,
            Head::Color => COLOR_CLASSES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StemActivation {
    None,
    Relu,
    ZnormElu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stem {
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    /// 2×2 max pooling with stride 2 after the convolution.
    pub pool: bool,
    pub activation: StemActivation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchKind {
    ResidualNet,
    InceptionNet,
}

/// Declarative network description. Its TOML text form is embedded in
/// checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input: InputShape,
    pub znorm_epsilon: f64,
    pub elu_alpha: f64,
    pub stem: Stem,
    pub head: Head,
    pub body: Body,
}

impl ArchSpec {
    /// Stem convolution followed by three stages of two pre-activation
    /// residual blocks, widths 16/32/64, on 64×64 RGB input.
    pub fn residual_default(head: Head) -> Self {
        Self {
            input: InputShape {
                channels: 3,
                height: 64,
                width: 64,
            },
            znorm_epsilon: 1e-5,
            elu_alpha: 1.0,
            stem: Stem {
                width: 16,
                kernel: 3,
                stride: 2,
                pool: true,
                activation: StemActivation::None,
            },
            head,
            body: Body::ResidualNet {
                stages: vec![
                    ResidualStage { blocks: 2, width: 16, stride: 1 },
                    ResidualStage { blocks: 2, width: 32, stride: 2 },
                    ResidualStage { blocks: 2, width: 64, stride: 2 },
                ],
            },
        }
    }

    /// Stem convolution followed by three inception modules with 64 final
    /// channels, on 64×64 RGB input.
    pub fn inception_default(head: Head, variant: InceptionVariant) -> Self {
        let stage = |downsample, widths| InceptionStage {
            downsample,
            blocks: vec![InceptionSpec::new(widths, variant)],
        };
        Self {
            input: InputShape {
                channels: 3,
                height: 64,
                width: 64,
            },
            znorm_epsilon: 1e-5,
            elu_alpha: 1.0,
            stem: Stem {
                width: 16,
                kernel: 3,
                stride: 2,
                pool: true,
                activation: match variant {
                    InceptionVariant::Original => StemActivation::Relu,
                    InceptionVariant::Modified => StemActivation::ZnormElu,
                },
            },
            head,
            body: Body::InceptionNet {
                stages: vec![
                    stage(false, [8, 8, 16, 4, 8, 8]),
                    stage(true, [16, 12, 24, 4, 12, 12]),
                    stage(true, [16, 16, 24, 8, 12, 12]),
                ],
            },
        }
    }

    pub fn kind(&self) -> ArchKind {
        match self.body {
            Body::ResidualNet { .. } => ArchKind::ResidualNet,
            Body::InceptionNet { .. } => ArchKind::InceptionNet,
        }
    }

    pub fn classes(&self) -> usize {
        self.head.classes()
    }

    /// Width of the pooled penultimate activation.
    pub fn descriptor_dim(&self) -> usize {
        match &self.body {
            Body::ResidualNet { stages } => stages.last().map_or(self.stem.width, |s| s.width),
            Body::InceptionNet { stages } => stages
                .iter()
                .flat_map(|s| s.blocks.last())
                .last()
                .map_or(self.stem.width, InceptionSpec::out_channels),
        }
    }

    /// Checks widths, class counts and that every layer has a non-empty input.
    pub fn validate(&self) -> Result<()> {
        let spec_err = |m: String| Err(Error::Spec(m));
        if self.input.channels == 0 || self.input.height == 0 || self.input.width == 0 {
            return spec_err(format!("empty input shape {:?}", self.input));
        }
        if let Head::MakeModel { classes } = self.head {
            if classes < 2 {
                return spec_err(format!("make/model head needs ≥ 2 classes, got {classes}"));
            }
        }
        if !(self.znorm_epsilon > 0.0) || !(self.elu_alpha > 0.0) {
            return spec_err("znorm_epsilon and elu_alpha must be positive".into());
        }
        let s = &self.stem;
        if s.width == 0 || s.kernel == 0 || s.stride == 0 {
            return spec_err(format!("stem fields must be ≥ 1: {s:?}"));
        }
        let pad = s.kernel / 2;
        let mut hw = (self.input.height, self.input.width);
        hw = conv_extent(hw, s.kernel, s.stride, pad).ok_or_else(|| Error::Spec("stem kernel exceeds input".into()))?;
        if s.pool {
            hw = pool_extent(hw).ok_or_else(|| Error::Spec("stem pooling on a 1-pixel map".into()))?;
        }
        match &self.body {
            Body::ResidualNet { stages } => {
                if stages.is_empty() {
                    return spec_err("residual net needs at least one stage".into());
                }
                for (i, st) in stages.iter().enumerate() {
                    if st.blocks == 0 || st.width == 0 || st.stride == 0 {
                        return spec_err(format!("stage {i} fields must be ≥ 1: {st:?}"));
                    }
                    hw = conv_extent(hw, 3, st.stride, 1)
                        .ok_or_else(|| Error::Spec(format!("stage {i} collapses the feature map")))?;
                }
            }
            Body::InceptionNet { stages } => {
                if stages.is_empty() || stages.iter().any(|s| s.blocks.is_empty()) {
                    return spec_err("inception net needs non-empty stages".into());
                }
                for (i, st) in stages.iter().enumerate() {
                    for b in &st.blocks {
                        b.validate()?;
                    }
                    if st.downsample {
                        hw = pool_extent(hw)
                            .ok_or_else(|| Error::Spec(format!("stage {i} pools a 1-pixel map")))?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("architecture specs always serialize")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

fn conv_extent((h, w): (usize, usize), k: usize, stride: usize, pad: usize) -> Option<(usize, usize)> {
    if k > h + 2 * pad || k > w + 2 * pad {
        return None;
    }
    Some(((h + 2 * pad - k) / stride + 1, (w + 2 * pad - k) / stride + 1))
}

fn pool_extent((h, w): (usize, usize)) -> Option<(usize, usize)> {
    (h >= 2 && w >= 2).then_some((h / 2, w / 2))
}
