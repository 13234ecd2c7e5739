//! Network descriptions (residual net and inception net), their parameters,
//! and forward passes producing logits and unit-norm descriptors.

mod graph;
mod params;
mod spec;

use std::collections::BTreeMap;

use vehreid_tensor::{Tape, Tensor, Var};

pub use graph::{build_inception, InceptionBlock, NormMode, NormRecord};
pub use params::{build, layout, ModelParams, ParamRole, ParamSlot};
pub use spec::{
    ArchKind, ArchSpec, Body, Head, InceptionSpec, InceptionStage, InceptionVariant, InputShape,
    ResidualStage, Stem, StemActivation, COLOR_CLASSES,
};

use crate::{Error, Result};

/// Handles into a tape after a forward walk.
#[derive(Debug, Clone)]
pub struct Graph {
    /// `[B, K]` pre-softmax similarities.
    pub logits: Var,
    /// `[B, D]` globally pooled penultimate activation (not normalized).
    pub features: Var,
    /// Every z-normalization node, in execution order.
    pub norms: Vec<NormRecord>,
}

pub fn check_input(arch: &ArchSpec, batch: &[usize]) -> Result<()> {
    let i = &arch.input;
    match batch {
        [_, c, h, w] if (*c, *h, *w) == (i.channels, i.height, i.width) => Ok(()),
        _ => Err(Error::Tensor(vehreid_tensor::TensorError::Shape(format!(
            "network expects [B,{},{},{}], got {batch:?}",
            i.channels, i.height, i.width
        )))),
    }
}

/// Records the network on `tape`. `bound` comes from [`ModelParams::bind`].
pub fn forward_graph(
    tape: &mut Tape,
    params: &ModelParams,
    bound: &BTreeMap<String, Var>,
    arch: &ArchSpec,
    input: Var,
    mode: NormMode,
) -> Result<Graph> {
    check_input(arch, tape.value(input).shape())?;
    let mut builder = graph::TapeBuilder {
        tape,
        params,
        bound,
        mode,
        epsilon: arch.znorm_epsilon,
        alpha: arch.elu_alpha,
        norms: Vec::new(),
    };
    let walked = graph::walk(arch, &mut builder, input)?;
    Ok(Graph {
        logits: walked.logits,
        features: walked.features,
        norms: builder.norms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Tensor,
    /// `[B, D]`, each row on the unit sphere.
    pub descriptor: Tensor,
}

/// Inference pass with stored normalization statistics. Rows are processed
/// independently, so results do not depend on batch composition.
pub fn forward(params: &ModelParams, arch: &ArchSpec, batch: &Tensor) -> Result<ForwardOutput> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, arch, false)?;
    let input = tape.constant(batch.clone());
    let g = forward_graph(&mut tape, params, &bound, arch, input, NormMode::Running)?;
    Ok(ForwardOutput {
        logits: tape.value(g.logits).clone(),
        descriptor: normalize_rows(tape.value(g.features)),
    })
}

/// Scales each row of a `[B, D]` tensor to unit L2 norm. An all-zero row maps
/// to the first basis vector.
pub fn normalize_rows(t: &Tensor) -> Tensor {
    let d = t.shape()[1];
    let mut out = t.data().to_vec();
    for row in out.chunks_exact_mut(d) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        } else {
            row.fill(0.0);
            row[0] = 1.0;
        }
    }
    Tensor::new(t.shape(), out).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_residual() -> ArchSpec {
        let mut a = ArchSpec::residual_default(Head::MakeModel { classes: 4 });
        a.input.height = 16;
        a.input.width = 16;
        a
    }

    fn input(b: usize, arch: &ArchSpec, salt: f64) -> Tensor {
        let shape = vec![b, arch.input.channels, arch.input.height, arch.input.width];
        let n: usize = shape.iter().product();
        Tensor::new(shape, (0..n).map(|i| ((i as f64 * 0.37 + salt).sin() + 1.0) / 2.0).collect()).unwrap()
    }

    #[test]
    fn build_is_deterministic() {
        let arch = ArchSpec::residual_default(Head::Color);
        let a = build(&arch, 7).unwrap();
        let b = build(&arch, 7).unwrap();
        for ((ka, ta), (kb, tb)) in a.iter().zip(b.iter()) {
            assert_eq!(ka, kb);
            let bytes_a: Vec<u64> = ta.data().iter().map(|v| v.to_bits()).collect();
            let bytes_b: Vec<u64> = tb.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bytes_a, bytes_b);
        }
        assert_ne!(build(&arch, 8).unwrap(), a);
    }

    #[test]
    fn residual_key_count_matches_enumeration() {
        // stem conv (2) + six blocks × (norm1, conv1, norm2, conv2) × 2
        // + projection shortcuts in stage1 and stage2 (2 × 2)
        // + final norm (2) + head (2)
        let arch = ArchSpec::residual_default(Head::MakeModel { classes: 12 });
        let slots = layout(&arch).unwrap();
        assert_eq!(slots.len(), 2 + 6 * 8 + 4 + 2 + 2);
        assert!(slots.iter().any(|s| s.key == "stage1.block0.shortcut.weight"));
        assert!(!slots.iter().any(|s| s.key == "stage0.block0.shortcut.weight"));
        assert!(!slots.iter().any(|s| s.key == "stage1.block1.shortcut.weight"));
    }

    #[test]
    fn text_rebuild_preserves_keys() {
        let arch = ArchSpec::inception_default(Head::Color, InceptionVariant::Modified);
        let again = ArchSpec::from_text(&arch.to_text()).unwrap();
        let k1: Vec<_> = layout(&arch).unwrap().into_iter().map(|s| s.key).collect();
        let k2: Vec<_> = layout(&again).unwrap().into_iter().map(|s| s.key).collect();
        assert_eq!(k1, k2);
    }

    #[test]
    fn params_match_layout() {
        let arch = tiny_residual();
        let mut p = build(&arch, 1).unwrap();
        p.check_against(&arch).unwrap();
        p.insert("extra.weight", Tensor::scalar(1.0));
        assert!(p.check_against(&arch).is_err());
    }

    #[test]
    fn descriptors_are_unit_norm() {
        let arch = tiny_residual();
        let p = build(&arch, 3).unwrap();
        let out = forward(&p, &arch, &input(3, &arch, 0.1)).unwrap();
        for row in out.descriptor.data().chunks_exact(arch.descriptor_dim()) {
            let n: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_head_gives_zero_logits() {
        let arch = tiny_residual();
        let mut p = build(&arch, 3).unwrap();
        p.get_mut("head.weight").unwrap().data_mut().fill(0.0);
        let out = forward(&p, &arch, &input(2, &arch, 0.4)).unwrap();
        assert!(out.logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let arch = tiny_residual();
        let p = build(&arch, 3).unwrap();
        let bad = Tensor::zeros(vec![1, 3, 8, 8]);
        assert!(matches!(forward(&p, &arch, &bad), Err(Error::Tensor(_))));
    }
}
