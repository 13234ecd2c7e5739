//! Central finite-difference comparison against [`Tape::backward`].

use crate::{Result, Tape, Tensor, Var};

/// Denominator floor of [`rel_error`]; gradients smaller than this are
/// compared absolutely.
pub const REL_FLOOR: f64 = 1e-3;

/// `|a − n| / max(|a|, |n|, REL_FLOOR)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mismatch {
    pub input: usize,
    pub element: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub max_rel: f64,
    pub worst: Option<Mismatch>,
    pub checked: usize,
}

/// Compares the tape gradient of the scalar `f(inputs)` with
/// `(f(x + eps) − f(x − eps)) / 2·eps` for the chosen `(input, element)`
/// coordinates, or for every element when `coords` is `None`.
pub fn check<F>(inputs: &[Tensor], eps: f64, coords: Option<&[(usize, usize)]>, f: F) -> Result<GradReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor], grads: bool| -> Result<(f64, Vec<Option<Tensor>>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone(), grads)).collect();
        let loss = f(&mut tape, &vars)?;
        let value = tape.value(loss).item();
        if !grads {
            return Ok((value, Vec::new()));
        }
        tape.backward(loss)?;
        Ok((value, vars.iter().map(|&v| tape.grad(v).cloned()).collect()))
    };
    let (_, grads) = eval(inputs, true)?;
    let all: Vec<(usize, usize)>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = inputs
                .iter()
                .enumerate()
                .flat_map(|(i, t)| (0..t.len()).map(move |e| (i, e)))
                .collect();
            &all
        }
    };
    let mut report = GradReport {
        max_rel: 0.0,
        worst: None,
        checked: 0,
    };
    let mut probe = inputs.to_vec();
    for &(input, element) in coords {
        let x = probe[input].data()[element];
        probe[input].data_mut()[element] = x + eps;
        let plus = eval(&probe, false)?.0;
        probe[input].data_mut()[element] = x - eps;
        let minus = eval(&probe, false)?.0;
        probe[input].data_mut()[element] = x;
        let numeric = (plus - minus) / (2.0 * eps);
        let analytic = grads[input].as_ref().map_or(0.0, |g| g.data()[element]);
        let rel = rel_error(analytic, numeric);
        report.checked += 1;
        if rel > report.max_rel || report.worst.is_none() {
            report.max_rel = report.max_rel.max(rel);
            report.worst = Some(Mismatch {
                input,
                element,
                analytic,
                numeric,
            });
        }
    }
    Ok(report)
}
