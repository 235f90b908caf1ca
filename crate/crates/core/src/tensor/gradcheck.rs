//! Central finite-difference gradient checking.

use crate::error::{Error, Result};

use super::{Graph, Tensor, Var};

/// Denominator floor for relative errors. Below this magnitude the
/// comparison degrades to an absolute one, so near-zero gradients do not
/// amplify rounding noise.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

/// Outcome of [`grad_check_many`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// `(input index, flat coordinate)` of the worst relative error.
    pub worst: (usize, usize),
    pub coordinates: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

fn eval<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>>,
{
    let g = Graph::new();
    let vars: Vec<_> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    let out = f(&g, &vars)?;
    out.value().item()
}

/// Compare reverse-mode gradients of a scalar `f` against central
/// differences, coordinate by coordinate, over every input tensor.
///
/// `eps` must lie in `[1e-7, 1e-4]`. `f` is evaluated twice at the base
/// point; differing results are reported as a contract error.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>>,
{
    if !(1e-7..=1e-4).contains(&eps) {
        return Err(Error::Contract(format!(
            "grad_check step {eps} outside [1e-7, 1e-4]"
        )));
    }
    let first = eval(&f, inputs)?;
    let second = eval(&f, inputs)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::Contract(format!(
            "grad_check: function is not deterministic ({first} vs {second})"
        )));
    }

    let g = Graph::new();
    let vars: Vec<_> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let root = f(&g, &vars)?;
    let grads = g.backward(root)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: (0, 0),
        coordinates: 0,
    };
    let mut probe = inputs.to_vec();
    for (which, var) in vars.iter().enumerate() {
        let analytic = grads
            .get(*var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[which].shape()));
        for coord in 0..inputs[which].numel() {
            let base = inputs[which].data()[coord];
            probe[which].data_mut()[coord] = base + eps;
            let up = eval(&f, &probe)?;
            probe[which].data_mut()[coord] = base - eps;
            let down = eval(&f, &probe)?;
            probe[which].data_mut()[coord] = base;

            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.data()[coord];
            let rel = relative_error(a, numeric);
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (which, coord);
            }
            report.coordinates += 1;
        }
    }
    Ok(report)
}

/// Single-input form of [`grad_check_many`]; returns the worst relative error.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: for<'g> Fn(&'g Graph, Var<'g>) -> Result<Var<'g>>,
{
    grad_check_many(|g, v| f(g, v[0]), std::slice::from_ref(x), eps).map(|r| r.max_rel_error)
}
