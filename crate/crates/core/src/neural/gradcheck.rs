use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::loss_delta;
use super::{loss_with_grad, ModelInput, NeuralError, VisionTapas};
use crate::qa::SupervisionTarget;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub per_tensor: Vec<TensorCheck>,
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares analytic gradients with central differences on up to
/// `coords_per_tensor` randomly chosen entries of every parameter tensor.
///
/// Both probes are measured as loss changes relative to the unperturbed
/// output, which keeps the difference quotient free of the rounding error
/// carried by the absolute loss value.
pub fn grad_check(
    model: &VisionTapas,
    input: &ModelInput,
    target: &SupervisionTarget,
    lambda: f64,
    eps: f64,
    coords_per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport, NeuralError> {
    let (out, cache) = model.forward_cached(input)?;
    let (_, dl, dc) = loss_with_grad(&out, target, lambda);
    let grads = model.backward(input, &cache, &dl, &dc);
    let params = model.params();
    for i in 0..params.len() {
        if !grads.get(i).iter().all(|v| v.is_finite()) {
            return Err(NeuralError::NonFiniteGradient {
                tensor: params.name(i).to_string(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<Vec<usize>> = (0..params.len())
        .map(|i| {
            let n = params.get(i).len();
            if n <= coords_per_tensor {
                (0..n).collect()
            } else {
                let mut v = sample(&mut rng, n, coords_per_tensor).into_vec();
                v.sort_unstable();
                v
            }
        })
        .collect();
    let per_tensor = picks
        .par_iter()
        .enumerate()
        .map(|(t, coords)| -> Result<TensorCheck, NeuralError> {
            let mut m = model.clone();
            let mut worst: f64 = 0.0;
            for &k in coords {
                let orig = m.params().get(t).as_slice().expect("contiguous")[k];
                let mut eval = |v: f64| -> Result<f64, NeuralError> {
                    m.params_mut().get_mut(t).as_slice_mut().expect("contiguous")[k] = v;
                    Ok(loss_delta(&out, &m.forward(input)?, target, lambda))
                };
                let up = eval(orig + eps)?;
                let down = eval(orig - eps)?;
                eval(orig)?;
                let numeric = (up - down) / (2.0 * eps);
                let analytic = grads.get(t).as_slice().expect("contiguous")[k];
                if !numeric.is_finite() {
                    return Err(NeuralError::NonFiniteGradient {
                        tensor: params.name(t).to_string(),
                    });
                }
                worst = worst.max(relative_error(analytic, numeric));
            }
            Ok(TensorCheck {
                name: params.name(t).to_string(),
                checked: coords.len(),
                max_rel_error: worst,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let worst = per_tensor
        .iter()
        .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
        .expect("model has parameters");
    Ok(GradCheckReport {
        max_rel_error: worst.max_rel_error,
        worst_tensor: worst.name.clone(),
        per_tensor,
    })
}
