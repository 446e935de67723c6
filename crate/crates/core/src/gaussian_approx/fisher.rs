use crate::autodiff::{per_sample_grads, JacobianOperator};
use crate::base::ParamVector;
use crate::error::Result;
use crate::models::{softmax, Dataset, Likelihood, SupervisedModel};

/// Elementwise mean of squared gradients.
pub fn fisher_diag_from_grads(grads: &[ParamVector]) -> Vec<f64> {
    let d = grads.first().map_or(0, |g| g.dim());
    let n = grads.len().max(1) as f64;
    let mut out = vec![0.0; d];
    for g in grads {
        for (o, v) in out.iter_mut().zip(g.iter()) {
            *o += v * v;
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Diagonal of the empirical Fisher: mean over the data of squared
/// per-datum log-likelihood gradients.
pub fn empirical_fisher_diag<M: SupervisedModel + ?Sized>(
    model: &M,
    theta: &ParamVector,
    data: &Dataset,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Ok(vec![0.0; theta.dim()]);
    }
    let grads = per_sample_grads(
        |t, p, x, y| model.log_likelihood(t, p, x, y),
        theta,
        &data.full_batch(),
    )?;
    Ok(fisher_diag_from_grads(&grads))
}

/// Negative Hessian of the log likelihood with respect to the outputs.
pub fn loss_hessian(likelihood: Likelihood, outputs: &[f64]) -> Vec<Vec<f64>> {
    match likelihood {
        Likelihood::Gaussian { noise_var } => vec![vec![1.0 / noise_var]],
        Likelihood::Categorical { .. } => {
            let p = softmax(outputs);
            let k = p.len();
            (0..k)
                .map(|a| {
                    (0..k)
                        .map(|b| {
                            if a == b {
                                p[a] - p[a] * p[b]
                            } else {
                                -p[a] * p[b]
                            }
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// Diagonal of the generalized Gauss–Newton matrix `E[Jᵀ H_L J]`, with the
/// Jacobian rows obtained from one vjp probe per output.
pub fn ggn_diag<M: SupervisedModel + ?Sized>(
    model: &M,
    theta: &ParamVector,
    data: &Dataset,
) -> Result<Vec<f64>> {
    let d = theta.dim();
    let mut out = vec![0.0; d];
    if data.is_empty() {
        return Ok(out);
    }
    for x in data.inputs() {
        let jac = JacobianOperator::new(|t, p| model.forward(t, p, x), theta)?;
        let h = loss_hessian(model.likelihood(), &jac.value());
        let rows: Vec<Vec<f64>> = (0..jac.output_dim()).map(|a| jac.row(a)).collect();
        for (a, ra) in rows.iter().enumerate() {
            for (b, rb) in rows.iter().enumerate() {
                let w = h[a][b];
                if w == 0.0 {
                    continue;
                }
                for i in 0..d {
                    out[i] += w * ra[i] * rb[i];
                }
            }
        }
    }
    let n = data.len() as f64;
    // Rounding can leave tiny negatives where the true value is zero.
    out.iter_mut().for_each(|o| *o = (*o / n).max(0.0));
    Ok(out)
}
