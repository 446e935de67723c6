//! Reverse-mode automatic differentiation.

mod tape;

pub use tape::{Tape, Var};

use crate::base::{Batch, ParamVector};
use crate::error::{Error, Result};

fn finite_gradient(g: Vec<f64>) -> Result<ParamVector> {
    ParamVector::new(g).map_err(|e| match e {
        Error::NonFinite { index, .. } => Error::NonFinite {
            what: "gradient",
            index,
        },
        e => e,
    })
}

/// Value and gradient of a scalar function recorded on a fresh tape.
pub fn grad<F>(f: F, theta: &ParamVector) -> Result<(f64, ParamVector)>
where
    F: FnOnce(&mut Tape, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let params = tape.inputs(theta);
    let out = f(&mut tape, &params);
    tape.check_finite()?;
    Ok((tape.value(out), finite_gradient(tape.gradient(out))?))
}

/// One gradient per datum of `batch`, each on its own tape.
pub fn per_sample_grads<F>(f: F, theta: &ParamVector, batch: &Batch) -> Result<Vec<ParamVector>>
where
    F: Fn(&mut Tape, &[Var], &[f64], f64) -> Var,
{
    batch
        .iter()
        .map(|(x, y)| grad(|t, p| f(t, p, x, y), theta).map(|(_, g)| g))
        .collect()
}

/// Hessian-vector product by forward-over-reverse on one recorded tape.
pub fn hvp<F>(f: F, theta: &ParamVector, u: &ParamVector) -> Result<ParamVector>
where
    F: FnOnce(&mut Tape, &[Var]) -> Var,
{
    Error::check_dim(theta.dim(), u.dim())?;
    let mut tape = Tape::new();
    let params = tape.inputs(theta);
    let out = f(&mut tape, &params);
    tape.check_finite()?;
    finite_gradient(tape.hvp(out, u))
}

/// Jacobian of a vector-valued function at a fixed point, exposed only
/// through products.
#[derive(Debug, Clone)]
pub struct JacobianOperator {
    tape: Tape,
    outputs: Vec<Var>,
}

impl JacobianOperator {
    pub fn new<F>(forward: F, at: &ParamVector) -> Result<Self>
    where
        F: FnOnce(&mut Tape, &[Var]) -> Vec<Var>,
    {
        let mut tape = Tape::new();
        let params = tape.inputs(at);
        let outputs = forward(&mut tape, &params);
        tape.check_finite()?;
        Ok(Self { tape, outputs })
    }

    pub fn input_dim(&self) -> usize {
        self.tape.num_inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    /// Forward value `f(mu)`.
    pub fn value(&self) -> Vec<f64> {
        self.tape.values(&self.outputs)
    }

    pub fn jvp(&self, u: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.input_dim(), u.len())?;
        let tan = self.tape.tangents(u);
        Ok(self.outputs.iter().map(|o| tan[o.index()]).collect())
    }

    pub fn vjp(&self, v: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.output_dim(), v.len())?;
        let seeds: Vec<_> = self
            .outputs
            .iter()
            .copied()
            .zip(v.iter().copied())
            .collect();
        Ok(self.tape.reverse(&seeds))
    }

    /// Row `j` of the Jacobian, via one vjp probe.
    pub fn row(&self, j: usize) -> Vec<f64> {
        self.tape.reverse(&[(self.outputs[j], 1.0)])
    }
}

/// Free-function form of [`JacobianOperator::jvp`].
pub fn jvp(op: &JacobianOperator, u: &[f64]) -> Result<Vec<f64>> {
    op.jvp(u)
}

/// Free-function form of [`JacobianOperator::vjp`].
pub fn vjp(op: &JacobianOperator, v: &[f64]) -> Result<Vec<f64>> {
    op.vjp(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn square_and_sum() {
        let (v, g) = grad(|t, p| t.square(p[0]), &pv(&[3.0])).unwrap();
        assert_eq!(v, 9.0);
        assert_eq!(g.as_slice(), &[6.0]);
        let (_, g) = grad(|t, p| t.sum(p), &pv(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn linear_map_products() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let op = JacobianOperator::new(
            |t, p| {
                let w = t.constants(&a);
                t.matvec(&w, 2, 2, p)
            },
            &pv(&[0.3, -0.7]),
        )
        .unwrap();
        assert_eq!(op.jvp(&[1.0, 0.0]).unwrap(), vec![1.0, 3.0]);
        assert_eq!(op.vjp(&[1.0, 1.0]).unwrap(), vec![4.0, 6.0]);
        assert!(op.vjp(&[1.0]).is_err());
    }

    #[test]
    fn hvp_examples() {
        // f = 1/2 θᵀθ
        let half_norm = |t: &mut Tape, p: &[Var]| {
            let s = t.dot(p, p);
            t.scale(s, 0.5)
        };
        let u = pv(&[0.3, -1.2, 2.0]);
        assert_eq!(hvp(half_norm, &pv(&[1.0, 2.0, 3.0]), &u).unwrap(), u);

        // f = θ1² θ2 at (1,2): Hessian [[4,2],[2,0]]
        let r = hvp(
            |t, p| {
                let s = t.square(p[0]);
                t.mul(s, p[1])
            },
            &pv(&[1.0, 2.0]),
            &pv(&[1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(r.as_slice(), &[4.0, 2.0]);
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let err = grad(|t, p| t.log(p[0]), &pv(&[0.0])).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }
}
