use proptest::prelude::*;
use tempered::autodiff::{grad, hvp};
use tempered::base::{
    normalized_log_posterior, value_and_grad, Batch, LogPosteriorFn, ParamVector,
};
use tempered::models::{double_well_target, mlp_classifier, Activation, GaussianPrior, Mlp};

fn net() -> Mlp {
    let bare = mlp_classifier(vec![2, 3, 3], Activation::Tanh, None).unwrap();
    let prior = GaussianPrior::isotropic(bare.dim(), 2.0).unwrap();
    bare.with_prior(Some(prior)).unwrap()
}

fn batch(xs: &[f64]) -> Batch {
    let inputs = xs.chunks(2).map(|c| c.to_vec()).collect::<Vec<_>>();
    let targets = (0..inputs.len()).map(|i| (i % 3) as f64).collect();
    Batch::new(inputs, targets, 50).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mlp_gradient_matches_central_differences(
        theta in prop::collection::vec(-1.5f64..1.5, 21),
        xs in prop::collection::vec(-2.0f64..2.0, 8),
    ) {
        let model = net();
        let b = batch(&xs);
        let theta = ParamVector::new(theta).unwrap();
        let (_, g) = value_and_grad(&model, &theta, &b).unwrap();
        let h = 1e-5;
        for j in 0..theta.dim() {
            let mut up = theta.as_slice().to_vec();
            let mut dn = up.clone();
            up[j] += h;
            dn[j] -= h;
            let f = |v: Vec<f64>| normalized_log_posterior(&model, &ParamVector::new(v).unwrap(), &b).unwrap().value;
            let fd = (f(up) - f(dn)) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1.0), "coord {}: {} vs {}", j, fd, g[j]);
        }
    }

    #[test]
    fn hessian_vector_products_are_symmetric(
        theta in prop::collection::vec(-1.0f64..1.0, 21),
        u in prop::collection::vec(-1.0f64..1.0, 21),
        v in prop::collection::vec(-1.0f64..1.0, 21),
    ) {
        let model = net();
        let b = batch(&[0.3, -0.2, 1.0, 0.5, -1.2, 0.7]);
        let theta = ParamVector::new(theta).unwrap();
        let (u, v) = (ParamVector::new(u).unwrap(), ParamVector::new(v).unwrap());
        let f = |t: &mut tempered::autodiff::Tape, p: &[tempered::autodiff::Var]| model.record(t, p, &b).value;
        let hu = hvp(f, &theta, &u).unwrap();
        let hv = hvp(f, &theta, &v).unwrap();
        let (a, c) = (v.dot(&hu).unwrap(), u.dot(&hv).unwrap());
        prop_assert!((a - c).abs() <= 1e-10 * a.abs().max(1.0), "{} vs {}", a, c);
    }

    #[test]
    fn double_well_is_mirror_symmetric(x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let t = double_well_target(1.0, 2.0).unwrap();
        prop_assert_eq!(t.log_density(&[x, y]), t.log_density(&[-x, y]));
    }
}

#[test]
fn double_well_gradient_vanishes_at_modes() {
    let t = double_well_target(1.5, 0.5).unwrap();
    for m in t.mode_set() {
        let (_, g) = value_and_grad(&t, m, &Batch::empty(1)).unwrap();
        assert!(g.norm() < 1e-12, "{g:?}");
    }
}

#[test]
fn grad_of_quadratic_form() {
    let theta = ParamVector::new(vec![1.0, -2.0, 0.5]).unwrap();
    let (v, g) = grad(
        |t, p| {
            let sq: Vec<_> = p.iter().map(|&x| t.square(x)).collect();
            let s = t.sum(&sq);
            t.scale(s, 0.5)
        },
        &theta,
    )
    .unwrap();
    assert_eq!(v, 2.625);
    assert_eq!(g, theta);
}
