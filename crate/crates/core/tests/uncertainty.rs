use proptest::prelude::*;
use tempered::base::{LogPosteriorFn, ParamVector};
use tempered::models::{mlp_classifier, two_moons, Activation};
use tempered::predict::{decompose_uncertainty, evaluate_params, write_uncertainty_csv};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn network_ensembles_split_additively(
        params in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 27), 1..6),
        x in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let model = mlp_classifier(vec![2, 4, 3], Activation::Relu, None).unwrap();
        prop_assert_eq!(model.dim(), 27);
        let params: Vec<ParamVector> = params.into_iter().map(|p| ParamVector::new(p).unwrap()).collect();
        let members: Vec<Vec<f64>> = params
            .iter()
            .map(|p| tempered::models::softmax(&tempered::models::SupervisedModel::predict(&model, p, &x)))
            .collect();
        let u = decompose_uncertainty(&members);
        prop_assert!(u.eu >= 0.0);
        prop_assert!((u.tu - u.au - u.eu).abs() <= 1e-12);
        prop_assert!(u.tu <= 3f64.ln() + 1e-12);
        if members.len() == 1 {
            prop_assert_eq!(u.eu, 0.0);
        }
    }
}

#[test]
fn csv_rows_match_scored_inputs() {
    let model = mlp_classifier(vec![2, 5, 2], Activation::Tanh, None).unwrap();
    let data = two_moons(12, 0.1, 0.0, 1);
    let params: Vec<ParamVector> = (0..4)
        .map(|k| {
            ParamVector::new(
                (0..model.dim())
                    .map(|j| ((j * 7 + k * 3) % 11) as f64 / 11.0 - 0.5)
                    .collect(),
            )
            .unwrap()
        })
        .collect();
    let (preds, metrics) = evaluate_params(&model, &params, &data).unwrap();
    assert!(metrics.loss.is_finite() && (0.0..=1.0).contains(&metrics.accuracy));
    let mut buf = Vec::new();
    write_uncertainty_csv(&preds, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "input_id,TU,AU,EU,predicted_class");
    assert_eq!(lines.len(), 13);
    for (i, line) in lines[1..].iter().enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], i.to_string());
        assert_eq!(cols[4], preds[i].predicted_class().to_string());
    }
}
