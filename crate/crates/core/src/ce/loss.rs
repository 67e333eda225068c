//! Losses of the Siamese architecture and their exact gradients.
//!
//! The prediction loss is a weighted cross entropy over `{-1,+1}` targets
//! with tanh-shaped predictions; the distance loss is a squared penalty
//! between the embedding distance and its similarity-derived target. The
//! combined pair loss backpropagates through both towers into one shared
//! parameter set.

use crate::error::{Error, Result};
use crate::semantics::{context_similarity, BowTarget};
use crate::vecmath::euclidean;

use super::network::{backward_into, forward_trace, NetworkGradient, SubNetworkParams};
use super::{CeHyperParams, ConceptInput, KappaRule, PairCase};

/// Predictions are clamped to this magnitude before the logarithms.
const OUTPUT_CLAMP: f64 = 1.0 - 1e-7;

fn kappa(target: &BowTarget, rule: KappaRule) -> f64 {
    let m = target.values.len() as f64;
    let positives = target.positives() as f64;
    match rule {
        KappaRule::NegativeFraction => (m - positives) / m,
        KappaRule::PositiveFraction => positives / m,
    }
}

/// Weighted cross entropy between a `{-1,+1}` target and a prediction in
/// `(-1,1)`; exactly zero for an all-zero prediction.
pub fn prediction_loss(
    target: &BowTarget,
    prediction: &[f64],
    rule: KappaRule,
) -> Result<f64> {
    if target.values.len() != prediction.len() {
        return Err(Error::dimension(
            target.values.len(),
            prediction.len(),
            "prediction",
        ));
    }
    let m = target.values.len() as f64;
    let k = kappa(target, rule);
    let mut sum = 0.0;
    for (&y, &raw) in target.values.iter().zip(prediction) {
        if !(-1.0..=1.0).contains(&raw) {
            return Err(Error::Numeric(format!(
                "prediction entry {raw} outside [-1, 1]"
            )));
        }
        let y_hat = clamp_output(raw);
        sum += k * (1.0 + y) * (1.0 + y_hat).ln() + (1.0 - k) * (1.0 - y) * (1.0 - y_hat).ln();
    }
    Ok(-sum / m)
}

fn clamp_output(raw: f64) -> f64 {
    if raw.abs() > OUTPUT_CLAMP {
        log::debug!("prediction {raw} clamped to magnitude {OUTPUT_CLAMP}");
        OUTPUT_CLAMP.copysign(raw)
    } else {
        raw
    }
}

/// dL_p/d(prediction): zero where the prediction sits in the clamp region,
/// matching the piecewise-constant loss there.
fn prediction_loss_grad(target: &BowTarget, prediction: &[f64], rule: KappaRule) -> Vec<f64> {
    let m = target.values.len() as f64;
    let k = kappa(target, rule);
    target
        .values
        .iter()
        .zip(prediction)
        .map(|(&y, &raw)| {
            if raw.abs() > OUTPUT_CLAMP {
                0.0
            } else {
                -(k * (1.0 + y) / (1.0 + raw) - (1.0 - k) * (1.0 - y) / (1.0 - raw)) / m
            }
        })
        .collect()
}

/// Squared distance-target penalty for one pair of embeddings.
///
/// Same-polarity pairs are pulled toward `beta * (1 - s)` (negative pairs
/// scaled by `rho`); mixed pairs toward `beta`, with the penalty weighted by
/// the context similarity.
pub fn distance_loss(
    code1: &[f64],
    code2: &[f64],
    s: f64,
    case: PairCase,
    beta: f64,
    rho: f64,
) -> Result<f64> {
    if code1.len() != code2.len() {
        return Err(Error::dimension(code1.len(), code2.len(), "codes"));
    }
    let e = euclidean(code1, code2);
    Ok(distance_loss_from_gap(e, s, case, beta, rho))
}

fn distance_loss_from_gap(e: f64, s: f64, case: PairCase, beta: f64, rho: f64) -> f64 {
    match case {
        PairCase::BothPositive => {
            let d = e - beta * (1.0 - s);
            d * d
        }
        PairCase::BothNegative => {
            let d = e - beta * (1.0 - s);
            rho * d * d
        }
        PairCase::Mixed => {
            let d = e - beta;
            d * d * s
        }
    }
}

fn distance_loss_gap_grad(e: f64, s: f64, case: PairCase, beta: f64, rho: f64) -> f64 {
    match case {
        PairCase::BothPositive => 2.0 * (e - beta * (1.0 - s)),
        PairCase::BothNegative => 2.0 * rho * (e - beta * (1.0 - s)),
        PairCase::Mixed => 2.0 * (e - beta) * s,
    }
}

/// Everything observable about one pair evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEvaluation {
    pub loss: f64,
    pub prediction_loss_1: f64,
    pub prediction_loss_2: f64,
    pub distance_loss: f64,
    pub similarity: f64,
    pub distance: f64,
    pub case: PairCase,
}

/// Combined pair loss: both towers' prediction losses plus `alpha` times the
/// distance loss, with the similarity derived from the two contexts.
pub fn total_loss(
    a: &ConceptInput,
    b: &ConceptInput,
    params: &SubNetworkParams,
    hyper: &CeHyperParams,
) -> Result<f64> {
    Ok(evaluate_pair(a, b, params, hyper)?.loss)
}

pub fn evaluate_pair(
    a: &ConceptInput,
    b: &ConceptInput,
    params: &SubNetworkParams,
    hyper: &CeHyperParams,
) -> Result<PairEvaluation> {
    let trace_a = forward_trace(params, &a.input_vector())?;
    let trace_b = forward_trace(params, &b.input_vector())?;
    evaluate_traced(a, b, &trace_a.code().to_vec(), trace_a.prediction(), &trace_b.code().to_vec(), trace_b.prediction(), params.code_dim(), hyper)
}

#[allow(clippy::too_many_arguments)]
fn evaluate_traced(
    a: &ConceptInput,
    b: &ConceptInput,
    code_a: &[f64],
    pred_a: &[f64],
    code_b: &[f64],
    pred_b: &[f64],
    code_dim: usize,
    hyper: &CeHyperParams,
) -> Result<PairEvaluation> {
    let case = PairCase::from_polarities(a.polarity, b.polarity);
    let s = context_similarity(&a.context, &b.context, hyper.lambda)?;
    let beta = hyper.beta_for(code_dim);
    let lp1 = prediction_loss(&a.target, pred_a, hyper.kappa_rule)?;
    let lp2 = prediction_loss(&b.target, pred_b, hyper.kappa_rule)?;
    let e = euclidean(code_a, code_b);
    let ls = distance_loss_from_gap(e, s, case, beta, hyper.rho);
    let loss = lp1 + lp2 + hyper.alpha * ls;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite pair loss {loss}")));
    }
    Ok(PairEvaluation {
        loss,
        prediction_loss_1: lp1,
        prediction_loss_2: lp2,
        distance_loss: ls,
        similarity: s,
        distance: e,
        case,
    })
}

/// Exact gradient of the combined pair loss with respect to the shared
/// parameters; contributions of both towers accumulate into one gradient.
pub fn pair_gradient(
    a: &ConceptInput,
    b: &ConceptInput,
    params: &SubNetworkParams,
    hyper: &CeHyperParams,
) -> Result<(PairEvaluation, NetworkGradient)> {
    let input_a = a.input_vector();
    let input_b = b.input_vector();
    let trace_a = forward_trace(params, &input_a)?;
    let trace_b = forward_trace(params, &input_b)?;
    let eval = evaluate_traced(
        a,
        b,
        trace_a.code(),
        trace_a.prediction(),
        trace_b.code(),
        trace_b.prediction(),
        params.code_dim(),
        hyper,
    )?;

    let out_grad_a = prediction_loss_grad(&a.target, trace_a.prediction(), hyper.kappa_rule);
    let out_grad_b = prediction_loss_grad(&b.target, trace_b.prediction(), hyper.kappa_rule);

    let beta = hyper.beta_for(params.code_dim());
    let dls_de = distance_loss_gap_grad(eval.distance, eval.similarity, eval.case, beta, hyper.rho);
    let (code_grad_a, code_grad_b) = if eval.distance > 0.0 {
        let scale = hyper.alpha * dls_de / eval.distance;
        let ga: Vec<f64> = trace_a
            .code()
            .iter()
            .zip(trace_b.code())
            .map(|(x, y)| scale * (x - y))
            .collect();
        let gb: Vec<f64> = ga.iter().map(|g| -g).collect();
        (ga, gb)
    } else {
        // Subgradient choice at the kink of the Euclidean norm.
        (
            vec![0.0; params.code_dim()],
            vec![0.0; params.code_dim()],
        )
    };

    let mut grad = NetworkGradient::zeros_like(params);
    backward_into(params, &input_a, &trace_a, &out_grad_a, Some(&code_grad_a), &mut grad);
    backward_into(params, &input_b, &trace_b, &out_grad_b, Some(&code_grad_b), &mut grad);
    if !grad.is_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    Ok((eval, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ce::network::init_network;
    use crate::ce::Polarity;
    use crate::semantics::ContextHistogram;

    fn target(values: &[f64]) -> BowTarget {
        BowTarget {
            values: values.to_vec(),
        }
    }

    fn hist(values: &[f64]) -> ContextHistogram {
        ContextHistogram::new(values.to_vec()).unwrap()
    }

    #[test]
    fn prediction_loss_zero_at_zero_prediction() {
        let t = target(&[1.0, -1.0, -1.0, 1.0]);
        let loss = prediction_loss(&t, &[0.0; 4], KappaRule::NegativeFraction).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn prediction_loss_hand_value() {
        // Two entries, y = (+1,-1), prediction (0.5,-0.5), kappa = 1/2:
        // -(1/2)(0.5*2*ln 1.5 + 0.5*2*ln 1.5) = -ln 1.5.
        let t = target(&[1.0, -1.0]);
        let loss = prediction_loss(&t, &[0.5, -0.5], KappaRule::NegativeFraction).unwrap();
        assert!((loss - (-(1.5f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn prediction_loss_improves_toward_target() {
        let t = target(&[1.0, -1.0, -1.0]);
        let mut prev = prediction_loss(&t, &[0.0, 0.0, 0.0], KappaRule::NegativeFraction).unwrap();
        for step in 1..=8 {
            let v = 0.1 * step as f64;
            let loss =
                prediction_loss(&t, &[v, 0.0, 0.0], KappaRule::NegativeFraction).unwrap();
            assert!(loss < prev);
            prev = loss;
        }
    }

    #[test]
    fn distance_loss_zero_cases() {
        // Both positive, identical contexts, identical codes.
        let zero = distance_loss(&[0.3, -0.2], &[0.3, -0.2], 1.0, PairCase::BothPositive, 2.0, 0.5)
            .unwrap();
        assert_eq!(zero, 0.0);
        // Gap exactly at target: E = beta (1 - S) with representable values.
        let l = distance_loss(&[0.5, 0.0], &[0.0, 0.0], 0.5, PairCase::BothPositive, 1.0, 0.5)
            .unwrap();
        assert!(l.abs() < 1e-12);
        let l2 = distance_loss(&[0.5, 0.0], &[0.0, 0.0], 0.5, PairCase::BothNegative, 1.0, 0.5)
            .unwrap();
        assert!(l2.abs() < 1e-12);
        // Mixed pair at E = beta is zero regardless of similarity.
        let l3 =
            distance_loss(&[2.0, 0.0], &[0.0, 0.0], 0.37, PairCase::Mixed, 2.0, 0.5).unwrap();
        assert!(l3.abs() < 1e-12);
    }

    #[test]
    fn distance_loss_negative_pair_value() {
        // beta=2, S=0.5, E=0, rho=0.5 -> 0.5 * (0 - 1)^2 = 0.5.
        let l = distance_loss(&[0.0, 0.0], &[0.0, 0.0], 0.5, PairCase::BothNegative, 2.0, 0.5)
            .unwrap();
        assert!((l - 0.5).abs() < 1e-12);
    }

    fn concept(
        label_features: &[f64],
        context: &[f64],
        polarity: Polarity,
        tgt: &[f64],
    ) -> ConceptInput {
        ConceptInput {
            label: "x".into(),
            label_features: label_features.to_vec(),
            context: hist(context),
            polarity,
            target: target(tgt),
        }
    }

    fn small_hyper() -> CeHyperParams {
        CeHyperParams {
            lambda: 1.0,
            beta: Some(1.5),
            rho: 0.5,
            alpha: 1.0,
            ..CeHyperParams::default()
        }
    }

    #[test]
    fn total_loss_alpha_zero_is_sum_of_prediction_losses() {
        let params = init_network(&[4, 3, 2, 2], 5).unwrap();
        let a = concept(&[0.2, -0.3], &[0.6, 0.4], Polarity::Positive, &[1.0, -1.0]);
        let b = concept(&[0.1, 0.5], &[0.3, 0.7], Polarity::Positive, &[-1.0, 1.0]);
        let hyper = CeHyperParams {
            alpha: 0.0,
            ..small_hyper()
        };
        let eval = evaluate_pair(&a, &b, &params, &hyper).unwrap();
        assert!((eval.loss - (eval.prediction_loss_1 + eval.prediction_loss_2)).abs() < 1e-15);
    }

    #[test]
    fn identical_positive_inputs_have_zero_distance_loss() {
        let params = init_network(&[4, 3, 2, 2], 5).unwrap();
        let a = concept(&[0.2, -0.3], &[0.6, 0.4], Polarity::Positive, &[1.0, -1.0]);
        let eval = evaluate_pair(&a, &a, &params, &small_hyper()).unwrap();
        assert_eq!(eval.similarity, 1.0);
        assert_eq!(eval.distance, 0.0);
        assert_eq!(eval.distance_loss, 0.0);
        assert!((eval.loss - 2.0 * eval.prediction_loss_1).abs() < 1e-15);
    }

    #[test]
    fn total_loss_matches_component_composition() {
        let params = init_network(&[4, 3, 2, 2], 11).unwrap();
        let a = concept(&[0.4, -0.1], &[0.8, 0.2], Polarity::Positive, &[1.0, -1.0]);
        let b = concept(&[-0.2, 0.3], &[0.25, 0.75], Polarity::Negative, &[-1.0, 1.0]);
        let hyper = small_hyper();

        let (code_a, pred_a) = crate::ce::forward(&params, &a.input_vector()).unwrap();
        let (code_b, pred_b) = crate::ce::forward(&params, &b.input_vector()).unwrap();
        let s =
            crate::semantics::context_similarity(&a.context, &b.context, hyper.lambda).unwrap();
        let expected = prediction_loss(&a.target, &pred_a, hyper.kappa_rule).unwrap()
            + prediction_loss(&b.target, &pred_b, hyper.kappa_rule).unwrap()
            + hyper.alpha
                * distance_loss(&code_a, &code_b, s, PairCase::Mixed, 1.5, hyper.rho).unwrap();
        let actual = total_loss(&a, &b, &params, &hyper).unwrap();
        assert!((actual - expected).abs() < 1e-14);
    }

    fn finite_difference(
        a: &ConceptInput,
        b: &ConceptInput,
        params: &SubNetworkParams,
        hyper: &CeHyperParams,
    ) -> NetworkGradient {
        let mut fd = NetworkGradient::zeros_like(params);
        let h = 1e-5;
        let mut probe = params.clone();
        for l in 0..params.layers.len() {
            for i in 0..params.layers[l].weights.len() {
                probe.layers[l].weights[i] = params.layers[l].weights[i] + h;
                let up = total_loss(a, b, &probe, hyper).unwrap();
                probe.layers[l].weights[i] = params.layers[l].weights[i] - h;
                let down = total_loss(a, b, &probe, hyper).unwrap();
                probe.layers[l].weights[i] = params.layers[l].weights[i];
                fd.layers[l].0[i] = (up - down) / (2.0 * h);
            }
            for i in 0..params.layers[l].bias.len() {
                probe.layers[l].bias[i] = params.layers[l].bias[i] + h;
                let up = total_loss(a, b, &probe, hyper).unwrap();
                probe.layers[l].bias[i] = params.layers[l].bias[i] - h;
                let down = total_loss(a, b, &probe, hyper).unwrap();
                probe.layers[l].bias[i] = params.layers[l].bias[i];
                fd.layers[l].1[i] = (up - down) / (2.0 * h);
            }
        }
        fd
    }

    fn assert_grad_close(analytic: &NetworkGradient, fd: &NetworkGradient) {
        for ((aw, ab), (fw, fb)) in analytic.layers.iter().zip(&fd.layers) {
            for (x, y) in aw.iter().zip(fw).chain(ab.iter().zip(fb)) {
                let denom = x.abs().max(y.abs()).max(1e-3);
                assert!(
                    ((x - y) / denom).abs() <= 1e-4,
                    "gradient mismatch: analytic {x}, fd {y}"
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for trial in 0..5 {
            let params = init_network(&[5, 4, 3, 4], 100 + trial).unwrap();
            let mk = |rng: &mut rand_chacha::ChaCha8Rng, polarity| {
                let lf: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let c1: f64 = rng.gen_range(0.1..0.9);
                let tgt: Vec<f64> = (0..4)
                    .map(|_| if rng.gen_bool(0.4) { 1.0 } else { -1.0 })
                    .collect();
                concept(&lf, &[c1, 1.0 - c1], polarity, &tgt)
            };
            let a = mk(&mut rng, Polarity::Positive);
            let b = mk(
                &mut rng,
                if trial % 2 == 0 {
                    Polarity::Negative
                } else {
                    Polarity::Positive
                },
            );
            let hyper = small_hyper();
            let (_, analytic) = pair_gradient(&a, &b, &params, &hyper).unwrap();
            let fd = finite_difference(&a, &b, &params, &hyper);
            assert_grad_close(&analytic, &fd);
        }
    }

    #[test]
    fn weight_tying_accumulates_both_towers() {
        let params = init_network(&[4, 3, 2, 2], 31).unwrap();
        let a = concept(&[0.4, -0.1], &[0.8, 0.2], Polarity::Positive, &[1.0, -1.0]);
        let b = concept(&[-0.2, 0.3], &[0.25, 0.75], Polarity::Positive, &[-1.0, 1.0]);
        let hyper = CeHyperParams {
            alpha: 0.0,
            ..small_hyper()
        };
        let (_, g_pair) = pair_gradient(&a, &b, &params, &hyper).unwrap();
        // A self-pair with alpha = 0 yields exactly twice one tower's
        // prediction gradient.
        let (_, g_aa) = pair_gradient(&a, &a, &params, &hyper).unwrap();
        let (_, g_bb) = pair_gradient(&b, &b, &params, &hyper).unwrap();
        for l in 0..g_pair.layers.len() {
            for i in 0..g_pair.layers[l].0.len() {
                let expected = 0.5 * g_aa.layers[l].0[i] + 0.5 * g_bb.layers[l].0[i];
                assert!((g_pair.layers[l].0[i] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_loss_configuration_has_zero_distance_gradient() {
        // Identical positive inputs: S = 1, E = 0, distance term at its
        // minimum. The distance contribution to the gradient must vanish, so
        // alpha must not change the gradient.
        let params = init_network(&[4, 3, 2, 2], 37).unwrap();
        let a = concept(&[0.4, -0.1], &[0.8, 0.2], Polarity::Positive, &[1.0, -1.0]);
        let with_alpha = pair_gradient(&a, &a, &params, &small_hyper()).unwrap().1;
        let hyper0 = CeHyperParams {
            alpha: 0.0,
            ..small_hyper()
        };
        let without_alpha = pair_gradient(&a, &a, &params, &hyper0).unwrap().1;
        for l in 0..with_alpha.layers.len() {
            for i in 0..with_alpha.layers[l].0.len() {
                assert_eq!(with_alpha.layers[l].0[i], without_alpha.layers[l].0[i]);
            }
        }
    }
}
