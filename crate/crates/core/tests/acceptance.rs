//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them). Oracles here are
//! implemented independently of the library code paths they check.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cezsl::ce::{
    distance_loss, pair_gradient, prediction_loss, total_loss, train, Architecture,
    CeHyperParams, ConceptInput, KappaRule, NetworkGradient, PairCase, Polarity,
    SubNetworkParams,
};
use cezsl::concept_space::{
    embed_concept, infer_oov, label_distance, prime, ConceptOrigin, ConceptRecord, ConceptStore,
};
use cezsl::corpus::Document;
use cezsl::evaluation::{c_map, e_map, RankedScores, TestSubset};
use cezsl::experiment::{
    error_free_upper_bound, run_experiment, ExperimentConfig, RunOptions,
};
use cezsl::im::{
    kernel_matrix, predict_svr, train_nu_svr, Kernel, KernelMatrix, SvrConfig,
};
use cezsl::semantics::{
    bow_target, context_divergence, context_similarity, BowTarget, ContextHistogram,
    LdaConfig, SemanticsFeatures,
};

fn pass(criterion: usize, message: &str) {
    println!("[criterion {criterion:2}] PASS - {message}");
}

fn hist(values: &[f64]) -> ContextHistogram {
    ContextHistogram::new(values.to_vec()).unwrap()
}

fn bundled_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

// ---------------------------------------------------------------- 1

/// Central finite differences of the combined pair loss, h = 1e-5.
fn finite_difference_gradient(
    a: &ConceptInput,
    b: &ConceptInput,
    params: &SubNetworkParams,
    hyper: &CeHyperParams,
) -> NetworkGradient {
    let h = 1e-5;
    let mut probe = params.clone();
    let mut fd = NetworkGradient::zeros_like(params);
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

#[test]
fn criterion_01_gradient_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let polarities = [
        (Polarity::Positive, Polarity::Positive),
        (Polarity::Negative, Polarity::Negative),
        (Polarity::Positive, Polarity::Negative),
    ];
    let mut checked = 0usize;
    for trial in 0..100u64 {
        // Net 10-8-4-10: inputs are 6 label features + 4 context bins,
        // coding width 4, 10 outputs.
        let params = cezsl::ce::init_network(&[10, 8, 4, 10], 1000 + trial).unwrap();
        let mut concept = |rng: &mut ChaCha8Rng, polarity: Polarity| {
            let lf: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let ctx: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let tgt: Vec<f64> = (0..10)
                .map(|_| if rng.gen_bool(0.3) { 1.0 } else { -1.0 })
                .collect();
            ConceptInput {
                label: "x".into(),
                label_features: lf,
                context: hist(&ctx),
                polarity,
                target: BowTarget { values: tgt },
            }
        };
        let (pa, pb) = polarities[(trial % 3) as usize];
        let a = concept(&mut rng, pa);
        let b = concept(&mut rng, pb);
        let hyper = CeHyperParams {
            lambda: rng.gen_range(0.5..2.0),
            beta: Some(rng.gen_range(0.5..3.0)),
            rho: rng.gen_range(0.0..1.0),
            alpha: rng.gen_range(0.3..2.0),
            ..CeHyperParams::default()
        };
        let (_, analytic) = pair_gradient(&a, &b, &params, &hyper).unwrap();
        let fd = finite_difference_gradient(&a, &b, &params, &hyper);
        for ((aw, ab), (fw, fb)) in analytic.layers.iter().zip(&fd.layers) {
            for (x, y) in aw.iter().zip(fw).chain(ab.iter().zip(fb)) {
                // Relative error with a small floor guarding the finite
                // difference roundoff on near-zero entries.
                let denom = x.abs().max(y.abs()).max(1e-3);
                assert!(
                    ((x - y) / denom).abs() <= 1e-4,
                    "gradient mismatch on trial {trial}: analytic {x} vs fd {y}"
                );
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "gradient check took {elapsed:?}"
    );
    pass(
        1,
        &format!("analytic gradients match finite differences on 100 random nets ({checked} parameters, {elapsed:?})"),
    );
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_02_loss_fixed_points() {
    // Prediction loss is exactly zero at a zero prediction.
    for pattern in [
        vec![1.0, -1.0, -1.0, 1.0],
        vec![-1.0; 6],
        vec![1.0; 3],
    ] {
        let t = BowTarget { values: pattern };
        let zeros = vec![0.0; t.values.len()];
        assert_eq!(
            prediction_loss(&t, &zeros, KappaRule::NegativeFraction).unwrap(),
            0.0
        );
        assert_eq!(
            prediction_loss(&t, &zeros, KappaRule::PositiveFraction).unwrap(),
            0.0
        );
    }

    // Distance-loss zeros, exact within 1e-12.
    // Both-positive, S = 1, E = 0.
    let z1 = distance_loss(&[0.2, -0.4], &[0.2, -0.4], 1.0, PairCase::BothPositive, 2.0, 0.5)
        .unwrap();
    assert!(z1.abs() <= 1e-12);
    // Same-polarity pairs at E = beta (1 - S): representable values so the
    // gap is exact (E = 0.5, beta = 1, S = 0.5).
    for case in [PairCase::BothPositive, PairCase::BothNegative] {
        let z = distance_loss(&[0.5, 0.0], &[0.0, 0.0], 0.5, case, 1.0, 0.5).unwrap();
        assert!(z.abs() <= 1e-12, "{case:?} gave {z}");
    }
    // Mixed pair at E = beta, any similarity.
    for s in [0.1, 0.5, 0.99] {
        let z = distance_loss(&[2.0, 0.0], &[0.0, 0.0], s, PairCase::Mixed, 2.0, 0.5).unwrap();
        assert!(z.abs() <= 1e-12);
    }
    pass(2, "prediction and distance losses vanish exactly at their stated fixed points");
}

// ---------------------------------------------------------------- 3

/// Dense projected-gradient oracle for the nu-SVR dual, over the stacked
/// multipliers a = (alpha, alpha*). Accelerated gradient steps project back
/// onto the feasible set (box, equality, budget) with Dykstra's alternating
/// projections.
struct DualOracle {
    objective: f64,
    alpha: Vec<f64>,
    alpha_star: Vec<f64>,
    bias: f64,
}

fn oracle_solve(kernel: &KernelMatrix, y: &[f64], c: f64, nu: f64) -> DualOracle {
    let n = y.len();
    let cap = c / n as f64;
    let budget = c * nu;

    // Lipschitz bound: 2 lambda_max(K), via power iteration.
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut eig = 1.0;
    for _ in 0..50 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                w[i] += kernel.at(i, j) * v[j];
            }
        }
        eig = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if eig <= 1e-12 {
            break;
        }
        v = w.iter().map(|x| x / eig).collect();
    }
    let step = 1.0 / (2.0 * eig.max(1e-9) * 1.1);

    let feasibility_residual = |a: &[f64]| -> f64 {
        let box_violation = a
            .iter()
            .map(|v| (-v).max(v - cap).max(0.0))
            .fold(0.0, f64::max);
        let eq: f64 = (0..n).map(|i| a[i] - a[n + i]).sum();
        let over_budget = (a.iter().sum::<f64>() - budget).max(0.0);
        box_violation.max(eq.abs()).max(over_budget)
    };

    let project = |a: &mut Vec<f64>, sweeps: usize| {
        // Dykstra over {box} ∩ {sum(alpha) - sum(alpha*) = 0}
        // ∩ {sum(alpha) + sum(alpha*) <= budget}, iterated until the point
        // is genuinely feasible (per-cycle movement alone can stall early).
        let mut p = vec![0.0; 2 * n];
        let mut q = vec![0.0; 2 * n];
        let mut r = vec![0.0; 2 * n];
        for _ in 0..sweeps {
            // box
            for i in 0..2 * n {
                let t = a[i] + p[i];
                let proj = t.clamp(0.0, cap);
                p[i] = t - proj;
                a[i] = proj;
            }
            // equality hyperplane, normal s = (1,...,1,-1,...,-1)
            let mut dot = 0.0;
            for i in 0..2 * n {
                let t = a[i] + q[i];
                q[i] = t;
                dot += if i < n { t } else { -t };
            }
            let shift = dot / (2.0 * n as f64);
            for i in 0..2 * n {
                let t = q[i] - if i < n { shift } else { -shift };
                q[i] -= t;
                a[i] = t;
            }
            // budget half-space, normal 1
            let mut sum = 0.0;
            for i in 0..2 * n {
                let t = a[i] + r[i];
                r[i] = t;
                sum += t;
            }
            let excess = ((sum - budget) / (2.0 * n as f64)).max(0.0);
            for i in 0..2 * n {
                let t = r[i] - excess;
                r[i] -= t;
                a[i] = t;
            }
            if feasibility_residual(a) < 1e-13 {
                break;
            }
        }
    };

    let objective = |a: &[f64]| -> f64 {
        let lambda: Vec<f64> = (0..n).map(|i| a[i] - a[n + i]).collect();
        let mut obj = 0.0;
        for i in 0..n {
            let mut hi = 0.0;
            for j in 0..n {
                hi += kernel.at(i, j) * lambda[j];
            }
            obj += 0.5 * lambda[i] * hi + y[i] * lambda[i];
        }
        obj
    };

    let gradient = |a: &[f64], g: &mut Vec<f64>| {
        let lambda: Vec<f64> = (0..n).map(|i| a[i] - a[n + i]).collect();
        for i in 0..n {
            let mut hi = 0.0;
            for j in 0..n {
                hi += kernel.at(i, j) * lambda[j];
            }
            g[i] = hi + y[i];
            g[n + i] = -(hi + y[i]);
        }
    };

    // Projected accelerated gradient; the objective is not monotone along
    // the momentum sequence, so the best (feasible) iterate is tracked.
    let mut x = vec![0.0; 2 * n];
    project(&mut x, 3000);
    let mut x_prev = x.clone();
    let mut t_prev = 1.0f64;
    let mut best = (objective(&x), x.clone());
    let mut g = vec![0.0; 2 * n];
    let mut stall = 0usize;
    for _ in 0..120_000 {
        let t = (1.0 + (1.0 + 4.0 * t_prev * t_prev).sqrt()) / 2.0;
        let beta = (t_prev - 1.0) / t;
        let momentum: Vec<f64> = x
            .iter()
            .zip(&x_prev)
            .map(|(cur, prev)| cur + beta * (cur - prev))
            .collect();
        gradient(&momentum, &mut g);
        let mut next: Vec<f64> = momentum
            .iter()
            .zip(&g)
            .map(|(v, grad)| v - step * grad)
            .collect();
        project(&mut next, 3000);
        x_prev = x;
        x = next;
        t_prev = t;
        let obj = objective(&x);
        if obj < best.0 - 1e-15 && feasibility_residual(&x) < 1e-12 {
            best = (obj, x.clone());
            stall = 0;
        } else {
            stall += 1;
            if stall > 4000 {
                break;
            }
        }
    }
    let mut a = best.1;
    project(&mut a, 20_000);

    // Bias from the KKT conditions on the oracle solution.
    let lambda: Vec<f64> = (0..n).map(|i| a[i] - a[n + i]).collect();
    let g_of = |i: usize| -> f64 {
        let mut hi = 0.0;
        for j in 0..n {
            hi += kernel.at(i, j) * lambda[j];
        }
        hi + y[i]
    };
    let tol = 1e-6 * cap;
    let level = |values: &dyn Fn(usize) -> f64, upper_at_zero: bool| -> f64 {
        let mut free_sum = 0.0;
        let mut free_n = 0;
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for i in 0..n {
            let v = values(i);
            let gi = g_of(i);
            if v > tol && v < cap - tol {
                free_sum += gi;
                free_n += 1;
            } else if v <= tol {
                if upper_at_zero {
                    upper = upper.min(gi);
                } else {
                    lower = lower.max(gi);
                }
            } else if upper_at_zero {
                lower = lower.max(gi);
            } else {
                upper = upper.min(gi);
            }
        }
        if free_n > 0 {
            free_sum / free_n as f64
        } else if lower.is_finite() && upper.is_finite() {
            (lower + upper) / 2.0
        } else if lower.is_finite() {
            lower
        } else {
            upper
        }
    };
    let alpha = a[..n].to_vec();
    let alpha_star = a[n..].to_vec();
    let r1 = level(&|i| alpha[i], true);
    let r2 = level(&|i| alpha_star[i], false);

    DualOracle {
        objective: objective(&a),
        alpha,
        alpha_star,
        bias: (r1 + r2) / 2.0,
    }
}

#[test]
fn criterion_03_nu_svr_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x53F2);
    for problem in 0..50usize {
        let n = rng.gen_range(2..=30);
        let dim = rng.gen_range(1..=4);
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = inputs
            .iter()
            .map(|x| {
                let base: f64 = x.iter().enumerate().map(|(k, v)| (k as f64 + 1.0) * v).sum();
                (base * 0.7).sin() + 0.2 * rng.gen_range(-1.0..1.0)
            })
            .collect();
        let kernel = if problem % 2 == 0 {
            Kernel::Linear
        } else {
            Kernel::Rbf {
                gamma: rng.gen_range(0.3..2.0),
            }
        };
        let c = [0.5, 1.0, 5.0][problem % 3];
        let nu = rng.gen_range(0.1..0.9);
        let config = SvrConfig {
            nu,
            c,
            kernel: kernel.clone(),
            tolerance: 1e-10,
            max_iterations: 2_000_000,
        };
        let model = train_nu_svr(&inputs, &y, &config).unwrap();

        // Feasibility residuals.
        let cap = c / n as f64;
        let eq: f64 = model
            .alpha
            .iter()
            .zip(&model.alpha_star)
            .map(|(a, s)| a - s)
            .sum();
        assert!(eq.abs() <= 1e-8, "problem {problem}: equality residual {eq}");
        let budget: f64 = model
            .alpha
            .iter()
            .zip(&model.alpha_star)
            .map(|(a, s)| a + s)
            .sum();
        assert!(budget <= c * nu + 1e-8, "problem {problem}: budget {budget}");
        for (a, s) in model.alpha.iter().zip(&model.alpha_star) {
            assert!(*a >= -1e-10 && *a <= cap + 1e-10);
            assert!(*s >= -1e-10 && *s <= cap + 1e-10);
        }

        // Independent projected-gradient solve of the same dual.
        let k = kernel_matrix(&inputs, &kernel);
        let oracle = oracle_solve(&k, &y, c, nu);
        assert!(
            (model.dual_objective - oracle.objective).abs() <= 1e-6,
            "problem {problem} (n={n}, {kernel:?}): solver objective {} vs oracle {}",
            model.dual_objective,
            oracle.objective
        );

        // Predictions at fresh query points.
        for _ in 0..10 {
            let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ours = predict_svr(&model, &q);
            let mut theirs = oracle.bias;
            for i in 0..n {
                theirs += (oracle.alpha_star[i] - oracle.alpha[i]) * kernel.eval(&inputs[i], &q);
            }
            assert!(
                (ours - theirs).abs() <= 1e-3,
                "problem {problem}: prediction {ours} vs oracle {theirs}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "oracle check took {elapsed:?}");
    pass(
        3,
        &format!("SMO solutions match the projected-gradient dual oracle on 50 problems ({elapsed:?})"),
    );
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_04_metric_fixtures() {
    // Example-based fixture: truth {a,b}, ranking [a,x,b,y].
    let ranked = RankedScores {
        doc_id: "d".into(),
        scores: vec![
            ("a".into(), 0.9),
            ("x".into(), 0.6),
            ("b".into(), 0.4),
            ("y".into(), 0.1),
        ],
    };
    let truth: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
    assert_eq!(e_map(&truth, &ranked).unwrap(), 0.75);

    // Concept-based fixture: positives at ranks 1 and 3 of 4.
    let scored = vec![
        ("i1".to_string(), 4.0),
        ("i2".to_string(), 3.0),
        ("i3".to_string(), 2.0),
        ("i4".to_string(), 1.0),
    ];
    let positives: BTreeSet<String> = ["i1", "i3"].iter().map(|s| s.to_string()).collect();
    let ap = c_map(&scored, &positives).unwrap();
    // Hand calculation at identical precision: six levels at 1, five at 2/3.
    let mut expected = 0.0;
    for level in 0..=10 {
        expected += if level <= 5 { 1.0 } else { 2.0 / 3.0 };
    }
    expected /= 11.0;
    assert_eq!(ap, expected);
    assert!((ap - 28.0 / 33.0).abs() < 1e-15);

    // Invariance under strictly monotone transforms on random fixtures.
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..100 {
        let n = rng.gen_range(3..12);
        let scores: Vec<(String, f64)> = (0..n)
            .map(|i| (format!("l{i}"), rng.gen_range(-2.0..2.0)))
            .collect();
        let truth: BTreeSet<String> = (0..n)
            .filter(|_| rng.gen_bool(0.4))
            .map(|i| format!("l{i}"))
            .collect();
        if truth.is_empty() {
            continue;
        }
        let scale = rng.gen_range(0.1..4.0);
        let shift = rng.gen_range(-3.0..3.0);
        let transformed: Vec<(String, f64)> = scores
            .iter()
            .map(|(l, s)| (l.clone(), (s * scale + shift).exp()))
            .collect();
        let r1 = RankedScores::from_scores("d", scores.clone());
        let r2 = RankedScores::from_scores("d", transformed.clone());
        assert_eq!(e_map(&truth, &r1).unwrap(), e_map(&truth, &r2).unwrap());

        let inst: Vec<(String, f64)> = scores
            .iter()
            .map(|(l, s)| (l.replace('l', "i"), *s))
            .collect();
        let inst_t: Vec<(String, f64)> = transformed
            .iter()
            .map(|(l, s)| (l.replace('l', "i"), *s))
            .collect();
        let pos: BTreeSet<String> = truth.iter().map(|l| l.replace('l', "i")).collect();
        assert_eq!(c_map(&inst, &pos).unwrap(), c_map(&inst_t, &pos).unwrap());
    }
    pass(4, "hand-computed MAP fixtures reproduce exactly; both MAPs are rank-determined");
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_05_priming_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9121);
    for case in 0..1000usize {
        let n_labels = rng.gen_range(2..8);
        let dim = rng.gen_range(1..5);
        let labels: Vec<String> = (0..n_labels).map(|i| format!("l{i}")).collect();
        let n_records = rng.gen_range(n_labels..3 * n_labels);
        let records: Vec<ConceptRecord> = (0..n_records)
            .map(|i| ConceptRecord {
                label: labels[i % n_labels].clone(),
                doc_id: format!("d{i}"),
                embedding: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                origin: ConceptOrigin::SemanticsSet,
            })
            .collect();
        let store = ConceptStore::new(dim, records.clone());
        let query: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ranked = prime(&query, &store, &labels, "q").unwrap();

        let total: f64 = ranked.scores.iter().map(|(_, s)| s).sum();
        assert!((total - 1.0).abs() <= 1e-9, "case {case}: sum {total}");
        assert!(ranked.scores.iter().all(|(_, s)| *s >= 0.0));

        // Brute-force minimum distance per label.
        for label in &labels {
            let brute = records
                .iter()
                .filter(|r| &r.label == label)
                .map(|r| {
                    r.embedding
                        .iter()
                        .zip(&query)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert_eq!(label_distance(&query, label, &store).unwrap(), brute);
        }
        // argmin distance carries the maximal score.
        let argmin = labels
            .iter()
            .min_by(|a, b| {
                label_distance(&query, a, &store)
                    .unwrap()
                    .partial_cmp(&label_distance(&query, b, &store).unwrap())
                    .unwrap()
            })
            .unwrap();
        assert_eq!(&ranked.scores[0].0, argmin, "case {case}");
    }
    pass(5, "priming yields probability rankings consistent with brute-force minimum distances on 1000 stores");
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_06_oov_inference() {
    // A small trained model; cases draw random label subsets against it.
    let mut docs = Vec::new();
    for i in 0..40 {
        let g = i % 2;
        let a = format!("g{g}_{}", i % 4);
        let b = format!("g{g}_{}", (i + 1) % 4);
        docs.push(Document::new(format!("d{i:02}"), vec![a, b]).unwrap());
    }
    let vocab: Vec<String> = (0..2)
        .flat_map(|g| (0..4).map(move |i| format!("g{g}_{i}")))
        .collect();
    let refs: Vec<&Document> = docs.iter().collect();
    let features = SemanticsFeatures::build(
        &refs,
        &vocab,
        &LdaConfig {
            topic_count: 2,
            alpha: Some(0.5),
            iterations: 60,
            infer_sweeps: 40,
            seed: 3,
            ..LdaConfig::default()
        },
    )
    .unwrap();
    let hyper = CeHyperParams {
        epochs: 20,
        learning_rate: 0.05,
        seed: 8,
        ..CeHyperParams::default()
    };
    let arch = Architecture {
        hidden_sizes: vec![8],
        code_dim: 4,
    };
    let (model, _) = train(&features, &refs, &[], &hyper, &arch).unwrap();

    // Singleton identity, exact.
    let single = Document::new("q", vec!["g0_1".to_string(), "zz_oov".to_string()]).unwrap();
    let inferred = infer_oov(&model, &features, &single).unwrap();
    let anchor = Document::new("q", vec!["g0_1".to_string()]).unwrap();
    let direct = embed_concept(&model, &features, "g0_1", &anchor).unwrap();
    assert_eq!(inferred, direct);

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..100usize {
        let count = rng.gen_range(1..=4);
        let mut iv: Vec<String> = Vec::new();
        while iv.len() < count {
            let l = vocab[rng.gen_range(0..vocab.len())].clone();
            if !iv.contains(&l) {
                iv.push(l);
            }
        }
        let mut labels = iv.clone();
        labels.push("unknown_label".to_string());
        let doc = Document::new(format!("case{case}"), labels.clone()).unwrap();
        let centroid = infer_oov(&model, &features, &doc).unwrap();

        // Permutation invariance.
        let mut permuted = labels.clone();
        permuted.reverse();
        let doc_rev = Document::new(format!("case{case}"), permuted).unwrap();
        assert_eq!(infer_oov(&model, &features, &doc_rev).unwrap(), centroid);

        // Coordinate-wise inside the bounding box of the IV embeddings.
        let iv_doc = Document::new(format!("case{case}"), iv.clone()).unwrap();
        let embeddings: Vec<Vec<f64>> = iv
            .iter()
            .map(|l| embed_concept(&model, &features, l, &iv_doc).unwrap())
            .collect();
        for coord in 0..model.code_dim() {
            let lo = embeddings
                .iter()
                .map(|e| e[coord])
                .fold(f64::INFINITY, f64::min);
            let hi = embeddings
                .iter()
                .map(|e| e[coord])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                centroid[coord] >= lo - 1e-12 && centroid[coord] <= hi + 1e-12,
                "case {case} coordinate {coord} outside box"
            );
        }
    }
    pass(6, "OOV centroids honor the singleton identity, permutation invariance and the bounding box on 100 cases");
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_07_divergence_and_similarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1F);
    let random_hist = |rng: &mut ChaCha8Rng, k: usize| {
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        hist(&raw.iter().map(|v| v / total).collect::<Vec<_>>())
    };
    for _ in 0..200 {
        let k = rng.gen_range(2..6);
        let a = random_hist(&mut rng, k);
        let b = random_hist(&mut rng, k);
        let d_ab = context_divergence(&a, &b).unwrap();
        let d_ba = context_divergence(&b, &a).unwrap();
        assert_eq!(d_ab, d_ba);
        assert!(d_ab >= 0.0);
        // Pointwise: S = exp(-lambda/2 * KL).
        for lambda in [0.5, 1.0, 2.5] {
            let s = context_similarity(&a, &b, lambda).unwrap();
            assert_eq!(s, (-lambda / 2.0 * d_ab).exp());
            assert!(s > 0.0 && s <= 1.0);
        }
        // Zero iff equal.
        assert!(context_divergence(&a, &a).unwrap().abs() <= 1e-12);
        if d_ab <= 1e-12 {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }
    let a = hist(&[0.9, 0.1]);
    let b = hist(&[0.1, 0.9]);
    let expected = 0.8 * 9.0f64.ln();
    assert!(
        (context_divergence(&a, &b).unwrap() - expected).abs() <= 1e-9,
        "divergence {} vs {expected}",
        context_divergence(&a, &b).unwrap()
    );
    pass(7, "divergence is symmetric, nonnegative, zero iff equal; the (0.9,0.1) case and the similarity law check out");
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_08_end_to_end_synthetic_zsl() {
    let start = Instant::now();
    let config = ExperimentConfig::load(&bundled_config("synthetic.json")).unwrap();
    let mut factors = Vec::new();
    let mut dominated = 0usize;
    for seed in 0..5u64 {
        let dir_full = tempfile::tempdir().unwrap();
        let dir_free = tempfile::tempdir().unwrap();
        let full = run_experiment(
            &config,
            &RunOptions {
                out_dir: Some(dir_full.path().to_path_buf()),
                trial: None,
                seed: Some(seed),
            },
        )
        .unwrap();
        let free = error_free_upper_bound(
            &config,
            &RunOptions {
                out_dir: Some(dir_free.path().to_path_buf()),
                trial: None,
                seed: Some(seed),
            },
        )
        .unwrap();
        let full_zsl = full.report.subsets[&TestSubset::Zsl].e_map.mean;
        let free_zsl = free.report.subsets[&TestSubset::Zsl].e_map.mean;
        if free_zsl >= full_zsl {
            dominated += 1;
        }

        // Expected E-MAP of a uniform-random ranker: per instance, every
        // precision-at-k has expectation |truth| / |labels|.
        let corpus: cezsl::experiment::Artifact<cezsl::corpus::Corpus> =
            cezsl::experiment::read_artifact(
                &dir_full
                    .path()
                    .join("trial_000")
                    .join(format!("corpus.seed{seed}.json")),
                "corpus",
                None,
            )
            .unwrap();
        let plan: cezsl::experiment::Artifact<cezsl::corpus::SplitPlan> =
            cezsl::experiment::read_artifact(
                &dir_full
                    .path()
                    .join("trial_000")
                    .join(format!("split.seed{seed}.json")),
                "split_plan",
                None,
            )
            .unwrap();
        let universe = plan.data.partition().universe().len() as f64;
        let zsl: BTreeSet<&str> = plan.data.zsl_labels.iter().map(String::as_str).collect();
        let docs: BTreeMap<&str, &Document> = corpus
            .data
            .documents
            .iter()
            .map(|d| (d.doc_id.as_str(), d))
            .collect();
        let mut baseline = 0.0;
        let mut n = 0usize;
        for id in &plan.data.im_tst {
            let doc = docs[id.as_str()];
            if doc.labels.iter().any(|l| zsl.contains(l.as_str())) {
                baseline += doc.labels.len() as f64 / universe;
                n += 1;
            }
        }
        baseline /= n as f64;
        factors.push(full_zsl / baseline);
    }
    let mean_factor = factors.iter().sum::<f64>() / factors.len() as f64;
    assert!(
        mean_factor >= 2.0,
        "ZSL E-MAP beats random by {mean_factor:.2}x only: {factors:?}"
    );
    assert!(
        dominated >= 4,
        "error-free run dominated in {dominated}/5 seeds"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "end-to-end took {elapsed:?}");
    pass(
        8,
        &format!(
            "ZSL E-MAP beats the random ranker {mean_factor:.2}x on average; error-free bound dominates {dominated}/5 seeds ({elapsed:?})"
        ),
    );
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_09_regression_statistics() {
    // Two-instance fixture, hand calculation: errors 1 and 3 average to 2;
    // a two-record store at distance 5 scatters to 5/2; ratio 0.8.
    let store = ConceptStore::new(
        2,
        vec![
            ConceptRecord {
                label: "a".into(),
                doc_id: "d1".into(),
                embedding: vec![0.0, 0.0],
                origin: ConceptOrigin::SemanticsSet,
            },
            ConceptRecord {
                label: "b".into(),
                doc_id: "d2".into(),
                embedding: vec![3.0, 4.0],
                origin: ConceptOrigin::SemanticsSet,
            },
        ],
    );
    let constant_model = cezsl::im::ImModel {
        models: vec![
            zero_svr(),
            zero_svr(),
        ],
        input_dim: 1,
        target_dim: 2,
    };
    let test = vec![
        (vec![0.0], vec![1.0, 0.0]),
        (vec![0.0], vec![0.0, 3.0]),
    ];
    let stats = cezsl::im::regression_error(&constant_model, &test, &store).unwrap();
    assert_eq!(stats.mean_error, 2.0);
    assert_eq!(stats.scattering, 2.5);
    assert_eq!(stats.relative_error, 0.8);

    // Trend: relative error over coding dimensions {4, 16, 64}, three seeds.
    let base = ExperimentConfig::load(&bundled_config("synthetic.json")).unwrap();
    let dims = [4usize, 16, 64];
    let mut measured: Vec<(u64, Vec<f64>)> = Vec::new();
    for seed in 0..3u64 {
        let mut row = Vec::new();
        for dim in dims {
            let mut config = base.clone();
            config.ce.architecture.code_dim = dim;
            let dir = tempfile::tempdir().unwrap();
            let outcome = run_experiment(
                &config,
                &RunOptions {
                    out_dir: Some(dir.path().to_path_buf()),
                    trial: None,
                    seed: Some(1000 + seed),
                },
            )
            .unwrap();
            let regression = outcome.outcomes[0]
                .1
                .regression
                .as_ref()
                .expect("full runs report regression statistics")
                .clone();
            row.push(regression.relative_error);
        }
        measured.push((seed, row));
    }
    println!("[criterion  9] relative regression error by coding dimension {dims:?}:");
    for (seed, row) in &measured {
        println!(
            "[criterion  9]   seed {seed}: {}",
            row.iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(" -> ")
        );
    }
    let trend_holds = measured
        .iter()
        .all(|(_, row)| row[0] > row[1] && row[1] > row[2]);
    if !trend_holds {
        println!(
            "[criterion  9] FAIL - hand fixtures are exact, but the relative error does not \
             decrease with coding dimension"
        );
    }
    assert!(
        trend_holds,
        "relative error must decrease over dimensions {dims:?}; measured {measured:?}.\n\
         Known limitation: with the coding layer bounded to (-1,1) and the spread target \
         proportional to sqrt(dim), both the mean regression error and the concept scattering \
         scale with sqrt(dim), so their ratio does not fall as the dimension grows."
    );
    pass(9, "regression statistics match hand fixtures and the error ratio falls with coding dimension");
}

fn zero_svr() -> cezsl::im::SvrModel {
    cezsl::im::SvrModel {
        support_vectors: vec![],
        coefficients: vec![],
        bias: 0.0,
        epsilon: 0.0,
        kernel: Kernel::Linear,
        alpha: vec![],
        alpha_star: vec![],
        dual_objective: 0.0,
        iterations: 0,
        converged: true,
    }
}

// ---------------------------------------------------------------- 10

fn tree_digest(root: &Path) -> BTreeMap<String, String> {
    use sha2::{Digest, Sha256};
    let mut digests = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().to_string();
                let bytes = std::fs::read(&path).unwrap();
                let mut hasher = Sha256::new();
                hasher.update(&bytes);
                digests.insert(rel, format!("{:x}", hasher.finalize()));
            }
        }
    }
    digests
}

#[test]
fn criterion_10_determinism() {
    let config = ExperimentConfig::load(&bundled_config("synthetic_smoke.json")).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        run_experiment(
            &config,
            &RunOptions {
                out_dir: Some(dir.path().to_path_buf()),
                trial: None,
                seed: None,
            },
        )
        .unwrap();
    }
    let a = tree_digest(dir_a.path());
    let b = tree_digest(dir_b.path());
    assert!(!a.is_empty());
    assert_eq!(a, b, "artifact trees differ between identical runs");
    pass(
        10,
        &format!("two identical runs produce hash-identical artifact trees ({} files)", a.len()),
    );
}
