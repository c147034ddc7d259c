use proptest::prelude::*;

use autoclip::dp::clip_factor;
use autoclip::models::{per_sample_gradients, sample_losses, Activation, LossKind};
use autoclip::numeric::{group_norms, norm, poisson_subsample};
use autoclip::theory::{distance_m, envelope, inverse_m, inverse_m_supremum, min_f, EnvelopeMode};
use autoclip::{clip_and_sum, privatize, ClipPolicy, ClipRule, Dataset, LayerPartition, Matrix, ModelSpec, RngStream, Thresholds};

fn rule() -> impl Strategy<Value = ClipRule> {
    let r = 1e-3..10.0f64;
    let gamma = 1e-4..1.0f64;
    prop_oneof![
        r.clone().prop_map(|r| ClipRule::Abadi { r }),
        r.clone().prop_map(|r| ClipRule::ReParam { r }),
        r.clone().prop_map(|r| ClipRule::Global { r }),
        r.clone().prop_map(|r| ClipRule::AutoV { r }),
        (r, gamma.clone()).prop_map(|(r, gamma)| ClipRule::AutoS { r, gamma }),
        gamma.prop_map(|gamma| ClipRule::AutoSFree { gamma }),
    ]
}

fn grad(d: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0..1.0f64, d), -6.0..6.0f64).prop_map(|(v, e)| v.into_iter().map(|x| x * 10f64.powf(e)).collect())
}

proptest! {
    #[test]
    fn clipped_norm_is_bounded_by_sensitivity(rule in rule(), g in grad(12)) {
        let c = clip_and_sum(&ClipPolicy::from(rule), &Matrix::from_rows(&[g])?)?;
        prop_assert!(norm(&c.sum) <= rule.sensitivity() * (1.0 + 1e-12));
    }

    #[test]
    fn per_layer_norm_is_bounded(r in 1e-2..5.0f64, g in grad(9), sizes in (1usize..4, 1usize..4)) {
        let part = LayerPartition::from_sizes(&[sizes.0, sizes.1, 9 - sizes.0 - sizes.1])?;
        let p = ClipPolicy::per_layer(ClipRule::AutoV { r }, part, Thresholds::Uniform(r))?;
        let c = clip_and_sum(&p, &Matrix::from_rows(&[g])?)?;
        prop_assert!(norm(&c.sum) <= r * (1.0 + 1e-12));
    }

    #[test]
    fn auto_s_preserves_norm_order(r in 1e-2..5.0f64, gamma in 1e-4..1.0f64, a in 0.0..100.0f64, b in 0.0..100.0f64) {
        let rule = ClipRule::AutoS { r, gamma };
        let (ca, cb) = (clip_factor(&rule, a) * a, clip_factor(&rule, b) * b);
        prop_assert_eq!(a < b, ca < cb);
    }

    #[test]
    fn auto_v_is_scale_invariant(r in 1e-2..5.0f64, g in grad(6), k in 1e-3..1e3f64) {
        let p = ClipPolicy::auto_v(r);
        let a = clip_and_sum(&p, &Matrix::from_rows(std::slice::from_ref(&g))?)?;
        let b = clip_and_sum(&p, &Matrix::from_rows(&[g.iter().map(|x| x * k).collect()])?)?;
        for (x, y) in a.sum.iter().zip(b.sum.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * r);
        }
    }

    #[test]
    fn group_norms_compose(v in prop::collection::vec(-10.0..10.0f64, 10), cut in 1usize..9) {
        let part = LayerPartition::from_sizes(&[cut, 10 - cut])?;
        let n = group_norms(&v, &part)?;
        prop_assert!((n.iter().map(|x| x * x).sum::<f64>().sqrt() - norm(&v)).abs() <= 1e-12 * norm(&v).max(1.0));
    }

    #[test]
    fn noise_is_shared_across_thresholds(seed in 0u64..1000, g in grad(4), r in 1e-2..5.0f64) {
        // Scaling the threshold scales the whole privatized sum.
        let rng = RngStream::new(seed, "noise/step/1");
        let grads = Matrix::from_rows(&[g])?;
        let a = privatize(&ClipPolicy::auto_s(r, 0.01), &grads, 1.5, &rng)?;
        let b = privatize(&ClipPolicy::auto_s_free(0.01), &grads, 1.5, &rng)?;
        for (x, y) in a.grad.iter().zip(b.grad.iter()) {
            prop_assert!((x - r * y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn poisson_sample_is_sorted_and_in_range(seed in 0u64..1000, n in 1usize..500, p in 0.0..1.0f64) {
        let idx = poisson_subsample(&RngStream::new(seed, "sample"), n, p)?;
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(idx.iter().all(|&i| i < n));
    }

    #[test]
    fn mlp_gradients_match_differences(seed in 0u64..200, x in prop::collection::vec(-1.0..1.0f64, 3), y in 0usize..2) {
        let spec = ModelSpec::mlp(vec![3, 4, 2], Activation::Tanh, LossKind::SoftmaxCe);
        let data = Dataset::new(Matrix::from_rows(&[x])?, vec![y as f64], "p")?;
        let w = spec.init_params(&RngStream::new(seed, "init"));
        let g = per_sample_gradients(&spec, &w, &data)?;
        let h = 1e-6;
        for j in 0..w.len() {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += h;
            down[j] -= h;
            let fd = (sample_losses(&spec, &up, &data)?[0] - sample_losses(&spec, &down, &data)?[0]) / (2.0 * h);
            prop_assert!((fd - g.row(0)[j]).abs() <= 1e-6 * fd.abs().max(1e-2));
        }
    }

    #[test]
    fn m_round_trip(r in 1.01..10.0f64, xi in 0.01..30.0f64, gamma in 1e-3..1.0f64, u in 0.0..0.95f64) {
        let y = u * inverse_m_supremum(r, gamma);
        let x = inverse_m(y, r, xi, gamma)?;
        prop_assert!((distance_m(x, r, xi, gamma)? - y).abs() <= 1e-9 * y.max(1e-12));
    }

    #[test]
    fn min_f_is_positive_and_decreasing_in_r(r in 1.0..20.0f64, gamma in 1e-3..5.0f64) {
        let (a, b) = (min_f(r, gamma)?, min_f(r * 1.1, gamma)?);
        prop_assert!(a > 0.0 && b < a);
    }

    #[test]
    fn envelopes_bracket_the_points(ys in prop::collection::vec(-5.0..5.0f64, 3..30)) {
        let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
        let lo = envelope(&pts, EnvelopeMode::LowerConvex)?;
        let hi = envelope(&pts, EnvelopeMode::UpperConcave)?;
        for &(x, y) in &pts {
            prop_assert!(lo.eval(x).unwrap() <= y + 1e-12);
            prop_assert!(hi.eval(x).unwrap() >= y - 1e-12);
        }
        let k: Vec<(f64, f64)> = lo.knots().collect();
        for w in k.windows(3) {
            let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
            prop_assert!(s2 >= s1 - 1e-12);
        }
    }
}
