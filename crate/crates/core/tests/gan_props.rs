use gmgan_core::gan::{
    loss_d_sup, loss_d_unsup, loss_g_sup, loss_g_unsup, make_label_map, GanArchitecture, GanModel,
    Supervision, PROB_CLAMP,
};
use gmgan_core::latent::{MixturePrior, SigmaScale};
use gmgan_core::nn::{finite_diff_check_with, Tape, Tensor, WeightInit};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn probs(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-0.2f64..1.2, rows * cols)
        .prop_map(move |v| Tensor::new(vec![rows, cols], v).unwrap())
}

/// Per-entry binary cross-entropy written out directly.
fn bce(p: f64, t: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

proptest! {
    #[test]
    fn losses_are_finite_and_non_negative(real in probs(4, 1), fake in probs(3, 1)) {
        let g = loss_g_unsup(&fake).unwrap();
        let d = loss_d_unsup(&real, &fake).unwrap();
        prop_assert!(g.is_finite() && g >= 0.0);
        prop_assert!(d.is_finite() && d >= 0.0);
        let oracle_g: f64 = fake.data().iter().map(|&p| bce(p, 1.0)).sum::<f64>() / 3.0;
        prop_assert!((g - oracle_g).abs() < 1e-12);
    }

    #[test]
    fn single_class_supervision_equals_unsupervised(real in probs(5, 1), fake in probs(2, 1)) {
        let map = make_label_map(1, 1, None).unwrap();
        let g = loss_g_sup(&fake, &[0, 0], &map).unwrap();
        prop_assert!((g - loss_g_unsup(&fake).unwrap()).abs() < 1e-12);
        let d = loss_d_sup(&real, &[0; 5], &fake).unwrap();
        prop_assert!((d - loss_d_unsup(&real, &fake).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn supervised_losses_match_direct_sums(real in probs(3, 4), fake in probs(2, 4), labels in prop::collection::vec(0usize..4, 3)) {
        let map = make_label_map(8, 4, None).unwrap();
        let comps = [5usize, 2];
        let g = loss_g_sup(&fake, &comps, &map).unwrap();
        let mut oracle = 0.0;
        for (r, &k) in comps.iter().enumerate() {
            for m in 0..4 {
                oracle += bce(fake.row(r)[m], if m == k % 4 { 1.0 } else { 0.0 });
            }
        }
        prop_assert!((g - oracle / 2.0).abs() < 1e-12);
        let d = loss_d_sup(&real, &labels, &fake).unwrap();
        let mut real_sum = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            for m in 0..4 {
                real_sum += bce(real.row(r)[m], if m == y { 1.0 } else { 0.0 });
            }
        }
        let fake_sum: f64 = fake.data().iter().map(|&p| bce(p, 0.0)).sum();
        prop_assert!((d - (real_sum / 3.0 + fake_sum / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn discriminator_commutes_with_row_permutations(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = small_model(&mut rng, WeightInit { std: 0.5 });
        let x = Tensor::new(vec![6, 2], (0..12).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let mut order: Vec<usize> = (0..6).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(perm_seed));
        let out = model.discriminate(&x).unwrap();
        let permuted = model.discriminate(&x.select_rows(&order)).unwrap();
        for (i, &o) in order.iter().enumerate() {
            prop_assert_eq!(permuted.row(i), out.row(o));
        }
    }
}

fn small_model(rng: &mut ChaCha8Rng, init: WeightInit) -> GanModel {
    let arch = GanArchitecture {
        generator_hidden: vec![5],
        discriminator_hidden: vec![4],
        init,
        ..GanArchitecture::toy()
    };
    GanModel::build(&arch, 3, 2, Supervision::Unsupervised, None, None, rng).unwrap()
}

#[test]
fn generator_loss_gradients_through_the_latent_pass_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = small_model(&mut rng, WeightInit { std: 0.6 });
    let prior = MixturePrior::init_static(3, 3, 1.0, 0.5, &mut rng)
        .unwrap()
        .into_dynamic(gmgan_core::latent::CovarianceKind::Full);
    let comps = [0usize, 2, 1, 2];
    let eps = Tensor::new(vec![4, 3], (0..12).map(|i| ((i * 7) as f64).cos()).collect()).unwrap();
    let targets = Tensor::filled(&[4, 1], 1.0);
    let loss = |tape: &mut Tape, m: &GanModel, p: &MixturePrior| {
        let z = p.latent_on_tape(tape, &comps, eps.clone(), SigmaScale::ONE, true)?;
        let x = m.generate_on_tape(tape, z, &comps, true)?;
        let d = m.discriminate_on_tape(tape, x, false)?;
        gmgan_core::gan::bce_sum_on_tape(tape, d, &targets)
    };
    let g_err = finite_diff_check_with(&model.generator.params, 1e-6, |tape, g| {
        let mut m = model.clone();
        m.generator.params = g.clone();
        loss(tape, &m, &prior)
    })
    .unwrap();
    let p_err = finite_diff_check_with(prior.params(), 1e-6, |tape, pp| {
        let mut p = prior.clone();
        *p.params_mut() = pp.clone();
        loss(tape, &model, &p)
    })
    .unwrap();
    assert!(g_err < 1e-4, "generator relative error {g_err}");
    assert!(p_err < 1e-4, "prior relative error {p_err}");
}

#[test]
fn conditional_generator_reads_the_component() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let arch = GanArchitecture {
        init: WeightInit { std: 0.5 },
        ..GanArchitecture::toy()
    };
    let model = GanModel::build(
        &arch,
        4,
        2,
        Supervision::Supervised { classes: 3 },
        Some(make_label_map(3, 3, None).unwrap()),
        Some(3),
        &mut rng,
    )
    .unwrap();
    let z = Tensor::zeros(&[2, 4]);
    let a = model.generate_for(&z, Some(&[0, 1])).unwrap();
    assert_ne!(a.row(0), a.row(1));
    assert!(model.generate(&z).is_err());
}
