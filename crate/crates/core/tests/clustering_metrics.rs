use gmgan_core::clustering::{
    acc, acc_from_table, cluster, generate_labeled_synthetic, max_weight_assignment, nmi,
    ClusterConfig, ContingencyTable,
};
use gmgan_core::data::{Dataset, Modality, Normalization};
use gmgan_core::gan::{GanArchitecture, GanModel, Supervision};
use gmgan_core::latent::MixturePrior;
use gmgan_core::nn::{Tensor, WeightInit};
use gmgan_core::scorer::ClassifierConfig;
use gmgan_core::trainer::TrainConfig;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Best matching by enumerating every permutation.
fn brute_force(weights: &[Vec<u64>]) -> u64 {
    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }
    permutations(weights.len())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| weights[i][j]).sum())
        .max()
        .unwrap_or(0)
}

/// `Σ p log p` form of NMI over the contingency table.
fn nmi_oracle(table: &[Vec<u64>]) -> f64 {
    let n: f64 = table.iter().flatten().sum::<u64>() as f64;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64 / n).collect();
    let cols: Vec<f64> = (0..table[0].len())
        .map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64 / n)
        .collect();
    let h = |p: &[f64]| -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>();
    let mut mi = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &c) in r.iter().enumerate() {
            if c > 0 {
                let p = c as f64 / n;
                mi += p * (p / (rows[i] * cols[j])).ln();
            }
        }
    }
    mi / (h(&rows) * h(&cols)).sqrt()
}

fn expand(table: &[Vec<u64>]) -> (Vec<usize>, Vec<usize>) {
    let (mut y, mut c) = (Vec::new(), Vec::new());
    for (i, r) in table.iter().enumerate() {
        for (j, &n) in r.iter().enumerate() {
            for _ in 0..n {
                y.push(i);
                c.push(j);
            }
        }
    }
    (y, c)
}

fn table(max_side: usize) -> impl Strategy<Value = Vec<Vec<u64>>> {
    (1..=max_side).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0u64..20, n), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn hungarian_equals_brute_force(t in table(6)) {
        prop_assert_eq!(max_weight_assignment(&t).unwrap().0, brute_force(&t));
    }

    #[test]
    fn acc_equals_brute_force_on_tables(t in table(6)) {
        prop_assume!(t.iter().flatten().sum::<u64>() > 0);
        let r = acc_from_table(&ContingencyTable::from_counts(&t).unwrap()).unwrap();
        prop_assert_eq!(r.matched, brute_force(&t));
    }

    #[test]
    fn large_tables_use_the_assignment_solver(t in prop::collection::vec(prop::collection::vec(0u64..30, 9), 9)) {
        prop_assume!(t.iter().flatten().sum::<u64>() > 0);
        let r = acc_from_table(&ContingencyTable::from_counts(&t).unwrap()).unwrap();
        prop_assert_eq!(r.matched, brute_force(&t));
    }

    #[test]
    fn nmi_matches_entropy_summation(t in table(5)) {
        let (y, c) = expand(&t);
        prop_assume!(!y.is_empty());
        let got = nmi(&y, &c).unwrap();
        let rows_used = t.iter().filter(|r| r.iter().sum::<u64>() > 0).count();
        let cols_used = (0..t.len()).filter(|&j| t.iter().map(|r| r[j]).sum::<u64>() > 0).count();
        if rows_used > 1 && cols_used > 1 {
            prop_assert!((got - nmi_oracle(&t)).abs() < 1e-10);
        }
        prop_assert!((0.0..=1.0).contains(&got));
        prop_assert!((got - nmi(&c, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn metrics_ignore_cluster_names_and_sample_order(t in table(5), shift in 1usize..5, seed in any::<u64>()) {
        let (y, c) = expand(&t);
        prop_assume!(!y.is_empty());
        let k = t.len();
        let renamed: Vec<usize> = c.iter().map(|v| (v + shift) % k).collect();
        let a = acc(&y, &c, k, k).unwrap().acc;
        prop_assert_eq!(a, acc(&y, &renamed, k, k).unwrap().acc);
        prop_assert!((nmi(&y, &c).unwrap() - nmi(&y, &renamed).unwrap()).abs() < 1e-12);
        let mut order: Vec<usize> = (0..y.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        let ys: Vec<usize> = order.iter().map(|&i| y[i]).collect();
        let cs: Vec<usize> = order.iter().map(|&i| c[i]).collect();
        prop_assert_eq!(a, acc(&ys, &cs, k, k).unwrap().acc);
        prop_assert!((nmi(&y, &c).unwrap() - nmi(&ys, &cs).unwrap()).abs() < 1e-12);
        // Any single cell can be matched, so the largest cell bounds ACC below.
        let largest_cell = *t.iter().flatten().max().unwrap();
        prop_assert!(a >= largest_cell as f64 / y.len() as f64 - 1e-15);
        let largest_class = t.iter().map(|r| r.iter().sum::<u64>()).max().unwrap();
        let one = acc(&y, &vec![0; y.len()], k, 1).unwrap().acc;
        prop_assert!((one - largest_class as f64 / y.len() as f64).abs() < 1e-15);
    }
}

#[test]
fn metric_examples() {
    let (y, c) = expand(&[vec![5, 1], vec![2, 4]]);
    assert!((acc(&y, &c, 2, 2).unwrap().acc - 0.75).abs() < 1e-15);
    assert!((nmi(&y, &c).unwrap() - nmi_oracle(&[vec![5, 1], vec![2, 4]])).abs() < 1e-12);
    let (y, c) = expand(&[vec![3, 3], vec![3, 3]]);
    assert!(nmi(&y, &c).unwrap().abs() < 1e-12);
    assert!(acc(&[0, 1], &[0], 2, 2).is_err());
    assert!(nmi(&[0, 1], &[0]).is_err());
}

fn zero_model(k: usize) -> (GanModel, MixturePrior) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let arch = GanArchitecture {
        generator_hidden: vec![4],
        discriminator_hidden: vec![4],
        init: WeightInit { std: 0.0 },
        ..GanArchitecture::toy()
    };
    let model = GanModel::build(&arch, 3, 2, Supervision::Unsupervised, None, None, &mut rng).unwrap();
    let prior = MixturePrior::init_static(k, 3, 0.1, 0.15, &mut rng).unwrap();
    (model, prior)
}

#[test]
fn synthetic_sets_have_m_samples_per_component() {
    let (model, prior) = zero_model(9);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ds = generate_labeled_synthetic(&model, &prior, 1, Modality::Points, &mut rng).unwrap();
    assert_eq!(ds.len(), 9);
    assert_eq!(ds.labels().unwrap(), (0..9).collect::<Vec<_>>());
    assert!(ds.samples().data().iter().all(|&v| v == 0.0));
    let ds = generate_labeled_synthetic(&model, &prior, 5, Modality::Points, &mut rng).unwrap();
    assert_eq!(ds.class_counts().unwrap(), vec![5; 9]);
    assert!(generate_labeled_synthetic(&model, &prior, 0, Modality::Points, &mut rng).is_err());
}

fn small_cluster_config() -> ClusterConfig {
    ClusterConfig {
        train: TrainConfig {
            latent_dim: 4,
            batch_d: 8,
            batch_g: 8,
            iters: 3,
            ..TrainConfig::default()
        },
        arch: GanArchitecture {
            generator_hidden: vec![4],
            discriminator_hidden: vec![4],
            ..GanArchitecture::toy()
        },
        classifier: ClassifierConfig {
            hidden: vec![4],
            epochs: 1,
            ..ClassifierConfig::default()
        },
        samples_per_component: 4,
    }
}

#[test]
fn one_cluster_scores_the_majority_share() {
    let x = Dataset::new(
        Tensor::zeros(&[5, 2]),
        Some(vec![0, 1, 1, 2, 1]),
        3,
        Modality::Points,
        Normalization::identity(2),
    )
    .unwrap();
    let r = cluster(&x, 1, &small_cluster_config()).unwrap();
    assert_eq!(r.hard, vec![0; 5]);
    assert!((r.acc.unwrap().acc - 0.6).abs() < 1e-15);
}

#[test]
fn repeated_point_lands_in_one_cluster() {
    let x = Dataset::new(
        Tensor::filled(&[20, 2], 0.3),
        Some(vec![0; 20]),
        1,
        Modality::Points,
        Normalization::identity(2),
    )
    .unwrap();
    let cfg = small_cluster_config();
    let r = cluster(&x, 3, &cfg).unwrap();
    assert!(r.hard.iter().all(|&h| h == r.hard[0]));
    assert_eq!(r.acc.as_ref().unwrap().acc, 1.0);
    assert_eq!(cluster(&x, 3, &cfg).unwrap(), r);
    let mut csv = Vec::new();
    r.write_assignments_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("sample_index,hard,soft_0,soft_1,soft_2\n0,"));
}
