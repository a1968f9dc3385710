use gmgan_core::data::{gen_toy, load_idx, subset, Normalization, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
use gmgan_core::nn::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn toy_component_counts_are_multinomial() {
    let n = 90_000;
    let ds = gen_toy(n, 0.1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let p = 1.0 / 9.0;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    for (k, c) in ds.class_counts().unwrap().into_iter().enumerate() {
        assert!((c as f64 - 10_000.0).abs() < 5.0 * sd, "component {k}: {c}");
    }
}

#[test]
fn toy_generation_is_bit_reproducible() {
    let a = gen_toy(777, 0.1, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = gen_toy(777, 0.1, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
    let c = gen_toy(777, 0.1, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
    assert_ne!(a.samples(), c.samples());
}

#[test]
fn zero_variance_collapses_onto_the_grid() {
    let ds = gen_toy(50, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let grid = [-1.0, 0.0, 1.0];
    for (i, &y) in ds.labels().unwrap().iter().enumerate() {
        assert_eq!(ds.sample(i), &[grid[y / 3], grid[y % 3]]);
    }
}

fn write_idx(dir: &std::path::Path, n: u32, rows: u32, cols: u32, pixels: &[u8], labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut img = Vec::new();
    for v in [IDX_IMAGES_MAGIC, n, rows, cols] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend_from_slice(pixels);
    let mut lab = Vec::new();
    for v in [IDX_LABELS_MAGIC, labels.len() as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(labels);
    let (ip, lp) = (dir.join("images.idx"), dir.join("labels.idx"));
    std::fs::write(&ip, img).unwrap();
    std::fs::write(&lp, lab).unwrap();
    (ip, lp)
}

proptest! {
    #[test]
    fn normalization_round_trips(v in prop::collection::vec(-50.0f64..50.0, 3..30)) {
        let rows = v.len() / 3;
        let x = Tensor::new(vec![rows, 3], v[..rows * 3].to_vec()).unwrap();
        for norm in [Normalization::fit(&x), Normalization::pixels(3), Normalization::identity(3)] {
            let back = norm.denormalize(&norm.normalize(&x).unwrap()).unwrap();
            for (a, b) in back.data().iter().zip(x.data()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn loaded_pixels_stay_in_unit_box(pixels in prop::collection::vec(any::<u8>(), 12), labels in prop::collection::vec(0u8..10, 3)) {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_idx(dir.path(), 3, 2, 2, &pixels, &labels);
        let ds = load_idx(&ip, Some(&lp)).unwrap();
        prop_assert_eq!(ds.len(), 3);
        for (&v, &p) in ds.samples().data().iter().zip(&pixels) {
            prop_assert!((-1.0..=1.0).contains(&v));
            prop_assert_eq!(v, p as f64 / 127.5 - 1.0);
        }
    }
}

#[test]
fn subsets_from_files_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let pixels: Vec<u8> = (0..40).map(|i| (i * 13 % 256) as u8).collect();
    let labels: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
    let (ip, lp) = write_idx(dir.path(), 10, 2, 2, &pixels, &labels);
    let ds = load_idx(&ip, Some(&lp)).unwrap();
    let a = subset(&ds, 3, 5).unwrap();
    assert_eq!(a, subset(&ds, 3, 5).unwrap());
    assert_eq!(a.class_counts().unwrap(), vec![3, 3]);
    assert_eq!(subset(&ds, 0, 5).unwrap().len(), 0);
    assert!(subset(&ds, 6, 5).is_err());
}
