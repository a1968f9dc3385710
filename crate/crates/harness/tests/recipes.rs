use gmgan_core::data::{toy_mixture, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
use gmgan_core::trainer::Variant;
use gmgan_harness::config::ExperimentConfig;
use gmgan_harness::experiments::{
    run_cluster, run_score, run_sigma_sweep, run_toy_convergence, run_train, sweep_diversity,
};
use gmgan_harness::stats::{spearman, standard_error};

fn small(extra: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_text(
        "toy_samples=300\nd=4\ngenerator_hidden=16,16\ndiscriminator_hidden=16,16\n\
         batch_d=16\nbatch_g=32\nepochs=2\nn_samples=200\nrepeats=2\ngamma=0.001\n\
         classifier_epochs=3\nclassifier_hidden=16\nsamples_per_component=20\nseed=5\n",
    )
    .unwrap();
    cfg.apply_text(extra).unwrap();
    cfg.validate().unwrap();
    cfg
}

/// Data rows of an emitted CSV, split on commas, after the comment and header.
fn rows(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# gmgan "));
    lines.next().unwrap();
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn toy_convergence_is_deterministic_and_starts_at_epoch_zero() {
    let cfg = small("models=baseline,gm_gan,supervised_baseline,supervised_gm_gan\nexperiment=toy-convergence");
    let (res, out) = run_toy_convergence(&cfg).unwrap();
    let (_, again) = run_toy_convergence(&cfg).unwrap();
    assert_eq!(out, again);

    // 2 repeats × 4 models × (epoch 0 + 2 epochs)
    assert_eq!(res.rows.len(), 24);
    let peak = -toy_mixture(0.1).unwrap().log_density(&[0.0, 0.0]).unwrap();
    for r in res.rows.iter().filter(|r| r.epoch == 0) {
        assert_eq!(r.iteration, 0);
        assert!(r.nll >= peak - 1e-9 && r.nll.is_finite());
    }
    for repeat in 0..2 {
        for m in [Variant::Baseline, Variant::GmGan, Variant::SupervisedBaseline, Variant::SupervisedGmGan] {
            assert!(res.final_nll(repeat, m).is_some());
        }
    }
    let csv = out.get("toy_convergence.csv").unwrap();
    assert_eq!(csv.lines().nth(1), Some("repeat,seed,model,epoch,iter,nll"));
    assert_eq!(rows(csv).len(), 24);
    let finals = rows(out.get("toy_convergence_final.csv").unwrap());
    assert_eq!(finals.len(), 10);
    assert!(finals.iter().any(|r| r[2] == "true_mixture"));
}

#[test]
fn single_sigma_grid_gives_single_rows() {
    let cfg = small("sigma_grid=1.0\nrepeats=1\nexperiment=sigma-sweep");
    let (res, out) = run_sigma_sweep(&cfg).unwrap();
    assert_eq!(res.rows.len(), 1);
    assert_eq!(rows(out.get("sigma_sweep.csv").unwrap()).len(), 1);
    assert_eq!(res.spearman, vec![(None, None)]);
}

#[test]
fn toy_sweep_tightens_samples_at_small_sigma() {
    let cfg = small("sigma_grid=0.25,2.0\nepochs=20\nexperiment=sigma-sweep");
    let (res, out) = run_sigma_sweep(&cfg).unwrap();
    for repeat in 0..2 {
        let nll: Vec<f64> = res
            .rows
            .iter()
            .filter(|r| r.repeat == repeat)
            .map(|r| r.report.nll.unwrap())
            .collect();
        assert!(nll[0] < nll[1], "repeat {repeat}: {nll:?}");
    }

    // The summary's standard errors and the Spearman table are recomputable
    // from the raw rows in the same output.
    let raw = rows(out.get("sigma_sweep.csv").unwrap());
    let summary = rows(out.get("sigma_sweep_summary.csv").unwrap());
    for s in summary.iter().filter(|s| s[1] == "q") {
        let qs: Vec<f64> = raw.iter().filter(|r| r[2] == s[0]).map(|r| r[3].parse().unwrap()).collect();
        let se: f64 = s[3].parse().unwrap();
        assert!((se - standard_error(&qs).unwrap()).abs() < 1e-12);
    }
    let rho = rows(out.get("sigma_sweep_spearman.csv").unwrap());
    for r in 0..2 {
        let mine: Vec<&gmgan_harness::experiments::SweepRow> = res.rows.iter().filter(|x| x.repeat == r).collect();
        let sig: Vec<f64> = mine.iter().map(|x| x.report.sigma).collect();
        let div: Vec<f64> = mine.iter().map(|x| sweep_diversity(&x.report)).collect();
        assert_eq!(rho[r][3], spearman(&sig, &div).map(|v| v.to_string()).unwrap_or_default());
    }
    assert_eq!(rho[2][0], "mean");
}

#[test]
fn one_cluster_scores_the_largest_class_share() {
    let cfg = small("K=1\nrepeats=1\nexperiment=cluster");
    let (res, out) = run_cluster(&cfg).unwrap();
    let r = &res[0].result;
    let counts = {
        let mut c = vec![0usize; 9];
        // the toy labels of this repeat, rebuilt from the same data stream
        let spec = gmgan_harness::experiments::DataSpec::from_config(&cfg).unwrap();
        for &y in spec.instance(cfg.seed).unwrap().labels().unwrap() {
            c[y] += 1;
        }
        c
    };
    let share = *counts.iter().max().unwrap() as f64 / 300.0;
    assert_eq!(r.acc.as_ref().unwrap().acc, share);
    assert_eq!(out, run_cluster(&cfg).unwrap().1);
}

#[test]
fn clustering_toy_data_is_deterministic() {
    let cfg = small("K=9\nrepeats=1\nexperiment=cluster");
    let (res, out) = run_cluster(&cfg).unwrap();
    assert_eq!(out, run_cluster(&cfg).unwrap().1);
    let metrics = rows(out.get("cluster_metrics.csv").unwrap());
    assert_eq!(metrics.len(), 1);
    assert_eq!(metrics[0][2], "9");
    let acc = res[0].result.acc.as_ref().unwrap().acc;
    assert!((0.0..=1.0).contains(&acc));
    assert!(out.get("cluster_assignments_0.csv").unwrap().lines().count() == 302);
}

fn write_idx(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    // 12×12 bright-square images of two classes: top-left vs bottom-right.
    let n = 40u32;
    let mut img = Vec::new();
    for v in [IDX_IMAGES_MAGIC, n, 12, 12] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    let mut lab = Vec::new();
    for v in [IDX_LABELS_MAGIC, n] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    for i in 0..n {
        let class = (i % 2) as usize;
        for r in 0..12usize {
            for c in 0..12usize {
                let on = if class == 0 { r < 6 && c < 6 } else { r >= 6 && c >= 6 };
                let jitter = ((i as usize * 31 + r * 7 + c * 3) % 40) as u8;
                img.push(if on { 215 + jitter } else { jitter });
            }
        }
        lab.push(class as u8);
    }
    let (ip, lp) = (dir.join("img.idx"), dir.join("lab.idx"));
    std::fs::write(&ip, img).unwrap();
    std::fs::write(&lp, lab).unwrap();
    (ip, lp)
}

#[test]
fn image_scores_include_pairwise_diversity() {
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = write_idx(dir.path());
    let cfg = small(&format!(
        "dataset=idx\nimages={}\nlabels={}\nper_class=15\nn_samples=30\nd_intra_samples=10\nexperiment=score",
        ip.display(),
        lp.display()
    ));
    let (report, out) = run_score(&cfg).unwrap();
    let d_intra = report.d_intra.unwrap();
    assert!((0.0..=1.0).contains(&d_intra));
    assert!((report.d.unwrap() - (d_intra * report.d_inter).sqrt()).abs() < 1e-12);
    assert!(report.nll.is_none());
    assert!(report.classifier_is >= 1.0 - 1e-12);
    assert!(report.q > 0.0 && report.q <= 0.5);
    assert_eq!(rows(out.get("score.csv").unwrap())[0].len(), 9);
    assert!(out.get("score.txt").unwrap().contains("d_intra: "));
}

#[test]
fn trained_checkpoint_feeds_the_score_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("epochs=1\nsnapshot_every=10");
    let (state, out) = run_train(&cfg, Some(dir.path())).unwrap();
    assert!(dir.path().join("checkpoint_10.json").exists());
    let ck = dir.path().join("final.json");
    std::fs::write(&ck, out.get("checkpoint.json").unwrap()).unwrap();
    assert_eq!(rows(out.get("losses.csv").unwrap()).len() as u64, state.iteration);
    assert_eq!(rows(out.get("epochs.csv").unwrap()).len(), 1);

    let from_ck = small(&format!("checkpoint={}\nexperiment=score", ck.display()));
    let (a, _) = run_score(&from_ck).unwrap();
    let (b, _) = run_score(&from_ck).unwrap();
    assert_eq!(a, b);
    assert!(a.nll.unwrap().is_finite());
}
