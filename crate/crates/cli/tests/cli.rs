use std::path::Path;
use std::process::Command;

use nphmc_cli::experiment::{execute, load, run_experiment, samples_to_jsonl, SUMMARY_FILE};
use nphmc_cli::plot::{emit_plot_data, k_histogram_csv, kde_csv, load_inputs, lppd_curve_csv, Input};
use nphmc_cli::spec::{resolve, Algorithm, ExperimentSpec, ModelId, Overrides};
use nphmc_cli::verify::verify_dir;

fn small(model: ModelId, algorithm: Algorithm, out: &Path) -> ExperimentSpec {
    resolve(
        None,
        &Overrides {
            model: Some(model),
            algorithm: Some(algorithm),
            samples: Some(60),
            burnin: Some(10),
            runs: Some(2),
            out: Some(out.to_path_buf()),
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn model_defaults() {
    let o = |m| Overrides {
        model: Some(m),
        ..Default::default()
    };
    let g = resolve(None, &o(ModelId::Geometric)).unwrap();
    assert_eq!((g.sampler.epsilon, g.sampler.steps, g.sampler.n_samples, g.sampler.burn_in, g.runs), (0.1, 5, 1000, 100, 10));
    let w = resolve(None, &o(ModelId::Walk)).unwrap();
    assert_eq!((w.sampler.epsilon, w.sampler.steps), (0.1, 50));
    let d = resolve(None, &o(ModelId::Dpmm)).unwrap();
    assert_eq!((d.sampler.epsilon, d.sampler.steps, d.sampler.n_samples, d.sampler.burn_in), (0.05, 20, 100, 50));
    assert_eq!(d.sampler.thinning, 1);
}

#[test]
fn flags_override_config_and_baselines_thin_by_steps() {
    let config = r#"{"model": "walk", "steps": 7, "epsilon": 0.3, "runs": 4, "algorithm": "lmh"}"#;
    let s = resolve(Some(config), &Overrides::default()).unwrap();
    assert_eq!((s.model, s.algorithm, s.sampler.steps, s.sampler.epsilon, s.runs), (ModelId::Walk, Algorithm::Lmh, 7, 0.3, 4));
    assert_eq!(s.sampler.thinning, 7);
    let s = resolve(
        Some(config),
        &Overrides {
            steps: Some(9),
            thin: Some(2),
            model: Some(ModelId::Gmm),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!((s.model, s.sampler.steps, s.sampler.thinning, s.sampler.epsilon), (ModelId::Gmm, 9, 2, 0.3));
}

#[test]
fn invalid_specs_are_rejected() {
    let bad = [
        (None, Overrides::default()),
        (Some("[1]"), Overrides::default()),
        (Some(r#"{"model": "geometric", "thinning": 0}"#), Overrides::default()),
        (
            None,
            Overrides {
                model: Some(ModelId::Geometric),
                burnin: Some(5000),
                ..Default::default()
            },
        ),
        (
            None,
            Overrides {
                model: Some(ModelId::Gmm),
                algorithm: Some(Algorithm::Nprhmc),
                ..Default::default()
            },
        ),
        (
            None,
            Overrides {
                model: Some(ModelId::Walk),
                runs: Some(0),
                ..Default::default()
            },
        ),
    ];
    for (config, o) in bad {
        let e = resolve(config, &o).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{e}");
    }
}

#[test]
fn run_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    for (i, (model, alg)) in [
        (ModelId::Geometric, Algorithm::Npdhmc),
        (ModelId::Geometric, Algorithm::Nprhmc),
        (ModelId::Walk, Algorithm::Rmh),
        (ModelId::Walk, Algorithm::Is),
        (ModelId::Gmm, Algorithm::Nphmc),
    ]
    .into_iter()
    .enumerate()
    {
        let out = dir.path().join(i.to_string());
        let spec = small(model, alg, &out);
        let (report, _) = run_experiment(&spec).unwrap();
        assert_eq!(report.runs.len(), 2);
        assert!(report.runs.iter().all(|r| r.error.is_none()), "{:?}", report.runs);
        verify_dir(&out).unwrap();
    }
}

#[test]
fn verify_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small(ModelId::Geometric, Algorithm::Nphmc, dir.path());
    run_experiment(&spec).unwrap();
    let path = dir.path().join(SUMMARY_FILE);
    let mut summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    summary["aggregate"]["tvd"]["mean"] = serde_json::json!(0.0);
    std::fs::write(&path, summary.to_string()).unwrap();
    assert!(verify_dir(dir.path()).is_err());
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small(ModelId::Walk, Algorithm::Npdhmc, dir.path());
    let (a, _) = execute(&spec).unwrap();
    spec.jobs = 2;
    let (b, _) = execute(&spec).unwrap();
    assert_eq!(samples_to_jsonl(&a), samples_to_jsonl(&b));
    spec.sampler.seed = 1;
    let (c, _) = execute(&spec).unwrap();
    assert_ne!(samples_to_jsonl(&a), samples_to_jsonl(&c));
}

#[test]
fn failed_runs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small(ModelId::Geometric, Algorithm::Npdhmc, dir.path());
    spec.geometric_p = 1e-12;
    spec.sampler.extend_cap = 3;
    let (records, report) = execute(&spec).unwrap();
    assert!(records.is_empty());
    assert!(report.runs.iter().all(|r| r.error.is_some()));
    assert!(report.aggregate.is_empty());
}

#[test]
fn plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_experiment(&small(ModelId::Gmm, Algorithm::Npdhmc, &a)).unwrap();
    run_experiment(&small(ModelId::Gmm, Algorithm::Lmh, &b)).unwrap();
    let written = emit_plot_data(&[a.clone(), b.clone()], &dir.path().join("plots")).unwrap();
    assert_eq!(written.len(), 4);
    let inputs = load_inputs(&[a.clone(), b]).unwrap();
    let kde = kde_csv(&inputs).unwrap();
    assert!(kde.starts_with("x,npdhmc,lmh\n"));
    assert!(kde.lines().skip(1).all(|l| l.split(',').count() == 3));
    assert!(k_histogram_csv(&inputs).starts_with("k,npdhmc,lmh\n"));
    let curve = lppd_curve_csv(&inputs[0]).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next().unwrap(), "index,run_0,run_1,mean,sd");
    assert!(lines.all(|l| l.split(',').count() == 5));

    let (records, report) = load(&a).unwrap();
    assert_eq!(records.len(), 100);
    let empty = Input {
        label: "empty".into(),
        records: Vec::new(),
        report,
    };
    assert_eq!(kde_csv(std::slice::from_ref(&empty)).unwrap(), "x,empty\n");
    assert_eq!(lppd_curve_csv(&empty).unwrap(), "index,run_0,run_1,mean,sd\n");
    assert_eq!(kde_csv(&[]).unwrap(), "x\n");
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nphmc"))
}

#[test]
fn binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"model": "geometric", "runs": 2, "n_samples": 50, "burn_in": 5}"#).unwrap();
    let st = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--algorithm", "nphmc", "--no-trim", "--potential", "weight", "--init-draws", "3", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let (_, report) = load(&out).unwrap();
    assert!(!report.spec.sampler.trim);
    assert_eq!(report.spec.sampler.init_draws, 3);
    assert_eq!(report.runs[0].samples, 45);
    assert!(bin().arg("verify").arg(&out).status().unwrap().success());
    let st = bin().args(["plotdata", "--out"]).arg(dir.path().join("p")).arg(&out).status().unwrap();
    assert!(st.success());
    assert_eq!(bin().args(["run", "--model", "walk", "--eps=-1"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["run", "--model", "banana"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("verify").arg(dir.path().join("missing")).output().unwrap().status.code(), Some(1));
}
