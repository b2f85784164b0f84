use std::path::Path;
use std::process::Command;

use nuelab_cli::experiments::registry;
use nuelab_cli::{exit_code, run, CliError, ExperimentConfig, RunManifest, RunStatus};
use sha2::{Digest, Sha256};

fn config(text: &str, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::parse(text).unwrap();
    c.out = out.to_path_buf();
    c
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

fn checked(m: &RunManifest, dir: &Path) {
    for f in &m.files {
        let bytes = read(dir, &f.name);
        assert_eq!(hex::encode(Sha256::digest(&bytes)), f.sha256, "{}", f.name);
        assert_eq!(bytes.len() as u64, f.bytes);
    }
    let kind = m.config.experiment.as_ref().unwrap().kind();
    for name in registry(kind) {
        assert!(m.constants.contains_key(*name), "{kind}: manifest lacks `{name}`");
    }
    let on_disk: RunManifest = serde_json::from_slice(&read(dir, "manifest.json")).unwrap();
    assert_eq!(on_disk.files, m.files);
}

const SMALL: &[(&str, &str)] = &[
    ("orbit", "[map]\nname = \"product\"\n[kernel]\neps = 0.01\n[experiment]\nkind = \"orbit\"\nn = 200\n"),
    ("pliss", "[map]\nname = \"intermittent\"\n[experiment]\nkind = \"pliss\"\norbits = 8\nn = 200\nresolve_orbits = 20\nresolve_horizon = 300\n"),
    ("hyp", "[map]\nname = \"viana\"\n[kernel]\neps = 0.01\n[experiment]\nkind = \"hyp\"\norbits = 6\nn = 200\nresolve_orbits = 20\nresolve_horizon = 300\n"),
    ("tails", "[map]\nname = \"intermittent\"\n[kernel]\neps = 0.001\n[experiment]\nkind = \"tails\"\nx_samples = 200\nomega_samples = 2\nn_max = 60\nresolve_orbits = 20\nresolve_horizon = 300\n"),
    ("induce", "[map]\nname = \"doubling\"\n[kernel]\neps = 0.001\n[experiment]\nkind = \"induce\"\nqueries = 1024\ninduced_cells = 2\ntower_cells = 8\nresolve_orbits = 8\nresolve_horizon = 200\n"),
    ("density", "[map]\nname = \"intermittent\"\n[kernel]\neps = 0.01\n[experiment]\nkind = \"density\"\nmethod = \"both\"\ncells = 64\nnoise_samples = 4\npoints_per_cell = 4\nx0_samples = 64\norbit_len = 300\nburn_in = 20\n"),
    ("stability", "[map]\nname = \"doubling\"\n[kernel]\neps_list = [0.01, 0.001]\n[experiment]\nkind = \"stability\"\ncells = 64\nnoise_samples = 4\npoints_per_cell = 4\nresolve_orbits = 20\nresolve_horizon = 300\n"),
    ("lyapunov", "[map]\nname = \"viana\"\n[kernel]\neps = 0.01\n[experiment]\nkind = \"lyapunov\"\npoints = 16\nn = 500\n"),
    ("verify-map", "[map]\nname = \"logistic\"\n[experiment]\nkind = \"verify-map\"\ncells = 32\nlyapunov_points = 4\nlyapunov_n = 300\nprobe_samples = 500\n"),
];

#[test]
fn every_experiment_runs_and_reproduces_bit_for_bit() {
    let tmp = tempfile::tempdir().unwrap();
    for (kind, text) in SMALL {
        let a = tmp.path().join(format!("{kind}-a"));
        let b = tmp.path().join(format!("{kind}-b"));
        let mut ca = config(text, &a);
        ca.workers = 1;
        let mut cb = config(text, &b);
        cb.workers = 4;
        let ma = run(&ca).unwrap();
        let mb = run(&cb).unwrap();
        assert_eq!(ma.status, RunStatus::Ok, "{kind}: {:?}", ma.error);
        assert!(!ma.files.is_empty());
        checked(&ma, &a);
        // Worker count changes wall time only.
        assert_eq!(ma.files, mb.files, "{kind}");
        assert_eq!(ma.constants, mb.constants, "{kind}");
        for f in &ma.files {
            if f.name.ends_with(".csv") {
                let text = String::from_utf8(read(&a, &f.name)).unwrap();
                assert!(!text.contains('\r'));
                assert!(text.ends_with('\n'));
            }
        }
    }
}

#[test]
fn doubling_density_is_uniform() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config("[map]\nname = \"doubling\"\n[experiment]\nkind = \"density\"\ncells = 512\n", tmp.path());
    let m = run(&c).unwrap();
    assert_eq!(m.status, RunStatus::Ok);
    let mut r = csv::Reader::from_path(tmp.path().join("density.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["cell", "center0", "ulam", "empirical"]);
    let mut rows = 0;
    for rec in r.records() {
        let v: f64 = rec.unwrap()[2].parse().unwrap();
        assert!((v - 1.0).abs() <= 1e-3);
        rows += 1;
    }
    assert_eq!(rows, 512);
}

#[test]
fn stability_manifest_lists_resolved_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(
        "[map]\nname = \"product\"\n[experiment]\nkind = \"stability\"\ncells = 16\nnoise_samples = 2\npoints_per_cell = 4\ndecades = 2\nmargin = 0.1\nresolve_orbits = 20\nresolve_horizon = 300\n",
        tmp.path(),
    );
    let m = run(&c).unwrap();
    for k in ["a0", "lambda", "zeta", "margin", "floor"] {
        assert!(m.constants.contains_key(k), "{k}");
    }
    assert!((m.constants["lambda"] - (-m.constants["a0"] / 4.0).exp()).abs() < 1e-15);
    let sweep = String::from_utf8(read(tmp.path(), "sweep.csv")).unwrap();
    assert!(sweep.starts_with("eps,l1_ulam,l1_empirical,residual,iterations,error\n"));
    assert_eq!(sweep.lines().count(), 3);
    let plot = String::from_utf8(read(tmp.path(), "sweep_plot.dat")).unwrap();
    assert!(plot.starts_with("# log10_eps l1 floor\n-2 "));
}

#[test]
fn induce_records_every_inducing_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config("[map]\nname = \"doubling\"\n[experiment]\nkind = \"induce\"\nqueries = 512\nresolve_orbits = 8\nresolve_horizon = 200\n", tmp.path());
    let m = run(&c).unwrap();
    assert_eq!(m.status, RunStatus::Ok);
    assert_eq!(m.constants["r0"], 39.0);
    assert_eq!(m.constants["n_max"], 79.0);
    assert_eq!(m.constants["delta0"], 0.001265625);
    assert!(m.constants["kappa_hat"] < m.constants["kappa_bound"]);
    assert_eq!(m.summary["gibbs_markov_passed"], true);
    let tail = String::from_utf8(read(tmp.path(), "return_tail.csv")).unwrap();
    assert!(tail.starts_with("n,mass_gt_n\n"));
    assert_eq!(tail.lines().count(), 81);
}

#[test]
fn pipeline_errors_keep_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config("[map]\nname = \"viana\"\n[experiment]\nkind = \"induce\"\nresolve_orbits = 8\nresolve_horizon = 100\n", tmp.path());
    let m = run(&c).unwrap();
    assert_eq!(m.status, RunStatus::PipelineError);
    assert_eq!(exit_code(&m), 3);
    assert!(m.error.as_deref().unwrap().contains("not a circle map"));
    // Constants resolved before the failure are preserved.
    assert!(m.constants.contains_key("a0"));
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn config_errors_carry_field_paths() {
    let err = |text: &str| match ExperimentConfig::parse(text).and_then(|mut c| {
        c.select("density")?;
        c.validate()
    }) {
        Err(CliError::Config { path, .. }) => path,
        other => panic!("expected a config error, got {other:?}"),
    };
    assert_eq!(err("[map]\nname = \"doubling\"\nk = 2\nbogus = 1\n"), "map");
    assert_eq!(err("[experiment]\nkind = \"density\"\ncells = 0\n"), "experiment.cells");
    assert_eq!(err("[kernel]\neps = -0.1\n"), "kernel.eps");
    assert_eq!(err("[kernel]\neps_list = [0.1, 0.01, -1.0]\n"), "kernel.eps_list[2]");
    assert_eq!(err("[experiment]\nkind = \"orbit\"\n"), "experiment.kind");
    assert_eq!(err("[map]\nname = \"viana\"\n[kernel]\neps = 0.5\n"), "kernel");
    assert_eq!(err("seed = \"x\"\n"), "seed");
    // JSON is accepted too.
    let c = ExperimentConfig::parse(r#"{"map": {"name": "intermittent", "alpha": 0.3}, "seed": 9}"#).unwrap();
    assert_eq!(c.seed, 9);
    // Configs round-trip through TOML.
    let mut c = c;
    c.select("tails").unwrap();
    assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
}

#[test]
fn binary_exit_codes_and_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_nuelab");
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "seed = 1\n[experiment]\nkind = \"orbit\"\nn = 10\n").unwrap();
    let out = tmp.path().join("o");
    let st = Command::new(bin)
        .args(["orbit", "--config", cfg.to_str().unwrap(), "--seed", "5", "--workers", "2", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let m: RunManifest = serde_json::from_slice(&read(&out, "manifest.json")).unwrap();
    assert_eq!((m.config.seed, m.config.workers), (5, 2));
    assert_eq!(String::from_utf8(read(&out, "orbit.csv")).unwrap().lines().count(), 12);

    let st = Command::new(bin).args(["density", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status().unwrap();
    assert_eq!(st.code(), Some(2));
    std::fs::write(&cfg, "[map]\nname = \"viana\"\n[experiment]\nkind = \"induce\"\nresolve_orbits = 4\nresolve_horizon = 50\n").unwrap();
    let st = Command::new(bin).args(["induce", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status().unwrap();
    assert_eq!(st.code(), Some(3));
}
