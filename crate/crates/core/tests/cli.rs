use std::fs;
use std::path::{Path, PathBuf};

use diss::cli::{cmd_plot, cmd_run, cmd_validate, run_cli, RunOptions};
use diss::config::ExperimentConfig;
use diss::runner::read_curves_csv;
use diss::DissError;

const MINIMAL: &str = r#"
name = "minimal"
seeds = [0, 1]
strategies = ["mimic", "random"]
output_dir = "out"
[dataset]
n = 500
d = 5
informative = [0, 1]
[acquisition]
budget = 600
warmup = 500
ensemble_size = 2
[acquisition.boost]
n_trees = 12
"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("exp.toml");
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_owned()
}

#[test]
fn minimal_run_writes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let summary = cmd_run(&cfg, &RunOptions::default()).unwrap();
    let out = dir.path().join("out");
    assert_eq!(summary.output_dir, out);

    let rows = read_curves_csv(&out.join("curves.csv")).unwrap();
    for strategy in ["Mimic", "Random"] {
        for seed in [0, 1] {
            let n = rows.iter().filter(|r| r.strategy == strategy && r.seed == seed).count();
            assert!(n >= 2, "{strategy} seed {seed}: {n} checkpoints");
        }
    }
    let header = fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(header.starts_with("strategy,seed,queries,mean_reward,mean_nfeat\n"));

    let svg = fs::read_to_string(out.join("curves.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    for f in ["mimic_seed0", "mimic_seed1", "random_seed0", "random_seed1"] {
        let text = fs::read_to_string(out.join(format!("buffers/{f}.ndjson"))).unwrap();
        assert_eq!(text.lines().count(), 600, "{f}");
    }

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([0, 1]));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["checkpoints"], serde_json::json!([500, 600]));
    // The embedded config reproduces the hash.
    let embedded = ExperimentConfig::from_toml(manifest["config"].as_str().unwrap()).unwrap();
    assert_eq!(embedded.hash().unwrap(), manifest["config_sha256"].as_str().unwrap());
}

#[test]
fn seed_offset_and_output_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &MINIMAL.replace("[\"mimic\", \"random\"]", "[\"random\"]"));
    let alt = dir.path().join("alt");
    let code = run_cli(["diss", "--jobs", "1", "run", &s(&cfg), "--output-dir", &s(&alt), "--seed-offset", "10"]);
    assert_eq!(code, 0);
    let rows = read_curves_csv(&alt.join("curves.csv")).unwrap();
    assert!(rows.iter().all(|r| r.seed == 10 || r.seed == 11));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_strategy_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &MINIMAL.replace("\"random\"", "\"telepathy\""));
    let err = cmd_run(&cfg, &RunOptions::default()).unwrap_err();
    assert!(matches!(&err, DissError::InvalidConfig { field, .. } if field == "strategies[1]"), "{err}");
    assert!(err.to_string().contains("telepathy"));
    assert!(!dir.path().join("out").exists());
    assert_eq!(run_cli(["diss", "run", &s(&cfg)]), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn validate_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "name = \"tiny\"\n");
    let text = cmd_validate(&cfg).unwrap();
    for key in ["epsilon = ", "budget = 8000", "warmup = 500", "action_cap = 5000", "[acquisition.boost]"] {
        assert!(text.contains(key), "missing {key} in\n{text}");
    }
    assert_eq!(run_cli(["diss", "validate", &s(&cfg)]), 0);
}

#[test]
fn validate_rejects_negative_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[reward]\nlambda = -1.0\n");
    let err = cmd_validate(&cfg).unwrap_err();
    assert!(matches!(&err, DissError::InvalidConfig { field, .. } if field == "reward.lambda"), "{err}");
    assert_eq!(run_cli(["diss", "validate", &s(&cfg)]), 2);
}

#[test]
fn validate_names_missing_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[dataset]\nsource = \"csv\"\npath = \"data/absent.csv\"\n");
    let msg = cmd_validate(&cfg).unwrap_err().to_string();
    assert!(msg.contains("dataset.path") && msg.contains("absent.csv"), "{msg}");
}

#[test]
fn csv_dataset_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("data")).unwrap();
    let mut csv = String::from("a,b,c,label\n");
    for i in 0..120 {
        let x = (i as f64 * 0.37).sin();
        csv.push_str(&format!("{x},{},{},{}\n", (i % 7) as f64, (i as f64).cos(), u8::from(x > 0.0)));
    }
    fs::write(dir.path().join("data/t.csv"), csv).unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
seeds = [0]
strategies = ["random", "modiste_knn"]
[dataset]
source = "csv"
path = "data/t.csv"
has_header = true
[environment]
kind = "nw"
[acquisition]
budget = 60
warmup = 40
checkpoint_every = 10
"#,
    );
    let summary = cmd_run(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(summary.rows.len(), 2 * 3);
}

#[test]
fn reference_config_round_trips() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    let (cfg, _) = ExperimentConfig::load(&path).unwrap();
    let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!((cfg.acquisition.budget, cfg.acquisition.warmup, cfg.acquisition.action_cap), (8000, 500, 5000));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            cmd_validate(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 3);
}

fn curves(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn plot_single_and_double() {
    let dir = tempfile::tempdir().unwrap();
    let one = curves(dir.path(), "a.csv", "strategy,seed,queries,mean_reward,mean_nfeat\nMimic,0,500,-0.6,3\nMimic,0,750,-0.5,2\n");
    let two = curves(dir.path(), "b.csv", "strategy,seed,queries,mean_reward,mean_nfeat\nRandom,0,500,-0.7,4\nRandom,0,750,-0.68,4\n");
    let out = dir.path().join("p.svg");
    cmd_plot(&[one.clone()], &out).unwrap();
    let svg = fs::read_to_string(&out).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(!svg.contains("class=\"band\""));
    assert!(svg.contains("queries") && svg.contains("mean test reward"));

    assert_eq!(run_cli(["diss", "plot", &s(&one), &s(&two), "-o", &s(&out)]), 0);
    let svg = fs::read_to_string(&out).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">Mimic<") && svg.contains(">Random<"));
}

#[test]
fn plot_rejects_empty_and_mismatched() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.svg");
    let empty = curves(dir.path(), "e.csv", "");
    assert!(cmd_plot(&[empty.clone()], &out).is_err());
    let header_only = curves(dir.path(), "h.csv", "strategy,seed,queries,mean_reward,mean_nfeat\n");
    assert!(cmd_plot(&[header_only], &out).is_err());
    let wrong = curves(dir.path(), "w.csv", "method,seed,x,y\nA,0,1,2\n");
    assert!(cmd_plot(&[wrong], &out).is_err());
    assert!(!out.exists());
    assert_eq!(run_cli(["diss", "plot", &s(&empty), "-o", &s(&out)]), 1);
    assert!(!out.exists());
}

#[test]
fn bad_arguments_exit_nonzero() {
    assert_eq!(run_cli(["diss", "frobnicate"]), 2);
    assert_eq!(run_cli(["diss", "validate", "/no/such/file.toml"]), 1);
}
