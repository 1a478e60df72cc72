use std::path::{Path, PathBuf};
use std::process::Command;

use gibbs_forge_cli::config::ExperimentConfig;
use gibbs_forge_cli::{explain, CliError, Experiment};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gibbs-forge"));
    c.env_remove("GIBBS_FORGE_THREADS");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn poisson_sample(out: &Path, extra: &str) -> String {
    format!(
        r#"
experiment = "sample"
seed = 21

[model]
dim = 2
model = {{ kind = "poisson", alpha = 3.0 }}

[window]
lower = [0.0, 0.0]
upper = [2.0, 1.0]

[budget]
replicates = 4000
{extra}

[params]
sampler = "embed"

[output]
dir = "{}"
"#,
        out.display()
    )
}

fn strauss_couple(out: &Path) -> String {
    format!(
        r#"
experiment = "couple"
seed = 4

[model]
dim = 2
marks = {{ kind = "radius", law = {{ law = "point_mass", r = 0.05 }} }}
model = {{ kind = "strauss", alpha = 2.0, beta = 0.5 }}

[window]
lower = [0.0, 0.0]
upper = [1.0, 1.0]

[[boundary]]
loc = [-0.04, 0.5]
radius = 0.05

[budget]
replicates = 200
n_z = 256

[output]
dir = "{}"
"#,
        out.display()
    )
}

fn read(p: PathBuf) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn poisson_sample_mean_matches_intensity_times_volume() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write(tmp.path(), "s.toml", &poisson_sample(&out, ""));
    let st = bin().args(["run", cfg.to_str().unwrap()]).status().unwrap();
    assert!(st.success());
    let mut r = csv::Reader::from_path(out.join("sample.csv")).unwrap();
    let counts: Vec<f64> = r.records().map(|x| x.unwrap()[1].parse().unwrap()).collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let se = (6.0 / counts.len() as f64).sqrt();
    assert!((mean - 6.0).abs() < 4.0 * se, "{mean}");
    let manifest: serde_json::Value = serde_json::from_slice(&read(out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["partial"], false);
    assert_eq!(manifest["files"][0]["name"], "sample.csv");
}

#[test]
fn couple_reruns_are_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "4", "1"].iter().enumerate() {
        let out = tmp.path().join(format!("o{k}"));
        let cfg = write(tmp.path(), &format!("c{k}.toml"), &strauss_couple(&out));
        let st = bin().env("GIBBS_FORGE_THREADS", threads).args(["run", cfg.to_str().unwrap()]).status().unwrap();
        assert!(st.success());
        outputs.push(read(out.join("couple.csv")));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn json_mirror_gives_the_same_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let toml_path = write(tmp.path(), "c.toml", &strauss_couple(&a));
    let mut cfg: ExperimentConfig = ExperimentConfig::load(&toml_path).unwrap().0;
    cfg.output.dir = b.clone();
    let json_path = write(tmp.path(), "c.json", &serde_json::to_string_pretty(&cfg).unwrap());
    for p in [&toml_path, &json_path] {
        assert!(bin().args(["run", p.to_str().unwrap()]).status().unwrap().success());
    }
    assert_eq!(read(a.join("couple.csv")), read(b.join("couple.csv")));
}

#[test]
fn parse_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "experiment = \"sample\"\nseed = \n");
    assert_eq!(bin().args(["run", cfg.to_str().unwrap()]).status().unwrap().code(), Some(2));
    let unknown = write(tmp.path(), "u.toml", "experiment = \"sample\"\nseed = 1\ncolour = 3\n");
    assert_eq!(bin().args(["run", unknown.to_str().unwrap()]).status().unwrap().code(), Some(2));
    assert_eq!(bin().args(["explain", "nothing"]).status().unwrap().code(), Some(2));
}

#[test]
fn negative_beta_is_rejected_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let text = strauss_couple(&out).replace("beta = 0.5", "beta = -0.5");
    let cfg = write(tmp.path(), "neg.toml", &text);
    let o = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn validation_catches_range_and_geometry_errors() {
    let out = PathBuf::from("unused");
    let base = poisson_sample(&out, "");
    let cases = [
        base.replace("replicates = 4000", "replicates = 0"),
        base.replace("upper = [2.0, 1.0]", "upper = [2.0, 1.0, 1.0]").replace("lower = [0.0, 0.0]", "lower = [0.0, 0.0, 0.0]"),
        base.replace("[budget]", "[[boundary]]\nloc = [0.5, 0.5]\n\n[budget]"),
        base.replace("alpha = 3.0", "alpha = -1.0"),
        base.replace("experiment = \"sample\"", "experiment = \"gnz\""),
    ];
    for text in cases {
        let cfg = ExperimentConfig::from_str_as(&text, false).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, CliError::Validation(_)), "{err}");
        assert_eq!(err.exit_code(), 3);
    }
}

#[test]
fn wall_clock_cap_flags_partial_results() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let text = poisson_sample(&out, "wall_clock_secs = 1e-9").replace("replicates = 4000", "replicates = 100000");
    let cfg = write(tmp.path(), "cap.toml", &text);
    let st = bin().args(["run", cfg.to_str().unwrap()]).status().unwrap();
    assert_eq!(st.code(), Some(4));
    let manifest: serde_json::Value = serde_json::from_slice(&read(out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["partial"], true);
}

#[test]
fn explain_covers_every_experiment() {
    for e in Experiment::ALL {
        let text = explain::describe(e);
        assert!(text.starts_with(e.name()), "{}", e.name());
        let o = bin().args(["explain", e.name()]).output().unwrap();
        assert!(o.status.success());
        assert_eq!(String::from_utf8(o.stdout).unwrap(), text);
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for e in Experiment::ALL {
        let (cfg, _) = ExperimentConfig::load(&dir.join(format!("{}.toml", e.name()))).unwrap();
        assert_eq!(cfg.experiment, e);
        cfg.validate().unwrap();
    }
}
