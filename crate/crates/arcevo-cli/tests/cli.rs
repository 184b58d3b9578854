//! End-to-end tests of the `arcevo` binary: exit codes, file artifacts,
//! determinism of the convergence log, and the resume contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use arcevo::reasoner::{ToyReasonerSpec, COLORS};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_arcevo"))
}

fn run_cli(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn arcevo")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const IDENTITY_1X1: &str =
    r#"{"train":[{"input":[[3]],"output":[[3]]}],"test":[{"input":[[3]],"output":[[3]]}]}"#;

const ZERO_TRUTH_1X1: &str =
    r#"{"train":[{"input":[[1]],"output":[[0]]}],"test":[{"input":[[1]],"output":[[0]]}]}"#;

fn config_text(task: &str, extra: &str) -> String {
    format!(
        "seed = 11\nlambda = 8\nmu = 4\nislands = 4\ngenerations = 6\nepsilon = 0.1\n\
         sigma_floor = 0.1\ntask = {task}\n{extra}"
    )
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Workspace {
        Workspace { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn setup_run(&self, config_extra: &str) -> (PathBuf, PathBuf) {
        let task = self.path("task.json");
        write(&task, IDENTITY_1X1);
        let config = self.path("run.cfg");
        write(&config, &config_text("task.json", config_extra));
        (config, self.path("out"))
    }
}

#[test]
fn degenerate_run_logs_constant_best_ever() {
    let ws = Workspace::new();
    let task = ws.path("task.json");
    write(&task, IDENTITY_1X1);
    let config = ws.path("run.cfg");
    write(&config, "seed = 1\nlambda = 8\nmu = 4\nislands = 4\ngenerations = 5\nepsilon = 0\nsigma_floor = 0\ntask = task.json\n");
    let out = ws.path("out");

    let result = run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", stderr_of(&result));

    let log = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "generation,best_gen,mean_gen,best_ever,evals,failures");
    assert_eq!(lines.len(), 6, "header plus five generations");
    let best_ever: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(3).unwrap()).collect();
    assert!(best_ever.windows(2).all(|w| w[0] == w[1]), "best_ever drifted: {best_ever:?}");
    assert!(out.join("best.genotype").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn identical_runs_write_identical_logs() {
    let ws = Workspace::new();
    let (config, _) = ws.setup_run("");
    let out_a = ws.path("a");
    let out_b = ws.path("b");
    for out in [&out_a, &out_b] {
        let result =
            run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(result.status.success(), "{}", stderr_of(&result));
    }
    let a = std::fs::read(out_a.join("curve.csv")).unwrap();
    let b = std::fs::read(out_b.join("curve.csv")).unwrap();
    assert_eq!(a, b);
    let ga = std::fs::read(out_a.join("best.genotype")).unwrap();
    let gb = std::fs::read(out_b.join("best.genotype")).unwrap();
    assert_eq!(ga, gb);
}

#[test]
fn missing_config_exits_two_and_names_the_path() {
    let result = run_cli(&["run", "--config", "/nowhere/else.cfg", "--out", "/tmp/x"]);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr_of(&result).contains("/nowhere/else.cfg"));
}

#[test]
fn unknown_config_key_exits_two_and_is_named() {
    let ws = Workspace::new();
    let (config, out) = ws.setup_run("sigma_ceiling = 9\n");
    let result =
        run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr_of(&result).contains("sigma_ceiling"));
}

#[test]
fn remote_reasoner_cannot_be_evolved() {
    let ws = Workspace::new();
    let (config, out) = ws.setup_run("reasoner = remote\nremote_endpoint = http://localhost:1\n");
    let result =
        run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr_of(&result).contains("reasoner"));
}

/// Genotype file with identity wiring for a 1x1 task: weight 1.0 from each
/// input color to the same output color. Pins the external JSON schema.
fn identity_genotype_json() -> String {
    let spec = ToyReasonerSpec::new(1, 1, 1, 1);
    let mut values = vec![0.0; spec.param_count()];
    for color in 0..COLORS {
        values[spec.weight_index(0, color, 0, color)] = 1.0;
    }
    serde_json::json!({
        "partition": [
            {"name": "weights", "len": COLORS * COLORS},
            {"name": "bias", "len": COLORS},
        ],
        "values": values,
    })
    .to_string()
}

#[test]
fn score_identity_genotype_prints_one() {
    let ws = Workspace::new();
    let task = ws.path("task.json");
    write(&task, IDENTITY_1X1);
    let genotype = ws.path("identity.genotype");
    write(&genotype, &identity_genotype_json());
    let result = run_cli(&[
        "score",
        "--task",
        task.to_str().unwrap(),
        "--genotype",
        genotype.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr_of(&result));
    assert_eq!(stdout_of(&result).trim(), "1.0000");
}

#[test]
fn score_zero_genotype_on_zero_truth_prints_one() {
    let ws = Workspace::new();
    let task = ws.path("task.json");
    write(&task, ZERO_TRUTH_1X1);
    let genotype = ws.path("zero.genotype");
    let zeros = vec![0.0; 110];
    write(
        &genotype,
        &serde_json::json!({
            "partition": [{"name": "weights", "len": 100}, {"name": "bias", "len": 10}],
            "values": zeros,
        })
        .to_string(),
    );
    let result = run_cli(&[
        "score",
        "--task",
        task.to_str().unwrap(),
        "--genotype",
        genotype.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr_of(&result));
    assert_eq!(stdout_of(&result).trim(), "1.0000");
}

#[test]
fn score_rejects_mismatched_genotype_layout() {
    let ws = Workspace::new();
    let task = ws.path("task.json");
    // 1x2 grids need a different parameter layout than the 1x1 genotype.
    write(
        &task,
        r#"{"train":[{"input":[[1,2]],"output":[[1,2]]}],"test":[{"input":[[1,2]],"output":[[1,2]]}]}"#,
    );
    let genotype = ws.path("identity.genotype");
    write(&genotype, &identity_genotype_json());
    let result = run_cli(&[
        "score",
        "--task",
        task.to_str().unwrap(),
        "--genotype",
        genotype.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(1));
    assert!(stderr_of(&result).contains("does not match"));
}

#[test]
fn score_requires_exactly_one_subject() {
    let ws = Workspace::new();
    let task = ws.path("task.json");
    write(&task, IDENTITY_1X1);
    let result = run_cli(&["score", "--task", task.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn best_genotype_rescores_to_the_logged_best() {
    let ws = Workspace::new();
    let (config, out) = ws.setup_run("");
    let result =
        run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", stderr_of(&result));

    let log = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    let final_best: f64 =
        log.lines().last().unwrap().split(',').nth(3).unwrap().parse().unwrap();

    let score_out = run_cli(&[
        "score",
        "--task",
        ws.path("task.json").to_str().unwrap(),
        "--genotype",
        out.join("best.genotype").to_str().unwrap(),
    ]);
    assert!(score_out.status.success(), "{}", stderr_of(&score_out));
    let printed: f64 = stdout_of(&score_out).trim().parse().unwrap();
    assert!((printed - final_best).abs() < 5e-5, "{printed} vs {final_best}");
}

#[test]
fn resume_reproduces_the_uninterrupted_artifacts() {
    let ws = Workspace::new();
    let (config, out) = ws.setup_run("checkpoint_every = 3\n");
    let result =
        run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", stderr_of(&result));
    let reference_log = std::fs::read(out.join("curve.csv")).unwrap();
    let reference_best = std::fs::read(out.join("best.genotype")).unwrap();

    let resumed_out = ws.path("resumed");
    let checkpoint = out.join("checkpoints").join("gen_0003");
    let result = run_cli(&[
        "resume",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--out",
        resumed_out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr_of(&result));

    let resumed_log = std::fs::read(resumed_out.join("curve.csv")).unwrap();
    assert_eq!(resumed_log, reference_log, "resumed log differs from uninterrupted log");
    let resumed_best = std::fs::read(resumed_out.join("best.genotype")).unwrap();
    assert_eq!(resumed_best, reference_best);
}

#[test]
fn resume_in_place_rebuilds_the_same_log() {
    let ws = Workspace::new();
    let (config, out) = ws.setup_run("checkpoint_every = 2\n");
    let result =
        run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", stderr_of(&result));
    let reference_log = std::fs::read(out.join("curve.csv")).unwrap();

    // Simulate an interruption: wipe the log, keep the gen-4 checkpoint.
    std::fs::remove_file(out.join("curve.csv")).unwrap();
    let checkpoint = out.join("checkpoints").join("gen_0004");
    let result = run_cli(&["resume", "--checkpoint", checkpoint.to_str().unwrap()]);
    assert!(result.status.success(), "{}", stderr_of(&result));
    let rebuilt = std::fs::read(out.join("curve.csv")).unwrap();
    assert_eq!(rebuilt, reference_log);
}

#[test]
fn resume_of_finished_run_is_a_no_op() {
    let ws = Workspace::new();
    let (config, out) = ws.setup_run("checkpoint_every = 3\n");
    let result =
        run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", stderr_of(&result));
    let before = std::fs::read(out.join("curve.csv")).unwrap();

    let checkpoint = out.join("checkpoints").join("gen_0006");
    let result = run_cli(&["resume", "--checkpoint", checkpoint.to_str().unwrap()]);
    assert!(result.status.success(), "{}", stderr_of(&result));
    assert!(stderr_of(&result).contains("already complete"));
    assert_eq!(std::fs::read(out.join("curve.csv")).unwrap(), before);
}

#[test]
fn truncated_checkpoint_is_an_integrity_error() {
    let ws = Workspace::new();
    let (config, out) = ws.setup_run("checkpoint_every = 3\n");
    let result =
        run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", stderr_of(&result));

    let mean = out.join("checkpoints").join("gen_0003").join("mean.f64le");
    let bytes = std::fs::read(&mean).unwrap();
    std::fs::write(&mean, &bytes[..bytes.len() - 4]).unwrap();

    let checkpoint = out.join("checkpoints").join("gen_0003");
    let result = run_cli(&["resume", "--checkpoint", checkpoint.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(1));
    assert!(stderr_of(&result).contains("integrity"), "{}", stderr_of(&result));
}

#[test]
fn incompatible_checkpoint_version_is_rejected() {
    let ws = Workspace::new();
    let (config, out) = ws.setup_run("checkpoint_every = 3\n");
    let result =
        run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", stderr_of(&result));

    let doc = out.join("checkpoints").join("gen_0003").join("checkpoint.json");
    let text = std::fs::read_to_string(&doc)
        .unwrap()
        .replace("\"format_version\": 1", "\"format_version\": 9");
    std::fs::write(&doc, text).unwrap();

    let result = run_cli(&["resume", "--checkpoint", doc.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(1));
    assert!(stderr_of(&result).contains("version"), "{}", stderr_of(&result));
}

#[test]
fn report_renders_two_polylines_deterministically() {
    let ws = Workspace::new();
    let log = ws.path("curve.csv");
    write(
        &log,
        "generation,best_gen,mean_gen,best_ever,evals,failures\n\
         1,0.2,0.1,0.2,8,0\n2,0.4,0.2,0.4,16,0\n3,0.3,0.25,0.4,24,0\n",
    );
    let svg_a = ws.path("a.svg");
    let svg_b = ws.path("b.svg");
    for svg in [&svg_a, &svg_b] {
        let result =
            run_cli(&["report", "--log", log.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
        assert!(result.status.success(), "{}", stderr_of(&result));
    }
    let a = std::fs::read_to_string(&svg_a).unwrap();
    assert_eq!(a.matches("<polyline").count(), 2);
    assert_eq!(a, std::fs::read_to_string(&svg_b).unwrap());
}

#[test]
fn report_of_empty_log_errors_with_no_data_rows() {
    let ws = Workspace::new();
    let log = ws.path("curve.csv");
    write(&log, "generation,best_gen,mean_gen,best_ever,evals,failures\n");
    let result = run_cli(&[
        "report",
        "--log",
        log.to_str().unwrap(),
        "--out",
        ws.path("x.svg").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(1));
    assert!(stderr_of(&result).contains("no data rows"));
}

#[test]
fn report_renders_real_run_output() {
    let ws = Workspace::new();
    let (config, out) = ws.setup_run("");
    let result =
        run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", stderr_of(&result));
    let svg = ws.path("curve.svg");
    let result = run_cli(&[
        "report",
        "--log",
        out.join("curve.csv").to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr_of(&result));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("</svg>"));
}

#[test]
fn task_set_runs_end_to_end() {
    let ws = Workspace::new();
    write(&ws.path("a.json"), IDENTITY_1X1);
    write(&ws.path("b.json"), ZERO_TRUTH_1X1);
    write(&ws.path("set.txt"), "# two tasks\na.json\nb.json\n");
    let config = ws.path("run.cfg");
    write(
        &config,
        "seed = 3\nlambda = 8\nmu = 4\nislands = 4\ngenerations = 3\nepsilon = 0.1\n\
         sigma_floor = 0.1\ntask_set = set.txt\n",
    );
    let out = ws.path("out");
    let result =
        run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", stderr_of(&result));
    assert_eq!(std::fs::read_to_string(out.join("curve.csv")).unwrap().lines().count(), 4);
}
