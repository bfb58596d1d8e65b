use std::process::Command;

use cpnshop::ppo::Checkpoint;
use cpnshop::Schedule;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bench"))
}

#[test]
fn gen_reproduces_ta01() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.txt");
    let status = bench()
        .args(["gen", "--jobs", "15", "--machines", "15", "--time-seed", "840612802", "--machine-seed", "398197754", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let parsed = cpnshop::parse_instance(&text, cpnshop::InstanceFormat::Taillard).unwrap();
    assert_eq!(parsed, cpnshop::instances::bundled::ta01());
}

#[test]
fn run_writes_report_schedules_and_events() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("report.csv");
    let sched = dir.path().join("sched");
    let output = bench()
        .args(["run", "--instances", "ta01", "--policy", "SPT,LPS", "--baseline", "SPT", "--out"])
        .arg(&csv)
        .arg("--schedules")
        .arg(&sched)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("1462"), "{stdout}");

    let report = std::fs::read_to_string(&csv).unwrap();
    assert!(report.starts_with("instance,jobs,machines,policy,makespan,decision_steps,clock_ticks,wall_ms,gap,error"));
    assert_eq!(report.lines().count(), 3);

    let s = Schedule::read_json(std::fs::File::open(sched.join("ta01_spt.json")).unwrap()).unwrap();
    assert_eq!(s.makespan, 1462);
    let events = std::fs::read_to_string(sched.join("ta01_spt.events.jsonl")).unwrap();
    assert!(events.lines().count() >= 3 * 225);
    for line in events.lines() {
        let _: serde_json::Value = serde_json::from_str(line).unwrap();
    }
}

#[test]
fn train_then_run_with_checkpoint_then_gantt() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("small.txt");
    assert!(bench()
        .args(["gen", "--jobs", "4", "--machines", "3", "--time-seed", "5", "--machine-seed", "9", "--out"])
        .arg(&inst)
        .status()
        .unwrap()
        .success());

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"rollout_len": 128, "minibatch_size": 32, "epochs": 2, "hidden": 16}"#).unwrap();
    let out = dir.path().join("run");
    let status = bench()
        .args(["train", "--steps", "256", "--instance"])
        .arg(&inst)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next().unwrap(), "step,ep_len,ep_rew,kl,entropy,vf_loss,loss");
    assert_eq!(metrics.lines().count(), 3);
    let ck = Checkpoint::load(&out.join("checkpoint.json")).unwrap();
    assert_eq!(ck.actor.len(), 3);
    assert_eq!(ck.actor[0].outputs, 16);
    assert_eq!(ck.actor[0].weights.len(), ck.actor[0].inputs * 16);

    let report = bench()
        .args(["run", "--policy", "AGENT,SPT", "--instances"])
        .arg(&inst)
        .arg("--checkpoint")
        .arg(out.join("checkpoint.json"))
        .output()
        .unwrap();
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));

    let svg = dir.path().join("g.svg");
    let csv = dir.path().join("g.csv");
    assert!(bench()
        .arg("gantt")
        .arg("--schedule")
        .arg(out.join("schedule.json"))
        .arg("--svg")
        .arg(&svg)
        .arg("--csv")
        .arg(&csv)
        .status()
        .unwrap()
        .success());
    let svg = std::fs::read_to_string(svg).unwrap();
    assert_eq!(svg.matches("<rect").count(), 12);
    let back = Schedule::read_csv(std::fs::File::open(csv).unwrap()).unwrap();
    assert_eq!(back.len(), 12);
}

#[test]
fn ablate_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"rollout_len": 256, "minibatch_size": 64, "epochs": 1, "hidden": 8}"#).unwrap();
    let out = dir.path().join("abl");
    let status = bench()
        .args(["ablate", "--mode", "no-mask", "--instance", "ta01", "--steps", "512", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("metrics.csv").exists());
}

#[test]
fn missing_instance_fails() {
    let status = bench().args(["run", "--instances", "/nonexistent/*.txt"]).status().unwrap();
    assert!(!status.success());
}
