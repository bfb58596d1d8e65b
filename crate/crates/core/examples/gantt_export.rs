//! Solve ta31 with SPT and write the plan as JSON, CSV and an SVG Gantt
//! chart (one row per machine).
//!
//! ```text
//! cargo run --example gantt_export -- out/
//! ```

use std::path::PathBuf;

use cpnshop::bench::{export_gantt, GanttFormat};
use cpnshop::instances::bundled;
use cpnshop::{run_episode, EnvConfig, PolicyKind, RulePolicy, Schedule};

fn main() -> cpnshop::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&dir)?;
    let inst = bundled::ta31();
    let out = run_episode(&mut RulePolicy::new(PolicyKind::Spt, 0)?, &inst, &EnvConfig::default())?;

    for (file, format) in [("ta31_spt.json", GanttFormat::Json), ("ta31_spt.csv", GanttFormat::Csv), ("ta31_spt.svg", GanttFormat::Svg)] {
        let path = dir.join(file);
        export_gantt(&out.schedule, &path, format)?;
        println!("wrote {}", path.display());
    }

    let back = Schedule::read_json(std::fs::File::open(dir.join("ta31_spt.json"))?)?;
    assert_eq!(back, out.schedule);
    println!("makespan {}, {} operations", back.makespan, back.len());
    Ok(())
}
