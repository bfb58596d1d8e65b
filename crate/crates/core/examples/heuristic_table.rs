//! Makespans of the six dispatching rules and the random baseline on the
//! bundled Taillard instances, with gaps against SPT.

use cpnshop::bench::{run_bench, BenchConfig};
use cpnshop::instances::bundled;
use cpnshop::PolicyKind;

fn main() {
    let instances = vec![
        ("ta01".to_string(), bundled::ta01()),
        ("ta31".to_string(), bundled::ta31()),
        ("ta41".to_string(), bundled::ta41()),
    ];
    let mut policies = PolicyKind::HEURISTICS.to_vec();
    policies.push(PolicyKind::Random);
    let config = BenchConfig {
        baseline: Some(PolicyKind::Spt),
        seed: 1,
        ..BenchConfig::default()
    };
    let mut report = run_bench(&instances, &policies, &config);
    report
        .notes
        .push("ta01 is also what generate_random(15, 15, 840612802, 398197754) produces".into());
    print!("{}", report.to_text());
    std::process::exit(if report.all_ok() { 0 } else { 1 });
}
