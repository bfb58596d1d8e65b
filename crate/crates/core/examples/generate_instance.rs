//! Generate an instance with the Taillard linear congruential generator and
//! round-trip it through both text formats.
//!
//! ```text
//! cargo run --example generate_instance -- 20 15 1234567 7654321
//! ```

use cpnshop::instances::{bundled, generate_random, parse_instance, InstanceFormat, LcgState};

fn main() -> cpnshop::Result<()> {
    let args: Vec<i64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let (jobs, machines, time_seed, machine_seed) = match args[..] {
        [j, m, t, k] => (j as usize, m as usize, t, k),
        _ => (15, 15, 840_612_802, 398_197_754),
    };

    // The raw stream: Schrage's method keeps 16807 * x mod (2^31 - 1) in range.
    let mut lcg = LcgState::new(time_seed)?;
    let first: Vec<i64> = (0..3).map(|_| lcg.uniform_int(1, 99)).collect::<Result<_, _>>()?;
    println!("first draws of U[1, 99] from seed {time_seed}: {first:?}");

    let inst = generate_random(jobs, machines, time_seed, machine_seed)?;
    println!(
        "{}x{} instance, {} operations, longest {}",
        inst.num_jobs(),
        inst.num_machines(),
        inst.total_operations(),
        inst.max_duration()
    );
    if inst == bundled::ta01() {
        println!("(these are the published seeds of ta01)");
    }

    let taillard = inst.to_taillard()?;
    let orlib = inst.to_orlib();
    assert_eq!(parse_instance(&taillard, InstanceFormat::Taillard)?, inst);
    assert_eq!(parse_instance(&orlib, InstanceFormat::Orlib)?, inst);
    println!("\nOR-library form:\n{}", orlib.lines().take(4).collect::<Vec<_>>().join("\n"));
    println!("...");
    Ok(())
}
