use std::process::ExitCode;

use latgauge_core::acceptance::{run_all, CRITERIA};

fn main() -> ExitCode {
    let seed = std::env::var("LATGAUGE_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_240_601);
    println!("acceptance: {CRITERIA} criteria, seed {seed}");
    let reports = run_all(seed);
    for r in &reports {
        println!("{r}");
    }
    let failed: Vec<usize> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    println!(
        "acceptance: {} passed, {} failed {:?}",
        reports.len() - failed.len(),
        failed.len(),
        failed
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
