//! Runs without the libtest harness so every outcome line is printed.

use std::process::ExitCode;

use qwalk_core::selftest::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let outcomes: Vec<_> = (1..=CRITERIA.len()).map(run_criterion).collect();
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    if failed.is_empty() {
        println!("acceptance: {} of {} criteria passed", outcomes.len(), outcomes.len());
        ExitCode::SUCCESS
    } else {
        eprintln!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
