//! Acceptance matrix. Runs every criterion (or those given as numeric
//! arguments, e.g. `cargo test --test acceptance -- 1 2 12`) and prints one
//! line per criterion.

use std::io::Write;
use std::process::ExitCode;

use pwconvex::harness::certify::run_all;

fn main() -> ExitCode {
    let ids: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .filter(|id| (1..=12).contains(id))
        .collect();
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    println!("acceptance criteria");
    let results = run_all(&ids, &mut |r| {
        println!("{r}");
        std::io::stdout().flush().ok();
    });
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
