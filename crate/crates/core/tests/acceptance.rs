//! Acceptance run: one line per criterion, then the diagnostics.
//! Exits nonzero if any criterion fails.

use effc_core::validation::{run_criterion, CriterionReport, Suite};

const SEED: u64 = 42;

fn main() {
    // libtest flags (e.g. a name filter) are accepted and ignored.
    let mut reports: Vec<CriterionReport> = Vec::new();
    for &id in Suite::Full.criteria() {
        match run_criterion(id, Suite::Full, SEED) {
            Ok(r) => {
                println!("{r}");
                reports.push(r);
            }
            Err(e) => println!("criterion {id:>2} FAIL error: {e}"),
        }
    }
    println!();
    for r in &reports {
        for n in &r.notes {
            println!("  [{}] {n}", r.id);
        }
    }
    let failed: Vec<u32> =
        Suite::Full.criteria().iter().copied().filter(|id| !reports.iter().any(|r| r.id == *id && r.passed)).collect();
    println!();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", reports.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
