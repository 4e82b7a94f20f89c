//! Runs every acceptance criterion at its pinned tolerance and prints one
//! line per criterion.

use gail_lin::suites::{run_suite, Context, SUITES};

#[test]
fn acceptance() {
    let mut ctx = Context::default();
    let mut failed = Vec::new();
    for info in &SUITES {
        let outcome = run_suite(info, &mut ctx).unwrap_or_else(|e| panic!("criterion {} aborted: {e}", info.criterion));
        println!("{}", outcome.line());
        if !outcome.passed {
            failed.push(format!("{} ({})", outcome.criterion, outcome.name));
        }
    }
    assert!(failed.is_empty(), "failing criteria: {}", failed.join(", "));
}
