//! Acceptance criteria 1 through 9, one PASS/FAIL line each, with wall-clock limits.

use std::time::{Duration, Instant};

use nslab_cli::{run_criterion, RunConfig};

const CRITERIA: [(u8, &str, u64); 9] = [
    (1, "exact identities", 30),
    (2, "constant A", 10),
    (3, "CR residuals", 120),
    (4, "psi suite", 60),
    (5, "section decay", 300),
    (6, "covering and sums", 300),
    (7, "pencil", 600),
    (8, "monodromy", 5),
    (9, "odd case", 60),
];

#[test]
fn acceptance() {
    let cfg = RunConfig::default();
    let mut failed = Vec::new();
    for (n, name, limit) in CRITERIA {
        let t = Instant::now();
        let rep = run_criterion(n, &cfg);
        let dt = t.elapsed();
        let slow = dt > Duration::from_secs(limit);
        let (ok, detail) = match &rep {
            Ok(r) => {
                let bad: Vec<String> = r.failures().map(|c| format!("{} = {:e} (bound {:e})", c.name, c.value, c.bound)).collect();
                (bad.is_empty(), bad.join("; "))
            }
            Err(e) => (false, format!("error: {e:#}")),
        };
        let ok = ok && !slow;
        let checks = rep.as_ref().map(|r| r.checks.len()).unwrap_or(0);
        println!(
            "criterion {n} ({name}): {} [{checks} checks, {:.2}s, limit {limit}s{}]{}",
            if ok { "PASS" } else { "FAIL" },
            dt.as_secs_f64(),
            if slow { ", over time" } else { "" },
            if detail.is_empty() { String::new() } else { format!(" {detail}") }
        );
        if !ok {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
