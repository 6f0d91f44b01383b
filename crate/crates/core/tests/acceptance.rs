//! The twelve acceptance criteria. Runs without the libtest harness so that
//! one PASS/FAIL line per criterion is always printed; exits non-zero if
//! any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use besovlab::report::{Report, Row};
use besovlab::semigroup::SmoothingCase;
use besovlab::suite::{run_suite, DomainConfig, ExperimentConfig, SuiteSpec, Timing};

fn run(cfg: &ExperimentConfig) -> (Report, Timing) {
    run_suite(cfg, Path::new("."), 0).expect("acceptance config is valid")
}

fn suite(name: &str) -> SuiteSpec {
    SuiteSpec::by_name(name).unwrap()
}

fn rows_of<'a>(report: &'a Report, prefixes: &[&str]) -> Vec<&'a Row> {
    report.rows.iter().filter(|r| prefixes.iter().any(|p| r.suite.starts_with(p))).collect()
}

struct Outcome {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn judge(id: usize, title: &'static str, rows: &[&Row], extra: Option<(bool, String)>) -> Outcome {
    let failed: Vec<&&Row> = rows.iter().filter(|r| !r.pass).collect();
    let mut pass = !rows.is_empty() && failed.is_empty();
    let mut detail = format!("{} rows", rows.len());
    if let Some(r) = failed.first() {
        detail += &format!(", {} failed; first: {} = {:.6e} {}", failed.len(), r.suite, r.value, r.params);
        if let Some(n) = &r.note {
            detail += &format!(" ({n})");
        }
    }
    if let Some((ok, msg)) = extra {
        pass &= ok;
        detail += &format!("; {msg}");
    }
    Outcome { id, title, pass, detail }
}

fn timed(limit: Duration, t: Duration) -> Option<(bool, String)> {
    Some((t < limit, format!("{:.1} s (limit {} s)", t.as_secs_f64(), limit.as_secs())))
}

fn main() -> ExitCode {
    let mut out = Vec::new();

    // 1 and 2 on their own, for the runtime bound.
    let t0 = Instant::now();
    let (rep, _) = run(&ExperimentConfig::new(DomainConfig::interval(255), vec![suite("partition")]));
    out.push(judge(
        1,
        "partition exactness (n = 255)",
        &rows_of(&rep, &["partition."]),
        timed(Duration::from_secs(5), t0.elapsed()),
    ));
    let (rep, _) = run(&ExperimentConfig::new(DomainConfig::interval(255), vec![suite("spectral")]));
    out.push(judge(
        2,
        "spectral correctness (n = 255)",
        &rows_of(&rep, &["spectral.closed_form", "spectral.lambda_min"]),
        None,
    ));

    // 3: three 1-D cases at n = 511 and the 2-D case on a 48 x 48 square.
    let t0 = Instant::now();
    let (one, _) = run(&ExperimentConfig::new(DomainConfig::interval(511), vec![suite("smoothing")]));
    let square = SuiteSpec::Smoothing { cases: Some(vec![SmoothingCase::lp_gain(2.0, 1.0, f64::INFINITY)]) };
    let (two, _) = run(&ExperimentConfig::new(DomainConfig::square(48), vec![square]));
    let mut r3 = rows_of(&one, &["smoothing."]);
    r3.extend(rows_of(&two, &["smoothing."]));
    out.push(judge(3, "smoothing rates (1-D n = 511, 2-D 48x48)", &r3, timed(Duration::from_secs(300), t0.elapsed())));

    // 4-12 from the default battery on n = 255, run twice.
    let battery = ExperimentConfig::default_battery(255);
    let (a, ta) = run(&battery);
    let (b, tb) = run(&battery);
    let groups: [(usize, &'static str, &[&str]); 8] = [
        (4, "boundedness, embedding, lifting (n = 255 -> 511)", &["boundedness.", "embedding.", "lifting."]),
        (5, "block decay rates and prefactor power", &["block_decay."]),
        (6, "strong and weak continuity", &["continuity."]),
        (7, "equivalent norms (n = 255 -> 511)", &["equivalence."]),
        (8, "maximal regularity (n = 255 -> 511)", &["maximal_regularity."]),
        (9, "block multipliers, factorization, amalgam bounds", &["multiplier.", "factorization.", "amalgam."]),
        (10, "Gaussian kernel bound", &["gaussian."]),
        (11, "interpolation", &["interpolation."]),
    ];
    for (id, title, prefixes) in groups {
        out.push(judge(id, title, &rows_of(&a, prefixes), None));
    }
    let same = a.to_csv() == b.to_csv() && a.to_json() == b.to_json();
    let slowest = ta.total.max(tb.total);
    out.push(Outcome {
        id: 12,
        title: "determinism and battery runtime (n = 255)",
        pass: same && slowest < 600.0,
        detail: format!(
            "{} rows, byte-identical: {same}; runs {:.1} s and {:.1} s (limit 600 s)",
            a.rows.len(),
            ta.total,
            tb.total
        ),
    });

    println!();
    for o in &out {
        println!("criterion {:>2} {} {} -- {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.title, o.detail);
    }
    let extra = rows_of(&a, &["inhomogeneous.", "low_frequency."]);
    let bad = extra.iter().filter(|r| !r.pass).count();
    println!("supplementary: inhomogeneous suite {} rows, {bad} failed", extra.len());
    for (name, secs) in &ta.suites {
        println!("  {name:<20} {secs:>7.1} s");
    }
    let failed: Vec<usize> = out.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
