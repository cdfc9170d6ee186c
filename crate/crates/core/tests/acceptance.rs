//! Acceptance gate: one line per criterion, exact comparisons at the configured precision.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use drl_core::verify::{run_suite, RunConfig, SuiteReport};

fn config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn with_levels(mut cfg: RunConfig, levels: &[u32]) -> RunConfig {
    cfg.levels = levels.to_vec();
    cfg
}

/// Asserted cases whose name starts with `prefix`.
fn asserted<'a>(report: &'a SuiteReport, prefix: &'a str) -> impl Iterator<Item = &'a drl_core::verify::CaseRecord> {
    report.cases.iter().filter(move |c| c.asserted() && c.case.starts_with(prefix))
}

struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { failures: Vec::new(), notes: Vec::new() }
    }

    fn suite(&mut self, label: &str, report: &SuiteReport) {
        let failed: Vec<String> = report.failures().take(3).map(|c| format!("{}: {}", c.case, c.got)).collect();
        if !failed.is_empty() {
            self.failures.push(format!("{label}/{}: {}", report.suite, failed.join("; ")));
        }
    }

    /// At least `min` asserted cases named `prefix`, all passing.
    fn count(&mut self, label: &str, report: &SuiteReport, prefix: &str, min: usize) {
        let cases: Vec<_> = asserted(report, prefix).collect();
        let passed = cases.iter().filter(|c| c.pass).count();
        if cases.len() < min || passed < cases.len() {
            self.failures.push(format!("{label}: `{prefix}` {passed}/{} passed, need >= {min}", cases.len()));
        }
    }

    fn frozen(&mut self, label: &str, report: &SuiteReport, case: &str, got: &str) {
        match report.cases.iter().find(|c| c.case == case) {
            Some(c) if c.pass && c.got == got => {}
            Some(c) => self.failures.push(format!("{label}: {case} gave {} (pass {}), frozen {got}", c.got, c.pass)),
            None => self.failures.push(format!("{label}: no case {case}")),
        }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }
}

fn run(label: &str, suite: &str, cfg: &RunConfig, check: &mut Check) -> SuiteReport {
    let report = run_suite(suite, cfg).unwrap_or_else(|e| panic!("{label}/{suite}: {e}"));
    check.suite(label, &report);
    report
}

fn logexp(check: &mut Check) {
    for (label, file) in [("carlitz q=2", "carlitz2.conf"), ("carlitz q=3", "carlitz3.conf"), ("variant", "variant2.conf")] {
        let cfg = config(file);
        check.require(cfg.tau_trunc == 8 && cfg.pi_prec == 32, format!("{label}: expected tau^8 at precision 32"));
        let r = run(label, "logexp", &cfg, check);
        for i in 1..=8 {
            check.count(label, &r, &format!("mu(c_{i}) >="), 1);
            check.count(label, &r, &format!("mu(d_{i}) >="), 1);
        }
        check.count(label, &r, "lambda rho_a = a lambda", 2);
        check.count(label, &r, "e o lambda = id", 1);
        check.count(label, &r, "lambda o e = id", 1);
    }
}

fn tower(check: &mut Check) {
    for (label, file, levels) in [("carlitz q=2", "carlitz2.conf", &[1, 2, 3, 4][..]), ("carlitz q=3", "carlitz3.conf", &[1, 2, 3][..])] {
        let r = run(label, "tower", &with_levels(config(file), levels), check);
        for n in levels {
            check.count(label, &r, &format!("g_{n} Eisenstein"), 1);
            check.count(label, &r, &format!("dlog o action = id on O/eta^{n}"), 1);
        }
    }
}

fn different_reports(check: &mut Check) -> Vec<(&'static str, Vec<u32>, SuiteReport)> {
    [("carlitz q=2", "carlitz2.conf", vec![1, 2, 3, 4]), ("carlitz q=3", "carlitz3.conf", vec![1, 2, 3])]
        .into_iter()
        .map(|(label, file, levels)| {
            let r = run(label, "different", &with_levels(config(file), &levels), check);
            (label, levels, r)
        })
        .collect()
}

fn different(check: &mut Check) {
    let frozen: [(&str, &[&str]); 2] =
        [("carlitz q=2", &["(1, 0)", "(2, 1)", "(3, 2)", "(4, 3)"]), ("carlitz q=3", &["(1, 1/2)", "(2, 3/2)", "(3, 5/2)"])];
    let reports = different_reports(check);
    for ((label, levels, r), (_, values)) in reports.iter().zip(frozen) {
        for (n, got) in levels.iter().zip(values) {
            check.frozen(label, r, &format!("mu(g_{n}'(v_{n}))"), got);
        }
    }
}

fn trace_bounds(check: &mut Check) {
    for (label, levels, r) in different_reports(check) {
        for n in levels {
            check.count(label, &r, &format!("trace bounds at level {n}"), 200);
        }
    }
}

fn delta(check: &mut Check) {
    let label = "carlitz q=2";
    let r = run(label, "delta", &with_levels(config("carlitz2.conf"), &[1, 2, 3]), check);
    for n in 1..=3 {
        check.count(label, &r, &format!("delta_{n}(v_{n}) = 1/v_{n}"), 1);
        check.count(label, &r, &format!("re-lift at level {n}"), 100);
        check.count(label, &r, &format!("additivity at level {n}"), 100);
    }
    for (n, m) in [(1, 2), (2, 3)] {
        check.count(label, &r, &format!("delta_{m} = eta^1 delta_{n} on units of E^{n}"), 1);
        check.count(label, &r, &format!("delta_{m} = eta^1 delta_{n} on non-units of E^{n}"), 1);
        check.count(label, &r, &format!("T_{m},{n} delta_{m} = eta delta_{n} N_{m},{n}"), 10);
        let strict: Vec<_> = r
            .cases
            .iter()
            .filter(|c| c.case == format!("delta_{m} = eta^1 delta_{n} mod D_m on non-units of E^{n}"))
            .collect();
        let held = strict.iter().filter(|c| c.pass).count();
        check.note(format!("({n},{m}) non-units mod D_m {held}/{}", strict.len()));
    }
}

fn pairing(check: &mut Check) {
    let label = "carlitz q=2";
    let cfg = config("carlitz2.conf");
    let r = run(label, "pairing-bilinear", &cfg, check);
    check.count(label, &r, "bilinearity", 200);
    let maj = run(label, "majoration", &cfg, check);
    for &n in &cfg.levels {
        check.count(label, &r, &format!("log vs log-free at level {n}"), 1);
        let vanishing = maj
            .cases
            .iter()
            .filter(|c| c.case.starts_with("vanishing above ") && c.case.ends_with(&format!(" at level {n}")))
            .collect::<Vec<_>>();
        let ok = vanishing.iter().all(|c| c.pass) && vanishing.len() >= 100;
        check.require(ok, format!("{label}: vanishing at level {n}: {} cases", vanishing.len()));
    }
}

fn main_theorem_r(check: &mut Check) {
    for (label, file) in [("carlitz q=2", "carlitz2.conf"), ("variant", "variant2.conf")] {
        let r = run(label, "main-theorem-r", &with_levels(config(file), &[1, 2]), check);
        for n in 1..=2 {
            check.count(label, &r, &format!("[alpha, r_{n}(alpha)] = 0"), 100);
            if file == "carlitz2.conf" {
                check.count(label, &r, &format!("r_{n} for Carlitz"), 1);
            } else {
                let computed = r.cases.iter().any(|c| c.case == format!("r_{n}") && c.pass);
                check.require(computed, format!("{label}: r_{n} not computed"));
            }
        }
    }
}

fn main_theorem_lhs(check: &mut Check) {
    let label = "carlitz q=2";
    let r = run(label, "main-theorem-lhs", &with_levels(config("carlitz2.conf"), &[1, 2]), check);
    check.count(label, &r, "Kummer route = pairing at n = 1, m = 5", 50);
    check.frozen(label, &r, "agreement count at n = 1, m = 5", "50/50");
    check.count(label, &r, "value distribution at n = 1, m = 5", 1);
    if let Some(c) = r.cases.iter().find(|c| c.case.starts_with("value distribution")) {
        check.note(format!("distribution {}", c.got));
    }
    for m in [4, 5, 6] {
        let case = format!("Kummer route at n = 2, m = {m}");
        match r.cases.iter().find(|c| c.case == case) {
            Some(c) => check.note(format!("n=2 m={m}: {}", c.got)),
            None => check.require(false, format!("{label}: no exploratory run {case}")),
        }
    }
    match r.cases.iter().find(|c| c.case == "stabilization at n = 2") {
        Some(c) => check.note(c.got.clone()),
        None => check.require(false, format!("{label}: no stabilization note")),
    }
}

fn level_shift(check: &mut Check) {
    let label = "carlitz q=2";
    let r = run(label, "level-shift", &with_levels(config("carlitz2.conf"), &[1, 2, 3]), check);
    for (n, m) in [(1, 2), (1, 3), (2, 3)] {
        check.count(label, &r, &format!("[rho_eta^{}(alpha), beta']_{m} = [alpha, N beta']_{n}", m - n), 50);
    }
}

fn iwasawa(check: &mut Check) {
    let label = "carlitz q=2";
    let r = run(label, "iwasawa", &with_levels(config("carlitz2.conf"), &[1, 2]), check);
    for n in 1..=2 {
        check.count(label, &r, &format!("psi unique and explicit at level {n}"), 1);
        check.count(label, &r, &format!("psi reproduces the pairing at level {n}"), 50);
        check.count(label, &r, &format!("psi homomorphic in beta at level {n}"), 1);
    }
}

fn conjugation(check: &mut Check) {
    let runs = [
        ("carlitz q=3", "carlitz3.conf", "scalar -1"),
        ("carlitz q=2", "carlitz2.conf", "1 + pi tau"),
        ("variant", "variant2.conf", "r_1"),
        ("variant", "variant2.conf", "r_2"),
    ];
    for (label, file, t) in runs {
        let r = run(label, "conjugation", &config(file), check);
        check.count(label, &r, &format!("pairing invariant under {t} at level 1"), 10);
        if t.starts_with("scalar") {
            check.count(label, &r, &format!("lambda' = c^-1 lambda c for {t}"), 1);
        }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn(&mut Check),
}

const CRITERIA: [Criterion; 11] = [
    Criterion { id: 1, name: "log/exp contracts", budget: Duration::from_secs(5), run: logexp },
    Criterion { id: 2, name: "tower structure", budget: Duration::from_secs(30), run: tower },
    Criterion { id: 3, name: "different valuation", budget: Duration::from_secs(5), run: different },
    Criterion { id: 4, name: "trace bounds", budget: Duration::from_secs(30), run: trace_bounds },
    Criterion { id: 5, name: "delta well-definedness and homomorphism", budget: Duration::from_secs(60), run: delta },
    Criterion { id: 6, name: "pairing formula properties", budget: Duration::from_secs(60), run: pairing },
    Criterion { id: 7, name: "main theorem via r_n", budget: Duration::from_secs(120), run: main_theorem_r },
    Criterion { id: 8, name: "main theorem via the Kummer route", budget: Duration::from_secs(600), run: main_theorem_lhs },
    Criterion { id: 9, name: "level shift", budget: Duration::from_secs(120), run: level_shift },
    Criterion { id: 10, name: "Iwasawa functional", budget: Duration::from_secs(120), run: iwasawa },
    Criterion { id: 11, name: "conjugation invariance", budget: Duration::from_secs(120), run: conjugation },
];

fn main() -> ExitCode {
    let mut failed = 0;
    for criterion in &CRITERIA {
        let mut check = Check::new();
        let start = Instant::now();
        (criterion.run)(&mut check);
        let elapsed = start.elapsed();
        check.require(elapsed < criterion.budget, format!("took {elapsed:?}, budget {:?}", criterion.budget));
        let status = if check.failures.is_empty() { "PASS" } else { "FAIL" };
        let mut details = check.failures.clone();
        details.extend(check.notes.iter().cloned());
        println!("criterion {}: {status} {} ({} ms){}", criterion.id, criterion.name, elapsed.as_millis(), if details.is_empty() {
            String::new()
        } else {
            format!(" [{}]", details.join(" | "))
        });
        if !check.failures.is_empty() {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all {} criteria pass", CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria fail", CRITERIA.len());
        ExitCode::FAILURE
    }
}
