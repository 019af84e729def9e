//! Run orchestration: executes a validated configuration behind the
//! convexity audit gate, writes the artifact files, and reduces every
//! enabled check to a single overall verdict.

use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::asymptotics::{
    check_dist_monotone, check_energy_sandwich, check_monotone_in_ell, check_pointwise_bounds,
    fit_exponential, fit_power, no_growth_trend, run_sweep, sweep_csv, RateFit, SweepConfig,
};
use crate::config::{CommandKind, RunConfig};
use crate::domain::field::write_field_dump;
use crate::domain::{CylinderSpec, Field};
use crate::error::{Error, Result};
use crate::integrand::{audit_all, IntegrandSpec};
use crate::onedim::{fit_middecay, onedim_csv, run_onedim, OneDimCoerciveSpec, OneDimSourceSpec};
use crate::report::{fmt_f64, TextReport};
use crate::solver::solve_cylinder;

/// How a completed run came out. Failures to complete at all (solver or
/// I/O trouble) surface as errors instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Pass,
    CheckFailed,
}

/// Accumulates named checks for the summary; a check is a claim plus a
/// verdict, and skipped checks carry a reason instead of a verdict.
struct Checks {
    report: TextReport,
    all_pass: bool,
}

impl Checks {
    fn new() -> Self {
        Checks {
            report: TextReport::new(),
            all_pass: true,
        }
    }

    fn add(&mut self, name: &str, claim: &str, pass: bool) {
        self.report.set(&format!("check.{name}.claim"), claim);
        self.report.set_bool(&format!("check.{name}.pass"), pass);
        self.all_pass &= pass;
    }

    fn skip(&mut self, name: &str, claim: &str, why: &str) {
        self.report.set(&format!("check.{name}.claim"), claim);
        self.report.set(&format!("check.{name}.skipped"), why);
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.report.set_f64(&format!("metric.{name}"), value);
    }

    fn count(&mut self, name: &str, value: usize) {
        self.report.set(&format!("metric.{name}"), value);
    }
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn dump_field(dir: &Path, name: &str, u: &Field) -> Result<()> {
    let mut buf = Vec::new();
    write_field_dump(u, &mut buf)?;
    fs::write(dir.join(name), buf)?;
    Ok(())
}

fn wants(cfg: &RunConfig, format: &str) -> bool {
    cfg.output.formats.iter().any(|f| f == format)
}

fn record_fit(checks: &mut Checks, name: &str, claim: &str, fit: &RateFit) {
    checks.metric(&format!("{name}_rate"), fit.rate);
    checks.metric(&format!("{name}_r_squared"), fit.r_squared);
    checks.add(name, claim, fit.bound_satisfied);
}

/// Execute a parsed configuration, writing artifacts into `out_dir`.
/// `seed_override` (the CLI flag) takes precedence over the configured seed.
pub fn run(cfg: &RunConfig, out_dir: &Path, seed_override: Option<u64>) -> Result<RunStatus> {
    let t0 = Instant::now();
    fs::create_dir_all(out_dir)?;
    let seed = seed_override.unwrap_or(cfg.audit.seed);
    write_text(out_dir, "config_echo.toml", &cfg.to_toml())?;

    let spec = cfg.integrand_spec()?;
    let mut checks = Checks::new();
    checks.report.set("run.command", cfg.command.word());
    checks.report.set("run.seed", seed);

    // Gate: whatever constants the configuration declares (or the built-in
    // sharp ones) must actually hold on sampled gradient pairs before any
    // solve is trusted.
    let bundle = audit_all(&spec, cfg.audit.count, seed, cfg.audit.tol);
    write_text(out_dir, "audit_report.txt", &bundle.text().render())?;
    checks.add(
        "modulus_audit",
        "declared convexity and growth constants hold on sampled gradient pairs",
        bundle.pass,
    );

    if bundle.pass {
        match cfg.command {
            CommandKind::Audit => {}
            CommandKind::Solve => run_solve(cfg, &spec, out_dir, &mut checks)?,
            CommandKind::Sweep => run_sweep_cmd(cfg, &spec, out_dir, &mut checks)?,
            CommandKind::Onedim => run_onedim_cmd(cfg, &spec, out_dir, &mut checks)?,
        }
    }

    checks.report.set_bool("run.pass", checks.all_pass);
    write_text(out_dir, "summary.txt", &checks.report.render())?;

    let mut meta = TextReport::new();
    meta.set("command", cfg.command.word());
    meta.set("out_dir", out_dir.display());
    meta.set("seed", seed);
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    meta.set("unix_time", stamp);
    meta.set_f64("wall_seconds", t0.elapsed().as_secs_f64());
    write_text(out_dir, "run_meta.txt", &meta.render())?;

    Ok(if checks.all_pass {
        RunStatus::Pass
    } else {
        RunStatus::CheckFailed
    })
}

fn run_solve(
    cfg: &RunConfig,
    spec: &IntegrandSpec,
    out_dir: &Path,
    checks: &mut Checks,
) -> Result<()> {
    let d = cfg.domain.as_ref().expect("validated");
    let cyl = CylinderSpec {
        ell: d.ell.expect("validated"),
        cross: cfg.cross()?,
    };
    let f = cfg.source_term()?;
    let opts = cfg.solver_options();
    let sol = solve_cylinder(spec, &cyl, &f, d.h, &opts, cfg.method(), None)?;
    if !sol.converged {
        return Err(Error::Solver(format!(
            "cylinder solve stopped by {} without converging",
            sol.reason.word()
        )));
    }
    checks.metric("energy", sol.energy);
    checks.metric("grad_sup", sol.grad_sup);
    checks.count("iterations", sol.iterations);
    checks.add(
        "solver_converged",
        "the minimizer search reached a stopping criterion other than the iteration cap",
        true,
    );
    if wants(cfg, "report") {
        let mut rep = TextReport::new();
        rep.set_f64("ell", cyl.ell);
        rep.set_f64("h", d.h);
        rep.set_f64("energy", sol.energy);
        rep.set("iterations", sol.iterations);
        rep.set("stop_reason", sol.reason.word());
        rep.set_f64("grad_sup", sol.grad_sup);
        if let Some(c) = sol.certificate {
            rep.set_f64("distance_certificate", c);
        }
        write_text(out_dir, "solution_report.txt", &rep.render())?;
    }
    if wants(cfg, "dump") {
        dump_field(out_dir, "u_ell.txt", &sol.field)?;
    }
    Ok(())
}

fn run_sweep_cmd(
    cfg: &RunConfig,
    spec: &IntegrandSpec,
    out_dir: &Path,
    checks: &mut Checks,
) -> Result<()> {
    let d = cfg.domain.as_ref().expect("validated");
    let sweep_cfg = SweepConfig {
        spec: spec.clone(),
        cross: cfg.cross()?,
        f: cfg.source_term()?,
        ells: d.ells.clone().expect("validated"),
        h: d.h,
        method: cfg.method(),
        solver: cfg.solver_options(),
    };
    let outcome = run_sweep(&sweep_cfg)?;
    if !outcome.failures.is_empty() {
        let msgs: Vec<String> = outcome
            .failures
            .iter()
            .map(|(ell, msg)| format!("ell = {ell}: {msg}"))
            .collect();
        return Err(Error::Solver(format!(
            "sweep solves failed at {}",
            msgs.join("; ")
        )));
    }
    if wants(cfg, "csv") {
        write_text(out_dir, "sweep.csv", &sweep_csv(&outcome.records))?;
    }

    let ells: Vec<f64> = outcome.records.iter().map(|r| r.ell).collect();
    let dists: Vec<f64> = outcome.records.iter().map(|r| r.dist_half).collect();
    let rate_claim = "the half-cylinder distance decays at least at the guaranteed rate";
    let fit = if spec.q == 2.0 {
        fit_exponential(&ells, &dists)
    } else {
        fit_power(&ells, &dists, 1.0 / (spec.q - 1.0))
    };
    match fit {
        Ok(fit) => {
            if wants(cfg, "report") {
                write_text(out_dir, "rates.txt", &fit.text().render())?;
            }
            record_fit(checks, "decay_rate", rate_claim, &fit);
        }
        Err(e) => checks.skip("decay_rate", rate_claim, &e.to_string()),
    }

    let mono = check_dist_monotone(&outcome.records);
    checks.count("dist_floor_ties", mono.floor_ties);
    checks.add(
        "distance_monotone",
        "the half-cylinder distance does not increase with the half-length",
        mono.pass,
    );

    let sandwich_claim =
        "energy per unit length dominates the cross-section energy and the excess decays like 1/ell";
    match check_energy_sandwich(&outcome.records) {
        Ok(sand) => {
            checks.metric("min_gap", sand.min_gap);
            checks.metric("gap_times_ell_max", sand.c_empirical);
            checks.metric("gap_max_over_median", sand.max_over_median);
            checks.add("energy_sandwich", sandwich_claim, sand.pass);
        }
        Err(e) => checks.skip("energy_sandwich", sandwich_claim, &e.to_string()),
    }

    let slices: Vec<f64> = outcome.records.iter().map(|r| r.slice_energy_max).collect();
    checks.add(
        "slice_energy_trend",
        "the largest unit-slab energy does not grow along the sweep",
        no_growth_trend(&slices),
    );
    let collars: Vec<f64> = outcome.records.iter().map(|r| r.collar_grad_max).collect();
    checks.add(
        "collar_gradient_trend",
        "the largest collar gradient mass does not grow along the sweep",
        no_growth_trend(&collars),
    );

    let mut bound_violations = 0usize;
    let mut bound_skipped = false;
    for sol in &outcome.solutions {
        let rep = check_pointwise_bounds(&sol.field, &outcome.cross.field, &sweep_cfg.f)?;
        bound_skipped |= rep.skipped;
        bound_violations += rep.violations;
    }
    let bounds_claim = "every solution lies nodally between zero and the extended cross-section solution";
    if bound_skipped {
        checks.skip("pointwise_bounds", bounds_claim, "the source changes sign");
    } else {
        checks.count("bound_violations", bound_violations);
        checks.add("pointwise_bounds", bounds_claim, bound_violations == 0);
    }

    let mut nest_violations = 0usize;
    let mut nest_skipped = false;
    for w in outcome.solutions.windows(2) {
        let rep = check_monotone_in_ell(&w[0].field, &w[1].field, &sweep_cfg.f)?;
        nest_skipped |= rep.skipped;
        nest_violations += rep.violations;
    }
    let nest_claim = "solutions on nested cylinders are nodally ordered";
    if outcome.solutions.len() < 2 {
        checks.skip("domain_monotonicity", nest_claim, "needs at least two half-lengths");
    } else if nest_skipped {
        checks.skip("domain_monotonicity", nest_claim, "the source changes sign");
    } else {
        checks.count("nesting_violations", nest_violations);
        checks.add("domain_monotonicity", nest_claim, nest_violations == 0);
    }

    if wants(cfg, "dump") {
        dump_field(out_dir, "u_infty.txt", &outcome.cross.field)?;
        for (rec, sol) in outcome.records.iter().zip(&outcome.solutions) {
            dump_field(out_dir, &format!("u_ell_{}.txt", fmt_f64(rec.ell)), &sol.field)?;
        }
    }
    Ok(())
}

fn run_onedim_cmd(
    cfg: &RunConfig,
    spec: &IntegrandSpec,
    out_dir: &Path,
    checks: &mut Checks,
) -> Result<()> {
    let oc = cfg.onedim.as_ref().expect("validated");
    let source = OneDimSourceSpec {
        gamma: oc.gamma,
        ell: oc.ells[0],
        spec: spec.clone(),
    };
    let coercive = OneDimCoerciveSpec {
        bv_left: oc.bv_left,
        bv_right: oc.bv_right,
        q: oc.coercive_q.unwrap_or(spec.q),
        spec: spec.clone(),
    };
    let opts = cfg.solver_options();
    let records = run_onedim(&source, &coercive, &oc.ells, oc.h, &opts, cfg.method())?;
    if wants(cfg, "csv") {
        write_text(out_dir, "onedim.csv", &onedim_csv(&records))?;
    }

    let violations: usize = records.iter().map(|r| r.violations).sum();
    checks.count("order_violations", violations);
    checks.add(
        "profile_order",
        "source solutions are unimodal and coercive solutions stay within their boundary values",
        violations == 0,
    );

    let growth_claim = "the source-problem value at the origin strictly grows with the half-length";
    if records.len() >= 2 {
        let grows = records.windows(2).all(|w| w[1].u_at_0 > w[0].u_at_0);
        checks.add("origin_growth", growth_claim, grows);
    } else {
        checks.skip("origin_growth", growth_claim, "needs at least two half-lengths");
    }

    let masses: Vec<f64> = records.iter().map(|r| r.m_mid).collect();
    let decay_claim = "the coercive mid-interval mass does not increase with the half-length";
    if records.len() >= 2 {
        let (mass_violations, ties) = decreasing_with_floor_ties(&masses);
        checks.count("mass_floor_ties", ties);
        checks.add("mass_monotone", decay_claim, mass_violations == 0);
    } else {
        checks.skip("mass_monotone", decay_claim, "needs at least two half-lengths");
    }

    let fit_claim = "the coercive mid-interval mass decays exponentially";
    if oc.ells.len() >= 3 && masses.iter().filter(|m| **m > 0.0).count() >= 3 {
        let md = fit_middecay(&coercive, &oc.ells, oc.h, &opts)?;
        match md.fit {
            Some(fit) => {
                if wants(cfg, "report") {
                    write_text(out_dir, "rates.txt", &fit.text().render())?;
                }
                record_fit(checks, "mid_decay", fit_claim, &fit);
            }
            None => checks.skip("mid_decay", fit_claim, "too few positive masses"),
        }
    } else {
        checks.skip("mid_decay", fit_claim, "needs at least three positive masses");
    }
    Ok(())
}

/// Count increases in a sequence expected to decrease, tolerating swaps
/// between values that have both hit the resolution floor.
fn decreasing_with_floor_ties(values: &[f64]) -> (usize, usize) {
    let vmin = values
        .iter()
        .copied()
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let floor = if vmin.is_finite() { 1e3 * vmin } else { 0.0 };
    let mut violations = 0;
    let mut ties = 0;
    for w in values.windows(2) {
        if w[1] > w[0] {
            if w[0] <= floor && w[1] <= floor {
                ties += 1;
            } else {
                violations += 1;
            }
        }
    }
    (violations, ties)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn tmp_dir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("cylvar-runner-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn audit_run_writes_its_artifacts_and_passes() {
        let cfg = parse_config(
            r#"
command = "audit"

[integrand]
kind = "power"
dim = 2
q = 2.0
alpha = 0.5

[audit]
count = 2000
"#,
        )
        .unwrap();
        let dir = tmp_dir("audit");
        let status = run(&cfg, &dir, None).unwrap();
        assert_eq!(status, RunStatus::Pass);
        for name in ["config_echo.toml", "audit_report.txt", "summary.txt", "run_meta.txt"] {
            assert!(dir.join(name).is_file(), "{name} missing");
        }
        let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
        assert!(summary.contains("run.pass = true"), "{summary}");
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn overstated_modulus_fails_the_gate() {
        let cfg = parse_config(
            r#"
command = "audit"

[integrand]
kind = "power"
dim = 2
q = 2.0
alpha = 0.6

[audit]
count = 2000
"#,
        )
        .unwrap();
        let dir = tmp_dir("gate");
        let status = run(&cfg, &dir, None).unwrap();
        assert_eq!(status, RunStatus::CheckFailed);
        let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
        assert!(summary.contains("check.modulus_audit.pass = false"), "{summary}");
        assert!(summary.contains("run.pass = false"), "{summary}");
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn small_onedim_run_passes_its_checks() {
        let cfg = parse_config(
            r#"
command = "onedim"

[integrand]
kind = "power"
dim = 1
q = 2.0

[onedim]
gamma = 1.0
h = 0.0625
ells = [2.0, 3.0, 4.0, 5.0]
bv_left = 1.0
bv_right = 1.0

[audit]
count = 1000

[solver]
energy_tol = 1e-13
"#,
        )
        .unwrap();
        let dir = tmp_dir("onedim");
        let status = run(&cfg, &dir, None).unwrap();
        let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
        assert_eq!(status, RunStatus::Pass, "{summary}");
        assert!(dir.join("onedim.csv").is_file());
        assert!(dir.join("rates.txt").is_file());
        assert!(summary.contains("check.origin_growth.pass = true"), "{summary}");
        assert!(summary.contains("check.mid_decay.pass = true"), "{summary}");
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn small_sweep_run_writes_everything() {
        let cfg = parse_config(
            r#"
command = "sweep"

[integrand]
kind = "power"
dim = 2
q = 2.0

[domain]
h = 0.125
ells = [3.0, 4.0, 5.0]

[domain.cross]
kind = "interval"
a = 0.0
b = 1.0

[source]
kind = "constant"
value = 1.0

[audit]
count = 1000

[output]
formats = ["csv", "report", "dump"]
"#,
        )
        .unwrap();
        let dir = tmp_dir("sweep");
        let status = run(&cfg, &dir, None).unwrap();
        let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
        assert_eq!(status, RunStatus::Pass, "{summary}");
        for name in [
            "sweep.csv",
            "rates.txt",
            "u_infty.txt",
            "u_ell_3.txt",
            "u_ell_4.txt",
            "u_ell_5.txt",
        ] {
            assert!(dir.join(name).is_file(), "{name} missing:\n{summary}");
        }
        assert!(summary.contains("check.pointwise_bounds.pass = true"), "{summary}");
        assert!(summary.contains("check.domain_monotonicity.pass = true"), "{summary}");
        let _ = fs::remove_dir_all(&dir);
    }
}
