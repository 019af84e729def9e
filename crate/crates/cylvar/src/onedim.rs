//! One-dimensional companion problems with closed-form oracles: the
//! source-term problem ∫F(u′) − γu on (-ℓ,ℓ) whose peak grows without bound,
//! and the coercive two-point problem ∫F(v′) + |v|^q with prescribed endpoint
//! values whose middle decays exponentially.

use std::sync::Arc;

use crate::asymptotics::{fit_exponential, RateFit};
use crate::domain::field::grad_q_norm_q;
use crate::domain::mesh::build_interval_mesh;
use crate::domain::{Constraint, DofKind, Field, Mesh, Region, SourceTerm};
use crate::error::{Error, Result};
use crate::integrand::IntegrandSpec;
use crate::par;
use crate::report::fmt_f64;
use crate::solver::{
    bb_minimize, minimize_field, smoothing_stages, solve_quadratic_direct, wants_direct,
    BbOutcome, FemProblem, Method, Objective, Solution, SolutionRole, SolverOptions, StopReason,
    TraceRow,
};

/// ∫ F(u′) − γu over (-ℓ, ℓ) with zero boundary values.
#[derive(Debug, Clone)]
pub struct OneDimSourceSpec {
    pub gamma: f64,
    pub ell: f64,
    pub spec: IntegrandSpec,
}

impl OneDimSourceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "source constant must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.ell > 0.0) || !self.ell.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "half-length must be positive, got {}",
                self.ell
            )));
        }
        if self.spec.dim != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: self.spec.dim,
            });
        }
        Ok(())
    }
}

/// ∫ F(v′) + |v|^q over (-ℓ, ℓ) with v(-ℓ) = a, v(ℓ) = b.
#[derive(Debug, Clone)]
pub struct OneDimCoerciveSpec {
    /// Boundary value at -ℓ.
    pub bv_left: f64,
    /// Boundary value at ℓ.
    pub bv_right: f64,
    /// Exponent of the zero-order term.
    pub q: f64,
    pub spec: IntegrandSpec,
}

impl OneDimCoerciveSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.bv_left.is_finite() || !self.bv_right.is_finite() {
            return Err(Error::InvalidSpec("endpoint values must be finite".into()));
        }
        if self.bv_left < 0.0 || self.bv_right < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "endpoint values must be nonnegative, got {} and {}",
                self.bv_left, self.bv_right
            )));
        }
        if !(self.q >= 2.0) || !self.q.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "zero-order exponent must be >= 2, got {}",
                self.q
            )));
        }
        if self.spec.dim != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: self.spec.dim,
            });
        }
        Ok(())
    }
}

/// Minimizer of ∫ ξ²/2 − γu: the parabola γ(ℓ² − x²)/2.
pub fn explicit_parabola(gamma: f64, ell: f64, x: f64) -> Result<f64> {
    if x.abs() > ell {
        return Err(Error::InvalidSpec(format!(
            "point {x} outside the interval (-{ell}, {ell})"
        )));
    }
    Ok(gamma * (ell * ell - x * x) / 2.0)
}

/// Solve the source problem: zero endpoint values, constant source γ.
pub fn solve_source_1d(
    sspec: &OneDimSourceSpec,
    h: f64,
    opts: &SolverOptions,
    method: Method,
) -> Result<Solution> {
    sspec.validate()?;
    let mesh = Arc::new(build_interval_mesh(sspec.ell, h)?);
    let f = SourceTerm::Constant(sspec.gamma);
    if wants_direct(&sspec.spec, method)? {
        let mut sol = solve_quadratic_direct(&mesh, Constraint::DirichletAll, &sspec.spec, &f)?;
        sol.role = SolutionRole::UEll;
        return Ok(sol);
    }
    let init = Field::zeros(mesh, Constraint::DirichletAll)?;
    minimize_field(init, &sspec.spec, &f, opts, SolutionRole::UEll)
}

/// The coercive objective: the gradient part through the usual assembly plus
/// the vertex-rule zero-order term Σ wₙ |vₙ|^q.
struct CoerciveObjective {
    fem: FemProblem,
    mesh: Arc<Mesh>,
    q: f64,
    values: Vec<f64>,
}

impl CoerciveObjective {
    fn new(
        mesh: Arc<Mesh>,
        constraint: Constraint,
        spec: &IntegrandSpec,
        q: f64,
    ) -> Result<Self> {
        let fem = FemProblem::new(
            Arc::clone(&mesh),
            constraint,
            spec,
            &SourceTerm::Constant(0.0),
        )?;
        let values = vec![0.0; mesh.n_nodes];
        Ok(CoerciveObjective {
            fem,
            mesh,
            q,
            values,
        })
    }
}

impl Objective for CoerciveObjective {
    fn n_unknowns(&self) -> usize {
        self.fem.n_unknowns()
    }

    fn energy(&mut self, x: &[f64]) -> f64 {
        let base = self.fem.energy(x);
        self.fem.dofs().apply(x, &mut self.values);
        let (mesh, values, q) = (&self.mesh, &self.values, self.q);
        base + par::sum(mesh.n_nodes, |n| {
            mesh.node_weights[n] * values[n].abs().powf(q)
        })
    }

    fn gradient(&mut self, x: &[f64], g: &mut [f64]) {
        self.fem.gradient(x, g);
        self.fem.dofs().apply(x, &mut self.values);
        for (n, kind) in self.fem.dofs().kinds.iter().enumerate() {
            if let DofKind::Free(i) = *kind {
                let v = self.values[n];
                if v != 0.0 {
                    g[i as usize] +=
                        self.mesh.node_weights[n] * self.q * v.abs().powf(self.q - 2.0) * v;
                }
            }
        }
    }
}

/// Solve the coercive two-point problem at half-length ℓ.
pub fn solve_coercive_1d(
    cspec: &OneDimCoerciveSpec,
    ell: f64,
    h: f64,
    opts: &SolverOptions,
) -> Result<Solution> {
    cspec.validate()?;
    opts.validate()?;
    let mesh = Arc::new(build_interval_mesh(ell, h)?);
    let constraint = Constraint::Endpoints {
        left: cspec.bv_left,
        right: cspec.bv_right,
    };
    let stages = smoothing_stages(&cspec.spec, opts);

    let mut obj = CoerciveObjective::new(Arc::clone(&mesh), constraint, &cspec.spec, cspec.q)?;
    let mut x = vec![0.0; obj.n_unknowns()];
    let mut total_iters = 0usize;
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut last: Option<BbOutcome> = None;
    for (k, &mu) in stages.iter().enumerate() {
        let stage_spec = cspec.spec.with_smoothing(mu)?;
        obj = CoerciveObjective::new(Arc::clone(&mesh), constraint, &stage_spec, cspec.q)?;
        let mut stage_opts = opts.clone();
        if k + 1 < stages.len() {
            stage_opts.grad_tol = 0.0;
        }
        let out = bb_minimize(&mut obj, &mut x, &stage_opts)?;
        for row in &out.trace {
            trace.push(TraceRow {
                iteration: total_iters + row.iteration,
                ..*row
            });
        }
        total_iters += out.iterations;
        last = Some(out);
    }
    let last = last.expect("at least one stage");

    let values = obj.fem.full_values(&x);
    let field = Field::from_values(mesh, values, constraint)?;
    // The zero-order term only adds convexity, so the gradient-part modulus
    // still certifies the energy gap.
    let certificate = if last.tail_drop > 0.0 && cspec.spec.alpha > 0.0 {
        Some((2.0 * last.tail_drop / cspec.spec.alpha).powf(1.0 / cspec.spec.q))
    } else {
        None
    };
    Ok(Solution {
        field,
        role: SolutionRole::VEll,
        energy: last.energy,
        iterations: total_iters,
        reason: last.reason,
        converged: last.reason != StopReason::MaxIters,
        grad_sup: last.grad_sup,
        certificate,
        trace,
    })
}

/// Unimodality of a one-dimensional field: nondecreasing up to the argmax,
/// nonincreasing after it.
#[derive(Debug, Clone)]
pub struct UnimodalReport {
    pub argmax_node: usize,
    pub x_peak: f64,
    pub violations: usize,
    pub worst: f64,
    pub pass: bool,
}

pub fn check_unimodal(u: &Field) -> Result<UnimodalReport> {
    let mesh = &u.mesh;
    if mesh.dim != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: mesh.dim,
        });
    }
    let values = &u.values;
    let mut argmax = 0usize;
    for (n, v) in values.iter().enumerate() {
        if *v > values[argmax] {
            argmax = n;
        }
    }
    let scale = u.sup_norm().max(1e-300);
    let tol = 1e-10 * scale;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for n in 0..values.len() - 1 {
        // Rises are fine left of the peak, drops right of it.
        let excess = if n < argmax {
            values[n] - values[n + 1]
        } else {
            values[n + 1] - values[n]
        };
        if excess > tol {
            violations += 1;
        }
        worst = worst.max(excess);
    }
    Ok(UnimodalReport {
        argmax_node: argmax,
        x_peak: mesh.coord(argmax, 0),
        violations,
        worst,
        pass: violations == 0,
    })
}

/// Nodal bounds 0 ≤ v ≤ max{a, b}: exact at the endpoints (they are pinned),
/// within 1e-10·scale in the interior.
#[derive(Debug, Clone)]
pub struct CoerciveBoundsReport {
    pub violations: usize,
    pub worst: f64,
    pub endpoints_exact: bool,
    pub pass: bool,
}

pub fn check_coercive_bounds(v: &Field, a: f64, b: f64) -> Result<CoerciveBoundsReport> {
    if v.mesh.dim != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: v.mesh.dim,
        });
    }
    let hi = a.max(b);
    let scale = v.sup_norm().max(hi).max(1e-300);
    let tol = 1e-10 * scale;
    let n = v.values.len();
    let endpoints_exact = v.values[0] == a && v.values[n - 1] == b;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for &val in &v.values[1..n - 1] {
        let excess = (-val).max(val - hi);
        if excess > tol {
            violations += 1;
        }
        worst = worst.max(excess);
    }
    Ok(CoerciveBoundsReport {
        violations,
        worst,
        endpoints_exact,
        pass: violations == 0 && endpoints_exact,
    })
}

/// Vertex-rule mass Σ wₙ |vₙ|^q over nodes with |x| ≤ cut.
fn mass_q_within(v: &Field, q: f64, cut: f64) -> f64 {
    let mesh = &v.mesh;
    let tol = 1e-9 * cut.max(1.0);
    par::sum(mesh.n_nodes, |n| {
        if mesh.coord(n, 0).abs() <= cut + tol {
            mesh.node_weights[n] * v.values[n].abs().powf(q)
        } else {
            0.0
        }
    })
}

/// The mid-interval mass m(ℓ) = ∫_{-ℓ/2}^{ℓ/2} |v′|^q + |v|^q.
pub fn mid_interval_mass(v: &Field, q: f64) -> Result<f64> {
    let ell = v
        .mesh
        .half_length()
        .ok_or_else(|| Error::GridMismatch("mid-interval mass needs an axis".into()))?;
    let grad = grad_q_norm_q(v, q, &Region::HalfCylinder)?;
    Ok(grad + mass_q_within(v, q, ell / 2.0))
}

/// Total ∫ |v′|^q + |v|^q over the whole interval.
pub fn coercive_total(v: &Field, q: f64) -> Result<f64> {
    let grad = grad_q_norm_q(v, q, &Region::All)?;
    Ok(grad + mass_q_within(v, q, f64::INFINITY))
}

/// Mid-interval decay data across ℓ and its exponential fit (skipped when
/// fewer than three masses are positive, e.g. zero boundary values).
#[derive(Debug)]
pub struct MidDecay {
    pub ells: Vec<f64>,
    pub m_values: Vec<f64>,
    pub solutions: Vec<Solution>,
    pub fit: Option<RateFit>,
}

pub fn fit_middecay(
    cspec: &OneDimCoerciveSpec,
    ells: &[f64],
    h: f64,
    opts: &SolverOptions,
) -> Result<MidDecay> {
    cspec.validate()?;
    if ells.len() < 3 {
        return Err(Error::InvalidSpec(format!(
            "mid-interval fit needs at least 3 half-lengths, got {}",
            ells.len()
        )));
    }
    for w in ells.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidSpec(
                "half-lengths must be strictly increasing".into(),
            ));
        }
    }
    let results = par::map_items(ells.len(), |i| {
        solve_coercive_1d(cspec, ells[i], h, opts).map_err(|e| e.to_string())
    });
    let mut solutions = Vec::with_capacity(results.len());
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(sol) => solutions.push(sol),
            Err(msg) => {
                return Err(Error::Solver(format!(
                    "coercive solve at ell = {} failed: {msg}",
                    ells[i]
                )))
            }
        }
    }
    let mut m_values = Vec::with_capacity(solutions.len());
    for sol in &solutions {
        m_values.push(mid_interval_mass(&sol.field, cspec.q)?);
    }
    let n_pos = m_values.iter().filter(|m| **m > 0.0).count();
    let fit = if n_pos >= 3 {
        Some(fit_exponential(ells, &m_values)?)
    } else {
        None
    };
    Ok(MidDecay {
        ells: ells.to_vec(),
        m_values,
        solutions,
        fit,
    })
}

/// One row of the one-dimensional sweep: the source peak and the coercive
/// decay diagnostics at a common ℓ.
#[derive(Debug, Clone)]
pub struct OneDimRecord {
    pub ell: f64,
    pub u_at_0: f64,
    pub m_mid: f64,
    pub max_v: f64,
    pub violations: usize,
}

pub const ONEDIM_CSV_HEADER: &str = "ell,u_at_0,m_mid,max_v,violations";

impl OneDimRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            fmt_f64(self.ell),
            fmt_f64(self.u_at_0),
            fmt_f64(self.m_mid),
            fmt_f64(self.max_v),
            self.violations,
        )
    }
}

pub fn onedim_csv(records: &[OneDimRecord]) -> String {
    let mut out = String::from(ONEDIM_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Value at the node closest to x = 0 (the exact midpoint when 2ℓ/h is even).
pub fn value_at_origin(u: &Field) -> Result<f64> {
    if u.mesh.dim != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: u.mesh.dim,
        });
    }
    let mut best = 0usize;
    for n in 0..u.mesh.n_nodes {
        if u.mesh.coord(n, 0).abs() < u.mesh.coord(best, 0).abs() {
            best = n;
        }
    }
    Ok(u.values[best])
}

/// Run both one-dimensional problems over a list of ℓ and collect per-ℓ
/// records: the source peak u(0), the coercive mid-mass and sup, and the
/// combined count of unimodality and bound violations.
pub fn run_onedim(
    source: &OneDimSourceSpec,
    coercive: &OneDimCoerciveSpec,
    ells: &[f64],
    h: f64,
    opts: &SolverOptions,
    method: Method,
) -> Result<Vec<OneDimRecord>> {
    source.validate()?;
    coercive.validate()?;
    if ells.is_empty() {
        return Err(Error::InvalidSpec("need at least one half-length".into()));
    }
    let results = par::map_items(ells.len(), |i| {
        let ell = ells[i];
        let run = || -> Result<OneDimRecord> {
            let sspec = OneDimSourceSpec {
                ell,
                ..source.clone()
            };
            let u = solve_source_1d(&sspec, h, opts, method)?;
            let v = solve_coercive_1d(coercive, ell, h, opts)?;
            let uni = check_unimodal(&u.field)?;
            let bounds = check_coercive_bounds(&v.field, coercive.bv_left, coercive.bv_right)?;
            let extra = usize::from(!bounds.endpoints_exact);
            Ok(OneDimRecord {
                ell,
                u_at_0: value_at_origin(&u.field)?,
                m_mid: mid_interval_mass(&v.field, coercive.q)?,
                max_v: v.field.sup_norm(),
                violations: uni.violations + bounds.violations + extra,
            })
        };
        run().map_err(|e| e.to_string())
    });
    let mut records = Vec::with_capacity(results.len());
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(rec) => records.push(rec),
            Err(msg) => {
                return Err(Error::Solver(format!(
                    "one-dimensional run at ell = {} failed: {msg}",
                    ells[i]
                )))
            }
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight_opts() -> SolverOptions {
        SolverOptions {
            energy_tol: 1e-13,
            ..SolverOptions::default()
        }
    }

    #[test]
    fn parabola_formula_and_guards() {
        assert_eq!(explicit_parabola(1.0, 2.0, 0.0).unwrap(), 2.0);
        assert_eq!(explicit_parabola(3.0, 2.0, 2.0).unwrap(), 0.0);
        assert_eq!(explicit_parabola(3.0, 2.0, -2.0).unwrap(), 0.0);
        assert_eq!(explicit_parabola(2.0, 3.0, 1.0).unwrap(), 8.0);
        assert!(explicit_parabola(1.0, 2.0, 2.5).is_err());
    }

    #[test]
    fn quadratic_source_is_nodally_exact() {
        // F = ξ²/2 (quadratic form with matrix [1/2]) minimized against a
        // constant source gives exactly the parabola at every node, at any h.
        for h in [0.5, 0.25, 0.0625] {
            let sspec = OneDimSourceSpec {
                gamma: 1.5,
                ell: 2.0,
                spec: IntegrandSpec::quadratic_form(1, vec![0.5]).unwrap(),
            };
            let sol = solve_source_1d(&sspec, h, &tight_opts(), Method::Auto).unwrap();
            for n in 0..sol.field.mesh.n_nodes {
                let x = sol.field.mesh.coord(n, 0);
                let exact = explicit_parabola(1.5, 2.0, x).unwrap();
                assert!(
                    (sol.field.values[n] - exact).abs() < 1e-8,
                    "h={h} node {n}: {} vs {exact}",
                    sol.field.values[n]
                );
            }
        }
        // The other normalization F = |ξ|² halves the solution.
        let sspec = OneDimSourceSpec {
            gamma: 1.0,
            ell: 2.0,
            spec: IntegrandSpec::power(1, 2.0).unwrap(),
        };
        let sol = solve_source_1d(&sspec, 0.25, &tight_opts(), Method::Auto).unwrap();
        let mid = value_at_origin(&sol.field).unwrap();
        assert!((mid - 1.0).abs() < 1e-8, "got {mid}");
    }

    #[test]
    fn quartic_source_peak_matches_the_closed_form() {
        // 4|u′|²u′ = -γx integrates to u(0) = (3/4)(1/4)^(1/3) ℓ^(4/3).
        let sspec = OneDimSourceSpec {
            gamma: 1.0,
            ell: 2.0,
            spec: IntegrandSpec::power(1, 4.0).unwrap(),
        };
        let sol = solve_source_1d(&sspec, 1.0 / 64.0, &tight_opts(), Method::Auto).unwrap();
        assert!(sol.converged);
        let exact = 0.75 * 0.25f64.powf(1.0 / 3.0) * 2.0f64.powf(4.0 / 3.0);
        let peak = value_at_origin(&sol.field).unwrap();
        assert!(
            (peak - exact).abs() < 0.01 * exact,
            "peak {peak} vs {exact}"
        );
        let uni = check_unimodal(&sol.field).unwrap();
        assert!(uni.pass, "worst {}", uni.worst);
        assert_eq!(uni.x_peak, 0.0);
        assert!(sol.field.values.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn unimodal_check_flags_a_dip() {
        let mesh = Arc::new(build_interval_mesh(2.0, 0.5).unwrap());
        let n = mesh.n_nodes;
        let mut vals: Vec<f64> = (0..n)
            .map(|k| {
                let x = mesh.coord(k, 0);
                2.0 - x * x / 2.0
            })
            .collect();
        let good = Field::from_values(Arc::clone(&mesh), vals.clone(), Constraint::Free).unwrap();
        assert!(check_unimodal(&good).unwrap().pass);

        vals[2] -= 1.0; // Dent the left flank below its left neighbor.
        let bad = Field::from_values(Arc::clone(&mesh), vals, Constraint::Free).unwrap();
        let rep = check_unimodal(&bad).unwrap();
        assert!(!rep.pass && rep.violations >= 1);

        let zero = Field::zeros(mesh, Constraint::Free).unwrap();
        assert!(check_unimodal(&zero).unwrap().pass);
    }

    #[test]
    fn coercive_solution_matches_the_cosh_oracle() {
        // F = ξ², q = 2: -v″ + v = 0 with v(±ℓ) = 1 gives cosh(x)/cosh(ℓ).
        let cspec = OneDimCoerciveSpec {
            bv_left: 1.0,
            bv_right: 1.0,
            q: 2.0,
            spec: IntegrandSpec::power(1, 2.0).unwrap(),
        };
        let sol = solve_coercive_1d(&cspec, 3.0, 1.0 / 64.0, &tight_opts()).unwrap();
        assert!(sol.converged);
        let mid = value_at_origin(&sol.field).unwrap();
        let exact = 1.0 / 3.0f64.cosh();
        assert!(
            (mid - exact).abs() < 0.02 * exact,
            "v(0) = {mid} vs {exact}"
        );
        let bounds = check_coercive_bounds(&sol.field, 1.0, 1.0).unwrap();
        assert!(bounds.pass, "worst {}", bounds.worst);
        assert_eq!(sol.field.sup_norm(), 1.0);
    }

    #[test]
    fn coercive_totals_saturate_rather_than_grow() {
        // Closed form: ∫ v′² + v² = 2 tanh(ℓ), increasing but saturating.
        let cspec = OneDimCoerciveSpec {
            bv_left: 1.0,
            bv_right: 1.0,
            q: 2.0,
            spec: IntegrandSpec::power(1, 2.0).unwrap(),
        };
        let mut totals = Vec::new();
        for ell in [2.0, 3.0, 4.0, 6.0] {
            let sol = solve_coercive_1d(&cspec, ell, 1.0 / 64.0, &tight_opts()).unwrap();
            let total = coercive_total(&sol.field, 2.0).unwrap();
            let exact = 2.0 * (ell as f64).tanh();
            assert!(
                (total - exact).abs() < 0.01 * exact,
                "ell={ell}: {total} vs {exact}"
            );
            totals.push(total);
        }
        let max = totals.iter().fold(0.0f64, |a, &b| a.max(b));
        assert!(max / totals[0] <= 1.5, "totals {totals:?}");
    }

    #[test]
    fn middecay_rate_matches_the_cosh_solution() {
        // m(ℓ) = sinh(ℓ)/cosh²(ℓ) ≈ 2e^(-ℓ), so the fitted rate is ≈ 1.
        let cspec = OneDimCoerciveSpec {
            bv_left: 1.0,
            bv_right: 1.0,
            q: 2.0,
            spec: IntegrandSpec::power(1, 2.0).unwrap(),
        };
        let out = fit_middecay(&cspec, &[3.0, 4.0, 5.0, 6.0], 1.0 / 32.0, &tight_opts()).unwrap();
        for w in out.m_values.windows(2) {
            assert!(w[1] < w[0], "mid-masses not decreasing: {:?}", out.m_values);
        }
        let fit = out.fit.expect("positive masses");
        assert!(
            (fit.rate - 1.0).abs() < 0.15,
            "rate {} r2 {}",
            fit.rate,
            fit.r_squared
        );
        assert!(fit.bound_satisfied);
    }

    #[test]
    fn zero_boundary_values_skip_the_fit() {
        let cspec = OneDimCoerciveSpec {
            bv_left: 0.0,
            bv_right: 0.0,
            q: 2.0,
            spec: IntegrandSpec::power(1, 2.0).unwrap(),
        };
        let out = fit_middecay(&cspec, &[3.0, 4.0, 5.0], 0.125, &tight_opts()).unwrap();
        assert!(out.fit.is_none());
        for sol in &out.solutions {
            assert_eq!(sol.field.sup_norm(), 0.0);
        }
    }

    #[test]
    fn sweep_records_carry_growth_and_decay_side_by_side() {
        let source = OneDimSourceSpec {
            gamma: 1.0,
            ell: 1.0, // Placeholder; run_onedim overrides per record.
            spec: IntegrandSpec::power(1, 2.0).unwrap(),
        };
        let coercive = OneDimCoerciveSpec {
            bv_left: 1.0,
            bv_right: 1.0,
            q: 2.0,
            spec: IntegrandSpec::power(1, 2.0).unwrap(),
        };
        let recs = run_onedim(
            &source,
            &coercive,
            &[2.0, 4.0, 8.0],
            0.125,
            &tight_opts(),
            Method::Auto,
        )
        .unwrap();
        assert_eq!(recs.len(), 3);
        // Source peaks grow, mid-masses decay, nothing violates.
        assert!(recs[1].u_at_0 > recs[0].u_at_0);
        assert!(recs[2].u_at_0 > recs[1].u_at_0);
        assert!(recs[2].m_mid < recs[1].m_mid && recs[1].m_mid < recs[0].m_mid);
        for r in &recs {
            assert_eq!(r.violations, 0);
            assert!((r.max_v - 1.0).abs() < 1e-12);
        }
        let csv = onedim_csv(&recs);
        assert!(csv.starts_with(ONEDIM_CSV_HEADER));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn quartic_coercive_decays_exponentially_too() {
        // The EL equation is homogeneous of degree q-1, so v_ℓ = w(x)/w(ℓ)
        // for the symmetric solution w ~ Ae^(λx), λ = 3^(-1/4). The
        // mid-interval mass then decays at rate qλ/2 = 2λ ≈ 1.52.
        let cspec = OneDimCoerciveSpec {
            bv_left: 1.0,
            bv_right: 1.0,
            q: 4.0,
            spec: IntegrandSpec::power(1, 4.0).unwrap(),
        };
        let out = fit_middecay(&cspec, &[3.0, 4.0, 5.0], 1.0 / 32.0, &tight_opts()).unwrap();
        let fit = out.fit.expect("positive masses");
        let lambda = 3.0f64.powf(-0.25);
        let theory = 2.0 * lambda;
        assert!(
            (fit.rate - theory).abs() < 0.2 * theory,
            "rate {} vs {theory}",
            fit.rate
        );
        for sol in &out.solutions {
            let bounds = check_coercive_bounds(&sol.field, 1.0, 1.0).unwrap();
            assert!(bounds.pass, "worst {}", bounds.worst);
        }
    }

    #[test]
    fn specs_reject_bad_data() {
        let one = IntegrandSpec::power(1, 2.0).unwrap();
        let two = IntegrandSpec::power(2, 2.0).unwrap();
        assert!(OneDimSourceSpec {
            gamma: 0.0,
            ell: 2.0,
            spec: one.clone()
        }
        .validate()
        .is_err());
        assert!(OneDimSourceSpec {
            gamma: 1.0,
            ell: 2.0,
            spec: two.clone()
        }
        .validate()
        .is_err());
        assert!(OneDimCoerciveSpec {
            bv_left: -1.0,
            bv_right: 1.0,
            q: 2.0,
            spec: one.clone()
        }
        .validate()
        .is_err());
        assert!(OneDimCoerciveSpec {
            bv_left: 1.0,
            bv_right: 1.0,
            q: 1.5,
            spec: one
        }
        .validate()
        .is_err());
    }
}
