//! Minimizers for the discretized energies: a spectral-step (BB1/BB2)
//! gradient method with Armijo safeguard for general convex integrands, and
//! a banded direct solve for the quadratic families. Nonsmooth integrands
//! are handled by a decreasing p-norm smoothing schedule whose last stage is
//! the unsmoothed objective.

pub mod direct;
pub mod fem;

pub use direct::solve_quadratic_direct;
pub use fem::{assemble_energy, element_energies, FemProblem};

use std::collections::VecDeque;
use std::sync::Arc;

use crate::domain::field::{extend_in_x1, taper_to_dirichlet};
use crate::domain::mesh::{build_cross_section_mesh, build_cylinder_mesh};
use crate::domain::{Constraint, CylinderSpec, Field, Omega2, Region, SourceTerm};
use crate::error::{Error, Result};
use crate::integrand::IntegrandSpec;

/// Which solver to use for a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Direct when the energy is quadratic, iterative otherwise.
    Auto,
    Direct,
    Iterative,
}

/// Options for the iterative minimizer.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop when the energy decrease over `energy_window` iterations falls
    /// below `energy_tol * (1 + |E|)`.
    pub energy_window: usize,
    pub energy_tol: f64,
    /// Also stop when the sup norm of the gradient falls below this
    /// (0 disables the test). Applies to smooth stages only.
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Smoothing stages for nonsmooth integrands, in the order they run;
    /// a final unsmoothed stage is appended if missing.
    pub smoothing_schedule: Vec<f64>,
    /// Record one trace row per iteration.
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 200_000,
            energy_window: 50,
            energy_tol: 1e-10,
            grad_tol: 0.0,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            smoothing_schedule: vec![1e-2, 1e-4],
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidSpec("max_iters must be positive".into()));
        }
        if self.energy_window < 2 {
            return Err(Error::InvalidSpec("energy_window must be at least 2".into()));
        }
        if !(self.energy_tol >= 0.0) || !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidSpec("tolerances must be >= 0".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidSpec("armijo_c must lie in (0, 1)".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidSpec("backtrack must lie in (0, 1)".into()));
        }
        if self
            .smoothing_schedule
            .iter()
            .any(|m| !m.is_finite() || *m < 0.0 || *m > 1.0)
        {
            return Err(Error::InvalidSpec(
                "smoothing stages must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Windowed energy decrease below tolerance.
    Window,
    /// Gradient sup norm below tolerance.
    Grad,
    /// Three consecutive line-search failures.
    Stalled,
    MaxIters,
    /// Produced by the direct solver.
    Direct,
}

impl StopReason {
    pub fn word(self) -> &'static str {
        match self {
            StopReason::Window => "window",
            StopReason::Grad => "grad",
            StopReason::Stalled => "stalled",
            StopReason::MaxIters => "max_iters",
            StopReason::Direct => "direct",
        }
    }
}

/// Which minimizer a solution is (full cylinder, cross-section limit, tied
/// ends, or a one-dimensional profile).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionRole {
    UEll,
    UInfty,
    WEll,
    VEll,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub step: f64,
    pub grad_sup: f64,
}

/// A minimizer together with its convergence record.
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: Field,
    pub role: SolutionRole,
    pub energy: f64,
    pub iterations: usize,
    pub reason: StopReason,
    pub converged: bool,
    pub grad_sup: f64,
    /// A-posteriori estimate `(2 Δ_tail / alpha)^{1/q}` of the gradient
    /// q-norm distance to the exact discrete minimizer, where Δ_tail is the
    /// energy drop over the final stopping window. An estimate, not a bound.
    pub certificate: Option<f64>,
    pub trace: Vec<TraceRow>,
}

/// A differentiable (or subdifferentiable) objective over free unknowns.
pub trait Objective {
    fn n_unknowns(&self) -> usize;
    fn energy(&mut self, x: &[f64]) -> f64;
    fn gradient(&mut self, x: &[f64], g: &mut [f64]);
}

/// Outcome of one bb_minimize run.
#[derive(Debug)]
pub struct BbOutcome {
    pub energy: f64,
    pub iterations: usize,
    pub reason: StopReason,
    pub grad_sup: f64,
    /// Energy drop across the final stopping window.
    pub tail_drop: f64,
    pub trace: Vec<TraceRow>,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Monotone spectral gradient descent: alternating BB1/BB2 steps, Armijo
/// backtracking, spectral-memory reset on line-search failure, exit after
/// three consecutive failures.
pub fn bb_minimize(
    obj: &mut dyn Objective,
    x: &mut [f64],
    opts: &SolverOptions,
) -> Result<BbOutcome> {
    opts.validate()?;
    let n = x.len();
    assert_eq!(n, obj.n_unknowns());

    let mut g = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut y = vec![0.0; n];

    let mut energy = obj.energy(x);
    if !energy.is_finite() {
        return Err(Error::Solver(format!(
            "non-finite energy {energy} at the initial point"
        )));
    }
    obj.gradient(x, &mut g);
    let mut gsup = sup_norm(&g);

    let mut trace = Vec::new();
    let mut window: VecDeque<f64> = VecDeque::with_capacity(opts.energy_window + 1);
    window.push_back(energy);

    if n == 0 {
        return Ok(BbOutcome {
            energy,
            iterations: 0,
            reason: StopReason::Window,
            grad_sup: 0.0,
            tail_drop: 0.0,
            trace,
        });
    }

    let mut tau = 1.0 / gsup.max(1e-12);
    let mut t_last = tau;
    let mut have_pair = false;
    let mut use_bb1 = true;
    let mut fails = 0usize;
    let mut reason = StopReason::MaxIters;
    let mut iterations = 0usize;

    for it in 0..opts.max_iters {
        if opts.grad_tol > 0.0 && gsup <= opts.grad_tol {
            reason = StopReason::Grad;
            break;
        }
        if have_pair {
            let ss: f64 = s.iter().map(|v| v * v).sum();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            let yy: f64 = y.iter().map(|v| v * v).sum();
            let cand = if use_bb1 { ss / sy } else { sy / yy };
            tau = if sy > 0.0 && cand.is_finite() && cand > 0.0 {
                cand
            } else {
                // Near convergence the pair is rounding noise; the last
                // accepted step is a sane spectral scale, 1/|g| is not.
                t_last
            };
            use_bb1 = !use_bb1;
        }
        tau = tau.clamp(1e-16, 1e16);

        let g2: f64 = g.iter().map(|v| v * v).sum();
        let mut t = tau;
        let mut accepted = false;
        let mut e_new = energy;
        for _ in 0..opts.max_backtracks {
            for i in 0..n {
                x_new[i] = x[i] - t * g[i];
            }
            e_new = obj.energy(&x_new);
            if e_new.is_finite() && e_new <= energy - opts.armijo_c * t * g2 {
                accepted = true;
                break;
            }
            t *= opts.backtrack;
        }

        iterations = it + 1;
        if accepted && x_new == *x {
            // The step rounds to nothing: no further progress is possible
            // in floating point along this direction.
            fails += 1;
            have_pair = false;
            if fails >= 3 {
                reason = StopReason::Stalled;
                break;
            }
            continue;
        }
        if accepted {
            obj.gradient(&x_new, &mut g_new);
            for i in 0..n {
                s[i] = x_new[i] - x[i];
                y[i] = g_new[i] - g[i];
            }
            x.copy_from_slice(&x_new);
            std::mem::swap(&mut g, &mut g_new);
            energy = e_new;
            gsup = sup_norm(&g);
            t_last = t;
            have_pair = true;
            fails = 0;
            if opts.record_trace {
                trace.push(TraceRow {
                    iteration: it,
                    energy,
                    step: t,
                    grad_sup: gsup,
                });
            }
        } else {
            // Reset the spectral memory and retry from a fresh scale; only
            // repeated failure ends the run.
            fails += 1;
            have_pair = false;
            tau = 1.0 / gsup.max(1e-12);
            if fails >= 3 {
                reason = StopReason::Stalled;
                break;
            }
            continue;
        }

        window.push_back(energy);
        if window.len() > opts.energy_window {
            let past = window.pop_front().unwrap();
            if past - energy <= opts.energy_tol * (1.0 + energy.abs()) {
                reason = StopReason::Window;
                break;
            }
        }
    }

    let tail_drop = window.front().copied().unwrap_or(energy) - energy;
    Ok(BbOutcome {
        energy,
        iterations,
        reason,
        grad_sup: gsup,
        tail_drop: tail_drop.max(0.0),
        trace,
    })
}

pub(crate) fn smoothing_stages(spec: &IntegrandSpec, opts: &SolverOptions) -> Vec<f64> {
    if spec.is_smooth() {
        return vec![spec.smoothing_mu];
    }
    let mut stages: Vec<f64> = opts
        .smoothing_schedule
        .iter()
        .copied()
        .filter(|m| *m > 0.0)
        .collect();
    stages.sort_by(|a, b| b.partial_cmp(a).unwrap());
    stages.dedup();
    stages.push(0.0);
    stages
}

/// Minimize the discretized energy starting from an admissible field,
/// running the smoothing schedule when the integrand is nonsmooth.
pub fn minimize_field(
    init: Field,
    spec: &IntegrandSpec,
    f: &SourceTerm,
    opts: &SolverOptions,
    role: SolutionRole,
) -> Result<Solution> {
    opts.validate()?;
    let stages = smoothing_stages(spec, opts);
    let mesh = Arc::clone(&init.mesh);
    let constraint = init.constraint;

    let mut problem = FemProblem::new(Arc::clone(&mesh), constraint, spec, f)?;
    let mut x = problem.dofs().extract(&init.values);

    let mut total_iters = 0usize;
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut last: Option<BbOutcome> = None;
    for (k, &mu) in stages.iter().enumerate() {
        let stage_spec = spec.with_smoothing(mu)?;
        problem = FemProblem::new(Arc::clone(&mesh), constraint, &stage_spec, f)?;
        // Only the final (exact) stage uses the gradient stop: smoothed
        // stages are warm-up and rely on the window test.
        let mut stage_opts = opts.clone();
        if k + 1 < stages.len() {
            stage_opts.grad_tol = 0.0;
        }
        let out = bb_minimize(&mut problem, &mut x, &stage_opts)?;
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

    let mut values = vec![0.0; mesh.n_nodes];
    problem.dofs().apply(&x, &mut values);
    let field = Field::from_values(mesh, values, constraint)?;
    let certificate = if last.tail_drop > 0.0 && spec.alpha > 0.0 {
        Some((2.0 * last.tail_drop / spec.alpha).powf(1.0 / spec.q))
    } else {
        None
    };
    Ok(Solution {
        field,
        role,
        energy: last.energy,
        iterations: total_iters,
        reason: last.reason,
        converged: last.reason != StopReason::MaxIters,
        grad_sup: last.grad_sup,
        certificate,
        trace,
    })
}

pub(crate) fn wants_direct(spec: &IntegrandSpec, method: Method) -> Result<bool> {
    let quadratic = direct::quadratic_matrix(spec).is_some();
    match method {
        Method::Auto => Ok(quadratic),
        Method::Iterative => Ok(false),
        Method::Direct => {
            if quadratic {
                Ok(true)
            } else {
                Err(Error::Unsupported(
                    "direct solve requires a quadratic integrand (q = 2, no max term)".into(),
                ))
            }
        }
    }
}

/// Minimizer of the cross-section energy u ↦ ∫ F(0, ∇u) - f u over ω₂ with
/// zero boundary values.
pub fn solve_cross_section(
    spec: &IntegrandSpec,
    cross: &Omega2,
    f: &SourceTerm,
    h: f64,
    opts: &SolverOptions,
    method: Method,
) -> Result<Solution> {
    if spec.dim != cross.dim() + 1 {
        return Err(Error::Dimension {
            expected: cross.dim() + 1,
            got: spec.dim,
        });
    }
    let mesh = Arc::new(build_cross_section_mesh(cross, h)?);
    if wants_direct(spec, method)? {
        let mut sol = solve_quadratic_direct(&mesh, Constraint::DirichletLateral, spec, f)?;
        sol.role = SolutionRole::UInfty;
        return Ok(sol);
    }
    let init = Field::zeros(mesh, Constraint::DirichletLateral)?;
    minimize_field(init, spec, f, opts, SolutionRole::UInfty)
}

/// Minimizer of the full cylinder energy over zero boundary values. When a
/// cross-section solution is supplied it seeds the iteration with its tapered
/// constant extension.
pub fn solve_cylinder(
    spec: &IntegrandSpec,
    cyl: &CylinderSpec,
    f: &SourceTerm,
    h: f64,
    opts: &SolverOptions,
    method: Method,
    warm: Option<&Solution>,
) -> Result<Solution> {
    if spec.dim != cyl.dim() {
        return Err(Error::Dimension {
            expected: cyl.dim(),
            got: spec.dim,
        });
    }
    let mesh = Arc::new(build_cylinder_mesh(cyl, h)?);
    if wants_direct(spec, method)? {
        let mut sol = solve_quadratic_direct(&mesh, Constraint::DirichletAll, spec, f)?;
        sol.role = SolutionRole::UEll;
        return Ok(sol);
    }
    let init = match warm {
        Some(w_inf) if w_inf.role == SolutionRole::UInfty => {
            let ext = extend_in_x1(&w_inf.field, &mesh)?;
            taper_to_dirichlet(&ext)?
        }
        _ => Field::zeros(Arc::clone(&mesh), Constraint::DirichletAll)?,
    };
    minimize_field(init, spec, f, opts, SolutionRole::UEll)
}

/// Minimizer over the tied-ends space: zero lateral values, the two end
/// planes identified. Always iterative (the tied pairs break bandedness).
pub fn solve_tied_ends(
    spec: &IntegrandSpec,
    cyl: &CylinderSpec,
    f: &SourceTerm,
    h: f64,
    opts: &SolverOptions,
) -> Result<Solution> {
    if spec.dim != cyl.dim() {
        return Err(Error::Dimension {
            expected: cyl.dim(),
            got: spec.dim,
        });
    }
    let mesh = Arc::new(build_cylinder_mesh(cyl, h)?);
    let init = Field::zeros(mesh, Constraint::TiedEnds)?;
    minimize_field(init, spec, f, opts, SolutionRole::WEll)
}

/// Energy of a solution restricted to a region (the load term restricted by
/// the same element filter).
pub fn energy_in_region(
    u: &Field,
    spec: &IntegrandSpec,
    f: &SourceTerm,
    region: &Region,
) -> Result<f64> {
    let per_elem = element_energies(u, spec, f)?;
    region.validate_for(&u.mesh)?;
    Ok(crate::par::sum(per_elem.len(), |e| {
        if region.contains_element(&u.mesh, e) {
            per_elem[e]
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::field::grad_q_norm_q;
    use crate::domain::mesh::{build_cylinder_mesh, build_interval_mesh};
    use crate::domain::NodeClass;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_cylinder_spec() -> CylinderSpec {
        CylinderSpec {
            ell: 1.0,
            cross: Omega2::Interval { a: 0.0, b: 1.0 },
        }
    }

    /// min 2a⁴ + 2(b-a)⁴ - 2a - b over the symmetric nodal values (a, b, a)
    /// on the five-node grid over (-2, 2): b - a = 1/2, a = (3/8)^(1/3).
    #[test]
    fn onedim_quartic_matches_the_stationarity_solution() {
        let mesh = Arc::new(build_interval_mesh(2.0, 1.0).unwrap());
        let spec = IntegrandSpec::power(1, 4.0).unwrap();
        let f = SourceTerm::Constant(1.0);
        let init = Field::zeros(mesh, Constraint::DirichletAll).unwrap();
        let opts = SolverOptions {
            energy_tol: 1e-15,
            ..SolverOptions::default()
        };
        let sol = minimize_field(init, &spec, &f, &opts, SolutionRole::UEll).unwrap();
        assert!(sol.converged, "stopped by {:?}", sol.reason);

        let a = (3.0f64 / 8.0).cbrt();
        let expect = [0.0, a, a + 0.5, a, 0.0];
        assert!((a - 0.721124785153704).abs() < 1e-14);
        for (n, want) in expect.iter().enumerate() {
            assert!(
                (sol.field.values[n] - want).abs() <= 1e-9,
                "node {n}: {} vs {want}",
                sol.field.values[n]
            );
        }
        assert!(
            (sol.energy - (-1.99753076659583)).abs() <= 1e-10,
            "energy {}",
            sol.energy
        );
    }

    #[test]
    fn gradient_stop_fires_when_enabled() {
        let cyl = tiny_cylinder_spec();
        let spec = IntegrandSpec::power(2, 2.0).unwrap();
        // An energy-based line search can certify gradients down to about
        // sqrt(ulp(E) * curvature) ~ 1e-9 here; ask for a tolerance with a
        // margin above that floor.
        let opts = SolverOptions {
            energy_window: 5000,
            energy_tol: 1e-16,
            grad_tol: 1e-8,
            max_iters: 20_000,
            ..SolverOptions::default()
        };
        let sol = solve_cylinder(
            &spec,
            &cyl,
            &SourceTerm::Constant(1.0),
            0.25,
            &opts,
            Method::Iterative,
            None,
        )
        .unwrap();
        assert_eq!(sol.reason, StopReason::Grad);
        assert!(sol.grad_sup <= 1e-8);
    }

    /// Uniform convexity transfers to the discretized energy:
    /// E(v) - E(u*) >= alpha * |∇(v - u*)|_q^q for any admissible v.
    #[test]
    fn energy_gap_dominates_the_convexity_modulus() {
        let cyl = tiny_cylinder_spec();
        let f = SourceTerm::Constant(1.0);
        let mesh = Arc::new(build_cylinder_mesh(&cyl, 0.25).unwrap());
        let cases = [
            IntegrandSpec::quadratic_form(2, vec![2.0, 0.5, 0.5, 1.0]).unwrap(),
            IntegrandSpec::power(2, 4.0).unwrap(),
        ];
        let opts = SolverOptions {
            energy_tol: 1e-15,
            ..SolverOptions::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for spec in &cases {
            let init = Field::zeros(Arc::clone(&mesh), Constraint::DirichletAll).unwrap();
            let star = minimize_field(init, spec, &f, &opts, SolutionRole::UEll).unwrap();
            assert!(star.converged);
            let bump: Vec<f64> = (0..mesh.n_nodes)
                .map(|n| {
                    if mesh.classes[n] == NodeClass::Interior {
                        rng.gen::<f64>() * 2.0 - 1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            for t in [1e-2, 0.3, 2.0] {
                let values: Vec<f64> = star
                    .field
                    .values
                    .iter()
                    .zip(&bump)
                    .map(|(u, b)| u + t * b)
                    .collect();
                let v =
                    Field::from_values(Arc::clone(&mesh), values, Constraint::DirichletAll)
                        .unwrap();
                let gap = assemble_energy(&v, spec, &f).unwrap() - star.energy;
                let dist = grad_q_norm_q(&v.sub(&star.field).unwrap(), spec.q, &Region::All)
                    .unwrap();
                assert!(
                    gap + 1e-7 * (1.0 + gap.abs()) >= spec.alpha * dist,
                    "t = {t}: gap {gap} vs alpha * dist {}",
                    spec.alpha * dist
                );
            }
        }
    }

    #[test]
    fn smoothing_schedule_handles_the_max_term() {
        let cyl = tiny_cylinder_spec();
        let spec = IntegrandSpec::aniso_max(2, 2.0, 1.0).unwrap();
        assert!(!spec.is_smooth());
        let opts = SolverOptions {
            record_trace: true,
            ..SolverOptions::default()
        };
        let sol = solve_cylinder(
            &spec,
            &cyl,
            &SourceTerm::Constant(1.0),
            0.25,
            &opts,
            Method::Auto,
            None,
        )
        .unwrap();
        assert!(sol.converged, "stopped by {:?}", sol.reason);
        assert!(sol.energy < 0.0, "energy {}", sol.energy);
        assert!(!sol.trace.is_empty());
        // Trace iterations were offset per stage, so they never decrease.
        for pair in sol.trace.windows(2) {
            assert!(pair[1].iteration > pair[0].iteration);
        }
        assert!(sol.certificate.is_some());
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let cyl = tiny_cylinder_spec();
        let spec = IntegrandSpec::power(2, 2.0).unwrap();
        let f = SourceTerm::Constant(1.0);
        let opts = SolverOptions {
            energy_tol: 1e-13,
            ..SolverOptions::default()
        };
        let cross = solve_cross_section(&spec, &cyl.cross, &f, 0.25, &opts, Method::Auto).unwrap();
        assert_eq!(cross.role, SolutionRole::UInfty);
        assert_eq!(cross.reason, StopReason::Direct);

        let warm = solve_cylinder(
            &spec,
            &cyl,
            &f,
            0.25,
            &opts,
            Method::Iterative,
            Some(&cross),
        )
        .unwrap();
        let cold =
            solve_cylinder(&spec, &cyl, &f, 0.25, &opts, Method::Iterative, None).unwrap();
        assert!(warm.converged && cold.converged);
        let sup = warm.field.sub(&cold.field).unwrap().sup_norm();
        let scale = cold.field.sup_norm().max(1e-30);
        assert!(sup <= 1e-6 * scale, "sup gap {sup}");
        assert!((warm.energy - cold.energy).abs() <= 1e-9 * (1.0 + cold.energy.abs()));
    }

    #[test]
    fn region_energies_partition_the_total() {
        let cyl = tiny_cylinder_spec();
        let spec = IntegrandSpec::power(2, 2.0).unwrap();
        let f = SourceTerm::Constant(1.0);
        let opts = SolverOptions::default();
        let sol = solve_cylinder(&spec, &cyl, &f, 0.25, &opts, Method::Auto, None).unwrap();
        let total = assemble_energy(&sol.field, &spec, &f).unwrap();
        let all = energy_in_region(&sol.field, &spec, &f, &Region::All).unwrap();
        let left =
            energy_in_region(&sol.field, &spec, &f, &Region::Slab { s: -1.0, t: 0.0 }).unwrap();
        let right =
            energy_in_region(&sol.field, &spec, &f, &Region::Slab { s: 0.0, t: 1.0 }).unwrap();
        assert!((all - total).abs() <= 1e-12 * (1.0 + total.abs()));
        assert!(
            (left + right - total).abs() <= 1e-12 * (1.0 + total.abs()),
            "{left} + {right} vs {total}"
        );
        // The symmetric problem splits its energy evenly.
        assert!((left - right).abs() <= 1e-10 * (1.0 + total.abs()));
    }

    #[test]
    fn tied_ends_solution_is_axis_constant_for_axis_free_data() {
        // With f independent of x₁ and ends tied, the minimizer over the
        // tied space is the axis-constant extension of the cross-section
        // minimizer, so every axis plane carries the same values.
        let cyl = tiny_cylinder_spec();
        let spec = IntegrandSpec::power(2, 2.0).unwrap();
        let f = SourceTerm::Constant(1.0);
        let opts = SolverOptions {
            energy_tol: 1e-15,
            ..SolverOptions::default()
        };
        let sol = solve_tied_ends(&spec, &cyl, &f, 0.25, &opts).unwrap();
        assert!(sol.converged);
        let mesh = &sol.field.mesh;
        let cn = mesh.cross_nodes;
        let planes = mesh.n_nodes / cn;
        for p in 1..planes {
            for j in 0..cn {
                let a = sol.field.values[j];
                let b = sol.field.values[p * cn + j];
                assert!(
                    (a - b).abs() <= 1e-8,
                    "plane {p} node {j}: {b} vs plane 0 {a}"
                );
            }
        }
    }
}
