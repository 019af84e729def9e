//! Direct solves for quadratic energies: when F(ξ) = Aξ·ξ the minimizer
//! solves the banded SPD system 2K x = b with K the stiffness matrix of A,
//! factored by LDLᵀ. Used as the second route in iterative-vs-direct
//! cross-checks and as the fast path for q = 2 parameter sweeps.

use std::sync::Arc;

use crate::domain::{Constraint, DofKind, DofMap, Field, Mesh, SourceTerm};
use crate::error::{Error, Result};
use crate::integrand::{IntegrandKind, IntegrandSpec};
use crate::linalg::BandedSpd;
use crate::solver::fem::{assemble_energy, FemProblem};
use crate::solver::{Objective, Solution, SolutionRole, StopReason};

/// The matrix A with F(ξ) = Aξ·ξ, when the integrand is quadratic.
pub fn quadratic_matrix(spec: &IntegrandSpec) -> Option<Vec<f64>> {
    if spec.q != 2.0 {
        return None;
    }
    let identity = || {
        let mut m = vec![0.0; spec.dim * spec.dim];
        for i in 0..spec.dim {
            m[i * spec.dim + i] = 1.0;
        }
        m
    };
    match &spec.kind {
        IntegrandKind::QuadraticForm { matrix } => Some(matrix.clone()),
        IntegrandKind::Power => Some(identity()),
        IntegrandKind::AnisoMax { weight } if *weight == 0.0 => Some(identity()),
        IntegrandKind::AnisoMax { .. } => None,
    }
}

/// Minimize ∫ Aξ·ξ - f u over the constrained space by one banded solve.
pub fn solve_quadratic_direct(
    mesh: &Arc<Mesh>,
    constraint: Constraint,
    spec: &IntegrandSpec,
    f: &SourceTerm,
) -> Result<Solution> {
    if constraint == Constraint::TiedEnds {
        return Err(Error::Unsupported(
            "tied end planes break bandedness; use the iterative solver".into(),
        ));
    }
    let a_full = quadratic_matrix(spec).ok_or_else(|| {
        Error::Unsupported("direct solve requires a quadratic integrand".into())
    })?;
    f.validate_for(mesh)?;

    // When the spec has one extra (axis) component the energy is F(0, ∇u):
    // only the lower-right block of A acts on the mesh gradient.
    let d = mesh.dim;
    let off = if spec.dim == d {
        0
    } else if spec.dim == d + 1 {
        1
    } else {
        return Err(Error::Dimension {
            expected: d,
            got: spec.dim,
        });
    };
    let sd = spec.dim;
    let mut a = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..d {
            a[r * d + c] = a_full[(r + off) * sd + (c + off)];
        }
    }

    let dofs = DofMap::build(mesh, constraint)?;
    let n = dofs.n_free;
    if n == 0 {
        return Err(Error::Solver("no unknowns to solve for".into()));
    }

    let dof_of = |node: u32| -> DofKind { dofs.kinds[node as usize] };
    let mut bw = 0usize;
    for e in 0..mesh.n_elems() {
        let nd = mesh.elem_nodes(e);
        for (vi, &ni) in nd.iter().enumerate() {
            for &nj in &nd[..vi] {
                if let (DofKind::Free(i), DofKind::Free(j)) = (dof_of(ni), dof_of(nj)) {
                    bw = bw.max((i as isize - j as isize).unsigned_abs());
                }
            }
        }
    }

    let mut k2 = BandedSpd::new(n, bw);
    let mut b = vec![0.0; n];
    for (node, kind) in dofs.kinds.iter().enumerate() {
        if let DofKind::Free(i) = *kind {
            b[i as usize] += mesh.node_weights[node] * f.value_at(mesh, node);
        }
    }

    let mut ag = vec![0.0; (d + 1) * d];
    for e in 0..mesh.n_elems() {
        let nd = mesh.elem_nodes(e);
        let sg = &mesh.shape_grads[e * (d + 1) * d..(e + 1) * (d + 1) * d];
        let w = 2.0 * mesh.vols[e];
        for v in 0..=d {
            for r in 0..d {
                let mut acc = 0.0;
                for c in 0..d {
                    acc += a[r * d + c] * sg[v * d + c];
                }
                ag[v * d + r] = acc;
            }
        }
        for (vi, &ni) in nd.iter().enumerate() {
            let ki = dof_of(ni);
            for (vj, &nj) in nd.iter().enumerate() {
                let mut dot = 0.0;
                for r in 0..d {
                    dot += ag[vi * d + r] * sg[vj * d + r];
                }
                let kij = w * dot;
                match (ki, dof_of(nj)) {
                    (DofKind::Free(i), DofKind::Free(j)) => {
                        // Each unordered pair lands in the lower band once.
                        if vj <= vi {
                            k2.add(i as usize, j as usize, kij);
                        }
                    }
                    (DofKind::Free(i), DofKind::Fixed(c)) if c != 0.0 => {
                        b[i as usize] -= kij * c;
                    }
                    _ => {}
                }
            }
        }
    }

    k2.factor()?;
    let x = k2.solve(&b)?;

    let mut problem = FemProblem::new(Arc::clone(mesh), constraint, spec, f)?;
    let values = problem.full_values(&x);
    let mut g = vec![0.0; n];
    problem.gradient(&x, &mut g);
    let grad_sup = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let field = Field::from_values(Arc::clone(mesh), values, constraint)?;
    let energy = assemble_energy(&field, spec, f)?;
    Ok(Solution {
        field,
        role: SolutionRole::UEll,
        energy,
        iterations: 1,
        reason: StopReason::Direct,
        converged: true,
        grad_sup,
        certificate: None,
        trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::mesh::{
        build_cross_section_mesh, build_cylinder_mesh, build_interval_mesh,
    };
    use crate::domain::{CylinderSpec, Omega2};
    use crate::solver::{minimize_field, SolverOptions};

    #[test]
    fn direct_matches_iterative_on_a_quadratic_form() {
        let cyl = CylinderSpec {
            ell: 2.0,
            cross: Omega2::Interval { a: 0.0, b: 1.0 },
        };
        let mesh = Arc::new(build_cylinder_mesh(&cyl, 0.125).unwrap());
        let spec = IntegrandSpec::quadratic_form(2, vec![1.0, 0.25, 0.25, 2.0]).unwrap();
        let f = SourceTerm::Constant(1.0);

        let direct = solve_quadratic_direct(&mesh, Constraint::DirichletAll, &spec, &f).unwrap();
        assert!(direct.grad_sup <= 1e-10, "residual {}", direct.grad_sup);

        let init = Field::zeros(Arc::clone(&mesh), Constraint::DirichletAll).unwrap();
        let opts = SolverOptions {
            energy_tol: 1e-15,
            ..SolverOptions::default()
        };
        let iter = minimize_field(init, &spec, &f, &opts, SolutionRole::UEll).unwrap();
        assert!(iter.converged);

        let e_scale = 1.0 + direct.energy.abs();
        assert!(
            (direct.energy - iter.energy).abs() <= 1e-9 * e_scale,
            "energies {} vs {}",
            direct.energy,
            iter.energy
        );
        let sup = direct.field.sub(&iter.field).unwrap().sup_norm();
        let u_scale = direct.field.sup_norm().max(1e-30);
        assert!(sup <= 1e-6 * u_scale, "sup gap {sup} vs scale {u_scale}");
    }

    #[test]
    fn pinned_cross_section_solve_is_nodally_exact() {
        // min ∫ (u')² - u on (0,1): u = x(1-x)/4, energy -1/48. The scheme
        // reproduces the parabola exactly at the nodes.
        let mesh =
            Arc::new(build_cross_section_mesh(&Omega2::Interval { a: 0.0, b: 1.0 }, 1.0 / 32.0)
                .unwrap());
        let spec = IntegrandSpec::power(2, 2.0).unwrap();
        let f = SourceTerm::Constant(1.0);
        let sol = solve_quadratic_direct(&mesh, Constraint::DirichletLateral, &spec, &f).unwrap();
        for n in 0..mesh.n_nodes {
            let x = mesh.coord(n, 0);
            let exact = 0.25 * x * (1.0 - x);
            assert!(
                (sol.field.values[n] - exact).abs() <= 1e-13,
                "node {n}: {} vs {exact}",
                sol.field.values[n]
            );
        }
        assert!(
            (sol.energy + 1.0 / 48.0).abs() <= 3e-5,
            "energy {} vs -1/48",
            sol.energy
        );
    }

    #[test]
    fn endpoint_values_enter_the_right_hand_side() {
        // No source: the minimizer of ∫ (u')² with u(-1)=1, u(1)=3 is the
        // straight line through the endpoints.
        let mesh = Arc::new(build_interval_mesh(1.0, 0.25).unwrap());
        let spec = IntegrandSpec::power(1, 2.0).unwrap();
        let sol = solve_quadratic_direct(
            &mesh,
            Constraint::Endpoints {
                left: 1.0,
                right: 3.0,
            },
            &spec,
            &SourceTerm::Constant(0.0),
        )
        .unwrap();
        for n in 0..mesh.n_nodes {
            let x = mesh.coord(n, 0);
            let exact = 2.0 + x;
            assert!(
                (sol.field.values[n] - exact).abs() <= 1e-12,
                "node {n}: {} vs {exact}",
                sol.field.values[n]
            );
        }
    }

    #[test]
    fn non_quadratic_integrands_are_rejected() {
        assert!(quadratic_matrix(&IntegrandSpec::power(2, 4.0).unwrap()).is_none());
        assert!(quadratic_matrix(&IntegrandSpec::aniso_max(2, 2.0, 1.0).unwrap()).is_none());
        assert!(quadratic_matrix(&IntegrandSpec::aniso_max(2, 2.0, 0.0).unwrap()).is_some());

        let mesh = Arc::new(build_interval_mesh(1.0, 0.25).unwrap());
        let spec = IntegrandSpec::power(1, 4.0).unwrap();
        let err = solve_quadratic_direct(
            &mesh,
            Constraint::DirichletAll,
            &spec,
            &SourceTerm::Constant(1.0),
        );
        assert!(err.is_err());
    }
}
