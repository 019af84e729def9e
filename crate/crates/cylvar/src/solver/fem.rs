//! Discretized energy on piecewise-linear fields: one-point (exact) gradient
//! quadrature for ∫ F(∇u), vertex-rule loads for ∫ f u, and a deterministic
//! two-pass gradient assembly (per-element flux, then a node-centric gather
//! over the precomputed adjacency), so parallel and sequential runs agree
//! bit for bit.

use std::sync::Arc;

use crate::domain::{Constraint, DofKind, DofMap, Field, Mesh, SourceTerm};
use crate::error::{Error, Result};
use crate::integrand::IntegrandSpec;
use crate::par;
use crate::solver::Objective;

/// Whether the density consumes the mesh gradient directly or with a zero
/// axis slot in front (the cross-section limit uses F(0, ∇'u)).
fn pinned_axis(spec: &IntegrandSpec, mesh: &Mesh) -> Result<bool> {
    if spec.dim == mesh.dim {
        Ok(false)
    } else if spec.dim == mesh.dim + 1 {
        Ok(true)
    } else {
        Err(Error::Dimension {
            expected: mesh.dim,
            got: spec.dim,
        })
    }
}

#[inline]
fn elem_density(mesh: &Mesh, spec: &IntegrandSpec, pinned: bool, values: &[f64], e: usize) -> f64 {
    let d = mesh.dim;
    let off = pinned as usize;
    let mut xi = [0.0f64; 4];
    mesh.gradient_of(e, values, &mut xi[off..off + d]);
    mesh.vols[e] * spec.density(&xi[..off + d])
}

fn interior_energy(mesh: &Mesh, spec: &IntegrandSpec, pinned: bool, values: &[f64]) -> f64 {
    par::sum(mesh.n_elems(), |e| {
        elem_density(mesh, spec, pinned, values, e)
    })
}

/// Discretized energy E(u) = ∫ F(∇u) - ∫ f u of a nodal field. A spec with
/// one more component than the mesh dimension is evaluated as F(0, ∇u).
pub fn assemble_energy(u: &Field, spec: &IntegrandSpec, f: &SourceTerm) -> Result<f64> {
    let mesh = &u.mesh;
    let pinned = pinned_axis(spec, mesh)?;
    f.validate_for(mesh)?;
    let bulk = interior_energy(mesh, spec, pinned, &u.values);
    let load = par::sum(mesh.n_nodes, |n| {
        mesh.node_weights[n] * f.value_at(mesh, n) * u.values[n]
    });
    Ok(bulk - load)
}

/// Per-element energies whose sum is the total energy: the gradient term
/// plus each element's vertex-rule share of the load.
pub fn element_energies(u: &Field, spec: &IntegrandSpec, f: &SourceTerm) -> Result<Vec<f64>> {
    let mesh = &u.mesh;
    let pinned = pinned_axis(spec, mesh)?;
    f.validate_for(mesh)?;
    let values = &u.values;
    let share = 1.0 / (mesh.dim + 1) as f64;
    Ok(par::map_items(mesh.n_elems(), |e| {
        let mut load = 0.0;
        for &n in mesh.elem_nodes(e) {
            let n = n as usize;
            load += f.value_at(mesh, n) * values[n];
        }
        elem_density(mesh, spec, pinned, values, e) - mesh.vols[e] * share * load
    }))
}

/// The discretized energy as an objective over the free unknowns of a
/// constrained field.
pub struct FemProblem {
    mesh: Arc<Mesh>,
    dofs: DofMap,
    spec: IntegrandSpec,
    pinned: bool,
    /// Vertex-rule load factors w_n f_n per node.
    loads: Vec<f64>,
    values: Vec<f64>,
    elem_flux: Vec<[f64; 3]>,
    node_grad: Vec<f64>,
}

impl FemProblem {
    pub fn new(
        mesh: Arc<Mesh>,
        constraint: Constraint,
        spec: &IntegrandSpec,
        f: &SourceTerm,
    ) -> Result<Self> {
        let pinned = pinned_axis(spec, &mesh)?;
        f.validate_for(&mesh)?;
        let dofs = DofMap::build(&mesh, constraint)?;
        let loads = (0..mesh.n_nodes)
            .map(|n| mesh.node_weights[n] * f.value_at(&mesh, n))
            .collect();
        let values = vec![0.0; mesh.n_nodes];
        let elem_flux = vec![[0.0; 3]; mesh.n_elems()];
        let node_grad = vec![0.0; mesh.n_nodes];
        Ok(FemProblem {
            mesh,
            dofs,
            spec: spec.clone(),
            pinned,
            loads,
            values,
            elem_flux,
            node_grad,
        })
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    /// Full nodal values for an unknown vector.
    pub fn full_values(&self, x: &[f64]) -> Vec<f64> {
        let mut values = vec![0.0; self.mesh.n_nodes];
        self.dofs.apply(x, &mut values);
        values
    }
}

impl Objective for FemProblem {
    fn n_unknowns(&self) -> usize {
        self.dofs.n_free
    }

    fn energy(&mut self, x: &[f64]) -> f64 {
        self.dofs.apply(x, &mut self.values);
        let bulk = interior_energy(&self.mesh, &self.spec, self.pinned, &self.values);
        let (loads, values) = (&self.loads, &self.values);
        let load = par::sum(self.mesh.n_nodes, |n| loads[n] * values[n]);
        bulk - load
    }

    fn gradient(&mut self, x: &[f64], g: &mut [f64]) {
        debug_assert_eq!(g.len(), self.dofs.n_free);
        self.dofs.apply(x, &mut self.values);
        let d = self.mesh.dim;
        let off = self.pinned as usize;

        // Pass 1: per-element flux vol * F'(∇u), spatial components only.
        {
            let (mesh, spec, values) = (&self.mesh, &self.spec, &self.values);
            par::fill(&mut self.elem_flux, |e| {
                let mut xi = [0.0f64; 4];
                mesh.gradient_of(e, values, &mut xi[off..off + d]);
                let mut dsub = [0.0f64; 4];
                spec.subgradient_into(&xi[..off + d], &mut dsub[..off + d]);
                let vol = mesh.vols[e];
                let mut flux = [0.0f64; 3];
                for k in 0..d {
                    flux[k] = vol * dsub[off + k];
                }
                flux
            });
        }

        // Pass 2: node-centric gather over the adjacency, minus the load.
        {
            let (mesh, flux, loads) = (&self.mesh, &self.elem_flux, &self.loads);
            par::fill(&mut self.node_grad, |n| {
                let lo = mesh.node_elems_off[n] as usize;
                let hi = mesh.node_elems_off[n + 1] as usize;
                let mut acc = 0.0;
                for &packed in &mesh.node_elems[lo..hi] {
                    let e = (packed / 4) as usize;
                    let v = (packed % 4) as usize;
                    let sg = &mesh.shape_grads[e * (d + 1) * d + v * d..];
                    let fx = &flux[e];
                    for k in 0..d {
                        acc += fx[k] * sg[k];
                    }
                }
                acc - loads[n]
            });
        }

        // Pass 3: fold node derivatives onto unknowns (tied pairs add up).
        g.fill(0.0);
        for (n, k) in self.dofs.kinds.iter().enumerate() {
            if let DofKind::Free(i) = *k {
                g[i as usize] += self.node_grad[n];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::mesh::{
        build_cross_section_mesh, build_cylinder_mesh, build_interval_mesh,
    };
    use crate::domain::{CylinderSpec, Omega2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_cylinder() -> Arc<Mesh> {
        let cyl = CylinderSpec {
            ell: 1.0,
            cross: Omega2::Interval { a: 0.0, b: 1.0 },
        };
        Arc::new(build_cylinder_mesh(&cyl, 0.25).unwrap())
    }

    fn fd_check(mesh: Arc<Mesh>, constraint: Constraint, spec: &IntegrandSpec, f: &SourceTerm) {
        let mut p = FemProblem::new(mesh, constraint, spec, f).unwrap();
        let n = p.n_unknowns();
        assert!(n > 0, "constraint leaves no unknowns");
        let mut rng = ChaCha8Rng::seed_from_u64(401);
        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let mut g = vec![0.0; n];
        p.gradient(&x, &mut g);
        let h = 1e-6;
        let mut xp = x.clone();
        for i in 0..n {
            xp[i] = x[i] + h;
            let ep = p.energy(&xp);
            xp[i] = x[i] - h;
            let em = p.energy(&xp);
            xp[i] = x[i];
            let fd = (ep - em) / (2.0 * h);
            let scale = 1.0f64.max(g[i].abs()).max(fd.abs());
            assert!(
                (fd - g[i]).abs() <= 1e-5 * scale,
                "dof {i}: finite difference {fd} vs assembled {}",
                g[i]
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences_on_cylinders() {
        let mesh = tiny_cylinder();
        let f = SourceTerm::Constant(1.0);
        let quad = IntegrandSpec::quadratic_form(2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        fd_check(Arc::clone(&mesh), Constraint::DirichletAll, &quad, &f);
        let p4 = IntegrandSpec::power(2, 4.0).unwrap();
        fd_check(Arc::clone(&mesh), Constraint::DirichletAll, &p4, &f);
        let p3 = IntegrandSpec::power(2, 3.0).unwrap();
        fd_check(Arc::clone(&mesh), Constraint::DirichletAll, &p3, &f);
        let smoothed = IntegrandSpec::aniso_max(2, 4.0, 1.0)
            .unwrap()
            .with_smoothing(0.01)
            .unwrap();
        fd_check(Arc::clone(&mesh), Constraint::DirichletAll, &smoothed, &f);
        // Unsmoothed max term: differentiable off the ties, which random
        // values avoid.
        let kinked = IntegrandSpec::aniso_max(2, 2.0, 0.5).unwrap();
        fd_check(Arc::clone(&mesh), Constraint::DirichletAll, &kinked, &f);
        // Tied end planes share unknowns; their derivatives must add up.
        fd_check(Arc::clone(&mesh), Constraint::TiedEnds, &quad, &f);
    }

    #[test]
    fn gradient_matches_finite_differences_pinned_and_1d() {
        let cross = Arc::new(
            build_cross_section_mesh(&Omega2::Interval { a: 0.0, b: 1.0 }, 0.125).unwrap(),
        );
        let pinned = IntegrandSpec::power(2, 4.0).unwrap();
        fd_check(
            Arc::clone(&cross),
            Constraint::DirichletLateral,
            &pinned,
            &SourceTerm::Constant(1.0),
        );
        let pinned_quad = IntegrandSpec::quadratic_form(2, vec![1.0, 0.3, 0.3, 2.0]).unwrap();
        fd_check(
            cross,
            Constraint::DirichletLateral,
            &pinned_quad,
            &SourceTerm::PolyX2(vec![0.5, 0.0, 1.0]),
        );

        let line = Arc::new(build_interval_mesh(2.0, 0.25).unwrap());
        let p4 = IntegrandSpec::power(1, 4.0).unwrap();
        fd_check(
            line,
            Constraint::Endpoints {
                left: 0.5,
                right: -0.25,
            },
            &p4,
            &SourceTerm::Constant(2.0),
        );
    }

    #[test]
    fn gradient_matches_finite_differences_in_3d() {
        let cyl = CylinderSpec {
            ell: 0.5,
            cross: Omega2::Rect {
                a: 0.0,
                b: 1.0,
                c: 0.0,
                d: 1.0,
            },
        };
        let mesh = Arc::new(build_cylinder_mesh(&cyl, 0.25).unwrap());
        let spec = IntegrandSpec::aniso_max(3, 2.5, 0.7)
            .unwrap()
            .with_smoothing(0.02)
            .unwrap();
        fd_check(
            mesh,
            Constraint::DirichletAll,
            &spec,
            &SourceTerm::Constant(1.0),
        );
    }

    #[test]
    fn element_energies_sum_to_the_total() {
        let mesh = tiny_cylinder();
        let spec = IntegrandSpec::power(2, 4.0).unwrap();
        let f = SourceTerm::Constant(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let values: Vec<f64> = (0..mesh.n_nodes).map(|_| rng.gen::<f64>()).collect();
        let u = Field::from_values(mesh, values, Constraint::Free).unwrap();
        let total = assemble_energy(&u, &spec, &f).unwrap();
        let parts: f64 = element_energies(&u, &spec, &f).unwrap().iter().sum();
        assert!(
            (total - parts).abs() <= 1e-12 * (1.0 + total.abs()),
            "{total} vs {parts}"
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mesh = tiny_cylinder();
        let spec = IntegrandSpec::power(1, 2.0).unwrap();
        let err = FemProblem::new(mesh, Constraint::DirichletAll, &spec, &SourceTerm::Constant(1.0));
        assert!(err.is_err());
    }
}
