//! Node fields, admissible-set bookkeeping (Dirichlet, tied ends, endpoint
//! values), and the discrete norms, couplings, and dumps built on them.

use std::io::Write;
use std::sync::Arc;

use super::mesh::{Mesh, NodeClass};
use super::{Region, SourceTerm};
use crate::error::{Error, Result};
use crate::par;
use crate::report::fmt_f64;

/// Admissible set the field belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// Zero on the whole boundary (lateral and end planes).
    DirichletAll,
    /// Zero on the lateral boundary only.
    DirichletLateral,
    /// Zero on the lateral boundary; the two end planes share their values.
    TiedEnds,
    /// One-dimensional: prescribed endpoint values.
    Endpoints { left: f64, right: f64 },
    /// No constraint (arithmetic results, diagnostics).
    Free,
}

/// A node is either the `i`-th unknown or pinned to a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DofKind {
    Free(u32),
    Fixed(f64),
}

/// Node-to-unknown map for a constraint on a mesh.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub kinds: Vec<DofKind>,
    pub n_free: usize,
}

impl DofMap {
    pub fn build(mesh: &Mesh, constraint: Constraint) -> Result<DofMap> {
        let mut kinds = vec![DofKind::Fixed(0.0); mesh.n_nodes];
        let mut next = 0u32;
        match constraint {
            Constraint::Free => {
                for (n, k) in kinds.iter_mut().enumerate() {
                    *k = DofKind::Free(n as u32);
                }
                next = mesh.n_nodes as u32;
            }
            Constraint::DirichletAll => {
                for (n, k) in kinds.iter_mut().enumerate() {
                    if mesh.classes[n] == NodeClass::Interior {
                        *k = DofKind::Free(next);
                        next += 1;
                    }
                }
            }
            Constraint::DirichletLateral => {
                // End-plane nodes on the cross-section boundary sit on the
                // closure of the lateral surface, so they are pinned too.
                for (n, k) in kinds.iter_mut().enumerate() {
                    let on_lateral = match mesh.classes[n] {
                        NodeClass::Lateral => true,
                        NodeClass::End => mesh.cross_boundary[n % mesh.cross_nodes],
                        NodeClass::Interior => false,
                    };
                    if !on_lateral {
                        *k = DofKind::Free(next);
                        next += 1;
                    }
                }
            }
            Constraint::TiedEnds => {
                if !mesh.has_axis() {
                    return Err(Error::GridMismatch(
                        "tied ends need a mesh with an axis".into(),
                    ));
                }
                let cn = mesh.cross_nodes;
                let right_base = mesh.n_nodes - cn;
                for n in 0..mesh.n_nodes {
                    match mesh.classes[n] {
                        NodeClass::Lateral => {}
                        NodeClass::Interior => {
                            kinds[n] = DofKind::Free(next);
                            next += 1;
                        }
                        NodeClass::End => {
                            let j = n % cn;
                            if mesh.cross_boundary[j] {
                                continue; // On the lateral closure: pinned.
                            }
                            if n < cn {
                                kinds[n] = DofKind::Free(next);
                                next += 1;
                            } else {
                                // Right plane shares the left plane's unknown.
                                kinds[n] = kinds[j];
                            }
                        }
                    }
                }
                debug_assert_eq!(right_base % cn, 0);
            }
            Constraint::Endpoints { left, right } => {
                if mesh.dim != 1 || !mesh.has_axis() {
                    return Err(Error::GridMismatch(
                        "endpoint values need a one-dimensional interval mesh".into(),
                    ));
                }
                for (n, k) in kinds.iter_mut().enumerate() {
                    if mesh.classes[n] == NodeClass::End {
                        *k = DofKind::Fixed(if n == 0 { left } else { right });
                    } else {
                        *k = DofKind::Free(next);
                        next += 1;
                    }
                }
            }
        }
        Ok(DofMap {
            kinds,
            n_free: next as usize,
        })
    }

    /// Scatter unknowns (plus pinned values) into a full node vector.
    pub fn apply(&self, x: &[f64], values: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_free);
        debug_assert_eq!(values.len(), self.kinds.len());
        for (v, k) in values.iter_mut().zip(&self.kinds) {
            *v = match *k {
                DofKind::Free(i) => x[i as usize],
                DofKind::Fixed(c) => c,
            };
        }
    }

    /// Gather the unknown components out of a full node vector. For tied
    /// pairs the representative (left-plane) value wins.
    pub fn extract(&self, values: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_free];
        for (n, k) in self.kinds.iter().enumerate().rev() {
            if let DofKind::Free(i) = *k {
                x[i as usize] = values[n];
            }
        }
        x
    }
}

/// A scalar field on the nodes of a mesh.
#[derive(Debug, Clone)]
pub struct Field {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    pub constraint: Constraint,
}

impl Field {
    /// The zero element of the admissible set (endpoint values included).
    pub fn zeros(mesh: Arc<Mesh>, constraint: Constraint) -> Result<Field> {
        let dofs = DofMap::build(&mesh, constraint)?;
        let mut values = vec![0.0; mesh.n_nodes];
        dofs.apply(&vec![0.0; dofs.n_free], &mut values);
        Ok(Field {
            mesh,
            values,
            constraint,
        })
    }

    pub fn from_values(mesh: Arc<Mesh>, values: Vec<f64>, constraint: Constraint) -> Result<Field> {
        if values.len() != mesh.n_nodes {
            return Err(Error::Dimension {
                expected: mesh.n_nodes,
                got: values.len(),
            });
        }
        Ok(Field {
            mesh,
            values,
            constraint,
        })
    }

    fn same_mesh(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh.same_grid(&other.mesh)
    }

    /// Nodewise difference; the result carries no constraint.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        if !self.same_mesh(other) {
            return Err(Error::GridMismatch(
                "field difference across different meshes".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field {
            mesh: Arc::clone(&self.mesh),
            values,
            constraint: Constraint::Free,
        })
    }

    pub fn sup_norm(&self) -> f64 {
        par::max(self.values.len(), |i| self.values[i].abs())
    }

    pub fn max_value(&self) -> f64 {
        par::max(self.values.len(), |i| self.values[i])
    }
}

/// ∫_region |∇u|^q (the q-th power of the gradient q-norm).
pub fn grad_q_norm_q(u: &Field, q: f64, region: &Region) -> Result<f64> {
    region.validate_for(&u.mesh)?;
    let mesh = &u.mesh;
    let d = mesh.dim;
    let values = &u.values;
    let total = par::sum(mesh.n_elems(), |e| {
        if !region.contains_element(mesh, e) {
            return 0.0;
        }
        let mut g = [0.0f64; 3];
        mesh.gradient_of(e, values, &mut g);
        let s: f64 = g[..d].iter().map(|v| v * v).sum();
        let p = if q == 2.0 {
            s
        } else if q == 4.0 {
            s * s
        } else if s == 0.0 {
            0.0
        } else {
            s.powf(q / 2.0)
        };
        mesh.vols[e] * p
    });
    Ok(total)
}

/// (∫_region |∇u|^q)^{1/q}.
pub fn grad_q_norm(u: &Field, q: f64, region: &Region) -> Result<f64> {
    Ok(grad_q_norm_q(u, q, region)?.powf(1.0 / q))
}

/// Vertex-rule ∫_region |u|^q.
pub fn lq_norm_q(u: &Field, q: f64, region: &Region) -> Result<f64> {
    region.validate_for(&u.mesh)?;
    let mesh = &u.mesh;
    let d = mesh.dim;
    let values = &u.values;
    let total = par::sum(mesh.n_elems(), |e| {
        if !region.contains_element(mesh, e) {
            return 0.0;
        }
        let w = mesh.vols[e] / (d + 1) as f64;
        mesh.elem_nodes(e)
            .iter()
            .map(|&n| {
                let a = values[n as usize].abs();
                let p = if q == 2.0 {
                    a * a
                } else if q == 4.0 {
                    let t = a * a;
                    t * t
                } else if a == 0.0 {
                    0.0
                } else {
                    a.powf(q)
                };
                w * p
            })
            .sum()
    });
    Ok(total)
}

/// Vertex-rule ∫ f·u over the whole mesh.
pub fn integrate_fu(u: &Field, f: &SourceTerm) -> Result<f64> {
    f.validate_for(&u.mesh)?;
    let mesh = &u.mesh;
    let values = &u.values;
    Ok(par::sum(mesh.n_nodes, |n| {
        mesh.node_weights[n] * f.value_at(mesh, n) * values[n]
    }))
}

/// Extend a cross-section field constantly along the axis of a cylinder
/// mesh. The result is admissible for the tied-ends problem.
pub fn extend_in_x1(cross: &Field, cyl: &Arc<Mesh>) -> Result<Field> {
    if !cyl.has_axis() {
        return Err(Error::GridMismatch("extension target has no axis".into()));
    }
    if cross.mesh.has_axis() {
        return Err(Error::GridMismatch(
            "extension source must be a cross-section field".into(),
        ));
    }
    if cross.mesh.n_nodes != cyl.cross_nodes {
        return Err(Error::GridMismatch(format!(
            "cross-section has {} nodes, cylinder planes have {}",
            cross.mesh.n_nodes, cyl.cross_nodes
        )));
    }
    // The cylinder's non-axis coordinates on plane 0 must reproduce the
    // cross-section coordinates exactly (same grid construction).
    let cd = cross.mesh.dim;
    for j in 0..cyl.cross_nodes {
        for k in 0..cd {
            if cyl.coord(j, k + 1) != cross.mesh.coord(j, k) {
                return Err(Error::GridMismatch(format!(
                    "cross-section grids differ at node {j}"
                )));
            }
        }
    }
    let mut values = vec![0.0; cyl.n_nodes];
    let cn = cyl.cross_nodes;
    let cv = &cross.values;
    par::fill(&mut values, |i| cv[i % cn]);
    Ok(Field {
        mesh: Arc::clone(cyl),
        values,
        constraint: Constraint::TiedEnds,
    })
}

/// Taper a tied-ends extension down to zero on the end planes over a collar
/// of unit depth: an admissible warm start for the full Dirichlet problem.
pub fn taper_to_dirichlet(ext: &Field) -> Result<Field> {
    let mesh = &ext.mesh;
    let ell = mesh
        .half_length()
        .ok_or_else(|| Error::GridMismatch("taper needs a mesh with an axis".into()))?;
    let mut values = ext.values.clone();
    let cn = mesh.cross_nodes;
    let planes = &mesh.x1_planes;
    for (i, &x1) in planes.iter().enumerate() {
        let t = (ell - x1.abs()).clamp(0.0, 1.0);
        if t < 1.0 {
            for j in 0..cn {
                values[i * cn + j] *= t;
            }
        }
    }
    Field::from_values(Arc::clone(mesh), values, Constraint::DirichletAll)
}

/// Write a whitespace-separated dump: `index x1 [x2 [x3]] class value`
/// with a `#` header line naming the columns.
pub fn write_field_dump(u: &Field, w: &mut dyn Write) -> Result<()> {
    let mesh = &u.mesh;
    let names: &[&str] = if mesh.has_axis() {
        &["x1", "x2", "x3"][..mesh.dim]
    } else {
        &["x2", "x3"][..mesh.dim]
    };
    write!(w, "# index")?;
    for n in names {
        write!(w, " {n}")?;
    }
    writeln!(w, " class value")?;
    for node in 0..mesh.n_nodes {
        write!(w, "{node}")?;
        for k in 0..mesh.dim {
            write!(w, " {}", fmt_f64(mesh.coord(node, k)))?;
        }
        writeln!(
            w,
            " {} {}",
            mesh.classes[node].word(),
            fmt_f64(u.values[node])
        )?;
    }
    Ok(())
}
