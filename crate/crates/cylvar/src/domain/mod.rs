//! Domains and their discretizations: cylinders (-ℓ,ℓ)×ω₂ with interval or
//! rectangle cross-sections, the simplicial tensor meshes on them, node
//! fields, source terms, and axis-aligned subregions for localized norms.

pub mod field;
pub mod mesh;

pub use field::{Constraint, DofKind, DofMap, Field};
pub use mesh::{Mesh, NodeClass};

use crate::error::{Error, Result};

/// Cross-section ω₂: an open interval or an open axis-aligned rectangle.
#[derive(Debug, Clone, PartialEq)]
pub enum Omega2 {
    Interval { a: f64, b: f64 },
    Rect { a: f64, b: f64, c: f64, d: f64 },
}

impl Omega2 {
    pub fn dim(&self) -> usize {
        match self {
            Omega2::Interval { .. } => 1,
            Omega2::Rect { .. } => 2,
        }
    }

    pub fn measure(&self) -> f64 {
        match self {
            Omega2::Interval { a, b } => b - a,
            Omega2::Rect { a, b, c, d } => (b - a) * (d - c),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Omega2::Interval { a, b } => a.is_finite() && b.is_finite() && b > a,
            Omega2::Rect { a, b, c, d } => {
                a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite() && b > a && d > c
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "cross-section must have positive extent: {self:?}"
            )))
        }
    }
}

/// The cylinder (-ℓ, ℓ) × ω₂.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderSpec {
    pub ell: f64,
    pub cross: Omega2,
}

impl CylinderSpec {
    pub fn dim(&self) -> usize {
        1 + self.cross.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.ell.is_finite() || self.ell <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "half-length must be positive, got {}",
                self.ell
            )));
        }
        self.cross.validate()
    }
}

/// Right-hand side f. On cylinders it depends on the cross-section only, so
/// the limiting cross-section problem uses the same object.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceTerm {
    Constant(f64),
    /// Polynomial Σ cₖ t^k in the first cross-section coordinate.
    PolyX2(Vec<f64>),
    /// One value per cross-section node, constant along the axis.
    NodalCross(Vec<f64>),
}

impl SourceTerm {
    /// Check that the term is usable on this mesh.
    pub fn validate_for(&self, mesh: &Mesh) -> Result<()> {
        match self {
            SourceTerm::Constant(c) => {
                if c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec("source constant must be finite".into()))
                }
            }
            SourceTerm::PolyX2(c) => {
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec(
                        "source coefficients must be finite".into(),
                    ));
                }
                if mesh.has_axis() && mesh.dim == 1 {
                    return Err(Error::InvalidSpec(
                        "polynomial source needs a cross-section coordinate".into(),
                    ));
                }
                Ok(())
            }
            SourceTerm::NodalCross(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidSpec("source values must be finite".into()));
                }
                if v.len() != mesh.cross_nodes {
                    return Err(Error::GridMismatch(format!(
                        "nodal source has {} values, mesh cross-section has {} nodes",
                        v.len(),
                        mesh.cross_nodes
                    )));
                }
                Ok(())
            }
        }
    }

    /// Value at a mesh node.
    pub fn value_at(&self, mesh: &Mesh, node: usize) -> f64 {
        match self {
            SourceTerm::Constant(c) => *c,
            SourceTerm::PolyX2(coef) => {
                let k = if mesh.has_axis() { 1 } else { 0 };
                let t = mesh.coord(node, k.min(mesh.dim - 1));
                coef.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            SourceTerm::NodalCross(v) => {
                if mesh.has_axis() {
                    v[node % mesh.cross_nodes]
                } else {
                    v[node]
                }
            }
        }
    }

    /// True when the term is >= 0 at every node of the mesh (the hypothesis
    /// behind the pointwise comparison checks).
    pub fn is_nonnegative_on(&self, mesh: &Mesh) -> bool {
        (0..mesh.n_nodes).all(|n| self.value_at(mesh, n) >= 0.0)
    }
}

/// Axis-aligned subregion of a mesh with an axis, used to localize norms.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    All,
    /// |x₁| <= ℓ/2.
    HalfCylinder,
    /// s <= x₁ <= t.
    Slab { s: f64, t: f64 },
    /// The two end collars ℓ - depth <= |x₁|.
    Collar { depth: f64 },
}

impl Region {
    /// Slab with endpoints snapped to the nearest mesh planes.
    pub fn slab_snapped(mesh: &Mesh, s: f64, t: f64) -> Result<Region> {
        if !mesh.has_axis() {
            return Err(Error::GridMismatch(
                "slab region needs a mesh with an axis".into(),
            ));
        }
        let snap = |x: f64| -> f64 {
            mesh.x1_planes
                .iter()
                .copied()
                .min_by(|a, b| (a - x).abs().partial_cmp(&(b - x).abs()).unwrap())
                .unwrap()
        };
        let (s, t) = (snap(s), snap(t));
        if s >= t {
            return Err(Error::InvalidSpec(format!(
                "slab collapsed after snapping: [{s}, {t}]"
            )));
        }
        Ok(Region::Slab { s, t })
    }

    /// Does element `e` lie inside the region (up to a relative tolerance)?
    pub fn contains_element(&self, mesh: &Mesh, e: usize) -> bool {
        match self {
            Region::All => true,
            _ => {
                let (lo, hi) = mesh.element_x1_range(e);
                let ell = mesh.half_length().unwrap_or(0.0);
                let tol = 1e-9 * ell.max(1.0);
                match self {
                    Region::All => unreachable!(),
                    Region::HalfCylinder => lo >= -0.5 * ell - tol && hi <= 0.5 * ell + tol,
                    Region::Slab { s, t } => lo >= s - tol && hi <= t + tol,
                    Region::Collar { depth } => {
                        hi <= -(ell - depth) + tol || lo >= (ell - depth) - tol
                    }
                }
            }
        }
    }

    /// Regions other than `All` need an axis to slice along.
    pub fn validate_for(&self, mesh: &Mesh) -> Result<()> {
        if matches!(self, Region::All) || mesh.has_axis() {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                "axis-aligned region on a mesh without an axis".into(),
            ))
        }
    }
}
