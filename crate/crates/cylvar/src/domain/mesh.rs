//! Tensor-product simplicial meshes: each box of the tensor grid is split
//! into d! simplices along its main diagonal (2 right triangles per
//! rectangle, 6 tetrahedra per box), which keeps the mesh conforming and the
//! simplices non-obtuse. Boundary classes come from grid indices, the axis
//! grid is chosen so that 0, ±ℓ/2, and ±ℓ are exact coordinates, and every
//! mesh precomputes element geometry and node-element adjacency.

use super::{CylinderSpec, Omega2};
use crate::error::{Error, Result};

/// Where a node sits: inside, on the lateral boundary (the Dirichlet part),
/// or on one of the two end planes. End wins on shared edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Lateral,
    End,
}

impl NodeClass {
    pub fn word(self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::Lateral => "lateral",
            NodeClass::End => "end",
        }
    }
}

#[derive(Debug)]
pub struct Mesh {
    /// Ambient dimension (1, 2, or 3).
    pub dim: usize,
    pub n_nodes: usize,
    /// Node coordinates, `node * dim + k`. Coordinate 0 is the axis for
    /// meshes that have one.
    pub coords: Vec<f64>,
    /// Element connectivity, `elem * (dim + 1) + vertex`.
    pub elems: Vec<u32>,
    pub classes: Vec<NodeClass>,
    /// Element volumes.
    pub vols: Vec<f64>,
    /// Barycentric shape-function gradients, `elem * (dim+1)*dim`.
    pub shape_grads: Vec<f64>,
    /// Vertex-rule node weights: Σ vol/(d+1) over adjacent elements.
    pub node_weights: Vec<f64>,
    /// Axis plane coordinates; empty for cross-section meshes.
    pub x1_planes: Vec<f64>,
    /// Nodes per axis plane (equals `n_nodes` for cross-section meshes).
    pub cross_nodes: usize,
    /// Is cross-section node j on the cross-section boundary?
    pub cross_boundary: Vec<bool>,
    /// CSR offsets into `node_elems`.
    pub node_elems_off: Vec<u32>,
    /// Adjacency entries packed as `elem * 4 + local_vertex`.
    pub node_elems: Vec<u32>,
}

const PERMS1: [[usize; 3]; 1] = [[0, 0, 0]];
const PERMS2: [[usize; 3]; 2] = [[0, 1, 0], [1, 0, 0]];
const PERMS3: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn perms(d: usize) -> &'static [[usize; 3]] {
    match d {
        1 => &PERMS1,
        2 => &PERMS2,
        _ => &PERMS3,
    }
}

/// Symmetric axis grid on (-ℓ, ℓ): 4m cells with m = ceil(ℓ/2h), so the
/// spacing is at most h and 0, ±ℓ/2, ±ℓ are grid points exactly.
fn axis_coords_symmetric(ell: f64, h: f64) -> Vec<f64> {
    let m = (ell / (2.0 * h)).ceil().max(1.0) as i64;
    (0..=4 * m)
        .map(|i| ell * ((i - 2 * m) as f64) / ((2 * m) as f64))
        .collect()
}

/// Uniform grid on [a, b] with spacing at most h.
fn axis_coords_interval(a: f64, b: f64, h: f64) -> Vec<f64> {
    let n = ((b - a) / h).ceil().max(1.0) as i64;
    (0..=n)
        .map(|i| a + (b - a) * (i as f64) / (n as f64))
        .collect()
}

fn check_h(h: f64) -> Result<()> {
    if !h.is_finite() || h <= 0.0 {
        Err(Error::InvalidSpec(format!(
            "mesh spacing must be positive, got {h}"
        )))
    } else {
        Ok(())
    }
}

struct TensorGrid {
    /// Per-axis node coordinates; axis 0 is x₁ when `has_axis`.
    axes: Vec<Vec<f64>>,
    has_axis: bool,
}

impl TensorGrid {
    fn build(self) -> Result<Mesh> {
        let d = self.axes.len();
        let lens: Vec<usize> = self.axes.iter().map(|a| a.len()).collect();
        let n_nodes: usize = lens.iter().product();
        if n_nodes >= (u32::MAX as usize) / 4 {
            return Err(Error::InvalidSpec(format!(
                "mesh too large: {n_nodes} nodes"
            )));
        }

        let mut coords = Vec::with_capacity(n_nodes * d);
        let mut mi = vec![0usize; d];
        for flat in 0..n_nodes {
            let mut rem = flat;
            for k in (0..d).rev() {
                mi[k] = rem % lens[k];
                rem /= lens[k];
            }
            for k in 0..d {
                coords.push(self.axes[k][mi[k]]);
            }
        }

        let cells: usize = lens.iter().map(|l| l - 1).product();
        let per_cell = perms(d).len();
        let mut elems: Vec<u32> = Vec::with_capacity(cells * per_cell * (d + 1));
        let node_of = |mi: &[usize]| -> u32 {
            let mut acc = 0usize;
            for k in 0..d {
                acc = acc * lens[k] + mi[k];
            }
            acc as u32
        };
        let mut ci = vec![0usize; d];
        for cell in 0..cells {
            let mut rem = cell;
            for k in (0..d).rev() {
                ci[k] = rem % (lens[k] - 1);
                rem /= lens[k] - 1;
            }
            for perm in perms(d) {
                let mut v = ci.clone();
                elems.push(node_of(&v));
                for &step in &perm[..d] {
                    v[step] += 1;
                    elems.push(node_of(&v));
                }
            }
        }

        let n_elems = elems.len() / (d + 1);
        let mut vols = vec![0.0f64; n_elems];
        let mut shape_grads = vec![0.0f64; n_elems * (d + 1) * d];
        for e in 0..n_elems {
            let nd = &elems[e * (d + 1)..(e + 1) * (d + 1)];
            let at = |v: usize, k: usize| coords[nd[v] as usize * d + k];
            let g = &mut shape_grads[e * (d + 1) * d..(e + 1) * (d + 1) * d];
            let det;
            match d {
                1 => {
                    let dx = at(1, 0) - at(0, 0);
                    det = dx;
                    g[1] = 1.0 / dx;
                    g[0] = -g[1];
                }
                2 => {
                    let (ax, ay) = (at(1, 0) - at(0, 0), at(1, 1) - at(0, 1));
                    let (bx, by) = (at(2, 0) - at(0, 0), at(2, 1) - at(0, 1));
                    det = ax * by - ay * bx;
                    // Rows of the inverse of the edge matrix.
                    g[2] = by / det;
                    g[3] = -bx / det;
                    g[4] = -ay / det;
                    g[5] = ax / det;
                    g[0] = -(g[2] + g[4]);
                    g[1] = -(g[3] + g[5]);
                }
                _ => {
                    let m: [[f64; 3]; 3] = [
                        [at(1, 0) - at(0, 0), at(2, 0) - at(0, 0), at(3, 0) - at(0, 0)],
                        [at(1, 1) - at(0, 1), at(2, 1) - at(0, 1), at(3, 1) - at(0, 1)],
                        [at(1, 2) - at(0, 2), at(2, 2) - at(0, 2), at(3, 2) - at(0, 2)],
                    ];
                    det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
                    // Rows of M⁻¹ via the adjugate: row i is ∇λ_{i+1}.
                    let inv = [
                        [
                            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det,
                            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
                            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det,
                        ],
                        [
                            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det,
                            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
                            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det,
                        ],
                        [
                            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det,
                            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
                            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det,
                        ],
                    ];
                    for i in 0..3 {
                        for k in 0..3 {
                            g[(i + 1) * 3 + k] = inv[i][k];
                        }
                    }
                    for k in 0..3 {
                        g[k] = -(g[3 + k] + g[6 + k] + g[9 + k]);
                    }
                }
            }
            let fact = [1.0, 1.0, 2.0, 6.0][d];
            vols[e] = det.abs() / fact;
        }

        // Boundary classes from grid indices: on an axis mesh the two end
        // planes are End, any other boundary index is Lateral; cross-section
        // meshes have Lateral boundaries only.
        let mut classes = vec![NodeClass::Interior; n_nodes];
        for (flat, class) in classes.iter_mut().enumerate() {
            let mut rem = flat;
            let mut end = false;
            let mut lateral = false;
            for k in (0..d).rev() {
                let i = rem % lens[k];
                rem /= lens[k];
                let on_bdry = i == 0 || i == lens[k] - 1;
                if on_bdry {
                    if self.has_axis && k == 0 {
                        end = true;
                    } else {
                        lateral = true;
                    }
                }
            }
            *class = if end {
                NodeClass::End
            } else if lateral {
                NodeClass::Lateral
            } else {
                NodeClass::Interior
            };
        }

        let (x1_planes, cross_nodes) = if self.has_axis {
            (self.axes[0].clone(), n_nodes / lens[0])
        } else {
            (Vec::new(), n_nodes)
        };
        let cross_lens = if self.has_axis { &lens[1..] } else { &lens[..] };
        let mut cross_boundary = vec![false; cross_nodes];
        for (j, flag) in cross_boundary.iter_mut().enumerate() {
            let mut rem = j;
            for k in (0..cross_lens.len()).rev() {
                let i = rem % cross_lens[k];
                rem /= cross_lens[k];
                if i == 0 || i == cross_lens[k] - 1 {
                    *flag = true;
                }
            }
        }

        // Node-element adjacency via counting sort.
        let mut off = vec![0u32; n_nodes + 1];
        for &n in &elems {
            off[n as usize + 1] += 1;
        }
        for i in 0..n_nodes {
            off[i + 1] += off[i];
        }
        let mut cursor = off.clone();
        let mut node_elems = vec![0u32; elems.len()];
        for e in 0..n_elems {
            for v in 0..=d {
                let n = elems[e * (d + 1) + v] as usize;
                node_elems[cursor[n] as usize] = (e * 4 + v) as u32;
                cursor[n] += 1;
            }
        }

        let mut node_weights = vec![0.0f64; n_nodes];
        for e in 0..n_elems {
            let w = vols[e] / (d + 1) as f64;
            for v in 0..=d {
                node_weights[elems[e * (d + 1) + v] as usize] += w;
            }
        }

        Ok(Mesh {
            dim: d,
            n_nodes,
            coords,
            elems,
            classes,
            vols,
            shape_grads,
            node_weights,
            x1_planes,
            cross_nodes,
            cross_boundary,
            node_elems_off: off,
            node_elems,
        })
    }
}

/// Mesh of (-ℓ, ℓ) × ω₂.
pub fn build_cylinder_mesh(cyl: &CylinderSpec, h: f64) -> Result<Mesh> {
    cyl.validate()?;
    check_h(h)?;
    let mut axes = vec![axis_coords_symmetric(cyl.ell, h)];
    match &cyl.cross {
        Omega2::Interval { a, b } => axes.push(axis_coords_interval(*a, *b, h)),
        Omega2::Rect { a, b, c, d } => {
            axes.push(axis_coords_interval(*a, *b, h));
            axes.push(axis_coords_interval(*c, *d, h));
        }
    }
    TensorGrid {
        axes,
        has_axis: true,
    }
    .build()
}

/// Mesh of the cross-section ω₂ alone.
pub fn build_cross_section_mesh(cross: &Omega2, h: f64) -> Result<Mesh> {
    cross.validate()?;
    check_h(h)?;
    let axes = match cross {
        Omega2::Interval { a, b } => vec![axis_coords_interval(*a, *b, h)],
        Omega2::Rect { a, b, c, d } => vec![
            axis_coords_interval(*a, *b, h),
            axis_coords_interval(*c, *d, h),
        ],
    };
    TensorGrid {
        axes,
        has_axis: false,
    }
    .build()
}

/// Mesh of the interval (-ℓ, ℓ) for the one-dimensional problems; the two
/// endpoints carry class End.
pub fn build_interval_mesh(ell: f64, h: f64) -> Result<Mesh> {
    if !ell.is_finite() || ell <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "half-length must be positive, got {ell}"
        )));
    }
    check_h(h)?;
    TensorGrid {
        axes: vec![axis_coords_symmetric(ell, h)],
        has_axis: true,
    }
    .build()
}

impl Mesh {
    pub fn n_elems(&self) -> usize {
        self.vols.len()
    }

    #[inline]
    pub fn coord(&self, node: usize, k: usize) -> f64 {
        self.coords[node * self.dim + k]
    }

    #[inline]
    pub fn elem_nodes(&self, e: usize) -> &[u32] {
        &self.elems[e * (self.dim + 1)..(e + 1) * (self.dim + 1)]
    }

    pub fn has_axis(&self) -> bool {
        !self.x1_planes.is_empty()
    }

    /// ℓ for meshes built on (-ℓ, ℓ) × ω₂ or (-ℓ, ℓ).
    pub fn half_length(&self) -> Option<f64> {
        self.x1_planes.last().copied()
    }

    /// Min and max x₁ over an element's vertices.
    pub fn element_x1_range(&self, e: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &n in self.elem_nodes(e) {
            let x = self.coords[n as usize * self.dim];
            lo = lo.min(x);
            hi = hi.max(x);
        }
        (lo, hi)
    }

    /// Gradient of a node field on element `e`.
    #[inline]
    pub fn gradient_of(&self, e: usize, values: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let nd = self.elem_nodes(e);
        let g = &self.shape_grads[e * (d + 1) * d..(e + 1) * (d + 1) * d];
        out[..d].fill(0.0);
        for (v, &n) in nd.iter().enumerate() {
            let u = values[n as usize];
            for k in 0..d {
                out[k] += u * g[v * d + k];
            }
        }
    }

    pub fn total_volume(&self) -> f64 {
        self.vols.iter().sum()
    }

    /// Index of the axis cell containing the element (axis meshes).
    pub fn element_x1_cell(&self, e: usize) -> usize {
        let (lo, hi) = self.element_x1_range(e);
        let mid = 0.5 * (lo + hi);
        match self
            .x1_planes
            .binary_search_by(|p| p.partial_cmp(&mid).unwrap())
        {
            Ok(i) => i.min(self.x1_planes.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x1_planes.len() - 2),
        }
    }

    /// Structural equality: same dimension and identical coordinates.
    pub fn same_grid(&self, other: &Mesh) -> bool {
        self.dim == other.dim && self.n_nodes == other.n_nodes && self.coords == other.coords
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cyl() -> Mesh {
        build_cylinder_mesh(
            &CylinderSpec {
                ell: 1.0,
                cross: Omega2::Interval { a: 0.0, b: 1.0 },
            },
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn cylinder_counts_and_volume() {
        let m = tiny_cyl();
        // Axis: 4 cells, 5 planes; cross: 2 cells, 3 nodes.
        assert_eq!(m.x1_planes.len(), 5);
        assert_eq!(m.cross_nodes, 3);
        assert_eq!(m.n_nodes, 15);
        assert_eq!(m.n_elems(), 4 * 2 * 2);
        assert!((m.total_volume() - 2.0).abs() < 1e-14);
        let wsum: f64 = m.node_weights.iter().sum();
        assert!((wsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rect_cylinder_counts_and_volume() {
        let m = build_cylinder_mesh(
            &CylinderSpec {
                ell: 1.0,
                cross: Omega2::Rect {
                    a: 0.0,
                    b: 1.0,
                    c: 0.0,
                    d: 1.0,
                },
            },
            0.5,
        )
        .unwrap();
        assert_eq!(m.n_nodes, 5 * 9);
        assert_eq!(m.n_elems(), 4 * 4 * 6);
        assert!((m.total_volume() - 2.0).abs() < 1e-14);
        assert!(m.vols.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn axis_grid_hits_special_points_exactly() {
        for (ell, h) in [(4.0, 1.0 / 32.0), (6.0, 1.0 / 32.0), (3.0, 0.7), (12.0, 0.03)] {
            let planes = axis_coords_symmetric(ell, h);
            assert!(planes.contains(&0.0));
            assert!(planes.contains(&(ell / 2.0)));
            assert!(planes.contains(&(-ell / 2.0)));
            assert_eq!(*planes.first().unwrap(), -ell);
            assert_eq!(*planes.last().unwrap(), ell);
            let max_h = planes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            assert!(max_h <= h + 1e-12, "spacing {max_h} exceeds {h}");
        }
    }

    #[test]
    fn node_classes_follow_grid_indices() {
        let m = tiny_cyl();
        let count = |c: NodeClass| m.classes.iter().filter(|&&x| x == c).count();
        // End planes carry all their nodes, including the lateral corners.
        assert_eq!(count(NodeClass::End), 2 * 3);
        // Lateral: cross-boundary nodes on the 3 interior planes.
        assert_eq!(count(NodeClass::Lateral), 2 * 3);
        assert_eq!(count(NodeClass::Interior), 3);
        assert_eq!(m.cross_boundary, vec![true, false, true]);
    }

    #[test]
    fn interval_mesh_is_one_dimensional() {
        let m = build_interval_mesh(1.0, 0.5).unwrap();
        assert_eq!(m.dim, 1);
        assert_eq!(m.n_nodes, 5);
        assert_eq!(m.n_elems(), 4);
        assert_eq!(m.cross_nodes, 1);
        assert_eq!(m.classes[0], NodeClass::End);
        assert_eq!(m.classes[4], NodeClass::End);
        assert_eq!(m.classes[2], NodeClass::Interior);
        assert!((m.total_volume() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn cross_section_mesh_has_no_axis() {
        let m = build_cross_section_mesh(&Omega2::Interval { a: 0.0, b: 1.0 }, 0.25).unwrap();
        assert!(!m.has_axis());
        assert_eq!(m.cross_nodes, m.n_nodes);
        assert!(m.classes.iter().all(|&c| c != NodeClass::End));
        assert_eq!(
            m.classes.iter().filter(|&&c| c == NodeClass::Lateral).count(),
            2
        );
    }

    #[test]
    fn linear_fields_have_exact_gradients() {
        let m = build_cylinder_mesh(
            &CylinderSpec {
                ell: 2.0,
                cross: Omega2::Rect {
                    a: 0.0,
                    b: 1.5,
                    c: -1.0,
                    d: 0.5,
                },
            },
            0.4,
        )
        .unwrap();
        let a = [0.3, -1.1, 0.7];
        let values: Vec<f64> = (0..m.n_nodes)
            .map(|n| (0..3).map(|k| a[k] * m.coord(n, k)).sum())
            .collect();
        let mut g = [0.0; 3];
        for e in 0..m.n_elems() {
            m.gradient_of(e, &values, &mut g);
            for k in 0..3 {
                assert!(
                    (g[k] - a[k]).abs() < 1e-12,
                    "element {e} component {k}: {} vs {}",
                    g[k],
                    a[k]
                );
            }
        }
    }

    #[test]
    fn adjacency_is_consistent() {
        let m = tiny_cyl();
        for node in 0..m.n_nodes {
            let lo = m.node_elems_off[node] as usize;
            let hi = m.node_elems_off[node + 1] as usize;
            for &packed in &m.node_elems[lo..hi] {
                let e = (packed / 4) as usize;
                let v = (packed % 4) as usize;
                assert_eq!(m.elem_nodes(e)[v] as usize, node);
            }
        }
        assert_eq!(m.node_elems_off[m.n_nodes] as usize, m.elems.len());
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(build_interval_mesh(-1.0, 0.5).is_err());
        assert!(build_interval_mesh(1.0, 0.0).is_err());
        assert!(build_cross_section_mesh(&Omega2::Interval { a: 1.0, b: 0.0 }, 0.5).is_err());
    }
}
