//! Lagrange spaces on a [`TetMesh`]: scalar P1, vector P1 and vector
//! P1 enriched with the interior bubble `256 λ0 λ1 λ2 λ3`.
//!
//! DOF layout: vertex DOFs first (`3 v + c` for vector spaces), then one bubble
//! DOF per tet and component (`3 nv + 3 k + c`).

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::mesh::{FaceTag, Point, TetMesh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    ScalarP1,
    VectorP1,
    VectorP1Bubble,
}

impl SpaceKind {
    pub fn components(self) -> usize {
        match self {
            SpaceKind::ScalarP1 => 1,
            _ => 3,
        }
    }

    pub fn has_bubble(self) -> bool {
        self == SpaceKind::VectorP1Bubble
    }

    /// Scalar shape functions per tet (4 vertex functions, plus the bubble).
    pub fn scalar_basis_len(self) -> usize {
        if self.has_bubble() {
            5
        } else {
            4
        }
    }

    /// Local DOFs per tet.
    pub fn local_len(self) -> usize {
        self.scalar_basis_len() * self.components()
    }
}

/// Precomputed affine data of one tetrahedron.
#[derive(Debug, Clone, Copy)]
pub struct TetGeometry {
    pub volume: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 3]; 4],
    pub vertices: [Point; 4],
}

impl TetGeometry {
    pub fn new(v: [Point; 4]) -> Self {
        let e = |i: usize| {
            [
                v[i][0] - v[0][0],
                v[i][1] - v[0][1],
                v[i][2] - v[0][2],
            ]
        };
        let (a, b, c) = (e(1), e(2), e(3));
        let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]);
        // rows of the inverse Jacobian are the gradients of λ1, λ2, λ3
        let g1 = scale(cross(b, c), 1.0 / det);
        let g2 = scale(cross(c, a), 1.0 / det);
        let g3 = scale(cross(a, b), 1.0 / det);
        let g0 = [
            -(g1[0] + g2[0] + g3[0]),
            -(g1[1] + g2[1] + g3[1]),
            -(g1[2] + g2[2] + g3[2]),
        ];
        TetGeometry {
            volume: det / 6.0,
            grad_lambda: [g0, g1, g2, g3],
            vertices: v,
        }
    }

    /// Physical point of barycentric coordinates `bary`.
    pub fn point(&self, bary: &[f64; 4]) -> Point {
        let mut p = [0.0; 3];
        for (a, l) in bary.iter().enumerate() {
            for c in 0..3 {
                p[c] += l * self.vertices[a][c];
            }
        }
        p
    }
}

/// Scalar shape functions and gradients at one point of one tet.
#[derive(Debug, Clone, Copy)]
pub struct ShapeValues {
    pub len: usize,
    pub values: [f64; 5],
    pub grads: [[f64; 3]; 5],
}

impl ShapeValues {
    pub fn eval(geom: &TetGeometry, bary: &[f64; 4], with_bubble: bool) -> Self {
        let mut values = [0.0; 5];
        let mut grads = [[0.0; 3]; 5];
        values[..4].copy_from_slice(bary);
        grads[..4].copy_from_slice(&geom.grad_lambda);
        let len = if with_bubble {
            values[4] = 256.0 * bary[0] * bary[1] * bary[2] * bary[3];
            for i in 0..4 {
                let mut prod = 256.0;
                for (j, l) in bary.iter().enumerate() {
                    if j != i {
                        prod *= l;
                    }
                }
                for c in 0..3 {
                    grads[4][c] += prod * geom.grad_lambda[i][c];
                }
            }
            5
        } else {
            4
        };
        ShapeValues {
            len,
            values,
            grads,
        }
    }
}

/// Finite element space on a shared mesh.
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub kind: SpaceKind,
    pub mesh: Arc<TetMesh>,
    pub dof_count: usize,
}

impl FeSpace {
    pub fn new(mesh: Arc<TetMesh>, kind: SpaceKind) -> Self {
        let nv = mesh.num_vertices();
        let nt = mesh.num_tets();
        let dof_count = match kind {
            SpaceKind::ScalarP1 => nv,
            SpaceKind::VectorP1 => 3 * nv,
            SpaceKind::VectorP1Bubble => 3 * (nv + nt),
        };
        FeSpace {
            kind,
            mesh,
            dof_count,
        }
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }

    pub fn vertex_dof(&self, v: usize, comp: usize) -> usize {
        self.components() * v + comp
    }

    /// Bubble DOF of tet `k`; only meaningful for [`SpaceKind::VectorP1Bubble`].
    pub fn bubble_dof(&self, k: usize, comp: usize) -> usize {
        debug_assert!(self.kind.has_bubble());
        3 * self.mesh.num_vertices() + 3 * k + comp
    }

    pub fn is_bubble_dof(&self, dof: usize) -> bool {
        self.kind.has_bubble() && dof >= 3 * self.mesh.num_vertices()
    }

    /// Global indices of the local DOFs of tet `k`, local index `comps * a + c`.
    pub fn local_dofs(&self, k: usize) -> Vec<usize> {
        let tet = &self.mesh.tets[k];
        let nc = self.components();
        let mut out = Vec::with_capacity(self.kind.local_len());
        for &v in tet {
            for c in 0..nc {
                out.push(self.vertex_dof(v, c));
            }
        }
        if self.kind.has_bubble() {
            for c in 0..3 {
                out.push(self.bubble_dof(k, c));
            }
        }
        out
    }

    /// Bubble DOFs grouped per tet (empty for spaces without bubbles).
    pub fn bubble_groups(&self) -> Vec<[usize; 3]> {
        if !self.kind.has_bubble() {
            return Vec::new();
        }
        (0..self.mesh.num_tets())
            .map(|k| [self.bubble_dof(k, 0), self.bubble_dof(k, 1), self.bubble_dof(k, 2)])
            .collect()
    }

    /// Nodal interpolant of a vector field: vertex values, plus the
    /// centroid value for bubble-enriched spaces.
    pub fn interpolate<F: Fn(&Point) -> [f64; 3]>(&self, f: F) -> Vec<f64> {
        let mut out = self.interpolate_vertices(&f);
        if self.kind.has_bubble() {
            for k in 0..self.mesh.num_tets() {
                let tet = &self.mesh.tets[k];
                let mut c = [0.0; 3];
                for &v in tet {
                    for d in 0..3 {
                        c[d] += 0.25 * self.mesh.vertices[v][d];
                    }
                }
                let fc = f(&c);
                for d in 0..3 {
                    // vertex hats are 1/4 and the bubble is 1 at the centroid
                    let avg: f64 = tet.iter().map(|&v| out[self.vertex_dof(v, d)]).sum::<f64>() / 4.0;
                    out[self.bubble_dof(k, d)] = fc[d] - avg;
                }
            }
        }
        out
    }

    /// Vertex values only; bubble coefficients are zero.
    pub fn interpolate_vertices<F: Fn(&Point) -> [f64; 3]>(&self, f: F) -> Vec<f64> {
        let mut out = vec![0.0; self.dof_count];
        let nc = self.components();
        for (v, p) in self.mesh.vertices.iter().enumerate() {
            let val = f(p);
            for c in 0..nc {
                out[self.vertex_dof(v, c)] = val[c];
            }
        }
        out
    }

    pub fn interpolate_scalar<F: Fn(&Point) -> f64>(&self, f: F) -> Vec<f64> {
        self.interpolate(|p| [f(p), 0.0, 0.0])
    }

    /// Value of the discrete field at barycentric point `bary` of tet `k`.
    pub fn eval(&self, coeffs: &[f64], k: usize, geom: &TetGeometry, bary: &[f64; 4]) -> [f64; 3] {
        let sv = ShapeValues::eval(geom, bary, self.kind.has_bubble());
        let dofs = self.local_dofs(k);
        let nc = self.components();
        let mut out = [0.0; 3];
        for a in 0..sv.len {
            for c in 0..nc {
                out[c] += coeffs[dofs[nc * a + c]] * sv.values[a];
            }
        }
        out
    }

    /// Gradient `g[c][d] = ∂_d u_c` at a barycentric point of tet `k`.
    pub fn eval_grad(
        &self,
        coeffs: &[f64],
        k: usize,
        geom: &TetGeometry,
        bary: &[f64; 4],
    ) -> [[f64; 3]; 3] {
        let sv = ShapeValues::eval(geom, bary, self.kind.has_bubble());
        let dofs = self.local_dofs(k);
        let nc = self.components();
        let mut out = [[0.0; 3]; 3];
        for a in 0..sv.len {
            for c in 0..nc {
                let coef = coeffs[dofs[nc * a + c]];
                for d in 0..3 {
                    out[c][d] += coef * sv.grads[a][d];
                }
            }
        }
        out
    }
}

/// Time-stamped coefficient vector of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVec {
    pub values: Vec<f64>,
    pub time: f64,
}

impl FieldVec {
    pub fn zeros(space: &FeSpace, time: f64) -> Self {
        FieldVec {
            values: vec![0.0; space.dof_count],
            time,
        }
    }
}

/// Prescribed DOF values, kept sorted by DOF index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    entries: BTreeMap<usize, f64>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a constraint; an existing one with a different value is an error.
    pub fn insert(&mut self, dof: usize, value: f64) -> Result<()> {
        match self.entries.get(&dof) {
            Some(&old) if old != value => Err(Error::ConflictingConstraint {
                dof,
                first: old,
                second: value,
            }),
            _ => {
                self.entries.insert(dof, value);
                Ok(())
            }
        }
    }

    pub fn merge(&mut self, other: &ConstraintSet) -> Result<()> {
        for (&d, &v) in &other.entries {
            self.insert(d, v)?;
        }
        Ok(())
    }

    /// Shifts every DOF index by `offset` (placing a field inside a block system).
    pub fn shifted(&self, offset: usize) -> ConstraintSet {
        ConstraintSet {
            entries: self.entries.iter().map(|(&d, &v)| (d + offset, v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, dof: usize) -> Option<f64> {
        self.entries.get(&dof).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&d, &v)| (d, v))
    }

    /// Overwrites the constrained entries of `values`.
    pub fn apply_to(&self, values: &mut [f64]) {
        for (&d, &v) in &self.entries {
            values[d] = v;
        }
    }

    /// Same set with every prescribed value replaced by zero.
    pub fn homogeneous(&self) -> ConstraintSet {
        ConstraintSet {
            entries: self.entries.keys().map(|&d| (d, 0.0)).collect(),
        }
    }
}

fn boundary_vertex_list(mesh: &TetMesh, tags: &[FaceTag]) -> Vec<usize> {
    let mut verts: Vec<usize> = tags.iter().flat_map(|&t| mesh.boundary_vertices(t)).collect();
    verts.sort_unstable();
    verts.dedup();
    verts
}

/// Nodal Dirichlet data on every vertex of the tagged planes. `value` is
/// evaluated at the vertex, so shared edges take whatever it returns there.
/// Scalar spaces use the first component.
pub fn dirichlet_constraints<F: Fn(&Point) -> [f64; 3]>(
    space: &FeSpace,
    tags: &[FaceTag],
    value: F,
) -> Result<ConstraintSet> {
    let mesh = &space.mesh;
    let mut cs = ConstraintSet::new();
    for v in boundary_vertex_list(mesh, tags) {
        let val = value(&mesh.vertices[v]);
        for c in 0..space.components() {
            cs.insert(space.vertex_dof(v, c), val[c])?;
        }
    }
    Ok(cs)
}

/// Homogeneous normal component `w · n = 0` at every boundary vertex; edge
/// vertices lose two components and corners all three.
pub fn normal_trace_constraints(space: &FeSpace) -> Result<ConstraintSet> {
    if space.components() != 3 {
        return Err(Error::InvalidArgument(
            "normal trace constraints need a vector space".into(),
        ));
    }
    let mesh = &space.mesh;
    let mut cs = ConstraintSet::new();
    for v in boundary_vertex_list(mesh, &FaceTag::ALL) {
        for tag in mesh.vertex_tags(v) {
            cs.insert(space.vertex_dof(v, tag.axis()), 0.0)?;
        }
    }
    Ok(cs)
}

/// Tangential data `n × B = n × b_d` for a constant `b_d`: on each incident
/// plane the two in-plane components are pinned to those of `b_d`.
pub fn tangential_trace_constraints(space: &FeSpace, b_d: [f64; 3]) -> Result<ConstraintSet> {
    if space.components() != 3 {
        return Err(Error::InvalidArgument(
            "tangential trace constraints need a vector space".into(),
        ));
    }
    let mesh = &space.mesh;
    let mut cs = ConstraintSet::new();
    for v in boundary_vertex_list(mesh, &FaceTag::ALL) {
        for tag in mesh.vertex_tags(v) {
            for c in (0..3).filter(|&c| c != tag.axis()) {
                cs.insert(space.vertex_dof(v, c), b_d[c])?;
            }
        }
    }
    Ok(cs)
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}
