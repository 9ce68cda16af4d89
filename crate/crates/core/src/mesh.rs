//! Structured tetrahedral meshes of the unit cube.
//!
//! Every subcube of an `n × n × n` lattice is split into six tetrahedra
//! sharing the main diagonal (Kuhn/Freudenthal split). All subcubes use the
//! same diagonal direction, so the split is conforming without extra vertices.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::{Error, Result};

/// Point in physical space.
pub type Point = [f64; 3];

/// Planes of the unit cube boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaceTag {
    X0,
    X1,
    Y0,
    Y1,
    Z0,
    Z1,
}

impl FaceTag {
    pub const ALL: [FaceTag; 6] = [
        FaceTag::X0,
        FaceTag::X1,
        FaceTag::Y0,
        FaceTag::Y1,
        FaceTag::Z0,
        FaceTag::Z1,
    ];

    /// Coordinate axis normal to the plane (0 = x, 1 = y, 2 = z).
    pub fn axis(self) -> usize {
        match self {
            FaceTag::X0 | FaceTag::X1 => 0,
            FaceTag::Y0 | FaceTag::Y1 => 1,
            FaceTag::Z0 | FaceTag::Z1 => 2,
        }
    }

    /// Coordinate value of the plane along [`FaceTag::axis`].
    pub fn level(self) -> f64 {
        match self {
            FaceTag::X0 | FaceTag::Y0 | FaceTag::Z0 => 0.0,
            FaceTag::X1 | FaceTag::Y1 | FaceTag::Z1 => 1.0,
        }
    }

    /// Axis-aligned outward unit normal.
    pub fn outward_normal(self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self.axis()] = if self.level() == 0.0 { -1.0 } else { 1.0 };
        n
    }

    /// Whether `p` lies on this plane within `tol`.
    pub fn contains(self, p: &Point, tol: f64) -> bool {
        (p[self.axis()] - self.level()).abs() <= tol
    }
}

/// Free-function form of [`FaceTag::outward_normal`].
pub fn outward_normal(tag: FaceTag) -> [f64; 3] {
    tag.outward_normal()
}

/// Boundary triangle with its plane tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub vertices: [usize; 3],
    pub tag: FaceTag,
}

/// Conforming tetrahedral mesh of `[0,1]^3`.
#[derive(Debug, Clone)]
pub struct TetMesh {
    pub vertices: Vec<Point>,
    pub tets: Vec<[usize; 4]>,
    pub boundary_faces: Vec<BoundaryFace>,
    /// Number of lattice cells per axis.
    pub n: usize,
    /// Nominal mesh size `1/n`.
    pub h: f64,
}

const ON_PLANE_TOL: f64 = 1e-14;

impl TetMesh {
    /// Uniform `n^3` lattice with the six-tetrahedra split of each subcube.
    pub fn build_structured_cube(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "mesh resolution must be at least 1".into(),
            ));
        }
        let np = n + 1;
        let vid = |i: usize, j: usize, k: usize| i + np * (j + np * k);
        let hf = 1.0 / n as f64;

        let mut vertices = Vec::with_capacity(np * np * np);
        for k in 0..np {
            for j in 0..np {
                for i in 0..np {
                    vertices.push([i as f64 * hf, j as f64 * hf, k as f64 * hf]);
                }
            }
        }
        // exact lattice coordinates on the far planes
        for p in vertices.iter_mut() {
            for c in p.iter_mut() {
                if (*c - 1.0).abs() < 1e-12 {
                    *c = 1.0;
                }
            }
        }

        // walk from corner 000 to 111 along the three axes in every order
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut tets = Vec::with_capacity(6 * n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for perm in PERMS.iter() {
                        let mut c = [i, j, k];
                        let mut tet = [0usize; 4];
                        tet[0] = vid(c[0], c[1], c[2]);
                        for (s, &axis) in perm.iter().enumerate() {
                            c[axis] += 1;
                            tet[s + 1] = vid(c[0], c[1], c[2]);
                        }
                        if signed_volume(&vertices, &tet) < 0.0 {
                            tet.swap(2, 3);
                        }
                        tets.push(tet);
                    }
                }
            }
        }

        let mut mesh = TetMesh {
            vertices,
            tets,
            boundary_faces: Vec::new(),
            n,
            h: hf,
        };
        mesh.boundary_faces = mesh.find_boundary_faces()?;
        Ok(mesh)
    }

    fn find_boundary_faces(&self) -> Result<Vec<BoundaryFace>> {
        let counts = self.face_incidence();
        let mut faces = Vec::new();
        for (key, count) in counts {
            if count != 1 {
                continue;
            }
            let tag = FaceTag::ALL
                .into_iter()
                .find(|t| key.iter().all(|&v| t.contains(&self.vertices[v], ON_PLANE_TOL)))
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("boundary face {key:?} off the cube planes"))
                })?;
            faces.push(BoundaryFace { vertices: key, tag });
        }
        faces.sort_by_key(|f| (f.tag, f.vertices));
        Ok(faces)
    }

    /// Multiplicity of every triangular face (sorted vertex triple).
    pub fn face_incidence(&self) -> HashMap<[usize; 3], usize> {
        let mut counts: HashMap<[usize; 3], usize> = HashMap::with_capacity(12 * self.tets.len());
        for tet in &self.tets {
            for skip in 0..4 {
                let mut f = [0usize; 3];
                let mut m = 0;
                for (a, &v) in tet.iter().enumerate() {
                    if a != skip {
                        f[m] = v;
                        m += 1;
                    }
                }
                f.sort_unstable();
                *counts.entry(f).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_vertices(&self, k: usize) -> [Point; 4] {
        let t = &self.tets[k];
        [
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
            self.vertices[t[3]],
        ]
    }

    pub fn tet_volume(&self, k: usize) -> f64 {
        signed_volume(&self.vertices, &self.tets[k])
    }

    /// Sorted indices of the lattice vertices on the tagged plane.
    pub fn boundary_vertices(&self, tag: FaceTag) -> Vec<usize> {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(_, p)| tag.contains(p, ON_PLANE_TOL))
            .map(|(i, _)| i)
            .collect()
    }

    /// Tags of all cube planes containing vertex `v` (empty for interior vertices).
    pub fn vertex_tags(&self, v: usize) -> Vec<FaceTag> {
        let p = &self.vertices[v];
        FaceTag::ALL
            .into_iter()
            .filter(|t| t.contains(p, ON_PLANE_TOL))
            .collect()
    }

    /// Legacy ASCII unstructured-grid text with points and tetrahedral cells.
    pub fn to_vtk_string(&self) -> String {
        let mut s = String::new();
        write_vtk_geometry(&mut s, self, "tetrahedral mesh");
        s
    }

    pub fn write_vtk(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_vtk_string())
    }
}

/// Six times the signed volume divided by six, i.e. the oriented volume.
pub fn signed_volume(vertices: &[Point], tet: &[usize; 4]) -> f64 {
    let p0 = vertices[tet[0]];
    let d = |v: usize| {
        let p = vertices[v];
        [p[0] - p0[0], p[1] - p0[1], p[2] - p0[2]]
    };
    let (a, b, c) = (d(tet[1]), d(tet[2]), d(tet[3]));
    let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0]);
    det / 6.0
}

pub(crate) fn write_vtk_geometry(s: &mut String, mesh: &TetMesh, title: &str) {
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
    }
    let nt = mesh.tets.len();
    let _ = writeln!(s, "CELLS {} {}", nt, 5 * nt);
    for t in &mesh.tets {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "10");
    }
}
