//! Element-loop assembly of the bilinear, trilinear and stabilization forms.
//!
//! Matrices are stored test-row by trial-column. Local DOF order follows
//! [`FeSpace::local_dofs`]. Trilinear forms use the skew-symmetrized
//! `½[(w·∇)u·v − (w·∇)v·u]` integrand so that `vᵀN(w)v` vanishes to round-off
//! for any advecting field and any quadrature rule.

use std::sync::Arc;

use rayon::prelude::*;

use crate::fespace::{cross, dot, FeSpace, ShapeValues, SpaceKind, TetGeometry};
use crate::mesh::{Point, TetMesh};
use crate::quadrature::{tet_rule, QuadRule};
use crate::sparse::SparseMat;
use crate::{Error, Result};


/// Physical coefficients of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Fluid viscosity ν.
    pub nu: f64,
    /// Micro-rotation viscosity ν_r.
    pub nu_r: f64,
    /// Magnetic viscosity μ.
    pub mu: f64,
    pub c0: f64,
    pub ca: f64,
    pub cd: f64,
    /// Coupling coefficient S.
    pub s: f64,
}

impl ModelParams {
    pub fn new(nu: f64, nu_r: f64, mu: f64, c0: f64, ca: f64, cd: f64, s: f64) -> Result<Self> {
        let p = ModelParams {
            nu,
            nu_r,
            mu,
            c0,
            ca,
            cd,
            s,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.nu, self.nu_r, self.mu, self.c0, self.ca, self.cd, self.s];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "model parameters must be positive: {self:?}"
            )));
        }
        if self.c0 + self.cd <= self.ca {
            return Err(Error::InvalidArgument(format!(
                "need c0 + cd > ca, got {} + {} <= {}",
                self.c0, self.cd, self.ca
            )));
        }
        Ok(())
    }

    /// Manufactured-solution convergence runs.
    pub fn convergence() -> Self {
        ModelParams {
            nu: 1.0,
            nu_r: 1.0,
            mu: 1.0,
            c0: 0.5,
            ca: 0.5,
            cd: 0.5,
            s: 1.0,
        }
    }

    /// Unforced energy-decay runs.
    pub fn stability() -> Self {
        ModelParams {
            nu: 0.001,
            nu_r: 1.0,
            mu: 0.01,
            c0: 0.005,
            ca: 0.005,
            cd: 0.5,
            s: 1.0,
        }
    }

    /// Lid-driven cavity.
    pub fn cavity() -> Self {
        ModelParams {
            nu: 0.1,
            nu_r: 0.1,
            mu: 0.1,
            c0: 0.5,
            ca: 0.5,
            cd: 0.5,
            s: 1.0,
        }
    }

    /// `ν + ν_r`.
    pub fn momentum_viscosity(&self) -> f64 {
        self.nu + self.nu_r
    }

    /// `c_a + c_d`.
    pub fn angular_viscosity(&self) -> f64 {
        self.ca + self.cd
    }

    /// `c_0 + c_d − c_a`.
    pub fn grad_div_coefficient(&self) -> f64 {
        self.c0 + self.cd - self.ca
    }
}

/// Quadrature degrees used by an [`Assembler`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureDegrees {
    pub bilinear: usize,
    pub trilinear: usize,
    pub load: usize,
}

impl Default for QuadratureDegrees {
    fn default() -> Self {
        // degree 8 integrates every P1-bubble bilinear integrand exactly
        QuadratureDegrees {
            bilinear: 8,
            trilinear: 6,
            load: 8,
        }
    }
}

/// Element geometry plus quadrature rules for one mesh.
#[derive(Debug, Clone)]
pub struct Assembler {
    pub mesh: Arc<TetMesh>,
    pub geoms: Vec<TetGeometry>,
    pub bilinear_rule: QuadRule,
    pub trilinear_rule: QuadRule,
    pub load_rule: QuadRule,
}

type LocalKernel<'a> = dyn Fn(usize, &TetGeometry, &mut [f64]) + Sync + 'a;

impl Assembler {
    pub fn new(mesh: Arc<TetMesh>) -> Self {
        Self::with_degrees(mesh, QuadratureDegrees::default()).expect("default degrees are valid")
    }

    pub fn with_degrees(mesh: Arc<TetMesh>, deg: QuadratureDegrees) -> Result<Self> {
        let geoms = (0..mesh.num_tets())
            .map(|k| TetGeometry::new(mesh.tet_vertices(k)))
            .collect();
        Ok(Assembler {
            mesh,
            geoms,
            bilinear_rule: tet_rule(deg.bilinear)?,
            trilinear_rule: tet_rule(deg.trilinear)?,
            load_rule: tet_rule(deg.load)?,
        })
    }

    fn assemble(&self, test: &FeSpace, trial: &FeSpace, kernel: &LocalKernel<'_>) -> SparseMat {
        self.assemble_impl(test, trial, kernel, false)
    }

    /// Local matrices are averaged with their transpose, so the global matrix
    /// is bitwise symmetric.
    fn assemble_symmetric(&self, space: &FeSpace, kernel: &LocalKernel<'_>) -> SparseMat {
        self.assemble_impl(space, space, kernel, true)
    }

    fn assemble_impl(&self, test: &FeSpace, trial: &FeSpace, kernel: &LocalKernel<'_>, symmetric: bool) -> SparseMat {
        let nr = test.kind.local_len();
        let nc = trial.kind.local_len();
        let locals: Vec<Vec<f64>> = (0..self.mesh.num_tets())
            .into_par_iter()
            .map(|k| {
                let mut local = vec![0.0; nr * nc];
                kernel(k, &self.geoms[k], &mut local);
                if symmetric {
                    for i in 0..nr {
                        for j in 0..i {
                            let v = 0.5 * (local[i * nc + j] + local[j * nc + i]);
                            local[i * nc + j] = v;
                            local[j * nc + i] = v;
                        }
                    }
                }
                local
            })
            .collect();
        let mut trip = Vec::with_capacity(locals.len() * nr * nc);
        for (k, local) in locals.iter().enumerate() {
            let rows = test.local_dofs(k);
            let cols = trial.local_dofs(k);
            for (i, &r) in rows.iter().enumerate() {
                for (j, &c) in cols.iter().enumerate() {
                    trip.push((r, c, local[i * nc + j]));
                }
            }
        }
        SparseMat::from_triplets(test.dof_count, trial.dof_count, &trip)
    }

    /// Gram matrix `∫ φ_j · φ_i`.
    pub fn assemble_mass(&self, space: &FeSpace) -> SparseMat {
        let rule = &self.bilinear_rule;
        let bub = space.kind.has_bubble();
        let ncomp = space.components();
        self.assemble_symmetric(space, &|_, g, local| {
            let n = space.kind.local_len();
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let sv = ShapeValues::eval(g, p, bub);
                let wq = w * g.volume;
                for a in 0..sv.len {
                    for b in 0..sv.len {
                        let v = wq * sv.values[a] * sv.values[b];
                        for c in 0..ncomp {
                            local[(ncomp * a + c) * n + ncomp * b + c] += v;
                        }
                    }
                }
            }
        })
    }

    fn vector_laplacian(&self, space: &FeSpace, coef: f64, grad_div: f64) -> SparseMat {
        let rule = &self.bilinear_rule;
        let bub = space.kind.has_bubble();
        let ncomp = space.components();
        self.assemble_symmetric(space, &|_, g, local| {
            let n = space.kind.local_len();
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let sv = ShapeValues::eval(g, p, bub);
                let wq = w * g.volume;
                for a in 0..sv.len {
                    for b in 0..sv.len {
                        let gg = coef * wq * dot(sv.grads[a], sv.grads[b]);
                        for c in 0..ncomp {
                            local[(ncomp * a + c) * n + ncomp * b + c] += gg;
                            if grad_div != 0.0 {
                                for d in 0..ncomp {
                                    local[(ncomp * a + c) * n + ncomp * b + d] +=
                                        grad_div * wq * sv.grads[a][c] * sv.grads[b][d];
                                }
                            }
                        }
                    }
                }
            }
        })
    }

    /// `a_f(u, v) = (ν + ν_r) ∫ ∇u : ∇v`.
    pub fn assemble_af(&self, space: &FeSpace, params: &ModelParams) -> SparseMat {
        self.vector_laplacian(space, params.momentum_viscosity(), 0.0)
    }

    /// `a_w(w, φ) = (c_a + c_d) ∫ ∇w : ∇φ + (c_0 + c_d − c_a) ∫ div w div φ`.
    pub fn assemble_aw(&self, space: &FeSpace, params: &ModelParams) -> SparseMat {
        self.vector_laplacian(space, params.angular_viscosity(), params.grad_div_coefficient())
    }

    /// `a_B(B, H) = μ ∫ curl B · curl H + μ ∫ div B div H`.
    pub fn assemble_ab(&self, space: &FeSpace, params: &ModelParams) -> SparseMat {
        let rule = &self.bilinear_rule;
        let bub = space.kind.has_bubble();
        let mu = params.mu;
        self.assemble_symmetric(space, &|_, g, local| {
            let n = space.kind.local_len();
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let sv = ShapeValues::eval(g, p, bub);
                let wq = mu * w * g.volume;
                for a in 0..sv.len {
                    for c in 0..3 {
                        let curl_test = cross(sv.grads[a], unit(c));
                        let div_test = sv.grads[a][c];
                        for b in 0..sv.len {
                            for d in 0..3 {
                                let curl_trial = cross(sv.grads[b], unit(d));
                                let div_trial = sv.grads[b][d];
                                local[(3 * a + c) * n + 3 * b + d] +=
                                    wq * (dot(curl_trial, curl_test) + div_trial * div_test);
                            }
                        }
                    }
                }
            }
        })
    }

    /// `d(v, q) = ∫ q div v`; rows are pressure tests, columns velocity DOFs.
    pub fn assemble_d(&self, space_u: &FeSpace, space_p: &FeSpace) -> SparseMat {
        let rule = &self.bilinear_rule;
        let bub = space_u.kind.has_bubble();
        self.assemble(space_p, space_u, &|_, g, local| {
            let n = space_u.kind.local_len();
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let sv = ShapeValues::eval(g, p, bub);
                let wq = w * g.volume;
                for i in 0..4 {
                    for b in 0..sv.len {
                        for d in 0..3 {
                            local[i * n + 3 * b + d] += wq * p[i] * sv.grads[b][d];
                        }
                    }
                }
            }
        })
    }

    /// `e(u, v) = ν_r ∫ curl u · v` with `u` from `space_from` (columns) and
    /// `v` from `space_to` (rows).
    pub fn assemble_e(&self, space_from: &FeSpace, space_to: &FeSpace, params: &ModelParams) -> SparseMat {
        let rule = &self.bilinear_rule;
        let nu_r = params.nu_r;
        let (bub_from, bub_to) = (space_from.kind.has_bubble(), space_to.kind.has_bubble());
        self.assemble(space_to, space_from, &|_, g, local| {
            let n = space_from.kind.local_len();
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let trial = ShapeValues::eval(g, p, bub_from);
                let test = ShapeValues::eval(g, p, bub_to);
                let wq = nu_r * w * g.volume;
                for a in 0..test.len {
                    for b in 0..trial.len {
                        for d in 0..3 {
                            let curl = cross(trial.grads[b], unit(d));
                            for c in 0..3 {
                                local[(3 * a + c) * n + 3 * b + d] += wq * test.values[a] * curl[c];
                            }
                        }
                    }
                }
            }
        })
    }

    /// Local projection stabilization `G(p, q) = ((I − Π)p, (I − Π)q)`, with Π
    /// the elementwise L² projection onto constants.
    pub fn assemble_g(&self, space_p: &FeSpace) -> SparseMat {
        let rule = &self.bilinear_rule;
        self.assemble_symmetric(space_p, &|_, g, local| {
            let mut means = [0.0; 4];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                for i in 0..4 {
                    means[i] += w * p[i];
                }
            }
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let wq = w * g.volume;
                for i in 0..4 {
                    for j in 0..4 {
                        local[i * 4 + j] += wq * (p[i] - means[i]) * (p[j] - means[j]);
                    }
                }
            }
        })
    }

    /// Skew-symmetrized convection `N(w)_{ij} = ½∫(w·∇φ_j)φ_i − (w·∇φ_i)φ_j`
    /// acting componentwise on `space`; `advecting` lives in `adv_space`.
    pub fn assemble_convection(&self, space: &FeSpace, adv_space: &FeSpace, advecting: &[f64]) -> SparseMat {
        assert_eq!(advecting.len(), adv_space.dof_count);
        let rule = &self.trilinear_rule;
        let bub = space.kind.has_bubble();
        let ncomp = space.components();
        self.assemble(space, space, &|k, g, local| {
            let n = space.kind.local_len();
            let adv = local_coeffs(adv_space, advecting, k);
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let sv = ShapeValues::eval(g, p, bub);
                let wvec = eval_local(adv_space, &adv, g, p);
                let wq = 0.5 * w * g.volume;
                let mut adv_grad = [0.0; 5];
                for a in 0..sv.len {
                    adv_grad[a] = dot(wvec, sv.grads[a]);
                }
                for a in 0..sv.len {
                    for b in 0..sv.len {
                        let v = wq * (adv_grad[b] * sv.values[a] - adv_grad[a] * sv.values[b]);
                        for c in 0..ncomp {
                            local[(ncomp * a + c) * n + ncomp * b + c] += v;
                        }
                    }
                }
            }
        })
    }

    /// Lorentz coupling `S ∫ (B_prev × curl B) · v`: rows velocity tests,
    /// columns magnetic DOFs.
    pub fn assemble_lorentz(
        &self,
        space_b: &FeSpace,
        space_u: &FeSpace,
        b_prev: &[f64],
        params: &ModelParams,
    ) -> SparseMat {
        assert_eq!(b_prev.len(), space_b.dof_count);
        let rule = &self.trilinear_rule;
        let (bub_b, bub_u) = (space_b.kind.has_bubble(), space_u.kind.has_bubble());
        let s = params.s;
        self.assemble(space_u, space_b, &|k, g, local| {
            let n = space_b.kind.local_len();
            let bl = local_coeffs(space_b, b_prev, k);
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let trial = ShapeValues::eval(g, p, bub_b);
                let test = ShapeValues::eval(g, p, bub_u);
                let bq = eval_local(space_b, &bl, g, p);
                let wq = s * w * g.volume;
                for b in 0..trial.len {
                    for d in 0..3 {
                        let f = cross(bq, cross(trial.grads[b], unit(d)));
                        for a in 0..test.len {
                            for c in 0..3 {
                                local[(3 * a + c) * n + 3 * b + d] += wq * test.values[a] * f[c];
                            }
                        }
                    }
                }
            }
        })
    }

    /// Induction coupling `∫ (u × B_prev) · curl H`: rows magnetic tests,
    /// columns velocity DOFs.
    pub fn assemble_induction_coupling(&self, space_u: &FeSpace, space_b: &FeSpace, b_prev: &[f64]) -> SparseMat {
        assert_eq!(b_prev.len(), space_b.dof_count);
        let rule = &self.trilinear_rule;
        let (bub_b, bub_u) = (space_b.kind.has_bubble(), space_u.kind.has_bubble());
        self.assemble(space_b, space_u, &|k, g, local| {
            let n = space_u.kind.local_len();
            let bl = local_coeffs(space_b, b_prev, k);
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let trial = ShapeValues::eval(g, p, bub_u);
                let test = ShapeValues::eval(g, p, bub_b);
                let bq = eval_local(space_b, &bl, g, p);
                let wq = w * g.volume;
                for b in 0..trial.len {
                    for d in 0..3 {
                        let ub = cross(scale(unit(d), trial.values[b]), bq);
                        for a in 0..test.len {
                            for c in 0..3 {
                                let curl_test = cross(test.grads[a], unit(c));
                                local[(3 * a + c) * n + 3 * b + d] += wq * dot(ub, curl_test);
                            }
                        }
                    }
                }
            }
        })
    }

    /// Induction coupling with lagged velocity, `∫ (u_prev × B) · curl H`:
    /// rows and columns both magnetic.
    pub fn assemble_induction_lagged_velocity(&self, space_b: &FeSpace, space_u: &FeSpace, u_prev: &[f64]) -> SparseMat {
        assert_eq!(u_prev.len(), space_u.dof_count);
        let rule = &self.trilinear_rule;
        let bub_b = space_b.kind.has_bubble();
        self.assemble(space_b, space_b, &|k, g, local| {
            let n = space_b.kind.local_len();
            let ul = local_coeffs(space_u, u_prev, k);
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let sv = ShapeValues::eval(g, p, bub_b);
                let uq = eval_local(space_u, &ul, g, p);
                let wq = w * g.volume;
                for b in 0..sv.len {
                    for d in 0..3 {
                        let ub = cross(uq, scale(unit(d), sv.values[b]));
                        for a in 0..sv.len {
                            for c in 0..3 {
                                let curl_test = cross(sv.grads[a], unit(c));
                                local[(3 * a + c) * n + 3 * b + d] += wq * dot(ub, curl_test);
                            }
                        }
                    }
                }
            }
        })
    }

    /// Load vector `∫ f · φ_i` for a vector space (scalar spaces use `f[0]`).
    pub fn assemble_load<F: Fn(&Point) -> [f64; 3] + Sync>(&self, space: &FeSpace, f: F) -> Vec<f64> {
        let rule = &self.load_rule;
        let bub = space.kind.has_bubble();
        let ncomp = space.components();
        let locals: Vec<Vec<f64>> = (0..self.mesh.num_tets())
            .into_par_iter()
            .map(|k| {
                let g = &self.geoms[k];
                let mut local = vec![0.0; space.kind.local_len()];
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let sv = ShapeValues::eval(g, p, bub);
                    let fx = f(&g.point(p));
                    let wq = w * g.volume;
                    for a in 0..sv.len {
                        for c in 0..ncomp {
                            local[ncomp * a + c] += wq * fx[c] * sv.values[a];
                        }
                    }
                }
                local
            })
            .collect();
        let mut out = vec![0.0; space.dof_count];
        for (k, local) in locals.iter().enumerate() {
            for (&dof, v) in space.local_dofs(k).iter().zip(local) {
                out[dof] += v;
            }
        }
        out
    }

    /// `∫ φ_i` for every scalar basis function (mean-value constraint row).
    pub fn assemble_mean_row(&self, space_p: &FeSpace) -> Vec<f64> {
        assert_eq!(space_p.kind, SpaceKind::ScalarP1);
        self.assemble_load(space_p, |_| [1.0, 0.0, 0.0])
    }
}

fn unit(c: usize) -> [f64; 3] {
    let mut e = [0.0; 3];
    e[c] = 1.0;
    e
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn local_coeffs(space: &FeSpace, coeffs: &[f64], k: usize) -> Vec<f64> {
    space.local_dofs(k).iter().map(|&d| coeffs[d]).collect()
}

fn eval_local(space: &FeSpace, local: &[f64], g: &TetGeometry, bary: &[f64; 4]) -> [f64; 3] {
    let sv = ShapeValues::eval(g, bary, space.kind.has_bubble());
    let nc = space.components();
    let mut out = [0.0; 3];
    for a in 0..sv.len {
        for c in 0..nc {
            out[c] += local[nc * a + c] * sv.values[a];
        }
    }
    out
}
