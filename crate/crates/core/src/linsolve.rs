//! Linear solvers for the per-step block systems.
//!
//! Dirichlet data is eliminated symmetrically. Element-interior (bubble) DOFs
//! can be condensed out before the global solve; the reduced system goes to a
//! sparse LU (faer) below a size threshold and to restarted GMRES with ILU(0)
//! above it. Every solve checks `‖b − Ax‖ ≤ tol·‖b‖` on the full system.

use std::str::FromStr;

use faer::linalg::solvers::{PartialPivLu, Solve, SolveCore};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Mat, MatMut};
use rayon::prelude::*;

use crate::fespace::ConstraintSet;
use crate::sparse::{norm2, SparseMat};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: SparseMat,
    pub rhs: Vec<f64>,
    pub constrained: bool,
}

impl LinearSystem {
    pub fn new(matrix: SparseMat, rhs: Vec<f64>) -> Result<Self> {
        if matrix.nrows != matrix.ncols || rhs.len() != matrix.nrows {
            return Err(Error::InvalidArgument(format!(
                "system is {}x{} with rhs of length {}",
                matrix.nrows,
                matrix.ncols,
                rhs.len()
            )));
        }
        Ok(LinearSystem {
            matrix,
            rhs,
            constrained: false,
        })
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.matrix.mul_vec(x);
        for (ri, bi) in r.iter_mut().zip(&self.rhs) {
            *ri = bi - *ri;
        }
        r
    }

    /// `‖b − Ax‖ / ‖b‖` (absolute when `b = 0`).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let bn = norm2(&self.rhs);
        let rn = norm2(&self.residual(x));
        if bn > 0.0 {
            rn / bn
        } else {
            rn
        }
    }
}

/// Symmetric elimination: constrained rows and columns are zeroed, the
/// diagonal set to one and known values moved to the right-hand side. The
/// sparsity pattern is kept (explicit zeros), so repeated systems share it.
pub fn apply_constraints(mut sys: LinearSystem, cs: &ConstraintSet) -> Result<LinearSystem> {
    let n = sys.len();
    if let Some((dof, _)) = cs.iter().find(|&(d, _)| d >= n) {
        return Err(Error::InvalidArgument(format!(
            "constraint on dof {dof} outside system of size {n}"
        )));
    }
    if cs.is_empty() {
        sys.constrained = true;
        return Ok(sys);
    }
    let mut value = vec![None; n];
    for (d, v) in cs.iter() {
        value[d] = Some(v);
    }
    let mut missing_diag = Vec::new();
    let a = &mut sys.matrix;
    for i in 0..n {
        let (start, end) = (a.row_ptr[i], a.row_ptr[i + 1]);
        if let Some(vi) = value[i] {
            let mut has_diag = false;
            for p in start..end {
                if a.col_idx[p] == i {
                    a.values[p] = 1.0;
                    has_diag = true;
                } else {
                    a.values[p] = 0.0;
                }
            }
            if !has_diag {
                missing_diag.push(i);
            }
            sys.rhs[i] = vi;
        } else {
            for p in start..end {
                if let Some(vj) = value[a.col_idx[p]] {
                    sys.rhs[i] -= a.values[p] * vj;
                    a.values[p] = 0.0;
                }
            }
        }
    }
    if !missing_diag.is_empty() {
        let eye: Vec<_> = missing_diag.iter().map(|&i| (i, i, 1.0)).collect();
        let extra = SparseMat::from_triplets(n, n, &eye);
        sys.matrix = SparseMat::linear_combination(&[(1.0, &sys.matrix), (1.0, &extra)]);
    }
    sys.constrained = true;
    Ok(sys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Direct below `direct_max_dofs`, iterative above.
    Auto,
    Direct,
    Iterative,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Backend::Auto),
            "direct" | "lu" => Ok(Backend::Direct),
            "iterative" | "gmres" => Ok(Backend::Iterative),
            other => Err(Error::InvalidArgument(format!(
                "unknown solver backend '{other}' (auto|direct|iterative)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub backend: Backend,
    pub direct_max_dofs: usize,
    /// Overrides the backend default (1e-10 direct, 1e-8 iterative).
    pub rel_tol: Option<f64>,
    pub max_iter: usize,
    pub restart: usize,
    pub refinement_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            backend: Backend::Auto,
            direct_max_dofs: 400_000,
            rel_tol: None,
            max_iter: 5000,
            restart: 100,
            refinement_steps: 3,
        }
    }
}

impl SolverConfig {
    pub const DIRECT_TOL: f64 = 1e-10;
    pub const ITERATIVE_TOL: f64 = 1e-8;

    /// Defaults overridden by `MMFEM_SOLVER`, `MMFEM_TOL`, `MMFEM_MAX_ITER`
    /// and `MMFEM_DIRECT_MAX_DOFS`.
    pub fn from_env() -> Result<Self> {
        let mut cfg = SolverConfig::default();
        if let Ok(v) = std::env::var("MMFEM_SOLVER") {
            cfg.backend = v.parse()?;
        }
        if let Ok(v) = std::env::var("MMFEM_TOL") {
            cfg.rel_tol = Some(parse_env("MMFEM_TOL", &v)?);
        }
        if let Ok(v) = std::env::var("MMFEM_MAX_ITER") {
            cfg.max_iter = parse_env("MMFEM_MAX_ITER", &v)?;
        }
        if let Ok(v) = std::env::var("MMFEM_DIRECT_MAX_DOFS") {
            cfg.direct_max_dofs = parse_env("MMFEM_DIRECT_MAX_DOFS", &v)?;
        }
        Ok(cfg)
    }

    fn use_direct(&self, n: usize) -> bool {
        match self.backend {
            Backend::Direct => true,
            Backend::Iterative => false,
            Backend::Auto => n <= self.direct_max_dofs,
        }
    }

    fn tolerance(&self, direct: bool) -> f64 {
        self.rel_tol.unwrap_or(if direct {
            Self::DIRECT_TOL
        } else {
            Self::ITERATIVE_TOL
        })
    }
}

fn parse_env<T: FromStr>(name: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("cannot parse {name}={v}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub direct: bool,
    /// Krylov iterations (direct solves count refinement passes).
    pub iterations: usize,
    /// Achieved `‖b − Ax‖/‖b‖` on the full system.
    pub residual: f64,
    pub unknowns: usize,
    pub reduced_unknowns: usize,
}

/// Solve with environment defaults, tolerance and iteration cap overridden.
pub fn solve(sys: &LinearSystem, rel_tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    let mut cfg = SolverConfig::from_env()?;
    cfg.rel_tol = Some(rel_tol);
    cfg.max_iter = max_iter;
    Solver::new(cfg).solve(sys)
}

/// Static condensation of element-interior DOF groups.
///
/// Each group may couple only to itself and to exterior DOFs. The reduced
/// pattern is built once from a structural sample and reused for every matrix
/// with that pattern.
#[derive(Debug, Clone)]
pub struct Condenser {
    n: usize,
    groups: Vec<Vec<usize>>,
    /// Global index of each reduced unknown.
    exterior: Vec<usize>,
    to_reduced: Vec<usize>,
    group_rows: Vec<Vec<usize>>,
    group_cols: Vec<Vec<usize>>,
    pattern: SparseMat,
}

const INTERIOR: usize = usize::MAX;

/// Per-group dense data of one condensation.
struct GroupFactor {
    lu: PartialPivLu<f64>,
    /// interior rows by reduced columns `group_cols`
    a_ie: Mat<f64>,
    /// reduced rows `group_rows` by interior columns
    a_ei: Mat<f64>,
}

pub struct Condensed {
    pub reduced: SparseMat,
    factors: Vec<GroupFactor>,
}

impl Condenser {
    pub fn new(sample: &SparseMat, groups: Vec<Vec<usize>>) -> Result<Self> {
        let n = sample.nrows;
        let mut to_reduced = vec![0usize; n];
        let mut owner = vec![INTERIOR; n];
        for (g, dofs) in groups.iter().enumerate() {
            for &d in dofs {
                if d >= n || owner[d] != INTERIOR {
                    return Err(Error::InvalidArgument(format!("bad interior dof {d}")));
                }
                owner[d] = g;
                to_reduced[d] = INTERIOR;
            }
        }
        let mut exterior = Vec::with_capacity(n);
        for i in 0..n {
            if owner[i] == INTERIOR {
                to_reduced[i] = exterior.len();
                exterior.push(i);
            }
        }
        let at = sample.transpose();
        let mut group_rows = Vec::with_capacity(groups.len());
        let mut group_cols = Vec::with_capacity(groups.len());
        let mut row_groups: Vec<Vec<usize>> = vec![Vec::new(); exterior.len()];
        for (g, dofs) in groups.iter().enumerate() {
            let mut cols = Vec::new();
            let mut rows = Vec::new();
            for &d in dofs {
                for (mat, out) in [(sample, &mut cols), (&at, &mut rows)] {
                    for &c in mat.row(d).0 {
                        if owner[c] == INTERIOR {
                            out.push(to_reduced[c]);
                        } else if owner[c] != g {
                            return Err(Error::InvalidArgument(format!(
                                "interior groups {g} and {} are coupled",
                                owner[c]
                            )));
                        }
                    }
                }
            }
            cols.sort_unstable();
            cols.dedup();
            rows.sort_unstable();
            rows.dedup();
            for &r in &rows {
                row_groups[r].push(g);
            }
            group_rows.push(rows);
            group_cols.push(cols);
        }
        let ne = exterior.len();
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        let mut scratch = Vec::new();
        for r in 0..ne {
            scratch.clear();
            scratch.extend(
                sample
                    .row(exterior[r])
                    .0
                    .iter()
                    .filter(|&&c| owner[c] == INTERIOR)
                    .map(|&c| to_reduced[c]),
            );
            for &g in &row_groups[r] {
                scratch.extend_from_slice(&group_cols[g]);
            }
            scratch.sort_unstable();
            scratch.dedup();
            col_idx.extend_from_slice(&scratch);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Ok(Condenser {
            n,
            groups,
            exterior,
            to_reduced,
            group_rows,
            group_cols,
            pattern: SparseMat {
                nrows: ne,
                ncols: ne,
                row_ptr,
                col_idx,
                values,
            },
        })
    }

    pub fn full_len(&self) -> usize {
        self.n
    }

    pub fn reduced_len(&self) -> usize {
        self.exterior.len()
    }

    /// Schur complement onto the exterior DOFs.
    pub fn condense(&self, a: &SparseMat) -> Result<Condensed> {
        assert_eq!(a.nrows, self.n);
        let mut reduced = self.pattern.clone();
        for (r, &e) in self.exterior.iter().enumerate() {
            let (cols, vals) = a.row(e);
            for (&c, &v) in cols.iter().zip(vals) {
                let rc = self.to_reduced[c];
                if rc != INTERIOR {
                    add_at(&mut reduced, r, rc, v);
                }
            }
        }
        let at = a.transpose();
        let ng = self.groups.len();
        let mut factors = Vec::with_capacity(ng);
        const CHUNK: usize = 2048;
        for start in (0..ng).step_by(CHUNK) {
            let end = (start + CHUNK).min(ng);
            let chunk: Vec<(GroupFactor, Mat<f64>)> = (start..end)
                .into_par_iter()
                .map(|g| self.factor_group(g, a, &at))
                .collect::<Result<_>>()?;
            for (g, (f, schur)) in (start..end).zip(chunk) {
                for (i, &r) in self.group_rows[g].iter().enumerate() {
                    for (j, &c) in self.group_cols[g].iter().enumerate() {
                        add_at(&mut reduced, r, c, -schur[(i, j)]);
                    }
                }
                factors.push(f);
            }
        }
        Ok(Condensed { reduced, factors })
    }

    fn factor_group(&self, g: usize, a: &SparseMat, at: &SparseMat) -> Result<(GroupFactor, Mat<f64>)> {
        let dofs = &self.groups[g];
        let m = dofs.len();
        let local = |d: usize| dofs.iter().position(|&x| x == d);
        let rows = &self.group_rows[g];
        let cols = &self.group_cols[g];
        let mut a_ii = Mat::<f64>::zeros(m, m);
        let mut a_ie = Mat::<f64>::zeros(m, cols.len());
        let mut a_ei = Mat::<f64>::zeros(rows.len(), m);
        for (i, &d) in dofs.iter().enumerate() {
            let (cs, vs) = a.row(d);
            for (&c, &v) in cs.iter().zip(vs) {
                let rc = self.to_reduced[c];
                if rc == INTERIOR {
                    a_ii[(i, local(c).expect("coupling checked at construction"))] = v;
                } else {
                    a_ie[(i, cols.binary_search(&rc).unwrap())] = v;
                }
            }
            let (rs, vs) = at.row(d);
            for (&r, &v) in rs.iter().zip(vs) {
                let rr = self.to_reduced[r];
                if rr != INTERIOR {
                    a_ei[(rows.binary_search(&rr).unwrap(), i)] = v;
                }
            }
        }
        let lu = a_ii.partial_piv_lu();
        let z = lu.solve(&a_ie);
        let schur = &a_ei * &z;
        let singular = (0..m).any(|i| {
            let mut e = Mat::<f64>::zeros(m, 1);
            e[(i, 0)] = 1.0;
            let col = lu.solve(&e);
            (0..m).any(|k| !col[(k, 0)].is_finite())
        });
        if singular || (0..schur.nrows()).any(|i| (0..schur.ncols()).any(|j| !schur[(i, j)].is_finite())) {
            return Err(Error::Singular(format!("interior block of group {g}")));
        }
        Ok((GroupFactor { lu, a_ie, a_ei }, schur))
    }

    /// `b_e − A_ei A_ii⁻¹ b_i`.
    pub fn reduce_rhs(&self, c: &Condensed, b: &[f64]) -> Vec<f64> {
        let mut be: Vec<f64> = self.exterior.iter().map(|&e| b[e]).collect();
        let corr: Vec<Mat<f64>> = self
            .groups
            .par_iter()
            .zip(&c.factors)
            .map(|(dofs, f)| {
                let bi = Mat::from_fn(dofs.len(), 1, |i, _| b[dofs[i]]);
                &f.a_ei * f.lu.solve(&bi)
            })
            .collect();
        for (g, v) in corr.iter().enumerate() {
            for (i, &r) in self.group_rows[g].iter().enumerate() {
                be[r] -= v[(i, 0)];
            }
        }
        be
    }

    /// Full solution from the exterior part: `x_i = A_ii⁻¹ (b_i − A_ie x_e)`.
    pub fn expand(&self, c: &Condensed, b: &[f64], xe: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (r, &e) in self.exterior.iter().enumerate() {
            x[e] = xe[r];
        }
        let interior: Vec<Mat<f64>> = self
            .groups
            .par_iter()
            .enumerate()
            .map(|(g, dofs)| {
                let f = &c.factors[g];
                let xc = Mat::from_fn(self.group_cols[g].len(), 1, |j, _| xe[self.group_cols[g][j]]);
                let rhs = Mat::from_fn(dofs.len(), 1, |i, _| b[dofs[i]]) - &f.a_ie * &xc;
                f.lu.solve(&rhs)
            })
            .collect();
        for (dofs, v) in self.groups.iter().zip(&interior) {
            for (i, &d) in dofs.iter().enumerate() {
                x[d] = v[(i, 0)];
            }
        }
        x
    }
}

fn add_at(m: &mut SparseMat, r: usize, c: usize, v: f64) {
    let p = m.position(r, c).expect("entry in precomputed pattern");
    m.values[p] += v;
}

/// Either an LU of the matrix or an ILU(0)-preconditioned GMRES on it.
enum Prepared {
    Direct(Lu<usize, f64>),
    Iterative(Ilu0, SparseMat),
}

/// Stateful solver that caches the symbolic LU across calls with the same
/// sparsity pattern.
pub struct Solver {
    pub config: SolverConfig,
    symbolic: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Self {
        Solver {
            config,
            symbolic: None,
        }
    }

    pub fn solve(&mut self, sys: &LinearSystem) -> Result<(Vec<f64>, SolveStats)> {
        self.solve_impl(sys, None)
    }

    pub fn solve_condensed(&mut self, sys: &LinearSystem, condenser: &Condenser) -> Result<(Vec<f64>, SolveStats)> {
        self.solve_impl(sys, Some(condenser))
    }

    fn solve_impl(&mut self, sys: &LinearSystem, condenser: Option<&Condenser>) -> Result<(Vec<f64>, SolveStats)> {
        let n = sys.len();
        let reduced_n = condenser.map_or(n, |c| c.reduced_len());
        let direct = self.config.use_direct(reduced_n);
        let tol = self.config.tolerance(direct);
        let mut stats = SolveStats {
            direct,
            unknowns: n,
            reduced_unknowns: reduced_n,
            ..Default::default()
        };
        let bnorm = norm2(&sys.rhs);
        if bnorm == 0.0 {
            return Ok((vec![0.0; n], stats));
        }
        let condensed = match condenser {
            Some(c) => {
                if c.full_len() != n {
                    return Err(Error::InvalidArgument("condenser does not match system".into()));
                }
                Some(c.condense(&sys.matrix)?)
            }
            None => None,
        };
        let inner = condensed.as_ref().map_or(&sys.matrix, |c| &c.reduced);
        let prepared = if direct {
            Prepared::Direct(self.factor(inner)?)
        } else {
            Prepared::Iterative(Ilu0::new(inner), inner.clone())
        };
        // inner tolerance is tightened a little so the outer check passes
        let apply = |b: &[f64], stats: &mut SolveStats| -> Result<Vec<f64>> {
            let be = match (condenser, &condensed) {
                (Some(c), Some(cd)) => c.reduce_rhs(cd, b),
                _ => b.to_vec(),
            };
            let xe = match &prepared {
                Prepared::Direct(lu) => {
                    let mut rhs = Mat::from_fn(be.len(), 1, |i, _| be[i]);
                    lu.solve_transpose_in_place_with_conj(Conj::No, rhs.as_mut());
                    col_to_vec(rhs.as_mut())
                }
                Prepared::Iterative(ilu, a) => {
                    let (x, it) = gmres(a, ilu, &be, 0.1 * tol, self.config.max_iter, self.config.restart)?;
                    stats.iterations += it;
                    x
                }
            };
            Ok(match (condenser, &condensed) {
                (Some(c), Some(cd)) => c.expand(cd, b, &xe),
                _ => xe,
            })
        };
        let mut x = apply(&sys.rhs, &mut stats)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("non-finite solution".into()));
        }
        let mut r = sys.residual(&x);
        let mut res = norm2(&r) / bnorm;
        let mut passes = 0;
        while res > tol && passes < self.config.refinement_steps {
            let dx = apply(&r, &mut stats)?;
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            r = sys.residual(&x);
            res = norm2(&r) / bnorm;
            passes += 1;
        }
        if direct {
            stats.iterations = passes;
        }
        stats.residual = res;
        if !res.is_finite() {
            return Err(Error::Singular("non-finite residual".into()));
        }
        if res > tol {
            return Err(Error::NotConverged {
                iterations: stats.iterations,
                residual: res,
            });
        }
        Ok((x, stats))
    }

    /// LU of `Aᵀ`: the CSR arrays of `A` read as CSC describe `Aᵀ`; solves
    /// then use the transposed factorization.
    fn factor(&mut self, a: &SparseMat) -> Result<Lu<usize, f64>> {
        let n = a.nrows;
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &a.row_ptr, None, &a.col_idx);
        let reuse = matches!(&self.symbolic, Some((rp, ci, _)) if *rp == a.row_ptr && *ci == a.col_idx);
        if !reuse {
            let s = SymbolicLu::try_new(sym).map_err(|e| Error::Singular(format!("symbolic LU: {e:?}")))?;
            self.symbolic = Some((a.row_ptr.clone(), a.col_idx.clone(), s));
        }
        let symbolic = self.symbolic.as_ref().unwrap().2.clone();
        let mat = SparseColMatRef::new(sym, &a.values);
        Lu::try_new_with_symbolic(symbolic, mat).map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::Singular(format!("zero pivot at step {index}")),
            LuError::Generic(g) => Error::Singular(format!("LU failed: {g:?}")),
        })
    }
}

fn col_to_vec(m: MatMut<'_, f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

/// Incomplete LU with zero fill on the matrix pattern. Tiny pivots (e.g. the
/// zero pressure block of a saddle point matrix) are replaced by a small
/// multiple of the row norm.
pub struct Ilu0 {
    lu: SparseMat,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &SparseMat) -> Self {
        let n = a.nrows;
        let mut lu = a.clone();
        let row_norms: Vec<f64> = (0..n).map(|i| norm2(lu.row(i).1)).collect();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            if let Some(p) = lu.position(i, i) {
                diag[i] = p;
            }
        }
        let mut pos_in_row = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in start..end {
                pos_in_row[lu.col_idx[p]] = p;
            }
            for p in start..end {
                let k = lu.col_idx[p];
                if k >= i {
                    break;
                }
                let pivot = lu.values[diag[k]];
                let lik = lu.values[p] / pivot;
                lu.values[p] = lik;
                for q in diag[k] + 1..lu.row_ptr[k + 1] {
                    let j = lu.col_idx[q];
                    let t = pos_in_row[j];
                    if t != usize::MAX {
                        lu.values[t] -= lik * lu.values[q];
                    }
                }
            }
            for p in start..end {
                pos_in_row[lu.col_idx[p]] = usize::MAX;
            }
            let floor = 1e-10 * row_norms[i].max(f64::MIN_POSITIVE);
            if diag[i] == usize::MAX {
                // structurally missing diagonal: the factor keeps a unit pivot
                continue;
            }
            let d = &mut lu.values[diag[i]];
            if d.abs() < floor {
                *d = if *d < 0.0 { -floor } else { floor };
            }
        }
        Ilu0 { lu, diag }
    }

    /// `x = (LU)⁻¹ b`.
    pub fn apply(&self, b: &[f64], x: &mut [f64]) {
        let n = b.len();
        let lu = &self.lu;
        for i in 0..n {
            let mut s = b[i];
            for p in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                let j = lu.col_idx[p];
                if j >= i {
                    break;
                }
                s -= lu.values[p] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            let start = if self.diag[i] == usize::MAX {
                lu.row_ptr[i]
            } else {
                self.diag[i] + 1
            };
            for p in start..lu.row_ptr[i + 1] {
                let j = lu.col_idx[p];
                if j > i {
                    s -= lu.values[p] * x[j];
                }
            }
            x[i] = if self.diag[i] == usize::MAX {
                s
            } else {
                s / lu.values[self.diag[i]]
            };
        }
    }
}

/// Right-preconditioned restarted GMRES; returns the iterate and iteration count.
pub fn gmres(
    a: &SparseMat,
    pre: &Ilu0,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let m = restart.max(1);
    let mut total = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut res = 1.0;
    while total < max_iter {
        let mut r = a.mul_vec(&x);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm2(&r);
        res = beta / bnorm;
        if res <= rel_tol {
            return Ok((x, total));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < max_iter {
            pre.apply(&v[k], &mut z);
            a.mul_vec_into(&z, &mut w);
            for j in 0..=k {
                let hjk: f64 = w.iter().zip(&v[j]).map(|(a, b)| a * b).sum();
                h[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(&v[j]) {
                    *wi -= hjk * vi;
                }
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                return Err(Error::NotConverged {
                    iterations: total,
                    residual: res,
                });
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            res = g[k].abs() / bnorm;
            if res <= rel_tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (ui, vi) in update.iter_mut().zip(&v[j]) {
                *ui += yj * vi;
            }
        }
        pre.apply(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
    }
    let r = a.mul_vec(&x);
    let true_res = norm2(&r.iter().zip(b).map(|(ri, bi)| bi - ri).collect::<Vec<_>>()) / bnorm;
    if true_res <= rel_tol {
        return Ok((x, total));
    }
    Err(Error::NotConverged {
        iterations: total,
        residual: true_res.min(res.max(true_res)),
    })
}
