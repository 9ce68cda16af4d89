//! Time stepping: coupled backward Euler, coupled Crank–Nicolson with
//! extrapolated nonlinear slots, and a decoupled first-order splitting, each
//! with the conforming (P1-bubble / P1) or the stabilized (P1 / P1) pair.
//!
//! Coupled systems are ordered `[u, B, w, p, λ]` where `λ` is the multiplier
//! of the zero-mean pressure condition.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::assembly::{Assembler, ModelParams, QuadratureDegrees};
use crate::fespace::{
    dirichlet_constraints, normal_trace_constraints, tangential_trace_constraints, ConstraintSet, FeSpace,
    FieldVec, SpaceKind,
};
use crate::linsolve::{apply_constraints, Condenser, LinearSystem, SolveStats, Solver, SolverConfig};
use crate::manufactured::ManufacturedSolution;
use crate::mesh::{FaceTag, Point, TetMesh};
use crate::sparse::{offsets, Block, SparseMat};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeDiscretization {
    EulerCoupled,
    CnCoupled,
    EulerDecoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementPair {
    /// P1-bubble fields with P1 pressure.
    Conforming,
    /// P1 fields and P1 pressure with local projection stabilization.
    Stabilized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SchemeId {
    pub time: TimeDiscretization,
    pub pair: ElementPair,
}

impl SchemeId {
    pub const ALL: [SchemeId; 6] = [
        SchemeId::new(TimeDiscretization::EulerCoupled, ElementPair::Conforming),
        SchemeId::new(TimeDiscretization::EulerCoupled, ElementPair::Stabilized),
        SchemeId::new(TimeDiscretization::CnCoupled, ElementPair::Conforming),
        SchemeId::new(TimeDiscretization::CnCoupled, ElementPair::Stabilized),
        SchemeId::new(TimeDiscretization::EulerDecoupled, ElementPair::Conforming),
        SchemeId::new(TimeDiscretization::EulerDecoupled, ElementPair::Stabilized),
    ];

    pub const fn new(time: TimeDiscretization, pair: ElementPair) -> Self {
        SchemeId { time, pair }
    }

    pub fn name(self) -> &'static str {
        use ElementPair::*;
        use TimeDiscretization::*;
        match (self.time, self.pair) {
            (EulerCoupled, Conforming) => "euler-conforming",
            (EulerCoupled, Stabilized) => "euler-stabilized",
            (CnCoupled, Conforming) => "cn-conforming",
            (CnCoupled, Stabilized) => "cn-stabilized",
            (EulerDecoupled, Conforming) => "decoupled-conforming",
            (EulerDecoupled, Stabilized) => "decoupled-stabilized",
        }
    }

    pub fn field_kind(self) -> SpaceKind {
        match self.pair {
            ElementPair::Conforming => SpaceKind::VectorP1Bubble,
            ElementPair::Stabilized => SpaceKind::VectorP1,
        }
    }

    pub fn is_crank_nicolson(self) -> bool {
        self.time == TimeDiscretization::CnCoupled
    }

    /// First step included in the error measures.
    pub fn first_error_step(self) -> usize {
        if self.is_crank_nicolson() {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SchemeId::ALL.iter().map(|i| i.name()).collect();
                Error::InvalidArgument(format!("unknown scheme '{s}' (one of {})", names.join(", ")))
            })
    }
}

/// Body forces of the three evolution equations.
pub trait Forcing: Send + Sync {
    fn momentum(&self, x: &Point, t: f64) -> [f64; 3];
    fn angular(&self, x: &Point, t: f64) -> [f64; 3];
    fn induction(&self, x: &Point, t: f64) -> [f64; 3];
}

/// Forcing that makes the trigonometric fields an exact solution.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedForcing {
    pub params: ModelParams,
}

impl Forcing for ManufacturedForcing {
    fn momentum(&self, x: &Point, t: f64) -> [f64; 3] {
        ManufacturedSolution.momentum_source(x, t, &self.params)
    }
    fn angular(&self, x: &Point, t: f64) -> [f64; 3] {
        ManufacturedSolution.angular_source(x, t, &self.params)
    }
    fn induction(&self, x: &Point, t: f64) -> [f64; 3] {
        ManufacturedSolution.induction_source(x, t, &self.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundarySetup {
    /// `u = w = 0` and `B·n = 0` on every face.
    NoSlip,
    /// Moving lid `u = (1,0,0)`, `w = (0,0,1)` on `z = 1`, zero elsewhere;
    /// `n × B = n × b_d` on every face.
    LidDrivenCavity { b_d: [f64; 3] },
}

fn on_lid(p: &Point) -> bool {
    FaceTag::Z1.contains(p, 1e-12)
}

#[derive(Debug, Clone)]
pub struct Spaces {
    pub velocity: FeSpace,
    pub pressure: FeSpace,
    pub magnetic: FeSpace,
    pub angular: FeSpace,
}

/// Time-independent data of one discretized problem.
pub struct Problem {
    pub scheme: SchemeId,
    pub params: ModelParams,
    pub spaces: Spaces,
    pub assembler: Assembler,
    /// Gram matrix of the (shared) vector space.
    pub mass: SparseMat,
    pub a_f: SparseMat,
    pub a_w: SparseMat,
    pub a_b: SparseMat,
    /// `d(v, q)`: pressure rows, velocity columns.
    pub div: SparseMat,
    pub div_t: SparseMat,
    /// `ν_r ∫ curl · ` between the vector spaces.
    pub curl: SparseMat,
    pub stab: Option<SparseMat>,
    pub mean: Vec<f64>,
    pub constraints_u: ConstraintSet,
    pub constraints_b: ConstraintSet,
    pub constraints_w: ConstraintSet,
    pub forcing: Option<Arc<dyn Forcing>>,
}

impl Problem {
    pub fn new(
        mesh: Arc<TetMesh>,
        scheme: SchemeId,
        params: ModelParams,
        boundary: BoundarySetup,
        forcing: Option<Arc<dyn Forcing>>,
    ) -> Result<Self> {
        Self::with_quadrature(mesh, scheme, params, boundary, forcing, QuadratureDegrees::default())
    }

    pub fn with_quadrature(
        mesh: Arc<TetMesh>,
        scheme: SchemeId,
        params: ModelParams,
        boundary: BoundarySetup,
        forcing: Option<Arc<dyn Forcing>>,
        degrees: QuadratureDegrees,
    ) -> Result<Self> {
        params.validate()?;
        let kind = scheme.field_kind();
        let spaces = Spaces {
            velocity: FeSpace::new(mesh.clone(), kind),
            pressure: FeSpace::new(mesh.clone(), SpaceKind::ScalarP1),
            magnetic: FeSpace::new(mesh.clone(), kind),
            angular: FeSpace::new(mesh.clone(), kind),
        };
        let asm = Assembler::with_degrees(mesh, degrees)?;
        let v = &spaces.velocity;
        let mass = asm.assemble_mass(v);
        let a_f = asm.assemble_af(v, &params);
        let a_w = asm.assemble_aw(&spaces.angular, &params);
        let a_b = asm.assemble_ab(&spaces.magnetic, &params);
        let div = asm.assemble_d(v, &spaces.pressure);
        let div_t = div.transpose();
        let curl = asm.assemble_e(v, v, &params);
        let stab = match scheme.pair {
            ElementPair::Stabilized => Some(asm.assemble_g(&spaces.pressure)),
            ElementPair::Conforming => None,
        };
        let mean = asm.assemble_mean_row(&spaces.pressure);
        let all = FaceTag::ALL;
        let (constraints_u, constraints_b, constraints_w) = match boundary {
            BoundarySetup::NoSlip => (
                dirichlet_constraints(v, &all, |_| [0.0; 3])?,
                normal_trace_constraints(&spaces.magnetic)?,
                dirichlet_constraints(&spaces.angular, &all, |_| [0.0; 3])?,
            ),
            BoundarySetup::LidDrivenCavity { b_d } => (
                dirichlet_constraints(v, &all, |p| if on_lid(p) { [1.0, 0.0, 0.0] } else { [0.0; 3] })?,
                tangential_trace_constraints(&spaces.magnetic, b_d)?,
                dirichlet_constraints(&spaces.angular, &all, |p| if on_lid(p) { [0.0, 0.0, 1.0] } else { [0.0; 3] })?,
            ),
        };
        Ok(Problem {
            scheme,
            params,
            spaces,
            assembler: asm,
            mass,
            a_f,
            a_w,
            a_b,
            div,
            div_t,
            curl,
            stab,
            mean,
            constraints_u,
            constraints_b,
            constraints_w,
            forcing,
        })
    }

    pub fn num_vector_dofs(&self) -> usize {
        self.spaces.velocity.dof_count
    }

    pub fn num_pressure_dofs(&self) -> usize {
        self.spaces.pressure.dof_count
    }

    /// `‖u‖² + ‖B‖² + ‖w‖²`.
    pub fn discrete_energy(&self, f: &Fields) -> f64 {
        self.mass.bilinear(&f.u.values, &f.u.values)
            + self.mass.bilinear(&f.b.values, &f.b.values)
            + self.mass.bilinear(&f.w.values, &f.w.values)
    }

    fn loads(&self, t: f64) -> Option<[Vec<f64>; 3]> {
        let f = self.forcing.as_ref()?;
        let asm = &self.assembler;
        Some([
            asm.assemble_load(&self.spaces.velocity, |x| f.momentum(x, t)),
            asm.assemble_load(&self.spaces.magnetic, |x| f.induction(x, t)),
            asm.assemble_load(&self.spaces.angular, |x| f.angular(x, t)),
        ])
    }

    fn mean_column(&self) -> SparseMat {
        let trip: Vec<_> = self.mean.iter().enumerate().map(|(i, &m)| (i, 0, m)).collect();
        SparseMat::from_triplets(self.mean.len(), 1, &trip)
    }

    fn bubble_groups(space: &FeSpace, offset: usize) -> Vec<[usize; 3]> {
        if !space.kind.has_bubble() {
            return Vec::new();
        }
        space
            .bubble_groups()
            .into_iter()
            .map(|g| g.map(|d| d + offset))
            .collect()
    }
}

/// All fields at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Fields {
    pub u: FieldVec,
    pub p: FieldVec,
    pub b: FieldVec,
    pub w: FieldVec,
}

impl Fields {
    pub fn zeros(problem: &Problem, time: f64) -> Self {
        let s = &problem.spaces;
        Fields {
            u: FieldVec::zeros(&s.velocity, time),
            p: FieldVec::zeros(&s.pressure, time),
            b: FieldVec::zeros(&s.magnetic, time),
            w: FieldVec::zeros(&s.angular, time),
        }
    }

    pub fn time(&self) -> f64 {
        self.u.time
    }

    fn with_time(mut self, t: f64) -> Self {
        self.u.time = t;
        self.p.time = t;
        self.b.time = t;
        self.w.time = t;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub step: usize,
    pub dt: f64,
    pub current: Fields,
    /// Level `n − 1`, kept for the extrapolation of the second-order scheme.
    pub previous: Option<Fields>,
}

impl SchemeState {
    pub fn time(&self) -> f64 {
        self.current.time()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    /// Achieved relative residual of each linear solve of the step.
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
    pub wall_time: f64,
}

impl StepReport {
    pub const CSV_HEADER: &'static str = "step,t,energy,max_residual,iterations,wall_time";

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.12e},{:.3e},{},{:.4}",
            self.step,
            self.time,
            self.energy,
            self.max_residual(),
            self.iterations.iter().sum::<usize>(),
            self.wall_time
        )
    }
}

/// Streams step reports as CSV rows.
pub struct StepLog<W: Write> {
    out: W,
}

impl<W: Write> StepLog<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", StepReport::CSV_HEADER)?;
        Ok(StepLog { out })
    }

    pub fn record(&mut self, r: &StepReport) -> Result<()> {
        writeln!(self.out, "{}", r.csv_row())?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Lagged coefficients of one coupled step.
struct CoupledInputs<'a> {
    theta: f64,
    advecting: Vec<f64>,
    magnetic_lag: Vec<f64>,
    old: &'a Fields,
    source_time: f64,
}

/// Advances a [`SchemeState`] with the configured scheme.
pub struct Stepper {
    pub problem: Arc<Problem>,
    solvers: Vec<Solver>,
    condensers: Vec<Option<Condenser>>,
}

const COUPLED: usize = 0;
const MAGNETIC: usize = 1;
const ANGULAR: usize = 2;
const STOKES: usize = 3;

impl Stepper {
    pub fn new(problem: Arc<Problem>, config: SolverConfig) -> Self {
        Stepper {
            problem,
            solvers: (0..4).map(|_| Solver::new(config)).collect(),
            condensers: vec![None, None, None, None],
        }
    }

    /// Level-0 state; boundary data is imposed on the given fields.
    pub fn initial_state(&self, u0: Vec<f64>, b0: Vec<f64>, w0: Vec<f64>, dt: f64) -> Result<SchemeState> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let pb = &*self.problem;
        let mut f = Fields::zeros(pb, 0.0);
        for (dst, src, cs) in [
            (&mut f.u, u0, &pb.constraints_u),
            (&mut f.b, b0, &pb.constraints_b),
            (&mut f.w, w0, &pb.constraints_w),
        ] {
            if src.len() != dst.values.len() {
                return Err(Error::InvalidArgument("initial field has wrong length".into()));
            }
            dst.values = src;
            cs.apply_to(&mut dst.values);
        }
        Ok(SchemeState {
            step: 0,
            dt,
            current: f,
            previous: None,
        })
    }

    pub fn energy(&self, state: &SchemeState) -> f64 {
        self.problem.discrete_energy(&state.current)
    }

    /// One step of the configured scheme. The second-order scheme needs two
    /// levels; see [`Stepper::bootstrap_cn`].
    pub fn step(&mut self, state: &SchemeState) -> Result<(SchemeState, StepReport)> {
        let n = state.step + 1;
        let res = match self.problem.scheme.time {
            TimeDiscretization::EulerCoupled => self.step_euler_coupled(state),
            TimeDiscretization::CnCoupled => self.step_cn_coupled(state),
            TimeDiscretization::EulerDecoupled => self.step_decoupled(state),
        };
        res.map_err(|e| match e {
            Error::Step { .. } => e,
            other => Error::Step {
                step: n,
                source: Box::new(other),
            },
        })
    }

    pub fn step_euler_coupled(&mut self, state: &SchemeState) -> Result<(SchemeState, StepReport)> {
        let old = &state.current;
        let t = old.time() + state.dt;
        let inputs = CoupledInputs {
            theta: 1.0,
            advecting: old.u.values.clone(),
            magnetic_lag: old.b.values.clone(),
            old,
            source_time: t,
        };
        self.coupled_step(state, inputs)
    }

    pub fn step_cn_coupled(&mut self, state: &SchemeState) -> Result<(SchemeState, StepReport)> {
        let prev = state
            .previous
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("second-order step needs two levels".into()))?;
        let old = &state.current;
        let t = old.time() + state.dt;
        let inputs = CoupledInputs {
            theta: 0.5,
            advecting: extrapolate(&old.u.values, &prev.u.values),
            magnetic_lag: extrapolate(&old.b.values, &prev.b.values),
            old,
            source_time: t - 0.5 * state.dt,
        };
        self.coupled_step(state, inputs)
    }

    /// Level 1 for the second-order scheme: the supplied fields if any,
    /// otherwise one coupled Euler step with the same pair.
    pub fn bootstrap_cn(&mut self, state0: &SchemeState, level1: Option<Fields>) -> Result<(SchemeState, StepReport)> {
        let pb = self.problem.clone();
        match level1 {
            Some(mut f) => {
                let start = Instant::now();
                pb.constraints_u.apply_to(&mut f.u.values);
                pb.constraints_b.apply_to(&mut f.b.values);
                pb.constraints_w.apply_to(&mut f.w.values);
                let f = f.with_time(state0.time() + state0.dt);
                let report = StepReport {
                    step: 1,
                    time: f.time(),
                    energy: pb.discrete_energy(&f),
                    residuals: Vec::new(),
                    iterations: Vec::new(),
                    wall_time: start.elapsed().as_secs_f64(),
                };
                Ok((
                    SchemeState {
                        step: 1,
                        dt: state0.dt,
                        current: f,
                        previous: Some(state0.current.clone()),
                    },
                    report,
                ))
            }
            None => self.step_euler_coupled(state0).map_err(|e| Error::Step {
                step: 1,
                source: Box::new(e),
            }),
        }
    }

    fn coupled_step(&mut self, state: &SchemeState, inp: CoupledInputs<'_>) -> Result<(SchemeState, StepReport)> {
        let start = Instant::now();
        let pb = self.problem.clone();
        let dt = state.dt;
        let th = inp.theta;
        let old = inp.old;
        let asm = &pb.assembler;
        let s = &pb.spaces;
        let conv_u = asm.assemble_convection(&s.velocity, &s.velocity, &inp.advecting);
        let conv_w = asm.assemble_convection(&s.angular, &s.velocity, &inp.advecting);
        let lorentz = asm.assemble_lorentz(&s.magnetic, &s.velocity, &inp.magnetic_lag, &pb.params);
        let induct = asm.assemble_induction_coupling(&s.velocity, &s.magnetic, &inp.magnetic_lag);
        let mean_col = pb.mean_column();
        let mean_row = mean_col.transpose();

        let nv = pb.num_vector_dofs();
        let np = pb.num_pressure_dofs();
        let sizes = [nv, nv, nv, np, 1];
        let (iu, ib, iw, ip, il) = (0, 1, 2, 3, 4);
        let two_nr = 2.0 * pb.params.nu_r;
        let mut blocks = vec![
            Block::new(iu, iu, 1.0 / dt, &pb.mass),
            Block::new(iu, iu, th, &pb.a_f),
            Block::new(iu, iu, th, &conv_u),
            Block::new(iu, ib, th, &lorentz),
            Block::new(iu, iw, -th, &pb.curl),
            Block::new(iu, ip, -1.0, &pb.div_t),
            Block::new(ib, iu, -th, &induct),
            Block::new(ib, ib, 1.0 / dt, &pb.mass),
            Block::new(ib, ib, th, &pb.a_b),
            Block::new(iw, iu, -th, &pb.curl),
            Block::new(iw, iw, 1.0 / dt + th * two_nr, &pb.mass),
            Block::new(iw, iw, th, &pb.a_w),
            Block::new(iw, iw, th, &conv_w),
            Block::new(ip, iu, th, &pb.div),
            Block::new(ip, il, 1.0, &mean_col),
            Block::new(il, ip, 1.0, &mean_row),
        ];
        if let Some(g) = &pb.stab {
            blocks.push(Block::new(ip, ip, 1.0, g));
        }
        let matrix = SparseMat::from_blocks(&sizes, &sizes, &blocks);

        let off = offsets(&sizes);
        let mut rhs = vec![0.0; off[5]];
        {
            let (ru, rest) = rhs.split_at_mut(off[1]);
            let (rb, rest) = rest.split_at_mut(nv);
            let (rw, rest) = rest.split_at_mut(nv);
            let rp = &mut rest[..np];
            let mu_old = pb.mass.mul_vec(&old.u.values);
            let mb_old = pb.mass.mul_vec(&old.b.values);
            let mw_old = pb.mass.mul_vec(&old.w.values);
            for i in 0..nv {
                ru[i] = mu_old[i] / dt;
                rb[i] = mb_old[i] / dt;
                rw[i] = mw_old[i] / dt;
            }
            let lag = 1.0 - th;
            if lag != 0.0 {
                let (u0, b0, w0) = (&old.u.values, &old.b.values, &old.w.values);
                let sub = |dst: &mut [f64], m: &SparseMat, x: &[f64], c: f64| {
                    let y = m.mul_vec(x);
                    for (d, yi) in dst.iter_mut().zip(&y) {
                        *d -= c * yi;
                    }
                };
                sub(ru, &pb.a_f, u0, lag);
                sub(ru, &conv_u, u0, lag);
                sub(ru, &lorentz, b0, lag);
                sub(ru, &pb.curl, w0, -lag);
                sub(rb, &pb.a_b, b0, lag);
                sub(rb, &induct, u0, -lag);
                sub(rw, &pb.a_w, w0, lag);
                sub(rw, &conv_w, w0, lag);
                sub(rw, &pb.mass, w0, lag * two_nr);
                sub(rw, &pb.curl, u0, -lag);
                sub(rp, &pb.div, u0, lag);
            }
            if let Some([fu, fb, fw]) = pb.loads(inp.source_time) {
                add_into(ru, &fu);
                add_into(rb, &fb);
                add_into(rw, &fw);
            }
        }

        let mut cs = pb.constraints_u.shifted(off[iu]);
        cs.merge(&pb.constraints_b.shifted(off[ib]))?;
        cs.merge(&pb.constraints_w.shifted(off[iw]))?;
        let sys = apply_constraints(LinearSystem::new(matrix, rhs)?, &cs)?;

        let groups = || -> Vec<Vec<usize>> {
            let gu = Problem::bubble_groups(&s.velocity, off[iu]);
            let gb = Problem::bubble_groups(&s.magnetic, off[ib]);
            let gw = Problem::bubble_groups(&s.angular, off[iw]);
            gu.iter()
                .zip(&gb)
                .zip(&gw)
                .map(|((a, b), c)| a.iter().chain(b).chain(c).copied().collect())
                .collect()
        };
        let (x, stats) = self.solve_sub(COUPLED, &sys, groups)?;

        let t = state.time() + dt;
        let mut new = Fields::zeros(&pb, t);
        new.u.values.copy_from_slice(&x[off[iu]..off[iu + 1]]);
        new.b.values.copy_from_slice(&x[off[ib]..off[ib + 1]]);
        new.w.values.copy_from_slice(&x[off[iw]..off[iw + 1]]);
        new.p.values.copy_from_slice(&x[off[ip]..off[ip + 1]]);
        let energy = pb.discrete_energy(&new);
        let report = StepReport {
            step: state.step + 1,
            time: t,
            energy,
            residuals: vec![stats.residual],
            iterations: vec![stats.iterations],
            wall_time: start.elapsed().as_secs_f64(),
        };
        Ok((
            SchemeState {
                step: state.step + 1,
                dt,
                current: new,
                previous: Some(old.clone()),
            },
            report,
        ))
    }

    /// Magnetic field, then micro-rotation, then velocity and pressure.
    pub fn step_decoupled(&mut self, state: &SchemeState) -> Result<(SchemeState, StepReport)> {
        let start = Instant::now();
        let pb = self.problem.clone();
        let dt = state.dt;
        let old = &state.current;
        let t = old.time() + dt;
        let asm = &pb.assembler;
        let s = &pb.spaces;
        let nv = pb.num_vector_dofs();
        let np = pb.num_pressure_dofs();
        let loads = pb.loads(t);
        let mut residuals = Vec::new();
        let mut iterations = Vec::new();
        let mut record = |st: SolveStats| {
            residuals.push(st.residual);
            iterations.push(st.iterations);
        };

        // magnetic field with lagged velocity
        let lagged = asm.assemble_induction_lagged_velocity(&s.magnetic, &s.velocity, &old.u.values);
        let mat = SparseMat::linear_combination(&[(1.0 / dt, &pb.mass), (1.0, &pb.a_b), (-1.0, &lagged)]);
        let mut rhs: Vec<f64> = pb.mass.mul_vec(&old.b.values).iter().map(|v| v / dt).collect();
        if let Some([_, fb, _]) = &loads {
            add_into(&mut rhs, fb);
        }
        let sys = apply_constraints(LinearSystem::new(mat, rhs)?, &pb.constraints_b)?;
        let (b_new, st) = self.solve_sub(MAGNETIC, &sys, || flat_groups(&s.magnetic))?;
        record(st);

        // micro-rotation with lagged advection and lagged curl of velocity
        let conv = asm.assemble_convection(&s.angular, &s.velocity, &old.u.values);
        let mat = SparseMat::linear_combination(&[
            (1.0 / dt + 2.0 * pb.params.nu_r, &pb.mass),
            (1.0, &pb.a_w),
            (1.0, &conv),
        ]);
        let mut rhs: Vec<f64> = pb.mass.mul_vec(&old.w.values).iter().map(|v| v / dt).collect();
        add_into(&mut rhs, &pb.curl.mul_vec(&old.u.values));
        if let Some([_, _, fw]) = &loads {
            add_into(&mut rhs, fw);
        }
        let sys = apply_constraints(LinearSystem::new(mat, rhs)?, &pb.constraints_w)?;
        let (w_new, st) = self.solve_sub(ANGULAR, &sys, || flat_groups(&s.angular))?;
        record(st);

        // velocity and pressure
        let conv = asm.assemble_convection(&s.velocity, &s.velocity, &old.u.values);
        let lorentz = asm.assemble_lorentz(&s.magnetic, &s.velocity, &old.b.values, &pb.params);
        let mean_col = pb.mean_column();
        let mean_row = mean_col.transpose();
        let sizes = [nv, np, 1];
        let mut blocks = vec![
            Block::new(0, 0, 1.0 / dt, &pb.mass),
            Block::new(0, 0, 1.0, &pb.a_f),
            Block::new(0, 0, 1.0, &conv),
            Block::new(0, 1, -1.0, &pb.div_t),
            Block::new(1, 0, 1.0, &pb.div),
            Block::new(1, 2, 1.0, &mean_col),
            Block::new(2, 1, 1.0, &mean_row),
        ];
        if let Some(g) = &pb.stab {
            blocks.push(Block::new(1, 1, 1.0, g));
        }
        let mat = SparseMat::from_blocks(&sizes, &sizes, &blocks);
        let mut rhs = vec![0.0; nv + np + 1];
        let mu = pb.mass.mul_vec(&old.u.values);
        let lb = lorentz.mul_vec(&b_new);
        let ew = pb.curl.mul_vec(&old.w.values);
        for i in 0..nv {
            rhs[i] = mu[i] / dt - lb[i] + ew[i];
        }
        if let Some([fu, _, _]) = &loads {
            add_into(&mut rhs[..nv], fu);
        }
        let sys = apply_constraints(LinearSystem::new(mat, rhs)?, &pb.constraints_u)?;
        let (x, st) = self.solve_sub(STOKES, &sys, || flat_groups(&s.velocity))?;
        record(st);

        let mut new = Fields::zeros(&pb, t);
        new.u.values.copy_from_slice(&x[..nv]);
        new.p.values.copy_from_slice(&x[nv..nv + np]);
        new.b.values = b_new;
        new.w.values = w_new;
        let energy = pb.discrete_energy(&new);
        let report = StepReport {
            step: state.step + 1,
            time: t,
            energy,
            residuals,
            iterations,
            wall_time: start.elapsed().as_secs_f64(),
        };
        Ok((
            SchemeState {
                step: state.step + 1,
                dt,
                current: new,
                previous: Some(old.clone()),
            },
            report,
        ))
    }

    fn solve_sub<G: FnOnce() -> Vec<Vec<usize>>>(
        &mut self,
        idx: usize,
        sys: &LinearSystem,
        groups: G,
    ) -> Result<(Vec<f64>, SolveStats)> {
        if self.condensers[idx].is_none() {
            let g = groups();
            if !g.is_empty() {
                self.condensers[idx] = Some(Condenser::new(&sys.matrix, g)?);
            }
        }
        match &self.condensers[idx] {
            Some(c) => self.solvers[idx].solve_condensed(sys, c),
            None => self.solvers[idx].solve(sys),
        }
    }
}

fn flat_groups(space: &FeSpace) -> Vec<Vec<usize>> {
    Problem::bubble_groups(space, 0).into_iter().map(|g| g.to_vec()).collect()
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// `(3ψⁿ⁻¹ − ψⁿ⁻²)/2`.
pub fn extrapolate(last: &[f64], before: &[f64]) -> Vec<f64> {
    last.iter().zip(before).map(|(a, b)| a + 0.5 * (a - b)).collect()
}

/// Number of steps and adjusted step size so that `N·Δt = T` exactly.
pub fn step_count(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t_final > 0.0 && dt > 0.0 && t_final.is_finite() && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need positive final time and step, got T={t_final}, dt={dt}"
        )));
    }
    let n = (t_final / dt).round().max(1.0) as usize;
    Ok((n, t_final / n as f64))
}
