//! Batch drivers for the convergence, stability and lid-driven cavity runs,
//! with CSV and VTK output.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use log::info;
use rayon::prelude::*;

use crate::assembly::ModelParams;
use crate::linsolve::SolverConfig;
use crate::manufactured::{
    rate, ErrorAccumulator, ErrorSummary, ManufacturedSolution, ReferenceSolution, TrajectorySpaces,
    ERROR_QUADRATURE_DEGREE,
};
use crate::mesh::TetMesh;
use crate::schemes::{
    step_count, BoundarySetup, Fields, ManufacturedForcing, Problem, SchemeId, SchemeState, StepLog, StepReport,
    Stepper,
};
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Step sizes of the stability study.
pub const STABILITY_TIME_STEPS: [f64; 3] = [0.125, 0.25, 0.5];

/// Relative slack allowed when testing `E_{n+1} <= E_n` in floating point.
pub const MONOTONE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Convergence,
    Stability,
    Cavity,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Cavity => "cavity",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergence" => Ok(ExperimentKind::Convergence),
            "stability" => Ok(ExperimentKind::Stability),
            "cavity" => Ok(ExperimentKind::Cavity),
            _ => Err(Error::InvalidArgument(format!("unknown experiment '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    EqualH,
    SqrtH,
    Fixed(f64),
}

impl DtRule {
    pub fn dt(self, h: f64) -> f64 {
        match self {
            DtRule::EqualH => h,
            DtRule::SqrtH => h.sqrt(),
            DtRule::Fixed(v) => v,
        }
    }

    /// Rule used in the convergence study.
    pub fn default_for(scheme: SchemeId) -> Self {
        if scheme.is_crank_nicolson() {
            DtRule::SqrtH
        } else {
            DtRule::EqualH
        }
    }
}

impl fmt::Display for DtRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DtRule::EqualH => f.write_str("h"),
            DtRule::SqrtH => f.write_str("sqrt-h"),
            DtRule::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

impl FromStr for DtRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" => Ok(DtRule::EqualH),
            "sqrt-h" => Ok(DtRule::SqrtH),
            _ => {
                let v = s
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad time step rule '{s}'")))?;
                if v.is_finite() && v > 0.0 {
                    Ok(DtRule::Fixed(v))
                } else {
                    Err(Error::InvalidArgument(format!("time step must be positive, got {v}")))
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub scheme: SchemeId,
    /// Subdivisions per cube edge, one run each.
    pub mesh_sizes: Vec<usize>,
    /// `None` selects the experiment default.
    pub dt_rule: Option<DtRule>,
    pub t_final: f64,
    pub params: ModelParams,
    pub out: Option<PathBuf>,
    pub solver: SolverConfig,
    pub error_degree: usize,
    /// Cavity snapshot times; empty means final time only.
    pub snapshot_times: Vec<f64>,
    /// Write per-step solver diagnostics next to the outputs.
    pub step_log: bool,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, scheme: SchemeId) -> Self {
        let (mesh_sizes, t_final, params) = match experiment {
            ExperimentKind::Convergence => (vec![4, 8], 1.0, ModelParams::convergence()),
            ExperimentKind::Stability => (vec![13], 12.0, ModelParams::stability()),
            ExperimentKind::Cavity => (vec![12], 5.0, ModelParams::cavity()),
        };
        ExperimentConfig {
            experiment,
            scheme,
            mesh_sizes,
            dt_rule: None,
            t_final,
            params,
            out: None,
            solver: SolverConfig::default(),
            error_degree: ERROR_QUADRATURE_DEGREE,
            snapshot_times: Vec::new(),
            step_log: false,
        }
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.mesh_sizes.is_empty() || self.mesh_sizes.contains(&0) {
            return Err(Error::InvalidArgument("need at least one positive mesh size".into()));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::InvalidArgument(format!("final time must be positive, got {}", self.t_final)));
        }
        Ok(())
    }

    /// Time steps of this run for mesh width `h`.
    pub fn time_steps(&self, h: f64) -> Vec<f64> {
        match (self.dt_rule, self.experiment) {
            (Some(r), _) => vec![r.dt(h)],
            (None, ExperimentKind::Convergence) => vec![DtRule::default_for(self.scheme).dt(h)],
            (None, ExperimentKind::Stability) => STABILITY_TIME_STEPS.to_vec(),
            (None, ExperimentKind::Cavity) => vec![0.05],
        }
    }

    /// `# key: value` lines describing the run.
    pub fn header(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "# mmfem {VERSION}");
        let _ = writeln!(s, "# experiment: {}", self.experiment.name());
        let _ = writeln!(s, "# scheme: {}", self.scheme);
        let sizes: Vec<_> = self.mesh_sizes.iter().map(|n| format!("1/{n}")).collect();
        let _ = writeln!(s, "# h: {}", sizes.join(" "));
        let rule = match self.dt_rule {
            Some(r) => r.to_string(),
            None => match self.experiment {
                ExperimentKind::Convergence => DtRule::default_for(self.scheme).to_string(),
                ExperimentKind::Stability => "fixed:0.125,0.25,0.5".into(),
                ExperimentKind::Cavity => "fixed:0.05".into(),
            },
        };
        let _ = writeln!(s, "# dt_rule: {rule} (N = round(T/dt), dt = T/N)");
        let _ = writeln!(s, "# T: {}", self.t_final);
        let _ = writeln!(
            s,
            "# params: nu={} nu_r={} mu={} c0={} ca={} cd={} s={}",
            p.nu, p.nu_r, p.mu, p.c0, p.ca, p.cd, p.s
        );
        let _ = writeln!(
            s,
            "# solver: {:?} tol={}",
            self.solver.backend,
            self.solver
                .rel_tol
                .map(|t| t.to_string())
                .unwrap_or_else(|| "default".into())
        );
        match self.experiment {
            ExperimentKind::Convergence => {
                let _ = writeln!(
                    s,
                    "# errors: max over steps n >= {} of H1 seminorms; pressure l2(L2) over the same steps; quadrature degree {}",
                    self.scheme.first_error_step(),
                    self.error_degree
                );
            }
            ExperimentKind::Stability => {
                let _ = writeln!(s, "# data: zero forcing, homogeneous boundary values, trigonometric initial fields");
            }
            ExperimentKind::Cavity => {
                let _ = writeln!(
                    s,
                    "# data: lid u=(1,0,0) w=(0,0,1) on z=1; n x B = n x (0,0,1); initial u,w zero inside, B=(0,0,1)"
                );
            }
        }
        s
    }
}

/// One step with the right start-up for the scheme.
fn advance(stepper: &mut Stepper, state: &SchemeState, level1: impl FnOnce() -> Option<Fields>) -> Result<(SchemeState, StepReport)> {
    if state.step == 0 && stepper.problem.scheme.is_crank_nicolson() {
        stepper.bootstrap_cn(state, level1())
    } else {
        stepper.step(state)
    }
}

fn interpolate_fields<R: ReferenceSolution>(pb: &Problem, ex: &R, t: f64) -> Fields {
    let s = &pb.spaces;
    let mut f = Fields::zeros(pb, t);
    f.u.values = s.velocity.interpolate(|x| ex.velocity(x, t));
    f.b.values = s.magnetic.interpolate(|x| ex.magnetic(x, t));
    f.w.values = s.angular.interpolate(|x| ex.angular(x, t));
    f.p.values = s.pressure.interpolate_scalar(|x| ex.pressure(x, t));
    f
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub errors: ErrorSummary,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub header: String,
    /// In order of decreasing `h`; failed rows carry the error message.
    pub rows: Vec<std::result::Result<ConvergenceRow, (usize, String)>>,
}

impl ConvergenceTable {
    pub const CSV_HEADER: &'static str = "h,Eu,rate_u,EB,rate_B,Ew,rate_w,Ep,rate_p";

    pub fn successful(&self) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter_map(|r| r.as_ref().ok())
    }

    /// Rates of `(E_u, E_B, E_w, E_p)` against the preceding successful row.
    pub fn rates(&self) -> Vec<Option<[Option<f64>; 4]>> {
        let mut prev: Option<&ConvergenceRow> = None;
        let mut out = Vec::new();
        for row in self.successful() {
            out.push(prev.map(|c| {
                let (a, b) = (&c.errors, &row.errors);
                [
                    rate(a.e_u, b.e_u, c.h, row.h),
                    rate(a.e_b, b.e_b, c.h, row.h),
                    rate(a.e_w, b.e_w, c.h, row.h),
                    rate(a.e_p, b.e_p, c.h, row.h),
                ]
            }));
            prev = Some(row);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.clone();
        for r in &self.rows {
            match r {
                Ok(row) => {
                    let _ = writeln!(s, "# h=1/{}: dt={} steps={}", row.n, row.dt, row.steps);
                }
                Err((n, msg)) => {
                    let _ = writeln!(s, "# h=1/{n}: failed: {msg}");
                }
            }
        }
        let _ = writeln!(s, "{}", Self::CSV_HEADER);
        let fmt_rate = |r: Option<f64>| r.map(|v| format!("{v:.4}")).unwrap_or_default();
        for (row, rates) in self.successful().zip(self.rates()) {
            let e = &row.errors;
            let rt = rates.unwrap_or([None; 4]);
            let _ = writeln!(
                s,
                "{},{:.6e},{},{:.6e},{},{:.6e},{},{:.6e},{}",
                row.h,
                e.e_u,
                fmt_rate(rt[0]),
                e.e_b,
                fmt_rate(rt[1]),
                e.e_w,
                fmt_rate(rt[2]),
                e.e_p,
                fmt_rate(rt[3])
            );
        }
        s
    }
}

/// Manufactured-solution trajectory on the `n`-subdivided cube.
pub fn convergence_trajectory(cfg: &ExperimentConfig, n: usize, dt_nominal: f64) -> Result<ConvergenceRow> {
    let mesh = Arc::new(TetMesh::build_structured_cube(n)?);
    let h = mesh.h;
    let (steps, dt) = step_count(cfg.t_final, dt_nominal)?;
    if cfg.scheme.is_crank_nicolson() && steps < 2 {
        return Err(Error::InvalidArgument(format!(
            "second-order scheme needs at least two steps, got {steps} (dt={dt})"
        )));
    }
    let forcing = Arc::new(ManufacturedForcing { params: cfg.params });
    let pb = Arc::new(Problem::new(mesh, cfg.scheme, cfg.params, BoundarySetup::NoSlip, Some(forcing))?);
    let ex = ManufacturedSolution;
    let mut stepper = Stepper::new(pb.clone(), cfg.solver);
    let init = interpolate_fields(&pb, &ex, 0.0);
    let mut state = stepper.initial_state(init.u.values, init.b.values, init.w.values, dt)?;
    let spaces = TrajectorySpaces {
        velocity: &pb.spaces.velocity,
        pressure: &pb.spaces.pressure,
        magnetic: &pb.spaces.magnetic,
        angular: &pb.spaces.angular,
    };
    let mut acc = ErrorAccumulator::new(spaces, &ex, dt, cfg.scheme.first_error_step(), cfg.error_degree)?;
    let mut log = step_log(cfg, &format!("convergence_{}_n{n}", cfg.scheme))?;
    for _ in 0..steps {
        let (next, report) = advance(&mut stepper, &state, || Some(interpolate_fields(&pb, &ex, dt)))?;
        state = next;
        let f = &state.current;
        acc.record(state.step, f.time(), &f.u.values, &f.p.values, &f.b.values, &f.w.values);
        if let Some(l) = log.as_mut() {
            l.record(&report)?;
        }
    }
    let errors = acc.finish();
    info!(
        "{} h=1/{n} dt={dt:.5}: Eu={:.5e} EB={:.5e} Ew={:.5e} Ep={:.5e}",
        cfg.scheme, errors.e_u, errors.e_b, errors.e_w, errors.e_p
    );
    Ok(ConvergenceRow { n, h, dt, steps, errors })
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let mut sizes = cfg.mesh_sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let rows = sizes
        .par_iter()
        .map(|&n| {
            let dt = cfg.time_steps(1.0 / n as f64)[0];
            convergence_trajectory(cfg, n, dt).map_err(|e| (n, e.to_string()))
        })
        .collect();
    let table = ConvergenceTable {
        header: cfg.header(),
        rows,
    };
    if let Some(dir) = &cfg.out {
        write_file(&dir.join(format!("convergence_{}.csv", cfg.scheme)), &table.to_csv())?;
    }
    Ok(table)
}

/// `(n, t_n, E_n)` including the initial level.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries {
    pub n: usize,
    pub dt: f64,
    pub points: Vec<(usize, f64, f64)>,
}

impl EnergySeries {
    pub const CSV_HEADER: &'static str = "step,t,energy";

    /// `E_{n+1} <= E_n` for all `n`, up to [`MONOTONE_RTOL`].
    pub fn is_monotone(&self) -> bool {
        self.first_increase().is_none()
    }

    /// First step whose energy exceeds its predecessor's.
    pub fn first_increase(&self) -> Option<usize> {
        self.points
            .windows(2)
            .find(|w| w[1].2 > w[0].2 * (1.0 + MONOTONE_RTOL))
            .map(|w| w[1].0)
    }

    pub fn max_energy(&self) -> f64 {
        self.points.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.2.is_finite())
    }

    pub fn to_csv(&self, header: &str) -> String {
        let mut s = header.to_string();
        let _ = writeln!(s, "# h: 1/{}", self.n);
        let _ = writeln!(s, "# dt: {}", self.dt);
        let _ = writeln!(s, "# monotone: {}", self.is_monotone());
        let _ = writeln!(s, "{}", Self::CSV_HEADER);
        for (k, t, e) in &self.points {
            let _ = writeln!(s, "{k},{t},{e:.15e}");
        }
        s
    }
}

fn step_log(cfg: &ExperimentConfig, stem: &str) -> Result<Option<StepLog<std::io::BufWriter<std::fs::File>>>> {
    match (&cfg.out, cfg.step_log) {
        (Some(dir), true) => {
            std::fs::create_dir_all(dir)?;
            let f = std::fs::File::create(dir.join(format!("{stem}_steps.csv")))?;
            Ok(Some(StepLog::new(std::io::BufWriter::new(f))?))
        }
        _ => Ok(None),
    }
}

fn stability_trajectory(cfg: &ExperimentConfig, n: usize, dt_nominal: f64) -> Result<EnergySeries> {
    let mesh = Arc::new(TetMesh::build_structured_cube(n)?);
    let (steps, dt) = step_count(cfg.t_final, dt_nominal)?;
    let pb = Arc::new(Problem::new(mesh, cfg.scheme, cfg.params, BoundarySetup::NoSlip, None)?);
    let init = interpolate_fields(&pb, &ManufacturedSolution, 0.0);
    let mut stepper = Stepper::new(pb.clone(), cfg.solver);
    let mut state = stepper.initial_state(init.u.values, init.b.values, init.w.values, dt)?;
    let mut points = vec![(0, 0.0, stepper.energy(&state))];
    let mut log = step_log(cfg, &format!("stability_{}_n{n}_dt{dt}", cfg.scheme))?;
    for _ in 0..steps {
        let (next, report) = advance(&mut stepper, &state, || None)?;
        state = next;
        points.push((state.step, state.time(), report.energy));
        if let Some(l) = log.as_mut() {
            l.record(&report)?;
        }
    }
    let series = EnergySeries { n, dt, points };
    info!(
        "{} h=1/{n} dt={dt}: E0={:.6e} EN={:.6e} monotone={}",
        cfg.scheme,
        series.points[0].2,
        series.points.last().map(|p| p.2).unwrap_or(f64::NAN),
        series.is_monotone()
    );
    Ok(series)
}

/// One energy series per `(h, Δt)` pair.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<Vec<EnergySeries>> {
    cfg.validate()?;
    let jobs: Vec<(usize, f64)> = cfg
        .mesh_sizes
        .iter()
        .flat_map(|&n| cfg.time_steps(1.0 / n as f64).into_iter().map(move |dt| (n, dt)))
        .collect();
    let series: Vec<EnergySeries> = jobs
        .par_iter()
        .map(|&(n, dt)| stability_trajectory(cfg, n, dt))
        .collect::<Result<_>>()?;
    if let Some(dir) = &cfg.out {
        let header = cfg.header();
        for s in &series {
            let name = format!("stability_{}_n{}_dt{}.csv", cfg.scheme, s.n, s.dt);
            write_file(&dir.join(name), &s.to_csv(&header))?;
        }
    }
    Ok(series)
}

/// Fields at one saved time level.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub fields: Fields,
}

#[derive(Clone)]
pub struct CavityRun {
    pub energy: EnergySeries,
    pub snapshots: Vec<Snapshot>,
    pub problem: Arc<Problem>,
}

impl CavityRun {
    /// Finite energies that never exceed `factor` times the largest of the
    /// first-step energy and one.
    pub fn is_bounded(&self, factor: f64) -> bool {
        let first = self.energy.points.get(1).map(|p| p.2).unwrap_or(0.0).max(1.0);
        self.energy.is_finite() && self.energy.max_energy() <= factor * first
    }
}

/// Lid-driven cavity on the `n`-subdivided cube.
pub fn cavity_trajectory(cfg: &ExperimentConfig, n: usize, dt_nominal: f64) -> Result<CavityRun> {
    let mesh = Arc::new(TetMesh::build_structured_cube(n)?);
    let (steps, dt) = step_count(cfg.t_final, dt_nominal)?;
    let b_d = [0.0, 0.0, 1.0];
    let pb = Arc::new(Problem::new(
        mesh,
        cfg.scheme,
        cfg.params,
        BoundarySetup::LidDrivenCavity { b_d },
        None,
    )?);
    let nv = pb.num_vector_dofs();
    let mut stepper = Stepper::new(pb.clone(), cfg.solver);
    let b0 = pb.spaces.magnetic.interpolate(|_| b_d);
    let mut state = stepper.initial_state(vec![0.0; nv], b0, vec![0.0; nv], dt)?;
    let snap_steps: Vec<usize> = if cfg.snapshot_times.is_empty() {
        vec![steps]
    } else {
        cfg.snapshot_times
            .iter()
            .map(|t| ((t / dt).round().max(0.0) as usize).min(steps))
            .collect()
    };
    let mut snapshots = Vec::new();
    if snap_steps.contains(&0) {
        snapshots.push(Snapshot {
            step: 0,
            fields: state.current.clone(),
        });
    }
    let mut points = vec![(0, 0.0, stepper.energy(&state))];
    let mut log = step_log(cfg, &format!("cavity_{}_n{n}", cfg.scheme))?;
    for _ in 0..steps {
        let (next, report) = advance(&mut stepper, &state, || None)?;
        state = next;
        points.push((state.step, state.time(), report.energy));
        if let Some(l) = log.as_mut() {
            l.record(&report)?;
        }
        if !report.energy.is_finite() {
            return Err(Error::Step {
                step: state.step,
                source: Box::new(Error::InvalidArgument("non-finite energy".into())),
            });
        }
        if snap_steps.contains(&state.step) {
            snapshots.push(Snapshot {
                step: state.step,
                fields: state.current.clone(),
            });
        }
    }
    Ok(CavityRun {
        energy: EnergySeries { n, dt, points },
        snapshots,
        problem: pb,
    })
}

pub fn run_cavity(cfg: &ExperimentConfig) -> Result<Vec<CavityRun>> {
    cfg.validate()?;
    let runs: Vec<CavityRun> = cfg
        .mesh_sizes
        .par_iter()
        .map(|&n| cavity_trajectory(cfg, n, cfg.time_steps(1.0 / n as f64)[0]))
        .collect::<Result<_>>()?;
    if let Some(dir) = &cfg.out {
        let header = cfg.header();
        for run in &runs {
            let stem = format!("cavity_{}_n{}", cfg.scheme, run.energy.n);
            write_file(&dir.join(format!("{stem}.csv")), &run.energy.to_csv(&header))?;
            for snap in &run.snapshots {
                let path = dir.join(format!("{stem}_step{:04}.vtk", snap.step));
                write_file(&path, &snapshot_vtk(&run.problem, &snap.fields, &stem))?;
            }
        }
    }
    Ok(runs)
}

/// Legacy ASCII VTK with vertex values of `u`, `B`, `w` and `p`.
pub fn snapshot_vtk(pb: &Problem, f: &Fields, title: &str) -> String {
    let mesh = &pb.spaces.velocity.mesh;
    let mut s = String::new();
    crate::mesh::write_vtk_geometry(&mut s, mesh, &format!("{title} t={}", f.time()));
    let nv = mesh.num_vertices();
    let _ = writeln!(s, "POINT_DATA {nv}");
    for (name, space, vals) in [
        ("velocity", &pb.spaces.velocity, &f.u.values),
        ("magnetic", &pb.spaces.magnetic, &f.b.values),
        ("microrotation", &pb.spaces.angular, &f.w.values),
    ] {
        let _ = writeln!(s, "VECTORS {name} double");
        for v in 0..nv {
            let c: Vec<f64> = (0..3).map(|d| vals[space.vertex_dof(v, d)]).collect();
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
    }
    let _ = writeln!(s, "SCALARS pressure double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for v in 0..nv {
        let _ = writeln!(s, "{}", f.p.values[pb.spaces.pressure.vertex_dof(v, 0)]);
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}
