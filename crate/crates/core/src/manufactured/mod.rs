//! Trigonometric manufactured solution on the unit cube, its forcing terms
//! and discrete error norms.
//!
//! Every field is `cos t` times a separable product of one-dimensional
//! profiles, so derivatives follow from the product rule. The forcing terms
//! live in `generated.rs` (produced offline by `scripts/gen_sources.py`) and
//! are cross-checked against these derivatives in the tests.

mod generated;

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::assembly::ModelParams;
use crate::fespace::{FeSpace, TetGeometry};
use crate::mesh::Point;
use crate::quadrature::{grundmann_moller, tet_rule, QuadRule};
use crate::Result;

pub type Grad = [[f64; 3]; 3];
pub type Hessian = [[[f64; 3]; 3]; 3];

/// One-dimensional factors appearing in the exact fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Profile {
    /// `1 − cos(2πs)`
    OneMinusCos2,
    /// `sin(2πs)`
    Sin2,
    /// `sin(πs)`
    Sin1,
    /// `cos(πs)`
    Cos1,
}

impl Profile {
    /// Value, first and second derivative.
    fn eval(self, s: f64) -> [f64; 3] {
        match self {
            Profile::OneMinusCos2 => {
                let k = 2.0 * PI;
                [1.0 - (k * s).cos(), k * (k * s).sin(), k * k * (k * s).cos()]
            }
            Profile::Sin2 => {
                let k = 2.0 * PI;
                [(k * s).sin(), k * (k * s).cos(), -k * k * (k * s).sin()]
            }
            Profile::Sin1 => [(PI * s).sin(), PI * (PI * s).cos(), -PI * PI * (PI * s).sin()],
            Profile::Cos1 => [(PI * s).cos(), -PI * (PI * s).sin(), -PI * PI * (PI * s).cos()],
        }
    }
}

/// `coef · Π_i profile_i(x_i)`.
#[derive(Debug, Clone, Copy)]
struct Separable {
    coef: f64,
    profiles: [Profile; 3],
}

impl Separable {
    fn tables(&self, x: &Point) -> [[f64; 3]; 3] {
        [
            self.profiles[0].eval(x[0]),
            self.profiles[1].eval(x[1]),
            self.profiles[2].eval(x[2]),
        ]
    }

    fn value(&self, x: &Point) -> f64 {
        let t = self.tables(x);
        self.coef * t[0][0] * t[1][0] * t[2][0]
    }

    fn grad(&self, x: &Point) -> [f64; 3] {
        let t = self.tables(x);
        let mut g = [0.0; 3];
        for (d, gd) in g.iter_mut().enumerate() {
            *gd = self.coef * (0..3).map(|i| t[i][usize::from(i == d)]).product::<f64>();
        }
        g
    }

    fn hessian(&self, x: &Point) -> [[f64; 3]; 3] {
        let t = self.tables(x);
        let mut h = [[0.0; 3]; 3];
        for (i, row) in h.iter_mut().enumerate() {
            for (j, hij) in row.iter_mut().enumerate() {
                *hij = self.coef
                    * (0..3)
                        .map(|a| t[a][usize::from(a == i) + usize::from(a == j)])
                        .product::<f64>();
            }
        }
        h
    }
}

fn field(coefs: [f64; 3], profiles: [[Profile; 3]; 3]) -> [Separable; 3] {
    [0, 1, 2].map(|c| Separable {
        coef: coefs[c],
        profiles: profiles[c],
    })
}

fn solenoidal_pattern() -> [[Profile; 3]; 3] {
    use Profile::*;
    [
        [OneMinusCos2, Sin2, Sin2],
        [Sin2, OneMinusCos2, Sin2],
        [Sin2, Sin2, OneMinusCos2],
    ]
}

fn velocity_parts() -> [Separable; 3] {
    field([-2.0, 1.0, 1.0], solenoidal_pattern())
}

fn angular_parts() -> [Separable; 3] {
    field([1.0, 1.0, 1.0], solenoidal_pattern())
}

fn magnetic_parts() -> [Separable; 3] {
    use Profile::*;
    field(
        [2.0, -1.0, -1.0],
        [[Sin1, Cos1, Cos1], [Cos1, Sin1, Cos1], [Cos1, Cos1, Sin1]],
    )
}

fn values(parts: &[Separable; 3], x: &Point, s: f64) -> [f64; 3] {
    [0, 1, 2].map(|c| s * parts[c].value(x))
}

fn grads(parts: &[Separable; 3], x: &Point, s: f64) -> Grad {
    [0, 1, 2].map(|c| parts[c].grad(x).map(|v| s * v))
}

fn hessians(parts: &[Separable; 3], x: &Point, s: f64) -> Hessian {
    [0, 1, 2].map(|c| parts[c].hessian(x).map(|row| row.map(|v| s * v)))
}

/// Reference fields used to measure discretization errors.
pub trait ReferenceSolution: Sync {
    fn velocity(&self, x: &Point, t: f64) -> [f64; 3];
    /// `g[c][d] = ∂_d u_c`.
    fn velocity_grad(&self, x: &Point, t: f64) -> Grad;
    fn pressure(&self, x: &Point, t: f64) -> f64;
    fn magnetic(&self, x: &Point, t: f64) -> [f64; 3];
    fn magnetic_grad(&self, x: &Point, t: f64) -> Grad;
    fn angular(&self, x: &Point, t: f64) -> [f64; 3];
    fn angular_grad(&self, x: &Point, t: f64) -> Grad;
}

/// The trigonometric exact solution of the convergence experiment.
#[derive(Debug, Clone, Copy, Default)]
pub struct ManufacturedSolution;

impl ManufacturedSolution {
    pub fn velocity_hessian(&self, x: &Point, t: f64) -> Hessian {
        hessians(&velocity_parts(), x, t.cos())
    }

    pub fn magnetic_hessian(&self, x: &Point, t: f64) -> Hessian {
        hessians(&magnetic_parts(), x, t.cos())
    }

    pub fn angular_hessian(&self, x: &Point, t: f64) -> Hessian {
        hessians(&angular_parts(), x, t.cos())
    }

    pub fn pressure_grad(&self, x: &Point, t: f64) -> [f64; 3] {
        let k = 4.0 * PI;
        [0, 1, 2].map(|d| k * (k * x[d]).cos() * t.cos())
    }

    pub fn velocity_dt(&self, x: &Point, t: f64) -> [f64; 3] {
        values(&velocity_parts(), x, -t.sin())
    }

    pub fn magnetic_dt(&self, x: &Point, t: f64) -> [f64; 3] {
        values(&magnetic_parts(), x, -t.sin())
    }

    pub fn angular_dt(&self, x: &Point, t: f64) -> [f64; 3] {
        values(&angular_parts(), x, -t.sin())
    }

    pub fn momentum_source(&self, x: &Point, t: f64, prm: &ModelParams) -> [f64; 3] {
        generated::momentum_source(x[0], x[1], x[2], t, prm)
    }

    pub fn angular_source(&self, x: &Point, t: f64, prm: &ModelParams) -> [f64; 3] {
        generated::angular_source(x[0], x[1], x[2], t, prm)
    }

    pub fn induction_source(&self, x: &Point, t: f64, prm: &ModelParams) -> [f64; 3] {
        generated::induction_source(x[0], x[1], x[2], t, prm)
    }
}

impl ReferenceSolution for ManufacturedSolution {
    fn velocity(&self, x: &Point, t: f64) -> [f64; 3] {
        values(&velocity_parts(), x, t.cos())
    }

    fn velocity_grad(&self, x: &Point, t: f64) -> Grad {
        grads(&velocity_parts(), x, t.cos())
    }

    fn pressure(&self, x: &Point, t: f64) -> f64 {
        ((4.0 * PI * x[0]).sin() + (4.0 * PI * x[1]).sin() + (4.0 * PI * x[2]).sin()) * t.cos()
    }

    fn magnetic(&self, x: &Point, t: f64) -> [f64; 3] {
        values(&magnetic_parts(), x, t.cos())
    }

    fn magnetic_grad(&self, x: &Point, t: f64) -> Grad {
        grads(&magnetic_parts(), x, t.cos())
    }

    fn angular(&self, x: &Point, t: f64) -> [f64; 3] {
        values(&angular_parts(), x, t.cos())
    }

    fn angular_grad(&self, x: &Point, t: f64) -> Grad {
        grads(&angular_parts(), x, t.cos())
    }
}

/// Identically zero reference, for unforced runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSolution;

impl ReferenceSolution for ZeroSolution {
    fn velocity(&self, _: &Point, _: f64) -> [f64; 3] {
        [0.0; 3]
    }
    fn velocity_grad(&self, _: &Point, _: f64) -> Grad {
        [[0.0; 3]; 3]
    }
    fn pressure(&self, _: &Point, _: f64) -> f64 {
        0.0
    }
    fn magnetic(&self, _: &Point, _: f64) -> [f64; 3] {
        [0.0; 3]
    }
    fn magnetic_grad(&self, _: &Point, _: f64) -> Grad {
        [[0.0; 3]; 3]
    }
    fn angular(&self, _: &Point, _: f64) -> [f64; 3] {
        [0.0; 3]
    }
    fn angular_grad(&self, _: &Point, _: f64) -> Grad {
        [[0.0; 3]; 3]
    }
}

/// Per-step errors at one time level.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepErrors {
    pub step: usize,
    pub time: f64,
    /// `‖∇(u(t) − u_h)‖`
    pub velocity_h1: f64,
    pub magnetic_h1: f64,
    pub angular_h1: f64,
    /// `‖p(t) − p_h‖`
    pub pressure_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorSummary {
    pub e_u: f64,
    pub e_b: f64,
    pub e_w: f64,
    pub e_p: f64,
    /// First step included in the max / sum.
    pub first_step: usize,
    pub series: Vec<StepErrors>,
}

/// Discrete spaces of one trajectory.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySpaces<'a> {
    pub velocity: &'a FeSpace,
    pub pressure: &'a FeSpace,
    pub magnetic: &'a FeSpace,
    pub angular: &'a FeSpace,
}

/// Rule of at least the requested degree; degrees above eight use the
/// Grundmann–Möller family.
pub fn error_rule(degree: usize) -> Result<QuadRule> {
    if degree <= 8 {
        tet_rule(degree)
    } else {
        Ok(grundmann_moller(degree / 2))
    }
}

/// Default degree for error norms of the trigonometric fields.
pub const ERROR_QUADRATURE_DEGREE: usize = 13;

/// Streaming accumulator for the error measures.
pub struct ErrorAccumulator<'a, R: ReferenceSolution> {
    spaces: TrajectorySpaces<'a>,
    exact: &'a R,
    rule: QuadRule,
    geoms: Vec<TetGeometry>,
    dt: f64,
    first_step: usize,
    sum_p: f64,
    summary: ErrorSummary,
}

impl<'a, R: ReferenceSolution> ErrorAccumulator<'a, R> {
    pub fn new(spaces: TrajectorySpaces<'a>, exact: &'a R, dt: f64, first_step: usize, degree: usize) -> Result<Self> {
        let mesh = &spaces.velocity.mesh;
        let geoms = (0..mesh.num_tets())
            .map(|k| TetGeometry::new(mesh.tet_vertices(k)))
            .collect();
        Ok(ErrorAccumulator {
            spaces,
            exact,
            rule: error_rule(degree)?,
            geoms,
            dt,
            first_step,
            sum_p: 0.0,
            summary: ErrorSummary {
                first_step,
                ..Default::default()
            },
        })
    }

    /// Errors of one time level against the reference at `time`.
    pub fn measure(&self, step: usize, time: f64, u: &[f64], p: &[f64], b: &[f64], w: &[f64]) -> StepErrors {
        let sp = self.spaces;
        let ex = self.exact;
        let parts: Vec<[f64; 4]> = (0..self.geoms.len())
            .into_par_iter()
            .map(|k| {
                let g = &self.geoms[k];
                let mut acc = [0.0; 4];
                for (bary, wt) in self.rule.points.iter().zip(&self.rule.weights) {
                    let x = g.point(bary);
                    let wq = wt * g.volume;
                    acc[0] += wq * grad_gap(ex.velocity_grad(&x, time), sp.velocity.eval_grad(u, k, g, bary));
                    acc[1] += wq * grad_gap(ex.magnetic_grad(&x, time), sp.magnetic.eval_grad(b, k, g, bary));
                    acc[2] += wq * grad_gap(ex.angular_grad(&x, time), sp.angular.eval_grad(w, k, g, bary));
                    let dp = ex.pressure(&x, time) - sp.pressure.eval(p, k, g, bary)[0];
                    acc[3] += wq * dp * dp;
                }
                acc
            })
            .collect();
        let mut tot = [0.0; 4];
        for a in &parts {
            for i in 0..4 {
                tot[i] += a[i];
            }
        }
        // negative-weight rules can leave a tiny negative sum for exact data
        let [eu, eb, ew, ep] = tot.map(|v| v.max(0.0).sqrt());
        StepErrors {
            step,
            time,
            velocity_h1: eu,
            magnetic_h1: eb,
            angular_h1: ew,
            pressure_l2: ep,
        }
    }

    pub fn record(&mut self, step: usize, time: f64, u: &[f64], p: &[f64], b: &[f64], w: &[f64]) -> StepErrors {
        let e = self.measure(step, time, u, p, b, w);
        if step >= self.first_step {
            let s = &mut self.summary;
            s.e_u = s.e_u.max(e.velocity_h1);
            s.e_b = s.e_b.max(e.magnetic_h1);
            s.e_w = s.e_w.max(e.angular_h1);
            self.sum_p += self.dt * e.pressure_l2 * e.pressure_l2;
        }
        self.summary.series.push(e);
        e
    }

    pub fn finish(mut self) -> ErrorSummary {
        self.summary.e_p = self.sum_p.sqrt();
        self.summary
    }
}

fn grad_gap(exact: Grad, discrete: Grad) -> f64 {
    let mut s = 0.0;
    for c in 0..3 {
        for d in 0..3 {
            let e = exact[c][d] - discrete[c][d];
            s += e * e;
        }
    }
    s
}

/// Observed order `ln(E_c/E_f) / ln(h_c/h_f)`; `None` for non-positive input.
pub fn rate(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> Option<f64> {
    if e_coarse > 0.0 && e_fine > 0.0 && h_coarse > h_fine && h_fine > 0.0 {
        Some((e_coarse / e_fine).ln() / (h_coarse / h_fine).ln())
    } else {
        None
    }
}
