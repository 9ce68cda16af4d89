use std::sync::Arc;

use mmfem::assembly::{Assembler, ModelParams};
use mmfem::fespace::{dirichlet_constraints, normal_trace_constraints, ConstraintSet, FeSpace, SpaceKind, TetGeometry};
use mmfem::linsolve::{apply_constraints, Backend, LinearSystem, Solver, SolverConfig};
use mmfem::manufactured::{ManufacturedSolution, ReferenceSolution};
use mmfem::mesh::{FaceTag, Point, TetMesh};
use mmfem::quadrature::{barycentric_monomial_integral, tet_rule};
use mmfem::schemes::{step_count, BoundarySetup, Problem, SchemeId, Stepper};
use mmfem::sparse::{norm2, SparseMat};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mesh(n: usize) -> Arc<TetMesh> {
    Arc::new(TetMesh::build_structured_cube(n).unwrap())
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn direct() -> SolverConfig {
    SolverConfig {
        backend: Backend::Direct,
        ..Default::default()
    }
}

fn any_scheme() -> impl Strategy<Value = SchemeId> {
    (0..6usize).prop_map(|i| SchemeId::ALL[i])
}

fn any_kind() -> impl Strategy<Value = SpaceKind> {
    prop_oneof![Just(SpaceKind::VectorP1), Just(SpaceKind::VectorP1Bubble)]
}

fn any_params() -> impl Strategy<Value = ModelParams> {
    (0.01..2.0f64, 0.01..2.0f64, 0.01..2.0f64, 0.01..1.0f64, 0.01..1.0f64, 0.01..1.0f64, 0.1..3.0f64)
        .prop_filter_map("c0 + cd > ca", |(nu, nr, mu, c0, ca, cd, s)| {
            ModelParams::new(nu, nr, mu, c0, ca, cd, s).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cube_partition(n in 1usize..=7) {
        let m = TetMesh::build_structured_cube(n).unwrap();
        let vols: Vec<f64> = (0..m.num_tets()).map(|k| m.tet_volume(k)).collect();
        prop_assert!(vols.iter().all(|&v| v > 0.0));
        prop_assert!((vols.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let faces = m.face_incidence();
        let boundary = faces.values().filter(|&&c| c == 1).count();
        prop_assert!(faces.values().all(|&c| c == 1 || c == 2));
        prop_assert_eq!(boundary, 12 * n * n);
        prop_assert_eq!(m.boundary_faces.len(), boundary);
    }

    #[test]
    fn dof_counts(n in 1usize..=8) {
        let m = mesh(n);
        let (nv, nt) = (m.num_vertices(), m.num_tets());
        prop_assert_eq!(nv, (n + 1).pow(3));
        prop_assert_eq!(nt, 6 * n.pow(3));
        prop_assert_eq!(FeSpace::new(m.clone(), SpaceKind::ScalarP1).dof_count, nv);
        prop_assert_eq!(FeSpace::new(m.clone(), SpaceKind::VectorP1).dof_count, 3 * nv);
        prop_assert_eq!(FeSpace::new(m, SpaceKind::VectorP1Bubble).dof_count, 3 * (nv + nt));
    }

    #[test]
    fn quadrature_on_random_tets(
        seed in any::<u64>(),
        degree in 1usize..=8,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: [Point; 4] = std::array::from_fn(|_| [rng.gen(), rng.gen(), rng.gen()]);
        let g = TetGeometry::new(v);
        prop_assume!(g.volume > 1e-3);
        let rule = tet_rule(degree).unwrap();
        let total = degree as u32;
        let a0 = rng.gen_range(0..=total);
        let a1 = rng.gen_range(0..=total - a0);
        let a2 = rng.gen_range(0..=total - a0 - a1);
        let alpha = [a0, a1, a2, total - a0 - a1 - a2];
        let q = rule.integrate(g.volume, |b| (0..4).map(|i| b[i].powi(alpha[i] as i32)).product());
        let exact = barycentric_monomial_integral(alpha, g.volume);
        prop_assert!((q - exact).abs() <= 1e-12 * exact, "{alpha:?} {q} {exact}");
    }

    #[test]
    fn nodal_data_round_trip(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = mesh(n);
        let s = FeSpace::new(m.clone(), SpaceKind::VectorP1);
        let data = random_vec(&mut rng, s.dof_count);
        let coeffs = s.interpolate(|p| {
            let v = m.vertices.iter().position(|q| q == p).unwrap();
            [0, 1, 2].map(|c| data[s.vertex_dof(v, c)])
        });
        prop_assert_eq!(&coeffs, &data);
        for k in 0..m.num_tets() {
            let g = TetGeometry::new(m.tet_vertices(k));
            for (i, &v) in m.tets[k].iter().enumerate() {
                let mut b = [0.0; 4];
                b[i] = 1.0;
                let val = s.eval(&coeffs, k, &g, &b);
                for c in 0..3 {
                    prop_assert!((val[c] - data[s.vertex_dof(v, c)]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn constraint_application_idempotent_and_order_free(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = FeSpace::new(mesh(2), SpaceKind::VectorP1Bubble);
        let walls = dirichlet_constraints(&s, &[FaceTag::X0, FaceTag::Y1], |_| [0.0; 3]).unwrap();
        let normal = normal_trace_constraints(&s).unwrap();
        let mut ab = walls.clone();
        ab.merge(&normal).unwrap();
        let mut ba = normal.clone();
        ba.merge(&walls).unwrap();
        prop_assert_eq!(&ab, &ba);
        let mut x = random_vec(&mut rng, s.dof_count);
        ab.apply_to(&mut x);
        let once = x.clone();
        ab.apply_to(&mut x);
        prop_assert_eq!(&once, &x);
        prop_assert!(ab.iter().all(|(d, _)| !s.is_bubble_dof(d)));
    }

    #[test]
    fn triplet_assembly_matches_dense(seed in any::<u64>(), rows in 1usize..12, cols in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = vec![vec![0.0; cols]; rows];
        let trip: Vec<(usize, usize, f64)> = (0..rng.gen_range(0..60))
            .map(|_| {
                let (i, j, v) = (rng.gen_range(0..rows), rng.gen_range(0..cols), rng.gen_range(-1.0..1.0));
                dense[i][j] += v;
                (i, j, v)
            })
            .collect();
        let m = SparseMat::from_triplets(rows, cols, &trip);
        for i in 0..rows {
            let (c, _) = m.row(i);
            prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
            for j in 0..cols {
                prop_assert!((m.get(i, j) - dense[i][j]).abs() < 1e-14);
            }
        }
        prop_assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn elimination_keeps_symmetry(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = mesh(2);
        let s = FeSpace::new(m.clone(), SpaceKind::VectorP1);
        let a = Assembler::new(m).assemble_aw(&s, &ModelParams::convergence());
        let rhs = random_vec(&mut rng, s.dof_count);
        let cs = dirichlet_constraints(&s, &FaceTag::ALL, |p| [p[0], 1.0 + p[1] * p[2], -0.5]).unwrap();
        let sys = apply_constraints(LinearSystem::new(a, rhs).unwrap(), &cs).unwrap();
        prop_assert_eq!(sys.matrix.symmetry_defect(), 0.0);
        let again = apply_constraints(sys.clone(), &cs).unwrap();
        prop_assert_eq!(&again.matrix, &sys.matrix);
        prop_assert_eq!(&again.rhs, &sys.rhs);
        let (x, stats) = Solver::new(direct()).solve(&sys).unwrap();
        prop_assert!(stats.residual <= 1e-10);
        for (d, v) in cs.iter() {
            prop_assert_eq!(x[d], v);
        }
    }

    #[test]
    fn convection_skew_and_coupling_cancel(seed in any::<u64>(), kind in any_kind(), prm in any_params()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = mesh(2);
        let asm = Assembler::new(m.clone());
        let s = FeSpace::new(m, kind);
        let n = s.dof_count;
        let (w, v, bp, b, u) = (
            random_vec(&mut rng, n),
            random_vec(&mut rng, n),
            random_vec(&mut rng, n),
            random_vec(&mut rng, n),
            random_vec(&mut rng, n),
        );
        let conv = asm.assemble_convection(&s, &s, &w);
        prop_assert!(conv.bilinear(&v, &v).abs() <= 1e-12 * conv.frobenius_norm() * norm2(&v).powi(2));
        let l = asm.assemble_lorentz(&s, &s, &bp, &prm);
        let mind = asm.assemble_induction_coupling(&s, &s, &bp);
        let (x, y) = (l.bilinear(&u, &b), prm.s * mind.bilinear(&b, &u));
        prop_assert!((x - y).abs() <= 1e-12 * x.abs(), "{x} {y}");
        for a in [asm.assemble_af(&s, &prm), asm.assemble_aw(&s, &prm), asm.assemble_ab(&s, &prm)] {
            prop_assert_eq!(a.symmetry_defect(), 0.0);
        }
    }

    #[test]
    fn step_rounding(t in 0.1..20.0f64, dt in 0.01..2.0f64) {
        let (n, adj) = step_count(t, dt).unwrap();
        prop_assert!(n >= 1);
        prop_assert!((n as f64 * adj - t).abs() <= 1e-12 * t);
        if t / dt >= 1.0 {
            prop_assert!((adj - dt).abs() <= 0.5 * dt / n as f64 + 1e-12);
        }
    }

    #[test]
    fn exact_fields_are_solenoidal_with_boundary_traces(x in 0.0..1.0f64, y in 0.0..1.0f64, z in 0.0..1.0f64, t in 0.0..2.0f64) {
        let ex = ManufacturedSolution;
        let gu = ex.velocity_grad(&[x, y, z], t);
        let gb = ex.magnetic_grad(&[x, y, z], t);
        prop_assert!((gu[0][0] + gu[1][1] + gu[2][2]).abs() < 1e-12);
        prop_assert!((gb[0][0] + gb[1][1] + gb[2][2]).abs() < 1e-12);
        for face in FaceTag::ALL {
            let mut p = [x, y, z];
            p[face.axis()] = face.level();
            let u = ex.velocity(&p, t);
            let w = ex.angular(&p, t);
            let b = ex.magnetic(&p, t);
            prop_assert!(u.iter().chain(&w).all(|v| v.abs() < 1e-12));
            prop_assert!(b[face.axis()].abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Unforced runs from random data: energy nonnegative and, for the
    /// coupled schemes, nonincreasing; constraints and time stamps exact.
    #[test]
    fn unforced_steps(seed in any::<u64>(), id in any_scheme(), dt in 0.05..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pb = Arc::new(Problem::new(mesh(2), id, ModelParams::stability(), BoundarySetup::NoSlip, None).unwrap());
        let mut st = Stepper::new(pb.clone(), direct());
        let nv = pb.num_vector_dofs();
        let s0 = st
            .initial_state(random_vec(&mut rng, nv), random_vec(&mut rng, nv), random_vec(&mut rng, nv), dt)
            .unwrap();
        let mut energies = vec![st.energy(&s0)];
        let (mut s, _) = if id.is_crank_nicolson() { st.bootstrap_cn(&s0, None).unwrap() } else { st.step(&s0).unwrap() };
        for _ in 0..3 {
            energies.push(st.energy(&s));
            for (d, v) in pb.constraints_u.iter() {
                prop_assert_eq!(s.current.u.values[d], v);
            }
            for (d, v) in pb.constraints_b.iter() {
                prop_assert_eq!(s.current.b.values[d], v);
            }
            prop_assert!((s.time() - s.step as f64 * dt).abs() <= 1e-12 * s.time());
            s = st.step(&s).unwrap().0;
        }
        prop_assert!(energies.iter().all(|&e| e >= 0.0));
        if id.time != mmfem::schemes::TimeDiscretization::EulerDecoupled {
            for w in energies.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "{energies:?}");
            }
        }
    }
}

#[test]
fn error_norms_stable_under_quadrature_degree() {
    use mmfem::experiments::{run_convergence, ExperimentConfig, ExperimentKind};
    let mut out = Vec::new();
    for degree in [13, 15, 17] {
        let mut c = ExperimentConfig::new(ExperimentKind::Convergence, "euler-stabilized".parse().unwrap());
        c.mesh_sizes = vec![4];
        c.error_degree = degree;
        c.solver = direct();
        let t = run_convergence(&c).unwrap();
        let e = &t.successful().next().unwrap().errors;
        out.push([e.e_u, e.e_b, e.e_w, e.e_p]);
    }
    for row in &out[1..] {
        for (a, b) in row.iter().zip(&out[0]) {
            assert!((a - b).abs() <= 1e-8 * b, "{a} {b}");
        }
    }
}

#[test]
fn continuity_block_residual_conforming() {
    let prm = ModelParams::convergence();
    let pb = Arc::new(
        Problem::new(
            mesh(2),
            "decoupled-conforming".parse().unwrap(),
            prm,
            BoundarySetup::NoSlip,
            Some(Arc::new(mmfem::schemes::ManufacturedForcing { params: prm })),
        )
        .unwrap(),
    );
    let ex = ManufacturedSolution;
    let sp = &pb.spaces;
    let mut st = Stepper::new(pb.clone(), direct());
    let mut s = st
        .initial_state(
            sp.velocity.interpolate(|x| ex.velocity(x, 0.0)),
            sp.magnetic.interpolate(|x| ex.magnetic(x, 0.0)),
            sp.angular.interpolate(|x| ex.angular(x, 0.0)),
            0.25,
        )
        .unwrap();
    for _ in 0..3 {
        s = st.step(&s).unwrap().0;
        let r = pb.div.mul_vec(&s.current.u.values);
        assert!(norm2(&r) <= 1e-9 * pb.div.frobenius_norm() * norm2(&s.current.u.values));
    }
}

#[test]
fn empty_constraint_set_is_noop() {
    let a = SparseMat::identity(3);
    let sys = LinearSystem::new(a, vec![1.0, 2.0, 3.0]).unwrap();
    let out = apply_constraints(sys.clone(), &ConstraintSet::new()).unwrap();
    assert_eq!(out.matrix, sys.matrix);
    assert_eq!(out.rhs, sys.rhs);
}
