use mongeampere_core::bform::{BarycentricPoint, TriangleGeometry};
use mongeampere_core::linalg::{norm2, CsrMatrix, KktSolver};
use mongeampere_core::mesh::{build_disk_mesh, build_square_mesh, refine_uniform};
use mongeampere_core::problems::builtin;
use mongeampere_core::spline_space::{boundary_constraints, project_to_space, SplineFunction, SplineSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exp_radial(x: f64, y: f64) -> f64 {
    (0.5 * (x * x + y * y)).exp()
}

/// Minimum-norm coefficient vector satisfying all constraints for data `g`.
fn constrained_fit<'a>(space: &'a SplineSpace, g: &dyn Fn(f64, f64) -> f64) -> (SplineFunction<'a>, (f64, f64)) {
    let rows = space.all_rows();
    let (_, gb) = boundary_constraints(space, g);
    let mut rhs = vec![0.0; space.smoothness_rows().nrows()];
    rhs.extend(gb);
    let solver = KktSolver::new(&CsrMatrix::identity(space.dof_count()), &rows, Some(space.domain_points())).unwrap();
    let sol = solver.solve(&vec![0.0; space.dof_count()], &rhs).unwrap();
    (space.function(sol.c), sol.residuals)
}

#[test]
fn boundary_and_smoothness_rows_are_jointly_consistent() {
    let kink = |x: f64, _y: f64| (x - 0.5).abs();
    for (mesh, label) in [(build_square_mesh(4), "square"), (build_disk_mesh(3), "disk")] {
        for d in [3, 4, 5] {
            let space = SplineSpace::new(mesh.clone(), d).unwrap();
            for g in [&exp_radial as &dyn Fn(f64, f64) -> f64, &kink] {
                let (_, (e1, e2)) = constrained_fit(&space, g);
                assert!(e1 <= 1e-10 && e2 <= 1e-10, "{label} d={d}: {e1:e} {e2:e}");
            }
        }
    }
}

#[test]
fn random_conforming_functions_are_c1() {
    let space = SplineSpace::new(build_square_mesh(4), 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let c: Vec<f64> = (0..space.dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let r = space.smoothness_rows();
    let s = KktSolver::new(&CsrMatrix::identity(space.dof_count()), r, Some(space.domain_points())).unwrap();
    let projected = s.solve(&c, &vec![0.0; r.nrows()]).unwrap().c;
    let u = space.function(projected);
    assert!(u.is_conforming());
    let scale = norm2(u.coeffs());
    let (jv, jg) = u.max_edge_jumps(12);
    assert!(jv <= 1e-10 * scale, "value jump {jv:e}");
    assert!(jg <= 1e-9 * scale, "gradient jump {jg:e}");
}

#[test]
fn random_edges_have_matching_traces() {
    let space = SplineSpace::new(build_disk_mesh(4), 5).unwrap();
    let (u, _) = constrained_fit(&space, &exp_radial);
    let mesh = space.mesh();
    let interior: Vec<_> = mesh.edges().iter().filter(|e| !e.is_boundary()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scale = norm2(u.coeffs());
    for _ in 0..20 {
        let e = interior[rng.gen_range(0..interior.len())];
        let [t, tp] = e.triangles.map(Option::unwrap);
        let (pa, pb) = (mesh.vertices()[e.vertices[0]], mesh.vertices()[e.vertices[1]]);
        for _ in 0..10 {
            let s: f64 = rng.gen_range(0.0..1.0);
            let p = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let (b, bp) = (mesh.barycentric(t, p), mesh.barycentric(tp, p));
            assert!((u.eval_in(t, b) - u.eval_in(tp, bp)).abs() <= 1e-10 * scale);
            let (g, gp) = (u.grad_in(t, b), u.grad_in(tp, bp));
            assert!((g[0] - gp[0]).hypot(g[1] - gp[1]) <= 1e-9 * scale);
        }
    }
}

fn max_trace_error(space: &SplineSpace) -> f64 {
    let (u, _) = constrained_fit(space, &exp_radial);
    let mesh = space.mesh();
    let mut worst: f64 = 0.0;
    for &e in mesh.boundary_edges() {
        let edge = mesh.edges()[e];
        let t = edge.triangles[0].unwrap();
        let (pa, pb) = (mesh.vertices()[edge.vertices[0]], mesh.vertices()[edge.vertices[1]]);
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            let p = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let b = mesh.barycentric(t, p);
            worst = worst.max((u.eval_in(t, b) - exp_radial(p[0], p[1])).abs());
        }
    }
    worst
}

#[test]
fn boundary_trace_converges_at_high_order() {
    let coarse = SplineSpace::new(build_square_mesh(4), 5).unwrap();
    let fine = SplineSpace::new(build_square_mesh(8), 5).unwrap();
    let (ec, ef) = (max_trace_error(&coarse), max_trace_error(&fine));
    assert!(ec / ef >= 32.0 * 0.8, "ratio {}", ec / ef);
}

#[test]
fn projection_reproduces_polynomials() {
    let space = SplineSpace::new(build_square_mesh(3), 5).unwrap();
    let q = space.clone();
    let u = project_to_space(&q, &|x, y| x * x + y * y).unwrap();
    assert!(u.is_conforming());
    let p5 = |x: f64, y: f64| x.powi(5) - 3.0 * x * x * y * y * y + y.powi(4) - x;
    let v = project_to_space(&space, &p5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        assert!((u.eval(p).unwrap() - (p[0] * p[0] + p[1] * p[1])).abs() <= 1e-11);
        assert!((v.eval(p).unwrap() - p5(p[0], p[1])).abs() <= 1e-10);
    }
}

fn l2_error(u: &SplineFunction<'_>, exact: &dyn Fn(f64, f64) -> f64) -> f64 {
    let rule = mongeampere_core::bform::quadrature_for(14).unwrap();
    let mesh = u.space().mesh();
    let mut s = 0.0;
    for t in 0..mesh.n_triangles() {
        let geom = TriangleGeometry::new(mesh.triangle_points(t));
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let x = geom.to_cartesian(p.0);
            let e = u.local(t).eval(BarycentricPoint(p.0)) - exact(x[0], x[1]);
            s += w * geom.area * e * e;
        }
    }
    s.sqrt()
}

#[test]
fn projection_error_drops_at_optimal_rate() {
    let m1 = build_square_mesh(2);
    let m2 = refine_uniform(&m1);
    let s1 = SplineSpace::new(m1, 5).unwrap();
    let s2 = SplineSpace::new(m2, 5).unwrap();
    let e1 = l2_error(&project_to_space(&s1, &exp_radial).unwrap(), &exp_radial);
    let e2 = l2_error(&project_to_space(&s2, &exp_radial).unwrap(), &exp_radial);
    assert!(e1 / e2 >= 32.0 * 0.8, "ratio {}", e1 / e2);
}

#[test]
fn builtin_boundary_data_is_pinned() {
    let p = builtin("test1").unwrap();
    let space = SplineSpace::new(build_square_mesh(2), 5).unwrap();
    let (rows, g) = boundary_constraints(&space, &*p.g);
    assert_eq!(rows.nrows(), g.len());
    assert!(g.iter().all(|v| v.is_finite() && *v >= 1.0 - 1e-12));
}
