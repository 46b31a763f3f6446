use mongeampere_core::assembly::{cofactor2, Assembler};
use mongeampere_core::bform::{quadrature_for, Sym2, MAX_QUADRATURE_DEGREE};
use mongeampere_core::linalg::{
    dot, norm2, solve_augmented_lagrangian, solve_kkt, ALConfig, CsrMatrix, KktSolver, SaddleProblem, TripletMatrix,
};
use mongeampere_core::mesh::{build_disk_mesh, build_square_mesh};
use mongeampere_core::spline_space::SplineSpace;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Projects random coefficients onto the kernel of `rows`.
fn random_in_kernel(space: &SplineSpace, rows: &CsrMatrix, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let c = random_vec(rng, space.dof_count());
    let s = KktSolver::new(&CsrMatrix::identity(space.dof_count()), rows, Some(space.domain_points())).unwrap();
    s.solve(&c, &vec![0.0; rows.nrows()]).unwrap().c
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[test]
fn determinant_is_half_cofactor_contraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let a = Sym2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let half = 0.5 * cofactor2(a).frobenius(&a);
        let scale = a.frobenius(&a).max(1.0);
        assert!((a.det() - half).abs() <= 1e-13 * scale, "{a:?}");
    }
}

#[test]
fn quadrature_matches_factorial_moments() {
    for degree in 1..=MAX_QUADRATURE_DEGREE {
        let rule = quadrature_for(degree).unwrap();
        assert!(rule.exactness_degree >= degree);
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-13);
        for a in 0..=degree {
            for b in 0..=degree - a {
                let c = degree - a - b;
                let got: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p.0[0].powi(a as i32) * p.0[1].powi(b as i32) * p.0[2].powi(c as i32))
                    .sum();
                let want = 2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(degree + 2);
                assert!((got - want).abs() <= 1e-12 * want, "degree {degree} ({a},{b},{c}): {got:e} vs {want:e}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn conforming_splines_have_no_jumps(seed in any::<u64>(), m in 2usize..5, d in 3usize..6) {
        let space = SplineSpace::new(build_square_mesh(m), d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = space.function(random_in_kernel(&space, space.smoothness_rows(), &mut rng));
        let scale = norm2(u.coeffs()).max(1.0);
        let (jv, jg) = u.max_edge_jumps(9);
        prop_assert!(jv <= 1e-10 * scale && jg <= 1e-10 * scale * m as f64, "jumps {jv:e} {jg:e}");
    }

    #[test]
    fn divergence_form_matches_determinant(seed in any::<u64>(), disk in any::<bool>(), d in 3usize..6) {
        let mesh = if disk { build_disk_mesh(2) } else { build_square_mesh(3) };
        let space = SplineSpace::new(mesh, d).unwrap();
        let a = Assembler::new(&space).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_in_kernel(&space, space.smoothness_rows(), &mut rng);
        let psi = random_in_kernel(&space, &space.all_rows(), &mut rng);
        let det = a.det_load(&v);
        let div = a.residual(&v, &|_, _| 0.0);
        let (lhs, rhs) = (dot(&psi, &det), dot(&psi, &div));
        let scale = norm2(&psi) * norm2(&det);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale, "{lhs:e} vs {rhs:e}");
    }

    #[test]
    fn residual_derivative_is_minus_cofactor_stiffness(seed in any::<u64>(), d in 3usize..6) {
        let space = SplineSpace::new(build_square_mesh(2), d).unwrap();
        let a = Assembler::new(&space).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_in_kernel(&space, space.smoothness_rows(), &mut rng);
        let theta = random_in_kernel(&space, &space.all_rows(), &mut rng);
        let p = random_in_kernel(&space, &space.all_rows(), &mut rng);
        let f = |x: f64, y: f64| 1.0 + x * y;
        let eps = 1e-5;
        let shifted = |s: f64| -> Vec<f64> { u.iter().zip(&theta).map(|(a, b)| a + s * b).collect() };
        let fd = (dot(&p, &a.residual(&shifted(eps), &f)) - dot(&p, &a.residual(&shifted(-eps), &f))) / (2.0 * eps);
        let exact = -dot(&p, &a.cof_stiffness(&u).matvec(&theta));
        prop_assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1e-12), "{fd:e} vs {exact:e}");
    }

    #[test]
    fn kkt_and_augmented_lagrangian_agree(seed in any::<u64>(), n in 20usize..80, frac in 0.1f64..0.4) {
        let m = ((n as f64) * frac) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = TripletMatrix::new(n, n);
        for i in 0..n {
            for _ in 0..3 {
                b.push(i, rng.gen_range(0..n), rng.gen_range(-1.0..1.0));
            }
        }
        let k = b.to_csr().gram().add_scaled(1.0, &CsrMatrix::identity(n), 0.1);
        let mut r = TripletMatrix::new(m, n);
        for i in 0..m {
            r.push(i, i, 1.0);
            r.push(i, rng.gen_range(m..n), rng.gen_range(-1.0..1.0));
        }
        let p = SaddleProblem::new(k, random_vec(&mut rng, n), r.to_csr(), random_vec(&mut rng, m)).unwrap();
        let (c, _) = solve_kkt(&p).unwrap();
        let al = solve_augmented_lagrangian(&p, ALConfig::default()).unwrap();
        let diff: Vec<f64> = c.iter().zip(&al.c).map(|(a, b)| a - b).collect();
        prop_assert!(norm2(&diff) <= 1e-8 * norm2(&c).max(1.0));
    }
}
