//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use mongeampere::WallClock;
use mongeampere_core::assembly::{cofactor2, Assembler};
use mongeampere_core::bform::{quadrature_for, Sym2, MAX_QUADRATURE_DEGREE};
use mongeampere_core::fd_oracle::{compare_to_spline, fd_march};
use mongeampere_core::iterate::{convexity_monitor, run, IterateConfig, IterationOutcome, Method};
use mongeampere_core::linalg::{
    dot, norm2, solve_augmented_lagrangian, solve_kkt, ALConfig, CsrMatrix, KktSolver, SaddleProblem, TripletMatrix,
};
use mongeampere_core::mesh::{build_disk_mesh, build_square_mesh};
use mongeampere_core::problems::{builtin, error_norms, rate, ErrorNorms, ExactSolution, ProblemSpec};
use mongeampere_core::spline_space::{SplineFunction, SplineSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn outcome<'s>(space: &'s SplineSpace, p: &ProblemSpec, cfg: &IterateConfig) -> IterationOutcome<'s> {
    run(space, &*p.f, &*p.g, cfg, &WallClock::new())
}

fn zero_exact() -> ExactSolution {
    ExactSolution {
        u: Box::new(|_, _| 0.0),
        grad: Box::new(|_, _| [0.0; 2]),
        hess: Box::new(|_, _| Sym2::default()),
    }
}

/// Full H¹ norm of `a − b`.
fn h1_distance(a: &SplineFunction<'_>, b: &SplineFunction<'_>) -> f64 {
    let diff: Vec<f64> = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x - y).collect();
    error_norms(&a.space().function(diff), &zero_exact()).unwrap().h1
}

fn failure(o: &IterationOutcome<'_>) -> String {
    o.error.as_ref().map_or_else(String::new, |e| format!(" ({e})"))
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let p = builtin("test1").unwrap();
    let space = SplineSpace::new(build_square_mesh(4), 5).unwrap();
    let cfgs = [
        IterateConfig::new(Method::Newton),
        IterateConfig::new(Method::PtcLaplace).with_nu(1.0),
        IterateConfig::new(Method::MarchLaplace).with_nu(50.0).with_max_iter(2000),
    ];
    let outs: Vec<_> = cfgs.iter().map(|c| outcome(&space, &p, c)).collect();
    if let Some(o) = outs.iter().find(|o| o.error.is_some()) {
        return Verdict::new(false, format!("a method failed{}", failure(o)));
    }
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            worst = worst.max(h1_distance(&outs[i].solution, &outs[j].solution));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(worst <= 1e-8 && secs <= 120.0, format!("max pairwise H1 distance {worst:.2e}, {secs:.1} s"))
}

fn criterion_2() -> Verdict {
    let p = builtin("test1").unwrap();
    let space = SplineSpace::new(build_square_mesh(4), 5).unwrap();
    let o = outcome(&space, &p, &IterateConfig::new(Method::Newton).with_max_iter(8));
    let r = o.trace.residuals();
    let converged = o.error.is_none() && o.trace.last_residual() < 1e-10;
    let dec: Vec<f64> = r.windows(2).map(|w| (w[0] / w[1]).log10()).collect();
    let last = &dec[dec.len().saturating_sub(3)..];
    let doubling = last.len() == 3 && last.windows(2).all(|w| w[1] >= 2.0 * w[0]);
    let shown: Vec<String> = r.iter().map(|v| format!("{v:.2e}")).collect();
    let ratios: Vec<String> = last.windows(2).map(|w| format!("{:.3}", w[1] / w[0])).collect();
    Verdict::new(
        converged && doubling,
        format!(
            "{} steps, residuals [{}], decrement ratios [{}]",
            o.trace.steps(),
            shown.join(", "),
            ratios.join(", ")
        ),
    )
}

/// Least-squares slope of `ln r` over the last `n` residuals, as a ratio.
fn geometric_ratio(r: &[f64], n: usize) -> f64 {
    let tail = &r[r.len().saturating_sub(n)..];
    let m = tail.len() as f64;
    let xs: Vec<f64> = (0..tail.len()).map(|k| k as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|v| v.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxy / sxx).exp()
}

fn criteria_3_and_4() -> (Verdict, Verdict) {
    let start = Instant::now();
    let p = builtin("test1").unwrap();
    let exact = p.exact.as_ref().unwrap();
    let cfg = IterateConfig::new(Method::MarchLaplace).with_nu(50.0).with_max_iter(2000);
    let mut levels: Vec<(f64, ErrorNorms)> = Vec::new();
    let mut ratios = Vec::new();
    for m in [2, 4, 8] {
        let space = SplineSpace::new(build_square_mesh(m), 5).unwrap();
        let o = outcome(&space, &p, &cfg);
        if o.error.is_some() {
            let v = Verdict::new(false, format!("h = 1/{m} failed{}", failure(&o)));
            return (v, Verdict::new(false, "criterion-3 runs failed"));
        }
        ratios.push(geometric_ratio(&o.trace.residuals(), 50));
        levels.push((1.0 / m as f64, error_norms(&o.solution, exact).unwrap()));
    }
    let secs = start.elapsed().as_secs_f64();
    let [(hp, ep), (h, e)] = [levels[1], levels[2]];
    let (r1, r2) = (rate(ep.h1, e.h1, hp, h), rate(ep.h2, e.h2, hp, h));
    let l2 = levels[1].1.l2;
    let band = (1.1504e-7 / 5.0..=5.0 * 1.1504e-7).contains(&l2);
    let c3 = Verdict::new(
        r1 >= 4.3 && r2 >= 3.5 && band && secs <= 600.0,
        format!("H1 rate {r1:.2}, H2 rate {r2:.2}, L2(h = 1/4) {l2:.3e}, {secs:.1} s"),
    );
    let shown: Vec<String> = ratios.iter().map(|s| format!("{s:.4}")).collect();
    let c4 = Verdict::new(ratios.iter().all(|&s| s < 1.0), format!("fitted ratios [{}]", shown.join(", ")));
    (c3, c4)
}

fn criterion_5() -> Verdict {
    let p = builtin("test4").unwrap();
    let exact = p.exact.as_ref().unwrap();
    let space = SplineSpace::new(build_square_mesh(8), 3).unwrap();
    let runs = [
        (IterateConfig::new(Method::Newton), 3e-3),
        (IterateConfig::new(Method::PtcLaplace), 3e-3),
        (IterateConfig::new(Method::MarchLaplace).with_nu(4.5).with_max_iter(2000), 1.5e-3),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (cfg, bound) in runs {
        let o = outcome(&space, &p, &cfg);
        match o.error {
            None => {
                let l2 = error_norms(&o.solution, exact).unwrap().l2;
                pass &= l2 <= bound;
                parts.push(format!("{} L2 {l2:.3e} (bound {bound:.1e})", cfg.method));
            }
            Some(_) => {
                pass = false;
                parts.push(format!(
                    "{} nu = {} did not converge, last residual {:.3e}",
                    cfg.method,
                    cfg.nu,
                    o.trace.last_residual()
                ));
            }
        }
    }
    Verdict::new(pass, parts.join("; "))
}

fn criterion_6() -> Verdict {
    let p = builtin("test3").unwrap();
    let space = SplineSpace::new(build_square_mesh(16), 5).unwrap();
    let base = IterateConfig::new(Method::PtcLaplace).with_nu(7.5);
    let mut pass = true;
    let mut parts = Vec::new();
    for (cfg, label) in [(base, "convex"), (base.concave(), "concave")] {
        let o = outcome(&space, &p, &cfg);
        match &o.error {
            None => {
                let c = convexity_monitor(&o.solution).unwrap();
                let ok = if label == "convex" { c.min_eig >= -1e-6 } else { c.max_eig <= 1e-6 };
                pass &= ok;
                parts.push(format!("{label}: min eig {:.3e}, max eig {:.3e}", c.min_eig, c.max_eig));
            }
            Some(e) => {
                pass = false;
                parts.push(format!("{label}: {e}"));
            }
        }
    }
    Verdict::new(pass, parts.join("; "))
}

fn criterion_7() -> Verdict {
    let p = builtin("quadratic").unwrap();
    let exact = p.exact.as_ref().unwrap();
    let space = SplineSpace::new(build_square_mesh(4), 5).unwrap();
    let mut worst: f64 = 0.0;
    for method in Method::ALL.into_iter().filter(|&m| m != Method::MarchMass) {
        let o = outcome(&space, &p, &IterateConfig::new(method).with_max_iter(5000));
        if o.error.is_some() {
            return Verdict::new(false, format!("{method} failed{}", failure(&o)));
        }
        let e = error_norms(&o.solution, exact).unwrap();
        worst = worst.max(e.l2).max(e.h1).max(e.h2);
    }
    Verdict::new(worst <= 1e-9, format!("largest error norm {worst:.2e}"))
}

fn random_in_kernel(space: &SplineSpace, rows: &CsrMatrix, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let c: Vec<f64> = (0..space.dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s = KktSolver::new(&CsrMatrix::identity(space.dof_count()), rows, Some(space.domain_points())).unwrap();
    s.solve(&c, &vec![0.0; rows.nrows()]).unwrap().c
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failed = Vec::new();

    let det_ok = (0..1000).all(|_| {
        let a = Sym2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        (a.det() - 0.5 * cofactor2(a).frobenius(&a)).abs() <= 1e-13 * a.frobenius(&a).max(1.0)
    });
    if !det_ok {
        failed.push("determinant");
    }

    let quad_ok = (1..=MAX_QUADRATURE_DEGREE).all(|n| {
        let rule = quadrature_for(n).unwrap();
        (0..=n).all(|a| {
            (0..=n - a).all(|b| {
                let c = n - a - b;
                let got: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p.0[0].powi(a as i32) * p.0[1].powi(b as i32) * p.0[2].powi(c as i32))
                    .sum();
                let want = 2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(n + 2);
                (got - want).abs() <= 1e-12 * want
            })
        })
    });
    if !quad_ok {
        failed.push("quadrature");
    }

    let space = SplineSpace::new(build_square_mesh(3), 5).unwrap();
    let u = space.function(random_in_kernel(&space, space.smoothness_rows(), &mut rng));
    let scale = norm2(u.coeffs()).max(1.0);
    let (jv, jg) = u.max_edge_jumps(9);
    if jv > 1e-10 * scale || jg > 3e-10 * scale {
        failed.push("C1 jumps");
    }

    let disk = SplineSpace::new(build_disk_mesh(2), 4).unwrap();
    let a = Assembler::new(&disk).unwrap();
    let v = random_in_kernel(&disk, disk.smoothness_rows(), &mut rng);
    let psi = random_in_kernel(&disk, &disk.all_rows(), &mut rng);
    let det = a.det_load(&v);
    let (lhs, rhs) = (dot(&psi, &det), dot(&psi, &a.residual(&v, &|_, _| 0.0)));
    if (lhs - rhs).abs() > 1e-10 * norm2(&psi) * norm2(&det) {
        failed.push("divergence form");
    }

    let a = Assembler::new(&space).unwrap();
    let u = random_in_kernel(&space, space.smoothness_rows(), &mut rng);
    let theta = random_in_kernel(&space, &space.all_rows(), &mut rng);
    let p = random_in_kernel(&space, &space.all_rows(), &mut rng);
    let f = |x: f64, y: f64| 1.0 + x * y;
    let eps = 1e-5;
    let at = |s: f64| -> Vec<f64> { u.iter().zip(&theta).map(|(a, b)| a + s * b).collect() };
    let fd = (dot(&p, &a.residual(&at(eps), &f)) - dot(&p, &a.residual(&at(-eps), &f))) / (2.0 * eps);
    let exact = -dot(&p, &a.cof_stiffness(&u).matvec(&theta));
    if (fd - exact).abs() > 1e-5 * exact.abs() {
        failed.push("residual Jacobian");
    }

    let (n, m) = (60, 15);
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
    let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let d: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let prob = SaddleProblem::new(k, rhs, r.to_csr(), d).unwrap();
    let (c, _) = solve_kkt(&prob).unwrap();
    let al = solve_augmented_lagrangian(&prob, ALConfig::default()).unwrap();
    let diff: Vec<f64> = c.iter().zip(&al.c).map(|(a, b)| a - b).collect();
    if norm2(&diff) > 1e-8 * norm2(&c).max(1.0) {
        failed.push("KKT vs AL");
    }

    let secs = start.elapsed().as_secs_f64();
    let detail = if failed.is_empty() {
        format!("all six identities hold, {secs:.1} s")
    } else {
        format!("failed: {}", failed.join(", "))
    };
    Verdict::new(failed.is_empty() && secs < 60.0, detail)
}

fn criterion_9() -> Verdict {
    let p = builtin("test1").unwrap();
    let exact = &p.exact.as_ref().unwrap().u;
    let space = SplineSpace::new(build_square_mesh(8), 5).unwrap();
    let o = outcome(&space, &p, &IterateConfig::new(Method::Newton));
    if o.error.is_some() {
        return Verdict::new(false, format!("spline solve failed{}", failure(&o)));
    }
    let fd = |n| fd_march(&*p.f, &*p.g, n, 50.0, 1e-13, 100_000);
    let (g33, g65) = match (fd(33), fd(65)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Verdict::new(false, format!("finite differences failed ({e})")),
    };
    let diff = compare_to_spline(&g65, &o.solution);
    let ratio = g33.max_error(&**exact) / g65.max_error(&**exact);
    Verdict::new(
        diff <= 5e-4 && (3.2..=4.8).contains(&ratio),
        format!("discrepancy {diff:.3e}, self-convergence ratio {ratio:.3}"),
    )
}

fn criterion_10() -> Verdict {
    let p = builtin("test6").unwrap();
    let space = SplineSpace::new(build_square_mesh(16), 5).unwrap();
    let mut cfg = IterateConfig::new(Method::MarchLaplace).with_nu(50.0).with_max_iter(200);
    cfg.divergence_factor = f64::INFINITY;
    let o = outcome(&space, &p, &cfg);
    let r = o.trace.residuals();
    let finite = r.iter().all(|v| v.is_finite()) && o.solution.coeffs().iter().all(|v| v.is_finite());
    let (first, last) = (r[0], *r.last().unwrap());
    let stop = failure(&o);
    Verdict::new(
        finite && o.trace.steps() == 200 && last < first,
        format!("{} steps, residual {first:.3e} -> {last:.3e}{stop}", o.trace.steps()),
    )
}

fn main() -> ExitCode {
    let (c3, c4) = criteria_3_and_4();
    let verdicts = [
        criterion_1(),
        criterion_2(),
        c3,
        c4,
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    for (i, v) in verdicts.iter().enumerate() {
        println!("criterion {:2}: {} {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if verdicts.iter().all(|v| v.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
