//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=2,5` restricts the run to the listed criteria.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use neumann_mc::estimators::{
    bias_metrics, fit_slope, monte_carlo, monte_carlo_multi, sample_invariant_path, sample_invariant_uniform,
    tcheb_grid, tcheb_points, variance_scan, McSummary,
};
use neumann_mc::euler::{compatibility_residual, walk_euler};
use neumann_mc::geometry::Point2;
use neumann_mc::rng::stream_rng;
use neumann_mc::schemes::{consistency_defect, SchemeConfig, SchemeKind};
use neumann_mc::spectral::{
    build_basis, center_approx, center_exact, ideal_eigenvalues, node_traces, solve, LinearDrift,
};
use neumann_mc::walk::NullSink;
use neumann_mc::wos::{precompute_circle_table, walk_wos, CircleTable, WosConfig};
use neumann_mc::{builtin_problem, Coefficients, EulerConfig, Point, Problem, ProblemId, ScoreSink, Side, Square};

const ALPHAS: [f64; 3] = [1.0 / 3.0, 2.0 / 3.0, 1.0];
const MIXED_POINTS: [(f64, f64); 3] = [(0.8, 0.0), (0.0, 0.0), (-0.8, 0.0)];

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: usize, pass: bool, detail: &str, started: Instant) {
        if !pass {
            self.failures += 1;
        }
        println!(
            "criterion {id}: {} ({:.0} s) {detail}",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
}

fn mixed_problems() -> Vec<Problem> {
    ALPHAS.iter().map(|&a| builtin_problem(ProblemId::Mixed, a, 0.0, 0.0)).collect()
}

fn neumann_problems() -> Vec<Problem> {
    ALPHAS.iter().map(|&a| builtin_problem(ProblemId::PureNeumann, a, 0.0, 0.0)).collect()
}

/// Unit-disk table shared by the WOS criteria, cached between runs.
fn circle_table() -> CircleTable {
    let path: PathBuf = [env!("CARGO_TARGET_TMPDIR"), "acceptance_circle_table.bin"].iter().collect();
    if let Ok(t) = CircleTable::read_from(&path) {
        return t;
    }
    let t = precompute_circle_table(1e-4, 200_000, 20_000, 100, 2024).expect("table");
    t.write_to(&path).expect("cache table");
    t
}

/// Scores every problem along shared trajectories from `start`.
fn multi_euler(start: Point, problems: &[Problem], cfg: &EulerConfig<f64>, n: u64, seed: u64) -> Vec<McSummary> {
    let coeffs: Vec<&Coefficients> = problems.iter().map(|p| &p.coeffs).collect();
    let dom = problems[0].domain;
    monte_carlo_multi(n, coeffs.len(), seed, |rng, _, out| {
        let mut sink = ScoreSink::new(&coeffs);
        walk_euler(start, &dom, None, cfg, rng, &mut sink)?;
        out.copy_from_slice(&sink.scores);
        Ok(())
    })
    .expect("euler run")
}

fn multi_wos(
    start: Point,
    problems: &[Problem],
    cfg: &WosConfig<f64>,
    table: &CircleTable,
    n: u64,
    seed: u64,
) -> Vec<McSummary> {
    let coeffs: Vec<&Coefficients> = problems.iter().map(|p| &p.coeffs).collect();
    let dom = problems[0].domain;
    monte_carlo_multi(n, coeffs.len(), seed, |rng, _, out| {
        let mut sink = ScoreSink::new(&coeffs);
        walk_wos(start, &dom, cfg, table, rng, &mut sink)?;
        out.copy_from_slice(&sink.scores);
        Ok(())
    })
    .expect("wos run")
}

/// Mixed problem, Euler scheme at (δ, ξ) = (0.001, 0.001).
fn criterion_1(r: &mut Report) {
    let t = Instant::now();
    // (reported error, σ/√N) at (δ₃, ξ₃), indexed [point][alpha].
    let reference = [
        [(3.8e-4, 2.0e-3), (2.1e-4, 4.7e-3), (2.4e-3, 9.0e-3)],
        [(3.2e-3, 3.7e-3), (9.0e-3, 8.3e-3), (1.8e-2, 1.5e-2)],
        [(1.0e-3, 4.2e-3), (4.7e-3, 9.0e-3), (1.1e-2, 1.7e-2)],
    ];
    let problems = mixed_problems();
    let cfg = EulerConfig::new(0.001, 0.001, 100.0, 11).unwrap();
    let mut ok = true;
    let mut worst = String::new();
    let mut worst_ratio = 0.0;
    for (pi, &(x, y)) in MIXED_POINTS.iter().enumerate() {
        let p = Point::new(x, y);
        let s = multi_euler(p, &problems, &cfg, 50_000, 100 + pi as u64);
        for (ai, pr) in problems.iter().enumerate() {
            let (ref_err, ref_se) = reference[pi][ai];
            let err = (s[ai].mean - pr.exact_at(p)).abs();
            let bound = 5.0 * s[ai].std_error + 2.0 * ref_err;
            let se_ratio = s[ai].std_error / ref_se;
            let cell_ok = err <= bound && (0.5..=2.0).contains(&se_ratio);
            ok &= cell_ok;
            if err / bound > worst_ratio {
                worst_ratio = err / bound;
                worst = format!("alpha{} M{}: err {err:.2e} bound {bound:.2e} se {:.2e}", ai + 1, pi + 1, s[ai].std_error);
            }
            if !cell_ok {
                println!(
                    "  cell alpha{} M{}: err {err:.2e} bound {bound:.2e} se {:.2e} (reference {ref_se:.1e})",
                    ai + 1,
                    pi + 1,
                    s[ai].std_error
                );
            }
        }
    }
    r.line(1, ok, &format!("9 cells; tightest {worst}"), t);
}

/// Mixed problem, WOS with the one-sided, kinetic and F₂ schemes at h = 0.1.
fn criterion_2(r: &mut Report, table: &CircleTable) {
    let t = Instant::now();
    let problems = mixed_problems();
    let run = |kind| -> Vec<Vec<f64>> {
        let cfg = WosConfig::new(1e-6, 0.1, None, SchemeConfig::new(kind), 0).unwrap();
        MIXED_POINTS
            .iter()
            .enumerate()
            .map(|(pi, &(x, y))| {
                let p = Point::new(x, y);
                multi_wos(p, &problems, &cfg, table, 50_000, 200 + pi as u64)
                    .iter()
                    .zip(&problems)
                    .map(|(s, pr)| (s.mean - pr.exact_at(p)).abs())
                    .collect()
            })
            .collect()
    };
    let f3 = run(SchemeKind::OneSide3);
    let kin = run(SchemeKind::Kinetic);
    let f2 = run(SchemeKind::OneSide2);
    let wins = |e: &[Vec<f64>]| -> usize {
        e.iter()
            .flatten()
            .zip(f2.iter().flatten())
            .filter(|(a, b)| a < b)
            .count()
    };
    let (w3, wk) = (wins(&f3), wins(&kin));

    // Single-application consistency on u = eˣ cos y at a right-side point.
    let dom = Square::pure_neumann();
    let u = |p: Point| p.x.exp() * p.y.cos();
    let c = Coefficients::zero().with_neumann(std::sync::Arc::new(|b: Point, side: Side| {
        0.5 * Point::new(b.x.exp() * b.y.cos(), -b.x.exp() * b.y.sin()).dot(side.outward())
    }));
    let slope = |kind| {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h: &f64| {
                let e = consistency_defect(kind, Point::new(1.0, 0.3), Side::Right, h, &dom, &c, &u).unwrap();
                (h.ln(), e.abs().ln())
            })
            .collect();
        fit_slope(&pts).unwrap()
    };
    let s3 = slope(SchemeKind::OneSide3);
    // Defect per unit of local time (one application covers O(h) of it).
    let s1 = slope(SchemeKind::Fd1) - 1.0;
    let ok = w3 >= 8 && wk >= 8 && s3 >= 2.5 && (0.7..=1.3).contains(&s1);
    let max_err = |e: &[Vec<f64>]| e.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    r.line(
        2,
        ok,
        &format!(
            "oneside3 beats F2 in {w3}/9, kinetic in {wk}/9 (max err {:.1e} / {:.1e} vs {:.1e}); slopes oneside3 {s3:.2}, fd1 per local time {s1:.2}",
            max_err(&f3),
            max_err(&kin),
            max_err(&f2)
        ),
        t,
    );
}

/// Homogeneous pure Neumann problem: long-time mean and variance growth.
fn criterion_3(r: &mut Report) {
    let t = Instant::now();
    let pr = builtin_problem(ProblemId::HomogeneousNeumann, 0.0, 0.0, 0.0);
    let start = Point::new(-0.5, -0.5);
    let exact = 81.0 / 256.0 - 64.0 / 225.0;
    let c3 = 32768.0 / 33075.0;
    let times: Vec<f64> = (9..=16).map(f64::from).collect();
    let scan = variance_scan(&times, 1_000_000, 31, |t0| {
        let cfg = EulerConfig::new(0.005, 0.005, t0, 0)?;
        let pr = pr.clone();
        Ok(move |rng: &mut neumann_mc::rng::StreamRng, _| {
            let problems = [&pr.coeffs];
            let mut sink = ScoreSink::new(&problems);
            walk_euler(start, &pr.domain, None, &cfg, rng, &mut sink)?;
            Ok(sink.scores[0])
        })
    })
    .expect("variance scan");
    let pooled = scan.iter().map(|(_, s)| s.mean).sum::<f64>() / scan.len() as f64;
    let pts: Vec<(f64, f64)> = scan.iter().map(|(t, s)| (*t, s.variance)).collect();
    let slope = fit_slope(&pts).unwrap();
    let ok = (pooled - exact).abs() <= 0.005 && (slope - c3).abs() <= 0.1;
    r.line(
        3,
        ok,
        &format!("pooled mean {pooled:.5} (exact {exact:.5}), variance slope {slope:.4} (C3 {c3:.4})"),
        t,
    );
}

/// Grid bias metrics before and after refinement, Euler and WOS.
fn criterion_4(r: &mut Report, table: &CircleTable) {
    let t = Instant::now();
    let problems = neumann_problems();
    let grid = tcheb_grid(3);
    let metrics = |est: Vec<Vec<f64>>| -> Vec<(f64, f64)> {
        problems
            .iter()
            .enumerate()
            .map(|(a, pr)| {
                let v: Vec<f64> = est.iter().map(|s| s[a]).collect();
                let m = bias_metrics(&v, &|q| pr.exact_at(q), 3).unwrap();
                (m.a_bar, m.rho)
            })
            .collect()
    };
    let euler = |d: f64| {
        let cfg = EulerConfig::new(d, d, 10.0, 0).unwrap();
        metrics(
            grid.iter()
                .enumerate()
                .map(|(g, &p)| multi_euler(p, &problems, &cfg, 50_000, 400 + g as u64).iter().map(|s| s.mean).collect())
                .collect(),
        )
    };
    let wos = |h: f64| {
        let cfg = WosConfig::new(1e-6, h, Some(10.0), SchemeConfig::new(SchemeKind::OneSide3), 0).unwrap();
        metrics(
            grid.iter()
                .enumerate()
                .map(|(g, &p)| {
                    multi_wos(p, &problems, &cfg, table, 50_000, 500 + g as u64).iter().map(|s| s.mean).collect()
                })
                .collect(),
        )
    };
    let runs = [("euler", euler(0.01), euler(0.001)), ("wos", wos(0.1), wos(0.05))];
    let mut ok = true;
    let mut detail = String::new();
    for (name, coarse, fine) in &runs {
        for a in 0..3 {
            let (a1, r1) = coarse[a];
            let (a2, r2) = fine[a];
            ok &= a2.abs() < a1.abs();
            // Euler rho at alpha = 1/3 sits at the noise level; ordering is
            // required elsewhere.
            if !(*name == "euler" && a == 0) {
                ok &= r2 < r1;
            }
            if a == 0 {
                ok &= a1.abs() <= 0.05 && a2.abs() <= 0.05;
            }
            detail += &format!(
                "{name} alpha{}: a_bar {a1:.4} -> {a2:.4}, rho {r1:.4} -> {r2:.4}; ",
                a + 1
            );
        }
    }
    r.line(4, ok, detail.trim_end_matches("; "), t);
}

fn spectral_setup(pr: &Problem, degree: usize, seed: u64) -> Vec<neumann_mc::spectral::NodeTrace> {
    let cfg = EulerConfig::new(0.001, 0.001, 10.0, 0).unwrap();
    node_traces(&build_basis(degree).unwrap(), &pr.coeffs, &pr.domain, &cfg, 5000, seed).expect("traces")
}

/// Spectral solver, exact centering.
fn criterion_5(r: &mut Report, traces: &[Vec<neumann_mc::spectral::NodeTrace>; 2], pr: &Problem, t: Instant) {
    let exact = |p: Point| pr.exact_at(p);
    let s2 = solve(center_exact(build_basis(2).unwrap()).unwrap(), &traces[0], LinearDrift::default()).unwrap();
    let s4 = solve(center_exact(build_basis(4).unwrap()).unwrap(), &traces[1], LinearDrift::default()).unwrap();
    let err4 = s4.err1(&exact);
    let worst_integral = [2, 4, 6, 8]
        .iter()
        .flat_map(|&n| center_exact(build_basis(n).unwrap()).unwrap().exact_integrals())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let ok = err4 <= 1e-4 && s4.condition <= 50.0 && s2.condition <= 5.0 && worst_integral <= 1e-12;
    r.line(
        5,
        ok,
        &format!(
            "N=4 err1 {err4:.2e} kappa {:.2}; N=2 err1 {:.2e} kappa {:.2}; max |int Psi p| {worst_integral:.1e}",
            s4.condition,
            s2.err1(&exact),
            s2.condition
        ),
        t,
    );
}

/// Spectral solver, particle centering against iid uniform samples.
fn criterion_6(r: &mut Report, traces: &[Vec<neumann_mc::spectral::NodeTrace>; 2], pr: &Problem, t: Instant) {
    let exact = |p: Point| pr.exact_at(p);
    let mut rng = stream_rng(61, 0);
    let cloud = sample_invariant_uniform::<f64, _>(10_000, &mut rng).unwrap();
    let cb = center_approx(build_basis(4).unwrap(), &cloud).unwrap();
    let identity = cb.particle_averages(&cloud).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sol = solve(cb.clone(), &traces[1], LinearDrift::default()).unwrap();
    let err2 = sol.err2(&exact, &cloud);

    // Ideal matrix for a small cloud: one eigenvalue 1 − Σv, the rest 1.
    let small = sample_invariant_uniform::<f64, _>(200, &mut stream_rng(62, 0)).unwrap();
    let cbs = center_approx(build_basis(4).unwrap(), &small).unwrap();
    let (ev, lambda) = ideal_eigenvalues(&cbs);
    let mut dist: Vec<f64> = ev.iter().map(|(re, im)| ((re - 1.0).powi(2) + im * im).sqrt()).collect();
    dist.sort_by(f64::total_cmp);
    let odd = ev
        .iter()
        .map(|(re, _)| *re)
        .max_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
        .unwrap_or(f64::NAN);
    let eig_ok = ev.len() == cbs.len()
        && dist[..dist.len() - 1].iter().all(|d| *d < 1e-8)
        && (odd - lambda).abs() < 1e-10;
    let ok = err2 <= 1e-4 && identity <= 1e-12 && eig_ok;
    r.line(
        6,
        ok,
        &format!(
            "N=4 Q=10000 err2 {err2:.2e} (printed form {:.2e}) kappa {:.2}; centering identity {identity:.1e}; ideal eigenvalues ok={eig_ok} (lambda_N {lambda:.6})",
            sol.err2_printed(&exact, &cloud),
            sol.condition
        ),
        t,
    );
}

/// Convection-diffusion with a path-sampled invariant measure.
fn criterion_7(r: &mut Report) {
    let t = Instant::now();
    let (bx, by, alpha) = (0.2, 0.1, 0.3);
    let pr = builtin_problem(ProblemId::ConvectionDiffusion, alpha, bx, by);
    let exact = |p: Point| pr.exact_at(p);
    let drift = LinearDrift { bx, by };
    let mut rng = stream_rng(71, 0);
    let cloud = sample_invariant_path(&pr.coeffs, &pr.domain, 0.001, 10_000, &mut rng).unwrap();
    let mut out = Vec::new();
    for (degree, seed) in [(2, 72), (4, 73)] {
        let traces = spectral_setup(&pr, degree, seed);
        let cb = center_approx(build_basis(degree).unwrap(), &cloud).unwrap();
        let sol = solve(cb, &traces, drift).unwrap();
        out.push((sol.err2(&exact, &cloud), sol.condition));
    }
    let ok = out[1].0 <= 1e-4 && out[0].1 <= 10.0;
    r.line(
        7,
        ok,
        &format!(
            "N=4 err2 {:.2e} kappa {:.2}; N=2 err2 {:.2e} kappa {:.2}",
            out[1].0, out[1].1, out[0].0, out[0].1
        ),
        t,
    );
}

/// Property suite.
fn criterion_8(r: &mut Report, table: &CircleTable) {
    let t = Instant::now();
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let dom = Square::pure_neumann();

    // Reflection keeps every Euler step inside.
    let cfg = EulerConfig::new(0.05, 0.05, 5.0, 0).unwrap();
    let mut inside = true;
    for i in 0..200 {
        let mut rng = stream_rng(81, i);
        let mut x = Point::new(0.99, -0.99);
        for _ in 0..100 {
            x = neumann_mc::euler::euler_step(x, &Coefficients::zero(), &dom, cfg.delta, &mut rng).unwrap();
            inside &= dom.contains(x);
        }
    }
    checks.push(("reflection containment", inside));

    // f ≡ 1 scores T₀.
    let one = Coefficients::constant_source(1.0);
    let problems = [&one];
    let mut sink = ScoreSink::new(&problems);
    let cfg = EulerConfig::new(0.01, 0.01, 10.0, 0).unwrap();
    walk_euler(Point::new(0.2, 0.1), &dom, None, &cfg, &mut stream_rng(82, 0), &mut sink).unwrap();
    checks.push(("f = 1 scores T0", (sink.scores[0] - 10.0).abs() < 1e-9));

    // Mean exit time of the unit disk.
    let (m, se) = table.exit_time_stats();
    checks.push(("disk exit time r^2/2", (m - 0.5).abs() <= 3.0 * se));

    // Compatibility of the pure Neumann problems with the uniform density.
    let compat = neumann_problems()
        .iter()
        .map(|pr| compatibility_residual(&pr.coeffs, &pr.domain, &|_| 0.25).abs())
        .fold(0.0f64, f64::max);
    checks.push(("compatibility residual", compat < 1e-10));

    let r3 = 3f64.sqrt() / 2.0;
    let r2 = 2f64.sqrt() / 2.0;
    let close = |a: Vec<f64>, b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
    checks.push((
        "tcheb points",
        close(tcheb_points(1), &[0.0]) && close(tcheb_points(2), &[r2, -r2]) && close(tcheb_points(3), &[r3, 0.0, -r3]),
    ));

    // ā minimises the grid misfit.
    let exact = |p: Point2<f64>| p.x * p.y + p.x;
    let est: Vec<f64> = tcheb_grid(3).iter().enumerate().map(|(i, p)| exact(*p) + 0.1 + 0.01 * (i as f64).sin()).collect();
    let bm = bias_metrics(&est, &exact, 3).unwrap();
    let j = |a: f64| {
        tcheb_grid(3)
            .iter()
            .zip(&est)
            .map(|(p, v)| (v - exact(*p) - a).powi(2))
            .sum::<f64>()
            / 9.0
    };
    checks.push((
        "bias metrics stationarity",
        j(bm.a_bar) < j(bm.a_bar + 1e-4) && j(bm.a_bar) < j(bm.a_bar - 1e-4) && (j(bm.a_bar).sqrt() - bm.rho).abs() < 1e-14,
    ));

    // Seed determinism across worker counts.
    let pr = builtin_problem(ProblemId::PureNeumann, 1.0 / 3.0, 0.0, 0.0);
    let cfg = EulerConfig::new(0.01, 0.01, 2.0, 0).unwrap();
    let go = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                monte_carlo(3000, 83, |rng, _| {
                    let problems = [&pr.coeffs];
                    let mut sink = ScoreSink::new(&problems);
                    walk_euler(Point::new(0.3, -0.2), &pr.domain, None, &cfg, rng, &mut sink)?;
                    Ok(sink.scores[0])
                })
                .unwrap()
            })
    };
    checks.push(("worker-count determinism", go(1) == go(4)));

    // A walker with no scoring still terminates at the horizon.
    let end = walk_euler(Point::origin(), &dom, None, &cfg, &mut stream_rng(84, 0), &mut NullSink).unwrap();
    checks.push(("horizon reached", (end.elapsed - 2.0).abs() < 1e-12));

    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    let detail = if failed.is_empty() {
        format!("{} properties hold", checks.len())
    } else {
        format!("failed: {}", failed.join(", "))
    };
    r.line(8, failed.is_empty(), &detail, t);
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let want = |id: usize| only.as_ref().is_none_or(|v| v.contains(&id));
    let mut report = Report { failures: 0 };

    let table = if want(2) || want(4) || want(8) {
        Some(circle_table())
    } else {
        None
    };
    if want(8) {
        criterion_8(&mut report, table.as_ref().unwrap());
    }
    if want(1) {
        criterion_1(&mut report);
    }
    if want(2) {
        criterion_2(&mut report, table.as_ref().unwrap());
    }
    if want(5) || want(6) {
        let t = Instant::now();
        let pr = builtin_problem(ProblemId::PureNeumann, 1.0 / 3.0, 0.0, 0.0);
        let traces = [spectral_setup(&pr, 2, 51), spectral_setup(&pr, 4, 52)];
        if want(5) {
            criterion_5(&mut report, &traces, &pr, t);
        }
        if want(6) {
            criterion_6(&mut report, &traces, &pr, t);
        }
    }
    if want(7) {
        criterion_7(&mut report);
    }
    if want(4) {
        criterion_4(&mut report, table.as_ref().unwrap());
    }
    if want(3) {
        criterion_3(&mut report);
    }
    if report.failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", report.failures);
        ExitCode::FAILURE
    }
}
