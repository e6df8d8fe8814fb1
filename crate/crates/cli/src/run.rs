//! Experiment drivers.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::path::Path;

use neumann_mc::estimators::{
    bias_metrics, fit_slope, monte_carlo_multi, sample_invariant_path, sample_invariant_uniform, tcheb_grid,
    variance_scan, McSummary, ParticleCloud,
};
use neumann_mc::euler::walk_euler;
use neumann_mc::rng::{derive_seed, stream_rng, StreamRng};
use neumann_mc::schemes::SchemeConfig;
use neumann_mc::spectral::{build_basis, center_approx, center_exact, node_traces, solve, LinearDrift, NodeTrace};
use neumann_mc::wos::{precompute_circle_table, walk_wos, CircleTable, WosConfig};
use neumann_mc::{builtin_problem, Coefficients, EulerConfig, Point, Problem, ProblemId, ScoreSink};
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::{fixed, int, sci, CsvTable, RunOutput};

/// Seed tags of the particle clouds and the table, clear of point indices.
const CLOUD_TAG: u64 = 1 << 32;
const TABLE_TAG: u64 = 1 << 33;

pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<RunOutput> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::MixedEuler | Experiment::MixedWos => mixed(cfg),
        Experiment::NeumannPreliminary => preliminary(cfg),
        Experiment::NeumannEuler | Experiment::NeumannWos => neumann_bias(cfg),
        Experiment::SpectralExact | Experiment::SpectralApprox | Experiment::Convection => spectral(cfg),
    }
}

/// Reads the circle table at `cfg.table_path`, building and caching it if
/// the file does not exist.
pub fn load_or_build_table(cfg: &ExperimentConfig) -> CliResult<CircleTable> {
    let path = Path::new(&cfg.table_path);
    if path.exists() {
        return Ok(CircleTable::read_from(path)?);
    }
    eprintln!(
        "building circle table {} ({} pairs, {} paths)",
        path.display(),
        cfg.table_pairs,
        cfg.table_paths
    );
    let t = precompute_circle_table(
        cfg.table_delta,
        cfg.table_pairs,
        cfg.table_paths,
        cfg.table_path_len,
        derive_seed(cfg.seed, TABLE_TAG),
    )?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    t.write_to(path)?;
    Ok(t)
}

fn point(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

fn finite(s: &[McSummary]) -> CliResult<()> {
    if s.iter().all(|s| s.mean.is_finite() && s.std_error.is_finite()) {
        Ok(())
    } else {
        Err(CliError::Numerical("non-finite Monte Carlo estimate".into()))
    }
}

fn problems(cfg: &ExperimentConfig, id: ProblemId) -> Vec<Problem> {
    cfg.alphas
        .iter()
        .map(|&a| builtin_problem(id, a, cfg.beta_x, cfg.beta_y))
        .collect()
}

/// How one parameter set estimates all problems from a start point.
enum Walker<'a> {
    Euler(EulerConfig<f64>),
    Wos(WosConfig<f64>, &'a CircleTable),
}

impl Walker<'_> {
    /// Shared trajectories from `start`, one summary per problem.
    fn estimate(&self, start: Point, problems: &[Problem], n: u64, seed: u64) -> CliResult<Vec<McSummary>> {
        let coeffs: Vec<&Coefficients> = problems.iter().map(|p| &p.coeffs).collect();
        let dom = problems[0].domain;
        let drift = problems[0].coeffs.drift.as_ref();
        let s = monte_carlo_multi(n, coeffs.len(), seed, |rng, _, out| {
            let mut sink = ScoreSink::new(&coeffs);
            match self {
                Walker::Euler(c) => walk_euler(start, &dom, drift, c, rng, &mut sink)?,
                Walker::Wos(c, table) => walk_wos(start, &dom, c, table, rng, &mut sink)?,
            };
            out.copy_from_slice(&sink.scores);
            Ok(())
        })?;
        finite(&s)?;
        Ok(s)
    }
}

/// One labelled parameter set of a pointwise experiment.
struct ParamSet<'a> {
    label: String,
    p1: String,
    p2: String,
    walker: Walker<'a>,
}

fn euler_sets<'a>(cfg: &ExperimentConfig) -> CliResult<Vec<ParamSet<'a>>> {
    let kernel = cfg.local_time_kernel()?;
    cfg.delta_xi
        .iter()
        .enumerate()
        .map(|(i, &[delta, xi])| {
            Ok(ParamSet {
                label: format!("euler{}", i + 1),
                p1: sci(delta),
                p2: sci(xi),
                walker: Walker::Euler(EulerConfig::new(delta, xi, cfg.t0, cfg.seed)?.with_kernel(kernel)),
            })
        })
        .collect()
}

fn wos_sets<'a>(cfg: &ExperimentConfig, table: &'a CircleTable, horizon: Option<f64>) -> CliResult<Vec<ParamSet<'a>>> {
    let mut sets = Vec::new();
    for kind in cfg.scheme_kinds()? {
        for &h in &cfg.hs {
            let scheme = SchemeConfig {
                kind,
                kinetic_fixed_time: cfg.kinetic_fixed_time,
            };
            sets.push(ParamSet {
                label: kind.name().to_string(),
                p1: fixed(h),
                p2: sci(cfg.eps),
                walker: Walker::Wos(WosConfig::new(cfg.eps, h, horizon, scheme, cfg.seed)?, table),
            });
        }
    }
    Ok(sets)
}

/// `|error| > 5 σ/√N`.
fn flagged(err: f64, se: f64) -> bool {
    err > 5.0 * se
}

/// Tables 1 and 2: pointwise errors on the mixed problem. Every parameter
/// set reuses the seeds of the points so that sets are compared on common
/// random numbers.
fn mixed(cfg: &ExperimentConfig) -> CliResult<RunOutput> {
    let problems = problems(cfg, ProblemId::Mixed);
    let table;
    let sets = if cfg.experiment == Experiment::MixedWos {
        table = load_or_build_table(cfg)?;
        wos_sets(cfg, &table, None)?
    } else {
        euler_sets(cfg)?
    };
    let (h1, h2) = if cfg.experiment == Experiment::MixedWos {
        ("h", "eps")
    } else {
        ("delta", "xi")
    };
    let mut out = CsvTable::new(
        "",
        &[
            "set", h1, h2, "alpha", "x", "y", "exact", "estimate", "abs_error", "std_error", "flag",
        ],
    );
    let mut n_flagged = 0;
    for set in &sets {
        for (pi, &at) in cfg.points.iter().enumerate() {
            eprintln!("{} {} {}: point ({}, {})", set.label, set.p1, set.p2, at[0], at[1]);
            let p = point(at);
            let s = set.walker.estimate(p, &problems, cfg.n, derive_seed(cfg.seed, pi as u64))?;
            for ((pr, s), &alpha) in problems.iter().zip(&s).zip(&cfg.alphas) {
                let exact = pr.exact_at(p);
                let err = (s.mean - exact).abs();
                let f = flagged(err, s.std_error);
                n_flagged += usize::from(f);
                out.push(vec![
                    set.label.clone(),
                    set.p1.clone(),
                    set.p2.clone(),
                    fixed(alpha),
                    fixed(at[0]),
                    fixed(at[1]),
                    fixed(exact),
                    fixed(s.mean),
                    sci(err),
                    sci(s.std_error),
                    int(u8::from(f)),
                ]);
            }
        }
    }
    if n_flagged > 0 {
        eprintln!("note: {n_flagged} rows have |error| > 5 std_error");
    }
    Ok(RunOutput {
        tables: vec![out],
        summary: json!({ "flagged_rows": n_flagged }),
    })
}

/// Tables 3 and 4: bias metrics on the `P × P` grid and errors at the
/// evaluation points, pure Neumann problem.
fn neumann_bias(cfg: &ExperimentConfig) -> CliResult<RunOutput> {
    let problems = problems(cfg, ProblemId::PureNeumann);
    let table;
    let sets = if cfg.experiment == Experiment::NeumannWos {
        table = load_or_build_table(cfg)?;
        wos_sets(cfg, &table, Some(cfg.t0))?
    } else {
        euler_sets(cfg)?
    };
    let (h1, h2) = if cfg.experiment == Experiment::NeumannWos {
        ("h", "eps")
    } else {
        ("delta", "xi")
    };
    let grid = tcheb_grid(cfg.grid_p);
    let mut out = CsvTable::new(
        "",
        &[
            "set", h1, h2, "alpha", "kind", "x", "y", "exact", "estimate", "abs_error", "std_error", "a_bar", "rho",
            "model_error",
        ],
    );
    let mut metrics = Vec::new();
    for set in &sets {
        eprintln!("{} {} {}", set.label, set.p1, set.p2);
        let starts: Vec<(&str, Point)> = grid
            .iter()
            .map(|&p| ("grid", p))
            .chain(cfg.points.iter().map(|&p| ("point", point(p))))
            .collect();
        let est: Vec<Vec<McSummary>> = starts
            .iter()
            .enumerate()
            .map(|(i, &(_, p))| set.walker.estimate(p, &problems, cfg.n, derive_seed(cfg.seed, i as u64)))
            .collect::<CliResult<_>>()?;
        for (a, (pr, &alpha)) in problems.iter().zip(&cfg.alphas).enumerate() {
            let on_grid: Vec<f64> = est[..grid.len()].iter().map(|s| s[a].mean).collect();
            let m = bias_metrics(&on_grid, &|q| pr.exact_at(q), cfg.grid_p)?;
            metrics.push(json!({
                "set": set.label, h1: set.p1, h2: set.p2, "alpha": alpha, "a_bar": m.a_bar, "rho": m.rho,
            }));
            for (&(kind, p), s) in starts.iter().zip(&est) {
                let s = s[a];
                let exact = pr.exact_at(p);
                out.push(vec![
                    set.label.clone(),
                    set.p1.clone(),
                    set.p2.clone(),
                    fixed(alpha),
                    kind.to_string(),
                    fixed(p.x),
                    fixed(p.y),
                    fixed(exact),
                    fixed(s.mean),
                    sci((s.mean - exact).abs()),
                    sci(s.std_error),
                    fixed(m.a_bar),
                    fixed(m.rho),
                    sci((s.mean - exact - m.a_bar).abs()),
                ]);
            }
        }
    }
    Ok(RunOutput {
        tables: vec![out],
        summary: json!({ "bias": metrics }),
    })
}

/// Mean and variance of the homogeneous problem against the horizon.
fn preliminary(cfg: &ExperimentConfig) -> CliResult<RunOutput> {
    let pr = builtin_problem(ProblemId::HomogeneousNeumann, 0.0, 0.0, 0.0);
    let kernel = cfg.local_time_kernel()?;
    let mut means = CsvTable::new("_mean", &["set", "delta", "x", "y", "t", "estimate", "std_error", "exact"]);
    let mut vars = CsvTable::new("_variance", &["set", "delta", "x", "y", "t", "variance"]);
    let mut fits = Vec::new();
    let c3 = 32768.0 / 33075.0;
    for (si, &[delta, xi]) in cfg.delta_xi.iter().enumerate() {
        for (pi, &at) in cfg.points.iter().enumerate() {
            let start = point(at);
            let exact = pr.exact_at(start);
            eprintln!("scan delta {delta} at ({}, {})", at[0], at[1]);
            let scan = variance_scan(&cfg.times, cfg.n, derive_seed(cfg.seed, pi as u64), |t0| {
                let ecfg = EulerConfig::new(delta, xi, t0, cfg.seed)?.with_kernel(kernel);
                let pr = &pr;
                Ok(move |rng: &mut StreamRng, _| {
                    let coeffs = [&pr.coeffs];
                    let mut sink = ScoreSink::new(&coeffs);
                    walk_euler(start, &pr.domain, None, &ecfg, rng, &mut sink)?;
                    Ok(sink.scores[0])
                })
            })?;
            let summaries: Vec<McSummary> = scan.iter().map(|(_, s)| *s).collect();
            finite(&summaries)?;
            let label = format!("euler{}", si + 1);
            for (t, s) in &scan {
                means.push(vec![
                    label.clone(),
                    sci(delta),
                    fixed(at[0]),
                    fixed(at[1]),
                    fixed(*t),
                    fixed(s.mean),
                    sci(s.std_error),
                    fixed(exact),
                ]);
                vars.push(vec![
                    label.clone(),
                    sci(delta),
                    fixed(at[0]),
                    fixed(at[1]),
                    fixed(*t),
                    fixed(s.variance),
                ]);
            }
            let window: Vec<&(f64, McSummary)> = scan
                .iter()
                .filter(|(t, _)| (cfg.fit_window[0]..=cfg.fit_window[1]).contains(t))
                .collect();
            let slope = fit_slope(&window.iter().map(|(t, s)| (*t, s.variance)).collect::<Vec<_>>())?;
            let pooled = window.iter().map(|(_, s)| s.mean).sum::<f64>() / window.len() as f64;
            fits.push(json!({
                "set": label, "delta": delta, "x": at[0], "y": at[1],
                "variance_slope": slope, "c3": c3, "pooled_mean": pooled, "exact": exact,
            }));
        }
    }
    Ok(RunOutput {
        tables: vec![means, vars],
        summary: json!({ "fits": fits }),
    })
}

/// Tables 6 to 8: spectral solutions at the Tchebychef nodes.
fn spectral(cfg: &ExperimentConfig) -> CliResult<RunOutput> {
    let (id, drift) = match cfg.experiment {
        Experiment::Convection => (
            ProblemId::ConvectionDiffusion,
            LinearDrift {
                bx: cfg.beta_x,
                by: cfg.beta_y,
            },
        ),
        _ => (ProblemId::PureNeumann, LinearDrift::default()),
    };
    let exact_centering = cfg.experiment == Experiment::SpectralExact;
    let header: &[&'static str] = if exact_centering {
        &["alpha", "delta", "m", "basis_n", "err1", "kappa"]
    } else {
        &["alpha", "delta", "m", "q", "basis_n", "err1", "err2", "err2_printed", "kappa"]
    };
    let mut out = CsvTable::new("", header);
    let mut nodal = CsvTable::new("_nodal", &["alpha", "delta", "m", "q", "basis_n", "x", "y", "exact", "value"]);
    for (ai, &alpha) in cfg.alphas.iter().enumerate() {
        let pr = builtin_problem(id, alpha, cfg.beta_x, cfg.beta_y);
        let exact = |p: Point| pr.exact_at(p);
        let mut traces: HashMap<(u64, u64, usize), Vec<NodeTrace>> = HashMap::new();
        for (si, &[delta, m, q]) in cfg.spectral_sets.iter().enumerate() {
            let (m, q) = (m as u64, q as usize);
            let cloud: Option<ParticleCloud<f64>> = if exact_centering {
                None
            } else {
                let mut rng = stream_rng(derive_seed(cfg.seed, CLOUD_TAG + ai as u64), si as u64);
                Some(match cfg.experiment {
                    Experiment::Convection => sample_invariant_path(&pr.coeffs, &pr.domain, delta, q, &mut rng)?,
                    _ => sample_invariant_uniform(q, &mut rng)?,
                })
            };
            for &n in &cfg.basis {
                let basis = build_basis(n)?;
                let node_data = match traces.entry((delta.to_bits(), m, n)) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => {
                        eprintln!("alpha {alpha}: walks for delta {delta}, M {m}, N {n}");
                        let ecfg = EulerConfig::new(delta, cfg.xi, cfg.t0, cfg.seed)?.with_kernel(cfg.local_time_kernel()?);
                        let seed = derive_seed(cfg.seed, n as u64);
                        e.insert(node_traces(&basis, &pr.coeffs, &pr.domain, &ecfg, m, seed)?)
                    }
                };
                let cb = match &cloud {
                    None => center_exact(basis)?,
                    Some(c) => center_approx(basis, c)?,
                };
                let sol = solve(cb, node_data, drift)?;
                if sol.values.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::Numerical("non-finite spectral solution".into()));
                }
                let err1 = sol.err1(&exact);
                let row = match &cloud {
                    None => vec![fixed(alpha), sci(delta), int(m), int(n), sci(err1), sci(sol.condition)],
                    Some(c) => vec![
                        fixed(alpha),
                        sci(delta),
                        int(m),
                        int(q),
                        int(n),
                        sci(err1),
                        sci(sol.err2(&exact, c)),
                        sci(sol.err2_printed(&exact, c)),
                        sci(sol.condition),
                    ],
                };
                out.push(row);
                for (p, v) in sol.nodal_values() {
                    nodal.push(vec![
                        fixed(alpha),
                        sci(delta),
                        int(m),
                        int(q),
                        int(n),
                        fixed(p.x),
                        fixed(p.y),
                        fixed(exact(p)),
                        fixed(v),
                    ]);
                }
            }
        }
    }
    Ok(RunOutput {
        tables: vec![out, nodal],
        summary: json!({}),
    })
}
