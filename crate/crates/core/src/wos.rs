//! Walk on spheres with an ε-absorption layer.
//!
//! Inside a sphere the exit time and one uniformly chosen interior point of
//! the Brownian path are drawn jointly from a precomputed [`CircleTable`]
//! for the unit disk (exit standardized at `(1, 0)`), then scaled and rotated.
//! The source integral over the sphere is scored by the one random point
//! rule `τ f(B_{Uτ})`. On a Neumann side a replacement scheme from
//! [`crate::schemes`] moves the walker back inside.
//!
//! With a finite horizon the sphere that would overrun `T₀` is replaced by
//! a stored full path, conditioned on surviving the remaining time and
//! integrated by the rectangle rule.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryKind, Point2, SquareDomain};
use crate::problem::Coefficients;
use crate::real::Real;
use crate::rng::{normal, stream_rng, uniform};
use crate::schemes::{replace, SchemeConfig};
use crate::walk::{score_single, EventSink, Termination, WalkEnd, WalkOutcome};

pub const TABLE_MAGIC: &[u8; 8] = b"WOSTBL01";
const HEADER_LEN: usize = 8 + 4 * 3 + 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TablePair {
    pub exit_time: f64,
    pub point: Point2<f64>,
}

/// One stored path sample: time since the start and position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub time: f64,
    pub point: Point2<f64>,
}

/// Empirical exit data of the unit disk for Brownian motion started at the
/// center, rotated so that every path exits at `(1, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleTable {
    pub pairs: Vec<TablePair>,
    /// `q_paths × path_len` samples; each path starts at the origin at time
    /// 0 and ends at `(1, 0)` at its exit time. Paths are sorted by exit
    /// time.
    paths: Vec<PathSample>,
    path_len: usize,
    pub delta_pre: f64,
}

impl CircleTable {
    pub fn new(
        pairs: Vec<TablePair>,
        paths: Vec<Vec<PathSample>>,
        delta_pre: f64,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyTable);
        }
        let path_len = paths.first().map_or(0, Vec::len);
        if paths.iter().any(|p| p.len() != path_len || p.len() < 2) {
            return Err(Error::TableFormat("stored paths must share a length ≥ 2".into()));
        }
        let mut paths = paths;
        paths.sort_by(|a, b| a[path_len - 1].time.total_cmp(&b[path_len - 1].time));
        Ok(Self {
            pairs,
            paths: paths.concat(),
            path_len,
            delta_pre,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len().checked_div(self.path_len).unwrap_or(0)
    }

    pub fn path_len(&self) -> usize {
        self.path_len
    }

    pub fn path(&self, i: usize) -> &[PathSample] {
        &self.paths[i * self.path_len..(i + 1) * self.path_len]
    }

    fn path_exit(&self, i: usize) -> f64 {
        self.paths[(i + 1) * self.path_len - 1].time
    }

    /// Index of the first stored path whose exit time exceeds `t`.
    fn first_path_exiting_after(&self, t: f64) -> usize {
        let (mut lo, mut hi) = (0, self.n_paths());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.path_exit(mid) > t {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// Mean exit time and its standard error.
    pub fn exit_time_stats(&self) -> (f64, f64) {
        let n = self.pairs.len() as f64;
        let m = self.pairs.iter().map(|p| p.exit_time).sum::<f64>() / n;
        let v = self
            .pairs
            .iter()
            .map(|p| (p.exit_time - m) * (p.exit_time - m))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        (m, (v / n).sqrt())
    }

    /// Little-endian binary dump: header, pairs, then paths.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let count = |v: usize| {
            u32::try_from(v).map_err(|_| Error::TableFormat(format!("count {v} exceeds u32")))
        };
        w.write_all(TABLE_MAGIC)?;
        w.write_all(&count(self.pairs.len())?.to_le_bytes())?;
        w.write_all(&count(self.n_paths())?.to_le_bytes())?;
        w.write_all(&count(self.path_len)?.to_le_bytes())?;
        w.write_all(&self.delta_pre.to_le_bytes())?;
        for p in &self.pairs {
            for v in [p.exit_time, p.point.x, p.point.y] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for s in &self.paths {
            for v in [s.time, s.point.x, s.point.y] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|_| Error::TableFormat("truncated header".into()))?;
        if &header[..8] != TABLE_MAGIC {
            return Err(Error::TableFormat("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
        let (n_pairs, q_paths, path_len) = (u32_at(8), u32_at(12), u32_at(16));
        let delta_pre = f64::from_le_bytes(header[20..28].try_into().unwrap());
        let mut triple = || -> Result<(f64, f64, f64)> {
            let mut buf = [0u8; 24];
            r.read_exact(&mut buf)
                .map_err(|_| Error::TableFormat("truncated body".into()))?;
            let f = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
            Ok((f(0), f(8), f(16)))
        };
        let mut pairs = Vec::with_capacity(n_pairs);
        for _ in 0..n_pairs {
            let (t, x, y) = triple()?;
            pairs.push(TablePair {
                exit_time: t,
                point: Point2::new(x, y),
            });
        }
        let mut paths = Vec::with_capacity(q_paths);
        for _ in 0..q_paths {
            let mut p = Vec::with_capacity(path_len);
            for _ in 0..path_len {
                let (t, x, y) = triple()?;
                p.push(PathSample {
                    time: t,
                    point: Point2::new(x, y),
                });
            }
            paths.push(p);
        }
        Self::new(pairs, paths, delta_pre)
    }
}

/// Fine Euler walk from the origin until exit of the unit disk (bridge test
/// against the tangent line). Fills `buf` with the `M` visited positions
/// `X_0..X_{M-1}` and returns the exit point.
fn disk_exit<R: Rng + ?Sized>(delta: f64, rng: &mut R, buf: &mut Vec<Point2<f64>>) -> Point2<f64> {
    buf.clear();
    let s = delta.sqrt();
    let window = 6.0 * s;
    let mut x = Point2::<f64>::origin();
    loop {
        buf.push(x);
        let y = x + Point2::new(normal::<f64, _>(rng) * s, normal::<f64, _>(rng) * s);
        let ny = y.norm();
        if ny >= 1.0 {
            return y * (1.0 / ny);
        }
        let d1 = 1.0 - x.norm();
        let d2 = 1.0 - ny;
        if d1 < window && d2 < window && uniform::<f64, _>(rng) < (-2.0 * d1 * d2 / delta).exp() {
            return y * (1.0 / ny);
        }
        x = y;
    }
}

/// Builds a table from `n_pairs` independent fine walks; the first
/// `q_paths` of them are also stored as paths of `path_len` samples.
pub fn precompute_circle_table(
    delta_pre: f64,
    n_pairs: usize,
    q_paths: usize,
    path_len: usize,
    seed: u64,
) -> Result<CircleTable> {
    if !(delta_pre > 0.0) || n_pairs == 0 || q_paths > n_pairs || (q_paths > 0 && path_len < 2) {
        return Err(Error::InvalidConfig(format!(
            "bad table parameters: delta_pre {delta_pre}, pairs {n_pairs}, paths {q_paths}, path_len {path_len}"
        )));
    }
    const CHUNK: usize = 256;
    let chunks: Vec<(Vec<TablePair>, Vec<Vec<PathSample>>)> = (0..n_pairs.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut buf = Vec::new();
            let mut pairs = Vec::with_capacity(CHUNK);
            let mut paths = Vec::new();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_pairs) {
                let mut rng = stream_rng(seed, i as u64);
                let exit = disk_exit(delta_pre, &mut rng, &mut buf);
                let m = buf.len();
                let exit_time = m as f64 * delta_pre;
                // Rotation by -θ maps the exit point to (1, 0).
                let (s, c) = (-exit.y, exit.x);
                let k = rng.random_range(0..m);
                pairs.push(TablePair {
                    exit_time,
                    point: buf[k].rotate_sc(s, c),
                });
                if i < q_paths {
                    let mut p: Vec<PathSample> = (0..path_len - 1)
                        .map(|j| {
                            let idx = j * m / (path_len - 1);
                            PathSample {
                                time: idx as f64 * delta_pre,
                                point: buf[idx].rotate_sc(s, c),
                            }
                        })
                        .collect();
                    p.push(PathSample {
                        time: exit_time,
                        point: Point2::new(1.0, 0.0),
                    });
                    paths.push(p);
                }
            }
            (pairs, paths)
        })
        .collect();
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut paths = Vec::with_capacity(q_paths);
    for (a, b) in chunks {
        pairs.extend(a);
        paths.extend(b);
    }
    CircleTable::new(pairs, paths, delta_pre)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereStep<T> {
    pub exit: Point2<T>,
    pub tau: T,
    pub u_point: Point2<T>,
    /// Rotation angle applied to the standardized sample.
    pub angle: T,
}

pub fn sample_sphere_step<T: Real, R: Rng + ?Sized>(
    center: Point2<T>,
    radius: T,
    table: &CircleTable,
    rng: &mut R,
) -> Result<SphereStep<T>> {
    if table.pairs.is_empty() {
        return Err(Error::EmptyTable);
    }
    let pair = table.pairs[rng.random_range(0..table.pairs.len())];
    let u: T = uniform(rng);
    let angle = u * T::TAU();
    let (s, c) = angle.sin_cos();
    let exit = center + Point2::new(c, s) * radius;
    let p = Point2::new(T::lit(pair.point.x), T::lit(pair.point.y));
    Ok(SphereStep {
        exit,
        tau: radius * radius * T::lit(pair.exit_time),
        u_point: center + p.rotate_sc(s, c) * radius,
        angle,
    })
}

/// One random point estimate `τ f(u)` of the source integral over a sphere.
#[inline]
pub fn source_score_one_point<T: Real>(tau: T, u_point: Point2<T>, f: &dyn Fn(Point2<T>) -> T) -> T {
    tau * f(u_point)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WosConfig<T> {
    pub eps: T,
    pub h: T,
    /// Finite horizon; required for pure Neumann problems.
    pub t0: Option<T>,
    pub scheme: SchemeConfig,
    pub seed: u64,
    pub max_steps: usize,
}

impl<T: Real> WosConfig<T> {
    pub fn new(eps: T, h: T, t0: Option<T>, scheme: SchemeConfig, seed: u64) -> Result<Self> {
        let cfg = Self {
            eps,
            h,
            t0,
            scheme,
            seed,
            max_steps: 1_000_000,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !pos(self.eps) || !pos(self.h) {
            return Err(Error::InvalidConfig("eps and h must be positive".into()));
        }
        if let Some(t0) = self.t0 {
            if !pos(t0) {
                return Err(Error::InvalidConfig("t0 must be positive".into()));
            }
            if !self.scheme.kind.tracks_time() {
                return Err(Error::InvalidConfig(format!(
                    "scheme `{}` reports no elapsed time and cannot be used with a finite horizon",
                    self.scheme.kind.name()
                )));
            }
        }
        Ok(())
    }
}

/// Scores `∫_0^{T₁} f` along a stored path scaled to `radius` and rotated by
/// `angle` around `center`, conditioned on the path surviving past `t1`.
fn truncated_path<T: Real, R: Rng + ?Sized, S: EventSink<T>>(
    center: Point2<T>,
    radius: T,
    angle: T,
    t1: T,
    table: &CircleTable,
    rng: &mut R,
    sink: &mut S,
) -> Result<()> {
    let n = table.n_paths();
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    let r2 = radius * radius;
    let t1_unit = (t1 / r2).to_f64_lossy();
    let first = table.first_path_exiting_after(t1_unit);
    // No stored path survives long enough: use the longest one.
    let idx = if first < n {
        rng.random_range(first..n)
    } else {
        n - 1
    };
    let path = table.path(idx);
    let (s, c) = angle.sin_cos();
    let place = |p: Point2<f64>| center + Point2::new(T::lit(p.x), T::lit(p.y)).rotate_sc(s, c) * radius;
    for w in path.windows(2) {
        let t_start = r2 * T::lit(w[0].time);
        if t_start >= t1 {
            return Ok(());
        }
        let t_end = (r2 * T::lit(w[1].time)).min(t1);
        sink.interior(place(w[0].point), t_end - t_start);
    }
    let last = path[path.len() - 1];
    let t_last = r2 * T::lit(last.time);
    if t_last < t1 {
        sink.interior(place(last.point), t1 - t_last);
    }
    Ok(())
}

/// Walk on spheres from `start` reporting to `sink`. Without horizon the
/// walk ends on a Dirichlet side; with `cfg.t0` it ends at `T₀`.
pub fn walk_wos<T: Real, R: Rng + ?Sized, S: EventSink<T>>(
    start: Point2<T>,
    dom: &SquareDomain<T>,
    cfg: &WosConfig<T>,
    table: &CircleTable,
    rng: &mut R,
    sink: &mut S,
) -> Result<WalkEnd<T>> {
    cfg.validate()?;
    if !dom.contains(start) || !start.is_finite() {
        return Err(Error::NotInside {
            x: start.x.to_f64_lossy(),
            y: start.y.to_f64_lossy(),
        });
    }
    if cfg.t0.is_none() && !dom.has_dirichlet() {
        return Err(Error::InvalidConfig(
            "a pure Neumann walk needs a finite horizon".into(),
        ));
    }
    let mut x = start;
    let mut clock = T::zero();
    for _ in 0..cfg.max_steps {
        let (side, d) = dom.nearest_side(x);
        if d <= cfg.eps {
            let b = dom.project_onto_side(x, side);
            if dom.kind(side) == BoundaryKind::Dirichlet {
                sink.dirichlet(b, side);
                return Ok(WalkEnd {
                    elapsed: clock,
                    cause: Termination::DirichletHit,
                });
            }
            let r = replace(cfg.scheme, b, side, cfg.h, dom, rng)?;
            if let Some(t0) = cfg.t0 {
                if clock + r.time_inc >= t0 {
                    sink.interior(b, t0 - clock);
                    return Ok(WalkEnd {
                        elapsed: t0,
                        cause: Termination::HorizonReached,
                    });
                }
            }
            sink.boundary(b, side, r.g_weight);
            if r.f_weight != T::zero() {
                sink.interior(r.f_point, r.f_weight);
            }
            clock += r.time_inc;
            x = r.new_point;
            continue;
        }
        let step = sample_sphere_step(x, d, table, rng)?;
        if let Some(t0) = cfg.t0 {
            if clock + step.tau >= t0 {
                truncated_path(x, d, step.angle, t0 - clock, table, rng, sink)?;
                return Ok(WalkEnd {
                    elapsed: t0,
                    cause: Termination::HorizonReached,
                });
            }
        }
        sink.interior(step.u_point, step.tau);
        clock += step.tau;
        x = step.exit;
    }
    Err(Error::StepCapExceeded(cfg.max_steps))
}

pub fn run_wos_mixed<T: Real, R: Rng + ?Sized>(
    start: Point2<T>,
    coeffs: &Coefficients<T>,
    dom: &SquareDomain<T>,
    cfg: &WosConfig<T>,
    table: &CircleTable,
    rng: &mut R,
) -> Result<WalkOutcome<T>> {
    if !dom.has_dirichlet() {
        return Err(Error::InvalidConfig("run_wos_mixed requires a Dirichlet side".into()));
    }
    let cfg = WosConfig { t0: None, ..*cfg };
    score_single(coeffs, |sink| walk_wos(start, dom, &cfg, table, rng, sink))
}

pub fn run_wos_neumann<T: Real, R: Rng + ?Sized>(
    start: Point2<T>,
    coeffs: &Coefficients<T>,
    dom: &SquareDomain<T>,
    cfg: &WosConfig<T>,
    table: &CircleTable,
    rng: &mut R,
) -> Result<WalkOutcome<T>> {
    if dom.has_dirichlet() || cfg.t0.is_none() {
        return Err(Error::InvalidConfig(
            "run_wos_neumann requires a pure Neumann square and a horizon".into(),
        ));
    }
    score_single(coeffs, |sink| walk_wos(start, dom, cfg, table, rng, sink))
}
