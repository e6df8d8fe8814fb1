//! Monte Carlo driver and error metrics.
//!
//! Trajectory `i` of an experiment seeded with `s` always uses the random
//! stream `(s, i)`. Trajectories are processed in fixed chunks whose
//! Welford accumulators are merged by a fixed-shape pairwise tree, so the
//! summary is bit-identical for any number of worker threads.
//!
//! Statistics are accumulated in `f64` whatever the walker scalar type.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::euler::euler_step;
use crate::geometry::{Point2, SquareDomain};
use crate::problem::Coefficients;
use crate::real::Real;
use crate::rng::{derive_seed, stream_rng, uniform, StreamRng};

const CHUNK: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSummary {
    pub n: u64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub std_error: f64,
}

/// Single-pass mean / second-moment accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, o: Self) -> Self {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let (na, nb) = (self.n as f64, o.n as f64);
        Self {
            n,
            mean: self.mean + d * nb / n as f64,
            m2: self.m2 + o.m2 + d * d * na * nb / n as f64,
        }
    }

    pub fn summary(&self) -> McSummary {
        let variance = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        } else {
            0.0
        };
        McSummary {
            n: self.n,
            mean: self.mean,
            variance,
            std_error: (variance / self.n.max(1) as f64).sqrt(),
        }
    }
}

fn tree_merge(accs: &[Vec<Welford>]) -> Vec<Welford> {
    match accs.len() {
        0 => Vec::new(),
        1 => accs[0].clone(),
        len => {
            let (a, b) = accs.split_at(len / 2);
            tree_merge(a)
                .into_iter()
                .zip(tree_merge(b))
                .map(|(x, y)| x.merge(y))
                .collect()
        }
    }
}

/// Runs `n` trajectories scoring `k` quantities each. `run` receives the
/// trajectory's own random stream and index, and fills the score slice.
pub fn monte_carlo_multi<F>(n: u64, k: usize, seed: u64, run: F) -> Result<Vec<McSummary>>
where
    F: Fn(&mut StreamRng, u64, &mut [f64]) -> Result<()> + Sync,
{
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "at least two trajectories are needed, got {n}"
        )));
    }
    let chunks = n.div_ceil(CHUNK);
    let accs: Vec<Vec<Welford>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Welford::default(); k];
            let mut scores = vec![0.0; k];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let mut rng = stream_rng(seed, i);
                scores.iter_mut().for_each(|s| *s = 0.0);
                run(&mut rng, i, &mut scores).map_err(|e| Error::Trajectory {
                    index: i,
                    source: Box::new(e),
                })?;
                for (a, s) in acc.iter_mut().zip(&scores) {
                    a.push(*s);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(tree_merge(&accs).iter().map(Welford::summary).collect())
}

/// Single-score version of [`monte_carlo_multi`].
pub fn monte_carlo<F>(n: u64, seed: u64, run: F) -> Result<McSummary>
where
    F: Fn(&mut StreamRng, u64) -> Result<f64> + Sync,
{
    let v = monte_carlo_multi(n, 1, seed, |rng, i, out| {
        out[0] = run(rng, i)?;
        Ok(())
    })?;
    Ok(v[0])
}

/// Independent Monte Carlo runs at each horizon in `times`; run `j` uses a
/// seed derived from `(seed, j)`.
pub fn variance_scan<F, G>(times: &[f64], n: u64, seed: u64, factory: F) -> Result<Vec<(f64, McSummary)>>
where
    F: Fn(f64) -> Result<G>,
    G: Fn(&mut StreamRng, u64) -> Result<f64> + Sync,
{
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("scan times must be increasing".into()));
    }
    times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let run = factory(t)?;
            Ok((t, monte_carlo(n, derive_seed(seed, j as u64), run)?))
        })
        .collect()
}

/// Ordinary least-squares slope.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::Degenerate("need at least two points".into()));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all abscissae are equal".into()));
    }
    Ok(sxy / sxx)
}

/// `cos((2i-1)π/(2P))`, `i = 1..P`.
pub fn tcheb_points(p: usize) -> Vec<f64> {
    (1..=p)
        .map(|i| {
            let v = ((2 * i - 1) as f64 * std::f64::consts::PI / (2 * p) as f64).cos();
            // cos(π/2) is not exactly zero in floating point.
            if v.abs() < 1e-15 {
                0.0
            } else {
                v
            }
        })
        .collect()
}

/// Tensor grid `(x_i, x_j)`, `i` major.
pub fn tcheb_grid(p: usize) -> Vec<Point2<f64>> {
    let xs = tcheb_points(p);
    xs.iter()
        .flat_map(|&x| xs.iter().map(move |&y| Point2::new(x, y)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasMetrics {
    /// Additive constant minimizing the grid misfit.
    pub a_bar: f64,
    /// Root mean square misfit after removing `a_bar`.
    pub rho: f64,
    pub grid: Vec<Point2<f64>>,
}

/// `ā` and `ρ` for estimates `u_hat` on the `P×P` grid of [`tcheb_grid`].
pub fn bias_metrics(u_hat: &[f64], exact: &dyn Fn(Point2<f64>) -> f64, p: usize) -> Result<BiasMetrics> {
    let grid = tcheb_grid(p);
    if u_hat.len() != grid.len() {
        return Err(Error::InvalidConfig(format!(
            "expected {} grid values, got {}",
            grid.len(),
            u_hat.len()
        )));
    }
    let resid: Vec<f64> = grid.iter().zip(u_hat).map(|(q, v)| v - exact(*q)).collect();
    let m = resid.len() as f64;
    let a_bar = resid.iter().sum::<f64>() / m;
    let j1 = resid.iter().map(|r| (r - a_bar) * (r - a_bar)).sum::<f64>() / m;
    Ok(BiasMetrics {
        a_bar,
        rho: j1.sqrt(),
        grid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    IidUniform,
    LongPath,
}

/// Sample approximating the invariant measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud<T> {
    pub points: Vec<Point2<T>>,
    pub provenance: Provenance,
}

pub fn sample_invariant_uniform<T: Real, R: Rng + ?Sized>(q: usize, rng: &mut R) -> Result<ParticleCloud<T>> {
    if q == 0 {
        return Err(Error::InvalidConfig("empty particle cloud".into()));
    }
    let two = T::lit(2.0);
    let points = (0..q)
        .map(|_| {
            let x: T = uniform(rng);
            let y: T = uniform(rng);
            Point2::new(two * x - T::one(), two * y - T::one())
        })
        .collect();
    Ok(ParticleCloud {
        points,
        provenance: Provenance::IidUniform,
    })
}

/// Positions after each of `q` reflected Euler steps of one path started at
/// the origin.
pub fn sample_invariant_path<T: Real, R: Rng + ?Sized>(
    coeffs: &Coefficients<T>,
    dom: &SquareDomain<T>,
    delta: T,
    q: usize,
    rng: &mut R,
) -> Result<ParticleCloud<T>> {
    if q == 0 || !(delta > T::zero()) {
        return Err(Error::InvalidConfig("path sampler needs q > 0 and delta > 0".into()));
    }
    let mut x = Point2::origin();
    let mut points = Vec::with_capacity(q);
    for _ in 0..q {
        x = euler_step(x, coeffs, dom, delta, rng)?;
        points.push(x);
    }
    Ok(ParticleCloud {
        points,
        provenance: Provenance::LongPath,
    })
}
