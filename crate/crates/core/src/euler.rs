//! Reflected Euler scheme with kernel-smoothed local time.
//!
//! Each step scores `δ f(X_k)` and, on Neumann sides, `δ g(πX_k) K_ξ(X_k, πX_k)`
//! where `π` projects on the nearest side. Proposals leaving through a
//! Neumann side are mirrored back; proposals crossing a Dirichlet side, or
//! whose Brownian bridge crosses it, absorb the walker.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryKind, Point2, Side, SquareDomain};
use crate::problem::{Coefficients, VectorField};
use crate::quadrature::gauss_legendre;
use crate::real::Real;
use crate::rng::{normal, uniform};
use crate::walk::{score_single, EventSink, Termination, WalkEnd, WalkOutcome};

/// Bridge crossing test is only attempted when both endpoints lie within this
/// many `√δ` of a Dirichlet side.
const BRIDGE_WINDOW: f64 = 6.0;

/// Largest exponent for which `exp(-x)` is not flushed to zero in f64.
const EXP_CUTOFF: f64 = 745.0;

/// `1/(2πξ²) · exp(-|p-q|²/ξ²)`.
pub fn gaussian_kernel<T: Real>(p: Point2<T>, q: Point2<T>, xi: T) -> T {
    let d2 = (p - q).norm_sq();
    (-d2 / (xi * xi)).exp() / (T::TAU() * xi * xi)
}

/// Kernel used to spread local time over the boundary layer, as a function
/// of the distance `d` to the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalTimeKernel {
    /// [`gaussian_kernel`] evaluated at `|X - πX| = d`.
    AsPrinted,
    /// Density of `N(0, ξ²)` at `d`.
    Normal,
    /// Density of `|N(0, ξ²)|` at `d`; integrates to one across the layer.
    #[default]
    HalfNormal,
}

impl LocalTimeKernel {
    #[inline]
    pub fn weight<T: Real>(self, d: T, xi: T) -> T {
        let half = T::lit(0.5);
        let (expo, norm) = match self {
            LocalTimeKernel::AsPrinted => (d * d / (xi * xi), T::one() / (T::TAU() * xi * xi)),
            LocalTimeKernel::Normal => (
                half * d * d / (xi * xi),
                T::one() / ((T::TAU()).sqrt() * xi),
            ),
            LocalTimeKernel::HalfNormal => (
                half * d * d / (xi * xi),
                T::lit(2.0) / ((T::TAU()).sqrt() * xi),
            ),
        };
        if expo > T::lit(EXP_CUTOFF) {
            T::zero()
        } else {
            norm * (-expo).exp()
        }
    }
}

impl std::str::FromStr for LocalTimeKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_printed" => Ok(Self::AsPrinted),
            "normal" => Ok(Self::Normal),
            "half_normal" => Ok(Self::HalfNormal),
            other => Err(Error::InvalidConfig(format!("unknown kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerConfig<T> {
    pub delta: T,
    pub xi: T,
    /// Final time; a hard cap for problems with a Dirichlet side.
    pub t0: T,
    pub seed: u64,
    pub kernel: LocalTimeKernel,
}

impl<T: Real> EulerConfig<T> {
    pub fn new(delta: T, xi: T, t0: T, seed: u64) -> Result<Self> {
        let cfg = Self {
            delta,
            xi,
            t0,
            seed,
            kernel: LocalTimeKernel::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_kernel(mut self, kernel: LocalTimeKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !pos(self.delta) || !pos(self.xi) || !pos(self.t0) {
            return Err(Error::InvalidConfig(format!(
                "delta, xi and t0 must be positive (got {}, {}, {})",
                self.delta, self.xi, self.t0
            )));
        }
        let n = (self.t0 / self.delta).round();
        let tol = T::epsilon().sqrt() * self.t0;
        if n < T::one() || (n * self.delta - self.t0).abs() > tol {
            return Err(Error::InvalidConfig(format!(
                "t0 = {} is not a positive integer multiple of delta = {}",
                self.t0, self.delta
            )));
        }
        Ok(())
    }

    /// `T₀/δ`.
    pub fn n_steps(&self) -> usize {
        (self.t0 / self.delta).round().to_usize().unwrap_or(0)
    }
}

/// One Euler step from `x` driven by the Brownian increment `dw`
/// (already scaled by `√δ`), mirrored back into the square if needed.
#[inline]
pub fn euler_step_with<T: Real>(
    x: Point2<T>,
    drift: Option<&VectorField<T>>,
    dom: &SquareDomain<T>,
    delta: T,
    dw: Point2<T>,
) -> Result<Point2<T>> {
    let y = propose(x, drift, delta, dw);
    if dom.contains(y) {
        Ok(y)
    } else {
        dom.symmetrize(y)
    }
}

#[inline]
fn propose<T: Real>(x: Point2<T>, drift: Option<&VectorField<T>>, delta: T, dw: Point2<T>) -> Point2<T> {
    match drift {
        Some(b) => x + b(x) * delta + dw,
        None => x + dw,
    }
}

#[inline]
fn brownian_increment<T: Real, R: Rng + ?Sized>(sqrt_delta: T, rng: &mut R) -> Point2<T> {
    let zx: T = normal(rng);
    let zy: T = normal(rng);
    Point2::new(zx * sqrt_delta, zy * sqrt_delta)
}

/// One reflected Euler step with fresh `N(0, δ)` increments.
pub fn euler_step<T: Real, R: Rng + ?Sized>(
    x: Point2<T>,
    coeffs: &Coefficients<T>,
    dom: &SquareDomain<T>,
    delta: T,
    rng: &mut R,
) -> Result<Point2<T>> {
    let dw = brownian_increment(delta.sqrt(), rng);
    euler_step_with(x, coeffs.drift.as_ref(), dom, delta, dw)
}

/// Reflected Euler walk from `start` reporting to `sink`. Runs `T₀/δ` steps
/// on a pure Neumann square; with Dirichlet sides it stops at the first
/// (direct or bridge) crossing, `T₀` acting as a cap.
pub fn walk_euler<T: Real, R: Rng + ?Sized, S: EventSink<T>>(
    start: Point2<T>,
    dom: &SquareDomain<T>,
    drift: Option<&VectorField<T>>,
    cfg: &EulerConfig<T>,
    rng: &mut R,
    sink: &mut S,
) -> Result<WalkEnd<T>> {
    if !dom.contains(start) || !start.is_finite() {
        return Err(Error::NotInside {
            x: start.x.to_f64_lossy(),
            y: start.y.to_f64_lossy(),
        });
    }
    let dirichlet: Vec<Side> = dom.dirichlet_sides().collect();
    for &side in &dirichlet {
        if dom.side_distance(start, side) <= T::zero() {
            sink.dirichlet(dom.project_onto_side(start, side), side);
            return Ok(WalkEnd {
                elapsed: T::zero(),
                cause: Termination::DirichletHit,
            });
        }
    }

    let delta = cfg.delta;
    let sqrt_delta = delta.sqrt();
    let window = T::lit(BRIDGE_WINDOW) * sqrt_delta;
    let two_over_delta = T::lit(2.0) / delta;
    let n_steps = cfg.n_steps();
    let score_boundary = sink.wants_boundary();

    let mut x = start;
    for k in 0..n_steps {
        sink.interior(x, delta);
        if score_boundary {
            let (side, d) = dom.nearest_side(x);
            if dom.kind(side) == BoundaryKind::Neumann {
                let w = cfg.kernel.weight(d, cfg.xi);
                if w > T::zero() {
                    sink.boundary(dom.project_onto_side(x, side), side, delta * w);
                }
            }
        }

        let y = propose(x, drift, delta, brownian_increment(sqrt_delta, rng));
        let elapsed = T::count(k + 1) * delta;
        for &side in &dirichlet {
            if dom.side_distance(y, side) < T::zero() {
                sink.dirichlet(dom.project_onto_side(y, side), side);
                return Ok(WalkEnd {
                    elapsed,
                    cause: Termination::DirichletHit,
                });
            }
        }
        let next = if dom.contains(y) { y } else { dom.symmetrize(y)? };
        for &side in &dirichlet {
            let d1 = dom.side_distance(x, side);
            let d2 = dom.side_distance(next, side);
            if d1 < window && d2 < window {
                let p = (-two_over_delta * d1 * d2).exp();
                if uniform::<T, _>(rng) < p {
                    sink.dirichlet(dom.project_onto_side(next, side), side);
                    return Ok(WalkEnd {
                        elapsed,
                        cause: Termination::DirichletHit,
                    });
                }
            }
        }
        x = next;
    }
    Ok(WalkEnd {
        elapsed: T::count(n_steps) * delta,
        cause: Termination::HorizonReached,
    })
}

/// Finite-horizon estimator sample for a pure Neumann problem.
pub fn run_neumann<T: Real, R: Rng + ?Sized>(
    start: Point2<T>,
    coeffs: &Coefficients<T>,
    dom: &SquareDomain<T>,
    cfg: &EulerConfig<T>,
    rng: &mut R,
) -> Result<WalkOutcome<T>> {
    if dom.has_dirichlet() {
        return Err(Error::InvalidConfig(
            "run_neumann requires every side to be Neumann".into(),
        ));
    }
    score_single(coeffs, |sink| {
        walk_euler(start, dom, coeffs.drift.as_ref(), cfg, rng, sink)
    })
}

/// Estimator sample for a problem with at least one Dirichlet side.
pub fn run_mixed<T: Real, R: Rng + ?Sized>(
    start: Point2<T>,
    coeffs: &Coefficients<T>,
    dom: &SquareDomain<T>,
    cfg: &EulerConfig<T>,
    rng: &mut R,
) -> Result<WalkOutcome<T>> {
    if !dom.has_dirichlet() {
        return Err(Error::InvalidConfig(
            "run_mixed requires a Dirichlet side".into(),
        ));
    }
    score_single(coeffs, |sink| {
        walk_euler(start, dom, coeffs.drift.as_ref(), cfg, rng, sink)
    })
}

/// `∫_D f p + ∫_{∂D} g p` by tensor Gauss–Legendre quadrature (32 nodes per
/// axis and per side).
pub fn compatibility_residual<T: Real>(
    coeffs: &Coefficients<T>,
    dom: &SquareDomain<T>,
    density: &dyn Fn(Point2<T>) -> T,
) -> T {
    let (nodes, weights) = gauss_legendre(32);
    let w = dom.half_width;
    let mut interior = T::zero();
    for (xi, wi) in nodes.iter().zip(&weights) {
        for (yj, wj) in nodes.iter().zip(&weights) {
            let p = Point2::new(T::lit(*xi) * w, T::lit(*yj) * w);
            interior += T::lit(wi * wj) * coeffs.f(p) * density(p);
        }
    }
    interior *= w * w;
    let mut boundary = T::zero();
    for side in Side::ALL {
        if dom.kind(side) != BoundaryKind::Neumann {
            continue;
        }
        let mut s = T::zero();
        for (t, wt) in nodes.iter().zip(&weights) {
            let t = T::lit(*t) * w;
            let q = match side {
                Side::Right | Side::Left => Point2::new(T::zero(), t),
                Side::Top | Side::Bottom => Point2::new(t, T::zero()),
            };
            let b = dom.project_onto_side(q, side);
            s += T::lit(*wt) * coeffs.g(b, side) * density(b);
        }
        boundary += s * w;
    }
    interior + boundary
}
