//! PDE data: drift, source, boundary data, and the four reference problems on
//! `[-1,1]²`.
//!
//! All problems are posed as `L u = -f` in D with `L = ½Δ + b·∇`, and on
//! Neumann sides `½ ∂u/∂n = g` with `n` the **outward** normal. With this
//! orientation the Feynman–Kac score is `∫ f ds + ∫ g dV`, and the
//! compatibility condition reads `∫ f p + ∫ g p = 0`.

use std::fmt;
use std::sync::Arc;

use crate::geometry::{Point2, Side, SquareDomain};
use crate::real::Real;

pub type ScalarField<T> = Arc<dyn Fn(Point2<T>) -> T + Send + Sync>;
pub type VectorField<T> = Arc<dyn Fn(Point2<T>) -> Point2<T> + Send + Sync>;
/// Boundary data, evaluated at a boundary point together with the side it
/// lies on (corners belong to two sides).
pub type BoundaryField<T> = Arc<dyn Fn(Point2<T>, Side) -> T + Send + Sync>;

#[derive(Clone)]
pub struct Coefficients<T> {
    /// `b(x)`; `None` means zero drift. The diffusion matrix is the identity.
    pub drift: Option<VectorField<T>>,
    pub source: ScalarField<T>,
    /// `g` on Neumann sides; `None` means homogeneous.
    pub neumann: Option<BoundaryField<T>>,
    /// Values on Dirichlet sides.
    pub dirichlet: Option<BoundaryField<T>>,
}

impl<T: Real> Coefficients<T> {
    pub fn new(source: ScalarField<T>) -> Self {
        Self {
            drift: None,
            source,
            neumann: None,
            dirichlet: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(Arc::new(|_| T::zero()))
    }

    pub fn constant_source(c: T) -> Self {
        Self::new(Arc::new(move |_| c))
    }

    pub fn with_drift(mut self, drift: VectorField<T>) -> Self {
        self.drift = Some(drift);
        self
    }

    pub fn with_neumann(mut self, g: BoundaryField<T>) -> Self {
        self.neumann = Some(g);
        self
    }

    pub fn with_dirichlet(mut self, g: BoundaryField<T>) -> Self {
        self.dirichlet = Some(g);
        self
    }

    #[inline]
    pub fn f(&self, p: Point2<T>) -> T {
        (self.source)(p)
    }

    #[inline]
    pub fn g(&self, b: Point2<T>, side: Side) -> T {
        self.neumann.as_ref().map_or(T::zero(), |g| g(b, side))
    }

    #[inline]
    pub fn dirichlet_value(&self, b: Point2<T>, side: Side) -> T {
        self.dirichlet.as_ref().map_or(T::zero(), |g| g(b, side))
    }

    #[inline]
    pub fn drift_at(&self, p: Point2<T>) -> Point2<T> {
        self.drift.as_ref().map_or(Point2::origin(), |b| b(p))
    }
}

impl<T> fmt::Debug for Coefficients<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficients")
            .field("drift", &self.drift.is_some())
            .field("neumann", &self.neumann.is_some())
            .field("dirichlet", &self.dirichlet.is_some())
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemId {
    /// Poisson problem with Dirichlet data on `x = 1`, Neumann elsewhere;
    /// solution `exp(α(x+y))`.
    Mixed,
    /// Homogeneous Neumann problem with solution
    /// `(x²−1)²(y²−1)² − 64/225`.
    HomogeneousNeumann,
    /// Pure Neumann problem with solution `exp(α(x+y))` minus its mean.
    PureNeumann,
    /// `½Δ + xβ_x ∂_x + yβ_y ∂_y` with solution `exp(α(x+y))` up to a
    /// constant.
    ConvectionDiffusion,
}

impl std::str::FromStr for ProblemId {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mixed" => Ok(Self::Mixed),
            "homogeneous_neumann" => Ok(Self::HomogeneousNeumann),
            "pure_neumann" => Ok(Self::PureNeumann),
            "convection" | "convection_diffusion" => Ok(Self::ConvectionDiffusion),
            other => Err(crate::error::Error::InvalidConfig(format!(
                "unknown problem id `{other}`"
            ))),
        }
    }
}

/// A reference problem: domain, coefficients and closed-form solution.
#[derive(Clone)]
pub struct Problem<T> {
    pub id: ProblemId,
    pub domain: SquareDomain<T>,
    pub coeffs: Coefficients<T>,
    /// Reference solution. For pure Neumann problems with a known invariant
    /// density this is the zero-mean representative.
    pub exact: ScalarField<T>,
    /// Whether `exact` is the representative with zero mean against the
    /// invariant measure.
    pub exact_is_centered: bool,
}

impl<T: Real> Problem<T> {
    #[inline]
    pub fn exact_at(&self, p: Point2<T>) -> T {
        (self.exact)(p)
    }
}

impl<T> fmt::Debug for Problem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("id", &self.id)
            .field("coeffs", &self.coeffs)
            .finish_non_exhaustive()
    }
}

/// `½ ∇u·n_out` for `u = exp(α(x+y))` on `side`.
fn exp_flux<T: Real>(alpha: T, b: Point2<T>, side: Side) -> T {
    let n = side.outward::<T>();
    let half = T::lit(0.5);
    half * alpha * (n.x + n.y) * (alpha * (b.x + b.y)).exp()
}

/// Mean of `exp(α(x+y))` over `[-1,1]²`: `(e^α − e^{−α})² / (4α²)`.
pub fn exp_mean<T: Real>(alpha: T) -> T {
    if alpha == T::zero() {
        return T::one();
    }
    let s = alpha.exp() - (-alpha).exp();
    s * s / (T::lit(4.0) * alpha * alpha)
}

pub fn builtin_problem<T: Real>(id: ProblemId, alpha: T, beta_x: T, beta_y: T) -> Problem<T> {
    let exp_u = move |p: Point2<T>| (alpha * (p.x + p.y)).exp();
    let flux: BoundaryField<T> = Arc::new(move |b, side| exp_flux(alpha, b, side));
    match id {
        ProblemId::Mixed => Problem {
            id,
            domain: SquareDomain::mixed(),
            coeffs: Coefficients::new(Arc::new(move |p| -alpha * alpha * exp_u(p)))
                .with_neumann(flux)
                .with_dirichlet(Arc::new(move |b, _| exp_u(b))),
            exact: Arc::new(exp_u),
            exact_is_centered: false,
        },
        ProblemId::HomogeneousNeumann => {
            let shift = T::lit(64.0 / 225.0);
            let two = T::lit(2.0);
            let three = T::lit(3.0);
            Problem {
                id,
                domain: SquareDomain::pure_neumann(),
                coeffs: Coefficients::new(Arc::new(move |p: Point2<T>| {
                    let (x2, y2) = (p.x * p.x, p.y * p.y);
                    let (ax, ay) = (x2 - T::one(), y2 - T::one());
                    -two * ((three * x2 - T::one()) * ay * ay + (three * y2 - T::one()) * ax * ax)
                })),
                exact: Arc::new(move |p: Point2<T>| {
                    let ax = p.x * p.x - T::one();
                    let ay = p.y * p.y - T::one();
                    ax * ax * ay * ay - shift
                }),
                exact_is_centered: true,
            }
        }
        ProblemId::PureNeumann => {
            let mean = exp_mean(alpha);
            Problem {
                id,
                domain: SquareDomain::pure_neumann(),
                coeffs: Coefficients::new(Arc::new(move |p| -alpha * alpha * exp_u(p)))
                    .with_neumann(flux),
                exact: Arc::new(move |p| exp_u(p) - mean),
                exact_is_centered: true,
            }
        }
        ProblemId::ConvectionDiffusion => Problem {
            id,
            domain: SquareDomain::pure_neumann(),
            coeffs: Coefficients::new(Arc::new(move |p: Point2<T>| {
                -alpha * (alpha + p.x * beta_x + p.y * beta_y) * exp_u(p)
            }))
            .with_neumann(flux)
            .with_drift(Arc::new(move |p: Point2<T>| {
                Point2::new(beta_x * p.x, beta_y * p.y)
            })),
            exact: Arc::new(exp_u),
            exact_is_centered: false,
        },
    }
}
