//! The square domain `[-w, w]²`: boundary sides, distances, projections and
//! the mirror reflection used by the reflected Euler scheme.
//!
//! Only the identity diffusion matrix is supported, so the conormal direction
//! coincides with the normal and reflection is plain coordinate mirroring.
//! A general `a·n` conormal would replace [`SquareDomain::symmetrize`].

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.x * self.x + self.y * self.y
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Counter-clockwise rotation by `angle` radians.
    #[inline]
    pub fn rotate(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        self.rotate_sc(s, c)
    }

    /// Rotation given a precomputed `(sin, cos)` pair.
    #[inline]
    pub fn rotate_sc(self, s: T, c: T) -> Self {
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn from_f64(x: f64, y: f64) -> Self {
        Self::new(T::lit(x), T::lit(y))
    }
}

impl<T: Real> Add for Point2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Point2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Point2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Real> Neg for Point2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// One side of the square. Declaration order is the tie-break priority for
/// projections: right, then top, then left, then bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Right,
    Top,
    Left,
    Bottom,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Right, Side::Top, Side::Left, Side::Bottom];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Side::Right => 0,
            Side::Top => 1,
            Side::Left => 2,
            Side::Bottom => 3,
        }
    }

    /// Unit normal pointing into the domain.
    #[inline]
    pub fn inward<T: Real>(self) -> Point2<T> {
        let (o, z) = (T::one(), T::zero());
        match self {
            Side::Right => Point2::new(-o, z),
            Side::Top => Point2::new(z, -o),
            Side::Left => Point2::new(o, z),
            Side::Bottom => Point2::new(z, o),
        }
    }

    #[inline]
    pub fn outward<T: Real>(self) -> Point2<T> {
        -self.inward()
    }

    /// Unit tangent (inward normal rotated by +90°).
    #[inline]
    pub fn tangent<T: Real>(self) -> Point2<T> {
        let n = self.inward::<T>();
        Point2::new(-n.y, n.x)
    }

    /// Coordinate running along the side (`y` on vertical sides, `x` on
    /// horizontal ones).
    #[inline]
    pub fn along<T: Real>(self, p: Point2<T>) -> T {
        match self {
            Side::Right | Side::Left => p.y,
            Side::Top | Side::Bottom => p.x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// The square `[-half_width, half_width]²` with a boundary condition kind per
/// side. Containment is closed: points on ∂D are inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareDomain<T> {
    pub half_width: T,
    kinds: [BoundaryKind; 4],
}

impl<T: Real> SquareDomain<T> {
    pub fn new(half_width: T, kinds: [BoundaryKind; 4]) -> Result<Self> {
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        Ok(Self { half_width, kinds })
    }

    /// `[-1,1]²` with homogeneous Neumann tagging on all four sides.
    pub fn pure_neumann() -> Self {
        Self {
            half_width: T::one(),
            kinds: [BoundaryKind::Neumann; 4],
        }
    }

    /// `[-1,1]²` with the right side `x = 1` Dirichlet and the other three
    /// Neumann.
    pub fn mixed() -> Self {
        let mut kinds = [BoundaryKind::Neumann; 4];
        kinds[Side::Right.index()] = BoundaryKind::Dirichlet;
        Self {
            half_width: T::one(),
            kinds,
        }
    }

    #[inline]
    pub fn kind(&self, side: Side) -> BoundaryKind {
        self.kinds[side.index()]
    }

    pub fn is_pure_neumann(&self) -> bool {
        self.kinds.iter().all(|k| *k == BoundaryKind::Neumann)
    }

    pub fn has_dirichlet(&self) -> bool {
        self.kinds.contains(&BoundaryKind::Dirichlet)
    }

    pub fn dirichlet_sides(&self) -> impl Iterator<Item = Side> + '_ {
        Side::ALL
            .into_iter()
            .filter(|s| self.kind(*s) == BoundaryKind::Dirichlet)
    }

    #[inline]
    pub fn contains(&self, p: Point2<T>) -> bool {
        p.x.abs() <= self.half_width && p.y.abs() <= self.half_width
    }

    /// Signed distance from `p` to the line carrying `side`; positive inside.
    #[inline]
    pub fn side_distance(&self, p: Point2<T>, side: Side) -> T {
        let w = self.half_width;
        match side {
            Side::Right => w - p.x,
            Side::Top => w - p.y,
            Side::Left => p.x + w,
            Side::Bottom => p.y + w,
        }
    }

    /// Nearest side and the distance to it, ties resolved by [`Side`] order.
    #[inline]
    pub fn nearest_side(&self, p: Point2<T>) -> (Side, T) {
        let mut best = (Side::Right, self.side_distance(p, Side::Right));
        for side in [Side::Top, Side::Left, Side::Bottom] {
            let d = self.side_distance(p, side);
            if d < best.1 {
                best = (side, d);
            }
        }
        best
    }

    /// Distance from a strictly interior point to ∂D.
    pub fn distance_to_boundary(&self, p: Point2<T>) -> Result<T> {
        let (_, d) = self.nearest_side(p);
        if d > T::zero() && p.is_finite() {
            Ok(d)
        } else {
            Err(not_inside(p))
        }
    }

    /// Orthogonal projection of an interior (or boundary) point on the
    /// nearest side.
    pub fn project_to_boundary(&self, p: Point2<T>) -> Result<(Point2<T>, Side)> {
        if !self.contains(p) || !p.is_finite() {
            return Err(not_inside(p));
        }
        let (side, _) = self.nearest_side(p);
        Ok((self.project_onto_side(p, side), side))
    }

    /// Projection on the segment of `side`, clamping the tangential
    /// coordinate to the segment.
    #[inline]
    pub fn project_onto_side(&self, p: Point2<T>, side: Side) -> Point2<T> {
        let w = self.half_width;
        let clamp = |v: T| v.max(-w).min(w);
        match side {
            Side::Right => Point2::new(w, clamp(p.y)),
            Side::Left => Point2::new(-w, clamp(p.y)),
            Side::Top => Point2::new(clamp(p.x), w),
            Side::Bottom => Point2::new(clamp(p.x), -w),
        }
    }

    /// Mirrors an outside point across every side it violates.
    pub fn symmetrize(&self, p: Point2<T>) -> Result<Point2<T>> {
        let w = self.half_width;
        let two_w = w + w;
        let mirror = |v: T| {
            if v > w {
                two_w - v
            } else if v < -w {
                -two_w - v
            } else {
                v
            }
        };
        let q = Point2::new(mirror(p.x), mirror(p.y));
        if self.contains(q) && q.is_finite() {
            Ok(q)
        } else {
            Err(Error::ReflectionOvershoot {
                x: p.x.to_f64_lossy(),
                y: p.y.to_f64_lossy(),
            })
        }
    }

    /// Inward direction used to re-inject a walker sitting at boundary point
    /// `b` on `side`. At a corner the normalized diagonal is returned.
    pub fn reinjection_normal(&self, b: Point2<T>, side: Side) -> Point2<T> {
        let w = self.half_width;
        let tol = w * T::lit(1e-12);
        let on_x = (b.x.abs() - w).abs() <= tol;
        let on_y = (b.y.abs() - w).abs() <= tol;
        if on_x && on_y {
            let s = T::FRAC_1_SQRT_2();
            Point2::new(-b.x.signum() * s, -b.y.signum() * s)
        } else {
            side.inward()
        }
    }
}

fn not_inside<T: Real>(p: Point2<T>) -> Error {
    Error::NotInside {
        x: p.x.to_f64_lossy(),
        y: p.y.to_f64_lossy(),
    }
}
