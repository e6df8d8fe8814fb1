//! Boundary replacement schemes for walkers that reach a Neumann side.
//!
//! Each scheme moves the walker from boundary point `b` back inside by a
//! distance of order `h` and charges a score `c_g(h)·g(b) + c_f(h)·f(z)`
//! plus a time increment. In the local frame `n` is the inward normal and
//! `t` the tangent:
//!
//! | scheme   | new point                     | `g` weight | `f` term        | time      |
//! |----------|-------------------------------|------------|-----------------|-----------|
//! | fd1      | `b + h n`                     | `2h`       | none            | 0         |
//! | diamond  | `b + h n`, `b ± h t` (½,¼,¼)  | `h`        | `h²/2 · f(b)`   | `h²/2`    |
//! | oneside3 | `b + h n ± h t`               | `2h`       | `h² f(b + h n)` | `h²`      |
//! | oneside2 | `b + h n ± h t`               | `2h`       | none            | `h²`      |
//! | kinetic  | `b + h t_c (cosθ n + sinθ t)` | `4h/π`     | `h² f(b)`       | `h² t_c`  |
//!
//! If the new point falls outside the square, `h` is halved (keeping the
//! random draws) and the score recomputed.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{Point2, Side, SquareDomain};
use crate::problem::Coefficients;
use crate::real::Real;
use crate::rng::{exp1, uniform};

/// Halvings attempted before falling back to a pure normal displacement.
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Fd1,
    Diamond,
    OneSide3,
    /// `oneside3` without the source term.
    OneSide2,
    Kinetic,
}

impl SchemeKind {
    /// Whether the scheme reports elapsed time (needed for finite horizons).
    pub fn tracks_time(self) -> bool {
        !matches!(self, SchemeKind::Fd1)
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Fd1 => "fd1",
            SchemeKind::Diamond => "diamond",
            SchemeKind::OneSide3 => "oneside3",
            SchemeKind::OneSide2 => "oneside2",
            SchemeKind::Kinetic => "kinetic",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fd1" => Ok(Self::Fd1),
            "diamond" => Ok(Self::Diamond),
            "oneside3" => Ok(Self::OneSide3),
            "oneside2" => Ok(Self::OneSide2),
            "kinetic" => Ok(Self::Kinetic),
            other => Err(Error::InvalidConfig(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Kinetic scheme only: charge `h²` instead of `h² t_c`.
    pub kinetic_fixed_time: bool,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            kinetic_fixed_time: false,
        }
    }
}

/// Random input of one scheme application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Draw<T> {
    Fd1,
    /// 0: normal, 1: `+t`, 2: `-t`.
    Diamond(u8),
    /// `±1` along the tangent.
    OneSide(i8),
    /// As `OneSide`, no source term.
    OneSidePlain(i8),
    Kinetic { t_c: T, theta: T },
}

impl<T: Real> Draw<T> {
    pub fn sample<R: Rng + ?Sized>(kind: SchemeKind, rng: &mut R) -> Self {
        match kind {
            SchemeKind::Fd1 => Draw::Fd1,
            SchemeKind::Diamond => {
                let u: f64 = uniform(rng);
                Draw::Diamond(if u < 0.5 {
                    0
                } else if u < 0.75 {
                    1
                } else {
                    2
                })
            }
            SchemeKind::OneSide3 => Draw::OneSide(if rng.random::<bool>() { 1 } else { -1 }),
            SchemeKind::OneSide2 => Draw::OneSidePlain(if rng.random::<bool>() { 1 } else { -1 }),
            SchemeKind::Kinetic => {
                let t_c = exp1(rng);
                let u: T = uniform(rng);
                Draw::Kinetic {
                    t_c,
                    theta: (u - T::lit(0.5)) * T::PI(),
                }
            }
        }
    }
}

/// Deterministic result of a scheme: where the walker goes and what is
/// charged. Scores are left to the caller so several problems (or the
/// spectral assembly) can share one application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replacement<T> {
    pub new_point: Point2<T>,
    /// Weight of `g(b)`.
    pub g_weight: T,
    pub f_point: Point2<T>,
    /// Weight of `f(f_point)`.
    pub f_weight: T,
    pub time_inc: T,
    /// Step actually used after halving.
    pub h: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOutcome<T> {
    pub new_point: Point2<T>,
    pub score_inc: T,
    pub time_inc: T,
}

impl<T: Real> Replacement<T> {
    pub fn outcome(&self, b: Point2<T>, side: Side, coeffs: &Coefficients<T>) -> SchemeOutcome<T> {
        let mut score = self.g_weight * coeffs.g(b, side);
        if self.f_weight != T::zero() {
            score += self.f_weight * coeffs.f(self.f_point);
        }
        SchemeOutcome {
            new_point: self.new_point,
            score_inc: score,
            time_inc: self.time_inc,
        }
    }
}

fn candidate<T: Real>(
    draw: Draw<T>,
    b: Point2<T>,
    n: Point2<T>,
    t: Point2<T>,
    h: T,
    fixed_time: bool,
) -> Replacement<T> {
    let two = T::lit(2.0);
    let h2 = h * h;
    match draw {
        Draw::Fd1 => Replacement {
            new_point: b + n * h,
            g_weight: two * h,
            f_point: b,
            f_weight: T::zero(),
            time_inc: T::zero(),
            h,
        },
        Draw::Diamond(k) => {
            let d = match k {
                0 => n,
                1 => t,
                _ => -t,
            };
            Replacement {
                new_point: b + d * h,
                g_weight: h,
                f_point: b,
                f_weight: T::lit(0.5) * h2,
                time_inc: T::lit(0.5) * h2,
                h,
            }
        }
        Draw::OneSide(s) | Draw::OneSidePlain(s) => {
            let sign = if s >= 0 { T::one() } else { -T::one() };
            let with_f = matches!(draw, Draw::OneSide(_));
            Replacement {
                new_point: b + (n + t * sign) * h,
                g_weight: two * h,
                f_point: b + n * h,
                f_weight: if with_f { h2 } else { T::zero() },
                time_inc: h2,
                h,
            }
        }
        Draw::Kinetic { t_c, theta } => {
            let (s, c) = theta.sin_cos();
            Replacement {
                new_point: b + (n * c + t * s) * (h * t_c),
                g_weight: T::lit(4.0) / T::PI() * h,
                f_point: b,
                f_weight: h2,
                time_inc: if fixed_time { h2 } else { h2 * t_c },
                h,
            }
        }
    }
}

/// Applies a scheme with given random input, halving `h` until the new
/// point is inside the closed square.
pub fn replace_with<T: Real>(
    draw: Draw<T>,
    b: Point2<T>,
    side: Side,
    h: T,
    dom: &SquareDomain<T>,
    kinetic_fixed_time: bool,
) -> Result<Replacement<T>> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidConfig(format!("scheme step h must be positive, got {h}")));
    }
    let n = dom.reinjection_normal(b, side);
    let t = Point2::new(-n.y, n.x);
    let mut step = h;
    for _ in 0..MAX_HALVINGS {
        let r = candidate(draw, b, n, t, step, kinetic_fixed_time);
        if dom.contains(r.new_point) && r.new_point.is_finite() {
            return Ok(r);
        }
        step *= T::lit(0.5);
    }
    // Only reachable from an exact corner, where tangential moves always
    // leave the square: move along the diagonal with the full step.
    let mut r = candidate(draw, b, n, t, h, kinetic_fixed_time);
    r.new_point = b + n * h;
    if dom.contains(r.new_point) {
        Ok(r)
    } else {
        Err(Error::Degenerate(format!(
            "no interior replacement from ({}, {})",
            b.x, b.y
        )))
    }
}

/// Draws the random input and applies the scheme.
pub fn replace<T: Real, R: Rng + ?Sized>(
    cfg: SchemeConfig,
    b: Point2<T>,
    side: Side,
    h: T,
    dom: &SquareDomain<T>,
    rng: &mut R,
) -> Result<Replacement<T>> {
    let draw = Draw::sample(cfg.kind, rng);
    replace_with(draw, b, side, h, dom, cfg.kinetic_fixed_time)
}

/// Order-1 finite difference `u(b) ≈ 2h g(b) + u(b + h n)`.
pub fn fd1<T: Real>(
    b: Point2<T>,
    side: Side,
    h: T,
    dom: &SquareDomain<T>,
    coeffs: &Coefficients<T>,
) -> Result<SchemeOutcome<T>> {
    Ok(replace_with(Draw::Fd1, b, side, h, dom, false)?.outcome(b, side, coeffs))
}

pub fn fd3_diamond<T: Real, R: Rng + ?Sized>(
    b: Point2<T>,
    side: Side,
    h: T,
    dom: &SquareDomain<T>,
    coeffs: &Coefficients<T>,
    rng: &mut R,
) -> Result<SchemeOutcome<T>> {
    let r = replace(SchemeConfig::new(SchemeKind::Diamond), b, side, h, dom, rng)?;
    Ok(r.outcome(b, side, coeffs))
}

pub fn fd3_oneside<T: Real, R: Rng + ?Sized>(
    b: Point2<T>,
    side: Side,
    h: T,
    dom: &SquareDomain<T>,
    coeffs: &Coefficients<T>,
    rng: &mut R,
) -> Result<SchemeOutcome<T>> {
    let r = replace(SchemeConfig::new(SchemeKind::OneSide3), b, side, h, dom, rng)?;
    Ok(r.outcome(b, side, coeffs))
}

pub fn kinetic<T: Real, R: Rng + ?Sized>(
    b: Point2<T>,
    side: Side,
    h: T,
    dom: &SquareDomain<T>,
    coeffs: &Coefficients<T>,
    rng: &mut R,
) -> Result<SchemeOutcome<T>> {
    let r = replace(SchemeConfig::new(SchemeKind::Kinetic), b, side, h, dom, rng)?;
    Ok(r.outcome(b, side, coeffs))
}

/// Exact expectation of `u(new_point) + score` minus `u(b)` for one
/// application at `b`, for a test function `u` with matching `f`, `g`.
///
/// Finite-support schemes are summed exactly; the kinetic scheme is
/// integrated by Gauss–Legendre in `θ` and a composite rule in `t_c`.
pub fn consistency_defect(
    kind: SchemeKind,
    b: Point2<f64>,
    side: Side,
    h: f64,
    dom: &SquareDomain<f64>,
    coeffs: &Coefficients<f64>,
    u: &dyn Fn(Point2<f64>) -> f64,
) -> Result<f64> {
    let value = |draw: Draw<f64>| -> Result<f64> {
        let r = replace_with(draw, b, side, h, dom, false)?;
        let o = r.outcome(b, side, coeffs);
        Ok(u(o.new_point) + o.score_inc)
    };
    let mean = match kind {
        SchemeKind::Fd1 => value(Draw::Fd1)?,
        SchemeKind::Diamond => {
            0.5 * value(Draw::Diamond(0))?
                + 0.25 * value(Draw::Diamond(1))?
                + 0.25 * value(Draw::Diamond(2))?
        }
        SchemeKind::OneSide3 => 0.5 * (value(Draw::OneSide(1))? + value(Draw::OneSide(-1))?),
        SchemeKind::OneSide2 => 0.5 * (value(Draw::OneSidePlain(1))? + value(Draw::OneSidePlain(-1))?),
        SchemeKind::Kinetic => {
            let (tn, tw) = crate::quadrature::gauss_legendre(48);
            let half_pi = std::f64::consts::FRAC_PI_2;
            let panels = 80;
            let t_max = 40.0;
            let width = t_max / panels as f64;
            let mut acc = 0.0;
            for p in 0..panels {
                let a = p as f64 * width;
                for (x, w) in tn.iter().zip(&tw) {
                    let t_c = a + 0.5 * width * (x + 1.0);
                    let wt = 0.5 * width * w * (-t_c).exp();
                    let mut inner = 0.0;
                    for (y, v) in tn.iter().zip(&tw) {
                        let theta = half_pi * y;
                        inner += 0.5 * v * value(Draw::Kinetic { t_c, theta })?;
                    }
                    acc += wt * inner;
                }
            }
            acc
        }
    };
    Ok(mean - u(b))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    type P = Point2<f64>;

    fn data(f: f64, g: f64) -> Coefficients<f64> {
        Coefficients::constant_source(f).with_neumann(Arc::new(move |_, _| g))
    }

    #[test]
    fn fd1_examples() {
        let dom = SquareDomain::pure_neumann();
        let b = P::new(1.0, 0.2);
        let o = fd1(b, Side::Right, 0.1, &dom, &data(0.0, 0.0)).unwrap();
        assert_eq!(o.score_inc, 0.0);
        assert!((o.new_point.x - 0.9).abs() < 1e-15 && o.new_point.y == 0.2);
        assert_eq!(o.time_inc, 0.0);
        let o = fd1(b, Side::Right, 0.1, &dom, &data(0.0, 1.0)).unwrap();
        assert!((o.score_inc - 0.2).abs() < 1e-15);
    }

    #[test]
    fn plug_in_scores() {
        let dom = SquareDomain::pure_neumann();
        let b = P::new(0.0, -1.0);
        let mut rng = stream_rng(0, 0);
        let o = fd3_oneside(b, Side::Bottom, 0.1, &dom, &data(3.0, 1.0), &mut rng).unwrap();
        assert!((o.score_inc - 0.23).abs() < 1e-14);
        assert!((o.time_inc - 0.01).abs() < 1e-15);
        assert!((o.new_point.y + 0.9).abs() < 1e-15 && (o.new_point.x.abs() - 0.1).abs() < 1e-15);

        let o = fd3_diamond(b, Side::Bottom, 0.1, &dom, &data(2.0, 1.0), &mut rng).unwrap();
        assert!((o.score_inc - (0.01 + 0.1)).abs() < 1e-14);

        let o = kinetic(b, Side::Bottom, 0.1, &dom, &data(0.0, std::f64::consts::FRAC_PI_4), &mut rng)
            .unwrap();
        assert!((o.score_inc - 0.1).abs() < 1e-14);

        for kind in [SchemeKind::Diamond, SchemeKind::OneSide3, SchemeKind::Kinetic] {
            let r = replace(SchemeConfig::new(kind), b, Side::Bottom, 0.1, &dom, &mut rng).unwrap();
            assert_eq!(r.outcome(b, Side::Bottom, &data(0.0, 0.0)).score_inc, 0.0);
        }
    }

    #[test]
    fn diamond_frequencies() {
        let dom = SquareDomain::pure_neumann();
        let b = P::new(-1.0, 0.0);
        let mut rng = stream_rng(5, 0);
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            let o = fd3_diamond(b, Side::Left, 0.1, &dom, &data(0.0, 0.0), &mut rng).unwrap();
            let d = o.new_point - b;
            let k = if d.x > 0.05 {
                0
            } else if d.y > 0.0 {
                1
            } else {
                2
            };
            counts[k] += 1;
        }
        let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        assert!((freq[0] - 0.5).abs() < 0.01);
        assert!((freq[1] - 0.25).abs() < 0.01);
        assert!((freq[2] - 0.25).abs() < 0.01);
    }

    #[test]
    fn kinetic_mean_time() {
        let dom = SquareDomain::pure_neumann();
        let b = P::new(0.0, 1.0);
        let mut rng = stream_rng(8, 0);
        let n = 100_000;
        let h = 0.05;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let o = kinetic(b, Side::Top, h, &dom, &data(0.0, 0.0), &mut rng).unwrap();
            s += o.time_inc;
            s2 += o.time_inc * o.time_inc;
        }
        let m = s / n as f64;
        let se = ((s2 / n as f64 - m * m) / n as f64).sqrt();
        assert!((m - h * h).abs() < 4.0 * se, "{m} vs {}", h * h);
        let fixed = SchemeConfig {
            kind: SchemeKind::Kinetic,
            kinetic_fixed_time: true,
        };
        let r = replace(fixed, b, Side::Top, h, &dom, &mut rng).unwrap();
        assert_eq!(r.time_inc, h * h);
    }

    #[test]
    fn halving_near_corner() {
        let dom = SquareDomain::pure_neumann();
        let b = P::new(1.0, 0.97);
        let r = replace_with(Draw::OneSide(-1), b, Side::Right, 0.1, &dom, false).unwrap();
        assert!((r.h - 0.025).abs() < 1e-15);
        assert!((r.g_weight - 0.05).abs() < 1e-15);
        assert!(dom.contains(r.new_point));
        let corner = P::new(1.0, 1.0);
        let r = replace_with(Draw::Diamond(1), corner, Side::Right, 0.1, &dom, false).unwrap();
        assert!(dom.contains(r.new_point));
        assert!(r.new_point.x < 1.0 && r.new_point.y < 1.0);
    }

    /// `u = e^x cos y` is harmonic; on the right side `g = ½ ∂u/∂x`.
    fn harmonic() -> (Coefficients<f64>, impl Fn(P) -> f64) {
        let u = |p: P| p.x.exp() * p.y.cos();
        let c = Coefficients::zero().with_neumann(Arc::new(move |b: P, side: Side| {
            let grad = P::new(b.x.exp() * b.y.cos(), -b.x.exp() * b.y.sin());
            0.5 * grad.dot(side.outward())
        }));
        (c, u)
    }

    fn slope(kind: SchemeKind) -> f64 {
        let dom = SquareDomain::pure_neumann();
        let (c, u) = harmonic();
        let hs = [0.2, 0.1, 0.05];
        let pts: Vec<(f64, f64)> = hs
            .iter()
            .map(|&h| {
                let e = consistency_defect(kind, P::new(1.0, 0.3), Side::Right, h, &dom, &c, &u)
                    .unwrap();
                (h.ln(), e.abs().ln())
            })
            .collect();
        crate::estimators::fit_slope(&pts).unwrap()
    }

    #[test]
    fn consistency_orders() {
        assert!(slope(SchemeKind::OneSide3) >= 2.5);
        assert!(slope(SchemeKind::Diamond) >= 2.5);
        assert!(slope(SchemeKind::Kinetic) >= 2.5);
        let s1 = slope(SchemeKind::Fd1);
        assert!((s1 - 2.0).abs() < 0.2, "fd1 slope {s1}");
    }

    #[test]
    fn linear_function_is_reproduced() {
        // u = x: g = ½ on the right side; one-sided and diamond schemes are
        // exact for linear data.
        let dom = SquareDomain::pure_neumann();
        let c = data(0.0, 0.5);
        let u = |p: P| p.x;
        for kind in [SchemeKind::OneSide3, SchemeKind::Diamond, SchemeKind::Fd1] {
            let e = consistency_defect(kind, P::new(1.0, -0.4), Side::Right, 0.1, &dom, &c, &u).unwrap();
            assert!(e.abs() < 1e-14, "{kind:?}: {e}");
        }
    }

    #[test]
    fn source_term_of_the_one_sided_scheme() {
        // u = x²: ½Δu = 1 so f = -1, and g = 1 on the right side.
        let dom = SquareDomain::pure_neumann();
        let c = data(-1.0, 1.0);
        let u = |p: P| p.x * p.x;
        for h in [0.2, 0.1] {
            let e3 = consistency_defect(SchemeKind::OneSide3, P::new(1.0, 0.1), Side::Right, h, &dom, &c, &u).unwrap();
            let e2 = consistency_defect(SchemeKind::OneSide2, P::new(1.0, 0.1), Side::Right, h, &dom, &c, &u).unwrap();
            assert!(e3.abs() < 1e-14);
            assert!((e2 - h * h).abs() < 1e-14, "{e2}");
        }
        assert_eq!("oneside2".parse::<SchemeKind>().unwrap(), SchemeKind::OneSide2);
        assert!(SchemeKind::OneSide2.tracks_time());
    }

    proptest! {
        #[test]
        fn replacement_is_inside(seed in 0u64..10_000, t in -1.0f64..=1.0, side_i in 0usize..4,
                                 h in 0.01f64..0.5, k in 0usize..5) {
            let dom = SquareDomain::pure_neumann();
            let side = Side::ALL[side_i];
            let b = dom.project_onto_side(match side {
                Side::Right | Side::Left => P::new(0.0, t),
                _ => P::new(t, 0.0),
            }, side);
            let kind = [SchemeKind::Fd1, SchemeKind::Diamond, SchemeKind::OneSide3, SchemeKind::OneSide2, SchemeKind::Kinetic][k];
            let mut rng = stream_rng(seed, 0);
            let r = replace(SchemeConfig::new(kind), b, side, h, &dom, &mut rng).unwrap();
            prop_assert!(dom.contains(r.new_point));
            prop_assert!(r.h <= h && r.time_inc >= 0.0);
        }
    }
}
