//! What a walker reports while it moves, and how a trajectory ends.
//!
//! Walkers never evaluate `f` or `g` themselves. They emit weighted events
//! to an [`EventSink`]: interior points with a time weight (`β`, scored
//! against `f`), boundary points with a local-time weight (`α`, scored
//! against `g`), and Dirichlet absorption points. [`ScoreSink`] turns the
//! events into Feynman–Kac scores for one or several problems sharing the
//! same trajectory; the spectral solver plugs in its own sink.

use crate::geometry::{Point2, Side};
use crate::problem::Coefficients;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    HorizonReached,
    DirichletHit,
}

/// End state of a trajectory, independent of what was scored along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkEnd<T> {
    pub elapsed: T,
    pub cause: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkOutcome<T> {
    pub score: T,
    pub elapsed: T,
    pub cause: Termination,
}

pub trait EventSink<T: Real> {
    /// Time spent near interior point `p`, weight in time units.
    fn interior(&mut self, p: Point2<T>, weight: T);

    /// Local time charged to boundary point `b` of `side`.
    fn boundary(&mut self, b: Point2<T>, side: Side, weight: T);

    /// Absorption on a Dirichlet side at `b`.
    fn dirichlet(&mut self, b: Point2<T>, side: Side);

    /// Whether boundary events carry any information. Walkers skip the
    /// kernel evaluation when this is false.
    fn wants_boundary(&self) -> bool {
        true
    }
}

/// Feynman–Kac scores of several problems along one shared trajectory.
pub struct ScoreSink<'a, T> {
    problems: &'a [&'a Coefficients<T>],
    pub scores: Vec<T>,
    wants_boundary: bool,
}

impl<'a, T: Real> ScoreSink<'a, T> {
    pub fn new(problems: &'a [&'a Coefficients<T>]) -> Self {
        Self {
            problems,
            scores: vec![T::zero(); problems.len()],
            wants_boundary: problems.iter().any(|c| c.neumann.is_some()),
        }
    }

    pub fn reset(&mut self) {
        self.scores.iter_mut().for_each(|s| *s = T::zero());
    }
}

impl<T: Real> EventSink<T> for ScoreSink<'_, T> {
    #[inline]
    fn interior(&mut self, p: Point2<T>, weight: T) {
        for (s, c) in self.scores.iter_mut().zip(self.problems) {
            *s += weight * c.f(p);
        }
    }

    #[inline]
    fn boundary(&mut self, b: Point2<T>, side: Side, weight: T) {
        for (s, c) in self.scores.iter_mut().zip(self.problems) {
            *s += weight * c.g(b, side);
        }
    }

    #[inline]
    fn dirichlet(&mut self, b: Point2<T>, side: Side) {
        for (s, c) in self.scores.iter_mut().zip(self.problems) {
            *s += c.dirichlet_value(b, side);
        }
    }

    fn wants_boundary(&self) -> bool {
        self.wants_boundary
    }
}

/// Records nothing. Useful to drive a walker for its end state only.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl<T: Real> EventSink<T> for NullSink {
    fn interior(&mut self, _: Point2<T>, _: T) {}
    fn boundary(&mut self, _: Point2<T>, _: Side, _: T) {}
    fn dirichlet(&mut self, _: Point2<T>, _: Side) {}
    fn wants_boundary(&self) -> bool {
        false
    }
}

/// Runs a sink-driven walker for a single problem and packages the score.
pub(crate) fn score_single<T: Real, E>(
    coeffs: &Coefficients<T>,
    walk: impl FnOnce(&mut ScoreSink<'_, T>) -> Result<WalkEnd<T>, E>,
) -> Result<WalkOutcome<T>, E> {
    let problems = [coeffs];
    let mut sink = ScoreSink::new(&problems);
    let end = walk(&mut sink)?;
    Ok(WalkOutcome {
        score: sink.scores[0],
        elapsed: end.elapsed,
        cause: end.cause,
    })
}
