//! Walk traces, linear system assembly and solution.
//!
//! A walk from node `x_i` is summarised by the polynomial moments of its
//! events: `Σβ x^a y^b` over interior events and `Σα t^b` per side over
//! boundary events (`t` the coordinate along the side). Every entry
//! `Σα ∂Ψ_k/∂n_a − Σβ LΨ_k` is then an exact linear form in these moments.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{McSummary, ParticleCloud, Welford};
use crate::euler::{walk_euler, EulerConfig};
use crate::geometry::{Point2, Side, SquareDomain};
use crate::problem::Coefficients;
use crate::real::Real;
use crate::rng::{derive_seed, stream_rng};
use crate::walk::EventSink;

use super::basis::{Poly, TchebBasis};
use super::centering::CenteredBasis;

const CHUNK: u64 = 256;

/// Drift `(β_x x, β_y y)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearDrift {
    pub bx: f64,
    pub by: f64,
}

/// Averaged event moments of the walks started at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrace {
    pub degree: usize,
    /// `Σβ x^a y^b`, index `a (N+1) + b`.
    pub interior: Vec<f64>,
    /// `Σα t^b`, by [`Side::index`].
    pub boundary: [Vec<f64>; 4],
    /// Feynman–Kac score `Σβ f + Σα g`.
    pub score: McSummary,
}

impl NodeTrace {
    /// Trace of walks that recorded nothing.
    pub fn empty(degree: usize) -> Self {
        let n1 = degree + 1;
        Self {
            degree,
            interior: vec![0.0; n1 * n1],
            boundary: std::array::from_fn(|_| vec![0.0; n1]),
            score: McSummary {
                n: 0,
                mean: 0.0,
                variance: 0.0,
                std_error: 0.0,
            },
        }
    }
}

struct MomentSink<'a, T> {
    n1: usize,
    coeffs: &'a Coefficients<T>,
    interior: Vec<f64>,
    boundary: [Vec<f64>; 4],
    score: f64,
    px: Vec<f64>,
    py: Vec<f64>,
}

impl<'a, T: Real> MomentSink<'a, T> {
    fn new(degree: usize, coeffs: &'a Coefficients<T>) -> Self {
        let n1 = degree + 1;
        Self {
            n1,
            coeffs,
            interior: vec![0.0; n1 * n1],
            boundary: std::array::from_fn(|_| vec![0.0; n1]),
            score: 0.0,
            px: vec![1.0; n1],
            py: vec![1.0; n1],
        }
    }
}

impl<T: Real> EventSink<T> for MomentSink<'_, T> {
    #[inline]
    fn interior(&mut self, p: Point2<T>, weight: T) {
        let (x, y, w) = (p.x.to_f64_lossy(), p.y.to_f64_lossy(), weight.to_f64_lossy());
        self.px[0] = w;
        self.py[0] = 1.0;
        for k in 1..self.n1 {
            self.px[k] = self.px[k - 1] * x;
            self.py[k] = self.py[k - 1] * y;
        }
        for (row, &a) in self.interior.chunks_exact_mut(self.n1).zip(&self.px) {
            for (m, &b) in row.iter_mut().zip(&self.py) {
                *m += a * b;
            }
        }
        self.score += (weight * self.coeffs.f(p)).to_f64_lossy();
    }

    #[inline]
    fn boundary(&mut self, b: Point2<T>, side: Side, weight: T) {
        let t = side.along(b).to_f64_lossy();
        let mut v = weight.to_f64_lossy();
        for m in self.boundary[side.index()].iter_mut() {
            *m += v;
            v *= t;
        }
        self.score += (weight * self.coeffs.g(b, side)).to_f64_lossy();
    }

    fn dirichlet(&mut self, _: Point2<T>, _: Side) {}
}

/// Runs `walks` reflected Euler walks from every grid node (grid order,
/// `n` major) and collects their traces. Node `g` uses the seed
/// `derive_seed(seed, g)`; the result does not depend on the thread count.
pub fn node_traces<T: Real>(
    basis: &TchebBasis,
    coeffs: &Coefficients<T>,
    dom: &SquareDomain<T>,
    cfg: &EulerConfig<T>,
    walks: u64,
    seed: u64,
) -> Result<Vec<NodeTrace>> {
    if !dom.is_pure_neumann() || dom.half_width != T::one() {
        return Err(Error::InvalidConfig(
            "spectral solver needs the pure Neumann square [-1,1]²".into(),
        ));
    }
    if walks < 2 {
        return Err(Error::InvalidConfig(format!("at least two walks per node, got {walks}")));
    }
    cfg.validate()?;
    let n1 = basis.len_1d();
    let degree = basis.degree();
    let chunks = walks.div_ceil(CHUNK);
    let jobs: Vec<(usize, u64)> = (0..n1 * n1)
        .flat_map(|g| (0..chunks).map(move |c| (g, c)))
        .collect();
    let partial: Vec<(MomentsAcc, Welford)> = jobs
        .par_iter()
        .map(|&(g, c)| {
            let start = Point2::new(T::lit(basis.nodes[g / n1]), T::lit(basis.nodes[g % n1]));
            let node_seed = derive_seed(seed, g as u64);
            let mut acc = MomentsAcc::new(n1);
            let mut stats = Welford::default();
            for w in c * CHUNK..((c + 1) * CHUNK).min(walks) {
                let mut rng = stream_rng(node_seed, w);
                let mut sink = MomentSink::new(degree, coeffs);
                walk_one(start, dom, coeffs, cfg, &mut rng, &mut sink).map_err(|e| Error::Trajectory {
                    index: w,
                    source: Box::new(e),
                })?;
                acc.add(&sink);
                stats.push(sink.score);
            }
            Ok((acc, stats))
        })
        .collect::<Result<_>>()?;
    let m = walks as f64;
    Ok(partial
        .chunks(chunks as usize)
        .map(|parts| {
            let mut acc = MomentsAcc::new(n1);
            let mut stats = Welford::default();
            for (a, s) in parts {
                acc.merge(a);
                stats = stats.merge(*s);
            }
            NodeTrace {
                degree,
                interior: acc.interior.iter().map(|v| v / m).collect(),
                boundary: acc.boundary.map(|b| b.iter().map(|v| v / m).collect()),
                score: stats.summary(),
            }
        })
        .collect())
}

fn walk_one<T: Real, R: Rng + ?Sized>(
    start: Point2<T>,
    dom: &SquareDomain<T>,
    coeffs: &Coefficients<T>,
    cfg: &EulerConfig<T>,
    rng: &mut R,
    sink: &mut MomentSink<'_, T>,
) -> Result<()> {
    walk_euler(start, dom, coeffs.drift.as_ref(), cfg, rng, sink).map(|_| ())
}

struct MomentsAcc {
    interior: Vec<f64>,
    boundary: [Vec<f64>; 4],
}

impl MomentsAcc {
    fn new(n1: usize) -> Self {
        Self {
            interior: vec![0.0; n1 * n1],
            boundary: std::array::from_fn(|_| vec![0.0; n1]),
        }
    }

    fn add<T>(&mut self, s: &MomentSink<'_, T>) {
        self.interior.iter_mut().zip(&s.interior).for_each(|(a, b)| *a += b);
        for (a, b) in self.boundary.iter_mut().zip(&s.boundary) {
            a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
        }
    }

    fn merge(&mut self, o: &Self) {
        self.interior.iter_mut().zip(&o.interior).for_each(|(a, b)| *a += b);
        for (a, b) in self.boundary.iter_mut().zip(&o.boundary) {
            a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
        }
    }
}

/// `LΦ_nm` and `∂Φ_nm/∂n_a` of every tensor function as coefficient arrays
/// over the moments of a [`NodeTrace`].
#[derive(Debug, Clone)]
pub struct OperatorTable {
    n1: usize,
    /// Per tensor function, `(N+1)²` monomial coefficients of `LΦ`.
    generator: Vec<Vec<f64>>,
    /// Per tensor function and side, coefficients in `t^b` of `½∇Φ·n_out`.
    conormal: Vec<[Vec<f64>; 4]>,
}

impl OperatorTable {
    pub fn new(basis: &TchebBasis, drift: LinearDrift) -> Self {
        let n1 = basis.len_1d();
        let c = &basis.lagrange;
        let d1: Vec<Poly> = c.iter().map(Poly::derivative).collect();
        let d2: Vec<Poly> = d1.iter().map(Poly::derivative).collect();
        let xd1: Vec<Poly> = d1.iter().map(Poly::times_x).collect();
        let mut generator = Vec::with_capacity(n1 * n1);
        let mut conormal = Vec::with_capacity(n1 * n1);
        for n in 0..n1 {
            for m in 0..n1 {
                let mut g = vec![0.0; n1 * n1];
                for a in 0..n1 {
                    for b in 0..n1 {
                        g[a * n1 + b] = 0.5 * d2[n].coef(a) * c[m].coef(b)
                            + 0.5 * c[n].coef(a) * d2[m].coef(b)
                            + drift.bx * xd1[n].coef(a) * c[m].coef(b)
                            + drift.by * c[n].coef(a) * xd1[m].coef(b);
                    }
                }
                generator.push(g);
                conormal.push(std::array::from_fn(|s| {
                    let side = Side::ALL[s];
                    let out = side.outward::<f64>();
                    let (scale, along) = match side {
                        Side::Right | Side::Left => (0.5 * out.x * d1[n].eval(out.x), &c[m]),
                        Side::Top | Side::Bottom => (0.5 * out.y * d1[m].eval(out.y), &c[n]),
                    };
                    (0..n1).map(|b| scale * along.coef(b)).collect()
                }));
            }
        }
        Self {
            n1,
            generator,
            conormal,
        }
    }

    /// `Σα ∂Φ_g/∂n_a − Σβ LΦ_g` for tensor function `g` (grid order).
    pub fn apply(&self, trace: &NodeTrace, g: usize) -> f64 {
        let interior: f64 = self.generator[g].iter().zip(&trace.interior).map(|(a, b)| a * b).sum();
        let boundary: f64 = self.conormal[g]
            .iter()
            .zip(&trace.boundary)
            .map(|(c, m)| c.iter().zip(m).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        boundary - interior
    }

    /// `LΦ_g(p)`.
    pub fn generator_at(&self, g: usize, p: Point2<f64>) -> f64 {
        let mut s = 0.0;
        let mut xa = 1.0;
        for a in 0..self.n1 {
            let mut yb = 1.0;
            for b in 0..self.n1 {
                s += self.generator[g][a * self.n1 + b] * xa * yb;
                yb *= p.y;
            }
            xa *= p.x;
        }
        s
    }

    /// `½∇Φ_g·n_out` at a point of `side`.
    pub fn conormal_at(&self, g: usize, b: Point2<f64>, side: Side) -> f64 {
        Poly(self.conormal[g][side.index()].clone()).eval(side.along(b))
    }
}

/// Assembles `C` and `d` over the retained nodes. `traces` holds one trace
/// per grid node (grid order).
pub fn assemble(cb: &CenteredBasis, traces: &[NodeTrace], drift: LinearDrift) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n1 = cb.basis.len_1d();
    if traces.len() != n1 * n1 || traces.iter().any(|t| t.degree != cb.basis.degree()) {
        return Err(Error::InvalidConfig(format!(
            "expected {} node traces of degree {}",
            n1 * n1,
            cb.basis.degree()
        )));
    }
    let ops = OperatorTable::new(&cb.basis, drift);
    let k = cb.len();
    let g0 = cb.removed.0 * n1 + cb.removed.1;
    let mut c = DMatrix::zeros(k, k);
    let mut d = DVector::zeros(k);
    for (row, &node) in cb.retained.iter().enumerate() {
        let trace = &traces[node.0 * n1 + node.1];
        let psi = cb.psi_all(cb.node(node));
        let a0 = ops.apply(trace, g0);
        for (col, (&(i, j), r)) in cb.retained.iter().zip(&cb.ratios).enumerate() {
            let a = ops.apply(trace, i * n1 + j) - r * a0;
            c[(row, col)] = a - psi[col] + if row == col { 1.0 } else { 0.0 };
        }
        d[row] = trace.score.mean;
    }
    Ok((c, d))
}

/// Ratio of extreme singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone)]
pub struct SpectralSolution {
    pub basis: CenteredBasis,
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Unknowns at the retained nodes.
    pub values: Vec<f64>,
    pub condition: f64,
}

/// Assembles and solves by LU.
pub fn solve(cb: CenteredBasis, traces: &[NodeTrace], drift: LinearDrift) -> Result<SpectralSolution> {
    let (matrix, rhs) = assemble(&cb, traces, drift)?;
    if matrix.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite entry in the spectral system".into()));
    }
    let condition = condition_number(&matrix);
    let x = matrix
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular { kappa: condition })?;
    if !condition.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { kappa: condition });
    }
    Ok(SpectralSolution {
        basis: cb,
        matrix,
        rhs,
        values: x.iter().copied().collect(),
        condition,
    })
}

impl SpectralSolution {
    /// `Σ_k u_k Ψ_k(p)`.
    pub fn evaluate(&self, p: Point2<f64>) -> f64 {
        self.basis.psi_all(p).iter().zip(&self.values).map(|(a, b)| a * b).sum()
    }

    /// Approximation at every grid node (grid order).
    pub fn nodal_values(&self) -> Vec<(Point2<f64>, f64)> {
        let n = self.basis.basis.degree();
        (0..=n)
            .flat_map(|i| (0..=n).map(move |j| (i, j)))
            .map(|k| {
                let z = self.basis.node(k);
                let v = match self.basis.retained.iter().position(|&r| r == k) {
                    Some(pos) => self.values[pos],
                    None => self.evaluate(z),
                };
                (z, v)
            })
            .collect()
    }

    /// `max |u(z) − ũ(z)|` over the grid, for `u` centered like the basis.
    pub fn err1(&self, exact: &dyn Fn(Point2<f64>) -> f64) -> f64 {
        self.nodal_values()
            .iter()
            .fold(0.0, |m, (z, v)| m.max((exact(*z) - v).abs()))
    }

    /// `max |u(z) − ũ(z) − (1/Q) Σ u(X_l)|` over the grid, for any additive
    /// normalisation of `u`.
    pub fn err2<T: Real>(&self, exact: &dyn Fn(Point2<f64>) -> f64, cloud: &ParticleCloud<T>) -> f64 {
        let q = cloud.points.len().max(1) as f64;
        let mean = cloud
            .points
            .iter()
            .map(|p| exact(Point2::new(p.x.to_f64_lossy(), p.y.to_f64_lossy())))
            .sum::<f64>()
            / q;
        self.nodal_values()
            .iter()
            .fold(0.0, |m, (z, v)| m.max((exact(*z) - v - mean).abs()))
    }

    /// `max |u(z) − ũ(z) + (1/(4Q)) Σ u(X_l)|`, the literal form of the
    /// metric. Depends on the normalisation of `u`; see [`Self::err2`].
    pub fn err2_printed<T: Real>(&self, exact: &dyn Fn(Point2<f64>) -> f64, cloud: &ParticleCloud<T>) -> f64 {
        let q = cloud.points.len().max(1) as f64;
        let corr = cloud
            .points
            .iter()
            .map(|p| exact(Point2::new(p.x.to_f64_lossy(), p.y.to_f64_lossy())))
            .sum::<f64>()
            / (4.0 * q);
        self.nodal_values()
            .iter()
            .fold(0.0, |m, (z, v)| m.max((exact(*z) - v + corr).abs()))
    }
}

/// Limit of `C` for exact walks when the basis is centered against a
/// different measure than the invariant one: `I − 1 vᵀ` with
/// `v_k = ∫ Ψ_k p`.
pub fn ideal_matrix(cb: &CenteredBasis) -> DMatrix<f64> {
    let v = cb.exact_integrals();
    let k = v.len();
    DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 } - v[j])
}

/// Eigenvalues of [`ideal_matrix`] as `(re, im)` pairs (empty if the Schur
/// iteration does not converge), and the predicted non-unit eigenvalue
/// `1 − Σ_k v_k`.
pub fn ideal_eigenvalues(cb: &CenteredBasis) -> (Vec<(f64, f64)>, f64) {
    let m = ideal_matrix(cb);
    let lambda = 1.0 - cb.exact_integrals().iter().sum::<f64>();
    let ev = m
        .try_schur(1e-14, 100_000)
        .map(|s| s.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect())
        .unwrap_or_default();
    (ev, lambda)
}
