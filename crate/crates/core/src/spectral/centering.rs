//! Zero-mean basis `Ψ_k = Φ_k − (c_k / c_0) Φ_0` obtained by removing one
//! tensor function `Φ_0` and centering the others against it.

use crate::error::{Error, Result};
use crate::estimators::ParticleCloud;
use crate::geometry::Point2;
use crate::real::Real;

use super::basis::TchebBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenteringMode {
    /// Integrals against the known invariant density (uniform on the square).
    Exact,
    /// Averages over a particle cloud.
    Approximate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenteredBasis {
    pub basis: TchebBasis,
    pub mode: CenteringMode,
    /// Removed tensor index `(n, m)`.
    pub removed: (usize, usize),
    /// Retained tensor indices, in grid order (`n` major).
    pub retained: Vec<(usize, usize)>,
    /// `c_k / c_0` for each retained function.
    pub ratios: Vec<f64>,
    /// `c` for every tensor function, grid order.
    pub means: Vec<f64>,
}

fn grid(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=n).flat_map(move |i| (0..=n).map(move |j| (i, j)))
}

fn finish(basis: TchebBasis, mode: CenteringMode, means: Vec<f64>, removed: (usize, usize)) -> Result<CenteredBasis> {
    let n1 = basis.len_1d();
    let c0 = means[removed.0 * n1 + removed.1];
    if c0 == 0.0 || !c0.is_finite() {
        return Err(Error::Degenerate(format!(
            "centering coefficient of the removed function is {c0}"
        )));
    }
    let retained: Vec<(usize, usize)> = grid(basis.degree()).filter(|&k| k != removed).collect();
    let ratios = retained.iter().map(|&(i, j)| means[i * n1 + j] / c0).collect();
    Ok(CenteredBasis {
        basis,
        mode,
        removed,
        retained,
        ratios,
        means,
    })
}

/// Centering against the uniform density `1/4`; removes the center function.
pub fn center_exact(basis: TchebBasis) -> Result<CenteredBasis> {
    let means: Vec<f64> = grid(basis.degree()).map(|(i, j)| basis.weight(i, j) / 4.0).collect();
    let c = basis.center_index();
    finish(basis, CenteringMode::Exact, means, (c, c))
}

/// Centering against the empirical measure of `cloud`. Removes the function
/// with the largest `|c|`, the center one on ties.
pub fn center_approx<T: Real>(basis: TchebBasis, cloud: &ParticleCloud<T>) -> Result<CenteredBasis> {
    if cloud.points.is_empty() {
        return Err(Error::InvalidConfig("empty particle cloud".into()));
    }
    let n1 = basis.len_1d();
    let mut means = vec![0.0; n1 * n1];
    for p in &cloud.points {
        let lx = basis.eval_all(p.x.to_f64_lossy());
        let ly = basis.eval_all(p.y.to_f64_lossy());
        for i in 0..n1 {
            for j in 0..n1 {
                means[i * n1 + j] += lx[i] * ly[j];
            }
        }
    }
    let q = cloud.points.len() as f64;
    means.iter_mut().for_each(|m| *m /= q);
    let c = basis.center_index();
    let mut removed = (c, c);
    let mut best = means[c * n1 + c].abs();
    for (i, j) in grid(basis.degree()) {
        let v = means[i * n1 + j].abs();
        if v > best {
            best = v;
            removed = (i, j);
        }
    }
    finish(basis, CenteringMode::Approximate, means, removed)
}

impl CenteredBasis {
    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }

    pub fn node(&self, (i, j): (usize, usize)) -> Point2<f64> {
        Point2::new(self.basis.nodes[i], self.basis.nodes[j])
    }

    /// Every tensor function `Φ_nm(p)`, grid order.
    pub fn phi_all(&self, p: Point2<f64>) -> Vec<f64> {
        let lx = self.basis.eval_all(p.x);
        let ly = self.basis.eval_all(p.y);
        lx.iter().flat_map(|a| ly.iter().map(move |b| a * b)).collect()
    }

    /// Every retained `Ψ_k(p)`.
    pub fn psi_all(&self, p: Point2<f64>) -> Vec<f64> {
        let phi = self.phi_all(p);
        let n1 = self.basis.len_1d();
        let phi0 = phi[self.removed.0 * n1 + self.removed.1];
        self.retained
            .iter()
            .zip(&self.ratios)
            .map(|(&(i, j), r)| phi[i * n1 + j] - r * phi0)
            .collect()
    }

    /// `∫ Ψ_k p` against the uniform density, for every retained `k`.
    pub fn exact_integrals(&self) -> Vec<f64> {
        let b = &self.basis;
        let (ri, rj) = self.removed;
        let w0 = b.weight(ri, rj) / 4.0;
        self.retained
            .iter()
            .zip(&self.ratios)
            .map(|(&(i, j), r)| b.weight(i, j) / 4.0 - r * w0)
            .collect()
    }

    /// Cloud averages of every retained `Ψ_k`.
    pub fn particle_averages<T: Real>(&self, cloud: &ParticleCloud<T>) -> Vec<f64> {
        let mut acc = vec![0.0; self.len()];
        for p in &cloud.points {
            let psi = self.psi_all(Point2::new(p.x.to_f64_lossy(), p.y.to_f64_lossy()));
            acc.iter_mut().zip(psi).for_each(|(a, v)| *a += v);
        }
        let q = cloud.points.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= q);
        acc
    }
}
