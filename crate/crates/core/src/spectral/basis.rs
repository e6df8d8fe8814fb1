//! Tensor Lagrange basis on the Tchebychef grid `z_n = cos((2n+1)π/(2N+2))`.

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Polynomial with monomial coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    /// `x · p(x)`.
    pub fn times_x(&self) -> Poly {
        let mut c = Vec::with_capacity(self.0.len() + 1);
        c.push(0.0);
        c.extend_from_slice(&self.0);
        Poly(c)
    }

    /// `∫_{-1}^{1} p`.
    pub fn integral(&self) -> f64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(k, _)| k % 2 == 0)
            .map(|(k, c)| 2.0 * c / (k + 1) as f64)
            .sum()
    }

    /// Coefficient of `x^k` (zero past the degree).
    #[inline]
    pub fn coef(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TchebBasis {
    n: usize,
    pub nodes: Vec<f64>,
    /// `l_0 .. l_N` in monomial form.
    pub lagrange: Vec<Poly>,
    bary: Vec<f64>,
    /// `∫_{-1}^{1} l_n`.
    pub integrals: Vec<f64>,
}

/// Lagrange basis of degree `n_even` on the Tchebychef nodes.
pub fn build_basis(n_even: usize) -> Result<TchebBasis> {
    if n_even < 2 || !n_even.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "basis degree must be even and at least 2, got {n_even}"
        )));
    }
    let n = n_even;
    let nodes: Vec<f64> = (0..=n)
        .map(|k| {
            let z = ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n + 2) as f64).cos();
            if z.abs() < 1e-15 {
                0.0
            } else {
                z
            }
        })
        .collect();
    let mut lagrange = Vec::with_capacity(n + 1);
    let mut bary = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut c = vec![1.0];
        let mut denom = 1.0;
        for (k, &zk) in nodes.iter().enumerate() {
            if k == i {
                continue;
            }
            // Multiply by (x - z_k).
            let mut next = vec![0.0; c.len() + 1];
            for (d, v) in c.iter().enumerate() {
                next[d + 1] += v;
                next[d] -= zk * v;
            }
            c = next;
            denom *= nodes[i] - zk;
        }
        c.iter_mut().for_each(|v| *v /= denom);
        lagrange.push(Poly(c));
        bary.push(1.0 / denom);
    }
    // Exact monomial integration, cross-checked by Gauss–Legendre (exact
    // for degree ≤ 2n - 1).
    let integrals: Vec<f64> = lagrange.iter().map(Poly::integral).collect();
    debug_assert!({
        let (x, w) = gauss_legendre(n + 1);
        lagrange.iter().zip(&integrals).all(|(l, i)| {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * l.eval(*x)).sum();
            (q - i).abs() < 1e-12
        })
    });
    Ok(TchebBasis {
        n,
        nodes,
        lagrange,
        bary,
        integrals,
    })
}

impl TchebBasis {
    /// Degree `N`.
    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn len_1d(&self) -> usize {
        self.n + 1
    }

    pub fn center_index(&self) -> usize {
        self.n / 2
    }

    /// All `l_k(x)` by the barycentric formula; exact Kronecker deltas at
    /// the nodes.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        if let Some(j) = self.nodes.iter().position(|&z| z == x) {
            let mut v = vec![0.0; self.n + 1];
            v[j] = 1.0;
            return v;
        }
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.bary)
            .map(|(z, w)| w / (x - z))
            .collect();
        let ell: f64 = self.nodes.iter().map(|z| x - z).product();
        terms.iter().map(|t| t * ell).collect()
    }

    pub fn eval(&self, k: usize, x: f64) -> f64 {
        self.eval_all(x)[k]
    }

    /// `∫∫ l_n(x) l_m(y) dx dy`.
    pub fn weight(&self, n: usize, m: usize) -> f64 {
        self.integrals[n] * self.integrals[m]
    }
}
