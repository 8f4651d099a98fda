//! Brute-force oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

use hdxcolor::complex::{Pair, WeightedComplex};
use hdxcolor::graphs::ListColoringInstance;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Every proper list coloring, by backtracking in element order.
pub fn colorings(inst: &ListColoringInstance) -> Vec<Vec<u32>> {
    fn go(inst: &ListColoringInstance, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let x = cur.len();
        if x == inst.element_count() {
            out.push(cur.clone());
            return;
        }
        for &c in inst.list(x) {
            if inst
                .conflict_graph()
                .neighbors(x)
                .iter()
                .all(|&u| u >= x || cur[u] != c)
            {
                cur.push(c);
                go(inst, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(inst, &mut Vec::new(), &mut out);
    out
}

/// Weighted facets over a fixed ground ordering.
pub struct Oracle {
    pub ground: Vec<Pair>,
    pub index: HashMap<Pair, usize>,
    pub facets: Vec<(Vec<usize>, f64)>,
    pub size: usize,
}

pub struct Walk {
    pub p: DMatrix<f64>,
    pub pi: DVector<f64>,
    pub codim: usize,
}

impl Oracle {
    pub fn new(ground: &[Pair], facets: Vec<(Vec<Pair>, f64)>) -> Self {
        let index: HashMap<Pair, usize> = ground.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let size = facets.first().map_or(0, |f| f.0.len());
        let facets = facets
            .into_iter()
            .map(|(f, w)| (f.iter().map(|p| index[p]).collect(), w))
            .collect();
        Oracle {
            ground: ground.to_vec(),
            index,
            facets,
            size,
        }
    }

    /// Uniform weights on the proper colorings, over the ground of `x`.
    pub fn coloring(inst: &ListColoringInstance, x: &WeightedComplex) -> Self {
        let facets = colorings(inst)
            .into_iter()
            .map(|c| {
                (
                    c.iter()
                        .enumerate()
                        .map(|(e, &k)| Pair::new(e, k))
                        .collect(),
                    1.0,
                )
            })
            .collect();
        Oracle::new(x.ground(), facets)
    }

    /// The ground and facet weights of `x`, read through its public accessors.
    pub fn of(x: &WeightedComplex) -> Self {
        let facets = (0..x.facet_count())
            .map(|i| (x.facet(i).pairs().to_vec(), x.weights()[i]))
            .collect();
        Oracle::new(x.ground(), facets)
    }

    /// P_τ(y,z) = Pr[y,z | τ]/((k−1)Pr[y | τ]), π_τ = Pr[· | τ]/k.
    pub fn walk(&self, tau: &[Pair]) -> Option<Walk> {
        let n = self.ground.len();
        let t: Vec<usize> = tau
            .iter()
            .map(|p| self.index.get(p).copied())
            .collect::<Option<_>>()?;
        let k = self.size.checked_sub(t.len())?;
        if k < 2 {
            return None;
        }
        let (mut z, mut marg, mut joint) = (
            0.0f64,
            DVector::<f64>::zeros(n),
            DMatrix::<f64>::zeros(n, n),
        );
        for (f, w) in &self.facets {
            if !t.iter().all(|i| f.contains(i)) {
                continue;
            }
            z += w;
            let rest: Vec<usize> = f.iter().copied().filter(|i| !t.contains(i)).collect();
            for &a in &rest {
                marg[a] += w;
                for &b in &rest {
                    if a != b {
                        joint[(a, b)] += w;
                    }
                }
            }
        }
        if z == 0.0 {
            return None;
        }
        let mut p = DMatrix::zeros(n, n);
        for a in 0..n {
            if marg[a] > 0.0 {
                for b in 0..n {
                    p[(a, b)] = joint[(a, b)] / ((k as f64 - 1.0) * marg[a]);
                }
            }
        }
        Some(Walk {
            p,
            pi: marg / (z * k as f64),
            codim: k,
        })
    }
}

pub fn support(pi: &DVector<f64>) -> Vec<usize> {
    (0..pi.len()).filter(|&i| pi[i] > 1e-15).collect()
}

fn sub(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let s = (m + m.transpose()) * 0.5;
    let mut e: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| b.partial_cmp(a).unwrap());
    e
}

/// Second largest eigenvalue of a π-reversible walk on the support of π.
pub fn lambda2(p: &DMatrix<f64>, pi: &DVector<f64>) -> f64 {
    let s = support(pi);
    let m = DMatrix::from_fn(s.len(), s.len(), |i, j| {
        p[(s[i], s[j])] * (pi[s[i]] / pi[s[j]]).sqrt()
    });
    eigenvalues(&m).get(1).copied().unwrap_or(f64::NEG_INFINITY)
}

/// ρ(Π⁻¹M) on the support of π.
pub fn rho(pi: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    let s = support(pi);
    let d = DMatrix::from_fn(s.len(), s.len(), |i, j| {
        m[(s[i], s[j])] / (pi[s[i]] * pi[s[j]]).sqrt()
    });
    eigenvalues(&d).iter().fold(0.0, |a, e| a.max(e.abs()))
}

pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// A ⪯ B up to `tol`.
pub fn leq(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    min_eig(&(b - a)) >= -tol
}

pub fn restrict(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    sub(m, idx)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}
