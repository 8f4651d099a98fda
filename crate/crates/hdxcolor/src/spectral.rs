//! Eigenvalues of reversible walks, Loewner-order checks and local spectral
//! profiles.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{ComplexError, Face, Lattice, WeightedComplex};

/// Default relative tolerance of [`psd_leq`].
pub const PSD_TOL: f64 = 1e-9;
/// Entries of π at or below this are outside the support.
pub const SUPPORT_EPS: f64 = 1e-15;
/// Face count cap used when enumerating the face lattice.
pub const DEFAULT_FACE_LIMIT: usize = 20_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("walk is not reversible (defect {0:e})")]
    NotReversible(f64),
    #[error("matrix is nonzero at index {0}, outside the support of π")]
    SupportMismatch(usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("shape mismatch")]
    Shape,
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let s = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Indices with π above [`SUPPORT_EPS`].
pub fn support(pi: &DVector<f64>) -> Vec<usize> {
    (0..pi.len()).filter(|&i| pi[i] > SUPPORT_EPS).collect()
}

/// Second largest eigenvalue of a reversible walk, via D^{1/2} P D^{−1/2}
/// on the support of π. A walk with a single state gives −∞.
pub fn lambda2_reversible(p: &DMatrix<f64>, pi: &DVector<f64>) -> Result<f64> {
    if p.nrows() != pi.len() || p.ncols() != pi.len() {
        return Err(SpectralError::Shape);
    }
    let sup = support(pi);
    let mut defect = 0.0f64;
    for &a in &sup {
        for &b in &sup {
            defect = defect.max((pi[a] * p[(a, b)] - pi[b] * p[(b, a)]).abs());
        }
    }
    if defect > 1e-9 {
        return Err(SpectralError::NotReversible(defect));
    }
    if sup.len() < 2 {
        return Ok(f64::NEG_INFINITY);
    }
    let s = DMatrix::from_fn(sup.len(), sup.len(), |a, b| {
        let (x, y) = (sup[a], sup[b]);
        pi[x].sqrt() * p[(x, y)] / pi[y].sqrt()
    });
    let ev = symmetric_eigenvalues(&s);
    Ok(ev[ev.len() - 2])
}

/// A ⪯ B up to a relative tolerance: λ_min(B − A) ≥ −tol·max(1, ‖B − A‖_∞).
pub fn psd_leq(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    psd_margin(a, b, tol) >= 0.0
}

/// λ_min(B − A) + tol·max(1, ‖B − A‖_∞); nonnegative iff [`psd_leq`] holds.
pub fn psd_margin(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> f64 {
    let d = b - a;
    let scale = inf_norm(&d).max(1.0);
    debug_assert!(
        (&d - d.transpose()).amax() <= 1e-10 * scale,
        "psd_leq called with an asymmetric matrix"
    );
    let ev = symmetric_eigenvalues(&d);
    ev.first().copied().unwrap_or(0.0) + tol * scale
}

/// Π^{−1/2} M Π^{−1/2} restricted to the support of π, after checking that M
/// vanishes outside it.
pub fn similarity_block(pi: &DVector<f64>, m: &DMatrix<f64>) -> Result<(Vec<usize>, DMatrix<f64>)> {
    if m.nrows() != pi.len() || m.ncols() != pi.len() {
        return Err(SpectralError::Shape);
    }
    let sup = support(pi);
    let scale = m.amax().max(1.0);
    for i in 0..pi.len() {
        if pi[i] <= SUPPORT_EPS
            && (m.row(i).amax() > 1e-13 * scale || m.column(i).amax() > 1e-13 * scale)
        {
            return Err(SpectralError::SupportMismatch(i));
        }
    }
    let block = DMatrix::from_fn(sup.len(), sup.len(), |a, b| {
        m[(sup[a], sup[b])] / (pi[sup[a]] * pi[sup[b]]).sqrt()
    });
    Ok((sup, block))
}

/// ρ(Π^{−1}M) computed on the similar symmetric matrix Π^{−1/2} M Π^{−1/2}.
pub fn spectral_radius_similarity(pi: &DVector<f64>, m: &DMatrix<f64>) -> Result<f64> {
    let (_, block) = similarity_block(pi, m)?;
    Ok(symmetric_eigenvalues(&block)
        .iter()
        .fold(0.0f64, |r, v| r.max(v.abs())))
}

/// Support-restricted inverse of diag(π).
pub fn pi_inverse(pi: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&pi.map(|v| if v > SUPPORT_EPS { 1.0 / v } else { 0.0 }))
}

/// Square root of a symmetric PSD matrix (negative eigenvalues clipped).
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let s = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// T ↦ ½I − (¼I − T)^{1/2}, the inverse of M ↦ M(I − M) on M ⪯ ½I.
pub fn inverse_map(t: &DMatrix<f64>) -> DMatrix<f64> {
    let n = t.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    &id * 0.5 - psd_sqrt(&(&id * 0.25 - t))
}

/// Oracle for the monotonicity of A ↦ A(I − αA) below I/(2α): checks the
/// hypotheses, then returns whether A ⪯ B.
pub fn monotone_lemma_check(a: &DMatrix<f64>, b: &DMatrix<f64>, alpha: f64) -> Result<bool> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(SpectralError::Precondition("alpha must be positive".into()));
    }
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let cap = &id / (2.0 * alpha);
    if !psd_leq(a, &cap, PSD_TOL) {
        return Err(SpectralError::Precondition(
            "A is not below I/(2 alpha)".into(),
        ));
    }
    if !psd_leq(b, &cap, PSD_TOL) {
        return Err(SpectralError::Precondition(
            "B is not below I/(2 alpha)".into(),
        ));
    }
    let fa = a * (&id - a * alpha);
    let fb = b * (&id - b * alpha);
    if !psd_leq(&fa, &fb, PSD_TOL) {
        return Err(SpectralError::Precondition(
            "A(I - alpha A) is not below B(I - alpha B)".into(),
        ));
    }
    Ok(psd_leq(a, b, PSD_TOL))
}

/// γ for one level: the maximum λ₂ over faces of dimension `level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelGamma {
    pub level: isize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralProfile {
    pub dimension: isize,
    pub levels: Vec<LevelGamma>,
    pub faces: BTreeMap<Face, f64>,
}

/// λ₂ of every local walk of codimension ≥ 2 and the per-level maxima.
pub fn local_profile(x: &WeightedComplex) -> Result<SpectralProfile> {
    let lat = Lattice::build(x, DEFAULT_FACE_LIMIT)?;
    local_profile_in(x, &lat)
}

pub fn local_profile_in(x: &WeightedComplex, lat: &Lattice) -> Result<SpectralProfile> {
    let d = x.dim();
    let ids: Vec<usize> = (2..=(d + 1).max(1) as usize)
        .flat_map(|k| lat.with_codim(x, k))
        .collect();
    let values: Vec<(Face, f64)> = ids
        .par_iter()
        .map(|&id| {
            let idx = lat.face(id);
            let face = x.face_of(idx);
            let walk = x.walk_from(face.clone(), idx, &lat.containing(id));
            lambda2_reversible(&walk.p, &walk.pi).map(|l| (face, l))
        })
        .collect::<Result<_>>()?;
    let mut levels: BTreeMap<isize, f64> = BTreeMap::new();
    for (f, l) in &values {
        let e = levels.entry(f.dim()).or_insert(f64::NEG_INFINITY);
        *e = e.max(*l);
    }
    Ok(SpectralProfile {
        dimension: d,
        levels: levels
            .into_iter()
            .map(|(level, gamma)| LevelGamma { level, gamma })
            .collect(),
        faces: values.into_iter().collect(),
    })
}

/// Local-to-global bound (1/(d+1))·Π(1 − γ_j) on the spectral gap of the
/// down-up walk on a d-dimensional complex; 0 when some γ_j ≥ 1.
pub fn down_up_gap_bound(profile: &SpectralProfile) -> f64 {
    gap_bound_from_levels(profile.dimension, profile.levels.iter().map(|l| l.gamma))
}

pub fn gap_bound_from_levels(dimension: isize, gammas: impl IntoIterator<Item = f64>) -> f64 {
    if dimension < 0 {
        return 1.0;
    }
    let mut prod = 1.0;
    for g in gammas {
        if g >= 1.0 {
            return 0.0;
        }
        prod *= 1.0 - g.max(-1.0);
    }
    prod / (dimension + 1) as f64
}
