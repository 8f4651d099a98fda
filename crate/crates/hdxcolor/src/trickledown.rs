//! Matrix trickle-down verification for an arbitrary weighted complex.
//!
//! A [`MatrixFamily`] assigns a symmetric matrix over X(0) to faces of
//! codimension ≥ 2. [`certify`] checks the base case at codimension 2, the
//! recursive condition above it, and the product branch wherever the link
//! splits, then compares λ₂(P_τ) against ρ(Π_τ⁻¹M_τ) on every face whose
//! whole upper cone verified.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{ComplexError, Face, Lattice, LocalWalk, WeightedComplex};
use crate::spectral::{
    gap_bound_from_levels, lambda2_reversible, pi_inverse, psd_leq, spectral_radius_similarity,
    SpectralError, DEFAULT_FACE_LIMIT, PSD_TOL,
};

/// Slack allowed between λ₂ and the certified ρ.
pub const SOUNDNESS_TOL: f64 = 1e-8;
/// Entrywise tolerance of the product branch.
pub const PRODUCT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrickleError {
    #[error("face {face} has codimension {codim}, need {need}")]
    Codim {
        face: String,
        codim: usize,
        need: String,
    },
    #[error("family has no matrix for face {0}")]
    Missing(String),
    #[error("matrix for face {0} is not symmetric")]
    NotSymmetric(String),
    #[error("local walk of {face} is disconnected (lambda2 = {lambda2})")]
    NotTotallyConnected { face: String, lambda2: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub type Result<T> = std::result::Result<T, TrickleError>;

/// Threshold constant on M_τ ⪯ c_k Π_τ at codimension k ≥ 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// c_k = (k−1)/(2k−1)
    Inductive,
    /// c_k = (k−1)/(3k−1)
    #[default]
    Full,
}

impl Variant {
    pub fn threshold(self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            Variant::Inductive => (k - 1.0) / (2.0 * k - 1.0),
            Variant::Full => (k - 1.0) / (3.0 * k - 1.0),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MatrixFamily {
    pub variant: Variant,
    matrices: HashMap<Face, DMatrix<f64>>,
}

impl MatrixFamily {
    pub fn new(variant: Variant) -> Self {
        MatrixFamily {
            variant,
            matrices: HashMap::new(),
        }
    }

    pub fn insert(&mut self, face: Face, m: DMatrix<f64>) {
        self.matrices.insert(face, m);
    }

    pub fn get(&self, face: &Face) -> Option<&DMatrix<f64>> {
        self.matrices.get(face)
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Face, &DMatrix<f64>)> {
        self.matrices.iter()
    }

    /// Every matrix multiplied by `c`.
    pub fn scaled(&self, c: f64) -> MatrixFamily {
        MatrixFamily {
            variant: self.variant,
            matrices: self
                .matrices
                .iter()
                .map(|(f, m)| (f.clone(), m * c))
                .collect(),
        }
    }

    /// M_τ = c(τ)·Π_τ for every face of codimension ≥ 2.
    pub fn from_scalars(
        x: &WeightedComplex,
        variant: Variant,
        c: impl Fn(&Face, usize) -> f64,
    ) -> Result<MatrixFamily> {
        let mut fam = MatrixFamily::new(variant);
        for walk in all_walks(x)? {
            let m = walk.pi_matrix() * c(&walk.face, walk.codim);
            fam.insert(walk.face, m);
        }
        Ok(fam)
    }

    fn need(&self, face: &Face) -> Result<&DMatrix<f64>> {
        self.get(face)
            .ok_or_else(|| TrickleError::Missing(face.to_string()))
    }
}

/// Local walks of all faces with codimension ≥ 2.
pub fn all_walks(x: &WeightedComplex) -> Result<Vec<LocalWalk>> {
    let lat = Lattice::build(x, DEFAULT_FACE_LIMIT)?;
    Ok(walks_in(x, &lat))
}

fn walks_in(x: &WeightedComplex, lat: &Lattice) -> Vec<LocalWalk> {
    let ids: Vec<usize> = (2..=(x.dim() + 1).max(1) as usize)
        .flat_map(|k| lat.with_codim(x, k))
        .collect();
    ids.par_iter()
        .map(|&id| x.walk_from(x.face_of(lat.face(id)), lat.face(id), &lat.containing(id)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseVerdict {
    /// Π_τP_τ − 2π_τπ_τᵀ ⪯ M_τ
    pub lower_ok: bool,
    /// M_τ ⪯ Π_τ/5
    pub upper_ok: bool,
}

impl BaseVerdict {
    pub fn ok(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursiveVerdict {
    pub threshold_ok: bool,
    pub recursion_ok: bool,
}

impl RecursiveVerdict {
    pub fn ok(&self) -> bool {
        self.threshold_ok && self.recursion_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductVerdict {
    pub ok: bool,
    pub components: usize,
    pub max_error: f64,
}

fn codim_of(x: &WeightedComplex, tau: &Face) -> usize {
    x.codim(tau).max(0) as usize
}

fn check_symmetric(face: &Face, m: &DMatrix<f64>) -> Result<()> {
    if (m - m.transpose()).amax() > 1e-10 * m.amax().max(1.0) {
        return Err(TrickleError::NotSymmetric(face.to_string()));
    }
    Ok(())
}

fn base_with(walk: &LocalWalk, m: &DMatrix<f64>) -> BaseVerdict {
    let pi = walk.pi_matrix();
    let lhs = &pi * &walk.p - 2.0 * &walk.pi * walk.pi.transpose();
    BaseVerdict {
        lower_ok: psd_leq(&lhs, m, PSD_TOL),
        upper_ok: psd_leq(m, &(pi / 5.0), PSD_TOL),
    }
}

/// Base case at codimension 2.
pub fn verify_base(x: &WeightedComplex, tau: &Face, m: &DMatrix<f64>) -> Result<BaseVerdict> {
    let k = codim_of(x, tau);
    if k != 2 {
        return Err(TrickleError::Codim {
            face: tau.to_string(),
            codim: k,
            need: "2".into(),
        });
    }
    check_symmetric(tau, m)?;
    let walk = x.local_walk(tau)?;
    spectral_radius_similarity(&walk.pi, m)?;
    Ok(base_with(&walk, m))
}

fn recursive_with(
    x: &WeightedComplex,
    walk: &LocalWalk,
    family: &MatrixFamily,
) -> Result<RecursiveVerdict> {
    let k = walk.codim;
    let m = family.need(&walk.face)?;
    let pi = walk.pi_matrix();
    let threshold_ok = psd_leq(m, &(&pi * family.variant.threshold(k)), PSD_TOL);
    let n = m.nrows();
    let mut e = DMatrix::zeros(n, n);
    for &v in &walk.support {
        let child = walk.face.with(x.ground()[v]);
        e += walk.pi[v] * family.need(&child)?;
    }
    let alpha = (k as f64 - 1.0) / (k as f64 - 2.0);
    let rhs = m - alpha * m * pi_inverse(&walk.pi) * m;
    let rhs = (&rhs + rhs.transpose()) * 0.5;
    Ok(RecursiveVerdict {
        threshold_ok,
        recursion_ok: psd_leq(&e, &rhs, PSD_TOL),
    })
}

/// Recursive condition at codimension k ≥ 3.
pub fn verify_recursive(
    x: &WeightedComplex,
    tau: &Face,
    family: &MatrixFamily,
) -> Result<RecursiveVerdict> {
    let k = codim_of(x, tau);
    if k < 3 {
        return Err(TrickleError::Codim {
            face: tau.to_string(),
            codim: k,
            need: ">= 3".into(),
        });
    }
    let walk = x.local_walk(tau)?;
    recursive_with(x, &walk, family)
}

/// Product branch: M_τ equals the weighted direct sum of the component
/// matrices M_{τ∪η_{−i}} for every facet η of the link. A link with one
/// component gives the trivial identity M_τ = M_τ.
pub fn verify_product(
    x: &WeightedComplex,
    tau: &Face,
    family: &MatrixFamily,
) -> Result<ProductVerdict> {
    let k = codim_of(x, tau);
    if k < 2 {
        return Err(TrickleError::Codim {
            face: tau.to_string(),
            codim: k,
            need: ">= 2".into(),
        });
    }
    let comps = x.link_components(tau)?;
    let m = family.need(tau)?;
    let idx = x.face_indices(tau)?;
    let kf = k as f64;
    let mut worst = 0.0f64;
    for s in x.containing(&idx) {
        let eta = &x.facet_indices()[s];
        let mut rhs = DMatrix::zeros(m.nrows(), m.ncols());
        for c in comps.iter().filter(|c| c.dim >= 1) {
            let face = x.face_of(
                &eta.iter()
                    .copied()
                    .filter(|j| c.ground.binary_search(j).is_err())
                    .collect::<Vec<_>>(),
            );
            let d = c.dim as f64;
            rhs += family.need(&face)? * (d * (d + 1.0) / (kf * (kf - 1.0)));
        }
        worst = worst.max((m - rhs).amax());
    }
    Ok(ProductVerdict {
        ok: worst <= PRODUCT_TOL,
        components: comps.len(),
        max_error: worst,
    })
}

/// Per-face outcome of [`certify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceRecord {
    pub codim: usize,
    pub lambda2: f64,
    pub rho: f64,
    pub base_ok: Option<BaseVerdict>,
    pub threshold_ok: Option<bool>,
    pub recursive_ok: Option<bool>,
    pub product_ok: Option<bool>,
    /// Some applicable branch holds at this face.
    pub pass: bool,
    /// This face and every face above it pass.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelMu {
    pub level: isize,
    pub mu: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateReport {
    pub variant: Variant,
    pub dimension: isize,
    pub faces: BTreeMap<Face, FaceRecord>,
    pub levels: Vec<LevelMu>,
    /// (1/d)·Π(1 − μ_k); meaningful when `pass` holds.
    pub gap_bound: f64,
    /// Same bound from the exact λ₂ profile.
    pub gap_bound_from_lambda2: f64,
    pub pass: bool,
    /// Certified faces with λ₂ > ρ + 1e−8.
    pub soundness_violations: Vec<Face>,
}

/// Runs every applicable branch on every face of codimension ≥ 2.
pub fn certify(x: &WeightedComplex, family: &MatrixFamily) -> Result<CertificateReport> {
    let lat = Lattice::build(x, DEFAULT_FACE_LIMIT)?;
    let walks = walks_in(x, &lat);
    let rows: Vec<(Face, FaceRecord)> = walks
        .par_iter()
        .map(|walk| -> Result<(Face, FaceRecord)> {
            let face = &walk.face;
            let lambda2 = lambda2_reversible(&walk.p, &walk.pi)?;
            if lambda2 > 1.0 - 1e-10 {
                return Err(TrickleError::NotTotallyConnected {
                    face: face.to_string(),
                    lambda2,
                });
            }
            let m = family.need(face)?;
            check_symmetric(face, m)?;
            let rho = spectral_radius_similarity(&walk.pi, m)?;
            let split = x.link_components(face)?.len() >= 2;
            let product_ok = if split {
                Some(verify_product(x, face, family)?.ok)
            } else {
                None
            };
            let mut rec = FaceRecord {
                codim: walk.codim,
                lambda2,
                rho,
                base_ok: None,
                threshold_ok: None,
                recursive_ok: None,
                product_ok,
                pass: false,
                certified: false,
            };
            if walk.codim == 2 {
                let b = base_with(walk, m);
                rec.base_ok = Some(b);
                rec.pass = b.ok() || product_ok == Some(true);
            } else {
                let r = recursive_with(x, walk, family)?;
                rec.threshold_ok = Some(r.threshold_ok);
                rec.recursive_ok = Some(r.recursion_ok);
                rec.pass = r.ok() || product_ok == Some(true);
            }
            Ok((face.clone(), rec))
        })
        .collect::<Result<_>>()?;
    let mut faces: BTreeMap<Face, FaceRecord> = rows.into_iter().collect();

    // certified: pass here and at every child, processed from codim 2 up
    let mut order: Vec<Face> = faces.keys().cloned().collect();
    order.sort_by_key(|f| std::cmp::Reverse(f.len()));
    for face in order {
        let mut ok = faces[&face].pass;
        if ok && faces[&face].codim > 2 {
            let sup = x.support(&face)?;
            ok = sup.iter().all(|&v| {
                faces
                    .get(&face.with(x.ground()[v]))
                    .is_some_and(|r| r.certified)
            });
        }
        faces.get_mut(&face).expect("face present").certified = ok;
    }

    let mut mu: BTreeMap<isize, (f64, f64)> = BTreeMap::new();
    for (f, r) in &faces {
        let e = mu
            .entry(f.dim())
            .or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
        e.0 = e.0.max(r.rho);
        e.1 = e.1.max(r.lambda2);
    }
    let levels: Vec<LevelMu> = mu
        .into_iter()
        .map(|(level, (mu, gamma))| LevelMu { level, mu, gamma })
        .collect();
    let soundness_violations = faces
        .iter()
        .filter(|(_, r)| r.certified && r.lambda2 > r.rho + SOUNDNESS_TOL)
        .map(|(f, _)| f.clone())
        .collect();
    Ok(CertificateReport {
        variant: family.variant,
        dimension: x.dim(),
        pass: faces.values().all(|r| r.pass),
        gap_bound: gap_bound_from_levels(x.dim(), levels.iter().map(|l| l.mu)),
        gap_bound_from_lambda2: gap_bound_from_levels(x.dim(), levels.iter().map(|l| l.gamma)),
        levels,
        faces,
        soundness_violations,
    })
}

/// Outcome of one generalized trickle-down step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepVerdict {
    /// Π_xP_x − απ_xπ_xᵀ ⪯ M_x for every x
    pub children_lower_ok: bool,
    /// M_x ⪯ Π_x/(2α+1) for every x
    pub children_upper_ok: bool,
    /// M ⪯ Π/(2α)
    pub threshold_ok: bool,
    /// E_x M_x ⪯ M − αMΠ⁻¹M
    pub recursion_ok: bool,
    /// ΠP − (2 − 1/α)ππᵀ ⪯ M
    pub conclusion_ok: bool,
    pub lambda2: f64,
    pub rho: f64,
}

impl StepVerdict {
    pub fn hypotheses_ok(&self) -> bool {
        self.children_lower_ok && self.children_upper_ok && self.threshold_ok && self.recursion_ok
    }
}

/// One step of the generalized trickle-down: checks the hypotheses on the
/// children and on M, and evaluates the conclusion numerically.
pub fn trickle_step(
    x: &WeightedComplex,
    tau: &Face,
    m_links: &HashMap<Face, DMatrix<f64>>,
    m: &DMatrix<f64>,
    alpha: f64,
) -> Result<StepVerdict> {
    if alpha < 0.5 {
        return Err(TrickleError::Precondition(format!("alpha = {alpha} < 1/2")));
    }
    let walk = x.local_walk(tau)?;
    let lambda2 = lambda2_reversible(&walk.p, &walk.pi)?;
    if lambda2 > 1.0 - 1e-10 {
        return Err(TrickleError::NotTotallyConnected {
            face: tau.to_string(),
            lambda2,
        });
    }
    let n = m.nrows();
    let mut e = DMatrix::zeros(n, n);
    let (mut lower, mut upper) = (true, true);
    for &v in &walk.support {
        let child = tau.with(x.ground()[v]);
        let mx = m_links
            .get(&child)
            .ok_or_else(|| TrickleError::Missing(child.to_string()))?;
        let cw = x.local_walk(&child)?;
        let cpi = cw.pi_matrix();
        let lhs = &cpi * &cw.p - alpha * &cw.pi * cw.pi.transpose();
        lower &= psd_leq(&lhs, mx, PSD_TOL);
        upper &= psd_leq(mx, &(&cpi / (2.0 * alpha + 1.0)), PSD_TOL);
        e += walk.pi[v] * mx;
    }
    let pi = walk.pi_matrix();
    let threshold_ok = psd_leq(m, &(&pi / (2.0 * alpha)), PSD_TOL);
    let rhs = m - alpha * m * pi_inverse(&walk.pi) * m;
    let rhs = (&rhs + rhs.transpose()) * 0.5;
    let recursion_ok = psd_leq(&e, &rhs, PSD_TOL);
    let concl = &pi * &walk.p - (2.0 - 1.0 / alpha) * &walk.pi * walk.pi.transpose();
    let conclusion_ok = psd_leq(&concl, m, PSD_TOL);
    Ok(StepVerdict {
        children_lower_ok: lower,
        children_upper_ok: upper,
        threshold_ok,
        recursion_ok,
        conclusion_ok,
        lambda2,
        rho: spectral_radius_similarity(&walk.pi, m)?,
    })
}

/// Levelwise scalar trickle-down: codimension-2 faces get λ = max(λ₂, 0),
/// higher faces get b/(1 − b) with b the largest child value, each step
/// checked through [`trickle_step`] with M_x = bΠ_x, α = 1 − b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanillaRecord {
    pub codim: usize,
    pub lambda2: f64,
    pub bound: f64,
    /// None at codimension 2 or when b > 1/2 stops the trickle.
    pub step: Option<StepVerdict>,
}

pub fn vanilla_trickle(x: &WeightedComplex) -> Result<BTreeMap<Face, VanillaRecord>> {
    let mut walks = all_walks(x)?;
    walks.sort_by_key(|w| w.codim);
    let mut out: BTreeMap<Face, VanillaRecord> = BTreeMap::new();
    for w in &walks {
        let lambda2 = lambda2_reversible(&w.p, &w.pi)?;
        if w.codim == 2 {
            out.insert(
                w.face.clone(),
                VanillaRecord {
                    codim: 2,
                    lambda2,
                    bound: lambda2.max(0.0),
                    step: None,
                },
            );
            continue;
        }
        let children: Vec<Face> = w
            .support
            .iter()
            .map(|&v| w.face.with(x.ground()[v]))
            .collect();
        let b = children.iter().map(|c| out[c].bound).fold(0.0, f64::max);
        if b > 0.5 {
            out.insert(
                w.face.clone(),
                VanillaRecord {
                    codim: w.codim,
                    lambda2,
                    bound: f64::INFINITY,
                    step: None,
                },
            );
            continue;
        }
        let mut links = HashMap::new();
        for c in &children {
            links.insert(c.clone(), x.local_walk(c)?.pi_matrix() * b);
        }
        let bound = b / (1.0 - b);
        let m = w.pi_matrix() * bound;
        let step = trickle_step(x, &w.face, &links, &m, 1.0 - b)?;
        out.insert(
            w.face.clone(),
            VanillaRecord {
                codim: w.codim,
                lambda2,
                bound,
                step: Some(step),
            },
        );
    }
    Ok(out)
}

/// Scalar family solving the recursive condition with equality:
/// c at codimension 2 is `base(τ)`, and above it c is the smaller root of
/// ((k−1)/(k−2))c² − c + c′ = 0 with c′ the largest child value (∞ when
/// there is no real root).
pub fn recursive_scalar_family(
    x: &WeightedComplex,
    variant: Variant,
    base: impl Fn(&LocalWalk) -> f64,
) -> Result<MatrixFamily> {
    let mut walks = all_walks(x)?;
    walks.sort_by_key(|w| w.codim);
    let mut c: HashMap<Face, f64> = HashMap::new();
    let mut fam = MatrixFamily::new(variant);
    for w in &walks {
        let v = if w.codim == 2 {
            base(w)
        } else {
            let cp = w
                .support
                .iter()
                .map(|&v| c[&w.face.with(x.ground()[v])])
                .fold(f64::NEG_INFINITY, f64::max);
            let a = (w.codim as f64 - 1.0) / (w.codim as f64 - 2.0);
            let disc = 1.0 - 4.0 * a * cp;
            if disc < 0.0 || !cp.is_finite() {
                f64::INFINITY
            } else {
                (1.0 - disc.sqrt()) / (2.0 * a)
            }
        };
        c.insert(w.face.clone(), v);
        let scale = if v.is_finite() { v } else { 1e6 };
        fam.insert(w.face.clone(), w.pi_matrix() * scale);
    }
    Ok(fam)
}

/// π_τ as a vector over X(0).
pub fn pi_of(x: &WeightedComplex, tau: &Face) -> Result<DVector<f64>> {
    Ok(x.local_walk(tau)?.pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{build_complex, DEFAULT_FACET_LIMIT};
    use crate::graphs::{Graph, Kind, ListColoringInstance};

    fn complex(kind: Kind, g: Graph, q: u32) -> WeightedComplex {
        build_complex(
            &ListColoringInstance::uniform(kind, g, q).unwrap(),
            DEFAULT_FACET_LIMIT,
        )
        .unwrap()
    }

    #[test]
    fn thresholds() {
        assert_eq!(Variant::Full.threshold(3), 2.0 / 8.0);
        assert_eq!(Variant::Inductive.threshold(3), 2.0 / 5.0);
        for k in 3..20 {
            assert!(Variant::Full.threshold(k) < Variant::Inductive.threshold(k));
        }
    }

    #[test]
    fn base_examples() {
        let x = complex(Kind::Vertex, Graph::path(2), 3);
        let pi = pi_of(&x, &Face::empty()).unwrap();
        let fifth = DMatrix::from_diagonal(&pi) / 5.0;
        let v = verify_base(&x, &Face::empty(), &fifth).unwrap();
        assert!(v.upper_ok);
        let zero = DMatrix::zeros(6, 6);
        assert!(!verify_base(&x, &Face::empty(), &zero).unwrap().lower_ok);
        let y = complex(Kind::Vertex, Graph::path(3), 3);
        assert!(matches!(
            verify_base(&y, &Face::empty(), &DMatrix::zeros(9, 9)),
            Err(TrickleError::Codim { .. })
        ));
    }

    #[test]
    fn zero_family_recursion_holds() {
        let x = complex(Kind::Vertex, Graph::path(3), 4);
        let fam = MatrixFamily::from_scalars(&x, Variant::Full, |_, _| 0.0).unwrap();
        let v = verify_recursive(&x, &Face::empty(), &fam).unwrap();
        assert!(v.ok());
        let r = certify(&x, &fam).unwrap();
        assert!(!r.pass);
        assert!(r
            .faces
            .values()
            .any(|f| f.base_ok.is_some_and(|b| !b.lower_ok)));
        assert!(r.soundness_violations.is_empty());
    }

    #[test]
    fn scaled_family_breaks_threshold() {
        let x = complex(Kind::Vertex, Graph::complete(3), 12);
        let fam = recursive_scalar_family(&x, Variant::Full, |w| {
            lambda2_reversible(&w.p, &w.pi).unwrap().max(0.0)
        })
        .unwrap();
        let r = certify(&x, &fam).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.soundness_violations.is_empty());
        let big = fam.scaled(10.0);
        assert!(
            !verify_recursive(&x, &Face::empty(), &big)
                .unwrap()
                .threshold_ok
        );
    }

    #[test]
    fn product_branch() {
        let x = complex(
            Kind::Vertex,
            Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap(),
            3,
        );
        // hand-assembled blocks: M at codim-2 faces is Π/5 of the surviving edge
        let mut fam = MatrixFamily::new(Variant::Full);
        let n = x.ground().len();
        for w in all_walks(&x).unwrap() {
            if w.codim == 2 {
                fam.insert(w.face.clone(), w.pi_matrix() / 5.0);
            }
        }
        for w in all_walks(&x).unwrap() {
            if w.codim == 3 {
                // one edge colored, one vertex of the other left: product of a
                // 1-dim and a 0-dim factor
                let comps = x.link_components(&w.face).unwrap();
                let mut m = DMatrix::zeros(n, n);
                let s = x.containing(&x.face_indices(&w.face).unwrap())[0];
                let eta = &x.facet_indices()[s];
                for c in comps.iter().filter(|c| c.dim >= 1) {
                    let f = x.face_of(
                        &eta.iter()
                            .copied()
                            .filter(|j| c.ground.binary_search(j).is_err())
                            .collect::<Vec<_>>(),
                    );
                    m += fam.get(&f).unwrap() * (2.0 / 6.0);
                }
                fam.insert(w.face.clone(), m);
            }
        }
        let mut m = DMatrix::zeros(n, n);
        let s = 0;
        for half in [[0usize, 1], [2, 3]] {
            let eta: Vec<usize> = x.facet_indices()[s]
                .iter()
                .copied()
                .filter(|&j| !half.contains(&x.ground()[j].element))
                .collect();
            m += fam.get(&x.face_of(&eta)).unwrap() * (2.0 / 12.0);
        }
        fam.insert(Face::empty(), m);
        let v = verify_product(&x, &Face::empty(), &fam).unwrap();
        assert!(v.ok && v.components == 2, "{v:?}");
        // k² instead of k(k−1)
        let mut wrong = fam.clone();
        wrong.insert(
            Face::empty(),
            fam.get(&Face::empty()).unwrap() * (12.0 / 16.0),
        );
        assert!(!verify_product(&x, &Face::empty(), &wrong).unwrap().ok);
        // single component: trivial identity
        let y = complex(Kind::Vertex, Graph::path(3), 3);
        let fy = MatrixFamily::from_scalars(&y, Variant::Full, |_, _| 0.1).unwrap();
        let v = verify_product(&y, &Face::empty(), &fy).unwrap();
        assert!(v.ok && v.components == 1);
    }

    #[test]
    fn p2_certificate_has_one_face() {
        let x = complex(Kind::Vertex, Graph::path(2), 3);
        let fam = MatrixFamily::from_scalars(&x, Variant::Full, |_, _| 0.2).unwrap();
        let r = certify(&x, &fam).unwrap();
        assert_eq!(r.faces.len(), 1);
        let rec = &r.faces[&Face::empty()];
        assert!((rec.lambda2 - 0.5).abs() < 1e-12);
        assert!((rec.rho - 0.2).abs() < 1e-12);
        // λ₂ = 1/2 > 1/5 so the base case must fail
        assert!(!rec.pass);
    }

    #[test]
    fn disconnected_walks_rejected() {
        let x = complex(Kind::Vertex, Graph::complete(3), 3);
        let fam = MatrixFamily::from_scalars(&x, Variant::Full, |_, _| 0.0).unwrap();
        assert!(matches!(
            certify(&x, &fam),
            Err(TrickleError::NotTotallyConnected { .. })
        ));
    }

    #[test]
    fn vanilla_reproduces_scalar_trickle() {
        let x = complex(Kind::Vertex, Graph::complete(3), 6);
        let v = vanilla_trickle(&x).unwrap();
        let root = &v[&Face::empty()];
        let b = v
            .iter()
            .filter(|(_, r)| r.codim == 2)
            .map(|(_, r)| r.bound)
            .fold(0.0, f64::max);
        assert!((root.bound - b / (1.0 - b)).abs() < 1e-12);
        let step = root.step.as_ref().unwrap();
        assert!(step.hypotheses_ok() && step.conclusion_ok);
        assert!((step.rho - b / (1.0 - b)).abs() < 1e-10);
        assert!(root.lambda2 <= root.bound + SOUNDNESS_TOL);
    }

    #[test]
    fn trickle_step_zero_when_links_rank_one() {
        // product of three points: every codim-2 link is a product of two
        // points, λ₂ = 0, so M = 0 works with α = 1
        let x = complex(Kind::Vertex, Graph::empty(3), 2);
        let mut links = HashMap::new();
        for w in all_walks(&x).unwrap().into_iter().filter(|w| w.codim == 2) {
            links.insert(w.face.clone(), DMatrix::zeros(6, 6));
        }
        let v = trickle_step(&x, &Face::empty(), &links, &DMatrix::zeros(6, 6), 1.0).unwrap();
        assert!(v.hypotheses_ok() && v.conclusion_ok, "{v:?}");
        assert!(matches!(
            trickle_step(&x, &Face::empty(), &links, &DMatrix::zeros(6, 6), 0.4),
            Err(TrickleError::Precondition(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn reweighted() -> impl Strategy<Value = WeightedComplex> {
            (
                3usize..=4,
                proptest::collection::vec(any::<bool>(), 6),
                4u32..=6,
                any::<u64>(),
            )
                .prop_map(|(n, mask, q, seed)| {
                    let mut edges = Vec::new();
                    let mut it = mask.into_iter();
                    for u in 0..n {
                        for v in u + 1..n {
                            if it.next().unwrap_or(false) {
                                edges.push((u, v));
                            }
                        }
                    }
                    let x = complex(Kind::Vertex, Graph::from_edges(n, &edges).unwrap(), q);
                    let mut s = seed;
                    let facets = (0..x.facet_count())
                        .map(|i| {
                            s = s
                                .wrapping_mul(6364136223846793005)
                                .wrapping_add(1442695040888963407);
                            let w = 0.5 + (s >> 11) as f64 / (1u64 << 53) as f64;
                            (x.facet(i).pairs().to_vec(), w)
                        })
                        .collect();
                    WeightedComplex::from_facets(facets).unwrap()
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            #[test]
            fn step_conclusion_follows_from_hypotheses(x in reweighted()) {
                for r in vanilla_trickle(&x).unwrap().values() {
                    if let Some(step) = &r.step {
                        if step.hypotheses_ok() {
                            prop_assert!(step.conclusion_ok);
                            prop_assert!(step.lambda2 <= step.rho + SOUNDNESS_TOL);
                        }
                    }
                }
            }

            #[test]
            fn certified_faces_are_sound(x in reweighted(), scale in 0.5f64..2.0) {
                let fam = recursive_scalar_family(&x, Variant::Full, |w| {
                    lambda2_reversible(&w.p, &w.pi).unwrap().max(0.0)
                })
                .unwrap()
                .scaled(scale);
                let r = match certify(&x, &fam) {
                    Err(TrickleError::NotTotallyConnected { .. }) => return Ok(()),
                    r => r.unwrap(),
                };
                prop_assert!(r.soundness_violations.is_empty());
                for rec in r.faces.values().filter(|f| f.certified) {
                    prop_assert!(rec.lambda2 <= rec.rho + SOUNDNESS_TOL);
                }
            }

            #[test]
            fn recursive_root_solves_quadratic(x in reweighted()) {
                let fam = recursive_scalar_family(&x, Variant::Full, |_| 0.05).unwrap();
                for w in all_walks(&x).unwrap().iter().filter(|w| w.codim >= 3) {
                    let c = spectral_radius_similarity(&w.pi, fam.get(&w.face).unwrap()).unwrap();
                    let cp = w
                        .support
                        .iter()
                        .map(|&v| {
                            let f = w.face.with(x.ground()[v]);
                            spectral_radius_similarity(&pi_of(&x, &f).unwrap(), fam.get(&f).unwrap()).unwrap()
                        })
                        .fold(0.0, f64::max);
                    let a = (w.codim as f64 - 1.0) / (w.codim as f64 - 2.0);
                    if c < 1e5 {
                        prop_assert!((a * c * c - c + cp).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
