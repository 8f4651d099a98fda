//! Coloring-specific matrix families.
//!
//! Every family has the split form M_τ = (Π_τF_τ + Π_τ^{1/2}A_τΠ_τ^{1/2})/(k−1)
//! with F diagonal and A hollow. Three regimes are supported: the diagonal
//! (1+ε)Δ vertex family, the εΔ tree family and the (4/3+4ε)Δ edge family.
//! Faces whose residual conflict graph is disconnected are filled through
//! f_× from the component faces.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{ComplexError, Face, LocalWalk, Pair, WeightedComplex};
use crate::graphs::{Graph, Kind, ListColoringInstance};
use crate::spectral::{symmetric_eigenvalues, SpectralError, PSD_TOL};
use crate::trickledown::{
    all_walks, certify, CertificateReport, MatrixFamily, TrickleError, Variant, SOUNDNESS_TOL,
};

const ENTRY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertError {
    #[error("regime {regime} does not apply to {kind} colorings")]
    RegimeKind { regime: Regime, kind: Kind },
    #[error("tree regime needs a tree as base graph")]
    NotTree,
    #[error("root {0} is not a vertex of the graph")]
    Root(usize),
    #[error("complex does not come from a coloring instance")]
    NotColoring,
    #[error("parameters outside the regime's validity: {0}")]
    RegimeViolation(String),
    #[error(transparent)]
    Trickle(#[from] TrickleError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub type Result<T> = std::result::Result<T, CertError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "vertex_2delta")]
    Vertex2Delta,
    #[serde(rename = "vertex_tree")]
    VertexTree,
    #[serde(rename = "edge")]
    Edge,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Vertex2Delta => "vertex_2delta",
            Regime::VertexTree => "vertex_tree",
            Regime::Edge => "edge",
        })
    }
}

impl FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "vertex_2delta" => Ok(Regime::Vertex2Delta),
            "vertex_tree" => Ok(Regime::VertexTree),
            "edge" => Ok(Regime::Edge),
            _ => Err(format!(
                "unknown regime '{s}' (vertex_2delta, vertex_tree, edge)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Precondition {
    pub name: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateParams {
    pub regime: Regime,
    pub epsilon: f64,
    pub beta: f64,
    pub delta: usize,
    pub root: Option<usize>,
    /// Regime hypotheses, recorded and never enforced.
    pub preconditions: Vec<Precondition>,
}

impl CertificateParams {
    /// β and Δ for the regime; Δ is the maximum degree of the base graph.
    pub fn for_instance(
        inst: &ListColoringInstance,
        regime: Regime,
        epsilon: f64,
        root: Option<usize>,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(CertError::RegimeViolation(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let want = if regime == Regime::Edge {
            Kind::Edge
        } else {
            Kind::Vertex
        };
        if inst.kind() != want {
            return Err(CertError::RegimeKind {
                regime,
                kind: inst.kind(),
            });
        }
        let g = inst.graph();
        let delta = g.max_degree();
        if delta == 0 {
            return Err(CertError::RegimeViolation(
                "graph has no edges (max degree 0)".into(),
            ));
        }
        let d = delta as f64;
        let ln = d.ln();
        let beta = match regime {
            Regime::Vertex2Delta => (1.0 + epsilon) * d,
            Regime::VertexTree => epsilon * d,
            Regime::Edge => (4.0 / 3.0 + 4.0 * epsilon) * d,
        };
        let root = match regime {
            Regime::VertexTree => {
                if !g.is_tree() {
                    return Err(CertError::NotTree);
                }
                let r = root.unwrap_or(0);
                if r >= g.vertex_count() {
                    return Err(CertError::Root(r));
                }
                Some(r)
            }
            _ => None,
        };
        let beta_extra = Rational64::approximate_float(beta).is_some_and(|b| inst.is_beta_extra(b));
        let pc = |name: &str, holds: bool| Precondition {
            name: name.into(),
            holds,
        };
        let preconditions = match regime {
            Regime::Vertex2Delta => vec![
                pc("0 < epsilon <= 1", epsilon <= 1.0),
                pc(
                    "(ln Delta + 2)/Delta <= epsilon^2/40",
                    (ln + 2.0) / d <= epsilon * epsilon / 40.0,
                ),
                pc("beta-extra lists", beta_extra),
            ],
            Regime::VertexTree => vec![
                pc(
                    "ln^2 Delta/Delta <= epsilon^2/100",
                    ln * ln / d <= epsilon * epsilon / 100.0,
                ),
                pc("beta-extra lists", beta_extra),
            ],
            Regime::Edge => vec![
                pc("0 < epsilon <= 1/10", epsilon <= 0.1),
                pc("Delta >= 2/epsilon^2", d >= 2.0 / (epsilon * epsilon)),
                pc(
                    "ln^2 Delta/Delta <= epsilon^3/15",
                    ln * ln / d <= epsilon.powi(3) / 15.0,
                ),
                pc("beta-extra lists", beta_extra),
            ],
        };
        Ok(CertificateParams {
            regime,
            epsilon,
            beta,
            delta,
            root,
            preconditions,
        })
    }

    pub fn preconditions_hold(&self) -> bool {
        self.preconditions.iter().all(|p| p.holds)
    }

    fn scale(&self) -> f64 {
        let d = self.delta as f64;
        d * d
    }

    fn ln_delta(&self) -> f64 {
        (self.delta as f64).ln()
    }
}

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|j| 1.0 / j as f64).sum()
}

// ---- scalar F formulas ----

pub fn f1_vertex_2delta(p: &CertificateParams, i: usize) -> f64 {
    let b = (1.0 + p.epsilon) * p.delta as f64;
    1.0 / b + (1.0 + 2.0 * harmonic(i.saturating_sub(1))) / (b * b)
}

pub fn f2_vertex_2delta(p: &CertificateParams, i: usize) -> Result<f64> {
    let den = (1.0 + p.epsilon / 2.0) * p.delta as f64
        - (i as f64 - 1.0)
        - 4.0 / p.epsilon * harmonic(i.saturating_sub(1));
    if den <= 0.0 {
        return Err(CertError::RegimeViolation(format!(
            "f2({i}) denominator {den} <= 0 at epsilon = {}, Delta = {}",
            p.epsilon, p.delta
        )));
    }
    Ok(i as f64 / den)
}

pub fn f1_tree(p: &CertificateParams, i: usize) -> f64 {
    (5.0 * harmonic(i.saturating_sub(1)) + 1.0) / (p.epsilon * p.epsilon * p.scale())
}

pub fn f2_tree(p: &CertificateParams, i: usize) -> f64 {
    5.0 * (p.ln_delta() + 1.0 + i as f64 * harmonic(i.saturating_sub(1)))
        / (p.epsilon * p.epsilon * p.scale())
}

pub fn f3_tree(p: &CertificateParams, i: usize, j: usize) -> f64 {
    5.0 * (p.ln_delta() + 1.0 + j as f64 + i as f64 * harmonic(i.saturating_sub(1)))
        / (p.epsilon * p.epsilon * p.scale())
}

pub fn f1_edge(p: &CertificateParams, i: usize) -> f64 {
    let e = p.epsilon;
    let b = (4.0 / 3.0 + 4.0 * e) * p.delta as f64;
    1.0 / (b * b)
        + (4.0 * e.powi(-5) + 0.6 * e.powi(-2)) * harmonic(i.saturating_sub(1)) / p.scale()
}

pub fn f2_edge(p: &CertificateParams, i: usize) -> f64 {
    let e = p.epsilon;
    (5.0 * e.powi(-5) * p.ln_delta()
        + (4.0 * e.powi(-5) + e.powi(-2) * i as f64) * harmonic(i.saturating_sub(1)))
        / p.scale()
}

/// Residual structure of one face read off the complex support.
#[derive(Debug, Clone)]
struct View {
    active: Vec<bool>,
    /// Δ_τ(x): active conflict neighbours of each element.
    deg: Vec<usize>,
    /// L_τ(x) as ground indices.
    lists: Vec<Vec<usize>>,
    connected: bool,
}

/// Shared per-complex data: instance, local walks of all faces with
/// codimension ≥ 2, and the residual views.
struct Ctx<'a> {
    x: &'a WeightedComplex,
    inst: &'a ListColoringInstance,
    offset: usize,
    walks: HashMap<Face, LocalWalk>,
    order: Vec<Face>,
    views: HashMap<Face, View>,
    /// parent in the rooted base tree (tree regime only)
    parent: Vec<Option<usize>>,
}

impl<'a> Ctx<'a> {
    fn new(x: &'a WeightedComplex, root: Option<usize>) -> Result<Self> {
        let (inst, offset) = x.instance().ok_or(CertError::NotColoring)?;
        let mut walks_v = all_walks(x)?;
        walks_v.sort_by(|a, b| a.codim.cmp(&b.codim).then_with(|| a.face.cmp(&b.face)));
        let order: Vec<Face> = walks_v.iter().map(|w| w.face.clone()).collect();
        let n = inst.element_count();
        let mut views = HashMap::new();
        for w in &walks_v {
            let mut lists = vec![Vec::new(); n];
            for &g in &w.support {
                lists[x.ground()[g].element - offset].push(g);
            }
            let active: Vec<bool> = lists.iter().map(|l| !l.is_empty()).collect();
            let cg = inst.conflict_graph();
            let deg = (0..n)
                .map(|e| {
                    if active[e] {
                        cg.neighbors(e).iter().filter(|&&u| active[u]).count()
                    } else {
                        0
                    }
                })
                .collect();
            let connected = cg.components_within(&active).len() <= 1;
            views.insert(
                w.face.clone(),
                View {
                    active,
                    deg,
                    lists,
                    connected,
                },
            );
        }
        let walks = walks_v.into_iter().map(|w| (w.face.clone(), w)).collect();
        let parent = match root {
            Some(r) => rooted_parents(inst.graph(), r),
            None => vec![None; inst.graph().vertex_count()],
        };
        Ok(Ctx {
            x,
            inst,
            offset,
            walks,
            order,
            views,
            parent,
        })
    }

    fn n(&self) -> usize {
        self.x.ground().len()
    }

    fn elem(&self, g: usize) -> usize {
        self.x.ground()[g].element - self.offset
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.inst.conflict_graph().has_edge(a, b)
    }

    /// Ground-index pairs (i < j) with the same color on conflicting elements.
    fn constraint_pairs(&self, face: &Face) -> Vec<(usize, usize)> {
        let sup = &self.walks[face].support;
        let g = self.x.ground();
        let mut out = Vec::new();
        for (a, &i) in sup.iter().enumerate() {
            for &j in &sup[a + 1..] {
                if g[i].color == g[j].color && self.adjacent(self.elem(i), self.elem(j)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// p(y | σ): probability that y lies in a facet drawn from the link of σ.
    fn cond_prob(&self, sigma: &Face, y: usize) -> f64 {
        let w = &self.walks[sigma];
        w.codim as f64 * w.pi[y]
    }

    /// f_× over the link of τ from an already-filled family.
    fn f_times(&self, face: &Face, fam: &HashMap<Face, DMatrix<f64>>) -> Result<DMatrix<f64>> {
        Ok(self
            .x
            .block_diag_f_times(face, &|f: &Face| fam.get(f).cloned())?)
    }

    fn is_component_root(&self, v: usize, view: &View) -> bool {
        match self.parent[v] {
            None => true,
            Some(a) => !view.active[a],
        }
    }
}

fn rooted_parents(g: &Graph, root: usize) -> Vec<Option<usize>> {
    let mut parent = vec![None; g.vertex_count()];
    let mut seen = vec![false; g.vertex_count()];
    let mut queue = std::collections::VecDeque::from([root]);
    seen[root] = true;
    while let Some(v) = queue.pop_front() {
        for &u in g.neighbors(v) {
            if !seen[u] {
                seen[u] = true;
                parent[u] = Some(v);
                queue.push_back(u);
            }
        }
    }
    parent
}

fn sqrt_diag(pi: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&pi.map(|p| p.max(0.0).sqrt()))
}

fn inv_sqrt_diag(pi: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&pi.map(|p| {
        if p > crate::spectral::SUPPORT_EPS {
            1.0 / p.sqrt()
        } else {
            0.0
        }
    }))
}

/// Per-face family of matrices over X(0).
pub type FaceFamily = HashMap<Face, DMatrix<f64>>;

fn check_codim2_connected(ctx: &Ctx, tau: &Face) -> Result<()> {
    let k = ctx.x.codim(tau);
    if k != 2 {
        return Err(TrickleError::Codim {
            face: tau.to_string(),
            codim: k.max(0) as usize,
            need: "2".into(),
        }
        .into());
    }
    if !ctx.views[tau].connected {
        return Err(CertError::RegimeViolation(format!(
            "residual of {tau} is disconnected"
        )));
    }
    Ok(())
}

/// M̃_τ in the normalized basis: per shared color c a block
/// [[1/((l_u−1)(l_v−1)), −1/√((l_u−1)(l_v−1))], …].
fn base_tilde(ctx: &Ctx, tau: &Face) -> DMatrix<f64> {
    let n = ctx.n();
    let view = &ctx.views[tau];
    let mut m = DMatrix::zeros(n, n);
    for (i, j) in ctx.constraint_pairs(tau) {
        let lu = view.lists[ctx.elem(i)].len() as f64 - 1.0;
        let lv = view.lists[ctx.elem(j)].len() as f64 - 1.0;
        let d = 1.0 / (lu * lv);
        m[(i, i)] = d;
        m[(j, j)] = d;
        m[(i, j)] = -d.sqrt();
        m[(j, i)] = -d.sqrt();
    }
    m
}

/// Π^{1/2}M̃Π^{1/2} for a codimension-2 face with a single residual edge.
pub fn base_case_matrix(x: &WeightedComplex, tau: &Face) -> Result<DMatrix<f64>> {
    let ctx = Ctx::new(x, None)?;
    if !ctx.walks.contains_key(tau) {
        return Err(CertError::Complex(ComplexError::Codim {
            face: tau.to_string(),
            codim: x.codim(tau),
            need: "2".into(),
        }));
    }
    check_codim2_connected(&ctx, tau)?;
    let d = sqrt_diag(&ctx.walks[tau].pi);
    Ok(&d * base_tilde(&ctx, tau) * &d)
}

fn f_entry(ctx: &Ctx, p: &CertificateParams, view: &View, e: usize) -> Result<f64> {
    let d = view.deg[e];
    if d == 0 {
        return Ok(0.0);
    }
    let nb = || {
        ctx.inst
            .conflict_graph()
            .neighbors(e)
            .iter()
            .copied()
            .find(|&u| view.active[u])
            .expect("one neighbour")
    };
    match p.regime {
        Regime::Vertex2Delta => {
            if d == 1 {
                Ok(f1_vertex_2delta(p, view.deg[nb()]))
            } else {
                f2_vertex_2delta(p, d)
            }
        }
        Regime::VertexTree => {
            if ctx.is_component_root(e, view) {
                Ok(if d == 1 {
                    f1_tree(p, view.deg[nb()])
                } else {
                    f2_tree(p, d)
                })
            } else {
                let a = ctx.parent[e].expect("non-root has a parent");
                Ok(f3_tree(p, d, view.deg[a]))
            }
        }
        Regime::Edge => Ok(if d == 1 {
            f1_edge(p, view.deg[nb()])
        } else {
            f2_edge(p, d)
        }),
    }
}

fn build_f(ctx: &Ctx, p: &CertificateParams) -> Result<FaceFamily> {
    let mut fam = FaceFamily::new();
    for face in &ctx.order {
        let view = &ctx.views[face];
        let w = &ctx.walks[face];
        let m = if view.connected || w.codim == 2 {
            let mut m = DMatrix::zeros(ctx.n(), ctx.n());
            for &g in &w.support {
                m[(g, g)] = f_entry(ctx, p, view, ctx.elem(g))?;
            }
            m
        } else {
            ctx.f_times(face, &fam)?
        };
        fam.insert(face.clone(), m);
    }
    Ok(fam)
}

fn expect_regime(p: &CertificateParams, r: Regime) -> Result<()> {
    if p.regime != r {
        return Err(CertError::RegimeViolation(format!(
            "parameters are for {}, not {r}",
            p.regime
        )));
    }
    Ok(())
}

pub fn build_f_vertex_2delta(x: &WeightedComplex, p: &CertificateParams) -> Result<FaceFamily> {
    expect_regime(p, Regime::Vertex2Delta)?;
    build_f(&Ctx::new(x, None)?, p)
}

pub fn build_f_tree(x: &WeightedComplex, p: &CertificateParams) -> Result<FaceFamily> {
    expect_regime(p, Regime::VertexTree)?;
    build_f(&Ctx::new(x, p.root)?, p)
}

pub fn build_f_edge(x: &WeightedComplex, p: &CertificateParams) -> Result<FaceFamily> {
    expect_regime(p, Regime::Edge)?;
    build_f(&Ctx::new(x, None)?, p)
}

/// ((k−1)/(k−2))·Π_τ^{−1/2}(E_{x∼π_τ} Π_{τ∪x}^{1/2}A_{τ∪x}Π_{τ∪x}^{1/2})Π_τ^{−1/2}
fn conjugated_expectation(ctx: &Ctx, face: &Face, a: &FaceFamily) -> DMatrix<f64> {
    let w = &ctx.walks[face];
    let n = ctx.n();
    let mut e = DMatrix::zeros(n, n);
    for &v in &w.support {
        let child = face.with(ctx.x.ground()[v]);
        let d = sqrt_diag(&ctx.walks[&child].pi);
        e += w.pi[v] * (&d * &a[&child] * &d);
    }
    let k = w.codim as f64;
    let s = inv_sqrt_diag(&w.pi);
    (&s * e * &s) * ((k - 1.0) / (k - 2.0))
}

fn build_a_tree_in(ctx: &Ctx) -> Result<FaceFamily> {
    let mut fam = FaceFamily::new();
    for face in &ctx.order {
        let view = &ctx.views[face];
        let w = &ctx.walks[face];
        let m = if !view.connected {
            ctx.f_times(face, &fam)?
        } else if w.codim == 2 {
            let mut t = base_tilde(ctx, face);
            t.fill_diagonal(0.0);
            t
        } else {
            conjugated_expectation(ctx, face, &fam)
        };
        fam.insert(face.clone(), m);
    }
    Ok(fam)
}

/// Hollow tree family by recursion from codimension 2.
pub fn build_a_tree(x: &WeightedComplex, p: &CertificateParams) -> Result<FaceFamily> {
    expect_regime(p, Regime::VertexTree)?;
    build_a_tree_in(&Ctx::new(x, p.root)?)
}

/// Edge family with its intermediates Ā and S (absent where the residual
/// line graph is disconnected or the codimension is 2).
#[derive(Debug, Clone, Default)]
pub struct EdgeFamily {
    pub a: FaceFamily,
    pub abar: FaceFamily,
    pub s: FaceFamily,
}

fn vertex_mask(ctx: &Ctx, v: usize, sup: &[usize]) -> Vec<usize> {
    sup.iter()
        .copied()
        .filter(|&g| {
            let (a, b) = ctx.inst.endpoints(ctx.elem(g));
            a == v || b == v
        })
        .collect()
}

fn restrict(m: &DMatrix<f64>, idx: &[usize], f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for &i in idx {
        for &j in idx {
            if i != j {
                out[(i, j)] = f(m[(i, j)]);
            }
        }
    }
    out
}

fn build_a_edge_in(ctx: &Ctx, p: &CertificateParams) -> Result<EdgeFamily> {
    let mut out = EdgeFamily::default();
    let threshold = p.beta / (4.0 * (1.0 + p.epsilon));
    let nv = ctx.inst.graph().vertex_count();
    for face in &ctx.order {
        let view = &ctx.views[face];
        let w = &ctx.walks[face];
        let m = if !view.connected {
            ctx.f_times(face, &out.a)?
        } else if w.codim == 2 {
            let mut t = base_tilde(ctx, face);
            t.fill_diagonal(0.0);
            t
        } else {
            let abar = conjugated_expectation(ctx, face, &out.a);
            let mut s = DMatrix::zeros(ctx.n(), ctx.n());
            for v in 0..nv {
                let idx = vertex_mask(ctx, v, &w.support);
                if idx.len() < 2 {
                    continue;
                }
                let dv = idx
                    .iter()
                    .map(|&g| ctx.elem(g))
                    .collect::<std::collections::BTreeSet<_>>()
                    .len() as f64;
                if dv <= threshold {
                    let pos = restrict(&abar, &idx, |a| a.max(0.0));
                    let neg = restrict(&abar, &idx, |a| a.min(0.0));
                    s += (&pos * &pos + &neg * &neg) * (4.0 * (1.0 + p.epsilon));
                } else {
                    let av = restrict(&abar, &idx, |a| a);
                    s += (&av * &av) * (2.0 * (1.0 + p.epsilon));
                }
            }
            let mut off = s.clone();
            off.fill_diagonal(0.0);
            let a = &abar + off / (w.codim as f64 - 2.0);
            out.abar.insert(face.clone(), abar);
            out.s.insert(face.clone(), s);
            a
        };
        out.a.insert(face.clone(), m);
    }
    Ok(out)
}

pub fn build_a_edge(x: &WeightedComplex, p: &CertificateParams) -> Result<EdgeFamily> {
    expect_regime(p, Regime::Edge)?;
    build_a_edge_in(&Ctx::new(x, None)?, p)
}

fn gamma_tree_in(ctx: &Ctx, p: &CertificateParams, face: &Face, g: usize) -> f64 {
    let w = &ctx.walks[face];
    if w.pi[g] <= 0.0 {
        return 0.0;
    }
    let view = &ctx.views[face];
    let v = ctx.elem(g);
    let b2 = p.beta * p.beta;
    if ctx.is_component_root(v, view) {
        4.0 * view.deg[v] as f64 / b2
    } else {
        let a = ctx.parent[v].expect("non-root");
        4.0 * (view.deg[v] as f64 + view.deg[a] as f64 - 1.0) / b2
    }
}

fn gamma_edge_in(ctx: &Ctx, p: &CertificateParams, face: &Face, g: usize) -> f64 {
    if ctx.walks[face].pi[g] <= 0.0 {
        return 0.0;
    }
    let e = p.epsilon;
    let d2 = p.scale();
    let de = ctx.views[face].deg[ctx.elem(g)] as f64;
    (1.0 + e) * de / (2.0 * e * e * d2)
        + (1.0 + e).powi(2) * (2.0 + 3.0 * e + e * e) / (e.powi(5) * d2)
}

fn lookup(ctx: &Ctx, tau: &Face, vc: &Pair) -> Result<Option<usize>> {
    if !ctx.walks.contains_key(tau) {
        return Err(CertError::Complex(ComplexError::NotAFace(tau.to_string())));
    }
    Ok(ctx.x.ground_index(vc))
}

/// γ_τ(vc) of the tree regime; 0 outside X_τ(0).
pub fn gamma_tree(
    x: &WeightedComplex,
    tau: &Face,
    vc: &Pair,
    p: &CertificateParams,
) -> Result<f64> {
    expect_regime(p, Regime::VertexTree)?;
    let ctx = Ctx::new(x, p.root)?;
    Ok(lookup(&ctx, tau, vc)?.map_or(0.0, |g| gamma_tree_in(&ctx, p, tau, g)))
}

/// γ_τ(ec) of the edge regime; 0 outside X_τ(0).
pub fn gamma_edge(
    x: &WeightedComplex,
    tau: &Face,
    ec: &Pair,
    p: &CertificateParams,
) -> Result<f64> {
    expect_regime(p, Regime::Edge)?;
    let ctx = Ctx::new(x, None)?;
    Ok(lookup(&ctx, tau, ec)?.map_or(0.0, |g| gamma_edge_in(&ctx, p, tau, g)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryCheck {
    pub pair: Pair,
    /// Σ p(uc′|τ∪vc)·F_{τ∪uc′}(vc,vc)
    pub lhs: f64,
    pub rhs: f64,
    pub gamma: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionRecord {
    pub face: Face,
    pub codim: usize,
    pub threshold: f64,
    pub max_f: f64,
    pub threshold_ok: bool,
    pub entries: Vec<EntryCheck>,
    pub ok: bool,
}

fn check_conditions(ctx: &Ctx, f: &FaceFamily, p: &CertificateParams) -> Vec<ConditionRecord> {
    let mut out = Vec::new();
    for face in &ctx.order {
        let w = &ctx.walks[face];
        if w.codim < 3 || !ctx.views[face].connected {
            continue;
        }
        let k = w.codim as f64;
        let ft = &f[face];
        let base = (k - 1.0).powi(2) / (3.0 * k - 1.0);
        let threshold = match p.regime {
            Regime::Vertex2Delta => base,
            Regime::VertexTree => base - 1.0 / p.beta,
            Regime::Edge => base - 1.0 / (2.0 * p.epsilon * p.delta as f64),
        };
        let max_f = w.support.iter().map(|&g| ft[(g, g)]).fold(0.0, f64::max);
        let threshold_ok = max_f <= threshold + ENTRY_TOL;
        let mut entries = Vec::new();
        for &g in &w.support {
            let pair = ctx.x.ground()[g];
            let sigma = face.with(pair);
            let lhs: f64 = ctx.walks[&sigma]
                .support
                .iter()
                .map(|&u| ctx.cond_prob(&sigma, u) * f[&face.with(ctx.x.ground()[u])][(g, g)])
                .sum();
            let fv = ft[(g, g)];
            let (sq, gamma) = match p.regime {
                Regime::Vertex2Delta => (1.0, 0.0),
                Regime::VertexTree => (2.0, gamma_tree_in(ctx, p, face, g)),
                Regime::Edge => (
                    (2.0 + p.epsilon) / p.epsilon,
                    gamma_edge_in(ctx, p, face, g),
                ),
            };
            let rhs = (k - 2.0) * fv - sq * fv * fv - gamma;
            let ok = lhs <= rhs + 1e-12 * rhs.abs().max(1.0);
            entries.push(EntryCheck {
                pair,
                lhs,
                rhs,
                gamma,
                ok,
            });
        }
        let ok = threshold_ok && entries.iter().all(|e| e.ok);
        out.push(ConditionRecord {
            face: face.clone(),
            codim: w.codim,
            threshold,
            max_f,
            threshold_ok,
            entries,
            ok,
        });
    }
    out
}

pub fn check_condition_f_vertex_2delta(
    x: &WeightedComplex,
    f: &FaceFamily,
    p: &CertificateParams,
) -> Result<Vec<ConditionRecord>> {
    expect_regime(p, Regime::Vertex2Delta)?;
    Ok(check_conditions(&Ctx::new(x, None)?, f, p))
}

pub fn check_condition_f_tree(
    x: &WeightedComplex,
    f: &FaceFamily,
    p: &CertificateParams,
) -> Result<Vec<ConditionRecord>> {
    expect_regime(p, Regime::VertexTree)?;
    Ok(check_conditions(&Ctx::new(x, p.root)?, f, p))
}

pub fn check_condition_f_edge(
    x: &WeightedComplex,
    f: &FaceFamily,
    p: &CertificateParams,
) -> Result<Vec<ConditionRecord>> {
    expect_regime(p, Regime::Edge)?;
    Ok(check_conditions(&Ctx::new(x, None)?, f, p))
}

/// F and A families of one regime.
#[derive(Debug, Clone, Default)]
pub struct SplitFamily {
    pub f: FaceFamily,
    pub a: FaceFamily,
    /// Ā and S of the edge regime
    pub edge: Option<EdgeFamily>,
}

impl SplitFamily {
    /// M_τ = (Π_τF_τ + Π_τ^{1/2}A_τΠ_τ^{1/2})/(k−1)
    pub fn assemble(&self, x: &WeightedComplex, variant: Variant) -> Result<MatrixFamily> {
        let mut fam = MatrixFamily::new(variant);
        for w in all_walks(x)? {
            let k1 = w.codim as f64 - 1.0;
            let f = self
                .f
                .get(&w.face)
                .ok_or_else(|| TrickleError::Missing(w.face.to_string()))?;
            let d = sqrt_diag(&w.pi);
            let mut m = w.pi_matrix() * f;
            if let Some(a) = self.a.get(&w.face) {
                m += &d * a * &d;
            }
            m /= k1;
            let m = (&m + m.transpose()) * 0.5;
            fam.insert(w.face, m);
        }
        Ok(fam)
    }
}

fn build_split(ctx: &Ctx, p: &CertificateParams) -> Result<SplitFamily> {
    let f = build_f(ctx, p)?;
    Ok(match p.regime {
        Regime::Vertex2Delta => SplitFamily {
            f,
            a: FaceFamily::new(),
            edge: None,
        },
        Regime::VertexTree => SplitFamily {
            f,
            a: build_a_tree_in(ctx)?,
            edge: None,
        },
        Regime::Edge => {
            let e = build_a_edge_in(ctx, p)?;
            SplitFamily {
                f,
                a: e.a.clone(),
                edge: Some(e),
            }
        }
    })
}

pub fn build_split_family(x: &WeightedComplex, p: &CertificateParams) -> Result<SplitFamily> {
    build_split(&Ctx::new(x, p.root)?, p)
}

/// A_τ(vc,uc) recomputed entrywise:
/// (1/(k−2))·Σ_{wc′, w≠u,v} √(p(wc′|τ∪vc)p(wc′|τ∪uc))·A_{τ∪wc′}(vc,uc).
pub fn a_entry_scalar(
    x: &WeightedComplex,
    a: &FaceFamily,
    tau: &Face,
    i: usize,
    j: usize,
) -> Result<f64> {
    let ctx = Ctx::new(x, None)?;
    let w = ctx
        .walks
        .get(tau)
        .ok_or_else(|| CertError::Complex(ComplexError::NotAFace(tau.to_string())))?;
    let (si, sj) = (tau.with(x.ground()[i]), tau.with(x.ground()[j]));
    let (ei, ej) = (ctx.elem(i), ctx.elem(j));
    let mut acc = 0.0;
    for &g in &w.support {
        let e = ctx.elem(g);
        if e == ei || e == ej {
            continue;
        }
        let pi = if ctx.walks.contains_key(&si) {
            ctx.cond_prob(&si, g)
        } else {
            0.0
        };
        let pj = if ctx.walks.contains_key(&sj) {
            ctx.cond_prob(&sj, g)
        } else {
            0.0
        };
        if pi > 0.0 && pj > 0.0 {
            acc += (pi * pj).sqrt() * a[&tau.with(x.ground()[g])][(i, j)];
        }
    }
    Ok(acc / (w.codim as f64 - 2.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundViolation {
    pub face: Face,
    pub row: Pair,
    pub col: Pair,
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSummary {
    pub checked: usize,
    pub violations: Vec<BoundViolation>,
    pub min: f64,
    pub max: f64,
}

impl BoundSummary {
    fn new() -> Self {
        BoundSummary {
            checked: 0,
            violations: Vec::new(),
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn record(
        &mut self,
        ctx: &Ctx,
        face: &Face,
        (i, j): (usize, usize),
        value: f64,
        low: f64,
        high: f64,
    ) {
        self.checked += 1;
        self.min = self.min.min(value);
        self.max = self.max.max(value);
        if value < low - ENTRY_TOL || value > high + ENTRY_TOL {
            let g = ctx.x.ground();
            self.violations.push(BoundViolation {
                face: face.clone(),
                row: g[i],
                col: g[j],
                value,
                low,
                high,
            });
        }
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn tree_bounds_in(ctx: &Ctx, a: &FaceFamily, beta: f64) -> BoundSummary {
    let mut s = BoundSummary::new();
    for face in &ctx.order {
        for pr in ctx.constraint_pairs(face) {
            s.record(ctx, face, pr, a[face][pr], -1.0 / beta, 0.0);
        }
    }
    s
}

/// Every A_τ(vc,uc) with v ∼_{τ,c} u inside [−1/β, 0].
pub fn tree_a_bounds(
    x: &WeightedComplex,
    a: &FaceFamily,
    p: &CertificateParams,
) -> Result<BoundSummary> {
    Ok(tree_bounds_in(&Ctx::new(x, p.root)?, a, p.beta))
}

fn common_vertex(ctx: &Ctx, e: usize, f: usize) -> Option<usize> {
    let (a, b) = ctx.inst.endpoints(e);
    let (c, d) = ctx.inst.endpoints(f);
    [a, b].into_iter().find(|&v| v == c || v == d)
}

fn sandwich_in(ctx: &Ctx, fam: &EdgeFamily) -> BoundSummary {
    let mut s = BoundSummary::new();
    for face in &ctx.order {
        let Some(abar) = fam.abar.get(face) else {
            continue;
        };
        let view = &ctx.views[face];
        for (i, j) in ctx.constraint_pairs(face) {
            let (e, f) = (ctx.elem(i), ctx.elem(j));
            let (mut lo, mut hi, mut cnt) = (0.0, 0.0, 0usize);
            for gel in (0..view.active.len()).filter(|&g| view.active[g] && g != e && g != f) {
                let vals: Vec<f64> = view.lists[gel]
                    .iter()
                    .map(|&gc| fam.a[&face.with(ctx.x.ground()[gc])][(i, j)])
                    .collect();
                lo += vals.iter().copied().fold(f64::INFINITY, f64::min);
                hi += vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                cnt += 1;
            }
            let c = cnt.max(1) as f64;
            s.record(ctx, face, (i, j), abar[(i, j)], lo / c, hi / c);
        }
    }
    s
}

/// Ā_τ(ec,fc) between the averages over g of the min and max child entries.
pub fn edge_sandwich(x: &WeightedComplex, fam: &EdgeFamily) -> Result<BoundSummary> {
    Ok(sandwich_in(&Ctx::new(x, None)?, fam))
}

fn edge_bounds_in(ctx: &Ctx, fam: &EdgeFamily, p: &CertificateParams) -> BoundSummary {
    let mut s = BoundSummary::new();
    let thr = p.beta / (4.0 * (1.0 + p.epsilon));
    for face in &ctx.order {
        let w = &ctx.walks[face];
        for (i, j) in ctx.constraint_pairs(face) {
            let (e, f) = (ctx.elem(i), ctx.elem(j));
            let v = common_vertex(ctx, e, f).expect("conflicting edges share a vertex");
            let dv = vertex_mask(ctx, v, &w.support)
                .iter()
                .map(|&g| ctx.elem(g))
                .collect::<std::collections::BTreeSet<_>>()
                .len() as f64;
            let (low, high) = if dv <= thr {
                (
                    -1.0 / p.beta,
                    4.0 * (1.0 + p.epsilon) * (dv - 2.0) / (p.beta * p.beta),
                )
            } else {
                let den = 1.5 * p.beta - 2.0 * (1.0 + 2.0 * p.epsilon) * dv;
                if den <= 0.0 {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    (-1.0 / den, 1.0 / den)
                }
            };
            s.record(ctx, face, (i, j), fam.a[face][(i, j)], low, high);
        }
    }
    s
}

/// Optional entry bounds of the edge family (two cases split at
/// Δ_τ(v) = β/(4(1+ε))); meaningful only when the regime preconditions hold.
pub fn edge_a_bounds(
    x: &WeightedComplex,
    fam: &EdgeFamily,
    p: &CertificateParams,
) -> Result<BoundSummary> {
    Ok(edge_bounds_in(&Ctx::new(x, None)?, fam, p))
}

/// A² ⪯ 2Σ_v (A^v)² for a hollow matrix over the edges of `g` supported on
/// pairs of edges that share a vertex. Returns the PSD margin.
pub fn line_graph_square_margin(g: &Graph, a: &DMatrix<f64>) -> f64 {
    let m = g.edge_count();
    let mut rhs = DMatrix::zeros(m, m);
    for v in 0..g.vertex_count() {
        let idx: Vec<usize> = g
            .neighbors(v)
            .iter()
            .map(|&u| g.edge_id(v, u).expect("edge"))
            .collect();
        let av = restrict(a, &idx, |x| x);
        rhs += &av * &av * 2.0;
    }
    crate::spectral::psd_margin(&(a * a), &rhs, PSD_TOL)
}

/// One scalar recursion inequality of the explicit F families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarCheck {
    pub case: String,
    pub i: usize,
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Closed-form recursion inequalities behind the explicit F families for
/// degrees up to Δ (2Δ for edges), using the stated f₂(1) sentinels.
pub fn scalar_recursion_checks(p: &CertificateParams) -> Vec<ScalarCheck> {
    let mut out = Vec::new();
    let mut push = |case: &str, i: usize, j: usize, lhs: f64, rhs: f64| {
        out.push(ScalarCheck {
            case: case.into(),
            i,
            j,
            lhs,
            rhs,
            ok: lhs.is_finite() && rhs.is_finite() && lhs >= rhs,
        });
    };
    let d = p.delta;
    let e = p.epsilon;
    let d2 = p.scale();
    match p.regime {
        Regime::Vertex2Delta => {
            let f2 = |i: usize| {
                if i == 1 {
                    Ok(1.0 / (1.0 + e / 2.0))
                } else {
                    f2_vertex_2delta(p, i)
                }
            };
            for i in 2..=d {
                let f1i = f1_vertex_2delta(p, i);
                push(
                    "f1",
                    i,
                    0,
                    (i as f64 - 1.0) * (f1i - f1_vertex_2delta(p, i - 1)),
                    f1i * f1i,
                );
                let (a, b) = (f2(i).unwrap_or(f64::NAN), f2(i - 1).unwrap_or(f64::NAN));
                push("f2", i, 0, (i as f64 - 1.0) * a - i as f64 * b, a * a);
            }
        }
        Regime::VertexTree => {
            let c = 1.0 / (e * e * d2);
            let f2 = |i: usize| {
                if i == 1 {
                    5.0 * (p.ln_delta() + 1.0) * c
                } else {
                    f2_tree(p, i)
                }
            };
            for i in 2..=d {
                let f1i = f1_tree(p, i);
                push(
                    "f1",
                    i,
                    0,
                    (i as f64 - 1.0) * (f1i - f1_tree(p, i - 1)),
                    2.0 * f1i * f1i + 4.0 * c,
                );
                let a = f2(i);
                push(
                    "f2",
                    i,
                    0,
                    (i as f64 - 1.0) * a - i as f64 * f2(i - 1),
                    2.0 * a * a + 4.0 * i as f64 * c,
                );
            }
            for i in 1..=d {
                for j in 1..=d {
                    let a = f3_tree(p, i, j);
                    let lhs = (i as f64 - 1.0) * a - i as f64 * f3_tree(p, i - 1, j)
                        + (j as f64 - 1.0) * (a - f3_tree(p, i, j - 1));
                    push("f3", i, j, lhs, 2.0 * a * a + 4.0 * (i + j - 1) as f64 * c);
                }
            }
        }
        Regime::Edge => {
            let f2 = |i: usize| {
                if i == 1 {
                    5.0 * e.powi(-5) * p.ln_delta() / d2
                } else {
                    f2_edge(p, i)
                }
            };
            let sq = 1.0 + 2.0 / e;
            for i in 2..=2 * d {
                let f1i = f1_edge(p, i);
                let g1 = (0.6 * e.powi(-2) + 3.0 * e.powi(-5)) / d2;
                push(
                    "f1",
                    i,
                    0,
                    (i as f64 - 1.0) * (f1i - f1_edge(p, i - 1)),
                    sq * f1i * f1i + g1,
                );
                let a = f2(i);
                let g2 = (0.6 * e.powi(-2) * i as f64 + 3.0 * e.powi(-5)) / d2;
                push(
                    "f2",
                    i,
                    0,
                    (i as f64 - 1.0) * a - i as f64 * f2(i - 1),
                    sq * a * a + g2,
                );
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSummary {
    pub sandwich: BoundSummary,
    pub entry_bounds: BoundSummary,
    pub max_abs_abar: f64,
    pub max_abs_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairingRecord {
    pub codim: usize,
    pub lambda2: f64,
    /// ρ(F_τ + A_τ)/(k−1)
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeReport {
    pub params: CertificateParams,
    pub certificate: CertificateReport,
    pub conditions: Vec<ConditionRecord>,
    pub conditions_pass: bool,
    pub base_pass: bool,
    pub pairing: BTreeMap<Face, PairingRecord>,
    /// Faces where conditions and base cases all passed yet λ₂ exceeded the bound.
    pub pairing_violations: Vec<Face>,
    pub tree_bounds: Option<BoundSummary>,
    pub edge: Option<EdgeSummary>,
    pub scalar_recursion: Vec<ScalarCheck>,
}

impl RegimeReport {
    /// No certified face and no fully-conditioned face exceeds its bound.
    pub fn sound(&self) -> bool {
        self.certificate.soundness_violations.is_empty() && self.pairing_violations.is_empty()
    }
}

/// Builds the regime's family, runs the generic verifier and the regime's
/// scalar checkers, and pairs the verdicts with exact λ₂.
pub fn run_regime(
    x: &WeightedComplex,
    p: &CertificateParams,
    variant: Variant,
) -> Result<RegimeReport> {
    let ctx = Ctx::new(x, p.root)?;
    let split = build_split(&ctx, p)?;
    let fam = split.assemble(x, variant)?;
    let certificate = certify(x, &fam)?;
    let conditions = check_conditions(&ctx, &split.f, p);
    let conditions_pass = conditions.iter().all(|c| c.ok);
    let base_pass = certificate
        .faces
        .values()
        .filter(|r| r.codim == 2)
        .all(|r| r.pass);
    let mut pairing = BTreeMap::new();
    let mut pairing_violations = Vec::new();
    for (face, rec) in &certificate.faces {
        let w = &ctx.walks[face];
        let mut fa = split.f[face].clone();
        if let Some(a) = split.a.get(face) {
            fa += a;
        }
        let sub = fa.select_rows(&w.support).select_columns(&w.support);
        let sub = (&sub + sub.transpose()) * 0.5;
        let rho = symmetric_eigenvalues(&sub)
            .into_iter()
            .fold(0.0f64, |m, l| m.max(l.abs()));
        let bound = rho / (w.codim as f64 - 1.0);
        if conditions_pass && base_pass && rec.lambda2 > bound + SOUNDNESS_TOL {
            pairing_violations.push(face.clone());
        }
        pairing.insert(
            face.clone(),
            PairingRecord {
                codim: w.codim,
                lambda2: rec.lambda2,
                bound,
            },
        );
    }
    let tree_bounds =
        (p.regime == Regime::VertexTree).then(|| tree_bounds_in(&ctx, &split.a, p.beta));
    let edge = split.edge.as_ref().map(|e| EdgeSummary {
        sandwich: sandwich_in(&ctx, e),
        entry_bounds: edge_bounds_in(&ctx, e, p),
        max_abs_abar: e.abar.values().map(|m| m.amax()).fold(0.0, f64::max),
        max_abs_s: e.s.values().map(|m| m.amax()).fold(0.0, f64::max),
    });
    Ok(RegimeReport {
        params: p.clone(),
        certificate,
        conditions,
        conditions_pass,
        base_pass,
        pairing,
        pairing_violations,
        tree_bounds,
        edge,
        scalar_recursion: scalar_recursion_checks(p),
    })
}
