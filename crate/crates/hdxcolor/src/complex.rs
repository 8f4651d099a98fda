//! Weighted simplicial complexes given by an explicit facet list.
//!
//! Ground vertices are `(element, color)` pairs. For a coloring complex the
//! facets are the proper list colorings; general complexes use any labels
//! with distinct elements inside a facet. Matrices indexed by X(0) are dense
//! `N × N` with `N = ground().len()`, zero outside the relevant support.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{GraphError, ListColoringInstance, PartialColoring};

pub const DEFAULT_FACET_LIMIT: usize = 5_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplexError {
    #[error("more than {limit} facets; raise the facet limit or shrink the instance")]
    FacetLimit { limit: usize },
    #[error("the instance has no proper coloring")]
    Empty,
    #[error("{0} is not a face of the complex")]
    NotAFace(String),
    #[error("face {face} has codimension {codim}, need {need}")]
    Codim {
        face: String,
        codim: isize,
        need: String,
    },
    #[error("factor complexes share element {0}")]
    Overlap(usize),
    #[error("the link of {0} is not a product")]
    NotProduct(String),
    #[error("component matrix for {face} depends on the coloring of other components")]
    Dependent { face: String },
    #[error("missing matrix for face {0}")]
    Missing(String),
    #[error("invalid facets: {0}")]
    InvalidFacets(String),
    #[error("cannot parse face {0:?}")]
    Parse(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, ComplexError>;

/// A ground vertex `element:color`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub element: usize,
    pub color: u32,
}

impl Pair {
    pub fn new(element: usize, color: u32) -> Self {
        Pair { element, color }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.element, self.color)
    }
}

/// Sorted set of pairs. Displays as the canonical key `"e:c,e:c"`; the
/// empty face displays as the empty string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Face(Vec<Pair>);

impl Face {
    pub fn new(pairs: impl IntoIterator<Item = Pair>) -> Self {
        let mut v: Vec<Pair> = pairs.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Face(v)
    }

    pub fn empty() -> Self {
        Face(Vec::new())
    }

    pub fn from_partial(tau: &PartialColoring) -> Self {
        Face(tau.iter().map(|(&e, &c)| Pair::new(e, c)).collect())
    }

    pub fn to_partial(&self) -> PartialColoring {
        self.0.iter().map(|p| (p.element, p.color)).collect()
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> isize {
        self.0.len() as isize - 1
    }

    pub fn with(&self, p: Pair) -> Face {
        let mut v = self.0.clone();
        if let Err(i) = v.binary_search(&p) {
            v.insert(i, p);
        }
        Face(v)
    }

    pub fn union(&self, other: &Face) -> Face {
        Face::new(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn contains(&self, p: &Pair) -> bool {
        self.0.binary_search(p).is_ok()
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for Face {
    type Err = ComplexError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Face::empty());
        }
        let mut pairs = Vec::new();
        for tok in s.split(',') {
            let (e, c) = tok
                .split_once(':')
                .ok_or_else(|| ComplexError::Parse(s.to_string()))?;
            let e = e
                .trim()
                .parse()
                .map_err(|_| ComplexError::Parse(s.to_string()))?;
            let c = c
                .trim()
                .parse()
                .map_err(|_| ComplexError::Parse(s.to_string()))?;
            pairs.push(Pair::new(e, c));
        }
        Ok(Face::new(pairs))
    }
}

impl Serialize for Face {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Face {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone)]
enum Structure {
    Plain,
    Coloring {
        instance: Arc<ListColoringInstance>,
        offset: usize,
    },
    Product(Vec<Factor>),
}

#[derive(Debug, Clone)]
struct Factor {
    complex: WeightedComplex,
    /// factor ground index -> product ground index
    map: Vec<usize>,
}

/// Pure weighted complex with explicit facets.
#[derive(Debug, Clone)]
pub struct WeightedComplex {
    dim: isize,
    ground: Vec<Pair>,
    index: HashMap<Pair, usize>,
    facets: Vec<Vec<usize>>,
    weights: Vec<f64>,
    structure: Structure,
}

/// One factor of the product decomposition of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Ground indices of the factor's vertices inside X_τ(0).
    pub ground: Vec<usize>,
    pub dim: isize,
}

/// Local walk of a face; matrices are over all of X(0).
#[derive(Debug, Clone)]
pub struct LocalWalk {
    pub face: Face,
    pub codim: usize,
    pub support: Vec<usize>,
    pub p: DMatrix<f64>,
    pub pi: DVector<f64>,
}

impl LocalWalk {
    pub fn pi_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.pi)
    }
}

/// Unnormalized statistics of the facets containing a face.
pub(crate) struct LinkStats {
    pub z: f64,
    pub single: Vec<f64>,
    pub joint: DMatrix<f64>,
}

impl WeightedComplex {
    /// Complex from explicit facets and positive weights (normalized here).
    pub fn from_facets(facets: Vec<(Vec<Pair>, f64)>) -> Result<Self> {
        if facets.is_empty() {
            return Err(ComplexError::Empty);
        }
        let mut ground: Vec<Pair> = facets.iter().flat_map(|(f, _)| f.iter().copied()).collect();
        ground.sort_unstable();
        ground.dedup();
        let index: HashMap<Pair, usize> = ground.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let size = facets[0].0.len();
        let mut out = Vec::with_capacity(facets.len());
        let mut weights = Vec::with_capacity(facets.len());
        for (f, w) in facets {
            let mut idx: Vec<usize> = f.iter().map(|p| index[p]).collect();
            idx.sort_unstable();
            idx.dedup();
            if idx.len() != size {
                return Err(ComplexError::InvalidFacets(
                    "facets must have equal size and distinct vertices".into(),
                ));
            }
            if idx
                .windows(2)
                .any(|w| ground[w[0]].element == ground[w[1]].element)
            {
                return Err(ComplexError::InvalidFacets(
                    "a facet repeats an element".into(),
                ));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(ComplexError::InvalidFacets(format!(
                    "weight {w} is not positive"
                )));
            }
            out.push(idx);
            weights.push(w);
        }
        let mut order: Vec<usize> = (0..out.len()).collect();
        order.sort_by(|&a, &b| out[a].cmp(&out[b]));
        if order.windows(2).any(|w| out[w[0]] == out[w[1]]) {
            return Err(ComplexError::InvalidFacets("duplicate facet".into()));
        }
        let total: f64 = weights.iter().sum();
        let facets: Vec<Vec<usize>> = order.iter().map(|&i| out[i].clone()).collect();
        let weights = order.iter().map(|&i| weights[i] / total).collect();
        Ok(WeightedComplex {
            dim: size as isize - 1,
            ground,
            index,
            facets,
            weights,
            structure: Structure::Plain,
        })
    }

    pub fn dim(&self) -> isize {
        self.dim
    }

    pub fn ground(&self) -> &[Pair] {
        &self.ground
    }

    pub fn ground_index(&self, p: &Pair) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    /// Facets as sorted ground indices.
    pub fn facet_indices(&self) -> &[Vec<usize>] {
        &self.facets
    }

    pub fn facet(&self, i: usize) -> Face {
        Face(self.facets[i].iter().map(|&j| self.ground[j]).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The instance this complex enumerates, if any, with the element offset
    /// applied by [`WeightedComplex::shift_elements`].
    pub fn instance(&self) -> Option<(&ListColoringInstance, usize)> {
        match &self.structure {
            Structure::Coloring { instance, offset } => Some((instance, *offset)),
            _ => None,
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(self.structure, Structure::Product(_))
    }

    /// Relabel every element `e` as `e + offset`.
    pub fn shift_elements(&self, offset: usize) -> WeightedComplex {
        let ground: Vec<Pair> = self
            .ground
            .iter()
            .map(|p| Pair::new(p.element + offset, p.color))
            .collect();
        let index = ground.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let structure = match &self.structure {
            Structure::Plain => Structure::Plain,
            Structure::Coloring {
                instance,
                offset: o,
            } => Structure::Coloring {
                instance: instance.clone(),
                offset: o + offset,
            },
            Structure::Product(fs) => Structure::Product(
                fs.iter()
                    .map(|f| Factor {
                        complex: f.complex.shift_elements(offset),
                        map: f.map.clone(),
                    })
                    .collect(),
            ),
        };
        WeightedComplex {
            dim: self.dim,
            ground,
            index,
            facets: self.facets.clone(),
            weights: self.weights.clone(),
            structure,
        }
    }

    /// Sorted ground indices of a face.
    pub fn face_indices(&self, tau: &Face) -> Result<Vec<usize>> {
        tau.pairs()
            .iter()
            .map(|p| {
                self.index
                    .get(p)
                    .copied()
                    .ok_or_else(|| ComplexError::NotAFace(tau.to_string()))
            })
            .collect()
    }

    pub fn face_of(&self, idx: &[usize]) -> Face {
        Face(idx.iter().map(|&i| self.ground[i]).collect())
    }

    pub fn codim(&self, tau: &Face) -> isize {
        self.dim - tau.dim()
    }

    /// Ids of facets containing the (sorted) index set.
    pub fn containing(&self, tau: &[usize]) -> Vec<usize> {
        (0..self.facets.len())
            .filter(|&i| is_subset(tau, &self.facets[i]))
            .collect()
    }

    pub fn is_face(&self, tau: &Face) -> bool {
        match self.face_indices(tau) {
            Ok(idx) => self.facets.iter().any(|f| is_subset(&idx, f)),
            Err(_) => false,
        }
    }

    fn checked(&self, tau: &Face) -> Result<(Vec<usize>, Vec<usize>)> {
        let idx = self.face_indices(tau)?;
        let cont = self.containing(&idx);
        if cont.is_empty() {
            return Err(ComplexError::NotAFace(tau.to_string()));
        }
        Ok((idx, cont))
    }

    pub(crate) fn stats(&self, tau: &[usize], containing: &[usize]) -> LinkStats {
        let n = self.ground.len();
        let mut single = vec![0.0; n];
        let mut joint = DMatrix::zeros(n, n);
        let mut z = 0.0;
        let mut rest = Vec::with_capacity(self.facets.first().map_or(0, Vec::len));
        for &s in containing {
            let w = self.weights[s];
            z += w;
            rest.clear();
            rest.extend(
                self.facets[s]
                    .iter()
                    .copied()
                    .filter(|i| tau.binary_search(i).is_err()),
            );
            for (a, &x) in rest.iter().enumerate() {
                single[x] += w;
                for &y in &rest[a + 1..] {
                    joint[(x, y)] += w;
                    joint[(y, x)] += w;
                }
            }
        }
        LinkStats { z, single, joint }
    }

    /// X_τ(0) as sorted ground indices.
    pub fn support(&self, tau: &Face) -> Result<Vec<usize>> {
        let (idx, cont) = self.checked(tau)?;
        Ok(support_of(self, &idx, &cont))
    }

    /// π_{τ,i}: weights of the faces η ∈ X_τ(i), sorted by face.
    pub fn marginal(&self, tau: &Face, i: isize) -> Result<Vec<(Face, f64)>> {
        let (idx, cont) = self.checked(tau)?;
        let k = (self.dim - tau.dim()) as usize;
        if i < -1 || i > k as isize - 1 {
            return Err(ComplexError::Codim {
                face: tau.to_string(),
                codim: k as isize,
                need: format!("> {i}"),
            });
        }
        let size = (i + 1) as usize;
        let mut acc: HashMap<Vec<usize>, f64> = HashMap::new();
        let z: f64 = cont.iter().map(|&s| self.weights[s]).sum();
        let norm = binomial(k, size) * z;
        for &s in &cont {
            let rest: Vec<usize> = self.facets[s]
                .iter()
                .copied()
                .filter(|j| idx.binary_search(j).is_err())
                .collect();
            for_each_subset(&rest, size, &mut |sub| {
                *acc.entry(sub.to_vec()).or_insert(0.0) += self.weights[s] / norm;
            });
        }
        let mut out: Vec<(Face, f64)> = acc
            .into_iter()
            .map(|(k, w)| (self.face_of(&k), w))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    /// Local walk P_τ, requires codim(τ) ≥ 2.
    pub fn local_walk(&self, tau: &Face) -> Result<LocalWalk> {
        let k = self.codim(tau);
        if k < 2 {
            return Err(ComplexError::Codim {
                face: tau.to_string(),
                codim: k,
                need: ">= 2".into(),
            });
        }
        let (idx, cont) = self.checked(tau)?;
        Ok(self.walk_from(tau.clone(), &idx, &cont))
    }

    pub(crate) fn walk_from(&self, face: Face, idx: &[usize], cont: &[usize]) -> LocalWalk {
        let k = (self.dim + 1) as usize - idx.len();
        let st = self.stats(idx, cont);
        let n = self.ground.len();
        let support: Vec<usize> = (0..n).filter(|&x| st.single[x] > 0.0).collect();
        let mut p = DMatrix::zeros(n, n);
        let mut pi = DVector::zeros(n);
        for &x in &support {
            pi[x] = st.single[x] / (k as f64 * st.z);
            for &y in &support {
                if x != y {
                    p[(x, y)] = st.joint[(x, y)] / ((k - 1) as f64 * st.single[x]);
                }
            }
        }
        LocalWalk {
            face,
            codim: k,
            support,
            p,
            pi,
        }
    }

    /// Down-up walk on facets (indexed like [`WeightedComplex::facet`]).
    pub fn down_up_walk(&self) -> DMatrix<f64> {
        let f = self.facets.len();
        if self.dim < 0 {
            return DMatrix::identity(f, f);
        }
        let mut by_ridge: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (s, fac) in self.facets.iter().enumerate() {
            for j in 0..fac.len() {
                let mut r = fac.clone();
                r.remove(j);
                by_ridge.entry(r).or_default().push(s);
            }
        }
        let scale = 1.0 / (self.dim + 1) as f64;
        let mut p = DMatrix::zeros(f, f);
        for (s, fac) in self.facets.iter().enumerate() {
            for j in 0..fac.len() {
                let mut r = fac.clone();
                r.remove(j);
                let ext = &by_ridge[&r];
                let z: f64 = ext.iter().map(|&t| self.weights[t]).sum();
                for &t in ext {
                    p[(s, t)] += scale * self.weights[t] / z;
                }
            }
        }
        p
    }

    /// Link X_τ with renormalized weights.
    pub fn link(&self, tau: &Face) -> Result<WeightedComplex> {
        let (idx, cont) = self.checked(tau)?;
        let facets = cont
            .iter()
            .map(|&s| {
                let rest: Vec<Pair> = self.facets[s]
                    .iter()
                    .filter(|j| idx.binary_search(j).is_err())
                    .map(|&j| self.ground[j])
                    .collect();
                (rest, self.weights[s])
            })
            .collect();
        WeightedComplex::from_facets(facets)
    }

    /// Product complex; factors must use disjoint element ids.
    pub fn product(xs: &[WeightedComplex]) -> Result<WeightedComplex> {
        match xs.len() {
            0 => return Err(ComplexError::Empty),
            1 => return Ok(xs[0].clone()),
            _ => {}
        }
        let mut owner: HashMap<usize, usize> = HashMap::new();
        for (i, x) in xs.iter().enumerate() {
            for p in &x.ground {
                if let Some(&j) = owner.get(&p.element) {
                    if j != i {
                        return Err(ComplexError::Overlap(p.element));
                    }
                }
                owner.insert(p.element, i);
            }
        }
        let mut facets: Vec<(Vec<Pair>, f64)> = vec![(Vec::new(), 1.0)];
        for x in xs {
            let mut next = Vec::with_capacity(facets.len() * x.facets.len());
            for (f, w) in &facets {
                for s in 0..x.facets.len() {
                    let mut g = f.clone();
                    g.extend(x.facets[s].iter().map(|&j| x.ground[j]));
                    next.push((g, w * x.weights[s]));
                }
            }
            facets = next;
        }
        let mut z = WeightedComplex::from_facets(facets)?;
        let factors = xs
            .iter()
            .map(|x| Factor {
                complex: x.clone(),
                map: x.ground.iter().map(|p| z.index[p]).collect(),
            })
            .collect();
        z.structure = Structure::Product(factors);
        Ok(z)
    }

    /// Product decomposition of the link of τ (a single component when the
    /// link has no known product structure).
    pub fn link_components(&self, tau: &Face) -> Result<Vec<Component>> {
        let (idx, cont) = self.checked(tau)?;
        let support = support_of(self, &idx, &cont);
        Ok(self.components_with_support(tau, &support))
    }

    pub(crate) fn components_with_support(&self, tau: &Face, support: &[usize]) -> Vec<Component> {
        match &self.structure {
            Structure::Plain => {
                vec![Component {
                    ground: support.to_vec(),
                    dim: self.dim - tau.dim() - 1,
                }]
            }
            Structure::Coloring { instance, offset } => {
                let n = instance.element_count();
                let mut active = vec![true; n];
                for p in tau.pairs() {
                    active[p.element - offset] = false;
                }
                instance
                    .conflict_graph()
                    .components_within(&active)
                    .into_iter()
                    .map(|comp| Component {
                        ground: support
                            .iter()
                            .copied()
                            .filter(|&j| {
                                comp.binary_search(&(self.ground[j].element - offset))
                                    .is_ok()
                            })
                            .collect(),
                        dim: comp.len() as isize - 1,
                    })
                    .collect()
            }
            Structure::Product(fs) => {
                let mut out = Vec::new();
                for f in fs {
                    let sub = Face::new(
                        tau.pairs()
                            .iter()
                            .copied()
                            .filter(|p| f.complex.index.contains_key(p)),
                    );
                    if f.complex.dim - sub.dim() < 1 {
                        continue;
                    }
                    let fsup: Vec<usize> = support
                        .iter()
                        .filter_map(|&j| f.complex.index.get(&self.ground[j]).copied())
                        .collect();
                    for c in f.complex.components_with_support(&sub, &fsup) {
                        let mut ground: Vec<usize> = c.ground.iter().map(|&j| f.map[j]).collect();
                        ground.sort_unstable();
                        out.push(Component { ground, dim: c.dim });
                    }
                }
                out
            }
        }
    }

    /// f_×: sum over link components of dimension ≥ 1 of the matrix of
    /// τ ∪ η_{−i}, checked to be the same for every link facet η.
    pub fn block_diag_f_times(
        &self,
        tau: &Face,
        family: &dyn Fn(&Face) -> Option<DMatrix<f64>>,
    ) -> Result<DMatrix<f64>> {
        let (idx, cont) = self.checked(tau)?;
        let support = support_of(self, &idx, &cont);
        let comps = self.components_with_support(tau, &support);
        let n = self.ground.len();
        let mut out = DMatrix::zeros(n, n);
        for comp in comps.iter().filter(|c| c.dim >= 1) {
            let mut first: Option<DMatrix<f64>> = None;
            for &s in &cont {
                let others = self.facets[s]
                    .iter()
                    .copied()
                    .filter(|j| comp.ground.binary_search(j).is_err())
                    .map(|j| self.ground[j]);
                let face = Face::new(others);
                let m = family(&face).ok_or_else(|| ComplexError::Missing(face.to_string()))?;
                match &first {
                    None => first = Some(m),
                    Some(f0) => {
                        let diff = (f0 - &m).amax();
                        if diff > 1e-10 * f0.amax().max(1.0) {
                            return Err(ComplexError::Dependent {
                                face: face.to_string(),
                            });
                        }
                    }
                }
            }
            if let Some(m) = first {
                out += m;
            }
        }
        Ok(out)
    }
}

pub(crate) fn support_of(x: &WeightedComplex, tau: &[usize], cont: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; x.ground.len()];
    for &s in cont {
        for &j in &x.facets[s] {
            seen[j] = true;
        }
    }
    for &j in tau {
        seen[j] = false;
    }
    (0..seen.len()).filter(|&j| seen[j]).collect()
}

/// Exact complex of all proper list colorings, uniform weights.
pub fn build_complex(inst: &ListColoringInstance, facet_limit: usize) -> Result<WeightedComplex> {
    let n = inst.element_count();
    let conflict = inst.conflict_graph();
    let mut current = vec![0u32; n];
    let mut found: Vec<Vec<u32>> = Vec::new();
    fn rec(
        x: usize,
        inst: &ListColoringInstance,
        conflict: &crate::graphs::Graph,
        cur: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
        limit: usize,
    ) -> Result<()> {
        if x == cur.len() {
            if out.len() >= limit {
                return Err(ComplexError::FacetLimit { limit });
            }
            out.push(cur.clone());
            return Ok(());
        }
        for &c in inst.list(x) {
            if conflict.neighbors(x).iter().any(|&y| y < x && cur[y] == c) {
                continue;
            }
            cur[x] = c;
            rec(x + 1, inst, conflict, cur, out, limit)?;
        }
        cur[x] = 0;
        Ok(())
    }
    rec(0, inst, conflict, &mut current, &mut found, facet_limit)?;
    if found.is_empty() {
        return Err(ComplexError::Empty);
    }
    let w = 1.0 / found.len() as f64;
    let facets = found
        .into_iter()
        .map(|col| {
            (
                col.into_iter()
                    .enumerate()
                    .map(|(e, c)| Pair::new(e, c))
                    .collect(),
                w,
            )
        })
        .collect();
    let mut x = WeightedComplex::from_facets(facets)?;
    x.structure = Structure::Coloring {
        instance: Arc::new(inst.clone()),
        offset: 0,
    };
    Ok(x)
}

/// All faces of a complex with the facets containing each.
#[derive(Debug, Clone)]
pub struct Lattice {
    faces: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    containing: Vec<Vec<u32>>,
}

impl Lattice {
    /// Enumerates every face; fails when there are more than `face_limit`.
    pub fn build(x: &WeightedComplex, face_limit: usize) -> Result<Self> {
        let mut faces: Vec<Vec<usize>> = Vec::new();
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut containing: Vec<Vec<u32>> = Vec::new();
        for (s, fac) in x.facets.iter().enumerate() {
            let m = fac.len();
            for mask in 0u64..(1u64 << m) {
                let sub: Vec<usize> = (0..m)
                    .filter(|b| mask >> b & 1 == 1)
                    .map(|b| fac[b])
                    .collect();
                let id = match index.get(&sub) {
                    Some(&id) => id,
                    None => {
                        if faces.len() >= face_limit {
                            return Err(ComplexError::FacetLimit { limit: face_limit });
                        }
                        let id = faces.len();
                        index.insert(sub.clone(), id);
                        faces.push(sub);
                        containing.push(Vec::new());
                        id
                    }
                };
                containing[id].push(s as u32);
            }
        }
        Ok(Lattice {
            faces,
            index,
            containing,
        })
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn face(&self, id: usize) -> &[usize] {
        &self.faces[id]
    }

    pub fn id(&self, idx: &[usize]) -> Option<usize> {
        self.index.get(idx).copied()
    }

    pub fn containing(&self, id: usize) -> Vec<usize> {
        self.containing[id].iter().map(|&s| s as usize).collect()
    }

    /// Id of τ ∪ {x}.
    pub fn child(&self, id: usize, x: usize) -> Option<usize> {
        let mut v = self.faces[id].clone();
        match v.binary_search(&x) {
            Ok(_) => None,
            Err(i) => {
                v.insert(i, x);
                self.id(&v)
            }
        }
    }

    /// Ids of faces with the given codimension, in a deterministic order.
    pub fn with_codim(&self, x: &WeightedComplex, k: usize) -> Vec<usize> {
        let size = (x.dim + 1) as usize;
        let mut ids: Vec<usize> = (0..self.faces.len())
            .filter(|&i| self.faces[i].len() + k == size)
            .collect();
        ids.sort_by(|&a, &b| self.faces[a].cmp(&self.faces[b]));
        ids
    }
}

/// Max-entry errors of the two Garland identities at τ (codim ≥ 3):
/// ΠP = E_x Π_x P_x and ΠP² = E_x π_x π_xᵀ.
pub fn garland_residuals(x: &WeightedComplex, tau: &Face) -> Result<(f64, f64)> {
    let walk = x.local_walk(tau)?;
    if walk.codim < 3 {
        return Err(ComplexError::Codim {
            face: tau.to_string(),
            codim: walk.codim as isize,
            need: ">= 3".into(),
        });
    }
    let pi = walk.pi_matrix();
    let pp = &pi * &walk.p;
    let pp2 = &pp * &walk.p;
    let n = x.ground.len();
    let mut e1 = DMatrix::zeros(n, n);
    let mut e2 = DMatrix::zeros(n, n);
    for &v in &walk.support {
        let child = x.local_walk(&tau.with(x.ground[v]))?;
        e1 += walk.pi[v] * (child.pi_matrix() * &child.p);
        e2 += walk.pi[v] * (&child.pi * child.pi.transpose());
    }
    Ok(((pp - e1).amax(), (pp2 - e2).amax()))
}

/// Max-entry error of the product decomposition of the walk at ∅ of a
/// product complex: P_Z − ((d_Z+1)/d_Z)·1π_Zᵀ against the block diagonal of
/// rescaled factor walks.
pub fn product_decomposition_residual(z: &WeightedComplex) -> Result<f64> {
    let Structure::Product(fs) = &z.structure else {
        return Err(ComplexError::NotProduct(String::new()));
    };
    let walk = z.local_walk(&Face::empty())?;
    let dz = z.dim as f64;
    let n = z.ground.len();
    let ones = DVector::from_element(n, 1.0);
    let lhs = &walk.p - ((dz + 1.0) / dz) * &ones * walk.pi.transpose();
    let mut rhs = DMatrix::zeros(n, n);
    for f in fs {
        let dx = f.complex.dim as f64;
        let m = f.complex.ground.len();
        let (px, pix) = if f.complex.dim >= 1 {
            let w = f.complex.local_walk(&Face::empty())?;
            (w.p, w.pi)
        } else {
            let marg = f.complex.marginal(&Face::empty(), 0)?;
            let mut pi = DVector::zeros(m);
            for (face, w) in marg {
                pi[f.complex.index[&face.pairs()[0]]] = w;
            }
            (DMatrix::zeros(m, m), pi)
        };
        for a in 0..m {
            for b in 0..m {
                rhs[(f.map[a], f.map[b])] = (dx / dz) * px[(a, b)] - ((dx + 1.0) / dz) * pix[b];
            }
        }
    }
    Ok((lhs - rhs).amax())
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn for_each_subset(items: &[usize], size: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(
        items: &[usize],
        start: usize,
        size: usize,
        cur: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if cur.len() == size {
            f(cur);
            return;
        }
        for i in start..items.len() {
            if items.len() - i < size - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, i + 1, size, cur, f);
            cur.pop();
        }
    }
    rec(items, 0, size, &mut Vec::with_capacity(size), f);
}
