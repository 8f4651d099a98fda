//! Glauber dynamics for list colorings and exact mixing diagnostics.
//!
//! One Glauber step picks an element uniformly and recolors it uniformly
//! from the colors of its list that no conflicting neighbour uses, which is
//! one step of the down-up walk on the coloring complex.

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{build_complex, ComplexError, Face, WeightedComplex};
use crate::graphs::{ListColoringInstance, PartialColoring};
use crate::spectral::{down_up_gap_bound, lambda2_reversible, local_profile, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("greedy initialization failed at element {element}; try larger lists")]
    GreedyFailed { element: usize },
    #[error("initial coloring is not proper")]
    Improper,
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub type Result<T> = std::result::Result<T, SamplerError>;

/// Current coloring with its RNG stream.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub coloring: Vec<u32>,
    pub steps: u64,
    pub seed: u64,
    rng: ChaCha8Rng,
}

impl ChainState {
    pub fn new(coloring: Vec<u32>, seed: u64) -> Self {
        ChainState {
            coloring,
            steps: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Word position of the RNG stream.
    pub fn stream_position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn as_partial(&self) -> PartialColoring {
        self.coloring
            .iter()
            .enumerate()
            .map(|(e, &c)| (e, c))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub element: usize,
    pub color: u32,
    /// The recolored element kept its color.
    pub unchanged: bool,
    /// Only one color (or none) was available.
    pub frozen: bool,
}

fn candidates(inst: &ListColoringInstance, coloring: &[u32], x: usize) -> Vec<u32> {
    let nb = inst.conflict_graph().neighbors(x);
    inst.list(x)
        .iter()
        .copied()
        .filter(|c| nb.iter().all(|&u| coloring[u] != *c))
        .collect()
}

/// One Glauber step.
pub fn glauber_step(state: &mut ChainState, inst: &ListColoringInstance) -> StepOutcome {
    state.steps += 1;
    let n = inst.element_count();
    if n == 0 {
        return StepOutcome {
            element: 0,
            color: 0,
            unchanged: true,
            frozen: true,
        };
    }
    let x = state.rng.gen_range(0..n);
    let avail = candidates(inst, &state.coloring, x);
    let old = state.coloring[x];
    if avail.is_empty() {
        return StepOutcome {
            element: x,
            color: old,
            unchanged: true,
            frozen: true,
        };
    }
    let c = avail[state.rng.gen_range(0..avail.len())];
    state.coloring[x] = c;
    StepOutcome {
        element: x,
        color: c,
        unchanged: c == old,
        frozen: avail.len() == 1,
    }
}

/// Smallest available color per element in id order.
pub fn greedy_coloring(inst: &ListColoringInstance) -> Result<Vec<u32>> {
    let n = inst.element_count();
    let mut col: Vec<Option<u32>> = vec![None; n];
    for x in 0..n {
        let nb = inst.conflict_graph().neighbors(x);
        let c = inst
            .list(x)
            .iter()
            .copied()
            .find(|c| nb.iter().all(|&u| col[u] != Some(*c)))
            .ok_or(SamplerError::GreedyFailed { element: x })?;
        col[x] = Some(c);
    }
    Ok(col.into_iter().map(|c| c.expect("assigned")).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSummary {
    pub seed: u64,
    pub steps: u64,
    /// Steps that changed the color.
    pub moves: u64,
    pub frozen: u64,
    pub stream_position: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRun {
    pub coloring: BTreeMap<usize, u32>,
    pub summary: TraceSummary,
}

/// Greedy start followed by `steps` Glauber steps.
pub fn run_chain(inst: &ListColoringInstance, steps: u64, seed: u64) -> Result<ChainRun> {
    let mut state = ChainState::new(greedy_coloring(inst)?, seed);
    let (mut moves, mut frozen) = (0, 0);
    for _ in 0..steps {
        let o = glauber_step(&mut state, inst);
        moves += u64::from(!o.unchanged);
        frozen += u64::from(o.frozen);
    }
    Ok(ChainRun {
        coloring: state.as_partial(),
        summary: TraceSummary {
            seed,
            steps,
            moves,
            frozen,
            stream_position: state.stream_position(),
        },
    })
}

/// Independent chains, one per seed.
pub fn run_chains(inst: &ListColoringInstance, steps: u64, seeds: &[u64]) -> Result<Vec<ChainRun>> {
    seeds
        .par_iter()
        .map(|&s| run_chain(inst, steps, s))
        .collect()
}

/// t_mix(1/4) or a sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TMix {
    Steps(u64),
    /// The chain is reducible.
    Unbounded,
    /// Not reached within the horizon.
    BeyondHorizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvPoint {
    pub t: u64,
    pub tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingReport {
    pub facets: usize,
    pub ergodic: bool,
    pub lambda2: f64,
    /// 1 − λ₂ of the down-up walk
    pub exact_gap: f64,
    /// (1/(d+1))·Π(1 − γ_j) from the local spectral profile
    pub gap_lower_bound: f64,
    pub worst_start: Face,
    pub tv_curve: Vec<TvPoint>,
    /// max over starts of d_TV at each t
    pub tv_max_curve: Vec<TvPoint>,
    pub t_mix: TMix,
    /// max |πP − π| for uniform π
    pub stationary_deviation: f64,
}

fn irreducible(p: &DMatrix<f64>) -> bool {
    let n = p.nrows();
    let mut seen = vec![false; n];
    let mut q = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = q.pop_front() {
        for j in 0..n {
            if !seen[j] && p[(i, j)] > 0.0 {
                seen[j] = true;
                q.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn tv_row(m: &DMatrix<f64>, s: usize, pi: &DVector<f64>) -> f64 {
    0.5 * pi
        .iter()
        .enumerate()
        .map(|(j, b)| (m[(s, j)] - b).abs())
        .sum::<f64>()
}

/// Spectral data of the down-up walk on the facets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownUpGap {
    pub facets: usize,
    pub ergodic: bool,
    pub lambda2: f64,
    /// 1 − λ₂; 1 when there is a single facet
    pub exact_gap: f64,
    /// max |πP − π|
    pub stationary_deviation: f64,
}

pub fn down_up_gap(x: &WeightedComplex) -> Result<DownUpGap> {
    let p = x.down_up_walk();
    let pi = DVector::from_vec(x.weights().to_vec());
    let lambda2 = lambda2_reversible(&p, &pi)?;
    Ok(DownUpGap {
        facets: p.nrows(),
        ergodic: irreducible(&p),
        lambda2,
        exact_gap: if lambda2.is_finite() {
            1.0 - lambda2
        } else {
            1.0
        },
        stationary_deviation: (p.transpose() * &pi - &pi).amax(),
    })
}

/// Exact spectral gap and total-variation curve of the Glauber chain.
pub fn exact_mixing(
    inst: &ListColoringInstance,
    facet_limit: usize,
    horizon: u64,
) -> Result<MixingReport> {
    let x = build_complex(inst, facet_limit)?;
    let DownUpGap {
        facets: n,
        ergodic,
        lambda2,
        exact_gap,
        stationary_deviation,
    } = down_up_gap(&x)?;
    let gap_lower_bound = down_up_gap_bound(&local_profile(&x)?);
    let p = x.down_up_walk();
    let pi = DVector::from_vec(x.weights().to_vec());

    let mut powers = vec![DMatrix::identity(n, n)];
    for _ in 0..horizon {
        let next = powers.last().expect("nonempty") * &p;
        powers.push(next);
    }
    let last = powers.last().expect("nonempty");
    let worst = (0..n)
        .map(|s| (s, tv_row(last, s, &pi)))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
        .0;
    let tv_curve: Vec<TvPoint> = powers
        .iter()
        .enumerate()
        .map(|(t, m)| TvPoint {
            t: t as u64,
            tv: tv_row(m, worst, &pi),
        })
        .collect();
    let tv_max_curve: Vec<TvPoint> = powers
        .iter()
        .enumerate()
        .map(|(t, m)| TvPoint {
            t: t as u64,
            tv: (0..n).map(|s| tv_row(m, s, &pi)).fold(0.0, f64::max),
        })
        .collect();
    let t_mix = if !ergodic {
        TMix::Unbounded
    } else {
        tv_max_curve
            .iter()
            .find(|pt| pt.tv <= 0.25)
            .map_or(TMix::BeyondHorizon, |pt| TMix::Steps(pt.t))
    };
    Ok(MixingReport {
        facets: n,
        ergodic,
        lambda2,
        exact_gap,
        gap_lower_bound,
        worst_start: x.facet(worst),
        tv_curve,
        tv_max_curve,
        t_mix,
        stationary_deviation,
    })
}

/// Facet index of every proper coloring of the complex.
pub fn facet_index(
    inst: &ListColoringInstance,
    facet_limit: usize,
) -> Result<HashMap<Vec<u32>, usize>> {
    let x = build_complex(inst, facet_limit)?;
    Ok((0..x.facet_count())
        .map(|i| {
            (
                x.facet(i)
                    .pairs()
                    .iter()
                    .map(|p| p.color)
                    .collect::<Vec<_>>(),
                i,
            )
        })
        .collect())
}
