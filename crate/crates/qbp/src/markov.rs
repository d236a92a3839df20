//! Entropic diagnostics: entropy, conditional mutual information and Markov checks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{GraphModel, Tree};
use crate::operator::{DenseOperator, SiteId};

/// Negative CMI values at or above `-CMI_CLAMP` are eigensolver noise and reported as 0.
pub const CMI_CLAMP: f64 = 1e-8;

/// Default tolerance for calling a deficiency zero.
pub const MARKOV_TOL: f64 = 1e-8;

/// `−Σ λ log λ` (natural log) with `0 log 0 = 0`.
pub fn von_neumann_entropy(rho: &DenseOperator) -> Result<f64> {
    rho.check_density()?;
    entropy_unchecked(rho)
}

fn entropy_unchecked(rho: &DenseOperator) -> Result<f64> {
    let eig = rho.hermitian_eig()?;
    Ok(eig
        .values
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.ln())
        .sum())
}

/// Disjoint vertex sets `A`, `B`, `C` covering a state's support.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TripartiteSplit {
    pub a: Vec<SiteId>,
    pub b: Vec<SiteId>,
    pub c: Vec<SiteId>,
}

impl TripartiteSplit {
    pub fn new(a: Vec<SiteId>, b: Vec<SiteId>, c: Vec<SiteId>) -> Result<Self> {
        let mut all: Vec<SiteId> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort_unstable();
        for w in all.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidArgument(format!(
                    "site {} appears in more than one part",
                    w[0]
                )));
            }
        }
        Ok(Self { a, b, c })
    }

    fn union(&self, parts: &[&[SiteId]]) -> Vec<SiteId> {
        let mut v: Vec<SiteId> = parts.iter().flat_map(|p| p.iter().copied()).collect();
        v.sort_unstable();
        v
    }
}

/// A conditional mutual information with its unclamped value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cmi {
    pub value: f64,
    pub raw: f64,
}

/// `S(AB) + S(BC) − S(ABC) − S(B)`.
pub fn cmi(rho: &DenseOperator, split: &TripartiteSplit) -> Result<Cmi> {
    let support = split.union(&[&split.a, &split.b, &split.c]);
    if support != rho.layout().sites() {
        return Err(Error::InvalidArgument(format!(
            "split covers {support:?} but the state lives on {:?}",
            rho.layout().sites()
        )));
    }
    rho.check_density()?;
    let s = |parts: &[&[SiteId]]| -> Result<f64> {
        let keep = split.union(parts);
        if keep.is_empty() {
            return Ok(0.0);
        }
        entropy_unchecked(&rho.reduce_to(&keep)?)
    };
    let raw = s(&[&split.a, &split.b])? + s(&[&split.b, &split.c])?
        - s(&[&split.a, &split.b, &split.c])?
        - s(&[&split.b])?;
    let value = if (-CMI_CLAMP..0.0).contains(&raw) {
        0.0
    } else {
        raw
    };
    Ok(Cmi { value, raw })
}

/// One `{U, ell, deficiency}` row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Deficiency {
    #[serde(rename = "U")]
    pub u: Vec<SiteId>,
    pub ell: usize,
    pub deficiency: f64,
    pub raw: f64,
    /// The remainder `C` was empty; the deficiency is 0 by definition.
    pub degenerate: bool,
}

/// `S(U : rest | n_ℓ(U) − U)` for a state living on the tree's vertices.
pub fn state_markov_deficiency(
    rho: &DenseOperator,
    tree: &Tree,
    u: &[SiteId],
    ell: usize,
) -> Result<Deficiency> {
    if u.is_empty() {
        return Err(Error::InvalidArgument("U must be non-empty".into()));
    }
    if u.len() >= tree.vertices().len() {
        return Err(Error::InvalidArgument(
            "U must be a proper subset of the vertices".into(),
        ));
    }
    let mut u_sorted = u.to_vec();
    u_sorted.sort_unstable();
    let ball = tree.ball(&u_sorted, ell)?;
    let b: Vec<SiteId> = ball
        .iter()
        .copied()
        .filter(|v| !u_sorted.contains(v))
        .collect();
    let c: Vec<SiteId> = tree
        .vertices()
        .iter()
        .copied()
        .filter(|v| !ball.contains(v))
        .collect();
    if c.is_empty() {
        return Ok(Deficiency {
            u: u_sorted,
            ell,
            deficiency: 0.0,
            raw: 0.0,
            degenerate: true,
        });
    }
    let split = TripartiteSplit::new(u_sorted.clone(), b, c)?;
    let value = cmi(rho, &split)?;
    Ok(Deficiency {
        u: u_sorted,
        ell,
        deficiency: value.value,
        raw: value.raw,
        degenerate: false,
    })
}

/// ℓ-Markov deficiency of the model's thermal state; `ℓ = 1` is the plain Markov property.
pub fn markov_deficiency(model: &GraphModel, u: &[SiteId], ell: usize) -> Result<Deficiency> {
    state_markov_deficiency(&model.thermal_state()?, model.tree(), u, ell)
}

/// Deficiencies at `ℓ` for every connected `U` with `|U| ≤ max_size` that is a
/// proper subset of the vertices.
pub fn all_deficiencies(
    rho: &DenseOperator,
    tree: &Tree,
    ell: usize,
    max_size: usize,
) -> Result<Vec<Deficiency>> {
    tree.small_connected_subsets(max_size)
        .into_iter()
        .filter(|u| u.len() < tree.vertices().len())
        .map(|u| state_markov_deficiency(rho, tree, &u, ell))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafTraceStatus {
    /// Input and traced state are both Markov within tolerance.
    Preserved,
    /// Input was Markov but the traced state is not.
    Violated,
    /// Precondition failed: the input state is not Markov.
    InputNotMarkov,
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafTraceReport {
    pub leaf: SiteId,
    pub tol: f64,
    /// Subsets enumerated: connected, at most this many vertices.
    pub max_subset_size: usize,
    pub status: LeafTraceStatus,
    pub before: Vec<Deficiency>,
    pub after: Vec<Deficiency>,
}

/// Traces out `leaf` and checks that Markovianity (`ℓ = 1`) survives on the reduced tree.
pub fn leaf_trace_preserves_markov(
    model: &GraphModel,
    leaf: SiteId,
    tol: f64,
) -> Result<LeafTraceReport> {
    if !model.tree().is_leaf(leaf)? {
        return Err(Error::NotALeaf(leaf));
    }
    let max_subset_size = 2;
    let rho = model.thermal_state()?;
    let before = all_deficiencies(&rho, model.tree(), 1, max_subset_size)?;
    let worst = |rows: &[Deficiency]| rows.iter().map(|d| d.deficiency.abs()).fold(0.0, f64::max);
    if worst(&before) > tol {
        return Ok(LeafTraceReport {
            leaf,
            tol,
            max_subset_size,
            status: LeafTraceStatus::InputNotMarkov,
            before,
            after: Vec::new(),
        });
    }
    let reduced = model.tree().without_leaf(leaf)?;
    let sigma = rho.partial_trace(&[leaf])?;
    let after = all_deficiencies(&sigma, &reduced, 1, max_subset_size)?;
    let status = if worst(&after) <= tol {
        LeafTraceStatus::Preserved
    } else {
        LeafTraceStatus::Violated
    };
    Ok(LeafTraceReport {
        leaf,
        tol,
        max_subset_size,
        status,
        before,
        after,
    })
}
