//! Circle product, quantum belief propagation on trees and sliding-window BP on chains.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::GraphModel;
use crate::operator::{DenseOperator, SiteId};

/// Errors below this trace-norm floor are treated as exact when fitting slopes.
pub const NOISE_FLOOR: f64 = 1e-10;

/// `exp(L) / Tr exp(L)` for Hermitian `L`, together with `ln Tr exp(L)`.
pub fn exp_normalized(log_op: &DenseOperator) -> Result<(DenseOperator, f64)> {
    let eig = log_op.hermitian_eig()?;
    let shift = eig.max();
    let sum: f64 = eig.values.iter().map(|&l| (l - shift).exp()).sum();
    let state = eig.map(|l| (l - shift).exp() / sum);
    Ok((state, shift + sum.ln()))
}

/// `A ⊙ B = exp(log A + log B)`, both operators first embedded on the union of their supports.
pub fn circle_product(a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    let full = a.layout().union(b.layout())?;
    let log_sum = &a.embed(&full)?.log_pd()? + &b.embed(&full)?.log_pd()?;
    log_sum.exp_h()
}

/// A positive, unit-trace operator on an ordered window of vertices.
#[derive(Clone, Debug)]
pub struct WindowMessage {
    pub op: DenseOperator,
    pub window: Vec<SiteId>,
    /// Accumulated log of every normalization constant divided out so far.
    pub log_norm: f64,
}

impl WindowMessage {
    pub fn new(op: DenseOperator, log_norm: f64) -> Self {
        let window = op.layout().sites().to_vec();
        Self {
            op,
            window,
            log_norm,
        }
    }
}

/// `m_{u→v} ∝ Tr_u[e^{−βh_{uv}} ⊙ (⊙ incoming)]`, normalized to unit trace.
/// Every incoming message must be supported on `[u]`.
pub fn message_update(
    model: &GraphModel,
    u: SiteId,
    v: SiteId,
    incoming: &[WindowMessage],
) -> Result<WindowMessage> {
    let term = model.term(u, v)?;
    let layout = term.layout().clone();
    let mut log_sum = term.scale(-model.beta());
    let mut log_norm = 0.0;
    for m in incoming {
        if m.window != [u] {
            return Err(Error::MessageSupport(format!(
                "message into {u} for edge ({u}, {v}) is supported on {:?}",
                m.window
            )));
        }
        log_sum = &log_sum + &m.op.log_pd()?.embed(&layout)?;
        log_norm += m.log_norm;
    }
    let (joint, ln_z) = exp_normalized(&log_sum)?;
    Ok(WindowMessage::new(
        joint.partial_trace(&[u])?,
        log_norm + ln_z,
    ))
}

/// Synchronous BP rounds `t = 0..T` with `T` the eccentricity of `target`,
/// followed by the belief `normalize(⊙ incoming messages)`.
pub fn run_exact_bp(model: &GraphModel, target: SiteId) -> Result<DenseOperator> {
    let tree = model.tree();
    let rounds = tree.eccentricity(target)?;
    let directed: Vec<(SiteId, SiteId)> = tree
        .edges()
        .iter()
        .flat_map(|&(a, b)| [(a, b), (b, a)])
        .collect();
    let mut messages: BTreeMap<(SiteId, SiteId), WindowMessage> = BTreeMap::new();
    for _ in 0..=rounds {
        let mut next = BTreeMap::new();
        for &(u, v) in &directed {
            let incoming: Vec<WindowMessage> = tree
                .neighbors(u)?
                .iter()
                .filter(|&&w| w != v)
                .filter_map(|&w| messages.get(&(w, u)).cloned())
                .collect();
            next.insert((u, v), message_update(model, u, v, &incoming)?);
        }
        messages = next;
    }
    let mut log_sum = DenseOperator::zeros(model.layout().subset(&[target])?);
    for &w in tree.neighbors(target)? {
        log_sum = &log_sum + &messages[&(w, target)].op.log_pd()?;
    }
    Ok(exp_normalized(&log_sum)?.0)
}

/// Chain vertices ordered so that `target` comes last.
fn chain_towards(model: &GraphModel, target: SiteId) -> Result<Vec<SiteId>> {
    let mut order = model
        .tree()
        .chain_order()
        .ok_or_else(|| Error::InvalidGraph("sliding-window BP needs a chain".into()))?;
    if order.first() == Some(&target) {
        order.reverse();
    }
    if order.last() != Some(&target) {
        return Err(Error::InvalidArgument(format!(
            "target {target} is not an endpoint of the chain"
        )));
    }
    Ok(order)
}

/// Sliding-window BP towards the chain endpoint `target` with window size `ell`.
pub fn run_sliding_window(model: &GraphModel, target: SiteId, ell: usize) -> Result<DenseOperator> {
    let order = chain_towards(model, target)?;
    let n = order.len();
    if ell < 1 || ell > n - 1 {
        return Err(Error::InvalidArgument(format!(
            "window size {ell} outside 1..={}",
            n - 1
        )));
    }
    let beta = model.beta();
    let edge = |k: usize| model.term(order[k - 1], order[k]);

    let window = model.layout().subset(&order[..=ell])?;
    let mut log_window = DenseOperator::zeros(window.clone());
    for k in 1..=ell {
        log_window = &log_window - &edge(k)?.scale(beta).embed(&window)?;
    }
    let (mut m, _) = exp_normalized(&log_window)?;
    for k in ell + 1..n {
        m = m.partial_trace(&[order[k - ell - 1]])?;
        let h = edge(k)?;
        let full = m.layout().union(h.layout())?;
        let log_sum = &m.embed(&full)?.log_pd()? - &h.scale(beta).embed(&full)?;
        m = exp_normalized(&log_sum)?.0;
    }
    let (out, _) = m.reduce_to(&[target])?.normalized()?;
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowSweep {
    /// `(ℓ, ‖b(ℓ) − ρ_target‖₁)` in input order.
    pub errors: Vec<(usize, f64)>,
    /// Least-squares slope of `log10(error)` vs `ℓ` over errors above the noise
    /// floor; `None` with fewer than two such points.
    pub slope: Option<f64>,
}

pub fn window_error_sweep(
    model: &GraphModel,
    target: SiteId,
    ells: &[usize],
) -> Result<WindowSweep> {
    let oracle = model.exact_reduced_density(&[target])?;
    let errors = ells
        .iter()
        .map(|&ell| {
            Ok((
                ell,
                (&run_sliding_window(model, target, ell)? - &oracle).trace_norm(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = errors
        .iter()
        .filter(|&&(_, e)| e > NOISE_FLOOR)
        .map(|&(l, e)| (l as f64, e.log10()))
        .collect();
    Ok(WindowSweep {
        slope: least_squares_slope(&points),
        errors,
    })
}

/// Ordinary least-squares slope; `None` for fewer than two distinct abscissae.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}
