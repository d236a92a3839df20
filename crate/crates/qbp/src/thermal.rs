//! Thermal potentials, cumulants away from a region, thermal-boundedness fits
//! and the single-step sliding-window error bound.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bp::exp_normalized;
use crate::error::{Error, Result};
use crate::graph::{GraphModel, Tree};
use crate::operator::{DenseOperator, SiteId};

/// Cumulant norms at or below this value are excluded from decay fits.
pub const FIT_FLOOR: f64 = 1e-12;

/// `V_th` together with the residual of its defining identity.
#[derive(Clone, Debug)]
pub struct ThermalPotential {
    pub anchor: Vec<SiteId>,
    pub op: DenseOperator,
    /// `‖exp(−β(H′_out + V_th)) − Tr_{V′}[e^{−βH′}/Z′]‖₁`.
    pub identity_residual: f64,
}

/// Thermal potential of `H′ = Σ_{e ∈ edges} h_e` effectuated by tracing out `anchor`:
/// `V_th = −(1/β) log Tr_{V′}[e^{−βH′}/Z′] − H′_out`, where `H′_out` collects the
/// edges with both endpoints outside `V′`. Lives on the endpoints of `edges` minus `V′`.
pub fn thermal_potential(
    model: &GraphModel,
    anchor: &[SiteId],
    edges: &[usize],
) -> Result<ThermalPotential> {
    if anchor.is_empty() || edges.is_empty() {
        return Err(Error::InvalidArgument(
            "thermal potential needs a non-empty anchor and edge set".into(),
        ));
    }
    let mut vertices: Vec<SiteId> = Vec::new();
    for &i in edges {
        let &(a, b) = model
            .edges()
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("edge index {i} out of range")))?;
        vertices.extend([a, b]);
    }
    vertices.sort_unstable();
    vertices.dedup();
    for &v in anchor {
        if !vertices.contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "anchor vertex {v} is not an endpoint of the edge set"
            )));
        }
    }
    let layout = model.layout().subset(&vertices)?;
    let beta = model.beta();
    let (state, _) = model.hamiltonian_on(edges, &layout)?.gibbs(beta)?;
    let sigma = state.partial_trace(anchor)?;
    let outside: Vec<usize> = edges
        .iter()
        .copied()
        .filter(|&i| {
            let (a, b) = model.edges()[i];
            !anchor.contains(&a) && !anchor.contains(&b)
        })
        .collect();
    let h_out = model.hamiltonian_on(&outside, sigma.layout())?;
    let op = &sigma.log_pd()?.scale(-1.0 / beta) - &h_out;
    let rebuilt = (&h_out + &op).scale(-beta).exp_h()?;
    let identity_residual = (&rebuilt - &sigma).trace_norm();
    Ok(ThermalPotential {
        anchor: anchor.to_vec(),
        op,
        identity_residual,
    })
}

#[derive(Clone, Debug)]
pub struct CumulantEntry {
    pub j: usize,
    pub op: DenseOperator,
    pub norm: f64,
}

/// Telescoping decomposition `O = Σ_j O^{(j)}` with `O^{(j)}` supported within distance `j` of the anchor.
#[derive(Clone, Debug)]
pub struct CumulantSeries {
    pub anchor: Vec<SiteId>,
    pub entries: Vec<CumulantEntry>,
    /// `‖Σ_j O^{(j)} − O‖` (operator norm).
    pub reconstruction_residual: f64,
}

/// Vertices of `op`'s layout further than `j` from the anchor.
fn far_set(
    op: &DenseOperator,
    dist: &std::collections::BTreeMap<SiteId, usize>,
    j: usize,
) -> Result<Vec<SiteId>> {
    op.layout()
        .sites()
        .iter()
        .map(|&v| dist.get(&v).map(|&d| (v, d)).ok_or(Error::UnknownSite(v)))
        .filter_map(|r| match r {
            Ok((v, d)) if d > j => Some(Ok(v)),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        })
        .collect()
}

/// `O^{(j)} = E_{D_j}(O − Σ_{k<j} O^{(k)})` with `D_j = {v : d(v, V′) > j}`,
/// iterated until `D_j` is empty. Distances come from `tree`.
pub fn cumulants(op: &DenseOperator, tree: &Tree, anchor: &[SiteId]) -> Result<CumulantSeries> {
    let dist = tree.distances_from(anchor)?;
    let mut entries = Vec::new();
    let mut remainder = op.clone();
    let mut j = 1;
    loop {
        let far = far_set(op, &dist, j)?;
        let piece = remainder.conditional_expectation(&far)?;
        remainder = &remainder - &piece;
        let norm = piece.op_norm();
        entries.push(CumulantEntry { j, op: piece, norm });
        if far.is_empty() {
            break;
        }
        j += 1;
    }
    let mut sum = DenseOperator::zeros(op.layout().clone());
    for e in &entries {
        sum = &sum + &e.op;
    }
    let reconstruction_residual = (&sum - op).op_norm();
    Ok(CumulantSeries {
        anchor: anchor.to_vec(),
        entries,
        reconstruction_residual,
    })
}

/// `max_j ‖O^{(j)} − E_{D_j}(O^{(j)})‖`: how far each cumulant leaks beyond distance `j`.
pub fn support_leakage(series: &CumulantSeries, tree: &Tree) -> Result<f64> {
    let dist = tree.distances_from(&series.anchor)?;
    let mut worst: f64 = 0.0;
    for e in &series.entries {
        let far = far_set(&e.op, &dist, e.j)?;
        worst = worst.max((&e.op - &e.op.conditional_expectation(&far)?).max_abs());
    }
    Ok(worst)
}

/// Log-linear fit `‖O^{(j)}‖ ≈ K e^{−k j}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThermalFit {
    /// `None` when fewer than two norms exceed the floor.
    pub k_big: Option<f64>,
    pub k_small: Option<f64>,
    /// Root-mean-square residual of the log fit.
    pub rms_residual: Option<f64>,
    pub used: usize,
    pub floored: usize,
}

impl ThermalFit {
    pub fn is_defined(&self) -> bool {
        self.k_big.is_some()
    }
}

pub fn fit_thermal_bound(series: &CumulantSeries) -> ThermalFit {
    let points: Vec<(f64, f64)> = series
        .entries
        .iter()
        .filter(|e| e.norm > FIT_FLOOR)
        .map(|e| (e.j as f64, e.norm.ln()))
        .collect();
    let floored = series.entries.len() - points.len();
    match crate::bp::least_squares_slope(&points) {
        None => ThermalFit {
            k_big: None,
            k_small: None,
            rms_residual: None,
            used: points.len(),
            floored,
        },
        Some(slope) => {
            let n = points.len() as f64;
            let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
            let my = points.iter().map(|p| p.1).sum::<f64>() / n;
            let intercept = my - slope * mx;
            let rms = (points
                .iter()
                .map(|p| (p.1 - intercept - slope * p.0).powi(2))
                .sum::<f64>()
                / n)
                .sqrt();
            ThermalFit {
                k_big: Some(intercept.exp()),
                k_small: Some(-slope),
                rms_residual: Some(rms),
                used: points.len(),
                floored,
            }
        }
    }
}

/// Thermal-boundedness fit for tracing the leaf `v*` out of the full model.
pub fn leaf_thermal_fit(model: &GraphModel, leaf: SiteId) -> Result<(CumulantSeries, ThermalFit)> {
    if !model.tree().is_leaf(leaf)? {
        return Err(Error::NotALeaf(leaf));
    }
    let all: Vec<usize> = (0..model.edges().len()).collect();
    let potential = thermal_potential(model, &[leaf], &all)?;
    let series = cumulants(&potential.op, model.tree(), &[leaf])?;
    let fit = fit_thermal_bound(&series);
    Ok((series, fit))
}

/// Which exponent `f(β)` the second bound uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayExponent {
    /// `min{a′/2, πa′/(2avβ)}`.
    #[default]
    Derived,
    /// `min{1/2, π/(2βav)}`.
    Literal,
}

/// Truncation constants `(c, α)`, Lieb-Robinson constants `(C, a, v)` and the
/// thermal-boundedness pair `(K, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c: f64,
    pub alpha: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    pub a: f64,
    pub v: f64,
    #[serde(rename = "K")]
    pub k_big: f64,
    #[serde(rename = "k")]
    pub k_small: f64,
    #[serde(default)]
    pub exponent: DecayExponent,
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("c", self.c),
            ("alpha", self.alpha),
            ("C", self.big_c),
            ("a", self.a),
            ("v", self.v),
            ("k", self.k_small),
        ];
        for (name, value) in named {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "constant {name} must be positive, got {value}"
                )));
            }
        }
        // K = 0 is the limit of a Markov model, whose cumulants beyond j = 1 vanish.
        if !(self.k_big >= 0.0 && self.k_big.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "constant K must be non-negative, got {}",
                self.k_big
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RhsTerms {
    pub total: f64,
    pub bound1: f64,
    pub bound2: f64,
    #[serde(rename = "F")]
    pub big_f: f64,
    #[serde(rename = "G")]
    pub big_g: f64,
    pub f: f64,
}

impl RhsTerms {
    /// `max(0, 1/f − G/F)`: beyond this `(ℓF + G)e^{−fℓ}` decreases.
    pub fn turning_point(&self) -> f64 {
        if self.big_f == 0.0 {
            return 0.0;
        }
        (1.0 / self.f - self.big_g / self.big_f).max(0.0)
    }
}

/// Right-hand side of the single-step error bound.
pub fn theorem_rhs(k: &BoundConstants, beta: f64, norm_v: f64, ell: f64) -> Result<RhsTerms> {
    k.validate()?;
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if !(norm_v >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "norm of V must be non-negative, got {norm_v}"
        )));
    }
    if ell < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "ell must be at least 1, got {ell}"
        )));
    }
    let denom = 1.0 + k.c * k.alpha * beta / PI;
    let c_prime = k.c * (2.0 * k.c / denom).exp();
    let bound1 = 2.0
        * c_prime
        * beta
        * norm_v
        * ((4.0 + k.c) * beta * norm_v / 2.0).exp()
        * (-k.c * ell / denom).exp();

    let av = k.a * k.v;
    let l = 2.0 * k.k_big / (1.0 - (-k.k_small).exp());
    let a_prime = k.k_small.min(k.a);
    let m_tilde = 9.0 * l * beta * beta
        + (8.0 * beta / PI) * (2.0 * beta * av / PI).exp()
        + 2.0 * (beta / (PI * av)).sqrt();
    let l1 = 2.0 * l * beta * a_prime / av;
    let l2 = 4.0 * l * beta * beta / (PI * PI);
    let big_f = l1;
    let big_g = m_tilde + l2;
    let f = match k.exponent {
        DecayExponent::Derived => (a_prime / 2.0).min(PI * a_prime / (2.0 * av * beta)),
        DecayExponent::Literal => 0.5f64.min(PI / (2.0 * beta * av)),
    };
    let bound2 =
        beta / 2.0 * (2.0 * beta * norm_v).exp() * (ell * big_f + big_g) * (-f * ell).exp();
    Ok(RhsTerms {
        total: bound1 + bound2,
        bound1,
        bound2,
        big_f,
        big_g,
        f,
    })
}

/// One point of the single-step experiment.
#[derive(Clone, Debug, Serialize)]
pub struct SingleStepRecord {
    pub ell: usize,
    /// Both terms divided by the full partition function.
    pub lhs_literal: f64,
    /// Each term scaled to unit trace.
    pub lhs_normalized: f64,
    pub norm_v: f64,
    pub rhs: RhsTerms,
}

/// Compares `Tr_{v*}[e^{−βH}/Z]` with `e^{−β(H_L+H_B)} ⊙ Tr_{v*}[e^{−βH_R}]` for
/// the regions at radius `ell ≥ 1` around the leaf `v*`.
pub fn single_step_experiment(
    model: &GraphModel,
    leaf: SiteId,
    ell: usize,
    consts: &BoundConstants,
) -> Result<SingleStepRecord> {
    if !model.tree().is_leaf(leaf)? {
        return Err(Error::NotALeaf(leaf));
    }
    if ell < 1 {
        return Err(Error::InvalidArgument(
            "single-step experiment needs ell >= 1".into(),
        ));
    }
    let beta = model.beta();
    let part = model.region_partition(&[leaf], ell)?;
    let (rho, ln_z) = model.hamiltonian()?.gibbs(beta)?;
    let exact = rho.partial_trace(&[leaf])?;
    let reduced = exact.layout().clone();

    // log Tr_{v*} e^{−βH_R} on the vertices of R, then padded with identities.
    let mut r_vertices: Vec<SiteId> = part
        .near
        .iter()
        .flat_map(|&i| [model.edges()[i].0, model.edges()[i].1])
        .collect();
    r_vertices.sort_unstable();
    r_vertices.dedup();
    let r_layout = model.layout().subset(&r_vertices)?;
    let (r_state, ln_z_r) = model.hamiltonian_on(&part.near, &r_layout)?.gibbs(beta)?;
    let r_traced = r_state.partial_trace(&[leaf])?;
    let log_tr =
        &r_traced.log_pd()? + &DenseOperator::identity(r_traced.layout().clone()).scale(ln_z_r);

    let outer: Vec<usize> = part.far.iter().chain(&part.buffer).copied().collect();
    let log_m = &log_tr.embed(&reduced)? - &model.hamiltonian_on(&outer, &reduced)?.scale(beta);
    let (approx, ln_tr_m) = exp_normalized(&log_m)?;

    let lhs_normalized = (&exact - &approx).trace_norm();
    let lhs_literal = (&exact - &approx.scale((ln_tr_m - ln_z).exp())).trace_norm();
    let norm_v = if part.buffer.is_empty() {
        0.0
    } else {
        let mut b_vertices: Vec<SiteId> = part
            .buffer
            .iter()
            .flat_map(|&i| [model.edges()[i].0, model.edges()[i].1])
            .collect();
        b_vertices.sort_unstable();
        b_vertices.dedup();
        model
            .hamiltonian_on(&part.buffer, &model.layout().subset(&b_vertices)?)?
            .op_norm()
    };
    let rhs = theorem_rhs(consts, beta, norm_v, ell as f64)?;
    Ok(SingleStepRecord {
        ell,
        lhs_literal,
        lhs_normalized,
        norm_v,
        rhs,
    })
}

/// `‖e^{iH′t} O e^{−iH′t} − e^{iHt} O e^{−iHt}‖` with `H′ = H + V`.
pub fn localization_defect(
    h: &DenseOperator,
    v: &DenseOperator,
    o: &DenseOperator,
    t: f64,
) -> Result<f64> {
    let evolve = |ham: &DenseOperator| -> Result<DenseOperator> {
        let eig = ham.hermitian_eig()?;
        let u = &eig.vectors;
        let mut ot = u.adjoint() * o.matrix() * u;
        let n = eig.values.len();
        for j in 0..n {
            for k in 0..n {
                ot[(j, k)] *=
                    num_complex::Complex64::from_polar(1.0, (eig.values[j] - eig.values[k]) * t);
            }
        }
        DenseOperator::new(ham.layout().clone(), u * ot * u.adjoint())
    };
    let perturbed = h + v;
    Ok((&evolve(&perturbed)? - &evolve(h)?).op_norm())
}

/// `min{(|t|L + C K e^{av|t|}/(av)) e^{−a′ℓ}, |t|L}` with `L = 2K/(1−e^{−k})`.
pub fn localization_envelope(k: &BoundConstants, t: f64, ell: f64) -> f64 {
    let l = 2.0 * k.k_big / (1.0 - (-k.k_small).exp());
    let av = k.a * k.v;
    let a_prime = k.k_small.min(k.a);
    let t = t.abs();
    ((t * l + k.big_c * k.k_big * (av * t).exp() / av) * (-a_prime * ell).exp()).min(t * l)
}
