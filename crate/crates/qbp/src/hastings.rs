//! Hastings' belief-propagation operator: the filter `f_β`, the filtered
//! perturbation `Φ`, the s-ordered operator `O` and its ball truncation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphModel;
use crate::operator::{DenseOperator, SiteId};
use crate::quad::tanh_sinh_with_distance;

pub const DEFAULT_S_STEPS: usize = 64;

/// Discretization parameters for the Hastings construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub beta: f64,
    pub s_steps: usize,
    /// Upper end of time-domain cross-check integrals.
    pub t_max: f64,
    /// Relative tolerance handed to the time-domain quadrature.
    pub quad_tol: f64,
}

impl FilterSpec {
    pub fn new(beta: f64, s_steps: usize) -> Result<Self> {
        Self {
            beta,
            s_steps,
            t_max: 50.0 * beta,
            quad_tol: 1e-12,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if self.s_steps == 0 {
            return Err(Error::InvalidArgument("s_steps must be at least 1".into()));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        Ok(self)
    }
}

/// Frequency profile `tanh(βω/2) / (βω/2)`.
pub fn filter_hat(omega: f64, beta: f64) -> f64 {
    let bw = beta * omega;
    if bw.abs() < 1e-8 {
        return 1.0 - bw * bw / 12.0;
    }
    let x = 0.5 * bw;
    x.tanh() / x
}

/// `ln coth x` for `x > 0`, accurate at both ends.
fn ln_coth(x: f64) -> f64 {
    let q = (-2.0 * x).exp();
    q.ln_1p() - (-(-2.0 * x).exp_m1()).ln()
}

/// Time-domain filter `(2/(βπ)) ln coth(π|t|/(2β))`.
pub fn filter_time(t: f64, beta: f64) -> Result<f64> {
    if t == 0.0 {
        return Err(Error::Domain(
            "filter_time has an integrable singularity at t = 0".into(),
        ));
    }
    Ok(2.0 / (beta * PI) * ln_coth(PI * t.abs() / (2.0 * beta)))
}

/// `∫_{−∞}^{∞} |f_β(t)| dt` by quadrature on `(0, 50β]` plus the analytic tail.
pub fn filter_l1_norm(beta: f64) -> f64 {
    let spec = FilterSpec {
        beta,
        s_steps: 1,
        t_max: 50.0 * beta,
        quad_tol: 1e-14,
    };
    2.0 * half_line_moment(&spec, 0)
}

/// `∫_0^∞ t^p f_β(t) dt` for `p ∈ {0, 1}`: quadrature on `(0, t_max]`
/// plus the tail from `ln coth x ≈ 2e^{−2x}`.
pub fn half_line_moment(spec: &FilterSpec, p: i32) -> f64 {
    let beta = spec.beta;
    let scale = PI / (2.0 * beta);
    let body = tanh_sinh_with_distance(
        |_, t, _| t.powi(p) * 2.0 / (beta * PI) * ln_coth(scale * t),
        0.0,
        spec.t_max,
        spec.quad_tol,
    );
    // ∫_T^∞ t^p (2/(βπ)) 2 e^{−2·scale·t} dt
    let r = 2.0 * scale;
    let tail_shape = match p {
        0 => (-r * spec.t_max).exp() / r,
        _ => (-r * spec.t_max).exp() * (spec.t_max / r + 1.0 / (r * r)),
    };
    body + 4.0 / (beta * PI) * tail_shape
}

fn require_pair(h: &DenseOperator, v: &DenseOperator) -> Result<()> {
    if h.layout() != v.layout() {
        return Err(Error::DimensionMismatch(format!(
            "H lives on {:?} but V on {:?}",
            h.layout().sites(),
            v.layout().sites()
        )));
    }
    Ok(())
}

/// `Φ_β^H(V) = ∫ dt f_β(t) e^{−iHt} V e^{iHt}`, evaluated in the eigenbasis of
/// `H` as `Ṽ_{jk} · filter_hat(E_j − E_k)`.
pub fn phi(h: &DenseOperator, v: &DenseOperator, beta: f64) -> Result<DenseOperator> {
    require_pair(h, v)?;
    let eig = h.hermitian_eig()?;
    let u = &eig.vectors;
    let mut vt = u.adjoint() * v.matrix() * u;
    let n = eig.values.len();
    for j in 0..n {
        for k in 0..n {
            vt[(j, k)] *= filter_hat(eig.values[j] - eig.values[k], beta);
        }
    }
    let m = u * vt * u.adjoint();
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    DenseOperator::new(h.layout().clone(), m)
}

/// Midpoint-rule ordered product `Π_{k=n..1} exp(−(β/2n) Φ^{H+s_k V}(V))`
/// with `s_k = (k − ½)/n`; later `s` multiplies from the left.
pub fn hastings_operator(
    h: &DenseOperator,
    v: &DenseOperator,
    beta: f64,
    s_steps: usize,
) -> Result<DenseOperator> {
    require_pair(h, v)?;
    if s_steps == 0 {
        return Err(Error::InvalidArgument("s_steps must be at least 1".into()));
    }
    let n = s_steps as f64;
    let mut o = DenseOperator::identity(h.layout().clone());
    for k in 1..=s_steps {
        let s = (k as f64 - 0.5) / n;
        let hs = h + &v.scale(s);
        let step = phi(&hs, v, beta)?.scale(-beta / (2.0 * n)).exp_h()?;
        o = &step * &o;
    }
    Ok(o)
}

/// Hastings operator for perturbation `V = Σ_{e ∈ v_edges} h_e` on top of the
/// remaining model Hamiltonian, with the base Hamiltonian cut down to the edges
/// lying inside the radius-`ell` ball around `supp(V)`. Embedded on the full layout.
pub fn truncated_hastings(
    model: &GraphModel,
    v_edges: &[usize],
    ell: usize,
    s_steps: usize,
) -> Result<DenseOperator> {
    let full = model.full_layout()?;
    let support = perturbation_support(model, v_edges)?;
    let ball = model.tree().ball(&support, ell)?;
    let ball_layout = model.layout().subset(&ball)?;
    let base: Vec<usize> = (0..model.edges().len())
        .filter(|i| !v_edges.contains(i))
        .filter(|&i| {
            let (a, b) = model.edges()[i];
            ball.contains(&a) && ball.contains(&b)
        })
        .collect();
    let h = model.hamiltonian_on(&base, &ball_layout)?;
    let v = model.hamiltonian_on(v_edges, &ball_layout)?;
    hastings_operator(&h, &v, model.beta(), s_steps)?.embed(&full)
}

/// Untruncated Hastings operator for `V = Σ_{e ∈ v_edges} h_e` over `H − V`.
pub fn model_hastings(
    model: &GraphModel,
    v_edges: &[usize],
    s_steps: usize,
) -> Result<DenseOperator> {
    perturbation_support(model, v_edges)?;
    let base: Vec<usize> = (0..model.edges().len())
        .filter(|i| !v_edges.contains(i))
        .collect();
    let h = model.hamiltonian_of(&base)?;
    let v = model.hamiltonian_of(v_edges)?;
    hastings_operator(&h, &v, model.beta(), s_steps)
}

fn perturbation_support(model: &GraphModel, v_edges: &[usize]) -> Result<Vec<SiteId>> {
    if v_edges.is_empty() {
        return Err(Error::InvalidArgument("perturbation has no edges".into()));
    }
    let mut support = Vec::new();
    for &i in v_edges {
        let &(a, b) = model
            .edges()
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("edge index {i} out of range")))?;
        support.extend([a, b]);
    }
    support.sort_unstable();
    support.dedup();
    Ok(support)
}

/// `‖O e^{−βH} O† − e^{−β(H+V)}‖₁ / ‖e^{−β(H+V)}‖₁`.
pub fn conjugation_residual(
    h: &DenseOperator,
    v: &DenseOperator,
    beta: f64,
    o: &DenseOperator,
) -> Result<f64> {
    require_pair(h, v)?;
    if o.layout() != h.layout() {
        return Err(Error::DimensionMismatch(
            "O and H live on different layouts".into(),
        ));
    }
    let hv = h + v;
    // A common shift cancels in the ratio and keeps both exponentials bounded.
    let shift = beta * hv.hermitian_eig()?.min();
    let target = hv.map_spectrum(|e| (-beta * e + shift).exp())?;
    let base = h.map_spectrum(|e| (-beta * e + shift).exp())?;
    let conj = &(o * &base) * &o.adjoint();
    Ok((&conj - &target).trace_norm() / target.trace_norm())
}

/// Entrywise time-domain evaluation of `Φ` in `H`'s eigenbasis:
/// `Φ_{jk} = Ṽ_{jk} · 2∫_0^∞ f_β(t) cos((E_j − E_k)t) dt`, used to cross-check [`phi`].
pub fn phi_time_domain(
    h: &DenseOperator,
    v: &DenseOperator,
    spec: &FilterSpec,
) -> Result<DenseOperator> {
    require_pair(h, v)?;
    let spec = spec.validated()?;
    let eig = h.hermitian_eig()?;
    let u = &eig.vectors;
    let mut vt = u.adjoint() * v.matrix() * u;
    let n = eig.values.len();
    let scale = PI / (2.0 * spec.beta);
    let weight = |omega: f64| -> f64 {
        2.0 * tanh_sinh_with_distance(
            |_, t, _| 2.0 / (spec.beta * PI) * ln_coth(scale * t) * (omega * t).cos(),
            0.0,
            spec.t_max,
            spec.quad_tol,
        )
    };
    let mut cache: Vec<(f64, f64)> = Vec::new();
    let mut factors = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let omega = (eig.values[j] - eig.values[k]).abs();
            let w = match cache.iter().find(|(o, _)| (o - omega).abs() < 1e-14) {
                Some(&(_, w)) => w,
                None => {
                    let w = weight(omega);
                    cache.push((omega, w));
                    w
                }
            };
            factors[(j, k)] = w;
        }
    }
    for j in 0..n {
        for k in 0..n {
            vt[(j, k)] *= factors[(j, k)];
        }
    }
    DenseOperator::new(h.layout().clone(), u * vt * u.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeFactory;
    use crate::operator::{Pauli, SiteLayout};
    use crate::random::random_hermitian;

    #[test]
    fn filter_hat_values() {
        assert_eq!(filter_hat(0.0, 1.0), 1.0);
        assert_eq!(filter_hat(0.7, 1.3), filter_hat(-0.7, 1.3));
        let v = filter_hat(100.0, 1.0);
        assert!((v / (2.0 / 100.0) - 1.0).abs() < 0.01);
        // series branch continuous with the direct formula
        let x: f64 = 2e-8;
        let direct = (x / 2.0).tanh() / (x / 2.0);
        assert!((filter_hat(x, 1.0) - direct).abs() < 1e-15);
    }

    #[test]
    fn filter_time_is_positive_and_singular_at_zero() {
        assert!(matches!(filter_time(0.0, 1.0), Err(Error::Domain(_))));
        for &t in &[1e-9, 0.1, 1.0, 10.0, 100.0] {
            let v = filter_time(t, 1.0).unwrap();
            assert!(v > 0.0 && v.is_finite(), "t={t}: {v}");
            assert_eq!(v, filter_time(-t, 1.0).unwrap());
        }
    }

    #[test]
    fn filter_has_unit_l1_norm() {
        for beta in [0.5, 1.0, 2.0] {
            assert!((filter_l1_norm(beta) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn phi_commuting_and_high_temperature() {
        let l = SiteLayout::qubits([0, 1]).unwrap();
        let z0 = Pauli::Z.on(0).embed(&l).unwrap();
        let z1 = Pauli::Z.on(1).embed(&l).unwrap();
        let h = &(&z0 * &z1) + &z0.scale(0.3);
        let v = z1.scale(0.8);
        assert!((&phi(&h, &v, 1.0).unwrap() - &v).max_abs() < 1e-13);

        let h = random_hermitian(1, &l);
        let v = random_hermitian(2, &l);
        assert!((&phi(&h, &v, 1e-9).unwrap() - &v).max_abs() < 1e-9);
    }

    #[test]
    fn phi_matches_time_domain_quadrature() {
        let l = SiteLayout::qubits([0, 1]).unwrap();
        let h = random_hermitian(11, &l);
        let v = random_hermitian(12, &l);
        let spectral = phi(&h, &v, 1.0).unwrap();
        let quad = phi_time_domain(&h, &v, &FilterSpec::new(1.0, 1).unwrap()).unwrap();
        assert!((&spectral - &quad).op_norm() < 1e-3);
    }

    #[test]
    fn phi_contracts_and_stays_hermitian() {
        let l = SiteLayout::qubits([0, 1, 2]).unwrap();
        for seed in 0..10 {
            let h = random_hermitian(100 + seed, &l);
            let v = random_hermitian(200 + seed, &l);
            let p = phi(&h, &v, 1.5).unwrap();
            assert!(p.hermitian_residual() < 1e-13);
            assert!(p.op_norm() <= v.op_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zero_perturbation_gives_identity() {
        let l = SiteLayout::qubits([0, 1]).unwrap();
        let h = random_hermitian(3, &l);
        let o = hastings_operator(&h, &DenseOperator::zeros(l.clone()), 1.0, 8).unwrap();
        assert!((&o - &DenseOperator::identity(l)).max_abs() < 1e-15);
    }

    #[test]
    fn commuting_case_has_closed_form() {
        let l = SiteLayout::qubits([0, 1]).unwrap();
        let z0 = Pauli::Z.on(0).embed(&l).unwrap();
        let z1 = Pauli::Z.on(1).embed(&l).unwrap();
        let h = &z0 * &z1;
        let v = &z1.scale(0.6) + &z0.scale(-0.2);
        let beta = 1.3;
        let o = hastings_operator(&h, &v, beta, 4).unwrap();
        let closed = v.scale(-beta / 2.0).exp_h().unwrap();
        assert!((&o - &closed).max_abs() < 1e-13);
        assert!(conjugation_residual(&h, &v, beta, &closed).unwrap() <= 1e-9);
        let id = DenseOperator::identity(l);
        assert!(conjugation_residual(&h, &v, beta, &id).unwrap() > 0.1);
    }

    #[test]
    fn residual_decreases_with_s_steps() {
        let l = SiteLayout::qubits([0, 1]).unwrap();
        let h = random_hermitian(21, &l);
        let v = random_hermitian(22, &l).scale(0.5);
        let res: Vec<f64> = [16, 32, 64, 128]
            .iter()
            .map(|&s| {
                conjugation_residual(&h, &v, 1.0, &hastings_operator(&h, &v, 1.0, s).unwrap())
                    .unwrap()
            })
            .collect();
        for w in res.windows(2) {
            assert!(w[1] < w[0], "{res:?}");
        }
        assert!(res[3] <= 0.5 * res[2], "{res:?}");
    }

    #[test]
    fn norm_bound_on_o() {
        let l = SiteLayout::qubits([0, 1]).unwrap();
        for seed in 0..10 {
            let h = random_hermitian(300 + seed, &l);
            let v = random_hermitian(400 + seed, &l);
            let o = hastings_operator(&h, &v, 1.0, 16).unwrap();
            assert!(o.op_norm() <= (v.op_norm() / 2.0).exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn truncation_limits() {
        let m = GraphModel::chain(
            4,
            2,
            &EdgeFactory::Tfim {
                j: 1.0,
                hx: 1.0,
                full_boundary: false,
            },
            1.0,
        )
        .unwrap();
        let v_edges = [1];
        let full = model_hastings(&m, &v_edges, 8).unwrap();
        let big = truncated_hastings(&m, &v_edges, 10, 8).unwrap();
        assert!((&full - &big).max_abs() < 1e-14);

        let zero = truncated_hastings(&m, &v_edges, 0, 8).unwrap();
        let v = m.hamiltonian_of(&v_edges).unwrap();
        let closed = v.scale(-0.5).exp_h().unwrap();
        assert!((&zero - &closed).max_abs() < 1e-13);
    }

    #[test]
    fn truncation_error_decreases_with_radius() {
        let m = GraphModel::chain(
            6,
            2,
            &EdgeFactory::Tfim {
                j: 1.0,
                hx: 1.0,
                full_boundary: false,
            },
            1.0,
        )
        .unwrap();
        let v_edges = [2]; // edge (3, 4)
        let full = model_hastings(&m, &v_edges, 16).unwrap();
        let errs: Vec<f64> = (1..=3)
            .map(|ell| (&full - &truncated_hastings(&m, &v_edges, ell, 16).unwrap()).op_norm())
            .collect();
        // The radius-2 ball around {3, 4} already covers the whole chain.
        assert!(
            errs[0] > 1e-3 && errs[1] < 1e-14 && errs[2] < 1e-14,
            "{errs:?}"
        );
    }
}
