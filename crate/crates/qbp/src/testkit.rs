//! Self-checking matrix inequalities. Every check is oriented as `lhs ≤ rhs`
//! and reports the margin `rhs − lhs`.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bp::circle_product;
use crate::error::{Error, Result};
use crate::operator::{DenseOperator, SiteId, SiteLayout};
use crate::random::{
    derive_seed, random_density_with, random_hermitian_with, random_unitary_with, rng,
};

/// Relative slack: a check passes when `margin ≥ −SLACK · max(1, |rhs|)`.
pub const SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        let pass = margin >= -SLACK * rhs.abs().max(1.0);
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            margin,
            pass,
        }
    }
}

pub const GOLDEN_THOMPSON: &str = "golden_thompson";
pub const WEYL: &str = "weyl";
pub const CIRCLE_EIG_LOWER_BOUND: &str = "circle_eig_lower_bound";
pub const COMMUTATOR_POWER: &str = "commutator_power";
pub const TELESCOPING: &str = "telescoping";
pub const EXP_BOUND: &str = "exp_bound";
pub const TRACE_NORM_MONOTONE: &str = "trace_norm_monotone";
pub const CIRCLE_PERTURBATION: &str = "circle_perturbation";

pub const ALL_CHECKS: [&str; 8] = [
    GOLDEN_THOMPSON,
    WEYL,
    CIRCLE_EIG_LOWER_BOUND,
    COMMUTATOR_POWER,
    TELESCOPING,
    EXP_BOUND,
    TRACE_NORM_MONOTONE,
    CIRCLE_PERTURBATION,
];

fn same_layout(a: &DenseOperator, b: &DenseOperator) -> Result<()> {
    if a.layout() != b.layout() {
        return Err(Error::DimensionMismatch(
            "operands live on different layouts".into(),
        ));
    }
    Ok(())
}

/// `Tr e^{A+B} ≤ Tr(e^A e^B)`.
pub fn check_golden_thompson(a: &DenseOperator, b: &DenseOperator) -> Result<CheckResult> {
    same_layout(a, b)?;
    let lhs = (a + b).exp_h()?.trace().re;
    let rhs = (&a.exp_h()? * &b.exp_h()?).trace().re;
    Ok(CheckResult::new(GOLDEN_THOMPSON, lhs, rhs))
}

/// `λ_i(N) + λ_min(R) ≤ λ_i(N+R) ≤ λ_i(N) + λ_max(R)` for every `i`; reports the tightest side.
pub fn check_weyl(n: &DenseOperator, r: &DenseOperator) -> Result<CheckResult> {
    same_layout(n, r)?;
    let ln = n.hermitian_eig()?.values;
    let er = r.hermitian_eig()?;
    let lm = (n + r).hermitian_eig()?.values;
    let mut worst: Option<(f64, f64)> = None;
    for i in 0..ln.len() {
        for (lhs, rhs) in [(ln[i] + er.min(), lm[i]), (lm[i], ln[i] + er.max())] {
            if worst.is_none_or(|(l, r)| rhs - lhs < r - l) {
                worst = Some((lhs, rhs));
            }
        }
    }
    let (lhs, rhs) = worst.expect("non-empty spectrum");
    Ok(CheckResult::new(WEYL, lhs, rhs))
}

/// `λ_min(A)λ_min(B)/λ_max(A) ≤ λ_min((A ⊙ B)/Tr(A ⊙ B))` for non-singular densities.
pub fn check_circle_eig_lower_bound(a: &DenseOperator, b: &DenseOperator) -> Result<CheckResult> {
    same_layout(a, b)?;
    a.check_density()?;
    b.check_density()?;
    let ea = a.hermitian_eig()?;
    let eb = b.hermitian_eig()?;
    let prod = circle_product(a, b)?;
    let z = prod.trace().re;
    let lhs = ea.min() * eb.min() / ea.max();
    let rhs = prod.hermitian_eig()?.min() / z;
    Ok(CheckResult::new(CIRCLE_EIG_LOWER_BOUND, lhs, rhs))
}

/// `‖[A, Bⁿ]‖ ≤ n ‖B‖^{n−1} ‖[A, B]‖`.
pub fn check_commutator_power(a: &DenseOperator, b: &DenseOperator, n: u32) -> Result<CheckResult> {
    same_layout(a, b)?;
    if n == 0 {
        return Err(Error::InvalidArgument("power must be at least 1".into()));
    }
    let lhs = a.commutator(&b.pow(n)).op_norm();
    let rhs = n as f64 * b.op_norm().powi(n as i32 - 1) * a.commutator(b).op_norm();
    Ok(CheckResult::new(COMMUTATOR_POWER, lhs, rhs))
}

fn require_unitary(u: &DenseOperator) -> Result<()> {
    let defect = (&(&u.adjoint() * u) - &DenseOperator::identity(u.layout().clone())).op_norm();
    if defect > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "operator is not unitary (‖U†U − I‖ = {defect:e})"
        )));
    }
    Ok(())
}

/// `‖V^k O V^{†k} − (UV)^k O (V†U†)^k‖ ≤ Σ_{j=1}^{k} ‖V^j O V^{†j} − U V^j O V^{†j} U†‖`.
pub fn check_telescoping(
    u: &DenseOperator,
    v: &DenseOperator,
    o: &DenseOperator,
    k: u32,
) -> Result<CheckResult> {
    same_layout(u, v)?;
    same_layout(u, o)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    require_unitary(u)?;
    require_unitary(v)?;
    let conj = |w: &DenseOperator, x: &DenseOperator| &(w * x) * &w.adjoint();
    let uv = u * v;
    let lhs = (&conj(&v.pow(k), o) - &conj(&uv.pow(k), o)).op_norm();
    let mut rhs = 0.0;
    let mut vj = DenseOperator::identity(v.layout().clone());
    for _ in 1..=k {
        vj = v * &vj;
        let inner = conj(&vj, o);
        rhs += (&inner - &conj(u, &inner)).op_norm();
    }
    Ok(CheckResult::new(TELESCOPING, lhs, rhs))
}

/// `‖e^A − e^B‖ ≤ e^M ‖A − B‖` with `M = max(‖A‖, ‖B‖)`, for Hermitian `A`, `B`.
pub fn check_exp_bound(a: &DenseOperator, b: &DenseOperator) -> Result<CheckResult> {
    same_layout(a, b)?;
    let lhs = (&a.exp_h()? - &b.exp_h()?).op_norm();
    let m = a.op_norm().max(b.op_norm());
    let rhs = m.exp() * (a - b).op_norm();
    Ok(CheckResult::new(EXP_BOUND, lhs, rhs))
}

/// `‖Tr_out A‖₁ ≤ ‖A‖₁`.
pub fn check_trace_norm_monotone(a: &DenseOperator, out: &[SiteId]) -> Result<CheckResult> {
    if !a.is_hermitian() {
        return Err(Error::NotHermitian {
            residual: a.hermitian_residual(),
        });
    }
    let lhs = a.partial_trace(out)?.trace_norm();
    let rhs = a.trace_norm();
    Ok(CheckResult::new(TRACE_NORM_MONOTONE, lhs, rhs))
}

/// Perturbs `H_A`, `H_B` by random Hermitian `δ` with `‖δ_A‖ ≤ ε_A`, `‖δ_B‖ ≤ ε_B` and compares
/// `‖e^{H_A+H_B}/Z − e^{H_A′+H_B′}/Z′‖` (operator norm) with `2(ε_A + ε_B)`.
pub fn check_circle_perturbation(
    h_a: &DenseOperator,
    h_b: &DenseOperator,
    eps_a: f64,
    eps_b: f64,
    seed: u64,
) -> Result<CheckResult> {
    if !(eps_a >= 0.0 && eps_b >= 0.0) {
        return Err(Error::InvalidArgument(
            "perturbation sizes must be non-negative".into(),
        ));
    }
    let full = h_a.layout().union(h_b.layout())?;
    let ha = h_a.embed(&full)?;
    let hb = h_b.embed(&full)?;
    let mut r = rng(seed);
    let mut draw = |eps: f64| -> DenseOperator {
        let d = random_hermitian_with(&mut r, &full);
        let size = eps * r.random_range(0.0..=1.0);
        d.scale(size / d.op_norm())
    };
    let da = draw(eps_a);
    let db = draw(eps_b);
    let (base, _) = (&ha + &hb).gibbs(-1.0)?;
    let (pert, _) = (&(&ha + &da) + &(&hb + &db)).gibbs(-1.0)?;
    let lhs = (&base - &pert).op_norm();
    Ok(CheckResult::new(
        CIRCLE_PERTURBATION,
        lhs,
        2.0 * (eps_a + eps_b),
    ))
}

/// One randomized instance of a named check. Layouts have 1–4 qubits (dim ≤ 16).
pub fn random_instance(check: &str, seed: u64) -> Result<CheckResult> {
    let mut r = rng(seed);
    let min_qubits = if check == TRACE_NORM_MONOTONE { 2 } else { 1 };
    let n = r.random_range(min_qubits..=4usize);
    let layout = SiteLayout::qubits(0..n)?;
    let scale: f64 = r.random_range(0.1..=1.5);
    let herm = |r: &mut rand_chacha::ChaCha8Rng| {
        let h = random_hermitian_with(r, &layout);
        let norm = h.op_norm();
        h.scale(scale / norm)
    };
    match check {
        GOLDEN_THOMPSON => {
            let a = herm(&mut r);
            let b = herm(&mut r);
            check_golden_thompson(&a, &b)
        }
        WEYL => {
            let a = herm(&mut r);
            let b = herm(&mut r);
            check_weyl(&a, &b)
        }
        CIRCLE_EIG_LOWER_BOUND => {
            let a = random_density_with(&mut r, &layout);
            let b = random_density_with(&mut r, &layout);
            check_circle_eig_lower_bound(&a, &b)
        }
        COMMUTATOR_POWER => {
            let a = herm(&mut r);
            let b = herm(&mut r);
            let power = [2, 3, 5][r.random_range(0..3usize)];
            check_commutator_power(&a, &b, power)
        }
        TELESCOPING => {
            let u = random_unitary_with(&mut r, &layout);
            let v = random_unitary_with(&mut r, &layout);
            let o = herm(&mut r);
            let k = [2, 4][r.random_range(0..2usize)];
            check_telescoping(&u, &v, &o, k)
        }
        EXP_BOUND => {
            let a = herm(&mut r);
            let b = herm(&mut r);
            check_exp_bound(&a, &b)
        }
        TRACE_NORM_MONOTONE => {
            let a = herm(&mut r);
            let mut out: Vec<SiteId> = (0..n).filter(|_| r.random_bool(0.5)).collect();
            if out.is_empty() {
                out.push(0);
            }
            if out.len() == n {
                out.pop();
            }
            check_trace_norm_monotone(&a, &out)
        }
        CIRCLE_PERTURBATION => {
            let a = herm(&mut r);
            let b = herm(&mut r);
            let eps = [1e-3, 1e-1];
            let ea = eps[r.random_range(0..2usize)];
            let eb = eps[r.random_range(0..2usize)];
            check_circle_perturbation(&a, &b, ea, eb, r.random())
        }
        other => Err(Error::InvalidArgument(format!("unknown check {other}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub count: usize,
    pub min_margin: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub master_seed: u64,
    pub instances: usize,
    pub checks: BTreeMap<String, CheckSummary>,
    /// Every failing instance, in (check, index) order.
    pub failed: Vec<(String, usize, CheckResult)>,
}

impl SuiteReport {
    pub fn total_failures(&self) -> usize {
        self.checks.values().map(|s| s.failures).sum()
    }
}

/// Runs every check on `instances` seeded instances. Instance `i` of check
/// number `c` uses seed `derive_seed(master, c, i)`; results do not depend on
/// the thread count.
pub fn run_suite(master_seed: u64, instances: usize) -> Result<SuiteReport> {
    let jobs: Vec<(usize, usize)> = (0..ALL_CHECKS.len())
        .flat_map(|c| (0..instances).map(move |i| (c, i)))
        .collect();
    let results: Vec<CheckResult> = jobs
        .par_iter()
        .map(|&(c, i)| random_instance(ALL_CHECKS[c], derive_seed(master_seed, c as u64, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut checks = BTreeMap::new();
    let mut failed = Vec::new();
    for (c, name) in ALL_CHECKS.iter().enumerate() {
        let slice = &results[c * instances..(c + 1) * instances];
        let min_margin = slice.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
        let failures = slice.iter().filter(|r| !r.pass).count();
        for (i, r) in slice.iter().enumerate().filter(|(_, r)| !r.pass) {
            failed.push((name.to_string(), i, r.clone()));
        }
        checks.insert(
            name.to_string(),
            CheckSummary {
                count: slice.len(),
                min_margin,
                failures,
            },
        );
    }
    Ok(SuiteReport {
        master_seed,
        instances,
        checks,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Pauli;

    fn qubit() -> SiteLayout {
        SiteLayout::qubits([0]).unwrap()
    }

    #[test]
    fn golden_thompson_cases() {
        let a = DenseOperator::from_real_diagonal(qubit(), &[0.3, -1.0]).unwrap();
        let b = DenseOperator::from_real_diagonal(qubit(), &[1.2, 0.4]).unwrap();
        let r = check_golden_thompson(&a, &b).unwrap();
        assert!(r.margin.abs() < 1e-14 && r.pass);

        let r = check_golden_thompson(&Pauli::X.on(0), &Pauli::Z.on(0)).unwrap();
        // e^{X+Z} has eigenvalues e^{±√2}; e^X e^Z has trace 2 cosh(1)².
        assert!((r.lhs - 2.0 * 2f64.sqrt().cosh()).abs() < 1e-12);
        assert!((r.rhs - 2.0 * 1f64.cosh().powi(2)).abs() < 1e-12);
        assert!(r.margin > 0.0);
    }

    #[test]
    fn weyl_cases() {
        let n = DenseOperator::from_real_diagonal(qubit(), &[1.0, 3.0]).unwrap();
        let r = DenseOperator::identity(qubit()).scale(0.7);
        assert!(check_weyl(&n, &r).unwrap().margin.abs() < 1e-14);
        let r = DenseOperator::from_real_diagonal(qubit(), &[0.0, 1.0]).unwrap();
        let res = check_weyl(&n, &r).unwrap();
        assert!(res.pass);
        let m = (&n + &r).hermitian_eig().unwrap().values;
        assert_eq!(m, vec![1.0, 4.0]);
    }

    #[test]
    fn circle_eig_cases() {
        let l = SiteLayout::qubits([0, 1]).unwrap();
        let mixed = DenseOperator::maximally_mixed(l.clone());
        let r = check_circle_eig_lower_bound(&mixed, &mixed).unwrap();
        assert!((r.lhs - 0.25).abs() < 1e-15 && (r.rhs - 0.25).abs() < 1e-14);

        // Commuting diagonal densities: scalar oracle.
        let pa = [0.1, 0.2, 0.3, 0.4];
        let pb = [0.4, 0.3, 0.2, 0.1];
        let a = DenseOperator::from_real_diagonal(l.clone(), &pa).unwrap();
        let b = DenseOperator::from_real_diagonal(l.clone(), &pb).unwrap();
        let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let z: f64 = prod.iter().sum();
        let oracle_rhs = prod.iter().cloned().fold(f64::INFINITY, f64::min) / z;
        let r = check_circle_eig_lower_bound(&a, &b).unwrap();
        assert!((r.rhs - oracle_rhs).abs() < 1e-14);
        assert!((r.lhs - 0.1 * 0.1 / 0.4).abs() < 1e-15);

        let singular = DenseOperator::from_real_diagonal(l, &[0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            check_circle_eig_lower_bound(&singular, &mixed),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn commutator_power_cases() {
        let a = Pauli::X.on(0);
        let b = Pauli::Z.on(0).scale(0.8);
        let r = check_commutator_power(&a, &b, 1).unwrap();
        assert!(r.margin.abs() < 1e-15);
        let c = Pauli::Z.on(0).scale(0.3);
        assert_eq!(check_commutator_power(&b, &c, 3).unwrap().lhs, 0.0);
    }

    #[test]
    fn telescoping_cases() {
        let l = SiteLayout::qubits([0, 1]).unwrap();
        let mut r = rng(3);
        let v = random_unitary_with(&mut r, &l);
        let o = random_hermitian_with(&mut r, &l);
        let id = DenseOperator::identity(l.clone());
        let res = check_telescoping(&id, &v, &o, 3).unwrap();
        assert!(res.lhs < 1e-12 && res.rhs < 1e-12);
        let u = random_unitary_with(&mut r, &l);
        let res = check_telescoping(&u, &v, &o, 1).unwrap();
        assert!(res.margin.abs() < 1e-12);
        assert!(check_telescoping(&o, &v, &o, 2).is_err());
    }

    #[test]
    fn exp_bound_cases() {
        let a = Pauli::X.on(0);
        assert_eq!(check_exp_bound(&a, &a).unwrap().lhs, 0.0);
        let one = DenseOperator::from_real_diagonal(qubit(), &[1.0, 1.0]).unwrap();
        let zero = DenseOperator::zeros(qubit());
        let r = check_exp_bound(&one, &zero).unwrap();
        assert!((r.lhs - (std::f64::consts::E - 1.0)).abs() < 1e-14);
        assert!((r.rhs - std::f64::consts::E).abs() < 1e-14);
    }

    #[test]
    fn trace_norm_cases() {
        let l = SiteLayout::qubits([0, 1]).unwrap();
        let rho = crate::random::random_density(4, &l);
        let r = check_trace_norm_monotone(&rho, &[1]).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12 && (r.rhs - 1.0).abs() < 1e-12);
        let zz = crate::operator::kron(&Pauli::Z.on(0), &Pauli::Z.on(1)).unwrap();
        let r = check_trace_norm_monotone(&zz, &[1]).unwrap();
        assert!(r.lhs.abs() < 1e-15 && (r.rhs - 4.0).abs() < 1e-14);
    }

    #[test]
    fn circle_perturbation_cases() {
        let l = SiteLayout::qubits([0, 1]).unwrap();
        let mut r = rng(8);
        let a = random_hermitian_with(&mut r, &l);
        let b = random_hermitian_with(&mut r, &l);
        assert!(check_circle_perturbation(&a, &b, 0.0, 0.0, 1).unwrap().lhs < 1e-14);

        // Scalar perturbations shift the spectrum uniformly and cancel after normalization.
        let da = DenseOperator::from_real_diagonal(qubit(), &[0.3, -0.5]).unwrap();
        let db = DenseOperator::from_real_diagonal(qubit(), &[0.1, 0.2]).unwrap();
        let res = check_circle_perturbation(&da, &db, 0.1, 0.1, 5).unwrap();
        assert!(res.pass);
    }

    #[test]
    fn scalar_oracle_for_diagonal_perturbation() {
        // With diagonal H_A + H_B = diag(x, y) and δ = diag(ε, 0), the
        // normalized Gibbs weights are logistic functions of y − x.
        let x: f64 = 0.2;
        let y: f64 = -0.4;
        let eps: f64 = 0.05;
        let p = |d: f64| 1.0 / (1.0 + (y - d).exp());
        let oracle = (p(x) - p(x + eps)).abs();
        let base = DenseOperator::from_real_diagonal(qubit(), &[x, y]).unwrap();
        let pert = DenseOperator::from_real_diagonal(qubit(), &[x + eps, y]).unwrap();
        let diff = (&base.gibbs(-1.0).unwrap().0 - &pert.gibbs(-1.0).unwrap().0).op_norm();
        assert!((diff - oracle).abs() < 1e-14);
        assert!(diff <= 2.0 * eps);
    }

    #[test]
    fn suite_is_reproducible() {
        let a = run_suite(42, 10).unwrap();
        let b = run_suite(42, 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_failures(), 0, "{:?}", a.failed);
        assert_eq!(a.checks.len(), 8);
    }
}
