//! Dense complex operators on a labelled tensor-product space.
//!
//! Every operator carries a [`SiteLayout`]: the ordered list of site ids it
//! acts on together with their local dimensions. Sites are always stored in
//! ascending id order and the first site is the most significant tensor leg,
//! so `Z` on site 2 of `[1, 2]` is `I ⊗ Z`.
//!
//! Matrix functions go exclusively through the Hermitian eigendecomposition.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type SiteId = usize;

/// Default cap on the total Hilbert-space dimension.
pub const DEFAULT_DIM_CAP: usize = 1 << 12;

/// Smallest eigenvalue accepted by [`DenseOperator::log_pd`].
pub const DEFAULT_LOG_FLOOR: f64 = 1e-30;

/// Relative anti-Hermitian residual tolerated for "Hermitian" inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteLayout {
    sites: Vec<SiteId>,
    dims: Vec<usize>,
}

impl SiteLayout {
    /// Builds a layout from `(site, dim)` pairs, sorted into ascending site order.
    pub fn new(pairs: impl IntoIterator<Item = (SiteId, usize)>) -> Result<Self> {
        Self::with_cap(pairs, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(pairs: impl IntoIterator<Item = (SiteId, usize)>, cap: usize) -> Result<Self> {
        let mut pairs: Vec<(SiteId, usize)> = pairs.into_iter().collect();
        pairs.sort_by_key(|&(s, _)| s);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateSite(w[0].0));
            }
        }
        let mut total: usize = 1;
        for &(s, d) in &pairs {
            if d < 2 {
                return Err(Error::DimensionMismatch(format!(
                    "site {s} has local dimension {d} (must be at least 2)"
                )));
            }
            total = total.saturating_mul(d);
            if total > cap {
                return Err(Error::DimensionCap { dim: total, cap });
            }
        }
        let (sites, dims) = pairs.into_iter().unzip();
        Ok(Self { sites, dims })
    }

    /// Layout of `n` qubits with the given ids.
    pub fn qubits(sites: impl IntoIterator<Item = SiteId>) -> Result<Self> {
        Self::new(sites.into_iter().map(|s| (s, 2)))
    }

    /// The zero-site layout (dimension 1).
    pub fn empty() -> Self {
        Self {
            sites: Vec::new(),
            dims: Vec::new(),
        }
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Total dimension (product of the local dimensions).
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn contains(&self, site: SiteId) -> bool {
        self.position(site).is_some()
    }

    pub fn position(&self, site: SiteId) -> Option<usize> {
        self.sites.binary_search(&site).ok()
    }

    pub fn dim_of(&self, site: SiteId) -> Option<usize> {
        self.position(site).map(|p| self.dims[p])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (SiteId, usize)> + '_ {
        self.sites.iter().copied().zip(self.dims.iter().copied())
    }

    /// Sub-layout over `sites`; every site must belong to `self`.
    pub fn subset(&self, sites: &[SiteId]) -> Result<Self> {
        let pairs = sites
            .iter()
            .map(|&s| self.dim_of(s).map(|d| (s, d)).ok_or(Error::UnknownSite(s)))
            .collect::<Result<Vec<_>>>()?;
        Self::with_cap(pairs, usize::MAX)
    }

    /// Sites of `self` not listed in `out`; every listed site must belong to `self`.
    pub fn complement(&self, out: &[SiteId]) -> Result<Self> {
        for &s in out {
            if !self.contains(s) {
                return Err(Error::UnknownSite(s));
            }
        }
        Ok(Self {
            sites: self
                .sites
                .iter()
                .copied()
                .filter(|s| !out.contains(s))
                .collect(),
            dims: self
                .pairs()
                .filter(|(s, _)| !out.contains(s))
                .map(|(_, d)| d)
                .collect(),
        })
    }

    /// Union of two layouts; shared sites must agree on their dimension.
    pub fn union(&self, other: &SiteLayout) -> Result<Self> {
        let mut pairs: Vec<(SiteId, usize)> = self.pairs().collect();
        for (s, d) in other.pairs() {
            match self.dim_of(s) {
                Some(existing) if existing != d => {
                    return Err(Error::DimensionMismatch(format!(
                        "site {s} has dimension {existing} and {d}"
                    )))
                }
                Some(_) => {}
                None => pairs.push((s, d)),
            }
        }
        Self::new(pairs)
    }

    pub fn is_subset_of(&self, other: &SiteLayout) -> bool {
        self.pairs().all(|(s, d)| other.dim_of(s) == Some(d))
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    /// For every row-major multi-index of `sub`, its contribution to the flat
    /// index of `self`. `sub` must be a subset of `self`.
    fn offsets(&self, sub: &SiteLayout) -> Vec<usize> {
        let strides = self.strides();
        let mut offs = vec![0usize];
        for (s, d) in sub.pairs() {
            let stride = strides[self.position(s).expect("sub-layout site missing")];
            offs = offs
                .iter()
                .flat_map(|&o| (0..d).map(move |k| o + k * stride))
                .collect();
        }
        offs
    }
}

/// Eigen-decomposition `A = U diag(λ) U†` with `λ` ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
    layout: SiteLayout,
}

impl HermitianEigen {
    /// Rebuilds `U diag(f(λ)) U†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseOperator {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let fl = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= fl;
            }
        }
        let matrix = &scaled * self.vectors.adjoint();
        DenseOperator {
            layout: self.layout.clone(),
            matrix,
        }
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("empty spectrum")
    }

    pub fn layout(&self) -> &SiteLayout {
        &self.layout
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    layout: SiteLayout,
    matrix: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn new(layout: SiteLayout, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = layout.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but the layout has dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { layout, matrix })
    }

    /// Builds an operator whose tensor legs follow `sites` in the listed order,
    /// permuting the legs into canonical ascending order.
    pub fn from_site_order(
        sites: &[SiteId],
        dims: &[usize],
        matrix: DMatrix<Complex64>,
    ) -> Result<Self> {
        if sites.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} sites but {} dimensions",
                sites.len(),
                dims.len()
            )));
        }
        let layout = SiteLayout::new(sites.iter().copied().zip(dims.iter().copied()))?;
        let d = layout.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but the sites have dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        // Flat index in the caller's leg order for each canonical multi-index.
        let mut orig_strides = vec![1usize; sites.len()];
        for i in (0..sites.len().saturating_sub(1)).rev() {
            orig_strides[i] = orig_strides[i + 1] * dims[i + 1];
        }
        let mut perm = vec![0usize];
        for (s, dd) in layout.pairs() {
            let stride = orig_strides[sites.iter().position(|&x| x == s).unwrap()];
            perm = perm
                .iter()
                .flat_map(|&o| (0..dd).map(move |k| o + k * stride))
                .collect();
        }
        let permuted = DMatrix::from_fn(d, d, |i, j| matrix[(perm[i], perm[j])]);
        Ok(Self {
            layout,
            matrix: permuted,
        })
    }

    pub fn from_real_diagonal(layout: SiteLayout, diag: &[f64]) -> Result<Self> {
        let d = layout.dim();
        if diag.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "diagonal has {} entries, layout dimension {d}",
                diag.len()
            )));
        }
        let mut m = DMatrix::zeros(d, d);
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        Ok(Self { layout, matrix: m })
    }

    pub fn identity(layout: SiteLayout) -> Self {
        let d = layout.dim();
        Self {
            layout,
            matrix: DMatrix::identity(d, d),
        }
    }

    pub fn zeros(layout: SiteLayout) -> Self {
        let d = layout.dim();
        Self {
            layout,
            matrix: DMatrix::zeros(d, d),
        }
    }

    /// Maximally mixed state `I / dim`.
    pub fn maximally_mixed(layout: SiteLayout) -> Self {
        let d = layout.dim() as f64;
        Self::identity(layout).scale(1.0 / d)
    }

    pub fn layout(&self) -> &SiteLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            layout: self.layout.clone(),
            matrix: &self.matrix * Complex64::new(factor, 0.0),
        }
    }

    pub fn scale_complex(&self, factor: Complex64) -> Self {
        Self {
            layout: self.layout.clone(),
            matrix: &self.matrix * factor,
        }
    }

    /// Rescales to unit trace; returns the operator and the log of the removed trace.
    pub fn normalized(&self) -> Result<(Self, f64)> {
        let tr = self.trace().re;
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(Error::Domain(format!(
                "cannot normalize an operator with trace {tr:e}"
            )));
        }
        Ok((self.scale(1.0 / tr), tr.ln()))
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `‖A − A†‖_F / ‖A‖_F` (zero for the zero operator).
    pub fn hermitian_residual(&self) -> f64 {
        let norm = self.frobenius();
        if norm == 0.0 {
            return 0.0;
        }
        (&self.matrix - self.matrix.adjoint()).norm() / norm
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_residual() <= HERMITIAN_TOL
    }

    fn require_hermitian(&self) -> Result<()> {
        let residual = self.hermitian_residual();
        if residual > HERMITIAN_TOL {
            return Err(Error::NotHermitian { residual });
        }
        Ok(())
    }

    /// Checks unit trace (±1e-10) and spectrum ≥ −1e-10.
    pub fn check_density(&self) -> Result<()> {
        self.require_hermitian()?;
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::NotDensity(format!("trace is {tr}")));
        }
        let eig = self.hermitian_eig()?;
        if eig.min() < -1e-10 {
            return Err(Error::NotDensity(format!(
                "minimum eigenvalue {:e}",
                eig.min()
            )));
        }
        Ok(())
    }

    /// `op ⊗ I` on the complement, with legs in `full`'s site order.
    pub fn embed(&self, full: &SiteLayout) -> Result<Self> {
        for (s, d) in self.layout.pairs() {
            match full.dim_of(s) {
                None => return Err(Error::UnknownSite(s)),
                Some(fd) if fd != d => {
                    return Err(Error::DimensionMismatch(format!(
                        "site {s} has dimension {d} in the operator but {fd} in the target layout"
                    )))
                }
                Some(_) => {}
            }
        }
        if &self.layout == full {
            return Ok(self.clone());
        }
        let comp = full.complement(self.layout.sites())?;
        let op_off = full.offsets(&self.layout);
        let comp_off = full.offsets(&comp);
        let d = full.dim();
        let mut m = DMatrix::zeros(d, d);
        for &cb in &comp_off {
            for (a, &ra) in op_off.iter().enumerate() {
                for (c, &rc) in op_off.iter().enumerate() {
                    let v = self.matrix[(a, c)];
                    if v != C0 {
                        m[(ra + cb, rc + cb)] = v;
                    }
                }
            }
        }
        Ok(Self {
            layout: full.clone(),
            matrix: m,
        })
    }

    /// Traces out the sites in `out`.
    pub fn partial_trace(&self, out: &[SiteId]) -> Result<Self> {
        let keep = self.layout.complement(out)?;
        let traced = self.layout.subset(out)?;
        let keep_off = self.layout.offsets(&keep);
        let out_off = self.layout.offsets(&traced);
        let d = keep.dim();
        let m = DMatrix::from_fn(d, d, |i, j| {
            let (ri, rj) = (keep_off[i], keep_off[j]);
            out_off
                .iter()
                .fold(C0, |acc, &k| acc + self.matrix[(ri + k, rj + k)])
        });
        Ok(Self {
            layout: keep,
            matrix: m,
        })
    }

    /// Partial trace onto `keep` (the sites not listed are traced out).
    pub fn reduce_to(&self, keep: &[SiteId]) -> Result<Self> {
        for &s in keep {
            if !self.layout.contains(s) {
                return Err(Error::UnknownSite(s));
            }
        }
        let out: Vec<SiteId> = self
            .layout
            .sites()
            .iter()
            .copied()
            .filter(|s| !keep.contains(s))
            .collect();
        self.partial_trace(&out)
    }

    /// Normalized partial trace over `out`, re-embedded with the identity:
    /// `(Tr_out[A] / dim(out)) ⊗ I_out`.
    pub fn conditional_expectation(&self, out: &[SiteId]) -> Result<Self> {
        if out.is_empty() {
            return Ok(self.clone());
        }
        let out_dim = self.layout.subset(out)?.dim() as f64;
        self.partial_trace(out)?
            .scale(1.0 / out_dim)
            .embed(&self.layout)
    }

    pub fn hermitian_eig(&self) -> Result<HermitianEigen> {
        self.require_hermitian()?;
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        Ok(HermitianEigen {
            values,
            vectors,
            layout: self.layout.clone(),
        })
    }

    /// Applies a real scalar function through the spectrum.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(self.hermitian_eig()?.map(f))
    }

    pub fn exp_h(&self) -> Result<Self> {
        self.map_spectrum(f64::exp)
    }

    pub fn log_pd(&self) -> Result<Self> {
        self.log_pd_with_floor(DEFAULT_LOG_FLOOR)
    }

    pub fn log_pd_with_floor(&self, floor: f64) -> Result<Self> {
        let eig = self.hermitian_eig()?;
        if eig.min() <= floor {
            return Err(Error::Singular {
                eigenvalue: eig.min(),
                floor,
            });
        }
        Ok(eig.map(f64::ln))
    }

    /// Unit-trace Gibbs state `exp(−βA) / Tr exp(−βA)` together with `ln Tr exp(−βA)`.
    pub fn gibbs(&self, beta: f64) -> Result<(Self, f64)> {
        let eig = self.hermitian_eig()?;
        let shift = eig.min();
        let weights: Vec<f64> = eig
            .values
            .iter()
            .map(|&e| (-beta * (e - shift)).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        let state = eig.map(|e| (-beta * (e - shift)).exp() / z);
        Ok((state, z.ln() - beta * shift))
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self
            .matrix
            .clone()
            .singular_values()
            .iter()
            .copied()
            .collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    /// Trace norm; Hermitian inputs use the spectrum, others the singular values.
    pub fn trace_norm(&self) -> f64 {
        if self.is_hermitian() {
            if let Ok(eig) = self.hermitian_eig() {
                return eig.values.iter().map(|l| l.abs()).sum();
            }
        }
        self.singular_values().iter().sum()
    }

    /// Operator (spectral) norm.
    pub fn op_norm(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        if self.is_hermitian() {
            if let Ok(eig) = self.hermitian_eig() {
                return eig.min().abs().max(eig.max().abs());
            }
        }
        self.singular_values()[0]
    }

    /// Commutator `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// Integer matrix power.
    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::identity(self.layout.clone());
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    fn assert_same_layout(&self, other: &Self, op: &str) {
        assert!(
            self.layout == other.layout,
            "layout mismatch in {op}: {:?} vs {:?}",
            self.layout.sites(),
            other.layout.sites()
        );
    }
}

impl Add for &DenseOperator {
    type Output = DenseOperator;
    fn add(self, rhs: &DenseOperator) -> DenseOperator {
        self.assert_same_layout(rhs, "add");
        DenseOperator {
            layout: self.layout.clone(),
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &DenseOperator {
    type Output = DenseOperator;
    fn sub(self, rhs: &DenseOperator) -> DenseOperator {
        self.assert_same_layout(rhs, "sub");
        DenseOperator {
            layout: self.layout.clone(),
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Mul for &DenseOperator {
    type Output = DenseOperator;
    fn mul(self, rhs: &DenseOperator) -> DenseOperator {
        self.assert_same_layout(rhs, "mul");
        DenseOperator {
            layout: self.layout.clone(),
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

impl Neg for &DenseOperator {
    type Output = DenseOperator;
    fn neg(self) -> DenseOperator {
        DenseOperator {
            layout: self.layout.clone(),
            matrix: -&self.matrix,
        }
    }
}

/// Single-qubit Pauli matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> DMatrix<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        let entries = match self {
            Pauli::I => [C1, C0, C0, C1],
            Pauli::X => [C0, C1, C1, C0],
            Pauli::Y => [C0, -i, i, C0],
            Pauli::Z => [C1, C0, C0, -C1],
        };
        DMatrix::from_row_slice(2, 2, &entries)
    }

    /// The Pauli acting on qubit `site`.
    pub fn on(self, site: SiteId) -> DenseOperator {
        DenseOperator {
            layout: SiteLayout {
                sites: vec![site],
                dims: vec![2],
            },
            matrix: self.matrix(),
        }
    }
}

/// Tensor product of operators on disjoint layouts.
pub fn kron(a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    for &s in b.layout().sites() {
        if a.layout().contains(s) {
            return Err(Error::DuplicateSite(s));
        }
    }
    let full = a.layout().union(b.layout())?;
    Ok(&a.embed(&full)? * &b.embed(&full)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_hermitian};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn layout_sorts_and_rejects_duplicates() {
        let l = SiteLayout::new([(3, 2), (1, 3)]).unwrap();
        assert_eq!(l.sites(), &[1, 3]);
        assert_eq!(l.dims(), &[3, 2]);
        assert_eq!(l.dim(), 6);
        assert_eq!(
            SiteLayout::new([(1, 2), (1, 2)]),
            Err(Error::DuplicateSite(1))
        );
        assert!(matches!(
            SiteLayout::new([(1, 1)]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn layout_enforces_cap() {
        let err = SiteLayout::new((0..13).map(|s| (s, 2))).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionCap {
                dim: 8192,
                cap: DEFAULT_DIM_CAP
            }
        );
        assert!(SiteLayout::new((0..12).map(|s| (s, 2))).is_ok());
    }

    #[test]
    fn embed_identity_gives_identity() {
        let full = SiteLayout::qubits([1, 2]).unwrap();
        let id = DenseOperator::identity(SiteLayout::qubits([1]).unwrap());
        let e = id.embed(&full).unwrap();
        assert_eq!(e.matrix(), &DMatrix::<Complex64>::identity(4, 4));
    }

    #[test]
    fn embed_z_on_second_site() {
        let full = SiteLayout::qubits([1, 2]).unwrap();
        let e = Pauli::Z.on(2).embed(&full).unwrap();
        // Kronecker oracle: (I ⊗ Z)[(a1 a2), (b1 b2)] = δ(a1,b1) Z[a2,b2].
        let z = Pauli::Z.matrix();
        for r in 0..4 {
            for col in 0..4 {
                let expected = if r / 2 == col / 2 {
                    z[(r % 2, col % 2)]
                } else {
                    C0
                };
                assert_eq!(e.matrix()[(r, col)], expected);
            }
        }
        let diag: Vec<f64> = (0..4).map(|i| e.matrix()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn embed_rejects_unknown_site_and_dim_mismatch() {
        let full = SiteLayout::qubits([1, 2]).unwrap();
        assert_eq!(
            Pauli::Z.on(5).embed(&full).unwrap_err(),
            Error::UnknownSite(5)
        );
        let qutrit = SiteLayout::new([(1, 3), (2, 2)]).unwrap();
        assert!(matches!(
            Pauli::Z.on(1).embed(&qutrit),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn embed_then_trace_recovers_scaled_operator() {
        let small = SiteLayout::new([(2, 2), (4, 3)]).unwrap();
        let full = SiteLayout::new([(1, 2), (2, 2), (3, 2), (4, 3)]).unwrap();
        let a = random_hermitian(7, &small);
        let back = a.embed(&full).unwrap().partial_trace(&[1, 3]).unwrap();
        assert!((&back - &a.scale(4.0)).max_abs() <= 1e-12);
    }

    #[test]
    fn from_site_order_permutes_legs() {
        // X on site 5 ⊗ Z on site 2, given in the order [5, 2].
        let xz = kron_raw(&Pauli::X.matrix(), &Pauli::Z.matrix());
        let op = DenseOperator::from_site_order(&[5, 2], &[2, 2], xz).unwrap();
        let expected = kron(&Pauli::Z.on(2), &Pauli::X.on(5)).unwrap();
        assert_eq!(op, expected);
    }

    fn kron_raw(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        a.kronecker(b)
    }

    #[test]
    fn eig_of_diagonal_and_pauli_x() {
        let l = SiteLayout::qubits([0]).unwrap();
        let a = DenseOperator::from_real_diagonal(l, &[3.0, 1.0]).unwrap();
        let e = a.hermitian_eig().unwrap();
        assert_eq!(e.values, vec![1.0, 3.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-15);

        let ex = Pauli::X.on(0).hermitian_eig().unwrap();
        assert!((ex.values[0] + 1.0).abs() < 1e-14 && (ex.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_reconstruction_random_16() {
        let l = SiteLayout::qubits(0..4).unwrap();
        let a = random_hermitian(11, &l);
        let e = a.hermitian_eig().unwrap();
        let rec = e.map(|x| x);
        assert!((&rec - &a).op_norm() <= 1e-9 * a.op_norm());
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let l = SiteLayout::qubits([0]).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let a = DenseOperator::new(l, m).unwrap();
        assert!(matches!(a.hermitian_eig(), Err(Error::NotHermitian { .. })));
        assert!(matches!(a.exp_h(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn exp_known_values() {
        let l = SiteLayout::qubits([0]).unwrap();
        let zero = DenseOperator::zeros(l.clone());
        assert!((&zero.exp_h().unwrap() - &DenseOperator::identity(l)).max_abs() < 1e-15);

        let ez = Pauli::Z.on(0).exp_h().unwrap();
        let e = std::f64::consts::E;
        assert!((ez.matrix()[(0, 0)].re - e).abs() < 1e-14);
        assert!((ez.matrix()[(1, 1)].re - 1.0 / e).abs() < 1e-14);

        let xz = &Pauli::X.on(0) + &Pauli::Z.on(0);
        let eig = xz.exp_h().unwrap().hermitian_eig().unwrap();
        let r2 = 2f64.sqrt();
        assert!((eig.values[0] - (-r2).exp()).abs() < 1e-13);
        assert!((eig.values[1] - r2.exp()).abs() < 1e-13);
    }

    #[test]
    fn log_known_values_and_singularity() {
        let l = SiteLayout::qubits([0]).unwrap();
        let id = DenseOperator::identity(l.clone());
        assert!(id.log_pd().unwrap().max_abs() < 1e-15);
        let e = std::f64::consts::E;
        let d = DenseOperator::from_real_diagonal(l.clone(), &[e, e * e]).unwrap();
        let lg = d.log_pd().unwrap();
        assert!((lg.matrix()[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!((lg.matrix()[(1, 1)].re - 2.0).abs() < 1e-14);

        let sing = DenseOperator::from_real_diagonal(l, &[1.0, 0.0]).unwrap();
        match sing.log_pd() {
            Err(Error::Singular { eigenvalue, floor }) => {
                assert_eq!(eigenvalue, 0.0);
                assert_eq!(floor, DEFAULT_LOG_FLOOR);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn log_exp_round_trip_on_floored_density() {
        let l = SiteLayout::qubits(0..4).unwrap();
        let rho = crate::random::random_density_floored(3, &l, 1e-6);
        let back = rho.log_pd().unwrap().exp_h().unwrap();
        assert!((&back - &rho).op_norm() <= 1e-8 * rho.op_norm());
    }

    #[test]
    fn partial_trace_product_and_bell() {
        let la = SiteLayout::qubits([0]).unwrap();
        let lb = SiteLayout::qubits([1]).unwrap();
        let ra = random_density(1, &la);
        let rb = random_density(2, &lb);
        let prod = kron(&ra, &rb).unwrap();
        assert!((&prod.partial_trace(&[1]).unwrap() - &ra).max_abs() < 1e-14);

        let l2 = SiteLayout::qubits([0, 1]).unwrap();
        let mut bell = DMatrix::zeros(4, 4);
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            bell[(i, j)] = c(0.5);
        }
        let bell = DenseOperator::new(l2, bell).unwrap();
        let red = bell.partial_trace(&[1]).unwrap();
        assert!((&red - &DenseOperator::maximally_mixed(la)).max_abs() < 1e-15);
    }

    #[test]
    fn partial_trace_matches_index_summation() {
        let l = SiteLayout::qubits([0, 1]).unwrap();
        let a = random_hermitian(5, &l);
        let m = a.matrix();
        // Tr over site 1 (second leg): sum over b of A[(a,b),(a',b)].
        let t1 = a.partial_trace(&[1]).unwrap();
        // Tr over site 0 (first leg): sum over a of A[(a,b),(a,b')].
        let t0 = a.partial_trace(&[0]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let s1 = m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)];
                let s0 = m[(i, j)] + m[(2 + i, 2 + j)];
                assert!((t1.matrix()[(i, j)] - s1).norm() < 1e-14);
                assert!((t0.matrix()[(i, j)] - s0).norm() < 1e-14);
            }
        }
        assert_eq!(a.partial_trace(&[9]).unwrap_err(), Error::UnknownSite(9));
    }

    #[test]
    fn conditional_expectation_cases() {
        let l = SiteLayout::qubits(0..3).unwrap();
        let id = DenseOperator::identity(l.clone());
        assert!((&id.conditional_expectation(&[1, 2]).unwrap() - &id).max_abs() < 1e-15);

        let outside = Pauli::X.on(0).embed(&l).unwrap();
        let ce = outside.conditional_expectation(&[1, 2]).unwrap();
        assert!((&ce - &outside).max_abs() < 1e-15);

        // Nested regions: E_{D2} E_{D1} = E_{D2} for D2 ⊂ D1... and E_{D1} E_{D2} = E_{D1}.
        let a = random_hermitian(9, &l);
        let d1 = [1, 2];
        let d2 = [2];
        let via_both = a
            .conditional_expectation(&d1)
            .unwrap()
            .conditional_expectation(&d2)
            .unwrap();
        let direct = a.conditional_expectation(&d1).unwrap();
        assert!((&via_both - &direct).max_abs() < 1e-14);
        // Direct evaluation oracle for E_{D2}: average over the last leg.
        let e2 = a.conditional_expectation(&d2).unwrap();
        let m = a.matrix();
        for i in 0..8 {
            for j in 0..8 {
                let expected = if i % 2 == j % 2 {
                    (m[(i & !1, j & !1)] + m[(i | 1, j | 1)]) * 0.5
                } else {
                    C0
                };
                assert!((e2.matrix()[(i, j)] - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn norms_of_known_operators() {
        let l = SiteLayout::qubits(0..2).unwrap();
        let rho = random_density(4, &l);
        assert!((rho.trace_norm() - 1.0).abs() < 1e-12);
        let z = Pauli::Z.on(0);
        assert!((z.trace_norm() - 2.0).abs() < 1e-14);
        assert!((z.op_norm() - 1.0).abs() < 1e-14);
        let a = random_hermitian(8, &l);
        let (op, tr) = (a.op_norm(), a.trace_norm());
        assert!(op <= tr + 1e-12 && tr <= 4.0 * op + 1e-12);
        // Non-Hermitian path: |0><1| has a single unit singular value.
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = C1;
        let raising = DenseOperator::new(SiteLayout::qubits([0]).unwrap(), m).unwrap();
        assert!((raising.op_norm() - 1.0).abs() < 1e-14);
        assert!((raising.trace_norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gibbs_matches_direct_exponential() {
        let l = SiteLayout::qubits(0..2).unwrap();
        let h = random_hermitian(12, &l);
        let (rho, log_z) = h.gibbs(0.7).unwrap();
        let raw = h.scale(-0.7).exp_h().unwrap();
        let z = raw.trace().re;
        assert!((log_z - z.ln()).abs() < 1e-12);
        assert!((&rho - &raw.scale(1.0 / z)).max_abs() < 1e-13);
    }
}
