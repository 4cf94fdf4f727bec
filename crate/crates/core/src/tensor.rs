//! Dense complex linear algebra on multipartite Hilbert spaces.
//!
//! Multi-indices are lexicographic: factor 0 is the most significant digit,
//! so qubit 0 is the leftmost tensor factor.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest Hilbert-space dimension any operator may reach.
pub const MAX_DIM: usize = 1 << 12;

/// Tolerance used when an input is required to be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Shorthand complex constructor.
pub const fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub(crate) fn is_power_of_two(d: usize) -> bool {
    d > 0 && d & (d - 1) == 0
}

/// Number of qubits for a power-of-two dimension.
pub fn qubit_count(dim: usize) -> Result<usize> {
    if !is_power_of_two(dim) {
        return Err(Error::arg(format!("dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim > MAX_DIM {
        Err(Error::DimensionLimit {
            dim,
            limit: MAX_DIM,
        })
    } else {
        Ok(())
    }
}

/// Square complex matrix with a tensor-factor structure.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    mat: CMatrix,
    factor_dims: Vec<usize>,
}

impl DenseOperator {
    pub fn new(mat: CMatrix, factor_dims: Vec<usize>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::arg(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if factor_dims.contains(&0) {
            return Err(Error::arg("factor dimensions must be positive"));
        }
        let prod: usize = factor_dims.iter().product();
        if prod != mat.nrows() {
            return Err(Error::arg(format!(
                "factor dimensions {factor_dims:?} do not multiply to {}",
                mat.nrows()
            )));
        }
        check_dim(prod)?;
        Ok(Self { mat, factor_dims })
    }

    /// Single-factor operator.
    pub fn from_matrix(mat: CMatrix) -> Result<Self> {
        let d = mat.nrows();
        Self::new(mat, vec![d])
    }

    /// Operator on `log2(dim)` qubits.
    pub fn qubits(mat: CMatrix) -> Result<Self> {
        let n = qubit_count(mat.nrows())?;
        Self::new(mat, vec![2; n])
    }

    pub fn identity(factor_dims: &[usize]) -> Self {
        let d = factor_dims.iter().product();
        Self {
            mat: CMatrix::identity(d, d),
            factor_dims: factor_dims.to_vec(),
        }
    }

    pub fn zeros(factor_dims: &[usize]) -> Self {
        let d = factor_dims.iter().product();
        Self {
            mat: CMatrix::zeros(d, d),
            factor_dims: factor_dims.to_vec(),
        }
    }

    /// Maximally mixed state `1/d` on the given factors.
    pub fn maximally_mixed(factor_dims: &[usize]) -> Self {
        let mut op = Self::identity(factor_dims);
        let d = op.dim() as f64;
        op.mat /= c(d, 0.0);
        op
    }

    pub fn projector(psi: &StateVector) -> Self {
        let a = &psi.amps;
        Self {
            mat: a * a.adjoint(),
            factor_dims: psi.factor_dims.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    /// Replace the factor structure, keeping the entries.
    pub fn with_factor_dims(self, factor_dims: Vec<usize>) -> Result<Self> {
        Self::new(self.mat, factor_dims)
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
            factor_dims: self.factor_dims.clone(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            mat: self.mat.transpose(),
            factor_dims: self.factor_dims.clone(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            mat: &self.mat * s,
            factor_dims: self.factor_dims.clone(),
        }
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &DenseOperator) -> C64 {
        let d = self.dim();
        let mut acc = c(0.0, 0.0);
        for i in 0..d {
            for k in 0..d {
                acc += self.mat[(i, k)] * other.mat[(k, i)];
            }
        }
        acc
    }

    /// `max |A - A†|` over all entries.
    pub fn hermitian_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let diff = (self.mat[(i, j)] - self.mat[(j, i)].conj()).norm();
                worst = worst.max(diff);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        let mut m = &self.mat + self.mat.adjoint();
        m /= c(2.0, 0.0);
        Self {
            mat: m,
            factor_dims: self.factor_dims.clone(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn kron(&self, other: &DenseOperator) -> Result<Self> {
        check_dim(self.dim().saturating_mul(other.dim()))?;
        let mut factor_dims = self.factor_dims.clone();
        factor_dims.extend_from_slice(&other.factor_dims);
        Ok(Self {
            mat: self.mat.kronecker(&other.mat),
            factor_dims,
        })
    }

    fn strides(&self) -> Vec<usize> {
        strides(&self.factor_dims)
    }

    /// Trace out every factor not listed in `keep`. Kept factors retain
    /// their relative order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let nf = self.factor_dims.len();
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        if keep_sorted.len() != keep.len() {
            return Err(Error::arg("duplicate factor index in partial trace"));
        }
        if let Some(&bad) = keep_sorted.iter().find(|&&k| k >= nf) {
            return Err(Error::arg(format!(
                "factor index {bad} out of range for {nf} factors"
            )));
        }
        let traced: Vec<usize> = (0..nf).filter(|f| !keep_sorted.contains(f)).collect();
        let st = self.strides();
        let kept_offsets = offsets(&keep_sorted, &self.factor_dims, &st);
        let traced_offsets = offsets(&traced, &self.factor_dims, &st);
        let dk = kept_offsets.len();
        let mut out = CMatrix::zeros(dk, dk);
        for (r, &or) in kept_offsets.iter().enumerate() {
            for (col, &oc) in kept_offsets.iter().enumerate() {
                let mut acc = c(0.0, 0.0);
                for &ot in &traced_offsets {
                    acc += self.mat[(or + ot, oc + ot)];
                }
                out[(r, col)] = acc;
            }
        }
        let dims = keep_sorted.iter().map(|&f| self.factor_dims[f]).collect();
        Ok(Self {
            mat: out,
            factor_dims: dims,
        })
    }

    /// Transpose the listed factors only.
    pub fn partial_transpose(&self, factors: &[usize]) -> Result<Self> {
        let nf = self.factor_dims.len();
        if let Some(&bad) = factors.iter().find(|&&f| f >= nf) {
            return Err(Error::arg(format!(
                "factor index {bad} out of range for {nf} factors"
            )));
        }
        let st = self.strides();
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for r in 0..d {
            for col in 0..d {
                let (mut r2, mut c2) = (r, col);
                for &f in factors {
                    let dr = (r / st[f]) % self.factor_dims[f];
                    let dc = (col / st[f]) % self.factor_dims[f];
                    r2 = r2 - dr * st[f] + dc * st[f];
                    c2 = c2 - dc * st[f] + dr * st[f];
                }
                out[(r2, c2)] = self.mat[(r, col)];
            }
        }
        Ok(Self {
            mat: out,
            factor_dims: self.factor_dims.clone(),
        })
    }

    /// Reorder tensor factors: factor `perm[k]` of `self` becomes factor `k`
    /// of the result.
    pub fn permute_factors(&self, perm: &[usize]) -> Result<Self> {
        let map = factor_permutation(&self.factor_dims, perm)?;
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for r in 0..d {
            for col in 0..d {
                out[(r, col)] = self.mat[(map[r], map[col])];
            }
        }
        let dims = perm.iter().map(|&p| self.factor_dims[p]).collect();
        Ok(Self {
            mat: out,
            factor_dims: dims,
        })
    }

    /// Hermitian eigendecomposition with eigenvalues ascending.
    pub fn herm_eig(&self) -> Result<HermEigen> {
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::pre(format!(
                "eigensolver requires a Hermitian matrix (deviation {dev:.3e})"
            )));
        }
        HermEigen::of_hermitian(&self.hermitian_part().mat)
    }
}

impl Add for &DenseOperator {
    type Output = DenseOperator;

    fn add(self, rhs: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in add");
        DenseOperator {
            mat: &self.mat + &rhs.mat,
            factor_dims: self.factor_dims.clone(),
        }
    }
}

impl Sub for &DenseOperator {
    type Output = DenseOperator;

    fn sub(self, rhs: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in sub");
        DenseOperator {
            mat: &self.mat - &rhs.mat,
            factor_dims: self.factor_dims.clone(),
        }
    }
}

impl Mul for &DenseOperator {
    type Output = DenseOperator;

    fn mul(self, rhs: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in mul");
        DenseOperator {
            mat: &self.mat * &rhs.mat,
            factor_dims: self.factor_dims.clone(),
        }
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut st = vec![1; dims.len()];
    for f in (0..dims.len().saturating_sub(1)).rev() {
        st[f] = st[f + 1] * dims[f + 1];
    }
    st
}

/// Flat offsets of every multi-index over `factors` (lexicographic).
fn offsets(factors: &[usize], dims: &[usize], st: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &f in factors {
        let mut next = Vec::with_capacity(out.len() * dims[f]);
        for &o in &out {
            for digit in 0..dims[f] {
                next.push(o + digit * st[f]);
            }
        }
        out = next;
    }
    out
}

/// For each flat index of the permuted space, the flat index in the source.
fn factor_permutation(dims: &[usize], perm: &[usize]) -> Result<Vec<usize>> {
    let nf = dims.len();
    let mut seen = vec![false; nf];
    if perm.len() != nf {
        return Err(Error::arg("permutation length does not match factor count"));
    }
    for &p in perm {
        if p >= nf || seen[p] {
            return Err(Error::arg(format!("invalid factor permutation {perm:?}")));
        }
        seen[p] = true;
    }
    // enumerating new multi-indices lexicographically walks the source
    // factors in `perm` order
    Ok(offsets(perm, dims, &strides(dims)))
}

/// Eigendecomposition `A = V diag(values) V†`, values ascending.
#[derive(Clone, Debug)]
pub struct HermEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermEigen {
    /// Assumes `m` is exactly Hermitian.
    pub(crate) fn of_hermitian(m: &CMatrix) -> Result<Self> {
        let d = m.nrows();
        let fm = faer::Mat::<C64>::from_fn(d, d, |r, col| m[(r, col)]);
        let eig = fm
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed: {e:?}")))?;
        let (s, u) = (eig.S().column_vector(), eig.U());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
        let values: Vec<f64> = order.iter().map(|&k| s[k].re).collect();
        let vectors = CMatrix::from_fn(d, d, |r, k| u[(r, order[k])]);
        if values.iter().any(|x| !x.is_finite()) || vectors.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("Hermitian eigensolver produced non-finite output".into()));
        }
        Ok(Self { values, vectors })
    }

    /// `V f(Λ) V†`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..d {
            let s = f(self.values[k]);
            scaled.column_mut(k).scale_mut(s);
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map_values(|x| x)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// Normalised pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: CVector,
    factor_dims: Vec<usize>,
}

impl StateVector {
    pub const NORM_TOL: f64 = 1e-12;

    /// Amplitudes must already be normalised.
    pub fn new(amps: CVector) -> Result<Self> {
        let norm = amps.norm();
        if (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::arg(format!("state norm {norm} differs from 1")));
        }
        let d = amps.len();
        let factor_dims = default_factor_dims(d);
        check_dim(d)?;
        Ok(Self { amps, factor_dims })
    }

    /// Normalise arbitrary nonzero amplitudes.
    pub fn normalized(mut amps: CVector) -> Result<Self> {
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::arg("cannot normalise a zero or non-finite vector"));
        }
        amps /= c(norm, 0.0);
        let d = amps.len();
        check_dim(d)?;
        Ok(Self {
            amps,
            factor_dims: default_factor_dims(d),
        })
    }

    pub fn from_slice(amps: &[C64]) -> Result<Self> {
        Self::normalized(CVector::from_column_slice(amps))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amps = CVector::zeros(dim);
        amps[k] = c(1.0, 0.0);
        Self {
            amps,
            factor_dims: default_factor_dims(dim),
        }
    }

    /// Tensor product of the given states, in order.
    pub fn product(parts: &[StateVector]) -> Result<Self> {
        let mut iter = parts.iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::arg("product of zero states"))?
            .clone();
        iter.try_fold(first, |acc, p| acc.kron(p))
    }

    pub fn kron(&self, other: &StateVector) -> Result<Self> {
        let d = self.dim().saturating_mul(other.dim());
        check_dim(d)?;
        let mut factor_dims = self.factor_dims.clone();
        factor_dims.extend_from_slice(&other.factor_dims);
        Ok(Self {
            amps: self.amps.kronecker(&other.amps),
            factor_dims,
        })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn num_qubits(&self) -> Option<usize> {
        qubit_count(self.dim()).ok()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn projector(&self) -> DenseOperator {
        DenseOperator::projector(self)
    }

    pub fn expectation(&self, op: &DenseOperator) -> Result<f64> {
        if op.dim() != self.dim() {
            return Err(Error::arg("dimension mismatch in expectation value"));
        }
        Ok(self.amps.dotc(&(op.matrix() * &self.amps)).re)
    }

    /// Apply a 2x2 matrix to qubit `q` (qubit 0 most significant).
    pub fn apply_single_qubit(&mut self, q: usize, u: &Matrix2<C64>) {
        apply_single_qubit(self.amps.as_mut_slice(), q, u);
    }

    pub(crate) fn from_parts_unchecked(amps: CVector) -> Self {
        let d = amps.len();
        Self {
            amps,
            factor_dims: default_factor_dims(d),
        }
    }
}

/// Apply `u` to qubit `q` of a register stored as a flat amplitude slice.
pub(crate) fn apply_single_qubit(amps: &mut [C64], q: usize, u: &Matrix2<C64>) {
    let n = amps.len().trailing_zeros() as usize;
    let bit = 1usize << (n - 1 - q);
    for i in 0..amps.len() {
        if i & bit == 0 {
            let a0 = amps[i];
            let a1 = amps[i | bit];
            amps[i] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
            amps[i | bit] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
        }
    }
}

fn default_factor_dims(d: usize) -> Vec<usize> {
    match qubit_count(d) {
        Ok(n) if n > 0 => vec![2; n],
        _ => vec![d],
    }
}

/// `e^{-iHt}` applied through a cached eigendecomposition of `H`.
#[derive(Clone, Debug)]
pub struct Propagator {
    eig: HermEigen,
}

impl Propagator {
    pub fn new(h: &DenseOperator) -> Result<Self> {
        Ok(Self { eig: h.herm_eig()? })
    }

    pub fn eigen(&self) -> &HermEigen {
        &self.eig
    }

    /// Components of `psi` in the eigenbasis.
    pub fn to_eigenbasis(&self, psi: &StateVector) -> Result<CVector> {
        if psi.dim() != self.eig.values.len() {
            return Err(Error::arg(format!(
                "state dimension {} does not match Hamiltonian dimension {}",
                psi.dim(),
                self.eig.values.len()
            )));
        }
        Ok(self.eig.vectors.adjoint() * psi.amplitudes())
    }

    /// Evolve from eigenbasis components.
    pub fn evolve_components(&self, coeffs: &CVector, t: f64) -> StateVector {
        let phased = CVector::from_iterator(
            coeffs.len(),
            coeffs
                .iter()
                .zip(&self.eig.values)
                .map(|(a, &lam)| a * C64::from_polar(1.0, -lam * t)),
        );
        StateVector::from_parts_unchecked(&self.eig.vectors * phased)
    }

    pub fn evolve(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        let coeffs = self.to_eigenbasis(psi)?;
        let mut out = self.evolve_components(&coeffs, t);
        out.factor_dims = psi.factor_dims.clone();
        Ok(out)
    }
}

/// `e^{-iHt} psi`.
pub fn evolve(psi: &StateVector, h: &DenseOperator, t: f64) -> Result<StateVector> {
    if psi.dim() != h.dim() {
        return Err(Error::arg(format!(
            "state dimension {} does not match Hamiltonian dimension {}",
            psi.dim(),
            h.dim()
        )));
    }
    Propagator::new(h)?.evolve(psi, t)
}

/// Standard single-qubit matrices.
pub mod gates {
    use super::{c, CMatrix};

    pub fn identity() -> CMatrix {
        CMatrix::identity(2, 2)
    }

    pub fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    pub fn pauli_y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }

    pub fn pauli_z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    /// Unnormalised Pauli matrix by digit 0..=3 (I, X, Y, Z).
    pub fn pauli(digit: u8) -> CMatrix {
        match digit {
            0 => identity(),
            1 => pauli_x(),
            2 => pauli_y(),
            3 => pauli_z(),
            _ => panic!("Pauli digit out of range: {digit}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(m: CMatrix) -> DenseOperator {
        DenseOperator::from_matrix(m).unwrap()
    }

    fn bell() -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::new(CVector::from_vec(vec![
            c(s, 0.),
            c(0., 0.),
            c(0., 0.),
            c(s, 0.),
        ]))
        .unwrap()
    }

    #[test]
    fn kron_identities_and_paulis() {
        let i2 = op(gates::identity());
        let i4 = i2.kron(&i2).unwrap();
        assert_eq!(i4.matrix(), &CMatrix::identity(4, 4));
        let x = op(gates::pauli_x());
        let xx = x.kron(&x).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let want = if r + col == 3 { 1.0 } else { 0.0 };
                assert_eq!(xx.get(r, col), c(want, 0.0));
            }
        }
    }

    #[test]
    fn kron_bookkeeping() {
        let a = DenseOperator::identity(&[2]);
        let b = DenseOperator::identity(&[3]);
        let ab = a.kron(&b).unwrap();
        assert_eq!(ab.dim(), 6);
        assert_eq!(ab.factor_dims(), &[2, 3]);
    }

    #[test]
    fn kron_dimension_limit() {
        let a = DenseOperator::identity(&[64]);
        let b = DenseOperator::identity(&[128]);
        assert!(matches!(a.kron(&b), Err(Error::DimensionLimit { .. })));
    }

    #[test]
    fn partial_trace_of_bell_is_mixed() {
        let rho = bell().projector();
        let red = rho.partial_trace(&[0]).unwrap();
        assert!(red.max_abs_diff(&DenseOperator::maximally_mixed(&[2])) < 1e-15);
        assert_eq!(red.factor_dims(), &[2]);
    }

    #[test]
    fn partial_trace_rejects_bad_index() {
        let rho = bell().projector();
        assert!(matches!(rho.partial_trace(&[2]), Err(Error::Argument(_))));
        assert!(matches!(rho.partial_trace(&[0, 0]), Err(Error::Argument(_))));
    }

    #[test]
    fn partial_trace_product_factorises() {
        let rho = op(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.7, 0.), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.)],
        ));
        let sigma = DenseOperator::new(CMatrix::identity(3, 3) * c(2.0, 0.0), vec![3]).unwrap();
        let prod = rho.kron(&sigma).unwrap();
        let red = prod.partial_trace(&[0]).unwrap();
        assert!(red.max_abs_diff(&rho.scale(c(6.0, 0.0))) < 1e-12);
        let other = prod.partial_trace(&[1]).unwrap();
        assert!(other.max_abs_diff(&sigma) < 1e-12);
    }

    #[test]
    fn eigen_of_paulis() {
        let z = op(gates::pauli_z()).herm_eig().unwrap();
        assert!((z.values[0] + 1.0).abs() < 1e-14 && (z.values[1] - 1.0).abs() < 1e-14);
        let i4 = DenseOperator::identity(&[2, 2]).herm_eig().unwrap();
        assert!(i4.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let x = op(gates::pauli_x()).herm_eig().unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let minus = x.vectors.column(0);
        let plus = x.vectors.column(1);
        assert!((minus[0].norm() - s).abs() < 1e-12 && (minus[0] + minus[1]).norm() < 1e-12);
        assert!((plus[0] - plus[1]).norm() < 1e-12 && (plus[0].norm() - s).abs() < 1e-12);
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let m = op(CMatrix::from_row_slice(
            2,
            2,
            &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)],
        ));
        assert!(matches!(m.herm_eig(), Err(Error::Precondition(_))));
    }

    #[test]
    fn evolve_edge_cases() {
        let z = op(gates::pauli_z());
        let zero = StateVector::basis(2, 0);
        let same = evolve(&zero, &z, 0.0).unwrap();
        assert!((same.inner(&zero) - c(1.0, 0.0)).norm() < 1e-14);
        let t = 0.83;
        let out = evolve(&zero, &z, t).unwrap();
        let want = C64::from_polar(1.0, -t);
        assert!((out.amplitudes()[0] - want).norm() < 1e-12);
        assert!(out.amplitudes()[1].norm() < 1e-12);
        let bad = StateVector::basis(4, 0);
        assert!(matches!(evolve(&bad, &z, 1.0), Err(Error::Argument(_))));
    }

    #[test]
    fn partial_transpose_twice_is_identity() {
        let rho = bell().projector();
        let pt = rho.partial_transpose(&[0]).unwrap();
        // partial transpose of |Φ+><Φ+| is SWAP/2
        assert!((pt.get(1, 2) - c(0.5, 0.0)).norm() < 1e-15);
        assert!(pt.partial_transpose(&[0]).unwrap().max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn permute_factors_swaps_kron_order() {
        let a = op(CMatrix::from_row_slice(
            2,
            2,
            &[c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.)],
        ));
        let b = DenseOperator::new(
            CMatrix::from_fn(3, 3, |r, col| c((r * 3 + col) as f64, 1.0)),
            vec![3],
        )
        .unwrap();
        let ab = a.kron(&b).unwrap();
        let ba = b.kron(&a).unwrap();
        assert_eq!(ab.permute_factors(&[1, 0]).unwrap(), ba);
    }
}
