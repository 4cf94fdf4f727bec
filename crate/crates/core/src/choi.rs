//! Choi matrices of qubit channels.
//!
//! Legs are ordered inputs first, then outputs, one qubit per factor. The
//! raw form is `Σ |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`; the measurement form is its partial
//! transpose on the input legs and satisfies `Tr(M (ρ ⊗ O)) = Tr(O Φ(ρ))`.

use crate::error::{Error, Result};
use crate::fidelity::uhlmann;
use crate::pauli::Subset;
use crate::tensor::{c, gates, CMatrix, CVector, DenseOperator, C64};

/// Tolerance on trace preservation and positivity checks.
pub const CHANNEL_TOL: f64 = 1e-9;

/// Tolerance on double stochasticity before φ extraction.
pub const UNITAL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    Raw,
    Measurement,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    n: usize,
    matrix: DenseOperator,
    convention: Convention,
}

fn qubit_op(m: CMatrix, n: usize) -> DenseOperator {
    DenseOperator::new(m, vec![2; n]).expect("qubit operator dimension")
}

impl ChoiMatrix {
    pub fn from_matrix(n: usize, m: CMatrix, convention: Convention) -> Result<Self> {
        if n == 0 || m.nrows() != 1 << (2 * n) {
            return Err(Error::arg(format!(
                "Choi matrix for {n} qubits must have side {}",
                1usize << (2 * n)
            )));
        }
        let matrix = DenseOperator::new(m, vec![2; 2 * n])?;
        Ok(Self {
            n,
            matrix,
            convention,
        })
    }

    fn n_of(dim: usize) -> Result<usize> {
        let n = crate::tensor::qubit_count(dim)?;
        if n == 0 {
            return Err(Error::arg("channel acts on zero qubits"));
        }
        Ok(n)
    }

    pub fn from_unitary(u: &DenseOperator) -> Result<Self> {
        let d = u.dim();
        let n = Self::n_of(d)?;
        let dev = (u.matrix().adjoint() * u.matrix() - CMatrix::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > 1e-10 {
            return Err(Error::pre(format!("operator is not unitary (deviation {dev:.3e})")));
        }
        Self::from_kraus_unchecked(n, std::slice::from_ref(u))
    }

    pub fn from_kraus(kraus: &[DenseOperator]) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::arg("empty Kraus list"))?;
        let d = first.dim();
        let n = Self::n_of(d)?;
        if kraus.iter().any(|k| k.dim() != d) {
            return Err(Error::arg("Kraus operators have different dimensions"));
        }
        let mut sum = CMatrix::zeros(d, d);
        for k in kraus {
            sum += k.matrix().adjoint() * k.matrix();
        }
        let dev = (sum - CMatrix::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > CHANNEL_TOL {
            return Err(Error::pre(format!(
                "Kraus operators are not complete (deviation {dev:.3e})"
            )));
        }
        Self::from_kraus_unchecked(n, kraus)
    }

    fn from_kraus_unchecked(n: usize, kraus: &[DenseOperator]) -> Result<Self> {
        let d = 1 << n;
        let mut raw = CMatrix::zeros(d * d, d * d);
        for k in kraus {
            // |Ω⟩ = Σ_i |i⟩ ⊗ A|i⟩
            let omega = CVector::from_fn(d * d, |idx, _| k.get(idx % d, idx / d));
            raw += &omega * omega.adjoint();
        }
        Self::from_matrix(n, raw, Convention::Raw)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_unitary(&DenseOperator::identity(&vec![2; n])).expect("identity is unitary")
    }

    /// Channel sending every state to the maximally mixed state.
    pub fn depolarizing(n: usize) -> Self {
        let d = 1 << n;
        let raw = CMatrix::identity(d * d, d * d) / c(d as f64, 0.0);
        Self::from_matrix(n, raw, Convention::Raw).expect("valid dimension")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn matrix(&self) -> &DenseOperator {
        &self.matrix
    }

    fn input_legs(&self) -> Vec<usize> {
        (0..self.n).collect()
    }

    pub fn to_convention(&self, convention: Convention) -> Self {
        if convention == self.convention {
            return self.clone();
        }
        let matrix = self
            .matrix
            .partial_transpose(&self.input_legs())
            .expect("input legs are in range");
        Self {
            n: self.n,
            matrix,
            convention,
        }
    }

    pub fn to_raw(&self) -> Self {
        self.to_convention(Convention::Raw)
    }

    pub fn to_measurement(&self) -> Self {
        self.to_convention(Convention::Measurement)
    }

    /// Trace over the output legs and over the input legs, in that order.
    /// Both are independent of the convention.
    pub fn marginals(&self) -> (DenseOperator, DenseOperator) {
        let ins: Vec<usize> = (0..self.n).collect();
        let outs: Vec<usize> = (self.n..2 * self.n).collect();
        (
            self.matrix.partial_trace(&ins).expect("in range"),
            self.matrix.partial_trace(&outs).expect("in range"),
        )
    }

    /// Largest deviation of either marginal from the identity.
    pub fn stochasticity_deviation(&self) -> f64 {
        let id = DenseOperator::identity(&vec![2; self.n]);
        let (a, b) = self.marginals();
        a.max_abs_diff(&id).max(b.max_abs_diff(&id))
    }

    /// Hermitian, positive, trace `2^n` and trace preserving.
    pub fn validate(&self) -> Result<()> {
        let raw = self.to_raw();
        let dev = raw.matrix.hermitian_deviation();
        if dev > 1e-10 {
            return Err(Error::Validation(format!(
                "Choi matrix is not Hermitian (deviation {dev:.3e})"
            )));
        }
        let lo = raw.matrix.herm_eig()?.min();
        if lo < -CHANNEL_TOL {
            return Err(Error::Validation(format!(
                "Choi matrix is not positive (min eigenvalue {lo:.3e})"
            )));
        }
        let tr = raw.matrix.trace();
        let d = (1usize << self.n) as f64;
        if (tr - c(d, 0.0)).norm() > CHANNEL_TOL {
            return Err(Error::Validation(format!("Choi trace {tr} differs from {d}")));
        }
        let (tp, _) = raw.marginals();
        let tp_dev = tp.max_abs_diff(&DenseOperator::identity(&vec![2; self.n]));
        if tp_dev > CHANNEL_TOL {
            return Err(Error::Validation(format!(
                "channel is not trace preserving (deviation {tp_dev:.3e})"
            )));
        }
        Ok(())
    }

    /// Raw entry `⟨i a| raw |j b⟩` for input indices i, j and output a, b.
    fn raw_entry(&self, i: usize, a: usize, j: usize, b: usize) -> C64 {
        let d = 1 << self.n;
        match self.convention {
            Convention::Raw => self.matrix.get(i * d + a, j * d + b),
            Convention::Measurement => self.matrix.get(j * d + a, i * d + b),
        }
    }

    /// `Φ(ρ)`.
    pub fn apply(&self, rho: &DenseOperator) -> Result<DenseOperator> {
        let d = 1 << self.n;
        if rho.dim() != d {
            return Err(Error::arg(format!(
                "state dimension {} does not match channel dimension {d}",
                rho.dim()
            )));
        }
        let mut out = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let r = rho.get(i, j);
                if r == c(0.0, 0.0) {
                    continue;
                }
                for a in 0..d {
                    for b in 0..d {
                        out[(a, b)] += r * self.raw_entry(i, a, j, b);
                    }
                }
            }
        }
        Ok(qubit_op(out, self.n))
    }

    /// `Tr(O Φ(ρ))` evaluated as `Tr(M (ρ ⊗ O))`.
    pub fn expectation(&self, obs: &DenseOperator, rho: &DenseOperator) -> Result<f64> {
        let d = 1 << self.n;
        if rho.dim() != d || obs.dim() != d {
            return Err(Error::arg("operator dimension does not match channel"));
        }
        let mut acc = c(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                let r = rho.get(j, i);
                if r == c(0.0, 0.0) {
                    continue;
                }
                for a in 0..d {
                    for b in 0..d {
                        // M[(i a),(j b)] ρ_ji O_ba
                        acc += self.raw_entry(j, a, i, b) * r * obs.get(b, a);
                    }
                }
            }
        }
        Ok(acc.re)
    }

    /// Channel induced on `s` when the other qubits start maximally mixed:
    /// the partial trace over their input and output legs, divided by
    /// `2^{n-|s|}`.
    pub fn reduce(&self, s: Subset) -> Result<Self> {
        let qs = s.qubits();
        if qs.is_empty() {
            return Err(Error::arg("reduction onto an empty subset"));
        }
        if let Some(&q) = qs.iter().find(|&&q| q >= self.n) {
            return Err(Error::arg(format!("qubit {q} out of range for {} qubits", self.n)));
        }
        let mut keep = qs.clone();
        keep.extend(qs.iter().map(|q| q + self.n));
        let traced = self.n - qs.len();
        let reduced = self.matrix.partial_trace(&keep)?;
        let scaled = reduced.scale(c(1.0 / (1u64 << traced) as f64, 0.0));
        Ok(Self {
            n: qs.len(),
            matrix: scaled,
            convention: self.convention,
        })
    }

    /// The nine `φ_ij` of a doubly stochastic single-qubit channel.
    pub fn phi_params(&self) -> Result<PhiParams> {
        if self.n != 1 {
            return Err(Error::arg("φ parameters need a single-qubit channel"));
        }
        let dev = self.stochasticity_deviation();
        if dev > UNITAL_TOL {
            return Err(Error::Validation(format!(
                "reduced channel is not doubly stochastic (deviation {dev:.3e})"
            )));
        }
        let m = self.to_measurement();
        let mut phi = [[0.0; 3]; 3];
        for (i, row) in phi.iter_mut().enumerate() {
            for (j, val) in row.iter_mut().enumerate() {
                let p = gates::pauli(i as u8 + 1).kronecker(&gates::pauli(j as u8 + 1));
                *val = m.matrix.trace_product(&qubit_op(p, 2)).re / 4.0;
            }
        }
        Ok(PhiParams { phi })
    }

    /// Apply a single-qubit channel to qubit `q` of a larger state.
    pub fn apply_on_qubit(&self, rho: &DenseOperator, q: usize) -> Result<DenseOperator> {
        if self.n != 1 {
            return Err(Error::arg("apply_on_qubit needs a single-qubit channel"));
        }
        let nq = crate::tensor::qubit_count(rho.dim())?;
        if q >= nq {
            return Err(Error::arg(format!("qubit {q} out of range for {nq} qubits")));
        }
        let d = rho.dim();
        let bit = 1usize << (nq - 1 - q);
        let mut blocks = [[[[c(0.0, 0.0); 2]; 2]; 2]; 2];
        for (i, bi) in blocks.iter_mut().enumerate() {
            for (j, bij) in bi.iter_mut().enumerate() {
                for (a, ba) in bij.iter_mut().enumerate() {
                    for (b, v) in ba.iter_mut().enumerate() {
                        *v = self.raw_entry(i, a, j, b);
                    }
                }
            }
        }
        let mut out = CMatrix::zeros(d, d);
        for r in 0..d {
            let i = usize::from(r & bit != 0);
            let r0 = r & !bit;
            for col in 0..d {
                let x = rho.get(r, col);
                if x == c(0.0, 0.0) {
                    continue;
                }
                let j = usize::from(col & bit != 0);
                let c0 = col & !bit;
                for a in 0..2 {
                    for b in 0..2 {
                        out[(r0 | (a * bit), c0 | (b * bit))] += blocks[i][j][a][b] * x;
                    }
                }
            }
        }
        Ok(qubit_op(out, nq))
    }
}

/// `φ_ij` in `M = ½ 𝟙 + Σ φ_ij σ_i ⊗ σ_j` (unnormalised Paulis, i on the
/// input leg).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiParams {
    pub phi: [[f64; 3]; 3],
}

impl PhiParams {
    pub fn identity() -> Self {
        Self {
            phi: [[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]],
        }
    }

    /// Measurement-form Choi matrix with these parameters.
    pub fn to_choi(&self) -> ChoiMatrix {
        let mut m = CMatrix::identity(4, 4) / c(2.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                let p = gates::pauli(i as u8 + 1).kronecker(&gates::pauli(j as u8 + 1));
                m += p * c(self.phi[i][j], 0.0);
            }
        }
        ChoiMatrix::from_matrix(1, m, Convention::Measurement).expect("4x4")
    }

    /// Image of `σ_i` is `Σ_j 2 φ_ij σ_j`.
    pub fn transfer(&self, i: usize, j: usize) -> f64 {
        2.0 * self.phi[i][j]
    }

    pub fn max_abs_diff(&self, other: &PhiParams) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.phi[i][j] - other.phi[i][j]).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessFidelity {
    /// Uhlmann fidelity of the trace-normalised Choi states.
    pub fidelity: f64,
    /// Average gate fidelity `(2^n F + 1)/(2^n + 1)`.
    pub average: f64,
}

pub fn process_fidelity(a: &ChoiMatrix, b: &ChoiMatrix) -> Result<ProcessFidelity> {
    if a.n != b.n {
        return Err(Error::arg("process fidelity of channels on different qubit counts"));
    }
    let d = (1u64 << a.n) as f64;
    let norm = |x: &ChoiMatrix| x.to_raw().matrix.scale(c(1.0 / d, 0.0));
    let fidelity = uhlmann(&norm(a), &norm(b))?;
    Ok(ProcessFidelity {
        fidelity,
        average: (d * fidelity + 1.0) / (d + 1.0),
    })
}
