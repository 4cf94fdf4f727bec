//! Random-state samplers and exact Haar moments.

use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{tree_reduce, RngStream};
use crate::tensor::{c, CMatrix, CVector, DenseOperator, StateVector, C64};

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state of dimension `d`.
pub fn haar_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<StateVector> {
    if d == 0 {
        return Err(Error::arg("Haar state needs d >= 1"));
    }
    // a Gaussian vector is zero with probability zero, so this cannot fail
    StateVector::normalized(CVector::from_fn(d, |_, _| complex_gaussian(rng)))
}

/// Haar-random 2x2 unitary: Gram-Schmidt on a complex Gaussian matrix, which
/// is QR with a positive diagonal in R.
pub fn haar_unitary_2x2<R: Rng + ?Sized>(rng: &mut R) -> Matrix2<C64> {
    let a0 = [complex_gaussian(rng), complex_gaussian(rng)];
    let a1 = [complex_gaussian(rng), complex_gaussian(rng)];
    let n0 = (a0[0].norm_sqr() + a0[1].norm_sqr()).sqrt();
    let q0 = [a0[0] / n0, a0[1] / n0];
    let proj = q0[0].conj() * a1[0] + q0[1].conj() * a1[1];
    let b = [a1[0] - proj * q0[0], a1[1] - proj * q0[1]];
    let n1 = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
    Matrix2::new(q0[0], b[0] / n1, q0[1], b[1] / n1)
}

/// Haar-random `d x d` unitary by modified Gram-Schmidt on Gaussian columns.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<DenseOperator> {
    if d == 0 || d > crate::tensor::MAX_DIM {
        return Err(Error::arg(format!("unitary dimension {d} out of range")));
    }
    let mut q = CMatrix::from_fn(d, d, |_, _| complex_gaussian(rng));
    for k in 0..d {
        for j in 0..k {
            let proj = q.column(j).dotc(&q.column(k));
            let qj = q.column(j).clone_owned();
            q.column_mut(k).axpy(-proj, &qj, c(1.0, 0.0));
        }
        let norm = q.column(k).norm();
        q.column_mut(k).unscale_mut(norm);
    }
    DenseOperator::from_matrix(q)
}

/// Independent Haar 2x2 unitaries, one per qubit.
pub fn random_single_qubit_rotations<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Matrix2<C64>> {
    (0..n).map(|_| haar_unitary_2x2(rng)).collect()
}

/// Tensor product of per-qubit 2x2 matrices, qubit 0 leftmost.
pub fn rotations_operator(us: &[Matrix2<C64>]) -> Result<DenseOperator> {
    let mut m = CMatrix::identity(1, 1);
    for u in us {
        m = m.kronecker(&CMatrix::from_iterator(2, 2, u.iter().copied()));
    }
    DenseOperator::qubits(m)
}

/// Built-in classically correlated samplers.
#[derive(Clone, Debug, PartialEq)]
pub enum CorrelatedKind {
    /// One Haar `ell`-qubit state per shot, repeated on every group.
    IdenticalGroups { ell: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum SamplerKind {
    /// Product of independent Haar states on consecutive groups of `ell`.
    HaarLbit { ell: usize },
    /// A fixed state followed by independent random single-qubit rotations.
    FixedRotated { base: StateVector },
    Correlated(CorrelatedKind),
}

/// Distribution of preparation states on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerSpec {
    pub n: usize,
    pub kind: SamplerKind,
}

fn check_groups(n: usize, ell: usize) -> Result<()> {
    if ell == 0 || n == 0 || !n.is_multiple_of(ell) {
        return Err(Error::Spec(format!(
            "group size {ell} must be positive and divide n = {n}"
        )));
    }
    Ok(())
}

impl SamplerSpec {
    pub fn haar_lbit(n: usize, ell: usize) -> Result<Self> {
        let spec = Self {
            n,
            kind: SamplerKind::HaarLbit { ell },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fixed_rotated(base: StateVector) -> Result<Self> {
        let n = base
            .num_qubits()
            .ok_or_else(|| Error::Spec("base state dimension is not a power of two".into()))?;
        Ok(Self {
            n,
            kind: SamplerKind::FixedRotated { base },
        })
    }

    pub fn identical_groups(n: usize, ell: usize) -> Result<Self> {
        let spec = Self {
            n,
            kind: SamplerKind::Correlated(CorrelatedKind::IdenticalGroups { ell }),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            SamplerKind::HaarLbit { ell } => check_groups(self.n, *ell),
            SamplerKind::Correlated(CorrelatedKind::IdenticalGroups { ell }) => {
                check_groups(self.n, *ell)
            }
            SamplerKind::FixedRotated { base } => {
                if base.dim() != 1 << self.n {
                    Err(Error::Spec(format!(
                        "base state dimension {} does not match n = {}",
                        base.dim(),
                        self.n
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Whether the distribution is invariant under independent
    /// single-qubit unitaries, which makes χ diagonal in the Pauli basis.
    pub fn twirl_symmetric(&self) -> bool {
        !matches!(self.kind, SamplerKind::Correlated(_))
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }
}

/// Draw one preparation state.
pub fn sample_state<R: Rng + ?Sized>(spec: &SamplerSpec, rng: &mut R) -> Result<StateVector> {
    spec.validate()?;
    match &spec.kind {
        SamplerKind::HaarLbit { ell } => {
            let groups = (0..spec.n / ell)
                .map(|_| haar_state(1 << ell, rng))
                .collect::<Result<Vec<_>>>()?;
            StateVector::product(&groups)
        }
        SamplerKind::FixedRotated { base } => {
            let mut psi = base.clone();
            for q in 0..spec.n {
                psi.apply_single_qubit(q, &haar_unitary_2x2(rng));
            }
            Ok(psi)
        }
        SamplerKind::Correlated(CorrelatedKind::IdenticalGroups { ell }) => {
            let g = haar_state(1 << ell, rng)?;
            StateVector::product(&vec![g; spec.n / ell])
        }
    }
}

/// Preparation state for one shot, drawn from its own stream.
pub fn sample_shot(spec: &SamplerSpec, stream: RngStream) -> Result<StateVector> {
    sample_state(spec, &mut stream.rng())
}

/// `(1/ν) Σ_j |ψ_j⟩⟨ψ_j|`, shot `j` drawn from `stream.child(j)`.
pub fn ensemble_average(spec: &SamplerSpec, nu: usize, stream: RngStream) -> Result<DenseOperator> {
    if nu == 0 {
        return Err(Error::arg("ensemble average needs at least one shot"));
    }
    spec.validate()?;
    let d = spec.dim();
    let sum = tree_reduce(
        nu,
        |j| {
            let psi = sample_shot(spec, stream.child(j as u64)).expect("validated sampler");
            let a = psi.amplitudes();
            a * a.adjoint()
        },
        |a, b| a + b,
    )
    .unwrap_or_else(|| CMatrix::zeros(d, d));
    DenseOperator::qubits(sum / c(nu as f64, 0.0))
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// `E[Π |z_i|^{2 r_i}]` over Haar states in dimension `d`:
/// `Π r_i! (d-1)! / (d+k-1)!`.
pub fn haar_moment_complex(d: usize, r: &[u32]) -> Result<f64> {
    if d == 0 || r.len() > d {
        return Err(Error::arg(format!(
            "multi-index of length {} does not fit dimension {d}",
            r.len()
        )));
    }
    let k: u32 = r.iter().sum();
    let ln = r.iter().map(|&x| ln_factorial(x)).sum::<f64>() + ln_factorial(d as u32 - 1)
        - ln_factorial(d as u32 + k - 1);
    Ok(ln.exp())
}

/// `E[Π x_i^{2 s_i}]` over uniformly random real unit vectors in dimension
/// `d`, as the reciprocal of a sum over compositions `r` of `k = Σ s_i`
/// into `d` parts.
pub fn haar_moment_real(d: usize, s: &[u32]) -> Result<f64> {
    if d == 0 || s.len() > d {
        return Err(Error::arg(format!(
            "multi-index of length {} does not fit dimension {d}",
            s.len()
        )));
    }
    let k: u32 = s.iter().sum();
    let fixed = ln_factorial(k) + s.iter().map(|&x| ln_factorial(x) - ln_factorial(2 * x)).sum::<f64>();
    let mut total = 0.0;
    let mut parts = vec![0u32; d];
    compositions(k, 0, &mut parts, &mut |r| {
        let ln = r
            .iter()
            .map(|&x| ln_factorial(2 * x) - 2.0 * ln_factorial(x))
            .sum::<f64>();
        total += (fixed + ln).exp();
    });
    Ok(1.0 / total)
}

fn compositions(left: u32, pos: usize, parts: &mut [u32], visit: &mut impl FnMut(&[u32])) {
    if pos + 1 == parts.len() {
        parts[pos] = left;
        visit(parts);
        return;
    }
    for x in 0..=left {
        parts[pos] = x;
        compositions(left - x, pos + 1, parts, visit);
    }
}
