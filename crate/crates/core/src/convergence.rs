//! Covariance of the preparation error and its convergence rates.
//!
//! For a prepared state `ρ_real` the error is `ε = 𝟙/2^n - ρ_real`. In the
//! orthonormal Pauli basis its coefficients are `-v_i` for `i ≠ 0` and zero
//! for the identity string, so χ is the second-moment matrix of `v` with the
//! identity row and column zeroed.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::haar::{sample_shot, SamplerSpec};
use crate::pauli::{decompose, support_of_index};
use crate::rng::{add_into, tree_reduce, RngStream};
use crate::tensor::{c, qubit_count, CMatrix, DenseOperator, StateVector};

/// Samples handled sequentially inside one leaf of the reduction.
const CHUNK: usize = 32;

/// Largest qubit count for which the full 4^n x 4^n form is stored.
pub const FULL_FORM_MAX_QUBITS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChiBasis {
    /// Orthonormal Pauli strings, index in base-4 order.
    Pauli,
    /// Matrix units `|i⟩⟨j|`, index `i*d + j`.
    MatrixUnits,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChiValues {
    Full(DMatrix<f64>),
    Diagonal(Vec<f64>),
}

/// Per-subset aggregate `3^{-|s|} Σ_{supp(i)=s} χ_ii` with its standard
/// error, directly comparable to subset weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetProfile {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiMatrix {
    /// Side length of the matrix.
    pub side: usize,
    pub basis: ChiBasis,
    pub values: ChiValues,
    /// Standard errors of the stored entries (Monte-Carlo only).
    pub stderr: Option<ChiValues>,
    pub sigma_max_stderr: Option<f64>,
    pub subsets: Option<SubsetProfile>,
    /// Shots averaged into each prepared state.
    pub shots: usize,
    /// Monte-Carlo samples; zero for analytic matrices.
    pub samples: usize,
}

impl ChiMatrix {
    pub fn is_full(&self) -> bool {
        matches!(self.values, ChiValues::Full(_))
    }

    /// Largest eigenvalue (full form) or largest entry (diagonal form).
    pub fn sigma_max(&self) -> f64 {
        match &self.values {
            ChiValues::Diagonal(d) => d.iter().copied().fold(0.0, f64::max),
            ChiValues::Full(m) => top_eigen(m).0,
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.values {
            ChiValues::Diagonal(d) => d.iter().sum(),
            ChiValues::Full(m) => m.trace(),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match &self.values {
            ChiValues::Diagonal(d) => d.clone(),
            ChiValues::Full(m) => m.diagonal().iter().copied().collect(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.values {
            ChiValues::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    0.0
                }
            }
            ChiValues::Full(m) => m[(i, j)],
        }
    }

    /// Smallest eigenvalue of the full form.
    pub fn min_eigenvalue(&self) -> f64 {
        match &self.values {
            ChiValues::Diagonal(d) => d.iter().copied().fold(f64::INFINITY, f64::min),
            ChiValues::Full(m) => {
                let sym = (m + m.transpose()) * 0.5;
                SymmetricEigen::new(sym).eigenvalues.min()
            }
        }
    }

    /// CSV of the diagonal: `pauli_index,subset_bitmask,value`.
    pub fn write_diagonal_csv<W: Write>(&self, out: W) -> Result<()> {
        if self.basis != ChiBasis::Pauli {
            return Err(Error::Unsupported("subset labels need the Pauli basis".into()));
        }
        let n = qubit_count(self.side)? / 2;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["pauli_index", "subset_bitmask", "value"])?;
        for (i, v) in self.diagonal().iter().enumerate() {
            wtr.write_record(&[
                i.to_string(),
                support_of_index(n, i).bits().to_string(),
                format!("{v:.17e}"),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Largest eigenvalue and its eigenvector of a symmetrised real matrix.
fn top_eigen(m: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let k = eig.eigenvalues.imax();
    (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect())
}

/// Error vector of one prepared state: Pauli coefficients with the identity
/// component removed.
fn error_vector(spec: &SamplerSpec, nu: usize, stream: RngStream) -> Result<Vec<f64>> {
    let d = spec.dim();
    let mut rho = CMatrix::zeros(d, d);
    for j in 0..nu {
        let psi = sample_shot(spec, stream.child(j as u64))?;
        let a = psi.amplitudes();
        rho += a * a.adjoint();
    }
    rho /= c(nu as f64, 0.0);
    let v = decompose(&DenseOperator::qubits(rho)?)?;
    let mut x = v.coeffs().to_vec();
    x[0] = 0.0;
    Ok(x)
}

struct Moments {
    s1: Vec<f64>,
    s2: Vec<f64>,
    sub1: Vec<f64>,
    sub2: Vec<f64>,
}

fn combine_moments(a: Moments, b: Moments) -> Moments {
    Moments {
        s1: add_into(a.s1, b.s1),
        s2: add_into(a.s2, b.s2),
        sub1: add_into(a.sub1, b.sub1),
        sub2: add_into(a.sub2, b.sub2),
    }
}

fn mean_and_se(s1: f64, s2: f64, count: f64) -> (f64, f64) {
    let mean = s1 / count;
    let var = (s2 / count - mean * mean).max(0.0) * count / (count - 1.0);
    (mean, (var / count).sqrt())
}

/// Monte-Carlo χ for states averaged over `nu` shots.
///
/// Sample `k` uses `stream.child(k)`, and shot `j` within it uses a child of
/// that. With `diag_only` only `⟨v_i²⟩` is stored, which is exact when the
/// sampler is invariant under independent single-qubit twirls.
pub fn chi_monte_carlo(
    spec: &SamplerSpec,
    samples: usize,
    nu: usize,
    stream: RngStream,
    diag_only: bool,
) -> Result<ChiMatrix> {
    spec.validate()?;
    if samples < 2 {
        return Err(Error::arg("χ estimation needs at least two samples"));
    }
    if nu == 0 {
        return Err(Error::arg("shot count must be positive"));
    }
    if diag_only && !spec.twirl_symmetric() {
        return Err(Error::Contract(
            "diagonal χ requires a sampler with single-qubit twirl symmetry".into(),
        ));
    }
    if !diag_only && spec.n > FULL_FORM_MAX_QUBITS {
        return Err(Error::Unsupported(format!(
            "full χ is limited to {FULL_FORM_MAX_QUBITS} qubits"
        )));
    }
    let n = spec.n;
    let side = 1usize << (2 * n);
    let n_sub = 1usize << n;
    let chunks = samples.div_ceil(CHUNK);
    let supports: Vec<usize> = (0..side).map(|i| support_of_index(n, i).bits() as usize).collect();
    let sample = |k: usize| error_vector(spec, nu, stream.child(k as u64));
    let count = samples as f64;

    if diag_only {
        let acc = tree_reduce(
            chunks,
            |ch| {
                let mut m = Moments {
                    s1: vec![0.0; side],
                    s2: vec![0.0; side],
                    sub1: vec![0.0; n_sub],
                    sub2: vec![0.0; n_sub],
                };
                let mut agg = vec![0.0; n_sub];
                for k in ch * CHUNK..((ch + 1) * CHUNK).min(samples) {
                    let x = sample(k).expect("validated sampler");
                    agg.iter_mut().for_each(|a| *a = 0.0);
                    for (i, xi) in x.iter().enumerate() {
                        let q = xi * xi;
                        m.s1[i] += q;
                        m.s2[i] += q * q;
                        agg[supports[i]] += q;
                    }
                    for (s, a) in agg.iter().enumerate() {
                        let a = a / 3f64.powi(s.count_ones() as i32);
                        m.sub1[s] += a;
                        m.sub2[s] += a * a;
                    }
                }
                m
            },
            combine_moments,
        )
        .expect("at least one chunk");
        let (mean, se): (Vec<f64>, Vec<f64>) = acc
            .s1
            .iter()
            .zip(&acc.s2)
            .map(|(&a, &b)| mean_and_se(a, b, count))
            .unzip();
        let (sub_mean, sub_se): (Vec<f64>, Vec<f64>) = acc
            .sub1
            .iter()
            .zip(&acc.sub2)
            .map(|(&a, &b)| mean_and_se(a, b, count))
            .unzip();
        let top = (0..side).max_by(|&a, &b| mean[a].total_cmp(&mean[b])).unwrap_or(0);
        return Ok(ChiMatrix {
            side,
            basis: ChiBasis::Pauli,
            sigma_max_stderr: Some(se[top]),
            values: ChiValues::Diagonal(mean),
            stderr: Some(ChiValues::Diagonal(se)),
            subsets: Some(SubsetProfile {
                mean: sub_mean,
                stderr: sub_se,
            }),
            shots: nu,
            samples,
        });
    }

    // full form: accumulate x x^T and its entrywise square
    let acc = tree_reduce(
        chunks,
        |ch| {
            let mut s1 = vec![0.0; side * side];
            let mut s2 = vec![0.0; side * side];
            for k in ch * CHUNK..((ch + 1) * CHUNK).min(samples) {
                let x = sample(k).expect("validated sampler");
                for i in 1..side {
                    let xi = x[i];
                    if xi == 0.0 {
                        continue;
                    }
                    let row = i * side;
                    for j in i..side {
                        let p = xi * x[j];
                        s1[row + j] += p;
                        s2[row + j] += p * p;
                    }
                }
            }
            (s1, s2)
        },
        |a, b| (add_into(a.0, b.0), add_into(a.1, b.1)),
    )
    .expect("at least one chunk");
    let mut mean = DMatrix::<f64>::zeros(side, side);
    let mut se = DMatrix::<f64>::zeros(side, side);
    for i in 0..side {
        for j in i..side {
            let (m, e) = mean_and_se(acc.0[i * side + j], acc.1[i * side + j], count);
            mean[(i, j)] = m;
            mean[(j, i)] = m;
            se[(i, j)] = e;
            se[(j, i)] = e;
        }
    }
    // standard error of σ_max from the spread of (u·x)² along the top
    // eigenvector, regenerating the same samples
    let (_, u) = top_eigen(&mean);
    let proj = tree_reduce(
        chunks,
        |ch| {
            let mut s = [0.0f64; 2];
            for k in ch * CHUNK..((ch + 1) * CHUNK).min(samples) {
                let x = sample(k).expect("validated sampler");
                let y: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
                s[0] += y * y;
                s[1] += y.powi(4);
            }
            s
        },
        |a, b| [a[0] + b[0], a[1] + b[1]],
    )
    .expect("at least one chunk");
    let (_, sigma_se) = mean_and_se(proj[0], proj[1], count);
    Ok(ChiMatrix {
        side,
        basis: ChiBasis::Pauli,
        values: ChiValues::Full(mean),
        stderr: Some(ChiValues::Full(se)),
        sigma_max_stderr: Some(sigma_se),
        subsets: None,
        shots: nu,
        samples,
    })
}

/// Exact χ of Haar states in dimension `d`, in the matrix-unit basis:
/// `δ_ik δ_jl/(νd(d+1)) - δ_ij δ_kl/(νd²(d+1))`.
pub fn haar_chi_analytic(d: usize, nu: usize) -> Result<ChiMatrix> {
    if d == 0 || d > 64 {
        return Err(Error::arg(format!("dimension {d} outside 1..=64")));
    }
    if nu == 0 {
        return Err(Error::arg("shot count must be positive"));
    }
    let (df, nf) = (d as f64, nu as f64);
    let a = 1.0 / (nf * df * (df + 1.0));
    let b = 1.0 / (nf * df * df * (df + 1.0));
    let side = d * d;
    let mut m = DMatrix::<f64>::zeros(side, side);
    for i in 0..d {
        for k in 0..d {
            m[(i * d + i, k * d + k)] -= b;
        }
    }
    for idx in 0..side {
        m[(idx, idx)] += a;
    }
    Ok(ChiMatrix {
        side,
        basis: ChiBasis::MatrixUnits,
        values: ChiValues::Full(m),
        stderr: None,
        sigma_max_stderr: None,
        subsets: None,
        shots: nu,
        samples: 0,
    })
}

/// Exact Pauli-diagonal χ of independent Haar `ell`-qubit groups: the
/// moment matrix `M^{⊗r}` with the identity entry removed, divided by ν.
pub fn lbit_chi_analytic(n: usize, ell: usize, nu: usize) -> Result<ChiMatrix> {
    if ell == 0 || !n.is_multiple_of(ell) {
        return Err(Error::arg(format!("group size {ell} does not divide {n}")));
    }
    let g = 1usize << (2 * ell);
    let lf = (1u64 << ell) as f64;
    let group: Vec<f64> = (0..g)
        .map(|i| if i == 0 { 1.0 / lf } else { 1.0 / (lf * (lf + 1.0)) })
        .collect();
    let mut diag = vec![1.0];
    for _ in 0..n / ell {
        diag = diag.iter().flat_map(|&a| group.iter().map(move |&b| a * b)).collect();
    }
    diag[0] = 0.0;
    diag.iter_mut().for_each(|x| *x /= nu as f64);
    Ok(ChiMatrix {
        side: diag.len(),
        basis: ChiBasis::Pauli,
        values: ChiValues::Diagonal(diag),
        stderr: None,
        sigma_max_stderr: None,
        subsets: None,
        shots: nu,
        samples: 0,
    })
}

/// `1/(ν d^n (d^ℓ + 1))` for independent Haar groups of `ell` qudits.
pub fn thm1_rate(n: usize, ell: usize, nu: usize, d: usize) -> Result<f64> {
    if ell == 0 || n == 0 || !n.is_multiple_of(ell) {
        return Err(Error::arg(format!("group size {ell} does not divide {n}")));
    }
    if nu == 0 || d < 2 {
        return Err(Error::arg("need nu >= 1 and d >= 2"));
    }
    let df = d as f64;
    Ok(1.0 / (nu as f64 * df.powi(n as i32) * (df.powi(ell as i32) + 1.0)))
}

/// `max_s w_s / (ν 2^{n-ℓ})` for `n/ℓ` copies of a fixed `ℓ`-qubit state
/// followed by independent single-qubit rotations.
pub fn thm3_rate(state: &StateVector, nu: usize, n: usize) -> Result<f64> {
    let ell = state
        .num_qubits()
        .ok_or_else(|| Error::arg("state dimension is not a power of two"))?;
    if ell == 0 || !n.is_multiple_of(ell) {
        return Err(Error::arg(format!("state on {ell} qubits does not tile {n}")));
    }
    if nu == 0 {
        return Err(Error::arg("shot count must be positive"));
    }
    let w = crate::pauli::state_weights(state)?;
    Ok(w.max_nonempty().1 / (nu as f64 * (1u64 << (n - ell)) as f64))
}

/// `(2^{k0+1} - 1) / (ν 2^n 3^{k0+1})` for twirled `k0`-uniform states.
pub fn thm4_bound(n: usize, k0: usize, nu: usize) -> f64 {
    let k = (k0 + 1) as i32;
    (2f64.powi(k) - 1.0) / (nu as f64 * 2f64.powi(n as i32) * 3f64.powi(k))
}

/// Cauchy-Schwarz bound `√(σ_max) ‖P‖₂` on the error of one component.
pub fn error_bound(p_norm: f64, chi: &ChiMatrix) -> f64 {
    (chi.sigma_max().max(0.0) * p_norm * p_norm).sqrt()
}

/// Measured and predicted convergence of one preparation strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub sigma_max: f64,
    pub stderr: f64,
    pub analytic_rate: Option<f64>,
    pub bound: Option<f64>,
    pub nu: usize,
}

impl RateReport {
    pub fn from_chi(chi: &ChiMatrix) -> Self {
        Self {
            sigma_max: chi.sigma_max(),
            stderr: chi.sigma_max_stderr.unwrap_or(0.0),
            analytic_rate: None,
            bound: None,
            nu: chi.shots,
        }
    }
}
