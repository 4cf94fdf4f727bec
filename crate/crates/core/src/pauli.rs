//! Orthonormal Pauli-string basis and the subset-weight hierarchy.
//!
//! A string on `n` qubits is a base-4 number whose most significant digit
//! belongs to qubit 0. Digits 0..=3 stand for I, X, Y, Z, each scaled by
//! 1/sqrt(2) so that `Tr(σ_i σ_j) = δ_ij`.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::tensor::{c, gates, qubit_count, CMatrix, DenseOperator, StateVector, C64};

/// Largest qubit count handled by the Pauli transforms.
pub const MAX_QUBITS: usize = 12;

/// Imaginary residue of `Tr(ρσ)` tolerated before the input is rejected.
pub const IMAG_TOL: f64 = 1e-8;

/// Set of qubits stored as a bitmask; bit `q` marks qubit `q`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset(pub u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_qubits(qubits: &[usize]) -> Self {
        Subset(qubits.iter().fold(0, |m, &q| m | (1 << q)))
    }

    pub fn full(n: usize) -> Self {
        Subset(((1u64 << n) - 1) as u32)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, q: usize) -> bool {
        self.0 >> q & 1 == 1
    }

    pub fn qubits(self) -> Vec<usize> {
        (0..32).filter(|&q| self.contains(q)).collect()
    }

    /// Qubits of `0..n` not in the set.
    pub fn complement(self, n: usize) -> Self {
        Subset(!self.0 & Subset::full(n).0)
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.qubits().iter().map(|q| q.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Pauli string as one digit per qubit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    digits: Vec<u8>,
}

impl PauliString {
    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if let Some(d) = digits.iter().find(|&&d| d > 3) {
            return Err(Error::arg(format!("Pauli digit {d} out of range 0..=3")));
        }
        Ok(Self { digits })
    }

    /// Parse a digit string such as `"21000"`.
    pub fn parse(s: &str) -> Result<Self> {
        let digits = s
            .chars()
            .map(|ch| {
                match ch {
                    'I' => Some(0),
                    'X' => Some(1),
                    'Y' => Some(2),
                    'Z' => Some(3),
                    _ => ch.to_digit(4).map(|d| d as u8),
                }
                .ok_or_else(|| Error::arg(format!("invalid Pauli digit '{ch}'")))
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(digits)
    }

    pub fn from_index(n: usize, index: usize) -> Self {
        let digits = (0..n)
            .map(|q| ((index >> (2 * (n - 1 - q))) & 3) as u8)
            .collect();
        Self { digits }
    }

    pub fn n(&self) -> usize {
        self.digits.len()
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn index(&self) -> usize {
        self.digits.iter().fold(0, |acc, &d| acc * 4 + d as usize)
    }

    /// Qubits carrying a non-identity factor.
    pub fn support(&self) -> Subset {
        support_of_index(self.n(), self.index())
    }

    /// Normalised operator `σ_i`.
    pub fn operator(&self) -> DenseOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = CMatrix::identity(1, 1);
        for &d in &self.digits {
            m = m.kronecker(&(gates::pauli(d) * c(s, 0.0)));
        }
        DenseOperator::qubits(m).expect("Pauli string dimension is a power of two")
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Support bitmask of the string with the given base-4 index.
pub fn support_of_index(n: usize, index: usize) -> Subset {
    let mut mask = 0u32;
    for q in 0..n {
        if (index >> (2 * (n - 1 - q))) & 3 != 0 {
            mask |= 1 << q;
        }
    }
    Subset(mask)
}

/// Real coefficients over the Pauli basis, `ρ = Σ v_i σ_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliVector {
    n: usize,
    coeffs: Vec<f64>,
}

impl PauliVector {
    pub fn new(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::DimensionLimit {
                dim: 1 << n,
                limit: 1 << MAX_QUBITS,
            });
        }
        if coeffs.len() != 1 << (2 * n) {
            return Err(Error::arg(format!(
                "expected {} Pauli coefficients for n = {n}, got {}",
                1usize << (2 * n),
                coeffs.len()
            )));
        }
        Ok(Self { n, coeffs })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            coeffs: vec![0.0; 1 << (2 * n)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn get(&self, s: &PauliString) -> f64 {
        self.coeffs[s.index()]
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &PauliVector) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist_sq(&self, other: &PauliVector) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

// Flat positions of a 2^n x 2^n matrix arranged so that qubit q's (row, col)
// bit pair forms base-4 digit q of the index.
fn spread(x: usize) -> usize {
    let mut out = 0;
    let mut b = 0;
    let mut x = x;
    while x != 0 {
        out |= (x & 1) << (2 * b);
        x >>= 1;
        b += 1;
    }
    out
}

fn interleave(mat: &CMatrix) -> Vec<C64> {
    let d = mat.nrows();
    let sp: Vec<usize> = (0..d).map(spread).collect();
    let mut buf = vec![c(0.0, 0.0); d * d];
    for r in 0..d {
        for col in 0..d {
            buf[(sp[r] << 1) | sp[col]] = mat[(r, col)];
        }
    }
    buf
}

fn deinterleave(buf: &[C64], d: usize) -> CMatrix {
    let sp: Vec<usize> = (0..d).map(spread).collect();
    CMatrix::from_fn(d, d, |r, col| buf[(sp[r] << 1) | sp[col]])
}

/// In-place per-digit butterfly over a length-4^n buffer.
fn butterfly(buf: &mut [C64], n: usize, f: impl Fn([C64; 4]) -> [C64; 4]) {
    for level in 0..n {
        let stride = 1usize << (2 * level);
        let block = stride * 4;
        for base in (0..buf.len()).step_by(block) {
            for off in 0..stride {
                let i = base + off;
                let x = [
                    buf[i],
                    buf[i + stride],
                    buf[i + 2 * stride],
                    buf[i + 3 * stride],
                ];
                let y = f(x);
                buf[i] = y[0];
                buf[i + stride] = y[1];
                buf[i + 2 * stride] = y[2];
                buf[i + 3 * stride] = y[3];
            }
        }
    }
}

/// Pauli coefficients `Tr(ρσ_i)` of a Hermitian operator via the factorised
/// transform, O(n 4^n).
pub fn decompose(rho: &DenseOperator) -> Result<PauliVector> {
    let n = qubit_count(rho.dim())?;
    if n > MAX_QUBITS {
        return Err(Error::DimensionLimit {
            dim: rho.dim(),
            limit: 1 << MAX_QUBITS,
        });
    }
    let raw = decompose_complex(rho.matrix(), n);
    let worst = raw.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst > IMAG_TOL {
        return Err(Error::DataIntegrity(format!(
            "Pauli coefficient has imaginary part {worst:.3e}; operator is not Hermitian"
        )));
    }
    PauliVector::new(n, raw.into_iter().map(|z| z.re).collect())
}

/// Complex coefficients `Tr(Aσ_i)` for an arbitrary square matrix.
pub(crate) fn decompose_complex(mat: &CMatrix, n: usize) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = c(0.0, 1.0);
    let mut buf = interleave(mat);
    // local digit = 2*row_bit + col_bit
    butterfly(&mut buf, n, |[m00, m01, m10, m11]| {
        [
            (m00 + m11) * s,
            (m01 + m10) * s,
            i * (m01 - m10) * s,
            (m00 - m11) * s,
        ]
    });
    buf
}

/// Pauli coefficients of a pure state without a separate Hermiticity check.
pub fn decompose_state(psi: &StateVector) -> Result<PauliVector> {
    decompose(&psi.projector())
}

/// Inverse of [`decompose`].
pub fn reconstruct(v: &PauliVector) -> DenseOperator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = c(0.0, 1.0);
    let n = v.n;
    let mut buf: Vec<C64> = v.coeffs.iter().map(|&x| c(x, 0.0)).collect();
    butterfly(&mut buf, n, |[y0, y1, y2, y3]| {
        [(y0 + y3) * s, (y1 - i * y2) * s, (y1 + i * y2) * s, (y0 - y3) * s]
    });
    DenseOperator::qubits(deinterleave(&buf, 1 << n)).expect("power-of-two dimension")
}

/// `Tr(ρσ_i)` by explicit traces, one string at a time. Reference only.
pub fn decompose_naive(rho: &DenseOperator) -> Result<PauliVector> {
    let n = qubit_count(rho.dim())?;
    let coeffs = (0..1usize << (2 * n))
        .map(|idx| {
            rho.trace_product(&PauliString::from_index(n, idx).operator())
                .re
        })
        .collect();
    PauliVector::new(n, coeffs)
}

/// Subset weights `w_s = 3^{-|s|} Σ_{supp(i)=s} v_i²`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetWeights {
    n: usize,
    w: Vec<f64>,
}

impl SubsetWeights {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: Subset) -> f64 {
        self.w[s.0 as usize]
    }

    /// Weights indexed by subset bitmask.
    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    /// Largest weight over nonempty subsets.
    pub fn max_nonempty(&self) -> (Subset, f64) {
        let mut best = (Subset(1), f64::NEG_INFINITY);
        for (mask, &w) in self.w.iter().enumerate().skip(1) {
            if w > best.1 {
                best = (Subset(mask as u32), w);
            }
        }
        best
    }

    /// `W_k = Σ_{|s|=k} 3^k w_s` for k = 0..=n; these sum to `Tr(ρ²)`.
    pub fn level_weights(&self) -> Vec<f64> {
        let mut levels = vec![0.0; self.n + 1];
        for (mask, &w) in self.w.iter().enumerate() {
            let k = mask.count_ones();
            levels[k as usize] += 3f64.powi(k as i32) * w;
        }
        levels
    }

    /// Largest weight over subsets of size `k`.
    pub fn max_at_level(&self, k: usize) -> f64 {
        self.w
            .iter()
            .enumerate()
            .filter(|(m, _)| m.count_ones() as usize == k)
            .map(|(_, &w)| w)
            .fold(0.0, f64::max)
    }

    /// CSV with columns `subset_bitmask,size,w_s`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["subset_bitmask", "size", "w_s"])?;
        for (mask, &w) in self.w.iter().enumerate() {
            wtr.write_record(&[
                mask.to_string(),
                mask.count_ones().to_string(),
                format!("{w:.17e}"),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn weights(v: &PauliVector) -> SubsetWeights {
    let n = v.n;
    let mut w = vec![0.0; 1 << n];
    for (idx, &x) in v.coeffs.iter().enumerate() {
        w[support_of_index(n, idx).0 as usize] += x * x;
    }
    for (mask, val) in w.iter_mut().enumerate() {
        *val /= 3f64.powi(mask.count_ones() as i32);
    }
    SubsetWeights { n, w }
}

pub fn state_weights(psi: &StateVector) -> Result<SubsetWeights> {
    Ok(weights(&decompose_state(psi)?))
}
