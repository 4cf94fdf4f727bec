//! Symmetric logarithmic derivatives, Pauli duals, Fisher information and
//! the GHZ phase-readout protocol.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::choi::{ChoiMatrix, PhiParams};
use crate::error::{Error, Result};
use crate::fidelity::PSD_TOL;
use crate::pauli::{decompose, PauliString, PauliVector};
use crate::scramble::ghz;
use crate::tensor::{c, CMatrix, DenseOperator, HermEigen};

/// Pairs with `λ_m + λ_n` below this are left out of the SLD.
pub const SLD_CUTOFF: f64 = 1e-10;

/// Largest GHZ register handled in Pauli space.
pub const MAX_GHZ_QUBITS: usize = 10;

/// Largest state for which the dual route is evaluated.
pub const DUAL_ROUTE_MAX_QUBITS: usize = 2;

/// Finite-difference step for [`sensitivity_proxy`].
pub const DEFAULT_STEP: f64 = 1e-4;

/// Required agreement between the step and half-step proxies.
pub const RICHARDSON_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SldOperator {
    pub matrix: DenseOperator,
    /// Number of eigenvalue pairs `(m, n)` left at zero by the cutoff.
    pub kernel_dim: usize,
}

fn check_state(rho: &DenseOperator) -> Result<HermEigen> {
    let eig = rho.herm_eig()?;
    if eig.min() < -PSD_TOL {
        return Err(Error::pre(format!(
            "state has negative eigenvalue {:.3e}",
            eig.min()
        )));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(Error::pre(format!("state has trace {tr}")));
    }
    Ok(eig)
}

/// Solve `½{L, ρ} = target` in ρ's eigenbasis.
fn solve_anticommutator(eig: &HermEigen, target: &CMatrix) -> (CMatrix, usize) {
    let v = &eig.vectors;
    let t = v.adjoint() * target * v;
    let d = t.nrows();
    let mut kernel = 0;
    let l = CMatrix::from_fn(d, d, |m, n| {
        let s = eig.values[m] + eig.values[n];
        if s > SLD_CUTOFF {
            t[(m, n)] * (2.0 / s)
        } else {
            kernel += 1;
            c(0.0, 0.0)
        }
    });
    (v * l * v.adjoint(), kernel)
}

fn sld_with(eig: &HermEigen, rho: &DenseOperator, target: &DenseOperator) -> Result<SldOperator> {
    let (l, kernel_dim) = solve_anticommutator(eig, target.matrix());
    let matrix = DenseOperator::new(l, rho.factor_dims().to_vec())?.hermitian_part();
    Ok(SldOperator { matrix, kernel_dim })
}

fn check_derivative(rho: &DenseOperator, drho: &DenseOperator) -> Result<()> {
    if drho.dim() != rho.dim() {
        return Err(Error::arg("derivative and state differ in dimension"));
    }
    let dev = drho.hermitian_deviation();
    if dev > 1e-9 {
        return Err(Error::arg(format!("derivative is not Hermitian (deviation {dev:.3e})")));
    }
    let tr = drho.trace().norm();
    if tr > 1e-9 {
        return Err(Error::arg(format!("derivative has trace {tr:.3e}, expected 0")));
    }
    Ok(())
}

/// `L` with `½{L, ρ} = dρ` on the support of ρ.
pub fn sld(rho: &DenseOperator, drho: &DenseOperator) -> Result<SldOperator> {
    check_derivative(rho, drho)?;
    let eig = check_state(rho)?;
    sld_with(&eig, rho, drho)
}

/// `L̃_i` with `½{L̃_i, ρ} = σ_i` (normalised Pauli) on the support of ρ.
pub fn dual(rho: &DenseOperator, i: &PauliString) -> Result<SldOperator> {
    if 1 << i.n() != rho.dim() {
        return Err(Error::arg("Pauli string size does not match the state"));
    }
    let eig = check_state(rho)?;
    sld_with(&eig, rho, &i.operator())
}

/// `½ Tr({A, B} ρ)`.
fn symmetric_expectation(a: &CMatrix, b: &CMatrix, rho: &CMatrix) -> f64 {
    0.5 * ((a * b + b * a) * rho).trace().re
}

#[derive(Clone, Debug, PartialEq)]
pub struct FisherMatrix {
    pub entries: DMatrix<f64>,
    pub labels: Vec<String>,
}

impl FisherMatrix {
    fn from_entries(entries: DMatrix<f64>) -> Self {
        let labels = (0..entries.nrows()).map(|a| format!("theta_{a}")).collect();
        Self { entries, labels }
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[(a, b)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Columns `row,col,value` using the parameter labels.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["row", "col", "value"])?;
        for a in 0..self.labels.len() {
            for b in 0..self.labels.len() {
                wtr.write_record(&[
                    self.labels[a].clone(),
                    self.labels[b].clone(),
                    format!("{:.17e}", self.entries[(a, b)]),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

fn pair_matrix(r: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> DMatrix<f64> {
    let upper: Vec<(usize, usize, f64)> = (0..r * r)
        .into_par_iter()
        .filter(|i| i / r <= i % r)
        .map(|i| (i / r, i % r, f(i / r, i % r)))
        .collect();
    let mut m = DMatrix::zeros(r, r);
    for (a, b, v) in upper {
        m[(a, b)] = v;
        m[(b, a)] = v;
    }
    m
}

/// `F_αβ = ½ Tr({L_α, L_β} ρ)` from one SLD per derivative.
pub fn fisher(rho: &DenseOperator, drhos: &[DenseOperator]) -> Result<FisherMatrix> {
    for d in drhos {
        check_derivative(rho, d)?;
    }
    let eig = check_state(rho)?;
    let ls = drhos
        .par_iter()
        .map(|d| sld_with(&eig, rho, d).map(|l| l.matrix.into_matrix()))
        .collect::<Result<Vec<_>>>()?;
    let r = rho.matrix();
    Ok(FisherMatrix::from_entries(pair_matrix(ls.len(), |a, b| {
        symmetric_expectation(&ls[a], &ls[b], r)
    })))
}

/// The same matrix through Pauli duals: `F_αβ = ∂_α v_i ∂_β v_j 𝓕^k_ij v_k`
/// with `𝓕^k_ij = ½ Tr({L̃_i, L̃_j} σ_k)`.
pub fn fisher_dual_route(rho: &DenseOperator, drhos: &[DenseOperator]) -> Result<FisherMatrix> {
    let n = crate::tensor::qubit_count(rho.dim())?;
    if n > DUAL_ROUTE_MAX_QUBITS {
        return Err(Error::DimensionLimit {
            dim: rho.dim(),
            limit: 1 << DUAL_ROUTE_MAX_QUBITS,
        });
    }
    for d in drhos {
        check_derivative(rho, d)?;
    }
    let eig = check_state(rho)?;
    let k = 1usize << (2 * n);
    let duals = (0..k)
        .into_par_iter()
        .map(|i| {
            sld_with(&eig, rho, &PauliString::from_index(n, i).operator())
                .map(|l| l.matrix.into_matrix())
        })
        .collect::<Result<Vec<_>>>()?;
    let sigmas: Vec<CMatrix> = (0..k)
        .map(|i| PauliString::from_index(n, i).operator().into_matrix())
        .collect();
    let v = decompose(rho)?;
    let dv = drhos.iter().map(decompose).collect::<Result<Vec<_>>>()?;
    // G_ij = Σ_k 𝓕^k_ij v_k
    let g = pair_matrix(k, |i, j| {
        (0..k)
            .map(|kk| symmetric_expectation(&duals[i], &duals[j], &sigmas[kk]) * v.coeffs()[kk])
            .sum()
    });
    Ok(FisherMatrix::from_entries(pair_matrix(dv.len(), |a, b| {
        let x = DMatrix::from_column_slice(k, 1, dv[a].coeffs());
        let y = DMatrix::from_column_slice(k, 1, dv[b].coeffs());
        (x.transpose() * &g * y)[(0, 0)]
    })))
}

/// `dρ/dθ = -i[G, ρ]` for `ρ(θ) = e^{-iθG} ρ e^{iθG}`.
pub fn unitary_derivative(rho: &DenseOperator, generator: &DenseOperator) -> Result<DenseOperator> {
    if rho.dim() != generator.dim() {
        return Err(Error::arg("generator and state differ in dimension"));
    }
    let (g, r) = (generator.matrix(), rho.matrix());
    let comm = (g * r - r * g) * c(0.0, -1.0);
    DenseOperator::new(comm, rho.factor_dims().to_vec())
}

/// `Σ_q σ_z^{(q)} / 2` on `n` qubits.
pub fn collective_z(n: usize) -> DenseOperator {
    let d = 1usize << n;
    let m = CMatrix::from_fn(d, d, |r, col| {
        if r == col {
            let ones = r.count_ones() as f64;
            c((n as f64 - 2.0 * ones) / 2.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    DenseOperator::qubits(m).expect("power-of-two dimension")
}

/// `|∂_φ v|²` by central differences at `step` and `step/2`; returns the
/// Richardson-extrapolated value and fails if the two steps disagree.
pub fn sensitivity_proxy<F>(v_of_phi: F, phi: f64, step: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<PauliVector>,
{
    if step.is_nan() || step <= 0.0 {
        return Err(Error::arg("finite-difference step must be positive"));
    }
    let deriv = |h: f64| -> Result<Vec<f64>> {
        let (hi, lo) = (v_of_phi(phi + h)?, v_of_phi(phi - h)?);
        if hi.n() != lo.n() {
            return Err(Error::arg("parametrised vector changes size"));
        }
        Ok(hi
            .coeffs()
            .iter()
            .zip(lo.coeffs())
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect())
    };
    let d1 = deriv(step)?;
    let d2 = deriv(step / 2.0)?;
    let sq = |d: &[f64]| d.iter().map(|x| x * x).sum::<f64>();
    let (p1, p2) = (sq(&d1), sq(&d2));
    if (p1 - p2).abs() > RICHARDSON_TOL * p2.max(1.0) {
        return Err(Error::Numerical(format!(
            "finite-difference proxy unstable: {p1} at step {step}, {p2} at half step"
        )));
    }
    let rich: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    Ok(sq(&rich))
}

/// `|∂v|²` from a supplied derivative.
pub fn sensitivity_proxy_analytic(dv: &PauliVector) -> f64 {
    dv.norm_sq()
}

/// Choi matrix of `e^{-i(φ/2)σ_z}`.
pub fn phase_channel_choi(phi: f64) -> ChoiMatrix {
    let (s, co) = (phi / 2.0).sin_cos();
    let mut u = CMatrix::zeros(2, 2);
    u[(0, 0)] = c(co, -s);
    u[(1, 1)] = c(co, s);
    ChoiMatrix::from_unitary(&DenseOperator::qubits(u).expect("qubit"))
        .expect("a unitary is a valid channel")
}

fn check_register(nu: usize) -> Result<()> {
    if nu == 0 || nu > MAX_GHZ_QUBITS {
        return Err(Error::arg(format!("register size must be in 1..={MAX_GHZ_QUBITS}")));
    }
    Ok(())
}

/// Coefficient on a string of digits all in `{0, 3}` or all in `{1, 2}`.
fn ghz_like(nu: usize, z_part: impl Fn(usize) -> f64, xy_part: impl Fn(&[u8]) -> f64) -> PauliVector {
    let mut v = PauliVector::zeros(nu);
    let norm = 1.0 / ((1u64 << nu) as f64).sqrt();
    let mut digits = vec![0u8; nu];
    for bits in 0..1usize << nu {
        for (q, d) in digits.iter_mut().enumerate() {
            *d = if bits >> (nu - 1 - q) & 1 == 1 { 3 } else { 0 };
        }
        let kz = bits.count_ones() as usize;
        if kz.is_multiple_of(2) {
            let idx = PauliString::new(digits.clone()).expect("valid digits").index();
            v.coeffs_mut()[idx] = norm * z_part(kz);
        }
        for (q, d) in digits.iter_mut().enumerate() {
            *d = if bits >> (nu - 1 - q) & 1 == 1 { 2 } else { 1 };
        }
        let idx = PauliString::new(digits.clone()).expect("valid digits").index();
        v.coeffs_mut()[idx] = norm * xy_part(&digits);
    }
    v
}

/// Pauli vector of `|GHZ_ν⟩`.
pub fn ghz_pauli(nu: usize) -> Result<PauliVector> {
    check_register(nu)?;
    Ok(ghz_like(nu, |_| 1.0, |digits| {
        let ky = digits.iter().filter(|&&d| d == 2).count();
        match ky % 4 {
            0 => 1.0,
            2 => -1.0,
            _ => 0.0,
        }
    }))
}

/// Pauli vector after applying the single-qubit doubly stochastic channel
/// with parameters `phi` to every qubit of `|GHZ_ν⟩`, keeping only the
/// `σ_z → σ_z` and `{σ_x, σ_y} → {σ_x, σ_y}` blocks of its transfer
/// matrix. Exact when the other four entries vanish.
pub fn ghz_protocol_final_state(phi: &PhiParams, nu: usize) -> Result<PauliVector> {
    check_register(nu)?;
    let t = |i: usize, j: usize| phi.transfer(i, j);
    let tzz = t(2, 2);
    // images of σ_x + iσ_y on σ_x and σ_y
    let a = [c(t(0, 0), t(1, 0)), c(t(0, 1), t(1, 1))];
    Ok(ghz_like(nu, |kz| tzz.powi(kz as i32), |digits| {
        digits
            .iter()
            .fold(c(1.0, 0.0), |acc, &d| acc * a[d as usize - 1])
            .re
    }))
}

/// Apply the channel to every qubit of `|GHZ_ν⟩` as a density matrix.
pub fn ghz_protocol_brute_force(channel: &ChoiMatrix, nu: usize) -> Result<PauliVector> {
    check_register(nu)?;
    let mut rho = ghz(nu)?.projector();
    for q in 0..nu {
        rho = channel.apply_on_qubit(&rho, q)?;
    }
    decompose(&rho)
}

/// Pauli vector of `ρ_f^{⊗ν}` with `ρ_f` the channel applied to `|+⟩`.
pub fn separable_protocol_final_state(phi: &PhiParams, nu: usize) -> Result<PauliVector> {
    check_register(nu)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let single = [s, s * phi.transfer(0, 0), s * phi.transfer(0, 1), s * phi.transfer(0, 2)];
    let coeffs = (0..1usize << (2 * nu))
        .map(|idx| {
            (0..nu)
                .map(|q| single[(idx >> (2 * (nu - 1 - q))) & 3])
                .product()
        })
        .collect();
    PauliVector::new(nu, coeffs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    Separable,
    Ghz,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Separable => "separable",
            Protocol::Ghz => "ghz",
        }
    }

    /// Final Pauli vector for the phase channel at angle `theta`.
    pub fn phase_final_state(self, theta: f64, nu: usize) -> Result<PauliVector> {
        let phi = phase_channel_choi(theta).phi_params()?;
        match self {
            Protocol::Separable => separable_protocol_final_state(&phi, nu),
            Protocol::Ghz => ghz_protocol_final_state(&phi, nu),
        }
    }

    /// Input state on `nu` qubits.
    pub fn input(self, nu: usize) -> Result<DenseOperator> {
        check_register(nu)?;
        match self {
            Protocol::Separable => Ok(crate::scramble::plus_state(nu)?.projector()),
            Protocol::Ghz => Ok(ghz(nu)?.projector()),
        }
    }

    /// SLD Fisher information of the collective phase at angle `theta`.
    pub fn phase_fisher(self, theta: f64, nu: usize) -> Result<f64> {
        let channel = phase_channel_choi(theta);
        let mut rho = self.input(nu)?;
        for q in 0..nu {
            rho = channel.apply_on_qubit(&rho, q)?;
        }
        let drho = unitary_derivative(&rho, &collective_z(nu))?;
        Ok(fisher(&rho, &[drho])?.get(0, 0))
    }
}

/// One row of a proxy scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ProxyRow {
    pub protocol: Protocol,
    pub nu: usize,
    pub proxy: f64,
    pub fisher: f64,
}

pub fn proxy_scan(protocol: Protocol, nus: &[usize], theta: f64) -> Result<Vec<ProxyRow>> {
    nus.par_iter()
        .map(|&nu| {
            Ok(ProxyRow {
                protocol,
                nu,
                proxy: sensitivity_proxy(|t| protocol.phase_final_state(t, nu), theta, DEFAULT_STEP)?,
                fisher: protocol.phase_fisher(theta, nu)?,
            })
        })
        .collect()
}

/// Columns `protocol,nu,proxy,fisher`.
pub fn write_proxy_csv<W: Write>(rows: &[ProxyRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["protocol", "nu", "proxy", "fisher"])?;
    for r in rows {
        wtr.write_record(&[
            r.protocol.name().to_string(),
            r.nu.to_string(),
            format!("{:.12e}", r.proxy),
            format!("{:.12e}", r.fisher),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
