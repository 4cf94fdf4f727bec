//! Fidelity and distance between density matrices.

use std::io::Write;

use crate::error::{Error, Result};
use crate::tensor::{c, CMatrix, DenseOperator, HermEigen};

/// Eigenvalues below this are treated as a violation of positivity.
pub const PSD_TOL: f64 = 1e-9;

fn check_state(rho: &DenseOperator, name: &str) -> Result<HermEigen> {
    let eig = rho
        .herm_eig()
        .map_err(|_| Error::pre(format!("{name} is not Hermitian")))?;
    if eig.min() < -PSD_TOL {
        return Err(Error::pre(format!(
            "{name} is not positive semidefinite (min eigenvalue {:.3e})",
            eig.min()
        )));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(Error::pre(format!("{name} has trace {tr}, expected 1")));
    }
    Ok(eig)
}

/// `√A` of a PSD matrix with eigenvalues clipped at zero.
pub fn sqrt_psd(eig: &HermEigen) -> CMatrix {
    eig.map_values(|x| x.max(0.0).sqrt())
}

/// Uhlmann fidelity `(Tr √(√ρ₁ ρ₂ √ρ₁))²`.
pub fn uhlmann(rho1: &DenseOperator, rho2: &DenseOperator) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::arg("fidelity of states with different dimensions"));
    }
    let e1 = check_state(rho1, "first state")?;
    check_state(rho2, "second state")?;
    let s1 = sqrt_psd(&e1);
    let inner = &s1 * rho2.matrix() * &s1;
    let inner = (&inner + inner.adjoint()) / c(2.0, 0.0);
    let root_trace: f64 = HermEigen::of_hermitian(&inner)?
        .values
        .iter()
        .map(|&x| x.max(0.0).sqrt())
        .sum();
    Ok(root_trace * root_trace)
}

/// `Σ |ρ₁ - ρ₂|²` entrywise, i.e. `Tr(ε²)` for Hermitian inputs.
pub fn frobenius_dist_sq(rho1: &DenseOperator, rho2: &DenseOperator) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::arg("distance between operators of different dimensions"));
    }
    Ok((rho1.matrix() - rho2.matrix()).norm_squared())
}

/// Closed-form fidelity between `diag(s, 1-s)` and `1/2`.
pub fn qubit_sample_fidelity(s: f64) -> f64 {
    (1.0 + 2.0 * (s * (1.0 - s)).max(0.0).sqrt()) / 2.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceReport {
    pub uhlmann: f64,
    pub frobenius_sq: f64,
    /// Worst-case squared observable error implied by a covariance bound.
    pub sigma_max_bound: Option<f64>,
}

impl DistanceReport {
    pub fn compare(rho1: &DenseOperator, rho2: &DenseOperator) -> Result<Self> {
        Ok(Self {
            uhlmann: uhlmann(rho1, rho2)?,
            frobenius_sq: frobenius_dist_sq(rho1, rho2)?,
            sigma_max_bound: None,
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["uhlmann", "frobenius_sq", "sigma_max_bound"])?;
        wtr.write_record(&[
            format!("{:.17e}", self.uhlmann),
            format!("{:.17e}", self.frobenius_sq),
            self.sigma_max_bound
                .map(|b| format!("{b:.17e}"))
                .unwrap_or_default(),
        ])?;
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{CVector, StateVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(d: usize, rng: &mut ChaCha8Rng) -> DenseOperator {
        let a = CMatrix::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let p = &a * a.adjoint();
        let tr = p.trace();
        DenseOperator::from_matrix(p / tr).unwrap()
    }

    fn orthonormal_mixture(d: usize, nu: usize) -> DenseOperator {
        let mut m = CMatrix::zeros(d, d);
        for k in 0..nu {
            m[(k, k)] = c(1.0 / nu as f64, 0.0);
        }
        DenseOperator::from_matrix(m).unwrap()
    }

    #[test]
    fn identical_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(4, &mut rng);
        let r = DistanceReport::compare(&rho, &rho).unwrap();
        assert!((r.uhlmann - 1.0).abs() < 1e-9);
        assert_eq!(r.frobenius_sq, 0.0);
    }

    #[test]
    fn orthonormal_mixture_against_uniform() {
        let (d, nu) = (8, 4);
        let rho = orthonormal_mixture(d, nu);
        let target = DenseOperator::maximally_mixed(&[d]);
        let f = uhlmann(&rho, &target).unwrap();
        assert!((1.0 - f - 0.5).abs() < 1e-12);
        let e = frobenius_dist_sq(&rho, &target).unwrap();
        assert!((e - 0.125).abs() < 1e-15);
    }

    #[test]
    fn qubit_formula_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let half = DenseOperator::maximally_mixed(&[2]);
        for _ in 0..100 {
            let s: f64 = rng.random();
            let mut m = CMatrix::zeros(2, 2);
            m[(0, 0)] = c(s, 0.0);
            m[(1, 1)] = c(1.0 - s, 0.0);
            let rho = DenseOperator::from_matrix(m).unwrap();
            assert!((uhlmann(&rho, &half).unwrap() - qubit_sample_fidelity(s)).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_and_unitarily_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_density(4, &mut rng);
            let b = random_density(4, &mut rng);
            let fab = uhlmann(&a, &b).unwrap();
            assert!((fab - uhlmann(&b, &a).unwrap()).abs() < 1e-9);
            assert!((0.0..=1.0 + 1e-9).contains(&fab));
            let u = crate::haar::rotations_operator(&crate::haar::random_single_qubit_rotations(2, &mut rng)).unwrap();
            let conj = |r: &DenseOperator| DenseOperator::qubits(u.matrix() * r.matrix() * u.matrix().adjoint()).unwrap();
            assert!((fab - uhlmann(&conj(&a), &conj(&b)).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn pure_against_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::new(CVector::from_vec(vec![c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)])).unwrap();
        let f = uhlmann(&bell.projector(), &DenseOperator::maximally_mixed(&[2, 2])).unwrap();
        assert!((f - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_states() {
        let mut m = CMatrix::identity(2, 2);
        m[(1, 1)] = c(-0.5, 0.0);
        let bad = DenseOperator::from_matrix(m / c(0.5, 0.0)).unwrap();
        let half = DenseOperator::maximally_mixed(&[2]);
        assert!(matches!(uhlmann(&bad, &half), Err(Error::Precondition(_))));
    }
}
