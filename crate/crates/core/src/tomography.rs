//! Simulated reduced process tomography with shot noise.
//!
//! For a subset `S` of `m` qubits the other qubits are prepared from a
//! sampler, `S` is prepared in `τ1` and the binary readout `{τ2, 𝟙 - τ2}` is
//! measured on `S`. Settings are indexed by base-4 ids over
//! `(|0⟩, |1⟩, |+⟩, |+i⟩)`, qubit 0 most significant.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::choi::{ChoiMatrix, Convention};
use crate::error::{Error, Result};
use crate::haar::{sample_state, SamplerSpec};
use crate::pauli::{reconstruct as pauli_reconstruct, PauliVector, Subset};
use crate::rng::RngStream;
use crate::tensor::{c, CMatrix, DenseOperator, StateVector, C64};

/// Largest reduced subsystem.
pub const MAX_SUBSYSTEM: usize = 2;

/// Largest channel the shot simulator accepts.
pub const MAX_CHANNEL_QUBITS: usize = 5;

/// Slack on outcome probabilities before they count as inconsistent.
pub const PROB_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tau {
    Zero,
    One,
    Plus,
    PlusI,
}

impl Tau {
    pub const ALL: [Tau; 4] = [Tau::Zero, Tau::One, Tau::Plus, Tau::PlusI];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Tau::Zero => "0",
            Tau::One => "1",
            Tau::Plus => "+",
            Tau::PlusI => "+i",
        }
    }

    pub fn projector(self) -> [[C64; 2]; 2] {
        let (z, h) = (c(0.0, 0.0), c(0.5, 0.0));
        match self {
            Tau::Zero => [[c(1.0, 0.0), z], [z, z]],
            Tau::One => [[z, z], [z, c(1.0, 0.0)]],
            Tau::Plus => [[h, h], [h, h]],
            Tau::PlusI => [[h, c(0.0, -0.5)], [c(0.0, 0.5), h]],
        }
    }
}

/// Input projector `tau1` and measured projector `tau2` on `S`, one factor
/// per qubit of `S` in ascending order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TomoSetting {
    pub tau1: Vec<Tau>,
    pub tau2: Vec<Tau>,
}

fn taus_id(taus: &[Tau]) -> usize {
    taus.iter().fold(0, |acc, t| acc * 4 + t.id())
}

fn taus_from_id(m: usize, id: usize) -> Vec<Tau> {
    (0..m).map(|q| Tau::ALL[(id >> (2 * (m - 1 - q))) & 3]).collect()
}

fn taus_operator(taus: &[Tau]) -> DenseOperator {
    let mut m = CMatrix::identity(1, 1);
    for t in taus {
        let p = t.projector();
        m = m.kronecker(&CMatrix::from_fn(2, 2, |r, col| p[r][col]));
    }
    DenseOperator::qubits(m).expect("power-of-two dimension")
}

impl TomoSetting {
    pub fn m(&self) -> usize {
        self.tau1.len()
    }

    pub fn tau1_id(&self) -> usize {
        taus_id(&self.tau1)
    }

    pub fn tau2_id(&self) -> usize {
        taus_id(&self.tau2)
    }

    pub fn input_state(&self) -> DenseOperator {
        taus_operator(&self.tau1)
    }

    pub fn measured_projector(&self) -> DenseOperator {
        taus_operator(&self.tau2)
    }
}

/// All `16^m` settings, `tau1` major.
pub fn tomo_basis(m: usize) -> Result<Vec<TomoSetting>> {
    if m == 0 {
        return Err(Error::arg("tomography needs at least one qubit"));
    }
    if m > MAX_SUBSYSTEM {
        return Err(Error::Unsupported(format!(
            "reduced tomography on {m} qubits (at most {MAX_SUBSYSTEM})"
        )));
    }
    let k = 1usize << (2 * m);
    Ok((0..k * k)
        .map(|i| TomoSetting {
            tau1: taus_from_id(m, i / k),
            tau2: taus_from_id(m, i % k),
        })
        .collect())
}

/// Estimates keyed by setting; iteration follows [`tomo_basis`] order.
pub type TomoEstimates = BTreeMap<TomoSetting, f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimMode {
    /// Sampled preparation and Bernoulli readout.
    Full,
    /// Exactly mixed complement, Bernoulli readout only.
    ExactPrep,
    /// Sampled preparation, exact outcome probabilities.
    ExactMeas,
}

impl SimMode {
    fn stream_id(self) -> u64 {
        match self {
            SimMode::Full => 0,
            SimMode::ExactPrep => 1,
            SimMode::ExactMeas => 2,
        }
    }
}

/// How the complement of `S` is prepared.
#[derive(Clone, Debug, PartialEq)]
pub enum Preparation {
    /// The exact uniform mixture.
    Uniform,
    Sampled(SamplerSpec),
}

/// `R` with `p(ψ) = ⟨ψ|R|ψ⟩` for a complement state `ψ`, and the exact
/// reduced-Choi value `Tr(R) / 2^{N-m}`.
#[derive(Clone, Debug)]
pub struct SettingResponse {
    r: CMatrix,
    exact: f64,
}

impl SettingResponse {
    pub fn new(phi: &ChoiMatrix, s: Subset, setting: &TomoSetting) -> Result<Self> {
        let n = phi.n();
        if n > MAX_CHANNEL_QUBITS {
            return Err(Error::DimensionLimit {
                dim: 1 << n,
                limit: 1 << MAX_CHANNEL_QUBITS,
            });
        }
        let qs = s.qubits();
        if qs.is_empty() || qs.iter().any(|&q| q >= n) {
            return Err(Error::arg(format!("subset {s} invalid for {n} qubits")));
        }
        if setting.m() != qs.len() || setting.tau2.len() != qs.len() {
            return Err(Error::arg("setting size does not match subset size"));
        }
        let meas = phi.to_measurement();
        let mut x = meas.matrix().matrix().clone();
        for (k, &q) in qs.iter().enumerate() {
            right_apply(&mut x, q, 2 * n, &setting.tau1[k].projector());
            right_apply(&mut x, n + q, 2 * n, &setting.tau2[k].projector());
        }
        let keep: Vec<usize> = (0..n).filter(|q| !s.contains(*q)).collect();
        let r = DenseOperator::new(x, vec![2; 2 * n])?
            .partial_trace(&keep)?
            .into_matrix();
        let exact = r.trace().re / (1u64 << keep.len()) as f64;
        Ok(Self { r, exact })
    }

    pub fn exact(&self) -> f64 {
        self.exact
    }

    /// Outcome probability for complement state `psi`.
    pub fn probability(&self, psi: &StateVector) -> Result<f64> {
        let a = psi.amplitudes();
        if a.len() != self.r.nrows() {
            return Err(Error::arg("complement state has the wrong dimension"));
        }
        let p = a.dotc(&(&self.r * a)).re;
        check_probability(p)
    }
}

fn check_probability(p: f64) -> Result<f64> {
    if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&p) {
        return Err(Error::Internal(format!("outcome probability {p} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `X <- X (𝟙 ⊗ … ⊗ A ⊗ … ⊗ 𝟙)` with `A` on `leg`.
fn right_apply(x: &mut CMatrix, leg: usize, legs: usize, a: &[[C64; 2]; 2]) {
    let bit = 1usize << (legs - 1 - leg);
    let d = x.ncols();
    for col0 in (0..d).filter(|col| col & bit == 0) {
        let col1 = col0 | bit;
        for r in 0..x.nrows() {
            let (x0, x1) = (x[(r, col0)], x[(r, col1)]);
            x[(r, col0)] = x0 * a[0][0] + x1 * a[1][0];
            x[(r, col1)] = x0 * a[0][1] + x1 * a[1][1];
        }
    }
}

/// Means over the shots of one setting: the observed outcome frequency and
/// the average outcome probability of the drawn preparations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShotSummary {
    pub outcome_mean: f64,
    pub probability_mean: f64,
}

fn complement_qubits(prep: &Preparation, resp: &SettingResponse) -> Result<()> {
    if let Preparation::Sampled(spec) = prep {
        if spec.dim() != resp.r.nrows() {
            return Err(Error::arg(format!(
                "preparation covers {} qubits but the complement has dimension {}",
                spec.n,
                resp.r.nrows()
            )));
        }
    }
    Ok(())
}

/// Run `nu` shots of one setting. Shot `j` uses `stream.child(j)`.
pub fn simulate_response(
    resp: &SettingResponse,
    prep: &Preparation,
    nu: usize,
    stream: RngStream,
    mode: SimMode,
) -> Result<ShotSummary> {
    if nu == 0 {
        return Err(Error::arg("at least one shot per setting"));
    }
    complement_qubits(prep, resp)?;
    let exact = check_probability(resp.exact)?;
    let binomial = |p: f64| -> Result<ShotSummary> {
        let k = Binomial::new(nu as u64, p)
            .map_err(|e| Error::Internal(e.to_string()))?
            .sample(&mut stream.rng());
        Ok(ShotSummary {
            outcome_mean: k as f64 / nu as f64,
            probability_mean: p,
        })
    };
    let spec = match (prep, mode) {
        (_, SimMode::ExactPrep) | (Preparation::Uniform, SimMode::Full) => return binomial(exact),
        (Preparation::Uniform, SimMode::ExactMeas) => {
            return Ok(ShotSummary {
                outcome_mean: exact,
                probability_mean: exact,
            })
        }
        (Preparation::Sampled(spec), _) => spec,
    };
    let (mut hits, mut psum) = (0usize, 0.0);
    for j in 0..nu {
        let mut rng = stream.child(j as u64).rng();
        let psi = sample_state(spec, &mut rng)?;
        let p = resp.probability(&psi)?;
        psum += p;
        if mode == SimMode::Full && rng.random::<f64>() < p {
            hits += 1;
        }
    }
    let probability_mean = psum / nu as f64;
    Ok(ShotSummary {
        outcome_mean: match mode {
            SimMode::Full => hits as f64 / nu as f64,
            _ => probability_mean,
        },
        probability_mean,
    })
}

/// Estimate of one reduced-Choi entry from `nu` shots.
pub fn simulate_setting(
    phi: &ChoiMatrix,
    s: Subset,
    setting: &TomoSetting,
    prep: &Preparation,
    nu: usize,
    stream: RngStream,
    mode: SimMode,
) -> Result<f64> {
    let resp = SettingResponse::new(phi, s, setting)?;
    Ok(simulate_response(&resp, prep, nu, stream, mode)?.outcome_mean)
}

// Pauli digit (I, X, Y, Z) as a combination of (τ0, τ1, τ+, τ+i).
const PAULI_IN_TAU: [[f64; 4]; 4] = [
    [1.0, 1.0, 0.0, 0.0],
    [-1.0, -1.0, 2.0, 0.0],
    [-1.0, -1.0, 0.0, 2.0],
    [1.0, -1.0, 0.0, 0.0],
];

/// Linear inversion to the measurement-form reduced Choi matrix. With
/// `clip_psd` negative eigenvalues of the raw form are set to zero.
pub fn reconstruct(estimates: &TomoEstimates, clip_psd: bool) -> Result<ChoiMatrix> {
    let m = estimates
        .keys()
        .next()
        .ok_or_else(|| Error::arg("no estimates"))?
        .m();
    let basis = tomo_basis(m)?;
    let k = 1usize << (2 * m);
    let mut e = DMatrix::<f64>::zeros(k, k);
    for setting in &basis {
        let v = estimates.get(setting).ok_or_else(|| {
            Error::arg(format!(
                "missing setting (tau1 {}, tau2 {})",
                setting.tau1_id(),
                setting.tau2_id()
            ))
        })?;
        e[(setting.tau1_id(), setting.tau2_id())] = *v;
    }
    if estimates.len() != basis.len() {
        return Err(Error::arg("estimates mix subsystem sizes"));
    }
    let single = DMatrix::from_fn(4, 4, |p, t| PAULI_IN_TAU[p][t]);
    let mut a = DMatrix::<f64>::identity(1, 1);
    for _ in 0..m {
        a = a.kronecker(&single);
    }
    let coef = &a * e * a.transpose();
    let scale = 1.0 / (1u64 << m) as f64;
    let coeffs: Vec<f64> = (0..k * k).map(|i| coef[(i / k, i % k)] * scale).collect();
    let mat = pauli_reconstruct(&PauliVector::new(2 * m, coeffs)?).into_matrix();
    let choi = ChoiMatrix::from_matrix(m, mat, Convention::Measurement)?;
    if !clip_psd {
        return Ok(choi);
    }
    let raw = choi.to_raw();
    let clipped = raw.matrix().herm_eig()?.map_values(|x| x.max(0.0));
    Ok(ChoiMatrix::from_matrix(m, clipped, Convention::Raw)?.to_measurement())
}

/// Exact reduced-Choi values for every setting.
pub fn exact_estimates(phi: &ChoiMatrix, s: Subset) -> Result<TomoEstimates> {
    tomo_basis(s.len())?
        .into_iter()
        .map(|st| SettingResponse::new(phi, s, &st).map(|r| (st, r.exact())))
        .collect()
}

/// A mean over trials with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn of(xs: &[f64]) -> Self {
        let t = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / t;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1.0);
        Self {
            mean,
            stderr: (var / t).sqrt(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TomoResult {
    pub settings: Vec<TomoSetting>,
    /// Single-run estimates from the first full-mode trial.
    pub estimates: TomoEstimates,
    pub exact: Vec<f64>,
    /// Per-setting full-mode squared error averaged over trials.
    pub setting_sq_error: Vec<f64>,
    pub reduced_choi_est: ChoiMatrix,
    /// Setting-averaged squared errors from the three simulation modes.
    pub delta_prep_sq: Estimate,
    pub delta_meas_sq: Estimate,
    pub delta_total_sq: Estimate,
    /// Split of the full-mode error through the drawn preparations' mean
    /// probability: outcome noise around it, and its offset from exact.
    pub cond_meas_sq: Estimate,
    pub cond_prep_sq: Estimate,
    pub nu: usize,
    pub trials: usize,
}

impl TomoResult {
    /// `Δ²_total - Δ²_prep - Δ²_meas` and its standard error; the three
    /// modes use independent streams.
    pub fn additivity_gap(&self) -> Estimate {
        let (t, p, m) = (self.delta_total_sq, self.delta_prep_sq, self.delta_meas_sq);
        Estimate {
            mean: t.mean - p.mean - m.mean,
            stderr: (t.stderr.powi(2) + p.stderr.powi(2) + m.stderr.powi(2)).sqrt(),
        }
    }

    /// Columns `tau1_id,tau2_id,estimate,exact,sq_error`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["tau1_id", "tau2_id", "estimate", "exact", "sq_error"])?;
        for (k, st) in self.settings.iter().enumerate() {
            wtr.write_record(&[
                st.tau1_id().to_string(),
                st.tau2_id().to_string(),
                format!("{:.17e}", self.estimates[st]),
                format!("{:.17e}", self.exact[k]),
                format!("{:.17e}", self.setting_sq_error[k]),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Columns `delta_prep_sq,delta_meas_sq,delta_total_sq,nu,trials`
    /// followed by standard errors.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "delta_prep_sq",
            "delta_meas_sq",
            "delta_total_sq",
            "nu",
            "trials",
            "se_prep",
            "se_meas",
            "se_total",
        ])?;
        let f = |x: f64| format!("{x:.17e}");
        wtr.write_record(&[
            f(self.delta_prep_sq.mean),
            f(self.delta_meas_sq.mean),
            f(self.delta_total_sq.mean),
            self.nu.to_string(),
            self.trials.to_string(),
            f(self.delta_prep_sq.stderr),
            f(self.delta_meas_sq.stderr),
            f(self.delta_total_sq.stderr),
        ])?;
        wtr.flush()?;
        Ok(())
    }
}

/// Minimum number of trials for the decomposition.
pub const MIN_TRIALS: usize = 30;

/// Squared errors per trial, averaged over settings, for each mode. Trial
/// `t`, setting `k` of a mode uses `stream.child(mode).child(t).child(k)`.
pub fn error_decompose(
    phi: &ChoiMatrix,
    s: Subset,
    prep: &Preparation,
    nu: usize,
    trials: usize,
    stream: RngStream,
) -> Result<TomoResult> {
    if trials < MIN_TRIALS {
        return Err(Error::arg(format!("at least {MIN_TRIALS} trials required")));
    }
    let settings = tomo_basis(s.len())?;
    let responses = settings
        .par_iter()
        .map(|st| SettingResponse::new(phi, s, st))
        .collect::<Result<Vec<_>>>()?;
    let ns = settings.len();
    let run = |mode: SimMode| -> Result<Vec<ShotSummary>> {
        let ms = stream.child(mode.stream_id());
        (0..trials * ns)
            .into_par_iter()
            .map(|i| {
                let (t, k) = (i / ns, i % ns);
                let st = ms.child(t as u64).child(k as u64);
                simulate_response(&responses[k], prep, nu, st, mode)
            })
            .collect()
    };
    let exact: Vec<f64> = responses.iter().map(|r| r.exact).collect();
    let per_trial = |runs: &[ShotSummary], f: &dyn Fn(&ShotSummary, f64) -> f64| -> Vec<f64> {
        runs.chunks(ns)
            .map(|row| row.iter().zip(&exact).map(|(r, &e)| f(r, e)).sum::<f64>() / ns as f64)
            .collect()
    };
    let sq = |r: &ShotSummary, e: f64| (r.outcome_mean - e).powi(2);

    let full = run(SimMode::Full)?;
    let exact_prep = run(SimMode::ExactPrep)?;
    let exact_meas = run(SimMode::ExactMeas)?;

    let setting_sq_error = (0..ns)
        .map(|k| (0..trials).map(|t| sq(&full[t * ns + k], exact[k])).sum::<f64>() / trials as f64)
        .collect();
    let estimates: TomoEstimates = settings
        .iter()
        .cloned()
        .zip(full[..ns].iter().map(|r| r.outcome_mean))
        .collect();
    let reduced_choi_est = reconstruct(&estimates, false)?;
    Ok(TomoResult {
        delta_total_sq: Estimate::of(&per_trial(&full, &sq)),
        delta_meas_sq: Estimate::of(&per_trial(&exact_prep, &sq)),
        delta_prep_sq: Estimate::of(&per_trial(&exact_meas, &sq)),
        cond_meas_sq: Estimate::of(&per_trial(&full, &|r, _| {
            (r.outcome_mean - r.probability_mean).powi(2)
        })),
        cond_prep_sq: Estimate::of(&per_trial(&full, &|r, e| (r.probability_mean - e).powi(2))),
        settings,
        estimates,
        exact,
        setting_sq_error,
        reduced_choi_est,
        nu,
        trials,
    })
}

/// `(1 - Σ p_i²) / ν`, the expected squared error of a multinomial
/// frequency estimate.
pub fn classical_sampling_error(p: &[f64], nu: usize) -> Result<f64> {
    if nu == 0 {
        return Err(Error::arg("at least one shot"));
    }
    if let Some(x) = p.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::arg(format!("invalid probability {x}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("probabilities sum to {total}")));
    }
    Ok((1.0 - p.iter().map(|x| x * x).sum::<f64>()) / nu as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::haar_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_unitary_channel(n: usize, seed: u64) -> ChoiMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = haar_unitary(1 << n, &mut rng).unwrap();
        ChoiMatrix::from_unitary(&u.with_factor_dims(vec![2; n]).unwrap()).unwrap()
    }

    #[test]
    fn basis_layout() {
        let b1 = tomo_basis(1).unwrap();
        assert_eq!(b1.len(), 16);
        assert_eq!(b1[0].tau1, vec![Tau::Zero]);
        assert_eq!(b1[0].tau2, vec![Tau::Zero]);
        assert_eq!(b1[1].tau2, vec![Tau::One]);
        assert_eq!(b1[4].tau1, vec![Tau::One]);
        assert_eq!(tomo_basis(2).unwrap().len(), 256);
        assert!(matches!(tomo_basis(3), Err(Error::Unsupported(_))));
        let mut sorted = b1.clone();
        sorted.sort();
        assert_eq!(sorted, b1);
    }

    #[test]
    fn projectors_are_rank_one() {
        for t in Tau::ALL {
            let p = taus_operator(&[t]);
            assert!((&p * &p).max_abs_diff(&p) < 1e-15);
            assert!((p.trace().re - 1.0).abs() < 1e-15);
            assert!(p.hermitian_deviation() < 1e-15);
        }
    }

    #[test]
    fn response_matches_reduced_choi() {
        let phi = random_unitary_channel(3, 4);
        for s in [Subset(0b001), Subset(0b100), Subset(0b101)] {
            let red = phi.reduce(s).unwrap();
            for st in tomo_basis(s.len()).unwrap().iter().step_by(7) {
                let resp = SettingResponse::new(&phi, s, st).unwrap();
                let want = red
                    .expectation(&st.measured_projector(), &st.input_state())
                    .unwrap();
                assert!((resp.exact() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probability_matches_direct_channel() {
        let phi = random_unitary_channel(3, 5);
        let s = Subset(0b010);
        let st = &tomo_basis(1).unwrap()[11];
        let resp = SettingResponse::new(&phi, s, st).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let psi = crate::haar::haar_state(4, &mut rng).unwrap();
        // qubit order (0, 1, 2) with S = {1}
        let sigma = psi.projector().with_factor_dims(vec![2, 2]).unwrap();
        let full = st
            .input_state()
            .kron(&sigma)
            .unwrap()
            .permute_factors(&[1, 0, 2])
            .unwrap();
        let obs = st
            .measured_projector()
            .kron(&DenseOperator::identity(&[2, 2]))
            .unwrap()
            .permute_factors(&[1, 0, 2])
            .unwrap();
        let want = phi.expectation(&obs, &full).unwrap();
        assert!((resp.probability(&psi).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn identity_channel_exact_meas_is_one() {
        let phi = ChoiMatrix::identity(3);
        let st = &tomo_basis(1).unwrap()[0];
        let prep = Preparation::Sampled(SamplerSpec::haar_lbit(2, 1).unwrap());
        let v = simulate_setting(&phi, Subset(1), st, &prep, 50, RngStream::new(1, 0), SimMode::ExactMeas)
            .unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn depolarizing_converges_to_uniform() {
        let phi = ChoiMatrix::depolarizing(3);
        for st in tomo_basis(1).unwrap() {
            let v = simulate_setting(
                &phi,
                Subset(0b010),
                &st,
                &Preparation::Uniform,
                1_000_000,
                RngStream::new(2, st.tau1_id() as u64),
                SimMode::ExactPrep,
            )
            .unwrap();
            assert!((v - 0.5).abs() < 5.0 * 0.5 / 1000.0);
        }
    }

    #[test]
    fn preparation_size_checked() {
        let phi = ChoiMatrix::identity(3);
        let st = &tomo_basis(1).unwrap()[0];
        let prep = Preparation::Sampled(SamplerSpec::haar_lbit(3, 1).unwrap());
        assert!(simulate_setting(&phi, Subset(1), st, &prep, 5, RngStream::new(1, 0), SimMode::Full).is_err());
    }

    #[test]
    fn exact_round_trip() {
        for (seed, s) in [(7, Subset(0b001)), (8, Subset(0b011))] {
            let phi = random_unitary_channel(3, seed);
            let est = exact_estimates(&phi, s).unwrap();
            let rec = reconstruct(&est, false).unwrap();
            let want = phi.reduce(s).unwrap().to_measurement();
            assert!(rec.matrix().max_abs_diff(want.matrix()) < 1e-10);
            assert!(rec.stochasticity_deviation() < 1e-9);
        }
    }

    #[test]
    fn identity_reconstructs_to_half_diagonal() {
        let est = exact_estimates(&ChoiMatrix::identity(2), Subset(0b01)).unwrap();
        let phi = reconstruct(&est, false).unwrap().phi_params().unwrap();
        assert!(phi.max_abs_diff(&crate::choi::PhiParams::identity()) < 1e-12);
        for (st, v) in &est {
            let want = st.measured_projector().trace_product(&st.input_state()).re;
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_is_linear() {
        let a = exact_estimates(&random_unitary_channel(2, 9), Subset(1)).unwrap();
        let b = exact_estimates(&random_unitary_channel(2, 10), Subset(1)).unwrap();
        let mix: TomoEstimates = a.iter().map(|(k, v)| (k.clone(), 0.3 * v - 1.7 * b[k])).collect();
        let ra = reconstruct(&a, false).unwrap();
        let rb = reconstruct(&b, false).unwrap();
        let rm = reconstruct(&mix, false).unwrap();
        let want = &ra.matrix().scale(c(0.3, 0.0)) - &rb.matrix().scale(c(1.7, 0.0));
        assert!(rm.matrix().max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn missing_setting_rejected() {
        let mut est = exact_estimates(&ChoiMatrix::identity(1), Subset(1)).unwrap();
        let first = est.keys().next().unwrap().clone();
        est.remove(&first);
        assert!(matches!(reconstruct(&est, false), Err(Error::Argument(_))));
        assert!(reconstruct(&TomoEstimates::new(), false).is_err());
    }

    #[test]
    fn clipping_yields_positive_raw_form() {
        let phi = random_unitary_channel(2, 11);
        let mut est = exact_estimates(&phi, Subset(1)).unwrap();
        for (i, v) in est.values_mut().enumerate() {
            *v += if i % 3 == 0 { 0.08 } else { -0.05 };
        }
        let clipped = reconstruct(&est, true).unwrap();
        assert!(clipped.to_raw().matrix().herm_eig().unwrap().min() > -1e-12);
    }

    #[test]
    fn full_mode_is_unbiased() {
        let phi = random_unitary_channel(3, 12);
        let s = Subset(0b001);
        let st = &tomo_basis(1).unwrap()[6];
        let resp = SettingResponse::new(&phi, s, st).unwrap();
        let prep = Preparation::Sampled(SamplerSpec::haar_lbit(2, 1).unwrap());
        let trials = 1000;
        let xs: Vec<f64> = (0..trials)
            .map(|t| {
                simulate_response(&resp, &prep, 20, RngStream::new(13, t), SimMode::Full)
                    .unwrap()
                    .outcome_mean
            })
            .collect();
        let est = Estimate::of(&xs);
        assert!((est.mean - resp.exact()).abs() < 3.0 * est.stderr);
    }

    #[test]
    fn uniform_preparation_has_no_prep_error() {
        let phi = random_unitary_channel(3, 14);
        let r = error_decompose(&phi, Subset(1), &Preparation::Uniform, 100, 30, RngStream::new(15, 0)).unwrap();
        assert_eq!(r.delta_prep_sq.mean, 0.0);
        assert!(r.delta_total_sq.mean > 0.0);
        assert!(error_decompose(&phi, Subset(1), &Preparation::Uniform, 100, 29, RngStream::new(15, 0)).is_err());
    }

    #[test]
    fn classical_formula() {
        assert_eq!(classical_sampling_error(&[1.0, 0.0], 7).unwrap(), 0.0);
        assert!((classical_sampling_error(&[0.5, 0.5], 100).unwrap() - 1.0 / 200.0).abs() < 1e-15);
        assert!(classical_sampling_error(&[1.2, -0.2], 10).is_err());
        assert!(classical_sampling_error(&[0.5, 0.4], 10).is_err());
    }

    #[test]
    fn classical_formula_matches_multinomial() {
        let (k, nu, trials) = (4usize, 1000usize, 2000usize);
        let p = vec![1.0 / k as f64; k];
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let errs: Vec<f64> = (0..trials)
            .map(|_| {
                let mut counts = vec![0usize; k];
                for _ in 0..nu {
                    counts[rng.random_range(0..k)] += 1;
                }
                counts
                    .iter()
                    .zip(&p)
                    .map(|(&n, &q)| (n as f64 / nu as f64 - q).powi(2))
                    .sum()
            })
            .collect();
        let est = Estimate::of(&errs);
        let want = classical_sampling_error(&p, nu).unwrap();
        assert!((est.mean - want).abs() < 3.0 * est.stderr);
    }
}
