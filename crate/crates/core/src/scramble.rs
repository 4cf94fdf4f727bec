//! Heisenberg-chain scrambling and k-uniform states.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pauli::{state_weights, Subset};
use crate::tensor::{c, CMatrix, CVector, DenseOperator, Propagator, StateVector};

/// Largest chain the dense Hamiltonian is built for.
pub const MAX_SITES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

/// `H = J Σ (XX + YY + ZZ) + h Σ Z` on nearest neighbours.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainSpec {
    pub n: usize,
    pub j: f64,
    pub h: f64,
    pub boundary: Boundary,
}

impl ChainSpec {
    pub fn open(n: usize, j: f64, h: f64) -> Self {
        Self {
            n,
            j,
            h,
            boundary: Boundary::Open,
        }
    }

    fn bonds(&self) -> Vec<(usize, usize)> {
        let mut b: Vec<(usize, usize)> = (0..self.n - 1).map(|q| (q, q + 1)).collect();
        // for two sites the wrap bond would repeat the only bond
        if self.boundary == Boundary::Periodic && self.n > 2 {
            b.push((self.n - 1, 0));
        }
        b
    }
}

pub fn heisenberg(spec: &ChainSpec) -> Result<DenseOperator> {
    if spec.n < 2 {
        return Err(Error::arg("a chain needs at least two sites"));
    }
    if spec.n > MAX_SITES {
        return Err(Error::DimensionLimit {
            dim: 1 << spec.n,
            limit: 1 << MAX_SITES,
        });
    }
    let n = spec.n;
    let d = 1usize << n;
    let bit = |q: usize| 1usize << (n - 1 - q);
    let bonds = spec.bonds();
    let mut m = CMatrix::zeros(d, d);
    for x in 0..d {
        let z = |q: usize| if x & bit(q) == 0 { 1.0 } else { -1.0 };
        let mut diag = spec.h * (0..n).map(z).sum::<f64>();
        for &(a, b) in &bonds {
            diag += spec.j * z(a) * z(b);
            if z(a) != z(b) {
                // XX + YY = 2 (|01⟩⟨10| + |10⟩⟨01|)
                m[(x ^ bit(a) ^ bit(b), x)] += c(2.0 * spec.j, 0.0);
            }
        }
        m[(x, x)] += c(diag, 0.0);
    }
    DenseOperator::qubits(m)
}

/// Per-time weight statistics of an evolving state.
#[derive(Clone, Debug, PartialEq)]
pub struct ScrambleTrace {
    pub n: usize,
    pub times: Vec<f64>,
    pub max_w: Vec<f64>,
    /// `W_0..W_n` at each time.
    pub level_weights: Vec<Vec<f64>>,
    pub tau_prep: f64,
    pub min_max_w: f64,
}

/// `1/(2^n (2^n + 1))`, the Haar-average subset weight.
pub fn haar_floor(n: usize) -> f64 {
    let d = (1u64 << n) as f64;
    1.0 / (d * (d + 1.0))
}

/// Evolve `psi0` under the chain and record the weight hierarchy on a grid.
/// `tau_prep` is the grid point with the smallest `max_s w_s`.
pub fn scan_scrambling(spec: &ChainSpec, psi0: &StateVector, t_grid: &[f64]) -> Result<ScrambleTrace> {
    if t_grid.is_empty() {
        return Err(Error::arg("empty time grid"));
    }
    let h = heisenberg(spec)?;
    if psi0.dim() != h.dim() {
        return Err(Error::arg(format!(
            "initial state dimension {} does not match chain dimension {}",
            psi0.dim(),
            h.dim()
        )));
    }
    let prop = Propagator::new(&h)?;
    let coeffs = prop.to_eigenbasis(psi0)?;
    let points = t_grid
        .par_iter()
        .map(|&t| weight_point(&prop, &coeffs, t))
        .collect::<Result<Vec<_>>>()?;
    let (max_w, level_weights): (Vec<f64>, Vec<Vec<f64>>) = points.into_iter().unzip();
    let best = (0..max_w.len())
        .min_by(|&a, &b| max_w[a].total_cmp(&max_w[b]))
        .expect("non-empty grid");
    Ok(ScrambleTrace {
        n: spec.n,
        times: t_grid.to_vec(),
        tau_prep: t_grid[best],
        min_max_w: max_w[best],
        max_w,
        level_weights,
    })
}

fn weight_point(prop: &Propagator, coeffs: &CVector, t: f64) -> Result<(f64, Vec<f64>)> {
    let psi = prop.evolve_components(coeffs, t);
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Internal(format!("norm drifted to {norm} at t = {t}")));
    }
    let w = state_weights(&psi)?;
    Ok((w.max_nonempty().1, w.level_weights()))
}

/// Golden-section search for the minimum of `max_s w_s` between the grid
/// neighbours of `trace.tau_prep`. Returns `(t, max_w)`.
pub fn refine_tau_prep(
    spec: &ChainSpec,
    psi0: &StateVector,
    trace: &ScrambleTrace,
    tol: f64,
) -> Result<(f64, f64)> {
    let k = trace
        .times
        .iter()
        .position(|&t| t == trace.tau_prep)
        .ok_or_else(|| Error::arg("trace does not contain its own tau_prep"))?;
    let lo = trace.times[k.saturating_sub(1)];
    let hi = trace.times[(k + 1).min(trace.times.len() - 1)];
    let prop = Propagator::new(&heisenberg(spec)?)?;
    let coeffs = prop.to_eigenbasis(psi0)?;
    let f = |t: f64| weight_point(&prop, &coeffs, t).map(|p| p.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    let t = (a + b) / 2.0;
    let ft = f(t)?;
    // never report something worse than the grid optimum
    if ft <= trace.min_max_w {
        Ok((t, ft))
    } else {
        Ok((trace.tau_prep, trace.min_max_w))
    }
}

impl ScrambleTrace {
    /// Columns `t,max_w,W_1..W_n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "max_w".to_string()];
        header.extend((1..=self.n).map(|k| format!("W_{k}")));
        wtr.write_record(&header)?;
        for (i, &t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.6}"), format!("{:.17e}", self.max_w[i])];
            row.extend(self.level_weights[i][1..].iter().map(|w| format!("{w:.17e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Sidecar summary: `tau_prep,min_max_w,haar_floor`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["tau_prep", "min_max_w", "haar_floor"])?;
        wtr.write_record(&[
            format!("{:.6}", self.tau_prep),
            format!("{:.17e}", self.min_max_w),
            format!("{:.17e}", haar_floor(self.n)),
        ])?;
        wtr.flush()?;
        Ok(())
    }
}

/// `(|0…0⟩ + |1…1⟩)/√2`; for one qubit this is `|+⟩`.
pub fn ghz(n: usize) -> Result<StateVector> {
    if n == 0 || n > crate::pauli::MAX_QUBITS {
        return Err(Error::arg(format!("GHZ state needs 1..={} qubits", crate::pauli::MAX_QUBITS)));
    }
    let d = 1usize << n;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = CVector::zeros(d);
    amps[0] = c(s, 0.0);
    amps[d - 1] = c(s, 0.0);
    StateVector::new(amps)
}

/// `Π CZ_ab |+⟩^n` over the given edges.
pub fn graph_state(n: usize, edges: &[(usize, usize)]) -> Result<StateVector> {
    if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= n || b >= n || a == b) {
        return Err(Error::arg(format!("invalid edge ({a}, {b}) for {n} vertices")));
    }
    let d = 1usize << n;
    let amp = 1.0 / (d as f64).sqrt();
    let bit = |x: usize, q: usize| (x >> (n - 1 - q)) & 1;
    let amps = CVector::from_fn(d, |x, _| {
        let parity: usize = edges.iter().map(|&(a, b)| bit(x, a) & bit(x, b)).sum();
        c(if parity.is_multiple_of(2) { amp } else { -amp }, 0.0)
    });
    StateVector::new(amps)
}

fn ring(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|q| (q, (q + 1) % n)).collect()
}

/// Built-in k-uniform states: GHZ for k = 1, ring graph states for
/// `(5, 2)` and `(6, 2)`.
pub fn kuniform_candidate(n: usize, k: usize) -> Result<StateVector> {
    match (n, k) {
        (n, 1) if n >= 2 => ghz(n),
        (5, 2) | (6, 2) => graph_state(n, &ring(n)),
        _ => Err(Error::Unsupported(format!(
            "no cataloged {k}-uniform state on {n} qubits"
        ))),
    }
}

/// Whether every marginal on at most `k` qubits is maximally mixed.
pub fn is_k_uniform(psi: &StateVector, k: usize) -> bool {
    let Some(n) = psi.num_qubits() else {
        return false;
    };
    if k == 0 {
        return true;
    }
    if k > n {
        return false;
    }
    let rho = psi.projector();
    (1u32..1 << n)
        .map(Subset)
        .filter(|s| s.len() <= k)
        .all(|s| {
            let marginal = rho.partial_trace(&s.qubits()).expect("qubits in range");
            marginal.max_abs_diff(&DenseOperator::maximally_mixed(&vec![2; s.len()])) <= 1e-9
        })
}

/// Initial product states for scrambling runs.
pub fn plus_state(n: usize) -> Result<StateVector> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = StateVector::from_slice(&[c(s, 0.0), c(s, 0.0)])?;
    StateVector::product(&vec![plus; n])
}

/// Computational basis state from a string of `0`/`1`, qubit 0 first.
pub fn bitstring_state(bits: &str) -> Result<StateVector> {
    let n = bits.len();
    if n == 0 || n > crate::pauli::MAX_QUBITS {
        return Err(Error::arg("bitstring length out of range"));
    }
    let mut idx = 0usize;
    for ch in bits.chars() {
        idx = idx * 2
            + match ch {
                '0' => 0,
                '1' => 1,
                other => return Err(Error::arg(format!("invalid bit '{other}'"))),
            };
    }
    Ok(StateVector::basis(1 << n, idx))
}

/// `|0101…⟩`.
pub fn neel_state(n: usize) -> Result<StateVector> {
    bitstring_state(&(0..n).map(|q| if q % 2 == 0 { '0' } else { '1' }).collect::<String>())
}
