//! Command line experiment runner.
//!
//! Every parameter can come from a flag, from a `key = value` config file
//! given with `--config`, or from its default, in that order of precedence.
//! Outputs start with a comment line holding the SHA-256 of the effective
//! parameters and the seed.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::choi::ChoiMatrix;
use crate::convergence::{chi_monte_carlo, thm1_rate, thm3_rate, thm4_bound, ChiMatrix};
use crate::error::{Error, Result};
use crate::fidelity::DistanceReport;
use crate::haar::SamplerSpec;
use crate::io;
use crate::metrology::{proxy_scan, write_proxy_csv, Protocol};
use crate::pauli::{state_weights, Subset};
use crate::rng::RngStream;
use crate::scramble::{
    bitstring_state, ghz, haar_floor, heisenberg, kuniform_candidate, neel_state, plus_state,
    refine_tau_prep, scan_scrambling, Boundary, ChainSpec,
};
use crate::tensor::{c, CMatrix, DenseOperator, StateVector};
use crate::tomography::{error_decompose, Preparation};

/// Largest chain the scramble subcommand accepts.
pub const SCRAMBLE_MAX_SITES: usize = 10;

#[derive(Parser, Debug)]
#[command(name = "choi-bench", version, about = "Reduced process tomography simulations")]
pub struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed for all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat key = value parameter file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path; standard output when absent.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte-Carlo covariance of a preparation strategy against theory.
    Converge {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long)]
        nu: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        /// haar-lbit, fixed-rotated:<state>, correlated-identical or kuniform:<n>,<k>
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Subset weights of a pure state.
    Weights {
        /// Built-in name (bell, ghz:<n>, plus:<n>, neel:<n>, bits:<b>, kuniform:<n>,<k>) or state file.
        #[arg(long)]
        state: Option<String>,
    },
    /// Weight hierarchy of a state evolving under a Heisenberg chain.
    Scramble {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "J")]
        j: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// open or periodic
        #[arg(long)]
        boundary: Option<String>,
        /// plus, neel or a bitstring
        #[arg(long)]
        init: Option<String>,
        /// Golden-section refinement of the optimal time.
        #[arg(long)]
        refine: Option<bool>,
        /// Summary CSV path; defaults next to --out.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Shot-level reduced tomography and its error decomposition.
    Tomography {
        /// unitary:<file>, kraus:<file>, heisenberg:<n>,<J>,<h>,<t> or identity:<n>
        #[arg(long)]
        channel: Option<String>,
        /// Comma-separated qubits of the reduced subsystem.
        #[arg(long = "s-qubits")]
        s_qubits: Option<String>,
        /// uniform or haar-lbit:<ell>
        #[arg(long)]
        prep: Option<String>,
        #[arg(long)]
        nu: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Sensitivity proxy and Fisher information of phase readout.
    Fisher {
        /// separable or ghz
        #[arg(long)]
        protocol: Option<String>,
        /// Comma-separated register sizes.
        #[arg(long = "nu-list")]
        nu_list: Option<String>,
        #[arg(long)]
        phi: Option<f64>,
    },
    /// Uhlmann fidelity and Frobenius distance of two density matrices.
    Fidelity {
        #[arg(long)]
        rho1: Option<PathBuf>,
        #[arg(long)]
        rho2: Option<PathBuf>,
    },
}

struct Resolver {
    file: BTreeMap<String, String>,
    file_path: String,
    used: BTreeMap<String, String>,
}

impl Resolver {
    fn get<T>(&mut self, key: &str, flag: Option<T>, default: Option<T>) -> Result<T>
    where
        T: FromStr + Display,
    {
        let value = match (flag, self.file.get(key)) {
            (Some(v), _) => v,
            (None, Some(raw)) => raw.parse().map_err(|_| Error::Parse {
                path: self.file_path.clone(),
                line: 0,
                message: format!("invalid value '{raw}' for '{key}'"),
            })?,
            (None, None) => default.ok_or_else(|| Error::arg(format!("missing required parameter --{key}")))?,
        };
        self.used.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    fn finish(&self) -> Result<()> {
        match self.file.keys().find(|k| !self.used.contains_key(*k)) {
            Some(k) => Err(Error::arg(format!("unknown config key '{k}'"))),
            None => Ok(()),
        }
    }
}

struct Output {
    body: Vec<u8>,
    summary: Option<(Option<PathBuf>, Vec<u8>)>,
}

fn sidecar(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::arg(format!("invalid {what} '{x}'"))))
        .collect()
}

/// Built-in state names or a state file.
pub fn resolve_state(spec: &str) -> Result<StateVector> {
    let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let count = || -> Result<usize> { arg.parse().map_err(|_| Error::arg(format!("invalid qubit count in '{spec}'"))) };
    match name {
        "bell" => ghz(2),
        "ghz" => ghz(count()?),
        "plus" => plus_state(count()?),
        "neel" => neel_state(count()?),
        "bits" => bitstring_state(arg),
        "kuniform" => {
            let nk: Vec<usize> = parse_list(arg, "kuniform parameter")?;
            match nk[..] {
                [n, k] => kuniform_candidate(n, k),
                _ => Err(Error::arg("kuniform expects <n>,<k>")),
            }
        }
        _ => StateVector::new(io::read_state(Path::new(spec))?),
    }
}

fn chi_row(strategy: &str, n: usize, ell: usize, nu: usize, chi: &ChiMatrix, theory: f64) -> Vec<String> {
    let mc = chi.sigma_max();
    vec![
        strategy.to_string(),
        n.to_string(),
        ell.to_string(),
        nu.to_string(),
        format!("{mc:.12e}"),
        format!("{theory:.12e}"),
        format!("{:.12e}", mc / theory),
        format!("{:.12e}", chi.sigma_max_stderr.unwrap_or(f64::NAN)),
    ]
}

fn converge(r: &mut Resolver, seed: u64, args: ConvergeArgs) -> Result<Output> {
    let strategy: String = r.get("strategy", args.strategy, Some("haar-lbit".into()))?;
    let nu = r.get("nu", args.nu, Some(1))?;
    let samples = r.get("samples", args.samples, Some(10_000))?;
    let stream = RngStream::new(seed, 0);
    let (kind, arg) = strategy.split_once(':').unwrap_or((strategy.as_str(), ""));
    let row = match kind {
        "haar-lbit" => {
            let n = r.get("n", args.n, Some(4))?;
            let ell = r.get("ell", args.ell, Some(1))?;
            let spec = SamplerSpec::haar_lbit(n, ell)?;
            let chi = chi_monte_carlo(&spec, samples, nu, stream, true)?;
            chi_row(&strategy, n, ell, nu, &chi, thm1_rate(n, ell, nu, 2)?)
        }
        "correlated-identical" => {
            let n = r.get("n", args.n, Some(4))?;
            let ell = r.get("ell", args.ell, Some(1))?;
            let spec = SamplerSpec::identical_groups(n, ell)?;
            let chi = chi_monte_carlo(&spec, samples, nu, stream, false)?;
            chi_row(&strategy, n, ell, nu, &chi, thm1_rate(n, ell, nu, 2)?)
        }
        "fixed-rotated" => {
            let base = resolve_state(arg)?;
            let ell = base.num_qubits().ok_or_else(|| Error::arg("base state is not a qubit state"))?;
            let n = r.get("n", args.n, Some(ell))?;
            if n % ell != 0 {
                return Err(Error::arg(format!("base state on {ell} qubits does not tile n = {n}")));
            }
            let tiled = StateVector::product(&vec![base.clone(); n / ell])?;
            let chi = chi_monte_carlo(&SamplerSpec::fixed_rotated(tiled)?, samples, nu, stream, true)?;
            chi_row(&strategy, n, ell, nu, &chi, thm3_rate(&base, nu, n)?)
        }
        "kuniform" => {
            let nk: Vec<usize> = parse_list(arg, "kuniform parameter")?;
            let [n, k] = nk[..] else {
                return Err(Error::arg("kuniform expects <n>,<k>"));
            };
            let base = kuniform_candidate(n, k)?;
            let chi = chi_monte_carlo(&SamplerSpec::fixed_rotated(base)?, samples, nu, stream, true)?;
            chi_row(&strategy, n, n, nu, &chi, thm4_bound(n, k, nu))
        }
        _ => return Err(Error::arg(format!("unknown strategy '{strategy}'"))),
    };
    let mut body = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut body);
        w.write_record([
            "strategy",
            "n",
            "ell",
            "nu",
            "sigma_max_mc",
            "sigma_max_analytic_or_bound",
            "ratio",
            "stderr",
        ])?;
        w.write_record(&row)?;
        w.flush()?;
    }
    Ok(Output { body, summary: None })
}

struct ConvergeArgs {
    n: Option<usize>,
    ell: Option<usize>,
    nu: Option<usize>,
    samples: Option<usize>,
    strategy: Option<String>,
}

fn heisenberg_unitary(spec_text: &str) -> Result<DenseOperator> {
    let parts: Vec<&str> = spec_text.split(',').collect();
    let [n, j, h, t] = parts[..] else {
        return Err(Error::arg("heisenberg channel expects <n>,<J>,<h>,<t>"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::arg(format!("invalid number '{s}'")));
    let n: usize = n.trim().parse().map_err(|_| Error::arg(format!("invalid site count '{n}'")))?;
    let t = num(t)?;
    let ham = heisenberg(&ChainSpec::open(n, num(j)?, num(h)?))?;
    let eig = ham.herm_eig()?;
    let phases = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        eig.values.len(),
        eig.values.iter().map(|&l| c((-l * t).cos(), (-l * t).sin())),
    ));
    DenseOperator::qubits(&eig.vectors * phases * eig.vectors.adjoint())
}

/// Channel from `unitary:<file>`, `kraus:<file>`, `heisenberg:<n>,<J>,<h>,<t>`
/// or `identity:<n>`.
pub fn resolve_channel(spec: &str) -> Result<ChoiMatrix> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Error::arg(format!("channel '{spec}' lacks a kind prefix")))?;
    match kind {
        "unitary" => ChoiMatrix::from_unitary(&DenseOperator::qubits(io::read_matrix(Path::new(arg))?)?),
        "kraus" => {
            let ks = io::read_matrices(Path::new(arg))?
                .into_iter()
                .map(DenseOperator::qubits)
                .collect::<Result<Vec<_>>>()?;
            ChoiMatrix::from_kraus(&ks)
        }
        "heisenberg" => ChoiMatrix::from_unitary(&heisenberg_unitary(arg)?),
        "identity" => {
            let n: usize = arg.parse().map_err(|_| Error::arg(format!("invalid qubit count '{arg}'")))?;
            if n == 0 || n > crate::tomography::MAX_CHANNEL_QUBITS {
                return Err(Error::arg("identity channel size out of range"));
            }
            Ok(ChoiMatrix::identity(n))
        }
        _ => Err(Error::arg(format!("unknown channel kind '{kind}'"))),
    }
}

fn csv_to_vec(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut v = Vec::new();
    f(&mut v)?;
    Ok(v)
}

fn execute(cli: Cli) -> Result<()> {
    let (file, file_path) = match &cli.common.config {
        Some(p) => (io::read_config(p)?, p.display().to_string()),
        None => (BTreeMap::new(), String::new()),
    };
    let mut r = Resolver {
        file,
        file_path,
        used: BTreeMap::new(),
    };
    let seed = r.get("seed", cli.common.seed, Some(0u64))?;
    let threads: usize = r.get("threads", cli.common.threads, Some(0))?;
    let out_path: Option<PathBuf> = match (cli.common.out.clone(), r.file.get("out").cloned()) {
        (Some(p), _) => Some(p),
        (None, Some(p)) => Some(PathBuf::from(p)),
        (None, None) => None,
    };
    r.used.insert("out".into(), String::new());

    let run = |r: &mut Resolver| -> Result<Output> {
        match cli.command {
            Command::Converge { n, ell, nu, samples, strategy } => {
                r.used.insert("command".into(), "converge".into());
                converge(r, seed, ConvergeArgs { n, ell, nu, samples, strategy })
            }
            Command::Weights { state } => {
                r.used.insert("command".into(), "weights".into());
                let spec: String = r.get("state", state, None)?;
                let w = state_weights(&resolve_state(&spec)?)?;
                Ok(Output {
                    body: csv_to_vec(|v| w.write_csv(v))?,
                    summary: None,
                })
            }
            Command::Scramble { n, j, h, tmax, dt, boundary, init, refine, summary } => {
                r.used.insert("command".into(), "scramble".into());
                let n = r.get("n", n, Some(7))?;
                let j = r.get("J", j, Some(1.0))?;
                let h = r.get("h", h, Some(1.0))?;
                let tmax = r.get("tmax", tmax, Some(20.0))?;
                let dt = r.get("dt", dt, Some(0.05))?;
                let boundary: String = r.get("boundary", boundary, Some("open".into()))?;
                let init: String = r.get("init", init, Some("plus".into()))?;
                let refine = r.get("refine", refine, Some(false))?;
                if n > SCRAMBLE_MAX_SITES {
                    return Err(Error::DimensionLimit {
                        dim: 1 << n,
                        limit: 1 << SCRAMBLE_MAX_SITES,
                    });
                }
                if dt.is_nan() || dt <= 0.0 || tmax.is_nan() || tmax < 0.0 {
                    return Err(Error::arg("need dt > 0 and tmax >= 0"));
                }
                let boundary = match boundary.as_str() {
                    "open" => Boundary::Open,
                    "periodic" => Boundary::Periodic,
                    other => return Err(Error::arg(format!("unknown boundary '{other}'"))),
                };
                let psi0 = match init.as_str() {
                    "plus" => plus_state(n)?,
                    "neel" => neel_state(n)?,
                    bits if bits.len() == n => bitstring_state(bits)?,
                    other => return Err(Error::arg(format!("unknown initial state '{other}'"))),
                };
                let spec = ChainSpec { n, j, h, boundary };
                let steps = (tmax / dt).round() as usize;
                let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
                let mut trace = scan_scrambling(&spec, &psi0, &grid)?;
                if refine {
                    let (t, w) = refine_tau_prep(&spec, &psi0, &trace, 1e-6)?;
                    trace.tau_prep = t;
                    trace.min_max_w = w;
                }
                debug_assert_eq!(haar_floor(n), crate::scramble::haar_floor(trace.n));
                Ok(Output {
                    body: csv_to_vec(|v| trace.write_csv(v))?,
                    summary: Some((summary, csv_to_vec(|v| trace.write_summary_csv(v))?)),
                })
            }
            Command::Tomography { channel, s_qubits, prep, nu, trials, summary } => {
                r.used.insert("command".into(), "tomography".into());
                let channel: String = r.get("channel", channel, None)?;
                let s_text: String = r.get("s_qubits", s_qubits, Some("0".into()))?;
                let prep_text: String = r.get("prep", prep, Some("haar-lbit:1".into()))?;
                let nu = r.get("nu", nu, Some(1000))?;
                let trials = r.get("trials", trials, Some(200))?;
                let phi = resolve_channel(&channel)?;
                let qubits: Vec<usize> = parse_list(&s_text, "qubit index")?;
                if let Some(&q) = qubits.iter().find(|&&q| q >= phi.n()) {
                    return Err(Error::arg(format!("qubit {q} out of range for {} qubits", phi.n())));
                }
                let s = Subset::from_qubits(&qubits);
                if s.len() != qubits.len() {
                    return Err(Error::arg("repeated qubit in --s-qubits"));
                }
                let rest = phi.n() - s.len();
                let prep = match prep_text.split_once(':') {
                    None if prep_text == "uniform" => Preparation::Uniform,
                    Some(("haar-lbit", ell)) => {
                        let ell = ell.parse().map_err(|_| Error::arg(format!("invalid group size '{ell}'")))?;
                        Preparation::Sampled(SamplerSpec::haar_lbit(rest, ell)?)
                    }
                    _ => return Err(Error::arg(format!("unknown preparation '{prep_text}'"))),
                };
                let res = error_decompose(&phi, s, &prep, nu, trials, RngStream::new(seed, 0))?;
                Ok(Output {
                    body: csv_to_vec(|v| res.write_csv(v))?,
                    summary: Some((summary, csv_to_vec(|v| res.write_summary_csv(v))?)),
                })
            }
            Command::Fisher { protocol, nu_list, phi } => {
                r.used.insert("command".into(), "fisher".into());
                let protocol: String = r.get("protocol", protocol, Some("ghz".into()))?;
                let nus: String = r.get("nu_list", nu_list, Some("2,3,4,5,6".into()))?;
                let theta = r.get("phi", phi, Some(0.3))?;
                let protocol = match protocol.as_str() {
                    "ghz" => Protocol::Ghz,
                    "separable" => Protocol::Separable,
                    other => return Err(Error::arg(format!("unknown protocol '{other}'"))),
                };
                let rows = proxy_scan(protocol, &parse_list(&nus, "register size")?, theta)?;
                Ok(Output {
                    body: csv_to_vec(|v| write_proxy_csv(&rows, v))?,
                    summary: None,
                })
            }
            Command::Fidelity { rho1, rho2 } => {
                r.used.insert("command".into(), "fidelity".into());
                let p1: PathBuf = r.get("rho1", rho1.map(|p| p.display().to_string()), None::<String>)?.into();
                let p2: PathBuf = r.get("rho2", rho2.map(|p| p.display().to_string()), None::<String>)?.into();
                let a = DenseOperator::qubits(io::read_matrix(&p1)?)?;
                let b = DenseOperator::qubits(io::read_matrix(&p2)?)?;
                let rep = DistanceReport::compare(&a, &b)?;
                Ok(Output {
                    body: csv_to_vec(|v| rep.write_csv(v))?,
                    summary: None,
                })
            }
        }
    };

    let output = if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?
            .install(|| run(&mut r))?
    } else {
        run(&mut r)?
    };
    r.finish()?;

    let mut hashed = r.used.clone();
    hashed.remove("threads");
    hashed.remove("out");
    let emit = |body: &[u8]| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        io::write_provenance(&mut buf, &hashed, seed)?;
        buf.extend_from_slice(body);
        Ok(buf)
    };
    let main_bytes = emit(&output.body)?;
    let stdout = std::io::stdout();
    match &out_path {
        Some(p) => std::fs::write(p, &main_bytes)?,
        None => stdout.lock().write_all(&main_bytes)?,
    }
    if let Some((explicit, bytes)) = output.summary {
        let target = explicit.or_else(|| out_path.as_deref().map(sidecar));
        let bytes = emit(&bytes)?;
        match target {
            Some(p) => std::fs::write(p, bytes)?,
            None => {
                let mut lock = stdout.lock();
                writeln!(lock)?;
                lock.write_all(&bytes)?;
            }
        }
    }
    Ok(())
}

/// Parse arguments, run, and return the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_states() {
        assert_eq!(resolve_state("bell").unwrap(), ghz(2).unwrap());
        assert_eq!(resolve_state("plus:3").unwrap().dim(), 8);
        assert_eq!(resolve_state("bits:101").unwrap().amplitudes()[5], c(1.0, 0.0));
        assert!(resolve_state("kuniform:5,2").is_ok());
        assert!(resolve_state("kuniform:5").is_err());
        assert!(resolve_state("ghz:x").is_err());
    }

    #[test]
    fn channels() {
        assert_eq!(resolve_channel("identity:2").unwrap(), ChoiMatrix::identity(2));
        let ch = resolve_channel("heisenberg:3,1,1,0.4").unwrap();
        ch.validate().unwrap();
        assert!(ch.reduce(Subset(1)).unwrap().stochasticity_deviation() < 1e-9);
        let zero_time = resolve_channel("heisenberg:2,1,1,0").unwrap();
        assert!(zero_time.matrix().max_abs_diff(ChoiMatrix::identity(2).matrix()) < 1e-12);
        assert!(resolve_channel("bogus:1").is_err());
        assert!(resolve_channel("heisenberg:3,1,1").is_err());
    }

    #[test]
    fn resolver_precedence() {
        let mut file = BTreeMap::new();
        file.insert("nu".to_string(), "7".to_string());
        file.insert("n".to_string(), "3".to_string());
        let mut r = Resolver {
            file,
            file_path: "cfg".into(),
            used: BTreeMap::new(),
        };
        assert_eq!(r.get("nu", Some(9usize), Some(1)).unwrap(), 9);
        assert_eq!(r.get("n", None, Some(1usize)).unwrap(), 3);
        assert_eq!(r.get("samples", None, Some(5usize)).unwrap(), 5);
        assert!(r.get::<usize>("missing", None, None).is_err());
        r.finish().unwrap();
        r.file.insert("typo".into(), "1".into());
        assert!(r.finish().is_err());
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar(Path::new("/tmp/run.csv")), PathBuf::from("/tmp/run.summary.csv"));
    }
}
