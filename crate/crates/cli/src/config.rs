//! Key-value configuration shared by the subcommands.
//!
//! Keys live in a flat dotted namespace. They can come from a plain-text
//! config file (`key = value` lines, `#` comments) and from command-line
//! flags (`--key value` or `--key=value`); flags win. Unknown keys are
//! rejected so typos fail loudly.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ditomo::bench::{BenchConfig, MethodId};
use ditomo::di::SolverConfig;
use ditomo::estimators::MleConfig;
use ditomo::simulation::TestStateKind;
use ditomo::{Error, Result};

/// One config key: name, default (as text) and description for `--help`.
pub struct KeySpec {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

pub const KEYS: &[KeySpec] = &[
    KeySpec {
        name: "master_seed",
        default: "1",
        help: "Seed for the deterministic run-seed derivation",
    },
    KeySpec {
        name: "output_dir",
        default: "out",
        help: "Directory for benchmark output files",
    },
    KeySpec {
        name: "runs",
        default: "1000",
        help: "Monte-Carlo runs per state",
    },
    KeySpec {
        name: "samples",
        default: "1000",
        help: "Mean total event count per simulated dataset",
    },
    KeySpec {
        name: "states",
        default: "tau1,tau2,tau3",
        help: "Comma-separated test states",
    },
    KeySpec {
        name: "methods",
        default: "dd_ml_partial,dd_ml_full,di_dd_ml,lin_partial,lin_full",
        help: "Comma-separated reconstruction methods",
    },
    KeySpec {
        name: "jobs",
        default: "0",
        help: "Worker threads (0 = all available cores)",
    },
    KeySpec {
        name: "mle.epsilon0",
        default: "1e6",
        help: "Initial dilution parameter of the ML iteration",
    },
    KeySpec {
        name: "mle.epsilon_min",
        default: "1e-10",
        help: "ML iteration stops once the dilution parameter drops below this",
    },
    KeySpec {
        name: "mle.kl_tol",
        default: "1e-14",
        help: "Minimal KL improvement once dilution has bottomed out",
    },
    KeySpec {
        name: "mle.max_iters",
        default: "100000",
        help: "Candidate-evaluation cap of the ML iteration",
    },
    KeySpec {
        name: "mle.prob_floor",
        default: "1e-15",
        help: "Floor for predicted probabilities inside the ML update",
    },
    KeySpec {
        name: "di.gap_tol",
        default: "1e-7",
        help: "Barrier stops once dim/t falls below this",
    },
    KeySpec {
        name: "di.inner_tol",
        default: "1e-8",
        help: "Gradient-norm target of the barrier subproblems",
    },
    KeySpec {
        name: "di.t0",
        default: "1",
        help: "Initial barrier weight",
    },
    KeySpec {
        name: "di.t_factor",
        default: "10",
        help: "Barrier weight multiplier between stages",
    },
    KeySpec {
        name: "di.max_inner_iters",
        default: "5000",
        help: "Iteration cap per barrier stage",
    },
];

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub runs: usize,
    pub samples: f64,
    pub states: Vec<TestStateKind>,
    pub methods: Vec<MethodId>,
    pub jobs: usize,
    pub mle: MleConfig,
    pub di: SolverConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            master_seed: 1,
            output_dir: PathBuf::from("out"),
            runs: 1000,
            samples: 1000.0,
            states: TestStateKind::ALL.to_vec(),
            methods: MethodId::ALL.to_vec(),
            jobs: 0,
            mle: MleConfig::default(),
            di: SolverConfig::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("invalid value '{value}' for key '{key}'")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse_num(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse(format!("value for '{key}' must be finite")))
    }
}

impl Config {
    /// Apply one `key = value` assignment.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "master_seed" => self.master_seed = parse_num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "runs" => self.runs = parse_num(key, value)?,
            "samples" => self.samples = parse_f64(key, value)?,
            "states" => {
                self.states = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(TestStateKind::parse)
                    .collect::<Result<_>>()?;
            }
            "methods" => {
                self.methods = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(MethodId::parse)
                    .collect::<Result<_>>()?;
            }
            "jobs" => self.jobs = parse_num(key, value)?,
            "mle.epsilon0" => self.mle.epsilon0 = parse_f64(key, value)?,
            "mle.epsilon_min" => self.mle.epsilon_min = parse_f64(key, value)?,
            "mle.kl_tol" => self.mle.kl_tol = parse_f64(key, value)?,
            "mle.max_iters" => self.mle.max_iters = parse_num(key, value)?,
            "mle.prob_floor" => self.mle.prob_floor = parse_f64(key, value)?,
            "di.gap_tol" => self.di.gap_tol = parse_f64(key, value)?,
            "di.inner_tol" => self.di.inner_tol = parse_f64(key, value)?,
            "di.t0" => self.di.t0 = parse_f64(key, value)?,
            "di.t_factor" => self.di.t_factor = parse_f64(key, value)?,
            "di.max_inner_iters" => self.di.max_inner_iters = parse_num(key, value)?,
            other => {
                return Err(Error::Parse(format!(
                    "unknown config key '{other}' (see --help for the full list)"
                )))
            }
        }
        Ok(())
    }

    /// Load a `key = value` config file.
    pub fn load_file(&mut self, path: &str) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("reading config '{path}': {e}")))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("{path}:{}: expected 'key = value'", lineno + 1))
            })?;
            self.apply(key.trim(), value.trim())
                .map_err(|e| Error::Parse(format!("{path}:{}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn to_bench_config(&self) -> BenchConfig {
        BenchConfig {
            states: self.states.clone(),
            methods: self.methods.clone(),
            runs: self.runs,
            samples: self.samples,
            master_seed: self.master_seed,
            jobs: self.jobs,
            mle: self.mle.clone(),
            di: self.di.clone(),
        }
    }
}

/// Split command-line words into `key -> value` assignments. Accepts
/// `--key value` and `--key=value`.
pub fn parse_flag_assignments(args: &[String]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut iter = args.iter().peekable();
    while let Some(arg) = iter.next() {
        let stripped = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Parse(format!("expected a --flag, got '{arg}'")))?;
        let (key, value) = if let Some((k, v)) = stripped.split_once('=') {
            (k.to_string(), v.to_string())
        } else {
            let value = iter
                .next()
                .ok_or_else(|| Error::Parse(format!("flag '--{stripped}' needs a value")))?;
            (stripped.to_string(), value.clone())
        };
        if out.insert(key.clone(), value).is_some() {
            return Err(Error::Parse(format!("flag '--{key}' given twice")));
        }
    }
    Ok(out)
}
