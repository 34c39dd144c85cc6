//! Experiment configuration: `[section]` headers and `key = value` lines.
//! `#` starts a comment. Every key is optional except `problem.kind`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use vrvi::problems::{Loss, NpSpec, SetVariant, SyntheticSpec};
use vrvi::VrviError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Savrep,
    SavrepM,
    Extragradient,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Savrep => "savrep",
            Solver::SavrepM => "savrep_m",
            Solver::Extragradient => "extragradient",
        }
    }
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "savrep" => Ok(Solver::Savrep),
            "savrep_m" => Ok(Solver::SavrepM),
            "extragradient" => Ok(Solver::Extragradient),
            _ => Err(format!("unknown solver '{s}' (savrep, savrep_m, extragradient)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BilinearSpec {
    pub n_x: usize,
    pub n_y: usize,
    pub m1: usize,
    pub m2: usize,
    pub l_g: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    StronglyMonotone(SyntheticSpec),
    Bilinear(BilinearSpec),
    /// `dual_cap` bounds the multipliers of the KKT system; too small a cap
    /// changes the solution, so it has no default.
    Np {
        spec: NpSpec,
        dataset: Option<PathBuf>,
        dual_cap: f64,
    },
    /// Instance previously written by `vrvi gen`; NP instances need `dual_cap`.
    File {
        path: PathBuf,
        dual_cap: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub bias: f64,
    pub std: f64,
    pub batch: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub solver: Solver,
    pub budget: u64,
    pub seeds: Vec<u64>,
    pub log_interval: Option<u64>,
    pub tol: Option<f64>,
    pub output: PathBuf,
    /// Record wall-clock time in traces; off makes CSVs byte-reproducible.
    pub wall_clock: bool,
    /// Start from a per-seed random feasible point instead of the origin.
    pub random_start: bool,
    pub problem: ProblemSpec,
    pub noise: NoiseSpec,
    /// Tikhonov perturbation `mu` added to the operator.
    pub perturbation: f64,
}

#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "config line {}: {}", self.line, self.msg)
        } else {
            write!(f, "config: {}", self.msg)
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<ConfigError> for VrviError {
    fn from(e: ConfigError) -> Self {
        VrviError::Config(e.to_string())
    }
}

struct Entries {
    map: BTreeMap<(String, String), (String, usize)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or(ConfigError {
                    line: line_no,
                    msg: format!("malformed section header '{line}'"),
                })?;
                section = name.trim().to_string();
                if !["experiment", "problem", "noise", "perturbation"].contains(&section.as_str()) {
                    return Err(ConfigError {
                        line: line_no,
                        msg: format!("unknown section [{section}]"),
                    });
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError {
                line: line_no,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            if section.is_empty() {
                return Err(ConfigError {
                    line: line_no,
                    msg: "key outside of a section".into(),
                });
            }
            let key = (section.clone(), key.trim().to_string());
            if map.contains_key(&key) {
                return Err(ConfigError {
                    line: line_no,
                    msg: format!("duplicate key {}.{}", key.0, key.1),
                });
            }
            map.insert(key, (value.trim().to_string(), line_no));
        }
        Ok(Entries { map })
    }

    fn take_raw(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.map.remove(&(section.to_string(), key.to_string()))
    }

    fn take<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.take_raw(section, key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|e| ConfigError {
                line,
                msg: format!("{section}.{key}: cannot parse '{v}': {e}"),
            }),
        }
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.take(section, key)?.unwrap_or(default))
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some(((s, k), (_, line))) => Err(ConfigError {
                line,
                msg: format!("unknown key {s}.{k}"),
            }),
        }
    }
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let seeds = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|e| format!("bad seed '{}': {e}", t.trim()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if seeds.is_empty() {
        return Err("empty seed list".into());
    }
    Ok(seeds)
}

fn opt_u64(s: &str) -> Result<Option<u64>, String> {
    if s == "none" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|e| format!("{e}"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut e = Entries::parse(text)?;
        let solver: Solver = e.get("experiment", "solver", Solver::Savrep)?;
        let budget = e.get("experiment", "budget", 100_000u64)?;
        let seeds = match e.take_raw("experiment", "seeds") {
            None => (1..=5).collect(),
            Some((v, line)) => parse_seeds(&v).map_err(|msg| ConfigError { line, msg })?,
        };
        let log_interval = match e.take_raw("experiment", "log_interval") {
            None => None,
            Some((v, line)) => opt_u64(&v).map_err(|msg| ConfigError {
                line,
                msg: format!("log_interval: {msg}"),
            })?,
        };
        let tol: Option<f64> = e.take("experiment", "tol")?;
        let output = e.get("experiment", "output", PathBuf::from("out"))?;
        let wall_clock = e.get("experiment", "wall_clock", true)?;
        let start: String = e.get("experiment", "start", "origin".to_string())?;
        let random_start = match start.as_str() {
            "origin" => false,
            "random" => true,
            other => {
                return Err(ConfigError {
                    line: 0,
                    msg: format!("experiment.start: expected origin or random, got '{other}'"),
                })
            }
        };

        let (kind, kind_line) = e.take_raw("problem", "kind").ok_or(ConfigError {
            line: 0,
            msg: "missing problem.kind".into(),
        })?;
        let problem = match kind.as_str() {
            "strongly_monotone" => {
                let mut s = SyntheticSpec::new(
                    e.get("problem", "dim", 10)?,
                    e.get("problem", "m1", 10)?,
                    e.get("problem", "m2", 10)?,
                    e.get("problem", "mu_h", 0.1)?,
                    e.get("problem", "l_h", 1.0)?,
                    e.get("problem", "l_g", 1.0)?,
                    e.get("problem", "seed", 1)?,
                );
                let set: String = e.get("problem", "set", "whole".to_string())?;
                s.set = match set.as_str() {
                    "whole" => SetVariant::Whole,
                    "ball" => SetVariant::Ball {
                        radius: e.get("problem", "radius", 1.0)?,
                    },
                    other => {
                        return Err(ConfigError {
                            line: 0,
                            msg: format!("problem.set: unknown set '{other}'"),
                        })
                    }
                };
                ProblemSpec::StronglyMonotone(s)
            }
            "bilinear" => ProblemSpec::Bilinear(BilinearSpec {
                n_x: e.get("problem", "n_x", 10)?,
                n_y: e.get("problem", "n_y", 10)?,
                m1: e.get("problem", "m1", 10)?,
                m2: e.get("problem", "m2", 10)?,
                l_g: e.get("problem", "l_g", 1.0)?,
                seed: e.get("problem", "seed", 1)?,
            }),
            "np" => {
                let d = NpSpec::default();
                let loss_name: String = e.get("problem", "loss", d.loss.name().to_string())?;
                let loss = Loss::from_name(&loss_name).ok_or(ConfigError {
                    line: 0,
                    msg: format!("problem.loss: unknown loss '{loss_name}'"),
                })?;
                let spec = NpSpec {
                    n_features: e.get("problem", "n_features", d.n_features)?,
                    n0: e.get("problem", "n0", d.n0)?,
                    n1: e.get("problem", "n1", d.n1)?,
                    m1: e.get("problem", "m1", d.m1)?,
                    m2: e.get("problem", "m2", d.m2)?,
                    loss,
                    lambda: e.get("problem", "lambda", d.lambda)?,
                    r1: e.get("problem", "r1", d.r1)?,
                    seed: e.get("problem", "seed", d.seed)?,
                    separation: e.get("problem", "separation", d.separation)?,
                };
                ProblemSpec::Np {
                    spec,
                    dataset: e.take("problem", "dataset")?,
                    dual_cap: e.take("problem", "dual_cap")?.ok_or(ConfigError {
                        line: kind_line,
                        msg: "problem.dual_cap is required for kind = np".into(),
                    })?,
                }
            }
            "file" => ProblemSpec::File {
                path: e.take("problem", "path")?.ok_or(ConfigError {
                    line: 0,
                    msg: "problem.path is required".into(),
                })?,
                dual_cap: e.take("problem", "dual_cap")?,
            },
            other => {
                return Err(ConfigError {
                    line: kind_line,
                    msg: format!("unknown problem kind '{other}' (strongly_monotone, bilinear, np, file)"),
                })
            }
        };
        let noise = NoiseSpec {
            bias: e.get("noise", "bias", 0.0)?,
            std: e.get("noise", "std", 0.0)?,
            batch: e.get("noise", "batch", 1)?,
        };
        let perturbation = e.get("perturbation", "mu", 0.0)?;
        e.finish()?;
        let cfg = ExperimentConfig {
            solver,
            budget,
            seeds,
            log_interval,
            tol,
            output,
            wall_clock,
            random_start,
            problem,
            noise,
            perturbation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| {
            Err(ConfigError {
                line: 0,
                msg: msg.into(),
            })
        };
        if !(self.noise.bias >= 0.0 && self.noise.std >= 0.0) {
            return bad("noise levels must be nonnegative");
        }
        if self.noise.batch == 0 {
            return bad("noise.batch must be at least 1");
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return bad("perturbation.mu must be finite and nonnegative");
        }
        if self.tol.is_some_and(|t| !(t > 0.0)) {
            return bad("experiment.tol must be positive");
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "solver = {}", self.solver.name());
        let _ = writeln!(s, "budget = {}", self.budget);
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "seeds = {}", seeds.join(","));
        if let Some(l) = self.log_interval {
            let _ = writeln!(s, "log_interval = {l}");
        }
        if let Some(t) = self.tol {
            let _ = writeln!(s, "tol = {t:?}");
        }
        let _ = writeln!(s, "output = {}", self.output.display());
        let _ = writeln!(s, "wall_clock = {}", self.wall_clock);
        let _ = writeln!(s, "start = {}", if self.random_start { "random" } else { "origin" });
        let _ = writeln!(s, "\n[problem]");
        match &self.problem {
            ProblemSpec::StronglyMonotone(p) => {
                let _ = writeln!(s, "kind = strongly_monotone");
                let _ = writeln!(s, "dim = {}\nm1 = {}\nm2 = {}", p.dim, p.m1, p.m2);
                let _ = writeln!(
                    s,
                    "mu_h = {:?}\nl_h = {:?}\nl_g = {:?}\nseed = {}",
                    p.mu_h, p.l_h, p.l_g, p.seed
                );
                match p.set {
                    SetVariant::Whole => {
                        let _ = writeln!(s, "set = whole");
                    }
                    SetVariant::Ball { radius } => {
                        let _ = writeln!(s, "set = ball\nradius = {radius:?}");
                    }
                }
            }
            ProblemSpec::Bilinear(b) => {
                let _ = writeln!(s, "kind = bilinear");
                let _ = writeln!(
                    s,
                    "n_x = {}\nn_y = {}\nm1 = {}\nm2 = {}\nl_g = {:?}\nseed = {}",
                    b.n_x, b.n_y, b.m1, b.m2, b.l_g, b.seed
                );
            }
            ProblemSpec::Np {
                spec,
                dataset,
                dual_cap,
            } => {
                let _ = writeln!(s, "kind = np");
                let _ = writeln!(
                    s,
                    "n_features = {}\nn0 = {}\nn1 = {}",
                    spec.n_features, spec.n0, spec.n1
                );
                let _ = writeln!(s, "m1 = {}\nm2 = {}\nloss = {}", spec.m1, spec.m2, spec.loss.name());
                let _ = writeln!(
                    s,
                    "lambda = {:?}\nr1 = {:?}\nseed = {}",
                    spec.lambda, spec.r1, spec.seed
                );
                let _ = writeln!(s, "separation = {:?}", spec.separation);
                if let Some(d) = dataset {
                    let _ = writeln!(s, "dataset = {}", d.display());
                }
                let _ = writeln!(s, "dual_cap = {dual_cap:?}");
            }
            ProblemSpec::File { path, dual_cap } => {
                let _ = writeln!(s, "kind = file\npath = {}", path.display());
                if let Some(c) = dual_cap {
                    let _ = writeln!(s, "dual_cap = {c:?}");
                }
            }
        }
        let _ = writeln!(s, "\n[noise]");
        let _ = writeln!(
            s,
            "bias = {:?}\nstd = {:?}\nbatch = {}",
            self.noise.bias, self.noise.std, self.noise.batch
        );
        let _ = writeln!(s, "\n[perturbation]");
        let _ = writeln!(s, "mu = {:?}", self.perturbation);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# acceptance-size instance
[experiment]
solver = savrep
budget = 5000
seeds = 3, 4
tol = 1e-8
output = runs/a

[problem]
kind = strongly_monotone
dim = 5
m1 = 4
m2 = 3
mu_h = 0.2
set = ball
radius = 2.5

[noise]
std = 0.01
";

    #[test]
    fn parses_sample() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.solver, Solver::Savrep);
        assert_eq!(c.seeds, vec![3, 4]);
        assert_eq!(c.tol, Some(1e-8));
        assert_eq!(c.noise.std, 0.01);
        match &c.problem {
            ProblemSpec::StronglyMonotone(s) => {
                assert_eq!((s.dim, s.m1, s.m2), (5, 4, 3));
                assert_eq!(s.set, SetVariant::Ball { radius: 2.5 });
                assert_eq!(s.l_h, 1.0);
            }
            p => panic!("{p:?}"),
        }
    }

    #[test]
    fn round_trips_through_text() {
        let mut texts = vec![SAMPLE.to_string()];
        texts.push("[problem]\nkind = np\ndual_cap = 20\nloss = logistic\nr1 = 0.4\ndataset = d.svm\n[perturbation]\nmu = 1e-5\n".into());
        texts.push(
            "[experiment]\nstart = random\nsolver = savrep_m\nlog_interval = 7\n[problem]\nkind = bilinear\nn_x = 3\n"
                .into(),
        );
        texts.push("[problem]\nkind = file\npath = p.bin\n".into());
        for t in texts {
            let c = ExperimentConfig::parse(&t).unwrap();
            let again = ExperimentConfig::parse(&c.to_text()).unwrap();
            assert_eq!(c, again);
            assert_eq!(c.to_text(), again.to_text());
        }
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let cases = [
            ("[problem]\nkind = bilinear\nfoo = 1\n", "unknown key problem.foo"),
            ("[problem]\nkind = bilinear\nmu_h = 1\n", "unknown key problem.mu_h"),
            ("[extra]\n", "unknown section"),
            ("[problem]\nkind = np\ndual_cap = 5\nm1 = x\n", "cannot parse"),
            ("[problem]\nkind = np\n", "dual_cap is required"),
            ("kind = np\n", "outside of a section"),
            ("[problem]\nkind = np\nkind = np\n", "duplicate"),
            ("[experiment]\nbudget = 1\n", "missing problem.kind"),
            ("[problem]\nkind = circle\n", "unknown problem kind"),
            ("[problem\nkind = np\n", "malformed section"),
            ("[problem]\nkind = np\ndual_cap = 5\n[noise]\nbatch = 0\n", "batch"),
        ];
        for (text, needle) in cases {
            let e = ExperimentConfig::parse(text).unwrap_err();
            assert!(e.to_string().contains(needle), "{text:?}: {e}");
        }
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1,2, 9").unwrap(), vec![1, 2, 9]);
        assert!(parse_seeds("1,,2").is_err());
    }
}
