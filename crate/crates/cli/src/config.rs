//! Run configuration: key = value lines with optional [section] headers.
//! Section headers prefix the keys that follow (`[ic]` + `eps = 0.1` is the
//! same as a top-level `ic.eps = 0.1`). Unknown keys are hard errors that
//! cite the offending line.

use std::fmt;
use std::path::PathBuf;

use vicsek_circle::solver::{FluxScheme, SolverConfig, Stepping};

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: Option<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Command {
    Simulate,
    Rates,
    Verify,
    Stability,
    Uniqueness,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum OutputFormats {
    Csv,
    Json,
    Both,
}

impl OutputFormats {
    pub fn csv(&self) -> bool {
        matches!(self, OutputFormats::Csv | OutputFormats::Both)
    }
    pub fn json(&self) -> bool {
        matches!(self, OutputFormats::Json | OutputFormats::Both)
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub enum InitialCondition {
    Uniform,
    VonMises {
        kappa: f64,
        mean_angle: f64,
    },
    Equilibrium {
        direction_angle: f64,
    },
    Perturbed {
        direction_angle: f64,
        eps: f64,
        mode: u32,
        seed: u64,
    },
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct VerifyOptions {
    pub suites: Vec<String>,
    pub seed: u64,
    pub lsi_samples: usize,
    pub poincare_samples: usize,
    pub laplog_samples: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct StabilityOptions {
    pub seed_b: u64,
    pub eps_b: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct UniquenessOptions {
    pub t_probe: f64,
    pub perturbation: String,
    pub amplitude: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepSpec {
    pub key: String,
    pub values: Vec<String>,
    pub command: Command,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub solver: SolverConfig,
    pub initial_condition: InitialCondition,
    pub eps_star: f64,
    pub tail_constant: f64,
    pub output_dir: PathBuf,
    pub formats: OutputFormats,
    pub verify: VerifyOptions,
    pub stability: StabilityOptions,
    pub uniqueness: UniquenessOptions,
    pub sweep: Option<SweepSpec>,
}

/// All assignable fields, collected before validation.
#[derive(Debug, Clone, Default)]
struct RawConfig {
    command: Option<String>,
    n_cells: Option<usize>,
    dt: Option<f64>,
    t_end: Option<f64>,
    record_every: Option<usize>,
    momentum_tol: Option<f64>,
    flux_scheme: Option<String>,
    stepping: Option<String>,
    eps_star: Option<f64>,
    tail_constant: Option<f64>,
    output_dir: Option<String>,
    formats: Option<String>,
    ic_kind: Option<String>,
    ic_kappa: Option<f64>,
    ic_mean_angle: Option<f64>,
    ic_direction_angle: Option<f64>,
    ic_eps: Option<f64>,
    ic_mode: Option<u32>,
    ic_seed: Option<u64>,
    verify_suites: Option<String>,
    verify_seed: Option<u64>,
    verify_lsi_samples: Option<usize>,
    verify_poincare_samples: Option<usize>,
    verify_laplog_samples: Option<usize>,
    stability_seed_b: Option<u64>,
    stability_eps_b: Option<f64>,
    uniqueness_t_probe: Option<f64>,
    uniqueness_perturbation: Option<String>,
    uniqueness_amplitude: Option<f64>,
    sweep_key: Option<String>,
    sweep_values: Option<String>,
    sweep_command: Option<String>,
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T, ConfigError> {
    value.parse::<T>().map_err(|_| ConfigError {
        line: Some(line),
        message: format!("cannot parse value '{value}' for key '{key}'"),
    })
}

impl RawConfig {
    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        match key {
            "command" => self.command = Some(value.to_string()),
            "n_cells" => self.n_cells = Some(parse_num(value, line, key)?),
            "dt" => self.dt = Some(parse_num(value, line, key)?),
            "t_end" => self.t_end = Some(parse_num(value, line, key)?),
            "record_every" => self.record_every = Some(parse_num(value, line, key)?),
            "momentum_tol" => self.momentum_tol = Some(parse_num(value, line, key)?),
            "flux_scheme" => self.flux_scheme = Some(value.to_string()),
            "stepping" => self.stepping = Some(value.to_string()),
            "eps_star" => self.eps_star = Some(parse_num(value, line, key)?),
            "tail_constant" => self.tail_constant = Some(parse_num(value, line, key)?),
            "output_dir" => self.output_dir = Some(value.to_string()),
            "formats" => self.formats = Some(value.to_string()),
            "ic.kind" => self.ic_kind = Some(value.to_string()),
            "ic.kappa" => self.ic_kappa = Some(parse_num(value, line, key)?),
            "ic.mean_angle" => self.ic_mean_angle = Some(parse_num(value, line, key)?),
            "ic.direction_angle" => self.ic_direction_angle = Some(parse_num(value, line, key)?),
            "ic.eps" => self.ic_eps = Some(parse_num(value, line, key)?),
            "ic.mode" => self.ic_mode = Some(parse_num(value, line, key)?),
            "ic.seed" => self.ic_seed = Some(parse_num(value, line, key)?),
            "verify.suites" => self.verify_suites = Some(value.to_string()),
            "verify.seed" => self.verify_seed = Some(parse_num(value, line, key)?),
            "verify.lsi_samples" => self.verify_lsi_samples = Some(parse_num(value, line, key)?),
            "verify.poincare_samples" => {
                self.verify_poincare_samples = Some(parse_num(value, line, key)?)
            }
            "verify.laplog_samples" => {
                self.verify_laplog_samples = Some(parse_num(value, line, key)?)
            }
            "stability.seed_b" => self.stability_seed_b = Some(parse_num(value, line, key)?),
            "stability.eps_b" => self.stability_eps_b = Some(parse_num(value, line, key)?),
            "uniqueness.t_probe" => self.uniqueness_t_probe = Some(parse_num(value, line, key)?),
            "uniqueness.perturbation" => self.uniqueness_perturbation = Some(value.to_string()),
            "uniqueness.amplitude" => {
                self.uniqueness_amplitude = Some(parse_num(value, line, key)?)
            }
            "sweep.key" => self.sweep_key = Some(value.to_string()),
            "sweep.values" => self.sweep_values = Some(value.to_string()),
            "sweep.command" => self.sweep_command = Some(value.to_string()),
            _ => return err(Some(line), format!("unknown key '{key}'")),
        }
        Ok(())
    }
}

/// Parse and validate a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut raw = RawConfig::default();
    let mut prefix = String::new();
    for (idx, line_text) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = line_text.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(section) = trimmed.strip_prefix('[') {
            let section = section
                .strip_suffix(']')
                .ok_or_else(|| ConfigError {
                    line: Some(line),
                    message: format!("malformed section header '{trimmed}'"),
                })?
                .trim();
            if section.is_empty() {
                return err(Some(line), "empty section header");
            }
            prefix = format!("{section}.");
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError {
            line: Some(line),
            message: format!("expected 'key = value', got '{trimmed}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return err(Some(line), "empty key");
        }
        let full_key = if key.contains('.') || prefix.is_empty() {
            key.to_string()
        } else {
            format!("{prefix}{key}")
        };
        raw.set(&full_key, value, line)?;
    }
    finalize(raw)
}

/// Apply a single `key = value` override to an already-parsed text (used by
/// sweeps and by the CLI seed flag).
pub fn apply_override(config: &mut RunConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    // round-trip through the parser machinery so validation stays uniform
    let mut raw = RawConfig::default();
    raw.set(key, value, 0)?;
    merge_override(config, &raw, key)
}

fn merge_override(config: &mut RunConfig, raw: &RawConfig, key: &str) -> Result<(), ConfigError> {
    match key {
        "n_cells" => config.solver.n_cells = raw.n_cells.unwrap(),
        "dt" => config.solver.dt = raw.dt.unwrap(),
        "t_end" => config.solver.t_end = raw.t_end.unwrap(),
        "record_every" => config.solver.record_every = raw.record_every.unwrap(),
        "momentum_tol" => config.solver.momentum_tol = raw.momentum_tol.unwrap(),
        "eps_star" => {
            config.eps_star = raw.eps_star.unwrap();
            validate_eps_star(config.eps_star, None)?;
        }
        "tail_constant" => config.tail_constant = raw.tail_constant.unwrap(),
        "ic.kappa" | "ic.mean_angle" | "ic.direction_angle" | "ic.eps" | "ic.mode" | "ic.seed" => {
            apply_ic_override(config, raw, key)?
        }
        "uniqueness.t_probe" => config.uniqueness.t_probe = raw.uniqueness_t_probe.unwrap(),
        "uniqueness.amplitude" => config.uniqueness.amplitude = raw.uniqueness_amplitude.unwrap(),
        "stability.seed_b" => config.stability.seed_b = raw.stability_seed_b.unwrap(),
        "stability.eps_b" => config.stability.eps_b = raw.stability_eps_b.unwrap(),
        other => {
            return err(
                None,
                format!("key '{other}' cannot be overridden after parsing"),
            )
        }
    }
    validate_solver(&config.solver)?;
    Ok(())
}

fn apply_ic_override(
    config: &mut RunConfig,
    raw: &RawConfig,
    key: &str,
) -> Result<(), ConfigError> {
    match (&mut config.initial_condition, key) {
        (InitialCondition::VonMises { kappa, .. }, "ic.kappa") => *kappa = raw.ic_kappa.unwrap(),
        (InitialCondition::VonMises { mean_angle, .. }, "ic.mean_angle") => {
            *mean_angle = raw.ic_mean_angle.unwrap()
        }
        (InitialCondition::Equilibrium { direction_angle }, "ic.direction_angle")
        | (
            InitialCondition::Perturbed {
                direction_angle, ..
            },
            "ic.direction_angle",
        ) => *direction_angle = raw.ic_direction_angle.unwrap(),
        (InitialCondition::Perturbed { eps, .. }, "ic.eps") => *eps = raw.ic_eps.unwrap(),
        (InitialCondition::Perturbed { mode, .. }, "ic.mode") => *mode = raw.ic_mode.unwrap(),
        (InitialCondition::Perturbed { seed, .. }, "ic.seed") => *seed = raw.ic_seed.unwrap(),
        (ic, key) => {
            return err(
                None,
                format!("override '{key}' does not apply to initial condition {ic:?}"),
            )
        }
    }
    Ok(())
}

fn validate_eps_star(eps_star: f64, line: Option<usize>) -> Result<(), ConfigError> {
    if !(eps_star > 0.0 && eps_star <= 0.1) {
        return err(
            line,
            format!(
                "eps_star = {eps_star} is outside (0, 1/10]; the localized log-Sobolev \
                 inequality requires eps_star <= 1/10"
            ),
        );
    }
    Ok(())
}

fn validate_solver(solver: &SolverConfig) -> Result<(), ConfigError> {
    solver.validate().map_err(|e| ConfigError {
        line: None,
        message: e.to_string(),
    })
}

fn finalize(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let command = match raw.command.as_deref() {
        Some("simulate") => Command::Simulate,
        Some("rates") => Command::Rates,
        Some("verify") => Command::Verify,
        Some("stability") => Command::Stability,
        Some("uniqueness") => Command::Uniqueness,
        Some("sweep") => Command::Sweep,
        Some(other) => return err(None, format!("unknown command '{other}'")),
        None => return err(None, "missing required key 'command'"),
    };

    let n_cells = raw.n_cells.unwrap_or(256);
    let dt = raw.dt.unwrap_or(1e-4);
    let t_end = raw.t_end.unwrap_or(5.0);
    let mut solver = SolverConfig::new(n_cells, dt, t_end);
    solver.record_every = raw.record_every.unwrap_or(10);
    if let Some(tol) = raw.momentum_tol {
        solver.momentum_tol = tol;
    }
    solver.flux_scheme = match raw.flux_scheme.as_deref() {
        None | Some("exponential-fitting") => FluxScheme::ExponentialFitting,
        Some("central") => FluxScheme::Central,
        Some(other) => return err(None, format!("unknown flux_scheme '{other}'")),
    };
    solver.stepping = match raw.stepping.as_deref() {
        None | Some("semi-implicit") => Stepping::SemiImplicit,
        Some("explicit") => Stepping::Explicit,
        Some(other) => return err(None, format!("unknown stepping '{other}'")),
    };
    validate_solver(&solver)?;

    let eps_star = raw.eps_star.unwrap_or(0.1);
    validate_eps_star(eps_star, None)?;
    let tail_constant = raw.tail_constant.unwrap_or(1.0);
    if !(tail_constant.is_finite() && tail_constant >= 0.0) {
        return err(
            None,
            format!("tail_constant must be nonnegative, got {tail_constant}"),
        );
    }

    let initial_condition = match raw.ic_kind.as_deref() {
        None | Some("perturbed") => InitialCondition::Perturbed {
            direction_angle: raw.ic_direction_angle.unwrap_or(0.0),
            eps: raw.ic_eps.unwrap_or(0.1),
            mode: raw.ic_mode.unwrap_or(2),
            seed: raw.ic_seed.unwrap_or(1),
        },
        Some("uniform") => InitialCondition::Uniform,
        Some("von-mises") => InitialCondition::VonMises {
            kappa: raw.ic_kappa.unwrap_or(1.0),
            mean_angle: raw.ic_mean_angle.unwrap_or(0.0),
        },
        Some("equilibrium") => InitialCondition::Equilibrium {
            direction_angle: raw.ic_direction_angle.unwrap_or(0.0),
        },
        Some(other) => return err(None, format!("unknown ic.kind '{other}'")),
    };
    if let InitialCondition::Perturbed { eps, mode, .. } = &initial_condition {
        if eps.abs() >= 1.0 {
            return err(None, format!("ic.eps must satisfy |eps| < 1, got {eps}"));
        }
        if *mode < 1 {
            return err(None, "ic.mode must be >= 1".to_string());
        }
    }
    if let InitialCondition::VonMises { kappa, .. } = &initial_condition {
        if *kappa < 0.0 {
            return err(None, format!("ic.kappa must be nonnegative, got {kappa}"));
        }
    }

    let formats = match raw.formats.as_deref() {
        None | Some("both") => OutputFormats::Both,
        Some("csv") => OutputFormats::Csv,
        Some("json") => OutputFormats::Json,
        Some(other) => return err(None, format!("unknown formats '{other}'")),
    };

    let verify = VerifyOptions {
        suites: raw
            .verify_suites
            .map(|s| s.split(',').map(|x| x.trim().to_string()).collect())
            .unwrap_or_default(),
        seed: raw.verify_seed.unwrap_or(1234),
        lsi_samples: raw.verify_lsi_samples.unwrap_or(500),
        poincare_samples: raw.verify_poincare_samples.unwrap_or(200),
        laplog_samples: raw.verify_laplog_samples.unwrap_or(100),
    };
    for suite in &verify.suites {
        if !["lsi", "poincare", "laplog", "lemma31", "claim0", "all"].contains(&suite.as_str()) {
            return err(None, format!("unknown verify suite '{suite}'"));
        }
    }

    let ic_seed = match &initial_condition {
        InitialCondition::Perturbed { seed, .. } => *seed,
        _ => 0,
    };
    let ic_eps = match &initial_condition {
        InitialCondition::Perturbed { eps, .. } => *eps,
        _ => 0.05,
    };
    let stability = StabilityOptions {
        seed_b: raw.stability_seed_b.unwrap_or(ic_seed + 1),
        eps_b: raw.stability_eps_b.unwrap_or(ic_eps),
    };

    let uniqueness_perturbation = match raw.uniqueness_perturbation.as_deref() {
        None | Some("multiplicative") => "multiplicative".to_string(),
        Some("rotation") => "rotation".to_string(),
        Some(other) => return err(None, format!("unknown uniqueness.perturbation '{other}'")),
    };
    let uniqueness = UniquenessOptions {
        t_probe: raw.uniqueness_t_probe.unwrap_or(1.0),
        perturbation: uniqueness_perturbation,
        amplitude: raw.uniqueness_amplitude.unwrap_or(1e-8),
    };
    if uniqueness.t_probe <= 0.0 {
        return err(
            None,
            format!(
                "uniqueness.t_probe must be positive, got {}",
                uniqueness.t_probe
            ),
        );
    }

    let sweep = match (&raw.sweep_key, &raw.sweep_values) {
        (Some(key), Some(values)) => {
            let command = match raw.sweep_command.as_deref() {
                None | Some("simulate") => Command::Simulate,
                Some("rates") => Command::Rates,
                Some("verify") => Command::Verify,
                Some("stability") => Command::Stability,
                Some("uniqueness") => Command::Uniqueness,
                Some(other) => return err(None, format!("sweep.command '{other}' not allowed")),
            };
            Some(SweepSpec {
                key: key.clone(),
                values: values.split(',').map(|v| v.trim().to_string()).collect(),
                command,
            })
        }
        (None, None) => None,
        _ => return err(None, "sweep requires both sweep.key and sweep.values"),
    };
    if command == Command::Sweep && sweep.is_none() {
        return err(None, "command = sweep requires sweep.key and sweep.values");
    }

    Ok(RunConfig {
        command,
        solver,
        initial_condition,
        eps_star,
        tail_constant,
        output_dir: PathBuf::from(raw.output_dir.unwrap_or_else(|| "out".to_string())),
        formats,
        verify,
        stability,
        uniqueness,
        sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "command = simulate\nn_cells = 256\ndt = 1e-4\nt_end = 5\n\
        ic.kind = perturbed\nic.eps = 0.1\nic.mode = 2\nic.seed = 1\n";

    #[test]
    fn minimal_config_parses() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.command, Command::Simulate);
        assert_eq!(c.solver.n_cells, 256);
        assert_eq!(c.solver.dt, 1e-4);
        assert_eq!(c.solver.t_end, 5.0);
        match c.initial_condition {
            InitialCondition::Perturbed {
                eps, mode, seed, ..
            } => {
                assert_eq!(eps, 0.1);
                assert_eq!(mode, 2);
                assert_eq!(seed, 1);
            }
            other => panic!("unexpected ic {other:?}"),
        }
    }

    #[test]
    fn section_headers_prefix_keys() {
        let text = "command = simulate\n[ic]\nkind = perturbed\neps = 0.2\nmode = 3\nseed = 9\n";
        let c = parse_config(text).unwrap();
        match c.initial_condition {
            InitialCondition::Perturbed {
                eps, mode, seed, ..
            } => {
                assert_eq!(eps, 0.2);
                assert_eq!(mode, 3);
                assert_eq!(seed, 9);
            }
            other => panic!("unexpected ic {other:?}"),
        }
    }

    #[test]
    fn unknown_key_cites_line() {
        let text = "command = simulate\ndtt = 1e-4\n";
        let e = parse_config(text).unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.message.contains("dtt"), "{e}");
    }

    #[test]
    fn eps_star_bound_is_enforced() {
        let text = format!("{MINIMAL}eps_star = 0.2\n");
        let e = parse_config(&text).unwrap_err();
        assert!(e.message.contains("1/10"), "{e}");
    }

    #[test]
    fn bad_values_cite_line() {
        let text = "command = simulate\nn_cells = many\n";
        let e = parse_config(text).unwrap_err();
        assert_eq!(e.line, Some(2));
        // odd cell count is rejected by the solver validation
        let text = "command = simulate\nn_cells = 255\n";
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn overrides() {
        let mut c = parse_config(MINIMAL).unwrap();
        apply_override(&mut c, "ic.seed", "42").unwrap();
        match c.initial_condition {
            InitialCondition::Perturbed { seed, .. } => assert_eq!(seed, 42),
            _ => unreachable!(),
        }
        assert!(apply_override(&mut c, "command", "verify").is_err());
        assert!(apply_override(&mut c, "eps_star", "0.5").is_err());
    }
}
