//! Command dispatch: the only layer with side effects. Every run writes a
//! manifest next to its outputs; exit status 2 is reserved for numerical
//! findings that contradict the proven bounds, never for ordinary errors.

use std::fs;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vicsek_circle::equilibrium::{self, Direction};
use vicsek_circle::fields::DensityField;
use vicsek_circle::geometry::CircleGrid;
use vicsek_circle::inequalities::{
    didt_contraction_term, didt_identity_residual, dissipation_growth_check,
    laplog_identity_residual, perturbed_reference_density, random_band_limited_potential,
    verify_lsi, verify_poincare, InequalityReport,
};
use vicsek_circle::rates::{
    compute_constants, detect_t0_from_series, envelopes_at_times, RateConstants,
};
use vicsek_circle::solver::{run, Stepping, Trajectory};
use vicsek_circle::transport::{stability_experiment, uniqueness_experiment, TwinPerturbation};
use vicsek_circle::ModelError;

use crate::config::{Command, InitialCondition, RunConfig};
use crate::csvio::{
    emit_trajectory_csv, emit_trajectory_jsonl, parse_trajectory_csv, rows_from_trajectory,
    TrajectoryRow,
};

/// What a finished command reports back to the exit-code mapping.
#[derive(Debug, Clone, Copy, Default)]
pub struct Outcome {
    pub theory_violation: bool,
}

pub fn run_command(config: &RunConfig, config_text: &str) -> Result<Outcome> {
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating output dir {:?}", config.output_dir))?;
    match config.command {
        Command::Simulate => cmd_simulate(config, config_text),
        Command::Rates => cmd_rates(config, config_text),
        Command::Verify => cmd_verify(config, config_text),
        Command::Stability => cmd_stability(config, config_text),
        Command::Uniqueness => cmd_uniqueness(config, config_text),
        Command::Sweep => cmd_sweep(config, config_text),
    }
}

pub fn build_initial(config: &RunConfig) -> Result<(Arc<CircleGrid>, DensityField)> {
    let grid = Arc::new(CircleGrid::new(config.solver.n_cells)?);
    let rho0 = match &config.initial_condition {
        InitialCondition::Uniform => DensityField::uniform(&grid),
        InitialCondition::VonMises { kappa, mean_angle } => {
            DensityField::von_mises(&grid, *kappa, *mean_angle)?
        }
        InitialCondition::Equilibrium { direction_angle } => {
            equilibrium::fisher_von_mises(&grid, Direction::from_angle(*direction_angle))
        }
        InitialCondition::Perturbed {
            direction_angle,
            eps,
            mode,
            seed,
        } => DensityField::perturbed_equilibrium(
            &grid,
            Direction::from_angle(*direction_angle),
            *eps,
            *mode,
            *seed,
        )?,
    };
    Ok((grid, rho0))
}

fn write_manifest(config: &RunConfig, config_text: &str, extra: serde_json::Value) -> Result<()> {
    let c_m = equilibrium::normalizer_cm();
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config_text": config_text,
        "resolved": config,
        "constants": {
            "c_m": c_m,
            "m": equilibrium::equilibrium_momentum_m(),
            "lambda": 1.0 + c_m.ln().abs(),
            "eps_star": config.eps_star,
            "c_star": vicsek_circle::inequalities::lsi_constant(
                1.0 + c_m.ln().abs(), config.eps_star).ok(),
        },
        "extra": extra,
    });
    fs::write(
        config.output_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

/// Rate constants and envelope columns from the finished trajectory rows.
/// A trajectory too short for the detection window leaves the envelope
/// columns unset; a covered window without a qualifying record is the
/// reportable theory violation.
fn envelopes_for_rows(
    rows: &[TrajectoryRow],
    eps_star: f64,
    tail_constant: f64,
) -> Result<(Option<RateConstants>, Option<Vec<(f64, f64)>>)> {
    let first = match rows.first() {
        Some(r) => r,
        None => return Ok((None, None)),
    };
    let constants = compute_constants(first.h.max(0.0), first.j_norm, eps_star)?;
    let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.i)).collect();
    match detect_t0_from_series(&series, &constants) {
        Ok(t0) => {
            let constants = constants.with_t0(t0);
            let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
            let env = envelopes_at_times(&times, &constants, tail_constant)?;
            let pairs = env.iter().map(|e| (e.h_bound, e.l1_bound)).collect();
            Ok((Some(constants), Some(pairs)))
        }
        Err(ModelError::TrajectoryTooShort { .. }) => Ok((Some(constants), None)),
        Err(e) => Err(e.into()),
    }
}

fn apply_envelopes(rows: &mut [TrajectoryRow], env: &Option<Vec<(f64, f64)>>) {
    if let Some(env) = env {
        for (row, &(hb, lb)) in rows.iter_mut().zip(env) {
            row.h_bound = hb;
            row.l1_bound = lb;
        }
    }
}

fn simulate_to_rows(config: &RunConfig) -> Result<(Trajectory, Vec<TrajectoryRow>)> {
    let (_, rho0) = build_initial(config)?;
    let trajectory = run(&rho0, &config.solver)?;
    let mut rows = rows_from_trajectory(&trajectory, None);
    let (_, env) = envelopes_for_rows(&rows, config.eps_star, config.tail_constant)?;
    apply_envelopes(&mut rows, &env);
    Ok((trajectory, rows))
}

fn write_trajectory_outputs(
    config: &RunConfig,
    trajectory: Option<&Trajectory>,
    rows: &[TrajectoryRow],
) -> Result<()> {
    if config.formats.csv() {
        fs::write(
            config.output_dir.join("trajectory.csv"),
            emit_trajectory_csv(rows),
        )?;
        if let Some(traj) = trajectory {
            if let Some(last) = traj.records.last() {
                fs::write(
                    config.output_dir.join("final_density.csv"),
                    last.rho.to_csv(),
                )?;
            }
        }
    }
    if config.formats.json() {
        fs::write(
            config.output_dir.join("trajectory.jsonl"),
            emit_trajectory_jsonl(rows)?,
        )?;
    }
    Ok(())
}

fn cmd_simulate(config: &RunConfig, config_text: &str) -> Result<Outcome> {
    let (trajectory, rows) = simulate_to_rows(config)?;
    write_trajectory_outputs(config, Some(&trajectory), &rows)?;
    write_manifest(
        config,
        config_text,
        serde_json::json!({"records": rows.len()}),
    )?;
    Ok(Outcome::default())
}

fn cmd_rates(config: &RunConfig, config_text: &str) -> Result<Outcome> {
    let csv_path = config.output_dir.join("trajectory.csv");
    let (trajectory, mut rows) = if csv_path.exists() {
        let text = fs::read_to_string(&csv_path)?;
        (None, parse_trajectory_csv(&text)?)
    } else {
        let (traj, rows) = simulate_to_rows(config)?;
        (Some(traj), rows)
    };
    let (constants, env) = envelopes_for_rows(&rows, config.eps_star, config.tail_constant)?;
    let constants = match constants {
        Some(c) if c.t0.is_some() => c,
        Some(c) => bail!(ModelError::TrajectoryTooShort {
            needed: c.t_star,
            covered: rows.last().map(|r| r.t).unwrap_or(0.0),
        }),
        None => bail!("empty trajectory"),
    };
    apply_envelopes(&mut rows, &env);
    write_trajectory_outputs(config, trajectory.as_ref(), &rows)?;
    let payload = serde_json::json!({
        "constants": constants,
        "tail_constant": config.tail_constant,
        "b_after_t0": 1.0 / constants.c_star,
    });
    fs::write(
        config.output_dir.join("constants.json"),
        serde_json::to_string_pretty(&payload)? + "\n",
    )?;
    write_manifest(config, config_text, serde_json::json!({"t0": constants.t0}))?;
    Ok(Outcome::default())
}

fn suite_selected(config: &RunConfig, name: &str) -> bool {
    let suites = &config.verify.suites;
    suites.is_empty() || suites.iter().any(|s| s == name || s == "all")
}

fn cmd_verify(config: &RunConfig, config_text: &str) -> Result<Outcome> {
    let mut reports: Vec<InequalityReport> = Vec::new();
    if suite_selected(config, "lsi") {
        reports.extend(suite_lsi(config)?);
    }
    if suite_selected(config, "poincare") {
        reports.extend(suite_poincare(config)?);
    }
    if suite_selected(config, "laplog") {
        reports.extend(suite_laplog(config)?);
    }
    if suite_selected(config, "lemma31") {
        reports.extend(suite_lemma31(config)?);
    }
    if suite_selected(config, "claim0") {
        reports.extend(suite_claim0(config)?);
    }

    let mut jsonl = String::new();
    for r in &reports {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    fs::write(config.output_dir.join("reports.jsonl"), jsonl)?;
    let violations = reports.iter().filter(|r| !r.holds).count();
    write_manifest(
        config,
        config_text,
        serde_json::json!({"reports": reports.len(), "violations": violations}),
    )?;
    Ok(Outcome {
        theory_violation: violations > 0,
    })
}

fn suite_lsi(config: &RunConfig) -> Result<Vec<InequalityReport>> {
    let grid = Arc::new(CircleGrid::new(256)?);
    let mut rng = ChaCha8Rng::seed_from_u64(config.verify.seed);
    let mut out = Vec::new();
    for sample in 0..config.verify.lsi_samples {
        use rand::Rng;
        let amp = rng.gen_range(0.0..0.6);
        let psi = random_band_limited_potential(&grid, amp, 3, &mut rng);
        let lambda = psi.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
        let eps = rng.gen_range(0.005..config.eps_star);
        let rho = perturbed_reference_density(&grid, &psi, eps, 4, &mut rng)?;
        let mut rep = verify_lsi(&rho, &psi, config.eps_star, lambda)?;
        rep.context.insert("sample".into(), sample.to_string());
        out.push(rep);
    }
    Ok(out)
}

fn suite_poincare(config: &RunConfig) -> Result<Vec<InequalityReport>> {
    use rand::Rng;
    let grid = Arc::new(CircleGrid::new(256)?);
    let cm = equilibrium::normalizer_cm();
    let lambda = 1.0 + cm.ln().abs();
    let mut rng = ChaCha8Rng::seed_from_u64(config.verify.seed.wrapping_add(1));
    let mut out = Vec::new();
    for sample in 0..config.verify.poincare_samples {
        let mut f = vec![0.0; grid.n_cells()];
        for k in 1..=5u32 {
            let c: f64 = rng.gen_range(-1.0..1.0);
            let s: f64 = rng.gen_range(-1.0..1.0);
            for (i, &t) in grid.nodes().iter().enumerate() {
                f[i] += c * (k as f64 * t).cos() + s * (k as f64 * t).sin();
            }
        }
        let phi: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        let psi: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&t| -(t - phi).cos() - cm.ln())
            .collect();
        let mut rep = verify_poincare(&grid, &f, &psi, lambda)?;
        rep.context.insert("sample".into(), sample.to_string());
        out.push(rep);
    }
    Ok(out)
}

fn suite_laplog(config: &RunConfig) -> Result<Vec<InequalityReport>> {
    use rand::Rng;
    let grid = Arc::new(CircleGrid::new(256)?);
    let mut rng = ChaCha8Rng::seed_from_u64(config.verify.seed.wrapping_add(2));
    let mut out = Vec::new();
    for sample in 0..config.verify.laplog_samples {
        let rho = DensityField::perturbed_equilibrium(
            &grid,
            Direction::from_angle(rng.gen_range(0.0..2.0 * std::f64::consts::PI)),
            rng.gen_range(0.0..0.5),
            4,
            rng.gen(),
        )?;
        let psi = random_band_limited_potential(&grid, rng.gen_range(0.0..1.0), 4, &mut rng);
        let residual = laplog_identity_residual(&rho, &psi)?;
        let mut context = std::collections::BTreeMap::new();
        context.insert("sample".to_string(), sample.to_string());
        context.insert("tol".to_string(), "1e-8".to_string());
        out.push(InequalityReport {
            name: "laplog".into(),
            lhs: residual,
            rhs: 1e-8,
            slack: 1e-8 - residual,
            holds: residual <= 1e-8,
            context,
        });
    }
    Ok(out)
}

fn suite_lemma31(config: &RunConfig) -> Result<Vec<InequalityReport>> {
    let (_, rho0) = build_initial(config)?;
    let trajectory = run(&rho0, &config.solver)?;
    let n = trajectory.len();
    let diag: Vec<(f64, f64, f64)> = trajectory
        .records
        .iter()
        .map(|r| {
            (
                r.diagnostics.t,
                r.diagnostics.fisher_information,
                r.diagnostics.momentum.magnitude(),
            )
        })
        .collect();
    // exhaustive pairwise sweep with an incrementally maintained min |J|;
    // per starting record, remember the binding partner
    let stride = (n / 100).max(1);
    let mut out = Vec::new();
    let mut worst: Option<(usize, usize, f64)> = None;
    for s in 0..n {
        let (t_s, i_s, mut min_j) = diag[s];
        let mut binding = (s, 0.0_f64);
        let mut binding_rel = f64::INFINITY;
        for (off, &(t_t, i_t, j_t)) in diag[s..].iter().enumerate() {
            min_j = min_j.min(j_t);
            let rhs = i_s * ((2.0 + 2.0 / min_j) * (t_t - t_s)).exp();
            let rel = (rhs - i_t) / rhs.abs().max(1e-300);
            if rel < binding_rel {
                binding_rel = rel;
                binding = (s + off, rel);
            }
        }
        if worst.map(|w| binding_rel < w.2).unwrap_or(true) {
            worst = Some((s, binding.0, binding_rel));
        }
        let is_violation = binding_rel < -1e-8;
        if s % stride == 0 || is_violation {
            out.push(dissipation_growth_check(&trajectory, s, binding.0)?);
        }
    }
    if let Some((s, t, _)) = worst {
        out.push(dissipation_growth_check(&trajectory, s, t)?);
    }
    Ok(out)
}

fn suite_claim0(config: &RunConfig) -> Result<Vec<InequalityReport>> {
    let mut solver = config.solver.clone();
    solver.stepping = Stepping::Explicit;
    solver.dt = solver.dt.min(1e-5);
    solver.t_end = solver.t_end.min(0.2);
    solver.record_every = 10;
    let (_, rho0) = build_initial(config)?;
    let trajectory = run(&rho0, &solver)?;
    let n = trajectory.len();
    let mut out = Vec::new();
    for frac in [0.25, 0.5, 0.75] {
        let idx = ((n as f64 * frac) as usize).clamp(1, n - 2);
        let residual = didt_identity_residual(&trajectory, idx)?;
        let mut context = std::collections::BTreeMap::new();
        context.insert("index".into(), idx.to_string());
        context.insert(
            "t".into(),
            trajectory.records[idx].diagnostics.t.to_string(),
        );
        context.insert("tol".into(), "1e-2".into());
        out.push(InequalityReport {
            name: "claim0-residual".into(),
            lhs: residual,
            rhs: 1e-2,
            slack: 1e-2 - residual,
            holds: residual <= 1e-2,
            context,
        });
    }
    // the contraction term of the identity is nonpositive
    let mid = n / 2;
    let rec = &trajectory.records[mid];
    let term = didt_contraction_term(&rec.rho, rec.diagnostics.omega)?;
    let mut context = std::collections::BTreeMap::new();
    context.insert("t".into(), rec.diagnostics.t.to_string());
    out.push(InequalityReport {
        name: "claim0-first-term-nonpositive".into(),
        lhs: term,
        rhs: 0.0,
        slack: -term,
        holds: term <= 1e-12,
        context,
    });
    Ok(out)
}

fn cmd_stability(config: &RunConfig, config_text: &str) -> Result<Outcome> {
    let (grid, rho0) = build_initial(config)?;
    let rho0_bar = match &config.initial_condition {
        InitialCondition::Perturbed {
            direction_angle,
            mode,
            ..
        } => DensityField::perturbed_equilibrium(
            &grid,
            Direction::from_angle(*direction_angle),
            config.stability.eps_b,
            *mode,
            config.stability.seed_b,
        )?,
        _ => bail!("the stability command requires ic.kind = perturbed"),
    };
    let report = stability_experiment(&rho0, &rho0_bar, &config.solver)?;
    fs::write(
        config.output_dir.join("stability.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    write_manifest(
        config,
        config_text,
        serde_json::json!({"all_hold": report.all_hold, "delta": report.delta}),
    )?;
    Ok(Outcome {
        theory_violation: !report.all_hold,
    })
}

fn cmd_uniqueness(config: &RunConfig, config_text: &str) -> Result<Outcome> {
    let (_, rho0) = build_initial(config)?;
    let perturbation = match config.uniqueness.perturbation.as_str() {
        "rotation" => TwinPerturbation::Rotation {
            angle: config.uniqueness.amplitude,
        },
        _ => TwinPerturbation::Multiplicative {
            amplitude: config.uniqueness.amplitude,
        },
    };
    let report = uniqueness_experiment(
        &rho0,
        &config.solver,
        config.uniqueness.t_probe,
        perturbation,
    )?;
    fs::write(
        config.output_dir.join("uniqueness.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    write_manifest(
        config,
        config_text,
        serde_json::json!({
            "identical_twins_bitwise": report.identical_twins_bitwise,
            "fitted_gronwall_c": report.fitted_gronwall_c,
        }),
    )?;
    Ok(Outcome {
        theory_violation: !report.identical_twins_bitwise,
    })
}

fn cmd_sweep(config: &RunConfig, config_text: &str) -> Result<Outcome> {
    let spec = config
        .sweep
        .clone()
        .context("sweep command without sweep spec")?;
    let results: Vec<Result<Outcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = spec
            .values
            .iter()
            .map(|value| {
                let mut point = config.clone();
                point.command = spec.command;
                point.sweep = None;
                let key = spec.key.clone();
                let value = value.clone();
                scope.spawn(move || -> Result<Outcome> {
                    crate::config::apply_override(&mut point, &key, &value)
                        .map_err(|e| anyhow::anyhow!(e.to_string()))?;
                    point.output_dir = config.output_dir.join(format!("{key}={value}"));
                    fs::create_dir_all(&point.output_dir)?;
                    run_command(&point, "")
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut violation = false;
    for r in results {
        violation |= r?.theory_violation;
    }
    write_manifest(
        config,
        config_text,
        serde_json::json!({"points": spec.values.len(), "key": spec.key}),
    )?;
    Ok(Outcome {
        theory_violation: violation,
    })
}

/// Exit-code mapping shared by main and the tests.
pub fn exit_code_for(result: &Result<Outcome>) -> u8 {
    match result {
        Ok(outcome) => {
            if outcome.theory_violation {
                2
            } else {
                0
            }
        }
        Err(e) => {
            if matches!(
                e.downcast_ref::<ModelError>(),
                Some(ModelError::TheoryViolation(_))
            ) {
                2
            } else {
                1
            }
        }
    }
}
