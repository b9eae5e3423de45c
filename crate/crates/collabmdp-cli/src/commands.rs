//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;

use collabmdp::harness::{
    best_fixed_comparator, episode_csv, kappa_factors, opt_value, regret_report, run,
    sequence_etas, smoothness_bounds_from_kappa, smoothness_certificate, EpisodeLog,
    RegretReport, RunOptions,
};
use collabmdp::chain::mixing_estimate;
use collabmdp::reduction::{check_correspondence, enumerate_path_policies, reduce, GraphFile};
use collabmdp::verifier::{run_default_suite, tally};
use collabmdp::Mdp;

use crate::config::{ExperimentConfig, OpponentSection, SweepSection};
use crate::CliError;

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Config(format!("cannot move into place {}: {e}", path.display())))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text.into_bytes()
}

/// Order-preserving parallel map over a work list with a bounded worker
/// count. Sweep cells are independent, so this is plain work stealing by
/// index.
fn parallel_map<T, U, F>(items: Vec<T>, jobs: usize, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    let jobs = jobs.max(1);
    let n = items.len();
    let slots: Mutex<Vec<Option<U>>> = Mutex::new((0..n).map(|_| None).collect());
    let work: Vec<Mutex<Option<T>>> = items.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(n.max(1)) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= n {
                    break;
                }
                let item = work[idx].lock().unwrap().take().expect("each slot taken once");
                let out = f(item);
                slots.lock().unwrap()[idx] = Some(out);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|u| u.expect("worker filled slot")).collect()
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config: &'a ExperimentConfig,
    regret: &'a RegretReport,
    verifier_pass_counts: Option<(usize, usize)>,
    wall_clock_secs: f64,
    artifact_version: &'static str,
}

struct RunOutput {
    log: EpisodeLog,
    report: RegretReport,
    comparator_etas: Vec<f64>,
}

fn execute_run(
    mdp: &Mdp,
    cfg: &ExperimentConfig,
    opponent: &OpponentSection,
    learner: &collabmdp::LearnerConfig,
    t_episodes: usize,
    seed: u64,
    analysis: bool,
) -> Result<RunOutput, CliError> {
    if learner.gamma > t_episodes {
        return Err(CliError::Config(format!(
            "gamma {} exceeds the horizon {t_episodes}",
            learner.gamma
        )));
    }
    let spec = opponent.build()?;
    let log = run(mdp, learner, &spec, t_episodes, cfg.m_rounds, seed, &RunOptions::default())?;
    let comparator = best_fixed_comparator(mdp, &log.pi2_sequence())?;
    let comparator_etas = sequence_etas(mdp, &comparator.policy, &log.pi2_sequence())?;
    // The certificate and the joint optimum are best-effort extras: not
    // every instance admits them.
    let (opt, cert, mix) = if analysis {
        (
            opt_value(mdp, cfg.m_rounds).ok(),
            smoothness_certificate(mdp, 3).ok(),
            mixing_estimate(mdp).ok(),
        )
    } else {
        (None, None, None)
    };
    let report = regret_report(mdp, &log, &comparator, opt, cert.as_ref(), mix.as_ref())?;
    Ok(RunOutput { log, report, comparator_etas })
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<i32, CliError> {
    let started = Instant::now();
    let mdp = cfg.build_mdp()?;
    let learner = cfg.build_learner()?;
    let opponent = cfg
        .opponent
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"opponent\" section".into()))?;
    let result = execute_run(&mdp, cfg, opponent, &learner, cfg.t_episodes, seed, true)?;
    write_atomic(
        &out.join("episodes.csv"),
        episode_csv(&result.log, &result.comparator_etas).as_bytes(),
    )?;
    write_atomic(&out.join("regret.json"), &to_json(&result.report))?;
    let summary = RunSummary {
        config: cfg,
        regret: &result.report,
        verifier_pass_counts: None,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        artifact_version: env!("CARGO_PKG_VERSION"),
    };
    write_atomic(&out.join("summary.json"), &to_json(&summary))?;
    log::info!(
        "simulate: T={} regret={:.6} value={:.6}",
        result.log.t_episodes,
        result.report.regret,
        result.report.learner_value
    );
    println!(
        "regret {:.6} (comparator {}, value {:.6}; learner {:.6}; V-bar {:.6})",
        result.report.regret,
        result.report.comparator_method,
        result.report.comparator_value,
        result.report.learner_value,
        result.report.v_bar,
    );
    Ok(0)
}

pub fn cmd_verify(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<i32, CliError> {
    let suite = cfg.suite_config(seed)?;
    let checks = run_default_suite(&suite)?;
    write_atomic(&out.join("bound_checks.json"), &to_json(&checks))?;

    let mut families: BTreeMap<&str, (usize, usize, f64)> = BTreeMap::new();
    for c in &checks {
        let entry = families.entry(&c.name).or_insert((0, 0, f64::INFINITY));
        entry.0 += usize::from(c.pass);
        entry.1 += 1;
        entry.2 = entry.2.min(c.slack);
    }
    println!("{:<32} {:>12} {:>14}", "check", "pass/total", "min slack");
    for (name, (pass, total, min_slack)) in &families {
        println!("{name:<32} {:>5}/{:<6} {min_slack:>14.3e}", pass, total);
    }
    let (passed, failed) = tally(&checks);
    println!("{passed} passed, {failed} failed");
    for c in checks.iter().filter(|c| !c.pass).take(10) {
        println!("FAIL {} lhs={} rhs={} ({})", c.name, c.lhs, c.rhs, c.context);
    }
    Ok(if failed == 0 { 0 } else { 1 })
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    t_episodes: usize,
    gamma: usize,
    epsilon: f64,
    alpha: Option<f64>,
    seed: u64,
    algorithm: String,
    opponent: String,
    regret: f64,
    learner_value: f64,
    comparator_value: f64,
    v_bar: f64,
    rho1_hat: f64,
    rho2_hat: f64,
}

#[derive(Serialize)]
struct RateGroup {
    alpha: Option<f64>,
    gamma: Option<usize>,
    epsilon: Option<f64>,
    points: Vec<(f64, f64)>,
    slope: f64,
    cap: f64,
    pass: bool,
}

/// Window length used when a sweep does not pin one: the rate-optimal
/// choice `min{⌈T^{4α/7}⌉, T}` for drift exponents, the full horizon
/// otherwise.
pub fn auto_gamma(t: usize, alpha: Option<f64>) -> usize {
    match alpha {
        Some(a) => ((t as f64).powf(4.0 * a / 7.0).ceil() as usize).clamp(1, t),
        None => t,
    }
}

/// Slope cap for the fitted regret exponent.
pub fn slope_cap(alpha: Option<f64>) -> f64 {
    match alpha {
        Some(a) => (1.0 - 3.0 * a / 7.0).max(0.25) + 0.1,
        None => 0.35,
    }
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path, seed: u64, jobs: usize) -> Result<i32, CliError> {
    let sweep: &SweepSection = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"sweep\" section".into()))?;
    if sweep.t_axis.is_empty() || sweep.seeds.is_empty() {
        return Err(CliError::Config("sweep axes must be nonempty".into()));
    }
    let mdp = cfg.build_mdp()?;
    let base_learner = cfg.build_learner()?;
    let base_opponent = cfg
        .opponent
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"opponent\" section".into()))?;

    // Without an explicit axis, a drift opponent still has an exponent;
    // the derived window and the slope cap should see it.
    let alphas: Vec<Option<f64>> = match &sweep.alpha_axis {
        Some(axis) if !axis.is_empty() => axis.iter().map(|a| Some(*a)).collect(),
        _ => match base_opponent {
            OpponentSection::Drift { alpha, .. } => vec![Some(*alpha)],
            _ => vec![None],
        },
    };
    let gammas: Vec<Option<usize>> = match &sweep.gamma_axis {
        Some(axis) if !axis.is_empty() => axis.iter().map(|g| Some(*g)).collect(),
        _ => vec![None],
    };
    let epsilons: Vec<Option<f64>> = match &sweep.epsilon_axis {
        Some(axis) if !axis.is_empty() => axis.iter().map(|e| Some(*e)).collect(),
        _ => vec![None],
    };

    struct Cell {
        t: usize,
        gamma: usize,
        gamma_spec: Option<usize>,
        epsilon: Option<f64>,
        alpha: Option<f64>,
        seed: u64,
        opponent: OpponentSection,
    }
    let mut cells = Vec::new();
    for &alpha in &alphas {
        let opponent = match alpha {
            Some(a) => base_opponent.with_alpha(a)?,
            None => base_opponent.clone(),
        };
        for &gamma_spec in &gammas {
            for &epsilon in &epsilons {
                for &t in &sweep.t_axis {
                    let gamma = gamma_spec.unwrap_or_else(|| auto_gamma(t, alpha));
                    if gamma > t {
                        return Err(CliError::Config(format!(
                            "sweep cell has gamma {gamma} > T {t}"
                        )));
                    }
                    for &cell_seed in &sweep.seeds {
                        cells.push(Cell {
                            t,
                            gamma,
                            gamma_spec,
                            epsilon,
                            alpha,
                            seed: cell_seed ^ seed,
                            opponent: opponent.clone(),
                        });
                    }
                }
            }
        }
    }

    log::info!("sweep: {} cells, {} worker(s)", cells.len(), jobs.max(1));
    type CellOutcome = Result<(SweepRow, Option<usize>, Option<f64>), CliError>;
    let results = parallel_map(cells, jobs, |cell| -> CellOutcome {
        let learner = collabmdp::LearnerConfig::new(
            base_learner.algorithm,
            cell.gamma,
            cell.epsilon,
        )?;
        let out = execute_run(&mdp, cfg, &cell.opponent, &learner, cell.t, cell.seed, false)?;
        let row = SweepRow {
            t_episodes: cell.t,
            gamma: cell.gamma,
            epsilon: learner.epsilon(),
            alpha: cell.alpha,
            seed: cell.seed,
            algorithm: format!("{:?}", base_learner.algorithm),
            opponent: cell.opponent.kind_name().to_string(),
            regret: out.report.regret,
            learner_value: out.report.learner_value,
            comparator_value: out.report.comparator_value,
            v_bar: out.report.v_bar,
            rho1_hat: out.log.rho1_hat(),
            rho2_hat: out.log.rho2_hat(),
        };
        Ok((row, cell.gamma_spec, cell.epsilon))
    });

    // Rate fits group on the requested axes, never on derived values, so an
    // auto-Γ run fits one curve per alpha.
    type GroupCell = (usize, f64, Option<f64>, Option<usize>, Option<f64>);
    let mut rows = Vec::new();
    let mut grouped: BTreeMap<String, Vec<GroupCell>> = BTreeMap::new();
    for res in results {
        let (row, gamma_spec, epsilon_spec) = res?;
        let key = format!("alpha={:?} gamma={gamma_spec:?} eps={epsilon_spec:?}", row.alpha);
        grouped.entry(key).or_default().push((
            row.t_episodes,
            row.regret,
            row.alpha,
            gamma_spec,
            epsilon_spec,
        ));
        rows.push(row);
    }

    let mut csv = String::from(
        "t_episodes,gamma,epsilon,alpha,seed,algorithm,opponent,regret,learner_value,comparator_value,v_bar,rho1_hat,rho2_hat\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.t_episodes,
            r.gamma,
            r.epsilon,
            r.alpha.map(|a| a.to_string()).unwrap_or_default(),
            r.seed,
            r.algorithm,
            r.opponent,
            r.regret,
            r.learner_value,
            r.comparator_value,
            r.v_bar,
            r.rho1_hat,
            r.rho2_hat,
        ));
    }
    write_atomic(&out.join("sweep.csv"), csv.as_bytes())?;

    let mut groups = Vec::new();
    let mut all_pass = true;
    for (_, cells) in grouped {
        let alpha = cells[0].2;
        let gamma = cells[0].3;
        let epsilon = cells[0].4;
        let mut by_t: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (t, regret, ..) in &cells {
            by_t.entry(*t).or_default().push(*regret);
        }
        if by_t.len() < 2 {
            continue;
        }
        let points: Vec<(f64, f64)> = by_t
            .iter()
            .map(|(t, rs)| (*t as f64, rs.iter().sum::<f64>() / rs.len() as f64))
            .collect();
        let cap = slope_cap(alpha);
        let (slope, check) = collabmdp::verifier::check_rate(
            &points,
            cap,
            format!("alpha {alpha:?}, {} horizons", points.len()),
        );
        all_pass &= check.pass;
        println!(
            "rate fit: alpha={alpha:?} slope={slope:.4} cap={cap:.4} {}",
            if check.pass { "ok" } else { "EXCEEDED" }
        );
        groups.push(RateGroup { alpha, gamma, epsilon, points, slope, cap, pass: check.pass });
    }
    write_atomic(&out.join("rate.json"), &to_json(&groups))?;
    Ok(if all_pass { 0 } else { 1 })
}

pub fn cmd_reduce(
    graphs: &PathBuf,
    rho2_override: Option<f64>,
    out: &Path,
) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(graphs)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", graphs.display())))?;
    let file: GraphFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("graph file parse error: {e}")))?;
    let rho2 = rho2_override.unwrap_or(file.rho2);
    let instance = reduce(&file.rounds, rho2)?;
    let paths: Vec<_> = file
        .rounds
        .iter()
        .map(enumerate_path_policies)
        .collect::<collabmdp::Result<_>>()?;
    let report = check_correspondence(&instance, &paths)?;

    write_atomic(&out.join("reduced_mdp.json"), instance.mdp.to_json().as_bytes())?;
    write_atomic(&out.join("schedule.json"), &to_json(&instance.schedule))?;
    write_atomic(&out.join("correspondence.json"), &to_json(&report))?;

    for round in &report.rounds {
        let positive = round.entries.iter().filter(|e| e.ratio.is_some()).count();
        println!(
            "round {}: {} paths ({} with positive value), ratio spread {:.3e}, max eta at zero value {:.3e}",
            round.round,
            round.entries.len(),
            positive,
            round.ratio_spread,
            round.zero_value_max_eta,
        );
    }
    Ok(0)
}

pub fn cmd_smoothness(cfg: &ExperimentConfig, out: &Path) -> Result<i32, CliError> {
    let mdp = cfg.build_mdp()?;
    let section = cfg.smoothness.clone().unwrap_or(crate::config::SmoothnessSection {
        resolution: None,
        p1: None,
        p2: None,
    });
    let resolution = section.resolution.unwrap_or(3);
    let mut cert = smoothness_certificate(&mdp, resolution)?;
    // Influence-based enrichment only applies to state-only rewards.
    if let Ok(kf) = kappa_factors(&mdp, cert.eta_hat) {
        cert.kappa1 = Some(kf.kappa1);
        cert.kappa2 = Some(kf.kappa2);
        if let (Some(p1), Some(p2)) = (section.p1, section.p2) {
            let (lam_max, mu_min) = smoothness_bounds_from_kappa(kf.kappa1, kf.kappa2, p1, p2)?;
            cert.p1 = Some(p1);
            cert.p2 = Some(p2);
            println!("influence bounds: lambda <= {lam_max:.6}, mu >= {mu_min:.6}");
        }
    }
    write_atomic(&out.join("smoothness.json"), &to_json(&cert))?;
    println!(
        "certificate: lambda={:.6} mu={:.6} eta*={:.6} ({})",
        cert.lambda, cert.mu, cert.eta_star, cert.grid
    );
    Ok(0)
}
