use std::path::{Path, PathBuf};

use qbp::bp::window_error_sweep;
use qbp::hastings::{conjugation_residual, hastings_operator};
use qbp::markov::{all_deficiencies, leaf_trace_preserves_markov, LeafTraceStatus, MARKOV_TOL};
use qbp::random::{derive_seed, random_hermitian_with, rng};
use qbp::testkit::run_suite;
use qbp::thermal::{leaf_thermal_fit, single_step_experiment};
use qbp::{GraphModel, SiteLayout};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{float, opt_float, write_json, Table};

/// Files written plus an optional check failure that should surface as exit 4
/// once the outputs are on disk.
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(files: Vec<PathBuf>) -> Self {
        Self {
            files,
            failure: None,
        }
    }
}

/// Model at unit β with the full Hilbert space checked against the cap up front.
fn load_model(cfg: &ExperimentConfig, base: &Path) -> Result<GraphModel, CliError> {
    let model = cfg.build_model(base)?;
    model.full_layout()?;
    Ok(model)
}

fn per_beta(model: &GraphModel, betas: &[f64]) -> Result<Vec<(f64, GraphModel)>, CliError> {
    betas
        .iter()
        .map(|&b| Ok((b, model.with_beta(b)?)))
        .collect()
}

pub fn window_sweep(cfg: &ExperimentConfig, base: &Path, out: &Path) -> Result<Outcome, CliError> {
    let model = load_model(cfg, base)?;
    let target = cfg.target(&model)?;
    let ells = cfg.ells_for(&model);
    let max_ell = model.num_vertices() - 1;
    if let Some(&bad) = ells.iter().find(|&&l| l > max_ell) {
        return Err(CliError::Config(format!(
            "window size {bad} exceeds {max_ell} for this model"
        )));
    }
    let models = per_beta(&model, &cfg.betas)?;

    let results = models
        .par_iter()
        .map(|(beta, m)| {
            let sweep = window_error_sweep(m, target, &ells)?;
            let (_, fit) = leaf_thermal_fit(m, target)?;
            let consts = cfg.constants.with_fit(fit.k_big.zip(fit.k_small));
            let steps = ells
                .par_iter()
                .map(|&ell| single_step_experiment(m, target, ell, &consts))
                .collect::<qbp::Result<Vec<_>>>()?;
            Ok((*beta, sweep, fit.is_defined(), consts, steps))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut sweep_table = Table::new(&["beta", "ell", "trace_error", "slope"]);
    let mut step_table = Table::new(&[
        "beta",
        "ell",
        "lhs_normalized",
        "lhs_literal",
        "norm_v",
        "rhs_total",
        "rhs_bound1",
        "rhs_bound2",
        "K",
        "k",
        "fit_defined",
        "rhs_dominates",
    ]);
    for (beta, sweep, defined, consts, steps) in &results {
        for &(ell, err) in &sweep.errors {
            sweep_table.push(vec![
                float(*beta),
                ell.to_string(),
                float(err),
                opt_float(sweep.slope),
            ]);
        }
        for s in steps {
            step_table.push(vec![
                float(*beta),
                s.ell.to_string(),
                float(s.lhs_normalized),
                float(s.lhs_literal),
                float(s.norm_v),
                float(s.rhs.total),
                float(s.rhs.bound1),
                float(s.rhs.bound2),
                float(consts.k_big),
                float(consts.k_small),
                defined.to_string(),
                (s.lhs_normalized <= s.rhs.total).to_string(),
            ]);
        }
    }
    let files = vec![out.join("window_sweep.csv"), out.join("single_step.csv")];
    sweep_table.write(&files[0])?;
    step_table.write(&files[1])?;
    Ok(Outcome::ok(files))
}

pub fn cumulant_decay(
    cfg: &ExperimentConfig,
    base: &Path,
    out: &Path,
) -> Result<Outcome, CliError> {
    let model = load_model(cfg, base)?;
    let target = cfg.target(&model)?;
    let models = per_beta(&model, &cfg.betas)?;
    let results = models
        .par_iter()
        .map(|(beta, m)| Ok((*beta, leaf_thermal_fit(m, target)?)))
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut table = Table::new(&["beta", "j", "norm", "K", "k", "fit_rms"]);
    for (beta, (series, fit)) in &results {
        for e in &series.entries {
            table.push(vec![
                float(*beta),
                e.j.to_string(),
                float(e.norm),
                opt_float(fit.k_big),
                opt_float(fit.k_small),
                opt_float(fit.rms_residual),
            ]);
        }
    }
    let path = out.join("cumulant_decay.csv");
    table.write(&path)?;
    Ok(Outcome::ok(vec![path]))
}

const HASTINGS_STREAM: u64 = 0x4a57;

pub fn hastings_verify(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let instances = cfg.instances.unwrap_or(100);
    let mut s_steps = cfg.s_steps.clone();
    s_steps.sort_unstable();
    s_steps.dedup();
    let layout = SiteLayout::qubits([0, 1])?;
    let seed = cfg.seed();

    let rows = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(derive_seed(seed, HASTINGS_STREAM, i as u64));
            let h = random_hermitian_with(&mut r, &layout);
            let v = random_hermitian_with(&mut r, &layout);
            let norm_v = v.op_norm();
            let mut rows = Vec::new();
            for &beta in &cfg.betas {
                let mut prev: Option<f64> = None;
                for &s in &s_steps {
                    let o = hastings_operator(&h, &v, beta, s)?;
                    let residual = conjugation_residual(&h, &v, beta, &o)?;
                    let ratio = prev.map(|p| residual / p);
                    prev = Some(residual);
                    rows.push((
                        i,
                        beta,
                        s,
                        residual,
                        ratio,
                        o.op_norm(),
                        (beta * norm_v / 2.0).exp(),
                    ));
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut table = Table::new(&[
        "instance",
        "beta",
        "s_steps",
        "residual",
        "residual_ratio",
        "o_norm",
        "o_bound",
        "within_bound",
    ]);
    let mut violations = 0;
    for (i, beta, s, residual, ratio, o_norm, bound) in rows.into_iter().flatten() {
        let within = o_norm <= bound * (1.0 + 1e-12);
        violations += usize::from(!within);
        table.push(vec![
            i.to_string(),
            float(beta),
            s.to_string(),
            float(residual),
            opt_float(ratio),
            float(o_norm),
            float(bound),
            within.to_string(),
        ]);
    }
    let path = out.join("hastings_verify.csv");
    table.write(&path)?;
    let failure =
        (violations > 0).then(|| format!("{violations} instances exceed the norm bound on O"));
    Ok(Outcome {
        files: vec![path],
        failure,
    })
}

pub fn lemma_suite(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let report = run_suite(cfg.seed(), cfg.instances.unwrap_or(500))?;
    let mut table = Table::new(&["check", "count", "min_margin", "failures"]);
    for (name, s) in &report.checks {
        table.push(vec![
            name.clone(),
            s.count.to_string(),
            float(s.min_margin),
            s.failures.to_string(),
        ]);
    }
    let files = vec![out.join("lemma_suite.csv"), out.join("lemma_suite.json")];
    table.write(&files[0])?;
    write_json(&files[1], &report)?;
    let total = report.total_failures();
    let failure = (total > 0).then(|| format!("{total} lemma instances failed"));
    Ok(Outcome { files, failure })
}

pub fn markov_audit(cfg: &ExperimentConfig, base: &Path, out: &Path) -> Result<Outcome, CliError> {
    let model = load_model(cfg, base)?;
    let models = per_beta(&model, &cfg.betas)?;
    let ells = cfg.ells_for(&model);
    let leaves: Vec<_> = model
        .tree()
        .vertices()
        .iter()
        .copied()
        .filter(|&v| model.tree().is_leaf(v).unwrap_or(false))
        .collect();

    let results = models
        .par_iter()
        .map(|(beta, m)| {
            let rho = m.thermal_state()?;
            let defs = ells
                .iter()
                .map(|&ell| all_deficiencies(&rho, m.tree(), ell, cfg.max_subset))
                .collect::<qbp::Result<Vec<_>>>()?;
            let leaf_reports = leaves
                .iter()
                .map(|&leaf| leaf_trace_preserves_markov(m, leaf, MARKOV_TOL))
                .collect::<qbp::Result<Vec<_>>>()?;
            Ok((*beta, defs, leaf_reports))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut table = Table::new(&["beta", "ell", "U", "deficiency", "raw", "degenerate"]);
    let mut leaf_table = Table::new(&["beta", "leaf", "status", "max_before", "max_after"]);
    let worst = |rows: &[qbp::markov::Deficiency]| -> Option<f64> {
        (!rows.is_empty()).then(|| rows.iter().map(|d| d.deficiency).fold(0.0, f64::max))
    };
    for (beta, defs, leaf_reports) in &results {
        for d in defs.iter().flatten() {
            let u: Vec<String> = d.u.iter().map(|v| v.to_string()).collect();
            table.push(vec![
                float(*beta),
                d.ell.to_string(),
                u.join(" "),
                float(d.deficiency),
                float(d.raw),
                d.degenerate.to_string(),
            ]);
        }
        for r in leaf_reports {
            let status = match r.status {
                LeafTraceStatus::Preserved => "preserved",
                LeafTraceStatus::Violated => "violated",
                LeafTraceStatus::InputNotMarkov => "input_not_markov",
            };
            leaf_table.push(vec![
                float(*beta),
                r.leaf.to_string(),
                status.to_string(),
                opt_float(worst(&r.before)),
                opt_float(worst(&r.after)),
            ]);
        }
    }
    let files = vec![
        out.join("markov_audit.csv"),
        out.join("markov_leaf_trace.csv"),
    ];
    table.write(&files[0])?;
    leaf_table.write(&files[1])?;
    Ok(Outcome::ok(files))
}
