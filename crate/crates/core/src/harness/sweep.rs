use std::sync::Mutex;

use log::{info, warn};
use ndarray::Array1;
use rayon::prelude::*;

use super::config::{Selector, SweepConfig};
use super::csv::{write_csv, CsvAppender};
use super::record::{sanitize, SweepRecord};
use crate::calib::p_eff;
use crate::dln::{dln_train, DlnConfig, GradNoise};
use crate::error::{Error, Result};
use crate::linalg::{matvec, norm2};
use crate::model::rng::stream_seed;
use crate::model::{gen_instance, lr_norm, population_risk, DesignSpec, ProblemInstance, TargetSpec};
use crate::solver::solve_min_lp;
use crate::theory::{ray_scale_prediction, transition_n_star, unified_norm_prediction, TheoryInputs};

/// Environment variable capping the number of sweep workers.
pub const THREADS_ENV: &str = "NORMSCALER_THREADS";

/// Theory overlay for one `(target, design, σ, p, r, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryColumns {
    pub norm_pred: f64,
    pub slope_pred: f64,
    pub regime_pred: &'static str,
    pub t_star_pred: f64,
    pub n_star_pred: f64,
    pub r_star: f64,
}

pub fn theory_columns(target: &TargetSpec, design: &DesignSpec, sigma: f64, p: f64, r: f64, n: usize) -> Result<TheoryColumns> {
    let inputs = TheoryInputs::from_target(target, design, sigma, p, r, n)?;
    let pred = unified_norm_prediction(&inputs, n)?;
    Ok(TheoryColumns {
        norm_pred: pred.value,
        slope_pred: pred.slope,
        regime_pred: pred.regime.label(),
        t_star_pred: ray_scale_prediction(&inputs, n),
        n_star_pred: transition_n_star(&inputs).value,
        r_star: inputs.r_star(),
    })
}

/// Seed of the instance for grid size `n` and replicate `seed_idx`, shared by every σ and selector value.
pub fn instance_seed(cfg: &SweepConfig, n: usize, seed_idx: usize) -> u64 {
    stream_seed(cfg.base_seed, &cfg.experiment_id, &[n as u64, seed_idx as u64])
}

#[derive(Debug, Clone, Copy)]
struct Job {
    sigma: f64,
    sel: usize,
    n: usize,
    seed_idx: usize,
}

struct Fit {
    w_hat: Array1<f64>,
    feas_residual: f64,
    iters: u64,
    status: String,
}

fn base_record(cfg: &SweepConfig, job: &Job, r: f64) -> SweepRecord {
    let (p, alpha, lr) = match &cfg.selector {
        Selector::ExplicitP(ps) => (ps[job.sel], f64::NAN, f64::NAN),
        Selector::DlnAlpha(pairs) => (f64::NAN, pairs[job.sel].0, pairs[job.sel].1),
    };
    SweepRecord {
        experiment_id: cfg.experiment_id.clone(),
        seed: job.seed_idx as u64,
        n: job.n,
        d: cfg.design.resolve_d(job.n).unwrap_or(0),
        s: cfg.target.support_size(),
        target_kind: cfg.target.label().to_string(),
        a: cfg.target.magnitude().unwrap_or(f64::NAN),
        sigma: job.sigma,
        selector_kind: cfg.selector.kind().to_string(),
        p,
        alpha,
        lr,
        r,
        norm_emp: f64::NAN,
        norm_pred: f64::NAN,
        slope_pred: f64::NAN,
        regime_pred: String::new(),
        t_star_pred: f64::NAN,
        n_star_pred: f64::NAN,
        r_star: f64::NAN,
        test_mse: f64::NAN,
        feas_residual: f64::NAN,
        solver_iters: 0,
        status: String::new(),
    }
}

fn relative_residual(inst: &ProblemInstance, w: &Array1<f64>) -> f64 {
    let mut fit = vec![0.0; inst.n];
    matvec(inst.x_slice(), inst.n, inst.d, w.as_slice().expect("contiguous"), &mut fit);
    let resid: Vec<f64> = fit.iter().zip(inst.y.iter()).map(|(a, b)| a - b).collect();
    let yn = norm2(inst.y.as_slice().expect("contiguous"));
    if yn == 0.0 {
        norm2(&resid)
    } else {
        norm2(&resid) / yn
    }
}

fn fit_cell(cfg: &SweepConfig, job: &Job, inst: &ProblemInstance) -> Result<Fit> {
    match &cfg.selector {
        Selector::ExplicitP(ps) => {
            let sol = solve_min_lp(inst.x.view(), inst.y.view(), ps[job.sel], &cfg.solver_opts)?;
            let status = if sol.converged { "converged" } else { "not_converged" };
            Ok(Fit { w_hat: sol.w_hat, feas_residual: sol.feas_residual, iters: sol.iters as u64, status: status.into() })
        }
        Selector::DlnAlpha(pairs) => {
            let (alpha, lr) = pairs[job.sel];
            let grad_noise = cfg.dln_cfg.grad_noise.map(|g| GradNoise {
                scale: g.scale,
                seed: stream_seed(g.seed, &cfg.experiment_id, &[job.n as u64, job.seed_idx as u64, job.sel as u64, job.sigma.to_bits()]),
            });
            let dcfg = DlnConfig { alpha, lr, grad_noise, ..cfg.dln_cfg.clone() };
            let rep = dln_train(inst.x.view(), inst.y.view(), &dcfg)?;
            let feas = relative_residual(inst, &rep.beta);
            Ok(Fit { w_hat: rep.beta, feas_residual: feas, iters: rep.epochs_run, status: rep.status.label().into() })
        }
    }
}

fn run_job(cfg: &SweepConfig, job: &Job, p_of_sel: &[Result<f64>]) -> Vec<SweepRecord> {
    let mut recs: Vec<SweepRecord> = cfg.r_list.iter().map(|&r| base_record(cfg, job, r)).collect();
    let fail = |recs: &mut Vec<SweepRecord>, e: &Error| {
        for rec in recs.iter_mut() {
            rec.status = sanitize(&format!("failed: {e}"));
        }
    };
    let p = match &p_of_sel[job.sel] {
        Ok(p) => *p,
        Err(e) => {
            fail(&mut recs, e);
            return recs;
        }
    };
    let seed = instance_seed(cfg, job.n, job.seed_idx);
    let outcome = gen_instance(&cfg.target, &cfg.design, job.sigma, job.n, seed).and_then(|inst| {
        let fit = fit_cell(cfg, job, &inst)?;
        let risk = population_risk(fit.w_hat.view(), inst.w_star.view(), job.sigma)?;
        Ok((inst.d, fit, risk))
    });
    let (d, fit, risk) = match outcome {
        Ok(v) => v,
        Err(e) => {
            warn!("cell n = {} seed {} failed: {e}", job.n, job.seed_idx);
            fail(&mut recs, &e);
            return recs;
        }
    };
    for rec in recs.iter_mut() {
        rec.p = p;
        rec.d = d;
        rec.norm_emp = lr_norm(fit.w_hat.view(), rec.r);
        rec.test_mse = risk;
        rec.feas_residual = fit.feas_residual;
        rec.solver_iters = fit.iters;
        rec.status = fit.status.clone();
        match theory_columns(&cfg.target, &cfg.design, job.sigma, p, rec.r, job.n) {
            Ok(t) => {
                rec.norm_pred = t.norm_pred;
                rec.slope_pred = t.slope_pred;
                rec.regime_pred = t.regime_pred.to_string();
                rec.t_star_pred = t.t_star_pred;
                rec.n_star_pred = t.n_star_pred;
                rec.r_star = t.r_star;
            }
            Err(e) => rec.status = sanitize(&format!("failed: theory: {e}")),
        }
    }
    recs
}

fn jobs(cfg: &SweepConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for &sigma in &cfg.sigma_list {
        for sel in 0..cfg.selector.len() {
            for &n in &cfg.n_grid {
                for seed_idx in 0..cfg.seeds_per_cell {
                    out.push(Job { sigma, sel, n, seed_idx });
                }
            }
        }
    }
    out
}

fn worker_count() -> usize {
    let avail = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(cap) if cap > 0 => cap.min(avail),
        _ => avail,
    }
}

/// Run every (σ, selector value, n, seed) cell and return one record per cell and `r`,
/// sorted by experiment, n, seed and r.
///
/// With an output path, records are appended as cells finish and the file is
/// rewritten in sorted order at the end.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let p_of_sel: Vec<Result<f64>> = match &cfg.selector {
        Selector::ExplicitP(ps) => ps.iter().map(|&p| Ok(p)).collect(),
        Selector::DlnAlpha(pairs) => pairs.iter().map(|&(alpha, _)| p_eff(alpha, &cfg.calib).map(|pe| pe.p)).collect(),
    };
    let jobs = jobs(cfg);
    let appender = match &cfg.output_path {
        Some(path) => Some(Mutex::new(CsvAppender::create(path)?)),
        None => None,
    };
    let collected = Mutex::new(Vec::with_capacity(jobs.len() * cfg.r_list.len()));
    let io_error: Mutex<Option<Error>> = Mutex::new(None);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::SpecInvalid(format!("thread pool: {e}")))?;
    info!("sweep {}: {} cells", cfg.experiment_id, jobs.len());
    pool.install(|| {
        jobs.par_iter().for_each(|job| {
            let recs = run_job(cfg, job, &p_of_sel);
            if let Some(app) = &appender {
                if let Err(e) = app.lock().expect("writer lock").append(&recs) {
                    io_error.lock().expect("error lock").get_or_insert(e);
                }
            }
            collected.lock().expect("record lock").extend(recs);
        })
    });
    if let Some(e) = io_error.into_inner().expect("error lock") {
        return Err(e);
    }
    drop(appender);
    let mut records = collected.into_inner().expect("record lock");
    records.sort_by(|a, b| a.sort_key_cmp(b));
    if let Some(path) = &cfg.output_path {
        write_csv(&records, path)?;
    }
    Ok(records)
}
