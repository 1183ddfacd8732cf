//! The seven batch jobs. Each returns its tables and checks; writing is
//! left to the caller.

use std::path::Path;

use monopole_core::cone::{default_sweep, ConeSweep, QuadratureOptions};
use monopole_core::gauge::{lorenz_residual, monopole_residual};
use monopole_core::norms::{
    embedding_check, homogeneous_factorization_check, probe_sweep, scaling_check, scaling_exponent,
    ProbeRow, ProbeSweep, SpaceTimeSample, TimeWindow, WindowProfile,
};
use monopole_core::null_geometry::{
    collinear_path, null_sweep, symbol_angle, symbol_norm, NullSweep,
};
use monopole_core::spectral::random_lie_field;
use monopole_core::{
    rng_from_seed, snapshot, CsvFloat as F, DiagonalSystem, MonopoleConfig, Sign, Spectral,
    SweepRng,
};
use rayon::prelude::*;

use crate::config::{Command, RunConfig};
use crate::output::{Check, Table};
use crate::CliError;

/// What a job produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JobOutput {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

pub fn execute(cfg: &RunConfig, dir: &Path) -> Result<JobOutput, CliError> {
    match cfg.command {
        Command::Simulate => simulate(cfg, dir),
        Command::Residuals => residuals(cfg),
        Command::VerifyNull => verify_null(cfg),
        Command::VerifyCone => verify_cone(cfg),
        Command::VerifyNorms => verify_norms(cfg),
        Command::Scaling => scaling(cfg),
        Command::ProbeBilinear => probe_bilinear(cfg),
    }
}

fn initial_data(cfg: &RunConfig, sp: &Spectral, rng: &mut SweepRng) -> MonopoleConfig {
    if cfg.amplitude == 0.0 {
        MonopoleConfig::zeros(cfg.grid, cfg.dim)
    } else {
        MonopoleConfig::random(sp, cfg.dim, cfg.band, cfg.amplitude, rng)
    }
}

fn fold_max(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, x| {
        if x.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(x)
        }
    })
}

fn simulate(cfg: &RunConfig, dir: &Path) -> Result<JobOutput, CliError> {
    let sys = DiagonalSystem::new(cfg.grid).with_nonlinear(cfg.nonlinear);
    let init = initial_data(cfg, sys.spectral(), &mut rng_from_seed(cfg.seed));
    let start = sys.state_from_config(&init, 0.0)?;
    let mut table = Table::new(
        "trajectory.csv",
        "step,time,l2,max_abs,lie_defect,lorenz_residual",
    );
    let (mut lorenz, mut defect) = (0.0f64, 0.0f64);
    let mut snaps = Vec::new();
    let mut k = 0usize;
    sys.evolve_with_derivatives(&start, cfg.t_final, cfg.grid.dt, usize::MAX, |s, d| {
        if k % cfg.save_every == 0 {
            let c = sys.to_config(s)?;
            let r = lorenz_residual(sys.spectral(), &c, d)?.max_abs();
            let ld = c.lie_defect();
            lorenz = fold_max([lorenz, r]);
            defect = fold_max([defect, ld]);
            table.rows.push(format!(
                "{k},{},{},{},{},{}",
                F(s.time),
                F(s.l2()),
                F(c.max_abs()),
                F(ld),
                F(r)
            ));
            if cfg.snapshots {
                snaps.push((s.time, c));
            }
        }
        k += 1;
        Ok(())
    })?;
    if cfg.snapshots {
        let params: Vec<(String, String)> = cfg
            .echo()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        snapshot::export_series(
            &dir.join("snapshots"),
            snaps.iter().map(|(t, c)| (*t, c)),
            &params,
        )?;
    }
    Ok(JobOutput {
        tables: vec![table],
        checks: vec![
            Check::at_most("lorenz_residual", lorenz, cfg.residual_tol),
            Check::at_most("lie_defect", defect, cfg.residual_tol),
        ],
    })
}

fn residuals(cfg: &RunConfig) -> Result<JobOutput, CliError> {
    let sys = DiagonalSystem::new(cfg.grid).with_nonlinear(cfg.nonlinear);
    let sp = sys.spectral();
    let mut rng = rng_from_seed(cfg.seed);
    let data: Vec<MonopoleConfig> = (0..cfg.samples)
        .map(|_| initial_data(cfg, sp, &mut rng))
        .collect();
    let per_sample: Vec<(Vec<String>, f64)> = data
        .par_iter()
        .enumerate()
        .map(|(i, init)| {
            let start = sys.state_from_config(init, 0.0)?;
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            let mut k = 0usize;
            sys.evolve_with_derivatives(&start, cfg.t_final, cfg.grid.dt, usize::MAX, |s, d| {
                let c = sys.to_config(s)?;
                let lor = lorenz_residual(sp, &c, d)?.max_abs();
                worst = fold_max([worst, lor]);
                if k % cfg.save_every == 0 {
                    let mono = monopole_residual(sp, &c, d)?.max_abs();
                    rows.push(format!("{i},{k},{},{},{}", F(s.time), F(mono), F(lor)));
                }
                k += 1;
                Ok(())
            })?;
            Ok((rows, worst))
        })
        .collect::<Result<_, CliError>>()?;
    let worst = fold_max(per_sample.iter().map(|(_, w)| *w));
    let rows = per_sample.into_iter().flat_map(|(r, _)| r).collect();
    Ok(JobOutput {
        tables: vec![Table::new(
            "residuals.csv",
            "sample,step,time,monopole_residual,lorenz_residual",
        )
        .with_rows(rows)],
        checks: vec![Check::at_most("lorenz_residual", worst, cfg.residual_tol)],
    })
}

fn verify_null(cfg: &RunConfig) -> Result<JobOutput, CliError> {
    let sweep = null_sweep(&mut rng_from_seed(cfg.seed), cfg.null_samples, true);
    let envelopes = [
        ("angle_ratio_plus", &sweep.angle_plus),
        ("angle_ratio_minus", &sweep.angle_minus),
        ("symbol_ratio_plus", &sweep.symbol_plus),
        ("symbol_ratio_minus", &sweep.symbol_minus),
    ];
    let summary = envelopes
        .iter()
        .map(|(name, e)| format!("{name},{},{},{},{}", F(e.min), F(e.max), e.count, e.skipped))
        .collect();
    let c_sym = sweep.symbol_minus.max;

    let angles: Vec<f64> = (1..=8).map(|j| 10f64.powi(-j)).collect();
    let mut collinear = Vec::new();
    let mut joint = true;
    for k in 0..cfg.collinear_paths {
        let path = collinear_path(
            0.6 * k as f64,
            0.5 + k as f64,
            2.0 / (1.0 + k as f64),
            &angles,
        );
        let mut prev = f64::INFINITY;
        for (j, q) in path.iter().enumerate() {
            let th = symbol_angle(Sign::Minus, q.xi, q.eta)?;
            let s = symbol_norm(Sign::Minus, q.xi, q.eta);
            // The sampled supremum sits slightly below C_sym, and angles
            // carry an absolute rounding error near 1e-16.
            joint &= s <= c_sym * (1.0 + 1e-6) * th + 1e-15 && s < prev;
            prev = s;
            collinear.push(format!(
                "{k},{j},{},{},{},{}",
                F(angles[j]),
                F(th),
                F(s),
                F(symbol_norm(Sign::Plus, q.xi, q.eta))
            ));
            if j + 1 == path.len() {
                joint &= th <= 1e-7 && s <= 1e-7;
            }
        }
    }
    Ok(JobOutput {
        tables: vec![
            Table::new("null_sweep.csv", NullSweep::CSV_HEADER).with_rows(sweep.csv_rows()),
            Table::new("null_summary.csv", "quantity,min,max,count,skipped").with_rows(summary),
            Table::new(
                "collinear.csv",
                "path,index,angle,symbol_angle,symbol_norm_minus,symbol_norm_plus",
            )
            .with_rows(collinear),
        ],
        checks: vec![
            Check::new(
                "c_sym_finite",
                c_sym.is_finite() && sweep.symbol_minus.count > 0,
                format!("C_sym = {c_sym} over {} samples", sweep.symbol_minus.count),
            ),
            Check::new(
                "collinear_vanishing",
                joint,
                format!("{} paths", cfg.collinear_paths),
            ),
        ],
    })
}

fn verify_cone(cfg: &RunConfig) -> Result<JobOutput, CliError> {
    let opts = QuadratureOptions {
        start_points: cfg.quad_start_points,
        max_points: cfg.quad_max_points,
        rel_tol: cfg.quad_rel_tol,
    };
    let plus = default_sweep(Sign::Plus, &opts)?;
    let minus = default_sweep(Sign::Minus, &opts)?;
    let split = fold_max(minus.rows.iter().map(|r| r.split_defect));
    let summary = |s: &ConeSweep| {
        let converged = s.rows.iter().filter(|r| r.converged).count();
        format!(
            "{},{},{},{}",
            s.branch,
            F(s.max_value),
            converged,
            s.rows.len()
        )
    };
    let finite = |s: &ConeSweep| s.max_value.is_finite() && s.max_value > 0.0;
    Ok(JobOutput {
        checks: vec![
            Check::new(
                "c_i_finite",
                finite(&plus),
                format!("C_I = {}", plus.max_value),
            ),
            Check::new(
                "c_j_finite",
                finite(&minus),
                format!("C_J = {}", minus.max_value),
            ),
            Check::at_most("j_split", split, cfg.split_tol),
        ],
        tables: vec![
            Table::new("cone_plus.csv", ConeSweep::CSV_HEADER).with_rows(plus.csv_rows()),
            Table::new("cone_minus.csv", ConeSweep::CSV_HEADER).with_rows(minus.csv_rows()),
            Table::new("cone_summary.csv", "branch,max_value,converged,probes")
                .with_rows(vec![summary(&plus), summary(&minus)]),
        ],
    })
}

fn verify_norms(cfg: &RunConfig) -> Result<JobOutput, CliError> {
    let sp = Spectral::new(cfg.grid);
    let mut rng = rng_from_seed(cfg.seed);
    let fields: Vec<_> = (0..cfg.samples)
        .map(|_| random_lie_field(&sp, cfg.dim, cfg.band, 1.0, &mut rng))
        .collect();
    let window = TimeWindow::default();
    let rows: Vec<(String, f64, bool)> = fields
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let sign = Sign::BOTH[i % 2];
            let t = 0.15 + 0.15 * (i as f64 + 0.5) / cfg.samples as f64;
            let profile = WindowProfile::Gaussian { t };
            let (lhs, rhs) =
                homogeneous_factorization_check(&sp, &[f], profile, &cfg.params, sign, window)?;
            let u = SpaceTimeSample::free_wave(&sp, window, profile, &[f], sign)?;
            let e = embedding_check(&sp, &u, &cfg.params, sign)?;
            let mismatch = (lhs - rhs).abs() / rhs;
            Ok((
                format!(
                    "{i},{sign},{},{},{},{},{},{},{},{}",
                    F(t),
                    F(lhs),
                    F(rhs),
                    F(mismatch),
                    F(e.sup_hsp),
                    F(e.xsb),
                    F(e.ratio),
                    F(e.c_emb_discrete)
                ),
                mismatch,
                e.ratio <= e.c_emb_discrete,
            ))
        })
        .collect::<Result<_, CliError>>()?;
    let worst = fold_max(rows.iter().map(|r| r.1));
    let embedded = rows.iter().filter(|r| r.2).count();
    Ok(JobOutput {
        checks: vec![
            Check::at_most("factorization", worst, cfg.norm_tol),
            Check::new(
                "embedding",
                embedded == rows.len(),
                format!("{embedded}/{} samples within the embedding bound", rows.len()),
            ),
        ],
        tables: vec![Table::new(
            "norms.csv",
            "sample,sign,window_t,lhs,rhs,relative_mismatch,sup_hsp,xsb,embedding_ratio,c_emb_discrete",
        )
        .with_rows(rows.into_iter().map(|r| r.0).collect())],
    })
}

fn scaling(cfg: &RunConfig) -> Result<JobOutput, CliError> {
    let sp = Spectral::new(cfg.grid);
    let mut rng = rng_from_seed(cfg.seed);
    let (p, s) = (cfg.params.p, cfg.params.s);
    let predicted = scaling_exponent(s, p);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..cfg.samples {
        let f = random_lie_field(&sp, cfg.dim, cfg.band, 1.0, &mut rng);
        let e = scaling_check(&sp, &[&f], cfg.lambda, s, p)?;
        let dev = (e - predicted).abs();
        worst = fold_max([worst, dev]);
        rows.push(format!(
            "{i},{},{},{},{},{},{}",
            F(p),
            F(s),
            F(cfg.lambda),
            F(e),
            F(predicted),
            F(dev)
        ));
    }
    Ok(JobOutput {
        tables: vec![Table::new(
            "scaling.csv",
            "sample,p,s,lambda,measured,predicted,deviation",
        )
        .with_rows(rows)],
        checks: vec![Check::at_most("scaling_exponent", worst, cfg.scaling_tol)],
    })
}

fn probe_bilinear(cfg: &RunConfig) -> Result<JobOutput, CliError> {
    let settings = ProbeSweep {
        samples: cfg.probe_samples,
        ..ProbeSweep::default()
    };
    let per_sign: Vec<Vec<ProbeRow>> = Sign::BOTH
        .par_iter()
        .map(|&sign| probe_sweep(&mut rng_from_seed(cfg.seed), &settings, &cfg.params, sign))
        .collect::<Result<_, _>>()?;
    let rows: Vec<ProbeRow> = per_sign.into_iter().flatten().collect();
    let max = fold_max(rows.iter().map(|r| r.result.ratio));
    let mut checks = vec![Check::new(
        "probe_finite",
        max.is_finite(),
        format!("max ratio {max}"),
    )];
    if let Some(b) = cfg.probe_baseline {
        checks.push(Check::at_most("probe_baseline", max, b * (1.0 + 1e-12)));
    }
    Ok(JobOutput {
        tables: vec![Table::new("probe.csv", ProbeRow::CSV_HEADER)
            .with_rows(rows.iter().map(ProbeRow::csv).collect())],
        checks,
    })
}
