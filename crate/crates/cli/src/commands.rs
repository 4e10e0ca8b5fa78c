//! Experiment orchestration: each subcommand resolves its inputs from the
//! config, runs the corresponding laboratory routines, and emits CSV.

use std::path::Path;

use qplab_core::acceleration::{classify_type1, sample_profile, ProfileConfig};
use qplab_core::arithmetic::{cf_expand, Frequency};
use qplab_core::cocycles::{phase_lattice, TrigPolynomial};
use qplab_core::cohomology::{solve_truncated, AnalyticObservable};
use qplab_core::duality::{dual_lyapunov, SIMPLICITY_FLOOR};
use qplab_core::kotani::{johnson_moser_residual, reflectionless_residual, riccati_m};
use qplab_core::spectrum::{
    detect_and_label_gaps, sample_energies, schrodinger_bands, truncated_spectrum, OperatorKind,
};
use qplab_core::{C64, QpError};

use crate::config::{EnergySpec, KotaniTask, RunConfig};
use crate::csv::{write_csv, Field};

pub enum CmdError {
    Config(String),
    Numerical(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e)
    }
}

impl From<QpError> for CmdError {
    fn from(e: QpError) -> Self {
        match e {
            QpError::DataQuality(_)
            | QpError::NumericalQuality(_)
            | QpError::Convergence { .. }
            | QpError::Conditioning(_) => CmdError::Numerical(e.to_string()),
            other => CmdError::Config(other.to_string()),
        }
    }
}

struct Resolved {
    v: TrigPolynomial,
    alpha: Frequency,
    phases: Vec<f64>,
}

fn resolve(config: &RunConfig) -> Result<Resolved, CmdError> {
    let v = config.potential.build().map_err(CmdError::Config)?;
    let alpha = config.frequency.build().map_err(CmdError::Config)?;
    let phases = phase_lattice(config.phases, config.seed);
    Ok(Resolved { v, alpha, phases })
}

fn resolve_energies(config: &RunConfig, r: &Resolved) -> Result<Vec<f64>, CmdError> {
    Ok(match &config.energies {
        EnergySpec::List { values } => values.clone(),
        EnergySpec::Linspace { min, max, count } => {
            if *count == 0 {
                return Err(CmdError::Config("energies.count: must be positive".into()));
            }
            (0..*count)
                .map(|i| min + (max - min) * i as f64 / (*count as f64 - 1.0).max(1.0))
                .collect()
        }
        EnergySpec::Spectrum { count } => {
            let op = OperatorKind::Schrodinger(r.v.clone());
            let approx = truncated_spectrum(&op, &r.alpha, config.trunc_size, &r.phases)?;
            sample_energies(&approx, *count)
        }
    })
}

fn eps_grid(config: &RunConfig) -> Vec<f64> {
    (0..config.eps_points)
        .map(|i| config.eps_max * i as f64 / (config.eps_points as f64 - 1.0))
        .collect()
}

pub fn run_butterfly(config: &RunConfig, out: &Path) -> Result<(), CmdError> {
    let r = resolve(config)?;
    let mut rows = Vec::new();
    for q in 1..=config.q_max {
        for p in 0..q.max(2) {
            if p >= q && !(p == 0 && q == 1) {
                continue;
            }
            if p > 0 && gcd(p, q) != 1 {
                continue;
            }
            if p == 0 && q != 1 {
                continue;
            }
            let approx = schrodinger_bands(&r.v, p, q, config.bloch_phases)?;
            for (idx, &(l, rgt)) in approx.bands.iter().enumerate() {
                rows.push(vec![
                    Field::U(p),
                    Field::U(q),
                    Field::U(idx as u64),
                    Field::F(l),
                    Field::F(rgt),
                ]);
            }
        }
    }
    write_csv(
        &out.join("butterfly.csv"),
        &["p", "q", "band_index", "E_left", "E_right"],
        &rows,
    )?;
    Ok(())
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn run_profile(config: &RunConfig, out: &Path) -> Result<(), CmdError> {
    let r = resolve(config)?;
    let energies = resolve_energies(config, &r)?;
    let grid = eps_grid(config);
    let mut rows = Vec::new();
    for &e in &energies {
        let profile = sample_profile(
            &r.v,
            &r.alpha,
            e,
            &grid,
            config.n,
            config.phases,
            config.seed,
        )?;
        for i in 0..profile.eps.len() {
            rows.push(vec![
                Field::F(e),
                Field::F(profile.eps[i]),
                Field::F(profile.l[i]),
                Field::F(profile.stderr[i]),
            ]);
        }
    }
    write_csv(&out.join("profile.csv"), &["E", "eps", "L", "stderr"], &rows)?;
    Ok(())
}

pub fn run_classify(config: &RunConfig, out: &Path) -> Result<(), CmdError> {
    let r = resolve(config)?;
    let energies = resolve_energies(config, &r)?;
    let grid = eps_grid(config);
    let cfg = ProfileConfig {
        n: config.n,
        phases: config.phases,
        slope_tol: config.slope_tol,
        max_slope: config.max_slope,
        seed: config.seed,
    };
    let outcome = classify_type1(&r.v, &r.alpha, &energies, &grid, &cfg)?;
    let mut rows = Vec::new();
    for rec in &outcome.records {
        rows.push(vec![
            Field::F(rec.energy),
            Field::S(rec.omega.map_or("".into(), |k| k.to_string())),
            Field::S(rec.omega_bar.map_or("".into(), |k| k.to_string())),
            Field::S(rec.is_type1.map_or("undecided".into(), |b| b.to_string())),
            Field::B(!rec.decided),
        ]);
    }
    write_csv(
        &out.join("classify.csv"),
        &["E", "omega", "omega_bar", "is_type1", "quantization_flag"],
        &rows,
    )?;
    Ok(())
}

pub fn run_dual(config: &RunConfig, out: &Path) -> Result<(), CmdError> {
    let r = resolve(config)?;
    let d = r.v.degree();
    if d == 0 {
        return Err(CmdError::Config(
            "potential: the dual spectrum needs a non-constant potential".into(),
        ));
    }
    let energies = resolve_energies(config, &r)?;
    let mut rows = Vec::new();
    for &e in &energies {
        let rec = dual_lyapunov(&r.v, &r.alpha, e, config.n, &r.phases, SIMPLICITY_FLOOR)?;
        let mut row = vec![Field::F(e)];
        for &g in &rec.gammas {
            row.push(Field::F(g));
        }
        row.push(Field::S(
            rec.gap12.map_or("".into(), |g| format!("{g:.16e}")),
        ));
        row.push(Field::S(
            rec.simple.map_or("undecided".into(), |b| b.to_string()),
        ));
        rows.push(row);
    }
    let mut header: Vec<String> = vec!["E".into()];
    for i in 1..=d {
        header.push(format!("gamma_{i}"));
    }
    header.push("gap12".into());
    header.push("simple".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    write_csv(&out.join("dual.csv"), &header_refs, &rows)?;
    Ok(())
}

pub fn run_spectrum(config: &RunConfig, out: &Path) -> Result<(), CmdError> {
    let r = resolve(config)?;
    let op = OperatorKind::Schrodinger(r.v.clone());
    let approx = truncated_spectrum(&op, &r.alpha, config.trunc_size, &r.phases)?;
    let labeled = detect_and_label_gaps(
        &approx,
        &r.alpha,
        config.k_max,
        config.min_gap,
        config.label_tol,
    );
    let point_rows: Vec<Vec<Field>> = labeled
        .points
        .iter()
        .enumerate()
        .map(|(i, &e)| vec![Field::U(i as u64), Field::F(e)])
        .collect();
    write_csv(&out.join("points.csv"), &["index", "E"], &point_rows)?;
    let gap_rows: Vec<Vec<Field>> = labeled
        .gaps
        .iter()
        .map(|g| {
            vec![
                Field::F(g.left),
                Field::F(g.right),
                Field::F(g.ids),
                Field::S(g.label.map_or("".into(), |k| k.to_string())),
                Field::F(g.residual),
            ]
        })
        .collect();
    write_csv(
        &out.join("gaps.csv"),
        &["left", "right", "ids", "label", "residual"],
        &gap_rows,
    )?;
    Ok(())
}

pub fn run_kotani(config: &RunConfig, out: &Path) -> Result<(), CmdError> {
    let r = resolve(config)?;
    let energies = resolve_energies(config, &r)?;
    let w = TrigPolynomial::cosine(1.0);
    let theta = r.phases[0];
    match config.kotani_task {
        KotaniTask::Mfunctions => {
            if r.v.degree() == 0 {
                return Err(CmdError::Config(
                    "potential: m-function states need a non-constant potential".into(),
                ));
            }
            let mut rows = Vec::new();
            for &e in &energies {
                let z = C64::new(e, config.im_z);
                let state = riccati_m(&r.v, &w, &r.alpha, z, theta, config.n_tail)?;
                let d = state.d;
                rows.push(vec![
                    Field::F(e),
                    Field::F(config.im_z),
                    Field::F(state.m_plus[(d - 1, d - 1)].re),
                    Field::F(state.m_plus[(d - 1, d - 1)].im),
                    Field::F(state.m_minus[(d - 1, d - 1)].re),
                    Field::F(state.m_minus[(d - 1, d - 1)].im),
                    Field::F(state.green[(d - 1, d - 1)].re),
                    Field::F(state.green[(d - 1, d - 1)].im),
                    Field::F(state.riccati_residual_plus),
                    Field::F(state.riccati_residual_minus),
                ]);
            }
            write_csv(
                &out.join("kotani.csv"),
                &[
                    "E",
                    "im_z",
                    "m_plus_re",
                    "m_plus_im",
                    "m_minus_re",
                    "m_minus_im",
                    "green_re",
                    "green_im",
                    "riccati_residual_plus",
                    "riccati_residual_minus",
                ],
                &rows,
            )?;
        }
        KotaniTask::JohnsonMoser => {
            if r.v.degree() == 0 {
                return Err(CmdError::Config(
                    "potential: the derivative identity needs a non-constant potential".into(),
                ));
            }
            let mut rows = Vec::new();
            for &e in &energies {
                let z = C64::new(e, config.im_z);
                let report = johnson_moser_residual(
                    &r.v,
                    &w,
                    &r.alpha,
                    z,
                    config.d_eps.min(config.im_z / 10.0),
                    config.n,
                    &r.phases,
                    config.n_tail,
                )?;
                rows.push(vec![
                    Field::F(e),
                    Field::F(config.im_z),
                    Field::F(report.lhs),
                    Field::F(report.rhs_signed),
                    Field::F(report.residual),
                ]);
            }
            write_csv(
                &out.join("kotani.csv"),
                &["E", "im_z", "dL_dimz", "green_mean_im", "residual"],
                &rows,
            )?;
        }
        KotaniTask::Reflectionless => {
            let rows_data = reflectionless_residual(
                &r.v,
                &r.alpha,
                &energies,
                &config.deltas,
                theta,
                config.n_tail.max(10_000),
            )?;
            let rows: Vec<Vec<Field>> = rows_data
                .iter()
                .map(|row| {
                    vec![
                        Field::F(row.energy),
                        Field::F(row.delta),
                        Field::F(row.residual),
                    ]
                })
                .collect();
            write_csv(&out.join("kotani.csv"), &["E", "delta", "residual"], &rows)?;
        }
    }
    Ok(())
}

pub fn run_cohomology(config: &RunConfig, out: &Path) -> Result<(), CmdError> {
    let r = resolve(config)?;
    let psi: AnalyticObservable = config.observable.build().map_err(CmdError::Config)?;
    let cf = cf_expand(&r.alpha, config.cf_terms)?;
    let usable = (cf.trustworthy_terms() + 1).min(cf.len());
    let indices: Vec<usize> = match config.k_index {
        Some(k) => vec![k],
        None => (1..usable.saturating_sub(1)).collect(),
    };
    let mut rows = Vec::new();
    for k in indices {
        let (_, report) = solve_truncated(&psi, &r.alpha, &cf, k)?;
        rows.push(vec![
            Field::U(k as u64),
            Field::F(report.q_lo),
            Field::F(report.q_hi),
            Field::U(report.modes_kept),
            Field::F(report.g_norm_l1),
            Field::F(report.g_norm_grid),
            Field::F(report.g_bound),
            Field::B(report.g_ok),
            Field::F(report.residual_norm),
            Field::F(report.residual_bound_ln),
            Field::B(report.residual_ok),
            Field::B(report.naaa1_regime),
        ]);
    }
    write_csv(
        &out.join("cohomology.csv"),
        &[
            "k_index",
            "q_lo",
            "q_hi",
            "modes_kept",
            "g_norm_l1",
            "g_norm_grid",
            "g_bound",
            "g_ok",
            "residual_norm",
            "residual_bound_ln",
            "residual_ok",
            "naaa1_regime",
        ],
        &rows,
    )?;
    Ok(())
}
