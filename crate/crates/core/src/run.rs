//! Scenario orchestration: builds the state and closure from a
//! [`RunConfig`], evolves, evaluates checks, and writes artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analytic::{gaussian, oscillator_grid, quantum_pressure_check, wigner_oscillator, DEFAULT_BOX_WIDTHS};
use crate::closure::{Closure, PhysicalParams};
use crate::config::{ClosureKindSpec, RunConfig, Scenario, StateKind};
use crate::conservation::{
    divergence_identity_check, energy_residual_first, momentum_residual_first, ResidualReport,
};
use crate::dynamics::{dissipation_source, step_rank2_first_group, DissipationField};
use crate::entropy::{h_report, h_theorem_residual, HMode};
use crate::error::{domain, ChainError, Result};
use crate::field::{marginalize, DistributionField};
use crate::grid::make_grid;
use crate::io::{write_grid_dump, CsvWriter, IoError};
use crate::moments::central_moment2;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl RunError {
    /// 2 for configuration errors, 3 for numerical refusals and guards,
    /// 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Chain(ChainError::Config(_)) => 2,
            RunError::Chain(_) => 3,
            RunError::Io(IoError::Chain(ChainError::Config(_))) => 2,
            RunError::Io(_) => 1,
        }
    }
}

/// Files written by a run, plus the f⁰₋ drift seen along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub steps: usize,
    pub f0_minus_drift: f64,
    pub flagged: Vec<String>,
}

struct Setup {
    params: PhysicalParams,
    closure: Closure,
    initial: DistributionField,
}

fn setup(cfg: &RunConfig) -> Result<Setup> {
    let params = cfg.params.build()?;
    let grid = match (&cfg.grid.axes, cfg.grid.points) {
        (Some(axes), _) => make_grid(axes)?,
        (None, Some(points)) => oscillator_grid(&params, points, cfg.grid.widths.unwrap_or(DEFAULT_BOX_WIDTHS))?,
        (None, None) => return crate::error::config("grid needs axes or points"),
    };
    if grid.index_set() != crate::kset![1, 2] {
        return domain(format!("runs evolve fields over {{1,2}}, grid is over {}", grid.index_set()));
    }
    let initial = match cfg.state.kind {
        StateKind::Wigner => wigner_oscillator(cfg.state.n, &params, grid, 0.0)?,
        StateKind::Gaussian => gaussian(
            grid,
            cfg.state.center.as_deref().unwrap_or_default(),
            cfg.state.sigma.as_deref().unwrap_or_default(),
            0.0,
        )?,
    };
    let closure = match cfg.closure.kind {
        ClosureKindSpec::Moyal => Closure::moyal(params.clone(), cfg.closure.k_max)?,
        ClosureKindSpec::Zero => Closure::zero(3, crate::kset![1, 2]),
    };
    Ok(Setup {
        params,
        closure,
        initial,
    })
}

fn source(closure: &Closure, f: &DistributionField) -> Result<DissipationField> {
    dissipation_source(&closure.evaluate(f)?, 2)
}

fn evaluate_check(
    id: &str,
    s: &Setup,
    before: &DistributionField,
    after: &DistributionField,
) -> Result<ResidualReport> {
    let mid = DistributionField::midpoint(before, after)?;
    match id {
        "momentum-first" => momentum_residual_first(before, after, &s.closure.evaluate(&mid)?),
        "energy-first" => energy_residual_first(before, after, &s.closure.evaluate(&mid)?),
        "divergence-identity-0" => divergence_identity_check(0, before, after, &s.closure.evaluate(&mid)?),
        "h-theorem" => {
            let signed = before.values.iter().chain(&after.values).any(|v| *v < 0.0);
            let mode = if signed { HMode::QuasiProbability } else { HMode::Positive };
            h_theorem_residual(before, after, &[source(&s.closure, &mid)?], mode)
        }
        "quantum-pressure" => {
            let f1 = marginalize(after, &crate::kset![2])?;
            let pq = central_moment2(after, 2, 2, &crate::kset![2])?;
            quantum_pressure_check(&f1, &pq, &s.params)
        }
        other => crate::error::config(format!("unknown equation id \"{other}\"")),
    }
}

fn create_dir(dir: &Path) -> std::result::Result<(), IoError> {
    fs::create_dir_all(dir).map_err(|source| IoError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn snapshot(dir: &Path, step: usize, f: &DistributionField, files: &mut Vec<PathBuf>) -> std::result::Result<(), IoError> {
    let path = dir.join(format!("snapshot_{step:06}.dump"));
    write_grid_dump(f, &path)?;
    files.push(path);
    Ok(())
}

/// Runs the configured scenario and writes its artifacts under `cfg.output`.
pub fn run(cfg: &RunConfig) -> std::result::Result<Artifacts, RunError> {
    cfg.validate()?;
    let s = setup(cfg)?;
    let dir = cfg.output.clone();
    create_dir(&dir)?;
    let mut files = Vec::new();

    let config_path = dir.join("config.json");
    let text = serde_json::to_string_pretty(cfg).expect("config serializes");
    fs::write(&config_path, text + "\n").map_err(|source| IoError::Io {
        path: config_path.clone(),
        source,
    })?;
    files.push(config_path);

    let base_cols = ["t", "f0", "H", "f0_minus"].map(String::from).to_vec();
    if cfg.scenario == Scenario::State {
        let path = dir.join("state.dump");
        write_grid_dump(&s.initial, &path)?;
        files.push(path);
        let path = dir.join("summary.csv");
        let mut cols = base_cols;
        cols.push("mean_Q2".into());
        let mut csv = CsvWriter::create(&path, &cols)?;
        let h = h_report(&s.initial, &[source(&s.closure, &s.initial)?])?;
        csv.row(None, &[h.time, h.f0, h.h, h.f0_minus, h.mean_q[0].value])?;
        files.push(path);
        return Ok(Artifacts {
            files,
            steps: 0,
            f0_minus_drift: 0.0,
            flagged: Vec::new(),
        });
    }

    let dt = cfg.dt.expect("validated");
    let steps = cfg.step_count()?;
    let stride = cfg.snapshot_stride;

    let series_path = dir.join("series.csv");
    let mut series_cols = base_cols;
    if cfg.scenario == Scenario::Report {
        series_cols.extend(cfg.checks.iter().map(|c| format!("{c}_l2")));
    }
    series_cols.push("mean_Q2".into());
    let mut series = CsvWriter::create(&series_path, &series_cols)?;
    files.push(series_path);

    let mut residuals = if cfg.scenario == Scenario::Check {
        let path = dir.join("residuals.csv");
        let cols = ["equation", "t", "l2", "max", "masked_fraction", "flagged"].map(String::from);
        let w = CsvWriter::create(&path, &cols)?;
        files.push(path);
        Some(w)
    } else {
        None
    };

    let mut flagged = Vec::new();
    let mut f = s.initial.clone();
    let f0_minus_start = h_report(&f, &[])?.f0_minus;
    let mut drift: f64 = 0.0;
    let mut emit = |step: usize,
                    prev: Option<&DistributionField>,
                    f: &DistributionField,
                    files: &mut Vec<PathBuf>|
     -> std::result::Result<(), RunError> {
        let h = h_report(f, &[source(&s.closure, f)?])?;
        drift = drift.max((h.f0_minus - f0_minus_start).abs());
        let mut row = vec![h.time, h.f0, h.h, h.f0_minus];
        let reports = match prev {
            Some(p) => cfg
                .checks
                .iter()
                .map(|c| evaluate_check(c, &s, p, f).map(|r| (c, r)))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        if cfg.scenario == Scenario::Report {
            if reports.is_empty() {
                row.extend(cfg.checks.iter().map(|_| f64::NAN));
            } else {
                row.extend(reports.iter().map(|(_, r)| r.residual_norm));
            }
        }
        row.push(h.mean_q[0].value);
        series.row(None, &row)?;
        if let Some(w) = residuals.as_mut() {
            for (c, r) in &reports {
                let bad = r.max_norm > cfg.tolerances.residual;
                if bad {
                    flagged.push(format!("{c} at t = {}", r.time));
                }
                w.row(
                    Some(c),
                    &[r.time, r.residual_norm, r.max_norm, r.masked_fraction(), if bad { 1.0 } else { 0.0 }],
                )?;
            }
        }
        if cfg.scenario == Scenario::Evolve {
            snapshot(&dir, step, f, files)?;
        }
        Ok(())
    };

    emit(0, None, &f, &mut files)?;
    for k in 1..=steps {
        let next = step_rank2_first_group(&f, &s.closure, dt)?;
        if k % stride == 0 || k == steps {
            emit(k, Some(&f), &next, &mut files)?;
        }
        f = next;
    }
    if drift > cfg.tolerances.f0_minus_drift {
        flagged.push(format!("f0_minus drift {drift:.3e}"));
    }
    Ok(Artifacts {
        files,
        steps,
        f0_minus_drift: drift,
        flagged,
    })
}
