//! H-functions of (possibly sign-indefinite) fields, the H-theorem residual,
//! and the split of a field into positive and negative regions.

use std::collections::VecDeque;

use crate::conservation::{LawId, ResidualReport};
use crate::dynamics::DissipationField;
use crate::error::{ChainError, Result};
use crate::field::{broadcast, zero_mask, DistributionField};
use crate::grid::Grid;
use crate::index::KinematicIndexSet;

/// Totals |f⁰| below this make H undefined.
pub const F0_THRESHOLD: f64 = 1e-12;

/// ⟨Q^p⟩₀ of one dissipation source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSource {
    pub source_order: u8,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HReport {
    pub index_set: KinematicIndexSet,
    /// ⟨ln|f|⟩₀
    pub h: f64,
    pub f0: f64,
    /// Quadrature of f over its negative cells (≤ 0).
    pub f0_minus: f64,
    pub mean_q: Vec<MeanSource>,
    pub time: f64,
}

fn weighted_sums(f: &DistributionField) -> (f64, f64, f64) {
    let w = f.grid.cell_weights();
    let valid = zero_mask(&f.values);
    let (mut total, mut flnf, mut neg) = (0.0, 0.0, 0.0);
    for ((v, w), ok) in f.values.iter().zip(&w).zip(&valid) {
        total += w * v;
        if *ok {
            flnf += w * v * v.abs().ln();
            if *v < 0.0 {
                neg += w * v;
            }
        }
    }
    (total, flnf, neg)
}

/// ⟨Q⟩₀ = (1/f⁰)∫ f Q, with Q lifted onto the field grid.
fn mean_source(f: &DistributionField, q: &DissipationField, f0: f64) -> Result<f64> {
    let qv = broadcast(&q.field.grid, &q.field.values, &f.grid)?;
    let ok = crate::field::broadcast_mask(&q.field.grid, &q.field.valid, &f.grid)?;
    let w = f.grid.cell_weights();
    let s: f64 = (0..f.values.len())
        .filter(|&i| ok[i])
        .map(|i| w[i] * f.values[i] * qv[i])
        .sum();
    Ok(s / f0)
}

/// H = (1/f⁰)∫ f ln|f| (zero cells contribute nothing) and f⁰₋.
pub fn h_function(f: &DistributionField) -> Result<HReport> {
    h_report(f, &[])
}

/// [`h_function`] plus the mean dissipation sources.
pub fn h_report(f: &DistributionField, sources: &[DissipationField]) -> Result<HReport> {
    let (f0, flnf, neg) = weighted_sums(f);
    if !(f0.abs() >= F0_THRESHOLD) {
        return Err(ChainError::UndefinedH(f0));
    }
    let mean_q = sources
        .iter()
        .map(|q| {
            Ok(MeanSource {
                source_order: q.source_order,
                value: mean_source(f, q, f0)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HReport {
        index_set: f.index_set(),
        h: flnf / f0,
        f0,
        f0_minus: neg,
        mean_q,
        time: f.time,
    })
}

/// Whether sign-indefinite fields are accepted by [`h_theorem_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HMode {
    /// Positive fields only.
    Positive,
    /// Quasi-probability fields: ln|f| on both signs, with f⁰₋ tracked.
    QuasiProbability,
}

/// Residual of `d(f⁰H)/dt = −f⁰ Σ⟨Q^p⟩₀` from a field pair at `t ± dt/2`
/// and the sources at the midpoint. The report lives on a single point.
pub fn h_theorem_residual(
    before: &DistributionField,
    after: &DistributionField,
    sources: &[DissipationField],
    mode: HMode,
) -> Result<ResidualReport> {
    before.grid.ensure_same(&after.grid, "field pair")?;
    let dt = after.time - before.time;
    if !(dt > 0.0) {
        return Err(ChainError::Domain(format!("field pair must be ordered in time, dt = {dt}")));
    }
    // negatives under the zero-mask threshold are round-off, not sign changes
    let signed = |f: &DistributionField| {
        f.values.iter().zip(zero_mask(&f.values)).any(|(v, ok)| ok && *v < 0.0)
    };
    if mode == HMode::Positive && (signed(before) || signed(after)) {
        return Err(ChainError::Refused(
            "field takes negative values; use the quasi-probability mode".into(),
        ));
    }
    let (_, s0, neg0) = weighted_sums(before);
    let (_, s1, neg1) = weighted_sums(after);
    let mid = DistributionField::midpoint(before, after)?;
    let mid_report = h_report(&mid, sources)?;
    let lhs = (s1 - s0) / dt;
    let rhs = -mid_report.f0 * mid_report.mean_q.iter().map(|q| q.value).sum::<f64>();
    let mut report = ResidualReport::build(
        LawId::HTheorem,
        Grid::point(1),
        vec![vec![lhs]],
        vec![vec![rhs]],
        vec![true],
        &[mid_report.f0],
        mid.time,
    )?;
    if mode == HMode::QuasiProbability && neg0 != neg1 {
        report
            .warnings
            .push(format!("f0_minus changed by {:.3e} across the step", neg1 - neg0));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Positive,
    Negative,
    /// Zero cells and cells with a face neighbor of the opposite sign.
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionDecomposition {
    pub classes: Vec<CellClass>,
    /// Face-connected components of the strictly negative cells.
    pub negative_component_count: usize,
    /// f⁰₋ carried by each component, in order of first cell.
    pub component_f0_minus: Vec<f64>,
}

impl RegionDecomposition {
    pub fn mask(&self, class: CellClass) -> Vec<bool> {
        self.classes.iter().map(|c| *c == class).collect()
    }

    pub fn is_negative_empty(&self) -> bool {
        self.negative_component_count == 0
    }
}

fn face_neighbors(shape: &[usize], i: usize, mut visit: impl FnMut(usize)) {
    let mut stride = 1;
    for k in (0..shape.len()).rev() {
        let pos = (i / stride) % shape[k];
        if pos > 0 {
            visit(i - stride);
        }
        if pos + 1 < shape[k] {
            visit(i + stride);
        }
        stride *= shape[k];
    }
}

/// Sign classification with the zero mask, and face-connected components of
/// the negative cells.
pub fn negative_region(f: &DistributionField) -> RegionDecomposition {
    let shape = f.grid.shape();
    let valid = zero_mask(&f.values);
    let sign: Vec<i8> = f
        .values
        .iter()
        .zip(&valid)
        .map(|(v, ok)| if !ok { 0 } else if *v > 0.0 { 1 } else { -1 })
        .collect();
    let classes: Vec<CellClass> = (0..sign.len())
        .map(|i| {
            if sign[i] == 0 {
                return CellClass::Boundary;
            }
            let mut flip = false;
            face_neighbors(&shape, i, |j| flip |= sign[j] == -sign[i]);
            match (flip, sign[i]) {
                (true, _) => CellClass::Boundary,
                (false, 1) => CellClass::Positive,
                _ => CellClass::Negative,
            }
        })
        .collect();

    let w = f.grid.cell_weights();
    let mut label = vec![usize::MAX; sign.len()];
    let mut component_f0_minus = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..sign.len() {
        if sign[start] != -1 || label[start] != usize::MAX {
            continue;
        }
        let id = component_f0_minus.len();
        let mut mass = 0.0;
        label[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            mass += w[i] * f.values[i];
            face_neighbors(&shape, i, |j| {
                if sign[j] == -1 && label[j] == usize::MAX {
                    label[j] = id;
                    queue.push_back(j);
                }
            });
        }
        component_f0_minus.push(mass);
    }
    RegionDecomposition {
        classes,
        negative_component_count: component_f0_minus.len(),
        component_f0_minus,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct F0MinusDrift {
    pub times: Vec<f64>,
    pub f0_minus: Vec<f64>,
    /// max |f⁰₋(t) − f⁰₋(t₀)|
    pub max_drift: f64,
}

impl F0MinusDrift {
    pub fn flagged(&self, tol: f64) -> bool {
        self.max_drift > tol
    }
}

/// f⁰₋ along a series of fields and its largest departure from the first.
pub fn track_f0_minus<'a>(series: impl IntoIterator<Item = &'a DistributionField>) -> F0MinusDrift {
    let (times, f0_minus): (Vec<f64>, Vec<f64>) = series
        .into_iter()
        .map(|f| (f.time, weighted_sums(f).2))
        .unzip();
    let first = f0_minus.first().copied().unwrap_or(0.0);
    let max_drift = f0_minus.iter().fold(0.0_f64, |m, v| m.max((v - first).abs()));
    F0MinusDrift {
        times,
        f0_minus,
        max_drift,
    }
}
