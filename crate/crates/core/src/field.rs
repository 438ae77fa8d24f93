//! Distribution fields, mean kinematical values, marginalization and
//! nested averaging.

use crate::error::{domain, Result};
use crate::grid::Grid;
use crate::index::KinematicIndexSet;
use crate::nd;

/// Cells whose conditioning density falls below this fraction of its
/// maximum magnitude are masked.
pub const ZERO_MASK_RELATIVE: f64 = 1e-14;

/// A marginal smaller than this fraction of the integral of |f| at the same
/// base point is cancellation noise (e.g. a node where a signed field
/// integrates to zero) and is masked as well.
pub const CANCELLATION_RELATIVE: f64 = 1e-8;

/// Validity mask `|v| ≥ 1e-14·max|v|`. An all-zero array is fully masked.
pub fn zero_mask(values: &[f64]) -> Vec<bool> {
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return vec![false; values.len()];
    }
    let thr = ZERO_MASK_RELATIVE * max;
    values.iter().map(|v| v.abs() >= thr).collect()
}

/// Sampled f over a grid. Values may be negative (quasi-probabilities).
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DistributionField {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return domain(format!(
                "tensor extent {} does not match grid size {}",
                values.len(),
                grid.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("non-finite value at flat index {i}"));
        }
        Ok(Self { grid, values, time })
    }

    /// Samples `f(coords)` at every node; `coords` follows the flattened dims.
    pub fn from_fn(grid: Grid, time: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = sample(&grid, f);
        Self::new(grid, values, time)
    }

    pub fn index_set(&self) -> KinematicIndexSet {
        self.grid.index_set()
    }

    pub fn rank(&self) -> usize {
        self.grid.rank()
    }

    /// f⁰: integral over the whole grid.
    pub fn total(&self) -> f64 {
        let (_, v) = integrate_out(&self.grid, &self.values, &self.index_set())
            .expect("own index set");
        v[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
            time: self.time,
        }
    }

    /// Time-centered average of two samples of the same field.
    pub fn midpoint(a: &Self, b: &Self) -> Result<Self> {
        a.grid.ensure_same(&b.grid, "midpoint")?;
        Ok(Self {
            grid: a.grid.clone(),
            values: a
                .values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| 0.5 * (x + y))
                .collect(),
            time: 0.5 * (a.time + b.time),
        })
    }

    pub fn validity(&self) -> Vec<bool> {
        zero_mask(&self.values)
    }
}

/// Real scalar field with a validity mask (masked values are stored as 0).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub time: f64,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>, valid: Vec<bool>, time: f64) -> Result<Self> {
        if values.len() != grid.len() || valid.len() != grid.len() {
            return domain("scalar field extent does not match grid");
        }
        Ok(Self {
            grid,
            values,
            valid,
            time,
        })
    }

    /// Fully valid field.
    pub fn from_values(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        let n = values.len();
        Self::new(grid, values, vec![true; n], time)
    }

    pub fn from_fn(grid: Grid, time: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = sample(&grid, f);
        Self::from_values(grid, values, time)
    }

    pub fn from_distribution(f: &DistributionField) -> Self {
        Self {
            grid: f.grid.clone(),
            values: f.values.clone(),
            valid: vec![true; f.values.len()],
            time: f.time,
        }
    }

    pub fn masked_fraction(&self) -> f64 {
        if self.valid.is_empty() {
            return 0.0;
        }
        self.valid.iter().filter(|v| !**v).count() as f64 / self.valid.len() as f64
    }
}

/// ⟨ξ^ℓ⟩ over a base grid: one array per vector component.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    pub order: u8,
    pub grid: Grid,
    pub values: Vec<Vec<f64>>,
    pub valid: Vec<bool>,
    pub time: f64,
}

impl MeanField {
    pub fn new(
        order: u8,
        grid: Grid,
        values: Vec<Vec<f64>>,
        valid: Vec<bool>,
        time: f64,
    ) -> Result<Self> {
        if grid.index_set().contains(order) {
            return domain(format!(
                "mean of order {order} cannot live on a grid over {}",
                grid.index_set()
            ));
        }
        if values.is_empty() || values.iter().any(|c| c.len() != grid.len()) || valid.len() != grid.len() {
            return domain("mean field extent does not match grid");
        }
        Ok(Self {
            order,
            grid,
            values,
            valid,
            time,
        })
    }

    /// Fully valid mean field sampled from `f(coords) -> components`.
    pub fn from_fn(
        order: u8,
        grid: Grid,
        time: f64,
        f: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let d = grid.components();
        let mut values = vec![Vec::with_capacity(grid.len()); d];
        for_each_node(&grid, |_, x| {
            let v = f(x);
            for (c, comp) in values.iter_mut().enumerate() {
                comp.push(v[c]);
            }
        });
        let n = grid.len();
        Self::new(order, grid, values, vec![true; n], time)
    }

    pub fn constant(order: u8, grid: Grid, value: f64, time: f64) -> Result<Self> {
        let d = grid.components();
        Self::from_fn(order, grid, time, |_| vec![value; d])
    }

    pub fn zero(order: u8, grid: Grid, time: f64) -> Result<Self> {
        Self::constant(order, grid, 0.0, time)
    }

    pub fn base_set(&self) -> KinematicIndexSet {
        self.grid.index_set()
    }

    pub fn components(&self) -> usize {
        self.values.len()
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values[c].clone(),
            valid: self.valid.clone(),
            time: self.time,
        }
    }

    /// Pointwise average of two samples in time.
    pub fn midpoint(a: &Self, b: &Self) -> Result<Self> {
        a.grid.ensure_same(&b.grid, "mean midpoint")?;
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| 0.5 * (p + q)).collect())
            .collect();
        let valid = a.valid.iter().zip(&b.valid).map(|(p, q)| *p && *q).collect();
        Self::new(a.order, a.grid.clone(), values, valid, 0.5 * (a.time + b.time))
    }
}

/// Calls `f(flat_index, coords)` for every node in row-major order.
pub fn for_each_node(grid: &Grid, mut f: impl FnMut(usize, &[f64])) {
    let dims = grid.dims();
    let nodes: Vec<Vec<f64>> = dims.iter().map(|d| d.axis.nodes()).collect();
    let shape = grid.shape();
    let mut counter = vec![0usize; shape.len()];
    let mut x: Vec<f64> = nodes.iter().map(|n| n[0]).collect();
    for i in 0..grid.len() {
        f(i, &x);
        for k in (0..shape.len()).rev() {
            counter[k] += 1;
            if counter[k] < shape[k] {
                x[k] = nodes[k][counter[k]];
                break;
            }
            counter[k] = 0;
            x[k] = nodes[k][0];
        }
    }
}

pub(crate) fn sample(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(grid.len());
    for_each_node(grid, |_, x| v.push(f(x)));
    v
}

/// Trapezoid integration of a full-grid array over every axis of the orders
/// in `drop`. Returns the reduced grid and values.
pub(crate) fn integrate_out(
    grid: &Grid,
    values: &[f64],
    drop: &KinematicIndexSet,
) -> Result<(Grid, Vec<f64>)> {
    let set = grid.index_set();
    if !drop.is_subset(&set) {
        return domain(format!("drop set {drop} is not a subset of {set}"));
    }
    let dims = grid.dims();
    let mut shape = grid.shape();
    let mut out = values.to_vec();
    for k in (0..dims.len()).rev() {
        if drop.contains(dims[k].order) {
            out = nd::integrate_dim(&out, &shape, k, &dims[k].axis.weights());
            shape.remove(k);
        }
    }
    Ok((grid.restrict(&set.difference(drop))?, out))
}

/// Marginal of `values` over `drop` with its validity: the zero mask, plus
/// the cancellation test against the marginal of |values|.
pub(crate) fn masked_marginal(
    grid: &Grid,
    values: &[f64],
    drop: &KinematicIndexSet,
) -> Result<(Grid, Vec<f64>, Vec<bool>)> {
    let (base, den) = integrate_out(grid, values, drop)?;
    let mut valid = zero_mask(&den);
    if values.iter().any(|v| *v < 0.0) {
        let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        let (_, mass) = integrate_out(grid, &abs, drop)?;
        for ((ok, d), m) in valid.iter_mut().zip(&den).zip(&mass) {
            *ok &= d.abs() >= CANCELLATION_RELATIVE * m;
        }
    }
    Ok((base, den, valid))
}

/// Spreads a base-grid array onto `grid` (constant along the extra orders).
pub(crate) fn broadcast(base: &Grid, values: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    let map = grid.projection_onto(base)?;
    Ok(map.iter().map(|&j| values[j]).collect())
}

pub(crate) fn broadcast_mask(base: &Grid, valid: &[bool], grid: &Grid) -> Result<Vec<bool>> {
    let map = grid.projection_onto(base)?;
    Ok(map.iter().map(|&j| valid[j]).collect())
}

/// f^{n\k}: trapezoid marginal over the dropped orders.
pub fn marginalize(f: &DistributionField, drop: &KinematicIndexSet) -> Result<DistributionField> {
    if !drop.is_subset(&f.index_set()) {
        return domain(format!(
            "cannot drop {drop}: not a subset of {}",
            f.index_set()
        ));
    }
    if drop.is_empty() {
        return Ok(f.clone());
    }
    let (grid, values) = integrate_out(&f.grid, &f.values, drop)?;
    DistributionField::new(grid, values, f.time)
}

/// ⟨ξ^ℓ⟩ conditioned on `f.index_set \ ({ℓ} ∪ drop)`.
pub fn mean_kinematic(f: &DistributionField, ell: u8, drop: &KinematicIndexSet) -> Result<MeanField> {
    let set = f.index_set();
    if !set.contains(ell) {
        return domain(format!("order {ell} is not in {set}"));
    }
    if drop.contains(ell) || !drop.is_subset(&set) {
        return domain(format!("drop set {drop} must be a subset of {set} without {ell}"));
    }
    let all = drop.with(ell)?;
    let (base, den, valid) = masked_marginal(&f.grid, &f.values, &all)?;
    let d = f.grid.components();
    let mut values = Vec::with_capacity(d);
    for c in 0..d {
        let coord = f.grid.coordinate_of(ell, c)?;
        let weighted: Vec<f64> = f.values.iter().zip(&coord).map(|(v, x)| v * x).collect();
        let (_, num) = integrate_out(&f.grid, &weighted, &all)?;
        values.push(divide_masked(&num, &den, &valid));
    }
    MeanField::new(ell, base, values, valid, f.time)
}

pub(crate) fn divide_masked(num: &[f64], den: &[f64], valid: &[bool]) -> Vec<f64> {
    num.iter()
        .zip(den)
        .zip(valid)
        .map(|((n, d), ok)| if *ok { n / d } else { 0.0 })
        .collect()
}

/// Averages a mean field over the dropped orders with weight `f_weight`
/// (a density on the mean field's base grid), renormalized by the
/// smaller marginal.
pub fn nested_average(
    mf: &MeanField,
    f_weight: &DistributionField,
    drop: &KinematicIndexSet,
) -> Result<MeanField> {
    mf.grid.ensure_same(&f_weight.grid, "nested average")?;
    if !drop.is_subset(&mf.base_set()) {
        return domain(format!(
            "drop set {drop} is not a subset of base {}",
            mf.base_set()
        ));
    }
    if drop.is_empty() {
        return Ok(mf.clone());
    }
    let (base, den, valid) = masked_marginal(&f_weight.grid, &f_weight.values, drop)?;
    let values = mf
        .values
        .iter()
        .map(|comp| {
            let w: Vec<f64> = f_weight
                .values
                .iter()
                .zip(comp)
                .zip(&mf.valid)
                .map(|((f, m), ok)| if *ok { f * m } else { 0.0 })
                .collect();
            let (_, num) = integrate_out(&f_weight.grid, &w, drop)?;
            Ok(divide_masked(&num, &den, &valid))
        })
        .collect::<Result<Vec<_>>>()?;
    MeanField::new(mf.order, base, values, valid, mf.time)
}

/// Density-weighted L2 norm `sqrt(Σ w|ρ|r² / Σ w|ρ|)` over valid cells,
/// with `r` given per component (summed in the square).
pub fn weighted_l2_norm(grid: &Grid, residual: &[Vec<f64>], valid: &[bool], density: &[f64]) -> f64 {
    let w = grid.cell_weights();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..w.len() {
        if !valid[i] {
            continue;
        }
        let wi = w[i] * density[i].abs();
        num += wi * residual.iter().map(|r| r[i] * r[i]).sum::<f64>();
        den += wi;
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}

/// Largest magnitude over valid cells.
pub fn max_norm(residual: &[Vec<f64>], valid: &[bool]) -> f64 {
    residual
        .iter()
        .flat_map(|r| r.iter().zip(valid).filter(|(_, ok)| **ok).map(|(v, _)| v.abs()))
        .fold(0.0, f64::max)
}
