//! Dissipation sources, entropy fields, π material derivatives and
//! time stepping of rank 1–3 chain equations.

use crate::closure::Closure;
use crate::error::{config, domain, Result};
use crate::field::{
    broadcast, broadcast_mask, max_norm, weighted_l2_norm, zero_mask, DistributionField, MeanField,
    ScalarField,
};
use crate::grid::Grid;
use crate::index::KinematicIndexSet;
use crate::nd;
use crate::transport::sweep;

/// Advection velocity attached to one axis of a π operator or a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Advection {
    Zero,
    /// The raw coordinate of another gridded order (first-group axes).
    Coordinate(u8),
    /// A mean field on the grid or on a sub-grid of it.
    Mean(MeanField),
}

impl Advection {
    /// Velocity component `c` on every node of `grid`, plus its validity.
    pub fn velocity(&self, grid: &Grid, c: usize) -> Result<(Vec<f64>, Vec<bool>)> {
        let n = grid.len();
        match self {
            Advection::Zero => Ok((vec![0.0; n], vec![true; n])),
            Advection::Coordinate(o) => Ok((grid.coordinate_of(*o, c)?, vec![true; n])),
            Advection::Mean(mf) => {
                if c >= mf.components() {
                    return domain(format!("mean field has no component {c}"));
                }
                Ok((
                    broadcast(&mf.grid, &mf.values[c], grid)?,
                    broadcast_mask(&mf.grid, &mf.valid, grid)?,
                ))
            }
        }
    }
}

/// Q^p: divergence of a mean field with respect to the coordinates of order `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationField {
    pub source_order: u8,
    pub field: ScalarField,
}

impl DissipationField {
    pub fn base_set(&self) -> KinematicIndexSet {
        self.field.grid.index_set()
    }
}

/// `Q = Σ_c ∂mf_c/∂ξ^p_c` by second-order differences.
pub fn dissipation_source(mf: &MeanField, p: u8) -> Result<DissipationField> {
    let grid = &mf.grid;
    if !grid.index_set().contains(p) {
        return domain(format!(
            "order {p} is not an argument of the mean field (base {})",
            grid.index_set()
        ));
    }
    let shape = grid.shape();
    let mut q = vec![0.0; grid.len()];
    let mut valid = mf.valid.clone();
    for c in 0..mf.components() {
        let k = grid.dim_index(p, c).expect("checked above");
        let h = grid.dims()[k].axis.spacing();
        let d = nd::derivative_dim(&mf.values[c], &shape, k, h);
        let ok = nd::stencil_valid(&mf.valid, &shape, k, 1);
        for i in 0..q.len() {
            q[i] += d[i];
            valid[i] &= ok[i];
        }
    }
    mask_values(&mut q, &valid);
    Ok(DissipationField {
        source_order: p,
        field: ScalarField::new(grid.clone(), q, valid, mf.time)?,
    })
}

fn mask_values(v: &mut [f64], valid: &[bool]) {
    for (x, ok) in v.iter_mut().zip(valid) {
        if !ok {
            *x = 0.0;
        }
    }
}

/// `S = Ln f` split into `ln|f|` and the sign; the imaginary part `iπ` on
/// negative cells is carried by `sign = −1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyField {
    pub grid: Grid,
    pub log_abs: Vec<f64>,
    pub sign: Vec<i8>,
    pub time: f64,
}

impl EntropyField {
    pub fn base_set(&self) -> KinematicIndexSet {
        self.grid.index_set()
    }

    pub fn valid(&self) -> Vec<bool> {
        self.sign.iter().map(|s| *s != 0).collect()
    }

    pub fn as_scalar(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.log_abs.clone(),
            valid: self.valid(),
            time: self.time,
        }
    }
}

pub fn entropy_field(f: &DistributionField) -> EntropyField {
    let valid = zero_mask(&f.values);
    let (log_abs, sign) = f
        .values
        .iter()
        .zip(&valid)
        .map(|(v, ok)| {
            if !ok {
                (0.0, 0)
            } else if *v > 0.0 {
                (v.ln(), 1)
            } else {
                (v.abs().ln(), -1)
            }
        })
        .unzip();
    EntropyField {
        grid: f.grid.clone(),
        log_abs,
        sign,
        time: f.time,
    }
}

/// `πφ = ∂φ/∂t + Σ_axes u·∇φ`: centered time difference of a pair at
/// `t ± dt/2` plus central-difference transport of their average.
/// `advection` has one entry per axis of the grid, in ascending order.
pub fn apply_pi(before: &ScalarField, after: &ScalarField, dt: f64, advection: &[Advection]) -> Result<ScalarField> {
    before.grid.ensure_same(&after.grid, "π operator")?;
    if !(dt > 0.0) {
        return domain(format!("dt must be positive, got {dt}"));
    }
    let grid = &before.grid;
    if advection.len() != grid.rank() {
        return domain(format!(
            "π operator over {} needs {} advection entries, got {}",
            grid.index_set(),
            grid.rank(),
            advection.len()
        ));
    }
    let shape = grid.shape();
    let mid_valid: Vec<bool> = before.valid.iter().zip(&after.valid).map(|(a, b)| *a && *b).collect();
    let mid: Vec<f64> = before
        .values
        .iter()
        .zip(&after.values)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let mut out: Vec<f64> = before
        .values
        .iter()
        .zip(&after.values)
        .map(|(a, b)| (b - a) / dt)
        .collect();
    let mut valid = mid_valid.clone();
    for (axis, adv) in grid.axes().iter().zip(advection) {
        if *adv == Advection::Zero {
            continue;
        }
        for c in 0..axis.components.len() {
            let k = grid.dim_index(axis.kinematic_index, c).expect("own axis");
            let h = axis.components[c].spacing();
            let (u, uok) = adv.velocity(grid, c)?;
            let d = nd::derivative_dim(&mid, &shape, k, h);
            let ok = nd::stencil_valid(&mid_valid, &shape, k, 1);
            for i in 0..out.len() {
                out[i] += u[i] * d[i];
                valid[i] &= ok[i] && uok[i];
            }
        }
    }
    mask_values(&mut out, &valid);
    ScalarField::new(grid.clone(), out, valid, 0.5 * (before.time + after.time))
}

fn velocity_components(adv: &Advection, grid: &Grid) -> Result<Vec<Vec<f64>>> {
    (0..grid.components())
        .map(|c| adv.velocity(grid, c).map(|(u, _)| u))
        .collect()
}

/// Transports along every component of `order`; for more than one component
/// the sweeps are composed symmetrically.
fn transport_axis(values: Vec<f64>, grid: &Grid, order: u8, velocity: &[Vec<f64>], dt: f64) -> Result<Vec<f64>> {
    let dims = grid.dims_of(order);
    if dims.len() == 1 {
        return sweep(&values, grid, dims[0], &velocity[0], dt);
    }
    let mut v = values;
    for (c, &k) in dims.iter().enumerate() {
        v = sweep(&v, grid, k, &velocity[c], 0.5 * dt)?;
    }
    for (c, &k) in dims.iter().enumerate().rev() {
        v = sweep(&v, grid, k, &velocity[c], 0.5 * dt)?;
    }
    Ok(v)
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        config(format!("dt must be positive, got {dt}"))
    }
}

fn check_mean(mf: &MeanField, f: &DistributionField, order: u8, what: &str) -> Result<()> {
    if mf.order != order {
        return config(format!("{what} must supply order {order}, got {}", mf.order));
    }
    f.grid.ensure_same(&mf.grid, what)
}

/// One step of `∂f/∂t + div(f·⟨ξ^{n+1}⟩_n) = 0` on a rank-1 field.
pub fn step_rank1(f: &DistributionField, mf: &MeanField, dt: f64) -> Result<DistributionField> {
    check_dt(dt)?;
    let set = f.index_set();
    if set.rank() != 1 {
        return domain(format!("step_rank1 needs a rank-1 field, got {set}"));
    }
    let n = set.as_slice()[0];
    check_mean(mf, f, n + 1, "rank-1 mean field")?;
    let u = velocity_components(&Advection::Mean(mf.clone()), &f.grid)?;
    let values = transport_axis(f.values.clone(), &f.grid, n, &u, dt)?;
    DistributionField::new(f.grid.clone(), values, f.time + dt)
}

fn check_closure(closure: &Closure, set: &KinematicIndexSet, order: u8) -> Result<()> {
    if closure.base_set != *set || closure.order != order {
        return config(format!(
            "closure supplies order {} over {}, expected order {order} over {set}",
            closure.order, closure.base_set
        ));
    }
    Ok(())
}

/// Strang step of the first-group rank-2 equation on f^{n,n+1}: half step
/// along ξ^n with velocity ξ^{n+1}, full step along ξ^{n+1} with the closure
/// evaluated on the intermediate state, half step along ξ^n.
pub fn step_rank2_first_group(f: &DistributionField, closure: &Closure, dt: f64) -> Result<DistributionField> {
    check_dt(dt)?;
    let set = f.index_set();
    if set.rank() != 2 || !set.is_contiguous() {
        return domain(format!("first-group rank-2 step needs {{n,n+1}}, got {set}"));
    }
    let (n, n1) = (set.as_slice()[0], set.as_slice()[1]);
    check_closure(closure, &set, n1 + 1)?;
    let g = &f.grid;
    let ux = velocity_components(&Advection::Coordinate(n1), g)?;
    let v = transport_axis(f.values.clone(), g, n, &ux, 0.5 * dt)?;
    let half = DistributionField::new(g.clone(), v, f.time + 0.5 * dt)?;
    let mf = closure.evaluate(&half)?;
    let uv = velocity_components(&Advection::Mean(mf), g)?;
    let v = transport_axis(half.values, g, n1, &uv, dt)?;
    let v = transport_axis(v, g, n, &ux, 0.5 * dt)?;
    DistributionField::new(g.clone(), v, f.time + dt)
}

/// Strang step on a gapped set {n, n+k}; both axes advected by supplied
/// mean fields ⟨ξ^{n+1}⟩ and ⟨ξ^{n+k+1}⟩ over {n, n+k}.
pub fn step_rank2_second_group(
    f: &DistributionField,
    mf_low: &MeanField,
    mf_high: &MeanField,
    dt: f64,
) -> Result<DistributionField> {
    check_dt(dt)?;
    let set = f.index_set();
    if set.rank() != 2 || set.is_contiguous() {
        return domain(format!("second-group rank-2 step needs {{n,n+k}} with k>1, got {set}"));
    }
    let (n, nk) = (set.as_slice()[0], set.as_slice()[1]);
    check_mean(mf_low, f, n + 1, "lower mean field")?;
    check_mean(mf_high, f, nk + 1, "upper mean field")?;
    let g = &f.grid;
    let ul = velocity_components(&Advection::Mean(mf_low.clone()), g)?;
    let uh = velocity_components(&Advection::Mean(mf_high.clone()), g)?;
    let v = transport_axis(f.values.clone(), g, n, &ul, 0.5 * dt)?;
    let v = transport_axis(v, g, nk, &uh, dt)?;
    let v = transport_axis(v, g, n, &ul, 0.5 * dt)?;
    DistributionField::new(g.clone(), v, f.time + dt)
}

/// Three-axis Strang step on f^{n,n+1,n+2}; coordinate advection on the two
/// lower axes, closure ⟨ξ^{n+3}⟩ on the top axis.
pub fn step_rank3_first_group(f: &DistributionField, closure: &Closure, dt: f64) -> Result<DistributionField> {
    check_dt(dt)?;
    let set = f.index_set();
    if set.rank() != 3 || !set.is_contiguous() {
        return domain(format!("first-group rank-3 step needs {{n,n+1,n+2}}, got {set}"));
    }
    let [n, n1, n2] = [set.as_slice()[0], set.as_slice()[1], set.as_slice()[2]];
    check_closure(closure, &set, n2 + 1)?;
    let g = &f.grid;
    let u0 = velocity_components(&Advection::Coordinate(n1), g)?;
    let u1 = velocity_components(&Advection::Coordinate(n2), g)?;
    let v = transport_axis(f.values.clone(), g, n, &u0, 0.5 * dt)?;
    let v = transport_axis(v, g, n1, &u1, 0.5 * dt)?;
    let mid = DistributionField::new(g.clone(), v, f.time + 0.5 * dt)?;
    let mf = closure.evaluate(&mid)?;
    let u2 = velocity_components(&Advection::Mean(mf), g)?;
    let v = transport_axis(mid.values, g, n2, &u2, dt)?;
    let v = transport_axis(v, g, n1, &u1, 0.5 * dt)?;
    let v = transport_axis(v, g, n, &u0, 0.5 * dt)?;
    DistributionField::new(g.clone(), v, f.time + dt)
}

/// Result of [`chain_log_residual`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogResidualReport {
    /// `πS + ΣQ` on valid cells.
    pub residual: ScalarField,
    /// Density-weighted L2 norm of the residual.
    pub l2: f64,
    pub max: f64,
    /// Density-weighted RMS of `ΣQ`, the scale a wrong source shows up at.
    pub source_scale: f64,
    pub masked_fraction: f64,
    pub warnings: Vec<String>,
}

impl LogResidualReport {
    /// True when the residual exceeds `tol` (absolute, density-weighted).
    pub fn flagged(&self, tol: f64) -> bool {
        self.l2 > tol
    }
}

/// Logarithmic form of the chain, `π S + Σ Q = 0`, evaluated on a pair of
/// fields at `t ± dt/2`.
pub fn chain_log_residual(
    before: &DistributionField,
    after: &DistributionField,
    advection: &[Advection],
    dissipation: &[DissipationField],
    dt: f64,
) -> Result<LogResidualReport> {
    before.grid.ensure_same(&after.grid, "log residual")?;
    let s0 = entropy_field(before).as_scalar();
    let s1 = entropy_field(after).as_scalar();
    let mut r = apply_pi(&s0, &s1, dt, advection)?;
    let mut q_total = vec![0.0; r.values.len()];
    for q in dissipation {
        let qv = broadcast(&q.field.grid, &q.field.values, &r.grid)?;
        let qok = broadcast_mask(&q.field.grid, &q.field.valid, &r.grid)?;
        for i in 0..qv.len() {
            q_total[i] += qv[i];
            r.valid[i] &= qok[i];
        }
    }
    for i in 0..q_total.len() {
        r.values[i] = if r.valid[i] { r.values[i] + q_total[i] } else { 0.0 };
    }
    let density = DistributionField::midpoint(before, after)?.values;
    let l2 = weighted_l2_norm(&r.grid, std::slice::from_ref(&r.values), &r.valid, &density);
    let source_scale = weighted_l2_norm(&r.grid, std::slice::from_ref(&q_total), &r.valid, &density);
    let max = max_norm(std::slice::from_ref(&r.values), &r.valid);
    let masked_fraction = r.masked_fraction();
    let mut warnings = Vec::new();
    if masked_fraction > 0.5 {
        warnings.push(format!(
            "{:.1}% of cells are masked; the residual covers a minority of the grid",
            100.0 * masked_fraction
        ));
    }
    Ok(LogResidualReport {
        residual: r,
        l2,
        max,
        source_scale,
        masked_fraction,
        warnings,
    })
}
