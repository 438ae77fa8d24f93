//! Closed-form reference states: Laguerre polynomials, harmonic-oscillator
//! Wigner functions, delta (cold) states, Gaussians, and the quantum-pressure
//! identity check.

use crate::closure::{DeltaMap, PhysicalParams};
use crate::conservation::{LawId, ResidualReport};
use crate::error::{config, domain, Result};
use crate::field::{marginalize, nested_average, DistributionField, MeanField};
use crate::grid::{Axis, AxisGrid, Grid};
use crate::index::KinematicIndexSet;
use crate::moments::MomentTensorField;
use crate::nd;

/// Largest Laguerre degree accepted by [`laguerre`].
pub const MAX_LAGUERRE_DEGREE: u32 = 30;

/// Default half-width of oscillator boxes, in units of the state width.
pub const DEFAULT_BOX_WIDTHS: f64 = 8.0;

/// L_n(z) by the three-term recurrence.
pub fn laguerre(n: u32, z: f64) -> Result<f64> {
    if n > MAX_LAGUERRE_DEGREE {
        return domain(format!("Laguerre degree {n} exceeds {MAX_LAGUERRE_DEGREE}"));
    }
    let (mut prev, mut cur) = (1.0, 1.0 - z);
    if n == 0 {
        return Ok(prev);
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 - z) * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Phase-space grid over {1,2} (one component) spanning `±widths·σ` per axis.
pub fn oscillator_grid(params: &PhysicalParams, points: usize, widths: f64) -> Result<Grid> {
    if params.hbar <= 0.0 || params.omega <= 0.0 {
        return config("oscillator grid needs hbar > 0 and omega > 0");
    }
    Grid::new(vec![
        AxisGrid::scalar(1, Axis::symmetric(widths * params.sigma_x(), points)?),
        AxisGrid::scalar(2, Axis::symmetric(widths * params.sigma_v(), points)?),
    ])
}

fn check_oscillator_grid(grid: &Grid, params: &PhysicalParams) -> Result<()> {
    if params.hbar <= 0.0 {
        return config("oscillator states need hbar > 0");
    }
    if params.omega <= 0.0 {
        return config("oscillator states need omega > 0");
    }
    if grid.index_set() != crate::kset![1, 2] || grid.components() != 1 {
        return domain(format!(
            "oscillator states live on a one-component grid over {{1,2}}, got {}",
            grid.index_set()
        ));
    }
    Ok(())
}

/// Wigner function of the n-th harmonic-oscillator eigenstate,
/// `(−1)^n m/(πħ) e^{−r} L_n(2r)` with `r = m(v² + ω²x²)/(ħω)`.
pub fn wigner_oscillator(n: u32, params: &PhysicalParams, grid: Grid, time: f64) -> Result<DistributionField> {
    check_oscillator_grid(&grid, params)?;
    laguerre(n, 0.0)?;
    let (m, hbar, w) = (params.mass, params.hbar, params.omega);
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let pre = sign * m / (std::f64::consts::PI * hbar);
    DistributionField::from_fn(grid, time, |c| {
        let r = m / (hbar * w) * (c[1] * c[1] + w * w * c[0] * c[0]);
        pre * (-r).exp() * laguerre(n, 2.0 * r).expect("degree checked")
    })
}

/// A distribution concentrated on `ξ^{top} = g(lower coordinates)`. The delta
/// factor is never sampled; integrals against it substitute the map.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaState {
    /// Density over the lower orders (the marginal with the delta axis integrated out).
    pub base: DistributionField,
    pub top_order: u8,
    pub map: DeltaMap,
}

impl DeltaState {
    pub fn new(base: DistributionField, top_order: u8, map: DeltaMap) -> Result<Self> {
        if base.index_set().contains(top_order) {
            return domain(format!("delta order {top_order} is already gridded"));
        }
        map.evaluate(&base.grid)?;
        Ok(Self {
            base,
            top_order,
            map,
        })
    }

    /// Index set of the full state, base orders plus the delta order.
    pub fn index_set(&self) -> Result<KinematicIndexSet> {
        self.base.index_set().with(self.top_order)
    }

    /// The map on the base grid, as a mean field.
    pub fn map_field(&self) -> Result<MeanField> {
        let (values, valid) = self.map.evaluate(&self.base.grid)?;
        MeanField::new(self.top_order, self.base.grid.clone(), values, valid, self.base.time)
    }

    /// ⟨ξ^{top}⟩ over the base set minus `drop`, by substitution of the map.
    pub fn mean_top(&self, drop: &KinematicIndexSet) -> Result<MeanField> {
        nested_average(&self.map_field()?, &self.base, drop)
    }

    /// P^{top,top} over the full base set: `∫(ξ − ⟨ξ⟩)(ξ − ⟨ξ⟩) δ(ξ − g) f dξ`,
    /// evaluated by substituting `ξ = g`.
    pub fn central_moment_top(&self) -> Result<MomentTensorField> {
        let g = self.map_field()?;
        let mean = self.mean_top(&KinematicIndexSet::empty())?;
        let d = g.components();
        let n = self.base.grid.len();
        let mut values = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in 0..d {
                values.push(
                    (0..n)
                        .map(|i| {
                            (g.values[a][i] - mean.values[a][i])
                                * (g.values[b][i] - mean.values[b][i])
                                * self.base.values[i]
                        })
                        .collect(),
                );
            }
        }
        Ok(MomentTensorField {
            kinematic_orders: vec![self.top_order, self.top_order],
            grid: self.base.grid.clone(),
            components: d,
            values,
            valid: mean.valid,
            time: self.base.time,
        })
    }

    /// Marginal over the base orders minus `drop`.
    pub fn marginal(&self, drop: &KinematicIndexSet) -> Result<DistributionField> {
        marginalize(&self.base, drop)
    }
}

/// Rank-3 oscillator state over {1,2,3}: base density
/// `(−1)^n/(2πσ_xσ_v) e^{−s} L_n(2s)`, `s = x²/(2σ_x²) + v²/(2σ_v²)`, and
/// the map `v̇ = −ω²x`. The exponent follows from substituting the map into
/// the v̇ Gaussian with `σ_v̇ = ωσ_v`.
pub fn rank3_oscillator_state(n: u32, params: &PhysicalParams, grid: Grid, time: f64) -> Result<DeltaState> {
    check_oscillator_grid(&grid, params)?;
    laguerre(n, 0.0)?;
    let (sx, sv, w) = (params.sigma_x(), params.sigma_v(), params.omega);
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let pre = sign / (2.0 * std::f64::consts::PI * sx * sv);
    let base = DistributionField::from_fn(grid, time, |c| {
        let s = c[0] * c[0] / (2.0 * sx * sx) + c[1] * c[1] / (2.0 * sv * sv);
        pre * (-s).exp() * laguerre(n, 2.0 * s).expect("degree checked")
    })?;
    DeltaState::new(base, 3, DeltaMap::linear(1, -w * w, 0.0))
}

/// One-velocity state `ρ(x) δ(v − u(x))` over {1,2}.
pub fn cold_state(density: &DistributionField, velocity: &MeanField) -> Result<DeltaState> {
    if density.index_set() != crate::kset![1] {
        return domain(format!("cold state density must live over {{1}}, got {}", density.index_set()));
    }
    if velocity.order != 2 {
        return domain(format!("cold state velocity must have order 2, got {}", velocity.order));
    }
    velocity.grid.ensure_same(&density.grid, "cold state velocity")?;
    if let Some(v) = density.values.iter().find(|v| **v < 0.0) {
        return domain(format!("cold state density is negative ({v:e})"));
    }
    DeltaState::new(density.clone(), 2, DeltaMap::Tabulated(velocity.clone()))
}

/// Normalized product Gaussian with per-dimension centers and widths.
pub fn gaussian(grid: Grid, center: &[f64], sigma: &[f64], time: f64) -> Result<DistributionField> {
    let dims = grid.dims().len();
    if center.len() != dims || sigma.len() != dims {
        return domain(format!("gaussian needs {dims} centers and widths"));
    }
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return domain("gaussian widths must be positive");
    }
    let norm: f64 = sigma
        .iter()
        .map(|s| 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * s))
        .product();
    DistributionField::from_fn(grid, time, |c| {
        let q: f64 = c
            .iter()
            .zip(center)
            .zip(sigma)
            .map(|((x, m), s)| (x - m) * (x - m) / (2.0 * s * s))
            .sum();
        norm * (-q).exp()
    })
}

/// Width of the margin excluded from [`quantum_pressure_check`].
pub const QUANTUM_PRESSURE_MARGIN: usize = 3;

/// Checks `−(1/f₁)∂_β P_{αβ} = 2α² ∂_α[(1/√f₁) Σ_β ∂²_β √f₁]` on the interior
/// of the grid, with `α = −ħ/2m`.
pub fn quantum_pressure_check(
    f1: &DistributionField,
    pq: &MomentTensorField,
    params: &PhysicalParams,
) -> Result<ResidualReport> {
    let set = f1.index_set();
    if set.rank() != 1 {
        return domain(format!("quantum pressure check needs a rank-1 density, got {set}"));
    }
    let order = set.as_slice()[0];
    pq.grid.ensure_same(&f1.grid, "pressure tensor")?;
    if pq.order() != 2 {
        return domain("pressure tensor must be second order");
    }
    let grid = &f1.grid;
    let shape = grid.shape();
    let dims = grid.dims();
    let d = grid.components();
    let len = grid.len();

    let mut valid = vec![true; len];
    for (k, &n) in shape.iter().enumerate() {
        let l = nd::Lines::new(&shape, k);
        for line in 0..l.count() {
            let b = l.start(line);
            for i in 0..n {
                if i < QUANTUM_PRESSURE_MARGIN || i + QUANTUM_PRESSURE_MARGIN >= n {
                    valid[b + i * l.stride] = false;
                }
            }
        }
    }
    if let Some(i) = (0..len).find(|&i| valid[i] && !(f1.values[i] > 0.0)) {
        return domain(format!(
            "density is not positive inside the check window (cell {i}, value {:e})",
            f1.values[i]
        ));
    }

    let root: Vec<f64> = f1.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut lap = vec![0.0; len];
    for k in 0..dims.len() {
        let h = dims[k].axis.spacing();
        let s = nd::second_derivative_dim(&root, &shape, k, h);
        for (l, s) in lap.iter_mut().zip(s) {
            *l += s;
        }
    }
    let bohm: Vec<f64> = (0..len)
        .map(|i| if root[i] > 0.0 { lap[i] / root[i] } else { 0.0 })
        .collect();
    let alpha = params.alpha();
    let mut lhs = vec![vec![0.0; len]; d];
    let mut rhs = Vec::with_capacity(d);
    for a in 0..d {
        let ka = grid.dim_index(order, a).expect("component axis");
        let ha = dims[ka].axis.spacing();
        let grad = nd::derivative_dim(&bohm, &shape, ka, ha);
        rhs.push(grad.iter().map(|g| 2.0 * alpha * alpha * g).collect::<Vec<_>>());
        for b in 0..d {
            let kb = grid.dim_index(order, b).expect("component axis");
            let dp = nd::derivative_dim(pq.get(&[a, b]), &shape, kb, dims[kb].axis.spacing());
            for i in 0..len {
                if valid[i] {
                    lhs[a][i] -= dp[i] / f1.values[i];
                }
            }
        }
    }
    ResidualReport::build(LawId::QuantumPressure, grid.clone(), lhs, rhs, valid, &f1.values, f1.time)
}
