//! Physical parameters and closures for the highest mean kinematical value
//! of a chain equation.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::field::{broadcast, broadcast_mask, zero_mask, DistributionField, MeanField};
use crate::grid::Grid;
use crate::index::KinematicIndexSet;
use crate::nd;

/// Polynomial `Σ c_j x^j` in one position component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Self { coeffs };
        while p.coeffs.last() == Some(&0.0) {
            p.coeffs.pop();
        }
        p
    }

    /// Degree, with the zero polynomial reported as `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self, k: usize) -> Polynomial {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(k)
            .map(|(j, c)| c * falling(j, k))
            .collect();
        Polynomial::new(coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

fn falling(j: usize, k: usize) -> f64 {
    (0..k).map(|i| (j - i) as f64).product()
}

/// Mass, ħ, potential and oscillator frequency.
///
/// The potential is separable: `U(x) = Σ_μ p(x_μ)` over position components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mass: f64,
    pub hbar: f64,
    pub potential: Polynomial,
    pub omega: f64,
}

impl PhysicalParams {
    pub fn new(mass: f64, hbar: f64, potential: Polynomial, omega: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return config(format!("mass must be positive, got {mass}"));
        }
        if !(hbar >= 0.0 && hbar.is_finite()) {
            return config(format!("hbar must be non-negative, got {hbar}"));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return config(format!("omega must be positive, got {omega}"));
        }
        Ok(Self {
            mass,
            hbar,
            potential,
            omega,
        })
    }

    /// Oscillator with `U = mω²x²/2`.
    pub fn harmonic(mass: f64, hbar: f64, omega: f64) -> Result<Self> {
        Self::new(
            mass,
            hbar,
            Polynomial::new(vec![0.0, 0.0, 0.5 * mass * omega * omega]),
            omega,
        )
    }

    /// `α = −ħ/2m`.
    pub fn alpha(&self) -> f64 {
        -self.hbar / (2.0 * self.mass)
    }

    /// `β = 1/ħ` (infinite in the classical limit).
    pub fn beta(&self) -> f64 {
        1.0 / self.hbar
    }

    /// Oscillator ground-state position width `sqrt(ħ/2mω)`.
    pub fn sigma_x(&self) -> f64 {
        (self.hbar / (2.0 * self.mass * self.omega)).sqrt()
    }

    pub fn sigma_v(&self) -> f64 {
        self.omega * self.sigma_x()
    }

    pub fn sigma_a(&self) -> f64 {
        self.omega * self.sigma_v()
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Vlasov–Moyal closure ⟨v̇⟩ on f^{1,2}:
/// `Σ_k (−1)^{k+1} (ħ/2)^{2k} / (m^{2k+1}(2k+1)!) · U^{(2k+1)}(x) · (1/f) ∂^{2k}f/∂v^{2k}`,
/// stopping as soon as the potential derivative vanishes identically.
pub fn moyal_closure(f12: &DistributionField, params: &PhysicalParams, k_max: i32) -> Result<MeanField> {
    if f12.index_set() != crate::kset![1, 2] {
        return domain(format!(
            "the Moyal closure needs a field over {{1,2}}, got {}",
            f12.index_set()
        ));
    }
    if params.hbar > 0.0 && k_max < 0 {
        return config("k_max must be non-negative when hbar > 0");
    }
    let grid = &f12.grid;
    let shape = grid.shape();
    let d = grid.components();
    let n = grid.len();
    let f_valid = zero_mask(&f12.values);
    let mut values = vec![vec![0.0; n]; d];
    let mut valid = vec![true; n];
    let m = params.mass;
    for (c, out) in values.iter_mut().enumerate() {
        let x = grid.coordinate_of(1, c)?;
        let vdim = grid.dim_index(2, c).expect("velocity axis");
        let hv = grid.dims()[vdim].axis.spacing();
        let mut deriv = f12.values.clone(); // ∂^{2k}f/∂v^{2k}, built up one k at a time
        let mut k = 0usize;
        while (k as i64) <= k_max.max(0) as i64 {
            let du = params.potential.derivative(2 * k + 1);
            if du.is_zero() {
                break;
            }
            let sign = if k.is_multiple_of(2) { -1.0 } else { 1.0 };
            let coef = sign * (params.hbar / 2.0).powi(2 * k as i32)
                / (m.powi(2 * k as i32 + 1) * factorial(2 * k + 1));
            if k == 0 {
                for (o, xi) in out.iter_mut().zip(&x) {
                    *o += coef * du.eval(*xi);
                }
            } else {
                deriv = nd::second_derivative_dim(&deriv, &shape, vdim, hv);
                for i in 0..n {
                    if f_valid[i] {
                        out[i] += coef * du.eval(x[i]) * deriv[i] / f12.values[i];
                    } else {
                        valid[i] = false;
                    }
                }
            }
            k += 1;
        }
    }
    for comp in values.iter_mut() {
        for (v, ok) in comp.iter_mut().zip(&valid) {
            if !ok {
                *v = 0.0;
            }
        }
    }
    MeanField::new(3, grid.clone(), values, valid, f12.time)
}

/// One term `coeff · ξ^{order}_{component}` of an affine map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineTerm {
    pub target_component: usize,
    pub order: u8,
    pub component: usize,
    pub coeff: f64,
}

/// Deterministic relation `ξ^{top} = g(lower coordinates)` of a delta state.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaMap {
    /// `g_c = offset_c + Σ coeff·ξ` over the terms targeting component `c`.
    Affine {
        offsets: Vec<f64>,
        terms: Vec<AffineTerm>,
    },
    /// Tabulated values on a grid over a subset of the lower orders.
    Tabulated(MeanField),
}

impl DeltaMap {
    /// Map for a single component, `ξ^{top} = coeff·ξ^{order} + offset`.
    pub fn linear(order: u8, coeff: f64, offset: f64) -> Self {
        DeltaMap::Affine {
            offsets: vec![offset],
            terms: vec![AffineTerm {
                target_component: 0,
                order,
                component: 0,
                coeff,
            }],
        }
    }

    /// Map values on every node of `grid`, one array per component.
    pub fn evaluate(&self, grid: &Grid) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
        match self {
            DeltaMap::Affine { offsets, terms } => {
                let n = grid.len();
                let mut out: Vec<Vec<f64>> = offsets.iter().map(|o| vec![*o; n]).collect();
                for t in terms {
                    if t.target_component >= out.len() {
                        return config(format!(
                            "affine term targets component {} of {}",
                            t.target_component,
                            out.len()
                        ));
                    }
                    let x = grid.coordinate_of(t.order, t.component)?;
                    for (o, x) in out[t.target_component].iter_mut().zip(&x) {
                        *o += t.coeff * x;
                    }
                }
                Ok((out, vec![true; n]))
            }
            DeltaMap::Tabulated(mf) => {
                let values = mf
                    .values
                    .iter()
                    .map(|c| broadcast(&mf.grid, c, grid))
                    .collect::<Result<Vec<_>>>()?;
                Ok((values, broadcast_mask(&mf.grid, &mf.valid, grid)?))
            }
        }
    }
}

/// How the closure value is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosureKind {
    Moyal { params: PhysicalParams, k_max: i32 },
    /// Deterministic map of the lower coordinates.
    Cold(DeltaMap),
    /// Mean fields sampled in time; linear interpolation between samples,
    /// held constant outside the sampled range.
    Tabulated(Vec<MeanField>),
    Zero,
}

/// Rule supplying ⟨ξ^{order}⟩ over `base_set` from the current field.
#[derive(Debug, Clone, PartialEq)]
pub struct Closure {
    pub kind: ClosureKind,
    pub order: u8,
    pub base_set: KinematicIndexSet,
}

impl Closure {
    pub fn moyal(params: PhysicalParams, k_max: i32) -> Result<Self> {
        if params.hbar > 0.0 && k_max < 0 {
            return config("k_max must be non-negative when hbar > 0");
        }
        Ok(Self {
            kind: ClosureKind::Moyal { params, k_max },
            order: 3,
            base_set: crate::kset![1, 2],
        })
    }

    pub fn zero(order: u8, base_set: KinematicIndexSet) -> Self {
        Self {
            kind: ClosureKind::Zero,
            order,
            base_set,
        }
    }

    pub fn cold(order: u8, base_set: KinematicIndexSet, map: DeltaMap) -> Self {
        Self {
            kind: ClosureKind::Cold(map),
            order,
            base_set,
        }
    }

    pub fn tabulated(series: Vec<MeanField>) -> Result<Self> {
        let first = match series.first() {
            Some(f) => f,
            None => return config("tabulated closure needs at least one sample"),
        };
        let (order, base_set) = (first.order, first.base_set());
        if series.iter().any(|m| m.order != order || !m.grid.same_as(&first.grid)) {
            return config("tabulated closure samples must share order and grid");
        }
        if series.windows(2).any(|w| w[0].time >= w[1].time) {
            return config("tabulated closure samples must have increasing times");
        }
        Ok(Self {
            kind: ClosureKind::Tabulated(series),
            order,
            base_set,
        })
    }

    /// Evaluates the closure for the field `f` (at `f.time`).
    pub fn evaluate(&self, f: &DistributionField) -> Result<MeanField> {
        if f.index_set() != self.base_set {
            return config(format!(
                "closure base set {} does not match field set {}",
                self.base_set,
                f.index_set()
            ));
        }
        match &self.kind {
            ClosureKind::Moyal { params, k_max } => moyal_closure(f, params, *k_max),
            ClosureKind::Zero => MeanField::zero(self.order, f.grid.clone(), f.time),
            ClosureKind::Cold(map) => {
                let (values, valid) = map.evaluate(&f.grid)?;
                MeanField::new(self.order, f.grid.clone(), values, valid, f.time)
            }
            ClosureKind::Tabulated(series) => {
                let first = &series[0];
                first.grid.ensure_same(&f.grid, "tabulated closure")?;
                let t = f.time;
                let j = series.partition_point(|m| m.time <= t);
                let mut out = if j == 0 {
                    first.clone()
                } else if j == series.len() {
                    series[j - 1].clone()
                } else {
                    let (a, b) = (&series[j - 1], &series[j]);
                    let w = (t - a.time) / (b.time - a.time);
                    let values = a
                        .values
                        .iter()
                        .zip(&b.values)
                        .map(|(p, q)| p.iter().zip(q).map(|(p, q)| (1.0 - w) * p + w * q).collect())
                        .collect();
                    let valid = a.valid.iter().zip(&b.valid).map(|(p, q)| *p && *q).collect();
                    MeanField::new(a.order, a.grid.clone(), values, valid, t)?
                };
                out.time = t;
                Ok(out)
            }
        }
    }
}
