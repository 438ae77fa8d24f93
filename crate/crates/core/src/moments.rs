//! Central and raw moment tensors, same-order and mixed.

use crate::error::{domain, Result};
use crate::field::{
    broadcast, integrate_out, masked_marginal, mean_kinematic, nested_average, DistributionField,
    MeanField, ScalarField,
};
use crate::grid::Grid;
use crate::index::KinematicIndexSet;

/// Central moment tensor over a base grid. `values` is indexed by the
/// component tuple flattened row-major (first factor slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTensorField {
    pub kinematic_orders: Vec<u8>,
    pub grid: Grid,
    pub components: usize,
    pub values: Vec<Vec<f64>>,
    pub valid: Vec<bool>,
    pub time: f64,
}

impl MomentTensorField {
    /// Tensor order (2 or 3).
    pub fn order(&self) -> usize {
        self.kinematic_orders.len()
    }

    pub fn base_set(&self) -> KinematicIndexSet {
        self.grid.index_set()
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.components + i)
    }

    pub fn get(&self, idx: &[usize]) -> &[f64] {
        &self.values[self.flat(idx)]
    }

    /// Zero tensor (e.g. the exact covariance of a deterministic map).
    pub fn zeros(kinematic_orders: Vec<u8>, grid: Grid, components: usize, time: f64) -> Self {
        let n = grid.len();
        let count = components.pow(kinematic_orders.len() as u32);
        Self {
            kinematic_orders,
            grid,
            components,
            values: vec![vec![0.0; n]; count],
            valid: vec![true; n],
            time,
        }
    }

    /// Swaps the two factors of a second-order tensor.
    pub fn transposed(&self) -> Self {
        assert_eq!(self.order(), 2, "transpose needs a second-order tensor");
        let d = self.components;
        let mut values = self.values.clone();
        for a in 0..d {
            for b in 0..d {
                values[a * d + b] = self.values[b * d + a].clone();
            }
        }
        Self {
            kinematic_orders: vec![self.kinematic_orders[1], self.kinematic_orders[0]],
            values,
            ..self.clone()
        }
    }

    /// Contraction over the last two indices (third order) or both (second order).
    pub fn trace(&self) -> Vec<Vec<f64>> {
        let d = self.components;
        let n = self.grid.len();
        match self.order() {
            2 => {
                let mut t = vec![0.0; n];
                for a in 0..d {
                    for (ti, v) in t.iter_mut().zip(self.get(&[a, a])) {
                        *ti += v;
                    }
                }
                vec![t]
            }
            _ => (0..d)
                .map(|b| {
                    let mut t = vec![0.0; n];
                    for a in 0..d {
                        for (ti, v) in t.iter_mut().zip(self.get(&[b, a, a])) {
                            *ti += v;
                        }
                    }
                    t
                })
                .collect(),
        }
    }
}

fn check_factor_orders(set: &KinematicIndexSet, orders: &[u8], drop: &KinematicIndexSet) -> Result<()> {
    if !drop.is_subset(set) {
        return domain(format!("drop set {drop} is not a subset of {set}"));
    }
    for &o in orders {
        if !set.contains(o) {
            return domain(format!("order {o} is not in {set}"));
        }
        if !drop.contains(o) {
            return domain(format!("order {o} must be integrated out (drop = {drop})"));
        }
    }
    Ok(())
}

/// Deviation factor `ξ^o_c - ⟨ξ^o_c⟩` on the full grid.
struct Deviation {
    per_component: Vec<Vec<f64>>,
}

fn deviations(
    f: &DistributionField,
    order: u8,
    drop: &KinematicIndexSet,
    base: &Grid,
) -> Result<Deviation> {
    let mean = mean_kinematic(f, order, &drop.without(order))?;
    let d = f.grid.components();
    let per_component = (0..d)
        .map(|c| {
            let x = f.grid.coordinate_of(order, c)?;
            let m = broadcast(base, &mean.values[c], &f.grid)?;
            Ok(x.iter().zip(&m).map(|(x, m)| x - m).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Deviation { per_component })
}

fn central_moment(
    f: &DistributionField,
    orders: &[u8],
    drop: &KinematicIndexSet,
) -> Result<MomentTensorField> {
    let set = f.index_set();
    check_factor_orders(&set, orders, drop)?;
    let (base, _, valid) = masked_marginal(&f.grid, &f.values, drop)?;
    let devs = orders
        .iter()
        .map(|&o| deviations(f, o, drop, &base))
        .collect::<Result<Vec<_>>>()?;
    tensor_from_factors(f, orders.to_vec(), &devs, drop, base, valid)
}

fn tensor_from_factors(
    f: &DistributionField,
    orders: Vec<u8>,
    devs: &[Deviation],
    drop: &KinematicIndexSet,
    base: Grid,
    valid: Vec<bool>,
) -> Result<MomentTensorField> {
    let d = f.grid.components();
    let r = devs.len();
    let count = d.pow(r as u32);
    let mut values = Vec::with_capacity(count);
    for flat in 0..count {
        // component tuple, first factor slowest
        let mut idx = vec![0usize; r];
        let mut rem = flat;
        for k in (0..r).rev() {
            idx[k] = rem % d;
            rem /= d;
        }
        let integrand: Vec<f64> = (0..f.values.len())
            .map(|i| {
                devs.iter()
                    .zip(&idx)
                    .fold(f.values[i], |acc, (dev, &c)| acc * dev.per_component[c][i])
            })
            .collect();
        let (_, v) = integrate_out(&f.grid, &integrand, drop)?;
        values.push(v.iter().zip(&valid).map(|(x, ok)| if *ok { *x } else { 0.0 }).collect());
    }
    Ok(MomentTensorField {
        kinematic_orders: orders,
        grid: base,
        components: d,
        values,
        valid,
        time: f.time,
    })
}

/// P^{a,b}_{αβ} = ∫(ξ^a_α − ⟨ξ^a_α⟩)(ξ^b_β − ⟨ξ^b_β⟩) f over `drop`, means
/// conditioned on the surviving base set. `drop` must contain `a` and `b`.
pub fn central_moment2(
    f: &DistributionField,
    a: u8,
    b: u8,
    drop: &KinematicIndexSet,
) -> Result<MomentTensorField> {
    central_moment(f, &[a, b], drop)
}

/// Third central moment P^{a,b,c}_{αβμ}, means conditioned on the base set.
pub fn central_moment3(
    f: &DistributionField,
    a: u8,
    b: u8,
    c: u8,
    drop: &KinematicIndexSet,
) -> Result<MomentTensorField> {
    central_moment(f, &[a, b, c], drop)
}

/// Mixed second moment P^{a,top} where the top order is not gridded but
/// supplied as its conditional mean ⟨ξ^top⟩ over the whole of `f`'s set.
/// Integrating the top order out first turns its deviation factor into
/// `⟨ξ^top⟩_S − ⟨ξ^top⟩_base`.
pub fn central_moment2_with_mean(
    f: &DistributionField,
    a: u8,
    top: &MeanField,
    drop: &KinematicIndexSet,
) -> Result<MomentTensorField> {
    let set = f.index_set();
    check_factor_orders(&set, &[a], drop)?;
    top.grid.ensure_same(&f.grid, "supplied mean")?;
    let (base, _, valid) = masked_marginal(&f.grid, &f.values, drop)?;
    let dev_a = deviations(f, a, drop, &base)?;
    let top_base = nested_average(top, f, drop)?;
    let per_component = (0..top.components())
        .map(|c| {
            let m = broadcast(&base, &top_base.values[c], &f.grid)?;
            Ok(top.values[c]
                .iter()
                .zip(&top.valid)
                .zip(&m)
                .map(|((t, ok), m)| if *ok { t - m } else { 0.0 })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let dev_top = Deviation { per_component };
    tensor_from_factors(f, vec![a, top.order], &[dev_a, dev_top], drop, base, valid)
}

/// Plain quadrature of `f · Π ξ^{order}_{component}` over `drop`.
pub fn raw_moment(
    f: &DistributionField,
    factors: &[(u8, usize)],
    drop: &KinematicIndexSet,
) -> Result<ScalarField> {
    if factors.len() > 3 {
        return domain("raw moments take at most three factors");
    }
    let mut integrand = f.values.clone();
    for &(o, c) in factors {
        let x = f.grid.coordinate_of(o, c)?;
        for (v, x) in integrand.iter_mut().zip(&x) {
            *v *= x;
        }
    }
    let (grid, values) = integrate_out(&f.grid, &integrand, drop)?;
    ScalarField::from_values(grid, values, f.time)
}
