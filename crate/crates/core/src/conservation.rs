//! Residual evaluators for the moment (conservation and motion) laws of the
//! chain, the divergence identity ladder, and the parity identities.
//!
//! Every motion law has the same shape. For a base set `B` and a target
//! order `t ∉ B`:
//!
//! `π_B⟨ξ^t_α⟩_B + (1/f^B) Σ_{a∈B} ∂P^{a+1,t}_{βα}(B)/∂ξ^a_β = ⟨ξ^{t+1}_α⟩_B`
//!
//! where `π_B` advects axis `a` with order `a+1`, an order that is itself in
//! `B` enters as its raw coordinate, and covariances with a base coordinate
//! vanish. Momentum laws are `B = {n}`; the rank-3 motion equations and the
//! identity ladder are the same evaluator with larger base sets, so formally
//! degenerate cases share one code path.

use std::collections::BTreeMap;
use std::fmt;

use crate::dynamics::{apply_pi, Advection};
use crate::error::{config, domain, Result};
use crate::field::{
    broadcast, integrate_out, marginalize, max_norm, mean_kinematic, nested_average,
    weighted_l2_norm, zero_mask, DistributionField, MeanField, ScalarField,
};
use crate::grid::Grid;
use crate::index::KinematicIndexSet;
use crate::moments::{central_moment2, central_moment2_with_mean, central_moment3, raw_moment, MomentTensorField};
use crate::nd;

/// Which order of a rank-3 set `{n, n+1, n+1+k}` is averaged over the other two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionTarget {
    /// ⟨ξ^n⟩ over {n+1, n+1+k}
    Lowest,
    /// ⟨ξ^{n+1}⟩ over {n, n+1+k}
    Middle,
    /// ⟨ξ^{n+1+k}⟩ over {n, n+1}
    Top,
}

/// A motion equation of a rank-3 set `{n, n+1, n+1+gap}`; `gap = 1` is the
/// contiguous (first-group) set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotionEquation {
    pub n: u8,
    pub gap: u8,
    pub target: MotionTarget,
}

impl MotionEquation {
    pub fn set(&self) -> Result<KinematicIndexSet> {
        KinematicIndexSet::new(vec![self.n, self.n + 1, self.n + 1 + self.gap])
    }

    pub fn law(&self) -> Result<MomentLaw> {
        let (n, k) = (self.n, self.gap);
        let (base, target) = match self.target {
            MotionTarget::Lowest => (vec![n + 1, n + 1 + k], n),
            MotionTarget::Middle => (vec![n, n + 1 + k], n + 1),
            MotionTarget::Top => (vec![n, n + 1], n + 1 + k),
        };
        MomentLaw::new(KinematicIndexSet::new(base)?, target)
    }
}

/// Identifier of an evaluated law, as written in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawId {
    MomentumFirst,
    EnergyFirst,
    MomentumSecond,
    EnergySecond,
    Motion(MotionEquation),
    DivergenceIdentity { lambda: u8 },
    ParityMean { lambda: u8 },
    ParityReconstruction { lambda: u8 },
    HTheorem,
    QuantumPressure,
    /// A [`MomentLaw`] evaluated directly from hand-built inputs.
    Moment,
}

impl fmt::Display for LawId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawId::MomentumFirst => write!(f, "momentum-first"),
            LawId::EnergyFirst => write!(f, "energy-first"),
            LawId::MomentumSecond => write!(f, "momentum-second"),
            LawId::EnergySecond => write!(f, "energy-second"),
            LawId::Motion(m) => {
                let t = match m.target {
                    MotionTarget::Lowest => "lowest",
                    MotionTarget::Middle => "middle",
                    MotionTarget::Top => "top",
                };
                if m.gap == 1 {
                    write!(f, "motion-{t}")
                } else {
                    write!(f, "motion-{t}-gap{}", m.gap)
                }
            }
            LawId::DivergenceIdentity { lambda } => write!(f, "divergence-identity-{lambda}"),
            LawId::ParityMean { lambda } => write!(f, "parity-mean-{lambda}"),
            LawId::ParityReconstruction { lambda } => write!(f, "parity-reconstruction-{lambda}"),
            LawId::HTheorem => write!(f, "h-theorem"),
            LawId::QuantumPressure => write!(f, "quantum-pressure"),
            LawId::Moment => write!(f, "moment-law"),
        }
    }
}

/// Left and right sides of one law on its base grid, with norms of `lhs − rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub law: LawId,
    pub grid: Grid,
    /// One array per vector component.
    pub lhs: Vec<Vec<f64>>,
    pub rhs: Vec<Vec<f64>>,
    pub residual: Vec<Vec<f64>>,
    pub valid: Vec<bool>,
    /// Density-weighted L2 norm of the residual over valid cells.
    pub residual_norm: f64,
    pub max_norm: f64,
    pub time: f64,
    pub warnings: Vec<String>,
}

impl ResidualReport {
    pub fn build(
        law: LawId,
        grid: Grid,
        lhs: Vec<Vec<f64>>,
        rhs: Vec<Vec<f64>>,
        valid: Vec<bool>,
        density: &[f64],
        time: f64,
    ) -> Result<Self> {
        if lhs.len() != rhs.len() || lhs.iter().chain(&rhs).any(|c| c.len() != grid.len()) {
            return domain("lhs and rhs must live on the same grid");
        }
        let residual: Vec<Vec<f64>> = lhs
            .iter()
            .zip(&rhs)
            .map(|(l, r)| {
                l.iter()
                    .zip(r)
                    .zip(&valid)
                    .map(|((l, r), ok)| if *ok { l - r } else { 0.0 })
                    .collect()
            })
            .collect();
        let residual_norm = weighted_l2_norm(&grid, &residual, &valid, density);
        let max = max_norm(&residual, &valid);
        let masked = valid.iter().filter(|v| !**v).count();
        let mut warnings = Vec::new();
        if 2 * masked > valid.len() {
            warnings.push(format!("{masked} of {} cells are masked", valid.len()));
        }
        Ok(Self {
            law,
            grid,
            lhs,
            rhs,
            residual,
            valid,
            residual_norm,
            max_norm: max,
            time,
            warnings,
        })
    }

    pub fn masked_fraction(&self) -> f64 {
        self.valid.iter().filter(|v| !**v).count() as f64 / self.valid.len().max(1) as f64
    }
}

/// The moment law for ⟨ξ^target⟩ over `base`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentLaw {
    pub base: KinematicIndexSet,
    pub target: u8,
}

impl MomentLaw {
    pub fn new(base: KinematicIndexSet, target: u8) -> Result<Self> {
        if base.contains(target) {
            return domain(format!("target order {target} lies in the base {base}"));
        }
        Ok(Self { base, target })
    }

    /// Orders whose mean over the base enters the law (advection or right side).
    pub fn required_means(&self) -> Vec<u8> {
        let mut v: Vec<u8> = self
            .base
            .iter()
            .map(|a| a + 1)
            .chain(std::iter::once(self.target + 1))
            .filter(|&o| o != self.target && !self.base.contains(o))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// `(axis a, order a+1)` pairs carrying a covariance P^{a+1,t} term.
    pub fn tensor_terms(&self) -> Vec<(u8, u8)> {
        self.base
            .iter()
            .filter(|a| !self.base.contains(a + 1))
            .map(|a| (a, a + 1))
            .collect()
    }

    fn advection(&self, inputs: &LawInputs) -> Result<Vec<Advection>> {
        self.base
            .iter()
            .map(|a| {
                let o = a + 1;
                if o == self.target {
                    Ok(Advection::Mean(inputs.target_mid.clone()))
                } else if self.base.contains(o) {
                    Ok(Advection::Coordinate(o))
                } else {
                    inputs.mean(o, &self.base).map(|m| Advection::Mean(m.clone()))
                }
            })
            .collect()
    }
}

/// Everything a [`MomentLaw`] needs, sampled on the base grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LawInputs {
    /// f^B at the midpoint time.
    pub density: DistributionField,
    /// ⟨ξ^t⟩_B at `t − dt/2`, `t + dt/2` and the midpoint.
    pub target_before: MeanField,
    pub target_after: MeanField,
    pub target_mid: MeanField,
    /// Midpoint means ⟨ξ^o⟩_B keyed by order, for orders outside B.
    pub means: BTreeMap<u8, MeanField>,
    /// Midpoint tensors P^{o,t}(B) keyed by the contracted order `o`.
    pub tensors: BTreeMap<u8, MomentTensorField>,
    pub dt: f64,
}

impl LawInputs {
    fn mean(&self, o: u8, base: &KinematicIndexSet) -> Result<&MeanField> {
        self.means.get(&o).ok_or_else(|| {
            crate::error::ChainError::Config(format!("missing mean field <xi^{o}> over {base}"))
        })
    }

    fn tensor(&self, o: u8, t: u8, base: &KinematicIndexSet) -> Result<&MomentTensorField> {
        let missing = || {
            crate::error::ChainError::Config(format!(
                "missing moment tensor P^{{{o},{t}}} over {base}"
            ))
        };
        let p = self.tensors.get(&o).ok_or_else(missing)?;
        if p.kinematic_orders != [o, t] {
            return config(format!(
                "tensor keyed {o} has orders {:?}, expected [{o}, {t}]",
                p.kinematic_orders
            ));
        }
        Ok(p)
    }

    /// Builds the inputs of `law` from a pair of fields over a set `S ⊇ B ∪ {t}`
    /// at `t ± dt/2`. Orders outside `S` are taken from `supplied` mean fields
    /// (midpoint closures) whose base lies between `B` and `S`.
    pub fn from_pair(
        law: &MomentLaw,
        before: &DistributionField,
        after: &DistributionField,
        supplied: &[MeanField],
    ) -> Result<Self> {
        before.grid.ensure_same(&after.grid, "field pair")?;
        let s = before.index_set();
        let b = &law.base;
        let t = law.target;
        if !b.is_subset(&s) || !s.contains(t) {
            return domain(format!(
                "field over {s} cannot feed the law for <xi^{t}> over {b}"
            ));
        }
        let dt = after.time - before.time;
        if !(dt > 0.0) {
            return domain(format!("field pair must be ordered in time, dt = {dt}"));
        }
        let mid = DistributionField::midpoint(before, after)?;
        let drop = s.difference(b);
        let density = marginalize(&mid, &drop)?;
        let target_drop = drop.without(t);
        let target_before = mean_kinematic(before, t, &target_drop)?;
        let target_after = mean_kinematic(after, t, &target_drop)?;
        let target_mid = mean_kinematic(&mid, t, &target_drop)?;

        let find = |o: u8| -> Result<&MeanField> {
            supplied
                .iter()
                .find(|m| m.order == o && b.is_subset(&m.base_set()) && m.base_set().is_subset(&s))
                .ok_or_else(|| {
                    crate::error::ChainError::Config(format!(
                        "missing mean field <xi^{o}> over a set between {b} and {s}"
                    ))
                })
        };

        let mut means = BTreeMap::new();
        for o in law.required_means() {
            let m = if s.contains(o) {
                mean_kinematic(&mid, o, &drop.without(o))?
            } else {
                let sup = find(o)?;
                let c = sup.base_set();
                let weight = marginalize(&mid, &s.difference(&c))?;
                nested_average(sup, &weight, &c.difference(b))?
            };
            means.insert(o, m);
        }

        let mut tensors = BTreeMap::new();
        for (_, o) in law.tensor_terms() {
            let p = if o == t {
                central_moment2(&mid, t, t, &drop)?
            } else if s.contains(o) {
                central_moment2(&mid, o, t, &drop)?
            } else {
                let sup = find(o).map_err(|_| {
                    crate::error::ChainError::Config(format!(
                        "missing moment tensor P^{{{o},{t}}} over {b}: no mean <xi^{o}> supplied"
                    ))
                })?;
                let c = sup.base_set();
                if !c.contains(t) {
                    return config(format!(
                        "moment tensor P^{{{o},{t}}} over {b} needs <xi^{o}> conditioned on order {t}"
                    ));
                }
                let fc = marginalize(&mid, &s.difference(&c))?;
                central_moment2_with_mean(&fc, t, sup, &c.difference(b))?.transposed()
            };
            tensors.insert(o, p);
        }

        Ok(Self {
            density,
            target_before,
            target_after,
            target_mid,
            means,
            tensors,
            dt,
        })
    }
}

/// The three pieces of a moment law on the base grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LawTerms {
    /// π_B⟨ξ^t⟩_B per component.
    pub transport: Vec<Vec<f64>>,
    /// (1/f^B) Σ ∂P/∂ξ per component.
    pub divergence: Vec<Vec<f64>>,
    pub valid: Vec<bool>,
    pub grid: Grid,
    pub time: f64,
}

/// Evaluates the transport and tensor-divergence terms of a law.
pub fn law_terms(law: &MomentLaw, inputs: &LawInputs) -> Result<LawTerms> {
    let grid = inputs.density.grid.clone();
    if grid.index_set() != law.base {
        return domain(format!(
            "density over {} does not match base {}",
            grid.index_set(),
            law.base
        ));
    }
    for m in [&inputs.target_before, &inputs.target_after, &inputs.target_mid] {
        grid.ensure_same(&m.grid, "target mean")?;
        if m.order != law.target {
            return config(format!("target mean has order {}, expected {}", m.order, law.target));
        }
    }
    let d = inputs.target_mid.components();
    let shape = grid.shape();
    let dens = &inputs.density.values;
    let mut valid = zero_mask(dens);
    let adv = law.advection(inputs)?;
    let mut transport = Vec::with_capacity(d);
    for c in 0..d {
        let r = apply_pi(
            &inputs.target_before.component(c),
            &inputs.target_after.component(c),
            inputs.dt,
            &adv,
        )?;
        for (v, ok) in valid.iter_mut().zip(&r.valid) {
            *v &= ok;
        }
        transport.push(r.values);
    }
    let mut divergence = vec![vec![0.0; grid.len()]; d];
    for (a, o) in law.tensor_terms() {
        let p = inputs.tensor(o, law.target, &law.base)?;
        grid.ensure_same(&p.grid, "moment tensor")?;
        for beta in 0..p.components {
            let k = grid.dim_index(a, beta).expect("base axis");
            let h = grid.dims()[k].axis.spacing();
            let ok = nd::stencil_valid(&p.valid, &shape, k, 1);
            for (v, ok) in valid.iter_mut().zip(&ok) {
                *v &= ok;
            }
            for (alpha, div) in divergence.iter_mut().enumerate() {
                let dp = nd::derivative_dim(p.get(&[beta, alpha]), &shape, k, h);
                for i in 0..div.len() {
                    div[i] += dp[i];
                }
            }
        }
    }
    for div in divergence.iter_mut() {
        for i in 0..div.len() {
            div[i] = if valid[i] { div[i] / dens[i] } else { 0.0 };
        }
    }
    Ok(LawTerms {
        transport,
        divergence,
        valid,
        grid,
        time: inputs.density.time,
    })
}

/// ⟨ξ^{t+1}⟩_B: the raw coordinate when `t+1 ∈ B`, otherwise the supplied mean.
fn next_mean(law: &MomentLaw, inputs: &LawInputs, grid: &Grid, d: usize) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let o = law.target + 1;
    if law.base.contains(o) {
        let v = (0..d).map(|c| grid.coordinate_of(o, c)).collect::<Result<Vec<_>>>()?;
        Ok((v, vec![true; grid.len()]))
    } else {
        let m = inputs.mean(o, &law.base)?;
        grid.ensure_same(&m.grid, "right-side mean")?;
        Ok((m.values.clone(), m.valid.clone()))
    }
}

/// Residual `π⟨ξ^t⟩ + (1/f)Σ∂P − ⟨ξ^{t+1}⟩` of a moment law.
pub fn evaluate_law(law: &MomentLaw, inputs: &LawInputs, id: LawId) -> Result<ResidualReport> {
    let terms = law_terms(law, inputs)?;
    let d = terms.transport.len();
    let (next, next_ok) = next_mean(law, inputs, &terms.grid, d)?;
    let valid: Vec<bool> = terms.valid.iter().zip(&next_ok).map(|(a, b)| *a && *b).collect();
    let lhs = terms
        .transport
        .iter()
        .zip(&terms.divergence)
        .map(|(t, dv)| t.iter().zip(dv).map(|(t, dv)| t + dv).collect())
        .collect();
    ResidualReport::build(id, terms.grid, lhs, next, valid, &inputs.density.values, terms.time)
}

/// ⟨ξ^{t+1}⟩_B implied by the law: `π⟨ξ^t⟩ + (1/f)Σ∂P`.
pub fn infer_next_mean(law: &MomentLaw, inputs: &LawInputs) -> Result<MeanField> {
    let terms = law_terms(law, inputs)?;
    let values = terms
        .transport
        .iter()
        .zip(&terms.divergence)
        .map(|(t, dv)| {
            t.iter()
                .zip(dv)
                .zip(&terms.valid)
                .map(|((t, dv), ok)| if *ok { t + dv } else { 0.0 })
                .collect()
        })
        .collect();
    MeanField::new(law.target + 1, terms.grid, values, terms.valid, terms.time)
}

fn momentum_law(set: &KinematicIndexSet, target: u8) -> Result<MomentLaw> {
    let n = set
        .first()
        .ok_or_else(|| crate::error::ChainError::Domain("empty field set".into()))?;
    MomentLaw::new(crate::kset![n], target)
}

/// Momentum law for ⟨ξ^{n+1}⟩_n from a pair of f^{n,n+1} at `t ± dt/2` and
/// the closure ⟨ξ^{n+2}⟩_{n,n+1} at the midpoint.
pub fn momentum_residual_first(
    before: &DistributionField,
    after: &DistributionField,
    closure_mid: &MeanField,
) -> Result<ResidualReport> {
    let set = before.index_set();
    if set.rank() != 2 || !set.is_contiguous() {
        return domain(format!("momentum law needs f over {{n,n+1}}, got {set}"));
    }
    let law = momentum_law(&set, set.as_slice()[1])?;
    let inputs = LawInputs::from_pair(&law, before, after, std::slice::from_ref(closure_mid))?;
    evaluate_law(&law, &inputs, LawId::MomentumFirst)
}

/// Momentum law for ⟨ξ^{n+k}⟩_n from a pair of f^{n,n+1,n+k} (or f^{n,n+1}
/// when `k = 1`) and ⟨ξ^{n+k+1}⟩ over a set containing {n, n+k}.
pub fn momentum_residual_second(
    before: &DistributionField,
    after: &DistributionField,
    k: u8,
    top_mean: &MeanField,
) -> Result<ResidualReport> {
    let set = before.index_set();
    let n = set.first().unwrap_or(0);
    let expected = KinematicIndexSet::new(if k == 1 { vec![n, n + 1] } else { vec![n, n + 1, n + k] })?;
    if set != expected {
        return domain(format!("gap {k} needs f over {expected}, got {set}"));
    }
    let law = momentum_law(&set, n + k)?;
    let inputs = LawInputs::from_pair(&law, before, after, std::slice::from_ref(top_mean))?;
    evaluate_law(&law, &inputs, if k == 1 { LawId::MomentumFirst } else { LawId::MomentumSecond })
}

/// Energy law for `½f⟨ξ^t⟩² + ½TrP^t` over base {n}, advected by ⟨ξ^{n+1}⟩_n.
///
/// `t = n+1` is the first-group law, `t = n+k` the second-group one. The work
/// term ∫f⟨ξ^{t+1}⟩ξ^t uses order t+1 from the field when gridded, otherwise
/// from `supplied`.
pub fn energy_residual(
    before: &DistributionField,
    after: &DistributionField,
    target: u8,
    supplied: &[MeanField],
) -> Result<ResidualReport> {
    before.grid.ensure_same(&after.grid, "field pair")?;
    let s = before.index_set();
    let n = s.first().unwrap_or(0);
    if !s.contains(n + 1) || !s.contains(target) || target <= n {
        return domain(format!("energy law for order {target} cannot use a field over {s}"));
    }
    let dt = after.time - before.time;
    if !(dt > 0.0) {
        return domain(format!("field pair must be ordered in time, dt = {dt}"));
    }
    let base = crate::kset![n];
    let drop = s.difference(&base);
    let mid = DistributionField::midpoint(before, after)?;

    let energy_density = |f: &DistributionField| -> Result<Vec<f64>> {
        let fn_ = marginalize(f, &drop)?;
        let w = mean_kinematic(f, target, &drop.without(target))?;
        let tr = central_moment2(f, target, target, &drop)?.trace().remove(0);
        Ok((0..fn_.values.len())
            .map(|i| {
                let w2: f64 = w.values.iter().map(|c| c[i] * c[i]).sum();
                if w.valid[i] {
                    0.5 * fn_.values[i] * w2 + 0.5 * tr[i]
                } else {
                    0.0
                }
            })
            .collect())
    };
    let e0 = energy_density(before)?;
    let e1 = energy_density(after)?;

    let density = marginalize(&mid, &drop)?;
    let grid = density.grid.clone();
    let shape = grid.shape();
    let u = mean_kinematic(&mid, n + 1, &drop.without(n + 1))?;
    let w = mean_kinematic(&mid, target, &drop.without(target))?;
    let tr = central_moment2(&mid, target, target, &drop)?.trace().remove(0);
    let p_mixed = central_moment2(&mid, n + 1, target, &drop)?;
    let p3 = central_moment3(&mid, n + 1, target, target, &drop)?.trace();
    let d = w.components();
    let mut valid = zero_mask(&density.values);
    for (v, (a, b)) in valid.iter_mut().zip(u.valid.iter().zip(&w.valid)) {
        *v &= *a && *b;
    }
    let mut div = vec![0.0; grid.len()];
    for beta in 0..d {
        let flux: Vec<f64> = (0..grid.len())
            .map(|i| {
                let w2: f64 = w.values.iter().map(|c| c[i] * c[i]).sum();
                let pw: f64 = (0..d).map(|a| p_mixed.get(&[beta, a])[i] * w.values[a][i]).sum();
                let ub = u.values[beta][i];
                0.5 * density.values[i] * w2 * ub + 0.5 * ub * tr[i] + pw + 0.5 * p3[beta][i]
            })
            .collect();
        let k = grid.dim_index(n, beta).expect("base axis");
        let h = grid.dims()[k].axis.spacing();
        let df = nd::derivative_dim(&flux, &shape, k, h);
        let ok = nd::stencil_valid(&valid, &shape, k, 1);
        for i in 0..div.len() {
            div[i] += df[i];
        }
        for (v, o) in valid.iter_mut().zip(ok) {
            *v &= o;
        }
    }

    let work = if s.contains(target + 1) {
        let mut acc = vec![0.0; grid.len()];
        for a in 0..d {
            let r = raw_moment(&mid, &[(target + 1, a), (target, a)], &drop)?;
            for (x, y) in acc.iter_mut().zip(&r.values) {
                *x += y;
            }
        }
        acc
    } else {
        let sup = supplied
            .iter()
            .find(|m| {
                m.order == target + 1
                    && m.base_set().contains(n)
                    && m.base_set().contains(target)
                    && m.base_set().is_subset(&s)
            })
            .ok_or_else(|| {
                crate::error::ChainError::Config(format!(
                    "missing mean field <xi^{}> over a set containing {{{n},{target}}}",
                    target + 1
                ))
            })?;
        let c = sup.base_set();
        let fc = marginalize(&mid, &s.difference(&c))?;
        let mut acc = vec![0.0; grid.len()];
        for a in 0..d {
            let x = fc.grid.coordinate_of(target, a)?;
            let integrand: Vec<f64> = (0..fc.values.len())
                .map(|i| if sup.valid[i] { fc.values[i] * sup.values[a][i] * x[i] } else { 0.0 })
                .collect();
            let (_, r) = integrate_out(&fc.grid, &integrand, &c.without(n))?;
            for (x, y) in acc.iter_mut().zip(&r) {
                *x += y;
            }
        }
        acc
    };

    let lhs: Vec<f64> = (0..grid.len()).map(|i| (e1[i] - e0[i]) / dt + div[i]).collect();
    let id = if target == n + 1 { LawId::EnergyFirst } else { LawId::EnergySecond };
    ResidualReport::build(id, grid, vec![lhs], vec![work], valid, &density.values, mid.time)
}

/// Energy law for the first group, from f^{n,n+1} and ⟨ξ^{n+2}⟩_{n,n+1}.
pub fn energy_residual_first(
    before: &DistributionField,
    after: &DistributionField,
    closure_mid: &MeanField,
) -> Result<ResidualReport> {
    let set = before.index_set();
    if set.rank() != 2 || !set.is_contiguous() {
        return domain(format!("energy law needs f over {{n,n+1}}, got {set}"));
    }
    energy_residual(before, after, set.as_slice()[1], std::slice::from_ref(closure_mid))
}

/// Energy law for ⟨ξ^{n+k}⟩ from f^{n,n+1,n+k} (f^{n,n+1} when `k = 1`).
pub fn energy_residual_second(
    before: &DistributionField,
    after: &DistributionField,
    k: u8,
    top_mean: &MeanField,
) -> Result<ResidualReport> {
    let set = before.index_set();
    let n = set.first().unwrap_or(0);
    let expected = KinematicIndexSet::new(if k == 1 { vec![n, n + 1] } else { vec![n, n + 1, n + k] })?;
    if set != expected {
        return domain(format!("gap {k} needs f over {expected}, got {set}"));
    }
    energy_residual(before, after, n + k, std::slice::from_ref(top_mean))
}

/// Motion equation of a rank-3 set from a pair of f over that set.
/// `supplied` carries means of orders above the set (closures).
pub fn rank3_motion_residual(
    eq: MotionEquation,
    before: &DistributionField,
    after: &DistributionField,
    supplied: &[MeanField],
) -> Result<ResidualReport> {
    let set = eq.set()?;
    if before.index_set() != set {
        return domain(format!(
            "motion equation needs f over {set}, got {}",
            before.index_set()
        ));
    }
    let law = eq.law()?;
    let inputs = LawInputs::from_pair(&law, before, after, supplied)?;
    evaluate_law(&law, &inputs, LawId::Motion(eq))
}

/// Row λ of the identity ladder on base {n..n+λ}:
/// `(1/f)∂P^{n+1+λ}/∂ξ^{n+λ} = ⟨ξ^{n+2+λ}⟩ − π⟨ξ^{n+1+λ}⟩`.
pub fn divergence_identity(lambda: u8, law: &MomentLaw, inputs: &LawInputs) -> Result<ResidualReport> {
    let n = law.base.first().unwrap_or(law.target);
    let expected = KinematicIndexSet::contiguous(n, lambda + 1)?;
    if law.base != expected || law.target != n + 1 + lambda {
        return domain(format!(
            "row {lambda} needs base {expected} and target {}",
            n + 1 + lambda
        ));
    }
    let terms = law_terms(law, inputs)?;
    let d = terms.transport.len();
    let (next, next_ok) = next_mean(law, inputs, &terms.grid, d)?;
    let valid: Vec<bool> = terms.valid.iter().zip(&next_ok).map(|(a, b)| *a && *b).collect();
    let rhs = next
        .iter()
        .zip(&terms.transport)
        .map(|(nx, t)| nx.iter().zip(t).map(|(nx, t)| nx - t).collect())
        .collect();
    ResidualReport::build(
        LawId::DivergenceIdentity { lambda },
        terms.grid,
        terms.divergence,
        rhs,
        valid,
        &inputs.density.values,
        terms.time,
    )
}

/// Identity ladder row λ from a pair of f over {n..n+1+λ} and the closure
/// ⟨ξ^{n+2+λ}⟩ over that set.
pub fn divergence_identity_check(
    lambda: u8,
    before: &DistributionField,
    after: &DistributionField,
    closure_mid: &MeanField,
) -> Result<ResidualReport> {
    let set = before.index_set();
    let n = set.first().unwrap_or(0);
    let expected = KinematicIndexSet::contiguous(n, lambda + 2)?;
    if set != expected {
        return domain(format!("row {lambda} needs f over {expected}, got {set}"));
    }
    let law = MomentLaw::new(KinematicIndexSet::contiguous(n, lambda + 1)?, n + 1 + lambda)?;
    let inputs = LawInputs::from_pair(&law, before, after, std::slice::from_ref(closure_mid))?;
    divergence_identity(lambda, &law, &inputs)
}

/// Parity tolerance relative to max|f|.
pub const PARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParityVerdict {
    Even,
    OddComponentDetected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityCheck {
    pub verdict: ParityVerdict,
    pub order: u8,
    /// max |f(…,−ξ,…) − f(…,ξ,…)|
    pub max_asymmetry: f64,
    pub scale: f64,
}

/// Tests evenness of `f` in the coordinates of `order` by reflecting every
/// component axis of that order.
pub fn parity_check(f: &DistributionField, order: u8) -> Result<ParityCheck> {
    let ag = f
        .grid
        .axis_grid(order)
        .ok_or_else(|| crate::error::ChainError::Domain(format!("order {order} is not gridded")))?;
    if ag.components.iter().any(|a| !a.is_symmetric()) {
        return config(format!(
            "parity check along order {order} needs a grid symmetric about 0"
        ));
    }
    let shape = f.grid.shape();
    let dims = f.grid.dims_of(order);
    let mut reflected = f.values.clone();
    for k in dims {
        let l = nd::Lines::new(&shape, k);
        let src = reflected.clone();
        for line in 0..l.count() {
            let b = l.start(line);
            for i in 0..l.n {
                reflected[b + i * l.stride] = src[b + (l.n - 1 - i) * l.stride];
            }
        }
    }
    let max_asymmetry = f
        .values
        .iter()
        .zip(&reflected)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = f.max_abs();
    let verdict = if max_asymmetry <= PARITY_TOLERANCE * scale {
        ParityVerdict::Even
    } else {
        ParityVerdict::OddComponentDetected
    };
    Ok(ParityCheck {
        verdict,
        order,
        max_asymmetry,
        scale,
    })
}

/// How the parity identity's hypothesis is established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParityHypothesis {
    /// Test evenness on the grid.
    Even,
    /// The caller asserts the covariance tensor is constant; evenness is
    /// still reported but does not gate the identity.
    ConstantTensor,
}

/// Inputs of the parity identity for row λ over C = {n..n+λ}.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityInputs {
    pub lambda: u8,
    /// Field tested for evenness in ξ^{n+λ}.
    pub parity_field: DistributionField,
    /// f^C at `t ± dt/2`.
    pub density_before: DistributionField,
    pub density_after: DistributionField,
    /// ⟨ξ^{n+1+λ}⟩_C at `t ± dt/2`.
    pub inner_before: MeanField,
    pub inner_after: MeanField,
    /// ⟨ξ^{n+2+λ}⟩_C at the midpoint.
    pub outer: MeanField,
    pub hypothesis: ParityHypothesis,
}

impl ParityInputs {
    /// From a pair of f over {n..n+1+λ} and the closure ⟨ξ^{n+2+λ}⟩ over it.
    pub fn from_pair(
        lambda: u8,
        before: &DistributionField,
        after: &DistributionField,
        closure_mid: &MeanField,
    ) -> Result<Self> {
        let set = before.index_set();
        let n = set.first().unwrap_or(0);
        let expected = KinematicIndexSet::contiguous(n, lambda + 2)?;
        if set != expected {
            return domain(format!("row {lambda} needs f over {expected}, got {set}"));
        }
        let top = n + 1 + lambda;
        let top_set = crate::kset![top];
        let mid = DistributionField::midpoint(before, after)?;
        Ok(Self {
            lambda,
            parity_field: mid.clone(),
            density_before: marginalize(before, &top_set)?,
            density_after: marginalize(after, &top_set)?,
            inner_before: mean_kinematic(before, top, &crate::kset![])?,
            inner_after: mean_kinematic(after, top, &crate::kset![])?,
            outer: nested_average(closure_mid, &mid, &top_set)?,
            hypothesis: ParityHypothesis::Even,
        })
    }
}

/// Outcome of [`parity_identity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParityOutcome {
    pub parity: ParityCheck,
    /// ⟨ξ^{n+2+λ}⟩ vs π⟨ξ^{n+1+λ}⟩ on {n..n+λ−1}; `None` when not asserted.
    pub identity: Option<ResidualReport>,
    /// ⟨ξ^{n+2+λ}⟩ vs the average of π_C⟨ξ^{n+1+λ}⟩_C over ξ^{n+λ}.
    pub reconstruction: Option<ResidualReport>,
}

/// Parity identity: if f is even in ξ^{n+λ}, then on B = {n..n+λ−1}
/// `⟨ξ^{n+2+λ}⟩_B = π_B⟨ξ^{n+1+λ}⟩_B`; also checks the reconstruction of
/// the left side as the average of `π_C⟨ξ^{n+1+λ}⟩_C` over ξ^{n+λ}.
pub fn parity_identity_check(inputs: &ParityInputs) -> Result<ParityOutcome> {
    let c = inputs.density_before.index_set();
    let n = c.first().ok_or_else(|| crate::error::ChainError::Domain("empty set".into()))?;
    let lambda = inputs.lambda;
    if c != KinematicIndexSet::contiguous(n, lambda + 1)? {
        return domain(format!("row {lambda} needs densities over {{n..n+{lambda}}}, got {c}"));
    }
    let axis = n + lambda;
    let parity = parity_check(&inputs.parity_field, axis)?;
    if parity.verdict != ParityVerdict::Even && inputs.hypothesis == ParityHypothesis::Even {
        return Ok(ParityOutcome {
            parity,
            identity: None,
            reconstruction: None,
        });
    }
    let dt = inputs.density_after.time - inputs.density_before.time;
    if !(dt > 0.0) {
        return domain(format!("density pair must be ordered in time, dt = {dt}"));
    }
    let drop = crate::kset![axis];
    let b = c.without(axis);
    let f_mid = DistributionField::midpoint(&inputs.density_before, &inputs.density_after)?;
    let lhs = nested_average(&inputs.outer, &f_mid, &drop)?;
    let inner_b0 = nested_average(&inputs.inner_before, &inputs.density_before, &drop)?;
    let inner_b1 = nested_average(&inputs.inner_after, &inputs.density_after, &drop)?;
    let adv_b = b
        .iter()
        .map(|a| {
            if b.contains(a + 1) {
                Ok(Advection::Coordinate(a + 1))
            } else {
                Ok(Advection::Mean(mean_kinematic(&f_mid, a + 1, &crate::kset![])?))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let d = lhs.components();
    let density_b = marginalize(&f_mid, &drop)?;
    let mut rhs = Vec::with_capacity(d);
    let mut valid = lhs.valid.clone();
    for comp in 0..d {
        let r = apply_pi(&inner_b0.component(comp), &inner_b1.component(comp), dt, &adv_b)?;
        for (v, ok) in valid.iter_mut().zip(&r.valid) {
            *v &= ok;
        }
        rhs.push(r.values);
    }
    let identity = ResidualReport::build(
        LawId::ParityMean { lambda },
        lhs.grid.clone(),
        lhs.values.clone(),
        rhs,
        valid,
        &density_b.values,
        f_mid.time,
    )?;

    let inner_mid = MeanField::midpoint(&inputs.inner_before, &inputs.inner_after)?;
    let adv_c = c
        .iter()
        .map(|a| {
            if c.contains(a + 1) {
                Advection::Coordinate(a + 1)
            } else {
                Advection::Mean(inner_mid.clone())
            }
        })
        .collect::<Vec<_>>();
    let mut pi_c = Vec::with_capacity(d);
    let mut pi_valid = inner_mid.valid.clone();
    for comp in 0..d {
        let r = apply_pi(
            &inputs.inner_before.component(comp),
            &inputs.inner_after.component(comp),
            dt,
            &adv_c,
        )?;
        for (v, ok) in pi_valid.iter_mut().zip(&r.valid) {
            *v &= ok;
        }
        pi_c.push(r.values);
    }
    let pi_mean = MeanField::new(
        inputs.outer.order,
        f_mid.grid.clone(),
        pi_c,
        pi_valid,
        f_mid.time,
    )?;
    let rec = nested_average(&pi_mean, &f_mid, &drop)?;
    let valid: Vec<bool> = lhs.valid.iter().zip(&rec.valid).map(|(a, b)| *a && *b).collect();
    let reconstruction = ResidualReport::build(
        LawId::ParityReconstruction { lambda },
        lhs.grid.clone(),
        lhs.values,
        rec.values,
        valid,
        &density_b.values,
        f_mid.time,
    )?;
    Ok(ParityOutcome {
        parity,
        identity: Some(identity),
        reconstruction: Some(reconstruction),
    })
}

/// A [`ScalarField`] view of one residual component.
pub fn residual_field(report: &ResidualReport, component: usize) -> Result<ScalarField> {
    ScalarField::new(
        report.grid.clone(),
        report.residual[component].clone(),
        report.valid.clone(),
        report.time,
    )
}

/// Broadcasts a base-grid report component onto a finer grid (for plotting
/// alongside the field).
pub fn residual_on(report: &ResidualReport, component: usize, grid: &Grid) -> Result<Vec<f64>> {
    broadcast(&report.grid, &report.residual[component], grid)
}
