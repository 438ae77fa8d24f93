//! Node-centered uniform tensor grids over kinematic orders.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::index::KinematicIndexSet;

/// One uniform 1-D axis, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return config("axis bounds must be finite");
        }
        if min == max {
            return config("degenerate axis");
        }
        if min > max {
            return config(format!("non-monotone bounds: min {min} > max {max}"));
        }
        if points < 2 {
            return config(format!("axis needs at least 2 points, got {points}"));
        }
        Ok(Self { min, max, points })
    }

    /// Symmetric axis `[-half, half]`.
    pub fn symmetric(half: f64, points: usize) -> Result<Self> {
        Self::new(-half, half, points)
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    pub fn length(&self) -> f64 {
        self.max - self.min
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.points];
        w[0] = 0.5 * h;
        w[self.points - 1] = 0.5 * h;
        w
    }

    /// Reflection `i -> N-1-i` maps node to its negative.
    pub fn is_symmetric(&self) -> bool {
        (self.min + self.max).abs() <= 1e-12 * self.length()
    }
}

/// Grid for one kinematic order: one axis per vector component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisGrid {
    pub kinematic_index: u8,
    pub components: Vec<Axis>,
}

impl AxisGrid {
    pub fn new(kinematic_index: u8, components: Vec<Axis>) -> Result<Self> {
        if components.is_empty() {
            return config(format!("order {kinematic_index} has no components"));
        }
        Ok(Self {
            kinematic_index,
            components,
        })
    }

    /// Single-component axis.
    pub fn scalar(kinematic_index: u8, axis: Axis) -> Self {
        Self {
            kinematic_index,
            components: vec![axis],
        }
    }
}

/// Per-axis construction parameters for [`make_grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub index: u8,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default = "one")]
    pub components: usize,
}

fn one() -> usize {
    1
}

impl AxisSpec {
    /// One-component axis spec.
    pub fn new(index: u8, min: f64, max: f64, points: usize) -> Self {
        Self {
            index,
            min,
            max,
            points,
            components: 1,
        }
    }

    pub fn components(mut self, d: usize) -> Self {
        self.components = d;
        self
    }
}

/// Builds the axis grids and validates them as one tensor grid.
pub fn make_grid(specs: &[AxisSpec]) -> Result<Grid> {
    let axes = specs
        .iter()
        .map(|s| {
            let axis = Axis::new(s.min, s.max, s.points)?;
            if s.components == 0 {
                return config(format!("order {} needs at least one component", s.index));
            }
            AxisGrid::new(s.index, vec![axis; s.components])
        })
        .collect::<Result<Vec<_>>>()?;
    Grid::new(axes)
}

/// Flattened dimension of a grid: one (order, component) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dim {
    pub order: u8,
    pub component: usize,
    pub axis: Axis,
}

/// Tensor product of axis grids, ordered by ascending kinematic index,
/// components innermost. A grid with no axes is a single point (rank 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<AxisGrid>,
    #[serde(skip)]
    components_hint: Option<usize>,
}

impl Grid {
    pub fn new(axes: Vec<AxisGrid>) -> Result<Self> {
        let orders: Vec<u8> = axes.iter().map(|a| a.kinematic_index).collect();
        KinematicIndexSet::new(orders)?;
        if let Some(first) = axes.first() {
            let d = first.components.len();
            if axes.iter().any(|a| a.components.len() != d) {
                return config("component count must be uniform across orders");
            }
        }
        Ok(Self {
            axes,
            components_hint: None,
        })
    }

    /// Rank-0 grid; `components` records the vector width of fields living on it.
    pub fn point(components: usize) -> Self {
        Self {
            axes: Vec::new(),
            components_hint: Some(components),
        }
    }

    pub fn axes(&self) -> &[AxisGrid] {
        &self.axes
    }

    pub fn index_set(&self) -> KinematicIndexSet {
        KinematicIndexSet::new(self.axes.iter().map(|a| a.kinematic_index).collect::<Vec<_>>())
            .expect("validated at construction")
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    /// Vector components per order.
    pub fn components(&self) -> usize {
        self.axes
            .first()
            .map(|a| a.components.len())
            .or(self.components_hint)
            .unwrap_or(1)
    }

    pub fn dims(&self) -> Vec<Dim> {
        self.axes
            .iter()
            .flat_map(|a| {
                a.components.iter().enumerate().map(move |(c, &axis)| Dim {
                    order: a.kinematic_index,
                    component: c,
                    axis,
                })
            })
            .collect()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.dims().iter().map(|d| d.axis.points).collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_grid(&self, order: u8) -> Option<&AxisGrid> {
        self.axes.iter().find(|a| a.kinematic_index == order)
    }

    /// Position of (order, component) in the flattened dimension list.
    pub fn dim_index(&self, order: u8, component: usize) -> Option<usize> {
        self.dims()
            .iter()
            .position(|d| d.order == order && d.component == component)
    }

    pub fn dims_of(&self, order: u8) -> Vec<usize> {
        self.dims()
            .iter()
            .enumerate()
            .filter(|(_, d)| d.order == order)
            .map(|(k, _)| k)
            .collect()
    }

    /// Grid restricted to the orders in `keep`.
    pub fn restrict(&self, keep: &KinematicIndexSet) -> Result<Grid> {
        if !keep.is_subset(&self.index_set()) {
            return domain(format!("{keep} is not a subset of {}", self.index_set()));
        }
        let axes: Vec<AxisGrid> = self
            .axes
            .iter()
            .filter(|a| keep.contains(a.kinematic_index))
            .cloned()
            .collect();
        let mut g = Grid::new(axes)?;
        if g.axes.is_empty() {
            g.components_hint = Some(self.components());
        }
        Ok(g)
    }

    /// Same axes (components hint ignored).
    pub fn same_as(&self, other: &Grid) -> bool {
        self.axes == other.axes
    }

    pub fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            domain(format!(
                "grid mismatch in {what}: {} vs {}",
                self.index_set(),
                other.index_set()
            ))
        }
    }

    /// Coordinate of dimension `dim` at every node, row-major.
    pub fn coordinate(&self, dim: usize) -> Vec<f64> {
        let shape = self.shape();
        let dims = self.dims();
        let nodes = dims[dim].axis.nodes();
        let stride: usize = shape[dim + 1..].iter().product();
        let n = shape[dim];
        (0..self.len()).map(|i| nodes[(i / stride) % n]).collect()
    }

    /// Coordinate of (order, component); error if the order is not gridded.
    pub fn coordinate_of(&self, order: u8, component: usize) -> Result<Vec<f64>> {
        match self.dim_index(order, component) {
            Some(k) => Ok(self.coordinate(k)),
            None => domain(format!(
                "order {order} component {component} is not an axis of {}",
                self.index_set()
            )),
        }
    }

    /// Trapezoid cell weight (product over all dims) at every node.
    pub fn cell_weights(&self) -> Vec<f64> {
        let shape = self.shape();
        let per_dim: Vec<Vec<f64>> = self.dims().iter().map(|d| d.axis.weights()).collect();
        let mut out = vec![1.0; self.len()];
        for (k, w) in per_dim.iter().enumerate() {
            let stride: usize = shape[k + 1..].iter().product();
            let n = shape[k];
            for (i, o) in out.iter_mut().enumerate() {
                *o *= w[(i / stride) % n];
            }
        }
        out
    }

    /// For each node of `self`, the flat index of the matching node on `sub`,
    /// a grid over a subset of the orders with identical axes.
    pub fn projection_onto(&self, sub: &Grid) -> Result<Vec<usize>> {
        let set = self.index_set();
        let sub_set = sub.index_set();
        if !sub_set.is_subset(&set) {
            return domain(format!("{sub_set} is not a subset of {set}"));
        }
        for a in sub.axes() {
            if self.axis_grid(a.kinematic_index) != Some(a) {
                return domain(format!(
                    "axis {} differs between grids",
                    a.kinematic_index
                ));
            }
        }
        let shape = self.shape();
        let dims = self.dims();
        let sub_shape = sub.shape();
        // stride on `sub` for each dim of self (0 if dropped)
        let mut sub_strides = vec![0usize; dims.len()];
        let mut j = 0;
        for (k, d) in dims.iter().enumerate() {
            if sub_set.contains(d.order) {
                sub_strides[k] = sub_shape[j + 1..].iter().product();
                j += 1;
            }
        }
        let mut out = vec![0usize; self.len()];
        let mut counter = vec![0usize; shape.len()];
        let mut acc = 0usize;
        for o in out.iter_mut() {
            *o = acc;
            for k in (0..shape.len()).rev() {
                counter[k] += 1;
                acc += sub_strides[k];
                if counter[k] < shape[k] {
                    break;
                }
                acc -= sub_strides[k] * shape[k];
                counter[k] = 0;
            }
        }
        Ok(out)
    }
}
