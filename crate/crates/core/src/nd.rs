//! Strided kernels on row-major tensors: quadrature, differences and
//! line iteration along one flattened dimension.

/// Decomposition of a row-major shape around dimension `k`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lines {
    pub outer: usize,
    pub n: usize,
    pub stride: usize,
}

impl Lines {
    pub fn new(shape: &[usize], k: usize) -> Self {
        Self {
            outer: shape[..k].iter().product(),
            n: shape[k],
            stride: shape[k + 1..].iter().product(),
        }
    }

    pub fn count(&self) -> usize {
        self.outer * self.stride
    }

    /// Flat index of the first element of line `l`.
    pub fn start(&self, l: usize) -> usize {
        (l / self.stride) * self.n * self.stride + l % self.stride
    }
}

/// Weighted sum along dimension `k`; the output drops that dimension.
pub(crate) fn integrate_dim(values: &[f64], shape: &[usize], k: usize, w: &[f64]) -> Vec<f64> {
    let l = Lines::new(shape, k);
    let mut out = vec![0.0; l.count()];
    for o in 0..l.outer {
        let base = o * l.n * l.stride;
        let dst = &mut out[o * l.stride..(o + 1) * l.stride];
        for (i, &wi) in w.iter().enumerate() {
            let src = &values[base + i * l.stride..base + (i + 1) * l.stride];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += wi * s;
            }
        }
    }
    out
}

/// First derivative along `k`: central interior, one-sided second order at ends.
pub(crate) fn derivative_dim(values: &[f64], shape: &[usize], k: usize, h: f64) -> Vec<f64> {
    let l = Lines::new(shape, k);
    let mut out = vec![0.0; values.len()];
    let (n, s) = (l.n, l.stride);
    for line in 0..l.count() {
        let b = l.start(line);
        let at = |i: usize| values[b + i * s];
        if n == 2 {
            let d = (at(1) - at(0)) / h;
            out[b] = d;
            out[b + s] = d;
            continue;
        }
        out[b] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
        for i in 1..n - 1 {
            out[b + i * s] = (at(i + 1) - at(i - 1)) / (2.0 * h);
        }
        out[b + (n - 1) * s] = (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
    }
    out
}

/// Second derivative along `k`, second order everywhere where the line has ≥ 4 nodes.
pub(crate) fn second_derivative_dim(values: &[f64], shape: &[usize], k: usize, h: f64) -> Vec<f64> {
    let l = Lines::new(shape, k);
    let mut out = vec![0.0; values.len()];
    let (n, s) = (l.n, l.stride);
    let h2 = h * h;
    for line in 0..l.count() {
        let b = l.start(line);
        let at = |i: usize| values[b + i * s];
        if n < 3 {
            continue;
        }
        for i in 1..n - 1 {
            out[b + i * s] = (at(i + 1) - 2.0 * at(i) + at(i - 1)) / h2;
        }
        if n >= 4 {
            out[b] = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2;
            out[b + (n - 1) * s] =
                (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / h2;
        } else {
            out[b] = out[b + s];
            out[b + (n - 1) * s] = out[b + s];
        }
    }
    out
}

/// Validity after a difference stencil along `k`: a cell stays valid only if
/// every node its stencil touches is valid.
pub(crate) fn stencil_valid(valid: &[bool], shape: &[usize], k: usize, reach: usize) -> Vec<bool> {
    let l = Lines::new(shape, k);
    let mut out = vec![false; valid.len()];
    let (n, s) = (l.n, l.stride);
    let width = (2 * reach + 1).min(n);
    for line in 0..l.count() {
        let b = l.start(line);
        for i in 0..n {
            // window used by the stencil at node i (shifted inward at the ends)
            let lo = i.saturating_sub(reach).min(n - width);
            out[b + i * s] = (lo..lo + width).all(|j| valid[b + j * s]);
        }
    }
    out
}
