//! Semi-Lagrangian transport sweeps with 4-point cubic Lagrange interpolation.

use crate::error::{ChainError, Result};
use crate::grid::Grid;
use crate::nd::Lines;

#[inline]
fn cubic_weights(a: f64) -> [f64; 4] {
    let am1 = a - 1.0;
    let am2 = a - 2.0;
    let ap1 = a + 1.0;
    [
        -a * am1 * am2 / 6.0,
        ap1 * am1 * am2 / 2.0,
        -ap1 * a * am2 / 2.0,
        ap1 * a * am1 / 6.0,
    ]
}

/// Interpolates `line` at fractional index `p`; nodes outside are zero.
#[inline]
fn interp_zero(line: &[f64], p: f64) -> f64 {
    let j = p.floor();
    let w = cubic_weights(p - j);
    let j = j as i64;
    let n = line.len() as i64;
    let mut s = 0.0;
    for (k, wk) in w.iter().enumerate() {
        let idx = j - 1 + k as i64;
        if idx >= 0 && idx < n {
            s += wk * line[idx as usize];
        }
    }
    s
}

/// Interpolates with the end values extended (used for velocity lines).
#[inline]
fn interp_clamped(line: &[f64], p: f64) -> f64 {
    let n = line.len();
    let p = p.clamp(0.0, (n - 1) as f64);
    let j = p.floor();
    let w = cubic_weights(p - j);
    let j = j as i64;
    let mut s = 0.0;
    for (k, wk) in w.iter().enumerate() {
        let idx = (j - 1 + k as i64).clamp(0, n as i64 - 1) as usize;
        s += wk * line[idx];
    }
    s
}

/// One step of `∂f/∂t + ∂(f u)/∂ξ = 0` along flattened dimension `dim`.
///
/// Lines with a velocity constant along the sweep are shifted rigidly
/// (sum-preserving away from the box edge); otherwise the foot of the
/// characteristic is found by a midpoint trace and the value is scaled by
/// the Jacobian `exp(−dt·∂u/∂ξ)` at the trace midpoint.
pub(crate) fn sweep(values: &[f64], grid: &Grid, dim: usize, velocity: &[f64], dt: f64) -> Result<Vec<f64>> {
    let dims = grid.dims();
    let axis = dims[dim].axis;
    let h = axis.spacing();
    let limit = axis.length() / 3.0;
    let vmax = velocity.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if vmax * dt.abs() > limit {
        return Err(ChainError::StepSize {
            order: dims[dim].order,
            displacement: vmax * dt.abs(),
            limit,
        });
    }
    let shape = grid.shape();
    let l = Lines::new(&shape, dim);
    let n = l.n;
    let mut out = vec![0.0; values.len()];
    let mut f = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut du = vec![0.0; n];
    let mut g = vec![0.0; n];
    for line in 0..l.count() {
        let b = l.start(line);
        for i in 0..n {
            f[i] = values[b + i * l.stride];
            u[i] = velocity[b + i * l.stride];
        }
        if u.iter().all(|&x| x == u[0]) {
            let p = -u[0] * dt / h;
            let j = p.floor();
            let w = cubic_weights(p - j);
            let j = j as i64;
            for (i, gi) in g.iter_mut().enumerate() {
                let mut s = 0.0;
                for (k, wk) in w.iter().enumerate() {
                    let idx = i as i64 + j - 1 + k as i64;
                    if idx >= 0 && idx < n as i64 {
                        s += wk * f[idx as usize];
                    }
                }
                *gi = s;
            }
        } else {
            line_derivative(&u, h, &mut du);
            for i in 0..n {
                let pm = i as f64 - 0.5 * dt * u[i] / h;
                let um = interp_clamped(&u, pm);
                let dum = interp_clamped(&du, pm);
                let foot = i as f64 - dt * um / h;
                g[i] = interp_zero(&f, foot) * (-dt * dum).exp();
            }
        }
        for i in 0..n {
            out[b + i * l.stride] = g[i];
        }
    }
    Ok(out)
}

fn line_derivative(u: &[f64], h: f64, out: &mut [f64]) {
    let n = u.len();
    if n == 2 {
        out[0] = (u[1] - u[0]) / h;
        out[1] = out[0];
        return;
    }
    out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    for i in 1..n - 1 {
        out[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
}
