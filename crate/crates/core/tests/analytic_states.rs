use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlasov_chain::analytic::{
    laguerre, oscillator_grid, quantum_pressure_check, rank3_oscillator_state, wigner_oscillator,
};
use vlasov_chain::closure::PhysicalParams;
use vlasov_chain::conservation::{parity_check, ParityVerdict};
use vlasov_chain::entropy::negative_region;
use vlasov_chain::field::marginalize;
use vlasov_chain::moments::central_moment2;
use vlasov_chain::{kset, ChainError};

fn params() -> PhysicalParams {
    PhysicalParams::harmonic(1.0, 1.0, 1.0).unwrap()
}

fn explicit_laguerre(n: u32, z: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => 1.0 - z,
        2 => 1.0 - 2.0 * z + z * z / 2.0,
        3 => 1.0 - 3.0 * z + 1.5 * z * z - z.powi(3) / 6.0,
        4 => 1.0 - 4.0 * z + 3.0 * z * z - 2.0 * z.powi(3) / 3.0 + z.powi(4) / 24.0,
        _ => unreachable!(),
    }
}

#[test]
fn laguerre_recurrence_matches_explicit_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let z: f64 = rng.gen_range(0.0..12.0);
        for n in 0..=4 {
            let r = laguerre(n, z).unwrap();
            let e = explicit_laguerre(n, z);
            assert!((r - e).abs() <= 1e-12 * e.abs().max(1.0), "L_{n}({z}) = {r} vs {e}");
        }
    }
}

#[test]
fn second_laguerre_at_fixed_points() {
    assert_eq!(laguerre(2, 0.0).unwrap(), 1.0);
    assert_eq!(laguerre(2, 1.0).unwrap(), -0.5);
    assert_eq!(laguerre(2, 4.0).unwrap(), 1.0);
}

#[test]
fn laguerre_degree_is_capped() {
    assert!(matches!(laguerre(31, 1.0), Err(ChainError::Domain(_))));
}

#[test]
fn wigner_states_are_normalized() {
    let p = params();
    for n in 0..=3 {
        let f = wigner_oscillator(n, &p, oscillator_grid(&p, 256, 8.0).unwrap(), 0.0).unwrap();
        assert!((f.total() - 1.0).abs() < 1e-6, "n = {n}: {}", f.total());
    }
}

#[test]
fn wigner_states_are_even_in_both_axes() {
    let p = params();
    for n in 0..=3 {
        let f = wigner_oscillator(n, &p, oscillator_grid(&p, 65, 8.0).unwrap(), 0.0).unwrap();
        for order in [1, 2] {
            let c = parity_check(&f, order).unwrap();
            assert_eq!(c.verdict, ParityVerdict::Even);
            // nodes mirror up to one ulp, so the state does too
            assert!(c.max_asymmetry <= 1e-14 * c.scale, "n = {n}: {}", c.max_asymmetry);
        }
    }
}

#[test]
fn ground_state_has_no_negative_region_and_excited_states_do() {
    let p = params();
    for n in 0..=3 {
        let f = wigner_oscillator(n, &p, oscillator_grid(&p, 129, 8.0).unwrap(), 0.0).unwrap();
        assert_eq!(negative_region(&f).is_negative_empty(), n == 0, "n = {n}");
    }
}

#[test]
fn sign_follows_the_laguerre_factor() {
    let p = params();
    for n in 1..=3 {
        let f = wigner_oscillator(n, &p, oscillator_grid(&p, 129, 8.0).unwrap(), 0.0).unwrap();
        let x = f.grid.coordinate(0);
        let v = f.grid.coordinate(1);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..f.values.len() {
            let z = 2.0 * (x[i] * x[i] + v[i] * v[i]);
            let factor = sign * explicit_laguerre(n, z);
            if factor.abs() > 1e-8 && f.values[i].abs() > 1e-300 {
                assert_eq!(f.values[i] > 0.0, factor > 0.0, "n = {n}, z = {z}");
            }
        }
    }
}

#[test]
fn rank3_state_marginal_is_the_wigner_state() {
    let p = params();
    for n in 0..=3 {
        let grid = oscillator_grid(&p, 97, 8.0).unwrap();
        let w = wigner_oscillator(n, &p, grid.clone(), 0.0).unwrap();
        let s = rank3_oscillator_state(n, &p, grid, 0.0).unwrap();
        let scale = w.max_abs();
        for (a, b) in s.base.values.iter().zip(&w.values) {
            assert!((a - b).abs() <= 1e-12 * scale, "n = {n}: {a} vs {b}");
        }
        assert_eq!(s.top_order, 3);
        assert!(s.central_moment_top().unwrap().values[0].iter().all(|v| *v == 0.0));
    }
}

#[test]
fn quantum_pressure_of_ground_state_converges() {
    let p = params();
    let norms: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&pts| {
            let f = wigner_oscillator(0, &p, oscillator_grid(&p, pts, 8.0).unwrap(), 0.0).unwrap();
            let f1 = marginalize(&f, &kset![2]).unwrap();
            let pq = central_moment2(&f, 2, 2, &kset![2]).unwrap();
            quantum_pressure_check(&f1, &pq, &p).unwrap().residual_norm
        })
        .collect();
    for w in norms.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "norms {norms:?}");
    }
}
