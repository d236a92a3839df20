//! Library results checked against independent reference computations.

use std::f64::consts::PI;

use qbp::bp::{run_exact_bp, run_sliding_window};
use qbp::hastings::{filter_hat, filter_l1_norm, filter_time, half_line_moment, FilterSpec};
use qbp::{EdgeFactory, GraphModel};

const ZETA3: f64 = 1.202_056_903_159_594_3;

/// Brute-force marginal of the last spin of an Ising chain
/// `E(z) = Σ_edges −J z_u z_v − (hz/2)(z_u + z_v)`, index 0 ↔ z = +1.
fn ising_endpoint_marginal(n: usize, j: f64, hz: f64, beta: f64) -> [f64; 2] {
    let mut marg = [0.0; 2];
    for config in 0..(1u32 << n) {
        let z: Vec<f64> = (0..n)
            .map(|k| {
                if config >> (n - 1 - k) & 1 == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let energy: f64 = z
            .windows(2)
            .map(|w| -j * w[0] * w[1] - 0.5 * hz * (w[0] + w[1]))
            .sum();
        marg[(config & 1) as usize] += (-beta * energy).exp();
    }
    let total = marg[0] + marg[1];
    [marg[0] / total, marg[1] / total]
}

#[test]
fn diagonal_bp_equals_sum_product_marginals() {
    for n in 2..=7 {
        for &(j, hz) in &[(1.0, 0.0), (0.7, 0.4), (-1.3, 0.9)] {
            for &beta in &[0.5, 1.0, 2.0] {
                let model =
                    GraphModel::chain(n, 2, &EdgeFactory::ClassicalIsing { j, hz }, beta).unwrap();
                let target = n;
                let belief = run_exact_bp(&model, target).unwrap();
                let window = run_sliding_window(&model, target, 1).unwrap();
                let oracle = ising_endpoint_marginal(n, j, hz, beta);
                for (k, p) in oracle.iter().enumerate() {
                    assert!(
                        (belief.matrix()[(k, k)].re - p).abs() < 1e-9,
                        "n={n} j={j} beta={beta}"
                    );
                    assert!((window.matrix()[(k, k)].re - p).abs() < 1e-9);
                }
                assert!(belief.matrix()[(0, 1)].norm() < 1e-12);
            }
        }
    }
}

/// `(1/π) ∫_0^∞ f̂(ω) cos(ωt) dω` summed over half-periods of the cosine, with
/// the alternating partial sums accelerated by repeated averaging.
fn fourier_oracle(t: f64, beta: f64) -> f64 {
    let simpson = |a: f64, b: f64| -> f64 {
        let m = 400;
        let h = (b - a) / m as f64;
        let g = |w: f64| filter_hat(w, beta) * (w * t).cos();
        let mut s = g(a) + g(b);
        for i in 1..m {
            s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let period = PI / t;
    let mut edges = vec![0.0, 0.5 * period];
    for k in 1..=60 {
        edges.push((k as f64 + 0.5) * period);
    }
    let mut partial = Vec::new();
    let mut acc = 0.0;
    for w in edges.windows(2) {
        acc += simpson(w[0], w[1]);
        partial.push(acc);
    }
    let mut row = partial;
    while row.len() > 1 {
        row = row.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    row[0] / PI
}

#[test]
fn closed_form_filter_matches_fourier_inversion() {
    for &t in &[0.1, 1.0, 5.0] {
        for &beta in &[0.5, 1.0, 2.0] {
            let closed = filter_time(t, beta).unwrap();
            let oracle = fourier_oracle(t, beta);
            assert!(
                (closed - oracle).abs() < 1e-4,
                "t={t} beta={beta}: {closed} vs {oracle}"
            );
        }
    }
}

#[test]
fn filter_has_unit_mass() {
    for &beta in &[0.25, 0.5, 1.0, 2.0, 4.0] {
        assert!((filter_l1_norm(beta) - 1.0).abs() < 1e-6, "beta={beta}");
    }
}

#[test]
fn first_moment_matches_zeta_three() {
    // With x = πt/(2β): ∫_0^∞ t f_β(t) dt = (8β/π³) ∫_0^∞ x ln coth x dx.
    let target = 7.0 * ZETA3 / 16.0;
    for &beta in &[0.5, 1.0, 3.0] {
        let spec = FilterSpec {
            beta,
            s_steps: 1,
            t_max: 50.0 * beta,
            quad_tol: 1e-14,
        };
        let x_moment = half_line_moment(&spec, 1) * PI.powi(3) / (8.0 * beta);
        assert!((x_moment - target).abs() < 1e-6, "beta={beta}: {x_moment}");
        assert!(x_moment < 9.0 / 16.0);
    }
}
