#![allow(dead_code)] // each test target uses a different subset

//! Shared test oracles, independent of the library's solution paths.

use magspec::geometry::DiscretizedManifold;
use magspec::magnetic::MagneticPotential;

/// Exact discrete dispersion of the uniform magnetic cycle:
/// lambda_j = (2/h sin((2 pi j / L + A) h / 2))^2, ascending, first k.
pub fn circle_discrete_spectrum(l: f64, n: usize, a: f64, k: usize) -> Vec<f64> {
    let h = l / n as f64;
    let mut vals: Vec<f64> = (0..n)
        .map(|j| {
            let mode = 2.0 * std::f64::consts::PI * j as f64 / l;
            let s = (2.0 / h) * ((mode + a) * h / 2.0).sin();
            s * s
        })
        .collect();
    vals.sort_by(f64::total_cmp);
    vals.truncate(k);
    vals
}

/// Continuum circle spectrum min over modes of (2 pi j / L + A)^2, first k.
pub fn circle_continuum_spectrum(l: f64, a: f64, k: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = (-((k as i64) + 2)..=(k as i64) + 2)
        .map(|j| {
            let m = 2.0 * std::f64::consts::PI * j as f64 / l + a;
            m * m
        })
        .collect();
    vals.sort_by(f64::total_cmp);
    vals.truncate(k);
    vals
}

/// Paper closed form for the circle one-way Cheeger constant:
/// min{2/L, min_j |2 pi j / L - A|}.
pub fn circle_h1_closed_form(l: f64, a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let nearest = (a * l / two_pi).round();
    let dist = (two_pi * nearest / l - a).abs();
    (2.0 / l).min(dist)
}

fn wrap(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = x % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

fn cycle_objective(qs: &[f64], thetas: &[f64], psi: &[f64]) -> f64 {
    let n = psi.len();
    (0..n)
        .map(|i| qs[i] * wrap(thetas[i] + psi[(i + 1) % n] - psi[i]).abs())
        .sum()
}

/// Exact minimum over a product grid of per-vertex candidate angles, by
/// dynamic programming over the chain with psi_0 pinned to its candidates.
fn dp_over_grids(qs: &[f64], thetas: &[f64], grids: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = grids.len();
    let mut best_val = f64::INFINITY;
    let mut best_psi = vec![0.0; n];
    for &psi0 in &grids[0] {
        // dp[s] = cheapest cost of the chain up to vertex i given psi_i = s.
        let mut dp: Vec<f64> = grids[1]
            .iter()
            .map(|&s| qs[0] * wrap(thetas[0] + s - psi0).abs())
            .collect();
        let mut back: Vec<Vec<usize>> = Vec::with_capacity(n);
        for i in 1..n - 1 {
            let mut next = vec![f64::INFINITY; grids[i + 1].len()];
            let mut arg = vec![0usize; grids[i + 1].len()];
            for (t, &st) in grids[i + 1].iter().enumerate() {
                for (s, &ss) in grids[i].iter().enumerate() {
                    let c = dp[s] + qs[i] * wrap(thetas[i] + st - ss).abs();
                    if c < next[t] {
                        next[t] = c;
                        arg[t] = s;
                    }
                }
            }
            back.push(arg);
            dp = next;
        }
        for (s, &ss) in grids[n - 1].iter().enumerate() {
            let total = dp[s] + qs[n - 1] * wrap(thetas[n - 1] + psi0 - ss).abs();
            if total < best_val {
                best_val = total;
                // reconstruct
                let mut states = vec![0usize; n];
                states[n - 1] = s;
                for i in (1..n - 1).rev() {
                    states[i] = back[i - 1][states[i + 1]];
                }
                best_psi[0] = psi0;
                for i in 1..n {
                    best_psi[i] = grids[i][states[i]];
                }
            }
        }
    }
    (best_val, best_psi)
}

/// Brute-force frustration of a single cycle (n <= 8): exhaustive grid search
/// over psi in (2 pi / 96) Z^n (via chain DP, which enumerates the same
/// minimum), followed by local polish on nested refined grids.
pub fn brute_force_cycle_frustration(qs: &[f64], thetas: &[f64]) -> f64 {
    let n = qs.len();
    assert!(n >= 3 && n <= 8);
    let coarse = 96usize;
    let two_pi = 2.0 * std::f64::consts::PI;
    let full: Vec<f64> = (0..coarse).map(|i| two_pi * i as f64 / coarse as f64).collect();
    // Global phase invariance pins psi_0 = 0 without loss.
    let mut grids: Vec<Vec<f64>> = vec![vec![0.0]];
    grids.extend(std::iter::repeat(full).take(n - 1));
    let (mut val, mut psi) = dp_over_grids(qs, thetas, &grids);

    let mut spacing = two_pi / coarse as f64;
    for _ in 0..4 {
        let window = 16usize;
        let refined: Vec<Vec<f64>> = psi
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if i == 0 {
                    vec![0.0]
                } else {
                    (-(window as i64)..=window as i64)
                        .map(|d| c + spacing * d as f64 / window as f64)
                        .collect()
                }
            })
            .collect();
        let (v, p) = dp_over_grids(qs, thetas, &refined);
        if v < val {
            val = v;
            psi = p;
        }
        spacing /= window as f64;
    }
    debug_assert!((cycle_objective(qs, thetas, &psi) - val).abs() < 1e-12);
    val
}

/// Extract (frustration weights, oriented phases) of the cycle through the
/// given vertices, following edges between consecutive vertices.
pub fn cycle_data(
    m: &DiscretizedManifold,
    p: &MagneticPotential,
    vertices: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let n = vertices.len();
    let mut qs = Vec::with_capacity(n);
    let mut thetas = Vec::with_capacity(n);
    for i in 0..n {
        let (u, v) = (vertices[i], vertices[(i + 1) % n]);
        let inc = m
            .adjacency(u)
            .iter()
            .find(|inc| inc.neighbor == v)
            .unwrap_or_else(|| panic!("no edge {u} -> {v}"));
        qs.push(m.edges[inc.edge].frustration_weight);
        thetas.push(p.phase_from(inc.forward, inc.edge));
    }
    (qs, thetas)
}
