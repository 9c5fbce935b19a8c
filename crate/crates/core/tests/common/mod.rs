#![allow(dead_code)]

use nalgebra::DMatrix;
use nvreadout::classify::ShallowNet;
use nvreadout::nvmodel::{LevelMatrix, NUM_LEVELS};

/// Levels reachable from `entry` through nonzero couplings of `h`.
pub fn reachable(h: &LevelMatrix, entry: usize) -> Vec<usize> {
    let mut seen = vec![entry];
    let mut k = 0;
    while k < seen.len() {
        let i = seen[k];
        for j in 0..NUM_LEVELS {
            if h[(i, j)] != 0.0 && !seen.contains(&j) {
                seen.push(j);
            }
        }
        k += 1;
    }
    seen.sort_unstable();
    seen
}

/// Time-averaged populations from integrating i dψ/dt = H ψ with classic RK4,
/// starting in `entry`. The state is renormalized after every step and the
/// average runs over `periods` periods of the slowest coupled pair.
pub fn schrodinger_average(h: &LevelMatrix, entry: usize, periods: f64, steps_per_fast_period: f64) -> Vec<f64> {
    let idx = reachable(h, entry);
    let n = idx.len();
    let mut out = vec![0.0; NUM_LEVELS];
    if n == 1 {
        out[entry] = 1.0;
        return out;
    }
    // Shift by the entry energy: a global phase, invisible in populations.
    let shift = h[(entry, entry)];
    let sub: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| idx.iter().map(|&j| h[(i, j)] - if i == j { shift } else { 0.0 }).collect())
        .collect();

    let mut slow = f64::INFINITY;
    for a in 0..n {
        for b in 0..n {
            if a != b && sub[a][b] != 0.0 {
                slow = slow.min((sub[a][a] - sub[b][b]).abs());
            }
        }
    }
    let fast = (0..n).map(|a| sub[a].iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max) * 2.0;
    assert!(slow > 0.0 && slow.is_finite(), "coupled pair without detuning");
    let t_total = periods * 2.0 * std::f64::consts::PI / slow;
    let dt = 2.0 * std::f64::consts::PI / fast / steps_per_fast_period;
    let steps = (t_total / dt).ceil() as usize;

    // psi = u + i v; du/dt = H v, dv/dt = -H u.
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    u[idx.iter().position(|&i| i == entry).unwrap()] = 1.0;
    let apply = |x: &[f64], y: &mut [f64]| {
        for a in 0..n {
            y[a] = (0..n).map(|b| sub[a][b] * x[b]).sum();
        }
    };
    let mut acc = vec![0.0; n];
    let (mut hu, mut hv) = (vec![0.0; n], vec![0.0; n]);
    let mut deriv = |u: &[f64], v: &[f64], du: &mut [f64], dv: &mut [f64]| {
        apply(v, &mut hv);
        apply(u, &mut hu);
        for a in 0..n {
            du[a] = hv[a];
            dv[a] = -hu[a];
        }
    };
    let z = || vec![0.0; n];
    let (mut k1u, mut k1v, mut k2u, mut k2v) = (z(), z(), z(), z());
    let (mut k3u, mut k3v, mut k4u, mut k4v) = (z(), z(), z(), z());
    let (mut tu, mut tv) = (z(), z());
    for _ in 0..steps {
        for a in 0..n {
            acc[a] += 0.5 * (u[a] * u[a] + v[a] * v[a]);
        }
        deriv(&u, &v, &mut k1u, &mut k1v);
        for a in 0..n {
            tu[a] = u[a] + 0.5 * dt * k1u[a];
            tv[a] = v[a] + 0.5 * dt * k1v[a];
        }
        deriv(&tu, &tv, &mut k2u, &mut k2v);
        for a in 0..n {
            tu[a] = u[a] + 0.5 * dt * k2u[a];
            tv[a] = v[a] + 0.5 * dt * k2v[a];
        }
        deriv(&tu, &tv, &mut k3u, &mut k3v);
        for a in 0..n {
            tu[a] = u[a] + dt * k3u[a];
            tv[a] = v[a] + dt * k3v[a];
        }
        deriv(&tu, &tv, &mut k4u, &mut k4v);
        let mut norm = 0.0;
        for a in 0..n {
            u[a] += dt / 6.0 * (k1u[a] + 2.0 * k2u[a] + 2.0 * k3u[a] + k4u[a]);
            v[a] += dt / 6.0 * (k1v[a] + 2.0 * k2v[a] + 2.0 * k3v[a] + k4v[a]);
            norm += u[a] * u[a] + v[a] * v[a];
        }
        let s = 1.0 / norm.sqrt();
        for a in 0..n {
            u[a] *= s;
            v[a] *= s;
            acc[a] += 0.5 * (u[a] * u[a] + v[a] * v[a]);
        }
    }
    for (a, &i) in idx.iter().enumerate() {
        out[i] = acc[a] / steps as f64;
    }
    out
}

/// Mean of a sample and the standard error of that mean.
pub fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Largest relative deviation between analytic and central-difference gradients.
pub fn gradient_error(net: &ShallowNet, x: &DMatrix<f64>, targets: &[usize]) -> f64 {
    let (_, g) = net.loss_and_gradient(x, targets);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut check = |analytic: f64, perturb: &dyn Fn(&mut ShallowNet, f64)| {
        let mut plus = net.clone();
        perturb(&mut plus, h);
        let mut minus = net.clone();
        perturb(&mut minus, -h);
        let numeric = (plus.loss(x, targets) - minus.loss(x, targets)) / (2.0 * h);
        let scale = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / scale);
    };
    for i in 0..net.w1.nrows() {
        for j in 0..net.w1.ncols() {
            check(g.w1[(i, j)], &|n, d| n.w1[(i, j)] += d);
        }
        check(g.b1[i], &|n, d| n.b1[i] += d);
    }
    for i in 0..2 {
        for j in 0..net.w2.ncols() {
            check(g.w2[(i, j)], &|n, d| n.w2[(i, j)] += d);
        }
        check(g.b2[i], &|n, d| n.b2[i] += d);
    }
    worst
}

