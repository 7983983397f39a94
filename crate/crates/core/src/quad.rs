//! Composite Gauss-Legendre quadrature, 1-D and tensor-product, with
//! deterministic pairwise summation.

use std::sync::OnceLock;

use crate::par;

/// Gauss-Legendre nodes and weights on [-1, 1], computed once by Newton
/// iteration on the Legendre polynomial.
pub fn gauss_legendre(order: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    assert_eq!(order, 16, "only the order-16 rule is cached");
    CACHE.get_or_init(|| compute_gauss_legendre(16))
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = -x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Legendre P_n and its derivative at x via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss integration of `f` over `[a, b]` with `panels` panels.
pub fn integrate_1d(f: impl Fn(f64) -> f64 + Sync, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(16);
    let hp = (b - a) / panels as f64;
    let sums = par::map_indexed(panels, |p| {
        let lo = a + p as f64 * hp;
        let mut vals = [0.0; 16];
        for (q, v) in vals.iter_mut().enumerate() {
            let x = lo + 0.5 * hp * (nodes[q] + 1.0);
            *v = weights[q] * f(x);
        }
        0.5 * hp * par::pairwise_sum(&vals)
    });
    par::pairwise_sum(&sums)
}

/// Tensor-product composite Gauss integration over a box.
///
/// `panels[i]` panels per axis, 16 Gauss points per panel per axis. Panel
/// cells evaluate concurrently; the reduction is a pairwise tree so the
/// result does not depend on scheduling.
pub fn integrate_nd(
    f: impl Fn(&[f64]) -> f64 + Sync,
    lo: &[f64],
    hi: &[f64],
    panels: &[usize],
) -> f64 {
    let dim = lo.len();
    assert_eq!(hi.len(), dim);
    assert_eq!(panels.len(), dim);
    let (nodes, weights) = gauss_legendre(16);
    let hp: Vec<f64> = (0..dim)
        .map(|i| (hi[i] - lo[i]) / panels[i] as f64)
        .collect();
    let cell_count: usize = panels.iter().product();
    let pts_per_axis = 16usize;
    let cell_sums = par::map_indexed(cell_count, |cell| {
        // Decode the cell multi-index.
        let mut rem = cell;
        let mut cidx = vec![0usize; dim];
        for i in (0..dim).rev() {
            cidx[i] = rem % panels[i];
            rem /= panels[i];
        }
        let npts: usize = pts_per_axis.pow(dim as u32);
        let mut vals = vec![0.0; npts];
        let mut x = vec![0.0; dim];
        for (pt, val) in vals.iter_mut().enumerate() {
            let mut rem = pt;
            let mut w = 1.0;
            for i in (0..dim).rev() {
                let q = rem % pts_per_axis;
                rem /= pts_per_axis;
                let cell_lo = lo[i] + cidx[i] as f64 * hp[i];
                x[i] = cell_lo + 0.5 * hp[i] * (nodes[q] + 1.0);
                w *= 0.5 * hp[i] * weights[q];
            }
            *val = w * f(&x);
        }
        par::pairwise_sum(&vals)
    });
    par::pairwise_sum(&cell_sums)
}

/// Surface measure of the unit sphere in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    // 2 pi^{n/2} / Gamma(n/2)
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma(half)
}

fn gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7.
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + G + 0.5;
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}
