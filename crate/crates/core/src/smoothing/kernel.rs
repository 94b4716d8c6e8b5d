use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pt, Point2};

/// Unnormalized bump `exp(-1/(1-|u|^2))` on the open unit disk.
#[inline]
pub fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss-Legendre on `[a, b]` split into `panels` equal pieces.
pub fn composite_gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = a + h * (p as f64 + 0.5);
        for (xi, wi) in x.iter().zip(&w) {
            sum += wi * f(mid + 0.5 * h * xi);
        }
    }
    0.5 * h * sum
}

/// `omega(u) = c exp(-1/(1-|u|^2))` on the unit disk, rescaled to radius
/// `delta` as `omega_delta(x) = delta^-2 omega(x / delta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpKernel {
    pub delta: f64,
    pub c: f64,
}

/// The normalizing constant `c` of the unit bump.
///
/// In polar form the mass is `pi * int_0^1 exp(-1/t) dt`, which is smooth
/// up to `t = 0` (all derivatives vanish there), so composite Gauss-Legendre
/// converges to machine precision.
pub fn bump_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let e = composite_gauss(|t| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 }, 0.0, 1.0, 16, 32);
        1.0 / (PI * e)
    })
}

pub fn kernel_normalize(delta: f64) -> Result<BumpKernel> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("kernel radius must be positive, got {delta}")));
    }
    Ok(BumpKernel { delta, c: bump_constant() })
}

impl BumpKernel {
    /// `omega_delta(x)`.
    pub fn eval(&self, x: Point2) -> f64 {
        let d2 = self.delta * self.delta;
        self.c * bump(x.norm_sq() / d2) / d2
    }

    /// Mass of `omega_delta` by the raw (unnormalized) polar rule of the
    /// given order.
    pub fn mass(&self, order: usize) -> Result<f64> {
        let rule = PolarRule::get(order)?;
        Ok(self.c * rule.raw_mass)
    }
}

/// Tensor Gauss-Legendre rule on the unit disk in polar coordinates, with
/// kernel weights folded in.
///
/// `weights` sum to one exactly (up to rounding) and `grad_weights` are
/// rescaled so that linear maps have exactly the identity derivative; both
/// corrections are of the size of the raw quadrature error.
#[derive(Clone, Debug)]
pub struct PolarRule {
    pub order: usize,
    pub nodes: Vec<Point2>,
    pub weights: Vec<f64>,
    /// `c * grad omega(u_k)` times the area weight.
    pub grad_weights: Vec<Point2>,
    /// `sum_k area_k * bump(u_k)`, before normalization.
    pub raw_mass: f64,
}

const MAX_ORDER_LOG: usize = 10;

impl PolarRule {
    /// Shared rule for a power-of-two order between 2 and 1024.
    pub fn get(order: usize) -> Result<&'static PolarRule> {
        static RULES: [OnceLock<PolarRule>; MAX_ORDER_LOG + 1] = [const { OnceLock::new() }; MAX_ORDER_LOG + 1];
        if !order.is_power_of_two() || !(2..=1 << MAX_ORDER_LOG).contains(&order) {
            return Err(Error::InvalidArgument(format!(
                "quadrature order must be a power of two in 2..=1024, got {order}"
            )));
        }
        Ok(RULES[order.trailing_zeros() as usize].get_or_init(|| PolarRule::build(order)))
    }

    fn build(n: usize) -> PolarRule {
        let (x, w) = gauss_legendre(n);
        let mut nodes = Vec::with_capacity(n * n);
        let mut area = Vec::with_capacity(n * n);
        for (xr, wr) in x.iter().zip(&w) {
            let r = 0.5 * (xr + 1.0);
            for (xt, wt) in x.iter().zip(&w) {
                let th = PI * (xt + 1.0);
                nodes.push(pt(r * th.cos(), r * th.sin()));
                // dr = dx / 2, dtheta = pi dx, area element r dr dtheta
                area.push(0.5 * wr * PI * wt * r);
            }
        }
        let c = bump_constant();
        let bumps: Vec<f64> = nodes.iter().map(|u| bump(u.norm_sq())).collect();
        let raw_mass: f64 = area.iter().zip(&bumps).map(|(a, b)| a * b).sum();
        let weights: Vec<f64> = area.iter().zip(&bumps).map(|(a, b)| a * b / raw_mass).collect();
        let mut grad_weights: Vec<Point2> = nodes
            .iter()
            .zip(&area)
            .zip(&bumps)
            .map(|((u, a), b)| {
                let s = 1.0 - u.norm_sq();
                *u * (-2.0 * c * a * b / (s * s))
            })
            .collect();
        // -int u (x) grad omega = identity; enforce it on the trace.
        let trace: f64 = nodes.iter().zip(&grad_weights).map(|(u, g)| -u.dot(*g)).sum();
        for g in &mut grad_weights {
            *g = *g * (2.0 / trace);
        }
        PolarRule {
            order: n,
            nodes,
            weights,
            grad_weights,
            raw_mass,
        }
    }
}

/// Midpoint-rule mass of the unit bump on a Cartesian grid; an oracle
/// independent of the polar rule.
pub fn cartesian_bump_mass(c: f64, n: usize) -> f64 {
    let h = 2.0 / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let x = -1.0 + h * (i as f64 + 0.5);
        for j in 0..n {
            let y = -1.0 + h * (j as f64 + 0.5);
            sum += bump(x * x + y * y);
        }
    }
    c * sum * h * h
}

#[cfg(test)]
mod tests {
    use std::f64::consts::TAU;

    use super::*;

    /// Exponential integral `E_1(1)`.
    const E1_ONE: f64 = 0.219_383_934_395_520_3;

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, d: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if d == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                step(f, a, m, fa, flm, fm, left, tol / 2.0, d - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, d - 1)
            }
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        step(f, a, b, fa, fm, fb, whole, tol, depth)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 32] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((q - exact).abs() < 1e-13, "n={n}");
            let even = 2 * n - 2;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(even as i32)).sum();
            assert!((q - 2.0 / (even as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn constant_matches_two_independent_rules() {
        let c = bump_constant();
        // radial form 2 pi int r exp(-1/(1-r^2)) dr by adaptive Simpson
        let radial = adaptive_simpson(&|r| r * bump(r * r), 0.0, 1.0, 1e-15, 40);
        let c_simpson = 1.0 / (TAU * radial);
        assert!((c - c_simpson).abs() < 1e-8, "{c} vs {c_simpson}");
        // closed form: int_0^1 exp(-1/t) dt = e^-1 - E_1(1)
        let c_closed = 1.0 / (PI * ((-1.0f64).exp() - E1_ONE));
        assert!((c - c_closed).abs() < 1e-10, "{c} vs {c_closed}");
        assert!((c - 2.1436).abs() < 1e-4);
    }

    #[test]
    fn kernel_has_unit_mass() {
        for delta in [1.0, 0.5, 1e-3] {
            let k = kernel_normalize(delta).unwrap();
            for order in [32, 64] {
                assert!((k.mass(order).unwrap() - 1.0).abs() < 1e-8, "delta={delta} order={order}");
            }
        }
        assert!((cartesian_bump_mass(bump_constant(), 2000) - 1.0).abs() < 1e-6);
        assert!(kernel_normalize(0.0).is_err());
    }

    #[test]
    fn scaled_kernel_mass_by_change_of_variables() {
        let k = kernel_normalize(0.5).unwrap();
        let n = 800;
        let h = 2.0 * k.delta / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = pt(-k.delta + h * (i as f64 + 0.5), -k.delta + h * (j as f64 + 0.5));
                sum += k.eval(p);
            }
        }
        assert!((sum * h * h - 1.0).abs() < 1e-5);
        assert_eq!(k.eval(pt(0.5, 0.0)), 0.0);
        assert!(k.eval(pt(0.1, 0.2)) > 0.0);
    }

    #[test]
    fn rule_reproduces_moments() {
        let r = PolarRule::get(32).unwrap();
        let total: f64 = r.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        let first: Point2 = r.nodes.iter().zip(&r.weights).fold(Point2::ORIGIN, |s, (u, w)| s + *u * *w);
        assert!(first.norm() < 1e-15);
        let g: Point2 = r.grad_weights.iter().fold(Point2::ORIGIN, |s, g| s + *g);
        assert!(g.norm() < 1e-12);
        assert!(PolarRule::get(24).is_err());
    }
}
