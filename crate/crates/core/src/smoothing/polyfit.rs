use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::certify::{classify_sample, grid_points, SampleZone};
use super::deltas::Deltas;
use super::mollify::MollifiedMap;
use crate::error::{Error, Result};
use crate::geometry::{BBox, Mat2, Point2};
use crate::maps::SampledMap;

/// Highest total degree tried by [`poly_fit_simultaneous`].
pub const MAX_FIT_DEGREE: usize = 12;

/// Values and Jacobians of a smooth map at scattered points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSamples {
    pub domain: BBox,
    pub points: Vec<Point2>,
    pub values: Vec<Point2>,
    pub jacobians: Vec<Mat2>,
}

impl FitSamples {
    /// Samples a map that supplies its own Jacobian.
    pub fn from_map(g: &dyn SampledMap, points: Vec<Point2>, domain: BBox) -> Result<Self> {
        let pairs: Vec<(Point2, Mat2)> = points
            .par_iter()
            .map(|&p| Ok((g.eval(p), g.jacobian(p).ok_or(Error::MissingJacobian)?)))
            .collect::<Result<_>>()?;
        let (values, jacobians) = pairs.into_iter().unzip();
        Ok(FitSamples {
            domain,
            points,
            values,
            jacobians,
        })
    }

    /// The mollified map on the `n x n` grid points of `|K|` outside the
    /// vertex balls `B_{2 delta1/3}(v)`.
    pub fn from_mollified(m: &MollifiedMap, deltas: &Deltas, n: usize) -> Result<Self> {
        let r = 2.0 * deltas.delta1 / 3.0;
        let domain = m.domain_bbox();
        let points: Vec<Point2> = grid_points(domain, n)
            .into_par_iter()
            .filter(|&x| classify_sample(m, r, x) == SampleZone::Included)
            .collect();
        let pairs: Vec<(Point2, Mat2)> = points
            .par_iter()
            .map(|&p| Ok((m.try_eval(p)?, m.try_jacobian(p)?)))
            .collect::<Result<_>>()?;
        let (values, jacobians) = pairs.into_iter().unzip();
        Ok(FitSamples {
            domain,
            points,
            values,
            jacobians,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `M = max |dg_i/dx_j|` over the samples.
    pub fn max_derivative(&self) -> f64 {
        self.jacobians.iter().map(|j| j.max_abs_entry()).fold(0.0, f64::max)
    }

    /// `min |J_g|` over the samples.
    pub fn min_abs_det(&self) -> f64 {
        self.jacobians.iter().map(|j| j.det().abs()).fold(f64::INFINITY, f64::min)
    }
}

/// Chebyshev values and derivatives `T_k(t), T_k'(t)` for `k <= n`.
fn chebyshev(n: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n + 1];
    let mut d = vec![0.0; n + 1];
    v[0] = 1.0;
    if n >= 1 {
        v[1] = t;
        d[1] = 1.0;
    }
    for k in 1..n {
        v[k + 1] = 2.0 * t * v[k] - v[k - 1];
        d[k + 1] = 2.0 * v[k] + 2.0 * t * d[k] - d[k - 1];
    }
    (v, d)
}

/// `(i, j)` with `i + j <= n`, by total degree then by `j`.
fn exponents(n: usize) -> Vec<(usize, usize)> {
    (0..=n).flat_map(|s| (0..=s).map(move |j| (s - j, j))).collect()
}

/// Two bivariate polynomials of total degree `degree` in the tensor
/// Chebyshev basis `T_i(s) T_j(t)` of the box `domain`, where `s, t` are the
/// affine coordinates sending the box to `[-1, 1]^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialMap2 {
    pub degree: usize,
    pub domain: BBox,
    /// Exponent pairs, aligned with the coefficient vectors.
    pub basis: Vec<(usize, usize)>,
    pub coefficients: [Vec<f64>; 2],
}

impl PolynomialMap2 {
    pub fn new(degree: usize, domain: BBox, coefficients: [Vec<f64>; 2]) -> Result<Self> {
        let basis = exponents(degree);
        if coefficients.iter().any(|c| c.len() != basis.len()) {
            return Err(Error::InvalidArgument(format!(
                "degree {degree} needs {} coefficients per component",
                basis.len()
            )));
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(Error::InvalidArgument("polynomial domain box is empty".into()));
        }
        Ok(PolynomialMap2 {
            degree,
            domain,
            basis,
            coefficients,
        })
    }

    fn local(&self, p: Point2) -> (f64, f64, f64, f64) {
        let b = &self.domain;
        let (sx, sy) = (2.0 / b.width(), 2.0 / b.height());
        (sx * (p.x - b.min.x) - 1.0, sy * (p.y - b.min.y) - 1.0, sx, sy)
    }

    /// Basis values and their `x` and `y` derivatives at `p`.
    fn rows(&self, p: Point2) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (s, t, sx, sy) = self.local(p);
        let (ts, dts) = chebyshev(self.degree, s);
        let (tt, dtt) = chebyshev(self.degree, t);
        let mut v = Vec::with_capacity(self.basis.len());
        let mut dx = Vec::with_capacity(self.basis.len());
        let mut dy = Vec::with_capacity(self.basis.len());
        for &(i, j) in &self.basis {
            v.push(ts[i] * tt[j]);
            dx.push(sx * dts[i] * tt[j]);
            dy.push(sy * ts[i] * dtt[j]);
        }
        (v, dx, dy)
    }

    pub fn eval_with_jacobian(&self, p: Point2) -> (Point2, Mat2) {
        let (v, dx, dy) = self.rows(p);
        let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
        let [cu, cv] = &self.coefficients;
        let value = Point2 {
            x: dot(&v, cu),
            y: dot(&v, cv),
        };
        (value, Mat2::new(dot(&dx, cu), dot(&dy, cu), dot(&dx, cv), dot(&dy, cv)))
    }
}

impl SampledMap for PolynomialMap2 {
    fn eval(&self, p: Point2) -> Point2 {
        self.eval_with_jacobian(p).0
    }

    fn jacobian(&self, p: Point2) -> Option<Mat2> {
        Some(self.eval_with_jacobian(p).1)
    }
}

/// Sampled consistency of `J_p` with `J_g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianAgreement {
    /// `min |J_g|` over the samples.
    pub source_floor: f64,
    /// `M`.
    pub max_derivative: f64,
    /// `max |J_p - J_g|`.
    pub max_det_difference: f64,
    /// `2 e (2 M + e)` for the measured derivative error `e`.
    pub det_bound: f64,
    /// `min J_p * sign(J_g)`.
    pub min_signed_det: f64,
    /// `J_p` has the sign of `J_g` at every sample.
    pub same_sign: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub map: PolynomialMap2,
    pub degree: usize,
    pub samples: usize,
    pub value_tol: f64,
    pub deriv_tol: f64,
    pub value_error: f64,
    pub deriv_error: f64,
    /// `(degree, value_error, deriv_error)` for every degree tried.
    pub history: Vec<(usize, f64, f64)>,
    pub jacobian: JacobianAgreement,
}

/// `min(2M, delta / (8M))` with `delta = min |J_g|` and `M` the largest
/// partial derivative: keeps `|J_p - J_g| <= 2e(2M + e) <= delta`.
pub fn derivative_tolerance(samples: &FitSamples) -> f64 {
    let m = samples.max_derivative();
    (2.0 * m).min(samples.min_abs_det() / (8.0 * m))
}

/// Joint least squares on values and first derivatives with equal weights,
/// raising the total degree from `degree` until the sampled value error is
/// below `value_tol` and the sampled derivative error (largest entry) below
/// `deriv_tol`.
pub fn poly_fit_simultaneous(samples: &FitSamples, degree: usize, value_tol: f64, deriv_tol: f64) -> Result<PolyFit> {
    poly_fit_up_to(samples, degree, MAX_FIT_DEGREE, value_tol, deriv_tol)
}

pub fn poly_fit_up_to(
    samples: &FitSamples,
    degree: usize,
    max_degree: usize,
    value_tol: f64,
    deriv_tol: f64,
) -> Result<PolyFit> {
    if !(value_tol > 0.0 && deriv_tol > 0.0) {
        return Err(Error::InvalidArgument("fit tolerances must be positive".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to fit".into()));
    }
    if let Some(p) = samples.points.iter().find(|p| !samples.domain.inflate(1e-12).contains(**p)) {
        return Err(Error::InvalidArgument(format!("sample {p} lies outside the fit box")));
    }
    let mut history = Vec::new();
    let mut last = None;
    for n in degree..=max_degree {
        let map = fit_degree(samples, n)?;
        let (ve, de) = fit_errors(&map, samples);
        history.push((n, ve, de));
        if ve < value_tol && de < deriv_tol {
            let jacobian = agreement(&map, samples, de);
            return Ok(PolyFit {
                map,
                degree: n,
                samples: samples.len(),
                value_tol,
                deriv_tol,
                value_error: ve,
                deriv_error: de,
                history,
                jacobian,
            });
        }
        last = Some((n, ve, de));
    }
    let (degree, value_error, deriv_error) = last.unwrap_or((degree, f64::NAN, f64::NAN));
    Err(Error::FitCap {
        degree,
        value_error,
        deriv_error,
    })
}

fn fit_degree(s: &FitSamples, n: usize) -> Result<PolynomialMap2> {
    let nb = exponents(n).len();
    let shell = PolynomialMap2::new(n, s.domain, [vec![0.0; nb], vec![0.0; nb]])?;
    let rows = 3 * s.len();
    let mut a = DMatrix::<f64>::zeros(rows, nb);
    let mut b = DMatrix::<f64>::zeros(rows, 2);
    for (k, p) in s.points.iter().enumerate() {
        let (v, dx, dy) = shell.rows(*p);
        for c in 0..nb {
            a[(3 * k, c)] = v[c];
            a[(3 * k + 1, c)] = dx[c];
            a[(3 * k + 2, c)] = dy[c];
        }
        let (g, j) = (s.values[k], s.jacobians[k].0);
        b[(3 * k, 0)] = g.x;
        b[(3 * k, 1)] = g.y;
        b[(3 * k + 1, 0)] = j[0][0];
        b[(3 * k + 1, 1)] = j[1][0];
        b[(3 * k + 2, 0)] = j[0][1];
        b[(3 * k + 2, 1)] = j[1][1];
    }
    let x = a
        .svd(true, true)
        .solve(&b, 1e-13)
        .map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))?;
    let coeffs = [x.column(0).iter().copied().collect(), x.column(1).iter().copied().collect()];
    PolynomialMap2::new(n, s.domain, coeffs)
}

/// Sup-sampled value error and largest entrywise derivative error.
pub fn fit_errors(p: &PolynomialMap2, s: &FitSamples) -> (f64, f64) {
    let mut ve = 0.0f64;
    let mut de = 0.0f64;
    for k in 0..s.len() {
        let (v, j) = p.eval_with_jacobian(s.points[k]);
        ve = ve.max(v.dist(s.values[k]));
        de = de.max(j.sub(&s.jacobians[k]).max_abs_entry());
    }
    (ve, de)
}

fn agreement(p: &PolynomialMap2, s: &FitSamples, e: f64) -> JacobianAgreement {
    let m = s.max_derivative();
    let mut diff = 0.0f64;
    let mut min_signed = f64::INFINITY;
    let mut same = true;
    for k in 0..s.len() {
        let jp = p.eval_with_jacobian(s.points[k]).1.det();
        let jg = s.jacobians[k].det();
        diff = diff.max((jp - jg).abs());
        let signed = jp * jg.signum();
        min_signed = min_signed.min(signed);
        same &= signed > 0.0;
    }
    JacobianAgreement {
        source_floor: s.min_abs_det(),
        max_derivative: m,
        max_det_difference: diff,
        det_bound: 2.0 * e * (2.0 * m + e),
        min_signed_det: min_signed,
        same_sign: same,
    }
}
