//! Continuous planar maps presented as evaluation callbacks.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pt, Mat2, Point2};

/// A continuous map of the plane known only through evaluation.
///
/// `jacobian` is optional; maps that are C^1 supply it for the regular-value
/// oracle and for branch continuation.
pub trait SampledMap: Send + Sync {
    fn eval(&self, p: Point2) -> Point2;

    fn jacobian(&self, _p: Point2) -> Option<Mat2> {
        None
    }

    /// An upper bound on the Lipschitz constant, when known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

impl<T: SampledMap + ?Sized> SampledMap for &T {
    fn eval(&self, p: Point2) -> Point2 {
        (**self).eval(p)
    }
    fn jacobian(&self, p: Point2) -> Option<Mat2> {
        (**self).jacobian(p)
    }
    fn lipschitz(&self) -> Option<f64> {
        (**self).lipschitz()
    }
}

impl<T: SampledMap + ?Sized> SampledMap for Box<T> {
    fn eval(&self, p: Point2) -> Point2 {
        (**self).eval(p)
    }
    fn jacobian(&self, p: Point2) -> Option<Mat2> {
        (**self).jacobian(p)
    }
    fn lipschitz(&self) -> Option<f64> {
        (**self).lipschitz()
    }
}

impl<T: SampledMap + ?Sized> SampledMap for Arc<T> {
    fn eval(&self, p: Point2) -> Point2 {
        (**self).eval(p)
    }
    fn jacobian(&self, p: Point2) -> Option<Mat2> {
        (**self).jacobian(p)
    }
    fn lipschitz(&self) -> Option<f64> {
        (**self).lipschitz()
    }
}

/// Wraps closures as a map.
pub struct FnMap<F, J = fn(Point2) -> Mat2> {
    f: F,
    jac: Option<J>,
}

impl<F: Fn(Point2) -> Point2 + Send + Sync> FnMap<F> {
    pub fn new(f: F) -> Self {
        FnMap { f, jac: None }
    }
}

impl<F, J> FnMap<F, J>
where
    F: Fn(Point2) -> Point2 + Send + Sync,
    J: Fn(Point2) -> Mat2 + Send + Sync,
{
    pub fn with_jacobian(f: F, jac: J) -> Self {
        FnMap { f, jac: Some(jac) }
    }
}

impl<F, J> SampledMap for FnMap<F, J>
where
    F: Fn(Point2) -> Point2 + Send + Sync,
    J: Fn(Point2) -> Mat2 + Send + Sync,
{
    fn eval(&self, p: Point2) -> Point2 {
        (self.f)(p)
    }
    fn jacobian(&self, p: Point2) -> Option<Mat2> {
        self.jac.as_ref().map(|j| j(p))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Identity;

impl SampledMap for Identity {
    fn eval(&self, p: Point2) -> Point2 {
        p
    }
    fn jacobian(&self, _p: Point2) -> Option<Mat2> {
        Some(Mat2::IDENTITY)
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `p -> A p + b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub linear: Mat2,
    pub offset: Point2,
}

impl Affine {
    pub fn new(linear: Mat2, offset: Point2) -> Self {
        Affine { linear, offset }
    }

    /// The affine map sending triangle `src` onto `dst` vertex by vertex.
    pub fn from_triangles(src: [Point2; 3], dst: [Point2; 3]) -> Option<Self> {
        let s = Mat2::from_cols(src[1] - src[0], src[2] - src[0]);
        let d = Mat2::from_cols(dst[1] - dst[0], dst[2] - dst[0]);
        let linear = d.mul(&s.inverse()?);
        Some(Affine {
            linear,
            offset: dst[0] - linear.apply(src[0]),
        })
    }

    #[inline]
    pub fn apply(&self, p: Point2) -> Point2 {
        self.linear.apply(p) + self.offset
    }
}

impl SampledMap for Affine {
    fn eval(&self, p: Point2) -> Point2 {
        self.apply(p)
    }
    fn jacobian(&self, _p: Point2) -> Option<Mat2> {
        Some(self.linear)
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.linear.operator_norm())
    }
}

/// `z -> sum a_k z^k + sum b_k conj(z)^k`, identifying the plane with C.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoly {
    pub holomorphic: Vec<Complex64>,
    #[serde(default)]
    pub antiholomorphic: Vec<Complex64>,
}

impl ComplexPoly {
    pub fn new(holomorphic: Vec<Complex64>, antiholomorphic: Vec<Complex64>) -> Self {
        ComplexPoly {
            holomorphic,
            antiholomorphic,
        }
    }

    /// `z^n`.
    pub fn monomial(n: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        c[n] = Complex64::new(1.0, 0.0);
        ComplexPoly::new(c, Vec::new())
    }

    pub fn square() -> Self {
        Self::monomial(2)
    }

    pub fn cube() -> Self {
        Self::monomial(3)
    }

    pub fn conj() -> Self {
        ComplexPoly::new(Vec::new(), vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
    }

    fn horner(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
        let mut v = Complex64::new(0.0, 0.0);
        let mut dv = Complex64::new(0.0, 0.0);
        for a in c.iter().rev() {
            dv = dv * z + v;
            v = v * z + a;
        }
        (v, dv)
    }
}

#[inline]
pub fn to_c(p: Point2) -> Complex64 {
    Complex64::new(p.x, p.y)
}

#[inline]
pub fn from_c(z: Complex64) -> Point2 {
    pt(z.re, z.im)
}

/// Real Jacobian from the Wirtinger derivatives `dh/dz` and `dh/dzbar`.
pub fn wirtinger_jacobian(hz: Complex64, hzbar: Complex64) -> Mat2 {
    let dx = hz + hzbar;
    let dy = Complex64::new(0.0, 1.0) * (hz - hzbar);
    Mat2::from_cols(from_c(dx), from_c(dy))
}

impl SampledMap for ComplexPoly {
    fn eval(&self, p: Point2) -> Point2 {
        let z = to_c(p);
        let (h, _) = Self::horner(&self.holomorphic, z);
        let (a, _) = Self::horner(&self.antiholomorphic, z.conj());
        from_c(h + a)
    }

    fn jacobian(&self, p: Point2) -> Option<Mat2> {
        let z = to_c(p);
        let (_, hz) = Self::horner(&self.holomorphic, z);
        let (_, az) = Self::horner(&self.antiholomorphic, z.conj());
        Some(wirtinger_jacobian(hz, az))
    }
}

/// A named map usable from the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    Identity,
    Square,
    Cube,
    Conj,
    Affine { linear: Mat2, offset: Point2 },
    Polynomial(ComplexPoly),
    /// A PL map stored as JSON; resolved by the caller.
    PlMap { path: String },
}

impl MapSpec {
    /// Builds the map, or `None` for [`MapSpec::PlMap`], which needs file access.
    pub fn builtin(&self) -> Option<Arc<dyn SampledMap>> {
        Some(match self {
            MapSpec::Identity => Arc::new(Identity),
            MapSpec::Square => Arc::new(ComplexPoly::square()),
            MapSpec::Cube => Arc::new(ComplexPoly::cube()),
            MapSpec::Conj => Arc::new(ComplexPoly::conj()),
            MapSpec::Affine { linear, offset } => Arc::new(Affine::new(*linear, *offset)),
            MapSpec::Polynomial(p) => Arc::new(p.clone()),
            MapSpec::PlMap { .. } => return None,
        })
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad number {t:?}: {e}")))
        })
        .collect()
}

fn parse_complex_list(s: &str) -> Result<Vec<Complex64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|c| match parse_floats(c)?.as_slice() {
            [re] => Ok(Complex64::new(*re, 0.0)),
            [re, im] => Ok(Complex64::new(*re, *im)),
            _ => Err(Error::InvalidArgument(format!("bad complex coefficient {c:?}"))),
        })
        .collect()
}

/// Accepted forms:
/// `identity`, `square`, `cube`, `conj`,
/// `affine:a,b,c,d,e,f` (matrix rows `[a b; c d]`, offset `(e, f)`),
/// `poly:re,im;re,im;...` (coefficients of `z^0, z^1, ...`), optionally
/// followed by `|re,im;...` for the `conj(z)^k` terms,
/// `plmap:<path>` or any path ending in `.json`.
impl FromStr for MapSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "identity" | "id" => Ok(MapSpec::Identity),
            "square" | "z2" => Ok(MapSpec::Square),
            "cube" | "z3" => Ok(MapSpec::Cube),
            "conj" => Ok(MapSpec::Conj),
            "affine" => match parse_floats(rest)?.as_slice() {
                [a, b, c, d, e, f] => Ok(MapSpec::Affine {
                    linear: Mat2::new(*a, *b, *c, *d),
                    offset: pt(*e, *f),
                }),
                _ => Err(Error::InvalidArgument("affine needs 6 numbers".into())),
            },
            "poly" => {
                let (h, a) = rest.split_once('|').unwrap_or((rest, ""));
                Ok(MapSpec::Polynomial(ComplexPoly::new(parse_complex_list(h)?, parse_complex_list(a)?)))
            }
            "plmap" => Ok(MapSpec::PlMap { path: rest.to_string() }),
            _ if s.ends_with(".json") => Ok(MapSpec::PlMap { path: s.to_string() }),
            _ => Err(Error::InvalidArgument(format!("unknown map {s:?}"))),
        }
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapSpec::Identity => write!(f, "identity"),
            MapSpec::Square => write!(f, "square"),
            MapSpec::Cube => write!(f, "cube"),
            MapSpec::Conj => write!(f, "conj"),
            MapSpec::Affine { linear, offset } => {
                let m = linear.0;
                write!(f, "affine:{},{},{},{},{},{}", m[0][0], m[0][1], m[1][0], m[1][1], offset.x, offset.y)
            }
            MapSpec::Polynomial(p) => {
                let list = |c: &[Complex64]| {
                    c.iter().map(|z| format!("{},{}", z.re, z.im)).collect::<Vec<_>>().join(";")
                };
                write!(f, "poly:{}", list(&p.holomorphic))?;
                if !p.antiholomorphic.is_empty() {
                    write!(f, "|{}", list(&p.antiholomorphic))?;
                }
                Ok(())
            }
            MapSpec::PlMap { path } => write!(f, "plmap:{path}"),
        }
    }
}

/// Central-difference Jacobian, used to cross-check analytic Jacobians.
pub fn finite_difference_jacobian(f: &dyn SampledMap, p: Point2, h: f64) -> Mat2 {
    let dx = (f.eval(p + pt(h, 0.0)) - f.eval(p - pt(h, 0.0))) * (0.5 / h);
    let dy = (f.eval(p + pt(0.0, h)) - f.eval(p - pt(0.0, h))) * (0.5 / h);
    Mat2::from_cols(dx, dy)
}
