//! End-to-end smoothing of a locally injective map: PL approximation,
//! mollification with a certified Jacobian sign, and a polynomial fit.
//!
//! The error budget `eps` is split as `eps/2` for the PL stage, `eps/4` for
//! mollification and `eps/4` for the polynomial values, so the three
//! sampled stage errors add up to less than `eps`.

use std::fs;
use std::path::{Path, PathBuf};

use degree_forge::geometry::SimplicialComplex;
use degree_forge::maps::SampledMap;
use degree_forge::pl_approx::{pl_approximate, InjectivityCertificate, PlApproximation};
use degree_forge::smoothing::{
    certify_jacobian, choose_deltas, classify_sample, derivative_tolerance, extend_domain, grid_points,
    kernel_normalize, majority_orientation, poly_fit_up_to, Deltas, FitSamples, JacobianAgreement,
    JacobianCertificate, JacobianVerdict, MollifiedMap, PolyFit, PolynomialMap2, SampleZone,
};
use serde::{Deserialize, Serialize};

use crate::checks::{sampled_error, SampledError};
use crate::error::{io_err, CliError, Result};
use crate::inputs::{load_complex, load_map, write_json};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Lattice size per side for the Jacobian certificate.
    pub certify: usize,
    /// Lattice size per side for the polynomial fit samples.
    pub fit: usize,
    /// Lattice size per side for the sampled `|h * omega - h|`.
    pub smoothing_error: usize,
    /// Random points for the final `|f - p|`.
    pub error_samples: usize,
    pub max_degree: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            certify: 200,
            fit: 120,
            smoothing_error: 100,
            error_samples: 10_000,
            max_degree: degree_forge::smoothing::MAX_FIT_DEGREE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Map spec, e.g. `square` or `poly:0,0;0,0;1,0`.
    pub map: String,
    /// Complex spec, e.g. `annulus-graded:0.2,1,8`, or a complex JSON file.
    pub complex: String,
    pub eps: f64,
    pub inj_radius: f64,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Seeds the random test points only.
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(map: &str, complex: &str, eps: f64, inj_radius: f64) -> Self {
        PipelineConfig {
            map: map.into(),
            complex: complex.into(),
            eps,
            inj_radius,
            grids: GridConfig::default(),
            output_dir: None,
            seed: 0,
        }
    }

    /// TOML for `*.toml`, JSON otherwise.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let parse = |message: String| CliError::Parse {
            path: path.to_path_buf(),
            message,
        };
        let cfg: PipelineConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| parse(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| parse(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("eps", self.eps), ("inj_radius", self.inj_radius)];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(CliError::Input(format!("{name} must be positive, got {v}")));
        }
        let g = &self.grids;
        if g.certify < 2 || g.fit < 2 || g.smoothing_error < 2 || g.error_samples == 0 || g.max_degree == 0 {
            return Err(CliError::Input("grid sizes must be at least 2 and sample counts positive".into()));
        }
        Ok(())
    }
}

/// How `eps` is spent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub pl: f64,
    pub smoothing: f64,
    pub polynomial: f64,
}

impl ErrorBudget {
    pub fn split(eps: f64) -> Self {
        ErrorBudget {
            pl: eps / 2.0,
            smoothing: eps / 4.0,
            polynomial: eps / 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    PlApproximation,
    Injectivity,
    Extension,
    Deltas,
    JacobianCertificate,
    Polyfit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PipelineStatus {
    Completed,
    Halted { stage: Stage, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlSummary {
    pub refinement_level: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub max_triangle_diameter: f64,
    pub max_image_diameter: f64,
    pub skeleton_edges: usize,
    pub straight_edges: usize,
    pub extended_triangles: usize,
    pub sampled_error: f64,
    pub injectivity: InjectivityCertificate,
}

impl From<&PlApproximation> for PlSummary {
    fn from(a: &PlApproximation) -> Self {
        PlSummary {
            refinement_level: a.refinement_level,
            vertices: a.map.complex().num_vertices(),
            triangles: a.map.complex().num_triangles(),
            max_triangle_diameter: a.max_triangle_diameter,
            max_image_diameter: a.max_image_diameter,
            skeleton_edges: a.skeleton_edges,
            straight_edges: a.straight_edges,
            extended_triangles: a.extended_triangles,
            sampled_error: a.sampled_error,
            injectivity: a.certificate.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSummary {
    pub deltas: Deltas,
    pub certificate: JacobianCertificate,
    /// Sampled `max |h * omega - h|` on a lattice over `|K|`.
    pub sampled_error: f64,
    pub error_grid: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub degree: usize,
    pub samples: usize,
    pub value_tol: f64,
    pub deriv_tol: f64,
    pub value_error: f64,
    pub deriv_error: f64,
    pub history: Vec<(usize, f64, f64)>,
    pub jacobian: JacobianAgreement,
    pub polynomial: PolynomialMap2,
}

impl From<&PolyFit> for FitSummary {
    fn from(f: &PolyFit) -> Self {
        FitSummary {
            degree: f.degree,
            samples: f.samples,
            value_tol: f.value_tol,
            deriv_tol: f.deriv_tol,
            value_error: f.value_error,
            deriv_error: f.deriv_error,
            history: f.history.clone(),
            jacobian: f.jacobian.clone(),
            polynomial: f.map.clone(),
        }
    }
}

/// `orientation * det J_p` on the included lattice points of the
/// Jacobian certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialJacobian {
    pub samples: usize,
    pub min_signed_det: f64,
    /// Extremes of `det J_p` itself; both negative for a reversing map.
    pub min_raw_det: f64,
    pub max_raw_det: f64,
    pub all_positive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Sampled `max |f - p|` over random points of `|K|`.
    pub final_error: SampledError,
    pub within_eps: bool,
    /// Majority orientation of the PL map; `-1` for orientation-reversing
    /// maps, whose determinants the certificates record multiplied by `-1`.
    pub orientation: i32,
    pub injectivity_passed: bool,
    pub jacobian_verdict: JacobianVerdict,
    pub polynomial_jacobian: PolynomialJacobian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    #[serde(flatten)]
    pub status: PipelineStatus,
    pub config: PipelineConfig,
    pub budget: ErrorBudget,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approximation: Option<PlSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
}

impl PipelineResult {
    pub fn completed(&self) -> bool {
        self.status == PipelineStatus::Completed
    }

    fn halt(mut self, stage: Stage, reason: impl ToString) -> Self {
        self.status = PipelineStatus::Halted {
            stage,
            reason: reason.to_string(),
        };
        self
    }
}

/// Loads the map and complex named in `cfg`, runs the pipeline, and writes
/// the certificates when `cfg.output_dir` is set.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineResult> {
    cfg.validate()?;
    let f = load_map(&cfg.map)?;
    let complex = load_complex(&cfg.complex)?;
    let result = run_pipeline_on(f.as_ref(), &complex, cfg);
    if let Some(dir) = &cfg.output_dir {
        write_artifacts(dir, &result)?;
    }
    Ok(result)
}

/// One file per certificate plus the full result.
pub fn write_artifacts(dir: &Path, r: &PipelineResult) -> Result<()> {
    write_json(&dir.join("pipeline.json"), r)?;
    if let Some(a) = &r.approximation {
        write_json(&dir.join("injectivity.json"), &a.injectivity)?;
    }
    if let Some(s) = &r.smoothing {
        write_json(&dir.join("jacobian.json"), &s.certificate)?;
    }
    if let Some(fit) = &r.fit {
        write_json(&dir.join("polyfit.json"), fit)?;
    }
    if let Some(s) = &r.summary {
        write_json(&dir.join("summary.json"), s)?;
    }
    Ok(())
}

/// The stages on an already resolved map; stage failures halt with the
/// certificates gathered so far.
pub fn run_pipeline_on(f: &dyn SampledMap, complex: &SimplicialComplex, cfg: &PipelineConfig) -> PipelineResult {
    let budget = ErrorBudget::split(cfg.eps);
    let mut r = PipelineResult {
        status: PipelineStatus::Completed,
        config: cfg.clone(),
        budget,
        approximation: None,
        smoothing: None,
        fit: None,
        summary: None,
    };

    let approx = match pl_approximate(f, complex, budget.pl, cfg.inj_radius) {
        Ok(a) => a,
        Err(e) => return r.halt(Stage::PlApproximation, e),
    };
    r.approximation = Some(PlSummary::from(&approx));
    if !approx.certificate.passed() {
        return r.halt(Stage::Injectivity, "injectivity certificate did not pass");
    }
    let h = approx.map;

    let extended = match extend_domain(&h) {
        Ok(x) => x,
        Err(e) => return r.halt(Stage::Extension, e),
    };
    let deltas = match choose_deltas(&extended, budget.smoothing) {
        Ok(d) => d,
        Err(e) => return r.halt(Stage::Deltas, e),
    };
    let kernel = match kernel_normalize(deltas.delta2) {
        Ok(k) => k,
        Err(e) => return r.halt(Stage::Deltas, e),
    };
    let m = MollifiedMap::with_extension(h, extended, kernel);
    let certificate = match certify_jacobian(&m, &deltas, cfg.grids.certify) {
        Ok(c) => c,
        Err(e) => return r.halt(Stage::JacobianCertificate, e),
    };
    let smoothing_error = match mollifier_error(&m, cfg.grids.smoothing_error) {
        Ok(e) => e,
        Err(e) => return r.halt(Stage::JacobianCertificate, e),
    };
    let verdict = certificate.verdict.clone();
    r.smoothing = Some(SmoothingSummary {
        deltas,
        certificate,
        sampled_error: smoothing_error,
        error_grid: cfg.grids.smoothing_error,
    });
    if matches!(verdict, JacobianVerdict::Failed { .. }) {
        return r.halt(Stage::JacobianCertificate, "a sampled Jacobian has the wrong sign");
    }

    let fitted = FitSamples::from_mollified(&m, &deltas, cfg.grids.fit)
        .and_then(|s| poly_fit_up_to(&s, 1, cfg.grids.max_degree, budget.polynomial, derivative_tolerance(&s)));
    let fit = match fitted {
        Ok(fit) => fit,
        Err(e) => return r.halt(Stage::Polyfit, e),
    };
    r.fit = Some(FitSummary::from(&fit));

    let orientation = majority_orientation(&m.source);
    let final_error = sampled_error(f, &fit.map, complex, cfg.grids.error_samples, cfg.seed);
    r.summary = Some(Summary {
        within_eps: final_error.max < cfg.eps,
        final_error,
        orientation,
        injectivity_passed: true,
        jacobian_verdict: verdict,
        polynomial_jacobian: polynomial_jacobian(&m, &deltas, &fit.map, orientation, cfg.grids.certify),
    });
    r
}

/// `max |h * omega - h|` over lattice points of `|K|`.
fn mollifier_error(m: &MollifiedMap, grid: usize) -> degree_forge::Result<f64> {
    use rayon::prelude::*;
    let points: Vec<_> = grid_points(m.domain_bbox(), grid)
        .into_iter()
        .filter(|&p| m.source.locate(p).is_some())
        .collect();
    let errors: Vec<f64> = points
        .par_iter()
        .map(|&p| Ok(m.try_eval(p)?.dist(m.source.eval(p))))
        .collect::<degree_forge::Result<_>>()?;
    Ok(errors.into_iter().fold(0.0, f64::max))
}

fn polynomial_jacobian(m: &MollifiedMap, deltas: &Deltas, p: &PolynomialMap2, orientation: i32, grid: usize) -> PolynomialJacobian {
    let r = 2.0 * deltas.delta1 / 3.0;
    let raw: Vec<f64> = grid_points(m.domain_bbox(), grid)
        .into_iter()
        .filter(|&x| classify_sample(m, r, x) == SampleZone::Included)
        .map(|x| p.eval_with_jacobian(x).1.det())
        .collect();
    let min = raw.iter().map(|d| orientation as f64 * d).fold(f64::INFINITY, f64::min);
    PolynomialJacobian {
        samples: raw.len(),
        min_signed_det: min,
        min_raw_det: raw.iter().copied().fold(f64::INFINITY, f64::min),
        max_raw_det: raw.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        all_positive: !raw.is_empty() && min > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml_and_json() {
        let dir = std::env::temp_dir().join(format!("degree-forge-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let toml_path = dir.join("c.toml");
        fs::write(
            &toml_path,
            "map = \"square\"\ncomplex = \"annulus:0.2,1,2,12\"\neps = 0.05\ninj_radius = 0.15\nseed = 3\n[grids]\ncertify = 50\nfit = 40\nsmoothing_error = 20\nerror_samples = 100\nmax_degree = 6\n",
        )
        .unwrap();
        let cfg = PipelineConfig::from_path(&toml_path).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.grids.fit, 40);
        let json_path = dir.join("c.json");
        fs::write(&json_path, serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(PipelineConfig::from_path(&json_path).unwrap(), cfg);
        fs::write(&json_path, r#"{"map":"square","complex":"square","eps":-1,"inj_radius":1}"#).unwrap();
        assert!(PipelineConfig::from_path(&json_path).is_err());
        fs::write(&json_path, r#"{"map":"square","complex":"square","eps":1,"inj_radius":1,"typo":2}"#).unwrap();
        assert!(matches!(PipelineConfig::from_path(&json_path), Err(CliError::Parse { .. })));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn budget_adds_up_to_eps() {
        let b = ErrorBudget::split(0.05);
        assert!((b.pl + b.smoothing + b.polynomial - 0.05).abs() < 1e-17);
    }
}
