use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use degree_forge::degree::{brouwer_degree, degree_oracle_regular, DegreeReport, OracleReport};
use degree_forge::obstruction::{falsify_quarter_bound, monodromy_check, BranchTrack, FalsifyConfig, MonodromyReport};
use degree_forge::pl_approx::{pl_approximate, verify_local_injectivity, InjectivityCertificate, PLMap};
use degree_forge::smoothing::{
    certify_jacobian, choose_deltas, derivative_tolerance, extend_domain, kernel_normalize, poly_fit_up_to,
    FitSamples, MollifiedMap, MAX_FIT_DEGREE,
};
use degree_forge_cli::checks::{collision_sampling, CollisionReport};
use degree_forge_cli::error::{CliError, Result};
use degree_forge_cli::inputs::{load_complex, load_map, load_region, parse_point, read_json, to_json, write_json};
use degree_forge_cli::pipeline::{run_pipeline, PipelineConfig, PlSummary};
use degree_forge_cli::plot;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "degree-forge", version, about = "Degrees, PL approximation and smoothing of planar maps")]
struct Cli {
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Brouwer degree of a map on a region at a target point.
    Degree {
        #[arg(long)]
        map: String,
        /// `disk:cx,cy,r[,segments]`, inline JSON or a JSON file.
        #[arg(long)]
        region: String,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        /// Also count signed preimages on a grid.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 512)]
        oracle_grid: usize,
    },
    /// Locally injective PL approximation.
    Approx {
        #[arg(long)]
        map: String,
        #[arg(long)]
        complex: String,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        inj_radius: f64,
        /// Where to write the PL map.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mollify a PL map and certify the sign of its Jacobian.
    Smooth {
        #[arg(long)]
        plmap: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write fit samples of the mollified map on this lattice size.
        #[arg(long)]
        fit_grid: Option<usize>,
        #[arg(long, requires = "fit_grid")]
        samples_out: Option<PathBuf>,
    },
    /// Polynomial fit of value and derivative samples.
    Polyfit {
        #[arg(long)]
        input: PathBuf,
        /// Starting total degree.
        #[arg(long, default_value_t = 1)]
        degree: usize,
        #[arg(long, default_value_t = MAX_FIT_DEGREE)]
        max_degree: usize,
        #[arg(long)]
        value_tol: f64,
        /// Defaults to `min(2M, delta / (8M))` from the samples.
        #[arg(long)]
        deriv_tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact local injectivity check of a PL map, with an optional
    /// brute-force collision probe.
    Certify {
        #[arg(long)]
        plmap: PathBuf,
        #[arg(long, default_value_t = 0)]
        collision_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Branch tracking around `e^{i phi} / (2 + eps_loop)`.
    Monodromy {
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 0.1)]
        eps_loop: f64,
        #[arg(long, default_value_t = 512)]
        steps: usize,
    },
    /// Check a candidate approximation of `z^2` against the quarter bound.
    Falsify {
        #[arg(long)]
        candidate: String,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[arg(long, default_value_t = 512)]
        steps: usize,
    },
    /// PL approximation, smoothing and polynomial fit in one run.
    Pipeline {
        /// TOML or JSON config; the flags below override or replace it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        complex: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        inj_radius: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// SVG of a degree report, branch track or PL map.
    Plot {
        /// A DegreeReport, MonodromyReport, BranchTrack or InjectivityCertificate.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Needed for degree reports.
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        region: Option<String>,
        /// Needed for injectivity certificates.
        #[arg(long)]
        plmap: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct DegreeOutput {
    #[serde(flatten)]
    report: DegreeReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleReport>,
}

#[derive(Serialize)]
struct CertifyOutput {
    injectivity: InjectivityCertificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    collisions: Option<CollisionReport>,
}

fn value<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| CliError::Core(e.into()))
}

fn run(command: Command) -> Result<Value> {
    match command {
        Command::Degree {
            map,
            region,
            target,
            oracle,
            oracle_grid,
        } => {
            let f = load_map(&map)?;
            let u = load_region(&region)?;
            let p = parse_point(&target)?;
            let report = brouwer_degree(f.as_ref(), &u, p)?;
            let oracle = if oracle {
                Some(degree_oracle_regular(f.as_ref(), &u, p, oracle_grid)?)
            } else {
                None
            };
            value(&DegreeOutput { report, oracle })
        }
        Command::Approx {
            map,
            complex,
            eps,
            inj_radius,
            out,
        } => {
            let f = load_map(&map)?;
            let c = load_complex(&complex)?;
            let a = pl_approximate(f.as_ref(), &c, eps, inj_radius)?;
            if let Some(path) = out {
                write_json(&path, &a.map)?;
            }
            value(&PlSummary::from(&a))
        }
        Command::Smooth {
            plmap,
            eps,
            grid,
            out,
            fit_grid,
            samples_out,
        } => {
            let h: PLMap = read_json(&plmap)?;
            let extended = extend_domain(&h)?;
            let deltas = choose_deltas(&extended, eps)?;
            let m = MollifiedMap::with_extension(h, extended, kernel_normalize(deltas.delta2)?);
            let certificate = certify_jacobian(&m, &deltas, grid)?;
            if let Some(path) = out {
                write_json(&path, &certificate)?;
            }
            if let Some(n) = fit_grid {
                let samples = FitSamples::from_mollified(&m, &deltas, n)?;
                if let Some(path) = samples_out {
                    write_json(&path, &samples)?;
                }
            }
            Ok(json!({ "deltas": value(&deltas)?, "certificate": value(&certificate)? }))
        }
        Command::Polyfit {
            input,
            degree,
            max_degree,
            value_tol,
            deriv_tol,
            out,
        } => {
            let samples: FitSamples = read_json(&input)?;
            let deriv_tol = deriv_tol.unwrap_or_else(|| derivative_tolerance(&samples));
            let fit = poly_fit_up_to(&samples, degree, max_degree, value_tol, deriv_tol)?;
            if let Some(path) = out {
                write_json(&path, &fit.map)?;
            }
            value(&fit)
        }
        Command::Certify {
            plmap,
            collision_samples,
            seed,
        } => {
            let h: PLMap = read_json(&plmap)?;
            value(&CertifyOutput {
                injectivity: verify_local_injectivity(&h),
                collisions: (collision_samples > 0).then(|| collision_sampling(&h, collision_samples, seed)),
            })
        }
        Command::Monodromy { map, eps_loop, steps } => {
            let g = load_map(&map)?;
            value(&monodromy_check(g.as_ref(), eps_loop, steps)?)
        }
        Command::Falsify { candidate, grid, steps } => {
            let g = load_map(&candidate)?;
            let cfg = FalsifyConfig {
                grid,
                steps,
                ..FalsifyConfig::default()
            };
            value(&falsify_quarter_bound(g.as_ref(), &cfg)?)
        }
        Command::Pipeline {
            config,
            map,
            complex,
            eps,
            inj_radius,
            seed,
            output_dir,
        } => {
            let mut cfg = match config {
                Some(path) => PipelineConfig::from_path(&path)?,
                None => {
                    let missing = |name: &str| CliError::Input(format!("--{name} is required without --config"));
                    PipelineConfig::new(
                        map.as_deref().ok_or_else(|| missing("map"))?,
                        complex.as_deref().ok_or_else(|| missing("complex"))?,
                        eps.ok_or_else(|| missing("eps"))?,
                        inj_radius.ok_or_else(|| missing("inj-radius"))?,
                    )
                }
            };
            if let Some(m) = map {
                cfg.map = m;
            }
            if let Some(c) = complex {
                cfg.complex = c;
            }
            if let Some(e) = eps {
                cfg.eps = e;
            }
            if let Some(r) = inj_radius {
                cfg.inj_radius = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if output_dir.is_some() {
                cfg.output_dir = output_dir;
            }
            value(&run_pipeline(&cfg)?)
        }
        Command::Plot {
            input,
            map,
            region,
            plmap,
            out,
        } => {
            let artifact: Option<Value> = input.as_deref().map(read_json).transpose()?;
            let svg = render(artifact, map, region, plmap)?;
            fs::write(&out, svg).map_err(|source| CliError::Io {
                path: out.clone(),
                source,
            })?;
            Ok(json!({ "written": out }))
        }
    }
}

fn parse<T: serde::de::DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| CliError::Input(format!("artifact: {e}")))
}

fn render(artifact: Option<Value>, map: Option<String>, region: Option<String>, plmap: Option<PathBuf>) -> Result<String> {
    let need = |what: &str| CliError::Input(format!("this artifact needs --{what}"));
    match artifact {
        Some(v) if v.get("track").is_some() => {
            let r: MonodromyReport = parse(v)?;
            Ok(plot::branch_svg(&r.track))
        }
        Some(v) if v.get("y1").is_some() => {
            let t: BranchTrack = parse(v)?;
            Ok(plot::branch_svg(&t))
        }
        Some(v) if v.get("boundary_clearance").is_some() => {
            let r: DegreeReport = parse(v)?;
            let f = load_map(&map.ok_or_else(|| need("map"))?)?;
            let u = load_region(&region.ok_or_else(|| need("region"))?)?;
            Ok(plot::degree_svg(f.as_ref(), &u, &r))
        }
        Some(v) if v.get("checked_pairs").is_some() => {
            let c: InjectivityCertificate = parse(v)?;
            let h: PLMap = read_json(&plmap.ok_or_else(|| need("plmap"))?)?;
            Ok(plot::plmap_svg(&h, Some(&c)))
        }
        Some(v) if v.get("vertex_images").is_some() => {
            let h: PLMap = parse(v)?;
            Ok(plot::plmap_svg(&h, None))
        }
        Some(_) => Err(CliError::Input("unrecognised artifact".into())),
        None => {
            let h: PLMap = read_json(&plmap.ok_or_else(|| need("plmap or --input"))?)?;
            Ok(plot::plmap_svg(&h, None))
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprint!("{}", to_json(&e.to_json()).unwrap_or_else(|_| format!("{{\"error\":{:?}}}\n", e.to_string())));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = json!({ "error": { "kind": "usage", "message": e.render().to_string() } });
            eprint!("{}", to_json(&err).unwrap_or_default());
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&CliError::Input(format!("--threads: {e}")));
        }
    }
    match run(cli.command).and_then(|v| to_json(&v)) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
