//! Command-line front end. Exit codes: 0 pass, 1 check failure, 2 usage or
//! configuration error.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{LabError, Result};
use crate::forms::{
    f_hodge_laplacian, form_counting_check, interior_product, kernel_dimension, kernel_ledger,
    FormSpectrumCatalog, HoloForm,
};
use crate::frequency::{
    check_monotone, frequency_profile, frequency_upper_bound, linear_grid, write_csv,
};
use crate::heat::{
    ancient_transform_check, compare_with_series, project_polynomial, HeatPoly, RealPoly,
};
use crate::model::{ModelKind, ModelShrinker};
use crate::poly::{dim_o_d, HoloPoly};
use crate::spectrum::{analytic_spectrum, counting_bound};
use crate::verify::{verify_all, VerifyConfig};

pub const THREADS_ENV: &str = "SHRINKER_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "shrinker-lab",
    version,
    about = "Spectral, growth and frequency checks on model Kähler Ricci shrinkers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Complex dimension of the Gaussian model.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub poly: Option<String>,
    #[arg(long, global = true)]
    pub form: Option<String>,
    #[arg(long, global = true)]
    pub d: Option<f64>,
    #[arg(long, global = true)]
    pub mu: Option<u32>,
    #[arg(long, global = true)]
    pub p: Option<usize>,
    #[arg(long, global = true)]
    pub rmin: Option<f64>,
    #[arg(long, global = true)]
    pub rmax: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Analytic drift-Laplacian spectrum.
    Spectrum,
    /// Counting bound for dim O_d.
    Dimension,
    /// Frequency profile of a polynomial.
    Frequency,
    /// f-heat flow of a heat polynomial.
    Heatflow,
    /// Holomorphic (p,0)-form counts and kernel ledger.
    Forms,
    /// Every check on every configured model.
    VerifyAll,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Resolved configuration; also the JSON config-file schema.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    /// Models for `verify-all`; defaults to Gaussian C^2 and the cylinder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<Vec<ModelKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        use serde_path_to_error::Segment;
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1")))
            }
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        "/".into()
    } else {
        out
    }
}

impl LabConfig {
    /// Parses a config document, locating schema errors by JSON pointer.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| LabError::Config {
            pointer: pointer_of(e.path()),
            message: e.inner().to_string(),
        })
    }

    fn apply_flags(&mut self, cli: &Cli) -> Result<()> {
        if let Some(name) = &cli.model {
            self.model = Some(match name.as_str() {
                "gaussian" => ModelKind::Gaussian {
                    m: cli.m.unwrap_or(1),
                },
                "cylinder" => ModelKind::Cylinder,
                other => {
                    return Err(LabError::Config {
                        pointer: "/model/kind".into(),
                        message: format!(
                            "unknown model kind {other:?}; expected gaussian or cylinder"
                        ),
                    })
                }
            });
        } else if let Some(m) = cli.m {
            self.model = Some(ModelKind::Gaussian { m });
        }
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = cli.$field.clone() {
                    self.$field = Some(v);
                }
            };
        }
        set!(poly);
        set!(form);
        set!(d);
        set!(mu);
        set!(p);
        set!(rmin);
        set!(rmax);
        set!(n);
        if let Some(s) = cli.sigma {
            self.verify.frequency.sigma = s;
        }
        if let Some(e) = cli.epsilon {
            self.verify.frequency.epsilon = e;
        }
        if let Some(r) = cli.resolution {
            self.verify.frequency.resolution = r;
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ModelShrinker> {
        let kind = self.model.clone().unwrap_or(ModelKind::Gaussian { m: 1 });
        ModelShrinker::try_from(kind).map_err(|e| LabError::Config {
            pointer: "/model".into(),
            message: e.to_string(),
        })
    }

    pub fn models(&self) -> Result<Vec<ModelShrinker>> {
        let kinds = match (&self.models, &self.model) {
            (Some(list), _) => list.clone(),
            (None, Some(one)) => vec![one.clone()],
            (None, None) => vec![ModelKind::Gaussian { m: 2 }, ModelKind::Cylinder],
        };
        kinds
            .into_iter()
            .enumerate()
            .map(|(i, k)| {
                ModelShrinker::try_from(k).map_err(|e| LabError::Config {
                    pointer: format!("/models/{i}"),
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

struct Outcome {
    body: String,
    pass: bool,
}

fn json_outcome(value: serde_json::Value, pass: bool) -> Outcome {
    Outcome {
        body: serde_json::to_string_pretty(&value).expect("serializable") + "\n",
        pass,
    }
}

fn default_poly(model: &ModelShrinker) -> HoloPoly {
    let k = model.flat_dim();
    let mut alpha = vec![0; k];
    alpha[k - 1] = 2;
    HoloPoly::monomial(alpha, num_complex::Complex64::new(1.0, 0.0))
}

fn run_spectrum(cfg: &LabConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let lambda_max = cfg.lambda_max.unwrap_or(3.0);
    let catalog = analytic_spectrum(&model, lambda_max)?;
    Ok(json_outcome(
        json!({ "catalog": catalog, "config": cfg }),
        true,
    ))
}

fn run_dimension(cfg: &LabConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let ds: Vec<f64> = match cfg.d {
        Some(d) => vec![d],
        None => (1..=cfg.verify.d_max).map(f64::from).collect(),
    };
    let rows = ds
        .iter()
        .map(|&d| counting_bound(&model, d))
        .collect::<Result<Vec<_>>>()?;
    let pass = rows.iter().all(|r| r.pass);
    Ok(json_outcome(
        json!({ "model": model, "bounds": rows, "config": cfg }),
        pass,
    ))
}

fn run_frequency(cfg: &LabConfig, format: Format) -> Result<Outcome> {
    let model = cfg.model()?;
    let u = match &cfg.poly {
        Some(text) => HoloPoly::parse(text, None)?,
        None => default_poly(&model),
    };
    let d = cfg.d.unwrap_or(u.degree() as f64);
    let fcfg = &cfg.verify.frequency;
    let rmin = cfg.rmin.unwrap_or_else(|| fcfg.r0_for(&model) + 0.5);
    let rmax = cfg.rmax.unwrap_or(40.0);
    let n = cfg.n.unwrap_or(64);
    if !(rmax > rmin) || n < 2 {
        return Err(LabError::Precondition(format!(
            "need rmax > rmin and n >= 2, got [{rmin}, {rmax}] with n = {n}"
        )));
    }
    let radii = linear_grid(rmin, rmax, n);
    let profile = frequency_profile(&model, &u, d, &radii, fcfg)?;
    let bound = frequency_upper_bound(&profile);
    let above_r0 = profile.radii.iter().all(|&r| r > profile.r0);
    let pass = bound.pass_sqrt_mu || !above_r0;
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(&profile, &mut buf)?;
            Ok(Outcome {
                body: String::from_utf8(buf).expect("csv is utf-8"),
                pass,
            })
        }
        Format::Json => {
            let monotone = if above_r0 {
                Some(check_monotone(&profile)?)
            } else {
                None
            };
            Ok(json_outcome(
                json!({ "profile": profile, "upper_bound": bound, "monotone": monotone, "config": cfg }),
                pass,
            ))
        }
    }
}

fn run_heatflow(cfg: &LabConfig) -> Result<Outcome> {
    let text = cfg.poly.clone().unwrap_or_else(|| "x^2 + 2t".into());
    let u = HeatPoly::parse(&text)?;
    let transform = if u.is_caloric() {
        Some(ancient_transform_check(&u, &[0.0, 0.5, 1.0, 2.0])?)
    } else if u.terms().any(|(&(_, b), _)| b > 0) {
        return Err(LabError::Precondition(format!(
            "{text:?} does not solve the heat equation"
        )));
    } else {
        None
    };
    // Initial datum at s = 0, i.e. t = -1.
    let degree = u.terms().map(|(&(a, b), _)| a + 2 * b).max().unwrap_or(0);
    let mut coeffs = vec![0.0; degree as usize + 1];
    for (&(a, b), &c) in u.terms() {
        coeffs[a as usize] += c * if b % 2 == 0 { 1.0 } else { -1.0 };
    }
    let u0 = RealPoly::new(
        1,
        coeffs.iter().enumerate().map(|(a, &c)| (vec![a as u32], c)),
    )?;
    let series = project_polynomial(&u0, degree as f64 / 2.0)?;
    let heat = &cfg.verify.heat;
    let oracle = compare_with_series(
        &u0,
        heat.s,
        heat.x_max,
        heat.n_grid,
        heat.steps,
        heat.scheme,
    )?;
    let scale = 1.0 + series.energy(0.0).sqrt();
    let pass = transform
        .as_ref()
        .is_none_or(|t| t.symbolic_residual == 0.0)
        && oracle.l2_error < 1e-3 * scale;
    Ok(json_outcome(
        json!({ "series": series, "oracle": oracle, "transform": transform, "config": cfg }),
        pass,
    ))
}

fn run_forms(cfg: &LabConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let p = cfg.p.unwrap_or(1);
    let mu = cfg.mu.unwrap_or(2);
    let counting = form_counting_check(&model, p, mu)?;
    let ledger = kernel_ledger(&model, p, mu)?;
    let catalog = FormSpectrumCatalog::new(&model, p, counting.horizon)?;
    let kernel = kernel_dimension(&model, p, mu)?;
    let form = match &cfg.form {
        Some(text) => {
            let omega = HoloForm::parse(text, Some(model.flat_dim()))?;
            let lap = f_hodge_laplacian(&model, &omega)?;
            let contraction = interior_product(&model, &omega)?;
            Some(
                json!({ "form": omega, "f_hodge_laplacian": lap, "interior_product": contraction }),
            )
        }
        None => None,
    };
    let pass = counting.pass && ledger.pass;
    Ok(json_outcome(
        json!({
            "model": model,
            "counting": counting,
            "kernel_ledger": ledger,
            "kernel_dimension": kernel,
            "dim_o_mu": dim_o_d(&model, mu as f64),
            "catalog": catalog,
            "form": form,
            "config": cfg,
        }),
        pass,
    ))
}

fn run_verify_all(cfg: &LabConfig) -> Result<Outcome> {
    let models = cfg.models()?;
    let echo = serde_json::to_value(cfg).expect("config serializes");
    let report = verify_all(&models, &cfg.verify, echo)?;
    Ok(Outcome {
        body: report.to_json() + "\n",
        pass: report.all_passed(),
    })
}

fn configure_threads() -> Result<()> {
    if let Ok(text) = std::env::var(THREADS_ENV) {
        let n: usize = text.trim().parse().map_err(|_| LabError::Config {
            pointer: format!("${THREADS_ENV}"),
            message: format!("expected a positive integer, got {text:?}"),
        })?;
        if n == 0 {
            return Err(LabError::Config {
                pointer: format!("${THREADS_ENV}"),
                message: "thread count must be positive".into(),
            });
        }
        // A second call (e.g. from tests) finds the pool already built.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<LabConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                LabError::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", path.display()),
                ))
            })?;
            LabConfig::from_json_str(&text)?
        }
        None => LabConfig::default(),
    };
    cfg.apply_flags(cli)?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Outcome> {
    configure_threads()?;
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Spectrum => run_spectrum(&cfg),
        Command::Dimension => run_dimension(&cfg),
        Command::Frequency => run_frequency(&cfg, cli.format.unwrap_or(Format::Csv)),
        Command::Heatflow => run_heatflow(&cfg),
        Command::Forms => run_forms(&cfg),
        Command::VerifyAll => run_verify_all(&cfg),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match execute(cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let written = match &cli.out {
        Some(path) => fs::write(path, &outcome.body),
        None => std::io::stdout().lock().write_all(outcome.body.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return 2;
    }
    if outcome.pass {
        0
    } else {
        1
    }
}

/// Entry point for the binary: parses `std::env::args`.
pub fn main_exit_code() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_pointer_on_schema_error() {
        let err =
            LabConfig::from_json_str(r#"{"verify": {"frequency": {"sigma": "x"}}}"#).unwrap_err();
        match err {
            LabError::Config { pointer, .. } => assert_eq!(pointer, "/verify/frequency/sigma"),
            other => panic!("unexpected {other:?}"),
        }
        let err = LabConfig::from_json_str(r#"{"model": {"kind": "torus"}}"#).unwrap_err();
        assert!(matches!(err, LabError::Config { .. }));
    }

    #[test]
    fn echo_round_trip() {
        let text = r#"{"model": {"kind": "cylinder"}, "poly": "w^2", "rmin": 4.5, "verify": {"d_max": 4}}"#;
        let cfg = LabConfig::from_json_str(text).unwrap();
        let echo = serde_json::to_string(&cfg).unwrap();
        assert_eq!(LabConfig::from_json_str(&echo).unwrap(), cfg);
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "shrinker-lab",
            "frequency",
            "--model",
            "gaussian",
            "--m",
            "2",
            "--sigma",
            "0.25",
        ])
        .unwrap();
        let cfg = load_config(&cli).unwrap();
        assert_eq!(cfg.model, Some(ModelKind::Gaussian { m: 2 }));
        assert_eq!(cfg.verify.frequency.sigma, 0.25);
        let cli = Cli::try_parse_from(["shrinker-lab", "spectrum", "--model", "torus"]).unwrap();
        assert!(load_config(&cli).is_err());
    }
}
