//! Spectrum of the drift Laplacian `Delta_f = Delta - <grad f, grad .>` on the
//! model shrinkers, analytic and by a one-dimensional finite-difference oracle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{tridiagonal_ql, DenseMatrix};
use crate::model::ModelShrinker;
use crate::poly::dim_o_d;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub eigenvalue: f64,
    pub multiplicity: u64,
    pub generator_label: String,
}

/// Eigenvalues of `-Delta_f` up to `lambda_max`, with real multiplicities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCatalog {
    pub model: ModelShrinker,
    pub lines: Vec<SpectralLine>,
    pub lambda_max: f64,
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Lines of one factor in half-units: `(2 lambda, multiplicity, label)`.
type HalfLines = Vec<(u64, u64, String)>;

fn flat_factor_lines(k: usize, max_half: u64) -> HalfLines {
    let n = 2 * k as u64;
    (0..=max_half)
        .map(|j| (j, binomial(n + j - 1, n - 1), format!("Hermite degree {j}")))
        .collect()
}

fn sphere_factor_lines(max_half: u64) -> HalfLines {
    (0..)
        .map(|l: u64| (l * (l + 1), 2 * l + 1, format!("spherical harmonic l={l}")))
        .take_while(|(h, _, _)| *h <= max_half)
        .collect()
}

fn convolve(a: &HalfLines, b: &HalfLines, max_half: u64) -> HalfLines {
    let mut acc: BTreeMap<u64, (u64, Vec<String>)> = BTreeMap::new();
    for (ha, ma, la) in a {
        for (hb, mb, lb) in b {
            let h = ha + hb;
            if h > max_half {
                continue;
            }
            let entry = acc.entry(h).or_default();
            entry.0 += ma * mb;
            entry.1.push(format!("{la} x {lb}"));
        }
    }
    acc.into_iter()
        .map(|(h, (m, labels))| (h, m, labels.join("; ")))
        .collect()
}

pub fn analytic_spectrum(model: &ModelShrinker, lambda_max: f64) -> Result<SpectrumCatalog> {
    if !(lambda_max >= 0.0) || !lambda_max.is_finite() {
        return Err(LabError::Precondition(format!(
            "lambda_max must be a finite nonnegative number, got {lambda_max}"
        )));
    }
    let max_half = (2.0 * lambda_max + 1e-9).floor() as u64;
    let mut lines: HalfLines = vec![(0, 1, "constant".into())];
    let mut first = true;
    if model.flat_dim() > 0 {
        lines = flat_factor_lines(model.flat_dim(), max_half);
        first = false;
    }
    for _ in 0..model.spheres() {
        let sphere = sphere_factor_lines(max_half);
        lines = if first {
            first = false;
            sphere
        } else {
            convolve(&lines, &sphere, max_half)
        };
    }
    Ok(SpectrumCatalog {
        model: model.clone(),
        lines: lines
            .into_iter()
            .map(|(h, m, label)| SpectralLine {
                eigenvalue: h as f64 / 2.0,
                multiplicity: m,
                generator_label: label,
            })
            .collect(),
        lambda_max,
    })
}

impl SpectrumCatalog {
    /// Total multiplicity of eigenvalues in `[lo, hi]`.
    pub fn count(&self, lo: f64, hi: f64) -> Result<u64> {
        count_eigenvalues(self, lo, hi)
    }

    pub fn first_nonzero(&self) -> Option<&SpectralLine> {
        self.lines.iter().find(|l| l.eigenvalue > 0.0)
    }

    /// Number of distinct eigenvalues in `[lo, hi]`.
    pub fn distinct_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.lines
            .iter()
            .map(|l| l.eigenvalue)
            .filter(|&e| e >= lo - 1e-12 && e <= hi + 1e-12)
            .collect()
    }
}

pub fn count_eigenvalues(catalog: &SpectrumCatalog, lo: f64, hi: f64) -> Result<u64> {
    if hi > catalog.lambda_max + 1e-12 {
        return Err(LabError::Completeness {
            lambda_max: catalog.lambda_max,
            requested: hi,
        });
    }
    Ok(catalog
        .lines
        .iter()
        .filter(|l| l.eigenvalue >= lo - 1e-12 && l.eigenvalue <= hi + 1e-12)
        .map(|l| l.multiplicity)
        .sum())
}

/// One-dimensional potential `f(x) = c x^2`; the Gaussian soliton has `c = 1/4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential1d {
    Gaussian,
    Quadratic { coefficient: f64 },
}

impl Potential1d {
    pub fn coefficient(&self) -> f64 {
        match self {
            Potential1d::Gaussian => 0.25,
            Potential1d::Quadratic { coefficient } => *coefficient,
        }
    }

    pub fn f(&self, x: f64) -> f64 {
        self.coefficient() * x * x
    }

    /// Exact eigenvalues `2 c k` of `-Delta_f` on the line.
    pub fn exact_eigenvalue(&self, k: usize) -> f64 {
        2.0 * self.coefficient() * k as f64
    }

    /// Smallest `X` with `exp(-f(X)) < 1e-30`.
    pub fn default_truncation(&self) -> f64 {
        (30.0 * std::f64::consts::LN_10 / self.coefficient()).sqrt() * (1.0 + 1e-12)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
    Neumann,
}

/// Weighted Dirichlet form `int u' v' e^{-f}` on `[-X, X]` with a lumped mass
/// `h e^{-f(x_i)}`, stored as the symmetric reduction `M^{-1/2} A M^{-1/2}`.
///
/// Edge weights use the midpoint value `e^{-f(x_{i+1/2})}`. The unreduced
/// stiffness and mass are kept for time stepping.
#[derive(Clone, Debug)]
pub struct DiscretizedOperator {
    pub potential: Potential1d,
    pub boundary: Boundary,
    pub x_max: f64,
    pub h: f64,
    pub grid: Vec<f64>,
    /// Lumped mass `h e^{-f(x_i)}`, halved at Neumann end nodes.
    pub mass: Vec<f64>,
    pub stiffness_diag: Vec<f64>,
    pub stiffness_off: Vec<f64>,
    pub reduced_diag: Vec<f64>,
    pub reduced_off: Vec<f64>,
}

impl DiscretizedOperator {
    pub fn new(potential: Potential1d, x_max: f64, n: usize, boundary: Boundary) -> Result<Self> {
        if !(x_max > 0.0) {
            return Err(LabError::Precondition(format!(
                "truncation X must be positive, got {x_max}"
            )));
        }
        if n < 16 {
            return Err(LabError::Precondition(format!(
                "grid size N must be at least 16, got {n}"
            )));
        }
        let h = 2.0 * x_max / n as f64;
        let all: Vec<f64> = (0..=n).map(|i| -x_max + h * i as f64).collect();
        let (lo, hi) = match boundary {
            Boundary::Dirichlet => (1, n - 1),
            Boundary::Neumann => (0, n),
        };
        let grid: Vec<f64> = all[lo..=hi].to_vec();
        let f = |x: f64| potential.f(x);
        let mass: Vec<f64> = (lo..=hi)
            .map(|i| {
                let end = boundary == Boundary::Neumann && (i == 0 || i == n);
                let w = if end { 0.5 * h } else { h };
                w * (-f(all[i])).exp()
            })
            .collect();
        let edge = |i: usize| (-f(all[i] + 0.5 * h)).exp() / h;
        let m = grid.len();
        let mut stiffness_diag = vec![0.0; m];
        let mut stiffness_off = vec![0.0; m.saturating_sub(1)];
        for (row, i) in (lo..=hi).enumerate() {
            if i > 0 {
                stiffness_diag[row] += edge(i - 1);
            }
            if i < n {
                stiffness_diag[row] += edge(i);
            }
            if row + 1 < m {
                stiffness_off[row] = -edge(i);
            }
        }
        // Reduced entries evaluated through exponent differences to avoid
        // dividing tiny weights by tiny masses.
        let reduced_diag: Vec<f64> = (lo..=hi)
            .map(|i| {
                let fi = f(all[i]);
                let end = boundary == Boundary::Neumann && (i == 0 || i == n);
                let mw = if end { 0.5 * h } else { h };
                let mut s = 0.0;
                if i > 0 {
                    s += (fi - f(all[i] - 0.5 * h)).exp();
                }
                if i < n {
                    s += (fi - f(all[i] + 0.5 * h)).exp();
                }
                s / (h * mw)
            })
            .collect();
        let reduced_off: Vec<f64> = (lo..hi)
            .map(|i| {
                let end_l = boundary == Boundary::Neumann && i == 0;
                let end_r = boundary == Boundary::Neumann && i + 1 == n;
                let ml = if end_l { 0.5 * h } else { h };
                let mr = if end_r { 0.5 * h } else { h };
                let expo = 0.5 * (f(all[i]) + f(all[i + 1])) - f(all[i] + 0.5 * h);
                -expo.exp() / (h * (ml * mr).sqrt())
            })
            .collect();
        Ok(Self {
            potential,
            boundary,
            x_max,
            h,
            grid,
            mass,
            stiffness_diag,
            stiffness_off,
            reduced_diag,
            reduced_off,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    /// Dense copy of the reduced symmetric matrix.
    pub fn matrix(&self) -> DenseMatrix {
        DenseMatrix::tridiagonal(&self.reduced_diag, &self.reduced_off)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut values = tridiagonal_ql(self.reduced_diag.clone(), self.reduced_off.clone())?;
        values.sort_by(f64::total_cmp);
        Ok(values)
    }
}

/// Smallest `k_eigs` eigenvalues of the Dirichlet-truncated oracle.
pub fn oracle_spectrum_1d(
    potential: Potential1d,
    x_max: f64,
    n: usize,
    k_eigs: usize,
) -> Result<Vec<f64>> {
    if k_eigs > n / 4 {
        return Err(LabError::Precondition(format!(
            "k_eigs = {k_eigs} exceeds N/4 = {}",
            n / 4
        )));
    }
    let op = DiscretizedOperator::new(potential, x_max, n, Boundary::Dirichlet)?;
    let mut values = op.eigenvalues()?;
    values.truncate(k_eigs);
    Ok(values)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountingBound {
    pub d: f64,
    /// Floor of `1 + count / 2`.
    pub bound: u64,
    pub bound_exact: f64,
    pub count: u64,
    pub dim_od: u64,
    pub pass: bool,
    /// `dim_od` attains the exact (possibly half-integral) bound.
    pub sharp: bool,
}

pub fn counting_bound(model: &ModelShrinker, d: f64) -> Result<CountingBound> {
    if !(d >= 0.0) {
        return Err(LabError::Precondition(format!(
            "growth order must be nonnegative, got {d}"
        )));
    }
    let catalog = analytic_spectrum(model, d / 2.0)?;
    let count = count_eigenvalues(&catalog, 0.5, d / 2.0)?;
    let bound_exact = 1.0 + 0.5 * count as f64;
    let bound = bound_exact.floor() as u64;
    let dim_od = dim_o_d(model, d);
    Ok(CountingBound {
        d,
        bound,
        bound_exact,
        count,
        dim_od,
        pass: dim_od <= bound,
        sharp: dim_od as f64 == bound_exact,
    })
}
