//! The f-heat equation `d_s u = Delta_f u` on the Gaussian soliton `R^n`
//! with `f = |x|^2 / 4`: eigen-expansion in Hermite products, an implicit
//! finite-difference oracle, and the transform from ancient caloric
//! polynomials to eternal f-caloric ones.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model::factorial;
use crate::poly::HoloPoly;
use crate::quadrature::gauss_hermite;
use crate::spectrum::{Boundary, DiscretizedOperator, Potential1d};

/// Tail energy above which a projection is flagged as truncated.
pub const TAIL_WARNING: f64 = 1e-8;

/// Monic eigenfunction `phi_k(x) = 2^{k/2} He_k(x / sqrt 2)` of `-Delta_f` with
/// eigenvalue `k/2`: `phi_0 = 1`, `phi_1 = x`, `phi_2 = x^2 - 2`, `phi_3 = x^3 - 6x`.
pub fn hermite(k: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..k {
        let next = x * cur - 2.0 * j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `int phi_k^2 e^{-x^2/4} dx = 2 sqrt(pi) k! 2^k`.
pub fn hermite_norm_sq(k: u32) -> f64 {
    2.0 * std::f64::consts::PI.sqrt() * factorial(k as usize) * 2f64.powi(k as i32)
}

fn product_basis(alpha: &[u32], x: &[f64]) -> f64 {
    alpha
        .iter()
        .zip(x)
        .map(|(&k, &xi)| hermite(k, xi))
        .product()
}

fn product_norm_sq(alpha: &[u32]) -> f64 {
    alpha.iter().map(|&k| hermite_norm_sq(k)).product()
}

fn multi_indices(n: usize, max_total: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(n, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, max_total, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatTerm {
    pub alpha: Vec<u32>,
    pub eigenvalue: f64,
    pub coefficient: f64,
}

/// `u(x, s) = sum a_i e^{-lambda_i s} psi_i(x)` with `psi_i` Hermite products.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatSolution {
    pub dim: usize,
    pub lambda_max: f64,
    pub terms: Vec<HeatTerm>,
    /// `[start, end]`; no end means eternal in forward time.
    pub s_domain: (f64, Option<f64>),
    pub tail_energy: f64,
    pub truncation_warning: bool,
}

impl HeatSolution {
    /// Coefficients summed by eigenvalue.
    pub fn by_eigenvalue(&self) -> BTreeMap<u64, f64> {
        let mut out = BTreeMap::new();
        for t in &self.terms {
            *out.entry((2.0 * t.eigenvalue).round() as u64)
                .or_insert(0.0) += t.coefficient;
        }
        out
    }

    pub fn coefficient(&self, alpha: &[u32]) -> f64 {
        self.terms
            .iter()
            .find(|t| t.alpha == alpha)
            .map_or(0.0, |t| t.coefficient)
    }

    /// `||u(., s)||^2 = sum a_i^2 ||psi_i||^2 e^{-2 lambda_i s}`.
    pub fn energy(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coefficient
                    * t.coefficient
                    * product_norm_sq(&t.alpha)
                    * (-2.0 * t.eigenvalue * s).exp()
            })
            .sum()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.terms.iter().map(|t| t.eigenvalue).fold(0.0, f64::max)
    }
}

/// Projects `u0` onto Hermite products with eigenvalue `<= lambda_max` using a
/// tensor Gauss-Hermite rule with `points` nodes per axis.
pub fn project_to_eigenbasis<F>(
    dim: usize,
    u0: F,
    lambda_max: f64,
    points: usize,
) -> Result<HeatSolution>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if dim == 0 {
        return Err(LabError::Precondition("dimension must be positive".into()));
    }
    if !(lambda_max >= 0.0) {
        return Err(LabError::Precondition(format!(
            "lambda_max must be nonnegative, got {lambda_max}"
        )));
    }
    let total = points
        .checked_pow(dim as u32)
        .filter(|&t| t <= 4_000_000)
        .ok_or_else(|| {
            LabError::Precondition(format!("quadrature grid {points}^{dim} is too large"))
        })?;
    let rule = gauss_hermite(points);
    // int g(x) e^{-x^2/4} dx = 2 int g(2y) e^{-y^2} dy per axis.
    let nodes: Vec<(Vec<f64>, f64)> = (0..total)
        .map(|mut flat| {
            let mut x = Vec::with_capacity(dim);
            let mut w = 1.0;
            for _ in 0..dim {
                let j = flat % points;
                flat /= points;
                x.push(2.0 * rule.nodes[j]);
                w *= 2.0 * rule.weights[j];
            }
            (x, w)
        })
        .collect();
    let values: Vec<f64> = nodes.par_iter().map(|(x, _)| u0(x)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Precondition(
            "initial data is not finite at a quadrature node".into(),
        ));
    }
    let norm_sq: f64 = nodes.iter().zip(&values).map(|((_, w), v)| w * v * v).sum();
    let max_total = (2.0 * lambda_max + 1e-9).floor() as u32;
    let terms: Vec<HeatTerm> = multi_indices(dim, max_total)
        .into_par_iter()
        .filter_map(|alpha| {
            let inner: f64 = nodes
                .iter()
                .zip(&values)
                .map(|((x, w), v)| w * v * product_basis(&alpha, x))
                .sum();
            let a = inner / product_norm_sq(&alpha);
            let scale = norm_sq.sqrt().max(1.0);
            (a.abs() > 1e-13 * scale).then(|| HeatTerm {
                eigenvalue: alpha.iter().sum::<u32>() as f64 / 2.0,
                alpha,
                coefficient: a,
            })
        })
        .collect();
    let captured: f64 = terms
        .iter()
        .map(|t| t.coefficient * t.coefficient * product_norm_sq(&t.alpha))
        .sum();
    let tail_energy = (norm_sq - captured).max(0.0);
    Ok(HeatSolution {
        dim,
        lambda_max,
        terms,
        s_domain: (0.0, None),
        tail_energy,
        truncation_warning: tail_energy > TAIL_WARNING,
    })
}

/// Projection of a real polynomial; the rule is exact for its degree.
pub fn project_polynomial(p: &RealPoly, lambda_max: f64) -> Result<HeatSolution> {
    let points = (p.degree() as usize + 2 * (lambda_max.ceil() as usize) + 4) / 2 + 2;
    project_to_eigenbasis(p.dim(), |x| p.evaluate(x), lambda_max, points)
}

/// Exact finite sum at `(x, s)`.
pub fn evolve_series(sol: &HeatSolution, s: f64, x: &[f64]) -> Result<f64> {
    if x.len() != sol.dim {
        return Err(LabError::DimensionMismatch {
            expected: sol.dim,
            got: x.len(),
        });
    }
    if s < sol.s_domain.0 || sol.s_domain.1.is_some_and(|end| s > end) {
        return Err(LabError::Precondition(format!(
            "s = {s} is outside the solution domain"
        )));
    }
    Ok(sol
        .terms
        .iter()
        .map(|t| t.coefficient * (-t.eigenvalue * s).exp() * product_basis(&t.alpha, x))
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyDecay {
    pub samples: Vec<(f64, f64)>,
    pub nonincreasing: bool,
}

pub fn energy_decay(sol: &HeatSolution, s_samples: &[f64]) -> EnergyDecay {
    let samples: Vec<(f64, f64)> = s_samples.iter().map(|&s| (s, sol.energy(s))).collect();
    let nonincreasing = samples
        .windows(2)
        .all(|w| w[1].0 < w[0].0 || w[1].1 <= w[0].1 * (1.0 + 1e-14));
    EnergyDecay {
        samples,
        nonincreasing,
    }
}

/// Real polynomial in `x_1..x_n`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RealPoly {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl RealPoly {
    pub fn new(dim: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        let mut out = Self {
            dim,
            terms: BTreeMap::new(),
        };
        for (alpha, c) in terms {
            if alpha.len() != dim {
                return Err(LabError::DimensionMismatch {
                    expected: dim,
                    got: alpha.len(),
                });
            }
            *out.terms.entry(alpha).or_insert(0.0) += c;
        }
        out.terms.retain(|_, c| *c != 0.0);
        Ok(out)
    }

    /// Real and imaginary parts of a holomorphic polynomial in `z_j = x_{2j-1} + i x_{2j}`.
    pub fn from_holo(u: &HoloPoly) -> (Self, Self) {
        let m = u.m();
        let mut acc: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
        for (alpha, c) in u.terms() {
            // Expand prod (x + i y)^a by the binomial theorem in each variable.
            let mut partial: BTreeMap<Vec<u32>, Complex64> = BTreeMap::from([(vec![0; 2 * m], *c)]);
            for (j, &a) in alpha.iter().enumerate() {
                let mut next = BTreeMap::new();
                for (beta, coef) in &partial {
                    for k in 0..=a {
                        let binom = factorial(a as usize)
                            / (factorial(k as usize) * factorial((a - k) as usize));
                        let mut gamma = beta.clone();
                        gamma[2 * j] += a - k;
                        gamma[2 * j + 1] += k;
                        let ik = Complex64::i().powu(k);
                        *next.entry(gamma).or_insert(Complex64::new(0.0, 0.0)) += coef * ik * binom;
                    }
                }
                partial = next;
            }
            for (beta, coef) in partial {
                *acc.entry(beta).or_insert(Complex64::new(0.0, 0.0)) += coef;
            }
        }
        let re = Self::new(2 * m, acc.iter().map(|(b, c)| (b.clone(), c.re))).expect("arity");
        let im = Self::new(2 * m, acc.iter().map(|(b, c)| (b.clone(), c.im))).expect("arity");
        (re, im)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|a| a.iter().sum()).max().unwrap_or(0)
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(alpha, c)| {
                c * alpha
                    .iter()
                    .zip(x)
                    .map(|(&k, &xi)| xi.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    BackwardEuler,
    /// Two backward-Euler runs at `dt` and `dt/2`, combined as `2 u_{dt/2} - u_dt`.
    ExtrapolatedBackwardEuler,
}

/// Neumann finite-difference operator on `[-X, X]` used as the oracle's space discretization.
pub fn oracle_operator(x_max: f64, n_grid: usize) -> Result<DiscretizedOperator> {
    DiscretizedOperator::new(Potential1d::Gaussian, x_max, n_grid, Boundary::Neumann)
}

/// Off-diagonal bands of `M^{-1} A`: `(left_i, right_i)` couplings per node.
fn generator_bands(op: &DiscretizedOperator) -> (Vec<f64>, Vec<f64>) {
    let f = |x: f64| op.potential.f(x);
    let h = op.h;
    let n = op.dim();
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];
    for i in 0..n {
        let x = op.grid[i];
        let mw = op.mass[i] * f(x).exp();
        if i > 0 {
            left[i] = (f(x) - f(x - 0.5 * h)).exp() / (h * mw);
        }
        if i + 1 < n {
            right[i] = (f(x) - f(x + 0.5 * h)).exp() / (h * mw);
        }
    }
    (left, right)
}

fn backward_euler(
    op: &DiscretizedOperator,
    u0: &[f64],
    duration: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let dt = duration / steps as f64;
    let (left, right) = generator_bands(op);
    let n = op.dim();
    let diag: Vec<f64> = (0..n).map(|i| 1.0 + dt * (left[i] + right[i])).collect();
    let sub: Vec<f64> = (1..n).map(|i| -dt * left[i]).collect();
    let sup: Vec<f64> = (0..n - 1).map(|i| -dt * right[i]).collect();
    let mut u = u0.to_vec();
    for _ in 0..steps {
        u = crate::linalg::solve_tridiagonal(&sub, &diag, &sup, &u)?;
    }
    Ok(u)
}

/// Implicit stepping of `d_s u = Delta_f u` from `s0` to `s1` on the grid of `op`.
pub fn timestep_oracle(
    op: &DiscretizedOperator,
    u0: &[f64],
    s0: f64,
    s1: f64,
    steps: usize,
    scheme: Scheme,
) -> Result<Vec<f64>> {
    if !(s1 > s0) {
        return Err(LabError::Precondition(format!(
            "need s1 > s0, got {s0} and {s1}"
        )));
    }
    if steps == 0 {
        return Err(LabError::Precondition(
            "at least one step is required".into(),
        ));
    }
    if u0.len() != op.dim() {
        return Err(LabError::DimensionMismatch {
            expected: op.dim(),
            got: u0.len(),
        });
    }
    if op.boundary != Boundary::Neumann {
        return Err(LabError::Precondition(
            "the time-stepping oracle needs a Neumann operator".into(),
        ));
    }
    match scheme {
        Scheme::BackwardEuler => backward_euler(op, u0, s1 - s0, steps),
        Scheme::ExtrapolatedBackwardEuler => {
            let (coarse, fine) = rayon::join(
                || backward_euler(op, u0, s1 - s0, steps),
                || backward_euler(op, u0, s1 - s0, 2 * steps),
            );
            Ok(fine?
                .iter()
                .zip(&coarse?)
                .map(|(f, c)| 2.0 * f - c)
                .collect())
        }
    }
}

/// Discrete `L^2(e^{-f})` distance with the operator's lumped mass.
pub fn l2_distance(op: &DiscretizedOperator, a: &[f64], b: &[f64]) -> f64 {
    op.mass
        .iter()
        .zip(a.iter().zip(b))
        .map(|(m, (x, y))| m * (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleComparison {
    pub s: f64,
    pub n_grid: usize,
    pub steps: usize,
    pub scheme: Scheme,
    pub l2_error: f64,
}

/// Runs the oracle on `u0` from `s = 0` and compares with the series solution at `s`.
pub fn compare_with_series(
    u0: &RealPoly,
    s: f64,
    x_max: f64,
    n_grid: usize,
    steps: usize,
    scheme: Scheme,
) -> Result<OracleComparison> {
    if u0.dim() != 1 {
        return Err(LabError::DimensionMismatch {
            expected: 1,
            got: u0.dim(),
        });
    }
    let op = oracle_operator(x_max, n_grid)?;
    let initial: Vec<f64> = op.grid.iter().map(|&x| u0.evaluate(&[x])).collect();
    let stepped = timestep_oracle(&op, &initial, 0.0, s, steps, scheme)?;
    let sol = project_polynomial(u0, u0.degree() as f64 / 2.0)?;
    let exact: Vec<f64> = op
        .grid
        .iter()
        .map(|&x| evolve_series(&sol, s, &[x]))
        .collect::<Result<_>>()?;
    Ok(OracleComparison {
        s,
        n_grid,
        steps,
        scheme,
        l2_error: l2_distance(&op, &stepped, &exact),
    })
}

/// Terms of a two-variable polynomial as `{powers: [a, b], coefficient}` records.
mod pair_terms {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Term {
        powers: [u32; 2],
        coefficient: f64,
    }

    pub fn serialize<S: Serializer>(
        terms: &BTreeMap<(u32, u32), f64>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        terms
            .iter()
            .map(|(&(a, b), &c)| Term {
                powers: [a, b],
                coefficient: c,
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<(u32, u32), f64>, D::Error> {
        let list = Vec::<Term>::deserialize(d)?;
        let mut out = BTreeMap::new();
        for t in list {
            *out.entry((t.powers[0], t.powers[1])).or_insert(0.0) += t.coefficient;
        }
        out.retain(|_, c| *c != 0.0);
        Ok(out)
    }
}

/// Polynomial `sum c_{a,b} x^a t^b` in one space variable and time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HeatPoly {
    #[serde(with = "pair_terms")]
    terms: BTreeMap<(u32, u32), f64>,
}

impl HeatPoly {
    pub fn new(terms: impl IntoIterator<Item = ((u32, u32), f64)>) -> Self {
        let mut out = BTreeMap::new();
        for (k, c) in terms {
            *out.entry(k).or_insert(0.0) += c;
        }
        out.retain(|_, c: &mut f64| *c != 0.0);
        Self { terms: out }
    }

    /// Parses a literal in `x` and `t`, e.g. `"x^2 + 2t"`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.contains(['z', 'w', 'd']) {
            return Err(LabError::Parse("heat polynomials use only x and t".into()));
        }
        let mapped = text.replace('x', "z1").replace('t', "z2");
        let p = HoloPoly::parse(&mapped, Some(2))?;
        let mut terms = Vec::new();
        for (alpha, c) in p.terms() {
            if c.im != 0.0 {
                return Err(LabError::Parse(format!(
                    "heat polynomial coefficients must be real in {text:?}"
                )));
            }
            terms.push(((alpha[0], alpha[1]), c.re));
        }
        Ok(Self::new(terms))
    }

    /// `sum_k n! / (k! (n-2k)!) x^{n-2k} t^k`, the caloric polynomial with leading term `x^n`.
    pub fn heat_polynomial(n: u32) -> Self {
        Self::new((0..=n / 2).map(|k| {
            let c =
                factorial(n as usize) / (factorial(k as usize) * factorial((n - 2 * k) as usize));
            ((n - 2 * k, k), c)
        }))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &f64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let keys: std::collections::BTreeSet<_> =
            self.terms.keys().chain(other.terms.keys()).collect();
        keys.into_iter()
            .map(|k| (self.terms.get(k).unwrap_or(&0.0) - other.terms.get(k).unwrap_or(&0.0)).abs())
            .fold(0.0, f64::max)
    }

    pub fn evaluate(&self, x: f64, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(a, b), c)| c * x.powi(a as i32) * t.powi(b as i32))
            .sum()
    }

    /// `d_t u - d_xx u`.
    pub fn heat_residual(&self) -> Self {
        let mut out = Vec::new();
        for (&(a, b), &c) in &self.terms {
            if b > 0 {
                out.push(((a, b - 1), c * b as f64));
            }
            if a > 1 {
                out.push(((a - 2, b), -c * (a * (a - 1)) as f64));
            }
        }
        Self::new(out)
    }

    pub fn is_caloric(&self) -> bool {
        self.heat_residual().is_zero()
    }
}

/// Polynomial in `x` and `q = e^{-s/2}`; the transformed solution lives here.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EternalPoly {
    #[serde(serialize_with = "pair_terms::serialize")]
    terms: BTreeMap<(u32, u32), f64>,
}

impl EternalPoly {
    fn new(terms: impl IntoIterator<Item = ((u32, u32), f64)>) -> Self {
        let mut out = BTreeMap::new();
        for (k, c) in terms {
            *out.entry(k).or_insert(0.0) += c;
        }
        out.retain(|_, c: &mut f64| *c != 0.0);
        Self { terms: out }
    }

    pub fn evaluate(&self, x: f64, s: f64) -> f64 {
        let q = (-0.5 * s).exp();
        self.terms
            .iter()
            .map(|(&(a, k), c)| c * x.powi(a as i32) * q.powi(k as i32))
            .sum()
    }

    /// Coefficient of `x^a e^{-k s / 2}`.
    pub fn coeff(&self, a: u32, k: u32) -> f64 {
        self.terms.get(&(a, k)).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &f64)> {
        self.terms.iter()
    }

    /// `d_s u - u_xx + (x/2) u_x`, using `d_s q^k = -(k/2) q^k`.
    pub fn f_heat_residual(&self) -> Self {
        let mut out = Vec::new();
        for (&(a, k), &c) in &self.terms {
            out.push(((a, k), -c * k as f64 / 2.0));
            if a > 1 {
                out.push(((a - 2, k), -c * (a * (a - 1)) as f64));
            }
            out.push(((a, k), c * a as f64 / 2.0));
        }
        Self::new(out)
    }
}

/// `u_hat(x, s) = u(e^{-s/2} x, -e^{-s})`: on the Gaussian soliton
/// `Phi_t(x) = x / sqrt(tau)` with `tau = -t = e^{-s}`.
pub fn ancient_transform(u: &HeatPoly) -> Result<EternalPoly> {
    if !u.is_caloric() {
        return Err(LabError::Precondition(
            "input is not caloric: d_t u != Delta u".into(),
        ));
    }
    Ok(EternalPoly::new(u.terms.iter().map(|(&(a, b), &c)| {
        let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
        ((a, a + 2 * b), sign * c)
    })))
}

/// Inverse of [`ancient_transform`]: `u(y, t) = u_hat(y / sqrt(-t), -ln(-t))`.
pub fn inverse_ancient_transform(v: &EternalPoly) -> Result<HeatPoly> {
    let mut terms = Vec::new();
    for (&(a, k), &c) in &v.terms {
        if k < a || (k - a) % 2 != 0 {
            return Err(LabError::Precondition(format!(
                "term x^{a} e^{{-{k}s/2}} has no polynomial ancient preimage"
            )));
        }
        let b = (k - a) / 2;
        let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(((a, b), sign * c));
    }
    Ok(HeatPoly::new(terms))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformCheck {
    pub transformed: EternalPoly,
    /// Largest coefficient of `d_s u_hat - Delta_f u_hat`.
    pub symbolic_residual: f64,
    /// Largest pointwise residual over the sample grid.
    pub sampled_residual: f64,
    pub round_trip_error: f64,
}

/// Transforms, checks the f-heat equation symbolically and at samples, and inverts.
pub fn ancient_transform_check(u: &HeatPoly, s_samples: &[f64]) -> Result<TransformCheck> {
    let transformed = ancient_transform(u)?;
    let residual = transformed.f_heat_residual();
    let symbolic_residual = residual.terms.values().map(|c| c.abs()).fold(0.0, f64::max);
    let xs = [-3.0, -1.0, -0.5, 0.0, 0.7, 2.0, 4.0];
    let sampled_residual = s_samples
        .par_iter()
        .map(|&s| {
            xs.iter()
                .map(|&x| residual.evaluate(x, s).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let back = inverse_ancient_transform(&transformed)?;
    Ok(TransformCheck {
        round_trip_error: back.max_abs_diff(u),
        transformed,
        symbolic_residual,
        sampled_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_power(k: u32) -> RealPoly {
        RealPoly::new(1, [(vec![k], 1.0)]).unwrap()
    }

    #[test]
    fn hermite_basis() {
        for x in [-2.0, 0.3, 1.7] {
            assert_eq!(hermite(2, x), x * x - 2.0);
            assert!((hermite(3, x) - (x * x * x - 6.0 * x)).abs() < 1e-12);
        }
        let rule = gauss_hermite(30);
        for j in 0..6 {
            for k in 0..6 {
                let v: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(y, w)| 2.0 * w * hermite(j, 2.0 * y) * hermite(k, 2.0 * y))
                    .sum();
                let expect = if j == k { hermite_norm_sq(k) } else { 0.0 };
                assert!(
                    (v - expect).abs() < 1e-9 * hermite_norm_sq(j.max(k)),
                    "{j} {k}"
                );
            }
        }
    }

    #[test]
    fn projection_examples() {
        let sol = project_polynomial(&x_power(2), 4.0).unwrap();
        let by = sol.by_eigenvalue();
        assert!((by[&0] - 2.0).abs() < 1e-12);
        assert!((by[&2] - 1.0).abs() < 1e-12);
        assert_eq!(by.len(), 2);
        assert!(!sol.truncation_warning);

        let sol = project_polynomial(&x_power(3), 4.0).unwrap();
        assert_eq!(sol.terms.len(), 2);
        assert!((sol.coefficient(&[1]) - 6.0).abs() < 1e-12);
        assert!((sol.coefficient(&[3]) - 1.0).abs() < 1e-12);

        let psi = |x: &[f64]| hermite(4, x[0]);
        let sol = project_to_eigenbasis(1, psi, 5.0, 20).unwrap();
        assert_eq!(sol.terms.len(), 1);

        let truncated = project_polynomial(&x_power(4), 1.0).unwrap();
        assert!(truncated.truncation_warning);
        assert!(truncated.tail_energy > 1.0);
    }

    #[test]
    fn evolve_examples() {
        let sol = HeatSolution {
            dim: 1,
            lambda_max: 1.0,
            terms: vec![HeatTerm {
                alpha: vec![2],
                eigenvalue: 1.0,
                coefficient: 1.0,
            }],
            s_domain: (0.0, None),
            tail_energy: 0.0,
            truncation_warning: false,
        };
        assert!((evolve_series(&sol, 2f64.ln(), &[1.0]).unwrap() + 0.5).abs() < 1e-15);
        let p = RealPoly::new(1, [(vec![4], 1.0), (vec![1], -2.0), (vec![0], 0.5)]).unwrap();
        let sol = project_polynomial(&p, 2.0).unwrap();
        for x in [-1.5, 0.0, 2.5] {
            assert!((evolve_series(&sol, 0.0, &[x]).unwrap() - p.evaluate(&[x])).abs() < 1e-10);
        }
        let one = project_polynomial(&x_power(0), 1.0).unwrap();
        assert!((evolve_series(&one, 5.0, &[0.3]).unwrap() - 1.0).abs() < 1e-14);
        let decay = energy_decay(&sol, &[0.0, 0.5, 1.0, 3.0]);
        assert!(decay.nonincreasing);
    }

    #[test]
    fn holomorphic_growth_bookkeeping() {
        let u = HoloPoly::parse("z1^2 z2 + 3 z2", Some(2)).unwrap();
        let (re, im) = RealPoly::from_holo(&u);
        for part in [re, im] {
            let sol = project_polynomial(&part, 5.0).unwrap();
            assert!(sol.max_eigenvalue() <= 1.5 + 1e-12);
            assert!(!sol.truncation_warning);
        }
    }

    #[test]
    fn oracle_matches_series() {
        let u0 = x_power(2);
        let be = compare_with_series(&u0, 1.0, 12.0, 800, 200, Scheme::BackwardEuler).unwrap();
        let rich = compare_with_series(&u0, 1.0, 12.0, 800, 200, Scheme::ExtrapolatedBackwardEuler)
            .unwrap();
        assert!(rich.l2_error < 1e-3, "{rich:?}");
        let half = compare_with_series(&u0, 1.0, 12.0, 800, 400, Scheme::BackwardEuler).unwrap();
        let ratio = be.l2_error / half.l2_error;
        assert!((1.8..2.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn oracle_preserves_constants() {
        let op = oracle_operator(12.0, 200).unwrap();
        let ones = vec![1.0; op.dim()];
        let out = timestep_oracle(&op, &ones, 0.0, 1.0, 50, Scheme::BackwardEuler).unwrap();
        assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(timestep_oracle(&op, &ones, 1.0, 1.0, 50, Scheme::BackwardEuler).is_err());
    }

    #[test]
    fn transform_examples() {
        let u = HeatPoly::parse("x^2 + 2t").unwrap();
        let check = ancient_transform_check(&u, &[0.0, 0.5, 2.0]).unwrap();
        assert_eq!(check.symbolic_residual, 0.0);
        assert_eq!(check.transformed.coeff(2, 2), 1.0);
        assert_eq!(check.transformed.coeff(0, 2), -2.0);
        assert_eq!(check.round_trip_error, 0.0);

        let x = HeatPoly::parse("x").unwrap();
        let check = ancient_transform_check(&x, &[0.0, 1.0]).unwrap();
        assert_eq!(check.transformed.coeff(1, 1), 1.0);

        let one = HeatPoly::parse("1").unwrap();
        assert_eq!(ancient_transform(&one).unwrap().coeff(0, 0), 1.0);

        for n in 0..=4 {
            let check =
                ancient_transform_check(&HeatPoly::heat_polynomial(n), &[0.0, 1.0, 3.0]).unwrap();
            assert_eq!(check.symbolic_residual, 0.0);
            assert_eq!(check.sampled_residual, 0.0);
        }
        assert!(ancient_transform(&HeatPoly::parse("x^2").unwrap()).is_err());
        let text = serde_json::to_string(&u).unwrap();
        assert_eq!(serde_json::from_str::<HeatPoly>(&text).unwrap(), u);
        assert!(serde_json::to_string(&check).is_ok());
    }
}
