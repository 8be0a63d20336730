//! Weighted frequency function of a holomorphic polynomial on a model
//! shrinker: `I`, `D`, `U = D/I`, the level-set defects `K_j`, the ratio
//! `rho`, the monotone quantity, doubling and three-circle bounds, and the
//! `J_i` shell ledger.
//!
//! On a model the level set `{b = r}` is `(S^2)^s` times the round sphere of
//! radius `rho = sqrt(r^2 - 4s)` in the flat factor, `|grad b| = rho / r` is
//! constant on it, and the unit normal is the flat radial direction, so
//! `d_nu u = E u / rho` with `E = sum z_j d/dz_j`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model::{factorial, ModelShrinker};
use crate::poly::{check_flat_support, total_degree, HoloPoly};
use crate::quadrature::gauss_legendre;

/// How level-set and ball integrals are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Orthogonality and moments of monomials on Euclidean spheres.
    #[default]
    ClosedForm,
    /// Tensor quadrature at the configured resolution.
    Quadrature,
}

fn default_resolution() -> usize {
    256
}
fn default_sigma() -> f64 {
    0.5
}
fn default_delta() -> f64 {
    0.5
}
fn default_epsilon() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Calibrated per model and polynomial when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    /// Volume-growth power; defaults to the real dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_vol: Option<usize>,
    #[serde(default)]
    pub route: Route,
}

impl Default for FrequencyConfig {
    fn default() -> Self {
        Self {
            resolution: default_resolution(),
            sigma: default_sigma(),
            delta: default_delta(),
            epsilon: default_epsilon(),
            c1: None,
            c2: None,
            r0: None,
            p_vol: None,
            route: Route::ClosedForm,
        }
    }
}

impl FrequencyConfig {
    pub fn with_route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }

    /// `max(sqrt(2n), 2 sqrt(4 sup S + 1), 4)` unless set.
    pub fn r0_for(&self, model: &ModelShrinker) -> f64 {
        self.r0.unwrap_or_else(|| {
            (2.0 * model.n() as f64)
                .sqrt()
                .max(2.0 * (4.0 * model.sup_scalar() + 1.0).sqrt())
                .max(4.0)
        })
    }

    pub fn p_for(&self, model: &ModelShrinker) -> usize {
        self.p_vol.unwrap_or(model.n())
    }

    /// Common decay exponent `min(sigma, delta, 1 - delta)` of both error terms.
    pub fn exponent(&self) -> f64 {
        self.sigma.min(self.delta).min(1.0 - self.delta)
    }

    pub fn validate(&self, model: &ModelShrinker) -> Result<()> {
        if self.resolution == 0 {
            return Err(LabError::Precondition("resolution must be positive".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(LabError::Precondition(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(LabError::Precondition(format!(
                "delta must lie in (0, 1/2], got {}",
                self.delta
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(LabError::Precondition(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if let Some(c1) = self.c1 {
            if !(c1 > 0.0) {
                return Err(LabError::Precondition(format!(
                    "C1 must be positive, got {c1}"
                )));
            }
        }
        if let Some(c2) = self.c2 {
            if !(c2 >= 0.0) {
                return Err(LabError::Precondition(format!(
                    "C2 must be nonnegative, got {c2}"
                )));
            }
        }
        let r0 = self.r0_for(model);
        if !(r0 * r0 > 4.0 * model.sup_scalar()) {
            return Err(LabError::Precondition(format!(
                "R0 = {r0} violates R0^2 > 4 sup S = {}",
                4.0 * model.sup_scalar()
            )));
        }
        Ok(())
    }
}

/// `e^{2p+6} max(d, 1)^2`.
pub fn mu_constant(p: usize, d: f64) -> f64 {
    let d = d.max(1.0);
    (2.0 * p as f64 + 6.0).exp() * d * d
}

/// A polynomial on the flat factor with the derivatives the integrals need.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub u: HoloPoly,
    /// `d u / d z_j`.
    pub du: Vec<HoloPoly>,
    /// `E u = sum z_j du/dz_j`.
    pub eu: HoloPoly,
}

impl Prepared {
    pub fn new(model: &ModelShrinker, u: &HoloPoly) -> Result<Self> {
        check_flat_support(model, u)?;
        let u = u.with_vars(model.flat_dim())?;
        let du = (0..model.flat_dim()).map(|j| u.derivative(j)).collect();
        let eu = u.euler();
        Ok(Self { u, du, eu })
    }

    fn at(&self, z: &[Complex64]) -> NodeValues {
        let u = self.u.evaluate(z).expect("arity checked at construction");
        let eu = self.eu.evaluate(z).expect("arity checked at construction");
        let grad_sq = 2.0
            * self
                .du
                .iter()
                .map(|d| d.evaluate(z).expect("arity checked").norm_sqr())
                .sum::<f64>();
        NodeValues { u, eu, grad_sq }
    }
}

struct NodeValues {
    u: Complex64,
    eu: Complex64,
    /// `|grad u|^2 = 2 sum |du/dz_j|^2`.
    grad_sq: f64,
}

/// Integrals over the raw level-set measure `dA` of `{b = r}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LevelMoments {
    pub rho: f64,
    /// `int |u|^2`.
    pub l2: f64,
    /// `int Re(conj(u) E u)`.
    pub radial: f64,
    /// `int |grad u|^2`.
    pub grad: f64,
    /// `int |E u|^2`.
    pub euler_sq: f64,
}

/// `int_{S^{2k-1}} |z^beta|^2 = 2 pi^k beta! / (|beta| + k - 1)!`.
fn sphere_moment(beta: &[u32]) -> f64 {
    let k = beta.len();
    let num: f64 = beta.iter().map(|&b| factorial(b as usize)).product();
    2.0 * std::f64::consts::PI.powi(k as i32) * num / factorial(total_degree(beta) as usize + k - 1)
}

/// `int_{|z| = rho} conj(a) b` by monomial orthogonality.
fn sphere_inner(a: &HoloPoly, b: &HoloPoly, rho: f64) -> Complex64 {
    let k = a.m() as i32;
    a.terms()
        .map(|(alpha, ca)| {
            let cb = b.coeff(alpha);
            let deg = total_degree(alpha) as i32;
            ca.conj() * cb * (sphere_moment(alpha) * rho.powi(2 * deg + 2 * k - 1))
        })
        .sum()
}

/// `int_{|z| < rho} |a|^2`.
fn ball_norm_sq(a: &HoloPoly, rho: f64) -> f64 {
    let k = a.m() as i32;
    a.terms()
        .map(|(alpha, c)| {
            let deg = total_degree(alpha) as i32;
            let e = 2 * deg + 2 * k;
            c.norm_sqr() * sphere_moment(alpha) * rho.powi(e) / e as f64
        })
        .sum()
}

pub fn level_moments(
    model: &ModelShrinker,
    prep: &Prepared,
    r: f64,
    route: Route,
    resolution: usize,
) -> Result<LevelMoments> {
    model.check_regular(r)?;
    let rho = model.flat_radius(r);
    match route {
        Route::ClosedForm => {
            let area = model.compact_area();
            let grad = 2.0
                * prep
                    .du
                    .iter()
                    .map(|d| sphere_inner(d, d, rho).re)
                    .sum::<f64>();
            Ok(LevelMoments {
                rho,
                l2: area * sphere_inner(&prep.u, &prep.u, rho).re,
                radial: area * sphere_inner(&prep.u, &prep.eu, rho).re,
                grad: area * grad,
                euler_sq: area * sphere_inner(&prep.eu, &prep.eu, rho).re,
            })
        }
        Route::Quadrature => {
            let q = model.level_set_quadrature(r, resolution)?;
            let mut m = LevelMoments {
                rho,
                ..Default::default()
            };
            for (z, w) in q.iter() {
                let v = prep.at(z);
                m.l2 += w * v.u.norm_sqr();
                m.radial += w * (v.u.conj() * v.eu).re;
                m.grad += w * v.grad_sq;
                m.euler_sq += w * v.eu.norm_sqr();
            }
            Ok(m)
        }
    }
}

/// `int_{b < r} |grad u|^2`.
pub fn bulk_energy(
    model: &ModelShrinker,
    prep: &Prepared,
    r: f64,
    route: Route,
    resolution: usize,
) -> Result<f64> {
    model.check_regular(r)?;
    match route {
        Route::ClosedForm => {
            let rho = model.flat_radius(r);
            Ok(model.compact_area()
                * 2.0
                * prep.du.iter().map(|d| ball_norm_sq(d, rho)).sum::<f64>())
        }
        Route::Quadrature => {
            let q = model.ball_quadrature(r, resolution)?;
            Ok(q.iter().map(|(z, w)| w * prep.at(z).grad_sq).sum())
        }
    }
}

fn i_from(model: &ModelShrinker, r: f64, m: &LevelMoments) -> f64 {
    let n = model.n() as i32;
    r.powi(1 - n) * (m.rho / r) * m.l2
}

/// `I(r) = r^{1-n} int_{b=r} |u|^2 |grad b|`.
pub fn i_of_r(
    model: &ModelShrinker,
    u: &HoloPoly,
    r: f64,
    route: Route,
    resolution: usize,
) -> Result<f64> {
    let prep = Prepared::new(model, u)?;
    let m = level_moments(model, &prep, r, route, resolution)?;
    Ok(i_from(model, r, &m))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DValue {
    /// `r^{2-n} int_{b<r} |grad u|^2`.
    pub bulk: f64,
    /// `(1/2) r^{2-n} int_{b=r} d_nu |u|^2`.
    pub boundary: f64,
}

impl DValue {
    pub fn relative_gap(&self) -> f64 {
        let scale = self.bulk.abs().max(self.boundary.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.bulk - self.boundary).abs() / scale
        }
    }
}

pub fn d_of_r(
    model: &ModelShrinker,
    u: &HoloPoly,
    r: f64,
    route: Route,
    resolution: usize,
) -> Result<DValue> {
    let prep = Prepared::new(model, u)?;
    d_prepared(model, &prep, r, route, resolution)
}

fn d_prepared(
    model: &ModelShrinker,
    prep: &Prepared,
    r: f64,
    route: Route,
    resolution: usize,
) -> Result<DValue> {
    let n = model.n() as i32;
    let m = level_moments(model, prep, r, route, resolution)?;
    let bulk = bulk_energy(model, prep, r, route, resolution)?;
    // d_nu |u|^2 = 2 Re(conj(u) E u) / rho
    Ok(DValue {
        bulk: r.powi(2 - n) * bulk,
        boundary: r.powi(2 - n) * m.radial / m.rho,
    })
}

/// Right-hand side of the first-variation identity for `I'(r)`.
fn i_prime_from(model: &ModelShrinker, r: f64, m: &LevelMoments) -> f64 {
    let n = model.n() as f64;
    let ni = model.n() as i32;
    let s = model.sup_scalar();
    let grad_b = m.rho / r;
    r.powi(1 - ni) * 2.0 * m.radial / m.rho
        + r.powi(-ni) * (4.0 * n / (r * r) - 2.0) * s * m.l2 / grad_b
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub r: f64,
    pub h: f64,
    pub finite_difference: f64,
    pub identity: f64,
    pub residual: f64,
}

/// Compares a central difference of `I` with the first-variation identity.
pub fn check_derivative_i(
    model: &ModelShrinker,
    u: &HoloPoly,
    r: f64,
    h: f64,
    route: Route,
    resolution: usize,
) -> Result<DerivativeCheck> {
    if !(h > 0.0) {
        return Err(LabError::Precondition(format!(
            "step h must be positive, got {h}"
        )));
    }
    model.check_regular(r - h)?;
    let prep = Prepared::new(model, u)?;
    let at =
        |x: f64| level_moments(model, &prep, x, route, resolution).map(|m| i_from(model, x, &m));
    let fd = (at(r + h)? - at(r - h)?) / (2.0 * h);
    let identity = i_prime_from(
        model,
        r,
        &level_moments(model, &prep, r, route, resolution)?,
    );
    Ok(DerivativeCheck {
        r,
        h,
        finite_difference: fd,
        identity,
        residual: (fd - identity).abs() / (1.0 + identity.abs()),
    })
}

/// `K_j(r) = int_{b=r} S^j (|grad u|^2 - 2 |d_nu u|^2) / |grad b|`.
pub fn k_j(
    model: &ModelShrinker,
    u: &HoloPoly,
    r: f64,
    j: u32,
    route: Route,
    resolution: usize,
) -> Result<f64> {
    let prep = Prepared::new(model, u)?;
    let m = level_moments(model, &prep, r, route, resolution)?;
    Ok(k_from(model, r, j, &m))
}

fn k_from(model: &ModelShrinker, r: f64, j: u32, m: &LevelMoments) -> f64 {
    let s_pow = model.sup_scalar().powi(j as i32);
    s_pow * (r / m.rho) * (m.grad - 2.0 * m.euler_sq / (m.rho * m.rho))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KjStep {
    pub j: u32,
    /// `K_j - (4/r^2) K_{j+1}`.
    pub boundary: f64,
    /// Bulk form of the same quantity.
    pub bulk: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KjReport {
    pub r: f64,
    pub k: Vec<f64>,
    pub energy: f64,
    /// Measured `|K_0| / int_{b<r} |grad u|^2`.
    pub c_measured: f64,
    pub steps: Vec<KjStep>,
    pub max_residual: f64,
}

/// Verifies `K_j - (4/r^2) K_{j+1} = int_{b<r} S^j (|grad u|^2 (Delta b - 2/b) + 2 |E u|^2 / b^3)`
/// for `j < jmax` and measures the constant in `|K_0| <= C int_{b<r} |grad u|^2`.
pub fn check_kj_recursion(
    model: &ModelShrinker,
    u: &HoloPoly,
    r: f64,
    jmax: u32,
    route: Route,
    resolution: usize,
) -> Result<KjReport> {
    let prep = Prepared::new(model, u)?;
    let m = level_moments(model, &prep, r, route, resolution)?;
    let k: Vec<f64> = (0..=jmax).map(|j| k_from(model, r, j, &m)).collect();
    let energy = bulk_energy(model, &prep, r, route, resolution)?;
    let ball = model.ball_quadrature(r, resolution)?;
    let s = model.sup_scalar();
    let mut base = 0.0;
    for (z, w) in ball.iter() {
        let g = model.flat_geometry(z);
        let v = prep.at(z);
        let b = g.b;
        let lap_b = model.laplacian_b(b);
        base += w * (v.grad_sq * (lap_b - 2.0 / b) + 2.0 * v.eu.norm_sqr() / (b * b * b));
    }
    let steps: Vec<KjStep> = (0..jmax)
        .map(|j| {
            let boundary = k[j as usize] - 4.0 / (r * r) * k[j as usize + 1];
            let bulk = s.powi(j as i32) * base;
            KjStep {
                j,
                boundary,
                bulk,
                residual: (boundary - bulk).abs() / (1.0 + bulk.abs()),
            }
        })
        .collect();
    let max_residual = steps.iter().map(|s| s.residual).fold(0.0, f64::max);
    let c_measured = if energy > 0.0 {
        k[0].abs() / energy
    } else {
        0.0
    };
    Ok(KjReport {
        r,
        k,
        energy,
        c_measured,
        steps,
        max_residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RhoMu {
    pub r: f64,
    pub rho: f64,
    pub mu: f64,
    pub pass: bool,
}

/// `rho(r) = int |u_1|^2 / |grad b| / int |u|^2 / |grad b|` with `u_1 = L_{grad f} u`.
pub fn rho_mu(
    model: &ModelShrinker,
    u: &HoloPoly,
    d: f64,
    r: f64,
    cfg: &FrequencyConfig,
) -> Result<RhoMu> {
    if u.is_zero() {
        return Err(LabError::Precondition("rho is undefined for u = 0".into()));
    }
    let prep = Prepared::new(model, u)?;
    let m = level_moments(model, &prep, r, cfg.route, cfg.resolution)?;
    // |grad b| is constant on the level set and cancels; u_1 = E u / 2.
    let rho = 0.25 * m.euler_sq / m.l2;
    let mu = mu_constant(cfg.p_for(model), d);
    Ok(RhoMu {
        r,
        rho,
        mu,
        pass: rho <= mu,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyProfile {
    pub model: ModelShrinker,
    pub u: HoloPoly,
    pub d: f64,
    pub radii: Vec<f64>,
    #[serde(rename = "I")]
    pub i: Vec<f64>,
    #[serde(rename = "D")]
    pub d_values: Vec<f64>,
    #[serde(rename = "D_boundary")]
    pub d_boundary: Vec<f64>,
    #[serde(rename = "U")]
    pub u_values: Vec<f64>,
    pub rho: Vec<f64>,
    pub eta: Vec<f64>,
    pub monotone_q: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub mu: f64,
    pub r0: f64,
    pub config: FrequencyConfig,
}

fn check_increasing(radii: &[f64]) -> Result<()> {
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::Precondition(
            "orientation error: radii must be strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
struct Sample {
    i: f64,
    d: f64,
    d_boundary: f64,
    rho: f64,
}

fn sample(model: &ModelShrinker, prep: &Prepared, r: f64, cfg: &FrequencyConfig) -> Result<Sample> {
    let m = level_moments(model, prep, r, cfg.route, cfg.resolution)?;
    let d = d_prepared(model, prep, r, cfg.route, cfg.resolution)?;
    Ok(Sample {
        i: i_from(model, r, &m),
        d: d.bulk,
        d_boundary: d.boundary,
        rho: if m.l2 > 0.0 {
            0.25 * m.euler_sq / m.l2
        } else {
            0.0
        },
    })
}

fn frequency_at(
    model: &ModelShrinker,
    prep: &Prepared,
    r: f64,
    cfg: &FrequencyConfig,
) -> Result<f64> {
    let s = sample(model, prep, r, cfg)?;
    Ok(s.d / s.i)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub c1: f64,
    pub c2: f64,
    pub points: usize,
    pub max_deficit: f64,
}

/// Floor for calibrated constants; the monotone quantity needs `C1 > 0`.
pub const CONSTANT_FLOOR: f64 = 1e-3;

/// Measures the worst ratios in `U' >= -C1 U / r^{1+a} - C2 sqrt(mu) / r^{1+a}`
/// over `grid` (with `U'` from central differences) and returns constants
/// that each cover the whole deficit with 25% headroom.
pub fn calibrate_constants(
    model: &ModelShrinker,
    u: &HoloPoly,
    d: f64,
    grid: &[f64],
    cfg: &FrequencyConfig,
) -> Result<Calibration> {
    let prep = Prepared::new(model, u)?;
    let a = cfg.exponent();
    let sqrt_mu = mu_constant(cfg.p_for(model), d).sqrt();
    let rows: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&r| {
            let h = 1e-3 * r;
            let up = frequency_at(model, &prep, r + h, cfg)?;
            let dn = frequency_at(model, &prep, r - h, cfg)?;
            let uu = frequency_at(model, &prep, r, cfg)?;
            let deficit = (-(up - dn) / (2.0 * h)).max(0.0);
            Ok((r, uu, deficit))
        })
        .collect::<Result<_>>()?;
    let mut ratio1: f64 = 0.0;
    let mut ratio2: f64 = 0.0;
    let mut max_deficit: f64 = 0.0;
    for (r, uu, deficit) in rows {
        let scaled = deficit * r.powf(1.0 + a);
        max_deficit = max_deficit.max(deficit);
        if uu > 0.0 {
            ratio1 = ratio1.max(scaled / uu);
        }
        ratio2 = ratio2.max(scaled);
    }
    Ok(Calibration {
        c1: (1.25 * ratio1).max(CONSTANT_FLOOR),
        c2: (1.25 * ratio2 / sqrt_mu).max(CONSTANT_FLOOR),
        points: grid.len(),
        max_deficit,
    })
}

/// A geometric grid on `[lo, hi]` offset from `avoid` so the two are disjoint.
pub fn calibration_grid(lo: f64, hi: f64, n: usize, avoid: &[f64]) -> Vec<f64> {
    let ratio = hi / lo;
    (0..n)
        .map(|j| lo * ratio.powf((j as f64 + 0.37) / n as f64))
        .filter(|r| avoid.iter().all(|a| (a - r).abs() > 1e-9 * r))
        .collect()
}

/// `eta(r) = int_0^r C2 sqrt(mu) s^{-1-a} exp(-C1 / (a s^a)) ds`, by composite
/// Gauss-Legendre in `x = ln s` where the integrand is a smooth bump.
pub fn eta(r: f64, c1: f64, c2: f64, mu: f64, a: f64) -> f64 {
    let coef = c2 * mu.sqrt();
    // In x the integrand is coef y exp(-C1 y / a) with y = e^{-a x}.
    let integrand = |x: f64| {
        let y = (-a * x).exp();
        coef * y * (-c1 * y / a).exp()
    };
    // Below y = 800 a / C1 the integrand is under e^{-800} of its peak.
    let lo = -(800.0 * a / c1).ln() / a;
    let hi = r.ln();
    if lo >= hi {
        return 0.0;
    }
    let panels = 256;
    let rule = gauss_legendre(16);
    let width = (hi - lo) / panels as f64;
    (0..panels)
        .map(|p| {
            let a0 = lo + width * p as f64;
            rule.mapped(a0, a0 + width).integrate(integrand)
        })
        .sum()
}

/// Closed form `(C2 sqrt(mu) / C1) exp(-C1 / (a r^a))`.
pub fn eta_closed_form(r: f64, c1: f64, c2: f64, mu: f64, a: f64) -> f64 {
    c2 * mu.sqrt() / c1 * (-c1 / (a * r.powf(a))).exp()
}

pub fn frequency_profile(
    model: &ModelShrinker,
    u: &HoloPoly,
    d: f64,
    radii: &[f64],
    cfg: &FrequencyConfig,
) -> Result<FrequencyProfile> {
    cfg.validate(model)?;
    if radii.is_empty() {
        return Err(LabError::Precondition("empty radius grid".into()));
    }
    check_increasing(radii)?;
    for &r in radii {
        model.check_regular(r)?;
    }
    if u.is_zero() {
        return Err(LabError::Precondition(
            "I(r) vanishes identically for u = 0".into(),
        ));
    }
    let prep = Prepared::new(model, u)?;
    let samples: Vec<Sample> = radii
        .par_iter()
        .map(|&r| sample(model, &prep, r, cfg))
        .collect::<Result<_>>()?;
    let (c1, c2) = match (cfg.c1, cfg.c2) {
        (Some(c1), Some(c2)) => (c1, c2),
        (c1, c2) => {
            let lo = radii[0];
            let hi = radii[radii.len() - 1];
            let grid = calibration_grid(lo, hi.max(lo * 1.01), 4 * radii.len().max(32), radii);
            let cal = calibrate_constants(model, u, d, &grid, cfg)?;
            (c1.unwrap_or(cal.c1), c2.unwrap_or(cal.c2))
        }
    };
    let mu = mu_constant(cfg.p_for(model), d);
    let a = cfg.exponent();
    let i: Vec<f64> = samples.iter().map(|s| s.i).collect();
    let d_values: Vec<f64> = samples.iter().map(|s| s.d).collect();
    let u_values: Vec<f64> = samples.iter().map(|s| s.d / s.i).collect();
    let eta_values: Vec<f64> = radii.par_iter().map(|&r| eta(r, c1, c2, mu, a)).collect();
    let monotone_q = radii
        .iter()
        .zip(&u_values)
        .zip(&eta_values)
        .map(|((&r, &uu), &e)| uu * (-c1 / (a * r.powf(a))).exp() + e)
        .collect();
    Ok(FrequencyProfile {
        model: model.clone(),
        u: u.clone(),
        d,
        radii: radii.to_vec(),
        i,
        d_values,
        d_boundary: samples.iter().map(|s| s.d_boundary).collect(),
        u_values,
        rho: samples.iter().map(|s| s.rho).collect(),
        eta: eta_values,
        monotone_q,
        c1,
        c2,
        mu,
        r0: cfg.r0_for(model),
        config: cfg.clone(),
    })
}

/// `U(r) exp(-C1 / (a r^a)) + eta(r)` on the profile grid.
pub fn monotone_quantity(profile: &FrequencyProfile) -> Vec<f64> {
    profile.monotone_q.clone()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub pass: bool,
    /// Smallest `(q_{i+1} - q_i) / (1 + |q_i|)`.
    pub worst_step: f64,
    pub points: usize,
}

pub fn check_monotone_values(radii: &[f64], q: &[f64]) -> Result<MonotoneReport> {
    if radii.len() != q.len() {
        return Err(LabError::DimensionMismatch {
            expected: radii.len(),
            got: q.len(),
        });
    }
    check_increasing(radii)?;
    let worst_step = q
        .windows(2)
        .map(|w| (w[1] - w[0]) / (1.0 + w[0].abs()))
        .fold(f64::INFINITY, f64::min);
    Ok(MonotoneReport {
        pass: worst_step >= -1e-6,
        worst_step,
        points: q.len(),
    })
}

/// Checks the monotone quantity is nondecreasing; radii must exceed `R0`.
pub fn check_monotone(profile: &FrequencyProfile) -> Result<MonotoneReport> {
    check_increasing(&profile.radii)?;
    if let Some(&r) = profile.radii.iter().find(|&&r| r <= profile.r0) {
        return Err(LabError::Precondition(format!(
            "radius {r} does not exceed R0 = {}",
            profile.r0
        )));
    }
    check_monotone_values(&profile.radii, &profile.monotone_q)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyBound {
    pub max_u: f64,
    /// `d + eps sqrt(mu)`.
    pub bound_sqrt_mu: f64,
    /// `d + eps mu`.
    pub bound_mu: f64,
    pub pass_sqrt_mu: bool,
    pub pass_mu: bool,
}

/// `U(r) <= d + eps sqrt(mu)` and the weaker `d + eps mu` over radii above `R0`.
pub fn frequency_upper_bound(profile: &FrequencyProfile) -> FrequencyBound {
    let max_u = profile
        .radii
        .iter()
        .zip(&profile.u_values)
        .filter(|(r, _)| **r > profile.r0)
        .map(|(_, u)| *u)
        .fold(f64::NEG_INFINITY, f64::max);
    let eps = profile.config.epsilon;
    let bound_sqrt_mu = profile.d + eps * profile.mu.sqrt();
    let bound_mu = profile.d + eps * profile.mu;
    FrequencyBound {
        max_u,
        bound_sqrt_mu,
        bound_mu,
        pass_sqrt_mu: max_u <= bound_sqrt_mu,
        pass_mu: max_u <= bound_mu,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleCheck {
    pub rho: f64,
    /// `ln(I(2 rho) / I(rho))`.
    pub log_ratio: f64,
    /// `2 (d + eps sqrt(mu)) ln 2 - ln(I(2 rho) / I(rho))`.
    pub doubling_margin: f64,
    /// Right side minus left side of the logarithmic three-circle inequality.
    pub three_circle_margin: f64,
    pub pass: bool,
}

fn grid_value(profile: &FrequencyProfile, r: f64) -> Result<f64> {
    profile
        .radii
        .iter()
        .position(|&x| (x - r).abs() <= 1e-9 * r)
        .map(|i| profile.i[i])
        .ok_or(LabError::MissingGridPoint(r))
}

pub fn doubling_and_three_circle(
    profile: &FrequencyProfile,
    rhos: &[f64],
) -> Result<Vec<CircleCheck>> {
    let a = profile.config.exponent();
    let sqrt_mu = profile.mu.sqrt();
    rhos.iter()
        .map(|&rho| {
            if rho <= profile.r0 {
                return Err(LabError::Precondition(format!(
                    "rho = {rho} does not exceed R0 = {}",
                    profile.r0
                )));
            }
            let i1 = grid_value(profile, rho)?;
            let i2 = grid_value(profile, 2.0 * rho)?;
            let i4 = grid_value(profile, 4.0 * rho)?;
            let lhs = (i2 / i1).ln();
            let doubling_margin =
                2.0 * (profile.d + profile.config.epsilon * sqrt_mu) * 2f64.ln() - lhs;
            let growth = (profile.c1 / (a * rho.powf(a))).exp();
            let rhs = growth * (i4 / i2).ln()
                + profile.c2 * sqrt_mu * 2f64.ln() / a
                    * ((2.0 * rho).powf(-a) - (4.0 * rho).powf(-a))
                    * growth;
            let three_circle_margin = rhs - lhs;
            Ok(CircleCheck {
                rho,
                log_ratio: lhs,
                doubling_margin,
                three_circle_margin,
                pass: doubling_margin > 0.0 && three_circle_margin > 0.0,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JLedger {
    pub lambda: f64,
    pub radii: [f64; 4],
    pub j: [f64; 3],
    /// Constant `C` in `(ln I)' >= -C / r`.
    pub c: f64,
    pub c_from_log_derivative: f64,
    pub c_from_kj: f64,
    pub factor: f64,
    pub margin: f64,
    pub pass: bool,
}

/// `J_i = int_{r_0 < b < r_i} |u|^2 |grad b|^2` with `r_i = lambda^i R0`,
/// `lambda = 1 + 2/d`, and the check
/// `J_3 <= (1 + lambda^{n + 2(d + eps sqrt(mu))} + lambda^{C - n}) (J_2 - J_1)`.
pub fn j_ledger(
    model: &ModelShrinker,
    u: &HoloPoly,
    d: f64,
    r0: f64,
    cfg: &FrequencyConfig,
) -> Result<JLedger> {
    model.check_regular(r0)?;
    let prep = Prepared::new(model, u)?;
    let d_eff = d.max(1.0);
    let lambda = 1.0 + 2.0 / d_eff;
    let radii = [r0, lambda * r0, lambda * lambda * r0, lambda.powi(3) * r0];
    let n = model.n() as f64;
    let ni = model.n() as i32;
    let mut j = [0.0; 3];
    for i in 1..=3 {
        j[i - 1] = match cfg.route {
            Route::Quadrature => {
                let shell = model.shell_quadrature(r0, radii[i], cfg.resolution)?;
                shell
                    .iter()
                    .map(|(z, w)| {
                        let g = model.flat_geometry(z);
                        w * prep.u.evaluate(z).expect("arity checked").norm_sqr()
                            * g.grad_b_sq.unwrap_or(0.0)
                    })
                    .sum()
            }
            Route::ClosedForm => {
                // Coarea: J_i = int_{r_0}^{r_i} r^{n-1} I(r) dr.
                let rule = gauss_legendre(48).mapped(r0, radii[i]);
                let mut acc = 0.0;
                for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let m = level_moments(model, &prep, r, Route::ClosedForm, cfg.resolution)?;
                    acc += w * r.powi(ni - 1) * i_from(model, r, &m);
                }
                acc
            }
        };
    }
    // C from the measured lower bound of r (ln I)' on [r_0, r_3], and from the K_j recursion.
    let samples = 64;
    let mut c_log: f64 = 0.0;
    for t in 0..=samples {
        let r = r0 * (radii[3] / r0).powf(t as f64 / samples as f64);
        let m = level_moments(model, &prep, r, cfg.route, cfg.resolution)?;
        let log_der = i_prime_from(model, r, &m) / i_from(model, r, &m);
        c_log = c_log.max(-r * log_der);
    }
    let c_kj = if prep.u.degree() > 0 {
        check_kj_recursion(model, u, r0, 1, cfg.route, cfg.resolution)?.c_measured
    } else {
        0.0
    };
    let c = c_log.max(c_kj);
    let mu = mu_constant(cfg.p_for(model), d);
    let growth = n + 2.0 * (d + cfg.epsilon * mu.sqrt());
    let factor = 1.0 + lambda.powf(growth) + lambda.powf(c - n);
    let rhs = factor * (j[1] - j[0]);
    Ok(JLedger {
        lambda,
        radii,
        j,
        c,
        c_from_log_derivative: c_log,
        c_from_kj: c_kj,
        factor,
        margin: rhs - j[2],
        pass: j[2] <= rhs,
    })
}

/// Writes `r,I,D,U,eta,monotone_q` rows.
pub fn write_csv<W: Write>(profile: &FrequencyProfile, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| LabError::Io(std::io::Error::other(e));
    w.write_record(["r", "I", "D", "U", "eta", "monotone_q"])
        .map_err(io)?;
    for k in 0..profile.radii.len() {
        w.write_record(
            [
                profile.radii[k],
                profile.i[k],
                profile.d_values[k],
                profile.u_values[k],
                profile.eta[k],
                profile.monotone_q[k],
            ]
            .iter()
            .map(|v| format!("{v:.17e}")),
        )
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// `n` points geometrically spaced on `[lo, hi]`, endpoints included.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// `n` points evenly spaced on `[lo, hi]`, endpoints included.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn poly(s: &str) -> HoloPoly {
        HoloPoly::parse(s, None).unwrap()
    }

    const QUAD: Route = Route::Quadrature;
    const CLOSED: Route = Route::ClosedForm;

    #[test]
    fn sphere_moments_match_quadrature() {
        let g2 = ModelShrinker::gaussian(2).unwrap();
        let q = g2.level_set_quadrature(1.0, 256).unwrap();
        for alpha in [[0u32, 0], [1, 0], [2, 1], [3, 3]] {
            let u = HoloPoly::monomial(alpha.to_vec(), Complex64::new(1.0, 0.0));
            let quad = q.integrate(|z| u.evaluate(z).unwrap().norm_sqr());
            assert!((quad - sphere_moment(&alpha)).abs() < 1e-12, "{alpha:?}");
        }
    }

    #[test]
    fn i_examples() {
        let g1 = ModelShrinker::gaussian(1).unwrap();
        for r in [0.5, 2.0, 7.0] {
            for route in [CLOSED, QUAD] {
                let i = i_of_r(&g1, &poly("z"), r, route, 64).unwrap();
                assert!((i - 2.0 * PI * r * r).abs() < 1e-10 * i);
                let one = HoloPoly::constant(1, Complex64::new(1.0, 0.0));
                let i = i_of_r(&g1, &one, r, route, 64).unwrap();
                assert!((i - 2.0 * PI).abs() < 1e-12);
            }
        }
        let cyl = ModelShrinker::cylinder();
        for k in 1..=3 {
            let u = HoloPoly::monomial(vec![k], Complex64::new(1.0, 0.0));
            for r in [4.5, 6.0, 10.0] {
                let rho = (r * r - 4.0f64).sqrt();
                let exact = 16.0 * PI * PI * rho.powi(2 * k as i32 + 2) / r.powi(4);
                for route in [CLOSED, QUAD] {
                    let i = i_of_r(&cyl, &u, r, route, 256).unwrap();
                    assert!((i - exact).abs() < 1e-10 * exact, "k={k} r={r}");
                }
            }
        }
    }

    #[test]
    fn d_examples() {
        let g1 = ModelShrinker::gaussian(1).unwrap();
        let d = d_of_r(&g1, &poly("z"), 3.0, QUAD, 64).unwrap();
        assert!((d.bulk - 2.0 * PI * 9.0).abs() < 1e-10);
        assert!((d.boundary - 2.0 * PI * 9.0).abs() < 1e-10);
        let one = HoloPoly::constant(1, Complex64::new(1.0, 0.0));
        let d = d_of_r(&g1, &one, 3.0, QUAD, 64).unwrap();
        assert_eq!((d.bulk, d.boundary), (0.0, 0.0));
        let cyl = ModelShrinker::cylinder();
        for route in [CLOSED, QUAD] {
            let d = d_of_r(&cyl, &poly("w^2 + 3i w"), 7.0, route, 256).unwrap();
            assert!(d.relative_gap() < 1e-10);
        }
    }

    #[test]
    fn frequency_of_monomials_on_gaussian() {
        let g2 = ModelShrinker::gaussian(2).unwrap();
        let cfg = FrequencyConfig::default();
        let u = poly("z1^2 z2");
        let prof = frequency_profile(&g2, &u, 3.0, &[1.0, 5.0, 20.0], &cfg).unwrap();
        for v in &prof.u_values {
            assert!((v - 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cylinder_frequency_closed_form() {
        // U = k r^2 / (r^2 - 4) for u = w^k.
        let cyl = ModelShrinker::cylinder();
        let cfg = FrequencyConfig::default();
        let prof = frequency_profile(&cyl, &poly("w^2"), 2.0, &[4.5, 10.0, 40.0], &cfg).unwrap();
        for (r, v) in prof.radii.iter().zip(&prof.u_values) {
            assert!((v - 2.0 * r * r / (r * r - 4.0)).abs() < 1e-10);
        }
        let bound = frequency_upper_bound(&prof);
        assert!(bound.pass_sqrt_mu && bound.pass_mu);
    }

    #[test]
    fn derivative_identity() {
        let g1 = ModelShrinker::gaussian(1).unwrap();
        let c = check_derivative_i(&g1, &poly("z"), 3.0, 1e-3, CLOSED, 64).unwrap();
        assert!((c.identity - 4.0 * PI * 3.0).abs() < 1e-10);
        let cyl = ModelShrinker::cylinder();
        let c = check_derivative_i(&cyl, &poly("w"), 6.0, 6e-3, QUAD, 256).unwrap();
        assert!(c.residual < 1e-5, "{c:?}");
        let half = check_derivative_i(&cyl, &poly("w"), 6.0, 3e-3, QUAD, 256).unwrap();
        let ratio = c.residual / half.residual;
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn kj_examples() {
        let g1 = ModelShrinker::gaussian(1).unwrap();
        for j in 0..3 {
            assert!(k_j(&g1, &poly("z"), 2.0, j, QUAD, 64).unwrap().abs() < 1e-12);
        }
        let g2 = ModelShrinker::gaussian(2).unwrap();
        let rep = check_kj_recursion(&g2, &poly("z1"), 3.0, 2, QUAD, 256).unwrap();
        assert!((rep.k[0] - 2.0 * PI * PI * 27.0).abs() < 1e-9);
        assert!(rep.max_residual < 1e-10, "{rep:?}");
        let cyl = ModelShrinker::cylinder();
        for u in ["w", "w^2", "w^3 + w"] {
            let rep = check_kj_recursion(&cyl, &poly(u), 6.0, 3, QUAD, 256).unwrap();
            assert!(rep.max_residual < 1e-5, "{u}: {rep:?}");
        }
        let prod = ModelShrinker::product(vec![ModelShrinker::cylinder(), g2.clone()]).unwrap();
        let rep = check_kj_recursion(&prod, &poly("z1 z2 + z3^2"), 6.0, 3, CLOSED, 512).unwrap();
        assert!(rep.max_residual < 1e-6, "{rep:?}");
    }

    #[test]
    fn rho_examples() {
        let g1 = ModelShrinker::gaussian(1).unwrap();
        let cfg = FrequencyConfig::default();
        for d in 1..=4 {
            let u = HoloPoly::monomial(vec![d], Complex64::new(1.0, 0.0));
            let rm = rho_mu(&g1, &u, d as f64, 5.0, &cfg).unwrap();
            assert!((rm.rho - (d * d) as f64 / 4.0).abs() < 1e-12);
            assert!(rm.pass);
        }
        let one = HoloPoly::constant(1, Complex64::new(1.0, 0.0));
        assert_eq!(rho_mu(&g1, &one, 0.0, 5.0, &cfg).unwrap().rho, 0.0);
        let cyl = ModelShrinker::cylinder();
        let rm = rho_mu(&cyl, &poly("w^3"), 3.0, 6.0, &cfg.clone().with_route(QUAD)).unwrap();
        assert!(rm.mu / rm.rho > 1e3);
        assert!(rho_mu(&g1, &HoloPoly::zero(1), 1.0, 5.0, &cfg).is_err());
    }

    #[test]
    fn eta_matches_closed_form() {
        for (c1, c2) in [(1.3, 1.5e-3), (1e-3, 1e-3), (4.0, 0.2)] {
            for r in [4.5, 10.0, 40.0] {
                let mu = mu_constant(4, 2.0);
                let num = eta(r, c1, c2, mu, 0.5);
                let exact = eta_closed_form(r, c1, c2, mu, 0.5);
                assert!((num - exact).abs() < 1e-9 * exact, "{num} vs {exact}");
            }
        }
    }

    #[test]
    fn monotone_on_cylinder() {
        let cyl = ModelShrinker::cylinder();
        let cfg = FrequencyConfig::default();
        let radii = linear_grid(4.5, 40.0, 64);
        for u in ["w", "w^2", "w^3"] {
            let prof =
                frequency_profile(&cyl, &poly(u), u.len() as f64 / 2.0, &radii, &cfg).unwrap();
            let rep = check_monotone(&prof).unwrap();
            assert!(rep.pass, "{u}: {rep:?}");
        }
    }

    #[test]
    fn monotone_orientation_error() {
        let cyl = ModelShrinker::cylinder();
        let cfg = FrequencyConfig::default();
        let mut prof = frequency_profile(&cyl, &poly("w"), 1.0, &[5.0, 6.0, 7.0], &cfg).unwrap();
        prof.radii.reverse();
        prof.monotone_q.reverse();
        assert!(
            matches!(check_monotone(&prof), Err(LabError::Precondition(m)) if m.contains("orientation"))
        );
        assert!(frequency_profile(&cyl, &poly("w"), 1.0, &[7.0, 5.0], &cfg).is_err());
    }

    #[test]
    fn doubling_and_three_circle_examples() {
        let cfg = FrequencyConfig::default();
        let radii = [8.0, 12.0, 16.0, 24.0, 32.0, 48.0];
        let g1 = ModelShrinker::gaussian(1).unwrap();
        for d in 0..=3 {
            let u = HoloPoly::monomial(vec![d], Complex64::new(1.0, 0.0));
            let prof = frequency_profile(&g1, &u, d as f64, &radii, &cfg).unwrap();
            let checks = doubling_and_three_circle(&prof, &[8.0, 12.0]).unwrap();
            for c in &checks {
                assert!((c.log_ratio - 2.0 * d as f64 * 2f64.ln()).abs() < 1e-10);
                assert!(c.pass, "{c:?}");
            }
        }
        let cyl = ModelShrinker::cylinder();
        let prof = frequency_profile(&cyl, &poly("w^2"), 2.0, &radii, &cfg).unwrap();
        for c in doubling_and_three_circle(&prof, &[8.0, 12.0]).unwrap() {
            assert!(c.pass, "{c:?}");
        }
        assert!(matches!(
            doubling_and_three_circle(&prof, &[10.0]),
            Err(LabError::MissingGridPoint(_))
        ));
    }

    #[test]
    fn j_ledger_examples() {
        let cfg = FrequencyConfig::default();
        let g1 = ModelShrinker::gaussian(1).unwrap();
        let ledger = j_ledger(&g1, &poly("z"), 1.0, 4.0, &cfg).unwrap();
        // J_i = 2 pi int_{r0}^{r_i} r^3 dr for u = z on C.
        let exact = |ri: f64| 2.0 * PI * (ri.powi(4) - 256.0) / 4.0;
        for i in 0..3 {
            assert!((ledger.j[i] - exact(ledger.radii[i + 1])).abs() < 1e-9 * ledger.j[i]);
        }
        assert!(ledger.pass);
        let quad = j_ledger(&g1, &poly("z"), 1.0, 4.0, &cfg.clone().with_route(QUAD)).unwrap();
        for i in 0..3 {
            assert!((quad.j[i] - ledger.j[i]).abs() < 1e-9 * ledger.j[i]);
        }
        let one = HoloPoly::constant(1, Complex64::new(1.0, 0.0));
        assert!(j_ledger(&g1, &one, 0.0, 4.0, &cfg).unwrap().pass);
        let cyl = ModelShrinker::cylinder();
        for route in [CLOSED, QUAD] {
            let l = j_ledger(&cyl, &poly("w^2"), 2.0, 6.0, &cfg.clone().with_route(route)).unwrap();
            assert!(l.pass, "{l:?}");
        }
    }

    #[test]
    fn config_validation() {
        let cyl = ModelShrinker::cylinder();
        let mut cfg = FrequencyConfig::default();
        assert!(cfg.validate(&cyl).is_ok());
        assert!((cfg.r0_for(&cyl) - 2.0 * 5f64.sqrt()).abs() < 1e-12);
        cfg.delta = 0.7;
        assert!(cfg.validate(&cyl).is_err());
        cfg.delta = 0.5;
        cfg.r0 = Some(1.5);
        assert!(cfg.validate(&cyl).is_err());
        let parsed: FrequencyConfig = serde_json::from_str(r#"{"sigma": 0.25}"#).unwrap();
        assert_eq!(parsed.sigma, 0.25);
        assert_eq!(parsed.resolution, 256);
        assert!(serde_json::from_str::<FrequencyConfig>(r#"{"sigmaa": 0.25}"#).is_err());
    }

    #[test]
    fn csv_rows() {
        let cyl = ModelShrinker::cylinder();
        let prof = frequency_profile(
            &cyl,
            &poly("w^2"),
            2.0,
            &linear_grid(4.5, 40.0, 64),
            &FrequencyConfig::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&prof, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 65);
        assert!(text.starts_with("r,I,D,U,eta,monotone_q"));
    }
}
