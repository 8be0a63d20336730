//! The all-checks harness behind `verify-all`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::forms::{
    dim_forms, f_hodge_laplacian, form_counting_check, form_integral_identity_check,
    interior_product, kernel_dimension, kernel_ledger, max_monomial_form_eigenvalue,
    monomial_form_basis, one_form_spectrum_oracle, HoloForm,
};
use crate::frequency::{
    check_derivative_i, check_kj_recursion, check_monotone, d_of_r, doubling_and_three_circle, eta,
    eta_closed_form, frequency_profile, frequency_upper_bound, i_of_r, j_ledger, linear_grid,
    rho_mu, FrequencyConfig, Route,
};
use crate::heat::{
    ancient_transform_check, compare_with_series, energy_decay, evolve_series, project_polynomial,
    HeatPoly, RealPoly, Scheme,
};
use crate::model::{ModelKind, ModelShrinker};
use crate::poly::{decompose_by_eigenvalue, dim_o_d, lie_derivative_nabla_f, HoloPoly};
use crate::report::{Check, VerificationReport};
use crate::spectrum::{
    analytic_spectrum, binomial, count_eigenvalues, counting_bound, oracle_spectrum_1d, Potential1d,
};

fn default_d_max() -> u32 {
    6
}
fn default_samples() -> usize {
    20
}
fn default_seed() -> u64 {
    20240611
}
fn default_s() -> f64 {
    1.0
}
fn default_x_max() -> f64 {
    12.0
}
fn default_n_grid() -> usize {
    800
}
fn default_steps() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatConfig {
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_n_grid")]
    pub n_grid: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

fn default_scheme() -> Scheme {
    Scheme::ExtrapolatedBackwardEuler
}

impl Default for HeatConfig {
    fn default() -> Self {
        Self {
            s: default_s(),
            x_max: default_x_max(),
            n_grid: default_n_grid(),
            steps: default_steps(),
            scheme: default_scheme(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Largest growth order in counting checks.
    #[serde(default = "default_d_max")]
    pub d_max: u32,
    /// Random polynomials per decomposition check.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub frequency: FrequencyConfig,
    #[serde(default)]
    pub heat: HeatConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            d_max: default_d_max(),
            samples: default_samples(),
            seed: default_seed(),
            frequency: FrequencyConfig::default(),
            heat: HeatConfig::default(),
        }
    }
}

/// Short identifier used as the check-name prefix.
pub fn model_key(model: &ModelShrinker) -> String {
    fn key(kind: &ModelKind) -> String {
        match kind {
            ModelKind::Gaussian { m } => format!("gaussian{m}"),
            ModelKind::Cylinder => "cylinder".into(),
            ModelKind::Product { factors } => {
                factors.iter().map(key).collect::<Vec<_>>().join("_x_")
            }
        }
    }
    key(model.kind())
}

/// Random polynomial with `terms` monomials of degree `<= max_degree` and
/// coefficients in the unit square.
pub fn random_poly(rng: &mut impl Rng, m: usize, max_degree: u32, terms: usize) -> HoloPoly {
    let mut out = HoloPoly::zero(m);
    for _ in 0..terms {
        let mut alpha = vec![0u32; m];
        let mut left = rng.random_range(0..=max_degree);
        for slot in alpha.iter_mut().take(m - 1) {
            let take = rng.random_range(0..=left);
            *slot = take;
            left -= take;
        }
        alpha[m - 1] = left;
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        out = &out + &HoloPoly::monomial(alpha, c);
    }
    out
}

fn monomials(k: usize, max_degree: u32) -> Vec<HoloPoly> {
    crate::forms::multi_indices_up_to(k, max_degree)
        .into_iter()
        .map(|alpha| HoloPoly::monomial(alpha, Complex64::new(1.0, 0.0)))
        .collect()
}

/// `w^j` in the last flat variable: the radial test family on every model.
fn power_of_last(k: usize, j: u32) -> HoloPoly {
    let mut alpha = vec![0; k];
    alpha[k - 1] = j;
    HoloPoly::monomial(alpha, Complex64::new(1.0, 0.0))
}

/// Closed-form frequency of `w^j` on `(S^2)^s x C^k`: `j r^2 / (r^2 - 4s)`.
pub fn radial_frequency(model: &ModelShrinker, j: u32, r: f64) -> f64 {
    j as f64 * r * r / (r * r - 4.0 * model.sup_scalar())
}

/// Multiplicity of `lambda` counted directly over flat degrees and sphere harmonics.
fn brute_multiplicity(k: usize, spheres: usize, half: u64) -> u64 {
    fn rec(k: usize, spheres: usize, half: u64) -> u64 {
        if spheres == 0 {
            if k == 0 {
                return u64::from(half == 0);
            }
            return binomial(2 * k as u64 + half - 1, 2 * k as u64 - 1);
        }
        let mut total = 0;
        let mut l = 0u64;
        // The sphere of area 8 pi has eigenvalues l(l+1)/2.
        while l * (l + 1) <= half {
            total += (2 * l + 1) * rec(k, spheres - 1, half - l * (l + 1));
            l += 1;
        }
        total
    }
    rec(k, spheres, half)
}

/// Exact `U(r)` for a member of a test family.
type ExactFrequency = Box<dyn Fn(f64) -> f64>;

type Body = Box<dyn Fn() -> Result<(bool, f64, Option<String>)> + Send + Sync>;

struct Spec {
    name: String,
    anchor: &'static str,
    body: Body,
}

fn spec<F>(prefix: &str, name: &str, anchor: &'static str, body: F) -> Spec
where
    F: Fn() -> Result<(bool, f64, Option<String>)> + Send + Sync + 'static,
{
    Spec {
        name: format!("{prefix}.{name}"),
        anchor,
        body: Box::new(body),
    }
}

/// Margin `tol - err` reported with the pass flag `err < tol`.
fn within(err: f64, tol: f64) -> (bool, f64, Option<String>) {
    (
        err < tol,
        tol - err,
        Some(format!("error {err:.3e} vs tolerance {tol:.1e}")),
    )
}

fn model_checks(model: &ModelShrinker, cfg: &VerifyConfig) -> Vec<Spec> {
    let key = model_key(model);
    let k = model.flat_dim();
    let mut out = Vec::new();
    let fcfg = cfg.frequency.clone();
    let res = fcfg.resolution;
    let gaussian = model.is_gaussian();
    let r0 = fcfg.r0_for(model);

    {
        let model = model.clone();
        out.push(spec(
            &key,
            "spectrum.catalog_multiplicities",
            "drift Laplacian spectrum",
            move || {
                let cat = analytic_spectrum(&model, 4.0)?;
                let mut worst = 0u64;
                for line in &cat.lines {
                    let half = (2.0 * line.eigenvalue).round() as u64;
                    let brute = brute_multiplicity(model.flat_dim(), model.spheres(), half);
                    worst = worst.max(brute.abs_diff(line.multiplicity));
                }
                Ok((worst == 0, -(worst as f64), None))
            },
        ));
    }
    out.push(spec(
        &key,
        "spectrum.oracle_1d",
        "drift Laplacian spectrum",
        || {
            let values = oracle_spectrum_1d(Potential1d::Gaussian, 12.0, 800, 5)?;
            let err = values
                .iter()
                .enumerate()
                .map(|(i, v)| (v - 0.5 * i as f64).abs())
                .fold(0.0, f64::max);
            Ok(within(err, 1e-6))
        },
    ));
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "spectrum.first_nonzero",
            "drift Laplacian spectrum",
            move || {
                let cat = analytic_spectrum(&model, 2.0)?;
                let first = cat.first_nonzero().map_or(f64::NAN, |l| l.eigenvalue);
                Ok(within((first - 0.5).abs(), 1e-15))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "spectrum.completeness_guard",
            "drift Laplacian spectrum",
            move || {
                let cat = analytic_spectrum(&model, 1.0)?;
                let refused = matches!(
                    count_eigenvalues(&cat, 0.0, 2.0),
                    Err(LabError::Completeness { .. })
                );
                Ok((refused, 0.0, None))
            },
        ));
    }
    {
        let model = model.clone();
        let d_max = cfg.d_max;
        out.push(spec(
            &key,
            "dimension.counting_bound",
            "dim O_d <= 1 + count/2",
            move || {
                let mut margin = f64::INFINITY;
                let mut pass = true;
                for d in 1..=d_max {
                    let t = counting_bound(&model, d as f64)?;
                    pass &= t.pass;
                    margin = margin.min(t.bound_exact - t.dim_od as f64);
                }
                Ok((pass, margin, None))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "dimension.equality_case",
            "equality only on the Gaussian",
            move || {
                let t = counting_bound(&model, 1.0)?;
                let equal_m1 = t.sharp && t.dim_od == model.m() as u64 + 1;
                let pass = if model.is_gaussian() {
                    equal_m1
                } else {
                    !equal_m1
                };
                Ok((
                    pass,
                    t.bound_exact - t.dim_od as f64,
                    Some(format!("dim O_1 = {}", t.dim_od)),
                ))
            },
        ));
    }
    {
        let model = model.clone();
        let samples = cfg.samples;
        let seed = cfg.seed;
        out.push(spec(
            &key,
            "poly.decomposition_round_trip",
            "eigen-decomposition of O_d",
            move || {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut worst: f64 = 0.0;
                let mut consistent = true;
                for _ in 0..samples {
                    let u = random_poly(&mut rng, model.flat_dim(), 6, 8);
                    let dec = decompose_by_eigenvalue(&model, &u, 6.0, 1e-12, 400)?;
                    worst = worst.max(dec.sum(model.flat_dim()).max_abs_diff(&u));
                    consistent &= dec.growth_consistent();
                }
                let (pass, margin, detail) = within(worst, 1e-10);
                Ok((pass && consistent, margin, detail))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "poly.lie_derivative_eigen",
            "L_{grad f} z^a = |a|/2 z^a",
            move || {
                let mut worst: f64 = 0.0;
                for u in monomials(model.flat_dim(), 6) {
                    let lu = lie_derivative_nabla_f(&model, &u)?;
                    worst = worst.max(
                        lu.max_abs_diff(&u.scale(Complex64::new(u.degree() as f64 / 2.0, 0.0))),
                    );
                }
                Ok(within(worst, 1e-15))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(&key, "poly.dimension_formula", "dim O_d", move || {
            let k = model.flat_dim() as u64;
            let mut worst = 0u64;
            for d in 0..=6u64 {
                let brute = crate::forms::multi_indices_up_to(k as usize, d as u32).len() as u64;
                worst = worst.max(brute.abs_diff(dim_o_d(&model, d as f64)));
            }
            Ok((worst == 0, 0.0, None))
        }));
    }
    {
        let model = model.clone();
        let fcfg = fcfg.clone();
        out.push(spec(
            &key,
            "frequency.sharp_closed_form",
            "frequency sharpness",
            move || {
                let radii = if model.sup_scalar() == 0.0 {
                    linear_grid(1.0, 40.0, 16)
                } else {
                    linear_grid(r0, 40.0, 16)
                };
                let mut worst: f64 = 0.0;
                let family: Vec<(HoloPoly, ExactFrequency)> = if model.is_gaussian() {
                    monomials(model.flat_dim(), 5)
                        .into_iter()
                        .filter(|u| u.degree() > 0)
                        .map(|u| {
                            let d = u.degree() as f64;
                            (u, Box::new(move |_| d) as ExactFrequency)
                        })
                        .collect()
                } else {
                    let m2 = model.clone();
                    (1..=3)
                        .map(|j| {
                            let m3 = m2.clone();
                            (
                                power_of_last(model.flat_dim(), j),
                                Box::new(move |r| radial_frequency(&m3, j, r)) as ExactFrequency,
                            )
                        })
                        .collect()
                };
                for (u, exact) in &family {
                    let prof = frequency_profile(
                        &model,
                        u,
                        u.degree() as f64,
                        &radii,
                        &fcfg.clone().with_route(Route::ClosedForm),
                    )?;
                    for (r, v) in prof.radii.iter().zip(&prof.u_values) {
                        worst = worst.max((v - exact(*r)).abs());
                    }
                }
                Ok(within(worst, 1e-8))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "frequency.sharp_quadrature",
            "frequency sharpness",
            move || {
                let radii = [r0.max(1.0) + 0.5, 10.0, 40.0];
                let mut worst: f64 = 0.0;
                for u in monomials(model.flat_dim(), 3)
                    .into_iter()
                    .filter(|u| u.degree() > 0)
                {
                    for &r in &radii {
                        let quad = d_of_r(&model, &u, r, Route::Quadrature, res)?.bulk
                            / i_of_r(&model, &u, r, Route::Quadrature, res)?;
                        let closed = d_of_r(&model, &u, r, Route::ClosedForm, res)?.bulk
                            / i_of_r(&model, &u, r, Route::ClosedForm, res)?;
                        worst = worst.max((quad - closed).abs());
                    }
                }
                Ok(within(worst, 1e-4))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "frequency.i_prime_identity",
            "derivative of I",
            move || {
                let mut worst: f64 = 0.0;
                let radii: Vec<f64> = [4.5, 6.0, 10.0, 20.0]
                    .into_iter()
                    .filter(|&r| model.check_regular(0.999 * r).is_ok())
                    .collect();
                for j in 1..=3 {
                    let u = power_of_last(model.flat_dim(), j);
                    for &r in &radii {
                        let c =
                            check_derivative_i(&model, &u, r, 1e-3 * r, Route::Quadrature, res)?;
                        worst = worst.max(c.residual);
                    }
                }
                Ok(within(worst, 1e-5))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "frequency.i_prime_second_order",
            "derivative of I",
            move || {
                let u = power_of_last(model.flat_dim(), 3);
                let r = 6.0;
                let coarse = check_derivative_i(&model, &u, r, 2e-2 * r, Route::ClosedForm, res)?;
                let fine = check_derivative_i(&model, &u, r, 1e-2 * r, Route::ClosedForm, res)?;
                let ratio = coarse.residual / fine.residual;
                let pass = (3.5..4.5).contains(&ratio) || coarse.residual < 1e-11;
                Ok((
                    pass,
                    ratio,
                    Some(format!("error ratio {ratio:.3} on halving h")),
                ))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "frequency.d_bulk_vs_boundary",
            "divergence theorem for D",
            move || {
                let mut worst: f64 = 0.0;
                for u in monomials(model.flat_dim(), 3) {
                    for r in [r0 + 0.5, 12.0] {
                        worst = worst
                            .max(d_of_r(&model, &u, r, Route::Quadrature, res)?.relative_gap());
                    }
                }
                Ok(within(worst, 1e-6))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "geometry.volume_identity",
            "nV - rV' identity",
            move || {
                let radii = if model.sup_scalar() == 0.0 {
                    vec![0.5, 3.0, 11.0]
                } else {
                    vec![6.0, 10.0, 20.0]
                };
                let tol = if model.sup_scalar() == 0.0 {
                    1e-10
                } else {
                    1e-6
                };
                let worst = radii
                    .iter()
                    .map(|&r| model.verify_volume_identity(r, res))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(0.0, f64::max);
                Ok(within(worst, tol))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "geometry.volume_closed_form",
            "nV - rV' identity",
            move || {
                // With S = s constant and |grad f| = rho/2 on the level set, the right
                // side is 2 s V - 4 s A / rho.
                let r = if model.sup_scalar() == 0.0 { 3.0 } else { 4.0 };
                let (v, v_prime) = model.volume_area(r)?;
                let lhs = model.n() as f64 * v - r * v_prime;
                let s = model.sup_scalar();
                let rhs = 2.0 * s * v - 4.0 * s * model.level_set_area(r)? / model.flat_radius(r);
                let mut err = (lhs - rhs).abs() / (1.0 + lhs.abs());
                if model.spheres() == 1 && model.flat_dim() == 1 {
                    err = err.max((lhs - 128.0 * PI * PI).abs() / (128.0 * PI * PI));
                }
                Ok(within(err, 1e-10))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "frequency.kj_recursion",
            "K_j recursion",
            move || {
                let mut worst: f64 = 0.0;
                for j in 1..=3 {
                    let u = power_of_last(model.flat_dim(), j);
                    let rep = check_kj_recursion(
                        &model,
                        &u,
                        r0 + 1.0,
                        3,
                        Route::ClosedForm,
                        res.max(256),
                    )?;
                    worst = worst.max(rep.max_residual);
                }
                Ok(within(worst, 1e-6))
            },
        ));
    }
    {
        let model = model.clone();
        let fcfg = fcfg.clone();
        out.push(spec(
            &key,
            "frequency.rho_below_mu",
            "rho(r) <= mu",
            move || {
                let mut pass = true;
                let mut margin = f64::INFINITY;
                let mut exact_err: f64 = 0.0;
                for u in monomials(model.flat_dim(), 4)
                    .into_iter()
                    .filter(|u| u.degree() > 0)
                {
                    let d = u.degree() as f64;
                    for r in [r0 + 0.5, 10.0, 40.0] {
                        let rm = rho_mu(&model, &u, d, r, &fcfg)?;
                        pass &= rm.pass;
                        margin = margin.min(rm.mu - rm.rho);
                        exact_err = exact_err.max((rm.rho - d * d / 4.0).abs());
                    }
                }
                // The flat factor carries u, so rho = d^2/4 for homogeneous u on every model.
                Ok((
                    pass && exact_err < 1e-8,
                    margin,
                    Some(format!("max |rho - d^2/4| = {exact_err:.2e}")),
                ))
            },
        ));
    }
    {
        let model = model.clone();
        let fcfg = fcfg.clone();
        out.push(spec(
            &key,
            "frequency.monotone_quantity",
            "monotone quantity",
            move || {
                let radii = linear_grid(r0 + 0.03, 40.0, 64);
                let mut worst = f64::INFINITY;
                let mut pass = true;
                for j in 1..=3 {
                    let u = power_of_last(model.flat_dim(), j);
                    let prof = frequency_profile(&model, &u, j as f64, &radii, &fcfg)?;
                    let rep = check_monotone(&prof)?;
                    pass &= rep.pass;
                    worst = worst.min(rep.worst_step);
                }
                Ok((pass, worst + 1e-6, None))
            },
        ));
    }
    {
        let model = model.clone();
        let fcfg = fcfg.clone();
        out.push(spec(
            &key,
            "frequency.doubling_three_circle",
            "doubling and three-circle",
            move || {
                let radii = [8.0, 12.0, 16.0, 24.0, 32.0, 48.0];
                let mut margin = f64::INFINITY;
                let mut pass = true;
                for j in 0..=3 {
                    let u = power_of_last(model.flat_dim(), j);
                    let prof = frequency_profile(&model, &u, j as f64, &radii, &fcfg)?;
                    for c in doubling_and_three_circle(&prof, &[8.0, 12.0])? {
                        pass &= c.pass;
                        margin = margin.min(c.doubling_margin).min(c.three_circle_margin);
                    }
                }
                Ok((pass, margin, None))
            },
        ));
    }
    {
        let model = model.clone();
        let fcfg = fcfg.clone();
        out.push(spec(
            &key,
            "frequency.upper_bound",
            "U <= d + eps sqrt(mu)",
            move || {
                let radii = linear_grid(r0 + 0.03, 40.0, 32);
                let mut margin = f64::INFINITY;
                let mut pass = true;
                for j in 1..=3 {
                    let u = power_of_last(model.flat_dim(), j);
                    let prof = frequency_profile(&model, &u, j as f64, &radii, &fcfg)?;
                    let b = frequency_upper_bound(&prof);
                    pass &= b.pass_sqrt_mu;
                    margin = margin.min(b.bound_sqrt_mu - b.max_u);
                }
                Ok((pass, margin, None))
            },
        ));
    }
    {
        let model = model.clone();
        let fcfg = fcfg.clone();
        out.push(spec(&key, "frequency.j_ledger", "J_i ledger", move || {
            let mut margin = f64::INFINITY;
            let mut pass = true;
            for j in 0..=3 {
                let u = power_of_last(model.flat_dim(), j);
                let l = j_ledger(&model, &u, j as f64, r0, &fcfg)?;
                pass &= l.pass;
                margin = margin.min(l.margin / (1.0 + l.j[2]));
            }
            Ok((pass, margin, None))
        }));
    }
    out.push(spec(
        &key,
        "frequency.eta_closed_form",
        "monotone quantity",
        || {
            let mut worst: f64 = 0.0;
            for (c1, c2) in [(1.3, 1.5e-3), (1e-3, 1e-3)] {
                for r in [4.5, 10.0, 40.0] {
                    let mu = crate::frequency::mu_constant(4, 2.0);
                    let e = eta_closed_form(r, c1, c2, mu, 0.5);
                    worst = worst.max((eta(r, c1, c2, mu, 0.5) - e).abs() / e);
                }
            }
            Ok(within(worst, 1e-8))
        },
    ));
    {
        let heat = cfg.heat.clone();
        out.push(spec(
            &key,
            "heat.timestep_oracle",
            "series solution of the f-heat equation",
            move || {
                let x2 = RealPoly::new(1, [(vec![2], 1.0)])?;
                let c = compare_with_series(
                    &x2,
                    heat.s,
                    heat.x_max,
                    heat.n_grid,
                    heat.steps,
                    heat.scheme,
                )?;
                Ok(within(c.l2_error, 1e-3))
            },
        ));
    }
    out.push(spec(
        &key,
        "heat.first_order_convergence",
        "series solution of the f-heat equation",
        || {
            let x2 = RealPoly::new(1, [(vec![2], 1.0)])?;
            let a = compare_with_series(&x2, 1.0, 12.0, 800, 100, Scheme::BackwardEuler)?;
            let b = compare_with_series(&x2, 1.0, 12.0, 800, 200, Scheme::BackwardEuler)?;
            let ratio = a.l2_error / b.l2_error;
            Ok((
                (1.7..2.3).contains(&ratio),
                ratio,
                Some(format!("error ratio {ratio:.3}")),
            ))
        },
    ));
    out.push(spec(
        &key,
        "heat.projection",
        "series solution of the f-heat equation",
        || {
            let x2 = RealPoly::new(1, [(vec![2], 1.0)])?;
            let sol = project_polynomial(&x2, 3.0)?;
            let by = sol.by_eigenvalue();
            let err = (by.get(&0).copied().unwrap_or(0.0) - 2.0).abs()
                + (by.get(&2).copied().unwrap_or(0.0) - 1.0).abs();
            let evolved = evolve_series(&sol, 2f64.ln(), &[1.0])? - (2.0 - 0.5);
            Ok(within(err + evolved.abs(), 1e-12))
        },
    ));
    out.push(spec(
        &key,
        "heat.energy_decay",
        "series solution of the f-heat equation",
        || {
            let p = RealPoly::new(1, [(vec![4], 1.0), (vec![1], -3.0), (vec![0], 2.0)])?;
            let sol = project_polynomial(&p, 2.0)?;
            let decay = energy_decay(&sol, &[0.0, 0.25, 0.5, 1.0, 2.0, 4.0]);
            Ok((
                decay.nonincreasing && !sol.truncation_warning,
                sol.tail_energy,
                None,
            ))
        },
    ));
    out.push(spec(
        &key,
        "heat.ancient_transform",
        "transform to f-caloric function",
        || {
            let mut worst: f64 = 0.0;
            let mut inputs: Vec<HeatPoly> = (0..=4).map(HeatPoly::heat_polynomial).collect();
            inputs.push(HeatPoly::parse("x^2 + 2t")?);
            for u in &inputs {
                let c = ancient_transform_check(u, &[0.0, 0.5, 1.0, 3.0])?;
                worst = worst
                    .max(c.symbolic_residual)
                    .max(c.sampled_residual)
                    .max(c.round_trip_error);
            }
            Ok((worst == 0.0, -worst, None))
        },
    ));
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "forms.eigenvalue_law",
            "Hodge Laplacian of monomial forms",
            move || {
                let kk = model.flat_dim().min(3);
                let mut worst: f64 = 0.0;
                for p in 0..=kk {
                    for (alpha, index) in monomial_form_basis(model.flat_dim(), p, 6) {
                        let omega = HoloForm::monomial(alpha.clone(), index.clone())?;
                        let expected = (alpha.iter().sum::<u32>() as f64 + p as f64) / 2.0;
                        let lap = f_hodge_laplacian(&model, &omega)?;
                        worst = worst
                            .max(lap.max_abs_diff(&omega.scale(Complex64::new(expected, 0.0)))?);
                    }
                }
                Ok(within(worst, 1e-14))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "forms.interior_square_zero",
            "interior product",
            move || {
                let mut worst: f64 = 0.0;
                for p in 2..=model.flat_dim().min(3) {
                    for (alpha, index) in monomial_form_basis(model.flat_dim(), p, 3) {
                        let omega = HoloForm::monomial(alpha, index)?;
                        let twice = interior_product(&model, &interior_product(&model, &omega)?)?;
                        worst = worst.max(
                            twice
                                .components()
                                .map(|(_, c)| c.max_abs_coeff())
                                .fold(0.0, f64::max),
                        );
                    }
                }
                Ok((worst == 0.0, -worst, None))
            },
        ));
    }
    {
        let n_real = 2 * k;
        out.push(spec(
            &key,
            "forms.one_form_gap",
            "lambda < 1/2 forces eta = 0",
            move || {
                let values = one_form_spectrum_oracle(n_real.min(4), 12.0, 800, 6)?;
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                Ok((min >= 0.5 - 1e-6, min - 0.5 + 1e-6, None))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "forms.counting_bound",
            "counting multiplicity for forms",
            move || {
                let mut pass = true;
                let mut margin = f64::INFINITY;
                for p in 1..=2 {
                    for mu in 0..=4 {
                        let t = form_counting_check(&model, p, mu)?;
                        pass &= t.pass;
                        margin = margin.min(t.count as f64 - t.dim as f64);
                    }
                }
                Ok((pass, margin, None))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "forms.sharpness_witness",
            "counting multiplicity for forms",
            move || {
                let lambda = model.ricci_bound_lambda();
                let top = max_monomial_form_eigenvalue(&model, 1, 0)?;
                let horizon = 0.5 * 0.0 + lambda;
                let pass = if gaussian {
                    (top - horizon).abs() < 1e-15
                } else {
                    top <= horizon
                };
                Ok((
                    pass,
                    horizon - top,
                    Some(format!(
                        "max eigenvalue {top} vs mu/2 + p Lambda = {horizon}"
                    )),
                ))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "forms.kernel_koszul",
            "injectivity of interior product",
            move || {
                // Exactness of the Koszul complex: ker on p-forms of growth mu equals
                // the image of (p+1)-forms of growth mu - 1.
                fn koszul(model: &ModelShrinker, p: usize, mu: u32) -> u64 {
                    if mu == 0 || p >= model.flat_dim() {
                        return 0;
                    }
                    dim_forms(model, p + 1, (mu - 1) as f64) - koszul(model, p + 1, mu - 1)
                }
                let mut worst = 0u64;
                for p in 1..=model.flat_dim().min(3) {
                    for mu in 0..=5u32 {
                        let kd = kernel_dimension(&model, p, mu)?;
                        worst = worst.max(kd.abs_diff(koszul(&model, p, mu)));
                    }
                }
                if model.flat_dim() == 2 {
                    for mu in 1..=5u32 {
                        worst = worst.max(
                            kernel_dimension(&model, 1, mu)?
                                .abs_diff(dim_o_d(&model, (mu - 1) as f64)),
                        );
                    }
                }
                Ok((worst == 0, -(worst as f64), None))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "forms.kernel_ledger",
            "injectivity of interior product",
            move || {
                let mut pass = true;
                let mut margin = f64::INFINITY;
                for p in 1..=2 {
                    for mu in 0..=4 {
                        let t = kernel_ledger(&model, p, mu)?;
                        pass &= t.pass;
                        margin = margin
                            .min((t.dim_funcs_shifted + t.kernel_sum) as f64 - t.dim_forms as f64);
                    }
                }
                Ok((pass, margin, None))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "forms.integral_identity",
            "injectivity of interior product",
            move || {
                if model.flat_dim() < 2 {
                    // No nonzero kernel elements of the interior product on 1-forms.
                    let kd = kernel_dimension(&model, 1, 4)?;
                    return Ok((kd == 0, 0.0, Some("kernel is trivial".into())));
                }
                let omega = HoloForm::parse("z2 dz1 - z1 dz2", Some(model.flat_dim()))?;
                let r = form_integral_identity_check(
                    &model,
                    &omega,
                    1,
                    1.0,
                    model.ricci_bound_lambda(),
                )?;
                let err = (r.quadrature - r.exact).abs() / r.exact.abs();
                Ok(within(err, 1e-9))
            },
        ));
    }
    {
        let model = model.clone();
        out.push(spec(
            &key,
            "geometry.regularity_guard",
            "level sets of b",
            move || {
                let bound = model.regularity_bound().sqrt();
                let refused = model.check_regular(0.5 * bound).is_err() || bound == 0.0;
                let accepted = model.check_regular(bound + 1e-3).is_ok();
                Ok((refused && accepted, 0.0, None))
            },
        ));
    }
    out
}

/// Runs every check for each model in parallel; the report is sorted by name.
pub fn verify_all(
    models: &[ModelShrinker],
    cfg: &VerifyConfig,
    config_echo: serde_json::Value,
) -> Result<VerificationReport> {
    let specs: Vec<Spec> = models.iter().flat_map(|m| model_checks(m, cfg)).collect();
    let checks: Vec<Check> = specs
        .par_iter()
        .map(|s| Check::run(&s.name, s.anchor, || (s.body)()))
        .collect();
    VerificationReport::new(checks, config_echo)
}
