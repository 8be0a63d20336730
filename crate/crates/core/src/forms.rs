//! Holomorphic `(p,0)`-forms on the flat factor, the `f`-Hodge Laplacian via
//! Cartan's formula, and the kernel of the interior product `i_{grad f}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exact::rank;
use crate::model::ModelShrinker;
use crate::parse::{merge_sign, parse_expression};
use crate::poly::{dim_o_d, total_degree, HoloPoly, MultiIndex};
use crate::quadrature::gauss_hermite;
use crate::spectrum::{binomial, oracle_spectrum_1d, Potential1d};

/// Largest number of unknowns `kernel_dimension` will assemble.
pub const KERNEL_GUARD: usize = 100_000;

/// `sum_I omega_I dz^I` over increasing zero-based index sets `I` of size `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct HoloForm {
    p: usize,
    m: usize,
    coeffs: BTreeMap<Vec<usize>, HoloPoly>,
}

impl HoloForm {
    pub fn zero(p: usize, m: usize) -> Result<Self> {
        if p > m {
            return Err(LabError::Precondition(format!(
                "form degree {p} exceeds dimension {m}"
            )));
        }
        Ok(Self {
            p,
            m,
            coeffs: BTreeMap::new(),
        })
    }

    /// `u dz^{index}` with a zero-based, strictly increasing `index`.
    pub fn from_component(index: Vec<usize>, u: HoloPoly) -> Result<Self> {
        let m = u.m();
        let mut form = Self::zero(index.len(), m)?;
        form.insert(index, u)?;
        Ok(form)
    }

    /// `z^alpha dz^I` with coefficient 1.
    pub fn monomial(alpha: MultiIndex, index: Vec<usize>) -> Result<Self> {
        Self::from_component(index, HoloPoly::monomial(alpha, Complex64::new(1.0, 0.0)))
    }

    fn insert(&mut self, index: Vec<usize>, u: HoloPoly) -> Result<()> {
        if index.len() != self.p {
            return Err(LabError::DimensionMismatch {
                expected: self.p,
                got: index.len(),
            });
        }
        if index.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::Precondition(format!(
                "multi-index {:?} is not strictly increasing",
                index.iter().map(|i| i + 1).collect::<Vec<_>>()
            )));
        }
        if let Some(&last) = index.last() {
            if last >= self.m {
                return Err(LabError::DimensionMismatch {
                    expected: self.m,
                    got: last + 1,
                });
            }
        }
        let u = u.with_vars(self.m)?;
        let entry = self
            .coeffs
            .entry(index)
            .or_insert_with(|| HoloPoly::zero(self.m));
        *entry = &*entry + &u;
        self.coeffs.retain(|_, c| !c.is_zero());
        Ok(())
    }

    /// Parses `z2*dz1 - z1*dz2`, `z^2 dz1^dz2`, `dw`.
    pub fn parse(text: &str, m: Option<usize>) -> Result<Self> {
        let expr = parse_expression(text)?;
        let degrees: Vec<usize> = expr.keys().map(Vec::len).collect();
        let p = degrees.first().copied().unwrap_or(0);
        if degrees.iter().any(|&q| q != p) {
            return Err(LabError::Parse(format!(
                "{text:?} mixes form degrees {degrees:?}"
            )));
        }
        let width = expr
            .iter()
            .map(|(i, u)| i.last().map_or(0, |l| l + 1).max(u.support_width()))
            .max()
            .unwrap_or(0)
            .max(p)
            .max(1);
        let m = match m {
            Some(m) if m < width => {
                return Err(LabError::Parse(format!(
                    "{text:?} uses variable {width} but only {m} are available"
                )))
            }
            Some(m) => m,
            None => width,
        };
        let mut form = Self::zero(p, m)?;
        for (index, u) in expr {
            form.insert(index, u)?;
        }
        Ok(form)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn components(&self) -> impl Iterator<Item = (&Vec<usize>, &HoloPoly)> {
        self.coeffs.iter()
    }

    pub fn component(&self, index: &[usize]) -> HoloPoly {
        self.coeffs
            .get(index)
            .cloned()
            .unwrap_or_else(|| HoloPoly::zero(self.m))
    }

    /// Growth order: the largest coefficient degree.
    pub fn mu(&self) -> u32 {
        self.coeffs
            .values()
            .map(HoloPoly::degree)
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = c.scale(s);
        }
        out.coeffs.retain(|_, c| !c.is_zero());
        out
    }

    pub fn add(&self, other: &HoloForm) -> Result<Self> {
        if self.p != other.p {
            return Err(LabError::DimensionMismatch {
                expected: self.p,
                got: other.p,
            });
        }
        let mut out = self.clone();
        out.m = self.m.max(other.m);
        for c in out.coeffs.values_mut() {
            *c = c.with_vars(out.m)?;
        }
        for (index, u) in &other.coeffs {
            out.insert(index.clone(), u.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &HoloForm) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn max_abs_diff(&self, other: &HoloForm) -> Result<f64> {
        Ok(self
            .sub(other)?
            .coeffs
            .values()
            .map(HoloPoly::max_abs_coeff)
            .fold(0.0, f64::max))
    }

    /// Holomorphic exterior derivative `d(u dz^I) = sum_j du/dz_j dz^j ^ dz^I`.
    pub fn exterior_derivative(&self) -> Self {
        let mut out = Self {
            p: self.p + 1,
            m: self.m,
            coeffs: BTreeMap::new(),
        };
        if self.p + 1 > self.m {
            return out;
        }
        for (index, u) in &self.coeffs {
            for j in 0..self.m {
                let Some((merged, sign)) = merge_sign(&[j], index) else {
                    continue;
                };
                let du = u.derivative(j).scale(Complex64::new(sign, 0.0));
                if !du.is_zero() {
                    out.insert(merged, du)
                        .expect("indices are valid by construction");
                }
            }
        }
        out
    }

    fn check_flat(&self, model: &ModelShrinker) -> Result<()> {
        let width = self
            .coeffs
            .iter()
            .map(|(i, u)| i.last().map_or(0, |l| l + 1).max(u.support_width()))
            .max()
            .unwrap_or(0);
        if width > model.flat_dim() {
            return Err(LabError::Domain(format!(
                "form involves coordinate {width} beyond the {} flat coordinates of {}",
                model.flat_dim(),
                model.label()
            )));
        }
        Ok(())
    }
}

/// `i_{grad f}` with `i_{grad f} dz^j = z_j / 2`.
pub fn interior_product(model: &ModelShrinker, omega: &HoloForm) -> Result<HoloForm> {
    if omega.p == 0 {
        return Err(LabError::Precondition(
            "interior product needs p >= 1".into(),
        ));
    }
    omega.check_flat(model)?;
    Ok(contract(omega))
}

fn contract(omega: &HoloForm) -> HoloForm {
    let mut out = HoloForm {
        p: omega.p - 1,
        m: omega.m,
        coeffs: BTreeMap::new(),
    };
    for (index, u) in &omega.coeffs {
        for (k, &i) in index.iter().enumerate() {
            let sign = if k % 2 == 0 { 0.5 } else { -0.5 };
            let zi = HoloPoly::variable(omega.m, i).scale(Complex64::new(sign, 0.0));
            let mut rest = index.clone();
            rest.remove(k);
            out.insert(rest, &zi * u)
                .expect("indices are valid by construction");
        }
    }
    out
}

/// `Delta_f^d omega = i_{grad f} d omega + d i_{grad f} omega`; the rough part
/// vanishes on holomorphic forms of the flat factor.
pub fn f_hodge_laplacian(model: &ModelShrinker, omega: &HoloForm) -> Result<HoloForm> {
    omega.check_flat(model)?;
    let first = contract(&omega.exterior_derivative());
    if omega.p == 0 {
        return Ok(first);
    }
    let second = contract(omega).exterior_derivative();
    first.add(&second)
}

/// All monomial forms `z^alpha dz^I` with `|alpha| <= mu` on `C^k`.
pub fn monomial_form_basis(k: usize, p: usize, mu: u32) -> Vec<(MultiIndex, Vec<usize>)> {
    let alphas = multi_indices_up_to(k, mu);
    let subsets = increasing_subsets(k, p);
    let mut out = Vec::with_capacity(alphas.len() * subsets.len());
    for index in &subsets {
        for alpha in &alphas {
            out.push((alpha.clone(), index.clone()));
        }
    }
    out
}

pub fn multi_indices_up_to(k: usize, max: u32) -> Vec<MultiIndex> {
    fn rec(k: usize, budget: u32, prefix: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=budget {
            prefix.push(e);
            rec(k, budget - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, max, &mut Vec::with_capacity(k), &mut out);
    out
}

pub fn increasing_subsets(k: usize, p: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, k: usize, p: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == p {
            out.push(prefix.clone());
            return;
        }
        for i in start..k {
            prefix.push(i);
            rec(i + 1, k, p, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if p <= k {
        rec(0, k, p, &mut Vec::with_capacity(p), &mut out);
    }
    out
}

/// `dim O_mu(Lambda^{p,0})` on a model.
pub fn dim_forms(model: &ModelShrinker, p: usize, mu: f64) -> u64 {
    dim_o_d(model, mu) * binomial(model.flat_dim() as u64, p as u64)
}

/// Null-space dimension of `i_{grad f}` on `O_mu(Lambda^{p,0})`.
///
/// The map preserves the weight `alpha + e_I`, so the matrix splits into one
/// block per weight; each block (scaled by 2 to integers) is ranked exactly.
pub fn kernel_dimension(model: &ModelShrinker, p: usize, mu: u32) -> Result<u64> {
    if p == 0 {
        return Err(LabError::Precondition(
            "kernel_dimension needs p >= 1".into(),
        ));
    }
    let k = model.flat_dim();
    let basis = monomial_form_basis(k, p, mu);
    if basis.len() > KERNEL_GUARD {
        return Err(LabError::Precondition(format!(
            "basis of {} unknowns exceeds the guard of {KERNEL_GUARD}",
            basis.len()
        )));
    }
    let mut blocks: BTreeMap<MultiIndex, Vec<(MultiIndex, Vec<usize>)>> = BTreeMap::new();
    for (alpha, index) in basis {
        let mut weight = alpha.clone();
        for &i in &index {
            weight[i] += 1;
        }
        blocks.entry(weight).or_default().push((alpha, index));
    }
    let mut kernel = 0u64;
    for members in blocks.values() {
        let mut rows: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut entries: Vec<(usize, usize, i64)> = Vec::new();
        for (col, (_, index)) in members.iter().enumerate() {
            for (pos, _) in index.iter().enumerate() {
                let mut rest = index.clone();
                rest.remove(pos);
                let next = rows.len();
                let row = *rows.entry(rest).or_insert(next);
                entries.push((row, col, if pos % 2 == 0 { 1 } else { -1 }));
            }
        }
        let mut matrix = vec![vec![0i64; members.len()]; rows.len()];
        for (r, c, v) in entries {
            matrix[r][c] += v;
        }
        kernel += (members.len() - rank(&matrix)) as u64;
    }
    Ok(kernel)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormSpectralLine {
    pub eigenvalue: f64,
    /// Complex multiplicity.
    pub multiplicity: u64,
    pub generator_label: String,
}

/// Spectrum of `Delta_f^d` on `(p,0)`-forms up to `lambda_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormSpectrumCatalog {
    pub model: ModelShrinker,
    pub p: usize,
    pub lines: Vec<FormSpectralLine>,
    pub lambda_max: f64,
}

impl FormSpectrumCatalog {
    /// Flat factor: `(j + p_f)/2` with multiplicity `C(2k+j-1, 2k-1) C(k, p_f)`.
    /// Each `CP^1` contributes `l(l+1)/2` with `2l+1` functions (`l >= 0`) or
    /// `(1,0)`-forms (`l >= 1`).
    pub fn new(model: &ModelShrinker, p: usize, lambda_max: f64) -> Result<Self> {
        if !(lambda_max >= 0.0) {
            return Err(LabError::Precondition(format!(
                "lambda_max must be nonnegative, got {lambda_max}"
            )));
        }
        let max_half = (2.0 * lambda_max + 1e-9).floor() as u64;
        let k = model.flat_dim() as u64;
        // (form degree, half-eigenvalue) -> multiplicity
        let mut acc: BTreeMap<(usize, u64), u64> = BTreeMap::new();
        if k == 0 {
            acc.insert((0, 0), 1);
        }
        for pf in 0..=(k as usize).min(p) {
            if k == 0 {
                break;
            }
            let types = binomial(k, pf as u64);
            for j in 0..=max_half {
                let h = j + pf as u64;
                if h > max_half {
                    break;
                }
                *acc.entry((pf, h)).or_default() += binomial(2 * k + j - 1, 2 * k - 1) * types;
            }
        }
        for _ in 0..model.spheres() {
            let mut next: BTreeMap<(usize, u64), u64> = BTreeMap::new();
            for (&(deg, h), &mult) in &acc {
                for l in 0u64.. {
                    let hs = l * (l + 1);
                    if h + hs > max_half {
                        break;
                    }
                    *next.entry((deg, h + hs)).or_default() += mult * (2 * l + 1);
                    if l >= 1 && deg < p {
                        *next.entry((deg + 1, h + hs)).or_default() += mult * (2 * l + 1);
                    }
                }
            }
            acc = next;
        }
        let lines = acc
            .into_iter()
            .filter(|((deg, _), _)| *deg == p)
            .map(|((_, h), mult)| FormSpectralLine {
                eigenvalue: h as f64 / 2.0,
                multiplicity: mult,
                generator_label: format!("Hermite-type ({p},0)-forms, 2 lambda = {h}"),
            })
            .collect();
        Ok(Self {
            model: model.clone(),
            p,
            lines,
            lambda_max,
        })
    }

    pub fn count(&self, lo: f64, hi: f64) -> Result<u64> {
        if hi > self.lambda_max + 1e-12 {
            return Err(LabError::Completeness {
                lambda_max: self.lambda_max,
                requested: hi,
            });
        }
        Ok(self
            .lines
            .iter()
            .filter(|l| l.eigenvalue >= lo - 1e-12 && l.eigenvalue <= hi + 1e-12)
            .map(|l| l.multiplicity)
            .sum())
    }

    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.lines.first().map(|l| l.eigenvalue)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FormCounting {
    pub p: usize,
    pub mu: u32,
    pub lambda: f64,
    pub horizon: f64,
    pub dim: u64,
    pub count: u64,
    pub pass: bool,
    /// Whether `dim <= count / 2` also holds.
    pub half_count_pass: bool,
    /// Largest `Delta_f^d` eigenvalue among the monomial forms spanning the space.
    pub max_monomial_eigenvalue: f64,
}

/// Largest eigenvalue of `Delta_f^d` over monomial forms of growth `<= mu`,
/// computed through Cartan's formula.
pub fn max_monomial_form_eigenvalue(model: &ModelShrinker, p: usize, mu: u32) -> Result<f64> {
    let k = model.flat_dim();
    let mut best = f64::NEG_INFINITY;
    for (alpha, index) in monomial_form_basis(k, p, mu) {
        let omega = HoloForm::monomial(alpha.clone(), index.clone())?;
        let lap = f_hodge_laplacian(model, &omega)?;
        let value = lap.component(&index).coeff(&alpha);
        let rescaled = omega.scale(value);
        if lap.max_abs_diff(&rescaled)? > 1e-12 {
            return Err(LabError::Precondition(format!(
                "monomial form z^{alpha:?} dz^{index:?} is not an eigenform"
            )));
        }
        best = best.max(value.re);
    }
    Ok(best)
}

pub fn form_counting_check(model: &ModelShrinker, p: usize, mu: u32) -> Result<FormCounting> {
    let lambda = model.ricci_bound_lambda();
    let horizon = mu as f64 / 2.0 + p as f64 * lambda;
    let catalog = FormSpectrumCatalog::new(model, p, horizon)?;
    let count = catalog.count(0.0, horizon)?;
    let dim = dim_forms(model, p, mu as f64);
    let max_monomial_eigenvalue = if dim > 0 {
        max_monomial_form_eigenvalue(model, p, mu)?
    } else {
        0.0
    };
    Ok(FormCounting {
        p,
        mu,
        lambda,
        horizon,
        dim,
        count,
        pass: dim <= count,
        half_count_pass: 2 * dim <= count,
        max_monomial_eigenvalue,
    })
}

/// Smallest eigenvalues of the componentwise operator `-Delta_f + 1/2` on
/// 1-forms of Gaussian `R^n`, from the one-dimensional oracle.
pub fn one_form_spectrum_oracle(
    n_real: usize,
    x_max: f64,
    n_grid: usize,
    k_eigs: usize,
) -> Result<Vec<f64>> {
    if n_real == 0 {
        return Err(LabError::Precondition(
            "real dimension must be positive".into(),
        ));
    }
    let per_axis = k_eigs.clamp(1, n_grid / 4);
    let axis = oracle_spectrum_1d(Potential1d::Gaussian, x_max, n_grid, per_axis)?;
    // Scalar spectrum on R^n: sums of one eigenvalue per axis.
    let mut sums = vec![0.0];
    for _ in 0..n_real {
        let mut next = Vec::with_capacity(sums.len() * axis.len());
        for s in &sums {
            for a in &axis {
                next.push(s + a);
            }
        }
        next.sort_by(f64::total_cmp);
        next.truncate(k_eigs.max(1));
        sums = next;
    }
    let mut values: Vec<f64> = sums
        .iter()
        .flat_map(|s| std::iter::repeat_n(s + 0.5, n_real))
        .collect();
    values.sort_by(f64::total_cmp);
    values.truncate(k_eigs);
    Ok(values)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FormIntegral {
    pub quadrature: f64,
    pub exact: f64,
}

/// `int_M |omega|^2 (f - n/2 - mu - 2 p Lambda) e^{-f} dv` for a kernel
/// element of `i_{grad f}`, with `|omega|^2 = 2^p sum_I |omega_I|^2`.
pub fn form_integral_identity_check(
    model: &ModelShrinker,
    omega: &HoloForm,
    p: usize,
    mu: f64,
    lambda: f64,
) -> Result<FormIntegral> {
    if omega.p != p {
        return Err(LabError::DimensionMismatch {
            expected: p,
            got: omega.p,
        });
    }
    let image = interior_product(model, omega)?;
    let scale = omega
        .coeffs
        .values()
        .map(HoloPoly::max_abs_coeff)
        .fold(0.0, f64::max);
    let leak = image
        .coeffs
        .values()
        .map(HoloPoly::max_abs_coeff)
        .fold(0.0, f64::max);
    if leak > 1e-12 * scale.max(1.0) {
        return Err(LabError::Precondition(format!(
            "form is not in the kernel of the interior product (image size {leak:e})"
        )));
    }
    let k = model.flat_dim();
    let s = model.spheres() as f64;
    let n = model.n() as f64;
    let shift = n / 2.0 + mu + 2.0 * p as f64 * lambda;
    let compact = model.compact_area() * (-s).exp();
    let form_norm = 2f64.powi(p as i32);

    // Exact: distinct monomials are orthogonal and
    // int_C |z|^{2a} e^{-|z|^2/4} dA = 4^{a+1} pi a!, with mean of |z|^2/4 equal to a + 1.
    let mut exact = 0.0;
    for u in omega.coeffs.values() {
        for (alpha, c) in u.terms() {
            let mass: f64 = alpha
                .iter()
                .map(|&a| 4f64.powi(a as i32 + 1) * PI * crate::model::factorial(a as usize))
                .product();
            let mean_f = s + (total_degree(alpha) as usize + k) as f64;
            exact += c.norm_sqr() * mass * (mean_f - shift);
        }
    }
    exact *= form_norm * compact;

    // Gauss–Hermite in each real coordinate after x = 2y.
    let degree = omega.mu() as usize + 1;
    let rule = gauss_hermite(degree + 3);
    let npts = rule.len();
    let real_dims = 2 * k;
    let total = npts.pow(real_dims as u32);
    let mut quadrature = 0.0;
    let mut z = vec![Complex64::new(0.0, 0.0); k];
    for idx in 0..total {
        let mut rest = idx;
        let mut weight = 1.0;
        let mut y_sq = 0.0;
        for j in 0..k {
            let a = rest % npts;
            rest /= npts;
            let b = rest % npts;
            rest /= npts;
            weight *= rule.weights[a] * rule.weights[b];
            let (x, y) = (2.0 * rule.nodes[a], 2.0 * rule.nodes[b]);
            y_sq += rule.nodes[a].powi(2) + rule.nodes[b].powi(2);
            z[j] = Complex64::new(x, y);
        }
        let mut norm_sq = 0.0;
        for u in omega.coeffs.values() {
            norm_sq += u.with_vars(k)?.evaluate(&z)?.norm_sqr();
        }
        let f = s + y_sq;
        quadrature += weight * norm_sq * (f - shift);
    }
    quadrature *= 4f64.powi(k as i32) * form_norm * compact;
    Ok(FormIntegral { quadrature, exact })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelLedger {
    pub p: usize,
    pub mu: u32,
    pub dim_forms: u64,
    pub dim_funcs_shifted: u64,
    /// `(q, growth, kernel dim)` along `O_mu(p) -> O_{mu+1}(p-1) -> ...`.
    pub kernel_chain: Vec<(usize, u32, u64)>,
    pub kernel_sum: u64,
    /// `e^{1+mu}` minus the kernel sum; the constant in the exponent is not
    /// explicit, so this is reported and not asserted.
    pub kernel_bound_margin: f64,
    /// `dim O_{mu+p} + e^{1+mu} - dim O_mu(p)`.
    pub floor_margin: f64,
    pub pass: bool,
}

pub fn kernel_ledger(model: &ModelShrinker, p: usize, mu: u32) -> Result<KernelLedger> {
    let dim = dim_forms(model, p, mu as f64);
    let shifted = dim_o_d(model, (mu as usize + p) as f64);
    let mut chain = Vec::with_capacity(p);
    for q in (1..=p).rev() {
        let growth = mu + (p - q) as u32;
        chain.push((q, growth, kernel_dimension(model, q, growth)?));
    }
    let kernel_sum: u64 = chain.iter().map(|c| c.2).sum();
    let floor = (1.0 + mu as f64).exp();
    let margin = floor - kernel_sum as f64;
    let floor_margin = shifted as f64 + floor - dim as f64;
    Ok(KernelLedger {
        p,
        mu,
        dim_forms: dim,
        dim_funcs_shifted: shifted,
        kernel_chain: chain,
        kernel_sum,
        kernel_bound_margin: margin,
        floor_margin,
        pass: dim <= shifted + kernel_sum && floor_margin >= 0.0,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormTermLiteral {
    index: Vec<usize>,
    alpha: Vec<u32>,
    #[serde(default)]
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormLiteral {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    terms: Vec<FormTermLiteral>,
}

impl Serialize for HoloForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut terms = Vec::new();
        for (index, u) in &self.coeffs {
            for (alpha, c) in u.terms() {
                terms.push(FormTermLiteral {
                    index: index.iter().map(|i| i + 1).collect(),
                    alpha: alpha.clone(),
                    re: c.re,
                    im: c.im,
                });
            }
        }
        FormLiteral {
            p: Some(self.p),
            m: Some(self.m),
            terms,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HoloForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let lit = FormLiteral::deserialize(d)?;
        let first = lit.terms.first();
        let m = lit
            .m
            .or_else(|| first.map(|t| t.alpha.len()))
            .ok_or_else(|| D::Error::custom("empty form literal needs \"m\""))?;
        let p = lit
            .p
            .or_else(|| first.map(|t| t.index.len()))
            .ok_or_else(|| D::Error::custom("empty form literal needs \"p\""))?;
        let mut form = HoloForm::zero(p, m).map_err(D::Error::custom)?;
        for t in lit.terms {
            if t.index.contains(&0) {
                return Err(D::Error::custom("form indices are 1-based"));
            }
            let index = t.index.iter().map(|i| i - 1).collect();
            let u = HoloPoly::from_terms(m, [(t.alpha, Complex64::new(t.re, t.im))])
                .map_err(D::Error::custom)?;
            form.insert(index, u).map_err(D::Error::custom)?;
        }
        Ok(form)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(m: usize) -> ModelShrinker {
        ModelShrinker::gaussian(m).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn laplacian_examples() {
        let dz = HoloForm::parse("dz", None).unwrap();
        let lap = f_hodge_laplacian(&g(1), &dz).unwrap();
        assert_eq!(lap, dz.scale(c(0.5)));
        let omega = HoloForm::parse("z1^2 dz1^dz2", Some(2)).unwrap();
        let lap = f_hodge_laplacian(&g(2), &omega).unwrap();
        assert!(lap.max_abs_diff(&omega.scale(c(2.0))).unwrap() < 1e-15);
        let zero = HoloForm::zero(1, 2).unwrap();
        assert!(f_hodge_laplacian(&g(2), &zero).unwrap().is_zero());
    }

    #[test]
    fn laplacian_eigenvalue_law() {
        for m in 1..=3 {
            for p in 0..=m {
                for (alpha, index) in monomial_form_basis(m, p, 6) {
                    let omega = HoloForm::monomial(alpha.clone(), index).unwrap();
                    let lap = f_hodge_laplacian(&g(m), &omega).unwrap();
                    let expected = (total_degree(&alpha) as f64 + p as f64) / 2.0;
                    assert!(lap.max_abs_diff(&omega.scale(c(expected))).unwrap() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn interior_product_examples() {
        let omega = HoloForm::parse("dz1 ^ dz2", None).unwrap();
        let image = interior_product(&g(2), &omega).unwrap();
        let expected = HoloForm::parse("0.5 z1 dz2 - 0.5 z2 dz1", Some(2)).unwrap();
        assert_eq!(image, expected);
        let syzygy = HoloForm::parse("z2 dz1 - z1 dz2", None).unwrap();
        assert!(interior_product(&g(2), &syzygy).unwrap().is_zero());
        let u_dz = HoloForm::parse("(1 + z^2) dz", None).unwrap();
        assert!(!interior_product(&g(1), &u_dz).unwrap().is_zero());
        let f0 = HoloForm::parse("z", None).unwrap();
        assert!(interior_product(&g(1), &f0).is_err());
        assert!(matches!(
            interior_product(
                &ModelShrinker::cylinder(),
                &HoloForm::parse("dz2", None).unwrap()
            ),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn interior_product_squares_to_zero() {
        for (alpha, index) in monomial_form_basis(3, 3, 2) {
            let omega = HoloForm::monomial(alpha, index).unwrap();
            let once = interior_product(&g(3), &omega).unwrap();
            let twice = interior_product(&g(3), &once).unwrap();
            assert!(twice.is_zero());
        }
    }

    #[test]
    fn kernel_examples() {
        for mu in 0..5 {
            assert_eq!(kernel_dimension(&g(1), 1, mu).unwrap(), 0);
        }
        assert_eq!(kernel_dimension(&g(2), 1, 1).unwrap(), 1);
        assert_eq!(kernel_dimension(&g(2), 2, 0).unwrap(), 0);
        for mu in 1..=5 {
            assert_eq!(
                kernel_dimension(&g(2), 1, mu).unwrap(),
                dim_o_d(&g(2), mu as f64 - 1.0)
            );
        }
        assert!(kernel_dimension(&g(2), 0, 1).is_err());
    }

    #[test]
    fn kernel_matches_float_rank() {
        // Cross-check the block-exact rank against a dense Gram determinant count.
        let model = g(3);
        let basis = monomial_form_basis(3, 2, 2);
        let images: Vec<HoloForm> = basis
            .iter()
            .map(|(a, i)| {
                interior_product(&model, &HoloForm::monomial(a.clone(), i.clone()).unwrap())
                    .unwrap()
            })
            .collect();
        let mut keys: Vec<(Vec<usize>, MultiIndex)> = Vec::new();
        for img in &images {
            for (i, u) in img.components() {
                for (a, _) in u.terms() {
                    if !keys.contains(&(i.clone(), a.clone())) {
                        keys.push((i.clone(), a.clone()));
                    }
                }
            }
        }
        let rows: Vec<Vec<i64>> = keys
            .iter()
            .map(|(i, a)| {
                images
                    .iter()
                    .map(|img| (2.0 * img.component(i).coeff(a).re).round() as i64)
                    .collect()
            })
            .collect();
        let full_rank = rank(&rows);
        assert_eq!(
            kernel_dimension(&model, 2, 2).unwrap(),
            (basis.len() - full_rank) as u64
        );
    }

    #[test]
    fn kernel_guard() {
        assert!(kernel_dimension(&g(3), 1, 60).is_err());
    }

    #[test]
    fn form_catalog_counts() {
        let cat = FormSpectrumCatalog::new(&g(1), 1, 1.5).unwrap();
        assert_eq!(cat.count(0.0, 1.5).unwrap(), 6);
        assert_eq!(cat.min_eigenvalue(), Some(0.5));
        let cyl = FormSpectrumCatalog::new(&ModelShrinker::cylinder(), 1, 2.0).unwrap();
        assert!(cyl.min_eigenvalue().unwrap() >= 0.5);
        for m in 1..=3 {
            let cat = FormSpectrumCatalog::new(&g(m), 1, 3.0).unwrap();
            assert!(cat.min_eigenvalue().unwrap() >= 0.5);
        }
        let funcs = FormSpectrumCatalog::new(&g(1), 0, 1.0).unwrap();
        assert_eq!(funcs.count(0.0, 1.0).unwrap(), 6);
    }

    #[test]
    fn form_counting_examples() {
        let t = form_counting_check(&g(1), 1, 2).unwrap();
        assert_eq!((t.dim, t.count, t.horizon), (3, 6, 1.5));
        assert!(t.pass);
        let t = form_counting_check(&g(1), 1, 0).unwrap();
        assert_eq!(t.max_monomial_eigenvalue, 0.5);
        assert_eq!(t.horizon, 0.5);
        for m in 1..=2 {
            for p in 0..=2.min(m) {
                for mu in 0..=4 {
                    let t = form_counting_check(&g(m), p, mu).unwrap();
                    assert!(t.pass, "{t:?}");
                    assert_eq!(t.max_monomial_eigenvalue, t.horizon);
                }
            }
        }
        let t = form_counting_check(&ModelShrinker::cylinder(), 1, 2).unwrap();
        assert!(t.pass);
    }

    #[test]
    fn one_form_oracle() {
        let values = one_form_spectrum_oracle(1, 12.0, 800, 4).unwrap();
        for (k, v) in values.iter().enumerate() {
            assert!((v - 0.5 - 0.5 * k as f64).abs() < 1e-6);
        }
        let values = one_form_spectrum_oracle(2, 12.0, 400, 6).unwrap();
        assert!(values.iter().all(|&v| v >= 0.5 - 1e-6));
        assert!((values[0] - 0.5).abs() < 1e-6 && (values[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn form_integral() {
        let model = g(2);
        let omega = HoloForm::parse("z2 dz1 - z1 dz2", None).unwrap();
        let lambda = model.ricci_bound_lambda();
        let r = form_integral_identity_check(&model, &omega, 1, 1.0, lambda).unwrap();
        assert!(r.exact < 0.0);
        assert!((r.quadrature - r.exact).abs() < 1e-9 * r.exact.abs());
        let doubled = omega.scale(c(2.0));
        let r2 = form_integral_identity_check(&model, &doubled, 1, 1.0, lambda).unwrap();
        assert!((r2.quadrature - 4.0 * r.quadrature).abs() < 1e-9 * r2.quadrature.abs());
        let not_kernel = HoloForm::parse("dz1", Some(2)).unwrap();
        assert!(matches!(
            form_integral_identity_check(&model, &not_kernel, 1, 0.0, lambda),
            Err(LabError::Precondition(_))
        ));
    }

    #[test]
    fn kernel_ledger_examples() {
        let t = kernel_ledger(&g(2), 1, 2).unwrap();
        assert_eq!(
            (t.dim_forms, t.dim_funcs_shifted, t.kernel_sum),
            (12, 10, 3)
        );
        assert!(t.pass);
        for mu in 0..5 {
            let t = kernel_ledger(&g(1), 1, mu).unwrap();
            assert_eq!(
                (t.dim_forms, t.dim_funcs_shifted, t.kernel_sum),
                (mu as u64 + 1, mu as u64 + 2, 0)
            );
        }
        let t = kernel_ledger(&g(2), 2, 0).unwrap();
        assert_eq!(t.dim_forms, 1);
        assert!(t.pass);
    }

    #[test]
    fn json_and_string_literals() {
        let lit = r#"{"terms": [{"index": [1], "alpha": [0, 1], "re": 1.0}, {"index": [2], "alpha": [1, 0], "re": -1.0}]}"#;
        let omega: HoloForm = serde_json::from_str(lit).unwrap();
        assert_eq!(omega, HoloForm::parse("z2 dz1 - z1 dz2", None).unwrap());
        let back: HoloForm = serde_json::from_str(&serde_json::to_string(&omega).unwrap()).unwrap();
        assert_eq!(back, omega);
        assert!(
            serde_json::from_str::<HoloForm>(r#"{"terms": [{"index": [0], "alpha": [1]}]}"#)
                .is_err()
        );
        assert!(serde_json::from_str::<HoloForm>(
            r#"{"terms": [{"index": [2, 1], "alpha": [1, 1]}]}"#
        )
        .is_err());
        assert!(HoloForm::parse("dz1 + z", None).is_err());
        assert!(HoloForm::zero(3, 2).is_err());
    }
}
