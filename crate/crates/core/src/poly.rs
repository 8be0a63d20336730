//! Sparse complex polynomials in the flat holomorphic coordinates.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model::ModelShrinker;
use crate::spectrum::{analytic_spectrum, binomial};

/// Relative pruning threshold for stored coefficients.
pub const PRUNE_RELATIVE: f64 = 1e-14;

pub type MultiIndex = Vec<u32>;

/// A polynomial `sum_alpha c_alpha z^alpha` in `m` complex variables.
///
/// Variables are the flat coordinates of a model, in order. Coefficients below
/// `1e-14` times the largest modulus are dropped after every operation.
#[derive(Clone, Debug, PartialEq)]
pub struct HoloPoly {
    pub(crate) m: usize,
    pub(crate) terms: BTreeMap<MultiIndex, Complex64>,
}

pub fn total_degree(alpha: &[u32]) -> u32 {
    alpha.iter().sum()
}

impl HoloPoly {
    pub fn zero(m: usize) -> Self {
        Self {
            m,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(m: usize, c: Complex64) -> Self {
        Self::monomial(vec![0; m], c)
    }

    pub fn monomial(alpha: MultiIndex, c: Complex64) -> Self {
        let m = alpha.len();
        let mut terms = BTreeMap::new();
        if c != Complex64::new(0.0, 0.0) {
            terms.insert(alpha, c);
        }
        Self { m, terms }
    }

    /// The coordinate `z_i` (zero-based `i`).
    pub fn variable(m: usize, i: usize) -> Self {
        let mut alpha = vec![0; m];
        alpha[i] = 1;
        Self::monomial(alpha, Complex64::new(1.0, 0.0))
    }

    pub fn from_terms<I>(m: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Complex64)>,
    {
        let mut out = Self::zero(m);
        for (alpha, c) in terms {
            if alpha.len() != m {
                return Err(LabError::DimensionMismatch {
                    expected: m,
                    got: alpha.len(),
                });
            }
            *out.terms.entry(alpha).or_default() += c;
        }
        out.prune();
        Ok(out)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; zero for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|a| total_degree(a))
            .max()
            .unwrap_or(0)
    }

    pub fn min_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|a| total_degree(a))
            .min()
            .unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.degree() == self.min_degree()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, alpha: &[u32]) -> Complex64 {
        self.terms.get(alpha).copied().unwrap_or_default()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficientwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &HoloPoly) -> f64 {
        (self - other).max_abs_coeff()
    }

    /// Highest variable index (one-based) that occurs with positive exponent.
    pub fn support_width(&self) -> usize {
        self.terms
            .keys()
            .filter_map(|a| a.iter().rposition(|&e| e > 0))
            .map(|i| i + 1)
            .max()
            .unwrap_or(0)
    }

    /// Same polynomial in `m` variables; fails if a dropped variable occurs.
    pub fn with_vars(&self, m: usize) -> Result<Self> {
        if self.support_width() > m {
            return Err(LabError::DimensionMismatch {
                expected: m,
                got: self.support_width(),
            });
        }
        let terms = self
            .terms
            .iter()
            .map(|(a, c)| {
                let mut alpha = a.clone();
                alpha.resize(m, 0);
                (alpha, *c)
            })
            .collect();
        Ok(Self { m, terms })
    }

    pub(crate) fn prune(&mut self) {
        let max = self.max_abs_coeff();
        let cut = PRUNE_RELATIVE * max;
        self.terms.retain(|_, c| c.norm() > cut && c.norm() > 0.0);
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self {
            m: self.m,
            terms: self.terms.iter().map(|(a, c)| (a.clone(), c * s)).collect(),
        };
        out.prune();
        out
    }

    /// `d/dz_i` (zero-based `i`).
    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.m);
        for (alpha, c) in &self.terms {
            if alpha[i] == 0 {
                continue;
            }
            let mut beta = alpha.clone();
            beta[i] -= 1;
            *out.terms.entry(beta).or_default() += c * alpha[i] as f64;
        }
        out.prune();
        out
    }

    /// Euler operator `sum_i z_i d/dz_i`: multiplies `z^alpha` by `|alpha|`.
    pub fn euler(&self) -> Self {
        let mut out = Self {
            m: self.m,
            terms: self
                .terms
                .iter()
                .map(|(a, c)| (a.clone(), c * total_degree(a) as f64))
                .collect(),
        };
        out.prune();
        out
    }

    pub fn evaluate(&self, z: &[Complex64]) -> Result<Complex64> {
        if z.len() != self.m {
            return Err(LabError::DimensionMismatch {
                expected: self.m,
                got: z.len(),
            });
        }
        // Power tables per variable, then one product per term.
        let max_exp: Vec<u32> = (0..self.m)
            .map(|i| self.terms.keys().map(|a| a[i]).max().unwrap_or(0))
            .collect();
        let powers: Vec<Vec<Complex64>> = z
            .iter()
            .zip(&max_exp)
            .map(|(zi, &e)| {
                let mut p = Vec::with_capacity(e as usize + 1);
                let mut acc = Complex64::new(1.0, 0.0);
                p.push(acc);
                for _ in 0..e {
                    acc *= zi;
                    p.push(acc);
                }
                p
            })
            .collect();
        Ok(self
            .terms
            .iter()
            .map(|(alpha, c)| {
                alpha
                    .iter()
                    .enumerate()
                    .fold(*c, |acc, (i, &e)| acc * powers[i][e as usize])
            })
            .sum())
    }

    /// Parses expressions such as `1 + 2 z1 z2^3 - (0.5 - 2i) w^2`.
    ///
    /// `z` and `w` alone denote the first variable, `z3`/`w3` the third. With
    /// `m = None` the number of variables is the largest index that occurs.
    pub fn parse(text: &str, m: Option<usize>) -> Result<Self> {
        let expr = crate::parse::parse_expression(text)?;
        if let Some(index) = expr.keys().find(|k| !k.is_empty()) {
            return Err(LabError::Parse(format!(
                "{text:?} contains the differential dz{}; expected a function",
                index[0] + 1
            )));
        }
        let poly = expr
            .into_values()
            .next()
            .unwrap_or_else(|| HoloPoly::zero(0));
        let width = poly.support_width().max(1);
        let m = match m {
            Some(m) if m < width => {
                return Err(LabError::Parse(format!(
                    "{text:?} uses variable {width} but only {m} are available"
                )))
            }
            Some(m) => m,
            None => width,
        };
        poly.with_vars(m)
    }
}

pub(crate) fn combine(a: &HoloPoly, b: &HoloPoly, sign: f64) -> HoloPoly {
    let m = a.m.max(b.m);
    let a = a.with_vars(m).expect("widening never fails");
    let b = b.with_vars(m).expect("widening never fails");
    let mut out = a;
    for (alpha, c) in b.terms {
        *out.terms.entry(alpha).or_default() += c * sign;
    }
    out.prune();
    out
}

impl Add for &HoloPoly {
    type Output = HoloPoly;
    fn add(self, rhs: &HoloPoly) -> HoloPoly {
        combine(self, rhs, 1.0)
    }
}

impl Sub for &HoloPoly {
    type Output = HoloPoly;
    fn sub(self, rhs: &HoloPoly) -> HoloPoly {
        combine(self, rhs, -1.0)
    }
}

impl Mul for &HoloPoly {
    type Output = HoloPoly;
    fn mul(self, rhs: &HoloPoly) -> HoloPoly {
        let m = self.m.max(rhs.m);
        let a = self.with_vars(m).expect("widening never fails");
        let b = rhs.with_vars(m).expect("widening never fails");
        let mut out = HoloPoly::zero(m);
        for (aa, ca) in &a.terms {
            for (ab, cb) in &b.terms {
                let gamma: MultiIndex = aa.iter().zip(ab).map(|(x, y)| x + y).collect();
                *out.terms.entry(gamma).or_default() += ca * cb;
            }
        }
        out.prune();
        out
    }
}

impl Neg for &HoloPoly {
    type Output = HoloPoly;
    fn neg(self) -> HoloPoly {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

macro_rules! owned_binop {
    ($tr:ident, $f:ident) => {
        impl $tr for HoloPoly {
            type Output = HoloPoly;
            fn $f(self, rhs: HoloPoly) -> HoloPoly {
                (&self).$f(&rhs)
            }
        }
    };
}
owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);

impl fmt::Display for HoloPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (alpha, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if c.im < 0.0 {
                write!(f, "({} - {}i)", c.re, -c.im)?;
            } else {
                write!(f, "({} + {}i)", c.re, c.im)?;
            }
            for (i, &e) in alpha.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*z{}", i + 1)?,
                    _ => write!(f, "*z{}^{e}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermLiteral {
    alpha: Vec<u32>,
    #[serde(default)]
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyLiteral {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    terms: Vec<TermLiteral>,
}

impl Serialize for HoloPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyLiteral {
            m: Some(self.m),
            terms: self
                .terms
                .iter()
                .map(|(a, c)| TermLiteral {
                    alpha: a.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HoloPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let lit = PolyLiteral::deserialize(d)?;
        let m = match (lit.m, lit.terms.first()) {
            (Some(m), _) => m,
            (None, Some(t)) => t.alpha.len(),
            (None, None) => return Err(D::Error::custom("empty polynomial literal needs \"m\"")),
        };
        HoloPoly::from_terms(
            m,
            lit.terms
                .into_iter()
                .map(|t| (t.alpha, Complex64::new(t.re, t.im))),
        )
        .map_err(D::Error::custom)
    }
}

/// Rejects polynomials that depend on variables beyond the model's flat factor.
pub(crate) fn check_flat_support(model: &ModelShrinker, u: &HoloPoly) -> Result<()> {
    if u.support_width() > model.flat_dim() {
        return Err(LabError::Domain(format!(
            "polynomial depends on variable {} but {} has only {} flat coordinates; holomorphic functions are constant along compact factors",
            u.support_width(),
            model.label(),
            model.flat_dim()
        )));
    }
    Ok(())
}

/// `L_{grad f} u = <grad f, grad u>`: half the Euler operator on flat factors.
pub fn lie_derivative_nabla_f(model: &ModelShrinker, u: &HoloPoly) -> Result<HoloPoly> {
    check_flat_support(model, u)?;
    Ok(u.euler().scale(Complex64::new(0.5, 0.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenPart {
    pub eigenvalue: f64,
    pub part: HoloPoly,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenDecomposition {
    /// Ascending in eigenvalue.
    pub parts: Vec<EigenPart>,
    pub residual_norm: f64,
}

impl EigenDecomposition {
    pub fn sum(&self, m: usize) -> HoloPoly {
        self.parts
            .iter()
            .fold(HoloPoly::zero(m), |acc, p| &acc + &p.part)
    }

    pub fn growth_consistent(&self) -> bool {
        self.parts
            .iter()
            .all(|p| growth_eigenvalue_consistency(p.eigenvalue, &p.part))
    }
}

/// Splits `u` into `L_{grad f}`-eigenfunctions by the power iteration
/// `u_{k+1} = L u_k / lambda_s` for the largest admissible eigenvalue, then
/// recurses on the remainder.
pub fn decompose_by_eigenvalue(
    model: &ModelShrinker,
    u: &HoloPoly,
    d: f64,
    tol: f64,
    max_iter: usize,
) -> Result<EigenDecomposition> {
    check_flat_support(model, u)?;
    if !(tol > 0.0) {
        return Err(LabError::Precondition(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if u.degree() as f64 > d + 1e-12 {
        return Err(LabError::Precondition(format!(
            "degree {} exceeds growth order {d}",
            u.degree()
        )));
    }
    let m = u.m();
    if u.is_zero() {
        return Ok(EigenDecomposition {
            parts: Vec::new(),
            residual_norm: 0.0,
        });
    }
    let catalog = analytic_spectrum(model, d / 2.0)?;
    let mut candidates: Vec<f64> = catalog.distinct_in(0.0, d / 2.0);
    candidates.sort_by(|a, b| b.total_cmp(a));
    let mut remainder = u.clone();
    let mut parts = Vec::new();
    for (idx, &lambda) in candidates.iter().enumerate() {
        if remainder.is_zero() {
            break;
        }
        if lambda == 0.0 {
            parts.push(EigenPart {
                eigenvalue: 0.0,
                part: remainder.clone(),
                iterations: 0,
            });
            break;
        }
        let next = candidates.get(idx + 1).copied().unwrap_or(0.0);
        let mut current = remainder.clone();
        let mut converged = None;
        let mut last_step = f64::INFINITY;
        for k in 1..=max_iter {
            let step =
                lie_derivative_nabla_f(model, &current)?.scale(Complex64::new(1.0 / lambda, 0.0));
            last_step = step.max_abs_diff(&current);
            current = step;
            if last_step < tol {
                converged = Some(k);
                break;
            }
        }
        let Some(iterations) = converged else {
            return Err(LabError::Iteration {
                max_iter,
                ratio: next / lambda,
                last_step,
            });
        };
        // Lower components left in the limit are below tol r / (1 - r).
        let chop = 2.0 * tol / (1.0 - next / lambda);
        current.terms.retain(|_, c| c.norm() > chop);
        if !current.is_zero() {
            remainder = &remainder - &current;
            parts.push(EigenPart {
                eigenvalue: lambda,
                part: current,
                iterations,
            });
        }
    }
    parts.reverse();
    let decomposition = EigenDecomposition {
        residual_norm: 0.0,
        parts,
    };
    let residual_norm = decomposition.sum(m).max_abs_diff(u);
    Ok(EigenDecomposition {
        residual_norm,
        ..decomposition
    })
}

/// `deg(part) <= 2 lambda`.
pub fn growth_eigenvalue_consistency(lambda: f64, part: &HoloPoly) -> bool {
    part.degree() as f64 <= 2.0 * lambda + 1e-12
}

/// Dimension of holomorphic functions of growth order at most `d`.
pub fn dim_o_d(model: &ModelShrinker, d: f64) -> u64 {
    if d < 0.0 {
        return 0;
    }
    let k = model.flat_dim() as u64;
    let floor = (d + 1e-12).floor() as u64;
    binomial(k + floor, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn evaluate_examples() {
        let u = HoloPoly::parse("z1 z2", None).unwrap();
        assert_eq!(
            u.evaluate(&[c(2.0, 0.0), c(0.0, 3.0)]).unwrap(),
            c(0.0, 6.0)
        );
        let one = HoloPoly::constant(2, c(1.0, 0.0));
        assert_eq!(
            one.evaluate(&[c(5.0, 1.0), c(-2.0, 0.0)]).unwrap(),
            c(1.0, 0.0)
        );
        let sq = HoloPoly::parse("z^2", None).unwrap();
        assert_eq!(sq.evaluate(&[c(1.0, 1.0)]).unwrap(), c(0.0, 2.0));
        assert!(matches!(
            sq.evaluate(&[c(1.0, 0.0), c(0.0, 0.0)]),
            Err(LabError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn parser_forms() {
        let u = HoloPoly::parse("1 + 2z1 z2^3 - (0.5 - 2i) w^2", Some(3)).unwrap();
        assert_eq!(u.m(), 3);
        assert_eq!(u.coeff(&[0, 0, 0]), c(1.0, 0.0));
        assert_eq!(u.coeff(&[1, 3, 0]), c(2.0, 0.0));
        assert_eq!(u.coeff(&[2, 0, 0]), c(-0.5, 2.0));
        let v = HoloPoly::parse("(z+1)^2", None).unwrap();
        assert_eq!(v.coeff(&[1]), c(2.0, 0.0));
        assert_eq!(
            HoloPoly::parse("3i", None).unwrap().coeff(&[0]),
            c(0.0, 3.0)
        );
        assert_eq!(
            HoloPoly::parse("1e-3 z", None).unwrap().coeff(&[1]),
            c(1e-3, 0.0)
        );
        assert!(HoloPoly::parse("z3", Some(2)).is_err());
        assert!(HoloPoly::parse("z^-1", None).is_err());
        assert!(HoloPoly::parse("z +", None).is_err());
        assert!(HoloPoly::parse("x", None).is_err());
    }

    #[test]
    fn json_literal() {
        let lit = r#"{"terms": [{"alpha": [2,0], "re": 1.0, "im": 0.0}, {"alpha": [0,1], "re": 0.0, "im": -1.0}]}"#;
        let u: HoloPoly = serde_json::from_str(lit).unwrap();
        assert_eq!(u.m(), 2);
        assert_eq!(u.coeff(&[0, 1]), c(0.0, -1.0));
        let back: HoloPoly = serde_json::from_str(&serde_json::to_string(&u).unwrap()).unwrap();
        assert_eq!(back, u);
        assert!(serde_json::from_str::<HoloPoly>(
            r#"{"terms": [{"alpha": [1], "re": 1, "bogus": 2}]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<HoloPoly>(
            r#"{"terms": [{"alpha": [1]}, {"alpha": [1, 0]}]}"#
        )
        .is_err());
    }

    #[test]
    fn pruning_invariant() {
        let u =
            HoloPoly::from_terms(1, [(vec![0], c(1.0, 0.0)), (vec![1], c(1e-16, 0.0))]).unwrap();
        assert_eq!(u.len(), 1);
        let v = HoloPoly::parse("z + 1", None).unwrap();
        assert!((&v - &v).is_zero());
    }

    #[test]
    fn lie_derivative_examples() {
        let g2 = ModelShrinker::gaussian(2).unwrap();
        let u = HoloPoly::parse("z1^2 + z2", Some(2)).unwrap();
        let lu = lie_derivative_nabla_f(&g2, &u).unwrap();
        assert_eq!(lu, HoloPoly::parse("z1^2 + 0.5 z2", Some(2)).unwrap());
        let k = HoloPoly::constant(2, c(3.0, 1.0));
        assert!(lie_derivative_nabla_f(&g2, &k).unwrap().is_zero());
        let cyl = ModelShrinker::cylinder();
        let bad = HoloPoly::parse("z2", None).unwrap();
        assert!(matches!(
            lie_derivative_nabla_f(&cyl, &bad),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn lie_derivative_diagonal_on_monomials() {
        let g3 = ModelShrinker::gaussian(3).unwrap();
        for a in 0..=8u32 {
            for b in 0..=(8 - a) {
                for cc in 0..=(8 - a - b) {
                    let u = HoloPoly::monomial(vec![a, b, cc], c(1.0, 0.0));
                    let lu = lie_derivative_nabla_f(&g3, &u).unwrap();
                    let expected = u.scale(c((a + b + cc) as f64 / 2.0, 0.0));
                    assert_eq!(lu, expected);
                }
            }
        }
    }

    #[test]
    fn lie_derivative_matches_directional_derivative() {
        // grad f = x/2 in real coordinates; L u = d/dt u((1 + t/2) z) at t = 0.
        let g2 = ModelShrinker::gaussian(2).unwrap();
        let u = HoloPoly::parse("z1^3 z2 - 2i z2^2 + 1", None).unwrap();
        let z = [c(0.3, -0.7), c(1.1, 0.4)];
        let h = 1e-5;
        let at = |t: f64| {
            let s = 1.0 + 0.5 * t;
            u.evaluate(&[z[0] * s, z[1] * s]).unwrap()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let exact = lie_derivative_nabla_f(&g2, &u)
            .unwrap()
            .evaluate(&z)
            .unwrap();
        assert!((fd - exact).norm() < 1e-8);
    }

    #[test]
    fn decomposition_examples() {
        let g1 = ModelShrinker::gaussian(1).unwrap();
        let u = HoloPoly::parse("1 + z + z^2", None).unwrap();
        let dec = decompose_by_eigenvalue(&g1, &u, 2.0, 1e-12, 200).unwrap();
        let got: Vec<(f64, HoloPoly)> = dec
            .parts
            .iter()
            .map(|p| (p.eigenvalue, p.part.clone()))
            .collect();
        assert_eq!(got.len(), 3);
        assert_eq!(got[0].0, 0.0);
        assert!(got[0].1.max_abs_diff(&HoloPoly::parse("1", None).unwrap()) < 1e-12);
        assert_eq!(got[1].0, 0.5);
        assert!(got[1].1.max_abs_diff(&HoloPoly::parse("z", None).unwrap()) < 1e-12);
        assert_eq!(got[2].0, 1.0);
        assert!(
            got[2]
                .1
                .max_abs_diff(&HoloPoly::parse("z^2", None).unwrap())
                < 1e-12
        );
        assert!(dec.residual_norm < 1e-12);

        let g2 = ModelShrinker::gaussian(2).unwrap();
        let v = HoloPoly::parse("z1 z2", None).unwrap();
        let dec = decompose_by_eigenvalue(&g2, &v, 2.0, 1e-12, 200).unwrap();
        assert_eq!(dec.parts.len(), 1);
        assert_eq!(dec.parts[0].eigenvalue, 1.0);

        let dec = decompose_by_eigenvalue(&g2, &HoloPoly::zero(2), 2.0, 1e-12, 200).unwrap();
        assert!(dec.parts.is_empty());
        assert_eq!(dec.residual_norm, 0.0);
    }

    #[test]
    fn decomposition_errors() {
        let g1 = ModelShrinker::gaussian(1).unwrap();
        let u = HoloPoly::parse("z^3 + z^2 + z", None).unwrap();
        assert!(matches!(
            decompose_by_eigenvalue(&g1, &u, 2.0, 1e-12, 200),
            Err(LabError::Precondition(_))
        ));
        match decompose_by_eigenvalue(&g1, &u, 3.0, 1e-12, 3) {
            Err(LabError::Iteration { ratio, .. }) => assert!((ratio - 2.0 / 3.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dim_o_d_examples() {
        assert_eq!(dim_o_d(&ModelShrinker::gaussian(2).unwrap(), 2.0), 6);
        for m in 1..=4 {
            assert_eq!(
                dim_o_d(&ModelShrinker::gaussian(m).unwrap(), 1.0),
                m as u64 + 1
            );
        }
        let cyl = ModelShrinker::cylinder();
        assert_eq!(dim_o_d(&cyl, 2.5), 3);
        assert_eq!(dim_o_d(&cyl, 2.0), 3);
        assert_eq!(dim_o_d(&cyl, 1.999), 2);
    }

    #[test]
    fn growth_consistency_examples() {
        assert!(growth_eigenvalue_consistency(
            1.0,
            &HoloPoly::parse("z^2", None).unwrap()
        ));
        assert!(growth_eigenvalue_consistency(
            0.5,
            &HoloPoly::parse("z1", Some(2)).unwrap()
        ));
        assert!(!growth_eigenvalue_consistency(
            0.5,
            &HoloPoly::parse("z^2", None).unwrap()
        ));
    }

    fn arb_poly(m: usize, max_deg: u32) -> impl Strategy<Value = HoloPoly> {
        proptest::collection::vec(
            (
                proptest::collection::vec(0..=max_deg, m),
                -4i32..=4,
                -4i32..=4,
            ),
            0..6,
        )
        .prop_map(move |terms| {
            HoloPoly::from_terms(
                m,
                terms
                    .into_iter()
                    .filter(|(a, _, _)| total_degree(a) <= max_deg)
                    .map(|(a, re, im)| (a, Complex64::new(re as f64, im as f64))),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn ring_laws(a in arb_poly(2, 3), b in arb_poly(2, 3), d in arb_poly(2, 3)) {
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert!((&(&a * &b) * &d).max_abs_diff(&(&a * &(&b * &d))) < 1e-9);
            prop_assert!((&a * &(&b + &d)).max_abs_diff(&(&(&a * &b) + &(&a * &d))) < 1e-9);
        }

        #[test]
        fn evaluation_is_a_homomorphism(a in arb_poly(2, 3), b in arb_poly(2, 3),
                                         x in -2.0..2.0f64, y in -2.0..2.0f64) {
            let z = [Complex64::new(x, y), Complex64::new(y, -x)];
            let lhs = (&a * &b).evaluate(&z).unwrap();
            let rhs = a.evaluate(&z).unwrap() * b.evaluate(&z).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-8 * (1.0 + rhs.norm()));
        }

        #[test]
        fn display_parses_back(a in arb_poly(3, 4)) {
            let back = HoloPoly::parse(&a.to_string(), Some(3)).unwrap();
            prop_assert_eq!(back, a);
        }

        #[test]
        fn decomposition_round_trip(a in arb_poly(2, 5)) {
            let g2 = ModelShrinker::gaussian(2).unwrap();
            let dec = decompose_by_eigenvalue(&g2, &a, 5.0, 1e-12, 200).unwrap();
            prop_assert!(dec.sum(2).max_abs_diff(&a) < 1e-10);
            prop_assert!(dec.growth_consistent());
            for p in &dec.parts {
                let lp = lie_derivative_nabla_f(&g2, &p.part).unwrap();
                prop_assert!(lp.max_abs_diff(&p.part.scale(Complex64::new(p.eigenvalue, 0.0))) < 1e-10);
            }
        }
    }
}
