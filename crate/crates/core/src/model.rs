//! Closed-form model shrinkers and the quadrature rules on their level sets.
//!
//! Every model in the catalog is isometric to `(S^2)^s x C^k`, where each
//! `S^2` is `CP^1` with `Ric = g/2` (round sphere of radius `sqrt 2`, area
//! `8 pi`, scalar curvature 1) and `C^k` carries the flat metric with
//! `g_{i jbar} = delta_{ij} / 2`. The potential is `f = s + |w|^2 / 4` with
//! `w` the flat coordinate, so `S = s` is constant and `b = sqrt(4s + |w|^2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quadrature::gauss_legendre;

/// Area of `CP^1` with `Ric = g/2`.
pub const SPHERE_FACTOR_AREA: f64 = 8.0 * PI;

/// Regularity margin: `r^2 > 4 sup S + REGULARITY_MARGIN`.
pub const REGULARITY_MARGIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    Gaussian { m: usize },
    Cylinder,
    Product { factors: Vec<ModelKind> },
}

impl ModelKind {
    fn counts(&self) -> Result<(usize, usize)> {
        match self {
            ModelKind::Gaussian { m } => {
                if *m == 0 {
                    return Err(LabError::Precondition(
                        "Gaussian model needs complex dimension m >= 1".into(),
                    ));
                }
                Ok((0, *m))
            }
            ModelKind::Cylinder => Ok((1, 1)),
            ModelKind::Product { factors } => {
                if factors.is_empty() {
                    return Err(LabError::Precondition("empty product model".into()));
                }
                let mut total = (0, 0);
                for factor in factors {
                    let (s, k) = factor.counts()?;
                    total.0 += s;
                    total.1 += k;
                }
                Ok(total)
            }
        }
    }
}

/// A closed-form gradient Kähler Ricci shrinker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelKind", into = "ModelKind")]
pub struct ModelShrinker {
    kind: ModelKind,
    spheres: usize,
    flat_dim: usize,
}

impl TryFrom<ModelKind> for ModelShrinker {
    type Error = LabError;

    fn try_from(kind: ModelKind) -> Result<Self> {
        let (spheres, flat_dim) = kind.counts()?;
        Ok(Self {
            kind,
            spheres,
            flat_dim,
        })
    }
}

impl From<ModelShrinker> for ModelKind {
    fn from(model: ModelShrinker) -> Self {
        model.kind
    }
}

impl ModelShrinker {
    pub fn gaussian(m: usize) -> Result<Self> {
        ModelKind::Gaussian { m }.try_into()
    }

    pub fn cylinder() -> Self {
        ModelKind::Cylinder
            .try_into()
            .expect("cylinder is always valid")
    }

    pub fn product(factors: Vec<ModelShrinker>) -> Result<Self> {
        ModelKind::Product {
            factors: factors.into_iter().map(|f| f.kind).collect(),
        }
        .try_into()
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn label(&self) -> String {
        fn name(kind: &ModelKind) -> String {
            match kind {
                ModelKind::Gaussian { m } => format!("gaussian(C^{m})"),
                ModelKind::Cylinder => "cylinder(CP^1 x C)".into(),
                ModelKind::Product { factors } => {
                    factors.iter().map(name).collect::<Vec<_>>().join(" x ")
                }
            }
        }
        name(&self.kind)
    }

    /// Number of `CP^1` factors.
    pub fn spheres(&self) -> usize {
        self.spheres
    }

    /// Complex dimension of the flat factor.
    pub fn flat_dim(&self) -> usize {
        self.flat_dim
    }

    /// Complex dimension.
    pub fn m(&self) -> usize {
        self.spheres + self.flat_dim
    }

    /// Real dimension.
    pub fn n(&self) -> usize {
        2 * self.m()
    }

    pub fn sup_scalar(&self) -> f64 {
        self.spheres as f64
    }

    pub fn f_min(&self) -> f64 {
        self.spheres as f64
    }

    pub fn is_gaussian(&self) -> bool {
        self.spheres == 0
    }

    /// `sup |Ric| + 1/2` with the operator norm of `Ric`.
    pub fn ricci_bound_lambda(&self) -> f64 {
        if self.spheres > 0 {
            1.0
        } else {
            0.5
        }
    }

    pub fn regularity_bound(&self) -> f64 {
        4.0 * self.sup_scalar() + REGULARITY_MARGIN
    }

    pub fn check_regular(&self, r: f64) -> Result<()> {
        let bound = self.regularity_bound();
        if !(r.is_finite() && r > 0.0 && r * r > bound) {
            return Err(LabError::NotRegular { r, bound });
        }
        Ok(())
    }

    /// Radius `|w|` of the flat factor on the level set `{b = r}`.
    pub fn flat_radius(&self, r: f64) -> f64 {
        (r * r - 4.0 * self.sup_scalar()).max(0.0).sqrt()
    }

    /// `b` at a point whose flat coordinate has modulus `t`.
    pub fn b_at_flat_radius(&self, t: f64) -> f64 {
        (4.0 * self.sup_scalar() + t * t).sqrt()
    }

    /// `(8 pi)^s`, the total area of the compact factor.
    pub fn compact_area(&self) -> f64 {
        SPHERE_FACTOR_AREA.powi(self.spheres as i32)
    }

    pub fn geometry_at(&self, x: &Point) -> Result<GeometryRecord> {
        self.check_chart(x)?;
        let w_sq: f64 = x.flat.iter().map(|z| z.norm_sqr()).sum();
        let scalar = self.sup_scalar();
        let f = scalar + 0.25 * w_sq;
        let grad_f_sq = 0.25 * w_sq;
        let b = 2.0 * f.sqrt();
        let grad_b_sq = (b > 0.0).then(|| grad_f_sq / f);
        Ok(GeometryRecord {
            f,
            scalar,
            b,
            grad_b_sq,
            grad_f_sq,
        })
    }

    /// `Delta b` from the identity `b Delta b = n - 1 - (2 - 1/f) S`.
    pub fn laplacian_b(&self, b: f64) -> f64 {
        let f = 0.25 * b * b;
        let s = self.sup_scalar();
        (self.n() as f64 - 1.0 - (2.0 - 1.0 / f) * s) / b
    }

    fn check_chart(&self, x: &Point) -> Result<()> {
        if x.flat.len() != self.flat_dim {
            return Err(LabError::Domain(format!(
                "expected {} flat coordinates, got {}",
                self.flat_dim,
                x.flat.len()
            )));
        }
        if x.sphere.len() != self.spheres {
            return Err(LabError::Domain(format!(
                "expected {} sphere coordinates, got {}",
                self.spheres,
                x.sphere.len()
            )));
        }
        if x.flat
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(LabError::Domain("non-finite flat coordinate".into()));
        }
        for sp in &x.sphere {
            if !(sp.theta.is_finite() && sp.phi.is_finite()) || !(0.0..=PI).contains(&sp.theta) {
                return Err(LabError::Domain(format!(
                    "sphere angles ({}, {}) outside chart",
                    sp.theta, sp.phi
                )));
            }
        }
        Ok(())
    }

    /// `V(r) = Vol{b < r}` in closed form.
    pub fn volume(&self, r: f64) -> Result<f64> {
        self.check_regular(r)?;
        let rho = self.flat_radius(r);
        let k = self.flat_dim as i32;
        Ok(self.compact_area() * unit_ball_volume(self.flat_dim) * rho.powi(2 * k))
    }

    /// Raw area of the level set `{b = r}`.
    pub fn level_set_area(&self, r: f64) -> Result<f64> {
        self.check_regular(r)?;
        let rho = self.flat_radius(r);
        Ok(self.compact_area()
            * unit_sphere_area(self.flat_dim)
            * rho.powi(2 * self.flat_dim as i32 - 1))
    }

    /// `(V(r), A(r))` with `A = V'(r) = int_{b=r} 1/|grad b|`.
    pub fn volume_area(&self, r: f64) -> Result<(f64, f64)> {
        let v = self.volume(r)?;
        let rho = self.flat_radius(r);
        let raw = self.level_set_area(r)?;
        Ok((v, raw * r / rho))
    }

    pub fn level_set_quadrature(&self, r: f64, resolution: usize) -> Result<LevelSetQuadrature> {
        LevelSetQuadrature::new(self, r, resolution)
    }

    pub fn ball_quadrature(&self, r: f64, resolution: usize) -> Result<BallQuadrature> {
        BallQuadrature::new(self, None, r, resolution)
    }

    pub fn shell_quadrature(
        &self,
        r_inner: f64,
        r_outer: f64,
        resolution: usize,
    ) -> Result<BallQuadrature> {
        BallQuadrature::new(self, Some(r_inner), r_outer, resolution)
    }

    /// Residual of `n V - r V' = 2 int_{b<r} S - 2 int_{b=r} S/|grad f|`
    /// relative to the size of its terms, every integral taken by quadrature.
    pub fn verify_volume_identity(&self, r: f64, resolution: usize) -> Result<f64> {
        let level = self.level_set_quadrature(r, resolution)?;
        let ball = self.ball_quadrature(r, resolution)?;
        let n = self.n() as f64;
        let mut v = 0.0;
        let mut bulk_s = 0.0;
        for (node, w) in ball.iter() {
            let g = self.flat_geometry(node);
            v += w;
            bulk_s += w * g.scalar;
        }
        let mut v_prime = 0.0;
        let mut boundary_s = 0.0;
        for (node, w) in level.iter() {
            let g = self.flat_geometry(node);
            let grad_b = g.grad_b_sq.unwrap_or(0.0).sqrt();
            let grad_f = g.grad_f_sq.sqrt();
            v_prime += w / grad_b;
            boundary_s += w * g.scalar / grad_f;
        }
        let lhs = n * v - r * v_prime;
        let rhs = 2.0 * bulk_s - 2.0 * boundary_s;
        let scale = 1.0 + n * v + r * v_prime + 2.0 * (bulk_s + boundary_s);
        Ok((lhs - rhs).abs() / scale)
    }

    /// Geometry at a node given by flat coordinates only.
    pub(crate) fn flat_geometry(&self, flat: &[Complex64]) -> GeometryRecord {
        let w_sq: f64 = flat.iter().map(|z| z.norm_sqr()).sum();
        let scalar = self.sup_scalar();
        let f = scalar + 0.25 * w_sq;
        let b = 2.0 * f.sqrt();
        let grad_f_sq = 0.25 * w_sq;
        GeometryRecord {
            f,
            scalar,
            b,
            grad_b_sq: (b > 0.0).then(|| grad_f_sq / f),
            grad_f_sq,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub theta: f64,
    pub phi: f64,
}

/// A point in model coordinates: flat complex coordinates plus polar angles
/// on each `CP^1` factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub flat: Vec<Complex64>,
    pub sphere: Vec<SpherePoint>,
}

impl Point {
    pub fn new(flat: Vec<Complex64>, sphere: Vec<SpherePoint>) -> Self {
        Self { flat, sphere }
    }

    /// A point on a model without compact factors.
    pub fn flat(flat: Vec<Complex64>) -> Self {
        Self {
            flat,
            sphere: Vec::new(),
        }
    }

    /// Flat coordinates with every sphere coordinate at the equator.
    pub fn with_equator(model: &ModelShrinker, flat: Vec<Complex64>) -> Self {
        Self {
            flat,
            sphere: vec![
                SpherePoint {
                    theta: PI / 2.0,
                    phi: 0.0
                };
                model.spheres()
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeometryRecord {
    pub f: f64,
    #[serde(rename = "S")]
    pub scalar: f64,
    pub b: f64,
    pub grad_b_sq: Option<f64>,
    pub grad_f_sq: f64,
}

pub fn unit_ball_volume(k: usize) -> f64 {
    PI.powi(k as i32) / factorial(k)
}

/// Area of the unit sphere `S^{2k-1}` in `C^k`.
pub fn unit_sphere_area(k: usize) -> f64 {
    2.0 * PI.powi(k as i32) / factorial(k - 1)
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Angular and simplex node counts for a given resolution and flat dimension.
pub(crate) fn node_counts(resolution: usize, k: usize) -> (usize, usize) {
    let per_angle = if k == 1 {
        resolution.max(8)
    } else {
        ((resolution as f64).powf(1.0 / k as f64).round() as usize).max(8)
    };
    let simplex = (per_angle / 2).clamp(4, 64);
    (per_angle, simplex)
}

/// Product rule on the unit sphere `S^{2k-1}` of `C^k`.
///
/// Writes `z_j = sqrt(t_j) e^{i phi_j}`; the surface measure is uniform on the
/// simplex `{t_j >= 0, sum t_j = 1}` times uniform on the torus of angles. The
/// angles use equispaced points, the simplex a collapsed Gauss–Legendre rule.
#[derive(Clone, Debug)]
pub struct UnitSphereRule {
    pub k: usize,
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl UnitSphereRule {
    pub fn new(k: usize, resolution: usize) -> Self {
        assert!(k >= 1);
        let (n_phi, n_t) = node_counts(resolution, k);
        let simplex = simplex_rule(k, n_t);
        let total_area = unit_sphere_area(k);
        let simplex_norm = factorial(k - 1);
        let angle_weight = 1.0 / (n_phi as f64).powi(k as i32);
        let angles: Vec<Complex64> = (0..n_phi)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n_phi as f64))
            .collect();
        let torus = n_phi.pow(k as u32);
        let mut nodes = Vec::with_capacity(simplex.len() * torus * k);
        let mut weights = Vec::with_capacity(simplex.len() * torus);
        for (t, wt) in &simplex {
            let amps: Vec<f64> = t.iter().map(|x| x.max(0.0).sqrt()).collect();
            for idx in 0..torus {
                let mut rest = idx;
                for amp in &amps {
                    nodes.push(angles[rest % n_phi] * *amp);
                    rest /= n_phi;
                }
                weights.push(total_area * simplex_norm * wt * angle_weight);
            }
        }
        Self { k, nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Rule on the simplex `{t in R^k_{>=0}, sum t = 1}` (Lebesgue measure on the
/// first `k-1` coordinates, total mass `1/(k-1)!`).
fn simplex_rule(k: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
    if k == 1 {
        return vec![(vec![1.0], 1.0)];
    }
    let gl = gauss_legendre(n).mapped(0.0, 1.0);
    let dims = k - 1;
    let total = n.pow(dims as u32);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rest = idx;
        let mut remaining = 1.0;
        let mut t = Vec::with_capacity(k);
        let mut w = 1.0;
        for _ in 0..dims {
            let i = rest % n;
            rest /= n;
            let u = gl.nodes[i];
            w *= gl.weights[i] * remaining;
            t.push(remaining * u);
            remaining *= 1.0 - u;
        }
        // The last factor's Jacobian is absorbed above: each step contributes
        // the remaining length of the interval it subdivides.
        t.push(remaining);
        out.push((t, w));
    }
    out
}

/// Surface quadrature on a level set `{b = r}`.
#[derive(Clone, Debug)]
pub struct LevelSetQuadrature {
    pub r: f64,
    /// Flat radius of the level set.
    pub rho: f64,
    pub resolution: usize,
    flat_dim: usize,
    spheres: usize,
    coords: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl LevelSetQuadrature {
    fn new(model: &ModelShrinker, r: f64, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(LabError::Precondition("resolution must be positive".into()));
        }
        model.check_regular(r)?;
        let k = model.flat_dim();
        let rho = model.flat_radius(r);
        let unit = UnitSphereRule::new(k, resolution);
        let scale = model.compact_area() * rho.powi(2 * k as i32 - 1);
        Ok(Self {
            r,
            rho,
            resolution,
            flat_dim: k,
            spheres: model.spheres(),
            coords: unit.nodes.iter().map(|z| z * rho).collect(),
            weights: unit.weights.iter().map(|w| w * scale).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Iterates over (flat coordinates, weight).
    pub fn iter(&self) -> impl Iterator<Item = (&[Complex64], f64)> + '_ {
        self.coords
            .chunks(self.flat_dim)
            .zip(self.weights.iter().copied())
    }

    /// The i-th node as a model point; compact factors are integrated exactly,
    /// so their coordinate is a representative on the equator.
    pub fn node(&self, i: usize) -> Point {
        Point {
            flat: self.coords[i * self.flat_dim..(i + 1) * self.flat_dim].to_vec(),
            sphere: vec![
                SpherePoint {
                    theta: PI / 2.0,
                    phi: 0.0
                };
                self.spheres
            ],
        }
    }

    pub fn integrate<F: Fn(&[Complex64]) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(z, w)| w * f(z)).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Volume quadrature on `{b < r}` or on a shell `{r_inner < b < r}`.
#[derive(Clone, Debug)]
pub struct BallQuadrature {
    pub r: f64,
    pub r_inner: Option<f64>,
    pub resolution: usize,
    flat_dim: usize,
    coords: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl BallQuadrature {
    fn new(model: &ModelShrinker, r_inner: Option<f64>, r: f64, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(LabError::Precondition("resolution must be positive".into()));
        }
        model.check_regular(r)?;
        let rho_outer = model.flat_radius(r);
        let rho_inner = match r_inner {
            Some(ri) => {
                if ri >= r {
                    return Err(LabError::Precondition(format!(
                        "shell needs r_inner < r_outer, got {ri} >= {r}"
                    )));
                }
                model.flat_radius(ri.max(0.0))
            }
            None => 0.0,
        };
        let k = model.flat_dim();
        let unit = UnitSphereRule::new(k, resolution);
        let (_, n_t) = node_counts(resolution, k);
        let n_radial = (n_t + k).clamp(8, 96);
        let radial = gauss_legendre(n_radial).mapped(rho_inner, rho_outer);
        let compact = model.compact_area();
        let mut coords = Vec::with_capacity(radial.len() * unit.nodes.len());
        let mut weights = Vec::with_capacity(radial.len() * unit.len());
        for (&t, &wt) in radial.nodes.iter().zip(&radial.weights) {
            let jac = compact * wt * t.powi(2 * k as i32 - 1);
            coords.extend(unit.nodes.iter().map(|z| z * t));
            weights.extend(unit.weights.iter().map(|w| w * jac));
        }
        Ok(Self {
            r,
            r_inner,
            resolution,
            flat_dim: k,
            coords,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[Complex64], f64)> + '_ {
        self.coords
            .chunks(self.flat_dim)
            .zip(self.weights.iter().copied())
    }

    pub fn integrate<F: Fn(&[Complex64]) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(z, w)| w * f(z)).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gaussian_geometry() {
        let model = ModelShrinker::gaussian(1).unwrap();
        let g = model.geometry_at(&Point::flat(vec![c(3.0, 0.0)])).unwrap();
        assert_eq!(g.f, 2.25);
        assert_eq!(g.scalar, 0.0);
        assert_eq!(g.b, 3.0);
        assert_eq!(g.grad_b_sq, Some(1.0));
        let origin = model.geometry_at(&Point::flat(vec![c(0.0, 0.0)])).unwrap();
        assert_eq!(origin.grad_b_sq, None);
    }

    #[test]
    fn cylinder_geometry() {
        let model = ModelShrinker::cylinder();
        let x = Point::with_equator(&model, vec![c(0.0, 4.0)]);
        let g = model.geometry_at(&x).unwrap();
        assert_eq!(g.f, 5.0);
        assert_eq!(g.scalar, 1.0);
        assert!((g.b - 2.0 * 5f64.sqrt()).abs() < 1e-15);
        assert!((g.grad_b_sq.unwrap() - 0.8).abs() < 1e-15);
        assert!((g.scalar + g.grad_f_sq - g.f).abs() < 1e-15);
    }

    #[test]
    fn chart_errors() {
        let model = ModelShrinker::cylinder();
        assert!(matches!(
            model.geometry_at(&Point::flat(vec![c(1.0, 0.0)])),
            Err(LabError::Domain(_))
        ));
        let bad = Point::new(
            vec![c(1.0, 0.0)],
            vec![SpherePoint {
                theta: 4.0,
                phi: 0.0,
            }],
        );
        assert!(matches!(model.geometry_at(&bad), Err(LabError::Domain(_))));
        assert!(matches!(
            ModelShrinker::gaussian(0),
            Err(LabError::Precondition(_))
        ));
    }

    #[test]
    fn laplacian_b_matches_flat_formula() {
        let model = ModelShrinker::product(vec![
            ModelShrinker::cylinder(),
            ModelShrinker::gaussian(2).unwrap(),
        ])
        .unwrap();
        let (s, k) = (model.spheres() as f64, model.flat_dim() as f64);
        for b in [2.5, 4.0, 9.0] {
            let direct = (2.0 * k - 1.0) / b + 4.0 * s / b.powi(3);
            assert!((model.laplacian_b(b) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn level_set_areas() {
        let g1 = ModelShrinker::gaussian(1).unwrap();
        let q = g1.level_set_quadrature(2.0, 64).unwrap();
        assert!((q.total_weight() - 4.0 * PI).abs() < 1e-12);
        let g2 = ModelShrinker::gaussian(2).unwrap();
        let q = g2.level_set_quadrature(1.0, 64).unwrap();
        assert!((q.total_weight() - 2.0 * PI * PI).abs() < 1e-12);
        let cyl = ModelShrinker::cylinder();
        let q = cyl.level_set_quadrature(4.0, 64).unwrap();
        let coarea = q.integrate(|z| {
            let g = cyl.flat_geometry(z);
            1.0 / g.grad_b_sq.unwrap().sqrt()
        });
        assert!((coarea - 64.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn nodes_lie_on_level_set() {
        for model in [
            ModelShrinker::gaussian(3).unwrap(),
            ModelShrinker::cylinder(),
        ] {
            let r = 5.0;
            let q = model.level_set_quadrature(r, 100).unwrap();
            for i in 0..q.len() {
                let g = model.geometry_at(&q.node(i)).unwrap();
                assert!((g.b - r).abs() < 1e-12 * r);
            }
        }
    }

    #[test]
    fn volumes_and_areas() {
        let cyl = ModelShrinker::cylinder();
        let (v, a) = cyl.volume_area(4.0).unwrap();
        assert!((v - 8.0 * PI * PI * 12.0).abs() < 1e-10);
        assert!((a - 64.0 * PI * PI).abs() < 1e-10);
        let ball = cyl.ball_quadrature(4.0, 64).unwrap();
        assert!((ball.total_weight() - v).abs() < 1e-9 * v);
        let g3 = ModelShrinker::gaussian(3).unwrap();
        let r = 1.7f64;
        let (v, a) = g3.volume_area(r).unwrap();
        assert!((v - unit_ball_volume(3) * r.powi(6)).abs() < 1e-12);
        assert!((a - 6.0 * unit_ball_volume(3) * r.powi(5)).abs() < 1e-12);
        let ball = g3.ball_quadrature(r, 200).unwrap();
        assert!((ball.total_weight() - v).abs() < 1e-10 * v);
    }

    #[test]
    fn area_growth_on_cylinder() {
        let cyl = ModelShrinker::cylinder();
        for r in [10.0, 100.0, 1000.0] {
            let (_, a) = cyl.volume_area(r).unwrap();
            let ratio = a / r.powi(3);
            assert!((ratio - 16.0 * PI * PI / (r * r)).abs() < 1e-12 * ratio.max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn regularity_guard() {
        let cyl = ModelShrinker::cylinder();
        let err = cyl.level_set_quadrature(2.0, 16).unwrap_err();
        match err {
            LabError::NotRegular { bound, .. } => assert!((bound - 4.0 - 1e-6).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn volume_identity_gaussian_and_cylinder() {
        for m in 1..=3 {
            let model = ModelShrinker::gaussian(m).unwrap();
            for r in [0.5, 3.0, 11.0] {
                assert!(model.verify_volume_identity(r, 64).unwrap() < 1e-12);
            }
        }
        let cyl = ModelShrinker::cylinder();
        let (v, a) = cyl.volume_area(4.0).unwrap();
        let lhs = 4.0 * v - 4.0 * a;
        assert!((lhs - 128.0 * PI * PI).abs() < 1e-9);
        let coarse = cyl.verify_volume_identity(10.0, 32).unwrap();
        let fine = cyl.verify_volume_identity(10.0, 64).unwrap();
        assert!(fine <= coarse / 3.0 || fine < 1e-13, "{coarse} -> {fine}");
    }

    #[test]
    fn model_json_roundtrip() {
        let model = ModelShrinker::product(vec![
            ModelShrinker::cylinder(),
            ModelShrinker::gaussian(2).unwrap(),
        ])
        .unwrap();
        let text = serde_json::to_string(&model).unwrap();
        let back: ModelShrinker = serde_json::from_str(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.spheres(), 1);
        assert_eq!(back.flat_dim(), 3);
        assert!(serde_json::from_str::<ModelShrinker>(r#"{"kind":"gaussian","m":0}"#).is_err());
    }
}
