//! Layered one-term Ogden tissue foundation.
//!
//! Each layer occupies a band of the world plane between its own entry
//! boundary and the next layer's; the last layer extends to infinity. The
//! lateral reaction of a layer is a Winkler spring whose stiffness is the
//! tangent modulus of an incompressible one-term Ogden solid under unconfined
//! uniaxial compression, evaluated at the compression stretch
//! `λ = (t − |u|) / t`.

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stretch floor. `λ^(−α/2−1)` diverges as `λ → 0`.
pub const LAMBDA_MIN: f64 = 0.05;

/// Default initial tissue thickness (m).
pub const DEFAULT_THICKNESS: f64 = 0.040;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TissueError {
    #[error("stretch {0} outside admissible range [{LAMBDA_MIN}, 1]")]
    StretchOutOfDomain(f64),
    #[error("layer {layer}: {reason}")]
    InvalidLayer { layer: usize, reason: String },
    #[error("tissue domain needs at least one layer")]
    Empty,
    #[error("boundaries of layers {0} and {1} intersect inside the simulation window")]
    Overlap(usize, usize),
    #[error("layer {0} boundary is not deeper than layer {1}")]
    OutOfOrder(usize, usize),
}

/// Which force law the foundation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceMode {
    /// `f = k(λ) u`, friction neglected.
    #[default]
    Approximate,
    /// `f = k(λ) u (1 − γ sin²(atan u_x))`.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stretch {
    pub ratio: f64,
    pub clamped: bool,
}

/// Compression stretch of a layer of thickness `ti` displaced by `u_rel`.
pub fn stretch(u_rel: f64, ti: f64) -> Stretch {
    debug_assert!(ti > 0.0);
    let raw = (ti - u_rel.abs()) / ti;
    if raw < LAMBDA_MIN {
        Stretch {
            ratio: LAMBDA_MIN,
            clamped: true,
        }
    } else {
        Stretch {
            ratio: raw,
            clamped: false,
        }
    }
}

/// `k(λ) = 2μ (λ^(α−1) + ½ λ^(−α/2−1))`.
pub fn tangent_stiffness(lambda: f64, mu: f64, alpha: f64) -> Result<f64, TissueError> {
    if !(LAMBDA_MIN..=1.0).contains(&lambda) {
        return Err(TissueError::StretchOutOfDomain(lambda));
    }
    Ok(2.0 * mu * (lambda.powf(alpha - 1.0) + 0.5 * lambda.powf(-alpha / 2.0 - 1.0)))
}

/// `1 − γ sin²(atan s)`, written without trig as `1 − γ s² / (1 + s²)`.
pub fn friction_factor(gamma: f64, slope: f64) -> f64 {
    let s2 = slope * slope;
    1.0 - gamma * s2 / (1.0 + s2)
}

/// Planar line `{p : (p − point) · normal = 0}`; `normal` points deeper into
/// the tissue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub point: Point2<f64>,
    pub normal: Vector2<f64>,
}

impl Boundary {
    /// Boundary through `point` whose deeper side lies along `normal_angle`.
    pub fn new(point: Point2<f64>, normal_angle: f64) -> Self {
        Self {
            point,
            normal: Vector2::new(normal_angle.cos(), normal_angle.sin()),
        }
    }

    /// Vertical line `x = x0` with tissue on the `+x` side.
    pub fn vertical(x0: f64) -> Self {
        Self::new(Point2::new(x0, 0.0), 0.0)
    }

    pub fn signed_distance(&self, p: &Point2<f64>) -> f64 {
        (p - self.point).dot(&self.normal)
    }

    pub fn normal_angle(&self) -> f64 {
        self.normal.y.atan2(self.normal.x)
    }

    /// Direction along the line, normal rotated by +90°.
    pub fn tangent(&self) -> Vector2<f64> {
        Vector2::new(-self.normal.y, self.normal.x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OgdenLayer {
    pub name: String,
    /// Shear modulus (Pa).
    pub mu: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Initial thickness before compression (m).
    pub thickness: f64,
    /// Leading boundary of the layer.
    pub boundary: Boundary,
}

impl OgdenLayer {
    pub fn new(name: impl Into<String>, mu: f64, alpha: f64, boundary: Boundary) -> Self {
        Self {
            name: name.into(),
            mu,
            alpha,
            gamma: 0.0,
            thickness: DEFAULT_THICKNESS,
            boundary,
        }
    }

    fn validate(&self, index: usize) -> Result<(), TissueError> {
        let bad = |reason: String| TissueError::InvalidLayer {
            layer: index,
            reason,
        };
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(bad(format!("shear modulus {} must be positive", self.mu)));
        }
        if !self.alpha.is_finite() {
            return Err(bad("alpha must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(bad(format!("friction {} must lie in [0, 1)", self.gamma)));
        }
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return Err(bad(format!("thickness {} must be positive", self.thickness)));
        }
        let n = self.boundary.normal.norm();
        if !((n - 1.0).abs() < 1e-9) {
            return Err(bad("boundary normal must be a unit vector".into()));
        }
        Ok(())
    }

    pub fn stiffness(&self, lambda: f64) -> Result<f64, TissueError> {
        tangent_stiffness(lambda, self.mu, self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceSample {
    /// Lateral force density (N/m).
    pub force: f64,
    /// Effective spring stiffness including the friction factor (Pa).
    pub stiffness: f64,
    pub stretch: Stretch,
}

/// Lateral force density of `layer` at relative deflection `u_rel`.
pub fn force_density(
    u_rel: f64,
    slope: f64,
    layer: &OgdenLayer,
    mode: ForceMode,
) -> Result<ForceSample, TissueError> {
    let s = stretch(u_rel, layer.thickness);
    let mut k = layer.stiffness(s.ratio)?;
    if mode == ForceMode::Full {
        k *= friction_factor(layer.gamma, slope);
    }
    Ok(ForceSample {
        force: k * u_rel,
        stiffness: k,
        stretch: s,
    })
}

/// Ordered stack of layers along the insertion direction.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueDomain {
    layers: Vec<OgdenLayer>,
    window: f64,
}

impl TissueDomain {
    /// Half-width (m) of the square around the origin inside which layer
    /// boundaries must not cross.
    pub const DEFAULT_WINDOW: f64 = 0.5;

    pub fn new(layers: Vec<OgdenLayer>) -> Result<Self, TissueError> {
        Self::with_window(layers, Self::DEFAULT_WINDOW)
    }

    pub fn with_window(layers: Vec<OgdenLayer>, window: f64) -> Result<Self, TissueError> {
        if layers.is_empty() {
            return Err(TissueError::Empty);
        }
        for (i, l) in layers.iter().enumerate() {
            l.validate(i)?;
        }
        for i in 0..layers.len() - 1 {
            let (a, b) = (&layers[i].boundary, &layers[i + 1].boundary);
            if a.signed_distance(&b.point) <= 0.0 {
                return Err(TissueError::OutOfOrder(i + 1, i));
            }
            if let Some(p) = intersection(a, b) {
                if p.x.abs() <= window && p.y.abs() <= window {
                    return Err(TissueError::Overlap(i, i + 1));
                }
            }
        }
        Ok(Self { layers, window })
    }

    pub fn layers(&self) -> &[OgdenLayer] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> &OgdenLayer {
        &self.layers[index]
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn entry(&self) -> &Boundary {
        &self.layers[0].boundary
    }

    /// Layer containing `p`; points on a shared boundary belong to the
    /// deeper layer.
    pub fn layer_at(&self, p: &Point2<f64>) -> Option<usize> {
        if self.entry().signed_distance(p) < 0.0 {
            return None;
        }
        (0..self.layers.len())
            .rev()
            .find(|&i| self.layers[i].boundary.signed_distance(p) >= 0.0)
    }

    /// Returns a copy with per-layer `(μ, α)` replaced; extra entries are
    /// ignored.
    pub fn with_parameters(&self, params: &[(f64, f64)]) -> Result<Self, TissueError> {
        let mut layers = self.layers.clone();
        for (l, &(mu, alpha)) in layers.iter_mut().zip(params) {
            l.mu = mu;
            l.alpha = alpha;
        }
        Self::with_window(layers, self.window)
    }
}

fn intersection(a: &Boundary, b: &Boundary) -> Option<Point2<f64>> {
    // solve n_a·p = c_a, n_b·p = c_b
    let det = a.normal.x * b.normal.y - a.normal.y * b.normal.x;
    if det.abs() < 1e-12 {
        return None;
    }
    let ca = a.normal.dot(&a.point.coords);
    let cb = b.normal.dot(&b.point.coords);
    let x = (ca * b.normal.y - cb * a.normal.y) / det;
    let y = (a.normal.x * cb - b.normal.x * ca) / det;
    Some(Point2::new(x, y))
}
