//! Linear Euler-Bernoulli beam kernel with cubic Hermite elements.
//!
//! Each node carries a transverse deflection `u` and a slope `θ ≈ du/dx`,
//! stored interleaved as `[u0, θ0, u1, θ1, ...]`. A two-node element couples
//! DOFs at most three indices apart, so the global matrix is banded with
//! half-bandwidth 3.
//!
//! Tissue is represented by per-element Winkler patches: a distributed spring
//! of stiffness `k` (force per length per unit deflection) pulling the beam
//! toward a reference ordinate `y_ref`. Essential boundary conditions are
//! eliminated from the system rather than penalized.

use std::f64::consts::PI;

use thiserror::Error;

use crate::banded::{BandedSym, SolverError};

/// Half-bandwidth of the assembled stiffness matrix.
pub const HALF_BANDWIDTH: usize = 3;

/// Iterative refinement passes after the Cholesky solve.
const REFINEMENT_STEPS: usize = 2;

pub type Mat4 = [[f64; 4]; 4];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("invalid beam property: {0}")]
    InvalidProperty(String),
    #[error("invalid foundation stiffness {0} (must be finite and >= 0)")]
    InvalidStiffness(f64),
    #[error("foundation patch references element {element}, mesh has {elements}")]
    BadElement { element: usize, elements: usize },
    #[error("boundary condition references node {node}, mesh has {nodes}")]
    BadNode { node: usize, nodes: usize },
    #[error("DOF {dof} constrained more than once")]
    DuplicateConstraint { dof: usize },
    #[error("prescribed value for DOF {dof} is not finite")]
    NonFiniteValue { dof: usize },
    #[error(
        "system is insufficiently constrained: {constrained} essential DOFs and no foundation \
         stiffness"
    )]
    Singular { constrained: usize },
    #[error("station {x} lies outside the beam [{first}, {last}]")]
    OutOfRange { x: f64, first: f64, last: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Bending properties of the needle shaft.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamProperties {
    /// Young's modulus (Pa).
    pub youngs_modulus: f64,
    /// Second moment of area (m⁴).
    pub moment_of_area: f64,
}

impl BeamProperties {
    pub fn new(youngs_modulus: f64, moment_of_area: f64) -> Result<Self, FemError> {
        if !(youngs_modulus > 0.0 && youngs_modulus.is_finite()) {
            return Err(FemError::InvalidProperty(format!(
                "Young's modulus {youngs_modulus} must be positive"
            )));
        }
        if !(moment_of_area > 0.0 && moment_of_area.is_finite()) {
            return Err(FemError::InvalidProperty(format!(
                "moment of area {moment_of_area} must be positive"
            )));
        }
        Ok(Self {
            youngs_modulus,
            moment_of_area,
        })
    }

    /// Hollow circular section, `I = π (D_o⁴ − D_i⁴) / 64`.
    pub fn hollow_tube(
        youngs_modulus: f64,
        outer_diameter: f64,
        inner_diameter: f64,
    ) -> Result<Self, FemError> {
        if !(inner_diameter >= 0.0 && outer_diameter > inner_diameter) {
            return Err(FemError::InvalidProperty(format!(
                "tube diameters must satisfy D_o > D_i >= 0 (got {outer_diameter}, {inner_diameter})"
            )));
        }
        let i = PI * (outer_diameter.powi(4) - inner_diameter.powi(4)) / 64.0;
        Self::new(youngs_modulus, i)
    }

    pub fn flexural_rigidity(&self) -> f64 {
        self.youngs_modulus * self.moment_of_area
    }
}

/// Uniform mesh of two-node elements along the axial station coordinate.
///
/// Stations are `origin + i * spacing`; shifting `origin` slides the whole
/// needle without changing its element lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamMesh {
    pub origin: f64,
    pub spacing: f64,
    pub nodes: usize,
}

impl BeamMesh {
    pub fn new(origin: f64, spacing: f64, elements: usize) -> Result<Self, FemError> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(FemError::InvalidProperty(format!(
                "element length {spacing} must be positive"
            )));
        }
        if elements == 0 {
            return Err(FemError::InvalidProperty("mesh needs at least one element".into()));
        }
        Ok(Self {
            origin,
            spacing,
            nodes: elements + 1,
        })
    }

    pub fn elements(&self) -> usize {
        self.nodes - 1
    }

    pub fn dofs(&self) -> usize {
        2 * self.nodes
    }

    pub fn station(&self, node: usize) -> f64 {
        self.origin + node as f64 * self.spacing
    }

    pub fn first_station(&self) -> f64 {
        self.origin
    }

    pub fn last_station(&self) -> f64 {
        self.station(self.nodes - 1)
    }

    pub fn midpoint(&self, element: usize) -> f64 {
        self.origin + (element as f64 + 0.5) * self.spacing
    }

    pub fn length(&self) -> f64 {
        self.elements() as f64 * self.spacing
    }
}

/// Bending stiffness of one Hermite element.
///
/// `EI = 0` yields the zero matrix; negative rigidity or non-positive length
/// is rejected.
pub fn element_stiffness(ei: f64, h: f64) -> Result<Mat4, FemError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(FemError::InvalidProperty(format!("element length {h} must be positive")));
    }
    if !(ei >= 0.0 && ei.is_finite()) {
        return Err(FemError::InvalidProperty(format!("flexural rigidity {ei} must be >= 0")));
    }
    let c = ei / (h * h * h);
    let h2 = h * h;
    Ok([
        [12.0 * c, 6.0 * h * c, -12.0 * c, 6.0 * h * c],
        [6.0 * h * c, 4.0 * h2 * c, -6.0 * h * c, 2.0 * h2 * c],
        [-12.0 * c, -6.0 * h * c, 12.0 * c, -6.0 * h * c],
        [6.0 * h * c, 2.0 * h2 * c, -6.0 * h * c, 4.0 * h2 * c],
    ])
}

/// Consistent stiffness and load of a uniform spring bed over one element.
///
/// Returns `k ∫ N Nᵀ dx` and `k y_ref ∫ N dx`.
pub fn foundation_element_matrices(k: f64, y_ref: f64, h: f64) -> Result<(Mat4, [f64; 4]), FemError> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(FemError::InvalidStiffness(k));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(FemError::InvalidProperty(format!("element length {h} must be positive")));
    }
    let c = k * h / 420.0;
    let h2 = h * h;
    let m = [
        [156.0 * c, 22.0 * h * c, 54.0 * c, -13.0 * h * c],
        [22.0 * h * c, 4.0 * h2 * c, 13.0 * h * c, -3.0 * h2 * c],
        [54.0 * c, 13.0 * h * c, 156.0 * c, -22.0 * h * c],
        [-13.0 * h * c, -3.0 * h2 * c, -22.0 * h * c, 4.0 * h2 * c],
    ];
    let q = k * y_ref;
    let f = [q * h / 2.0, q * h2 / 12.0, q * h / 2.0, -q * h2 / 12.0];
    Ok((m, f))
}

/// Spring bed on one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoundationPatch {
    pub element: usize,
    /// Force per unit length per unit deflection (Pa).
    pub stiffness: f64,
    /// Ordinate the springs pull toward (m).
    pub reference: f64,
}

/// Prescribed deflection and/or slope at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialBc {
    pub node: usize,
    pub deflection: Option<f64>,
    pub slope: Option<f64>,
}

impl EssentialBc {
    pub fn clamp(node: usize, deflection: f64, slope: f64) -> Self {
        Self {
            node,
            deflection: Some(deflection),
            slope: Some(slope),
        }
    }
}

/// Concentrated force and moment at a node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodalLoad {
    pub node: usize,
    pub force: f64,
    pub moment: f64,
}

/// Assembled system with essential DOFs eliminated.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    /// Reduced matrix over the free DOFs.
    pub matrix: BandedSym,
    pub rhs: Vec<f64>,
    /// Global index of each free DOF.
    pub free: Vec<usize>,
    /// Global DOF vector with prescribed entries filled in; free entries are 0.
    pub prescribed: Vec<f64>,
}

impl LinearSystem {
    pub fn free_dofs(&self) -> usize {
        self.free.len()
    }
}

/// Result of a direct solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub dofs: Vec<f64>,
    /// `‖A x − b‖₂` over the reduced system.
    pub residual_norm: f64,
    pub rhs_norm: f64,
    pub pivot_ratio: f64,
}

pub fn assemble(
    mesh: &BeamMesh,
    props: &BeamProperties,
    patches: &[FoundationPatch],
    bcs: &[EssentialBc],
    loads: &[NodalLoad],
) -> Result<LinearSystem, FemError> {
    let ndof = mesh.dofs();
    let ne = mesh.elements();
    let h = mesh.spacing;
    let mut k_full = BandedSym::zeros(ndof, HALF_BANDWIDTH);
    let mut f_full = vec![0.0; ndof];

    let ke = element_stiffness(props.flexural_rigidity(), h)?;
    for e in 0..ne {
        scatter(&mut k_full, e, &ke);
    }

    let mut any_spring = false;
    for p in patches {
        if p.element >= ne {
            return Err(FemError::BadElement {
                element: p.element,
                elements: ne,
            });
        }
        let (m, f) = foundation_element_matrices(p.stiffness, p.reference, h)?;
        any_spring |= p.stiffness > 0.0;
        scatter(&mut k_full, p.element, &m);
        for (a, fa) in f.iter().enumerate() {
            f_full[2 * p.element + a] += fa;
        }
    }

    for l in loads {
        if l.node >= mesh.nodes {
            return Err(FemError::BadNode {
                node: l.node,
                nodes: mesh.nodes,
            });
        }
        f_full[2 * l.node] += l.force;
        f_full[2 * l.node + 1] += l.moment;
    }

    let mut fixed: Vec<Option<f64>> = vec![None; ndof];
    let mut constrained = 0;
    for bc in bcs {
        if bc.node >= mesh.nodes {
            return Err(FemError::BadNode {
                node: bc.node,
                nodes: mesh.nodes,
            });
        }
        for (dof, value) in [(2 * bc.node, bc.deflection), (2 * bc.node + 1, bc.slope)] {
            if let Some(v) = value {
                if !v.is_finite() {
                    return Err(FemError::NonFiniteValue { dof });
                }
                if fixed[dof].replace(v).is_some() {
                    return Err(FemError::DuplicateConstraint { dof });
                }
                constrained += 1;
            }
        }
    }
    if constrained < 2 && !any_spring {
        return Err(FemError::Singular { constrained });
    }

    let mut free = Vec::with_capacity(ndof - constrained);
    let mut compact = vec![usize::MAX; ndof];
    let mut prescribed = vec![0.0; ndof];
    for (dof, v) in fixed.iter().enumerate() {
        match v {
            Some(v) => prescribed[dof] = *v,
            None => {
                compact[dof] = free.len();
                free.push(dof);
            }
        }
    }

    let mut matrix = BandedSym::zeros(free.len(), HALF_BANDWIDTH);
    let mut rhs: Vec<f64> = free.iter().map(|&g| f_full[g]).collect();
    for (ci, &gi) in free.iter().enumerate() {
        let lo = gi.saturating_sub(HALF_BANDWIDTH);
        let hi = (gi + HALF_BANDWIDTH).min(ndof - 1);
        for gj in lo..=hi {
            let a = k_full.get(gi, gj);
            if a == 0.0 {
                continue;
            }
            match fixed[gj] {
                Some(v) => rhs[ci] -= a * v,
                None if gj <= gi => matrix.set(ci, compact[gj], a),
                None => {}
            }
        }
    }

    Ok(LinearSystem {
        matrix,
        rhs,
        free,
        prescribed,
    })
}

fn scatter(k: &mut BandedSym, element: usize, m: &Mat4) {
    let base = 2 * element;
    for a in 0..4 {
        for b in 0..=a {
            k.add(base + a, base + b, m[a][b]);
        }
    }
}

/// Banded Cholesky solve with iterative refinement; returns the full nodal
/// DOF vector.
pub fn solve(system: &LinearSystem) -> Result<Solution, FemError> {
    let factor = system.matrix.clone().cholesky()?;
    let mut x = factor.solve(&system.rhs)?;
    for _ in 0..REFINEMENT_STEPS {
        let r = system.matrix.residual_compensated(&x, &system.rhs);
        let dx = factor.solve(&r)?;
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    let ax = system.matrix.mul_vec(&x);
    let residual_norm = ax
        .iter()
        .zip(&system.rhs)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let rhs_norm = system.rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
    let mut dofs = system.prescribed.clone();
    for (ci, &g) in system.free.iter().enumerate() {
        dofs[g] = x[ci];
    }
    Ok(Solution {
        dofs,
        residual_norm,
        rhs_norm,
        pivot_ratio: factor.pivot_ratio(),
    })
}

/// Hermite shape functions and their x-derivatives at local coordinate `xi`.
pub fn hermite_basis(xi: f64, h: f64) -> ([f64; 4], [f64; 4]) {
    let xi2 = xi * xi;
    let xi3 = xi2 * xi;
    let n = [
        1.0 - 3.0 * xi2 + 2.0 * xi3,
        h * (xi - 2.0 * xi2 + xi3),
        3.0 * xi2 - 2.0 * xi3,
        h * (-xi2 + xi3),
    ];
    let dn = [
        (-6.0 * xi + 6.0 * xi2) / h,
        1.0 - 4.0 * xi + 3.0 * xi2,
        (6.0 * xi - 6.0 * xi2) / h,
        -2.0 * xi + 3.0 * xi2,
    ];
    (n, dn)
}

/// Deflection and slope at station `x` by Hermite interpolation.
pub fn evaluate(mesh: &BeamMesh, dofs: &[f64], x: f64) -> Result<(f64, f64), FemError> {
    let first = mesh.first_station();
    let last = mesh.last_station();
    let slack = 1e-12 * mesh.spacing;
    if !(x >= first - slack && x <= last + slack) {
        return Err(FemError::OutOfRange { x, first, last });
    }
    let ne = mesh.elements();
    let e = (((x - first) / mesh.spacing).floor().max(0.0) as usize).min(ne - 1);
    Ok(evaluate_in_element(mesh, dofs, e, (x - mesh.station(e)) / mesh.spacing))
}

/// Deflection and slope at local coordinate `xi ∈ [0, 1]` of element `e`.
pub fn evaluate_in_element(mesh: &BeamMesh, dofs: &[f64], e: usize, xi: f64) -> (f64, f64) {
    let (n, dn) = hermite_basis(xi, mesh.spacing);
    let d = &dofs[2 * e..2 * e + 4];
    let mut u = 0.0;
    let mut du = 0.0;
    for a in 0..4 {
        u += n[a] * d[a];
        du += dn[a] * d[a];
    }
    (u, du)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 3-point Gauss-Legendre on [0, 1]; exact for polynomials up to degree 5.
    const GAUSS: [(f64, f64); 3] = [
        (0.112_701_665_379_258_3, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.887_298_334_620_741_7, 5.0 / 18.0),
    ];

    fn second_derivatives(xi: f64, h: f64) -> [f64; 4] {
        [
            (-6.0 + 12.0 * xi) / (h * h),
            (-4.0 + 6.0 * xi) / h,
            (6.0 - 12.0 * xi) / (h * h),
            (-2.0 + 6.0 * xi) / h,
        ]
    }

    fn quadrature_stiffness(ei: f64, h: f64) -> Mat4 {
        let mut k = [[0.0; 4]; 4];
        for (xi, w) in GAUSS {
            let b = second_derivatives(xi, h);
            for a in 0..4 {
                for c in 0..4 {
                    k[a][c] += ei * b[a] * b[c] * w * h;
                }
            }
        }
        k
    }

    /// ∫ N Nᵀ is degree 6, so use a 4-point rule.
    fn quadrature_foundation(k: f64, y: f64, h: f64) -> (Mat4, [f64; 4]) {
        let pts = [
            (0.069_431_844_202_973_7, 0.173_927_422_568_726_9),
            (0.330_009_478_207_571_9, 0.326_072_577_431_273_1),
            (0.669_990_521_792_428_1, 0.326_072_577_431_273_1),
            (0.930_568_155_797_026_3, 0.173_927_422_568_726_9),
        ];
        let mut m = [[0.0; 4]; 4];
        let mut f = [0.0; 4];
        for (xi, w) in pts {
            let (n, _) = hermite_basis(xi, h);
            for a in 0..4 {
                f[a] += k * y * n[a] * w * h;
                for c in 0..4 {
                    m[a][c] += k * n[a] * n[c] * w * h;
                }
            }
        }
        (m, f)
    }

    #[test]
    fn stiffness_matches_quadrature_oracle() {
        for (ei, h) in [(1.0, 1.0), (1.0, 2.0), (6.3e-3, 1e-3), (2.5, 0.3)] {
            let k = element_stiffness(ei, h).unwrap();
            let q = quadrature_stiffness(ei, h);
            let scale = ei / h.powi(3) * h.max(1.0).powi(2);
            for a in 0..4 {
                for c in 0..4 {
                    assert!((k[a][c] - q[a][c]).abs() <= 1e-12 * scale, "{a},{c}");
                    assert_eq!(k[a][c], k[c][a]);
                }
            }
        }
    }

    #[test]
    fn stiffness_examples() {
        let k = element_stiffness(1.0, 1.0).unwrap();
        assert_eq!(k[0][0], 12.0);
        assert_eq!(k[1][1], 4.0);
        assert_eq!(k[0][2], -12.0);
        assert_eq!(element_stiffness(1.0, 2.0).unwrap()[0][0], 1.5);
        assert_eq!(element_stiffness(0.0, 1.0).unwrap(), [[0.0; 4]; 4]);
        assert!(element_stiffness(1.0, 0.0).is_err());
        assert!(element_stiffness(-1.0, 1.0).is_err());
    }

    #[test]
    fn stiffness_has_two_rigid_modes() {
        let k = element_stiffness(3.0, 0.7).unwrap();
        let h = 0.7;
        // translation and rotation about node 0
        for mode in [[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, h, 1.0]] {
            for row in &k {
                let r: f64 = row.iter().zip(mode).map(|(a, b)| a * b).sum();
                assert!(r.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn foundation_matches_quadrature_oracle() {
        for (k, y, h) in [(420.0, 0.0, 1.0), (2.0, 3.0, 1.0), (6e5, 1e-4, 1e-3), (1.3, -0.2, 0.4)] {
            let (m, f) = foundation_element_matrices(k, y, h).unwrap();
            let (qm, qf) = quadrature_foundation(k, y, h);
            let scale = k * h;
            for a in 0..4 {
                assert!((f[a] - qf[a]).abs() <= 1e-12 * (scale * y.abs()).max(1e-300));
                for c in 0..4 {
                    assert!((m[a][c] - qm[a][c]).abs() <= 1e-12 * scale);
                    assert_eq!(m[a][c], m[c][a]);
                }
            }
        }
    }

    #[test]
    fn foundation_examples() {
        let (m, f) = foundation_element_matrices(0.0, 5.0, 1.0).unwrap();
        assert_eq!(m, [[0.0; 4]; 4]);
        assert_eq!(f, [0.0; 4]);
        let (m, f) = foundation_element_matrices(420.0, 0.0, 1.0).unwrap();
        assert_eq!(m[0][0], 156.0);
        assert_eq!(f, [0.0; 4]);
        let (_, f) = foundation_element_matrices(2.0, 3.0, 1.0).unwrap();
        let expected = [3.0, 0.5, 3.0, -0.5];
        for a in 0..4 {
            assert!((f[a] - expected[a]).abs() < 1e-15);
        }
        assert!(matches!(
            foundation_element_matrices(-1.0, 0.0, 1.0),
            Err(FemError::InvalidStiffness(_))
        ));
    }

    #[test]
    fn single_clamped_element_reduces_to_two_dofs() {
        let mesh = BeamMesh::new(0.0, 1.0, 1).unwrap();
        let props = BeamProperties::new(1.0, 1.0).unwrap();
        let sys = assemble(&mesh, &props, &[], &[EssentialBc::clamp(0, 0.0, 0.0)], &[]).unwrap();
        assert_eq!(sys.free_dofs(), 2);
        assert_eq!(sys.free, vec![2, 3]);
    }

    #[test]
    fn underconstrained_is_singular() {
        let mesh = BeamMesh::new(0.0, 1.0, 4).unwrap();
        let props = BeamProperties::new(1.0, 1.0).unwrap();
        let bc = EssentialBc {
            node: 0,
            deflection: Some(0.0),
            slope: None,
        };
        assert!(matches!(
            assemble(&mesh, &props, &[], &[bc], &[]),
            Err(FemError::Singular { constrained: 1 })
        ));
        // a single spring patch is enough
        let patch = FoundationPatch {
            element: 2,
            stiffness: 1.0,
            reference: 0.0,
        };
        assert!(assemble(&mesh, &props, &[patch], &[], &[]).is_ok());
    }

    #[test]
    fn duplicate_bc_rejected() {
        let mesh = BeamMesh::new(0.0, 1.0, 2).unwrap();
        let props = BeamProperties::new(1.0, 1.0).unwrap();
        let bcs = [EssentialBc::clamp(0, 0.0, 0.0), EssentialBc::clamp(0, 1.0, 0.0)];
        assert!(matches!(
            assemble(&mesh, &props, &[], &bcs, &[]),
            Err(FemError::DuplicateConstraint { dof: 0 })
        ));
    }

    #[test]
    fn cantilever_unit_load_tip_is_one_third() {
        let mesh = BeamMesh::new(0.0, 0.1, 10).unwrap();
        let props = BeamProperties::new(1.0, 1.0).unwrap();
        let load = NodalLoad {
            node: 10,
            force: 1.0,
            moment: 0.0,
        };
        let sys = assemble(&mesh, &props, &[], &[EssentialBc::clamp(0, 0.0, 0.0)], &[load]).unwrap();
        let sol = solve(&sys).unwrap();
        assert!((sol.dofs[20] - 1.0 / 3.0).abs() < 1e-12);
        assert!(sol.residual_norm <= 1e-10 * sol.rhs_norm);
    }

    #[test]
    fn evaluate_reproduces_nodes_and_range() {
        let mesh = BeamMesh::new(-1.0, 0.5, 4).unwrap();
        let dofs: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        for n in 0..5 {
            let (u, t) = evaluate(&mesh, &dofs, mesh.station(n)).unwrap();
            assert!((u - dofs[2 * n]).abs() < 1e-15);
            assert!((t - dofs[2 * n + 1]).abs() < 1e-14);
        }
        assert!(matches!(evaluate(&mesh, &dofs, 1.5), Err(FemError::OutOfRange { .. })));
        assert_eq!(evaluate(&mesh, &[0.0; 10], 0.3).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn hollow_tube_moment() {
        let p = BeamProperties::hollow_tube(80e9, 1.27e-3, 1.0e-3).unwrap();
        let expected = PI * (1.27e-3_f64.powi(4) - 1e-3_f64.powi(4)) / 64.0;
        assert_eq!(p.moment_of_area, expected);
        assert!(BeamProperties::hollow_tube(80e9, 1e-3, 1e-3).is_err());
    }
}
