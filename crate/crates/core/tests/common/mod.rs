//! Reference computations written independently of the library internals.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Point2};
use needle_sim::scenario::{insertion_script, Scenario};
use needle_sim::sim::NeedleState;
use needle_sim::trace::{run_script, SimTrace};
use needle_sim::{Bevel, Boundary, OgdenLayer, SimState, Simulator};
use rand::Rng;

pub const YOUNGS: f64 = 80e9;
pub const OUTER: f64 = 1.27e-3;
pub const INNER: f64 = 1.0e-3;
pub const LENGTH: f64 = 0.150;

pub fn flexural_rigidity() -> f64 {
    YOUNGS * PI * (OUTER.powi(4) - INNER.powi(4)) / 64.0
}

pub fn bevel(signed: f64) -> Bevel {
    Bevel::new(signed.abs(), if signed < 0.0 { -1 } else { 1 }).unwrap()
}

/// One gel layer starting at x = 0, default needle 1 mm short of it.
pub fn gel_scenario(mu: f64, alpha: f64, signed_bevel: f64) -> Scenario {
    let mut s = Scenario::from_preset("ph2").unwrap();
    s.name = "gel".into();
    s.preset = None;
    s.layers = vec![OgdenLayer::new("gel", mu, alpha, Boundary::vertical(0.0))];
    s.bevel = bevel(signed_bevel);
    s
}

/// Straight insertion of `steps` × 1 mm; returns the simulator, final state and trace.
pub fn insert(scenario: &Scenario, steps: usize) -> (Simulator, SimState, SimTrace) {
    let sim = scenario.simulator().unwrap();
    let mut state = scenario.initial_state(&sim);
    let trace = run_script(&sim, &mut state, &insertion_script(1e-3, steps)).unwrap();
    (sim, state, trace)
}

pub fn frame_c_dofs(state: &SimState) -> Vec<f64> {
    match &state.needle {
        NeedleState::Inserted { dofs, .. } => dofs.clone(),
        NeedleState::Free { .. } => panic!("needle not inserted"),
    }
}

// ---------------------------------------------------------------- beam

/// Cantilever under uniform load `q`: `q x² (6L² − 4Lx + x²) / 24EI`.
pub fn cantilever_uniform(q: f64, ei: f64, l: f64, x: f64) -> f64 {
    q * x * x * (6.0 * l * l - 4.0 * l * x + x * x) / (24.0 * ei)
}

/// Free end of a semi-infinite beam on springs `k`, end force `p`.
pub fn winkler_end_load(p: f64, k: f64, ei: f64, x: f64) -> f64 {
    let beta = (k / (4.0 * ei)).powf(0.25);
    2.0 * p * beta / k * (-beta * x).exp() * (beta * x).cos()
}

// ---------------------------------------------------------------- metrics

fn arc_point(curve: &[Point2<f64>], fraction: f64) -> Point2<f64> {
    let total: f64 = curve.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let target = fraction * total;
    let mut walked = 0.0;
    for w in curve.windows(2) {
        let len = (w[1] - w[0]).norm();
        if len > 0.0 && walked + len >= target {
            let t = ((target - walked) / len).clamp(0.0, 1.0);
            return w[0] + (w[1] - w[0]) * t;
        }
        walked += len;
    }
    *curve.last().unwrap()
}

/// Tip error, in-plane errors and EDP by walking both curves from scratch
/// for every sample.
pub fn brute_metrics(sim: &[Point2<f64>], truth: &[Point2<f64>], k: usize) -> (f64, Vec<f64>, Option<f64>) {
    let mut ipe = Vec::with_capacity(k);
    for j in 0..k {
        let (a, b) = if j == 0 {
            (sim[0], truth[0])
        } else if j == k - 1 {
            (*sim.last().unwrap(), *truth.last().unwrap())
        } else {
            let f = j as f64 / (k - 1) as f64;
            (arc_point(sim, f), arc_point(truth, f))
        };
        ipe.push(((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt());
    }
    let te = *ipe.last().unwrap();
    let defl = (truth.last().unwrap().y - truth[0].y).abs();
    let edp = if defl > 0.0 { Some(te / defl * 100.0) } else { None };
    (te, ipe, edp)
}

/// Needle-like random curve: monotone in x, small wiggle in y.
pub fn random_curve(rng: &mut impl Rng, n: usize) -> Vec<Point2<f64>> {
    let mut x = 0.0;
    let bend = rng.random_range(-0.1..0.1);
    (0..n)
        .map(|i| {
            let p = Point2::new(x, bend * x * x + rng.random_range(-2e-4..2e-4) * (i > 0) as u8 as f64);
            x += rng.random_range(2e-4..3e-3);
            p
        })
        .collect()
}

// ---------------------------------------------------------------- bookkeeping

/// Expected constraint stations for a straight insertion replayed with
/// plain arithmetic. The tip starts `gap` short of the entry boundary at x = 0.
pub struct Replay {
    pub spacing: f64,
    /// Tip coordinate along the insertion axis; depth once inserted.
    pub tip: f64,
    pub inserted: bool,
}

impl Replay {
    pub fn new(gap: f64, spacing: f64) -> Self {
        Self {
            spacing,
            tip: -gap,
            inserted: gap <= 0.0,
        }
    }

    pub fn advance(&mut self, delta: f64) {
        let tol = 1e-9 * self.spacing;
        self.tip += delta;
        if self.inserted {
            if self.tip < -tol {
                self.inserted = false;
            }
        } else if delta > 0.0 && self.tip >= 0.0 {
            self.inserted = true;
        }
    }

    pub fn stations(&self) -> Vec<f64> {
        if !self.inserted {
            return Vec::new();
        }
        let tol = 1e-9 * self.spacing;
        let mut out = Vec::new();
        let mut k = 0u32;
        while f64::from(k) * self.spacing <= self.tip + tol {
            out.push(f64::from(k) * self.spacing);
            k += 1;
        }
        out
    }
}

// ---------------------------------------------------------------- equilibrium

/// Nonlinear foundation problem solved by Newton's method on a dense
/// finite-difference Jacobian.
pub struct NewtonProblem {
    pub h: f64,
    pub origin: f64,
    pub nodes: usize,
    pub ei: f64,
    pub mu: f64,
    pub alpha: f64,
    pub thickness: f64,
    /// (station, ordinate) of each constraint, ascending.
    pub constraints: Vec<(f64, f64)>,
    /// Prescribed (dof, value).
    pub fixed: Vec<(usize, f64)>,
}

impl NewtonProblem {
    fn spring(&self, u_rel: f64) -> f64 {
        let lambda = ((self.thickness - u_rel.abs()) / self.thickness).max(0.05);
        2.0 * self.mu * (lambda.powf(self.alpha - 1.0) + 0.5 * lambda.powf(-self.alpha / 2.0 - 1.0))
    }

    fn reference(&self, mid: f64) -> Option<f64> {
        if mid < -1e-9 * self.h || self.constraints.is_empty() {
            return None;
        }
        let mut best = 0;
        for (i, c) in self.constraints.iter().enumerate() {
            if (c.0 - mid).abs() <= (self.constraints[best].0 - mid).abs() + 1e-9 * self.h {
                best = i;
            }
        }
        Some(self.constraints[best].1)
    }

    /// Out-of-balance force vector over all DOFs.
    pub fn residual(&self, d: &DVector<f64>) -> DVector<f64> {
        let h = self.h;
        let c = self.ei / h.powi(3);
        let kb = DMatrix::from_row_slice(
            4,
            4,
            &[
                12.0,
                6.0 * h,
                -12.0,
                6.0 * h,
                6.0 * h,
                4.0 * h * h,
                -6.0 * h,
                2.0 * h * h,
                -12.0,
                -6.0 * h,
                12.0,
                -6.0 * h,
                6.0 * h,
                2.0 * h * h,
                -6.0 * h,
                4.0 * h * h,
            ],
        ) * c;
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                156.0,
                22.0 * h,
                54.0,
                -13.0 * h,
                22.0 * h,
                4.0 * h * h,
                13.0 * h,
                -3.0 * h * h,
                54.0,
                13.0 * h,
                156.0,
                -22.0 * h,
                -13.0 * h,
                -3.0 * h * h,
                -22.0 * h,
                4.0 * h * h,
            ],
        ) * (h / 420.0);
        let load = DVector::from_row_slice(&[h / 2.0, h * h / 12.0, h / 2.0, -h * h / 12.0]);

        let mut r = DVector::zeros(2 * self.nodes);
        for e in 0..self.nodes - 1 {
            let de = d.rows(2 * e, 4).into_owned();
            let mut fe = &kb * &de;
            let mid = self.origin + (e as f64 + 0.5) * h;
            if let Some(y) = self.reference(mid) {
                let u_mid = 0.5 * (de[0] + de[2]) + h * (de[1] - de[3]) / 8.0;
                let k = self.spring(u_mid - y);
                fe += (&m * &de - &load * y) * k;
            }
            let mut slot = r.rows_mut(2 * e, 4);
            slot += fe;
        }
        r
    }

    pub fn solve(&self, start: &[f64]) -> Vec<f64> {
        let n = 2 * self.nodes;
        let mut d = DVector::from_column_slice(start);
        let fixed: Vec<usize> = self.fixed.iter().map(|f| f.0).collect();
        for &(i, v) in &self.fixed {
            d[i] = v;
        }
        let free: Vec<usize> = (0..n).filter(|i| !fixed.contains(i)).collect();
        for _ in 0..50 {
            let r0 = self.residual(&d);
            let mut jac = DMatrix::zeros(free.len(), free.len());
            for (cj, &j) in free.iter().enumerate() {
                let step = 1e-7 * d[j].abs().max(1e-6);
                let mut dp = d.clone();
                dp[j] += step;
                let mut dm = d.clone();
                dm[j] -= step;
                let col = (self.residual(&dp) - self.residual(&dm)) / (2.0 * step);
                for (ci, &i) in free.iter().enumerate() {
                    jac[(ci, cj)] = col[i];
                }
            }
            let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -r0[i]));
            let dx = jac.lu().solve(&rhs).expect("jacobian invertible");
            for (ci, &i) in free.iter().enumerate() {
                d[i] += dx[ci];
            }
            if dx.amax() < 1e-16 {
                break;
            }
        }
        d.iter().copied().collect()
    }
}

/// One randomized insert/retract script checked step by step against
/// [`Replay`]. Returns the number of steps compared.
pub fn bookkeeping_case(seed: u64) -> Result<usize, String> {
    use needle_sim::ControlInput;
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / 1024.0;
    let spacing = [h, 2.0 * h, 0.5 * h][rng.random_range(0..3)];
    let second_layer = 7.5 * h;
    let signed_bevel = [0.0, 0.05e-3, -0.05e-3][rng.random_range(0..3)];
    let gap = f64::from(rng.random_range(1..9u8)) * h / 4.0;

    let mut s = gel_scenario(2e5, 1.0, signed_bevel);
    s.layers.push(needle_sim::OgdenLayer::new(
        "deep",
        3.3e7,
        -1.0,
        needle_sim::Boundary::vertical(second_layer),
    ));
    s.needle.length = 40.0 * h;
    s.needle.element_size = h;
    s.solver.constraint_spacing = Some(spacing);
    s.pose = needle_sim::Pose2::new(-40.0 * h - gap, 0.0, 0.0);
    let sim = s.simulator().map_err(|e| e.to_string())?;
    let mut state = s.initial_state(&sim);
    let mut replay = Replay::new(gap, spacing);

    let steps = 40;
    for i in 0..steps {
        let inputs = if rng.random_range(0..10) == 0 {
            Vec::new()
        } else {
            let quarters = rng.random_range(-10..=14i32);
            vec![ControlInput::advance(f64::from(quarters) * h / 4.0)]
        };
        sim.step(&mut state, &inputs).map_err(|e| format!("seed {seed} step {i}: {e}"))?;
        if let Some(ControlInput::H { advance }) = inputs.first() {
            replay.advance(*advance);
        }

        // a tip resting exactly on the entry line may land either side of it
        if replay.tip.abs() < 1e-12 {
            continue;
        }
        let fail = |what: String| Err(format!("seed {seed} step {i}: {what}"));
        if state.is_inserted() != replay.inserted {
            return fail(format!("inserted {} vs oracle {}", state.is_inserted(), replay.inserted));
        }
        if replay.inserted && (state.depth() - replay.tip).abs() > 1e-12 {
            return fail(format!("depth {} vs oracle {}", state.depth(), replay.tip));
        }
        let expected = replay.stations();
        let got: Vec<f64> = state.constraints.iter().map(|c| c.station).collect();
        if got != expected {
            return fail(format!("stations {got:?} vs oracle {expected:?}"));
        }
        for c in &state.constraints {
            let layer = usize::from(c.station >= second_layer);
            if c.layer != layer || c.creation_depth != c.station {
                return fail(format!("constraint {c:?}, expected layer {layer}"));
            }
            if signed_bevel == 0.0 && c.ordinate != 0.0 {
                return fail(format!("ordinate {} without bevel", c.ordinate));
            }
        }
    }
    Ok(steps)
}
