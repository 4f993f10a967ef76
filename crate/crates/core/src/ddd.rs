//! Discrete dislocation dynamics `ẋ = 𝓜[-∇𝓔(x)]` and the rate functional.

use serde::{Deserialize, Serialize};

use crate::complex::Polygon;
use crate::error::{Error, Result};
use crate::force::ForceModel;
use crate::geom::Vec2;
use crate::ldp::{core_lagrangian, margin, mobility_core, LdpParams, MacroState, Stars, BOUNDARY_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeStatus {
    Horizon,
    BoundaryStop,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DddOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
}

impl Default for DddOptions {
    fn default() -> Self {
        DddOptions { rtol: 1e-8, atol: 1e-10, h_max: 0.05, h_min: 1e-12 }
    }
}

/// Accepted steps of an integration with their velocities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Vec2>>,
    pub velocities: Vec<Vec<Vec2>>,
    pub signs: Vec<i8>,
    pub horizon: f64,
    pub status: OdeStatus,
    /// Time at which `∂Pos^ε_∞` was reached, if it was.
    pub stop_time: Option<f64>,
}

impl OdeTrajectory {
    /// State at time `t` by cubic Hermite interpolation; held after the end.
    pub fn at(&self, t: f64) -> Vec<Vec2> {
        let last = self.times.len() - 1;
        if t >= self.times[last] {
            return self.states[last].clone();
        }
        if t <= self.times[0] {
            return self.states[0].clone();
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        (0..self.states[k].len())
            .map(|i| {
                self.states[k][i] * h00 + self.velocities[k][i] * (h10 * h) + self.states[k + 1][i] * h01 + self.velocities[k + 1][i] * (h11 * h)
            })
            .collect()
    }

    pub fn final_state(&self) -> &[Vec2] {
        self.states.last().expect("nonempty trajectory")
    }

    /// Samples at the given times as rows `(t, x1, y1, x2, y2, ...)`.
    pub fn sample(&self, grid: &[f64]) -> Vec<Vec<f64>> {
        grid.iter().map(|&t| std::iter::once(t).chain(self.at(t).iter().flat_map(|p| [p.x, p.y])).collect()).collect()
    }
}

/// Right-hand side `ẋ_i = 𝓜[-∂_i𝓔(x)]`.
pub fn velocity(stars: &Stars, params: LdpParams, force: &dyn ForceModel, x: &[Vec2], signs: &[i8]) -> Result<Vec<Vec2>> {
    let f = force.forces(x, signs)?;
    Ok(f.iter().map(|&g| mobility_core(stars, params, g * -1.0)).collect())
}

fn axpy(x: &[Vec2], h: f64, terms: &[(f64, &[Vec2])]) -> Vec<Vec2> {
    x.iter()
        .enumerate()
        .map(|(i, &p)| terms.iter().fold(p, |acc, (c, k)| acc + k[i] * (h * c)))
        .collect()
}





const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates the DDD equation to time `t_end` with Dormand-Prince 5(4),
/// stopping and holding when the state reaches `∂Pos^ε_∞`.
pub fn ddd_integrate(
    x0: &MacroState,
    t_end: f64,
    domain: &Polygon,
    params: LdpParams,
    force: &dyn ForceModel,
    opts: &DddOptions,
) -> Result<OdeTrajectory> {
    if x0.margin(domain) <= 0.0 {
        return Err(Error::InadmissibleState("initial state not interior".into()));
    }
    let stars = Stars::of(force.kind());
    let signs = x0.signs.clone();
    let eps = x0.epsilon;
    let rhs = |x: &[Vec2]| velocity(&stars, params, force, x, &signs);
    let mut t = 0.0;
    let mut x = x0.x.clone();
    let mut k1 = rhs(&x)?;
    let mut traj = OdeTrajectory {
        times: vec![0.0],
        states: vec![x.clone()],
        velocities: vec![k1.clone()],
        signs: signs.clone(),
        horizon: t_end,
        status: OdeStatus::Horizon,
        stop_time: None,
    };
    let mut h = opts.h_max.min(t_end).max(opts.h_min);
    while t < t_end {
        h = h.min(t_end - t);
        if h < opts.h_min && t_end - t > opts.h_min {
            return Err(Error::StepUnderflow(t));
        }
        let x2 = axpy(&x, h, &[(A21, &k1)]);
        let step = (|| -> Result<_> {
            let k2 = rhs(&x2)?;
            let k3 = rhs(&axpy(&x, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = rhs(&axpy(&x, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = rhs(&axpy(&x, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let k6 = rhs(&axpy(&x, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
            let xn = axpy(&x, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = rhs(&xn)?;
            let err = axpy(&vec![Vec2::ZERO; x.len()], h, &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
            Ok((xn, k7, err))
        })();
        let (xn, k7, err) = match step {
            Ok(v) => v,
            Err(Error::InadmissibleState(_)) | Err(Error::InvalidInput(_)) | Err(Error::ExtrapolationUnstable(..)) if h > opts.h_min => {
                // a stage left the domain; shrink the step
                h *= 0.25;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut en = 0.0f64;
        for (i, e) in err.iter().enumerate() {
            let sx = opts.atol + opts.rtol * x[i].x.abs().max(xn[i].x.abs());
            let sy = opts.atol + opts.rtol * x[i].y.abs().max(xn[i].y.abs());
            en = en.max((e.x / sx).abs()).max((e.y / sy).abs());
        }
        if !en.is_finite() || en > 1.0 {
            h *= (0.9 * en.powf(-0.2)).clamp(0.1, 0.5);
            if !en.is_finite() {
                h *= 0.1;
            }
            continue;
        }
        let mg = margin(&xn, domain, eps);
        if mg <= 0.0 {
            // locate the crossing on the Hermite interpolant and stop there
            let (mut lo, mut hi) = (0.0, 1.0);
            let interp = |s: f64| -> Vec<Vec2> {
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                (0..x.len()).map(|i| x[i] * h00 + k1[i] * (h10 * h) + xn[i] * h01 + k7[i] * (h11 * h)).collect()
            };
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if margin(&interp(mid), domain, eps) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let ts = t + hi * h;
            let xs = interp(hi);
            traj.times.push(ts);
            traj.states.push(xs.clone());
            traj.velocities.push(vec![Vec2::ZERO; x.len()]);
            if ts < t_end {
                traj.times.push(t_end);
                traj.states.push(xs);
                traj.velocities.push(vec![Vec2::ZERO; x.len()]);
            }
            traj.status = OdeStatus::BoundaryStop;
            traj.stop_time = Some(ts);
            return Ok(traj);
        }
        t += h;
        x = xn;
        k1 = k7;
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.velocities.push(k1.clone());
        let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).min(opts.h_max);
    }
    Ok(traj)
}

/// A piecewise-linear path `t ↦ x(t)` given by nodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Vec2>>,
}

impl PolyPath {
    pub fn from_ode(traj: &OdeTrajectory, grid: &[f64]) -> Self {
        PolyPath { times: grid.to_vec(), states: grid.iter().map(|&t| traj.at(t)).collect() }
    }

    pub fn reversed(&self) -> Self {
        let t_end = *self.times.last().unwrap_or(&0.0);
        let t0 = self.times[0];
        PolyPath {
            times: self.times.iter().rev().map(|&t| t0 + t_end - t).collect(),
            states: self.states.iter().rev().cloned().collect(),
        }
    }
}

/// `𝓙 = ∫ 𝓛(x, ẋ) dt` by two-point Gauss quadrature on each segment of a
/// piecewise-linear path; `+∞` when the path leaves `Pos^ε_∞`.
pub fn rate_functional(
    path: &PolyPath,
    signs: &[i8],
    epsilon: f64,
    domain: &Polygon,
    params: LdpParams,
    force: &dyn ForceModel,
) -> Result<f64> {
    let stars = Stars::of(force.kind());
    let g = 0.5 / 3f64.sqrt();
    let mut total = 0.0;
    for k in 0..path.times.len().saturating_sub(1) {
        let dt = path.times[k + 1] - path.times[k];
        if dt <= 0.0 {
            continue;
        }
        let (xa, xb) = (&path.states[k], &path.states[k + 1]);
        let v: Vec<Vec2> = xa.iter().zip(xb).map(|(&a, &b)| (b - a) / dt).collect();
        let still = v.iter().all(|w| w.norm() < 1e-14);
        for s in [0.5 - g, 0.5 + g] {
            let x: Vec<Vec2> = xa.iter().zip(xb).map(|(&a, &b)| a + (b - a) * s).collect();
            let m = margin(&x, domain, epsilon);
            if m < -BOUNDARY_TOL {
                return Ok(f64::INFINITY);
            }
            if still && margin(xa, domain, epsilon) <= BOUNDARY_TOL {
                continue;
            }
            if m <= BOUNDARY_TOL {
                return Ok(f64::INFINITY);
            }
            let f = force.forces(&x, signs)?;
            for (&vi, &gi) in v.iter().zip(&f) {
                total += 0.5 * dt * core_lagrangian(&stars, params, gi, vi)?;
            }
        }
    }
    Ok(total)
}

/// Convenience: the macro state of an ODE trajectory at its end.
pub fn final_macro_state(traj: &OdeTrajectory, epsilon: f64) -> MacroState {
    MacroState { x: traj.final_state().to_vec(), signs: traj.signs.clone(), epsilon }
}
