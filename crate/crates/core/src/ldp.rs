//! Limiting Hamiltonians, Lagrangians and mobilities of the rescaled hopping
//! process, and the triangular-lattice corrector.
//!
//! Everything here is per dislocation: the Hamiltonian of a configuration is
//! the sum of single-core terms `h(g_i, p_i)` where `g_i = ∂_i𝓔(x)` and `p_i`
//! is the conjugate momentum. The hop stars are the dual hop vectors of the
//! lattice in lattice units, so the limits match the jump process exactly.

use serde::{Deserialize, Serialize};

use crate::complex::Polygon;
use crate::error::{Error, Result};
use crate::geom::{Sym2, Vec2};
use crate::lattice::{build_lattice, LatticeKind};

/// Dimensionless rate groups: `A = 𝒯_n𝒜₀e^{-βλc₀}/n`, `B = βλ/2n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdpParams {
    pub a: f64,
    pub b: f64,
}

impl LdpParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidInput(format!("A and B must be positive, got A={a}, B={b}")));
        }
        Ok(LdpParams { a, b })
    }

    /// The groups implied by physical parameters at scale `n`.
    pub fn from_physical(n: u32, lambda: f64, beta: f64, a0: f64, t_n: f64, c0: f64) -> Result<Self> {
        let n = n as f64;
        Self::new(t_n * a0 * (-beta * lambda * c0).exp() / n, beta * lambda / (2.0 * n))
    }
}

/// Macroscopic configuration in `𝒟^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroState {
    pub x: Vec<Vec2>,
    pub signs: Vec<i8>,
    pub epsilon: f64,
}

impl MacroState {
    pub fn new(x: Vec<Vec2>, signs: Vec<i8>, epsilon: f64) -> Result<Self> {
        if x.len() != signs.len() {
            return Err(Error::InvalidInput("positions and signs differ in length".into()));
        }
        Ok(MacroState { x, signs, epsilon })
    }

    /// `min(dist(x_i, ∂𝒟), |x_i - x_j|) - ε`; nonnegative on `Pos^ε_∞`.
    pub fn margin(&self, domain: &Polygon) -> f64 {
        margin(&self.x, domain, self.epsilon)
    }
}

pub(crate) fn margin(x: &[Vec2], domain: &Polygon, eps: f64) -> f64 {
    let mut m = f64::INFINITY;
    for (i, &p) in x.iter().enumerate() {
        m = m.min(domain.inner_distance(p));
        for q in &x[..i] {
            m = m.min(p.dist(*q));
        }
    }
    m - eps
}

/// Tolerance for deciding that a state sits on `∂Pos^ε_∞`.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Hop stars used by the limit: one star per dual sublattice.
#[derive(Clone, Debug)]
pub struct Stars {
    pub kind: LatticeKind,
    /// Dual hop vectors of every sublattice.
    pub hops: Vec<Vec<Vec2>>,
    /// Primal neighbour directions (used by the triangular Ψ).
    pub primal: Vec<Vec2>,
}

impl Stars {
    pub fn of(kind: LatticeKind) -> Self {
        let spec = build_lattice(kind);
        Stars { kind, hops: spec.dual_neighbor_dirs.clone(), primal: spec.neighbor_dirs[0].clone() }
    }
}

/// Value, gradient and Hessian of a function of one 2-vector.
pub type Jet = (f64, Vec2, Sym2);

/// `Ψ(ξ) = (A/B) Σ_s cosh(Bξ·s)` over the single hop star (Sq, Hx).
pub fn psi_star(stars: &Stars, p: LdpParams, xi: Vec2) -> Jet {
    let mut v = 0.0;
    let mut g = Vec2::ZERO;
    let mut h = Sym2::default();
    for &s in &stars.hops[0] {
        let w = p.b * xi.dot(s);
        v += p.a / p.b * w.cosh();
        g += s * (p.a * w.sinh());
        h = h.add(Sym2::outer(s).scale(p.a * p.b * w.cosh()));
    }
    (v, g, h)
}

/// `Ψ^Tr(ξ) = A² Σ₆ cosh(Bξ·a_j)`.
pub fn psi_tr(stars: &Stars, p: LdpParams, xi: Vec2) -> f64 {
    stars.primal.iter().map(|&a| p.a * p.a * (p.b * xi.dot(a)).cosh()).sum()
}

/// `Υ(ξ) = A Σ₃ cosh(Bξ·a*_j)`.
pub fn upsilon(stars: &Stars, p: LdpParams, xi: Vec2) -> f64 {
    stars.hops[0].iter().map(|&a| p.a * (p.b * xi.dot(a)).cosh()).sum()
}

/// Single-core Hamiltonian `h(g, p)` with gradient and Hessian in `p`.
pub fn core_hamiltonian(stars: &Stars, prm: LdpParams, g: Vec2, p: Vec2) -> Jet {
    let w = p - g * prm.b;
    match stars.kind {
        LatticeKind::Tr => {
            let ups = upsilon(stars, prm, g);
            let mut s = ups * ups - psi_tr(stars, prm, g * -1.0);
            let mut ds = Vec2::ZERO;
            let mut dds = Sym2::default();
            let a2 = prm.a * prm.a;
            for &a in &stars.primal {
                let z = w.dot(a);
                s += a2 * z.cosh();
                ds += a * (a2 * z.sinh());
                dds = dds.add(Sym2::outer(a).scale(a2 * z.cosh()));
            }
            let r = s.max(0.0).sqrt();
            let grad = ds / (2.0 * r);
            let hess = dds.scale(0.5 / r).add(Sym2::outer(ds).scale(-0.25 / (r * r * r)));
            (r - ups, grad, hess)
        }
        _ => {
            let mut v = 0.0;
            let mut grad = Vec2::ZERO;
            let mut hess = Sym2::default();
            for &s in &stars.hops[0] {
                let z = w.dot(s);
                v += prm.a * (z.cosh() - (prm.b * g.dot(s)).cosh());
                grad += s * (prm.a * z.sinh());
                hess = hess.add(Sym2::outer(s).scale(prm.a * z.cosh()));
            }
            (v, grad, hess)
        }
    }
}

/// `𝓗(x, p) = Σ_i h(∂_i𝓔, p_i)`; zero on `∂Pos^ε_∞`.
pub fn hamiltonian(state: &MacroState, domain: &Polygon, p: &[Vec2], kind: LatticeKind, params: LdpParams, force: &[Vec2]) -> Result<f64> {
    let m = state.margin(domain);
    if m < -BOUNDARY_TOL {
        return Err(Error::InadmissibleState(format!("margin {m:.3e}")));
    }
    if m <= BOUNDARY_TOL {
        return Ok(0.0);
    }
    let stars = Stars::of(kind);
    Ok(p.iter().zip(force).map(|(&pi, &gi)| core_hamiltonian(&stars, params, gi, pi).0).sum())
}

/// Mobility `𝓜_{A,B}[ξ]` of one core, in closed form.
pub fn mobility_core(stars: &Stars, p: LdpParams, xi: Vec2) -> Vec2 {
    match stars.kind {
        LatticeKind::Tr => {
            let num = stars.primal.iter().fold(Vec2::ZERO, |acc, &a| acc + a * (p.a * (p.b * xi.dot(a)).sinh()));
            let den: f64 = stars.hops[0].iter().map(|&s| 2.0 * (p.b * xi.dot(s)).cosh()).sum();
            num / den
        }
        _ => stars.hops[0].iter().fold(Vec2::ZERO, |acc, &s| acc + s * (p.a * (p.b * xi.dot(s)).sinh())),
    }
}

pub fn mobility(xi: &[Vec2], kind: LatticeKind, params: LdpParams) -> Vec<Vec2> {
    let stars = Stars::of(kind);
    xi.iter().map(|&v| mobility_core(&stars, params, v)).collect()
}

/// Maximises `⟨y, x⟩ - f(x)` by damped Newton from `x0`. Returns the
/// conjugate value, the maximiser and `∇²f` there.
pub fn conjugate(f: impl Fn(Vec2) -> Jet, y: Vec2, x0: Vec2) -> Result<Jet> {
    let mut x = x0;
    let (mut fx, mut gx, mut hx) = f(x);
    for _ in 0..200 {
        let r = y - gx;
        if r.norm() <= 1e-13 * (1.0 + y.norm()) {
            return Ok((y.dot(x) - fx, x, hx));
        }
        let step = hx.solve(r).filter(|s| s.x.is_finite() && s.y.is_finite()).unwrap_or(r);
        let obj = y.dot(x) - fx;
        let mut t = 1.0;
        loop {
            let xn = x + step * t;
            let (fn_, gn, hn) = f(xn);
            if fn_.is_finite() && y.dot(xn) - fn_ >= obj - 1e-14 * (1.0 + obj.abs()) {
                x = xn;
                fx = fn_;
                gx = gn;
                hx = hn;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::NewtonDivergence(format!("line search stalled at residual {:.3e}", r.norm())));
            }
        }
    }
    let r = (y - gx).norm();
    if r <= 1e-9 * (1.0 + y.norm()) {
        return Ok((y.dot(x) - fx, x, hx));
    }
    Err(Error::NewtonDivergence(format!("no convergence, residual {r:.3e}")))
}

/// Single-core Lagrangian `sup_p ⟨ξ,p⟩ - h(g, p)` by Newton.
pub fn core_lagrangian(stars: &Stars, params: LdpParams, g: Vec2, xi: Vec2) -> Result<f64> {
    Ok(conjugate(|p| core_hamiltonian(stars, params, g, p), xi, Vec2::ZERO)?.0)
}

/// `Φ = Ψ*` with its gradient and Hessian: closed form on Sq, Newton on Hx.
pub fn phi(stars: &Stars, p: LdpParams, xi: Vec2) -> Result<Jet> {
    match stars.kind {
        LatticeKind::Sq => {
            let one = |s: f64| {
                let c = 2.0 * p.a;
                let v = (s * (s / c).asinh() - (c * c + s * s).sqrt()) / p.b;
                let d = (s / c).asinh() / p.b;
                let dd = 1.0 / (p.b * (c * c + s * s).sqrt());
                (v, d, dd)
            };
            let (vx, dx, ddx) = one(xi.x);
            let (vy, dy, ddy) = one(xi.y);
            Ok((vx + vy, Vec2::new(dx, dy), Sym2 { xx: ddx, xy: 0.0, yy: ddy }))
        }
        LatticeKind::Hx => {
            let (v, q, h) = conjugate(|q| psi_star(stars, p, q), xi, Vec2::ZERO)?;
            let hi = h.inverse().ok_or_else(|| Error::NewtonDivergence("singular Hessian of Ψ".into()))?;
            Ok((v, q, hi))
        }
        LatticeKind::Tr => Err(Error::InvalidInput("Φ is defined for the single-star lattices".into())),
    }
}

/// `B[Φ(ξ) + Ψ(-g) + ⟨g, ξ⟩]`, the closed-form Lagrangian on Sq and Hx.
pub fn core_lagrangian_closed(stars: &Stars, params: LdpParams, g: Vec2, xi: Vec2) -> Result<f64> {
    let ph = phi(stars, params, xi)?.0;
    Ok(params.b * (ph + psi_star(stars, params, g * -1.0).0 + g.dot(xi)))
}

/// `𝓛(x, ξ)`: `+∞` off `Pos^ε_∞` and for nonzero velocity on its boundary.
pub fn lagrangian(state: &MacroState, domain: &Polygon, xi: &[Vec2], kind: LatticeKind, params: LdpParams, force: &[Vec2]) -> Result<f64> {
    let m = state.margin(domain);
    if m < -BOUNDARY_TOL {
        return Ok(f64::INFINITY);
    }
    if m <= BOUNDARY_TOL {
        return Ok(if xi.iter().all(|v| v.norm() == 0.0) { 0.0 } else { f64::INFINITY });
    }
    let stars = Stars::of(kind);
    let mut total = 0.0;
    for (&v, &g) in xi.iter().zip(force) {
        total += core_lagrangian(&stars, params, g, v)?;
    }
    Ok(total)
}

/// Corrector data of the triangular lattice for one core.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrCorrector {
    /// Correction on up faces (hops `+a*_j`).
    pub h_plus: f64,
    /// Correction on down faces (hops `-a*_j`).
    pub h_minus: f64,
    /// Homogenised value, equal to `h(g, p)`.
    pub g: f64,
    pub gamma: [f64; 2],
    pub delta: [f64; 2],
}

/// Solves the two-sublattice corrector problem at force `g` and `p = ∇f`.
///
/// The corrected test function is `f + n⁻¹h^±` on up/down faces; both
/// sublattice generators then agree with `g`.
pub fn tr_corrector(stars: &Stars, params: LdpParams, g: Vec2, p: Vec2) -> TrCorrector {
    let w = p - g * params.b;
    let (mut gp, mut gm, mut dp, mut dm) = (0.0, 0.0, 0.0, 0.0);
    for &a in &stars.hops[0] {
        gp += (-params.b * g.dot(a)).exp();
        gm += (params.b * g.dot(a)).exp();
        dp += w.dot(a).exp();
        dm += (-w.dot(a)).exp();
    }
    let diff = gp - gm;
    let z = (diff + (diff * diff + 4.0 * dp * dm).sqrt()) / (2.0 * dp);
    let l = z.ln();
    TrCorrector { h_plus: -0.5 * l, h_minus: 0.5 * l, g: params.a * (dp * z - gp), gamma: [gp, gm], delta: [dp, dm] }
}

/// Linear-response slope `c` with `𝓜_{A,B}[ξ] → cωξ` as `B → 0`, `AB = ω`,
/// computed from the hop stars.
pub fn series_slope(kind: LatticeKind) -> f64 {
    let stars = Stars::of(kind);
    match kind {
        LatticeKind::Tr => {
            let s: f64 = stars.primal.iter().map(|a| a.norm2()).sum();
            0.5 * s / (2.0 * stars.hops[0].len() as f64)
        }
        _ => 0.5 * stars.hops[0].iter().map(|s| s.norm2()).sum::<f64>(),
    }
}

/// Slope `½𝒱*` stated for the quadratic limit.
pub fn stated_slope(kind: LatticeKind) -> f64 {
    match kind {
        LatticeKind::Sq => 2.0,
        LatticeKind::Hx => 3.0,
        LatticeKind::Tr => 0.5,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadraticLimitRow {
    pub b: f64,
    pub a: f64,
    pub gap_stated: f64,
    pub gap_series: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadraticLimitReport {
    pub kind: LatticeKind,
    pub omega: f64,
    pub stated_slope: f64,
    pub series_slope: f64,
    pub rows: Vec<QuadraticLimitRow>,
}

impl QuadraticLimitReport {
    /// Smallest ratio of successive gaps.
    pub fn min_ratio(&self, stated: bool) -> f64 {
        self.rows
            .windows(2)
            .map(|w| if stated { w[0].gap_stated / w[1].gap_stated } else { w[0].gap_series / w[1].gap_series })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sup-gaps of `𝓜_{A,B}` to the linear limits on `|ξ| ≤ radius` along `AB = ω`.
pub fn quadratic_limit_check(kind: LatticeKind, omega: f64, bs: &[f64], radius: f64, grid: usize) -> Result<QuadraticLimitReport> {
    let stars = Stars::of(kind);
    let (cs, cl) = (stated_slope(kind), series_slope(kind));
    let mut rows = Vec::new();
    for &b in bs {
        let params = LdpParams::new(omega / b, b)?;
        let (mut gs, mut gl) = (0.0f64, 0.0f64);
        for i in 0..=grid {
            for j in 0..=grid {
                let xi = Vec2::new(
                    radius * (2.0 * i as f64 / grid as f64 - 1.0),
                    radius * (2.0 * j as f64 / grid as f64 - 1.0),
                );
                if xi.norm() > radius {
                    continue;
                }
                let m = mobility_core(&stars, params, xi);
                gs = gs.max((m - xi * (cs * omega)).norm());
                gl = gl.max((m - xi * (cl * omega)).norm());
            }
        }
        rows.push(QuadraticLimitRow { b, a: params.a, gap_stated: gs, gap_series: gl });
    }
    Ok(QuadraticLimitReport { kind, omega, stated_slope: cs, series_slope: cl, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prm() -> LdpParams {
        LdpParams::new(1.3, 0.7).unwrap()
    }

    #[test]
    fn hamiltonian_vanishes_at_zero_momentum() {
        for k in LatticeKind::ALL {
            let s = Stars::of(k);
            let h = core_hamiltonian(&s, prm(), Vec2::new(0.4, -0.9), Vec2::ZERO).0;
            assert!(h.abs() < 1e-12, "{k}: {h}");
        }
    }

    #[test]
    fn sq_mobility_example() {
        let s = Stars::of(LatticeKind::Sq);
        let m = mobility_core(&s, LdpParams::new(1.0, 1.0).unwrap(), Vec2::new(1.0, 0.0));
        assert!((m.x - 2.0 * 1f64.sinh()).abs() < 1e-14 && m.y.abs() < 1e-14);
        assert!((m.x - 2.350_402_387_287_603).abs() < 1e-12);
    }

    #[test]
    fn mobility_is_momentum_gradient_at_zero() {
        for k in LatticeKind::ALL {
            let s = Stars::of(k);
            let g = Vec2::new(0.3, 0.8);
            let m = mobility_core(&s, prm(), g * -1.0);
            let d = core_hamiltonian(&s, prm(), g, Vec2::ZERO).1;
            assert!((m - d).norm() < 1e-12, "{k}: {m:?} vs {d:?}");
        }
    }

    #[test]
    fn sq_phi_matches_newton() {
        let s = Stars::of(LatticeKind::Sq);
        for xi in [Vec2::new(0.0, 0.0), Vec2::new(1.5, -0.3), Vec2::new(-4.0, 2.5)] {
            let c = phi(&s, prm(), xi).unwrap().0;
            let n = conjugate(|q| psi_star(&s, prm(), q), xi, Vec2::ZERO).unwrap().0;
            assert!((c - n).abs() < 1e-11, "{c} {n}");
        }
    }

    #[test]
    fn corrector_symmetric_point() {
        let s = Stars::of(LatticeKind::Tr);
        let c = tr_corrector(&s, prm(), Vec2::ZERO, Vec2::ZERO);
        assert_eq!(c.gamma, [3.0, 3.0]);
        assert!((c.delta[0] - 3.0).abs() < 1e-15 && (c.delta[1] - 3.0).abs() < 1e-15);
        assert!(c.h_plus.abs() < 1e-15 && c.g.abs() < 1e-15);
    }

    #[test]
    fn series_slopes() {
        assert!((series_slope(LatticeKind::Sq) - 2.0).abs() < 1e-14);
        assert!((series_slope(LatticeKind::Tr) - 0.5).abs() < 1e-14);
        assert!((series_slope(LatticeKind::Hx) - 9.0).abs() < 1e-12);
    }
}
