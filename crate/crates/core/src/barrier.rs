//! Transition states and energy barriers for single-core hops.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::complex::DomainComplex;
use crate::dislocation::{energy_diff, equilibrium, integrate_tree, DislocationState, PotentialParams};
use crate::error::{Error, Result};
use crate::forms::{apply_d, apply_delta, Form, Side};
use crate::geom::Vec2;
use crate::lattice::CellKey;
use crate::solver::GreensCache;

/// A single-core hop across the primal edge `l` with `l* = [p*, q*]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hop {
    pub core: usize,
    pub from: CellKey,
    pub to: CellKey,
    /// Dual hop vector `q* - p*` in lattice units.
    pub vector: Vec2,
    /// Primal edge crossed, if it belongs to the domain.
    pub edge: Option<usize>,
    /// `+1` when the dual of the canonical edge runs from `p` to `q`.
    pub edge_sign: i8,
    /// Whether the target state is admissible.
    pub admissible: bool,
}

/// A transition `μ -> ν` with `ν - μ = b_i (1_q - 1_p)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Transition {
    pub mu: DislocationState,
    pub hop: Hop,
}

impl Transition {
    pub fn nu(&self) -> DislocationState {
        self.mu.moved(self.hop.core, self.hop.to)
    }

    pub fn sign(&self) -> i8 {
        self.mu.signs[self.hop.core]
    }

    /// The reverse transition `ν -> μ`.
    pub fn reversed(&self, dom: &DomainComplex) -> Transition {
        let nu = self.nu();
        let hop = Hop {
            core: self.hop.core,
            from: self.hop.to,
            to: self.hop.from,
            vector: -self.hop.vector,
            edge: self.hop.edge,
            edge_sign: -self.hop.edge_sign,
            admissible: self.mu.is_admissible(dom),
        };
        Transition { mu: nu, hop }
    }
}

/// All single-core nearest-neighbour hops of a state, tagged by admissibility
/// of the target.
pub fn hops(dom: &DomainComplex, state: &DislocationState) -> Vec<Hop> {
    let mut out = Vec::new();
    for (i, &p) in state.cores.iter().enumerate() {
        let Some(pf) = dom.face_id(p) else { continue };
        for (q, vector) in dom.spec.face_neighbors(p) {
            let qf = dom.face_id(q);
            let (edge, edge_sign) = match qf.and_then(|qf| dom.crossing_edge(pf, qf)) {
                Some((e, s)) => (Some(e), s),
                None => (None, 0),
            };
            let admissible = qf.is_some() && !state.cores.contains(&q) && state.moved(i, q).is_admissible(dom);
            out.push(Hop { core: i, from: p, to: q, vector, edge, edge_sign, admissible });
        }
    }
    out
}

/// `t = (½b + dG_μ(l*)) / (b + dG_μ(l*) - dG_ν(l*))`.
pub fn transition_t(dg_mu: f64, dg_nu: f64, b: f64) -> Result<f64> {
    let den = b + dg_mu - dg_nu;
    if den.abs() < 1e-8 {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok((0.5 * b + dg_mu) / den)
}

/// Closed-form barrier `½λ[½b dG_μ + ½tb(dG_μ + dG_ν) + ¼]`.
pub fn barrier_closed_form(dg_mu: f64, dg_nu: f64, t: f64, b: f64, lambda: f64) -> f64 {
    0.5 * lambda * (0.5 * b * dg_mu + 0.5 * t * b * (dg_mu + dg_nu) + 0.25)
}

/// `λc₀ + ½λn⁻¹ ∂𝓔·a`.
pub fn asymptotic_barrier(c0: f64, lambda: f64, n: u32, force_dot_hop: f64) -> f64 {
    lambda * c0 + 0.5 * lambda * force_dot_hop / n as f64
}

/// Dual Green's differences across the hop edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HopGreens {
    pub dg_mu: f64,
    pub dg_nu: f64,
}

/// `(dG_μ(l*), dG_ν(l*))` from cached Green's columns.
pub fn hop_greens(cache: &GreensCache, tr: &Transition) -> Result<HopGreens> {
    let dom = &cache.dom;
    let p = dom.face_id(tr.hop.from).ok_or_else(|| Error::BarrierUnavailable(format!("core off domain at {}", tr.hop.from)))?;
    let q = dom
        .face_id(tr.hop.to)
        .ok_or_else(|| Error::BarrierUnavailable(format!("target {} is exterior", tr.hop.to)))?;
    let ids = tr.mu.face_ids(dom)?;
    let mut dg_mu = 0.0;
    for (&f, &b) in ids.iter().zip(&tr.mu.signs) {
        // G(f, q) - G(f, p) by symmetry of the Green's function.
        let c = cache.column(f)?;
        dg_mu += b as f64 * (c[q] - c[p]);
    }
    let b = tr.sign() as f64;
    let cp = cache.column(p)?;
    let cq = cache.column(q)?;
    let dg_nu = dg_mu + b * ((cq[q] - cq[p]) - (cp[q] - cp[p]));
    Ok(HopGreens { dg_mu, dg_nu })
}

/// Fast exact barrier from the closed form only; returns `(t, B)`.
pub fn exact_barrier_fast(cache: &GreensCache, tr: &Transition, params: &PotentialParams) -> Result<(f64, f64)> {
    let hg = hop_greens(cache, tr)?;
    let b = tr.sign() as f64;
    let t = transition_t(hg.dg_mu, hg.dg_nu, b)?;
    Ok((t, barrier_closed_form(hg.dg_mu, hg.dg_nu, t, b, params.lambda)))
}

/// The transition state built from the interpolated dual Green's function.
#[derive(Clone, Debug)]
pub struct TransitionState {
    pub t: f64,
    pub dg_mu: f64,
    pub dg_nu: f64,
    pub alpha_up: Form,
    pub alpha_down: Form,
    pub u_up: Form,
    pub u_mu: Form,
    pub b_exact: f64,
}

const COND_TOL: f64 = 1e-10;

/// Builds `α_up`, `α_down`, `u_up` and verifies the necessary conditions.
pub fn transition_state(cache: &GreensCache, tr: &Transition, params: &PotentialParams) -> Result<TransitionState> {
    let dom: &Arc<DomainComplex> = &cache.dom;
    let nu = tr.nu();
    let eq_mu = equilibrium(cache, &tr.mu)?;
    nu.check_admissible(dom)?;
    let g_nu = cache.greens_of(&nu.source(dom)?)?;
    let p = dom.face_id(tr.hop.from).ok_or_else(|| Error::InadmissibleState("core off domain".into()))?;
    let q = dom.face_id(tr.hop.to).ok_or_else(|| Error::InadmissibleState("target off domain".into()))?;
    let b = tr.sign() as f64;
    let dg_mu = eq_mu.g[q] - eq_mu.g[p];
    let dg_nu = g_nu[q] - g_nu[p];
    let t = transition_t(dg_mu, dg_nu, b)?;
    let edge = tr.hop.edge.ok_or_else(|| Error::InadmissibleState("hop edge off domain".into()))?;
    let sgn = tr.hop.edge_sign as f64;
    let gt: Vec<f64> = eq_mu.g.iter().zip(&g_nu).map(|(a, c)| (1.0 - t) * a + t * c).collect();
    let mut alpha_up = crate::dislocation::alpha_from_dual(dom, &gt);
    alpha_up.values[edge] -= sgn * t * b;
    let mut alpha_down = alpha_up.clone();
    alpha_down.values[edge] += sgn * b;

    check_conditions(dom, tr, &nu, &alpha_up, &alpha_down, edge, sgn, b)?;

    let u_up = integrate_tree(&alpha_up);
    let b_exact = barrier_closed_form(dg_mu, dg_nu, t, b, params.lambda);
    Ok(TransitionState { t, dg_mu, dg_nu, alpha_up, alpha_down, u_up, u_mu: eq_mu.u, b_exact })
}

#[allow(clippy::too_many_arguments)]
fn check_conditions(
    dom: &Arc<DomainComplex>,
    tr: &Transition,
    nu: &DislocationState,
    up: &Form,
    down: &Form,
    edge: usize,
    sgn: f64,
    b: f64,
) -> Result<()> {
    if (sgn * up.values[edge] + 0.5 * b).abs() > COND_TOL || (sgn * down.values[edge] - 0.5 * b).abs() > COND_TOL {
        return Err(Error::NecessaryConditionsFailed(format!(
            "α(l) = ({}, {}) instead of ∓b/2",
            sgn * up.values[edge],
            sgn * down.values[edge]
        )));
    }
    for (a, st, name) in [(up, &tr.mu, "α_up"), (down, nu, "α_down")] {
        let mu = st.mu_form(dom)?;
        let mut da = vec![0.0; dom.faces.len()];
        apply_d(dom, Side::Primal, 1, &a.values, &mut da)?;
        if let Some(f) = (0..da.len()).find(|&f| (da[f] - mu.values[f] as f64).abs() > COND_TOL) {
            return Err(Error::NecessaryConditionsFailed(format!("d{name} differs from the source at face {f}")));
        }
    }
    let (e0, e1) = dom.edge_ends[edge];
    let mut dl = vec![0.0; dom.vertices.len()];
    apply_delta(dom, Side::Primal, 1, &up.values, &mut dl)?;
    for (v, &x) in dl.iter().enumerate() {
        if v != e0 && v != e1 && x.abs() > COND_TOL {
            return Err(Error::NecessaryConditionsFailed(format!("δα_up = {x:e} at vertex {v} off the hop edge")));
        }
    }
    if (dl[e0] + dl[e1]).abs() > COND_TOL {
        return Err(Error::NecessaryConditionsFailed("δα(e0) + δα(e1) ≠ 0".into()));
    }
    let sup = up.norm_inf().max(down.norm_inf());
    if sup > 0.5 + COND_TOL {
        return Err(Error::NecessaryConditionsFailed(format!("‖α‖∞ = {sup} exceeds ½")));
    }
    Ok(())
}

/// Exact barrier with the direct energy cross-check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BarrierReport {
    pub t: f64,
    pub dg_mu: f64,
    pub dg_nu: f64,
    pub b_exact: f64,
    pub b_direct: f64,
}

/// Closed-form barrier checked against `E_n(u_up; u_μ)` to `1e-9` relative.
pub fn exact_barrier(cache: &GreensCache, tr: &Transition, params: &PotentialParams) -> Result<BarrierReport> {
    let ts = transition_state(cache, tr, params)?;
    let direct = energy_diff(&ts.u_up, &ts.u_mu, params)?;
    let scale = ts.b_exact.abs().max(direct.abs()).max(1e-300);
    if (ts.b_exact - direct).abs() > 1e-9 * scale {
        return Err(Error::CrossCheckFailed { closed: ts.b_exact, direct });
    }
    Ok(BarrierReport { t: ts.t, dg_mu: ts.dg_mu, dg_nu: ts.dg_nu, b_exact: ts.b_exact, b_direct: direct })
}

/// One row of an exported barrier table.
#[derive(Clone, Debug, Serialize)]
pub struct BarrierRow {
    pub state_hash: String,
    pub core: usize,
    pub hop_x: f64,
    pub hop_y: f64,
    pub t: f64,
    pub b_exact: f64,
    pub b_asym: f64,
}

/// Writes barrier rows as CSV.
pub fn write_barrier_csv<W: Write>(rows: &[BarrierRow], mut w: W) -> Result<()> {
    writeln!(w, "state_hash,core,hop_x,hop_y,t,B_exact,B_asym")?;
    for r in rows {
        writeln!(w, "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", r.state_hash, r.core, r.hop_x, r.hop_y, r.t, r.b_exact, r.b_asym)?;
    }
    Ok(())
}

/// A short hash of a state, for table keys.
pub fn state_hash(s: &DislocationState) -> String {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    s.hash(&mut h);
    format!("{:016x}", h.finish())
}
