//! Dislocation configurations, bond-length 1-forms and equilibria.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::complex::DomainComplex;
use crate::error::{Error, Result};
use crate::forms::{apply_d, apply_delta, Form, IntForm, Side};
use crate::geom::Vec2;
use crate::lattice::CellKey;
use crate::solver::GreensCache;

/// Interaction potential `ψ(x) = ½ λ dist(x, Z)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub lambda: f64,
}

impl Default for PotentialParams {
    fn default() -> Self {
        PotentialParams { lambda: 1.0 }
    }
}

impl PotentialParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        Ok(PotentialParams { lambda })
    }

    pub fn psi(&self, x: f64) -> f64 {
        let d = x - x.round();
        0.5 * self.lambda * d * d
    }
}

/// Distance to the nearest integer.
pub fn dist_z(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Reduction of `x` modulo integers into `(-½, ½]`.
pub fn reduce_half(x: f64) -> f64 {
    x - (x - 0.5).ceil()
}

/// A configuration of dislocation cores (positively oriented 2-cells) with
/// Burgers signs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DislocationState {
    pub n: u32,
    pub epsilon: OrderedEps,
    pub cores: Vec<CellKey>,
    pub signs: Vec<i8>,
}

/// `ε` stored with bitwise equality so states can be hashed.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedEps(pub f64);

impl PartialEq for OrderedEps {
    fn eq(&self, o: &Self) -> bool {
        self.0.to_bits() == o.0.to_bits()
    }
}
impl Eq for OrderedEps {}
impl std::hash::Hash for OrderedEps {
    fn hash<H: std::hash::Hasher>(&self, h: &mut H) {
        self.0.to_bits().hash(h)
    }
}

impl DislocationState {
    pub fn new(n: u32, epsilon: f64, cores: Vec<CellKey>, signs: Vec<i8>) -> Result<Self> {
        if cores.len() != signs.len() {
            return Err(Error::InvalidInput("cores and signs differ in length".into()));
        }
        if signs.iter().any(|&b| b != 1 && b != -1) {
            return Err(Error::InvalidInput("Burgers signs must be ±1".into()));
        }
        Ok(DislocationState { n, epsilon: OrderedEps(epsilon), cores, signs })
    }

    pub fn empty(n: u32, epsilon: f64) -> Self {
        DislocationState { n, epsilon: OrderedEps(epsilon), cores: vec![], signs: vec![] }
    }

    pub fn eps(&self) -> f64 {
        self.epsilon.0
    }

    pub fn m(&self) -> usize {
        self.cores.len()
    }

    /// Core barycenters in lattice units.
    pub fn positions(&self, dom: &DomainComplex) -> Vec<Vec2> {
        self.cores.iter().map(|&k| dom.spec.face_pos(k)).collect()
    }

    /// Rescaled positions `ι_n(μ)`.
    pub fn macro_positions(&self, dom: &DomainComplex) -> Vec<Vec2> {
        let s = 1.0 / self.n as f64;
        self.positions(dom).into_iter().map(|p| p * s).collect()
    }

    /// Face indices of the cores.
    pub fn face_ids(&self, dom: &DomainComplex) -> Result<Vec<usize>> {
        self.cores
            .iter()
            .map(|&k| dom.face_id(k).ok_or_else(|| Error::CellNotInDomain(format!("2-cell {k}"))))
            .collect()
    }

    /// Checks membership in `Pos^ε_n`.
    pub fn check_admissible(&self, dom: &DomainComplex) -> Result<()> {
        let ids = self.face_ids(dom)?;
        let r = self.eps() * self.n as f64;
        let pos = self.positions(dom);
        for (a, &f) in ids.iter().enumerate() {
            if dom.face_ext_dist[f] < r - 1e-9 {
                return Err(Error::NotAdmissible(format!("core {a} is {:.3} from Ext < εn = {r:.3}", dom.face_ext_dist[f])));
            }
            for b in 0..a {
                let d = pos[a].dist(pos[b]);
                if d < r - 1e-9 {
                    return Err(Error::NotAdmissible(format!("cores {b} and {a} are {d:.3} apart < εn = {r:.3}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_admissible(&self, dom: &DomainComplex) -> bool {
        self.check_admissible(dom).is_ok()
    }

    /// `μ` as a sparse list `(face index, sign)`.
    pub fn source(&self, dom: &DomainComplex) -> Result<Vec<(usize, i64)>> {
        Ok(self.face_ids(dom)?.into_iter().zip(&self.signs).map(|(f, &b)| (f, b as i64)).collect())
    }

    /// `μ` as an integer primal 2-form.
    pub fn mu_form(&self, dom: &Arc<DomainComplex>) -> Result<IntForm> {
        let mut mu = IntForm::zeros(dom, Side::Primal, 2);
        for (f, b) in self.source(dom)? {
            mu.values[f] += b;
        }
        if mu.values.iter().any(|v| v.abs() > 1) {
            return Err(Error::NotAdmissible("two cores share a cell".into()));
        }
        Ok(mu)
    }

    /// The state with core `i` moved to `to`.
    pub fn moved(&self, i: usize, to: CellKey) -> Self {
        let mut s = self.clone();
        s.cores[i] = to;
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// `E_n(y; ỹ) = Σ_e ψ(dy(e)) - ψ(dỹ(e))`.
pub fn energy_diff(y: &Form, y_tilde: &Form, params: &PotentialParams) -> Result<f64> {
    if y.degree != 0 || y_tilde.degree != 0 {
        return Err(Error::DegreeOutOfRange(y.degree.max(y_tilde.degree)));
    }
    if !Arc::ptr_eq(&y.dom, &y_tilde.dom) {
        return Err(Error::DomainMismatch);
    }
    let mut e = 0.0;
    for &(t, h) in &y.dom.edge_ends {
        e += params.psi(y.values[h] - y.values[t]) - params.psi(y_tilde.values[h] - y_tilde.values[t]);
    }
    Ok(e)
}

/// Energy of a strain relative to zero strain: `Σ ψ(α)`.
pub fn strain_energy(alpha: &Form, params: &PotentialParams) -> f64 {
    alpha.values.iter().map(|&a| params.psi(a)).sum()
}

/// The representative of `[du]` with values in `(-½, ½]`.
pub fn bond_length_form(u: &Form) -> Result<Form> {
    if u.degree != 0 || u.side != Side::Primal {
        return Err(Error::DegreeOutOfRange(u.degree));
    }
    let mut a = Form::zeros(&u.dom, Side::Primal, 1);
    for (e, &(t, h)) in u.dom.edge_ends.iter().enumerate() {
        a.values[e] = reduce_half(u.values[h] - u.values[t]);
    }
    Ok(a)
}

/// `μ = dα` rounded to integers.
pub fn burgers(alpha: &Form) -> Result<IntForm> {
    if alpha.degree != 1 || alpha.side != Side::Primal {
        return Err(Error::DegreeOutOfRange(alpha.degree));
    }
    let mut da = vec![0.0; alpha.dom.faces.len()];
    apply_d(&alpha.dom, Side::Primal, 1, &alpha.values, &mut da)?;
    let mut mu = IntForm::zeros(&alpha.dom, Side::Primal, 2);
    for (m, v) in mu.values.iter_mut().zip(da) {
        *m = v.round() as i64;
    }
    Ok(mu)
}

/// Strain `α` with `α* = d*G` for a dual potential given over faces (zero on
/// exterior dual nodes).
pub fn alpha_from_dual(dom: &Arc<DomainComplex>, g_faces: &[f64]) -> Form {
    let mut a = Form::zeros(dom, Side::Primal, 1);
    let val = |node: usize| dom.dual_node_face[node].map_or(0.0, |f| g_faces[f]);
    for (e, v) in a.values.iter_mut().enumerate() {
        let (r, l) = dom.dual_edge_ends[dom.edge_dual_edge[e]];
        *v = val(l) - val(r);
    }
    a
}

/// Integrates a 1-form along a breadth-first spanning tree rooted at the first
/// exterior vertex, which is pinned to zero.
pub fn integrate_tree(alpha: &Form) -> Form {
    let dom = &alpha.dom;
    let nv = dom.vertices.len();
    let mut adj: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); nv];
    for (e, &(t, h)) in dom.edge_ends.iter().enumerate() {
        adj[t].push((h, e, 1.0));
        adj[h].push((t, e, -1.0));
    }
    let root = dom.vertex_ext.iter().position(|&x| x).unwrap_or(0);
    let mut u = vec![f64::NAN; nv];
    u[root] = 0.0;
    let mut q = VecDeque::from([root]);
    while let Some(v) = q.pop_front() {
        for &(w, e, s) in &adj[v] {
            if u[w].is_nan() {
                u[w] = u[v] + s * alpha.values[e];
                q.push_back(w);
            }
        }
    }
    Form { dom: dom.clone(), side: Side::Primal, degree: 0, values: u }
}

/// An equilibrium: displacement representative, strain and source state.
#[derive(Clone, Debug)]
pub struct Equilibrium {
    pub state: DislocationState,
    /// Dual Green's function `G_μ*` over faces.
    pub g: Vec<f64>,
    pub alpha: Form,
    pub u: Form,
}

/// Builds the equilibrium of an admissible state from cached Green's columns.
pub fn equilibrium(cache: &GreensCache, state: &DislocationState) -> Result<Equilibrium> {
    let dom = &cache.dom;
    state.check_admissible(dom)?;
    state.mu_form(dom)?;
    let g = cache.greens_of(&state.source(dom)?)?;
    let alpha = alpha_from_dual(dom, &g);
    let sup = alpha.norm_inf();
    if sup >= 0.5 {
        return Err(Error::BarrierConditionViolated(sup));
    }
    let u = integrate_tree(&alpha);
    Ok(Equilibrium { state: state.clone(), g, alpha, u })
}

/// Residuals of the equilibrium conditions: `(max |dα - μ|, max |δα|)`.
pub fn equilibrium_residuals(eq: &Equilibrium) -> Result<(f64, f64)> {
    let dom = &eq.alpha.dom;
    let mu = eq.state.mu_form(dom)?;
    let mut da = vec![0.0; dom.faces.len()];
    apply_d(dom, Side::Primal, 1, &eq.alpha.values, &mut da)?;
    let r1 = da.iter().zip(&mu.values).map(|(a, &m)| (a - m as f64).abs()).fold(0.0, f64::max);
    let mut dl = vec![0.0; dom.vertices.len()];
    apply_delta(dom, Side::Primal, 1, &eq.alpha.values, &mut dl)?;
    let r2 = dl.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((r1, r2))
}

/// Randomised local-stability test: energy increments along random small
/// perturbations are non-negative and the first variation vanishes.
pub fn is_locally_stable<R: Rng>(u: &Form, params: &PotentialParams, trials: usize, radius: f64, rng: &mut R) -> Result<bool> {
    let dom = &u.dom;
    let alpha = bond_length_form(u)?;
    for _ in 0..trials {
        let mut v: Vec<f64> = (0..dom.vertices.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut dv = vec![0.0; dom.edges.len()];
        apply_d(dom, Side::Primal, 0, &v, &mut dv)?;
        let norm = (v.iter().map(|x| x * x).sum::<f64>() + dv.iter().map(|x| x * x).sum::<f64>()).sqrt();
        let s = radius / norm.max(1e-300);
        for x in v.iter_mut() {
            *x *= s;
        }
        let first: f64 = alpha.values.iter().zip(&dv).map(|(a, d)| a * d * s).sum();
        if first.abs() > 1e-10 {
            return Ok(false);
        }
        let w = Form { dom: dom.clone(), side: Side::Primal, degree: 0, values: u.values.iter().zip(&v).map(|(a, b)| a + b).collect() };
        if energy_diff(&w, u, params)? < -1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}
