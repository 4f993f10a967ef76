//! Dirichlet problems on primal and dual domains, finite-domain Green's
//! functions and the harmonic measure.

use std::collections::HashSet;
use std::sync::Arc;

use dashmap::DashMap;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::complex::{induced_complex, DomainComplex};
use crate::error::{Error, Result};
use crate::forms::{is_ext, Form, IntForm, Side};
use crate::lattice::{a_dir, CellKey, LatticeKind, LatticeSpec};
use crate::par::{map_slice, Exec};
use crate::sparse::{cg, Csr, EnvelopeCholesky};

/// Linear solver selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Envelope Cholesky, falling back to conjugate gradient on failure.
    #[default]
    Auto,
    Cg,
    Cholesky,
}

pub const CG_TOL: f64 = 1e-12;

/// The Dirichlet Laplacian of one side of a domain, restricted to interior
/// nodes, with the couplings to exterior nodes kept for boundary data.
#[derive(Debug)]
pub struct DirichletOperator {
    pub side: Side,
    /// Form index of each unknown.
    pub nodes: Vec<usize>,
    /// Unknown index of each form index.
    pub unknown: Vec<Option<usize>>,
    pub matrix: Csr,
    /// `(unknown, exterior form index)` couplings, each of weight `-1`.
    pub ext_links: Vec<(usize, usize)>,
    kind: SolverKind,
    chol: Mutex<Option<Arc<EnvelopeCholesky>>>,
}

impl DirichletOperator {
    pub fn new(dom: &DomainComplex, side: Side, kind: SolverKind) -> Result<Self> {
        let (count, links): (usize, &[(usize, usize)]) = match side {
            Side::Primal => (dom.vertices.len(), &dom.edge_ends),
            Side::Dual => (dom.dual_nodes.len(), &dom.dual_edge_ends),
        };
        let mut unknown = vec![None; count];
        let mut nodes = Vec::new();
        for (i, u) in unknown.iter_mut().enumerate() {
            if !is_ext(dom, side, 0, i) {
                *u = Some(nodes.len());
                nodes.push(i);
            }
        }
        if nodes.is_empty() {
            return Err(Error::DomainTooSmall("no interior nodes".into()));
        }
        let mut trip = Vec::with_capacity(links.len() * 4);
        let mut ext_links = Vec::new();
        for &(a, b) in links {
            for (x, y) in [(a, b), (b, a)] {
                if let Some(ux) = unknown[x] {
                    trip.push((ux, ux, 1.0));
                    match unknown[y] {
                        Some(uy) => trip.push((ux, uy, -1.0)),
                        None => ext_links.push((ux, y)),
                    }
                }
            }
        }
        let matrix = Csr::from_triplets(nodes.len(), trip);
        Ok(DirichletOperator { side, nodes, unknown, matrix, ext_links, kind, chol: Mutex::new(None) })
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    fn factor(&self) -> Result<Arc<EnvelopeCholesky>> {
        let mut g = self.chol.lock();
        if let Some(c) = g.as_ref() {
            return Ok(c.clone());
        }
        let c = Arc::new(EnvelopeCholesky::factor(&self.matrix)?);
        *g = Some(c.clone());
        Ok(c)
    }

    /// Solves `A x = b` in unknown space.
    pub fn solve_reduced(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            SolverKind::Cg => Ok(cg(&self.matrix, b, CG_TOL, 20 * self.size() + 100)?.0),
            SolverKind::Cholesky => Ok(self.factor()?.solve(b)),
            SolverKind::Auto => match self.factor() {
                Ok(c) => Ok(c.solve(b)),
                Err(_) => Ok(cg(&self.matrix, b, CG_TOL, 20 * self.size() + 100)?.0),
            },
        }
    }

    /// Solves `Δu = f` on interior nodes with `u = g` on exterior nodes, both
    /// given as full-length vectors over the side's 0-cells.
    pub fn solve_full(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let mut b: Vec<f64> = self.nodes.iter().map(|&i| f[i]).collect();
        for &(u, x) in &self.ext_links {
            b[u] += g[x];
        }
        let x = self.solve_reduced(&b)?;
        let mut out: Vec<f64> = (0..self.unknown.len()).map(|i| if self.unknown[i].is_none() { g[i] } else { 0.0 }).collect();
        for (k, &i) in self.nodes.iter().enumerate() {
            out[i] = x[k];
        }
        Ok(out)
    }
}

/// Poisson problem with Dirichlet data.
#[derive(Clone, Debug)]
pub struct DirichletProblem {
    pub dom: Arc<DomainComplex>,
    pub side: Side,
    /// Right-hand side over all 0-cells; only interior entries are used.
    pub rhs: Vec<f64>,
    /// Boundary data over all 0-cells; only exterior entries are used.
    pub boundary: Vec<f64>,
}

/// Solves `Δu = f` in Int, `u = g` on Ext.
pub fn solve_dirichlet(p: &DirichletProblem) -> Result<Form> {
    solve_dirichlet_with(p, SolverKind::Auto)
}

pub fn solve_dirichlet_with(p: &DirichletProblem, kind: SolverKind) -> Result<Form> {
    let n = match p.side {
        Side::Primal => p.dom.vertices.len(),
        Side::Dual => p.dom.dual_nodes.len(),
    };
    if p.rhs.len() != n || p.boundary.len() != n {
        return Err(Error::InvalidInput("rhs/boundary length mismatch".into()));
    }
    if p.rhs.iter().chain(&p.boundary).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite data".into()));
    }
    let op = DirichletOperator::new(&p.dom, p.side, kind)?;
    let u = op.solve_full(&p.rhs, &p.boundary)?;
    Form::from_values(&p.dom, p.side, 0, u)
}

/// Residual `max |Δu - f|` over interior 0-cells.
pub fn laplacian_residual(u: &Form, f: &[f64]) -> f64 {
    let dom = &u.dom;
    let links: &[(usize, usize)] = match u.side {
        Side::Primal => &dom.edge_ends,
        Side::Dual => &dom.dual_edge_ends,
    };
    let mut lap = vec![0.0; u.values.len()];
    for &(a, b) in links {
        let d = u.values[a] - u.values[b];
        lap[a] += d;
        lap[b] -= d;
    }
    (0..lap.len())
        .filter(|&i| !is_ext(dom, u.side, 0, i))
        .map(|i| (lap[i] - f[i]).abs())
        .fold(0.0, f64::max)
}

/// Cached dual Green's columns `G_{1_f}` for interior dual nodes.
///
/// Each column is stored over face indices (interior dual nodes); exterior
/// values are zero.
pub struct GreensCache {
    pub dom: Arc<DomainComplex>,
    op: DirichletOperator,
    columns: DashMap<usize, Arc<Vec<f64>>>,
    capacity: usize,
    order: Mutex<std::collections::VecDeque<usize>>,
}

impl std::fmt::Debug for GreensCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreensCache").field("size", &self.op.size()).field("cached", &self.columns.len()).finish()
    }
}

impl GreensCache {
    pub fn new(dom: &Arc<DomainComplex>) -> Result<Self> {
        Self::with_options(dom, SolverKind::Auto, 4096)
    }

    pub fn with_options(dom: &Arc<DomainComplex>, kind: SolverKind, capacity: usize) -> Result<Self> {
        let op = DirichletOperator::new(dom, Side::Dual, kind)?;
        Ok(GreensCache {
            dom: dom.clone(),
            op,
            columns: DashMap::new(),
            capacity: capacity.max(1),
            order: Mutex::new(Default::default()),
        })
    }

    /// Dirichlet Laplacian over interior dual nodes (face order).
    pub fn operator(&self) -> &DirichletOperator {
        &self.op
    }

    /// Green's column of a unit source at face `f`, indexed by face.
    pub fn column(&self, f: usize) -> Result<Arc<Vec<f64>>> {
        if let Some(c) = self.columns.get(&f) {
            return Ok(c.clone());
        }
        let node = self.dom.face_dual_node[f];
        let u = self.op.unknown[node].ok_or(Error::SupportOnBoundary)?;
        let mut b = vec![0.0; self.op.size()];
        b[u] = 1.0;
        let x = self.op.solve_reduced(&b)?;
        let col: Vec<f64> = self.dom.face_dual_node.iter().map(|&nd| x[self.op.unknown[nd].unwrap()]).collect();
        let col = Arc::new(col);
        self.columns.insert(f, col.clone());
        let mut ord = self.order.lock();
        ord.push_back(f);
        while ord.len() > self.capacity {
            if let Some(old) = ord.pop_front() {
                self.columns.remove(&old);
            }
        }
        Ok(col)
    }

    /// Computes many columns, in parallel when enabled.
    pub fn prefetch(&self, faces: &[usize], exec: Exec) -> Result<()> {
        let res = map_slice(exec, faces, |&f| self.column(f).map(|_| ()));
        res.into_iter().collect()
    }

    /// `G_μ` over faces for an integer source given per face.
    pub fn greens_of(&self, mu: &[(usize, i64)]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dom.faces.len()];
        for &(f, m) in mu {
            if m == 0 {
                continue;
            }
            let c = self.column(f)?;
            for (gi, ci) in g.iter_mut().zip(c.iter()) {
                *gi += m as f64 * ci;
            }
        }
        Ok(g)
    }

    pub fn cached(&self) -> usize {
        self.columns.len()
    }
}

/// Dual Green's function `G_{μ*}` of an integer dual 0-form.
pub fn greens_subcomplex(dom: &Arc<DomainComplex>, mu: &IntForm) -> Result<Form> {
    if mu.side != Side::Dual || mu.degree != 0 {
        return Err(Error::DegreeOutOfRange(mu.degree));
    }
    let mut rhs = vec![0.0; dom.dual_nodes.len()];
    for (i, &m) in mu.values.iter().enumerate() {
        if m != 0 {
            if dom.dual_node_face[i].is_none() {
                return Err(Error::SupportOnBoundary);
            }
            rhs[i] = m as f64;
        }
    }
    let zero = vec![0.0; rhs.len()];
    solve_dirichlet(&DirichletProblem { dom: dom.clone(), side: Side::Dual, rhs, boundary: zero })
}

/// The lattice ball `Q^r` as an induced complex.
pub fn lattice_ball(spec: &LatticeSpec, r: u32) -> Result<DomainComplex> {
    let r = r as f64;
    let p = &spec.periodic;
    let inside = |x: crate::geom::Vec2| -> bool {
        match spec.kind {
            LatticeKind::Sq => x.x.abs() <= r + 1e-9 && x.y.abs() <= r + 1e-9,
            _ => [(1, 2), (2, 3), (3, 4)].iter().all(|&(i, j)| x.dot(a_dir(i) + a_dir(j)).abs() <= 0.5 * r + 1e-9),
        }
    };
    let reach = (2.0 * r) as i32 + 3;
    let mut verts = HashSet::new();
    for i in -reach..=reach {
        for j in -reach..=reach {
            for s in 0..p.vsub.len() {
                let k = CellKey::new(i, j, s as u8);
                if inside(p.vertex_pos(k)) {
                    verts.insert(k);
                }
            }
        }
    }
    induced_complex(spec, &verts)
}

/// Harmonic measures `ω_e` of every exterior vertex of `Q^r`, returned as
/// `(exterior vertex index, form)`. Boundary data is `1_e`.
pub fn harmonic_measure_all(q: &Arc<DomainComplex>, exec: Exec) -> Result<Vec<(usize, Form)>> {
    let op = DirichletOperator::new(q, Side::Primal, SolverKind::Auto)?;
    let ext: Vec<usize> = (0..q.vertices.len()).filter(|&i| q.vertex_ext[i]).collect();
    let zero = vec![0.0; q.vertices.len()];
    let res = map_slice(exec, &ext, |&e| {
        let mut g = zero.clone();
        g[e] = 1.0;
        op.solve_full(&zero, &g).and_then(|u| Form::from_values(q, Side::Primal, 0, u)).map(|f| (e, f))
    });
    res.into_iter().collect()
}

/// Harmonic measure of a single exterior vertex.
pub fn harmonic_measure(q: &Arc<DomainComplex>, e: usize) -> Result<Form> {
    if !q.vertex_ext[e] {
        return Err(Error::InvalidInput(format!("vertex {e} is not exterior")));
    }
    let zero = vec![0.0; q.vertices.len()];
    let mut g = zero.clone();
    g[e] = 1.0;
    solve_dirichlet(&DirichletProblem { dom: q.clone(), side: Side::Primal, rhs: zero, boundary: g })
}

/// Diagnostic report of the interior gradient bound
/// `|du(e)| <= C log(dist)/dist ||g||_inf`.
#[derive(Clone, Debug, Serialize)]
pub struct GradientBoundReport {
    pub constant: f64,
    pub g_inf: f64,
    /// `(distance to Ext, max |du| at that distance band)` pairs.
    pub envelope: Vec<(f64, f64)>,
    pub max_ratio: f64,
    pub holds: bool,
}

/// Solves the harmonic problem with boundary data `g` and compares the
/// interior differential against `C log(dist)/dist ||g||_inf`.
pub fn interior_gradient_bound_check(dom: &Arc<DomainComplex>, g: &[f64], constant: f64) -> Result<GradientBoundReport> {
    let zero = vec![0.0; dom.vertices.len()];
    let u = solve_dirichlet(&DirichletProblem { dom: dom.clone(), side: Side::Primal, rhs: zero, boundary: g.to_vec() })?;
    let g_inf = (0..g.len()).filter(|&i| dom.vertex_ext[i]).map(|i| g[i].abs()).fold(0.0, f64::max);
    let ext: Vec<_> = (0..dom.vertices.len()).filter(|&i| dom.vertex_ext[i]).map(|i| dom.vertex_pos[i]).collect();
    let mut bands: std::collections::BTreeMap<u64, f64> = Default::default();
    let mut max_ratio: f64 = 0.0;
    for (e, &(t, h)) in dom.edge_ends.iter().enumerate() {
        if dom.edge_ext[e] {
            continue;
        }
        let mid = (dom.vertex_pos[t] + dom.vertex_pos[h]) * 0.5;
        let dist = ext.iter().map(|p| p.dist(mid)).fold(f64::INFINITY, f64::min);
        if dist < 2.0 {
            continue;
        }
        let du = (u.values[h] - u.values[t]).abs();
        let band = dist.floor() as u64;
        let b = bands.entry(band).or_insert(0.0);
        *b = b.max(du);
        if g_inf > 0.0 {
            max_ratio = max_ratio.max(du / (dist.ln() / dist * g_inf));
        }
    }
    let envelope: Vec<(f64, f64)> = bands.into_iter().map(|(k, v)| (k as f64, v)).collect();
    Ok(GradientBoundReport { constant, g_inf, envelope, max_ratio, holds: max_ratio <= constant })
}
