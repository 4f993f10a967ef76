//! Peach-Koehler forces `∂_i𝓔(x)` extracted from discrete dual Green's
//! functions, and a lazily filled force mesh.
//!
//! At scale `N` the force on core `i` is split into a self part
//! `(N/2)∇ρ(y_i)` with `ρ(y) = G_N(y, y)` and pair parts
//! `N b_i b_k ∇_1[G_N - G^{L*}](y_i, y_k)` plus the continuum gradient of the
//! subtracted full-lattice function. Values and gradients at off-lattice points
//! come from weighted quadratic least-squares fits over nearby interior dual
//! nodes. Two scales `N` and `2N` are combined by first-order Richardson
//! extrapolation.

use std::collections::HashMap;
use std::sync::Arc;

use dashmap::DashMap;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::complex::{build_domain, ConvexLatticePolygon, DomainComplex};
use crate::error::{Error, Result};
use crate::full_lattice::{continuum_log_coefficient, dual_lookup, dual_table_kind, dual_table_radius, shared, FullLatticeGreens};
use crate::geom::Vec2;
use crate::lattice::{build_lattice, LatticeKind, LatticeSpec};
use crate::par::{map_slice, Exec};
use crate::solver::GreensCache;

/// A source of per-dislocation forces `∂_i𝓔(x)` at macroscopic positions.
pub trait ForceModel: Send + Sync {
    fn kind(&self) -> LatticeKind;
    fn forces(&self, x: &[Vec2], b: &[i8]) -> Result<Vec<Vec2>>;
}

/// Zero force everywhere.
#[derive(Clone, Copy, Debug)]
pub struct ZeroForce(pub LatticeKind);

impl ForceModel for ZeroForce {
    fn kind(&self) -> LatticeKind {
        self.0
    }
    fn forces(&self, x: &[Vec2], _b: &[i8]) -> Result<Vec<Vec2>> {
        Ok(vec![Vec2::ZERO; x.len()])
    }
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
        if a[piv][c].abs() < 1e-14 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f == 0.0 {
                continue;
            }
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            for k in 0..b[r].len() {
                b[r][k] -= f * b[c][k];
            }
        }
    }
    for c in (0..n).rev() {
        for k in 0..b[c].len() {
            let mut s = b[c][k];
            for j in c + 1..n {
                s -= a[c][j] * b[j][k];
            }
            b[c][k] = s / a[c][c];
        }
    }
    Some(b)
}

/// Interpolation stencil around an off-lattice point: face indices with
/// value weights and gradient weights of a weighted quadratic fit.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub faces: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<Vec2>,
}

/// Builds the stencil of interior dual nodes around `y` (lattice units).
pub fn stencil(dom: &DomainComplex, y: Vec2, radius: f64) -> Result<Stencil> {
    let mut r = radius;
    for _ in 0..4 {
        let faces: Vec<usize> = (0..dom.faces.len()).filter(|&f| dom.face_pos(f).dist(y) < r).collect();
        if faces.len() >= 10 {
            if let Some(s) = fit_weights(dom, y, r, &faces) {
                return Ok(s);
            }
        }
        r *= 1.4;
    }
    Err(Error::InvalidInput(format!("no interpolation stencil near ({:.3}, {:.3})", y.x, y.y)))
}

fn fit_weights(dom: &DomainComplex, y: Vec2, r: f64, faces: &[usize]) -> Option<Stencil> {
    let h = r;
    let rows: Vec<([f64; 6], f64)> = faces
        .iter()
        .map(|&f| {
            let d = (dom.face_pos(f) - y) / h;
            let w = (1.0 - d.norm2()).max(0.0).powi(2);
            ([1.0, d.x, d.y, d.x * d.x, d.x * d.y, d.y * d.y], w)
        })
        .collect();
    let mut m = vec![vec![0.0; 6]; 6];
    for (phi, w) in &rows {
        for i in 0..6 {
            for j in 0..6 {
                m[i][j] += w * phi[i] * phi[j];
            }
        }
    }
    let rhs: Vec<Vec<f64>> = (0..6).map(|i| rows.iter().map(|(phi, w)| w * phi[i]).collect()).collect();
    let sol = solve_dense(m, rhs)?;
    Some(Stencil {
        faces: faces.to_vec(),
        value: sol[0].clone(),
        grad: (0..faces.len()).map(|k| Vec2::new(sol[1][k], sol[2][k]) / h).collect(),
    })
}

/// Configuration of the Richardson force extraction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PkForceConfig {
    pub kind: LatticeKind,
    pub polygon: ConvexLatticePolygon,
    /// Coarse scale; the fine scale is twice this.
    pub n_coarse: u32,
    /// Stencil radius in dual hop lengths.
    pub stencil_hops: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl PkForceConfig {
    pub fn new(kind: LatticeKind) -> Self {
        PkForceConfig {
            kind,
            polygon: ConvexLatticePolygon::default_for(kind),
            n_coarse: 32,
            stencil_hops: 3.0,
            rel_tol: 0.05,
            abs_tol: 0.05,
        }
    }
}

/// One scale of the force extraction.
pub struct ForceLevel {
    pub n: u32,
    pub dom: Arc<DomainComplex>,
    pub cache: GreensCache,
    table: Arc<FullLatticeGreens>,
}

impl ForceLevel {
    pub fn new(kind: LatticeKind, polygon: &ConvexLatticePolygon, n: u32) -> Result<Self> {
        let spec = build_lattice(kind);
        let dom = Arc::new(build_domain(&spec, polygon, n)?);
        let cache = GreensCache::with_options(&dom, crate::solver::SolverKind::Auto, 1 << 16)?;
        let diam = dom.scaled_polygon().map_or(n as f64 * 2.0, |p| p.diameter());
        let table = shared(dual_table_kind(kind), dual_table_radius(kind, diam + 4.0))?;
        Ok(ForceLevel { n, dom, cache, table })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.dom.spec
    }

    /// `G_N(z, w) - G^{L*}(z - w)` for faces `z`, `w`.
    fn regular(&self, z: usize, w: usize) -> Result<f64> {
        let c = self.cache.column(z)?;
        let gl = dual_lookup(self.dom.kind(), &self.table, self.dom.faces[z], self.dom.faces[w])?;
        Ok(c[w] - gl)
    }

    /// Forces at this scale for macroscopic positions `x`.
    pub fn forces(&self, x: &[Vec2], b: &[i8], stencil_hops: f64) -> Result<Vec<Vec2>> {
        let n = self.n as f64;
        let a_l = continuum_log_coefficient(dual_table_kind(self.dom.kind()));
        let radius = stencil_hops * self.dom.spec.d_hop;
        let ys: Vec<Vec2> = x.iter().map(|&p| p * n).collect();
        let st: Vec<Stencil> = ys.iter().map(|&y| stencil(&self.dom, y, radius)).collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let si = &st[i];
            let mut grad_rho = Vec2::ZERO;
            for (k, &z) in si.faces.iter().enumerate() {
                grad_rho += si.grad[k] * self.regular(z, z)?;
            }
            let mut f = grad_rho * (0.5 * n);
            for k in 0..x.len() {
                if k == i {
                    continue;
                }
                let sk = &st[k];
                let mut g1 = Vec2::ZERO;
                for (a, &z) in si.faces.iter().enumerate() {
                    let mut v = 0.0;
                    for (c, &w) in sk.faces.iter().enumerate() {
                        v += sk.value[c] * self.regular(z, w)?;
                    }
                    g1 += si.grad[a] * v;
                }
                let d = ys[i] - ys[k];
                let sing = d * (-a_l / d.norm2());
                f += (g1 + sing) * (n * (b[i] * b[k]) as f64);
            }
            out.push(f);
        }
        Ok(out)
    }
}

/// Richardson-extrapolated Peach-Koehler forces.
pub struct PkForce {
    pub config: PkForceConfig,
    pub coarse: ForceLevel,
    pub fine: ForceLevel,
}

/// Per-level estimates and the extrapolated force.
#[derive(Clone, Debug, Serialize)]
pub struct ForceEstimate {
    pub coarse: Vec<Vec2>,
    pub fine: Vec<Vec2>,
    pub extrapolated: Vec<Vec2>,
}

impl PkForce {
    pub fn new(config: PkForceConfig) -> Result<Self> {
        let coarse = ForceLevel::new(config.kind, &config.polygon, config.n_coarse)?;
        let fine = ForceLevel::new(config.kind, &config.polygon, 2 * config.n_coarse)?;
        Ok(PkForce { config, coarse, fine })
    }

    pub fn estimate(&self, x: &[Vec2], b: &[i8]) -> Result<ForceEstimate> {
        if x.len() != b.len() {
            return Err(Error::InvalidInput("positions and signs differ in length".into()));
        }
        let fc = self.coarse.forces(x, b, self.config.stencil_hops)?;
        let ff = self.fine.forces(x, b, self.config.stencil_hops)?;
        let ex = fc.iter().zip(&ff).map(|(&c, &f)| f * 2.0 - c).collect();
        Ok(ForceEstimate { coarse: fc, fine: ff, extrapolated: ex })
    }
}

impl ForceModel for PkForce {
    fn kind(&self) -> LatticeKind {
        self.config.kind
    }

    fn forces(&self, x: &[Vec2], b: &[i8]) -> Result<Vec<Vec2>> {
        let e = self.estimate(x, b)?;
        for (c, f) in e.coarse.iter().zip(&e.fine) {
            if (*f - *c).norm() > self.config.rel_tol * f.norm() + self.config.abs_tol {
                return Err(Error::ExtrapolationUnstable([c.x, c.y], [f.x, f.y]));
            }
        }
        Ok(e.extrapolated)
    }
}

/// Force on each core along each hop, `(n/2) b [dG_μ(l*) + dG_ν(l*)]`, for a
/// discrete state; the direct finite-`n` form of `∂_i𝓔·a`.
pub fn hop_force_projections(cache: &GreensCache, state: &crate::dislocation::DislocationState) -> Result<Vec<(usize, Vec2, f64)>> {
    let dom = &cache.dom;
    let mut out = Vec::new();
    for h in crate::barrier::hops(dom, state) {
        if dom.face_id(h.to).is_none() {
            continue;
        }
        let tr = crate::barrier::Transition { mu: state.clone(), hop: h.clone() };
        let hg = crate::barrier::hop_greens(cache, &tr)?;
        let b = state.signs[h.core] as f64;
        out.push((h.core, h.vector, 0.5 * state.n as f64 * b * (hg.dg_mu + hg.dg_nu)));
    }
    Ok(out)
}

/// Least-squares force vectors from hop projections `F_i·a`.
pub fn forces_from_projections(m: usize, proj: &[(usize, Vec2, f64)]) -> Vec<Vec2> {
    (0..m)
        .map(|i| {
            let mut mat = crate::geom::Sym2::default();
            let mut rhs = Vec2::ZERO;
            for &(c, a, v) in proj {
                if c == i {
                    mat = mat.add(crate::geom::Sym2::outer(a));
                    rhs += a * v;
                }
            }
            mat.solve(rhs).unwrap_or(Vec2::ZERO)
        })
        .collect()
}

/// Axis-aligned grid over the `2m` macroscopic coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl MeshSpec {
    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    fn coord(&self, d: usize, k: usize) -> f64 {
        if self.counts[d] <= 1 {
            return self.lo[d];
        }
        self.lo[d] + (self.hi[d] - self.lo[d]) * k as f64 / (self.counts[d] - 1) as f64
    }
}

/// Multilinear interpolation of a force model on a grid, filled lazily and
/// cached per node.
pub struct ForceMesh {
    pub spec: MeshSpec,
    pub signs: Vec<i8>,
    model: Arc<dyn ForceModel>,
    nodes: DashMap<Vec<usize>, Option<Vec<Vec2>>>,
    misses: Mutex<usize>,
}

impl ForceMesh {
    pub fn new(model: Arc<dyn ForceModel>, spec: MeshSpec, signs: Vec<i8>) -> Result<Self> {
        if spec.dims() != 2 * signs.len() || spec.hi.len() != spec.dims() || spec.counts.len() != spec.dims() {
            return Err(Error::InvalidInput("mesh dimension must be 2m".into()));
        }
        Ok(ForceMesh { spec, signs, model, nodes: DashMap::new(), misses: Mutex::new(0) })
    }

    fn node_point(&self, idx: &[usize]) -> Vec<Vec2> {
        (0..self.signs.len())
            .map(|i| Vec2::new(self.spec.coord(2 * i, idx[2 * i]), self.spec.coord(2 * i + 1, idx[2 * i + 1])))
            .collect()
    }

    fn node(&self, idx: &[usize]) -> Option<Vec<Vec2>> {
        if let Some(v) = self.nodes.get(idx) {
            return v.clone();
        }
        let v = self.model.forces(&self.node_point(idx), &self.signs).ok();
        self.nodes.insert(idx.to_vec(), v.clone());
        v
    }

    /// Fills the listed nodes, in parallel when enabled.
    pub fn prefill(&self, nodes: &[Vec<usize>], exec: Exec) {
        map_slice(exec, nodes, |idx| {
            self.node(idx);
        });
    }

    /// Every node of the grid.
    pub fn all_nodes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for &c in &self.spec.counts {
            out = out.into_iter().flat_map(|v| (0..c).map(move |k| { let mut w = v.clone(); w.push(k); w })).collect();
        }
        out
    }

    pub fn cached_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn misses(&self) -> usize {
        *self.misses.lock()
    }

    fn flat(x: &[Vec2]) -> Vec<f64> {
        x.iter().flat_map(|p| [p.x, p.y]).collect()
    }
}

impl ForceModel for ForceMesh {
    fn kind(&self) -> LatticeKind {
        self.model.kind()
    }

    fn forces(&self, x: &[Vec2], b: &[i8]) -> Result<Vec<Vec2>> {
        if b != self.signs.as_slice() {
            return Err(Error::InvalidInput("mesh built for different signs".into()));
        }
        let q = Self::flat(x);
        let dims = self.spec.dims();
        let mut base = vec![0usize; dims];
        let mut frac = vec![0.0; dims];
        for d in 0..dims {
            let c = self.spec.counts[d];
            if c <= 1 {
                continue;
            }
            let s = (q[d] - self.spec.lo[d]) / (self.spec.hi[d] - self.spec.lo[d]) * (c - 1) as f64;
            if !(-1e-9..=(c - 1) as f64 + 1e-9).contains(&s) {
                *self.misses.lock() += 1;
                return Err(Error::ForceMeshMiss(q));
            }
            let k = (s.floor().max(0.0) as usize).min(c - 2);
            base[d] = k;
            frac[d] = (s - k as f64).clamp(0.0, 1.0);
        }
        let mut acc = vec![Vec2::ZERO; x.len()];
        let mut seen: HashMap<Vec<usize>, ()> = HashMap::new();
        for mask in 0..(1usize << dims) {
            let mut w = 1.0;
            let mut idx = base.clone();
            for d in 0..dims {
                let up = mask >> d & 1 == 1;
                if self.spec.counts[d] <= 1 {
                    if up {
                        w = 0.0;
                    }
                    continue;
                }
                if up {
                    idx[d] += 1;
                    w *= frac[d];
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            if w == 0.0 || seen.insert(idx.clone(), ()).is_some() {
                continue;
            }
            match self.node(&idx) {
                Some(f) => {
                    for (a, v) in acc.iter_mut().zip(f) {
                        *a += v * w;
                    }
                }
                None => {
                    *self.misses.lock() += 1;
                    return Err(Error::ForceMeshMiss(q));
                }
            }
        }
        Ok(acc)
    }
}
