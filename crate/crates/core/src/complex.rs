//! Finite subcomplexes induced by scaled convex lattice polygons, together with
//! their duals.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{point_segment_dist, Vec2};
use crate::lattice::{build_lattice, CellKey, LatticeKind, LatticeSpec};

/// A closed convex polygon with corners on lattice points.
///
/// Corners are integer coordinates in the Bravais basis of the lattice
/// (`e1, e2` for Sq, `a1, a2` for Tr, the A-sublattice basis for Hx).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexLatticePolygon {
    pub corners: Vec<[i32; 2]>,
}

impl ConvexLatticePolygon {
    pub fn new(corners: Vec<[i32; 2]>) -> Self {
        ConvexLatticePolygon { corners }
    }

    /// The unit square `[0,1]^2` (meaningful on Sq).
    pub fn unit_square() -> Self {
        Self::new(vec![[0, 0], [1, 0], [1, 1], [0, 1]])
    }

    /// Regular hexagon around the origin spanned by the six shortest basis
    /// combinations (meaningful on Tr and Hx).
    pub fn hexagon() -> Self {
        Self::new(vec![[1, 0], [0, 1], [-1, 1], [-1, 0], [0, -1], [1, -1]])
    }

    /// A default domain for each lattice.
    pub fn default_for(kind: LatticeKind) -> Self {
        match kind {
            LatticeKind::Sq => Self::unit_square(),
            LatticeKind::Tr | LatticeKind::Hx => Self::hexagon(),
        }
    }

    /// Real corner positions for the given lattice.
    pub fn realize(&self, spec: &LatticeSpec) -> Result<Polygon> {
        let [b1, b2] = spec.basis();
        let pts: Vec<Vec2> = self.corners.iter().map(|c| b1 * c[0] as f64 + b2 * c[1] as f64).collect();
        Polygon::new(pts)
    }
}

/// A convex polygon in real coordinates, counterclockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub corners: Vec<Vec2>,
}

impl Polygon {
    pub fn new(corners: Vec<Vec2>) -> Result<Self> {
        let m = corners.len();
        if m < 3 {
            return Err(Error::NotConvex);
        }
        let mut any_turn = false;
        for k in 0..m {
            let a = corners[k];
            let b = corners[(k + 1) % m];
            let c = corners[(k + 2) % m];
            let cr = (b - a).cross(c - b);
            if cr < -1e-12 {
                return Err(Error::NotConvex);
            }
            if cr > 1e-12 {
                any_turn = true;
            }
        }
        if !any_turn {
            return Err(Error::NotConvex);
        }
        Ok(Polygon { corners })
    }

    pub fn scaled(&self, s: f64) -> Polygon {
        Polygon { corners: self.corners.iter().map(|&c| c * s).collect() }
    }

    /// Signed distance to the boundary: positive inside.
    pub fn inner_distance(&self, p: Vec2) -> f64 {
        let m = self.corners.len();
        let mut inside = true;
        let mut d = f64::INFINITY;
        for k in 0..m {
            let a = self.corners[k];
            let b = self.corners[(k + 1) % m];
            if (b - a).cross(p - a) < 0.0 {
                inside = false;
            }
            d = d.min(point_segment_dist(p, a, b));
        }
        if inside {
            d
        } else {
            -d
        }
    }

    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        self.inner_distance(p) >= -tol
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in &self.corners {
            lo.x = lo.x.min(c.x);
            lo.y = lo.y.min(c.y);
            hi.x = hi.x.max(c.x);
            hi.y = hi.y.max(c.y);
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.corners {
            for b in &self.corners {
                d = d.max(a.dist(*b));
            }
        }
        d
    }

    pub fn centroid(&self) -> Vec2 {
        let mut c = Vec2::ZERO;
        for p in &self.corners {
            c += *p;
        }
        c / self.corners.len() as f64
    }
}

/// A signed cell of the primal complex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub dim: u8,
    pub anchor: [i32; 2],
    pub orient: i8,
    pub sublattice: u8,
}

impl Cell {
    pub fn new(dim: u8, key: CellKey, orient: i8) -> Self {
        Cell { dim, anchor: [key.i, key.j], orient, sublattice: key.t }
    }

    pub fn key(&self) -> CellKey {
        CellKey::new(self.anchor[0], self.anchor[1], self.sublattice)
    }

    pub fn neg(self) -> Cell {
        Cell { orient: -self.orient, ..self }
    }
}

/// A signed cell of the dual complex; `dim` is the dual dimension and the key
/// is that of the primal cell of dimension `2 - dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DualCell {
    pub dim: u8,
    pub primal: CellKey,
    pub orient: i8,
}

/// A signed chain of cells.
pub type Chain = Vec<(Cell, i8)>;

/// Boundary of a cell in the full lattice complex.
pub fn boundary(spec: &LatticeSpec, e: Cell) -> Chain {
    let p = &spec.periodic;
    let k = e.key();
    match e.dim {
        0 => vec![],
        1 => {
            let (t, h) = p.edge_endpoints(k);
            vec![(Cell::new(0, h, 1), e.orient), (Cell::new(0, t, 1), -e.orient)]
        }
        _ => p.face_edges[k.t as usize]
            .iter()
            .map(|r| (Cell::new(1, k.shifted(r.shift).with_t(r.t), 1), r.sign * e.orient))
            .collect(),
    }
}

/// Coboundary of a cell in the full lattice complex.
pub fn full_coboundary(spec: &LatticeSpec, e: Cell) -> Chain {
    let p = &spec.periodic;
    let k = e.key();
    match e.dim {
        0 => p.vertex_edges[k.t as usize]
            .iter()
            .map(|r| (Cell::new(1, k.shifted(r.shift).with_t(r.t), 1), r.sign * e.orient))
            .collect(),
        1 => {
            let l = p.edge_left[k.t as usize];
            let r = p.edge_right[k.t as usize];
            vec![
                (Cell::new(2, k.shifted(l.shift).with_t(l.t), 1), e.orient),
                (Cell::new(2, k.shifted(r.shift).with_t(r.t), 1), -e.orient),
            ]
        }
        _ => vec![],
    }
}

trait WithT {
    fn with_t(self, t: u8) -> CellKey;
}

impl WithT for CellKey {
    fn with_t(self, t: u8) -> CellKey {
        CellKey { t, ..self }
    }
}

/// A finite subcomplex induced by a vertex set, with its dual.
///
/// Index conventions: primal `p`-cells are numbered in `vertices`, `edges`,
/// `faces`; dual 0-cells (faces touching the vertex set) in `dual_nodes`, dual
/// 1-cells (edges touching the vertex set) in `dual_edges`; dual 2-cells are
/// the vertices. All lists are sorted by position (row-major in `y`, then `x`).
#[derive(Debug)]
pub struct DomainComplex {
    pub spec: LatticeSpec,
    pub polygon: Option<ConvexLatticePolygon>,
    pub n: u32,
    pub vertices: Vec<CellKey>,
    pub vertex_pos: Vec<Vec2>,
    pub vertex_ext: Vec<bool>,
    pub edges: Vec<CellKey>,
    /// `(tail, head)` vertex indices of each edge.
    pub edge_ends: Vec<(usize, usize)>,
    pub edge_ext: Vec<bool>,
    pub faces: Vec<CellKey>,
    /// Boundary edges of each face with the incidence sign.
    pub face_edges: Vec<Vec<(usize, i8)>>,
    pub dual_nodes: Vec<CellKey>,
    pub dual_node_pos: Vec<Vec2>,
    /// Index into `faces` for interior dual nodes.
    pub dual_node_face: Vec<Option<usize>>,
    pub face_dual_node: Vec<usize>,
    pub dual_edges: Vec<CellKey>,
    /// `(right, left)` dual node indices of each dual edge (the dual edge runs
    /// from right to left).
    pub dual_edge_ends: Vec<(usize, usize)>,
    /// Index into `edges` for interior dual edges.
    pub dual_edge_edge: Vec<Option<usize>>,
    pub edge_dual_edge: Vec<usize>,
    /// Dual edges around each vertex with incidence sign (+1 at the head).
    pub vertex_dual_edges: Vec<Vec<(usize, i8)>>,
    /// Per face: distance from the barycenter to the nearest exterior vertex.
    pub face_ext_dist: Vec<f64>,
    vertex_index: HashMap<CellKey, usize>,
    edge_index: HashMap<CellKey, usize>,
    face_index: HashMap<CellKey, usize>,
    dual_node_index: HashMap<CellKey, usize>,
    dual_edge_index: HashMap<CellKey, usize>,
}

/// Summary exported as JSON.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DomainSummary {
    pub kind: LatticeKind,
    pub n: u32,
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub ext_vertices: usize,
    pub int_vertices: usize,
    pub ext_edges: usize,
    pub dual_nodes: usize,
    pub ext_dual_nodes: usize,
    pub dual_edges: usize,
    pub ext_dual_edges: usize,
    pub euler_characteristic: i64,
}

fn sort_by_pos(keys: &mut [CellKey], pos: impl Fn(CellKey) -> Vec2) {
    keys.sort_by(|a, b| {
        let (pa, pb) = (pos(*a), pos(*b));
        (pa.y, pa.x, a.t).partial_cmp(&(pb.y, pb.x, b.t)).unwrap()
    });
}

/// Builds the largest induced subcomplex of `n * polygon` whose primal and dual
/// cells lie inside the scaled polygon.
pub fn build_domain(spec: &LatticeSpec, polygon: &ConvexLatticePolygon, n: u32) -> Result<DomainComplex> {
    let poly = polygon.realize(spec)?.scaled(n as f64);
    let tol = 1e-9 * (1.0 + n as f64);
    let p = &spec.periodic;
    let (lo, hi) = poly.bbox();
    let corners = [lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];
    let (mut imin, mut imax, mut jmin, mut jmax) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
    for c in corners {
        let (ci, cj) = p.to_cell_coords(c);
        imin = imin.min(ci.floor() as i32 - 2);
        imax = imax.max(ci.ceil() as i32 + 2);
        jmin = jmin.min(cj.floor() as i32 - 2);
        jmax = jmax.max(cj.ceil() as i32 + 2);
    }
    let mut verts = HashSet::new();
    for i in imin..=imax {
        for j in jmin..=jmax {
            for s in 0..p.vsub.len() {
                let k = CellKey::new(i, j, s as u8);
                if !poly.contains(p.vertex_pos(k), tol) {
                    continue;
                }
                // Every dual cell must sit inside: all faces around the vertex
                // need their barycenters in the polygon.
                let ok = p.vertex_faces[s]
                    .iter()
                    .all(|fr| poly.contains(p.face_pos(k.shifted(fr.shift).with_t(fr.t)), tol));
                if ok {
                    verts.insert(k);
                }
            }
        }
    }
    let mut dom = induced_complex(spec, &verts)?;
    dom.polygon = Some(polygon.clone());
    dom.n = n;
    if dom.faces.len() < 2 {
        return Err(Error::DomainTooSmall(format!("only {} interior dual points at n = {n}", dom.faces.len())));
    }
    Ok(dom)
}

/// Builds the induced subcomplex on a vertex set, keeping the largest connected
/// component, and checks simple connectivity via the Euler characteristic.
pub fn induced_complex(spec: &LatticeSpec, verts: &HashSet<CellKey>) -> Result<DomainComplex> {
    let p = spec.periodic.clone();
    if verts.is_empty() {
        return Err(Error::DomainTooSmall("no lattice points".into()));
    }
    // Largest connected component.
    let mut seen: HashSet<CellKey> = HashSet::new();
    let mut best: Vec<CellKey> = Vec::new();
    let mut sorted: Vec<CellKey> = verts.iter().copied().collect();
    sorted.sort();
    for &start in &sorted {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = vec![start];
        seen.insert(start);
        let mut q = VecDeque::from([start]);
        while let Some(v) = q.pop_front() {
            for r in &p.vertex_edges[v.t as usize] {
                let ek = v.shifted(r.shift).with_t(r.t);
                let (a, b) = p.edge_endpoints(ek);
                let w = if a == v { b } else { a };
                if verts.contains(&w) && seen.insert(w) {
                    comp.push(w);
                    q.push_back(w);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    let vset: HashSet<CellKey> = best.iter().copied().collect();
    let mut vertices = best;
    sort_by_pos(&mut vertices, |k| p.vertex_pos(k));
    let vertex_index: HashMap<CellKey, usize> = vertices.iter().enumerate().map(|(i, &k)| (k, i)).collect();

    // Edges touching the vertex set (dual 1-cells) and those inside it.
    let mut touch_edges = HashSet::new();
    let mut touch_faces = HashSet::new();
    for &v in &vertices {
        for r in &p.vertex_edges[v.t as usize] {
            touch_edges.insert(v.shifted(r.shift).with_t(r.t));
        }
        for fr in &p.vertex_faces[v.t as usize] {
            touch_faces.insert(v.shifted(fr.shift).with_t(fr.t));
        }
    }
    let mut edges: Vec<CellKey> = touch_edges
        .iter()
        .copied()
        .filter(|&e| {
            let (a, b) = p.edge_endpoints(e);
            vset.contains(&a) && vset.contains(&b)
        })
        .collect();
    sort_by_pos(&mut edges, |k| spec.edge_mid(k));
    let edge_index: HashMap<CellKey, usize> = edges.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let edge_ends: Vec<(usize, usize)> = edges
        .iter()
        .map(|&e| {
            let (a, b) = p.edge_endpoints(e);
            (vertex_index[&a], vertex_index[&b])
        })
        .collect();

    let mut faces: Vec<CellKey> = touch_faces
        .iter()
        .copied()
        .filter(|&f| p.face_vertices(f).iter().all(|v| vset.contains(v)))
        .collect();
    sort_by_pos(&mut faces, |k| p.face_pos(k));
    let face_index: HashMap<CellKey, usize> = faces.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let face_edges: Vec<Vec<(usize, i8)>> = faces
        .iter()
        .map(|&f| {
            p.face_edges[f.t as usize]
                .iter()
                .map(|r| (edge_index[&f.shifted(r.shift).with_t(r.t)], r.sign))
                .collect()
        })
        .collect();

    let euler = vertices.len() as i64 - edges.len() as i64 + faces.len() as i64;
    if euler != 1 {
        return Err(Error::DomainTooSmall(format!("induced complex is not simply connected (chi = {euler})")));
    }

    let vertex_ext: Vec<bool> = vertices
        .iter()
        .map(|&v| {
            p.vertex_edges[v.t as usize]
                .iter()
                .any(|r| !edge_index.contains_key(&v.shifted(r.shift).with_t(r.t)))
        })
        .collect();
    let edge_ext: Vec<bool> = edges
        .iter()
        .map(|&e| {
            let l = p.edge_left[e.t as usize];
            let r = p.edge_right[e.t as usize];
            !face_index.contains_key(&e.shifted(l.shift).with_t(l.t))
                || !face_index.contains_key(&e.shifted(r.shift).with_t(r.t))
        })
        .collect();

    let mut dual_nodes: Vec<CellKey> = touch_faces.into_iter().collect();
    sort_by_pos(&mut dual_nodes, |k| p.face_pos(k));
    let dual_node_index: HashMap<CellKey, usize> = dual_nodes.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let dual_node_pos: Vec<Vec2> = dual_nodes.iter().map(|&k| p.face_pos(k)).collect();
    let dual_node_face: Vec<Option<usize>> = dual_nodes.iter().map(|k| face_index.get(k).copied()).collect();
    let face_dual_node: Vec<usize> = faces.iter().map(|k| dual_node_index[k]).collect();

    let mut dual_edges: Vec<CellKey> = touch_edges.into_iter().collect();
    sort_by_pos(&mut dual_edges, |k| spec.edge_mid(k));
    let dual_edge_index: HashMap<CellKey, usize> = dual_edges.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let dual_edge_ends: Vec<(usize, usize)> = dual_edges
        .iter()
        .map(|&e| {
            let l = p.edge_left[e.t as usize];
            let r = p.edge_right[e.t as usize];
            (
                dual_node_index[&e.shifted(r.shift).with_t(r.t)],
                dual_node_index[&e.shifted(l.shift).with_t(l.t)],
            )
        })
        .collect();
    let dual_edge_edge: Vec<Option<usize>> = dual_edges.iter().map(|k| edge_index.get(k).copied()).collect();
    let edge_dual_edge: Vec<usize> = edges.iter().map(|k| dual_edge_index[k]).collect();
    let vertex_dual_edges: Vec<Vec<(usize, i8)>> = vertices
        .iter()
        .map(|&v| {
            p.vertex_edges[v.t as usize]
                .iter()
                .map(|r| (dual_edge_index[&v.shifted(r.shift).with_t(r.t)], r.sign))
                .collect()
        })
        .collect();

    let ext_pos: Vec<Vec2> = vertices
        .iter()
        .zip(&vertex_ext)
        .filter(|(_, &x)| x)
        .map(|(&v, _)| p.vertex_pos(v))
        .collect();
    let face_ext_dist: Vec<f64> = faces
        .iter()
        .map(|&f| {
            let c = p.face_pos(f);
            ext_pos.iter().map(|&q| q.dist(c)).fold(f64::INFINITY, f64::min)
        })
        .collect();
    let vertex_pos = vertices.iter().map(|&k| p.vertex_pos(k)).collect();

    Ok(DomainComplex {
        spec: spec.clone(),
        polygon: None,
        n: 0,
        vertices,
        vertex_pos,
        vertex_ext,
        edges,
        edge_ends,
        edge_ext,
        faces,
        face_edges,
        dual_nodes,
        dual_node_pos,
        dual_node_face,
        face_dual_node,
        dual_edges,
        dual_edge_ends,
        dual_edge_edge,
        edge_dual_edge,
        vertex_dual_edges,
        face_ext_dist,
        vertex_index,
        edge_index,
        face_index,
        dual_node_index,
        dual_edge_index,
    })
}

impl DomainComplex {
    pub fn kind(&self) -> LatticeKind {
        self.spec.kind
    }

    pub fn vertex_id(&self, k: CellKey) -> Option<usize> {
        self.vertex_index.get(&k).copied()
    }

    pub fn edge_id(&self, k: CellKey) -> Option<usize> {
        self.edge_index.get(&k).copied()
    }

    pub fn face_id(&self, k: CellKey) -> Option<usize> {
        self.face_index.get(&k).copied()
    }

    pub fn dual_node_id(&self, k: CellKey) -> Option<usize> {
        self.dual_node_index.get(&k).copied()
    }

    pub fn dual_edge_id(&self, k: CellKey) -> Option<usize> {
        self.dual_edge_index.get(&k).copied()
    }

    pub fn face_pos(&self, f: usize) -> Vec2 {
        self.dual_node_pos[self.face_dual_node[f]]
    }

    /// Cell count of dimension `p`.
    pub fn count(&self, p: u8) -> usize {
        match p {
            0 => self.vertices.len(),
            1 => self.edges.len(),
            _ => self.faces.len(),
        }
    }

    /// Cell count of dual dimension `p` (including exterior dual cells).
    pub fn dual_count(&self, p: u8) -> usize {
        match p {
            0 => self.dual_nodes.len(),
            1 => self.dual_edges.len(),
            _ => self.vertices.len(),
        }
    }

    /// Interior flag of a dual cell of dimension `p`.
    pub fn dual_is_int(&self, p: u8, idx: usize) -> bool {
        match p {
            0 => self.dual_node_face[idx].is_some(),
            1 => self.dual_edge_edge[idx].is_some(),
            _ => true,
        }
    }

    /// The scaled polygon `nD`, if this domain was built from a polygon.
    pub fn scaled_polygon(&self) -> Option<Polygon> {
        self.polygon.as_ref().map(|p| p.realize(&self.spec).expect("validated polygon").scaled(self.n as f64))
    }

    /// The dual of a primal cell, with matching orientation.
    pub fn dual_cell(&self, e: Cell) -> Result<DualCell> {
        let k = e.key();
        let ok = match e.dim {
            0 => self.vertex_index.contains_key(&k),
            1 => self.edge_index.contains_key(&k),
            _ => self.face_index.contains_key(&k),
        };
        if !ok {
            return Err(Error::CellNotInDomain(format!("{}-cell {k}", e.dim)));
        }
        Ok(DualCell { dim: 2 - e.dim, primal: k, orient: e.orient })
    }

    /// Barycenter of a dual 0-cell or midpoint of the primal cell otherwise.
    pub fn dual_cell_pos(&self, a: DualCell) -> Vec2 {
        match a.dim {
            0 => self.spec.face_pos(a.primal),
            1 => self.spec.edge_mid(a.primal),
            _ => self.spec.vertex_pos(a.primal),
        }
    }

    /// Boundary of a primal cell restricted to the subcomplex.
    pub fn boundary(&self, e: Cell) -> Chain {
        boundary(&self.spec, e).into_iter().filter(|(c, _)| self.contains(*c)).collect()
    }

    /// Coboundary of a primal cell restricted to the subcomplex.
    pub fn coboundary(&self, e: Cell) -> Chain {
        full_coboundary(&self.spec, e).into_iter().filter(|(c, _)| self.contains(*c)).collect()
    }

    pub fn contains(&self, c: Cell) -> bool {
        let k = c.key();
        match c.dim {
            0 => self.vertex_index.contains_key(&k),
            1 => self.edge_index.contains_key(&k),
            _ => self.face_index.contains_key(&k),
        }
    }

    /// Boundary of a dual cell in the dual complex, as signed dual cells.
    ///
    /// Dual orientation is chosen so that `∂*e* = (δe)*` and `δ*e* = (∂e)*`.
    pub fn dual_boundary(&self, a: DualCell) -> Vec<(DualCell, i8)> {
        match a.dim {
            0 => vec![],
            1 => {
                let idx = self.dual_edge_index[&a.primal];
                let (r, l) = self.dual_edge_ends[idx];
                vec![
                    (DualCell { dim: 0, primal: self.dual_nodes[l], orient: 1 }, a.orient),
                    (DualCell { dim: 0, primal: self.dual_nodes[r], orient: 1 }, -a.orient),
                ]
            }
            _ => {
                let v = self.vertex_index[&a.primal];
                self.vertex_dual_edges[v]
                    .iter()
                    .map(|&(de, s)| (DualCell { dim: 1, primal: self.dual_edges[de], orient: 1 }, s * a.orient))
                    .collect()
            }
        }
    }

    /// Restricted coboundary of a dual cell in the dual complex.
    pub fn dual_coboundary(&self, a: DualCell) -> Vec<(DualCell, i8)> {
        match a.dim {
            0 => {
                // Dual edges e* with this node as an endpoint: the boundary edges
                // of the face, signed by the face incidence.
                let f = a.primal;
                let p = &self.spec.periodic;
                p.face_edges[f.t as usize]
                    .iter()
                    .filter_map(|r| {
                        let ek = f.shifted(r.shift).with_t(r.t);
                        self.dual_edge_index
                            .get(&ek)
                            .map(|_| (DualCell { dim: 1, primal: ek, orient: 1 }, r.sign * a.orient))
                    })
                    .collect()
            }
            1 => {
                let (t, h) = self.spec.periodic.edge_endpoints(a.primal);
                let mut out = Vec::new();
                if self.vertex_index.contains_key(&h) {
                    out.push((DualCell { dim: 2, primal: h, orient: 1 }, a.orient));
                }
                if self.vertex_index.contains_key(&t) {
                    out.push((DualCell { dim: 2, primal: t, orient: 1 }, -a.orient));
                }
                out
            }
            _ => vec![],
        }
    }

    pub fn summary(&self) -> DomainSummary {
        let ext_v = self.vertex_ext.iter().filter(|&&x| x).count();
        DomainSummary {
            kind: self.spec.kind,
            n: self.n,
            vertices: self.vertices.len(),
            edges: self.edges.len(),
            faces: self.faces.len(),
            ext_vertices: ext_v,
            int_vertices: self.vertices.len() - ext_v,
            ext_edges: self.edge_ext.iter().filter(|&&x| x).count(),
            dual_nodes: self.dual_nodes.len(),
            ext_dual_nodes: self.dual_nodes.len() - self.faces.len(),
            dual_edges: self.dual_edges.len(),
            ext_dual_edges: self.dual_edges.len() - self.edges.len(),
            euler_characteristic: self.vertices.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64,
        }
    }

    /// Interior dual neighbours of face `f` (face indices) with hop vectors.
    pub fn face_hops(&self, f: usize) -> Vec<(Option<usize>, Vec2)> {
        self.spec
            .face_neighbors(self.faces[f])
            .into_iter()
            .map(|(g, hop)| (self.face_index.get(&g).copied(), hop))
            .collect()
    }

    /// Primal edge crossed by the dual hop from face `p` to face `q`, with the
    /// sign `+1` when the dual edge runs from `p` to `q`.
    pub fn crossing_edge(&self, p: usize, q: usize) -> Option<(usize, i8)> {
        for &(e, _) in &self.face_edges[p] {
            let de = self.edge_dual_edge[e];
            let (r, l) = self.dual_edge_ends[de];
            let (np, nq) = (self.face_dual_node[p], self.face_dual_node[q]);
            if r == np && l == nq {
                return Some((e, 1));
            }
            if l == np && r == nq {
                return Some((e, -1));
            }
        }
        None
    }

    /// Nearest interior face to a point in lattice units.
    pub fn nearest_face(&self, x: Vec2) -> Option<usize> {
        self.face_id(self.spec.nearest_face(x))
    }
}

/// Convenience: lattice plus default polygon at scale `n`.
pub fn default_domain(kind: LatticeKind, n: u32) -> Result<Arc<DomainComplex>> {
    let spec = build_lattice(kind);
    Ok(Arc::new(build_domain(&spec, &ConvexLatticePolygon::default_for(kind), n)?))
}
