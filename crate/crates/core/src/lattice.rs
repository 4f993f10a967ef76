//! The square, triangular and hexagonal lattice complexes and their duals.
//!
//! Every lattice is stored as a periodic CW complex: a Bravais basis, a set of
//! vertex sublattices, edge types and face types, all given relative to a unit
//! cell. Cells are addressed by integer cell coordinates plus a type tag.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

/// The three lattice complexes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LatticeKind {
    Sq,
    Tr,
    Hx,
}

impl LatticeKind {
    pub const ALL: [LatticeKind; 3] = [LatticeKind::Sq, LatticeKind::Tr, LatticeKind::Hx];
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LatticeKind::Sq => "Sq",
            LatticeKind::Tr => "Tr",
            LatticeKind::Hx => "Hx",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for LatticeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sq" | "square" => Ok(LatticeKind::Sq),
            "tr" | "triangular" => Ok(LatticeKind::Tr),
            "hx" | "hexagonal" | "honeycomb" => Ok(LatticeKind::Hx),
            other => Err(format!("unknown lattice kind `{other}`")),
        }
    }
}

/// Geometry of the dual complex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualKind {
    Sq,
    Tr,
    /// Hexagonal multilattice made of two translated triangular lattices.
    HxMultilattice,
}

/// `e_i = R4^{i-1}(1,0)`.
pub fn e_dir(i: usize) -> Vec2 {
    Vec2::polar((i as f64 - 1.0) * PI / 2.0)
}

/// `a_j = R6^{j-1}(1,0)`.
pub fn a_dir(j: usize) -> Vec2 {
    Vec2::polar((j as f64 - 1.0) * PI / 3.0)
}

/// `a*_j = (a_{2j} + a_{2j-1}) / 3`, the hop vectors of the upward sublattice of
/// the triangular dual.
pub fn a_star(j: usize) -> Vec2 {
    (a_dir(2 * j) + a_dir(2 * j - 1)) / 3.0
}

/// Integer cell key `(i, j, type)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub i: i32,
    pub j: i32,
    pub t: u8,
}

impl CellKey {
    pub const fn new(i: i32, j: i32, t: u8) -> Self {
        CellKey { i, j, t }
    }

    pub fn shifted(self, s: [i32; 2]) -> Self {
        CellKey { i: self.i + s[0], j: self.j + s[1], t: self.t }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{};{})", self.i, self.j, self.t)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct EdgeType {
    pub tail: u8,
    pub head: u8,
    pub head_shift: [i32; 2],
}

#[derive(Clone, Debug)]
pub(crate) struct FaceType {
    /// Vertices in counterclockwise order as `(sublattice, shift)`.
    pub verts: Vec<(u8, [i32; 2])>,
}

/// An oriented edge in a face boundary or vertex star, relative to an anchor.
#[derive(Clone, Copy, Debug)]
pub(crate) struct EdgeRef {
    pub t: u8,
    pub shift: [i32; 2],
    pub sign: i8,
}

/// A face incident to an edge or vertex, relative to an anchor.
#[derive(Clone, Copy, Debug)]
pub(crate) struct FaceRef {
    pub t: u8,
    pub shift: [i32; 2],
}

/// Periodic CW structure shared by all cells of one lattice.
#[derive(Clone, Debug)]
pub(crate) struct Periodic {
    pub basis: [Vec2; 2],
    pub vsub: Vec<Vec2>,
    pub edges: Vec<EdgeType>,
    pub faces: Vec<FaceType>,
    /// Oriented boundary edges of each face type (sign +1 when the edge runs
    /// counterclockwise around the face).
    pub face_edges: Vec<Vec<EdgeRef>>,
    /// Incident edges of each vertex sublattice; sign is +1 at the head.
    pub vertex_edges: Vec<Vec<EdgeRef>>,
    /// Faces incident to each vertex sublattice.
    pub vertex_faces: Vec<Vec<FaceRef>>,
    /// Face to the left and to the right of each edge type.
    pub edge_left: Vec<FaceRef>,
    pub edge_right: Vec<FaceRef>,
    pub face_center: Vec<Vec2>,
}

impl Periodic {
    fn new(basis: [Vec2; 2], vsub: Vec<Vec2>, edges: Vec<EdgeType>, faces: Vec<FaceType>) -> Self {
        let mut p = Periodic {
            basis,
            vsub,
            edges,
            faces,
            face_edges: vec![],
            vertex_edges: vec![],
            vertex_faces: vec![],
            edge_left: vec![],
            edge_right: vec![],
            face_center: vec![],
        };
        p.derive_tables();
        p
    }

    pub fn cell_origin(&self, i: i32, j: i32) -> Vec2 {
        self.basis[0] * i as f64 + self.basis[1] * j as f64
    }

    pub fn vertex_pos(&self, k: CellKey) -> Vec2 {
        self.cell_origin(k.i, k.j) + self.vsub[k.t as usize]
    }

    pub fn face_pos(&self, k: CellKey) -> Vec2 {
        self.cell_origin(k.i, k.j) + self.face_center[k.t as usize]
    }

    pub fn edge_endpoints(&self, k: CellKey) -> (CellKey, CellKey) {
        let et = &self.edges[k.t as usize];
        (CellKey::new(k.i, k.j, et.tail), CellKey::new(k.i + et.head_shift[0], k.j + et.head_shift[1], et.head))
    }

    pub fn face_vertices(&self, k: CellKey) -> Vec<CellKey> {
        self.faces[k.t as usize]
            .verts
            .iter()
            .map(|&(s, sh)| CellKey::new(k.i + sh[0], k.j + sh[1], s))
            .collect()
    }

    /// Fractional cell coordinates of a point.
    pub fn to_cell_coords(&self, p: Vec2) -> (f64, f64) {
        let [b1, b2] = self.basis;
        let det = b1.cross(b2);
        (p.cross(b2) / det, b1.cross(p) / det)
    }

    fn derive_tables(&mut self) {
        let nv = self.vsub.len();
        let nf = self.faces.len();
        // Face boundary edges.
        let mut face_edges = Vec::with_capacity(nf);
        for f in &self.faces {
            let mut refs = Vec::new();
            let m = f.verts.len();
            for k in 0..m {
                let (s0, sh0) = f.verts[k];
                let (s1, sh1) = f.verts[(k + 1) % m];
                refs.push(self.find_edge(s0, sh0, s1, sh1));
            }
            face_edges.push(refs);
        }
        // Vertex stars.
        let mut vertex_edges = vec![Vec::new(); nv];
        for (t, e) in self.edges.iter().enumerate() {
            vertex_edges[e.tail as usize].push(EdgeRef { t: t as u8, shift: [0, 0], sign: -1 });
            vertex_edges[e.head as usize].push(EdgeRef {
                t: t as u8,
                shift: [-e.head_shift[0], -e.head_shift[1]],
                sign: 1,
            });
        }
        let mut vertex_faces = vec![Vec::new(); nv];
        for (t, f) in self.faces.iter().enumerate() {
            for &(s, sh) in &f.verts {
                vertex_faces[s as usize].push(FaceRef { t: t as u8, shift: [-sh[0], -sh[1]] });
            }
        }
        // Left/right faces of each edge type.
        let ne = self.edges.len();
        let mut left = vec![None; ne];
        let mut right = vec![None; ne];
        for (ft, refs) in face_edges.iter().enumerate() {
            for r in refs {
                let fr = FaceRef { t: ft as u8, shift: [-r.shift[0], -r.shift[1]] };
                if r.sign > 0 {
                    left[r.t as usize] = Some(fr);
                } else {
                    right[r.t as usize] = Some(fr);
                }
            }
        }
        let face_center = self
            .faces
            .iter()
            .map(|f| {
                let mut c = Vec2::ZERO;
                for &(s, sh) in &f.verts {
                    c += self.cell_origin(sh[0], sh[1]) + self.vsub[s as usize];
                }
                c / f.verts.len() as f64
            })
            .collect();
        self.face_edges = face_edges;
        self.vertex_edges = vertex_edges;
        self.vertex_faces = vertex_faces;
        self.edge_left = left.into_iter().map(|x| x.expect("edge without left face")).collect();
        self.edge_right = right.into_iter().map(|x| x.expect("edge without right face")).collect();
        self.face_center = face_center;
    }

    fn find_edge(&self, s0: u8, sh0: [i32; 2], s1: u8, sh1: [i32; 2]) -> EdgeRef {
        for (t, e) in self.edges.iter().enumerate() {
            if e.tail == s0 && e.head == s1 && [sh1[0] - sh0[0], sh1[1] - sh0[1]] == e.head_shift {
                return EdgeRef { t: t as u8, shift: sh0, sign: 1 };
            }
            if e.tail == s1 && e.head == s0 && [sh0[0] - sh1[0], sh0[1] - sh1[1]] == e.head_shift {
                return EdgeRef { t: t as u8, shift: sh1, sign: -1 };
            }
        }
        panic!("face boundary segment is not a lattice edge");
    }
}

/// A lattice complex together with its dual data and constants.
#[derive(Clone, Debug, Serialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    /// Primal nearest-neighbour directions, one star per vertex sublattice.
    pub neighbor_dirs: Vec<Vec<Vec2>>,
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "V")]
    pub v: u32,
    pub dual_kind: DualKind,
    /// Dual hop vectors, one star per dual sublattice (face type).
    pub dual_neighbor_dirs: Vec<Vec<Vec2>>,
    #[serde(rename = "K_star")]
    pub k_star: u32,
    #[serde(rename = "V_star")]
    pub v_star: u32,
    /// Dual nearest-neighbour distance `d^L`.
    pub d_hop: f64,
    #[serde(skip)]
    pub(crate) periodic: Arc<Periodic>,
}

impl LatticeSpec {
    /// Constant `c0 = 1/8 + dG*([0,a])/4` of the barrier asymptotics, with the
    /// signed full-lattice dual difference `dG*([0,a]) = -1/K*`.
    pub fn c0(&self) -> f64 {
        0.125 - 0.25 / self.k_star as f64
    }

    /// Number of dual sublattices (face types).
    pub fn dual_sublattices(&self) -> usize {
        self.periodic.faces.len()
    }

    pub fn basis(&self) -> [Vec2; 2] {
        self.periodic.basis
    }

    /// Position of a vertex cell.
    pub fn vertex_pos(&self, k: CellKey) -> Vec2 {
        self.periodic.vertex_pos(k)
    }

    /// Barycenter of a face cell, i.e. the position of the dual 0-cell.
    pub fn face_pos(&self, k: CellKey) -> Vec2 {
        self.periodic.face_pos(k)
    }

    /// Midpoint of an edge cell.
    pub fn edge_mid(&self, k: CellKey) -> Vec2 {
        let (a, b) = self.periodic.edge_endpoints(k);
        (self.vertex_pos(a) + self.vertex_pos(b)) * 0.5
    }

    /// Faces adjacent to `f` across each boundary edge, with the hop vector.
    pub fn face_neighbors(&self, f: CellKey) -> Vec<(CellKey, Vec2)> {
        let p = &self.periodic;
        let here = p.face_pos(f);
        p.face_edges[f.t as usize]
            .iter()
            .map(|r| {
                let ek = CellKey::new(f.i + r.shift[0], f.j + r.shift[1], r.t);
                let other = if r.sign > 0 { p.edge_right[r.t as usize] } else { p.edge_left[r.t as usize] };
                let g = CellKey::new(ek.i + other.shift[0], ek.j + other.shift[1], other.t);
                (g, p.face_pos(g) - here)
            })
            .collect()
    }

    /// Nearest face (dual 0-cell) to a point, searching nearby cells.
    pub fn nearest_face(&self, x: Vec2) -> CellKey {
        let p = &self.periodic;
        let (ci, cj) = p.to_cell_coords(x);
        let (ci, cj) = (ci.floor() as i32, cj.floor() as i32);
        let mut best = (f64::INFINITY, CellKey::new(0, 0, 0));
        for di in -2..=2 {
            for dj in -2..=2 {
                for t in 0..p.faces.len() {
                    let k = CellKey::new(ci + di, cj + dj, t as u8);
                    let d = p.face_pos(k).dist(x);
                    if d < best.0 - 1e-12 {
                        best = (d, k);
                    }
                }
            }
        }
        best.1
    }
}

/// Builds the lattice complex of the given kind.
pub fn build_lattice(kind: LatticeKind) -> LatticeSpec {
    let s3 = 3f64.sqrt();
    match kind {
        LatticeKind::Sq => {
            let per = Periodic::new(
                [e_dir(1), e_dir(2)],
                vec![Vec2::ZERO],
                vec![
                    EdgeType { tail: 0, head: 0, head_shift: [1, 0] },
                    EdgeType { tail: 0, head: 0, head_shift: [0, 1] },
                ],
                vec![FaceType { verts: vec![(0, [0, 0]), (0, [1, 0]), (0, [1, 1]), (0, [0, 1])] }],
            );
            let star: Vec<Vec2> = (1..=4).map(e_dir).collect();
            LatticeSpec {
                kind,
                neighbor_dirs: vec![star.clone()],
                k: 4,
                v: 4,
                dual_kind: DualKind::Sq,
                dual_neighbor_dirs: vec![star],
                k_star: 4,
                v_star: 4,
                d_hop: 1.0,
                periodic: Arc::new(per),
            }
        }
        LatticeKind::Tr => {
            let per = Periodic::new(
                [a_dir(1), a_dir(2)],
                vec![Vec2::ZERO],
                vec![
                    EdgeType { tail: 0, head: 0, head_shift: [1, 0] },
                    EdgeType { tail: 0, head: 0, head_shift: [0, 1] },
                    EdgeType { tail: 0, head: 0, head_shift: [-1, 1] },
                ],
                vec![
                    FaceType { verts: vec![(0, [0, 0]), (0, [1, 0]), (0, [0, 1])] },
                    FaceType { verts: vec![(0, [1, 0]), (0, [1, 1]), (0, [0, 1])] },
                ],
            );
            let up: Vec<Vec2> = (1..=3).map(a_star).collect();
            let down: Vec<Vec2> = up.iter().map(|&v| -v).collect();
            LatticeSpec {
                kind,
                neighbor_dirs: vec![(1..=6).map(a_dir).collect()],
                k: 6,
                v: 6,
                dual_kind: DualKind::HxMultilattice,
                dual_neighbor_dirs: vec![up, down],
                k_star: 3,
                v_star: 2,
                d_hop: s3 / 3.0,
                periodic: Arc::new(per),
            }
        }
        LatticeKind::Hx => {
            // A sublattice sqrt(3) R4 Tr, B sublattice A + e1.
            let b1 = a_dir(1).perp() * s3;
            let b2 = a_dir(2).perp() * s3;
            let per = Periodic::new(
                [b1, b2],
                vec![Vec2::ZERO, e_dir(1)],
                vec![
                    EdgeType { tail: 0, head: 1, head_shift: [0, 0] },
                    EdgeType { tail: 0, head: 1, head_shift: [0, 1] },
                    EdgeType { tail: 0, head: 1, head_shift: [-1, 1] },
                ],
                vec![FaceType {
                    verts: vec![(0, [0, 0]), (1, [0, 0]), (0, [1, -1]), (1, [1, 0]), (0, [1, 0]), (1, [0, 1])],
                }],
            );
            let dual: Vec<Vec2> = (1..=6).map(|j| a_dir(j).perp() * s3).collect();
            LatticeSpec {
                kind,
                neighbor_dirs: vec![
                    vec![a_dir(1), a_dir(3), a_dir(5)],
                    vec![a_dir(2), a_dir(4), a_dir(6)],
                ],
                k: 3,
                v: 2,
                dual_kind: DualKind::Tr,
                dual_neighbor_dirs: vec![dual],
                k_star: 6,
                v_star: 6,
                d_hop: s3,
                periodic: Arc::new(per),
            }
        }
    }
}
