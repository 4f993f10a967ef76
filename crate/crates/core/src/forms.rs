//! Discrete p-forms on a domain complex and on its dual.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::complex::DomainComplex;
use crate::error::{Error, Result};

/// Which complex a form lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    Primal,
    Dual,
}

/// A real-valued p-form, stored densely by canonical cell index.
///
/// Primal forms are indexed by `vertices`/`edges`/`faces` of the domain; dual
/// forms by `dual_nodes`/`dual_edges`/`vertices` (dual 0, 1, 2-cells).
#[derive(Clone, Debug)]
pub struct Form {
    pub dom: Arc<DomainComplex>,
    pub side: Side,
    pub degree: u8,
    pub values: Vec<f64>,
}

/// An integer-valued p-form.
#[derive(Clone, Debug)]
pub struct IntForm {
    pub dom: Arc<DomainComplex>,
    pub side: Side,
    pub degree: u8,
    pub values: Vec<i64>,
}

fn cell_count(dom: &DomainComplex, side: Side, p: u8) -> usize {
    match side {
        Side::Primal => dom.count(p),
        Side::Dual => dom.dual_count(p),
    }
}

/// Exterior flag of a cell.
pub fn is_ext(dom: &DomainComplex, side: Side, p: u8, idx: usize) -> bool {
    match (side, p) {
        (Side::Primal, 0) => dom.vertex_ext[idx],
        (Side::Primal, 1) => dom.edge_ext[idx],
        (Side::Primal, _) => false,
        (Side::Dual, p) => !dom.dual_is_int(p, idx),
    }
}

impl Form {
    pub fn zeros(dom: &Arc<DomainComplex>, side: Side, degree: u8) -> Self {
        assert!(degree <= 2);
        let n = cell_count(dom, side, degree);
        Form { dom: dom.clone(), side, degree, values: vec![0.0; n] }
    }

    pub fn from_values(dom: &Arc<DomainComplex>, side: Side, degree: u8, values: Vec<f64>) -> Result<Self> {
        if degree > 2 {
            return Err(Error::DegreeOutOfRange(degree));
        }
        if values.len() != cell_count(dom, side, degree) {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                cell_count(dom, side, degree),
                values.len()
            )));
        }
        Ok(Form { dom: dom.clone(), side, degree, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Whether the form vanishes on every exterior cell.
    pub fn zero_on_ext(&self) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(i, &v)| v == 0.0 || !is_ext(&self.dom, self.side, self.degree, i))
    }

    fn check_pair(&self, o: &Form) -> Result<()> {
        if self.degree != o.degree {
            return Err(Error::DegreeMismatch(self.degree, o.degree));
        }
        if !Arc::ptr_eq(&self.dom, &o.dom) || self.side != o.side {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    pub fn add(&self, o: &Form) -> Result<Form> {
        self.check_pair(o)?;
        let values = self.values.iter().zip(&o.values).map(|(a, b)| a + b).collect();
        Ok(Form { values, ..self.clone() })
    }

    pub fn scale(&self, s: f64) -> Form {
        Form { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn inner(&self, o: &Form) -> Result<f64> {
        self.check_pair(o)?;
        Ok(self.values.iter().zip(&o.values).map(|(a, b)| a * b).sum())
    }

    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sum of the form over signed cells `(index, orientation)`.
    pub fn integrate(&self, cells: &[(usize, i8)]) -> f64 {
        cells.iter().map(|&(i, s)| s as f64 * self.values[i]).sum()
    }

    /// Writes `cell-id,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cell,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{v:.17e}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            side: Side,
            degree: u8,
            values: &'a [f64],
        }
        Ok(serde_json::to_string(&Out { side: self.side, degree: self.degree, values: &self.values })?)
    }
}

impl IntForm {
    pub fn zeros(dom: &Arc<DomainComplex>, side: Side, degree: u8) -> Self {
        let n = cell_count(dom, side, degree);
        IntForm { dom: dom.clone(), side, degree, values: vec![0; n] }
    }

    pub fn to_real(&self) -> Form {
        Form {
            dom: self.dom.clone(),
            side: self.side,
            degree: self.degree,
            values: self.values.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Integer differential.
    pub fn d(&self) -> Result<IntForm> {
        let mut out = IntForm::zeros(&self.dom, self.side, self.degree + 1);
        apply_d(&self.dom, self.side, self.degree, &self.values, &mut out.values)?;
        Ok(out)
    }

    /// Integer codifferential.
    pub fn delta(&self) -> Result<IntForm> {
        if self.degree == 0 {
            return Err(Error::DegreeOutOfRange(0));
        }
        let mut out = IntForm::zeros(&self.dom, self.side, self.degree - 1);
        apply_delta(&self.dom, self.side, self.degree, &self.values, &mut out.values)?;
        Ok(out)
    }
}

/// Generic ring used by the operator kernels.
pub trait Scalar: Copy + Default + std::ops::AddAssign + std::ops::Sub<Output = Self> + std::ops::Neg<Output = Self> {}
impl Scalar for f64 {}
impl Scalar for i64 {}

fn signed<T: Scalar>(s: i8, v: T) -> T {
    if s > 0 {
        v
    } else {
        -v
    }
}

/// `out = d(values)`; `out` must have the size of the `(p+1)`-cells.
pub fn apply_d<T: Scalar>(dom: &DomainComplex, side: Side, p: u8, x: &[T], out: &mut [T]) -> Result<()> {
    match (side, p) {
        (Side::Primal, 0) => {
            for (e, &(t, h)) in dom.edge_ends.iter().enumerate() {
                out[e] = x[h] - x[t];
            }
        }
        (Side::Primal, 1) => {
            for (f, es) in dom.face_edges.iter().enumerate() {
                let mut acc = T::default();
                for &(e, s) in es {
                    acc += signed(s, x[e]);
                }
                out[f] = acc;
            }
        }
        (Side::Dual, 0) => {
            for (de, &(r, l)) in dom.dual_edge_ends.iter().enumerate() {
                out[de] = x[l] - x[r];
            }
        }
        (Side::Dual, 1) => {
            for (v, des) in dom.vertex_dual_edges.iter().enumerate() {
                let mut acc = T::default();
                for &(de, s) in des {
                    acc += signed(s, x[de]);
                }
                out[v] = acc;
            }
        }
        (_, p) => return Err(Error::DegreeOutOfRange(p)),
    }
    Ok(())
}

/// `out = delta(values)`; `out` must have the size of the `(p-1)`-cells.
pub fn apply_delta<T: Scalar>(dom: &DomainComplex, side: Side, p: u8, x: &[T], out: &mut [T]) -> Result<()> {
    for o in out.iter_mut() {
        *o = T::default();
    }
    match (side, p) {
        (Side::Primal, 1) => {
            for (e, &(t, h)) in dom.edge_ends.iter().enumerate() {
                out[h] += x[e];
                out[t] += -x[e];
            }
        }
        (Side::Primal, 2) => {
            for (f, es) in dom.face_edges.iter().enumerate() {
                for &(e, s) in es {
                    out[e] += signed(s, x[f]);
                }
            }
        }
        (Side::Dual, 1) => {
            for (de, &(r, l)) in dom.dual_edge_ends.iter().enumerate() {
                out[l] += x[de];
                out[r] += -x[de];
            }
        }
        (Side::Dual, 2) => {
            for (v, des) in dom.vertex_dual_edges.iter().enumerate() {
                for &(de, s) in des {
                    out[de] += signed(s, x[v]);
                }
            }
        }
        (_, p) => return Err(Error::DegreeOutOfRange(p)),
    }
    Ok(())
}

/// Differential `d: p -> p+1`.
pub fn differential(f: &Form) -> Result<Form> {
    if f.degree >= 2 {
        return Err(Error::DegreeOutOfRange(f.degree));
    }
    let mut out = Form::zeros(&f.dom, f.side, f.degree + 1);
    apply_d(&f.dom, f.side, f.degree, &f.values, &mut out.values)?;
    Ok(out)
}

/// Codifferential `delta: p -> p-1`.
pub fn codifferential(f: &Form) -> Result<Form> {
    if f.degree == 0 {
        return Err(Error::DegreeOutOfRange(0));
    }
    let mut out = Form::zeros(&f.dom, f.side, f.degree - 1);
    apply_delta(&f.dom, f.side, f.degree, &f.values, &mut out.values)?;
    Ok(out)
}

/// Hodge Laplacian `delta d + d delta`.
pub fn hodge_laplacian(f: &Form) -> Result<Form> {
    match f.degree {
        0 => codifferential(&differential(f)?),
        2 => differential(&codifferential(f)?),
        _ => codifferential(&differential(f)?)?.add(&differential(&codifferential(f)?)?),
    }
}

/// Duality map `u -> u*` from primal p-forms to dual (2-p)-forms, zero on
/// exterior dual cells.
pub fn dualize(f: &Form) -> Result<Form> {
    let dom = &f.dom;
    let q = 2 - f.degree;
    match f.side {
        Side::Primal => {
            let mut out = Form::zeros(dom, Side::Dual, q);
            match f.degree {
                0 => out.values.copy_from_slice(&f.values),
                1 => {
                    for (e, &v) in f.values.iter().enumerate() {
                        out.values[dom.edge_dual_edge[e]] = v;
                    }
                }
                _ => {
                    for (fi, &v) in f.values.iter().enumerate() {
                        out.values[dom.face_dual_node[fi]] = v;
                    }
                }
            }
            Ok(out)
        }
        Side::Dual => {
            let mut out = Form::zeros(dom, Side::Primal, q);
            match f.degree {
                2 => out.values.copy_from_slice(&f.values),
                1 => {
                    for (e, o) in out.values.iter_mut().enumerate() {
                        *o = f.values[dom.edge_dual_edge[e]];
                    }
                }
                _ => {
                    for (fi, o) in out.values.iter_mut().enumerate() {
                        *o = f.values[dom.face_dual_node[fi]];
                    }
                }
            }
            Ok(out)
        }
    }
}

/// A signed chain of primal 1-cells `(edge index, orientation)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PathChain {
    pub cells: Vec<(usize, i8)>,
}

impl PathChain {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Breadth-first shortest path of primal edges from vertex `a` to vertex `b`.
pub fn find_path(dom: &DomainComplex, a: usize, b: usize) -> Result<PathChain> {
    let nv = dom.vertices.len();
    if a >= nv || b >= nv {
        return Err(Error::InvalidInput("vertex index out of range".into()));
    }
    if a == b {
        return Ok(PathChain::default());
    }
    let mut adj: Vec<Vec<(usize, usize, i8)>> = vec![Vec::new(); nv];
    for (e, &(t, h)) in dom.edge_ends.iter().enumerate() {
        adj[t].push((h, e, 1));
        adj[h].push((t, e, -1));
    }
    let mut prev: Vec<Option<(usize, usize, i8)>> = vec![None; nv];
    let mut seen = vec![false; nv];
    seen[a] = true;
    let mut q = VecDeque::from([a]);
    while let Some(v) = q.pop_front() {
        if v == b {
            break;
        }
        for &(w, e, s) in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                prev[w] = Some((v, e, s));
                q.push_back(w);
            }
        }
    }
    if !seen[b] {
        return Err(Error::Disconnected);
    }
    let mut cells = Vec::new();
    let mut v = b;
    while v != a {
        let (u, e, s) = prev[v].expect("bfs parent");
        cells.push((e, s));
        v = u;
    }
    cells.reverse();
    Ok(PathChain { cells })
}

/// `∫_γ f` for a primal 1-form.
pub fn path_integral(f: &Form, gamma: &PathChain) -> Result<f64> {
    if f.degree != 1 || f.side != Side::Primal {
        return Err(Error::DegreeOutOfRange(f.degree));
    }
    Ok(f.integrate(&gamma.cells))
}
