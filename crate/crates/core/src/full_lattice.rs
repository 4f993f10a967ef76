//! Full-lattice Green's functions `G^L` with `ΔG^L = 1_0`, `G^L(0) = 0`.
//!
//! Sq and Tr values come from the Brillouin-zone integral of
//! `(cos k·e - 1)/σ(k)` after the inner integral is done in closed form. The
//! hexagonal table is assembled from the triangular one: A sites take
//! `3 G^Tr` and B sites the average of their three A neighbours.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::lattice::{build_lattice, LatticeKind};
use crate::par::{map_slice, Exec};
use crate::quadrature::integrate;

pub const DEFAULT_TOL: f64 = 1e-13;

/// Continuum coefficient `a` in `G^L(e) ~ -a log|e| - C` for unit nearest
/// neighbour spacing.
pub fn continuum_log_coefficient(kind: LatticeKind) -> f64 {
    match kind {
        LatticeKind::Sq => 1.0 / (2.0 * PI),
        LatticeKind::Tr => 1.0 / (2.0 * 3f64.sqrt() * PI),
        LatticeKind::Hx => 3f64.sqrt() / (2.0 * PI),
    }
}

/// `(1/π) ∫_0^π ½[cos(αθ) ρ^|j| - 1]/√(c²-r²) dθ` where the caller supplies
/// `c - r`, `c + r` and `r` as functions of `θ` in cancellation-free form.
fn radial_integral<F>(alpha: f64, j: i32, parts: F, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64, f64),
{
    let j = j.unsigned_abs() as f64;
    let f = |th: f64| {
        let (cmr, cpr, r) = parts(th);
        let s = (cmr * cpr).sqrt();
        let ph = alpha * th;
        let cos_m1 = -2.0 * (0.5 * ph).sin().powi(2);
        let pow_m1 = if j == 0.0 {
            0.0
        } else {
            let ln_rho = -((cmr + s) / r).ln_1p();
            (j * ln_rho).exp_m1()
        };
        0.5 * (ph.cos() * pow_m1 + cos_m1) / s
    };
    Ok(integrate(f, 0.0, PI, tol * PI)? / PI)
}

/// `G^Sq(m, n)`.
pub fn greens_sq(m: i32, n: i32, tol: f64) -> Result<f64> {
    if m == 0 && n == 0 {
        return Ok(0.0);
    }
    radial_integral(m as f64, n, |th| {
        let cm1 = 2.0 * (0.5 * th).sin().powi(2);
        (cm1, cm1 + 2.0, 1.0)
    }, tol)
}

/// `G^Tr(i a1 + j a2)`.
pub fn greens_tr(i: i32, j: i32, tol: f64) -> Result<f64> {
    if i == 0 && j == 0 {
        return Ok(0.0);
    }
    radial_integral(i as f64 + 0.5 * j as f64, j, |th| {
        let u = (0.5 * th).cos();
        let cmr = 4.0 * (0.25 * th).sin().powi(2) * (2.0 + u);
        let cpr = 2.0 * (2.0 - u) * (1.0 + u);
        (cmr, cpr, 2.0 * u)
    }, tol)
}

/// Canonical representative of a point under the lattice point group, in
/// index coordinates.
fn canonical(kind: LatticeKind, i: i32, j: i32) -> (i32, i32) {
    match kind {
        LatticeKind::Sq => {
            let (a, b) = (i.abs(), j.abs());
            (a.max(b), a.min(b))
        }
        _ => {
            let mut best = (i, j);
            let (mut x, mut y) = (i, j);
            for _ in 0..6 {
                (x, y) = (-y, x + y);
                best = best.min((x, y)).min((y, x));
            }
            best
        }
    }
}

/// Tabulated full-lattice Green's function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FullLatticeGreens {
    pub kind: LatticeKind,
    pub radius: f64,
    pub tol: f64,
    /// Half-width of the index box.
    pub m: i32,
    /// Number of sublattices (2 for Hx, 1 otherwise).
    pub nsub: usize,
    /// Values over `[-m, m]^2 x sublattices`; `NaN` beyond the radius.
    pub values: Vec<f64>,
    pub a_fit: f64,
    pub c_fit: f64,
    /// `max |G + a_fit log|e| + c_fit| |e| / log|e|` over the fitted range.
    pub decay_constant: f64,
}

impl FullLatticeGreens {
    fn idx(&self, i: i32, j: i32, t: u8) -> Option<usize> {
        if i.abs() > self.m || j.abs() > self.m || t as usize >= self.nsub {
            return None;
        }
        let w = (2 * self.m + 1) as usize;
        Some(((t as usize * w) + (j + self.m) as usize) * w + (i + self.m) as usize)
    }

    /// `G^L` at index `(i, j)` on sublattice `t` (relative to an A site).
    pub fn get(&self, i: i32, j: i32, t: u8) -> Option<f64> {
        self.idx(i, j, t).map(|k| self.values[k]).filter(|v| !v.is_nan())
    }

    pub fn value(&self, i: i32, j: i32, t: u8) -> Result<f64> {
        self.get(i, j, t)
            .ok_or_else(|| Error::InvalidInput(format!("({i},{j};{t}) outside the {} Green's table of radius {}", self.kind, self.radius)))
    }

    /// Position of table point `(i, j; t)` in lattice units.
    pub fn position(&self, i: i32, j: i32, t: u8) -> Vec2 {
        let spec = build_lattice(self.kind);
        spec.vertex_pos(crate::lattice::CellKey::new(i, j, t))
    }

    /// Iterates over `(i, j, t, value)` for tabulated points.
    pub fn entries(&self) -> impl Iterator<Item = (i32, i32, u8, f64)> + '_ {
        let m = self.m;
        (0..self.nsub as u8).flat_map(move |t| {
            (-m..=m).flat_map(move |j| (-m..=m).filter_map(move |i| self.get(i, j, t).map(|v| (i, j, t, v))))
        })
    }

    /// Computes the table for `|e| <= radius`.
    pub fn compute(kind: LatticeKind, radius: f64, tol: f64, exec: Exec) -> Result<Self> {
        if radius < 8.0 {
            return Err(Error::InvalidInput(format!("table radius {radius} < 8")));
        }
        match kind {
            LatticeKind::Sq | LatticeKind::Tr => Self::compute_bravais(kind, radius, tol, exec),
            LatticeKind::Hx => {
                let tr = Self::compute_bravais(LatticeKind::Tr, radius / 3f64.sqrt() + 2.0, tol, exec)?;
                Self::hx_from_tr(&tr, radius)
            }
        }
    }

    fn compute_bravais(kind: LatticeKind, radius: f64, tol: f64, exec: Exec) -> Result<Self> {
        let spec = build_lattice(kind);
        let [b1, b2] = spec.basis();
        let pos = |i: i32, j: i32| b1 * i as f64 + b2 * j as f64;
        let m = match kind {
            LatticeKind::Sq => radius.floor() as i32,
            _ => (radius * 2.0 / 3f64.sqrt()).ceil() as i32 + 1,
        };
        let mut reps: Vec<(i32, i32)> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for j in -m..=m {
            for i in -m..=m {
                if pos(i, j).norm() <= radius + 1e-9 {
                    let c = canonical(kind, i, j);
                    if seen.insert(c) {
                        reps.push(c);
                    }
                }
            }
        }
        let vals = map_slice(exec, &reps, |&(i, j)| match kind {
            LatticeKind::Sq => greens_sq(i, j, tol),
            _ => greens_tr(i, j, tol),
        });
        let mut table = HashMap::new();
        for (c, v) in reps.into_iter().zip(vals) {
            table.insert(c, v?);
        }
        let w = (2 * m + 1) as usize;
        let mut values = vec![f64::NAN; w * w];
        for j in -m..=m {
            for i in -m..=m {
                if pos(i, j).norm() <= radius + 1e-9 {
                    values[(j + m) as usize * w + (i + m) as usize] = table[&canonical(kind, i, j)];
                }
            }
        }
        let mut g = FullLatticeGreens { kind, radius, tol, m, nsub: 1, values, a_fit: 0.0, c_fit: 0.0, decay_constant: 0.0 };
        g.fit();
        Ok(g)
    }

    fn hx_from_tr(tr: &FullLatticeGreens, radius: f64) -> Result<Self> {
        let spec = build_lattice(LatticeKind::Hx);
        let m = tr.m - 1;
        let w = (2 * m + 1) as usize;
        let mut values = vec![f64::NAN; 2 * w * w];
        for j in -m..=m {
            for i in -m..=m {
                let k = (j + m) as usize * w + (i + m) as usize;
                let pa = spec.vertex_pos(crate::lattice::CellKey::new(i, j, 0));
                if pa.norm() <= radius + 1e-9 {
                    values[k] = 3.0 * tr.value(i, j, 0)?;
                }
                let pb = spec.vertex_pos(crate::lattice::CellKey::new(i, j, 1));
                if pb.norm() <= radius + 1e-9 {
                    let a_sum = 3.0 * (tr.value(i, j, 0)? + tr.value(i, j - 1, 0)? + tr.value(i + 1, j - 1, 0)?);
                    values[w * w + k] = a_sum / 3.0;
                }
            }
        }
        let mut g = FullLatticeGreens {
            kind: LatticeKind::Hx,
            radius,
            tol: tr.tol,
            m,
            nsub: 2,
            values,
            a_fit: 0.0,
            c_fit: 0.0,
            decay_constant: 0.0,
        };
        g.fit();
        Ok(g)
    }

    /// Least-squares fit of `G = -a log|e| - C` over `8 <= |e| <= radius`.
    fn fit(&mut self) {
        let spec = build_lattice(self.kind);
        let pts: Vec<(f64, f64)> = self
            .entries()
            .filter_map(|(i, j, t, v)| {
                let r = spec.vertex_pos(crate::lattice::CellKey::new(i, j, t)).norm();
                (r >= 8.0).then(|| (r.ln(), v))
            })
            .collect();
        let n = pts.len() as f64;
        if n < 2.0 {
            return;
        }
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (sx / n, sy / n);
        let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
        let slope = sxy / sxx;
        self.a_fit = -slope;
        self.c_fit = -(my - slope * mx);
        self.decay_constant = pts
            .iter()
            .map(|&(lr, v)| (v + self.a_fit * lr + self.c_fit).abs() * lr.exp() / lr)
            .fold(0.0, f64::max);
    }

    /// Maximum of `|ΔG - 1_0|` over points whose neighbours are all tabulated.
    pub fn laplacian_residual(&self) -> f64 {
        let spec = build_lattice(self.kind);
        let p = &spec.periodic;
        let mut worst: f64 = 0.0;
        for (i, j, t, v) in self.entries() {
            let k = crate::lattice::CellKey::new(i, j, t);
            let mut lap = 0.0;
            let mut ok = true;
            for r in &p.vertex_edges[t as usize] {
                let ek = k.shifted(r.shift);
                let ek = crate::lattice::CellKey { t: r.t, ..ek };
                let (a, b) = p.edge_endpoints(ek);
                let w = if a == k { b } else { a };
                match self.get(w.i, w.j, w.t) {
                    Some(g) => lap += v - g,
                    None => ok = false,
                }
            }
            if ok {
                let target = if i == 0 && j == 0 && t == 0 { 1.0 } else { 0.0 };
                worst = worst.max((lap - target).abs());
            }
        }
        worst
    }

    /// Loads a cached table from `dir` or computes and stores it.
    pub fn load_or_compute(kind: LatticeKind, radius: f64, tol: f64, dir: Option<&Path>, exec: Exec) -> Result<Self> {
        if let Some(d) = dir {
            let path = cache_path(d, kind, radius, tol);
            if let Ok(bytes) = std::fs::read(&path) {
                if let Ok(g) = serde_json::from_slice::<FullLatticeGreens>(&bytes) {
                    if g.kind == kind && g.tol == tol && g.radius >= radius {
                        return Ok(g);
                    }
                }
            }
            let g = Self::compute(kind, radius, tol, exec)?;
            std::fs::create_dir_all(d)?;
            std::fs::write(&path, serde_json::to_vec(&g)?)?;
            return Ok(g);
        }
        Self::compute(kind, radius, tol, exec)
    }
}

/// Cache file for a table keyed by kind, radius and tolerance.
pub fn cache_path(dir: &Path, kind: LatticeKind, radius: f64, tol: f64) -> PathBuf {
    dir.join(format!("greens_{kind}_R{}_tol{:e}.json", radius.ceil() as i64, tol))
}

type Memo = Mutex<HashMap<LatticeKind, Arc<FullLatticeGreens>>>;

fn memo() -> &'static Memo {
    static M: OnceLock<Memo> = OnceLock::new();
    M.get_or_init(Default::default)
}

/// Process-wide table of at least the given radius at the default tolerance.
pub fn shared(kind: LatticeKind, radius: f64) -> Result<Arc<FullLatticeGreens>> {
    let radius = radius.max(8.0);
    let mut g = memo().lock();
    if let Some(t) = g.get(&kind) {
        if t.radius >= radius {
            return Ok(t.clone());
        }
    }
    let r = (radius * 1.25).ceil();
    let dir = std::env::var_os("DISLOC_CACHE_DIR").map(PathBuf::from);
    let t = Arc::new(FullLatticeGreens::load_or_compute(kind, r, DEFAULT_TOL, dir.as_deref(), Exec::Parallel)?);
    g.insert(kind, t.clone());
    Ok(t)
}

/// Dual full-lattice Green's function between two faces of a domain of kind
/// `primal`, looked up in the table of the dual lattice.
///
/// `table` must be the table of the dual graph: Sq for Sq, Hx for Tr, Tr for
/// Hx.
pub fn dual_lookup(primal: LatticeKind, table: &FullLatticeGreens, p: crate::lattice::CellKey, q: crate::lattice::CellKey) -> Result<f64> {
    let (di, dj) = (q.i - p.i, q.j - p.j);
    match primal {
        LatticeKind::Sq | LatticeKind::Hx => table.value(di, dj, 0),
        LatticeKind::Tr => match (p.t, q.t) {
            (0, 0) | (1, 1) => table.value(di, dj, 0),
            (0, _) => table.value(di, dj + 1, 1),
            _ => table.value(-di, -dj + 1, 1),
        },
    }
}

/// The dual lattice whose Green's table serves `primal` domains.
pub fn dual_table_kind(primal: LatticeKind) -> LatticeKind {
    match primal {
        LatticeKind::Sq => LatticeKind::Sq,
        LatticeKind::Tr => LatticeKind::Hx,
        LatticeKind::Hx => LatticeKind::Tr,
    }
}

/// Table radius (in dual-table lattice units) covering face separations up to
/// `dist` in primal units.
pub fn dual_table_radius(primal: LatticeKind, dist: f64) -> f64 {
    match primal {
        LatticeKind::Sq => dist + 2.0,
        LatticeKind::Tr => 3f64.sqrt() * dist + 3.0,
        LatticeKind::Hx => dist / 3f64.sqrt() + 2.0,
    }
}
