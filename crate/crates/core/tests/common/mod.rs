//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use disloc_core::complex::{default_domain, DomainComplex};
use disloc_core::dislocation::DislocationState;
use disloc_core::{LatticeKind, Vec2};

pub fn dom(kind: LatticeKind, n: u32) -> Arc<DomainComplex> {
    default_domain(kind, n).expect("domain")
}

/// Centroid of the scaled default polygon.
pub fn center(dom: &DomainComplex) -> Vec2 {
    dom.scaled_polygon().expect("polygon").centroid()
}

/// Interior face of sublattice `t` nearest to `x`.
pub fn nearest_face_of(dom: &DomainComplex, x: Vec2, t: u8) -> usize {
    (0..dom.faces.len())
        .filter(|&f| dom.faces[f].t == t)
        .min_by(|&a, &b| dom.face_pos(a).dist(x).total_cmp(&dom.face_pos(b).dist(x)))
        .expect("face of sublattice")
}

/// Single core at the interior face nearest to `x`.
pub fn single(dom: &DomainComplex, x: Vec2, b: i8, eps: f64) -> DislocationState {
    let f = dom.nearest_face(x).expect("interior face");
    DislocationState::new(dom.n, eps, vec![dom.faces[f]], vec![b]).unwrap()
}

/// Kolmogorov–Smirnov statistic of `samples` against a continuous cdf.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Asymptotic KS critical value at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}
