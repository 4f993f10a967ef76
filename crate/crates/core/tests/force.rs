mod common;

use std::sync::Arc;

use disloc_core::dislocation::DislocationState;
use disloc_core::force::{
    forces_from_projections, hop_force_projections, stencil, ForceMesh, ForceModel, MeshSpec, PkForce, PkForceConfig,
    ZeroForce,
};
use disloc_core::par::Exec;
use disloc_core::solver::GreensCache;
use disloc_core::{Error, LatticeKind, Vec2};
use proptest::prelude::*;

use common::dom;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn stencil_reproduces_quadratics(
        k in 0usize..3,
        x in 0.35f64..0.65,
        y in 0.35f64..0.65,
        c in prop::array::uniform6(-2.0f64..2.0),
    ) {
        let kind = LatticeKind::ALL[k];
        let d = dom(kind, 16);
        let p = d.scaled_polygon().unwrap();
        let (lo, hi) = p.bbox();
        let at = Vec2::new(lo.x + x * (hi.x - lo.x), lo.y + y * (hi.y - lo.y));
        let s = stencil(&d, at, 3.0 * d.spec.d_hop).unwrap();
        let q = |z: Vec2| c[0] + c[1] * z.x + c[2] * z.y + c[3] * z.x * z.x + c[4] * z.x * z.y + c[5] * z.y * z.y;
        let dq = |z: Vec2| Vec2::new(c[1] + 2.0 * c[3] * z.x + c[4] * z.y, c[2] + c[4] * z.x + 2.0 * c[5] * z.y);
        let (mut v, mut g) = (0.0, Vec2::ZERO);
        for (i, &f) in s.faces.iter().enumerate() {
            // Centre the quadratic at the probe to keep the check well scaled.
            let val = q(d.face_pos(f) - at);
            v += s.value[i] * val;
            g += s.grad[i] * val;
        }
        prop_assert!((v - q(Vec2::ZERO)).abs() < 1e-9);
        prop_assert!((g - dq(Vec2::ZERO)).norm() < 1e-9);
    }
}

fn pk(kind: LatticeKind) -> PkForce {
    PkForce::new(PkForceConfig::new(kind)).unwrap()
}

fn macro_center(kind: LatticeKind) -> Vec2 {
    let d = dom(kind, 4);
    d.scaled_polygon().unwrap().centroid() / d.n as f64
}

#[test]
fn centred_core_feels_no_force() {
    for kind in LatticeKind::ALL {
        let f = pk(kind).forces(&[macro_center(kind)], &[1]).unwrap();
        assert!(f[0].norm() < 1e-6, "{kind}: {:?}", f[0]);
    }
}

#[test]
fn opposite_signs_attract_and_mirror() {
    for kind in LatticeKind::ALL {
        let m = pk(kind);
        let c = macro_center(kind);
        let x = [c + Vec2::new(-0.15, 0.05), c + Vec2::new(0.12, -0.02)];
        let f = m.forces(&x, &[1, -1]).unwrap();
        // -∂𝓔 points from each core toward the other.
        assert!(f[0].dot(x[1] - x[0]) < 0.0 && f[1].dot(x[0] - x[1]) < 0.0, "{kind}: {f:?}");
        // Same-sign cores repel.
        let g = m.forces(&x, &[1, 1]).unwrap();
        assert!(g[0].dot(x[1] - x[0]) > 0.0, "{kind}: {g:?}");
        if kind == LatticeKind::Sq {
            // Reflection through the vertical axis x = c.x.
            let refl = |p: Vec2| Vec2::new(2.0 * c.x - p.x, p.y);
            let r = m.forces(&[refl(x[0]), refl(x[1])], &[1, -1]).unwrap();
            for i in 0..2 {
                assert!((r[i] - Vec2::new(-f[i].x, f[i].y)).norm() < 1e-6);
            }
        }
    }
}

#[test]
fn fitted_force_matches_hop_projections() {
    for kind in LatticeKind::ALL {
        let m = pk(kind);
        let n = 48;
        let d = dom(kind, n);
        let cache = GreensCache::new(&d).unwrap();
        let c = d.scaled_polygon().unwrap().centroid();
        let a = d.nearest_face(c + Vec2::new(-0.15, 0.05) * n as f64).unwrap();
        let b = d.nearest_face(c + Vec2::new(0.12, -0.02) * n as f64).unwrap();
        let s = DislocationState::new(n, 0.05, vec![d.faces[a], d.faces[b]], vec![1, -1]).unwrap();
        let lattice = forces_from_projections(2, &hop_force_projections(&cache, &s).unwrap());
        let fitted = m.forces(&s.macro_positions(&d), &s.signs).unwrap();
        for i in 0..2 {
            let err = (lattice[i] - fitted[i]).norm();
            assert!(err < 0.1 * fitted[i].norm() + 0.05, "{kind} core {i}: {:?} vs {:?}", lattice[i], fitted[i]);
        }
    }
}

#[test]
fn strict_tolerance_reports_instability() {
    let mut cfg = PkForceConfig::new(LatticeKind::Sq);
    cfg.n_coarse = 16;
    cfg.rel_tol = 0.0;
    cfg.abs_tol = 1e-12;
    let m = PkForce::new(cfg).unwrap();
    let c = macro_center(LatticeKind::Sq);
    let r = m.forces(&[c + Vec2::new(-0.2, 0.1), c + Vec2::new(0.2, 0.0)], &[1, -1]);
    assert!(matches!(r, Err(Error::ExtrapolationUnstable(..))));
    let e = m.estimate(&[c], &[1]).unwrap();
    assert_eq!(e.extrapolated.len(), 1);
    assert!(m.estimate(&[c], &[1, 1]).is_err());
}

/// `F_i = M x_i + b_i v`, linear in the coordinates.
struct Linear;

impl ForceModel for Linear {
    fn kind(&self) -> LatticeKind {
        LatticeKind::Sq
    }
    fn forces(&self, x: &[Vec2], b: &[i8]) -> disloc_core::Result<Vec<Vec2>> {
        Ok(x.iter().zip(b).map(|(p, &s)| Vec2::new(2.0 * p.x - p.y + 0.3, 0.5 * p.x + 3.0 * p.y) + Vec2::new(s as f64, 0.0)).collect())
    }
}

#[test]
fn mesh_is_exact_for_linear_models() {
    let spec = MeshSpec { lo: vec![0.2, 0.3, 0.5, 0.3], hi: vec![0.4, 0.6, 0.8, 0.6], counts: vec![3, 4, 3, 2] };
    let mesh = ForceMesh::new(Arc::new(Linear), spec, vec![1, -1]).unwrap();
    let x = [Vec2::new(0.27, 0.41), Vec2::new(0.66, 0.52)];
    let got = mesh.forces(&x, &[1, -1]).unwrap();
    let want = Linear.forces(&x, &[1, -1]).unwrap();
    for i in 0..2 {
        assert!((got[i] - want[i]).norm() < 1e-12);
    }
    assert!(mesh.cached_nodes() <= 16);
    assert!(matches!(mesh.forces(&[Vec2::new(0.9, 0.4), x[1]], &[1, -1]), Err(Error::ForceMeshMiss(_))));
    assert_eq!(mesh.misses(), 1);
    assert!(mesh.forces(&x, &[1, 1]).is_err());
    assert_eq!(mesh.kind(), LatticeKind::Sq);
}

#[test]
fn mesh_prefill_is_order_independent() {
    let spec = MeshSpec { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0], counts: vec![5, 5] };
    let a = ForceMesh::new(Arc::new(Linear), spec.clone(), vec![1]).unwrap();
    let b = ForceMesh::new(Arc::new(Linear), spec, vec![1]).unwrap();
    a.prefill(&a.all_nodes(), Exec::Parallel);
    b.prefill(&b.all_nodes(), Exec::Sequential);
    assert_eq!(a.cached_nodes(), 25);
    let x = [Vec2::new(0.33, 0.71)];
    assert_eq!(a.forces(&x, &[1]).unwrap(), b.forces(&x, &[1]).unwrap());
    assert!(ForceMesh::new(Arc::new(Linear), MeshSpec { lo: vec![0.0], hi: vec![1.0], counts: vec![2] }, vec![1]).is_err());
}

#[test]
fn zero_force() {
    let z = ZeroForce(LatticeKind::Hx);
    assert_eq!(z.forces(&[Vec2::new(0.1, 0.2); 3], &[1, -1, 1]).unwrap(), vec![Vec2::ZERO; 3]);
    assert_eq!(z.kind(), LatticeKind::Hx);
}
