use disloc_core::complex::{ConvexLatticePolygon, Polygon};
use disloc_core::ldp::{
    conjugate, core_hamiltonian, core_lagrangian, core_lagrangian_closed, hamiltonian, lagrangian, mobility, mobility_core, phi,
    psi_star, quadratic_limit_check, series_slope, stated_slope, tr_corrector, LdpParams, MacroState, Stars,
};
use disloc_core::{build_lattice, LatticeKind, Vec2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn prm() -> LdpParams {
    LdpParams::new(0.8, 0.6).unwrap()
}

fn rand_vec(rng: &mut impl Rng, r: f64) -> Vec2 {
    Vec2::new(rng.random_range(-r..r), rng.random_range(-r..r))
}

fn vec2() -> impl Strategy<Value = Vec2> {
    (-1.5f64..1.5, -1.5f64..1.5).prop_map(|(x, y)| Vec2::new(x, y))
}

#[test]
fn params_are_validated() {
    assert!(LdpParams::new(0.0, 1.0).is_err());
    assert!(LdpParams::new(1.0, f64::NAN).is_err());
    let p = LdpParams::from_physical(10, 2.0, 0.5, 3.0, 4.0, 1.0 / 16.0).unwrap();
    assert!((p.a - 12.0 * (-1.0f64 / 16.0).exp() / 10.0).abs() < 1e-14);
    assert!((p.b - 0.05).abs() < 1e-15);
}

#[test]
fn hamiltonian_is_midpoint_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for kind in LatticeKind::ALL {
        let stars = Stars::of(kind);
        for _ in 0..1000 {
            let g = rand_vec(&mut rng, 1.0);
            let (p, q) = (rand_vec(&mut rng, 2.0), rand_vec(&mut rng, 2.0));
            let h = |x: Vec2| core_hamiltonian(&stars, prm(), g, x).0;
            let mid = h((p + q) * 0.5);
            assert!(mid <= 0.5 * (h(p) + h(q)) + 1e-12 * (1.0 + h(p).abs() + h(q).abs()), "{kind}");
        }
    }
}

#[test]
fn lagrangian_is_midpoint_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kind in LatticeKind::ALL {
        let stars = Stars::of(kind);
        for _ in 0..300 {
            let g = rand_vec(&mut rng, 1.0);
            let (a, b) = (rand_vec(&mut rng, 3.0), rand_vec(&mut rng, 3.0));
            let l = |x: Vec2| core_lagrangian(&stars, prm(), g, x).unwrap();
            assert!(l((a + b) * 0.5) <= 0.5 * (l(a) + l(b)) + 1e-9, "{kind}");
        }
    }
}

#[test]
fn hamiltonian_derivatives_match_differences() {
    let h = 1e-5;
    for kind in LatticeKind::ALL {
        let stars = Stars::of(kind);
        let (g, p) = (Vec2::new(0.3, -0.7), Vec2::new(-0.4, 0.9));
        let (_, grad, hess) = core_hamiltonian(&stars, prm(), g, p);
        let f = |x: Vec2| core_hamiltonian(&stars, prm(), g, x);
        let ex = Vec2::new(h, 0.0);
        let ey = Vec2::new(0.0, h);
        let fd = Vec2::new((f(p + ex).0 - f(p - ex).0) / (2.0 * h), (f(p + ey).0 - f(p - ey).0) / (2.0 * h));
        assert!((fd - grad).norm() <= 1e-6 * grad.norm().max(1.0), "{kind}");
        let dgx = (f(p + ex).1 - f(p - ex).1) / (2.0 * h);
        let dgy = (f(p + ey).1 - f(p - ey).1) / (2.0 * h);
        assert!((dgx.x - hess.xx).abs() < 1e-6 && (dgy.y - hess.yy).abs() < 1e-6 && (dgx.y - hess.xy).abs() < 1e-6, "{kind}");
    }
}

#[test]
fn legendre_round_trip() {
    for kind in [LatticeKind::Sq, LatticeKind::Hx] {
        let stars = Stars::of(kind);
        for xi in [Vec2::new(0.0, 0.0), Vec2::new(0.7, -1.2), Vec2::new(-3.0, 2.0), Vec2::new(5.0, 0.1)] {
            let (v, q, hess) = phi(&stars, prm(), xi).unwrap();
            let (psi, dpsi, hpsi) = psi_star(&stars, prm(), q);
            // Fenchel equality and inverse gradients.
            assert!((v + psi - xi.dot(q)).abs() <= 1e-8 * (1.0 + v.abs()), "{kind}");
            assert!((dpsi - xi).norm() <= 1e-8 * (1.0 + xi.norm()), "{kind}");
            for e in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)] {
                assert!((hpsi.apply(hess.apply(e)) - e).norm() < 1e-8, "{kind}");
            }
            // Finite differences of Φ give the maximiser.
            let h = 1e-5;
            let f = |x: Vec2| phi(&stars, prm(), x).unwrap().0;
            let fd = Vec2::new(
                (f(xi + Vec2::new(h, 0.0)) - f(xi - Vec2::new(h, 0.0))) / (2.0 * h),
                (f(xi + Vec2::new(0.0, h)) - f(xi - Vec2::new(0.0, h))) / (2.0 * h),
            );
            assert!((fd - q).norm() <= 1e-6 * q.norm().max(1.0), "{kind}");
        }
    }
    assert!(phi(&Stars::of(LatticeKind::Tr), prm(), Vec2::ZERO).is_err());
}

#[test]
fn closed_lagrangian_matches_newton() {
    for kind in [LatticeKind::Sq, LatticeKind::Hx] {
        let stars = Stars::of(kind);
        for (g, xi) in [(Vec2::new(0.2, 0.5), Vec2::new(1.0, -0.4)), (Vec2::new(-1.0, 0.3), Vec2::new(-2.0, 2.0))] {
            let a = core_lagrangian_closed(&stars, prm(), g, xi).unwrap();
            let b = core_lagrangian(&stars, prm(), g, xi).unwrap();
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "{kind}: {a} {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lagrangian_vanishes_only_on_the_mobility(g in vec2(), xi in vec2(), k in 0usize..3) {
        let kind = LatticeKind::ALL[k];
        let stars = Stars::of(kind);
        let l = core_lagrangian(&stars, prm(), g, xi).unwrap();
        prop_assert!(l >= -1e-10);
        let m = mobility_core(&stars, prm(), g * -1.0);
        let l0 = core_lagrangian(&stars, prm(), g, m).unwrap();
        prop_assert!(l0.abs() < 1e-9, "{} at the mobility", l0);
        if (xi - m).norm() > 0.1 {
            prop_assert!(l > 1e-6);
        }
    }

    #[test]
    fn triangular_mobility_forms_agree(g in vec2()) {
        let stars = Stars::of(LatticeKind::Tr);
        let closed = mobility_core(&stars, prm(), g * -1.0);
        let from_h = core_hamiltonian(&stars, prm(), g, Vec2::ZERO).1;
        prop_assert!((closed - from_h).norm() < 1e-12 * (1.0 + closed.norm()));
    }

    #[test]
    fn corrector_equalises_sublattices(g in vec2(), p in vec2()) {
        let stars = Stars::of(LatticeKind::Tr);
        let c = tr_corrector(&stars, prm(), g, p);
        // Sublattice generators with corrector h^± applied.
        let z = (c.h_minus - c.h_plus).exp();
        let up = prm().a * (z * c.delta[0] - c.gamma[0]);
        let down = prm().a * (c.delta[1] / z - c.gamma[1]);
        let h = core_hamiltonian(&stars, prm(), g, p).0;
        prop_assert!((up - h).abs() < 1e-10 * (1.0 + h.abs()));
        prop_assert!((down - h).abs() < 1e-10 * (1.0 + h.abs()));
        prop_assert!((c.g - h).abs() < 1e-10 * (1.0 + h.abs()));
        for v in c.gamma.iter().chain(&c.delta) {
            prop_assert!(*v >= 3.0 - 1e-12);
        }
        prop_assert!((c.h_plus + c.h_minus).abs() < 1e-15);
    }
}

#[test]
fn lagrangian_is_superlinear() {
    for kind in LatticeKind::ALL {
        let stars = Stars::of(kind);
        let g = Vec2::new(0.4, 0.1);
        let dir = Vec2::new(0.6, 0.8);
        let ratios: Vec<f64> = [2.0, 8.0, 32.0, 128.0]
            .iter()
            .map(|&r| core_lagrangian(&stars, prm(), g, dir * r).unwrap() / r)
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0] + 0.1), "{kind}: {ratios:?}");
    }
}

#[test]
fn boundary_conventions() {
    let dom = Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)]).unwrap();
    let kind = LatticeKind::Sq;
    let g = [Vec2::new(0.3, 0.0)];
    let inside = MacroState::new(vec![Vec2::new(0.5, 0.5)], vec![1], 0.1).unwrap();
    let edge = MacroState::new(vec![Vec2::new(0.1, 0.5)], vec![1], 0.1).unwrap();
    let outside = MacroState::new(vec![Vec2::new(0.05, 0.5)], vec![1], 0.1).unwrap();
    let xi = [Vec2::new(0.2, 0.0)];
    assert!((inside.margin(&dom) - 0.4).abs() < 1e-15);
    assert!(lagrangian(&inside, &dom, &xi, kind, prm(), &g).unwrap().is_finite());
    assert_eq!(lagrangian(&edge, &dom, &xi, kind, prm(), &g).unwrap(), f64::INFINITY);
    assert_eq!(lagrangian(&edge, &dom, &[Vec2::ZERO], kind, prm(), &g).unwrap(), 0.0);
    assert_eq!(lagrangian(&outside, &dom, &[Vec2::ZERO], kind, prm(), &g).unwrap(), f64::INFINITY);
    assert_eq!(hamiltonian(&edge, &dom, &xi, kind, prm(), &g).unwrap(), 0.0);
    assert!(hamiltonian(&outside, &dom, &xi, kind, prm(), &g).is_err());
    assert!(MacroState::new(vec![Vec2::ZERO], vec![], 0.1).is_err());
    let _ = ConvexLatticePolygon::default_for(kind);
}

#[test]
fn multi_core_quantities_add() {
    let dom = Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(4.0, 0.0), Vec2::new(4.0, 4.0), Vec2::new(0.0, 4.0)]).unwrap();
    let s = MacroState::new(vec![Vec2::new(1.0, 2.0), Vec2::new(3.0, 2.0)], vec![1, -1], 0.1).unwrap();
    let g = [Vec2::new(0.5, 0.0), Vec2::new(-0.5, 0.1)];
    let p = [Vec2::new(0.1, 0.2), Vec2::new(-0.3, 0.0)];
    for kind in LatticeKind::ALL {
        let stars = Stars::of(kind);
        let h = hamiltonian(&s, &dom, &p, kind, prm(), &g).unwrap();
        let parts: f64 = (0..2).map(|i| core_hamiltonian(&stars, prm(), g[i], p[i]).0).sum();
        assert!((h - parts).abs() < 1e-14);
        let l = lagrangian(&s, &dom, &p, kind, prm(), &g).unwrap();
        let lp: f64 = (0..2).map(|i| core_lagrangian(&stars, prm(), g[i], p[i]).unwrap()).sum();
        assert!((l - lp).abs() < 1e-12);
        let m = mobility(&g, kind, prm());
        assert_eq!(m[1], mobility_core(&stars, prm(), g[1]));
    }
}

#[test]
fn conjugate_of_a_quadratic() {
    // f(x) = ½|x|² is self-conjugate.
    let f = |x: Vec2| (0.5 * x.norm2(), x, disloc_core::geom::Sym2 { xx: 1.0, xy: 0.0, yy: 1.0 });
    let y = Vec2::new(1.5, -2.0);
    let (v, x, _) = conjugate(f, y, Vec2::ZERO).unwrap();
    assert!((v - 0.5 * y.norm2()).abs() < 1e-14 && (x - y).norm() < 1e-14);
}

#[test]
fn slopes_from_the_hop_stars() {
    // ½ Σ s⊗s = c·I for every star, so the series slope is c.
    for kind in [LatticeKind::Sq, LatticeKind::Hx] {
        let hops = &build_lattice(kind).dual_neighbor_dirs[0];
        let c = 0.5 * hops.iter().map(|s| s.x * s.x).sum::<f64>();
        assert!((series_slope(kind) - 2.0 * c).abs() < 1e-12);
    }
    assert_eq!(stated_slope(LatticeKind::Sq), series_slope(LatticeKind::Sq));
    assert_eq!(stated_slope(LatticeKind::Tr), series_slope(LatticeKind::Tr));
    assert!((stated_slope(LatticeKind::Hx) - series_slope(LatticeKind::Hx)).abs() > 1.0);
}

#[test]
fn quadratic_limit_rates() {
    let bs = [0.2, 0.1, 0.05, 0.025];
    for kind in LatticeKind::ALL {
        let r = quadratic_limit_check(kind, 1.0, &bs, 1.0, 20).unwrap();
        // Gaps to the series limit shrink like B².
        assert!(r.min_ratio(false) > 3.5, "{kind}: {:?}", r.rows);
        assert!(r.rows.last().unwrap().gap_series < 1e-2);
    }
    let hx = quadratic_limit_check(LatticeKind::Hx, 1.0, &bs, 1.0, 20).unwrap();
    assert!(hx.rows.iter().all(|row| row.gap_stated > 5.0));
}
