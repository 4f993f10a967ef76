//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process fails only if an outcome differs from the expected one.

mod common;

use std::sync::Arc;
use std::time::Instant;

use disloc_core::barrier::{exact_barrier, hops, Transition};
use disloc_core::complex::{ConvexLatticePolygon, DomainComplex};
use disloc_core::ddd::{ddd_integrate, DddOptions, OdeStatus};
use disloc_core::dislocation::{burgers, equilibrium, equilibrium_residuals, is_locally_stable, DislocationState, PotentialParams};
use disloc_core::force::{ForceModel, PkForce, PkForceConfig};
use disloc_core::full_lattice::{FullLatticeGreens, DEFAULT_TOL};
use disloc_core::kmc::{
    nonlinear_generator_check, separation, trajectory_rng, BarrierMode, KmcConfig, KmcEngine, RateEntry, RateModel, RateTable,
};
use disloc_core::ldp::{
    conjugate, core_hamiltonian, core_lagrangian, mobility_core, phi, psi_star, quadratic_limit_check, LdpParams, MacroState,
    Stars,
};
use disloc_core::par::Exec;
use disloc_core::solver::GreensCache;
use disloc_core::{build_lattice, CellKey, LatticeKind, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{center, dom, ks_critical_1pct, ks_statistic, nearest_face_of, single};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_state(d: &DomainComplex, rng: &mut impl Rng) -> DislocationState {
    loop {
        let m = rng.random_range(1..=3);
        let mut faces: Vec<usize> = (0..m).map(|_| rng.random_range(0..d.faces.len())).collect();
        faces.sort_unstable();
        faces.dedup();
        let cores: Vec<CellKey> = faces.iter().map(|&f| d.faces[f]).collect();
        let signs: Vec<i8> = (0..cores.len()).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        if let Ok(s) = DislocationState::new(d.n, 0.1, cores, signs) {
            if s.is_admissible(d) {
                return s;
            }
        }
    }
}

fn c1_full_lattice() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in LatticeKind::ALL {
        let t0 = Instant::now();
        let t = FullLatticeGreens::compute(kind, 64.0, DEFAULT_TOL, Exec::Parallel).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        let spec = build_lattice(kind);
        let origin = t.position(0, 0, 0);
        // Every neighbour of the origin site.
        let mut worst: f64 = 0.0;
        for (i, j, s, v) in t.entries() {
            let p = t.position(i, j, s);
            if spec.neighbor_dirs[0].iter().any(|&d| (origin + d).dist(p) < 1e-9) {
                worst = worst.max((v.abs() - 1.0 / spec.k as f64).abs());
            }
        }
        pass &= worst < 1e-8 && secs < 10.0;
        parts.push(format!("{kind}: err {worst:.1e} in {secs:.2}s"));
    }
    outcome(pass, parts.join(", "))
}

fn c2_equilibria() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = PotentialParams::default();
    let (mut worst_delta, mut worst_sup, mut exact, mut stable) = (0f64, 0f64, true, true);
    for kind in LatticeKind::ALL {
        let d = dom(kind, 24);
        let cache = GreensCache::new(&d).unwrap();
        for _ in 0..20 {
            let s = random_state(&d, &mut rng);
            let eq = equilibrium(&cache, &s).unwrap();
            let (_, r2) = equilibrium_residuals(&eq).unwrap();
            exact &= burgers(&eq.alpha).unwrap().values == s.mu_form(&d).unwrap().values;
            worst_delta = worst_delta.max(r2);
            worst_sup = worst_sup.max(eq.alpha.norm_inf());
            stable &= is_locally_stable(&eq.u, &p, 10, 1e-3, &mut rng).unwrap();
        }
    }
    outcome(
        exact && worst_delta < 1e-10 && worst_sup < 0.5 && stable,
        format!("60 states, dα = μ exact: {exact}, max |δα| {worst_delta:.1e}, max |α| {worst_sup:.3}, stable: {stable}"),
    )
}

fn c3_barrier_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = PotentialParams::new(1.3).unwrap();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for kind in LatticeKind::ALL {
        let d = dom(kind, 16);
        let cache = GreensCache::new(&d).unwrap();
        let mut done = 0;
        while done < 17 {
            let s = random_state(&d, &mut rng);
            for hop in hops(&d, &s).into_iter().filter(|h| h.admissible).take(3) {
                let tr = Transition { mu: s.clone(), hop };
                // exact_barrier itself rejects a mismatch; report the margin.
                let r = exact_barrier(&cache, &tr, &p).unwrap();
                worst = worst.max((r.b_exact - r.b_direct).abs() / r.b_exact.abs());
                done += 1;
            }
        }
        count += done;
    }
    outcome(worst <= 1e-9, format!("{count} transitions, max relative gap {worst:.1e}"))
}

/// Max over hops of `n·|B - λc₀ - ½λn⁻¹∂𝓔·a*|` for a centred core on Sq.
fn c4_errors(c0: f64) -> Vec<f64> {
    let pk = PkForce::new(PkForceConfig::new(LatticeKind::Sq)).unwrap();
    let p = PotentialParams::new(1.0).unwrap();
    [16u32, 24, 32, 48]
        .iter()
        .map(|&n| {
            let d = dom(LatticeKind::Sq, n);
            let cache = GreensCache::new(&d).unwrap();
            let s = single(&d, center(&d), 1, 0.1);
            let f = pk.forces(&s.macro_positions(&d), &s.signs).unwrap();
            let nf = n as f64;
            hops(&d, &s)
                .into_iter()
                .map(|hop| {
                    let tr = Transition { mu: s.clone(), hop };
                    let b = exact_barrier(&cache, &tr, &p).unwrap().b_exact;
                    nf * (b - p.lambda * c0 - 0.5 * p.lambda * f[0].dot(tr.hop.vector) / nf).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

fn c4_asymptotics() -> (Outcome, String) {
    let t0 = Instant::now();
    let stated = c4_errors(3.0 / 16.0);
    let signed = c4_errors(build_lattice(LatticeKind::Sq).c0());
    let secs = t0.elapsed().as_secs_f64();
    let pass = decreasing(&stated) && stated.last().unwrap() < &0.05 && secs < 120.0;
    let info = format!(
        "with c₀ = {:.4}: {} ({})",
        build_lattice(LatticeKind::Sq).c0(),
        fmt(&signed),
        if decreasing(&signed) { "decreasing" } else { "not decreasing" }
    );
    (outcome(pass, format!("c₀ = 3/16, n = 16..48: {} in {secs:.1}s", fmt(&stated))), info)
}

fn c5_interpolant() -> Outcome {
    let p = PotentialParams::default();
    let d = dom(LatticeKind::Sq, 16);
    let cache = GreensCache::new(&d).unwrap();
    // Faces (7.5, 7.5) and (8.5, 7.5) mirror each other across x = 8.
    let s = DislocationState::new(16, 0.1, vec![CellKey::new(7, 7, 0)], vec![1]).unwrap();
    let hop = hops(&d, &s).into_iter().find(|h| h.to == CellKey::new(8, 7, 0)).unwrap();
    let sym = (exact_barrier(&cache, &Transition { mu: s, hop }, &p).unwrap().t - 0.5).abs();
    let mut scaled = Vec::new();
    for n in [16u32, 24, 32, 48] {
        let d = dom(LatticeKind::Sq, n);
        let cache = GreensCache::new(&d).unwrap();
        let s = single(&d, center(&d) + Vec2::new(0.2, 0.1) * n as f64, 1, 0.1);
        let w = hops(&d, &s)
            .into_iter()
            .map(|hop| (exact_barrier(&cache, &Transition { mu: s.clone(), hop }, &p).unwrap().t - 0.5).abs())
            .fold(0.0, f64::max);
        scaled.push(w * n as f64);
    }
    let bounded = scaled.iter().all(|&x| x <= 1.25 * scaled[0]);
    outcome(sym < 1e-10 && bounded, format!("symmetric |t - ½| {sym:.1e}; n|t - ½| over n = 16..48: {}", fmt(&scaled)))
}

fn c6_kmc_statistics() -> Outcome {
    let stub = |r: f64| {
        let d = dom(LatticeKind::Sq, 8);
        let s = single(&d, center(&d), 1, 0.1);
        RateEntry { hop: hops(&d, &s).remove(0), barrier: 0.0, rate: r, exit: false }
    };
    let t = RateTable::new(vec![stub(1.0), stub(3.0)], BarrierMode::Exact).unwrap();
    let mut rng = trajectory_rng(6, 0);
    let draws = 100_000;
    let mut waits = Vec::with_capacity(draws);
    let mut hits = 0usize;
    for _ in 0..draws {
        let (tau, i) = t.sample(&mut rng);
        waits.push(tau);
        hits += i;
    }
    let ks = ks_statistic(&mut waits, |x| 1.0 - (-t.total * x).exp());
    let freq = hits as f64 / draws as f64;
    let z = (freq - 0.75) / (0.75 * 0.25 / draws as f64).sqrt();

    let d = dom(LatticeKind::Tr, 16);
    let cache = Arc::new(GreensCache::new(&d).unwrap());
    let cfg = KmcConfig { rates: RateModel::Dimensionless { a: 1.0, b: 1.0 }, t_horizon: 0.3, seed: 99, barrier_mode: BarrierMode::Exact };
    let c = center(&d);
    let a = d.nearest_face(c - Vec2::new(3.5, 0.0)).unwrap();
    let b = d.nearest_face(c + Vec2::new(3.5, 0.0)).unwrap();
    let s = DislocationState::new(16, 0.1, vec![d.faces[a], d.faces[b]], vec![1, -1]).unwrap();
    let run = || {
        let e = KmcEngine::new(cache.clone(), cfg.clone()).unwrap();
        (0..50).map(|k| e.simulate(&s, k).unwrap().events).collect::<Vec<_>>()
    };
    let identical = run() == run();
    outcome(
        ks < ks_critical_1pct(draws) && z.abs() < 3.0 && identical,
        format!("KS {ks:.4} (crit {:.4}), selection z = {z:.2}, reruns identical: {identical}", ks_critical_1pct(draws)),
    )
}

fn c7_kmc_vs_ddd() -> (Outcome, String) {
    let t0 = Instant::now();
    let kind = LatticeKind::Sq;
    let pk: Arc<dyn ForceModel> = Arc::new(PkForce::new(PkForceConfig::new(kind)).unwrap());
    let poly = ConvexLatticePolygon::default_for(kind).realize(&build_lattice(kind)).unwrap();
    let params = LdpParams::new(1.0, 1.0).unwrap();
    let mut sups = Vec::new();
    let mut last = (0.0, 0.0);
    let mut literal = Vec::new();
    for (n, xa, xb, y) in [(24u32, 7, 16, 11), (32, 10, 22, 15)] {
        let d = dom(kind, n);
        let s = DislocationState::new(n, 0.05, vec![CellKey::new(xa, y, 0), CellKey::new(xb, y, 0)], vec![1, -1]).unwrap();
        let x0 = MacroState::new(s.macro_positions(&d), vec![1, -1], 0.05).unwrap();
        let full = ddd_integrate(&x0, 1.0, &poly, params, pk.as_ref(), &DddOptions::default()).unwrap();
        assert_eq!(full.status, OdeStatus::BoundaryStop);
        // Compare up to half the annihilation time, where the ODE is smooth.
        let horizon = 0.5 * full.stop_time.unwrap();
        let grid: Vec<f64> = (0..=10).map(|k| horizon * k as f64 / 10.0).collect();
        let cfg = KmcConfig { rates: RateModel::Dimensionless { a: 1.0, b: 1.0 }, t_horizon: horizon, seed: 7, barrier_mode: BarrierMode::Exact };
        let engine = KmcEngine::new(Arc::new(GreensCache::new(&d).unwrap()), cfg).unwrap();
        let ens = engine.ensemble(&s, 2000, &grid, Exec::Parallel).unwrap();
        let mean_sep = ens.observable(separation);
        let (mut sup, mut sup_lit) = (0.0f64, 0.0f64);
        for (k, &t) in grid.iter().enumerate() {
            let xd = full.at(t);
            let target = xd[0].dist(xd[1]);
            // Separation of the mean path, with a delta-method standard error.
            let m = &ens.mean[k];
            let diff = Vec2::new(m[0] - m[2], m[1] - m[3]);
            let sep = diff.norm();
            let u = diff / sep.max(1e-300);
            let g = [u.x, u.y, -u.x, -u.y];
            let cov = &ens.covariance[k];
            let var: f64 = (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).map(|(a, b)| g[a] * cov[a][b] * g[b]).sum();
            let se = (var / ens.count as f64).sqrt();
            sup = sup.max((sep - target).abs());
            sup_lit = sup_lit.max((mean_sep[k].0 - target).abs());
            if k == grid.len() - 1 {
                last = ((sep - target).abs(), se);
            }
        }
        sups.push(sup);
        literal.push(sup_lit);
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = sups[1] < sups[0] && last.0 <= 3.0 * last.1 && secs < 600.0;
    (
        outcome(
            pass,
            format!(
                "mean-path separation sup-gap n=24 {:.5}, n=32 {:.5}; final gap {:.5} vs 3σ = {:.5}; {secs:.1}s",
                sups[0],
                sups[1],
                last.0,
                3.0 * last.1
            ),
        ),
        format!("mean of |x₁ - x₂|: sup-gap n=24 {:.5}, n=32 {:.5}", literal[0], literal[1]),
    )
}

fn c8_generator() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let p = [Vec2::new(0.8, -0.5)];
    for kind in LatticeKind::ALL {
        let spec = build_lattice(kind);
        let pk = PkForce::new(PkForceConfig::new(kind)).unwrap();
        let c = ConvexLatticePolygon::default_for(kind).realize(&spec).unwrap().centroid();
        let pts = [c + Vec2::new(0.1, 0.05), c + Vec2::new(-0.12, 0.08), c + Vec2::new(0.05, -0.15)];
        let (mut raw, mut corrected) = (Vec::new(), Vec::new());
        for n in [16u32, 24, 32] {
            let d = dom(kind, n);
            let mut states = Vec::new();
            for &x in &pts {
                for t in 0..spec.dual_sublattices() as u8 {
                    let f = nearest_face_of(&d, x * n as f64, t);
                    states.push(DislocationState::new(n, 0.05, vec![d.faces[f]], vec![1]).unwrap());
                }
            }
            let cfg = KmcConfig { rates: RateModel::Dimensionless { a: 1.0, b: 1.0 }, t_horizon: 1.0, seed: 1, barrier_mode: BarrierMode::Exact };
            let engine = KmcEngine::new(Arc::new(GreensCache::new(&d).unwrap()), cfg).unwrap();
            let g = nonlinear_generator_check(&engine, &states, &p, &pk).unwrap();
            raw.push(g.sup_gap);
            corrected.extend(g.sup_gap_corrected);
        }
        if kind == LatticeKind::Tr {
            let stalls = raw[2] > 0.8 * raw[0];
            pass &= stalls && decreasing(&corrected);
            parts.push(format!("Tr raw {} / corrected {}", fmt(&raw), fmt(&corrected)));
        } else {
            pass &= decreasing(&raw);
            parts.push(format!("{kind} {}", fmt(&raw)));
        }
    }
    outcome(pass, parts.join("; "))
}

fn c9_ldp_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let prm = LdpParams::new(1.0, 1.0).unwrap();
    let rv = |rng: &mut ChaCha8Rng, r: f64| Vec2::new(rng.random_range(-r..r), rng.random_range(-r..r));
    let (mut neg, mut at_mob, mut convex_bad, mut legendre, mut fd) = (f64::INFINITY, 0f64, 0usize, 0f64, 0f64);
    for kind in LatticeKind::ALL {
        let stars = Stars::of(kind);
        for _ in 0..1000 {
            let g = rv(&mut rng, 1.0);
            let (a, b) = (rv(&mut rng, 2.0), rv(&mut rng, 2.0));
            let h = |p: Vec2| core_hamiltonian(&stars, prm, g, p).0;
            if h((a + b) * 0.5) > 0.5 * (h(a) + h(b)) + 1e-12 {
                convex_bad += 1;
            }
        }
        for _ in 0..50 {
            let g = rv(&mut rng, 1.0);
            neg = neg.min(core_lagrangian(&stars, prm, g, rv(&mut rng, 3.0)).unwrap());
            at_mob = at_mob.max(core_lagrangian(&stars, prm, g, mobility_core(&stars, prm, g * -1.0)).unwrap().abs());
            let p = rv(&mut rng, 1.0);
            let (_, grad, _) = core_hamiltonian(&stars, prm, g, p);
            let e = 1e-5;
            let fdg = Vec2::new(
                (core_hamiltonian(&stars, prm, g, p + Vec2::new(e, 0.0)).0 - core_hamiltonian(&stars, prm, g, p - Vec2::new(e, 0.0)).0) / (2.0 * e),
                (core_hamiltonian(&stars, prm, g, p + Vec2::new(0.0, e)).0 - core_hamiltonian(&stars, prm, g, p - Vec2::new(0.0, e)).0) / (2.0 * e),
            );
            fd = fd.max((fdg - grad).norm() / grad.norm().max(1.0));
            if kind != LatticeKind::Tr {
                let xi = rv(&mut rng, 3.0);
                let (v, q, _) = phi(&stars, prm, xi).unwrap();
                let (back, _, _) = conjugate(|x| phi(&stars, prm, x).unwrap(), q, xi).unwrap();
                legendre = legendre.max((back - psi_star(&stars, prm, q).0).abs()).max((v + psi_star(&stars, prm, q).0 - xi.dot(q)).abs());
            }
        }
    }
    outcome(
        neg >= -1e-12 && at_mob <= 1e-6 && convex_bad == 0 && legendre <= 1e-8 && fd <= 1e-6,
        format!(
            "min 𝓛 {neg:.2e}, 𝓛 at mobility {at_mob:.1e}, convexity violations {convex_bad}/3000, Legendre {legendre:.1e}, ∂ₚ𝓗 FD {fd:.1e}"
        ),
    )
}

fn c10_quadratic_limit() -> (Outcome, String) {
    let bs = [0.1, 0.03, 0.01];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut info = Vec::new();
    for kind in LatticeKind::ALL {
        let r = quadratic_limit_check(kind, 1.0, &bs, 2.0, 40).unwrap();
        // Sq and Hx against the stated slope, Tr against the series coefficient.
        let stated = kind != LatticeKind::Tr;
        let ratio = r.min_ratio(stated);
        pass &= ratio >= 3.0;
        parts.push(format!("{kind} ratio {ratio:.2}"));
        if kind == LatticeKind::Hx {
            info.push(format!(
                "Hx stated slope {} vs series slope {}: series ratio {:.2}",
                r.stated_slope,
                r.series_slope,
                r.min_ratio(false)
            ));
        }
    }
    (outcome(pass, parts.join(", ")), info.join("; "))
}

fn main() {
    // Expected outcomes: criterion 4 uses c₀ = 3/16, which is not the constant
    // the exact barriers approach; criterion 10 uses slope 3 on Hx, while the
    // hop star gives 9. Both are reported as FAIL with the corrected values.
    let expected = [true, true, true, false, true, true, true, true, true, false];
    let (c4, c4_info) = c4_asymptotics();
    let (c7, c7_info) = c7_kmc_vs_ddd();
    let (c10, c10_info) = c10_quadratic_limit();
    let results = vec![
        ("full-lattice differences", c1_full_lattice(), None),
        ("equilibrium characterisation", c2_equilibria(), None),
        ("exact-barrier identity", c3_barrier_identity(), None),
        ("barrier asymptotics", c4, Some(c4_info)),
        ("t-interpolant", c5_interpolant(), None),
        ("KMC statistics", c6_kmc_statistics(), None),
        ("KMC-DDD consistency", c7, Some(c7_info)),
        ("generator convergence", c8_generator(), None),
        ("LDP structure", c9_ldp_structure(), None),
        ("quadratic mobility limit", c10, Some(c10_info)),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, o, info)) in results.iter().enumerate() {
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if let Some(info) = info {
            println!("             note: {info}");
        }
        if o.pass != expected[i] {
            unexpected.push(i + 1);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
