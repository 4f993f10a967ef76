use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use disloc_core::barrier::{asymptotic_barrier, exact_barrier, hops, state_hash, BarrierRow, Transition};
use disloc_core::complex::{build_domain, DomainComplex};
use disloc_core::ddd::{ddd_integrate, rate_functional, DddOptions, PolyPath};
use disloc_core::dislocation::{equilibrium, equilibrium_residuals, strain_energy, DislocationState, PotentialParams};
use disloc_core::force::{ForceMesh, ForceModel, MeshSpec, PkForce, PkForceConfig};
use disloc_core::geom::Vec2;
use disloc_core::kmc::{nonlinear_generator_check, separation, BarrierMode, KmcConfig, KmcEngine};
use disloc_core::ldp::MacroState;
use disloc_core::par::Exec;
use disloc_core::solver::GreensCache;
use disloc_core::{build_lattice, LatticeKind};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CmdError {
    Config(String),
    Numeric(disloc_core::Error),
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Config(m) => write!(f, "configuration error: {m}"),
            CmdError::Numeric(e) => write!(f, "numeric failure: {e}"),
        }
    }
}

impl From<disloc_core::Error> for CmdError {
    fn from(e: disloc_core::Error) -> Self {
        CmdError::Numeric(e)
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Numeric(e.into())
    }
}

impl From<csv::Error> for CmdError {
    fn from(e: csv::Error) -> Self {
        CmdError::Numeric(disloc_core::Error::InvalidInput(format!("csv: {e}")))
    }
}

impl From<serde_json::Error> for CmdError {
    fn from(e: serde_json::Error) -> Self {
        CmdError::Numeric(e.into())
    }
}

pub type CmdResult = Result<Vec<PathBuf>, CmdError>;

/// Knobs that override the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub barrier_mode: Option<BarrierMode>,
}

pub fn lattice_info(kind: LatticeKind) -> serde_json::Value {
    let spec = build_lattice(kind);
    let k_star = spec.k_star as f64;
    json!({
        "kind": kind,
        "K": spec.k,
        "V": spec.v,
        "dual_kind": spec.dual_kind,
        "K_star": spec.k_star,
        "V_star": spec.v_star,
        "neighbor_dirs": spec.neighbor_dirs,
        "dual_neighbor_dirs": spec.dual_neighbor_dirs,
        "d_hop": spec.d_hop,
        "c0": spec.c0(),
        "c0_unsigned": 0.125 + 0.25 / k_star,
    })
}

fn domain(cfg: &RunConfig, n: u32) -> Result<Arc<DomainComplex>, CmdError> {
    let spec = build_lattice(cfg.lattice);
    build_domain(&spec, &cfg.polygon(), n).map(Arc::new).map_err(|e| CmdError::Config(format!("field `polygon`/`n`: {e}")))
}

/// Dislocations matched to the nearest faces at scale `n`.
pub fn initial_state(cfg: &RunConfig, dom: &DomainComplex, n: u32) -> Result<DislocationState, CmdError> {
    let mut cores = Vec::new();
    for (i, d) in cfg.dislocations.iter().enumerate() {
        let f = dom
            .nearest_face(Vec2::new(d.x, d.y) * n as f64)
            .ok_or_else(|| CmdError::Config(format!("field `dislocations[{i}]`: position outside the domain")))?;
        cores.push(dom.faces[f]);
    }
    let signs = cfg.dislocations.iter().map(|d| d.b).collect();
    let st = DislocationState::new(n, cfg.epsilon, cores, signs).map_err(|e| CmdError::Config(e.to_string()))?;
    st.check_admissible(dom).map_err(|e| CmdError::Config(format!("field `dislocations`: {e}")))?;
    Ok(st)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<PathBuf, CmdError> {
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, v)?;
    Ok(path.to_path_buf())
}

fn coord_header(m: usize) -> Vec<String> {
    std::iter::once("t".to_string()).chain((1..=m).flat_map(|i| [format!("core{i}_x"), format!("core{i}_y")])).collect()
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn equilibrium_cmd(cfg: &RunConfig, out: &Path) -> CmdResult {
    let n = cfg.scale();
    let dom = domain(cfg, n)?;
    let st = initial_state(cfg, &dom, n)?;
    let cache = GreensCache::new(&dom)?;
    let eq = equilibrium(&cache, &st)?;
    let (r_d, r_delta) = equilibrium_residuals(&eq)?;
    let params = PotentialParams::new(cfg.lambda())?;
    let mut files = Vec::new();

    let p = out.join("strain.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["edge", "tail_x", "tail_y", "head_x", "head_y", "alpha"])?;
    for (e, &(a, b)) in dom.edge_ends.iter().enumerate() {
        let (pa, pb) = (dom.vertex_pos[a], dom.vertex_pos[b]);
        w.write_record([e.to_string(), fmt(pa.x), fmt(pa.y), fmt(pb.x), fmt(pb.y), fmt(eq.alpha.values[e])])?;
    }
    w.flush()?;
    files.push(p);

    let p = out.join("displacement.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["vertex", "x", "y", "u"])?;
    for (v, pos) in dom.vertex_pos.iter().enumerate() {
        w.write_record([v.to_string(), fmt(pos.x), fmt(pos.y), fmt(eq.u.values[v])])?;
    }
    w.flush()?;
    files.push(p);

    let alpha_inf = eq.alpha.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    files.push(write_json(
        &out.join("equilibrium.json"),
        &json!({
            "n": n,
            "state": st,
            "state_hash": state_hash(&st),
            "energy": strain_energy(&eq.alpha, &params),
            "residual_d_alpha_minus_mu": r_d,
            "residual_delta_alpha": r_delta,
            "alpha_inf": alpha_inf,
        }),
    )?);
    Ok(files)
}

fn pk_force(cfg: &RunConfig) -> Result<PkForce, CmdError> {
    let mut fc = PkForceConfig::new(cfg.lattice);
    fc.polygon = cfg.polygon();
    if let Some(d) = &cfg.ddd {
        fc.n_coarse = d.force_n_coarse;
    }
    Ok(PkForce::new(fc)?)
}

fn barrier_rows(cfg: &RunConfig, n: u32, force: &dyn ForceModel) -> Result<(Vec<BarrierRow>, DislocationState), CmdError> {
    let dom = domain(cfg, n)?;
    let st = initial_state(cfg, &dom, n)?;
    let cache = GreensCache::new(&dom)?;
    let params = PotentialParams::new(cfg.lambda())?;
    let f = force.forces(&st.macro_positions(&dom), &st.signs)?;
    let c0 = dom.spec.c0();
    let mut rows = Vec::new();
    for h in hops(&dom, &st).into_iter().filter(|h| h.admissible) {
        let tr = Transition { mu: st.clone(), hop: h.clone() };
        let r = exact_barrier(&cache, &tr, &params)?;
        rows.push(BarrierRow {
            state_hash: state_hash(&st),
            core: h.core,
            hop_x: h.vector.x,
            hop_y: h.vector.y,
            t: r.t,
            b_exact: r.b_exact,
            b_asym: asymptotic_barrier(c0, params.lambda, n, f[h.core].dot(h.vector)),
        });
    }
    Ok((rows, st))
}

pub fn barrier_cmd(cfg: &RunConfig, out: &Path) -> CmdResult {
    let force = pk_force(cfg)?;
    let (rows, _) = barrier_rows(cfg, cfg.scale(), &force)?;
    let p = out.join("barriers.csv");
    disloc_core::barrier::write_barrier_csv(&rows, BufWriter::new(File::create(&p)?))?;
    Ok(vec![p])
}

pub fn convergence_cmd(cfg: &RunConfig, out: &Path) -> CmdResult {
    let force = pk_force(cfg)?;
    let lambda = cfg.lambda();
    let p1 = out.join("barrier_asymptotics.csv");
    let mut w = csv::Writer::from_path(&p1)?;
    w.write_record(["n", "core", "hop_x", "hop_y", "t", "B_exact", "lambda_c0", "force_term", "abs_B_minus_lambda_c0", "scaled_residual"])?;
    let p2 = out.join("generator_convergence.csv");
    let mut wg = csv::Writer::from_path(&p2)?;
    wg.write_record(["n", "states", "sup_gap", "sup_gap_corrected"])?;
    for n in cfg.scales() {
        let (rows, st) = barrier_rows(cfg, n, &force)?;
        let c0 = build_lattice(cfg.lattice).c0();
        for r in &rows {
            let ft = r.b_asym - lambda * c0;
            w.write_record([
                n.to_string(),
                r.core.to_string(),
                fmt(r.hop_x),
                fmt(r.hop_y),
                fmt(r.t),
                fmt(r.b_exact),
                fmt(lambda * c0),
                fmt(ft),
                fmt((r.b_exact - lambda * c0).abs()),
                fmt(n as f64 * (r.b_exact - r.b_asym).abs()),
            ])?;
        }
        let dom = domain(cfg, n)?;
        let cache = Arc::new(GreensCache::new(&dom)?);
        let kc = KmcConfig { rates: cfg.rate_model(), t_horizon: 1.0, seed: cfg.seed, barrier_mode: BarrierMode::Exact };
        let eng = KmcEngine::new(cache, kc)?;
        let p = vec![Vec2::new(0.8, -0.5); st.m()];
        let g = nonlinear_generator_check(&eng, &[st], &p, &force)?;
        wg.write_record([
            n.to_string(),
            g.states.to_string(),
            fmt(g.sup_gap),
            g.sup_gap_corrected.map(fmt).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    wg.flush()?;
    Ok(vec![p1, p2])
}

pub fn kmc_cmd(cfg: &RunConfig, ov: &Overrides, out: &Path) -> CmdResult {
    let opts = cfg.kmc.clone().ok_or_else(|| CmdError::Config("field `kmc`: block required for this command".into()))?;
    let n = cfg.scale();
    let dom = domain(cfg, n)?;
    let st = initial_state(cfg, &dom, n)?;
    let mode = ov.barrier_mode.unwrap_or(opts.barrier_mode);
    let kc = KmcConfig { rates: cfg.rate_model(), t_horizon: opts.horizon, seed: ov.seed.unwrap_or(cfg.seed), barrier_mode: mode };
    let mut eng = KmcEngine::new(Arc::new(GreensCache::new(&dom)?), kc.clone())?;
    if mode == BarrierMode::Asymptotic {
        eng = eng.with_force(Arc::new(pk_force(cfg)?));
    }
    let grid: Vec<f64> = (0..opts.grid_points).map(|k| opts.horizon * k as f64 / (opts.grid_points - 1) as f64).collect();
    let ens = eng.ensemble(&st, opts.trajectories, &grid, Exec::default())?;
    let mut files = Vec::new();
    let header = json!({ "config": cfg, "kmc": kc, "n": n });

    let p = out.join("mean_path.csv");
    let mut w = csv::Writer::from_path(&p)?;
    let mut head = coord_header(st.m());
    if st.m() == 2 {
        head.extend(["separation_of_mean".to_string(), "mean_separation".to_string(), "mean_separation_se".to_string()]);
    }
    w.write_record(&head)?;
    let sep = (st.m() == 2).then(|| ens.observable(separation));
    for (k, &t) in grid.iter().enumerate() {
        let mut rec: Vec<String> = std::iter::once(fmt(t)).chain(ens.mean[k].iter().map(|&v| fmt(v))).collect();
        if let Some(s) = &sep {
            rec.extend([fmt(separation(&ens.mean[k])), fmt(s[k].0), fmt(s[k].1)]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    files.push(p);

    files.push(write_json(&out.join("ensemble.json"), &json!({ "header": header, "summary": ens }))?);

    let tr = eng.simulate(&st, 0)?;
    let p = out.join("trajectory_0.csv");
    tr.write_csv(&dom, &serde_json::to_string(&header)?, BufWriter::new(File::create(&p)?))?;
    files.push(p);
    files.push(write_json(&out.join("trajectory_0.json"), &json!({ "header": header, "trajectory": tr }))?);
    Ok(files)
}

pub fn ddd_cmd(cfg: &RunConfig, out: &Path) -> CmdResult {
    let opts = cfg.ddd.clone().ok_or_else(|| CmdError::Config("field `ddd`: block required for this command".into()))?;
    let n = cfg.scale();
    let spec = build_lattice(cfg.lattice);
    let dpoly = cfg.polygon().realize(&spec).map_err(|e| CmdError::Config(format!("field `polygon`: {e}")))?;
    let x0: Vec<Vec2> = cfg.dislocations.iter().map(|d| Vec2::new(d.x, d.y)).collect();
    let signs: Vec<i8> = cfg.dislocations.iter().map(|d| d.b).collect();
    let ms = MacroState::new(x0.clone(), signs.clone(), cfg.epsilon)?;
    let params = cfg.rate_model().ldp_params(n, spec.c0())?;
    let pk: Arc<dyn ForceModel> = Arc::new(pk_force(cfg)?);
    let force: Arc<dyn ForceModel> = match &opts.mesh {
        Some(m) => {
            let lo = x0.iter().flat_map(|p| [p.x - m.half_width, p.y - m.half_width]).collect();
            let hi = x0.iter().flat_map(|p| [p.x + m.half_width, p.y + m.half_width]).collect();
            let spec = MeshSpec { lo, hi, counts: vec![m.nodes; 2 * x0.len()] };
            Arc::new(ForceMesh::new(pk, spec, signs.clone())?)
        }
        None => pk,
    };
    let dopts = DddOptions { rtol: opts.rtol, atol: opts.rtol * 1e-2, ..DddOptions::default() };
    let traj = ddd_integrate(&ms, opts.horizon, &dpoly, params, force.as_ref(), &dopts)?;
    let grid: Vec<f64> = (0..opts.grid_points).map(|k| opts.horizon * k as f64 / (opts.grid_points - 1) as f64).collect();
    let path = PolyPath::from_ode(&traj, &grid);
    let j = rate_functional(&path, &signs, cfg.epsilon, &dpoly, params, force.as_ref())?;

    let p = out.join("ddd_trajectory.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(coord_header(x0.len()))?;
    for row in traj.sample(&grid) {
        w.write_record(row.iter().map(|&v| fmt(v)))?;
    }
    w.flush()?;
    let mut files = vec![p];
    files.push(write_json(
        &out.join("ddd.json"),
        &json!({
            "params": params,
            "status": traj.status,
            "stop_time": traj.stop_time,
            "steps": traj.times.len(),
            "rate_functional": j,
            "final_state": traj.final_state(),
        }),
    )?);
    Ok(files)
}

/// Creates `out` if needed.
pub fn prepare_out(out: &Path) -> Result<(), CmdError> {
    fs::create_dir_all(out).map_err(|e| CmdError::Config(format!("output directory {}: {e}", out.display())))
}
