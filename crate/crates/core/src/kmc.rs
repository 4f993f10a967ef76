//! Kinetic Monte Carlo for the killed hopping process.
//!
//! Rates are Arrhenius in the exact or asymptotic barrier. A trajectory is
//! killed when a hop leaving `Pos^ε_n` is selected; its state is then held for
//! the remainder of the horizon when sampled on a time grid.

use std::io::Write;
use std::sync::Arc;

use dashmap::DashMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::barrier::{asymptotic_barrier, exact_barrier_fast, hops, Hop, Transition};
use crate::complex::DomainComplex;
use crate::dislocation::{DislocationState, PotentialParams};
use crate::error::{Error, Result};
use crate::force::ForceModel;
use crate::geom::Vec2;
use crate::ldp::{core_hamiltonian, tr_corrector, LdpParams, Stars};
use crate::lattice::LatticeKind;
use crate::par::{map_range, Exec};
use crate::solver::GreensCache;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierMode {
    Exact,
    Asymptotic,
}

impl std::str::FromStr for BarrierMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(BarrierMode::Exact),
            "asymptotic" => Ok(BarrierMode::Asymptotic),
            _ => Err(Error::InvalidInput(format!("unknown barrier mode {s:?}"))),
        }
    }
}

/// Either physical parameters or the dimensionless groups `(A, B)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    Physical { lambda: f64, beta: f64, a0: f64, t_n: f64 },
    Dimensionless { a: f64, b: f64 },
}

impl RateModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RateModel::Physical { lambda, beta, a0, t_n } => {
                lambda > 0.0 && beta >= 0.0 && a0 > 0.0 && t_n > 0.0 && [lambda, beta, a0, t_n].iter().all(|v| v.is_finite())
            }
            RateModel::Dimensionless { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid rate parameters {self:?}")))
        }
    }

    /// Energy scale used for barriers; dimensionless rates only see `B_n/λ`.
    pub fn lambda(&self) -> f64 {
        match *self {
            RateModel::Physical { lambda, .. } => lambda,
            RateModel::Dimensionless { .. } => 1.0,
        }
    }

    pub fn ldp_params(&self, n: u32, c0: f64) -> Result<LdpParams> {
        match *self {
            RateModel::Physical { lambda, beta, a0, t_n } => LdpParams::from_physical(n, lambda, beta, a0, t_n, c0),
            RateModel::Dimensionless { a, b } => LdpParams::new(a, b),
        }
    }

    /// `ln R` for a barrier `barrier` (in units of `self.lambda()`).
    pub fn log_rate(&self, n: u32, c0: f64, barrier: f64) -> f64 {
        match *self {
            RateModel::Physical { beta, a0, t_n, .. } => (t_n * a0).ln() - beta * barrier,
            RateModel::Dimensionless { a, b } => {
                let n = n as f64;
                (n * a).ln() - 2.0 * n * b * (barrier - c0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmcConfig {
    pub rates: RateModel,
    /// Horizon in scaled time.
    pub t_horizon: f64,
    pub seed: u64,
    pub barrier_mode: BarrierMode,
}

impl KmcConfig {
    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        if !(self.t_horizon > 0.0 && self.t_horizon.is_finite()) {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        Ok(())
    }
}

/// A neighbouring state, or a hop that leaves `Pos^ε_n`.
#[derive(Clone, Debug, Serialize)]
pub struct Neighbor {
    pub hop: Hop,
    pub state: DislocationState,
    pub exit: bool,
}

/// All single-core nearest-neighbour hops of `mu`.
pub fn neighbor_states(dom: &DomainComplex, mu: &DislocationState) -> Vec<Neighbor> {
    hops(dom, mu)
        .into_iter()
        .map(|h| Neighbor { state: mu.moved(h.core, h.to), exit: !h.admissible, hop: h })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RateEntry {
    pub hop: Hop,
    pub barrier: f64,
    pub rate: f64,
    /// Selecting this entry kills the trajectory.
    pub exit: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateTable {
    pub entries: Vec<RateEntry>,
    pub total: f64,
    pub mode: BarrierMode,
}

impl RateTable {
    pub fn new(entries: Vec<RateEntry>, mode: BarrierMode) -> Result<Self> {
        if let Some(e) = entries.iter().find(|e| !(e.rate > 0.0 && e.rate.is_finite())) {
            return Err(Error::BarrierUnavailable(format!("rate {} for hop {:?}", e.rate, e.hop.vector)));
        }
        let total = entries.iter().map(|e| e.rate).sum();
        Ok(RateTable { entries, total, mode })
    }

    /// Index of the entry selected by `u ∈ [0, 1)`.
    pub fn select(&self, u: f64) -> usize {
        let target = u * self.total;
        let mut acc = 0.0;
        for (k, e) in self.entries.iter().enumerate() {
            acc += e.rate;
            if target < acc {
                return k;
            }
        }
        self.entries.len() - 1
    }

    /// Waiting time and selected entry.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, usize) {
        let tau = Exp::new(self.total).expect("positive total rate").sample(rng);
        (tau, self.select(rng.random::<f64>()))
    }
}

/// Rates `R = exp(log_rate(B))` for the given hops and barriers.
pub fn rates(
    hops: &[Hop],
    barriers: &[f64],
    model: &RateModel,
    n: u32,
    c0: f64,
    mode: BarrierMode,
) -> Result<RateTable> {
    if hops.len() != barriers.len() {
        return Err(Error::InvalidInput("one barrier per hop required".into()));
    }
    let entries = hops
        .iter()
        .zip(barriers)
        .map(|(h, &b)| RateEntry { hop: h.clone(), barrier: b, rate: model.log_rate(n, c0, b).exp(), exit: !h.admissible })
        .collect();
    RateTable::new(entries, mode)
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Move { tau: f64, entry: usize, next: DislocationState },
    Killed { tau: f64, entry: usize },
    /// The state lies on `∂Pos^ε_n`; the generator vanishes there.
    Absorbed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    HorizonReached,
    Killed,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub index: u64,
    /// `(time, state)` with the initial state at time zero.
    pub events: Vec<(f64, DislocationState)>,
    pub status: TerminalStatus,
    pub kill_time: Option<f64>,
    pub horizon: f64,
}

impl Trajectory {
    /// State at time `t` (piecewise constant, held after killing).
    pub fn state_at(&self, t: f64) -> &DislocationState {
        let k = self.events.partition_point(|e| e.0 <= t);
        &self.events[k.max(1) - 1].1
    }

    /// CSV rows `t, core1_x, core1_y, ...` in macroscopic coordinates.
    pub fn write_csv<W: Write>(&self, dom: &DomainComplex, header: &str, mut w: W) -> Result<()> {
        for line in header.lines() {
            writeln!(w, "# {line}")?;
        }
        let m = self.events[0].1.m();
        let cols: Vec<String> = (1..=m).flat_map(|i| [format!("core{i}_x"), format!("core{i}_y")]).collect();
        writeln!(w, "t,{}", cols.join(","))?;
        for (t, s) in &self.events {
            let xs: Vec<String> = s.macro_positions(dom).iter().flat_map(|p| [format!("{:.12e}", p.x), format!("{:.12e}", p.y)]).collect();
            writeln!(w, "{t:.12e},{}", xs.join(","))?;
        }
        Ok(())
    }
}

/// Grid-sampled ensemble statistics.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub count: usize,
    pub times: Vec<f64>,
    /// Mean macroscopic coordinates `(x1, y1, x2, ...)` per time.
    pub mean: Vec<Vec<f64>>,
    pub covariance: Vec<Vec<Vec<f64>>>,
    pub kill_fraction: f64,
    #[serde(skip)]
    pub paths: Vec<Vec<Vec<f64>>>,
}

impl EnsembleSummary {
    /// Mean and standard error of an observable of the coordinates per time.
    pub fn observable(&self, f: impl Fn(&[f64]) -> f64) -> Vec<(f64, f64)> {
        let n = self.paths.len() as f64;
        (0..self.times.len())
            .map(|k| {
                let v: Vec<f64> = self.paths.iter().map(|p| f(&p[k])).collect();
                let m = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
                (m, (var / n).sqrt())
            })
            .collect()
    }
}

/// Distance between the first two cores of flattened coordinates.
pub fn separation(c: &[f64]) -> f64 {
    Vec2::new(c[0] - c[2], c[1] - c[3]).norm()
}

/// Per-trajectory generator: ChaCha20 seeded by the master seed, with the
/// trajectory index as stream.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub struct KmcEngine {
    pub cache: Arc<GreensCache>,
    pub config: KmcConfig,
    force: Option<Arc<dyn ForceModel>>,
    memo: DashMap<DislocationState, Arc<RateTable>>,
}

impl KmcEngine {
    pub fn new(cache: Arc<GreensCache>, config: KmcConfig) -> Result<Self> {
        config.validate()?;
        Ok(KmcEngine { cache, config, force: None, memo: DashMap::new() })
    }

    /// Supplies forces for the asymptotic barrier mode.
    pub fn with_force(mut self, force: Arc<dyn ForceModel>) -> Self {
        self.force = Some(force);
        self
    }

    pub fn dom(&self) -> &Arc<DomainComplex> {
        &self.cache.dom
    }

    pub fn memo_size(&self) -> usize {
        self.memo.len()
    }

    fn barriers(&self, mu: &DislocationState, hs: &[Hop]) -> Result<Vec<f64>> {
        let dom = self.dom();
        let lambda = self.config.rates.lambda();
        match self.config.barrier_mode {
            BarrierMode::Exact => {
                let params = PotentialParams::new(lambda)?;
                hs.iter()
                    .map(|h| {
                        let tr = Transition { mu: mu.clone(), hop: h.clone() };
                        exact_barrier_fast(&self.cache, &tr, &params).map(|r| r.1)
                    })
                    .collect()
            }
            BarrierMode::Asymptotic => {
                let force = self.force.as_ref().ok_or_else(|| Error::BarrierUnavailable("no force model for asymptotic barriers".into()))?;
                let f = force.forces(&mu.macro_positions(dom), &mu.signs)?;
                let c0 = dom.spec.c0();
                Ok(hs.iter().map(|h| asymptotic_barrier(c0, lambda, mu.n, f[h.core].dot(h.vector))).collect())
            }
        }
    }

    /// Rate table of `mu`, memoised per state.
    pub fn rates(&self, mu: &DislocationState) -> Result<Arc<RateTable>> {
        if let Some(t) = self.memo.get(mu) {
            return Ok(t.clone());
        }
        let dom = self.dom();
        let hs = hops(dom, mu);
        let b = self.barriers(mu, &hs)?;
        let t = Arc::new(rates(&hs, &b, &self.config.rates, mu.n, dom.spec.c0(), self.config.barrier_mode)?);
        self.memo.insert(mu.clone(), t.clone());
        Ok(t)
    }

    pub fn step<R: Rng + ?Sized>(&self, mu: &DislocationState, rng: &mut R) -> Result<StepOutcome> {
        if !mu.is_admissible(self.dom()) {
            return Ok(StepOutcome::Absorbed);
        }
        let table = self.rates(mu)?;
        let (tau, k) = table.sample(rng);
        let e = &table.entries[k];
        if e.exit {
            Ok(StepOutcome::Killed { tau, entry: k })
        } else {
            Ok(StepOutcome::Move { tau, entry: k, next: mu.moved(e.hop.core, e.hop.to) })
        }
    }

    /// Runs trajectory `index` from `mu0` to the horizon or killing.
    pub fn simulate(&self, mu0: &DislocationState, index: u64) -> Result<Trajectory> {
        mu0.check_admissible(self.dom())?;
        let mut rng = trajectory_rng(self.config.seed, index);
        let horizon = self.config.t_horizon;
        let mut events = vec![(0.0, mu0.clone())];
        let mut t = 0.0;
        let mut mu = mu0.clone();
        loop {
            match self.step(&mu, &mut rng)? {
                StepOutcome::Absorbed => {
                    return Ok(Trajectory { index, events, status: TerminalStatus::Killed, kill_time: Some(t), horizon });
                }
                StepOutcome::Killed { tau, .. } => {
                    if t + tau > horizon {
                        break;
                    }
                    return Ok(Trajectory { index, events, status: TerminalStatus::Killed, kill_time: Some(t + tau), horizon });
                }
                StepOutcome::Move { tau, next, .. } => {
                    if t + tau > horizon {
                        break;
                    }
                    t += tau;
                    mu = next;
                    events.push((t, mu.clone()));
                }
            }
        }
        Ok(Trajectory { index, events, status: TerminalStatus::HorizonReached, kill_time: None, horizon })
    }

    /// Runs `count` trajectories and samples them on `grid`.
    pub fn ensemble(&self, mu0: &DislocationState, count: usize, grid: &[f64], exec: Exec) -> Result<EnsembleSummary> {
        let dom = self.dom();
        let runs: Vec<Result<(Vec<Vec<f64>>, bool)>> = map_range(exec, count, |k| {
            let tr = self.simulate(mu0, k as u64)?;
            let path = grid
                .iter()
                .map(|&t| tr.state_at(t).macro_positions(dom).iter().flat_map(|p| [p.x, p.y]).collect())
                .collect();
            Ok((path, tr.status == TerminalStatus::Killed))
        });
        let mut paths = Vec::with_capacity(count);
        let mut killed = 0usize;
        for r in runs {
            let (p, k) = r?;
            paths.push(p);
            killed += k as usize;
        }
        let d = 2 * mu0.m();
        let nf = count as f64;
        let mut mean = vec![vec![0.0; d]; grid.len()];
        let mut cov = vec![vec![vec![0.0; d]; d]; grid.len()];
        for k in 0..grid.len() {
            for p in &paths {
                for a in 0..d {
                    mean[k][a] += p[k][a] / nf;
                }
            }
            for p in &paths {
                for a in 0..d {
                    for b in 0..d {
                        cov[k][a][b] += (p[k][a] - mean[k][a]) * (p[k][b] - mean[k][b]) / (nf - 1.0).max(1.0);
                    }
                }
            }
        }
        Ok(EnsembleSummary { count, times: grid.to_vec(), mean, covariance: cov, kill_fraction: killed as f64 / nf, paths })
    }
}

/// Generator gaps at one scale.
#[derive(Clone, Debug, Serialize)]
pub struct GeneratorGap {
    pub n: u32,
    pub states: usize,
    pub sup_gap: f64,
    /// Gap with the triangular corrector applied (Tr only).
    pub sup_gap_corrected: Option<f64>,
}

/// `sup |H_n(f∘ι_n)(μ) - 𝓗(x, ∇f(x))|` over the given states, for a linear
/// test function `f(x) = Σ_i p_i·x_i`.
///
/// `H_n f = n⁻¹e^{-nf}Ω_n e^{nf}` sums over admissible neighbours; the limit
/// uses forces from `force` at the matched macroscopic positions.
pub fn nonlinear_generator_check(
    engine: &KmcEngine,
    states: &[DislocationState],
    p: &[Vec2],
    force: &dyn ForceModel,
) -> Result<GeneratorGap> {
    let dom = engine.dom();
    let kind = dom.kind();
    let n = states.first().map_or(0, |s| s.n);
    let params = engine.config.rates.ldp_params(n, dom.spec.c0())?;
    let stars = Stars::of(kind);
    let nf = n as f64;
    let mut sup = 0.0f64;
    let mut sup_c = 0.0f64;
    for mu in states {
        let x = mu.macro_positions(dom);
        let g = force.forces(&x, &mu.signs)?;
        let limit: f64 = (0..mu.m()).map(|i| core_hamiltonian(&stars, params, g[i], p[i]).0).sum();
        let table = engine.rates(mu)?;
        let corr = |s: &DislocationState, i: usize| -> Result<f64> {
            let c = tr_corrector(&stars, params, g[i], p[i]);
            Ok(if s.cores[i].t == 0 { c.h_plus } else { c.h_minus })
        };
        let (mut h, mut hc) = (0.0, 0.0);
        for e in table.entries.iter().filter(|e| !e.exit) {
            let df = nf * p[e.hop.core].dot(e.hop.vector / nf);
            h += e.rate / nf * (df.exp() - 1.0);
            if kind == LatticeKind::Tr {
                let nu = mu.moved(e.hop.core, e.hop.to);
                let dh = corr(&nu, e.hop.core)? - corr(mu, e.hop.core)?;
                hc += e.rate / nf * ((df + dh).exp() - 1.0);
            }
        }
        sup = sup.max((h - limit).abs());
        sup_c = sup_c.max((hc - limit).abs());
    }
    Ok(GeneratorGap { n, states: states.len(), sup_gap: sup, sup_gap_corrected: (kind == LatticeKind::Tr).then_some(sup_c) })
}
