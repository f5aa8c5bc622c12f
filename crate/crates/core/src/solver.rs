//! Finite-volume solver for the inhomogeneous ARZ system on a ring road.
//!
//! Conservative variables are `Q = (rho, y)` with `y = rho (u + h(rho))`.
//! Each time step is an explicit HLL update of the homogeneous system followed
//! by an implicit (backward Euler) relaxation of `y` towards equilibrium.

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Cells with density below `DENSITY_FLOOR * rho_max` are treated as vacuum.
pub const DENSITY_FLOOR: f64 = 1e-10;
/// HLL denominators below this are treated as "both wave speeds vanish".
const HLL_DEGENERATE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n_cells: usize,
    pub domain_length: f64,
    pub cfl: f64,
    pub t_final: f64,
}

impl GridConfig {
    pub fn new(n_cells: usize, domain_length: f64, cfl: f64, t_final: f64) -> Result<Self> {
        let g = Self {
            n_cells,
            domain_length,
            cfl,
            t_final,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells < 4 {
            return Err(Error::Grid(format!(
                "need at least 4 cells, got {}",
                self.n_cells
            )));
        }
        if !(self.domain_length > 0.0 && self.domain_length.is_finite()) {
            return Err(Error::Grid(format!(
                "domain length must be positive, got {}",
                self.domain_length
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::Grid(format!(
                "CFL number must lie in (0, 1/2], got {}",
                self.cfl
            )));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Grid(format!(
                "final time must be non-negative, got {}",
                self.t_final
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.domain_length / self.n_cells as f64
    }

    /// Cell-centre coordinates.
    pub fn centers(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_cells).map(|i| (i as f64 + 0.5) * dx).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub t: f64,
    pub rho: Vec<f64>,
    pub y: Vec<f64>,
}

impl GridState {
    /// Samples `(rho, u)` at cell midpoints.
    pub fn from_sampler(
        grid: &GridConfig,
        p: &ModelParams,
        ic: impl Fn(f64) -> (f64, f64),
    ) -> Result<Self> {
        grid.validate()?;
        let mut rho = Vec::with_capacity(grid.n_cells);
        let mut y = Vec::with_capacity(grid.n_cells);
        for x in grid.centers() {
            let (r, u) = ic(x);
            if !(r < p.rho_max) {
                return Err(Error::Domain {
                    quantity: "initial density",
                    value: r,
                    allowed: "0 < rho < rho_max",
                });
            }
            let (r, yy) = to_conservative(r, u, p)?;
            rho.push(r);
            y.push(yy);
        }
        Ok(Self { t: 0.0, rho, y })
    }

    /// Primitive velocities `u_i`.
    pub fn velocity(&self, p: &ModelParams) -> Vec<f64> {
        self.rho
            .iter()
            .zip(&self.y)
            .map(|(&r, &y)| y / r - p.h(r))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

fn floor_guard(rho: f64, p: &ModelParams) -> Result<()> {
    let floor = DENSITY_FLOOR * p.rho_max;
    if rho > floor && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::DensityFloor { rho, floor })
    }
}

/// `(rho, u) -> (rho, y)`.
pub fn to_conservative(rho: f64, u: f64, p: &ModelParams) -> Result<(f64, f64)> {
    floor_guard(rho, p)?;
    Ok((rho, rho * (u + p.h(rho))))
}

/// `(rho, y) -> (rho, u)`.
pub fn from_conservative(rho: f64, y: f64, p: &ModelParams) -> Result<(f64, f64)> {
    floor_guard(rho, p)?;
    Ok((rho, y / rho - p.h(rho)))
}

/// Physical flux `F(Q) = (y - rho h, y^2/rho - y h)`.
pub fn flux(rho: f64, y: f64, p: &ModelParams) -> Result<(f64, f64)> {
    floor_guard(rho, p)?;
    Ok(flux_raw(rho, y, p.h(rho)))
}

#[inline]
fn flux_raw(rho: f64, y: f64, h: f64) -> (f64, f64) {
    (y - rho * h, y * y / rho - y * h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HllFlux {
    pub f1: f64,
    pub f2: f64,
    /// Both wave-speed bounds vanished; the left physical flux was returned.
    pub degenerate: bool,
}

/// Per-cell quantities used by the HLL sweep.
#[derive(Debug, Clone, Copy, Default)]
struct CellData {
    f1: f64,
    f2: f64,
    l1: f64,
    l2: f64,
}

#[inline]
fn cell_data(rho: f64, y: f64, p: &ModelParams) -> CellData {
    let h = p.h(rho);
    let u = y / rho - h;
    let (f1, f2) = flux_raw(rho, y, h);
    CellData {
        f1,
        f2,
        l1: u - p.rho_dh(rho),
        l2: u,
    }
}

#[inline]
fn hll_raw(ql: (f64, f64), qr: (f64, f64), cl: &CellData, cr: &CellData) -> HllFlux {
    let s_l = cl.l1.min(cr.l1);
    let s_r = cl.l2.max(cr.l2);
    let sp = s_r.max(0.0);
    let sm = s_l.min(0.0);
    let den = sp - sm;
    if den < HLL_DEGENERATE {
        return HllFlux {
            f1: cl.f1,
            f2: cl.f2,
            degenerate: true,
        };
    }
    HllFlux {
        f1: (sp * cl.f1 - sm * cr.f1 + sp * sm * (qr.0 - ql.0)) / den,
        f2: (sp * cl.f2 - sm * cr.f2 + sp * sm * (qr.1 - ql.1)) / den,
        degenerate: false,
    }
}

/// HLL numerical flux between left and right conservative states.
pub fn hll_flux(ql: (f64, f64), qr: (f64, f64), p: &ModelParams) -> Result<HllFlux> {
    floor_guard(ql.0, p)?;
    floor_guard(qr.0, p)?;
    let cl = cell_data(ql.0, ql.1, p);
    let cr = cell_data(qr.0, qr.1, p);
    Ok(hll_raw(ql, qr, &cl, &cr))
}

/// Largest `|lambda|` over all cells.
pub fn max_speed(state: &GridState, p: &ModelParams) -> f64 {
    state
        .rho
        .iter()
        .zip(&state.y)
        .map(|(&r, &y)| {
            let c = cell_data(r, y, p);
            c.l1.abs().max(c.l2.abs())
        })
        .fold(0.0, f64::max)
}

/// `N(t) = sum rho_i dx`.
pub fn vehicle_count(state: &GridState, grid: &GridConfig) -> f64 {
    state.rho.iter().sum::<f64>() * grid.dx()
}

/// Diagnostics of one hyperbolic sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub degenerate_interfaces: usize,
    pub floor_hits: usize,
}

/// Reusable buffers for the HLL sweep.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    cells: Vec<CellData>,
    f1: Vec<f64>,
    f2: Vec<f64>,
}

/// Explicit HLL update `Q_i - dt/dx (F_{i+1/2} - F_{i-1/2})` with periodic wrap.
pub fn step_hyperbolic(
    state: &mut GridState,
    dt: f64,
    grid: &GridConfig,
    p: &ModelParams,
) -> Result<StepStats> {
    let mut ws = Workspace::default();
    step_hyperbolic_with(state, dt, grid, p, &mut ws)
}

pub fn step_hyperbolic_with(
    state: &mut GridState,
    dt: f64,
    grid: &GridConfig,
    p: &ModelParams,
    ws: &mut Workspace,
) -> Result<StepStats> {
    let n = state.len();
    if n != grid.n_cells {
        return Err(Error::Grid(format!(
            "state has {n} cells, grid has {}",
            grid.n_cells
        )));
    }
    let dx = grid.dx();
    ws.cells.clear();
    let mut smax: f64 = 0.0;
    for (&r, &y) in state.rho.iter().zip(&state.y) {
        let c = cell_data(r, y, p);
        smax = smax.max(c.l1.abs()).max(c.l2.abs());
        ws.cells.push(c);
    }
    let courant = dt * smax / dx;
    if !(courant <= grid.cfl * (1.0 + 1e-12)) {
        return Err(Error::Cfl {
            dt,
            courant,
            limit: grid.cfl,
        });
    }

    let mut stats = StepStats::default();
    ws.f1.resize(n, 0.0);
    ws.f2.resize(n, 0.0);
    // interface i sits between cells i and i+1
    for i in 0..n {
        let j = if i + 1 == n { 0 } else { i + 1 };
        let f = hll_raw(
            (state.rho[i], state.y[i]),
            (state.rho[j], state.y[j]),
            &ws.cells[i],
            &ws.cells[j],
        );
        stats.degenerate_interfaces += f.degenerate as usize;
        ws.f1[i] = f.f1;
        ws.f2[i] = f.f2;
    }
    let k = dt / dx;
    let floor = DENSITY_FLOOR * p.rho_max;
    for i in 0..n {
        let im = if i == 0 { n - 1 } else { i - 1 };
        let r = state.rho[i] - k * (ws.f1[i] - ws.f1[im]);
        let y = state.y[i] - k * (ws.f2[i] - ws.f2[im]);
        if !(r > 0.0 && r < p.rho_max && y.is_finite()) {
            return Err(Error::Positivity {
                cell: i,
                t: state.t + dt,
                rho: r,
                y,
            });
        }
        stats.floor_hits += (r <= floor) as usize;
        state.rho[i] = r;
        state.y[i] = y;
    }
    Ok(stats)
}

/// Backward-Euler relaxation `y <- (alpha rho (U + h) + y) / (alpha + 1)`, `alpha = dt/tau`.
pub fn step_relaxation(state: &mut GridState, dt: f64, p: &ModelParams) {
    let alpha = dt / p.tau;
    let a = alpha / (alpha + 1.0);
    let b = 1.0 / (alpha + 1.0);
    for (r, y) in state.rho.iter().zip(state.y.iter_mut()) {
        let target = r * (p.u_eq(*r) + p.h(*r));
        *y = a * target + b * *y;
    }
}

/// Returned by observers to continue or stop a run early.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Read-only hook called after the initial state and after every step.
pub trait Observer {
    fn observe(&mut self, state: &GridState, step: u64, is_final: bool) -> Control;
}

impl<F: FnMut(&GridState, u64, bool) -> Control> Observer for F {
    fn observe(&mut self, state: &GridState, step: u64, is_final: bool) -> Control {
        self(state, step, is_final)
    }
}

/// Keeps every `stride`-th state plus the initial and final ones.
#[derive(Debug, Clone)]
pub struct SnapshotRecorder {
    pub stride: u64,
    pub snapshots: Vec<GridState>,
}

impl SnapshotRecorder {
    pub fn new(stride: u64) -> Self {
        Self {
            stride: stride.max(1),
            snapshots: Vec::new(),
        }
    }
}

impl Observer for SnapshotRecorder {
    fn observe(&mut self, state: &GridState, step: u64, is_final: bool) -> Control {
        let due = step.is_multiple_of(self.stride);
        let dup = self.snapshots.last().is_some_and(|s| s.t == state.t);
        if (due || is_final) && !dup {
            self.snapshots.push(state.clone());
        }
        Control::Continue
    }
}

/// Run statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunStats {
    pub steps: u64,
    pub degenerate_interfaces: u64,
    pub floor_hits: u64,
}

/// A time-marching simulation on a fixed grid.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub grid: GridConfig,
    pub params: ModelParams,
    pub state: GridState,
    pub stats: RunStats,
    ws: Workspace,
}

impl Simulation {
    pub fn new(
        grid: GridConfig,
        params: ModelParams,
        ic: impl Fn(f64) -> (f64, f64),
    ) -> Result<Self> {
        let state = GridState::from_sampler(&grid, &params, ic)?;
        Self::from_state(grid, params, state)
    }

    pub fn from_state(grid: GridConfig, params: ModelParams, state: GridState) -> Result<Self> {
        grid.validate()?;
        params.validate()?;
        if state.len() != grid.n_cells {
            return Err(Error::Grid(format!(
                "state has {} cells, grid has {}",
                state.len(),
                grid.n_cells
            )));
        }
        Ok(Self {
            grid,
            params,
            state,
            stats: RunStats::default(),
            ws: Workspace::default(),
        })
    }

    /// `cfl dx / max |lambda|`.
    pub fn stable_dt(&self) -> Result<f64> {
        let smax = max_speed(&self.state, &self.params);
        if !(smax > 0.0 && smax.is_finite()) {
            return Err(Error::Grid(format!(
                "cannot form a time step: max wave speed is {smax}"
            )));
        }
        Ok(self.grid.cfl * self.grid.dx() / smax)
    }

    /// One split step of size `min(stable dt, dt_max)`; returns the step taken.
    pub fn step(&mut self, dt_max: f64) -> Result<f64> {
        let dt = self.stable_dt()?.min(dt_max);
        let st = step_hyperbolic_with(&mut self.state, dt, &self.grid, &self.params, &mut self.ws)?;
        step_relaxation(&mut self.state, dt, &self.params);
        self.state.t += dt;
        self.stats.steps += 1;
        self.stats.degenerate_interfaces += st.degenerate_interfaces as u64;
        self.stats.floor_hits += st.floor_hits as u64;
        Ok(dt)
    }

    /// Marches to `t_end`, landing on it exactly.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.state.t < t_end {
            let remaining = t_end - self.state.t;
            self.step(remaining)?;
            if t_end - self.state.t <= 1e-14 * t_end.abs().max(1.0) {
                self.state.t = t_end;
            }
        }
        Ok(())
    }

    /// Marches to `grid.t_final`, calling every observer after the initial
    /// state and after each step; stops early if any observer asks to.
    pub fn run(&mut self, observers: &mut [&mut dyn Observer]) -> Result<()> {
        let t_end = self.grid.t_final;
        let mut is_final = self.state.t >= t_end;
        let mut stop = false;
        for o in observers.iter_mut() {
            stop |= o.observe(&self.state, self.stats.steps, is_final) == Control::Stop;
        }
        while !is_final && !stop {
            self.step(t_end - self.state.t)?;
            if t_end - self.state.t <= 1e-14 * t_end.abs().max(1.0) {
                self.state.t = t_end;
            }
            is_final = self.state.t >= t_end;
            for o in observers.iter_mut() {
                stop |= o.observe(&self.state, self.stats.steps, is_final) == Control::Stop;
            }
        }
        Ok(())
    }

    pub fn vehicle_count(&self) -> f64 {
        vehicle_count(&self.state, &self.grid)
    }
}

/// Runs `ic` to `grid.t_final` and returns the final state.
pub fn run(
    ic: impl Fn(f64) -> (f64, f64),
    grid: GridConfig,
    p: &ModelParams,
    observers: &mut [&mut dyn Observer],
) -> Result<GridState> {
    let mut sim = Simulation::new(grid, *p, ic)?;
    sim.run(observers)?;
    Ok(sim.state)
}
