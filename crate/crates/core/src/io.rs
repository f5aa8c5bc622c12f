//! Run configuration and CSV input/output.
//!
//! Densities in configuration files are given as fractions of `rho_max`;
//! every CSV file written here uses absolute SI values.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::Deserialize;

use crate::collision::two_jamiton_ic;
use crate::error::{Error, Result};
use crate::jamiton::{make_spec, sonic_data, Envelopes, JamitonProfile};
use crate::model::ModelParams;
use crate::solver::{GridConfig, GridState, Simulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IcKind {
    Jamiton,
    Gaussian,
    TwoJamiton,
}

/// Settings of a `simulate` run.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ic: IcKind,
    /// Sonic density (fraction of `rho_max`) of the (first) jamiton.
    pub rho_s: Option<f64>,
    /// Sonic density of the second jamiton of a two-jamiton chain.
    pub rho_s_other: Option<f64>,
    pub v_minus: Option<f64>,
    pub n_cells: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub tau: Option<f64>,
    pub t_final: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: u64,
    /// Road length for the Gaussian initial condition [m].
    pub domain_length: Option<f64>,
    /// Background density (fraction of `rho_max`).
    pub rho_bar: Option<f64>,
    /// Bump amplitude (fraction of `rho_max`).
    pub amp: Option<f64>,
    /// Bump centre [m].
    pub center: Option<f64>,
    /// Bump standard deviation [m].
    pub width: Option<f64>,
    /// Samples per jamiton profile used to build the initial condition.
    #[serde(default = "default_samples")]
    pub profile_samples: usize,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_stride() -> u64 {
    100
}

fn default_samples() -> usize {
    4096
}

fn need(v: Option<f64>, key: &str, ic: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("`{key}` is required for ic = {ic}")))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("run configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Model parameters with this run's `tau` applied.
    pub fn params(&self, base: &ModelParams) -> Result<ModelParams> {
        let p = match self.tau {
            Some(t) => base.with_tau(t),
            None => *base,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds the simulation described by this configuration.
    pub fn build(&self, base: &ModelParams) -> Result<Simulation> {
        let p = self.params(base)?;
        match self.ic {
            IcKind::Jamiton => {
                let rho_s = need(self.rho_s, "rho_s", "jamiton")? * p.rho_max;
                let v_minus = need(self.v_minus, "v_minus", "jamiton")?;
                let spec = make_spec(&sonic_data(rho_s, &p)?, v_minus)?;
                let prof = spec.integrate_profile(self.profile_samples)?;
                let grid = GridConfig::new(self.n_cells, prof.length, self.cfl, self.t_final)?;
                Simulation::new(grid, p, |x| prof.state_at(x))
            }
            IcKind::TwoJamiton => {
                let v_minus = need(self.v_minus, "v_minus", "two-jamiton")?;
                let a = make_spec(
                    &sonic_data(need(self.rho_s, "rho_s", "two-jamiton")? * p.rho_max, &p)?,
                    v_minus,
                )?;
                let b = make_spec(
                    &sonic_data(
                        need(self.rho_s_other, "rho_s_other", "two-jamiton")? * p.rho_max,
                        &p,
                    )?,
                    v_minus,
                )?;
                let ic = two_jamiton_ic(&a, &b, self.profile_samples)?;
                let grid = GridConfig::new(self.n_cells, ic.domain_length, self.cfl, self.t_final)?;
                Simulation::new(grid, p, |x| ic.state_at(x))
            }
            IcKind::Gaussian => {
                let length = need(self.domain_length, "domain_length", "gaussian")?;
                let rho_bar = need(self.rho_bar, "rho_bar", "gaussian")? * p.rho_max;
                let amp = need(self.amp, "amp", "gaussian")? * p.rho_max;
                let center = need(self.center, "center", "gaussian")?;
                let width = need(self.width, "width", "gaussian")?;
                if !(width > 0.0) {
                    return Err(Error::Config(format!(
                        "`width` must be positive, got {width}"
                    )));
                }
                let grid = GridConfig::new(self.n_cells, length, self.cfl, self.t_final)?;
                Simulation::new(grid, p, |x| {
                    let r = rho_bar + amp * (-(x - center).powi(2) / (2.0 * width * width)).exp();
                    (r, p.u_eq(r))
                })
            }
        }
    }
}

/// One recorded time level of a trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(state: &GridState, grid: &GridConfig, p: &ModelParams) -> Self {
        Self {
            t: state.t,
            x: grid.centers(),
            rho: state.rho.clone(),
            u: state.velocity(p),
        }
    }
}

/// Trajectory CSV: blocks made of a `t,<time>` line followed by `x,rho,u` rows.
pub fn write_trajectory(mut w: impl Write, snapshots: &[Snapshot]) -> std::io::Result<()> {
    writeln!(
        w,
        "# blocks: a `t,<time>` line, then one `x,rho,u` row per cell"
    )?;
    for s in snapshots {
        writeln!(w, "t,{}", s.t)?;
        for i in 0..s.x.len() {
            writeln!(w, "{},{},{}", s.x[i], s.rho[i], s.u[i])?;
        }
    }
    Ok(())
}

pub fn read_trajectory(r: impl BufRead) -> Result<Vec<Snapshot>> {
    let mut out: Vec<Snapshot> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Config(format!("read error: {e}")))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Config(format!("line {}: {what}: `{line}`", lineno + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields[0] == "t" {
            if fields.len() != 2 {
                return Err(bad("expected `t,<time>`"));
            }
            let t = fields[1].parse().map_err(|_| bad("bad time"))?;
            out.push(Snapshot {
                t,
                x: Vec::new(),
                rho: Vec::new(),
                u: Vec::new(),
            });
            continue;
        }
        if fields.len() != 3 {
            return Err(bad("expected `x,rho,u`"));
        }
        let snap = out
            .last_mut()
            .ok_or_else(|| bad("data row before the first `t` line"))?;
        let v: Vec<f64> = fields
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad number"))?;
        snap.x.push(v[0]);
        snap.rho.push(v[1]);
        snap.u.push(v[2]);
    }
    if out.is_empty() {
        return Err(Error::Config("trajectory file holds no snapshots".into()));
    }
    Ok(out)
}

/// Snapshot whose time is closest to `t`.
pub fn nearest_snapshot(snaps: &[Snapshot], t: f64) -> Option<&Snapshot> {
    snaps
        .iter()
        .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
}

/// Equilibrium and comparison flows on `n` densities spanning `[0, rho_max]`.
pub fn write_model_fd(mut w: impl Write, p: &ModelParams, n: usize) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(e.to_string());
    writeln!(w, "rho,Q_smooth,Q_nd,Q_greenshields").map_err(io)?;
    let n = n.max(2);
    for k in 0..n {
        let rho = p.rho_max * k as f64 / (n - 1) as f64;
        writeln!(
            w,
            "{},{},{},{}",
            rho,
            p.flow(rho)?,
            p.nd_flow(rho)?,
            p.greenshields_flow(rho)?
        )
        .map_err(io)?;
    }
    Ok(())
}

/// Jamiton profile with a `# key = value` header block.
pub fn write_profile(mut w: impl Write, prof: &JamitonProfile) -> std::io::Result<()> {
    let sonic = &prof.spec.sonic;
    writeln!(w, "# rho_s = {}", sonic.rho_s)?;
    writeln!(w, "# v_minus = {}", prof.spec.v_minus)?;
    writeln!(w, "# v_plus = {}", prof.spec.v_plus)?;
    writeln!(w, "# m = {}", sonic.m)?;
    writeln!(w, "# s = {}", sonic.s)?;
    writeln!(w, "# L = {}", prof.length)?;
    writeln!(w, "# N = {}", prof.vehicles)?;
    writeln!(w, "# A = {}", prof.amplitude)?;
    writeln!(w, "x,v,rho,u")?;
    for i in 0..prof.x.len() {
        writeln!(
            w,
            "{},{},{},{}",
            prof.x[i], prof.v[i], prof.rho[i], prof.u[i]
        )?;
    }
    Ok(())
}

/// Maximal segments and envelopes, one row per sonic density.
pub fn write_envelopes(mut w: impl Write, env: &Envelopes) -> std::io::Result<()> {
    writeln!(w, "rho_s,s,m,rho_M,q_M,rho_R,q_R,rho_star,q_star")?;
    for pt in &env.points {
        let (rs, qs) = pt.lower.unwrap_or((f64::NAN, f64::NAN));
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            pt.rho_s,
            pt.s,
            pt.m,
            pt.maximal.rho_m,
            pt.maximal.q_m,
            pt.maximal.rho_r,
            pt.maximal.q_r,
            rs,
            qs
        )?;
    }
    for (rho, why) in &env.skipped {
        writeln!(w, "# skipped rho_s = {rho}: {why}")?;
    }
    Ok(())
}
