//! Two-jamiton collision experiments.
//!
//! A fixed *test* jamiton is chained with a *compatible* jamiton (same
//! `v_minus`) on a periodic road of length `L_test + L_other`. The run is
//! marched until a single jump persists, then the surviving wave is measured.

use std::fmt;

use rayon::prelude::*;

use crate::analysis::{jump_interfaces, length_additivity_error, measure_jamiton};
use crate::error::{Error, Result};
use crate::jamiton::{find_v_m, find_v_r, make_spec, sonic_data, JamitonProfile, JamitonSpec};
use crate::model::ModelParams;
use crate::numerics::{find_root, golden_max, RootOptions};
use crate::solver::{GridConfig, Simulation};

/// Steps between two jump counts.
pub const CHECK_STRIDE: u64 = 50;
/// Consecutive single-jump checks that count as settled.
pub const SETTLE_CHECKS: usize = 10;
/// Extra time, in units of `tau`, run after settling before measuring.
pub const SETTLE_WINDOW_TAU: f64 = 10.0;
/// Hard stop, in units of `tau`.
pub const T_MAX_TAU: f64 = 5000.0;
/// Two-jump checks used to decide that the waves keep a fixed distance.
pub const STATIONARY_CHECKS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestJamiton {
    pub rho_s: f64,
    pub v_minus: f64,
    pub v_s: f64,
    pub v_m: f64,
}

fn admissible_width(rho_s: f64, p: &ModelParams) -> f64 {
    sonic_data(rho_s, p)
        .and_then(|s| find_v_m(&s).map(|v_m| v_m - s.v_s))
        .unwrap_or(f64::NEG_INFINITY)
}

/// Sonic density with the widest admissible `(v_s, v_M)` range, and the
/// midpoint of that range as `v_minus`.
pub fn choose_test_jamiton(p: &ModelParams) -> Result<TestJamiton> {
    let (lo, hi) = p
        .scc_violation_interval()?
        .ok_or(Error::NoJamiton { rho_s: f64::NAN })?;
    let n = 200;
    let grid: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / n as f64)
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&r| admissible_width(r, p)).collect();
    let (kbest, best) =
        vals.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
        );
    if !best.is_finite() {
        return Err(Error::BracketFailure {
            what: "v_M",
            detail: "no density in the violation interval admits a jamiton".into(),
        });
    }
    let a = if kbest == 0 { lo } else { grid[kbest - 1] };
    let b = if kbest + 1 == n { hi } else { grid[kbest + 1] };
    let (rho_s, _) = golden_max(|r| admissible_width(r, p), a, b, 1e-12 * p.rho_max);
    let sonic = sonic_data(rho_s, p)?;
    let v_m = find_v_m(&sonic)?;
    Ok(TestJamiton {
        rho_s,
        v_minus: 0.5 * (sonic.v_s + v_m),
        v_s: sonic.v_s,
        v_m,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExclusionReason {
    /// `v_R <= v_minus <= v_s`: inside the maximal range but no smooth profile.
    BelowSonic,
    /// `v_minus` outside `[v_R, v_M]`.
    OutsideMaximal,
    /// `v_M` or `v_R` could not be computed.
    BracketFailure(String),
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExclusionReason::BelowSonic => write!(f, "below-sonic"),
            ExclusionReason::OutsideMaximal => write!(f, "outside-maximal"),
            ExclusionReason::BracketFailure(d) => write!(f, "bracket-failure: {d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilitySet {
    pub test: JamitonSpec,
    pub candidates: Vec<f64>,
    pub excluded: Vec<(f64, ExclusionReason)>,
}

/// Whether a jamiton with sonic density `rho_s` can have shock state `v_minus`.
pub fn classify(
    rho_s: f64,
    v_minus: f64,
    p: &ModelParams,
) -> std::result::Result<(), ExclusionReason> {
    let sonic = sonic_data(rho_s, p).map_err(|e| ExclusionReason::BracketFailure(e.to_string()))?;
    let v_m = find_v_m(&sonic).map_err(|e| ExclusionReason::BracketFailure(e.to_string()))?;
    if sonic.v_s < v_minus && v_minus < v_m {
        return Ok(());
    }
    let v_r = find_v_r(&sonic).map_err(|e| ExclusionReason::BracketFailure(e.to_string()))?;
    if v_r <= v_minus && v_minus <= sonic.v_s {
        Err(ExclusionReason::BelowSonic)
    } else {
        Err(ExclusionReason::OutsideMaximal)
    }
}

/// Scans `n_scan` sonic densities across the SCC violation interval.
pub fn compatible_densities(test: &JamitonSpec, n_scan: usize) -> Result<CompatibilitySet> {
    let p = &test.sonic.params;
    let (lo, hi) = p.scc_violation_interval()?.ok_or(Error::NoJamiton {
        rho_s: test.sonic.rho_s,
    })?;
    let mut set = CompatibilitySet {
        test: *test,
        candidates: Vec::new(),
        excluded: Vec::new(),
    };
    for k in 0..n_scan {
        let rho = lo + (hi - lo) * (k as f64 + 0.5) / n_scan as f64;
        match classify(rho, test.v_minus, p) {
            Ok(()) => set.candidates.push(rho),
            Err(reason) => set.excluded.push((rho, reason)),
        }
    }
    Ok(set)
}

/// End points of the contiguous band of compatible sonic densities containing
/// the test density, refined by bisection of the compatibility predicate.
pub fn compatibility_band(test: &JamitonSpec) -> Result<(f64, f64)> {
    let p = &test.sonic.params;
    let (lo, hi) = p.scc_violation_interval()?.ok_or(Error::NoJamiton {
        rho_s: test.sonic.rho_s,
    })?;
    let ok = |r: f64| classify(r, test.v_minus, p).is_ok();
    let r0 = test.sonic.rho_s;
    if !ok(r0) {
        return Err(Error::Incompatible(test.v_minus, test.v_minus));
    }
    let n = 400;
    let edge = |target: f64| {
        // walk from r0 towards `target` until the predicate fails, then bisect
        let mut inside = r0;
        let mut outside = None;
        for k in 1..=n {
            let r = r0 + (target - r0) * k as f64 / n as f64;
            if ok(r) {
                inside = r;
            } else {
                outside = Some(r);
                break;
            }
        }
        let Some(mut out) = outside else {
            return inside;
        };
        for _ in 0..100 {
            let mid = 0.5 * (inside + out);
            if ok(mid) {
                inside = mid;
            } else {
                out = mid;
            }
            if (out - inside).abs() < 1e-13 * p.rho_max {
                break;
            }
        }
        inside
    };
    Ok((edge(lo), edge(hi)))
}

/// `n` candidate densities evenly spaced strictly inside the compatibility band.
pub fn band_candidates(test: &JamitonSpec, n: usize) -> Result<Vec<f64>> {
    let (a, b) = compatibility_band(test)?;
    Ok((0..n)
        .map(|k| a + (b - a) * (k as f64 + 0.5) / n as f64)
        .collect())
}

/// Two compatible jamitons chained on a periodic road: `a` on `[0, L_a)`,
/// `b` on `[L_a, L_a + L_b)`.
#[derive(Debug, Clone)]
pub struct TwoJamitonIc {
    pub domain_length: f64,
    pub a: JamitonProfile,
    pub b: JamitonProfile,
}

impl TwoJamitonIc {
    pub fn state_at(&self, x: f64) -> (f64, f64) {
        let x = x.rem_euclid(self.domain_length);
        if x < self.a.length {
            self.a.state_at(x)
        } else {
            self.b.state_at(x - self.a.length)
        }
    }

    pub fn vehicles(&self) -> f64 {
        self.a.vehicles + self.b.vehicles
    }
}

pub fn two_jamiton_ic(a: &JamitonSpec, b: &JamitonSpec, n_samples: usize) -> Result<TwoJamitonIc> {
    if (a.v_minus - b.v_minus).abs() > 1e-12 * a.v_minus.abs() {
        return Err(Error::Incompatible(a.v_minus, b.v_minus));
    }
    if a.sonic.params != b.sonic.params {
        return Err(Error::Config(
            "the two jamitons use different model parameters".into(),
        ));
    }
    let pa = a.integrate_profile(n_samples)?;
    let pb = b.integrate_profile(n_samples)?;
    Ok(TwoJamitonIc {
        domain_length: pa.length + pb.length,
        a: pa,
        b: pb,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum CollisionStatus {
    Settled,
    Timeout,
    NoCollision,
    Failed(String),
}

impl fmt::Display for CollisionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CollisionStatus::Settled => write!(f, "settled"),
            CollisionStatus::Timeout => write!(f, "timeout"),
            CollisionStatus::NoCollision => write!(f, "no-collision"),
            CollisionStatus::Failed(msg) => write!(f, "failed: {msg}"),
        }
    }
}

/// Outcome of one collision. Measurements are `NaN` unless `status` is settled.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionRecord {
    pub rho_s_in: f64,
    pub tau: f64,
    pub s_out: f64,
    pub m_out: f64,
    pub rho_s_out: Option<f64>,
    pub l_out: f64,
    pub a_out: f64,
    pub rho_plus_out: f64,
    pub e_l: f64,
    pub t_settle: f64,
    pub status: CollisionStatus,
    pub residual_rms: f64,
    /// `max q` of the final state, the scale for `residual_rms`.
    pub q_max: f64,
    /// `|N(t) - N(0)| / N(0)` at the end of the run.
    pub mass_drift: f64,
    pub l_test: f64,
    pub l_in: f64,
    pub a_test: f64,
    pub a_in: f64,
    pub s_test: f64,
    pub s_in: f64,
}

impl CollisionRecord {
    fn unmeasured(rho_s_in: f64, tau: f64, status: CollisionStatus) -> Self {
        Self {
            rho_s_in,
            tau,
            s_out: f64::NAN,
            m_out: f64::NAN,
            rho_s_out: None,
            l_out: f64::NAN,
            a_out: f64::NAN,
            rho_plus_out: f64::NAN,
            e_l: f64::NAN,
            t_settle: f64::NAN,
            status,
            residual_rms: f64::NAN,
            q_max: f64::NAN,
            mass_drift: f64::NAN,
            l_test: f64::NAN,
            l_in: f64::NAN,
            a_test: f64::NAN,
            a_in: f64::NAN,
            s_test: f64::NAN,
            s_in: f64::NAN,
        }
    }

    pub fn is_settled(&self) -> bool {
        self.status == CollisionStatus::Settled
    }
}

/// Numerical settings of a collision run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionSettings {
    pub n_cells: usize,
    pub cfl: f64,
    /// Samples per profile used to build the initial condition.
    pub n_samples: usize,
}

impl Default for CollisionSettings {
    fn default() -> Self {
        Self {
            n_cells: 160,
            cfl: 0.5,
            n_samples: 2048,
        }
    }
}

/// Collides `other` with `test` and measures the resulting wave.
pub fn run_collision(
    test: &JamitonSpec,
    other: &JamitonSpec,
    settings: &CollisionSettings,
) -> Result<CollisionRecord> {
    let p = test.sonic.params;
    let tau = p.tau;
    let ic = two_jamiton_ic(test, other, settings.n_samples)?;
    let t_max = T_MAX_TAU * tau;
    let grid = GridConfig::new(settings.n_cells, ic.domain_length, settings.cfl, t_max)?;
    let mut sim = Simulation::new(grid, p, |x| ic.state_at(x))?;
    let n0 = sim.vehicle_count();
    let n = settings.n_cells;
    let dx = grid.dx();

    let mut rec = CollisionRecord::unmeasured(other.sonic.rho_s, tau, CollisionStatus::Timeout);
    rec.l_test = ic.a.length;
    rec.l_in = ic.b.length;
    rec.a_test = test.amplitude();
    rec.a_in = other.amplitude();
    rec.s_test = test.sonic.s;
    rec.s_in = other.sonic.s;

    let mut single_run = 0usize;
    let mut t_first_single = f64::NAN;
    let mut gaps: Vec<f64> = Vec::with_capacity(STATIONARY_CHECKS);
    loop {
        for _ in 0..CHECK_STRIDE {
            if sim.state.t >= t_max {
                break;
            }
            sim.step(t_max - sim.state.t)?;
        }
        let jumps = jump_interfaces(&sim.state.rho, p.rho_max);
        match jumps.len() {
            1 => {
                gaps.clear();
                if single_run == 0 {
                    t_first_single = sim.state.t;
                }
                single_run += 1;
            }
            2 => {
                single_run = 0;
                let g = (jumps[1] - jumps[0]) as f64;
                gaps.push(g.min(n as f64 - g) * dx);
                if gaps.len() > STATIONARY_CHECKS {
                    gaps.remove(0);
                }
                if gaps.len() == STATIONARY_CHECKS {
                    let (lo, hi) = gaps
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &g| {
                            (l.min(g), h.max(g))
                        });
                    if hi - lo < dx {
                        rec.status = CollisionStatus::NoCollision;
                        rec.mass_drift = (sim.vehicle_count() - n0).abs() / n0;
                        return Ok(rec);
                    }
                }
            }
            _ => {
                single_run = 0;
                gaps.clear();
            }
        }
        if single_run >= SETTLE_CHECKS {
            let t_end = (sim.state.t + SETTLE_WINDOW_TAU * tau).min(t_max);
            sim.advance_to(t_end)?;
            match measure_jamiton(&sim.state, &grid, &p) {
                Ok(mj) => {
                    let q_max = sim
                        .state
                        .rho
                        .iter()
                        .zip(sim.state.velocity(&p))
                        .map(|(r, u)| r * u)
                        .fold(f64::NEG_INFINITY, f64::max);
                    rec.status = CollisionStatus::Settled;
                    rec.s_out = mj.estimate.s_est;
                    rec.m_out = mj.estimate.m_est;
                    rec.rho_s_out = mj.estimate.rho_s_est;
                    rec.residual_rms = mj.estimate.residual_rms;
                    rec.q_max = q_max;
                    rec.l_out = mj.length;
                    rec.a_out = mj.amplitude;
                    rec.rho_plus_out = mj.rho_plus;
                    rec.e_l = length_additivity_error(mj.length, rec.l_test, rec.l_in, mj.length)?;
                    rec.t_settle = t_first_single;
                    rec.mass_drift = (sim.vehicle_count() - n0).abs() / n0;
                    return Ok(rec);
                }
                Err(Error::JumpCount(_)) => single_run = 0,
                Err(e) => return Err(e),
            }
        }
        if sim.state.t >= t_max {
            rec.mass_drift = (sim.vehicle_count() - n0).abs() / n0;
            return Ok(rec);
        }
    }
}

fn run_candidate(test: &JamitonSpec, rho_s: f64, settings: &CollisionSettings) -> CollisionRecord {
    let p = test.sonic.params;
    let outcome = sonic_data(rho_s, &p)
        .and_then(|s| make_spec(&s, test.v_minus))
        .and_then(|other| run_collision(test, &other, settings));
    match outcome {
        Ok(rec) => rec,
        Err(e) => CollisionRecord::unmeasured(rho_s, p.tau, CollisionStatus::Failed(e.to_string())),
    }
}

/// Runs every candidate against the test jamiton on a pool of `workers`
/// threads. Records come back in candidate order; one failed run does not
/// stop the batch. `E_L` is normalised by the largest `L_out` of the batch.
pub fn batch_collide(
    test: &JamitonSpec,
    candidates: &[f64],
    settings: &CollisionSettings,
    workers: usize,
) -> Result<Vec<CollisionRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut records: Vec<CollisionRecord> = pool.install(|| {
        candidates
            .par_iter()
            .map(|&r| run_candidate(test, r, settings))
            .collect()
    });
    let norm = records
        .iter()
        .filter(|r| r.is_settled())
        .map(|r| r.l_out)
        .fold(0.0, f64::max);
    if norm > 0.0 {
        for r in records.iter_mut().filter(|r| r.is_settled()) {
            r.e_l = length_additivity_error(r.l_out, r.l_test, r.l_in, norm)?;
        }
    }
    Ok(records)
}

/// Repeats the batch for each relaxation time; the test jamiton keeps its
/// `(rho_s, v_minus)`.
pub fn tau_sweep(
    test: &JamitonSpec,
    candidates: &[f64],
    taus: &[f64],
    settings: &CollisionSettings,
    workers: usize,
) -> Result<Vec<(f64, Vec<CollisionRecord>)>> {
    taus.iter()
        .map(|&tau| {
            if !(tau > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "tau",
                    value: tau,
                    reason: "must be positive",
                });
            }
            let t = test.with_tau(tau);
            Ok((tau, batch_collide(&t, candidates, settings, workers)?))
        })
        .collect()
}

/// The single jamiton with length `length` and `vehicles` vehicles per
/// period, i.e. the only traveling wave a settled run on that ring can reach
/// (mass is conserved and the period is fixed). `None` if no such wave exists
/// in the scanned range.
pub fn predict_single_jamiton(
    length: f64,
    vehicles: f64,
    p: &ModelParams,
) -> Result<Option<JamitonSpec>> {
    let Some((lo, hi)) = p.scc_violation_interval()? else {
        return Ok(None);
    };
    // shock state giving the requested length at a fixed sonic density
    let spec_for = |rho_s: f64| -> Option<JamitonSpec> {
        let sonic = sonic_data(rho_s, p).ok()?;
        let v_m = find_v_m(&sonic).ok()?;
        let len = |v: f64| {
            make_spec(&sonic, v)
                .and_then(|sp| sp.length())
                .map(|l| l - length)
        };
        let (a, b) = (sonic.v_s * (1.0 + 1e-6), v_m * (1.0 - 1e-6));
        if len(a).ok()? > 0.0 || len(b).ok()? < 0.0 {
            return None;
        }
        let opts = RootOptions {
            rel_tol: 1e-12,
            ..RootOptions::default()
        };
        let v = find_root(|v| len(v).unwrap_or(f64::NAN), a, b, opts).ok()?;
        make_spec(&sonic, v).ok()
    };
    let defect = |rho_s: f64| {
        spec_for(rho_s)
            .and_then(|sp| sp.vehicle_count().ok())
            .map(|n| n - vehicles)
    };
    let n_scan = 48;
    let mut prev: Option<(f64, f64)> = None;
    for k in 1..n_scan {
        let r = lo + (hi - lo) * k as f64 / n_scan as f64;
        let Some(d) = defect(r) else {
            prev = None;
            continue;
        };
        if let Some((r0, d0)) = prev {
            if d0 * d <= 0.0 {
                let opts = RootOptions {
                    rel_tol: 1e-10,
                    ..RootOptions::default()
                };
                let rho_s =
                    find_root(|r| defect(r).unwrap_or(f64::NAN), r0, r, opts).map_err(|e| {
                        Error::BracketFailure {
                            what: "merged jamiton",
                            detail: format!("{e:?}"),
                        }
                    })?;
                return Ok(spec_for(rho_s));
            }
        }
        prev = Some((r, d));
    }
    Ok(None)
}

/// CSV header of collision records.
pub const CSV_HEADER: &str =
    "rho_s_in,tau,s_out,m_out,L_out,A_out,rho_plus_out,E_L,t_settle,status";

pub fn csv_row(r: &CollisionRecord) -> String {
    let status = match &r.status {
        CollisionStatus::Failed(_) => "failed".to_string(),
        s => s.to_string(),
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.rho_s_in,
        r.tau,
        r.s_out,
        r.m_out,
        r.l_out,
        r.a_out,
        r.rho_plus_out,
        r.e_l,
        r.t_settle,
        status
    )
}

/// Writes records as CSV.
pub fn write_csv(mut w: impl std::io::Write, records: &[CollisionRecord]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", csv_row(r))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ModelParams {
        ModelParams::default()
    }

    fn spec(frac: f64, v_minus: f64) -> JamitonSpec {
        let p = p();
        make_spec(&sonic_data(frac * p.rho_max, &p).unwrap(), v_minus).unwrap()
    }

    #[test]
    fn test_jamiton_selection() {
        let p = p();
        let t = choose_test_jamiton(&p).unwrap();
        assert!((t.rho_s / p.rho_max - 0.4333).abs() < 0.01 * 0.4333);
        assert!((t.v_minus - 26.602).abs() < 0.01 * 26.602);
        let w = admissible_width(t.rho_s, &p);
        let d = 1e-3 * p.rho_max;
        assert!(w >= admissible_width(t.rho_s - d, &p));
        assert!(w >= admissible_width(t.rho_s + d, &p));
        let s = sonic_data(t.rho_s, &p).unwrap();
        assert!(make_spec(&s, t.v_minus).is_ok());
    }

    #[test]
    fn compatibility_scan() {
        let p = p();
        let t = choose_test_jamiton(&p).unwrap();
        let test = make_spec(&sonic_data(t.rho_s, &p).unwrap(), t.v_minus).unwrap();
        assert!(classify(t.rho_s, t.v_minus, &p).is_ok());
        for frac in [0.425, 0.443] {
            assert!(classify(frac * p.rho_max, 25.0, &p).is_ok());
        }
        let set = compatible_densities(&test, 200).unwrap();
        assert_eq!(set.candidates.len() + set.excluded.len(), 200);
        for &r in &set.candidates {
            assert!(make_spec(&sonic_data(r, &p).unwrap(), t.v_minus).is_ok());
        }
        // contiguous: candidates are consecutive scan points
        let (lo, hi) = p.scc_violation_interval().unwrap().unwrap();
        let step = (hi - lo) / 200.0;
        for w in set.candidates.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-9 * p.rho_max);
        }
        let (a, b) = compatibility_band(&test).unwrap();
        assert!(a <= set.candidates[0] && *set.candidates.last().unwrap() <= b);
        assert!(classify(a, t.v_minus, &p).is_ok() && classify(b, t.v_minus, &p).is_ok());
        assert!(classify(a - 1e-6 * p.rho_max, t.v_minus, &p).is_err());
        assert!(classify(b + 1e-6 * p.rho_max, t.v_minus, &p).is_err());
        assert!(set
            .excluded
            .iter()
            .any(|(_, r)| *r == ExclusionReason::BelowSonic));
    }

    #[test]
    fn two_jamiton_chain() {
        let a = spec(0.425, 25.0);
        let b = spec(0.443, 25.0);
        let ic = two_jamiton_ic(&a, &b, 512).unwrap();
        assert!((ic.domain_length - (a.length().unwrap() + b.length().unwrap())).abs() < 1e-9);
        let n = 20_000;
        let dx = ic.domain_length / n as f64;
        let rho: Vec<f64> = (0..n)
            .map(|i| ic.state_at((i as f64 + 0.5) * dx).0)
            .collect();
        let mass: f64 = rho.iter().sum::<f64>() * dx;
        assert!((mass - ic.vehicles()).abs() < 1e-3 * ic.vehicles());
        let jumps = jump_interfaces(&rho, p().rho_max);
        assert_eq!(jumps.len(), 2);
        assert!(matches!(
            two_jamiton_ic(&a, &spec(0.443, 26.0), 512),
            Err(Error::Incompatible(..))
        ));
    }

    #[test]
    fn identical_chain_is_periodic() {
        let a = spec(0.433, 26.0);
        let ic = two_jamiton_ic(&a, &a, 512).unwrap();
        for x in [0.1, 3.0, 17.5, 30.0] {
            let (r0, u0) = ic.state_at(x);
            let (r1, u1) = ic.state_at(x + ic.a.length);
            assert!((r0 - r1).abs() < 1e-12 && (u0 - u1).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_waves_do_not_collide() {
        let a = spec(0.433, 26.0);
        let rec = run_collision(&a, &a, &CollisionSettings::default()).unwrap();
        assert_eq!(rec.status, CollisionStatus::NoCollision);
    }

    #[test]
    fn csv_layout() {
        let r = CollisionRecord::unmeasured(0.05, 5.0, CollisionStatus::Timeout);
        let mut buf = Vec::new();
        write_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), 10);
        assert!(lines[1].ends_with("timeout"));
    }

    #[test]
    fn reference_pair_settles_on_predicted_wave() {
        let a = spec(0.425, 25.0);
        let b = spec(0.443, 25.0);
        let rec = run_collision(&a, &b, &CollisionSettings::default()).unwrap();
        assert!(rec.is_settled(), "{:?}", rec.status);
        assert!(rec.mass_drift < 1e-10);
        assert!(rec.residual_rms < 0.01 * rec.q_max);
        let n = a.vehicle_count().unwrap() + b.vehicle_count().unwrap();
        let pred = predict_single_jamiton(rec.l_out, n, &p()).unwrap().unwrap();
        assert!(
            (rec.s_out - pred.sonic.s).abs() < 0.02 * pred.sonic.s.abs(),
            "{} vs {}",
            rec.s_out,
            pred.sonic.s
        );
        assert!((rec.a_out - pred.amplitude()).abs() < 0.05 * pred.amplitude());
    }
}
