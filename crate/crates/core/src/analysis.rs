//! Diagnostics of numerical solutions: L1 errors, jump detection, `(m, s)`
//! regression in the `(rho, q)` plane and measured jamiton properties.

use crate::error::{Error, Result};
use crate::jamiton::{JamitonSpec, SonicData};
use crate::model::ModelParams;
use crate::solver::{GridConfig, GridState, Simulation};

/// Fraction of the largest cell-to-cell density increase that marks a jump.
pub const JUMP_THRESHOLD: f64 = 0.5;
/// Flagged interfaces closer than this (in cells) are one jump.
pub const JUMP_MERGE_CELLS: usize = 3;
/// Cells excluded on each side of a jump before regression.
pub const DEFAULT_TRIM: usize = 2;

/// Relative L1 errors in percent, `(eps_rho, eps_u)`, against `reference(x) -> (rho, u)`
/// evaluated at the cell centres.
pub fn rel_l1_error(
    numeric: &GridState,
    grid: &GridConfig,
    reference: impl Fn(f64) -> (f64, f64),
    p: &ModelParams,
) -> (f64, f64) {
    let u = numeric.velocity(p);
    let (mut dr, mut nr, mut du, mut nu) = (0.0, 0.0, 0.0, 0.0);
    for (i, x) in grid.centers().into_iter().enumerate() {
        let (rr, ur) = reference(x);
        dr += (numeric.rho[i] - rr).abs();
        nr += rr.abs();
        du += (u[i] - ur).abs();
        nu += ur.abs();
    }
    (100.0 * dr / nr, 100.0 * du / nu)
}

/// Relative L1 error in percent between two sampled fields.
pub fn rel_l1(numeric: &[f64], reference: &[f64]) -> f64 {
    let d: f64 = numeric
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .sum();
    let n: f64 = reference.iter().map(|b| b.abs()).sum();
    100.0 * d / n
}

/// Interfaces `i` (between cells `i` and `i+1`, periodic) carrying an upward
/// density jump, i.e. a jamiton shock in the direction of increasing `x`.
pub fn jump_interfaces(rho: &[f64], rho_max: f64) -> Vec<usize> {
    let n = rho.len();
    if n < 2 {
        return Vec::new();
    }
    let diff = |i: usize| rho[(i + 1) % n] - rho[i];
    let dmax = (0..n).map(|i| diff(i).abs()).fold(0.0, f64::max);
    if dmax < 1e-12 * rho_max {
        return Vec::new();
    }
    let flagged: Vec<usize> = (0..n)
        .filter(|&i| diff(i) > JUMP_THRESHOLD * dmax)
        .collect();
    if flagged.is_empty() {
        return flagged;
    }
    // group runs of nearby flags (cyclically) and keep the steepest of each
    let gap = |a: usize, b: usize| (b + n - a) % n;
    // start after the largest cyclic gap so no group straddles the seam
    let mut start = 0;
    let mut best_gap = 0;
    for k in 0..flagged.len() {
        let g = gap(flagged[k], flagged[(k + 1) % flagged.len()]);
        let g = if flagged.len() == 1 { n } else { g };
        if g > best_gap {
            best_gap = g;
            start = (k + 1) % flagged.len();
        }
    }
    let ordered: Vec<usize> = (0..flagged.len())
        .map(|k| flagged[(start + k) % flagged.len()])
        .collect();
    let mut out = Vec::new();
    let mut group_best = ordered[0];
    let mut prev = ordered[0];
    for &i in &ordered[1..] {
        if gap(prev, i) <= JUMP_MERGE_CELLS {
            if diff(i) > diff(group_best) {
                group_best = i;
            }
        } else {
            out.push(group_best);
            group_best = i;
        }
        prev = i;
    }
    out.push(group_best);
    out.sort_unstable();
    out
}

/// Positions `x = (i+1) dx` of the upward jumps.
pub fn detect_jumps(rho: &[f64], dx: f64, rho_max: f64) -> Vec<f64> {
    jump_interfaces(rho, rho_max)
        .into_iter()
        .map(|i| ((i + 1) % rho.len()) as f64 * dx)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedEstimate {
    /// Fitted slope (wave speed) [m/s].
    pub s_est: f64,
    /// Fitted intercept (mass flux) [veh/s].
    pub m_est: f64,
    /// Where the fitted line meets the equilibrium curve inside the SCC
    /// violation interval (larger crossing), if it does.
    pub rho_s_est: Option<f64>,
    pub residual_rms: f64,
    pub samples: usize,
}

/// Least-squares fit of `q = s rho + m` over the samples, excluding `trim`
/// cells on each side of every detected jump.
pub fn estimate_speed(
    rho: &[f64],
    u: &[f64],
    p: &ModelParams,
    trim: usize,
) -> Result<SpeedEstimate> {
    let n = rho.len();
    if u.len() != n {
        return Err(Error::DegenerateFit(format!(
            "{} densities but {} velocities",
            n,
            u.len()
        )));
    }
    let mut keep = vec![true; n];
    if trim > 0 {
        for i in jump_interfaces(rho, p.rho_max) {
            for k in 0..2 * trim {
                let c = (i + n + 1 + k - trim) % n;
                keep[c] = false;
            }
        }
    }
    let pts: Vec<(f64, f64)> = (0..n)
        .filter(|&i| keep[i])
        .map(|i| (rho[i], rho[i] * u[i]))
        .collect();
    if pts.len() < 8 {
        return Err(Error::DegenerateFit(format!(
            "only {} samples left after trimming",
            pts.len()
        )));
    }
    fit_line(&pts, p)
}

fn fit_line(pts: &[(f64, f64)], p: &ModelParams) -> Result<SpeedEstimate> {
    let k = pts.len() as f64;
    let mr = pts.iter().map(|a| a.0).sum::<f64>() / k;
    let mq = pts.iter().map(|a| a.1).sum::<f64>() / k;
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), a| {
            (l.min(a.0), h.max(a.0))
        });
    if hi - lo < 1e-8 * p.rho_max {
        return Err(Error::DegenerateFit(format!(
            "density spread {} is too small to fit a line",
            hi - lo
        )));
    }
    let sxx: f64 = pts.iter().map(|a| (a.0 - mr) * (a.0 - mr)).sum();
    let sxy: f64 = pts.iter().map(|a| (a.0 - mr) * (a.1 - mq)).sum();
    let s = sxy / sxx;
    let m = mq - s * mr;
    let rms = (pts.iter().map(|a| (a.1 - s * a.0 - m).powi(2)).sum::<f64>() / k).sqrt();
    Ok(SpeedEstimate {
        s_est: s,
        m_est: m,
        rho_s_est: line_sonic_density(s, m, p),
        residual_rms: rms,
        samples: pts.len(),
    })
}

/// Larger density in the SCC violation interval where `Q(rho) = s rho + m`
/// changes sign from above to below.
pub fn line_sonic_density(s: f64, m: f64, p: &ModelParams) -> Option<f64> {
    let (lo, hi) = p.scc_violation_interval().ok()??;
    let f = |r: f64| p.flow_raw(r) - (s * r + m);
    let n = 2000;
    let mut found = None;
    let mut a = lo;
    let mut fa = f(a);
    for k in 1..=n {
        let b = lo + (hi - lo) * k as f64 / n as f64;
        let fb = f(b);
        if fa > 0.0 && fb <= 0.0 {
            found = Some((a, b));
        }
        a = b;
        fa = fb;
    }
    let (mut a, mut b) = found?;
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        if f(c) > 0.0 {
            a = c;
        } else {
            b = c;
        }
        if b - a < 1e-15 * p.rho_max {
            break;
        }
    }
    Some(0.5 * (a + b))
}

/// Relative errors in percent `(eps_s, eps_m)`.
pub fn speed_errors(est: &SpeedEstimate, sonic: &SonicData) -> (f64, f64) {
    (
        100.0 * (est.s_est - sonic.s).abs() / sonic.s.abs(),
        100.0 * (est.m_est - sonic.m).abs() / sonic.m.abs(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredJamiton {
    pub length: f64,
    pub amplitude: f64,
    pub rho_plus: f64,
    pub jump_positions: Vec<f64>,
    pub estimate: SpeedEstimate,
}

/// Measures the single jamiton occupying a periodic domain.
pub fn measure_jamiton(
    state: &GridState,
    grid: &GridConfig,
    p: &ModelParams,
) -> Result<MeasuredJamiton> {
    let jumps = detect_jumps(&state.rho, grid.dx(), p.rho_max);
    if jumps.len() != 1 {
        return Err(Error::JumpCount(jumps.len()));
    }
    let (lo, hi) = state
        .rho
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &r| {
            (l.min(r), h.max(r))
        });
    let estimate = estimate_speed(&state.rho, &state.velocity(p), p, DEFAULT_TRIM)?;
    Ok(MeasuredJamiton {
        length: grid.domain_length,
        amplitude: hi - lo,
        rho_plus: hi,
        jump_positions: jumps,
        estimate,
    })
}

/// `E_L = (L_col - (L + L_test)) / norm`.
pub fn length_additivity_error(l_col: f64, l: f64, l_test: f64, norm: f64) -> Result<f64> {
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter {
            name: "norm",
            value: norm,
            reason: "must be positive",
        });
    }
    Ok((l_col - (l + l_test)) / norm)
}

/// One cell of the accuracy tables: a single jamiton advected on its own period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyRow {
    pub n_cells: usize,
    pub tau: f64,
    pub t: f64,
    pub eps_rho: f64,
    pub eps_u: f64,
    pub eps_s: f64,
    pub eps_m: f64,
    /// `|N(t) - N(0)| / N(0)`.
    pub mass_drift: f64,
}

/// Simulates the jamiton `spec` on a ring of one wavelength with `n_cells`
/// cells up to each time in `times` (ascending) and compares with the exact
/// translated profile.
pub fn jamiton_accuracy(
    spec: &JamitonSpec,
    n_cells: usize,
    cfl: f64,
    times: &[f64],
) -> Result<Vec<AccuracyRow>> {
    let p = spec.sonic.params;
    let prof = spec.integrate_profile(8192)?;
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    let grid = GridConfig::new(n_cells, prof.length, cfl, t_end)?;
    let mut sim = Simulation::new(grid, p, |x| prof.state_at(x))?;
    let n0 = sim.vehicle_count();
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        sim.advance_to(t)?;
        let (eps_rho, eps_u) = rel_l1_error(&sim.state, &grid, |x| prof.state_at_time(x, t), &p);
        let est = estimate_speed(&sim.state.rho, &sim.state.velocity(&p), &p, DEFAULT_TRIM)?;
        let (eps_s, eps_m) = speed_errors(&est, &spec.sonic);
        rows.push(AccuracyRow {
            n_cells,
            tau: p.tau,
            t,
            eps_rho,
            eps_u,
            eps_s,
            eps_m,
            mass_drift: (sim.vehicle_count() - n0).abs() / n0,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jamiton::{make_spec, sonic_data, JamitonProfile};
    use proptest::prelude::*;

    fn p() -> ModelParams {
        ModelParams::default()
    }

    fn profile() -> JamitonProfile {
        let p = p();
        make_spec(&sonic_data(0.433 * p.rho_max, &p).unwrap(), 26.0)
            .unwrap()
            .integrate_profile(512)
            .unwrap()
    }

    fn sampled(prof: &JamitonProfile, n: usize, shift: f64) -> (GridConfig, GridState) {
        let p = p();
        let g = GridConfig::new(n, prof.length, 0.5, 0.0).unwrap();
        let s = GridState::from_sampler(&g, &p, |x| prof.state_at(x - shift)).unwrap();
        (g, s)
    }

    #[test]
    fn l1_error_basics() {
        let p = p();
        let prof = profile();
        let (g, s) = sampled(&prof, 64, 0.0);
        let (er, eu) = rel_l1_error(&s, &g, |x| prof.state_at(x), &p);
        assert!(er < 1e-12 && eu < 1e-12);
        let a = [1.0, 2.0, 3.0];
        let b: Vec<f64> = a.iter().map(|v| v * 1.01).collect();
        assert!((rel_l1(&a, &b) - 100.0 * 0.01 / 1.01).abs() < 1e-12);
        assert!((rel_l1(&b, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_profile_recovers_line() {
        let p = p();
        let prof = profile();
        let (_, s) = sampled(&prof, 200, 0.0);
        let est = estimate_speed(&s.rho, &s.velocity(&p), &p, DEFAULT_TRIM).unwrap();
        let sonic = prof.spec.sonic;
        assert!((est.s_est - sonic.s).abs() < 1e-10 * sonic.s);
        assert!((est.m_est - sonic.m).abs() < 1e-10 * sonic.m);
        let rs = est.rho_s_est.unwrap();
        assert!(
            (rs - sonic.rho_s).abs() < 1e-8 * p.rho_max,
            "{rs} vs {}",
            sonic.rho_s
        );
        assert!(est.residual_rms < 1e-12);
        let (es, em) = speed_errors(&est, &sonic);
        assert!(es < 1e-8 && em < 1e-8);
    }

    #[test]
    fn speed_error_formula() {
        let p = p();
        let sonic = sonic_data(0.433 * p.rho_max, &p).unwrap();
        let est = SpeedEstimate {
            s_est: 1.01 * sonic.s,
            m_est: sonic.m,
            rho_s_est: None,
            residual_rms: 0.0,
            samples: 10,
        };
        let (es, em) = speed_errors(&est, &sonic);
        assert!((es - 1.0).abs() < 1e-10 && em == 0.0);
    }

    #[test]
    fn two_state_fit_is_chord() {
        let p = p();
        let (ra, rb) = (0.2 * p.rho_max, 0.6 * p.rho_max);
        let (ua, ub) = (15.0, 4.0);
        let rho: Vec<f64> = (0..20).map(|i| if i < 10 { ra } else { rb }).collect();
        let u: Vec<f64> = (0..20).map(|i| if i < 10 { ua } else { ub }).collect();
        let est = estimate_speed(&rho, &u, &p, 0).unwrap();
        let slope = (rb * ub - ra * ua) / (rb - ra);
        assert!((est.s_est - slope).abs() < 1e-10 * slope.abs());
        assert!((est.m_est - (ra * ua - slope * ra)).abs() < 1e-10);
    }

    #[test]
    fn constant_state_is_degenerate() {
        let p = p();
        let rho = vec![0.3 * p.rho_max; 20];
        let u = vec![10.0; 20];
        assert!(matches!(
            estimate_speed(&rho, &u, &p, 2),
            Err(Error::DegenerateFit(_))
        ));
        assert!(estimate_speed(&rho[..5], &u[..5], &p, 0).is_err());
    }

    #[test]
    fn jump_detection_cases() {
        let p = p();
        let prof = profile();
        let (g, s) = sampled(&prof, 100, 0.0);
        let j = detect_jumps(&s.rho, g.dx(), p.rho_max);
        assert_eq!(j, vec![0.0]);
        assert!(detect_jumps(&[0.05; 16], 1.0, p.rho_max).is_empty());

        // two periods of the same wave
        let g2 = GridConfig::new(200, 2.0 * prof.length, 0.5, 0.0).unwrap();
        let s2 = GridState::from_sampler(&g2, &p, |x| prof.state_at(x)).unwrap();
        assert_eq!(detect_jumps(&s2.rho, g2.dx(), p.rho_max).len(), 2);
    }

    #[test]
    fn adjacent_flags_merge() {
        let p = p();
        let mut rho = vec![0.04; 20];
        for r in rho.iter_mut().skip(10).take(6) {
            *r = 0.08;
        }
        rho[10] = 0.065; // shock smeared over two interfaces
        let j = jump_interfaces(&rho, p.rho_max);
        assert_eq!(j, vec![9]);
        // seam-straddling smear
        let mut rho = vec![0.04; 20];
        rho[0] = 0.065;
        for r in rho.iter_mut().skip(1).take(6) {
            *r = 0.08;
        }
        assert_eq!(jump_interfaces(&rho, p.rho_max), vec![19]);
    }

    #[test]
    fn measure_exact_profile() {
        let p = p();
        let prof = profile();
        let (g, s) = sampled(&prof, 400, 0.3 * prof.length);
        let mj = measure_jamiton(&s, &g, &p).unwrap();
        assert_eq!(mj.length, prof.length);
        let spec = prof.spec;
        assert!((mj.amplitude - spec.amplitude()).abs() < spec.amplitude() * 0.02);
        assert!((mj.estimate.s_est - spec.sonic.s).abs() < 1e-10 * spec.sonic.s);
        let g2 = GridConfig::new(200, 2.0 * prof.length, 0.5, 0.0).unwrap();
        let s2 = GridState::from_sampler(&g2, &p, |x| prof.state_at(x)).unwrap();
        assert_eq!(measure_jamiton(&s2, &g2, &p), Err(Error::JumpCount(2)));
    }

    #[test]
    fn additivity_error() {
        assert_eq!(length_additivity_error(3.0, 1.0, 2.0, 5.0).unwrap(), 0.0);
        assert!(length_additivity_error(3.5, 1.0, 2.0, 5.0).unwrap() > 0.0);
        assert!(length_additivity_error(2.5, 1.0, 2.0, 5.0).unwrap() < 0.0);
        assert!(length_additivity_error(2.5, 1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn gaussian_bump_develops_several_jamitons() {
        let p = p();
        let g = GridConfig::new(1200, 6000.0, 0.5, 117.09).unwrap();
        let (rb, amp, x0, w) = (0.45 * p.rho_max, 0.05 * p.rho_max, 3000.0, 150.0);
        let mut sim = Simulation::new(g, p, |x| {
            let r = rb + amp * (-(x - x0).powi(2) / (2.0 * w * w)).exp();
            (r, p.u_eq(r))
        })
        .unwrap();
        sim.run(&mut []).unwrap();
        let jumps = detect_jumps(&sim.state.rho, g.dx(), p.rho_max);
        assert!(jumps.len() > 2, "only {} jumps", jumps.len());
    }

    proptest! {
        #[test]
        fn jumps_are_translation_invariant(shift in 0usize..100) {
            let p = ModelParams::default();
            let prof = profile();
            let (g, s) = sampled(&prof, 100, 0.0);
            let mut rolled = s.rho.clone();
            rolled.rotate_right(shift);
            let a = detect_jumps(&s.rho, g.dx(), p.rho_max);
            let b = detect_jumps(&rolled, g.dx(), p.rho_max);
            prop_assert_eq!(a.len(), b.len());
            let expect = (a[0] + shift as f64 * g.dx()).rem_euclid(g.domain_length);
            prop_assert!((b[0] - expect).abs() < 1e-9 * g.domain_length);
        }

        #[test]
        fn line_data_recovered(s in -5.0f64..15.0, m in 0.0f64..1.0) {
            let p = ModelParams::default();
            let rho: Vec<f64> = (0..30).map(|i| (0.1 + 0.02 * i as f64) * p.rho_max).collect();
            let u: Vec<f64> = rho.iter().map(|r| (s * r + m) / r).collect();
            let est = estimate_speed(&rho, &u, &p, 0).unwrap();
            prop_assert!((est.s_est - s).abs() < 1e-10 * s.abs().max(1.0));
            prop_assert!((est.m_est - m).abs() < 1e-10 * m.abs().max(1e-3));
        }
    }
}
