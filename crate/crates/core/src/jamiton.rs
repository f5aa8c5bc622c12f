//! Exact jamiton construction.
//!
//! A jamiton is parametrised by its sonic density `rho_s` (which must violate
//! the SCC) and by the specific volume `v_minus` just ahead of its shock. The
//! smooth part satisfies `u = s + m v` and, in the wave frame,
//!
//! ```text
//! dx/dv = tau * v * r'(v) / w(v),   w(v) = U_hat(v) - (m v + s),
//!                                   r(v) = m h_hat(v) + m^2 v,
//! ```
//!
//! with a removable `0/0` at `v_s = 1/rho_s`. The shock joins `v_minus` back to
//! `v_plus < v_s`, where `r(v_plus) = r(v_minus)`.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::quad::QuadError;
use crate::numerics::{find_root, integrate, MonotoneCubic, QuadOptions, RootOptions};

/// Half-width of the window around `v_s` (relative) where the quadrature
/// integrand is replaced by its limit.
const SONIC_PATCH: f64 = 1e-9;
/// Largest `v / v_s` searched for the second root of `w`.
const V_M_SEARCH_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SonicData {
    pub rho_s: f64,
    pub v_s: f64,
    /// Vehicle flux through the wave [veh/s].
    pub m: f64,
    /// Propagation speed [m/s].
    pub s: f64,
    pub params: ModelParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JamitonSpec {
    pub sonic: SonicData,
    pub v_m: f64,
    pub v_r: f64,
    pub v_minus: f64,
    pub v_plus: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
}

/// One period of a jamiton sampled on a uniform grid, shock at `x = 0 = L`.
#[derive(Debug, Clone)]
pub struct JamitonProfile {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    /// Lagrangian wave coordinate, zero at the shock.
    pub chi: Vec<f64>,
    pub length: f64,
    pub vehicles: f64,
    pub amplitude: f64,
    pub spec: JamitonSpec,
    v_of_x: MonotoneCubic,
}

fn root_opts() -> RootOptions {
    RootOptions {
        rel_tol: 1e-13,
        abs_tol: 0.0,
        max_iter: 400,
    }
}

/// Adaptive quadrature that accepts a budget overrun when the remaining error
/// estimate is already small (`1e-7` relative); this only happens for
/// near-degenerate waves at the edge of the SCC violation interval.
fn robust_integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    let opts = QuadOptions {
        rel_tol,
        abs_tol,
        max_segments: 20_000,
    };
    match integrate(f, a, b, opts) {
        Ok(v) => Ok(v),
        Err(QuadError::Budget { estimate, error })
            if error <= 1e-7 * estimate.abs() + 10.0 * abs_tol =>
        {
            Ok(estimate)
        }
        Err(e) => Err(Error::Quadrature(format!("{e:?}"))),
    }
}

/// Sonic-point data `(m, s)` for a density that violates the SCC.
pub fn sonic_data(rho_s: f64, p: &ModelParams) -> Result<SonicData> {
    if !p.scc_violated(rho_s)? {
        return Err(Error::NoJamiton { rho_s });
    }
    let m = rho_s * rho_s * p.dh(rho_s);
    let s = p.u_eq(rho_s) - rho_s * p.dh(rho_s);
    Ok(SonicData {
        rho_s,
        v_s: 1.0 / rho_s,
        m,
        s,
        params: *p,
    })
}

impl SonicData {
    fn check(&self, v: f64) -> Result<()> {
        if v > self.params.v_min() && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain {
                quantity: "specific volume",
                value: v,
                allowed: "v > 1/rho_max",
            })
        }
    }

    pub fn w(&self, v: f64) -> Result<f64> {
        self.check(v)?;
        Ok(self.w_raw(v))
    }

    pub fn r(&self, v: f64) -> Result<f64> {
        self.check(v)?;
        Ok(self.r_raw(v))
    }

    pub fn dr(&self, v: f64) -> Result<f64> {
        self.check(v)?;
        Ok(self.dr_raw(v))
    }

    pub(crate) fn w_raw(&self, v: f64) -> f64 {
        self.params.u_eq(1.0 / v) - (self.m * v + self.s)
    }

    pub(crate) fn r_raw(&self, v: f64) -> f64 {
        self.m * self.params.h(1.0 / v) + self.m * self.m * v
    }

    pub(crate) fn dr_raw(&self, v: f64) -> f64 {
        self.m * self.params.dh_hat_raw(v) + self.m * self.m
    }

    /// `U_hat(v_s) - (m v_s + s)`, zero up to round-off.
    pub fn chapman_jouguet_residual(&self) -> f64 {
        self.w_raw(self.v_s)
    }

    /// Limit of `r'(v)/w(v)` at the sonic point.
    pub fn sonic_ratio(&self) -> f64 {
        let p = &self.params;
        self.m * p.d2h_hat_raw(self.v_s) / (p.du_hat_raw(self.v_s) - self.m)
    }

    /// `r'(v)/w(v)` with the removable singularity at `v_s` patched.
    pub(crate) fn ratio(&self, v: f64) -> f64 {
        if (v - self.v_s).abs() < SONIC_PATCH * self.v_s {
            self.sonic_ratio()
        } else {
            self.dr_raw(v) / self.w_raw(v)
        }
    }

    /// The jamiton line `q = s rho + m` as `(slope, intercept)`.
    pub fn fd_segment(&self) -> (f64, f64) {
        (self.s, self.m)
    }
}

/// Second root `v_M > v_s` of `w`.
pub fn find_v_m(sonic: &SonicData) -> Result<f64> {
    let v_s = sonic.v_s;
    let lo = v_s * (1.0 + 1e-7);
    if sonic.w_raw(lo) <= 0.0 {
        return Err(Error::BracketFailure {
            what: "w",
            detail: format!("w is not positive just above v_s = {v_s} (sonic density at the edge of the violation interval)"),
        });
    }
    let mut hi = 2.0 * v_s;
    while sonic.w_raw(hi) > 0.0 {
        hi *= 2.0;
        if hi > V_M_SEARCH_LIMIT * v_s {
            return Err(Error::BracketFailure {
                what: "w",
                detail: format!("no second root below {} * v_s", V_M_SEARCH_LIMIT),
            });
        }
    }
    find_root(|v| sonic.w_raw(v), lo, hi, root_opts()).map_err(|e| Error::BracketFailure {
        what: "w",
        detail: format!("{e:?}"),
    })
}

// Solves r(v) = target on (1/rho_max, v_s), where r decreases towards its minimum.
fn volume_below_sonic(sonic: &SonicData, target: f64) -> Result<f64> {
    let v_min = sonic.params.v_min();
    let f = |v: f64| sonic.r_raw(v) - target;
    if f(sonic.v_s) > 0.0 {
        return Err(Error::BracketFailure {
            what: "r",
            detail: format!("target {target} is below r_min"),
        });
    }
    let gap = sonic.v_s - v_min;
    let mut lo = sonic.v_s - 0.5 * gap;
    let mut k = 1;
    while f(lo) < 0.0 {
        k += 1;
        if k > 60 {
            return Err(Error::BracketFailure {
                what: "r",
                detail: format!("r never reaches {target} above 1/rho_max"),
            });
        }
        lo = v_min + gap * 0.5f64.powi(k);
    }
    find_root(f, lo, sonic.v_s, root_opts()).map_err(|e| Error::BracketFailure {
        what: "r",
        detail: format!("{e:?}"),
    })
}

/// `v_R < v_s` with `r(v_R) = r(v_M)`.
pub fn find_v_r(sonic: &SonicData) -> Result<f64> {
    let v_m = find_v_m(sonic)?;
    volume_below_sonic(sonic, sonic.r_raw(v_m))
}

/// Builds a jamiton with shock state `v_minus`, strictly between `v_s` and `v_M`.
pub fn make_spec(sonic: &SonicData, v_minus: f64) -> Result<JamitonSpec> {
    if !(v_minus > sonic.v_s) {
        return Err(Error::BelowSonic {
            v_minus,
            v_s: sonic.v_s,
        });
    }
    let v_m = find_v_m(sonic)?;
    if !(v_minus < v_m) {
        return Err(Error::BeyondMaximal { v_minus, v_m });
    }
    let r_min = sonic.r_raw(sonic.v_s);
    let r_max = sonic.r_raw(v_m);
    let v_r = volume_below_sonic(sonic, r_max)?;
    let v_plus = volume_below_sonic(sonic, sonic.r_raw(v_minus))?;
    Ok(JamitonSpec {
        sonic: *sonic,
        v_m,
        v_r,
        v_minus,
        v_plus,
        r_min,
        r_max,
        rho_minus: 1.0 / v_minus,
        rho_plus: 1.0 / v_plus,
    })
}

impl JamitonSpec {
    pub fn tau(&self) -> f64 {
        self.sonic.params.tau
    }

    /// Same wave shape with another relaxation time (only lengths change).
    pub fn with_tau(mut self, tau: f64) -> Self {
        self.sonic.params.tau = tau;
        self
    }

    /// `dx/dv` along the smooth part.
    pub fn dx_dv(&self, v: f64) -> f64 {
        self.tau() * v * self.sonic.ratio(v)
    }

    /// `dN/dv = rho dx/dv` along the smooth part.
    pub fn dn_dv(&self, v: f64) -> f64 {
        self.tau() * self.sonic.ratio(v)
    }

    fn split_integral(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        let v_s = self.sonic.v_s;
        // round-off in r'/w near v_s bounds the reachable absolute accuracy
        let floor = 1e-15 * f(v_s).abs() * v_s;
        let mut total = 0.0;
        for (lo, hi) in [(a, b.min(v_s)), (a.max(v_s), b)] {
            if hi > lo {
                total += robust_integrate(&f, lo, hi, 1e-13, floor)?;
            }
        }
        Ok(total)
    }

    /// Wavelength `L = tau * integral of v r'/w dv` from `v_plus` to `v_minus`.
    pub fn length(&self) -> Result<f64> {
        self.split_integral(|v| self.dx_dv(v), self.v_plus, self.v_minus)
    }

    /// Vehicles per wave `N = tau * integral of r'/w dv`.
    pub fn vehicle_count(&self) -> Result<f64> {
        self.split_integral(|v| self.dn_dv(v), self.v_plus, self.v_minus)
    }

    pub fn amplitude(&self) -> f64 {
        self.rho_plus - self.rho_minus
    }

    /// Residual `r(v_plus) - r(v_minus)` of the jump condition.
    pub fn jump_residual(&self) -> f64 {
        self.sonic.r_raw(self.v_plus) - self.sonic.r_raw(self.v_minus)
    }

    /// Traces the profile and samples it on `n_samples` uniform points of `[0, L]`.
    pub fn integrate_profile(&self, n_samples: usize) -> Result<JamitonProfile> {
        integrate_profile(self, n_samples)
    }
}

pub fn integrate_profile(spec: &JamitonSpec, n_samples: usize) -> Result<JamitonProfile> {
    if n_samples < 64 {
        return Err(Error::Config(format!(
            "profile needs at least 64 samples, got {n_samples}"
        )));
    }
    let v_s = spec.sonic.v_s;
    let half = (2 * n_samples).max(2048);
    let mut nodes = Vec::with_capacity(2 * half + 1);
    for k in 0..half {
        nodes.push(spec.v_plus + (v_s - spec.v_plus) * k as f64 / half as f64);
    }
    for k in 0..=half {
        nodes.push(v_s + (spec.v_minus - v_s) * k as f64 / half as f64);
    }
    *nodes.last_mut().unwrap() = spec.v_minus;

    let length = spec.length()?;
    let vehicles = spec.vehicle_count()?;

    let mut xs = Vec::with_capacity(nodes.len());
    let mut ns = Vec::with_capacity(nodes.len());
    let (mut x, mut n) = (0.0, 0.0);
    xs.push(0.0);
    ns.push(0.0);
    for w in nodes.windows(2) {
        // short sub-intervals: relative accuracy is limited by round-off in r'/w
        let dx = robust_integrate(|v| spec.dx_dv(v), w[0], w[1], 1e-10, 1e-14 * length)?;
        let dn = robust_integrate(|v| spec.dn_dv(v), w[0], w[1], 1e-10, 1e-14 * vehicles)?;
        if !(dx > 0.0) {
            return Err(Error::Quadrature(format!(
                "non-increasing x on [{}, {}]",
                w[0], w[1]
            )));
        }
        x += dx;
        n += dn;
        xs.push(x);
        ns.push(n);
    }

    // the per-interval sums agree with the global quadrature to round-off
    let scale = length / x;
    for xi in &mut xs {
        *xi *= scale;
    }
    *xs.last_mut().unwrap() = length;

    let v_of_x = MonotoneCubic::new(xs.clone(), nodes.clone())
        .ok_or_else(|| Error::Quadrature("x(v) table is not strictly increasing".into()))?;
    let n_of_x = MonotoneCubic::new(xs, ns).expect("same abscissae");

    let tau = spec.tau();
    let mut px = Vec::with_capacity(n_samples);
    let mut pv = Vec::with_capacity(n_samples);
    let mut chi = Vec::with_capacity(n_samples);
    for j in 0..n_samples {
        let xj = if j + 1 == n_samples {
            length
        } else {
            length * j as f64 / (n_samples - 1) as f64
        };
        px.push(xj);
        pv.push(v_of_x.eval(xj));
        chi.push(n_of_x.eval(xj) / tau);
    }
    let rho = pv.iter().map(|v| 1.0 / v).collect();
    let u = pv.iter().map(|v| spec.sonic.s + spec.sonic.m * v).collect();
    Ok(JamitonProfile {
        x: px,
        v: pv,
        rho,
        u,
        chi,
        length,
        vehicles,
        amplitude: spec.amplitude(),
        spec: *spec,
        v_of_x,
    })
}

impl JamitonProfile {
    /// Specific volume at `x`, extended periodically with period `L`.
    pub fn volume_at(&self, x: f64) -> f64 {
        let xr = x.rem_euclid(self.length);
        self.v_of_x.eval(xr)
    }

    /// `(rho, u)` at `x`, extended periodically.
    pub fn state_at(&self, x: f64) -> (f64, f64) {
        let v = self.volume_at(x);
        (1.0 / v, self.spec.sonic.s + self.spec.sonic.m * v)
    }

    /// Exact solution at time `t`: the profile translated by `s t`.
    pub fn state_at_time(&self, x: f64, t: f64) -> (f64, f64) {
        self.state_at(x - self.spec.sonic.s * t)
    }
}

// ---- fundamental-diagram geometry ------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximalSegment {
    pub rho_m: f64,
    pub q_m: f64,
    pub rho_r: f64,
    pub q_r: f64,
}

/// End points of the maximal jamiton line, `(rho_M, q_M)` on the equilibrium curve.
pub fn maximal_segment(sonic: &SonicData) -> Result<MaximalSegment> {
    let v_m = find_v_m(sonic)?;
    let v_r = volume_below_sonic(sonic, sonic.r_raw(v_m))?;
    let (rho_m, rho_r) = (1.0 / v_m, 1.0 / v_r);
    Ok(MaximalSegment {
        rho_m,
        q_m: sonic.m + sonic.s * rho_m,
        rho_r,
        q_r: sonic.m + sonic.s * rho_r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    pub rho_s: f64,
    pub s: f64,
    pub m: f64,
    pub maximal: MaximalSegment,
    /// `(rho*, q*)`; `None` where `|s'(rho_s)|` is degenerate.
    pub lower: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct Envelopes {
    pub points: Vec<EnvelopePoint>,
    /// Densities left out, with the reason.
    pub skipped: Vec<(f64, String)>,
}

/// `m(rho_s)` and `s(rho_s)` in Eulerian form, no SCC check.
fn sonic_pair(rho: f64, p: &ModelParams) -> (f64, f64) {
    let rdh = rho * p.dh(rho);
    (rho * rdh, p.u_eq(rho) - rdh)
}

/// Maximal segments and the upper/lower jamitonic envelopes sampled at `n`
/// sonic densities inside the SCC violation interval.
pub fn envelopes(p: &ModelParams, n: usize) -> Result<Envelopes> {
    let Some((lo, hi)) = p.scc_violation_interval()? else {
        return Ok(Envelopes::default());
    };
    let step = 1e-6 * p.rho_max;
    let mut out = Envelopes::default();
    for k in 0..n {
        let rho_s = lo + (hi - lo) * (k as f64 + 0.5) / n as f64;
        let sonic = match sonic_data(rho_s, p) {
            Ok(s) => s,
            Err(e) => {
                out.skipped.push((rho_s, e.to_string()));
                continue;
            }
        };
        let maximal = match maximal_segment(&sonic) {
            Ok(m) => m,
            Err(e) => {
                out.skipped.push((rho_s, e.to_string()));
                continue;
            }
        };
        let (m_hi, s_hi) = sonic_pair(rho_s + step, p);
        let (m_lo, s_lo) = sonic_pair(rho_s - step, p);
        let dm = (m_hi - m_lo) / (2.0 * step);
        let ds = (s_hi - s_lo) / (2.0 * step);
        let lower = if ds.abs() < 1e-14 {
            out.skipped
                .push((rho_s, "degenerate slope derivative".into()));
            None
        } else {
            let rho_star = -dm / ds;
            Some((rho_star, sonic.m + sonic.s * rho_star))
        };
        out.points.push(EnvelopePoint {
            rho_s,
            s: sonic.s,
            m: sonic.m,
            maximal,
            lower,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ModelParams {
        ModelParams::default()
    }

    fn sonic(frac: f64) -> SonicData {
        let p = p();
        sonic_data(frac * p.rho_max, &p).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn reference_sonic_values() {
        let s = sonic(0.433);
        assert!((s.m - 0.356).abs() < 0.005, "m = {}", s.m);
        assert!((s.s - 6.374).abs() < 0.005, "s = {}", s.s);
    }

    #[test]
    fn lagrangian_and_eulerian_mass_flux_agree() {
        let p = p();
        for frac in [0.25, 0.3, 0.433, 0.5, 0.6, 0.64] {
            let s = sonic(frac);
            let lag = -p.dh_hat(s.v_s).unwrap();
            assert!(rel(lag, s.m) < 1e-12);
            assert!(s.chapman_jouguet_residual().abs() < 1e-12 * p.u_max);
            assert!(s.dr(s.v_s).unwrap().abs() < 1e-12 * s.m * s.m);
        }
    }

    #[test]
    fn stable_density_has_no_jamiton() {
        let p = p();
        assert!(matches!(
            sonic_data(0.1 * p.rho_max, &p),
            Err(Error::NoJamiton { .. })
        ));
    }

    #[test]
    fn fd_line_through_equilibrium_point() {
        let p = p();
        let s = sonic(0.433);
        let (slope, icept) = s.fd_segment();
        let q = p.flow(s.rho_s).unwrap();
        assert!(rel(slope * s.rho_s + icept, q) < 1e-10);
        assert!(rel(p.flow(s.rho_s).unwrap(), p.flow(s.rho_s).unwrap()) < 1e-15);
    }

    #[test]
    fn w_is_concave_and_positive_up_to_v_m() {
        let s = sonic(0.433);
        let v_m = find_v_m(&s).unwrap();
        assert!(s.w(v_m).unwrap().abs() < 1e-10 * s.params.u_max);
        let h = (v_m - s.v_s) / 400.0;
        for k in 1..400 {
            let v = s.v_s + k as f64 * h;
            assert!(s.w(v).unwrap() > 0.0);
            let second = s.w(v - h).unwrap() - 2.0 * s.w(v).unwrap() + s.w(v + h).unwrap();
            assert!(second <= 0.0);
        }
    }

    #[test]
    fn r_is_convex_with_min_at_sonic() {
        let s = sonic(0.433);
        let vmin = s.params.v_min();
        let h = 0.05;
        let mut v = vmin + 2.0 * h;
        while v < 60.0 {
            let second = s.r(v - h).unwrap() - 2.0 * s.r(v).unwrap() + s.r(v + h).unwrap();
            assert!(second > 0.0, "v = {v}");
            assert!(s.r(v).unwrap() >= s.r(s.v_s).unwrap());
            v += h;
        }
    }

    #[test]
    fn reference_pair_admits_v_minus_25() {
        for frac in [0.425, 0.443] {
            let s = sonic(frac);
            let v_m = find_v_m(&s).unwrap();
            assert!(s.v_s < 25.0 && 25.0 < v_m);
        }
    }

    #[test]
    fn v_r_matches_r_max() {
        let s = sonic(0.433);
        let v_m = find_v_m(&s).unwrap();
        let v_r = find_v_r(&s).unwrap();
        assert!(v_r < s.v_s);
        assert!((s.r(v_r).unwrap() - s.r(v_m).unwrap()).abs() < 1e-10 * s.r(v_m).unwrap());
    }

    #[test]
    fn make_spec_checks_bounds() {
        let s = sonic(0.433);
        assert!(matches!(
            make_spec(&s, s.v_s * 0.99),
            Err(Error::BelowSonic { .. })
        ));
        let v_m = find_v_m(&s).unwrap();
        assert!(matches!(
            make_spec(&s, v_m),
            Err(Error::BeyondMaximal { .. })
        ));
        assert!(matches!(
            make_spec(&s, v_m * 1.1),
            Err(Error::BeyondMaximal { .. })
        ));
        let spec = make_spec(&s, 26.0).unwrap();
        assert!(spec.v_r <= spec.v_plus && spec.v_plus < s.v_s);
        assert!(s.v_s < spec.v_minus && spec.v_minus <= spec.v_m);
        assert!(spec.jump_residual().abs() < 1e-10 * spec.r_max);
        assert!(spec.r_min < s.r(spec.v_minus).unwrap());
        assert!(spec.rho_plus > spec.rho_minus);
    }

    #[test]
    fn small_jamiton_limit() {
        let s = sonic(0.433);
        let spec = make_spec(&s, s.v_s * (1.0 + 1e-4)).unwrap();
        assert!((spec.v_plus - s.v_s).abs() < 1e-2 * s.v_s * 1e-1);
        assert!(spec.amplitude() < 1e-4 * s.rho_s * 10.0);
    }

    #[test]
    fn sonic_patch_matches_two_sided_limit() {
        let s = sonic(0.433);
        let d = 1e-8 * s.v_s;
        let left = s.dr_raw(s.v_s - d) / s.w_raw(s.v_s - d);
        let right = s.dr_raw(s.v_s + d) / s.w_raw(s.v_s + d);
        let lim = 0.5 * (left + right);
        assert!(rel(s.sonic_ratio(), lim) < 1e-4);
        let spec = make_spec(&s, 26.0).unwrap();
        let expected = s.params.tau * s.v_s * s.m * s.params.d2h_hat(s.v_s).unwrap()
            / (s.params.du_hat(s.v_s).unwrap() - s.m);
        assert!(rel(spec.dx_dv(s.v_s), expected) < 1e-14);
    }

    #[test]
    fn length_scales_with_tau() {
        let spec = make_spec(&sonic(0.433), 26.0).unwrap();
        let l5 = spec.length().unwrap();
        let l10 = spec.with_tau(10.0).length().unwrap();
        assert!(rel(l10, 2.0 * l5) < 1e-10);
    }

    #[test]
    fn amplitude_and_mean_density() {
        let spec = make_spec(&sonic(0.433), 26.0).unwrap();
        assert!(rel(spec.amplitude(), 1.0 / spec.v_plus - 1.0 / spec.v_minus) < 1e-14);
        let mean = spec.vehicle_count().unwrap() / spec.length().unwrap();
        assert!(spec.rho_minus < mean && mean < spec.rho_plus);
    }

    #[test]
    fn profile_identities() {
        let spec = make_spec(&sonic(0.433), 26.0).unwrap();
        let prof = spec.integrate_profile(512).unwrap();
        assert_eq!(prof.x[0], 0.0);
        assert_eq!(*prof.x.last().unwrap(), prof.length);
        for w in prof.v.windows(2) {
            assert!(w[1] > w[0]);
        }
        for ((v, u), r) in prof.v.iter().zip(&prof.u).zip(&prof.rho) {
            assert!((u - (spec.sonic.s + spec.sonic.m * v)).abs() < 1e-12);
            assert!(*r >= spec.rho_minus * (1.0 - 1e-12) && *r <= spec.rho_plus * (1.0 + 1e-12));
        }
        assert!(rel(prof.v[0], spec.v_plus) < 1e-12);
        assert!(rel(*prof.v.last().unwrap(), spec.v_minus) < 1e-12);
        assert!(rel(*prof.chi.last().unwrap(), prof.vehicles / spec.tau()) < 1e-10);
    }

    #[test]
    fn too_few_samples_rejected() {
        let spec = make_spec(&sonic(0.433), 26.0).unwrap();
        assert!(spec.integrate_profile(10).is_err());
    }

    #[test]
    fn maximal_segment_on_equilibrium_curve() {
        let p = p();
        for frac in [0.3, 0.433, 0.55] {
            let s = sonic(frac);
            let seg = maximal_segment(&s).unwrap();
            assert!(rel(seg.q_m, p.flow(seg.rho_m).unwrap()) < 1e-10);
            let spec = make_spec(&s, 0.5 * (s.v_s + find_v_m(&s).unwrap())).unwrap();
            assert!(seg.rho_m < spec.rho_minus && spec.rho_plus < seg.rho_r);
        }
    }

    #[test]
    fn envelope_points_are_ordered() {
        let env = envelopes(&p(), 40).unwrap();
        assert!(env.points.len() >= 30);
        for w in env.points.windows(2) {
            assert!(w[1].s < w[0].s);
        }
        for pt in &env.points {
            assert!(pt.lower.is_some());
        }
    }

    #[test]
    fn reference_jamiton_dimensions() {
        let spec = make_spec(&sonic(0.433), 26.0).unwrap();
        assert!((spec.v_plus - 12.3444).abs() < 1e-3, "v+ = {}", spec.v_plus);
        assert!((spec.length().unwrap() - 38.743).abs() < 1e-2);
        assert!((spec.vehicle_count().unwrap() - 2.0859).abs() < 1e-3);
    }

    #[test]
    fn quadrature_matches_dense_trapezoid() {
        let spec = make_spec(&sonic(0.433), 26.0).unwrap();
        let n = 100_000;
        let (a, b) = (spec.v_plus, spec.v_minus);
        let h = (b - a) / n as f64;
        let mut sum = 0.5 * (spec.dx_dv(a) + spec.dx_dv(b));
        for k in 1..n {
            sum += spec.dx_dv(a + k as f64 * h);
        }
        let trap = sum * h;
        assert!(rel(spec.length().unwrap(), trap) < 1e-6);
    }

    #[test]
    fn periodic_evaluation() {
        let spec = make_spec(&sonic(0.433), 26.0).unwrap();
        let prof = spec.integrate_profile(256).unwrap();
        let x = 0.37 * prof.length;
        let (r0, u0) = prof.state_at(x);
        let (r1, u1) = prof.state_at(x + 3.0 * prof.length);
        assert!(rel(r0, r1) < 1e-10 && rel(u0, u1) < 1e-10);
        let (r2, _) = prof.state_at_time(x + spec.sonic.s * 2.0, 2.0);
        assert!(rel(r0, r2) < 1e-10);
    }
}
