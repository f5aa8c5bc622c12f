//! Closures of the inhomogeneous ARZ model: equilibrium flow, desired speed,
//! hesitation, their derivatives, characteristic speeds and the
//! sub-characteristic condition (SCC).
//!
//! The equilibrium flow is the smoothed Newell-Daganzo curve
//!
//! ```text
//! Q(rho) = c * (g(0) + (g(1) - g(0)) * rho/rho_max - g(rho/rho_max)),
//! g(y)   = sqrt(1 + ((y - b)/lambda)^2)
//! ```
//!
//! and `U = Q/rho`. Using `g(0) - g(y) = y (2b - y) / (lambda^2 (g(0) + g(y)))`
//! the desired speed is evaluated without the `0/0` at free road, so `U(0)` is
//! the analytic limit `Q'(0)`.
//!
//! The hesitation function is `h(rho) = beta * (rho/(rho_max - rho))^gamma`.

use serde::Deserialize;

use crate::error::{Error, Result};

/// Physical and model constants, SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Free-road speed [m/s].
    pub u_max: f64,
    /// Bumper-to-bumper density [veh/m].
    pub rho_max: f64,
    /// Location of the flow maximum as a fraction of `rho_max`.
    pub b: f64,
    /// Flow scale [veh/s].
    pub c: f64,
    /// Smoothing width of the flow kink.
    pub lambda_fd: f64,
    /// Hesitation scale [m/s].
    pub beta: f64,
    /// Hesitation exponent.
    pub gamma: f64,
    /// Relaxation time [s].
    pub tau: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        let u_max = 20.0;
        let rho_max = 1.0 / 7.5;
        Self {
            u_max,
            rho_max,
            b: 1.0 / 3.0,
            c: 0.078 * u_max * rho_max,
            lambda_fd: 0.1,
            beta: 8.0,
            gamma: 0.5,
            tau: 5.0,
        }
    }
}

// Every key is optional; a missing `c` follows `u_max` and `rho_max`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawModelParams {
    u_max: Option<f64>,
    rho_max: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    lambda_fd: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    tau: Option<f64>,
}

impl RawModelParams {
    pub(crate) fn resolve(self) -> Result<ModelParams> {
        let d = ModelParams::default();
        let u_max = self.u_max.unwrap_or(d.u_max);
        let rho_max = self.rho_max.unwrap_or(d.rho_max);
        let p = ModelParams {
            u_max,
            rho_max,
            b: self.b.unwrap_or(d.b),
            c: self.c.unwrap_or(0.078 * u_max * rho_max),
            lambda_fd: self.lambda_fd.unwrap_or(d.lambda_fd),
            beta: self.beta.unwrap_or(d.beta),
            gamma: self.gamma.unwrap_or(d.gamma),
            tau: self.tau.unwrap_or(d.tau),
        };
        p.validate()?;
        Ok(p)
    }
}

impl<'de> Deserialize<'de> for ModelParams {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        RawModelParams::deserialize(de)?
            .resolve()
            .map_err(serde::de::Error::custom)
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        positive("u_max", self.u_max)?;
        positive("rho_max", self.rho_max)?;
        positive("c", self.c)?;
        positive("lambda_fd", self.lambda_fd)?;
        positive("beta", self.beta)?;
        positive("tau", self.tau)?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: self.gamma,
                reason: "must lie in (0, 1]",
            });
        }
        if !self.b.is_finite() {
            return Err(Error::InvalidParameter {
                name: "b",
                value: self.b,
                reason: "must be finite",
            });
        }
        Ok(())
    }

    /// Parses a TOML document whose keys are the field names.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawModelParams = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.resolve()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// Smallest admissible specific volume, `1/rho_max`.
    pub fn v_min(&self) -> f64 {
        1.0 / self.rho_max
    }

    // ---- domain checks -------------------------------------------------

    fn check_closed(&self, quantity: &'static str, rho: f64) -> Result<()> {
        if (0.0..=self.rho_max).contains(&rho) {
            Ok(())
        } else {
            Err(Error::Domain {
                quantity,
                value: rho,
                allowed: "0 <= rho <= rho_max",
            })
        }
    }

    fn check_half_open(&self, quantity: &'static str, rho: f64) -> Result<()> {
        if rho >= 0.0 && rho < self.rho_max {
            Ok(())
        } else {
            Err(Error::Domain {
                quantity,
                value: rho,
                allowed: "0 <= rho < rho_max",
            })
        }
    }

    fn check_open(&self, quantity: &'static str, rho: f64) -> Result<()> {
        if rho > 0.0 && rho < self.rho_max {
            Ok(())
        } else {
            Err(Error::Domain {
                quantity,
                value: rho,
                allowed: "0 < rho < rho_max",
            })
        }
    }

    fn check_volume(&self, quantity: &'static str, v: f64) -> Result<()> {
        if v > self.v_min() && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain {
                quantity,
                value: v,
                allowed: "v > 1/rho_max",
            })
        }
    }

    // ---- flows ---------------------------------------------------------

    fn g(&self, y: f64) -> f64 {
        let z = (y - self.b) / self.lambda_fd;
        (1.0 + z * z).sqrt()
    }

    fn dg(&self, y: f64) -> f64 {
        (y - self.b) / (self.lambda_fd * self.lambda_fd * self.g(y))
    }

    pub fn flow(&self, rho: f64) -> Result<f64> {
        self.check_closed("Q", rho)?;
        Ok(self.flow_raw(rho))
    }

    pub(crate) fn flow_raw(&self, rho: f64) -> f64 {
        rho * self.u_eq(rho)
    }

    /// Piecewise-linear Newell-Daganzo flow with critical density `rho_max/3`.
    pub fn nd_flow(&self, rho: f64) -> Result<f64> {
        self.check_closed("Q_nd", rho)?;
        let rho_c = self.rho_max / 3.0;
        let q_max = self.u_max * rho_c;
        Ok(if rho < rho_c {
            q_max * rho / rho_c
        } else {
            q_max * (self.rho_max - rho) / (self.rho_max - rho_c)
        })
    }

    pub fn greenshields_flow(&self, rho: f64) -> Result<f64> {
        self.check_closed("Q_greenshields", rho)?;
        Ok(self.u_max * rho * (1.0 - rho / self.rho_max))
    }

    /// `mu(rho) = Q'(rho)`, the LWR characteristic speed.
    pub fn lwr_speed(&self, rho: f64) -> Result<f64> {
        self.check_closed("mu", rho)?;
        Ok(self.lwr_speed_raw(rho))
    }

    pub(crate) fn lwr_speed_raw(&self, rho: f64) -> f64 {
        let y = rho / self.rho_max;
        self.c / self.rho_max * (self.g(1.0) - self.g(0.0) - self.dg(y))
    }

    // ---- desired speed -------------------------------------------------

    pub fn desired_speed(&self, rho: f64) -> Result<f64> {
        self.check_closed("U", rho)?;
        Ok(self.u_eq(rho))
    }

    pub(crate) fn u_eq(&self, rho: f64) -> f64 {
        let y = rho / self.rho_max;
        let g0 = self.g(0.0);
        let l2 = self.lambda_fd * self.lambda_fd;
        self.c / self.rho_max * ((self.g(1.0) - g0) + (2.0 * self.b - y) / (l2 * (g0 + self.g(y))))
    }

    pub fn d_desired_speed(&self, rho: f64) -> Result<f64> {
        self.check_half_open("U'", rho)?;
        Ok(self.du_eq(rho))
    }

    pub(crate) fn du_eq(&self, rho: f64) -> f64 {
        let y = rho / self.rho_max;
        let d = self.g(0.0) + self.g(y);
        let n = 2.0 * self.b - y;
        let l2 = self.lambda_fd * self.lambda_fd;
        self.c / (self.rho_max * self.rho_max * l2) * (-d - n * self.dg(y)) / (d * d)
    }

    // ---- hesitation ----------------------------------------------------

    pub fn hesitation(&self, rho: f64) -> Result<f64> {
        self.check_half_open("h", rho)?;
        Ok(self.h(rho))
    }

    pub(crate) fn h(&self, rho: f64) -> f64 {
        let z = rho / (self.rho_max - rho);
        if self.gamma == 0.5 {
            self.beta * z.sqrt()
        } else {
            self.beta * z.powf(self.gamma)
        }
    }

    pub fn d_hesitation(&self, rho: f64) -> Result<f64> {
        self.check_open("h'", rho)?;
        Ok(self.dh(rho))
    }

    pub(crate) fn dh(&self, rho: f64) -> f64 {
        self.gamma * self.h(rho) * self.rho_max / (rho * (self.rho_max - rho))
    }

    /// `rho * h'(rho)`, finite down to `rho = 0`.
    pub(crate) fn rho_dh(&self, rho: f64) -> f64 {
        self.gamma * self.h(rho) * self.rho_max / (self.rho_max - rho)
    }

    pub fn d2_hesitation(&self, rho: f64) -> Result<f64> {
        self.check_open("h''", rho)?;
        Ok(self.d2h(rho))
    }

    pub(crate) fn d2h(&self, rho: f64) -> f64 {
        let w = rho * (self.rho_max - rho);
        self.gamma * self.rho_max * self.h(rho) / (w * w)
            * (self.gamma * self.rho_max - (self.rho_max - 2.0 * rho))
    }

    // ---- characteristic speeds and SCC ---------------------------------

    /// `(lambda1, lambda2) = (u - rho h'(rho), u)`.
    pub fn char_speeds(&self, rho: f64, u: f64) -> Result<(f64, f64)> {
        self.check_half_open("characteristic speeds", rho)?;
        Ok((u - self.rho_dh(rho), u))
    }

    /// `U'(rho) + h'(rho)`; the uniform state is linearly stable iff positive.
    pub fn scc_margin(&self, rho: f64) -> Result<f64> {
        self.check_open("SCC margin", rho)?;
        Ok(self.scc_margin_raw(rho))
    }

    pub(crate) fn scc_margin_raw(&self, rho: f64) -> f64 {
        self.du_eq(rho) + self.dh(rho)
    }

    pub fn scc_violated(&self, rho: f64) -> Result<bool> {
        Ok(self.scc_margin(rho)? < 0.0)
    }

    /// The interval of densities on which the SCC fails, or `None` when the
    /// uniform states are stable everywhere.
    pub fn scc_violation_interval(&self) -> Result<Option<(f64, f64)>> {
        const SCAN: usize = 4096;
        let tol = 1e-12 * self.rho_max;
        let at = |k: usize| (k as f64 + 0.5) / SCAN as f64 * self.rho_max;
        let mut intervals = Vec::new();
        let mut start: Option<f64> = None;
        let mut prev_rho = at(0);
        let mut prev_neg = self.scc_margin_raw(prev_rho) < 0.0;
        if prev_neg {
            start = Some(prev_rho);
        }
        let opts = crate::numerics::RootOptions {
            rel_tol: 0.0,
            abs_tol: tol,
            max_iter: 400,
        };
        let edge = |a: f64, b: f64| {
            crate::numerics::find_root(|r| self.scc_margin_raw(r), a, b, opts)
                .unwrap_or(0.5 * (a + b))
        };
        for k in 1..SCAN {
            let rho = at(k);
            let neg = self.scc_margin_raw(rho) < 0.0;
            if neg && !prev_neg {
                start = Some(edge(prev_rho, rho));
            } else if !neg && prev_neg {
                let lo = start.take().expect("interval start recorded");
                intervals.push((lo, edge(prev_rho, rho)));
            }
            prev_rho = rho;
            prev_neg = neg;
        }
        if let Some(lo) = start {
            intervals.push((lo, prev_rho));
        }
        match intervals.len() {
            0 => Ok(None),
            1 => Ok(Some(intervals[0])),
            _ => Err(Error::MultipleViolationIntervals(intervals)),
        }
    }

    // ---- Lagrangian closures -------------------------------------------

    pub fn u_hat(&self, v: f64) -> Result<f64> {
        self.check_volume("U_hat", v)?;
        Ok(self.u_eq(1.0 / v))
    }

    pub fn h_hat(&self, v: f64) -> Result<f64> {
        self.check_volume("h_hat", v)?;
        Ok(self.h(1.0 / v))
    }

    pub fn du_hat(&self, v: f64) -> Result<f64> {
        self.check_volume("U_hat'", v)?;
        Ok(self.du_hat_raw(v))
    }

    pub fn dh_hat(&self, v: f64) -> Result<f64> {
        self.check_volume("h_hat'", v)?;
        Ok(self.dh_hat_raw(v))
    }

    pub fn d2h_hat(&self, v: f64) -> Result<f64> {
        self.check_volume("h_hat''", v)?;
        Ok(self.d2h_hat_raw(v))
    }

    pub(crate) fn du_hat_raw(&self, v: f64) -> f64 {
        -self.du_eq(1.0 / v) / (v * v)
    }

    pub(crate) fn dh_hat_raw(&self, v: f64) -> f64 {
        -self.dh(1.0 / v) / (v * v)
    }

    pub(crate) fn d2h_hat_raw(&self, v: f64) -> f64 {
        let rho = 1.0 / v;
        let v2 = v * v;
        self.d2h(rho) / (v2 * v2) + 2.0 * self.dh(rho) / (v2 * v)
    }
}
