//! Bracketed scalar root finding and golden-section maximisation.

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            abs_tol: 0.0,
            max_iter: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootError {
    NoSignChange { fa: f64, fb: f64 },
    NotFinite(f64),
}

/// Finds a root of `f` inside `[a, b]`, which must bracket a sign change.
///
/// Secant (regula falsi) steps are taken while they shrink the bracket by at
/// least half; otherwise the step falls back to bisection, so the bracket width
/// at least halves every two evaluations.
pub fn find_root<F>(mut f: F, a: f64, b: f64, opts: RootOptions) -> Result<f64, RootError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(RootError::NotFinite(a));
    }
    if !fb.is_finite() {
        return Err(RootError::NotFinite(b));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoSignChange { fa, fb });
    }

    let mut force_bisect = false;
    for _ in 0..opts.max_iter {
        let width = b - a;
        if width <= opts.abs_tol + opts.rel_tol * a.abs().max(b.abs()) {
            break;
        }
        let secant = b - fb * (b - a) / (fb - fa);
        let x = if force_bisect || !(secant > a && secant < b) {
            0.5 * (a + b)
        } else {
            secant
        };
        let fx = f(x);
        if !fx.is_finite() {
            return Err(RootError::NotFinite(x));
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        force_bisect = !force_bisect && (b - a) > 0.5 * width;
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max<F>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
