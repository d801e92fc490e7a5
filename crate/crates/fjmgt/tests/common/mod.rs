//! Shared numerical oracles for the integration suites: an adaptive
//! Dormand–Prince RK5(4) integrator, bisection, and the closed-form linear
//! modal solution. Everything here is implemented independently of the
//! library code it is used to check.

// Each test binary compiles this module separately and uses its own subset.
#![allow(dead_code)]

/// One Dormand–Prince step: returns the 5th-order value and the embedded
/// 5th-vs-4th error estimate.
fn dp_step(f: &dyn Fn(f64, f64) -> f64, t: f64, y: f64, h: f64) -> (f64, f64) {
    let k1 = f(t, y);
    let k2 = f(t + h / 5.0, y + h * (k1 / 5.0));
    let k3 = f(t + 3.0 * h / 10.0, y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
    let k4 = f(t + 4.0 * h / 5.0, y + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
    let k5 = f(
        t + 8.0 * h / 9.0,
        y + h
            * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3
                - 212.0 / 729.0 * k4),
    );
    let k6 = f(
        t + h,
        y + h
            * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2
                + 46732.0 / 5247.0 * k3
                + 49.0 / 176.0 * k4
                - 5103.0 / 18656.0 * k5),
    );
    let y5 = y + h
        * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5
            + 11.0 / 84.0 * k6);
    let k7 = f(t + h, y5);
    let y4 = y + h
        * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 + 393.0 / 640.0 * k4
            - 92097.0 / 339200.0 * k5
            + 187.0 / 2100.0 * k6
            + k7 / 40.0);
    (y5, y5 - y4)
}

/// Integrates the scalar ODE `y' = f(t, y)` from `(t0, y0)` to `t1` with
/// adaptive Dormand–Prince steps.
pub fn rk45_integrate(
    f: &dyn Fn(f64, f64) -> f64,
    t0: f64,
    y0: f64,
    t1: f64,
    rtol: f64,
    atol: f64,
) -> f64 {
    assert!(t1 >= t0);
    let mut t = t0;
    let mut y = y0;
    let mut h = ((t1 - t0) / 100.0).max(1e-12);
    while t < t1 {
        h = h.min(t1 - t);
        let (y_new, err) = dp_step(f, t, y, h);
        let scale = atol + rtol * y.abs().max(y_new.abs());
        let e = (err / scale).abs();
        if e <= 1.0 || h <= 1e-14 * t1.abs().max(1.0) {
            t += h;
            y = y_new;
            h *= (0.9 * e.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        } else {
            h *= (0.9 * e.powf(-0.2)).max(0.1);
        }
    }
    y
}

/// Integrates `y' = f(t, y)` from `(t0, y0)` until `y` first reaches
/// `threshold`, returning the crossing time (refined by step-halving to
/// ~1e-12). Panics if no crossing happens before `t_max`.
pub fn rk45_first_crossing(
    f: &dyn Fn(f64, f64) -> f64,
    t0: f64,
    y0: f64,
    threshold: f64,
    t_max: f64,
) -> f64 {
    let mut t = t0;
    let mut y = y0;
    let mut h = 1e-4;
    loop {
        assert!(t <= t_max, "no crossing of {threshold:e} before t = {t_max}");
        let (y_new, err) = dp_step(f, t, y, h);
        let scale = 1e-12 + 1e-10 * y.abs().max(y_new.abs());
        let e = (err / scale).abs();
        if e > 1.0 && h > 1e-15 {
            h *= (0.9 * e.powf(-0.2)).max(0.1);
            continue;
        }
        if y_new >= threshold {
            if h < 1e-12 {
                return t + h;
            }
            h *= 0.5;
            continue;
        }
        t += h;
        y = y_new;
        h *= (0.9 * e.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
}

/// Plain bisection on a bracketing interval with `f(lo) ≤ 0 ≤ f(hi)`.
pub fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    assert!(f(lo) <= 0.0 && f(hi) >= 0.0, "root not bracketed on [{lo}, {hi}]");
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form solution of the linear modal equation
/// `τξ‴ + ξ″ + τc²λξ′ + c²λξ = 0` (characteristic roots `−1/τ`, `±iω` with
/// `ω = c√λ`): returns `[ξ, ξ′, ξ″]` at time `t` for initial data
/// `[ξ(0), ξ′(0), ξ″(0)]`.
pub fn exact_linear_mode(tau: f64, omega: f64, init: [f64; 3], t: f64) -> [f64; 3] {
    let [x0, x1, x2] = init;
    let a = tau * tau * (x2 + omega * omega * x0) / (1.0 + tau * tau * omega * omega);
    let b = x0 - a;
    let c = (x1 + a / tau) / omega;
    let decay = (-t / tau).exp();
    let (sin, cos) = (omega * t).sin_cos();
    [
        a * decay + b * cos + c * sin,
        -a / tau * decay - b * omega * sin + c * omega * cos,
        a / (tau * tau) * decay - b * omega * omega * cos - c * omega * omega * sin,
    ]
}
