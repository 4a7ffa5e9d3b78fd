//! Scalar ODE integration with sign-change events.
//!
//! `f` may refuse to evaluate (return `None`) outside its domain. The
//! adaptive integrator treats that as a step rejection; if the step shrinks
//! below `h_min` the run ends with [`Stop::DomainExit`].

/// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Clone, Debug)]
pub struct Dp45Options {
    pub atol: f64,
    pub rtol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dp45Options {
    fn default() -> Self {
        Dp45Options { atol: 1e-10, rtol: 0.0, h_init: 1e-4, h_min: 1e-13, h_max: 1e-2, max_steps: 2_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    /// The event function changed sign; `(t, y)` is the located root.
    Event { t: f64, y: f64 },
    /// Reached `t_end`.
    End,
    /// `f` became undefined ahead of `t`.
    DomainExit { t: f64, y: f64 },
    MaxSteps { t: f64, y: f64 },
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Values at the requested output times that were reached.
    pub outputs: Vec<(f64, f64)>,
    pub stop: Stop,
    pub accepted: usize,
    pub rejected: usize,
}

/// One DP step of size `h`. Returns `(y_new, err_estimate)`.
fn dp_step<F: Fn(f64, f64) -> Option<f64>>(f: &F, t: f64, y: f64, h: f64) -> Option<(f64, f64)> {
    let mut k = [0.0; 7];
    for s in 0..7 {
        let mut yi = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            yi += h * A[s][j] * kj;
        }
        k[s] = f(t + C[s] * h, yi)?;
    }
    let y5 = y + h * (0..7).map(|s| B5[s] * k[s]).sum::<f64>();
    let y4 = y + h * (0..7).map(|s| B4[s] * k[s]).sum::<f64>();
    Some((y5, y5 - y4))
}

/// Integrate `y′ = f(t, y)` from `(t0, y0)` to `t_end`, stopping at the
/// first sign change of `event(t, y)`. Every requested output time before
/// the stop is hit exactly by step clipping.
pub fn dp45<F, E>(f: F, event: E, t0: f64, y0: f64, t_end: f64, outputs: &[f64], opts: &Dp45Options) -> Solution
where
    F: Fn(f64, f64) -> Option<f64>,
    E: Fn(f64, f64) -> f64,
{
    let (mut t, mut y) = (t0, y0);
    let mut h = opts.h_init.min(opts.h_max);
    let mut out = Vec::with_capacity(outputs.len());
    let mut next_out = outputs.iter().position(|&s| s > t0).unwrap_or(outputs.len());
    for &s in &outputs[..next_out] {
        if s == t0 {
            out.push((s, y0));
        }
    }
    let (mut accepted, mut rejected) = (0, 0);
    let mut ev_prev = event(t, y);
    loop {
        if accepted >= opts.max_steps {
            return Solution { outputs: out, stop: Stop::MaxSteps { t, y }, accepted, rejected };
        }
        if t >= t_end {
            return Solution { outputs: out, stop: Stop::End, accepted, rejected };
        }
        let mut target = t_end;
        if next_out < outputs.len() {
            target = target.min(outputs[next_out]);
        }
        let clipped = t + h >= target;
        let step = if clipped { target - t } else { h };
        let tol = |y_new: f64| opts.atol + opts.rtol * y.abs().max(y_new.abs());
        match dp_step(&f, t, y, step) {
            None => {
                rejected += 1;
                h = step * 0.25;
                if h < opts.h_min {
                    return Solution { outputs: out, stop: Stop::DomainExit { t, y }, accepted, rejected };
                }
            }
            Some((y_new, err)) => {
                let ratio = err.abs() / tol(y_new);
                if ratio <= 1.0 {
                    let t_new = if clipped { target } else { t + step };
                    let ev_new = event(t_new, y_new);
                    if ev_prev != 0.0 && ev_new.signum() != ev_prev.signum() {
                        let (te, ye) = locate(&f, &event, t, y, ev_prev, step);
                        return Solution { outputs: out, stop: Stop::Event { t: te, y: ye }, accepted, rejected };
                    }
                    accepted += 1;
                    t = t_new;
                    y = y_new;
                    ev_prev = ev_new;
                    while next_out < outputs.len() && outputs[next_out] <= t {
                        out.push((outputs[next_out], y));
                        next_out += 1;
                    }
                    let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                    // a clipped step says nothing about the natural step size
                    if !clipped || grow < 1.0 {
                        h = (step * grow).min(opts.h_max);
                    }
                } else {
                    rejected += 1;
                    h = step * (0.9 * ratio.powf(-0.25)).clamp(0.1, 0.5);
                    if h < opts.h_min {
                        return Solution { outputs: out, stop: Stop::DomainExit { t, y }, accepted, rejected };
                    }
                }
            }
        }
    }
}

/// Bisect on the length of a single step from `(t, y)` for the root of the
/// event function inside `(t, t + h]`.
fn locate<F, E>(f: &F, event: &E, t: f64, y: f64, ev0: f64, h: f64) -> (f64, f64)
where
    F: Fn(f64, f64) -> Option<f64>,
    E: Fn(f64, f64) -> f64,
{
    let (mut lo, mut hi) = (0.0, h);
    let mut y_hi = dp_step(f, t, y, h).map(|r| r.0).unwrap_or(y);
    for _ in 0..200 {
        if hi - lo <= 1e-15 * (1.0 + t.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let Some((ym, _)) = dp_step(f, t, y, mid) else {
            hi = mid;
            continue;
        };
        if event(t + mid, ym).signum() == ev0.signum() && event(t + mid, ym) != 0.0 {
            lo = mid;
        } else {
            hi = mid;
            y_hi = ym;
        }
    }
    (t + hi, y_hi)
}

/// Classical fixed-step RK4, stopping at the first sign change of `event`
/// (root located by bisection on a single substep). Returns the stop.
pub fn rk4_fixed<F, E>(f: F, event: E, t0: f64, y0: f64, t_end: f64, dt: f64) -> Stop
where
    F: Fn(f64, f64) -> Option<f64>,
    E: Fn(f64, f64) -> f64,
{
    let step = |t: f64, y: f64, h: f64| -> Option<f64> {
        let k1 = f(t, y)?;
        let k2 = f(t + 0.5 * h, y + 0.5 * h * k1)?;
        let k3 = f(t + 0.5 * h, y + 0.5 * h * k2)?;
        let k4 = f(t + h, y + h * k3)?;
        Some(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    };
    let (mut t, mut y) = (t0, y0);
    let mut ev = event(t, y);
    while t < t_end {
        let h = dt.min(t_end - t);
        let Some(yn) = step(t, y, h) else {
            return Stop::DomainExit { t, y };
        };
        let evn = event(t + h, yn);
        if ev != 0.0 && evn.signum() != ev.signum() {
            let (mut lo, mut hi) = (0.0, h);
            let mut y_hi = yn;
            for _ in 0..200 {
                if hi - lo <= 1e-15 * (1.0 + t.abs()) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                match step(t, y, mid) {
                    Some(ym) if event(t + mid, ym).signum() == ev.signum() && event(t + mid, ym) != 0.0 => lo = mid,
                    Some(ym) => {
                        hi = mid;
                        y_hi = ym;
                    }
                    None => hi = mid,
                }
            }
            return Stop::Event { t: t + hi, y: y_hi };
        }
        t += h;
        y = yn;
        ev = evn;
    }
    Stop::End
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_hits_outputs() {
        let outs = [0.5, 1.0, 1.5, 2.0];
        let sol = dp45(|_, y| Some(-y), |_, _| 1.0, 0.0, 1.0, 2.0, &outs, &Dp45Options::default());
        assert_eq!(sol.stop, Stop::End);
        assert_eq!(sol.outputs.len(), 4);
        for (t, y) in sol.outputs {
            assert!((y - (-t).exp()).abs() < 1e-9, "{t}: {y}");
        }
    }

    #[test]
    fn event_located_precisely() {
        // y = cos t, first zero at π/2
        let sol = dp45(
            |t, _| Some(-t.sin()),
            |_, y| y,
            0.0,
            1.0,
            3.0,
            &[],
            &Dp45Options::default(),
        );
        match sol.stop {
            Stop::Event { t, y } => {
                assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
                assert!(y.abs() < 1e-9);
            }
            s => panic!("{s:?}"),
        }
        match rk4_fixed(|t, _| Some(-t.sin()), |_, y| y, 0.0, 1.0, 3.0, 1e-3) {
            Stop::Event { t, .. } => assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-10),
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn domain_exit_is_reported() {
        // y′ = −1/√(1−t) blows up at t = 1
        let sol = dp45(
            |t, _| if t < 1.0 { Some(-1.0 / (1.0 - t).sqrt()) } else { None },
            |_, _| 1.0,
            0.0,
            10.0,
            2.0,
            &[],
            &Dp45Options::default(),
        );
        match sol.stop {
            Stop::DomainExit { t, .. } => assert!((t - 1.0).abs() < 1e-3),
            s => panic!("{s:?}"),
        }
    }
}
