//! Derivative-free minimization and the small curve fits built on it.

use serde::{Deserialize, Serialize};

/// Nelder-Mead settings. Coefficients default to the standard
/// reflection/expansion/contraction/shrink values 1, 2, 0.5, 0.5.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop when the simplex diameter (max vertex distance to the best
    /// vertex) drops below this.
    pub x_tol: f64,
    /// Stop when `max f - min f` over the simplex drops below this.
    pub f_tol: f64,
    pub max_iters: usize,
    /// Per-coordinate offset of the initial simplex vertices.
    pub initial_step: Vec<f64>,
    /// Optional box; every trial point is clamped into it.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl NelderMeadOptions {
    pub fn new(initial_step: Vec<f64>) -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            x_tol: 1e-6,
            f_tol: 1e-10,
            max_iters: 5000,
            initial_step,
            bounds: None,
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

fn clamp(x: &mut [f64], bounds: &Option<Vec<(f64, f64)>>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in x.iter_mut().zip(b) {
            *v = v.clamp(lo, hi);
        }
    }
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(&x, &y)| x + t * (y - x)).collect()
}

pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    clamp(&mut start, &opts.bounds);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(&start);
    simplex.push((start.clone(), f0));
    for i in 0..n {
        let mut v = start.clone();
        let step = opts.initial_step.get(i).copied().unwrap_or(0.05);
        v[i] += step;
        if let Some(b) = &opts.bounds {
            if v[i] > b[i].1 {
                v[i] = start[i] - step;
            }
        }
        clamp(&mut v, &opts.bounds);
        let fv = eval(&v);
        simplex.push((v, fv));
    }

    let mut trace = vec![];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0];
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(v, _)| {
                v.iter()
                    .zip(&best.0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread = simplex[n].1 - simplex[0].1;
        if diameter < opts.x_tol || spread < opts.f_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let mut xr = affine(&centroid, &worst.0, -opts.reflection);
        clamp(&mut xr, &opts.bounds);
        let fr = eval(&xr);

        if fr < simplex[0].1 {
            let mut xe = affine(&centroid, &worst.0, -opts.reflection * opts.expansion);
            clamp(&mut xe, &opts.bounds);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            // Outside contraction when the reflection beat the worst point,
            // inside contraction otherwise.
            let (mut xc, limit) = if fr < worst.1 {
                (affine(&centroid, &xr, opts.contraction), fr)
            } else {
                (affine(&centroid, &worst.0, opts.contraction), worst.1)
            };
            clamp(&mut xc, &opts.bounds);
            let fc = eval(&xc);
            if fc < limit {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let mut v = affine(&best, &vertex.0, opts.shrink);
                    clamp(&mut v, &opts.bounds);
                    let fv = eval(&v);
                    *vertex = (v, fv);
                }
            }
        }
        let fmin = simplex.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        trace.push(fmin);
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        fx,
        iterations,
        evaluations: evals,
        converged,
        trace,
    }
}

/// Ordinary least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// `y ≈ a·p^m + b`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpDecayFit {
    pub a: f64,
    pub p: f64,
    pub b: f64,
    pub rss: f64,
}

/// Best `(a, b)` for a fixed decay base, and the residual sum of squares.
fn exp_decay_linear_part(m: &[f64], y: &[f64], p: f64) -> (f64, f64, f64) {
    let basis: Vec<f64> = m.iter().map(|&mi| p.powf(mi)).collect();
    let fit = linear_fit(&basis, y);
    let (a, b) = match fit {
        Some(f) => (f.slope, f.intercept),
        // Constant basis: the decay term is indistinguishable from the offset.
        None => (0.0, y.iter().sum::<f64>() / y.len() as f64),
    };
    let rss = basis
        .iter()
        .zip(y)
        .map(|(&u, &v)| (a * u + b - v).powi(2))
        .sum();
    (a, b, rss)
}

/// Fits `a·p^m + b` by scanning `p ∈ [0, 1]` with the linear coefficients
/// solved exactly at each `p`, then refining with golden-section search.
///
/// Among equally good `p` the largest is kept, so data without any decay
/// fits to `p = 1`.
pub fn fit_exp_decay(m: &[f64], y: &[f64]) -> Option<ExpDecayFit> {
    if m.len() < 3 || m.len() != y.len() {
        return None;
    }
    let grid = 2000;
    let mut best = (1.0, f64::INFINITY);
    for i in (0..=grid).rev() {
        let p = i as f64 / grid as f64;
        let (_, _, rss) = exp_decay_linear_part(m, y, p);
        if rss < best.1 - 1e-15 * (1.0 + best.1.abs().min(1.0)) {
            best = (p, rss);
        }
    }
    let step = 1.0 / grid as f64;
    let (mut lo, mut hi) = ((best.0 - step).max(0.0), (best.0 + step).min(1.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let obj = |p: f64| exp_decay_linear_part(m, y, p).2;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    for _ in 0..100 {
        if obj(c) < obj(d) {
            hi = d;
        } else {
            lo = c;
        }
        c = hi - g * (hi - lo);
        d = lo + g * (hi - lo);
    }
    let refined = 0.5 * (lo + hi);
    let p = if obj(refined) < best.1 { refined } else { best.0 };
    let (a, b, rss) = exp_decay_linear_part(m, y, p);
    Some(ExpDecayFit { a, p, b, rss })
}

/// `y ≈ amplitude · e^{-t/t2} · cos(ω t + phase) + offset`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedCosineFit {
    pub amplitude: f64,
    pub t2: f64,
    pub omega: f64,
    pub phase: f64,
    pub offset: f64,
    pub rss: f64,
}

fn damped_cosine(p: &[f64], t: f64) -> f64 {
    // p = [amplitude, decay rate, omega, phase, offset]
    p[0] * (-p[1] * t).exp() * (p[2] * t + p[3]).cos() + p[4]
}

/// Fits a damped cosine: angular frequency from a periodogram scan, then
/// all five parameters refined together by Nelder-Mead.
pub fn fit_damped_cosine(t: &[f64], y: &[f64]) -> Result<DampedCosineFit, String> {
    let n = t.len();
    if n < 6 || n != y.len() {
        return Err(format!("need at least 6 samples, got {n}"));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let span = t[n - 1] - t[0];
    if !(span > 0.0) {
        return Err("sample times must increase".into());
    }
    let amp0 = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if amp0 < 1e-12 {
        return Err("signal is constant".into());
    }
    let min_dt = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let omega_max = std::f64::consts::PI / min_dt;
    let steps = 4 * n;
    let mut best_w = 0.0;
    let mut best_pow = -1.0;
    for i in 0..=steps {
        let w = omega_max * i as f64 / steps as f64;
        let (mut c, mut s) = (0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(y) {
            c += (yi - mean) * (w * ti).cos();
            s += (yi - mean) * (w * ti).sin();
        }
        let pow = c * c + s * s;
        if pow > best_pow {
            best_pow = pow;
            best_w = w;
        }
    }
    let rss = |p: &[f64]| -> f64 {
        t.iter()
            .zip(y)
            .map(|(&ti, &yi)| (damped_cosine(p, ti) - yi).powi(2))
            .sum()
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for phase0 in [0.0, std::f64::consts::PI / 2.0, std::f64::consts::PI, -std::f64::consts::PI / 2.0] {
        let x0 = [amp0, 1.0 / span, best_w, phase0, mean];
        let scale = [0.1 * amp0, 0.2 / span, 0.1 * best_w.max(1.0 / span), 0.3, 0.1 * amp0];
        let mut opts = NelderMeadOptions::new(scale.to_vec());
        opts.x_tol = 1e-12;
        opts.f_tol = 1e-20;
        opts.max_iters = 20000;
        let r = nelder_mead(|p| rss(p), &x0, &opts);
        if best.as_ref().map_or(true, |b| r.fx < b.1) {
            best = Some((r.x, r.fx));
        }
    }
    let (mut p, fx) = best.expect("at least one start");
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[3] += std::f64::consts::PI;
    }
    if p[1] <= 0.0 {
        return Err("fitted envelope does not decay".into());
    }
    let total: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if fx > 0.5 * total {
        return Err("damped cosine does not describe the data".into());
    }
    Ok(DampedCosineFit {
        amplitude: p[0],
        t2: 1.0 / p[1],
        omega: p[2].abs(),
        phase: p[3],
        offset: p[4],
        rss: fx,
    })
}
