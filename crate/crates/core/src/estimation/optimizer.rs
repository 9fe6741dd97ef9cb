//! Projected BFGS on a box.
//!
//! Coordinates sitting on a bound with the gradient pointing outward are held
//! fixed for the iteration; the quasi-Newton direction is computed on the
//! remaining free block and the trial point is projected back onto the box.

use nalgebra::{DMatrix, DVector};

use crate::likelihood::LikelihoodError;

pub type Objective<'a> = dyn FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>), LikelihoodError> + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Free,
    Lower,
    Upper,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted iterate, starting point first.
    pub history: Vec<f64>,
    pub bounds: Vec<Bound>,
}

pub struct Settings {
    pub max_iter: usize,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self { max_iter: 500, armijo: 1e-4, max_backtracks: 60 }
    }
}

fn classify(x: &DVector<f64>, g: &DVector<f64>, lo: &[f64], hi: &[f64]) -> Vec<Bound> {
    (0..x.len())
        .map(|i| {
            if x[i] <= lo[i] && g[i] > 0.0 {
                Bound::Lower
            } else if x[i] >= hi[i] && g[i] < 0.0 {
                Bound::Upper
            } else {
                Bound::Free
            }
        })
        .collect()
}

fn project(x: &DVector<f64>, lo: &[f64], hi: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len(), (0..x.len()).map(|i| x[i].clamp(lo[i], hi[i])))
}

/// Relative change of `f` treated as rounding noise. Objectives summed over
/// many events carry noise well above machine epsilon.
const ROUNDING_BAND: f64 = 1e-12;

/// Minimises `f` over `[lo, hi]` from `x0`.
///
/// `stop(x, f, g, bounds)` decides convergence. Steps must satisfy the
/// Armijo condition; once the objective is flat to rounding, a step that
/// raises `f` by no more than rounding and shrinks the free gradient is
/// also accepted.
pub fn minimize(
    f: &mut Objective<'_>,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    h0: Option<DMatrix<f64>>,
    settings: &Settings,
    stop: &dyn Fn(&DVector<f64>, f64, &DVector<f64>, &[Bound]) -> bool,
) -> Result<Outcome, LikelihoodError> {
    let n = x0.len();
    let mut x = project(&DVector::from_column_slice(x0), lo, hi);
    let (mut fx, mut g) = f(&x)?;
    let mut h = h0.clone().unwrap_or_else(|| DMatrix::identity(n, n));
    let mut history = vec![fx];
    let mut iterations = 0;
    let mut bounds = classify(&x, &g, lo, hi);
    let free_norm = |g: &DVector<f64>, b: &[Bound]| {
        (0..g.len()).filter(|&i| b[i] == Bound::Free).map(|i| g[i].abs()).fold(0.0, f64::max)
    };
    let mut converged = stop(&x, fx, &g, &bounds);
    let mut reset = false;
    while !converged && iterations < settings.max_iter {
        iterations += 1;
        let free: Vec<usize> = (0..n).filter(|&i| bounds[i] == Bound::Free).collect();
        let mut dir = DVector::zeros(n);
        for &i in &free {
            dir[i] = -free.iter().map(|&j| h[(i, j)] * g[j]).sum::<f64>();
        }
        if free.iter().map(|&i| dir[i] * g[i]).sum::<f64>() >= 0.0 {
            for &i in &free {
                dir[i] = -g[i];
            }
            h = DMatrix::identity(n, n);
        }
        let g_norm = free_norm(&g, &bounds);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..settings.max_backtracks {
            let trial = project(&(&x + step * &dir), lo, hi);
            let s = &trial - &x;
            if s.iter().all(|v| *v == 0.0) {
                break;
            }
            match f(&trial) {
                Ok((ft, gt)) if ft.is_finite() => {
                    let decrease = g.dot(&s);
                    let armijo = ft <= fx + settings.armijo * decrease;
                    let flat = ft <= fx + ROUNDING_BAND * fx.abs() && free_norm(&gt, &classify(&trial, &gt, lo, hi)) < g_norm;
                    if armijo || flat {
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                }
                Ok(_) | Err(LikelihoodError::ZeroIntensityAtEvent { .. }) => {}
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        let Some((xn, fxn, gn)) = accepted else {
            if reset {
                break;
            }
            h = DMatrix::identity(n, n);
            reset = true;
            continue;
        };
        reset = false;
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (rho * rho * yhy + rho) * (&s * s.transpose())
                - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        x = xn;
        fx = fxn;
        g = gn;
        history.push(fx);
        bounds = classify(&x, &g, lo, hi);
        converged = stop(&x, fx, &g, &bounds);
    }
    Ok(Outcome { x, f: fx, grad: g, iterations, converged, history, bounds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &DVector<f64>) -> Result<(f64, DVector<f64>), LikelihoodError> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = DVector::from_vec(vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ]);
        Ok((f, g))
    }

    #[test]
    fn finds_interior_minimum() {
        let stop = |_: &DVector<f64>, _: f64, g: &DVector<f64>, _: &[Bound]| g.amax() < 1e-10;
        let out = minimize(&mut rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], None, &Settings::default(), &stop)
            .unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn stops_on_active_bound() {
        let mut lin = |x: &DVector<f64>| Ok((x[0] + (x[1] - 0.3).powi(2), DVector::from_vec(vec![1.0, 2.0 * (x[1] - 0.3)])));
        let stop = |_: &DVector<f64>, _: f64, g: &DVector<f64>, b: &[Bound]| {
            (0..2).filter(|&i| b[i] == Bound::Free).all(|i| g[i].abs() < 1e-12)
        };
        let out = minimize(&mut lin, &[0.5, 0.9], &[0.0, 0.0], &[1.0, 1.0], None, &Settings::default(), &stop).unwrap();
        assert!(out.converged);
        assert_eq!(out.x[0], 0.0);
        assert_eq!(out.bounds, vec![Bound::Lower, Bound::Free]);
        assert!((out.x[1] - 0.3).abs() < 1e-12);
    }
}
