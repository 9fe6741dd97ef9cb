//! Exact likelihood recursions for the exponential Hawkes model.
//!
//! For each active kernel `(α, β)` three unit-amplitude sums are carried
//! across events:
//!
//! ```text
//! E = Σ e^{-a(t-T_i)},   F = Σ (t-T_i) e^{-a(t-T_i)},   G = Σ (t-T_i)² e^{-a(t-T_i)}
//! ```
//!
//! so that `ε = cE`, `∂_a ε = -cF`, `∂²_a ε = cG`. Decay over `Δ` maps
//! `G ← e^{-aΔ}(G + 2ΔF + Δ²E)`, `F ← e^{-aΔ}(F + ΔE)`, `E ← e^{-aΔ}E`.
//! The compensator of a kernel at `T` is `(c/a)(n_β - E(T))`.

use nalgebra::{DMatrix, DVector};

use super::{
    check_dim, check_times, Derivatives, IntensityAt, IntensityModel, Interval, LikelihoodError,
    Order, Visitor, ZERO_INTENSITY,
};
use crate::events::EventStream;
use crate::models::{HawkesModel, HawkesParams, ParamBox};

struct Sums {
    e: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl Sums {
    fn new(k: usize) -> Self {
        Self { e: vec![0.0; k], f: vec![0.0; k], g: vec![0.0; k] }
    }

    fn decay(&mut self, decay_rates: &[f64], dt: f64, order: Order) {
        if dt == 0.0 {
            return;
        }
        for k in 0..self.e.len() {
            let damp = (-decay_rates[k] * dt).exp();
            if order >= Order::Hessian {
                self.g[k] = damp * (self.g[k] + dt * (2.0 * self.f[k] + dt * self.e[k]));
            }
            if order >= Order::Gradient {
                self.f[k] = damp * (self.f[k] + dt * self.e[k]);
            }
            self.e[k] *= damp;
        }
    }
}

/// Active slots grouped by row and by column.
struct Slots {
    by_row: Vec<Vec<usize>>,
    by_col: Vec<Vec<usize>>,
    c: Vec<f64>,
    a: Vec<f64>,
    row: Vec<usize>,
    col: Vec<usize>,
}

impl Slots {
    fn new(model: &HawkesModel, p: &HawkesParams) -> Self {
        let d = model.dim();
        let mut by_row = vec![Vec::new(); d];
        let mut by_col = vec![Vec::new(); d];
        let mut c = Vec::new();
        let mut a = Vec::new();
        let mut row = Vec::new();
        let mut col = Vec::new();
        for (k, &(r, cc)) in model.active_pairs().iter().enumerate() {
            by_row[r].push(k);
            by_col[cc].push(k);
            c.push(p.c()[(r, cc)]);
            a.push(p.a()[(r, cc)]);
            row.push(r);
            col.push(cc);
        }
        Self { by_row, by_col, c, a, row, col }
    }
}

impl IntensityModel for HawkesModel {
    fn dim(&self) -> usize {
        HawkesModel::dim(self)
    }

    fn n_params(&self) -> usize {
        HawkesModel::n_params(self)
    }

    fn param_names(&self) -> Vec<String> {
        HawkesModel::param_names(self)
    }

    fn default_box(&self) -> ParamBox {
        HawkesModel::default_box(self)
    }

    /// `ν_α = 0.5 N_α / T`, decays at the total event rate and amplitudes
    /// giving each row a branching ratio of one half.
    fn moment_start(&self, stream: &EventStream) -> Vec<f64> {
        let d = HawkesModel::dim(self);
        let t = stream.horizon();
        let counts = stream.counts();
        let total_rate = stream.len() as f64 / t;
        let a0 = total_rate.max(1.0);
        let per_row = |r: usize| self.active_pairs().iter().filter(|p| p.0 == r).count().max(1) as f64;
        let mut v: Vec<f64> = counts.iter().map(|&n| 0.5 * n as f64 / t).collect();
        v.extend(self.active_pairs().iter().map(|&(r, _)| 0.5 * a0 / per_row(r)));
        v.extend(self.active_pairs().iter().map(|_| a0));
        debug_assert_eq!(v.len(), d + 2 * self.active_pairs().len());
        HawkesModel::default_box(self).clamp(&v)
    }

    fn evaluate(
        &self,
        stream: &EventStream,
        theta: &[f64],
        order: Order,
    ) -> Result<Derivatives, LikelihoodError> {
        check_dim(stream, HawkesModel::dim(self))?;
        let p = self.params(theta)?;
        let d = HawkesModel::dim(self);
        let n = HawkesModel::n_params(self);
        let slots = Slots::new(self, &p);
        let k_active = slots.c.len();
        let mut sums = Sums::new(k_active);
        let mut value = 0.0;
        let mut grad = (order >= Order::Gradient).then(|| DVector::<f64>::zeros(n));
        let mut hess = (order >= Order::Hessian).then(|| DMatrix::<f64>::zeros(n, n));
        let mut g_row = vec![0.0; n];
        let mut last = 0.0;

        for (index, (t, alpha)) in stream.iter().enumerate() {
            sums.decay(&slots.a, t - last, order);
            last = t;
            let row = &slots.by_row[alpha];
            let lam = p.nu()[alpha] + row.iter().map(|&k| slots.c[k] * sums.e[k]).sum::<f64>();
            if !(lam > ZERO_INTENSITY) {
                return Err(LikelihoodError::ZeroIntensityAtEvent { index });
            }
            value += lam.ln();

            if let Some(gr) = grad.as_mut() {
                let inv = 1.0 / lam;
                let nu_i = self.nu_index(alpha);
                g_row[nu_i] = 1.0;
                for &k in row {
                    g_row[self.c_index(k)] = sums.e[k];
                    g_row[self.a_index(k)] = -slots.c[k] * sums.f[k];
                }
                let touched =
                    std::iter::once(nu_i).chain(row.iter().flat_map(|&k| [self.c_index(k), self.a_index(k)]));
                for i in touched.clone() {
                    gr[i] += g_row[i] * inv;
                }
                if let Some(h) = hess.as_mut() {
                    let inv2 = inv * inv;
                    for i in touched.clone() {
                        for j in touched.clone() {
                            h[(i, j)] -= g_row[i] * g_row[j] * inv2;
                        }
                    }
                    for &k in row {
                        let (ci, ai) = (self.c_index(k), self.a_index(k));
                        h[(ci, ai)] -= sums.f[k] * inv;
                        h[(ai, ci)] -= sums.f[k] * inv;
                        h[(ai, ai)] += slots.c[k] * sums.g[k] * inv;
                    }
                }
                for i in touched {
                    g_row[i] = 0.0;
                }
            }

            for &k in &slots.by_col[alpha] {
                sums.e[k] += 1.0;
            }
        }

        let horizon = stream.horizon();
        sums.decay(&slots.a, horizon - last, order);
        let counts = stream.counts();
        for alpha in 0..d {
            value -= p.nu()[alpha] * horizon;
            if let Some(gr) = grad.as_mut() {
                gr[self.nu_index(alpha)] -= horizon;
            }
        }
        for k in 0..k_active {
            let (c, a) = (slots.c[k], slots.a[k]);
            let rest = counts[slots.col[k]] as f64 - sums.e[k];
            value -= c / a * rest;
            if let Some(gr) = grad.as_mut() {
                let g1 = -rest / (a * a) + sums.f[k] / a;
                gr[self.c_index(k)] -= rest / a;
                gr[self.a_index(k)] -= c * g1;
                if let Some(h) = hess.as_mut() {
                    let g2 = 2.0 * rest / (a * a * a) - 2.0 * sums.f[k] / (a * a) - sums.g[k] / a;
                    let (ci, ai) = (self.c_index(k), self.a_index(k));
                    h[(ci, ai)] -= g1;
                    h[(ai, ci)] -= g1;
                    h[(ai, ai)] -= c * g2;
                }
            }
        }
        debug_assert!(slots.row.len() == k_active);
        Ok(Derivatives { value, gradient: grad, hessian: hess })
    }

    fn compensator_at(
        &self,
        stream: &EventStream,
        theta: &[f64],
        times: &[f64],
    ) -> Result<Vec<Vec<f64>>, LikelihoodError> {
        check_dim(stream, HawkesModel::dim(self))?;
        check_times(stream, times)?;
        let p = self.params(theta)?;
        let d = HawkesModel::dim(self);
        let slots = Slots::new(self, &p);
        let mut sums = Sums::new(slots.c.len());
        let mut counts = vec![0usize; d];
        let mut last = 0.0;
        let mut out = Vec::with_capacity(times.len());
        let mut events = stream.iter().peekable();
        for &q in times {
            while let Some(&(t, beta)) = events.peek() {
                if t >= q {
                    break;
                }
                sums.decay(&slots.a, t - last, Order::Value);
                last = t;
                for &k in &slots.by_col[beta] {
                    sums.e[k] += 1.0;
                }
                counts[beta] += 1;
                events.next();
            }
            let mut lam: Vec<f64> = p.nu().iter().map(|&nu| nu * q).collect();
            for k in 0..slots.c.len() {
                let e_q = sums.e[k] * (-slots.a[k] * (q - last)).exp();
                lam[slots.row[k]] += slots.c[k] / slots.a[k] * (counts[slots.col[k]] as f64 - e_q);
            }
            out.push(lam);
        }
        Ok(out)
    }

    fn scan(
        &self,
        stream: &EventStream,
        theta: &[f64],
        visit: &mut Visitor<'_>,
    ) -> Result<(), LikelihoodError> {
        check_dim(stream, HawkesModel::dim(self))?;
        let p = self.params(theta)?;
        let slots = Slots::new(self, &p);
        let mut sums = Sums::new(slots.c.len());
        let mut start = 0.0;
        let ends = stream.iter().map(|(t, m)| (t, Some(m))).chain(std::iter::once((stream.horizon(), None)));
        for (end, mark) in ends {
            {
                let view = HawkesInterval { model: self, p: &p, slots: &slots, sums: &sums, start };
                visit(&Interval { start, end, intensity: &view })?;
            }
            sums.decay(&slots.a, end - start, Order::Gradient);
            if let Some(beta) = mark {
                for &k in &slots.by_col[beta] {
                    sums.e[k] += 1.0;
                }
            }
            start = end;
        }
        Ok(())
    }
}

struct HawkesInterval<'a> {
    model: &'a HawkesModel,
    p: &'a HawkesParams,
    slots: &'a Slots,
    sums: &'a Sums,
    start: f64,
}

impl IntensityAt for HawkesInterval<'_> {
    fn eval(&self, s: f64, lambda: &mut [f64], mut grad: Option<&mut [f64]>) {
        let dt = s - self.start;
        let n = self.model.n_params();
        lambda.copy_from_slice(self.p.nu());
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
            for alpha in 0..self.model.dim() {
                g[alpha * n + self.model.nu_index(alpha)] = 1.0;
            }
        }
        let sl = self.slots;
        for k in 0..sl.c.len() {
            let damp = (-sl.a[k] * dt).exp();
            let e = damp * self.sums.e[k];
            let r = sl.row[k];
            lambda[r] += sl.c[k] * e;
            if let Some(g) = grad.as_deref_mut() {
                let f = damp * (self.sums.f[k] + dt * self.sums.e[k]);
                g[r * n + self.model.c_index(k)] = e;
                g[r * n + self.model.a_index(k)] = -sl.c[k] * f;
            }
        }
    }
}
