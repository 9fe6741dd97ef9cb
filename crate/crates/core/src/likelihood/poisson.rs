use nalgebra::{DMatrix, DVector};

use super::{
    check_dim, check_times, Derivatives, IntensityAt, IntensityModel, Interval, LikelihoodError,
    Order, Visitor,
};
use crate::events::EventStream;
use crate::models::{ParamBox, PoissonModel, PoissonParams};

impl IntensityModel for PoissonModel {
    fn dim(&self) -> usize {
        PoissonModel::dim(self)
    }

    fn n_params(&self) -> usize {
        PoissonModel::dim(self)
    }

    fn param_names(&self) -> Vec<String> {
        PoissonModel::param_names(self)
    }

    fn default_box(&self) -> ParamBox {
        PoissonModel::default_box(self)
    }

    /// The empirical rates, which are also the maximiser.
    fn moment_start(&self, stream: &EventStream) -> Vec<f64> {
        let rates: Vec<f64> = stream.counts().iter().map(|&n| n as f64 / stream.horizon()).collect();
        PoissonModel::default_box(self).clamp(&rates)
    }

    fn evaluate(
        &self,
        stream: &EventStream,
        theta: &[f64],
        order: Order,
    ) -> Result<Derivatives, LikelihoodError> {
        check_dim(stream, PoissonModel::dim(self))?;
        let p = PoissonParams::new(theta.to_vec())?;
        let t = stream.horizon();
        let counts = stream.counts();
        let mut value = 0.0;
        for (alpha, &r) in p.rate().iter().enumerate() {
            value += counts[alpha] as f64 * r.ln() - r * t;
        }
        let gradient = (order >= Order::Gradient).then(|| {
            DVector::from_iterator(theta.len(), p.rate().iter().zip(&counts).map(|(&r, &n)| n as f64 / r - t))
        });
        let hessian = (order >= Order::Hessian).then(|| {
            DMatrix::from_diagonal(&DVector::from_iterator(
                theta.len(),
                p.rate().iter().zip(&counts).map(|(&r, &n)| -(n as f64) / (r * r)),
            ))
        });
        Ok(Derivatives { value, gradient, hessian })
    }

    fn compensator_at(
        &self,
        stream: &EventStream,
        theta: &[f64],
        times: &[f64],
    ) -> Result<Vec<Vec<f64>>, LikelihoodError> {
        check_dim(stream, PoissonModel::dim(self))?;
        check_times(stream, times)?;
        let p = PoissonParams::new(theta.to_vec())?;
        Ok(times.iter().map(|&q| p.rate().iter().map(|r| r * q).collect()).collect())
    }

    fn scan(
        &self,
        stream: &EventStream,
        theta: &[f64],
        visit: &mut Visitor<'_>,
    ) -> Result<(), LikelihoodError> {
        check_dim(stream, PoissonModel::dim(self))?;
        let p = PoissonParams::new(theta.to_vec())?;
        let view = Constant { rate: p.rate() };
        let mut start = 0.0;
        for end in stream.times().iter().copied().chain(std::iter::once(stream.horizon())) {
            visit(&Interval { start, end, intensity: &view })?;
            start = end;
        }
        Ok(())
    }
}

struct Constant<'a> {
    rate: &'a [f64],
}

impl IntensityAt for Constant<'_> {
    fn eval(&self, _s: f64, lambda: &mut [f64], grad: Option<&mut [f64]>) {
        lambda.copy_from_slice(self.rate);
        if let Some(g) = grad {
            let n = self.rate.len();
            g.iter_mut().for_each(|x| *x = 0.0);
            for a in 0..n {
                g[a * n + a] = 1.0;
            }
        }
    }
}
