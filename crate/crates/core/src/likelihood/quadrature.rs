//! Vector-valued Gauss–Legendre quadrature with bisection refinement.

/// Nodes and weights of the 8-point Gauss–Legendre rule on `[-1, 1]`.
const NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

pub const DEFAULT_REL_TOL: f64 = 1e-9;
const MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("quadrature did not reach tolerance on ({a}, {b}]")]
pub struct QuadratureError {
    pub a: f64,
    pub b: f64,
}

/// One application of the 8-point rule; `f(s, buf)` writes the integrand.
pub fn gauss_legendre_8<F>(f: &mut F, a: f64, b: f64, out: &mut [f64], buf: &mut [f64])
where
    F: FnMut(f64, &mut [f64]),
{
    out.iter_mut().for_each(|o| *o = 0.0);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for (&x, &w) in NODES.iter().zip(&WEIGHTS) {
        for s in [mid - half * x, mid + half * x] {
            f(s, buf);
            for (o, &v) in out.iter_mut().zip(buf.iter()) {
                *o += w * v;
            }
        }
    }
    out.iter_mut().for_each(|o| *o *= half);
}

/// Integrates a vector-valued function over `[a, b]`.
///
/// The interval is bisected until the 8-point estimate on a piece and the sum
/// over its two halves agree to `rel_tol` relative to the largest component.
/// The result is *added* to `acc`.
pub fn integrate<F>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    acc: &mut [f64],
) -> Result<(), QuadratureError>
where
    F: FnMut(f64, &mut [f64]),
{
    if b <= a {
        return Ok(());
    }
    let n = acc.len();
    let mut buf = vec![0.0; n];
    let mut whole = vec![0.0; n];
    gauss_legendre_8(&mut f, a, b, &mut whole, &mut buf);
    refine(&mut f, a, b, whole, rel_tol, 0, acc, &mut buf)
}

#[allow(clippy::too_many_arguments)]
fn refine<F>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: Vec<f64>,
    rel_tol: f64,
    depth: u32,
    acc: &mut [f64],
    buf: &mut [f64],
) -> Result<(), QuadratureError>
where
    F: FnMut(f64, &mut [f64]),
{
    let n = acc.len();
    let m = 0.5 * (a + b);
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];
    gauss_legendre_8(f, a, m, &mut left, buf);
    gauss_legendre_8(f, m, b, &mut right, buf);
    let mut scale = 0.0f64;
    let mut err = 0.0f64;
    for i in 0..n {
        let halves = left[i] + right[i];
        scale = scale.max(halves.abs());
        err = err.max((halves - whole[i]).abs());
    }
    if err <= rel_tol * scale || scale == 0.0 {
        for i in 0..n {
            acc[i] += left[i] + right[i];
        }
        return Ok(());
    }
    if depth >= MAX_DEPTH || m <= a || m >= b {
        return Err(QuadratureError { a, b });
    }
    refine(f, a, m, left, rel_tol, depth + 1, acc, buf)?;
    refine(f, m, b, right, rel_tol, depth + 1, acc, buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_low_degree_polynomials() {
        let mut acc = [0.0; 2];
        integrate(|s, o| { o[0] = s.powi(7); o[1] = 1.0 }, 0.0, 2.0, 1e-12, &mut acc).unwrap();
        assert!((acc[0] - 32.0).abs() < 1e-12);
        assert!((acc[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_exponentials_reach_tolerance() {
        let mut acc = [0.0];
        integrate(|s, o| o[0] = (-3.0 * s).exp() * s, 0.0, 10.0, 1e-12, &mut acc).unwrap();
        let exact = (1.0 - (-30.0f64).exp() * 31.0) / 9.0;
        assert!((acc[0] - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn accumulates_into_existing_value() {
        let mut acc = [1.0];
        integrate(|_, o| o[0] = 1.0, 0.0, 1.0, 1e-12, &mut acc).unwrap();
        assert!((acc[0] - 2.0).abs() < 1e-15);
    }
}
