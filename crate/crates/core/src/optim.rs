//! Derivative-free minimization (Nelder–Mead).

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Reflection.
    pub alpha: f64,
    /// Expansion.
    pub gamma: f64,
    /// Contraction.
    pub rho: f64,
    /// Shrink.
    pub sigma: f64,
    /// Converged once `max f − min f` over the simplex drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Offset of the initial simplex vertices along each axis.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { alpha: 1.0, gamma: 2.0, rho: 0.5, sigma: 0.5, tolerance: 1e-8, max_iterations: 500, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Minimizes `f` from `init`. `f` may fail; the first error aborts the search.
pub fn nelder_mead<E>(
    mut f: impl FnMut(&[f64]) -> Result<f64, E>,
    init: &[f64],
    opts: &NelderMeadOptions,
) -> Result<Minimum, E> {
    let n = init.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        f(x)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(init.to_vec());
    for i in 0..n {
        let mut v = init.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values = simplex.iter().map(|v| eval(v)).collect::<Result<Vec<_>, E>>()?;
    if n == 0 {
        return Ok(Minimum { x: Vec::new(), value: values[0], iterations: 0, evaluations, converged: true });
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(core::cmp::Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if spread(&values) < opts.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|d| simplex[..n].iter().map(|v| v[d]).sum::<f64>() / n as f64).collect();
        let along = |coef: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + coef * (w - c)).collect()
        };

        let reflected = along(-opts.alpha);
        let fr = eval(&reflected)?;
        if fr < values[0] {
            let expanded = along(-opts.alpha * opts.gamma);
            let fe = eval(&expanded)?;
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        // Contract toward the better of the reflected and worst points.
        let (point, fc) = if fr < values[n] {
            let c = along(-opts.alpha * opts.rho);
            let fc = eval(&c)?;
            (c, fc)
        } else {
            let c = along(opts.rho);
            let fc = eval(&c)?;
            (c, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = point;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, v)| b + opts.sigma * (v - b)).collect();
            values[i] = eval(&shrunk)?;
            simplex[i] = shrunk;
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(core::cmp::Ordering::Equal)).unwrap_or(0);
    Ok(Minimum { x: simplex[best].clone(), value: values[best], iterations, evaluations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::convert::Infallible;

    #[test]
    fn one_dimensional_quadratic() {
        let m = nelder_mead(|x| Ok::<_, Infallible>((x[0] - 1.3).powi(2) + 0.5), &[0.0], &NelderMeadOptions::default()).unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 1.3).abs() < 1e-3);
        assert!((m.value - 0.5).abs() < 1e-8);
    }

    #[test]
    fn rosenbrock() {
        let opts = NelderMeadOptions { tolerance: 1e-14, max_iterations: 2000, ..Default::default() };
        let m = nelder_mead(
            |x| Ok::<_, Infallible>((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)),
            &[-1.2, 1.0],
            &opts,
        )
        .unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{m:?}");
    }

    #[test]
    fn errors_abort() {
        let mut calls = 0;
        let r = nelder_mead(
            |_| {
                calls += 1;
                if calls > 3 {
                    Err("boom")
                } else {
                    Ok(1.0 / calls as f64)
                }
            },
            &[0.0],
            &NelderMeadOptions::default(),
        );
        assert_eq!(r.unwrap_err(), "boom");
    }

    #[test]
    fn iteration_cap() {
        let opts = NelderMeadOptions { max_iterations: 3, tolerance: 0.0, ..Default::default() };
        let m = nelder_mead(|x| Ok::<_, Infallible>(x[0] * x[0]), &[5.0], &opts).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 3);
    }
}
