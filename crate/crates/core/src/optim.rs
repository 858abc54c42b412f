//! Derivative-free minimization (Nelder-Mead with one restart).

/// Stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop when every vertex lies within this distance (max-norm) of the best.
    pub tol: f64,
    /// Hard cap on objective evaluations, restarts included.
    pub max_evals: usize,
    /// Edge length of the initial simplex.
    pub step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_evals: 2000,
            step: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimize `f` from `x0`. Non-finite objective values are treated as
/// `+∞`, so the objective may signal an infeasible point by returning NaN.
///
/// After the first convergence the simplex is rebuilt around the best
/// point and the search continues once more, which guards against a
/// simplex that collapsed onto a subspace.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let n = x0.len();
    if n == 0 {
        let value = eval(x0, &mut evals);
        return Minimum {
            x: Vec::new(),
            value,
            evals,
            converged: true,
        };
    }

    let mut start = x0.to_vec();
    let mut best = Minimum {
        x: start.clone(),
        value: f64::INFINITY,
        evals: 0,
        converged: false,
    };
    for round in 0..2 {
        let (x, value, converged) = run(&mut eval, &mut evals, &start, opts);
        let improved = value < best.value;
        if value <= best.value {
            best.x = x;
            best.value = value;
        }
        best.converged = converged;
        if !converged || (round == 1 && !improved) {
            break;
        }
        start = best.x.clone();
    }
    best.evals = evals;
    best
}

fn run<E>(eval: &mut E, evals: &mut usize, x0: &[f64], opts: &NelderMeadOptions) -> (Vec<f64>, f64, bool)
where
    E: FnMut(&[f64], &mut usize) -> f64,
{
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.step;
        simplex.push(v);
    }
    let mut fs: Vec<f64> = simplex.iter().map(|v| eval(v, evals)).collect();

    loop {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        fs = idx.iter().map(|&i| fs[i]).collect();

        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if size < opts.tol {
            return (simplex[0].clone(), fs[0], true);
        }
        if *evals >= opts.max_evals {
            return (simplex[0].clone(), fs[0], false);
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(ALPHA);
        let fr = eval(&xr, evals);
        if fr < fs[0] {
            let xe = along(GAMMA);
            let fe = eval(&xe, evals);
            if fe < fr {
                simplex[n] = xe;
                fs[n] = fe;
            } else {
                simplex[n] = xr;
                fs[n] = fr;
            }
            continue;
        }
        if fr < fs[n - 1] {
            simplex[n] = xr;
            fs[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < fs[n] {
            let xc = along(RHO * ALPHA);
            let fc = eval(&xc, evals);
            (xc, fc)
        } else {
            let xc = along(-RHO);
            let fc = eval(&xc, evals);
            (xc, fc)
        };
        if fc < fs[n].min(fr) {
            simplex[n] = xc;
            fs[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            let v: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + SIGMA * (x - b))
                .collect();
            fs[i] = eval(&v, evals);
            simplex[i] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            tol: 1e-9,
            max_evals: 5000,
            step: 0.5,
        };
        let m = nelder_mead(f, &[-1.2, 1.0], &opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn quadratic_in_six_dimensions() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - i as f64).powi(2)).sum();
        let m = nelder_mead(f, &[0.0; 6], &NelderMeadOptions::default());
        assert!(m.converged, "{m:?}");
        for (i, v) in m.x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-5, "{m:?}");
        }
    }

    #[test]
    fn evaluation_cap_returns_best_so_far() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2);
        let opts = NelderMeadOptions {
            max_evals: 10,
            ..Default::default()
        };
        let m = nelder_mead(f, &[0.0], &opts);
        assert!(!m.converged);
        assert!(m.value < 9.0);
        assert!(m.evals <= 12);
    }

    #[test]
    fn nan_is_infeasible() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) };
        let m = nelder_mead(f, &[1.0], &NelderMeadOptions::default());
        assert!((m.x[0] - 0.5).abs() < 1e-5);
    }
}
