//! Nelder-Mead simplex search on unconstrained coordinates.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop when the spread of objective values on the simplex falls below
    /// `ftol * (1 + |f_best|)` and the simplex diameter below `xtol`.
    pub ftol: f64,
    pub xtol: f64,
    /// Iteration budget shared by the first search and all restarts.
    pub max_iter: usize,
    /// Edge length of the initial simplex.
    pub step: f64,
    /// Fresh simplices built around a converged point; the search ends early
    /// once a restart improves on it by no more than the tolerance.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-8,
            xtol: f64::INFINITY,
            max_iter: 2000,
            step: 0.25,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimises `f` from `x0`. Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best = search(&mut f, x0, opts, opts.max_iter);
    for _ in 0..opts.restarts {
        if !best.converged {
            break;
        }
        let budget = opts.max_iter.saturating_sub(best.iterations);
        let again = search(&mut f, &best.x.clone(), opts, budget);
        let improved = best.f - again.f;
        let iterations = best.iterations + again.iterations;
        let settled = improved <= opts.ftol * (1.0 + best.f.abs());
        if again.f <= best.f {
            best = Minimum { iterations, ..again };
        } else {
            best.iterations = iterations;
            best.converged = again.converged;
        }
        if settled {
            break;
        }
    }
    best
}

fn search<F>(f: &mut F, x0: &[f64], opts: &NelderMeadOptions, max_iter: usize) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    if n == 0 {
        return Minimum {
            x: Vec::new(),
            f: eval(x0),
            iterations: 0,
            converged: true,
        };
    }

    // dimension-adaptive coefficients (Gao and Han)
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];

        let fbest = values[best];
        let spread = values[worst] - fbest;
        let diameter = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if fbest.is_finite() && spread <= opts.ftol * (1.0 + fbest.abs()) && diameter <= opts.xtol
        {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.fill(0.0);
        for &k in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[k]) {
                *c += x;
            }
        }
        for c in centroid.iter_mut() {
            *c /= nf;
        }

        let along = |coef: f64, out: &mut [f64], from: &[f64], c: &[f64]| {
            for ((o, x), c) in out.iter_mut().zip(from).zip(c) {
                *o = c + coef * (c - x);
            }
        };

        along(alpha, &mut trial, &simplex[worst], &centroid);
        let fr = eval(&trial);
        if fr < values[best] {
            along(gamma, &mut trial2, &simplex[worst], &centroid);
            let fe = eval(&trial2);
            if fe < fr {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fe;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = fr;
            continue;
        }
        let (fc, accepted) = if fr < values[worst] {
            along(alpha * rho, &mut trial2, &simplex[worst], &centroid);
            let fc = eval(&trial2);
            (fc, fc <= fr)
        } else {
            along(-rho, &mut trial2, &simplex[worst], &centroid);
            let fc = eval(&trial2);
            (fc, fc < values[worst])
        };
        if accepted {
            simplex[worst].copy_from_slice(&trial2);
            values[worst] = fc;
            continue;
        }
        let anchor = simplex[best].clone();
        for k in 0..=n {
            if k == best {
                continue;
            }
            for (x, a) in simplex[k].iter_mut().zip(&anchor) {
                *x = a + sigma * (*x - a);
            }
            values[k] = eval(&simplex[k]);
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        converged: converged && values[best].is_finite(),
    }
}
