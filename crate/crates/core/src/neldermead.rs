//! Derivative-free Nelder–Mead minimizer with box constraints enforced by projection.

#[derive(Clone, Debug)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct NelderMead {
    pub max_evals: usize,
    pub ftol: f64,
    pub initial_step: f64,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { max_evals: 2000, ftol: 1e-12, initial_step: 0.1, bounds: None }
    }
}

impl NelderMead {
    fn project(&self, x: &mut [f64]) {
        if let Some(b) = &self.bounds {
            for (v, (lo, hi)) in x.iter_mut().zip(b) {
                *v = v.clamp(*lo, *hi);
            }
        }
    }

    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> NelderMeadResult {
        let n = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut start = x0.to_vec();
        self.project(&mut start);
        simplex.push(start.clone());
        for i in 0..n {
            let mut p = start.clone();
            let mut step = self.initial_step * p[i].abs().max(1.0);
            if let Some(b) = &self.bounds {
                step = step.min(0.5 * (b[i].1 - b[i].0));
                if p[i] + step > b[i].1 {
                    step = -step;
                }
            }
            p[i] += step;
            self.project(&mut p);
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();
        let mut converged = false;
        while evals < self.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();
            let spread = (values[n] - values[0]).abs();
            if spread <= self.ftol * (values[0].abs() + self.ftol) {
                converged = true;
                break;
            }
            let mut centroid = vec![0.0; n];
            for p in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v / n as f64;
                }
            }
            let along = |coef: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[n]).map(|(c, w)| c + coef * (w - c)).collect()
            };
            let mut xr = along(-1.0);
            self.project(&mut xr);
            let fr = eval(&xr, &mut evals);
            if fr < values[0] {
                let mut xe = along(-2.0);
                self.project(&mut xe);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
            } else {
                let outside = fr < values[n];
                let mut xc = if outside { along(-0.5) } else { along(0.5) };
                self.project(&mut xc);
                let fc = eval(&xc, &mut evals);
                if fc < values[n].min(fr) {
                    simplex[n] = xc;
                    values[n] = fc;
                } else {
                    let best = simplex[0].clone();
                    for i in 1..=n {
                        let mut p: Vec<f64> =
                            best.iter().zip(&simplex[i]).map(|(b, v)| b + 0.5 * (v - b)).collect();
                        self.project(&mut p);
                        values[i] = eval(&p, &mut evals);
                        simplex[i] = p;
                    }
                }
            }
        }
        let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        NelderMeadResult { x: simplex[best].clone(), value: values[best], evaluations: evals, converged }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let nm = NelderMead { max_evals: 5000, ftol: 1e-14, ..Default::default() };
        let r = nm.minimize(|x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2), &[-1.2, 1.0]);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn respects_bounds() {
        let nm = NelderMead { bounds: Some(vec![(0.5, 2.0)]), ..Default::default() };
        let r = nm.minimize(|x| x[0] * x[0], &[1.5]);
        assert!((r.x[0] - 0.5).abs() < 1e-8);
    }
}
