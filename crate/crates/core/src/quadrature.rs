//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature for vector-valued
//! complex integrands.

use std::collections::BinaryHeap;

use num_complex::Complex64;

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600239414920,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: Vec<Complex64>,
    pub error: f64,
    pub converged: bool,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<Complex64>,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rule<F>(f: &F, a: f64, b: f64, dim: usize, buf: &mut [Complex64]) -> (Vec<Complex64>, f64)
where
    F: Fn(f64, &mut [Complex64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![Complex64::new(0.0, 0.0); dim];
    let mut g = vec![Complex64::new(0.0, 0.0); dim];
    f(c, buf);
    for d in 0..dim {
        k[d] += buf[d] * WGK[10];
    }
    for j in 0..10 {
        let x = h * XGK[j];
        for pt in [c - x, c + x] {
            f(pt, buf);
            for d in 0..dim {
                k[d] += buf[d] * WGK[j];
                if j % 2 == 1 {
                    g[d] += buf[d] * WG[j / 2];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for d in 0..dim {
        k[d] *= h;
        g[d] *= h;
        err = err.max((k[d] - g[d]).norm());
    }
    (k, err)
}

/// Integrates `f` over `[points[0], points.last()]`, splitting first at every
/// interior breakpoint. `f(x, out)` writes `dim` values into `out`.
pub fn integrate<F>(
    f: F,
    points: &[f64],
    dim: usize,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> QuadResult
where
    F: Fn(f64, &mut [Complex64]),
{
    let mut buf = vec![Complex64::new(0.0, 0.0); dim];
    let mut heap = BinaryHeap::new();
    let mut total = vec![Complex64::new(0.0, 0.0); dim];
    let mut total_err = 0.0;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = rule(&f, w[0], w[1], dim, &mut buf);
        for d in 0..dim {
            total[d] += v[d];
        }
        total_err += e;
        heap.push(Segment { a: w[0], b: w[1], value: v, error: e });
    }
    let target = |total: &[Complex64]| {
        let mag = total.iter().map(|z| z.norm()).fold(0.0, f64::max);
        abs_tol.max(rel_tol * mag)
    };
    let mut converged = total_err <= target(&total);
    while !converged && heap.len() < max_intervals {
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            heap.push(seg);
            break;
        }
        let (v1, e1) = rule(&f, seg.a, mid, dim, &mut buf);
        let (v2, e2) = rule(&f, mid, seg.b, dim, &mut buf);
        for d in 0..dim {
            total[d] += v1[d] + v2[d] - seg.value[d];
        }
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        converged = total_err <= target(&total);
    }
    // Recompute from the segments to shed accumulated rounding in the running sums.
    let mut value = vec![Complex64::new(0.0, 0.0); dim];
    let mut error = 0.0;
    let intervals = heap.len();
    for seg in heap.into_vec() {
        for d in 0..dim {
            value[d] += seg.value[d];
        }
        error += seg.error;
    }
    let converged = error <= target(&value);
    QuadResult { value, error, converged, intervals }
}

/// Scalar real convenience wrapper.
pub fn integrate_real<F: Fn(f64) -> f64>(f: F, points: &[f64], abs_tol: f64, rel_tol: f64) -> (f64, f64, bool) {
    let r = integrate(|x, out| out[0] = Complex64::new(f(x), 0.0), points, 1, abs_tol, rel_tol, 4000);
    (r.value[0].re, r.error, r.converged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_high_degree_polynomials() {
        let (v, _, ok) = integrate_real(|x| x.powi(30) + 3.0 * x.powi(7), &[-1.0, 1.0], 1e-15, 0.0);
        assert!(ok);
        assert!((v - 2.0 / 31.0).abs() < 1e-15);
    }

    #[test]
    fn resolves_endpoint_square_root() {
        let (v, err, ok) = integrate_real(|x| (1.0 - x * x).max(0.0).sqrt(), &[-1.0, 1.0], 1e-13, 1e-13);
        assert!(ok, "err {err}");
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn vector_valued_oscillatory() {
        let r = integrate(
            |x, out| {
                out[0] = Complex64::new(0.0, 5.0 * x).exp();
                out[1] = Complex64::new(x.exp(), 0.0);
            },
            &[0.0, 0.5, 3.0],
            2,
            1e-13,
            1e-13,
            1000,
        );
        assert!(r.converged);
        let want0 = (Complex64::new(0.0, 15.0).exp() - 1.0) / Complex64::new(0.0, 5.0);
        assert!((r.value[0] - want0).norm() < 1e-12);
        assert!((r.value[1].re - (3f64.exp() - 1.0)).abs() < 1e-11);
    }
}
