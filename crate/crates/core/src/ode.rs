//! Dormand–Prince 5(4) integrator for linear complex matrix ODEs `Y' = A Y`.

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `Y' = a Y` from `y0` over `[0, t]` with mixed absolute/relative
/// per-step error control `tol`.
pub fn integrate_linear(a: &CMatrix, y0: &CMatrix, t: f64, tol: f64) -> Result<CMatrix> {
    if t == 0.0 {
        return Ok(y0.clone());
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Integrator(format!("end time must be finite and positive, got {t}")));
    }
    let mut y = y0.clone();
    let mut s = 0.0;
    let scale = a.norm().max(1e-300);
    let mut h = (0.1 / scale).min(t);
    let mut steps = 0usize;
    while s < t {
        steps += 1;
        if steps > 5_000_000 {
            return Err(Error::Integrator("step budget exhausted".into()));
        }
        if s + h > t {
            h = t - s;
        }
        let mut k: Vec<CMatrix> = Vec::with_capacity(7);
        for stage in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let coef = A[stage][j];
                if coef != 0.0 {
                    ys += kj * c64(h * coef, 0.0);
                }
            }
            k.push(a * ys);
        }
        let mut y5 = y.clone();
        let mut diff = CMatrix::zeros(y.nrows(), y.ncols());
        for j in 0..7 {
            if B5[j] != 0.0 {
                y5 += &k[j] * c64(h * B5[j], 0.0);
            }
            let d = B5[j] - B4[j];
            if d != 0.0 {
                diff += &k[j] * c64(h * d, 0.0);
            }
        }
        let mut err: f64 = 0.0;
        for (d, (y_old, y_new)) in diff.iter().zip(y.iter().zip(y5.iter())) {
            let sc = tol * (1.0 + y_old.norm().max(y_new.norm()));
            err = err.max(d.norm() / sc);
        }
        if !err.is_finite() {
            return Err(Error::Integrator("non-finite error estimate".into()));
        }
        if err <= 1.0 {
            s += h;
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * t {
            return Err(Error::Integrator("step size underflow".into()));
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm, identity};

    #[test]
    fn matches_matrix_exponential() {
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 0)] = c64(-0.5, 1.0);
        a[(0, 1)] = c64(0.3, 0.0);
        a[(1, 2)] = c64(0.0, -0.7);
        a[(2, 0)] = c64(0.2, 0.1);
        a[(2, 2)] = c64(-1.0, 0.0);
        let y = integrate_linear(&a, &identity(3), 4.0, 1e-11).unwrap();
        let e = expm(&(a * c64(4.0, 0.0)));
        assert!((y - e).norm() < 1e-9);
    }
}
