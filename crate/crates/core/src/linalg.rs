//! Dense complex linear algebra helpers built on nalgebra.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| c64(x, 0.0))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Maximum absolute column sum.
pub fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// Averages a nearly Hermitian matrix with its adjoint.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &CMatrix) -> CMatrix {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let nrm = norm1(a);
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(s);
    let a = a.map(|z| z * scale);
    let id = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let r = |x: f64| c64(x, 0.0);
    let u_inner = &a6 * (&a6 * r(B[13]) + &a4 * r(B[11]) + &a2 * r(B[9]))
        + &a6 * r(B[7])
        + &a4 * r(B[5])
        + &a2 * r(B[3])
        + &id * r(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * r(B[12]) + &a4 * r(B[10]) + &a2 * r(B[8]))
        + &a6 * r(B[6])
        + &a4 * r(B[4])
        + &a2 * r(B[2])
        + &id * r(B[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut x = q.lu().solve(&p).unwrap_or_else(|| id.clone());
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

/// Complex Schur form `a = Q T Q†`.
pub fn schur(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let s = Schur::try_new(a.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::EigenFailure("Schur iteration did not converge".into()))?;
    Ok(s.unpack())
}

/// Eigenvalues and unit-norm right eigenvectors (columns) of a general complex matrix.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: CMatrix,
}

pub fn eig(a: &CMatrix) -> Result<Eigen> {
    let n = a.nrows();
    let (q, t) = schur(a)?;
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        y[(k, k)] = c64(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut d = t[(i, i)] - lam;
            if d.norm() < small {
                d = c64(small, 0.0);
            }
            y[(i, k)] = -acc / d;
        }
    }
    let mut vectors = &q * y;
    for k in 0..n {
        let nrm = vectors.column(k).norm();
        if nrm > 0.0 {
            vectors.column_mut(k).unscale_mut(nrm);
        }
    }
    let values = (0..n).map(|k| t[(k, k)]).collect();
    Ok(Eigen { values, vectors })
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    let se = SymmetricEigen::new(hermitize(a));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vectors.set_column(col, &se.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn condition_number(a: &CMatrix) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis of the numerical null space, taken as the `dim` right singular
/// vectors with the smallest singular values.
pub fn null_space(a: &CMatrix, dim: usize) -> CMatrix {
    let n = a.ncols();
    let svd = a.clone().svd(true, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut out = CMatrix::zeros(n, dim);
    for (col, &r) in order.iter().take(dim).enumerate() {
        for i in 0..n {
            out[(i, col)] = v_t[(r, i)].conj();
        }
    }
    out
}

/// Hermitian square root of a positive-definite matrix; fails if the smallest
/// eigenvalue is not above `floor` times the largest.
pub fn sqrt_psd(a: &CMatrix, floor: f64) -> Result<(CMatrix, CMatrix)> {
    let (vals, vecs) = eigh(a);
    let max = vals.iter().copied().fold(0.0, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= floor * max {
        return Err(Error::Infeasible(format!(
            "S†S is not positive definite (eigenvalues in [{min:.3e}, {max:.3e}])"
        )));
    }
    let n = a.nrows();
    let mut root = CMatrix::zeros(n, n);
    let mut inv = CMatrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        let col = vecs.column(k);
        let outer = &col * col.adjoint();
        root += &outer * c64(lam.sqrt(), 0.0);
        inv += &outer * c64(1.0 / lam.sqrt(), 0.0);
    }
    Ok((hermitize(&root), hermitize(&inv)))
}

/// Solves `a x = b`, reporting failure when the LU factor has a negligible pivot.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    let scale = max_abs(a);
    let lu = a.clone().lu();
    let u = lu.u();
    let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
    if (0..u.nrows()).any(|i| u[(i, i)].norm() <= tiny) {
        return None;
    }
    let x = lu.solve(b)?;
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(x)
}

pub fn inverse(a: &CMatrix) -> Option<CMatrix> {
    solve(a, &identity(a.nrows()))
}

/// Roots of `Σ c_k z^k` from the eigenvalues of the companion matrix. Leading
/// coefficients that vanish relative to the largest one are dropped.
pub fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let scale = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::invalid("zero polynomial"));
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].norm() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[deg];
    let mut comp = CMatrix::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = c64(1.0, 0.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coeffs[i] / lead;
    }
    let (_, t) = schur(&comp)?;
    Ok((0..deg).map(|i| t[(i, i)]).collect())
}

/// Groups indices into connected components of the sparsity pattern of `a`,
/// ignoring entries below `tol` in magnitude.
pub fn block_components(a: &CMatrix, tol: f64) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if a[(i, j)].norm() > tol || a[(j, i)].norm() > tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

pub fn submatrix(a: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn taylor_expm(a: &CMatrix) -> CMatrix {
        let mut term = identity(a.nrows());
        let mut sum = term.clone();
        for k in 1..80 {
            term = &term * a / c64(k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    #[test]
    fn expm_matches_taylor_series_on_small_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let a = random(5, &mut rng);
            let err = (expm(&a) - taylor_expm(&a)).norm();
            assert!(err < 1e-12, "{err}");
        }
    }

    #[test]
    fn expm_handles_jordan_block() {
        let lam = c64(-0.3, 2.0);
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 0)] = lam;
        a[(1, 1)] = lam;
        a[(0, 1)] = c64(1.0, 0.0);
        let t = 7.5;
        let e = expm(&(a * c64(t, 0.0)));
        let ex = (lam * t).exp();
        assert!((e[(0, 0)] - ex).norm() < 1e-13);
        assert!((e[(0, 1)] - ex * t).norm() < 1e-12);
        assert!(e[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn expm_group_property_on_large_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(4, &mut rng) * c64(6.0, 0.0);
        let full = expm(&a);
        let half = expm(&(&a * c64(0.5, 0.0)));
        let err = (&half * &half - &full).norm() / full.norm();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn eig_reconstructs_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(6, &mut rng);
        let e = eig(&a).unwrap();
        for k in 0..6 {
            let v = e.vectors.column(k).into_owned();
            let r = &a * &v - &v * e.values[k];
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = random(5, &mut rng);
        let a = &b * b.adjoint() + identity(5);
        let (s, sinv) = sqrt_psd(&a, 1e-12).unwrap();
        assert!((&s * &s - &a).norm() < 1e-12);
        assert!((&s * &sinv - identity(5)).norm() < 1e-12);
    }

    #[test]
    fn poly_roots_of_known_cubic() {
        // (z - 1)(z + 2i)(z - 0.5) with trailing zero leading coefficient
        let r = [c64(1.0, 0.0), c64(0.0, -2.0), c64(0.5, 0.0)];
        let c = [
            -r[0] * r[1] * r[2],
            r[0] * r[1] + r[0] * r[2] + r[1] * r[2],
            -(r[0] + r[1] + r[2]),
            c64(1.0, 0.0),
            c64(0.0, 0.0),
        ];
        let mut roots = poly_roots(&c).unwrap();
        assert_eq!(roots.len(), 3);
        for want in r {
            let (pos, _) = roots
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - want).norm().total_cmp(&(b.1 - want).norm()))
                .unwrap();
            assert!((roots[pos] - want).norm() < 1e-12);
            roots.remove(pos);
        }
    }

    #[test]
    fn null_space_of_rank_deficient_matrix() {
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 1)] = c64(1.0, 0.0);
        a[(1, 2)] = c64(0.0, 2.0);
        let ns = null_space(&a, 1);
        assert!((&a * &ns).norm() < 1e-14);
        assert!((ns.column(0).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn components_split_block_diagonal() {
        let mut a = CMatrix::zeros(5, 5);
        a[(0, 3)] = c64(1.0, 0.0);
        a[(4, 1)] = c64(1.0, 0.0);
        let comps = block_components(&a, 1e-12);
        assert_eq!(comps, vec![vec![0, 3], vec![1, 4], vec![2]]);
    }

    #[test]
    fn solve_flags_singular_matrix() {
        let a = CMatrix::from_element(2, 2, c64(1.0, 0.0));
        assert!(solve(&a, &identity(2)).is_none());
    }
}
