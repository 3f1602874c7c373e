//! Effective memory kernels and spectral densities of pseudomode baths, the
//! classification of `W`, and closed-form kernel term decompositions.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bathmodel::{ExpFit, ExpTerm, PseudomodeBath};
use crate::error::{Error, Result};
use crate::linalg::{
    block_components, c64, condition_number, eig, expm, identity, inverse, null_space, singular_values,
    solve, submatrix, CMatrix, RMatrix, I,
};
use crate::ode;
use crate::tolerance::Tolerances;

/// `W = −iΛ − Γ/2`.
pub fn build_w(bath: &PseudomodeBath) -> CMatrix {
    bath.w()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JordanBlock {
    pub eigenvalue: Complex64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WClass {
    Diagonal,
    /// `W = S·diag(m)·S⁻¹`.
    Diagonalizable { s: CMatrix, m: Vec<Complex64> },
    NonDiagonalizable { blocks: Vec<JordanBlock> },
}

#[derive(Clone, Debug)]
pub struct Classification {
    pub class: WClass,
    /// Largest eigenvector condition number over the coupled blocks of `W`.
    pub condition: f64,
    pub warnings: Vec<String>,
}

impl Classification {
    pub fn name(&self) -> &'static str {
        match self.class {
            WClass::Diagonal => "diagonal",
            WClass::Diagonalizable { .. } => "diagonalizable",
            WClass::NonDiagonalizable { .. } => "non-diagonalizable",
        }
    }
}

struct Cluster {
    value: Complex64,
    /// Jordan block sizes, descending.
    blocks: Vec<usize>,
    /// Columns of the component-local basis spanning this generalized eigenspace.
    columns: std::ops::Range<usize>,
}

enum Structure {
    Single(Complex64),
    Eigen { values: Vec<Complex64>, s: CMatrix, s_inv: CMatrix },
    Defective { clusters: Vec<Cluster>, s: CMatrix, s_inv: CMatrix },
}

struct Component {
    idx: Vec<usize>,
    w: CMatrix,
    structure: Structure,
    condition: f64,
}

fn cluster_eigenvalues(values: &[Complex64], radius: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() <= radius {
                let (a, b) = (label[i], label[j]);
                for l in label.iter_mut() {
                    if *l == b {
                        *l = a;
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut seen: Vec<usize> = Vec::new();
    for i in 0..n {
        match seen.iter().position(|&l| l == label[i]) {
            Some(g) => groups[g].push(i),
            None => {
                seen.push(label[i]);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Jordan block sizes for an eigenvalue of algebraic multiplicity `mult`, from the
/// nullities of successive powers of `W − λ`. `None` when `W − λ` has full rank,
/// i.e. the cluster holds distinct eigenvalues at this resolution.
fn jordan_sizes(w: &CMatrix, lambda: Complex64, mult: usize, tol: &Tolerances) -> Option<Vec<usize>> {
    let n = w.nrows();
    let a = w - identity(n) * lambda;
    let wn = w.norm().max(f64::MIN_POSITIVE);
    let mut power = identity(n);
    let mut nullity = vec![0usize];
    for k in 1..=mult {
        power = &power * &a;
        let cutoff = tol.jordan_rank * wn.powi(k as i32);
        let nk = singular_values(&power).iter().filter(|&&s| s <= cutoff).count().min(mult);
        let nk = nk.max(*nullity.last().unwrap());
        nullity.push(if k == mult { mult } else { nk });
        if k == 1 && nk == 0 {
            return None;
        }
    }
    // at_least[k - 1] = number of blocks of size >= k
    let mut at_least: Vec<usize> = (1..=mult).map(|k| nullity[k] - nullity[k - 1]).collect();
    for k in 1..mult {
        at_least[k] = at_least[k].min(at_least[k - 1]);
    }
    let mut sizes = Vec::new();
    for k in (1..=mult).rev() {
        let exact = at_least[k - 1] - at_least.get(k).copied().unwrap_or(0);
        sizes.extend(std::iter::repeat_n(k, exact));
    }
    if sizes.iter().sum::<usize>() != mult {
        // Inconsistent rank sequence: fall back to a single block.
        sizes = vec![mult];
    }
    Some(sizes)
}

fn analyze(w: &CMatrix, tol: &Tolerances) -> Result<Component> {
    let n = w.nrows();
    if n == 1 {
        return Ok(Component { idx: vec![], w: w.clone(), structure: Structure::Single(w[(0, 0)]), condition: 1.0 });
    }
    let e = eig(w)?;
    let cond = condition_number(&e.vectors);
    let radius = tol.eigen_cluster * w.norm();
    let mut groups = Vec::new();
    let mut defective = false;
    for g in cluster_eigenvalues(&e.values, radius) {
        let mult = g.len();
        let value = g.iter().map(|&i| e.values[i]).sum::<Complex64>() / mult as f64;
        let blocks = if mult == 1 { Some(vec![1]) } else { jordan_sizes(w, value, mult, tol) };
        defective |= blocks.as_ref().is_some_and(|b| b.iter().any(|&k| k > 1));
        groups.push((value, mult, blocks));
    }
    if !defective && cond < tol.condition_limit {
        let s_inv = inverse(&e.vectors).ok_or_else(|| Error::EigenFailure("singular eigenvector matrix".into()))?;
        return Ok(Component {
            idx: vec![],
            w: w.clone(),
            structure: Structure::Eigen { values: e.values, s: e.vectors, s_inv },
            condition: cond,
        });
    }
    let mut clusters = Vec::new();
    let mut s = CMatrix::zeros(n, n);
    let mut col = 0;
    for (value, mult, blocks) in groups {
        let blocks = blocks.unwrap_or_else(|| vec![mult]);
        let a = w - identity(n) * value;
        let mut power = identity(n);
        for _ in 0..mult {
            power = &power * &a;
        }
        let basis = null_space(&power, mult);
        for j in 0..mult {
            s.set_column(col + j, &basis.column(j));
        }
        clusters.push(Cluster { value, blocks, columns: col..col + mult });
        col += mult;
    }
    let s_inv = inverse(&s).ok_or_else(|| Error::EigenFailure("generalized eigenspaces are dependent".into()))?;
    let cond_basis = condition_number(&s);
    if clusters.iter().all(|c| c.blocks.iter().all(|&b| b == 1)) {
        let mut values = vec![c64(0.0, 0.0); n];
        for c in &clusters {
            for j in c.columns.clone() {
                values[j] = c.value;
            }
        }
        return Ok(Component {
            idx: vec![],
            w: w.clone(),
            structure: Structure::Eigen { values, s, s_inv },
            condition: cond_basis,
        });
    }
    Ok(Component { idx: vec![], w: w.clone(), structure: Structure::Defective { clusters, s, s_inv }, condition: cond })
}

fn analyze_all(w: &CMatrix, tol: &Tolerances) -> Result<Vec<Component>> {
    if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("W has non-finite entries"));
    }
    let comps = block_components(w, tol.offdiag * w.norm());
    comps
        .into_iter()
        .map(|idx| {
            let sub = submatrix(w, &idx, &idx);
            let mut c = analyze(&sub, tol)?;
            c.idx = idx;
            Ok(c)
        })
        .collect()
}

/// Classifies `W` as diagonal, diagonalizable or defective. Decoupled blocks of `W`
/// are analysed separately.
pub fn classify_w(w: &CMatrix, tol: &Tolerances) -> Result<Classification> {
    let comps = analyze_all(w, tol)?;
    Ok(classify_components(w.nrows(), &comps, tol))
}

fn classify_components(n: usize, comps: &[Component], tol: &Tolerances) -> Classification {
    let condition = comps.iter().map(|c| c.condition).fold(1.0, f64::max);
    let mut warnings = Vec::new();
    for c in comps {
        if c.idx.len() > 1 && c.condition > tol.condition_limit / 10.0 && c.condition < tol.condition_limit * 10.0 {
            warnings.push(format!(
                "eigenvector condition number {:.3e} of modes {:?} is within a factor 10 of the threshold {:.1e}",
                c.condition, c.idx, tol.condition_limit
            ));
        }
    }
    if comps.iter().all(|c| matches!(c.structure, Structure::Single(_))) {
        return Classification { class: WClass::Diagonal, condition, warnings };
    }
    if comps.iter().any(|c| matches!(c.structure, Structure::Defective { .. })) {
        let mut blocks = Vec::new();
        for c in comps {
            match &c.structure {
                Structure::Single(v) => blocks.push(JordanBlock { eigenvalue: *v, size: 1 }),
                Structure::Eigen { values, .. } => {
                    blocks.extend(values.iter().map(|&v| JordanBlock { eigenvalue: v, size: 1 }))
                }
                Structure::Defective { clusters, .. } => {
                    for cl in clusters {
                        blocks.extend(cl.blocks.iter().map(|&size| JordanBlock { eigenvalue: cl.value, size }));
                    }
                }
            }
        }
        return Classification { class: WClass::NonDiagonalizable { blocks }, condition, warnings };
    }
    let mut s = CMatrix::zeros(n, n);
    let mut m = vec![c64(0.0, 0.0); n];
    for c in comps {
        match &c.structure {
            Structure::Single(v) => {
                s[(c.idx[0], c.idx[0])] = c64(1.0, 0.0);
                m[c.idx[0]] = *v;
            }
            Structure::Eigen { values, s: sl, .. } => {
                for (a, &ia) in c.idx.iter().enumerate() {
                    m[ia] = values[a];
                    for (b, &ib) in c.idx.iter().enumerate() {
                        s[(ib, ia)] = sl[(b, a)];
                    }
                }
            }
            Structure::Defective { .. } => unreachable!(),
        }
    }
    Classification { class: WClass::Diagonalizable { s, m }, condition, warnings }
}

/// Closed-form kernel terms of a pseudomode bath, in the same schema as a fit.
#[derive(Clone, Debug)]
pub struct KernelTermDecomposition {
    pub fit: ExpFit,
    pub classification: Classification,
}

fn term(kappa: CMatrix, rate: Complex64, power: u32) -> ExpTerm {
    ExpTerm { kappa, eps: -rate.im, gamma: -2.0 * rate.re, power }
}

/// Decomposes `ζ†e^{Wt}ζ` into terms `κ t^p e^{λt}` for an arbitrary `(W, ζ)` pair.
pub fn decompose_w(w: &CMatrix, zeta: &CMatrix, tol: &Tolerances) -> Result<KernelTermDecomposition> {
    let comps = analyze_all(w, tol)?;
    let classification = classify_components(w.nrows(), &comps, tol);
    let dim = zeta.ncols();
    let cols: Vec<usize> = (0..dim).collect();
    let mut terms = Vec::new();
    for c in &comps {
        let z = submatrix(zeta, &c.idx, &cols);
        let zh = z.adjoint();
        match &c.structure {
            Structure::Single(v) => terms.push(term(&zh * &z, *v, 0)),
            Structure::Eigen { values, s, s_inv } => {
                let left = &zh * s;
                let right = s_inv * &z;
                for (k, v) in values.iter().enumerate() {
                    let kappa = left.column(k) * right.row(k);
                    terms.push(term(kappa, *v, 0));
                }
            }
            Structure::Defective { clusters, s, s_inv } => {
                let n = c.w.nrows();
                for cl in clusters {
                    let cols_c: Vec<usize> = cl.columns.clone().collect();
                    let all: Vec<usize> = (0..n).collect();
                    let proj = submatrix(s, &all, &cols_c) * submatrix(s_inv, &cols_c, &all);
                    let a = &c.w - identity(n) * cl.value;
                    let top = cl.blocks.iter().copied().max().unwrap_or(1);
                    let mut apow = proj;
                    let mut fact = 1.0;
                    for p in 0..top {
                        if p > 0 {
                            apow = &a * apow;
                            fact *= p as f64;
                        }
                        let kappa = &zh * &apow * &z / c64(fact, 0.0);
                        terms.push(term(kappa, cl.value, p as u32));
                    }
                }
            }
        }
    }
    Ok(KernelTermDecomposition { fit: ExpFit { dim, terms, residual: None }, classification })
}

pub fn decompose_terms(bath: &PseudomodeBath) -> Result<KernelTermDecomposition> {
    decompose_w(&bath.w(), bath.zeta(), &Tolerances::default())
}

pub fn spectral_density_from_terms(decomp: &KernelTermDecomposition, omega: f64) -> RMatrix {
    decomp.fit.density(omega)
}

/// `χ_eff(t)` from `(W, ζ)`: `ζ†e^{Wt}ζ` for t ≥ 0 and `(ζ†e^{−W†t}ζ)ᵀ` for t < 0.
pub fn kernel_from_w(w: &CMatrix, zeta: &CMatrix, t: f64) -> CMatrix {
    let comps = block_components(w, 1e-300);
    let dim = zeta.ncols();
    let cols: Vec<usize> = (0..dim).collect();
    let mut out = CMatrix::zeros(dim, dim);
    for idx in comps {
        let wc = submatrix(w, &idx, &idx);
        let z = submatrix(zeta, &idx, &cols);
        if t >= 0.0 {
            out += z.adjoint() * expm(&(wc * c64(t, 0.0))) * &z;
        } else {
            out += (z.adjoint() * expm(&(wc.adjoint() * c64(-t, 0.0))) * &z).transpose();
        }
    }
    out
}

pub fn effective_kernel(bath: &PseudomodeBath, t: f64) -> CMatrix {
    kernel_from_w(&bath.w(), bath.zeta(), t)
}

/// Kernel obtained by integrating `v' = Wᵀv` from identity columns.
pub fn effective_kernel_ode_oracle(bath: &PseudomodeBath, t: f64) -> Result<CMatrix> {
    if t < 0.0 {
        return Err(Error::invalid("the ODE oracle covers t >= 0"));
    }
    let w = bath.w();
    let n = w.nrows();
    let v = ode::integrate_linear(&w.transpose(), &identity(n), t, 1e-10)?;
    let z = bath.zeta();
    Ok(z.adjoint() * v.transpose() * z)
}

/// Resolvent evaluator that exploits the decoupled blocks of `W`.
pub struct Resolvent {
    blocks: Vec<(CMatrix, CMatrix)>,
    dim: usize,
}

impl Resolvent {
    pub fn new(bath: &PseudomodeBath) -> Self {
        Self::from_w(&bath.w(), bath.zeta())
    }

    pub fn from_w(w: &CMatrix, zeta: &CMatrix) -> Self {
        let dim = zeta.ncols();
        let cols: Vec<usize> = (0..dim).collect();
        let blocks = block_components(w, 1e-300)
            .into_iter()
            .map(|idx| (submatrix(w, &idx, &idx) * I, submatrix(zeta, &idx, &cols)))
            .collect();
        Resolvent { blocks, dim }
    }

    /// `ζ†(iW − ω)⁻¹ζ`.
    pub fn sandwich(&self, omega: f64) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (iw, z) in &self.blocks {
            let a = iw - identity(iw.nrows()) * c64(omega, 0.0);
            let x = if a.nrows() == 1 {
                let d = a[(0, 0)];
                if d.norm() <= 1e-14 * iw[(0, 0)].norm().max(omega.abs()).max(f64::MIN_POSITIVE) {
                    return Err(Error::SingularResolvent { omega });
                }
                z / d
            } else {
                solve(&a, z).ok_or(Error::SingularResolvent { omega })?
            };
            out += z.adjoint() * x;
        }
        Ok(out)
    }

    /// `J_eff,ij = 2 Im(ζ_i†(iW − ω)⁻¹ζ_j)`, elementwise.
    pub fn density(&self, omega: f64) -> Result<RMatrix> {
        Ok(self.sandwich(omega)?.map(|z| 2.0 * z.im))
    }

    /// Retarded self-energy `ζ†(ω − iW)⁻¹ζ`.
    pub fn self_energy(&self, omega: f64) -> Result<CMatrix> {
        Ok(-self.sandwich(omega)?)
    }
}

pub fn effective_spectral_density(bath: &PseudomodeBath, omega: f64) -> Result<RMatrix> {
    Resolvent::new(bath).density(omega)
}

/// `J_eff` on a grid, evaluated in parallel.
pub fn effective_spectral_density_grid(bath: &PseudomodeBath, omegas: &[f64]) -> Result<Vec<RMatrix>> {
    let r = Resolvent::new(bath);
    omegas.par_iter().map(|&w| r.density(w)).collect()
}

/// Two-mode chain with a doubly degenerate defective `W`
/// (`Λ = [[ε, δ], [δ, ε]]`, `Γ = diag(2η, 2η + 4δ)`), coupled to one site.
pub fn nd2_block(eps: f64, delta: f64, eta: f64, zeta1: Complex64, zeta2: Complex64) -> Result<PseudomodeBath> {
    if delta == 0.0 {
        return Err(Error::invalid("nd2 block needs a nonzero coupling"));
    }
    let lambda = CMatrix::from_row_slice(2, 2, &[c64(eps, 0.0), c64(delta, 0.0), c64(delta, 0.0), c64(eps, 0.0)]);
    let zeta = CMatrix::from_column_slice(2, 1, &[zeta1, zeta2]);
    PseudomodeBath::new(lambda, vec![2.0 * eta, 2.0 * eta + 4.0 * delta], zeta)
}

/// The two-mode chain with its coupling scaled by `1 + perturbation`, which makes
/// `W` diagonalizable for any nonzero perturbation (`ε = η = 0`).
pub fn perturbed_nd2_block(delta: f64, perturbation: f64, zeta1: Complex64, zeta2: Complex64) -> Result<PseudomodeBath> {
    let g = delta * (1.0 + perturbation);
    let lambda = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(g, 0.0), c64(g, 0.0), c64(0.0, 0.0)]);
    let zeta = CMatrix::from_column_slice(2, 1, &[zeta1, zeta2]);
    PseudomodeBath::new(lambda, vec![0.0, 4.0 * delta], zeta)
}

/// Closed-form `J_eff` of [`nd2_block`]: a Lorentzian, a squared Lorentzian and
/// a squared anti-Lorentzian sharing the width `δ + η`.
pub fn nd2_density(eps: f64, delta: f64, eta: f64, zeta1: Complex64, zeta2: Complex64, omega: f64) -> f64 {
    let g = delta + eta;
    let x = omega - eps;
    let d = g * g + x * x;
    let (a1, a2) = (zeta1.norm_sqr(), zeta2.norm_sqr());
    let cross = (zeta1 * zeta2.conj()).re;
    2.0 * (a1 + a2) * g / d + 2.0 * delta * ((a1 - a2) * (g * g - x * x) + 4.0 * g * x * cross) / (d * d)
}

/// Coupling ratio that makes the three-mode chain defective.
pub fn nd3_coupling_ratio() -> f64 {
    (0.5 * (5.0 * 5f64.sqrt() - 11.0)).sqrt()
}

/// Three-mode chain `Λ = ε + δ·[[0, x, 0], [x, 0, 1], [0, 1, 0]]`,
/// `Γ = diag(2η, 2η, 2η + 4δ)`, system coupled to the first mode only.
pub fn nd3_block(eps: f64, eta: f64, delta: f64, zeta: Complex64) -> Result<PseudomodeBath> {
    if delta == 0.0 {
        return Err(Error::invalid("nd3 block needs a nonzero coupling"));
    }
    let x = nd3_coupling_ratio();
    let r = |v: f64| c64(v, 0.0);
    let lambda = CMatrix::from_row_slice(
        3,
        3,
        &[r(eps), r(delta * x), r(0.0), r(delta * x), r(eps), r(delta), r(0.0), r(delta), r(eps)],
    );
    let zeta = CMatrix::from_column_slice(3, 1, &[zeta, c64(0.0, 0.0), c64(0.0, 0.0)]);
    PseudomodeBath::new(lambda, vec![2.0 * eta, 2.0 * eta, 2.0 * eta + 4.0 * delta], zeta)
}

/// Closed-form `J_eff` of [`nd3_block`] with `η = 0`.
pub fn nd3_density(eps: f64, delta: f64, zeta: Complex64, omega: f64) -> f64 {
    let s5 = 5f64.sqrt();
    let x2 = (omega - eps).powi(2);
    let d2 = delta * delta;
    8.0 * (5.0 * s5 - 11.0) * delta.powi(5) * zeta.norm_sqr()
        / ((7.0 - 3.0 * s5) * d2 + 2.0 * x2).powi(2)
        / (2.0 * (3.0 - s5) * d2 + x2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bath(n: usize, rng: &mut ChaCha8Rng) -> PseudomodeBath {
        let mut l = CMatrix::from_fn(n, n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        l = (&l + l.adjoint()) * c64(0.5, 0.0);
        let g = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let z = CMatrix::from_fn(n, 1, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        PseudomodeBath::new(l, g, z).unwrap()
    }

    #[test]
    fn build_w_examples() {
        let b = PseudomodeBath::diagonal(&[(0.7, 0.4, c64(1.0, 0.0))]).unwrap();
        assert_eq!(build_w(&b)[(0, 0)], c64(-0.2, -0.7));
        let b = nd2_block(0.0, 1.5, 0.0, c64(1.0, 0.0), c64(0.0, 0.0)).unwrap();
        let w = build_w(&b);
        let want = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, -1.0), c64(-2.0, 0.0)])
            * c64(1.5, 0.0);
        assert!((w - want).norm() < 1e-15);
    }

    #[test]
    fn classify_examples() {
        let tol = Tolerances::default();
        let w = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(0.0, -1.0), c64(-1.0, -2.0)]));
        assert_eq!(classify_w(&w, &tol).unwrap().class, WClass::Diagonal);
        let b = nd2_block(0.3, 1.0, 0.0, c64(1.0, 0.0), c64(0.5, 0.0)).unwrap();
        match classify_w(&b.w(), &tol).unwrap().class {
            WClass::NonDiagonalizable { blocks } => {
                assert_eq!(blocks.len(), 1);
                assert_eq!(blocks[0].size, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn perturbed_chain_is_diagonalizable_with_known_eigenvalues() {
        let (delta, e) = (0.8, 0.1);
        let b = perturbed_nd2_block(delta, e, c64(1.0, 0.0), c64(0.0, 0.0)).unwrap();
        match classify_w(&b.w(), &Tolerances::default()).unwrap().class {
            WClass::Diagonalizable { m, .. } => {
                let r = (e * (2.0 + e)).sqrt();
                for want in [c64(-delta, -delta * r), c64(-delta, delta * r)] {
                    assert!(m.iter().any(|v| (v - want).norm() < 1e-12), "{m:?}");
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kernel_examples() {
        let b = PseudomodeBath::diagonal(&[(0.0, 2.0, c64(1.0, 0.0))]).unwrap();
        assert!((effective_kernel(&b, 1.0)[(0, 0)] - c64((-1f64).exp(), 0.0)).norm() < 1e-15);
        let b = nd2_block(0.0, 1.0, 0.0, c64(1.0, 0.0), c64(0.0, 0.0)).unwrap();
        assert!((effective_kernel(&b, 1.0)[(0, 0)] - c64(2.0 * (-1f64).exp(), 0.0)).norm() < 1e-14);
        let z = b.zeta();
        assert!((effective_kernel(&b, 0.0) - z.adjoint() * z).norm() < 1e-15);
    }

    #[test]
    fn negative_times_conjugate_elementwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 4;
        let mut l = CMatrix::from_fn(n, n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        l = (&l + l.adjoint()) * c64(0.5, 0.0);
        let z = CMatrix::from_fn(n, 2, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let b = PseudomodeBath::new(l, vec![0.5, 1.0, 0.2, 0.9], z).unwrap();
        let pos = effective_kernel(&b, 1.3);
        let neg = effective_kernel(&b, -1.3);
        assert!((crate::bathmodel::kernel_symmetry_extend(&pos) - neg).norm() < 1e-12);
    }

    #[test]
    fn density_examples() {
        let b = PseudomodeBath::diagonal(&[(0.0, 2.0, c64(1.0, 0.0))]).unwrap();
        assert!((effective_spectral_density(&b, 0.0).unwrap()[(0, 0)] - 2.0).abs() < 1e-15);
        let b = nd2_block(0.4, 1.0, 0.0, c64(1.0, 0.0), c64(0.0, 0.0)).unwrap();
        assert!((effective_spectral_density(&b, 0.4).unwrap()[(0, 0)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn singular_resolvent_reports_frequency() {
        let b = PseudomodeBath::diagonal(&[(0.5, 0.0, c64(1.0, 0.0))]).unwrap();
        match effective_spectral_density(&b, 0.5) {
            Err(Error::SingularResolvent { omega }) => assert_eq!(omega, 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nd2_terms_have_known_amplitudes() {
        let (eps, delta, eta) = (0.3, 0.7, 0.2);
        let (z1, z2) = (c64(0.8, 0.3), c64(-0.4, 0.5));
        let b = nd2_block(eps, delta, eta, z1, z2).unwrap();
        let d = decompose_terms(&b).unwrap();
        assert_eq!(d.fit.terms.len(), 2);
        let t0 = d.fit.terms.iter().find(|t| t.power == 0).unwrap();
        let t1 = d.fit.terms.iter().find(|t| t.power == 1).unwrap();
        let a0 = z1.norm_sqr() + z2.norm_sqr();
        let a1 = c64(delta * (z1.norm_sqr() - z2.norm_sqr()), -2.0 * delta * (z1 * z2.conj()).re);
        assert!((t0.kappa[(0, 0)] - a0).norm() < 1e-7);
        assert!((t1.kappa[(0, 0)] - a1).norm() < 1e-7);
        assert!((t0.eps - eps).abs() < 1e-7 && (t0.gamma - 2.0 * (delta + eta)).abs() < 1e-7);
    }

    #[test]
    fn nd2_density_closed_form() {
        let (eps, delta, eta) = (-0.2, 0.9, 0.15);
        let (z1, z2) = (c64(0.6, -0.2), c64(0.3, 0.7));
        let b = nd2_block(eps, delta, eta, z1, z2).unwrap();
        for w in [-3.0, -0.2, 0.0, 0.45, 2.5] {
            let got = effective_spectral_density(&b, w).unwrap()[(0, 0)];
            assert!((got - nd2_density(eps, delta, eta, z1, z2, w)).abs() < 1e-12);
        }
        let zero = nd2_block(eps, delta, eta, c64(0.0, 0.0), c64(0.0, 0.0)).unwrap();
        assert_eq!(effective_spectral_density(&zero, 0.1).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn nd3_block_matches_closed_form_and_is_defective() {
        let (eps, delta, z) = (0.25, 1.1, c64(0.7, 0.2));
        let b = nd3_block(eps, 0.0, delta, z).unwrap();
        for x in [0.0, 0.5, -0.5, 2.0, -2.0] {
            let got = effective_spectral_density(&b, eps + x).unwrap()[(0, 0)];
            assert!((got - nd3_density(eps, delta, z, eps + x)).abs() < 1e-10, "{x}: {got}");
        }
        match classify_w(&b.w(), &Tolerances::default()).unwrap().class {
            WClass::NonDiagonalizable { blocks } => {
                assert!(blocks.iter().any(|b| b.size == 2));
                assert_eq!(blocks.iter().map(|b| b.size).sum::<usize>(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ode_oracle_agrees_with_expm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = random_bath(4, &mut rng);
        for t in [0.0, 0.4, 2.5] {
            let a = effective_kernel(&b, t);
            let o = effective_kernel_ode_oracle(&b, t).unwrap();
            assert!((a - o).norm() < 1e-8);
        }
    }

    #[test]
    fn term_sum_matches_resolvent_on_random_bath() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b = random_bath(5, &mut rng);
        let d = decompose_terms(&b).unwrap();
        for w in [-2.0, -0.3, 0.0, 0.9, 3.0] {
            let x = spectral_density_from_terms(&d, w) - effective_spectral_density(&b, w).unwrap();
            assert!(x.norm() < 1e-10);
        }
        for t in [0.0, 0.5, 3.0] {
            assert!((d.fit.kernel(t) - effective_kernel(&b, t)).norm() < 1e-10);
        }
    }

    #[test]
    fn diagonal_bath_has_pure_lorentzians() {
        let b = PseudomodeBath::diagonal(&[(0.1, 0.3, c64(0.5, 0.0)), (-0.4, 0.8, c64(-1.2, 0.0))]).unwrap();
        let d = decompose_terms(&b).unwrap();
        assert_eq!(d.classification.class, WClass::Diagonal);
        assert!(d.fit.terms.iter().all(|t| t.kappa[(0, 0)].im == 0.0 && t.power == 0));
    }
}
