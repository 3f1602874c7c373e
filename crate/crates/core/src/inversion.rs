//! Exact construction of pseudomode parameters from a scalar exponential fit.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bathmodel::{ExpFit, PseudomodeBath};
use crate::error::{Error, Result};
use crate::forward::decompose_terms;
use crate::linalg::{c64, eigh, hermitize, sqrt_psd, CMatrix, CVector};
use crate::neldermead::NelderMead;
use crate::tolerance::Tolerances;

/// The free choices of the inversion. `None` fields take their defaults:
/// `u` all ones, `a12 = −‖v‖`, `b` the identity.
#[derive(Clone, Debug, Default)]
pub struct InversionChoices {
    pub u: Option<CVector>,
    pub a12: Option<Complex64>,
    pub b: Option<CMatrix>,
    /// Two-mode shortcut: with `u = (1, 1)`, `S†S = [[α₁+a′, −iβ−a′], [iβ−a′, α₂+a′]]`.
    pub a_prime: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InversionDiagnostics {
    pub min_gamma: f64,
    /// Largest `|κ_in − κ_out|` relative to `Σ|κ|`.
    pub kappa_error: f64,
    /// Largest exponent mismatch relative to the exponent scale.
    pub exponent_error: f64,
    pub positive: bool,
    pub collinear: bool,
    /// Largest off-diagonal entry of `−(W + W†)` after rotation, relative to its norm.
    pub gamma_offdiag: f64,
    /// Hermiticity defect of `(W† − W)/2i` before symmetrization, relative to its norm.
    pub lambda_defect: f64,
}

#[derive(Clone, Debug)]
pub struct InversionResult {
    pub bath: PseudomodeBath,
    /// Hermitian square root of the assembled `S†S`.
    pub s: CMatrix,
    pub diagnostics: InversionDiagnostics,
}

fn check_fit(fit: &ExpFit, tol: &Tolerances) -> Result<Vec<(Complex64, Complex64)>> {
    if fit.dim != 1 {
        return Err(Error::invalid("inversion handles scalar (single-site) fits"));
    }
    if fit.terms.is_empty() {
        return Err(Error::invalid("empty fit"));
    }
    let mut out = Vec::new();
    for t in &fit.terms {
        if t.power != 0 {
            return Err(Error::invalid("inversion needs pure exponentials (power 0)"));
        }
        if !(t.gamma > 0.0) {
            return Err(Error::invalid(format!("term at eps = {} has gamma = {} <= 0", t.eps, t.gamma)));
        }
        out.push((t.kappa[(0, 0)], t.rate()));
    }
    let sum: Complex64 = out.iter().map(|p| p.0).sum();
    let mag: f64 = out.iter().map(|p| p.0.norm()).sum();
    if sum.im.abs() > 1e3 * tol.hermiticity * mag.max(1.0) {
        return Err(Error::Infeasible(format!("sum of amplitudes is not real (imaginary part {:.3e})", sum.im)));
    }
    if !(sum.re > 0.0) {
        return Err(Error::Infeasible(format!("sum of amplitudes must be positive, got {:.6e}", sum.re)));
    }
    Ok(out)
}

/// Orthonormalizes `first` followed by standard basis vectors, skipping dependent ones.
fn complete_basis(first: &[CVector], n: usize) -> (Vec<CVector>, Vec<f64>) {
    let mut basis: Vec<CVector> = Vec::new();
    let mut residuals = Vec::new();
    let push = |x: &CVector, basis: &mut Vec<CVector>| -> f64 {
        let mut r = x.clone();
        for _ in 0..2 {
            for e in basis.iter() {
                let p = e.dotc(&r);
                r -= e * p;
            }
        }
        let nr = r.norm();
        if nr > 1e-10 * x.norm() {
            basis.push(r / c64(nr, 0.0));
        }
        nr / x.norm()
    };
    for x in first {
        residuals.push(push(x, &mut basis));
    }
    for k in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = CVector::zeros(n);
        e[k] = c64(1.0, 0.0);
        push(&e, &mut basis);
    }
    (basis, residuals)
}

/// Builds `(Λ, Γ, ζ)` with `ζ†e^{Wt}ζ = Σ κ_k e^{(−iε_k − γ_k/2)t}`.
pub fn invert(fit: &ExpFit, choices: &InversionChoices) -> Result<InversionResult> {
    invert_with(fit, choices, &Tolerances::default())
}

pub fn invert_with(fit: &ExpFit, choices: &InversionChoices, tol: &Tolerances) -> Result<InversionResult> {
    let terms = check_fit(fit, tol)?;
    let n = terms.len();
    let kappa: Vec<Complex64> = terms.iter().map(|t| t.0).collect();
    let m = CMatrix::from_fn(n, n, |i, j| if i == j { terms[i].1 } else { c64(0.0, 0.0) });

    let (u, sts, collinear) = if let Some(ap) = choices.a_prime {
        if n != 2 {
            return Err(Error::invalid("a_prime applies to two-mode fits only"));
        }
        if choices.u.is_some() || choices.a12.is_some() || choices.b.is_some() {
            return Err(Error::invalid("a_prime fixes u = (1, 1); do not combine it with u, a12 or b"));
        }
        let (a1, a2, beta) = (kappa[0].re, kappa[1].re, kappa[0].im);
        let sts = CMatrix::from_row_slice(
            2,
            2,
            &[c64(a1 + ap, 0.0), c64(-ap, -beta), c64(-ap, beta), c64(a2 + ap, 0.0)],
        );
        let det = ap * (a1 + a2) + a1 * a2 - beta * beta;
        if !(a1 + ap > 0.0 && a2 + ap > 0.0 && det > 0.0) {
            return Err(Error::Infeasible(format!(
                "S†S > 0 needs a' > max(-alpha1, -alpha2) and det = a'(alpha1+alpha2) + alpha1*alpha2 - beta^2 > 0 (got {det:.6e})"
            )));
        }
        (CVector::from_element(2, c64(1.0, 0.0)), sts, false)
    } else {
        let u = choices.u.clone().unwrap_or_else(|| CVector::from_element(n, c64(1.0, 0.0)));
        if u.len() != n {
            return Err(Error::invalid(format!("u has length {} but the fit has {n} terms", u.len())));
        }
        if let Some(k) = u.iter().position(|z| z.norm() == 0.0 || !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid(format!("u[{k}] must be finite and nonzero")));
        }
        let v = CVector::from_fn(n, |k, _| (kappa[k] / u[k]).conj());
        let trace = u.dotc(&v);
        if !(trace.re > 0.0) {
            return Err(Error::Infeasible(format!("u†v = {trace} must be positive")));
        }
        let (basis, resid) = complete_basis(&[v.clone(), u.clone()], n);
        let collinear = n == 1 || resid[1] <= 1e-10;
        let vn = v.norm();
        let u1 = basis[0].dotc(&u).re;
        let a_size = if collinear { 1 } else { 2 };
        let mut blk = CMatrix::zeros(n, n);
        if collinear {
            blk[(0, 0)] = c64(vn / u1, 0.0);
        } else {
            let u2 = basis[1].dotc(&u).re;
            let a12 = choices.a12.unwrap_or(c64(-vn, 0.0));
            if a12.im.abs() > 1e-14 * a12.norm() {
                return Err(Error::Infeasible(format!(
                    "A22 = -conj(A12) u1/u2 must be real: A12 = {a12} must be real (u1, u2 > 0 after orthonormalization)"
                )));
            }
            let a = a12.re;
            let a11 = (vn - a * u2) / u1;
            let a22 = -a * u1 / u2;
            if !(a11 > 0.0 && a22 > 0.0 && a * a < a11 * a22) {
                return Err(Error::Infeasible(format!(
                    "|A12|^2 < A11*A22 with A11, A22 > 0 fails (A11 = {a11:.6e}, A22 = {a22:.6e}, A12 = {a:.6e}); A12 must be negative"
                )));
            }
            blk[(0, 0)] = c64(a11, 0.0);
            blk[(0, 1)] = c64(a, 0.0);
            blk[(1, 0)] = c64(a, 0.0);
            blk[(1, 1)] = c64(a22, 0.0);
        }
        let rest = n - a_size;
        let b = match &choices.b {
            None => CMatrix::identity(rest, rest),
            Some(b) if collinear && b.nrows() + 1 == rest && b.ncols() + 1 == rest => {
                let mut full = CMatrix::identity(rest, rest);
                full.view_mut((1, 1), (rest - 1, rest - 1)).copy_from(b);
                full
            }
            Some(b) if b.nrows() == rest && b.ncols() == rest => b.clone(),
            Some(b) => {
                return Err(Error::invalid(format!("B must be {rest}x{rest}, got {}x{}", b.nrows(), b.ncols())));
            }
        };
        if rest > 0 {
            if crate::linalg::hermitian_defect(&b) > tol.hermiticity * b.norm().max(1.0) {
                return Err(Error::invalid("B must be Hermitian"));
            }
            let (vals, _) = eigh(&b);
            if !(vals[0] > 0.0) {
                return Err(Error::Infeasible(format!("B must be positive definite (smallest eigenvalue {:.3e})", vals[0])));
            }
            blk.view_mut((a_size, a_size), (rest, rest)).copy_from(&b);
        }
        let ue = CMatrix::from_columns(&basis);
        (u, hermitize(&(&ue * blk * ue.adjoint())), collinear)
    };

    let (s, s_inv) = sqrt_psd(&sts, tol.sqrt_floor)?;
    let zeta_t = &s * &u;
    let w_t = &s * &m * &s_inv;
    let gamma_t = hermitize(&(-(&w_t + w_t.adjoint())));
    let (_, vecs) = eigh(&gamma_t);
    let w = vecs.adjoint() * &w_t * &vecs;
    let zeta = vecs.adjoint() * zeta_t;
    let g = -(&w + w.adjoint());
    let gnorm = g.norm().max(f64::MIN_POSITIVE);
    let gamma_offdiag = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| g[(i, j)].norm())
        .fold(0.0, f64::max)
        / gnorm;
    let raw_lambda = (w.adjoint() - &w) / c64(0.0, 2.0);
    let lambda_defect = crate::linalg::hermitian_defect(&raw_lambda) / raw_lambda.norm().max(f64::MIN_POSITIVE);
    let lambda = hermitize(&raw_lambda);
    let gamma: Vec<f64> = (0..n).map(|i| g[(i, i)].re).collect();
    let bath = PseudomodeBath::new(lambda, gamma, CMatrix::from_column_slice(n, 1, zeta.as_slice()))?;
    let (kappa_error, exponent_error) = reproduction_error(fit, &bath)?;
    let min_gamma = bath.min_gamma();
    let diagnostics = InversionDiagnostics {
        min_gamma,
        kappa_error,
        exponent_error,
        positive: min_gamma >= 0.0,
        collinear,
        gamma_offdiag,
        lambda_defect,
    };
    Ok(InversionResult { bath, s, diagnostics })
}

/// Matches the bath's kernel terms to the fit's and reports the worst mismatch.
pub fn reproduction_error(fit: &ExpFit, bath: &PseudomodeBath) -> Result<(f64, f64)> {
    let dec = decompose_terms(bath)?.fit;
    let scale_k: f64 = fit.terms.iter().map(|t| t.kappa.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    let scale_e: f64 = fit.terms.iter().map(|t| t.rate().norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut used = vec![false; dec.terms.len()];
    let (mut ek, mut ee) = (0.0f64, 0.0f64);
    for t in &fit.terms {
        let best = dec
            .terms
            .iter()
            .enumerate()
            .filter(|(k, d)| !used[*k] && d.power == t.power)
            .min_by(|a, b| (a.1.rate() - t.rate()).norm().total_cmp(&(b.1.rate() - t.rate()).norm()));
        match best {
            Some((k, d)) => {
                used[k] = true;
                ek = ek.max((&d.kappa - &t.kappa).norm() / scale_k);
                ee = ee.max((d.rate() - t.rate()).norm() / scale_e);
            }
            None => return Ok((f64::INFINITY, f64::INFINITY)),
        }
    }
    for (k, d) in dec.terms.iter().enumerate() {
        if !used[k] {
            ek = ek.max(d.kappa.norm() / scale_k);
        }
    }
    Ok((ek, ee))
}

// ---------------------------------------------------------------------------
// Two modes

#[derive(Clone, Debug, Serialize)]
pub struct TwoModeFeasibility {
    pub feasible: bool,
    /// Real roots of the rate-balance equation at `r = 1` that give `S†S > 0`.
    pub a_prime_roots: Vec<f64>,
    /// `a′ = β²/α`, which minimizes the rate splitting.
    pub witness: Option<f64>,
    /// `Γ` eigenvalues at the witness.
    pub witness_rates: Option<(f64, f64)>,
}

/// Rates `γ ± 2√(a′²+β²)|ε| / √(2a′α+α²−β²)` for the symmetric two-mode fit
/// `κ = α ± iβ`, exponents `±ε`, common `γ`.
pub fn two_mode_rates(alpha: f64, beta: f64, eps: f64, gamma: f64, a_prime: f64) -> Option<(f64, f64)> {
    let det = 2.0 * a_prime * alpha + alpha * alpha - beta * beta;
    if !(det > 0.0) || !(alpha + a_prime > 0.0) {
        return None;
    }
    let split = 2.0 * (a_prime * a_prime + beta * beta).sqrt() * eps.abs() / det.sqrt();
    Some((gamma - split, gamma + split))
}

pub fn two_mode_feasibility(alpha: f64, beta: f64, eps: f64, gamma: f64) -> TwoModeFeasibility {
    let feasible = alpha > 0.0 && gamma > 0.0 && alpha * gamma > 2.0 * (beta * eps).abs();
    let mut roots = Vec::new();
    if eps != 0.0 {
        let disc = (gamma * gamma + 4.0 * eps * eps) * (alpha * alpha * gamma * gamma - 4.0 * beta * beta * eps * eps);
        if disc >= 0.0 {
            for sgn in [-1.0, 1.0] {
                let a = (alpha * gamma * gamma + sgn * disc.sqrt()) / (4.0 * eps * eps);
                if two_mode_rates(alpha, beta, eps, gamma, a).is_some() {
                    roots.push(a);
                }
            }
        }
    }
    let (witness, witness_rates) = if alpha > 0.0 {
        let a = beta * beta / alpha;
        (Some(a), two_mode_rates(alpha, beta, eps, gamma, a))
    } else {
        (None, None)
    };
    TwoModeFeasibility { feasible, a_prime_roots: roots, witness, witness_rates }
}

/// The symmetric two-mode fit `κ = α ± iβ` at `ε₁ = ε`, `ε₂ = −ε`.
pub fn symmetric_two_mode_fit(alpha: f64, beta: f64, eps: f64, gamma: f64) -> ExpFit {
    ExpFit::scalar(&[(c64(alpha, beta), eps, gamma), (c64(alpha, -beta), -eps, gamma)])
}

// ---------------------------------------------------------------------------
// Positivity search

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub budget: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { budget: 4000, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct SearchFailure {
    pub best: Option<InversionResult>,
    pub evaluations: usize,
    pub message: String,
}

impl std::fmt::Display for SearchFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)?;
        if let Some(b) = &self.best {
            write!(f, " (best min gamma {:.6e})", b.diagnostics.min_gamma)?;
        }
        Ok(())
    }
}

/// Maps a real parameter vector onto inversion choices:
/// `log|u_k|`, `arg u_k`, `log(−A12)`, then the lower-triangular factor of `B`.
pub struct ChoiceCoder {
    pub n: usize,
}

impl ChoiceCoder {
    fn b_size(&self) -> usize {
        self.n.saturating_sub(2)
    }

    pub fn len(&self) -> usize {
        let m = self.b_size();
        2 * self.n + 1 + m * m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn decode(&self, x: &[f64]) -> InversionChoices {
        let n = self.n;
        let u = CVector::from_fn(n, |k, _| Complex64::from_polar(x[k].exp(), x[n + k]));
        let a12 = c64(-x[2 * n].exp(), 0.0);
        let m = self.b_size();
        let b = if m > 0 {
            let mut l = CMatrix::zeros(m, m);
            let mut p = 2 * n + 1;
            for i in 0..m {
                l[(i, i)] = c64(x[p].exp(), 0.0);
                p += 1;
                for j in 0..i {
                    l[(i, j)] = c64(x[p], x[p + 1]);
                    p += 2;
                }
            }
            Some(&l * l.adjoint())
        } else {
            None
        };
        InversionChoices { u: Some(u), a12: Some(a12), b, a_prime: None }
    }

    /// Deterministic starting points: unit `u` and `u = √|κ|`.
    pub fn seeds(&self, fit: &ExpFit) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut a = vec![0.0; self.len()];
        let sum: f64 = fit.terms.iter().map(|t| t.kappa[(0, 0)].norm()).sum();
        a[2 * n] = (sum.sqrt()).ln();
        let mut b = a.clone();
        for (k, t) in fit.terms.iter().enumerate() {
            b[k] = 0.5 * t.kappa[(0, 0)].norm().max(1e-300).ln();
            b[n + k] = 0.5 * t.kappa[(0, 0)].arg();
        }
        vec![a, b]
    }

    pub fn random(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.len())
            .enumerate()
            .map(|(k, _)| {
                if k >= self.n && k < 2 * self.n {
                    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
                } else {
                    rng.random_range(-1.5..1.5)
                }
            })
            .collect()
    }
}

fn score(fit: &ExpFit, coder: &ChoiceCoder, x: &[f64]) -> (f64, Option<InversionResult>) {
    match invert(fit, &coder.decode(x)) {
        Ok(r) if r.diagnostics.kappa_error < 1e-6 => (-r.diagnostics.min_gamma, Some(r)),
        _ => (f64::INFINITY, None),
    }
}

/// A derivative-free method maximizing the smallest output rate over the choices.
pub trait PositivityStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn search(&self, fit: &ExpFit, opts: &SearchOptions) -> (Option<InversionResult>, usize);
}

pub struct RandomSearch;

impl PositivityStrategy for RandomSearch {
    fn name(&self) -> &'static str {
        "random"
    }

    fn search(&self, fit: &ExpFit, opts: &SearchOptions) -> (Option<InversionResult>, usize) {
        let coder = ChoiceCoder { n: fit.terms.len() };
        let seeds = coder.seeds(fit);
        let draws: Vec<Vec<f64>> = (0..opts.budget)
            .map(|k| {
                if k < seeds.len() {
                    seeds[k].clone()
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9e37_79b9).wrapping_add(k as u64));
                    coder.random(&mut rng)
                }
            })
            .collect();
        let best = draws
            .par_iter()
            .map(|x| score(fit, &coder, x))
            .filter_map(|(v, r)| r.map(|r| (v, r)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        (best.map(|b| b.1), draws.len())
    }
}

pub struct NelderMeadSearch;

impl PositivityStrategy for NelderMeadSearch {
    fn name(&self) -> &'static str {
        "nelder-mead"
    }

    fn search(&self, fit: &ExpFit, opts: &SearchOptions) -> (Option<InversionResult>, usize) {
        let coder = ChoiceCoder { n: fit.terms.len() };
        let mut starts = coder.seeds(fit);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        while starts.len() < 4 {
            starts.push(coder.random(&mut rng));
        }
        let per = (opts.budget / starts.len()).max(1);
        let runs: Vec<(f64, Option<InversionResult>, usize)> = starts
            .par_iter()
            .map(|x0| {
                let nm = NelderMead { max_evals: per, ftol: 1e-12, initial_step: 0.5, bounds: None };
                let r = nm.minimize(|x| score(fit, &coder, x).0, x0);
                let (v, best) = score(fit, &coder, &r.x);
                (v, best, r.evaluations + 1)
            })
            .collect();
        let evals = runs.iter().map(|r| r.2).sum();
        let best = runs.into_iter().filter(|r| r.1.is_some()).min_by(|a, b| a.0.total_cmp(&b.0));
        (best.and_then(|b| b.1), evals)
    }
}

pub fn positivity_registry() -> crate::registry::Registry<dyn PositivityStrategy> {
    let mut r = crate::registry::Registry::new();
    r.register("random", Box::new(RandomSearch) as Box<dyn PositivityStrategy>);
    r.register("nelder-mead", Box::new(NelderMeadSearch));
    r
}

/// Searches the inversion freedom for a bath with all rates `≥ 0`.
pub fn positivity_search(
    fit: &ExpFit,
    strategy: &dyn PositivityStrategy,
    opts: &SearchOptions,
) -> std::result::Result<InversionResult, SearchFailure> {
    if let Err(e) = check_fit(fit, &Tolerances::default()) {
        return Err(SearchFailure { best: None, evaluations: 0, message: e.to_string() });
    }
    let (best, evaluations) = strategy.search(fit, opts);
    match best {
        Some(r) if r.diagnostics.min_gamma >= 0.0 => Ok(r),
        Some(r) => Err(SearchFailure {
            message: format!("no choice with all rates >= 0 within {evaluations} evaluations"),
            best: Some(r),
            evaluations,
        }),
        None => Err(SearchFailure { best: None, evaluations, message: "every candidate failed to invert".into() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::effective_spectral_density;

    #[test]
    fn single_mode() {
        let fit = ExpFit::scalar(&[(c64(2.0, 0.0), 1.0, 0.5)]);
        let r = invert(&fit, &InversionChoices::default()).unwrap();
        assert!((r.bath.lambda()[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-14);
        assert!((r.bath.gamma()[0] - 0.5).abs() < 1e-14);
        assert!((r.bath.zeta()[(0, 0)].norm() - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_trace() {
        let fit = ExpFit::scalar(&[(c64(1.0, 0.0), 1.0, 0.5), (c64(-2.0, 0.0), 0.0, 0.5)]);
        assert!(matches!(invert(&fit, &InversionChoices::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn rejects_zero_u_entry() {
        let fit = ExpFit::scalar(&[(c64(1.0, 0.0), 1.0, 0.5), (c64(1.0, 0.0), 0.0, 0.5)]);
        let u = CVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]);
        assert!(invert(&fit, &InversionChoices { u: Some(u), ..Default::default() }).is_err());
    }

    #[test]
    fn positive_a12_names_inequality() {
        let fit = ExpFit::scalar(&[(c64(1.0, 0.3), 1.0, 0.5), (c64(1.0, -0.3), -1.0, 0.5)]);
        let err = invert(&fit, &InversionChoices { a12: Some(c64(0.5, 0.0)), ..Default::default() }).unwrap_err();
        assert!(err.to_string().contains("A11*A22"), "{err}");
    }

    #[test]
    fn four_term_round_trip() {
        let fit = ExpFit::scalar(&[
            (c64(0.7, 0.4), -1.3, 0.6),
            (c64(0.2, -0.9), 0.4, 1.1),
            (c64(0.5, 0.3), 1.7, 0.3),
            (c64(-0.1, 0.2), 0.0, 2.0),
        ]);
        let r = invert(&fit, &InversionChoices::default()).unwrap();
        assert!(r.diagnostics.kappa_error < 1e-9, "{:?}", r.diagnostics);
        assert!(r.diagnostics.exponent_error < 1e-9);
        for t in [0.0, 0.3, 1.7, 5.0] {
            let k = crate::forward::effective_kernel(&r.bath, t)[(0, 0)];
            let want = fit.kernel(t)[(0, 0)];
            assert!((k - want).norm() < 1e-10 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn gauge_choices_agree_on_density() {
        let fit = ExpFit::scalar(&[(c64(0.7, 0.4), -1.3, 0.6), (c64(0.2, -0.4), 0.4, 1.1), (c64(0.5, 0.0), 1.7, 0.3)]);
        let a = invert(&fit, &InversionChoices::default()).unwrap();
        let u = CVector::from_vec(vec![c64(0.3, 1.0), c64(2.0, -0.5), c64(-1.0, 0.2)]);
        let b = invert(&fit, &InversionChoices { u: Some(u), a12: Some(c64(-0.2, 0.0)), b: None, a_prime: None }).unwrap();
        for w in [-2.0, -0.5, 0.0, 0.9, 3.0] {
            let ja = effective_spectral_density(&a.bath, w).unwrap()[(0, 0)];
            let jb = effective_spectral_density(&b.bath, w).unwrap()[(0, 0)];
            assert!((ja - jb).abs() < 1e-9 * (1.0 + ja.abs()));
        }
    }

    #[test]
    fn two_mode_rates_match_closed_form() {
        let (alpha, beta, eps, gamma) = (1.0, 0.1, 1.0, 1.0);
        let fit = symmetric_two_mode_fit(alpha, beta, eps, gamma);
        for ap in [0.05, 0.3, 1.0, 4.0] {
            let r = invert(&fit, &InversionChoices { a_prime: Some(ap), ..Default::default() }).unwrap();
            let mut g = r.bath.gamma().to_vec();
            g.sort_by(f64::total_cmp);
            let (lo, hi) = two_mode_rates(alpha, beta, eps, gamma, ap).unwrap();
            assert!((g[0] - lo).abs() < 1e-10 && (g[1] - hi).abs() < 1e-10, "{g:?} vs {lo} {hi}");
            assert!(r.diagnostics.kappa_error < 1e-10);
        }
    }

    #[test]
    fn two_mode_predicate_examples() {
        assert!(two_mode_feasibility(1.0, 0.4, 1.0, 1.0).feasible);
        assert!(!two_mode_feasibility(1.0, 0.6, 1.0, 1.0).feasible);
        let f = two_mode_feasibility(1.0, 0.4, 1.0, 1.0);
        assert!(!f.a_prime_roots.is_empty());
        for &a in &f.a_prime_roots {
            let (lo, _) = two_mode_rates(1.0, 0.4, 1.0, 1.0, a).unwrap();
            assert!(lo.abs() < 1e-12);
        }
        let (lo, hi) = f.witness_rates.unwrap();
        assert!((lo - 0.2).abs() < 1e-12 && (hi - 1.8).abs() < 1e-12);
    }

    #[test]
    fn search_finds_physical_bath_for_diagonal_fit() {
        let fit = ExpFit::scalar(&[(c64(0.4, 0.0), -1.0, 0.5), (c64(0.9, 0.0), 0.3, 0.2), (c64(0.2, 0.0), 1.2, 0.8)]);
        let r = positivity_search(&fit, &NelderMeadSearch, &SearchOptions::default()).unwrap();
        assert!(r.diagnostics.min_gamma >= 0.0);
    }

    #[test]
    fn search_agrees_with_two_mode_predicate() {
        let ok = symmetric_two_mode_fit(1.0, 0.4, 1.0, 1.0);
        let r = positivity_search(&ok, &NelderMeadSearch, &SearchOptions::default()).unwrap();
        assert!(r.diagnostics.min_gamma >= 0.0);
        let bad = symmetric_two_mode_fit(1.0, 0.6, 1.0, 1.0);
        let opts = SearchOptions { budget: 2000, seed: 3 };
        for s in [&RandomSearch as &dyn PositivityStrategy, &NelderMeadSearch] {
            let e = positivity_search(&bad, s, &opts).unwrap_err();
            assert!(e.best.unwrap().diagnostics.min_gamma < 0.0);
        }
    }
}
