//! Prony fitting of sampled kernels by sums of decaying exponentials.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bathmodel::{memory_kernel_with, ExpFit, ExpTerm, KernelSample, SpectralModel};
use crate::error::{Error, Result};
use crate::linalg::{c64, poly_roots, CMatrix};
use crate::neldermead::NelderMead;
use crate::tolerance::Tolerances;

/// Takagi factorization `a = U·diag(σ)·Uᵀ` of a complex symmetric matrix, σ descending.
pub fn takagi(a: &CMatrix) -> Result<(CMatrix, Vec<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid("takagi needs a square matrix"));
    }
    let scale = a.norm();
    if (a - a.transpose()).norm() > 1e-12 * scale {
        return Err(Error::invalid("takagi needs a complex symmetric matrix"));
    }
    if n == 0 {
        return Ok((CMatrix::zeros(0, 0), vec![]));
    }
    let svd = a.clone().svd(true, true);
    let (u, v_t) = (svd.u.expect("U"), svd.v_t.expect("V^T"));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = CMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    let v = CMatrix::from_fn(n, n, |r, c| v_t[(order[c], r)].conj());

    let top = sigma[0];
    let zero_cut = 1e-12 * top.max(f64::MIN_POSITIVE);
    let mut out = CMatrix::zeros(n, n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && sigma[end] > zero_cut && (sigma[start] - sigma[end]).abs() <= 1e-8 * sigma[start] {
            end += 1;
        }
        let m = end - start;
        let ub = u.columns(start, m).into_owned();
        let vb = v.columns(start, m).into_owned();
        if sigma[start] <= zero_cut {
            // Null block: conj(V) columns.
            out.columns_mut(start, m).copy_from(&vb.map(|z| z.conj()));
        } else {
            let q = ub.adjoint() * vb.map(|z| z.conj());
            let r = symmetric_unitary_root(&q)?;
            out.columns_mut(start, m).copy_from(&(ub * r));
        }
        start = end;
    }
    Ok((out, sigma))
}

/// For a symmetric unitary `q`, returns unitary `r` with `r·rᵀ = q`.
fn symmetric_unitary_root(q: &CMatrix) -> Result<CMatrix> {
    let m = q.nrows();
    if m == 1 {
        return Ok(CMatrix::from_element(1, 1, q[(0, 0)].sqrt()));
    }
    let x = DMatrix::from_fn(m, m, |i, j| 0.5 * (q[(i, j)].re + q[(j, i)].re));
    let y = DMatrix::from_fn(m, m, |i, j| 0.5 * (q[(i, j)].im + q[(j, i)].im));
    let mut best: Option<(f64, CMatrix, CMatrix)> = None;
    for c in [0.618_033_988_749_894_9, 1.414_213_562_373_095, -2.718_281_828_459_045, 0.318_309_886_183_790_7] {
        let se = SymmetricEigen::new(&x + &y * c);
        let o = se.eigenvectors.map(|v| c64(v, 0.0));
        let d = o.transpose() * q * &o;
        let off: f64 = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| d[(i, j)].norm()).sum();
        if off < 1e-9 {
            return Ok(phase_root(&o, &d));
        }
        if best.as_ref().is_none_or(|b| off < b.0) {
            best = Some((off, o, d));
        }
    }
    if let Some((off, o, d)) = best {
        if off < 1e-4 {
            return Ok(phase_root(&o, &d));
        }
    }
    Err(Error::EigenFailure("could not diagonalize degenerate Takagi block".into()))
}

fn phase_root(o: &CMatrix, d: &CMatrix) -> CMatrix {
    let m = o.nrows();
    o * CMatrix::from_fn(m, m, |i, j| if i == j { (d[(i, i)] / d[(i, i)].norm()).sqrt() } else { c64(0.0, 0.0) })
}

/// Intermediate quantities of one Prony fit.
#[derive(Clone, Debug)]
pub struct PronyWorkspace {
    pub dt: f64,
    pub n_half: usize,
    pub modes: usize,
    pub phi: Vec<Complex64>,
    pub hankel: CMatrix,
    pub takagi_values: Vec<f64>,
    pub roots: Vec<Complex64>,
}

fn vandermonde(nodes: &[Complex64], len: usize) -> CMatrix {
    CMatrix::from_fn(len, nodes.len(), |j, k| nodes[k].powu(j as u32))
}

/// Fits `modes` exponentials to the samples. Matrix-valued samples share exponents,
/// which are taken from the trace.
pub fn prony_fit(samples: &KernelSample, modes: usize) -> Result<ExpFit> {
    Ok(prony_fit_detailed(samples, modes, &Tolerances::default())?.0)
}

pub fn prony_fit_detailed(samples: &KernelSample, modes: usize, tol: &Tolerances) -> Result<(ExpFit, PronyWorkspace)> {
    let n_half = samples.n_half();
    if modes == 0 {
        return Err(Error::invalid("at least one mode is required"));
    }
    if n_half < 2 * modes + 1 {
        return Err(Error::invalid(format!(
            "N = {n_half} half-samples is too few for {modes} modes (need N >= {})",
            2 * modes + 1
        )));
    }
    let d = samples.dim();
    let values = samples.values();
    let phi: Vec<Complex64> = values.iter().map(|m| m.trace()).collect();
    let hankel = CMatrix::from_fn(n_half + 1, n_half + 1, |i, j| phi[i + j]);
    let (u, sigma) = takagi(&hankel)?;
    let coeffs: Vec<Complex64> = u.column(modes).iter().map(|z| z.conj()).collect();
    let roots = poly_roots(&coeffs)?;
    let mut stable: Vec<Complex64> =
        roots.iter().copied().filter(|w| w.norm() < 1.0 - tol.unit_circle && w.norm() > 1e-14).collect();
    if stable.len() < modes {
        return Err(Error::TooFewStableRoots { found: stable.len(), requested: modes });
    }
    // Rank-deficient Hankel matrix: signal roots are those shared by the null space.
    let rank = sigma.iter().filter(|&&x| x > 1e-12 * sigma[0]).count();
    if rank <= modes && rank + 1 < sigma.len() {
        let others: Vec<Vec<Complex64>> = (rank..sigma.len())
            .filter(|&c| c != modes)
            .take(3)
            .map(|c| u.column(c).iter().map(|z| z.conj()).collect())
            .collect();
        let shared = |w: &Complex64| {
            let scale = (0..coeffs.len()).map(|j| w.norm().powi(2 * j as i32)).sum::<f64>().sqrt();
            others.iter().all(|c| {
                let p: Complex64 = c.iter().rev().fold(c64(0.0, 0.0), |acc, z| acc * w + z);
                p.norm() <= 1e-8 * scale
            })
        };
        if !stable.iter().any(shared) {
            return Err(Error::TooFewStableRoots { found: 0, requested: modes });
        }
    }
    stable.sort_by(|a, b| b.norm().total_cmp(&a.norm()));

    let len = values.len();
    let rhs = CMatrix::from_fn(len, d * d, |j, e| values[j][(e / d, e % d)]);
    if stable.len() > modes {
        // Rank candidates by their share of the signal and keep the strongest.
        let v = vandermonde(&stable, len);
        let amps = v.clone().svd(true, true).solve(&rhs, 1e-12).map_err(|e| Error::RankDeficient(e.into()))?;
        let mut energy: Vec<(usize, f64)> = (0..stable.len())
            .map(|k| {
                let a2: f64 = amps.row(k).iter().map(|z| z.norm_sqr()).sum();
                (k, a2 * v.column(k).norm_squared())
            })
            .collect();
        energy.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut keep: Vec<usize> = energy.iter().take(modes).map(|e| e.0).collect();
        keep.sort_unstable();
        stable = keep.into_iter().map(|k| stable[k]).collect();
    }
    let v = vandermonde(&stable, len);
    let svd = v.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        return Err(Error::RankDeficient(format!(
            "Vandermonde matrix condition {:.3e} for the selected roots",
            smax / smin
        )));
    }
    let amps = svd.solve(&rhs, 0.0).map_err(|e| Error::RankDeficient(e.into()))?;
    let resid = (&v * &amps - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    let dt = samples.dt();
    let mut terms: Vec<ExpTerm> = stable
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let s = w.ln() / dt;
            let kappa = CMatrix::from_fn(d, d, |i, j| amps[(k, i * d + j)]);
            ExpTerm { kappa, eps: -s.im, gamma: -2.0 * s.re, power: 0 }
        })
        .collect();
    terms.sort_by(|a, b| a.eps.total_cmp(&b.eps).then(a.gamma.total_cmp(&b.gamma)));
    let fit = ExpFit { dim: d, terms, residual: Some(resid) };
    let ws = PronyWorkspace { dt, n_half, modes, phi, hankel, takagi_values: sigma, roots };
    Ok((fit, ws))
}

// ---------------------------------------------------------------------------
// Window search

/// A sampling window `[0, t_c]` with `2·n_half + 1` samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WindowCandidate {
    pub t_c: f64,
    pub n_half: usize,
}

pub fn default_window(model: &SpectralModel, modes: usize) -> WindowCandidate {
    WindowCandidate { t_c: 10.0 / model.frequency_scale(), n_half: 4 * modes }
}

/// `t_c ∈ {5, 10, 20, 40}/scale` × `N ∈ {2L+1, 4L, 8L}`.
pub fn default_window_grid(model: &SpectralModel, modes: usize) -> Vec<WindowCandidate> {
    let scale = model.frequency_scale();
    let mut out = Vec::new();
    for t in [5.0, 10.0, 20.0, 40.0] {
        for n in [2 * modes + 1, 4 * modes, 8 * modes] {
            out.push(WindowCandidate { t_c: t / scale, n_half: n });
        }
    }
    out
}

/// A denser grid for careful fits: `t_c` log-spaced over `[3, 80]/scale`.
pub fn dense_window_grid(model: &SpectralModel, modes: usize) -> Vec<WindowCandidate> {
    let scale = model.frequency_scale();
    let mut out = Vec::new();
    for i in 0..40 {
        let t = 3.0 * (80.0f64 / 3.0).powf(i as f64 / 39.0);
        for n in [2 * modes + 1, 3 * modes, 4 * modes, 6 * modes, 8 * modes, 12 * modes] {
            out.push(WindowCandidate { t_c: t / scale, n_half: n.max(2 * modes + 1) });
        }
    }
    out
}

/// Uniform scoring grid covering the model's frequency window padded by half its width.
pub fn default_score_grid(model: &SpectralModel, points: usize) -> Vec<f64> {
    let (a, b) = model.frequency_window();
    let pad = 0.25 * (b - a);
    linspace(a - pad, b + pad, points)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Trapezoidal L² distance between two spectral densities on a grid.
pub fn l2_distance<F, G>(omegas: &[f64], f: F, g: G) -> f64
where
    F: Fn(f64) -> nalgebra::DMatrix<f64>,
    G: Fn(f64) -> nalgebra::DMatrix<f64>,
{
    let sq: Vec<f64> = omegas.iter().map(|&w| (f(w) - g(w)).norm_squared()).collect();
    let mut acc = 0.0;
    for k in 1..omegas.len() {
        acc += 0.5 * (sq[k] + sq[k - 1]) * (omegas[k] - omegas[k - 1]);
    }
    acc.sqrt()
}

pub fn fit_score(fit: &ExpFit, model: &SpectralModel, omegas: &[f64]) -> f64 {
    l2_distance(omegas, |w| fit.density(w), |w| model.density(w))
}

#[derive(Clone, Debug)]
pub struct WindowChoice {
    pub fit: ExpFit,
    pub score: f64,
    pub window: WindowCandidate,
    pub rejected: Vec<String>,
}

/// Runs a Prony fit per candidate window and keeps the one whose spectral density
/// is closest (L²) to the model's on `omegas`. Fits with non-decaying terms are rejected.
pub fn optimize_window(
    model: &SpectralModel,
    modes: usize,
    grid: &[WindowCandidate],
    omegas: &[f64],
    tol: &Tolerances,
) -> Result<WindowChoice> {
    if grid.is_empty() {
        return Err(Error::invalid("empty window grid"));
    }
    let results: Vec<std::result::Result<(ExpFit, f64), String>> = grid
        .par_iter()
        .map(|cand| {
            let label = format!("t_c={:.4}, N={}", cand.t_c, cand.n_half);
            let samples = KernelSample::from_model(model, cand.t_c, cand.n_half, tol).map_err(|e| format!("{label}: {e}"))?;
            let fit = prony_fit_detailed(&samples, modes, tol).map_err(|e| format!("{label}: {e}"))?.0;
            if let Some(t) = fit.terms.iter().find(|t| !(t.gamma > 0.0)) {
                return Err(format!("{label}: non-decaying term (gamma = {:.3e})", t.gamma));
            }
            let score = fit_score(&fit, model, omegas);
            if !score.is_finite() {
                return Err(format!("{label}: non-finite score"));
            }
            Ok((fit, score))
        })
        .collect();
    let mut best: Option<(usize, ExpFit, f64)> = None;
    let mut rejected = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok((fit, score)) => {
                if best.as_ref().is_none_or(|b| score < b.2) {
                    best = Some((k, fit, score));
                }
            }
            Err(msg) => rejected.push(msg),
        }
    }
    match best {
        Some((k, fit, score)) => Ok(WindowChoice { fit, score, window: grid[k], rejected }),
        None => Err(Error::AllCandidatesRejected(rejected)),
    }
}

// ---------------------------------------------------------------------------
// Diagonal brute-force baseline

#[derive(Clone, Debug)]
pub struct BaselineFit {
    pub fit: ExpFit,
    pub score: f64,
    pub evaluations: usize,
    /// False when some start ran out of budget before converging.
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct BaselineOptions {
    pub starts: usize,
    pub evals_per_start: usize,
    pub seed: u64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions { starts: 8, evals_per_start: 40_000, seed: 0 }
    }
}

/// Fits `modes` independent Lorentzians (real positive weights `|ζ_k|²`, centers,
/// widths) by multi-start bounded Nelder–Mead on the L² error over `omegas`.
pub fn diagonal_baseline(
    model: &SpectralModel,
    modes: usize,
    omegas: &[f64],
    opts: &BaselineOptions,
) -> Result<BaselineFit> {
    if model.dim() != 1 {
        return Err(Error::invalid("the diagonal baseline fits scalar spectral densities"));
    }
    if modes == 0 || omegas.len() < 2 {
        return Err(Error::invalid("need at least one mode and two grid points"));
    }
    let target: Vec<f64> = omegas.iter().map(|&w| model.density(w)[(0, 0)]).collect();
    let (lo, hi) = model.frequency_window();
    let half = 0.5 * (hi - lo);
    let scale = model.frequency_scale();
    let weight_max = 4.0 * memory_kernel_with(model, 0.0, &Tolerances::default())?[(0, 0)].re.max(1e-300);
    let mut bounds = Vec::new();
    for _ in 0..modes {
        bounds.push((0.0, weight_max));
        bounds.push((lo - 0.5 * half, hi + 0.5 * half));
        bounds.push((1e-3 * scale, 3.0 * scale));
    }
    let objective = |x: &[f64]| -> f64 {
        let mut sq = Vec::with_capacity(omegas.len());
        for (&w, &t) in omegas.iter().zip(&target) {
            let mut v = 0.0;
            for k in 0..modes {
                let (a, e, g) = (x[3 * k], x[3 * k + 1], x[3 * k + 2]);
                v += a * g / ((w - e).powi(2) + 0.25 * g * g);
            }
            sq.push((v - t).powi(2));
        }
        let mut acc = 0.0;
        for k in 1..omegas.len() {
            acc += 0.5 * (sq[k] + sq[k - 1]) * (omegas[k] - omegas[k - 1]);
        }
        acc.sqrt()
    };
    let runs: Vec<(Vec<f64>, f64, usize, bool)> = (0..opts.starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(s as u64));
            let mut x0 = Vec::with_capacity(3 * modes);
            let spacing = (hi - lo) / modes as f64;
            for k in 0..modes {
                let center = lo + spacing * (k as f64 + rng.random_range(0.3..0.7));
                let width = spacing * rng.random_range(0.5..1.5);
                let peak = model.density(center)[(0, 0)].max(0.0);
                x0.push((0.15 * peak * width * rng.random_range(0.7..1.3)).min(weight_max));
                x0.push(center);
                x0.push(width.clamp(1e-3 * scale, 3.0 * scale));
            }
            let mut evals = 0;
            let mut best = (x0.clone(), objective(&x0));
            let mut converged = false;
            while evals < opts.evals_per_start {
                let nm = NelderMead {
                    max_evals: (opts.evals_per_start - evals).min(8000),
                    ftol: 1e-12,
                    initial_step: 0.05,
                    bounds: Some(bounds.clone()),
                };
                let r = nm.minimize(&objective, &best.0);
                evals += r.evaluations;
                let improved = r.value < best.1 * (1.0 - 1e-9);
                if r.value <= best.1 {
                    best = (r.x, r.value);
                }
                if r.converged && !improved {
                    converged = true;
                    break;
                }
            }
            (best.0, best.1, evals, converged)
        })
        .collect();
    let evaluations = runs.iter().map(|r| r.2).sum();
    let converged = runs.iter().all(|r| r.3);
    let (x, score, _, _) = runs
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one start");
    let mut terms: Vec<ExpTerm> = (0..modes)
        .map(|k| ExpTerm::scalar(c64(x[3 * k], 0.0), x[3 * k + 1], x[3 * k + 2]))
        .collect();
    terms.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let fit = ExpFit { dim: 1, terms, residual: Some(score) };
    Ok(BaselineFit { fit, score, evaluations, converged })
}

// ---------------------------------------------------------------------------
// Strategies

/// Settings shared by the fit strategies.
#[derive(Clone, Debug)]
pub struct FitContext {
    pub omegas: Vec<f64>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub dense_windows: bool,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub fit: ExpFit,
    pub score: f64,
    pub notes: Vec<String>,
}

/// A method producing an exponential-sum fit of a model's kernel.
pub trait FitStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn fit(&self, model: &SpectralModel, modes: usize, ctx: &FitContext) -> Result<FitOutcome>;
}

pub struct PronyStrategy;

impl FitStrategy for PronyStrategy {
    fn name(&self) -> &'static str {
        "prony"
    }

    fn fit(&self, model: &SpectralModel, modes: usize, ctx: &FitContext) -> Result<FitOutcome> {
        let grid = if ctx.dense_windows {
            dense_window_grid(model, modes)
        } else {
            default_window_grid(model, modes)
        };
        let choice = optimize_window(model, modes, &grid, &ctx.omegas, &ctx.tolerances)?;
        let notes = vec![
            format!("window t_c = {:.6}, N = {}", choice.window.t_c, choice.window.n_half),
            format!("{} of {} windows rejected", choice.rejected.len(), grid.len()),
        ];
        Ok(FitOutcome { fit: choice.fit, score: choice.score, notes })
    }
}

pub struct DiagonalStrategy;

impl FitStrategy for DiagonalStrategy {
    fn name(&self) -> &'static str {
        "diagonal-nm"
    }

    fn fit(&self, model: &SpectralModel, modes: usize, ctx: &FitContext) -> Result<FitOutcome> {
        let opts = BaselineOptions { seed: ctx.seed, ..Default::default() };
        let b = diagonal_baseline(model, modes, &ctx.omegas, &opts)?;
        let mut notes = vec![format!("{} objective evaluations", b.evaluations)];
        if !b.converged {
            notes.push("optimizer budget exhausted before convergence".into());
        }
        Ok(FitOutcome { fit: b.fit, score: b.score, notes })
    }
}

pub fn fit_registry() -> crate::registry::Registry<dyn FitStrategy> {
    let mut r = crate::registry::Registry::new();
    r.register("prony", Box::new(PronyStrategy) as Box<dyn FitStrategy>);
    r.register("diagonal-nm", Box::new(DiagonalStrategy));
    r
}
