//! Many-mode tilings of a spectral density by evenly spaced pseudomodes, and
//! their infinite-mode error factors.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bathmodel::{PseudomodeBath, SpectralModel};
use crate::error::{Error, Result};
use crate::forward::Resolvent;
use crate::linalg::{c64, CMatrix, RMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TilingVariant {
    Lorentzian,
    SquaredLorentzian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TilingSpec {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n: usize,
    pub variant: TilingVariant,
}

impl TilingSpec {
    pub fn new(omega_min: f64, omega_max: f64, n: usize, variant: TilingVariant) -> Result<Self> {
        let s = TilingSpec { omega_min, omega_max, n, variant };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_max > self.omega_min) || !self.omega_min.is_finite() || !self.omega_max.is_finite() {
            return Err(Error::invalid("tiling window needs omega_max > omega_min"));
        }
        match self.variant {
            TilingVariant::Lorentzian if self.n < 2 => Err(Error::invalid("Lorentzian tiling needs n >= 2")),
            TilingVariant::SquaredLorentzian if self.n < 4 || self.n % 2 != 0 => {
                Err(Error::invalid("squared-Lorentzian tiling needs an even n >= 4"))
            }
            _ => Ok(()),
        }
    }

    /// Number of pseudomode energies (blocks for the squared variant).
    pub fn centers(&self) -> usize {
        match self.variant {
            TilingVariant::Lorentzian => self.n,
            TilingVariant::SquaredLorentzian => self.n / 2,
        }
    }

    /// Distance between neighboring energies: `γ` for Lorentzian, `δ` for squared.
    pub fn spacing(&self) -> f64 {
        (self.omega_max - self.omega_min) / (self.centers() - 1) as f64
    }

    pub fn energies(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.centers()).map(|k| self.omega_min + k as f64 * h).collect()
    }

    /// Residual-bath rate of the damped modes.
    pub fn rate(&self) -> f64 {
        match self.variant {
            TilingVariant::Lorentzian => self.spacing(),
            TilingVariant::SquaredLorentzian => 4.0 * self.spacing(),
        }
    }

    pub fn eta(&self, r: f64) -> f64 {
        match self.variant {
            TilingVariant::Lorentzian => eta1(r),
            TilingVariant::SquaredLorentzian => eta2(r),
        }
    }

    /// Bound on how far the finite tiling at center `k` falls short of the
    /// infinite-mode factor for a constant density.
    pub fn truncation_bound(&self, k: usize) -> f64 {
        let m = self.centers();
        let left = k as f64;
        let right = (m - 1 - k) as f64;
        match self.variant {
            TilingVariant::Lorentzian => (1.0 / (left + 0.5) + 1.0 / (right + 0.5)) / (2.0 * PI),
            TilingVariant::SquaredLorentzian => {
                (2.0 / PI) * (1.0 / (3.0 * (left + 0.5).powi(3)) + 1.0 / (3.0 * (right + 0.5).powi(3)))
            }
        }
    }

    /// Indices of the energies whose truncation bound is below `tol`.
    pub fn interior(&self, tol: f64) -> Vec<usize> {
        (0..self.centers()).filter(|&k| self.truncation_bound(k) < tol).collect()
    }
}

/// Real column `c` with `c cᵀ = j` when `j` is positive semidefinite of rank ≤ 1.
fn rank_one_column(j: &RMatrix, omega: f64) -> Result<Vec<f64>> {
    let d = j.nrows();
    if d == 1 {
        let v = j[(0, 0)];
        if v < 0.0 {
            return Err(Error::NotFactorizable { omega, reason: format!("J = {v:.6e} is negative") });
        }
        return Ok(vec![v.sqrt()]);
    }
    let sym = (j + j.transpose()) * 0.5;
    let se = sym.symmetric_eigen();
    let scale = se.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if scale == 0.0 {
        return Ok(vec![0.0; d]);
    }
    let (top, lam) = se.eigenvalues.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    for (k, &l) in se.eigenvalues.iter().enumerate() {
        if k != top && l.abs() > 1e-10 * scale {
            return Err(Error::NotFactorizable {
                omega,
                reason: format!("J has rank > 1 (eigenvalues {:?})", se.eigenvalues.as_slice()),
            });
        }
    }
    if lam < 0.0 {
        return Err(Error::NotFactorizable { omega, reason: "J is negative definite".into() });
    }
    let mut v: Vec<f64> = se.eigenvectors.column(top).iter().copied().collect();
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(v.into_iter().map(|x| x * lam.sqrt()).collect())
}

/// Evenly spaced diagonal pseudomodes with width equal to their spacing.
pub fn diagonal_tiling(model: &SpectralModel, spec: &TilingSpec) -> Result<PseudomodeBath> {
    spec.validate()?;
    if spec.variant != TilingVariant::Lorentzian {
        return Err(Error::invalid("diagonal_tiling needs the lorentzian variant"));
    }
    let n = spec.n;
    let d = model.dim();
    let g = spec.rate();
    let eps = spec.energies();
    let mut zeta = CMatrix::zeros(n, d);
    for (k, &e) in eps.iter().enumerate() {
        let col = rank_one_column(&(model.density(e) * (g / (2.0 * PI))), e)?;
        for i in 0..d {
            zeta[(k, i)] = c64(col[i], 0.0);
        }
    }
    let lambda = CMatrix::from_fn(n, n, |i, j| if i == j { c64(eps[i], 0.0) } else { c64(0.0, 0.0) });
    PseudomodeBath::new(lambda, vec![g; n], zeta)
}

/// Two-mode blocks `Λ = [[ε, δ], [δ, ε]]`, `Γ = diag(0, 4δ)` each contributing a squared Lorentzian.
pub fn nd_tiling(model: &SpectralModel, spec: &TilingSpec) -> Result<PseudomodeBath> {
    spec.validate()?;
    if spec.variant != TilingVariant::SquaredLorentzian {
        return Err(Error::invalid("nd_tiling needs the squared_lorentzian variant"));
    }
    let n = spec.n;
    let d = model.dim();
    let delta = spec.spacing();
    let eps = spec.energies();
    let mut lambda = CMatrix::zeros(n, n);
    let mut gamma = vec![0.0; n];
    let mut zeta = CMatrix::zeros(n, d);
    for (q, &e) in eps.iter().enumerate() {
        let (a, b) = (2 * q, 2 * q + 1);
        lambda[(a, a)] = c64(e, 0.0);
        lambda[(b, b)] = c64(e, 0.0);
        lambda[(a, b)] = c64(delta, 0.0);
        lambda[(b, a)] = c64(delta, 0.0);
        gamma[b] = 4.0 * delta;
        let col = rank_one_column(&(model.density(e) * (delta / (2.0 * PI))), e)?;
        for i in 0..d {
            zeta[(a, i)] = c64(col[i], 0.0);
        }
    }
    PseudomodeBath::new(lambda, gamma, zeta)
}

/// Infinite-mode factor of the Lorentzian tiling at fractional offset `r`.
pub fn eta1(r: f64) -> f64 {
    -PI.sinh() / ((2.0 * PI * r).cos() - PI.cosh())
}

/// Infinite-mode factor of the squared-Lorentzian tiling at fractional offset `r`.
pub fn eta2(r: f64) -> f64 {
    let c = (2.0 * PI * r).cos();
    let (ch2, sh2) = ((2.0 * PI).cosh(), (2.0 * PI).sinh());
    (c * (4.0 * PI * ch2 - 2.0 * sh2) - 4.0 * PI + (4.0 * PI).sinh()) / (2.0 * (c - ch2).powi(2))
}

/// Sums `f(ℓ + r)` over `|ℓ| ≤ cutoff` smallest-first, plus the integral of `f` beyond
/// `cutoff + ½` on both sides when `tail` is given.
fn two_sided_sum(f: impl Fn(f64) -> f64, tail: Option<&dyn Fn(f64) -> f64>, r: f64, cutoff: usize) -> f64 {
    let mut acc = 0.0;
    for l in (1..=cutoff).rev() {
        acc += f(l as f64 + r) + f(l as f64 - r);
    }
    acc += f(r);
    if let Some(t) = tail {
        let edge = cutoff as f64 + 0.5;
        acc += t(edge + r) + t(edge - r);
    }
    acc
}

/// Direct summation of the series defining [`eta1`].
pub fn eta1_series(r: f64, cutoff: usize) -> f64 {
    two_sided_sum(|x| 1.0 / (x * x + 0.25), None, r, cutoff) / (2.0 * PI)
}

/// [`eta1_series`] with the analytic tail beyond the cutoff added.
pub fn eta1_series_with_tail(r: f64, cutoff: usize) -> f64 {
    let tail = |x: f64| 2.0 * (0.5f64).atan2(x);
    two_sided_sum(|x| 1.0 / (x * x + 0.25), Some(&tail), r, cutoff) / (2.0 * PI)
}

/// Direct summation of the series defining [`eta2`].
pub fn eta2_series(r: f64, cutoff: usize) -> f64 {
    two_sided_sum(|x| 1.0 / (x * x + 1.0).powi(2), None, r, cutoff) * 2.0 / PI
}

pub fn eta2_series_with_tail(r: f64, cutoff: usize) -> f64 {
    // ∫_x^∞ dy/(y²+1)² = ½[π/2 − atan x − x/(x²+1)]
    let tail = |x: f64| 0.5 * ((1.0f64).atan2(x) - x / (x * x + 1.0));
    two_sided_sum(|x| 1.0 / (x * x + 1.0).powi(2), Some(&tail), r, cutoff) * 2.0 / PI
}

/// The closed-form tiling density (sum of Lorentzians or squared Lorentzians).
pub fn tiling_density(model: &SpectralModel, spec: &TilingSpec, omega: f64) -> RMatrix {
    let d = model.dim();
    let h = spec.spacing();
    let mut out = RMatrix::zeros(d, d);
    for e in spec.energies() {
        let x = omega - e;
        let w = match spec.variant {
            TilingVariant::Lorentzian => h * h / (2.0 * PI * (x * x + 0.25 * h * h)),
            TilingVariant::SquaredLorentzian => 4.0 * h.powi(4) / (2.0 * PI * (x * x + h * h).powi(2)),
        };
        out += model.density(e) * w;
    }
    out
}

pub fn build_tiling(model: &SpectralModel, spec: &TilingSpec) -> Result<PseudomodeBath> {
    match spec.variant {
        TilingVariant::Lorentzian => diagonal_tiling(model, spec),
        TilingVariant::SquaredLorentzian => nd_tiling(model, spec),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileRow {
    pub omega: f64,
    pub j: f64,
    pub j_eff: f64,
    pub ratio: f64,
    pub eta_pred: f64,
}

/// `J_eff/J` of the tiling bath on a grid next to the infinite-mode prediction
/// `η((ω − ε₁)/spacing mod 1)`. Matrix densities are compared on their trace.
pub fn tiling_error_profile(model: &SpectralModel, spec: &TilingSpec, grid: &[f64]) -> Result<Vec<ProfileRow>> {
    let bath = build_tiling(model, spec)?;
    let res = Resolvent::new(&bath);
    let h = spec.spacing();
    grid.par_iter()
        .map(|&w| {
            let j = model.density(w).trace();
            let je = res.density(w)?.trace();
            let r = ((w - spec.omega_min) / h).rem_euclid(1.0);
            Ok(ProfileRow { omega: w, j, j_eff: je, ratio: je / j, eta_pred: spec.eta(r) })
        })
        .collect()
}

/// A tiling construction selectable by name.
pub trait TilingStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn variant(&self) -> TilingVariant;
    fn build(&self, model: &SpectralModel, spec: &TilingSpec) -> Result<PseudomodeBath>;
}

pub struct LorentzianTiling;
pub struct SquaredLorentzianTiling;

impl TilingStrategy for LorentzianTiling {
    fn name(&self) -> &'static str {
        "lorentzian"
    }
    fn variant(&self) -> TilingVariant {
        TilingVariant::Lorentzian
    }
    fn build(&self, model: &SpectralModel, spec: &TilingSpec) -> Result<PseudomodeBath> {
        diagonal_tiling(model, spec)
    }
}

impl TilingStrategy for SquaredLorentzianTiling {
    fn name(&self) -> &'static str {
        "squared-lorentzian"
    }
    fn variant(&self) -> TilingVariant {
        TilingVariant::SquaredLorentzian
    }
    fn build(&self, model: &SpectralModel, spec: &TilingSpec) -> Result<PseudomodeBath> {
        nd_tiling(model, spec)
    }
}

pub fn tiling_registry() -> crate::registry::Registry<dyn TilingStrategy> {
    let mut r = crate::registry::Registry::new();
    r.register("lorentzian", Box::new(LorentzianTiling) as Box<dyn TilingStrategy>);
    r.register("squared-lorentzian", Box::new(SquaredLorentzianTiling));
    r
}

/// Convenience: a `d × d` density `J(ω) = c cᵀ` model for multi-site tests.
pub fn rank_one_density(c: &[f64]) -> RMatrix {
    let v = nalgebra::DVector::from_column_slice(c);
    &v * v.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{classify_w, effective_spectral_density, WClass};
    use crate::Tolerances;

    #[test]
    fn two_mode_flat_tiling() {
        let model = SpectralModel::flat_window(1.0, -10.0, 10.0).unwrap();
        let spec = TilingSpec::new(0.0, 1.0, 2, TilingVariant::Lorentzian).unwrap();
        let bath = diagonal_tiling(&model, &spec).unwrap();
        assert_eq!(bath.gamma(), &[1.0, 1.0]);
        let z = (1.0 / (2.0 * PI)).sqrt();
        assert!((bath.zeta()[(0, 0)].re - z).abs() < 1e-15 && (bath.zeta()[(1, 0)].re - z).abs() < 1e-15);
    }

    #[test]
    fn eta_values() {
        assert!((eta1(0.0) - (PI / 2.0).cosh() / (PI / 2.0).sinh()).abs() < 1e-14);
        assert!((eta2(0.0) - 1.027_297).abs() < 1e-6);
        for r in [0.13, 0.5, 0.77] {
            assert!((eta1(r + 1.0) - eta1(r)).abs() < 1e-12);
            assert!((eta2(r + 1.0) - eta2(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_series_agree() {
        for r in [0.0, 0.3, 0.5] {
            assert!((eta1_series_with_tail(r, 2000) - eta1(r)).abs() < 1e-11);
            assert!((eta2_series_with_tail(r, 2000) - eta2(r)).abs() < 1e-14);
        }
    }

    #[test]
    fn bath_density_matches_closed_form() {
        let model = SpectralModel::semi_elliptical(1.0).unwrap();
        for variant in [TilingVariant::Lorentzian, TilingVariant::SquaredLorentzian] {
            let spec = TilingSpec::new(-1.0, 1.0, 40, variant).unwrap();
            let bath = build_tiling(&model, &spec).unwrap();
            assert!(bath.is_physical());
            for w in [-1.3, -0.4, 0.0, 0.71] {
                let a = effective_spectral_density(&bath, w).unwrap()[(0, 0)];
                let b = tiling_density(&model, &spec, w)[(0, 0)];
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "{variant:?} {w}: {a} {b}");
            }
        }
    }

    #[test]
    fn nd_blocks_are_defective() {
        let model = SpectralModel::semi_elliptical(1.0).unwrap();
        let spec = TilingSpec::new(-1.0, 1.0, 8, TilingVariant::SquaredLorentzian).unwrap();
        let bath = nd_tiling(&model, &spec).unwrap();
        let w = bath.w();
        for q in 0..4 {
            let blk = w.view((2 * q, 2 * q), (2, 2)).into_owned();
            let c = classify_w(&blk, &Tolerances::default()).unwrap();
            assert!(matches!(c.class, WClass::NonDiagonalizable { .. }), "block {q}: {}", c.name());
        }
    }

    #[test]
    fn zero_density_block_is_silent() {
        let model = SpectralModel::flat_window(1.0, 0.0, 1.0).unwrap();
        let spec = TilingSpec::new(-1.0, 1.0, 6, TilingVariant::SquaredLorentzian).unwrap();
        let bath = nd_tiling(&model, &spec).unwrap();
        assert_eq!(bath.zeta()[(0, 0)].norm(), 0.0);
    }

    #[test]
    fn rank_two_density_rejected() {
        let m = RMatrix::identity(2, 2);
        match rank_one_column(&m, 0.5) {
            Err(Error::NotFactorizable { omega, .. }) => assert_eq!(omega, 0.5),
            other => panic!("{other:?}"),
        }
        let c = rank_one_column(&rank_one_density(&[0.6, -0.8]), 0.0).unwrap();
        assert!((c[0] - 0.6).abs() < 1e-14 && (c[1] + 0.8).abs() < 1e-14);
    }

    #[test]
    fn invalid_specs() {
        assert!(TilingSpec::new(1.0, 0.0, 10, TilingVariant::Lorentzian).is_err());
        assert!(TilingSpec::new(0.0, 1.0, 1, TilingVariant::Lorentzian).is_err());
        assert!(TilingSpec::new(0.0, 1.0, 7, TilingVariant::SquaredLorentzian).is_err());
        assert!(TilingSpec::new(0.0, 1.0, 2, TilingVariant::SquaredLorentzian).is_err());
    }
}
