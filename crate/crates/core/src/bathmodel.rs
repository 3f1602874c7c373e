//! Spectral densities of physical baths, their memory kernels and correlation
//! functions, exponential-sum kernels and pseudomode parameter sets.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, hermitian_defect, hermitize, CMatrix, RMatrix, I};
use crate::quadrature::integrate;
use crate::serial::{complex_matrix, complex_rows, format_number, from_complex_rows, ComplexRows};
use crate::spline::CubicSpline;
use crate::tolerance::Tolerances;

// ---------------------------------------------------------------------------
// Fermi function

/// Fermi–Dirac occupation with inverse temperature `beta` and chemical potential `mu`.
/// Infinite `beta` gives a step; infinite `mu` gives an empty or full band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FermiSpec {
    pub beta: f64,
    pub mu: f64,
}

impl FermiSpec {
    pub fn new(beta: f64, mu: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 || mu.is_nan() {
            return Err(Error::invalid(format!("invalid Fermi parameters beta={beta}, mu={mu}")));
        }
        Ok(FermiSpec { beta, mu })
    }

    /// f ≡ 0.
    pub fn empty() -> Self {
        FermiSpec { beta: f64::INFINITY, mu: f64::NEG_INFINITY }
    }

    /// f ≡ 1.
    pub fn full() -> Self {
        FermiSpec { beta: f64::INFINITY, mu: f64::INFINITY }
    }

    pub fn occupation(&self, omega: f64) -> f64 {
        if self.mu == f64::NEG_INFINITY {
            return 0.0;
        }
        if self.mu == f64::INFINITY {
            return 1.0;
        }
        let x = omega - self.mu;
        if self.beta.is_infinite() {
            return if x > 0.0 {
                0.0
            } else if x < 0.0 {
                1.0
            } else {
                0.5
            };
        }
        let y = self.beta * x;
        if y > 0.0 {
            let e = (-y).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + y.exp())
        }
    }

    /// Returns the value when the occupation does not depend on ω.
    fn constant(&self) -> Option<f64> {
        if self.mu == f64::NEG_INFINITY {
            Some(0.0)
        } else if self.mu == f64::INFINITY {
            Some(1.0)
        } else if self.beta == 0.0 {
            Some(0.5)
        } else {
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Exponential sums

/// One term `κ t^p e^{(−iε − γ/2) t}` of a kernel, `κ` a dim×dim amplitude matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    #[serde(with = "complex_matrix")]
    pub kappa: CMatrix,
    pub eps: f64,
    pub gamma: f64,
    #[serde(default)]
    pub power: u32,
}

fn factorial(p: u32) -> f64 {
    (1..=p).map(f64::from).product()
}

impl ExpTerm {
    pub fn scalar(kappa: Complex64, eps: f64, gamma: f64) -> Self {
        ExpTerm { kappa: CMatrix::from_element(1, 1, kappa), eps, gamma, power: 0 }
    }

    /// The exponent `−iε − γ/2`.
    pub fn rate(&self) -> Complex64 {
        c64(-0.5 * self.gamma, -self.eps)
    }

    fn time_factor(&self, t: f64) -> Complex64 {
        (self.rate() * t).exp() * t.powi(self.power as i32)
    }

    /// `∫_0^∞ t^p e^{(−iε−γ/2)t} e^{iωt} dt = p!/(γ/2 − i(ω−ε))^{p+1}`.
    pub fn half_transform_factor(&self, omega: f64) -> Complex64 {
        let den = c64(0.5 * self.gamma, -(omega - self.eps));
        factorial(self.power) / den.powu(self.power + 1)
    }

    /// Contribution of this term to the spectral density.
    pub fn density(&self, omega: f64) -> RMatrix {
        let h = self.half_transform_factor(omega);
        self.kappa.map(|k| 2.0 * (k * h).re)
    }
}

/// Sum-of-exponentials kernel `χ(t) = Σ_k κ_k t^{p_k} e^{(−iε_k−γ_k/2)t}` for t ≥ 0,
/// extended to t < 0 by elementwise conjugation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub dim: usize,
    pub terms: Vec<ExpTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

/// Partial-fraction piece `coeff/(ω − pole)^order` of a rational spectral density.
#[derive(Clone, Debug)]
pub(crate) struct PoleTerm {
    pub coeff: CMatrix,
    pub pole: Complex64,
    pub order: u32,
}

impl ExpFit {
    pub fn new(dim: usize, terms: Vec<ExpTerm>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("fit dimension must be positive"));
        }
        for (k, t) in terms.iter().enumerate() {
            if t.kappa.nrows() != dim || t.kappa.ncols() != dim {
                return Err(Error::invalid(format!("term {k}: amplitude is not {dim}x{dim}")));
            }
            let finite = t.kappa.iter().all(|z| z.re.is_finite() && z.im.is_finite());
            if !finite || !t.eps.is_finite() || !t.gamma.is_finite() {
                return Err(Error::invalid(format!("term {k}: non-finite parameter")));
            }
        }
        Ok(ExpFit { dim, terms, residual: None })
    }

    /// Scalar fit from `(κ, ε, γ)` triples.
    pub fn scalar(terms: &[(Complex64, f64, f64)]) -> Self {
        ExpFit {
            dim: 1,
            terms: terms.iter().map(|&(k, e, g)| ExpTerm::scalar(k, e, g)).collect(),
            residual: None,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn kernel(&self, t: f64) -> CMatrix {
        let tt = t.abs();
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            out += &term.kappa * term.time_factor(tt);
        }
        if t < 0.0 {
            kernel_symmetry_extend(&out)
        } else {
            out
        }
    }

    pub fn density(&self, omega: f64) -> RMatrix {
        let mut out = RMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            out += term.density(omega);
        }
        out
    }

    /// `Σ_k κ_k p_k!/(γ_k/2 − i(ω−ε_k))^{p_k+1}`; its real part is J/2 and its
    /// imaginary part is the level shift.
    pub fn half_transform(&self, omega: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            out += &term.kappa * term.half_transform_factor(omega);
        }
        out
    }

    pub fn level_shift(&self, omega: f64) -> RMatrix {
        self.half_transform(omega).map(|z| z.im)
    }

    pub fn amplitude_sum(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for term in self.terms.iter().filter(|t| t.power == 0) {
            out += &term.kappa;
        }
        out
    }

    pub(crate) fn poles(&self) -> Vec<PoleTerm> {
        let mut out = Vec::with_capacity(2 * self.terms.len());
        for term in &self.terms {
            let m = term.power + 1;
            let g = 0.5 * term.gamma;
            let pf = factorial(term.power);
            out.push(PoleTerm {
                coeff: &term.kappa * (I.powu(m) * pf),
                pole: c64(term.eps, -g),
                order: m,
            });
            out.push(PoleTerm {
                coeff: term.kappa.map(|z| z.conj()) * ((-I).powu(m) * pf),
                pole: c64(term.eps, g),
                order: m,
            });
        }
        out
    }

    /// Writes the fit as CSV rows `(k, Re κ, Im κ, ε, γ, power)`; matrix fits get
    /// extra `i, j` columns.
    pub fn write_table<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        if self.dim == 1 {
            wr.write_record(["k", "re_kappa", "im_kappa", "eps", "gamma", "power"])?;
        } else {
            wr.write_record(["k", "i", "j", "re_kappa", "im_kappa", "eps", "gamma", "power"])?;
        }
        for (k, t) in self.terms.iter().enumerate() {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let z = t.kappa[(i, j)];
                    let mut rec = vec![k.to_string()];
                    if self.dim > 1 {
                        rec.push(i.to_string());
                        rec.push(j.to_string());
                    }
                    rec.extend([
                        format_number(z.re),
                        format_number(z.im),
                        format_number(t.eps),
                        format_number(t.gamma),
                        t.power.to_string(),
                    ]);
                    wr.write_record(&rec)?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_table<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let matrix = header.iter().any(|h| h.trim() == "i");
        let expected = if matrix { 8 } else { 6 };
        if header.len() != expected {
            return Err(Error::invalid(format!("fit table needs {expected} columns")));
        }
        let mut rows: Vec<(usize, usize, usize, Complex64, f64, f64, u32)> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec[k].trim().parse::<f64>().map_err(|e| Error::invalid(format!("fit table: {e}")))
            };
            let int = |k: usize| -> Result<usize> {
                rec[k].trim().parse::<usize>().map_err(|e| Error::invalid(format!("fit table: {e}")))
            };
            let off = if matrix { 2 } else { 0 };
            let (i, j) = if matrix { (int(1)?, int(2)?) } else { (0, 0) };
            rows.push((
                int(0)?,
                i,
                j,
                c64(num(1 + off)?, num(2 + off)?),
                num(3 + off)?,
                num(4 + off)?,
                int(5 + off)? as u32,
            ));
        }
        let dim = rows.iter().map(|r| r.1.max(r.2) + 1).max().unwrap_or(1);
        let nterms = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let mut terms: Vec<Option<ExpTerm>> = vec![None; nterms];
        for (k, i, j, z, eps, gamma, power) in rows {
            let t = terms[k].get_or_insert_with(|| ExpTerm {
                kappa: CMatrix::zeros(dim, dim),
                eps,
                gamma,
                power,
            });
            if t.eps != eps || t.gamma != gamma || t.power != power {
                return Err(Error::invalid(format!("fit table: inconsistent exponent for term {k}")));
            }
            t.kappa[(i, j)] = z;
        }
        let terms = terms
            .into_iter()
            .enumerate()
            .map(|(k, t)| t.ok_or_else(|| Error::invalid(format!("fit table: term {k} missing"))))
            .collect::<Result<Vec<_>>>()?;
        ExpFit::new(dim, terms)
    }
}

/// Extends kernel values from t ≥ 0 to −t by elementwise conjugation.
pub fn kernel_symmetry_extend(chi: &CMatrix) -> CMatrix {
    chi.map(|z| z.conj())
}

// ---------------------------------------------------------------------------
// Spectral models

/// A scalar amplitude `s` stands for `s·I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Amplitude {
    fn to_matrix(&self, dim: usize) -> Result<RMatrix> {
        match self {
            Amplitude::Scalar(s) => Ok(RMatrix::identity(dim, dim) * *s),
            Amplitude::Matrix(rows) => {
                let m = crate::serial::from_real_rows(rows).map_err(Error::InvalidInput)?;
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::invalid(format!("amplitude is not {dim}x{dim}")));
                }
                Ok(m)
            }
        }
    }
}

/// `amplitude·γ/((ω−ε)² + (γ/2)²)`, whose kernel is `amplitude·e^{−iεt−γ|t|/2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianTerm {
    pub amplitude: Amplitude,
    pub center: f64,
    pub width: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralKind {
    /// `amplitude·√(1 − (ω/halfwidth)²)` on `[−halfwidth, halfwidth]`.
    SemiElliptical {
        halfwidth: f64,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    LorentzianSum { terms: Vec<LorentzianTerm> },
    /// `gamma0` on `[omega_min, omega_max]`, zero elsewhere.
    FlatWindow { gamma0: f64, omega_min: f64, omega_max: f64 },
    /// Cubic-spline interpolation of tabulated matrices (row-major, dim² entries each).
    Tabulated { omega: Vec<f64>, values: Vec<Vec<f64>> },
    /// The spectral density generated by an exponential-sum kernel.
    Fitted { fit: ExpFit },
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    #[serde(default = "one_usize")]
    dim: usize,
    #[serde(flatten)]
    kind: SpectralKind,
}

fn one_usize() -> usize {
    1
}

/// Matrix-valued spectral density `J(ω)` of a physical bath.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct SpectralModel {
    dim: usize,
    kind: SpectralKind,
    splines: Vec<CubicSpline>,
    lorentz: Vec<(RMatrix, f64, f64)>,
}

impl TryFrom<ModelRecord> for SpectralModel {
    type Error = Error;
    fn try_from(r: ModelRecord) -> Result<Self> {
        SpectralModel::new(r.dim, r.kind)
    }
}

impl From<SpectralModel> for ModelRecord {
    fn from(m: SpectralModel) -> Self {
        ModelRecord { dim: m.dim, kind: m.kind }
    }
}

impl PartialEq for SpectralModel {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.kind == other.kind
    }
}

impl SpectralModel {
    pub fn new(dim: usize, kind: SpectralKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("spectral model dimension must be positive"));
        }
        let mut splines = Vec::new();
        let mut lorentz = Vec::new();
        match &kind {
            SpectralKind::SemiElliptical { halfwidth, amplitude } => {
                if !(*halfwidth > 0.0) || !halfwidth.is_finite() || !(*amplitude >= 0.0) {
                    return Err(Error::invalid("semi-elliptical needs halfwidth > 0 and amplitude >= 0"));
                }
            }
            SpectralKind::LorentzianSum { terms } => {
                for (k, t) in terms.iter().enumerate() {
                    if !(t.width > 0.0) || !t.center.is_finite() {
                        return Err(Error::invalid(format!("lorentzian term {k}: width must be > 0")));
                    }
                    let a = t.amplitude.to_matrix(dim)?;
                    if (&a - a.transpose()).norm() > 1e-12 * a.norm() {
                        return Err(Error::invalid(format!("lorentzian term {k}: amplitude not symmetric")));
                    }
                    lorentz.push((a, t.center, t.width));
                }
            }
            SpectralKind::FlatWindow { gamma0, omega_min, omega_max } => {
                if !(omega_max > omega_min) || !gamma0.is_finite() {
                    return Err(Error::invalid("flat window needs omega_max > omega_min"));
                }
            }
            SpectralKind::Tabulated { omega, values } => {
                if omega.len() < 2 || values.len() != omega.len() {
                    return Err(Error::invalid("tabulated model needs matching omega/value lists"));
                }
                if values.iter().any(|v| v.len() != dim * dim) {
                    return Err(Error::invalid(format!("tabulated entries must have {} values", dim * dim)));
                }
                for v in values {
                    for i in 0..dim {
                        for j in 0..i {
                            let (a, b) = (v[i * dim + j], v[j * dim + i]);
                            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                                return Err(Error::invalid("tabulated J is not symmetric"));
                            }
                        }
                    }
                }
                for e in 0..dim * dim {
                    let ys = values.iter().map(|v| v[e]).collect();
                    splines.push(
                        CubicSpline::new(omega.clone(), ys)
                            .ok_or_else(|| Error::invalid("tabulated omega grid must be strictly increasing"))?,
                    );
                }
            }
            SpectralKind::Fitted { fit } => {
                if fit.dim != dim {
                    return Err(Error::invalid("fit dimension does not match model dimension"));
                }
                if fit.terms.iter().any(|t| !(t.gamma > 0.0)) {
                    return Err(Error::invalid("fitted model needs decaying terms (gamma > 0)"));
                }
            }
        }
        Ok(SpectralModel { dim, kind, splines, lorentz })
    }

    pub fn semi_elliptical(halfwidth: f64) -> Result<Self> {
        Self::new(1, SpectralKind::SemiElliptical { halfwidth, amplitude: 1.0 })
    }

    pub fn flat_window(gamma0: f64, omega_min: f64, omega_max: f64) -> Result<Self> {
        Self::new(1, SpectralKind::FlatWindow { gamma0, omega_min, omega_max })
    }

    /// Scalar Lorentzian sum from `(amplitude, center, width)` triples.
    pub fn lorentzians(terms: &[(f64, f64, f64)]) -> Result<Self> {
        let terms = terms
            .iter()
            .map(|&(a, c, w)| LorentzianTerm { amplitude: Amplitude::Scalar(a), center: c, width: w })
            .collect();
        Self::new(1, SpectralKind::LorentzianSum { terms })
    }

    pub fn tabulated(dim: usize, omega: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(dim, SpectralKind::Tabulated { omega, values })
    }

    pub fn from_fit(fit: ExpFit) -> Result<Self> {
        Self::new(fit.dim, SpectralKind::Fitted { fit })
    }

    /// Reads `omega,J_11,J_12,...` CSV data.
    pub fn tabulated_from_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let ncol = rd.headers()?.len();
        let dim = ((ncol.saturating_sub(1)) as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim + 1 != ncol {
            return Err(Error::invalid(format!("tabulated CSV has {ncol} columns; expected 1 + dim^2")));
        }
        let mut omega = Vec::new();
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let nums = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::invalid(format!("tabulated CSV: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            omega.push(nums[0]);
            values.push(nums[1..].to_vec());
        }
        Self::tabulated(dim, omega, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SpectralKind {
        &self.kind
    }

    pub fn density(&self, omega: f64) -> RMatrix {
        let d = self.dim;
        match &self.kind {
            SpectralKind::SemiElliptical { halfwidth, amplitude } => {
                let x = omega / halfwidth;
                let v = if x.abs() <= 1.0 { amplitude * (1.0 - x * x).sqrt() } else { 0.0 };
                RMatrix::identity(d, d) * v
            }
            SpectralKind::LorentzianSum { .. } => {
                let mut out = RMatrix::zeros(d, d);
                for (a, c, w) in &self.lorentz {
                    let x = omega - c;
                    out += a * (w / (x * x + 0.25 * w * w));
                }
                out
            }
            SpectralKind::FlatWindow { gamma0, omega_min, omega_max } => {
                let v = if omega >= *omega_min && omega <= *omega_max { *gamma0 } else { 0.0 };
                RMatrix::identity(d, d) * v
            }
            SpectralKind::Tabulated { .. } => RMatrix::from_fn(d, d, |i, j| self.splines[i * d + j].eval(omega)),
            SpectralKind::Fitted { fit } => fit.density(omega),
        }
    }

    /// Compact support of J, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        match &self.kind {
            SpectralKind::SemiElliptical { halfwidth, .. } => Some((-halfwidth, *halfwidth)),
            SpectralKind::FlatWindow { omega_min, omega_max, .. } => Some((*omega_min, *omega_max)),
            SpectralKind::Tabulated { .. } => Some(self.splines[0].domain()),
            _ => None,
        }
    }

    /// Frequency window holding the features of J: the support, or the centers
    /// padded by ten widths.
    pub fn frequency_window(&self) -> (f64, f64) {
        if let Some(s) = self.support() {
            return s;
        }
        let fit = self.exp_fit().expect("non-compact models carry an exponential form");
        let lo = fit.terms.iter().map(|t| t.eps - 10.0 * t.gamma).fold(f64::INFINITY, f64::min);
        let hi = fit.terms.iter().map(|t| t.eps + 10.0 * t.gamma).fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            (lo, hi)
        } else {
            (-1.0, 1.0)
        }
    }

    /// Characteristic frequency scale used to set default sampling windows.
    pub fn frequency_scale(&self) -> f64 {
        match &self.kind {
            SpectralKind::SemiElliptical { halfwidth, .. } => *halfwidth,
            SpectralKind::FlatWindow { omega_min, omega_max, .. } => 0.5 * (omega_max - omega_min),
            SpectralKind::Tabulated { .. } => {
                let (a, b) = self.splines[0].domain();
                0.5 * (b - a)
            }
            _ => {
                let fit = self.exp_fit().expect("exponential form");
                let g = fit.terms.iter().map(|t| 0.5 * t.gamma).fold(f64::INFINITY, f64::min);
                if g.is_finite() {
                    g
                } else {
                    1.0
                }
            }
        }
    }

    /// Exact exponential representation of the kernel when one exists.
    pub fn exp_fit(&self) -> Option<ExpFit> {
        match &self.kind {
            SpectralKind::LorentzianSum { .. } => Some(ExpFit {
                dim: self.dim,
                terms: self
                    .lorentz
                    .iter()
                    .map(|(a, c, w)| ExpTerm { kappa: a.map(|x| c64(x, 0.0)), eps: *c, gamma: *w, power: 0 })
                    .collect(),
                residual: None,
            }),
            SpectralKind::Fitted { fit } => Some(fit.clone()),
            _ => None,
        }
    }

    /// Rough magnitude of χ(0), the reference for quadrature error control.
    pub fn kernel_scale(&self) -> f64 {
        let s = match &self.kind {
            SpectralKind::SemiElliptical { halfwidth, amplitude } => amplitude * halfwidth / 4.0,
            SpectralKind::FlatWindow { gamma0, omega_min, omega_max } => {
                gamma0.abs() * (omega_max - omega_min) / (2.0 * PI)
            }
            SpectralKind::Tabulated { omega, values } => {
                let mut acc = 0.0;
                for k in 1..omega.len() {
                    let a = values[k - 1].iter().map(|v| v.abs()).fold(0.0, f64::max);
                    let b = values[k].iter().map(|v| v.abs()).fold(0.0, f64::max);
                    acc += 0.5 * (a + b) * (omega[k] - omega[k - 1]);
                }
                acc / (2.0 * PI)
            }
            _ => {
                let fit = self.exp_fit().expect("exponential form");
                fit.terms.iter().map(|t| t.kappa.iter().map(|z| z.norm()).fold(0.0, f64::max)).sum()
            }
        };
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    fn breakpoints(&self, extra: &[f64], t: f64) -> Vec<f64> {
        let (a, b) = self.support().expect("compact support");
        let mut pts = vec![a, b];
        if let SpectralKind::Tabulated { omega, .. } = &self.kind {
            if omega.len() <= 400 {
                pts.extend(omega.iter().copied());
            }
        }
        // Enough initial panels that none spans more than half an oscillation.
        let panels = ((t.abs() * (b - a) / PI).ceil() as usize).clamp(1, 2000);
        for k in 1..panels {
            pts.push(a + (b - a) * k as f64 / panels as f64);
        }
        pts.extend(extra.iter().copied().filter(|x| *x > a && *x < b));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `∫ dω/2π J(ω) w(ω) e^{i·sign·ωt}` for a compactly supported model.
    fn compact_transform<Wf: Fn(f64) -> f64>(
        &self,
        sign: f64,
        t: f64,
        weight: Wf,
        extra: &[f64],
        tol: &Tolerances,
    ) -> Result<CMatrix> {
        let d = self.dim;
        let scale = self.kernel_scale();
        let pts = self.breakpoints(extra, t);
        let r = integrate(
            |w, out| {
                let j = self.density(w);
                let ph = c64(0.0, sign * w * t).exp() * (weight(w) / (2.0 * PI));
                for i in 0..d {
                    for k in 0..d {
                        out[i * d + k] = ph * j[(i, k)];
                    }
                }
            },
            &pts,
            d * d,
            1e-3 * tol.quadrature * scale,
            0.0,
            50_000,
        );
        if r.error > tol.quadrature * scale || !r.value.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Quadrature(format!(
                "estimated error {:.3e} exceeds {:.3e} at t = {t}",
                r.error,
                tol.quadrature * scale
            )));
        }
        Ok(CMatrix::from_fn(d, d, |i, k| r.value[i * d + k]))
    }
}

// ---------------------------------------------------------------------------
// Kernels and correlation functions

/// `χ(t) = ∫ dω/2π J(ω) e^{−iωt}`.
pub fn memory_kernel(model: &SpectralModel, t: f64) -> Result<CMatrix> {
    memory_kernel_with(model, t, &Tolerances::default())
}

pub fn memory_kernel_with(model: &SpectralModel, t: f64, tol: &Tolerances) -> Result<CMatrix> {
    if !t.is_finite() {
        return Err(Error::invalid("time must be finite"));
    }
    let d = model.dim;
    match &model.kind {
        SpectralKind::FlatWindow { gamma0, omega_min, omega_max } => {
            let v = if t == 0.0 {
                c64(gamma0 * (omega_max - omega_min) / (2.0 * PI), 0.0)
            } else {
                I * (gamma0 / (2.0 * PI * t)) * ((-I * omega_max * t).exp() - (-I * omega_min * t).exp())
            };
            Ok(CMatrix::identity(d, d) * v)
        }
        SpectralKind::LorentzianSum { .. } | SpectralKind::Fitted { .. } => Ok(model.exp_fit().unwrap().kernel(t)),
        _ => model.compact_transform(-1.0, t, |_| 1.0, &[], tol),
    }
}

/// Returns `(C⁺(t), C⁻(t))` with `C⁺ = ∫ dω/2π e^{iωt} J f` and
/// `C⁻ = ∫ dω/2π e^{iωt} J (1 − f)`.
pub fn correlation_pair(model: &SpectralModel, fermi: &FermiSpec, t: f64) -> Result<(CMatrix, CMatrix)> {
    correlation_pair_with(model, fermi, t, &Tolerances::default())
}

pub fn correlation_pair_with(
    model: &SpectralModel,
    fermi: &FermiSpec,
    t: f64,
    tol: &Tolerances,
) -> Result<(CMatrix, CMatrix)> {
    if !t.is_finite() {
        return Err(Error::invalid("time must be finite"));
    }
    let chi_neg = memory_kernel_with(model, -t, tol)?;
    if let Some(f) = fermi.constant() {
        let plus = &chi_neg * c64(f, 0.0);
        let minus = &chi_neg * c64(1.0 - f, 0.0);
        return Ok((plus, minus));
    }
    if model.support().is_some() {
        let extra = [fermi.mu];
        let plus = model.compact_transform(1.0, t, |w| fermi.occupation(w), &extra, tol)?;
        let minus = model.compact_transform(1.0, t, |w| 1.0 - fermi.occupation(w), &extra, tol)?;
        return Ok((plus, minus));
    }
    let fit = model.exp_fit().expect("exponential form");
    let poles = fit.poles();
    let c = contour_anchor(&poles, fermi.mu);
    let mut plus = half_line_transform(&poles, model.dim, c, t, tol)?;
    // Correction for the difference between f and the step at the anchor.
    let width = if fermi.beta.is_infinite() { 0.0 } else { 40.0 / fermi.beta };
    let lo = c.min(fermi.mu) - width;
    let hi = c.max(fermi.mu) + width;
    if hi > lo {
        let d = model.dim;
        let mut pts = vec![lo, fermi.mu, c, hi];
        pts.extend(poles.iter().map(|p| p.pole.re).filter(|x| *x > lo && *x < hi));
        let panels = ((t.abs() * (hi - lo) / PI).ceil() as usize).clamp(1, 2000);
        pts.extend((1..panels).map(|k| lo + (hi - lo) * k as f64 / panels as f64));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let scale = model.kernel_scale();
        let r = integrate(
            |w, out| {
                let step = if w < c { 1.0 } else { 0.0 };
                let wt = fermi.occupation(w) - step;
                let j = fit.density(w);
                let ph = c64(0.0, w * t).exp() * (wt / (2.0 * PI));
                for i in 0..d {
                    for k in 0..d {
                        out[i * d + k] = ph * j[(i, k)];
                    }
                }
            },
            &pts,
            d * d,
            1e-3 * tol.quadrature * scale,
            0.0,
            50_000,
        );
        if r.error > tol.quadrature * scale {
            return Err(Error::Quadrature(format!("Fermi correction error {:.3e} at t = {t}", r.error)));
        }
        plus += CMatrix::from_fn(d, d, |i, k| r.value[i * d + k]);
    }
    let minus = &chi_neg - &plus;
    Ok((plus, minus))
}

/// Picks a real anchor near `mu` whose vertical line stays clear of every pole.
fn contour_anchor(poles: &[PoleTerm], mu: f64) -> f64 {
    let clearance = |c: f64| {
        poles
            .iter()
            .map(|p| (c - p.pole.re).abs() / p.pole.im.abs().max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min)
    };
    let step = 0.25 * poles.iter().map(|p| p.pole.im.abs()).fold(f64::INFINITY, f64::min);
    let mut best = (mu, clearance(mu));
    if best.1 >= 0.5 || !step.is_finite() {
        return mu;
    }
    for k in 1..=40 {
        for c in [mu + k as f64 * step, mu - k as f64 * step] {
            let cl = clearance(c);
            if cl >= 0.5 {
                return c;
            }
            if cl > best.1 {
                best = (c, cl);
            }
        }
    }
    best.0
}

/// `∫_{−∞}^{c} dω/2π e^{iωt} J(ω)` for a rational J given by its poles, by
/// closing the contour in the quadrant where `e^{iωt}` decays.
fn half_line_transform(poles: &[PoleTerm], d: usize, c: f64, t: f64, tol: &Tolerances) -> Result<CMatrix> {
    let mut total = CMatrix::zeros(d, d);
    if t.abs() < 1e-12 {
        let mut log_sum = CMatrix::zeros(d, d);
        for p in poles {
            let z = c64(c, 0.0) - p.pole;
            if p.order == 1 {
                let branch = if p.pole.im < 0.0 { PI } else { -PI };
                total += &p.coeff * (z.ln() - I * branch);
                log_sum += &p.coeff;
            } else {
                let m = p.order as i32;
                total += &p.coeff * (z.powi(1 - m) / (1 - m) as f64);
            }
        }
        let scale = poles.iter().map(|p| p.coeff.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
        if log_sum.norm() > 1e-10 * scale {
            return Err(Error::Quadrature(
                "spectral density decays too slowly for an equal-time correlation".into(),
            ));
        }
        return Ok(total / c64(2.0 * PI, 0.0));
    }
    let sigma = t.signum();
    let tt = t.abs();
    for p in poles {
        if p.pole.im * sigma > 0.0 && p.pole.re < c {
            let m = p.order;
            let res = (I * t).powu(m - 1) * (I * p.pole * t).exp() / factorial(m - 1);
            total += &p.coeff * (I * 2.0 * PI * sigma * res);
        }
    }
    // Vertical leg ω = c + iσ s/|t|, s ∈ [0, 45].
    let mut pts = vec![0.0, 45.0];
    for p in poles {
        for x in [p.pole.im.abs() * tt, (c - p.pole.re).abs() * tt, (c64(c, 0.0) - p.pole).norm() * tt] {
            if x > 0.0 && x < 45.0 {
                pts.push(x);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let phase = (I * c * t).exp();
    let scale = poles.iter().map(|p| p.coeff.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    let r = integrate(
        |s, out| {
            let w = c64(c, sigma * s / tt);
            for v in out.iter_mut() {
                *v = c64(0.0, 0.0);
            }
            for p in poles {
                let f = (w - p.pole).powu(p.order).inv();
                for i in 0..d {
                    for k in 0..d {
                        out[i * d + k] += p.coeff[(i, k)] * f;
                    }
                }
            }
            let g = phase * (-s).exp() * I * sigma / tt;
            for v in out.iter_mut() {
                *v *= g;
            }
        },
        &pts,
        d * d,
        1e-3 * tol.quadrature * scale,
        0.0,
        50_000,
    );
    if r.error > tol.quadrature * scale {
        return Err(Error::Quadrature(format!("contour leg error {:.3e} at t = {t}", r.error)));
    }
    total -= CMatrix::from_fn(d, d, |i, k| r.value[i * d + k]);
    Ok(total / c64(2.0 * PI, 0.0))
}

// ---------------------------------------------------------------------------
// Pseudomode parameters

#[derive(Serialize, Deserialize)]
struct BathRecord {
    lambda: ComplexRows,
    gamma: Vec<f64>,
    zeta: ComplexRows,
    #[serde(default, skip_deserializing)]
    physical: bool,
}

/// Pseudomode parameters of one bath: Hermitian `Λ`, diagonal rates `Γ` and
/// couplings `ζ` (n modes × n_S sites).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BathRecord", into = "BathRecord")]
pub struct PseudomodeBath {
    lambda: CMatrix,
    gamma: Vec<f64>,
    zeta: CMatrix,
    physical: bool,
}

impl TryFrom<BathRecord> for PseudomodeBath {
    type Error = Error;
    fn try_from(r: BathRecord) -> Result<Self> {
        let lambda = from_complex_rows(&r.lambda).map_err(Error::InvalidInput)?;
        let zeta = from_complex_rows(&r.zeta).map_err(Error::InvalidInput)?;
        PseudomodeBath::new(lambda, r.gamma, zeta)
    }
}

impl From<PseudomodeBath> for BathRecord {
    fn from(b: PseudomodeBath) -> Self {
        BathRecord {
            lambda: complex_rows(&b.lambda),
            gamma: b.gamma,
            zeta: complex_rows(&b.zeta),
            physical: b.physical,
        }
    }
}

impl PseudomodeBath {
    pub fn new(lambda: CMatrix, gamma: Vec<f64>, zeta: CMatrix) -> Result<Self> {
        Self::with_tolerance(lambda, gamma, zeta, Tolerances::default().hermiticity)
    }

    pub fn with_tolerance(lambda: CMatrix, gamma: Vec<f64>, zeta: CMatrix, herm_tol: f64) -> Result<Self> {
        let n = gamma.len();
        if n == 0 {
            return Err(Error::invalid("a bath needs at least one pseudomode"));
        }
        if lambda.nrows() != n || lambda.ncols() != n {
            return Err(Error::invalid(format!("Lambda must be {n}x{n}")));
        }
        if zeta.nrows() != n || zeta.ncols() == 0 {
            return Err(Error::invalid(format!("zeta must have {n} rows and at least one column")));
        }
        if gamma.iter().any(|g| !g.is_finite())
            || lambda.iter().chain(zeta.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::invalid("non-finite pseudomode parameter"));
        }
        let defect = hermitian_defect(&lambda);
        if defect > herm_tol * lambda.norm() && defect > 0.0 {
            return Err(Error::invalid(format!("Lambda is not Hermitian (defect {defect:.3e})")));
        }
        let physical = gamma.iter().all(|&g| g >= 0.0);
        Ok(PseudomodeBath { lambda: hermitize(&lambda), gamma, zeta, physical })
    }

    /// Builds a bath from `W` and `ζ`; `−(W + W†)` must be diagonal.
    pub fn from_w(w: &CMatrix, zeta: CMatrix) -> Result<Self> {
        let g = -(w + w.adjoint());
        let n = w.nrows();
        let scale = w.norm().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..n {
                if i != j && g[(i, j)].norm() > 1e-10 * scale {
                    return Err(Error::invalid("W + W† is not diagonal"));
                }
            }
        }
        let lambda = (w.adjoint() - w) / c64(0.0, 2.0);
        Self::new(hermitize(&lambda), (0..n).map(|i| g[(i, i)].re).collect(), zeta)
    }

    /// Single-site diagonal bath from `(ε_k, γ_k, ζ_k)`.
    pub fn diagonal(modes: &[(f64, f64, Complex64)]) -> Result<Self> {
        let n = modes.len();
        let lambda = CMatrix::from_fn(n, n, |i, j| if i == j { c64(modes[i].0, 0.0) } else { c64(0.0, 0.0) });
        let zeta = CMatrix::from_fn(n, 1, |i, _| modes[i].2);
        Self::new(lambda, modes.iter().map(|m| m.1).collect(), zeta)
    }

    pub fn n_modes(&self) -> usize {
        self.gamma.len()
    }

    pub fn dim(&self) -> usize {
        self.zeta.ncols()
    }

    pub fn lambda(&self) -> &CMatrix {
        &self.lambda
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn zeta(&self) -> &CMatrix {
        &self.zeta
    }

    pub fn is_physical(&self) -> bool {
        self.physical
    }

    pub fn min_gamma(&self) -> f64 {
        self.gamma.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `W = −iΛ − Γ/2`.
    pub fn w(&self) -> CMatrix {
        let mut w = &self.lambda * (-I);
        for (k, g) in self.gamma.iter().enumerate() {
            w[(k, k)] -= c64(0.5 * g, 0.0);
        }
        w
    }
}

// ---------------------------------------------------------------------------
// Sampled kernels

/// Kernel values on the uniform grid `t_j = j·Δt`, `j = 0..2N`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSample {
    dt: f64,
    values: Vec<CMatrix>,
}

impl KernelSample {
    pub fn new(dt: f64, values: Vec<CMatrix>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("sampling step must be positive"));
        }
        if values.len() < 3 || values.len() % 2 == 0 {
            return Err(Error::invalid(format!("need an odd number (>= 3) of samples, got {}", values.len())));
        }
        let d = values[0].nrows();
        if values.iter().any(|v| v.nrows() != d || v.ncols() != d) {
            return Err(Error::invalid("kernel samples must be square matrices of equal size"));
        }
        Ok(KernelSample { dt, values })
    }

    pub fn from_fn<F: Fn(f64) -> CMatrix + Sync>(dt: f64, n_half: usize, f: F) -> Result<Self> {
        let values = (0..=2 * n_half).into_par_iter().map(|j| f(j as f64 * dt)).collect();
        Self::new(dt, values)
    }

    /// Samples `memory_kernel` of a model on `2·n_half + 1` points spanning `[0, t_c]`.
    pub fn from_model(model: &SpectralModel, t_c: f64, n_half: usize, tol: &Tolerances) -> Result<Self> {
        if n_half == 0 {
            return Err(Error::invalid("n_half must be positive"));
        }
        let dt = t_c / (2 * n_half) as f64;
        let values = (0..=2 * n_half)
            .into_par_iter()
            .map(|j| memory_kernel_with(model, j as f64 * dt, tol))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dt, values)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_half(&self) -> usize {
        (self.values.len() - 1) / 2
    }

    pub fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|j| j as f64 * self.dt).collect()
    }
}
