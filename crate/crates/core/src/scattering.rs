//! Landauer–Büttiker transmissions through a non-interacting system, for true
//! baths and for their pseudomode realizations.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bathmodel::{PseudomodeBath, SpectralKind, SpectralModel};
use crate::error::{Error, Result};
use crate::forward::Resolvent;
use crate::linalg::{c64, hermitian_defect, identity, inverse, to_complex, CMatrix, RMatrix};
use crate::quadrature::integrate;
use crate::serial::{complex_matrix, format_number};
use crate::tolerance::Tolerances;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathDescription {
    Model(SpectralModel),
    Pseudomode(PseudomodeBath),
}

impl BathDescription {
    pub fn dim(&self) -> usize {
        match self {
            BathDescription::Model(m) => m.dim(),
            BathDescription::Pseudomode(b) => b.dim(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledBath {
    pub label: String,
    #[serde(flatten)]
    pub bath: BathDescription,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterSetup {
    #[serde(with = "complex_matrix")]
    pub h_s: CMatrix,
    pub baths: Vec<LabeledBath>,
}

impl ScatterSetup {
    pub fn new(h_s: CMatrix, baths: Vec<LabeledBath>) -> Result<Self> {
        let s = ScatterSetup { h_s, baths };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.h_s.nrows();
        if n == 0 || self.h_s.ncols() != n {
            return Err(Error::invalid("H_S must be a nonempty square matrix"));
        }
        if hermitian_defect(&self.h_s) > Tolerances::default().hermiticity * self.h_s.norm().max(1.0) {
            return Err(Error::invalid("H_S is not Hermitian"));
        }
        if self.baths.len() < 2 {
            return Err(Error::invalid("at least two baths are required"));
        }
        for b in &self.baths {
            if b.bath.dim() != n {
                return Err(Error::invalid(format!("bath {} couples to {} sites, H_S has {n}", b.label, b.bath.dim())));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.baths.iter().map(|b| b.label.clone()).collect()
    }

    fn models(&self) -> Result<Vec<&SpectralModel>> {
        self.baths
            .iter()
            .map(|b| match &b.bath {
                BathDescription::Model(m) => Ok(m),
                _ => Err(Error::invalid(format!("bath {} is not a spectral model", b.label))),
            })
            .collect()
    }

    fn pseudomodes(&self) -> Result<Vec<&PseudomodeBath>> {
        self.baths
            .iter()
            .map(|b| match &b.bath {
                BathDescription::Pseudomode(p) => Ok(p),
                _ => Err(Error::invalid(format!("bath {} is not a pseudomode bath", b.label))),
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Level shifts

/// `Υ(ω) = P∫ dΩ/2π J(Ω)/(ω − Ω)`.
pub fn level_shift(model: &SpectralModel, omega: f64) -> Result<RMatrix> {
    level_shift_with(model, omega, &Tolerances::default())
}

pub fn level_shift_with(model: &SpectralModel, omega: f64, tol: &Tolerances) -> Result<RMatrix> {
    if let Some(fit) = model.exp_fit() {
        return Ok(fit.level_shift(omega));
    }
    let (a, b) = model.support().ok_or_else(|| Error::invalid("model has neither support nor exponential form"))?;
    let mut knots = vec![];
    if let SpectralKind::Tabulated { omega: w, .. } = model.kind() {
        knots.extend(w.iter().copied());
    }
    let d = model.dim();
    let scale = (0..=64)
        .map(|k| model.density(a + (b - a) * k as f64 / 64.0).amax())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let abs_tol = 1e-3 * tol.quadrature * scale;
    let rel_tol = 1e-10;
    let fill = |m: RMatrix, out: &mut [Complex64]| {
        for (k, v) in m.iter().enumerate() {
            out[k] = c64(*v, 0.0);
        }
    };
    let mut total = RMatrix::zeros(d, d);
    let mut add = |r: crate::quadrature::QuadResult| -> Result<()> {
        if !r.converged {
            return Err(Error::Quadrature(format!("level shift at omega = {omega}: error {:.3e}", r.error)));
        }
        for (k, v) in r.value.iter().enumerate() {
            total[k] += v.re;
        }
        Ok(())
    };
    let regular = |lo: f64, hi: f64| -> Vec<f64> {
        let mut p = vec![lo];
        p.extend(knots.iter().copied().filter(|&x| x > lo && x < hi));
        p.push(hi);
        p
    };
    let direct = |lo: f64, hi: f64| {
        integrate(|x, out| if x == omega { out.fill(c64(0.0, 0.0)) } else { fill(model.density(x) / (omega - x), out) }, &regular(lo, hi), d * d, abs_tol, rel_tol, 4000)
    };
    if omega > a && omega < b {
        let h = (omega - a).min(b - omega);
        let mut sp = vec![0.0];
        let mut inner: Vec<f64> = knots.iter().map(|&x| (x - omega).abs()).filter(|&s| s > 0.0 && s < h).collect();
        inner.sort_by(f64::total_cmp);
        sp.extend(inner);
        sp.push(h);
        add(integrate(
            |s, out| fill((model.density(omega - s) - model.density(omega + s)) / s, out),
            &sp,
            d * d,
            abs_tol,
            rel_tol,
            4000,
        ))?;
        if omega - h > a {
            add(direct(a, omega - h))?;
        }
        if omega + h < b {
            add(direct(omega + h, b))?;
        }
    } else {
        add(direct(a, b))?;
    }
    Ok(total / (2.0 * PI))
}

/// Retarded self-energy `Υ − iJ/2` of a true bath.
pub fn model_self_energy(model: &SpectralModel, omega: f64) -> Result<CMatrix> {
    let j = model.density(omega);
    let u = level_shift(model, omega)?;
    Ok(to_complex(&u) - to_complex(&j) * c64(0.0, 0.5))
}

// ---------------------------------------------------------------------------
// Tables

/// `values[k][(a, b)] = T_{ab}(ω_k)`.
#[derive(Clone, Debug)]
pub struct TransmissionTable {
    pub labels: Vec<String>,
    pub omegas: Vec<f64>,
    pub values: Vec<RMatrix>,
    pub notes: Vec<String>,
}

impl TransmissionTable {
    pub fn entry(&self, a: &str, b: &str) -> Option<Vec<f64>> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values.iter().map(|m| m[(i, j)]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut head = vec!["omega".to_string()];
        for a in &self.labels {
            for b in &self.labels {
                head.push(format!("T_{a}_{b}"));
            }
        }
        out.write_record(&head)?;
        for (w, m) in self.omegas.iter().zip(&self.values) {
            let mut row = vec![format_number(*w)];
            for i in 0..self.labels.len() {
                for j in 0..self.labels.len() {
                    row.push(format_number(m[(i, j)]));
                }
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Residual-bath resolved transmissions; rows and columns run over all
/// pseudomodes, bath by bath.
#[derive(Clone, Debug)]
pub struct ResidualTable {
    pub labels: Vec<String>,
    pub modes: Vec<usize>,
    pub omegas: Vec<f64>,
    pub values: Vec<RMatrix>,
}

impl ResidualTable {
    fn offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for m in &self.modes {
            off.push(off.last().unwrap() + m);
        }
        off
    }

    /// `Σ_{k∈a, q∈b} T^res_{ak,bq}` on every grid point.
    pub fn aggregate(&self, a: usize, b: usize) -> Vec<f64> {
        let off = self.offsets();
        self.values
            .iter()
            .map(|m| m.view((off[a], off[b]), (self.modes[a], self.modes[b])).sum())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["omega", "alpha", "k", "beta", "q", "T"])?;
        let off = self.offsets();
        for (w, m) in self.omegas.iter().zip(&self.values) {
            for (a, la) in self.labels.iter().enumerate() {
                for k in 0..self.modes[a] {
                    for (b, lb) in self.labels.iter().enumerate() {
                        for q in 0..self.modes[b] {
                            let v = m[(off[a] + k, off[b] + q)];
                            out.write_record([format_number(*w), la.clone(), k.to_string(), lb.clone(), q.to_string(), format_number(v)])?;
                        }
                    }
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Transmissions

fn system_greens(h_s: &CMatrix, sigma: &CMatrix, omega: f64) -> Result<CMatrix> {
    let n = h_s.nrows();
    let a = identity(n) * c64(omega, 0.0) - h_s - sigma;
    inverse(&a).ok_or(Error::SingularResolvent { omega })
}

fn landauer(broad: &[CMatrix], g: &CMatrix) -> RMatrix {
    let m = broad.len();
    let gd = g.adjoint();
    RMatrix::from_fn(m, m, |a, b| (&broad[a] * g * &broad[b] * &gd).trace().re)
}

/// Evaluates `f` on every grid point; a singular point is retried once at `ω + 1e-9`.
fn sweep<T: Send>(omegas: &[f64], f: impl Fn(f64) -> Result<T> + Sync) -> Result<(Vec<T>, Vec<String>)> {
    let rows: Vec<Result<(T, Option<String>)>> = omegas
        .par_iter()
        .map(|&w| match f(w) {
            Err(Error::SingularResolvent { .. }) => {
                let v = f(w + 1e-9)?;
                Ok((v, Some(format!("omega = {w} is singular; evaluated at omega + 1e-9"))))
            }
            other => other.map(|v| (v, None)),
        })
        .collect();
    let mut vals = Vec::with_capacity(rows.len());
    let mut notes = Vec::new();
    for r in rows {
        let (v, n) = r?;
        vals.push(v);
        notes.extend(n);
    }
    Ok((vals, notes))
}

/// `T_{αβ} = Tr{J_α G J_β G†}` with `G = (ω − H_S − Σ_α Σ_α)⁻¹` for true baths.
pub fn true_transmission(setup: &ScatterSetup, omegas: &[f64]) -> Result<TransmissionTable> {
    setup.validate()?;
    let models = setup.models()?;
    let n = setup.h_s.nrows();
    let (values, notes) = sweep(omegas, |w| {
        let mut sigma = CMatrix::zeros(n, n);
        let mut broad = Vec::new();
        for m in &models {
            sigma += model_self_energy(m, w)?;
            broad.push(to_complex(&m.density(w)));
        }
        let g = system_greens(&setup.h_s, &sigma, w)?;
        Ok(landauer(&broad, &g))
    })?;
    Ok(TransmissionTable { labels: setup.labels(), omegas: omegas.to_vec(), values, notes })
}

/// `ω − Q(ω)` for the system plus all pseudomodes, bath blocks first.
pub fn extended_matrix(h_s: &CMatrix, baths: &[&PseudomodeBath], omega: f64) -> CMatrix {
    let ns = h_s.nrows();
    let total: usize = baths.iter().map(|b| b.n_modes()).sum::<usize>() + ns;
    let mut q = CMatrix::zeros(total, total);
    let mut off = 0;
    for b in baths {
        let m = b.n_modes();
        let blk = b.lambda() - CMatrix::from_fn(m, m, |i, j| if i == j { c64(0.0, 0.5 * b.gamma()[i]) } else { c64(0.0, 0.0) });
        q.view_mut((off, off), (m, m)).copy_from(&blk);
        q.view_mut((off, total - ns), (m, ns)).copy_from(b.zeta());
        q.view_mut((total - ns, off), (ns, m)).copy_from(&b.zeta().adjoint());
        off += m;
    }
    q.view_mut((total - ns, total - ns), (ns, ns)).copy_from(h_s);
    identity(total) * c64(omega, 0.0) - q
}

/// `T^res_{αk,βq} = Γ_{αk} Γ_{βq} |𝒢_{αk,βq}|²` from the full extended Green's function.
pub fn extended_transmission(setup: &ScatterSetup, omegas: &[f64]) -> Result<ResidualTable> {
    setup.validate()?;
    let baths = setup.pseudomodes()?;
    let rates: Vec<f64> = baths.iter().flat_map(|b| b.gamma().iter().copied()).collect();
    let nm = rates.len();
    let (values, _) = sweep(omegas, |w| {
        let g = inverse(&extended_matrix(&setup.h_s, &baths, w)).ok_or(Error::SingularResolvent { omega: w })?;
        Ok(RMatrix::from_fn(nm, nm, |i, j| rates[i] * rates[j] * g[(i, j)].norm_sqr()))
    })?;
    Ok(ResidualTable { labels: setup.labels(), modes: baths.iter().map(|b| b.n_modes()).collect(), omegas: omegas.to_vec(), values })
}

/// Bath-space blocks `𝒢_{αβ} = δ_{αβ}F_α + F_α ζ_α 𝒢_S ζ_β† F_β`, assembled into one matrix.
pub fn bath_greens_blocks(h_s: &CMatrix, baths: &[&PseudomodeBath], omega: f64) -> Result<CMatrix> {
    let fs: Vec<CMatrix> = baths
        .iter()
        .map(|b| {
            let m = b.n_modes();
            let a = identity(m) * c64(omega, 0.0) - b.lambda()
                + CMatrix::from_fn(m, m, |i, j| if i == j { c64(0.0, 0.5 * b.gamma()[i]) } else { c64(0.0, 0.0) });
            inverse(&a).ok_or(Error::SingularResolvent { omega })
        })
        .collect::<Result<_>>()?;
    let ns = h_s.nrows();
    let mut sigma = CMatrix::zeros(ns, ns);
    for (b, f) in baths.iter().zip(&fs) {
        sigma += b.zeta().adjoint() * f * b.zeta();
    }
    let gs = system_greens(h_s, &sigma, omega)?;
    let total: usize = baths.iter().map(|b| b.n_modes()).sum();
    let mut out = CMatrix::zeros(total, total);
    let mut oa = 0;
    for (a, ba) in baths.iter().enumerate() {
        let left = &fs[a] * ba.zeta() * &gs;
        let mut ob = 0;
        for (b, bb) in baths.iter().enumerate() {
            let mut blk = &left * bb.zeta().adjoint() * &fs[b];
            if a == b {
                blk += &fs[a];
            }
            out.view_mut((oa, ob), (ba.n_modes(), bb.n_modes())).copy_from(&blk);
            ob += bb.n_modes();
        }
        oa += ba.n_modes();
    }
    Ok(out)
}

/// Per-mode broadening matrices `ζ†F†Ĵ_k Fζ` (plus sign) or `ζ†FĴ_kF†ζ` (minus sign).
pub fn mode_broadenings(bath: &PseudomodeBath, omega: f64, plus: bool) -> Result<Vec<CMatrix>> {
    let m = bath.n_modes();
    let a = identity(m) * c64(omega, 0.0) - bath.lambda()
        + CMatrix::from_fn(m, m, |i, j| if i == j { c64(0.0, 0.5 * bath.gamma()[i]) } else { c64(0.0, 0.0) });
    let f = inverse(&a).ok_or(Error::SingularResolvent { omega })?;
    let (l, r) = if plus { (f.adjoint(), f.clone()) } else { (f.clone(), f.adjoint()) };
    let zl = bath.zeta().adjoint() * l;
    let rz = r * bath.zeta();
    Ok((0..m).map(|k| zl.column(k) * rz.row(k) * c64(bath.gamma()[k], 0.0)).collect())
}

#[derive(Clone, Debug)]
pub struct EffectiveTransmission {
    pub table: TransmissionTable,
    /// Largest `‖Σ_k 𝒥±_{αk} − i(Σ_α − Σ_α†)‖` over baths, signs and grid.
    pub identity_residual: f64,
}

/// `T^eff_{αβ} = Tr{𝒥_α 𝒢_S 𝒥_β 𝒢_S†}` from system-sized quantities only.
pub fn effective_transmission(setup: &ScatterSetup, omegas: &[f64]) -> Result<EffectiveTransmission> {
    setup.validate()?;
    let baths = setup.pseudomodes()?;
    let resolvents: Vec<Resolvent> = baths.iter().map(|b| Resolvent::new(b)).collect();
    let n = setup.h_s.nrows();
    let (rows, notes) = sweep(omegas, |w| {
        let mut sigma = CMatrix::zeros(n, n);
        let mut broad = Vec::new();
        let mut resid: f64 = 0.0;
        for (b, r) in baths.iter().zip(&resolvents) {
            let s = r.self_energy(w)?;
            let herm = (&s - s.adjoint()) * c64(0.0, 1.0);
            for plus in [true, false] {
                let sum: CMatrix = mode_broadenings(b, w, plus)?.iter().fold(CMatrix::zeros(n, n), |acc, x| acc + x);
                resid = resid.max((&sum - &herm).norm() / (1.0 + herm.norm()));
            }
            sigma += s;
            broad.push(herm);
        }
        let g = system_greens(&setup.h_s, &sigma, w)?;
        Ok((landauer(&broad, &g), resid))
    })?;
    let identity_residual = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let values = rows.into_iter().map(|r| r.0).collect();
    Ok(EffectiveTransmission {
        table: TransmissionTable { labels: setup.labels(), omegas: omegas.to_vec(), values, notes },
        identity_residual,
    })
}

/// Largest entry of `a − b` across matching tables.
pub fn max_table_difference(a: &TransmissionTable, b: &TransmissionTable) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bathmodel::PseudomodeBath;
    use crate::pronyfit::linspace;

    fn single_site(e0: f64) -> CMatrix {
        CMatrix::from_element(1, 1, c64(e0, 0.0))
    }

    fn semicircle_shift(a: f64, d: f64, w: f64) -> f64 {
        let y = w / d;
        if y.abs() <= 1.0 {
            0.5 * a * y
        } else {
            0.5 * a * (y - y.signum() * (y * y - 1.0).sqrt())
        }
    }

    #[test]
    fn semicircle_level_shift_matches_closed_form() {
        let m = SpectralModel::semi_elliptical(1.0).unwrap();
        for w in [-3.0, -1.0, -0.5, 0.0, 0.3, 0.999, 2.0] {
            let u = level_shift(&m, w).unwrap()[(0, 0)];
            let tol = if w.abs() == 1.0 { 1e-7 } else { 1e-9 };
            assert!((u - semicircle_shift(1.0, 1.0, w)).abs() < tol, "{w}: {u}");
        }
    }

    #[test]
    fn flat_window_level_shift() {
        let m = SpectralModel::flat_window(2.0, -1.0, 3.0).unwrap();
        for w in [-2.0, 0.0, 1.0, 2.5, 5.0] {
            let u = level_shift(&m, w).unwrap()[(0, 0)];
            let want = 2.0 / (2.0 * PI) * ((w + 1.0f64) / (w - 3.0)).abs().ln();
            assert!((u - want).abs() < 1e-9, "{w}: {u} vs {want}");
        }
        let sym = SpectralModel::flat_window(1.0, -1.0, 1.0).unwrap();
        assert!(level_shift(&sym, 0.0).unwrap()[(0, 0)].abs() < 1e-14);
    }

    #[test]
    fn lorentzian_level_shift() {
        let (a, c, g) = (0.7, 0.4, 0.9);
        let m = SpectralModel::lorentzians(&[(a, c, g)]).unwrap();
        for w in [-1.0, 0.4, 2.0] {
            let x = w - c;
            let want = a * x / (x * x + 0.25 * g * g);
            assert!((level_shift(&m, w).unwrap()[(0, 0)] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn resonant_level_is_transparent() {
        let wide = SpectralModel::flat_window(0.5, -50.0, 50.0).unwrap();
        let setup = ScatterSetup::new(
            single_site(0.0),
            vec![
                LabeledBath { label: "L".into(), bath: BathDescription::Model(wide.clone()) },
                LabeledBath { label: "R".into(), bath: BathDescription::Model(wide) },
            ],
        )
        .unwrap();
        let t = true_transmission(&setup, &[0.0, 0.3]).unwrap();
        let lr = t.entry("L", "R").unwrap();
        assert!((lr[0] - 1.0).abs() < 1e-6, "{}", lr[0]);
        let rl = t.entry("R", "L").unwrap();
        assert!((lr[1] - rl[1]).abs() < 1e-12);
    }

    fn two_bath_pseudomodes() -> ScatterSetup {
        let l = PseudomodeBath::new(
            CMatrix::from_row_slice(2, 2, &[c64(0.3, 0.0), c64(0.2, 0.1), c64(0.2, -0.1), c64(-0.5, 0.0)]),
            vec![0.4, 0.9],
            CMatrix::from_row_slice(2, 2, &[c64(0.3, 0.1), c64(0.1, 0.0), c64(0.2, 0.0), c64(-0.4, 0.2)]),
        )
        .unwrap();
        let r = PseudomodeBath::new(
            CMatrix::from_row_slice(1, 1, &[c64(0.8, 0.0)]),
            vec![0.6],
            CMatrix::from_row_slice(1, 2, &[c64(0.5, 0.0), c64(0.2, -0.3)]),
        )
        .unwrap();
        let h = CMatrix::from_row_slice(2, 2, &[c64(0.1, 0.0), c64(0.3, 0.2), c64(0.3, -0.2), c64(-0.2, 0.0)]);
        ScatterSetup::new(
            h,
            vec![
                LabeledBath { label: "L".into(), bath: BathDescription::Pseudomode(l) },
                LabeledBath { label: "R".into(), bath: BathDescription::Pseudomode(r) },
            ],
        )
        .unwrap()
    }

    #[test]
    fn block_identity_matches_full_inverse() {
        let s = two_bath_pseudomodes();
        let baths = s.pseudomodes().unwrap();
        for w in [-1.0, 0.05, 0.7] {
            let full = inverse(&extended_matrix(&s.h_s, &baths, w)).unwrap();
            let blocks = bath_greens_blocks(&s.h_s, &baths, w).unwrap();
            let nb = blocks.nrows();
            assert!((full.view((0, 0), (nb, nb)) - &blocks).map(|z| z.norm()).max() < 1e-12);
        }
    }

    #[test]
    fn residual_aggregation_matches_effective() {
        let s = two_bath_pseudomodes();
        let grid = linspace(-2.0, 2.0, 41);
        let ext = extended_transmission(&s, &grid).unwrap();
        let eff = effective_transmission(&s, &grid).unwrap();
        assert!(eff.identity_residual < 1e-11, "{}", eff.identity_residual);
        let agg = ext.aggregate(0, 1);
        let lr = eff.table.entry("L", "R").unwrap();
        for (a, b) in agg.iter().zip(&lr) {
            assert!((a - b).abs() < 1e-12);
            assert!(*b >= -1e-12);
        }
        let rl = eff.table.entry("R", "L").unwrap();
        for (a, b) in lr.iter().zip(&rl) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_bath_carries_nothing() {
        let mut s = two_bath_pseudomodes();
        if let BathDescription::Pseudomode(b) = &s.baths[1].bath {
            let zero = PseudomodeBath::new(b.lambda().clone(), b.gamma().to_vec(), CMatrix::zeros(1, 2)).unwrap();
            s.baths[1].bath = BathDescription::Pseudomode(zero);
        }
        let ext = extended_transmission(&s, &[0.2]).unwrap();
        assert!(ext.aggregate(0, 1)[0].abs() < 1e-15);
    }

    #[test]
    fn lorentzian_baths_match_pseudomodes() {
        let make = |a: f64, c: f64, g: f64| {
            (
                SpectralModel::lorentzians(&[(a, c, g)]).unwrap(),
                PseudomodeBath::diagonal(&[(c, g, c64(a.sqrt(), 0.0))]).unwrap(),
            )
        };
        let (ml, pl) = make(0.3, -0.2, 0.5);
        let (mr, pr) = make(0.5, 0.4, 0.8);
        let h = single_site(0.1);
        let tru = ScatterSetup::new(
            h.clone(),
            vec![
                LabeledBath { label: "L".into(), bath: BathDescription::Model(ml) },
                LabeledBath { label: "R".into(), bath: BathDescription::Model(mr) },
            ],
        )
        .unwrap();
        let pm = ScatterSetup::new(
            h,
            vec![
                LabeledBath { label: "L".into(), bath: BathDescription::Pseudomode(pl) },
                LabeledBath { label: "R".into(), bath: BathDescription::Pseudomode(pr) },
            ],
        )
        .unwrap();
        let grid = linspace(-3.0, 3.0, 61);
        let a = true_transmission(&tru, &grid).unwrap();
        let b = effective_transmission(&pm, &grid).unwrap();
        assert!(max_table_difference(&a, &b.table) < 1e-12);
    }

    #[test]
    fn setup_validation() {
        let m = SpectralModel::semi_elliptical(1.0).unwrap();
        let one = vec![LabeledBath { label: "L".into(), bath: BathDescription::Model(m.clone()) }];
        assert!(ScatterSetup::new(single_site(0.0), one).is_err());
        let h = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
        let two = vec![
            LabeledBath { label: "L".into(), bath: BathDescription::Model(m.clone()) },
            LabeledBath { label: "R".into(), bath: BathDescription::Model(m) },
        ];
        assert!(ScatterSetup::new(h, two).is_err());
    }

    #[test]
    fn setup_serde_round_trip() {
        let s = two_bath_pseudomodes();
        let js = serde_json::to_string(&s).unwrap();
        let back: ScatterSetup = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
    }
}
