//! Data tables for the figures: fit comparison, tiling oscillation and
//! infinite-mode error envelopes.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::bathmodel::{ExpFit, SpectralModel};
use crate::error::Result;
use crate::forward::Resolvent;
use crate::manymode::{build_tiling, eta1, eta2, TilingSpec, TilingVariant};
use crate::pronyfit::{
    default_window_grid, diagonal_baseline, linspace, optimize_window, BaselineOptions, WindowCandidate,
};
use crate::serial::format_number;
use crate::tolerance::Tolerances;

/// Named numeric columns, written as CSV.
#[derive(Clone, Debug, Default)]
pub struct DataTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DataTable {
    pub fn new(columns: &[&str]) -> Self {
        DataTable { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for r in &self.rows {
            out.write_record(r.iter().map(|v| format_number(*v)))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Fig2Summary {
    pub modes: usize,
    pub prony_l2: f64,
    pub baseline_l2: f64,
    pub window: WindowCandidate,
    pub baseline_converged: bool,
    pub baseline_evaluations: usize,
}

/// True density, diagonal baseline and Prony fit, the last two with one column per mode.
#[derive(Clone, Debug)]
pub struct Fig2Tables {
    pub truth: DataTable,
    pub diagonal: DataTable,
    pub prony: DataTable,
}

fn per_mode_table(fit: &ExpFit, omegas: &[f64]) -> DataTable {
    let mut columns = vec!["omega".to_string(), "j_fit".to_string()];
    columns.extend((0..fit.terms.len()).map(|k| format!("mode_{k}")));
    let rows = omegas
        .iter()
        .map(|&w| {
            let mut r = vec![w, fit.density(w)[(0, 0)]];
            r.extend(fit.terms.iter().map(|t| t.density(w)[(0, 0)]));
            r
        })
        .collect();
    DataTable { columns, rows }
}

/// Six-mode Prony fit of `√(1−ω²)` against the diagonal Lorentzian baseline on `[−1.5, 1.5]`.
pub fn fig2(modes: usize, points: usize, seed: u64) -> Result<(Fig2Tables, Fig2Summary)> {
    let model = SpectralModel::semi_elliptical(1.0)?;
    let omegas = linspace(-1.5, 1.5, points);
    let tol = Tolerances::default();
    let prony = optimize_window(&model, modes, &default_window_grid(&model, modes), &omegas, &tol)?;
    let base = diagonal_baseline(&model, modes, &omegas, &BaselineOptions { seed, ..Default::default() })?;
    let mut truth = DataTable::new(&["omega", "j"]);
    truth.rows = omegas.iter().map(|&w| vec![w, model.density(w)[(0, 0)]]).collect();
    let tables = Fig2Tables {
        truth,
        diagonal: per_mode_table(&base.fit, &omegas),
        prony: per_mode_table(&prony.fit, &omegas),
    };
    let summary = Fig2Summary {
        modes,
        prony_l2: prony.score,
        baseline_l2: base.score,
        window: prony.window,
        baseline_converged: base.converged,
        baseline_evaluations: base.evaluations,
    };
    Ok((tables, summary))
}

/// Diagonal tiling of the semi-elliptical density with `n` modes on `[−1, 1]`.
pub fn fig3(n: usize, points: usize) -> Result<DataTable> {
    let model = SpectralModel::semi_elliptical(1.0)?;
    let spec = TilingSpec::new(-1.0, 1.0, n, TilingVariant::Lorentzian)?;
    let bath = build_tiling(&model, &spec)?;
    let res = Resolvent::new(&bath);
    let omegas = linspace(-1.5, 1.5, points);
    let rows: Vec<Vec<f64>> = omegas
        .par_iter()
        .map(|&w| Ok(vec![w, model.density(w)[(0, 0)], res.density(w)?[(0, 0)]]))
        .collect::<Result<_>>()?;
    Ok(DataTable { columns: vec!["omega".into(), "j".into(), "j_eff".into()], rows })
}

/// The two-Lorentzian density of the right-hand panel.
pub fn fig4_lorentzian_model() -> Result<SpectralModel> {
    SpectralModel::lorentzians(&[(0.6, -0.6, 0.5), (0.4, 0.7, 0.3)])
}

/// Both tilings with `n` modes next to `J·η(0)` and `J·η(½)`.
pub fn fig4(model: &SpectralModel, window: (f64, f64), n: usize, points: usize) -> Result<DataTable> {
    let lor = build_tiling(model, &TilingSpec::new(window.0, window.1, n, TilingVariant::Lorentzian)?)?;
    let sq = build_tiling(model, &TilingSpec::new(window.0, window.1, n, TilingVariant::SquaredLorentzian)?)?;
    let (rl, rs) = (Resolvent::new(&lor), Resolvent::new(&sq));
    let pad = 0.1 * (window.1 - window.0);
    let omegas = linspace(window.0 - pad, window.1 + pad, points);
    let (e10, e1h, e20, e2h) = (eta1(0.0), eta1(0.5), eta2(0.0), eta2(0.5));
    let rows: Vec<Vec<f64>> = omegas
        .par_iter()
        .map(|&w| {
            let j = model.density(w)[(0, 0)];
            Ok(vec![w, j, rl.density(w)?[(0, 0)], rs.density(w)?[(0, 0)], j * e10, j * e1h, j * e20, j * e2h])
        })
        .collect::<Result<_>>()?;
    Ok(DataTable {
        columns: ["omega", "j", "j_eff_lorentzian", "j_eff_squared", "eta1_upper", "eta1_lower", "eta2_upper", "eta2_lower"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    #[test]
    fn per_mode_columns_sum_to_fit() {
        let fit = ExpFit::scalar(&[(c64(0.5, 0.2), -0.4, 0.3), (c64(0.5, -0.2), 0.4, 0.6)]);
        let t = per_mode_table(&fit, &[-1.0, 0.0, 0.7]);
        for r in &t.rows {
            assert!((r[2] + r[3] - r[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn fig3_oscillates_about_target() {
        let t = fig3(100, 301).unwrap();
        let j = t.column("j").unwrap();
        let je = t.column("j_eff").unwrap();
        let center = 150;
        assert!((je[center] / j[center] - 1.0).abs() > 0.02);
    }

    #[test]
    fn fig4_columns() {
        let m = SpectralModel::semi_elliptical(1.0).unwrap();
        let t = fig4(&m, (-1.0, 1.0), 20, 11).unwrap();
        assert_eq!(t.columns.len(), 8);
        assert_eq!(t.rows.len(), 11);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("omega,j,"));
    }
}
