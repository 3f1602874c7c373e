//! Command pipelines. Every run writes its artifacts plus `report.json` into the output directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use pseudomode::bathmodel::{memory_kernel_with, ExpFit, PseudomodeBath, SpectralModel};
use pseudomode::forward::{decompose_terms, effective_kernel, effective_spectral_density_grid};
use pseudomode::inversion::{invert_with, positivity_registry, positivity_search, InversionChoices, InversionResult, SearchOptions};
use pseudomode::linalg::{CMatrix, RMatrix};
use pseudomode::manymode::{eta1, eta1_series_with_tail, eta2, eta2_series_with_tail, tiling_error_profile, tiling_registry, TilingSpec};
use pseudomode::pronyfit::{default_score_grid, fit_registry, linspace, FitContext};
use pseudomode::repro::{fig2, fig3, fig4, fig4_lorentzian_model, DataTable};
use pseudomode::scattering::{
    effective_transmission, extended_transmission, max_table_difference, true_transmission, BathDescription,
    ScatterSetup, TransmissionTable,
};
use pseudomode::serial::complex_rows;

use crate::config::{Command, JobConfig};
use crate::failure::Failure;

#[derive(Serialize)]
struct Report {
    version: u32,
    command: &'static str,
    seed: u64,
    status: &'static str,
    exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    summary: Map<String, Value>,
    notes: Vec<String>,
    warnings: Vec<String>,
    artifacts: Vec<String>,
}

struct Session {
    out: PathBuf,
    module: &'static str,
    report: Report,
}

impl Session {
    fn lib(&self) -> impl Fn(pseudomode::Error) -> Failure {
        let module = self.module;
        move |e| Failure::from_library(module, e)
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.out.join(name);
        let f = File::create(&path).map_err(|e| Failure::io(self.module, &format!("cannot write {}", path.display()), e))?;
        self.report.artifacts.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn table(&mut self, name: &str, t: &DataTable) -> Result<(), Failure> {
        let w = self.create(name)?;
        t.write_csv(w).map_err(self.lib())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let w = self.create(name)?;
        serde_json::to_writer_pretty(w, value).map_err(|e| Failure::io(self.module, name, e))
    }

    fn summary(&mut self, key: &str, value: impl Serialize) {
        self.report.summary.insert(key.to_string(), json!(value));
    }
}

pub fn run(cfg: &JobConfig) -> Result<String, Failure> {
    let command = cfg.command.expect("validated config has a command");
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)
        .map_err(|e| Failure::config(format!("cannot create output directory {}: {e}", out.display())))?;
    let mut s = Session {
        out,
        module: command.module(),
        report: Report {
            version: cfg.version,
            command: command.name(),
            seed: cfg.seed.unwrap_or(0),
            status: "ok",
            exit_code: 0,
            error: None,
            summary: Map::new(),
            notes: Vec::new(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
        },
    };
    let result = dispatch(command, cfg, &mut s);
    if let Err(f) = &result {
        s.report.status = "failed";
        s.report.exit_code = f.exit_code();
        s.report.error = Some(f.to_string());
    }
    for w in &s.report.warnings {
        eprintln!("warning: {w}");
    }
    let path = s.out.join("report.json");
    let file = File::create(&path).map_err(|e| Failure::io(s.module, "cannot write report.json", e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &s.report).map_err(|e| Failure::io(s.module, "report.json", e))?;
    result
}

fn dispatch(command: Command, cfg: &JobConfig, s: &mut Session) -> Result<String, Failure> {
    match command {
        Command::Jeff => jeff(cfg, s),
        Command::Kernel => kernel(cfg, s),
        Command::Fit => fit(cfg, s),
        Command::Invert => invert(cfg, s),
        Command::Tile => tile(cfg, s),
        Command::Eta => eta(cfg, s),
        Command::Transmit => transmit(cfg, s),
        Command::ReproduceFig2 => reproduce_fig2(cfg, s),
        Command::ReproduceFig3 => reproduce_fig3(cfg, s),
        Command::ReproduceFig4 => reproduce_fig4(cfg, s),
    }
}

// ---------------------------------------------------------------------------
// Inputs

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let f = File::open(path).map_err(|e| Failure::config(format!("cannot open {what} {}: {e}", path.display())))?;
    serde_json::from_reader(std::io::BufReader::new(f))
        .map_err(|e| Failure::config(format!("{what} {}: {e}", path.display())))
}

fn load_model(cfg: &JobConfig) -> Result<SpectralModel, Failure> {
    if let Some(m) = &cfg.model {
        return Ok(m.clone());
    }
    if let Some(p) = &cfg.inputs.model_csv {
        let f = File::open(p).map_err(|e| Failure::config(format!("cannot open {}: {e}", p.display())))?;
        return SpectralModel::tabulated_from_csv(f).map_err(|e| Failure::config(format!("{}: {e}", p.display())));
    }
    SpectralModel::semi_elliptical(1.0).map_err(|e| Failure::config(e.to_string()))
}

fn load_bath(cfg: &JobConfig) -> Result<Option<PseudomodeBath>, Failure> {
    if let Some(b) = &cfg.bath {
        return Ok(Some(b.clone()));
    }
    cfg.inputs.bath.as_deref().map(|p| read_json(p, "bath")).transpose()
}

fn load_setup(cfg: &JobConfig) -> Result<ScatterSetup, Failure> {
    let setup = match (&cfg.setup, &cfg.inputs.setup) {
        (Some(s), _) => s.clone(),
        (None, Some(p)) => read_json(p, "setup")?,
        (None, None) => return Err(Failure::config("transmit needs a setup (`setup` table or `inputs.setup` file)")),
    };
    setup.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(setup)
}

fn omega_grid(cfg: &JobConfig, default: impl FnOnce() -> Vec<f64>) -> Vec<f64> {
    cfg.omega.map(|g| g.points()).unwrap_or_else(default)
}

/// A grid wide enough to show every mode of the bath.
fn bath_grid(bath: &PseudomodeBath) -> Vec<f64> {
    let w = bath.w();
    let eig = w.clone().eigenvalues().map(|v| v.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
    let reach = eig.unwrap_or_else(|| w.norm()) + 10.0 * bath.gamma().iter().fold(0.0f64, |a, &b| a.max(b.abs())) + 1.0;
    linspace(-reach, reach, 1001)
}

fn matrix_columns(prefix: &str, dim: usize) -> Vec<String> {
    (0..dim).flat_map(|i| (0..dim).map(move |j| format!("{prefix}_{}_{}", i + 1, j + 1))).collect()
}

fn push_real(row: &mut Vec<f64>, m: &RMatrix) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            row.push(m[(i, j)]);
        }
    }
}

fn push_complex(row: &mut Vec<f64>, m: &CMatrix) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            row.push(m[(i, j)].re);
            row.push(m[(i, j)].im);
        }
    }
}

// ---------------------------------------------------------------------------
// Pipelines

fn jeff(cfg: &JobConfig, s: &mut Session) -> Result<String, Failure> {
    let bath = load_bath(cfg)?.ok_or_else(|| Failure::config("jeff needs a bath (`bath` table or `inputs.bath` file)"))?;
    let omegas = omega_grid(cfg, || bath_grid(&bath));
    let values = effective_spectral_density_grid(&bath, &omegas).map_err(s.lib())?;
    let d = bath.dim();
    let mut columns = vec!["omega".to_string()];
    columns.extend(matrix_columns("jeff", d));
    let model = cfg.model.clone();
    if model.is_some() {
        columns.extend(matrix_columns("j", d));
    }
    let mut max_diff: f64 = 0.0;
    let rows = omegas
        .iter()
        .zip(&values)
        .map(|(&w, v)| {
            let mut r = vec![w];
            push_real(&mut r, v);
            if let Some(m) = &model {
                let j = m.density(w);
                max_diff = max_diff.max((&j - v).amax());
                push_real(&mut r, &j);
            }
            r
        })
        .collect();
    s.table("jeff.csv", &DataTable { columns, rows })?;
    let class = decompose_terms(&bath).map_err(s.lib())?.classification.name();
    s.summary("modes", bath.n_modes());
    s.summary("classification", class);
    s.summary("min_gamma", bath.min_gamma());
    s.summary("physical", bath.is_physical());
    let mut line = format!("jeff: {} modes ({class}), min gamma {:.6e}", bath.n_modes(), bath.min_gamma());
    if model.is_some() {
        s.summary("max_abs_difference_to_model", max_diff);
        line.push_str(&format!(", max |J_eff - J| {max_diff:.3e}"));
    }
    Ok(line)
}

fn kernel(cfg: &JobConfig, s: &mut Session) -> Result<String, Failure> {
    let times = cfg.time.map(|g| g.points()).unwrap_or_else(|| linspace(0.0, 20.0, 401));
    let (values, source): (Vec<CMatrix>, &str) = match load_bath(cfg)? {
        Some(b) => (times.par_iter().map(|&t| effective_kernel(&b, t)).collect(), "bath"),
        None => {
            let model = load_model(cfg)?;
            let tol = cfg.tolerances;
            let v = times
                .par_iter()
                .map(|&t| memory_kernel_with(&model, t, &tol))
                .collect::<pseudomode::Result<Vec<_>>>()
                .map_err(s.lib())?;
            (v, "model")
        }
    };
    let d = values[0].nrows();
    let mut columns = vec!["t".to_string()];
    for c in matrix_columns("chi", d) {
        columns.push(format!("re_{c}"));
        columns.push(format!("im_{c}"));
    }
    let rows = times
        .iter()
        .zip(&values)
        .map(|(&t, v)| {
            let mut r = vec![t];
            push_complex(&mut r, v);
            r
        })
        .collect();
    s.table("kernel.csv", &DataTable { columns, rows })?;
    let chi0 = values[0].trace();
    s.summary("source", source);
    s.summary("chi0", [chi0.re, chi0.im]);
    Ok(format!("kernel: {} samples from the {source}, tr chi(t0) = {:.6e}{:+.6e}i", times.len(), chi0.re, chi0.im))
}

fn fit(cfg: &JobConfig, s: &mut Session) -> Result<String, Failure> {
    let model = load_model(cfg)?;
    let registry = fit_registry();
    let strategy = registry.get(&cfg.fit.strategy).map_err(s.lib())?;
    if cfg.fit.modes == 0 {
        return Err(Failure::config("fit needs modes >= 1"));
    }
    let omegas = omega_grid(cfg, || default_score_grid(&model, 1001));
    let ctx = FitContext {
        omegas: omegas.clone(),
        seed: cfg.seed.unwrap_or(0),
        tolerances: cfg.tolerances,
        dense_windows: cfg.fit.dense_windows,
    };
    let outcome = strategy.fit(&model, cfg.fit.modes, &ctx).map_err(s.lib())?;
    let w = s.create("fit.csv")?;
    outcome.fit.write_table(w).map_err(s.lib())?;
    s.table("fit_density.csv", &density_table(&model, &outcome.fit, &omegas))?;
    s.report.notes.extend(outcome.notes.iter().cloned());
    for n in &outcome.notes {
        if n.contains("budget exhausted") {
            s.report.warnings.push(n.clone());
        }
    }
    s.summary("strategy", strategy.name());
    s.summary("modes", cfg.fit.modes);
    s.summary("l2_residual", outcome.score);
    Ok(format!("fit: {} with {} modes, L2 residual {:.6e}", strategy.name(), cfg.fit.modes, outcome.score))
}

fn density_table(model: &SpectralModel, fit: &ExpFit, omegas: &[f64]) -> DataTable {
    let d = fit.dim;
    let mut columns = vec!["omega".to_string()];
    columns.extend(matrix_columns("j", d));
    columns.extend(matrix_columns("j_fit", d));
    let rows = omegas
        .iter()
        .map(|&w| {
            let mut r = vec![w];
            push_real(&mut r, &model.density(w));
            push_real(&mut r, &fit.density(w));
            r
        })
        .collect();
    DataTable { columns, rows }
}

#[derive(Serialize)]
struct InversionReport<'a> {
    fit: &'a ExpFit,
    choices: Value,
    lambda: Vec<Vec<[f64; 2]>>,
    gamma: &'a [f64],
    zeta: Vec<Vec<[f64; 2]>>,
    diagnostics: &'a pseudomode::inversion::InversionDiagnostics,
}

fn write_inversion(s: &mut Session, fit: &ExpFit, r: &InversionResult, choices: Value) -> Result<(), Failure> {
    let report = InversionReport {
        fit,
        choices,
        lambda: complex_rows(r.bath.lambda()),
        gamma: r.bath.gamma(),
        zeta: complex_rows(r.bath.zeta()),
        diagnostics: &r.diagnostics,
    };
    s.json("inversion.json", &report)?;
    s.json("bath.json", &r.bath)?;
    s.summary("min_gamma", r.diagnostics.min_gamma);
    s.summary("kappa_error", r.diagnostics.kappa_error);
    s.summary("exponent_error", r.diagnostics.exponent_error);
    Ok(())
}

fn invert(cfg: &JobConfig, s: &mut Session) -> Result<String, Failure> {
    let path = cfg.inputs.fit_table.as_deref().ok_or_else(|| Failure::config("invert needs `inputs.fit_table`"))?;
    let f = File::open(path).map_err(|e| Failure::config(format!("cannot open {}: {e}", path.display())))?;
    let fit = ExpFit::read_table(f).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let search = cfg.invert.search.as_str();
    let strategy = match search {
        "none" => None,
        name => Some(positivity_registry().get(name).map_err(s.lib())?.name()),
    };
    let direct = invert_with(&fit, &InversionChoices::default(), &cfg.tolerances).map_err(s.lib())?;
    let s_rows = |r: &InversionResult| complex_rows(&r.s);
    if direct.diagnostics.positive {
        let choices = json!({ "method": "default", "s": s_rows(&direct) });
        write_inversion(s, &fit, &direct, choices)?;
        return Ok(format!(
            "invert: {} modes, min gamma {:.6e}, kappa error {:.3e}",
            fit.terms.len(),
            direct.diagnostics.min_gamma,
            direct.diagnostics.kappa_error
        ));
    }
    let Some(name) = strategy else {
        let choices = json!({ "method": "default", "s": s_rows(&direct) });
        write_inversion(s, &fit, &direct, choices)?;
        return Err(Failure::Infeasible(format!(
            "default choice gives min gamma {:.6e} and the positivity search is disabled",
            direct.diagnostics.min_gamma
        )));
    };
    s.report.notes.push(format!("default choice gives min gamma {:.6e}; searching with {name}", direct.diagnostics.min_gamma));
    let registry = positivity_registry();
    let opts = SearchOptions { budget: cfg.invert.budget, seed: cfg.seed.unwrap_or(0) };
    match positivity_search(&fit, registry.get(name).map_err(s.lib())?, &opts) {
        Ok(r) => {
            let choices = json!({ "method": name, "evaluations": opts.budget, "s": s_rows(&r) });
            write_inversion(s, &fit, &r, choices)?;
            Ok(format!("invert: {} modes via {name} search, min gamma {:.6e}", fit.terms.len(), r.diagnostics.min_gamma))
        }
        Err(fail) => {
            let best = fail.best.as_ref().unwrap_or(&direct);
            let choices = json!({ "method": name, "evaluations": fail.evaluations, "s": s_rows(best) });
            write_inversion(s, &fit, best, choices)?;
            s.report.warnings.push("bath.json holds the best non-physical candidate".into());
            Err(Failure::Infeasible(fail.to_string()))
        }
    }
}

fn tile(cfg: &JobConfig, s: &mut Session) -> Result<String, Failure> {
    let model = load_model(cfg)?;
    let registry = tiling_registry();
    let strategy = registry.get(&cfg.tile.variant).map_err(s.lib())?;
    let (lo, hi) = model.support().unwrap_or_else(|| model.frequency_window());
    let spec = TilingSpec::new(
        cfg.tile.omega_min.unwrap_or(lo),
        cfg.tile.omega_max.unwrap_or(hi),
        cfg.tile.n,
        strategy.variant(),
    )
    .map_err(s.lib())?;
    let bath = strategy.build(&model, &spec).map_err(s.lib())?;
    s.json("bath.json", &bath)?;
    let omegas = omega_grid(cfg, || {
        let pad = 0.25 * (spec.omega_max - spec.omega_min);
        linspace(spec.omega_min - pad, spec.omega_max + pad, 2001)
    });
    let profile = tiling_error_profile(&model, &spec, &omegas).map_err(s.lib())?;
    let rows = profile.iter().map(|p| vec![p.omega, p.j, p.j_eff, p.ratio, p.eta_pred]).collect();
    s.table(
        "profile.csv",
        &DataTable { columns: ["omega", "j", "j_eff", "ratio", "eta_pred"].iter().map(|c| c.to_string()).collect(), rows },
    )?;
    let interior = spec.interior(5e-3);
    let energies = spec.energies();
    let mut probe: Vec<f64> = interior.iter().map(|&k| energies[k]).collect();
    let middle = energies[energies.len() / 2];
    probe.push(middle);
    let at_centers = tiling_error_profile(&model, &spec, &probe).map_err(s.lib())?;
    let target = spec.eta(0.0);
    let middle_ratio = at_centers.last().map_or(f64::NAN, |p| p.ratio);
    let dev = at_centers[..interior.len()].iter().map(|p| (p.ratio - target).abs()).fold(0.0, f64::max);
    s.summary("variant", strategy.name());
    s.summary("modes", bath.n_modes());
    s.summary("eta_at_centers", target);
    s.summary("middle_center_ratio", middle_ratio);
    s.summary("interior_centers", interior.len());
    if !interior.is_empty() {
        s.summary("max_interior_deviation", dev);
    }
    Ok(format!(
        "tile: {} with {} modes, J_eff/J at the middle center {middle_ratio:.6} (infinite tiling {target:.6}), {} interior centers",
        strategy.name(),
        bath.n_modes(),
        interior.len()
    ))
}

fn eta(cfg: &JobConfig, s: &mut Session) -> Result<String, Failure> {
    let (closed, series): (fn(f64) -> f64, fn(f64, usize) -> f64) = match cfg.eta.which {
        1 => (eta1, eta1_series_with_tail),
        2 => (eta2, eta2_series_with_tail),
        w => return Err(Failure::config(format!("eta --which must be 1 or 2, got {w}"))),
    };
    if cfg.eta.r.is_empty() {
        return Err(Failure::config("eta needs at least one r"));
    }
    let rows: Vec<Vec<f64>> = cfg.eta.r.iter().map(|&r| vec![r, closed(r), series(r, cfg.eta.cutoff)]).collect();
    let worst = rows.iter().map(|r| (r[1] - r[2]).abs()).fold(0.0, f64::max);
    let line = rows
        .iter()
        .map(|r| format!("eta{}({}) = {:.4}", cfg.eta.which, r[0], r[1]))
        .collect::<Vec<_>>()
        .join(", ");
    s.table("eta.csv", &DataTable { columns: vec!["r".into(), "eta".into(), "series".into()], rows })?;
    s.summary("which", cfg.eta.which);
    s.summary("values", cfg.eta.r.iter().map(|&r| closed(r)).collect::<Vec<_>>());
    s.summary("max_series_difference", worst);
    Ok(line)
}

fn all_pseudomode(setup: &ScatterSetup) -> bool {
    setup.baths.iter().all(|b| matches!(b.bath, BathDescription::Pseudomode(_)))
}

/// Direct transmission for spectral-model baths, the effective formula for pseudomode baths.
fn transmission_of(setup: &ScatterSetup, omegas: &[f64], s: &Session) -> Result<TransmissionTable, Failure> {
    if all_pseudomode(setup) {
        Ok(effective_transmission(setup, omegas).map_err(s.lib())?.table)
    } else {
        true_transmission(setup, omegas).map_err(s.lib())
    }
}

fn transmit(cfg: &JobConfig, s: &mut Session) -> Result<String, Failure> {
    let setup = load_setup(cfg)?;
    let omegas = omega_grid(cfg, || linspace(-5.0, 5.0, 1001));
    let mut line = format!("transmit: {} baths on {} frequencies", setup.baths.len(), omegas.len());
    let t = if all_pseudomode(&setup) {
        let eff = effective_transmission(&setup, &omegas).map_err(s.lib())?;
        let ext = extended_transmission(&setup, &omegas).map_err(s.lib())?;
        s.table_write("residual.csv", |w| ext.write_csv(w))?;
        let mut agg: f64 = 0.0;
        for a in 0..setup.baths.len() {
            for b in 0..setup.baths.len() {
                if a != b {
                    for (x, m) in ext.aggregate(a, b).iter().zip(&eff.table.values) {
                        agg = agg.max((x - m[(a, b)]).abs());
                    }
                }
            }
        }
        s.summary("broadening_identity_residual", eff.identity_residual);
        s.summary("max_abs_residual_aggregation_error", agg);
        line.push_str(&format!(", residual aggregation error {agg:.3e}"));
        eff.table
    } else {
        true_transmission(&setup, &omegas).map_err(s.lib())?
    };
    s.table_write("transmission.csv", |w| t.write_csv(w))?;
    s.report.notes.extend(t.notes.iter().cloned());
    if let Some(p) = &cfg.inputs.reference {
        let reference: ScatterSetup = read_json(p, "reference setup")?;
        reference.validate().map_err(|e| Failure::config(e.to_string()))?;
        if reference.labels() != setup.labels() {
            return Err(Failure::config("reference setup must use the same bath labels"));
        }
        let tr = transmission_of(&reference, &omegas, s)?;
        s.table_write("reference.csv", |w| tr.write_csv(w))?;
        let diff = max_table_difference(&t, &tr);
        s.summary("max_abs_difference_to_reference", diff);
        line.push_str(&format!(", max |T - T_ref| {diff:.3e}"));
    }
    Ok(line)
}

impl Session {
    fn table_write(
        &mut self,
        name: &str,
        f: impl FnOnce(BufWriter<File>) -> pseudomode::Result<()>,
    ) -> Result<(), Failure> {
        let w = self.create(name)?;
        f(w).map_err(self.lib())
    }
}

fn reproduce_fig2(cfg: &JobConfig, s: &mut Session) -> Result<String, Failure> {
    let (tables, summary) = fig2(cfg.figure.modes, cfg.figure.points, cfg.seed.unwrap_or(0)).map_err(s.lib())?;
    s.table("fig2_true.csv", &tables.truth)?;
    s.table("fig2_diagonal.csv", &tables.diagonal)?;
    s.table("fig2_prony.csv", &tables.prony)?;
    if !summary.baseline_converged {
        s.report.warnings.push(format!(
            "diagonal baseline stopped at its budget after {} evaluations; its table is the best point found",
            summary.baseline_evaluations
        ));
    }
    s.report.summary.insert("fig2".into(), json!(summary));
    Ok(format!(
        "reproduce-fig2: {} modes, Prony L2 {:.6e}, diagonal L2 {:.6e}",
        summary.modes, summary.prony_l2, summary.baseline_l2
    ))
}

fn reproduce_fig3(cfg: &JobConfig, s: &mut Session) -> Result<String, Failure> {
    let n = cfg.figure.n.unwrap_or(100);
    let t = fig3(n, cfg.figure.points).map_err(s.lib())?;
    s.table("fig3.csv", &t)?;
    s.summary("modes", n);
    Ok(format!("reproduce-fig3: {n} modes, {} points", t.rows.len()))
}

fn reproduce_fig4(cfg: &JobConfig, s: &mut Session) -> Result<String, Failure> {
    let n = cfg.figure.n.unwrap_or(20);
    let semi = SpectralModel::semi_elliptical(1.0).map_err(s.lib())?;
    let t = fig4(&semi, (-1.0, 1.0), n, cfg.figure.points).map_err(s.lib())?;
    s.table("fig4_semicircle.csv", &t)?;
    let lor = fig4_lorentzian_model().map_err(s.lib())?;
    let t = fig4(&lor, lor.frequency_window(), n, cfg.figure.points).map_err(s.lib())?;
    s.table("fig4_lorentzians.csv", &t)?;
    s.summary("modes", n);
    s.summary("eta1", [eta1(0.0), eta1(0.5)]);
    s.summary("eta2", [eta2(0.0), eta2(0.5)]);
    Ok(format!("reproduce-fig4: {n} modes, eta1 in [{:.4}, {:.4}], eta2 in [{:.4}, {:.4}]", eta1(0.5), eta1(0.0), eta2(0.5), eta2(0.0)))
}
