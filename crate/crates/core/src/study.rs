//! Configuration, refinement studies and file output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{case_circle, case_ring, compute_eoc, error_norms, ErrorReport, ManufacturedCase};
use crate::assembly::{assemble_blocks, build_saddle_system, constant_pressure, Discretization, SaddleSystem, SystemMode};
use crate::correction::TaylorConfig;
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::mesh::{mesh_at_level, Mesh};
use crate::quadrature::triangle_quadrature;
use crate::solver::{postprocess_pressure, solve, Solution, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainChoice {
    Circle,
    Ring,
}

impl DomainChoice {
    pub fn case(self) -> Box<dyn ManufacturedCase> {
        match self {
            Self::Circle => Box::new(case_circle()),
            Self::Ring => Box::new(case_ring()),
        }
    }
}

impl std::str::FromStr for DomainChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "circle" | "disk" => Ok(Self::Circle),
            "ring" => Ok(Self::Ring),
            other => Err(Error::Config(format!("unknown domain `{other}` (expected circle or ring)"))),
        }
    }
}

fn parse_mode(s: &str) -> Result<SystemMode> {
    match s.trim() {
        "corrected" => Ok(SystemMode::Corrected),
        "uncorrected-strong" | "uncorrected" => Ok(SystemMode::UncorrectedStrong),
        other => Err(Error::Config(format!(
            "unknown mode `{other}` (expected corrected or uncorrected-strong)"
        ))),
    }
}

/// Parses `A..B` (inclusive) or a single level.
pub fn parse_levels(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("invalid level range `{s}` (expected A..B)"));
    let (a, b) = match s.trim().split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let l = s.trim().parse().map_err(|_| bad())?;
            (l, l)
        }
    };
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

/// Unvalidated settings from a config file or command-line flags.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    pub domain: Option<String>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub mode: Option<String>,
    pub levels: Option<String>,
    pub report: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub export_fields: Option<PathBuf>,
    pub dump_system: Option<PathBuf>,
    pub seed: Option<u64>,
    pub parallel: Option<bool>,
    pub stiffness_quadrature: Option<usize>,
    pub accurate_quadrature: Option<usize>,
    pub residual_tol: Option<f64>,
    pub force_iterative: Option<bool>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid value `{value}` for `{key}`"),
    })
}

impl RawConfig {
    /// Parses `key = value` lines. Blank lines and `#` comments are ignored.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key.replace('-', "_").as_str() {
                "domain" => c.domain = Some(value.into()),
                "k" => c.k = Some(parse_value(key, value, line)?),
                "m" => c.m = Some(parse_value(key, value, line)?),
                "mode" => c.mode = Some(value.into()),
                "levels" => c.levels = Some(value.into()),
                "report" => c.report = Some(value.into()),
                "json" => c.json = Some(value.into()),
                "export_fields" => c.export_fields = Some(value.into()),
                "dump_system" => c.dump_system = Some(value.into()),
                "seed" => c.seed = Some(parse_value(key, value, line)?),
                "parallel" => c.parallel = Some(parse_value(key, value, line)?),
                "stiffness_quadrature" => c.stiffness_quadrature = Some(parse_value(key, value, line)?),
                "accurate_quadrature" => c.accurate_quadrature = Some(parse_value(key, value, line)?),
                "residual_tol" => c.residual_tol = Some(parse_value(key, value, line)?),
                "force_iterative" => c.force_iterative = Some(parse_value(key, value, line)?),
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        Ok(c)
    }

    /// Settings in `over` take precedence.
    pub fn merge(self, over: Self) -> Self {
        Self {
            domain: over.domain.or(self.domain),
            k: over.k.or(self.k),
            m: over.m.or(self.m),
            mode: over.mode.or(self.mode),
            levels: over.levels.or(self.levels),
            report: over.report.or(self.report),
            json: over.json.or(self.json),
            export_fields: over.export_fields.or(self.export_fields),
            dump_system: over.dump_system.or(self.dump_system),
            seed: over.seed.or(self.seed),
            parallel: over.parallel.or(self.parallel),
            stiffness_quadrature: over.stiffness_quadrature.or(self.stiffness_quadrature),
            accurate_quadrature: over.accurate_quadrature.or(self.accurate_quadrature),
            residual_tol: over.residual_tol.or(self.residual_tol),
            force_iterative: over.force_iterative.or(self.force_iterative),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub domain: DomainChoice,
    pub k: usize,
    pub m: usize,
    pub mode: SystemMode,
    pub first_level: usize,
    pub last_level: usize,
    pub stiffness_quadrature: Option<usize>,
    pub accurate_quadrature: Option<usize>,
    pub solver: SolverOptions,
    pub report: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub export_fields: Option<PathBuf>,
    pub dump_system: Option<PathBuf>,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            domain: DomainChoice::Circle,
            k: 1,
            m: 1,
            mode: SystemMode::Corrected,
            first_level: 1,
            last_level: 4,
            stiffness_quadrature: None,
            accurate_quadrature: None,
            solver: SolverOptions::default(),
            report: None,
            json: None,
            export_fields: None,
            dump_system: None,
            seed: 0,
            parallel: false,
        }
    }
}

/// Smallest Taylor order covered by the optimal error estimate.
pub fn taylor_order_lower_bound(k: usize) -> f64 {
    (k as f64 / 2.0 - 0.75).max(0.0)
}

impl StudyConfig {
    /// Validates raw settings. Returns the config and any warnings.
    pub fn from_raw(raw: RawConfig) -> Result<(Self, Vec<String>)> {
        let d = Self::default();
        let k = raw.k.unwrap_or(d.k);
        if k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let m = raw.m.unwrap_or(k);
        if m > k {
            return Err(Error::Config(format!("m = {m} exceeds k = {k}")));
        }
        let mut warnings = Vec::new();
        let bound = taylor_order_lower_bound(k);
        if (m as f64) < bound {
            warnings.push(format!(
                "m = {m} is below max(0, k/2 - 3/4) = {bound}; convergence may be suboptimal"
            ));
        }
        let domain = raw.domain.as_deref().map(str::parse).transpose()?.unwrap_or(d.domain);
        let mode = raw.mode.as_deref().map(parse_mode).transpose()?.unwrap_or(d.mode);
        if mode == SystemMode::UncorrectedStrong && domain == DomainChoice::Ring {
            return Err(Error::Config(
                "uncorrected-strong mode needs homogeneous Neumann data; the ring case has none".into(),
            ));
        }
        let (first_level, last_level) = raw.levels.as_deref().map(parse_levels).transpose()?.unwrap_or((d.first_level, d.last_level));
        let mut solver = d.solver;
        if let Some(t) = raw.residual_tol {
            solver.residual_tol = t;
        }
        if let Some(f) = raw.force_iterative {
            solver.force_iterative = f;
        }
        Ok((
            Self {
                domain,
                k,
                m,
                mode,
                first_level,
                last_level,
                stiffness_quadrature: raw.stiffness_quadrature,
                accurate_quadrature: raw.accurate_quadrature,
                solver,
                report: raw.report,
                json: raw.json,
                export_fields: raw.export_fields,
                dump_system: raw.dump_system,
                seed: raw.seed.unwrap_or(d.seed),
                parallel: raw.parallel.unwrap_or(d.parallel),
            },
            warnings,
        ))
    }
}

/// Combines an optional config file with flag overrides.
pub fn parse_config(file_text: Option<&str>, flags: RawConfig) -> Result<(StudyConfig, Vec<String>)> {
    let base = match file_text {
        Some(t) => RawConfig::parse_text(t)?,
        None => RawConfig::default(),
    };
    StudyConfig::from_raw(base.merge(flags))
}

/// One solved level.
#[derive(Clone, Debug)]
pub struct SolvedLevel {
    pub disc: Discretization,
    pub system: SaddleSystem,
    pub solution: Solution,
    pub errors: ErrorReport,
}

/// Assembles and solves `case` on `mesh`, then measures the error.
/// The returned pressure is the mean-zero representative.
pub fn solve_case(
    domain: Domain,
    mesh: Mesh,
    case: &dyn ManufacturedCase,
    k: usize,
    m: usize,
    mode: SystemMode,
    options: &SolverOptions,
) -> Result<SolvedLevel> {
    let disc = Discretization::new(domain, mesh, k)?;
    solve_discretization(disc, case, m, mode, options)
}

pub fn solve_discretization(
    disc: Discretization,
    case: &dyn ManufacturedCase,
    m: usize,
    mode: SystemMode,
    options: &SolverOptions,
) -> Result<SolvedLevel> {
    let config = TaylorConfig::new(m, disc.k)?;
    let penalty = (mode == SystemMode::Corrected).then_some(&config);
    let blocks = assemble_blocks(&disc, &|x| case.f(x), &|x, n| case.g_n(x, n), penalty);
    let system = build_saddle_system(blocks, mode)?;
    let mut solution = solve(&system, options)?;
    solution.pressure = postprocess_pressure(&system, &solution.pressure, &constant_pressure(&disc));
    let errors = error_norms(&disc, &solution.velocity, &solution.pressure, case, mode, &config);
    Ok(SolvedLevel {
        disc,
        system,
        solution,
        errors,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub n_u: usize,
    pub n_p: usize,
    #[serde(rename = "E_u_hdiv")]
    pub e_u_hdiv: f64,
    #[serde(rename = "E_penalty")]
    pub e_penalty: f64,
    #[serde(rename = "E_p")]
    pub e_p: f64,
    #[serde(rename = "E_total")]
    pub e_total: f64,
    pub eoc_total: Option<f64>,
    pub residual: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
}

pub const CSV_HEADER: &str = "level,h,n_u,n_p,E_u_hdiv,E_penalty,E_p,E_total,eoc_total,residual,wall_time";

impl StudyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let eoc = r.eoc_total.map(|e| format!("{e:e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:e},{},{},{:e},{:e},{:e},{:e},{},{:e},{:e}",
                r.level, r.h, r.n_u, r.n_p, r.e_u_hdiv, r.e_penalty, r.e_p, r.e_total, eoc, r.residual, r.wall_time
            );
        }
        out
    }

    /// Fixed-width table for terminal output.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>5} {:>10} {:>8} {:>8} {:>11} {:>11} {:>11} {:>11} {:>7} {:>9} {:>8}\n",
            "level", "h", "n_u", "n_p", "E_u_hdiv", "E_penalty", "E_p", "E_total", "order", "residual", "time[s]"
        );
        for r in &self.rows {
            let eoc = r.eoc_total.map(|e| format!("{e:.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:>5} {:>10.4e} {:>8} {:>8} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>7} {:>9.1e} {:>8.2}",
                r.level, r.h, r.n_u, r.n_p, r.e_u_hdiv, r.e_penalty, r.e_p, r.e_total, eoc, r.residual, r.wall_time
            );
        }
        out
    }

    pub fn eocs(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.eoc_total).collect()
    }
}

fn run_level(config: &StudyConfig, level: usize) -> Result<StudyRow> {
    let start = Instant::now();
    let case = config.domain.case();
    let domain = case.domain();
    let mesh = mesh_at_level(&domain, level)?;
    let mut disc = Discretization::new(domain, mesh, config.k)?;
    if let Some(d) = config.stiffness_quadrature {
        disc.stiffness_rule = triangle_quadrature(d);
    }
    if let Some(d) = config.accurate_quadrature {
        disc.accurate_rule = triangle_quadrature(d);
    }
    let solved = solve_discretization(disc, case.as_ref(), config.m, config.mode, &config.solver)?;
    if let Some(dir) = &config.dump_system {
        dump_system(&solved.system, dir, level)?;
    }
    if let Some(dir) = &config.export_fields {
        std::fs::create_dir_all(dir)?;
        let text = export_fields(&solved.disc, &solved.solution.velocity, &solved.solution.pressure);
        std::fs::write(dir.join(format!("level_{level}.vtk")), text)?;
    }
    let e = solved.errors;
    log::info!("level {level}: E_total = {:.3e}", e.e_total);
    Ok(StudyRow {
        level,
        h: e.h,
        n_u: solved.system.n_u_full,
        n_p: solved.system.n_p(),
        e_u_hdiv: e.e_u_hdiv,
        e_penalty: e.e_penalty,
        e_p: e.e_p,
        e_total: e.e_total,
        eoc_total: None,
        residual: solved.solution.report.relative_residual,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Runs every level of the study and writes the requested reports.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    let levels: Vec<usize> = (config.first_level..=config.last_level).collect();
    let mut rows = if config.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = levels.iter().map(|&l| s.spawn(move || run_level(config, l))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Solve("level worker panicked".into()))))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        levels.iter().map(|&l| run_level(config, l)).collect::<Result<Vec<_>>>()?
    };
    let errors: Vec<f64> = rows.iter().map(|r| r.e_total).collect();
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    if rows.len() > 1 {
        let eoc = compute_eoc(&errors, &hs)?;
        for (r, e) in rows.iter_mut().skip(1).zip(eoc) {
            r.eoc_total = Some(e);
        }
    }
    let report = StudyReport {
        config: config.clone(),
        rows,
    };
    if let Some(p) = &config.report {
        write_creating_dirs(p, &report.to_csv())?;
    }
    if let Some(p) = &config.json {
        write_creating_dirs(p, &serde_json::to_string_pretty(&report.rows)?)?;
    }
    Ok(report)
}

fn write_creating_dirs(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes `level_<L>_matrix.txt` (augmented matrix, coordinate format) and
/// `level_<L>_rhs.txt` into `dir`.
pub fn dump_system(system: &SaddleSystem, dir: &Path, level: usize) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (m, r) = system.to_coordinate_text();
    std::fs::write(dir.join(format!("level_{level}_matrix.txt")), m)?;
    std::fs::write(dir.join(format!("level_{level}_rhs.txt")), r)?;
    Ok(())
}

/// Legacy ASCII VTK unstructured grid with cell pressure means and vertex
/// velocities (averaged over the triangles sharing each vertex).
pub fn export_fields(disc: &Discretization, u_h: &[f64], p_h: &[f64]) -> String {
    let mesh = &disc.mesh;
    let nv = mesh.vertices.len();
    let nt = mesh.triangles.len();
    let mut vel = vec![crate::Vec2::zeros(); nv];
    let mut count = vec![0usize; nv];
    let mut cell_p = Vec::with_capacity(nt);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let field = disc.velocity_field(t, u_h);
        for &v in tri {
            vel[v] += field.eval(mesh.vertices[v]);
            count[v] += 1;
        }
        let coeffs = disc.local_pressure(t, p_h);
        let rule = &disc.stiffness_rule;
        // reference weights sum to 1/2
        let mean: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * disc.pressure.eval(coeffs, *p))
            .sum::<f64>()
            * 2.0;
        cell_p.push(mean);
    }
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "darcy-bvc k={} level={}", disc.k, mesh.level);
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {nv} double");
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.16e} {:.16e} 0", v.x, v.y);
    }
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(out, "5");
    }
    let _ = writeln!(out, "CELL_DATA {nt}");
    let _ = writeln!(out, "SCALARS pressure double 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    for p in &cell_p {
        let _ = writeln!(out, "{p:.16e}");
    }
    let _ = writeln!(out, "POINT_DATA {nv}");
    let _ = writeln!(out, "VECTORS velocity double");
    for (v, c) in vel.iter().zip(&count) {
        let v = v / (*c).max(1) as f64;
        let _ = writeln!(out, "{:.16e} {:.16e} 0", v.x, v.y);
    }
    out
}

/// Point coordinates, cell count and cell-data count of a file written by
/// [`export_fields`].
pub fn read_vtk_summary(text: &str) -> Result<(Vec<crate::Vec2>, usize, usize)> {
    let mut lines = text.lines().enumerate();
    let mut points = Vec::new();
    let mut cells = None;
    let mut cell_data = None;
    while let Some((i, line)) = lines.next() {
        let mut parts = line.split_whitespace();
        let parse_count = |s: Option<&str>| -> Result<usize> {
            s.and_then(|s| s.parse().ok()).ok_or(Error::Parse {
                line: i + 1,
                message: "missing count".into(),
            })
        };
        match parts.next() {
            Some("POINTS") => {
                let n = parse_count(parts.next())?;
                for _ in 0..n {
                    let (j, l) = lines.next().ok_or(Error::Parse {
                        line: i + 1,
                        message: "truncated point list".into(),
                    })?;
                    let xs: Vec<f64> = l.split_whitespace().filter_map(|s| s.parse().ok()).collect();
                    if xs.len() < 2 {
                        return Err(Error::Parse {
                            line: j + 1,
                            message: "bad point".into(),
                        });
                    }
                    points.push(crate::Vec2::new(xs[0], xs[1]));
                }
            }
            Some("CELLS") => cells = Some(parse_count(parts.next())?),
            Some("CELL_DATA") => cell_data = Some(parse_count(parts.next())?),
            _ => {}
        }
    }
    Ok((points, cells.unwrap_or(0), cell_data.unwrap_or(0)))
}
