//! End-to-end runs: scene → Cauchy data → moments → bound grid → reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analytic::{self, AnalyticError, LayeredDiskSpec};
use crate::bounds::{self, BoundsError, BoundsReport};
use crate::cauchy::{self, CauchyError, CauchyPair};
use crate::fem::{self, FemError, FemSolver};
use crate::functionals::{self, FunctionalsError};
use crate::mesher::{self, MeshError};
use crate::scene::{self, PhaseViolation, Scene, SceneError};
use crate::translation::{self, TranslationError};

pub const DEFAULT_BOUNDARY_N: usize = 512;
pub const DEFAULT_GRID_N: usize = 200;
/// Noise levels of the multiple-inclusion study.
pub const TABLE3_NOISE: [f64; 5] = [0.0, 0.05, 0.10, 0.15, 0.20];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("inadmissible conductivities: {0:?}")]
    Admissibility(Vec<PhaseViolation>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
    #[error(transparent)]
    Functionals(#[from] FunctionalsError),
    #[error(transparent)]
    Translation(#[from] TranslationError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Admissibility(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Fem,
    Analytic,
    File,
    /// Analytic when the scene is concentric, FEM otherwise.
    Auto,
}

impl std::str::FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fem" => Ok(Source::Fem),
            "analytic" => Ok(Source::Analytic),
            "file" => Ok(Source::File),
            "auto" => Ok(Source::Auto),
            _ => Err(format!("unknown source '{s}' (fem, analytic, file, auto)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub source: Source,
    /// Mesh size; `None` picks [`default_mesh_h`].
    pub mesh_h: Option<f64>,
    /// Samples on the outer circle for the analytic source.
    pub boundary_n: usize,
    pub grid_n: usize,
    pub noise: f64,
    pub seed: u64,
    pub full_grids: bool,
    /// Cauchy CSV files for the two excitations (file source).
    pub data_files: Option<(PathBuf, PathBuf)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: Source::Auto,
            mesh_h: None,
            boundary_n: DEFAULT_BOUNDARY_N,
            grid_n: DEFAULT_GRID_N,
            noise: 0.0,
            seed: 0,
            full_grids: false,
            data_files: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.grid_n < 2 {
            return bad("grid_n must be at least 2");
        }
        if let Some(h) = self.mesh_h {
            if !(h > 0.0 && h.is_finite()) {
                return bad("mesh h must be positive");
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise level must be non-negative");
        }
        if self.source == Source::File && self.data_files.is_none() {
            return bad("file source needs two Cauchy data files");
        }
        Ok(())
    }
}

/// Mesh size used for a scene when none is given.
pub fn default_mesh_h(s: &Scene) -> f64 {
    match s.name.as_str() {
        n if n.starts_with("table1") => 0.05,
        "table5" => 0.25,
        _ => 0.02,
    }
}

fn resolve_source(s: &Scene, src: Source) -> Source {
    match src {
        Source::Auto if LayeredDiskSpec::from_scene(s, [Complex64::new(1.0, 0.0); 2]).is_ok() => {
            Source::Analytic
        }
        Source::Auto => Source::Fem,
        other => other,
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub data_s: f64,
    pub fem_solve_s: f64,
    pub moments_s: f64,
    pub sweep_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeshInfo {
    pub h: f64,
    pub nodes: usize,
    pub triangles: usize,
    pub boundary_nodes: usize,
    pub min_angle_deg: f64,
    pub phase1_fraction: f64,
}

/// Clean Cauchy data for the two excitations φ₁ = x, φ₂ = y.
#[derive(Clone, Debug)]
pub struct CleanData {
    pub source: Source,
    pub c1: CauchyPair,
    pub c2: CauchyPair,
    pub mesh: Option<MeshInfo>,
    pub timings: Timings,
}

pub fn generate_data(s: &Scene, cfg: &RunConfig) -> Result<CleanData, PipelineError> {
    let source = resolve_source(s, cfg.source);
    let t0 = Instant::now();
    let mut timings = Timings::default();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let (c1, c2, mesh) = match source {
        Source::Analytic => {
            let c1 = analytic::layered_cauchy(
                &LayeredDiskSpec::from_scene(s, [one, zero])?,
                cfg.boundary_n,
            )?;
            let c2 = analytic::layered_cauchy_on(
                &LayeredDiskSpec::from_scene(s, [zero, one])?,
                c1.grid.clone(),
            )?;
            (c1, c2, None)
        }
        Source::Fem => {
            let h = cfg.mesh_h.unwrap_or_else(|| default_mesh_h(s));
            let mesh = Arc::new(mesher::triangulate(s, h)?);
            let info = MeshInfo {
                h,
                nodes: mesh.nodes.len(),
                triangles: mesh.triangles.len(),
                boundary_nodes: mesh.boundary_loop.len(),
                min_angle_deg: mesh.min_angle_deg(),
                phase1_fraction: mesh.phase_area(1) / mesh.total_area(),
            };
            let ts = Instant::now();
            let solver = FemSolver::new(mesh.clone(), s.phases)?;
            let pts = mesh.boundary_points();
            let phi = |k: usize| {
                pts.iter()
                    .map(|p| Complex64::new(p[k], 0.0))
                    .collect::<Vec<_>>()
            };
            let (s1, s2) = rayon::join(
                || solver.solve(&phi(0), "phi1"),
                || solver.solve(&phi(1), "phi2"),
            );
            let (s1, s2) = (s1?, s2?);
            timings.fem_solve_s = ts.elapsed().as_secs_f64();
            let grid = Arc::new(fem::mesh_boundary_grid(&mesh)?);
            (
                fem::to_cauchy_pair(&s1, grid.clone())?,
                fem::to_cauchy_pair(&s2, grid)?,
                Some(info),
            )
        }
        Source::File => {
            let (a, b) = cfg.data_files.as_ref().ok_or_else(|| {
                PipelineError::Config("file source needs two Cauchy data files".into())
            })?;
            let (c1, c2) = cauchy::read_pair_files(a, b)?;
            (c1, c2, None)
        }
        Source::Auto => unreachable!(),
    };
    timings.data_s = t0.elapsed().as_secs_f64();
    Ok(CleanData {
        source,
        c1,
        c2,
        mesh,
        timings,
    })
}

/// The two excitations draw from distinct streams derived from one seed.
pub fn noisy_pair(d: &CleanData, p: f64, seed: u64) -> (CauchyPair, CauchyPair) {
    (
        cauchy::add_noise(&d.c1, p, seed.wrapping_mul(2)),
        cauchy::add_noise(&d.c2, p, seed.wrapping_mul(2).wrapping_add(1)),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct Grids {
    pub thetas: Vec<f64>,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scene: String,
    pub source: Source,
    pub sigma1: [f64; 2],
    pub sigma2: [f64; 2],
    pub f1_true: f64,
    pub lower: f64,
    pub upper: f64,
    pub raw_lower: f64,
    pub raw_upper: f64,
    pub lower_clamped: bool,
    pub upper_clamped: bool,
    pub arg_lower: [f64; 2],
    pub arg_upper: [f64; 2],
    pub skipped_lower: usize,
    pub skipped_upper: usize,
    pub grid_n: usize,
    pub boundary_samples: usize,
    pub noise: f64,
    pub seed: u64,
    pub mesh: Option<MeshInfo>,
    pub timings: Timings,
    pub grids: Option<Grids>,
}

impl RunReport {
    pub fn summary_row(&self) -> String {
        format!(
            "{},{:.10},{:.10},{:.10},{:.10},{:.10},{},{},{}",
            self.scene,
            self.f1_true,
            self.lower,
            self.upper,
            self.lower / self.f1_true,
            self.upper / self.f1_true,
            self.grid_n,
            self.noise,
            self.seed
        )
    }
}

pub const SUMMARY_HEADER: &str =
    "scene,f1_true,lower,upper,lower_over_f1,upper_over_f1,grid_n,noise,seed";

pub fn summary_csv(reports: &[RunReport]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.summary_row());
        out.push('\n');
    }
    out
}

/// Bounds from a given pair of Cauchy data.
pub fn bounds_from_data(
    s: &Scene,
    c1: &CauchyPair,
    c2: &CauchyPair,
    grid_n: usize,
) -> Result<(BoundsReport, f64, f64), PipelineError> {
    scene::validate_phases(&s.phases).map_err(PipelineError::Admissibility)?;
    let lo = translation::lower_params(&s.phases)?;
    let up = translation::upper_params(&s.phases)?;
    let t0 = Instant::now();
    let mt = functionals::build_moments(c1, c2)?;
    let moments_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let rep = bounds::optimize_grid(&mt, &lo, &up, grid_n)?;
    Ok((rep, moments_s, t1.elapsed().as_secs_f64()))
}

/// Report for one (possibly noisy) pair derived from `data`.
pub fn report_for_pair(
    s: &Scene,
    data: &CleanData,
    cfg: &RunConfig,
    c1: &CauchyPair,
    c2: &CauchyPair,
) -> Result<RunReport, PipelineError> {
    let (rep, moments_s, sweep_s) = bounds_from_data(s, c1, c2, cfg.grid_n)?;
    let mut timings = data.timings.clone();
    timings.moments_s = moments_s;
    timings.sweep_s = sweep_s;
    let th = |(i, j): (usize, usize)| [rep.thetas[i], rep.thetas[j]];
    Ok(RunReport {
        scene: s.name.clone(),
        source: data.source,
        sigma1: [s.phases.sigma1.re, s.phases.sigma1.im],
        sigma2: [s.phases.sigma2.re, s.phases.sigma2.im],
        f1_true: scene::area_fraction(s)?,
        lower: rep.lower,
        upper: rep.upper,
        raw_lower: rep.raw_lower,
        raw_upper: rep.raw_upper,
        lower_clamped: rep.lower_clamped,
        upper_clamped: rep.upper_clamped,
        arg_lower: th(rep.arg_lower),
        arg_upper: th(rep.arg_upper),
        skipped_lower: rep.skipped_lower,
        skipped_upper: rep.skipped_upper,
        grid_n: cfg.grid_n,
        boundary_samples: c1.grid.len(),
        noise: cfg.noise,
        seed: cfg.seed,
        mesh: data.mesh.clone(),
        timings,
        grids: cfg.full_grids.then(|| Grids {
            thetas: rep.thetas.clone(),
            l1: rep.l1.clone(),
            l2: rep.l2.clone(),
            u1: rep.u1.clone(),
            u2: rep.u2.clone(),
        }),
    })
}

/// One scene, one configuration.
pub fn run_scene(s: &Scene, cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    scene::validate_phases(&s.phases).map_err(PipelineError::Admissibility)?;
    let data = generate_data(s, cfg)?;
    let (c1, c2) = noisy_pair(&data, cfg.noise, cfg.seed);
    report_for_pair(s, &data, cfg, &c1, &c2)
}

/// Several noise realisations on one set of clean data.
pub fn run_noise_study(
    s: &Scene,
    cfg: &RunConfig,
    levels: &[f64],
    seeds: &[u64],
) -> Result<Vec<RunReport>, PipelineError> {
    cfg.validate()?;
    scene::validate_phases(&s.phases).map_err(PipelineError::Admissibility)?;
    let data = generate_data(s, cfg)?;
    let jobs: Vec<(f64, u64)> = levels
        .iter()
        .flat_map(|&p| {
            let seeds: &[u64] = if p == 0.0 { &seeds[..1] } else { seeds };
            seeds.iter().map(move |&k| (p, k))
        })
        .collect();
    jobs.par_iter()
        .map(|&(p, seed)| {
            let c = RunConfig {
                noise: p,
                seed,
                ..cfg.clone()
            };
            let (c1, c2) = noisy_pair(&data, p, seed);
            report_for_pair(s, &data, &c, &c1, &c2)
        })
        .collect()
}

/// Writes `summary.csv` and `report.json` into `out`.
pub fn write_reports(out: &Path, reports: &[RunReport]) -> Result<(), PipelineError> {
    fs::create_dir_all(out)?;
    fs::write(out.join("summary.csv"), summary_csv(reports))?;
    fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(reports)?,
    )?;
    Ok(())
}

/// Reference interval for a built-in scene: (f₁, max L, min U).
pub fn reference_values(name: &str) -> Option<(f64, f64, f64)> {
    Some(match name {
        "table1_row1" => (0.16, 0.159919, 0.160044),
        "table1_row2" => (0.16, 0.159944, 0.160015),
        "table1_row3" => (0.16, 0.159937, 0.160008),
        "table1_row4" => (0.16, 0.159839, 0.160026),
        "table2" => (0.12, 0.119559, 0.120800),
        "table3" => (0.1475, 0.146614, 0.148187),
        "table4" => (0.029281, 0.029172, 0.029631),
        "table5" => (0.8, 0.799485, 0.800064),
        _ => return None,
    })
}

/// Reference noise rows for the multiple-inclusion scene: (p, max L, min U).
pub const TABLE3_REFERENCE: [(f64, f64, f64); 5] = [
    (0.0, 0.146614, 0.148187),
    (0.05, 0.143527, 0.151170),
    (0.10, 0.134217, 0.159726),
    (0.15, 0.119537, 0.174828),
    (0.20, 0.098495, 0.194967),
];

/// Splitting-method interval quoted next to the three-layer annulus.
pub const SPLITTING_INTERVAL: (f64, f64) = (0.794, 0.808);

#[derive(Clone, Debug, Serialize)]
pub struct Reproduction {
    /// One entry per built-in scene, clean data.
    pub clean: Vec<RunReport>,
    /// Multiple-inclusion scene at each noise level and seed.
    pub noise: Vec<RunReport>,
}

/// Runs every built-in scene with its default source and the noise study
/// with `seeds` realisations per level.
pub fn reproduce_tables(cfg: &RunConfig, seeds: usize) -> Result<Reproduction, PipelineError> {
    let scenes: Vec<Scene> = scene::BUILTIN_SCENES
        .iter()
        .map(|n| scene::builtin_scene(n).expect("built-in scene"))
        .collect();
    let clean = scenes
        .par_iter()
        .map(|s| {
            run_scene(
                s,
                &RunConfig {
                    source: Source::Auto,
                    noise: 0.0,
                    mesh_h: None,
                    data_files: None,
                    ..cfg.clone()
                },
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let seeds: Vec<u64> = (0..seeds.max(1) as u64)
        .map(|k| cfg.seed.wrapping_add(k))
        .collect();
    let t3 = scene::builtin_scene("table3").expect("built-in scene");
    let noise = run_noise_study(
        &t3,
        &RunConfig {
            source: Source::Fem,
            mesh_h: None,
            data_files: None,
            ..cfg.clone()
        },
        &TABLE3_NOISE,
        &seeds,
    )?;
    Ok(Reproduction { clean, noise })
}

fn table_file(title: &str, rows: &[(String, &RunReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {title}");
    out.push_str(
        "row,sigma1,sigma2,f1,lower,lower_over_f1,upper,upper_over_f1,ref_lower,ref_lower_over_f1,ref_upper,ref_upper_over_f1\n",
    );
    for (label, r) in rows {
        let (f1, rl, ru) = reference_values(&r.scene).unwrap_or((r.f1_true, f64::NAN, f64::NAN));
        let _ = writeln!(
            out,
            "{label},{}{:+}i,{}{:+}i,{},{:.6},{:.6},{:.6},{:.6},{},{:.6},{},{:.6}",
            r.sigma1[0],
            r.sigma1[1],
            r.sigma2[0],
            r.sigma2[1],
            f1,
            r.lower,
            r.lower / f1,
            r.upper,
            r.upper / f1,
            rl,
            rl / f1,
            ru,
            ru / f1
        );
    }
    out
}

/// Means of the noise study per level: (p, mean lower, mean upper, runs).
pub fn noise_means(noise: &[RunReport]) -> Vec<(f64, f64, f64, usize)> {
    TABLE3_NOISE
        .iter()
        .filter_map(|&p| {
            let rs: Vec<&RunReport> = noise.iter().filter(|r| r.noise == p).collect();
            if rs.is_empty() {
                return None;
            }
            let n = rs.len() as f64;
            Some((
                p,
                rs.iter().map(|r| r.lower).sum::<f64>() / n,
                rs.iter().map(|r| r.upper).sum::<f64>() / n,
                rs.len(),
            ))
        })
        .collect()
}

/// Writes `table1.csv` … `table5.csv`, `summary.csv` and `report.json`.
pub fn write_reproduction(out: &Path, rep: &Reproduction) -> Result<(), PipelineError> {
    fs::create_dir_all(out)?;
    let pick = |prefix: &str| -> Vec<(String, &RunReport)> {
        rep.clean
            .iter()
            .filter(|r| r.scene.starts_with(prefix))
            .map(|r| (r.scene.clone(), r))
            .collect()
    };
    fs::write(
        out.join("table1.csv"),
        table_file("two concentric disks", &pick("table1")),
    )?;
    fs::write(
        out.join("table2.csv"),
        table_file("elliptic inclusion", &pick("table2")),
    )?;
    fs::write(
        out.join("table4.csv"),
        table_file("general shape domain", &pick("table4")),
    )?;

    let mut t5 = table_file("three-layer annulus", &pick("table5"));
    let (sl, su) = SPLITTING_INTERVAL;
    let _ = writeln!(
        t5,
        "splitting,,,0.8,,,,,{sl},{:.6},{su},{:.6}",
        sl / 0.8,
        su / 0.8
    );
    fs::write(out.join("table5.csv"), t5)?;

    let mut t3 = String::from("# multiple inclusions, mean over seeds\n");
    t3.push_str("noise,runs,lower,lower_over_f1,upper,upper_over_f1,ref_lower,ref_lower_over_f1,ref_upper,ref_upper_over_f1\n");
    let f1 = 0.1475;
    for ((p, lo, up, n), (_, rl, ru)) in noise_means(&rep.noise).into_iter().zip(TABLE3_REFERENCE) {
        let _ = writeln!(
            t3,
            "{p},{n},{lo:.6},{:.6},{up:.6},{:.6},{rl},{:.6},{ru},{:.6}",
            lo / f1,
            up / f1,
            rl / f1,
            ru / f1
        );
    }
    fs::write(out.join("table3.csv"), t3)?;

    let mut all = rep.clean.clone();
    all.extend(rep.noise.iter().cloned());
    write_reports(out, &all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> RunConfig {
        RunConfig {
            grid_n: 24,
            boundary_n: 128,
            ..RunConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig {
            grid_n: 1,
            ..quick()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            mesh_h: Some(0.0),
            ..quick()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            noise: -0.1,
            ..quick()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            source: Source::File,
            ..quick()
        }
        .validate()
        .is_err());
        assert!(quick().validate().is_ok());
    }

    #[test]
    fn inadmissible_phases_exit_two() {
        let mut s = scene::builtin_scene("table1_row1").unwrap();
        s.phases.sigma1 = Complex64::new(2.0, 0.0);
        let e = run_scene(&s, &quick()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn auto_source_choice() {
        let t1 = scene::builtin_scene("table1_row1").unwrap();
        let t2 = scene::builtin_scene("table2").unwrap();
        assert_eq!(resolve_source(&t1, Source::Auto), Source::Analytic);
        assert_eq!(resolve_source(&t2, Source::Auto), Source::Fem);
        assert_eq!(resolve_source(&t1, Source::Fem), Source::Fem);
    }

    #[test]
    fn zero_noise_ignores_seed() {
        let s = scene::builtin_scene("table1_row1").unwrap();
        let a = run_scene(&s, &quick()).unwrap();
        let b = run_scene(
            &s,
            &RunConfig {
                seed: 99,
                ..quick()
            },
        )
        .unwrap();
        assert_eq!(a.lower, b.lower);
        assert_eq!(a.upper, b.upper);
    }

    #[test]
    fn summary_is_deterministic() {
        let s = scene::builtin_scene("table1_row2").unwrap();
        let cfg = RunConfig {
            noise: 0.05,
            seed: 3,
            ..quick()
        };
        let a = summary_csv(&[run_scene(&s, &cfg).unwrap()]);
        let b = summary_csv(&[run_scene(&s, &cfg).unwrap()]);
        assert_eq!(a, b);
        assert!(a.starts_with(SUMMARY_HEADER));
    }

    #[test]
    fn table1_row1_analytic_brackets() {
        let s = scene::builtin_scene("table1_row1").unwrap();
        let r = run_scene(
            &s,
            &RunConfig {
                grid_n: 60,
                ..RunConfig::default()
            },
        )
        .unwrap();
        assert!(
            r.lower <= 0.16 + 1e-9 && r.upper >= 0.16 - 1e-9,
            "{} {}",
            r.lower,
            r.upper
        );
        assert!(r.upper - r.lower < 1e-3);
    }
}
