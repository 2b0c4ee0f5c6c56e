use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use volfrac::cauchy;
use volfrac::pipeline::{self, PipelineError, RunConfig, Source};
use volfrac::scene::{self, Scene};

/// Bounds on the area fraction of an inclusion from two boundary measurements.
#[derive(Parser, Debug)]
#[command(name = "volfrac", version)]
struct Args {
    /// Built-in scene name (table1_row1..4, table2..5) or path to a JSON scene.
    #[arg(long, required_unless_present = "reproduce_tables")]
    scene: Option<String>,
    /// Data source: fem, analytic, file or auto.
    #[arg(long, default_value = "auto")]
    source: Source,
    #[arg(long)]
    mesh_h: Option<f64>,
    /// Samples on the outer circle for the analytic source.
    #[arg(long, default_value_t = pipeline::DEFAULT_BOUNDARY_N)]
    boundary_n: usize,
    #[arg(long, default_value_t = pipeline::DEFAULT_GRID_N)]
    grid_n: usize,
    /// Relative flux noise level p.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Include the four bound grids in report.json.
    #[arg(long)]
    full_grids: bool,
    /// Run every built-in scene and write table files.
    #[arg(long)]
    reproduce_tables: bool,
    /// Noise realisations per level in the table reproduction.
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    /// Cauchy CSV files for φ₁ = x and φ₂ = y (file source).
    #[arg(long, num_args = 2, value_names = ["PHI1", "PHI2"])]
    data_files: Option<Vec<PathBuf>>,
    /// Also write the Cauchy data used as phi1.csv and phi2.csv.
    #[arg(long)]
    write_cauchy: bool,
}

fn load_scene(arg: &str) -> anyhow::Result<Scene> {
    if let Some(s) = scene::builtin_scene(arg) {
        return Ok(s);
    }
    let text = fs::read_to_string(arg)
        .with_context(|| format!("'{arg}' is neither a built-in scene nor a readable file"))?;
    Ok(scene::parse_scene(&text)?)
}

fn run(args: Args) -> anyhow::Result<()> {
    let cfg = RunConfig {
        source: args.source,
        mesh_h: args.mesh_h,
        boundary_n: args.boundary_n,
        grid_n: args.grid_n,
        noise: args.noise,
        seed: args.seed,
        full_grids: args.full_grids,
        data_files: args.data_files.map(|v| (v[0].clone(), v[1].clone())),
    };
    if args.reproduce_tables {
        cfg.validate()?;
        let rep = pipeline::reproduce_tables(&cfg, args.seeds)?;
        pipeline::write_reproduction(&args.out, &rep)?;
        for r in &rep.clean {
            println!(
                "{:<12} lower {:.6} upper {:.6} (f1 {})",
                r.scene, r.lower, r.upper, r.f1_true
            );
        }
        for (p, lo, up, n) in pipeline::noise_means(&rep.noise) {
            println!("table3 p={p:<4} lower {lo:.6} upper {up:.6} ({n} runs)");
        }
        return Ok(());
    }
    let s = load_scene(args.scene.as_deref().unwrap_or_default())?;
    cfg.validate()?;
    scene::validate_phases(&s.phases).map_err(PipelineError::Admissibility)?;
    let data = pipeline::generate_data(&s, &cfg)?;
    let (c1, c2) = pipeline::noisy_pair(&data, cfg.noise, cfg.seed);
    let report = pipeline::report_for_pair(&s, &data, &cfg, &c1, &c2)?;
    pipeline::write_reports(&args.out, std::slice::from_ref(&report))?;
    if args.write_cauchy {
        cauchy::write_csv(&c1, fs::File::create(args.out.join("phi1.csv"))?)?;
        cauchy::write_csv(&c2, fs::File::create(args.out.join("phi2.csv"))?)?;
    }
    println!(
        "{}: lower {:.6} upper {:.6} (f1 {}){}",
        report.scene,
        report.lower,
        report.upper,
        report.f1_true,
        if report.lower_clamped || report.upper_clamped {
            " [clamped]"
        } else {
            ""
        }
    );
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = std::env::var("VOLFRAC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<PipelineError>()
                .map_or(1, |p| p.exit_code());
            ExitCode::from(code as u8)
        }
    }
}
