//! The `polartof` command-line driver. Every numeric input comes from the
//! TOML configuration; flags only choose the configuration, seed, worker
//! count and output directory.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ellipsometry::{learn_schedule_with, reconstruct_mueller};
use crate::error::{Error, Result};
use crate::inverse::{edit_material, reconstruct_scene, scene_errors, ConstraintRanges, SceneParams};
use crate::io::{
    read_cube, read_params, read_schedule, read_stack, write_cube, write_history_csv, write_json, write_map_png,
    write_mueller_png, write_params, write_schedule, write_stack, write_temporal_csv, MapStyle, ParamsBundle,
    RenderSummary, RunConfig,
};
use crate::renderer::{
    make_synthetic_scene, render_transient, shift_cube, simulate_capture, Camera, Scene, SensorConfig,
    TransientMuellerCube,
};

#[derive(Debug, Parser)]
#[command(name = "polartof", version, about = "Polarimetric time-of-flight simulation and inverse rendering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the configured scene to a transient Mueller cube and summary.
    Render(RunArgs),
    /// Simulate the ellipsometric capture stack of the configured scene.
    Capture(RunArgs),
    /// Learn a rotation schedule; writes the schedule and its loss curve.
    LearnAngles(RunArgs),
    /// Recover the transient Mueller cube from a capture stack.
    ReconstructMueller(RunArgs),
    /// Recover depth, normals and materials from a transient Mueller cube.
    ReconstructScene(RunArgs),
    /// Edit reconstructed materials and re-render before and after.
    EditMaterial(RunArgs),
    /// Export Mueller images, temporal profiles and parameter maps.
    ExportPlots(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Caps the number of worker threads (results do not depend on it).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the configuration output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Render(a)
            | Command::Capture(a)
            | Command::LearnAngles(a)
            | Command::ReconstructMueller(a)
            | Command::ReconstructScene(a)
            | Command::EditMaterial(a)
            | Command::ExportPlots(a) => a,
        }
    }
}

/// Process exit code of an error: 2 for configuration problems, 3 for
/// file-system and file-format problems, 1 for anything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParam(_) | Error::ShapeMismatch { .. } => 2,
        Error::Io(_) | Error::Format(_) => 3,
        _ => 1,
    }
}

fn init_logging() {
    let level = match std::env::var("POLARTOF_LOG") {
        Ok(v) if ["error", "warn", "info", "debug"].contains(&v.as_str()) => v,
        _ => "warn".to_string(),
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&level)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses arguments, runs one command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("polartof: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: &Command) -> Result<()> {
    let args = cmd.args();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let (cfg, base) = RunConfig::load(&args.config)?;
    let run = Run {
        seed: args.seed.unwrap_or(cfg.seed),
        out: args.out.clone().unwrap_or_else(|| base.join(&cfg.out_dir)),
        base,
        cfg,
    };
    pool.install(|| {
        std::fs::create_dir_all(&run.out)?;
        match cmd {
            Command::Render(_) => run.render(),
            Command::Capture(_) => run.capture(),
            Command::LearnAngles(_) => run.learn_angles(),
            Command::ReconstructMueller(_) => run.reconstruct_mueller(),
            Command::ReconstructScene(_) => run.reconstruct_scene(),
            Command::EditMaterial(_) => run.edit_material(),
            Command::ExportPlots(_) => run.export_plots(),
        }
    })
}

struct Run {
    cfg: RunConfig,
    base: PathBuf,
    seed: u64,
    out: PathBuf,
}

/// Surface-only and sub-surface-only copies of a scene.
fn split_scene(scene: &Scene) -> (Scene, Scene) {
    let mut surface = scene.clone();
    let mut subsurface = scene.clone();
    for m in &mut surface.materials {
        m.subsurface.a = [0.0; 4];
    }
    for m in &mut subsurface.materials {
        m.surface.a = [0.0; 4];
    }
    (surface, subsurface)
}

/// Time-domain cube of a scene, with masked pixels zeroed.
fn render_time(scene: &Scene, sensor: &SensorConfig, mask: Option<&[bool]>) -> Result<TransientMuellerCube> {
    let mut cube = shift_cube(&render_transient(scene, sensor)?, scene, sensor)?;
    if let Some(mask) = mask {
        for (p, _) in mask.iter().enumerate().filter(|(_, &m)| !m) {
            cube.pixel_mut(p).fill(0.0);
        }
    }
    Ok(cube)
}

impl Run {
    /// Resolves an input path; a missing key or file is a configuration
    /// error naming the key.
    fn input(&self, key: &str, value: &Option<String>, command: &str) -> Result<PathBuf> {
        let v = value
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{key}: required by {command}")))?;
        let path = self.base.join(v);
        if !path.is_file() {
            return Err(Error::Config(format!("{key}: file {} does not exist", path.display())));
        }
        Ok(path)
    }

    fn written(&self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        info!("writing {}", p.display());
        p
    }

    fn camera(&self) -> Result<Camera> {
        self.cfg.scene.camera()
    }

    fn sensor(&self) -> Result<SensorConfig> {
        self.cfg.sensor.sensor()
    }

    fn scene(&self) -> Result<Scene> {
        make_synthetic_scene(&self.cfg.scene.kind()?, self.camera()?)
    }

    fn render(&self) -> Result<()> {
        let scene = self.scene()?;
        let sensor = self.sensor()?;
        let total = render_time(&scene, &sensor, None)?;
        let (s, ss) = split_scene(&scene);
        let summary = RenderSummary::new(&total, &render_time(&s, &sensor, None)?, &render_time(&ss, &sensor, None)?);
        write_cube(&self.written("cube.ptof"), &total)?;
        write_json(&self.written("summary.json"), &summary)?;
        write_params(
            &self.out.join("truth"),
            &ParamsBundle {
                params: SceneParams::from_scene(&scene),
                labels: scene.cluster_id.clone(),
                mask: vec![true; scene.num_pixels()],
            },
        )?;
        Ok(())
    }

    fn capture(&self) -> Result<()> {
        let path = self.input("inputs.schedule", &self.cfg.inputs.schedule, "capture")?;
        let schedule = read_schedule(&path)?;
        let scene = self.scene()?;
        let sensor = self.sensor()?;
        let cube = render_transient(&scene, &sensor)?;
        let stack = simulate_capture(&cube, &scene, &schedule, &sensor, self.seed)?;
        write_stack(&self.written("stack.ptof"), &stack)
    }

    fn learn_angles(&self) -> Result<()> {
        let outcome = learn_schedule_with(&self.cfg.learn.config(self.seed)?)?;
        info!(
            "schedule loss {:.6e} -> {:.6e}",
            outcome.initial_loss, outcome.best_loss
        );
        write_schedule(&self.written("schedule.toml"), &outcome.schedule)?;
        write_history_csv(&self.written("loss.csv"), &outcome.history)
    }

    fn reconstruct_mueller(&self) -> Result<()> {
        let stack = read_stack(&self.input("inputs.stack", &self.cfg.inputs.stack, "reconstruct-mueller")?)?;
        let schedule = read_schedule(&self.input("inputs.schedule", &self.cfg.inputs.schedule, "reconstruct-mueller")?)?;
        if stack.n != schedule.len() {
            return Err(Error::Config(format!(
                "inputs.schedule: {} entries but the capture stack holds {} captures",
                schedule.len(),
                stack.n
            )));
        }
        if !stack.schedule_ref.is_empty() && stack.schedule_ref != schedule.identifier() {
            return Err(Error::Config(format!(
                "inputs.schedule: stack was captured with {} but the schedule is {}",
                stack.schedule_ref,
                schedule.identifier()
            )));
        }
        let cube = reconstruct_mueller(&stack, &schedule)?;
        write_cube(&self.written("cube.ptof"), &cube)
    }

    fn reconstruct_scene(&self) -> Result<()> {
        let camera = self.camera()?;
        let sensor = self.sensor()?;
        let (cube, truth) = match &self.cfg.inputs.cube {
            Some(_) => (read_cube(&self.input("inputs.cube", &self.cfg.inputs.cube, "reconstruct-scene")?)?, None),
            None => {
                let scene = self.scene()?;
                let mut cube = render_time(&scene, &sensor, None)?;
                if sensor.noise_sigma > 0.0 {
                    let noise = Normal::new(0.0, sensor.noise_sigma).map_err(|e| Error::Config(format!("sensor.noise_sigma: {e}")))?;
                    let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                    cube.data.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
                }
                (cube, Some(scene))
            }
        };
        if (cube.width, cube.height) != (camera.width, camera.height) || cube.num_bins != sensor.num_bins {
            return Err(Error::Config(format!(
                "inputs.cube: cube is {}x{}x{} but scene/sensor configure {}x{}x{}",
                cube.width, cube.height, cube.num_bins, camera.width, camera.height, sensor.num_bins
            )));
        }
        let rcfg = self.cfg.reconstruct.config(self.seed)?;
        let r = reconstruct_scene(&cube, &camera, &sensor, &rcfg)?;
        let bundle = ParamsBundle {
            params: r.params.clone(),
            labels: r.clusters.labels.clone(),
            mask: r.mask.clone(),
        };
        write_params(&self.out, &bundle)?;
        write_history_csv(&self.written("history.csv"), &r.history)?;
        self.write_map_pngs(&bundle)?;
        if let Some(scene) = truth {
            let errors = scene_errors(
                &r.params,
                &r.clusters.labels,
                &r.mask,
                &SceneParams::from_scene(&scene),
                &scene.cluster_id,
            )?;
            info!(
                "depth rmse {:.3} mm, mean normal error {:.3} deg",
                errors.depth_rmse * 1e3,
                errors.mean_normal_error_deg
            );
            write_json(&self.written("metrics.json"), &errors)?;
        }
        Ok(())
    }

    fn write_map_pngs(&self, b: &ParamsBundle) -> Result<()> {
        let (w, h) = (b.params.width, b.params.height);
        let (depth, normals, labels) = masked_maps(b);
        write_map_png(&self.written("depth.png"), w, h, &depth, MapStyle::Scalar)?;
        write_map_png(&self.written("normals.png"), w, h, &normals, MapStyle::Normal)?;
        write_map_png(&self.written("clusters.png"), w, h, &labels, MapStyle::Label)
    }

    fn edit_material(&self) -> Result<()> {
        let bundle = read_params(&self.input("inputs.params", &self.cfg.inputs.params, "edit-material")?)?;
        let camera = self.camera()?;
        let sensor = self.sensor()?;
        if (bundle.params.width, bundle.params.height) != (camera.width, camera.height) {
            return Err(Error::Config(format!(
                "inputs.params: maps are {}x{} but the scene configures {}x{}",
                bundle.params.width, bundle.params.height, camera.width, camera.height
            )));
        }
        let edited = edit_material(&bundle.params, &self.cfg.edit.edit(), &ConstraintRanges::from_sensor(&sensor))?;
        let before = bundle.params.to_scene(camera, &bundle.labels)?;
        let after = edited.to_scene(camera, &bundle.labels)?;
        write_cube(&self.written("original_cube.ptof"), &render_time(&before, &sensor, Some(&bundle.mask))?)?;
        write_cube(&self.written("edited_cube.ptof"), &render_time(&after, &sensor, Some(&bundle.mask))?)?;
        write_params(
            &self.out,
            &ParamsBundle {
                params: edited,
                ..bundle
            },
        )?;
        Ok(())
    }

    fn export_plots(&self) -> Result<()> {
        let p = &self.cfg.plots;
        match p.kind.as_str() {
            "mueller_image" | "temporal_profile" => {
                let (key, value) = match &p.input {
                    Some(_) => ("plots.input", &p.input),
                    None => ("inputs.cube", &self.cfg.inputs.cube),
                };
                let cube = read_cube(&self.input(key, value, "export-plots")?)?;
                if p.kind == "mueller_image" {
                    let name = match p.entry {
                        Some(j) => format!("mueller_bin{}_m{}{}.png", p.bin, j / 4, j % 4),
                        None => format!("mueller_bin{}.png", p.bin),
                    };
                    if matches!(p.entry, Some(j) if j >= 16) {
                        return Err(Error::Config(format!("plots.entry: {} is not in 0..16", p.entry.unwrap_or(0))));
                    }
                    write_mueller_png(&self.written(&name), &cube, p.bin, p.entry)
                } else {
                    let [x, y] = p.pixel;
                    write_temporal_csv(&self.written(&format!("profile_x{x}_y{y}.csv")), &cube, x, y)
                }
            }
            "depth_map" | "normal_map" | "cluster_map" => {
                let (key, value) = match &p.input {
                    Some(_) => ("plots.input", &p.input),
                    None => ("inputs.params", &self.cfg.inputs.params),
                };
                let b = read_params(&self.input(key, value, "export-plots")?)?;
                let (w, h) = (b.params.width, b.params.height);
                let (depth, normals, labels) = masked_maps(&b);
                match p.kind.as_str() {
                    "depth_map" => write_map_png(&self.written("depth_map.png"), w, h, &depth, MapStyle::Scalar),
                    "normal_map" => write_map_png(&self.written("normal_map.png"), w, h, &normals, MapStyle::Normal),
                    _ => write_map_png(&self.written("cluster_map.png"), w, h, &labels, MapStyle::Label),
                }
            }
            other => Err(Error::Config(format!(
                    "plots.kind: unknown plot {other:?} (mueller_image, temporal_profile, depth_map, normal_map, cluster_map)"
            ))),
        }
    }
}

/// Depth, normal and label maps with NaN at masked pixels.
fn masked_maps(b: &ParamsBundle) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = b.params.num_pixels();
    let depth = (0..n).map(|p| if b.mask[p] { b.params.depth[p] } else { f64::NAN }).collect();
    let normals = (0..n)
        .flat_map(|p| if b.mask[p] { b.params.normals[p] } else { [f64::NAN; 3] })
        .collect();
    let labels = (0..n).map(|p| if b.mask[p] { b.labels[p] as f64 } else { f64::NAN }).collect();
    (depth, normals, labels)
}
