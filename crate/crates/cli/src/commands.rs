use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use nalgebra::Vector3;

use forge_core::camera::{
    compress_actions, fold_actions, parse_trajectory, write_trajectory, ActionKey, CameraPose, Intrinsics, PlueckerField,
};
use forge_core::codec::{decode_frame, encode_frames};
use forge_core::container::save_volume;
use forge_core::curation::{self, fixture};
use forge_core::denoise::{BridgeDenoiser, Schedule};
use forge_core::extend::{make_loop, ConditionKind, SessionState};
use forge_core::seamless::{make_seamless, SeamDirection, SeamSpec};
use forge_core::tiled::{upscale_video, BlendMode, Extent3};
use forge_core::{LatentVolume, Rgba8Image};

use crate::config::RunConfig;
use crate::server::Server;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "forge", version, about = "Latent denoising toolkit and steering service")]
pub struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sampler steps.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score, tier, balance and caption a corpus directory.
    Curate {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Make a PNG wrap-tileable.
    Seamless {
        input: PathBuf,
        output: PathBuf,
        /// horizontal, vertical or both
        #[arg(long)]
        direction: Option<SeamDirection>,
        #[arg(long)]
        band: Option<usize>,
    },
    /// Tiled super-resolution of a PNG or a directory of frames.
    Upscale {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        scale: Option<usize>,
        /// Tile extent as FRAMES,HEIGHT,WIDTH.
        #[arg(long, value_parser = parse_extent)]
        tile: Option<Extent3>,
        /// Overlap as FRAMES,HEIGHT,WIDTH.
        #[arg(long, value_parser = parse_extent)]
        overlap: Option<Extent3>,
        /// uniform or feathered
        #[arg(long, value_parser = parse_blend)]
        blend: Option<BlendMode>,
    },
    /// Turn a still into a clip that starts and ends on it.
    Loop {
        input: PathBuf,
        /// Directory that receives 0000.png, 0001.png, ...
        output: PathBuf,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Extend a saved session by a key sequence such as "W,W,Left".
    Extend {
        session: PathBuf,
        keys: String,
        /// Start a new session from this PNG instead of loading one.
        #[arg(long)]
        image: Option<PathBuf>,
        /// single, previous:N or full
        #[arg(long)]
        kind: Option<ConditionKind>,
        /// Also write the new frames as PNGs here.
        #[arg(long)]
        frames_out: Option<PathBuf>,
    },
    /// Fold a key sequence into a trajectory file.
    Trajectory {
        keys: String,
        output: PathBuf,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
    },
    /// Write the Plücker field of a trajectory as an FGLV volume.
    Pluecker {
        trajectory: PathBuf,
        output: PathBuf,
        /// Average-pool with the configured factors.
        #[arg(long)]
        compress: bool,
    },
    /// Run the steering service.
    Serve {
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        session_root: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Write the synthetic curation corpus.
    #[command(hide = true)]
    Fixture {
        output: PathBuf,
        #[arg(long, default_value_t = fixture::FIXTURE_SEED)]
        corpus_seed: u64,
    },
}

fn parse_extent(s: &str) -> Result<Extent3, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [t, h, w] => Ok(Extent3::new(t, h, w)),
        _ => Err(format!("expected FRAMES,HEIGHT,WIDTH, got {s:?}")),
    }
}

fn parse_blend(s: &str) -> Result<BlendMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "uniform" => Ok(BlendMode::Uniform),
        "feathered" => Ok(BlendMode::Feathered),
        _ => Err(format!("unknown blend mode {s:?}")),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                return 1;
            }
            let _ = write!(out, "{text}");
            return 0;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Defaults, then the config file, then flags.
pub fn resolve(cli: &mut Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.steps {
        cfg.steps = s;
    }
    match &mut cli.command {
        Command::Curate { corpus, out } => {
            if let Some(c) = corpus.take() {
                cfg.paths.corpus = Some(c);
            }
            if let Some(o) = out.take() {
                cfg.paths.out = Some(o);
            }
        }
        Command::Seamless { direction, band, .. } => {
            if let Some(d) = *direction {
                cfg.seamless.direction = d;
            }
            if let Some(b) = *band {
                cfg.seamless.band = b;
            }
        }
        Command::Upscale { scale, tile, overlap, blend, .. } => {
            if let Some(s) = *scale {
                cfg.upscale.scale = s;
            }
            if let Some(t) = *tile {
                cfg.upscale.tile = t;
            }
            if let Some(o) = *overlap {
                cfg.upscale.overlap = o;
            }
            if let Some(b) = *blend {
                cfg.upscale.blend = b;
            }
        }
        Command::Loop { frames, .. } => {
            if let Some(f) = *frames {
                cfg.looping.frames = f;
            }
        }
        Command::Extend { kind, .. } => {
            if let Some(k) = *kind {
                cfg.session.kind = k;
            }
        }
        Command::Serve { host, port, session_root, static_dir } => {
            if let Some(h) = host.take() {
                cfg.serve.host = h;
            }
            if let Some(p) = *port {
                cfg.serve.port = p;
            }
            if let Some(r) = session_root.take() {
                cfg.serve.session_root = r;
            }
            if let Some(s) = static_dir.take() {
                cfg.serve.static_dir = Some(s);
            }
        }
        Command::Trajectory { .. } | Command::Pluecker { .. } | Command::Fixture { .. } => {}
    }
    Ok(cfg)
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("{} holds no PNG frames", dir.display())));
    }
    Ok(paths)
}

fn write_frames(vol: &LatentVolume, dir: &Path, first: usize) -> Result<usize, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let frames = vol.shape().frames;
    for t in first..frames {
        decode_frame(vol, t)?.save_png(dir.join(format!("{:04}.png", t - first)))?;
    }
    Ok(frames - first)
}

fn execute(mut cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve(&mut cli)?;
    let _ = writeln!(err, "# resolved configuration\n{}", cfg.to_toml());
    let model = BridgeDenoiser;
    let schedule = || Schedule::uniform(cfg.steps).map_err(CliError::from);
    let say = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(|e| CliError::Io(e.to_string()));
    match cli.command {
        Command::Curate { .. } => {
            let corpus = cfg.paths.corpus.clone().ok_or_else(|| CliError::Usage("curate needs --corpus or paths.corpus".into()))?;
            let dest = cfg.paths.out.clone().ok_or_else(|| CliError::Usage("curate needs --out or paths.out".into()))?;
            let run = curation::run(&corpus, &cfg.curation_config())?;
            curation::write_outputs(&run, &dest)?;
            let s = &run.summary;
            say(out, format!("{} assets, {} records, {} rejected, {} selected", s.assets, s.records, s.rejected, run.entries.iter().filter(|e| e.selected).count()))?;
        }
        Command::Seamless { input, output, .. } => {
            let image = Rgba8Image::load_png(&input)?;
            let spec = SeamSpec::new(cfg.seamless.direction, cfg.seamless.band);
            make_seamless(&image, &spec, &model, &schedule()?, cfg.seed)?.save_png(&output)?;
            say(out, format!("wrote {}", output.display()))?;
        }
        Command::Upscale { input, output, .. } => {
            let single = input.is_file();
            let frames = if single {
                vec![Rgba8Image::load_png(&input)?]
            } else {
                frame_paths(&input)?.iter().map(Rgba8Image::load_png).collect::<Result<Vec<_>, _>>()?
            };
            let lr = encode_frames(&frames)?;
            let hr = upscale_video(&lr, cfg.upscale.scale, &model, &schedule()?, &cfg.upscale.tile_params(), cfg.seed)?;
            if single {
                decode_frame(&hr, 0)?.save_png(&output)?;
            } else {
                write_frames(&hr, &output, 0)?;
            }
            let s = hr.shape();
            say(out, format!("wrote {} frame(s) of {}x{} to {}", s.frames, s.width, s.height, output.display()))?;
        }
        Command::Loop { input, output, .. } => {
            let image = Rgba8Image::load_png(&input)?;
            let clip = make_loop(&image, cfg.looping.frames, &model, &schedule()?, cfg.seed)?;
            let n = write_frames(&clip, &output, 0)?;
            say(out, format!("wrote {n} frames to {}", output.display()))?;
        }
        Command::Extend { session, keys, image, frames_out, .. } => {
            let keys = ActionKey::parse_list(&keys)?;
            let mut state = match image {
                Some(path) => {
                    let image = Rgba8Image::load_png(&path)?;
                    let pose = CameraPose::looking_forward(
                        Vector3::new(0.0, cfg.session.eye_height, 0.0),
                        Intrinsics::centered(image.width(), image.height(), cfg.session.fov),
                    );
                    SessionState::start(&image, pose, cfg.session_config())?
                }
                None => SessionState::import(&session)?,
            };
            let range = state.extend(&keys, cfg.session.kind, &model)?.frames();
            state.export(&session)?;
            if let Some(dir) = frames_out {
                write_frames(state.timeline(), &dir, range.start)?;
            }
            say(out, format!("frames {}..{} ({} total)", range.start, range.end, state.frame_count()))?;
        }
        Command::Trajectory { keys, output, width, height } => {
            let keys = ActionKey::parse_list(&keys)?;
            let start = CameraPose::looking_forward(
                Vector3::new(0.0, cfg.session.eye_height, 0.0),
                Intrinsics::centered(width, height, cfg.session.fov),
            );
            let traj = fold_actions(&start, &keys, &cfg.motion)?;
            fs::write(&output, write_trajectory(&traj)).map_err(|e| io_err(&output, e))?;
            say(out, format!("wrote {} poses to {}", traj.len(), output.display()))?;
        }
        Command::Pluecker { trajectory, output, compress } => {
            let text = fs::read_to_string(&trajectory).map_err(|e| io_err(&trajectory, e))?;
            let traj = parse_trajectory(&text, &trajectory.display().to_string())?;
            let first = traj.poses.first().ok_or_else(|| CliError::Usage("trajectory has no poses".into()))?;
            let (height, width) = ((2.0 * first.intrinsics.cy).round() as usize, (2.0 * first.intrinsics.cx).round() as usize);
            let field = PlueckerField::for_trajectory(&traj, height, width)?;
            let vol = if compress { compress_actions(&field, &cfg.compress)? } else { field.to_volume() };
            save_volume(&vol, &output)?;
            say(out, format!("wrote {} to {}", vol.shape(), output.display()))?;
        }
        Command::Serve { .. } => {
            let server = Server::bind(cfg, Arc::new(model)).map_err(|e| CliError::Io(e.to_string()))?;
            let addr = server.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
            say(out, format!("listening on {addr}"))?;
            out.flush().map_err(|e| CliError::Io(e.to_string()))?;
            server.serve().map_err(|e| CliError::Io(e.to_string()))?;
        }
        Command::Fixture { output, corpus_seed } => {
            fixture::write_fixture_corpus(&output, corpus_seed)?;
            say(out, format!("wrote fixture corpus to {}", output.display()))?;
        }
    }
    Ok(())
}
