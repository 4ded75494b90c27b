mod image_io;

use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use latorg::control::{self, AttributeTargets, Degradation, SolveConfig, SolveStart, DEFAULT_BETA};
use latorg::metrics::{evaluate, EvalConfig};
use latorg::personalize::{self, PersonalizedModel, PretrainConfig, Pretrained, TrainConfig};
use latorg::toyface::{self, Dataset, Image, WorldConfig};
use latorg_service::{AppState, ServiceConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use image_io::{read_image, write_image, write_raw};

#[derive(Parser)]
#[command(
    name = "latorg",
    version,
    about = "Organized latent spaces for personalized toy-face generators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a toy dataset: one individual, or a population with `--identities`.
    Dataset {
        #[arg(long, default_value_t = 42)]
        individual_seed: u64,
        #[arg(long, default_value_t = 120)]
        count: usize,
        #[arg(long, default_value_t = 4242)]
        rng_seed: u64,
        /// Render `identities × count` images of random individuals instead.
        #[arg(long)]
        identities: Option<usize>,
        #[arg(long)]
        softness: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretrain the population autoencoder.
    Pretrain {
        #[arg(long)]
        dataset: PathBuf,
        /// JSON with any subset of the pretraining settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tune a pretrained generator and its anchors on one individual.
    Personalize {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        pretrained: PathBuf,
        /// JSON with any subset of the tuning settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Train the reconstruction-only baseline.
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample an image with optional attribute targets.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Invert an image (or sample one) and set attributes to the targets.
    Edit {
        #[command(flatten)]
        common: Common,
        /// Image to invert; without it a sampled latent is edited.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        allow_extrapolation: bool,
    },
    /// Restore a degraded image under attribute targets.
    Enhance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// PGM/PNG whose bright pixels (≥ 0.5) mark the region to fill.
        #[arg(long, conflicts_with = "downsample")]
        mask: Option<PathBuf>,
        /// The input is the original downsampled by this factor.
        #[arg(long)]
        downsample: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Compare a model with its baseline and write the report.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write `synthesis.csv` and `edits.csv` into this directory.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
    },
    /// Serve the HTTP API and, optionally, a static web UI.
    Serve {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        max_sessions: usize,
        #[arg(long, default_value_t = 1800)]
        idle_secs: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    model: PathBuf,
    /// `name=value` with value in [0, 1]; repeatable.
    #[arg(long = "target", value_parser = parse_target)]
    targets: Vec<(String, f64)>,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// Output image, `.png` or PGM.
    #[arg(long)]
    out: PathBuf,
    /// Also write the exact float pixels to `<out>.raw.json`.
    #[arg(long)]
    raw: bool,
    /// Start inversions from equal anchor weights rather than from the
    /// best-matching anchor.
    #[arg(long)]
    uniform_start: bool,
}

fn parse_target(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let value: f64 = value.parse().map_err(|e| format!("bad value in `{s}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

impl Common {
    fn load(&self) -> Result<(PersonalizedModel<f64>, AttributeTargets)> {
        let model =
            PersonalizedModel::<f64>::load(&self.model).with_context(|| format!("loading {}", self.model.display()))?;
        let targets = AttributeTargets::from_named(model.schema(), self.targets.iter().map(|(n, v)| (n.as_str(), *v)))?;
        Ok((model, targets))
    }

    fn solve(&self) -> SolveConfig {
        SolveConfig {
            beta: self.beta,
            start: if self.uniform_start {
                SolveStart::Uniform
            } else {
                SolveStart::BestAnchor
            },
            ..SolveConfig::default()
        }
    }

    fn save(&self, image: &Image) -> Result<()> {
        write_image(&self.out, image)?;
        if self.raw {
            write_raw(&self.out, image)?;
        }
        Ok(())
    }
}

fn read_json_or_default<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => Ok(serde_json::from_str(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?),
        None => Ok(T::default()),
    }
}

fn print_coords(model: &PersonalizedModel<f64>, latent: &[f64]) {
    for (m, name) in model.schema().names().iter().enumerate() {
        println!("{name}: {:.4}", model.basis.coordinate(latent, m));
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Dataset {
            individual_seed,
            count,
            rng_seed,
            identities,
            softness,
            out,
        } => {
            let world = WorldConfig {
                softness,
                ..WorldConfig::default()
            };
            let ds = match identities {
                Some(k) => toyface::make_population(&world, k, count, rng_seed)?,
                None => toyface::make_dataset_with(&world, individual_seed, count, rng_seed)?,
            };
            ds.save(&out)?;
            println!("wrote {} images to {}", ds.len(), out.display());
        }
        Command::Pretrain { dataset, config, out } => {
            let population = Dataset::load(&dataset)?;
            let config: PretrainConfig = read_json_or_default(&config)?;
            let p = personalize::pretrain::<f64>(&population, &config)?;
            println!(
                "pretrained {} epochs, final mse {:.3e}{}",
                p.report.epochs_run,
                p.report.final_mse,
                if p.report.reached_target {
                    " (target reached)"
                } else {
                    ""
                }
            );
            p.save(&out)?;
        }
        Command::Personalize {
            dataset,
            pretrained,
            config,
            baseline,
            out,
        } => {
            let personal = Dataset::load(&dataset)?;
            let pre = Pretrained::<f64>::load(&pretrained)?;
            let mut config = match &config {
                Some(p) => TrainConfig::from_json(&std::fs::read_to_string(p)?)?,
                None => TrainConfig::default(),
            };
            if baseline {
                config = config.baseline();
            }
            let anchors = personalize::init_anchors(&pre.encoder, &personal, &personal.schema)?;
            let tuning = personalize::tune(&pre.generator, anchors, &personal, &config)?;
            if let Some(last) = tuning.history.epochs.last() {
                println!("final epoch: recon {:.4e}, anchor {:.4e}", last.recon, last.anchor);
            }
            tuning.model.save(&out)?;
            println!("model digest {}", tuning.model.digest());
        }
        Command::Sample { common, seed } => {
            let (model, targets) = common.load()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = control::synthesize(&model, &targets, common.beta, false, &mut rng)?;
            common.save(&s.image)?;
            print_coords(&model, &s.latent);
        }
        Command::Edit {
            common,
            input,
            seed,
            allow_extrapolation,
        } => {
            let (model, targets) = common.load()?;
            let solve = common.solve();
            let (generator_model, mut latent) = match &input {
                Some(path) => {
                    let image = read_image(path)?;
                    let inverted = control::invert(&model, &image, &solve)?;
                    let tuned = control::pivotal_tune(&model.generator, &inverted.latent, &image, &Default::default())?;
                    let mut own = model.clone();
                    own.generator = tuned;
                    (own, inverted.latent)
                }
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let (w, _) = control::sample_latent(
                        &model,
                        &AttributeTargets::none(model.schema().len()),
                        common.beta,
                        false,
                        &mut rng,
                    )?;
                    (model.clone(), w)
                }
            };
            for (m, v) in targets.iter() {
                latent = control::edit(&generator_model, &latent, m, v, allow_extrapolation)?.latent;
            }
            common.save(&generator_model.generate(&latent)?)?;
            print_coords(&generator_model, &latent);
        }
        Command::Enhance {
            common,
            input,
            mask,
            downsample,
            lambda,
            iters,
        } => {
            let (model, targets) = common.load()?;
            let res = model.resolution();
            let observed = read_image(&input)?;
            let q = match (&mask, downsample) {
                (Some(path), _) => {
                    let m = read_image(path)?;
                    if m.resolution() != res {
                        bail!(
                            "mask is {}x{}, model is {}x{}",
                            m.width,
                            m.height,
                            res.width,
                            res.height
                        );
                    }
                    Degradation::mask(res, m.pixels.iter().map(|&p| p < 0.5).collect())?
                }
                (None, Some(factor)) => Degradation::Downsample { factor },
                (None, None) => Degradation::Identity,
            };
            let mut solve = common.solve();
            if let Some(l) = lambda {
                solve.lambda = l;
            }
            if let Some(i) = iters {
                solve.iters = i;
            }
            let solved = control::enhance(&model, &observed, &q, &targets, &solve)?;
            common.save(&solved.image)?;
            println!("loss {:.4e}", solved.loss);
            print_coords(&model, &solved.latent);
        }
        Command::Eval {
            model,
            baseline,
            dataset,
            config,
            out,
            csv_dir,
        } => {
            let ours = PersonalizedModel::<f64>::load(&model)?;
            let base = PersonalizedModel::<f64>::load(&baseline)?;
            let training = Dataset::load(&dataset)?;
            let config: EvalConfig = read_json_or_default(&config)?;
            let report = evaluate(&ours, &base, &training, &config)?;
            std::fs::write(&out, report.to_json()?)?;
            if let Some(dir) = csv_dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("synthesis.csv"), report.synthesis_csv()?)?;
                std::fs::write(dir.join("edits.csv"), report.edit_csv()?)?;
            }
            print!("{}", report.synthesis_csv()?);
        }
        Command::Serve {
            model,
            port,
            host,
            static_dir,
            max_sessions,
            idle_secs,
        } => {
            let model = model.map(|p| PersonalizedModel::<f64>::load(&p)).transpose()?;
            if model.is_none() {
                log::warn!("no model given; model endpoints will answer 503");
            }
            let config = ServiceConfig {
                max_sessions,
                idle_timeout: std::time::Duration::from_secs(idle_secs),
                static_dir,
                ..ServiceConfig::default()
            };
            let state = AppState::new(model, config);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(latorg_service::serve(state, SocketAddr::new(host, port)))?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
