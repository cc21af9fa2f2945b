use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use gardner::arena::{append_result, run_match, Player};
use gardner::config::RunConfig;
use gardner::engine::{initial_board, perft, Color};
use gardner::env::{read_episode_logs, write_episode_logs, OpponentSpec};
use gardner::metrics;
use gardner::net::{Checkpoint, CheckpointMeta, Network, Phase};
use gardner::ppo::{train_iteration, EnvSource, Learner};
use gardner::pretrain::{collect_games, label_positions, pretrain_value, read_positions, write_positions, PositionDataset};
use gardner::rng::{derive_seed, stream};
use gardner::selfplay::{improve, select_champion, LeagueSettings, LeagueState};

/// Seed-derivation tags, one per subcommand stage.
const TAG_SINGLE: u64 = 100;
const TAG_COLLECT: u64 = 200;
const TAG_SPLIT: u64 = 201;
const TAG_PRETRAIN: u64 = 202;

#[derive(Parser)]
#[command(name = "gardner", version, about = "Self-play reinforcement learning for Gardner minichess")]
struct Cli {
    /// Preset name or TOML config file.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Overrides the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 gives bit-reproducible runs.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Overrides the config's working directory.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print perft node counts of the initial position for depths 1..=DEPTH.
    Perft { depth: u32 },
    /// Train one color against a random opponent.
    TrainSingle {
        #[arg(long, default_value = "white")]
        color: String,
        /// Number of training iterations.
        #[arg(long, default_value_t = 1)]
        iterations: u32,
        /// Start from this checkpoint (e.g. a pretrained one); its policy head is reinitialized.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Run the iterative self-play league, resuming if a manifest exists.
    Selfplay,
    /// Play a match; each side is `random` or a checkpoint path.
    Evaluate {
        #[arg(long)]
        white: String,
        #[arg(long)]
        black: String,
        /// Games; defaults to arena.games.
        #[arg(short, long)]
        n: Option<u64>,
    },
    /// Play and label games for value pretraining.
    Collect {
        /// Games; defaults to pretrain.games.
        #[arg(long)]
        games: Option<u64>,
    },
    /// Pretrain the value head on the collected dataset.
    Pretrain,
}

struct Ctx {
    cfg: RunConfig,
    workdir: PathBuf,
    workers: usize,
}

impl Ctx {
    fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.workdir.join(rel)
    }

    fn checkpoint(&self, name: &str) -> PathBuf {
        self.workdir.join(&self.cfg.paths.checkpoints).join(name)
    }

    fn prepare(&self) -> Result<()> {
        fs::create_dir_all(self.path(&self.cfg.paths.checkpoints))?;
        fs::create_dir_all(self.path(&self.cfg.paths.logs))?;
        self.cfg.write_snapshot(&self.workdir)?;
        Ok(())
    }
}

fn parse_color(s: &str) -> Result<Color> {
    match s {
        "white" => Ok(Color::White),
        "black" => Ok(Color::Black),
        _ => bail!("color must be white or black, got {s}"),
    }
}

fn cmd_perft(depth: u32) {
    let board = initial_board();
    for d in 1..=depth {
        println!("{}", perft(&board, d));
    }
    if depth == 0 {
        println!("{}", perft(&board, 0));
    }
}

fn cmd_train_single(ctx: &Ctx, color: Color, iterations: u32, init: Option<&Path>) -> Result<()> {
    ctx.prepare()?;
    let cfg = &ctx.cfg;
    let seed = derive_seed(cfg.seed, &[TAG_SINGLE]);
    let mut init_rng = stream(seed, 0);
    let net = match init {
        Some(path) => {
            let mut net = Checkpoint::load(path, Some(&cfg.network))
                .with_context(|| format!("loading {}", path.display()))?
                .net;
            net.reinit_policy_head(&mut init_rng);
            net
        }
        None => Network::init(cfg.network, &mut init_rng),
    };
    let meta = CheckpointMeta {
        seed,
        color: Some(color),
        epsilon: 1.0,
        opponent: "random".into(),
        ..Default::default()
    };
    Checkpoint::new(net.clone(), meta.clone()).save(ctx.checkpoint(&format!("single_{}_init.ckpt", color.as_str())))?;

    let mut learner = Learner::new(net, &cfg.ppo);
    let source = EnvSource {
        opponent: OpponentSpec::random(),
        color,
    };
    let mut rng = stream(seed, 1);
    let metrics_path = ctx.path("metrics.csv");
    let out = ctx.checkpoint(&format!("single_{}.ckpt", color.as_str()));
    for k in 1..=iterations {
        let rows = train_iteration(&mut learner, &source, &cfg.ppo, k, &mut rng)?;
        metrics::append_rows(&metrics_path, &rows)?;
        if let Some(r) = rows.last() {
            eprintln!(
                "iteration {k}: steps {} mean reward {} mean length {}",
                r.steps,
                r.mean_episode_reward.map_or("-".into(), |v| format!("{v:.3}")),
                r.mean_episode_length.map_or("-".into(), |v| format!("{v:.1}")),
            );
        }
        // saved every iteration so a failed run keeps its last good parameters
        Checkpoint::new(
            learner.net.clone(),
            CheckpointMeta {
                step: learner.steps,
                iteration: k,
                phase: Phase::Rl,
                ..meta.clone()
            },
        )
        .save(&out)?;
    }
    println!("{}", out.display());
    Ok(())
}

fn league_settings(ctx: &Ctx) -> LeagueSettings {
    let cfg = &ctx.cfg;
    LeagueSettings {
        net: cfg.network,
        ppo: cfg.ppo.clone(),
        selfplay: cfg.selfplay.clone(),
        arena_games: cfg.arena.games,
        arena_seed: cfg.arena.seed,
        seed: cfg.seed,
        workers: ctx.workers,
        checkpoints: cfg.paths.checkpoints.clone(),
    }
}

fn cmd_selfplay(ctx: &Ctx) -> Result<()> {
    ctx.prepare()?;
    let settings = league_settings(ctx);
    let mut league = LeagueState::open_or_init(&ctx.workdir, &settings)?;
    let done = league.completed_iterations();
    if done > 0 {
        eprintln!("resuming after iteration {done}");
    }
    improve(&mut league, &settings)?;
    for r in &league.records {
        println!("{} {} {:.4}", r.iteration, r.color.as_str(), r.winrate);
    }
    if league.completed_iterations() > 0 {
        let (w, b) = select_champion(&league, &ctx.cfg.network)?;
        println!("champion white {} black {}", w.meta.iteration, b.meta.iteration);
        w.save(ctx.checkpoint("champion_white.ckpt"))?;
        b.save(ctx.checkpoint("champion_black.ckpt"))?;
    }
    Ok(())
}

fn player(spec: &str, ctx: &Ctx) -> Result<Player> {
    if spec == "random" {
        return Ok(Player::Random);
    }
    let ck = Checkpoint::load(spec, Some(&ctx.cfg.network)).with_context(|| format!("loading checkpoint {spec}"))?;
    let net = Arc::new(ck.net);
    Ok(if ctx.cfg.arena.sample {
        Player::Sample(net)
    } else {
        Player::Greedy(net)
    })
}

fn cmd_evaluate(ctx: &Ctx, white: &str, black: &str, n: Option<u64>) -> Result<()> {
    let (w, b) = (player(white, ctx)?, player(black, ctx)?);
    ctx.prepare()?;
    let n = n.unwrap_or(ctx.cfg.arena.games);
    if n == 0 {
        bail!("a match needs at least one game");
    }
    let seed = ctx.cfg.arena.seed;
    let r = run_match(&w, &b, n, seed);
    append_result(ctx.path("results.csv"), white, black, seed, &r)?;
    println!("{}", r.white_win_rate);
    eprintln!(
        "white {} black {} draws {} ci95 {:.4} mean reward {:.3} mean length {:.1}",
        r.white_wins, r.black_wins, r.draws, r.ci95, r.mean_reward, r.mean_length
    );
    Ok(())
}

fn cmd_collect(ctx: &Ctx, games: Option<u64>) -> Result<()> {
    ctx.prepare()?;
    let cfg = &ctx.cfg;
    let games = games.unwrap_or(cfg.pretrain.games);
    if games == 0 {
        bail!("collect needs at least one game");
    }
    let logs = collect_games(games, &Player::Random, &Player::Random, derive_seed(cfg.seed, &[TAG_COLLECT]));
    let log_path = ctx.path(Path::new(&cfg.paths.logs).join("games.jsonl"));
    write_episode_logs(fs::File::create(&log_path)?, &logs)?;
    let positions = label_positions(&logs, cfg.pretrain.depth);
    write_positions(ctx.path("dataset.jsonl"), &positions)?;
    println!("{} games, {} positions", logs.len(), positions.len());
    Ok(())
}

fn cmd_pretrain(ctx: &Ctx) -> Result<()> {
    ctx.prepare()?;
    let cfg = &ctx.cfg;
    let data_path = ctx.path("dataset.jsonl");
    let positions = if data_path.exists() {
        read_positions(&data_path)?
    } else {
        let log_path = ctx.path(Path::new(&cfg.paths.logs).join("games.jsonl"));
        let logs = read_episode_logs(std::io::BufReader::new(
            fs::File::open(&log_path).context("no dataset; run `collect` first")?,
        ))?;
        label_positions(&logs, cfg.pretrain.depth)
    };
    if positions.is_empty() {
        bail!("dataset is empty");
    }
    let dataset = PositionDataset::split(positions, cfg.pretrain.split, derive_seed(cfg.seed, &[TAG_SPLIT]));
    let seed = derive_seed(cfg.seed, &[TAG_PRETRAIN]);
    let net = Network::init(cfg.network, &mut stream(seed, 0));
    let (net, curve) = pretrain_value(&net, &dataset, &cfg.pretrain, &mut stream(seed, 1))?;
    let role = cfg.pretrain.role;
    let per_epoch = dataset.train.iter().filter(|p| p.target(role).is_some()).count() as u64;
    let rows: Vec<_> = curve.iter().map(|e| e.to_metrics(per_epoch * e.epoch as u64)).collect();
    metrics::append_rows(ctx.path("metrics.csv"), &rows)?;
    for e in &curve {
        eprintln!("epoch {}: train {:.5} validation {:.5}", e.epoch, e.train, e.validation);
    }
    let out = ctx.checkpoint("pretrained.ckpt");
    Checkpoint::new(
        net,
        CheckpointMeta {
            step: curve.len() as u64 * per_epoch,
            seed,
            color: Some(role),
            phase: Phase::Pretrain,
            ..Default::default()
        },
    )
    .save(&out)?;
    println!("{}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Command::Perft { depth } = cli.command {
        cmd_perft(depth);
        return Ok(());
    }
    let mut cfg = match &cli.config {
        Some(spec) => RunConfig::load(spec)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.workdir {
        cfg.paths.workdir = dir.clone();
    }
    if cli.workers == 0 {
        bail!("--workers must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global()?;
    let ctx = Ctx {
        workdir: cfg.paths.workdir.clone(),
        cfg,
        workers: cli.workers,
    };
    match cli.command {
        Command::Perft { .. } => unreachable!(),
        Command::TrainSingle { color, iterations, init } => {
            cmd_train_single(&ctx, parse_color(&color)?, iterations, init.as_deref())
        }
        Command::Selfplay => cmd_selfplay(&ctx),
        Command::Evaluate { white, black, n } => cmd_evaluate(&ctx, &white, &black, n),
        Command::Collect { games } => cmd_collect(&ctx, games),
        Command::Pretrain => cmd_pretrain(&ctx),
    }
}
