//! `pcs-race`: policy synthesis, regret data collection, training and races.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pcs_race::es::{extract_collections, to_params, write_progress_csv, EsOptions, EvalSet, Evaluator, Synthesis};
use pcs_race::game::{read_dataset, sample_count, summary_path, write_dataset, write_summary, StartPose};
use pcs_race::harness::{
    ego_seed, format_table, mean_std, opp_seed, paired_ttest, planned_games, read_variants_csv, run_experiment, run_race, start_lines, write_action_log, write_games_csv,
    write_pcs_trace, write_race_summary, write_report_csv, write_variants_csv, AgentKind, AgentSpec, ExperimentPlan, RaceContext, RegretModel,
};
use pcs_race::pcs::{PcsNormalizer, PolicyCollection};
use pcs_race::pipeline::{build_env, collect_dataset, race_context, CollectionInputs};
use pcs_race::regret::{train, write_train_log, Dataset, Mlp, TrainOptions, FEATURE_LEN};
use pcs_race::sim::write_trajectories_csv;
use pcs_race::{Config, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "pcs-race", version, about = "Game-theoretic racing strategies in a policy characteristic space")]
struct Cli {
    /// TOML configuration; defaults apply to anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for every input and output file unless overridden.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Log level filter (error, warn, info, debug).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve planner parameters with multi-objective CMA-ES.
    Synthesize(SynthesizeArgs),
    /// Extract Pareto, near-optimal and DPP subsets from an archive.
    Sets(SetsArgs),
    /// Enumerate game trees and write the regret dataset.
    Collect(CollectArgs),
    /// Fit the regret network.
    Train(TrainArgs),
    /// Run one race and write its action log.
    Race(RaceArgs),
    /// Run the tournament and write the win-rate report.
    Experiment(ExperimentArgs),
    /// Recompute paired t-tests from stored per-variant win rates.
    Stats(StatsArgs),
    /// Write CSVs for PCS figures.
    PlotData(PlotArgs),
}

#[derive(Args, Debug)]
struct SynthesizeArgs {
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Args, Debug)]
struct SetsArgs {
    #[arg(long)]
    archive: Option<PathBuf>,
    #[arg(long)]
    n_dpp: Option<usize>,
    #[arg(long)]
    d_near: Option<f64>,
}

#[derive(Args, Debug)]
struct CollectArgs {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n_init: Option<usize>,
    /// Directory holding the policy sets (defaults to the output directory).
    #[arg(long)]
    sets: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Train in 64-bit floats (the saved model is 32-bit either way).
    #[arg(long)]
    f64: bool,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Regret model for GT agents.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    sets: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RaceArgs {
    #[arg(long, default_value = "gt")]
    ego: String,
    #[arg(long, default_value = "non-gt")]
    opp: String,
    /// Start position along the centerline; drawn from the seed if absent.
    #[arg(long)]
    start: Option<f64>,
    #[arg(long)]
    swap: bool,
    #[command(flatten)]
    inputs: ModelArgs,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Print the planned game count and exit.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    n_ego: Option<usize>,
    #[arg(long)]
    n_opp: Option<usize>,
    #[arg(long)]
    n_starts: Option<usize>,
    /// Comma-separated opponent kinds (non-gt, random, unseen).
    #[arg(long, value_delimiter = ',')]
    opponents: Option<Vec<String>>,
    #[command(flatten)]
    inputs: ModelArgs,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    variants: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[command(flatten)]
    inputs: ModelArgs,
    /// Also race a GT ego against a non-GT opponent and write its PCS trace.
    #[arg(long)]
    race: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| Error::io(&cli.out_dir, e))?;
    let ctx = Ctx { seed: cli.seed, out: cli.out_dir.clone() };
    match cli.command {
        Command::Synthesize(a) => synthesize(&ctx, &mut cfg, a),
        Command::Sets(a) => sets(&ctx, &mut cfg, a),
        Command::Collect(a) => collect(&ctx, &mut cfg, a),
        Command::Train(a) => train_cmd(&ctx, &mut cfg, a),
        Command::Race(a) => race(&ctx, &cfg, a),
        Command::Experiment(a) => experiment(&ctx, &mut cfg, a),
        Command::Stats(a) => stats(&ctx, a),
        Command::PlotData(a) => plot_data(&ctx, &cfg, a),
    }
}

struct Ctx {
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn synthesize(ctx: &Ctx, cfg: &mut Config, a: SynthesizeArgs) -> Result<()> {
    if let Some(g) = a.generations {
        cfg.es.generations = g;
    }
    if let Some(p) = a.population {
        cfg.es.population = p;
    }
    cfg.validate()?;
    let env = build_env(cfg)?;
    let freeze = cfg.planner.freeze_gamma_v;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let set = EvalSet::random(cfg.es.eval_pairings, cfg.es.eval_duration, cfg.game.start_offset, env.track.length(), freeze, &mut rng);
    let evaluator = Evaluator { env, set, ttc_clamp: cfg.pcs.ttc_clamp, exploration_bonus: cfg.es.exploration_bonus };
    let checkpoint = ctx.path("checkpoint.bin");
    let mut synth = if a.resume {
        Synthesis::load_checkpoint(&checkpoint)?
    } else {
        Synthesis::new(&EsOptions::from_config(&cfg.es, ctx.seed, freeze))?
    };
    let eval = |x: &[f64]| evaluator.evaluate(&to_params(x, freeze));
    synth.run(cfg.es.generations, &eval, |s, _| {
        s.save_checkpoint(&checkpoint)?;
        write_progress_csv(&ctx.path("progress.csv"), &s.history)
    })?;
    synth.archive.collection(freeze)?.write_csv(&ctx.path("archive.csv"))?;
    println!("archive: {} policies, {} on the Pareto front", synth.archive.len(), synth.archive.pareto_mask.iter().filter(|&&p| p).count());
    Ok(())
}

fn sets(ctx: &Ctx, cfg: &mut Config, a: SetsArgs) -> Result<()> {
    let archive = a.archive.unwrap_or_else(|| ctx.path("archive.csv"));
    let all = PolicyCollection::read_csv(&archive)?;
    let n_dpp = a.n_dpp.unwrap_or(cfg.es.n_dpp);
    let d_near = a.d_near.unwrap_or(cfg.es.d_near);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let s = extract_collections(&all, d_near, n_dpp, &mut rng)?;
    s.pareto.write_csv(&ctx.path("pareto.csv"))?;
    s.near_optimal.write_csv(&ctx.path("near_optimal.csv"))?;
    s.dpp1.write_csv(&ctx.path("dpp1.csv"))?;
    s.dpp2.write_csv(&ctx.path("dpp2.csv"))?;
    s.normalizer.save(&ctx.path("normalizer.json"))?;
    if archive != ctx.path("archive.csv") {
        all.write_csv(&ctx.path("archive.csv"))?;
    }
    println!("pareto {}, near-optimal {}, dpp subsets {} + {}", s.pareto.len(), s.near_optimal.len(), s.dpp1.len(), s.dpp2.len());
    Ok(())
}

fn read_set(dir: &Path, name: &str) -> Result<PolicyCollection> {
    PolicyCollection::read_csv(&dir.join(name))
}

fn collect(ctx: &Ctx, cfg: &mut Config, a: CollectArgs) -> Result<()> {
    if let Some(m) = a.m {
        cfg.game.m = m;
    }
    if let Some(n) = a.n_init {
        cfg.game.n_init = n;
    }
    cfg.validate()?;
    let dir = a.sets.unwrap_or_else(|| ctx.out.clone());
    let collection = read_set(&dir, "near_optimal.csv")?;
    let (ego, opp) = (read_set(&dir, "dpp1.csv")?, read_set(&dir, "dpp2.csv")?);
    let normalizer = PcsNormalizer::load(&dir.join("normalizer.json"))?;
    let env = build_env(cfg)?;
    let inputs = CollectionInputs { collection: &collection, ego_starts: &ego, opp_starts: &opp, normalizer };
    let (samples, summary) = collect_dataset(&env, cfg, &inputs, ctx.seed)?;
    let out = a.output.unwrap_or_else(|| ctx.path("dataset.bin"));
    write_dataset(&out, &samples)?;
    write_summary(&summary_path(&out), &summary)?;
    println!(
        "{} trees, {} games, {} samples (expected {}), {} failed branches",
        summary.trees,
        summary.games,
        summary.samples,
        sample_count(cfg.game.m, cfg.game.n_init),
        summary.failed_branches
    );
    Ok(())
}

fn train_cmd(ctx: &Ctx, cfg: &mut Config, a: TrainArgs) -> Result<()> {
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(h) = a.hidden {
        cfg.train.hidden = h;
    }
    cfg.validate()?;
    let path = a.dataset.unwrap_or_else(|| ctx.path("dataset.bin"));
    let data = Dataset::from_samples(&read_dataset(&path)?)?;
    let opts = TrainOptions::from_config(&cfg.train, ctx.seed);
    let (model, log, best_epoch, best_val) = if a.f64 {
        let r = train::<f64>(&data, &opts)?;
        (r.model.cast::<f32>(), r.log, r.best_epoch, r.best_val)
    } else {
        let r = train::<f32>(&data, &opts)?;
        (r.model, r.log, r.best_epoch, r.best_val)
    };
    model.save(&ctx.path("model.bin"))?;
    write_train_log(&ctx.path("train_log.csv"), &log)?;
    println!("{} samples, best validation L1 {best_val:.6} at epoch {best_epoch}", data.len());
    Ok(())
}

fn load_model(path: &Path) -> Result<Arc<dyn RegretModel>> {
    Ok(Arc::new(Mlp::<f32>::load(path, FEATURE_LEN)?))
}

struct RaceInputs {
    ctx: RaceContext,
    model: Option<Arc<dyn RegretModel>>,
}

fn race_inputs(ctx: &Ctx, cfg: &Config, a: &ModelArgs, need_model: bool) -> Result<RaceInputs> {
    let dir = a.sets.clone().unwrap_or_else(|| ctx.out.clone());
    let all = read_set(&dir, "archive.csv")?;
    let pareto = read_set(&dir, "pareto.csv")?;
    let strategy = read_set(&dir, "near_optimal.csv")?;
    let normalizer = PcsNormalizer::load(&dir.join("normalizer.json"))?;
    let model = match (&a.model, need_model) {
        (Some(p), _) => Some(load_model(p)?),
        (None, true) => Some(load_model(&ctx.path("model.bin"))?),
        (None, false) => None,
    };
    let env = build_env(cfg)?;
    Ok(RaceInputs { ctx: race_context(env, cfg, &all, &pareto, &strategy, normalizer), model })
}

fn race(ctx: &Ctx, cfg: &Config, a: RaceArgs) -> Result<()> {
    let (ek, ok) = (AgentKind::parse(&a.ego)?, AgentKind::parse(&a.opp)?);
    let inputs = race_inputs(ctx, cfg, &a.inputs, ek == AgentKind::Gt || ok == AgentKind::Gt)?;
    let ego = AgentSpec::of_kind(ek, inputs.model.clone(), ego_seed(ctx.seed, 0))?;
    let opp = AgentSpec::of_kind(ok, inputs.model.clone(), opp_seed(ctx.seed, 0))?;
    let s0 = match a.start {
        Some(s) => s,
        None => start_lines(ctx.seed, 1, inputs.ctx.env.track.length())[0],
    };
    let r = run_race(&inputs.ctx, &ego, &opp, StartPose { s0, swap: a.swap })?;
    write_race_summary(&ctx.path("race.csv"), &r)?;
    write_action_log(&ctx.path("actions_ego.csv"), &r.logs[0])?;
    write_action_log(&ctx.path("actions_opp.csv"), &r.logs[1])?;
    write_pcs_trace(&ctx.path("pcs_trace.csv"), &r.steps)?;
    write_trajectories_csv(&ctx.path("trajectories.csv"), &r.trajectories)?;
    println!("winner {} by {:.3} m{}", r.winner.name(), r.margin, if r.collision { " (collision)" } else { "" });
    Ok(())
}

fn experiment(ctx: &Ctx, cfg: &mut Config, a: ExperimentArgs) -> Result<()> {
    let e = &mut cfg.experiment;
    if let Some(n) = a.n_ego {
        e.n_ego = n;
    }
    if let Some(n) = a.n_opp {
        e.n_opp = n;
    }
    if let Some(n) = a.n_starts {
        e.n_starts = n;
    }
    if let Some(o) = a.opponents {
        e.opponents = o;
    }
    let kinds = e.opponents.iter().map(|s| AgentKind::parse(s)).collect::<Result<Vec<_>>>()?;
    if kinds.contains(&AgentKind::Gt) {
        return Err(Error::InvalidArgument("opponent kinds are non-gt, random and unseen".into()));
    }
    let per_matchup = planned_games(e.n_ego, e.n_opp, e.n_starts);
    let total = 2 * per_matchup * kinds.len();
    if a.dry_run {
        println!(
            "{per_matchup} games per opponent kind and ego condition ({} ego x {} opp x {} starts x 2 sides); {total} games in total",
            e.n_ego, e.n_opp, e.n_starts
        );
        return Ok(());
    }
    let inputs = race_inputs(ctx, cfg, &a.inputs, true)?;
    let plan = ExperimentPlan {
        opponents: kinds,
        n_ego: cfg.experiment.n_ego,
        n_opp: cfg.experiment.n_opp,
        starts: start_lines(ctx.seed, cfg.experiment.n_starts, inputs.ctx.env.track.length()),
        seed: ctx.seed,
    };
    let report = run_experiment(&inputs.ctx, &plan, inputs.model.expect("experiment loads a model"))?;
    write_report_csv(&ctx.path("report.csv"), &report)?;
    write_variants_csv(&ctx.path("variants.csv"), &report)?;
    write_games_csv(&ctx.path("games.csv"), &report)?;
    let table = format_table(&report);
    std::fs::write(ctx.path("report.txt"), &table).map_err(|e| Error::io(ctx.path("report.txt"), e))?;
    print!("{table}");
    Ok(())
}

fn stats(ctx: &Ctx, a: StatsArgs) -> Result<()> {
    let path = a.variants.unwrap_or_else(|| ctx.path("variants.csv"));
    let mut text = String::from("opponent,n,gt_mean,non_gt_mean,delta_mu,t,p\n");
    println!("{:<10} {:>4} {:>8} {:>8} {:>8} {:>9} {:>9}", "opponent", "n", "GT", "non-GT", "delta", "t", "p");
    for (opp, gt, non) in read_variants_csv(&path)? {
        let t = paired_ttest(&non, &gt)?;
        let (g, _) = mean_std(&gt);
        let (n, _) = mean_std(&non);
        let f = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "tie".into());
        println!("{opp:<10} {:>4} {g:>8.3} {n:>8.3} {:>8.3} {:>9} {:>9}", t.n, t.delta_mu, f(t.t), f(t.p));
        text += &format!("{opp},{},{g},{n},{},{},{}\n", t.n, t.delta_mu, f(t.t), f(t.p));
    }
    std::fs::write(ctx.path("stats.csv"), text).map_err(|e| Error::io(ctx.path("stats.csv"), e))
}

fn plot_data(ctx: &Ctx, cfg: &Config, a: PlotArgs) -> Result<()> {
    let dir = a.inputs.sets.clone().unwrap_or_else(|| ctx.out.clone());
    let normalizer = PcsNormalizer::load(&dir.join("normalizer.json"))?;
    let mut text = String::from("set,agg,res,agg_norm,res_norm\n");
    for (label, file) in [("all", "archive.csv"), ("pareto", "pareto.csv"), ("near_optimal", "near_optimal.csv"), ("dpp1", "dpp1.csv"), ("dpp2", "dpp2.csv")] {
        let c = read_set(&dir, file)?;
        for e in &c.entries {
            let n = normalizer.apply(e.pcs);
            text += &format!("{label},{},{},{},{}\n", e.pcs.agg, e.pcs.res, n.agg, n.res);
        }
    }
    let out = ctx.path("plot_pcs_sets.csv");
    std::fs::write(&out, text).map_err(|e| Error::io(&out, e))?;
    if a.race {
        let inputs = race_inputs(ctx, cfg, &a.inputs, true)?;
        let model = inputs.model.clone();
        let ego = AgentSpec::of_kind(AgentKind::Gt, model, ego_seed(ctx.seed, 0))?;
        let opp = AgentSpec::non_gt(opp_seed(ctx.seed, 0));
        let s0 = start_lines(ctx.seed, 1, inputs.ctx.env.track.length())[0];
        let r = run_race(&inputs.ctx, &ego, &opp, StartPose { s0, swap: false })?;
        write_pcs_trace(&ctx.path("plot_pcs_trajectory.csv"), &r.steps)?;
        write_trajectories_csv(&ctx.path("plot_trajectories.csv"), &r.trajectories)?;
    }
    println!("plot data written to {}", ctx.out.display());
    Ok(())
}
