//! Tournaments: every ego variant against every opponent variant from every
//! start line on both sides, aggregated into per-variant win rates.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::race::{run_race, AgentKind, AgentSpec, RaceContext, RegretModel, Winner};
use super::stats::{mean_std, paired_ttest, TTest};
use crate::error::{Error, Result};
use crate::es::generation_seed;
use crate::game::StartPose;

const OPP_STREAM: u64 = 0x6f70_705f_7365_6564;
const START_STREAM: u64 = 0x7374_6172_745f_6c6e;

pub fn planned_games(n_ego: usize, n_opp: usize, n_starts: usize) -> usize {
    n_ego * n_opp * n_starts * 2
}

/// Start positions along the centerline, one per start line.
pub fn start_lines(seed: u64, n: usize, track_length: f64) -> Vec<f64> {
    (0..n)
        .map(|k| ChaCha8Rng::seed_from_u64(generation_seed(seed ^ START_STREAM, k as u64)).random_range(0.0..track_length))
        .collect()
}

pub fn ego_seed(seed: u64, variant: usize) -> u64 {
    generation_seed(seed, variant as u64)
}

pub fn opp_seed(seed: u64, variant: usize) -> u64 {
    generation_seed(seed ^ OPP_STREAM, variant as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameRecord {
    pub ego: usize,
    pub opp: usize,
    pub start: usize,
    pub swap: bool,
    /// `None` when the race failed and was excluded.
    pub outcome: Option<GameOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameOutcome {
    pub winner: Winner,
    pub margin: f64,
    pub collision: bool,
    pub utility_ego: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub wins: usize,
    pub draws: usize,
    pub losses: usize,
    pub excluded: usize,
}

impl Tally {
    pub fn valid(&self) -> usize {
        self.wins + self.draws + self.losses
    }

    /// Draws count one half.
    pub fn win_rate(&self) -> f64 {
        (self.wins as f64 + 0.5 * self.draws as f64) / self.valid() as f64
    }

    fn add(&mut self, o: &Tally) {
        self.wins += o.wins;
        self.draws += o.draws;
        self.losses += o.losses;
        self.excluded += o.excluded;
    }
}

/// Results of one ego population against one opponent population.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchupStats {
    pub records: Vec<GameRecord>,
    pub per_variant: Vec<Tally>,
    pub win_rates: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub total: Tally,
}

/// Plays the full cross product in parallel; failed races are excluded and counted.
pub fn run_matchup(ctx: &RaceContext, egos: &[AgentSpec], opps: &[AgentSpec], starts: &[f64]) -> Result<MatchupStats> {
    let mut jobs = Vec::with_capacity(planned_games(egos.len(), opps.len(), starts.len()));
    for e in 0..egos.len() {
        for o in 0..opps.len() {
            for (k, _) in starts.iter().enumerate() {
                for swap in [false, true] {
                    jobs.push((e, o, k, swap));
                }
            }
        }
    }
    let records: Vec<GameRecord> = jobs
        .into_par_iter()
        .map(|(e, o, k, swap)| {
            let outcome = match run_race(ctx, &egos[e], &opps[o], StartPose { s0: starts[k], swap }) {
                Ok(r) => Some(GameOutcome { winner: r.winner, margin: r.margin, collision: r.collision, utility_ego: r.utility_ego }),
                Err(err) => {
                    log::warn!("race ego {e} vs opp {o} start {k} swap {swap} excluded: {err}");
                    None
                }
            };
            GameRecord { ego: e, opp: o, start: k, swap, outcome }
        })
        .collect();
    summarize(records, egos.len(), opps.len(), starts.len())
}

/// Aggregates records into per-variant tallies and checks the count arithmetic.
pub fn summarize(records: Vec<GameRecord>, n_ego: usize, n_opp: usize, n_starts: usize) -> Result<MatchupStats> {
    let planned = planned_games(n_ego, n_opp, n_starts);
    if records.len() != planned {
        return Err(Error::Simulation(format!("{} game records, protocol plans {planned}", records.len())));
    }
    let mut per_variant = vec![Tally::default(); n_ego];
    for r in &records {
        let t = &mut per_variant[r.ego];
        match r.outcome {
            None => t.excluded += 1,
            Some(o) => match o.winner {
                Winner::Ego => t.wins += 1,
                Winner::Opp => t.losses += 1,
                Winner::Draw => t.draws += 1,
            },
        }
    }
    let mut total = Tally::default();
    for (i, t) in per_variant.iter().enumerate() {
        if t.valid() + t.excluded != n_opp * n_starts * 2 {
            return Err(Error::Simulation(format!("variant {i}: {} valid + {} excluded games", t.valid(), t.excluded)));
        }
        if t.valid() == 0 {
            return Err(Error::Simulation(format!("variant {i}: every race failed")));
        }
        total.add(t);
    }
    if total.valid() + total.excluded != planned {
        return Err(Error::Simulation(format!("{} + {} games != {planned}", total.valid(), total.excluded)));
    }
    let win_rates: Vec<f64> = per_variant.iter().map(Tally::win_rate).collect();
    let (mean, std) = mean_std(&win_rates);
    Ok(MatchupStats { records, per_variant, win_rates, mean, std, total })
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub opponents: Vec<AgentKind>,
    pub n_ego: usize,
    pub n_opp: usize,
    pub starts: Vec<f64>,
    pub seed: u64,
}

impl ExperimentPlan {
    /// Races per opponent row: the GT and the non-GT population each play the full cross product.
    pub fn games_per_row(&self) -> usize {
        2 * planned_games(self.n_ego, self.n_opp, self.starts.len())
    }

    pub fn total_games(&self) -> usize {
        self.opponents.len() * self.games_per_row()
    }
}

/// One table row: both ego populations against one opponent kind.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub opponent: AgentKind,
    pub gt: MatchupStats,
    pub non_gt: MatchupStats,
    /// Paired by ego variant; `x` = non-GT, `y` = GT.
    pub test: TTest,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub plan_games: usize,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn excluded(&self) -> usize {
        self.rows.iter().map(|r| r.gt.total.excluded + r.non_gt.total.excluded).sum()
    }
}

/// GT and non-GT ego variant `i` start from the same policy (same seed), so
/// the two conditions are paired by variant.
pub fn run_experiment(ctx: &RaceContext, plan: &ExperimentPlan, model: Arc<dyn RegretModel>) -> Result<ExperimentReport> {
    if plan.n_ego < 2 {
        return Err(Error::InvalidArgument("the paired test needs at least 2 ego variants".into()));
    }
    let gt: Vec<AgentSpec> = (0..plan.n_ego).map(|i| AgentSpec::gt(Arc::clone(&model), ego_seed(plan.seed, i))).collect();
    let non_gt: Vec<AgentSpec> = (0..plan.n_ego).map(|i| AgentSpec::non_gt(ego_seed(plan.seed, i))).collect();
    let mut rows = Vec::with_capacity(plan.opponents.len());
    for &kind in &plan.opponents {
        let opps = (0..plan.n_opp).map(|j| AgentSpec::of_kind(kind, None, opp_seed(plan.seed, j))).collect::<Result<Vec<_>>>()?;
        let g = run_matchup(ctx, &gt, &opps, &plan.starts)?;
        let n = run_matchup(ctx, &non_gt, &opps, &plan.starts)?;
        let test = paired_ttest(&n.win_rates, &g.win_rates)?;
        log::info!("vs {kind}: GT {:.3} non-GT {:.3}", g.mean, n.mean);
        rows.push(ReportRow { opponent: kind, gt: g, non_gt: n, test });
    }
    Ok(ExperimentReport { plan_games: plan.total_games(), rows })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "tie".into())
}

pub fn write_report_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "opponent,gt_mean,gt_std,non_gt_mean,non_gt_std,delta_mu,t,p,games,excluded,gt_draws,non_gt_draws").map_err(io)?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{}",
            r.opponent,
            r.gt.mean,
            r.gt.std,
            r.non_gt.mean,
            r.non_gt.std,
            r.test.delta_mu,
            fmt_opt(r.test.t),
            fmt_opt(r.test.p),
            r.gt.records.len() + r.non_gt.records.len(),
            r.gt.total.excluded + r.non_gt.total.excluded,
            r.gt.total.draws,
            r.non_gt.total.draws
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Per-variant win rates, the input of the `stats` re-run.
pub fn write_variants_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "opponent,variant,gt_win_rate,non_gt_win_rate").map_err(io)?;
    for r in &report.rows {
        for (i, (g, n)) in r.gt.win_rates.iter().zip(&r.non_gt.win_rates).enumerate() {
            writeln!(w, "{},{i},{g},{n}", r.opponent).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Every race of the report, one row each.
pub fn write_games_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "opponent,condition,ego,opp,start,swap,winner,margin,collision,utility_ego").map_err(io)?;
    for r in &report.rows {
        for (cond, m) in [("gt", &r.gt), ("non-gt", &r.non_gt)] {
            for g in &m.records {
                match g.outcome {
                    Some(o) => writeln!(
                        w,
                        "{},{cond},{},{},{},{},{},{},{},{}",
                        r.opponent,
                        g.ego,
                        g.opp,
                        g.start,
                        g.swap as u8,
                        o.winner.name(),
                        o.margin,
                        o.collision as u8,
                        o.utility_ego
                    ),
                    None => writeln!(w, "{},{cond},{},{},{},{},excluded,,,", r.opponent, g.ego, g.opp, g.start, g.swap as u8),
                }
                .map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

/// Human-readable table: one row per opponent kind.
pub fn format_table(report: &ExperimentReport) -> String {
    let mut s = format!(
        "{:<10} {:>15} {:>15} {:>8} {:>9} {:>10} {:>12}\n",
        "opponent", "GT win rate", "non-GT win rate", "delta", "p", "games", "draws gt/ngt"
    );
    for r in &report.rows {
        s += &format!(
            "{:<10} {:>6.3} ± {:<6.3} {:>6.3} ± {:<6.3} {:>8.3} {:>9} {:>10} {:>12}\n",
            r.opponent.name(),
            r.gt.mean,
            r.gt.std,
            r.non_gt.mean,
            r.non_gt.std,
            r.test.delta_mu,
            r.test.p.map(|p| format!("{p:.4}")).unwrap_or_else(|| "tie".into()),
            r.gt.records.len() + r.non_gt.records.len(),
            format!("{}/{}", r.gt.total.draws, r.non_gt.total.draws)
        );
    }
    let excluded = report.excluded();
    if excluded > 0 {
        s += &format!("{excluded} of {} races excluded after simulation failures\n", report.plan_games);
    }
    s
}

/// Per-opponent paired tests recomputed from a variants CSV.
pub fn read_variants_csv(path: &Path) -> Result<Vec<(String, Vec<f64>, Vec<f64>)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut out: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| Error::parse(path.display().to_string(), i + 2, e.to_string()))?;
        if row.len() != 4 {
            return Err(Error::parse(path.display().to_string(), i + 2, format!("expected 4 fields, got {}", row.len())));
        }
        let num = |k: usize| row[k].trim().parse::<f64>().map_err(|e| Error::parse(path.display().to_string(), i + 2, format!("{}: {e}", &row[k])));
        let (g, n) = (num(2)?, num(3)?);
        match out.iter_mut().find(|(o, _, _)| o == &row[0]) {
            Some((_, gs, ns)) => {
                gs.push(g);
                ns.push(n);
            }
            None => out.push((row[0].to_string(), vec![g], vec![n])),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::race::tests::{test_context, Fixed};
    use super::*;

    fn rec(ego: usize, winner: Option<Winner>) -> GameRecord {
        GameRecord {
            ego,
            opp: 0,
            start: 0,
            swap: false,
            outcome: winner.map(|w| GameOutcome { winner: w, margin: 0.0, collision: false, utility_ego: 0.0 }),
        }
    }

    #[test]
    fn protocol_arithmetic() {
        assert_eq!(planned_games(20, 20, 5), 4000);
        assert_eq!(planned_games(2, 2, 1), 8);
    }

    #[test]
    fn all_wins_give_one() {
        let recs: Vec<GameRecord> = (0..3).flat_map(|e| [rec(e, Some(Winner::Ego)), rec(e, Some(Winner::Ego))]).collect();
        let s = summarize(recs, 3, 1, 1).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn draws_count_half_and_exclusions_are_tracked() {
        let recs = vec![rec(0, Some(Winner::Draw)), rec(0, None), rec(1, Some(Winner::Opp)), rec(1, Some(Winner::Ego))];
        let s = summarize(recs, 2, 1, 1).unwrap();
        assert_eq!(s.win_rates, vec![0.5, 0.5]);
        assert_eq!(s.total, Tally { wins: 1, draws: 1, losses: 1, excluded: 1 });
        assert!(summarize(vec![rec(0, None), rec(0, None)], 1, 1, 1).is_err());
        assert!(summarize(vec![rec(0, Some(Winner::Ego))], 1, 1, 1).is_err());
    }

    #[test]
    fn small_tournament_plays_every_game() {
        let ctx = test_context(2, 0.5);
        let egos = vec![AgentSpec::non_gt(1), AgentSpec::non_gt(2)];
        let opps = vec![AgentSpec::random(3), AgentSpec::external()];
        let s = run_matchup(&ctx, &egos, &opps, &[5.0]).unwrap();
        assert_eq!(s.records.len(), 8);
        assert_eq!(s.total.valid() + s.total.excluded, 8);
        assert!(s.win_rates.iter().all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn experiment_report_round_trips_through_variants_csv() {
        let ctx = test_context(2, 0.5);
        let plan = ExperimentPlan { opponents: vec![AgentKind::NonGt], n_ego: 2, n_opp: 1, starts: vec![4.0], seed: 9 };
        let rep = run_experiment(&ctx, &plan, Arc::new(Fixed([1.0, 0.0, 0.0, 0.0]))).unwrap();
        assert_eq!(rep.plan_games, 8);
        assert_eq!(rep.rows[0].gt.records.len() + rep.rows[0].non_gt.records.len(), 8);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("variants.csv");
        write_variants_csv(&p, &rep).unwrap();
        write_report_csv(&dir.path().join("report.csv"), &rep).unwrap();
        write_games_csv(&dir.path().join("games.csv"), &rep).unwrap();
        let back = read_variants_csv(&p).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].1, rep.rows[0].gt.win_rates);
        assert_eq!(back[0].2, rep.rows[0].non_gt.win_rates);
        assert!(format_table(&rep).contains("non-gt"));
    }
}
