//! Online strategy, races, tournaments and statistics.

pub mod experiment;
pub mod race;
pub mod stats;

pub use experiment::{
    ego_seed, format_table, opp_seed, planned_games, read_variants_csv, run_experiment, run_matchup, start_lines, summarize,
    write_games_csv, write_report_csv, write_variants_csv, ExperimentPlan, ExperimentReport, GameOutcome, GameRecord, MatchupStats,
    ReportRow, Tally,
};
pub use race::{
    gt_step, run_race, write_action_log, write_pcs_trace, write_race_summary, ActionLogRow, AgentKind, AgentSpec, GtDecision,
    RaceContext, RaceResult, RegretModel, StartPolicy, StepRecord, Winner,
};
pub use stats::{mean_std, paired_ttest, reg_inc_beta, student_t_cdf, student_t_two_sided, TTest};
