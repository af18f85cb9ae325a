//! Per-episode population metrics, rolling means and cross-repeat
//! confidence intervals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::game::{Action, Justness, Units};
use crate::sim::{EpisodeLog, Mode};

/// The eight tracked metrics, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    CooperationPct,
    CooperatorSelectionPct,
    PunishmentPct,
    SelectedPunisherPct,
    JustRatioPct,
    JustPunisherSelectionPct,
    SocietalReward,
    SocietalReputation,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::CooperationPct,
        Metric::CooperatorSelectionPct,
        Metric::PunishmentPct,
        Metric::SelectedPunisherPct,
        Metric::JustRatioPct,
        Metric::JustPunisherSelectionPct,
        Metric::SocietalReward,
        Metric::SocietalReputation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::CooperationPct => "cooperation_pct",
            Metric::CooperatorSelectionPct => "cooperator_selection_pct",
            Metric::PunishmentPct => "punishment_pct",
            Metric::SelectedPunisherPct => "selected_punisher_pct",
            Metric::JustRatioPct => "just_ratio_pct",
            Metric::JustPunisherSelectionPct => "just_punisher_selection_pct",
            Metric::SocietalReward => "societal_reward",
            Metric::SocietalReputation => "societal_reputation",
        }
    }

    pub fn is_percentage(self) -> bool {
        !matches!(self, Metric::SocietalReward | Metric::SocietalReputation)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric '{s}'"))
    }
}

/// One row of per-episode metrics. `None` marks an undefined ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub cooperation_pct: f64,
    pub cooperator_selection_pct: Option<f64>,
    pub punishment_pct: Option<f64>,
    pub selected_punisher_pct: Option<f64>,
    pub just_ratio_pct: Option<f64>,
    pub just_punisher_selection_pct: Option<f64>,
    pub societal_reward: f64,
    pub societal_reputation: f64,
}

impl EpisodeMetrics {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::CooperationPct => Some(self.cooperation_pct),
            Metric::CooperatorSelectionPct => self.cooperator_selection_pct,
            Metric::PunishmentPct => self.punishment_pct,
            Metric::SelectedPunisherPct => self.selected_punisher_pct,
            Metric::JustRatioPct => self.just_ratio_pct,
            Metric::JustPunisherSelectionPct => self.just_punisher_selection_pct,
            Metric::SocietalReward => Some(self.societal_reward),
            Metric::SocietalReputation => Some(self.societal_reputation),
        }
    }
}

/// What one agent did during one episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AgentEpisodeStats {
    pub plays: u32,
    pub cooperations: u32,
    pub punish_opportunities: u32,
    pub punishments: u32,
    pub just_punishments: u32,
}

impl AgentEpisodeStats {
    /// Cooperated in strictly more than half of its games.
    pub fn is_majority_cooperator(&self) -> bool {
        2 * self.cooperations > self.plays
    }

    pub fn punished_at_all(&self) -> bool {
        self.punishments > 0
    }

    /// Justly punished in strictly more than half of its opportunities.
    pub fn is_majority_just_punisher(&self) -> bool {
        2 * self.just_punishments > self.punish_opportunities
    }
}

pub fn agent_stats(log: &EpisodeLog) -> Vec<AgentEpisodeStats> {
    let mut stats = vec![AgentEpisodeStats::default(); log.population_size()];
    for r in &log.rounds {
        for (agent, action) in [(r.pairing.selector, r.actions.0), (r.pairing.partner, r.actions.1)] {
            let s = &mut stats[agent.index()];
            s.plays += 1;
            s.cooperations += u32::from(action == Action::Cooperate);
        }
        for ev in &r.punishments {
            let s = &mut stats[ev.assignment.punisher.index()];
            s.punish_opportunities += 1;
            if ev.punished() {
                s.punishments += 1;
                s.just_punishments += u32::from(ev.justness == Justness::Just);
            }
        }
    }
    stats
}

fn pct(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// Metrics of `log`. Partner-quality metrics look at what the chosen
/// partners did in `prev` and are undefined without it.
pub fn episode_metrics(log: &EpisodeLog, prev: Option<&EpisodeLog>, mode: Mode) -> EpisodeMetrics {
    let (mut plays, mut coops, mut opportunities, mut punishments, mut just) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for r in &log.rounds {
        plays += 2;
        coops += u64::from(r.actions.0.is_cooperate()) + u64::from(r.actions.1.is_cooperate());
        for ev in &r.punishments {
            opportunities += 1;
            if ev.punished() {
                punishments += 1;
                just += u64::from(ev.justness == Justness::Just);
            }
        }
    }

    let prev_stats = prev.map(agent_stats);
    let selections = log.pairings.len() as u64;
    let selected_share = |pred: fn(&AgentEpisodeStats) -> bool| -> Option<f64> {
        let stats = prev_stats.as_ref()?;
        let hits = log.pairings.iter().filter(|p| pred(&stats[p.partner.index()])).count() as u64;
        pct(hits, selections)
    };
    let punishing = mode.has_punishment();

    EpisodeMetrics {
        episode: log.episode,
        cooperation_pct: pct(coops, plays).unwrap_or(0.0),
        cooperator_selection_pct: selected_share(AgentEpisodeStats::is_majority_cooperator),
        punishment_pct: pct(punishments, opportunities),
        selected_punisher_pct: punishing
            .then(|| selected_share(AgentEpisodeStats::punished_at_all))
            .flatten(),
        just_ratio_pct: pct(just, punishments),
        just_punisher_selection_pct: punishing
            .then(|| selected_share(AgentEpisodeStats::is_majority_just_punisher))
            .flatten(),
        societal_reward: log.societal_reward() as f64,
        societal_reputation: log.societal_reputation() as f64,
    }
}

/// Trailing mean over the last `window` entries, with a shorter window at
/// the head. Missing entries count in neither numerator nor denominator; a
/// window of only missing entries is missing.
pub fn rolling_mean(series: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, v) in series.iter().enumerate() {
        if let Some(x) = v {
            sum += x;
            count += 1;
        }
        if i >= window {
            if let Some(x) = series[i - window] {
                sum -= x;
                count -= 1;
            }
        }
        if count == 0 {
            // resync so long runs of cancellations cannot leave residue
            sum = 0.0;
            out.push(None);
        } else {
            out.push(Some(sum / count as f64));
        }
    }
    out
}

/// Mean and two-sided confidence band for one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// Per-episode statistics across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSeries {
    pub points: Vec<AggregatePoint>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("confidence intervals need at least 2 repeats, got {0}")]
    TooFewRepeats(usize),
    #[error("repeat series have different lengths")]
    RaggedSeries,
    #[error("confidence level {0} outside (0, 1)")]
    InvalidConfidence(f64),
}

/// Two-sided Student-t critical value with `dof` degrees of freedom.
pub fn t_critical(confidence: f64, dof: usize) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, dof as f64).expect("positive degrees of freedom");
    dist.inverse_cdf(0.5 + confidence / 2.0)
}

/// `mean ± t(1 - alpha/2, n - 1) · sd / sqrt(n)` per episode over the
/// non-missing repeats. Episodes with one observation get no band.
pub fn aggregate_ci(repeats: &[Vec<Option<f64>>], confidence: f64) -> Result<AggregateSeries, MetricsError> {
    if repeats.len() < 2 {
        return Err(MetricsError::TooFewRepeats(repeats.len()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(MetricsError::InvalidConfidence(confidence));
    }
    let len = repeats[0].len();
    if repeats.iter().any(|r| r.len() != len) {
        return Err(MetricsError::RaggedSeries);
    }
    let mut t_cache: Vec<Option<f64>> = vec![None; repeats.len() + 1];
    let mut points = Vec::with_capacity(len);
    let mut values = Vec::with_capacity(repeats.len());
    for e in 0..len {
        values.clear();
        values.extend(repeats.iter().filter_map(|r| r[e]));
        let n = values.len();
        if n == 0 {
            points.push(AggregatePoint {
                mean: None,
                ci_low: None,
                ci_high: None,
            });
            continue;
        }
        // sorting makes the sums independent of repeat order
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            points.push(AggregatePoint {
                mean: Some(mean),
                ci_low: None,
                ci_high: None,
            });
            continue;
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = *t_cache[n].get_or_insert_with(|| t_critical(confidence, n - 1));
        let half = t * var.sqrt() / (n as f64).sqrt();
        points.push(AggregatePoint {
            mean: Some(mean),
            ci_low: Some(mean - half),
            ci_high: Some(mean + half),
        });
    }
    Ok(AggregateSeries { points })
}

/// Mean of the non-missing entries in the last `window` episodes.
pub fn final_window_mean(series: &[Option<f64>], window: usize) -> Option<f64> {
    let start = series.len().saturating_sub(window);
    let vals: Vec<f64> = series[start..].iter().flatten().copied().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// One metric's column from a run.
pub fn column(rows: &[EpisodeMetrics], metric: Metric) -> Vec<Option<f64>> {
    rows.iter().map(|r| r.get(metric)).collect()
}

/// Total population reputation implied by a log's per-agent deltas.
pub fn reputation_delta_total(log: &EpisodeLog) -> Units {
    log.agent_rep_deltas.iter().sum()
}
