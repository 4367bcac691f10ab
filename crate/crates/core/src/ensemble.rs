//! Per-model scores combined into statistics, votes and rankings.
//!
//! Scores are percents. Influencer order as given at construction is
//! significant: it is the final tie-breaker everywhere.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("no score for model {model}, influencer {influencer}, target {target}")]
    IncompleteGrid { model: String, influencer: String, target: String },
    #[error("unknown {kind} {name:?}")]
    UnknownName { kind: &'static str, name: String },
    #[error("duplicate {kind} {name:?}")]
    DuplicateName { kind: &'static str, name: String },
    #[error("target {target} needs at least 2 influencers to compare, found {found}")]
    NotEnoughInfluencers { target: String, found: usize },
    #[error("score {value} for {model}/{influencer}/{target} is not finite")]
    NonFinite { model: String, influencer: String, target: String, value: f64 },
    #[error("table has no models")]
    NoModels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub model: String,
    pub influencer: String,
    pub target: String,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScoreTableRepr {
    models: Vec<String>,
    influencers: Vec<String>,
    targets: Vec<String>,
    entries: Vec<ScoreEntry>,
}

/// Dense `(model, influencer, target)` grid of percent scores. A target may
/// also be an influencer (the lateral case); the self-pair is never scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ScoreTableRepr", try_from = "ScoreTableRepr")]
pub struct ScoreTable {
    models: Vec<String>,
    influencers: Vec<String>,
    targets: Vec<String>,
    scores: Vec<Option<f64>>,
}

fn unique(kind: &'static str, names: &[String]) -> Result<(), EnsembleError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(EnsembleError::DuplicateName { kind, name: n.clone() });
        }
    }
    Ok(())
}

fn position(kind: &'static str, names: &[String], name: &str) -> Result<usize, EnsembleError> {
    names.iter().position(|n| n == name).ok_or_else(|| EnsembleError::UnknownName { kind, name: name.to_string() })
}

impl ScoreTable {
    pub fn new(models: Vec<String>, influencers: Vec<String>, targets: Vec<String>) -> Result<Self, EnsembleError> {
        if models.is_empty() {
            return Err(EnsembleError::NoModels);
        }
        unique("model", &models)?;
        unique("influencer", &influencers)?;
        unique("target", &targets)?;
        let n = models.len() * influencers.len() * targets.len();
        Ok(Self { models, influencers, targets, scores: vec![None; n] })
    }

    /// Builds a single-target table from one column of model scores per influencer.
    pub fn from_columns(models: &[&str], target: &str, columns: &[(&str, &[f64])]) -> Result<Self, EnsembleError> {
        let mut t = Self::new(
            models.iter().map(|s| s.to_string()).collect(),
            columns.iter().map(|(i, _)| i.to_string()).collect(),
            vec![target.to_string()],
        )?;
        for (influencer, col) in columns {
            for (m, v) in models.iter().zip(col.iter()) {
                t.set(m, influencer, target, *v)?;
            }
        }
        Ok(t)
    }

    fn idx(&self, m: usize, i: usize, t: usize) -> usize {
        (m * self.influencers.len() + i) * self.targets.len() + t
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn influencers(&self) -> &[String] {
        &self.influencers
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn set(&mut self, model: &str, influencer: &str, target: &str, percent: f64) -> Result<(), EnsembleError> {
        if !percent.is_finite() {
            return Err(EnsembleError::NonFinite {
                model: model.into(),
                influencer: influencer.into(),
                target: target.into(),
                value: percent,
            });
        }
        let k = self.idx(
            position("model", &self.models, model)?,
            position("influencer", &self.influencers, influencer)?,
            position("target", &self.targets, target)?,
        );
        self.scores[k] = Some(percent);
        Ok(())
    }

    pub fn get(&self, model: &str, influencer: &str, target: &str) -> Option<f64> {
        let m = position("model", &self.models, model).ok()?;
        let i = position("influencer", &self.influencers, influencer).ok()?;
        let t = position("target", &self.targets, target).ok()?;
        self.scores[self.idx(m, i, t)]
    }

    /// Scores of every model for one pair, in model order.
    pub fn column(&self, influencer: &str, target: &str) -> Result<Vec<f64>, EnsembleError> {
        let i = position("influencer", &self.influencers, influencer)?;
        let t = position("target", &self.targets, target)?;
        (0..self.models.len())
            .map(|m| {
                self.scores[self.idx(m, i, t)].ok_or_else(|| EnsembleError::IncompleteGrid {
                    model: self.models[m].clone(),
                    influencer: influencer.to_string(),
                    target: target.to_string(),
                })
            })
            .collect()
    }

    /// Influencers scored against `target`: all of them except `target` itself.
    pub fn candidates(&self, target: &str) -> Vec<&String> {
        self.influencers.iter().filter(|i| i.as_str() != target).collect()
    }

    /// Multiplies every score of one model by `factor`.
    pub fn scale_model(&mut self, model: &str, factor: f64) -> Result<(), EnsembleError> {
        let m = position("model", &self.models, model)?;
        let stride = self.influencers.len() * self.targets.len();
        for s in self.scores[m * stride..(m + 1) * stride].iter_mut().flatten() {
            *s *= factor;
        }
        Ok(())
    }

    /// Same scores with model rows reordered by `order`.
    pub fn permute_models(&self, order: &[usize]) -> Self {
        let stride = self.influencers.len() * self.targets.len();
        let mut out = self.clone();
        out.models = order.iter().map(|&m| self.models[m].clone()).collect();
        out.scores = order.iter().flat_map(|&m| self.scores[m * stride..(m + 1) * stride].iter().copied()).collect();
        out
    }

    pub fn entries(&self) -> Vec<ScoreEntry> {
        let mut out = Vec::new();
        for (m, model) in self.models.iter().enumerate() {
            for (i, influencer) in self.influencers.iter().enumerate() {
                for (t, target) in self.targets.iter().enumerate() {
                    if let Some(percent) = self.scores[self.idx(m, i, t)] {
                        out.push(ScoreEntry { model: model.clone(), influencer: influencer.clone(), target: target.clone(), percent });
                    }
                }
            }
        }
        out
    }

    /// One row per model, one column per scored `influencer/target` pair,
    /// full precision.
    pub fn to_csv(&self) -> String {
        let pairs: Vec<(usize, usize)> = (0..self.influencers.len())
            .flat_map(|i| (0..self.targets.len()).map(move |t| (i, t)))
            .filter(|&(i, t)| (0..self.models.len()).any(|m| self.scores[self.idx(m, i, t)].is_some()))
            .collect();
        let mut out = String::from("model");
        for &(i, t) in &pairs {
            out.push_str(&format!(",{}/{}", self.influencers[i], self.targets[t]));
        }
        out.push('\n');
        for (m, model) in self.models.iter().enumerate() {
            out.push_str(model);
            for &(i, t) in &pairs {
                match self.scores[self.idx(m, i, t)] {
                    Some(v) => out.push_str(&format!(",{v}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

impl From<ScoreTable> for ScoreTableRepr {
    fn from(t: ScoreTable) -> Self {
        let entries = t.entries();
        ScoreTableRepr { models: t.models, influencers: t.influencers, targets: t.targets, entries }
    }
}

impl TryFrom<ScoreTableRepr> for ScoreTable {
    type Error = EnsembleError;

    fn try_from(r: ScoreTableRepr) -> Result<Self, Self::Error> {
        let mut t = ScoreTable::new(r.models, r.influencers, r.targets)?;
        for e in r.entries {
            t.set(&e.model, &e.influencer, &e.target, e.percent)?;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub influencer: String,
    pub target: String,
    pub average: f64,
    pub maximum: f64,
    pub minimum: f64,
    pub range: f64,
}

impl AggregateStats {
    pub fn from_scores(influencer: &str, target: &str, scores: &[f64]) -> Self {
        // Summing in sorted order makes the mean independent of model order.
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        let maximum = *sorted.last().expect("at least one model");
        let minimum = sorted[0];
        let average = (sorted.iter().sum::<f64>() / sorted.len() as f64).clamp(minimum, maximum);
        Self { influencer: influencer.into(), target: target.into(), average, maximum, minimum, range: maximum - minimum }
    }
}

/// Stats for every scored `(influencer, target)` pair with `influencer != target`,
/// influencer-major in input order.
pub fn compute_stats(table: &ScoreTable) -> Result<Vec<AggregateStats>, EnsembleError> {
    let mut out = Vec::new();
    for influencer in table.influencers() {
        for target in table.targets().iter().filter(|t| *t != influencer) {
            out.push(AggregateStats::from_scores(influencer, target, &table.column(influencer, target)?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    None,
    Average,
    InputOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVote {
    pub model: String,
    pub influencer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub influencer: String,
    pub votes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteResult {
    pub target: String,
    pub per_model_winner: Vec<ModelVote>,
    /// Every candidate in input order, including those with no votes.
    pub tally: Vec<Tally>,
    pub winner: String,
    pub tie_broken_by: TieBreak,
}

impl VoteResult {
    pub fn votes_for(&self, influencer: &str) -> usize {
        self.tally.iter().find(|t| t.influencer == influencer).map_or(0, |t| t.votes)
    }

    /// Models that did not vote for the winner.
    pub fn dissenters(&self) -> Vec<&ModelVote> {
        self.per_model_winner.iter().filter(|v| v.influencer != self.winner).collect()
    }
}

/// Each model votes for its highest-scoring influencer at `target` (the first
/// in input order on a tie). Most votes wins; tallies tie-break on the higher
/// average, then input order.
pub fn vote(table: &ScoreTable, target: &str) -> Result<VoteResult, EnsembleError> {
    let candidates = table.candidates(target);
    if candidates.len() < 2 {
        return Err(EnsembleError::NotEnoughInfluencers { target: target.into(), found: candidates.len() });
    }
    let columns: Vec<Vec<f64>> = candidates.iter().map(|c| table.column(c, target)).collect::<Result<_, _>>()?;

    let mut votes = vec![0usize; candidates.len()];
    let mut per_model_winner = Vec::with_capacity(table.models().len());
    for (m, model) in table.models().iter().enumerate() {
        let mut best = 0;
        for c in 1..candidates.len() {
            if columns[c][m] > columns[best][m] {
                best = c;
            }
        }
        votes[best] += 1;
        per_model_winner.push(ModelVote { model: model.clone(), influencer: candidates[best].clone() });
    }

    let top = *votes.iter().max().expect("non-empty");
    let tied: Vec<usize> = (0..candidates.len()).filter(|&c| votes[c] == top).collect();
    let (winner, tie_broken_by) = if tied.len() == 1 {
        (tied[0], TieBreak::None)
    } else {
        let avg: Vec<f64> = tied.iter().map(|&c| AggregateStats::from_scores("", "", &columns[c]).average).collect();
        let best_avg = avg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let by_avg: Vec<usize> = tied.iter().zip(&avg).filter(|(_, a)| **a == best_avg).map(|(&c, _)| c).collect();
        if by_avg.len() == 1 {
            (by_avg[0], TieBreak::Average)
        } else {
            (by_avg[0], TieBreak::InputOrder)
        }
    };

    Ok(VoteResult {
        target: target.into(),
        per_model_winner,
        tally: candidates.iter().zip(&votes).map(|(c, &v)| Tally { influencer: (*c).clone(), votes: v }).collect(),
        winner: candidates[winner].clone(),
        tie_broken_by,
    })
}

/// Influencers at `target` by descending average; equal averages keep input order.
pub fn rank_influencers(stats: &[AggregateStats], target: &str) -> Vec<String> {
    let mut rows: Vec<&AggregateStats> = stats.iter().filter(|s| s.target == target).collect();
    rows.sort_by(|a, b| b.average.total_cmp(&a.average));
    rows.into_iter().map(|s| s.influencer.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledRank {
    pub influencer: String,
    /// Mean over every model and every listed target.
    pub average: f64,
}

/// Ranking with all `targets` pooled, for when parts are not ranked separately.
pub fn pooled_ranking(table: &ScoreTable, targets: &[String]) -> Result<Vec<PooledRank>, EnsembleError> {
    let mut out = Vec::new();
    for influencer in table.influencers() {
        let mut all = Vec::new();
        for t in targets.iter().filter(|t| *t != influencer) {
            all.extend(table.column(influencer, t)?);
        }
        if all.is_empty() {
            continue;
        }
        out.push(PooledRank { influencer: influencer.clone(), average: AggregateStats::from_scores(influencer, "", &all).average });
    }
    out.sort_by(|a, b| b.average.total_cmp(&a.average));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateralPair {
    pub a: String,
    pub b: String,
    /// Per model, in table model order.
    pub scores: Vec<f64>,
    pub stats: AggregateStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateralResult {
    pub models: Vec<String>,
    pub pairs: Vec<LateralPair>,
}

impl LateralResult {
    /// The pair with the highest average, first in pair order on a tie.
    pub fn most_similar(&self) -> Option<&LateralPair> {
        self.pairs.iter().fold(None, |best: Option<&LateralPair>, p| match best {
            Some(b) if b.stats.average >= p.stats.average => Some(b),
            _ => Some(p),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model");
        for p in &self.pairs {
            out.push_str(&format!(",{}/{}", p.a, p.b));
        }
        out.push('\n');
        for (m, model) in self.models.iter().enumerate() {
            out.push_str(model);
            for p in &self.pairs {
                out.push_str(&format!(",{}", p.scores[m]));
            }
            out.push('\n');
        }
        out
    }
}

/// Influencer-vs-influencer scores, one entry per unordered pair `(a, b)`
/// with `a` before `b` in input order. Either orientation may be present in
/// `table`; `(a, b)` is preferred.
pub fn lateral_matrix(table: &ScoreTable) -> Result<LateralResult, EnsembleError> {
    let names = table.influencers();
    if names.len() < 2 {
        return Err(EnsembleError::NotEnoughInfluencers { target: "lateral".into(), found: names.len() });
    }
    let mut pairs = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let scores = match table.column(a, b) {
                Ok(s) => s,
                Err(first) => table.column(b, a).map_err(|_| first)?,
            };
            let stats = AggregateStats::from_scores(a, b, &scores);
            pairs.push(LateralPair { a: a.clone(), b: b.clone(), scores, stats });
        }
    }
    Ok(LateralResult { models: table.models().to_vec(), pairs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub target: String,
    pub stats: Vec<AggregateStats>,
    pub vote: VoteResult,
    pub ranking: Vec<String>,
}

/// Everything the report needs from one influence table and an optional
/// lateral table. The two are kept apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub models: Vec<String>,
    pub targets: Vec<TargetSummary>,
    pub pooled_ranking: Vec<PooledRank>,
    pub lateral: Option<LateralResult>,
}

pub fn summarize(influence: &ScoreTable, lateral: Option<&ScoreTable>) -> Result<EnsembleSummary, EnsembleError> {
    let stats = compute_stats(influence)?;
    let mut targets = Vec::new();
    for target in influence.targets() {
        targets.push(TargetSummary {
            target: target.clone(),
            stats: stats.iter().filter(|s| &s.target == target).cloned().collect(),
            vote: vote(influence, target)?,
            ranking: rank_influencers(&stats, target),
        });
    }
    Ok(EnsembleSummary {
        models: influence.models().to_vec(),
        targets,
        pooled_ranking: pooled_ranking(influence, influence.targets())?,
        lateral: lateral.map(lateral_matrix).transpose()?,
    })
}
