use std::fmt::Write as _;

use super::{fmt2, AnalysisReport};

fn joined(items: &[String]) -> String {
    match items.len() {
        0 => String::new(),
        1 => items[0].clone(),
        _ => format!("{} and {}", items[..items.len() - 1].join(", "), items[items.len() - 1]),
    }
}

pub fn render_summary(report: &AnalysisReport) -> String {
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "# Influence analysis summary\n");

    let failures = report.precedence_failures();
    if !failures.is_empty() {
        let _ = writeln!(w, "> **WARNING: precedence precondition not met.** An influencer must precede or overlap the");
        let _ = writeln!(w, "> influencee in time. Scores for the following pairs do not describe influence:");
        let _ = writeln!(w, ">");
        for f in &failures {
            let _ = writeln!(w, "> - {} ({}) vs {} ({})", f.influencer, f.influencer_dates, f.influencee, f.influencee_dates);
        }
        let _ = writeln!(w);
    }

    let _ = writeln!(w, "- Aggregation strategy: `{}`", report.strategy);
    let _ = writeln!(w, "- Models: {}", report.models.join(", "));
    let _ = writeln!(w, "- Config hash: `{}`\n", report.config_hash);

    for t in &report.summary.targets {
        let _ = writeln!(w, "## {}\n", t.target);
        let _ = writeln!(w, "| Influencer | Average | Maximum | Minimum | Range | Votes |");
        let _ = writeln!(w, "|---|---:|---:|---:|---:|---:|");
        for st in &t.stats {
            let _ = writeln!(
                w,
                "| {} | {} | {} | {} | {} | {} |",
                st.influencer,
                fmt2(st.average),
                fmt2(st.maximum),
                fmt2(st.minimum),
                fmt2(st.range),
                t.vote.votes_for(&st.influencer)
            );
        }
        let tally: Vec<String> = t.vote.tally.iter().filter(|x| x.votes > 0).map(|x| format!("{} {}", x.influencer, x.votes)).collect();
        let _ = writeln!(w, "\nWinner by vote: **{}** ({}).", t.vote.winner, tally.join(", "));
        if t.vote.tie_broken_by != crate::ensemble::TieBreak::None {
            let _ = writeln!(w, "The vote was tied and settled by {:?}.", t.vote.tie_broken_by);
        }
        let dissent: Vec<String> = t.vote.dissenters().iter().map(|d| format!("{} (voted {})", d.model, d.influencer)).collect();
        if !dissent.is_empty() {
            let _ = writeln!(w, "Dissenting: {}.", joined(&dissent));
        }
        let _ = writeln!(w, "Ranking by average: {}.\n", t.ranking.join(" > "));
    }

    let vote_winners: Vec<&String> = report.summary.targets.iter().map(|t| &t.vote.winner).collect();
    let avg_winners: Vec<&String> = report.summary.targets.iter().filter_map(|t| t.ranking.first()).collect();
    let _ = writeln!(w, "## Overall\n");
    if let Some(first) = vote_winners.first() {
        if vote_winners.iter().chain(&avg_winners).all(|x| x == first) {
            let _ = writeln!(w, "**{first}** wins every target both by vote and by average.");
        } else {
            for t in &report.summary.targets {
                let top = t.ranking.first().map(String::as_str).unwrap_or("-");
                let _ = writeln!(w, "- {}: vote {}, average {}", t.target, t.vote.winner, top);
            }
        }
    }
    if !report.summary.pooled_ranking.is_empty() {
        let pooled: Vec<String> =
            report.summary.pooled_ranking.iter().map(|p| format!("{} {}", p.influencer, fmt2(p.average))).collect();
        let _ = writeln!(w, "\nPooled over all targets: {}.", pooled.join(", "));
    }

    if let Some(l) = &report.summary.lateral {
        let _ = writeln!(w, "\n## Lateral similarity\n");
        let _ = writeln!(w, "Scores between influencers are reported on their own and are not part of the influence scores.\n");
        let _ = writeln!(w, "| Pair | Average | Maximum | Minimum | Range |");
        let _ = writeln!(w, "|---|---:|---:|---:|---:|");
        for p in &l.pairs {
            let st = &p.stats;
            let _ = writeln!(
                w,
                "| {} vs {} | {} | {} | {} | {} |",
                p.a,
                p.b,
                fmt2(st.average),
                fmt2(st.maximum),
                fmt2(st.minimum),
                fmt2(st.range)
            );
        }
        if let Some(best) = l.most_similar() {
            let _ = writeln!(w, "\nMost similar pair: {} and {} ({}).", best.a, best.b, fmt2(best.stats.average));
        }
        if let Some(c) = &report.lateral_comparison {
            if c.lateral_exceeds_influence {
                let _ = writeln!(
                    w,
                    "Lateral scores exceed influence scores: the lowest pair average ({}) is above the highest influence average ({}).",
                    fmt2(c.lowest_lateral_average),
                    fmt2(c.highest_influence_average)
                );
            } else {
                let _ = writeln!(
                    w,
                    "Lateral scores do not uniformly exceed influence scores (lowest pair average {}, highest influence average {}).",
                    fmt2(c.lowest_lateral_average),
                    fmt2(c.highest_influence_average)
                );
            }
        }
    }

    let c = &report.caveats;
    if !c.is_empty() {
        let _ = writeln!(w, "\n## Caveats\n");
        for t in &c.truncated {
            let _ = writeln!(w, "- {}: {} sentence(s) of {} truncated to the token limit: {:?}", t.model, t.sentences.len(), t.part, t.sentences);
        }
        for e in &c.excluded {
            let _ = writeln!(
                w,
                "- {}: zero-norm sentences excluded when comparing {} with {} (rows {:?}, columns {:?})",
                e.model, e.influencer_part, e.target_part, e.excluded_rows, e.excluded_cols
            );
        }
        for n in &c.notes {
            let _ = writeln!(w, "- {n}");
        }
    }
    s
}
