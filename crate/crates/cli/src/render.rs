//! Plain-text tables.

use std::fmt::Write;

use uqsched_core::{GroupComparison, GroupKey, RankingEntry, SequenceListing, UncertaintyModel, WhatIf};

pub fn plural(n: usize, noun: &str) -> String {
    if n == 1 {
        format!("1 {noun}")
    } else {
        format!("{n} {noun}s")
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn sequences(list: &[SequenceListing]) -> String {
    let mut s = format!(
        "{:<12} {:>8}  {:<28} {}\n",
        "sequence", "records", "seasons", "operators"
    );
    for l in list {
        let seasons: Vec<&str> = l.seasons.iter().map(|s| s.as_str()).collect();
        let _ = writeln!(
            s,
            "{:<12} {:>8}  {:<28} {}",
            l.sequence_id,
            l.record_count,
            join(&seasons),
            join(&l.operators)
        );
    }
    s
}

pub fn models(models: &[UncertaintyModel]) -> String {
    let mut s = format!("{:<32} {:<14} {:>6} {:>10}\n", "group", "kind", "n", "degree");
    for m in models {
        let _ = writeln!(
            s,
            "{:<32} {:<14} {:>6} {:>10.6}",
            m.group.to_string(),
            m.kind.as_str(),
            m.sample_count,
            m.degree
        );
    }
    s
}

pub fn ranking(entries: &[RankingEntry]) -> String {
    let mut s = format!(
        "  {:<4} {:<16} {:>10} {:>14} {:>6} {:<14} {}\n",
        "rank", "operator", "degree", "estimate_s", "n", "kind", "model"
    );
    for (i, e) in entries.iter().enumerate() {
        let source = serde_json::to_value(e.model_source).expect("enum serializes");
        let _ = writeln!(
            s,
            "{} {:<4} {:<16} {:>10.6} {:>14.3} {:>6} {:<14} {}",
            if i == 0 { '*' } else { ' ' },
            i + 1,
            e.operator_id,
            e.degree,
            e.corrected_estimate_s,
            e.sample_count,
            e.kind.as_str(),
            source.as_str().unwrap_or_default()
        );
    }
    s
}

pub fn what_if(key: &GroupKey, nominal: f64, w: &WhatIf, (qlo, qhi): (f64, f64)) -> String {
    format!(
        "group       {key}\nnominal     {nominal:.3} s\ncorrected   {:.3} s (std {:.3} s)\nband        [{:.3}, {:.3}] s at q{} / q{}\nmodel       {} (n = {})\n",
        w.corrected_estimate_s,
        w.std_s,
        w.band_q05_s,
        w.band_q95_s,
        qlo,
        qhi,
        w.model_kind.as_str(),
        w.sample_count
    )
}

pub fn comparison(groups: &[GroupComparison]) -> String {
    let mut s = format!(
        "{:<32} {:<14} {:>10} {:>10}\n",
        "group", "kind", "before", "after"
    );
    for g in groups {
        let _ = writeln!(
            s,
            "{:<32} {:<14} {:>10.6} {:>10.6}",
            g.group.to_string(),
            g.kind.as_str(),
            g.degree_before,
            g.degree_after
        );
    }
    s
}
