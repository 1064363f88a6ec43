//! Routing-quality statistics against labelled source modalities.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::{Modality, SourceLabel};
use crate::router::{constrain_single, RoutingDecision};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoutingStats {
    /// Queries with a routable gold label (dense and unlabelled excluded).
    pub labeled_queries: usize,
    pub hit_rate: f64,
    /// Over all queries, labelled or not.
    pub mean_selected: f64,
    pub micro_f1: f64,
    pub coverage_error: f64,
    /// gold modality → predicted single modality → row fraction. Rows with
    /// no queries are omitted.
    pub confusion: BTreeMap<&'static str, BTreeMap<&'static str, f64>>,
    pub confusion_counts: [[usize; 3]; 3],
}

/// Returns `None` when no query carries a routable label.
pub fn routing_stats(decisions: &[RoutingDecision], gold: &[Option<SourceLabel>]) -> Option<RoutingStats> {
    assert_eq!(decisions.len(), gold.len(), "one gold label slot per decision");
    let total_selected: usize = decisions.iter().map(RoutingDecision::len).sum();
    let mean_selected = if decisions.is_empty() { 0.0 } else { total_selected as f64 / decisions.len() as f64 };

    let mut labeled = 0usize;
    let mut hits = 0usize;
    let mut predicted = 0usize;
    let mut coverage_sum = 0usize;
    let mut counts = [[0usize; 3]; 3];
    for (d, g) in decisions.iter().zip(gold) {
        let Some(g) = g.and_then(SourceLabel::modality) else { continue };
        labeled += 1;
        predicted += d.len();
        if d.contains(g) {
            hits += 1;
        }
        let position = d.total_order().iter().position(|&m| m == g).expect("total order covers all") + 1;
        coverage_sum += position;
        counts[g.index()][constrain_single(d).index()] += 1;
    }
    if labeled == 0 {
        return None;
    }

    let micro_f1 = if predicted + labeled == 0 { 0.0 } else { 2.0 * hits as f64 / (predicted + labeled) as f64 };
    let mut confusion = BTreeMap::new();
    for g in Modality::ALL {
        let row = counts[g.index()];
        let n: usize = row.iter().sum();
        if n == 0 {
            continue;
        }
        let cells = Modality::ALL.iter().map(|p| (p.wire_name(), row[p.index()] as f64 / n as f64)).collect();
        confusion.insert(g.wire_name(), cells);
    }
    Some(RoutingStats {
        labeled_queries: labeled,
        hit_rate: hits as f64 / labeled as f64,
        mean_selected,
        micro_f1,
        coverage_error: coverage_sum as f64 / labeled as f64,
        confusion,
        confusion_counts: counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::router::Origin;

    fn d(ms: &[Modality]) -> RoutingDecision {
        RoutingDecision::new(ms.iter().map(|&m| (m, "q".to_owned())), Origin::Rule, "q").unwrap()
    }

    #[test]
    fn definition_instance() {
        let s = routing_stats(&[d(&[Modality::Asr, Modality::Ocr])], &[Some(SourceLabel::Ocr)]).unwrap();
        assert_eq!(s.hit_rate, 1.0);
        assert_eq!(s.coverage_error, 2.0);
        assert_eq!(s.confusion_counts[Modality::Ocr.index()][Modality::Asr.index()], 1);
    }

    #[test]
    fn perfect_router() {
        let ds: Vec<_> = Modality::ALL.iter().map(|&m| d(&[m])).collect();
        let gold: Vec<_> = Modality::ALL.iter().map(|&m| Some(SourceLabel::from(m))).collect();
        let s = routing_stats(&ds, &gold).unwrap();
        assert_eq!((s.hit_rate, s.micro_f1, s.coverage_error, s.mean_selected), (1.0, 1.0, 1.0, 1.0));
        for m in Modality::ALL {
            for p in Modality::ALL {
                assert_eq!(s.confusion[m.wire_name()][p.wire_name()], if m == p { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn unlabeled_only_reports_absent() {
        assert!(routing_stats(&[d(&[Modality::Asr])], &[Some(SourceLabel::Dense)]).is_none());
        assert!(routing_stats(&[d(&[Modality::Asr])], &[None]).is_none());
    }

    #[test]
    fn dense_counts_toward_mean_selected_only() {
        let ds = [d(&[Modality::Asr]), d(&Modality::ALL)];
        let s = routing_stats(&ds, &[Some(SourceLabel::Asr), Some(SourceLabel::Dense)]).unwrap();
        assert_eq!(s.labeled_queries, 1);
        assert_eq!(s.mean_selected, 2.0);
        assert_eq!(s.micro_f1, 1.0);
        assert_eq!(s.confusion.len(), 1);
    }
}
