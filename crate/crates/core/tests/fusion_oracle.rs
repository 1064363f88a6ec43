mod common;

use common::{clip, list, oracle_order, random_instance, rng};
use vidroute::fusion::{fuse_with, linear_fuse, rrf_fuse, FusionConfig, FusionMethod};
use vidroute::index::RankedList;
use vidroute::Modality;

fn ids(r: &vidroute::FusedRanking) -> Vec<(String, f64)> {
    r.items.iter().map(|i| (i.clip_id.to_string(), i.fused_score)).collect()
}

#[test]
fn linear_matches_score_table() {
    let mut rng = rng(11);
    for _ in 0..200 {
        let inst = random_instance(&mut rng);
        let refs: Vec<&RankedList> = inst.lists.iter().collect();
        let got = ids(&linear_fuse(&refs, inst.depth).unwrap());
        let want = oracle_order(&inst.lists, |r| (inst.depth - r) as f64);
        assert_eq!(got, want);
    }
}

#[test]
fn rrf_matches_score_table() {
    let mut rng = rng(12);
    for _ in 0..200 {
        let inst = random_instance(&mut rng);
        let refs: Vec<&RankedList> = inst.lists.iter().collect();
        let got = ids(&rrf_fuse(&refs, 60.0).unwrap());
        let want = oracle_order(&inst.lists, |r| 1.0 / (60.0 + r as f64));
        assert_eq!(got, want);
    }
}

#[test]
fn list_order_does_not_matter() {
    let mut rng = rng(13);
    for _ in 0..100 {
        let inst = random_instance(&mut rng);
        let fwd: Vec<&RankedList> = inst.lists.iter().collect();
        let rev: Vec<&RankedList> = inst.lists.iter().rev().collect();
        for method in [FusionMethod::Linear, FusionMethod::Rrf] {
            let cfg = FusionConfig { method, ..FusionConfig::default() };
            assert_eq!(fuse_with(&cfg, &fwd, inst.depth).unwrap(), fuse_with(&cfg, &rev, inst.depth).unwrap());
        }
    }
}

#[test]
fn provenance_reports_per_list_ranks() {
    let a = list(Modality::Asr, &[clip(1), clip(2)], 10);
    let v = list(Modality::Visual, &[clip(2)], 10);
    let r = linear_fuse(&[&a, &v], 10).unwrap();
    let top = &r.items[0];
    assert_eq!(top.clip_id, clip(2));
    assert_eq!(serde_json::to_value(top.provenance).unwrap(), serde_json::json!({"asr": 2, "ocr": null, "visuals": 1}));
    assert_eq!(top.fused_score, 17.0);
}
