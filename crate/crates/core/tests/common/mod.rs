#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use vidroute::index::{RankedItem, RankedList};
use vidroute::router::{Origin, RoutingDecision};
use vidroute::{ClipRef, IndexField, Modality, SourceLabel};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn jsonl(name: &str) -> Vec<Value> {
    std::fs::read_to_string(fixture(name))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn clip(i: usize) -> ClipRef {
    ClipRef::new(&format!("vid{i:02}"), 0, 10).unwrap()
}

pub fn list(m: Modality, clips: &[ClipRef], depth: usize) -> RankedList {
    let items = clips
        .iter()
        .enumerate()
        .map(|(i, c)| RankedItem { clip: c.clone(), score: 1.0 - i as f64 / 100.0 })
        .collect();
    RankedList { field: IndexField::from(m), items, depth }
}

/// One random fusion instance: up to three lists over at most 30 clips.
pub struct Instance {
    pub depth: usize,
    pub lists: Vec<RankedList>,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let depth = rng.random_range(1..=10);
    let universe = rng.random_range(1..=30);
    let mut modalities = Modality::ALL.to_vec();
    modalities.shuffle(rng);
    modalities.truncate(rng.random_range(1..=3));
    let lists = modalities
        .into_iter()
        .map(|m| {
            let mut pool: Vec<usize> = (0..universe).collect();
            pool.shuffle(rng);
            pool.truncate(rng.random_range(0..=depth.min(universe)));
            list(m, &pool.into_iter().map(clip).collect::<Vec<_>>(), depth)
        })
        .collect();
    Instance { depth, lists }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Brute-force oracle: tabulate every clip's per-list rank, score each row
/// directly from the rank formula, and sort rows by the documented keys.
pub fn oracle_order(lists: &[RankedList], score: impl Fn(usize) -> f64) -> Vec<(String, f64)> {
    let mut table: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for l in lists {
        for (pos, item) in l.items.iter().enumerate() {
            table.entry(item.clip.to_string()).or_default().push(pos + 1);
        }
    }
    let mut rows: Vec<(String, f64, usize, usize)> = table
        .into_iter()
        .map(|(id, ranks)| {
            // add in a fixed order so equal totals compare equal bit-for-bit
            let mut sorted = ranks.clone();
            sorted.sort_unstable();
            let total: f64 = sorted.iter().map(|&r| score(r)).sum();
            (id, total, *sorted.first().unwrap(), ranks.len())
        })
        .collect();
    rows.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then(a.2.cmp(&b.2))
            .then(b.3.cmp(&a.3))
            .then(a.0.cmp(&b.0))
    });
    rows.into_iter().map(|(id, s, _, _)| (id, s)).collect()
}

pub struct RoutingFixture {
    pub decisions: Vec<RoutingDecision>,
    pub gold: Vec<Option<SourceLabel>>,
}

pub fn routing_fixture() -> RoutingFixture {
    let mut decisions = Vec::new();
    let mut gold = Vec::new();
    for row in jsonl("routing_fixture.jsonl") {
        let selected = row["selected"].as_array().unwrap();
        let sel = selected.iter().map(|m| (Modality::from_wire(m.as_str().unwrap()).unwrap(), "q".to_owned()));
        decisions.push(RoutingDecision::new(sel, Origin::Rule, "q").unwrap());
        gold.push(Some(row["source_modality"].as_str().unwrap().parse::<Modality>().unwrap().into()));
    }
    RoutingFixture { decisions, gold }
}
