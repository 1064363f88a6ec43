//! Seeded synthetic corpus generator.
//!
//! Every (clip, modality) field carries one planted token that occurs nowhere
//! else in the corpus. Fields also carry a per-video token and two boundary
//! tokens, each shared with the temporally adjacent clip on that side, so a
//! query built from a clip retrieves the clip first and a ±10 s neighbour
//! second. Queries carry unambiguous modality cue words.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ClipRecord, ClipRef, Corpus, Modality, QueryRecord, SourceLabel};
use crate::error::CorpusError;

/// Length of every synthetic clip in seconds.
pub const CLIP_SECONDS: u64 = 10;

const TOKEN_LEN: usize = 10;
const FILLER_PER_FIELD: usize = 4;

const CATEGORIES: [&str; 5] = ["howto", "education", "entertainment", "news", "science"];

const ASR_FILLER: [&str; 12] = [
    "okay", "basically", "today", "going", "really", "just", "alright", "think", "maybe", "actually",
    "folks", "honestly",
];
const OCR_FILLER: [&str; 12] = [
    "menu", "price", "exit", "open", "sale", "chapter", "step", "episode", "warning", "channel",
    "subscribe", "part",
];
const VISUAL_FILLER: [&str; 12] = [
    "kitchen", "street", "table", "window", "person", "crowd", "tree", "room", "car", "light",
    "stage", "field",
];

/// Template words used by generated text; planted tokens never collide with these.
const TEMPLATE_WORDS: [&str; 12] =
    ["who", "says", "about", "read", "the", "sign", "text", "near", "describe", "scene", "showing", "with"];

/// Generated tokens for one (video, modality) stream.
struct Stream {
    video: String,
    boundaries: Vec<String>,
}

struct Tokens {
    rng: ChaCha8Rng,
    seen: HashSet<String>,
}

impl Tokens {
    fn fresh(&mut self) -> String {
        loop {
            let t: String = (0..TOKEN_LEN).map(|_| char::from(b'a' + self.rng.random_range(0..26u8))).collect();
            if self.seen.insert(t.clone()) {
                return t;
            }
        }
    }

    fn video_id(&mut self) -> String {
        const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
        loop {
            let id: String =
                (0..11).map(|_| char::from(ALPHABET[self.rng.random_range(0..ALPHABET.len())])).collect();
            if self.seen.insert(id.clone()) {
                return id;
            }
        }
    }

    fn filler(&mut self, pool: &[&'static str]) -> Vec<&'static str> {
        (0..FILLER_PER_FIELD).map(|_| pool[self.rng.random_range(0..pool.len())]).collect()
    }
}

/// Output of [`generate_synthetic_corpus`], including the planted token of
/// every (clip, modality) field for verification.
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub queries: Vec<QueryRecord>,
    /// `(clip, modality, planted token)` in generation order.
    pub planted: Vec<(ClipRef, Modality, String)>,
}

pub fn generate_synthetic_corpus(
    seed: u64,
    n_videos: usize,
    clips_per_video: usize,
) -> Result<SyntheticCorpus, CorpusError> {
    if n_videos == 0 {
        return Err(CorpusError::InvalidParameters("n_videos must be at least 1".into()));
    }
    if clips_per_video == 0 {
        return Err(CorpusError::InvalidParameters("clips_per_video must be at least 1".into()));
    }
    let mut tokens = Tokens {
        rng: ChaCha8Rng::seed_from_u64(seed),
        seen: TEMPLATE_WORDS.iter().map(|w| w.to_string()).collect(),
    };

    let mut clips = Vec::with_capacity(n_videos * clips_per_video);
    let mut queries = Vec::with_capacity(n_videos * clips_per_video * 3);
    let mut planted = Vec::with_capacity(queries.capacity());

    for _ in 0..n_videos {
        let video_id = tokens.video_id();
        let category = CATEGORIES[tokens.rng.random_range(0..CATEGORIES.len())];
        let streams: Vec<Stream> = Modality::ALL
            .iter()
            .map(|_| Stream {
                video: tokens.fresh(),
                boundaries: (0..=clips_per_video).map(|_| tokens.fresh()).collect(),
            })
            .collect();

        for j in 0..clips_per_video {
            let start = j as u64 * CLIP_SECONDS;
            let clip = ClipRef::new(&video_id, start, start + CLIP_SECONDS).expect("generated ref is valid");
            let mut fields: [String; 3] = Default::default();

            for m in Modality::ALL {
                let s = &streams[m.index()];
                let (left, right) = (&s.boundaries[j], &s.boundaries[j + 1]);
                let p = tokens.fresh();
                let context = format!("{} {left} {right}", s.video);
                let (field, query) = match m {
                    Modality::Asr => {
                        let f = tokens.filler(&ASR_FILLER);
                        (
                            format!("{} {} {p}. {} {context} {}.", f[0], f[1], f[2], f[3]),
                            format!("Who says {p} about {context}?"),
                        )
                    }
                    Modality::Ocr => {
                        let f = tokens.filler(&OCR_FILLER);
                        (
                            format!("{p} {} {}. {context} {} {}", f[0], f[1], f[2], f[3]),
                            format!("Read the sign text {p} near {context}"),
                        )
                    }
                    Modality::Visual => {
                        let f = tokens.filler(&VISUAL_FILLER);
                        (
                            format!("{} {} with {p}. {context} {} {}.", f[0], f[1], f[2], f[3]),
                            format!("Describe the scene showing {p} with {context}"),
                        )
                    }
                };
                fields[m.index()] = field;
                queries.push(QueryRecord {
                    query_id: format!("q{:06}_{}", clips.len(), m.wire_name()),
                    text: query,
                    gold: clip.clone(),
                    source: Some(SourceLabel::from(m)),
                    category: Some(category.to_owned()),
                });
                planted.push((clip.clone(), m, p));
            }

            let [asr, ocr, visual] = fields;
            let fused = format!("{asr} {ocr}. {visual}");
            clips.push(ClipRecord {
                clip,
                category: Some(category.to_owned()),
                asr_text: Some(asr),
                ocr_text: Some(ocr),
                visual_caption: Some(visual),
                fused_caption: Some(fused),
            });
        }
    }

    let corpus = Corpus::from_records(clips)?;
    Ok(SyntheticCorpus { corpus, queries, planted })
}
