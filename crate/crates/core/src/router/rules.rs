//! Deterministic keyword router.

use crate::corpus::{normalize_text, Modality, QueryRecord};
use crate::error::RouterError;

use super::{Origin, Router, RoutingDecision};

const ASR_WORDS: &[&str] = &["say", "says", "spoken", "speaker", "hear", "mentions"];
const OCR_WORDS: &[&str] = &["sign", "text", "read", "subtitle", "caption", "title", "written", "displayed", "label"];
const VISUAL_WORDS: &[&str] = &["describe", "color", "shape", "wearing", "scene", "object"];

// multi-word cues, matched on normalized token sequences
const ASR_PHRASES: &[&[&str]] = &[];
const OCR_PHRASES: &[&[&str]] = &[&["sign", "say"], &["sign", "says"]];
const VISUAL_PHRASES: &[&[&str]] = &[&["looks", "like"]];

fn cues(m: Modality) -> (&'static [&'static str], &'static [&'static [&'static str]]) {
    match m {
        Modality::Asr => (ASR_WORDS, ASR_PHRASES),
        Modality::Ocr => (OCR_WORDS, OCR_PHRASES),
        Modality::Visual => (VISUAL_WORDS, VISUAL_PHRASES),
    }
}

/// True when the raw text holds a quoted span: an opening quote at a word
/// start and a closing quote at a word end. Apostrophes inside words such as
/// "I'm" do not count.
fn has_quoted_span(raw: &str) -> bool {
    let chars: Vec<char> = raw.chars().collect();
    let closing_for = |c: char| match c {
        '"' => Some('"'),
        '\'' => Some('\''),
        '\u{201c}' => Some('\u{201d}'),
        '\u{2018}' => Some('\u{2019}'),
        _ => None,
    };
    for (i, &c) in chars.iter().enumerate() {
        let Some(close) = closing_for(c) else { continue };
        if i > 0 && !chars[i - 1].is_whitespace() {
            continue;
        }
        for j in i + 2..chars.len() {
            if chars[j] == close && chars.get(j + 1).is_none_or(|n| !n.is_alphanumeric()) {
                return true;
            }
        }
    }
    false
}

/// Cue counts per modality in fixed order (ASR, OCR, VISUAL).
pub fn cue_scores(text: &str) -> [usize; 3] {
    let norm = normalize_text(text);
    let tokens: Vec<&str> = norm.split(' ').filter(|t| !t.is_empty()).collect();
    let mut scores = [0usize; 3];
    for m in Modality::ALL {
        let (words, phrases) = cues(m);
        let mut s = tokens.iter().filter(|t| words.contains(t)).count();
        for phrase in phrases {
            s += tokens.windows(phrase.len()).filter(|w| w == phrase).count();
        }
        scores[m.index()] = s;
    }
    // quoted speech attributed with "says"
    if has_quoted_span(text) && tokens.iter().any(|t| *t == "says" || *t == "say") {
        scores[Modality::Asr.index()] += 1;
    }
    scores
}

/// Selects every modality with a positive cue score, highest first (ties in
/// fixed modality order). No cues at all selects all three.
pub fn rule_route(text: &str) -> RoutingDecision {
    let scores = cue_scores(text);
    let mut ranked: Vec<Modality> = Modality::ALL.into_iter().filter(|m| scores[m.index()] > 0).collect();
    if ranked.is_empty() {
        return RoutingDecision::all(text, Origin::Rule);
    }
    ranked.sort_by_key(|m| std::cmp::Reverse(scores[m.index()]));
    RoutingDecision::new(ranked.into_iter().map(|m| (m, text.to_owned())), Origin::Rule, text)
        .expect("at least one modality selected")
}

pub struct RuleRouter;

impl Router for RuleRouter {
    fn route(&self, query: &QueryRecord) -> Result<RoutingDecision, RouterError> {
        Ok(rule_route(&query.text))
    }

    fn name(&self) -> &'static str {
        "rule"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn selected(text: &str) -> Vec<Modality> {
        rule_route(text).modalities().collect()
    }

    #[test]
    fn published_examples() {
        assert_eq!(selected("Who says 'I'm not going anywhere' at the end?"), [Modality::Asr]);
        assert_eq!(selected("What phrase appears on the protest sign?"), [Modality::Ocr]);
        assert_eq!(selected("Describe the color and shape of the vehicle"), [Modality::Visual]);
        assert_eq!(selected("Read the subtitle text that appears at 00:12")[0], Modality::Ocr);
    }

    #[test]
    fn no_cues_selects_everything() {
        let d = rule_route("asdf qwerty");
        assert_eq!(d.origin(), Origin::Rule);
        assert_eq!(d.modalities().collect::<Vec<_>>(), Modality::ALL);
    }

    #[test]
    fn sign_say_ranks_ocr_over_asr() {
        // OCR: "sign" + phrase "sign say" = 2; ASR: "say" = 1
        assert_eq!(cue_scores("What does the sign say"), [1, 2, 0]);
        assert_eq!(selected("What does the sign say"), [Modality::Ocr, Modality::Asr]);
    }

    #[test]
    fn quote_bonus_needs_a_real_quoted_span() {
        assert_eq!(cue_scores("Who says 'I'm not going anywhere' at the end?")[0], 2);
        assert_eq!(cue_scores("who says hello")[0], 1);
        assert_eq!(cue_scores("he says \"stop\" loudly")[0], 2);
        assert_eq!(cue_scores("it's what she says")[0], 1);
    }

    #[test]
    fn cues_are_whole_words() {
        assert_eq!(cue_scores("context signature textbook"), [0, 0, 0]);
        assert_eq!(cue_scores("it Looks Like rain"), [0, 0, 1]);
    }

    #[test]
    fn deterministic() {
        let t = "describe the sign text the speaker mentions";
        assert_eq!(rule_route(t), rule_route(t));
    }
}
