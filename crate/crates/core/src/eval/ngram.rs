//! BLEU-1, ROUGE-L, METEOR (exact + stem stages) and CIDEr.

use std::collections::HashMap;

use super::{EvalError, EvalPair};

pub const ROUGE_L_BETA: f64 = 1.2;
pub const CIDER_MAX_N: usize = 4;
pub const CIDER_SCALE: f64 = 10.0;

fn counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

/// Clipped unigram precision times the brevity penalty `exp(min(0, 1 - r/c))`.
pub fn bleu1(pair: &EvalPair) -> Result<f64, EvalError> {
    let cand = pair.candidate_tokens();
    let refr = pair.reference_tokens();
    if cand.is_empty() {
        return Err(EvalError::EmptyTokens { id: pair.id.clone(), side: "candidate" });
    }
    let ref_counts = counts(&refr);
    let clipped: usize = counts(&cand).into_iter().map(|(w, n)| n.min(ref_counts.get(w).copied().unwrap_or(0))).sum();
    let c = cand.len() as f64;
    let r = refr.len() as f64;
    let precision = clipped as f64 / c;
    let bp = (1.0 - r / c).min(0.0).exp();
    Ok(precision * bp)
}

pub(crate) fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS F-measure with `beta = 1.2`.
pub fn rouge_l(pair: &EvalPair) -> Result<f64, EvalError> {
    let cand = pair.candidate_tokens();
    let refr = pair.reference_tokens();
    pair.require_both(&cand, &refr)?;
    let lcs = lcs_len(&cand, &refr) as f64;
    if lcs == 0.0 {
        return Ok(0.0);
    }
    let p = lcs / cand.len() as f64;
    let r = lcs / refr.len() as f64;
    let b2 = ROUGE_L_BETA * ROUGE_L_BETA;
    Ok((1.0 + b2) * p * r / (r + b2 * p))
}

const SUFFIXES: [(&str, &str); 11] = [
    ("sses", "ss"),
    ("ies", "y"),
    ("ied", "y"),
    ("ing", ""),
    ("edly", ""),
    ("ed", ""),
    ("ly", ""),
    ("ness", ""),
    ("ment", ""),
    ("es", ""),
    ("s", ""),
];

/// Suffix-stripping stemmer for the METEOR stem stage.
///
/// Applies the first matching rule of `sses→ss, ies→y, ied→y, ing, edly,
/// ed, ly, ness, ment, es, s` (the rest strip to nothing) provided at least
/// three characters remain. Words ending in `ss` keep that ending.
pub fn stem(word: &str) -> String {
    if word.ends_with("ss") && !word.ends_with("sses") {
        return word.to_owned();
    }
    for (suffix, replacement) in SUFFIXES {
        if let Some(base) = word.strip_suffix(suffix) {
            if base.chars().count() >= 3 {
                return format!("{base}{replacement}");
            }
        }
    }
    word.to_owned()
}

/// Alignment statistics behind a METEOR score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeteorAlignment {
    pub matches: usize,
    pub chunks: usize,
}

pub fn meteor_align(candidate: &[String], reference: &[String]) -> MeteorAlignment {
    let mut cand_used = vec![false; candidate.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let stems_c: Vec<String> = candidate.iter().map(|t| stem(t)).collect();
    let stems_r: Vec<String> = reference.iter().map(|t| stem(t)).collect();
    for stage in 0..2 {
        for i in 0..candidate.len() {
            if cand_used[i] {
                continue;
            }
            let hit = (0..reference.len()).find(|&j| {
                !ref_used[j] && if stage == 0 { candidate[i] == reference[j] } else { stems_c[i] == stems_r[j] }
            });
            if let Some(j) = hit {
                cand_used[i] = true;
                ref_used[j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    let chunks = if pairs.is_empty() {
        0
    } else {
        1 + pairs.windows(2).filter(|w| w[1].0 != w[0].0 + 1 || w[1].1 != w[0].1 + 1).count()
    };
    MeteorAlignment { matches: pairs.len(), chunks }
}

/// METEOR without the synonym stage: `F_mean = 10PR / (R + 9P)`, scaled by
/// `1 - 0.5 (chunks / matches)^3`.
pub fn meteor_lite(pair: &EvalPair) -> Result<f64, EvalError> {
    let cand = pair.candidate_tokens();
    let refr = pair.reference_tokens();
    pair.require_both(&cand, &refr)?;
    let MeteorAlignment { matches, chunks } = meteor_align(&cand, &refr);
    if matches == 0 {
        return Ok(0.0);
    }
    let m = matches as f64;
    let p = m / cand.len() as f64;
    let r = m / refr.len() as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    Ok(f_mean * (1.0 - penalty))
}

pub(crate) fn ngrams(tokens: &[String], n: usize) -> HashMap<Vec<&str>, f64> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.iter().map(String::as_str).collect()).or_insert(0.0) += 1.0;
        }
    }
    m
}

fn tf_idf<'a>(m: &HashMap<Vec<&'a str>, f64>, idf: &dyn Fn(&Vec<&str>) -> f64) -> HashMap<Vec<&'a str>, f64> {
    m.iter().map(|(g, tf)| (g.clone(), tf * idf(g))).collect()
}

/// CIDEr with one reference per pair. For each `n` in `1..=4`, n-gram count
/// vectors are weighted by `ln(N / max(1, df))`, where `df` counts the
/// references containing the n-gram; the per-`n` cosines are averaged and
/// scaled by 10. A zero vector contributes a cosine of 0.
pub fn cider(pairs: &[EvalPair]) -> Result<Vec<f64>, EvalError> {
    if pairs.len() < 2 {
        return Err(EvalError::CorpusTooSmall { needed: 2, got: pairs.len() });
    }
    let toks: Vec<(Vec<String>, Vec<String>)> =
        pairs.iter().map(|p| (p.candidate_tokens(), p.reference_tokens())).collect();
    for ((c, r), p) in toks.iter().zip(pairs) {
        p.require_both(c, r)?;
    }
    let n_docs = pairs.len() as f64;
    let mut scores = vec![0.0; pairs.len()];
    for n in 1..=CIDER_MAX_N {
        let refs: Vec<HashMap<Vec<&str>, f64>> = toks.iter().map(|(_, r)| ngrams(r, n)).collect();
        let mut df: HashMap<&Vec<&str>, f64> = HashMap::new();
        for r in &refs {
            for g in r.keys() {
                *df.entry(g).or_insert(0.0) += 1.0;
            }
        }
        let idf = |g: &Vec<&str>| (n_docs / df.get(g).copied().unwrap_or(0.0).max(1.0)).ln();
        for (i, (c, _)) in toks.iter().enumerate() {
            let cand = ngrams(c, n);
            let vc = tf_idf(&cand, &idf);
            let vr = tf_idf(&refs[i], &idf);
            let norm = |v: &HashMap<Vec<&str>, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
            let (nc, nr) = (norm(&vc), norm(&vr));
            if nc == 0.0 || nr == 0.0 {
                continue;
            }
            let d: f64 = vc.iter().map(|(g, x)| x * vr.get(g).copied().unwrap_or(0.0)).sum();
            scores[i] += d / (nc * nr);
        }
    }
    Ok(scores.into_iter().map(|s| s * CIDER_SCALE / CIDER_MAX_N as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(r: &str, c: &str) -> EvalPair {
        EvalPair::new("p", r, c).unwrap()
    }

    #[test]
    fn bleu_hand_counts() {
        assert_eq!(bleu1(&pair("the cat sat", "the cat sat")).unwrap(), 1.0);
        let b = bleu1(&pair("the cat slept", "the cat sat")).unwrap();
        assert!((b - 2.0 / 3.0).abs() < 1e-12);
        let b = bleu1(&pair("a b c d e f g h i j", "a")).unwrap();
        assert!((b - (-9.0f64).exp()).abs() < 1e-15);
        assert!((b - 1.234e-4).abs() < 1e-7);
    }

    #[test]
    fn bleu_clips_repeats() {
        let b = bleu1(&pair("the cat", "the the the the")).unwrap();
        assert!((b - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rouge_extremes() {
        assert!((rouge_l(&pair("a b c", "a b c")).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rouge_l(&pair("a b c", "x y z")).unwrap(), 0.0);
    }

    #[test]
    fn rouge_by_hand() {
        // lcs("a b c d", "a c e") = 2; P = 2/3, R = 2/4.
        let (p, r) = (2.0 / 3.0, 0.5);
        let b2 = 1.44;
        let want = (1.0 + b2) * p * r / (r + b2 * p);
        assert!((rouge_l(&pair("a b c d", "a c e")).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn stemmer_rules() {
        assert_eq!(stem("emissions"), "emission");
        assert_eq!(stem("reduces"), "reduc");
        assert_eq!(stem("reduced"), "reduc");
        assert_eq!(stem("reducing"), "reduc");
        assert_eq!(stem("policies"), "policy");
        assert_eq!(stem("glass"), "glass");
        assert_eq!(stem("is"), "is");
    }

    #[test]
    fn meteor_identity_closed_form() {
        let n = 5.0f64;
        let m = meteor_lite(&pair("one two three four five", "one two three four five")).unwrap();
        assert!((m - (1.0 - 0.5 * (1.0 / n).powi(3))).abs() < 1e-12);
        assert_eq!(meteor_lite(&pair("a b", "c d")).unwrap(), 0.0);
    }

    #[test]
    fn meteor_swap_hand_alignment() {
        // Alignment by hand: the->the, sat->sat, cat->cat, down->down. Sorted by
        // candidate position the reference indices are 0,2,1,3: every step breaks
        // adjacency, so 4 chunks for 4 matches. P = R = F = 1; penalty 0.5.
        let a = meteor_align(&crate::eval::tokenize("the sat cat down"), &crate::eval::tokenize("the cat sat down"));
        assert_eq!(a, MeteorAlignment { matches: 4, chunks: 4 });
        let m = meteor_lite(&pair("the cat sat down", "the sat cat down")).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
    }

    #[test]
    fn meteor_stem_stage() {
        let a = meteor_align(&crate::eval::tokenize("reducing emissions"), &crate::eval::tokenize("reduced emission"));
        assert_eq!(a, MeteorAlignment { matches: 2, chunks: 1 });
    }

    #[test]
    fn cider_self_match_and_disjoint() {
        let pairs =
            vec![pair("bioenergy grows fast", "bioenergy grows fast"), pair("forests are lost", "nothing shared here")];
        let s = cider(&pairs).unwrap();
        // 3 tokens: n = 1..3 contribute cosine 1, n = 4 has no n-grams.
        assert!((s[0] - 3.0 * 10.0 / 4.0).abs() < 1e-12);
        assert_eq!(s[1], 0.0);
        assert!(matches!(cider(&pairs[..1]), Err(EvalError::CorpusTooSmall { .. })));
    }
}
