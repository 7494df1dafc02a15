//! Porter stemmer, the classic 1980 suffix-stripping algorithm.
//!
//! Within each step the longest matching suffix is selected; if its
//! condition fails, the step ends without trying shorter suffixes.
//! Non-ASCII tokens are returned unchanged.

/// Stems a lowercase token.
pub fn stem(word: &str) -> String {
    if !word.is_ascii() {
        return word.to_string();
    }
    let mut w = word.as_bytes().to_vec();
    step1a(&mut w);
    step1b(&mut w);
    step1c(&mut w);
    step2(&mut w);
    step3(&mut w);
    step4(&mut w);
    step5a(&mut w);
    step5b(&mut w);
    String::from_utf8(w).expect("stemmer operates on ascii")
}

fn is_cons(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => {
            if i == 0 {
                true
            } else {
                !is_cons(w, i - 1)
            }
        }
        _ => true,
    }
}

/// Number of VC sequences in the [C](VC)^m[V] decomposition.
fn measure(w: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..w.len() {
        let vowel = !is_cons(w, i);
        if prev_vowel && !vowel {
            m += 1;
        }
        prev_vowel = vowel;
    }
    m
}

fn has_vowel(w: &[u8]) -> bool {
    (0..w.len()).any(|i| !is_cons(w, i))
}

fn ends_double_cons(w: &[u8]) -> bool {
    w.len() >= 2 && w[w.len() - 1] == w[w.len() - 2] && is_cons(w, w.len() - 1)
}

/// *o: ends cvc where the final consonant is not w, x or y.
fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    n >= 3
        && is_cons(w, n - 3)
        && !is_cons(w, n - 2)
        && is_cons(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

fn ends_with(w: &[u8], suffix: &[u8]) -> bool {
    w.len() >= suffix.len() && &w[w.len() - suffix.len()..] == suffix
}

fn replace(w: &mut Vec<u8>, suffix_len: usize, with: &[u8]) {
    let keep = w.len() - suffix_len;
    w.truncate(keep);
    w.extend_from_slice(with);
}

fn step1a(w: &mut Vec<u8>) {
    if ends_with(w, b"sses") {
        replace(w, 4, b"ss");
    } else if ends_with(w, b"ies") {
        replace(w, 3, b"i");
    } else if ends_with(w, b"ss") {
        // unchanged
    } else if ends_with(w, b"s") {
        replace(w, 1, b"");
    }
}

fn step1b(w: &mut Vec<u8>) {
    if ends_with(w, b"eed") {
        if measure(&w[..w.len() - 3]) > 0 {
            replace(w, 1, b"");
        }
        return;
    }
    let fired = if ends_with(w, b"ed") && has_vowel(&w[..w.len() - 2]) {
        replace(w, 2, b"");
        true
    } else if ends_with(w, b"ing") && has_vowel(&w[..w.len() - 3]) {
        replace(w, 3, b"");
        true
    } else {
        false
    };
    if fired {
        if ends_with(w, b"at") || ends_with(w, b"bl") || ends_with(w, b"iz") {
            w.push(b'e');
        } else if ends_double_cons(w) && !matches!(w[w.len() - 1], b'l' | b's' | b'z') {
            w.pop();
        } else if measure(w) == 1 && ends_cvc(w) {
            w.push(b'e');
        }
    }
}

fn step1c(w: &mut Vec<u8>) {
    if ends_with(w, b"y") && has_vowel(&w[..w.len() - 1]) {
        replace(w, 1, b"i");
    }
}

const STEP2_RULES: &[(&[u8], &[u8])] = &[
    (b"ational", b"ate"),
    (b"tional", b"tion"),
    (b"enci", b"ence"),
    (b"anci", b"ance"),
    (b"izer", b"ize"),
    (b"abli", b"able"),
    (b"alli", b"al"),
    (b"entli", b"ent"),
    (b"eli", b"e"),
    (b"ousli", b"ous"),
    (b"ization", b"ize"),
    (b"ation", b"ate"),
    (b"ator", b"ate"),
    (b"alism", b"al"),
    (b"iveness", b"ive"),
    (b"fulness", b"ful"),
    (b"ousness", b"ous"),
    (b"aliti", b"al"),
    (b"iviti", b"ive"),
    (b"biliti", b"ble"),
];

const STEP3_RULES: &[(&[u8], &[u8])] = &[
    (b"icate", b"ic"),
    (b"ative", b""),
    (b"alize", b"al"),
    (b"iciti", b"ic"),
    (b"ical", b"ic"),
    (b"ful", b""),
    (b"ness", b""),
];

/// Applies the longest matching rule when m(stem) > 0.
fn apply_rules(w: &mut Vec<u8>, rules: &[(&[u8], &[u8])]) {
    let mut best: Option<(&[u8], &[u8])> = None;
    for &(suffix, with) in rules {
        if ends_with(w, suffix) && best.is_none_or(|(s, _)| suffix.len() > s.len()) {
            best = Some((suffix, with));
        }
    }
    if let Some((suffix, with)) = best {
        if measure(&w[..w.len() - suffix.len()]) > 0 {
            replace(w, suffix.len(), with);
        }
    }
}

fn step2(w: &mut Vec<u8>) {
    apply_rules(w, STEP2_RULES);
}

fn step3(w: &mut Vec<u8>) {
    apply_rules(w, STEP3_RULES);
}

const STEP4_SUFFIXES: &[&[u8]] = &[
    b"al", b"ance", b"ence", b"er", b"ic", b"able", b"ible", b"ant", b"ement",
    b"ment", b"ent", b"ion", b"ou", b"ism", b"ate", b"iti", b"ous", b"ive", b"ize",
];

fn step4(w: &mut Vec<u8>) {
    let mut best: Option<&[u8]> = None;
    for &suffix in STEP4_SUFFIXES {
        if ends_with(w, suffix) && best.is_none_or(|s| suffix.len() > s.len()) {
            best = Some(suffix);
        }
    }
    if let Some(suffix) = best {
        let stem = &w[..w.len() - suffix.len()];
        if measure(stem) > 1 {
            if suffix == b"ion" && !matches!(stem.last(), Some(b's') | Some(b't')) {
                return;
            }
            let keep = w.len() - suffix.len();
            w.truncate(keep);
        }
    }
}

fn step5a(w: &mut Vec<u8>) {
    if ends_with(w, b"e") {
        let stem = &w[..w.len() - 1];
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            w.pop();
        }
    }
}

fn step5b(w: &mut Vec<u8>) {
    if ends_with(w, b"ll") && measure(w) > 1 {
        w.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        assert_eq!(stem("caresses"), "caress");
        assert_eq!(stem("running"), "run");
        assert_eq!(stem("sky"), "sky");
    }

    #[test]
    fn classic_reductions() {
        assert_eq!(stem("generalizations"), "gener");
        assert_eq!(stem("oscillators"), "oscil");
        assert_eq!(stem("ponies"), "poni");
        assert_eq!(stem("happy"), "happi");
        assert_eq!(stem("relational"), "relat");
    }

    #[test]
    fn cvc_restores_silent_e() {
        assert_eq!(stem("filing"), "file");
        assert_eq!(stem("sized"), "size");
        assert_eq!(stem("hopping"), "hop");
    }

    #[test]
    fn short_and_unstemmable_words_pass_through() {
        assert_eq!(stem("sing"), "sing");
        assert_eq!(stem("feed"), "feed");
        assert_eq!(stem("bled"), "bled");
    }

    #[test]
    fn non_ascii_unchanged() {
        assert_eq!(stem("naïve"), "naïve");
    }

    #[test]
    fn digits_are_consonants() {
        assert_eq!(stem("18"), "18");
        assert_eq!(stem("b12"), "b12");
    }

    #[test]
    fn matches_reference_fixture() {
        let pairs = include_str!("../fixtures/porter_pairs.txt");
        let mut checked = 0;
        for (i, line) in pairs.lines().enumerate() {
            let (word, expected) = line
                .split_once('\t')
                .unwrap_or_else(|| panic!("bad fixture line {}", i + 1));
            assert_eq!(stem(word), expected, "word {:?} (line {})", word, i + 1);
            checked += 1;
        }
        assert!(checked >= 200, "fixture must hold at least 200 pairs");
    }

    #[test]
    fn idempotent_on_fixture_vocabulary() {
        let pairs = include_str!("../fixtures/porter_pairs.txt");
        for line in pairs.lines() {
            let (word, _) = line.split_once('\t').unwrap();
            let once = stem(word);
            assert_eq!(stem(&once), once, "stem not idempotent for {:?}", word);
        }
    }
}
