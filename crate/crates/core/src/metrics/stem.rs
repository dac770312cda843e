//! Porter-style suffix stripping.
//!
//! `m` is the number of vowel-consonant sequences in the stem (`[C](VC)^m[V]`),
//! `*v*` means the stem contains a vowel, `*d` that it ends in a double
//! consonant, `*o` that it ends consonant-vowel-consonant with the last
//! consonant not `w`, `x` or `y`.
//!
//! | step | rules |
//! |------|-------|
//! | 1a | `sses→ss`, `ies→i`, `ss→ss`, `s→` |
//! | 1b | `(m>0) eed→ee`; `(*v*) ed→`, `(*v*) ing→`, then `at→ate`, `bl→ble`, `iz→ize`, `*d` (not l/s/z) → single letter, `(m=1 and *o)` → `+e` |
//! | 1c | `(*v*) y→i` |
//! | 2 | `(m>0)` ational→ate, tional→tion, enci→ence, anci→ance, izer→ize, abli→able, alli→al, entli→ent, eli→e, ousli→ous, ization→ize, ation→ate, ator→ate, alism→al, iveness→ive, fulness→ful, ousness→ous, aliti→al, iviti→ive, biliti→ble |
//! | 3 | `(m>0)` icate→ic, ative→, alize→al, iciti→ic, ical→ic, ful→, ness→ |
//! | 4 | `(m>1)` al, ance, ence, er, ic, able, ible, ant, ement, ment, ent, ion (after s/t), ou, ism, ate, iti, ous, ive, ize → removed |
//! | 5a | `(m>1) e→`, `(m=1 and not *o) e→` |
//! | 5b | `(m>1 and *d and *l)` → single letter |
//!
//! Words of one or two letters are returned unchanged. The rules are applied
//! repeatedly until the word stops changing, which makes [`stem`] idempotent.

fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// `m` of `w[..len]`.
fn measure(w: &[u8], len: usize) -> usize {
    let mut m = 0;
    let mut i = 0;
    while i < len && is_consonant(w, i) {
        i += 1;
    }
    while i < len {
        while i < len && !is_consonant(w, i) {
            i += 1;
        }
        if i >= len {
            break;
        }
        while i < len && is_consonant(w, i) {
            i += 1;
        }
        m += 1;
    }
    m
}

fn has_vowel(w: &[u8], len: usize) -> bool {
    (0..len).any(|i| !is_consonant(w, i))
}

fn ends_double_consonant(w: &[u8], len: usize) -> bool {
    len >= 2 && w[len - 1] == w[len - 2] && is_consonant(w, len - 1)
}

fn ends_cvc(w: &[u8], len: usize) -> bool {
    len >= 3
        && is_consonant(w, len - 3)
        && !is_consonant(w, len - 2)
        && is_consonant(w, len - 1)
        && !matches!(w[len - 1], b'w' | b'x' | b'y')
}

struct Word(Vec<u8>);

impl Word {
    fn ends(&self, suffix: &str) -> bool {
        self.0.ends_with(suffix.as_bytes())
    }

    fn stem_len(&self, suffix: &str) -> usize {
        self.0.len() - suffix.len()
    }

    fn replace(&mut self, suffix: &str, with: &str) {
        let n = self.stem_len(suffix);
        self.0.truncate(n);
        self.0.extend_from_slice(with.as_bytes());
    }

    /// Replaces the first listed suffix the word ends with, if its stem has
    /// measure greater than `min_m`. Returns whether a suffix matched at all.
    fn rule_list(&mut self, rules: &[(&str, &str)], min_m: usize) -> bool {
        for &(suffix, with) in rules {
            if self.ends(suffix) {
                if measure(&self.0, self.stem_len(suffix)) > min_m {
                    self.replace(suffix, with);
                }
                return true;
            }
        }
        false
    }

    fn step1a(&mut self) {
        if self.ends("sses") {
            self.replace("sses", "ss");
        } else if self.ends("ies") {
            self.replace("ies", "i");
        } else if self.ends("ss") {
        } else if self.ends("s") {
            self.replace("s", "");
        }
    }

    fn step1b(&mut self) {
        if self.ends("eed") {
            if measure(&self.0, self.stem_len("eed")) > 0 {
                self.replace("eed", "ee");
            }
            return;
        }
        let suffix = if self.ends("ed") && has_vowel(&self.0, self.stem_len("ed")) {
            "ed"
        } else if self.ends("ing") && has_vowel(&self.0, self.stem_len("ing")) {
            "ing"
        } else {
            return;
        };
        self.replace(suffix, "");
        if self.ends("at") || self.ends("bl") || self.ends("iz") {
            self.0.push(b'e');
        } else if ends_double_consonant(&self.0, self.0.len())
            && !matches!(self.0.last(), Some(b'l' | b's' | b'z'))
        {
            self.0.pop();
        } else if measure(&self.0, self.0.len()) == 1 && ends_cvc(&self.0, self.0.len()) {
            self.0.push(b'e');
        }
    }

    fn step1c(&mut self) {
        if self.ends("y") && has_vowel(&self.0, self.stem_len("y")) {
            self.replace("y", "i");
        }
    }

    fn step2(&mut self) {
        self.rule_list(
            &[
                ("ational", "ate"),
                ("tional", "tion"),
                ("enci", "ence"),
                ("anci", "ance"),
                ("izer", "ize"),
                ("abli", "able"),
                ("alli", "al"),
                ("entli", "ent"),
                ("eli", "e"),
                ("ousli", "ous"),
                ("ization", "ize"),
                ("ation", "ate"),
                ("ator", "ate"),
                ("alism", "al"),
                ("iveness", "ive"),
                ("fulness", "ful"),
                ("ousness", "ous"),
                ("aliti", "al"),
                ("iviti", "ive"),
                ("biliti", "ble"),
            ],
            0,
        );
    }

    fn step3(&mut self) {
        self.rule_list(
            &[
                ("icate", "ic"),
                ("ative", ""),
                ("alize", "al"),
                ("iciti", "ic"),
                ("ical", "ic"),
                ("ful", ""),
                ("ness", ""),
            ],
            0,
        );
    }

    fn step4(&mut self) {
        const SUFFIXES: [&str; 19] = [
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion",
            "ou", "ism", "ate", "iti", "ous", "ive", "ize",
        ];
        // the longest matching suffix wins
        let Some(suffix) = SUFFIXES
            .iter()
            .filter(|s| self.ends(s))
            .max_by_key(|s| s.len())
        else {
            return;
        };
        let n = self.stem_len(suffix);
        if *suffix == "ion" && !(n > 0 && matches!(self.0[n - 1], b's' | b't')) {
            return;
        }
        if measure(&self.0, n) > 1 {
            self.0.truncate(n);
        }
    }

    fn step5(&mut self) {
        if self.ends("e") {
            let n = self.stem_len("e");
            let m = measure(&self.0, n);
            if m > 1 || (m == 1 && !ends_cvc(&self.0, n)) {
                self.0.truncate(n);
            }
        }
        let len = self.0.len();
        if measure(&self.0, len) > 1 && ends_double_consonant(&self.0, len) && self.ends("l") {
            self.0.pop();
        }
    }
}

fn stem_once(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut w = Word(word.as_bytes().to_vec());
    w.step1a();
    w.step1b();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5();
    String::from_utf8(w.0).expect("ascii in, ascii out")
}

/// Stems a lowercase token. Tokens with characters outside `a-z` are
/// returned unchanged.
pub fn stem(word: &str) -> String {
    let mut cur = word.to_string();
    for _ in 0..8 {
        let next = stem_once(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rule_table_examples() {
        let cases = [
            ("running", "run"),
            ("cat", "cat"),
            ("cats", "cat"),
            ("caresses", "caress"),
            ("ponies", "poni"),
            ("agreed", "agr"),
            ("plastered", "plaster"),
            ("motoring", "motor"),
            ("hopping", "hop"),
            ("filing", "file"),
            ("happy", "happi"),
            ("relational", "relat"),
            ("hopefulness", "hope"),
            ("adjustment", "adjust"),
            ("quickly", "quickli"),
            ("controlling", "control"),
            ("is", "is"),
        ];
        for (w, s) in cases {
            assert_eq!(stem(w), s, "{w}");
        }
    }

    #[test]
    fn measure_examples() {
        for (w, m) in [("tr", 0), ("ee", 0), ("tree", 0), ("trouble", 1), ("oats", 1), ("troubles", 2), ("private", 2)] {
            assert_eq!(measure(w.as_bytes(), w.len()), m, "{w}");
        }
    }

    #[test]
    fn idempotent_on_lexicon() {
        let lex = crate::corruption::DEFAULT_LEXICON;
        for word in lex.split(|c: char| !c.is_ascii_lowercase()).filter(|w| !w.is_empty()) {
            let s = stem(word);
            assert_eq!(stem(&s), s, "{word}");
        }
    }

    proptest! {
        #[test]
        fn idempotent_on_random_words(w in "[a-z]{1,14}") {
            let s = stem(&w);
            prop_assert_eq!(stem(&s), s.clone());
            prop_assert!(s.len() <= w.len());
        }
    }
}
