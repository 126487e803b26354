use std::collections::BTreeSet;

use super::PprlError;

/// Deduplicated set of contiguous substrings of length `q`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct QGramSet {
    q: usize,
    grams: BTreeSet<String>,
}

impl QGramSet {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.grams.iter().map(String::as_str)
    }

    pub fn contains(&self, gram: &str) -> bool {
        self.grams.contains(gram)
    }

    pub fn union(&self, other: &QGramSet) -> QGramSet {
        QGramSet {
            q: self.q,
            grams: self.grams.union(&other.grams).cloned().collect(),
        }
    }

    /// Plaintext Dice coefficient `2|A ∩ B| / (|A| + |B|)`, 1 for two empty sets.
    pub fn dice(&self, other: &QGramSet) -> f64 {
        let total = self.len() + other.len();
        if total == 0 {
            return 1.0;
        }
        2.0 * self.grams.intersection(&other.grams).count() as f64 / total as f64
    }
}

/// Splits `s` into its distinct q-grams, counting Unicode scalar values.
/// No padding is added, so strings shorter than `q` give the empty set.
pub fn qgrams(s: &str, q: usize) -> Result<QGramSet, PprlError> {
    if q == 0 {
        return Err(PprlError::ZeroGramLength);
    }
    let chars: Vec<char> = s.chars().collect();
    let grams = chars.windows(q).map(|w| w.iter().collect()).collect();
    Ok(QGramSet { q, grams })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn bigrams_of_names() {
        let g = qgrams("peter", 2).unwrap();
        assert_eq!(g.iter().collect::<Vec<_>>(), set(&["er", "et", "pe", "te"]));
        assert!(qgrams("", 2).unwrap().is_empty());
        assert!(qgrams("a", 2).unwrap().is_empty());
        assert_eq!(qgrams("aaa", 2).unwrap().len(), 1);
        assert_eq!(qgrams("x", 0), Err(PprlError::ZeroGramLength));
    }

    #[test]
    fn plaintext_dice() {
        let a = qgrams("peter", 2).unwrap();
        let b = qgrams("pete", 2).unwrap();
        assert!((a.dice(&b) - 6.0 / 7.0).abs() < 1e-15);
        assert_eq!(QGramSet::default().dice(&QGramSet::default()), 1.0);
    }

    #[test]
    fn counts_characters_not_bytes() {
        let g = qgrams("zoë", 2).unwrap();
        assert_eq!(g.iter().collect::<Vec<_>>(), set(&["oë", "zo"]));
    }

    proptest! {
        #[test]
        fn every_gram_has_length_q(s in "\\PC{0,20}", q in 1usize..5) {
            let g = qgrams(&s, q).unwrap();
            for gram in g.iter() {
                prop_assert_eq!(gram.chars().count(), q);
                prop_assert!(s.contains(gram));
            }
            prop_assert!(g.len() <= s.chars().count().saturating_sub(q - 1));
        }
    }
}
