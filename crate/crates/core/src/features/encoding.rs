//! Binary material-condition codes and calendar decomposition.

use std::collections::BTreeSet;

use chrono::{Datelike, NaiveDate};

use super::FeatureError;

/// Number of binary digits per material-condition code.
pub const CODE_BITS: usize = 4;
/// Largest vocabulary that fits in [`CODE_BITS`] digits with code 0 unused.
pub const MAX_VOCABULARY: usize = (1 << CODE_BITS) - 1;

/// Sorted, de-duplicated material-condition names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary(Vec<String>);

impl Vocabulary {
    pub fn new<I, S>(names: I) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = names.into_iter().map(Into::into).collect();
        if set.len() > MAX_VOCABULARY {
            return Err(FeatureError::VocabularyOverflow(set.len()));
        }
        Ok(Self(set.into_iter().collect()))
    }

    pub fn terms(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Code of `name`: `1 + index` in binary, most significant digit first.
    pub fn encode(&self, name: &str) -> Result<[u8; CODE_BITS], FeatureError> {
        let idx = self
            .0
            .binary_search_by(|t| t.as_str().cmp(name))
            .map_err(|_| FeatureError::UnknownCondition(name.to_string()))?;
        let code = idx + 1;
        let mut bits = [0u8; CODE_BITS];
        for (k, b) in bits.iter_mut().enumerate() {
            *b = ((code >> (CODE_BITS - 1 - k)) & 1) as u8;
        }
        Ok(bits)
    }

    pub fn decode(&self, bits: [u8; CODE_BITS]) -> Option<&str> {
        let code = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        code.checked_sub(1)
            .and_then(|i| self.0.get(i))
            .map(String::as_str)
    }
}

/// Encodes `name` against `vocabulary` (sorted internally).
pub fn encode_material_condition(
    name: &str,
    vocabulary: &[String],
) -> Result<[u8; CODE_BITS], FeatureError> {
    Vocabulary::new(vocabulary.iter().cloned())?.encode(name)
}

/// `(day_of_month, month, year)`.
pub fn decompose_date(date: NaiveDate) -> (u32, u32, i32) {
    (date.day(), date.month(), date.year())
}
