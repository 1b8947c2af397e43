use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityResult {
    pub value: BitString,
    pub count: usize,
    /// The winner holds at most half of the votes.
    pub low_confidence: bool,
}

/// Whole-string plurality vote; ties go to the lexicographically smallest
/// string.
pub fn majority_string(strings: &[BitString]) -> Result<MajorityResult> {
    let first = strings.first().ok_or(Error::EmptyInput)?;
    if strings.iter().any(|s| s.len() != first.len()) {
        return Err(Error::RaggedLengths);
    }
    let mut tally: BTreeMap<&BitString, usize> = BTreeMap::new();
    for s in strings {
        *tally.entry(s).or_default() += 1;
    }
    // BTreeMap iterates in ascending order, so the first maximum wins ties.
    let (value, count) = tally
        .into_iter()
        .fold((first, 0usize), |best, (s, c)| if c > best.1 { (s, c) } else { best });
    Ok(MajorityResult { value: value.clone(), count, low_confidence: 2 * count <= strings.len() })
}
