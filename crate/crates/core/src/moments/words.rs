use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest supported inhomogeneous length.
pub const MAX_WORD_LENGTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Letter {
    I,
    J,
}

impl Letter {
    /// Contribution to the inhomogeneous length.
    pub fn weight(self) -> usize {
        match self {
            Letter::I => 1,
            Letter::J => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn new(letters: Vec<Letter>) -> Self {
        Word { letters }
    }

    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'I' => Ok(Letter::I),
                'J' => Ok(Letter::J),
                other => Err(Error::domain(format!("unknown letter {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Word::new)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// `ℓ(w) = #I + 2·#J`.
    pub fn length(&self) -> usize {
        self.letters.iter().map(|l| l.weight()).sum()
    }

    /// Number of letters `|w|`.
    pub fn size(&self) -> usize {
        self.letters.len()
    }

    /// Words whose last letter is `I` contribute nothing.
    pub fn is_vanishing(&self) -> bool {
        self.letters.last() != Some(&Letter::J)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            f.write_str(match l {
                Letter::I => "I",
                Letter::J => "J",
            })?;
        }
        Ok(())
    }
}

/// Non-vanishing words with `ℓ(w) = N`, in shortlex order (`I < J`).
pub fn enumerate_words(n: usize) -> Result<Vec<Word>> {
    if n > MAX_WORD_LENGTH {
        return Err(Error::SizeLimit(format!(
            "words of length {n} exceed the limit {MAX_WORD_LENGTH}"
        )));
    }
    if n < 2 {
        return Ok(Vec::new());
    }
    // Prefixes of length n - 2 followed by the mandatory final J.
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    extend(n - 2, &mut prefix, &mut out);
    out.sort_by(|a: &Word, b: &Word| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
    Ok(out)
}

fn extend(remaining: usize, prefix: &mut Vec<Letter>, out: &mut Vec<Word>) {
    if remaining == 0 {
        let mut letters = prefix.clone();
        letters.push(Letter::J);
        out.push(Word::new(letters));
        return;
    }
    for l in [Letter::I, Letter::J] {
        if l.weight() <= remaining {
            prefix.push(l);
            extend(remaining - l.weight(), prefix, out);
            prefix.pop();
        }
    }
}
