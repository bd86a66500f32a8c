use std::collections::BTreeSet;
use std::path::Path;

use super::EmbedError;

/// A stop-word set. File format: UTF-8, one token per line, lines starting
/// with `#` are comments, blank lines ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopwordList {
    entries: BTreeSet<String>,
}

impl StopwordList {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            entries: entries
                .into_iter()
                .map(Into::into)
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(|l| l.trim_start_matches('\u{feff}'))
                .filter(|l| !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EmbedError::io(format!("reading stop-word list {}", path.display()), e))?;
        Ok(Self::parse(&text))
    }

    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains(token)
    }
}

/// Drops stop words, keeping the order of the survivors.
pub fn filter_stopwords<'a, S: AsRef<str> + ?Sized>(
    tokens: &'a [&'a S],
    list: &StopwordList,
) -> Vec<&'a S> {
    tokens
        .iter()
        .copied()
        .filter(|t| !list.contains(t.as_ref()))
        .collect()
}
