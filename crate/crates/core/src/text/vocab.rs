use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Document;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const DEFAULT_CAPACITY: usize = 100_000;

/// Lower-cased token ↔ id map with reserved PAD and UNK entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds from sentence tokens, most frequent first (ties by token order),
    /// keeping at most `capacity` entries including the two reserved ids.
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a Document>, capacity: usize) -> Result<Self> {
        if capacity < 3 {
            return Err(Error::InvalidArgument(format!(
                "vocabulary capacity must leave room for one token beyond PAD/UNK, got {capacity}"
            )));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for doc in docs {
            for token in doc.sentences.iter().flatten() {
                *counts.entry(token.to_lowercase()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = ranked
            .into_iter()
            .map(|(t, _)| t)
            .filter(|t| t != PAD_TOKEN && t != UNK_TOKEN)
            .take(capacity - 2);
        Vocabulary::from_tokens(
            [PAD_TOKEN.to_string(), UNK_TOKEN.to_string()]
                .into_iter()
                .chain(tokens)
                .collect(),
        )
    }

    /// Vocabulary from an explicit id-ordered token list whose first two
    /// entries are the reserved tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(Error::Data("vocabulary must start with <pad>, <unk>".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), id).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id for `token` after case folding; UNK when absent.
    pub fn id(&self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        self.index.get(&token.to_lowercase()).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}
