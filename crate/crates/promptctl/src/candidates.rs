//! Prompt candidate sets: the admissible prompts at each round.
//!
//! The set only ever grows. Insertion order is preserved so snapshots and
//! replays are deterministic; duplicate prompt texts are ignored (first
//! insertion wins).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::text::Text;

/// Where a candidate prompt came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    /// Present in the initial set P_1.
    Initial,
    /// Derived from the response of the given round.
    Derived { round: u32 },
    /// Routed in from another agent's response (multi-agent sessions).
    Routed { sender: String, round: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub prompt: Text,
    pub provenance: Provenance,
}

impl CandidateEntry {
    pub fn initial(prompt: impl Into<Text>) -> Self {
        CandidateEntry {
            prompt: prompt.into(),
            provenance: Provenance::Initial,
        }
    }

    pub fn derived(prompt: impl Into<Text>, round: u32) -> Self {
        CandidateEntry {
            prompt: prompt.into(),
            provenance: Provenance::Derived { round },
        }
    }

    pub fn routed(prompt: impl Into<Text>, sender: impl Into<String>, round: u32) -> Self {
        CandidateEntry {
            prompt: prompt.into(),
            provenance: Provenance::Routed {
                sender: sender.into(),
                round,
            },
        }
    }
}

/// The set P_t. Monotone by construction: there is no removal operation.
#[derive(Debug, Clone, Default)]
pub struct PromptCandidateSet {
    entries: Vec<CandidateEntry>,
    seen: HashSet<Text>,
}

impl PromptCandidateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = CandidateEntry>) -> Self {
        let mut set = Self::new();
        for e in entries {
            set.insert(e);
        }
        set
    }

    /// Insert an entry; returns false (and keeps the existing entry) when the
    /// prompt text is already present.
    pub fn insert(&mut self, entry: CandidateEntry) -> bool {
        if self.seen.contains(&entry.prompt) {
            return false;
        }
        self.seen.insert(entry.prompt.clone());
        self.entries.push(entry);
        true
    }

    pub fn contains(&self, prompt: &Text) -> bool {
        self.seen.contains(prompt)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order.
    pub fn entries(&self) -> &[CandidateEntry] {
        &self.entries
    }

    pub fn prompts(&self) -> impl Iterator<Item = &Text> {
        self.entries.iter().map(|e| &e.prompt)
    }

    /// Set inclusion on prompt texts.
    pub fn is_subset_of(&self, other: &PromptCandidateSet) -> bool {
        self.prompts().all(|p| other.contains(p))
    }
}

impl PartialEq for PromptCandidateSet {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}
