//! Image-centric memory: a sliding window of `(pose, frame tokens)` records
//! laid out in the model context as
//! `[system; (pose_1, image_1); ...; (pose_T, image_T); instruction]`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent_sim::{parse_pose, Pose};
use crate::compressor::{self, Compressor, TokenSequence};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MemoryError {
    #[error("frame index {got} does not follow {last}")]
    NonMonotoneIndex { last: usize, got: usize },
    #[error("memory capacity must be at least one frame")]
    ZeroCapacity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedObject {
    pub category: String,
    pub x: f64,
    pub y: f64,
}

/// One stored frame. Token values are not kept: they are regenerated on
/// demand from `frame_seed` through [`FrameRecord::tokens`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_index: usize,
    pub pose: Pose,
    pub pose_text: String,
    pub frame_seed: u64,
    pub token_count: usize,
    pub observed: Vec<ObservedObject>,
}

impl FrameRecord {
    pub fn tokens(&self, compressor: &Compressor) -> compressor::Result<TokenSequence> {
        let mut t = compressor.compress(self.frame_seed)?;
        t.frame_index = self.frame_index;
        Ok(t)
    }

    /// The pose text decodes back to the pose within the 3-decimal quantum.
    pub fn pose_text_consistent(&self) -> bool {
        let Ok(p) = parse_pose(&self.pose_text) else { return false };
        let (a, b) = (p, self.pose);
        [
            (a.position.x, b.position.x),
            (a.position.y, b.position.y),
            (a.position.z, b.position.z),
            (a.orientation.w, b.orientation.w),
            (a.orientation.x, b.orientation.x),
            (a.orientation.y, b.orientation.y),
            (a.orientation.z, b.orientation.z),
        ]
        .iter()
        .all(|(u, v)| (u - v).abs() <= 5e-4 + 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryMatch {
    #[default]
    Exact,
    CaseInsensitive,
}

impl CategoryMatch {
    fn matches(self, stored: &str, query: &str) -> bool {
        match self {
            CategoryMatch::Exact => stored == query,
            CategoryMatch::CaseInsensitive => stored.to_lowercase() == query.to_lowercase(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recall {
    pub x: f64,
    pub y: f64,
    pub frame_index: usize,
}

/// Fixed-capacity FIFO of frame records with context-token accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    frames: VecDeque<FrameRecord>,
    max_frames: usize,
    pub tokens_per_frame: usize,
    pub system_prompt_tokens: usize,
    pub instruction_tokens: usize,
    pub pose_text_tokens: usize,
    pub category_match: CategoryMatch,
}

impl MemoryBank {
    pub fn new(max_frames: usize, tokens_per_frame: usize) -> Result<Self, MemoryError> {
        if max_frames == 0 {
            return Err(MemoryError::ZeroCapacity);
        }
        Ok(Self {
            frames: VecDeque::new(),
            max_frames,
            tokens_per_frame,
            system_prompt_tokens: 0,
            instruction_tokens: 0,
            pose_text_tokens: 0,
            category_match: CategoryMatch::Exact,
        })
    }

    pub fn with_overheads(mut self, system_prompt: usize, instruction: usize, pose_text: usize) -> Self {
        self.system_prompt_tokens = system_prompt;
        self.instruction_tokens = instruction;
        self.pose_text_tokens = pose_text;
        self
    }

    pub fn max_frames(&self) -> usize {
        self.max_frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> impl DoubleEndedIterator<Item = &FrameRecord> + ExactSizeIterator {
        self.frames.iter()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    /// Append a record, evicting the oldest frame when full. Returns the
    /// evicted record, if any.
    pub fn append_frame(&mut self, record: FrameRecord) -> Result<Option<FrameRecord>, MemoryError> {
        if let Some(last) = self.frames.back() {
            if record.frame_index <= last.frame_index {
                return Err(MemoryError::NonMonotoneIndex { last: last.frame_index, got: record.frame_index });
            }
        }
        let evicted = if self.frames.len() == self.max_frames { self.frames.pop_front() } else { None };
        self.frames.push_back(record);
        Ok(evicted)
    }

    pub fn fixed_overhead(&self) -> usize {
        self.system_prompt_tokens + self.instruction_tokens
    }

    pub fn context_tokens(&self) -> u64 {
        self.fixed_overhead() as u64 + (self.frames.len() * (self.pose_text_tokens + self.tokens_per_frame)) as u64
    }

    /// Quadratic attention cost: `context_tokens^2`.
    pub fn attention_cost_proxy(&self) -> u128 {
        let t = u128::from(self.context_tokens());
        t * t
    }

    pub fn recall_target(&self, category: &str) -> Option<Recall> {
        self.recall_target_with(category, self.category_match)
    }

    /// Newest frame that observed `category`; within a frame the first
    /// listed instance wins.
    pub fn recall_target_with(&self, category: &str, mode: CategoryMatch) -> Option<Recall> {
        self.frames.iter().rev().find_map(|f| {
            f.observed
                .iter()
                .find(|o| mode.matches(&o.category, category))
                .map(|o| Recall { x: o.x, y: o.y, frame_index: f.frame_index })
        })
    }

    /// Sorted, de-duplicated categories across retained frames.
    pub fn remembered_categories(&self) -> Vec<String> {
        let mut v: Vec<String> = self.frames.iter().flat_map(|f| f.observed.iter().map(|o| o.category.clone())).collect();
        v.sort();
        v.dedup();
        v
    }
}

/// Frames that fit in `budget_tokens` after the fixed overheads.
pub fn max_history(budget_tokens: u64, tokens_per_frame: u64, pose_text_tokens: u64, fixed_overheads: u64) -> u64 {
    let per_frame = tokens_per_frame + pose_text_tokens;
    assert!(per_frame > 0, "a frame must cost at least one token");
    budget_tokens.saturating_sub(fixed_overheads) / per_frame
}

pub fn context_tokens_for(frames: u64, tokens_per_frame: u64, pose_text_tokens: u64, fixed_overheads: u64) -> u64 {
    fixed_overheads + frames * (tokens_per_frame + pose_text_tokens)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::agent_sim::serialize_pose;

    pub(crate) fn record(index: usize, categories: &[(&str, f64)]) -> FrameRecord {
        let pose = Pose::new(1.0, 1.0, 0.0);
        FrameRecord {
            frame_index: index,
            pose,
            pose_text: serialize_pose(&pose),
            frame_seed: index as u64,
            token_count: 30,
            observed: categories.iter().map(|&(c, x)| ObservedObject { category: c.into(), x, y: 0.0 }).collect(),
        }
    }

    #[test]
    fn append_and_window() {
        let mut bank = MemoryBank::new(50, 30).unwrap();
        bank.append_frame(record(0, &[])).unwrap();
        assert_eq!(bank.len(), 1);
        for i in 1..60 {
            bank.append_frame(record(i, &[])).unwrap();
        }
        let idx: Vec<_> = bank.frames().map(|f| f.frame_index).collect();
        assert_eq!(idx, (10..60).collect::<Vec<_>>());
    }

    #[test]
    fn holds_three_hundred_frames() {
        let mut bank = MemoryBank::new(300, 30).unwrap();
        for i in 0..400 {
            bank.append_frame(record(i, &[])).unwrap();
        }
        assert_eq!(bank.len(), 300);
        assert_eq!(bank.context_tokens(), 9_000);
    }

    #[test]
    fn rejects_non_monotone_index() {
        let mut bank = MemoryBank::new(5, 30).unwrap();
        bank.append_frame(record(3, &[])).unwrap();
        assert_eq!(bank.append_frame(record(3, &[])), Err(MemoryError::NonMonotoneIndex { last: 3, got: 3 }));
        assert!(MemoryBank::new(0, 30).is_err());
    }

    #[test]
    fn context_accounting() {
        let mut bank = MemoryBank::new(50, 598).unwrap();
        for i in 0..50 {
            bank.append_frame(record(i, &[])).unwrap();
        }
        assert_eq!(bank.context_tokens(), 29_900);
        assert_eq!(bank.attention_cost_proxy(), 29_900u128 * 29_900);
        let empty = MemoryBank::new(5, 30).unwrap().with_overheads(10, 20, 0);
        assert_eq!(empty.context_tokens(), 30);
        let mut posed = MemoryBank::new(5, 30).unwrap().with_overheads(10, 20, 2);
        posed.append_frame(record(0, &[])).unwrap();
        assert_eq!(posed.context_tokens(), 62);
    }

    #[test]
    fn history_capacity() {
        assert_eq!(max_history(9_000, 30, 0, 0), 300);
        assert_eq!(max_history(29_900, 598, 0, 0), 50);
        assert_eq!(max_history(10, 30, 0, 20), 0);
    }

    #[test]
    fn recall_newest_first() {
        let mut bank = MemoryBank::new(100, 30).unwrap();
        assert_eq!(bank.recall_target("book"), None);
        for i in 0..50 {
            let cats: &[(&str, f64)] = match i {
                12 => &[("book", 1.0)],
                40 => &[("piano", 9.0), ("book", 2.0)],
                _ => &[],
            };
            bank.append_frame(record(i, cats)).unwrap();
        }
        let hit = bank.recall_target("book").unwrap();
        assert_eq!((hit.x, hit.frame_index), (2.0, 40));
        assert_eq!(bank.recall_target("Book"), None);
        assert_eq!(bank.recall_target_with("Book", CategoryMatch::CaseInsensitive).unwrap().frame_index, 40);
    }

    #[test]
    fn evicted_observations_are_forgotten() {
        let mut bank = MemoryBank::new(10, 30).unwrap();
        bank.append_frame(record(0, &[("carpet", 1.0)])).unwrap();
        for i in 1..10 {
            bank.append_frame(record(i, &[])).unwrap();
        }
        assert!(bank.recall_target("carpet").is_some());
        let evicted = bank.append_frame(record(10, &[])).unwrap();
        assert_eq!(evicted.map(|f| f.frame_index), Some(0));
        assert_eq!(bank.recall_target("carpet"), None);
    }

    #[test]
    fn pose_text_consistency() {
        assert!(record(0, &[]).pose_text_consistent());
        let mut bad = record(0, &[]);
        bad.pose_text = "P=(9.000,0.000,0.000) Q=(1.000,0.000,0.000,0.000)".into();
        assert!(!bad.pose_text_consistent());
    }
}
