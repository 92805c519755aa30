//! Open-set queues for the raise and lower wavefronts.

use std::collections::VecDeque;

use super::QueueMode;

/// Bucketed priority queue over `[0, max_priority]`.
///
/// Entries pop lowest bucket first and FIFO within a bucket. Priorities above
/// the range land in the last bucket.
#[derive(Debug, Clone)]
pub struct BucketQueue<T> {
    width: f64,
    buckets: Vec<VecDeque<T>>,
    lowest: usize,
    len: usize,
}

impl<T> BucketQueue<T> {
    pub fn new(bucket_width: f64, max_priority: f64) -> Self {
        assert!(bucket_width > 0.0);
        let n = (max_priority / bucket_width).ceil().max(0.0) as usize + 1;
        Self {
            width: bucket_width,
            buckets: (0..n).map(|_| VecDeque::new()).collect(),
            lowest: n,
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_buckets(&self) -> usize {
        self.buckets.len()
    }

    fn bucket_of(&self, priority: f64) -> usize {
        let b = (priority.max(0.0) / self.width) as usize;
        b.min(self.buckets.len() - 1)
    }

    pub fn push(&mut self, item: T, priority: f64) {
        let b = self.bucket_of(priority);
        self.buckets[b].push_back(item);
        self.lowest = self.lowest.min(b);
        self.len += 1;
    }

    pub fn pop(&mut self) -> Option<T> {
        if self.len == 0 {
            return None;
        }
        while self.buckets[self.lowest].is_empty() {
            self.lowest += 1;
        }
        self.len -= 1;
        let item = self.buckets[self.lowest].pop_front();
        if self.len == 0 {
            self.lowest = self.buckets.len();
        }
        item
    }

    pub fn clear(&mut self) {
        for b in &mut self.buckets {
            b.clear();
        }
        self.len = 0;
        self.lowest = self.buckets.len();
    }
}

/// FIFO or bucketed-priority open set, chosen by [`QueueMode`].
///
/// Duplicate suppression for the single-insert modes is done by the caller
/// through the voxel's in-queue flag; this type only orders entries.
#[derive(Debug, Clone)]
pub enum WavefrontQueue<T> {
    Fifo(VecDeque<T>),
    Priority(BucketQueue<T>),
}

impl<T> WavefrontQueue<T> {
    pub fn new(mode: QueueMode, bucket_width: f64, max_priority: f64) -> Self {
        match mode {
            QueueMode::Fifo => WavefrontQueue::Fifo(VecDeque::new()),
            QueueMode::PrioritySingleInsert | QueueMode::PriorityMultiInsert => {
                WavefrontQueue::Priority(BucketQueue::new(bucket_width, max_priority))
            }
        }
    }

    pub fn push(&mut self, item: T, priority: f64) {
        match self {
            WavefrontQueue::Fifo(q) => q.push_back(item),
            WavefrontQueue::Priority(q) => q.push(item, priority),
        }
    }

    pub fn pop(&mut self) -> Option<T> {
        match self {
            WavefrontQueue::Fifo(q) => q.pop_front(),
            WavefrontQueue::Priority(q) => q.pop(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            WavefrontQueue::Fifo(q) => q.len(),
            WavefrontQueue::Priority(q) => q.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
