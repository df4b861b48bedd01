//! Address words and nested partition trees.
//!
//! A tree over a root interval (or an arc of the circle, in lift
//! coordinates) is stored level by level. Level `n` lists the intervals
//! `I_w` of all words `w` of length `n` in lexicographic order, so the
//! children of the `i`-th level-`n` interval are entries
//! `i·Lₙ₊₁ .. (i+1)·Lₙ₊₁` of level `n+1`. Trees built through
//! [`PartitionTree::push_level`] copy parent endpoints into their children,
//! which makes tiling and nesting exact; [`PartitionTree::validate`]
//! re-checks everything for trees read from elsewhere.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Arc, IntervalUnion, Part, Segment};

/// Fan-out per level: `L₀ = 1`, `Lₙ` children for every level-`(n-1)`
/// interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FanoutSchedule(Vec<usize>);

impl FanoutSchedule {
    pub fn new(fanouts: Vec<usize>) -> Result<Self> {
        if fanouts.first() != Some(&1) {
            return Err(Error::Invalid(
                "fan-out schedule must start with L0 = 1".into(),
            ));
        }
        if fanouts.contains(&0) {
            return Err(Error::Invalid("fan-outs must be positive".into()));
        }
        Ok(FanoutSchedule(fanouts))
    }

    pub fn root() -> Self {
        FanoutSchedule(vec![1])
    }

    pub fn dyadic(depth: usize) -> Self {
        let mut v = vec![2; depth + 1];
        v[0] = 1;
        FanoutSchedule(v)
    }

    /// `Lₙ`, or `None` past the materialized levels.
    pub fn fanout(&self, n: usize) -> Option<usize> {
        self.0.get(n).copied()
    }

    pub fn depth(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Whether every `Lₙ`, `n ≥ 1`, is even.
    pub fn is_even(&self) -> bool {
        self.0[1..].iter().all(|l| l % 2 == 0)
    }

    /// Number of words of length `n`.
    pub fn words_at(&self, n: usize) -> usize {
        self.0[..=n].iter().product()
    }

    /// `A(a)`: the word with letter `a` appended.
    pub fn extend(&self, word: &Word, a: usize) -> Result<Word> {
        let level = word.len() + 1;
        let fanout = self.fanout(level).ok_or(Error::Depth {
            requested: level,
            available: self.depth(),
        })?;
        if a >= fanout {
            return Err(Error::Range {
                letter: a,
                level,
                fanout,
            });
        }
        let mut letters = word.0.clone();
        letters.push(a);
        Ok(Word(letters))
    }

    fn push(&mut self, fanout: usize) {
        self.0.push(fanout);
    }
}

impl TryFrom<Vec<usize>> for FanoutSchedule {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        FanoutSchedule::new(v)
    }
}

impl From<FanoutSchedule> for Vec<usize> {
    fn from(s: FanoutSchedule) -> Self {
        s.0
    }
}

/// Address `{a₁, …, aₙ}` of a partition interval.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(letters: Vec<usize>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

/// Which of the four partition conditions a violation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// Nesting: `I_v ⊆ I_w` iff `w` is a prefix of `v`.
    Nesting,
    /// Same-length words have interior-disjoint intervals.
    Disjoint,
    /// Uniform fan-out per level.
    UniformFanout,
    /// Children tile their parent, left to right in letter order.
    Tiling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub level: usize,
    pub words: Vec<Word>,
    pub detail: String,
}

/// Nested partition of a root interval or arc, materialized to some depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeRepr", into = "TreeRepr")]
pub struct PartitionTree {
    schedule: FanoutSchedule,
    circle: bool,
    levels: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    schedule: FanoutSchedule,
    #[serde(default)]
    circle: bool,
    levels: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<TreeRepr> for PartitionTree {
    type Error = Error;
    fn try_from(r: TreeRepr) -> Result<Self> {
        if r.levels.len() != r.schedule.depth() + 1 {
            return Err(Error::Invalid(format!(
                "tree has {} levels but schedule depth {}",
                r.levels.len(),
                r.schedule.depth()
            )));
        }
        for (n, level) in r.levels.iter().enumerate() {
            if level.len() != r.schedule.words_at(n) {
                return Err(Error::Invalid(format!(
                    "level {n} has {} intervals, schedule needs {}",
                    level.len(),
                    r.schedule.words_at(n)
                )));
            }
        }
        Ok(PartitionTree {
            schedule: r.schedule,
            circle: r.circle,
            levels: r.levels,
        })
    }
}

impl From<PartitionTree> for TreeRepr {
    fn from(t: PartitionTree) -> Self {
        TreeRepr {
            schedule: t.schedule,
            circle: t.circle,
            levels: t.levels,
        }
    }
}

impl PartitionTree {
    /// Depth-0 tree over the segment `[a, b]`.
    pub fn new_interval(a: f64, b: f64) -> Result<Self> {
        Segment::new(a, b)?;
        Ok(PartitionTree {
            schedule: FanoutSchedule::root(),
            circle: false,
            levels: vec![vec![[a, b]]],
        })
    }

    /// Depth-0 tree over the arc `[start, start + len]` (turns, as a lift).
    pub fn new_arc(start: f64, len: f64) -> Result<Self> {
        Arc::new(start, len)?;
        Ok(PartitionTree {
            schedule: FanoutSchedule::root(),
            circle: true,
            levels: vec![vec![[start, start + len]]],
        })
    }

    /// Depth-0 tree over the whole circle cut at `0`.
    pub fn new_circle() -> Self {
        PartitionTree {
            schedule: FanoutSchedule::root(),
            circle: true,
            levels: vec![vec![[0.0, 1.0]]],
        }
    }

    /// Dyadic partition of `[a, b]`: every interval split into equal halves.
    pub fn dyadic(a: f64, b: f64, depth: usize) -> Result<Self> {
        let mut t = PartitionTree::new_interval(a, b)?;
        t.extend_dyadic(depth)?;
        Ok(t)
    }

    /// Appends `levels` levels of equal halving.
    pub fn extend_dyadic(&mut self, levels: usize) -> Result<()> {
        for _ in 0..levels {
            let cuts = self
                .level(self.depth())
                .iter()
                .map(|&[lo, hi]| vec![lo + 0.5 * (hi - lo)])
                .collect();
            self.push_level(2, cuts)?;
        }
        Ok(())
    }

    /// A depth-0 tree over the same root.
    pub fn root_only(&self) -> PartitionTree {
        PartitionTree {
            schedule: FanoutSchedule::root(),
            circle: self.circle,
            levels: vec![vec![self.root()]],
        }
    }

    pub fn schedule(&self) -> &FanoutSchedule {
        &self.schedule
    }

    pub fn is_circle(&self) -> bool {
        self.circle
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn root(&self) -> [f64; 2] {
        self.levels[0][0]
    }

    /// Intervals of level `n` in word order.
    pub fn level(&self, n: usize) -> &[[f64; 2]] {
        &self.levels[n]
    }

    /// Sorted boundary points of level `n`.
    pub fn boundaries(&self, n: usize) -> Vec<f64> {
        let level = &self.levels[n];
        let mut out = Vec::with_capacity(level.len() + 1);
        out.push(level[0][0]);
        out.extend(level.iter().map(|iv| iv[1]));
        out
    }

    /// Appends level `depth + 1`. `cuts[i]` holds the `fanout - 1` interior
    /// cut points of the `i`-th current interval, increasing.
    pub fn push_level(&mut self, fanout: usize, cuts: Vec<Vec<f64>>) -> Result<()> {
        let parents = &self.levels[self.depth()];
        if fanout == 0 || cuts.len() != parents.len() {
            return Err(Error::Invalid("one cut list per parent required".into()));
        }
        let mut next = Vec::with_capacity(parents.len() * fanout);
        for (&[lo, hi], c) in parents.iter().zip(&cuts) {
            if c.len() + 1 != fanout {
                return Err(Error::Invalid(format!(
                    "parent needs {} cuts, got {}",
                    fanout - 1,
                    c.len()
                )));
            }
            let mut left = lo;
            for &x in c.iter().chain(std::iter::once(&hi)) {
                if !(x > left) {
                    return Err(Error::Invalid(format!(
                        "cut {x} does not increase past {left}"
                    )));
                }
                next.push([left, x]);
                left = x;
            }
        }
        self.levels.push(next);
        self.schedule.push(fanout);
        Ok(())
    }

    /// Flat index of a word within its level.
    pub fn index_of(&self, word: &Word) -> Result<usize> {
        if word.len() > self.depth() {
            return Err(Error::Depth {
                requested: word.len(),
                available: self.depth(),
            });
        }
        let mut idx = 0;
        for (j, &a) in word.letters().iter().enumerate() {
            let fanout = self.schedule.as_slice()[j + 1];
            if a >= fanout {
                return Err(Error::Range {
                    letter: a,
                    level: j + 1,
                    fanout,
                });
            }
            idx = idx * fanout + a;
        }
        Ok(idx)
    }

    /// Word of the `index`-th interval at level `n`.
    pub fn word_at(&self, n: usize, mut index: usize) -> Word {
        let mut letters = vec![0; n];
        for j in (1..=n).rev() {
            let l = self.schedule.as_slice()[j];
            letters[j - 1] = index % l;
            index /= l;
        }
        Word(letters)
    }

    fn to_part(&self, [lo, hi]: [f64; 2]) -> Result<Part> {
        if self.circle {
            Ok(Arc::from_lift(lo, hi)?.into())
        } else {
            Ok(Segment::new(lo, hi)?.into())
        }
    }

    /// Interval `I_w` in lift coordinates.
    pub fn interval(&self, word: &Word) -> Result<[f64; 2]> {
        let idx = self.index_of(word)?;
        Ok(self.levels[word.len()][idx])
    }

    /// `I_w` as a segment or arc.
    pub fn locate(&self, word: &Word) -> Result<Part> {
        self.to_part(self.interval(word)?)
    }

    pub fn max_length(&self, n: usize) -> f64 {
        self.levels[n]
            .iter()
            .map(|[a, b]| b - a)
            .fold(0.0, f64::max)
    }

    fn children_by_parity(&self, n: usize, odd: bool) -> Result<IntervalUnion> {
        if n + 1 > self.depth() {
            return Err(Error::Depth {
                requested: n + 1,
                available: self.depth(),
            });
        }
        let fanout = self.schedule.as_slice()[n + 1];
        if !fanout.is_multiple_of(2) {
            return Err(Error::Invalid(format!("L{} = {fanout} is odd", n + 1)));
        }
        let parts = self.levels[n + 1]
            .iter()
            .enumerate()
            .filter(|(k, _)| (k % fanout % 2 == 1) == odd)
            .map(|(_, &iv)| self.to_part(iv))
            .collect::<Result<Vec<_>>>()?;
        IntervalUnion::normalize(parts)
    }

    /// Union of the odd-indexed (0-based) children of all level-`n`
    /// intervals: the right child of each piece. Needs an even `L_{n+1}`.
    pub fn stage_e(&self, n: usize) -> Result<IntervalUnion> {
        self.children_by_parity(n, true)
    }

    /// Union of the even-indexed (0-based) children of all level-`n`
    /// intervals: the left child of each piece. Needs an even `L_{n+1}`.
    pub fn stage_f(&self, n: usize) -> Result<IntervalUnion> {
        self.children_by_parity(n, false)
    }

    /// Checks partition conditions (i)–(iv) on every materialized level.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let [root_lo, root_hi] = self.root();
        if !(root_lo < root_hi) {
            out.push(Violation {
                condition: Condition::Tiling,
                level: 0,
                words: vec![Word::empty()],
                detail: "empty root".into(),
            });
        }
        for n in 1..=self.depth() {
            let fanout = self.schedule.as_slice()[n];
            let parents = &self.levels[n - 1];
            let level = &self.levels[n];
            if level.len() != parents.len() * fanout {
                out.push(Violation {
                    condition: Condition::UniformFanout,
                    level: n,
                    words: vec![],
                    detail: format!(
                        "{} intervals for {} parents × {fanout}",
                        level.len(),
                        parents.len()
                    ),
                });
                continue;
            }
            for (p, &[plo, phi]) in parents.iter().enumerate() {
                let kids = &level[p * fanout..(p + 1) * fanout];
                let parent_word = || self.word_at(n - 1, p);
                for (a, &[lo, hi]) in kids.iter().enumerate() {
                    if !(lo < hi) {
                        out.push(Violation {
                            condition: Condition::Disjoint,
                            level: n,
                            words: vec![self.word_at(n, p * fanout + a)],
                            detail: format!("degenerate interval [{lo}, {hi}]"),
                        });
                    }
                    if lo < plo || hi > phi {
                        out.push(Violation {
                            condition: Condition::Nesting,
                            level: n,
                            words: vec![self.word_at(n, p * fanout + a), parent_word()],
                            detail: format!("[{lo}, {hi}] not inside parent [{plo}, {phi}]"),
                        });
                    }
                }
                if kids[0][0] != plo || kids[fanout - 1][1] != phi {
                    out.push(Violation {
                        condition: Condition::Tiling,
                        level: n,
                        words: vec![parent_word()],
                        detail: format!(
                            "children span [{}, {}], parent is [{plo}, {phi}]",
                            kids[0][0],
                            kids[fanout - 1][1]
                        ),
                    });
                }
                for a in 0..fanout.saturating_sub(1) {
                    let (left, right) = (kids[a], kids[a + 1]);
                    if left[1] != right[0] {
                        let condition = if left[1] > right[0] && left[0] < right[1] {
                            Condition::Disjoint
                        } else {
                            Condition::Tiling
                        };
                        out.push(Violation {
                            condition,
                            level: n,
                            words: vec![
                                self.word_at(n, p * fanout + a),
                                self.word_at(n, p * fanout + a + 1),
                            ],
                            detail: if left[0] >= right[1] {
                                "siblings out of left-to-right order".into()
                            } else {
                                format!("siblings meet at {} and {}", left[1], right[0])
                            },
                        });
                    }
                }
            }
            // interiors across parents: the level must be increasing in word order
            for k in 1..level.len() {
                if level[k - 1][1] > level[k][0] && k % fanout == 0 {
                    out.push(Violation {
                        condition: Condition::Disjoint,
                        level: n,
                        words: vec![self.word_at(n, k - 1), self.word_at(n, k)],
                        detail: "intervals of different parents overlap".into(),
                    });
                }
            }
        }
        out
    }
}
