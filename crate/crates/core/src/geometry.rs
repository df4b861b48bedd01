//! Points, segments and arcs, and finite unions of them.
//!
//! The circle is parameterized in turns: a point is a real in `[0, 1)` and
//! its planar embedding is `exp(2πi·θ)`. Segments live on the real axis.
//! Every part is a closed set; two parts of a union may share endpoints
//! but never interior points.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact;

/// A point of the unit circle, in turns.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CirclePoint(f64);

impl CirclePoint {
    pub fn new(theta: f64) -> Self {
        let t = theta.rem_euclid(1.0);
        // rem_euclid can round up to exactly 1.0 for tiny negative inputs
        CirclePoint(if t >= 1.0 { 0.0 } else { t })
    }

    pub fn turns(self) -> f64 {
        self.0
    }

    pub fn to_plane(self) -> (f64, f64) {
        let (s, c) = (2.0 * PI * self.0).sin_cos();
        (c, s)
    }
}

/// Circular distance in turns, in `[0, 1/2]`.
pub fn circular_distance(p: CirclePoint, q: CirclePoint) -> f64 {
    let d = (p.0 - q.0).abs();
    d.min(1.0 - d)
}

/// Euclidean distance between the planar embeddings of two circle points.
pub fn chord_distance(p: CirclePoint, q: CirclePoint) -> f64 {
    chord_of_turns(circular_distance(p, q))
}

/// Chord spanned by an arc of `t` turns on the unit circle.
pub fn chord_of_turns(t: f64) -> f64 {
    2.0 * (PI * t).sin().abs()
}

/// Closed segment `[a, b]` of the real line, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    a: f64,
    b: f64,
}

impl Segment {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::Invalid(format!("segment [{a}, {b}] needs a < b")));
        }
        Ok(Segment { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn contains(&self, other: &Segment) -> bool {
        self.a <= other.a && other.b <= self.b
    }
}

impl Serialize for Segment {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.a, self.b].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Segment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [a, b] = <[f64; 2]>::deserialize(d)?;
        Segment::new(a, b).map_err(D::Error::custom)
    }
}

/// Closed arc of the unit circle starting at `start` and running
/// counterclockwise for `len` turns, `0 < len ≤ 1`.
///
/// The end is kept as an unreduced lift `start < end ≤ start + 1` so that
/// arcs cut from a common boundary list share endpoints bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    start: f64,
    end: f64,
}

impl Arc {
    pub fn new(start: f64, len: f64) -> Result<Self> {
        if !(start.is_finite() && len.is_finite()) || len <= 0.0 || len > 1.0 {
            return Err(Error::Invalid(format!("arc length {len} not in (0, 1]")));
        }
        let s = CirclePoint::new(start).turns();
        Ok(Arc {
            start: s,
            end: s + len,
        })
    }

    /// Arc between two lift coordinates `a < b ≤ a + 1`.
    pub fn from_lift(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b || b - a > 1.0 {
            return Err(Error::Invalid(format!("arc lift [{a}, {b}] invalid")));
        }
        let k = a.floor();
        if k == 0.0 {
            Ok(Arc { start: a, end: b })
        } else {
            Ok(Arc {
                start: a - k,
                end: b - k,
            })
        }
    }

    pub fn full_circle() -> Self {
        Arc {
            start: 0.0,
            end: 1.0,
        }
    }

    pub fn start(&self) -> CirclePoint {
        CirclePoint(self.start)
    }

    /// End as a lift of the start, possibly ≥ 1.
    pub fn end_lift(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn midpoint(&self) -> CirclePoint {
        CirclePoint::new(0.5 * (self.start + self.end))
    }

    pub fn is_full(&self) -> bool {
        self.length() >= 1.0
    }

    pub fn chord(&self) -> f64 {
        chord_of_turns(self.length())
    }
}

#[derive(Serialize, Deserialize)]
struct ArcRepr {
    start: f64,
    len: f64,
}

impl Serialize for Arc {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ArcRepr {
            start: self.start,
            len: self.length(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Arc {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ArcRepr::deserialize(d)?;
        Arc::new(r.start, r.len).map_err(D::Error::custom)
    }
}

/// One part of an [`IntervalUnion`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Part {
    Segment(Segment),
    Arc(Arc),
}

impl Part {
    pub fn length(&self) -> f64 {
        match self {
            Part::Segment(s) => s.length(),
            Part::Arc(a) => a.length(),
        }
    }

    fn left(&self) -> f64 {
        match self {
            Part::Segment(s) => s.a,
            Part::Arc(a) => a.start,
        }
    }

    fn right(&self) -> f64 {
        match self {
            Part::Segment(s) => s.b,
            Part::Arc(a) => a.end,
        }
    }

    fn is_arc(&self) -> bool {
        matches!(self, Part::Arc(_))
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Part::Segment(s) => write!(f, "[{}, {}]", s.a, s.b),
            Part::Arc(a) => write!(f, "arc({} +{})", a.start, a.length()),
        }
    }
}

impl From<Segment> for Part {
    fn from(s: Segment) -> Self {
        Part::Segment(s)
    }
}

impl From<Arc> for Part {
    fn from(a: Arc) -> Self {
        Part::Arc(a)
    }
}

/// Finite union of closed segments, or of closed arcs, with pairwise
/// disjoint interiors, sorted by left endpoint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalUnion {
    parts: Vec<Part>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        IntervalUnion::default()
    }

    /// Sorts, rejects interior overlaps and merges parts whose endpoints
    /// coincide exactly.
    pub fn normalize(parts: impl IntoIterator<Item = Part>) -> Result<Self> {
        let mut parts: Vec<Part> = parts.into_iter().collect();
        if parts.is_empty() {
            return Ok(IntervalUnion::empty());
        }
        let arcs = parts[0].is_arc();
        if parts.iter().any(|p| p.is_arc() != arcs) {
            return Err(Error::MixedKinds);
        }
        parts.sort_by(|x, y| {
            x.left()
                .partial_cmp(&y.left())
                .unwrap_or(Ordering::Equal)
                .then(x.right().partial_cmp(&y.right()).unwrap_or(Ordering::Equal))
        });

        let mut out: Vec<Part> = Vec::with_capacity(parts.len());
        for p in parts {
            match out.last_mut() {
                Some(last) if last.right() > p.left() => {
                    return Err(Error::Overlap(last.to_string(), p.to_string()));
                }
                Some(last) if last.right() == p.left() => {
                    *last = match (*last, p) {
                        (Part::Segment(s), Part::Segment(t)) => {
                            Part::Segment(Segment { a: s.a, b: t.b })
                        }
                        (Part::Arc(s), Part::Arc(t)) => Part::Arc(Arc {
                            start: s.start,
                            end: t.end,
                        }),
                        _ => unreachable!(),
                    };
                }
                _ => out.push(p),
            }
        }

        if arcs {
            // wrap-around between the last arc and the first one
            let first = out[0];
            let last = *out.last().unwrap();
            let n = out.len();
            let wrap_end = first.left() + 1.0;
            if n == 1 {
                if last.right() > wrap_end {
                    return Err(Error::Overlap(last.to_string(), first.to_string()));
                }
            } else if last.right() > wrap_end {
                return Err(Error::Overlap(last.to_string(), first.to_string()));
            } else if last.right() == wrap_end {
                let (Part::Arc(l), Part::Arc(f)) = (last, first) else {
                    unreachable!()
                };
                let merged = Arc {
                    start: l.start,
                    end: l.end + f.length(),
                };
                out.pop();
                out[0] = Part::Arc(if merged.length() >= 1.0 {
                    Arc::full_circle()
                } else {
                    merged
                });
                out.sort_by(|x, y| x.left().partial_cmp(&y.left()).unwrap_or(Ordering::Equal));
            }
        }
        Ok(IntervalUnion { parts: out })
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn is_arcs(&self) -> bool {
        self.parts.first().is_some_and(Part::is_arc)
    }

    pub fn total_length(&self) -> f64 {
        self.parts.iter().map(Part::length).sum()
    }

    /// An upper bound on the planar diameter, rounded up.
    pub fn diameter_bound(&self) -> f64 {
        if self.parts.is_empty() {
            return 0.0;
        }
        if !self.is_arcs() {
            let lo = self.parts.first().unwrap().left();
            let hi = self.parts.iter().map(Part::right).fold(f64::MIN, f64::max);
            return exact::sub_up(hi, lo);
        }
        // the union sits inside the complement of its largest gap
        let n = self.parts.len();
        let mut gap: f64 = 0.0;
        for i in 0..n {
            let next = if i + 1 < n {
                self.parts[i + 1].left()
            } else {
                self.parts[0].left() + 1.0
            };
            gap = gap.max(next - self.parts[i].right());
        }
        let span = (1.0 - gap).min(0.5);
        exact::bump_up(chord_of_turns(span), 2)
    }
}

impl Serialize for IntervalUnion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.parts.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntervalUnion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let parts = Vec::<Part>::deserialize(d)?;
        IntervalUnion::normalize(parts).map_err(D::Error::custom)
    }
}
