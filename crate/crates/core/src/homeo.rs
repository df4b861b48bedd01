//! Orientation-preserving homeomorphisms of an interval or of the circle.
//!
//! Circle maps are handled through monotone lifts `F: ℝ → ℝ` with
//! `F(t + 1) = F(t) + 1`, in turns. Piecewise-linear maps keep their
//! breakpoints exactly, so evaluation at a breakpoint returns the stored
//! value bit for bit, and inversion and composition of two such maps are
//! again exact piecewise-linear maps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Dd;
use crate::geometry::{Arc, Part, Segment};

/// Absolute tolerance of [`bisect_inverse`].
pub const BISECTION_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Interval,
    Circle,
}

/// Monotone piecewise-linear homeomorphism.
///
/// Interval kind maps `[x₀, x_N]` onto `[y₀, y_N]`. Circle kind stores one
/// period of a lift: `x_N = x₀ + 1`, `y_N = y₀ + 1`, extended periodically.
#[derive(Debug, Clone, PartialEq)]
pub struct PLHomeo {
    kind: Kind,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PLHomeo {
    pub fn new(kind: Kind, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::Invalid(
                "a PL map needs at least two breakpoints".into(),
            ));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("breakpoints must be finite".into()));
        }
        if let Some(i) = (1..xs.len()).find(|&i| xs[i] <= xs[i - 1]) {
            return Err(Error::Invalid(format!(
                "breakpoint x values not increasing at index {i}"
            )));
        }
        if let Some(i) = (1..ys.len()).find(|&i| ys[i] <= ys[i - 1]) {
            return Err(Error::Orientation(format!(
                "y drops from {} to {} at x = {}",
                ys[i - 1],
                ys[i],
                xs[i]
            )));
        }
        if kind == Kind::Circle {
            let n = xs.len() - 1;
            if xs[n] - xs[0] != 1.0 || ys[n] - ys[0] != 1.0 {
                return Err(Error::Invalid(
                    "a circle PL map must span exactly one turn in x and y".into(),
                ));
            }
        }
        Ok(PLHomeo { kind, xs, ys })
    }

    pub fn from_points(kind: Kind, points: &[[f64; 2]]) -> Result<Self> {
        PLHomeo::new(
            kind,
            points.iter().map(|p| p[0]).collect(),
            points.iter().map(|p| p[1]).collect(),
        )
    }

    pub fn identity(kind: Kind) -> Self {
        PLHomeo {
            kind,
            xs: vec![0.0, 1.0],
            ys: vec![0.0, 1.0],
        }
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.xs
            .iter()
            .zip(&self.ys)
            .map(|(&x, &y)| [x, y])
            .collect()
    }

    pub fn domain(&self) -> [f64; 2] {
        [self.xs[0], *self.xs.last().unwrap()]
    }

    pub fn range(&self) -> [f64; 2] {
        [self.ys[0], *self.ys.last().unwrap()]
    }

    /// Interpolation within the stored period; `x` must lie in the domain.
    fn lookup(xs: &[f64], ys: &[f64], x: f64) -> f64 {
        let i = xs.partition_point(|&b| b <= x);
        if i == 0 {
            return ys[0];
        }
        if xs[i - 1] == x || i == xs.len() {
            return ys[i - 1];
        }
        let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
        let y = y0 + (y1 - y0) * ((x - x0) / (x1 - x0));
        y.clamp(y0, y1)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(x));
        }
        let [a, b] = self.domain();
        if (a..=b).contains(&x) {
            return Ok(Self::lookup(&self.xs, &self.ys, x));
        }
        match self.kind {
            Kind::Interval => Err(Error::Domain(x)),
            Kind::Circle => {
                let k = (x - a).floor();
                Ok(Self::lookup(&self.xs, &self.ys, x - k) + k)
            }
        }
    }

    /// [`PLHomeo::eval`] on a double-double argument, keeping the result
    /// to double-double precision.
    pub fn eval_dd(&self, x: Dd) -> Result<Dd> {
        if !x.hi.is_finite() {
            return Err(Error::Domain(x.hi));
        }
        let [a, b] = self.domain();
        if (a..=b).contains(&x.hi) {
            return Ok(Self::lookup_dd(&self.xs, &self.ys, x));
        }
        match self.kind {
            Kind::Interval => Err(Error::Domain(x.hi)),
            Kind::Circle => {
                let k = Dd::from((x.hi - a).floor());
                Ok(Self::lookup_dd(&self.xs, &self.ys, x - k) + k)
            }
        }
    }

    fn lookup_dd(xs: &[f64], ys: &[f64], x: Dd) -> Dd {
        let mut i = xs.partition_point(|&b| b <= x.hi);
        // a breakpoint in the high word with a negative low word lies left of it
        if i > 0 && xs[i - 1] == x.hi && x.lo < 0.0 {
            i -= 1;
        }
        let i = i.clamp(1, xs.len() - 1);
        if x.lo == 0.0 {
            if xs[i - 1] == x.hi {
                return ys[i - 1].into();
            }
            if xs[i] == x.hi {
                return ys[i].into();
            }
        }
        let (x0, x1, y0, y1) = (
            Dd::from(xs[i - 1]),
            Dd::from(xs[i]),
            Dd::from(ys[i - 1]),
            Dd::from(ys[i]),
        );
        let y = y0 + (y1 - y0) * ((x - x0) / (x1 - x0));
        y.max(y0).min(y1)
    }

    pub fn invert(&self) -> PLHomeo {
        PLHomeo {
            kind: self.kind,
            xs: self.ys.clone(),
            ys: self.xs.clone(),
        }
    }

    /// Exact composite `self ∘ inner`.
    ///
    /// Breakpoints are those of `inner` together with the `inner`-preimages
    /// of this map's breakpoints. At `inner`'s breakpoints the value is
    /// `self(inner.y)`; at the preimages it is this map's stored `y`.
    pub fn compose(&self, inner: &PLHomeo) -> Result<PLHomeo> {
        if self.kind != inner.kind {
            return Err(Error::Invalid(
                "cannot compose interval and circle maps".into(),
            ));
        }
        let [lo, hi] = inner.range();
        // (x, y, from_inner)
        let mut pts: Vec<(f64, f64, bool)> = Vec::with_capacity(self.len() + inner.len());
        for (&x, &u) in inner.xs.iter().zip(&inner.ys) {
            pts.push((x, self.eval(u)?, true));
        }
        match self.kind {
            Kind::Interval => {
                let [a, b] = self.domain();
                if lo < a || hi > b {
                    return Err(Error::Domain(if lo < a { lo } else { hi }));
                }
                for (&u, &v) in self.xs.iter().zip(&self.ys) {
                    if lo < u && u < hi {
                        pts.push((inner.invert_lookup(u), v, false));
                    }
                }
            }
            Kind::Circle => {
                let k0 = (lo - self.xs[0]).floor() as i64;
                for k in k0..=k0 + 1 {
                    let shift = k as f64;
                    for (&u, &v) in self.xs.iter().zip(&self.ys) {
                        let (u, v) = (u + shift, v + shift);
                        if lo < u && u < hi {
                            pts.push((inner.invert_lookup(u), v, false));
                        }
                    }
                }
            }
        }
        pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(q.2.cmp(&p.2)));
        pts.dedup_by(|later, earlier| later.0 == earlier.0);
        // a rounded preimage can land out of order next to a true breakpoint;
        // the breakpoints of `inner` win such conflicts
        let mut kept: Vec<(f64, f64, bool)> = Vec::with_capacity(pts.len());
        for p in pts {
            while kept.last().is_some_and(|top| top.1 >= p.1 && !top.2 && p.2) {
                kept.pop();
            }
            if kept.last().is_some_and(|top| top.1 >= p.1) {
                continue;
            }
            kept.push(p);
        }
        let xs: Vec<f64> = kept.iter().map(|p| p.0).collect();
        let mut ys: Vec<f64> = kept.iter().map(|p| p.1).collect();
        if self.kind == Kind::Circle {
            *ys.last_mut().unwrap() = ys[0] + 1.0;
        }
        PLHomeo::new(self.kind, xs, ys)
    }

    fn invert_lookup(&self, y: f64) -> f64 {
        Self::lookup(&self.ys, &self.xs, y)
    }
}

/// A homeomorphism: exact PL, a closed-form family, or a composition chain.
///
/// `Compose(maps)` is `maps[0] ∘ maps[1] ∘ …`, applied right to left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HomeoRepr", into = "HomeoRepr")]
pub enum Homeo {
    Pl(PLHomeo),
    /// `x ↦ x^α` on `[0, 1]`.
    Power {
        alpha: f64,
    },
    /// `z ↦ e^{2πi·rot}(z − a)/(1 − āz)` on the unit circle, `rot` in turns.
    Mobius {
        a_re: f64,
        a_im: f64,
        rot: f64,
    },
    Compose(Vec<Homeo>),
}

/// JSON form of a [`Homeo`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum HomeoRepr {
    Pl {
        points: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        circle: bool,
    },
    Power {
        alpha: f64,
    },
    Mobius {
        a_re: f64,
        a_im: f64,
        #[serde(default)]
        rot: f64,
    },
    Compose {
        maps: Vec<HomeoRepr>,
    },
}

impl TryFrom<HomeoRepr> for Homeo {
    type Error = Error;
    fn try_from(s: HomeoRepr) -> Result<Self> {
        match s {
            HomeoRepr::Pl { points, circle } => {
                let kind = if circle { Kind::Circle } else { Kind::Interval };
                Ok(Homeo::Pl(PLHomeo::from_points(kind, &points)?))
            }
            HomeoRepr::Power { alpha } => Homeo::power(alpha),
            HomeoRepr::Mobius { a_re, a_im, rot } => Homeo::mobius(a_re, a_im, rot),
            HomeoRepr::Compose { maps } => Homeo::chain(
                maps.into_iter()
                    .map(Homeo::try_from)
                    .collect::<Result<Vec<_>>>()?,
            ),
        }
    }
}

impl From<Homeo> for HomeoRepr {
    fn from(h: Homeo) -> Self {
        match h {
            Homeo::Pl(p) => HomeoRepr::Pl {
                points: p.points(),
                circle: p.kind == Kind::Circle,
            },
            Homeo::Power { alpha } => HomeoRepr::Power { alpha },
            Homeo::Mobius { a_re, a_im, rot } => HomeoRepr::Mobius { a_re, a_im, rot },
            Homeo::Compose(maps) => HomeoRepr::Compose {
                maps: maps.into_iter().map(HomeoRepr::from).collect(),
            },
        }
    }
}

impl From<PLHomeo> for Homeo {
    fn from(p: PLHomeo) -> Self {
        Homeo::Pl(p)
    }
}

impl Homeo {
    /// Parses a JSON map description, keeping the typed error when it is
    /// well formed but not a valid map.
    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let repr: HomeoRepr =
            serde_json::from_value(value).map_err(|e| Error::Json(e.to_string()))?;
        Homeo::try_from(repr)
    }

    pub fn identity() -> Self {
        Homeo::Pl(PLHomeo::identity(Kind::Interval))
    }

    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Invalid(format!(
                "power exponent {alpha} must be positive"
            )));
        }
        Ok(Homeo::Power { alpha })
    }

    pub fn mobius(a_re: f64, a_im: f64, rot: f64) -> Result<Self> {
        if !(a_re.is_finite() && a_im.is_finite() && rot.is_finite()) || a_re.hypot(a_im) >= 1.0 {
            return Err(Error::Invalid("Möbius parameter needs |a| < 1".into()));
        }
        Ok(Homeo::Mobius { a_re, a_im, rot })
    }

    /// `maps[0] ∘ maps[1] ∘ …`; all maps must share a kind.
    pub fn chain(maps: Vec<Homeo>) -> Result<Self> {
        let Some(first) = maps.first() else {
            return Err(Error::Invalid("empty composition".into()));
        };
        let kind = first.kind();
        if maps.iter().any(|m| m.kind() != kind) {
            return Err(Error::Invalid(
                "cannot compose interval and circle maps".into(),
            ));
        }
        if kind == Kind::Interval {
            for pair in maps.windows(2) {
                let [lo, hi] = pair[1].range();
                let [a, b] = pair[0].domain();
                if lo < a || hi > b {
                    return Err(Error::Domain(if lo < a { lo } else { hi }));
                }
            }
        }
        Ok(Homeo::Compose(maps))
    }

    pub fn kind(&self) -> Kind {
        match self {
            Homeo::Pl(p) => p.kind,
            Homeo::Power { .. } => Kind::Interval,
            Homeo::Mobius { .. } => Kind::Circle,
            Homeo::Compose(maps) => maps[0].kind(),
        }
    }

    pub fn as_pl(&self) -> Option<&PLHomeo> {
        match self {
            Homeo::Pl(p) => Some(p),
            _ => None,
        }
    }

    /// Domain of an interval-kind map; one period `[0, 1]` for circle maps.
    pub fn domain(&self) -> [f64; 2] {
        match self {
            Homeo::Pl(p) => p.domain(),
            Homeo::Compose(maps) => maps.last().unwrap().domain(),
            _ => [0.0, 1.0],
        }
    }

    /// Image of [`Homeo::domain`].
    pub fn range(&self) -> [f64; 2] {
        match self {
            Homeo::Pl(p) => p.range(),
            Homeo::Power { .. } => [0.0, 1.0],
            _ => {
                let [a, b] = self.domain();
                // circle lifts and compositions are evaluated at the ends
                [
                    self.eval(a).unwrap_or(f64::NAN),
                    self.eval(b).unwrap_or(f64::NAN),
                ]
            }
        }
    }

    /// `map(x)`; for circle maps, the lift at `x` in turns.
    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            Homeo::Pl(p) => p.eval(x),
            Homeo::Power { alpha } => {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::Domain(x));
                }
                Ok(x.powf(*alpha))
            }
            Homeo::Mobius { a_re, a_im, rot } => {
                if !x.is_finite() {
                    return Err(Error::Domain(x));
                }
                Ok(mobius_lift(*a_re, *a_im, *rot, x))
            }
            Homeo::Compose(_) => Ok(self.eval_dd(x.into())?.value()),
        }
    }

    /// Evaluation carrying a double-double value through every stage.
    ///
    /// Composites of steep and flat PL maps lose most of their accuracy
    /// when the intermediate value is rounded to a float; the closed-form
    /// families take a first-order correction for the low word.
    pub fn eval_dd(&self, x: Dd) -> Result<Dd> {
        match self {
            Homeo::Pl(p) => p.eval_dd(x),
            Homeo::Compose(maps) => maps.iter().rev().try_fold(x, |v, m| m.eval_dd(v)),
            _ if x.lo == 0.0 => Ok(self.eval(x.hi)?.into()),
            &Homeo::Power { alpha } => {
                let y = self.eval(x.hi)?;
                Ok(Dd::new(y, alpha * x.hi.powf(alpha - 1.0) * x.lo))
            }
            &Homeo::Mobius { a_re, a_im, .. } => {
                let y = self.eval(x.hi)?;
                Ok(Dd::new(y, mobius_slope(a_re, a_im, x.hi) * x.lo))
            }
        }
    }

    /// The inverse map, in closed form for every variant.
    pub fn invert(&self) -> Result<Homeo> {
        Ok(match self {
            Homeo::Pl(p) => Homeo::Pl(p.invert()),
            Homeo::Power { alpha } => Homeo::Power { alpha: 1.0 / alpha },
            &Homeo::Mobius { a_re, a_im, rot } => {
                // e^{iθ}M_a has inverse e^{-iθ}M_{-a·e^{iθ}}
                let (s, c) = (2.0 * PI * rot).sin_cos();
                let (b_re, b_im) = (-(a_re * c - a_im * s), -(a_re * s + a_im * c));
                // fix the integer ambiguity of the lift at one point
                let y0 = mobius_lift(a_re, a_im, rot, 0.0);
                let shift = mobius_lift(b_re, b_im, -rot, y0).round();
                Homeo::Mobius {
                    a_re: b_re,
                    a_im: b_im,
                    rot: -rot - shift,
                }
            }
            Homeo::Compose(maps) => Homeo::Compose(
                maps.iter()
                    .rev()
                    .map(Homeo::invert)
                    .collect::<Result<_>>()?,
            ),
        })
    }

    /// Preimage of `y`.
    pub fn invert_eval(&self, y: f64) -> Result<f64> {
        self.invert()?.eval(y)
    }

    /// `self ∘ inner`, exact when both are PL.
    pub fn compose(&self, inner: &Homeo) -> Result<Homeo> {
        if let (Homeo::Pl(f), Homeo::Pl(g)) = (self, inner) {
            return Ok(Homeo::Pl(f.compose(g)?));
        }
        let mut maps = Vec::new();
        for m in [self, inner] {
            match m {
                Homeo::Compose(inner_maps) => maps.extend(inner_maps.iter().cloned()),
                other => maps.push(other.clone()),
            }
        }
        Homeo::chain(maps)
    }

    /// `[map(a), map(b)]`; arcs map to arcs through the lift.
    pub fn image(&self, part: &Part) -> Result<Part> {
        match (part, self.kind()) {
            (Part::Segment(s), Kind::Interval) => {
                Ok(Segment::new(self.eval(s.a())?, self.eval(s.b())?)?.into())
            }
            (Part::Arc(a), Kind::Circle) => {
                if a.is_full() {
                    return Ok(Arc::full_circle().into());
                }
                let start = a.start().turns();
                Ok(Arc::from_lift(self.eval(start)?, self.eval(a.end_lift())?)?.into())
            }
            _ => Err(Error::Invalid("part and map are of different kinds".into())),
        }
    }

    /// Image length of the lift interval `[a, b]`.
    pub fn image_length(&self, a: f64, b: f64) -> Result<f64> {
        Ok(self.eval(b)? - self.eval(a)?)
    }

    /// Tiles `[a, b]` by recursive bisection into pieces of length at most
    /// `max_len` whose images have length at most `max_image_len`.
    pub fn modulus_refinement(
        &self,
        a: f64,
        b: f64,
        max_len: f64,
        max_image_len: f64,
    ) -> Result<Vec<[f64; 2]>> {
        if !(max_len > 0.0 && max_image_len > 0.0) {
            return Err(Error::Invalid("refinement lengths must be positive".into()));
        }
        let mut out = Vec::new();
        let mut stack = vec![(a, self.eval(a)?, b, self.eval(b)?)];
        while let Some((p, fp, q, fq)) = stack.pop() {
            let mid = p + 0.5 * (q - p);
            let fits = q - p <= max_len && fq - fp <= max_image_len;
            if fits || !(p < mid && mid < q) {
                out.push([p, q]);
                continue;
            }
            let fm = self.eval(mid)?;
            stack.push((mid, fm, q, fq));
            stack.push((p, fp, mid, fm));
        }
        Ok(out)
    }

    /// Orientation checked factor by factor: PL factors exactly through
    /// their breakpoints, the others on a grid of `grid + 1` points over
    /// their domain. Unlike [`Homeo::check_orientation`] this does not see
    /// rounding noise of a flat factor followed by a steep one.
    pub fn check_factor_orientation(&self, grid: usize) -> Result<()> {
        match self {
            Homeo::Pl(p) => match p.ys.windows(2).position(|w| w[1] <= w[0]) {
                Some(i) => Err(Error::Orientation(format!(
                    "y drops at x = {}",
                    p.xs[i + 1]
                ))),
                None => Ok(()),
            },
            Homeo::Compose(maps) => maps
                .iter()
                .try_for_each(|m| m.check_factor_orientation(grid)),
            other => {
                let [a, b] = other.domain();
                let step = (b - a) / grid.max(1) as f64;
                let pts: Vec<f64> = (0..=grid).map(|i| a + step * i as f64).collect();
                other.check_orientation(&pts)
            }
        }
    }

    /// Checks strict increase on the given points (sorted ascending).
    pub fn check_orientation(&self, grid: &[f64]) -> Result<()> {
        let mut prev: Option<(f64, f64)> = None;
        for &x in grid {
            let y = self.eval(x)?;
            if let Some((px, py)) = prev {
                if x > px && y < py {
                    return Err(Error::Orientation(format!(
                        "map decreases between {px} and {x}"
                    )));
                }
            }
            prev = Some((x, y));
        }
        Ok(())
    }
}

/// Lift of `e^{2πi·rot}(z − a)/(1 − āz)` at `t` turns.
fn mobius_lift(a_re: f64, a_im: f64, rot: f64, t: f64) -> f64 {
    let (s, c) = (2.0 * PI * t).sin_cos();
    // 1 − ā·e^{2πit} has positive real part, so its argument is in (−π/2, π/2)
    let re = 1.0 - (a_re * c + a_im * s);
    let im = -(a_re * s - a_im * c);
    t + rot - im.atan2(re) / PI
}

/// Derivative of the Möbius lift: `(1 − |a|²)/|1 − ā·e^{2πit}|²`.
fn mobius_slope(a_re: f64, a_im: f64, t: f64) -> f64 {
    let (s, c) = (2.0 * PI * t).sin_cos();
    let re = 1.0 - (a_re * c + a_im * s);
    let im = -(a_re * s - a_im * c);
    (1.0 - (a_re * a_re + a_im * a_im)) / (re * re + im * im)
}

/// Preimage of `y` under an increasing map on `[lo, hi]` by bisection.
pub fn bisect_inverse(map: &Homeo, y: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    if map.eval(lo)? > y || map.eval(hi)? < y {
        return Err(Error::Domain(y));
    }
    while hi - lo > BISECTION_TOL {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if map.eval(mid)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pl(points: &[[f64; 2]]) -> PLHomeo {
        PLHomeo::from_points(Kind::Interval, points).unwrap()
    }

    fn seg(a: f64, b: f64) -> Part {
        Segment::new(a, b).unwrap().into()
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Homeo::identity().eval(0.3).unwrap(), 0.3);
        let f = Homeo::Pl(pl(&[[0.0, 0.0], [0.5, 0.25], [1.0, 1.0]]));
        assert_eq!(f.eval(0.5).unwrap(), 0.25);
        assert_eq!(Homeo::power(2.0).unwrap().eval(0.5).unwrap(), 0.25);
        assert!(matches!(f.eval(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn invert_examples() {
        assert_eq!(Homeo::power(2.0).unwrap().invert_eval(0.25).unwrap(), 0.5);
        let f = Homeo::Pl(pl(&[[0.0, 0.0], [0.5, 0.25], [1.0, 1.0]]));
        assert_eq!(f.invert_eval(0.25).unwrap(), 0.5);
        let y = (PI / 4.0).rem_euclid(1.0);
        assert_eq!(Homeo::identity().invert_eval(y).unwrap(), y);
    }

    #[test]
    fn image_examples() {
        let p2 = Homeo::power(2.0).unwrap();
        assert_eq!(p2.image(&seg(0.0, 0.5)).unwrap(), seg(0.0, 0.25));
        assert_eq!(
            Homeo::identity().image(&seg(0.2, 0.7)).unwrap(),
            seg(0.2, 0.7)
        );
        let f = Homeo::Pl(pl(&[[0.0, 0.0], [0.5, 0.25], [1.0, 1.0]]));
        assert_eq!(f.image(&seg(0.5, 1.0)).unwrap(), seg(0.25, 1.0));
    }

    #[test]
    fn orientation_reversing_rejected() {
        assert!(matches!(
            PLHomeo::from_points(Kind::Interval, &[[0.0, 1.0], [1.0, 0.0]]),
            Err(Error::Orientation(_))
        ));
        let text = r#"{"kind":"pl","points":[[0,0],[0.5,0.7],[1,0.6]]}"#;
        assert!(serde_json::from_str::<Homeo>(text).is_err());
    }

    #[test]
    fn modulus_refinement_examples() {
        let id = Homeo::identity();
        assert_eq!(
            id.modulus_refinement(0.0, 1.0, 0.5, 1.0).unwrap(),
            vec![[0.0, 0.5], [0.5, 1.0]]
        );
        let quarters = id.modulus_refinement(0.0, 1.0, 0.3, 0.3).unwrap();
        assert_eq!(
            quarters,
            vec![[0.0, 0.25], [0.25, 0.5], [0.5, 0.75], [0.75, 1.0]]
        );
        let p2 = Homeo::power(2.0).unwrap();
        let pieces = p2.modulus_refinement(0.0, 1.0, 1.0, 0.25).unwrap();
        assert_eq!(pieces[0][0], 0.0);
        assert_eq!(pieces.last().unwrap()[1], 1.0);
        for w in pieces.windows(2) {
            assert_eq!(w[0][1], w[1][0]);
        }
        for [a, b] in pieces {
            assert!(b * b - a * a <= 0.25);
        }
    }

    #[test]
    fn compose_with_identity_and_inverse() {
        let f = Homeo::Pl(pl(&[[0.0, 0.0], [0.3, 0.6], [0.8, 0.9], [1.0, 1.0]]));
        let id = Homeo::identity();
        let fi = f.compose(&id).unwrap();
        let back = f.invert().unwrap().compose(&f).unwrap();
        for x in grid(1000) {
            assert_eq!(fi.eval(x).unwrap(), f.eval(x).unwrap());
            assert!((back.eval(x).unwrap() - x).abs() < 1e-12);
        }
        let (Homeo::Pl(a), Homeo::Pl(b)) = (&f, &id) else {
            unreachable!()
        };
        assert!(a.compose(b).unwrap().len() <= a.len() + b.len());
    }

    #[test]
    fn compose_mixed_is_chain() {
        let p = Homeo::power(2.0).unwrap();
        let f = Homeo::Pl(pl(&[[0.0, 0.0], [0.5, 0.8], [1.0, 1.0]]));
        let c = p.compose(&f).unwrap();
        assert!(matches!(c, Homeo::Compose(_)));
        assert_eq!(c.eval(0.5).unwrap(), 0.8f64.powi(2));
        let inv = c.invert().unwrap();
        assert!((inv.eval(c.eval(0.3).unwrap()).unwrap() - 0.3).abs() < 1e-14);
    }

    #[test]
    fn mobius_lift_is_degree_one() {
        let m = Homeo::mobius(0.5, 0.0, 0.0).unwrap();
        // a = 1/2 fixes both real points
        assert!(m.eval(0.0).unwrap().abs() < 1e-15);
        assert!((m.eval(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((m.eval(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((m.eval(0.3).unwrap() + 1.0 - m.eval(1.3).unwrap()).abs() < 1e-14);
        // closed-form plane value agrees with the lift
        let t: f64 = 0.2;
        let (zr, zi) = ((2.0 * PI * t).cos(), (2.0 * PI * t).sin());
        let (nr, ni) = (zr - 0.5, zi);
        let (dr, di) = (1.0 - 0.5 * zr, -0.5 * zi);
        let den = dr * dr + di * di;
        let (wr, wi) = ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den);
        let lift = m.eval(t).unwrap();
        assert!(((2.0 * PI * lift).cos() - wr).abs() < 1e-14);
        assert!(((2.0 * PI * lift).sin() - wi).abs() < 1e-14);
    }

    #[test]
    fn mobius_slope_matches_difference_quotient() {
        for t in [0.0, 0.13, 0.5, 0.77] {
            let h = 1e-6;
            let m = Homeo::mobius(0.3, -0.4, 0.1).unwrap();
            let fd = (m.eval(t + h).unwrap() - m.eval(t - h).unwrap()) / (2.0 * h);
            assert!((mobius_slope(0.3, -0.4, t) - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn steep_composite_keeps_accuracy() {
        // a flat piece of slope about 2⁻⁴⁰ at height 1/2, followed by its inverse
        let s = 2f64.powi(-40);
        let h = pl(&[[0.0, 0.0], [0.1, 0.5], [0.9, 0.5 + s], [1.0, 1.0]]);
        let round_trip = Homeo::chain(vec![Homeo::Pl(h.invert()), Homeo::Pl(h.clone())]).unwrap();
        let naive_worst = grid(1000)
            .into_iter()
            .map(|x| (h.invert().eval(h.eval(x).unwrap()).unwrap() - x).abs())
            .fold(0.0, f64::max);
        assert!(naive_worst > 1e-6);
        for x in grid(1000) {
            assert!((round_trip.eval(x).unwrap() - x).abs() <= 1e-15);
        }
        // breakpoints stay exact
        assert_eq!(round_trip.eval(0.9).unwrap(), 0.9);
    }

    #[test]
    fn mobius_inverse_matches_bisection() {
        let m = Homeo::mobius(0.3, -0.6, 0.37).unwrap();
        let inv = m.invert().unwrap();
        for x in grid(200) {
            let y = m.eval(x).unwrap();
            assert!((inv.eval(y).unwrap() - x).abs() < 1e-12, "x = {x}");
            let b = bisect_inverse(&m, y, -1.0, 2.0).unwrap();
            assert!((b - x).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_pl_wraps() {
        let f = PLHomeo::from_points(Kind::Circle, &[[0.0, 0.1], [0.5, 0.3], [1.0, 1.1]]).unwrap();
        assert_eq!(f.eval(0.5).unwrap(), 0.3);
        assert_eq!(f.eval(1.5).unwrap(), 1.3);
        assert_eq!(f.eval(-0.5).unwrap(), -0.7);
        let g = PLHomeo::from_points(Kind::Circle, &[[0.0, 0.0], [0.25, 0.5], [1.0, 1.0]]).unwrap();
        let fg = f.compose(&g).unwrap();
        for x in grid(500) {
            let want = f.eval(g.eval(x).unwrap()).unwrap();
            assert!((fg.eval(x).unwrap() - want).abs() < 1e-14);
        }
        assert!(PLHomeo::from_points(Kind::Circle, &[[0.0, 0.0], [1.0, 0.9]]).is_err());
    }

    #[test]
    fn json_forms() {
        let forms = [
            r#"{"kind":"pl","points":[[0.0,0.0],[0.5,0.25],[1.0,1.0]]}"#,
            r#"{"kind":"power","alpha":0.4}"#,
            r#"{"kind":"mobius","a_re":0.5,"a_im":0.0,"rot":0.0}"#,
            r#"{"kind":"compose","maps":[{"kind":"power","alpha":2.0},{"kind":"power","alpha":0.5}]}"#,
        ];
        for s in forms {
            let h: Homeo = serde_json::from_str(s).unwrap();
            assert_eq!(serde_json::to_string(&h).unwrap(), s);
        }
        assert!(
            serde_json::from_str::<Homeo>(r#"{"kind":"mobius","a_re":1.0,"a_im":0.0}"#).is_err()
        );
        let reversed = serde_json::json!({"kind": "pl", "points": [[0, 1], [1, 0]]});
        assert!(matches!(
            Homeo::from_json(reversed),
            Err(Error::Orientation(_))
        ));
        assert!(matches!(
            Homeo::from_json(serde_json::json!({"kind": "spline"})),
            Err(Error::Json(_))
        ));
        assert!(serde_json::from_str::<Homeo>(r#"{"kind":"compose","maps":[{"kind":"power","alpha":2},{"kind":"mobius","a_re":0,"a_im":0}]}"#).is_err());
    }

    fn random_pl() -> impl Strategy<Value = PLHomeo> {
        (
            prop::collection::vec(0.01f64..1.0, 2..20),
            prop::collection::vec(0.01f64..1.0, 2..20),
        )
            .prop_map(|(dx, dy)| {
                let n = dx.len().min(dy.len());
                let cum = |d: &[f64]| {
                    let total: f64 = d[..n].iter().sum();
                    let mut acc = 0.0;
                    let mut v = vec![0.0];
                    for x in &d[..n - 1] {
                        acc += x;
                        v.push(acc / total);
                    }
                    v.push(1.0);
                    v
                };
                PLHomeo::new(Kind::Interval, cum(&dx), cum(&dy)).unwrap()
            })
    }

    fn family() -> impl Strategy<Value = Homeo> {
        prop_oneof![
            random_pl().prop_map(Homeo::Pl),
            (0.2f64..5.0).prop_map(|a| Homeo::power(a).unwrap()),
            (-0.7f64..0.7, -0.7f64..0.7, -1.0f64..1.0)
                .prop_map(|(r, i, t)| Homeo::mobius(r, i, t).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn eval_strictly_increasing(h in family(), mut xs in prop::collection::vec(0.0f64..1.0, 2..50)) {
            xs.sort_by(f64::total_cmp);
            xs.dedup_by(|a, b| *a - *b < 1e-6);
            let ys: Vec<f64> = xs.iter().map(|&x| h.eval(x).unwrap()).collect();
            for w in ys.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
        }

        #[test]
        fn invert_round_trip(h in family(), x in 0.05f64..0.95) {
            let y = h.eval(x).unwrap();
            prop_assert!((h.invert_eval(y).unwrap() - x).abs() < 1e-12);
        }

        #[test]
        fn images_shrink(h in family(), x in 0.0f64..0.9) {
            let lens: Vec<f64> = (1..12).map(|k| {
                let d = 0.1 * 0.5f64.powi(k);
                h.image_length(x, x + d).unwrap()
            }).collect();
            for w in lens.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            prop_assert!(lens[lens.len() - 1] < 0.05);
        }

        #[test]
        fn pl_composition_exact(f in random_pl(), g in random_pl(), pts in prop::collection::vec(0.0f64..=1.0, 1000)) {
            let fg = f.compose(&g).unwrap();
            prop_assert!(fg.len() <= f.len() + g.len());
            for x in pts {
                let want = f.eval(g.eval(x).unwrap()).unwrap();
                prop_assert!((fg.eval(x).unwrap() - want).abs() < 1e-14);
            }
        }
    }
}
