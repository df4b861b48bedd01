//! Logarithmic capacity of finite unions of segments and arcs.
//!
//! Closed-form routes:
//!
//! * [`upper_bound_capacity`] sums closed-form bounds over the parts
//!   (`|b - a| / 4` for a segment, the radius of an enclosing disk for an
//!   arc). For one part this bounds its capacity. For several parts it is
//!   the additive quantity that the decomposition budgets are stated in,
//!   and it does **not** bound the capacity of the union: two segments of
//!   length `ε` at distance one have capacity close to `√(ε/4)`, far above
//!   `ε/2`.
//! * [`union_capacity_bound`] is a valid bound for unions, from the
//!   logarithmic form of subadditivity
//!   `1/log(d/cap(⋃Eᵢ)) ≤ Σ 1/log(d/cap(Eᵢ))`, `d` the diameter.
//!
//! [`estimate_capacity`] discretizes the energy integral into panels and
//! minimizes `wᵀKw` over the probability simplex. The minimum is an
//! estimate of the Robin constant `γ`, and `cap = exp(-γ)`.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact;
use crate::geometry::{IntervalUnion, Part};

/// Relative tolerance between the variational estimate and the certificate.
pub const DEFAULT_TOL_REL: f64 = 0.02;

/// Relative 1-norm condition estimate above which the equilibrium system
/// is rejected as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e12;

/// Certified bound for a single part, rounded upward.
pub fn part_bound(part: &Part) -> f64 {
    match part {
        Part::Segment(s) => exact::sub_up(s.b(), s.a()) / 4.0,
        Part::Arc(a) => {
            // disk centered at the arc midpoint through both endpoints:
            // radius 2·sin(θ/2) for an arc of central angle 2θ
            let len = exact::sub_up(a.end_lift(), a.start().turns());
            let r = 2.0 * (0.5 * PI * len.min(1.0)).sin();
            exact::bump_up(r, 4)
        }
    }
}

/// Sum of the closed-form part bounds, rounded upward.
///
/// Wider sets are scaled by a power of two `λ` so that `λ·diam ≤ 1`
/// before summing and scaled back afterwards; both scalings are exact, so
/// the result equals the plain sum of [`part_bound`]. See the module docs
/// for why this sum bounds a single part but not a union.
pub fn upper_bound_capacity(set: &IntervalUnion) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let mut lambda = 1.0;
    let diam = set.diameter_bound();
    while diam * lambda > 1.0 {
        lambda *= 0.5;
    }
    let scaled = exact::sum_up(set.parts().iter().map(|p| lambda * part_bound(p)));
    scaled / lambda
}

/// Upper bound on the capacity of the union, valid for any number of parts.
///
/// With `d` the diameter and `bᵢ` the part bounds (capped at `d/2`, which
/// bounds the capacity of any set of diameter `d`),
/// `cap ≤ d·exp(-1/S)` where `S = Σ 1/log(d/bᵢ)`. Every step is rounded
/// toward a larger result.
pub fn union_capacity_bound(set: &IntervalUnion) -> f64 {
    match set.parts() {
        [] => 0.0,
        [one] => part_bound(one),
        parts => {
            let d = set.diameter_bound();
            let half = 0.5 * d;
            let s = exact::sum_up(parts.iter().map(|p| {
                let b = part_bound(p).min(half);
                let log = exact::bump_down((d / b).ln(), 4);
                exact::bump_up(1.0 / log, 2)
            }));
            let inv = exact::bump_down(1.0 / s, 2);
            let bound = exact::bump_up(exact::bump_up((-inv).exp(), 4) * d, 2);
            bound.min(half)
        }
    }
}

/// A panel of the discretized set.
///
/// `param` is the panel's parameter interval: real coordinates for a
/// segment, radians for an arc. `center` is the planar image of the
/// parameter midpoint and `length` the panel's chord length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub part: usize,
    pub param: [f64; 2],
    pub center: [f64; 2],
    pub length: f64,
}

/// How panel–panel interaction entries are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssemblyRule {
    /// Equal-length panels; `-log` of the distance between centers off the
    /// diagonal, `3/2 - log ℓ` on it with `ℓ` the chord.
    Midpoint,
    /// Panels graded toward part endpoints (cosine spacing); entries are
    /// the exact mean of the kernel over each pair of panels, computed in
    /// closed form for the logarithmic singularity and by Gauss–Legendre
    /// quadrature for the smooth remainder and for well-separated pairs.
    #[default]
    Galerkin,
}

/// Panels of a set together with a probability vector over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panelization {
    pub panels: Vec<Panel>,
    pub weights: Vec<f64>,
}

/// Dense symmetric energy matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMatrix {
    n: usize,
    data: Vec<f64>,
}

impl EnergyMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("energy matrix must be square".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(
                "energy matrix has non-finite entries".into(),
            ));
        }
        for i in 0..n {
            for j in 0..i {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::Invalid("energy matrix must be symmetric".into()));
                }
            }
        }
        Ok(EnergyMatrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// `wᵀKw`.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            if w[i] == 0.0 {
                continue;
            }
            let row = &self.data[i * n..(i + 1) * n];
            let kw: f64 = row.iter().zip(w).map(|(k, x)| k * x).sum();
            total += w[i] * kw;
        }
        total
    }

    pub fn mul_vec(&self, w: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(w).map(|(k, x)| k * x).sum())
            .collect()
    }
}

/// Number of panels given to each part: proportional to its share of the
/// total length, at least one (three for a full circle).
fn panel_counts(set: &IntervalUnion, panels: usize) -> Vec<usize> {
    let total = set.total_length();
    set.parts()
        .iter()
        .map(|p| {
            let k = ((panels as f64) * p.length() / total).round().max(1.0) as usize;
            match p {
                Part::Arc(a) if a.is_full() => k.max(3),
                _ => k,
            }
        })
        .collect()
}

/// Panel breakpoints in `[0, 1]` for a part cut into `k` panels.
fn panel_nodes(k: usize, rule: AssemblyRule, closed_curve: bool) -> Vec<f64> {
    (0..=k)
        .map(|i| {
            let t = i as f64 / k as f64;
            match rule {
                AssemblyRule::Galerkin if !closed_curve => 0.5 * (1.0 - (PI * t).cos()),
                _ => t,
            }
        })
        .collect()
}

/// Second antiderivative of `log|u|`.
fn log_antiderivative2(u: f64) -> f64 {
    let u = u.abs();
    if u == 0.0 {
        0.0
    } else {
        0.5 * u * u * u.ln() - 0.75 * u * u
    }
}

/// Exact mean of `-log|x - y|` over `x ∈ [a, b]`, `y ∈ [c, d]`.
fn mean_neg_log(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let g = log_antiderivative2;
    let integral = g(b - c) - g(b - d) - g(a - c) + g(a - d);
    -integral / ((b - a) * (d - c))
}

/// `log(2 sin(u/2) / u)`, smooth for `|u| < 2π`.
fn circle_remainder(u: f64) -> f64 {
    let q = if u.abs() < 1e-4 {
        1.0 - u * u / 24.0
    } else {
        2.0 * (0.5 * u).sin() / u
    };
    q.ln()
}

const GAUSS2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Two-point tensor Gauss–Legendre mean of `f(x - y)` over two intervals.
fn gauss_mean(a: f64, b: f64, c: f64, d: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (xm, xr) = (0.5 * (a + b), 0.5 * (b - a));
    let (ym, yr) = (0.5 * (c + d), 0.5 * (d - c));
    let mut acc = 0.0;
    for gx in GAUSS2 {
        for gy in GAUSS2 {
            acc += f((xm + xr * gx) - (ym + yr * gy));
        }
    }
    0.25 * acc
}

/// Separation, in panel lengths, below which the logarithmic part is
/// integrated in closed form.
const NEAR_FIELD: f64 = 8.0;

fn galerkin_entry(p: &Panel, q: &Panel, arcs: bool) -> f64 {
    let [a, b] = p.param;
    let [mut c, mut d] = q.param;
    if arcs {
        // bring the second panel within half a turn of the first
        let shift = 2.0 * PI * (((c + d) - (a + b)) / (4.0 * PI)).round();
        c -= shift;
        d -= shift;
    }
    let gap = (0.5 * ((c + d) - (a + b))).abs();
    let near = gap <= NEAR_FIELD * ((b - a) + (d - c));
    match (near, arcs) {
        (true, false) => mean_neg_log(a, b, c, d),
        (true, true) => mean_neg_log(a, b, c, d) - gauss_mean(a, b, c, d, circle_remainder),
        (false, false) => gauss_mean(a, b, c, d, |u| -u.abs().ln()),
        (false, true) => gauss_mean(a, b, c, d, |u| -(2.0 * (0.5 * u).sin()).abs().ln()),
    }
}

fn midpoint_entry(p: &Panel, q: &Panel) -> f64 {
    let d = (p.center[0] - q.center[0]).hypot(p.center[1] - q.center[1]);
    -d.ln()
}

/// Splits every part into panels and assembles the energy matrix of the
/// piecewise-uniform measures on them.
///
/// `panels` is the total resolution, distributed over the parts in
/// proportion to their length; the discretization therefore commutes with
/// scaling of the set.
pub fn assemble_energy_matrix(
    set: &IntervalUnion,
    panels: usize,
    rule: AssemblyRule,
) -> Result<(Vec<Panel>, EnergyMatrix)> {
    if panels == 0 {
        return Err(Error::Invalid("panel count must be positive".into()));
    }
    if set.is_empty() {
        return Err(Error::Invalid("cannot panelize an empty set".into()));
    }
    let arcs = set.is_arcs();
    let counts = panel_counts(set, panels);
    let mut out = Vec::with_capacity(counts.iter().sum());
    for (idx, (part, &k)) in set.parts().iter().zip(&counts).enumerate() {
        let closed = matches!(part, Part::Arc(a) if a.is_full());
        let nodes = panel_nodes(k, rule, closed);
        for w in nodes.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let panel = match part {
                Part::Segment(s) => {
                    let a = s.a() + s.length() * lo;
                    let b = s.a() + s.length() * hi;
                    Panel {
                        part: idx,
                        param: [a, b],
                        center: [0.5 * (a + b), 0.0],
                        length: b - a,
                    }
                }
                Part::Arc(arc) => {
                    let t0 = arc.start().turns();
                    let len = arc.length();
                    let a = 2.0 * PI * (t0 + len * lo);
                    let b = 2.0 * PI * (t0 + len * hi);
                    let (s, c) = (0.5 * (a + b)).sin_cos();
                    Panel {
                        part: idx,
                        param: [a, b],
                        center: [c, s],
                        length: 2.0 * (0.5 * (b - a)).sin(),
                    }
                }
            };
            if !(panel.length > 0.0) {
                return Err(Error::Degenerate(idx));
            }
            out.push(panel);
        }
    }

    let n = out.len();
    // upper triangle only; each unordered pair is evaluated once
    let row = |i: usize| -> Vec<f64> {
        let pi = &out[i];
        (i..n)
            .map(|j| match rule {
                AssemblyRule::Midpoint if i == j => 1.5 - pi.length.ln(),
                AssemblyRule::Midpoint => midpoint_entry(pi, &out[j]),
                AssemblyRule::Galerkin => galerkin_entry(pi, &out[j], arcs),
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<f64>> = (0..n).map(row).collect();

    let mut data = vec![0.0; n * n];
    for (i, r) in rows.into_iter().enumerate() {
        for (k, v) in r.into_iter().enumerate() {
            let j = i + k;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
        // coincident panel centers
        return Err(Error::Degenerate(out[bad / n].part));
    }
    Ok((out, EnergyMatrix { n, data }))
}

/// Minimizer of `wᵀKw` over the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub weights: Vec<f64>,
    pub gamma: f64,
    /// Number of active-set rounds.
    pub rounds: usize,
}

/// Solves `Kw = γ·1`, `Σw = 1` on the current support. When the solution
/// leaves the simplex, steps to the boundary and drops the blocking index;
/// when a dropped index has a negative multiplier `(Kw)_j - γ`, releases it.
/// With all weights positive on the first solve this is a single dense
/// solve.
pub fn equilibrium_weights(matrix: &EnergyMatrix) -> Result<Equilibrium> {
    let n = matrix.dim();
    if n == 0 {
        return Err(Error::Invalid("empty energy matrix".into()));
    }
    let mut free = vec![true; n];
    let mut w = vec![1.0 / n as f64; n];
    let max_rounds = 10 * n + 10;
    for rounds in 1..=max_rounds {
        let support: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let target = solve_on_support(matrix, &support)?;

        let mut step = 1.0;
        let mut blocking = None;
        for (k, &i) in support.iter().enumerate() {
            let p = target[k] - w[i];
            if p < 0.0 {
                let alpha = w[i] / -p;
                if alpha < step {
                    step = alpha;
                    blocking = Some(i);
                }
            }
        }
        for (k, &i) in support.iter().enumerate() {
            w[i] += step * (target[k] - w[i]);
        }
        if let Some(i) = blocking {
            w[i] = 0.0;
            free[i] = false;
            continue;
        }

        let kw = matrix.mul_vec(&w);
        let gamma = support.iter().map(|&i| w[i] * kw[i]).sum::<f64>();
        let release = (0..n)
            .filter(|&j| !free[j])
            .map(|j| (j, kw[j] - gamma))
            .filter(|&(_, mult)| mult < -1e-12 * gamma.abs().max(1.0))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match release {
            Some((j, _)) => free[j] = true,
            None => {
                let gamma = matrix.quadratic_form(&w);
                return Ok(Equilibrium {
                    weights: w,
                    gamma,
                    rounds,
                });
            }
        }
    }
    Err(Error::Invalid(
        "active-set iteration did not settle; energy matrix is not conditionally positive".into(),
    ))
}

/// Stationary point of `wᵀKw` subject to `Σw = 1` with `w` supported on
/// `support`, from the bordered system `[K 1; 1ᵀ 0]`.
fn solve_on_support(matrix: &EnergyMatrix, support: &[usize]) -> Result<Vec<f64>> {
    let m = support.len();
    let bordered = Mat::<f64>::from_fn(m + 1, m + 1, |i, j| match (i < m, j < m) {
        (true, true) => matrix.get(support[i], support[j]),
        (false, false) => 0.0,
        _ => 1.0,
    });
    let lu = bordered.partial_piv_lu();
    let cond = condition_estimate(&bordered, |rhs| lu.solve(rhs));
    if !(cond < SINGULARITY_THRESHOLD) {
        return Err(Error::SingularSystem(cond));
    }
    let rhs = Mat::<f64>::from_fn(m + 1, 1, |i, _| if i == m { 1.0 } else { 0.0 });
    let sol = lu.solve(&rhs);
    Ok((0..m).map(|i| sol[(i, 0)]).collect())
}

/// Hager's estimate of the 1-norm condition number of a symmetric matrix,
/// given a solver for it.
fn condition_estimate(a: &Mat<f64>, solve: impl Fn(&Mat<f64>) -> Mat<f64>) -> f64 {
    let n = a.nrows();
    let norm_a = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut x = Mat::<f64>::from_fn(n, 1, |_, _| 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = solve(&x);
        if (0..n).any(|i| !y[(i, 0)].is_finite()) {
            return f64::INFINITY;
        }
        est = (0..n).map(|i| y[(i, 0)].abs()).sum::<f64>();
        let sign = Mat::<f64>::from_fn(n, 1, |i, _| if y[(i, 0)] >= 0.0 { 1.0 } else { -1.0 });
        let z = solve(&sign);
        let (jmax, zmax) = (0..n)
            .map(|i| (i, z[(i, 0)].abs()))
            .fold((0, f64::MIN), |acc, v| if v.1 > acc.1 { v } else { acc });
        let ztx: f64 = (0..n).map(|i| z[(i, 0)] * x[(i, 0)]).sum();
        if zmax <= ztx {
            break;
        }
        x = Mat::<f64>::from_fn(n, 1, |i, _| if i == jmax { 1.0 } else { 0.0 });
    }
    norm_a * est
}

/// Variational estimate plus the closed-form bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    /// [`upper_bound_capacity`]: the sum of part bounds.
    pub upper_bound: f64,
    /// [`union_capacity_bound`].
    pub union_bound: f64,
    /// Estimated Robin constant; absent for the empty set.
    pub gamma: Option<f64>,
    pub cap_estimate: f64,
    pub panels: usize,
}

pub fn estimate_capacity(set: &IntervalUnion, panels: usize) -> Result<CapacityEstimate> {
    Ok(estimate_with_panels(set, panels, AssemblyRule::default())?.0)
}

/// Like [`estimate_capacity`], also returning the discretized equilibrium
/// measure.
pub fn estimate_with_panels(
    set: &IntervalUnion,
    panels: usize,
    rule: AssemblyRule,
) -> Result<(CapacityEstimate, Panelization)> {
    let upper_bound = upper_bound_capacity(set);
    let union_bound = union_capacity_bound(set);
    if set.is_empty() {
        let est = CapacityEstimate {
            upper_bound,
            union_bound,
            gamma: None,
            cap_estimate: 0.0,
            panels: 0,
        };
        return Ok((
            est,
            Panelization {
                panels: vec![],
                weights: vec![],
            },
        ));
    }
    let (panel_list, matrix) = assemble_energy_matrix(set, panels, rule)?;
    let eq = equilibrium_weights(&matrix)?;
    let est = CapacityEstimate {
        upper_bound,
        union_bound,
        gamma: Some(eq.gamma),
        cap_estimate: (-eq.gamma).exp(),
        panels: panel_list.len(),
    };
    Ok((
        est,
        Panelization {
            panels: panel_list,
            weights: eq.weights,
        },
    ))
}

/// Exact capacity of a circular arc of `len` turns on the unit circle,
/// `sin(π·len/2)`. Used as an independent oracle.
pub fn arc_capacity_exact(len: f64) -> f64 {
    (0.5 * PI * len.clamp(0.0, 1.0)).sin()
}
