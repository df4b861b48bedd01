//! Factorization `φ = ψ ∘ h` with budgeted small-children unions.
//!
//! The domain tree is refined level by level. Each interval is cut into
//! pieces of controlled length and image length, every piece splits into a
//! large left (even) child and a small right (odd) child, and the odd
//! children shrink by halving until the part sums of their capacities and
//! of their `φ`-images drop below the level budget. The range tree mirrors
//! the domain tree's piece proportions with the roles swapped: its even
//! children are the small ones. Stage maps `hₙ` match the two trees word by
//! word and `ψₙ = φ ∘ hₙ⁻¹`.

use serde::{Deserialize, Serialize};

use crate::addresses::PartitionTree;
use crate::capacity::{
    estimate_capacity, part_bound, union_capacity_bound, upper_bound_capacity, DEFAULT_TOL_REL,
};
use crate::error::{Error, Result};
use crate::geometry::{Arc, IntervalUnion, Part, Segment};
use crate::homeo::{Homeo, PLHomeo};
use crate::logsingular::{uniform_grid, MatchedPartitions};

/// Halvings allowed before a level is declared unreachable.
pub const MAX_HALVINGS: u32 = 2000;

/// Grid residual allowed for `ψₙ ∘ hₙ` against `φ`.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Largest parts of a union used by the variational cross-check.
const CROSSCHECK_PARTS: usize = 64;
const CROSSCHECK_PANELS: usize = 256;

/// Budget per level `n ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum BudgetSchedule {
    /// `2⁻ⁿ`.
    Pow2,
    /// `budget(n)` is entry `n - 1`.
    Custom(Vec<f64>),
}

impl BudgetSchedule {
    pub fn custom(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Invalid("budgets must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Invalid("budgets must be nonincreasing".into()));
        }
        Ok(BudgetSchedule::Custom(values))
    }

    pub fn budget(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::Invalid("budgets start at level 1".into()));
        }
        match self {
            BudgetSchedule::Pow2 => Ok(0.5f64.powi(n as i32)),
            BudgetSchedule::Custom(v) => v.get(n - 1).copied().ok_or(Error::Depth {
                requested: n,
                available: v.len(),
            }),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BudgetRepr {
    Name(String),
    Values(Vec<f64>),
}

impl Serialize for BudgetSchedule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BudgetSchedule::Pow2 => BudgetRepr::Name("pow2".into()),
            BudgetSchedule::Custom(v) => BudgetRepr::Values(v.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BudgetSchedule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match BudgetRepr::deserialize(d)? {
            BudgetRepr::Name(n) if n == "pow2" => Ok(BudgetSchedule::Pow2),
            BudgetRepr::Name(n) => Err(D::Error::custom(format!("unknown budget schedule {n:?}"))),
            BudgetRepr::Values(v) => BudgetSchedule::custom(v).map_err(D::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposeOptions {
    pub depth: usize,
    pub budget: BudgetSchedule,
    /// Also keep `φ⁻¹` of the odd children within budget.
    pub inverse_family: bool,
    /// Grid size for composition residuals.
    pub grid: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            depth: 6,
            budget: BudgetSchedule::Pow2,
            inverse_family: false,
            grid: 10_000,
        }
    }
}

/// What [`refine_level`] certified for the new level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCertificate {
    /// The level that was appended.
    pub n: usize,
    pub fanout: usize,
    pub halvings: u32,
    pub cap_e_bound: f64,
    pub cap_phi_e_bound: f64,
    pub cap_phi_inv_e_bound: Option<f64>,
}

fn make_part(circle: bool, a: f64, b: f64) -> Result<Part> {
    if circle {
        Ok(Arc::from_lift(a, b)?.into())
    } else {
        Ok(Segment::new(a, b)?.into())
    }
}

fn union_of(
    circle: bool,
    intervals: impl IntoIterator<Item = (f64, f64)>,
) -> Result<IntervalUnion> {
    let parts = intervals
        .into_iter()
        .map(|(a, b)| make_part(circle, a, b))
        .collect::<Result<Vec<_>>>()?;
    IntervalUnion::normalize(parts)
}

/// `map` applied to every part of `set`.
pub fn image_union(map: &Homeo, set: &IntervalUnion) -> Result<IntervalUnion> {
    IntervalUnion::normalize(
        set.parts()
            .iter()
            .map(|p| map.image(p))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Bisects the largest piece until there are `m` pieces.
fn pad_pieces(pieces: &mut Vec<[f64; 2]>, m: usize) {
    while pieces.len() < m {
        let (i, _) = pieces
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (i, [a, b])| {
                if b - a > best.1 {
                    (i, b - a)
                } else {
                    best
                }
            });
        let [a, b] = pieces[i];
        let mid = a + 0.5 * (b - a);
        pieces[i] = [a, mid];
        pieces.insert(i + 1, [mid, b]);
    }
}

fn map_parents<T: Send>(
    parents: &[[f64; 2]],
    f: impl Fn(&[f64; 2]) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        parents.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        parents.iter().map(f).collect()
    }
}

/// Appends level `n + 1` to `tree`, which must have depth `n`.
///
/// Each level-`n` interval is tiled by [`Homeo::modulus_refinement`] with
/// lengths at most `max|I|/n` and image lengths at most `max|φ(I)|/n`
/// (divisor 1 for `n ≤ 1`), padded to the common piece count `m`, and every
/// piece is split into an even child on the left and an odd child on the
/// right of length `piece / 2^k`. One `k` serves the whole level: the
/// smallest with both part sums below `budget(n + 1)`.
pub fn refine_level(
    phi: &Homeo,
    tree: &mut PartitionTree,
    n: usize,
    budget: &BudgetSchedule,
    inverse_family: bool,
) -> Result<LevelCertificate> {
    if tree.depth() != n {
        return Err(Error::Invalid(format!(
            "tree has depth {}, expected {n}",
            tree.depth()
        )));
    }
    let circle = tree.is_circle();
    let parents = tree.level(n).to_vec();
    let divisor = n.max(1) as f64;
    let max_len = tree.max_length(n) / divisor;
    let mut max_image: f64 = 0.0;
    for &[a, b] in &parents {
        max_image = max_image.max(phi.image_length(a, b)?);
    }
    let max_image = max_image / divisor;
    let mut pieces = map_parents(&parents, |&[a, b]| {
        phi.modulus_refinement(a, b, max_len, max_image)
    })?;
    let m = pieces.iter().map(Vec::len).max().unwrap_or(1);
    for p in &mut pieces {
        pad_pieces(p, m);
    }
    let b = budget.budget(n + 1)?;
    let phi_inv = if inverse_family {
        Some(phi.invert()?)
    } else {
        None
    };
    let flat: Vec<[f64; 2]> = pieces.iter().flatten().copied().collect();
    let image_right: Vec<f64> = flat
        .iter()
        .map(|&[_, q]| phi.eval(q))
        .collect::<Result<_>>()?;
    let inv_right: Option<Vec<f64>> = match &phi_inv {
        Some(inv) => Some(
            flat.iter()
                .map(|&[_, q]| inv.eval(q))
                .collect::<Result<_>>()?,
        ),
        None => None,
    };

    for k in 1..=MAX_HALVINGS {
        let scale = 0.5f64.powi(k as i32);
        let cuts: Vec<f64> = flat.iter().map(|&[p, q]| q - (q - p) * scale).collect();
        if flat
            .iter()
            .zip(&cuts)
            .any(|(&[p, q], &c)| !(p < c && c < q))
        {
            return Err(Error::BudgetUnreachable {
                level: n + 1,
                budget: b,
                halvings: k,
            });
        }
        let odd = union_of(circle, flat.iter().zip(&cuts).map(|(&[_, q], &c)| (c, q)))?;
        let cap_e = upper_bound_capacity(&odd);
        if cap_e >= b {
            continue;
        }
        let images = union_of(
            circle,
            cuts.iter()
                .zip(&image_right)
                .map(|(&c, &fq)| Ok((phi.eval(c)?, fq)))
                .collect::<Result<Vec<_>>>()?,
        );
        // a rounded image may collapse to a point; keep halving in that case
        let Ok(images) = images else { continue };
        let cap_phi_e = upper_bound_capacity(&images);
        if cap_phi_e >= b {
            continue;
        }
        let cap_inv = match (&phi_inv, &inv_right) {
            (Some(inv), Some(right)) => {
                let pre = union_of(
                    circle,
                    cuts.iter()
                        .zip(right)
                        .map(|(&c, &r)| Ok((inv.eval(c)?, r)))
                        .collect::<Result<Vec<_>>>()?,
                );
                let Ok(pre) = pre else { continue };
                let cap = upper_bound_capacity(&pre);
                if cap >= b {
                    continue;
                }
                Some(cap)
            }
            _ => None,
        };
        let mut level_cuts = Vec::with_capacity(parents.len());
        for (i, parent_pieces) in pieces.iter().enumerate() {
            let mut c = Vec::with_capacity(2 * m - 1);
            for (j, piece) in parent_pieces.iter().enumerate() {
                c.push(cuts[i * m + j]);
                if j + 1 < m {
                    c.push(piece[1]);
                }
            }
            level_cuts.push(c);
        }
        tree.push_level(2 * m, level_cuts)?;
        return Ok(LevelCertificate {
            n: n + 1,
            fanout: 2 * m,
            halvings: k,
            cap_e_bound: cap_e,
            cap_phi_e_bound: cap_phi_e,
            cap_phi_inv_e_bound: cap_inv,
        });
    }
    Err(Error::BudgetUnreachable {
        level: n + 1,
        budget: b,
        halvings: MAX_HALVINGS,
    })
}

/// Halvings and certified part sum of one range level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeCertificate {
    pub n: usize,
    pub halvings: u32,
    pub cap_f_bound: f64,
}

/// The range tree over the domain tree's root and schedule.
///
/// Each `J_w` is cut in the proportions of the pieces of `I_w`; in every
/// piece the even child on the left has length `piece / 2^k`, with one `k`
/// per level, the smallest whose part sum is below the level budget.
pub fn build_range_tree(
    domain: &PartitionTree,
    budget: &BudgetSchedule,
) -> Result<(PartitionTree, Vec<RangeCertificate>)> {
    let circle = domain.is_circle();
    let mut range = domain.root_only();
    let mut certs = Vec::with_capacity(domain.depth());
    for n in 0..domain.depth() {
        let fanout = domain.schedule().as_slice()[n + 1];
        if !fanout.is_multiple_of(2) {
            return Err(Error::Invalid(format!("L{} = {fanout} is odd", n + 1)));
        }
        let m = fanout / 2;
        let dparents = domain.level(n);
        let dkids = domain.level(n + 1);
        let mut flat: Vec<[f64; 2]> = Vec::with_capacity(dkids.len() / 2);
        for (i, (&[dlo, dhi], &[rlo, rhi])) in dparents.iter().zip(range.level(n)).enumerate() {
            let mut left = rlo;
            for j in 0..m {
                let right = if j + 1 == m {
                    rhi
                } else {
                    let x = dkids[i * fanout + 2 * j + 2][0];
                    rlo + (rhi - rlo) * ((x - dlo) / (dhi - dlo))
                };
                if !(left < right) {
                    return Err(Error::Invalid(format!(
                        "range piece collapsed at level {}",
                        n + 1
                    )));
                }
                flat.push([left, right]);
                left = right;
            }
        }
        let b = budget.budget(n + 1)?;
        let mut accepted = None;
        for k in 1..=MAX_HALVINGS {
            let scale = 0.5f64.powi(k as i32);
            let cuts: Vec<f64> = flat.iter().map(|&[p, q]| p + (q - p) * scale).collect();
            if flat
                .iter()
                .zip(&cuts)
                .any(|(&[p, q], &c)| !(p < c && c < q))
            {
                break;
            }
            let even = union_of(circle, flat.iter().zip(&cuts).map(|(&[p, _], &c)| (p, c)))?;
            let cap_f = upper_bound_capacity(&even);
            if cap_f < b {
                accepted = Some((k, cuts, cap_f));
                break;
            }
        }
        let Some((k, cuts, cap_f)) = accepted else {
            return Err(Error::BudgetUnreachable {
                level: n + 1,
                budget: b,
                halvings: MAX_HALVINGS,
            });
        };
        let level_cuts = (0..dparents.len())
            .map(|i| {
                let mut c = Vec::with_capacity(fanout - 1);
                for j in 0..m {
                    c.push(cuts[i * m + j]);
                    if j + 1 < m {
                        c.push(flat[i * m + j][1]);
                    }
                }
                c
            })
            .collect();
        range.push_level(fanout, level_cuts)?;
        certs.push(RangeCertificate {
            n: n + 1,
            halvings: k,
            cap_f_bound: cap_f,
        });
    }
    Ok((range, certs))
}

/// `ψ = φ ∘ h⁻¹`: an exact PL map when `φ` is PL, a composition otherwise.
pub fn psi_map(phi: &Homeo, h: &PLHomeo) -> Result<Homeo> {
    let h_inv = h.invert();
    match phi {
        Homeo::Pl(p) => Ok(Homeo::Pl(p.compose(&h_inv)?)),
        other => Homeo::chain(vec![other.clone(), Homeo::Pl(h_inv)]),
    }
}

/// Largest `|(ψ∘h)(x) - φ(x)|` over the points.
///
/// The composite is evaluated with a double-double intermediate: `ψ` is
/// as steep as `h` is flat, so rounding `h(x)` to a float first would
/// measure the conditioning of the split rather than the identity.
pub fn composition_residual(
    phi: &Homeo,
    h: &PLHomeo,
    psi: &Homeo,
    xs: impl Iterator<Item = f64>,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in xs {
        let composite = psi.eval_dd(h.eval_dd(x.into())?)?.value();
        worst = worst.max((composite - phi.eval(x)?).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub n: usize,
    /// `hₙ`, always a PL map.
    pub h: Homeo,
    /// `ψₙ = φ ∘ hₙ⁻¹`.
    pub psi: Homeo,
    pub cauchy_bound: f64,
    pub residual: f64,
    pub residual_breakpoints: f64,
}

impl Stage {
    pub fn h_pl(&self) -> Result<&PLHomeo> {
        self.h
            .as_pl()
            .ok_or_else(|| Error::Invalid(format!("stage {} map is not piecewise linear", self.n)))
    }
}

/// One row of the certificate ledger, for level `n ≥ 1`.
///
/// The `*_bound` columns are part sums ([`upper_bound_capacity`]) of the
/// level's small-children unions; the `*_union_bound` columns are the
/// bounds valid for the unions themselves ([`union_capacity_bound`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub n: usize,
    pub budget: f64,
    pub fanout: usize,
    pub halvings_domain: u32,
    pub halvings_range: u32,
    #[serde(rename = "capE_bound")]
    pub cap_e_bound: f64,
    #[serde(rename = "cap_phiE_bound")]
    pub cap_phi_e_bound: f64,
    #[serde(rename = "capF_bound")]
    pub cap_f_bound: f64,
    #[serde(
        rename = "cap_phiinvE_bound",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub cap_phi_inv_e_bound: Option<f64>,
    pub cauchy: f64,
    pub residual: f64,
    pub residual_breakpoints: f64,
    #[serde(rename = "capE_union_bound")]
    pub cap_e_union_bound: f64,
    #[serde(rename = "cap_phiE_union_bound")]
    pub cap_phi_e_union_bound: f64,
    #[serde(rename = "capF_union_bound")]
    pub cap_f_union_bound: f64,
    pub pass: bool,
}

impl LedgerRow {
    fn passes(&self) -> bool {
        let b = self.budget;
        self.cap_e_bound < b
            && self.cap_phi_e_bound < b
            && self.cap_f_bound < b
            && self.cap_phi_inv_e_bound.is_none_or(|c| c < b)
            && self.residual_breakpoints == 0.0
            && self.residual <= RESIDUAL_TOL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub phi: Homeo,
    pub depth: usize,
    pub budget: BudgetSchedule,
    pub inverse_family: bool,
    pub grid: usize,
    #[serde(flatten)]
    pub trees: MatchedPartitions,
    pub stages: Vec<Stage>,
    pub ledger: Vec<LedgerRow>,
    pub passed: bool,
    /// Report of a [`verify`] run, when one was attached.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyReport>,
}

/// The three small-children unions of ledger level `n`: odd domain
/// children, their `φ`-images and even range children.
pub fn level_unions(
    phi: &Homeo,
    trees: &MatchedPartitions,
    n: usize,
) -> Result<[IntervalUnion; 3]> {
    let e = trees.domain().stage_e(n - 1)?;
    let phi_e = image_union(phi, &e)?;
    let f = trees.range().stage_f(n - 1)?;
    Ok([e, phi_e, f])
}

/// Runs the full pipeline for `φ`.
pub fn decompose(phi: &Homeo, opts: &DecomposeOptions) -> Result<DecompositionResult> {
    if opts.depth == 0 {
        return Err(Error::Invalid("depth must be at least 1".into()));
    }
    let [a, b] = phi.domain();
    phi.check_orientation(&uniform_grid(a, b, 1000).collect::<Vec<_>>())?;
    let mut domain = match phi.kind() {
        crate::homeo::Kind::Circle => PartitionTree::new_circle(),
        crate::homeo::Kind::Interval => PartitionTree::new_interval(a, b)?,
    };
    let mut level_certs = Vec::with_capacity(opts.depth);
    for n in 0..opts.depth {
        level_certs.push(refine_level(
            phi,
            &mut domain,
            n,
            &opts.budget,
            opts.inverse_family,
        )?);
    }
    let (range, range_certs) = build_range_tree(&domain, &opts.budget)?;
    let trees = MatchedPartitions::new(domain, range)?;
    let [ra, rb] = trees.domain().root();

    let mut stages = Vec::with_capacity(opts.depth + 1);
    for n in 0..=opts.depth {
        let stage = trees.build_stage(n)?;
        let psi = psi_map(phi, &stage.map)?;
        let residual =
            composition_residual(phi, &stage.map, &psi, uniform_grid(ra, rb, opts.grid))?;
        let residual_breakpoints = composition_residual(
            phi,
            &stage.map,
            &psi,
            trees.domain().boundaries(n).into_iter(),
        )?;
        stages.push(Stage {
            n,
            h: Homeo::Pl(stage.map),
            psi,
            cauchy_bound: stage.cauchy_bound,
            residual,
            residual_breakpoints,
        });
    }

    let mut ledger = Vec::with_capacity(opts.depth);
    for n in 1..=opts.depth {
        let [e, phi_e, f] = level_unions(phi, &trees, n)?;
        let (dc, rc, st) = (&level_certs[n - 1], &range_certs[n - 1], &stages[n]);
        let mut row = LedgerRow {
            n,
            budget: opts.budget.budget(n)?,
            fanout: dc.fanout,
            halvings_domain: dc.halvings,
            halvings_range: rc.halvings,
            cap_e_bound: upper_bound_capacity(&e),
            cap_phi_e_bound: upper_bound_capacity(&phi_e),
            cap_f_bound: upper_bound_capacity(&f),
            cap_phi_inv_e_bound: dc.cap_phi_inv_e_bound,
            cauchy: st.cauchy_bound,
            residual: st.residual,
            residual_breakpoints: st.residual_breakpoints,
            cap_e_union_bound: union_capacity_bound(&e),
            cap_phi_e_union_bound: union_capacity_bound(&phi_e),
            cap_f_union_bound: union_capacity_bound(&f),
            pass: false,
        };
        row.pass = row.passes();
        ledger.push(row);
    }
    let passed = ledger.iter().all(|r| r.pass) && stages[0].residual_breakpoints == 0.0;
    Ok(DecompositionResult {
        phi: phi.clone(),
        depth: opts.depth,
        budget: opts.budget.clone(),
        inverse_family: opts.inverse_family,
        grid: opts.grid,
        trees,
        stages,
        ledger,
        passed,
        verify: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub pass: bool,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: &str, n: Option<usize>, pass: bool, detail: impl Into<String>) {
        self.0.push(Check {
            name: name.into(),
            n,
            pass,
            detail: detail.into(),
        });
    }

    /// Records an operation that may fail outright as a failed check.
    fn attempt<T>(&mut self, name: &str, n: Option<usize>, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(name, n, false, e.to_string());
                None
            }
        }
    }
}

/// Estimates the capacity of the (at most 64) largest parts and checks it
/// against the union bound of the whole set; capacity is monotone, so the
/// estimate of a subset may not exceed it beyond the solver tolerance.
fn crosscheck(set: &IntervalUnion) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut parts = set.parts().to_vec();
    parts.sort_by(|p, q| q.length().total_cmp(&p.length()));
    parts.truncate(CROSSCHECK_PARTS);
    let subset = IntervalUnion::normalize(parts)?;
    let est = estimate_capacity(&subset, CROSSCHECK_PANELS)?;
    Ok((est.cap_estimate, union_capacity_bound(set)))
}

/// Checks the largest part's closed-form bound against its estimate.
fn part_crosscheck(set: &IntervalUnion) -> Result<Option<(f64, f64, bool)>> {
    let Some(largest) = set
        .parts()
        .iter()
        .max_by(|p, q| p.length().total_cmp(&q.length()))
    else {
        return Ok(None);
    };
    let single = IntervalUnion::normalize([*largest])?;
    let est = estimate_capacity(&single, CROSSCHECK_PANELS)?.cap_estimate;
    let bound = part_bound(largest);
    let ok = match largest {
        // the segment formula is exact
        Part::Segment(_) => (est - bound).abs() <= DEFAULT_TOL_REL * bound,
        Part::Arc(_) => est <= bound * (1.0 + DEFAULT_TOL_REL),
    };
    Ok(Some((est, bound, ok)))
}

/// Independent re-check of a decomposition result.
///
/// Recomputes every ledger entry from the trees, cross-checks the closed
/// forms against the variational solver, rebuilds each stage map, and
/// checks the factorization, word matching, monotonicity and Cauchy bounds
/// on a uniform grid of `grid + 1` points.
pub fn verify(result: &DecompositionResult, grid: usize) -> VerifyReport {
    let mut c = Checks(Vec::new());
    let trees = &result.trees;
    let phi = &result.phi;
    let [a, b] = trees.domain().root();
    let xs: Vec<f64> = uniform_grid(a, b, grid).collect();

    let domain_violations = trees.domain().validate();
    let range_violations = trees.range().validate();
    c.push(
        "partition_conditions",
        None,
        domain_violations.is_empty() && range_violations.is_empty(),
        format!(
            "{} domain and {} range violations",
            domain_violations.len(),
            range_violations.len()
        ),
    );
    let orientation = phi.check_orientation(&xs);
    c.push(
        "phi_orientation",
        None,
        orientation.is_ok(),
        orientation.err().map(|e| e.to_string()).unwrap_or_default(),
    );
    c.push(
        "depth",
        None,
        result.depth == trees.depth()
            && result.ledger.len() == result.depth
            && result.stages.len() == result.depth + 1,
        format!(
            "depth {}, trees {}, {} ledger rows, {} stages",
            result.depth,
            trees.depth(),
            result.ledger.len(),
            result.stages.len()
        ),
    );

    // (a) ledger rows against the trees
    let mut all_rows_pass = true;
    for row in &result.ledger {
        let n = row.n;
        if n == 0 || n > trees.depth() {
            c.push("ledger_row", Some(n), false, "level out of range");
            all_rows_pass = false;
            continue;
        }
        let Some([e, phi_e, f]) = c.attempt("ledger_row", Some(n), level_unions(phi, trees, n))
        else {
            all_rows_pass = false;
            continue;
        };
        let mut mismatched = Vec::new();
        let mut cmp = |name: &str, recorded: f64, actual: f64| {
            if recorded.to_bits() != actual.to_bits() {
                mismatched.push(format!(
                    "{name}: recorded {recorded:e}, recomputed {actual:e}"
                ));
            }
        };
        cmp("capE_bound", row.cap_e_bound, upper_bound_capacity(&e));
        cmp(
            "cap_phiE_bound",
            row.cap_phi_e_bound,
            upper_bound_capacity(&phi_e),
        );
        cmp("capF_bound", row.cap_f_bound, upper_bound_capacity(&f));
        cmp(
            "capE_union_bound",
            row.cap_e_union_bound,
            union_capacity_bound(&e),
        );
        cmp(
            "cap_phiE_union_bound",
            row.cap_phi_e_union_bound,
            union_capacity_bound(&phi_e),
        );
        cmp(
            "capF_union_bound",
            row.cap_f_union_bound,
            union_capacity_bound(&f),
        );
        cmp("cauchy", row.cauchy, trees.range().max_length(n));
        if let Ok(expected) = result.budget.budget(n) {
            cmp("budget", row.budget, expected);
        }
        if let (Some(recorded), Ok(inv)) = (row.cap_phi_inv_e_bound, phi.invert()) {
            if let Some(pre) = c.attempt("ledger_row", Some(n), image_union(&inv, &e)) {
                cmp("cap_phiinvE_bound", recorded, upper_bound_capacity(&pre));
            }
        }
        if row.fanout != trees.domain().schedule().as_slice()[n] {
            mismatched.push(format!("fanout: recorded {}", row.fanout));
        }
        c.push(
            "ledger_row",
            Some(n),
            mismatched.is_empty(),
            mismatched.join("; "),
        );
        let within = row.passes();
        all_rows_pass &= within && row.pass;
        c.push(
            "budget",
            Some(n),
            within && row.pass,
            format!(
                "capE {:e}, cap_phiE {:e}, capF {:e} vs budget {:e}",
                row.cap_e_bound, row.cap_phi_e_bound, row.cap_f_bound, row.budget
            ),
        );
        for (name, set) in [("E", &e), ("phiE", &phi_e), ("F", &f)] {
            if let Some((est, bound)) = c.attempt("capacity_crosscheck", Some(n), crosscheck(set)) {
                c.push(
                    &format!("capacity_crosscheck_{name}"),
                    Some(n),
                    est <= bound * (1.0 + DEFAULT_TOL_REL),
                    format!("estimate of largest parts {est:e}, union bound {bound:e}"),
                );
            }
            if let Some(Some((est, bound, ok))) =
                c.attempt("part_crosscheck", Some(n), part_crosscheck(set))
            {
                c.push(
                    &format!("part_crosscheck_{name}"),
                    Some(n),
                    ok,
                    format!("largest part: estimate {est:e}, closed form {bound:e}"),
                );
            }
        }
    }

    // (b)–(d) stage maps
    let mut prev_cauchy = f64::INFINITY;
    let last = result.stages.last().and_then(|s| s.h_pl().ok());
    for stage in &result.stages {
        let n = stage.n;
        let Some(rebuilt) = c.attempt("stage_map", Some(n), trees.build_stage(n)) else {
            continue;
        };
        let Some(h) = c.attempt("stage_map", Some(n), stage.h_pl()) else {
            continue;
        };
        c.push(
            "stage_map",
            Some(n),
            *h == rebuilt.map && stage.cauchy_bound.to_bits() == rebuilt.cauchy_bound.to_bits(),
            "hₙ and its Cauchy bound must equal the map rebuilt from the trees",
        );
        if let Some(expected) = c.attempt("psi_map", Some(n), psi_map(phi, h)) {
            c.push(
                "psi_map",
                Some(n),
                stage.psi == expected,
                "ψₙ must equal φ ∘ hₙ⁻¹",
            );
        }
        let grid_res = composition_residual(phi, h, &stage.psi, xs.iter().copied());
        let bp_res =
            composition_residual(phi, h, &stage.psi, trees.domain().boundaries(n).into_iter());
        match (grid_res, bp_res) {
            (Ok(g), Ok(bp)) => c.push(
                "factorization",
                Some(n),
                g <= RESIDUAL_TOL
                    && bp == 0.0
                    && stage.residual_breakpoints == 0.0
                    && stage.residual <= RESIDUAL_TOL,
                format!("grid residual {g:e}, breakpoint residual {bp:e}"),
            ),
            (Err(e), _) | (_, Err(e)) => c.push("factorization", Some(n), false, e.to_string()),
        }
        // (c) every level-k boundary maps to its matching range boundary
        let mut mismatches = 0usize;
        for k in 0..=n.min(trees.depth()) {
            for (x, y) in trees
                .domain()
                .boundaries(k)
                .into_iter()
                .zip(trees.range().boundaries(k))
            {
                if h.eval(x).map(|v| v != y).unwrap_or(true) {
                    mismatches += 1;
                }
            }
        }
        c.push(
            "word_matching",
            Some(n),
            mismatches == 0,
            format!("{mismatches} boundary mismatches"),
        );
        // (d) orientation of hₙ and ψₙ
        let h_ok = h.ys().windows(2).all(|w| w[1] > w[0]);
        let psi_ok = stage.psi.check_factor_orientation(grid).is_ok();
        c.push("monotonicity", Some(n), h_ok && psi_ok, "");
        // Cauchy bound against the deepest stage
        if let Some(deepest) = last {
            let mut sup: f64 = 0.0;
            for &x in &xs {
                if let (Ok(u), Ok(v)) = (h.eval(x), deepest.eval(x)) {
                    sup = sup.max((u - v).abs());
                }
            }
            c.push(
                "cauchy",
                Some(n),
                sup <= stage.cauchy_bound && stage.cauchy_bound <= prev_cauchy,
                format!(
                    "sup |hₙ - h_last| = {sup:e}, bound {:e}",
                    stage.cauchy_bound
                ),
            );
        }
        prev_cauchy = stage.cauchy_bound;
    }
    c.push(
        "passed_flag",
        None,
        result.passed == all_rows_pass,
        format!("recorded {}, recomputed {all_rows_pass}", result.passed),
    );
    let passed = c.0.iter().all(|x| x.pass) && result.passed;
    VerifyReport {
        checks: c.0,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(depth: usize) -> DecomposeOptions {
        DecomposeOptions {
            depth,
            grid: 2000,
            ..DecomposeOptions::default()
        }
    }

    #[test]
    fn budget_schedule() {
        assert_eq!(BudgetSchedule::Pow2.budget(3).unwrap(), 0.125);
        let c = BudgetSchedule::custom(vec![0.4, 0.1]).unwrap();
        assert_eq!(c.budget(2).unwrap(), 0.1);
        assert!(matches!(c.budget(3), Err(Error::Depth { .. })));
        assert!(BudgetSchedule::custom(vec![0.1, 0.2]).is_err());
        assert_eq!(
            serde_json::to_string(&BudgetSchedule::Pow2).unwrap(),
            "\"pow2\""
        );
        let back: BudgetSchedule = serde_json::from_str("[0.5,0.25]").unwrap();
        assert_eq!(back, BudgetSchedule::Custom(vec![0.5, 0.25]));
    }

    #[test]
    fn first_level_identity() {
        let mut t = PartitionTree::new_interval(0.0, 1.0).unwrap();
        let cert =
            refine_level(&Homeo::identity(), &mut t, 0, &BudgetSchedule::Pow2, false).unwrap();
        assert_eq!(cert.fanout, 2);
        assert_eq!(cert.cap_e_bound, cert.cap_phi_e_bound);
        assert!(cert.cap_e_bound < 0.5);
        // one halving gives a half-length odd child, bound 1/8
        assert_eq!(cert.halvings, 1);
        assert_eq!(t.level(1), &[[0.0, 0.5], [0.5, 1.0]]);
    }

    #[test]
    fn second_level_power() {
        let phi = Homeo::power(2.0).unwrap();
        let mut t = PartitionTree::new_interval(0.0, 1.0).unwrap();
        refine_level(&phi, &mut t, 0, &BudgetSchedule::Pow2, false).unwrap();
        let cert = refine_level(&phi, &mut t, 1, &BudgetSchedule::Pow2, false).unwrap();
        let e = t.stage_e(1).unwrap();
        let sum: f64 = e.parts().iter().map(|p| p.length() / 4.0).sum();
        let image_sum: f64 = e
            .parts()
            .iter()
            .map(|p| match p {
                Part::Segment(s) => (s.b() * s.b() - s.a() * s.a()) / 4.0,
                Part::Arc(_) => unreachable!(),
            })
            .sum();
        assert!(sum < 0.25 && image_sum < 0.25);
        assert!(cert.cap_e_bound < 0.25 && cert.cap_phi_e_bound < 0.25);
        // uniform fan-out
        assert_eq!(t.level(2).len(), 2 * cert.fanout);
        assert!(t.validate().is_empty());
    }

    #[test]
    fn range_tree_single_parent() {
        let t = PartitionTree::dyadic(0.0, 1.0, 1).unwrap();
        let (r, certs) = build_range_tree(&t, &BudgetSchedule::Pow2).unwrap();
        assert!(certs[0].cap_f_bound < 0.5);
        assert_eq!(r.level(1)[0][0], 0.0);
        assert!(r.level(1)[0][1] - r.level(1)[0][0] < 2.0);
        let f = r.stage_f(0).unwrap();
        assert!(upper_bound_capacity(&f) < 0.5);
    }

    #[test]
    fn identity_pipeline() {
        let res = decompose(&Homeo::identity(), &opts(4)).unwrap();
        assert!(res.passed, "{:?}", res.ledger);
        for st in &res.stages {
            // ψₙ = hₙ⁻¹ exactly, so the round trip only sees interpolation rounding
            let h = st.h_pl().unwrap();
            assert_eq!(st.psi, Homeo::Pl(h.invert()));
            for x in uniform_grid(0.0, 1.0, 500) {
                assert!((st.psi.eval(st.h.eval(x).unwrap()).unwrap() - x).abs() <= 1e-10);
            }
        }
        let report = verify(&res, 1000);
        assert!(report.passed, "{:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn tampered_ledger_is_flagged() {
        let mut res = decompose(&Homeo::power(2.0).unwrap(), &opts(3)).unwrap();
        assert!(verify(&res, 500).passed);
        res.ledger[1].cap_e_bound *= 0.5;
        let report = verify(&res, 500);
        assert!(!report.passed);
        assert!(report
            .failures()
            .any(|c| c.name == "ledger_row" && c.n == Some(2)));
    }

    #[test]
    fn tampered_stage_is_flagged() {
        let mut res = decompose(&Homeo::identity(), &opts(3)).unwrap();
        let h = res.stages[2].h_pl().unwrap().clone();
        let mut ys = h.ys().to_vec();
        ys[1] = 0.5 * (ys[0] + ys[1]);
        res.stages[2].h = Homeo::Pl(PLHomeo::new(h.kind(), h.xs().to_vec(), ys).unwrap());
        let report = verify(&res, 500);
        assert!(report.failures().any(|c| c.name == "stage_map"));
        assert!(report.failures().any(|c| c.name == "word_matching"));
    }

    #[test]
    fn circle_pipeline() {
        let phi = Homeo::mobius(0.5, 0.0, 0.0).unwrap();
        let res = decompose(&phi, &opts(4)).unwrap();
        assert!(res.passed, "{:?}", res.ledger);
        assert!(res.trees.domain().stage_e(2).unwrap().is_arcs());
        assert!(verify(&res, 1000).passed);
    }

    #[test]
    fn json_round_trip() {
        let res = decompose(&Homeo::power(0.4).unwrap(), &opts(3)).unwrap();
        let s = serde_json::to_string(&res).unwrap();
        let back: DecompositionResult = serde_json::from_str(&s).unwrap();
        assert_eq!(back, res);
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }

    #[test]
    fn inverse_family_is_budgeted() {
        let o = DecomposeOptions {
            inverse_family: true,
            ..opts(3)
        };
        let res = decompose(&Homeo::power(3.0).unwrap(), &o).unwrap();
        assert!(res.passed);
        for row in &res.ledger {
            assert!(row.cap_phi_inv_e_bound.unwrap() < row.budget);
        }
        assert!(verify(&res, 500).passed);
    }

    #[test]
    fn orientation_reversal_rejected() {
        let r = serde_json::from_str::<Homeo>(r#"{"kind":"pl","points":[[0,1],[1,0]]}"#);
        assert!(r.is_err());
        assert!(decompose(&Homeo::identity(), &opts(0)).is_err());
    }
}
