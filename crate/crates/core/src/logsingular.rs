//! Stage maps between two matched partition trees.
//!
//! Given partitions `{I_w}` of a domain and `{J_w}` of a range on the same
//! fan-out schedule, the stage map `hₙ` is the piecewise-linear map sending
//! every level-`n` boundary of the domain to the matching range boundary.
//! It maps each `I_w`, `|w| ≤ n`, exactly onto `J_w`, so every later stage
//! stays within `max |J_w|` of it.

use serde::{Deserialize, Serialize};

use crate::addresses::PartitionTree;
use crate::capacity::{union_capacity_bound, upper_bound_capacity};
use crate::decompose::BudgetSchedule;
use crate::error::{Error, Result};
use crate::homeo::{Kind, PLHomeo};

/// A domain tree and a range tree with identical schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreesRepr", into = "TreesRepr")]
pub struct MatchedPartitions {
    domain: PartitionTree,
    range: PartitionTree,
    shrinking: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TreesRepr {
    domain_tree: PartitionTree,
    range_tree: PartitionTree,
}

impl TryFrom<TreesRepr> for MatchedPartitions {
    type Error = Error;
    fn try_from(r: TreesRepr) -> Result<Self> {
        MatchedPartitions::new(r.domain_tree, r.range_tree)
    }
}

impl From<MatchedPartitions> for TreesRepr {
    fn from(m: MatchedPartitions) -> Self {
        TreesRepr {
            domain_tree: m.domain,
            range_tree: m.range,
        }
    }
}

impl MatchedPartitions {
    /// Checks schedules, both trees' partition conditions and that
    /// `max_w (|I_w| + |J_w|)` strictly decreases with the level.
    pub fn new(domain: PartitionTree, range: PartitionTree) -> Result<Self> {
        if domain.schedule() != range.schedule() {
            return Err(Error::Invalid(
                "domain and range trees have different schedules".into(),
            ));
        }
        if domain.is_circle() != range.is_circle() {
            return Err(Error::Invalid(
                "domain and range trees live on different spaces".into(),
            ));
        }
        for (name, tree) in [("domain", &domain), ("range", &range)] {
            if let Some(v) = tree.validate().first() {
                return Err(Error::Invalid(format!(
                    "{name} tree violates {:?} at level {}: {}",
                    v.condition, v.level, v.detail
                )));
            }
        }
        let shrinking: Vec<f64> = (0..=domain.depth())
            .map(|n| {
                domain
                    .level(n)
                    .iter()
                    .zip(range.level(n))
                    .map(|(i, j)| (i[1] - i[0]) + (j[1] - j[0]))
                    .fold(0.0, f64::max)
            })
            .collect();
        if let Some(n) = (1..shrinking.len()).find(|&n| shrinking[n] >= shrinking[n - 1]) {
            return Err(Error::Invalid(format!(
                "partitions do not shrink at level {n}: {} ≥ {}",
                shrinking[n],
                shrinking[n - 1]
            )));
        }
        Ok(MatchedPartitions {
            domain,
            range,
            shrinking,
        })
    }

    pub fn domain(&self) -> &PartitionTree {
        &self.domain
    }

    pub fn range(&self) -> &PartitionTree {
        &self.range
    }

    pub fn depth(&self) -> usize {
        self.domain.depth()
    }

    /// `max_w (|I_w| + |J_w|)` per level.
    pub fn shrinking_witness(&self) -> &[f64] {
        &self.shrinking
    }

    fn check_depth(&self, n: usize) -> Result<()> {
        if n > self.depth() {
            return Err(Error::Depth {
                requested: n,
                available: self.depth(),
            });
        }
        Ok(())
    }

    /// Kind of the stage maps: circle maps when both roots are the whole
    /// circle, interval maps on lift coordinates otherwise.
    fn map_kind(&self) -> Kind {
        let span = |t: &PartitionTree| t.root()[1] - t.root()[0];
        if self.domain.is_circle() && span(&self.domain) == 1.0 && span(&self.range) == 1.0 {
            Kind::Circle
        } else {
            Kind::Interval
        }
    }

    /// The stage map `hₙ`.
    pub fn build_stage(&self, n: usize) -> Result<StageMap> {
        self.check_depth(n)?;
        let map = PLHomeo::new(
            self.map_kind(),
            self.domain.boundaries(n),
            self.range.boundaries(n),
        )?;
        Ok(StageMap {
            n,
            map,
            cauchy_bound: self.range.max_length(n),
        })
    }

    /// Compares `sup |hₙ - hₘ|` on a uniform grid with the bound
    /// `max |J_w|` over level-`n` words.
    pub fn cauchy_certificate(&self, n: usize, m: usize, grid: usize) -> Result<CauchyCheck> {
        self.check_depth(m)?;
        if n > m {
            return Err(Error::Invalid(format!("need n ≤ m, got {n} > {m}")));
        }
        let hn = self.build_stage(n)?;
        let hm = self.build_stage(m)?;
        let [a, b] = self.domain.root();
        let mut observed: f64 = 0.0;
        for x in uniform_grid(a, b, grid) {
            observed = observed.max((hn.map.eval(x)? - hm.map.eval(x)?).abs());
        }
        Ok(CauchyCheck {
            n,
            m,
            bound: hn.cauchy_bound,
            observed,
            pass: observed <= hn.cauchy_bound,
        })
    }

    /// Budget check of the small-children unions: for `n = 1..=depth`,
    /// the odd children of level `n` in the domain and the even children in
    /// the range, against `budget(n)`.
    pub fn certify_log_singular(&self, budget: &BudgetSchedule) -> Result<LogSingularReport> {
        let mut rows = Vec::with_capacity(self.depth());
        for n in 1..=self.depth() {
            let e = self.domain.stage_e(n - 1)?;
            let f = self.range.stage_f(n - 1)?;
            let b = budget.budget(n)?;
            let cap_e_bound = upper_bound_capacity(&e);
            let cap_f_bound = upper_bound_capacity(&f);
            rows.push(CertRow {
                n,
                budget: b,
                cap_e_bound,
                cap_f_bound,
                cap_e_union_bound: union_capacity_bound(&e),
                cap_f_union_bound: union_capacity_bound(&f),
                pass: cap_e_bound < b && cap_f_bound < b,
            });
        }
        let passed = rows.iter().all(|r| r.pass);
        Ok(LogSingularReport { rows, passed })
    }
}

/// `count + 1` equally spaced points from `a` to `b`.
pub fn uniform_grid(a: f64, b: f64, count: usize) -> impl Iterator<Item = f64> {
    let count = count.max(1);
    (0..=count).map(move |i| {
        if i == count {
            b
        } else {
            a + (b - a) * (i as f64 / count as f64)
        }
    })
}

/// The stage map `hₙ` and the uniform distance bound to every later stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageMap {
    pub n: usize,
    pub map: PLHomeo,
    pub cauchy_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyCheck {
    pub n: usize,
    pub m: usize,
    pub bound: f64,
    pub observed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertRow {
    pub n: usize,
    pub budget: f64,
    #[serde(rename = "capE_bound")]
    pub cap_e_bound: f64,
    #[serde(rename = "capF_bound")]
    pub cap_f_bound: f64,
    #[serde(rename = "capE_union_bound")]
    pub cap_e_union_bound: f64,
    #[serde(rename = "capF_union_bound")]
    pub cap_f_union_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSingularReport {
    pub rows: Vec<CertRow>,
    pub passed: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addresses::Word;
    use crate::capacity::estimate_capacity;

    fn dyadic(depth: usize) -> PartitionTree {
        PartitionTree::dyadic(0.0, 1.0, depth).unwrap()
    }

    #[test]
    fn stage_zero_is_linear_bijection() {
        let d = PartitionTree::new_interval(0.0, 1.0).unwrap();
        let r = PartitionTree::new_interval(2.0, 5.0).unwrap();
        let mp = MatchedPartitions::new(d, r).unwrap();
        let h0 = mp.build_stage(0).unwrap();
        assert_eq!(h0.map.points(), vec![[0.0, 2.0], [1.0, 5.0]]);
        assert_eq!(h0.map.eval(0.5).unwrap(), 3.5);
    }

    #[test]
    fn identical_trees_give_identity() {
        let mp = MatchedPartitions::new(dyadic(4), dyadic(4)).unwrap();
        for n in 0..=4 {
            let h = mp.build_stage(n).unwrap();
            for x in uniform_grid(0.0, 1.0, 100) {
                assert_eq!(h.map.eval(x).unwrap(), x);
            }
            let c = mp.cauchy_certificate(n, 4, 1000).unwrap();
            assert_eq!(c.observed, 0.0);
            assert_eq!(c.bound, 0.5f64.powi(n as i32));
        }
    }

    #[test]
    fn forced_breakpoint() {
        let mut r = PartitionTree::new_interval(0.0, 1.0).unwrap();
        r.push_level(2, vec![vec![0.9]]).unwrap();
        let mp = MatchedPartitions::new(dyadic(1), r).unwrap();
        let h1 = mp.build_stage(1).unwrap();
        assert!(h1.map.points().contains(&[0.5, 0.9]));
        assert!(matches!(mp.build_stage(2), Err(Error::Depth { .. })));
    }

    #[test]
    fn word_matching_is_exact() {
        let mut d = PartitionTree::new_interval(0.0, 1.0).unwrap();
        let mut r = PartitionTree::new_interval(0.0, 1.0).unwrap();
        d.push_level(2, vec![vec![0.3]]).unwrap();
        r.push_level(2, vec![vec![0.7]]).unwrap();
        d.push_level(4, vec![vec![0.1, 0.2, 0.25], vec![0.4, 0.8, 0.9]])
            .unwrap();
        r.push_level(4, vec![vec![0.05, 0.6, 0.65], vec![0.71, 0.75, 0.99]])
            .unwrap();
        let mp = MatchedPartitions::new(d, r).unwrap();
        let h2 = mp.build_stage(2).unwrap();
        for n in 0..=2 {
            for k in 0..mp.domain().level(n).len() {
                let w: Word = mp.domain().word_at(n, k);
                let [a, b] = mp.domain().interval(&w).unwrap();
                let [c, e] = mp.range().interval(&w).unwrap();
                assert_eq!(h2.map.eval(a).unwrap(), c);
                assert_eq!(h2.map.eval(b).unwrap(), e);
            }
        }
        let c = mp.cauchy_certificate(1, 2, 2000).unwrap();
        assert!(c.pass && c.observed > 0.0);
    }

    #[test]
    fn dyadic_trees_fail_the_budget() {
        let mp = MatchedPartitions::new(dyadic(6), dyadic(6)).unwrap();
        let report = mp.certify_log_singular(&BudgetSchedule::Pow2).unwrap();
        assert!(!report.passed);
        for row in &report.rows {
            // 2^(n-1) odd children of length 2^-n
            assert_eq!(row.cap_e_bound, 0.125);
            assert_eq!(row.pass, row.n <= 2);
        }
        // not an artifact of a loose bound: the estimated capacity of the
        // odd children stays far above the budget
        for n in 3..=5 {
            let est = estimate_capacity(&mp.domain().stage_e(n - 1).unwrap(), 256).unwrap();
            assert!(est.cap_estimate > 0.2, "level {n}: {}", est.cap_estimate);
        }
    }

    #[test]
    fn depth_zero_is_vacuous() {
        let t = PartitionTree::new_interval(0.0, 1.0).unwrap();
        let mp = MatchedPartitions::new(t.clone(), t).unwrap();
        assert!(
            mp.certify_log_singular(&BudgetSchedule::Pow2)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn rejects_non_shrinking_or_mismatched() {
        let mut d = dyadic(1);
        d.extend_dyadic(1).unwrap();
        assert!(MatchedPartitions::new(d, dyadic(1)).is_err());
        // a fan-out of one repeats the parent, so nothing shrinks
        let mut d = PartitionTree::new_interval(0.0, 1.0).unwrap();
        d.push_level(1, vec![vec![]]).unwrap();
        assert!(MatchedPartitions::new(d.clone(), d).is_err());
    }
}
