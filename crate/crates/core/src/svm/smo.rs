//! Platt-style SMO for the soft-margin dual
//!
//! ```text
//! maximize   sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//! subject to 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! The decision function is `f(x) = sum_i a_i y_i K(x_i, x) + b` and the
//! solver keeps the error `E_i = f(x_i) - y_i` of every training point up to
//! date. The second index of each pair is chosen by max `|E_1 - E_2|` over
//! unbounded multipliers, falling back to scans of the unbounded and then all
//! points in a seeded random order.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::svm::cache::{KernelCache, KernelCachePolicy};
use crate::svm::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoConfig {
    /// Box constraint.
    pub c: f64,
    /// KKT violation tolerated at termination, in units of the margin.
    pub kkt_tol: f64,
    /// Upper bound on sweeps over the training set.
    pub max_passes: usize,
    /// Smallest multiplier change that counts as progress; also the snap distance to the box.
    pub value_eps: f64,
    pub seed: u64,
    pub cache: KernelCachePolicy,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self { c: 1.0, kkt_tol: 1e-3, max_passes: 1000, value_eps: 1e-12, seed: 0, cache: KernelCachePolicy::default() }
    }
}

impl SmoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.into()));
        if !(self.c.is_finite() && self.c > 0.0) {
            return bad("C must be positive and finite");
        }
        if !(self.kkt_tol.is_finite() && self.kkt_tol > 0.0) {
            return bad("kkt_tol must be positive");
        }
        if !(self.value_eps.is_finite() && self.value_eps > 0.0) {
            return bad("value_eps must be positive");
        }
        if self.max_passes == 0 {
            return bad("max_passes must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub passes: usize,
    pub steps: usize,
}

/// Dual objective evaluated directly from the kernel function.
pub fn dual_objective(alpha: &[f64], y: &[f64], x: &FeatureMatrix, gamma: f64) -> f64 {
    let mut quad = 0.0;
    for i in 0..alpha.len() {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..alpha.len() {
            if alpha[j] == 0.0 {
                continue;
            }
            quad += alpha[i] * alpha[j] * y[i] * y[j] * super::rbf_unchecked(x.row(i), x.row(j), gamma);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

struct Solver<'a> {
    k: KernelCache<'a>,
    y: &'a [f64],
    alpha: Vec<f64>,
    err: Vec<f64>,
    b: f64,
    c: f64,
    tol: f64,
    eps: f64,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    steps: usize,
}

impl Solver<'_> {
    #[inline]
    fn is_free(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    #[inline]
    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.err[i] * self.y[i];
        (r < -self.tol && self.alpha[i] < self.c) || (r > self.tol && self.alpha[i] > 0.0)
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (c, eps) = (self.c, self.eps);
        let (alph1, alph2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.err[i1], self.err[i2]);
        let s = y1 * y2;

        let (lo, hi) = if y1 != y2 {
            ((alph2 - alph1).max(0.0), (c + alph2 - alph1).min(c))
        } else {
            ((alph1 + alph2 - c).max(0.0), (alph1 + alph2).min(c))
        };
        if lo >= hi {
            return false;
        }

        let k11 = self.k.entry(i1, i1);
        let k12 = self.k.entry(i1, i2);
        let k22 = self.k.entry(i2, i2);
        let eta = k11 + k22 - 2.0 * k12;

        let mut a2 = if eta > 0.0 {
            (alph2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // Objective (negated dual) at both ends of the feasible segment.
            let f1 = y1 * (e1 - self.b) - alph1 * k11 - s * alph2 * k12;
            let f2 = y2 * (e2 - self.b) - s * alph1 * k12 - alph2 * k22;
            let l1 = alph1 + s * (alph2 - lo);
            let h1 = alph1 + s * (alph2 - hi);
            let obj =
                |a1: f64, a2: f64| a1 * f1 + a2 * f2 + 0.5 * a1 * a1 * k11 + 0.5 * a2 * a2 * k22 + s * a1 * a2 * k12;
            let (lobj, hobj) = (obj(l1, lo), obj(h1, hi));
            if lobj < hobj - eps {
                lo
            } else if lobj > hobj + eps {
                hi
            } else {
                alph2
            }
        };
        if a2 < eps {
            a2 = 0.0;
        } else if a2 > c - eps {
            a2 = c;
        }
        if (a2 - alph2).abs() < eps * (a2 + alph2 + eps) {
            return false;
        }
        let mut a1 = alph1 + s * (alph2 - a2);
        if a1 < eps {
            a1 = 0.0;
        } else if a1 > c - eps {
            a1 = c;
        }

        let d1 = y1 * (a1 - alph1);
        let d2 = y2 * (a2 - alph2);
        let b1 = self.b - e1 - d1 * k11 - d2 * k12;
        let b2 = self.b - e2 - d1 * k12 - d2 * k22;
        let b_new = if a1 > 0.0 && a1 < c {
            b1
        } else if a2 > 0.0 && a2 < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = b_new - self.b;

        let (row1, row2) = self.k.rows(i1, i2);
        for ((e, k1), k2) in self.err.iter_mut().zip(row1).zip(row2) {
            *e += d1 * k1 + d2 * k2 + db;
        }
        self.alpha[i1] = a1;
        self.alpha[i2] = a2;
        self.b = b_new;
        self.steps += 1;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        if !self.violates_kkt(i2) {
            return false;
        }
        let e2 = self.err[i2];
        let mut free: Vec<usize> = (0..self.alpha.len()).filter(|&i| self.is_free(i)).collect();

        if free.len() > 1 {
            let best = free
                .iter()
                .copied()
                .filter(|&i| i != i2)
                .max_by(|&a, &b| (self.err[a] - e2).abs().total_cmp(&(self.err[b] - e2).abs()));
            if let Some(i1) = best {
                if self.take_step(i1, i2) {
                    return true;
                }
            }
        }

        free.shuffle(&mut self.rng);
        for i1 in free {
            if self.take_step(i1, i2) {
                return true;
            }
        }

        let mut order = core::mem::take(&mut self.order);
        order.shuffle(&mut self.rng);
        let mut stepped = false;
        for &i1 in &order {
            if self.take_step(i1, i2) {
                stepped = true;
                break;
            }
        }
        self.order = order;
        stepped
    }

    /// Bias from the average over unbounded multipliers, else the midpoint of
    /// the interval allowed by the bounded ones.
    fn settled_bias(&self) -> f64 {
        let n = self.alpha.len();
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for i in 0..n {
            // f(x_i) without bias
            let v = self.err[i] + self.y[i] - self.b;
            let needed = self.y[i] - v;
            if self.is_free(i) {
                sum += needed;
                count += 1;
            } else if (self.alpha[i] == 0.0) == (self.y[i] > 0.0) {
                // y f >= 1 for a positive at zero, or y f <= 1 for a negative at C
                lower = lower.max(needed);
            } else {
                upper = upper.min(needed);
            }
        }
        if count > 0 {
            sum / count as f64
        } else if lower.is_finite() && upper.is_finite() {
            0.5 * (lower + upper)
        } else if lower.is_finite() {
            lower
        } else if upper.is_finite() {
            upper
        } else {
            self.b
        }
    }

    fn rebias(&mut self, b: f64) {
        let db = b - self.b;
        self.err.iter_mut().for_each(|e| *e += db);
        self.b = b;
    }
}

/// Solves the dual on already-standardized rows `x` with labels `y ∈ {+1, -1}`.
pub fn solve_dual(x: &FeatureMatrix, y: &[f64], gamma: f64, cfg: &SmoConfig) -> Result<DualSolution> {
    cfg.validate()?;
    let n = x.rows();
    if y.len() != n {
        return Err(Error::shape(n, y.len()));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::DegenerateLabels);
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerics("training features"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter("gamma must be positive".into()));
    }

    let mut s = Solver {
        k: KernelCache::new(x, gamma, cfg.cache),
        y,
        alpha: alloc::vec![0.0; n],
        err: y.iter().map(|v| -v).collect(),
        b: 0.0,
        c: cfg.c,
        tol: cfg.kkt_tol,
        eps: cfg.value_eps,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        order: (0..n).collect(),
        steps: 0,
    };

    let mut examine_all = true;
    let mut passes = 0;
    let mut converged = false;
    while passes < cfg.max_passes {
        let mut changed = 0usize;
        for i in 0..n {
            if (examine_all || s.is_free(i)) && s.examine(i) {
                changed += 1;
            }
        }
        passes += 1;

        if examine_all && changed == 0 {
            // Every point satisfies KKT for the running bias; confirm it still
            // does for the settled one, else keep optimizing from there.
            let b = s.settled_bias();
            s.rebias(b);
            if (0..n).all(|i| !s.violates_kkt(i)) {
                converged = true;
                break;
            }
        } else if examine_all {
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }
    if !converged {
        let b = s.settled_bias();
        s.rebias(b);
    }

    Ok(DualSolution { alpha: s.alpha, bias: s.b, converged, passes, steps: s.steps })
}
