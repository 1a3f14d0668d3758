//! Composite Gauss–Legendre quadrature with refinement, breakpoints and
//! endpoint grading, plus a nested (double) integral driver.
//!
//! Each panel is integrated with the `base_rule_order`-point rule; the panel's
//! error is estimated against the rule of half that order. Refinement passes
//! split every panel whose estimate exceeds its share of the tolerance:
//! interior panels are bisected, panels touching an end of the integration
//! range are replaced by a geometric cascade (ratio 1/4) so that integrable
//! endpoint singularities are resolved. Panels are never made narrower than
//! `1e-12 * span`, which keeps every node strictly inside the range.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre points per panel.
    pub base_rule_order: usize,
    pub initial_panels: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of refinement passes.
    pub max_doublings: usize,
    pub breakpoints: Vec<f64>,
    /// Levels of geometric grading added when an end panel is refined.
    pub grading_levels: usize,
    pub grading_ratio: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            base_rule_order: 10,
            initial_panels: 8,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_doublings: 10,
            breakpoints: Vec::new(),
            grading_levels: 6,
            grading_ratio: 0.25,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.base_rule_order < 2 {
            return Err(Error::Invalid(format!(
                "base rule order must be >= 2, got {}",
                self.base_rule_order
            )));
        }
        if self.initial_panels == 0 {
            return Err(Error::Invalid("initial panel count must be positive".into()));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol >= 0.0) {
            return Err(Error::Invalid("the relative tolerance must be positive and the absolute one nonnegative".into()));
        }
        if !(self.grading_ratio > 0.0 && self.grading_ratio < 1.0) {
            return Err(Error::Invalid("grading ratio must lie in (0, 1)".into()));
        }
        if self.breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::Invalid("breakpoints must be finite".into()));
        }
        Ok(())
    }

    /// Same spec with both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self { rel_tol: self.rel_tol / factor, abs_tol: self.abs_tol / factor, ..self.clone() }
    }

    /// Same spec judged by relative error alone, for integrands that cannot
    /// cancel.
    pub fn relative_only(&self) -> Self {
        Self { abs_tol: 0.0, ..self.clone() }
    }

    pub fn with_tolerance(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_breakpoints<I: IntoIterator<Item = f64>>(mut self, extra: I) -> Self {
        self.breakpoints.extend(extra);
        self.breakpoints.sort_by(f64::total_cmp);
        self.breakpoints.dedup();
        self
    }

    /// Quadrature nodes in the initial layout over `[lo, hi]`.
    pub fn initial_node_count(&self, lo: f64, hi: f64) -> usize {
        let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let inner = self.breakpoints.iter().filter(|&&p| p > a && p < b).count();
        (inner + 1) * self.initial_panels * self.base_rule_order
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub panels_used: usize,
    pub converged: bool,
}

impl IntegralResult {
    fn zero() -> Self {
        Self { value: 0.0, error_estimate: 0.0, panels_used: 0, converged: true }
    }
}

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// The n-point Gauss–Legendre rule (Newton iteration on `P_n`), cached.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static RULES: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = RULES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard.entry(n).or_insert_with(|| Arc::new(compute_rule(n))).clone()
}

fn compute_rule(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GaussRule { nodes, weights }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    aux: f64,
    error: f64,
    touches_lo: bool,
    touches_hi: bool,
}

struct Layout<'r> {
    fine: &'r GaussRule,
    coarse: &'r GaussRule,
    min_width: f64,
}

impl Layout<'_> {
    /// Value, auxiliary integral and error estimate on one panel.
    fn panel<F>(&self, f: &F, lo: f64, hi: f64, touches: (bool, bool)) -> Result<Panel>
    where
        F: Fn(f64) -> Result<(f64, f64)>,
    {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let eval = |rule: &GaussRule, with_aux: bool| -> Result<(f64, f64)> {
            let (mut v, mut a) = (0.0, 0.0);
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                let x = mid + half * z;
                let (fx, ax) = f(x)?;
                if !fx.is_finite() {
                    return Err(Error::Evaluation(format!("integrand is {fx} at x = {x}")));
                }
                v += w * fx;
                if with_aux {
                    a += w * ax.abs();
                }
            }
            Ok((v * half, a * half))
        };
        let (value, aux) = eval(self.fine, true)?;
        let (rough, _) = eval(self.coarse, false)?;
        Ok(Panel {
            lo,
            hi,
            value,
            aux,
            error: (value - rough).abs(),
            touches_lo: touches.0,
            touches_hi: touches.1,
        })
    }

    /// Splits a panel: geometric cascade toward a touched cut, bisection
    /// otherwise. Returns `None` when the panel is already at minimum width.
    fn split(&self, p: &Panel, spec: &QuadratureSpec) -> Option<Vec<(f64, f64, bool, bool)>> {
        let w = p.hi - p.lo;
        if w <= 2.0 * self.min_width {
            return None;
        }
        if p.touches_lo || p.touches_hi {
            let mut cuts = vec![0.0];
            let mut frac = 1.0;
            for _ in 0..spec.grading_levels.max(1) {
                frac *= spec.grading_ratio;
                if frac * w < self.min_width {
                    break;
                }
                cuts.push(frac);
            }
            cuts.push(1.0);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            // cuts measured from the touched end
            let pieces: Vec<(f64, f64, bool, bool)> = cuts
                .windows(2)
                .map(|c| {
                    if p.touches_lo {
                        (p.lo + c[0] * w, p.lo + c[1] * w, c[0] == 0.0, false)
                    } else {
                        (p.hi - c[1] * w, p.hi - c[0] * w, false, c[0] == 0.0)
                    }
                })
                .map(|(a, b, tl, th)| {
                    // a panel touching both ends (single panel range) keeps both flags
                    (a, b, tl || (p.touches_lo && a == p.lo), th || (p.touches_hi && b == p.hi))
                })
                .collect();
            if pieces.len() > 1 {
                return Some(pieces);
            }
        }
        let m = 0.5 * (p.lo + p.hi);
        Some(vec![(p.lo, m, p.touches_lo, false), (m, p.hi, false, p.touches_hi)])
    }
}

/// Oriented integral of `f` over `[lo, hi]`.
pub fn integrate<F>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<IntegralResult>
where
    F: Fn(f64) -> Result<f64>,
{
    let (result, _) = integrate_with_aux(|x| Ok((f(x)?, 0.0)), lo, hi, spec)?;
    Ok(result)
}

/// Integrates `f` while carrying a second integrand whose absolute value is
/// integrated with the same rule on the final panels.
fn integrate_with_aux<F>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<(IntegralResult, f64)>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    spec.validate()?;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!("integration limits must be finite: [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok((IntegralResult::zero(), 0.0));
    }
    let (a, b, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
    let span = b - a;

    let fine = gauss_legendre(spec.base_rule_order);
    let coarse = gauss_legendre((spec.base_rule_order / 2).max(1));
    let layout = Layout { fine: &fine, coarse: &coarse, min_width: 1e-12 * span };

    let mut cuts = vec![a];
    cuts.extend(spec.breakpoints.iter().copied().filter(|&p| p > a && p < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut panels = Vec::new();
    for seg in cuts.windows(2) {
        let m = spec.initial_panels;
        for k in 0..m {
            let p_lo = if k == 0 { seg[0] } else { seg[0] + (seg[1] - seg[0]) * k as f64 / m as f64 };
            let p_hi = if k + 1 == m { seg[1] } else { seg[0] + (seg[1] - seg[0]) * (k + 1) as f64 / m as f64 };
            panels.push(layout.panel(&f, p_lo, p_hi, (k == 0, k + 1 == m))?);
        }
    }

    let totals = |ps: &[Panel]| {
        ps.iter().fold((0.0, 0.0, 0.0), |(v, e, x), p| (v + p.value, e + p.error, x + p.aux))
    };
    let mut pass = 0;
    loop {
        let (value, error, _) = totals(&panels);
        let tol = spec.abs_tol.max(spec.rel_tol * value.abs());
        if error <= tol || pass >= spec.max_doublings {
            break;
        }
        let share = tol / panels.len() as f64;
        let mut next = Vec::with_capacity(panels.len() * 2);
        let mut refined = false;
        for p in &panels {
            if p.error > share {
                if let Some(pieces) = layout.split(p, spec) {
                    for (lo_p, hi_p, tl, th) in pieces {
                        next.push(layout.panel(&f, lo_p, hi_p, (tl, th))?);
                    }
                    refined = true;
                    continue;
                }
            }
            next.push(*p);
        }
        panels = next;
        pass += 1;
        if !refined {
            break;
        }
    }

    let (value, error, aux) = totals(&panels);
    let tol = spec.abs_tol.max(spec.rel_tol * value.abs());
    Ok((
        IntegralResult {
            value: sign * value,
            error_estimate: error,
            panels_used: panels.len(),
            converged: error <= tol,
        },
        aux,
    ))
}

/// `int_lo^hi combine(s, int_{l(s)}^{h(s)} inner(s, t) dt) ds`.
///
/// Inner integrals use `spec` tightened tenfold and are memoised by the exact
/// outer node. The returned error estimate adds, to the outer estimate, the
/// integral of the inner errors propagated through `combine`. If any inner
/// integral fails to converge the result is flagged but still returned.
pub fn integrate_nested<L, I, C>(
    inner_limits: L,
    inner: I,
    combine: C,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<IntegralResult>
where
    L: Fn(f64) -> (f64, f64),
    I: Fn(f64, f64) -> Result<f64>,
    C: Fn(f64, f64) -> Result<f64>,
{
    let inner_spec = spec.tightened(10.0);
    let memo: Mutex<HashMap<u64, IntegralResult>> = Mutex::new(HashMap::new());
    let inner_ok = std::sync::atomic::AtomicBool::new(true);

    let outer = |s: f64| -> Result<(f64, f64)> {
        let key = s.to_bits();
        let cached = memo.lock().unwrap_or_else(|e| e.into_inner()).get(&key).copied();
        let res = match cached {
            Some(r) => r,
            None => {
                let (l, h) = inner_limits(s);
                let r = integrate(|t| inner(s, t), l, h, &inner_spec)?;
                memo.lock().unwrap_or_else(|e| e.into_inner()).insert(key, r);
                r
            }
        };
        if !res.converged {
            inner_ok.store(false, std::sync::atomic::Ordering::Relaxed);
        }
        let g = combine(s, res.value)?;
        let propagated = if res.error_estimate > 0.0 {
            let up = combine(s, res.value + res.error_estimate).unwrap_or(f64::INFINITY);
            let down = combine(s, res.value - res.error_estimate).unwrap_or(f64::INFINITY);
            let d = (up - g).abs().max((down - g).abs());
            if d.is_finite() {
                d
            } else {
                0.0
            }
        } else {
            0.0
        };
        Ok((g, propagated))
    };

    let (mut result, inner_err) = integrate_with_aux(outer, lo, hi, spec)?;
    result.error_estimate += inner_err;
    if !inner_ok.load(std::sync::atomic::Ordering::Relaxed) {
        result.converged = false;
    }
    Ok(result)
}
