//! Reference values computed independently of the engine's quadrature.
//!
//! Every integral is a composite trapezoid rule applied after the change of
//! variables `t = lo + (hi - lo) ψ(τ)` with `ψ' ∝ sin^8(πτ)`. The transform
//! flattens the integrand to high order at both ends, so algebraic endpoint
//! singularities such as `t^-0.25` do not spoil convergence. Double integrals
//! nest the same rule. Only the problem data (kernel, weights, `h`, `y`) is
//! taken from the engine.

use std::f64::consts::PI;

use opialkit::opial::{OpialProblem, YSource};

/// Trapezoid intervals per integral: ten times the engine's initial
/// 8 panels of 10 nodes.
pub const NODES: usize = 800;

/// Points of the dense grid used for sup norms.
pub const SUP_GRID: usize = 10241;

/// `(ψ(τ_j), ψ'(τ_j) / N)` for the interior nodes `τ_j = j / N`.
pub fn transformed_rule(n: usize) -> Vec<(f64, f64)> {
    let norm = 128.0 / 35.0;
    (1..n)
        .map(|j| {
            let tau = j as f64 / n as f64;
            let th = |k: f64| (2.0 * k * PI * tau).sin() / (2.0 * k * PI);
            let psi = norm * (35.0 * tau - 56.0 * th(1.0) + 28.0 * th(2.0) - 8.0 * th(3.0) + th(4.0)) / 128.0;
            let w = norm * (PI * tau).sin().powi(8) / n as f64;
            (psi, w)
        })
        .collect()
}

/// Nodes `(t, weight)` for `∫_lo^hi`, keeping only nodes strictly inside.
fn nodes(rule: &[(f64, f64)], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let (min, max) = (lo.min(hi), lo.max(hi));
    rule.iter()
        .map(|&(p, w)| (lo + (hi - lo) * p, (hi - lo) * w))
        .filter(|&(t, _)| t > min && t < max)
        .collect()
}

pub fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let rule = transformed_rule(NODES);
    nodes(&rule, lo, hi).into_iter().map(|(t, w)| w * f(t)).sum()
}

fn phi(prob: &OpialProblem, s: f64, t: f64) -> f64 {
    prob.kernel.eval(s, t).expect("kernel evaluation").max(0.0)
}

fn val(f: &opialkit::funcrep::SmoothFunction, s: f64) -> f64 {
    f.value(s).expect("function evaluation")
}

#[derive(Debug, Clone)]
pub struct OracleValues {
    pub lhs: f64,
    pub constant: f64,
    pub rhs_core: f64,
    /// `(s, P(s))` at the requested points.
    pub p_samples: Vec<(f64, f64)>,
}

/// `P(s)`, `C(x)`, the left functional and `rhs_core` of `prob`.
///
/// The outer nodes of `C` and of the left functional coincide, so one row of
/// kernel values per outer node serves both inner integrals.
pub fn functionals(prob: &OpialProblem, p_points: &[f64]) -> OracleValues {
    functionals_with(prob, p_points, NODES)
}

pub fn functionals_with(prob: &OpialProblem, p_points: &[f64], n: usize) -> OracleValues {
    let e = prob.exponents;
    let (alpha, beta, r) = (e.alpha, e.beta, e.r);
    let (a, x) = (prob.a, prob.x);
    let rule = transformed_rule(n);
    let q = r / (r - 1.0);
    let vq = -1.0 / (r - 1.0);
    let p_of = |row: &[(f64, f64, f64)]| -> f64 {
        row.iter().map(|&(t, w, k)| w * val(&prob.v, t).powf(vq) * k.powf(q)).sum::<f64>().abs()
    };
    let row_at = |s: f64| -> Vec<(f64, f64, f64)> {
        nodes(&rule, a, s).into_iter().map(|(t, w)| (t, w, phi(prob, s, t))).collect()
    };

    let eu = r / (r - alpha);
    let ev = -alpha / (r - alpha);
    let ep = beta * (r - 1.0) / (r - alpha);
    let mut c_sum = 0.0;
    let mut lhs_sum = 0.0;
    for (s, w) in nodes(&rule, a, x) {
        let row = row_at(s);
        let u = val(&prob.u, s);
        if u == 0.0 {
            continue;
        }
        let p = p_of(&row);
        c_sum += w * u.powf(eu) * val(&prob.v, s).powf(ev) * p.powf(ep);
        let y = match &prob.y {
            YSource::Given(y) => val(y, s),
            YSource::Derived => row.iter().map(|&(t, wt, k)| wt * k * val(&prob.h, t).abs()).sum(),
        };
        lhs_sum += w * u * y.abs().powf(beta) * val(&prob.h, s).abs().powf(alpha);
    }
    let lead = (alpha / (alpha + beta)).powf(alpha / r);
    let constant = lead * c_sum.abs().powf((r - alpha) / r);
    let rhs_core = trapezoid(|s| val(&prob.v, s) * val(&prob.h, s).abs().powf(r), a, x).abs();
    let p_samples = p_points.iter().map(|&s| (s, p_of(&row_at(s)))).collect();
    OracleValues { lhs: lhs_sum.abs(), constant, rhs_core, p_samples }
}

/// `max |f|` over `[lo, hi]`: the best point of a dense grid, polished by
/// bisection on the sign of a central difference.
fn sup(f: &opialkit::funcrep::SmoothFunction, lo: f64, hi: f64) -> f64 {
    let g = |s: f64| val(f, s).abs();
    let step = (hi - lo) / (SUP_GRID - 1) as f64;
    let (k, mut best) = (0..SUP_GRID)
        .map(|k| (k, g(lo + k as f64 * step)))
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    let mut l = (lo + (k as f64 - 1.0) * step).max(lo);
    let mut r = (lo + (k as f64 + 1.0) * step).min(hi);
    for _ in 0..60 {
        let m = 0.5 * (l + r);
        let d = 1e-7 * (r - l);
        if g(m + d) > g(m - d) {
            l = m;
        } else {
            r = m;
        }
        best = best.max(g(m));
    }
    best
}

/// The extreme-case right side `∫ u |∫_a^x v Φ(w,t) dt|^((r-α)/r) dw · ‖v‖^β ‖h‖^(α+β)`
/// as `(double integral, norm product)`.
pub fn extreme_right_side(prob: &OpialProblem) -> (f64, f64) {
    extreme_right_side_with(prob, NODES)
}

pub fn extreme_right_side_with(prob: &OpialProblem, n: usize) -> (f64, f64) {
    let e = prob.exponents;
    let (a, x) = (prob.a, prob.x);
    let (lo, hi) = (a.min(x), a.max(x));
    let rule = transformed_rule(n);
    let inner_nodes = nodes(&rule, a, x);
    let inner = |w: f64| -> f64 {
        inner_nodes
            .iter()
            .map(|&(t, wt)| wt * val(&prob.v, t) * prob.kernel.eval(w, t).expect("kernel evaluation"))
            .sum()
    };
    // split at sign changes of the inner integral, where |inner|^p has a cusp
    let mut cuts = vec![lo];
    let scan: Vec<f64> = (0..=100).map(|k| lo + (hi - lo) * k as f64 / 100.0).collect();
    for pair in scan.windows(2) {
        let (mut l, mut r) = (pair[0], pair[1]);
        let fl = inner(l);
        if (fl < 0.0) == (inner(r) < 0.0) {
            continue;
        }
        for _ in 0..100 {
            let m = 0.5 * (l + r);
            if (inner(m) < 0.0) == (fl < 0.0) {
                l = m;
            } else {
                r = m;
            }
        }
        cuts.push(0.5 * (l + r));
    }
    cuts.push(hi);
    let power = (e.r - e.alpha) / e.r;
    let mut total = 0.0;
    for seg in cuts.windows(2) {
        for (w, ww) in nodes(&rule, seg[0], seg[1]) {
            let u = val(&prob.u, w);
            if u != 0.0 {
                total += ww * u * inner(w).abs().powf(power);
            }
        }
    }
    if x < a {
        total = -total;
    }
    let norms = sup(&prob.v, lo, hi).powf(e.beta) * sup(&prob.h, lo, hi).powf(e.alpha + e.beta);
    (total, norms)
}

/// `|a - b| <= tol * max(|a|, |b|)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Relative gap, zero when both vanish.
pub fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
