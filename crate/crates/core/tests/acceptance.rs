//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when any criterion fails.

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use opialkit::cli::{is_violation, parallel_map, render_reports, verify_instance, Format};
use opialkit::funcrep::{builtin_family, equispaced, FunctionSpec, Interval, SmoothFunction};
use opialkit::opial::{classify_regime, Direction, ExponentTriple, InequalityReport, OpialProblem, RegimeTag, YSource};
use opialkit::quad::QuadratureSpec;
use opialkit::taylor::TaylorExpansion;
use opialkit::testgen::{generate_suite, InstanceSpec, SuiteConfig};
use opialkit::widder::{BasisFamily, KernelHandle};

use support::oracle;

const MAIN_SEED: u64 = 2024;
const REGIME_SEED: u64 = 7919;
const MAIN_COUNT: usize = 200;
const REGIME_COUNT: usize = 50;

type Check = Result<String, String>;

struct Suite {
    specs: Vec<InstanceSpec>,
    reports: Vec<InequalityReport>,
    elapsed: Duration,
}

fn run_suite(seed: u64, count: usize, regimes: &[RegimeTag]) -> Result<Suite, String> {
    let start = Instant::now();
    let cfg = SuiteConfig::new(seed, count);
    let specs = generate_suite(&cfg, regimes).map_err(|e| format!("generation failed: {e}"))?;
    let results = parallel_map(&specs, |s| verify_instance(s, None, &cfg.quad));
    let mut reports = Vec::with_capacity(specs.len());
    for (spec, res) in specs.iter().zip(results) {
        reports.push(res.map_err(|e| format!("evaluation failed: {e}\n  replay: {spec}"))?);
    }
    Ok(Suite { specs, reports, elapsed: start.elapsed() })
}

fn main_suite() -> &'static Result<Suite, String> {
    static SUITE: OnceLock<Result<Suite, String>> = OnceLock::new();
    SUITE.get_or_init(|| run_suite(MAIN_SEED, MAIN_COUNT, &[RegimeTag::Main]))
}

fn regime_suite() -> &'static Result<Suite, String> {
    static SUITE: OnceLock<Result<Suite, String>> = OnceLock::new();
    SUITE.get_or_init(|| run_suite(REGIME_SEED, REGIME_COUNT, &RegimeTag::NUMBERED))
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {:.2} s, limit {:.0} s", elapsed.as_secs_f64(), limit.as_secs_f64()))
    }
}

fn unit() -> Interval {
    Interval::unit()
}

fn classical_sharpness() -> Check {
    let start = Instant::now();
    let tent = builtin_family("tent:1", unit()).map_err(|e| e.to_string())?;
    let h = tent.derivative(1).map_err(|e| e.to_string())?;
    let one = SmoothFunction::constant(1.0, unit());
    let e = ExponentTriple::new(1.0, 1.0, 2.0).map_err(|e| e.to_string())?;
    let prob = OpialProblem::new(KernelHandle::Unit, one.clone(), one, h, YSource::Given(tent), 0.0, 1.0, e)
        .map_err(|e| e.to_string())?;
    let r = prob.verify_classical().map_err(|e| e.to_string())?;
    within(start.elapsed(), Duration::from_secs(1))?;
    let ok = (r.lhs - 0.25).abs() <= 1e-6 && (r.bound - 0.25).abs() <= 1e-6 && (r.ratio - 1.0).abs() <= 1e-6;
    let msg = format!("lhs = {}, bound = {}, ratio = {} (tol 1e-6)", r.lhs, r.bound, r.ratio);
    if ok && r.satisfied {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn closed_form_constant() -> Check {
    let start = Instant::now();
    let one = SmoothFunction::constant(1.0, unit());
    let e = ExponentTriple::new(1.0, 1.0, 2.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for x in [0.25, 0.5, 1.0] {
        let prob = OpialProblem::new(KernelHandle::Unit, one.clone(), one.clone(), one.clone(), YSource::Derived, 0.0, x, e)
            .map_err(|e| e.to_string())?;
        let c = prob.opial_constant().map_err(|e| e.to_string())?.value;
        worst = worst.max((c - x / 2.0).abs());
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    let msg = format!("max |C(x) - x/2| = {worst:e} over x in {{0.25, 0.5, 1}} (tol 1e-8)");
    if worst <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn falling(d: usize, k: usize) -> f64 {
    (0..k).map(|j| (d - j) as f64).product()
}

fn monomial_reduction() -> Check {
    let start = Instant::now();
    let family = BasisFamily::parse("monomials:5", unit()).map_err(|e| e.to_string())?;
    let grid = equispaced(0.0, 1.0, 50);
    let mut kernel_err = 0.0f64;
    for i in 0..=5usize {
        let fact: f64 = (1..=i).map(|k| k as f64).product();
        for &x in &grid {
            for &t in &grid {
                let g = family.kernel_g(i, x, t).map_err(|e| e.to_string())?;
                kernel_err = kernel_err.max((g - (x - t).powi(i as i32) / fact).abs());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut deriv_err = 0.0f64;
    for degree in 0..=8usize {
        let coeffs: Vec<f64> = (0..=degree).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = SmoothFunction::from_spec(FunctionSpec::Poly(coeffs.clone()), unit());
        for i in 0..=6usize {
            for &x in &grid {
                let exact: f64 = (i..=degree).map(|d| coeffs[d] * falling(d, i) * x.powi((d - i) as i32)).sum();
                let l = family.widder_derivative(&f, i, x).map_err(|e| e.to_string())?;
                deriv_err = deriv_err.max((l - exact).abs());
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    let msg = format!(
        "kernel error {kernel_err:e} (tol 1e-9, i <= 5, 50x50 grid), derivative error {deriv_err:e} (tol 1e-8, degree <= 8)"
    );
    if kernel_err <= 1e-9 && deriv_err <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn taylor_identity() -> Check {
    let start = Instant::now();
    let domain = Interval::new(-1.0, 2.0).map_err(|e| e.to_string())?;
    let family = Arc::new(BasisFamily::parse("exp-basis:0.3,0.9,1.4,2", domain).map_err(|e| e.to_string())?);
    let quad = QuadratureSpec::default();
    let mut worst = 0.0f64;
    for f_spec in ["sin:1.5", "poly:1,-2,0.5,0.3,-0.1", "exp:-0.8"] {
        let f = builtin_family(f_spec, domain).map_err(|e| e.to_string())?;
        for n in 0..=3 {
            let exp = TaylorExpansion::new(family.clone(), f.clone(), 0.4, n).map_err(|e| e.to_string())?;
            for x in domain.grid(20) {
                let res = exp.residual(x, &quad).map_err(|e| e.to_string())?;
                worst = worst.max(res.abs());
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    let msg = format!("max identity residual {worst:e} over n <= 3, 20 points, 3 functions (tol 1e-7)");
    if worst <= 1e-7 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    oracle::rel_gap(a, b)
}

fn main_theorem_suite() -> Check {
    let suite = main_suite().as_ref().map_err(Clone::clone)?;
    let mut failures = Vec::new();
    let mut max_ratio = 0.0f64;
    for (spec, r) in suite.specs.iter().zip(&suite.reports) {
        max_ratio = max_ratio.max(r.ratio);
        if is_violation(r) || !r.converged || r.direction != Direction::UpperBound {
            failures.push(format!("  violation (ratio {}, converged {}): {spec}", r.ratio, r.converged));
        }
    }
    let start = Instant::now();
    let quad = SuiteConfig::new(MAIN_SEED, MAIN_COUNT).quad;
    let r2: Vec<&InstanceSpec> = suite.specs.iter().filter(|s| s.exponents.r == 2.0).collect();
    let mut r2_gap = 0.0f64;
    for (spec, main) in suite.specs.iter().zip(&suite.reports).filter(|(s, _)| s.exponents.r == 2.0) {
        let prob = spec.build_problem(&quad).map_err(|e| e.to_string())?;
        let alt = prob.verify_r2().map_err(|e| format!("{e}: {spec}"))?;
        let gap = [(alt.lhs, main.lhs), (alt.constant, main.constant), (alt.rhs_core, main.rhs_core), (alt.bound, main.bound)]
            .iter()
            .fold(0.0f64, |m, &(p, q)| m.max(rel(p, q)));
        if gap > 1e-8 {
            failures.push(format!("  r2 disagreement {gap:e}: {spec}"));
        }
        r2_gap = r2_gap.max(gap);
    }
    let elapsed = suite.elapsed + start.elapsed();
    within(elapsed, Duration::from_secs(120))?;
    let msg = format!(
        "{} instances, {} violations, max ratio {max_ratio:.6}; r2 subset of {} agrees to {r2_gap:e} (tol 1e-8); {:.1} s",
        suite.specs.len(),
        failures.len(),
        r2.len(),
        elapsed.as_secs_f64()
    );
    if failures.is_empty() && !r2.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}\n{}", failures.join("\n")))
    }
}

fn nine_regime_suite() -> Check {
    let suite = regime_suite().as_ref().map_err(Clone::clone)?;
    within(suite.elapsed, Duration::from_secs(300))?;
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for tag in RegimeTag::NUMBERED {
        let expected = if matches!(tag, RegimeTag::I | RegimeTag::II | RegimeTag::III) {
            Direction::UpperBound
        } else {
            Direction::LowerBound
        };
        let mut n = 0;
        let mut worst = 0.0f64;
        for (spec, r) in suite.specs.iter().zip(&suite.reports).filter(|(s, _)| s.regime == tag) {
            n += 1;
            worst = worst.max(r.ratio);
            if is_violation(r) || !r.converged || r.direction != expected {
                failures.push(format!(
                    "  violation ({} {}, ratio {}, converged {}): {spec}",
                    r.regime, r.direction, r.ratio, r.converged
                ));
            }
        }
        if n != REGIME_COUNT {
            failures.push(format!("  regime {tag} has {n} instances"));
        }
        summary.push(format!("{tag} {worst:.4}"));
    }
    let msg = format!(
        "{} instances, {} violations; worst ratio per regime: {}; {:.1} s",
        suite.specs.len(),
        failures.len(),
        summary.join(", "),
        suite.elapsed.as_secs_f64()
    );
    if failures.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}\n{}", failures.join("\n")))
    }
}

#[derive(Default)]
struct Gaps {
    p: f64,
    c: f64,
    lhs: f64,
    rhs: f64,
    extreme: f64,
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let main = main_suite().as_ref().map_err(Clone::clone)?;
    let regimes = regime_suite().as_ref().map_err(Clone::clone)?;
    let quad = QuadratureSpec::default();
    let specs: Vec<&InstanceSpec> = main.specs.iter().chain(&regimes.specs).collect();
    let per_instance = parallel_map(&specs, |spec| -> Result<(Gaps, bool), String> {
        let prob = spec.build_problem(&quad).map_err(|e| format!("{e}: {spec}"))?;
        let c = prob.opial_constant().map_err(|e| format!("{e}: {spec}"))?;
        let lhs = prob.lhs_functional().map_err(|e| format!("{e}: {spec}"))?.value;
        let rhs = prob.rhs_core().map_err(|e| format!("{e}: {spec}"))?.value;
        let points: Vec<f64> = c.p_samples.iter().map(|p| p.0).collect();
        let o = oracle::functionals(&prob, &points);
        let mut g = Gaps {
            c: rel(c.value, o.constant),
            lhs: rel(lhs, o.lhs),
            rhs: rel(rhs, o.rhs_core),
            ..Gaps::default()
        };
        for (&(_, p), &(_, q)) in c.p_samples.iter().zip(&o.p_samples) {
            g.p = g.p.max(rel(p, q));
        }
        let extreme = classify_regime(&prob.exponents).tag == RegimeTag::Main;
        if extreme {
            let e = prob.extreme_bound().map_err(|e| format!("{e}: {spec}"))?;
            let (oc, on) = oracle::extreme_right_side(&prob);
            g.extreme = rel(e.bound, oc * on).max(rel(e.constant, oc)).max(rel(e.rhs_core, on));
        }
        Ok((g, extreme))
    });
    let mut worst = Gaps::default();
    let mut failures = Vec::new();
    let mut extreme_count = 0;
    for (spec, res) in specs.iter().zip(per_instance) {
        let (g, extreme) = res?;
        extreme_count += usize::from(extreme);
        let m = g.p.max(g.c).max(g.lhs).max(g.rhs).max(g.extreme);
        if m > 1e-6 {
            failures.push(format!(
                "  gap P {:e} C {:e} lhs {:e} rhs {:e} extreme {:e}: {spec}",
                g.p, g.c, g.lhs, g.rhs, g.extreme
            ));
        }
        worst.p = worst.p.max(g.p);
        worst.c = worst.c.max(g.c);
        worst.lhs = worst.lhs.max(g.lhs);
        worst.rhs = worst.rhs.max(g.rhs);
        worst.extreme = worst.extreme.max(g.extreme);
    }
    let msg = format!(
        "{} instances ({extreme_count} with the extreme bound); worst relative gaps P {:.1e}, C {:.1e}, lhs {:.1e}, rhs {:.1e}, extreme {:.1e} (tol 1e-6); {:.1} s",
        specs.len(),
        worst.p,
        worst.c,
        worst.lhs,
        worst.rhs,
        worst.extreme,
        start.elapsed().as_secs_f64()
    );
    if failures.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}\n{}", failures.join("\n")))
    }
}

fn cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_opialkit"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot run the CLI: {e}"))?;
    if !out.status.success() {
        return Err(format!("`{}` exited with {}: {}", args.join(" "), out.status, String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Check {
    let start = Instant::now();
    let mut compared = Vec::new();
    for (first, seed, count, regimes) in [
        (main_suite(), MAIN_SEED, MAIN_COUNT, vec![RegimeTag::Main]),
        (regime_suite(), REGIME_SEED, REGIME_COUNT, RegimeTag::NUMBERED.to_vec()),
    ] {
        let first = first.as_ref().map_err(Clone::clone)?;
        let again = run_suite(seed, count, &regimes)?;
        let a = render_reports(&first.reports, Format::Json);
        let b = render_reports(&again.reports, Format::Json);
        if a != b {
            return Err(format!("suite with seed {seed} produced different JSON on a second run"));
        }
        compared.push(format!("{} reports", first.reports.len()));
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = dir.path().join("suite.txt");
    let manifest_arg = manifest.to_str().ok_or("temporary path is not UTF-8")?;
    let gen = ["gen", "--seed", "31", "--count", "3", "--regimes", "all"];
    let m1 = cli(&gen)?;
    let m2 = cli(&gen)?;
    if m1 != m2 {
        return Err("`gen` output differs between runs".into());
    }
    std::fs::write(&manifest, &m1).map_err(|e| e.to_string())?;
    let verify = ["verify", "--suite", manifest_arg];
    let v1 = cli(&verify)?;
    let v2 = cli(&verify)?;
    if v1 != v2 {
        return Err("`verify --suite` output differs between runs".into());
    }
    Ok(format!(
        "library suites ({}) and CLI gen/verify ({} bytes of JSON) byte-identical on rerun; {:.1} s",
        compared.join(", "),
        v1.len(),
        start.elapsed().as_secs_f64()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("classical Opial sharpness", classical_sharpness),
        ("closed-form constant C(x) = x/2", closed_form_constant),
        ("monomial reduction", monomial_reduction),
        ("Widder-Taylor identity", taylor_identity),
        ("main-theorem property suite", main_theorem_suite),
        ("nine-regime suite", nine_regime_suite),
        ("oracle equivalence", oracle_equivalence),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let what = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {what}"))
        });
        match result {
            Ok(msg) => println!("criterion {} {name}: PASS ({msg})", k + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({msg})", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
