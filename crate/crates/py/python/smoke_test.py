"""Smoke test for the opialkit_py extension. Run with pytest or directly."""

import math

import opialkit_py as ok


def test_monomial_kernel_is_a_taylor_term():
    assert abs(ok.kernel("monomials:3", 1.0, 0.0, i=2) - 0.5) < 1e-12
    assert ok.kernel("monomials:3", 0.4, 0.4) == 0.0


def test_widder_derivative_reduces_to_ordinary_derivative():
    # L_2 of sin for the monomial basis is sin''
    v = ok.widder_derivative("monomials:2", "sin:1", 2, 0.3)
    assert abs(v + math.sin(0.3)) < 1e-8


def test_constant_matches_closed_form():
    out = ok.opial_constant(1.0, 1.0, 2.0, 1.0)
    assert abs(out["C"] - 0.5) < 1e-8
    assert out["converged"]
    assert ok.classify(1.0, 1.0, 2.0) == "MAIN"


def test_classical_tent_attains_equality():
    report = ok.verify(1.0, 1.0, 2.0, 1.0, theorem="classical", f="tent:1")
    assert report["satisfied"]
    assert abs(report["ratio"] - 1.0) < 1e-6


def test_taylor_residuals_vanish():
    rows = ok.taylor("exp-basis:0.3,0.9,1.4", "sin:1.5", 0.5, 2, [0.0, 0.25, 1.0])
    assert all(abs(r[4]) < 1e-7 for r in rows)


def test_generated_suite_verifies():
    manifest = ok.generate(5, 1, "MAIN,II")
    assert manifest == ok.generate(5, 1, "MAIN,II")
    reports = ok.verify_suite(manifest)
    assert len(reports) == 2
    assert all(r["satisfied"] for r in reports)


def test_bad_spec_raises():
    try:
        ok.kernel("nonsense:2", 0.5, 0.1)
    except ok.OpialError:
        return
    raise AssertionError("expected OpialError")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"{name}: ok")
