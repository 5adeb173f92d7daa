"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line per item, then asserts the whole report.
Bounds live in parext.checks and are never relaxed here.
"""

import pytest

from parext.checks import CHECKS, run_check


def _run(name, capsys):
    report = run_check(name)
    with capsys.disabled():
        print()
        for item in report.items:
            tag = "PASS" if item.ok else "FAIL"
            print(f"{tag} {name}: {item.label} value={item.value:.6g} bound {item.bound}")
    return report


def _assert(report):
    failed = [f"{i.label}: {i.value:.6g} vs {i.bound}" for i in report.items if not i.ok]
    assert report.items, "check produced no items"
    assert report.ok, "; ".join(failed)


def test_adjoint_pairing(capsys):
    _assert(_run("adjoint", capsys))


def test_holder_bound_on_random_mixtures(capsys):
    _assert(_run("holder", capsys))


def test_parabolic_rescaling_symmetry(capsys):
    _assert(_run("symmetry", capsys))


def test_weighted_pointwise_lemma(capsys):
    _assert(_run("key-lemma", capsys))


def test_weighted_inequality_resolution_stable(capsys):
    _assert(_run("weighted", capsys))


def test_euler_lagrange_plateau(capsys):
    _assert(_run("el", capsys))


def test_iterates_dominated_by_weight(capsys):
    _assert(_run("corollary", capsys))


def test_spectral_identities(capsys):
    _assert(_run("spectral", capsys))


def test_ap_threshold(capsys):
    _assert(_run("ap-threshold", capsys))


def test_smoothing_gain(capsys):
    _assert(_run("smoothing", capsys))


def test_contraction_near_extremizer(capsys):
    _assert(_run("contraction", capsys))


def test_reports_deterministic(capsys):
    _assert(_run("determinism", capsys))


def test_suite_covers_every_check():
    covered = {"adjoint", "holder", "symmetry", "key-lemma", "weighted", "el", "corollary", "spectral",
               "ap-threshold", "smoothing", "contraction", "determinism"}
    assert covered == set(CHECKS)
