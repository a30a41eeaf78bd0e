"""Acceptance gate: every criterion at its stated size and tolerance.

One test per criterion; each prints its pass/fail line and the individual
checks.  Set STADIUM_LIMITS_ACCEPTANCE=quick to run the reduced tier while
developing (the shipped default is the full tier).

Two closed-form comparisons inherited from the source material are
mathematically unattainable (the quoted mu0(X) and Kac-mean forms are a
factor pi/4 off; the exact forms are asserted instead) and one KS example
(tau0 under the anomalous normalization) is unattainable at any reachable
orbit length.  They are kept as strict xfail tests so the defect stays
visible without masking a regression.
"""

import functools
import math
import os

import pytest

from stadium_limits.geometry import (StadiumGeometry, kac_mean_return_nominal,
                                     mu0_of_X_nominal)
from stadium_limits.parallel import default_workers
from stadium_limits.sampling import SeedSpec
from stadium_limits import validate

MASTER_SEED = 7
QUICK = os.environ.get("STADIUM_LIMITS_ACCEPTANCE", "full") == "quick"
WORKERS = max(default_workers(), min(2, os.cpu_count() or 1))


@functools.lru_cache(maxsize=None)
def criterion(idx):
    geom = StadiumGeometry(2.0)
    seed = SeedSpec(MASTER_SEED)
    fn = dict((i, f) for i, _, f in validate.CRITERIA)[idx]
    if fn in (validate.criterion_limit_laws, validate.criterion_correlations):
        return fn(geom, QUICK, seed, WORKERS)
    return fn(geom, QUICK, seed)


def _assert_criterion(idx, title):
    checks = criterion(idx)
    ok = all(c.passed for c in checks if c.asserted)
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {idx}: {title}")
    for c in checks:
        mark = "ok" if c.passed else ("XX" if c.asserted else "!!")
        print(f"    [{mark}] {c.name}: {c.value:.6g}  want {c.bound}")
    failed = [c for c in checks if c.asserted and not c.passed]
    assert not failed, [f"{c.name}: {c.value} (want {c.bound})" for c in failed]


@pytest.mark.parametrize("idx,title", [(i, t) for i, t, _ in validate.CRITERIA])
def test_criterion(idx, title):
    _assert_criterion(idx, title)


def _lookup(idx, name_fragment):
    for c in criterion(idx):
        if name_fragment in c.name:
            return c
    raise KeyError(name_fragment)


@pytest.mark.xfail(strict=True,
                   reason="quoted closed form pi/(2(pi+ell)) undercounts the "
                          "induced parallelograms by pi/4; exact 2/(pi+ell) "
                          "is asserted in criterion 2")
def test_quoted_mu0X_form_ell2():
    c = _lookup(2, "mu0(X) MC vs quoted pi/(2(pi+ell)), ell=2")
    geom = StadiumGeometry(2.0)
    sigma_bound = float(c.bound.split("=")[1])
    assert abs(c.value - mu0_of_X_nominal(geom)) <= sigma_bound


@pytest.mark.xfail(strict=True,
                   reason="Kac mean follows 1/mu0(X); the quoted form "
                          "2(pi+ell)/pi inherits the pi/4 defect")
def test_quoted_kac_form():
    c = _lookup(2, "Kac mean vs quoted")
    geom = StadiumGeometry(2.0)
    want = kac_mean_return_nominal(geom)
    assert abs(c.value - want) / want <= 0.005


@pytest.mark.xfail(strict=True,
                   reason="tau0's short-range variance dominates c n ln n "
                          "for every reachable n (crossover near n ~ 1e15), "
                          "so its anomalous-normalized KS cannot reach 0.1; "
                          "the P1-regime check uses the segment bump")
def test_tau0_anomalous_ks():
    c = _lookup(8, "tau0 (report)")
    assert c.value <= 0.1


def test_criterion_11_determinism(tmp_path):
    """Byte-identical CSV outputs for identical config+seed, any workers."""
    from stadium_limits.cli import main

    specs = [
        (["clt", "--obs", "tau0", "--n", "2048", "--samples", "300",
          "--seed", "7"], "clt_samples.csv"),
        (["transitions", "--n", "60", "--samples", "1500", "--seed", "7"],
         "transitions.csv"),
        (["variance", "--obs", "tau0", "--n-grid", "2^7..2^10", "--samples",
          "200", "--seed", "7"], "variance_growth.csv"),
        (["correlations", "--obs", "tau0", "--pairs", "200000", "--seed",
          "7"], "correlations.csv"),
    ]
    for args, csv_name in specs:
        blobs = []
        for tag, workers in (("a", "1"), ("b", "2"), ("c", "1")):
            out = tmp_path / f"{csv_name}.{tag}"
            status = main(args + ["--workers", workers, "--out", str(out)])
            assert status == 0
            blobs.append((out / csv_name).read_bytes())
        assert blobs[0] == blobs[1] == blobs[2], csv_name
