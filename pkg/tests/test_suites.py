import json

import jsonschema
import pytest

from adsflow.cli import load_schema
from adsflow.pseudo_euclidean import ContractError
from adsflow.suites import check_rng, verify_suite


def test_check_rng_keyed_by_name():
    a = check_rng(42, "angle").standard_normal(5)
    check_rng(42, "other").standard_normal(100)
    b = check_rng(42, "angle").standard_normal(5)
    assert (a == b).all()
    assert not (check_rng(43, "angle").standard_normal(5) == a).any()


def test_unknown_suite():
    with pytest.raises(ContractError):
        verify_suite("bogus")


def test_pointwise_suite():
    s = verify_suite("pointwise", seed=42)
    assert s.passed, [c for c in s.checks if not c["passed"]]
    assert s.case_count >= 100_000
    payload = s.as_dict()
    assert "wall_time" not in payload and "wall_time" in s.as_dict(timing=True)
    jsonschema.validate(payload, load_schema("summary"))


def test_mesh_suite_deterministic():
    a = json.dumps(verify_suite("mesh", seed=1).as_dict(), sort_keys=True)
    b = json.dumps(verify_suite("mesh", seed=1).as_dict(), sort_keys=True)
    assert a == b


def test_tightened_tolerance_fails_check():
    from adsflow.tolerances import resolve

    tol = resolve({"pointwise": {"angle_vs_arctan": 1e-20}})
    s = verify_suite("pointwise", seed=0, tolerances=tol)
    assert not s.passed
    assert [c["name"] for c in s.checks if not c["passed"]] == ["angle_vs_arctan"]
