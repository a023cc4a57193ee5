import json
import math

import numpy as np
import pytest

from gwlab.report import FAIL, PASS, Report, Row
from gwlab.stats import (
    Estimate,
    batch_means,
    combine,
    mean_estimate,
    one_sided_p,
    ratio_estimate,
    two_proportion_z,
    wilson,
)


def test_estimate_validation():
    with pytest.raises(ValueError):
        Estimate(0.0, -1.0, 1, "x")
    with pytest.raises(ValueError):
        Estimate(0.0, 1.0, 0, "x")
    assert Estimate(1.0, 0.0, 3, "x").z(1.0) == 0.0
    assert Estimate(1.0, 0.5, 3, "x").z(0.0) == 2.0


def test_ratio_estimate_against_bootstrap(rng):
    den = rng.geometric(0.4, size=4000).astype(float)
    num = den * 0.5 + rng.normal(0, 1, size=4000)
    est = ratio_estimate(num, den)
    boots = []
    for _ in range(400):
        i = rng.integers(0, 4000, 4000)
        boots.append(num[i].mean() / den[i].mean())
    assert est.stderr == pytest.approx(np.std(boots), rel=0.15)


def test_batch_means_ar1(rng):
    n, phi = 200_000, 0.8
    e = rng.normal(size=n)
    x = np.empty(n)
    x[0] = e[0]
    for i in range(1, n):
        x[i] = phi * x[i - 1] + e[i]
    _, se, batches = batch_means(x)
    true_se = math.sqrt(1 / (1 - phi**2) * (1 + phi) / (1 - phi) / n)
    assert batches >= 20
    assert se == pytest.approx(true_se, rel=0.25)
    with pytest.raises(ValueError):
        batch_means(np.ones(100))


def test_combine_and_mean():
    a = mean_estimate([1.0, 2.0, 3.0])
    assert a.value == 2.0 and a.stderr == pytest.approx(1 / math.sqrt(3))
    c = combine([Estimate(1.0, 0.3, 10, "m"), Estimate(3.0, 0.4, 10, "m")])
    assert c.value == 2.0 and c.stderr == pytest.approx(0.25) and c.count == 20


def test_p_values_and_intervals():
    assert one_sided_p(0.0, 1.0) == pytest.approx(0.5)
    assert one_sided_p(2.326, 1.0) == pytest.approx(0.01, abs=1e-4)
    lo, hi = wilson(0, 100)
    assert lo == 0.0 and 0.03 < hi < 0.04
    assert two_proportion_z(10, 100, 10, 100) == 0.0
    assert two_proportion_z(0, 50, 0, 70) == 0.0


def test_report_serialization():
    r = Report("x", {"b": 2, "a": 1}, [[1, 0]])
    r.add("g", Row("v", 0.1, 0.01, 0.0, 10.0, PASS))
    r.add("g", Row("w", math.inf, None, None, None, FAIL))
    body = json.loads(r.to_json())
    assert body["schema_version"] == 1 and body["results"]["g"][1]["value"] is None
    csv = r.to_csv().splitlines()
    assert csv[0] == "# schema_version: 1"
    assert csv[4].startswith("schema_version,group,name")
    assert csv[5] == "1,g,v,0.1,0.01,0.0,10.0,pass"
    assert [row.name for _, row in r.failed] == ["w"]
