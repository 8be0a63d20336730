"""Smoke test for the shrinker_lab extension module.

Run after `pip install --no-build-isolation -e crates/python`:

    python crates/python/python/smoke_test.py
"""

import math

import shrinker_lab as sl


def main():
    plane = sl.Model.gaussian(2)
    cyl = sl.Model.cylinder()
    assert (plane.n, plane.m, cyl.n, cyl.flat_dim) == (4, 2, 4, 1)
    assert sl.Model.from_json('{"kind": "gaussian", "m": 3}').m == 3

    lines = sl.analytic_spectrum(plane, 1.5)
    assert lines == [(0.0, 1), (0.5, 4), (1.0, 10), (1.5, 20)], lines
    oracle = sl.oracle_spectrum_1d()
    assert max(abs(v - k / 2) for k, v in enumerate(oracle)) < 1e-6

    bound = sl.dimension_bound(plane, 1.0)
    assert bound["dim_od"] == 3 and bound["sharp"]

    u = sl.Poly("z1^2 z2 + 3 z2")
    parts = u.decompose(plane)
    assert sorted(lam for lam, _ in parts) == [0.5, 1.5]
    total = parts[0][1] + parts[1][1]
    assert total.max_abs_diff(u) < 1e-12

    w2 = sl.Poly("w^2")
    r = 10.0
    exact = 2 * r * r / (r * r - 4)
    assert abs(sl.frequency_at(cyl, w2, r) - exact) < 1e-10
    assert abs(sl.frequency_at(cyl, w2, r, route="quadrature") - exact) < 1e-6

    radii = [4.5 + 0.5 * k for k in range(40)]
    prof = sl.frequency_profile(cyl, w2, 2.0, radii)
    assert prof["monotone_pass"]
    assert all(0 < x <= 2 + 0.01 * math.sqrt(prof["mu"]) for x in prof["U"])

    syzygy = sl.Form("z2 dz1 - z1 dz2")
    assert syzygy.interior_product(plane).is_zero()
    assert sl.kernel_dimension(plane, 1, 3) == sl.dim_o_d(plane, 2.0)
    assert sl.form_counting(plane, 1, 2)["pass"]
    assert sl.kernel_ledger(plane, 1, 2)["pass"]

    terms = dict(sl.ancient_transform("x^2 + 2t"))
    assert terms == {(2, 2): 1.0, (0, 2): -2.0}, terms
    assert sl.heat_oracle_error() < 1e-3

    report = sl.verify_all([plane])
    failed = [c["name"] for c in report["checks"] if c["status"] == "fail"]
    assert not failed, failed
    print(f"ok: shrinker_lab {sl.__version__}, {len(report['checks'])} checks passed")


if __name__ == "__main__":
    main()
