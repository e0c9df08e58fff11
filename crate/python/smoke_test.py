"""Smoke test for the Python bindings. Build first: pip install --no-build-isolation -e crates/py"""

import math

import sadbc_py as sb


def scalar():
    return sb.Channel([[2.0]], [[1.0]], [[2.0]], [[3.0]])


def test_scalar_interior_point():
    sol = sb.solve(scalar(), 3.0)
    assert sol.certified
    assert abs(sol.b1[0][0] - 1.0) < 1e-6
    assert abs(sol.b2[0][0] - 1.0) < 1e-6
    assert max(sol.kkt_residuals) < 1e-9


def test_rates_match_closed_form():
    r1, r2 = scalar().rates([[1.0]], [[1.0]])
    assert abs(r1 - 0.5 * math.log2(2 * 3 / 4)) < 1e-12
    assert abs(r2 - 0.5 * math.log2((4 / 3) * (4 / 5))) < 1e-12


def test_trace_is_sorted_with_corners():
    pts = sb.trace_boundary(scalar(), [1.0, 3.0, 3.5])
    assert len(pts) == 5
    assert all(a.r1_bits <= b.r1_bits for a, b in zip(pts, pts[1:]))
    mus = {p.mu for p in pts}
    assert 0.0 in mus and math.inf in mus
    corner = next(p for p in pts if p.mu == 0.0)
    assert abs(corner.r1_bits - 0.5 * math.log2(9 / 5)) < 1e-6


def test_verify_random_channel():
    report = sb.verify(sb.Channel.random(2, 7), 2.0)
    assert report["certified"]
    assert report["all_ok"], report


def test_bad_input_raises():
    for make in (
        lambda: sb.Channel([[1.0]], [[2.0]], [[1.0]], [[3.0]]),
        lambda: sb.Channel([[1.0, 0.0]], [[1.0]], [[1.0]], [[1.0]]),
        lambda: sb.solve(scalar(), 0.5),
    ):
        try:
            make()
        except ValueError:
            continue
        raise AssertionError("expected ValueError")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"{name}: ok")
