import itertools

import numpy as np
import pytest

from helpers import bool_oracle, kink_distance, random_gexpr
from logilp.ground import GAnd, GAtMost, GConst, GIf, GNot, GOr, GVar
from logilp.softlogic import soft_eval, violation

EPS_FD = 1e-5
KINK_MARGIN = 1e-3


def fd_gradient(expr, p) -> np.ndarray:
    grad = np.zeros_like(p)
    for i in range(len(p)):
        hi = p.copy()
        lo = p.copy()
        hi[i] += EPS_FD
        lo[i] -= EPS_FD
        grad[i] = (violation(expr, hi)[0] - violation(expr, lo)[0]) / (2 * EPS_FD)
    return grad


class TestValues:
    def test_satisfied_implication(self):
        assert soft_eval(GIf(GVar(0), GVar(1)), [1.0, 1.0]) == 1.0

    def test_implication_gap(self):
        expr = GIf(GVar(0), GVar(1))
        assert soft_eval(expr, [0.9, 0.2]) == pytest.approx(0.3)
        v, grad = violation(expr, np.array([0.9, 0.2]))
        assert v == pytest.approx(0.7)
        assert grad[0] == pytest.approx(1.0)
        assert grad[1] == pytest.approx(-1.0)

    def test_lukasiewicz_and_boundary(self):
        assert soft_eval(GAnd((GVar(0), GVar(1))), [0.5, 0.5]) == 0.0

    def test_atmost_overflow(self):
        expr = GAtMost(1, (GVar(0), GVar(1)))
        v, grad = violation(expr, np.array([0.8, 0.8]))
        assert v == pytest.approx(0.6)
        fd = fd_gradient(expr, np.array([0.8, 0.8]))
        assert np.allclose(grad, fd, atol=1e-6)

    def test_satisfied_boolean_region_has_zero_gradient(self):
        expr = GIf(GVar(0), GVar(1))
        v, grad = violation(expr, np.array([0.1, 0.9]))
        assert v == 0.0
        assert np.allclose(grad, 0.0)

    def test_constants(self):
        assert soft_eval(GConst(True), []) == 1.0
        assert soft_eval(GConst(False), []) == 0.0


class TestBooleanAgreement:
    def test_matches_boolean_oracle_on_corners(self):
        rng = np.random.default_rng(21)
        for _ in range(80):
            n = int(rng.integers(1, 7))
            expr = random_gexpr(rng, n, max_depth=3)
            for bits in itertools.product((0, 1), repeat=n):
                p = np.asarray(bits, dtype=float)
                assert soft_eval(expr, p) == float(bool_oracle(expr, bits)), expr


class TestViolationProperties:
    def test_violation_in_unit_interval(self):
        rng = np.random.default_rng(31)
        for _ in range(60):
            n = int(rng.integers(1, 7))
            expr = random_gexpr(rng, n, max_depth=3)
            for _ in range(10):
                p = rng.uniform(0.0, 1.0, n)
                v, _ = violation(expr, p)
                assert 0.0 <= v <= 1.0

    def test_if_monotone_in_consequent(self):
        rng = np.random.default_rng(41)
        for _ in range(40):
            n = int(rng.integers(1, 5))
            antecedent = random_gexpr(rng, n, max_depth=2, allow_cardinality=False)
            expr = GIf(antecedent, GVar(n))  # fresh consequent variable
            p = rng.uniform(0.0, 1.0, n + 1)
            base, _ = violation(expr, p)
            for bump in (0.05, 0.2, 0.5):
                q = p.copy()
                q[n] = min(1.0, q[n] + bump)
                v, _ = violation(expr, q)
                assert v <= base + 1e-12

    def test_subgradient_matches_finite_differences(self):
        rng = np.random.default_rng(51)
        shapes = [
            GNot(GVar(0)),
            GAnd((GVar(0), GVar(1))),
            GAnd((GVar(0), GVar(1), GVar(2))),
            GOr((GVar(0), GVar(1), GVar(2))),
            GIf(GVar(0), GVar(1)),
            GIf(GAnd((GVar(0), GVar(1))), GOr((GVar(2), GVar(3)))),
            GAtMost(1, (GVar(0), GVar(1), GVar(2))),
            GNot(GOr((GVar(0), GNot(GVar(1))))),
        ]
        for _ in range(12):
            shapes.append(random_gexpr(rng, 5, max_depth=3))
        for expr in shapes:
            checked = 0
            tries = 0
            while checked < 100 and tries < 4000:
                tries += 1
                p = rng.uniform(0.02, 0.98, 6)
                if kink_distance(expr, p) < KINK_MARGIN:
                    continue
                checked += 1
                v, grad = violation(expr, p)
                fd = fd_gradient(expr, p)
                err = np.abs(grad - fd) / np.maximum(1.0, np.abs(fd))
                assert err.max() < 1e-4, (expr, p, grad, fd)
            assert checked == 100, f"could not sample enough interior points for {expr}"
