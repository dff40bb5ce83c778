import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmtcov.errors import ConfigError, DimensionError, DomainError
from rmtcov.metrics import (LINEAR, LOG, LOG_SQUARED, Atom, AtomKind, MetricSpec,
                            bhattacharyya, eval_F, eval_f, eval_G, fisher,
                            kullback_leibler, log_shift, parse_metric, renyi,
                            true_delta)

from conftest import random_spd

ATOMS = [LINEAR, LOG, log_shift(1.0), log_shift(0.3), LOG_SQUARED]
METRICS = [fisher(), bhattacharyya(), kullback_leibler(), renyi(0.25), renyi(0.8)]


class TestDecompositions:
    def test_fisher(self):
        m = fisher()
        assert m.terms == ((1.0, LOG_SQUARED),) and m.constant == 0.0

    def test_bhattacharyya(self):
        m = bhattacharyya()
        assert m.terms == ((-0.25, LOG), (0.5, log_shift(1.0)))
        assert m.constant == pytest.approx(-0.5 * np.log(2))

    def test_kl(self):
        m = kullback_leibler()
        assert m.terms == ((0.5, LINEAR), (-0.5, LOG)) and m.constant == -0.5

    def test_renyi(self):
        a = 0.25
        m = renyi(a)
        w, atom = m.terms[0]
        assert atom.s == pytest.approx(3.0)
        assert w == pytest.approx(-1 / (2 * (a - 1)))
        assert m.terms[1] == (0.5, LOG)
        assert m.constant == pytest.approx(-np.log(a) / (2 * (a - 1)))

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5, -0.2])
    def test_renyi_rejects(self, alpha):
        with pytest.raises(DomainError):
            renyi(alpha)

    @pytest.mark.parametrize("metric", METRICS, ids=lambda m: m.name)
    def test_zero_at_one(self, metric):
        assert eval_f(metric, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_kl_against_gaussian_formula(self):
        # KL(N(0, A) || N(0, B)) for scalars in closed form.
        t = 2.7
        expect = 0.5 * (t - 1 - np.log(t))
        assert eval_f(kullback_leibler(), t) == pytest.approx(expect)

    @pytest.mark.parametrize("text,name", [("fisher", "fisher"), ("KL", "kl"),
                                           ("bhattacharyya", "bhattacharyya"),
                                           ("renyi:0.5", "renyi:0.5")])
    def test_parse(self, text, name):
        assert parse_metric(text).name == name

    @pytest.mark.parametrize("text", ["frobenius", "renyi:x", "renyi:2"])
    def test_parse_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_metric(text)

    def test_atom_validation(self):
        with pytest.raises(DomainError):
            log_shift(0.0)
        with pytest.raises(ConfigError):
            Atom(AtomKind.LOG, 1.0)
        with pytest.raises(ConfigError):
            MetricSpec(())

    def test_domain(self):
        with pytest.raises(DomainError):
            eval_f(fisher(), -1.0)


class TestAntiderivatives:
    def test_G_linear_at_one(self):
        assert eval_G(LINEAR, 1.0) == 0

    def test_F_log_at_one(self):
        assert eval_F(LOG, 1.0) == -1

    def test_G_log2_derivative_at_two(self):
        h = 1e-5
        d = (eval_G(LOG_SQUARED, 2 + h) - eval_G(LOG_SQUARED, 2 - h)) / (2 * h)
        assert d.real == pytest.approx(np.log(0.5) ** 2, rel=1e-8)

    @pytest.mark.parametrize("atom", ATOMS, ids=str)
    @pytest.mark.parametrize("z", [0.3 + 0.2j, 2.0 - 1.0j, -1.5 + 0.7j, 4.0 + 0.0j, 0.1j])
    def test_derivatives(self, atom, z):
        h = 1e-5
        dG = (eval_G(atom, z + h) - eval_G(atom, z - h)) / (2 * h)
        dF = (eval_F(atom, z + h) - eval_F(atom, z - h)) / (2 * h)
        g = _f_complex(atom, 1 / z)
        f = _f_complex(atom, z)
        assert abs(dG - g) <= 1e-6 * max(1.0, abs(g))
        assert abs(dF - f) <= 1e-6 * max(1.0, abs(f))

    def test_winding_shifts_branch(self):
        z = -1.0 + 0.5j
        jump = eval_G(LINEAR, z, winding=1) - eval_G(LINEAR, z)
        assert jump == pytest.approx(2j * np.pi)


def _f_complex(atom, z):
    z = complex(z)
    if atom.kind is AtomKind.LINEAR:
        return z
    if atom.kind is AtomKind.LOG:
        return np.log(z)
    if atom.kind is AtomKind.LOG_SHIFT:
        return np.log(1 + atom.s * z)
    return np.log(z) ** 2


class TestTrueDelta:
    def test_self_distance(self, rng):
        C = random_spd(5, rng)
        for m in METRICS:
            assert true_delta(C, C, m) == pytest.approx(0.0, abs=1e-12)

    def test_fisher_scalar(self):
        assert true_delta(np.eye(2), np.e * np.eye(2), fisher()) == pytest.approx(1.0)

    def test_kl_trace_logdet(self, rng):
        C = random_spd(6, rng)
        p = 6
        expect = (0.5 * np.trace(C) - 0.5 * np.linalg.slogdet(C)[1] - p / 2) / p
        assert true_delta(np.eye(p), C, kullback_leibler()) == pytest.approx(expect)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            true_delta(np.eye(2), np.eye(3), fisher())

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_fisher_symmetry(self, seed):
        r = np.random.default_rng(seed)
        M, C = random_spd(5, r), random_spd(5, r)
        assert true_delta(M, C, fisher()) == pytest.approx(true_delta(C, M, fisher()),
                                                           abs=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_fisher_affine_invariance(self, seed):
        r = np.random.default_rng(seed)
        M, C = random_spd(5, r), random_spd(5, r)
        A = r.standard_normal((5, 5)) + 3 * np.eye(5)
        lhs = true_delta(A.T @ M @ A, A.T @ C @ A, fisher())
        assert lhs == pytest.approx(true_delta(M, C, fisher()), abs=1e-8)
