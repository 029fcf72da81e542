"""
Tests for the hash-keyed edge sampler
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))
os.environ.setdefault("PERCTRUNC_ENVIRONMENT", "testing")

from errors import ContractViolation, DomainError
from sampler import (
    HORIZONTAL,
    VERTICAL,
    ConfigSeed,
    EdgeId,
    EdgeModel,
    EdgeReader,
    aniso_words,
    horizontal_edge,
    is_open,
    line_edge,
    line_words,
    oriented_edge,
    oriented_words,
    uniform_at,
    uniform_words,
    vertical_edge,
)
from sequences import builtin


@pytest.fixture
def cfg():
    return ConfigSeed(master_seed=20240607, trial=3)


class TestEdgeId:
    """Test edge identities and canonical form"""

    def test_horizontal_canonicalised(self):
        assert horizontal_edge(5, 2, -3) == horizontal_edge(2, 2, 3)
        assert horizontal_edge(5, 2, -3).is_canonical()

    def test_line_edge_orders_endpoints(self):
        assert line_edge(7, 3) == line_edge(3, 7)
        assert line_edge(3, 7).length == 4

    def test_vertical_has_no_length(self):
        assert vertical_edge(0, 0).length is None
        assert vertical_edge(0, 0).is_vertical

    def test_oriented_length(self):
        assert oriented_edge(0, 0, 0, -4).length == 4
        assert oriented_edge((1, 2), 3, 1, 2).is_canonical()

    def test_non_canonical_detected(self):
        e = EdgeId(EdgeModel.ANISO, (5, 0), HORIZONTAL, -2)
        assert not e.is_canonical()
        assert e.canonical() == horizontal_edge(3, 0, 2)

    def test_zero_length_rejected(self):
        with pytest.raises(DomainError):
            horizontal_edge(0, 0, 0)
        with pytest.raises(DomainError):
            line_edge(2, 2)


class TestUniforms:
    """Test the coupling variates"""

    def test_deterministic(self, cfg):
        e = horizontal_edge(10, -4, 7)
        assert uniform_at(cfg, e) == uniform_at(ConfigSeed(master_seed=20240607, trial=3), e)

    def test_trial_changes_variate(self, cfg):
        e = horizontal_edge(10, -4, 7)
        other = ConfigSeed(master_seed=cfg.master_seed, trial=cfg.trial + 1)
        assert uniform_at(cfg, e) != uniform_at(other, e)

    def test_non_canonical_rejected(self, cfg):
        with pytest.raises(ContractViolation):
            uniform_at(cfg, EdgeId(EdgeModel.ANISO, (5, 0), HORIZONTAL, -2))

    def test_mean_and_range(self, cfg):
        x = np.arange(100_000, dtype=np.int64)
        u = uniform_words(cfg.key, line_words(x, 1))
        assert u.min() >= 0.0
        assert u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.005

    def test_vector_matches_scalar_oriented(self, cfg):
        xs = np.array([-3, 0, 4, 11], dtype=np.int64)
        steps = np.array([2, -1, 5, -7], dtype=np.int64)
        u = uniform_words(cfg.key, oriented_words(xs, 6, steps))
        expected = [uniform_at(cfg, oriented_edge(int(x), 6, 0, int(s))) for x, s in zip(xs, steps)]
        assert u.tolist() == expected

    def test_vector_matches_scalar_oriented_2d(self, cfg):
        xs = np.array([[1, 2], [-5, 0]], dtype=np.int64)
        u = uniform_words(cfg.key, oriented_words(xs, 2, np.array([3, -3]), np.array([1, 0])))
        assert u[0] == uniform_at(cfg, oriented_edge((1, 2), 2, 1, 3))
        assert u[1] == uniform_at(cfg, oriented_edge((-5, 0), 2, 0, -3))

    def test_vector_matches_scalar_aniso(self, cfg):
        xs = np.array([0, 9, -2], dtype=np.int64)
        ys = np.array([1, 1, 5], dtype=np.int64)
        h = uniform_words(cfg.key, aniso_words(xs, ys, HORIZONTAL, 4))
        v = uniform_words(cfg.key, aniso_words(xs, ys, VERTICAL, 1))
        for j in range(3):
            assert h[j] == uniform_at(cfg, horizontal_edge(int(xs[j]), int(ys[j]), 4))
            assert v[j] == uniform_at(cfg, vertical_edge(int(xs[j]), int(ys[j])))

    def test_per_row_keys(self):
        keys = np.array([ConfigSeed(master_seed=1, trial=t).key for t in range(3)], dtype=np.uint64)
        u = uniform_words(keys, line_words(np.zeros(3, dtype=np.int64), 2))
        for t in range(3):
            assert u[t] == uniform_at(ConfigSeed(master_seed=1, trial=t), line_edge(0, 2))

    def test_neighbouring_edges_uncorrelated(self):
        trials = 50_000
        keys = np.array([ConfigSeed(master_seed=11, trial=t).key for t in range(trials)], dtype=np.uint64)
        first = uniform_words(keys, line_words(np.zeros(trials, dtype=np.int64), 1))
        second = uniform_words(keys, line_words(np.ones(trials, dtype=np.int64), 1))
        assert abs(np.corrcoef(first, second)[0, 1]) < 0.02


class TestIsOpen:
    """Test open-bond decisions"""

    def test_certain_and_impossible(self, cfg):
        e = oriented_edge(0, 0, 0, 1)
        assert is_open(cfg, e, builtin("constant", p=1.0))
        assert not is_open(cfg, e, builtin("constant", p=0.0))

    def test_truncation_nested(self, cfg):
        seq = builtin("inverse-sqrt")
        for n in range(1, 40):
            e = oriented_edge(2, 1, 0, n)
            opened = [is_open(cfg, e, seq, K) for K in (1, 5, 20, 40)]
            assert opened == sorted(opened)

    def test_beyond_truncation_closed(self, cfg):
        assert not is_open(cfg, oriented_edge(0, 0, 0, 5), builtin("constant", p=1.0), K=4)

    def test_vertical_needs_delta(self, cfg):
        with pytest.raises(DomainError):
            is_open(cfg, vertical_edge(0, 0), builtin("constant", p=0.5))
        assert is_open(cfg, vertical_edge(0, 0), builtin("constant", p=0.5), delta=1.0)

    def test_delta_on_horizontal_rejected(self, cfg):
        with pytest.raises(ContractViolation):
            is_open(cfg, horizontal_edge(0, 0, 1), builtin("constant", p=0.5), delta=0.5)

    def test_frequency(self):
        seq = builtin("constant", p=0.3)
        hits = sum(is_open(ConfigSeed(master_seed=5, trial=t), line_edge(0, 1), seq) for t in range(20_000))
        assert abs(hits / 20_000 - 0.3) < 4 * (0.3 * 0.7 / 20_000) ** 0.5


class TestEdgeReader:
    """Test the recording reader"""

    def test_records_footprint(self, cfg):
        reader = EdgeReader(cfg, builtin("constant", p=0.5), delta=0.5)
        edges = [horizontal_edge(0, 0, 1), vertical_edge(0, 0), horizontal_edge(0, 0, 1)]
        for e in edges:
            reader.is_open(e)
        assert reader.footprint == {horizontal_edge(0, 0, 1), vertical_edge(0, 0)}
        assert reader.take_footprint() == {horizontal_edge(0, 0, 1), vertical_edge(0, 0)}
        assert reader.footprint == set()

    def test_agrees_with_is_open(self, cfg):
        seq = builtin("inverse-sqrt")
        reader = EdgeReader(cfg, seq, K=10)
        for n in range(1, 15):
            e = oriented_edge(0, 0, 0, n)
            assert reader.is_open(e) == is_open(cfg, e, seq, 10)
