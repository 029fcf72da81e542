"""
Tests for block renormalization and the exploration
"""
import os
import random
import sys

import numpy as np
import pytest
from prometheus_client import REGISTRY

sys.path.insert(0, os.path.dirname(__file__))
os.environ.setdefault("PERCTRUNC_ENVIRONMENT", "testing")

from errors import DomainError, UnsatisfiableParameters
from montecarlo import within_sigmas
from renorm import (
    BlockParams,
    EventKind,
    RenormVertex,
    Sign,
    choose_block_params,
    estimate_exploration_survival,
    estimate_site_survival,
    estimate_site_threshold,
    eval_event,
    eval_T_batch,
    explore,
    exterior_boundary,
    next_vertex,
    nominal_footprint,
    prob_L,
    prob_S_exact,
    prob_T_exact,
    site_survival,
    verify_coupling,
    verify_exploration_runs,
)
from sampler import ConfigSeed
from sequences import ProbSequence, builtin

SMALL = BlockParams(k=1, M=1, K=3)


def V(v, u):
    return RenormVertex(v, u)


class TestChooseBlockParams:
    """Test the (k, M, K) search"""

    def test_constant_half(self):
        bp = choose_block_params(builtin("constant", p=0.5), 0.3)
        assert (bp.k, bp.M, bp.K) == (1, 9, 20)
        assert bp.minimal

    def test_constant_one(self):
        bp = choose_block_params(builtin("constant", p=1.0), 0.3)
        assert (bp.k, bp.M, bp.K) == (1, 1, 4)

    def test_minimality(self):
        seq = builtin("constant", p=0.5)
        bp = choose_block_params(seq, 0.3)
        target = 0.1
        assert 0.75**bp.M < target <= 0.75 ** (bp.M - 1)
        threshold = (1 - target) ** (1 / (bp.M + 1))
        assert prob_S_exact(seq, bp.k, bp.K) >= threshold
        assert prob_S_exact(seq, bp.k, bp.K - 1) < threshold

    def test_k_is_support_minimum(self):
        bp = choose_block_params(builtin("remark-p"), 0.5, horizon=3**8)
        assert bp.k == 3

    def test_square_sum_too_small(self):
        with pytest.raises(UnsatisfiableParameters):
            choose_block_params(ProbSequence.from_table({2: 0.5}), 0.3)

    def test_empty_support(self):
        with pytest.raises(UnsatisfiableParameters):
            choose_block_params(builtin("constant", p=0.0), 0.3, horizon=50)

    @pytest.mark.parametrize("epsilon", [0.0, 1.0, 1.5, -0.1])
    def test_epsilon_range(self, epsilon):
        with pytest.raises(DomainError):
            choose_block_params(builtin("constant", p=0.5), epsilon)


class TestProbabilities:
    """Test closed-form event probabilities"""

    def test_prob_L(self):
        assert prob_L(builtin("constant", p=0.3)) == pytest.approx(0.09)
        assert prob_L(ProbSequence.from_table({2: 0.5}), horizon=10) == pytest.approx(0.25)

    def test_prob_S(self):
        assert prob_S_exact(builtin("constant", p=0.5), 1, 3) == pytest.approx(0.4375)
        assert prob_S_exact(builtin("constant", p=1.0), 1, 2) == 1.0

    def test_prob_S_needs_range(self):
        with pytest.raises(DomainError):
            prob_S_exact(builtin("constant", p=0.5), 3, 3)

    def test_prob_T_small(self):
        assert prob_T_exact(builtin("constant", p=0.5), SMALL) == pytest.approx(0.4375**4 * 0.25)

    def test_prob_T_meets_target(self):
        seq = builtin("constant", p=0.5)
        bp = choose_block_params(seq, 0.3)
        assert prob_T_exact(seq, bp) >= 0.7


class TestEvents:
    """Test lazy and batched event evaluation"""

    @pytest.mark.parametrize("kind", list(EventKind))
    def test_certain(self, kind):
        cfg = ConfigSeed(master_seed=4)
        ok, footprint = eval_event(cfg, builtin("constant", p=1.0), 3, kind, 0, 0, SMALL, i=2)
        assert ok
        assert footprint <= nominal_footprint(kind, 0, 0, SMALL, i=2)

    @pytest.mark.parametrize("kind", list(EventKind))
    def test_impossible(self, kind):
        cfg = ConfigSeed(master_seed=4)
        ok, _ = eval_event(cfg, builtin("constant", p=0.0), 3, kind, 6, 2, SMALL, sign=Sign.MINUS, i=2)
        assert not ok

    def test_truncation_below_block_range(self):
        with pytest.raises(DomainError):
            eval_event(ConfigSeed(master_seed=1), builtin("constant", p=0.5), 2, EventKind.T, 0, 0, SMALL)

    def test_R_needs_length(self):
        with pytest.raises(DomainError):
            eval_event(ConfigSeed(master_seed=1), builtin("constant", p=0.5), 3, EventKind.R, 0, 0, SMALL)

    def test_nominal_T_size(self):
        edges = nominal_footprint(EventKind.T, 0, 0, SMALL)
        # S ladders: 2 columns x (M+1) rows x (K-k) lengths x 2 bonds, plus M L pairs
        assert len(edges) == 2 * 2 * 2 * 2 + 2

    def test_frequency_matches_prob_T(self):
        seq = builtin("constant", p=0.8)
        trials = 3000
        hits = sum(
            eval_event(ConfigSeed(master_seed=77, trial=t), seq, 3, EventKind.T, 0, 0, SMALL)[0]
            for t in range(trials)
        )
        assert within_sigmas(hits / trials, prob_T_exact(seq, SMALL), trials)

    def test_frequency_matches_prob_L(self):
        seq = builtin("constant", p=0.6)
        trials = 3000
        hits = sum(
            eval_event(ConfigSeed(master_seed=78, trial=t), seq, 3, EventKind.L, 4, 2, SMALL)[0]
            for t in range(trials)
        )
        assert within_sigmas(hits / trials, prob_L(seq), trials)

    @pytest.mark.parametrize("sign", list(Sign))
    def test_frequency_matches_prob_S(self, sign):
        seq = builtin("constant", p=0.6)
        trials = 3000
        hits = sum(
            eval_event(ConfigSeed(master_seed=79, trial=t), seq, 3, EventKind.S, 4, 2, SMALL, sign=sign)[0]
            for t in range(trials)
        )
        assert within_sigmas(hits / trials, prob_S_exact(seq, SMALL.k, SMALL.K), trials)

    def test_batch_matches_lazy(self):
        seq = builtin("constant", p=0.8)
        cfg = ConfigSeed(master_seed=12, trial=5)
        xs = np.array([0, 2, 4, -6, 10, 0], dtype=np.int64)
        ms = np.array([0, 0, 4, 8, 2, 12], dtype=np.int64)
        signs = np.array([1, -1, 1, -1, 1, -1], dtype=np.int64)
        batch = eval_T_batch(cfg, seq, SMALL, xs, ms, signs)
        for j in range(xs.size):
            sign = Sign.PLUS if signs[j] > 0 else Sign.MINUS
            lazy, _ = eval_event(cfg, seq, 3, EventKind.T, int(xs[j]), int(ms[j]), SMALL, sign=sign)
            assert bool(batch[j]) == lazy


class TestWedge:
    """Test the renormalized wedge and the visit order"""

    def test_outside_wedge(self):
        with pytest.raises(DomainError):
            RenormVertex(2, 1)

    def test_boundary_of_origin(self):
        assert exterior_boundary({V(0, 0)}) == {V(0, 1), V(1, 1)}

    def test_boundary_of_column(self):
        assert exterior_boundary({V(0, 0), V(0, 1)}) == {V(0, 2), V(1, 2), V(1, 1)}

    def test_next_vertex(self):
        A = {V(0, 0)}
        assert next_vertex(A, set()) == V(0, 1)
        assert next_vertex(A, {V(0, 1)}) == V(1, 1)
        assert next_vertex(A, {V(0, 1), V(1, 1)}) is None

    def test_boundary_by_enumeration(self):
        rng = random.Random(3)
        wedge = [V(v, u) for u in range(6) for v in range(u + 1)]
        for _ in range(50):
            A = {w for w in wedge if rng.random() < 0.4}
            expected = {
                w for w in [V(v, u) for u in range(8) for v in range(u + 1)]
                if w not in A and (
                    (w.v >= 1 and w.u >= 1 and V(w.v - 1, w.u - 1) in A)
                    or (w.u >= 1 and w.v <= w.u - 1 and V(w.v, w.u - 1) in A)
                )
            }
            assert exterior_boundary(A) == expected


class TestExploration:
    """Test the exploration and its coupling"""

    def test_all_accepted(self):
        cfg = ConfigSeed(master_seed=0)
        bp = BlockParams(k=1, M=1, K=4)
        state = explore(cfg, builtin("constant", p=1.0), bp, 10)
        assert state.steps == 10
        assert len(state.A) == 10
        assert not state.B
        assert state.alive
        assert [rec.vertex for rec in state.visits[:3]] == [V(0, 0), V(0, 1), V(1, 1)]

    def test_all_rejected(self):
        cfg = ConfigSeed(master_seed=0)
        state = explore(cfg, builtin("constant", p=0.0), SMALL, 10)
        assert state.steps == 1
        assert state.B == {V(0, 0)}
        assert not state.alive

    def test_truncation_below_block_range(self):
        with pytest.raises(DomainError):
            explore(ConfigSeed(master_seed=0), builtin("constant", p=0.5), SMALL, 5, K_trunc=2)

    @pytest.mark.parametrize("trial", range(4))
    def test_batched_matches_lazy(self, trial):
        cfg = ConfigSeed(master_seed=31, trial=trial)
        seq = builtin("constant", p=0.8)
        lazy = explore(cfg, seq, SMALL, 40)
        fast = explore(cfg, seq, SMALL, 40, record_footprints=False)
        assert lazy.A == fast.A
        assert lazy.B == fast.B
        assert lazy.alive == fast.alive

    @pytest.mark.parametrize("trial", range(4))
    def test_coupling_holds(self, trial):
        cfg = ConfigSeed(master_seed=8, trial=trial)
        seq = builtin("constant", p=0.8)
        state = explore(cfg, seq, SMALL, 30)
        report = verify_coupling(state, cfg, seq, SMALL)
        assert report.violations == 0
        assert report.order_checks == state.steps
        assert report.path_checks == 2 * len(state.A)

    def test_verify_needs_footprints(self):
        cfg = ConfigSeed(master_seed=8)
        seq = builtin("constant", p=0.8)
        state = explore(cfg, seq, SMALL, 5, record_footprints=False)
        with pytest.raises(DomainError):
            verify_coupling(state, cfg, seq, SMALL)

    def test_acceptance_rate_matches_prob_T(self):
        seq = builtin("constant", p=0.8)
        visits = [rec for t in range(400)
                  for rec in explore(ConfigSeed(master_seed=90, trial=t), seq, SMALL, 20,
                                     record_footprints=False).visits]
        accepted = sum(rec.accepted for rec in visits)
        assert within_sigmas(accepted / len(visits), prob_T_exact(seq, SMALL), len(visits))

    def test_counters_survive_worker_processes(self):
        def sample(check):
            return REGISTRY.get_sample_value("perctrunc_coupling_checks_total", {"check": check}) or 0.0

        before, before_fp = sample("exploration_paths"), sample("exploration_footprints")
        report = verify_exploration_runs(builtin("constant", p=0.8), SMALL, 4, 10, master_seed=5, workers=2)
        assert sample("exploration_paths") - before == report.path_checks
        assert sample("exploration_footprints") - before_fp == report.footprint_edges
        assert report.footprint_edges > 0

    def test_verify_runs(self):
        report = verify_exploration_runs(builtin("constant", p=0.8), SMALL, 6, 20, master_seed=5, workers=1)
        assert report.runs == 6
        assert report.violations == 0

    @pytest.mark.slow
    def test_coupling_at_desk_parameters(self):
        seq = builtin("constant", p=0.5)
        bp = choose_block_params(seq, 0.3)
        report = verify_exploration_runs(seq, bp, 50, 50, master_seed=2024, workers=1)
        assert report.violations == 0
        assert report.runs == 50


class TestSurvival:
    """Test exploration and site survival"""

    def test_site_survival_extremes(self):
        assert site_survival(1.0, 20, 0, 0)
        assert not site_survival(0.0, 20, 0, 0)

    def test_site_survival_estimate(self):
        low = estimate_site_survival(0.5, 40, 200, master_seed=2, workers=1)
        high = estimate_site_survival(0.9, 40, 200, master_seed=2, workers=1)
        assert low.ci_high < high.ci_low

    def test_site_gamma_range(self):
        with pytest.raises(DomainError):
            site_survival(1.5, 10, 0, 0)

    def test_site_threshold_coupled_curves(self):
        est = estimate_site_threshold([0.6, 0.65, 0.7, 0.75, 0.8], 64, 300, master_seed=1)
        assert 0.6 <= est.threshold <= 0.8
        assert est.heights == (32, 64)
        assert est.survival_long == sorted(est.survival_long)
        assert all(s >= l for s, l in zip(est.survival_short, est.survival_long))

    @pytest.mark.slow
    def test_supercritical(self):
        result = estimate_exploration_survival(builtin("constant", p=0.5), 0.05, 60, 300, master_seed=3, workers=1)
        assert result.prob_T >= 0.95
        assert result.estimate.estimate >= 0.5

    @pytest.mark.slow
    def test_subcritical(self):
        result = estimate_exploration_survival(builtin("constant", p=0.5), 0.9, 200, 400, master_seed=3, workers=1)
        assert result.prob_T < result.reference_threshold
        assert result.estimate.estimate <= 0.05
