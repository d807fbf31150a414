import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ground_state
from nlslab.classifier import CLAIM_STRENGTH, Verdict, classify, finite_variance
from nlslab.errors import ValidationError
from nlslab.grid import RadialField
from nlslab.potentials import GaussianBump, InverseSquare, Saturating


@pytest.mark.parametrize("lam, verdict", [
    (0.5, Verdict.SCATTERS), (0.9, Verdict.SCATTERS),
    (1.0, Verdict.INDETERMINATE), (1.1, Verdict.BLOWUP),
])
def test_lambda_q_verdicts_without_potential(gs3, lam, verdict):
    assert classify(gs3.profile * lam, None, 3.0, gs3).verdict == verdict


@settings(max_examples=12, deadline=None)
@given(st.one_of(st.floats(0.3, 0.98), st.floats(1.02, 1.4)))
def test_verdict_follows_side_of_threshold(lam):
    gs = ground_state(3.0)
    v = classify(gs.profile * lam, None, 3.0, gs).verdict
    assert v == (Verdict.SCATTERS if lam < 1 else Verdict.BLOWUP)


def test_attractive_potential_weakens_claim(gs3):
    rep = classify(gs3.profile * 0.9, GaussianBump(-0.05, 1.0), 3.0, gs3)
    assert rep.verdict == Verdict.GLOBAL_BOUNDED
    assert CLAIM_STRENGTH[rep.verdict] < CLAIM_STRENGTH[Verdict.SCATTERS]


def test_repulsive_inverse_square_keeps_scattering_side(gs3):
    rep = classify(gs3.profile * 0.8, InverseSquare(0.5, 1.0, 8.0), 3.0, gs3)
    assert rep.verdict == Verdict.SCATTERS
    assert rep.qualifiers == ()


def test_window_only_hypotheses_are_qualified(gs3):
    rep = classify(gs3.profile * 1.1, Saturating(0.1, 2.0), 3.0, gs3)
    assert rep.verdict == Verdict.BLOWUP
    assert any("window" in q for q in rep.qualifiers)


def test_mass_critical_negative_energy_branch(gs_mc):
    rep = classify(gs_mc.profile * 1.2, Saturating(0.1, 2.0), 7 / 3, gs_mc)
    assert rep.verdict == Verdict.NEGATIVE_ENERGY_BLOWUP
    assert rep.snapshot.energy_v < 0


def test_report_serializes(gs3):
    rep = classify(gs3.profile * 0.9, None, 3.0, gs3)
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["verdict"] == "Scatters"
    assert all({"condition", "satisfied", "provenance"} <= set(h) for h in d["hypothesis_trace"])


def test_zero_data_and_exponent_mismatch_rejected(gs3):
    with pytest.raises(ValidationError):
        classify(gs3.profile * 0.0, None, 3.0, gs3)
    with pytest.raises(ValidationError):
        classify(gs3.profile, None, 3.5, gs3)


def test_finite_variance_detects_slow_tail(grid):
    assert finite_variance(RadialField.from_function(grid, lambda r: np.exp(-r ** 2)))
    assert not finite_variance(RadialField.from_function(grid, lambda r: (1 + r ** 2) ** -1.1))
