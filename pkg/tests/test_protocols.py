import itertools

import pytest

from ltot import quantum as q
from ltot.acceptance import role_switch_table, unfair_exhaustive
from ltot.engine import ALICE, BOB, ChannelConfig, Completed, UnknownProtocol, run_protocol, run_trials
from ltot.protocols import (
    CKS10_POVM, PHI, QUTRIT_PHASE, REGISTRY, CheatProfile, SenderBits, WcfSpec, build_protocol,
    cks10_alice_views, cks10_rot, combined_from_base, combined_rot, derandomize_alice,
    ot_from_rot, prototype_rot, role_switch, rot_black_box, unfair_lt_rot,
)


@pytest.mark.parametrize("b,x0,x1", list(itertools.product((0, 1), repeat=3)))
def test_cks10_decoding_is_certain(b, x0, x1):
    back = q.apply_unitary(PHI[b], QUTRIT_PHASE[x0, x1], [1])
    probs = q.born_probabilities(back, CKS10_POVM[b])
    # outcome 0 is "still phi_b", i.e. the applied phase was +1
    assert probs[(x0, x1)[b]] == pytest.approx(1.0, abs=1e-12)


def test_unfair_decoding_is_certain_on_all_16_tuples():
    rows = unfair_exhaustive()
    assert len(rows) == 16
    assert all(p == pytest.approx(1.0, abs=1e-12) for _, p in rows)


def test_cks10_alice_views():
    views = cks10_alice_views()
    assert views[0].matrix.diagonal().real.round(12).tolist() == [0.5, 0, 0.5]
    assert views[1].matrix.diagonal().real.round(12).tolist() == [0, 0.5, 0.5]


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_every_registered_protocol_is_correct_when_honest(name):
    p = build_protocol(name, WcfSpec(0.7, 0.6))
    outcome, _ = run_protocol(p, p.alice, p.bob, ChannelConfig(loss_rate=0.3), 5)
    assert isinstance(outcome, Completed)
    if p.kind == "wcf":
        assert outcome.alice_output == outcome.bob_output
    else:
        st = run_trials(p, p.alice, p.bob, ChannelConfig(loss_rate=0.3), 150, 5)
        assert st.successes == st.n == 150


def test_unknown_protocol():
    with pytest.raises(UnknownProtocol):
        build_protocol("foo")


def test_role_switch_truth_table():
    rows = role_switch_table()
    assert len(rows) == 16 and all(ok for _, ok in rows)


@pytest.mark.parametrize("x0,x1,b", list(itertools.product((0, 1), repeat=3)))
def test_role_switch_over_fixed_inner_outputs(x0, x1, b):
    p = role_switch(rot_black_box(0.5, 0.5, fixed=(x0, x1, b)))
    for seed in range(8):
        out, _ = run_protocol(p, p.alice, p.bob, ChannelConfig(), seed)
        a, r = out.alice_output, out.bob_output
        assert a.x0 ^ a.x1 == b
        assert r.b == x0 ^ x1
        assert r.xb == (a.x0, a.x1)[r.b]


def test_role_switch_swaps_profile():
    assert role_switch(unfair_lt_rot()).profile == CheatProfile(1.0, 0.5)
    assert role_switch(role_switch(cks10_rot())).profile == cks10_rot().profile


def test_derandomization_all_64_cases():
    for m0, m1, want, x0, x1, b in itertools.product((0, 1), repeat=6):
        p = ot_from_rot(rot_black_box(0.5, 0.5, fixed=(x0, x1, b)))
        out, _ = run_protocol(p, p.alice, p.bob, ChannelConfig(), 0, ((m0, m1), want))
        assert out.bob_output.b == want
        assert out.bob_output.xb == (m0, m1)[want]
        assert (out.alice_output.x0, out.alice_output.x1) == (m0, m1)


def test_derandomize_alice_flip_mask():
    held, flips = derandomize_alice((1, 1), SenderBits(0, 1), mismatch=1)
    assert held == (1, 0)
    assert flips == (0, 1)


def test_prototype_is_correct():
    p = prototype_rot(WcfSpec(0.5, 0.5))
    st = run_trials(p, p.alice, p.bob, ChannelConfig(), 300, 2)
    assert st.successes == st.n == 300


def test_combined_rot_validation():
    wcf = WcfSpec(0.5, 0.5)
    with pytest.raises(ValueError):
        combined_rot(wcf, rot_black_box(0.6, 0.9), rot_black_box(0.9, 0.6))
    with pytest.raises(ValueError):
        combined_rot(wcf, rot_black_box(0.9, 0.6), rot_black_box(0.9, 0.6))
    p = combined_from_base(wcf, unfair_lt_rot())
    assert p.param("rot_xy").name == "role-switch"
    assert p.profile == CheatProfile(0.75, 0.75)


def test_probability_ranges_validated():
    with pytest.raises(ValueError):
        WcfSpec(0.4, 0.5)
    with pytest.raises(ValueError):
        CheatProfile(0.5, 1.1)


def test_ot_inputs_drawn_when_omitted():
    p = ot_from_rot(cks10_rot())
    _, tr = run_protocol(p, p.alice, p.bob, ChannelConfig(), 3)
    assert [e.sender for e in tr.of_kind("input")] == [ALICE, BOB]
