import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from icqkd.adversary import (
    HALF, QUARTER, ChannelParams, EveKind, EveStrategy, EveTarget, Party, ResendPolicy,
    apply_channel, eve_intercept_resend, eve_pns, intercept_resend_arrays, pns_arrays,
)
from icqkd.analysis import session_stats
from icqkd.config import SessionConfig, with_overrides
from icqkd.optics import PulsePair
from icqkd.protocol import RoundBatch, iter_batches
from icqkd.session import run_session
from icqkd import theory

IR = EveStrategy(EveKind.INTERCEPT_RESEND)
PNS = EveStrategy(EveKind.PNS)


def _eve_u(count_plus, count_minus, guess=0.25):
    # angle, count+, count-, thin+, thin-, dark+, dark-, guess
    return np.array([[0.1, count_plus, count_minus, 0.5, 0.5, 0.99, 0.99, guess]])


class TestChannel:
    def test_identity(self):
        p = PulsePair(0.1, 0.1, HALF)
        assert apply_channel(p, ChannelParams(), Party.BOB) == p

    def test_halving(self):
        p = apply_channel(PulsePair(0.1, 0.1, HALF), ChannelParams(0.5, 0.5), Party.ALICE)
        assert (p.n_x, p.n_y) == pytest.approx((0.05, 0.05))

    def test_per_party(self):
        params = ChannelParams(0.2, 0.7)
        assert apply_channel(PulsePair(1, 1, 0), params, Party.ALICE).n_x == pytest.approx(0.2)
        assert apply_channel(PulsePair(1, 1, 0), params, Party.BOB).n_y == pytest.approx(0.7)

    def test_total_loss(self):
        p = apply_channel(PulsePair(0.1, 0.1, HALF), ChannelParams(0.0, 0.0), Party.BOB)
        assert p.total == 0
        config = SessionConfig(n_c=0.5, rounds=5000, channel=ChannelParams(1.0, 0.0))
        assert session_stats(run_session(config)).coincident == 0

    def test_rejects_gain(self):
        with pytest.raises(ValueError):
            ChannelParams(1.5, 1.0)


class TestInterceptResend:
    def test_plus_click_infers_minus_90(self):
        r = intercept_resend_arrays(np.array([0.1]), np.array([0.1]), np.array([-HALF]), 0.0, IR, 0.1,
                                    _eve_u(0.99, 0.0))
        assert r.click[0] == 1
        assert r.inferred[0] == pytest.approx(-HALF) and r.phi_m[0] == pytest.approx(-HALF)
        assert not r.guessed[0] and r.n_x[0] == r.n_y[0] == 0.1

    def test_minus_click_infers_plus_90(self):
        r = intercept_resend_arrays(np.array([0.1]), np.array([0.1]), np.array([HALF]), 0.0, IR, 0.1,
                                    _eve_u(0.0, 0.99))
        assert r.click[0] == 2 and r.inferred[0] == pytest.approx(HALF)

    def test_vacuum_resends_vacuum(self):
        strat = EveStrategy(EveKind.INTERCEPT_RESEND, resend_policy=ResendPolicy.RESEND_ON_CLICK_ELSE_VACUUM)
        r = intercept_resend_arrays(np.array([0.1]), np.array([0.1]), np.array([HALF]), 0.0, strat, 0.1,
                                    _eve_u(0.0, 0.0))
        assert r.click[0] == 0 and r.n_x[0] == 0 and r.n_y[0] == 0 and np.isnan(r.inferred[0])

    @pytest.mark.parametrize("u_guess,phase", [(0.25, HALF), (0.75, -HALF)])
    def test_vacuum_guess(self, u_guess, phase):
        r = intercept_resend_arrays(np.array([0.1]), np.array([0.1]), np.array([HALF]), 0.0, IR, 0.1,
                                    _eve_u(0.0, 0.0, u_guess))
        assert r.guessed[0] and r.phi_m[0] == pytest.approx(phase) and r.n_x[0] == 0.1

    def test_scalar_wrapper(self):
        rng = np.random.default_rng(7)
        pulse = PulsePair(0.1, 0.1, -HALF)
        seen = set()
        for i in range(3000):
            resent, rec = eve_intercept_resend(pulse, IR, rng, i)
            seen.add(rec.measured_click)
            if rec.measured_click == "+":
                assert rec.inferred_phi_m == pytest.approx(-HALF) and resent.phi_m == pytest.approx(-HALF)
            assert rec.measured_click != "-"  # the '-' port is dark at this phase
        assert {"+", "none"} <= seen

    def test_wrong_kind(self):
        with pytest.raises(ValueError):
            eve_intercept_resend(PulsePair(0.1, 0.1, HALF), PNS, np.random.default_rng(0))
        with pytest.raises(ValueError):
            eve_pns(PulsePair(0.1, 0.1, HALF), np.random.default_rng(0), IR)

    def test_error_rate_matches_oracle(self, ir_config):
        # Eve at +45 deg always reads phi_m correctly when she clicks; on vacuum she guesses,
        # and a wrong guess flips Bob's outcome. Error per coincidence: 1/2 * e^(-2 n_c).
        oracle = 0.5 * math.exp(-0.2)
        assert oracle == pytest.approx(0.40936537, abs=1e-8)
        assert theory.intercept_resend_expectation(ir_config).qber == pytest.approx(oracle, abs=1e-12)
        config = with_overrides(ir_config, rounds=200_000, error_check_fraction=0.0)
        st_ = session_stats(run_session(config))
        sd = math.sqrt(oracle * (1 - oracle) / st_.sifted)
        assert abs(st_.qber - oracle) < 5 * sd

    def test_random_angle_oracle(self, ir_config):
        config = with_overrides(ir_config, **{"eve.theta_deg": "random"})
        assert theory.intercept_resend_expectation(config).qber == pytest.approx(0.5 * math.exp(-0.2), abs=1e-12)

    def test_session_errors_positive(self, ir_config):
        st_ = session_stats(run_session(ir_config))
        assert st_.qber > 0 and st_.error_check_rate > 0

    def test_both_beams(self, ir_config):
        config = with_overrides(ir_config, rounds=50_000, **{"eve.target": "both"})
        assert config.eve.target is EveTarget.BOTH
        assert session_stats(run_session(config)).qber > 0.3


class TestPNS:
    def test_vacuum_never_steals(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            fwd, rec = eve_pns(PulsePair(0.0, 0.0, HALF), rng)
            assert not rec.stole_photon and fwd.total == 0

    def test_threshold(self):
        mu = 0.2
        p01 = math.exp(-mu) * (1 + mu)
        _, _, stole = pns_arrays(0.1, 0.1, np.array([p01 - 1e-9, p01 + 1e-9]))
        assert stole.tolist() == [False, True]

    @given(nx=st.floats(0, 0.99), ny=st.floats(0, 0.99), u=st.floats(0, 1, exclude_max=True))
    def test_forwarded_scaling(self, nx, ny, u):
        fx, fy, stole = pns_arrays(nx, ny, u)
        if not stole:
            assert (float(fx), float(fy)) == (nx, ny)
        else:
            ratio = float(fx + fy) / (nx + ny)
            k = round(1 / (1 - ratio))
            assert k >= 2 and ratio == pytest.approx((k - 1) / k)

    def test_stolen_fraction(self):
        n = 300_000
        b = RoundBatch.concat(list(iter_batches(SessionConfig(n_c=0.1, rounds=n, seed=3, eve=PNS))))
        p = 1 - math.exp(-0.2) * 1.2
        assert abs(b.eve_stole.mean() - p) < 5 * math.sqrt(p * (1 - p) / n)

    def test_pns_leaves_key_intact(self):
        st_ = session_stats(run_session(SessionConfig(n_c=0.3, rounds=100_000, seed=4, eve=PNS)))
        assert st_.qber == 0.0 and not st_.eve_detection and st_.pns_stolen > 0

    def test_leak_matches_enumeration(self):
        config = SessionConfig(n_c=0.1, rounds=1_000_000, seed=8, eve=PNS)
        st_ = session_stats(run_session(config))
        p = theory.pns_stolen_coincident_fraction(config)
        assert abs(st_.pns_leak_fraction - p) < 5 * math.sqrt(p * (1 - p) / st_.coincident)
