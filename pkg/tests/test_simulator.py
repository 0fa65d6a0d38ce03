import numpy as np
import pytest

from steerlab.datasets import REFERENCE_COEFFICIENTS
from steerlab.fitting import fit_model
from steerlab.metrics import (
    format_trajlog,
    movement_time,
    out_of_path_movement,
    resample,
    trial_measures,
)
from steerlab.models import Coefficients, ModelForm, TrialFeatures, predict
from steerlab.simulator import AgentConfig, simulate_corpus, simulate_trial


@pytest.fixture()
def quiet_cfg():
    return AgentConfig(base_speed=0.25, beta=0.0, lateral_noise_sd=0.0, lookahead=40.0)


class TestSimulateTrial:
    def test_straight_noiseless_kinematics(self, straight_tunnel, quiet_cfg):
        traj = simulate_trial(straight_tunnel, quiet_cfg, trial_id="S")
        mt = movement_time(traj)
        expected = 2 * 1300.0 / 0.25
        assert abs(mt - expected) <= 5.0 + 1e-9  # one 200 Hz sample period
        assert out_of_path_movement(traj, straight_tunnel) == 0.0

    def test_deterministic_logs(self, straight_tunnel):
        cfg = AgentConfig(base_speed=0.3, beta=0.5, lateral_noise_sd=5.0, seed=123)
        a = simulate_trial(straight_tunnel, cfg, trial_id="L0-K0", repetition=3)
        b = simulate_trial(straight_tunnel, cfg, trial_id="L0-K0", repetition=3)
        assert format_trajlog(a) == format_trajlog(b)
        c = simulate_trial(straight_tunnel, cfg, trial_id="L0-K0", repetition=4)
        assert format_trajlog(c) != format_trajlog(a)

    def test_event_structure(self, straight_tunnel, quiet_cfg):
        traj = simulate_trial(straight_tunnel, quiet_cfg, trial_id="S")
        kinds = [k for _, k in traj.events]
        assert kinds == ["start_click", "flag_click", "end_click"]
        out, back = traj.events[1][0] - traj.events[0][0], traj.events[2][0] - traj.events[1][0]
        assert out == pytest.approx(back, rel=0.01)

    def test_lookahead_validation(self, straight_tunnel):
        with pytest.raises(ValueError, match="lookahead"):
            simulate_trial(
                straight_tunnel, AgentConfig(lookahead=2000.0), trial_id="S"
            )

    def test_curvature_slows_agent(self, trialset9):
        cfg = AgentConfig(base_speed=0.25, beta=0.6, curvature_gain=150.0)
        by_k = {}
        for trial in trialset9:
            if trial.level_L != 0:
                continue
            tunnel = trial.tunnel(4096)
            traj = simulate_trial(tunnel, cfg, trial_id=trial.trial_id)
            m = trial_measures(resample(traj), tunnel)
            by_k[trial.level_K] = m.v_avg
        assert by_k[0] > by_k[1] > by_k[2]


class TestSimulateCorpus:
    def test_corpus_size(self, trialset9):
        logs = simulate_corpus(trialset9, participants=2, repetitions=3, seed=1,
                               cfg=AgentConfig(lateral_noise_sd=2.0), tunnel_samples=2048)
        assert len(logs) == 2 * 3 * 9
        ids = {(t.participant_id, t.trial_id, t.repetition) for t in logs}
        assert len(ids) == len(logs)

    def test_single_log(self, trialset9):
        logs = simulate_corpus(trialset9[:1] * 1, participants=1, repetitions=1,
                               tunnel_samples=2048)
        assert len(logs) == 1

    def test_block_structure_precondition(self, trialset9):
        with pytest.raises(ValueError, match="divisible by 3"):
            simulate_corpus(trialset9, 1, 4, block_structure=True, tunnel_samples=1024)

    def test_measure_invariants_on_corpus(self, trialset9, tunnels9):
        logs = simulate_corpus(
            trialset9, participants=2, repetitions=2, seed=3,
            cfg=AgentConfig(lateral_noise_sd=6.0, beta=0.4), tunnel_samples=8192,
        )
        for traj in logs[:12]:
            m = trial_measures(resample(traj), tunnels9[traj.trial_id])
            assert 0.0 <= m.opm <= 1.0
            assert m.v_avg * m.mt == pytest.approx(m.path_distance, rel=1e-9)

    def test_seeded_reproducibility(self, trialset9):
        a = simulate_corpus(trialset9, 2, 2, seed=42, tunnel_samples=2048,
                            cfg=AgentConfig(lateral_noise_sd=3.0))
        b = simulate_corpus(trialset9, 2, 2, seed=42, tunnel_samples=2048,
                            cfg=AgentConfig(lateral_noise_sd=3.0))
        assert all(format_trajlog(x) == format_trajlog(y) for x, y in zip(a, b))


class TestRecovery:
    def test_sl_base_slope_recovery(self, trialset9):
        cfg = AgentConfig(base_speed=0.25, beta=0.0, lateral_noise_sd=0.0)
        feats = []
        for trial in trialset9:
            tunnel = trial.tunnel(4096)
            traj = simulate_trial(tunnel, cfg, trial_id=trial.trial_id)
            feats.append(
                TrialFeatures(
                    L=trial.length, K=trial.total_curvature,
                    mt_mean=movement_time(traj), trial_id=trial.trial_id,
                )
            )
        fit = fit_model(ModelForm("SL_BASE"), feats)
        assert fit.coefficient("b") == pytest.approx(2.0 / 0.25, rel=0.01)

    def test_planted_model_ci_coverage(self):
        # direct noisy regeneration from a published model: the 95% CIs should
        # cover the true coefficients at roughly nominal rate
        from steerlab.datasets import reference_features

        feats = reference_features()
        form = ModelForm("COMP_LOGK")
        truth = Coefficients(**REFERENCE_COEFFICIENTS["COMP_LOGK"])
        true_vec = truth.for_form(form)
        mu = np.array([predict(form, truth, f) for f in feats])
        covered = np.zeros(form.n_coefficients)
        n_rep = 200
        rng = np.random.default_rng(2024)
        for _ in range(n_rep):
            y = mu + rng.normal(0.0, 300.0, size=len(mu))
            fit = fit_model(form, feats, y)
            covered += (fit.ci95_low <= true_vec) & (true_vec <= fit.ci95_high)
        rates = covered / n_rep
        assert np.all(rates >= 0.88) and np.all(rates <= 0.99)
