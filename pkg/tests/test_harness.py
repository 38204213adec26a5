"""End-to-end session and sweep tests on a small trained scene."""
import numpy as np
import pytest

from fddkey.harness import (
    ModelBundle,
    SessionConfig,
    SweepResult,
    min_snr_for_ker,
    normalizer_sidecar_path,
    run_session,
    run_sweep,
)
from fddkey.features import fit_normalizers, normalize_dataset
from fddkey.network import ArchSpec, TrainConfig, train
from fddkey.quantizer import QuantConfig
from worlds import build_datasets, make_world, train_bundle, untrained_bundle


@pytest.fixture(scope="module")
def world():
    return make_world()


@pytest.fixture(scope="module")
def bundle(world):
    trained, trace = train_bundle(world)
    # The scene is learnable; everything downstream assumes a usable model.
    assert trace[-1]["eval_nmse"] < 0.05
    return trained


def session_config(world, position_index=37, snr_db=np.inf, seed=3, **overrides):
    pos = tuple(world["positions"][position_index])
    kwargs = dict(environment=world["env"], band1=world["band1"],
                  band2=world["band2"], bob_position=pos,
                  eve_position=(pos[0] + 0.15, pos[1], pos[2]),
                  snr_db_alice=snr_db, snr_db_bob=snr_db, snr_db_eve=snr_db,
                  seed=seed)
    kwargs.update(overrides)
    return SessionConfig(**kwargs)


class TestSessionConfig:
    def test_rejects_colocated_eavesdropper(self, world):
        pos = tuple(world["positions"][0])
        with pytest.raises(ValueError, match="decorrelation distance"):
            session_config(world, eve_position=(pos[0] + 0.01, pos[1], pos[2]),
                           bob_position=pos)

    def test_hash_is_stable_and_sensitive(self, world):
        a = session_config(world)
        b = session_config(world)
        c = session_config(world, seed=4)
        assert a.config_hash() == b.config_hash()
        assert len(a.config_hash()) == 16
        assert a.config_hash() != c.config_hash()


class TestModelBundle:
    def test_sidecar_path(self):
        assert normalizer_sidecar_path("model.fddn") == "model.normalizers.json"
        assert (normalizer_sidecar_path("runs.v2/net")
                == "runs.v2/net.normalizers.json")

    def test_save_load_round_trip(self, bundle, tmp_path):
        path = tmp_path / "model.fddn"
        bundle.save(path)
        back = ModelBundle.load(path)
        assert back.params.arch == bundle.params.arch
        for w, bw in zip(bundle.params.weights, back.params.weights):
            np.testing.assert_array_equal(w, bw)
        np.testing.assert_array_equal(back.norm1.data_min_,
                                      bundle.norm1.data_min_)
        np.testing.assert_array_equal(back.norm2.data_max_,
                                      bundle.norm2.data_max_)

    def test_load_missing_names_path(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="absent"):
            ModelBundle.load(tmp_path / "absent.fddn")


class TestRunSession:
    def test_deterministic(self, world, bundle):
        cfg = session_config(world, snr_db=15.0)
        a = run_session(cfg, bundle)
        b = run_session(cfg, bundle)
        np.testing.assert_array_equal(a.bits_alice, b.bits_alice)
        np.testing.assert_array_equal(a.bits_eve, b.bits_eve)
        assert a.metrics_dict() == b.metrics_dict()

    def test_result_consistency(self, world, bundle):
        r = run_session(session_config(world, snr_db=20.0), bundle)
        n_sub = world["band2"].n_subcarriers
        assert r.bits_alice.size == r.bits_bob.size == r.bits_eve.size
        assert set(np.unique(r.bits_alice)) <= {0, 1}
        assert r.kgr == pytest.approx(r.bits_alice.size / n_sub)
        # Alignment only ever discards indices.
        assert r.kgr <= min(r.kgr_pre_alice, r.kgr_pre_bob)
        assert 0.0 <= r.ker <= 1.0
        assert r.config_hash == session_config(world, snr_db=20.0).config_hash()

    def test_checkpoint_width_mismatch(self, world, bundle):
        from fddkey.channel import BandConfig
        narrow = BandConfig(label="band1", f_center_hz=2.4e9,
                            bandwidth_hz=0.5e9, n_subcarriers=4)
        with pytest.raises(ValueError, match="checkpoint expects"):
            run_session(session_config(world, band1=narrow), bundle)

    def test_overfit_pair_reaches_zero_error(self, world):
        # A network driven to machine-precision fit on one pair must agree
        # with the user exactly when measurements are noise-free: surviving
        # features sit strictly inside matching intervals on both sides.
        train_set, _ = build_datasets(world)
        norm1, norm2 = fit_normalizers(train_set)
        one = normalize_dataset(train_set, norm1, norm2).subset([10])
        arch = ArchSpec(layer_sizes=(one.n_features, 32, one.n_features))
        cfg = TrainConfig(epochs=300, batch_size=1, seed=1, learning_rate=1e-2)
        params, trace = train(arch, one, cfg, one)
        assert trace[-1]["eval_nmse"] < 1e-10
        over = ModelBundle(params=params, norm1=norm1, norm2=norm2)
        pid = int(one.position_ids[0])
        result = run_session(session_config(world, position_index=pid, seed=5),
                             over)
        assert result.ker == 0.0
        assert result.bits_alice.size > 0

    def test_untrained_network_gives_no_advantage(self, world, bundle):
        fresh = untrained_bundle(world)
        cfg = session_config(world, snr_db=25.0)
        raw = run_session(cfg, fresh)
        trained = run_session(cfg, bundle)
        # Fresh initialization leaves the mapped features no closer to the
        # user's than the unmapped ones were; training changes that.
        assert raw.nvd_ab_post > 0.5 * raw.nvd_ab_pre
        assert trained.nvd_ab_post < 0.5 * raw.nvd_ab_post


class TestRunSweep:
    def test_shapes_and_reproducibility(self, world, bundle):
        kwargs = dict(positions=world["positions"], swept_name="snr_db",
                      values=[0.0, 20.0], n_sessions=4, seed=9)
        a = run_sweep(world["env"], world["band1"], world["band2"], bundle,
                      **kwargs)
        b = run_sweep(world["env"], world["band1"], world["band2"], bundle,
                      **kwargs)
        assert len(a.rows) == 2
        assert len(a.sessions) == 8
        assert a.rows == b.rows
        assert a.sessions == b.sessions
        expected_keys = {"snr_db", "ker", "kgr", "nmse", "nvd_ab_pre",
                         "nvd_ab_post", "nvd_eb", "n_sessions"}
        assert set(a.rows[0]) == expected_keys
        assert a.rows[0]["n_sessions"] == 4
        assert a.session_values(20.0, "ker").size == 4

    def test_session_records_carry_audit_fields(self, world, bundle):
        sweep = run_sweep(world["env"], world["band1"], world["band2"], bundle,
                          world["positions"], "snr_db", [10.0], n_sessions=3,
                          seed=1)
        seeds = {rec["seed"] for rec in sweep.sessions}
        assert len(seeds) == 3
        for rec in sweep.sessions:
            assert len(rec["config_hash"]) == 16
            assert rec["key_bits"] >= 0

    def test_noise_hurts(self, world, bundle):
        sweep = run_sweep(world["env"], world["band1"], world["band2"], bundle,
                          world["positions"], "snr_db", [0.0, 40.0],
                          n_sessions=25, seed=4)
        noisy, clean = sweep.rows
        assert clean["ker"] < noisy["ker"]
        assert clean["nvd_ab_post"] < noisy["nvd_ab_post"]

    def test_guard_sweep_monotone(self, world, bundle):
        sweep = run_sweep(world["env"], world["band1"], world["band2"], bundle,
                          world["positions"], "guard_factor",
                          [0.02, 0.05, 0.1, 0.15, 0.2], n_sessions=25,
                          snr_db=10.0, seed=4)
        kers = [row["ker"] for row in sweep.rows]
        kgrs = [row["kgr"] for row in sweep.rows]
        # Wider guards drop the boundary-adjacent (error-prone) features
        # first: both the error rate and the key yield shrink.
        assert all(b <= a + 1e-12 for a, b in zip(kers, kers[1:]))
        assert all(b < a for a, b in zip(kgrs, kgrs[1:]))

    def test_levels_sweep_trades_rate_for_errors(self, world, bundle):
        sweep = run_sweep(world["env"], world["band1"], world["band2"], bundle,
                          world["positions"], "levels", [2, 4], n_sessions=25,
                          snr_db=10.0, quant=QuantConfig(levels=2,
                                                         guard_factor=0.05),
                          seed=4)
        two, four = sweep.rows
        assert four["kgr"] > two["kgr"]
        assert four["ker"] > two["ker"]

    def test_eavesdropper_gap(self, world, bundle):
        sweep = run_sweep(world["env"], world["band1"], world["band2"], bundle,
                          world["positions"], "snr_db", [25.0], n_sessions=30,
                          seed=6)
        post = np.median(sweep.session_values(25.0, "nvd_ab_post"))
        eve = np.median(sweep.session_values(25.0, "nvd_eb"))
        assert post < eve

    def test_rejects_unknown_variable(self, world, bundle):
        with pytest.raises(ValueError, match="swept variable"):
            run_sweep(world["env"], world["band1"], world["band2"], bundle,
                      world["positions"], "epochs", [1])


class TestMinSnr:
    def fake_sweep(self, kers):
        rows = [{"snr_db": snr, "ker": k}
                for snr, k in zip([0, 10, 20, 30, 40], kers)]
        return SweepResult(swept_name="snr_db", rows=rows, sessions=[])

    def test_picks_first_qualifying_point(self):
        sweep = self.fake_sweep([0.4, 0.2, 0.08, 0.05, 0.04])
        assert min_snr_for_ker(sweep) == 20

    def test_inf_when_never_reached(self):
        sweep = self.fake_sweep([0.4, 0.3, 0.3, 0.2, 0.15])
        assert min_snr_for_ker(sweep) == float("inf")

    def test_requires_snr_sweep(self):
        sweep = SweepResult(swept_name="guard_factor", rows=[], sessions=[])
        with pytest.raises(ValueError, match="snr_db"):
            min_snr_for_ker(sweep)
