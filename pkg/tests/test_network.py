import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mecopt import network as net


def small_cfg(**kwargs):
    defaults = dict(bs_density=5.0, area_radius=0.8, ue_per_bs=2,
                    num_clusters=2, nt=4, nr=2, shadowing_sigma=8.0, seed=0)
    defaults.update(kwargs)
    return net.NetworkConfig(**defaults)


class TestPathloss:
    def test_reference_distances(self):
        assert net.pathloss_db(1.0) == pytest.approx(148.1)
        assert net.pathloss_db(0.1) == pytest.approx(110.5)
        assert net.pathloss_db(0.5) == pytest.approx(
            148.1 - 37.6 * math.log10(2), abs=1e-9)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            net.pathloss_db(0.0)
        with pytest.raises(ValueError):
            net.pathloss_db(-1.0)

    @given(st.floats(min_value=1e-3, max_value=50.0),
           st.floats(min_value=1.01, max_value=2.0))
    def test_monotone_in_distance(self, d, factor):
        assert net.pathloss_db(d * factor) > net.pathloss_db(d)


class TestNoisePower:
    def test_five_mhz(self):
        cfg = small_cfg(bandwidth_hz=5e6, noise_psd_dbm=-174.0)
        assert net.noise_power(cfg) == pytest.approx(1.99e-14, rel=1e-2)
        expected = 10 ** ((-174 + 10 * math.log10(5e6) - 30) / 10)
        assert net.noise_power(cfg) == pytest.approx(expected, rel=1e-12)

    def test_one_hz(self):
        cfg = small_cfg(bandwidth_hz=1.0)
        assert net.noise_power(cfg) == pytest.approx(10 ** -20.4, rel=1e-12)

    def test_linear_in_bandwidth(self):
        assert net.noise_power(small_cfg(bandwidth_hz=2e6)) == pytest.approx(
            2 * net.noise_power(small_cfg(bandwidth_hz=1e6)), rel=1e-12)


class TestTopology:
    def test_deterministic_under_seed(self):
        cfg = small_cfg()
        t1 = net.generate_topology(cfg, np.random.default_rng(7))
        t2 = net.generate_topology(cfg, np.random.default_rng(7))
        assert np.array_equal(t1.bs_positions, t2.bs_positions)
        assert np.array_equal(t1.ue_positions, t2.ue_positions)
        assert np.array_equal(t1.cluster_of_bs, t2.cluster_of_bs)
        assert np.array_equal(t1.cluster_of_ue, t2.cluster_of_ue)

    def test_single_cluster_trivial_partition(self):
        topo = net.generate_topology(small_cfg(num_clusters=1),
                                     np.random.default_rng(0))
        assert np.all(topo.cluster_of_bs == 0)
        assert np.all(topo.cluster_of_ue == 0)

    def test_partition_exact(self):
        topo = net.generate_topology(small_cfg(num_clusters=3),
                                     np.random.default_rng(1))
        assert sum(topo.bs_in_cluster(i).size
                   for i in range(topo.num_clusters)) == topo.num_bs
        assert sum(topo.ue_in_cluster(i).size
                   for i in range(topo.num_clusters)) == topo.num_ue
        for i in range(topo.num_clusters):
            assert topo.bs_in_cluster(i).size >= 1

    def test_poisson_mean_count(self):
        cfg = small_cfg(bs_density=5.0, area_radius=1.0, num_clusters=1)
        counts = [net.generate_topology(cfg, np.random.default_rng(s)).num_bs
                  for s in range(300)]
        assert np.mean(counts) == pytest.approx(5 * math.pi, rel=0.1)

    def test_exclusion_radius_respected(self):
        cfg = small_cfg(exclusion_radius=0.05)
        topo = net.generate_topology(cfg, np.random.default_rng(2))
        d = np.linalg.norm(topo.ue_positions
                           - topo.bs_positions[topo.parent_bs], axis=1)
        assert np.all(d >= cfg.exclusion_radius)

    def test_rejects_unreachable_cluster_count(self):
        cfg = small_cfg(bs_density=0.02, area_radius=0.5, num_clusters=8)
        with pytest.raises(ValueError):
            net.generate_topology(cfg, np.random.default_rng(0))

    def test_csv_export(self, tmp_path):
        topo = net.generate_topology(small_cfg(), np.random.default_rng(0))
        path = tmp_path / "topo.csv"
        topo.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "id,x_km,y_km,cluster"
        assert len(lines) == 1 + topo.num_bs + topo.num_ue


class TestChannels:
    def test_large_scale_no_shadowing_reference(self):
        topo = net.Topology(bs_positions=np.array([[0.0, 0.0]]),
                            ue_positions=np.array([[1.0, 0.0]]),
                            cluster_of_bs=np.zeros(1, dtype=int),
                            cluster_of_ue=np.zeros(1, dtype=int),
                            parent_bs=np.zeros(1, dtype=int))
        beta = net.sample_large_scale(topo, small_cfg(shadowing_sigma=0.0),
                                      np.random.default_rng(0))
        assert beta[0, 0] == pytest.approx(10 ** -14.81, rel=1e-12)

    def test_equal_distance_equal_gain(self):
        topo = net.Topology(bs_positions=np.array([[0.0, 0.0]]),
                            ue_positions=np.array([[0.3, 0.0], [0.0, 0.3]]),
                            cluster_of_bs=np.zeros(1, dtype=int),
                            cluster_of_ue=np.zeros(2, dtype=int),
                            parent_bs=np.zeros(2, dtype=int))
        beta = net.sample_large_scale(topo, small_cfg(shadowing_sigma=0.0),
                                      np.random.default_rng(0))
        assert beta[0, 0] == beta[1, 0]

    def test_beta_monotone_in_distance(self):
        dists = np.linspace(0.05, 1.0, 30)
        topo = net.Topology(bs_positions=np.array([[0.0, 0.0]]),
                            ue_positions=np.column_stack(
                                [dists, np.zeros_like(dists)]),
                            cluster_of_bs=np.zeros(1, dtype=int),
                            cluster_of_ue=np.zeros(30, dtype=int),
                            parent_bs=np.zeros(30, dtype=int))
        beta = net.sample_large_scale(topo, small_cfg(shadowing_sigma=0.0),
                                      np.random.default_rng(0))[:, 0]
        assert np.all(np.diff(beta) < 0)

    def test_shadowing_std(self):
        n = 10_000
        topo = net.Topology(bs_positions=np.array([[0.0, 0.0]]),
                            ue_positions=np.full((n, 2), [0.2, 0.0]),
                            cluster_of_bs=np.zeros(1, dtype=int),
                            cluster_of_ue=np.zeros(n, dtype=int),
                            parent_bs=np.zeros(n, dtype=int))
        cfg = small_cfg(shadowing_sigma=8.0)
        beta = net.sample_large_scale(topo, cfg, np.random.default_rng(3))
        shadow_db = 10 * np.log10(beta[:, 0]) + net.pathloss_db(0.2)
        assert np.std(shadow_db) == pytest.approx(8.0, abs=0.3)

    def test_small_scale_moments(self):
        cfg = small_cfg(nt=5, nr=4, num_clusters=1)
        topo = net.generate_topology(cfg, np.random.default_rng(0))
        h = net.sample_small_scale(topo, cfg, np.random.default_rng(1))
        flat = h.ravel()[:100_000]
        assert np.mean(np.abs(flat) ** 2) == pytest.approx(1.0, abs=0.02)
        assert abs(np.mean(flat.real)) < 0.02
        assert abs(np.mean(flat.imag)) < 0.02

    def test_small_scale_deterministic(self):
        cfg = small_cfg()
        topo = net.generate_topology(cfg, np.random.default_rng(0))
        h1 = net.sample_small_scale(topo, cfg, np.random.default_rng(5))
        h2 = net.sample_small_scale(topo, cfg, np.random.default_rng(5))
        assert np.array_equal(h1, h2)

    def test_channel_realization_validation(self):
        with pytest.raises(ValueError):
            net.ChannelRealization(large_scale=np.array([[0.0]]),
                                   small_scale=np.zeros((1, 1, 1, 1)),
                                   noise_power=1.0)
        with pytest.raises(ValueError):
            net.ChannelRealization(large_scale=np.array([[1.0]]),
                                   small_scale=np.zeros((1, 1, 1, 1)),
                                   noise_power=0.0)

    def test_sample_channel_bundle(self):
        cfg = small_cfg()
        topo = net.generate_topology(cfg, np.random.default_rng(0))
        beta = net.sample_large_scale(topo, cfg, np.random.default_rng(1))
        ch = net.sample_channel(topo, cfg, beta, np.random.default_rng(2))
        assert ch.small_scale.shape == (topo.num_ue, topo.num_bs,
                                        cfg.nr, cfg.nt)
        assert ch.noise_power == net.noise_power(cfg)
        assert np.array_equal(ch.large_scale, beta)


class TestConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            small_cfg(bs_density=0.0)
        with pytest.raises(ValueError):
            small_cfg(area_radius=0.01, exclusion_radius=0.02)
        with pytest.raises(ValueError):
            small_cfg(num_clusters=0)

    def test_tx_power_conversion(self):
        assert small_cfg(tx_power_dbm=46.0).tx_power_max == pytest.approx(
            10 ** 1.6, rel=1e-12)

    def test_flat_file_round_trip(self, tmp_path):
        path = tmp_path / "net.cfg"
        path.write_text(
            "# comment line\n"
            "bs_density = 3.5\n"
            "area_radius = 0.9\n"
            "ue_per_bs = 3  # inline comment\n"
            "num_clusters = 2\n"
            "seed = 11\n")
        cfg = net.NetworkConfig.from_file(path)
        assert cfg.bs_density == 3.5
        assert cfg.ue_per_bs == 3
        assert cfg.seed == 11

    def test_flat_file_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("not a key value line\n")
        with pytest.raises(ValueError):
            net.read_flat_config(path)
