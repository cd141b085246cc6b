import numpy as np
import pytest

from nodethin import NodeSet, clr, local_regularity
from nodethin.errors import CollocationError, SizeError

from conftest import random_nodeset, unit_grid


def brute_regularity(coords, k):
    n = coords.shape[0]
    avg = np.empty(n)
    sd = np.empty(n)
    for i in range(n):
        dx = coords[:, 0] - coords[i, 0]
        dy = coords[:, 1] - coords[i, 1]
        d = np.sqrt(dx * dx + dy * dy)
        d = np.sort(d)[1 : k + 1]
        avg[i] = d.mean()
        sd[i] = d.std()
    return avg, sd


class TestLocalRegularity:
    def test_grid_interior_node(self):
        grid = unit_grid(5, 5)
        reg = local_regularity(grid, 4)
        center = 12  # (2, 2)
        assert reg.delta_bar[center] == 1.0
        assert reg.sigma[center] == 0.0

    def test_hand_arithmetic(self):
        ns = NodeSet(np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]))
        reg = local_regularity(ns, 2)
        assert reg.delta_bar[1] == 1.5
        assert reg.sigma[1] == 0.5

    def test_matches_brute_force(self, rng):
        ns = random_nodeset(rng, 300)
        reg = local_regularity(ns, 9)
        avg, sd = brute_regularity(ns.coords, 9)
        assert np.allclose(reg.delta_bar, avg, rtol=1e-12, atol=0)
        assert np.allclose(reg.sigma, sd, rtol=1e-12, atol=1e-15)

    def test_size_error(self, rng):
        with pytest.raises(SizeError):
            local_regularity(random_nodeset(rng, 5), 5)


class TestClr:
    def test_self_comparison_is_zero(self, rng):
        for _ in range(20):
            ns = random_nodeset(rng, int(rng.integers(30, 120)))
            rep = clr(ns, ns, 6)
            assert rep.clr_avg == 0.0
            assert rep.clr_sd == 0.0

    def test_uniform_in_uniform_out(self):
        fine = unit_grid(8, 8)
        keep = [i for i in range(64) if (i % 8) % 2 == 0 and (i // 8) % 2 == 0]
        coarse = fine.take(keep)  # every other row and column, still uniform
        rep = clr(fine, coarse, 2)
        # both distributions are constant; degenerate range maps to zeros
        assert rep.clr_sd == 0.0
        assert rep.clr_avg == 0.0

    def test_rigid_motion_invariance(self, rng):
        fine = random_nodeset(rng, 200)
        coarse = fine.take(rng.choice(200, size=80, replace=False))
        base = clr(fine, coarse, 6)
        ang = 0.7
        R = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
        shift = np.array([2.5, -1.0])
        fine2 = NodeSet(fine.coords @ R.T + shift)
        coarse2 = NodeSet(coarse.coords @ R.T + shift)
        moved = clr(fine2, coarse2, 6)
        assert moved.clr_avg == pytest.approx(base.clr_avg, rel=1e-9, abs=1e-12)
        assert moved.clr_sd == pytest.approx(base.clr_sd, rel=1e-9, abs=1e-12)

    def test_joint_scaling_invariance(self, rng):
        fine = random_nodeset(rng, 150)
        coarse = fine.take(rng.choice(150, size=60, replace=False))
        base = clr(fine, coarse, 5)
        fine2 = NodeSet(fine.coords * 37.0)
        coarse2 = NodeSet(coarse.coords * 37.0)
        scaled = clr(fine2, coarse2, 5)
        assert scaled.clr_avg == pytest.approx(base.clr_avg, rel=1e-12)
        assert scaled.clr_sd == pytest.approx(base.clr_sd, rel=1e-12, abs=1e-13)

    def test_non_subset_errors(self, rng):
        fine = random_nodeset(rng, 50)
        coarse = fine.take(np.arange(20))
        # swapped arguments: fine is not a subset of coarse
        with pytest.raises(CollocationError):
            clr(coarse, fine, 4)

    def test_k_bound(self, rng):
        fine = random_nodeset(rng, 50)
        coarse = fine.take(np.arange(10))
        with pytest.raises(SizeError):
            clr(fine, coarse, 10)

    def test_json_shape(self, rng):
        import json

        ns = random_nodeset(rng, 40)
        rep = clr(ns, ns, 4)
        payload = json.loads(rep.to_json())
        assert set(payload) == {"k", "clr_avg", "clr_sd"}
