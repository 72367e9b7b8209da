import math

import numpy as np
import pytest

from taskdecomp.decompose import SharedBasis, column_projector
from taskdecomp.errors import DimensionMismatch, InvalidSpec
from taskdecomp.synth import (
    PlantSpec,
    add_noise,
    eig_histogram,
    noise_sweep,
    plant,
    recover,
    recovery_report,
    sweep_means,
    trial_seed,
)

SMALL = PlantSpec(ambient_dim=64, cols=48, shared_dim=10, unique_dim=12)


def test_plant_tiny_contains_shared_direction():
    inst = plant(PlantSpec(ambient_dim=4, cols=4, shared_dim=1, unique_dim=1), seed=7)
    z = inst.truth_shared[:, 0]
    for v in inst.vectors:
        p = column_projector(v).p
        assert np.linalg.norm(p @ z - z) <= 1e-8


def test_plant_truth_bases_orthogonal():
    inst = plant(PlantSpec(ambient_dim=40, cols=20, shared_dim=5, unique_dim=6, num_vectors=3), seed=1)
    bases = [inst.truth_shared] + inst.truth_uniques
    for i in range(len(bases)):
        assert np.abs(bases[i].T @ bases[i] - np.eye(bases[i].shape[1])).max() <= 1e-10
        for j in range(i + 1, len(bases)):
            assert np.abs(bases[i].T @ bases[j]).max() <= 1e-8


def test_plant_column_space_inside_truth():
    inst = plant(SMALL, seed=2)
    for v, u in zip(inst.vectors, inst.truth_uniques):
        basis = np.hstack([inst.truth_shared, u])
        resid = v - basis @ (basis.T @ v)
        assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(v)


def test_plant_deterministic():
    a, b = plant(SMALL, 5), plant(SMALL, 5)
    for x, y in zip(a.vectors, b.vectors):
        assert x.tobytes() == y.tobytes()
    assert a.truth_shared.tobytes() == b.truth_shared.tobytes()


def test_plant_no_shared_directions():
    spec = PlantSpec(ambient_dim=64, cols=48, shared_dim=0, unique_dim=12)
    basis, spectrum = recover(plant(spec, 0), 0.0, 0.85)
    assert basis.dim == 0
    assert recovery_report(plant(spec, 0), basis, 0.0).mean_angle_rad == 0.0


@pytest.mark.parametrize("kw", [
    dict(ambient_dim=10, shared_dim=5, unique_dim=3),
    dict(num_vectors=1),
    dict(cols=0),
    dict(coeff_scale=0.0),
])
def test_plant_spec_validation(kw):
    with pytest.raises(InvalidSpec):
        PlantSpec(**kw)


def test_add_noise_zero_is_bitwise_identity(rng):
    m = rng.standard_normal((5, 5))
    assert add_noise(m, 0.0, 1).tobytes() == m.tobytes()


def test_add_noise_statistics():
    m = np.zeros((1000, 1000))
    diff = add_noise(m, 1.0, 3) - m
    assert abs(diff.std() - 1.0) <= 0.05
    assert abs(diff.mean()) <= 0.01


def test_add_noise_seeds_differ(rng):
    m = rng.standard_normal((4, 4))
    assert not np.array_equal(add_noise(m, 0.1, 1), add_noise(m, 0.1, 2))
    np.testing.assert_array_equal(add_noise(m, 0.1, 1), add_noise(m, 0.1, 1))
    with pytest.raises(InvalidSpec):
        add_noise(m, -0.1, 0)


def test_recovery_report_conventions():
    inst = plant(SMALL, 0)
    exact = recovery_report(inst, SharedBasis(inst.truth_shared, 0.85, np.ones(10)), 0.0)
    assert exact.mean_angle_rad <= 1e-12 and exact.max_angle_rad <= 1e-12
    empty = recovery_report(inst, np.zeros((64, 0)), 0.0)
    assert empty.mean_angle_rad == empty.max_angle_rad == math.pi / 2
    with pytest.raises(DimensionMismatch):
        recovery_report(inst, np.zeros((10, 1)), 0.0)


def test_eig_histogram_examples():
    h = eig_histogram(np.ones(7), 10)
    assert h.counts[-1] == 7 and h.counts.sum() == 7
    h = eig_histogram(np.array([0.0, 1.0]), 2)
    assert h.counts.tolist() == [1, 1]
    assert h.bin_edges.tolist() == [0.0, 0.5, 1.0]
    with pytest.raises(InvalidSpec):
        eig_histogram(np.ones(3), 1)


def test_noise_free_small_recovery():
    inst = plant(SMALL, 4)
    basis, spectrum = recover(inst, 0.0)
    assert int(np.sum(spectrum.values >= 1 - 1e-6)) == 10
    assert spectrum.values[10] <= 0.5
    assert recovery_report(inst, basis, 0.0).mean_angle_rad <= 1e-6


def test_noise_sweep_small():
    sigmas = [0.0, 0.05, 0.2]
    reps = noise_sweep(SMALL, sigmas, trials=3, seed=11)
    assert [(r.sigma, r.trial) for r in reps] == [(s, t) for s in sigmas for t in range(3)]
    means = sweep_means(reps)
    assert means[0.0] <= 1e-6
    again = noise_sweep(SMALL, sigmas, trials=3, seed=11)
    assert [r.mean_angle_rad for r in reps] == [r.mean_angle_rad for r in again]


def test_noise_sweep_tall_trend_is_monotone():
    # tall vectors (cols < ambient) keep a proper column space under noise
    spec = PlantSpec(ambient_dim=128, cols=50, shared_dim=25, unique_dim=25)
    means = list(sweep_means(noise_sweep(spec, [0.0, 0.1, 0.2, 0.4], trials=3)).values())
    assert means[0] <= 1e-6
    assert all(b >= a - math.radians(2) for a, b in zip(means, means[1:]))
    assert means[-1] > math.radians(5)


def test_trial_seed_derivation():
    assert trial_seed(7, 0) == 7
    assert trial_seed(7, 2) == 7 + 2 * 1000003
