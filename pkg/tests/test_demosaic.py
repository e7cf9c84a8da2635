"""Reconstruction branches: exactness guarantees and branch character."""

import numpy as np
import pytest
from scipy import ndimage

from polarbench.core import PolarCube, compute_stokes
from polarbench.cpfa import CpfaLayout, CpfaMosaic, NoiseModel, add_noise, default_layout, mosaic
from polarbench.demosaic import (SparsePlanes, interpolate_initial,
                                 reconstruct_base, reconstruct_smooth,
                                 split_channels)
from polarbench.errors import DomainError, StructuralError
from polarbench.metrics import full_report
from polarbench.pipeline import RunConfig, run_scene
from polarbench.scenes import SceneDescriptor, generate_scene

# alternative valid layouts exercising the anisotropic two-phase kernels:
# green pairs offset (2, 0) in rows, and (0, 2) in columns
ROWS2_CODES = [
    ["R90", "R45", "G90", "G45"],
    ["R135", "R0", "G135", "G0"],
    ["B90", "B45", "G90", "G45"],
    ["B135", "B0", "G135", "G0"],
]
COLS2_CODES = [
    ["R90", "R45", "B90", "B45"],
    ["R135", "R0", "B135", "B0"],
    ["G90", "G45", "G90", "G45"],
    ["G135", "G0", "G135", "G0"],
]

ALL_LAYOUTS = [default_layout(), CpfaLayout.from_codes(ROWS2_CODES),
               CpfaLayout.from_codes(COLS2_CODES)]


def affine_cube(h, w):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    v = np.empty((4, 3, h, w))
    for a in range(4):
        for c in range(3):
            v[a, c] = (0.1 + 0.02 * a + 0.03 * c) + 0.002 * yy + 0.001 * xx
    return PolarCube(v)


class TestSplitChannels:
    def test_masks_partition_sensor(self, rng):
        m = mosaic(PolarCube(rng.random((4, 3, 8, 8))), default_layout())
        planes = split_channels(m)
        assert np.all(planes.mask.sum(axis=(0, 1)) == 1)

    def test_values_zero_off_lattice(self, rng):
        m = mosaic(PolarCube(rng.random((4, 3, 8, 8))), default_layout())
        planes = split_channels(m)
        assert np.all(planes.values[~planes.mask] == 0.0)

    def test_empty_plane_rejected(self):
        planes = SparsePlanes(values=np.zeros((4, 3, 8, 8)),
                              mask=np.zeros((4, 3, 8, 8), dtype=bool))
        with pytest.raises(StructuralError):
            interpolate_initial(planes)


class TestExactness:
    @pytest.mark.parametrize("layout", ALL_LAYOUTS, ids=["default", "rows2", "cols2"])
    def test_constants_exact_all_methods(self, layout):
        m = mosaic(PolarCube.constant(16, 16, 0.37), layout)
        for cube in (interpolate_initial(split_channels(m)),
                     reconstruct_base(m), reconstruct_smooth(m)):
            assert float(np.max(np.abs(cube.values - 0.37))) < 1e-12

    @pytest.mark.parametrize("layout", ALL_LAYOUTS, ids=["default", "rows2", "cols2"])
    def test_affine_interior_exact(self, layout):
        gt = affine_cube(48, 48)
        m = mosaic(gt, layout)
        initial = interpolate_initial(split_channels(m))
        err = np.abs(initial.values - gt.values)[:, :, 4:-4, 4:-4]
        assert float(err.max()) < 1e-4
        base = reconstruct_base(m)
        err_b = np.abs(base.values - gt.values)[:, :, 8:-8, 8:-8]
        assert float(err_b.max()) < 1e-4

    def test_samples_reimposed_exactly(self, rng):
        gt = PolarCube(rng.random((4, 3, 16, 16)))
        noisy = add_noise(mosaic(gt, default_layout()), NoiseModel(0.05, seed=3))
        planes = split_channels(noisy)
        for cube in (interpolate_initial(planes), reconstruct_base(noisy)):
            assert np.array_equal(cube.values[planes.mask],
                                  planes.values[planes.mask])

    def test_lambda_zero_is_initial(self, rng):
        m = mosaic(PolarCube(rng.random((4, 3, 16, 16))), default_layout())
        initial = interpolate_initial(split_channels(m))
        assert np.array_equal(reconstruct_base(m, 0.0).values, initial.values)

    def test_sigma_r_zero_is_base(self, rng):
        m = mosaic(PolarCube(rng.random((4, 3, 16, 16))), default_layout())
        base = reconstruct_base(m, 0.5)
        assert np.array_equal(reconstruct_smooth(m, 0.5, 0.0).values, base.values)

    def test_parameter_validation(self, rng):
        m = mosaic(PolarCube(rng.random((4, 3, 8, 8))), default_layout())
        with pytest.raises(DomainError):
            reconstruct_base(m, np.inf)
        with pytest.raises(DomainError):
            reconstruct_smooth(m, 0.5, -1.0)

    def test_quincunx_corner_fallback_finite(self):
        # the rotated-tent kernel can zero out at grid corners for the
        # two-phase green lattices; construction would reject non-finite
        desc = SceneDescriptor("t", "texture", {"seed": 9}, 64, 64)
        m = mosaic(generate_scene(desc), default_layout())
        cube = interpolate_initial(split_channels(m))
        assert np.all(np.isfinite(cube.values))


class TestSmoothSemantics:
    def test_smooths_only_s1_s2(self, rng):
        gt = PolarCube(rng.random((4, 3, 32, 32)))
        m = add_noise(mosaic(gt, default_layout()), NoiseModel(0.02, seed=1))
        base = reconstruct_base(m)
        smooth = reconstruct_smooth(m, sigma_r=1.5)
        b1 = base.values[0] - base.values[2]
        b2 = base.values[1] - base.values[3]
        s1 = smooth.values[0] - smooth.values[2]
        s2 = smooth.values[1] - smooth.values[3]
        want1 = ndimage.gaussian_filter(b1, (0, 1.5, 1.5), mode="mirror")
        want2 = ndimage.gaussian_filter(b2, (0, 1.5, 1.5), mode="mirror")
        assert np.allclose(s1, want1, atol=1e-12)
        assert np.allclose(s2, want2, atol=1e-12)
        # total intensity untouched
        assert np.allclose(smooth.values.sum(axis=0), base.values.sum(axis=0),
                           atol=1e-12)


class TestBranchCharacter:
    def test_base_beats_initial_on_noiseless_edges(self):
        desc = SceneDescriptor("edge", "edge-chart", {}, 64, 64)
        gt = generate_scene(desc)
        m = mosaic(gt, default_layout())
        rep_i = full_report(interpolate_initial(split_channels(m)), gt)
        rep_b = full_report(reconstruct_base(m), gt)
        assert rep_b.psnr_mean >= rep_i.psnr_mean

    def test_smooth_beats_base_on_noisy_flat_dop(self):
        # constant-polarization scene: smoothing s1/s2 removes noise
        # without destroying any polarization structure
        desc = SceneDescriptor("flat", "constant",
                               {"s0": 0.7, "dop": 0.4, "aop_deg": 25.0}, 64, 64)
        gt = generate_scene(desc)
        noisy = add_noise(mosaic(gt, default_layout()), NoiseModel(0.02, seed=11))
        rep_b = full_report(reconstruct_base(noisy), gt)
        rep_s = full_report(reconstruct_smooth(noisy), gt)
        assert rep_s.psnr_dop > rep_b.psnr_dop

    def test_suite_complementarity(self, suite_runs):
        # over the shipped suite the branches must win different metrics,
        # each on a majority of scenes
        _, runs, _ = suite_runs
        base_mean_wins = sum(
            r.reports["base"].psnr_mean > r.reports["smooth"].psnr_mean
            for r in runs.values())
        smooth_dop_wins = sum(
            r.reports["smooth"].psnr_dop > r.reports["base"].psnr_dop
            for r in runs.values())
        n = len(runs)
        assert base_mean_wins > n // 2
        assert smooth_dop_wins > n // 2

    def test_run_scene_exposes_all_methods(self):
        desc = SceneDescriptor("m", "malus-ramp", {}, 32, 32)
        run = run_scene("m", generate_scene(desc), RunConfig(sigma=0.01))
        assert set(run.cubes) == {"initial", "base", "smooth", "fused"}
        assert set(run.reports) == {"initial", "base", "smooth", "fused"}
