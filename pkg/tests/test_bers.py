from __future__ import annotations

import json

import numpy as np
import pytest

from beltrami_lab.beltrami import BeltramiCoefficient
from beltrami_lab.bers import (
    CONVENTION,
    SingularityError,
    UpperSubgrid,
    bers_metric,
    glue,
    half_plane_residuals,
    hyperbolic_defect,
    metric_from,
    min_separation,
    reflect,
    run_pipeline,
    simultaneous_uniformize,
    standard_pair,
    write_metric,
)
from beltrami_lab.exceptions import InvariantError
from beltrami_lab.grid import GridSpec, read_field
from beltrami_lab.presets import compact_bump


@pytest.fixture(scope="module")
def spec():
    return GridSpec(0j, 8.0, 128)


@pytest.fixture(scope="module")
def pair256():
    glued = standard_pair(256)
    return glued, run_pipeline(glued)


def coef(spec, center, amp, radius=1.2):
    return BeltramiCoefficient(compact_bump(spec, center, amp, radius))


def identity_maps(grid):
    z = grid.nodes()
    return z, np.conj(z)


class TestGlue:
    def test_zero(self, spec):
        z = BeltramiCoefficient.zeros(spec)
        assert glue(z, z).glued.sup_norm == 0

    def test_disjoint_bumps(self, spec):
        m1, m2 = coef(spec, 1.5j, 0.3), coef(spec, -1.5j, 0.6j)
        g = glue(m1, m2)
        y = spec.nodes().imag
        assert np.array_equal(g.glued.samples[y > 0], m1.samples[y > 0])
        assert np.array_equal(g.glued.samples[y < 0], m2.samples[y < 0])
        assert np.all(g.glued.samples[y == 0] == 0)
        assert g.glued.sup_norm == pytest.approx(max(m1.sup_norm, m2.sup_norm))

    def test_reflected_pair_is_symmetric(self, spec):
        m1 = coef(spec, 0.4 + 1.5j, 0.5 + 0.2j)
        g = glue(m1, BeltramiCoefficient(reflect(m1.field)))
        assert np.array_equal(reflect(g.glued.field).samples, g.glued.samples)

    @pytest.mark.parametrize("which", ["upper", "lower"])
    def test_margin_violation(self, spec, which):
        bad = coef(spec, 0.3j if which == "upper" else -0.3j, 0.3, 0.5)
        zero = BeltramiCoefficient.zeros(spec)
        with pytest.raises(InvariantError, match="2\\*spacing"):
            glue(bad, zero) if which == "upper" else glue(zero, bad)

    def test_grid_mismatch(self, spec):
        with pytest.raises(ValueError):
            glue(BeltramiCoefficient.zeros(spec), BeltramiCoefficient.zeros(GridSpec(0j, 8.0, 64)))


class TestUniformize:
    def test_zero_gives_identity(self, spec):
        z = BeltramiCoefficient.zeros(spec)
        uni = simultaneous_uniformize(glue(z, z))
        w = uni.grid.nodes()
        assert np.array_equal(uni.f1, w)
        assert np.array_equal(uni.f2bar, np.conj(w))
        assert min_separation(uni, 0.5) == pytest.approx(1.0, rel=0.02)

    def test_subgrid_layout(self, spec):
        g = UpperSubgrid(spec)
        assert g.nodes().shape == (128, 63)
        assert g.nodes()[0, 0].imag == pytest.approx(spec.spacing)
        assert np.allclose(spec.nodes()[:, g.mirror_rows], np.conj(g.nodes()))
        with pytest.raises(ValueError):
            UpperSubgrid(GridSpec(1j, 8.0, 64))

    def test_disjoint_and_residuals(self, pair256):
        glued, res = pair256
        assert min_separation(res.uniformization) > 0
        r1, r2 = res.residuals
        assert r1 <= 1e-4 and r2 <= 1e-4

    @pytest.mark.slow
    def test_f1_residual_fine_grid(self):
        glued = standard_pair(512)
        r1, r2 = half_plane_residuals(simultaneous_uniformize(glued), glued)
        assert r1 <= 1e-5 and r2 <= 1e-5


class TestMetric:
    def test_hyperbolic_identity(self, spec):
        grid = UpperSubgrid(spec)
        m = bers_metric(*identity_maps(grid), grid)
        y = grid.nodes().imag
        scale = np.abs(m.g_zzbar).max()
        assert np.abs(m.g_zz).max() < 1e-12 * scale and np.abs(m.g_zbzb).max() < 1e-12 * scale
        assert np.allclose(m.g_zzbar, 0.5 / y**2, rtol=1e-12)
        i, j = spec.index_nearest(1j)
        assert m.g_zzbar[i, j - grid.rows[0]] == pytest.approx(0.5, rel=1e-12)
        assert m.convention == CONVENTION

    def test_scaling_invariance(self, spec):
        grid = UpperSubgrid(spec)
        f1, f2 = identity_maps(grid)
        a, b = bers_metric(f1, f2, grid), bers_metric(2 * f1, 2 * f2, grid)
        for name in ("g_zz", "g_zzbar", "g_zbzb"):
            assert np.allclose(getattr(a, name), getattr(b, name), rtol=1e-12, atol=1e-14)

    def test_upper_only_perturbation(self, spec):
        m1 = coef(spec, 2j, 0.5, 1.6)
        res = run_pipeline(glue(m1, BeltramiCoefficient.zeros(spec)))
        m = res.metric
        grid = m.grid
        mu1 = grid.restrict(m1.samples)
        # f2bar is antiholomorphic here, so g_zz = 0 and g_zbzb = 2 mu1 g_zzbar
        scale = np.abs(m.g_zzbar).max()
        assert np.abs(m.g_zz).max() <= 1e-3 * scale
        assert np.abs(m.g_zbzb - 2 * mu1 * m.g_zzbar).max() <= 1e-2 * scale
        on = np.abs(mu1) > 0.25
        assert np.all(np.abs(m.g_zbzb[on]) >= 0.5 * np.abs(m.g_zzbar[on]) * 0.5)

    def test_singularity_guard_names_node(self, spec):
        grid = UpperSubgrid(spec)
        f1, f2 = identity_maps(grid)
        f2 = f2.copy()
        f2[10, 20] = f1[10, 20]
        with pytest.raises(SingularityError, match=r"\(10, 20\)"):
            bers_metric(f1, f2, grid)

    def test_locality(self, pair256):
        _, res = pair256
        uni = res.uniformization
        full = res.metric
        block = (slice(40, 200), slice(30, 90))
        derivs = tuple(d[block] for d in uni.derivatives)
        part = bers_metric(uni.f1[block], uni.f2bar[block], uni.grid, derivs)
        for name in ("g_zz", "g_zzbar", "g_zbzb"):
            assert np.array_equal(getattr(part, name), getattr(full, name)[block])
        # the finite-difference route couples nodes only through its 9-point stencil
        fd_full = bers_metric(uni.f1, uni.f2bar, uni.grid)
        fd_part = bers_metric(uni.f1[block], uni.f2bar[block], uni.grid)
        inner = (slice(4, -4), slice(4, -4))
        assert np.allclose(fd_part.g_zbzb[inner], fd_full.g_zbzb[block][inner], rtol=1e-12, atol=1e-14)

    def test_reflected_pair_metric_real(self, spec):
        m1 = coef(spec, 0.3 + 2j, 0.4 + 0.2j, 1.6)
        res = run_pipeline(glue(m1, BeltramiCoefficient(reflect(m1.field))))
        m = res.metric
        y = m.grid.nodes().imag
        far = y >= 0.5
        scale = np.abs(m.g_zzbar[far]).max()
        assert np.abs(m.g_zbzb - np.conj(m.g_zz))[far].max() <= 1e-4 * scale
        assert np.abs(m.g_zzbar.imag[far]).max() <= 1e-4 * scale
        assert m.g_zzbar.real[far].min() > 0

    def test_transform_and_fd_derivatives_agree(self, pair256):
        _, res = pair256
        a = metric_from(res.uniformization)
        b = metric_from(res.uniformization, use_transform_derivatives=True)
        far = a.grid.nodes().imag >= 0.5
        assert np.abs(a.g_zbzb - b.g_zbzb)[far].max() <= 5e-3 * np.abs(a.g_zbzb).max()


class TestDefect:
    def test_zero_pipeline(self, spec):
        z = BeltramiCoefficient.zeros(spec)
        assert run_pipeline(glue(z, z)).defect <= 1e-3

    def test_generic_pair_contrast(self, pair256):
        _, res = pair256
        assert res.defect >= 1e-1

    def test_region_must_avoid_axis(self, pair256):
        _, res = pair256
        with pytest.raises(ValueError):
            hyperbolic_defect(res.metric, 0.25)

    def test_subregion_smaller(self, pair256):
        _, res = pair256
        assert hyperbolic_defect(res.metric, 0.5, 3.0, 2.0) <= res.defect

    def test_reflection_symmetry_of_construction(self, pair256):
        glued, res = pair256
        swapped = glue(BeltramiCoefficient(reflect(glued.mu2.field)), BeltramiCoefficient(reflect(glued.mu1.field)))
        ms = run_pipeline(swapped).metric
        m = res.metric
        far = m.grid.nodes().imag >= 0.5
        scale = np.abs(m.g_zzbar[far]).max()
        assert np.abs(ms.g_zz - np.conj(m.g_zbzb))[far].max() <= 2e-5 * scale
        assert np.abs(ms.g_zbzb - np.conj(m.g_zz))[far].max() <= 2e-5 * scale
        assert np.abs(ms.g_zzbar - np.conj(m.g_zzbar))[far].max() <= 2e-5 * scale


def test_write_metric(tmp_path, spec):
    z = BeltramiCoefficient.zeros(spec)
    res = run_pipeline(glue(z, z))
    path = write_metric(res.metric, tmp_path, {"summary": res.summary()})
    data = json.loads(path.read_text())
    assert data["convention"] == "h = g_zz dz^2 + 2 g_zzbar dz.dzbar + g_zbzb dzbar^2"
    assert set(data["files"]) == {"g_zz", "g_zzbar", "g_zbzb"}
    fld = read_field(tmp_path / data["files"]["g_zzbar"])
    grid = res.metric.grid
    assert np.array_equal(fld.samples[:, grid.rows], res.metric.g_zzbar)
    assert np.all(fld.samples[:, : grid.rows[0]] == 0)
