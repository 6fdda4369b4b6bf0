import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldsim.domain import (
    MeshSpec,
    ModelParams,
    aligned_vertical,
    build_domain,
)


def make_params(**kw):
    base = dict(
        epsilon=0.25,
        n_layers=4,
        height=1.0,
        h_ex=2.0,
        mesh=MeshSpec(9, 9, 13),
        pad=0.25,
    )
    base.update(kw)
    return ModelParams(**base)


class TestModelParams:
    def test_s_derived_from_height(self):
        p = make_params()
        assert p.s == 0.25

    def test_layer_spacing_consistency_enforced(self):
        with pytest.raises(ValueError):
            make_params(s=0.3)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(epsilon=0.0),
            dict(epsilon=-1.0),
            dict(n_layers=0),
            dict(height=0.0),
            dict(lam=0.0),
            dict(omega=(0.0, 1.0)),
            dict(pad=-0.1),
        ],
    )
    def test_invalid_parameters_rejected(self, kw):
        with pytest.raises(ValueError):
            make_params(**kw)

    def test_mesh_needs_two_planes(self):
        with pytest.raises(ValueError):
            MeshSpec(1, 9, 9)

    def test_core_resolution_guard(self):
        # h_plane = 1/8 vs epsilon/2
        make_params(epsilon=0.25).require_core_resolved()
        with pytest.raises(ValueError):
            make_params(epsilon=0.1).require_core_resolved()

    def test_volumes(self):
        p = make_params(omega=(2.0, 0.5))
        assert p.omega_area == 1.0
        assert p.sample_volume == 1.0


class TestBuildDomain:
    def test_layer_planes_quarters(self):
        # L=1, N=4 puts layers on z in {0, .25, .5, .75, 1}
        d = build_domain(make_params())
        z = d.z_box[d.layer_planes]
        assert np.array_equal(z, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_cell_areas_sum_to_omega(self):
        p = make_params(mesh=MeshSpec(33, 33, 13))
        d = build_domain(p)
        wx, wy = d.omega_node_weights()
        assert abs(wx.sum() * wy.sum() - 1.0) <= 1e-10

    def test_sixth_spacing_aligns_for_three_layers(self):
        # s = 1/3; spacing 1/6 divides it, spacing 1/4 does not
        n_z, pad = aligned_vertical(3, 1.0 / 3.0, per_gap=2, min_pad=0.25)
        p = ModelParams(
            epsilon=0.25, n_layers=3, height=1.0, h_ex=1.0,
            mesh=MeshSpec(9, 9, n_z), pad=pad,
        )
        d = build_domain(p)
        assert np.allclose(d.z_box[d.layer_planes], [0.0, 1 / 3, 2 / 3, 1.0], atol=1e-14)
        bad = ModelParams(
            epsilon=0.25, n_layers=3, height=1.0, h_ex=1.0,
            mesh=MeshSpec(9, 9, 7), pad=0.25,  # hz = 1/4
        )
        with pytest.raises(ValueError, match="aligned to the vertical grid"):
            build_domain(bad)

    def test_pad_must_sit_on_grid_planes(self):
        # hz = 0.125 divides s, but pad = 2.5 * hz is off-grid
        with pytest.raises(ValueError, match="pad"):
            build_domain(make_params(pad=0.3125, mesh=MeshSpec(9, 9, 14)))

    def test_deterministic_rebuild(self):
        p = make_params()
        d1, d2 = build_domain(p), build_domain(p)
        for name in ("x_omega", "y_omega", "x_box", "y_box", "z_box", "layer_planes"):
            a, b = getattr(d1, name), getattr(d2, name)
            assert a.tobytes() == b.tobytes()

    def test_d_mask_volume(self):
        d = build_domain(make_params(omega=(1.0, 1.5), mesh=MeshSpec(9, 7, 13)))
        area = d.cell_in_omega_mask().sum() * d.hx * d.hy
        height = d.zcell_in_d_mask().sum() * d.hz
        assert abs(area * height - 1.5) <= 1e-10

    def test_masks_partition_cells(self):
        d = build_domain(make_params())
        m = d.cell_in_omega_mask()
        assert m.shape == (d.nbx - 1, d.nby - 1)
        assert m.sum() == (d.n_x - 1) * (d.n_y - 1)

    def test_omega_block_indexing(self, small_domain):
        d = small_domain
        sx, sy = d.omega_slices()
        assert np.array_equal(d.x_box[sx], d.x_omega)
        assert np.array_equal(d.y_box[sy], d.y_omega)

    def test_in_plane_pad_rounds_up(self):
        # pad=0.375 is exact in x (3 cells of 1/8) but needs ceil(2.25)=3
        # cells of 1/6 in y, widening the y pad to 0.5
        p = make_params(pad=0.375, mesh=MeshSpec(9, 7, 15))
        d = build_domain(p)
        assert d.ix0 == 3 and d.pad_x == pytest.approx(0.375, abs=1e-15)
        assert d.iy0 == 3 and d.pad_y == pytest.approx(0.5, abs=1e-15)

    def test_clipped_weights(self, small_domain):
        d = small_domain
        p = d.params
        assert abs(d.x_node_in_omega_weight().sum() - p.omega[0]) <= 1e-12
        assert abs(d.y_node_in_omega_weight().sum() - p.omega[1]) <= 1e-12
        assert abs(d.z_plane_in_d_weight().sum() - p.height) <= 1e-12
        assert abs(d.d_plane_weights().sum() - p.height) <= 1e-12

    def test_vertical_plane_counts(self, small_domain):
        d = small_domain
        assert d.n_zd == d.params.n_layers * d.planes_per_gap + 1
        assert d.layer_planes[0] == d.kz0
        assert d.layer_planes[-1] == d.kz0 + d.n_zd - 1


class TestAlignedVertical:
    def test_rejects_bad_per_gap(self):
        with pytest.raises(ValueError):
            aligned_vertical(4, 0.25, per_gap=0, min_pad=0.5)

    def test_pad_at_least_requested(self):
        n_z, pad = aligned_vertical(4, 0.25, per_gap=2, min_pad=0.3)
        assert pad >= 0.3 - 1e-12
        p = make_params(mesh=MeshSpec(9, 9, n_z), pad=pad)
        build_domain(p)  # must not raise

    @given(
        n_layers=st.integers(1, 6),
        per_gap=st.integers(1, 4),
        min_pad=st.floats(0.0, 1.0),
    )
    def test_alignment_always_buildable(self, n_layers, per_gap, min_pad):
        s = 0.25
        n_z, pad = aligned_vertical(n_layers, s, per_gap, min_pad)
        p = ModelParams(
            epsilon=0.25, n_layers=n_layers, height=s * n_layers, h_ex=1.0,
            mesh=MeshSpec(5, 5, n_z), pad=pad,
        )
        d = build_domain(p)
        assert np.allclose(
            d.z_box[d.layer_planes], s * np.arange(n_layers + 1), atol=1e-12
        )


@given(n_x=st.integers(2, 40), n_y=st.integers(2, 40))
def test_omega_weights_sum_to_extent(n_x, n_y):
    p = ModelParams(
        epsilon=0.5, n_layers=1, height=0.5, h_ex=1.0,
        mesh=MeshSpec(n_x, n_y, 5), pad=0.25, omega=(1.25, 0.75),
    )
    d = build_domain(p)
    wx, wy = d.omega_node_weights()
    assert abs(wx.sum() - 1.25) <= 1e-10 * 1.25
    assert abs(wy.sum() - 0.75) <= 1e-10
