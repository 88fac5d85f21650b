import numpy as np
import pytest

from chemofv import (
    DiskRegion,
    InitialConditionSpec,
    ModelSpec,
    RectRegion,
    build_uniform_rect_mesh,
    chem_source_value,
    make_initial_state,
    preset,
)
from chemofv.model import (
    CHEM_PARABOLIC,
    GROWTH_CUBIC,
    GROWTH_QUADRATIC,
    SOURCE_LINEAR,
    SOURCE_SATURATED,
)


def saturated_model():
    return ModelSpec(cell_diffusion=0.25, chemo_sensitivity=2.0)


def linear_model():
    return ModelSpec(cell_diffusion=0.25, chemo_sensitivity=2.0, chem_source=SOURCE_LINEAR)


class TestChemSource:
    def test_saturated_values(self):
        model = saturated_model()
        assert chem_source_value(model, 0.0) == 0.0
        assert chem_source_value(model, 1.0) == 0.5

    def test_linear_is_identity(self):
        assert chem_source_value(linear_model(), 3.25) == 3.25

    def test_negative_density_rejected(self):
        with pytest.raises(ValueError):
            chem_source_value(saturated_model(), -0.1)
        with pytest.raises(ValueError):
            chem_source_value(saturated_model(), np.array([0.5, -1e-9]))

    def test_saturated_monotone_and_bounded(self):
        model = saturated_model()
        u = np.linspace(0.0, 100.0, 1000)
        g = chem_source_value(model, u)
        assert np.all(np.diff(g) >= 0.0)
        assert np.all(g >= 0.0)
        assert np.all(g < 1.0)

    def test_saturated_lipschitz_constant_one(self):
        # |u/(u+1) - v/(v+1)| <= |u - v| on nonnegative pairs
        model = saturated_model()
        rng = np.random.default_rng(7)
        u = rng.random(10_000) * 50.0
        v = rng.random(10_000) * 50.0
        lhs = np.abs(chem_source_value(model, u) - chem_source_value(model, v))
        assert np.all(lhs <= np.abs(u - v) + 1e-15)


class TestInitialState:
    def test_empty_region_gives_constant_field(self, mesh_small):
        state = make_initial_state(mesh_small, InitialConditionSpec(base_u=1.0))
        np.testing.assert_array_equal(state.u, np.ones(mesh_small.n_cells))
        np.testing.assert_array_equal(state.u_prev, state.u)
        assert state.step_index == 0

    def test_perturbed_cells_land_in_unit_band(self, mesh_small):
        ic = InitialConditionSpec(
            base_u=1.0, region=RectRegion(0.0, 1.0, 0.0, 1.0), rng_seed=42
        )
        state = make_initial_state(mesh_small, ic)
        assert np.all(state.u >= 1.0)
        assert np.all(state.u <= 2.0)
        assert np.any(state.u > 1.0)

    def test_equal_seeds_bitwise_identical(self, mesh_small):
        ic = InitialConditionSpec(
            base_u=1.0, region=DiskRegion(0.5, 0.5, 0.4), rng_seed=1234
        )
        a = make_initial_state(mesh_small, ic)
        b = make_initial_state(mesh_small, ic)
        assert np.array_equal(a.u, b.u)
        assert np.array_equal(a.c, b.c)

    def test_different_seeds_differ(self, mesh_small):
        region = RectRegion(0.0, 1.0, 0.0, 1.0)
        a = make_initial_state(mesh_small, InitialConditionSpec(region=region, rng_seed=1))
        b = make_initial_state(mesh_small, InitialConditionSpec(region=region, rng_seed=2))
        assert not np.array_equal(a.u, b.u)

    def test_base_c_fills_chem_field(self, mesh_small):
        state = make_initial_state(mesh_small, InitialConditionSpec(base_c=1.0 / 32.0))
        np.testing.assert_array_equal(state.c, np.full(mesh_small.n_cells, 1.0 / 32.0))

    def test_negative_base_rejected(self):
        with pytest.raises(ValueError):
            InitialConditionSpec(base_u=-1.0)


class TestModelValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"cell_diffusion": 0.0, "chemo_sensitivity": 1.0},
            {"cell_diffusion": 1.0, "chemo_sensitivity": -2.0},
            {"cell_diffusion": 1.0, "chemo_sensitivity": 1.0, "chem_decay": 0.0},
            {"cell_diffusion": 1.0, "chemo_sensitivity": 1.0, "growth": "exp"},
        ],
    )
    def test_bad_specs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            ModelSpec(**kwargs)


class TestPresets:
    def test_test1_parameters(self):
        p = preset("test1")
        assert p.model.cell_diffusion == 0.25
        assert p.model.chemo_sensitivity == 2.0
        assert p.model.chem_decay == 1.0
        assert p.model.chem_source == SOURCE_SATURATED
        assert p.nx * p.ny == 12250
        assert p.x_range == (-3.5, 3.5)
        assert p.y_range == (-35.0, 35.0)
        assert p.t_final == 150.0
        assert p.dt_reference == 1e-3
        assert isinstance(p.ic.region, RectRegion)
        assert (p.ic.region.x_min, p.ic.region.x_max) == (-4.5, 4.5)

    def test_test2_is_parabolic_with_initial_chem(self):
        p = preset("test2")
        assert p.model.chem_dynamics == CHEM_PARABOLIC
        assert p.ic.base_c == 1.0 / 32.0
        assert p.t_final == 150.0

    def test_test3_parameters(self):
        p = preset("test3")
        assert p.model.chem_decay == 16.0
        assert p.model.chemo_sensitivity == 6.0
        assert p.model.cell_diffusion == 0.0625
        assert p.model.growth == GROWTH_QUADRATIC
        assert p.model.growth_rate == 2.0
        assert p.model.chem_source == SOURCE_LINEAR
        assert (p.nx, p.ny) == (100, 100)
        assert p.ic.region == DiskRegion(0.0, 0.0, 0.7)

    def test_test4_parameters(self):
        p = preset("test4", chi=80.0)
        assert p.model.chem_decay == 32.0
        assert p.dt_default == 0.1
        assert p.model.chemo_sensitivity == 80.0
        assert p.model.growth == GROWTH_CUBIC
        assert (p.nx, p.ny) == (150, 150)
        assert p.ic.region == DiskRegion(0.0, 0.0, 1.0)
        assert preset("test4").model.chemo_sensitivity == 6.0

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            preset("test9")

    def test_test1_perturbation_clips_to_domain(self):
        # The stated strip is wider than the domain; membership by center
        # only ever selects in-domain cells.
        p = preset("test1")
        mesh = build_uniform_rect_mesh(p.x_range, p.y_range, p.nx, p.ny)
        state = make_initial_state(mesh, p.ic)
        perturbed = state.u > p.ic.base_u
        inside_band = np.abs(mesh.cell_centers[:, 1]) < 1.0
        assert np.array_equal(perturbed, inside_band)
