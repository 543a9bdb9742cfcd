import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combot import fem
from combot.fem import CrossSection, FrameModel, Material, SpringAttachment
from combot.problem import baseline_fixture, lever_fixture, make_case

MAT = Material()
SEC = CrossSection()


def clamped_tip(pa, pb, load6, material=MAT, section=SEC):
    """Solve a single element clamped at ``pa`` with a generalized load at ``pb``."""
    k = fem.element_stiffness(np.asarray(pa, float), np.asarray(pb, float), material, section)
    return np.linalg.solve(k[6:, 6:], np.asarray(load6, float))


def random_direction(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


class TestElementStiffness:
    def test_axial_term(self):
        k = fem.local_stiffness(np.array([10.0]), MAT, SEC)[0]
        assert k[0, 0] == pytest.approx(80.0, rel=1e-14)
        assert k[0, 6] == pytest.approx(-80.0, rel=1e-14)

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            k = fem.element_stiffness(rng.normal(size=3) * 10, rng.normal(size=3) * 10, MAT, SEC)
            np.testing.assert_allclose(k, k.T, rtol=0, atol=1e-12 * np.abs(k).max())

    def test_six_rigid_body_modes(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            pa = rng.normal(size=3) * 20
            pb = pa + random_direction(rng) * rng.uniform(5, 40)
            k = fem.element_stiffness(pa, pb, MAT, SEC)
            w = np.linalg.eigvalsh(k)
            scale = w.max()
            assert np.sum(np.abs(w) < 1e-10 * scale) == 6
            assert w.min() > -1e-10 * scale

    def test_rigid_motions_map_to_zero_force(self):
        pa, pb = np.array([1.0, 2.0, 3.0]), np.array([12.0, -4.0, 9.0])
        k = fem.element_stiffness(pa, pb, MAT, SEC)
        t = np.array([0.3, -1.2, 0.7])
        omega = np.array([0.02, 0.05, -0.01])
        u = np.concatenate([t + np.cross(omega, pa), omega, t + np.cross(omega, pb), omega])
        np.testing.assert_allclose(k @ u, 0.0, atol=1e-12 * np.abs(k).max())

    def test_degenerate_length(self):
        with pytest.raises(fem.DegenerateElementError):
            fem.element_stiffness(np.zeros(3), np.full(3, 1e-5), MAT, SEC)

    def test_square_torsion_constant(self):
        assert fem.torsion_constant(1.0, 1.0) == pytest.approx(0.1406, abs=5e-5)
        assert fem.torsion_constant(2.0, 1.0) == pytest.approx(fem.torsion_constant(1.0, 2.0))


class TestAnalyticalOracles:
    L = 10.0

    @pytest.mark.parametrize("axis", [0, 1, 2])
    def test_axial(self, axis):
        pb = np.eye(3)[axis] * self.L
        load = np.zeros(6)
        load[axis] = 1.0
        u = clamped_tip(np.zeros(3), pb, load)
        expected = self.L / (MAT.young_modulus * SEC.area)
        assert u[axis] == pytest.approx(expected, rel=1e-9)

    def test_cantilever_deflection(self):
        u = clamped_tip(np.zeros(3), [self.L, 0, 0], [0, 1.0, 0, 0, 0, 0])
        assert u[1] == pytest.approx(5.0, rel=1e-9)
        assert u[1] == pytest.approx(self.L**3 / (3 * MAT.young_modulus * SEC.iz), rel=1e-9)

    def test_cantilever_rectangular_both_planes(self):
        sec = CrossSection(width=1.0, height=2.0)
        for comp, inertia in ((1, sec.iz), (2, sec.iy)):
            load = np.zeros(6)
            load[comp] = 0.7
            u = clamped_tip(np.zeros(3), [self.L, 0, 0], load, section=sec)
            assert u[comp] == pytest.approx(0.7 * self.L**3 / (3 * MAT.young_modulus * inertia), rel=1e-9)

    def test_torsion(self):
        u = clamped_tip(np.zeros(3), [self.L, 0, 0], [0, 0, 0, 2.0, 0, 0])
        assert u[3] == pytest.approx(2.0 * self.L / (MAT.shear_modulus * SEC.j), rel=1e-9)

    def test_oblique_cantilever(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            axis = random_direction(rng)
            load_dir = np.cross(axis, random_direction(rng))
            load_dir /= np.linalg.norm(load_dir)
            u = clamped_tip(np.zeros(3), axis * self.L, np.concatenate([load_dir, np.zeros(3)]))
            assert u[:3] @ load_dir == pytest.approx(5.0, rel=1e-9)


def cantilever_model():
    # support -> mid node (end-effector) -> tip (input), driven transversely along Z
    pos = np.array([[0.0, 0, 0], [5.0, 0, 0], [10.0, 0, 0]])
    return FrameModel(pos, [[0, 1], [1, 2]], supports=[0], input_node=2, input_direction=(0, 0, 1),
                      output_node=1, output_direction=(0, 0, 1))


def random_case_model(seed, case=1):
    """Decode a random connected layout on a canonical case."""
    from combot.evolve import GenomeLayout

    problem = make_case(case)
    layout = GenomeLayout(problem)
    rng = np.random.default_rng(seed)
    while True:
        cand = layout.decode(layout.random(rng, 0.6))
        model = problem.frame_model(cand.positions, cand.elements)
        try:
            fem.assemble(model)
            fem.solve_prescribed_displacement(model, problem.d_in)
        except fem.FemError:
            continue
        return problem, model


class TestAssembly:
    def test_single_element(self):
        model = FrameModel([[0, 0, 0], [10, 0, 0], [20, 0, 0]], [[0, 1], [1, 2]], supports=[0],
                           input_node=1, input_direction=(0, 1, 0), output_node=2, output_direction=(0, 1, 0))
        asm = fem.assemble(model)
        assert asm.K.shape == (18, 18)
        single = FrameModel([[0, 0, 0], [10, 0, 0]], [[0, 1]], supports=[0], input_node=1,
                            input_direction=(0, 1, 0), output_node=0, output_direction=(0, 1, 0))
        assert fem.assemble(single).K.shape == (12, 12)

    def test_floating_component(self):
        pos = np.array([[0, 0, 0], [10, 0, 0], [20, 0, 0], [50, 0, 0], [60, 0, 0]], float)
        model = FrameModel(pos, [[0, 1], [1, 2], [3, 4]], supports=[0], input_node=1,
                           input_direction=(0, 1, 0), output_node=2, output_direction=(0, 1, 0))
        with pytest.raises(fem.InvalidStructureError) as info:
            fem.assemble(model)
        assert info.value.reason == "no-support-path"

    def test_pruned_ports(self):
        pos = np.array([[0, 0, 0], [10, 0, 0], [20, 0, 0], [30, 0, 0]], float)
        model = FrameModel(pos, [[0, 1], [1, 2]], supports=[0], input_node=3,
                           input_direction=(0, 1, 0), output_node=2, output_direction=(0, 1, 0))
        with pytest.raises(fem.InvalidStructureError) as info:
            fem.assemble(model)
        assert info.value.reason == "disconnected-input"
        model = FrameModel(pos, [[0, 1], [1, 2]], supports=[0], input_node=1,
                           input_direction=(0, 1, 0), output_node=3, output_direction=(0, 1, 0))
        with pytest.raises(fem.InvalidStructureError) as info:
            fem.assemble(model)
        assert info.value.reason == "disconnected-output"

    def test_dof_count_matches_retained_nodes(self):
        _, model = random_case_model(3)
        asm = fem.assemble(model)
        assert asm.ndof == 6 * len(np.unique(model.elements))
        np.testing.assert_allclose(asm.K, asm.K.T, atol=1e-9)

    def test_matches_loop_assembly(self):
        _, model = random_case_model(5)
        asm = fem.assemble(model)
        K = np.zeros_like(asm.K)
        for a, b in model.elements:
            ke = fem.element_stiffness(model.positions[a], model.positions[b], model.material, model.section)
            idx = np.r_[asm.dof(a):asm.dof(a) + 6, asm.dof(b):asm.dof(b) + 6]
            K[np.ix_(idx, idx)] += ke
        np.testing.assert_allclose(asm.K, K, rtol=0, atol=1e-10)


class TestPrescribedDisplacement:
    def test_cantilever_reaction(self):
        res = fem.solve_prescribed_displacement(cantilever_model(), 1.0)
        assert res.reaction == pytest.approx(0.2, rel=1e-9)

    def test_cantilever_midspan_ratio(self):
        # tip-loaded cantilever: w(L/2) / w(L) = 5/16
        res = fem.solve_prescribed_displacement(cantilever_model(), 2.0)
        assert fem.compute_ga(res, 2.0, (0, 0, 1)) == pytest.approx(5 / 16, rel=1e-9)
        assert fem.compute_ga(res, 2.0, (0, 0, -1)) == pytest.approx(-5 / 16, rel=1e-9)

    def test_linearity(self):
        _, model = random_case_model(11)
        a = fem.solve_prescribed_displacement(model, 1.0)
        b = fem.solve_prescribed_displacement(model, 2.0)
        np.testing.assert_allclose(b.displacements, 2 * a.displacements, rtol=1e-10, atol=1e-12)
        assert b.reaction == pytest.approx(2 * a.reaction, rel=1e-10)

    def test_input_dof_prescribed(self):
        problem, model = random_case_model(12)
        res = fem.solve_prescribed_displacement(model, 5.0)
        u_in = res.translation(model.input_node)
        assert u_in @ model.input_direction == pytest.approx(5.0, rel=1e-12)
        for s in model.supports:
            if s in res.nodes:
                k = np.searchsorted(res.nodes, s)
                np.testing.assert_array_equal(res.displacements[k], 0.0)

    def test_failed_factorization_is_singular(self, monkeypatch):
        # clamped frames are positive definite, so force the failure path
        def refuse(*args, **kwargs):
            raise np.linalg.LinAlgError("not positive definite")

        monkeypatch.setattr(fem.scipy.linalg, "cho_factor", refuse)
        with pytest.raises(fem.SingularSystemError) as info:
            fem.solve_prescribed_displacement(cantilever_model(), 1.0)
        assert info.value.reason == "singular"

    def test_baseline(self):
        model, d_in, _ = baseline_fixture()
        res = fem.solve_prescribed_displacement(model, d_in)
        assert fem.compute_ga(res, d_in, (0, 1, 0)) == pytest.approx(1.0, rel=0.05)

    def test_lever(self):
        model, d_in = lever_fixture()
        res = fem.solve_prescribed_displacement(model, d_in)
        assert fem.compute_ga(res, d_in, (0, 0, 1)) == pytest.approx(2.0, rel=0.05)


class TestExternalLoad:
    def test_zero_load(self):
        res = fem.solve_external_load(cantilever_model(), [(1, (0, 0, 0))])
        np.testing.assert_array_equal(res.displacements, 0.0)

    def test_cantilever_tip_load(self):
        pos = np.array([[0.0, 0, 0], [10.0, 0, 0], [-5.0, 0, 0]])
        # input on a separate stub so the loaded tip is free
        model = FrameModel(pos, [[0, 1], [0, 2]], supports=[0], input_node=2, input_direction=(0, 1, 0),
                           output_node=1, output_direction=(0, 1, 0))
        res = fem.solve_external_load(model, [(1, (0, 1.0, 0))])
        assert res.output_translation[1] == pytest.approx(5.0, rel=1e-9)

    def test_input_locked(self):
        problem, model = random_case_model(21)
        res = fem.solve_external_load(model, problem.loads())
        assert res.translation(model.input_node) @ model.input_direction == pytest.approx(0.0, abs=1e-12)

    def test_superposition(self):
        problem, model = random_case_model(22)
        o = model.output_node
        a = fem.solve_external_load(model, [(o, (1, 0, 0))])
        b = fem.solve_external_load(model, [(o, (0, 2, 0))])
        ab = fem.solve_external_load(model, [(o, (1, 2, 0))])
        np.testing.assert_allclose(ab.displacements, a.displacements + b.displacements, rtol=1e-10, atol=1e-10)

    def test_reciprocity(self):
        problem, model = random_case_model(23)
        asm = fem.assemble(model)
        analysis = fem._Analysis(model, asm)
        free = analysis.free
        rng = np.random.default_rng(0)
        for _ in range(100):
            i, j = rng.choice(free, 2, replace=False)
            fi = np.zeros(asm.ndof)
            fi[i] = 1.0
            fj = np.zeros(asm.ndof)
            fj[j] = 1.0
            # keep the input node out of the rotated frame by picking non-input DOFs
            if analysis.i0 <= i < analysis.i0 + 3 or analysis.i0 <= j < analysis.i0 + 3:
                continue
            ui = analysis.loaded(fi).displacements.ravel()
            uj = analysis.loaded(fj).displacements.ravel()
            assert ui[j] == pytest.approx(uj[i], rel=1e-8, abs=1e-14)


class TestMechanicalAdvantage:
    def test_baseline(self):
        model, d_in, spring = baseline_fixture()
        ma = fem.compute_ma(model, d_in, spring)
        assert ma.ma == pytest.approx(1.0, rel=0.1)

    def test_vanishing_spring(self):
        model, d_in, _ = baseline_fixture()
        values = [fem.compute_ma(model, d_in, SpringAttachment(k, (0, 1, 0))).ma for k in (1e-2, 1e-4, 1e-6)]
        assert values[0] > values[1] > values[2] > 0
        assert values[2] < 1e-3

    def test_analyze_matches_separate_solves(self):
        for seed in range(5):
            problem, model = random_case_model(40 + seed)
            full = fem.analyze(model, problem.d_in, problem.loads(), problem.spring)
            ga = fem.solve_prescribed_displacement(model, problem.d_in)
            ext = fem.solve_external_load(model, problem.loads())
            ma = fem.compute_ma(model, problem.d_in, problem.spring)
            np.testing.assert_allclose(full.ga_result.displacements, ga.displacements, rtol=1e-9, atol=1e-9)
            np.testing.assert_allclose(full.ext_result.displacements, ext.displacements, rtol=1e-9, atol=1e-9)
            assert full.ma.ma == pytest.approx(ma.ma, rel=1e-7, abs=1e-12)
            assert full.ma.f_in == pytest.approx(ma.f_in, rel=1e-7)

    def test_work_balance_baseline(self):
        model, d_in, spring = baseline_fixture()
        ma = fem.compute_ma(model, d_in, spring)
        ga = ma.d_spring / d_in
        assert ma.ma * ga <= 1 + 1e-9

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10**6), case=st.sampled_from([1, 2, 3]),
           k=st.floats(1e-3, 10.0))
    def test_energy_inequality(self, seed, case, k):
        problem, model = random_case_model(seed, case)
        spring = SpringAttachment(k, problem.output_direction)
        ma = fem.compute_ma(model, problem.d_in, spring)
        assert ma.input_work > 0
        assert ma.spring_work <= ma.input_work * (1 + 1e-6)
