import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import linprog

from conftest import load_minimal, minimal_doc, shipped_case
from ugrestore import bigm
from ugrestore.feeder import load_case_dict
from ugrestore.formulation import (
    BuildOptions,
    UnformulatableError,
    build_model,
    derated_multiplier,
    gate_threshold_pu,
    hat_matrices,
    orient_from,
)
from ugrestore.model import SENSE_EQ, SENSE_GE, SENSE_LE
from ugrestore.physics import PERMUTATIONS, q_factor_from_load
from ugrestore.quantile import normal_quantile


class TestBuildBasics:
    def test_no_storage_rejected(self):
        doc = minimal_doc()
        doc["ders"] = []
        case = load_case_dict(doc)
        with pytest.raises(UnformulatableError):
            build_model(case)

    def test_zero_load_optimum_zero(self):
        doc = minimal_doc()
        doc["nodes"][1].pop("load_kw")
        case = load_case_dict(doc)
        model = build_model(case)
        from ugrestore.solver import SolverOptions, solve

        sol = solve(model, SolverOptions(time_limit_s=30))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(0.0, abs=1e-9)

    def test_binary_census_minimal(self):
        """Count binaries by construction on the 2-node, 1-line, T=1 case."""
        case = load_minimal()
        model = build_model(case)
        cat = model.catalog
        expected = {
            "u": 2,       # two nodes, one source
            "gamma": 1,   # one line
            "Gamma": 1,
            "ess_ch_on": 1,
            "ess_dis_on": 1,
        }
        for name, count in expected.items():
            assert cat.group(name).size == count, name
        # free binaries exclude pinned ones (source coverage, wire states)
        free = model.free_binary_columns
        free_names = {cat.name_of(int(c)).split("[")[0] for c in free}
        assert free_names == {"u", "ess_ch_on", "ess_dis_on"}
        assert len(free) == 3

    def test_determinism(self):
        case = shipped_case("toy_gear3")
        a = build_model(case)
        b = build_model(case)
        assert a.families == b.families
        assert np.array_equal(a.coo_r, b.coo_r)
        assert np.array_equal(a.coo_c, b.coo_c)
        assert np.array_equal(a.coo_v, b.coo_v)
        assert np.array_equal(a.rhs, b.rhs)
        assert np.array_equal(a.col_lb, b.col_lb)
        assert np.array_equal(a.obj, b.obj)
        assert [c[:4] for c in a.cones] == [c[:4] for c in b.cones]

    def test_row_family_catalog_documented(self):
        from ugrestore.formulation import FAMILY_DESCRIPTIONS

        case = shipped_case("toy_gear3")
        model = build_model(case)
        for fam in model.family_counts():
            assert fam in FAMILY_DESCRIPTIONS, fam
        text = model.constraint_catalog(FAMILY_DESCRIPTIONS)
        assert "cone" in text


def _fix_all(model, fixes):
    lb = model.col_lb.copy()
    ub = model.col_ub.copy()
    for col, val in fixes.items():
        lb[col] = val
        ub[col] = val
    return lb, ub


def _lp(model, lb, ub, sense_obj=None):
    m = model.matrix().tocsr()
    le = np.flatnonzero(model.sense == SENSE_LE)
    ge = np.flatnonzero(model.sense == SENSE_GE)
    eq = np.flatnonzero(model.sense == SENSE_EQ)
    a_ub = sp.vstack([m[le], -m[ge]], format="csr")
    b_ub = np.concatenate([model.rhs[le], -model.rhs[ge]])
    a_eq = m[eq]
    b_eq = model.rhs[eq]
    c = np.zeros(model.ncols) if sense_obj is None else sense_obj
    return linprog(
        c=c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=np.column_stack((lb, ub)),
        method="highs",
    )


SCENARIOS = [
    # (prev_row, cur_row, expected_events, expected_flag)
    ([1, 0, 0], [1, 0, 0], [0, 0, 0], 0),
    ([1, 0, 0], [0, 1, 0], [0, 1, 0], 1),
    ([1, 0, 0], [0, 0, 1], [0, 0, 1], 1),
    ([1, 0, 0], [0, 0, 0], [0, 0, 0], 0),
    ([0, 0, 0], [0, 0, 0], [0, 0, 0], 0),
    ([0, 0, 0], [1, 0, 0], [1, 0, 0], 1),
    ([0, 0, 0], [0, 1, 0], [0, 1, 0], 1),
    ([0, 0, 0], [0, 0, 1], [0, 0, 1], 1),
]


class TestSwapTransition:
    """The eight connection scenarios of one feeder phase across a period."""

    def _gear_model(self):
        case = shipped_case("toy_gear3")
        return case, build_model(case)

    def _transition_rows(self, model):
        keep = [
            i
            for i, fam in enumerate(model.families)
            if fam in ("swap-delta", "swap-event-extract", "swap-event-or")
        ]
        return keep

    @pytest.mark.parametrize("prev,cur,want_events,want_flag", SCENARIOS)
    def test_scenario_binary(self, prev, cur, want_events, want_flag):
        """Exhaustively check admissible binary tuples for one phase row."""
        case, model = self._gear_model()
        cat = model.catalog
        g = case.switchgears[0]
        rows = self._transition_rows(model)
        m = model.matrix().tocsr()[rows]
        sense = model.sense[rows]
        rhs = model.rhs[rows]
        ph = 0
        admissible_events, admissible_flags = [], []
        for events in itertools.product((0.0, 1.0), repeat=3):
            for flag in (0.0, 1.0):
                x = np.zeros(model.ncols)
                for ps in range(3):
                    x[cat.col("swap", (g.id, 0, ph, ps))] = prev[ps]
                    x[cat.col("swap", (g.id, 1, ph, ps))] = cur[ps]
                    x[cat.col("swap_delta", (g.id, 1, ph, ps))] = cur[ps] - prev[ps]
                    x[cat.col("swap_event", (g.id, 1, ph, ps))] = events[ps]
                    # t=0 row references swap at t=0; keep its delta consistent
                    x[cat.col("swap_delta", (g.id, 0, ph, ps))] = prev[ps]
                    x[cat.col("swap_event", (g.id, 0, ph, ps))] = prev[ps]
                x[cat.col("swap_any", (g.id, 0, ph))] = 1.0 if sum(prev) else 0.0
                x[cat.col("swap_any", (g.id, 1, ph))] = flag
                ax = m @ x
                ok = np.all(
                    ((sense == SENSE_LE) & (ax <= rhs + 1e-9))
                    | ((sense == SENSE_GE) & (ax >= rhs - 1e-9))
                    | ((sense == SENSE_EQ) & (np.abs(ax - rhs) <= 1e-9))
                )
                if ok:
                    admissible_events.append(list(events))
                    admissible_flags.append(flag)
        assert admissible_events == [[float(e) for e in want_events]]
        assert admissible_flags == [float(want_flag)]

    def test_lp_pins_events(self):
        """Even the LP relaxation pins the event flags once the swap is fixed."""
        case, model = self._gear_model()
        cat = model.catalog
        g = case.switchgears[0]
        for prev, cur, want_events, want_flag in SCENARIOS:
            fixes = {}
            for ps in range(3):
                fixes[cat.col("swap", (g.id, 0, 0, ps))] = float(prev[ps])
                fixes[cat.col("swap", (g.id, 1, 0, ps))] = float(cur[ps])
            lb, ub = _fix_all(model, fixes)
            rows = self._transition_rows(model)
            sub = model.matrix().tocsr()[rows]
            sense = model.sense[rows]
            rhs = model.rhs[rows]
            a_ub = sp.vstack([sub[sense == SENSE_LE], -sub[sense == SENSE_GE]], format="csr")
            b_ub = np.concatenate([rhs[sense == SENSE_LE], -rhs[sense == SENSE_GE]])
            a_eq = sub[sense == SENSE_EQ]
            b_eq = rhs[sense == SENSE_EQ]
            c = np.zeros(model.ncols)
            for ps in range(3):
                c[cat.col("swap_event", (g.id, 1, 0, ps))] = 1.0
            res = linprog(
                c=c,
                A_ub=a_ub,
                b_ub=b_ub,
                A_eq=a_eq,
                b_eq=b_eq,
                bounds=np.column_stack((lb, ub)),
                method="highs",
            )
            assert res.status == 0
            got = [res.x[cat.col("swap_event", (g.id, 1, 0, ps))] for ps in range(3)]
            assert got == pytest.approx(want_events, abs=1e-9)


class TestSwapStructure:
    def test_exactly_permutations_or_zero(self):
        """The swap rows admit the six permutations and the zero matrix only."""
        case = shipped_case("toy_gear3")
        model = build_model(case)
        cat = model.catalog
        g = case.switchgears[0]
        rows = [
            i
            for i, fam in enumerate(model.families)
            if fam in ("swap-col-once", "swap-row-once", "swap-open-or-full")
            and model.locs[i][0] == g.id
            and model.locs[i][1] == 0
        ]
        m = model.matrix().tocsr()[rows]
        sense = model.sense[rows]
        rhs = model.rhs[rows]
        admitted = []
        for bits in itertools.product((0.0, 1.0), repeat=9):
            mat = np.array(bits).reshape(3, 3)
            for beta in (0.0, 1.0):
                x = np.zeros(model.ncols)
                for ph in range(3):
                    for ps in range(3):
                        x[cat.col("swap", (g.id, 0, ph, ps))] = mat[ph, ps]
                x[cat.col("beta", (g.id, 0))] = beta
                ax = m @ x
                ok = np.all(
                    ((sense == SENSE_LE) & (ax <= rhs + 1e-9))
                    | ((sense == SENSE_GE) & (ax >= rhs - 1e-9))
                    | ((sense == SENSE_EQ) & (np.abs(ax - rhs) <= 1e-9))
                )
                if ok:
                    admitted.append((bits, beta))
        perms = {tuple(p.flatten().tolist()) for p in PERMUTATIONS}
        expected = {(tuple([0.0] * 9), 0.0)} | {(p, 1.0) for p in perms}
        assert set(admitted) == expected


class TestQGate:
    def test_zero_capacitance_gate_free(self):
        doc = minimal_doc()
        # switchgear with a bare lateral node: no cable, no capacitance
        doc["nodes"] = [
            {"id": "s", "phases": "abc"},
            {"id": "j", "phases": "abc", "load_kw": {"a": [10.0]}},
        ]
        doc["lines"] = [
            {"from": "s", "to": "j", "length_miles": 0.0, "is_switch": True, "phases": "abc"}
        ]
        doc["switchgears"] = [
            {"id": "G", "feeder_node": "s", "lateral_node": "j", "inrush_limit_pu": 5.0, "q_max": 0.05}
        ]
        case = load_case_dict(doc)
        model = build_model(case)
        assert "ferro-gate" not in model.family_counts()
        assert "ferro-sequence" in model.family_counts()

    def test_threshold_value(self, toy_gear3):
        g = toy_gear3.switchgears[0]
        thr = gate_threshold_pu(toy_gear3, g)
        # hand inversion of the damping chain for the 0.42 mile lateral
        expect = 1.0 / (0.3 * 0.05 * math.sqrt(94.117 / 74.76e-9))
        assert thr == pytest.approx(expect, rel=1e-3)

    def test_equivalence_random_draws(self):
        rng = np.random.default_rng(123)
        disagreements = 0
        for _ in range(1000):
            c = rng.uniform(1e-8, 5e-7)
            q_max = rng.uniform(0.01, 0.3)
            zip_z = rng.uniform(0.2, 0.4)
            p_tot = rng.uniform(1e-4, 1.5)
            thr = 1.0 / (
                zip_z * q_max * math.sqrt((1.0 / ((2 * math.pi * 60.0) ** 2 * c)) / c)
            )
            linear_ok = p_tot >= thr
            physics_ok = q_factor_from_load(c, p_tot, zip_z) <= q_max
            if linear_ok != physics_ok:
                disagreements += 1
        assert disagreements == 0

    def test_sequencing_row_semantics(self, toy_gear3):
        model = build_model(toy_gear3)
        cat = model.catalog
        g = toy_gear3.switchgears[0]
        rows = [
            i
            for i, fam in enumerate(model.families)
            if fam == "ferro-sequence" and model.locs[i] == (g.id, 1)
        ]
        (row,) = rows
        m = model.matrix().tocsr()[[row]]
        # already closed: staying closed needs no new energize flag
        x = np.zeros(model.ncols)
        x[cat.col("beta", (g.id, 0))] = 1.0
        x[cat.col("beta", (g.id, 1))] = 1.0
        assert (m @ x)[0] >= model.rhs[row] - 1e-12
        # closing fresh requires the flag
        x = np.zeros(model.ncols)
        x[cat.col("beta", (g.id, 1))] = 1.0
        assert (m @ x)[0] < model.rhs[row]
        x[cat.col("alpha", (g.id, 1))] = 1.0
        assert (m @ x)[0] >= model.rhs[row] - 1e-12


class TestChanceConstraint:
    def test_neutral_confidence_limit(self):
        # confidence -> 0.5 from above leaves the forecast untouched
        assert derated_multiplier(0.3, 0.5 + 1e-12) == pytest.approx(1.0, abs=1e-6)

    def test_derate_value(self):
        got = derated_multiplier(0.2, 0.9)
        assert got == pytest.approx(1.0 + 0.2 * normal_quantile(0.1), rel=1e-12)
        assert got == pytest.approx(0.74369, abs=1e-5)

    def test_clamped_to_zero(self):
        assert derated_multiplier(0.6, 0.975) == 0.0
        raw = 1.0 - 0.6 * 1.959964
        assert raw == pytest.approx(-0.17598, abs=1e-5)

    def test_monotone_in_sigma_and_confidence(self):
        taus = np.linspace(0.51, 0.99, 25)
        sigmas = np.linspace(0.0, 1.0, 25)
        for s_lo, s_hi in zip(sigmas, sigmas[1:]):
            assert derated_multiplier(s_hi, 0.9) <= derated_multiplier(s_lo, 0.9) + 1e-12
        for t_lo, t_hi in zip(taus, taus[1:]):
            assert derated_multiplier(0.3, t_hi) <= derated_multiplier(0.3, t_lo) + 1e-12

    def test_res_bound_rows(self, toy_pv):
        model = build_model(toy_pv)
        counts = model.family_counts()
        assert counts.get("res-derate", 0) > 0
        cat = model.catalog
        mult = derated_multiplier(0.2, 0.9)
        col = cat.col("res_p", (0, 0, 0))
        # forecast 30 kW on a 1 MVA base
        assert model.col_ub[col] == pytest.approx(0.03 * mult)


class TestBigM:
    def test_voltage_diff_bound(self):
        doc = minimal_doc()
        doc["config"]["v_max_sq"] = 1.21
        doc["config"]["v_min_sq"] = 0.81
        case = load_case_dict(doc)
        assert bigm.big_m("inrush-pin", case) == pytest.approx(0.5 * 1.21 + 0.1745, abs=1e-3)

    def test_zero_range_family(self):
        case = load_minimal()  # no switchgears, no reorder coefficients
        assert bigm.big_m("reorder-bracket", case) == 0.0

    def test_reorder_row_sum_bound(self):
        coeff = np.array([[0.5, 0.0], [0.1, 0.3]])
        assert bigm.reorder_power_bracket(coeff, 4.0) == pytest.approx(6.0)

    def test_override(self):
        doc = minimal_doc()
        doc["config"]["big_m_overrides"] = {"slack-power": 123.0}
        case = load_case_dict(doc)
        assert bigm.big_m("slack-power", case) == 123.0

    def test_unknown_family(self):
        case = load_minimal()
        with pytest.raises(bigm.BigMError):
            bigm.big_m("no-such-family", case)


class TestLinearizedProducts:
    def _mini_lnc(self, z, amp_sq=1.0):
        """Standalone bracket system for one line and one selector block."""
        from ugrestore.catalog import VariableCatalog
        from ugrestore.model import ModelBuilder

        cat = VariableCatalog()
        cat.add_group("swap", [(ph, ps) for ph in range(3) for ps in range(3)], binary=True)
        cat.add_group("zeta", list(range(6)), binary=True)
        cat.add_group("curr", list(range(3)), lb=0.0, ub=amp_sq)
        variants = [p @ z @ p.T for p in PERMUTATIONS]
        stack = np.stack([v.real for v in variants])
        lo = 3.0 * min(0.0, float(stack.min())) * amp_sq
        hi = 3.0 * max(0.0, float(stack.max())) * amp_sq
        cat.add_group("y", list(range(3)), lb=lo, ub=hi)
        b = ModelBuilder(cat)
        m_p = bigm.reorder_power_bracket(stack, amp_sq)
        for v in range(6):
            zc = cat.col("zeta", v)
            for ph in range(3):
                for ps in range(3):
                    if PERMUTATIONS[v][ph, ps] == 0.0:
                        b.add(
                            "reorder-select",
                            (v, ph, ps),
                            [(zc, 1.0), (cat.col("swap", (ph, ps)), -1.0)],
                            SENSE_GE,
                            0.0,
                        )
            for ph in range(3):
                terms = [(cat.col("curr", ps), -float(variants[v].real[ph, ps])) for ps in range(3)]
                b.add("ub", (v, ph), [(cat.col("y", ph), 1.0)] + terms + [(zc, -m_p)], SENSE_LE, 0.0)
                b.add("lb", (v, ph), [(cat.col("y", ph), 1.0)] + terms + [(zc, m_p)], SENSE_GE, 0.0)
        b.add("pick", (), [(cat.col("zeta", v), 1.0) for v in range(6)], SENSE_LE, 5.0)
        return cat, b.build({}), variants

    def test_identity_selection(self):
        z = np.array([[0.3, 0.05, 0.04], [0.05, 0.28, 0.06], [0.04, 0.06, 0.32]]) * (1 + 0.5j)
        cat, model, variants = self._mini_lnc(z)
        curr = np.array([0.4, 0.7, 0.2])
        fixes = {}
        for ph in range(3):
            for ps in range(3):
                fixes[cat.col("swap", (ph, ps))] = 1.0 if ph == ps else 0.0
        for i, c in enumerate(curr):
            fixes[cat.col("curr", i)] = c
        lb, ub = _fix_all(model, fixes)
        res = _lp(model, lb, ub)
        assert res.status == 0
        zeta = [res.x[cat.col("zeta", v)] for v in range(6)]
        assert zeta[0] == pytest.approx(0.0, abs=1e-9)
        y = np.array([res.x[cat.col("y", ph)] for ph in range(3)])
        assert y == pytest.approx(variants[0].real @ curr, abs=1e-9)

    @pytest.mark.parametrize("v_star", range(6))
    def test_each_variant_pins_its_product(self, v_star):
        rng = np.random.default_rng(v_star)
        raw = rng.uniform(0.05, 0.4, size=(3, 3))
        z = ((raw + raw.T) / 2) * (1 + 1j)
        cat, model, variants = self._mini_lnc(z)
        curr = rng.uniform(0.0, 1.0, size=3)
        fixes = {}
        for ph in range(3):
            for ps in range(3):
                fixes[cat.col("swap", (ph, ps))] = float(PERMUTATIONS[v_star][ph, ps])
        for i, c in enumerate(curr):
            fixes[cat.col("curr", i)] = float(c)
        lb, ub = _fix_all(model, fixes)
        # selector feasibility: only v_star can stay selected
        res = _lp(model, lb, ub)
        assert res.status == 0
        assert res.x[cat.col("zeta", v_star)] == pytest.approx(0.0, abs=1e-9)
        y = np.array([res.x[cat.col("y", ph)] for ph in range(3)])
        assert y == pytest.approx(variants[v_star].real @ curr, abs=1e-8)

    def test_bracket_admits_exactly_selected_product(self):
        """LP feasibility over y: the bracket pins y to the selected product."""
        rng = np.random.default_rng(42)
        raw = rng.uniform(0.05, 0.4, size=(3, 3))
        z = ((raw + raw.T) / 2) * (1 + 1j)
        cat, model, variants = self._mini_lnc(z)
        for v_star in range(6):
            for trial in range(3):
                curr = rng.uniform(0.0, 1.0, size=3)
                fixes = {}
                for ph in range(3):
                    for ps in range(3):
                        fixes[cat.col("swap", (ph, ps))] = float(PERMUTATIONS[v_star][ph, ps])
                for v in range(6):
                    fixes[cat.col("zeta", v)] = 0.0 if v == v_star else 1.0
                for i, c in enumerate(curr):
                    fixes[cat.col("curr", i)] = float(c)
                lb, ub = _fix_all(model, fixes)
                want = variants[v_star].real @ curr
                for ph in range(3):
                    c = np.zeros(model.ncols)
                    c[cat.col("y", ph)] = 1.0
                    lo = _lp(model, lb, ub, c)
                    hi = _lp(model, lb, ub, -c)
                    assert lo.status == 0 and hi.status == 0
                    assert lo.x[cat.col("y", ph)] == pytest.approx(want[ph], abs=1e-8)
                    assert hi.x[cat.col("y", ph)] == pytest.approx(want[ph], abs=1e-8)


class TestFixedReorderDifferential:
    """Bracket encoding equals direct substitution once binaries are pinned."""

    def test_gear_toy_all_variants(self):
        from ugrestore.solver import warmstart as W
        from ugrestore.solver.lp import LpBackend

        case = shipped_case("toy_gear3")
        for v_star in range(6):
            perm = PERMUTATIONS[v_star]
            schedule = {
                "G1": (
                    [1, 1],
                    0,
                    [perm.copy(), perm.copy()],
                )
            }
            vals = []
            for fixed in (None, {"G1": v_star}):
                model = build_model(case, BuildOptions(fixed_reorder=fixed))
                fixes = W._structural_fixes(model, case, schedule)
                assert fixes is not None
                x = W._resolve(model, LpBackend(model), fixes, _opts())
                assert x is not None, f"variant {v_star} infeasible"
                vals.append(model.objective_value(x))
            assert vals[0] == pytest.approx(vals[1], abs=2e-8)


def _opts():
    from ugrestore.solver import SolverOptions

    return SolverOptions(oa_tol=1e-10)


class TestOrientation:
    def test_bfs_parents(self, toy_pv):
        o = orient_from(toy_pv, "s")
        assert o.parent_node["n1"] == "s"
        assert o.parent_node["n2"] == "n1"
        assert o.order[0] == "s"

    def test_hat_matrices_reduce_to_classic(self):
        z = np.diag([0.3 + 0.6j, 0.3 + 0.6j, 0.3 + 0.6j])
        r_hat, x_hat, z_hat = hat_matrices(z, True)
        assert np.allclose(np.diag(r_hat), 0.3)
        assert np.allclose(np.diag(x_hat), 0.6)
        assert np.allclose(np.diag(z_hat), -(0.3**2 + 0.6**2))


@pytest.mark.slow
class TestStructuralSmoke:
    def test_feeder123_builds(self):
        case = shipped_case("feeder123")
        model = build_model(case)
        counts = model.family_counts()
        assert model.ncols > 100_000
        assert counts["balance-p"] == counts["balance-q"]
        assert counts["cone"] > 0
        # frozen structural fingerprint of the shipped case
        assert len(case.nodes) == 123
        assert counts["swap-open-or-full"] == 14 * 24
        assert counts["ferro-sequence"] == 14 * 24
        assert counts["tree-count"] == 1
        fingerprint = (model.ncols, model.nrows, len(model.cones))
        assert fingerprint == snapshot_123()


def snapshot_123():
    """Frozen row/column counts for the shipped structural case."""
    import json
    from pathlib import Path

    path = Path(__file__).parent / "data" / "feeder123_counts.json"
    with open(path) as fh:
        data = json.load(fh)
    return tuple(data["fingerprint"])
