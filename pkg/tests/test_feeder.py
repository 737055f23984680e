import json
import math

import numpy as np
import pytest

from conftest import load_minimal, minimal_doc, shipped_case
from ugrestore.feeder import (
    CaseInvariantError,
    CaseSchemaError,
    case_to_dict,
    derive_downstream_sets,
    equivalent_capacitance,
    load_case,
    load_case_dict,
    save_case,
)


class TestLoadCase:
    def test_minimal_case(self):
        case = load_minimal()
        assert len(case.nodes) == 2
        assert len(case.lines) == 1
        assert case.horizon == 1

    def test_unknown_node_named(self):
        doc = minimal_doc()
        doc["lines"][0]["to"] = "n99"
        with pytest.raises(CaseSchemaError, match="n99"):
            load_case_dict(doc)

    def test_unknown_key_rejected(self):
        doc = minimal_doc()
        doc["surprise"] = 1
        with pytest.raises(CaseSchemaError, match="surprise"):
            load_case_dict(doc)

    def test_missing_file(self, tmp_path):
        from ugrestore.feeder import CaseError

        with pytest.raises(CaseError):
            load_case(tmp_path / "nope.json")

    def test_shipped_123_style_counts(self):
        case = shipped_case("feeder123")
        assert len(case.nodes) == 123
        assert len(case.switchgears) == 14
        assert len(case.feeder_switch_lines) == 5
        assert len(case.ess_units) == 3
        kinds = [r.kind for r in case.res_units]
        assert kinds.count("PV") == 3
        assert kinds.count("WT") == 4

    def test_wire_cycle_rejected(self):
        doc = minimal_doc()
        doc["nodes"].append({"id": "n2", "phases": "abc"})
        doc["lines"] += [
            {"from": "n1", "to": "n2", "length_miles": 0.1, "impedance_pu": {"aa": [0.01, 0.01]}},
            {"from": "n2", "to": "s", "length_miles": 0.1, "impedance_pu": {"aa": [0.01, 0.01]}},
        ]
        with pytest.raises(CaseInvariantError, match="cycle"):
            load_case_dict(doc)

    def test_load_on_absent_phase_rejected(self):
        doc = minimal_doc()
        doc["nodes"][1] = {"id": "n1", "phases": "a", "load_kw": {"b": [5.0]}}
        with pytest.raises(CaseInvariantError, match="phase"):
            load_case_dict(doc)

    def test_reactive_without_active_rejected(self):
        doc = minimal_doc()
        doc["nodes"][1]["load_kvar"] = {"b": [5.0]}
        with pytest.raises(CaseInvariantError, match="reactive"):
            load_case_dict(doc)

    def test_trapped_voltage_range(self):
        doc = minimal_doc()
        doc["nodes"][1]["phases"] = "abc"
        doc["lines"][0]["is_switch"] = True
        doc["lines"][0].pop("impedance_pu")
        doc["lines"][0]["phases"] = "abc"
        doc["switchgears"] = [
            {
                "id": "G",
                "feeder_node": "s",
                "lateral_node": "n1",
                "inrush_limit_pu": 2.0,
                "q_max": 0.05,
                "trapped_voltage_sq": 1.5,
            }
        ]
        with pytest.raises(CaseInvariantError, match="trapped"):
            load_case_dict(doc)

    def test_coupling_must_have_zero_impedance(self):
        doc = minimal_doc()
        doc["lines"][0]["is_switch"] = True  # keeps its impedance entries
        doc["switchgears"] = [
            {
                "id": "G",
                "feeder_node": "s",
                "lateral_node": "n1",
                "inrush_limit_pu": 2.0,
                "q_max": 0.05,
            }
        ]
        with pytest.raises(CaseInvariantError, match="zero impedance"):
            load_case_dict(doc)

    def test_per_unit_conversion(self):
        case = load_minimal()
        # 10 kW on a 1 MVA base
        assert case.node("n1").load_p[0, 0] == pytest.approx(0.01)

    def test_shunt_iff_underground(self):
        doc = minimal_doc()
        doc["lines"][0]["shunt_nf_per_mile"] = 100.0
        with pytest.raises(CaseInvariantError, match="shunt"):
            load_case_dict(doc)
        doc = minimal_doc()
        doc["lines"][0]["is_underground"] = True
        with pytest.raises(CaseInvariantError, match="shunt"):
            load_case_dict(doc)


def _gear_doc(extra_nodes, extra_lines, gears):
    doc = minimal_doc()
    doc["horizon"] = 1
    doc["nodes"] = [
        {"id": "s", "phases": "abc"},
        {"id": "f1", "phases": "abc"},
    ] + extra_nodes
    doc["lines"] = [
        {
            "from": "s",
            "to": "f1",
            "length_miles": 0.1,
            "impedance_pu": {"aa": [0.01, 0.02], "bb": [0.01, 0.02], "cc": [0.01, 0.02]},
        }
    ] + extra_lines
    doc["switchgears"] = gears
    return doc


def _cable(u, v, miles, phase="a"):
    return {
        "from": u,
        "to": v,
        "length_miles": miles,
        "is_underground": True,
        "shunt_nf_per_mile": 178.0,
        "impedance_pu": {phase * 2: [0.01 * miles, 0.008 * miles]},
    }


class TestDownstreamSets:
    def test_leaf_lateral(self):
        doc = _gear_doc(
            [{"id": "j", "phases": "a"}],
            [{"from": "f1", "to": "j", "length_miles": 0.0, "is_switch": True, "phases": "abc"}],
            [
                {
                    "id": "G",
                    "feeder_node": "f1",
                    "lateral_node": "j",
                    "inrush_limit_pu": 2.0,
                    "q_max": 0.05,
                }
            ],
        )
        case = load_case_dict(doc)
        g = case.switchgears[0]
        assert g.downstream_nodes == ("j",)
        assert g.downstream_lines == ()
        assert equivalent_capacitance(g, case) == 0.0

    def test_chain(self):
        doc = _gear_doc(
            [{"id": "j", "phases": "a"}, {"id": "m", "phases": "a"}, {"id": "n", "phases": "a"}],
            [
                {"from": "f1", "to": "j", "length_miles": 0.0, "is_switch": True, "phases": "abc"},
                _cable("j", "m", 0.5),
                _cable("m", "n", 0.38),
            ],
            [
                {
                    "id": "G",
                    "feeder_node": "f1",
                    "lateral_node": "j",
                    "inrush_limit_pu": 2.0,
                    "q_max": 0.05,
                }
            ],
        )
        case = load_case_dict(doc)
        g = case.switchgears[0]
        assert set(g.downstream_nodes) == {"j", "m", "n"}
        assert len(g.downstream_lines) == 2
        assert equivalent_capacitance(g, case) == pytest.approx(156.64e-9)

    def test_nested_gear_excluded(self):
        # six-node fixture: s - f1 = G1 > j - m = G2 > p - q
        doc = _gear_doc(
            [
                {"id": "j", "phases": "abc"},
                {"id": "m", "phases": "abc"},
                {"id": "p", "phases": "a"},
                {"id": "q", "phases": "a"},
            ],
            [
                {"from": "f1", "to": "j", "length_miles": 0.0, "is_switch": True, "phases": "abc"},
                _cable("j", "m", 0.3, "a"),
                {"from": "m", "to": "p", "length_miles": 0.0, "is_switch": True, "phases": "abc"},
                _cable("p", "q", 0.2),
            ],
            [
                {
                    "id": "G1",
                    "feeder_node": "f1",
                    "lateral_node": "j",
                    "inrush_limit_pu": 2.0,
                    "q_max": 0.05,
                },
                {
                    "id": "G2",
                    "feeder_node": "m",
                    "lateral_node": "p",
                    "inrush_limit_pu": 2.0,
                    "q_max": 0.05,
                },
            ],
        )
        case = load_case_dict(doc)
        g1, g2 = case.switchgears
        assert set(g1.downstream_nodes) == {"j", "m"}
        assert set(g2.downstream_nodes) == {"p", "q"}
        assert set(g1.downstream_nodes).isdisjoint(g2.downstream_nodes)
        # traversal oracle: brute-force reachability without crossing couplings
        import networkx as nx

        graph = nx.Graph()
        couplings = {g.line_index for g in case.switchgears}
        for l in case.lines:
            if l.index not in couplings:
                graph.add_edge(l.from_node, l.to_node)
        graph.add_nodes_from(n.id for n in case.nodes)
        assert set(g1.downstream_nodes) == nx.node_connected_component(graph, "j")
        assert set(g2.downstream_nodes) == nx.node_connected_component(graph, "p")

    def test_disjoint_validation(self):
        doc = _gear_doc(
            [{"id": "j", "phases": "a"}],
            [
                {"from": "f1", "to": "j", "length_miles": 0.0, "is_switch": True, "phases": "abc"},
                {"from": "s", "to": "j", "length_miles": 0.0, "is_switch": True, "phases": "abc", "id": "dup"},
            ],
            [
                {
                    "id": "G1",
                    "feeder_node": "f1",
                    "lateral_node": "j",
                    "inrush_limit_pu": 2.0,
                    "q_max": 0.05,
                },
                {
                    "id": "G2",
                    "feeder_node": "s",
                    "lateral_node": "j",
                    "inrush_limit_pu": 2.0,
                    "q_max": 0.05,
                },
            ],
        )
        with pytest.raises(CaseInvariantError, match="downstream of both"):
            load_case_dict(doc)


class TestRoundTrip:
    @pytest.mark.parametrize(
        "name", ["toy_pair", "toy_fork", "toy_pv", "toy_gear3", "reduced13"]
    )
    def test_save_load_identity(self, name, tmp_path):
        case = shipped_case(name)
        out = tmp_path / "resaved.json"
        save_case(case, out)
        again = load_case(out)
        assert case_to_dict(case) == case_to_dict(again)
        assert [n.id for n in again.nodes] == [n.id for n in case.nodes]
        for a, b in zip(case.nodes, again.nodes):
            assert np.array_equal(a.load_p, b.load_p)
            assert np.array_equal(a.load_q, b.load_q)
        for a, b in zip(case.lines, again.lines):
            assert np.array_equal(a.z, b.z)
            assert a.is_switch == b.is_switch
        for a, b in zip(case.switchgears, again.switchgears):
            assert a.downstream_nodes == b.downstream_nodes
            assert np.array_equal(a.trapped_v_sq, b.trapped_v_sq)

    def test_resave_is_stable(self, tmp_path):
        case = shipped_case("toy_gear3")
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_case(case, p1)
        save_case(load_case(p1), p2)
        assert p1.read_text() == p2.read_text()


class TestSchemaCopies:
    def test_repo_copy_matches_package_copy(self):
        from importlib import resources
        from pathlib import Path

        pkg = resources.files("ugrestore.schema").joinpath("case.schema.json").read_text()
        repo = Path(__file__).resolve().parent.parent / "schema" / "case.schema.json"
        assert repo.read_text() == pkg
