#!/usr/bin/env python3
"""Generate the shipped case files under src/ugrestore/cases/.

All data is synthetic but dimensioned like a real 4.16 kV underground
system; profiles are deterministic (seeded).  Re-running regenerates
byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "src" / "ugrestore" / "cases"

BASE_CONFIG = {
    "base_kv": 4.16,
    "base_mva": 1.0,
    "v_min_sq": 0.9025,
    "v_max_sq": 1.1025,
    "inrush_rise_time_s": 1.2e-7,
    "angle_window_rad": 0.17453292519943295,
    "q_gate_delay_limit_h": 2.0,
}

TRUNK_Z = {
    "aa": [0.0102, 0.0237],
    "bb": [0.0104, 0.0231],
    "cc": [0.0103, 0.0234],
    "ab": [0.0032, 0.0087],
    "ac": [0.0031, 0.0074],
    "bc": [0.0033, 0.0081],
}

CABLE_Z1 = {"aa": [0.0162, 0.0082]}  # single-phase concentric-neutral cable, per 0.3 mi


def z_scaled(entries: dict, factor: float) -> dict:
    return {k: [round(v[0] * factor, 6), round(v[1] * factor, 6)] for k, v in entries.items()}


def cable_z(phase: str, miles: float) -> dict:
    base = CABLE_Z1["aa"]
    key = phase + phase
    f = miles / 0.3
    return {key: [round(base[0] * f, 6), round(base[1] * f, 6)]}


def write(name: str, doc: dict) -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / f"{name}.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=False)
        fh.write("\n")
    print(f"wrote {path}")


# ---------------------------------------------------------------------------
# small instances for exact enumeration


def toy_pair() -> dict:
    return {
        "name": "toy_pair",
        "notes": "Two nodes, one balanced line; per-unit base 4.16 kV / 1 MVA.",
        "horizon": 1,
        "period_hours": 1.0,
        "config": dict(BASE_CONFIG),
        "nodes": [
            {"id": "s", "phases": "abc"},
            {
                "id": "n1",
                "phases": "abc",
                "load_kw": {"a": [55.0], "b": [45.0], "c": [50.0]},
                "load_kvar": {"a": [11.0], "b": [9.0], "c": [10.0]},
            },
        ],
        "lines": [
            {
                "from": "s",
                "to": "n1",
                "length_miles": 0.4,
                "impedance_pu": z_scaled(TRUNK_Z, 0.4),
                "ampacity_pu": 2.0,
            }
        ],
        "switchgears": [],
        "ders": [
            {
                "node": "s",
                "kind": "ESS",
                "energy_max_kwh": 400.0,
                "soc_init": 0.9,
                "soc_min": 0.1,
                "charge_max_kw": 60.0,
                "discharge_max_kw": 80.0,
                "reactive_max_kvar": 60.0,
            }
        ],
    }


def toy_fork() -> dict:
    """Two sources competing for one load node over two switches."""
    return {
        "name": "toy_fork",
        "notes": "Radial choice between two sources; per-unit base 4.16 kV / 1 MVA.",
        "horizon": 1,
        "period_hours": 1.0,
        "config": dict(BASE_CONFIG),
        "nodes": [
            {"id": "r1", "phases": "abc"},
            {"id": "r2", "phases": "abc"},
            {
                "id": "n1",
                "phases": "abc",
                "load_kw": {"a": [70.0], "b": [65.0], "c": [75.0]},
                "load_kvar": {"a": [14.0], "b": [13.0], "c": [15.0]},
            },
        ],
        "lines": [
            {
                "from": "r1",
                "to": "n1",
                "length_miles": 0.3,
                "is_switch": True,
                "phases": "abc",
            },
            {
                "from": "r2",
                "to": "n1",
                "length_miles": 0.5,
                "is_switch": True,
                "phases": "abc",
            },
        ],
        "switchgears": [],
        "ders": [
            {
                "node": "r1",
                "kind": "ESS",
                "energy_max_kwh": 300.0,
                "soc_init": 0.8,
                "soc_min": 0.1,
                "charge_max_kw": 50.0,
                "discharge_max_kw": 90.0,
                "reactive_max_kvar": 50.0,
            },
            {
                "node": "r2",
                "kind": "ESS",
                "energy_max_kwh": 200.0,
                "soc_init": 0.6,
                "soc_min": 0.1,
                "charge_max_kw": 40.0,
                "discharge_max_kw": 60.0,
                "reactive_max_kvar": 40.0,
            },
        ],
    }


def toy_pv() -> dict:
    return {
        "name": "toy_pv",
        "notes": "Chain with storage and derated solar; per-unit base 4.16 kV / 1 MVA.",
        "horizon": 2,
        "period_hours": 1.0,
        "config": dict(BASE_CONFIG),
        "nodes": [
            {"id": "s", "phases": "abc"},
            {
                "id": "n1",
                "phases": "abc",
                "load_kw": {"a": [40.0, 55.0], "b": [35.0, 50.0], "c": [38.0, 52.0]},
                "load_kvar": {"a": [8.0, 11.0], "b": [7.0, 10.0], "c": [7.6, 10.4]},
            },
            {
                "id": "n2",
                "phases": "abc",
                "load_kw": {"a": [20.0, 25.0], "b": [18.0, 22.0], "c": [19.0, 24.0]},
            },
        ],
        "lines": [
            {
                "from": "s",
                "to": "n1",
                "length_miles": 0.35,
                "impedance_pu": z_scaled(TRUNK_Z, 0.35),
                "ampacity_pu": 2.0,
            },
            {
                "from": "n1",
                "to": "n2",
                "length_miles": 0.3,
                "impedance_pu": z_scaled(TRUNK_Z, 0.3),
                "ampacity_pu": 2.0,
            },
        ],
        "switchgears": [],
        "ders": [
            {
                "node": "s",
                "kind": "ESS",
                "energy_max_kwh": 350.0,
                "soc_init": 0.7,
                "soc_min": 0.1,
                "charge_max_kw": 60.0,
                "discharge_max_kw": 70.0,
                "reactive_max_kvar": 60.0,
            },
            {
                "node": "n2",
                "kind": "PV",
                "forecast_kw": {"a": [30.0, 18.0], "b": [30.0, 18.0], "c": [30.0, 18.0]},
                "sigma": 0.2,
                "confidence": 0.9,
                "reactive_max_kvar": 20.0,
            },
        ],
    }


def toy_gear3() -> dict:
    """Single switchgear over a 0.42 mile single-phase lateral."""
    return {
        "name": "toy_gear3",
        "notes": "One switchgear, trapped-charge lateral; per-unit base 4.16 kV / 1 MVA.",
        "horizon": 2,
        "period_hours": 1.0,
        "config": dict(BASE_CONFIG),
        "nodes": [
            {"id": "s", "phases": "abc"},
            {"id": "l0", "phases": "abc"},
            {
                "id": "l1",
                "phases": "b",
                "load_kw": {"b": [80.0, 90.0]},
                "load_kvar": {"b": [16.0, 18.0]},
            },
        ],
        "lines": [
            {"from": "s", "to": "l0", "length_miles": 0.0, "is_switch": True, "phases": "abc"},
            {
                "from": "l0",
                "to": "l1",
                "length_miles": 0.42,
                "is_underground": True,
                "shunt_nf_per_mile": 178.0,
                "impedance_pu": cable_z("b", 0.42),
                "ampacity_pu": 1.5,
            },
        ],
        "switchgears": [
            {
                "id": "G1",
                "feeder_node": "s",
                "lateral_node": "l0",
                "inrush_limit_pu": 2.0,
                "q_max": 0.05,
                "trapped_voltage_sq": 1.0,
                "zip_z_fraction": 0.3,
            }
        ],
        "ders": [
            {
                "node": "s",
                "kind": "ESS",
                "energy_max_kwh": 600.0,
                "soc_init": 0.9,
                "soc_min": 0.1,
                "charge_max_kw": 80.0,
                "discharge_max_kw": 100.0,
                "reactive_max_kvar": 80.0,
            }
        ],
    }


# ---------------------------------------------------------------------------
# radiality fixtures


def rad_loop4() -> dict:
    nodes = [{"id": "r", "phases": "abc"}] + [{"id": n, "phases": "abc"} for n in "abc"]
    edges = [("r", "a"), ("a", "b"), ("b", "c"), ("c", "a"), ("r", "b")]
    return {
        "name": "rad_loop4",
        "notes": "Radiality fixture: four nodes, five switches, one source.",
        "horizon": 1,
        "period_hours": 1.0,
        "config": dict(BASE_CONFIG),
        "nodes": nodes,
        "lines": [
            {"from": u, "to": v, "length_miles": 0.1, "is_switch": True, "phases": "abc"}
            for u, v in edges
        ],
        "switchgears": [],
        "ders": [
            {
                "node": "r",
                "kind": "ESS",
                "energy_max_kwh": 100.0,
                "charge_max_kw": 10.0,
                "discharge_max_kw": 10.0,
            }
        ],
    }


def rad_tworoot5() -> dict:
    nodes = [
        {"id": "r1", "phases": "abc"},
        {"id": "r2", "phases": "abc"},
        {"id": "n1", "phases": "abc"},
        {"id": "n2", "phases": "abc"},
        {"id": "n3", "phases": "abc"},
    ]
    wires = [("r1", "n1"), ("r2", "n2")]
    switches = [("n1", "n2"), ("n2", "n3"), ("n1", "n3"), ("n3", "r1")]
    return {
        "name": "rad_tworoot5",
        "notes": "Radiality fixture: five nodes, two sources, four switches.",
        "horizon": 1,
        "period_hours": 1.0,
        "config": dict(BASE_CONFIG),
        "nodes": nodes,
        "lines": [
            {
                "from": u,
                "to": v,
                "length_miles": 0.1,
                "impedance_pu": z_scaled(TRUNK_Z, 0.1),
                "ampacity_pu": 2.0,
            }
            for u, v in wires
        ]
        + [
            {"from": u, "to": v, "length_miles": 0.1, "is_switch": True, "phases": "abc"}
            for u, v in switches
        ],
        "switchgears": [],
        "ders": [
            {
                "node": "r1",
                "kind": "ESS",
                "energy_max_kwh": 100.0,
                "charge_max_kw": 10.0,
                "discharge_max_kw": 10.0,
            },
            {
                "node": "r2",
                "kind": "ESS",
                "energy_max_kwh": 100.0,
                "charge_max_kw": 10.0,
                "discharge_max_kw": 10.0,
            },
        ],
    }


# ---------------------------------------------------------------------------
# reduced comparative case


def reduced13() -> dict:
    T = 6
    shape = [0.55, 0.65, 0.85, 1.0, 0.9, 0.7]

    def prof(peak: float) -> list[float]:
        return [round(peak * s, 3) for s in shape]

    nodes = [
        {"id": "m1", "phases": "abc"},
        {
            "id": "m2",
            "phases": "abc",
            "load_kw": {"a": prof(14.0), "b": prof(13.0), "c": prof(15.0)},
            "load_kvar": {"a": prof(2.8), "b": prof(2.6), "c": prof(3.0)},
        },
        {
            "id": "m3",
            "phases": "abc",
            "load_kw": {"a": prof(22.0), "b": prof(20.0), "c": prof(21.0)},
            "load_kvar": {"a": prof(4.4), "b": prof(4.0), "c": prof(4.2)},
        },
        {
            "id": "m4",
            "phases": "abc",
            "load_kw": {"a": prof(12.0), "b": prof(11.0), "c": prof(12.0)},
        },
        {
            "id": "m5",
            "phases": "abc",
            "load_kw": {"a": prof(8.0), "b": prof(8.0), "c": prof(8.0)},
        },
        {"id": "a0", "phases": "a"},
        {
            "id": "a1",
            "phases": "a",
            "load_kw": {"a": prof(26.0)},
            "load_kvar": {"a": prof(5.2)},
        },
        {
            "id": "a2",
            "phases": "a",
            "load_kw": {"a": prof(20.0)},
            "load_kvar": {"a": prof(4.0)},
        },
        {"id": "b0", "phases": "a"},
        {
            "id": "b1",
            "phases": "a",
            "load_kw": {"a": [10.0, 12.0, 24.0, 30.0, 27.0, 20.0]},
            "load_kvar": {"a": [2.0, 2.4, 4.8, 6.0, 5.4, 4.0]},
        },
        {
            "id": "b2",
            "phases": "a",
            "load_kw": {"a": [8.0, 10.0, 20.0, 25.0, 22.0, 17.0]},
        },
        {
            "id": "b3",
            "phases": "a",
            "load_kw": {"a": [7.0, 8.0, 16.0, 20.0, 18.0, 14.0]},
        },
        {"id": "m6", "phases": "abc"},
    ]
    lines = [
        {
            "from": "m1",
            "to": "m2",
            "length_miles": 0.4,
            "impedance_pu": z_scaled(TRUNK_Z, 0.4),
            "ampacity_pu": 2.5,
        },
        {
            "from": "m2",
            "to": "m3",
            "length_miles": 0.35,
            "impedance_pu": z_scaled(TRUNK_Z, 0.35),
            "ampacity_pu": 2.5,
        },
        {
            "from": "m3",
            "to": "m4",
            "length_miles": 0.35,
            "impedance_pu": z_scaled(TRUNK_Z, 0.35),
            "ampacity_pu": 2.5,
        },
        {
            "from": "m4",
            "to": "m5",
            "length_miles": 0.3,
            "impedance_pu": z_scaled(TRUNK_Z, 0.3),
            "ampacity_pu": 2.5,
        },
        {
            "from": "m5",
            "to": "m6",
            "length_miles": 0.25,
            "impedance_pu": z_scaled(TRUNK_Z, 0.25),
            "ampacity_pu": 2.5,
        },
        {"id": "cplA", "from": "m2", "to": "a0", "length_miles": 0.0, "is_switch": True, "phases": "abc"},
        {
            "from": "a0",
            "to": "a1",
            "length_miles": 0.21,
            "is_underground": True,
            "shunt_nf_per_mile": 178.0,
            "impedance_pu": cable_z("a", 0.21),
            "ampacity_pu": 1.5,
        },
        {
            "from": "a1",
            "to": "a2",
            "length_miles": 0.21,
            "is_underground": True,
            "shunt_nf_per_mile": 178.0,
            "impedance_pu": cable_z("a", 0.21),
            "ampacity_pu": 1.5,
        },
        {"id": "cplB", "from": "m4", "to": "b0", "length_miles": 0.0, "is_switch": True, "phases": "abc"},
        {
            "from": "b0",
            "to": "b1",
            "length_miles": 0.3,
            "is_underground": True,
            "shunt_nf_per_mile": 178.0,
            "impedance_pu": cable_z("a", 0.3),
            "ampacity_pu": 1.5,
        },
        {
            "from": "b1",
            "to": "b2",
            "length_miles": 0.3,
            "is_underground": True,
            "shunt_nf_per_mile": 178.0,
            "impedance_pu": cable_z("a", 0.3),
            "ampacity_pu": 1.5,
        },
        {
            "from": "b2",
            "to": "b3",
            "length_miles": 0.3,
            "is_underground": True,
            "shunt_nf_per_mile": 178.0,
            "impedance_pu": cable_z("a", 0.3),
            "ampacity_pu": 1.5,
        },
    ]
    # gate threshold for B: c_eq = 0.9 mi * 178 nF = 160.2 nF;
    # q_max tuned so the lateral-B demand passes only from the third period on.
    return {
        "name": "reduced13",
        "notes": (
            "Reduced comparative case: one grid-forming storage unit, two "
            "switchgears with single-phase laterals both landing on phase a, "
            "one solar unit.  Per-unit base 4.16 kV / 1 MVA."
        ),
        "horizon": T,
        "period_hours": 1.0,
        "config": dict(BASE_CONFIG),
        "nodes": nodes,
        "lines": lines,
        "switchgears": [
            {
                "id": "GA",
                "feeder_node": "m2",
                "lateral_node": "a0",
                "inrush_limit_pu": 2.0,
                "q_max": 0.06,
                "trapped_voltage_sq": 1.0,
                "zip_z_fraction": 0.3,
            },
            {
                "id": "GB",
                "feeder_node": "m4",
                "lateral_node": "b0",
                "inrush_limit_pu": 2.0,
                "q_max": 0.005,
                "trapped_voltage_sq": 1.0,
                "zip_z_fraction": 0.3,
            },
        ],
        "ders": [
            {
                "node": "m1",
                "kind": "ESS",
                "energy_max_kwh": 1500.0,
                "soc_init": 0.85,
                "soc_min": 0.1,
                "charge_max_kw": 60.0,
                "discharge_max_kw": 110.0,
                "reactive_max_kvar": 100.0,
            },
            {
                "node": "m6",
                "kind": "PV",
                "forecast_kw": {
                    "a": [5.0, 20.0, 40.0, 45.0, 30.0, 10.0],
                    "b": [5.0, 20.0, 40.0, 45.0, 30.0, 10.0],
                    "c": [5.0, 20.0, 40.0, 45.0, 30.0, 10.0],
                },
                "sigma": 0.15,
                "confidence": 0.9,
                "reactive_max_kvar": 25.0,
            },
        ],
    }


# ---------------------------------------------------------------------------
# 123-node style case


def feeder123() -> dict:
    rng = np.random.default_rng(20240716)
    T = 24
    # hourly demand shape starting 07:00
    shape = np.array(
        [
            0.62, 0.66, 0.70, 0.72, 0.74, 0.78,  # 07..12
            0.80, 0.78, 0.76, 0.78, 0.86, 0.98,  # 13..18
            1.00, 0.96, 0.88, 0.78, 0.70, 0.62,  # 19..24
            0.55, 0.50, 0.47, 0.45, 0.46, 0.52,  # 01..06
        ]
    )
    pv_shape = np.array(
        [0.18, 0.38, 0.62, 0.82, 0.95, 1.0, 0.97, 0.86, 0.68, 0.44, 0.20, 0.04]
        + [0.0] * 12
    )
    wt_shape = np.array(
        [0.45, 0.42, 0.40, 0.38, 0.35, 0.33, 0.32, 0.35, 0.40, 0.48, 0.55, 0.62]
        + [0.66, 0.68, 0.66, 0.62, 0.58, 0.55, 0.52, 0.50, 0.48, 0.47, 0.46, 0.45]
    )

    n_trunk = 46
    trunk = [f"m{i}" for i in range(1, n_trunk + 1)]
    nodes = []
    lines = []
    gears = []
    ders = []

    def prof(peak: float, shape_arr) -> list[float]:
        return [round(float(peak * s), 3) for s in shape_arr]

    trunk_loads = rng.uniform(4.0, 14.0, size=(n_trunk, 3))
    for i, nid in enumerate(trunk):
        load = {}
        kvar = {}
        for ph, name in enumerate("abc"):
            peak = round(float(trunk_loads[i, ph]), 2)
            load[name] = prof(peak, shape)
            kvar[name] = prof(peak * 0.2, shape)
        nodes.append(
            {"id": nid, "phases": "abc", "weight": 1.0, "load_kw": load, "load_kvar": kvar}
        )

    sectionalizers = {12, 24, 36}
    for i in range(n_trunk - 1):
        u, v = trunk[i], trunk[i + 1]
        if (i + 1) in sectionalizers:
            lines.append(
                {"id": f"sw_{u}_{v}", "from": u, "to": v, "length_miles": 0.05, "is_switch": True, "phases": "abc"}
            )
        else:
            lines.append(
                {
                    "from": u,
                    "to": v,
                    "length_miles": 0.12,
                    "impedance_pu": z_scaled(TRUNK_Z, 0.12),
                    "ampacity_pu": 3.0,
                }
            )
    # normally-open tie switches between regions
    lines.append({"id": "tie_m6_m30", "from": "m6", "to": "m30", "length_miles": 0.3, "is_switch": True, "phases": "abc"})
    lines.append({"id": "tie_m18_m44", "from": "m18", "to": "m44", "length_miles": 0.3, "is_switch": True, "phases": "abc"})

    lateral_sizes = [2, 5, 6, 4, 7, 5, 6, 5, 4, 6, 8, 7, 5, 7]
    lateral_miles = [0.42, 0.66, 0.82, 0.55, 0.95, 0.70, 0.78, 0.66, 0.52, 0.80, 0.88, 0.92, 0.64, 0.90]
    attach = [3, 6, 9, 13, 16, 19, 22, 26, 29, 32, 35, 39, 42, 45]
    phase_cycle = ["a", "b", "c", "ab", "a", "bc", "c", "abc", "b", "ac", "a", "abc", "b", "c"]
    for gi in range(14):
        gid = f"G{gi + 1}"
        feeder = trunk[attach[gi] - 1]
        size = lateral_sizes[gi]
        phases = phase_cycle[gi]
        seg = lateral_miles[gi] / max(size - 1, 1)
        prev = f"{gid.lower()}n1"
        nodes.append({"id": prev, "phases": "abc" if len(phases) > 1 else phases})
        lines.append(
            {"id": f"cpl_{gid}", "from": feeder, "to": prev, "length_miles": 0.0, "is_switch": True, "phases": "abc"}
        )
        for j in range(2, size + 1):
            nid = f"{gid.lower()}n{j}"
            node_ph = phases if len(phases) == 1 else phases
            peak = rng.uniform(6.0, 16.0)
            load = {ph: prof(round(peak / len(node_ph), 2), shape) for ph in node_ph}
            kvar = {ph: prof(round(peak / len(node_ph) * 0.2, 2), shape) for ph in node_ph}
            nodes.append(
                {"id": nid, "phases": node_ph, "weight": round(float(rng.choice([1.0, 1.0, 2.0])), 1), "load_kw": load, "load_kvar": kvar}
            )
            zdict = {}
            for ph in node_ph:
                zdict.update(cable_z(ph, seg))
            if len(node_ph) > 1:
                pairs = [node_ph[i] + node_ph[j] for i in range(len(node_ph)) for j in range(i + 1, len(node_ph))]
                for pair in pairs:
                    zdict[pair] = [round(0.004 * seg / 0.3, 6), round(0.002 * seg / 0.3, 6)]
            lines.append(
                {
                    "from": prev,
                    "to": nid,
                    "length_miles": round(seg, 4),
                    "is_underground": True,
                    "shunt_nf_per_mile": 178.0,
                    "impedance_pu": zdict,
                    "ampacity_pu": 1.5,
                }
            )
            prev = nid
        gears.append(
            {
                "id": gid,
                "feeder_node": feeder,
                "lateral_node": f"{gid.lower()}n1",
                "inrush_limit_pu": 2.0,
                "q_max": round(float(rng.uniform(0.03, 0.08)), 4),
                "trapped_voltage_sq": 1.0,
                "zip_z_fraction": 0.3,
            }
        )

    ess_cfg = [("m5", 3000.0, 250.0), ("m20", 5000.0, 350.0), ("m35", 8000.0, 450.0)]
    for nid, kwh, kw in ess_cfg:
        ders.append(
            {
                "node": nid,
                "kind": "ESS",
                "energy_max_kwh": kwh,
                "soc_init": 0.9,
                "soc_min": 0.1,
                "charge_max_kw": kw * 0.8,
                "discharge_max_kw": kw,
                "reactive_max_kvar": kw * 0.75,
            }
        )
    for nid, peak in (("m9", 220.0), ("m27", 260.0), ("m41", 240.0)):
        ders.append(
            {
                "node": nid,
                "kind": "PV",
                "forecast_kw": {ph: prof(peak / 3, pv_shape) for ph in "abc"},
                "sigma": 0.18,
                "confidence": 0.9,
                "reactive_max_kvar": peak * 0.3,
            }
        )
    for nid, peak in (("m14", 90.0), ("m23", 110.0), ("m31", 100.0), ("m44", 95.0)):
        ders.append(
            {
                "node": nid,
                "kind": "WT",
                "forecast_kw": {ph: prof(peak / 3, wt_shape) for ph in "abc"},
                "sigma": 0.25,
                "confidence": 0.85,
                "reactive_max_kvar": peak * 0.3,
            }
        )

    n_total = len(nodes)
    assert n_total == 123, n_total
    return {
        "name": "feeder123",
        "notes": (
            "Structural case shaped like a 123-node underground system: 46-node "
            "overhead trunk, 14 pad-mounted switchgears with underground "
            "laterals (178 nF/mile), 5 feeder switches (3 sectionalizing, 2 "
            "normally-open ties), 3 grid-forming storage units, 3 solar and 4 "
            "wind units.  Peak demand is scaled against a 1 MVA base; the "
            "restoration horizon starts at 07:00."
        ),
        "horizon": T,
        "period_hours": 1.0,
        "config": dict(BASE_CONFIG),
        "nodes": nodes,
        "lines": lines,
        "switchgears": gears,
        "ders": ders,
    }


def main() -> None:
    write("toy_pair", toy_pair())
    write("toy_fork", toy_fork())
    write("toy_pv", toy_pv())
    write("toy_gear3", toy_gear3())
    write("rad_loop4", rad_loop4())
    write("rad_tworoot5", rad_tworoot5())
    write("reduced13", reduced13())
    write("feeder123", feeder123())


if __name__ == "__main__":
    main()
