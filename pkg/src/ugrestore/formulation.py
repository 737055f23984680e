"""Assembly of the multi-period restoration problem.

The model is a mixed-binary linear program plus rotated second-order cone
rows.  Static topology (microgrid membership, switch states, radiality via a
single-commodity flow on a fictitious twin of the switch set) is decided
once per run; switchgear closing, phase swapping, inverter dispatch and
power flow are decided per period.

Row families (tags carried by every row):

  coverage-root          grid-forming source node anchors its own microgrid
  coverage-parent        a node is covered only if its upstream node is
  coverage-unique        at most one microgrid covers a node
  switch-split           open switch endpoints cannot share a microgrid
  switch-join            closed switch endpoints share coverage (two rows)
  wire-consistent        non-switch line endpoints always share coverage
  tree-count             closed line count equals nodes minus sources
  flow-demand            every non-source node draws one unit of commodity
  flow-root              every source ships at least one unit
  flow-gate              commodity on a switch needs its fictitious twin
  real-fict-link         a really closed switch is fictitiously closed
  fict-count             fictitious closed count equals nodes minus sources
  gear-in-topology       a switchgear can close only inside the topology
  gear-energize-cover    a switchgear can close only if its lateral is covered
  swap-col-once          a lateral conductor lands on at most one feeder phase
  swap-row-once          a feeder phase accepts at most one lateral conductor
  swap-open-or-full      fully open or a full permutation, tied to closing
  swap-delta             period-over-period change of the swap matrix
  swap-event-extract     binary extraction of new-connection events
  swap-event-or          per-feeder-phase OR of connection events
  inrush-pin             closing pins the voltage difference to its physics
  inrush-zero            no closing event, no voltage difference
  inrush-def             inrush current from the voltage step and rise time
  inrush-limit           inrush magnitude within the switchgear rating
  inrush-guard           closing-step components capped (no cancellation)
  voltdiff-cap           optional explicit cap on the closing voltage step
  ferro-gate             energizing requires enough damping load downstream
  ferro-sequence         the gate is checked at every closing transition
  ess-exclusive          charge and discharge do not overlap
  ess-energy             stored energy bookkeeping with efficiencies
  ess-charge-lim         per-phase charging bound when enabled
  ess-discharge-lim      per-phase discharging bound when enabled
  res-derate             risk-averse cap on forecast renewable output
  res-reactive           renewable reactive support within its rating
  lateral-load-map-p/q   lateral demand routed through the swap matrix
  load-pickup-lim        covered feeder demand may be served, or shed
  load-pq-ratio          partial pickup preserves the load power factor
  balance-p / balance-q  per-node per-microgrid branch flow balance
  volt-drop              squared-voltage drop along a line
  cone                   rotated cone relaxation of flow vs current
  slack-p/q/v-lim        balance and drop rows relax outside the microgrid
  gear-flow-gate         open switchgear carries no flow
  lateral-curr-gate      de-energized lateral carries no current
  reorder-bracket-*      reordered-impedance products, big-M bracketed
  reorder-select         mismatch between swap and a reordering variant
  reorder-pick-one       at least one reordering variant is active
  ess-line-p/q-lim       microgrid line flows within the source rating
  volt-range             covered node voltage within operating bounds
  volt-cover             voltage is zero outside the covering microgrid
  current-lim            squared current within ampacity when covered
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ugrestore import bigm
from ugrestore.catalog import VariableCatalog
from ugrestore.feeder import FeederCase, Switchgear, equivalent_capacitance
from ugrestore.model import SENSE_EQ, SENSE_GE, SENSE_LE, LinearModel, ModelBuilder
from ugrestore.physics import PERMUTATIONS, q_gate_load_threshold
from ugrestore.quantile import normal_quantile


class UnformulatableError(ValueError):
    pass


FAMILY_DESCRIPTIONS: dict[str, str] = {
    "coverage-root": "each grid-forming source anchors its own microgrid",
    "coverage-parent": "coverage grows outward from the source",
    "coverage-unique": "no node is covered by two microgrids",
    "switch-split": "open switch endpoints cannot share a microgrid",
    "switch-join": "closed switch endpoints share coverage",
    "wire-consistent": "non-switch line endpoints always share coverage",
    "tree-count": "closed lines equal nodes minus sources (forest count)",
    "flow-demand": "every non-source node draws one unit of fictitious commodity",
    "flow-root": "every source ships at least one unit of fictitious commodity",
    "flow-gate": "fictitious commodity only flows on fictitiously closed switches",
    "real-fict-link": "a really closed switch is fictitiously closed",
    "fict-count": "fictitious closed count equals nodes minus sources",
    "gear-in-topology": "closing a switchgear requires it in the chosen forest",
    "gear-energize-cover": "closing a switchgear requires a covered lateral",
    "swap-col-once": "each lateral conductor lands on at most one feeder phase",
    "swap-row-once": "each feeder phase accepts at most one lateral conductor",
    "swap-open-or-full": "the swap matrix is zero or a full permutation",
    "swap-delta": "definition of the period-over-period swap change",
    "swap-event-extract": "event flag set exactly on new connections",
    "swap-event-or": "per-phase OR of connection events",
    "inrush-pin": "a closing event pins the voltage difference to its physical value",
    "inrush-zero": "without a closing event the voltage difference is zero",
    "inrush-def": "inrush current proportional to the closing voltage step",
    "inrush-limit": "inrush magnitude within the switchgear rating",
    "inrush-guard": "closing-step magnitude and angle components jointly capped",
    "voltdiff-cap": "explicit cap on the closing voltage step",
    "ferro-gate": "energizing requires enough damping load downstream",
    "ferro-sequence": "the damping gate is checked at every closing transition",
    "ess-exclusive": "storage does not charge and discharge simultaneously",
    "ess-energy": "stored energy bookkeeping with charge/discharge efficiencies",
    "ess-charge-lim": "per-phase charging power bound, enabled by the charge flag",
    "ess-discharge-lim": "per-phase discharging power bound, enabled by the discharge flag",
    "res-derate": "risk-averse cap on forecast renewable output",
    "res-reactive": "renewable reactive support within its rating",
    "lateral-load-map-p": "lateral active demand routed through the swap matrix",
    "lateral-load-map-q": "lateral reactive demand routed through the swap matrix",
    "load-pickup-lim": "covered feeder demand may be served or shed",
    "load-pq-ratio": "partial pickup preserves the load power factor",
    "balance-p": "per-node active power balance within a microgrid",
    "balance-q": "per-node reactive power balance within a microgrid",
    "volt-drop": "squared-voltage drop along a line",
    "cone": "rotated cone coupling of flows, voltage and squared current",
    "slack-p-lim": "active balance relaxes outside the covering microgrid",
    "slack-q-lim": "reactive balance relaxes outside the covering microgrid",
    "slack-v-lim": "voltage drop relaxes outside the microgrid or across an open coupling",
    "gear-flow-gate": "an open switchgear carries no flow",
    "lateral-curr-gate": "a de-energized lateral carries no current",
    "reorder-bracket-p": "active loss product under the selected reordering",
    "reorder-bracket-q": "reactive loss product under the selected reordering",
    "reorder-bracket-v": "voltage drop expression under the selected reordering",
    "reorder-select": "variant mismatch forces its selector off",
    "reorder-pick-one": "at least one reordering variant stays selected",
    "ess-line-p-lim": "line active flow within the source per-phase rating",
    "ess-line-q-lim": "line reactive flow within the source reactive rating",
    "volt-range": "covered node voltage within operating bounds",
    "volt-cover": "voltage zero outside the covering microgrid",
    "current-lim": "squared current within ampacity when covered",
}


@dataclass(frozen=True)
class BuildOptions:
    no_swap: bool = False
    ferro_gate: bool = True
    fixed_reorder: dict[str, int] | None = None  # gear id -> variant index


@dataclass
class Orientation:
    root: str
    parent_line: dict[str, int] = field(default_factory=dict)
    parent_node: dict[str, str] = field(default_factory=dict)
    children: dict[str, list[tuple[int, str]]] = field(default_factory=dict)
    direction: dict[int, tuple[str, str]] = field(default_factory=dict)
    order: list[str] = field(default_factory=list)


def orient_from(case: FeederCase, root: str) -> Orientation:
    """Deterministic breadth-first orientation of the full line graph."""
    o = Orientation(root=root)
    o.children = {root: []}
    o.order = [root]
    seen = {root}
    queue = deque([root])
    while queue:
        nid = queue.popleft()
        for line in sorted(case.lines_at(nid), key=lambda l: l.index):
            other = line.to_node if line.from_node == nid else line.from_node
            if other in seen:
                continue
            seen.add(other)
            o.parent_line[other] = line.index
            o.parent_node[other] = nid
            o.children.setdefault(nid, []).append((line.index, other))
            o.children.setdefault(other, [])
            o.direction[line.index] = (nid, other)
            o.order.append(other)
            queue.append(other)
    return o


def derated_multiplier(sigma: float, confidence: float) -> float:
    """Risk-averse renewable capacity multiplier, clamped at zero.

    ``1 + sigma * quantile(1 - confidence)``; the quantile is negative for
    confidence above one half, so the multiplier shrinks the forecast.  A
    negative result means the unit is fully curtailed at this confidence.
    """
    if not 0.5 < confidence < 1.0:
        raise UnformulatableError("confidence must lie in (0.5, 1)")
    return max(0.0, 1.0 + sigma * normal_quantile(1.0 - confidence))


def gate_threshold_pu(case: FeederCase, gear: Switchgear) -> float:
    """Restored-load level below which energizing the lateral is unsafe."""
    c_eq = equivalent_capacitance(gear, case)
    if c_eq <= 0.0:
        return 0.0
    return q_gate_load_threshold(c_eq, gear.q_max, gear.zip_z, case.config.nominal_voltage_sq)


def lateral_demand_pu(case: FeederCase, gear: Switchgear, t: int) -> float:
    return float(sum(case.node(n).load_p[t].sum() for n in gear.downstream_nodes))


def bypass_eligible(case: FeederCase, gear: Switchgear) -> bool:
    """Crew-assisted gate bypass is offered only when natural damping is slow.

    Eligible when the first period with enough downstream demand lies beyond
    the configured delay limit (or never arrives).
    """
    thr = gate_threshold_pu(case, gear)
    if thr <= 0.0:
        return False
    delay_periods = case.config.q_gate_delay_limit_h / case.period_hours
    for t in range(case.horizon):
        if lateral_demand_pu(case, gear, t) >= thr:
            return t > delay_periods
    return True


# ---------------------------------------------------------------------------


_GAMMA_BAR = np.outer(
    np.array([1.0, np.exp(-2j * np.pi / 3.0), np.exp(2j * np.pi / 3.0)]),
    np.conj(np.array([1.0, np.exp(-2j * np.pi / 3.0), np.exp(2j * np.pi / 3.0)])),
)


def hat_matrices(z: np.ndarray, quadratic_term: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Voltage-drop coefficient matrices for a (possibly reordered) impedance.

    ``r_hat``/``x_hat`` come from the balanced-rotation weighting of the
    conjugate impedance; the quadratic current term reduces to the classic
    -(r^2+x^2) form on the diagonal.
    """
    w = _GAMMA_BAR * np.conj(z)
    r_hat = w.real.copy()
    x_hat = -w.imag.copy()
    z_hat = -(np.abs(z) ** 2) if quadratic_term else np.zeros((3, 3))
    return r_hat, x_hat, z_hat


@dataclass
class _LineCoeffs:
    r: np.ndarray
    x: np.ndarray
    r_hat: np.ndarray
    x_hat: np.ndarray
    z_hat: np.ndarray


def line_variants(case: FeederCase, line_idx: int) -> list[_LineCoeffs]:
    """The six phase-reordered coefficient sets for one lateral line."""
    z = case.lines[line_idx].z
    out = []
    for perm in PERMUTATIONS:
        zv = perm @ z @ perm.T
        r_hat, x_hat, z_hat = hat_matrices(zv, case.config.voltage_drop_quadratic_term)
        out.append(_LineCoeffs(r=zv.real, x=zv.imag, r_hat=r_hat, x_hat=x_hat, z_hat=z_hat))
    return out


class _Ctx:
    """Shared build state threaded through the family encoders."""

    def __init__(self, case: FeederCase, opts: BuildOptions) -> None:
        self.case = case
        self.opts = opts
        self.cat = VariableCatalog()
        self.b = ModelBuilder(self.cat)
        self.T = case.horizon
        self.dt = case.period_hours
        self.ess = case.ess_units
        self.K = len(self.ess)
        self.res = case.res_units
        self.orient = [orient_from(case, e.node) for e in self.ess]
        self.lateral_gear_of_line: dict[int, Switchgear] = {}
        self.lateral_gear_of_node: dict[str, Switchgear] = {}
        for g in case.switchgears:
            for li in g.downstream_lines:
                self.lateral_gear_of_line[li] = g
            for n in g.downstream_nodes:
                self.lateral_gear_of_node[n] = g
        self.coupling_of_line = {g.line_index: g for g in case.switchgears}
        self.m_dv = bigm.big_m("inrush-pin", case)
        self.m_flow = bigm.big_m("slack-power", case)
        self.m_volt = bigm.big_m("slack-voltage", case)
        self.m_fict = bigm.big_m("flow-gate", case)
        self.variants: dict[int, list[_LineCoeffs]] = {
            li: line_variants(case, li) for li in self.lateral_gear_of_line
        }
        self.gate_thr = {g.id: gate_threshold_pu(case, g) for g in case.switchgears}
        self.c_eq = {g.id: equivalent_capacitance(g, case) for g in case.switchgears}

    def node_phases(self, node_id: str) -> tuple[int, ...]:
        if node_id in self.lateral_gear_of_node:
            return (0, 1, 2)
        return self.case.node(node_id).phases

    def line_phases(self, line_idx: int) -> tuple[int, ...]:
        if line_idx in self.lateral_gear_of_line or line_idx in self.coupling_of_line:
            return (0, 1, 2)
        return self.case.lines[line_idx].phases

    def amp_sq(self, line_idx: int, ph: int) -> float:
        line = self.case.lines[line_idx]
        if line_idx in self.lateral_gear_of_line or line_idx in self.coupling_of_line:
            return float(np.max(line.ampacity_pu)) ** 2
        return float(line.ampacity_pu[ph]) ** 2


def _add_columns(ctx: _Ctx) -> None:
    case, cat, T, K = ctx.case, ctx.cat, ctx.T, ctx.K
    gears = case.switchgears

    cat.add_group("u", [(n.id, k) for n in case.nodes for k in range(K)], binary=True)
    for k, e in enumerate(ctx.ess):
        cat.fix(cat.col("u", (e.node, k)), 1.0)

    cat.add_group("gamma", [l.index for l in case.lines], binary=True)
    cat.add_group("Gamma", [l.index for l in case.lines], binary=True)
    for l in case.lines:
        if not l.is_switch:
            cat.fix(cat.col("gamma", l.index), 1.0)
            cat.fix(cat.col("Gamma", l.index), 1.0)
    cat.add_group(
        "fict_flow", [l.index for l in case.lines], lb=-ctx.m_fict, ub=ctx.m_fict
    )

    gt = [(g.id, t) for g in gears for t in range(T)]
    cat.add_group("beta", gt, binary=True)
    cat.add_group("alpha", gt, binary=True)
    gtpp = [(g.id, t, ph, ps) for g in gears for t in range(T) for ph in range(3) for ps in range(3)]
    cat.add_group("swap", gtpp, binary=True)
    if ctx.opts.no_swap:
        for g in gears:
            for t in range(T):
                for ph in range(3):
                    for ps in range(3):
                        if ph != ps:
                            cat.fix(cat.col("swap", (g.id, t, ph, ps)), 0.0)
    cat.add_group("swap_delta", gtpp, lb=-1.0, ub=1.0)
    cat.add_group("swap_event", gtpp, binary=True)
    gtp = [(g.id, t, ph) for g in gears for t in range(T) for ph in range(3)]
    cat.add_group("swap_any", gtp, binary=True)
    cat.add_group("reorder_sel", [(g.id, t, v) for g in gears for t in range(T) for v in range(6)], binary=True)
    cat.add_group("gate_bypass", [g.id for g in gears], binary=True)
    for g in gears:
        if not (ctx.opts.ferro_gate and bypass_eligible(case, g)):
            cat.fix(cat.col("gate_bypass", g.id), 0.0)

    w = case.config.angle_window_rad
    cat.add_group("angle_diff", gtp, lb=-w, ub=w)
    cat.add_group("volt_diff", gtp, lb=-ctx.m_dv, ub=ctx.m_dv)
    cat.add_group("inrush_mag", gtp, lb=0.0, ub=ctx.m_dv)
    cat.add_group("inrush_ang", gtp, lb=0.0, ub=w)
    inr_ub = []
    from ugrestore.physics import inrush_coefficient_pu

    ctx.inr_coef = {
        g.id: inrush_coefficient_pu(
            ctx.c_eq[g.id], case.config.inrush_rise_time_s, case.config.base_kv, case.config.base_mva
        )
        for g in gears
    }
    for g in gears:
        for t in range(T):
            for ph in range(3):
                inr_ub.append(ctx.inr_coef[g.id] * ctx.m_dv)
    cat.add_group("inrush", gtp, lb=[-v for v in inr_ub], ub=inr_ub)

    kt = [(k, t) for k in range(K) for t in range(T)]
    ktp = [(k, t, ph) for k in range(K) for t in range(T) for ph in range(3)]
    cat.add_group("ess_ch_on", kt, binary=True)
    cat.add_group("ess_dis_on", kt, binary=True)
    cat.add_group(
        "ess_ch",
        ktp,
        lb=0.0,
        ub=[ctx.ess[k].charge_max_pu[ph] for k, t, ph in ktp],
    )
    cat.add_group(
        "ess_dis",
        ktp,
        lb=0.0,
        ub=[ctx.ess[k].discharge_max_pu[ph] for k, t, ph in ktp],
    )
    cat.add_group(
        "ess_q",
        ktp,
        lb=[-ctx.ess[k].reactive_max_pu[ph] for k, t, ph in ktp],
        ub=[ctx.ess[k].reactive_max_pu[ph] for k, t, ph in ktp],
    )
    cat.add_group(
        "ess_soc",
        kt,
        lb=[ctx.ess[k].soc_min * case.ess_energy_pu_h(ctx.ess[k]) for k, t in kt],
        ub=[ctx.ess[k].soc_max * case.ess_energy_pu_h(ctx.ess[k]) for k, t in kt],
    )

    rtp = [(r, t, ph) for r in range(len(ctx.res)) for t in range(T) for ph in range(3)]
    ctx.res_bound = {}
    for r, unit in enumerate(ctx.res):
        mult = derated_multiplier(unit.sigma, unit.confidence)
        for t in range(T):
            for ph in range(3):
                ctx.res_bound[(r, t, ph)] = float(unit.forecast_pu[t, ph]) * mult
    cat.add_group("res_p", rtp, lb=0.0, ub=[ctx.res_bound[key] for key in rtp])
    cat.add_group(
        "res_q",
        rtp,
        lb=[-ctx.res[r].reactive_max_pu[ph] for r, t, ph in rtp],
        ub=[ctx.res[r].reactive_max_pu[ph] for r, t, ph in rtp],
    )

    ntp = [(n.id, t, ph) for n in case.nodes for t in range(T) for ph in range(3)]
    p_ub, q_lb, q_ub = [], [], []
    for nid, t, ph in ntp:
        node = case.node(nid)
        if nid in ctx.lateral_gear_of_node:
            p_ub.append(float(np.max(node.load_p[t])))
            q_ub.append(float(np.max(np.abs(node.load_q[t]))))
            q_lb.append(-q_ub[-1])
        else:
            p_ub.append(float(node.load_p[t, ph]))
            q_ub.append(float(max(node.load_q[t, ph], 0.0)))
            q_lb.append(float(min(node.load_q[t, ph], 0.0)))
    cat.add_group("load_p", ntp, lb=0.0, ub=p_ub)
    cat.add_group("load_q", ntp, lb=q_lb, ub=q_ub)

    lktp = [
        (l.index, k, t, ph)
        for l in case.lines
        for k in range(K)
        for t in range(T)
        for ph in range(3)
    ]
    ctx.lktp = lktp
    cat.add_group("flow_p", lktp, lb=-ctx.m_flow, ub=ctx.m_flow)
    cat.add_group("flow_q", lktp, lb=-ctx.m_flow, ub=ctx.m_flow)
    cat.add_group(
        "curr_sq", lktp, lb=0.0, ub=[ctx.amp_sq(l, ph) for l, k, t, ph in lktp]
    )
    nktp = [
        (n.id, k, t, ph) for n in case.nodes for k in range(K) for t in range(T) for ph in range(3)
    ]
    cat.add_group("volt_sq", nktp, lb=0.0, ub=case.config.v_max_sq)
    cat.add_group("slack_p", lktp, lb=-ctx.m_flow, ub=ctx.m_flow)
    cat.add_group("slack_q", lktp, lb=-ctx.m_flow, ub=ctx.m_flow)
    cat.add_group("slack_v", lktp, lb=-ctx.m_volt, ub=ctx.m_volt)

    if ctx.opts.fixed_reorder is None:
        ylat = [
            (l, k, t, ph)
            for l in sorted(ctx.lateral_gear_of_line)
            for k in range(K)
            for t in range(T)
            for ph in range(3)
        ]
        # Loss products inherit the coefficient signs: with non-negative
        # resistance entries the active product cannot go negative, which
        # keeps the relaxation from minting power through the loss term.
        plb, pub, qlb, qub, vb = [], [], [], [], []
        for l, k, t, ph in ylat:
            amp_sq = ctx.amp_sq(l, 0)
            var = ctx.variants[l]
            stack_r = np.stack([c.r for c in var])
            stack_x = np.stack([c.x for c in var])
            plb.append(3.0 * min(0.0, float(np.min(stack_r))) * amp_sq)
            pub.append(3.0 * max(0.0, float(np.max(stack_r))) * amp_sq)
            qlb.append(3.0 * min(0.0, float(np.min(stack_x))) * amp_sq)
            qub.append(3.0 * max(0.0, float(np.max(stack_x))) * amp_sq)
            vb.append(
                6.0 * float(np.max(np.abs(stack_r))) * ctx.m_flow
                + 6.0 * float(np.max(np.abs(stack_x))) * ctx.m_flow
                + 3.0 * float(np.max(np.abs(np.stack([c.z_hat for c in var])))) * amp_sq
            )
        cat.add_group("y_p", ylat, lb=plb, ub=pub)
        cat.add_group("y_q", ylat, lb=qlb, ub=qub)
        cat.add_group("y_v", ylat, lb=[-v for v in vb], ub=vb)

    # Phase masks: fix columns for conductors that do not exist.
    for n in case.nodes:
        live = ctx.node_phases(n.id)
        for ph in range(3):
            if ph not in live:
                for k in range(K):
                    for t in range(T):
                        cat.fix(cat.col("volt_sq", (n.id, k, t, ph)), 0.0)
    for l in case.lines:
        live = ctx.line_phases(l.index)
        for ph in range(3):
            if ph not in live:
                for k in range(K):
                    for t in range(T):
                        cat.fix(cat.col("flow_p", (l.index, k, t, ph)), 0.0)
                        cat.fix(cat.col("flow_q", (l.index, k, t, ph)), 0.0)
                        cat.fix(cat.col("curr_sq", (l.index, k, t, ph)), 0.0)

    cat.register_derived("q_factor", "per-switchgear Q from the damping chain, reported per plan")
    cat.register_derived("damping_resistance", "ZIP damping resistance, reported per plan")


# -- topology ----------------------------------------------------------------


def _encode_topology(ctx: _Ctx) -> None:
    case, cat, b = ctx.case, ctx.cat, ctx.b
    K = ctx.K
    for k, e in enumerate(ctx.ess):
        b.add("coverage-root", (e.node, k), [(cat.col("u", (e.node, k)), 1.0)], SENSE_EQ, 1.0)
    for k in range(K):
        o = ctx.orient[k]
        for nid in o.order:
            if nid == o.root:
                continue
            b.add(
                "coverage-parent",
                (nid, k),
                [
                    (cat.col("u", (nid, k)), 1.0),
                    (cat.col("u", (o.parent_node[nid], k)), -1.0),
                ],
                SENSE_LE,
                0.0,
            )
    for n in case.nodes:
        b.add(
            "coverage-unique",
            (n.id,),
            [(cat.col("u", (n.id, k)), 1.0) for k in range(K)],
            SENSE_LE,
            1.0,
        )
    for l in case.lines:
        for k in range(K):
            ui = cat.col("u", (l.from_node, k))
            uj = cat.col("u", (l.to_node, k))
            if l.is_switch:
                gcol = cat.col("gamma", l.index)
                b.add("switch-split", (l.index, k), [(ui, 1.0), (uj, 1.0), (gcol, -1.0)], SENSE_LE, 1.0)
                b.add("switch-join", (l.index, k), [(ui, 1.0), (uj, -1.0), (gcol, 1.0)], SENSE_LE, 1.0)
                b.add("switch-join", (l.index, k), [(ui, -1.0), (uj, 1.0), (gcol, 1.0)], SENSE_LE, 1.0)
            else:
                b.add("wire-consistent", (l.index, k), [(ui, 1.0), (uj, -1.0)], SENSE_EQ, 0.0)
    encode_radiality(ctx)


def encode_radiality(ctx: _Ctx) -> None:
    """Spanning-forest rows: counts plus a single-commodity feasibility check.

    The fictitious twin of each switch carries the commodity; the two count
    rows together with the real-implies-fictitious link force the twin to
    coincide with the real switch states, so commodity feasibility certifies
    that every node is connected to exactly one source through closed lines.
    """
    case, cat, b = ctx.case, ctx.cat, ctx.b
    n_nodes, n_roots = len(case.nodes), ctx.K
    b.add(
        "tree-count",
        (),
        [(cat.col("gamma", l.index), 1.0) for l in case.lines],
        SENSE_EQ,
        float(n_nodes - n_roots),
    )
    b.add(
        "fict-count",
        (),
        [(cat.col("Gamma", l.index), 1.0) for l in case.lines],
        SENSE_EQ,
        float(n_nodes - n_roots),
    )
    roots = {e.node for e in ctx.ess}
    for n in case.nodes:
        terms = []
        for l in case.lines_at(n.id):
            sign = 1.0 if l.to_node == n.id else -1.0
            terms.append((cat.col("fict_flow", l.index), sign))
        if n.id in roots:
            # a source wired to a neighbor always feeds it; a source whose
            # every connection is switchable may legitimately stand alone,
            # so the ship-at-least-one-unit row is emitted only where it
            # cannot wrongly forbid that
            if any(not l.is_switch for l in case.lines_at(n.id)):
                b.add("flow-root", (n.id,), [(c, -s) for c, s in terms], SENSE_GE, 1.0)
        else:
            b.add("flow-demand", (n.id,), terms, SENSE_EQ, 1.0)
    for l in case.switch_lines:
        fcol = cat.col("fict_flow", l.index)
        gcol = cat.col("Gamma", l.index)
        b.add("flow-gate", (l.index,), [(fcol, 1.0), (gcol, -ctx.m_fict)], SENSE_LE, 0.0)
        b.add("flow-gate", (l.index,), [(fcol, -1.0), (gcol, -ctx.m_fict)], SENSE_LE, 0.0)
        b.add(
            "real-fict-link",
            (l.index,),
            [(cat.col("gamma", l.index), 1.0), (gcol, -1.0)],
            SENSE_LE,
            0.0,
        )


# -- switchgear scheduling ---------------------------------------------------


def encode_swap_structure(ctx: _Ctx, g: Switchgear, t: int) -> None:
    cat, b = ctx.cat, ctx.b
    for ps in range(3):
        b.add(
            "swap-col-once",
            (g.id, t, ps),
            [(cat.col("swap", (g.id, t, ph, ps)), 1.0) for ph in range(3)],
            SENSE_LE,
            1.0,
        )
    for ph in range(3):
        b.add(
            "swap-row-once",
            (g.id, t, ph),
            [(cat.col("swap", (g.id, t, ph, ps)), 1.0) for ps in range(3)],
            SENSE_LE,
            1.0,
        )
    terms = [(cat.col("swap", (g.id, t, ph, ps)), 1.0) for ph in range(3) for ps in range(3)]
    terms.append((cat.col("beta", (g.id, t)), -3.0))
    b.add("swap-open-or-full", (g.id, t), terms, SENSE_EQ, 0.0)


def encode_swap_transition(ctx: _Ctx, g: Switchgear, t: int) -> None:
    """Difference, event-extraction and OR rows for one switchgear period.

    The event flag per matrix entry is pinned by two inequalities to equal
    ``max(0, delta)``, which reproduces the full connection scenario table;
    the per-feeder-phase flag then ORs the three entries.
    """
    cat, b = ctx.cat, ctx.b
    for ph in range(3):
        for ps in range(3):
            d = cat.col("swap_delta", (g.id, t, ph, ps))
            terms = [(d, 1.0), (cat.col("swap", (g.id, t, ph, ps)), -1.0)]
            if t >= 1:
                terms.append((cat.col("swap", (g.id, t - 1, ph, ps)), 1.0))
            b.add("swap-delta", (g.id, t, ph, ps), terms, SENSE_EQ, 0.0)
            xp = cat.col("swap_event", (g.id, t, ph, ps))
            b.add("swap-event-extract", (g.id, t, ph, ps), [(xp, 1.0), (d, -1.0)], SENSE_GE, 0.0)
            b.add("swap-event-extract", (g.id, t, ph, ps), [(xp, 2.0), (d, -1.0)], SENSE_LE, 1.0)
    for ph in range(3):
        x = cat.col("swap_any", (g.id, t, ph))
        evs = [(cat.col("swap_event", (g.id, t, ph, ps)), 1.0) for ps in range(3)]
        b.add("swap-event-or", (g.id, t, ph), evs + [(x, -3.0)], SENSE_LE, 0.0)
        b.add("swap-event-or", (g.id, t, ph), [(x, 1.0)] + [(c, -1.0) for c, _ in evs], SENSE_LE, 0.0)


def encode_inrush_gate(ctx: _Ctx, g: Switchgear, t: int) -> None:
    """Voltage-difference pinning, zeroing, current definition and limits.

    Besides the signed limit on the linearized step, a guard row caps the
    magnitude and angle components separately.  The linearized step is a
    near-synchronism form: without the guard, a closing can cancel a large
    magnitude offset against a large opposite angle offset, passing the
    linear limit while the physical phasor step (which adds the components
    in quadrature) far exceeds it.  Inside the form's validity domain the
    guard admits every step the plain limit admits.
    """
    case, cat, b = ctx.case, ctx.cat, ctx.b
    m = ctx.m_dv
    coef = ctx.inr_coef[g.id]
    w = case.config.angle_window_rad
    v_max = math.sqrt(case.config.v_max_sq)
    trap_min = float(np.min(g.trapped_v_sq))
    f_mag = 2.0 / (math.sqrt(case.config.v_min_sq) + math.sqrt(trap_min))
    f_mag = min(max(f_mag, 1.0), math.sqrt(2.0))
    for ph in range(3):
        dv = cat.col("volt_diff", (g.id, t, ph))
        x = cat.col("swap_any", (g.id, t, ph))
        f_terms = [(cat.col("volt_sq", (g.feeder_node, k, t, ph)), 0.5) for k in range(ctx.K)]
        f_terms += [
            (cat.col("swap", (g.id, t, ph, ps)), -0.5 * float(g.trapped_v_sq[ps]))
            for ps in range(3)
        ]
        f_terms.append((cat.col("angle_diff", (g.id, t, ph)), 1.0))
        # dv - F <= M (1 - x)  and  F - dv <= M (1 - x)
        b.add(
            "inrush-pin",
            (g.id, t, ph),
            [(dv, 1.0)] + [(c, -v) for c, v in f_terms] + [(x, m)],
            SENSE_LE,
            m,
        )
        b.add(
            "inrush-pin",
            (g.id, t, ph),
            [(dv, -1.0)] + list(f_terms) + [(x, m)],
            SENSE_LE,
            m,
        )
        b.add("inrush-zero", (g.id, t, ph), [(dv, 1.0), (x, -m)], SENSE_LE, 0.0)
        b.add("inrush-zero", (g.id, t, ph), [(dv, -1.0), (x, -m)], SENSE_LE, 0.0)
        inr = cat.col("inrush", (g.id, t, ph))
        b.add("inrush-def", (g.id, t, ph), [(inr, 1.0), (dv, -coef)], SENSE_EQ, 0.0)
        b.add("inrush-limit", (g.id, t, ph), [(inr, 1.0)], SENSE_LE, g.inrush_limit_pu)
        b.add("inrush-limit", (g.id, t, ph), [(inr, -1.0)], SENSE_LE, g.inrush_limit_pu)
        s_mag = cat.col("inrush_mag", (g.id, t, ph))
        s_ang = cat.col("inrush_ang", (g.id, t, ph))
        mag_terms = [(cat.col("volt_sq", (g.feeder_node, k, t, ph)), 0.5) for k in range(ctx.K)]
        mag_terms += [
            (cat.col("swap", (g.id, t, ph, ps)), -0.5 * float(g.trapped_v_sq[ps]))
            for ps in range(3)
        ]
        # s_mag >= +/- magnitude component, s_ang >= +/- angle, when closing
        b.add(
            "inrush-guard",
            (g.id, t, ph),
            [(s_mag, 1.0)] + [(c, -v) for c, v in mag_terms] + [(x, -m)],
            SENSE_GE,
            -m,
        )
        b.add(
            "inrush-guard",
            (g.id, t, ph),
            [(s_mag, 1.0)] + list(mag_terms) + [(x, -m)],
            SENSE_GE,
            -m,
        )
        theta = cat.col("angle_diff", (g.id, t, ph))
        b.add("inrush-guard", (g.id, t, ph), [(s_ang, 1.0), (theta, -1.0), (x, -w)], SENSE_GE, -w)
        b.add("inrush-guard", (g.id, t, ph), [(s_ang, 1.0), (theta, 1.0), (x, -w)], SENSE_GE, -w)
        if coef > 0.0:
            b.add(
                "inrush-guard",
                (g.id, t, ph),
                [(s_mag, coef * f_mag), (s_ang, coef * v_max)],
                SENSE_LE,
                math.sqrt(2.0) * g.inrush_limit_pu,
            )
        if case.config.delta_v_max_pu is not None:
            cap = case.config.delta_v_max_pu
            b.add("voltdiff-cap", (g.id, t, ph), [(dv, 1.0)], SENSE_LE, cap)
            b.add("voltdiff-cap", (g.id, t, ph), [(dv, -1.0)], SENSE_LE, cap)


def encode_q_gate(ctx: _Ctx, g: Switchgear, t: int) -> None:
    """Damping gate as a linear lower bound on restored downstream load.

    The Q-factor chain (damping resistance from the constant-impedance load
    share, resonance-matched inductance) inverts algebraically into a
    threshold on total restored lateral demand; the energize flag is only
    admissible above it, unless a crew bypass is spent.
    """
    cat, b = ctx.cat, ctx.b
    thr = ctx.gate_thr[g.id]
    if ctx.opts.ferro_gate and thr > 0.0:
        terms = [
            (cat.col("load_p", (nid, t, ph)), 1.0)
            for nid in g.downstream_nodes
            for ph in range(3)
        ]
        terms.append((cat.col("alpha", (g.id, t)), -thr))
        terms.append((cat.col("gate_bypass", g.id), thr))
        b.add("ferro-gate", (g.id, t), terms, SENSE_GE, 0.0)
    terms = [(cat.col("alpha", (g.id, t)), 1.0), (cat.col("beta", (g.id, t)), -1.0)]
    if t >= 1:
        terms.append((cat.col("beta", (g.id, t - 1)), 1.0))
    b.add("ferro-sequence", (g.id, t), terms, SENSE_GE, 0.0)


def encode_linearized_products(ctx: _Ctx, g: Switchgear, t: int) -> None:
    """Selector and bracket rows tying reordered products to the swap choice."""
    cat, b = ctx.cat, ctx.b
    for v in range(6):
        zcol = cat.col("reorder_sel", (g.id, t, v))
        perm = PERMUTATIONS[v]
        for ph in range(3):
            for ps in range(3):
                if perm[ph, ps] == 0.0:
                    b.add(
                        "reorder-select",
                        (g.id, t, v, ph, ps),
                        [(zcol, 1.0), (cat.col("swap", (g.id, t, ph, ps)), -1.0)],
                        SENSE_GE,
                        0.0,
                    )
    b.add(
        "reorder-pick-one",
        (g.id, t),
        [(cat.col("reorder_sel", (g.id, t, v)), 1.0) for v in range(6)],
        SENSE_LE,
        5.0,
    )
    for li in g.downstream_lines:
        variants = ctx.variants[li]
        amp_sq = ctx.amp_sq(li, 0)
        stack_r = np.stack([c.r for c in variants])
        stack_x = np.stack([c.x for c in variants])
        m_p = bigm.reorder_power_bracket(stack_r, amp_sq)
        m_q = bigm.reorder_power_bracket(stack_x, amp_sq)
        m_v = bigm.reorder_voltage_bracket(
            np.stack([c.r_hat for c in variants]),
            np.stack([c.x_hat for c in variants]),
            np.stack([c.z_hat for c in variants]),
            amp_sq,
            ctx.m_flow,
        )
        for k in range(ctx.K):
            for ph in range(3):
                yp = cat.col("y_p", (li, k, t, ph))
                yq = cat.col("y_q", (li, k, t, ph))
                yv = cat.col("y_v", (li, k, t, ph))
                curr = [cat.col("curr_sq", (li, k, t, ps)) for ps in range(3)]
                fp = [cat.col("flow_p", (li, k, t, ps)) for ps in range(3)]
                fq = [cat.col("flow_q", (li, k, t, ps)) for ps in range(3)]
                for v, c in enumerate(variants):
                    zcol = cat.col("reorder_sel", (g.id, t, v))
                    prod_r = [(curr[ps], c.r[ph, ps]) for ps in range(3)]
                    b.add(
                        "reorder-bracket-p",
                        (li, k, t, ph, v),
                        [(yp, 1.0)] + [(cc, -vv) for cc, vv in prod_r] + [(zcol, -m_p)],
                        SENSE_LE,
                        0.0,
                    )
                    b.add(
                        "reorder-bracket-p",
                        (li, k, t, ph, v),
                        [(yp, 1.0)] + [(cc, -vv) for cc, vv in prod_r] + [(zcol, m_p)],
                        SENSE_GE,
                        0.0,
                    )
                    prod_x = [(curr[ps], c.x[ph, ps]) for ps in range(3)]
                    b.add(
                        "reorder-bracket-q",
                        (li, k, t, ph, v),
                        [(yq, 1.0)] + [(cc, -vv) for cc, vv in prod_x] + [(zcol, -m_q)],
                        SENSE_LE,
                        0.0,
                    )
                    b.add(
                        "reorder-bracket-q",
                        (li, k, t, ph, v),
                        [(yq, 1.0)] + [(cc, -vv) for cc, vv in prod_x] + [(zcol, m_q)],
                        SENSE_GE,
                        0.0,
                    )
                    drop = (
                        [(fp[ps], 2.0 * c.r_hat[ph, ps]) for ps in range(3)]
                        + [(fq[ps], 2.0 * c.x_hat[ph, ps]) for ps in range(3)]
                        + [(curr[ps], c.z_hat[ph, ps]) for ps in range(3)]
                    )
                    b.add(
                        "reorder-bracket-v",
                        (li, k, t, ph, v),
                        [(yv, 1.0)] + [(cc, -vv) for cc, vv in drop] + [(zcol, -m_v)],
                        SENSE_LE,
                        0.0,
                    )
                    b.add(
                        "reorder-bracket-v",
                        (li, k, t, ph, v),
                        [(yv, 1.0)] + [(cc, -vv) for cc, vv in drop] + [(zcol, m_v)],
                        SENSE_GE,
                        0.0,
                    )


def _encode_gear_gates(ctx: _Ctx, g: Switchgear, t: int) -> None:
    case, cat, b = ctx.case, ctx.cat, ctx.b
    beta = cat.col("beta", (g.id, t))
    b.add(
        "gear-in-topology",
        (g.id, t),
        [(beta, 1.0), (cat.col("gamma", g.line_index), -1.0)],
        SENSE_LE,
        0.0,
    )
    b.add(
        "gear-energize-cover",
        (g.id, t),
        [(beta, 1.0)] + [(cat.col("u", (g.lateral_node, k)), -1.0) for k in range(ctx.K)],
        SENSE_LE,
        0.0,
    )
    for k in range(ctx.K):
        for ph in range(3):
            fp = cat.col("flow_p", (g.line_index, k, t, ph))
            fq = cat.col("flow_q", (g.line_index, k, t, ph))
            b.add("gear-flow-gate", (g.line_index, k, t, ph), [(fp, 1.0), (beta, -ctx.m_flow)], SENSE_LE, 0.0)
            b.add("gear-flow-gate", (g.line_index, k, t, ph), [(fp, -1.0), (beta, -ctx.m_flow)], SENSE_LE, 0.0)
            b.add("gear-flow-gate", (g.line_index, k, t, ph), [(fq, 1.0), (beta, -ctx.m_flow)], SENSE_LE, 0.0)
            b.add("gear-flow-gate", (g.line_index, k, t, ph), [(fq, -1.0), (beta, -ctx.m_flow)], SENSE_LE, 0.0)
            cc = cat.col("curr_sq", (g.line_index, k, t, ph))
            b.add(
                "gear-flow-gate",
                (g.line_index, k, t, ph),
                [(cc, 1.0), (beta, -ctx.amp_sq(g.line_index, ph))],
                SENSE_LE,
                0.0,
            )
    for li in g.downstream_lines:
        for k in range(ctx.K):
            for ph in range(3):
                cc = cat.col("curr_sq", (li, k, t, ph))
                b.add(
                    "lateral-curr-gate",
                    (li, k, t, ph),
                    [(cc, 1.0), (beta, -ctx.amp_sq(li, ph))],
                    SENSE_LE,
                    0.0,
                )


# -- resources ---------------------------------------------------------------


def _encode_ess(ctx: _Ctx) -> None:
    case, cat, b = ctx.case, ctx.cat, ctx.b
    for k, e in enumerate(ctx.ess):
        cap = case.ess_energy_pu_h(e)
        for t in range(ctx.T):
            b.add(
                "ess-exclusive",
                (k, t),
                [(cat.col("ess_ch_on", (k, t)), 1.0), (cat.col("ess_dis_on", (k, t)), 1.0)],
                SENSE_LE,
                1.0,
            )
            terms = [(cat.col("ess_soc", (k, t)), 1.0)]
            for ph in range(3):
                terms.append((cat.col("ess_ch", (k, t, ph)), -e.eff_charge * ctx.dt))
                terms.append((cat.col("ess_dis", (k, t, ph)), ctx.dt / e.eff_discharge))
            rhs = 0.0
            if t == 0:
                rhs = e.soc_init * cap
            else:
                terms.append((cat.col("ess_soc", (k, t - 1)), -1.0))
            b.add("ess-energy", (k, t), terms, SENSE_EQ, rhs)
            for ph in range(3):
                b.add(
                    "ess-charge-lim",
                    (k, t, ph),
                    [
                        (cat.col("ess_ch", (k, t, ph)), 1.0),
                        (cat.col("ess_ch_on", (k, t)), -float(e.charge_max_pu[ph])),
                    ],
                    SENSE_LE,
                    0.0,
                )
                b.add(
                    "ess-discharge-lim",
                    (k, t, ph),
                    [
                        (cat.col("ess_dis", (k, t, ph)), 1.0),
                        (cat.col("ess_dis_on", (k, t)), -float(e.discharge_max_pu[ph])),
                    ],
                    SENSE_LE,
                    0.0,
                )


def encode_chance_constraint(ctx: _Ctx, r: int, t: int) -> None:
    """Derated output cap and reactive rating rows for one renewable unit."""
    cat, b = ctx.cat, ctx.b
    unit = ctx.res[r]
    for ph in range(3):
        if unit.forecast_pu[t, ph] <= 0.0 and unit.reactive_max_pu[ph] <= 0.0:
            continue
        b.add(
            "res-derate",
            (r, t, ph),
            [(cat.col("res_p", (r, t, ph)), 1.0)],
            SENSE_LE,
            ctx.res_bound[(r, t, ph)],
        )
        if unit.reactive_max_pu[ph] > 0.0:
            q = cat.col("res_q", (r, t, ph))
            b.add("res-reactive", (r, t, ph), [(q, 1.0)], SENSE_LE, float(unit.reactive_max_pu[ph]))
            b.add("res-reactive", (r, t, ph), [(q, -1.0)], SENSE_LE, float(unit.reactive_max_pu[ph]))


# -- loads --------------------------------------------------------------------


def _encode_loads(ctx: _Ctx) -> None:
    case, cat, b = ctx.case, ctx.cat, ctx.b
    for n in case.nodes:
        gear = ctx.lateral_gear_of_node.get(n.id)
        for t in range(ctx.T):
            if gear is not None:
                for ph in range(3):
                    terms = [(cat.col("load_p", (n.id, t, ph)), 1.0)]
                    terms += [
                        (cat.col("swap", (gear.id, t, ph, ps)), -float(n.load_p[t, ps]))
                        for ps in range(3)
                        if n.load_p[t, ps] != 0.0
                    ]
                    b.add("lateral-load-map-p", (n.id, t, ph), terms, SENSE_EQ, 0.0)
                    terms = [(cat.col("load_q", (n.id, t, ph)), 1.0)]
                    terms += [
                        (cat.col("swap", (gear.id, t, ph, ps)), -float(n.load_q[t, ps]))
                        for ps in range(3)
                        if n.load_q[t, ps] != 0.0
                    ]
                    b.add("lateral-load-map-q", (n.id, t, ph), terms, SENSE_EQ, 0.0)
            else:
                for ph in n.phases:
                    dp = float(n.load_p[t, ph])
                    if dp <= 0.0:
                        continue
                    terms = [(cat.col("load_p", (n.id, t, ph)), 1.0)]
                    terms += [(cat.col("u", (n.id, k)), -dp) for k in range(ctx.K)]
                    b.add("load-pickup-lim", (n.id, t, ph), terms, SENSE_LE, 0.0)
                    dq = float(n.load_q[t, ph])
                    if dq != 0.0:
                        b.add(
                            "load-pq-ratio",
                            (n.id, t, ph),
                            [
                                (cat.col("load_q", (n.id, t, ph)), dp),
                                (cat.col("load_p", (n.id, t, ph)), -dq),
                            ],
                            SENSE_EQ,
                            0.0,
                        )


# -- power flow ----------------------------------------------------------------


def _res_at_node(ctx: _Ctx) -> dict[str, list[int]]:
    at: dict[str, list[int]] = {}
    for r, unit in enumerate(ctx.res):
        at.setdefault(unit.node, []).append(r)
    return at


def _encode_power_flow(ctx: _Ctx) -> None:
    case, cat, b = ctx.case, ctx.cat, ctx.b
    res_at = _res_at_node(ctx)
    quad = case.config.voltage_drop_quadratic_term
    for k in range(ctx.K):
        o = ctx.orient[k]
        for t in range(ctx.T):
            for nid in o.order:
                live = ctx.node_phases(nid)
                for ph in live:
                    terms_p = []
                    terms_q = []
                    for li, child in o.children.get(nid, ()):  # outgoing
                        if ph in ctx.line_phases(li):
                            terms_p.append((cat.col("flow_p", (li, k, t, ph)), 1.0))
                            terms_q.append((cat.col("flow_q", (li, k, t, ph)), 1.0))
                    pline = o.parent_line.get(nid)
                    if pline is not None and ph in ctx.line_phases(pline):
                        terms_p.append((cat.col("flow_p", (pline, k, t, ph)), -1.0))
                        terms_q.append((cat.col("flow_q", (pline, k, t, ph)), -1.0))
                        if pline in ctx.lateral_gear_of_line and ctx.opts.fixed_reorder is None:
                            terms_p.append((cat.col("y_p", (pline, k, t, ph)), 1.0))
                            terms_q.append((cat.col("y_q", (pline, k, t, ph)), 1.0))
                        else:
                            coeffs = _line_rx(ctx, pline)
                            for ps in ctx.line_phases(pline):
                                if coeffs.r[ph, ps] != 0.0:
                                    terms_p.append(
                                        (cat.col("curr_sq", (pline, k, t, ps)), coeffs.r[ph, ps])
                                    )
                                if coeffs.x[ph, ps] != 0.0:
                                    terms_q.append(
                                        (cat.col("curr_sq", (pline, k, t, ps)), coeffs.x[ph, ps])
                                    )
                        terms_p.append((cat.col("slack_p", (pline, k, t, ph)), -1.0))
                        terms_q.append((cat.col("slack_q", (pline, k, t, ph)), -1.0))
                    if nid == o.root:
                        terms_p.append((cat.col("ess_dis", (k, t, ph)), -1.0))
                        terms_p.append((cat.col("ess_ch", (k, t, ph)), 1.0))
                        terms_q.append((cat.col("ess_q", (k, t, ph)), -1.0))
                    terms_p.append((cat.col("load_p", (nid, t, ph)), 1.0))
                    terms_q.append((cat.col("load_q", (nid, t, ph)), 1.0))
                    for r in res_at.get(nid, ()):  # renewable injections
                        terms_p.append((cat.col("res_p", (r, t, ph)), -1.0))
                        terms_q.append((cat.col("res_q", (r, t, ph)), -1.0))
                    b.add("balance-p", (nid, k, t, ph), terms_p, SENSE_EQ, 0.0)
                    b.add("balance-q", (nid, k, t, ph), terms_q, SENSE_EQ, 0.0)
            for li, (i, j) in o.direction.items():
                live = ctx.line_phases(li)
                lateral = li in ctx.lateral_gear_of_line and ctx.opts.fixed_reorder is None
                coeffs = None if lateral else _line_rx(ctx, li)
                for ph in live:
                    terms = [
                        (cat.col("volt_sq", (i, k, t, ph)), 1.0),
                        (cat.col("volt_sq", (j, k, t, ph)), -1.0),
                        (cat.col("slack_v", (li, k, t, ph)), -1.0),
                    ]
                    if lateral:
                        terms.append((cat.col("y_v", (li, k, t, ph)), -1.0))
                    else:
                        r_hat, x_hat, z_hat = coeffs.r_hat, coeffs.x_hat, coeffs.z_hat
                        for ps in live:
                            if r_hat[ph, ps] != 0.0:
                                terms.append((cat.col("flow_p", (li, k, t, ps)), -2.0 * r_hat[ph, ps]))
                            if x_hat[ph, ps] != 0.0:
                                terms.append((cat.col("flow_q", (li, k, t, ps)), -2.0 * x_hat[ph, ps]))
                            if quad and z_hat[ph, ps] != 0.0:
                                terms.append((cat.col("curr_sq", (li, k, t, ps)), -z_hat[ph, ps]))
                    b.add("volt-drop", (li, k, t, ph), terms, SENSE_EQ, 0.0)
                    b.add_cone(
                        "cone",
                        (li, k, t, ph),
                        cat.col("curr_sq", (li, k, t, ph)),
                        cat.col("volt_sq", (j, k, t, ph)),
                        cat.col("flow_p", (li, k, t, ph)),
                        cat.col("flow_q", (li, k, t, ph)),
                    )
                    _encode_line_limits(ctx, li, i, j, k, t, ph)


_COEFF_CACHE_KEY = "_plain_coeffs"


def _line_rx(ctx: _Ctx, li: int):
    cache = getattr(ctx, _COEFF_CACHE_KEY, None)
    if cache is None:
        cache = {}
        setattr(ctx, _COEFF_CACHE_KEY, cache)
    got = cache.get(li)
    if got is None:
        line = ctx.case.lines[li]
        if li in ctx.lateral_gear_of_line and ctx.opts.fixed_reorder is not None:
            gid = ctx.lateral_gear_of_line[li].id
            got = ctx.variants[li][ctx.opts.fixed_reorder.get(gid, 0)]
        else:
            r_hat, x_hat, z_hat = hat_matrices(line.z, ctx.case.config.voltage_drop_quadratic_term)
            got = _LineCoeffs(r=line.z.real, x=line.z.imag, r_hat=r_hat, x_hat=x_hat, z_hat=z_hat)
        cache[li] = got
    return got


def _encode_line_limits(ctx: _Ctx, li: int, i: str, j: str, k: int, t: int, ph: int) -> None:
    case, cat, b = ctx.case, ctx.cat, ctx.b
    rated_p = float(ctx.ess[k].rated_phase_pu[ph])
    rated_q = float(ctx.ess[k].reactive_max_pu[ph]) + sum(
        float(r.reactive_max_pu[ph]) for r in ctx.res
    )
    uj = cat.col("u", (j, k))
    fp = cat.col("flow_p", (li, k, t, ph))
    fq = cat.col("flow_q", (li, k, t, ph))
    b.add("ess-line-p-lim", (li, k, t, ph), [(fp, 1.0), (uj, -rated_p)], SENSE_LE, 0.0)
    b.add("ess-line-p-lim", (li, k, t, ph), [(fp, -1.0), (uj, -rated_p)], SENSE_LE, 0.0)
    b.add("ess-line-q-lim", (li, k, t, ph), [(fq, 1.0), (uj, -rated_q)], SENSE_LE, 0.0)
    b.add("ess-line-q-lim", (li, k, t, ph), [(fq, -1.0), (uj, -rated_q)], SENSE_LE, 0.0)
    cc = cat.col("curr_sq", (li, k, t, ph))
    b.add("current-lim", (li, k, t, ph), [(cc, 1.0), (uj, -ctx.amp_sq(li, ph))], SENSE_LE, 0.0)
    sp = cat.col("slack_p", (li, k, t, ph))
    sq = cat.col("slack_q", (li, k, t, ph))
    sv = cat.col("slack_v", (li, k, t, ph))
    mf, mv = ctx.m_flow, ctx.m_volt
    b.add("slack-p-lim", (li, k, t, ph), [(sp, 1.0), (uj, mf)], SENSE_LE, mf)
    b.add("slack-p-lim", (li, k, t, ph), [(sp, -1.0), (uj, mf)], SENSE_LE, mf)
    b.add("slack-q-lim", (li, k, t, ph), [(sq, 1.0), (uj, mf)], SENSE_LE, mf)
    b.add("slack-q-lim", (li, k, t, ph), [(sq, -1.0), (uj, mf)], SENSE_LE, mf)
    gear = ctx.coupling_of_line.get(li)
    if gear is not None:
        beta = cat.col("beta", (gear.id, t))
        b.add("slack-v-lim", (li, k, t, ph), [(sv, 1.0), (uj, mv), (beta, mv)], SENSE_LE, 2.0 * mv)
        b.add("slack-v-lim", (li, k, t, ph), [(sv, -1.0), (uj, mv), (beta, mv)], SENSE_LE, 2.0 * mv)
    else:
        b.add("slack-v-lim", (li, k, t, ph), [(sv, 1.0), (uj, mv)], SENSE_LE, mv)
        b.add("slack-v-lim", (li, k, t, ph), [(sv, -1.0), (uj, mv)], SENSE_LE, mv)


def _encode_voltage_ranges(ctx: _Ctx) -> None:
    case, cat, b = ctx.case, ctx.cat, ctx.b
    vmin, vmax = case.config.v_min_sq, case.config.v_max_sq
    for n in case.nodes:
        live = ctx.node_phases(n.id)
        for t in range(ctx.T):
            for ph in live:
                vs = [(cat.col("volt_sq", (n.id, k, t, ph)), 1.0) for k in range(ctx.K)]
                us_max = [(cat.col("u", (n.id, k)), -vmax) for k in range(ctx.K)]
                us_min = [(cat.col("u", (n.id, k)), -vmin) for k in range(ctx.K)]
                b.add("volt-range", (n.id, t, ph), vs + us_max, SENSE_LE, 0.0)
                b.add("volt-range", (n.id, t, ph), vs + us_min, SENSE_GE, 0.0)
                for k in range(ctx.K):
                    b.add(
                        "volt-cover",
                        (n.id, k, t, ph),
                        [
                            (cat.col("volt_sq", (n.id, k, t, ph)), 1.0),
                            (cat.col("u", (n.id, k)), -vmax),
                        ],
                        SENSE_LE,
                        0.0,
                    )


def _encode_objective(ctx: _Ctx) -> None:
    case, cat, b = ctx.case, ctx.cat, ctx.b
    dt = ctx.dt
    for n in case.nodes:
        for t in range(ctx.T):
            for ph in range(3):
                col = cat.col("load_p", (n.id, t, ph))
                b.add_obj(col, n.weight * dt)
    for k in range(ctx.K):
        o = ctx.orient[k]
        for li in o.direction:
            lateral = li in ctx.lateral_gear_of_line and ctx.opts.fixed_reorder is None
            for t in range(ctx.T):
                for ph in ctx.line_phases(li):
                    if lateral:
                        b.add_obj(cat.col("y_p", (li, k, t, ph)), -dt)
                    else:
                        colsum = float(_line_rx(ctx, li).r[:, ph].sum())
                        if colsum != 0.0:
                            b.add_obj(cat.col("curr_sq", (li, k, t, ph)), -colsum * dt)
    for g in case.switchgears:
        b.add_obj(cat.col("gate_bypass", g.id), -case.config.bypass_penalty)


def build_model(case: FeederCase, options: BuildOptions | None = None) -> LinearModel:
    """Assemble the full restoration model for a case.

    Raises :class:`UnformulatableError` when no grid-forming source exists
    or the horizon is empty.  Building is deterministic: identical cases
    yield identical row and column orderings.
    """
    opts = options or BuildOptions()
    if not case.ess_units:
        raise UnformulatableError("case has no grid-forming storage unit to anchor restoration")
    if case.horizon < 1:
        raise UnformulatableError("horizon must be at least one period")
    for g in case.switchgears:
        if len(case.node(g.feeder_node).phases) != 3:
            raise UnformulatableError(
                f"switchgear {g.id!r}: feeder-side node must be three-phase"
            )
    ctx = _Ctx(case, opts)
    _add_columns(ctx)
    _encode_topology(ctx)
    for g in case.switchgears:
        for t in range(ctx.T):
            encode_swap_structure(ctx, g, t)
            encode_swap_transition(ctx, g, t)
            encode_inrush_gate(ctx, g, t)
            encode_q_gate(ctx, g, t)
            _encode_gear_gates(ctx, g, t)
            if opts.fixed_reorder is None:
                encode_linearized_products(ctx, g, t)
    _encode_ess(ctx)
    for r in range(len(ctx.res)):
        for t in range(ctx.T):
            encode_chance_constraint(ctx, r, t)
    _encode_loads(ctx)
    _encode_power_flow(ctx)
    _encode_voltage_ranges(ctx)
    _encode_objective(ctx)
    meta = {
        "name": case.name,
        "kw_base": case.config.kw_base,
        "no_swap": opts.no_swap,
        "ferro_gate": opts.ferro_gate,
        "horizon": case.horizon,
        "period_hours": case.period_hours,
    }
    return ctx.b.build(meta)
