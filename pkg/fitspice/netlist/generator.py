"""
Netlist Generator

Builds the monolithic electrothermal netlist of an assembled FIT model.

Algorithm (per node i in canonical order, then the lumped branches):
1. For each real outgoing edge j = (i, k) along x, y, z:
   - electrical resistor 1/M_sigma[j] (behavioral when a touching cell has
     alpha != 0), omitted for non-conducting edges
   - electrical capacitor M_eps[j]
   - thermal resistor 1/M_lambda[j], omitted for M_lambda[j] = 0
2. Thermal capacitor M_rhoc[i] from ground to T_i
3. Behavioral loss source from ground into T_i carrying
   sum_p |V~_i|/(2|V^_p|) * V(E_a,E_b)^2 / R_p over the incident conducting edges
4. Voltage source for an electric Dirichlet node, then for a thermal one
5. One electrical and one thermal resistor per extra branch

The behavioral resistance of edge j with tail a and head b is

    R_j = 1/(c_0 + sum_g c_g/(1 + alpha_g*(V(T_a)+V(T_b))*0.5))

with the touching-cell conductances summed per distinct alpha.
"""

import logging
from typing import Dict, List, Optional

from ..config import NetlistConfig, SolverSettings
from ..errors import OpenBranch
from ..grid import StaggeredGrid
from ..materials import MaterialMatrices, MaterialModel
from ..models import BoundaryConditions
from .elements import (
    BehavioralCurrent,
    BehavioralResistor,
    Capacitor,
    Netlist,
    Resistor,
    Transient,
    VoltageSource,
    electrical_node,
    thermal_node,
)
from .expression import Expr, Number, NodeVoltage

logger = logging.getLogger(__name__)

GND = NetlistConfig.GROUND


def edge_resistance_expression(matrices: MaterialMatrices, edge: int, tail: int, head: int) -> Expr:
    """
    Resistance of an edge as an expression of its endpoint temperatures.

    Returns a Number when no touching conducting cell has a temperature
    coefficient.

    Raises:
        OpenBranch: edge does not conduct
    """
    groups = matrices.coefficient_groups(edge)
    if not groups or sum(groups.values()) <= 0.0:
        raise OpenBranch(f"edge {edge} has zero conductivity")
    if all(alpha == 0.0 for alpha in groups):
        return Number(1.0 / float(matrices.M_sigma[edge, edge]))

    tau = (NodeVoltage(thermal_node(tail)) + NodeVoltage(thermal_node(head))) * Number(0.5)
    conductance: Optional[Expr] = None
    for alpha in sorted(groups):
        c = Number(groups[alpha])
        term = c if alpha == 0.0 else c / (Number(1.0) + Number(alpha) * tau)
        conductance = term if conductance is None else conductance + term
    return Number(1.0) / conductance


def loss_expression(
    grid: StaggeredGrid, node: int, incident: List[int], resistances: Dict[int, Expr]
) -> Optional[Expr]:
    """Joule power injected into the dual cell of `node` from its incident edges."""
    total: Optional[Expr] = None
    for edge in incident:
        if edge not in resistances:
            continue
        tail, head = grid.edge_nodes(edge)
        u = NodeVoltage(electrical_node(tail), electrical_node(head))
        weight = grid.dual_volumes[node] / (2.0 * grid.shifted_volumes[edge])
        term = u * u / resistances[edge] * Number(weight)
        total = term if total is None else total + term
    return total


def incident_edges(grid: StaggeredGrid, node: int) -> List[int]:
    """Real edges touching a node: outgoing x, y, z then incoming x, y, z."""
    edges = []
    for axis in range(3):
        edge = grid.edge_index(node, axis)
        if not grid.phantom[edge]:
            edges.append(edge)
    for axis, stride in enumerate(grid.strides):
        ijk = grid.node_ijk(node)
        if ijk[axis] > 0:
            edges.append(grid.edge_index(node - stride, axis))
    return edges


def generate_netlist(
    grid: StaggeredGrid,
    materials: MaterialModel,
    matrices: MaterialMatrices,
    bcs: BoundaryConditions,
    settings: Optional[SolverSettings] = None,
    title: str = NetlistConfig.DEFAULT_TITLE,
    options: Optional[Dict[str, str]] = None,
) -> Netlist:
    """
    Generate the electrothermal netlist of a FIT model.

    Raises:
        MissingGround: no electric Dirichlet node
        ScenarioError: boundary conditions reference unknown nodes
    """
    bcs.validate(grid.n)
    materials.validate(grid.num_cells)

    netlist = Netlist(title=title)
    M_sigma = matrices.M_sigma.diagonal()
    M_eps = matrices.M_eps.diagonal()
    M_lambda = matrices.M_lambda.diagonal()
    M_rhoc = matrices.M_rhoc.diagonal()

    # Resistance expressions of all conducting edges, shared with the loss sources
    resistances: Dict[int, Expr] = {}
    for edge in grid.real_edges:
        if M_sigma[edge] > 0.0:
            tail, head = grid.edge_nodes(int(edge))
            resistances[int(edge)] = edge_resistance_expression(matrices, int(edge), tail, head)

    for node in range(grid.n):
        for axis in range(3):
            edge = grid.edge_index(node, axis)
            if grid.phantom[edge]:
                continue
            tail, head = grid.edge_nodes(edge)
            ea, eb = electrical_node(tail), electrical_node(head)
            if edge in resistances:
                R = resistances[edge]
                if isinstance(R, Number):
                    netlist.add(Resistor(NetlistConfig.EDGE_RESISTOR.format(edge + 1), ea, eb, R.value))
                else:
                    netlist.add(BehavioralResistor(NetlistConfig.EDGE_BEHAVIORAL_RESISTOR.format(edge + 1), ea, eb, R))
            if M_eps[edge] > 0.0:
                netlist.add(Capacitor(NetlistConfig.EDGE_CAPACITOR.format(edge + 1), ea, eb, float(M_eps[edge])))
            if M_lambda[edge] > 0.0:
                netlist.add(Resistor(
                    NetlistConfig.EDGE_THERMAL_RESISTOR.format(edge + 1),
                    thermal_node(tail), thermal_node(head), 1.0 / float(M_lambda[edge]),
                ))

        tn = thermal_node(node)
        if M_rhoc[node] > 0.0:
            netlist.add(Capacitor(NetlistConfig.NODE_THERMAL_CAPACITOR.format(node + 1), GND, tn, float(M_rhoc[node])))
        loss = loss_expression(grid, node, incident_edges(grid, node), resistances)
        if loss is not None:
            netlist.add(BehavioralCurrent(NetlistConfig.NODE_LOSS_SOURCE.format(node + 1), GND, tn, loss))
        if node in bcs.electric_dirichlet:
            netlist.add(VoltageSource(
                NetlistConfig.ELECTRIC_DIRICHLET.format(node + 1),
                electrical_node(node), GND, bcs.electric_dirichlet[node],
            ))
        if node in bcs.thermal_dirichlet:
            netlist.add(VoltageSource(
                NetlistConfig.THERMAL_DIRICHLET.format(node + 1),
                tn, GND, bcs.thermal_dirichlet[node],
            ))

    for k, branch in enumerate(bcs.extra_branches, start=1):
        if branch.g_el > 0.0:
            netlist.add(Resistor(
                NetlistConfig.EXTRA_ELECTRICAL.format(k),
                electrical_node(branch.node_a), electrical_node(branch.node_b), 1.0 / branch.g_el,
            ))
        if branch.g_th > 0.0:
            netlist.add(Resistor(
                NetlistConfig.EXTRA_THERMAL.format(k),
                thermal_node(branch.node_a), thermal_node(branch.node_b), 1.0 / branch.g_th,
            ))

    if settings is not None:
        netlist.tran = Transient(dt=settings.step, tstop=settings.tstop)
    if options:
        netlist.options = dict(options)

    netlist.check_names()
    logger.info(f"Generated netlist: {netlist.card_count} cards, {len(netlist.nodes())} nodes")
    return netlist
