"""
fitspice Netlist

Generation, text emission and parsing of the electrothermal netlist dialect.
"""

from .elements import (
    BehavioralCurrent,
    BehavioralResistor,
    Capacitor,
    CurrentSource,
    Netlist,
    NodeInfo,
    Resistor,
    Transient,
    VoltageSource,
    classify_node,
    electrical_node,
    thermal_node,
)
from .expression import (
    BinOp,
    CompiledExpression,
    Expr,
    Neg,
    NodeVoltage,
    Number,
    emit_expression,
    evaluate,
    parse_expression,
)
from .generator import generate_netlist
from .parser import parse, read_netlist
from .writer import emit, write_netlist

__all__ = [
    "BehavioralCurrent",
    "BehavioralResistor",
    "BinOp",
    "Capacitor",
    "CompiledExpression",
    "CurrentSource",
    "Expr",
    "Neg",
    "Netlist",
    "NodeInfo",
    "NodeVoltage",
    "Number",
    "Resistor",
    "Transient",
    "VoltageSource",
    "classify_node",
    "electrical_node",
    "emit",
    "emit_expression",
    "evaluate",
    "generate_netlist",
    "parse",
    "parse_expression",
    "read_netlist",
    "thermal_node",
    "write_netlist",
]
