"""
Netlist Elements

Element cards, analysis directives and the Netlist container.
"""

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Union

from ..config import NetlistConfig
from ..errors import FitSpiceError
from ..waveforms import Waveform, format_number
from .expression import Expr, emit_expression

ELECTRICAL = "electrical"
THERMAL = "thermal"
GROUND = "ground"
EXTERNAL = "external"

_GRID_NODE = re.compile(r"^([ET])(\d{6})$")


@dataclass(frozen=True)
class NodeInfo:
    """Where a netlist node lives: its domain and, for grid nodes, the canonical index."""
    domain: str
    index: Optional[int] = None


def electrical_node(index: int) -> str:
    return NetlistConfig.ELECTRICAL_NODE.format(index + 1)


def thermal_node(index: int) -> str:
    return NetlistConfig.THERMAL_NODE.format(index + 1)


def classify_node(name: str) -> NodeInfo:
    """Infer the node-table entry of a node name."""
    if name == NetlistConfig.GROUND:
        return NodeInfo(GROUND)
    match = _GRID_NODE.match(name)
    if match:
        domain = ELECTRICAL if match.group(1) == "E" else THERMAL
        return NodeInfo(domain, int(match.group(2)) - 1)
    return NodeInfo(EXTERNAL)


@dataclass(frozen=True)
class Resistor:
    name: str
    n_plus: str
    n_minus: str
    ohms: float

    kind = "resistor"

    def to_card(self) -> str:
        return f"{self.name} {self.n_plus} {self.n_minus} {format_number(self.ohms)}"


@dataclass(frozen=True)
class Capacitor:
    name: str
    n_plus: str
    n_minus: str
    farads: float

    kind = "capacitor"

    def to_card(self) -> str:
        return f"{self.name} {self.n_plus} {self.n_minus} {format_number(self.farads)}"


@dataclass(frozen=True)
class VoltageSource:
    name: str
    n_plus: str
    n_minus: str
    waveform: Waveform

    kind = "voltage_source"

    def to_card(self) -> str:
        return f"{self.name} {self.n_plus} {self.n_minus} {self.waveform.to_card()}"


@dataclass(frozen=True)
class CurrentSource:
    """Positive values flow from n_plus through the source to n_minus."""
    name: str
    n_plus: str
    n_minus: str
    waveform: Waveform

    kind = "current_source"

    def to_card(self) -> str:
        return f"{self.name} {self.n_plus} {self.n_minus} {self.waveform.to_card()}"


@dataclass(frozen=True)
class BehavioralResistor:
    name: str
    n_plus: str
    n_minus: str
    expression: Expr  # ohms

    kind = "behavioral_resistor"

    def to_card(self) -> str:
        return f"{self.name} {self.n_plus} {self.n_minus} R={emit_expression(self.expression)}"


@dataclass(frozen=True)
class BehavioralCurrent:
    """Positive values flow from n_plus through the source to n_minus."""
    name: str
    n_plus: str
    n_minus: str
    expression: Expr  # amperes

    kind = "behavioral_current"

    def to_card(self) -> str:
        return f"{self.name} {self.n_plus} {self.n_minus} I={emit_expression(self.expression)}"


Element = Union[Resistor, Capacitor, VoltageSource, CurrentSource, BehavioralResistor, BehavioralCurrent]


@dataclass(frozen=True)
class Transient:
    dt: float
    tstop: float

    def to_card(self) -> str:
        return f".TRAN {format_number(self.dt)} {format_number(self.tstop)}"


@dataclass
class Netlist:
    """Ordered element cards plus directives and the node table."""
    title: str = NetlistConfig.DEFAULT_TITLE
    elements: List[Element] = field(default_factory=list)
    tran: Optional[Transient] = None
    options: Dict[str, str] = field(default_factory=dict)
    node_table: Dict[str, NodeInfo] = field(default_factory=dict)

    def add(self, element: Element):
        """Append an element and register its terminals in the node table."""
        self.elements.append(element)
        for node in (element.n_plus, element.n_minus):
            if node not in self.node_table:
                self.node_table[node] = classify_node(node)

    def __iter__(self) -> Iterator[Element]:
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def card_count(self) -> int:
        return len(self.elements)

    def card_counts(self) -> Dict[str, int]:
        """Element kind -> number of cards."""
        return dict(sorted(Counter(e.kind for e in self.elements).items()))

    def find(self, name: str) -> Element:
        for element in self.elements:
            if element.name == name:
                return element
        raise KeyError(name)

    def of_kind(self, *types) -> List[Element]:
        return [e for e in self.elements if isinstance(e, types)]

    def nodes(self) -> List[str]:
        """Non-ground node names in first-appearance order."""
        seen: Dict[str, None] = {}
        for element in self.elements:
            for node in (element.n_plus, element.n_minus):
                if node != NetlistConfig.GROUND:
                    seen.setdefault(node)
        return list(seen)

    def grid_nodes(self, domain: str) -> Dict[str, int]:
        """Node name -> canonical grid index for one domain."""
        return {
            name: info.index
            for name, info in self.node_table.items()
            if info.domain == domain and info.index is not None
        }

    def check_names(self):
        """
        Raises:
            FitSpiceError: two elements share a name
        """
        counts = Counter(e.name for e in self.elements)
        duplicates = [name for name, c in counts.items() if c > 1]
        if duplicates:
            raise FitSpiceError(f"duplicate element names: {', '.join(sorted(duplicates)[:5])}")
