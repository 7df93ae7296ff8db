"""
Netlist Writer

Deterministic text form of a Netlist:

    <title>
    <element cards in list order>
    .OPTIONS key=value ...      (keys sorted, only when present)
    .TRAN <dt> <tstop>          (only when present)
    .END
"""

from numbers import Real

from ..waveforms import format_number
from .elements import Netlist


def _option_value(value) -> str:
    if isinstance(value, Real) and not isinstance(value, bool):
        return format_number(value)
    return str(value)


def emit(netlist: Netlist) -> str:
    """Netlist text; identical inputs give byte-identical output."""
    lines = [netlist.title]
    lines.extend(element.to_card() for element in netlist.elements)
    if netlist.options:
        pairs = " ".join(f"{key}={_option_value(netlist.options[key])}" for key in sorted(netlist.options))
        lines.append(f".OPTIONS {pairs}")
    if netlist.tran is not None:
        lines.append(netlist.tran.to_card())
    lines.append(".END")
    return "\n".join(lines) + "\n"


def write_netlist(netlist: Netlist, path: str) -> str:
    """Write the netlist to path and return its text."""
    text = emit(netlist)
    with open(path, "w", newline="\n") as f:
        f.write(text)
    return text
