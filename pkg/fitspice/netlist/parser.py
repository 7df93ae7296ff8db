"""
Netlist Parser

Reads the line-oriented dialect written by the writer:

    line 1          title
    * ...           comment
    + ...           continuation of the previous card
    R|C<name> n+ n- value
    V|I<name> n+ n- DC v | SIN(off amp freq) | EXP(v0 v1 tau)
    BR<name> n+ n- R=<expr>
    BI<name> n+ n- I=<expr>
    .OPTIONS k=v ...
    .TRAN dt tstop
    .END

Keywords are case-insensitive; node and element names are kept as written.
"""

import logging
from typing import List, Tuple

from ..config import NetlistConfig
from ..errors import ParseError
from ..waveforms import parse_waveform
from .elements import (
    BehavioralCurrent,
    BehavioralResistor,
    Capacitor,
    CurrentSource,
    Netlist,
    Resistor,
    Transient,
    VoltageSource,
)
from .expression import parse_expression

logger = logging.getLogger(__name__)


def _logical_lines(text: str) -> Tuple[str, List[Tuple[int, str]]]:
    """Title plus (line number, card text) with comments dropped and continuations joined."""
    raw = text.splitlines()
    if not raw:
        raise ParseError("empty netlist", 1)
    cards: List[Tuple[int, str]] = []
    for number, line in enumerate(raw[1:], start=2):
        stripped = line.strip()
        if not stripped or stripped.startswith("*"):
            continue
        if stripped.startswith("+"):
            if not cards:
                raise ParseError("continuation line without a card", number)
            first, previous = cards[-1]
            cards[-1] = (first, f"{previous} {stripped[1:].strip()}")
            continue
        cards.append((number, stripped))
    return raw[0].strip(), cards


def _float(token: str, what: str, line: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"invalid {what} {token!r}", line) from None


def _parse_directive(netlist: Netlist, card: str, line: int):
    tokens = card.split()
    keyword = tokens[0].upper()
    if keyword == ".TRAN":
        if len(tokens) != 3:
            raise ParseError(".TRAN expects <dt> <tstop>", line)
        dt = _float(tokens[1], "time step", line)
        tstop = _float(tokens[2], "stop time", line)
        if dt <= 0 or tstop < dt:
            raise ParseError(f".TRAN needs 0 < dt <= tstop, got {dt} {tstop}", line)
        netlist.tran = Transient(dt=dt, tstop=tstop)
    elif keyword == ".OPTIONS":
        for pair in tokens[1:]:
            key, sep, value = pair.partition("=")
            if not sep or not key:
                raise ParseError(f"malformed option {pair!r}", line)
            netlist.options[key] = value
    else:
        raise ParseError(f"unknown directive {tokens[0]}", line)


def _parse_element(card: str, line: int):
    tokens = card.split(None, 3)
    if len(tokens) < 4:
        raise ParseError(f"card needs a name, two nodes and a value: {card!r}", line)
    name, n_plus, n_minus, rest = tokens
    prefix = name[0].upper()

    if prefix in ("R", "C"):
        if len(rest.split()) != 1:
            raise ParseError(f"{name}: expected a single value, got {rest!r}", line)
        value = _float(rest, "value", line)
        if prefix == "R":
            if value == 0.0:
                raise ParseError(f"{name}: zero resistance", line)
            return Resistor(name, n_plus, n_minus, value)
        return Capacitor(name, n_plus, n_minus, value)

    if prefix in ("V", "I"):
        try:
            waveform = parse_waveform(rest)
        except ValueError as e:
            raise ParseError(f"{name}: {e}", line) from None
        cls = VoltageSource if prefix == "V" else CurrentSource
        return cls(name, n_plus, n_minus, waveform)

    if prefix == "B" and len(name) > 1 and name[1].upper() in ("R", "I"):
        quantity = name[1].upper()
        key, sep, text = rest.partition("=")
        if not sep or key.strip().upper() != quantity:
            raise ParseError(f"{name}: expected {quantity}=<expression>", line)
        try:
            expression = parse_expression(text.strip())
        except ValueError as e:
            raise ParseError(f"{name}: {e}", line) from None
        cls = BehavioralResistor if quantity == "R" else BehavioralCurrent
        return cls(name, n_plus, n_minus, expression)

    raise ParseError(f"unknown card type {name!r}", line)


def parse(text: str) -> Netlist:
    """
    Parse netlist text.

    Raises:
        ParseError: unknown card, malformed value or expression, dangling node
            reference, duplicate element name, or missing .END
    """
    title, cards = _logical_lines(text)
    netlist = Netlist(title=title)
    names = {}
    behavioral = []
    ended = False

    for line, card in cards:
        if ended:
            logger.debug(f"ignoring text after .END at line {line}")
            break
        if card.startswith("."):
            if card.split()[0].upper() == ".END":
                ended = True
                continue
            _parse_directive(netlist, card, line)
            continue

        element = _parse_element(card, line)
        if element.name in names:
            raise ParseError(f"duplicate element name {element.name!r} (first on line {names[element.name]})", line)
        names[element.name] = line
        netlist.add(element)
        if isinstance(element, (BehavioralResistor, BehavioralCurrent)):
            behavioral.append((line, element))

    if not ended:
        raise ParseError("missing .END", len(text.splitlines()))

    for line, element in behavioral:
        for node in element.expression.nodes():
            if node != NetlistConfig.GROUND and node not in netlist.node_table:
                raise ParseError(f"{element.name}: expression references unknown node {node!r}", line)

    logger.debug(f"Parsed netlist {title!r}: {netlist.card_count} cards")
    return netlist


def read_netlist(path: str) -> Netlist:
    with open(path) as f:
        return parse(f.read())
