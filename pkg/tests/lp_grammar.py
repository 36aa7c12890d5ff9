"""Strict parser for the LP-file dialect the exporter emits.

Covers the CPLEX LP grammar subset: optional comment lines, a Minimize
section with one named objective expression, named constraint rows under
Subject To, a Bounds section with range/single bounds, a Binary section
listing variable names, and a final End.  Parsing is strict; anything
unexpected raises.  Used by tests to verify emitted models structurally.
"""

import re

_NAME = r"[A-Za-z!\"#$%&()/,;?@_`'{}|~][A-Za-z0-9!\"#$%&()/.,;?@_`'{}|~]*"
_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TERM_RE = re.compile(rf"([+-])?\s*({_NUM})?\s*({_NAME})")
_SENSE_RE = re.compile(rf"(<=|>=|=|<|>)\s*({_NUM})\s*$")
_BOUND_RANGE_RE = re.compile(rf"^({_NUM})\s*<=\s*({_NAME})\s*<=\s*({_NUM})$")
_BOUND_SINGLE_RE = re.compile(rf"^({_NAME})\s*(<=|>=|=)\s*({_NUM})$")
_BOUND_FREE_RE = re.compile(rf"^({_NAME})\s+free$", re.IGNORECASE)


class LpParseError(ValueError):
    pass


def _parse_expression(text):
    """Return [(coef, name), ...]; raises on anything that is not a sum of terms."""
    terms = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        match = _TERM_RE.match(text, pos)
        if not match:
            raise LpParseError(f"bad term at {text[pos:pos+30]!r}")
        sign, coef, name = match.groups()
        value = float(coef) if coef is not None else 1.0
        if sign == "-":
            value = -value
        terms.append((value, name))
        pos = match.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    if not terms:
        raise LpParseError("empty expression")
    return terms


class LpModel:
    def __init__(self):
        self.objective = []
        self.constraints = {}
        self.bounds = {}
        self.binaries = set()

    @property
    def variables(self):
        names = {name for _, name in self.objective}
        for terms, _, _ in self.constraints.values():
            names.update(name for _, name in terms)
        names.update(self.bounds)
        names.update(self.binaries)
        return names


def parse_lp(text) -> LpModel:
    model = LpModel()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("\\")]
    section = None
    idx = 0
    current = None  # (name, accumulated text) for continuation lines
    while idx < len(lines):
        raw = lines[idx].strip()
        lowered = raw.lower()
        if lowered in ("minimize", "maximize", "min", "max"):
            section = "objective"
            idx += 1
            continue
        if lowered in ("subject to", "st", "s.t.", "such that"):
            section = "constraints"
            idx += 1
            continue
        if lowered == "bounds":
            section = "bounds"
            idx += 1
            continue
        if lowered in ("binary", "binaries", "bin"):
            section = "binary"
            idx += 1
            continue
        if lowered == "end":
            section = "end"
            idx += 1
            continue

        if section == "objective":
            body = raw.split(":", 1)[1] if ":" in raw else raw
            model.objective.extend(_parse_expression(body))
        elif section == "constraints":
            if ":" not in raw:
                raise LpParseError(f"constraint without a name: {raw[:40]!r}")
            name, body = raw.split(":", 1)
            sense = _SENSE_RE.search(body)
            if not sense:
                raise LpParseError(f"constraint without sense/rhs: {raw[:40]!r}")
            expr = body[: sense.start()]
            terms = _parse_expression(expr)
            if name.strip() in model.constraints:
                raise LpParseError(f"duplicate constraint name {name.strip()!r}")
            model.constraints[name.strip()] = (
                terms,
                sense.group(1),
                float(sense.group(2)),
            )
        elif section == "bounds":
            match = _BOUND_RANGE_RE.match(raw)
            if match:
                lo, name, hi = match.groups()
                model.bounds[name] = (float(lo), float(hi))
            else:
                match = _BOUND_SINGLE_RE.match(raw)
                if match:
                    name, sense, val = match.groups()
                    model.bounds[name] = (sense, float(val))
                elif _BOUND_FREE_RE.match(raw):
                    model.bounds[_BOUND_FREE_RE.match(raw).group(1)] = "free"
                else:
                    raise LpParseError(f"bad bound line: {raw[:40]!r}")
        elif section == "binary":
            for name in raw.split():
                if not re.fullmatch(_NAME, name):
                    raise LpParseError(f"bad binary name {name!r}")
                model.binaries.add(name)
        elif section == "end":
            raise LpParseError(f"content after End: {raw[:40]!r}")
        else:
            raise LpParseError(f"content before any section: {raw[:40]!r}")
        idx += 1
    if section != "end":
        raise LpParseError("missing End line")
    return model
