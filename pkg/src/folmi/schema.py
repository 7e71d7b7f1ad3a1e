"""JSON system documents (``schema_version`` 1), parsed strictly.

A document describes either a plant ``D^a x = A x + B u(t - d(t))``, ``y = C x``
(``"structure": "plant"``, optionally with a controller) or a state-delay
system ``D^a x = A x + B x(t - d(t))`` (``"structure": "state_delay"``, with
``B`` square). ``A`` and ``B`` are intervals ``{"lower": .., "upper": ..}``.
Unknown fields anywhere are rejected, and every error names its field path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from folmi.errors import FolmiError, SchemaError
from folmi.interval import DelaySpec, FoSystem, IntervalMatrix
from folmi.stability import DelayedPair
from folmi.synthesis import Controller

SCHEMA_VERSION = 1
STRUCTURES = ("plant", "state_delay")
TOP_FIELDS = {"schema_version", "name", "description", "structure", "alpha", "A", "B", "C", "delay", "controller"}
DELAY_FORMS = {"constant": {"value"}, "sin_exp": {"a"}, "table": {"samples"}}


@dataclass(frozen=True)
class SystemDoc:
    alpha: float
    a_int: IntervalMatrix
    b_int: IntervalMatrix
    c_out: np.ndarray | None
    delay: DelaySpec
    structure: str = "plant"
    controller: Controller | None = None
    name: str = ""
    description: str = ""

    @property
    def n(self):
        return self.a_int.shape[0]

    def plant(self):
        """The :class:`FoSystem` of a plant document."""
        if self.structure != "plant":
            raise SchemaError("structure", "a state_delay document has no plant")
        if self.c_out is None:
            raise SchemaError("C", "required for a plant")
        return FoSystem(self.alpha, self.a_int, self.b_int, self.c_out, self.delay)

    def pair(self):
        """The state-delay pair ``(a, b)`` this document describes.

        A plant yields its closed loop (open loop ``u = 0`` without controller).
        """
        from folmi.synthesis import close_loop

        if self.structure == "state_delay":
            return DelayedPair(self.a_int, self.b_int)
        if self.controller is not None:
            return DelayedPair(*close_loop(self.plant(), self.controller))
        return DelayedPair(self.a_int, IntervalMatrix.certain(np.zeros((self.n, self.n))))

    def with_controller(self, k):
        return SystemDoc(
            self.alpha, self.a_int, self.b_int, self.c_out, self.delay, self.structure, k, self.name, self.description
        )

    def to_json(self):
        def iv(m):
            return {"lower": m.lower.tolist(), "upper": m.upper.tolist()}

        d = self.delay
        if d.form == "constant":
            form = {"type": "constant", "value": d.value}
        elif d.form == "sin_exp":
            form = {"type": "sin_exp", "a": d.a}
        else:
            form = {"type": "table", "samples": [list(p) for p in d.table]}
        out = {"schema_version": SCHEMA_VERSION}
        if self.name:
            out["name"] = self.name
        if self.description:
            out["description"] = self.description
        out.update(structure=self.structure, alpha=self.alpha, A=iv(self.a_int), B=iv(self.b_int))
        if self.c_out is not None:
            out["C"] = self.c_out.tolist()
        out["delay"] = {"tau": d.tau, "mu": d.mu, "form": form}
        if self.controller is not None:
            out["controller"] = self.controller.to_json()
        return out

    def dumps(self):
        return json.dumps(self.to_json(), indent=2) + "\n"


def _fail(path, msg):
    raise SchemaError(path, msg)


def _obj(x, path, allowed, required=()):
    if not isinstance(x, dict):
        _fail(path or "<root>", f"expected an object, got {type(x).__name__}")
    for k in x:
        if k not in allowed:
            _fail(f"{path}.{k}" if path else k, "unknown field")
    for k in required:
        if k not in x:
            _fail(f"{path}.{k}" if path else k, "missing required field")
    return x


def _num(x, path):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        _fail(path, f"expected a number, got {type(x).__name__}")
    if not math.isfinite(x):
        _fail(path, "must be finite")
    return float(x)


def _matrix(x, path, allow_empty=False):
    if not isinstance(x, list):
        _fail(path, "expected a list of rows")
    if not x:
        if allow_empty:
            return None
        _fail(path, "matrix is empty")
    if not all(isinstance(r, list) for r in x):
        # a bare list of numbers is a row vector
        x = [x]
    width = len(x[0])
    if width == 0:
        _fail(f"{path}[0]", "row is empty")
    rows = []
    for i, r in enumerate(x):
        if len(r) != width:
            _fail(f"{path}[{i}]", f"row has {len(r)} entries, expected {width}")
        rows.append([_num(v, f"{path}[{i}][{j}]") for j, v in enumerate(r)])
    return np.array(rows)


def _interval(x, path):
    _obj(x, path, {"lower", "upper"}, ("lower", "upper"))
    lo = _matrix(x["lower"], f"{path}.lower")
    up = _matrix(x["upper"], f"{path}.upper")
    if lo.shape != up.shape:
        _fail(path, f"lower {lo.shape} and upper {up.shape} differ in shape")
    bad = np.argwhere(lo > up)
    if bad.size:
        i, j = bad[0]
        _fail(f"{path}.upper[{i}][{j}]", f"lower {lo[i, j]:g} > upper {up[i, j]:g}")
    return IntervalMatrix(lo, up)


def _delay(x, path):
    _obj(x, path, {"tau", "mu", "form"}, ("tau", "form"))
    tau = _num(x["tau"], f"{path}.tau")
    mu = _num(x.get("mu", 0.0), f"{path}.mu")
    if tau < 0.0:
        _fail(f"{path}.tau", "must be >= 0")
    if mu >= 1.0:
        _fail(f"{path}.mu", "must be < 1")
    f = x["form"]
    fp = f"{path}.form"
    if not isinstance(f, dict) or "type" not in f:
        _fail(fp, "expected an object with a 'type'")
    kind = f["type"]
    if kind not in DELAY_FORMS:
        _fail(f"{fp}.type", f"unknown delay type {kind!r}; choose from {sorted(DELAY_FORMS)}")
    _obj(f, fp, {"type"} | DELAY_FORMS[kind])
    try:
        if kind == "constant":
            v = _num(f["value"], f"{fp}.value") if "value" in f else None
            return DelaySpec(tau, mu, "constant", value=v)
        if kind == "sin_exp":
            if "a" not in f:
                _fail(f"{fp}.a", "missing required field")
            return DelaySpec(tau, mu, "sin_exp", a=_num(f["a"], f"{fp}.a"))
        if "samples" not in f:
            _fail(f"{fp}.samples", "missing required field")
        s = _matrix(f["samples"], f"{fp}.samples")
        if s.shape[1] != 2:
            _fail(f"{fp}.samples", "expected [t, d] pairs")
        return DelaySpec(tau, mu, "table", table=tuple(map(tuple, s)))
    except SchemaError:
        raise
    except FolmiError as exc:
        _fail(fp, str(exc))


def _controller(x, path):
    _obj(x, path, {"n_c", "A_c", "B_c", "C_c", "D_c"}, ("D_c",))
    nc = x.get("n_c", 0)
    if isinstance(nc, bool) or not isinstance(nc, int) or nc < 0:
        _fail(f"{path}.n_c", "must be a non-negative integer")
    for key in ("A_c", "B_c", "C_c", "D_c"):
        if key in x:
            _matrix(x[key], f"{path}.{key}", allow_empty=(key != "D_c"))
    try:
        return Controller.from_json(x)
    except (FolmiError, ValueError) as exc:
        _fail(path, str(exc))


def parse(doc):
    """Validate a decoded JSON document into a :class:`SystemDoc`."""
    _obj(doc, "", TOP_FIELDS, ("schema_version", "alpha", "A", "B", "delay"))
    ver = doc["schema_version"]
    if ver != SCHEMA_VERSION:
        _fail("schema_version", f"unsupported version {ver!r}, expected {SCHEMA_VERSION}")
    structure = doc.get("structure", "plant")
    if structure not in STRUCTURES:
        _fail("structure", f"must be one of {STRUCTURES}")
    for key in ("name", "description"):
        if key in doc and not isinstance(doc[key], str):
            _fail(key, "expected a string")
    alpha = _num(doc["alpha"], "alpha")
    if not 0.0 < alpha < 1.0:
        _fail("alpha", "must lie in (0, 1)")
    a = _interval(doc["A"], "A")
    b = _interval(doc["B"], "B")
    n = a.shape[0]
    if a.shape != (n, n):
        _fail("A", f"must be square, got {a.shape}")
    if b.shape[0] != n:
        _fail("B", f"has {b.shape[0]} rows, A has {n}")
    c = _matrix(doc["C"], "C") if "C" in doc else None
    if c is not None and c.shape[1] != n:
        _fail("C", f"has {c.shape[1]} columns, A has {n}")
    if structure == "state_delay":
        if b.shape != (n, n):
            _fail("B", f"state_delay needs a square B of size {n}, got {b.shape}")
        if "controller" in doc:
            _fail("controller", "not allowed with structure state_delay")
    elif c is None:
        _fail("C", "missing required field for a plant")
    delay = _delay(doc["delay"], "delay")
    k = None
    if "controller" in doc:
        k = _controller(doc["controller"], "controller")
        if k.d_c.shape != (b.shape[1], c.shape[0]):
            _fail("controller.D_c", f"must be {b.shape[1]} x {c.shape[0]}, got {k.d_c.shape}")
    return SystemDoc(alpha, a, b, c, delay, structure, k, doc.get("name", ""), doc.get("description", ""))


def loads(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return parse(doc)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
