"""Specialized step / membership functions generated from the lowered tables.

The table interpreter in ``_kernels`` is general but pays for dispatch on
every step.  Here the structure of a table (op codes, offsets, dimensions,
tau layout) is unrolled into straight-line numba source, while every real
parameter is still read from the float table at run time.  Compiled code is
therefore shared by all systems with the same structure, which keeps
randomized tests from recompiling.

The generated code performs the same floating point operations in the same
order as the interpreter, so both routes produce bitwise-identical orbits.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numba import njit

from . import _kernels as K

_GLOBALS = {
    "np": np,
    "math": math,
    "wrap": K.wrap,
    "double_lattice": K.double_lattice,
    "TWO_PI": K._TWO_PI,
}


def _compile(src: str, name: str):
    ns = dict(_GLOBALS)
    exec(compile(src, f"<pltlab:{name}>", "exec"), ns)
    return njit(nogil=True)(ns[name])


def _tau_lines(kind: int, coord: int, m: int, tp: int, arr: str, var: str, ind: str) -> list[str]:
    y = f"v{coord}"
    if kind == K.TAU_STEP:
        lines = []
        for i in range(m):
            kw = "if" if i == 0 else "elif"
            lines.append(f"{ind}{kw} {y} < {arr}[{tp + 2 + i}]:")
            lines.append(f"{ind}    {var} = {arr}[{tp + 2 + m + i}]")
        if m:
            lines.append(f"{ind}else:")
            lines.append(f"{ind}    {var} = {arr}[{tp + 2 + 2 * m}]")
        else:
            lines.append(f"{ind}{var} = {arr}[{tp + 2}]")
        return lines
    lines = [f"{ind}{var} = 0.0"]
    for k in range(1, m + 1):
        lines.append(
            f"{ind}{var} += {arr}[{tp + 1 + k}] * np.cos(TWO_PI * {k} * {y})"
            f" + {arr}[{tp + 1 + m + k}] * np.sin(TWO_PI * {k} * {y})"
        )
    return lines


def _matvec_lines(off: int, dim: int, p: int, ind: str) -> list[str]:
    lines = []
    for i in range(dim):
        terms = " + ".join(f"fp[{p + i * dim + j}] * v{off + j}" for j in range(dim))
        lines.append(f"{ind}w{i} = 0.0 + {terms}")
    targets = ", ".join(f"v{off + i}" for i in range(dim))
    values = ", ".join(f"wrap(w{i})" for i in range(dim))
    lines.append(f"{ind}{targets} = {values}" if dim > 1 else f"{ind}v{off} = wrap(w0)")
    return lines


def _tau_layout(fp: np.ndarray, tp: int) -> tuple[int, int]:
    return int(fp[tp]), int(fp[tp + 1])


@lru_cache(maxsize=None)
def _step_source(structure: tuple, d: int) -> str:
    body = [f"    v{i} = s[{i}]" for i in range(d)]
    for code, off, dim, p, tkind, tp, tcoord, tm in structure:
        if code == K.ROT:
            body += [f"    v{off + i} = wrap(v{off + i} + fp[{p + i}])" for i in range(dim)]
        elif code == K.SKEW:
            body += [
                f"    a = v{off}",
                f"    v{off} = wrap(a + fp[{p}])",
                f"    v{off + 1} = wrap(v{off + 1} + a)",
            ]
        elif code == K.AUTO:
            body += _matvec_lines(off, dim, p, "    ")
        elif code == K.DOUB:
            body.append(f"    v{off} = double_lattice(v{off})")
        elif code == K.FTRANS:
            body += _tau_lines(tkind, tcoord, tm, tp, "fp", "t", "    ")
            body += [f"    v{off + i} = wrap(v{off + i} + t * fp[{p + i}])" for i in range(dim)]
        elif code == K.FPOW:
            body += _tau_lines(tkind, tcoord, tm, tp, "fp", "t", "    ")
            body.append("    n = int(np.rint(t))")
            body.append("    if n >= 0:")
            body.append("        for _ in range(n):")
            body += _matvec_lines(off, dim, p, "            ")
            body.append("    else:")
            body.append("        for _ in range(-n):")
            body += _matvec_lines(off, dim, p + dim * dim, "            ")
        else:
            raise ValueError(f"unknown op code {code}")
    body += [f"    s[{i}] = v{i}" for i in range(d)]
    return "def step(s, fp):\n" + "\n".join(body) + "\n"


def step_structure(ops: np.ndarray, fp: np.ndarray) -> tuple:
    rows = []
    for code, off, dim, p, tkind, tp in ops.tolist():
        tcoord, tm = _tau_layout(fp, tp) if code in (K.FTRANS, K.FPOW) else (0, 0)
        rows.append((code, off, dim, p, tkind, tp, tcoord, tm))
    return tuple(rows)


@lru_cache(maxsize=None)
def _step_from_structure(structure: tuple, d: int):
    return _compile(_step_source(structure, d), "step")


def step_function(ops: np.ndarray, fp: np.ndarray, d: int):
    """Compiled ``step(s, fp)`` advancing the state array ``s`` in place by one iterate."""
    return _step_from_structure(step_structure(ops, fp), d)


def _prim_lines(kind: int, off: int, dim: int, p: int, ind: str) -> list[str]:
    if kind == K.FULL:
        return []
    lines = []
    if kind == K.BALL:
        lines.append(f"{ind}acc = 0.0")
        for i in range(dim):
            lines += [
                f"{ind}d = abs(s[{off + i}] - tf[{p + i}])",
                f"{ind}if d > 0.5:",
                f"{ind}    d = 1.0 - d",
                f"{ind}acc += d * d",
            ]
        lines += [f"{ind}r = tf[{p + dim}]", f"{ind}if not acc <= r * r:", f"{ind}    return False"]
        return lines
    for i in range(dim):
        lines += [
            f"{ind}d = abs(s[{off + i}] - tf[{p + i}])",
            f"{ind}if d > 0.5:",
            f"{ind}    d = 1.0 - d",
            f"{ind}if d > tf[{p + dim + i}]:",
            f"{ind}    return False",
        ]
    return lines


@lru_cache(maxsize=None)
def _target_functions(rows: tuple, starts: tuple):
    nclauses = len(starts) - 1
    src = []
    for c in range(1, nclauses + 1):
        src.append(f"def c{c}(s, tf):")
        for q in range(starts[c - 1], starts[c]):
            _, kind, off, dim, p = rows[q]
            src += _prim_lines(kind, off, dim, p, "    ")
        src.append("    return True")
    ns = dict(_GLOBALS)
    exec(compile("\n".join(src) + "\n", "<pltlab:clauses>", "exec"), ns)
    for c in range(1, nclauses + 1):
        ns[f"c{c}"] = njit(nogil=True)(ns[f"c{c}"])
    label_src = ["def label(s, tf):"]
    label_src += [f"    if c{c}(s, tf):\n        return {c}" for c in range(1, nclauses + 1)]
    label_src.append("    return 0")
    clause_src = ["def clause(s, tf, c):"]
    clause_src += [f"    if c == {c}:\n        return c{c}(s, tf)" for c in range(1, nclauses + 1)]
    clause_src.append("    return False")
    exec(compile("\n".join(label_src) + "\n" + "\n".join(clause_src) + "\n", "<pltlab:label>", "exec"), ns)
    return njit(nogil=True)(ns["label"]), njit(nogil=True)(ns["clause"])


def target_functions(ti: np.ndarray, cs: np.ndarray):
    """Compiled ``label(s, tf) -> int`` (0 if outside) and ``clause(s, tf, c) -> bool``."""
    return _target_functions(tuple(map(tuple, ti.tolist())), tuple(cs.tolist()))


@lru_cache(maxsize=None)
def _tau_function(kind: int, coord: int, m: int):
    lines = [f"    v{coord} = s[{coord}]"] + _tau_lines(kind, coord, m, 0, "tfp", "t", "    ")
    return _compile("def tau(s, tfp):\n" + "\n".join(lines) + "\n    return t\n", "tau")


def tau_function(table: np.ndarray, kind: int):
    """Compiled ``tau(s, tfp)`` for a standalone tau table."""
    coord, m = _tau_layout(table, 0)
    return _tau_function(int(kind), coord, m)
