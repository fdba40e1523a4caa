"""Expanded multivariate polynomials with complex coefficients.

Polynomials are stored in canonical expanded form: a tuple of
``(exponents, coeff)`` pairs, sorted by graded lexicographic order
(highest total degree first, ties broken lexicographically, larger
exponent vectors first).  Exponents are dense tuples whose length equals
the number of variables of the owning system.

Coefficients are plain double precision ``complex``.  There is no
arbitrary precision fallback, so systems whose expansions produce
coefficients spanning more than ~14 orders of magnitude lose the small
ones to the cleanup threshold.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

# terms smaller than this fraction of the largest coefficient are dropped
CLEANUP_RTOL = 1e-14

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


class PolyError(ValueError):
    """Invalid polynomial operation (dimension mismatch, bad index, ...)."""


class ParseError(PolyError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


def _grevlex_key(exps: tuple[int, ...]):
    return (-sum(exps), tuple(-e for e in exps))


def _clean(terms: Mapping[tuple[int, ...], complex]) -> tuple:
    nz = {e: complex(c) for e, c in terms.items() if c != 0}
    if not nz:
        return ()
    cmax = max(abs(c) for c in nz.values())
    cut = CLEANUP_RTOL * cmax
    kept = [(e, c) for e, c in nz.items() if abs(c) >= cut]
    kept.sort(key=lambda ec: _grevlex_key(ec[0]))
    return tuple(kept)


class Polynomial:
    """Immutable expanded polynomial in ``nvars`` variables."""

    __slots__ = ("nvars", "terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[tuple[int, ...], complex] | Iterable = ()):
        if nvars < 1:
            raise PolyError("nvars must be positive")
        if not isinstance(terms, Mapping):
            acc: dict[tuple[int, ...], complex] = {}
            for e, c in terms:
                e = tuple(int(v) for v in e)
                acc[e] = acc.get(e, 0) + c
            terms = acc
        for e, c in terms.items():
            if len(e) != nvars:
                raise PolyError(f"exponent vector {e} does not have length {nvars}")
            if any(v < 0 for v in e):
                raise PolyError(f"negative exponent in {e}")
            if not (math.isfinite(complex(c).real) and math.isfinite(complex(c).imag)):
                raise PolyError("non-finite coefficient")
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "terms", _clean(terms))
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # constructors
    @classmethod
    def constant(cls, nvars: int, c: complex) -> Polynomial:
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, index: int) -> Polynomial:
        if not 0 <= index < nvars:
            raise PolyError(f"variable index {index} out of range")
        e = [0] * nvars
        e[index] = 1
        return cls(nvars, {tuple(e): 1.0})

    @classmethod
    def zero(cls, nvars: int) -> Polynomial:
        return cls(nvars, {})

    # basic properties
    @property
    def degree(self):
        """Total degree; ``-inf`` for the zero polynomial."""
        if not self.terms:
            return -math.inf
        return max(sum(e) for e, _ in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e, _ in self.terms)

    def as_dict(self) -> dict[tuple[int, ...], complex]:
        return dict(self.terms)

    def max_coeff(self) -> float:
        return max((abs(c) for _, c in self.terms), default=0.0)

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self.terms == other.terms
        if isinstance(other, (int, float, complex)):
            return self == Polynomial.constant(self.nvars, other)
        return NotImplemented

    def __hash__(self):
        h = object.__getattribute__(self, "_hash")
        if h is None:
            h = hash((self.nvars, self.terms))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self):
        names = [f"x{i + 1}" for i in range(self.nvars)]
        return f"Polynomial({self.to_string(names)!r})"

    # arithmetic
    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise PolyError(f"dimension mismatch: {self.nvars} vs {other.nvars} variables")
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return Polynomial.constant(self.nvars, complex(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc = dict(self.terms)
        for e, c in other.terms:
            acc[e] = acc.get(e, 0) + c
        return Polynomial(self.nvars, acc)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self.terms})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc: dict[tuple[int, ...], complex] = {}
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                e = tuple(a + b for a, b in zip(e1, e2))
                acc[e] = acc.get(e, 0) + c1 * c2
        return Polynomial(self.nvars, acc)

    __rmul__ = __mul__

    def scale(self, c: complex) -> Polynomial:
        return Polynomial(self.nvars, {e: c * v for e, v in self.terms})

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise PolyError(f"exponent must be a non-negative integer, got {k!r}")
        result = Polynomial.constant(self.nvars, 1.0)
        base = self
        k = int(k)
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # calculus and evaluation
    def diff(self, var_index: int) -> Polynomial:
        return differentiate(self, var_index)

    def __call__(self, point):
        return evaluate(self, point)

    def abs_eval(self, point) -> float:
        """Sum of |term| at ``point``; the natural rounding scale of evaluation."""
        z = np.abs(np.asarray(point, dtype=complex))
        return float(sum(abs(c) * np.prod(z ** np.array(e)) for e, c in self.terms))

    def substitute(self, images: Sequence[Polynomial]) -> Polynomial:
        """Compose: replace variable ``i`` by ``images[i]`` (all sharing a new nvars)."""
        if len(images) != self.nvars:
            raise PolyError("need one image per variable")
        m = images[0].nvars
        out = Polynomial.zero(m)
        powers: dict[tuple[int, int], Polynomial] = {}
        for e, c in self.terms:
            t = Polynomial.constant(m, c)
            for i, k in enumerate(e):
                if k:
                    if (i, k) not in powers:
                        powers[(i, k)] = images[i] ** k
                    t = t * powers[(i, k)]
            out = out + t
        return out

    def to_string(self, names: Sequence[str]) -> str:
        if len(names) != self.nvars:
            raise PolyError("need one name per variable")
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.terms:
            mono = "*".join(
                n if k == 1 else f"{n}^{k}" for n, k in zip(names, e) if k
            )
            if c.imag != 0:
                cs = f"({_fmt_real(c.real)}{'+' if c.imag >= 0 else '-'}{_fmt_real(abs(c.imag))}j)"
                sign = "+"
            else:
                sign = "-" if c.real < 0 else "+"
                cs = _fmt_real(abs(c.real))
            if mono and cs == "1":
                body = mono
            elif mono:
                body = f"{cs}*{mono}"
            else:
                body = cs
            parts.append((sign, body))
        first_sign, first = parts[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out


def _fmt_real(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


@dataclass(frozen=True)
class PolySystem:
    var_names: tuple[str, ...]
    polys: tuple[Polynomial, ...]

    def __post_init__(self):
        names = tuple(self.var_names)
        object.__setattr__(self, "var_names", names)
        object.__setattr__(self, "polys", tuple(self.polys))
        if len(set(names)) != len(names):
            raise PolyError(f"duplicate variable names in {names}")
        for n in names:
            if not _IDENT.match(n):
                raise PolyError(f"invalid variable name {n!r}")
        for p in self.polys:
            if p.nvars != len(names):
                raise PolyError(
                    f"polynomial has {p.nvars} variables, system declares {len(names)}"
                )

    @property
    def nvars(self) -> int:
        return len(self.var_names)

    @property
    def degrees(self) -> list[int]:
        return [p.degree for p in self.polys]

    def __len__(self):
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def __getitem__(self, i):
        return self.polys[i]

    def is_square(self) -> bool:
        return len(self.polys) == self.nvars

    def variables(self) -> list[Polynomial]:
        return [Polynomial.variable(self.nvars, i) for i in range(self.nvars)]

    def evaluate(self, point) -> np.ndarray:
        return np.array([evaluate(p, point) for p in self.polys], dtype=complex)

    def residual(self, point) -> float:
        """Max-norm of the system at ``point``."""
        if not self.polys:
            return 0.0
        return float(np.max(np.abs(self.evaluate(point))))

    def scale(self) -> float:
        return max((p.max_coeff() for p in self.polys), default=0.0)

    def concat(self, other: PolySystem) -> PolySystem:
        if other.var_names != self.var_names:
            raise PolyError("systems have different variables")
        return PolySystem(self.var_names, self.polys + other.polys)

    def to_text(self) -> str:
        lines = ["vars: " + " ".join(self.var_names)]
        lines += [p.to_string(self.var_names) for p in self.polys]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- operations


def evaluate(p: Polynomial, point) -> complex:
    z = np.asarray(point, dtype=complex).ravel()
    if z.shape[0] != p.nvars:
        raise PolyError(f"point has {z.shape[0]} coordinates, polynomial has {p.nvars} variables")
    if not p.terms:
        return 0j
    exps = np.array([e for e, _ in p.terms])
    coeffs = np.array([c for _, c in p.terms])
    return complex(np.sum(coeffs * np.prod(z[None, :] ** exps, axis=1)))


def differentiate(p: Polynomial, var_index: int) -> Polynomial:
    if not 0 <= var_index < p.nvars:
        raise PolyError(f"variable index {var_index} out of range for {p.nvars} variables")
    acc = {}
    for e, c in p.terms:
        k = e[var_index]
        if k:
            ne = list(e)
            ne[var_index] = k - 1
            acc[tuple(ne)] = c * k
    return Polynomial(p.nvars, acc)


def gradient(p: Polynomial) -> list[Polynomial]:
    return [differentiate(p, j) for j in range(p.nvars)]


def jacobian(F: PolySystem) -> list[list[Polynomial]]:
    return [gradient(f) for f in F.polys]


def bezout_number(F: PolySystem) -> int:
    if not F.is_square():
        raise PolyError(f"system is not square: {len(F.polys)} equations, {F.nvars} variables")
    D = 1
    for p in F.polys:
        if p.is_zero():
            raise PolyError("zero polynomial in system")
        D *= p.degree
    return D


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?j?)"
    r"|(?P<id>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*^()=]))"
)


def _tokenize(src: str, line: int):
    pos = 0
    toks = []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            col = pos + len(src[pos:]) - len(src[pos:].lstrip()) + 1
            raise ParseError(f"unexpected character {src[col - 1]!r}", line, col)
        kind = m.lastgroup
        start = m.start(kind) + 1
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", len(src) + 1))
    return toks


class _Parser:
    def __init__(self, src: str, names: Sequence[str], line: int):
        self.toks = _tokenize(src, line)
        self.i = 0
        self.line = line
        self.index = {n: k for k, n in enumerate(names)}
        self.n = len(names)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, self.line, tok[2])

    def equation(self) -> Polynomial:
        lhs = self.expr()
        if self.peek()[1] == "=":
            self.take()
            rhs = self.expr()
            lhs = lhs - rhs
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return lhs

    def expr(self) -> Polynomial:
        acc = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term(self) -> Polynomial:
        acc = self.unary()
        while self.peek()[1] == "*":
            self.take()
            acc = acc * self.unary()
        nxt = self.peek()
        if nxt[0] in ("num", "id") or nxt[1] == "(":
            self.error("implicit multiplication is not allowed; use '*'")
        return acc

    def unary(self) -> Polynomial:
        if self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            p = self.unary()
            return -p if op == "-" else p
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            tok = self.peek()
            if tok[1] in ("-", "+"):
                self.error("exponent must be a non-negative integer", tok)
            if tok[0] != "num" or not tok[1].isdigit():
                self.error(f"exponent must be a non-negative integer, got {tok[1]!r}", tok)
            self.take()
            base = base ** int(tok[1])
            if self.peek()[1] == "^":
                self.error("chained exponents are not supported; use parentheses")
        return base

    def atom(self) -> Polynomial:
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            v = complex(text) if text.endswith("j") else float(text)
            return Polynomial.constant(self.n, v)
        if kind == "id":
            if text not in self.index:
                self.error(f"unknown identifier {text!r}", tok)
            return Polynomial.variable(self.n, self.index[text])
        if text == "(":
            inner = self.expr()
            if self.peek()[1] != ")":
                self.error("expected ')'")
            self.take()
            return inner
        if kind == "end":
            self.error("unexpected end of expression", tok)
        self.error(f"unexpected token {text!r}", tok)


def parse_polynomial(text: str, var_names: Sequence[str], line: int = 1) -> Polynomial:
    return _Parser(text, var_names, line).equation()


def parse_system(text: str) -> PolySystem:
    """Parse a system file: a ``vars:`` header, then one expression per line."""
    names = None
    polys = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if names is None:
            head = line.strip()
            if not head.startswith("vars:"):
                raise ParseError("first line must be a 'vars:' declaration", lineno, 1)
            names = head[len("vars:"):].split()
            if not names:
                raise ParseError("no variables declared", lineno, 1)
            for nm in names:
                if not _IDENT.match(nm):
                    raise ParseError(f"invalid variable name {nm!r}", lineno, raw.find(nm) + 1)
            if len(set(names)) != len(names):
                raise ParseError("duplicate variable name", lineno, 1)
            continue
        polys.append(parse_polynomial(line, names, lineno))
    if names is None:
        raise ParseError("missing 'vars:' declaration", 1, 1)
    return PolySystem(tuple(names), tuple(polys))


def compose(op: str, a: Polynomial, b=None) -> Polynomial:
    """Apply one of add, sub, mul, pow, scale.  Thin functional wrapper over operators."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "pow":
        return a ** b
    if op == "scale":
        return a.scale(b)
    raise PolyError(f"unknown operation {op!r}")
