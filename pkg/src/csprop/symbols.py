"""Polynomial operator algebra in ladder operators and its phase-space symbols.

Operators are kept in normal-ordered canonical form, ``sum c[m,n] ad^m a^n``.
The Q / P / Weyl / effective symbols are derived views of that single
representation: polynomials in the independent complex variables ``(v, u)``,
where along real phase space ``u = z`` and ``v = z*``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "ScaleParams",
    "OperatorPoly",
    "SymbolPoly",
    "op_multiply",
    "q_symbol",
    "p_symbol",
    "weyl_symbol",
    "effective_symbol",
    "apply_delta_exp",
    "symbol_eval",
    "symbol_derivative",
    "DEFAULT_MAX_DEGREE",
]

# Wick reduction is combinatorial in the degree; 16 is far above desk scale.
DEFAULT_MAX_DEGREE = 16

# Relative cleanup threshold for coefficients produced by Wick reduction.
_CLEANUP_REL = 1e-14


@dataclass(frozen=True)
class ScaleParams:
    """hbar, mass, frequency and the derived length/momentum scales b, c.

    b = sqrt(hbar / (mass * omega)), c = sqrt(hbar * mass * omega); b*c = hbar.
    """

    hbar: float = 1.0
    mass: float = 1.0
    omega: float = 1.0
    b: float = field(init=False)
    c: float = field(init=False)

    def __post_init__(self):
        for name in ("hbar", "mass", "omega"):
            val = getattr(self, name)
            if not (val > 0.0 and math.isfinite(val)):
                raise ValueError(f"{name} must be strictly positive, got {val!r}")
        object.__setattr__(self, "b", math.sqrt(self.hbar / (self.mass * self.omega)))
        object.__setattr__(self, "c", math.sqrt(self.hbar * self.mass * self.omega))
        assert abs(self.b * self.c - self.hbar) <= 1e-14 * self.hbar


def _canonical(terms: dict) -> dict:
    """Drop negligible coefficients relative to the largest one."""
    if not terms:
        return {}
    cmax = max(abs(c) for c in terms.values())
    if cmax == 0.0:
        return {}
    tol = _CLEANUP_REL * cmax
    return {
        (int(m), int(n)): complex(c)
        for (m, n), c in terms.items()
        if abs(c) > tol
    }


def _check_exponents(terms: dict, max_degree: int, what: str) -> None:
    for (m, n) in terms:
        if m < 0 or n < 0:
            raise ValueError(f"{what} exponents must be nonnegative, got {(m, n)}")
        if m + n > max_degree:
            raise ValueError(
                f"{what} degree {m + n} exceeds maximum {max_degree}"
            )


@dataclass(frozen=True)
class OperatorPoly:
    """Normal-ordered polynomial operator: sum over (m, n) of c * ad^m a^n."""

    terms: dict
    scales: ScaleParams = ScaleParams()
    max_degree: int = DEFAULT_MAX_DEGREE

    def __post_init__(self):
        canon = _canonical(self.terms)
        _check_exponents(canon, self.max_degree, "operator")
        object.__setattr__(self, "terms", canon)

    # -- algebra ----------------------------------------------------------

    def __add__(self, other: "OperatorPoly") -> "OperatorPoly":
        self._require_same_scales(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, 0.0) + c
        return OperatorPoly(out, self.scales, max(self.max_degree, other.max_degree))

    def __sub__(self, other: "OperatorPoly") -> "OperatorPoly":
        return self + other.scaled(-1.0)

    def scaled(self, factor: complex) -> "OperatorPoly":
        return OperatorPoly(
            {k: factor * c for k, c in self.terms.items()}, self.scales, self.max_degree
        )

    def __mul__(self, other: "OperatorPoly") -> "OperatorPoly":
        return op_multiply(self, other)

    def power(self, exponent: int) -> "OperatorPoly":
        if exponent < 0:
            raise ValueError("operator powers must be nonnegative")
        out = OperatorPoly({(0, 0): 1.0}, self.scales, self.max_degree)
        for _ in range(exponent):
            out = op_multiply(out, self)
        return out

    def dagger(self) -> "OperatorPoly":
        return OperatorPoly(
            {(n, m): c.conjugate() for (m, n), c in self.terms.items()},
            self.scales,
            self.max_degree,
        )

    # -- queries ----------------------------------------------------------

    @property
    def degree(self) -> int:
        return max((m + n for (m, n) in self.terms), default=0)

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        """Hermitian iff c[m,n] == conj(c[n,m]) for every exponent pair."""
        cmax = max((abs(c) for c in self.terms.values()), default=0.0)
        if cmax == 0.0:
            return True
        for (m, n), c in self.terms.items():
            partner = self.terms.get((n, m), 0.0)
            if abs(c - complex(partner).conjugate()) > rtol * cmax:
                return False
        return True

    def _require_same_scales(self, other: "OperatorPoly") -> None:
        if self.scales != other.scales:
            raise ValueError("operands carry different ScaleParams")

    def __str__(self) -> str:
        return _format_terms(self.terms, "ad", "a")


@dataclass(frozen=True)
class SymbolPoly:
    """Polynomial on complexified phase space: sum over (m, n) of c * v^m u^n."""

    terms: dict
    scales: ScaleParams = ScaleParams()

    def __post_init__(self):
        canon = _canonical(self.terms)
        _check_exponents(canon, 10 * DEFAULT_MAX_DEGREE, "symbol")
        object.__setattr__(self, "terms", canon)

    def __add__(self, other: "SymbolPoly") -> "SymbolPoly":
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, 0.0) + c
        return SymbolPoly(out, self.scales)

    def __sub__(self, other: "SymbolPoly") -> "SymbolPoly":
        return self + other.scaled(-1.0)

    def scaled(self, factor: complex) -> "SymbolPoly":
        return SymbolPoly({k: factor * c for k, c in self.terms.items()}, self.scales)

    def __mul__(self, other: "SymbolPoly") -> "SymbolPoly":
        out: dict = {}
        for (m1, n1), c1 in self.terms.items():
            for (m2, n2), c2 in other.terms.items():
                key = (m1 + m2, n1 + n2)
                out[key] = out.get(key, 0.0) + c1 * c2
        return SymbolPoly(out, self.scales)

    @property
    def degree(self) -> int:
        return max((m + n for (m, n) in self.terms), default=0)

    def derivative(self, wrt: str, order: int = 1) -> "SymbolPoly":
        return symbol_derivative(self, wrt, order)

    def __call__(self, u: complex, v: complex) -> complex:
        return symbol_eval(self, u, v)

    def max_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def to_qp(self) -> dict:
        """Rewrite as a polynomial in canonical (q, p): {(i, j): coeff} for q^i p^j.

        Uses u = (q/b + i p/c)/sqrt(2), v = (q/b - i p/c)/sqrt(2).
        """
        b, c = self.scales.b, self.scales.c
        uq, up = 1.0 / (b * math.sqrt(2.0)), 1j / (c * math.sqrt(2.0))
        out: dict = {}
        for (m, n), coeff in self.terms.items():
            # v^m u^n = (uq*q - up*p)^m (uq*q + up*p)^n
            for k in range(m + 1):
                ck = math.comb(m, k) * uq**k * (-up) ** (m - k)
                for l in range(n + 1):
                    cl = math.comb(n, l) * uq**l * up ** (n - l)
                    key = (k + l, (m - k) + (n - l))
                    out[key] = out.get(key, 0.0) + coeff * ck * cl
        return _canonical(out)

    def __str__(self) -> str:
        return _format_terms(self.terms, "v", "u")

    def qp_str(self) -> str:
        return _format_terms(self.to_qp(), "q", "p")


def _format_coeff(c: complex) -> str:
    if abs(c.imag) <= 1e-14 * max(abs(c), 1.0):
        return f"{c.real:.12g}"
    if abs(c.real) <= 1e-14 * max(abs(c), 1.0):
        return f"{c.imag:.12g}i"
    return f"({c.real:.12g}{c.imag:+.12g}i)"


def _format_terms(terms: dict, left: str, right: str) -> str:
    if not terms:
        return "0"
    parts = []
    for (m, n) in sorted(terms, key=lambda k: (k[0] + k[1], k)):
        c = terms[(m, n)]
        factors = []
        for sym, ex in ((left, m), (right, n)):
            if ex == 1:
                factors.append(sym)
            elif ex > 1:
                factors.append(f"{sym}^{ex}")
        coeff = _format_coeff(c)
        if factors and coeff == "1":
            parts.append("*".join(factors))
        elif factors:
            parts.append("*".join([coeff] + factors))
        else:
            parts.append(coeff)
    return " + ".join(parts).replace("+ -", "- ")


# -- operator product ------------------------------------------------------


def op_multiply(lhs: OperatorPoly, rhs: OperatorPoly) -> OperatorPoly:
    """Product of two normal-ordered operators, Wick-reduced to normal order.

    Uses a^n ad^m = sum_k k! C(n,k) C(m,k) ad^(m-k) a^(n-k) to reorder the
    inner a^n1 ad^m2 block of each term pair.
    """
    lhs._require_same_scales(rhs)
    max_degree = max(lhs.max_degree, rhs.max_degree)
    out: dict = {}
    for (m1, n1), c1 in lhs.terms.items():
        for (m2, n2), c2 in rhs.terms.items():
            c12 = c1 * c2
            for k in range(min(n1, m2) + 1):
                w = math.factorial(k) * math.comb(n1, k) * math.comb(m2, k)
                key = (m1 + m2 - k, n1 + n2 - k)
                out[key] = out.get(key, 0.0) + w * c12
    return OperatorPoly(out, lhs.scales, max_degree)


# -- symbol transforms -----------------------------------------------------


def q_symbol(op: OperatorPoly) -> SymbolPoly:
    """Normal-ordered (Q) symbol: ad -> v, a -> u term by term."""
    return SymbolPoly(dict(op.terms), op.scales)


def p_symbol(op: OperatorPoly) -> SymbolPoly:
    """Anti-normal (P) symbol.

    Each ad^m a^n is rewritten in anti-normal order,
    ad^m a^n = sum_k (-1)^k k! C(m,k) C(n,k) a^(n-k) ad^(m-k),
    then a -> u, ad -> v.
    """
    out: dict = {}
    for (m, n), c in op.terms.items():
        for k in range(min(m, n) + 1):
            w = (-1) ** k * math.factorial(k) * math.comb(m, k) * math.comb(n, k)
            key = (m - k, n - k)
            out[key] = out.get(key, 0.0) + w * c
    return SymbolPoly(out, op.scales)


def apply_delta_exp(sym: SymbolPoly, lam: complex) -> SymbolPoly:
    """Apply exp(lam * d^2/du dv) to a symbol; the series terminates."""
    out = dict(sym.terms)
    current = dict(sym.terms)
    k = 1
    while current:
        nxt: dict = {}
        for (m, n), c in current.items():
            if m >= 1 and n >= 1:
                key = (m - 1, n - 1)
                nxt[key] = nxt.get(key, 0.0) + m * n * c
        current = nxt
        fac = lam**k / math.factorial(k)
        for key, c in current.items():
            out[key] = out.get(key, 0.0) + fac * c
        k += 1
    return SymbolPoly(out, sym.scales)


def weyl_symbol(op: OperatorPoly) -> SymbolPoly:
    """Weyl (fully symmetrized) symbol, exp(-1/2 d^2/du dv) of the Q symbol."""
    return apply_delta_exp(q_symbol(op), -0.5)


def effective_symbol(op: OperatorPoly) -> SymbolPoly:
    """Average of the Q and P symbols; governs the mixed-form trajectories."""
    return (q_symbol(op) + p_symbol(op)).scaled(0.5)


# -- symbol calculus -------------------------------------------------------


def symbol_eval(sym: SymbolPoly, u: complex, v: complex) -> complex:
    total = 0.0 + 0.0j
    for (m, n), c in sym.terms.items():
        total += c * v**m * u**n
    return total


def symbol_derivative(sym: SymbolPoly, wrt: str, order: int = 1) -> SymbolPoly:
    if wrt not in ("u", "v"):
        raise ValueError(f"wrt must be 'u' or 'v', got {wrt!r}")
    if order < 1:
        raise ValueError("derivative order must be a positive integer")
    terms = dict(sym.terms)
    for _ in range(order):
        nxt: dict = {}
        for (m, n), c in terms.items():
            if wrt == "u" and n >= 1:
                nxt[(m, n - 1)] = nxt.get((m, n - 1), 0.0) + n * c
            elif wrt == "v" and m >= 1:
                nxt[(m - 1, n)] = nxt.get((m - 1, n), 0.0) + m * c
        terms = nxt
    return SymbolPoly(terms, sym.scales)


# -- compiled evaluation ----------------------------------------------------


class CompiledSymbol:
    """Flat (m, n, coeff) arrays for fast repeated evaluation of one symbol."""

    __slots__ = ("ms", "ns", "cs", "max_m", "max_n")

    def __init__(self, sym: SymbolPoly):
        items = sorted(sym.terms.items())
        self.ms = [m for (m, _), _ in items]
        self.ns = [n for (_, n), _ in items]
        self.cs = [c for _, c in items]
        self.max_m = max(self.ms, default=0)
        self.max_n = max(self.ns, default=0)

    def eval_tables(self, upow: list, vpow: list) -> complex:
        total = 0.0 + 0.0j
        for m, n, c in zip(self.ms, self.ns, self.cs):
            total += c * vpow[m] * upow[n]
        return total

    def eval(self, u: complex, v: complex) -> complex:
        upow = _powers(u, self.max_n)
        vpow = _powers(v, self.max_m)
        return self.eval_tables(upow, vpow)


def _powers(x: complex, n: int) -> list:
    out = [1.0 + 0.0j] * (n + 1)
    for k in range(1, n + 1):
        out[k] = out[k - 1] * x
    return out


class CompiledSystem:
    """First and second derivatives of a Hamiltonian symbol, plus optional
    extra quadrature integrands, all evaluated off shared power tables."""

    def __init__(self, H: SymbolPoly, extra: tuple = ()):
        self.H = CompiledSymbol(H)
        self.H_u = CompiledSymbol(H.derivative("u"))
        self.H_v = CompiledSymbol(H.derivative("v"))
        self.H_uu = CompiledSymbol(H.derivative("u", 2))
        self.H_vv = CompiledSymbol(H.derivative("v", 2))
        self.H_uv = CompiledSymbol(H.derivative("u").derivative("v"))
        self.extra = tuple(CompiledSymbol(s) for s in extra)
        polys = [self.H, self.H_u, self.H_v, self.H_uu, self.H_vv, self.H_uv]
        polys.extend(self.extra)
        self.max_m = max(p.max_m for p in polys)
        self.max_n = max(p.max_n for p in polys)

    def tables(self, u: complex, v: complex):
        return _powers(u, self.max_n), _powers(v, self.max_m)


def hermitian_symbol_residual(sym: SymbolPoly, u: complex) -> float:
    """|Im f(u, conj(u))| relative to |f|; ~0 for symbols of Hermitian ops."""
    val = symbol_eval(sym, u, complex(u).conjugate())
    return abs(val.imag) / max(abs(val), 1e-300)
