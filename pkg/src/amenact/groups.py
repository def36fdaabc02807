"""Exact realizations of the groups used throughout the package.

Four carriers are provided, all immutable and hashable:

* :class:`AffineElement` -- maps ``x -> q**k * x + mu`` with ``mu`` in Z[1/q],
  realizing BS(1, q) (``a: x -> x + 1``, ``t: x -> x / q``);
* :class:`HeisenbergElement` -- the integer Heisenberg group with product
  ``(x, z, y)(x', z', y') = (x + x', z + z' + x*y', y + y')``;
* :class:`Matrix2` -- 2x2 integer matrices of determinant 1, optionally
  reduced modulo ``2**n``;
* :class:`RootedTreePortrait` -- automorphisms of the depth-``d`` rooted
  ``q``-ary tree stored as sparse vertex permutations.

Composition follows the left-action convention ``(g*h)(x) = g(h(x))``.
No floating point is used anywhere in this module.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping

from .errors import DepthExceeded, KindMismatch, NotInImage, UnknownGenerator

__all__ = [
    "QDyadic",
    "AffineElement",
    "HeisenbergElement",
    "Matrix2",
    "RootedTreePortrait",
    "Word",
    "MarkedGroup",
    "AffineAlpha",
    "HeisenbergAlpha",
    "compose",
    "invert",
    "evaluate_word",
    "act",
    "alpha_apply",
    "alpha_preimage",
    "kind_of",
    "encode",
    "odometer",
    "bs_group",
    "heisenberg_group",
    "sanov_group",
]


# --------------------------------------------------------------------------
# Z[1/q]


@dataclass(frozen=True, order=False)
class QDyadic:
    """The number ``num / q**exp`` kept in reduced form."""

    num: int
    exp: int
    q: int

    def __post_init__(self):
        num, exp, q = self.num, self.exp, self.q
        if q < 2:
            raise ValueError("base q must be >= 2")
        if exp < 0:
            num, exp = num * q ** (-exp), 0
        if num == 0:
            exp = 0
        while exp > 0 and num % q == 0:
            num //= q
            exp -= 1
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "exp", exp)

    @classmethod
    def from_fraction(cls, value, q: int) -> "QDyadic":
        value = Fraction(value)
        den, exp = value.denominator, 0
        power = 1
        while power % den:
            power *= q
            exp += 1
            if exp > 4 * den.bit_length() + 4:
                raise ValueError(f"{value} is not in Z[1/{q}]")
        return cls(value.numerator * (power // den), exp, q)

    def to_fraction(self) -> Fraction:
        return Fraction(self.num, self.q**self.exp)

    def _coerce(self, other) -> "QDyadic":
        if isinstance(other, QDyadic):
            if other.q != self.q:
                raise KindMismatch(f"bases {self.q} and {other.q} differ")
            return other
        if isinstance(other, int):
            return QDyadic(other, 0, self.q)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        e = max(self.exp, other.exp)
        q = self.q
        return QDyadic(self.num * q ** (e - self.exp) + other.num * q ** (e - other.exp), e, q)

    __radd__ = __add__

    def __neg__(self):
        return QDyadic(-self.num, self.exp, self.q)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return QDyadic(self.num * other.num, self.exp + other.exp, self.q)

    __rmul__ = __mul__

    def scale(self, k: int) -> "QDyadic":
        """Multiply by ``q**k`` (``k`` may be negative)."""
        if k >= 0:
            return QDyadic(self.num * self.q**k, self.exp, self.q)
        return QDyadic(self.num, self.exp - k, self.q)

    def is_integer(self) -> bool:
        return self.exp == 0

    def mod_power(self, k: int) -> "QDyadic":
        """Canonical representative of ``self`` modulo ``q**k * Z``, in ``[0, q**k)``."""
        modulus = Fraction(self.q) ** k
        value = self.to_fraction()
        r = value - modulus * (value // modulus)
        return QDyadic.from_fraction(r, self.q)

    def __lt__(self, other):
        return self.to_fraction() < Fraction(other.to_fraction() if isinstance(other, QDyadic) else other)

    def __str__(self):
        if self.exp == 0:
            return str(self.num)
        return f"{self.num}/{self.q}^{self.exp}"

    @classmethod
    def parse(cls, text: str, q: int) -> "QDyadic":
        text = text.strip()
        m = re.fullmatch(r"([+-]?\d+)(?:/(\d+)\^(\d+))?", text)
        if not m:
            raise ValueError(f"bad Z[1/q] literal {text!r}")
        num = int(m.group(1))
        if m.group(2) is None:
            return cls(num, 0, q)
        if int(m.group(2)) != q:
            raise KindMismatch(f"literal base {m.group(2)} differs from {q}")
        return cls(num, int(m.group(3)), q)


# --------------------------------------------------------------------------
# affine group  x -> q^k x + mu


@dataclass(frozen=True)
class AffineElement:
    k: int
    mu: QDyadic
    q: int

    def __post_init__(self):
        if not isinstance(self.mu, QDyadic):
            object.__setattr__(self, "mu", QDyadic.from_fraction(self.mu, self.q))
        elif self.mu.q != self.q:
            raise KindMismatch("mu base differs from element base")

    def identity(self) -> "AffineElement":
        return AffineElement(0, QDyadic(0, 0, self.q), self.q)

    def is_identity(self) -> bool:
        return self.k == 0 and self.mu.num == 0

    def __mul__(self, other: "AffineElement") -> "AffineElement":
        if not isinstance(other, AffineElement):
            raise KindMismatch(f"cannot compose affine with {type(other).__name__}")
        if other.q != self.q:
            raise KindMismatch("affine bases differ")
        return AffineElement(self.k + other.k, other.mu.scale(self.k) + self.mu, self.q)

    def inverse(self) -> "AffineElement":
        return AffineElement(-self.k, (-self.mu).scale(-self.k), self.q)

    def __call__(self, x):
        if not isinstance(x, QDyadic):
            x = QDyadic.from_fraction(x, self.q)
        return x.scale(self.k) + self.mu

    def __str__(self):
        mu = str(self.mu)
        sign = "" if mu.startswith("-") else "+"
        return f"{self.q}^{self.k}*x{sign}{mu}"

    @classmethod
    def parse(cls, text: str) -> "AffineElement":
        m = re.fullmatch(r"\s*(\d+)\^([+-]?\d+)\*x([+-].+)\s*", text)
        if not m:
            raise ValueError(f"bad affine literal {text!r}")
        q = int(m.group(1))
        mu = m.group(3)
        if mu.startswith("+"):
            mu = mu[1:]
        return cls(int(m.group(2)), QDyadic.parse(mu, q), q)


# --------------------------------------------------------------------------
# Heisenberg group


@dataclass(frozen=True)
class HeisenbergElement:
    x: int
    z: int
    y: int

    def identity(self) -> "HeisenbergElement":
        return HeisenbergElement(0, 0, 0)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0 and self.y == 0

    def __mul__(self, other: "HeisenbergElement") -> "HeisenbergElement":
        if not isinstance(other, HeisenbergElement):
            raise KindMismatch(f"cannot compose Heisenberg with {type(other).__name__}")
        return HeisenbergElement(self.x + other.x, self.z + other.z + self.x * other.y, self.y + other.y)

    def inverse(self) -> "HeisenbergElement":
        return HeisenbergElement(-self.x, -self.z + self.x * self.y, -self.y)

    def __call__(self, p):
        return self * p

    def __str__(self):
        return f"({self.x},{self.z},{self.y})"

    @classmethod
    def parse(cls, text: str) -> "HeisenbergElement":
        m = re.fullmatch(r"\s*\(\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*\)\s*", text)
        if not m:
            raise ValueError(f"bad Heisenberg literal {text!r}")
        return cls(*(int(v) for v in m.groups()))


# --------------------------------------------------------------------------
# SL_2 over Z or Z/2^n


@dataclass(frozen=True)
class Matrix2:
    a: int
    b: int
    c: int
    d: int
    modulus: int | None = None

    def __post_init__(self):
        m = self.modulus
        if m is not None:
            for name in "abcd":
                object.__setattr__(self, name, getattr(self, name) % m)
            det_ok = (self.a * self.d - self.b * self.c - 1) % m == 0
        else:
            det_ok = self.a * self.d - self.b * self.c == 1
        if not det_ok:
            raise ValueError(f"determinant of {self} is not 1")

    def identity(self) -> "Matrix2":
        return Matrix2(1, 0, 0, 1, self.modulus)

    def is_identity(self) -> bool:
        return (self.a, self.b, self.c, self.d) == (1, 0, 0, 1)

    def __mul__(self, o: "Matrix2") -> "Matrix2":
        if not isinstance(o, Matrix2):
            raise KindMismatch(f"cannot compose matrix with {type(o).__name__}")
        if o.modulus != self.modulus:
            raise KindMismatch("matrix moduli differ")
        return Matrix2(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
            self.modulus,
        )

    def inverse(self) -> "Matrix2":
        return Matrix2(self.d, -self.b, -self.c, self.a, self.modulus)

    def reduce(self, modulus: int) -> "Matrix2":
        """Residue image; a homomorphism from Z (or a multiple modulus)."""
        if self.modulus is not None and self.modulus % modulus:
            raise KindMismatch(f"cannot reduce mod {self.modulus} to mod {modulus}")
        return Matrix2(self.a, self.b, self.c, self.d, modulus)

    def entries(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)

    def __call__(self, v):
        u, w = v
        u, w = self.a * u + self.b * w, self.c * u + self.d * w
        if self.modulus is not None:
            u, w = u % self.modulus, w % self.modulus
        return (u, w)

    def __str__(self):
        body = f"[[{self.a},{self.b}],[{self.c},{self.d}]]"
        return body if self.modulus is None else f"{body} mod {self.modulus}"


# --------------------------------------------------------------------------
# rooted tree portraits


def _perm_inverse(p: tuple[int, ...]) -> tuple[int, ...]:
    inv = [0] * len(p)
    for i, j in enumerate(p):
        inv[j] = i
    return tuple(inv)


def _as_address(v) -> tuple[int, ...]:
    if isinstance(v, str):
        return tuple(int(c, 36) for c in v)
    return tuple(v)


@dataclass(frozen=True)
class RootedTreePortrait:
    """Automorphism of the depth-``depth`` rooted ``q``-ary tree.

    ``perms`` holds ``(vertex address, child permutation)`` pairs for the
    internal vertices whose permutation is not the identity, sorted by
    address. Use :meth:`from_mapping` to build one from a dict.
    """

    q: int
    depth: int
    perms: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...] = ()

    def __post_init__(self):
        ident = tuple(range(self.q))
        clean = {}
        for addr, perm in self.perms:
            addr, perm = tuple(addr), tuple(perm)
            if len(addr) >= self.depth:
                raise DepthExceeded(f"permutation at level {len(addr)} beyond depth {self.depth}")
            if sorted(perm) != list(ident):
                raise ValueError(f"{perm} is not a permutation of {self.q} children")
            if perm != ident:
                clean[addr] = perm
        object.__setattr__(self, "perms", tuple(sorted(clean.items())))
        object.__setattr__(self, "_table", clean)

    @classmethod
    def from_mapping(cls, q: int, depth: int, perms: Mapping) -> "RootedTreePortrait":
        return cls(q, depth, tuple((tuple(k), tuple(v)) for k, v in perms.items()))

    @property
    def table(self) -> dict:
        return self._table

    def identity(self) -> "RootedTreePortrait":
        return RootedTreePortrait(self.q, self.depth)

    def is_identity(self) -> bool:
        return not self.perms

    def _check(self, other):
        if not isinstance(other, RootedTreePortrait) or other.q != self.q:
            raise KindMismatch("portraits over different trees")
        if other.depth != self.depth:
            raise DepthExceeded(f"composition of depth {self.depth} with depth {other.depth}")

    def __call__(self, v):
        was_str = isinstance(v, str)
        addr = _as_address(v)
        if len(addr) > self.depth:
            raise DepthExceeded(f"address of length {len(addr)} beyond depth {self.depth}")
        table = self._table
        out = []
        for i, c in enumerate(addr):
            perm = table.get(addr[:i])
            out.append(perm[c] if perm is not None else c)
        if was_str:
            return "".join(_digit(c) for c in out)
        return tuple(out)

    def preimage(self, v) -> tuple[int, ...]:
        addr = _as_address(v)
        if len(addr) > self.depth:
            raise DepthExceeded(f"address of length {len(addr)} beyond depth {self.depth}")
        table = self.table
        src: list[int] = []
        for c in addr:
            perm = table.get(tuple(src))
            src.append(_perm_inverse(perm)[c] if perm is not None else c)
        return tuple(src)

    def __mul__(self, other: "RootedTreePortrait") -> "RootedTreePortrait":
        self._check(other)
        g, h = self.table, other.table
        ident = tuple(range(self.q))
        vertices = set(h)
        vertices.update(other.preimage(u) for u in g)
        out = {}
        for u in vertices:
            hu = other(u)
            sh = h.get(u, ident)
            sg = g.get(hu, ident)
            out[u] = tuple(sg[sh[c]] for c in range(self.q))
        return RootedTreePortrait.from_mapping(self.q, self.depth, out)

    def inverse(self) -> "RootedTreePortrait":
        out = {self(v): _perm_inverse(p) for v, p in self.perms}
        return RootedTreePortrait.from_mapping(self.q, self.depth, out)

    def __str__(self):
        parts = [f"{''.join(_digit(c) for c in a) or '.'}:{''.join(_digit(c) for c in p)}" for a, p in self.perms]
        return f"portrait(q={self.q},d={self.depth};{' '.join(parts)})"


def _digit(c: int) -> str:
    return "0123456789abcdefghijklmnopqrstuvwxyz"[c]


def odometer(q: int, depth: int) -> RootedTreePortrait:
    """Add-one-with-carry on addresses read least significant digit first."""
    cycle = tuple((c + 1) % q for c in range(q))
    return RootedTreePortrait.from_mapping(q, depth, {(q - 1,) * j: cycle for j in range(depth)})


# --------------------------------------------------------------------------
# words


_LETTER = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\^([+-]?\d+))?")


@dataclass(frozen=True)
class Word:
    letters: tuple[tuple[str, int], ...] = ()

    @classmethod
    def parse(cls, text: str) -> "Word":
        text = text.strip()
        if text in ("", "e", "1"):
            return cls()
        letters = []
        for part in text.split("."):
            m = _LETTER.fullmatch(part.strip())
            if not m:
                raise ValueError(f"bad word letter {part!r} in {text!r}")
            power = int(m.group(2)) if m.group(2) is not None else 1
            sign = 1 if power > 0 else -1
            letters.extend([(m.group(1), sign)] * abs(power))
        return cls(tuple(letters))

    @classmethod
    def gen(cls, name: str, sign: int = 1) -> "Word":
        return cls(((name, sign),))

    def reduced(self) -> "Word":
        out: list[tuple[str, int]] = []
        for g, s in self.letters:
            if out and out[-1] == (g, -s):
                out.pop()
            else:
                out.append((g, s))
        return Word(tuple(out))

    def __len__(self):
        return len(self.reduced().letters)

    def __add__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def inverse(self) -> "Word":
        return Word(tuple((g, -s) for g, s in reversed(self.letters)))

    def exponent_sum(self, name: str) -> int:
        return sum(s for g, s in self.letters if g == name)

    def __str__(self):
        return ".".join(g if s == 1 else f"{g}^-1" for g, s in self.letters)


# --------------------------------------------------------------------------
# generic dispatch


def kind_of(g) -> str:
    if isinstance(g, AffineElement):
        return "affine"
    if isinstance(g, HeisenbergElement):
        return "heisenberg"
    if isinstance(g, Matrix2):
        return "matrix"
    if isinstance(g, RootedTreePortrait):
        return "portrait"
    return getattr(g, "kind", type(g).__name__)


def compose(g, h):
    """``g`` after ``h``."""
    if kind_of(g) != kind_of(h):
        raise KindMismatch(f"{kind_of(g)} vs {kind_of(h)}")
    return g * h


def invert(g):
    return g.inverse()


def act(g, p):
    """Apply ``g`` to the point ``p`` (rational, address, residue vector, ...)."""
    try:
        return g(p)
    except TypeError as exc:
        raise KindMismatch(str(exc)) from exc


def encode(value) -> str:
    if isinstance(value, tuple) and all(isinstance(c, int) for c in value):
        return "".join(_digit(c) for c in value) if value and max(value) < 36 and min(value) >= 0 else str(value)
    return str(value)


@dataclass(frozen=True)
class MarkedGroup:
    """A group given by named generators bound to realization elements."""

    generators: tuple[tuple[str, Any], ...]
    kind: str = ""
    identity_element: Any = None

    def __post_init__(self):
        gens = tuple(self.generators)
        kinds = {kind_of(g) for _, g in gens}
        if len(kinds) > 1:
            raise KindMismatch(f"mixed generator kinds {sorted(kinds)}")
        object.__setattr__(self, "generators", gens)
        if not self.kind:
            object.__setattr__(self, "kind", kinds.pop() if kinds else "trivial")
        if self.identity_element is None:
            if not gens:
                raise ValueError("a group without generators needs an identity element")
            object.__setattr__(self, "identity_element", gens[0][1].identity())

    @classmethod
    def of(cls, gens: Mapping[str, Any], identity=None) -> "MarkedGroup":
        return cls(tuple(gens.items()), identity_element=identity)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.generators]

    def __getitem__(self, name: str):
        for n, g in self.generators:
            if n == name:
                return g
        raise UnknownGenerator(name)

    def letters(self) -> list[tuple[str, int]]:
        """All signed letters, positive first, in generator order."""
        return [(n, 1) for n in self.names] + [(n, -1) for n in self.names]

    def letter(self, name: str, sign: int):
        g = self[name]
        return g if sign > 0 else g.inverse()

    def identity(self):
        return self.identity_element

    def evaluate(self, w: Word | str):
        if isinstance(w, str):
            w = Word.parse(w)
        out = self.identity_element
        for name, sign in w.letters:
            out = out * self.letter(name, sign)
        return out

    def random_word(self, rng: random.Random, max_len: int) -> Word:
        n = rng.randint(0, max_len)
        letters = self.letters()
        return Word(tuple(rng.choice(letters) for _ in range(n)))


def evaluate_word(group: MarkedGroup, w: Word | str):
    return group.evaluate(w)


# --------------------------------------------------------------------------
# injective endomorphisms used by the HNN constructions


@dataclass(frozen=True)
class AffineAlpha:
    """``a**n -> a**(q*n)`` on the translation subgroup <a> = Z of BS(1, q)."""

    q: int

    def _check(self, h: AffineElement):
        if not isinstance(h, AffineElement) or h.k != 0 or not h.mu.is_integer():
            raise KindMismatch(f"{h} is not in the base <a>")

    def apply(self, h: AffineElement) -> AffineElement:
        self._check(h)
        return AffineElement(0, h.mu * self.q, h.q)

    def in_image_power(self, h: AffineElement, n: int) -> bool:
        self._check(h)
        return h.mu.num % self.q**n == 0

    def in_image(self, h) -> bool:
        return self.in_image_power(h, 1)

    def preimage(self, h: AffineElement) -> AffineElement:
        if not self.in_image(h):
            raise NotInImage(f"{h} not in alpha(H)")
        return AffineElement(0, QDyadic(h.mu.num // self.q, 0, h.q), h.q)


@dataclass(frozen=True)
class HeisenbergAlpha:
    """``(x, z, y) -> (2x, 4z, 2y)``."""

    def apply(self, h: HeisenbergElement) -> HeisenbergElement:
        return HeisenbergElement(2 * h.x, 4 * h.z, 2 * h.y)

    def in_image_power(self, h: HeisenbergElement, n: int) -> bool:
        p = 2**n
        return h.x % p == 0 and h.z % (p * p) == 0 and h.y % p == 0

    def in_image(self, h) -> bool:
        return self.in_image_power(h, 1)

    def preimage(self, h: HeisenbergElement) -> HeisenbergElement:
        if not self.in_image(h):
            raise NotInImage(f"{h} not in alpha(H)")
        return HeisenbergElement(h.x // 2, h.z // 4, h.y // 2)


def alpha_apply(alpha, h):
    return alpha.apply(h)


def alpha_preimage(alpha, h):
    return alpha.preimage(h)


# --------------------------------------------------------------------------
# stock groups


def bs_group(q: int) -> MarkedGroup:
    """BS(1, q) in the affine model: ``a: x -> x + 1``, ``t: x -> x / q``."""
    return MarkedGroup.of({
        "a": AffineElement(0, QDyadic(1, 0, q), q),
        "t": AffineElement(-1, QDyadic(0, 0, q), q),
    })


def heisenberg_group() -> MarkedGroup:
    return MarkedGroup.of({"A": HeisenbergElement(1, 0, 0), "B": HeisenbergElement(0, 0, 1)})


def sanov_group(modulus: int | None = None) -> MarkedGroup:
    """The free subgroup <A, B> of SL_2(Z), both generators = I mod 2."""
    return MarkedGroup.of({"A": Matrix2(1, 2, 0, 1, modulus), "B": Matrix2(1, 0, 2, 1, modulus)})
