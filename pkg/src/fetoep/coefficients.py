"""Diffusion, convection and load coefficient fields on (x, y)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameterError

SQRT3 = np.sqrt(3.0)

#: Default kink line ``y = y0`` for the a2/a3 templates: the horizontal
#: mid-line of each domain.
DEFAULT_Y0 = {"hexagon": SQRT3 / 4.0, "square": 0.5}


@dataclass(frozen=True)
class CoefficientField:
    """Scalar or 2-vector field evaluated pointwise on arrays.

    Use the constructors (:meth:`constant`, :meth:`a1`, ...) rather than
    instantiating directly.
    """

    kind: str
    value: tuple = ()
    y0: Optional[float] = None
    func: Optional[Callable] = None
    vector: bool = False

    @classmethod
    def constant(cls, value):
        v = np.atleast_1d(np.asarray(value, dtype=float))
        if v.size not in (1, 2):
            raise InvalidParameterError("constant field must be a scalar or a 2-vector")
        return cls("const", tuple(v.tolist()), vector=v.size == 2)

    @classmethod
    def a1(cls):
        return cls("a1")

    @classmethod
    def a2(cls, y0):
        return cls("a2", y0=float(y0))

    @classmethod
    def a3(cls, y0):
        return cls("a3", y0=float(y0))

    @classmethod
    def linear(cls):
        """The convection field ``b(x, y) = [x, y]``."""
        return cls("linear", vector=True)

    @classmethod
    def custom(cls, func, vector=False, name="custom"):
        return cls(name, func=func, vector=vector)

    @property
    def is_constant(self):
        return self.kind == "const"

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        k = self.kind
        if k == "const":
            if self.vector:
                out = np.empty(x.shape + (2,))
                out[...] = self.value
                return out
            return np.full(x.shape, self.value[0])
        if k == "a1":
            return np.exp(x + y)
        if k == "a2":
            return np.exp(x + np.abs(y - self.y0) ** 1.5)
        if k == "a3":
            return np.exp(x + np.abs(y - self.y0))
        if k == "linear":
            return np.stack([x, y], axis=-1)
        if self.func is None:
            raise InvalidParameterError(f"unknown coefficient kind {k!r}")
        out = np.asarray(self.func(x, y), dtype=float)
        shape = x.shape + ((2,) if self.vector else ())
        return np.broadcast_to(out, shape).copy()

    @property
    def id(self):
        """Textual identifier accepted by :func:`parse_coefficient`."""
        if self.kind == "const":
            return "const:" + ",".join(repr(v) for v in self.value)
        return self.kind


def parse_coefficient(text, domain="hexagon", vector=False):
    """Parse ``a1 | a2 | a3 | const:<v>[,<v>] | linear | none``.

    ``a2`` and ``a3`` take their kink line from the domain unless given as
    ``a2:<y0>``. Returns ``None`` for ``none``.
    """
    text = text.strip()
    name, _, arg = text.partition(":")
    if name == "none":
        return None
    if name == "const":
        try:
            values = [float(v) for v in arg.split(",")]
        except ValueError:
            raise InvalidParameterError(f"bad constant coefficient {text!r}") from None
        field = CoefficientField.constant(values)
        if field.vector != vector:
            raise InvalidParameterError(f"{text!r}: expected a {'vector' if vector else 'scalar'} field")
        return field
    if name == "linear":
        if not vector:
            raise InvalidParameterError("'linear' is a convection (vector) field")
        return CoefficientField.linear()
    if name in ("a1", "a2", "a3"):
        if vector:
            raise InvalidParameterError(f"{name!r} is a scalar field")
        if name == "a1":
            return CoefficientField.a1()
        y0 = float(arg) if arg else DEFAULT_Y0[domain]
        return CoefficientField.a2(y0) if name == "a2" else CoefficientField.a3(y0)
    raise InvalidParameterError(f"unknown coefficient id {text!r}")


def as_field(value, vector=False):
    """Accept a field, a number/2-tuple, or None and return a field or None."""
    if value is None or isinstance(value, CoefficientField):
        return value
    if callable(value):
        return CoefficientField.custom(value, vector=vector)
    return CoefficientField.constant(value)
