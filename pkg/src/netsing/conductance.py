"""Edge constitutive laws.

Each model maps an edge voltage ``y`` (tail minus head potential) to the
current flowing from tail to head. ``potential`` is the antiderivative of
``current`` normalized to vanish at ``y = 0``, so nodal currents are the
gradient of the summed edge potentials.

Numeric fields may hold a parameter name (a ``str``) instead of a number;
``bind`` substitutes values from a parameter mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Mapping, Union

import numpy as np

Value = Union[float, str]


def _logcosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


class ConductanceModel:
    """Common interface; subclasses are frozen dataclasses."""

    type_name: str = ""
    negative: bool = False

    def bind(self, params: Mapping[str, float]):
        updates = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, str):
                if val not in params:
                    raise KeyError(f"unknown parameter {val!r}")
                updates[f.name] = float(params[val])
        return replace(self, **updates) if updates else self

    def parameter_names(self) -> set[str]:
        return {getattr(self, f.name) for f in fields(self)
                if isinstance(getattr(self, f.name), str)}

    def _require_bound(self):
        for f in fields(self):
            if isinstance(getattr(self, f.name), str):
                raise ValueError(f"{self.type_name}.{f.name} is unbound")

    def potential(self, y):
        raise NotImplementedError

    def current(self, y):
        raise NotImplementedError

    def derivative(self, y, order: int):
        """Closed-form ``d^order current / dy^order`` for order 1, 2 or 3."""
        raise NotImplementedError

    def normalized(self, y, order: int = 0):
        """Derivatives of the unit-slope conductance ``g_-(y) = -current(y)/gain``.

        Only meaningful for negative edges, where ``g_-'(0) = 1``.
        """
        if not self.negative:
            raise TypeError(f"{self.type_name} edges have no normalized form")
        if order == 0:
            return -self.current(y) / self.gain
        return -self.derivative(y, order) / self.gain

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Linear(ConductanceModel):
    resistance: Value = 1.0

    type_name = "linear"

    def __post_init__(self):
        if not isinstance(self.resistance, str) and not self.resistance > 0:
            raise ValueError("resistance must be positive")

    def potential(self, y):
        self._require_bound()
        return 0.5 * np.square(y) / self.resistance

    def current(self, y):
        self._require_bound()
        return np.asarray(y, dtype=float) / self.resistance

    def derivative(self, y, order: int):
        self._require_bound()
        _check_order(order)
        y = np.asarray(y, dtype=float)
        if order == 1:
            return np.full_like(y, 1.0 / self.resistance)
        return np.zeros_like(y)

    def to_dict(self) -> dict:
        return {"type": self.type_name, "resistance": self.resistance}


@dataclass(frozen=True)
class TanhNegative(ConductanceModel):
    """Saturating negative conductance ``I = -S(k y, beta)`` with

    ``S(k y, beta) = (tanh(k y - beta) + tanh(beta)) / (1 - tanh(beta)^2)``.
    """

    gain: Value = 1.0
    beta: Value = 0.0

    type_name = "tanh_negative"
    negative = True

    def __post_init__(self):
        if not isinstance(self.gain, str) and not self.gain > 0:
            raise ValueError("gain must be positive")

    def _sech2_beta(self):
        return 1.0 - np.tanh(self.beta) ** 2

    def potential(self, y):
        self._require_bound()
        k, b = self.gain, self.beta
        y = np.asarray(y, dtype=float)
        num = _logcosh(k * y - b) - _logcosh(b) + k * np.tanh(b) * y
        return -num / (k * self._sech2_beta())

    def current(self, y):
        self._require_bound()
        k, b = self.gain, self.beta
        y = np.asarray(y, dtype=float)
        return -(np.tanh(k * y - b) + np.tanh(b)) / self._sech2_beta()

    def derivative(self, y, order: int):
        self._require_bound()
        _check_order(order)
        k, b = self.gain, self.beta
        t = np.tanh(k * np.asarray(y, dtype=float) - b)
        s2 = 1.0 - t * t
        if order == 1:
            d = s2
        elif order == 2:
            d = -2.0 * t * s2
        else:
            d = -2.0 * s2 * s2 + 4.0 * t * t * s2
        return -(k ** order) * d / self._sech2_beta()

    def to_dict(self) -> dict:
        return {"type": self.type_name, "gain": self.gain, "beta": self.beta}


@dataclass(frozen=True)
class CubicNegative(ConductanceModel):
    """Polynomial negative conductance ``I = -k (y - c y^3)``.

    Not a saturating device; intended for local analysis near ``y = 0``.
    ``c = 0`` gives a linear negative conductance.
    """

    gain: Value = 1.0
    cubic: Value = 0.0

    type_name = "cubic_negative"
    negative = True

    def __post_init__(self):
        if not isinstance(self.gain, str) and not self.gain > 0:
            raise ValueError("gain must be positive")

    def potential(self, y):
        self._require_bound()
        y = np.asarray(y, dtype=float)
        return -self.gain * (0.5 * y ** 2 - 0.25 * self.cubic * y ** 4)

    def current(self, y):
        self._require_bound()
        y = np.asarray(y, dtype=float)
        return -self.gain * (y - self.cubic * y ** 3)

    def derivative(self, y, order: int):
        self._require_bound()
        _check_order(order)
        y = np.asarray(y, dtype=float)
        k, c = self.gain, self.cubic
        if order == 1:
            return -k * (1.0 - 3.0 * c * y ** 2)
        if order == 2:
            return 6.0 * k * c * y
        return np.full_like(y, 6.0 * k * c)

    def to_dict(self) -> dict:
        return {"type": self.type_name, "gain": self.gain, "cubic": self.cubic}


MODEL_TYPES = {cls.type_name: cls for cls in (Linear, TanhNegative, CubicNegative)}


def _check_order(order):
    if order not in (1, 2, 3):
        raise ValueError(f"derivative order must be 1, 2 or 3, got {order}")


def potential(model: ConductanceModel, y):
    return model.potential(y)


def current(model: ConductanceModel, y):
    return model.current(y)


def derivative(model: ConductanceModel, y, order: int):
    return model.derivative(y, order)
