"""Multilayer sample description and the binding of fit parameters to it."""

from __future__ import annotations

from dataclasses import dataclass, replace
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .params import ParamDef, ParameterSpace

PERFECT_CONTACT = 1e12  # W/(m^2 K)

LAYER_FIELDS = ("k", "kz", "kr", "C", "h")
INTERFACE_FIELDS = ("G",)


@dataclass(frozen=True)
class Layer:
    name: str
    kz: float
    kr: float
    C: float
    h: float = 0.0
    terminal: bool = False

    def __post_init__(self):
        if min(self.kz, self.kr, self.C) <= 0:
            raise ValueError(f"layer {self.name}: kz, kr and C must be positive")
        if not self.terminal and self.h <= 0:
            raise ValueError(f"layer {self.name}: finite layer needs h > 0")


@dataclass(frozen=True)
class Interface:
    name: str
    G: float

    def __post_init__(self):
        if self.G <= 0:
            raise ValueError(f"interface {self.name}: G must be positive")


def isotropic(name: str, k: float, C: float, h: float = 0.0, terminal: bool = False) -> Layer:
    return Layer(name, kz=k, kr=k, C=C, h=h, terminal=terminal)


@dataclass(frozen=True)
class SampleStack:
    """Top-down alternation Layer, Interface, Layer, ..., Layer."""

    elements: tuple
    bottom_boundary: str = "semi_infinite"

    def __post_init__(self):
        els = tuple(self.elements)
        object.__setattr__(self, "elements", els)
        if not els or len(els) % 2 == 0:
            raise ValueError("stack must alternate layers and interfaces, starting and ending with a layer")
        for i, el in enumerate(els):
            want = Layer if i % 2 == 0 else Interface
            if not isinstance(el, want):
                raise ValueError(f"element {i} ({getattr(el, 'name', el)!r}) should be a {want.__name__}")
        if any(layer.terminal for layer in els[:-1:2]):
            raise ValueError("only the last layer may be terminal")
        names = [el.name for el in els]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate element names in {names}")
        if self.bottom_boundary == "semi_infinite":
            if not els[-1].terminal:
                raise ValueError("semi-infinite bottom needs a terminal last layer")
        elif self.bottom_boundary == "adiabatic":
            if els[-1].terminal:
                raise ValueError("adiabatic bottom requires a finite last layer")
        else:
            raise ValueError(f"unknown bottom boundary {self.bottom_boundary!r}")

    @property
    def layers(self) -> tuple[Layer, ...]:
        return self.elements[::2]

    @property
    def interfaces(self) -> tuple[Interface, ...]:
        return self.elements[1::2]

    def element(self, name: str):
        for el in self.elements:
            if el.name == name:
                return el
        raise KeyError(f"no stack element named {name!r}")

    def read(self, element: str, fld: str) -> float:
        el = self.element(element)
        return float(el.kz if fld == "k" else getattr(el, fld))

    def arrays(self) -> dict[str, np.ndarray]:
        """Column arrays (top to bottom) consumed by the forward kernel."""
        layers, ifaces = self.layers, self.interfaces
        return {
            "kz": np.array([l.kz for l in layers], dtype=float),
            "kr": np.array([l.kr for l in layers], dtype=float),
            "C": np.array([l.C for l in layers], dtype=float),
            "h": np.array([l.h for l in layers], dtype=float),
            "G": np.array([i.G for i in ifaces], dtype=float),
        }


class ParameterBinding(Mapping):
    """Read-only map: parameter name -> (element name, field name).

    Field ``"k"`` sets both ``kz`` and ``kr`` (isotropic layer).
    """

    def __init__(self, targets: Mapping[str, tuple[str, str]] | None = None):
        self._targets = MappingProxyType(dict(targets or {}))
        seen: dict[tuple[str, str], str] = {}
        for pname, (el, fld) in self._targets.items():
            fields = ("kz", "kr") if fld == "k" else (fld,)
            for f in fields:
                if (el, f) in seen:
                    raise ValueError(f"{el}.{f} bound by both {seen[(el, f)]!r} and {pname!r}")
                seen[(el, f)] = pname

    def __getitem__(self, key):
        return self._targets[key]

    def __iter__(self):
        return iter(self._targets)

    def __len__(self):
        return len(self._targets)

    def __repr__(self):
        return f"ParameterBinding({dict(self._targets)!r})"

    def __reduce__(self):
        # mappingproxy does not pickle; worker pools need the plain dict
        return (ParameterBinding, (dict(self._targets),))

    def validate(self, stack: SampleStack) -> None:
        for pname, (el, fld) in self._targets.items():
            target = stack.element(el)
            allowed = LAYER_FIELDS if isinstance(target, Layer) else INTERFACE_FIELDS
            if fld not in allowed:
                raise ValueError(f"{pname}: {el} has no bindable field {fld!r}")


def resolve(stack: SampleStack, binding: ParameterBinding, values: Mapping[str, float]) -> SampleStack:
    """Return a copy of ``stack`` with bound fields overwritten by ``values``."""
    updates: dict[str, dict[str, float]] = {}
    for pname, value in values.items():
        if pname not in binding:
            raise KeyError(f"parameter {pname!r} is not bound to the stack")
        if not value > 0:
            raise ValueError(f"parameter {pname!r} must be positive, got {value}")
        el, fld = binding[pname]
        upd = updates.setdefault(el, {})
        if fld == "k":
            upd["kz"] = upd["kr"] = float(value)
        else:
            upd[fld] = float(value)
    if not updates:
        return stack
    elements = tuple(replace(e, **updates[e.name]) if e.name in updates else e for e in stack.elements)
    return SampleStack(elements, stack.bottom_boundary)


# Fit ranges and nominal inputs for the GaN-on-Si heterostructure.
GAN_SI_TRUTH = {
    "G1": 150e6,
    "k_GaN": 130.0,
    "C_GaN": 2.64e6,
    "k_AlGaN": 10.0,
    "k_Si": 140.0,
}
GAN_SI_SPOTS_UM = (3.4, 7.4)


def build_gan_si_stack() -> tuple[SampleStack, ParameterSpace, ParameterBinding]:
    """Al / G1 / GaN / AlGaN / G2 / Si with five fit parameters."""
    stack = SampleStack(
        (
            isotropic("Al", 160.0, 2.44e6, 87.4e-9),
            Interface("G1", 150e6),
            isotropic("GaN", 130.0, 2.64e6, 1080e-9),
            # GaN/AlGaN resistance is lumped into the AlGaN buffer
            Interface("GaN_AlGaN", PERFECT_CONTACT),
            isotropic("AlGaN", 10.0, 2.6e6, 458e-9),
            # AlN nucleation layer reduced to a conductance
            Interface("G2", 80e6),
            isotropic("Si", 140.0, 1.665e6, terminal=True),
        )
    )
    space = ParameterSpace(
        [
            ParamDef("G1", 10e6, 300e6),
            ParamDef("k_GaN", 1.0, 1000.0),
            ParamDef("C_GaN", 0.5e6, 5e6),
            ParamDef("k_AlGaN", 1.0, 500.0),
            ParamDef("k_Si", 1.0, 1000.0),
            ParamDef("k_Al", 144.0, 176.0, role="fixed", fixed_value=160.0),
            ParamDef("C_Al", 2.37e6, 2.51e6, role="fixed", fixed_value=2.44e6),
            ParamDef("h_Al", 84.4e-9, 90.4e-9, role="fixed", fixed_value=87.4e-9),
            ParamDef("h_GaN", 1070e-9, 1090e-9, role="fixed", fixed_value=1080e-9),
            ParamDef("C_AlGaN", 2.5e6, 2.7e6, role="fixed", fixed_value=2.6e6),
            ParamDef("h_AlGaN", 450e-9, 466e-9, role="fixed", fixed_value=458e-9),
            ParamDef("G2", 40e6, 120e6, role="fixed", fixed_value=80e6),
            ParamDef("C_Si", 1.615e6, 1.715e6, role="fixed", fixed_value=1.665e6),
        ]
    )
    binding = ParameterBinding(
        {
            "G1": ("G1", "G"),
            "k_GaN": ("GaN", "k"),
            "C_GaN": ("GaN", "C"),
            "k_AlGaN": ("AlGaN", "k"),
            "k_Si": ("Si", "k"),
            "k_Al": ("Al", "k"),
            "C_Al": ("Al", "C"),
            "h_Al": ("Al", "h"),
            "h_GaN": ("GaN", "h"),
            "C_AlGaN": ("AlGaN", "C"),
            "h_AlGaN": ("AlGaN", "h"),
            "G2": ("G2", "G"),
            "C_Si": ("Si", "C"),
        }
    )
    return stack, space, binding
