"""Analytic fixture families: bumps, radial stretches and the forward-map diffeomorphism."""
from __future__ import annotations

import numpy as np

from .grid import ComplexField, GridSpec, sample_function, wirtinger_dz, wirtinger_dzbar


def gaussian(z, center=0j, width=1.0):
    return np.exp(-np.abs(z - center) ** 2 / width**2)


def gaussian_bump(spec: GridSpec, center: complex = 0j, amplitude: complex = 0.4,
                  width: float = 0.25) -> ComplexField:
    """``amplitude * exp(-|z - center|^2 / width^2)`` sampled on ``spec``."""
    return sample_function(spec, lambda z: amplitude * gaussian(z, center, width))


def compact_bump(spec: GridSpec, center: complex = 0j, amplitude: complex = 0.4,
                 radius: float = 1.0) -> ComplexField:
    """Smooth bump equal to ``amplitude`` at ``center`` and exactly 0 for ``|z - center| >= radius``."""
    r = np.abs(spec.nodes() - center)
    return ComplexField(spec, amplitude * smooth_step(r, 0.0, radius)[0])


def _psi(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _dpsi(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
    return out


def smooth_step(r, r0=1.0, r1=1.8):
    """C-infinity cutoff: 1 for ``r <= r0``, 0 for ``r >= r1``; returns ``(value, derivative)``."""
    a, b = _psi(r1 - r), _psi(r - r0)
    da, db = -_dpsi(r1 - r), _dpsi(r - r0)
    s = a + b
    return a / s, (da * b - a * db) / s**2


def radial_fixture(alpha: float = 0.4, r0: float = 1.0, r1: float = 1.8):
    """``f(z) = z * phi(|z|)`` with ``phi = r^alpha`` on the unit disk, blended to 1 beyond ``r1``.

    Returns ``(f, mu)`` as vectorised callables; ``mu`` comes from the closed-form
    Wirtinger derivatives ``f_z = phi + r phi'/2`` and ``f_zbar = (z/zbar) r phi'/2``.
    """

    def parts(z):
        r = np.abs(z)
        c, dc = smooth_step(r, r0, r1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ra = np.where(r > 0, r**alpha, 0.0)
            dra = np.where(r > 0, alpha * r ** (alpha - 1), 0.0)
        phi = c * ra + 1 - c
        dphi = dc * (ra - 1) + c * dra
        return r, phi, dphi

    def f(z):
        return z * parts(z)[1]

    def mu(z):
        r, phi, dphi = parts(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            half = 0.5 * r * dphi
            phase = np.where(r > 0, z / np.conj(z), 0.0)
            return np.where(r > 0, phase * half / (phi + half), 0.0)

    return f, mu


def remark_fixture(q: float):
    """``f(z) = z + |z|^(2 - 2/q)`` and its Beltrami coefficient (closed form)."""
    beta = 2.0 - 2.0 / q

    def f(z):
        return z + np.abs(z) ** beta

    def mu(z):
        r = np.abs(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(r > 0, 0.5 * beta * r ** (beta - 2), 0.0)
        return g * z / (1 + g * np.conj(z))

    return f, mu


def diffeo_oracle(amplitude: float = 0.3):
    """``g(z) = z + amplitude * exp(-|z|^2) * zbar``, rescaled so that ``g(1) = 1``."""
    g1 = 1 + amplitude * np.exp(-1.0)

    def g(z):
        return (z + amplitude * np.exp(-np.abs(z) ** 2) * np.conj(z)) / g1

    def mu(z):
        e = amplitude * np.exp(-np.abs(z) ** 2)
        return e * (1 - np.abs(z) ** 2) / (1 - e * np.conj(z) ** 2)

    return g, mu


def beltrami_of(field: ComplexField) -> ComplexField:
    """Numerical Beltrami coefficient ``f_zbar / f_z`` of a sampled map."""
    dz = wirtinger_dz(field).samples
    dzb = wirtinger_dzbar(field).samples
    return ComplexField(field.spec, dzb / dz)


def parse_preset(text: str) -> tuple[str, dict[str, complex]]:
    """Parse ``"gaussian:center=-0.5+0i,amp=0.4,width=1"`` into ``("gaussian", {...})``."""
    name, _, rest = text.partition(":")
    params: dict[str, complex] = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"malformed preset parameter {item!r} in {text!r}")
        params[key.strip()] = complex(value.strip().replace("i", "j"))
    return name.strip(), params


def format_preset(name: str, params: dict[str, complex]) -> str:
    def fmt(v: complex) -> str:
        v = complex(v)
        return f"{v.real!r}{v.imag:+.17g}i"

    return name + (":" + ",".join(f"{k}={fmt(v)}" for k, v in params.items()) if params else "")


def preset_field(spec: GridSpec, text: str) -> ComplexField:
    """Sample a named coefficient preset: ``zero``, ``gaussian``, ``bump``, ``radial`` or ``remark``."""
    name, params = parse_preset(text)
    real = {k: v.real for k, v in params.items()}
    if name == "zero":
        return ComplexField.zeros(spec)
    if name == "gaussian":
        return gaussian_bump(spec, params.get("center", 0j), params.get("amp", 0.4),
                             real.get("width", 0.25))
    if name == "bump":
        return compact_bump(spec, params.get("center", 0j), params.get("amp", 0.4),
                            real.get("radius", 1.0))
    if name == "radial":
        return sample_function(spec, radial_fixture(real.get("alpha", 0.4))[1])
    if name == "remark":
        f, mu = remark_fixture(real.get("q", 4.0))
        cut = smooth_step(np.abs(spec.nodes()), 0.2, 0.4)[0]
        return ComplexField(spec, mu(spec.nodes()) * cut)
    raise ValueError(f"unknown coefficient preset {name!r}")
