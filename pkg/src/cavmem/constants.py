"""Physical constants for the Rb-87 level structure.

Constants ship in a versioned key/value text file (``data/rb87_constants.cfg``)
so that the provenance of every number is documented in one place.  The file
path can be overridden with the ``CAVMEM_CONSTANTS`` environment variable or
the ``--constants`` CLI flag.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources

__all__ = ["TermConstants", "AtomConstants", "load_constants", "default_constants"]

ENV_VAR = "CAVMEM_CONSTANTS"

# Boltzmann constant over unified atomic mass unit, (m/s)^2 per K
KB_OVER_AMU = 1.380649e-23 / 1.66053906892e-27


@dataclass(frozen=True)
class TermConstants:
    """Fine-structure term with its hyperfine and Zeeman constants."""

    label: str
    j: float
    a_mhz: float             # magnetic-dipole hyperfine constant
    b_mhz: float             # electric-quadrupole hyperfine constant
    g_j: float
    gamma_fwhm_mhz: float    # natural linewidth (0 for the ground term)


@dataclass(frozen=True)
class AtomConstants:
    version: int
    nuclear_spin: float
    g_i: float
    mass_amu: float
    mu_b_mhz_per_mt: float
    s12: TermConstants
    p32: TermConstants
    d52: TermConstants
    wavelength_signal_nm: float
    wavelength_control_nm: float

    def term(self, label: str) -> TermConstants:
        key = label.lower().replace("5", "").replace("_", "").replace("/", "")
        for t in (self.s12, self.p32, self.d52):
            if key in (t.label.lower().replace("5", "").replace("/", ""), t.label.lower()):
                return t
        raise KeyError(f"unknown term {label!r}; expected one of 5S1/2, 5P3/2, 5D5/2")


def _parse_kv(text: str) -> dict[str, float]:
    values: dict[str, float] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed constants line: {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = float(val)
    return values


def load_constants(path: str | None = None) -> AtomConstants:
    """Load atom constants from `path`, the env override, or the bundled file."""
    if path is None:
        path = os.environ.get(ENV_VAR)
    if path is None:
        text = resources.files("cavmem.data").joinpath("rb87_constants.cfg").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    kv = _parse_kv(text)

    def term(prefix: str, label: str) -> TermConstants:
        return TermConstants(
            label=label,
            j=kv[f"{prefix}_j"],
            a_mhz=kv[f"{prefix}_a_mhz"],
            b_mhz=kv[f"{prefix}_b_mhz"],
            g_j=kv[f"{prefix}_g_j"],
            gamma_fwhm_mhz=kv[f"{prefix}_gamma_fwhm_mhz"],
        )

    return AtomConstants(
        version=int(kv["version"]),
        nuclear_spin=kv["nuclear_spin"],
        g_i=kv["g_i"],
        mass_amu=kv["mass_amu"],
        mu_b_mhz_per_mt=kv["mu_b_mhz_per_mt"],
        s12=term("s12", "5S1/2"),
        p32=term("p32", "5P3/2"),
        d52=term("d52", "5D5/2"),
        wavelength_signal_nm=kv["wavelength_signal_nm"],
        wavelength_control_nm=kv["wavelength_control_nm"],
    )


_DEFAULT: AtomConstants | None = None


def default_constants() -> AtomConstants:
    """Bundled constants, loaded once per process (env override honoured)."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_constants()
    return _DEFAULT


def set_default_constants(path: str | None) -> AtomConstants:
    """Replace the process-wide default constants (None restores bundled)."""
    global _DEFAULT
    if path is None:
        os.environ.pop(ENV_VAR, None)
    _DEFAULT = load_constants(path)
    return _DEFAULT
