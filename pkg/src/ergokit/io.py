"""JSON encoding of states, Hamiltonians, channels and reports.

Complex numbers are ``[re, im]`` pairs, floats are written with 17
significant digits and an infinite inverse temperature is the string
``"infinite"``.
"""
from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .exceptions import ValidationError
from .spectra import Hamiltonian, PassiveState, validate_state

INFINITE_TAG = "infinite"


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return f'"{INFINITE_TAG}"' if x > 0 else f'"-{INFINITE_TAG}"'
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return format(x, ".17g")


def encode(obj: Any) -> Any:
    """Replace ndarrays and complex scalars by nested lists of JSON-ready values."""
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_complex(obj)
        return encode(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    return obj


def encode_complex(m) -> list:
    m = np.asarray(m, dtype=complex)
    if m.ndim == 0:
        return [float(m.real), float(m.imag)]
    return [encode_complex(row) for row in m]


def decode_complex(data) -> np.ndarray:
    try:
        a = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed complex array: {exc}") from None
    if a.ndim == 0 or a.shape[-1] != 2:
        raise ValidationError("complex entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def dumps(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON text: sorted insertion order kept, 17-digit floats."""
    obj = encode(obj)
    pad = " " * indent

    def emit(v, level):
        if v is None:
            return "null"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, int):
            return str(v)
        if isinstance(v, float):
            return _fmt_float(v)
        if isinstance(v, str):
            return json.dumps(v, ensure_ascii=False)
        if isinstance(v, list):
            if not v:
                return "[]"
            if all(not isinstance(x, (list, dict)) for x in v):
                return "[" + ", ".join(emit(x, level) for x in v) + "]"
            inner = (",\n" + pad * (level + 1)).join(emit(x, level + 1) for x in v)
            return "[\n" + pad * (level + 1) + inner + "\n" + pad * level + "]"
        if isinstance(v, dict):
            if not v:
                return "{}"
            items = [json.dumps(k) + ": " + emit(x, level + 1) for k, x in v.items()]
            return "{\n" + pad * (level + 1) + (",\n" + pad * (level + 1)).join(items) + "\n" + pad * level + "}"
        raise TypeError(f"cannot serialize {type(v).__name__}")

    return emit(obj, 0) + "\n"


def loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON: {exc}") from None


def decode_beta(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() in (INFINITE_TAG, "inf"):
            return math.inf
        raise ValidationError(f"bad inverse temperature {value!r}")
    return float(value)


# ------------------------------------------------------------------ states


def hamiltonian_to_json(h: Hamiltonian) -> dict:
    return {
        "eigenvalues": h.eigenvalues,
        "basis": None if h.basis is None else encode_complex(h.basis),
    }


def hamiltonian_from_json(data) -> Hamiltonian:
    if not isinstance(data, dict) or "eigenvalues" not in data:
        raise ValidationError("hamiltonian needs an 'eigenvalues' list")
    basis = data.get("basis")
    return Hamiltonian(
        np.asarray(data["eigenvalues"], dtype=float),
        None if basis is None else decode_complex(basis),
    )


def state_to_json(h: Hamiltonian, rho) -> dict:
    if isinstance(rho, PassiveState):
        rho = rho.matrix
    rho = np.asarray(rho, dtype=complex)
    return {"dim": rho.shape[0], "hamiltonian": hamiltonian_to_json(h), "rho": encode_complex(rho)}


def state_from_json(data) -> tuple[Hamiltonian, np.ndarray]:
    if not isinstance(data, dict) or "rho" not in data or "hamiltonian" not in data:
        raise ValidationError("state JSON needs 'hamiltonian' and 'rho'")
    h = hamiltonian_from_json(data["hamiltonian"])
    rho = validate_state(decode_complex(data["rho"]))
    if "dim" in data and int(data["dim"]) != rho.shape[0]:
        raise ValidationError("declared dim does not match rho")
    h.check_dim(rho)
    return h, rho


# ---------------------------------------------------------------- channels


def channel_to_json(ch) -> dict:
    return {"dim": ch.dim, "label": ch.label, "kraus": encode_complex(ch.kraus)}


def channel_from_json(data, h: Hamiltonian | None = None):
    """A KrausChannel from ``{"kraus": ...}`` or a named map from ``{"family": ...}``."""
    from . import channels as chs

    if not isinstance(data, dict):
        raise ValidationError("channel JSON must be an object")
    if "kraus" in data:
        ch = chs.KrausChannel(decode_complex(data["kraus"]), label=str(data.get("label", "")))
        if "dim" in data and int(data["dim"]) != ch.dim:
            raise ValidationError("declared dim does not match Kraus operators")
        return ch
    if "family" not in data:
        raise ValidationError("channel JSON needs 'kraus' or 'family'")
    if h is None:
        raise ValidationError("named channels need a Hamiltonian")
    name = data["family"]
    try:
        if name == "dephasing":
            return chs.dephasing(h, data.get("representation", "projectors"))
        if name == "partial_dephasing":
            return chs.partial_dephasing(h, decode_complex(data["coeffs"]))
        if name == "thermalizing":
            return chs.thermalizing(h, decode_beta(data["beta"]))
        if name == "thermalizing_mixture":
            betas = [decode_beta(b) for b in data["betas"]]
            w = data.get("weights", [1.0 / len(betas)] * len(betas))
            return chs.mixture([chs.thermalizing(h, b) for b in betas], w)
        if name == "lambda_beta":
            beta = decode_beta(data["beta"])
            sp = data.get("sigma_prime")
            sp = chs.coherent_gibbs(h, beta) if sp is None else decode_complex(sp)
            return chs.lambda_beta_map(h, beta, sp)
        if name == "lambda_beta_tilde":
            return chs.lambda_beta_tilde_family(h, float(data.get("offset", 0.5)))
        if name == "extraction":
            return chs.extraction_family(h)
        if name == "swap":
            return chs.level_swap(h, int(data.get("i", 0)), int(data.get("j", -1)))
        if name == "identity":
            return chs.identity_channel(h.dim)
        if name == "unitary":
            return chs.unitary_channel(decode_complex(data["u"]))
        if name == "random":
            return chs.random_channel(h.dim, int(data.get("kraus_rank", 1)), int(data.get("seed", 0)))
        if name == "thermal_operation":
            return chs.thermal_operation(
                h,
                hamiltonian_from_json(data["environment"]),
                decode_beta(data["beta"]),
                int(data.get("seed", 0)),
            )
    except KeyError as exc:
        raise ValidationError(f"family {name!r} is missing parameter {exc}") from None
    raise ValidationError(f"unknown channel family {name!r}")
