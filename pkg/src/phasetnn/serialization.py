"""Model archives.

A model is stored as an uncompressed ``.npz`` file: a JSON ``header`` entry
describing the model plus one array per coefficient vector and basis
parameter array, so floating point values round-trip bit for bit.
"""
import json

import attr
import numpy as np

from .base import ConfigError, logger
from .core import LstsqReport
from .cptnn import CptnnModel, PhaseModulatedBasis
from .features import FeatureBasis
from .pptnn import PARTS, BandFit, PptnnConfig, PptnnModel
from .problems import CircularInterface

FORMAT_VERSION = 1

_BASIS_ARRAYS = (
    "frequencies",
    "freq_index",
    "trig",
    "directions",
    "offsets",
    "shapes",
    "constant",
)


def _band_key(band):
    return list(band) if isinstance(band, tuple) else band


def _band_value(value):
    return tuple(value) if isinstance(value, list) else value


def _report_header(report):
    if report is None:
        return None
    return {
        "residual_norm": report.residual_norm,
        "effective_rank": report.effective_rank,
        "singular_value_ratio": report.singular_value_ratio,
        "shape": list(report.shape),
    }


def _pptnn_payload(model):
    header = {
        "kind": "pptnn",
        "config": attr.asdict(model.config),
        "setup_time": model.setup_time,
        "skipped": [[_band_key(band), part] for band, part in model.skipped],
        "bands": [],
    }
    arrays = {}
    for i, fit in enumerate(model.bands):
        header["bands"].append(
            {
                "band": _band_key(fit.band),
                "rms_real": fit.rms_real,
                "rms_imag": fit.rms_imag,
                "filter_time": fit.filter_time,
                "train_time": fit.train_time,
                "parts": [part for part in PARTS if fit.basis(part) is not None],
            }
        )
        arrays[f"band{i}_kappa"] = fit.kappa
        for part in PARTS:
            arrays[f"band{i}_{part}_coefficients"] = fit.coefficients(part)
            basis = fit.basis(part)
            if basis is not None:
                arrays[f"band{i}_{part}_directions"] = basis.directions
                arrays[f"band{i}_{part}_offsets"] = basis.offsets
                arrays[f"band{i}_{part}_shapes"] = basis.shapes
    return header, arrays


def _basis_payload(basis, prefix, arrays):
    for name in _BASIS_ARRAYS:
        arrays[f"{prefix}_{name}"] = getattr(basis, name)
    return {
        "m_sub": basis.m_sub,
        "seed": basis.seed,
        "domain": None if basis.domain is None else [list(b) for b in basis.domain],
    }


def _cptnn_payload(model):
    arrays = {"coefficients": model.coefficients}
    header = {
        "kind": "cptnn",
        "basis": _basis_payload(model.basis, "basis", arrays),
        "report": _report_header(model.report),
        "pde_residual": model.pde_residual,
        "boundary_residual": model.boundary_residual,
        "secondary": None,
    }
    if model.secondary is not None:
        basis, coefficients = model.secondary
        geometry = getattr(model.membership, "__self__", None)
        if geometry is None or not hasattr(geometry, "radius"):
            raise ConfigError("only circular interface memberships can be stored")
        header["secondary"] = {
            "basis": _basis_payload(basis, "secondary", arrays),
            "interface": {
                "center": list(geometry.center),
                "radius": geometry.radius,
                "tolerance": geometry.tolerance,
            },
        }
        arrays["secondary_coefficients"] = coefficients
    return header, arrays


def dump_model(model, path):
    """Write a :class:`~phasetnn.pptnn.PptnnModel` or
    :class:`~phasetnn.cptnn.CptnnModel` archive to ``path``."""
    if isinstance(model, PptnnModel):
        header, arrays = _pptnn_payload(model)
    elif isinstance(model, CptnnModel):
        header, arrays = _cptnn_payload(model)
    else:
        raise ConfigError(f"cannot serialise {type(model).__name__}")
    header["format_version"] = FORMAT_VERSION
    with open(path, "wb") as f:
        np.savez(f, header=np.array(json.dumps(header)), **arrays)
    logger.info("wrote {} model to {}", header["kind"], path)


def _load_basis(meta, prefix, data):
    domain = meta["domain"]
    return PhaseModulatedBasis(
        m_sub=meta["m_sub"],
        seed=meta["seed"],
        domain=None if domain is None else tuple(tuple(b) for b in domain),
        **{name: data[f"{prefix}_{name}"] for name in _BASIS_ARRAYS},
    )


def _load_report(meta, coefficients):
    if meta is None:
        return None
    return LstsqReport(
        coefficients=coefficients,
        residual_norm=meta["residual_norm"],
        effective_rank=meta["effective_rank"],
        singular_value_ratio=meta["singular_value_ratio"],
        shape=tuple(meta["shape"]),
    )


def _load_pptnn(header, data):
    config = PptnnConfig(**header["config"])
    bands = []
    for i, meta in enumerate(header["bands"]):
        bases = {}
        for part in PARTS:
            if part in meta["parts"]:
                bases[part] = FeatureBasis(
                    directions=data[f"band{i}_{part}_directions"],
                    offsets=data[f"band{i}_{part}_offsets"],
                    shapes=data[f"band{i}_{part}_shapes"],
                    include_constant=True,
                    seed=config.seed,
                )
            else:
                bases[part] = None
        bands.append(
            BandFit(
                band=_band_value(meta["band"]),
                kappa=data[f"band{i}_kappa"],
                real_coefficients=data[f"band{i}_real_coefficients"],
                imag_coefficients=data[f"band{i}_imag_coefficients"],
                real_basis=bases["real"],
                imag_basis=bases["imag"],
                rms_real=meta["rms_real"],
                rms_imag=meta["rms_imag"],
                filter_time=meta["filter_time"],
                train_time=meta["train_time"],
            )
        )
    skipped = [(_band_value(band), part) for band, part in header["skipped"]]
    return PptnnModel(
        config=config, bands=bands, skipped=skipped, setup_time=header["setup_time"]
    )


def _load_cptnn(header, data):
    coefficients = data["coefficients"]
    secondary = membership = None
    if header["secondary"] is not None:
        meta = header["secondary"]
        secondary = (
            _load_basis(meta["basis"], "secondary", data),
            data["secondary_coefficients"],
        )
        membership = CircularInterface(**meta["interface"]).inside
    return CptnnModel(
        basis=_load_basis(header["basis"], "basis", data),
        coefficients=coefficients,
        report=_load_report(header["report"], coefficients),
        pde_residual=header["pde_residual"],
        boundary_residual=header["boundary_residual"],
        secondary=secondary,
        membership=membership,
    )


def load_model(path):
    """Read a model archive written by :func:`dump_model`."""
    with np.load(path, allow_pickle=False) as archive:
        data = {name: archive[name] for name in archive.files}
    try:
        header = json.loads(str(data.pop("header")))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path} is not a model archive") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise ConfigError(
            f"unsupported model format version {header.get('format_version')!r}"
        )
    if header["kind"] == "pptnn":
        return _load_pptnn(header, data)
    if header["kind"] == "cptnn":
        return _load_cptnn(header, data)
    raise ConfigError(f"unknown model kind {header['kind']!r}")
