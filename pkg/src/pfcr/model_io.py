"""Versioned on-disk model document.

A single JSON text file (format_version 1) holding the fitted inverse model
plus the training responses and design rows the forward-mean estimator needs.
Floats are serialized with Python's shortest round-trip repr, so
save -> load -> save is byte-identical.
"""

import json

import numpy as np

from .errors import InvalidInputError
from .model_core import BasisSpec, DesignBasis, FittedReduction

FORMAT_VERSION = 1


def _mat(a):
    return [[float(v) for v in row] for row in np.atleast_2d(a)]


def _vec(a):
    return [float(v) for v in np.asarray(a).ravel()]


def model_document(fit, basis=None, train_y=None, seed=None):
    """Build the serializable dict for a fit (plus optional training design)."""
    spec = fit.spec
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": fit.kind,
        "d": int(fit.d),
        "spec": None if spec is None else {
            "kind": spec.kind, "degree": spec.degree, "slices": spec.slices,
        },
        "mu": _vec(fit.mu),
        "Gamma": _mat(fit.Gamma),
        "Gamma0": _mat(fit.Gamma0) if fit.Gamma0.size else [],
        "beta": None if fit.beta is None else _mat(fit.beta),
        "Omega2": _mat(fit.Omega2),
        "Omega0_2": _mat(fit.Omega0_2) if fit.Omega0_2.size else [],
        "loglik": float(fit.loglik),
        "converged": bool(fit.converged),
        "n": None if train_y is None else int(len(train_y)),
        "p": int(fit.p),
        "r": None if spec is None else int(spec.r),
        "seed": seed,
        "train_y": None if train_y is None else _vec(train_y),
        "train_F": None if basis is None else _mat(basis.F),
    }
    return doc


def save_model(path, fit, basis=None, train_y=None, seed=None):
    text = json.dumps(model_document(fit, basis, train_y, seed), indent=1)
    with open(path, "w") as fh:
        fh.write(text + "\n")


def load_model(path):
    """Read a model document; returns (fit, basis or None, train_y or None, seed)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != FORMAT_VERSION:
        raise InvalidInputError(
            f"unsupported model format_version {doc.get('format_version')!r}"
        )
    spec = None
    if doc["spec"] is not None:
        spec = BasisSpec(kind=doc["spec"]["kind"], degree=doc["spec"]["degree"],
                         slices=doc["spec"]["slices"])
    p, d = doc["p"], doc["d"]
    fit = FittedReduction(
        kind=doc["kind"],
        d=d,
        mu=np.array(doc["mu"], dtype=float),
        Gamma=np.array(doc["Gamma"], dtype=float).reshape(p, d),
        Gamma0=np.array(doc["Gamma0"], dtype=float).reshape(p, p - d) if doc["Gamma0"]
        else np.zeros((p, 0)),
        beta=None if doc["beta"] is None else np.array(doc["beta"], dtype=float),
        Omega2=np.array(doc["Omega2"], dtype=float).reshape(d, d),
        Omega0_2=np.array(doc["Omega0_2"], dtype=float).reshape(p - d, p - d)
        if doc["Omega0_2"] else np.zeros((0, 0)),
        loglik=float(doc["loglik"]),
        spec=spec,
        converged=bool(doc.get("converged", True)),
    )
    basis = None
    if doc["train_F"] is not None and spec is not None:
        basis = DesignBasis(F=np.array(doc["train_F"], dtype=float), spec=spec)
    train_y = None if doc["train_y"] is None else np.array(doc["train_y"], dtype=float)
    return fit, basis, train_y, doc.get("seed")
