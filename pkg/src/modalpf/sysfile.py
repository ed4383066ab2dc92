"""System-definition documents.

A system file is YAML (JSON is accepted too, being a YAML subset)::

    name: perko-example
    dimension: 2
    linear:            # optional when degree-1 terms are listed
      - [-1, 0]
      - [0, 1]
    terms:             # component is 1-based; exponents has one entry per state
      - {component: 2, exponents: [2, 0], coeff: 1.0}
    metadata: {source: textbook}
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import DimensionMismatch, SchemaError
from .polynomial import PolynomialVectorField

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
LINEAR_AGREEMENT_TOL = 1e-12
_KEYS = {"name", "dimension", "linear", "terms", "metadata", "schema_version"}
_TERM_KEYS = {"component", "exponents", "coeff"}


@dataclass(frozen=True)
class SystemTerm:
    component: int  # 1-based
    exponents: tuple[int, ...]
    coeff: float


@dataclass(frozen=True)
class SystemSpec:
    name: str
    dimension: int
    linear: tuple[tuple[float, ...], ...] | None
    terms: tuple[SystemTerm, ...]
    metadata: dict = field(default_factory=dict, compare=True, hash=False)

    def linear_matrix(self) -> np.ndarray:
        n = self.dimension
        if self.linear is not None:
            return np.array(self.linear, dtype=float).reshape(n, n)
        A = np.zeros((n, n))
        for t in self.terms:
            if sum(t.exponents) == 1:
                A[t.component - 1, t.exponents.index(1)] = t.coeff
        return A

    def to_field(self) -> PolynomialVectorField:
        n = self.dimension
        A = self.linear_matrix()
        terms = {}
        for s in range(n):
            for k in range(n):
                if A[s, k] != 0:
                    terms[(s, tuple(int(j == k) for j in range(n)))] = float(A[s, k])
        for t in self.terms:
            if sum(t.exponents) >= 2:
                terms[(t.component - 1, t.exponents)] = t.coeff
        degree = max([sum(m) for _, m in terms] + [1])
        return PolynomialVectorField(n, degree, terms)


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise SchemaError(f"{where}: value must be finite")
    return value


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{where}: expected an integer, got {value!r}")
    return value


def validate(doc) -> SystemSpec:
    """Turn a parsed document into a :class:`SystemSpec` or raise :class:`SchemaError`."""
    if not isinstance(doc, dict):
        raise SchemaError("system document must be a mapping")
    unknown = set(doc) - _KEYS
    if unknown:
        raise SchemaError(f"unknown top-level keys: {sorted(unknown)}")
    if "dimension" not in doc:
        raise SchemaError("dimension: required")
    n = _integer(doc["dimension"], "dimension")
    if n < 1:
        raise SchemaError("dimension: must be positive")
    name = str(doc.get("name", "system"))
    metadata = doc.get("metadata") or {}
    if not isinstance(metadata, dict):
        raise SchemaError("metadata: expected a mapping")

    linear = None
    if doc.get("linear") is not None:
        rows = doc["linear"]
        if not isinstance(rows, list) or len(rows) != n:
            raise DimensionMismatch(f"linear: expected {n} rows")
        out = []
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != n:
                raise DimensionMismatch(f"linear[{i}]: expected {n} entries")
            out.append(tuple(_number(v, f"linear[{i}][{j}]") for j, v in enumerate(row)))
        linear = tuple(out)

    raw_terms = doc.get("terms") or []
    if not isinstance(raw_terms, list):
        raise SchemaError("terms: expected a list")
    merged: dict[tuple[int, tuple[int, ...]], float] = {}
    for idx, t in enumerate(raw_terms):
        where = f"terms[{idx}]"
        if not isinstance(t, dict):
            raise SchemaError(f"{where}: expected a mapping")
        missing = _TERM_KEYS - set(t)
        if missing:
            raise SchemaError(f"{where}: missing keys {sorted(missing)}")
        extra = set(t) - _TERM_KEYS
        if extra:
            raise SchemaError(f"{where}: unknown keys {sorted(extra)}")
        comp = _integer(t["component"], f"{where}.component")
        if not 1 <= comp <= n:
            raise SchemaError(f"{where}.component: must lie in 1..{n}")
        exps = t["exponents"]
        if not isinstance(exps, list):
            raise SchemaError(f"{where}.exponents: expected a list")
        if len(exps) != n:
            raise DimensionMismatch(f"{where}.exponents: expected {n} entries, got {len(exps)}")
        exps = tuple(_integer(e, f"{where}.exponents[{j}]") for j, e in enumerate(exps))
        if min(exps) < 0:
            raise SchemaError(f"{where}.exponents: must be nonnegative")
        if sum(exps) < 1:
            raise SchemaError(f"{where}.exponents: constant terms are not allowed (f(0) = 0)")
        coeff = _number(t["coeff"], f"{where}.coeff")
        key = (comp, exps)
        if key in merged:
            log.warning("%s duplicates component %d exponents %s; coefficients summed", where, comp, list(exps))
            merged[key] += coeff
        else:
            merged[key] = coeff

    if linear is not None:
        for (comp, exps), c in merged.items():
            if sum(exps) == 1:
                k = exps.index(1)
                if abs(linear[comp - 1][k] - c) > LINEAR_AGREEMENT_TOL:
                    raise SchemaError(
                        f"terms: degree-1 term (component {comp}, exponents {list(exps)}) = {c} "
                        f"disagrees with linear[{comp - 1}][{k}] = {linear[comp - 1][k]}"
                    )

    terms = tuple(SystemTerm(c, e, v) for (c, e), v in merged.items())
    return SystemSpec(name, n, linear, terms, dict(metadata))


def parse_system(source: str | os.PathLike) -> SystemSpec:
    """Parse a system file path, or the document text itself."""
    text = None
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source):
        path = Path(source)
        if path.exists():
            text = path.read_text()
        elif isinstance(source, os.PathLike) or source.endswith((".yaml", ".yml", ".json")):
            raise SchemaError(f"system file not found: {source}")
    if text is None:
        text = str(source)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"malformed system document: {exc}") from exc
    return validate(doc)


def to_document(spec: SystemSpec) -> dict:
    doc: dict = {"schema_version": SCHEMA_VERSION, "name": spec.name, "dimension": spec.dimension}
    if spec.linear is not None:
        doc["linear"] = [list(row) for row in spec.linear]
    doc["terms"] = [
        {"component": t.component, "exponents": list(t.exponents), "coeff": t.coeff} for t in spec.terms
    ]
    doc["metadata"] = dict(spec.metadata)
    return doc


def serialize_system(spec: SystemSpec) -> str:
    return yaml.safe_dump(to_document(spec), sort_keys=False, default_flow_style=None)


def spec_from_field(f: PolynomialVectorField, name: str = "system", metadata: dict | None = None) -> SystemSpec:
    """Build a spec with an explicit linear matrix and the nonlinear terms of a real field."""
    A = f.linear_part()
    linear = tuple(tuple(float(v) for v in row) for row in np.real(A))
    terms = tuple(
        SystemTerm(s + 1, tuple(m), float(np.real(c))) for (s, m), c in sorted(f.nonlinear_terms().items())
    )
    return SystemSpec(name, f.n, linear, terms, dict(metadata or {}))
