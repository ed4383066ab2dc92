"""Rendering of analysis results as tables, CSV and JSON.

All numbers are printed with 12 significant digits; complex values appear as
``a+bi`` in tables and CSV cells and as separate real/imag arrays in JSON.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .eigensystem import EigenSystem
from .participation import ParticipationMatrix

SCHEMA_VERSION = 1
PF_CSV_HEADER = ["state", "mode", "real", "imag", "stderr_real", "stderr_imag", "kind", "method"]


def num(x) -> str:
    return format(float(x) + 0.0, ".12g")  # + 0.0 turns -0.0 into 0.0


def cnum(z) -> str:
    z = complex(z)
    if z.imag == 0:
        return num(z.real)
    return f"{num(z.real)}{'+' if z.imag >= 0 else '-'}{num(abs(z.imag))}i"


def jnum(x):
    x = float(x)
    if not np.isfinite(x):
        return None if np.isnan(x) else ("inf" if x > 0 else "-inf")
    return float(format(x, ".12g")) + 0.0


def jarray(a) -> list:
    return [jarray(v) for v in a] if np.ndim(a) > 0 else jnum(a)


def jcomplex(a) -> dict:
    a = np.asarray(a)
    return {"real": jarray(a.real), "imag": jarray(np.imag(a))}


def dump_json(doc: dict) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **doc}, indent=2) + "\n"


def dump_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def table(header: list[str], rows: list[list[str]]) -> str:
    cols = [header] + rows
    widths = [max(len(str(r[j])) for r in cols) for j in range(len(header))]
    lines = ["  ".join(str(v).rjust(w) for v, w in zip(r, widths)) for r in cols]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# ---- participation matrices --------------------------------------------------------


def pf_view(pm: ParticipationMatrix, E: EigenSystem, pair_sum: bool):
    """Mode labels, values and stderr, optionally with conjugate pairs combined."""
    if pair_sum:
        return pm.pair_summed(E)
    labels = [str(i + 1) for i in range(pm.n)]
    return labels, pm.values, pm.stderr


def pf_rows(pm: ParticipationMatrix, E: EigenSystem, pair_sum: bool) -> list[list]:
    labels, values, err = pf_view(pm, E, pair_sum)
    rows = []
    for k in range(values.shape[0]):
        for i, lab in enumerate(labels):
            v = complex(values[k, i])
            e = complex(err[k, i]) if err is not None else None
            rows.append([
                k + 1, lab, num(v.real), num(v.imag),
                num(e.real) if e is not None else "", num(e.imag) if e is not None else "",
                pm.kind.value, pm.method.value,
            ])
    return rows


def pf_json(pm: ParticipationMatrix, E: EigenSystem, pair_sum: bool) -> dict:
    labels, values, err = pf_view(pm, E, pair_sum)
    doc = {
        "kind": pm.kind.value,
        "method": pm.method.value,
        "modes": labels,
        "values": jcomplex(values),
    }
    if err is not None:
        doc["stderr"] = jcomplex(err)
    if pm.provenance:
        doc["provenance"] = pm.provenance
    return doc


def pf_table(pm: ParticipationMatrix, E: EigenSystem, pair_sum: bool, title: str) -> str:
    labels, values, err = pf_view(pm, E, pair_sum)
    header = ["state"] + [f"mode {lab}" for lab in labels]
    rows = [[str(k + 1)] + [cnum(v) for v in values[k]] for k in range(values.shape[0])]
    out = f"{title} ({pm.kind.value}, {pm.method.value})\n" + table(header, rows)
    if err is not None:
        rows = [[str(k + 1)] + [cnum(v) for v in err[k]] for k in range(err.shape[0])]
        out += "standard errors\n" + table(header, rows)
    return out
