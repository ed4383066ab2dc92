import numpy as np
import pytest

from modalpf.polynomial import PolynomialVectorField

# ---- acceptance report -------------------------------------------------------------

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def record():
    """Record one PASS/FAIL line per acceptance criterion, printed at session end."""

    def _record(criterion: int, ok: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[criterion] = line
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])


# ---- shared systems ----------------------------------------------------------------


def random_distinct(rng: np.random.Generator, n: int, gap: float = 1e-2) -> np.ndarray:
    """Gaussian matrix whose eigenvalues are pairwise at least ``gap`` apart."""
    while True:
        A = rng.standard_normal((n, n))
        lam = np.linalg.eigvals(A)
        d = np.abs(lam[:, None] - lam[None, :]) + np.eye(n) * 1e9
        if d.min() > gap:
            return A


A_SINGULAR = np.array([[1.0, 1.0], [-2.0, -2.0]])

TEXTBOOK_YAML = """\
name: textbook
dimension: 2
linear: [[-1, 0], [0, 1]]
terms:
  - {component: 2, exponents: [2, 0], coeff: 1.0}
"""

NL1_YAML = """\
name: nl1
dimension: 2
linear: [[1, 1], [0, 3]]
terms:
  - {component: 1, exponents: [1, 1], coeff: 0.5}
  - {component: 1, exponents: [0, 2], coeff: -0.25}
  - {component: 2, exponents: [2, 0], coeff: 0.5}
  - {component: 2, exponents: [1, 1], coeff: 0.25}
"""


def textbook_field() -> PolynomialVectorField:
    # dy/dt = -y, dz/dt = z + y^2 with x = (y, z)
    return PolynomialVectorField(2, 2, {(0, (1, 0)): -1.0, (1, (0, 1)): 1.0, (1, (2, 0)): 1.0})


def nl1_field() -> PolynomialVectorField:
    return PolynomialVectorField(2, 2, {
        (0, (1, 0)): 1.0, (0, (0, 1)): 1.0, (1, (0, 1)): 3.0,
        (0, (1, 1)): 0.5, (0, (0, 2)): -0.25, (1, (2, 0)): 0.5, (1, (1, 1)): 0.25,
    })


@pytest.fixture
def system_files(tmp_path):
    paths = {}
    docs = {
        "textbook": TEXTBOOK_YAML,
        "nl1": NL1_YAML,
        "singular": "name: singular\ndimension: 2\nlinear: [[1, 1], [-2, -2]]\n",
        "osc": "name: osc\ndimension: 3\nlinear: [[-0.1, 1, 0], [-1, -0.1, 0], [0, 0.5, -2]]\n",
        "zero": "name: zero\ndimension: 2\nlinear: [[0, 1], [0, -1]]\n"
                "terms:\n  - {component: 1, exponents: [2, 0], coeff: 1}\n",
    }
    for name, text in docs.items():
        p = tmp_path / f"{name}.yaml"
        p.write_text(text)
        paths[name] = p
    return paths
