from fractions import Fraction

import pytest

from polyaurn.schemes import make_builtin_scheme


def criterion_schemes():
    """The built-in schemes exercised by the acceptance criteria."""
    out = []
    for alpha in ("0", "3/10", "1/2"):
        for theta in ("1/2", "1", "2"):
            out.append(make_builtin_scheme("pitman_yor", alpha=alpha, theta=theta))
    for mu in ("1/2", "1", "5/2"):
        out.append(make_builtin_scheme("blackwell_macqueen", mu_total=mu))
    for N in (2, 3, 10):
        out.append(make_builtin_scheme("fisher", N=N, theta=1))
    for N in (1, 3):
        out.append(make_builtin_scheme("random_n", N=N))
    out.append(make_builtin_scheme("iid"))
    return out


def scheme_id(s):
    params = ",".join(f"{k}={v}" for k, v in s.params.items())
    return f"{s.name}({params})"


SCHEMES = criterion_schemes()


@pytest.fixture
def py_half():
    return make_builtin_scheme("pitman_yor", alpha=Fraction(1, 2), theta=1)


@pytest.fixture
def dp1():
    return make_builtin_scheme("blackwell_macqueen", mu_total=1)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
