import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lnpair.efficiency import default_sellmeier
from lnpair.tensor import expand, lithium_niobate_d

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def ln_tensor():
    return expand(lithium_niobate_d())


@pytest.fixture(scope="session")
def coeffs():
    return default_sellmeier()


def brute_rotate(d, R):
    """Explicit triple sum d'_ijk = sum_abc R_ia R_jb R_kc d_abc."""
    out = np.zeros((3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                s = 0.0
                for a in range(3):
                    for b in range(3):
                        for c in range(3):
                            s += R[i, a] * R[j, b] * R[k, c] * d[a, b, c]
                out[i, j, k] = s
    return out


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[report.nodeid] = report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for nodeid, rep in sorted(_ACCEPTANCE.items(), key=lambda kv: kv[0].split("criterion_")[-1]):
        name = nodeid.split("::")[-1].replace("test_criterion_", "")
        num, _, label = name.partition("_")
        detail = dict(rep.user_properties).get("detail", "")
        status = "PASS" if rep.passed else "FAIL"
        tr.write_line(f"{status} criterion {num} ({label.replace('_', ' ')}): {detail}")
