import numpy as np
import pytest

from rednet.model import EdgeReport, label_matrix
from rednet.synthgen import (
    T_ABSENT,
    T_COMMON,
    T_OPPOSITE,
    T_UNIQUE1,
    T_UNIQUE2,
    PairConfig,
    TruthLabels,
    simulate_pair,
)

NODES = ("A", "B", "C", "D")


def _mat(entries):
    m = np.zeros((4, 4))
    for (src, dst), v in entries.items():
        m[NODES.index(src), NODES.index(dst)] = v
    return m


def handcrafted_case():
    """Four nodes, twelve ordered edges, every outcome represented.

    Truth (source -> target):
      A->B common 0.5/0.5, D->A common 0.3/0.3, A->C opposite 0.5/-0.5,
      B->C unique to network 1 (0.4), C->D unique to network 2 (0.6).
    Estimate:
      A->B common, A->C differential, B->C common, D->A differential
      (beta_minus 0.1), B->A common (spurious), C->B differential (spurious),
      C->D missed.

    Counts by hand:
      differential  truth {A->C, B->C, C->D}, called {A->C, D->A, C->B}
                    tp 1, fp 2, fn 2, tn 7
      common        truth {A->B, D->A}, called {A->B, B->C, B->A}
                    tp 1, fp 2, fn 1, tn 8
      average       truth {A->B, B->C, C->D, D->A} (A->C sums to zero),
                    called {A->B, B->C, D->A, B->A}
                    tp 3, fp 1, fn 1, tn 7
    """
    g1 = _mat({("A", "B"): 0.5, ("D", "A"): 0.3, ("A", "C"): 0.5, ("B", "C"): 0.4})
    g2 = _mat({("A", "B"): 0.5, ("D", "A"): 0.3, ("A", "C"): -0.5, ("C", "D"): 0.6})
    codes = np.full((4, 4), T_ABSENT, dtype=np.int8)
    for e, c in {("A", "B"): T_COMMON, ("D", "A"): T_COMMON, ("A", "C"): T_OPPOSITE, ("B", "C"): T_UNIQUE1,
                 ("C", "D"): T_UNIQUE2}.items():
        codes[NODES.index(e[0]), NODES.index(e[1])] = c
    truth = TruthLabels(g1, g2, codes, np.arange(4), NODES)

    bp = _mat({("A", "B"): 0.5, ("B", "C"): 0.2, ("D", "A"): 0.3, ("B", "A"): 0.1})
    bm = _mat({("A", "C"): 0.5, ("D", "A"): 0.1, ("C", "B"): 0.2})
    est = EdgeReport(NODES, label_matrix(bp, bm), bp, bm, bp + bm, bp - bm)
    expected = {
        "differential": dict(tp=1, fp=2, fn=2, tn=7),
        "common": dict(tp=1, fp=2, fn=1, tn=8),
        "average": dict(tp=3, fp=1, fn=1, tn=7),
    }
    return est, truth, expected


@pytest.fixture
def handcrafted():
    return handcrafted_case()


@pytest.fixture(scope="session")
def small_sim():
    cfg = PairConfig(p_total=10, sub_p=None, avg_degree=1.5, n_opposite=2, n_unique_each=2, n1=150, n2=150, seed=7)
    return simulate_pair(cfg)


# ---------------------------------------------------------------------------
# acceptance verdicts, echoed in the terminal summary

_VERDICTS = {}


@pytest.fixture
def verdict():
    def record(key, ok, detail):
        _VERDICTS[key] = f"criterion {key}: {'PASS' if ok else 'FAIL'} ({detail})"
        print(_VERDICTS[key])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[key])
