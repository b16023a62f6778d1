"""Acceptance criteria, each bound to a seeded bench scenario.

Run under pytest (one PASS/FAIL line per criterion appears in the terminal
summary) or directly: ``python tests/test_acceptance.py``.
"""
import sys

import pytest

from blalab.bench import run_scenario

CRITERIA = [
    (1, "design_arithmetic", "experiment-design arithmetic"),
    (2, "lpm_accuracy", "noiseless LPM accuracy"),
    (3, "leakage_ladder", "transient error decreases with record length"),
    (4, "variance_calibration", "variance calibration"),
    (5, "concat_correctness", "concatenation correctness"),
    (6, "concat_vs_single", "variance ordering concat vs single"),
    (7, "averaged_vs_concat", "averaged vs concatenated equivalence"),
    (8, "bla_oracle", "BLA oracle"),
    (9, "distortion_selectivity", "distortion selectivity"),
    (10, "order_select_3", "order selection"),
    (11, "determinism", "determinism"),
]


def _line(num, title, result) -> str:
    shown = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                      for k, v in sorted(result.metrics.items()))
    verdict = "PASS" if result.passed else "FAIL"
    tail = f" [{'; '.join(result.failures)}]" if result.failures else ""
    return f"criterion {num:2d} {verdict} {title}: {shown}{tail}"


@pytest.mark.parametrize("num,scenario,title", CRITERIA, ids=[c[1] for c in CRITERIA])
def test_criterion(num, scenario, title, acceptance_lines):
    result = run_scenario(scenario)
    line = _line(num, title, result)
    print(line)
    acceptance_lines.append(line)
    assert result.passed, line


if __name__ == "__main__":
    ok = True
    for num, scenario, title in CRITERIA:
        r = run_scenario(scenario)
        print(_line(num, title, r), flush=True)
        ok &= r.passed
    sys.exit(0 if ok else 1)
