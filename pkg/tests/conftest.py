import re

_CRITERION_TITLES = {
    1: "gradient integrity (full pipeline vs. finite differences)",
    2: "equation fidelity (fusion dimensions, zero-weight values)",
    3: "loss composition (lambda * cls + target)",
    4: "frame pretraining accuracy (held-out top-1 > 0.90)",
    5: "ablation ordering and margin over seeds 1-5",
    6: "metrics oracle (brute-force recount, exact)",
    7: "determinism (byte-identical documents and checkpoints)",
    8: "concept analysis (literal vs. contextual top-1 frames)",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[int, str] = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if getattr(report, "when", "call") not in ("call", "setup"):
                continue
            match = re.search(r"test_criterion_(\d+)", nodeid)
            if not match:
                continue
            number = int(match.group(1))
            verdict = "PASS" if status == "passed" else "FAIL"
            if outcomes.get(number) != "FAIL":
                outcomes[number] = verdict
    if not outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(outcomes):
        title = _CRITERION_TITLES.get(number, "")
        terminalreporter.write_line(
            f"criterion {number} [{outcomes[number]}] {title}"
        )
