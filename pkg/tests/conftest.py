import time

import pytest

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = []


def record(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def generic_params(cfg, rng, bias_std=0.1):
    """Initialized parameters moved to a generic point of parameter space.

    Initialization zeroes every bias and the SDF head, so fresh networks
    predict exactly 0 and sit on ReLU kinks. Tests of forward behavior or
    gradients draw a Kaiming head and small random biases on top.
    """
    import numpy as np

    from artik.spasdf import init_params
    from artik.tensor import kaiming_uniform

    params = init_params(cfg, rng)
    params["fa.out.W"] = kaiming_uniform(rng, cfg.artic_width, 1)
    for k in params:
        if k.endswith(".b"):
            params[k] = rng.normal(0.0, bias_std, size=params[k].shape)
    return params


class DeskRun:
    """One end-to-end desk-profile pipeline run on the builtin hinge."""

    def __init__(self, root, seed):
        from artik.datagen import Manifest
        from artik.pipeline import run_pipeline
        from artik.spasdf import SpasdfModel

        self.root = root
        self.seed = seed
        t0 = time.perf_counter()
        self.summary = run_pipeline("builtin:hinge", seed, root, profile="desk")
        self.seconds = time.perf_counter() - t0
        self.manifest = Manifest.load(root / "data")
        self.model = SpasdfModel.load(root / "model.bin")


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    return DeskRun(tmp_path_factory.mktemp("desk7"), 7)
