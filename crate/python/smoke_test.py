"""Smoke test for the `pfp` extension module.

Build first, either with `maturin develop -m crates/py/Cargo.toml` or with
`cargo build -p pfp-py`; in the latter case the shared library is picked up
from target/ directly.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent

SMALL = """
seed = 11

[world]
districts = 2
schools = 10
potential_applicants = 60
advertised_counts = { p4p = 2, fw = 2, mixed = 2 }
experienced_counts = { p4p = 5, fw = 5 }

[effects]
experienced = 0.2
"""


def load():
    try:
        import pfp  # noqa: F401

        return pfp
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libpfp.so", "libpfp.dylib", "pfp.dll"):
            lib = ROOT / "target" / profile / name
            if lib.exists():
                loader = importlib.machinery.ExtensionFileLoader("pfp", str(lib))
                spec = importlib.util.spec_from_loader("pfp", loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                sys.modules["pfp"] = module
                return module
    sys.exit("pfp extension not found; build crates/py first")


def main():
    pfp = load()
    print("pfp", pfp.__version__)

    cfg = pfp.Config(SMALL)
    cfg.validate()
    assert cfg.seed == 11

    panel = pfp.Panel.simulate(cfg)
    counts = panel.row_counts()
    assert counts, counts
    print(panel)

    scores = panel.bn_scores(1, cfg)
    assert all(0.0 <= t["score"] <= 1.0 for t in scores["teachers"])
    ledger = panel.awards(1, cfg)
    assert ledger is not None

    fit = panel.fit("pupil_learning", cfg)
    names = [c["name"] for c in fit["coefficients"]]
    assert "T_E" in names, names

    ri = panel.randomization_test("pupil_learning", draws=19, seed=3, config=cfg)
    assert 0.0 < ri["p_value"] <= 1.0

    with tempfile.TemporaryDirectory() as d:
        panel.write(d)
        again = pfp.Panel.load(d)
        assert again.row_counts() == counts

    assert pfp.ks([0.0, 1.0, 2.0], [0.0, 1.0, 2.0]) == 0.0
    assert pfp.ks([0.0, 1.0], [5.0, 6.0]) == 1.0

    lo = pfp.boundary("p4p", 5.0)
    assert math.isfinite(lo)
    parts = pfp.decomposition(draws=20000, seed=1)
    assert parts["selection_fw"]["mean"] < 0.0

    test = pfp.permutation_test([0.0, 0.1, 0.2, 5.0, 5.1, 5.2], [0, 0, 0, 1, 1, 1], draws=999, seed=2)
    assert test["p_value"] <= 0.1, test["p_value"]

    try:
        pfp.Config("seed = -1")
    except pfp.ValidationError:
        pass
    else:
        raise AssertionError("negative seed accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
