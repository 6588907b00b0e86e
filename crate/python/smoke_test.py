"""Builds the extension module, imports it and exercises the main entry points.

    python3 python/smoke_test.py [--release] [--skip-build]
"""

import argparse
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build(release: bool) -> Path:
    cmd = ["cargo", "build", "-p", "oodbench-python", "--features", "extension-module"]
    if release:
        cmd.append("--release")
    subprocess.run(cmd, cwd=ROOT, check=True)
    profile = "release" if release else "debug"
    for name in ("liboodbench.so", "liboodbench.dylib"):
        lib = ROOT / "target" / profile / name
        if lib.exists():
            return lib
    raise SystemExit(f"no built library under target/{profile}")


def check(mod, workdir: Path) -> None:
    assert math.isclose(mod.nll_loss((0.0, 1.0, 1.0, 0.5), 0.0), 1.0397207, abs_tol=1e-6)
    assert mod.reg_loss((0.0, 1.0, 1.0, 0.5), 1.0) == 3.0
    assert mod.eviu((0.0, 1.0, 2.0, 1.0)) == 2.0
    assert len(mod.der_loss_grad((0.0, 1.0, 2.0, 1.0), 0.5)) == 4
    assert abs(mod.spearman([1, 2, 2, 3], [1, 3, 2, 4]) - 0.9487) < 1e-4

    try:
        mod.eviu((0.0, 1.0, 0.5, 1.0))
    except ValueError as e:
        assert "domain" in str(e)
    else:
        raise AssertionError("alpha <= 1 must raise")

    data = mod.Dataset.synthetic(60, seed=1)
    assert len(data) == 60 and len(data.targets) == 60
    x = data.soap()
    assert len(x) == 60

    scenario = mod.loco_split(x, 3, seed=2)
    assert len(scenario) == 3
    tested = sorted(i for t in scenario.tasks for i in t.test)
    assert tested == list(range(60))
    again = mod.Scenario.from_json(scenario.to_json())
    assert again.to_json() == scenario.to_json()

    sparse = mod.sparse_split("SYS", y=data.targets, n_tasks=10, seed=3)
    assert all(len(t.test) == 1 for t in sparse.tasks)

    passes = [[(1.0, 1.0, 2.0, 1.0), (3.0, 2.0, 3.0, 4.0)], [(3.0, 3.0, 4.0, 3.0), (3.0, 2.0, 3.0, 4.0)]]
    report = mod.score(passes, [2.0, 1.0])
    assert report["mae"] == 1.5 and report["d_mae"] == 1.0 and report["d_unc"] == 0.5

    records = workdir / "data.jsonl"
    records.write_text(data.to_records())
    assert mod.Dataset.load(records).targets == data.targets

    config = workdir / "run.toml"
    config.write_text(
        f'seed = 4\noutput_dir = "{workdir / "out"}"\npasses = 4\n'
        f'[data]\npath = "{records}"\n[split]\nstrategy = "SOAP-LOCO"\nk = 2\n'
        "[model]\nembed_dim = 8\nn_layers = 1\nn_rbf = 8\n[train]\nepochs = 3\n"
    )
    result = mod.run_benchmark(config)
    assert len(result["tasks"]) == 2
    assert len(result["content_hash"]) == 64
    assert result["summary"]["n_samples"] == 60


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--release", action="store_true")
    ap.add_argument("--skip-build", action="store_true")
    args = ap.parse_args()
    profile = "release" if args.release else "debug"
    lib = ROOT / "target" / profile / "liboodbench.so" if args.skip_build else build(args.release)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        shutil.copy(lib, tmp / "oodbench.so")
        sys.path.insert(0, str(tmp))
        import oodbench

        check(oodbench, tmp)
        print(f"oodbench {oodbench.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
