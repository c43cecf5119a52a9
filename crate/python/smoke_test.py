"""Smoke test for the utm_heat_py extension.

Build first with `cargo build --release -p utm-heat-py`; the script loads the
module from an installed wheel if present, otherwise from target/release.
"""

import importlib.util
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load():
    try:
        import utm_heat_py

        return utm_heat_py
    except ImportError:
        pass
    for name in ("libutm_heat_py.so", "libutm_heat_py.dylib", "utm_heat_py.dll"):
        built = ROOT / "target" / "release" / name
        if built.exists():
            suffix = ".pyd" if name.endswith(".dll") else ".so"
            target = pathlib.Path(tempfile.mkdtemp()) / f"utm_heat_py{suffix}"
            shutil.copy(built, target)
            spec = importlib.util.spec_from_file_location("utm_heat_py", target)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("utm_heat_py not built; run `cargo build --release -p utm-heat-py`")


def main():
    m = load()

    a = m.Problem.example("A")
    assert a.n_layers == 3 and a.contact == "perfect"
    assert m.Problem.from_json(a.to_json()).breakpoints == a.breakpoints

    times = [0.01, 0.1, 1.0]
    sol = m.solve(a, times, grid=101)
    ref = m.fourier_series(a, times, grid=101)
    for t in times:
        err = m.relative_error(sol, ref, t, exclude_endpoints=True)
        assert err <= 1e-6, (t, err)
    assert sol.diagnostics["endpoint_caveat"] is True
    assert len(sol.values) == 3 and len(sol.values[0]) == 101
    assert len(sol.interfaces) == 2 * len(times)

    d = m.Problem.example("D")
    x = d.output_grid(41)
    utm = m.solve(d, [0.1], x=x)
    fd = m.crank_nicolson(d, [0.1], x=x, cells_per_layer=100, dt=1e-3)
    assert m.relative_error(utm, fd, 0.1, exclude_endpoints=True) <= 1e-3

    steady = m.steady_state(a, [0.25, 0.5])
    late = m.solve(a, [5.0], x=[0.25, 0.5])
    assert all(math.isclose(u, s, abs_tol=1e-6) for u, s in zip(late.values[0], steady))

    try:
        m.Problem.from_json('{"layers": {"breakpoints": [0, 0.5, 0.5], "sigmas": [1, 1]}}')
    except ValueError:
        pass
    else:
        raise AssertionError("invalid problem accepted")

    print("utm_heat_py smoke test passed")


if __name__ == "__main__":
    main()
