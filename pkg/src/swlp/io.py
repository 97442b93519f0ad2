"""System JSON (``swlp-sys-v1``) and trajectory CSV."""
import json

import numpy as np

from .spaces import DiscreteSpace, GeneratorRealization, LinearMap
from .stochastics import TimeGrid
from .system import StochasticSystemRealization

SYSTEM_SCHEMA = "swlp-sys-v1"


class FormatError(ValueError):
    pass


def encode_array(a):
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return {"re": a.real.tolist(), "im": a.imag.tolist()}
    return a.tolist()


def decode_array(obj):
    if isinstance(obj, dict):
        if set(obj) != {"re", "im"}:
            raise FormatError(f"complex array needs exactly 're' and 'im', got {sorted(obj)}")
        return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    return np.asarray(obj, dtype=float)


def _space(s):
    return {"label": s.label, "dim": s.dim, "gram": encode_array(s.gram), "complex": s.is_complex}


def _read_space(d):
    try:
        return DiscreteSpace(int(d["dim"]), decode_array(d["gram"]), d.get("label", "H"), bool(d.get("complex", False)))
    except KeyError as exc:
        raise FormatError(f"space entry lacks {exc}") from None


def _pieces(coeffs):
    """Shortest piecewise-constant description of a per-step coefficient stack."""
    n = coeffs.shape[0]
    for p in range(1, n + 1):
        if n % p == 0:
            reduced = coeffs[:: n // p]
            if np.array_equal(np.repeat(reduced, n // p, axis=0), coeffs):
                return reduced
    return coeffs


def system_to_dict(sys, seed=None, extensions=None):
    if sys.adapted_F1 is not None or sys.adapted_F2 is not None:
        raise FormatError("adapted coefficient hooks cannot be serialised")
    return {
        "schema": SYSTEM_SCHEMA,
        "H": _space(sys.H),
        "U": _space(sys.U),
        "Utilde": _space(sys.Utilde),
        "A": encode_array(sys.A.matrix),
        "group": bool(sys.A.group),
        "B": encode_array(sys.B.matrix),
        "C": encode_array(sys.C.matrix),
        "F1": encode_array(_pieces(sys.F1)),
        "F2": encode_array(_pieces(sys.F2)),
        "grid": {"horizon": sys.grid.horizon, "steps": sys.grid.steps},
        "seed": seed,
        "extensions": extensions or {},
    }


def system_from_dict(d):
    if d.get("schema") != SYSTEM_SCHEMA:
        raise FormatError(f"expected schema {SYSTEM_SCHEMA!r}, got {d.get('schema')!r}")
    try:
        H, U, Ut = _read_space(d["H"]), _read_space(d["U"]), _read_space(d["Utilde"])
        grid = TimeGrid(d["grid"]["horizon"], d["grid"]["steps"])
        A = GeneratorRealization(H, decode_array(d["A"]), group=bool(d.get("group", False)))
        sys = StochasticSystemRealization(
            H, U, Ut, A, LinearMap(U, H, decode_array(d["B"])), LinearMap(H, Ut, decode_array(d["C"])), grid,
            F1=decode_array(d["F1"]) if "F1" in d else None, F2=decode_array(d["F2"]) if "F2" in d else None,
            meta={"extensions": d.get("extensions", {}), "seed": d.get("seed")},
        )
    except KeyError as exc:
        raise FormatError(f"system JSON lacks {exc}") from None
    return sys


def save_system(path, sys, seed=None, extensions=None):
    with open(path, "w") as fh:
        json.dump(system_to_dict(sys, seed, extensions), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_system(path):
    with open(path) as fh:
        return system_from_dict(json.load(fh))


def heat_extension(model):
    return {"heat-v1": {"L": model.length, "n": model.cells, "a": model.a.tolist(), "b": model.b.tolist()}}


def schrodinger_extension(model):
    return {"schrodinger-v1": {"K": model.modes, "sides": [["0", "pi"][s] for s in model.sides],
                               "a": encode_array(model.a_values), "b": encode_array(model.b_values)}}


def model_from_extensions(d, grid):
    """Rebuild a PDE model from an extension block, or ``None`` for a plain system."""
    ext = d.get("extensions", {})
    if "heat-v1" in ext:
        from .heat import HeatModel

        e = ext["heat-v1"]
        return HeatModel(float(e["L"]), int(e["n"]), np.asarray(e["a"]), np.asarray(e["b"]), grid)
    if "schrodinger-v1" in ext:
        from .schrodinger import SchrodingerModel

        e = ext["schrodinger-v1"]
        K = int(e["K"])
        pad = np.zeros(K + 2, dtype=complex)

        def table(v):
            out = pad.copy()
            out[1:-1] = decode_array(v)
            return out

        sides = tuple(0.0 if s == "0" else np.pi for s in e["sides"])
        return SchrodingerModel(K, table(e["a"]), table(e["b"]), sides, grid)
    return None


def trajectory_table(traj, max_paths=None):
    """Rows ``(path, node, time, component, value...)`` as a 2-D array."""
    states = traj.states[:max_paths]
    P, N1, d = states.shape
    path, node, comp = np.meshgrid(np.arange(P), np.arange(N1), np.arange(d), indexing="ij")
    t = traj.grid.nodes[node]
    cols = [path.ravel(), node.ravel(), t.ravel(), comp.ravel()]
    if np.iscomplexobj(states):
        cols += [states.real.ravel(), states.imag.ravel()]
    else:
        cols.append(states.ravel())
    return cols


def write_trajectory_csv(path, traj, max_paths=None):
    cols = trajectory_table(traj, max_paths)
    header = "path,node,time,component," + ("re,im" if len(cols) == 6 else "value")
    fmt = ["%d", "%d", "%.17g", "%d"] + ["%.17g"] * (len(cols) - 4)
    np.savetxt(path, np.column_stack(cols), fmt=fmt, delimiter=",", header=header, comments="")


def read_trajectory_csv(path):
    """Inverse of ``write_trajectory_csv``: ``(times, states)``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    P, N1, d = (int(data[:, i].max()) + 1 for i in (0, 1, 3))
    if header[-2:] == ["re", "im"]:
        values = data[:, 4] + 1j * data[:, 5]
    elif header[-1] == "value":
        values = data[:, 4]
    else:
        raise FormatError(f"unrecognised trajectory header {header}")
    times = data[:, 2].reshape(P, N1, d)[0, :, 0]
    return times, values.reshape(P, N1, d)
