"""CSV / JSON writers, the run manifest, plot-script emission and figure rendering."""
from __future__ import annotations

import json
import os
import platform
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

CSV_FORMAT = "{:.17g}"


@dataclass
class RunManifest:
    command: str
    parameters: dict
    versions: str
    outputs: list = field(default_factory=list)
    residual_summary: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    passed: bool | None = None
    wall_time: float = 0.0


def versions() -> str:
    import scipy

    from . import __version__
    return (f"deformed-sine {__version__}; python {platform.python_version()}; "
            f"numpy {np.__version__}; scipy {scipy.__version__}")


def jsonable(obj):
    """Recursively turn numpy scalars/arrays and complex numbers into JSON types.

    Complex values with a nonzero imaginary part become {"re": .., "im": ..}.
    """
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        return z.real if z.imag == 0 else {"re": z.real, "im": z.imag}
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> RunManifest:
    return RunManifest(**json.loads(Path(path).read_text()))


def write_manifest(path, manifest: RunManifest) -> Path:
    return write_json(path, asdict(manifest))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return CSV_FORMAT.format(float(v))


def _expand_columns(columns: Mapping[str, Sequence]):
    """Complex columns with any nonzero imaginary part are split into name_re, name_im."""
    out = {}
    for name, vals in columns.items():
        arr = np.asarray(vals)
        if np.iscomplexobj(arr):
            if np.any(arr.imag[np.isfinite(arr)] != 0):
                out[f"{name}_re"] = arr.real
                out[f"{name}_im"] = arr.imag
                continue
            arr = arr.real
        out[name] = arr
    return out


def write_csv(path, columns: Mapping[str, Sequence]) -> Path:
    """Header row plus one row per entry; floats with 17 significant digits."""
    cols = _expand_columns(columns)
    if not cols:
        raise ValueError("no columns to write")
    lengths = {len(v) for v in cols.values()}
    if len(lengths) != 1:
        raise ValueError(f"columns have different lengths: {lengths}")
    n = lengths.pop()
    if n == 0:
        raise ValueError("refusing to write an empty table")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(cols)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(cols[c][i]) for c in names) + "\n")
    return path


# Plot scripts are plain matplotlib programs reading the CSV written next to them.
_LINE_SCRIPT = '''"""Render {title} from {csv_name}."""
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open("{csv_name}") as fh:
    rows = list(csv.DictReader(fh))
x = [float(r["{x}"]) for r in rows]
fig, ax = plt.subplots(figsize=(6, 4))
for name in {ys!r}:
    ax.plot(x, [float(r[name]) for r in rows], label=name)
ax.set_xlabel("{x}")
ax.set_yscale("{yscale}")
ax.set_title("{title}")
ax.legend()
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "{png_name}", dpi=150)
'''

_HEATMAP_SCRIPT = '''"""Render {title} from {csv_name}."""
import csv
import sys

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open("{csv_name}") as fh:
    rows = list(csv.DictReader(fh))
ys = sorted({{float(r["y"]) for r in rows}})
ss = sorted({{float(r["s"]) for r in rows}})
fields = {zs!r}
fig, axes = plt.subplots(1, len(fields), figsize=(4.5 * len(fields), 4), squeeze=False)
for ax, name in zip(axes[0], fields):
    grid = np.full((len(ys), len(ss)), np.nan)
    iy = {{v: i for i, v in enumerate(ys)}}
    js = {{v: j for j, v in enumerate(ss)}}
    for r in rows:
        grid[iy[float(r["y"])], js[float(r["s"])]] = float(r[name])
    data = np.log10(np.abs(grid) + 1e-300) if {log} else grid
    im = ax.pcolormesh(ss, ys, data, shading="nearest")
    ax.set_xlabel("s")
    ax.set_ylabel("y")
    ax.set_title(("log10 |%s|" % name) if {log} else name)
    fig.colorbar(im, ax=ax)
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "{png_name}", dpi=150)
'''


def plot_script(kind: str, csv_path, title: str, **kw) -> str:
    csv_path = Path(csv_path)
    png = csv_path.with_suffix(".png").name
    if kind == "line":
        return _LINE_SCRIPT.format(title=title, csv_name=csv_path.name, png_name=png,
                                   x=kw["x"], ys=list(kw["ys"]), yscale=kw.get("yscale", "linear"))
    if kind == "heatmap":
        return _HEATMAP_SCRIPT.format(title=title, csv_name=csv_path.name, png_name=png,
                                      zs=list(kw["zs"]), log=bool(kw.get("log", False)))
    raise ValueError(f"unknown plot kind {kind!r}")


def render_script(script_path) -> Path:
    """Run an emitted plot script in-process with the script's directory as cwd."""
    script_path = Path(script_path).resolve()
    cwd, argv = os.getcwd(), sys.argv
    os.chdir(script_path.parent)
    sys.argv = [script_path.name]
    try:
        code = compile(script_path.read_text(), str(script_path), "exec")
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        exec(code, {"__name__": "__main__"})
        plt.close("all")
    finally:
        os.chdir(cwd)
        sys.argv = argv
    return script_path.with_name(script_path.name.replace(".plot.py", ".png"))


def emit_report(out_dir, stem: str, columns: Mapping[str, Sequence] | None = None,
                data: Mapping | None = None, formats: Sequence[str] = ("csv", "json"),
                plot: dict | None = None, render: bool = True) -> list[Path]:
    """Write ``stem``.csv / .json / .plot.py (and .png when ``render``) under ``out_dir``."""
    out_dir = Path(out_dir)
    written = []
    if columns is None and data is None:
        raise ValueError("nothing to report")
    csv_path = None
    if "csv" in formats and columns is not None:
        csv_path = write_csv(out_dir / f"{stem}.csv", columns)
        written.append(csv_path)
    if "json" in formats and data is not None:
        written.append(write_json(out_dir / f"{stem}.json", data))
    if "plotscript" in formats and plot is not None and csv_path is not None:
        script = out_dir / f"{stem}.plot.py"
        script.write_text(plot_script(csv_path=csv_path, **plot))
        written.append(script)
        if render:
            written.append(render_script(script))
    return written
