"""Parameter sweeps and the figure series, emitted as deterministic CSV."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Any, Mapping, Sequence, TextIO

import jsonschema
import numpy as np

from .errors import CascadeLaserError, EmptySweepError, InvalidParameterError
from .fock import TruncationSpec, oracle_steady_state
from .observables import observables_closed_form, observables_from_moments
from .params import SystemParams, check_stability

__all__ = [
    "SweepSpec",
    "SweepResult",
    "FigureJob",
    "FIGURES",
    "OUTPUT_COLUMNS",
    "run_sweep",
    "figure_job",
    "run_figure",
    "load_sweep_spec",
    "sweep_spec_from_dict",
    "format_value",
]

SWEEPABLE = ("kappa", "gain_A", "eta", "epsilon")
SOURCES = ("closed_form", "from_moments")
OUTPUT_COLUMNS = {
    "variances": ("dc_plus", "dc_minus", "dd_plus", "dd_minus"),
    "duan": ("duan_sum", "duan_bound", "entangled"),
    "mean_photon": ("mean_photon",),
}
OUTPUT_COLUMNS["all"] = sum(OUTPUT_COLUMNS.values(), ())


def format_value(value) -> str:
    """Fixed text form used in every CSV: round-trip floats, lowercase booleans."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    count: int
    fixed: SystemParams
    scale: str = "linear"
    outputs: str = "all"
    source: str = "closed_form"
    z: float = -1.0
    oracle: TruncationSpec | None = None

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise InvalidParameterError(f"cannot sweep {self.parameter!r}; choose from {SWEEPABLE}")
        if self.count < 1:
            raise InvalidParameterError(f"count must be >= 1, got {self.count}")
        if self.scale not in ("linear", "log"):
            raise InvalidParameterError(f"scale must be 'linear' or 'log', got {self.scale!r}")
        if self.scale == "log" and not (self.start > 0 and self.stop > 0):
            raise InvalidParameterError("log-spaced sweeps need positive start and stop")
        if self.outputs not in OUTPUT_COLUMNS:
            raise InvalidParameterError(f"outputs must be one of {sorted(OUTPUT_COLUMNS)}")
        if self.source not in SOURCES:
            raise InvalidParameterError(f"source must be one of {SOURCES}")
        if self.z == 0:
            raise InvalidParameterError("z must be non-zero")
        # fails early if an endpoint leaves the parameter's validity domain
        for v in (self.start, self.stop):
            self.fixed.replace(**{self.parameter: v})

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)

    def points(self) -> list[SystemParams]:
        return [self.fixed.replace(**{self.parameter: float(v)}) for v in self.values()]

    @property
    def columns(self) -> tuple[str, ...]:
        return ("index", *SWEEPABLE, *OUTPUT_COLUMNS[self.outputs], "source", "status")


@dataclass(frozen=True)
class SweepResult:
    columns: tuple[str, ...]
    rows: tuple[dict[str, Any], ...] = field(repr=False)

    def ok_rows(self, source: str | None = None) -> list[dict[str, Any]]:
        return [r for r in self.rows if r["status"] == "ok" and (source is None or r["source"] == source)]

    def column(self, name: str, source: str | None = None) -> np.ndarray:
        return np.array([r[name] for r in self.ok_rows(source)])

    def to_csv(self, dest: str | PathLike | TextIO | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_value(r.get(c)) for c in self.columns])
        text = buf.getvalue()
        if dest is not None:
            if hasattr(dest, "write"):
                dest.write(text)
            else:
                with open(dest, "w", newline="") as fh:
                    fh.write(text)
        return text


def _evaluate(index: int, p: SystemParams, spec: SweepSpec) -> list[dict[str, Any]]:
    wanted = OUTPUT_COLUMNS[spec.outputs]
    base = {"index": index, **p.as_dict()}
    rows = []

    def emit(source, report=None, status="ok"):
        row = dict(base, source=source, status=status)
        if report is not None:
            full = report.to_row()
            row.update({c: full[c] for c in wanted})
        rows.append(row)

    stability = check_stability(p)
    if not stability.stable:
        emit(spec.source, status=f"unstable: max Re(eigenvalue)={stability.max_real_eigenvalue:.6g}")
        return rows
    try:
        if spec.source == "closed_form":
            report = observables_closed_form(p, spec.z)
        else:
            report = observables_from_moments(p, z=spec.z)
        emit(spec.source, report)
    except CascadeLaserError as exc:
        emit(spec.source, status=f"invalid: {exc}")
    if spec.oracle is not None:
        try:
            ss = oracle_steady_state(p, spec.oracle)
            emit("fock_oracle", observables_from_moments(p, ss.moments, spec.z, source="fock_oracle"))
        except CascadeLaserError as exc:
            emit("fock_oracle", status=f"skipped: {exc}")
    return rows


def run_sweep(spec: SweepSpec, max_workers: int | None = None) -> SweepResult:
    """Evaluate every grid point; failed points stay in the output with a status.

    Points may be evaluated concurrently (``max_workers``), but rows are
    always ordered by grid index.

    Raises
    ------
    EmptySweepError
        If no grid point evaluated successfully.
    """
    points = spec.points()
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            chunks = list(pool.map(lambda ip: _evaluate(ip[0], ip[1], spec), enumerate(points)))
    else:
        chunks = [_evaluate(i, p, spec) for i, p in enumerate(points)]
    rows = tuple(r for chunk in chunks for r in chunk)
    result = SweepResult(spec.columns, rows)
    if not result.ok_rows():
        raise EmptySweepError(f"no valid point in sweep over {spec.parameter}")
    return result


# ---------------------------------------------------------------------------
# figures

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6")

ETA_RANGE = (0.001, 1.0)
ETA_COUNT = 500
FIG3_GAINS = (25.0, 50.0, 100.0)


@dataclass(frozen=True)
class FigureJob:
    figure: str
    series: tuple[tuple[str, SweepSpec], ...]
    description: str = ""

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise InvalidParameterError(f"unknown figure {self.figure!r}; choose from {FIGURES}")


def figure_job(figure: str, *, count: int | None = None, gains: Sequence[float] | None = None) -> FigureJob:
    """Resolve a figure id to its sweeps.

    fig2: squeezed variances vs kappa in [0.01, 1] at eta=0.1, A=100.
    fig3: squeezed variances vs eta at kappa=0.15 for several A.
    fig4: Duan sum vs eta at kappa=1 for several A.
    fig5: mean photon number vs epsilon in [0, 50], one series per eta slice, A/kappa=100.
    fig6: mean photon number vs eta at A/kappa=100 for epsilon/kappa in {0, 50}.
    """
    gains = tuple(gains or FIG3_GAINS)
    if figure == "fig2":
        fixed = SystemParams(kappa=1.0, gain_A=100.0, eta=0.1, epsilon=0.0)
        spec = SweepSpec("kappa", 0.01, 1.0, count or 100, fixed, outputs="variances")
        return FigureJob(figure, (("A=100,eta=0.1", spec),), "squeezed variances vs kappa")
    if figure in ("fig3", "fig4"):
        kappa = 0.15 if figure == "fig3" else 1.0
        outputs = "variances" if figure == "fig3" else "duan"
        series = tuple(
            (f"A={format_value(a)}",
             SweepSpec("eta", *ETA_RANGE, count or ETA_COUNT,
                       SystemParams(kappa, a, 0.5, 0.0), scale="log", outputs=outputs))
            for a in gains)
        what = "squeezed variances" if figure == "fig3" else "Duan sum"
        return FigureJob(figure, series, f"{what} vs eta at kappa={kappa:g}")
    if figure == "fig5":
        etas = np.geomspace(*ETA_RANGE, 50)
        series = tuple(
            (f"eta={format_value(float(e))}",
             SweepSpec("epsilon", 0.0, 50.0, count or 51,
                       SystemParams(1.0, 100.0, float(e), 0.0), outputs="mean_photon"))
            for e in etas)
        return FigureJob(figure, series, "mean photon number vs epsilon and eta, A/kappa=100")
    if figure == "fig6":
        series = tuple(
            (f"epsilon={format_value(eps)}",
             SweepSpec("eta", *ETA_RANGE, count or ETA_COUNT,
                       SystemParams(1.0, 100.0, 0.5, eps), scale="log", outputs="mean_photon"))
            for eps in (0.0, 50.0))
        return FigureJob(figure, series, "mean photon number vs eta, epsilon/kappa in {0, 50}")
    raise InvalidParameterError(f"unknown figure {figure!r}; choose from {FIGURES}")


@dataclass(frozen=True)
class FigureResult:
    job: FigureJob
    columns: tuple[str, ...]
    rows: tuple[dict[str, Any], ...] = field(repr=False)

    def series(self, label: str) -> list[dict[str, Any]]:
        return [r for r in self.rows if r["series"] == label and r["status"] == "ok"]

    def labels(self) -> list[str]:
        return [label for label, _ in self.job.series]

    def to_csv(self, dest=None) -> str:
        return SweepResult(self.columns, self.rows).to_csv(dest)


def run_figure(job: FigureJob, out_dir: str | PathLike | None = None, plot: bool = False) -> FigureResult:
    """Compute every series of a figure; optionally write ``<figure>.csv`` (and a PNG)."""
    rows = []
    columns = None
    for label, spec in job.series:
        result = run_sweep(spec)
        columns = ("series", *result.columns)
        rows += [{"series": label, **r} for r in result.rows]
    fig = FigureResult(job, columns, tuple(rows))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        fig.to_csv(out / f"{job.figure}.csv")
        if plot:
            _plot(fig, out / f"{job.figure}.png")
    return fig


def _plot(fig: FigureResult, path: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ycol = {"fig2": "dc_minus", "fig3": "dc_minus", "fig4": "duan_sum"}.get(fig.job.figure, "mean_photon")
    f, ax = plt.subplots(figsize=(5, 4))
    for label, spec in fig.job.series:
        rows = fig.series(label)
        ax.plot([r[spec.parameter] for r in rows], [r[ycol] for r in rows], label=label)
        ax.set_xlabel(spec.parameter)
        if spec.scale == "log":
            ax.set_xscale("log")
    ax.set_ylabel(ycol)
    if len(fig.job.series) <= 6:
        ax.legend()
    f.tight_layout()
    f.savefig(path, dpi=120)
    plt.close(f)


# ---------------------------------------------------------------------------
# JSON sweep specifications

SWEEP_SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "parameter": {"enum": list(SWEEPABLE)},
        "start": {"type": "number"},
        "stop": {"type": "number"},
        "count": {"type": "integer", "minimum": 1},
        "scale": {"enum": ["linear", "log"]},
        "fixed": {"type": "object"},
        "outputs": {"enum": sorted(OUTPUT_COLUMNS)},
        "source": {"enum": list(SOURCES)},
        "z": {"type": "number", "not": {"const": 0}},
        "oracle": {
            "type": "object",
            "properties": {"n_max": {"type": "integer", "minimum": 1}},
            "required": ["n_max"],
            "additionalProperties": False,
        },
    },
    "required": ["parameter", "start", "stop", "count", "fixed"],
    "additionalProperties": False,
}


def sweep_spec_from_dict(doc: Mapping[str, Any]) -> SweepSpec:
    """Build a :class:`SweepSpec`; ``fixed`` may omit the swept parameter."""
    from .params import params_from_dict

    try:
        jsonschema.validate(dict(doc), SWEEP_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise InvalidParameterError(f"invalid sweep spec: {exc.message}") from None
    fixed = dict(doc["fixed"])
    fixed.setdefault(doc["parameter"], doc["start"])
    oracle = doc.get("oracle")
    return SweepSpec(
        parameter=doc["parameter"],
        start=float(doc["start"]),
        stop=float(doc["stop"]),
        count=int(doc["count"]),
        fixed=params_from_dict(fixed),
        scale=doc.get("scale", "linear"),
        outputs=doc.get("outputs", "all"),
        source=doc.get("source", "closed_form"),
        z=float(doc.get("z", -1.0)),
        oracle=TruncationSpec(oracle["n_max"]) if oracle else None,
    )


def load_sweep_spec(path: str | PathLike) -> SweepSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidParameterError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InvalidParameterError(f"{path}: top-level JSON value must be an object")
    return sweep_spec_from_dict(doc)
