"""Static figure export for runs, processed recordings and sweeps.

CSV files are the data contract; these PNGs are a convenience and are
rendered only from files already written to the output directory.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grasp_control import Mode  # noqa: E402

_MODE_LEVEL = {Mode.IDLE.value: 0, Mode.CLOSING.value: 1, Mode.HOLDING.value: 2, Mode.RELEASING.value: 3}


def _load(path: Path) -> np.ndarray:
    return np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")


def plot_run(trace_dir: str | Path, reference: float = -20.0, halfwidth: float = 4.0) -> list[Path]:
    """Grasp overview (power, duty, slip) and release detail (bend, mode)."""
    trace_dir = Path(trace_dir)
    ctrl = _load(trace_dir / "controller_trace.csv")
    plant = _load(trace_dir / "plant_trace.csv")
    t = ctrl["t"]
    modes = np.array([_MODE_LEVEL[m] for m in ctrl["mode"]])

    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(9, 7))
    axes[0].plot(t, ctrl["power"], lw=0.7)
    axes[0].set_ylabel("power [V$^2$]")
    axes[1].plot(t, ctrl["duty"], lw=1.0, color="C1")
    axes[1].set_ylabel("duty")
    axes[2].plot(t, plant["slip_mm"], lw=1.0, color="C2")
    axes[2].set_ylabel("slip [mm]")
    axes[2].set_xlabel("t [s]")
    fig.tight_layout()
    grasp_png = trace_dir / "grasp.png"
    fig.savefig(grasp_png, dpi=110)
    plt.close(fig)

    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(9, 5))
    axes[0].plot(t, ctrl["bend_deg"], lw=0.7)
    axes[0].axhspan(reference - halfwidth, reference + halfwidth, color="0.85", label="deadband")
    axes[0].set_ylabel("bend [deg]")
    axes[0].legend(loc="lower right")
    axes[1].step(t, modes, where="post")
    axes[1].set_yticks(list(_MODE_LEVEL.values()), list(_MODE_LEVEL.keys()))
    axes[1].set_xlabel("t [s]")
    fig.tight_layout()
    release_png = trace_dir / "release.png"
    fig.savefig(release_png, dpi=110)
    plt.close(fig)
    return [grasp_png, release_png]


def plot_processed(out_dir: str | Path, raw_csv: str | Path) -> Path:
    out_dir = Path(out_dir)
    raw = _load(Path(raw_csv))
    filt = _load(out_dir / "filtered.csv")
    power = _load(out_dir / "power.csv")
    events = _load(out_dir / "events.csv")
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(9, 6))
    axes[0].plot(raw["t"], raw["value"], lw=0.5)
    axes[0].set_ylabel("raw [V]")
    axes[1].plot(filt["t"], filt["value"], lw=0.7, color="C1")
    axes[1].set_ylabel("filtered [V]")
    axes[2].plot(power["t"], power["value"], lw=0.7, color="C2")
    axes[2].set_ylabel("power [V$^2$]")
    for on, off in zip(np.atleast_1d(events["onset_s"]), np.atleast_1d(events["end_s"])):
        for ax in axes:
            ax.axvspan(on, off, color="C3", alpha=0.15)
    axes[2].set_xlabel("t [s]")
    fig.tight_layout()
    png = out_dir / "processed.png"
    fig.savefig(png, dpi=110)
    plt.close(fig)
    return png


def plot_sweep(out_dir: str | Path, band: tuple[float, float] | None = None) -> Path:
    out_dir = Path(out_dir)
    rows = _load(out_dir / "sweep.csv")
    e = rows["E_N_per_mm2"]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.semilogx(e, rows["slider_travel_mm"], "o-", label="slider travel [mm]")
    ax.semilogx(e, rows["index_bend_deg"] / 10.0, "s-", label="index bend [deg/10]")
    ax.axhspan(3.0, 10.0, color="0.9", label="3-10 mm band")
    if band is not None:
        ax.axvspan(*band, color="C2", alpha=0.15, label="estimated E band")
    ax.set_xlabel("Young's modulus [N/mm$^2$]")
    ax.legend()
    fig.tight_layout()
    png = out_dir / "sweep.png"
    fig.savefig(png, dpi=110)
    plt.close(fig)
    return png
