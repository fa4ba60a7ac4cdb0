"""Report figures rendered straight to PNG files.

Uses the object-oriented matplotlib API with an Agg canvas so nothing here
touches global pyplot state or needs a display.
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .analysis import FormantSet, TransferFunction
from .geometry import CellType, SimDomain
from .solver import ProbeRecords


def _new_figure(width=8.0, height=4.5):
    fig = Figure(figsize=(width, height), dpi=110)
    FigureCanvasAgg(fig)
    return fig


def save_waveform_png(records: ProbeRecords, path) -> None:
    fig = _new_figure()
    ax = fig.add_subplot(111)
    t = np.arange(records.steps) * records.dt * 1e3
    for i in range(records.data.shape[0]):
        ax.plot(t, records.data[i], lw=0.6, label=f"probe {i}")
    ax.set_xlabel("time [ms]")
    ax.set_ylabel("pressure [Pa]")
    ax.set_title("probe pressure records")
    if records.data.shape[0] > 1:
        ax.legend(loc="upper right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)


def save_spectrum_png(tf: TransferFunction, formants: FormantSet | None, path,
                      oracle: TransferFunction | None = None,
                      f_max: float = 10000.0) -> None:
    fig = _new_figure()
    ax = fig.add_subplot(111)
    m = tf.freqs <= f_max
    ax.plot(tf.freqs[m], tf.magnitude_db[m], lw=0.7, label="2.5D")
    if oracle is not None:
        mo = oracle.freqs <= f_max
        # oracle curve is on its own dB scale; shift to overlay shapes
        shift = np.median(tf.magnitude_db[m]) - np.median(oracle.magnitude_db[mo])
        ax.plot(oracle.freqs[mo], oracle.magnitude_db[mo] + shift, lw=0.7,
                ls="--", label="1D oracle (shifted)")
    if formants is not None and len(formants):
        ax.vlines(formants.frequencies, *ax.get_ylim(), colors="tab:red",
                  lw=0.6, alpha=0.6)
        for i, f in enumerate(formants.frequencies):
            ax.annotate(f"F{i + 1}", (f, ax.get_ylim()[1]), fontsize=7,
                        ha="center", va="bottom", color="tab:red")
    ax.set_xlabel("frequency [Hz]")
    ax.set_ylabel("magnitude [dB]")
    ax.set_title("transfer function")
    if oracle is not None:
        ax.legend(loc="lower right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)


def save_depthmap_png(domain: SimDomain, path) -> None:
    fig = _new_figure(9.0, 3.6)
    ax = fig.add_subplot(111)
    shown = np.where(domain.cells == int(CellType.WALL), np.nan, domain.depth.d_bar)
    extent = [0, domain.grid.nx * domain.grid.ds * 1e3,
              0, domain.grid.ny * domain.grid.ds * 1e3]
    im = ax.imshow(shown.T * 1e3, origin="lower", aspect="equal", extent=extent,
                   cmap="viridis")
    fig.colorbar(im, ax=ax, label="cell depth [mm]")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    ax.set_title("depth map (walls blank)")
    fig.tight_layout()
    fig.savefig(path)


def save_bench_png(labels, seconds, path) -> None:
    fig = _new_figure(7.0, 4.0)
    ax = fig.add_subplot(111)
    pos = np.arange(len(labels))
    ax.bar(pos, seconds, color="tab:blue")
    ax.set_xticks(pos, labels, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("stepping wall time [s]")
    ax.set_title("solver variants")
    for x, s in zip(pos, seconds):
        ax.annotate(f"{s:.2f}s", (x, s), ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
