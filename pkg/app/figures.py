"""
Figure datasets

Each supported figure id maps to a builder that evaluates the analytic curves
behind that figure and returns them as a table. Controller curves are stepped
at FINE_STEP_S and sampled on a FIGURE_STEP_S grid over [0, FIGURE_HORIZON_S];
sampled rates are IR(t) = S_R(t) / denominator(t) at the grid instants.

Usage:
    figure_dataset("10").to_csv("figure_10.csv")
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from classes.budget.budget import total_loss
from classes.control.comparison import compare_controllers
from classes.control.controller import (
    ControllerMode,
    ControllerState,
    gain_metrics,
    mos_gain_series,
    rate_denominator,
    run_controller,
)
from classes.duration.empirical import EmpiricalDensity
from classes.duration.weibull import (
    WeibullModel,
    approx_horizon,
    conditional_mean_bounds,
    conditional_mean_remaining,
    quantile_horizon,
    table_one_models,
)
from classes.quality.codec import G711
from classes.quality.mos import MosParams, mos_curve
from utils.constants import (
    FIGURE_HORIZON_S,
    FIGURE_STEGANOGRAM_BITS,
    FIGURE_STEP_S,
    FINE_STEP_S,
    TABLE_ONE_CVS,
)
from utils.csvio import write_csv
from utils.exceptions import SaturationError, UnknownFigureError

logger = logging.getLogger(__name__)

P_NETWORK_GRID: np.ndarray = np.round(np.arange(21) * 0.005, 3)
P_LACK_VALUES: Tuple[float, ...] = (0.0, 0.005, 0.01, 0.02, 0.03)
XI_VALUES: Tuple[float, ...] = (0.8, 0.9, 0.95)
COMPARED_CVS: Tuple[float, ...] = (0.32, 1.0, 2.23)
SIZE_GRID: Tuple[int, ...] = tuple(range(1000, 100001, 1000))
SIZE_PANEL_TIMES: Tuple[float, ...] = (30.0, 60.0, 120.0, 180.0, 300.0)
# IR_Q of the capped datasets: G.711 at p_L = 0.005
CAPPED_RATE_BPS: float = 320.0
ARREARS_STEGANOGRAM_BITS: int = 50000
GAIN_NETWORK_LOSS: float = 0.01

Row = List[Any]


@dataclass(frozen=True)
class FigureGrid:
    """
    Sampling of a figure dataset.

    Attributes:
        horizon (float): Last time sample in seconds.
        step (float): Spacing of the time samples.
        dt (float): Controller step.
        s_bits (int): Steganogram size of the controller curves.
    """

    horizon: float = FIGURE_HORIZON_S
    step: float = FIGURE_STEP_S
    dt: float = FINE_STEP_S
    s_bits: int = FIGURE_STEGANOGRAM_BITS

    @property
    def stride(self) -> int:
        return max(int(round(self.step / self.dt)), 1)

    @property
    def times(self) -> np.ndarray:
        n = int(round(self.horizon / self.dt)) + 1
        return (np.arange(n) * self.dt)[:: self.stride]


@dataclass
class FigureDataset:
    """
    One figure's data as a table.

    Attributes:
        figure_id (str): Figure id, e.g. "10" or "25-27".
        header (List[str]): Column names.
        rows (List[Row]): Values, one list per row.
    """

    figure_id: str
    header: List[str]
    rows: List[Row]

    def column(self, name: str) -> List[Any]:
        index = self.header.index(name)
        return [row[index] for row in self.rows]

    def to_csv(self, path: Union[str, Path]) -> None:
        write_csv(path, self.header, self.rows)


def _cv_label(cv: float) -> str:
    return f"cv{cv:.2f}"


def _models(cvs: Optional[Sequence[float]] = None) -> List[Tuple[float, WeibullModel]]:
    pairs = list(zip(TABLE_ONE_CVS, table_one_models()))
    if cvs is None:
        return pairs
    return [(cv, model) for cv, model in pairs if cv in cvs]


def _rate_at(state: ControllerState, model: WeibullModel, t: float, remaining: float) -> float:
    if remaining <= 0:
        return 0.0
    try:
        denominator = rate_denominator(state, model, float(t))
    except SaturationError:
        return math.nan
    return remaining / denominator if denominator > 0 else math.nan


def _rate_curve(
    model: WeibullModel, mode: ControllerMode, xi: Optional[float], grid: FigureGrid
) -> np.ndarray:
    state = ControllerState(s_total=grid.s_bits, mode=mode, xi=xi)
    trajectory = run_controller(model, state, grid.horizon, grid.dt)
    template = ControllerState(s_total=0, mode=mode, xi=xi)
    times = trajectory.times[:: grid.stride]
    remaining = trajectory.s_remaining[:: grid.stride]
    return np.array([_rate_at(template, model, t, r) for t, r in zip(times, remaining)])


def _rate_at_time(
    model: WeibullModel, mode: ControllerMode, xi: Optional[float], t: float, grid: FigureGrid
) -> float:
    state = ControllerState(s_total=grid.s_bits, mode=mode, xi=xi)
    trajectory = run_controller(model, state, t, grid.dt)
    template = ControllerState(s_total=0, mode=mode, xi=xi)
    return _rate_at(template, model, t, float(trajectory.s_remaining[-1]))


def _time_table(
    figure_id: str, grid: FigureGrid, columns: Dict[str, Sequence[float]]
) -> FigureDataset:
    header = ["t"] + list(columns)
    rows = [
        [float(t)] + [float(values[i]) for values in columns.values()]
        for i, t in enumerate(grid.times)
    ]
    return FigureDataset(figure_id, header, rows)


def _total_loss_figure(grid: FigureGrid) -> FigureDataset:
    header = ["p_network"] + [f"p_total_pl{p_lack:g}" for p_lack in P_LACK_VALUES]
    rows = [
        [float(p_n)] + [total_loss(float(p_n), p_lack) for p_lack in P_LACK_VALUES]
        for p_n in P_NETWORK_GRID
    ]
    return FigureDataset("2", header, rows)


def _mos_figure(grid: FigureGrid) -> FigureDataset:
    params = MosParams()
    curves = [mos_curve(params, P_NETWORK_GRID, p_lack) for p_lack in P_LACK_VALUES]
    header = ["p_network"] + [f"mos_pl{p_lack:g}" for p_lack in P_LACK_VALUES]
    rows = [[float(p_n)] + [float(c[i]) for c in curves] for i, p_n in enumerate(P_NETWORK_GRID)]
    return FigureDataset("4", header, rows)


def _density_figure(grid: FigureGrid) -> FigureDataset:
    times = grid.times
    return _time_table(
        "7", grid, {_cv_label(cv): model.pdf(times) for cv, model in _models()}
    )


def _bounds_figure(grid: FigureGrid) -> FigureDataset:
    columns: Dict[str, Sequence[float]] = {}
    for cv, model in _models():
        bounds = [conditional_mean_bounds(model, float(t)) for t in grid.times]
        columns[f"lower_{_cv_label(cv)}"] = [low for low, _ in bounds]
        columns[f"upper_{_cv_label(cv)}"] = [high for _, high in bounds]
    return _time_table("8", grid, columns)


def _conditional_mean(model: Any, t: float) -> float:
    try:
        if isinstance(model, WeibullModel):
            return conditional_mean_remaining(model, t)
        return model.conditional_mean_remaining(t)
    except SaturationError:
        return math.nan


def _conditional_mean_figure(grid: FigureGrid) -> FigureDataset:
    columns: Dict[str, Sequence[float]] = {
        _cv_label(cv): [_conditional_mean(model, float(t)) for t in grid.times]
        for cv, model in _models()
    }
    empirical = EmpiricalDensity()
    columns["empirical"] = [_conditional_mean(empirical, float(t)) for t in grid.times]
    return _time_table("9", grid, columns)


def _residual_rate_figure(grid: FigureGrid) -> FigureDataset:
    return _time_table(
        "10",
        grid,
        {
            _cv_label(cv): _rate_curve(model, ControllerMode.RESIDUAL_MEAN, None, grid)
            for cv, model in _models()
        },
    )


def _arrears_figure(grid: FigureGrid) -> FigureDataset:
    cv, model = _models([2.23])[0]
    state = ControllerState(s_total=ARREARS_STEGANOGRAM_BITS)
    trajectory = run_controller(model, state, grid.horizon, grid.dt, CAPPED_RATE_BPS)
    stride = grid.stride
    return _time_table(
        "11",
        grid,
        {
            "ir_raw": trajectory.ir_raw[::stride],
            "ir_capped": trajectory.ir_capped[::stride],
            "irq": np.full(len(grid.times), CAPPED_RATE_BPS),
            "arrears": trajectory.arrears[::stride],
            "s_remaining": trajectory.s_remaining[::stride],
        },
    )


def _size_panels(
    figure_id: str,
    panels: Sequence[Tuple[str, float, float]],
    mode: ControllerMode,
    xi: Optional[float],
    cap: float,
    grid: FigureGrid,
) -> FigureDataset:
    # IR(t) is proportional to S before the cap applies
    rows: List[Row] = []
    models = dict(_models())
    for panel, t, cv in panels:
        unit_rate = _rate_at_time(models[cv], mode, xi, t, grid) / grid.s_bits
        for size in SIZE_GRID:
            rows.append([panel, t, cv, size, min(size * unit_rate, cap)])
    return FigureDataset(figure_id, ["figure", "t", "cv", "s_bits", "ir"], rows)


def _time_panels(
    figure_ids: Tuple[str, str, str], cv_for_times: float
) -> List[Tuple[str, float, float]]:
    first, second, third = figure_ids
    panels = [(first, 60.0, cv) for cv in TABLE_ONE_CVS]
    panels += [(second, 180.0, cv) for cv in TABLE_ONE_CVS]
    panels += [(third, t, cv_for_times) for t in SIZE_PANEL_TIMES]
    return panels


def _residual_size_figure(figure_id: str) -> Callable[[FigureGrid], FigureDataset]:
    def build(grid: FigureGrid) -> FigureDataset:
        panels = [p for p in _time_panels(("12", "13", "14"), 2.23) if p[0] == figure_id]
        return _size_panels(
            figure_id, panels, ControllerMode.RESIDUAL_MEAN, None, CAPPED_RATE_BPS, grid
        )

    return build


def _quantile_size_figure(grid: FigureGrid) -> FigureDataset:
    panels = _time_panels(("22", "23", "24"), 0.32)
    return _size_panels("22-24", panels, ControllerMode.QUANTILE, 0.9, math.inf, grid)


def _gain_figure(grid: FigureGrid) -> FigureDataset:
    params = MosParams()
    columns: Dict[str, Sequence[float]] = {}
    for cv, model in _models():
        rates = _rate_curve(model, ControllerMode.RESIDUAL_MEAN, None, grid)
        x_series, _ = gain_metrics(grid.times, rates)
        ir_initial = float(rates[0])
        columns[f"x_{_cv_label(cv)}"] = x_series
        columns[f"z_{_cv_label(cv)}"] = cumulative_trapezoid(x_series, grid.times, initial=0.0)
        columns[f"mos_gain_{_cv_label(cv)}"] = mos_gain_series(
            params, GAIN_NETWORK_LOSS, ir_initial, x_series, G711
        )
    return _time_table("15", grid, columns)


def _quantile_rate_figure(grid: FigureGrid) -> FigureDataset:
    columns: Dict[str, Sequence[float]] = {}
    for xi in XI_VALUES:
        for cv, model in _models():
            columns[f"xi{xi:g}_{_cv_label(cv)}"] = _rate_curve(
                model, ControllerMode.QUANTILE, xi, grid
            )
    return _time_table("16-18", grid, columns)


def _horizon_figure(grid: FigureGrid) -> FigureDataset:
    columns: Dict[str, Sequence[float]] = {}
    for xi in XI_VALUES:
        for cv, model in _models(COMPARED_CVS):
            columns[f"horizon_xi{xi:g}_{_cv_label(cv)}"] = [
                quantile_horizon(model, float(t), xi) for t in grid.times
            ]
    for cv, _ in _models(COMPARED_CVS):
        columns[f"approx_xi0.8_{_cv_label(cv)}"] = [
            60.0 * approx_horizon(cv, float(t) / 60.0) for t in grid.times
        ]
    return _time_table("19-21", grid, columns)


def _comparison_figure(grid: FigureGrid) -> FigureDataset:
    header = ["figure", "cv", "xi", "t", "ir_residual_mean", "ir_quantile", "leader", "crossing"]
    rows: List[Row] = []
    for figure, (cv, model) in zip(("25", "26", "27"), _models(COMPARED_CVS)):
        for xi in XI_VALUES:
            report = compare_controllers(model, grid.s_bits, xi, grid.horizon, grid.dt)
            times = report.times[:: grid.stride]
            first = report.first[:: grid.stride]
            second = report.second[:: grid.stride]
            for i, t in enumerate(times):
                crossed = i > 0 and any(times[i - 1] < c <= t for c in report.crossings)
                if math.isclose(first[i], second[i], rel_tol=1e-9):
                    leader = "tie"
                elif first[i] > second[i]:
                    leader = report.first_label
                else:
                    leader = report.second_label
                rows.append([figure, cv, xi, float(t), first[i], second[i], leader, int(crossed)])
            logger.debug("cv=%.2f xi=%.2f first crossing %s", cv, xi, report.first_crossing)
    return FigureDataset("25-27", header, rows)


_BUILDERS: Dict[str, Callable[[FigureGrid], FigureDataset]] = {
    "2": _total_loss_figure,
    "4": _mos_figure,
    "7": _density_figure,
    "8": _bounds_figure,
    "9": _conditional_mean_figure,
    "10": _residual_rate_figure,
    "11": _arrears_figure,
    "12": _residual_size_figure("12"),
    "13": _residual_size_figure("13"),
    "14": _residual_size_figure("14"),
    "15": _gain_figure,
    "16-18": _quantile_rate_figure,
    "19-21": _horizon_figure,
    "22-24": _quantile_size_figure,
    "25-27": _comparison_figure,
}

SUPPORTED_FIGURES: Tuple[str, ...] = tuple(_BUILDERS)


def figure_dataset(figure_id: str, grid: Optional[FigureGrid] = None) -> FigureDataset:
    """
    Data behind one figure.

    Args:
        figure_id (str): One of SUPPORTED_FIGURES.
        grid (Optional[FigureGrid]): Sampling; defaults to 1 s over [0, 600] s.

    Raises:
        UnknownFigureError: If the id is not supported.
    """
    builder = _BUILDERS.get(str(figure_id))
    if builder is None:
        raise UnknownFigureError(
            f"unsupported figure {figure_id!r}; choose from {', '.join(SUPPORTED_FIGURES)}",
            "figure_id",
        )
    logger.info("building dataset for figure %s", figure_id)
    return builder(grid or FigureGrid())
