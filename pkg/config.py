"""
Scenario configuration

Loads scenario files (TOML, parsed with tomlkit) into Scenario objects and
expands their [sweep] tables into concrete scenario variants. Every problem is
reported as a ConfigError naming the dotted key path, e.g. "controller.xi".

Usage:
    loaded = load_scenario_file("scenarios/g711_constant.toml")
    for point, scenario in loaded.variants():
        ...
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Type, TypeVar, Union

import tomlkit
from tomlkit.exceptions import ParseError

from classes.budget.budget import DelayBudget
from classes.control.controller import ControllerMode, DenominatorMode
from classes.duration.weibull import WeibullModel, calibrate_scale
from classes.quality.codec import CodecProfile, codec_profile
from classes.quality.mos import MosHistogram, MosParams
from classes.sim.network import JitterModel, NetworkModel
from classes.sim.scenario import (
    BufferMode,
    CapConfig,
    CapPolicy,
    ControllerConfig,
    DurationSpec,
    JitterBufferConfig,
    Scenario,
)
from utils.constants import MEAN_CALL_DURATION
from utils.exceptions import ConfigError, LackError

logger = logging.getLogger(__name__)

T = TypeVar("T")
_MISSING: Any = object()

SWEEP_AXES: Tuple[str, ...] = ("k", "mode", "p_network", "rate_bps", "steganogram_bits", "xi")


@dataclass(frozen=True)
class WardenConfig:
    """
    Warden settings of an experiment.

    Attributes:
        passive_threshold (Optional[float]): Absolute loss threshold; None uses the
            population rule over baseline calls without LACK.
        sigmas (float): Margin of the population rule.
        baseline_calls (int): Calls without LACK simulated for the population rule.
        assumed_buffer_ms (Optional[float]): Buffer the active warden assumes; None
            skips the active warden.
        ks_alpha (float): Significance level of the duration test.
    """

    passive_threshold: Optional[float] = None
    sigmas: float = 2.0
    baseline_calls: int = 50
    assumed_buffer_ms: Optional[float] = None
    ks_alpha: float = 0.05


@dataclass
class ScenarioFile:
    """
    A parsed scenario file.

    Attributes:
        path (Path): Where it was read from.
        scenario (Scenario): Base scenario.
        sweep (Dict[str, List[Any]]): Sweep axes, possibly empty.
        warden (WardenConfig): Warden settings.
    """

    path: Path
    scenario: Scenario
    sweep: Dict[str, List[Any]] = field(default_factory=dict)
    warden: WardenConfig = field(default_factory=WardenConfig)

    def variants(self) -> List[Tuple[Dict[str, Any], Scenario]]:
        """Sweep points in canonical order with the scenario each one yields."""
        points = sweep_points(self.sweep)
        return [(point, apply_sweep_point(self.scenario, point)) for point in points]


def _join(prefix: str, key: str) -> str:
    return f"{prefix}.{key}" if prefix else key


def _get(
    table: Mapping[str, Any],
    key: str,
    prefix: str,
    kind: Union[Type[T], Tuple[type, ...]],
    default: Any = _MISSING,
) -> Any:
    path = _join(prefix, key)
    if key not in table:
        if default is _MISSING:
            raise ConfigError("missing required key", path)
        return default
    value = table[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
        raise ConfigError(f"expected {getattr(kind, '__name__', kind)}, got {value!r}", path)
    return value


def _table(data: Mapping[str, Any], key: str, prefix: str = "") -> Mapping[str, Any]:
    value = data.get(key, {})
    if not isinstance(value, Mapping):
        raise ConfigError("expected a table", _join(prefix, key))
    return value


def _check_keys(table: Mapping[str, Any], allowed: Tuple[str, ...], prefix: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError("unknown key", _join(prefix, key))


def _enum(enum_type: Callable[[str], T], value: str, path: str) -> T:
    try:
        return enum_type(value)
    except ValueError as e:
        raise ConfigError(f"unsupported value {value!r}", path) from e


def _build(factory: Callable[..., T], path: str, *args: Any, **kwargs: Any) -> T:
    try:
        return factory(*args, **kwargs)
    except ConfigError:
        raise
    except LackError as e:
        raise ConfigError(str(e), path) from e


def _codec(data: Mapping[str, Any]) -> CodecProfile:
    table = _table(data, "codec")
    _check_keys(
        table,
        ("name", "plc", "packets_per_second", "payload_bits", "max_loss_tolerance"),
        "codec",
    )
    return _build(
        codec_profile,
        "codec",
        name=_get(table, "name", "codec", str, "G.711"),
        plc=_get(table, "plc", "codec", bool, False),
        packets_per_second=_get(table, "packets_per_second", "codec", float, None),
        payload_bits=_get(table, "payload_bits", "codec", float, None),
        max_loss_tolerance=_get(table, "max_loss_tolerance", "codec", float, None),
    )


def _network(data: Mapping[str, Any]) -> NetworkModel:
    table = _table(data, "network")
    _check_keys(table, ("loss", "schedule", "delay_ms", "jitter_ms", "jitter_model"), "network")
    if "loss" in table and "schedule" in table:
        raise ConfigError("give either loss or schedule, not both", "network.schedule")
    if "schedule" in table:
        raw = _get(table, "schedule", "network", list)
        try:
            schedule = tuple((float(start), float(p)) for start, p in raw)
        except (TypeError, ValueError) as e:
            raise ConfigError("expected a list of [start_s, loss] pairs", "network.schedule") from e
    else:
        schedule = ((0.0, _get(table, "loss", "network", float, 0.0)),)
    return _build(
        NetworkModel,
        "network",
        loss_schedule=schedule,
        delay_ms=_get(table, "delay_ms", "network", float, NetworkModel.delay_ms),
        jitter_ms=_get(table, "jitter_ms", "network", float, NetworkModel.jitter_ms),
        jitter_model=_enum(
            JitterModel,
            _get(table, "jitter_model", "network", str, "uniform"),
            "network.jitter_model",
        ),
    )


def _jitter_buffer(data: Mapping[str, Any]) -> JitterBufferConfig:
    table = _table(data, "jitter_buffer")
    prefix = "jitter_buffer"
    _check_keys(table, ("mode", "size_ms", "window", "headroom_ms"), prefix)
    defaults = JitterBufferConfig()
    return _build(
        JitterBufferConfig,
        prefix,
        mode=_enum(BufferMode, _get(table, "mode", prefix, str, "fixed"), f"{prefix}.mode"),
        size_ms=_get(table, "size_ms", prefix, float, defaults.size_ms),
        window=_get(table, "window", prefix, int, defaults.window),
        headroom_ms=_get(table, "headroom_ms", prefix, float, defaults.headroom_ms),
    )


def _processing(data: Mapping[str, Any]) -> DelayBudget:
    table = _table(data, "processing")
    _check_keys(table, ("dsp_ms", "coding_ms", "encapsulation_ms"), "processing")
    defaults = DelayBudget()
    return _build(
        DelayBudget,
        "processing",
        dsp=_get(table, "dsp_ms", "processing", float, defaults.dsp),
        coding=_get(table, "coding_ms", "processing", float, defaults.coding),
        encapsulation=_get(table, "encapsulation_ms", "processing", float, defaults.encapsulation),
    )


def _duration(data: Mapping[str, Any]) -> DurationSpec:
    table = _table(data, "duration")
    _check_keys(table, ("seconds", "model"), "duration")
    model_table = _table(table, "model", "duration")
    prefix = "duration.model"
    _check_keys(model_table, ("k", "lam", "mean"), prefix)
    k = _get(model_table, "k", prefix, float, 1.0)
    if "lam" in model_table and "mean" in model_table:
        raise ConfigError("give either lam or mean, not both", f"{prefix}.lam")
    if "lam" in model_table:
        model = _build(WeibullModel, prefix, k=k, lam=_get(model_table, "lam", prefix, float))
    else:
        mean = _get(model_table, "mean", prefix, float, MEAN_CALL_DURATION)
        model = _build(calibrate_scale, prefix, k=k, target_mean=mean)
    return _build(
        DurationSpec,
        "duration",
        seconds=_get(table, "seconds", "duration", float, None),
        model=model,
    )


def _controller(data: Mapping[str, Any]) -> ControllerConfig:
    table = _table(data, "controller")
    prefix = "controller"
    _check_keys(table, ("mode", "xi", "denominator", "rate_bps", "update_interval"), prefix)
    return _build(
        ControllerConfig,
        prefix,
        mode=_enum(
            ControllerMode, _get(table, "mode", prefix, str, "residual_mean"), f"{prefix}.mode"
        ),
        xi=_get(table, "xi", prefix, float, 0.9),
        denominator=_enum(
            DenominatorMode,
            _get(table, "denominator", prefix, str, "mean_residual"),
            f"{prefix}.denominator",
        ),
        rate_bps=_get(table, "rate_bps", prefix, float, None),
        update_interval=_get(table, "update_interval", prefix, float, None),
    )


def _cap(data: Mapping[str, Any], base_dir: Path) -> CapConfig:
    table = _table(data, "cap")
    prefix = "cap"
    _check_keys(table, ("policy", "total_loss", "mos_floor", "eta", "histogram"), prefix)
    policy = _enum(CapPolicy, _get(table, "policy", prefix, str, "none"), f"{prefix}.policy")
    histogram = None
    if policy is CapPolicy.STATIC:
        histogram_path = base_dir / _get(table, "histogram", prefix, str)
        if not histogram_path.is_file():
            raise ConfigError(f"file not found: {histogram_path}", f"{prefix}.histogram")
        histogram = _build(MosHistogram.from_csv, f"{prefix}.histogram", histogram_path)
    defaults = CapConfig()
    return _build(
        CapConfig,
        prefix,
        policy=policy,
        total_loss=_get(table, "total_loss", prefix, float, defaults.total_loss),
        mos_floor=_get(table, "mos_floor", prefix, float, defaults.mos_floor),
        eta=_get(table, "eta", prefix, float, defaults.eta),
        histogram=histogram,
    )


def _mos(data: Mapping[str, Any]) -> MosParams:
    table = _table(data, "mos")
    _check_keys(table, ("alpha", "beta", "gamma"), "mos")
    defaults = MosParams()
    return _build(
        MosParams,
        "mos",
        alpha=_get(table, "alpha", "mos", float, defaults.alpha),
        beta=_get(table, "beta", "mos", float, defaults.beta),
        gamma=_get(table, "gamma", "mos", float, defaults.gamma),
    )


def warden_from_mapping(data: Mapping[str, Any]) -> WardenConfig:
    table = _table(data, "warden")
    prefix = "warden"
    _check_keys(
        table,
        ("passive_threshold", "sigmas", "baseline_calls", "assumed_buffer_ms", "ks_alpha"),
        prefix,
    )
    threshold = table.get("passive_threshold", "population")
    if threshold != "population":
        threshold = _get(table, "passive_threshold", prefix, float)
    else:
        threshold = None
    defaults = WardenConfig()
    config = WardenConfig(
        passive_threshold=threshold,
        sigmas=_get(table, "sigmas", prefix, float, defaults.sigmas),
        baseline_calls=_get(table, "baseline_calls", prefix, int, defaults.baseline_calls),
        assumed_buffer_ms=_get(table, "assumed_buffer_ms", prefix, float, None),
        ks_alpha=_get(table, "ks_alpha", prefix, float, defaults.ks_alpha),
    )
    if config.baseline_calls < 2:
        raise ConfigError("need at least 2 baseline calls", f"{prefix}.baseline_calls")
    if not 0.0 < config.ks_alpha < 1.0:
        raise ConfigError("must lie in (0, 1)", f"{prefix}.ks_alpha")
    return config


def scenario_from_mapping(data: Mapping[str, Any], base_dir: Union[str, Path] = ".") -> Scenario:
    """
    Build a Scenario from a parsed scenario document.

    Args:
        data (Mapping[str, Any]): Top-level table of the scenario file.
        base_dir (str | Path): Directory relative file references are resolved against.

    Returns:
        Scenario: The described call; seed is mandatory.

    Raises:
        ConfigError: On missing, unknown or malformed keys.
    """
    _check_keys(
        data,
        (
            "name",
            "seed",
            "steganogram_bits",
            "message",
            "receiver_aware",
            "rtcp_interval",
            "max_lack_delay_ms",
            "codec",
            "network",
            "jitter_buffer",
            "processing",
            "duration",
            "controller",
            "cap",
            "mos",
            "warden",
            "sweep",
        ),
        "",
    )
    seed = _get(data, "seed", "", int)
    if seed < 0:
        raise ConfigError("must be a non-negative integer", "seed")
    return _build(
        Scenario,
        "",
        seed=seed,
        name=_get(data, "name", "", str, "scenario"),
        codec=_codec(data),
        network=_network(data),
        jitter_buffer=_jitter_buffer(data),
        processing=_processing(data),
        duration=_duration(data),
        controller=_controller(data),
        cap=_cap(data, Path(base_dir)),
        mos=_mos(data),
        steganogram_bits=_get(data, "steganogram_bits", "", int, 0),
        message=_get(data, "message", "", str, None),
        receiver_aware=_get(data, "receiver_aware", "", bool, True),
        rtcp_interval=_get(data, "rtcp_interval", "", float, Scenario.rtcp_interval),
        max_lack_delay_ms=_get(data, "max_lack_delay_ms", "", float, Scenario.max_lack_delay_ms),
    )


def sweep_from_mapping(data: Mapping[str, Any]) -> Dict[str, List[Any]]:
    table = _table(data, "sweep")
    _check_keys(table, SWEEP_AXES, "sweep")
    sweep: Dict[str, List[Any]] = {}
    for axis in sorted(table):
        values = _get(table, axis, "sweep", list)
        if not values:
            raise ConfigError("sweep axis must not be empty", f"sweep.{axis}")
        sweep[axis] = list(values)
    return sweep


def sweep_points(sweep: Mapping[str, List[Any]]) -> List[Dict[str, Any]]:
    """Cartesian product of the sweep axes, axes in name order; one empty point if none."""
    axes = sorted(sweep)
    return [dict(zip(axes, values)) for values in itertools.product(*(sweep[a] for a in axes))]


def apply_sweep_point(scenario: Scenario, point: Mapping[str, Any]) -> Scenario:
    """
    Scenario variant for one sweep point.

    "k" recalibrates the duration model to the same mean; "p_network" replaces the
    loss schedule with a constant loss.

    Raises:
        ConfigError: On unknown axes or values the scenario rejects.
    """
    for axis, value in sorted(point.items()):
        path = f"sweep.{axis}"
        if axis == "k":
            model = _build(
                calibrate_scale, path, k=float(value), target_mean=scenario.duration.model.mean
            )
            scenario = replace(scenario, duration=replace(scenario.duration, model=model))
        elif axis == "xi":
            controller = _build(replace, path, scenario.controller, xi=float(value))
            scenario = replace(scenario, controller=controller)
        elif axis == "mode":
            mode = _enum(ControllerMode, str(value), path)
            controller = _build(replace, path, scenario.controller, mode=mode)
            scenario = replace(scenario, controller=controller)
        elif axis == "rate_bps":
            controller = _build(replace, path, scenario.controller, rate_bps=float(value))
            scenario = replace(scenario, controller=controller)
        elif axis == "p_network":
            network = _build(
                replace, path, scenario.network, loss_schedule=((0.0, float(value)),)
            )
            scenario = replace(scenario, network=network)
        elif axis == "steganogram_bits":
            scenario = _build(replace, path, scenario, steganogram_bits=int(value))
        else:
            raise ConfigError("unknown sweep axis", path)
    return scenario


def load_scenario_file(path: Union[str, Path]) -> ScenarioFile:
    """
    Read and validate one scenario file.

    Raises:
        ConfigError: If the file is missing, is not valid TOML or holds bad keys.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    try:
        data = tomlkit.parse(path.read_text(encoding="utf-8")).unwrap()
    except ParseError as e:
        raise ConfigError(f"{path}: {e}") from e
    logger.debug("loaded scenario file %s", path)
    return ScenarioFile(
        path=path,
        scenario=scenario_from_mapping(data, path.parent),
        sweep=sweep_from_mapping(data),
        warden=warden_from_mapping(data),
    )
