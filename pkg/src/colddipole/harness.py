"""Scenario files, Monte Carlo orchestration and file output.

A scenario file is flat ``key = value`` text split into sections. Lists are
comma separated; vectors are written ``x, y, z``; time windows ``a:b``; the
spectrum window is ``center, width``.
Unknown sections or keys are errors.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import configparser
import csv
import dataclasses
from dataclasses import dataclass, field
import io
import itertools
import json
import math
import os
from pathlib import Path
import platform
import time
import zipfile

import numpy as np

from . import __version__
from ._backend import BACKEND
from .core import EnsembleConfig, Pulse, sample_atoms
from .dimer import CLASS_ORDER, FlybyScenario, dimer_modes, extreme_classes, flyby
from .dynamics import DivergenceError, IntegrationPlan, integrate
from .observables import (
    ObservableSeries,
    Spectrum,
    average_rate,
    detection_directions,
    directional_intensity,
    instantaneous_rate,
    polarization_pair,
    radiated_field,
    spectral_fwhm,
    stft_spectrum,
)
from .theory import CUBE_ALPHA, diffusion_time, fit_plateau, optical_thickness, slab_initial_rate

KINDS = ("ensemble", "dimer-flyby", "dimer-modes", "theory")
MAX_EXCLUDED_FRACTION = 0.01


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(" ", "").split(",") if x)


def _vector(text: str) -> tuple[float, float, float]:
    v = _floats(text)
    if len(v) != 3:
        raise ConfigError(f"expected three components, got {text!r}")
    return v


def _window(text: str) -> tuple[float, float]:
    parts = text.replace(" ", "").split(":")
    if len(parts) != 2:
        raise ConfigError(f"expected a window 'a:b', got {text!r}")
    a, b = float(parts[0]), float(parts[1])
    if not b > a:
        raise ConfigError(f"empty window {text!r}")
    return a, b


def _center_width(text: str) -> tuple[float, float]:
    v = _floats(text)
    if len(v) != 2 or not v[1] > 0:
        raise ConfigError(f"expected 'center, width' with a positive width, got {text!r}")
    return v


def _windows(text: str) -> tuple[tuple[float, float], ...]:
    return tuple(_window(w) for w in text.split(",") if w.strip())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _optional(parse):
    def inner(text: str):
        return None if text.strip().lower() in ("", "none") else parse(text)
    return inner


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(" ", "").split(",") if x)


def _words(text: str) -> tuple[str, ...]:
    return tuple(w.strip() for w in text.split(",") if w.strip())


@dataclass(frozen=True)
class Observables:
    """What to measure; all times are counted from the end of the pulse."""

    forward: bool = True
    rate_windows: tuple[tuple[float, float], ...] = ()
    spectrum_window: tuple[float, float] | None = None  # (center, width)
    spectrum_oversample: int = 1
    plateau_window: tuple[float, float] | None = None
    plateau_threshold: float = 0.01
    plateau_smoothing: int = 1
    rate_smoothing: int = 0


@dataclass(frozen=True)
class DimerSettings:
    r0: float = 3.5
    r_m: float = 0.1
    v_rel: float = 0.2
    start: tuple[float, float, float] | None = None
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    initial_modes: tuple[str, ...] = ("longest",)
    transverse: str = "in-plane"
    kr_values: tuple[float, ...] = ()
    kr_min: float = 0.3
    kr_max: float = 30.0
    kr_points: int = 30


@dataclass(frozen=True)
class TheorySettings:
    density: float = 0.005
    box_edge: float = 50.0
    v0: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0)
    alpha: float = CUBE_ALPHA
    profile: str = "lorentzian"
    detuning: float = 0.0


# section -> key -> (parser, target)
SCHEMA = {
    "scenario": {"kind": str, "name": str, "workers": int},
    "ensemble": {"n_atoms": _ints, "density": float, "box_edge": _optional(float), "v0": _floats,
                 "seed": int, "realizations": int},
    "pulse": {"rabi_amplitude": float, "detuning": float, "duration": float,
              "propagation_direction": _vector, "polarization": str, "start": float},
    "integration": {"dt": float, "t_end": float, "sample_stride": int, "kernel_rebuild_interval": int,
                    "drive_dt": _optional(float), "near_radius": float, "early_dt": _optional(float),
                    "early_span": float},
    "observables": {"forward": _bool, "rate_windows": _windows, "spectrum_window": _optional(_center_width),
                    "spectrum_oversample": int, "plateau_window": _optional(_window),
                    "plateau_threshold": float, "plateau_smoothing": int, "rate_smoothing": int},
    "dimer": {"r0": float, "r_m": float, "v_rel": float, "start": _optional(_vector), "direction": _vector,
              "initial_modes": _words, "transverse": str, "kr_values": _floats, "kr_min": float,
              "kr_max": float, "kr_points": int},
    "theory": {"density": float, "box_edge": float, "v0": _floats, "alpha": float, "profile": str,
               "detuning": float},
}


@dataclass(frozen=True)
class Scenario:
    kind: str
    name: str = "scenario"
    ensemble: EnsembleConfig | None = None
    v0_values: tuple[float, ...] = (0.0,)
    n_values: tuple[int, ...] = ()
    pulse: Pulse = field(default_factory=Pulse)
    plan: IntegrationPlan = field(default_factory=IntegrationPlan)
    observables: Observables = field(default_factory=Observables)
    dimer: DimerSettings = field(default_factory=DimerSettings)
    theory: TheorySettings = field(default_factory=TheorySettings)
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.kind == "ensemble" and self.ensemble is None:
            raise ConfigError("an ensemble scenario needs an [ensemble] section")

    def members(self) -> list[tuple[str, EnsembleConfig]]:
        """(tag, config) for each point of an N x v0 sweep."""
        base = self.ensemble
        ns = self.n_values or (base.n_atoms,)
        multi = len(ns) > 1 or len(self.v0_values) > 1
        out = []
        for n, v0 in itertools.product(ns, self.v0_values):
            box = base.box_edge if len(ns) == 1 else None
            cfg = EnsembleConfig(n, base.density, box, v0, base.seed, base.realizations)
            tag = f"N{n}_v{v0:g}" if multi else ""
            out.append((tag, cfg))
        return out

    def with_overrides(self, *, seed=None, realizations=None, workers=None) -> "Scenario":
        raw = {k: dict(v) for k, v in self.raw.items()}
        if seed is not None:
            raw.setdefault("ensemble", {})["seed"] = str(seed)
        if realizations is not None:
            raw.setdefault("ensemble", {})["realizations"] = str(realizations)
        if workers is not None:
            raw.setdefault("scenario", {})["workers"] = str(workers)
        return scenario_from_dict(raw)


def _build(cls, values: dict, **fixed):
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {k: v for k, v in values.items() if k in names}
    kwargs.update(fixed)
    return cls(**kwargs)


def scenario_from_dict(raw: dict[str, dict[str, str]]) -> Scenario:
    """Validate string-valued sections and build a :class:`Scenario`."""
    parsed: dict[str, dict] = {}
    for section, items in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        parsed[section] = {}
        for key, text in items.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            try:
                parsed[section][key] = SCHEMA[section][key](str(text))
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
    head = parsed.get("scenario", {})
    kind = head.get("kind")
    if kind is None:
        kind = "ensemble" if "ensemble" in parsed else "theory" if "theory" in parsed else None
    if kind is None:
        raise ConfigError("scenario kind is not given and cannot be inferred")
    try:
        ensemble, v0_values, n_values = None, (0.0,), ()
        if "ensemble" in parsed:
            e = dict(parsed["ensemble"])
            ns = e.pop("n_atoms", None)
            if not ns:
                raise ConfigError("[ensemble] needs n_atoms")
            v0_values = e.pop("v0", (0.0,)) or (0.0,)
            n_values = ns if len(ns) > 1 else ()
            if len(ns) > 1 and e.get("box_edge") is not None:
                raise ConfigError("box_edge cannot be fixed while sweeping n_atoms")
            ensemble = EnsembleConfig(ns[0], v0=v0_values[0], **e)
            for n, v in itertools.product(ns, v0_values):
                EnsembleConfig(n, ensemble.density, None, v, ensemble.seed, ensemble.realizations)
        pulse = _build(Pulse, parsed.get("pulse", {}))
        plan = _build(IntegrationPlan, parsed.get("integration", {}))
        obs = _build(Observables, parsed.get("observables", {}))
        dimer = _build(DimerSettings, parsed.get("dimer", {}))
        theory = _build(TheorySettings, parsed.get("theory", {}))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return Scenario(kind, head.get("name", "scenario"), ensemble, v0_values, n_values, pulse, plan, obs,
                    dimer, theory, head.get("workers", 1),
                    raw={k: {kk: str(vv) for kk, vv in v.items()} for k, v in raw.items()})


def parse_config(text: str) -> Scenario:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",), strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return scenario_from_dict({s: dict(parser[s]) for s in parser.sections()})


def load_scenario(path) -> Scenario:
    """Read a scenario file, or the configuration stored in a run manifest."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return scenario_from_dict(json.loads(text)["config"])
    return parse_config(text)


# ---------------------------------------------------------------------------
# ensemble runs


@dataclass
class RealizationResult:
    index: int
    times: np.ndarray | None = None
    P_ex: np.ndarray | None = None
    I_total: np.ndarray | None = None
    I_forward: np.ndarray | None = None
    spectrum: Spectrum | None = None
    flags: dict = field(default_factory=dict)
    diverged: bool = False


def simulate_realization(config: EnsembleConfig, pulse: Pulse, plan: IntegrationPlan,
                         observables: Observables, index: int) -> RealizationResult:
    """One disorder realization: integrate, then reduce to post-pulse observables."""
    atoms = sample_atoms(config, index)
    run = integrate(atoms, pulse, plan)
    forward = np.asarray(pulse.propagation_direction)
    spec_win = observables.spectrum_window
    if spec_win is not None:
        directions = detection_directions(forward)
        pols = np.stack([polarization_pair(n) for n in directions])  # (D, 2, 3)
        lo = spec_win[0] - spec_win[1] / 2
        hi = spec_win[0] + spec_win[1] / 2
    times, pex, itot, ifwd, spec_t, spec_a = [], [], [], [], [], []
    try:
        for s in run:
            # clean off the float residue of subtracting the pulse end
            t = round(s.t - pulse.end, 10)
            if t < -1e-9:
                continue
            times.append(t)
            pex.append(float(np.vdot(s.beta, s.beta).real))
            itot.append(s.intensity)
            ifwd.append(float(directional_intensity(s.beta, s.positions, forward)[0])
                        if observables.forward else math.nan)
            if spec_win is not None and lo - 1e-9 <= t <= hi + 1e-9:
                fields = radiated_field(s.beta, s.positions, directions)
                spec_t.append(t)
                spec_a.append(np.einsum("dpk,dk->dp", pols.conj(), fields))
    except DivergenceError as exc:
        return RealizationResult(index, flags={"divergence_t": exc.t, **_flags(run)}, diverged=True)
    spectrum = None
    if spec_win is not None:
        spectrum = stft_spectrum(np.array(spec_t), np.array(spec_a), spec_win[0], spec_win[1],
                                 oversample=observables.spectrum_oversample)
    return RealizationResult(index, np.array(times), np.array(pex), np.array(itot), np.array(ifwd),
                             spectrum, _flags(run))


def _flags(run) -> dict:
    meta = run.metadata
    return {"kernel_rebuilds": meta["kernel_rebuilds"], "close_pair_events": meta["close_pair_events"],
            "kernel_backend": meta["kernel_backend"]}


def _worker(args):
    from threadpoolctl import threadpool_limits

    with threadpool_limits(1):
        return simulate_realization(*args)


@dataclass
class EnsembleResult:
    config: EnsembleConfig
    series: ObservableSeries
    spectrum: Spectrum | None
    realizations: list[RealizationResult]
    excluded: list[int]
    summary: dict


def run_realizations(config: EnsembleConfig, pulse: Pulse, plan: IntegrationPlan,
                     observables: Observables, workers: int = 1) -> list[RealizationResult]:
    """All realizations in index order; the result does not depend on ``workers``."""
    jobs = [(config, pulse, plan, observables, k) for k in range(config.realizations)]
    if workers <= 1 or len(jobs) == 1:
        return [_worker(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_worker, jobs))


def reduce_realizations(config: EnsembleConfig, observables: Observables,
                        results: list[RealizationResult]) -> EnsembleResult:
    """Fixed-order average over non-divergent realizations, then rates."""
    kept = [r for r in results if not r.diverged]
    excluded = [r.index for r in results if r.diverged]
    if len(excluded) > MAX_EXCLUDED_FRACTION * len(results):
        raise RuntimeError(f"{len(excluded)} of {len(results)} realizations diverged: {excluded}")
    times = kept[0].times

    def mean(attr):
        acc = np.zeros_like(getattr(kept[0], attr))
        for r in kept:
            acc = acc + getattr(r, attr)
        return acc / len(kept)

    P, I, F = mean("P_ex"), mean("I_total"), mean("I_forward")
    gamma, tau = instantaneous_rate(times, I, smooth=observables.rate_smoothing)
    series = ObservableSeries(times, P, I, F, gamma, tau)
    spectrum = None
    if kept[0].spectrum is not None:
        acc = np.zeros_like(kept[0].spectrum.per_direction)
        for r in kept:
            acc = acc + r.spectrum.per_direction
        per_dir = acc / len(kept)
        s0 = kept[0].spectrum
        spectrum = Spectrum(s0.omega, per_dir.mean(axis=1), s0.window_center, s0.window_width, per_dir)
    summary = _summarize(config, observables, series, spectrum)
    return EnsembleResult(config, series, spectrum, results, excluded, summary)


def _summarize(config, observables, series, spectrum) -> dict:
    out: dict = {}
    rates = []
    for t1, t2 in observables.rate_windows:
        entry = {"window": [t1, t2], "total": average_rate(series.times, series.I_total, t1, t2)}
        if observables.forward:
            entry["forward"] = average_rate(series.times, series.I_forward, t1, t2)
        rates.append(entry)
    if rates:
        out["average_rates"] = rates
    if observables.plateau_window is not None:
        p = fit_plateau(series.times, series.tau_inst, observables.plateau_window,
                        threshold=observables.plateau_threshold, smoothing=observables.plateau_smoothing)
        out["plateau"] = {"found": p.found, "tau_d": None if not p.found else p.tau_d,
                          "window": None if p.window is None else list(p.window), "threshold": p.threshold}
    if spectrum is not None:
        out["spectral_fwhm"] = spectral_fwhm(spectrum)
    b0, b_v = optical_thickness(config.density, config.box_edge, config.v0)
    out["theory"] = {"b0": b0, "b_v": b_v, "slab_rate": slab_initial_rate(b0, b_v),
                     "tau_d": diffusion_time(b_v)}
    return out


def run_ensemble(scenario: Scenario, out_dir=None, workers: int | None = None) -> list[EnsembleResult]:
    """Run every sweep member; write outputs under ``out_dir`` when given."""
    if scenario.kind != "ensemble":
        raise ConfigError("run_ensemble needs an ensemble scenario")
    workers = scenario.workers if workers is None else workers
    results = []
    for tag, cfg in scenario.members():
        start = time.perf_counter()
        reals = run_realizations(cfg, scenario.pulse, scenario.plan, scenario.observables, workers)
        res = reduce_realizations(cfg, scenario.observables, reals)
        if out_dir is not None:
            target = Path(out_dir) / tag if tag else Path(out_dir)
            write_ensemble(target, scenario, res, wall_clock=time.perf_counter() - start, workers=workers)
        results.append(res)
    return results


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    return repr(float(x))


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def save_npz(path: Path, **arrays) -> None:
    """Like ``np.savez`` but with fixed entry timestamps, so equal data give equal bytes."""
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for key, val in arrays.items():
            info = zipfile.ZipInfo(f"{key}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            with zf.open(info, "w", force_zip64=True) as fid:
                np.lib.format.write_array(fid, np.asanyarray(val), allow_pickle=False)


def manifest(scenario: Scenario, extra: dict) -> dict:
    return {
        "config": scenario.raw,
        "code_version": __version__,
        "kernel_backend": BACKEND,
        "numpy": np.__version__,
        "python": platform.python_version(),
        **extra,
    }


def write_manifest(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)}")


def write_ensemble(out: Path, scenario: Scenario, res: EnsembleResult, wall_clock: float, workers: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "intensity.csv", ObservableSeries.COLUMNS, res.series.as_array())
    if res.spectrum is not None:
        d = res.spectrum.per_direction.shape[1]
        header = ["omega", "density_avg"] + [f"density_dir_{k:02d}" for k in range(d)]
        write_csv(out / "spectrum.csv", header,
                  np.column_stack([res.spectrum.omega, res.spectrum.density, res.spectrum.per_direction]))
    kept = [r for r in res.realizations if not r.diverged]
    save_npz(out / "realizations.npz", index=np.array([r.index for r in kept]),
             t=res.series.times, P_ex=np.array([r.P_ex for r in kept]),
             I_total=np.array([r.I_total for r in kept]), I_forward=np.array([r.I_forward for r in kept]))
    cfg = res.config
    write_manifest(out / "manifest.json", manifest(scenario, {
        "resolved": {
            "ensemble": dataclasses.asdict(cfg),
            "pulse": dataclasses.asdict(scenario.pulse),
            "integration": dataclasses.asdict(scenario.plan),
            "observables": dataclasses.asdict(scenario.observables),
        },
        "seeds": {"seed": cfg.seed, "realization_indices": list(range(cfg.realizations))},
        "excluded_realizations": res.excluded,
        "realization_flags": {str(r.index): r.flags for r in res.realizations},
        "detection_directions": detection_directions(scenario.pulse.propagation_direction).tolist(),
        "summary": res.summary,
        "workers": workers,
        "wall_clock_s": wall_clock,
    }))


# ---------------------------------------------------------------------------
# dimer and theory


def _resolve_mode(name: str, r0: float):
    longest, shortest = extreme_classes(r0)
    if name == "longest":
        return longest
    if name == "shortest":
        return shortest
    try:
        eps, p = (int(x) for x in name.replace("eps", "").replace("p", "").split("/"))
    except ValueError as exc:
        raise ConfigError(f"initial mode must be longest, shortest, all or 'eps/p', got {name!r}") from exc
    if (eps, p) not in CLASS_ORDER:
        raise ConfigError(f"no class {(eps, p)}")
    return (eps, p)


def dimer_scenarios(settings: DimerSettings) -> list[tuple[str, FlybyScenario]]:
    names = settings.initial_modes
    if "all" in names:
        names = tuple(f"{e:+d}/{p}" for e, p in CLASS_ORDER)
    out = []
    for name in names:
        if settings.start is None:
            base = FlybyScenario.from_closest_approach(settings.r0, settings.r_m, settings.v_rel)
            start = base.start
        else:
            start = settings.start
        r0 = float(np.linalg.norm(start))
        mode = _resolve_mode(name, r0)
        sc = FlybyScenario(tuple(start), settings.v_rel, settings.direction, mode, settings.transverse)
        tag = name if name in ("longest", "shortest") else f"eps{mode[0]:+d}_p{mode[1]}"
        out.append((tag, sc))
    return out


def run_dimer(scenario: Scenario, out_dir=None, mode: str | None = None) -> dict:
    """Fly-by time series (``dimer-flyby``) or the closed-form mode table (``dimer-modes``)."""
    kind = mode or scenario.kind
    s = scenario.dimer
    start = time.perf_counter()
    if kind in ("modes", "dimer-modes"):
        kr = s.kr_values or tuple(np.geomspace(s.kr_min, s.kr_max, s.kr_points))
        rows = []
        for x in kr:
            for m in dimer_modes(float(x)):
                rows.append((x, m.epsilon, m.p, m.q, m.shift, m.width))
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            write_csv(out / "dimer_modes.csv", ("k0r", "epsilon", "p", "q", "delta_c", "gamma_c"),
                      [(r[0], str(r[1]), str(r[2]), str(r[3]), r[4], r[5]) for r in rows])
            write_manifest(out / "manifest.json", manifest(scenario, {
                "class_labels": {f"{e:+d}/{p}": f"epsilon={e:+d}, p={p}, |q|={2 if p == 0 else 1}"
                                 for e, p in CLASS_ORDER},
                "wall_clock_s": time.perf_counter() - start}))
        return {"modes": rows}
    if kind not in ("flyby", "dimer-flyby"):
        raise ConfigError(f"unknown dimer mode {kind!r}")
    results = {}
    explicit_end = "t_end" in scenario.raw.get("integration", {})
    for tag, sc in dimer_scenarios(s):
        plan = scenario.plan
        if not explicit_end:
            # default: a symmetric pass, ending as far out as it started
            span = 2 * sc.closest_approach_time if sc.v_rel > 0 else 10.0
            plan = dataclasses.replace(plan, t_end=round(span / plan.dt) * plan.dt)
        results[tag] = flyby(sc, plan)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        header = ("t", "k0r", "P_ex", "I_total", "pop_class1", "pop_class2", "pop_class3", "pop_class4",
                  "P_ref")
        for tag, res in results.items():
            name = "dimer_flyby.csv" if len(results) == 1 else f"dimer_flyby_{tag}.csv"
            write_csv(out / name, header, np.column_stack([res.times, res.kr, res.P_ex, res.I_total,
                                                           res.populations, np.exp(-res.times)]))
        write_manifest(out / "manifest.json", manifest(scenario, {
            "runs": {tag: res.metadata for tag, res in results.items()},
            "population_columns": [f"epsilon={e:+d}, p={p}, |q|={2 if p == 0 else 1}" for e, p in CLASS_ORDER],
            "wall_clock_s": time.perf_counter() - start}))
    return results


def theory_table(settings: TheorySettings) -> list[tuple[float, float, float, float, float]]:
    rows = []
    for v0 in settings.v0:
        b0, b_v = optical_thickness(settings.density, settings.box_edge, v0, detuning=settings.detuning,
                                    profile=settings.profile)
        rows.append((v0, b0, b_v, slab_initial_rate(b0, b_v), diffusion_time(b_v, settings.alpha)))
    return rows


def run_theory(scenario: Scenario, out_dir=None) -> list[tuple]:
    """Theory table from a [theory] section, or for each member of an ensemble sweep."""
    if "theory" in scenario.raw or scenario.ensemble is None:
        rows = theory_table(scenario.theory)
    else:
        rows = []
        for _, cfg in scenario.members():
            settings = dataclasses.replace(scenario.theory, density=cfg.density, box_edge=cfg.box_edge,
                                           v0=(cfg.v0,), detuning=scenario.pulse.detuning)
            rows.extend(theory_table(settings))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "theory.csv", ("k0v0", "b0", "b_v", "slab_rate", "tau_d"), rows)
        write_manifest(out / "manifest.json", manifest(scenario, {}))
    return rows


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
