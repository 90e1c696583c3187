"""Scenario runners behind the CLI: curve tables, calibration sweeps, image
scans, pixel-wise variance analysis and resolution benchmarking.

Configuration is a flat ``key = value`` text file (``#`` comments allowed,
lists comma-separated); every run writes a ``manifest.txt`` echoing the
fully-resolved configuration plus its hash and seed, and re-running a
manifest reproduces the outputs byte for byte.  Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, EstimationError, ParameterError
from .estimation import (
    EstimateSeries,
    gamma_analytic,
    gamma_empirical,
    gamma_vs_series,
)
from .fileio import write_csv, write_pgm16, write_stack_csv
from .imaging import (
    ProbeSpot,
    ScanConfig,
    group_dip_significance,
    pixelwise_precision,
    raster_scan,
    resolution_metric,
)
from .photonstats import RngStream
from .pipelines import (
    differential_calibration_ratio,
    differential_series,
    klyshko_calibration_ratio,
    klyshko_series,
)
from .presets import (
    DARK_RATE_HZ,
    ETA_DET,
    ETA_HERALD,
    ETA_OPT,
    ETA_PRE_SAMPLE,
    ETA_SWITCH,
    HERALD_RATE_HZ,
    P_LEAK,
    gamma_reference,
)
from .targets import (
    make_glyph_phantom,
    make_letter_patch,
    make_resolution_target,
    resolution_target_layout,
)
from .twinbeam import OpticalChain, effective_klyshko

__all__ = [
    "SCENARIOS",
    "ScenarioConfig",
    "load_config",
    "run_scenario",
    "run_figure1",
    "run_calibration",
    "run_scan",
    "run_variance",
    "run_target",
]

SCENARIOS = ("figure1", "calibrate", "scan", "variance", "target")

# stream-key scenario ids; imaging sub-pipelines get distinct ids so the
# quantum / differential / bright images never share a stream
_SCEN_ID = {"figure1": 1, "calibrate": 2, "scan": 3, "variance": 4, "target": 5,
            "scan-differential": 31, "scan-bright": 32,
            "variance-differential": 41}


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully-resolved flat configuration shared by all scenarios."""

    scenario: str
    seed: int = 20260808
    plot: bool = True
    workers: int = 1
    # optical chain (rates are per second; per-window means scale by window_s)
    herald_rate_hz: float = HERALD_RATE_HZ
    dark_rate_hz: float = DARK_RATE_HZ
    window_s: float = 1.0
    eta_herald: float = ETA_HERALD
    eta_switch: float = ETA_SWITCH
    p_leak: float = P_LEAK
    eta_pre_sample: float = ETA_PRE_SAMPLE
    eta_opt: float = ETA_OPT
    eta_det: float = ETA_DET
    split: float = 0.5
    # scan geometry
    step_um: float = 2.0
    width_px: int = 150
    height_px: int = 75
    windows_per_pixel: int = 1
    repetitions: int = 1
    spot_fwhm_um: float = 3.0
    map_pitch_um: float = 0.5
    # figure1
    source_klyshko: Tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9)
    eta_grid_points: int = 41
    # calibrate
    eta_sweep: Tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(21))
    series_count: int = 13
    windows_per_series: int = 40
    calibration_windows: int = 800
    dif_windows: int = 10000
    # scan
    map_kind: str = "phantom"
    bright_factor: float = 10000.0
    # variance
    mean_transmittance: float = 0.911
    hist_bin_width: float = 0.005
    drift_span: float = 0.0
    # target
    target_widths_um: Tuple[float, ...] = (5.0, 4.0, 3.0, 2.0, 1.0)
    line_eta: float = 0.05
    target_margin_um: float = 10.0
    target_height_um: float = 12.0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; "
                              f"expected one of {SCENARIOS}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be a non-negative 64-bit integer")

    def chain(self) -> OpticalChain:
        return OpticalChain(
            pair_rate=self.herald_rate_hz / self.eta_herald * self.window_s,
            eta_herald=self.eta_herald,
            eta_switch=self.eta_switch,
            p_leak=self.p_leak,
            eta_pre_sample=self.eta_pre_sample,
            eta_opt=self.eta_opt,
            eta_det=self.eta_det,
            dark_mean=self.dark_rate_hz * self.window_s,
        )

    def spot(self) -> ProbeSpot:
        return ProbeSpot.from_fwhm(self.spot_fwhm_um)

    def resolved(self) -> Dict[str, str]:
        """Simulation-defining keys; execution knobs (plot, workers) never
        change outputs and stay out of the manifest and hash."""
        return {f.name: _format_value(getattr(self, f.name))
                for f in fields(self) if f.name not in ("plot", "workers")}

    def config_hash(self) -> str:
        canon = "\n".join(f"{k}={v}" for k, v in sorted(self.resolved().items()))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def manifest_line(self) -> str:
        return (f"scenario={self.scenario} config_hash={self.config_hash()} "
                f"seed={self.seed}")


# defaults that differ per scenario (desk-scale operating points)
_SCENARIO_DEFAULTS: Dict[str, Dict] = {
    "figure1": {},
    "calibrate": {},
    "scan": {},
    "variance": {"width_px": 14, "height_px": 26, "repetitions": 80},
    # short windows: the dip criterion needs per-pixel shot noise large
    # enough that an unresolvable pair stays statistically unresolved
    "target": {"window_s": 0.0004, "step_um": 0.5, "height_px": 1,
               "repetitions": 4, "map_pitch_um": 0.1,
               "calibration_windows": 400},
}

_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind.startswith("Tuple"):
            if not raw:
                return ()
            return tuple(float(part) for part in raw.split(","))
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} = {raw!r}") from exc


def load_config(scenario: str, path: Optional[str] = None,
                overrides: Optional[Dict] = None) -> ScenarioConfig:
    """Resolve a configuration: scenario defaults <- file <- overrides."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    values: Dict = {"scenario": scenario}
    values.update(_SCENARIO_DEFAULTS[scenario])
    if path is not None:
        for key, raw in _read_config_file(path).items():
            if key == "config_hash":
                continue  # manifests carry their hash; recomputed on output
            if key == "scenario":
                if raw != scenario:
                    raise ConfigError(
                        f"config file is for scenario {raw!r}, not {scenario!r}")
                continue
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _parse_value(key, raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown override {key!r}")
        values[key] = value
    try:
        config = ScenarioConfig(**values)
        config.chain()  # every efficiency field is validated at parse time
        config.spot()
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def _read_config_file(path) -> Dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    entries: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        entries[key.strip()] = raw.strip()
    return entries


def write_manifest(config: ScenarioConfig, out_dir: Path,
                   results: Optional[Dict[str, str]] = None) -> Path:
    lines = [f"{k} = {v}" for k, v in sorted(config.resolved().items())]
    lines.append(f"config_hash = {config.config_hash()}")
    if results:
        lines.append("# results")
        lines.extend(f"# result: {k}={v}" for k, v in results.items())
    path = out_dir / "manifest.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def run_scenario(config: ScenarioConfig, out_dir) -> Dict:
    runner = {"figure1": run_figure1, "calibrate": run_calibration,
              "scan": run_scan, "variance": run_variance,
              "target": run_target}[config.scenario]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return runner(config, out)


# --------------------------------------------------------------------------
# figure1: analytic precision-ratio curves, direct vs feed-forward gating

def feedforward_klyshko(source_klyshko: float, eta_switch: float,
                        p_leak: float):
    """Effective pair for a symmetric-Klyshko source behind a lossy gate."""
    chain = OpticalChain(pair_rate=1.0, eta_herald=source_klyshko,
                         eta_switch=eta_switch, p_leak=p_leak,
                         eta_pre_sample=source_klyshko)
    return effective_klyshko(chain)


def run_figure1(config: ScenarioConfig, out_dir: Path) -> Dict:
    grid = np.linspace(0.0, 1.0, config.eta_grid_points)
    header = ["eta_sample"]
    for k in config.source_klyshko:
        header += [f"gamma_direct_{k:.2f}", f"gamma_feedforward_{k:.2f}"]
    rows = []
    curves = {}
    for k in config.source_klyshko:
        pair = feedforward_klyshko(k, config.eta_switch, config.p_leak)
        direct = [gamma_analytic(e, k, k) for e in grid]
        feedfwd = [gamma_analytic(e, pair.eta_probe, pair.eta_ref) for e in grid]
        curves[k] = (direct, feedfwd)
    for i, eta in enumerate(grid):
        row = [eta]
        for k in config.source_klyshko:
            row += [curves[k][0][i], curves[k][1][i]]
        rows.append(row)
    csv_path = out_dir / "figure1.csv"
    write_csv(csv_path, header, rows, config.manifest_line())
    outputs = {"csv": csv_path}
    crossover = _feedforward_crossover(config)
    manifest = write_manifest(config, out_dir,
                              {"feedforward_crossover": f"{crossover:.4f}"})
    outputs["manifest"] = manifest
    if config.plot:
        from .reports import render_figure1
        outputs["plot"] = render_figure1(out_dir / "figure1.png", grid, curves,
                                         config.manifest_line())
    return {"outputs": outputs, "grid": grid, "curves": curves,
            "crossover": crossover}


def _feedforward_crossover(config: ScenarioConfig) -> float:
    """Source Klyshko above which direct exposure beats feed-forward at
    unit transmittance (bisection on the analytic curves)."""
    def advantage(k):
        pair = feedforward_klyshko(k, config.eta_switch, config.p_leak)
        return gamma_analytic(1.0, pair.eta_probe, pair.eta_ref) \
            - gamma_analytic(1.0, k, k)
    lo, hi = 0.3, 0.95
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if advantage(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# calibrate: simulated neutral-density sweep with error bars

def run_calibration(config: ScenarioConfig, out_dir: Path) -> Dict:
    chain = config.chain()
    base = RngStream(config.seed, (_SCEN_ID["calibrate"],))
    cal_ratio = klyshko_calibration_ratio(
        chain, base.substream(10**6), config.calibration_windows)
    pair = effective_klyshko(chain)
    dif_mean = chain.mean_exposure / config.split
    dif_cal = differential_calibration_ratio(
        dif_mean, config.split, chain.eta_det, base.substream(10**6 + 1),
        config.calibration_windows)

    header = ["eta_sample", "status", "gamma", "gamma_stderr", "gamma_pooled",
              "gamma_abs", "gamma_dif", "gamma_analytic", "gamma_model",
              "n_series", "windows_per_series"]
    rows: List[list] = []
    records = []
    for idx, eta in enumerate(config.eta_sweep):
        try:
            record = _calibration_point(config, chain, eta, idx, base,
                                        cal_ratio, dif_cal, dif_mean)
            status = "ok"
        except (EstimationError, ParameterError) as exc:
            record = None
            status = f"error:{type(exc).__name__}"
        analytic = _safe_gamma_analytic(eta, pair)
        model = gamma_reference(chain, eta) if eta > 0 else ""
        if record is None:
            rows.append([eta, status, "", "", "", "", "", analytic, model,
                         config.series_count, config.windows_per_series])
        else:
            rows.append([eta, status, record["gamma"], record["gamma_stderr"],
                         record["gamma_pooled"], record["gamma_abs"],
                         record["gamma_dif"], analytic, model,
                         config.series_count, config.windows_per_series])
            records.append(record)
    csv_path = out_dir / "calibration.csv"
    write_csv(csv_path, header, rows, config.manifest_line())
    crossing = _ssn_crossing(records)
    manifest = write_manifest(
        config, out_dir,
        {"ssn_crossing": "" if crossing is None else f"{crossing!r}"})
    outputs = {"csv": csv_path, "manifest": manifest}
    if config.plot:
        from .reports import render_calibration
        outputs["plot"] = render_calibration(out_dir / "calibration.png",
                                             records, chain,
                                             config.manifest_line())
    return {"outputs": outputs, "rows": rows, "records": records,
            "ssn_crossing": crossing}


def _calibration_point(config, chain, eta, idx, base, cal_ratio, dif_cal,
                       dif_mean) -> Dict:
    gammas, gammas_abs = [], []
    all_estimates = []
    exposure = 0.0
    for series_idx in range(config.series_count):
        series = klyshko_series(chain, eta, base.substream(idx, series_idx),
                                config.windows_per_series, cal_ratio)
        report = gamma_empirical(series, baseline_eta_det=chain.eta_det)
        gammas.append(report.gamma)
        gammas_abs.append(gamma_empirical(series, baseline_eta_det=1.0).gamma)
        all_estimates.append(series.estimates)
        exposure += series.n_input_photons_mean
    pooled = EstimateSeries(np.concatenate(all_estimates),
                            n_input_photons_mean=exposure / config.series_count)
    pooled_report = gamma_empirical(pooled, baseline_eta_det=chain.eta_det)
    baseline = differential_series(dif_mean, config.split, eta, chain.eta_det,
                                   base.substream(idx, 10**6),
                                   config.dif_windows, dif_cal)
    dif_report = gamma_vs_series(pooled, baseline)
    n = len(gammas)
    return {
        "eta": eta,
        "gamma": float(np.mean(gammas)),
        "gamma_stderr": float(np.std(gammas, ddof=1) / math.sqrt(n)),
        "gamma_pooled": pooled_report.gamma,
        "gamma_abs": float(np.mean(gammas_abs)),
        "gamma_dif": dif_report.gamma,
        "eta_est": pooled.mean,
    }


def _safe_gamma_analytic(eta, pair):
    try:
        return gamma_analytic(eta, pair.eta_probe, pair.eta_ref)
    except EstimationError:
        return ""


def _ssn_crossing(records) -> Optional[float]:
    """Smallest swept transmittance whose headline gamma exceeds 1."""
    above = [r["eta"] for r in records if r["gamma"] > 1.0]
    return min(above) if above else None


# --------------------------------------------------------------------------
# scan: quantum vs classical images of the same map

def run_scan(config: ScenarioConfig, out_dir: Path) -> Dict:
    chain = config.chain()
    spot = config.spot()
    tmap, scan_cfg = _scan_geometry(config)
    stacks = {
        "quantum": raster_scan(tmap, spot, scan_cfg, chain, "klyshko",
                               config.seed, _SCEN_ID["scan"],
                               split=config.split,
                               calibration_windows=config.calibration_windows,
                               workers=config.workers),
        "differential": raster_scan(tmap, spot, scan_cfg, chain, "differential",
                                    config.seed, _SCEN_ID["scan-differential"],
                                    split=config.split,
                                    calibration_windows=config.calibration_windows,
                                    workers=config.workers),
        "bright": raster_scan(tmap, spot, scan_cfg,
                              chain.scaled(config.bright_factor), "direct",
                              config.seed, _SCEN_ID["scan-bright"],
                              workers=config.workers),
    }
    outputs: Dict = {}
    exposures: Dict[str, str] = {}
    manifest_line = config.manifest_line()
    for name, stack in stacks.items():
        img_path = out_dir / f"{name}.pgm"
        write_pgm16(img_path, stack.mean_image(), scale=(0.0, 1.0),
                    comments={"config_hash": config.config_hash(),
                              "seed": str(config.seed)})
        csv_path = out_dir / f"{name}.csv"
        write_stack_csv(csv_path, stack, manifest_line)
        outputs[name] = img_path
        outputs[f"{name}_csv"] = csv_path
        exposures[f"exposure_{name}"] = repr(float(stack.photons_exposed.sum()))
        exposures[f"failed_pixels_{name}"] = str(int(stack.failed.sum()))
    truth_path = out_dir / "truth.pgm"
    write_pgm16(truth_path, stacks["quantum"].eta_effective, scale=(0.0, 1.0),
                comments={"config_hash": config.config_hash(),
                          "seed": str(config.seed)})
    outputs["truth"] = truth_path
    outputs["manifest"] = write_manifest(config, out_dir, exposures)
    if config.plot:
        from .reports import render_scan
        panels = {name: stacks[name].mean_image()
                  for name in ("bright", "quantum", "differential")}
        outputs["plot"] = render_scan(out_dir / "scan.png", panels,
                                      config.step_um, config.manifest_line())
    return {"outputs": outputs, "stacks": stacks, "map": tmap}


def _scan_geometry(config: ScenarioConfig):
    width_um = config.width_px * config.step_um
    height_um = config.height_px * config.step_um
    if config.map_kind == "phantom":
        tmap = make_glyph_phantom(width_um=width_um, height_um=height_um,
                                  pitch_um=config.map_pitch_um)
    elif config.map_kind == "target":
        tmap = make_resolution_target(
            config.target_widths_um, pitch_um=config.map_pitch_um,
            line_eta=config.line_eta, margin_um=config.target_margin_um,
            height_um=max(height_um, config.target_height_um))
    else:
        raise ConfigError(f"unknown map_kind {config.map_kind!r}")
    scan_cfg = ScanConfig(step_um=config.step_um, width_px=config.width_px,
                          height_px=config.height_px,
                          windows_per_pixel=config.windows_per_pixel,
                          repetitions=config.repetitions)
    return tmap, scan_cfg


# --------------------------------------------------------------------------
# variance: repeated-scan pixel-wise precision analysis

def run_variance(config: ScenarioConfig, out_dir: Path) -> Dict:
    chain = config.chain()
    spot = config.spot()
    patch = make_letter_patch(width_px=config.width_px,
                              height_px=config.height_px,
                              step_um=config.step_um,
                              pitch_um=config.map_pitch_um, spot=spot,
                              mean_target=config.mean_transmittance)
    scan_cfg = ScanConfig(step_um=config.step_um, width_px=config.width_px,
                          height_px=config.height_px,
                          windows_per_pixel=config.windows_per_pixel,
                          repetitions=config.repetitions)
    stack = raster_scan(patch, spot, scan_cfg, chain, "klyshko", config.seed,
                        _SCEN_ID["variance"], split=config.split,
                        calibration_windows=config.calibration_windows,
                        workers=config.workers, drift_span=config.drift_span)
    dif_stack = raster_scan(patch, spot, scan_cfg, chain, "differential",
                            config.seed, _SCEN_ID["variance-differential"],
                            split=config.split,
                            calibration_windows=config.calibration_windows,
                            workers=config.workers,
                            drift_span=config.drift_span)
    pair = effective_klyshko(chain)
    analysis = pixelwise_precision(stack, baseline_eta_det=chain.eta_det,
                                   klyshko=pair,
                                   bin_width=config.hist_bin_width)
    analysis_abs = pixelwise_precision(stack, baseline_eta_det=1.0)
    # model prediction for the mean per-pixel gamma: the chain's calibration
    # relation averaged over the observed pixel transmittances, inflated by
    # the small-sample bias of a reciprocal (reps-1)-dof variance
    nu = config.repetitions - 1
    bias = nu / (nu - 2) if nu > 2 else 1.0
    mean_eta_px = stack.images.mean(axis=0).ravel()
    prediction = float(np.mean([gamma_reference(chain, e) for e in mean_eta_px])
                       * bias)
    quantum_var = float(stack.images.var(axis=0, ddof=1).mean())
    dif_var = float(dif_stack.images.var(axis=0, ddof=1).mean())

    gamma_path = out_dir / "gamma_map.pgm"
    scale_max = max(2.0, float(np.ceil(analysis.gamma_map.max())))
    write_pgm16(gamma_path, analysis.gamma_map, scale=(0.0, scale_max),
                comments={"config_hash": config.config_hash(),
                          "seed": str(config.seed)})
    manifest_line = config.manifest_line()
    hist = analysis.histogram
    hist_rows = [
        [hist.bin_edges[i], hist.bin_edges[i + 1], int(hist.counts[i]),
         hist.expected_gamma[i]]
        for i in range(len(hist.counts))]
    hist_path = out_dir / "histogram.csv"
    write_csv(hist_path, ["bin_left", "bin_right", "count", "expected_gamma"],
              hist_rows, manifest_line)
    summary = {
        "mean_gamma": analysis.mean_gamma,
        "mean_gamma_stderr": analysis.mean_gamma_stderr,
        "mean_gamma_abs": analysis_abs.mean_gamma,
        "prediction_model": prediction,
        "mean_transmittance": analysis.mean_transmittance,
        "quantum_mean_pixel_variance": quantum_var,
        "differential_mean_pixel_variance": dif_var,
    }
    summary_path = out_dir / "summary.csv"
    write_csv(summary_path, list(summary.keys()), [list(summary.values())],
              manifest_line)
    stack_path = out_dir / "stack.csv"
    write_stack_csv(stack_path, stack, manifest_line)
    outputs = {"gamma_map": gamma_path, "histogram": hist_path,
               "summary": summary_path, "stack": stack_path,
               "manifest": write_manifest(
                   config, out_dir,
                   {k: repr(v) for k, v in summary.items()})}
    if config.plot:
        from .reports import render_variance
        outputs["plot"] = render_variance(out_dir / "variance.png", analysis,
                                          config.manifest_line())
    return {"outputs": outputs, "stack": stack, "dif_stack": dif_stack,
            "analysis": analysis, "summary": summary}


# --------------------------------------------------------------------------
# target: resolution benchmark

def run_target(config: ScenarioConfig, out_dir: Path) -> Dict:
    chain = config.chain()
    spot = config.spot()
    groups, total_width = resolution_target_layout(config.target_widths_um,
                                                   config.target_margin_um)
    tmap = make_resolution_target(config.target_widths_um,
                                  pitch_um=config.map_pitch_um,
                                  line_eta=config.line_eta,
                                  margin_um=config.target_margin_um,
                                  height_um=config.target_height_um)
    width_px = round(total_width / config.step_um)
    origin_y = (config.target_height_um
                - config.height_px * config.step_um) / 2.0
    scan_cfg = ScanConfig(step_um=config.step_um, width_px=width_px,
                          height_px=config.height_px,
                          windows_per_pixel=config.windows_per_pixel,
                          repetitions=config.repetitions,
                          origin_um=(0.0, origin_y))
    stack = raster_scan(tmap, spot, scan_cfg, chain, "klyshko", config.seed,
                        _SCEN_ID["target"], split=config.split,
                        calibration_windows=config.calibration_windows,
                        workers=config.workers)
    rows = []
    for group in groups:
        dip, se, significance = group_dip_significance(stack, group,
                                                       config.step_um)
        rows.append([group.width_um, dip, se, significance,
                     int(significance >= 3.0)])
    smallest = resolution_metric(stack, groups, config.step_um)
    csv_path = out_dir / "resolution.csv"
    write_csv(csv_path, ["width_um", "dip", "pooled_se", "significance",
                         "resolved"], rows, config.manifest_line())
    manifest = write_manifest(
        config, out_dir,
        {"smallest_resolved_um":
         "none resolved" if smallest is None else repr(float(smallest))})
    outputs = {"csv": csv_path, "manifest": manifest}
    if config.plot:
        from .reports import render_target
        profile = stack.images.mean(axis=(0, 1))
        xs = (np.arange(width_px) + 0.5) * config.step_um
        outputs["plot"] = render_target(out_dir / "target.png", xs, profile,
                                        stack.eta_effective.mean(axis=0),
                                        groups, config.manifest_line())
    return {"outputs": outputs, "stack": stack, "groups": groups,
            "rows": rows, "smallest_resolved": smallest}
