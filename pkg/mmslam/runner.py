"""
End-to-end simulation loop.

Propagates the true vehicle, generates (or replays) scans, runs the SLAM
filter and scores every step against the ground truth. Also builds the
step CSV and summary JSON of a run and the all-paths vs specular-only
comparison over several seeds.
"""

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd

from mmslam import chanmodel, gospa, pmbm, rbpf
from mmslam.config import ScenarioConfig, default_scenario
from mmslam.likelihood import LIKELIHOOD_MODES, get_likelihood_model
from mmslam.models import SURFACE_TYPES, LandmarkType, VehicleState
from mmslam.storage import StorageInterface
from mmslam.utils.hashing import get_content_hasher


logger = logging.getLogger(__name__)

STATE_COMPONENTS = ("x", "y", "z", "heading", "speed", "turn_rate", "clock_bias")

__all__ = [
    "StepRecord",
    "RunResult",
    "default_scenario",
    "truth_trajectory",
    "generate_scans",
    "run",
    "run_known_vehicle",
    "records_to_frame",
    "build_outputs",
    "write_outputs",
    "summarize",
    "compare_modes",
]


@dataclass
class StepRecord:
    step: int
    truth: VehicleState
    estimate: VehicleState
    abs_errors: np.ndarray
    gospa: gospa.GospaResult
    gospa_by_type: Dict[LandmarkType, gospa.GospaResult]
    ess: float
    landmark_count: int
    wall_time: float

    @property
    def position_error(self) -> float:
        return float(np.linalg.norm(self.truth.position - self.estimate.position))


class RunResult(NamedTuple):
    records: List[StepRecord]
    landmarks: List[pmbm.EstimatedLandmark]
    snapshot: Dict[str, Any]
    mode: str
    known_vehicle: bool
    seed: int


def scan_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.default_rng([seed, 0, step])


def filter_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, 1])


def truth_trajectory(config: ScenarioConfig) -> List[VehicleState]:
    """True states for steps 0..steps, propagated without noise."""
    states = [config.truth_state()]
    for _ in range(config.steps):
        states.append(VehicleState.from_vector(rbpf.constant_turn(states[-1], config.dt)))
    return states


def generate_scans(config: ScenarioConfig, trajectory: Optional[Sequence[VehicleState]] = None) -> Dict[int, List[np.ndarray]]:
    """Scans for steps 1..steps; step k uses its own generator seeded with (seed, 0, k)."""
    trajectory = trajectory or truth_trajectory(config)
    environment = config.environment()
    statistics = chanmodel.default_statistics_table(config.scan.lateral_spread)
    return {
        k: chanmodel.generate_scan(environment, trajectory[k], config.scan, scan_rng(config.seed, k), statistics)
        for k in range(1, config.steps + 1)
    }


def _truth_landmarks(config: ScenarioConfig):
    return [(lm.va_position, lm.type) for lm in config.environment().landmarks() if lm.type != LandmarkType.BS]


def _run(
    config: ScenarioConfig,
    known_vehicle: bool,
    replay_scans: Optional[Mapping[int, List[np.ndarray]]] = None,
) -> RunResult:
    trajectory = truth_trajectory(config)
    truth_landmarks = _truth_landmarks(config)
    model = get_likelihood_model(config.likelihood_mode, floor=config.backprojection_floor)
    rng = filter_rng(config.seed)

    if known_vehicle:
        states = [trajectory[0]]
    else:
        states = rbpf.sample_prior(config.prior_mean(), config.initial_prior_std, config.particle_count, rng)

    slam = rbpf.SlamFilter(
        states,
        config.bs_position,
        model,
        config.map_params(),
        config.dt,
        config.process_noise,
        rng,
        config.ess_threshold,
    )
    environment = config.environment()
    statistics = chanmodel.default_statistics_table(config.scan.lateral_spread)
    g = config.gospa

    logger.info(
        f"Starting {'known-vehicle ' if known_vehicle else ''}run: seed {config.seed}, "
        f"{config.likelihood_mode}, {len(states)} particles, {config.steps} steps"
    )
    records = []
    result = None
    for k in range(1, config.steps + 1):
        truth = trajectory[k]
        if replay_scans is not None:
            if k not in replay_scans:
                raise ValueError(f"Replay file has no scan for step {k}")
            scan = replay_scans[k]
        else:
            scan = chanmodel.generate_scan(environment, truth, config.scan, scan_rng(config.seed, k), statistics)
        if config.likelihood_mode == "specular_only":
            scan = chanmodel.truncate_to_specular(scan)

        started = time.perf_counter()
        result = slam.step(scan, known_state=truth if known_vehicle else None)
        wall_time = time.perf_counter() - started

        estimated = [(lm.position, lm.type) for lm in result.landmarks if lm.type != LandmarkType.BS]
        overall = gospa.gospa([p for p, _ in truth_landmarks], [p for p, _ in estimated], g.p, g.c, g.alpha)
        by_type = gospa.per_type_gospa(truth_landmarks, estimated, g.p, g.c, g.alpha)

        errors = np.abs(truth.to_vector() - result.estimate.to_vector())
        errors[3] = abs(float(np.angle(np.exp(1j * (truth.heading - result.estimate.heading)))))
        record = StepRecord(k, truth, result.estimate, errors, overall, by_type, result.ess, len(estimated), wall_time)
        records.append(record)
        logger.info(
            f"Step {k}: position error {record.position_error:.3f} m, GOSPA {overall.total:.3f}, "
            f"ESS {result.ess:.1f}, landmarks {len(estimated)}, hypotheses {len(result.best_map.hypotheses)}"
        )

    snapshot = pmbm.snapshot_map(result.best_map)
    logger.info(f"Finished run: final GOSPA {records[-1].gospa.total:.3f}, {records[-1].landmark_count} landmarks")
    return RunResult(records, result.landmarks, snapshot, config.likelihood_mode, known_vehicle, config.seed)


def run(config: ScenarioConfig, replay_scans: Optional[Mapping[int, List[np.ndarray]]] = None) -> RunResult:
    """
    Full SLAM run: particle filter over the vehicle state with per-particle maps.

    Args:
        config: validated scenario configuration
        replay_scans: scans by step to use instead of live generation

    Returns:
        RunResult: step records, final landmark estimates and map snapshot

    Raises:
        FilterDivergenceError: when every particle loses its weight
    """
    return _run(config, known_vehicle=False, replay_scans=replay_scans)


def run_known_vehicle(config: ScenarioConfig, replay_scans: Optional[Mapping[int, List[np.ndarray]]] = None) -> RunResult:
    """Mapping-only run: a single particle pinned to the true vehicle state each step."""
    return _run(config, known_vehicle=True, replay_scans=replay_scans)


def records_to_frame(records: Sequence[StepRecord], timing: bool = False) -> pd.DataFrame:
    """
    Step records as a table with a fixed column order.

    Columns: step, truth_<c>, est_<c>, err_<c> for each state component,
    gospa, gospa_localization, gospa_missed, gospa_false, gospa_SM, gospa_MR,
    gospa_VR, ess, landmarks, and wall_time when timing is requested.
    """
    rows = []
    for record in records:
        row = {"step": record.step}
        for prefix, values in (
            ("truth", record.truth.to_vector()),
            ("est", record.estimate.to_vector()),
            ("err", record.abs_errors),
        ):
            row.update({f"{prefix}_{name}": float(v) for name, v in zip(STATE_COMPONENTS, values)})
        row.update({
            "gospa": record.gospa.total,
            "gospa_localization": record.gospa.localization,
            "gospa_missed": record.gospa.missed,
            "gospa_false": record.gospa.false,
        })
        row.update({f"gospa_{t.value}": record.gospa_by_type[t].total for t in SURFACE_TYPES})
        row["ess"] = record.ess
        row["landmarks"] = record.landmark_count
        if timing:
            row["wall_time"] = record.wall_time
        rows.append(row)
    return pd.DataFrame(rows)


def _landmark_entries(landmarks: Sequence[pmbm.EstimatedLandmark]) -> List[Dict[str, Any]]:
    return [
        {"id": int(lm.id), "type": lm.type.value, "position": lm.position.tolist(), "r": float(lm.existence)}
        for lm in landmarks
    ]


def build_outputs(result: RunResult, config: ScenarioConfig, timing: bool = False) -> Dict[str, str]:
    """
    Render the step CSV and summary JSON of a run.

    Returns:
        Dict with "steps.csv" and "summary.json" contents
    """
    csv_content = records_to_frame(result.records, timing).to_csv(index=False, float_format="%.12g", lineterminator="\n")
    summary = {
        "seed": result.seed,
        "mode": result.mode,
        "known_vehicle": result.known_vehicle,
        "steps": len(result.records),
        "landmarks": _landmark_entries(result.landmarks),
        "final_map": result.snapshot,
        "summary": summarize(result.records),
        "config": config.echo(),
        "csv_sha256": get_content_hasher().generate_hash(csv_content),
    }
    return {"steps.csv": csv_content, "summary.json": json.dumps(summary, indent=2, sort_keys=True) + "\n"}


def write_outputs(result: RunResult, config: ScenarioConfig, storage: StorageInterface, timing: bool = False) -> Dict[str, str]:
    """Store the run outputs; returns the locations of the files that were written."""
    stored = storage.store_run_outputs(build_outputs(result, config, timing))
    for name, location in stored.items():
        logger.info(f"Wrote {name} to {location}")
    return stored


def summarize(records: Sequence[StepRecord], from_step: int = 5) -> Dict[str, Any]:
    """
    Averages from a step onward.

    Returns:
        Dict with mean overall GOSPA, mean GOSPA per surface type, position MAE and
        per-component MAE over records with step >= from_step (the last step when the
        run is shorter)
    """
    if not records:
        raise ValueError("no step records to summarize")
    from_step = min(from_step, records[-1].step)
    selected = [r for r in records if r.step >= from_step]
    errors = np.array([r.abs_errors for r in selected])
    return {
        "from_step": from_step,
        "steps": len(selected),
        "gospa": float(np.mean([r.gospa.total for r in selected])),
        "gospa_by_type": {t.value: float(np.mean([r.gospa_by_type[t].total for r in selected])) for t in SURFACE_TYPES},
        "position_mae": float(np.mean([r.position_error for r in selected])),
        "mae": {name: float(v) for name, v in zip(STATE_COMPONENTS, errors.mean(axis=0))},
    }


def compare_modes(
    config: ScenarioConfig,
    seeds: Sequence[int],
    known_vehicle: bool = True,
    from_step: int = 5,
) -> Dict[str, Any]:
    """
    Run both likelihood modes over several seeds with identical scans per seed.

    Returns:
        Dict keyed by mode with the per-seed summaries and their mean
    """
    comparison: Dict[str, Any] = {"seeds": list(seeds), "known_vehicle": known_vehicle, "from_step": from_step}
    for mode in LIKELIHOOD_MODES:
        per_seed = []
        for seed in seeds:
            seeded = config.model_copy(update={"seed": int(seed), "likelihood_mode": mode})
            result = run_known_vehicle(seeded) if known_vehicle else run(seeded)
            per_seed.append(summarize(result.records, from_step))
        comparison[mode] = {
            "per_seed": per_seed,
            "gospa": float(np.mean([s["gospa"] for s in per_seed])),
            "gospa_by_type": {
                t.value: float(np.mean([s["gospa_by_type"][t.value] for s in per_seed])) for t in SURFACE_TYPES
            },
            "position_mae": float(np.mean([s["position_mae"] for s in per_seed])),
        }
        logger.info(f"{mode}: mean GOSPA {comparison[mode]['gospa']:.3f} over {len(per_seed)} seeds")
    return comparison


def dump_generated_scans(config: ScenarioConfig, path: Union[str, Path]) -> Dict[int, List[np.ndarray]]:
    """Generate the scans of a run and write them as JSON lines."""
    scans = generate_scans(config)
    chanmodel.dump_scans(path, sorted(scans.items()))
    return scans
