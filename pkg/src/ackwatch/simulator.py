"""Run orchestration: process, sensor, channels, attacker, coding, detectors.

Two execution paths share one source of channel randomness:

* `simulate_trace` steps the full system (state, sensor filter, coding,
  receiver and eavesdropper decoders) and records everything per step.
* `build_events` derives only the receipt/acknowledgment event streams and
  ages, vectorized.  Ages never depend on the estimation layer, so this is
  the Monte Carlo fast path; it produces bit-identical events.

Random streams are counter-derived from (seed, run_index, stream id), one
stream per noise source and per channel, so changing one channel's
parameters never perturbs another's draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coding import EstimateLog, ReceiverState, decode_receipt, encode, predict_on_dropout
from .errors import ConfigurationError, EvaluationError
from .network import AttackerPolicy, StepOutcome, decide_block, update_ack_reference
from .process_model import ProcessState, init_estimate, kalman_step, measure, step_process
from .qcd import (
    GeometricModel,
    RiskParams,
    bayes_risk,
    first_crossing,
    moving_average_detector,
    no_change_posterior_path,
)
from .scenario import DetectorConfig, Scenario

# Stream ids for counter-based splitting.
_STREAM_X0 = 0
_STREAM_PROCESS = 1
_STREAM_MEASUREMENT = 2
_STREAM_GAMMA = 3
_STREAM_GAMMA_E = 4
_STREAM_GAMMA_A = 5
_STREAM_ACTIVATION = 6


def _stream(seed: int, run_index: int, stream_id: int) -> np.random.Generator:
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(run_index, stream_id))
    return np.random.Generator(np.random.Philox(sequence))


class _RowStream:
    """Replays pre-drawn standard-normal rows through the Generator protocol
    subset the noise samplers use."""

    def __init__(self, rows: np.ndarray):
        self._rows = rows
        self._next = 0

    def standard_normal(self, size: int) -> np.ndarray:
        row = self._rows[self._next]
        if row.shape[0] != size:
            raise ConfigurationError(f"noise row has dimension {row.shape[0]}, expected {size}")
        self._next += 1
        return row


@dataclass
class ChannelDraws:
    """Realized channel outcomes and attacker activation for one run.

    Index i of each array is process step k = i + 1.  ``gamma_e`` already
    reflects a perfect-until-activation eavesdropper where configured.
    ``activation_step`` is the process step at and after which the attacker
    acts (None: never within this run); ``activation_receipt`` is the same
    change point in the legitimate-receipt domain.
    """

    gamma: np.ndarray
    gamma_e: np.ndarray
    gamma_a: np.ndarray
    policy: AttackerPolicy
    activation_step: int | None
    activation_receipt: int | None

    @property
    def horizon(self) -> int:
        return int(self.gamma.shape[0])


@dataclass
class NoiseDraws:
    """Initial state plus raw standard-normal rows for both noise sources."""

    x0: np.ndarray
    z_process: np.ndarray
    z_measurement: np.ndarray


def draw_channel_streams(scenario: Scenario, run_index: int) -> ChannelDraws:
    horizon = scenario.horizon
    seed = scenario.seed
    channels = scenario.channels
    gamma = _stream(seed, run_index, _STREAM_GAMMA).random(horizon) < channels.alpha
    gamma_e = _stream(seed, run_index, _STREAM_GAMMA_E).random(horizon) < channels.alpha_e
    gamma_a = _stream(seed, run_index, _STREAM_GAMMA_A).random(horizon) < channels.alpha_a

    attacker = scenario.attacker
    receipt_steps = np.flatnonzero(gamma) + 1

    activation_step: int | None = None
    activation_receipt: int | None = None
    if attacker.kind != "passive":
        if attacker.activation_time is not None:
            activation_step = int(attacker.activation_time)
            later = np.searchsorted(receipt_steps, activation_step, side="left")
            activation_receipt = int(later) + 1 if later < receipt_steps.size else None
        else:
            if attacker.activation_receipt is not None:
                nominal = int(attacker.activation_receipt)
            else:
                nominal = int(
                    _stream(seed, run_index, _STREAM_ACTIVATION).geometric(attacker.activation_rho)
                )
            activation_receipt = nominal
            if nominal <= receipt_steps.size:
                activation_step = int(receipt_steps[nominal - 1])

    if attacker.perfect_sync_until_activation:
        cutoff = horizon if activation_step is None else activation_step - 1
        gamma_e[: max(cutoff, 0)] = True

    policy = attacker.policy_for(activation_receipt)
    return ChannelDraws(
        gamma=gamma,
        gamma_e=gamma_e,
        gamma_a=gamma_a,
        policy=policy,
        activation_step=activation_step,
        activation_receipt=activation_receipt,
    )


def draw_noise_streams(scenario: Scenario, run_index: int) -> NoiseDraws:
    params = scenario.system_params()
    horizon = scenario.horizon
    if scenario.x0 is not None:
        x0 = np.asarray(scenario.x0, dtype=float)
    else:
        x0 = params.sample_initial_state(_stream(scenario.seed, run_index, _STREAM_X0))
    z_process = _stream(scenario.seed, run_index, _STREAM_PROCESS).standard_normal(
        (horizon, params.n)
    )
    z_measurement = _stream(scenario.seed, run_index, _STREAM_MEASUREMENT).standard_normal(
        (horizon + 1, params.m)
    )
    return NoiseDraws(x0=x0, z_process=z_process, z_measurement=z_measurement)


@dataclass
class EventStream:
    """Receipt and acknowledgment event streams with their ages.

    ``activation_receipt`` / ``activation_ack`` are the realized change
    points in the receipt and ack-receipt domains (first event at or after
    the activation step); None means the change never manifests in that
    stream within the horizon.
    """

    receipt_times: np.ndarray
    receipt_ages: np.ndarray
    ack_times: np.ndarray
    ack_ages: np.ndarray
    activation_step: int | None
    activation_receipt: int | None
    activation_ack: int | None
    horizon: int


def _first_event_at_or_after(times: np.ndarray, step: int | None) -> int | None:
    if step is None:
        return None
    pos = np.searchsorted(times, step, side="left")
    return int(pos) + 1 if pos < times.size else None


def build_events(draws: ChannelDraws) -> EventStream:
    """Vectorized event extraction from realized channel draws."""
    horizon = draws.horizon
    steps = np.arange(1, horizon + 1)
    receipts_so_far = np.cumsum(draws.gamma)

    policy = draws.policy
    if policy.kind == "passive" or policy.activation_receipt is None:
        blocked = np.zeros(horizon, dtype=bool)
    else:
        active = receipts_so_far >= policy.activation_receipt
        if policy.kind == "block_all":
            blocked = active
        else:
            blocked = active & draws.gamma & ~draws.gamma_e
    acked = draws.gamma & draws.gamma_a & ~blocked

    anchor_inclusive = np.maximum.accumulate(np.where(acked, steps, 0))
    t_before = np.concatenate(([0], anchor_inclusive[:-1]))

    receipt_times = steps[draws.gamma]
    receipt_ages = (steps - t_before)[draws.gamma]
    ack_times = steps[acked]
    ack_ages = (steps - t_before)[acked]

    activation_receipt = draws.activation_receipt
    if activation_receipt is not None and activation_receipt > receipt_times.size:
        activation_receipt = None
    return EventStream(
        receipt_times=receipt_times,
        receipt_ages=receipt_ages,
        ack_times=ack_times,
        ack_ages=ack_ages,
        activation_step=draws.activation_step,
        activation_receipt=activation_receipt,
        activation_ack=_first_event_at_or_after(ack_times, draws.activation_step),
        horizon=horizon,
    )


@dataclass
class Alarm:
    receipt_index: int
    time: int


@dataclass
class DetectorRun:
    """Posterior path of one detector over its event stream, with the alarm
    (if any) at each configured threshold."""

    name: str
    side: str
    model: GeometricModel
    event_times: np.ndarray
    z: np.ndarray
    log_z: np.ndarray
    alarms: dict[float, Alarm | None]
    change_index: int | None

    def alarm_at(self, threshold: float) -> Alarm | None:
        return self.alarms[threshold]


def evaluate_detectors(
    events: EventStream, detectors: list[DetectorConfig]
) -> dict[str, DetectorRun]:
    """Run every configured detector over its event stream.

    Receiver-side detectors consume the age of innovation at packet
    receipts; sensor-side detectors consume the age of acknowledgment at ack
    receipts.  The posterior path is threshold-free, so all thresholds of a
    detector are scored on one pass.
    """
    runs: dict[str, DetectorRun] = {}
    for config in detectors:
        if config.side == "receiver":
            ages, times, change = events.receipt_ages, events.receipt_times, events.activation_receipt
        else:
            ages, times, change = events.ack_ages, events.ack_times, events.activation_ack
        model = config.model()
        z, log_z = no_change_posterior_path(ages, model)
        alarms: dict[float, Alarm | None] = {}
        for threshold in config.thresholds:
            tau = first_crossing(z, threshold)
            alarms[threshold] = None if tau is None else Alarm(tau, int(times[tau - 1]))
        runs[config.name] = DetectorRun(
            name=config.name,
            side=config.side,
            model=model,
            event_times=times,
            z=z,
            log_z=log_z,
            alarms=alarms,
            change_index=change,
        )
    return runs


@dataclass
class RunTrace:
    """Everything one run produced: per-step records, event streams, detector
    paths, and the moving-average baseline."""

    scenario: Scenario
    run_index: int
    steps: dict[str, np.ndarray]
    events: EventStream
    detectors: dict[str, DetectorRun]
    moving_average: np.ndarray

    @property
    def horizon(self) -> int:
        return self.events.horizon


def simulate_trace(scenario: Scenario, draws: ChannelDraws, noise: NoiseDraws) -> RunTrace:
    """Step the full system over the horizon and record the trace.

    At k=0 the sensor initializes from its first measurement and broadcasts
    that estimate once, so sensor, receiver, and eavesdropper share a
    synchronized origin at reference time 0.  Transmissions run from k=1.
    """
    params = scenario.system_params()
    horizon = scenario.horizon
    if draws.horizon != horizon:
        raise ConfigurationError("channel draws do not match the scenario horizon")
    n = params.n

    process_noise = _RowStream(noise.z_process)
    measurement_noise = _RowStream(noise.z_measurement)

    state = ProcessState(k=0, x=noise.x0)
    y0 = measure(state, params, measurement_noise)
    sensor = init_estimate(y0, params)
    sensor_log = EstimateLog()
    sensor_log.put(0, sensor.x_hat_s, sensor.P_s)
    receiver = ReceiverState.at_origin(params, sensor)
    eavesdropper = ReceiverState.at_origin(params, sensor)

    rows = horizon + 1
    steps: dict[str, np.ndarray] = {
        "k": np.arange(rows),
        "x": np.zeros((rows, n)),
        "x_hat_s": np.zeros((rows, n)),
        "x_hat": np.zeros((rows, n)),
        "x_hat_e": np.zeros((rows, n)),
        "P": np.zeros((rows, n, n)),
        "P_e": np.zeros((rows, n, n)),
        "gamma": np.zeros(rows, dtype=bool),
        "gamma_e": np.zeros(rows, dtype=bool),
        "gamma_a": np.zeros(rows, dtype=bool),
        "blocked": np.zeros(rows, dtype=bool),
        "ack_delivered": np.zeros(rows, dtype=bool),
        "t_ref": np.zeros(rows, dtype=np.int64),
    }
    steps["x"][0] = state.x
    steps["x_hat_s"][0] = sensor.x_hat_s
    steps["x_hat"][0] = receiver.x_hat
    steps["x_hat_e"][0] = eavesdropper.x_hat
    steps["P"][0] = receiver.P
    steps["P_e"][0] = eavesdropper.P

    receipt_times: list[int] = []
    receipt_ages: list[int] = []
    ack_times: list[int] = []
    ack_ages: list[int] = []

    t_ref = 0
    receipts = 0
    for k in range(1, horizon + 1):
        state = step_process(state, params, process_noise)
        y = measure(state, params, measurement_noise)
        sensor = kalman_step(sensor, y, params)
        sensor_log.put(k, sensor.x_hat_s, sensor.P_s)
        packet = encode(sensor, sensor_log, t_ref, k, params)

        i = k - 1
        gamma = bool(draws.gamma[i])
        gamma_e = bool(draws.gamma_e[i])
        gamma_a = bool(draws.gamma_a[i])
        if gamma:
            receipts += 1
        blocked = decide_block(draws.policy, receipts, gamma, gamma_e)
        outcome = StepOutcome.build(k, gamma, gamma_e, gamma_a, blocked)

        if gamma:
            receiver = decode_receipt(receiver, packet, params)
            receipt_times.append(k)
            receipt_ages.append(k - packet.ref_time)
        else:
            receiver = predict_on_dropout(receiver, params)
        if gamma_e:
            eavesdropper = decode_receipt(eavesdropper, packet, params)
        else:
            eavesdropper = predict_on_dropout(eavesdropper, params)
        if outcome.ack_delivered:
            ack_times.append(k)
            ack_ages.append(k - packet.ref_time)

        steps["x"][k] = state.x
        steps["x_hat_s"][k] = sensor.x_hat_s
        steps["x_hat"][k] = receiver.x_hat
        steps["x_hat_e"][k] = eavesdropper.x_hat
        steps["P"][k] = receiver.P
        steps["P_e"][k] = eavesdropper.P
        steps["gamma"][k] = gamma
        steps["gamma_e"][k] = gamma_e
        steps["gamma_a"][k] = gamma_a
        steps["blocked"][k] = blocked
        steps["ack_delivered"][k] = outcome.ack_delivered
        steps["t_ref"][k] = t_ref

        t_ref = update_ack_reference(t_ref, outcome)

    receipt_times_arr = np.asarray(receipt_times, dtype=np.int64)
    ack_times_arr = np.asarray(ack_times, dtype=np.int64)
    activation_receipt = draws.activation_receipt
    if activation_receipt is not None and activation_receipt > receipt_times_arr.size:
        activation_receipt = None
    events = EventStream(
        receipt_times=receipt_times_arr,
        receipt_ages=np.asarray(receipt_ages, dtype=np.int64),
        ack_times=ack_times_arr,
        ack_ages=np.asarray(ack_ages, dtype=np.int64),
        activation_step=draws.activation_step,
        activation_receipt=activation_receipt,
        activation_ack=_first_event_at_or_after(ack_times_arr, draws.activation_step),
        horizon=horizon,
    )
    detectors = evaluate_detectors(events, scenario.detectors)
    moving_average = moving_average_detector(events.receipt_ages, scenario.moving_average_window)
    return RunTrace(
        scenario=scenario,
        run_index=0,
        steps=steps,
        events=events,
        detectors=detectors,
        moving_average=moving_average,
    )


def run_once(scenario: Scenario, run_index: int = 0) -> RunTrace:
    """Simulate one full run of the scenario, deterministically in
    (seed, run_index)."""
    draws = draw_channel_streams(scenario, run_index)
    noise = draw_noise_streams(scenario, run_index)
    trace = simulate_trace(scenario, draws, noise)
    trace.run_index = run_index
    return trace


@dataclass
class RunOutcome:
    """Alarm bookkeeping of one detector/threshold pair on one run."""

    alarmed: bool
    false_alarm: bool
    detected: bool
    censored: bool
    delay_receipts: float
    delay_steps: float
    tau_receipt: int | None
    tau_time: int | None


def _score_run(
    run: DetectorRun, threshold: float, activation_step: int | None, horizon: int
) -> RunOutcome:
    alarm = run.alarms[threshold]
    change_index = run.change_index
    total_events = int(run.z.shape[0])

    lam = float("inf") if change_index is None else float(change_index)
    lam_step = float("inf") if activation_step is None else float(activation_step)
    tau = float(alarm.receipt_index) if alarm is not None else None
    tau_step = float(alarm.time) if alarm is not None else None

    alarmed = alarm is not None
    false_alarm = alarmed and tau < lam
    detected = alarmed and tau >= lam
    censored = (not alarmed) and change_index is not None
    # Censored runs contribute the delay accumulated by the end of the run.
    effective_tau = tau if alarmed else float(total_events)
    effective_tau_step = tau_step if alarmed else float(horizon)
    delay_receipts = max(0.0, effective_tau - lam) if np.isfinite(lam) else 0.0
    delay_steps = max(0.0, effective_tau_step - lam_step) if np.isfinite(lam_step) else 0.0
    return RunOutcome(
        alarmed=alarmed,
        false_alarm=false_alarm,
        detected=detected,
        censored=censored,
        delay_receipts=delay_receipts,
        delay_steps=delay_steps,
        tau_receipt=None if alarm is None else alarm.receipt_index,
        tau_time=None if alarm is None else alarm.time,
    )


def _mean_ci(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and 1.96-sigma normal-approximation half-width."""
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, float("nan")
    half = 1.96 * float(np.std(values, ddof=1)) / float(np.sqrt(values.size))
    return mean, half


@dataclass
class SummaryRow:
    detector: str
    side: str
    threshold: float
    runs: int
    pfa: float
    pfa_half_width: float
    mean_delay_receipts: float
    delay_receipts_half_width: float
    mean_delay_steps: float
    delay_steps_half_width: float
    detected_runs: int
    censored_runs: int
    bayes_risk: float


@dataclass
class SummaryStats:
    """Aggregated Monte Carlo results, one row per (detector, threshold)."""

    scenario: Scenario
    runs: int
    rows: list[SummaryRow] = field(default_factory=list)


def run_monte_carlo(scenario: Scenario, mc_runs: int | None = None) -> SummaryStats:
    """Monte Carlo sweep over independent runs via the event-level fast path.

    Reports, per detector and threshold: empirical false-alarm probability,
    mean detection delay in the detector's receipt domain and in process
    time (censored runs count the delay accumulated by the horizon), and
    the empirical Bayes risk.
    """
    runs = scenario.mc_runs if mc_runs is None else mc_runs
    if runs < 1:
        raise EvaluationError("Monte Carlo needs at least one run")
    outcomes: dict[tuple[str, float], list[RunOutcome]] = {
        (cfg.name, h): [] for cfg in scenario.detectors for h in cfg.thresholds
    }
    risk_pairs: dict[tuple[str, float], list[tuple[float, float]]] = {
        key: [] for key in outcomes
    }
    sides = {cfg.name: cfg.side for cfg in scenario.detectors}

    for run_index in range(runs):
        draws = draw_channel_streams(scenario, run_index)
        events = build_events(draws)
        detector_runs = evaluate_detectors(events, scenario.detectors)
        for cfg in scenario.detectors:
            run = detector_runs[cfg.name]
            for threshold in cfg.thresholds:
                outcome = _score_run(run, threshold, events.activation_step, events.horizon)
                outcomes[(cfg.name, threshold)].append(outcome)
                lam = float("inf") if run.change_index is None else float(run.change_index)
                tau = (
                    float(outcome.tau_receipt)
                    if outcome.tau_receipt is not None
                    else float(run.z.shape[0])
                )
                risk_pairs[(cfg.name, threshold)].append((tau, lam))

    risk = RiskParams(c=scenario.risk_c)
    stats = SummaryStats(scenario=scenario, runs=runs)
    for (name, threshold), results in outcomes.items():
        pfa, pfa_half = _mean_ci(np.array([r.false_alarm for r in results], dtype=float))
        delay_r, delay_r_half = _mean_ci(np.array([r.delay_receipts for r in results]))
        delay_s, delay_s_half = _mean_ci(np.array([r.delay_steps for r in results]))
        stats.rows.append(
            SummaryRow(
                detector=name,
                side=sides[name],
                threshold=threshold,
                runs=runs,
                pfa=pfa,
                pfa_half_width=pfa_half,
                mean_delay_receipts=delay_r,
                delay_receipts_half_width=delay_r_half,
                mean_delay_steps=delay_s,
                delay_steps_half_width=delay_s_half,
                detected_runs=sum(r.detected for r in results),
                censored_runs=sum(r.censored for r in results),
                bayes_risk=bayes_risk(risk_pairs[(name, threshold)], risk),
            )
        )
    return stats


@dataclass
class CalibrationRow:
    detector: str
    threshold: float
    pfa: float
    mean_delay_steps: float


def calibrate_thresholds(
    scenario: Scenario,
    thresholds: np.ndarray | list[float],
    mc_runs: int | None = None,
    detector_names: list[str] | None = None,
) -> list[CalibrationRow]:
    """Estimate the threshold-to-false-alarm map by Monte Carlo.

    For every detector and candidate threshold, runs the posterior once per
    run (the path is threshold-free) and reads off the empirical
    P(alarm before change) and the mean process-time delay.
    """
    runs = scenario.mc_runs if mc_runs is None else mc_runs
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.size == 0:
        raise EvaluationError("calibration needs at least one candidate threshold")
    configs = [
        cfg
        for cfg in scenario.detectors
        if detector_names is None or cfg.name in detector_names
    ]
    if not configs:
        raise EvaluationError("no detectors selected for calibration")

    false_alarms = {cfg.name: np.zeros(thresholds.size) for cfg in configs}
    delays = {cfg.name: np.zeros(thresholds.size) for cfg in configs}
    for run_index in range(runs):
        draws = draw_channel_streams(scenario, run_index)
        events = build_events(draws)
        detector_runs = evaluate_detectors(events, [cfg for cfg in configs])
        for cfg in configs:
            run = detector_runs[cfg.name]
            prefix_min = np.minimum.accumulate(run.z) if run.z.size else run.z
            lam = run.change_index
            lam_step = events.activation_step
            pre = prefix_min[: (lam - 1)] if lam is not None else prefix_min
            min_pre = float(pre[-1]) if pre.size else float("inf")
            # prefix_min is nonincreasing: first crossing via binary search.
            for j, h in enumerate(thresholds):
                if min_pre <= h:
                    false_alarms[cfg.name][j] += 1.0
                idx = int(np.searchsorted(-prefix_min, -h, side="left"))
                if idx < prefix_min.size:
                    tau_step = float(run.event_times[idx])
                else:
                    tau_step = float(events.horizon)
                if lam_step is not None:
                    delays[cfg.name][j] += max(0.0, tau_step - float(lam_step))
    out: list[CalibrationRow] = []
    for cfg in configs:
        for j, h in enumerate(thresholds):
            out.append(
                CalibrationRow(
                    detector=cfg.name,
                    threshold=float(h),
                    pfa=false_alarms[cfg.name][j] / runs,
                    mean_delay_steps=delays[cfg.name][j] / runs,
                )
            )
    return out
