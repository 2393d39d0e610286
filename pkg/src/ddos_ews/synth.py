"""Seeded synthetic packet traces with known early-warning ground truth.

A scenario is a sequence of phases. Arrivals are Poisson at each phase's
rate on a microsecond grid; packet sizes are drawn per phase kind:

``baseline``
    i.i.d. sizes around ``size_mean``.
``csd-ramp``
    sizes driven by a latent AR(1) load whose coefficient rises linearly
    from ``phi_start`` to ``phi_end`` (critical slowing down).
``kickoff-step``
    ``size_mean`` traffic that jumps to ``step_size`` at ``step_at`` seconds
    into the phase, with the rate multiplied by ``surge``.
``attack-steady``
    like baseline, typically at large sizes and high rate.
``burst``
    baseline traffic with ``burst_count`` short bursts of ``step_size``
    packets.

All sizes are clamped to [60, 1500] bytes.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional

import numpy as np

from .exceptions import BadSpec
from .ingest import PacketTrace

MIN_SIZE = 60
MAX_SIZE = 1500
PHASE_KINDS = ("baseline", "csd-ramp", "kickoff-step", "attack-steady", "burst")
RNG_NAME = "numpy.random.PCG64"
_US = 1_000_000


@dataclass(frozen=True)
class PhaseSpec:
    kind: str
    duration_s: float
    rate: float = 100.0
    size_mean: float = 100.0
    size_jitter: float = 20.0
    # csd-ramp
    phi_start: float = 0.2
    phi_end: float = 0.95
    gain: float = 40.0
    latent_dt: float = 0.1
    # gamma shape of the (negated, unit-variance) innovations; None = Gaussian
    innovation_shape: Optional[float] = 0.25
    # kickoff-step / burst
    step_size: float = 1500.0
    step_at: float = 30.0
    surge: float = 50.0
    burst_count: int = 2
    burst_len: float = 1.0

    def validate(self):
        if self.kind not in PHASE_KINDS:
            raise BadSpec(f"unknown phase kind {self.kind!r}")
        if not (self.duration_s > 0 and math.isfinite(self.duration_s)):
            raise BadSpec("phase duration_s must be positive")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise BadSpec("phase rate must be positive")
        for name in ("size_mean", "step_size"):
            value = getattr(self, name)
            if not MIN_SIZE <= value <= MAX_SIZE:
                raise BadSpec(f"{name}={value} outside [{MIN_SIZE}, {MAX_SIZE}]")
        if self.size_jitter < 0 or self.gain < 0:
            raise BadSpec("size_jitter and gain must be non-negative")
        if not 0 <= self.phi_start <= self.phi_end < 1:
            raise BadSpec("need 0 <= phi_start <= phi_end < 1")
        if not self.latent_dt > 0:
            raise BadSpec("latent_dt must be positive")
        if self.innovation_shape is not None and not self.innovation_shape > 0:
            raise BadSpec("innovation_shape must be positive or null")
        if not 0 <= self.step_at <= self.duration_s:
            raise BadSpec("step_at must lie within the phase")
        if not self.surge > 0:
            raise BadSpec("surge must be positive")
        if self.burst_count < 0 or not self.burst_len > 0:
            raise BadSpec("burst_count must be >= 0 and burst_len > 0")
        return self


@dataclass(frozen=True)
class ScenarioSpec:
    duration_s: float
    phases: List[PhaseSpec]
    seed: int = 0
    dest_count: int = 1

    def validate(self):
        if not self.phases:
            raise BadSpec("a scenario needs at least one phase")
        for p in self.phases:
            p.validate()
        total = sum(p.duration_s for p in self.phases)
        if not math.isclose(total, self.duration_s, rel_tol=0, abs_tol=1e-6):
            raise BadSpec(f"phase durations sum to {total}, expected {self.duration_s}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise BadSpec("seed must be an unsigned 64-bit integer")
        if not isinstance(self.dest_count, int) or self.dest_count < 1:
            raise BadSpec("dest_count must be a positive integer")
        for p in self.phases:
            if abs(p.duration_s * _US - round(p.duration_s * _US)) > 1e-3:
                raise BadSpec("phase durations must be whole microseconds")
        return self

    def phase_starts(self) -> List[float]:
        starts, t = [], 0.0
        for p in self.phases:
            starts.append(t)
            t += p.duration_s
        return starts

    def to_dict(self) -> dict:
        return {"duration_s": self.duration_s, "seed": self.seed,
                "dest_count": self.dest_count,
                "phases": [asdict(p) for p in self.phases]}

    @classmethod
    def from_dict(cls, data) -> "ScenarioSpec":
        try:
            phases = [PhaseSpec(**p) for p in data["phases"]]
            spec = cls(duration_s=float(data["duration_s"]), phases=phases,
                       seed=int(data.get("seed", 0)),
                       dest_count=int(data.get("dest_count", 1)))
        except (KeyError, TypeError, ValueError) as exc:
            raise BadSpec(f"malformed scenario: {exc}") from exc
        return spec.validate()


def load_scenario(path) -> ScenarioSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadSpec(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise BadSpec("scenario JSON must be an object")
    return ScenarioSpec.from_dict(data)


def dump_scenario(spec: ScenarioSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
        fh.write("\n")


# --- generators ------------------------------------------------------------

def _arrivals_us(rng, rate, start_us, end_us):
    """Poisson arrival times in integer microseconds on [start_us, end_us)."""
    span = end_us - start_us
    if span <= 0:
        return np.empty(0, dtype=np.int64)
    mean_gap = _US / rate
    expected = span / mean_gap
    chunk = int(expected + 6 * math.sqrt(expected) + 16)
    gaps = []
    total = 0
    while total < span:
        g = np.maximum(1, np.rint(rng.exponential(mean_gap, size=chunk))).astype(np.int64)
        gaps.append(g)
        total += int(g.sum())
    t = start_us + np.cumsum(np.concatenate(gaps))
    return t[t < end_us]


def _clamp_sizes(raw):
    return np.clip(np.rint(raw), MIN_SIZE, MAX_SIZE).astype(np.int64)


def _iid_sizes(rng, n, mean, jitter):
    return _clamp_sizes(mean + jitter * rng.standard_normal(n))


def _innovations(rng, n, shape):
    if shape is None:
        return rng.standard_normal(n)
    # negated gamma, zero mean, unit variance: skewness -2/sqrt(shape)
    return -(rng.gamma(shape, 1.0 / math.sqrt(shape), size=n) - math.sqrt(shape))


def generate_csd_ramp(phase: PhaseSpec, start_us: int, rng):
    """Records for a csd-ramp phase as (t_us, size) arrays."""
    end_us = start_us + round(phase.duration_s * _US)
    t = _arrivals_us(rng, phase.rate, start_us, end_us)
    dt_us = phase.latent_dt * _US
    n_steps = max(1, math.ceil((end_us - start_us) / dt_us))
    phi = np.linspace(phase.phi_start, phase.phi_end, n_steps)
    eps = _innovations(rng, n_steps, phase.innovation_shape)
    x = np.empty(n_steps)
    x[0] = eps[0] / math.sqrt(1.0 - phase.phi_start ** 2)
    for j in range(n_steps - 1):
        x[j + 1] = phi[j] * x[j] + eps[j + 1]
    step = np.minimum(((t - start_us) // dt_us).astype(np.int64), n_steps - 1)
    raw = phase.size_mean + phase.gain * x[step] + phase.size_jitter * rng.standard_normal(len(t))
    return t, _clamp_sizes(raw)


def generate_kickoff_step(phase: PhaseSpec, start_us: int, rng):
    """Records for a kickoff-step phase as (t_us, size) arrays."""
    end_us = start_us + round(phase.duration_s * _US)
    step_us = start_us + round(phase.step_at * _US)
    t0 = _arrivals_us(rng, phase.rate, start_us, step_us)
    t1 = _arrivals_us(rng, phase.rate * phase.surge, step_us, end_us)
    s0 = _iid_sizes(rng, len(t0), phase.size_mean, phase.size_jitter)
    s1 = _iid_sizes(rng, len(t1), phase.step_size, phase.size_jitter)
    return np.concatenate([t0, t1]), np.concatenate([s0, s1])


def _generate_burst(phase: PhaseSpec, start_us: int, rng):
    end_us = start_us + round(phase.duration_s * _US)
    t = _arrivals_us(rng, phase.rate, start_us, end_us)
    sizes = _iid_sizes(rng, len(t), phase.size_mean, phase.size_jitter)
    burst_us = round(phase.burst_len * _US)
    latest = max(start_us, end_us - burst_us)
    for b0 in np.sort(rng.integers(start_us, latest + 1, size=phase.burst_count)):
        inside = (t >= b0) & (t < b0 + burst_us)
        sizes[inside] = _iid_sizes(rng, int(inside.sum()), phase.step_size, phase.size_jitter)
    return t, sizes


def _generate_phase(phase: PhaseSpec, start_us: int, rng):
    if phase.kind == "csd-ramp":
        return generate_csd_ramp(phase, start_us, rng)
    if phase.kind == "kickoff-step":
        return generate_kickoff_step(phase, start_us, rng)
    if phase.kind == "burst":
        return _generate_burst(phase, start_us, rng)
    end_us = start_us + round(phase.duration_s * _US)
    t = _arrivals_us(rng, phase.rate, start_us, end_us)
    return t, _iid_sizes(rng, len(t), phase.size_mean, phase.size_jitter)


def generate_scenario(spec: ScenarioSpec, seed: Optional[int] = None) -> PacketTrace:
    """Generate the trace for ``spec``; ``seed`` overrides ``spec.seed``."""
    if seed is not None:
        spec = replace(spec, seed=seed)
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    ts, sizes = [], []
    start_us = 0
    for phase in spec.phases:
        t, s = _generate_phase(phase, start_us, rng)
        ts.append(t)
        sizes.append(s)
        start_us += round(phase.duration_s * _US)
    t_us = np.concatenate(ts) if ts else np.empty(0, np.int64)
    size = np.concatenate(sizes) if sizes else np.empty(0, np.int64)
    dest = rng.integers(0, spec.dest_count, size=len(t_us)) if spec.dest_count > 1 \
        else np.zeros(len(t_us), dtype=np.int64)
    meta = {"synth": {"rng": RNG_NAME, "seed": spec.seed,
                      "phase_starts": spec.phase_starts(),
                      "phase_kinds": [p.kind for p in spec.phases]}}
    return PacketTrace(t_us / 1e6, dest, size, duration=spec.duration_s, meta=meta)


# --- preset scenarios ------------------------------------------------------

CANONICAL_SEED = 12345


def canonical_scenario(seed: int = CANONICAL_SEED) -> ScenarioSpec:
    """Preparation phase with one CSD minute, then a kickoff 22 minutes later.

    Minute index 1 carries the ramp and minute index 23 the kickoff, whose
    step from 60 to 1500 bytes happens 30 s into the minute. The 1380 s
    before the kickoff minute form the preparation phase.
    """
    return ScenarioSpec(
        duration_s=1500.0,
        seed=seed,
        dest_count=1,
        phases=[
            PhaseSpec("baseline", 60.0),
            PhaseSpec("csd-ramp", 60.0, phi_start=0.2, phi_end=0.95),
            PhaseSpec("baseline", 1260.0),
            PhaseSpec("kickoff-step", 60.0, size_mean=60.0, step_size=1500.0,
                      step_at=30.0, surge=50.0),
            PhaseSpec("attack-steady", 60.0, rate=5000.0, size_mean=1500.0),
        ],
    )


def baseline_scenario(duration_s: float = 3600.0, seed: int = 0, rate: float = 100.0) -> ScenarioSpec:
    return ScenarioSpec(duration_s=duration_s, seed=seed,
                        phases=[PhaseSpec("baseline", duration_s, rate=rate)])


def kickoff_scenario(seed: int = 0) -> ScenarioSpec:
    """One baseline minute followed by a kickoff minute (step at 30 s)."""
    return ScenarioSpec(duration_s=120.0, seed=seed, phases=[
        PhaseSpec("baseline", 60.0, size_mean=60.0),
        PhaseSpec("kickoff-step", 60.0, size_mean=60.0, step_size=1500.0,
                  step_at=30.0, surge=50.0),
    ])


PRESETS = {
    "canonical": canonical_scenario,
    "baseline": lambda seed=0: baseline_scenario(seed=seed),
    "kickoff": kickoff_scenario,
}


def preset(name: str, seed: Optional[int] = None) -> ScenarioSpec:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise BadSpec(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return factory() if seed is None else factory(seed=seed)


def window_of(spec: ScenarioSpec, phase_index: int, window_len: float = 60.0) -> int:
    """Index of the analysis window in which a phase starts."""
    return int(spec.phase_starts()[phase_index] // window_len)
