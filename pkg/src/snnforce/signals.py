"""Input/target waveforms for the benchmark systems and the interval task.

Every generator is a pure function of its :class:`SignalSpec`; randomness
only enters through :func:`add_noise` and :func:`poisson_encode`, which take
an explicit seed or generator.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError

PITCHES = ("C", "D", "E", "F", "G")
NOTE_LENGTHS = {"quarter": 0.25, "half": 0.5}

# first phrase of the melody; the last two notes are held
DEFAULT_MELODY = tuple(
    [(p, "quarter") for p in "E E F G G F E D C C D E E".split()]
    + [("D", "half"), ("D", "half")]
)

PULSE_WIDTH = 0.05
PULSE_START = 0.1


class SignalKind(str, enum.Enum):
    SINE = "sine"
    SUM_OF_SINES = "sum_of_sines"
    PRODUCT_OF_SINES = "product_of_sines"
    ACCORDIAN = "accordian"
    ODE_TO_JOY = "ode_to_joy"
    TRIANGLE = "triangle"
    VDP_HARMONIC = "vdp_harmonic"
    VDP_RELAXED = "vdp_relaxed"
    INTERVAL = "interval"

    @classmethod
    def parse(cls, value: "str | SignalKind") -> "SignalKind":
        if isinstance(value, cls):
            return value
        compact = "".join(ch for ch in str(value).lower() if ch.isalnum())
        lookup = {m.value.replace("_", ""): m for m in cls}
        lookup.update(
            sos=cls.SUM_OF_SINES,
            pos=cls.PRODUCT_OF_SINES,
            accordion=cls.ACCORDIAN,
            vanderpolharmonic=cls.VDP_HARMONIC,
            vanderpolrelaxed=cls.VDP_RELAXED,
            intervalmatch=cls.INTERVAL,
        )
        try:
            return lookup[compact]
        except KeyError:
            raise ConfigError(f"unknown signal kind {value!r}") from None


BENCHMARK_SYSTEMS = (
    SignalKind.SINE,
    SignalKind.SUM_OF_SINES,
    SignalKind.PRODUCT_OF_SINES,
    SignalKind.ACCORDIAN,
    SignalKind.ODE_TO_JOY,
    SignalKind.TRIANGLE,
    SignalKind.VDP_HARMONIC,
    SignalKind.VDP_RELAXED,
)

VDP_MU = {SignalKind.VDP_HARMONIC: 0.3, SignalKind.VDP_RELAXED: 0.5}


@dataclass(frozen=True)
class SignalSpec:
    """Declarative description of one input/target trace.

    ``omega`` is used by the sine task, ``amplitude``/``period`` by the
    triangle, ``interval`` by the interval-matching task. ``input_mode``
    selects what the input channel carries for the autonomous systems:
    ``"zero"`` (silent input) or ``"target"`` (a copy of the first target
    channel).
    """

    kind: SignalKind = SignalKind.SINE
    duration: float = 5.0
    dt: float = 1e-3
    omega: float = 2 * np.pi
    component_freqs: tuple[float, float] = (4.0, 6.0)
    amplitude: float = 1.0
    period: float = 1.0
    interval: float = 0.5
    vdp_initial: tuple[float, float] = (1.0, 0.0)
    vdp_normalize: bool = True
    melody: tuple[tuple[str, str], ...] = DEFAULT_MELODY
    input_mode: str = "zero"

    def __post_init__(self):
        object.__setattr__(self, "kind", SignalKind.parse(self.kind))
        self.validate()

    @property
    def mu(self) -> float | None:
        return VDP_MU.get(self.kind)

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.dt))

    def validate(self) -> None:
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ConfigError(f"duration must be positive, got {self.duration}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        n = self.duration / self.dt
        if abs(n - round(n)) > 1e-6 * max(1.0, n) or round(n) < 1:
            raise ConfigError(
                f"duration/dt must be a positive integer, got {self.duration}/{self.dt}"
            )
        if self.kind is SignalKind.TRIANGLE and self.period <= 0:
            raise ConfigError("triangle period must be positive")
        if self.input_mode not in ("zero", "target"):
            raise ConfigError(f"input_mode must be 'zero' or 'target', got {self.input_mode!r}")
        for pitch, length in self.melody:
            if pitch not in PITCHES or length not in NOTE_LENGTHS:
                raise ConfigError(f"bad note ({pitch!r}, {length!r})")

    def with_(self, **changes) -> "SignalSpec":
        return replace(self, **changes)


@dataclass
class SignalTrace:
    """Sampled input and target channels on a uniform grid.

    ``f_in`` has shape ``(n, d_in)`` and ``f_out`` shape ``(n, d_out)``.
    """

    t: np.ndarray
    f_in: np.ndarray
    f_out: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.f_in = np.atleast_2d(np.asarray(self.f_in, dtype=float).T).T
        self.f_out = np.atleast_2d(np.asarray(self.f_out, dtype=float).T).T
        n = len(self.t)
        if self.f_in.shape[0] != n or self.f_out.shape[0] != n:
            raise ConfigError("f_in/f_out sample counts must equal the grid length")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else float("nan")

    @property
    def d_in(self) -> int:
        return self.f_in.shape[1]

    @property
    def d_out(self) -> int:
        return self.f_out.shape[1]

    def copy(self) -> "SignalTrace":
        return SignalTrace(self.t.copy(), self.f_in.copy(), self.f_out.copy(), dict(self.meta))


def time_grid(spec: SignalSpec) -> np.ndarray:
    return np.arange(spec.n_samples) * spec.dt


def accordian_phase(t: np.ndarray) -> np.ndarray:
    """Phase of the accordian chirp: angular frequency 2pi -> 6pi -> 2pi every 2 s."""
    t = np.asarray(t, dtype=float)
    cycles, s = np.divmod(t, 2.0)
    rising = 2 * np.pi * s + 2 * np.pi * s**2
    u = s - 1.0
    falling = 4 * np.pi + 6 * np.pi * u - 2 * np.pi * u**2
    return 8 * np.pi * cycles + np.where(s < 1.0, rising, falling)


def accordian_omega(t: np.ndarray) -> np.ndarray:
    s = np.mod(np.asarray(t, dtype=float), 2.0)
    return np.where(s < 1.0, 2 * np.pi + 4 * np.pi * s, 6 * np.pi - 4 * np.pi * (s - 1.0))


def van_der_pol(mu: float, dt: float, n: int, x0: tuple[float, float] = (1.0, 0.0)) -> np.ndarray:
    """x(t) of x'' = mu (1 - x^2) x' - x by fixed-step RK4, ``n`` samples from ``x0``."""

    def deriv(state):
        x, v = state
        return np.array([v, mu * (1.0 - x * x) * v - x])

    out = np.empty(n)
    state = np.array(x0, dtype=float)
    for i in range(n):
        out[i] = state[0]
        k1 = deriv(state)
        k2 = deriv(state + 0.5 * dt * k1)
        k3 = deriv(state + 0.5 * dt * k2)
        k4 = deriv(state + dt * k3)
        state = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return out


def half_sine_pulse(t: np.ndarray, onset: float, width: float) -> np.ndarray:
    """Positive half of a sine whose half-period equals ``width``, starting at ``onset``."""
    s = t - onset
    inside = (s >= 0) & (s < width)
    return np.where(inside, np.sin(np.pi * np.clip(s, 0, width) / width), 0.0)


def melody_target(t: np.ndarray, melody) -> np.ndarray:
    out = np.zeros((len(t), len(PITCHES)))
    onset = 0.0
    for pitch, length in melody:
        width = NOTE_LENGTHS[length]
        out[:, PITCHES.index(pitch)] += half_sine_pulse(t, onset, width)
        onset += width
    return out


def read_melody(path: str | Path) -> tuple[tuple[str, str], ...]:
    """Parse a note file: one ``<pitch> <quarter|half>`` pair per line, ``#`` comments."""
    notes = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"{path}:{lineno}: expected '<pitch> <quarter|half>', got {raw!r}")
        pitch, length = parts[0].upper(), parts[1].lower()
        if pitch not in PITCHES or length not in NOTE_LENGTHS:
            raise ConfigError(f"{path}:{lineno}: unknown note {raw!r}")
        notes.append((pitch, length))
    if not notes:
        raise ConfigError(f"{path}: no notes")
    return tuple(notes)


def generate(spec: SignalSpec) -> SignalTrace:
    """Noise-free trace for one of the benchmark systems (or the interval task)."""
    spec.validate()
    kind = spec.kind
    if kind is SignalKind.INTERVAL:
        return interval_task(spec.interval, spec)

    t = time_grid(spec)
    if kind is SignalKind.SINE:
        y = np.sin(spec.omega * t)
    elif kind is SignalKind.SUM_OF_SINES:
        f1, f2 = spec.component_freqs
        y = np.sin(2 * np.pi * f1 * t) + np.sin(2 * np.pi * f2 * t)
    elif kind is SignalKind.PRODUCT_OF_SINES:
        f1, f2 = spec.component_freqs
        y = np.sin(2 * np.pi * f1 * t) * np.sin(2 * np.pi * f2 * t)
    elif kind is SignalKind.ACCORDIAN:
        y = np.sin(accordian_phase(t))
    elif kind is SignalKind.TRIANGLE:
        y = 2 * spec.amplitude / np.pi * np.arcsin(np.sin(2 * np.pi * t / spec.period))
    elif kind in VDP_MU:
        y = van_der_pol(spec.mu, spec.dt, len(t), spec.vdp_initial)
        peak = np.max(np.abs(y))
        if spec.vdp_normalize and peak > 0:
            y = y / peak
    elif kind is SignalKind.ODE_TO_JOY:
        y = melody_target(t, spec.melody)
    else:  # pragma: no cover - enum is closed
        raise ConfigError(f"unknown signal kind {kind!r}")

    f_out = y.reshape(len(t), -1)
    if spec.input_mode == "target":
        f_in = f_out[:, :1].copy()
    else:
        f_in = np.zeros((len(t), 1))
    return SignalTrace(t, f_in, f_out, meta={"kind": kind.value})


def interval_layout(interval: float) -> dict[str, float]:
    first_end = PULSE_START + PULSE_WIDTH
    second_on = first_end + interval
    second_end = second_on + PULSE_WIDTH
    target_on = second_end + interval
    return {
        "first_on": PULSE_START,
        "first_end": first_end,
        "second_on": second_on,
        "second_end": second_end,
        "target_on": target_on,
        "target_end": target_on + PULSE_WIDTH,
    }


def interval_task(interval: float, spec: SignalSpec | None = None) -> SignalTrace:
    """Two 50 ms input pulses ``interval`` apart; the target pulse follows ``interval`` later."""
    spec = spec or SignalSpec(kind=SignalKind.INTERVAL, interval=interval)
    if not np.isfinite(interval) or interval < 0.1 - 1e-12 or interval > 2.1 + 1e-12:
        raise ConfigError(f"interval must lie in [0.1, 2.1] s, got {interval}")
    layout = interval_layout(interval)
    if layout["target_end"] > spec.duration + 1e-12:
        raise ConfigError(
            f"interval {interval} s needs {layout['target_end']:.3f} s, duration is {spec.duration} s"
        )
    t = time_grid(spec)
    # index-based edges keep pulse widths exact on the grid
    f_in = np.zeros(len(t))
    w = int(round(PULSE_WIDTH / spec.dt))
    for onset in (layout["first_on"], layout["second_on"]):
        i0 = int(round(onset / spec.dt))
        f_in[i0 : i0 + w] = 1.0
    i_t = int(round(layout["target_on"] / spec.dt))
    f_out = half_sine_pulse(t, i_t * spec.dt, PULSE_WIDTH)
    meta = {"kind": SignalKind.INTERVAL.value, "interval": interval, **layout}
    return SignalTrace(t, f_in[:, None], f_out[:, None], meta=meta)


def add_noise(
    trace: SignalTrace,
    level: float,
    rng_seed: int | np.random.SeedSequence | None = 0,
    reference_range: float | None = None,
) -> SignalTrace:
    """Perturb every input sample with Gaussian noise of std ``level * range``.

    ``range`` is ``max(f_in) - min(f_in)`` unless ``reference_range`` is given,
    which lets a silent input channel carry noise scaled to the target.
    """
    if not np.isfinite(level) or level < 0:
        raise ConfigError(f"noise level must be >= 0, got {level}")
    out = trace.copy()
    if level == 0:
        return out
    scale = reference_range
    if scale is None:
        scale = float(np.max(trace.f_in) - np.min(trace.f_in))
    rng = np.random.default_rng(rng_seed)
    out.f_in = trace.f_in + rng.normal(0.0, level * scale, size=trace.f_in.shape)
    return out


def poisson_rate(value, rate_bounds: tuple[float, float] = (0.0, 200.0)):
    """Firing rate assigned to a normalized input value in [-1, 1] (clamped)."""
    r_min, r_max = rate_bounds
    frac = np.clip((np.asarray(value, dtype=float) + 1.0) / 2.0, 0.0, 1.0)
    return r_min + frac * (r_max - r_min)


def check_rate_bounds(dt: float, rate_bounds: tuple[float, float]) -> None:
    r_min, r_max = rate_bounds
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if not (0 <= r_min < r_max):
        raise ConfigError(f"rate bounds must satisfy 0 <= r_min < r_max, got {rate_bounds}")
    if r_max * dt > 1:
        raise ConfigError(
            f"r_max*dt = {r_max * dt:g} > 1: Bernoulli spike approximation invalid"
        )


def poisson_encode(value, dt: float, rate_bounds=(0.0, 200.0), rng=None):
    """Bernoulli approximation of a Poisson spike train for one time step.

    Returns a 0/1 array shaped like ``value``: a spike occurs with
    probability ``r * dt`` where ``r`` interpolates ``rate_bounds``.
    """
    check_rate_bounds(dt, rate_bounds)
    rng = np.random.default_rng(rng)
    p = poisson_rate(value, rate_bounds) * dt
    return (rng.random(np.shape(p)) < p).astype(np.int8)


def trace_to_csv(trace: SignalTrace, path: str | Path) -> None:
    header = ["t"] + [f"f_in_{i}" for i in range(trace.d_in)] + [f"f_out_{i}" for i in range(trace.d_out)]
    data = np.column_stack([trace.t, trace.f_in, trace.f_out])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def trace_from_csv(path: str | Path) -> SignalTrace:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    if header[0] != "t":
        raise ConfigError(f"{path}: first column must be 't'")
    in_cols = [i for i, h in enumerate(header) if h.startswith("f_in_")]
    out_cols = [i for i, h in enumerate(header) if h.startswith("f_out_")]
    return SignalTrace(body[:, 0], body[:, in_cols], body[:, out_cols])
