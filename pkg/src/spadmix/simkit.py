"""
Photon arrival simulation and nonparalyzable dead-time censoring.

All time quantities are in units of 10 ns.  A simulation run produces, per
replication, one absolute timeline of K repetition cycles; registrations
are folded back into [0, t_r) afterwards.
"""
from __future__ import annotations

import configparser
import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FrameError, OrderingError


@dataclass(frozen=True)
class ScenarioConfig:
    signal_level: float = 3.16
    noise_level: float = 0.1
    cycle_length: float = 10.0
    dead_time: float = 7.5
    pulse_delay: float = 4.0
    pulse_half_width: float = 0.2
    num_cycles: int = 10000
    bin_width: float = 0.05
    num_replications: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        S, B = self.signal_level, self.noise_level
        if not (S >= 0 and B >= 0 and S + B > 0):
            raise ConfigError(f"need S >= 0, B >= 0, S + B > 0; got S={S}, B={B}")
        if not self.cycle_length > 0:
            raise ConfigError("cycle_length must be positive")
        if not 0 < self.pulse_half_width <= self.cycle_length / 10:
            raise ConfigError("pulse_half_width must lie in (0, cycle_length/10]")
        if not 0 <= self.pulse_delay < self.cycle_length:
            raise ConfigError("pulse_delay must lie in [0, cycle_length)")
        if self.dead_time < 0:
            raise ConfigError("dead_time must be non-negative")
        if self.num_cycles < 1 or self.num_replications < 1:
            raise ConfigError("num_cycles and num_replications must be >= 1")
        if not self.bin_width > 0:
            raise ConfigError("bin_width must be positive")
        nbins = self.cycle_length / self.bin_width
        if abs(nbins - round(nbins)) > 1e-9 * nbins:
            raise ConfigError(
                f"bin_width {self.bin_width} does not divide cycle_length {self.cycle_length}"
            )
        if not 0 <= self.rng_seed < 2**64:
            raise ConfigError("rng_seed must be a 64-bit unsigned integer")

    @property
    def mean_photons(self) -> float:
        """Q = S + B, the expected number of arrivals per cycle."""
        return self.signal_level + self.noise_level

    @property
    def num_bins(self) -> int:
        return int(round(self.cycle_length / self.bin_width))

    def replace(self, **changes) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}


def coerce_overrides(pairs: dict) -> dict:
    """Convert string values to the field types of ScenarioConfig; reject unknown keys."""
    out = {}
    for key, raw in pairs.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        typ = _FIELD_TYPES[key]
        try:
            out[key] = int(raw) if typ in (int, "int") else float(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return out


def read_config(path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Read a flat ``key = value`` file (``#`` comments, times in 10 ns units)."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[scenario]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    values = coerce_overrides(dict(parser["scenario"]))
    return dataclasses.replace(base or ScenarioConfig(), **values)


def write_config(config: ScenarioConfig, path) -> None:
    lines = ["# scenario config; all time quantities in units of 10 ns"]
    lines += [f"{k} = {v!r}" for k, v in config.to_dict().items()]
    Path(path).write_text("\n".join(lines) + "\n")


class Frame(enum.Enum):
    ABSOLUTE = "absolute"
    RELATIVE = "relative"


@dataclass(frozen=True)
class TimestampSet:
    values: np.ndarray
    frame: Frame
    cycle_length: float | None = None
    _checked: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if not self._checked:
            return
        if self.frame is Frame.RELATIVE:
            if self.cycle_length is None:
                raise FrameError("relative timestamps need a cycle_length")
            if v.size and (v.min() < 0 or v.max() >= self.cycle_length):
                raise FrameError("relative timestamps must lie in [0, cycle_length)")
        elif v.size > 1 and not np.all(np.diff(v) > 0):
            raise OrderingError("absolute timestamps must be strictly increasing")

    def __len__(self):
        return self.values.size


def fold(values: np.ndarray, t_r: float) -> np.ndarray:
    """mod(values, t_r) guaranteed to land in [0, t_r)."""
    out = np.mod(values, t_r)
    # mod of a tiny negative rounds up to t_r itself
    out[out >= t_r] = np.nextafter(t_r, 0.0)
    return out


def cycle_rng(seed: int, replication: int, cycle_index: int) -> np.random.Generator:
    """Philox substream for one (replication, cycle) pair.

    The key is derived from (seed, replication); the cycle index occupies the
    top word of the 256-bit counter so each cycle owns a disjoint block.
    """
    key = _replication_key(seed, replication)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, cycle_index]))


def _replication_key(seed: int, replication: int) -> np.ndarray:
    return np.random.SeedSequence(seed, spawn_key=(replication,)).generate_state(2, np.uint64)


def _draw_cycle(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    Q = config.mean_photons
    t_r = config.cycle_length
    n = rng.poisson(Q)
    if n == 0:
        return np.empty(0)
    is_signal = rng.random(n) < config.signal_level / Q
    x = rng.random(n) * t_r
    k = int(is_signal.sum())
    if k:
        g = rng.normal(config.pulse_delay, config.pulse_half_width, k)
        bad = (g < 0) | (g >= t_r)
        while bad.any():
            g[bad] = rng.normal(config.pulse_delay, config.pulse_half_width, int(bad.sum()))
            bad = (g < 0) | (g >= t_r)
        x[is_signal] = g
    x.sort()
    return x


def sample_arrivals(
    config: ScenarioConfig,
    cycle_index: int,
    rng: np.random.Generator | None = None,
    replication: int = 0,
) -> TimestampSet:
    """Relative arrival timestamps of one repetition cycle.

    Poisson(Q) photons, each from the pulse Gaussian with probability S/Q
    (redrawn until it falls inside [0, t_r)) and uniform otherwise.  Without
    an explicit ``rng`` the (replication, cycle) substream of
    ``config.rng_seed`` is used, so cycles can be drawn in any order.
    """
    if not 0 <= cycle_index < config.num_cycles:
        raise ConfigError(f"cycle_index {cycle_index} outside [0, {config.num_cycles})")
    if rng is None:
        rng = cycle_rng(config.rng_seed, replication, cycle_index)
    return TimestampSet(_draw_cycle(config, rng), Frame.RELATIVE, config.cycle_length)


def sample_replication(config: ScenarioConfig, replication: int = 0) -> list[TimestampSet]:
    """All K cycles of one replication, identical to calling sample_arrivals per cycle."""
    bitgen = np.random.Philox(key=_replication_key(config.rng_seed, replication))
    rng = np.random.Generator(bitgen)
    state = bitgen.state
    out = []
    for k in range(config.num_cycles):
        # rewind to the pristine state of Philox(key, counter=[0, 0, 0, k])
        state["state"]["counter"][:] = (0, 0, 0, k)
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        state["uinteger"] = 0
        bitgen.state = state
        out.append(TimestampSet(_draw_cycle(config, rng), Frame.RELATIVE,
                                config.cycle_length, _checked=False))
    return out


def to_absolute(per_cycle: list[TimestampSet], t_r: float) -> TimestampSet:
    """Concatenate cycles on one timeline: T = (k-1) t_r + x for the k-th cycle."""
    chunks = []
    for k, ts in enumerate(per_cycle):
        if ts.frame is not Frame.RELATIVE or ts.cycle_length != t_r:
            raise FrameError(f"cycle {k} is not relative with cycle_length {t_r}")
        if len(ts):
            chunks.append(k * t_r + ts.values)
    if not chunks:
        return TimestampSet(np.empty(0), Frame.ABSOLUTE)
    T = np.sort(np.concatenate(chunks))
    if T.size > 1:
        # ties: push each later duplicate up by one ulp until strictly increasing
        for i in np.flatnonzero(np.diff(T) <= 0) + 1:
            if T[i] <= T[i - 1]:
                T[i] = np.nextafter(T[i - 1], np.inf)
        # a nudge can collide with the following value; sweep once more
        for i in range(1, T.size):
            if T[i] <= T[i - 1]:
                T[i] = np.nextafter(T[i - 1], np.inf)
    return TimestampSet(T, Frame.ABSOLUTE)


def censor_dead_time(arrivals: TimestampSet, t_d: float) -> TimestampSet:
    """Nonparalyzable censoring: keep T iff T > last registered + t_d."""
    if arrivals.frame is not Frame.ABSOLUTE:
        raise FrameError("censoring needs absolute timestamps")
    T = arrivals.values
    if T.size > 1 and not np.all(np.diff(T) > 0):
        raise OrderingError("arrivals must be strictly increasing")
    if t_d < 0:
        raise ConfigError("dead time must be non-negative")
    if t_d == 0 or T.size == 0:
        return arrivals
    keep = np.zeros(T.size, dtype=bool)
    i = 0
    n = T.size
    while i < n:
        keep[i] = True
        # first index strictly past the dead window (T[i], T[i] + t_d]
        i = int(np.searchsorted(T, T[i] + t_d, side="right"))
    return TimestampSet(T[keep], Frame.ABSOLUTE, _checked=False)


def to_relative(registered: TimestampSet, t_r: float) -> TimestampSet:
    if not t_r > 0:
        raise FrameError("cycle length must be positive")
    if registered.frame is not Frame.ABSOLUTE:
        raise FrameError("expected absolute timestamps")
    return TimestampSet(np.sort(fold(registered.values.copy(), t_r)), Frame.RELATIVE, t_r)


@dataclass(frozen=True)
class Replication:
    arrivals: TimestampSet
    registered: TimestampSet
    relative: TimestampSet
    num_cycles: int

    @property
    def mean_arrivals_per_cycle(self) -> float:
        return len(self.arrivals) / self.num_cycles


def simulate_replication(config: ScenarioConfig, replication: int = 0) -> Replication:
    """Arrivals, absolute registrations and relative registrations for one run of K cycles.

    The timeline ends at K * t_r; a dead window still open at that point is
    simply cut off.
    """
    t_r = config.cycle_length
    arrivals = to_absolute(sample_replication(config, replication), t_r)
    registered = censor_dead_time(arrivals, config.dead_time)
    return Replication(arrivals, registered, to_relative(registered, t_r), config.num_cycles)


def write_timestamps(ts: TimestampSet, path, fmt: str = "text", header: dict | None = None) -> None:
    """Write timestamps as decimal text (one per line) or length-prefixed little-endian float64."""
    path = Path(path)
    if fmt == "text":
        lines = [f"# frame = {ts.frame.value}"]
        if ts.cycle_length is not None:
            lines.append(f"# cycle_length = {ts.cycle_length!r}")
        for k, v in (header or {}).items():
            lines.append(f"# {k} = {v}")
        lines += [repr(float(v)) for v in ts.values]
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(np.uint64(ts.values.size).astype("<u8").tobytes())
            fh.write(ts.values.astype("<f8").tobytes())
    else:
        raise ValueError(f"unknown timestamp format {fmt!r}")


def read_timestamps(path, cycle_length: float | None = None) -> TimestampSet:
    """Read either format; binary files are taken as relative with the given cycle_length."""
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".bin":
        if len(raw) < 8:
            raise ValueError(f"{path}: truncated length prefix")
        n = int(np.frombuffer(raw[:8], "<u8")[0])
        if len(raw) != 8 + 8 * n:
            raise ValueError(f"{path}: expected {n} values, file holds {(len(raw) - 8) / 8:g}")
        vals = np.frombuffer(raw[8:], "<f8").copy()
        return TimestampSet(vals, Frame.RELATIVE, cycle_length)
    meta = {}
    vals = []
    for lineno, line in enumerate(raw.decode().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            meta[key.strip()] = val.strip()
            continue
        try:
            vals.append(float(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from None
    frame = Frame(meta.get("frame", "relative"))
    t_r = float(meta["cycle_length"]) if "cycle_length" in meta else cycle_length
    return TimestampSet(np.array(vals), frame, t_r if frame is Frame.RELATIVE else None)


def read_timestamp_meta(path) -> dict:
    """Header comments of a text timestamp file."""
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, val = line[1:].partition("=")
            meta[key.strip()] = val.strip()
    return meta
