"""Microcontroller model: boot lifecycle, RAM/flash, snapshots and control laws.

A controller cycles through three phases after every reset:

    Down --(d_R elapsed)--> Stabilizing --(enough observations)--> Stable

Only a Stable controller emits actuator commands.  The operations here
mutate the :class:`ControllerState` they are given and return it, so they
chain naturally inside the simulation loop.
"""

from __future__ import annotations

import enum
import hashlib
import math
import struct
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, NamedTuple, Optional, Union

from .errors import (
    CaptureUnsafeError,
    DeadlineViolation,
    FlashBusy,
    FlashOrderViolation,
    SnapshotIntegrityError,
)
from .plants import EngineParams, QuadParams, BrakeParams, mix_motors

ENGINE_SYNC_CYCLES = 3
SECTOR_SIZE = 16 * 1024
ERASE_LATENCY = 0.210
PROGRAM_LATENCY = 0.460
DIGEST_SIZE = 32

_EPS = 1e-9


# --------------------------------------------------------------------- phases

@dataclass(frozen=True)
class Down:
    remaining: float


@dataclass(frozen=True)
class Stabilizing:
    samples_observed: int = 0
    start_angle: Optional[float] = None


@dataclass(frozen=True)
class Stable:
    pass


ControllerPhase = Union[Down, Stabilizing, Stable]

PHASE_CODE = {Down: 0, Stabilizing: 1, Stable: 2}


# ------------------------------------------------------------------ snapshots

@dataclass(frozen=True)
class Snapshot:
    image: bytes
    digest: bytes
    persisted: Mapping = field(default_factory=lambda: MappingProxyType({}))

    def __post_init__(self):
        if not isinstance(self.image, bytes):
            object.__setattr__(self, "image", bytes(self.image))
        if not isinstance(self.persisted, MappingProxyType):
            object.__setattr__(self, "persisted", MappingProxyType(dict(self.persisted)))

    def to_bytes(self) -> bytes:
        """Little-endian u64 length, the RAM image, then the 32-byte digest."""
        return struct.pack("<Q", len(self.image)) + self.image + self.digest

    @classmethod
    def from_bytes(cls, blob: bytes) -> Snapshot:
        if len(blob) < 8 + DIGEST_SIZE:
            raise ValueError("snapshot blob too short")
        (n,) = struct.unpack_from("<Q", blob, 0)
        if len(blob) != 8 + n + DIGEST_SIZE:
            raise ValueError(f"snapshot blob length {len(blob)} does not match image length {n}")
        return cls(image=bytes(blob[8:8 + n]), digest=bytes(blob[8 + n:]))


def image_digest(image: bytes) -> bytes:
    return hashlib.sha256(image).digest()


def snapshot_verify(s: Snapshot) -> bool:
    return len(s.digest) == DIGEST_SIZE and image_digest(s.image) == s.digest


# ------------------------------------------------------------ reset strategies

@dataclass(frozen=True)
class PowerCycle:
    d_R: float = 0.020

    def __post_init__(self):
        if self.d_R < 0:
            raise ValueError("d_R must be >= 0")


@dataclass(frozen=True)
class SnapshotRestore:
    d_R: float = 0.003
    snapshot: Optional[Snapshot] = None

    def __post_init__(self):
        if self.d_R < 0:
            raise ValueError("d_R must be >= 0")


ResetStrategy = Union[PowerCycle, SnapshotRestore]

ECU_POWER_CYCLE = PowerCycle(0.020)
FC_SNAPSHOT_RESTORE = SnapshotRestore(0.003)
FC_FULL_REBOOT = PowerCycle(1.5)


# ---------------------------------------------------------------------- flash

class SectorState(enum.Enum):
    VALID = "valid"
    ERASING = "erasing"
    PROGRAMMING = "programming"
    INVALID = "invalid"


class FlashOp(enum.Enum):
    ERASE = "erase"
    PROGRAM = "program"


@dataclass
class Sector:
    content: bytearray
    state: SectorState = SectorState.VALID
    remaining: float = 0.0
    pending: Optional[bytes] = None
    erased_epoch: Optional[int] = None

    @property
    def size(self) -> int:
        return len(self.content)

    @property
    def busy(self) -> bool:
        return self.state in (SectorState.ERASING, SectorState.PROGRAMMING)


@dataclass
class FlashModel:
    sectors: list
    erase_latency: float = ERASE_LATENCY
    program_latency: float = PROGRAM_LATENCY
    whitelist: frozenset = frozenset()

    @classmethod
    def blank(cls, n_sectors: int = 4, sector_size: int = SECTOR_SIZE, **kw) -> FlashModel:
        sectors = [Sector(bytearray(b"\xff" * sector_size)) for _ in range(n_sectors)]
        return cls(sectors, **kw)

    @property
    def persist_time(self) -> float:
        return self.erase_latency + self.program_latency


def _sector(state, index: int) -> Sector:
    try:
        return state.flash.sectors[index]
    except IndexError:
        raise IndexError(f"no flash sector {index}") from None


def flash_begin(state, index: int, op: FlashOp, payload: bytes = b""):
    """Start an erase or program operation on one sector.

    Erase is also accepted on a sector left invalid by an aborted operation,
    since erasing is the only way to bring such a sector back.  Program
    needs an erase completed earlier in the same epoch.
    """
    sec = _sector(state, index)
    op = FlashOp(op)
    if sec.busy:
        raise FlashBusy(f"sector {index} is {sec.state.value}")
    if op is FlashOp.ERASE:
        sec.state = SectorState.ERASING
        sec.remaining = state.flash.erase_latency
        sec.pending = None
        sec.erased_epoch = None
    else:
        if sec.state is not SectorState.VALID or sec.erased_epoch != state.epoch:
            raise FlashOrderViolation(f"program on sector {index} without an erase this epoch")
        if len(payload) > sec.size:
            raise ValueError("payload larger than sector")
        sec.state = SectorState.PROGRAMMING
        sec.remaining = state.flash.program_latency
        sec.pending = bytes(payload) + b"\xff" * (sec.size - len(payload))
    return state


def flash_advance(state, dt: float):
    """Let in-flight flash operations run for ``dt`` seconds."""
    for sec in state.flash.sectors:
        if not sec.busy:
            continue
        sec.remaining -= dt
        if sec.remaining > _EPS:
            continue
        sec.remaining = 0.0
        if sec.state is SectorState.ERASING:
            sec.content[:] = b"\xff" * sec.size
            sec.erased_epoch = state.epoch
        else:
            # Programming can only clear bits.
            sec.content[:] = bytes(c & p for c, p in zip(sec.content, sec.pending))
            sec.erased_epoch = None
            sec.pending = None
        sec.state = SectorState.VALID
    return state


def flash_abort(state):
    """Kill in-flight operations; affected sectors are left invalid."""
    for i, sec in enumerate(state.flash.sectors):
        if sec.busy and i not in state.flash.whitelist:
            sec.state = SectorState.INVALID
            sec.remaining = 0.0
            sec.pending = None
            sec.erased_epoch = None
    return state


def flash_bit_clear(state, index: int, mask: bytes):
    """In-place 1->0 write: AND the sector content with ``mask``."""
    sec = _sector(state, index)
    if sec.state is not SectorState.VALID:
        raise FlashBusy(f"sector {index} is {sec.state.value}")
    if len(mask) > sec.size:
        raise ValueError("mask larger than sector")
    for i, m in enumerate(mask):
        sec.content[i] &= m
    return state


def bit_clear_reachable(content: bytes, target: bytes, offset: int = 0) -> bool:
    """Can ``target`` be produced at ``offset`` by clearing bits only?"""
    window = content[offset:offset + len(target)]
    if len(window) != len(target):
        return False
    return all((c & t) == t for c, t in zip(window, target))


def flash_holds(state, index: int, payload: bytes) -> bool:
    """Sector is valid and starts with ``payload``."""
    sec = _sector(state, index)
    return sec.state is SectorState.VALID and bytes(sec.content[:len(payload)]) == bytes(payload)


# ----------------------------------------------------------- controller state

PlantParams = Union[EngineParams, QuadParams, BrakeParams]


class QuadCommand(NamedTuple):
    torque: tuple
    motors: tuple


@dataclass
class ControllerState:
    kind: str
    plant: PlantParams
    dt: float
    control_period: float
    phase: ControllerPhase = field(default_factory=Stable)
    ram: bytearray = field(default_factory=bytearray)
    flash: FlashModel = field(default_factory=FlashModel.blank)
    secret: int = 0
    epoch: int = 0
    nominal_latency: float = 0.0
    slowdown: float = 1.0
    setpoint: object = None
    persisted: dict = field(default_factory=dict)
    boot_ticks: int = 0
    last_command: object = None

    @property
    def effective_latency(self) -> float:
        return self.nominal_latency * self.slowdown

    @property
    def period_ticks(self) -> int:
        return max(1, round(self.control_period / self.dt))

    def check_deadline(self):
        if self.effective_latency > self.control_period + 1e-12:
            raise DeadlineViolation(
                f"compute latency {self.nominal_latency:g}s x slowdown {self.slowdown:g} "
                f"= {self.effective_latency:g}s exceeds control period {self.control_period:g}s"
            )


def initial_ram(size: int) -> bytearray:
    """Deterministic post-initialisation RAM image."""
    return bytearray(i % 251 for i in range(size))


def default_control_period(kind: str, plant: PlantParams, dt: float) -> float:
    if kind == "quad":
        return 1.0 / plant.estimator_rate
    if kind == "brake":
        return max(dt, 0.001)
    return dt


def default_setpoint(kind: str, plant: PlantParams):
    if kind == "engine":
        return plant.nominal_omega
    if kind == "quad":
        return (0.0, 0.0, 0.0)
    return None


def new_controller(kind: str, plant: PlantParams, dt: float, *, control_period: float | None = None,
                   nominal_latency: float | None = None, ram_size: int = 4096,
                   flash: FlashModel | None = None, setpoint=None, persisted=None) -> ControllerState:
    """A freshly initialised controller in the Stable phase."""
    if kind not in ("engine", "quad", "brake"):
        raise ValueError(f"unknown plant kind {kind!r}")
    period = control_period if control_period is not None else default_control_period(kind, plant, dt)
    if nominal_latency is None:
        nominal_latency = 0.4 * period
    return ControllerState(
        kind=kind,
        plant=plant,
        dt=dt,
        control_period=period,
        ram=initial_ram(ram_size),
        flash=flash if flash is not None else FlashModel.blank(),
        nominal_latency=nominal_latency,
        setpoint=setpoint if setpoint is not None else default_setpoint(kind, plant),
        persisted=dict(persisted or {}),
    )


def snapshot_capture(state: ControllerState, attacker_enabled: bool = False) -> Snapshot:
    """Image the RAM; only allowed on a Stable controller with no attacker."""
    if attacker_enabled:
        raise CaptureUnsafeError("snapshot must be captured with the attacker disabled")
    if not isinstance(state.phase, Stable):
        raise CaptureUnsafeError(f"snapshot capture in phase {type(state.phase).__name__}")
    image = bytes(state.ram)
    return Snapshot(image=image, digest=image_digest(image), persisted=state.persisted)


# ----------------------------------------------------------------- operations

def stabilization_time(kind: str, params: PlantParams, rpm: float | None = None) -> float:
    """Observation time needed after boot before the first output (d_S)."""
    if kind == "engine":
        rpm = params.nominal_rpm if rpm is None else rpm
        return ENGINE_SYNC_CYCLES * 60.0 / rpm
    if kind == "quad":
        return params.n_est / params.estimator_rate
    if kind == "brake":
        return 0.0
    raise ValueError(f"unknown plant kind {kind!r}")


def _after_down(state: ControllerState) -> ControllerPhase:
    if state.kind == "brake":
        return Stable()
    return Stabilizing(0)


def apply_reset(state: ControllerState, strategy: ResetStrategy,
                diversifier: Callable | None = None, rng=None) -> ControllerState:
    """Reset the controller and re-diversify it.

    RAM is zeroed (power cycle) or replaced by the verified snapshot image;
    in-flight flash operations are aborted; the persisted-data set is kept.
    """
    if isinstance(strategy, SnapshotRestore):
        snap = strategy.snapshot
        if snap is None:
            raise SnapshotIntegrityError("snapshot restore configured without a snapshot")
        if not snapshot_verify(snap):
            raise SnapshotIntegrityError("snapshot digest mismatch; restore refused")
        state.ram[:] = snap.image
    elif isinstance(strategy, PowerCycle):
        state.ram[:] = bytes(len(state.ram))
    else:
        raise TypeError(f"unknown reset strategy {strategy!r}")

    flash_abort(state)
    state.phase = Down(strategy.d_R) if strategy.d_R > 0 else _after_down(state)
    state.boot_ticks = 0
    state.last_command = None
    if diversifier is not None:
        diversifier(state, rng)
    else:
        state.epoch += 1
    return state


def control_law(kind: str, observation, setpoint, gains: PlantParams):
    """Stable-phase control output.

    engine: skip-fire speed governor, ignition enabled at or below setpoint.
    quad:   attitude PD, torque = -kp*(angle - setpoint) - kd*rate, then mixed.
    brake:  constant demanded deceleration (brake engaged).
    """
    if kind == "engine":
        return (not observation.stalled) and observation.omega <= setpoint
    if kind == "quad":
        sp = setpoint or (0.0, 0.0, 0.0)
        torque = tuple(
            -gains.kp[a] * (observation.angles[a] - sp[a]) - gains.kd[a] * observation.rates[a]
            for a in range(3)
        )
        return QuadCommand(torque, mix_motors(torque, gains))
    if kind == "brake":
        return True
    raise ValueError(f"unknown plant kind {kind!r}")


def _stabilized(state: ControllerState, phase: Stabilizing, observation) -> bool:
    if state.kind == "engine":
        return observation.angle - phase.start_angle >= 2.0 * math.pi * ENGINE_SYNC_CYCLES - 1e-9
    if state.kind == "quad":
        return phase.samples_observed >= state.plant.n_est
    return True


def tick_controller(state: ControllerState, observation, now: float):
    """Advance the controller by one simulation step.

    Returns ``(state, command)`` where command is None unless the controller
    is Stable and a control sample is due.
    """
    state.check_deadline()
    phase = state.phase

    if isinstance(phase, Down):
        remaining = phase.remaining - state.dt
        state.phase = Down(remaining) if remaining > _EPS else _after_down(state)
        return state, None

    due = state.boot_ticks % state.period_ticks == 0
    state.boot_ticks += 1
    if not due:
        return state, None

    if isinstance(phase, Stabilizing):
        start = phase.start_angle
        if start is None and state.kind == "engine":
            start = observation.angle
        phase = Stabilizing(phase.samples_observed + 1, start)
        state.phase = Stable() if _stabilized(state, phase, observation) else phase
        return state, None

    cmd = control_law(state.kind, observation, state.setpoint, state.plant)
    state.last_command = cmd
    return state, cmd
