import csv
import enum
import logging
import typing

from numpy import ndarray

from ebsesim.errors import ScenarioError
from ebsesim.utils import philox

logger = logging.getLogger(__name__)


@enum.unique
class FrameKind(enum.Enum):
    MEASUREMENT = 'measurement'
    INPUT = 'input'
    RESET_ESTIMATE = 'reset_estimate'


FRAME_CODES = {FrameKind.MEASUREMENT: 1, FrameKind.INPUT: 2, FrameKind.RESET_ESTIMATE: 3}


class BusFrame(typing.NamedTuple):
    kind: FrameKind
    sender: int
    channel: int
    payload: ndarray
    step: int

    @property
    def frame_id(self) -> int:
        return (FRAME_CODES[self.kind] << 32) | (self.channel << 16) | self.sender

    def __str__(self):
        return f'{self.kind.value}[{self.channel}] from {self.sender} at {self.step}'


@enum.unique
class DropKind(enum.Enum):
    NONE = 'none'
    IID = 'iid'


@enum.unique
class DropScope(enum.Enum):
    PER_RECEIVER = 'per_receiver'
    PER_FRAME = 'per_frame'


class DropModel:

    def __init__(self,
                 kind: DropKind = DropKind.NONE,
                 drop_prob: float = 0.0,
                 scope: DropScope = DropScope.PER_RECEIVER,
                 seed: int = 0,
                 exempt_kinds: typing.Optional[typing.Iterable[FrameKind]] = None):
        if not 0.0 <= drop_prob <= 1.0:
            raise ScenarioError(f'drop probability must lie in [0, 1], got {drop_prob}', 'bus.drop.probability')
        if seed < 0:
            raise ScenarioError(f'seed must be unsigned, got {seed}', 'bus.drop.seed')
        self.kind = kind
        self.drop_prob = float(drop_prob)
        self.scope = scope
        self.seed = int(seed)
        self.exempt_kinds = frozenset(exempt_kinds or ())

    def drops(self, frame: BusFrame, receiver: int) -> bool:
        """Fate of ``frame`` at ``receiver``, a pure function of (seed, step, frame, receiver)."""
        if (self.kind == DropKind.NONE or receiver == frame.sender
                or frame.kind == FrameKind.RESET_ESTIMATE or frame.kind in self.exempt_kinds):
            return False

        word = 0 if self.scope == DropScope.PER_FRAME else receiver + 1
        return bool(philox(self.seed, frame.step, word, frame.frame_id).random() < self.drop_prob)

    def __eq__(self, other):
        if not isinstance(other, DropModel):
            return NotImplemented
        return (self.kind, self.drop_prob, self.scope, self.seed, self.exempt_kinds) == \
            (other.kind, other.drop_prob, other.scope, other.seed, other.exempt_kinds)

    def __repr__(self):
        return f'<{self.__class__.__name__} [{self}]>'

    def __str__(self):
        return (f'kind:{self.kind.value}, drop_prob:{self.drop_prob}, scope:{self.scope.value}, '
                f'seed:{self.seed}, exempt:{sorted(k.value for k in self.exempt_kinds)}')


class Fate(typing.NamedTuple):
    step: int
    kind: FrameKind
    sender: int
    channel: int
    receiver: int
    delivered: bool


class CapacityReport(typing.NamedTuple):
    ok: bool
    step: typing.Optional[int]
    frames: int
    capacity: typing.Optional[int]


class BusLog:

    def __init__(self):
        self.fates: typing.List[Fate] = []
        self.offered: typing.Dict[typing.Tuple[FrameKind, int], int] = {}
        self.delivered: typing.Dict[typing.Tuple[FrameKind, int], int] = {}
        self.dropped: typing.Dict[typing.Tuple[FrameKind, int], int] = {}
        self.violations: typing.List[CapacityReport] = []

    def offer(self, frame: BusFrame):
        key = (frame.kind, frame.channel)
        self.offered[key] = self.offered.get(key, 0) + 1

    def record(self, frame: BusFrame, receiver: int, delivered: bool):
        key = (frame.kind, frame.channel)
        counts = self.delivered if delivered else self.dropped
        counts[key] = counts.get(key, 0) + 1
        self.fates.append(Fate(frame.step, frame.kind, frame.sender, frame.channel, receiver, delivered))

    def drop_steps(self, kind: FrameKind = FrameKind.MEASUREMENT) -> typing.List[int]:
        return sorted({f.step for f in self.fates if f.kind == kind and not f.delivered})

    def write_csv(self, path: str):
        with open(path, mode='w', encoding='utf8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(['step', 'kind', 'sender', 'channel', 'receiver', 'fate'])
            for fate in self.fates:
                writer.writerow([fate.step, fate.kind.value, fate.sender, fate.channel, fate.receiver,
                                 'delivered' if fate.delivered else 'dropped'])

    def __repr__(self):
        return f'<{self.__class__.__name__} [fates:{len(self.fates)}, violations:{len(self.violations)}]>'


def broadcast(frames: typing.Sequence[BusFrame],
              receivers: typing.Sequence[int],
              drop_model: DropModel,
              step: int,
              log: typing.Optional[BusLog] = None) -> typing.Dict[int, typing.List[BusFrame]]:
    """Per-receiver delivered frames; senders always keep their own frames."""
    delivered: typing.Dict[int, typing.List[BusFrame]] = {r: [] for r in receivers}
    for frame in frames:
        if log is not None:
            log.offer(frame)
        for receiver in receivers:
            lost = drop_model.drops(frame._replace(step=step), receiver)
            if log is not None:
                log.record(frame, receiver, not lost)
            if lost:
                logger.debug('Dropped %s at receiver %d', frame, receiver)
            else:
                delivered[receiver].append(frame)

    return delivered


def capacity_check(frames_this_step: int,
                   max_per_step: typing.Optional[int],
                   step: typing.Optional[int] = None) -> CapacityReport:
    ok = max_per_step is None or frames_this_step <= max_per_step
    return CapacityReport(ok, None if ok else step, frames_this_step, max_per_step)


class Bus:
    """Common broadcast bus owned by the simulation loop."""

    def __init__(self, receivers: typing.Sequence[int], drop_model: DropModel, capacity: typing.Optional[int] = None):
        self.receivers = list(receivers)
        self.drop_model = drop_model
        self.capacity = capacity
        self.log = BusLog()
        self._step: typing.Optional[int] = None
        self._step_frames = 0

    def send(self, frames: typing.Sequence[BusFrame], step: int) -> typing.Dict[int, typing.List[BusFrame]]:
        if self._step != step:
            self._step = step
            self._step_frames = 0
        self._step_frames += len(frames)

        report = capacity_check(self._step_frames, self.capacity, step)
        if not report.ok:
            if self.log.violations and self.log.violations[-1].step == step:
                self.log.violations[-1] = report
            else:
                logger.warning('Bus capacity exceeded at step %d: %d frames for capacity %s',
                               step, report.frames, report.capacity)
                self.log.violations.append(report)

        return broadcast(frames, self.receivers, self.drop_model, step, self.log)
