import enum
import typing

from ebsesim.trace import DEFAULT_WINDOW

DEFAULT_TOLERANCE = 1e-10


@enum.unique
class OutputFormat(enum.Enum):
    CSV = 'csv'
    JSON = 'json'


class Options:

    def __init__(self,
                 out_dir: str = '.',
                 fmt: OutputFormat = OutputFormat.CSV,
                 seed: typing.Optional[int] = None,
                 horizon: typing.Optional[int] = None,
                 window: int = DEFAULT_WINDOW,
                 tolerance: float = DEFAULT_TOLERANCE,
                 debug: bool = False):
        self.out_dir = out_dir
        self.fmt = fmt
        self.seed = seed
        self.horizon = horizon
        self.window = window
        self.tolerance = tolerance
        self.debug = debug

    def __repr__(self):
        return f'<{self.__class__.__name__} [{self}]>'

    def __str__(self):
        return (f'out_dir:{self.out_dir}, '
                f'fmt:{self.fmt.value}, '
                f'seed:{self.seed}, '
                f'horizon:{self.horizon}, '
                f'window:{self.window}, '
                f'tolerance:{self.tolerance}, '
                f'debug:{self.debug}')
