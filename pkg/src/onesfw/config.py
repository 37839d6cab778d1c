"""Experiment configuration files.

Configs are TOML documents with five tables::

    [problem]                  # zoo name, data seed, builder parameters
    name = "oblivious_quadratic"
    dim = 10
    noise = 1.0
    data_seed = 0

    [constraint]               # set kind and its parameters
    kind = "simplex"           # simplex | l1 | l2 | box | budgeted_box

    [solver]
    algorithms = ["one_sfw", "momentum_fw"]   # or algorithm = "one_sfw"
    mode = "convex_min"        # convex_min | nonconvex_min | submodular_max
    T = 1000
    delta_option = "exact_hessian"
    # optional: alpha, eta, delta_fixed, momentum_rho_exponent,
    #           record_exact_diagnostics (default true), reference_opt (default true)

    [sweep]
    seeds = 20                 # a count (indices 0..19) or an explicit list
    base_seed = 0

    [output]
    directory = "results"
    formats = ["csv"]          # any of csv, json

Every problem key other than ``name`` is passed to the zoo builder. The
constraint dimension is taken from the problem.
"""
import inspect
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .constraints import make_constraint
from .errors import ConfigError, OneSFWError
from .estimators import DeltaOption
from .oracles import ZOO
from .solvers import ALGORITHMS, Mode, SolverConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SECTIONS = ("problem", "constraint", "solver", "sweep", "output")
FORMATS = ("csv", "json")
_SOLVER_KEYS = {
    "algorithm", "algorithms", "mode", "T", "alpha", "eta", "delta_option", "delta_fixed",
    "momentum_rho_exponent", "record_exact_diagnostics", "reference_opt", "x1",
}


class _Locator:
    """Maps ``section.key`` paths to 1-based line numbers in the source text."""

    _header = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]")
    _key = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")

    def __init__(self, text):
        self.lines = {}
        section = ""
        for lineno, line in enumerate(text.splitlines(), start=1):
            m = self._header.match(line)
            if m:
                section = m.group(1)
                self.lines.setdefault(section, lineno)
                continue
            m = self._key.match(line)
            if m:
                path = f"{section}.{m.group(1)}" if section else m.group(1)
                self.lines.setdefault(path, lineno)

    def line(self, path):
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path.rpartition(".")[0]
        return None


@dataclass
class ExperimentConfig:
    problem: dict
    constraint: dict
    solver: dict
    sweep: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    source: str = "<config>"
    _locator: _Locator = field(default=None, repr=False)

    # --- error reporting ---------------------------------------------------

    def error(self, path, message):
        line = self._locator.line(path) if self._locator else None
        where = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{where}: field '{path}': {message}")

    # --- accessors ---------------------------------------------------------

    @property
    def algorithms(self):
        s = self.solver
        if "algorithms" in s and "algorithm" in s:
            raise self.error("solver.algorithm", "give either 'algorithm' or 'algorithms', not both")
        names = s.get("algorithms", s.get("algorithm"))
        if names is None:
            raise self.error("solver", "missing 'algorithm'")
        key = "solver.algorithms" if "algorithms" in s else "solver.algorithm"
        names = [names] if isinstance(names, str) else list(names)
        if not names:
            raise self.error(key, "no solver listed")
        for name in names:
            if name not in ALGORITHMS:
                raise self.error(key, f"unknown solver {name!r}; choose from {', '.join(ALGORITHMS)}")
        if len(set(names)) != len(names):
            raise self.error(key, "solver listed twice")
        return names

    @property
    def seed_indices(self):
        seeds = self.sweep.get("seeds", 1)
        if isinstance(seeds, bool):
            raise self.error("sweep.seeds", "expected a count or a list of integers")
        if isinstance(seeds, int):
            if seeds < 1:
                raise self.error("sweep.seeds", "seed count must be at least 1")
            return list(range(seeds))
        if isinstance(seeds, list) and seeds and all(
            isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds
        ):
            if len(set(seeds)) != len(seeds):
                raise self.error("sweep.seeds", "duplicate seed index")
            return list(seeds)
        raise self.error("sweep.seeds", "expected a count or a non-empty list of nonnegative integers")

    @property
    def base_seed(self):
        b = self.sweep.get("base_seed", 0)
        if not isinstance(b, int) or isinstance(b, bool) or not 0 <= b < 2**64:
            raise self.error("sweep.base_seed", "expected an integer in [0, 2**64)")
        return b

    @property
    def formats(self):
        fmts = self.output.get("formats", ["csv"])
        if isinstance(fmts, str):
            fmts = [fmts]
        for f in fmts:
            if f not in FORMATS:
                raise self.error("output.formats", f"unknown format {f!r}; choose from csv, json")
        if "csv" not in fmts:
            raise self.error("output.formats", "csv traces are always written; include 'csv'")
        return list(fmts)

    @property
    def directory(self):
        d = self.output.get("directory", "results")
        if not isinstance(d, str) or not d:
            raise self.error("output.directory", "expected a path string")
        return d

    # --- builders ----------------------------------------------------------

    def build_problem(self):
        params = dict(self.problem)
        name = params.pop("name", None)
        if name is None:
            raise self.error("problem", "missing 'name'")
        if name not in ZOO:
            raise self.error("problem.name", f"unknown problem {name!r}; choose from {', '.join(ZOO)}")
        builder = ZOO[name]
        accepted = inspect.signature(builder).parameters
        for key in params:
            if key not in accepted:
                raise self.error(f"problem.{key}", f"not a parameter of {name}")
        try:
            return builder(**params)
        except (OneSFWError, ValueError, TypeError) as exc:
            raise self.error("problem", str(exc)) from None

    def build_constraint(self, dim):
        params = dict(self.constraint)
        kind = params.pop("kind", None)
        if kind is None:
            raise self.error("constraint", "missing 'kind'")
        if "dim" in params and params.pop("dim") != dim:
            raise self.error("constraint.dim", f"does not match the problem dimension {dim}")
        try:
            return make_constraint(str(kind), dim, **params)
        except (OneSFWError, ValueError, TypeError) as exc:
            raise self.error("constraint", str(exc)) from None

    def solver_config(self, seed):
        s = self.solver
        for key in s:
            if key not in _SOLVER_KEYS:
                raise self.error(f"solver.{key}", "unknown solver option")
        if "T" not in s:
            raise self.error("solver", "missing horizon 'T'")
        if not isinstance(s["T"], int) or isinstance(s["T"], bool):
            raise self.error("solver.T", "expected an integer")
        kwargs = dict(
            T=s["T"],
            mode=s.get("mode", "convex_min"),
            alpha=s.get("alpha"),
            eta=s.get("eta", "theorem"),
            delta_option=s.get("delta_option", "exact_hessian"),
            x1=s.get("x1"),
            seed=seed,
            record_exact_diagnostics=bool(s.get("record_exact_diagnostics", True)),
            delta_fixed=s.get("delta_fixed"),
        )
        if "momentum_rho_exponent" in s:
            kwargs["momentum_rho_exponent"] = float(s["momentum_rho_exponent"])
        for key, parse in (("mode", Mode.parse), ("delta_option", DeltaOption.parse)):
            try:
                parse(kwargs[key])
            except OneSFWError as exc:
                raise self.error(f"solver.{key}", str(exc)) from None
        try:
            return SolverConfig(**kwargs)
        except (OneSFWError, ValueError, TypeError) as exc:
            raise self.error("solver", str(exc)) from None

    def validate(self):
        """Resolve every reference once; raises :class:`ConfigError` on the first problem."""
        oracle = self.build_problem()
        K = self.build_constraint(oracle.dim)
        self.algorithms
        self.seed_indices
        self.base_seed
        self.formats
        self.directory
        self.solver_config(0)
        return oracle, K


def parse_config(text, source="<config>"):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    loc = _Locator(text)
    for key, value in data.items():
        if key not in SECTIONS:
            line = loc.line(key)
            where = f"{source}:{line}" if line else source
            raise ConfigError(f"{where}: unknown section '{key}'")
        if not isinstance(value, dict):
            raise ConfigError(f"{source}: '{key}' must be a table")
    for required in ("problem", "constraint", "solver"):
        if required not in data:
            raise ConfigError(f"{source}: missing section [{required}]")
    return ExperimentConfig(
        problem=data["problem"], constraint=data["constraint"], solver=data["solver"],
        sweep=data.get("sweep", {}), output=data.get("output", {}), source=source, _locator=loc,
    )


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(path))
