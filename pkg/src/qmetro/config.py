"""Experiment configuration (JSON) with validation and derived objects."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .channel import JumpEnsemble, channel_parts, jump_ensemble
from .errors import ConfigurationError
from .hamiltonians import EigenSystem, HermitianOperator, build_random_local, build_tfim, eigensystem
from .qpe import EnergyGrid, energy_grid


@dataclass
class SweepAxes:
    r: list = field(default_factory=lambda: [2, 3, 4])
    g: list = field(default_factory=lambda: [1, 3])
    tau: list = field(default_factory=lambda: [0.1])
    beta: list = field(default_factory=lambda: [1.0])


@dataclass
class ExperimentConfig:
    n: int = 2
    model: str = "tfim"
    J: float = 1.0
    h: float = 0.5
    locality: int = 2
    model_seed: int = 7
    beta: float = 1.0
    r: int = 3
    g: int = 3
    tau: float = 0.1
    jumps: str = "pauli"
    iterations: int = 100
    trajectories: int = 1000
    epsilon: float = 0.01
    seed: int = 0
    sweep: SweepAxes = field(default_factory=SweepAxes)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if isinstance(self.sweep, dict):
            self.sweep = SweepAxes(**self.sweep)
        self.validate()

    def validate(self):
        if self.g < 1 or self.g % 2 == 0:
            raise ConfigurationError(f"g={self.g}: the number of boosting rounds g must be odd")
        for g in self.sweep.g:
            if g < 1 or g % 2 == 0:
                raise ConfigurationError(f"sweep value g={g}: the number of boosting rounds g must be odd")
        if self.r < 1:
            raise ConfigurationError("r must be at least 1")
        if not 0 < self.tau <= 1:
            raise ConfigurationError("tau must lie in (0, 1]")
        if self.beta < 0:
            raise ConfigurationError("beta must be non-negative")
        if self.model not in ("tfim", "random_local"):
            raise ConfigurationError(f"unknown model {self.model!r}")
        if self.jumps not in ("pauli", "z", "x"):
            raise ConfigurationError(f"unknown jump set {self.jumps!r}")
        self.warnings = []
        grid = self.grid()
        if 2 * self.beta * grid.spacing > 1:
            self.warnings.append(
                f"r={self.r} is below the precision needed for beta={self.beta} "
                f"(need r >= {grid.minimal_r(self.beta)}); truncated-Gibbs checks are skipped"
            )

    # derived objects -------------------------------------------------------
    def hamiltonian(self) -> HermitianOperator:
        if self.model == "tfim":
            return build_tfim(self.n, self.J, self.h)
        return build_random_local(self.n, self.locality, self.model_seed)

    def eigensystem(self) -> EigenSystem:
        return eigensystem(self.hamiltonian())

    def grid(self, r: int | None = None) -> EnergyGrid:
        return energy_grid(self.r if r is None else r, self.eigensystem().kappa)

    def ensemble(self) -> JumpEnsemble:
        return jump_ensemble(self.jumps, self.n)

    def parts(self, r=None, g=None, beta=None):
        es = self.eigensystem()
        return channel_parts(
            es,
            self.grid(r),
            self.g if g is None else g,
            self.ensemble(),
            self.beta if beta is None else beta,
        )

    @property
    def precise(self) -> bool:
        return not self.warnings

    # serialisation -----------------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("warnings")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)} - {"warnings"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    with open(path) as fh:
        return parse_config(fh.read())
