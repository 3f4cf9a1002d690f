import json
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, Field, model_validator
from typing_extensions import Self

from ..configs import EngineSettings, QuadratureSettings
from ..data import ChargeProfile, CutoffSpec, ModelParams, SpacetimeTestFunction
from ..kernels import FieldConfiguration, GaussianTerm, PlaneWaveTerm
from ..sg2d import SG2DParams

Command = Literal["propagator", "smatrix", "renorm3d", "renorm4d", "sg2d", "cluster", "verify"]


class ModelBlock(BaseModel):
    dimension: Literal[2, 3, 4] = 2
    mass: float = Field(default=1.0, gt=0)
    Lambda: float = Field(default=1.0, ge=0)
    cutoff_radius: float = Field(default=1.0, gt=0)

    def params(self, Lambda: float | None = None) -> ModelParams:
        return ModelParams(
            dimension=self.dimension,
            mass=self.mass,
            Lambda=self.Lambda if Lambda is None else Lambda,
        )

    def cutoff(self) -> CutoffSpec:
        return CutoffSpec(radius=self.cutoff_radius)


class InteractionBlock(BaseModel):
    coupling: float = 0.5
    order: int = Field(default=2, ge=0)
    profile: ChargeProfile = Field(default_factory=lambda: ChargeProfile.normalized(1.0))
    # defaults to a unit bump of halfwidth 0.5 at the origin
    smearing: SpacetimeTestFunction | None = None
    field: FieldConfiguration = Field(default_factory=FieldConfiguration.zero)

    def smearing_for(self, dimension: int) -> SpacetimeTestFunction:
        if self.smearing is not None:
            return self.smearing
        return SpacetimeTestFunction.unit(center=[0.0] * dimension, halfwidth=[0.5] * dimension)


class PropagatorBlock(BaseModel):
    t_values: list[float] = Field(default_factory=lambda: [0.0, 0.5, 1.0])
    r_values: list[float] = Field(default_factory=lambda: [0.5, 1.0, 1.5, 2.0])


class Renorm3DBlock(BaseModel):
    order: int = Field(default=1, ge=0, le=2)
    Lambda2: float = Field(default=0.5, gt=0)
    Lambda1_sequence: list[float] = Field(default_factory=lambda: [0.4, 0.2, 0.1])
    corollary: bool = False
    two_leg_Lambda2: list[float] = Field(default_factory=list)
    rule_nodes: int = Field(default=20, ge=4)


class Renorm4DBlock(BaseModel):
    table: Path | None = None
    order: int = Field(default=1, ge=0)
    k_values: list[int] = Field(default_factory=lambda: [1, 2])
    base: tuple[float, float] = (0.5, 0.5)
    rule_nodes: int = Field(default=20, ge=4)


class SG2DBlock(BaseModel):
    mu: float = Field(default=1.0, gt=0)
    a_max: float = Field(default=1.0, gt=0)
    p: float = Field(default=2.0, ge=1)
    # calibrated against |S_2| when absent
    C_cal: float | None = Field(default=None, gt=0)
    n_values: list[int] = Field(default_factory=lambda: [1, 2, 3])

    def params(self, mass: float, C_cal: float | None = None) -> SG2DParams:
        return SG2DParams(
            mass=mass, mu=self.mu, a_max=self.a_max, p=self.p, C_cal=C_cal or self.C_cal or 1.0
        )


class ClusterBlock(BaseModel):
    max_order: int = Field(default=3, ge=1, le=4)
    rule_nodes: int = Field(default=12, ge=4)


class ScenarioConfig(BaseModel):
    """One scenario document, shared by every subcommand"""

    seed: int = Field(default=0, ge=0)
    model: ModelBlock = Field(default_factory=ModelBlock)
    interaction: InteractionBlock = Field(default_factory=InteractionBlock)
    quadrature: QuadratureSettings = Field(default_factory=QuadratureSettings)
    propagator: PropagatorBlock = Field(default_factory=PropagatorBlock)
    renorm3d: Renorm3DBlock = Field(default_factory=Renorm3DBlock)
    renorm4d: Renorm4DBlock = Field(default_factory=Renorm4DBlock)
    sg2d: SG2DBlock = Field(default_factory=SG2DBlock)
    cluster: ClusterBlock = Field(default_factory=ClusterBlock)

    @model_validator(mode="after")
    def _consistent(self) -> Self:
        problems = self._cross_field_problems()
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def _cross_field_problems(self) -> list[str]:
        d = self.model.dimension
        problems = []
        smearing = self.interaction.smearing
        if smearing is not None and smearing.dimension != d:
            problems.append(f"smearing has {smearing.dimension} axes but the model has d = {d}")
        for term in self.interaction.field.terms:
            axes = None
            if isinstance(term, GaussianTerm):
                axes = len(term.center)
            elif isinstance(term, PlaneWaveTerm):
                axes = len(term.wavevector)
            if axes is not None and axes != d:
                problems.append(f"field term {term.kind} has {axes} axes but the model has d = {d}")
        if any(r < 0 for r in self.propagator.r_values):
            problems.append(f"propagator radii must be >= 0, got {self.propagator.r_values}")
        if any(L <= 0 for L in self.renorm3d.Lambda1_sequence):
            problems.append(f"Lambda1 values must be positive, got {self.renorm3d.Lambda1_sequence}")
        if any(k < 1 for k in self.renorm4d.k_values):
            problems.append(f"schedule indices start at 1, got {self.renorm4d.k_values}")
        if any(n < 0 for n in self.sg2d.n_values):
            problems.append(f"sg2d orders must be >= 0, got {self.sg2d.n_values}")
        return problems

    def command_problems(self, command: Command) -> list[str]:
        """Constraints a subcommand puts on the scenario, all of them at once"""
        d = self.model.dimension
        Lambda = self.model.Lambda
        problems = []
        needs_regulator = command in ("smatrix", "renorm3d", "renorm4d", "sg2d", "cluster")
        if needs_regulator and Lambda <= 0:
            problems.append(f"{command} needs Lambda > 0, got {Lambda}")
        if command == "propagator" and Lambda == 0 and d != 2:
            problems.append(f"Lambda = 0 propagators exist pointwise only in d = 2, got d = {d}")
        if command == "renorm3d" and d != 3:
            problems.append(f"renorm3d runs in d = 3, got d = {d}")
        if command == "renorm4d":
            if d != 4:
                problems.append(f"renorm4d runs in d = 4, got d = {d}")
            if self.renorm4d.table is None:
                problems.append("renorm4d needs a counterterm table path")
        if command in ("sg2d", "cluster") and d != 2:
            problems.append(f"{command} runs in d = 2, got d = {d}")
        if command == "sg2d" and self.interaction.profile.support > self.sg2d.a_max:
            problems.append(
                f"charge support {self.interaction.profile.support} exceeds a_max = {self.sg2d.a_max}"
            )
        if command == "smatrix":
            cap = EngineSettings().order_cap(d)
            if self.interaction.order > cap:
                problems.append(f"order {self.interaction.order} exceeds the cap of {cap} in d = {d}")
        return problems

    @classmethod
    def load(cls, path: Path | str) -> "ScenarioConfig":
        """Read a JSON or YAML scenario; relative table paths resolve against its folder"""
        path = Path(path)
        with open(path, "r") as f:
            text = f.read()
        document = yaml.safe_load(text) if path.suffix in (".yaml", ".yml") else json.loads(text)
        config = cls.model_validate(document)
        table = config.renorm4d.table
        if table is not None and not table.is_absolute():
            config.renorm4d.table = path.parent / table
        return config

    def engine_settings(self, seed: int | None = None, threads: int | None = None) -> EngineSettings:
        """EngineSettings from the environment with this scenario's quadrature block"""
        quadrature = self.quadrature.model_copy(
            update={"seed": self.seed if seed is None else seed}
        )
        settings = EngineSettings()
        update: dict[str, object] = {"quadrature": quadrature}
        if threads is not None:
            update["threads"] = threads
        return settings.model_copy(update=update)
