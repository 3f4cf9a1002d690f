from typing import Annotated, Literal, Union

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, Field, model_validator
from typing_extensions import Self

from ..data import CutoffSpec
from ..quadrature import tensor_points
from ..utils import FloatArray
from .cutoff import chi, chi_hat


def _points(x: npt.ArrayLike) -> FloatArray:
    return np.atleast_2d(np.asarray(x, dtype=np.float64))


class ConstantTerm(BaseModel):
    kind: Literal["constant"] = "constant"
    value: float

    def __call__(self, points: FloatArray) -> FloatArray:
        return np.full(points.shape[0], self.value)


class GaussianTerm(BaseModel):
    """amplitude * exp(-|x - center|^2 / width^2)"""

    kind: Literal["gaussian"] = "gaussian"
    amplitude: float
    center: list[float]
    width: float = Field(gt=0)

    def __call__(self, points: FloatArray) -> FloatArray:
        shift = points - np.asarray(self.center)
        return self.amplitude * np.exp(-np.sum(shift * shift, axis=1) / self.width**2)


class PlaneWaveTerm(BaseModel):
    """amplitude * cos(k . x + phase), k = (k_0, k_spatial)"""

    kind: Literal["plane-wave"] = "plane-wave"
    amplitude: float
    wavevector: list[float]
    phase: float = 0.0

    def __call__(self, points: FloatArray) -> FloatArray:
        return self.amplitude * np.cos(points @ np.asarray(self.wavevector) + self.phase)

    @property
    def spatial_norm(self) -> float:
        return float(np.linalg.norm(self.wavevector[1:]))


class SmearedTerm(BaseModel):
    """
    Spatial convolution of a term with the scaled mollifier
    Lambda^{-k} chi(y / Lambda); time is left untouched. Evaluated by a fixed
    tensor rule over the mollifier's support box.
    """

    kind: Literal["smeared"] = "smeared"
    base: "FieldTerm"
    Lambda: float = Field(gt=0)
    cutoff: CutoffSpec = Field(default_factory=CutoffSpec)
    nodes: int = Field(default=24, ge=4)

    def __call__(self, points: FloatArray) -> FloatArray:
        spatial_dim = points.shape[1] - 1
        reach = self.Lambda * self.cutoff.radius
        offsets, weights = tensor_points([(-reach, reach)] * spatial_dim, self.nodes)
        weights = weights * chi(offsets / self.Lambda, self.cutoff, spatial_dim)
        weights = weights / self.Lambda**spatial_dim
        out = np.zeros(points.shape[0])
        for offset, weight in zip(offsets, weights):
            if weight == 0.0:
                continue
            shifted = points.copy()
            shifted[:, 1:] -= offset
            out += weight * self.base(shifted)
        return out


FieldTerm = Annotated[
    Union[ConstantTerm, GaussianTerm, PlaneWaveTerm, SmearedTerm],
    Field(discriminator="kind"),
]
SmearedTerm.model_rebuild()


def _scale_term(term: FieldTerm, factor: float) -> FieldTerm:
    if isinstance(term, ConstantTerm):
        return term.model_copy(update={"value": term.value * factor})
    if isinstance(term, SmearedTerm):
        return term.model_copy(update={"base": _scale_term(term.base, factor)})
    return term.model_copy(update={"amplitude": term.amplitude * factor})


class FieldConfiguration(BaseModel):
    """A real smooth field as a finite sum of closed-form terms"""

    terms: list[FieldTerm] = Field(default_factory=list)

    @model_validator(mode="after")
    def _axes_agree(self) -> Self:
        lengths = {len(t.center) for t in self.terms if isinstance(t, GaussianTerm)}
        lengths |= {len(t.wavevector) for t in self.terms if isinstance(t, PlaneWaveTerm)}
        if len(lengths) > 1:
            raise ValueError(f"terms disagree on the spacetime dimension: {sorted(lengths)}")
        return self

    @classmethod
    def zero(cls) -> "FieldConfiguration":
        return cls()

    @classmethod
    def constant(cls, value: float) -> "FieldConfiguration":
        return cls(terms=[ConstantTerm(value=value)])

    @property
    def is_zero(self) -> bool:
        return all(isinstance(t, ConstantTerm) and t.value == 0.0 for t in self.terms)

    def __call__(self, points: npt.ArrayLike) -> FloatArray:
        x = _points(points)
        out = np.zeros(x.shape[0])
        for term in self.terms:
            out = out + term(x)
        return out

    def scaled(self, factor: float) -> "FieldConfiguration":
        """factor * phi, term by term"""
        return FieldConfiguration(terms=[_scale_term(term, factor) for term in self.terms])

    def __add__(self, other: "FieldConfiguration") -> "FieldConfiguration":
        return FieldConfiguration(terms=[*self.terms, *other.terms])


def smear_field(
    phi: FieldConfiguration, Lambda: float, cutoff: CutoffSpec, spatial_dim: int | None = None
) -> FieldConfiguration:
    """
    Returns G_Lambda * phi. Constants pass through, plane waves pick up
    chi_hat(Lambda |k_spatial|), every other term is wrapped for quadrature.
    """
    if Lambda <= 0:
        raise ValueError(f"smearing needs Lambda > 0, got {Lambda}")
    terms: list[FieldTerm] = []
    for term in phi.terms:
        if isinstance(term, ConstantTerm):
            terms.append(term)
        elif isinstance(term, PlaneWaveTerm):
            dim = spatial_dim if spatial_dim is not None else len(term.wavevector) - 1
            factor = chi_hat(Lambda * term.spatial_norm, cutoff, dim)
            terms.append(term.model_copy(update={"amplitude": term.amplitude * factor}))
        else:
            terms.append(SmearedTerm(base=term, Lambda=Lambda, cutoff=cutoff))
    return FieldConfiguration(terms=terms)
