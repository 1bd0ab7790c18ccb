"""Exception hierarchy shared by every PatchPoison module."""

from __future__ import annotations

from typing import Any, TypeVar

from pydantic import BaseModel, ValidationError


class PatchPoisonError(Exception):
    """Base class for all errors raised by the toolkit."""


class InvalidParameterError(PatchPoisonError, ValueError):
    """A parameter is outside its documented range (b > P, even blur kernel, ...)."""


class InvalidInputError(PatchPoisonError, ValueError):
    """Input data has the wrong shape, count or size for the requested operation."""


class PatchPlacementError(PatchPoisonError, ValueError):
    """The patch region does not fit inside the target image."""


class InsufficientDataError(PatchPoisonError):
    """Not enough correspondences for the requested estimator."""


class DegenerateConfigurationError(PatchPoisonError):
    """Point configuration admits no unique solution."""


class AmbiguousPoseError(PatchPoisonError):
    """Cheirality voting could not separate the pose candidates."""


class DatasetError(PatchPoisonError, RuntimeError):
    """Dataset directory is empty, unreadable or an output directory is not writable."""


ModelT = TypeVar("ModelT", bound=BaseModel)


def parse_model(model: type[ModelT], data: Any) -> ModelT:
    """Validate ``data`` into ``model``, surfacing failures as ``InvalidParameterError``."""
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise InvalidParameterError(f"invalid {model.__name__}: {exc}") from exc
