"""Base class for every parameter object (FeatureMapParams, GridSpec, ...)."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any, ClassVar


class ParamsComponent(ABC):
    """Base class for all validated parameter objects."""

    _initialized: bool = False

    #: Sequence attributes normalized to tuple on assignment.
    _TUPLE_FIELDS: ClassVar[frozenset[str]] = frozenset()

    def __setattr__(self, key: str, value: Any) -> None:
        """Set an attribute, validating the component if already initialized."""
        if key in self._TUPLE_FIELDS and value is not None and not isinstance(
            value, str
        ):
            value = tuple(value)
        object.__setattr__(self, key, value)
        if key.startswith("_") or not self._initialized:
            return
        self._validate()

    @abstractmethod
    def _validate(self) -> None:
        """
        Validate component-specific rules.

        Subclasses must implement their own validation rules.
        """

    def to_dict(self) -> dict[str, Any]:
        """Return the public fields as a plain dictionary."""
        return {
            key: value
            for key, value in vars(self).items()
            if not key.startswith("_")
        }

    def __eq__(self, other: object) -> bool:
        """Compare two components field by field."""
        if type(other) is not type(self):
            return NotImplemented
        return self.to_dict() == other.to_dict()  # type: ignore[attr-defined]

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        """Return a detailed string representation of the component."""
        fields = ", ".join(f"{k}={v!r}" for k, v in self.to_dict().items())
        return f"{type(self).__name__}({fields})"
