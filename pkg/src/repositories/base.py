import abc
import logging
import os
from typing import Generic, TypeVar

from src.utils.errors import GridIOError

logger = logging.getLogger(__name__)

ModelType = TypeVar("ModelType")


class BaseRepository(Generic[ModelType], abc.ABC):
    """File-backed storage for one kind of object."""

    suffixes: tuple = ()

    @abc.abstractmethod
    def read(self, path: str) -> ModelType: ...

    @abc.abstractmethod
    def write(self, obj: ModelType, path: str) -> None: ...

    def handles(self, path: str) -> bool:
        return os.path.splitext(path)[1].lower() in self.suffixes

    def _read_bytes(self, path: str) -> bytes:
        try:
            with open(path, "rb") as fh:
                return fh.read()
        except OSError as e:
            raise GridIOError(f"cannot read {path}: {e.strerror or e}") from e

    def _write_bytes(self, path: str, payload: bytes) -> None:
        directory = os.path.dirname(path)
        try:
            if directory and not os.path.isdir(directory):
                os.makedirs(directory)
            with open(path, "wb") as fh:
                fh.write(payload)
        except OSError as e:
            raise GridIOError(f"cannot write {path}: {e.strerror or e}") from e
        logger.debug(f"wrote {len(payload)} bytes to {path}")
