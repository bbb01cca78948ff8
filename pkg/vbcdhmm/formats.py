from __future__ import annotations

import json
import os
from typing import Any, Callable, Dict, Generic, Iterator, List, Tuple, TypeVar, Union

import ndjson  # type: ignore
import numpy as np

from . import utils
from .exceptions import DatasetError, ValidationError

T = TypeVar("T")

PathLike = Union[str, "os.PathLike[str]"]


class FormatHandler(Generic[T]):
    """Read and write files of a particular format.

    Subclasses override :meth:`parse`, :meth:`parse_stream` and :meth:`write`.
    """

    def handle(
        self,
        path: PathLike,
        is_stream: bool = False,
        converter: Callable[[Any], Any] = utils.noop,
    ) -> Any:
        """Read a file and apply a converter to its data.

        :param path: file to read
        :param bool is_stream: ``True`` to iterate over the file's items lazily
        :param func converter: function to handle field conversions
        :return: either all file data or an iterator over its items
        """
        if is_stream:
            return map(converter, iter(self.parse_stream(path)))
        return converter(self.parse(path))

    def parse(self, path: PathLike) -> T:
        raise NotImplementedError

    def parse_stream(self, path: PathLike) -> Iterator[Any]:
        raise NotImplementedError

    def write(self, path: PathLike, data: T) -> None:
        raise NotImplementedError


class JsonHandler(FormatHandler[Dict[str, Any]]):
    """A single JSON document.

    Floats are written with :func:`repr` precision, so every value survives a
    write/parse round-trip bit-exactly.
    """

    def parse(self, path: PathLike) -> Dict[str, Any]:
        with open(path, encoding="utf-8") as f:
            try:
                return json.load(f)
            except json.JSONDecodeError as e:
                raise ValidationError(f"{path}: invalid JSON: {e}") from e

    def parse_stream(self, path: PathLike) -> Iterator[Dict[str, Any]]:
        yield self.parse(path)

    def write(self, path: PathLike, data: Dict[str, Any]) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps(data, indent=2, allow_nan=False))
            f.write("\n")


class JsonLinesHandler(FormatHandler[List[Dict[str, Any]]]):
    """One JSON object per line; blank lines are skipped."""

    def parse(self, path: PathLike) -> List[Dict[str, Any]]:
        return [obj for _, obj in self.parse_stream(path)]

    def parse_stream(self, path: PathLike) -> Iterator[Tuple[int, Dict[str, Any]]]:
        """Yield ``(line_number, object)`` pairs with 1-based line numbers.

        :raises vbcdhmm.exceptions.DatasetError: on a line that is not a JSON object
        """
        with open(path, encoding="utf-8") as f:
            for number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DatasetError(f"invalid JSON: {e.msg}", line=number) from e
                if not isinstance(obj, dict):
                    raise DatasetError("expected a JSON object", line=number)
                yield number, obj

    def write(self, path: PathLike, data: List[Dict[str, Any]]) -> None:
        with open(path, "w", encoding="utf-8") as f:
            if data:
                f.write(ndjson.dumps(data, allow_nan=False))
                f.write("\n")


class PgmHandler(FormatHandler[np.ndarray]):
    """Plain (``P2``) grayscale images with a maximum value of 255."""

    def parse(self, path: PathLike) -> np.ndarray:
        with open(path, encoding="ascii") as f:
            tokens = [
                token
                for line in f
                for token in line.split("#", 1)[0].split()
            ]
        if not tokens or tokens[0] != "P2":
            raise ValidationError(f"{path}: not a plain PGM file")
        width, height, _ = (int(v) for v in tokens[1:4])
        pixels = np.array([int(v) for v in tokens[4:]], dtype=np.uint8)
        return pixels.reshape(height, width)

    def parse_stream(self, path: PathLike) -> Iterator[np.ndarray]:
        yield from self.parse(path)

    def write(self, path: PathLike, data: np.ndarray) -> None:
        image = np.asarray(data)
        if image.ndim != 2:
            raise ValidationError("a PGM image must be two-dimensional")
        lines = ["P2", f"{image.shape[1]} {image.shape[0]}", "255"]
        lines += [" ".join(str(int(v)) for v in row) for row in image]
        with open(path, "w", encoding="ascii") as f:
            f.write("\n".join(lines))
            f.write("\n")


#: Handles single JSON documents (model and bank files, reports, generator specs)
JSON = JsonHandler()

#: Handles JSON Lines (datasets and latent traces)
JSONL = JsonLinesHandler()

#: Handles plain PGM images
PGM = PgmHandler()
