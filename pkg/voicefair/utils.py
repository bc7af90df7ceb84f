__all__ = (
    "simplify",
    "lru_cache",
    "mix_seed",
    "make_rng",
    "format_rows",
    "parse_rows",
    "sha256_text",
    "write_atomic",
)

import csv
import functools
import hashlib
import io
import os
import re
import tempfile
import unicodedata
from copy import deepcopy
from pathlib import Path
from typing import Any
from typing import Callable
from typing import Iterable
from typing import Sequence
from typing import Type
from typing import Union

import numpy

from voicefair import cfg

_MASK64 = 0xFFFFFFFFFFFFFFFF


def simplify(object_: Any) -> str:
    """
    Lowercase ASCII slug of the given object, used to name files after identifiers
    like ``ENGLISH-SPANISH TRAIN 1``.

    Accents are dropped, whitespace and slashes become ``-``, brackets are removed.

    References:
        - [1] inspired from Django Software Foundation ``slugify()``
    """
    value = unicodedata.normalize("NFKD", str(object_)).encode("ascii", "ignore")
    value = value.decode("ascii").lower()
    value = re.sub(r"[\s\\/'\"]+", "-", value)
    value = re.sub(r"[()\[\]{}]", "", value)
    value = re.sub(r"-{2,}", "-", value)
    return value.strip("-")


def typabledecorator(decorator: Callable) -> Callable:
    """
    Keep type hints and completion working on decorator factories.
    """
    return decorator


@typabledecorator
def lru_cache(maxsize: int = 128, typed: bool = False, copy: bool = False):
    """
    ``functools.lru_cache`` that can hand out a deep copy of the cached result, for
    cached arrays callers are free to modify.

    Args:
        maxsize: cache size, None for an unbounded cache
        typed: cache arguments of different types separately
        copy: if True return a deepcopy of the cached object
    """
    if not copy:
        return functools.lru_cache(maxsize, typed)

    def decorator(func):
        cached_func = functools.lru_cache(maxsize, typed)(func)

        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            return deepcopy(cached_func(*args, **kwargs))

        return wrapper

    return decorator


def _splitmix64(value: int) -> int:
    value = (value + 0x9E3779B97F4A7C15) & _MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & _MASK64
    return value ^ (value >> 31)


def _component_to_int(component: Any) -> int:
    if hasattr(component, "value") and not isinstance(component, (int, str)):
        # enum members
        component = component.value
    if isinstance(component, int):
        return component & _MASK64
    digest = hashlib.sha256(str(component).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def mix_seed(seed: int, *components: Union[int, str, Any]) -> int:
    """
    Derive a 64-bit seed from a master seed and an arbitrary path of components.

    SplitMix64 finalizer chained over each component. Integers are used as is, any
    other object through the first 8 bytes of the SHA-256 of its string form.

    Example::

        >>> fold_seed = mix_seed(1234, 2)
        >>> speaker_seed = mix_seed(1234, "same_age", "id00042")

    Args:
        seed: master seed, any integer (reduced modulo 2**64)
        components: ordered components identifying the consumer of the seed

    Returns:
        unsigned 64-bit integer
    """
    state = _splitmix64(seed & _MASK64)
    for component in components:
        state = _splitmix64(state ^ _component_to_int(component))
    return state


def make_rng(seed: int) -> numpy.random.Generator:
    """
    Return the numpy generator used by every sampling step of the toolkit.
    """
    return numpy.random.default_rng(seed & _MASK64)


def format_rows(
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    delimiter: str = cfg.delimiter,
) -> str:
    """
    Serialize the given rows as delimiter-separated text with a header row.

    Line endings are always ``\\n`` so the output is byte-stable across platforms.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter=delimiter, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def parse_rows(
    text: str,
    required: Sequence[str],
    error_type: Type[Exception],
    delimiter: str = cfg.delimiter,
    source: str = "<text>",
) -> list[tuple[int, dict[str, str]]]:
    """
    Parse delimiter-separated text with a header row.

    Args:
        text: content to parse
        required: column names that must be present in the header
        error_type: exception class raised on a missing column
        delimiter: column delimiter
        source: name used in error messages

    Returns:
        list of (line number, row as dict) for every non-empty data row.
        Line numbers are 1-based and count the header as line 1.
    """
    reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
    fieldnames = [name.strip() for name in (reader.fieldnames or [])]
    reader.fieldnames = fieldnames

    for column in required:
        if column not in fieldnames:
            raise error_type(f"{source}: missing required column '{column}'")

    rows = []
    for row in reader:
        if not any(isinstance(value, str) and value.strip() for value in row.values()):
            continue
        rows.append((reader.line_num, row))
    return rows


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_atomic(path: Path, content: Union[str, bytes]) -> Path:
    """
    Write the given content to a temporary sibling file then rename it over ``path``.

    Readers never observe a partially written artifact.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = content.encode("utf-8") if isinstance(content, str) else content

    file_descriptor, temp_path = tempfile.mkstemp(
        prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent)
    )
    try:
        with os.fdopen(file_descriptor, "wb") as temp_file:
            temp_file.write(data)
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise
    return path
