# -*- coding: utf-8 -*-
import errno
import json
import logging
import os
import sys
import tempfile
import zlib
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    Iterator,
    Optional,
    Sequence,
    TypeVar,
    Union,
)

import numpy as np
import tenacity
from tenacity import after_log, retry_if_exception, stop_after_attempt, wait_exponential

from pyoffload.error import DataError, OperationalError, ProgrammingError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_logger = logging.getLogger(__name__)  # type: ignore
_T = TypeVar("_T")


def get_chunks(
    items: Sequence[_T], chunksize: Optional[int] = None
) -> Iterator[Sequence[_T]]:
    rows = len(items)
    if rows == 0:
        return
    if chunksize is None:
        chunksize = rows
    elif chunksize <= 0:
        raise ProgrammingError("Chunk size argument must be greater than zero.")

    chunks = int(rows / chunksize) + 1
    for i in range(chunks):
        start_i = i * chunksize
        end_i = min((i + 1) * chunksize, rows)
        if start_i >= end_i:
            break
        yield items[start_i:end_i]


def derive_seed(seed: int, purpose: str) -> int:
    """Fork a 64-bit sub-seed from the top-level seed.

    The sub-seed is the first 64-bit word of
    ``SeedSequence([seed, crc32(purpose)])``."""
    if seed < 0:
        raise ProgrammingError(f"Seed must be non-negative, got {seed}.")
    sequence = np.random.SeedSequence([seed, zlib.crc32(purpose.encode("utf-8"))])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


class RetryConfig(object):
    def __init__(
        self,
        exceptions: Iterable[str] = (
            "EBUSY",
            "EAGAIN",
            "ETXTBSY",
        ),
        attempt: int = 3,
        multiplier: float = 0.05,
        max_delay: float = 1,
        exponential_base: int = 2,
    ) -> None:
        self.exceptions = exceptions
        self.attempt = attempt
        self.multiplier = multiplier
        self.max_delay = max_delay
        self.exponential_base = exponential_base


def _is_retryable(config: RetryConfig, e: BaseException) -> bool:
    if not isinstance(e, OSError) or e.errno is None:
        return False
    return errno.errorcode.get(e.errno, None) in config.exceptions


def retry_file_operation(
    func: Callable[..., Any],
    config: RetryConfig,
    logger: Optional[logging.Logger] = None,
    *args,
    **kwargs,
) -> Any:
    retry = tenacity.Retrying(
        retry=retry_if_exception(lambda e: _is_retryable(config, e) if e else False),
        stop=stop_after_attempt(config.attempt),
        wait=wait_exponential(
            multiplier=config.multiplier,
            max=config.max_delay,
            exp_base=config.exponential_base,
        ),
        after=after_log(logger, logging.DEBUG) if logger else None,  # type: ignore
        reraise=True,
    )
    return retry(func, *args, **kwargs)


def atomic_write(
    path: Union[str, "os.PathLike[str]"],
    data: Union[str, bytes],
    retry_config: Optional[RetryConfig] = None,
) -> None:
    """Write to a sibling temporary file, then rename it over ``path``."""
    retry_config = retry_config if retry_config else RetryConfig()
    payload = data.encode("utf-8") if isinstance(data, str) else data
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp_path = tempfile.mkstemp(prefix=".pyoffload-", dir=directory)
    except OSError as e:
        raise OperationalError(f"Cannot write to `{path}`: {e.strerror}") from e
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
            f.flush()
            os.fsync(f.fileno())
        os.chmod(tmp_path, 0o644)
        retry_file_operation(os.replace, retry_config, _logger, tmp_path, path)
    except OSError as e:
        _logger.exception("Failed to write %s.", path)
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise OperationalError(f"Cannot write to `{path}`: {e.strerror}") from e
    _logger.info("Wrote %s (%d bytes).", path, len(payload))


def read_bytes(path: Union[str, "os.PathLike[str]"]) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise OperationalError(f"Cannot read `{path}`: {e.strerror}") from e


def load_document(path: Union[str, "os.PathLike[str]"]) -> Dict[str, Any]:
    """Load a TOML (``.toml``) or JSON (``.json``) document as a table."""
    suffix = os.path.splitext(str(path))[1].lower()
    if suffix not in (".toml", ".json"):
        raise ProgrammingError(f"Unsupported config format `{suffix}` for `{path}`.")
    raw = read_bytes(path)
    try:
        if suffix == ".toml":
            document = tomllib.loads(raw.decode("utf-8"))
        else:
            document = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as e:
        raise DataError(f"Malformed config file `{path}`: {e}") from e
    if not isinstance(document, dict):
        raise DataError(f"Config file `{path}` must hold a table at the top level.")
    return document
