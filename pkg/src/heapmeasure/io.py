import csv
import sys
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

from .errors import InvalidModelError, ModelFileNotFoundError, ModelSyntaxError
from .formats import COMMENT, DIRECTIVES, INDEPENDENT, PIECES, UNIFORM, WEIGHT
from .mobius_measure import BernoulliSpec, uniform_spec, validate
from .trace_core import IndependencePair


def parse_model_text(
    text: str,
    path: str = "<model>",
    strict: bool = True,
) -> Tuple[IndependencePair, BernoulliSpec]:
    """
    Parse the text of a model file.

    Args:
        text (str): Model source, one directive per line.
        path (str): Name used in diagnostics.
        strict (bool): If True, a spec that fails the Bernoulli conditions raises.
                       If False, it is returned with its violations listed.

    Returns:
        Tuple[IndependencePair, BernoulliSpec]: The monoid and its weights.

    Raises:
        ModelSyntaxError: On a malformed line, with its line number.
        InvalidModelError: On a semantically invalid model.
    """
    pieces: Optional[List[str]] = None
    pairs: List[Tuple[str, str]] = []
    weights: Dict[str, float] = {}
    uniform_line: Optional[int] = None

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(COMMENT, 1)[0].strip()
        if not line:
            continue
        directive, *args = line.split()

        def fail(reason: str) -> ModelSyntaxError:
            return ModelSyntaxError(path, number, reason)

        if directive not in DIRECTIVES:
            raise fail(f"unknown directive {directive!r}")
        if directive == PIECES:
            if pieces is not None:
                raise fail("pieces declared twice")
            if not args:
                raise fail("no pieces declared")
            seen = set()
            for a in args:
                if a in seen:
                    raise fail(f"duplicate piece {a!r}")
                seen.add(a)
            pieces = list(args)
            continue
        if pieces is None:
            raise fail(f"{directive!r} before the pieces declaration")
        if directive == INDEPENDENT:
            if len(args) != 2:
                raise fail(f"expected '{INDEPENDENT} <id> <id>'")
            for a in args:
                if a not in pieces:
                    raise fail(f"unknown piece {a!r}")
            if args[0] == args[1]:
                raise fail(f"piece {args[0]!r} cannot be independent of itself")
            pairs.append((args[0], args[1]))
        elif directive == WEIGHT:
            if len(args) != 2:
                raise fail(f"expected '{WEIGHT} <id> <real>'")
            piece, value = args
            if piece not in pieces:
                raise fail(f"unknown piece {piece!r}")
            if piece in weights:
                raise fail(f"weight of {piece!r} given twice")
            try:
                weights[piece] = float(value)
            except ValueError:
                raise fail(f"weight {value!r} is not a real number") from None
        elif directive == UNIFORM:
            if args:
                raise fail(f"'{UNIFORM}' takes no arguments")
            uniform_line = number

    if pieces is None:
        raise InvalidModelError([f"{path}: no '{PIECES}' declaration"])
    if uniform_line is not None and weights:
        raise InvalidModelError([f"{path}:{uniform_line}: '{UNIFORM}' cannot be mixed with explicit weights"])
    if uniform_line is None and not weights:
        raise InvalidModelError([f"{path}: neither weights nor '{UNIFORM}' given"])

    ip = IndependencePair.from_pairs(pieces, pairs)
    spec = uniform_spec(ip) if uniform_line is not None else validate(ip, weights)
    if strict and not spec.valid:
        raise InvalidModelError(spec.violations)
    return ip, spec


def parse_model(path: Union[str, Path], strict: bool = True) -> Tuple[IndependencePair, BernoulliSpec]:
    """
    Read and parse a model file (UTF-8, line oriented, `#` comments).

    Raises:
        ModelFileNotFoundError: If `path` does not exist.
        ModelSyntaxError: On a malformed line or bytes that are not UTF-8.
        InvalidModelError: On a semantically invalid model.
    """
    p = Path(path)
    if not p.is_file():
        raise ModelFileNotFoundError(str(p))
    data = p.read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        line = data[: e.start].count(b"\n") + 1
        raise ModelSyntaxError(str(p), line, f"not valid UTF-8 (byte {data[e.start]:#04x})") from None
    return parse_model_text(text, str(p), strict)


def write_csv(
    header: Sequence[str],
    rows: Iterable[Sequence[object]],
    out: Optional[TextIO] = None,
) -> None:
    """Write a header row and data rows; rows are written exactly as given."""
    writer = csv.writer(out or sys.stdout, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
