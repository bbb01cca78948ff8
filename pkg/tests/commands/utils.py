import io
import json
import logging
import pprint

from pydantic import ConfigDict, PydanticUserError, TypeAdapter

from conftest import dynamics_spec
from vbcdhmm.cli import main
from vbcdhmm.data import generate, save_dataset


def validate(t: type, value: any):
    config = ConfigDict(strict=True, extra="forbid")

    class TWithConfig(t):
        __pydantic_config__ = config

    print("value")
    pprint.PrettyPrinter(indent=2).pprint(value)
    try:
        # In case `t` is a `TypedDict`
        return TypeAdapter(TWithConfig).validate_python(value)
    except PydanticUserError as exc_info:
        # In case `t` is a composition of `TypedDict`, like `list[TypedDict]`
        if exc_info.code == "schema-for-unknown-type":
            return TypeAdapter(t, config=config).validate_python(value)
        else:
            raise exc_info


def run_cli(*argv):
    """Run the tool in-process; returns the exit code and what it printed."""
    out = io.StringIO()
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    try:
        code = main([str(arg) for arg in argv], out=out)
    finally:
        root.handlers[:] = handlers
        root.setLevel(level)
    return code, out.getvalue()


def run_json(*argv):
    code, text = run_cli(*argv, "--json")
    assert code == 0
    return json.loads(text)


def write_lag_dataset(path, seed, count=6, n_frames=40):
    """Labeled sequences from a lag-1 class and a lag-2 class."""
    records = []
    for label, lag in (("lag1", 1), ("lag2", 2)):
        generated, _ = generate(
            dynamics_spec(lag),
            n_frames,
            count,
            seed + lag,
            label=label,
            id_prefix=label,
        )
        records.extend(generated)
    save_dataset(path, records)
    return path
