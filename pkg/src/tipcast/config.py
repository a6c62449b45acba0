"""Flat key-value run-configuration files.

One option per line, `key = value`, with the value in JSON so numbers,
strings, lists, booleans and null round-trip unambiguously:

    command = "analyze"
    plan.d = 1000
    rc.spectral_radius = 0.9
    kinds = "DEJ,MLE"

Dots in a key express nesting when the consumer wants a tree; parsing
keeps keys flat and `unflatten` rebuilds the tree on demand.  Blank
lines and lines starting with '#' are ignored.  A value that is not
valid JSON is kept as its raw string, so hand-edited bare words still
load.  Dumps are sorted by key, making the file deterministic for a
given configuration.
"""

import json

from .errors import ConfigError


def flatten(tree: dict, prefix: str = "") -> dict:
    """Nested dicts to a single level with dotted keys."""
    flat: dict = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def unflatten(flat: dict) -> dict:
    tree: dict = {}
    for key, value in flat.items():
        node = tree
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"key {key!r} descends through a non-dict value")
        node[parts[-1]] = value
    return tree


def dumps_config(options: dict) -> str:
    flat = flatten(options)
    lines = []
    for key in sorted(flat):
        value = flat[key]
        if isinstance(value, tuple):
            value = list(value)
        lines.append(f"{key} = {json.dumps(value)}")
    return "\n".join(lines) + "\n"


def loads_config(text: str) -> dict:
    flat: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value_text = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        value_text = value_text.strip()
        try:
            flat[key] = json.loads(value_text)
        except json.JSONDecodeError:
            flat[key] = value_text
    return flat


def read_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read())


def write_config(path: str, options: dict) -> None:
    from .ioutil import atomic_write_text

    atomic_write_text(path, dumps_config(options))
