"""Key/value configuration file (`minihouse.toml`-style).

Plain `key = value` lines with `#` comments; optional `[section]` headers
prefix keys as `section.key`. Values parse as int, float, bool, or str
(quotes optional). Only a flat mapping — no nesting beyond sections.
"""

from pathlib import Path

DEFAULT_NAME = "minihouse.toml"


def _parse_value(raw):
    raw = raw.strip()
    if raw.startswith(("'", '"')) and raw.endswith(raw[0]) and len(raw) >= 2:
        return raw[1:-1]
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def load_config(path):
    """Parse a config file into a flat {key: value} dict."""
    out = {}
    section = ""
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if section:
            key = f"{section}.{key}"
        out[key] = _parse_value(value)
    return out


def find_config(root, explicit=None):
    """Resolve the config mapping for a workspace (empty when absent)."""
    if explicit:
        return load_config(explicit)
    candidate = Path(root) / DEFAULT_NAME
    if candidate.is_file():
        return load_config(candidate)
    return {}
