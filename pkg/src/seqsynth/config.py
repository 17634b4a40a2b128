"""Line-oriented ``key = value`` configuration for the loop and CLI.

'#' starts a comment; keys mirror LoopConfig fields plus a few
path-valued extras.  Every key has a default, and --help on the CLI
prints the full registry.
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

from .synth import LoopConfig


class ConfigError(Exception):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_tuple(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


# key -> (default, parser, help)
EXTRA_KEYS = {
    "corpus": ("", str, "path to a stripped-format corpus file"),
    "out_dir": ("runs", str, "directory for per-iteration outputs"),
    "iterations": (1, int, "number of loop iterations"),
    "max_terms": (0, int, "cap on ingested terms per sequence; 0 keeps all"),
}


def registry() -> dict[str, tuple[object, object, str]]:
    base = LoopConfig()
    reg: dict[str, tuple[object, object, str]] = {}
    helps = {
        "seed": "master random seed; everything derives from it",
        "jobs": "worker processes for checking",
        "random_count": "generation-0 candidate count",
        "random_max_size": "generation-0 size cap in tokens",
        "check_mode": "fast | slow | hybrid",
        "check_mode_switch_iteration": "iteration to switch modes at; -1 never",
        "check_mode_late": "mode used from the switch iteration on",
        "fast_t_call": "fast-check abstract time units per term",
        "fast_n_compr": "fast-check comprehension limit",
        "slow_t_call": "slow-check abstract time units per term",
        "slow_n_compr": "slow-check comprehension limit",
        "min_promote_depth": "hybrid: minimum prefix depth promoted to slow",
        "beam_width": "beam width per sequence",
        "beam_max_len": "maximum decoded program length",
        "per_sequence_cap": "candidate cap per sequence",
        "ngram_order": "guidance n-gram order",
        "ngram_smoothing": "guidance smoothing mass",
        "models": "portfolio: comma list of full,half,quarter",
        "continuous": "models that keep their counts across iterations",
        "pairs_per_solution": "1 trains on smallest only, 2 on both champions",
        "src_max_tokens": "source rendering cap in tokens",
        "macro_mode": "none | global | local",
        "macro_budget": "global macros appended per iteration",
        "macro_min_len": "shortest mined macro",
        "macro_max_len": "longest mined macro",
        "macro_min_count": "occurrence floor for mined macros",
        "external_model_cmd": "subprocess template: {train_src} {train_tgt} {src} {out} {iteration}",
    }
    for f in fields(LoopConfig):
        default = getattr(base, f.name)
        if isinstance(default, tuple):
            parser = _parse_tuple
        elif isinstance(default, bool):
            parser = _parse_bool
        elif isinstance(default, int):
            parser = int
        elif isinstance(default, float):
            parser = float
        else:
            parser = str
        reg[f.name] = (default, parser, helps.get(f.name, ""))
    for key, (default, parser, help_text) in EXTRA_KEYS.items():
        reg[key] = (default, parser, help_text)
    return reg


def parse_config_file(path) -> dict:
    reg = registry()
    values = {key: default for key, (default, _, _) in reg.items()}
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in reg:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            _, parser, _ = reg[key]
            try:
                values[key] = parser(value)
            except (ValueError, ConfigError) as err:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {err}") from err
    return values


def loop_config_from(values: dict) -> LoopConfig:
    kwargs = {f.name: values[f.name] for f in fields(LoopConfig) if f.name in values}
    return LoopConfig(**kwargs)


def describe_defaults() -> str:
    lines = ["configuration keys (key = default):"]
    for key, (default, _, help_text) in sorted(registry().items()):
        shown = ",".join(default) if isinstance(default, tuple) else default
        lines.append(f"  {key} = {shown!r}" + (f"  # {help_text}" if help_text else ""))
    return "\n".join(lines)
