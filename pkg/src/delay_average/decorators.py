"""Decorators for command functions."""

import argparse
import sys
from collections.abc import Callable
from functools import wraps
from pathlib import Path
from typing import Concatenate

from delay_average.errors import ConfigError, DelayAverageError
from delay_average.io import load_config


def require_config[**P, R](
    func: Callable[Concatenate[dict, argparse.Namespace, P], R],
) -> Callable[Concatenate[argparse.Namespace, P], R]:
    """Decorator to load the experiment config from args.config and inject it as first argument.

    The config is validated against the bundled schema and ``--seed`` replaces its seed,
    so the command sees exactly what its artifacts are stamped with.

    Args:
        func: Command function that takes (config: dict, args: Namespace, ...) -> R

    Returns:
        Wrapped function that takes (args: Namespace, ...) -> R

    Example::

        @require_config
        def cmd_average(config: dict, args: argparse.Namespace) -> None:
            model = build_model(config)
            ...
    """

    @wraps(func)
    def wrapper(args: argparse.Namespace, /, *inner_args: P.args, **inner_kwargs: P.kwargs) -> R:
        try:
            if args.config is None:
                msg = "--config is required"
                raise ConfigError(msg)
            config = load_config(Path(args.config))
        except DelayAverageError as e:
            print(f"Error: {e}", file=sys.stderr)
            sys.exit(e.exit_code)

        seed = getattr(args, "seed", None)
        if seed is not None:
            config = {**config, "seed": seed}

        return func(config, args, *inner_args, **inner_kwargs)

    return wrapper
