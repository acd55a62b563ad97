"""ANSI terminal formatting utilities for dav."""

import os
import sys

import numpy as np

# Verdict icons
ICONS = {
    "ok": "✅",
    "fail": "❌",
    "warn": "⚠️",
    "stable": "🟢",
    "unstable": "🔴",
}

# ANSI colors
RESET = "\033[0m"
BOLD = "\033[1m"
DIM = "\033[2m"
GREEN = "\033[32m"
YELLOW = "\033[33m"
CYAN = "\033[36m"


def _use_color() -> bool:
    """Determine if color output should be used.

    Follows the NO_COLOR standard (https://no-color.org/):
    - NO_COLOR env var (any value) disables color
    - FORCE_COLOR env var (any value) forces color even in pipes
    - Otherwise, color is enabled only if stdout is a TTY
    """
    if os.environ.get("NO_COLOR"):
        return False
    if os.environ.get("FORCE_COLOR"):
        return True
    return sys.stdout.isatty()


def bold(text: str) -> str:
    """Apply bold ANSI formatting to text."""
    if not _use_color():
        return text
    return f"{BOLD}{text}{RESET}"


def dim(text: str) -> str:
    """Apply dim ANSI formatting to text."""
    if not _use_color():
        return text
    return f"{DIM}{text}{RESET}"


def green(text: str) -> str:
    """Apply green ANSI color to text."""
    if not _use_color():
        return text
    return f"{GREEN}{text}{RESET}"


def yellow(text: str) -> str:
    """Apply yellow ANSI color to text."""
    if not _use_color():
        return text
    return f"{YELLOW}{text}{RESET}"


def bold_cyan(text: str) -> str:
    """Apply bold cyan ANSI formatting to text."""
    if not _use_color():
        return text
    return f"{BOLD}{CYAN}{text}{RESET}"


def fmt_num(value: float, digits: int = 6) -> str:
    """Compact significant-digit form; inf and nan pass through."""
    return f"{value:.{digits}g}"


def fmt_complex(value: complex, digits: int = 6) -> str:
    """a+bi with ``digits`` significant digits per part."""
    sign = "-" if value.imag < 0 else "+"
    return f"{value.real:.{digits}g}{sign}{abs(value.imag):.{digits}g}i"


def fmt_poly(coefficients: np.ndarray, variable: str = "h", digits: int = 5) -> str:
    """Ascending coefficients as a readable polynomial, zero terms dropped."""
    terms = []
    for power, coef in enumerate(np.asarray(coefficients, dtype=float)):
        if coef == 0:
            continue
        monomial = "" if power == 0 else variable if power == 1 else f"{variable}^{power}"
        magnitude = f"{abs(coef):.{digits}g}"
        body = f"{magnitude}{monomial}" if monomial and magnitude != "1" else monomial or magnitude
        terms.append(("-" if coef < 0 else "+", body))
    if not terms:
        return "0"
    head_sign, head = terms[0]
    text = f"-{head}" if head_sign == "-" else head
    return text + "".join(f" {sign} {body}" for sign, body in terms[1:])


def verdict(ok: bool, text: str) -> str:
    """Icon plus colored text for a pass/fail line."""
    return f"{ICONS['ok']} {green(text)}" if ok else f"{ICONS['fail']} {yellow(text)}"
