"""Network scenarios: shape, channel variances and power budgeting."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import InvalidConfig
from .threshold import BPSK, ModulationSpec
from .units import db_to_linear

POWER_MODES = ("total", "individual")


@dataclass(frozen=True)
class Scenario:
    """Relay network under test.

    ``power_mode="total"`` splits the energy budget E over the N_c + 1
    transmitting nodes; ``"individual"`` splits it over all N + 1 nodes.
    """

    n: int = 3
    n_c: int = 1
    omega_0: float = 1.0
    omega_sr: float = 1.0
    omega_rd: float = 1.0
    power_mode: str = "total"
    spec: ModulationSpec = field(default=BPSK)

    def __post_init__(self):
        if self.n < 0 or int(self.n) != self.n:
            raise InvalidConfig("relay count n must be a nonnegative integer")
        if not 0 <= self.n_c <= self.n:
            raise InvalidConfig(f"n_c={self.n_c} must lie in [0, n={self.n}]")
        if min(self.omega_0, self.omega_sr, self.omega_rd) <= 0:
            raise InvalidConfig("channel variances must be positive")
        if self.power_mode not in POWER_MODES:
            raise InvalidConfig(f"power_mode must be one of {POWER_MODES}")

    def with_(self, **changes) -> "Scenario":
        try:
            return replace(self, **changes)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from None

    def node_snr(self, snr_db: float) -> float:
        """Per-node transmit SNR E_s/N0 = E_r/N0 for a total budget of ``snr_db``."""
        nodes = self.n_c + 1 if self.power_mode == "total" else self.n + 1
        return db_to_linear(snr_db) / nodes

    def link_means(self, snr_db: float) -> tuple[float, float, float]:
        """Mean SNRs of the direct, source-relay and relay-destination links."""
        g = self.node_snr(snr_db)
        return g * self.omega_0, g * self.omega_sr, g * self.omega_rd


def named_scenario(name: str, **overrides) -> Scenario:
    """Scenarios ``case1``..``case3``; ``case0`` is the MIMO example and lives in :mod:`schcn.mimo`."""
    table = {
        "case1": dict(n=3, omega_0=1.0, omega_sr=1.0, omega_rd=1.0),
        "case2": dict(n=3, omega_0=1.0, omega_sr=16.0, omega_rd=1.0),
        "case3": dict(n=3, omega_0=1.0, omega_sr=1.0 / 16.0, omega_rd=1.0),
    }
    if name not in table:
        raise InvalidConfig(f"unknown scenario {name!r}; expected one of {sorted(table)}")
    params = {**table[name], **overrides}
    return Scenario(**params)


_FILE_KEYS = {
    "n": int, "n_c": int, "omega_0": float, "omega_sr": float, "omega_rd": float,
    "power_mode": str, "c": float, "L": int,
}


def load_scenario(path: str | Path) -> Scenario:
    """Read a flat ``key = value`` scenario file (an INI ``[scenario]`` section).

    The section header is optional. Unknown keys are rejected.
    """
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[scenario]\n" + text
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise InvalidConfig(f"{path}: {exc}") from None
    if "scenario" not in parser:
        raise InvalidConfig(f"{path}: missing [scenario] section")
    raw = dict(parser["scenario"])
    unknown = set(raw) - set(_FILE_KEYS)
    if unknown:
        raise InvalidConfig(f"{path}: unknown keys {sorted(unknown)}")
    try:
        values = {k: _FILE_KEYS[k](v) for k, v in raw.items()}
    except ValueError as exc:
        raise InvalidConfig(f"{path}: {exc}") from None
    spec = ModulationSpec(values.pop("c", 2.0), values.pop("L", 100))
    return Scenario(spec=spec, **values)


def dump_scenario(scenario: Scenario) -> str:
    lines = ["[scenario]"]
    for key in ("n", "n_c", "omega_0", "omega_sr", "omega_rd", "power_mode"):
        lines.append(f"{key} = {getattr(scenario, key)!r}".replace("'", ""))
    lines.append(f"c = {scenario.spec.c!r}")
    lines.append(f"L = {scenario.spec.L}")
    return "\n".join(lines) + "\n"
