"""Accelerator configuration parameters and the cost-model calibration record.

Config files are key=value text using the canonical parameter names
(FREQ, APACK, PPACK, ICP, OCP, PE_DSP, FILTER_MAX, WINxCHIN_PAD_MAX,
FILTERxFILTERxCHIN_MAX, CHOUTxFILTERxFILTERxCHIN_MAX, CHOUT_MAX,
PWINxPCH_MAX, PCH_MAX).  Calibration files use the same syntax with the
Calibration field names.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ParseError

CONFIG_KEYS = {
    "FREQ": "freq_mhz",
    "APACK": "apack",
    "PPACK": "ppack",
    "ICP": "icp",
    "OCP": "ocp",
    "PE_DSP": "pe_dsp",
    "FILTER_MAX": "filter_max",
    "WINxCHIN_PAD_MAX": "win_x_chin_pad_max",
    "FILTERxFILTERxCHIN_MAX": "filter_x_filter_x_chin_max",
    "CHOUTxFILTERxFILTERxCHIN_MAX": "chout_x_filter_x_filter_x_chin_max",
    "CHOUT_MAX": "chout_max",
    "PWINxPCH_MAX": "pwin_x_pch_max",
    "PCH_MAX": "pch_max",
}
FIELD_TO_KEY = {v: k for k, v in CONFIG_KEYS.items()}


def _pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class AccelConfig:
    """One full assignment of the accelerator design parameters."""

    freq_mhz: float
    apack: int
    ppack: int
    icp: int
    ocp: int
    pe_dsp: int
    filter_max: int
    win_x_chin_pad_max: int
    filter_x_filter_x_chin_max: int
    chout_x_filter_x_filter_x_chin_max: int
    chout_max: int
    pwin_x_pch_max: int
    pch_max: int
    name: str = ""

    def __post_init__(self):
        if self.freq_mhz <= 0:
            raise ValueError(f"FREQ must be positive, got {self.freq_mhz}")
        for key in ("apack", "ppack", "icp", "ocp"):
            v = getattr(self, key)
            if not _pow2(v):
                raise ValueError(f"{FIELD_TO_KEY[key]} must be a power of two, got {v}")
        if not 0 <= self.pe_dsp <= self.ocp:
            raise ValueError(
                f"PE_DSP must lie in [0, OCP={self.ocp}], got {self.pe_dsp}"
            )
        if self.filter_max not in (1, 3):
            raise ValueError(f"FILTER_MAX must be 1 or 3, got {self.filter_max}")
        for key in (
            "win_x_chin_pad_max",
            "filter_x_filter_x_chin_max",
            "chout_x_filter_x_filter_x_chin_max",
            "chout_max",
            "pwin_x_pch_max",
            "pch_max",
        ):
            if getattr(self, key) < 1:
                raise ValueError(f"{FIELD_TO_KEY[key]} must be positive")

    @property
    def pes(self) -> int:
        """Number of processing elements (one per parallel output channel)."""
        return self.ocp

    @property
    def macs_per_cycle(self) -> int:
        return self.icp * self.ocp

    @property
    def ocm_bytes(self) -> int:
        """Total on-chip buffer bytes; double-buffered stores counted twice."""
        return (
            2 * self.filter_x_filter_x_chin_max  # window stores (double buffered)
            + 2 * self.chout_max  # output-pixel stores (double buffered)
            + self.filter_max * self.win_x_chin_pad_max  # input row store
            + self.chout_x_filter_x_filter_x_chin_max  # weight store
            + self.chout_max  # bias store
            + 2 * self.pwin_x_pch_max  # pool current/result rows
            + 2 * self.pch_max  # pool current/result pixels
        )

    def param_values(self) -> dict[str, float | int]:
        """Canonical-name -> value mapping, in fixed key order."""
        return {key: getattr(self, attr) for key, attr in CONFIG_KEYS.items()}


@dataclass(frozen=True)
class Calibration:
    """Fitted constants of the cycle/resource/power model.

    k_pipe: pipeline fill/drain cycles charged per output window.
    k_layer: one-time start cycles charged per layer execution.
    k_pool: start cycles of the pooling stage.
    c_dsp: DSP blocks used by control outside the PE array.
    p0_w: static power at 0 MHz of the power trend line.
    power_slope_w_per_100mhz: dynamic power slope.
    host_ns_per_unit: host CPU cost per elementary op (see perf module).

    Defaults were fitted against the measured reference implementations;
    scripts/fit_calibration.py reproduces them.
    """

    k_pipe: int = 12
    k_layer: int = 6800
    k_pool: int = 16
    c_dsp: int = 10
    p0_w: float = 1.892
    power_slope_w_per_100mhz: float = 0.8
    host_ns_per_unit: float = 1.376

    def __post_init__(self):
        for name in ("k_pipe", "k_layer", "k_pool", "c_dsp"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.host_ns_per_unit < 0:
            raise ValueError("host_ns_per_unit must be nonnegative")


DEFAULT_CALIBRATION = Calibration()


def _kv_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(path, line_no, f"expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            yield line_no, key, value


def load_config(path) -> AccelConfig:
    values = {}
    for line_no, key, value in _kv_lines(path):
        if key == "NAME":
            values["name"] = value
            continue
        if key not in CONFIG_KEYS:
            raise ParseError(path, line_no, f"unknown parameter {key!r}")
        attr = CONFIG_KEYS[key]
        try:
            values[attr] = float(value) if attr == "freq_mhz" else int(value)
        except ValueError:
            raise ParseError(path, line_no, f"bad value for {key}: {value!r}") from None
    missing = [FIELD_TO_KEY[a] for a in CONFIG_KEYS.values() if a not in values]
    if missing:
        raise ParseError(path, 0, f"missing parameters: {', '.join(missing)}")
    try:
        return AccelConfig(**values)
    except ValueError as exc:
        raise ParseError(path, 0, str(exc)) from None


def save_config(cfg: AccelConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if cfg.name:
            fh.write(f"NAME={cfg.name}\n")
        for key, value in cfg.param_values().items():
            fh.write(f"{key}={value:g}\n" if isinstance(value, float) else f"{key}={value}\n")


def load_calibration(path) -> Calibration:
    valid = {f.name: f.type for f in fields(Calibration)}
    values = {}
    for line_no, key, value in _kv_lines(path):
        if key not in valid:
            raise ParseError(path, line_no, f"unknown calibration field {key!r}")
        try:
            values[key] = int(value) if valid[key] == "int" else float(value)
        except ValueError:
            raise ParseError(path, line_no, f"bad value for {key}: {value!r}") from None
    try:
        return replace(DEFAULT_CALIBRATION, **values)
    except ValueError as exc:
        raise ParseError(path, 0, str(exc)) from None


def save_calibration(calib: Calibration, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in fields(Calibration):
            v = getattr(calib, f.name)
            fh.write(f"{f.name}={v:g}\n" if isinstance(v, float) else f"{f.name}={v}\n")
