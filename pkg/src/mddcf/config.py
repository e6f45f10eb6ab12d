"""System configuration for the MDD cell-free network simulator.

Defaults reproduce the reference simulation setup: a 400 m square cell,
24 APs with 8 antennas, 6 single-antenna MSs, 4 DL + 2 UL subcarriers,
40/30 dBm power budgets, -94 dBm noise and the residual SI/IAI/IMI levels
of the MDD receiver chain.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    """Scalar system parameters of one MDD cell-free network."""

    L: int = 24                 # number of APs
    D: int = 6                  # number of MSs
    N: int = 8                  # antennas per AP
    M: int = 4                  # DL subcarriers
    Mbar: int = 2               # UL subcarriers
    S_D: float = 400.0          # square side length [m]
    P_l: float = dbm_to_watt(40.0)   # per-AP power budget [W]
    P_d: float = dbm_to_watt(30.0)   # per-MS power budget [W]
    chi_dl: float = 0.5         # DL QoS threshold [nats/s/Hz]
    chi_ul: float = 0.1         # UL QoS threshold [nats/s/Hz]
    sigma2: float = dbm_to_watt(-94.0)  # noise power [W]
    U: int = 4                  # multipath taps
    xi_si_ap: float = db_to_linear(-120.0)  # residual SI level at APs
    xi_si_ms: float = db_to_linear(-110.0)  # residual SI level at MSs
    xi_iai: float = db_to_linear(-72.0)     # residual inter-AP interference level
    xi_imi: float = db_to_linear(-42.0)     # residual inter-MS interference level
    sigma_sh: float = 4.0       # shadowing standard deviation [dB]

    @property
    def M_sum(self) -> int:
        return self.M + self.Mbar

    def validate(self) -> "NetworkConfig":
        for name in ("L", "D", "N", "M", "Mbar", "U"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("P_l", "P_d", "sigma2"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("xi_si_ap", "xi_si_ms", "xi_iai", "xi_imi"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.S_D < 0.0:
            raise ValueError(f"S_D must be >= 0, got {self.S_D}")
        if self.chi_dl < 0.0 or self.chi_ul < 0.0:
            raise ValueError("QoS thresholds must be >= 0")
        if self.U > self.M_sum:
            raise ValueError(f"U={self.U} exceeds the subcarrier count M_sum={self.M_sum}")
        return self

    def require_zf(self) -> "NetworkConfig":
        # full multiuser interference suppression needs at least as many antennas as MSs
        if self.N < self.D:
            raise ValueError(f"ZF beamforming requires N >= D, got N={self.N}, D={self.D}")
        return self


_INT_FIELDS = {"L", "D", "N", "M", "Mbar", "U"}


def parse_config_text(text: str) -> dict:
    """Parse key=value lines (``#`` comments allowed) into NetworkConfig kwargs."""
    known = {f.name for f in fields(NetworkConfig)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown parameter {key!r}")
        out[key] = int(value) if key in _INT_FIELDS else float(value)
    return out


def load_config(path: str, **overrides) -> NetworkConfig:
    """Build a validated NetworkConfig from a key=value file plus overrides."""
    with open(path, "r", encoding="utf-8") as fh:
        kwargs = parse_config_text(fh.read())
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return NetworkConfig(**kwargs).validate()


def with_overrides(config: NetworkConfig, **overrides) -> NetworkConfig:
    return replace(config, **{k: v for k, v in overrides.items() if v is not None}).validate()
