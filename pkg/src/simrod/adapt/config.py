"""Adaptation schedule, optimizer constants, and the ablation mode matrix."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..errors import ConfigError

# mode name -> (use_TG, use_DMX, use_GA, use_FT); mirrors the ablation rows
MODES = {
    "source": (False, False, False, False),
    "bn-adapt": (False, False, True, False),
    "bn-dmx": (False, True, True, False),
    "self": (False, True, True, True),
    "no-ga": (True, True, False, True),
    "teacher": (True, True, True, True),
}


@dataclass(frozen=True)
class AdaptConfig:
    """Schedule (w, T, N, B), optimizer constants, and mode flags.

    ``w`` defaults to max(1, T // 5): Phase 1 just has to be long enough for
    the BN statistics to settle.
    """

    T: int = 10
    N: int = 20
    B: int = 8
    w: int | None = None
    lr: float = 1e-3
    momentum: float = 0.937
    weight_decay: float = 5e-4
    use_TG: bool = True
    use_DMX: bool = True
    use_GA: bool = True
    use_FT: bool = True
    conf_threshold: float = 0.4
    min_visible: float = 0.25
    val_fraction: float = 0.1
    lr_warmup_frac: float = 0.1
    lr_final_scale: float = 0.05
    rng_seed: int = 0

    def __post_init__(self):
        if self.T < 0 or self.N < 1 or self.B < 1:
            raise ConfigError(f"bad schedule T={self.T} N={self.N} B={self.B}")
        if self.w is None:
            object.__setattr__(self, "w", min(max(1, self.T // 5),
                                              max(self.T - 1, 0)))
        if self.use_GA and self.T > 0 and not 0 <= self.w < self.T:
            raise ConfigError(f"need 0 <= w < T, got w={self.w} T={self.T}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0,1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(f"negative weight_decay {self.weight_decay}")
        if not 0.0 <= self.conf_threshold <= 1.0:
            raise ConfigError(f"conf_threshold outside [0,1]: {self.conf_threshold}")

    @property
    def mode(self) -> str:
        return flags_to_mode(self.use_TG, self.use_DMX, self.use_GA, self.use_FT)

    def with_mode(self, mode: str) -> "AdaptConfig":
        if mode not in MODES:
            raise ConfigError(
                f"unknown mode {mode!r}; valid: {', '.join(sorted(MODES))}")
        tg, dmx, ga, ft = MODES[mode]
        return replace(self, use_TG=tg, use_DMX=dmx, use_GA=ga, use_FT=ft)


def flags_to_mode(use_TG: bool, use_DMX: bool, use_GA: bool, use_FT: bool) -> str:
    flags = (use_TG, use_DMX, use_GA, use_FT)
    for name, combo in MODES.items():
        if combo == flags:
            return name
    rows = ", ".join(f"{name}={combo}" for name, combo in MODES.items())
    raise ConfigError(f"unsupported flag combination {flags}; valid rows: {rows}")
