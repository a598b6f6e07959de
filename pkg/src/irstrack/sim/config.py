"""Run configuration with reference-scenario defaults (SI units internally)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

from ..channel import SPEED_OF_LIGHT

SCHEMES = ("proposed", "perfect", "hierarchical", "focusing")
PREDICTORS = ("polynomial", "kalman")
IDE_KINDS = ("optimized", "quadratic", "linear")


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class RunConfig:
    # geometry (m)
    bs_position: tuple = (0.0, 0.0, 10.0)
    irs_position: tuple = (-40.0, 40.0, 5.0)
    region_center: tuple = (0.0, 40.0, 0.0)
    r1: float = 10.0
    r2: float = 5.0
    speed_kmh: float = 5.0
    # arrays
    Q: int = 40
    spacing_wl: float = 0.5
    bs_rows: int = 16
    bs_cols: int = 4
    ue_rows: int = 2
    ue_cols: int = 2
    # propagation
    carrier_hz: float = 28e9
    L_t: int = 4
    L_r: int = 4
    rice_t: float = 10.0
    rice_r: float = 10.0
    scatter_box: float = 20.0
    noise_dbm: float = -120.0
    # time blocks (s)
    T: float = 1.5
    slot: float = 1.29e-3
    T_S: float = 4.16e-6
    N_IDE: int = 5
    N_UC: int = 5
    N_CE: int = 1
    # estimation and tracking
    H: int = 10
    gamma: int = 1
    coverage: float = 3.0
    S_max: int = 3
    degree: int = 1
    predictor: str = "polynomial"
    kalman_q: float = 0.0
    kalman_r: float = 0.0
    loss_blocks: int = 2
    # codebooks
    M: int = 40
    ide_codebook: str = "optimized"
    design_msnr_db: float = 15.0
    design_snr: float = -1.0  # objective coefficient; negative means derive from design_msnr_db
    design_grid: int = 15
    design_init: str = "quadratic"
    design_step: float = 0.0  # 0 picks the step automatically
    design_decay: float = 0.995
    design_stop_tol: float = 1e-4
    design_max_iter: int = 500
    # estimation experiment
    est_trials: int = 500
    est_msnr_db: tuple = (0.0, 10.0, 20.0, 30.0)
    # hierarchical baseline
    N_HS: int = 4
    L_C: int = 2
    # campaign
    trajectory_kind: str = "linear"
    trajectories: int = 12
    seeds: int = 10
    ptx_dbm: tuple = (-10.0, 0.0, 10.0, 20.0, 30.0)
    schemes: tuple = SCHEMES
    seed: int = 0
    sample_every: int = 1
    noiseless: bool = False

    def __post_init__(self):
        for name in ("bs_position", "irs_position", "region_center"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 3:
                raise ValueError(f"{name} needs three coordinates")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "ptx_dbm", tuple(float(x) for x in self.ptx_dbm))
        object.__setattr__(self, "est_msnr_db", tuple(float(x) for x in self.est_msnr_db))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        self.validate()

    def validate(self) -> None:
        positive = ("r1", "r2", "speed_kmh", "spacing_wl", "carrier_hz", "T", "slot", "T_S", "coverage")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        counts = ("Q", "bs_rows", "bs_cols", "ue_rows", "ue_cols", "N_IDE", "N_UC", "N_CE", "S_max",
                  "M", "design_grid", "N_HS", "L_C", "trajectories", "seeds", "sample_every", "loss_blocks",
                  "design_max_iter", "est_trials")
        for name in counts:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.r2 < self.r1:
            raise ValueError(f"r2 must be smaller than r1 ({self.r2} >= {self.r1})")
        if self.H < 2:
            raise ValueError(f"H must be >= 2, got {self.H}")
        if self.gamma < 0 or self.degree < 0 or self.L_t < 0 or self.L_r < 0:
            raise ValueError("gamma, degree, L_t and L_r must be non-negative")
        if self.rice_t <= 0 or self.rice_r <= 0:
            raise ValueError("Rice factors must be positive")
        if self.kalman_q < 0 or self.kalman_r < 0:
            raise ValueError("Kalman noise variances must be non-negative")
        if self.predictor not in PREDICTORS:
            raise ValueError(f"predictor must be one of {PREDICTORS}, got {self.predictor!r}")
        if self.ide_codebook not in IDE_KINDS:
            raise ValueError(f"ide_codebook must be one of {IDE_KINDS}, got {self.ide_codebook!r}")
        if self.trajectory_kind not in ("linear", "nonlinear"):
            raise ValueError(f"unknown trajectory kind {self.trajectory_kind!r}")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ValueError(f"unknown schemes {bad}; choose from {SCHEMES}")
        if self.design_init not in ("quadratic", "linear"):
            raise ValueError(f"design_init must be 'quadratic' or 'linear', got {self.design_init!r}")
        if self.design_step < 0 or not 0 < self.design_decay <= 1 or not self.design_stop_tol > 0:
            raise ValueError("design_step must be >= 0, design_decay in (0, 1] and design_stop_tol > 0")
        if self.design_grid < 8:
            raise ValueError(f"design_grid must be >= 8, got {self.design_grid}")
        if not self.ptx_dbm:
            raise ValueError("ptx_dbm needs at least one value")
        if self.N_HS != 4:
            # wide words cover 2 x 2 narrow words
            raise ValueError(f"only N_HS = 4 is supported, got {self.N_HS}")
        if self.L_C != 2:
            raise ValueError(f"only L_C = 2 is supported, got {self.L_C}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def spacing(self) -> float:
        return self.spacing_wl * self.wavelength

    @property
    def speed(self) -> float:
        return self.speed_kmh / 3.6

    @property
    def noise_variance(self) -> float:
        return dbm_to_watt(self.noise_dbm)

    @property
    def ue_antennas(self) -> int:
        return self.ue_rows * self.ue_cols

    @property
    def n_ide_codewords(self) -> int:
        return (2 * self.gamma + 1) ** 2

    def as_dict(self) -> dict:
        return asdict(self)

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

