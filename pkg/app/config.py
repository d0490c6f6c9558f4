from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Parameter recursion
    PARAM_TOL: float = 1e-12
    SINGULAR_RADIUS: float = 1e-300

    # Quadrature
    QUAD_TOL: float = 1e-9
    QUAD_MAX_SUBINTERVALS: int = 2000
    QUAD_TAIL_FRACTION: float = 1e-6
    QMC_LOG2_SAMPLES: int = 14
    QMC_REPLICATES: int = 8

    # Test families (inf removes the k3 cutoff)
    DEFAULT_K3: float = float("inf")

    # Eigen oracle
    ORACLE_INNER_RTOL: float = 1e-8
    ORACLE_OUTER_TOL: float = 1e-6
    ORACLE_MAX_ITERATIONS: int = 200
    ORACLE_MAX_CG_ITERATIONS: int = 20000

    # Sweeps and reports
    SWEEP_WORKERS: int = 1
    REPORT_DIR: str = "reports"
    LOG_LEVEL: str = "WARNING"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore"
    )


settings = Settings()
