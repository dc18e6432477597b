from pydantic_settings import BaseSettings
from typing import Optional


class Settings(BaseSettings):
    app_name: str = "CNC-SCSG benchmark harness"
    debug: bool = False
    log_level: str = "INFO"

    # Where `run` and `sweep` write traces when no --out is given
    output_dir: str = "runs"

    # Dense Fisher / covariance matrices above this dimension are refused
    dense_matrix_cap: int = 256
    # Dense Hessian oracle (testing / certification) is only assembled up to this d
    dense_hessian_cap: int = 64

    # Spectral probe defaults; None means 10*d*log(d+1) rounded up
    probe_tol: float = 1e-6
    probe_max_iter: Optional[int] = None

    sweep_workers: int = 1

    class Config:
        extra = "allow"
        env_file = ".env"
        env_prefix = "CNCSCSG_"

    @property
    def effective_log_level(self) -> str:
        return "DEBUG" if self.debug else self.log_level.upper()


settings = Settings()
