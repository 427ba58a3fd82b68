from pydantic_settings import BaseSettings
from pydantic import ConfigDict
from typing import Optional


class Settings(BaseSettings):
    # Logging
    log_level: str = "INFO"
    log_format: str = "text"  # text, json

    # Estimation defaults (the simulation settings: sup metric, k=1, r=2, m=2, 1-delta=0.95)
    default_delta: float = 0.05
    default_slack: float = 1.01
    default_radius_mode: str = "INF"
    default_gamma: float = 2.0

    # Resource guards
    trie_node_budget: int = 10_000_000
    dp_state_budget: int = 2_000_000
    oracle_tree_budget: int = 100_000

    # Numerical tolerances
    dp_tolerance: float = 1e-10
    dp_max_iter: int = 100_000
    stationary_tolerance: float = 1e-13
    renewal_tail_mass: float = 1e-12

    # Runtime
    default_threads: int = 1
    output_dir: Optional[str] = None

    model_config = ConfigDict(
        env_file=".env",
        env_prefix="GROUPTREE_",
        extra='ignore'  # Ignore extra fields instead of raising validation errors
    )


settings = Settings()
