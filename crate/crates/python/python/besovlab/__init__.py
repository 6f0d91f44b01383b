from besovlab._besovlab import (
    Grid,
    Spectral,
    fit_rate,
    run_config,
    suites,
)

__all__ = ["Grid", "Spectral", "fit_rate", "run_config", "suites"]
