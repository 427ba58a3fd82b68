"""Ground-truth models, simulators, oracle quantities and Monte Carlo studies."""
