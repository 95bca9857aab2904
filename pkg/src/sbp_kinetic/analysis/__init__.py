"""Post-processing of computed solutions: denoising, shock detection,
middle-state extraction, Riemann oracles and kinetic sweeps."""
