"""Numerical engine: kernels, designs, kriging solver, test functions, sampler, experiments."""
