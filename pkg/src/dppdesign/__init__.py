"""Cost-efficient batch-sequential D-optimal design for cloglog switching experiments."""
