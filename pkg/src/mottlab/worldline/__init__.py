"""Space-time representations: closed trajectories, excitation loops, transfer matrices."""
