"""Self-labeled datasets, classifier architectures, and training."""
