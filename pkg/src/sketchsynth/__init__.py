"""Grammar-guided synthesis of Can't Stop strategies by SA and UCT, with sketches from behavioral cloning."""

__version__ = "0.1.0"
