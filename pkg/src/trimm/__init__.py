"""Real-time co-speech gesture synthesis engine.

Predicts next-action features from windowed text/audio feature sequences,
retrieves atomic motion clips from a k-NN motion graph under duration
constraints, and streams blended skeletal animation frames.
"""

__version__ = "0.1.0"
