from __future__ import annotations


class ConfigurationError(ValueError):
    pass


class RunLengthError(RuntimeError):
    pass


class EpisodeOrderError(RuntimeError):
    pass


class ConfidenceSetInconsistency(RuntimeError):
    pass


class ProjectionError(RuntimeError):
    def __init__(self, message: str, *, diagnostics: dict[str, object]) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics


class LearnerEpisodeError(RuntimeError):
    def __init__(self, message: str, *, episode: int) -> None:
        super().__init__(f"{message} (episode {episode})")
        self.episode = episode
