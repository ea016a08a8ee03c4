from .config import DEFAULT_CONFIG, load_config, merge_config
from .episode import EpisodeResult, StepRecord, run_episode, write_episode
from .agents import build_agent, SCRIPTED_AGENT_KINDS

__all__ = [
    "DEFAULT_CONFIG",
    "load_config",
    "merge_config",
    "EpisodeResult",
    "StepRecord",
    "run_episode",
    "write_episode",
    "build_agent",
    "SCRIPTED_AGENT_KINDS",
]
